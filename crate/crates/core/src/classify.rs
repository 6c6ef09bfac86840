//! Classification of boundary points: pseudoconvexity, finite type, and the
//! strict and Kohn variants of type 4.
//!
//! Iterated derivatives of λ along words in {L, L̄} are taken on the ambient
//! extension Λ = H_r(L, L). Since L and L̄ are tangential, these agree with
//! the intrinsic boundary derivatives at boundary points.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::boundary::BoundarySample;
use crate::cframe::{frame_fields, levi_field, normalization_residuals, FrameFields, Order2};
use crate::error::{Error, Result};
use crate::expr::{CExpr, Expr, Point4, ScalarField, Tape, DEFAULT_MAX_ORDER};
use crate::jet::{eval_tape, CJet, Jet, JetSpace};
use crate::{TOL_BDRY, TOL_ZERO};

/// Symbolic Λ and its first and second derivatives along the frame.
#[derive(Clone, Debug)]
pub struct LeviDerivatives {
    pub frame: FrameFields,
    pub lambda: Expr,
    /// LΛ; L̄Λ is its conjugate.
    pub l: CExpr,
    /// L L̄ Λ; L̄ L Λ is its conjugate.
    pub l_lbar: CExpr,
    /// L L Λ; L̄ L̄ Λ is its conjugate.
    pub l_l: CExpr,
}

impl LeviDerivatives {
    pub fn new(r: &ScalarField) -> LeviDerivatives {
        let frame = frame_fields(r);
        let lambda = levi_field(r).expr().clone();
        let l = frame.apply_l(&CExpr::real(lambda.clone()));
        let l_lbar = frame.apply_l(&l.conj());
        let l_l = frame.apply_l(&l);
        LeviDerivatives {
            frame,
            lambda,
            l,
            l_lbar,
            l_l,
        }
    }

    pub fn lbar(&self) -> CExpr {
        self.l.conj()
    }

    pub fn lbar_l(&self) -> CExpr {
        self.l_lbar.conj()
    }
}

/// (L L̄ λ)(p) and (L L λ)(p).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Type4Values {
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub l_lbar: Complex64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub l_l: Complex64,
}

impl Type4Values {
    /// max(1, |LL̄λ|, |LLλ|), the scale of the zero tests.
    pub fn scale(&self) -> f64 {
        1f64.max(self.l_lbar.norm()).max(self.l_l.norm())
    }

    /// LL̄λ − κ|LLλ|.
    pub fn margin(&self, kappa: f64) -> f64 {
        self.l_lbar.re - kappa * self.l_l.norm()
    }
}

fn eval_cexprs(outs: &[&CExpr], p: &Point4) -> Result<Vec<Complex64>> {
    let roots: Vec<Expr> = outs.iter().flat_map(|c| [c.re.clone(), c.im.clone()]).collect();
    let v = Tape::compile(&roots).eval(&p.arr())?;
    Ok(v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

fn on_boundary(r: &ScalarField, p: &Point4, tol: f64) -> Result<f64> {
    let value = r.eval(p)?;
    if value.abs() > tol {
        return Err(Error::OffBoundary {
            point: p.arr(),
            value,
            tol,
        });
    }
    Ok(value)
}

/// The two second-order tangential derivatives of λ at a weakly pseudoconvex point.
pub fn type4_inequality(r: &ScalarField, p: &Point4) -> Result<Type4Values> {
    type4_values(&LeviDerivatives::new(r), r, p, TOL_ZERO)
}

fn type4_values(d: &LeviDerivatives, r: &ScalarField, p: &Point4, tol_zero: f64) -> Result<Type4Values> {
    on_boundary(r, p, TOL_BDRY)?;
    r.check_region(p)?;
    let lam = Tape::compile(std::slice::from_ref(&d.lambda)).eval(&p.arr())?[0];
    if lam > tol_zero {
        return Err(Error::Precondition(format!(
            "λ = {lam:e} > {tol_zero:e}: the point is strictly pseudoconvex"
        )));
    }
    let v = eval_cexprs(&[&d.l_lbar, &d.l_l], p)?;
    Ok(Type4Values { l_lbar: v[0], l_l: v[1] })
}

/// Strict type 4 verdict at a boundary point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strict4 {
    Strict,
    Weak,
    NotApplicable,
}

/// The type c_p, or the fact that every word up to the order budget vanished.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteType {
    Finite(usize),
    ExceedsMaxOrder(usize),
}

impl FiniteType {
    pub fn order(&self) -> Option<usize> {
        match self {
            FiniteType::Finite(k) => Some(*k),
            FiniteType::ExceedsMaxOrder(_) => None,
        }
    }
}

/// Pointwise pseudoconvexity verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pseudoconvexity {
    Strict,
    /// Weakly pseudoconvex: λ vanishes and no local obstruction is visible at the point.
    Weak,
    No,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub tol_zero: f64,
    pub tol_bdry: f64,
    pub max_order: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_zero: TOL_ZERO,
            tol_bdry: TOL_BDRY,
            max_order: DEFAULT_MAX_ORDER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeReport {
    pub point: Point4,
    pub lambda: f64,
    pub pseudoconvex: Pseudoconvexity,
    pub c_p: FiniteType,
    /// Values of (L_m ⋯ L_1 λ)(p), keyed by the word written left to right.
    #[serde(serialize_with = "ser_words")]
    pub lambda_derivs: BTreeMap<String, Complex64>,
    pub type4: Option<Type4Values>,
    pub strict4: Strict4,
    pub kohn4: Option<bool>,
    pub tolerances: Tolerances,
}

fn ser_words<S: serde::Serializer>(m: &BTreeMap<String, Complex64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &[v.re, v.im])?;
    }
    map.end()
}

/// Result of the word search.
#[derive(Clone, Debug)]
pub struct WordSearch {
    pub c_p: FiniteType,
    pub lambda: f64,
    /// All words up to the deciding length.
    pub words: BTreeMap<String, Complex64>,
}

fn frame_jets(sp: &JetSpace, r: &Jet) -> (CJet, CJet, Jet) {
    let f = CJet::real(r.clone());
    let rz = f.dz(sp);
    let rw = f.dw(sp);
    let rzzb = rz.dzbar(sp);
    let rzwb = rz.dwbar(sp);
    let rwwb = rw.dwbar(sp);
    let cross = rzwb.mul(sp, &rw).mul(sp, &rz.conj()).re;
    let raw = rzzb
        .re
        .mul(sp, &rw.abs2(sp))
        .sub(sp, &cross.scale(2.0))
        .add(sp, &rwwb.re.mul(sp, &rz.abs2(sp)));
    // |∂r|² = |r_z|² + |r_w|², so Λ = 4Λ̃/|dr|² = Λ̃/|∂r|² and L = (r_w, −r_z)/|∂r|
    let del2 = rz.abs2(sp).add(sp, &rw.abs2(sp));
    let lambda = raw.div(sp, &del2);
    let inv = del2.func(sp, crate::expr::Func::Sqrt).recip(sp);
    let a = rw.mul_real(sp, &inv);
    let b = rz.mul_real(sp, &inv).scale(-1.0);
    (a, b, lambda)
}

fn apply_l(sp: &JetSpace, a: &CJet, b: &CJet, g: &CJet) -> CJet {
    a.mul(sp, &g.dz(sp)).add(sp, &b.mul(sp, &g.dw(sp)))
}

fn apply_lbar(sp: &JetSpace, a: &CJet, b: &CJet, g: &CJet) -> CJet {
    a.conj().mul(sp, &g.dzbar(sp)).add(sp, &b.conj().mul(sp, &g.dwbar(sp)))
}

/// Smallest k with some word of length k − 2 in {L, L̄} not vanishing on λ at p.
///
/// Derivatives come from Taylor jets of r at p. A word value counts as
/// nonzero when it exceeds `tol_zero` times the largest magnitude met at
/// lower orders (at least 1).
pub fn point_type(r: &ScalarField, p: &Point4, max_order: usize, tol_zero: f64) -> Result<WordSearch> {
    if max_order < 2 {
        return Err(Error::InvalidParam(format!("max_order {max_order} < 2")));
    }
    on_boundary(r, p, TOL_BDRY)?;
    r.check_region(p)?;
    let d = Order2::new(r).eval(p)?;
    crate::cframe::FrameAt::from_gradient(d.grad, p)?;
    let sp = JetSpace::shared(max_order);
    let rj = eval_tape(&sp, &Tape::of(r.expr()), &p.arr(), max_order)?.remove(0);
    let (a, b, lam) = frame_jets(&sp, &rj);
    let lambda = lam.value();
    let mut words = BTreeMap::new();
    words.insert(String::new(), Complex64::new(lambda, 0.0));
    if lambda.abs() > tol_zero {
        return Ok(WordSearch {
            c_p: FiniteType::Finite(2),
            lambda,
            words,
        });
    }
    let mut scale: f64 = 1f64.max(lambda.abs());
    let mut level: Vec<(String, CJet)> = vec![(String::new(), CJet::real(lam))];
    for m in 1..=max_order - 2 {
        let mut next = Vec::with_capacity(level.len() * 2);
        for (w, g) in &level {
            next.push((prepend("L", w), apply_l(&sp, &a, &b, g)));
            next.push((prepend("Lbar", w), apply_lbar(&sp, &a, &b, g)));
        }
        let top = next.iter().map(|(_, g)| g.value().norm()).fold(0.0, f64::max);
        for (w, g) in &next {
            words.insert(w.clone(), g.value());
        }
        if top > tol_zero * scale {
            return Ok(WordSearch {
                c_p: FiniteType::Finite(m + 2),
                lambda,
                words,
            });
        }
        scale = scale.max(top);
        level = next;
    }
    Ok(WordSearch {
        c_p: FiniteType::ExceedsMaxOrder(max_order),
        lambda,
        words,
    })
}

fn prepend(op: &str, w: &str) -> String {
    if w.is_empty() {
        op.to_string()
    } else {
        format!("{op} {w}")
    }
}

/// Strict type 4 verdict: LL̄λ − |LLλ| > tol·scale.
pub fn strict_type4(r: &ScalarField, p: &Point4, tol: f64) -> Result<Strict4> {
    let d = LeviDerivatives::new(r);
    strict_from(&d, r, p, tol, DEFAULT_MAX_ORDER)
}

fn strict_from(d: &LeviDerivatives, r: &ScalarField, p: &Point4, tol: f64, max_order: usize) -> Result<Strict4> {
    let v = match type4_values(d, r, p, tol) {
        Ok(v) => v,
        Err(Error::Precondition(_)) => return Ok(Strict4::NotApplicable),
        Err(e) => return Err(e),
    };
    if v.margin(1.0) > tol * v.scale() {
        return Ok(Strict4::Strict);
    }
    let t = point_type(r, p, max_order.min(6).max(4), tol)?;
    Ok(if t.c_p == FiniteType::Finite(4) {
        Strict4::Weak
    } else {
        Strict4::NotApplicable
    })
}

/// Kohn's threshold LL̄λ > (4/3)|LLλ|; `None` away from type-4 weak points.
pub fn kohn_strict_type4(r: &ScalarField, p: &Point4, tol: f64) -> Result<Option<bool>> {
    let d = LeviDerivatives::new(r);
    kohn_from(&d, r, p, tol)
}

fn kohn_from(d: &LeviDerivatives, r: &ScalarField, p: &Point4, tol: f64) -> Result<Option<bool>> {
    let v = match type4_values(d, r, p, tol) {
        Ok(v) => v,
        Err(Error::Precondition(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if v.l_lbar.norm() <= tol * v.scale() && v.l_l.norm() <= tol * v.scale() {
        return Ok(None);
    }
    Ok(Some(v.margin(4.0 / 3.0) > tol * v.scale()))
}

/// Full report at a boundary point.
pub fn classify_point(r: &ScalarField, p: &Point4, tols: &Tolerances) -> Result<TypeReport> {
    let search = point_type(r, p, tols.max_order, tols.tol_zero)?;
    let lambda = search.lambda;
    let (mut type4, mut strict4, mut kohn4) = (None, Strict4::NotApplicable, None);
    let mut pseudoconvex = if lambda > tols.tol_zero {
        Pseudoconvexity::Strict
    } else if lambda < -tols.tol_zero {
        Pseudoconvexity::No
    } else {
        Pseudoconvexity::Weak
    };
    if pseudoconvex == Pseudoconvexity::Weak {
        match search.c_p {
            FiniteType::Finite(k) if k % 2 == 1 => pseudoconvex = Pseudoconvexity::No,
            FiniteType::Finite(4) => {
                let d = LeviDerivatives::new(r);
                let v = type4_values(&d, r, p, tols.tol_zero)?;
                if v.margin(1.0) < -tols.tol_zero * v.scale() {
                    pseudoconvex = Pseudoconvexity::No;
                }
                strict4 = if v.margin(1.0) > tols.tol_zero * v.scale() {
                    Strict4::Strict
                } else {
                    Strict4::Weak
                };
                kohn4 = Some(v.margin(4.0 / 3.0) > tols.tol_zero * v.scale());
                type4 = Some(v);
            }
            _ => {}
        }
    }
    Ok(TypeReport {
        point: *p,
        lambda,
        pseudoconvex,
        c_p: search.c_p,
        lambda_derivs: search.words,
        type4,
        strict4,
        kohn4,
        tolerances: *tols,
    })
}

/// Outcome of a sampled sign check of λ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PseudoconvexScan {
    pub pass: bool,
    pub min_lambda: f64,
    pub samples: usize,
    /// The most negative samples, at most five.
    pub witnesses: Vec<(Point4, f64)>,
}

/// Passes iff λ ≥ −tol at every sample.
pub fn pseudoconvex_scan(samples: &[BoundarySample], tol: f64) -> Result<PseudoconvexScan> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted: Vec<(Point4, f64)> = samples.iter().map(|s| (s.point, s.lambda)).collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let min_lambda = sorted[0].1;
    let pass = min_lambda >= -tol;
    let witnesses = if pass {
        Vec::new()
    } else {
        sorted.into_iter().take_while(|s| s.1 < -tol).take(5).collect()
    };
    Ok(PseudoconvexScan {
        pass,
        min_lambda,
        samples: samples.len(),
        witnesses,
    })
}

/// Positive definiteness of the (x, y) Hessian of Λ(·, 0) at the origin for a normalized r.
pub fn strict4_coordinate_test(r: &ScalarField, tol: f64) -> Result<bool> {
    let res = normalization_residuals(r)?;
    if res.iter().any(|t| *t > 1e-10) {
        return Err(Error::Precondition(format!(
            "r is not normalized at the origin (residuals {res:?})"
        )));
    }
    let a = lambda_xy_hessian(r)?;
    let scale = 1f64.max(a[0][0].abs()).max(a[1][1].abs()).max(a[0][1].abs());
    let trace = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[0][1];
    Ok(trace > tol * scale && det > tol * scale * scale)
}

/// [[Λ_xx, Λ_xy], [Λ_xy, Λ_yy]] at the origin.
pub fn lambda_xy_hessian(r: &ScalarField) -> Result<[[f64; 2]; 2]> {
    let lam = levi_field(r);
    let h = Order2::new(&lam).eval(&Point4::ORIGIN)?.hess;
    Ok([[h[0][0], h[0][1]], [h[1][0], h[1][1]]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_field, Params};

    fn field(s: &str) -> ScalarField {
        parse_field(s, &Params::new()).unwrap()
    }

    fn model(a: f64) -> ScalarField {
        let mut ps = Params::new();
        ps.insert("a".into(), a);
        parse_field("u + $a*absz2*(x^2-y^2) + absz2^2", &ps).unwrap()
    }

    #[test]
    fn types_of_simple_tubes() {
        let o = Point4::ORIGIN;
        let t = |s: &str| point_type(&field(s), &o, 12, TOL_ZERO).unwrap().c_p;
        assert_eq!(t("u + absz2"), FiniteType::Finite(2));
        assert_eq!(t("u + absz2^2"), FiniteType::Finite(4));
        assert_eq!(t("u + absz2^3"), FiniteType::Finite(6));
        assert_eq!(t("u"), FiniteType::ExceedsMaxOrder(12));
    }

    #[test]
    fn model_type4_values() {
        for a in [0.0, 0.5, 1.2] {
            let v = type4_inequality(&model(a), &Point4::ORIGIN).unwrap();
            assert!((v.l_lbar - Complex64::new(4.0, 0.0)).norm() < 1e-12, "{v:?}");
            assert!((v.l_l - Complex64::new(3.0 * a, 0.0)).norm() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn jet_words_agree_with_symbolic_values() {
        let r = model(0.7);
        let s = point_type(&r, &Point4::ORIGIN, 6, TOL_ZERO).unwrap();
        let v = type4_inequality(&r, &Point4::ORIGIN).unwrap();
        assert!((s.words["L Lbar"] - v.l_lbar).norm() < 1e-10);
        assert!((s.words["L L"] - v.l_l).norm() < 1e-10);
    }

    #[test]
    fn strict_and_kohn_thresholds() {
        let o = Point4::ORIGIN;
        assert_eq!(strict_type4(&model(1.2), &o, TOL_ZERO).unwrap(), Strict4::Strict);
        assert_eq!(strict_type4(&model(4.0 / 3.0), &o, TOL_ZERO).unwrap(), Strict4::Weak);
        assert_eq!(kohn_strict_type4(&model(0.9), &o, TOL_ZERO).unwrap(), Some(true));
        assert_eq!(kohn_strict_type4(&model(1.0), &o, TOL_ZERO).unwrap(), Some(false));
        assert_eq!(kohn_strict_type4(&model(1.2), &o, TOL_ZERO).unwrap(), Some(false));
        assert_eq!(strict_type4(&field("u + absz2"), &o, TOL_ZERO).unwrap(), Strict4::NotApplicable);
        assert_eq!(strict_type4(&field("u + absz2^3"), &o, TOL_ZERO).unwrap(), Strict4::NotApplicable);
    }

    #[test]
    fn tanlog_is_weak_type4_at_origin() {
        let r = field("u - (1/2)*(x-v)^2 - ln(cos(x))");
        let rep = classify_point(&r, &Point4::ORIGIN, &Tolerances::default()).unwrap();
        assert_eq!(rep.c_p, FiniteType::Finite(4));
        assert_eq!(rep.strict4, Strict4::Weak);
        assert_eq!(rep.pseudoconvex, Pseudoconvexity::Weak);
        assert!(!strict4_coordinate_test(&r, TOL_ZERO).unwrap());
    }

    #[test]
    fn coordinate_test_matches_hessian() {
        assert!(strict4_coordinate_test(&field("u + absz2^2"), TOL_ZERO).unwrap());
        assert!(!strict4_coordinate_test(&field("u + absz2^3"), TOL_ZERO).unwrap());
        assert!(!strict4_coordinate_test(&model(4.0 / 3.0), TOL_ZERO).unwrap());
        assert!(strict4_coordinate_test(&model(1.2), TOL_ZERO).unwrap());
        let a = lambda_xy_hessian(&field("u + absz2^2")).unwrap();
        assert!((a[0][0] - 8.0).abs() < 1e-12 && (a[1][1] - 8.0).abs() < 1e-12 && a[0][1].abs() < 1e-12);
        assert!(matches!(
            strict4_coordinate_test(&field("u + x + absz2^2"), TOL_ZERO),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn non_pseudoconvex_model_is_flagged() {
        let rep = classify_point(&model(1.4), &Point4::ORIGIN, &Tolerances::default()).unwrap();
        assert_eq!(rep.pseudoconvex, Pseudoconvexity::No);
        assert_eq!(rep.c_p, FiniteType::Finite(4));
    }
}
