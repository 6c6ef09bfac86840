//! Modified defining functions: multipliers, grafts, bends, quadratic
//! globalization, cutoff patches and Diederich–Fornæss bumps.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::classify::LeviDerivatives;
use crate::error::{Error, Result};
use crate::expr::{CExpr, Expr, Point4, ScalarField, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    Strict4,
    NormalDeriv,
    UserGiven,
}

/// A multiplier h together with the fields it was assembled from.
#[derive(Clone, Debug)]
pub struct MultiplierRecipe {
    pub kind: MultiplierKind,
    pub h: ScalarField,
    pub ingredients: BTreeMap<String, ScalarField>,
}

impl MultiplierRecipe {
    pub fn user(h: ScalarField) -> MultiplierRecipe {
        MultiplierRecipe {
            kind: MultiplierKind::UserGiven,
            h,
            ingredients: BTreeMap::new(),
        }
    }

    /// Audit record: every field re-emitted in the DSL.
    pub fn to_json(&self) -> Value {
        let ing: serde_json::Map<String, Value> = self
            .ingredients
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.to_dsl())))
            .collect();
        json!({
            "kind": self.kind,
            "h": self.h.to_dsl(),
            "ingredients": ing,
        })
    }
}

/// Symbolic H_r(V, W) = Σ r_{j k̄} V^j W̄^k.
pub fn hermitian_form(r: &ScalarField, v: &[CExpr; 2], w: &[CExpr; 2]) -> CExpr {
    let f = CExpr::real(r.expr().clone());
    let (rz, rw) = (f.dz(), f.dw());
    let m = [[rz.dzbar(), rz.dwbar()], [rw.dzbar(), rw.dwbar()]];
    let mut acc = CExpr::zero();
    for j in 0..2 {
        for k in 0..2 {
            acc = acc.add(&m[j][k].mul(&v[j]).mul(&w[k].conj()));
        }
    }
    acc
}

/// F = −(2/|dr|) H_r(L, N), the datum the strict type 4 multiplier must match.
pub fn strict4_datum(d: &LeviDerivatives) -> CExpr {
    let ff = &d.frame;
    let hln = hermitian_form(&ff.r, &ff.l, &ff.n);
    hln.scale(&Expr::int(-2).div(&ff.norm_dr))
}

/// F = −(1/|dr|) νΛ, the datum of the normal-derivative multiplier.
pub fn normal_datum(d: &LeviDerivatives) -> Expr {
    d.frame.apply_nu(&d.lambda).div(&d.frame.norm_dr).neg()
}

fn min_over(b: &Expr, r: &ScalarField, samples: &[Point4]) -> Result<Option<(Point4, f64)>> {
    let tape = Tape::compile(std::slice::from_ref(b));
    let mut worst: Option<(Point4, f64)> = None;
    for p in samples {
        r.check_region(p)?;
        let v = tape.eval(&p.arr())?[0];
        if worst.map_or(true, |(_, w)| v < w) {
            worst = Some((*p, v));
        }
    }
    Ok(worst)
}

/// h = Re F·A₁/B + Im F·A₂/B solving Lh = F + O(√λ) near strict type 4 points.
///
/// `samples` stand in for the region; B must exceed `tol` at each of them.
pub fn multiplier_strict4(r: &ScalarField, samples: &[Point4], tol: f64) -> Result<MultiplierRecipe> {
    let d = LeviDerivatives::new(r);
    let lbar = d.lbar();
    let lbar_l = d.lbar_l();
    let a1 = Expr::int(2).mul(&lbar_l.sub(&d.l_l).mul(&lbar).re);
    let a2 = Expr::int(2).mul(&lbar_l.add(&d.l_l).mul_i().mul(&lbar).re);
    let b = d.l_lbar.abs2().sub(&d.l_l.abs2());
    if let Some((p, v)) = min_over(&b, r, samples)? {
        if !(v > tol) {
            return Err(Error::StrictType4Violation { point: p.arr(), b: v });
        }
    }
    let f = strict4_datum(&d);
    let h = f.re.mul(&a1).div(&b).add(&f.im.mul(&a2).div(&b));
    let field = |e: &Expr| r.map(|_| e.clone());
    let mut ingredients = BTreeMap::new();
    ingredients.insert("A1".to_string(), field(&a1));
    ingredients.insert("A2".to_string(), field(&a2));
    ingredients.insert("B".to_string(), field(&b));
    ingredients.insert("F_re".to_string(), field(&f.re));
    ingredients.insert("F_im".to_string(), field(&f.im));
    Ok(MultiplierRecipe {
        kind: MultiplierKind::Strict4,
        h: field(&h),
        ingredients,
    })
}

/// h = F·A/B solving Lh = O(√λ), LL̄h = F + O(√λ) near type 4 points.
pub fn multiplier_normal(r: &ScalarField, samples: &[Point4], tol: f64) -> Result<MultiplierRecipe> {
    let d = LeviDerivatives::new(r);
    let a = d.l.abs2();
    let b = d.lambda.powi(2).add(&d.l_lbar.abs2()).add(&d.l_l.abs2());
    if let Some((p, v)) = min_over(&b, r, samples)? {
        if !(v > tol) {
            return Err(Error::TypeExceeds4 { point: p.arr(), b: v });
        }
    }
    let f = normal_datum(&d);
    let h = f.mul(&a).div(&b);
    let field = |e: &Expr| r.map(|_| e.clone());
    let mut ingredients = BTreeMap::new();
    ingredients.insert("A".to_string(), field(&a));
    ingredients.insert("B".to_string(), field(&b));
    ingredients.insert("F".to_string(), field(&f));
    Ok(MultiplierRecipe {
        kind: MultiplierKind::NormalDeriv,
        h: field(&h),
        ingredients,
    })
}

/// ρ = r·e^h.
pub fn graft(r: &ScalarField, h: &ScalarField) -> ScalarField {
    if h.expr().is_zero() {
        return r.clone();
    }
    r.map(|e| e.mul(&h.expr().exp()))
}

/// ρ + (C/2)ρ², the quadratic χ with χ(0) = 0, χ'(0) = 1, χ''(0) = C.
pub fn bend(rho: &ScalarField, c: f64) -> ScalarField {
    if c == 0.0 {
        return rho.clone();
    }
    rho.map(|e| e.add(&Expr::real(c / 2.0).mul(&e.powi(2))))
}

/// Constants of the quadratic globalization.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct GlobalizeConstants {
    pub k1: f64,
    pub k2: f64,
}

impl GlobalizeConstants {
    /// K₂ = 3C + 1 and K₁ = 3K₂D² + ¾C + 1.
    pub fn new(c: f64, d: f64) -> GlobalizeConstants {
        let k2 = 3.0 * c + 1.0;
        GlobalizeConstants {
            k2,
            k1: 3.0 * k2 * d * d + 0.75 * c + 1.0,
        }
    }

    /// ψ(p) = K₁ + K₂|p|².
    pub fn psi(&self, p: &Point4) -> f64 {
        self.k1 + self.k2 * p.norm().powi(2)
    }

    /// Whether 1 + 2rψ lies in [½, 3/2].
    pub fn in_shrunken_region(&self, r_value: f64, p: &Point4) -> bool {
        let s = 1.0 + 2.0 * r_value * self.psi(p);
        (0.5..=1.5).contains(&s)
    }
}

/// ρ = r + r²(K₁ + K₂|p|²) with |p|² = |z|² + |w|².
pub fn globalize_quadratic(r: &ScalarField, c: f64, d: f64) -> (ScalarField, GlobalizeConstants) {
    let k = GlobalizeConstants::new(c, d);
    let norm2 = Var::ALL
        .iter()
        .fold(Expr::zero(), |acc, v| acc.add(&Expr::var(*v).powi(2)));
    let psi = Expr::real(k.k1).add(&Expr::real(k.k2).mul(&norm2));
    (r.map(|e| e.add(&e.powi(2).mul(&psi))), k)
}

/// Smooth radial cutoff: 1 for |p − c| ≤ inner, 0 for |p − c| ≥ outer.
///
/// The transition uses φ(1−t)/(φ(1−t) + φ(t)) with φ(t) = exp(−1/t) on
/// t = (|p−c|² − inner²)/(outer² − inner²), so the patch is C^∞ everywhere.
pub fn cutoff(inner: f64, outer: f64, center: &Point4) -> Result<Expr> {
    if !(inner > 0.0 && outer > inner && outer.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "cutoff radii must satisfy 0 < inner < outer (got {inner}, {outer})"
        )));
    }
    let c = center.arr();
    let d2 = Var::ALL.iter().zip(c).fold(Expr::zero(), |acc, (v, ci)| {
        acc.add(&Expr::var(*v).sub(&Expr::real(ci)).powi(2))
    });
    let t = d2
        .sub(&Expr::real(inner * inner))
        .div(&Expr::real(outer * outer - inner * inner));
    let one_minus = Expr::one().sub(&t);
    let (a, b) = (one_minus.flat(), t.flat());
    Ok(a.div(&a.add(&b)))
}

/// r·e^{χh} with the cutoff χ of [`cutoff`].
pub fn cutoff_patch(r: &ScalarField, h: &ScalarField, inner: f64, outer: f64, center: &Point4) -> Result<ScalarField> {
    let chi = cutoff(inner, outer, center)?;
    if h.expr().is_zero() {
        return Ok(r.clone());
    }
    Ok(r.map(|e| e.mul(&chi.mul(h.expr()).exp())))
}

/// −(−r − Kr²)^η, defined where −r − Kr² > 0.
pub fn df_bump(r: &ScalarField, k: f64, eta: f64) -> Result<ScalarField> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParam(format!("interior exponent must lie in (0, 1], got {eta}")));
    }
    Ok(r.map(|e| {
        let inner = e.neg().sub(&Expr::real(k).mul(&e.powi(2)));
        inner.powf(eta).neg()
    }))
}

/// (r + Kr²)^μ, defined where r + Kr² > 0.
pub fn df_bump_ext(r: &ScalarField, k: f64, mu: f64) -> Result<ScalarField> {
    if !(mu >= 1.0 && mu.is_finite()) {
        return Err(Error::InvalidParam(format!("exterior exponent must be at least 1, got {mu}")));
    }
    Ok(r.map(|e| e.add(&Expr::real(k).mul(&e.powi(2))).powf(mu)))
}
