//! Field wrappers, points, regions, Wirtinger derivatives and holomorphic composition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::complex::CExpr;
use super::eval::Tape;
use super::node::{Expr, Var};
use super::substitute_many;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ORDER: usize = 12;

/// A point of C² in real coordinates, z = x + iy, w = u + iv.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point4 {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

impl Point4 {
    pub const ORIGIN: Point4 = Point4 {
        x: 0.0,
        y: 0.0,
        u: 0.0,
        v: 0.0,
    };

    pub fn new(x: f64, y: f64, u: f64, v: f64) -> Point4 {
        Point4 { x, y, u, v }
    }

    pub fn arr(&self) -> [f64; 4] {
        [self.x, self.y, self.u, self.v]
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn w(&self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }

    pub fn from_zw(z: Complex64, w: Complex64) -> Point4 {
        Point4::new(z.re, z.im, w.re, w.im)
    }

    pub fn is_finite(&self) -> bool {
        self.arr().iter().all(|c| c.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.arr().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dist(&self, o: &Point4) -> f64 {
        self.arr().iter().zip(o.arr()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    /// `self + t·d`.
    pub fn offset(&self, d: &[f64; 4], t: f64) -> Point4 {
        let a = self.arr();
        Point4::from([a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2], a[3] + t * d[3]])
    }
}

impl From<[f64; 4]> for Point4 {
    fn from(a: [f64; 4]) -> Self {
        Point4::new(a[0], a[1], a[2], a[3])
    }
}

/// Axis-aligned box in (x, y, u, v).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box4 {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl Box4 {
    pub fn new(lo: [f64; 4], hi: [f64; 4]) -> Box4 {
        Box4 { lo, hi }
    }

    /// The cube of half-width `r` around `c`.
    pub fn cube(c: Point4, r: f64) -> Box4 {
        let a = c.arr();
        Box4 {
            lo: a.map(|t| t - r),
            hi: a.map(|t| t + r),
        }
    }

    pub fn contains(&self, p: &Point4) -> bool {
        p.arr()
            .iter()
            .enumerate()
            .all(|(i, t)| *t >= self.lo[i] && *t <= self.hi[i])
    }

    pub fn center(&self) -> Point4 {
        Point4::from([0, 1, 2, 3].map(|i| 0.5 * (self.lo[i] + self.hi[i])))
    }

    /// Point at fractional coordinates `t ∈ [0,1]⁴`.
    pub fn lerp(&self, t: [f64; 4]) -> Point4 {
        Point4::from([0, 1, 2, 3].map(|i| self.lo[i] + t[i] * (self.hi[i] - self.lo[i])))
    }

    pub fn is_valid(&self) -> bool {
        (0..4).all(|i| self.lo[i].is_finite() && self.hi[i].is_finite() && self.lo[i] <= self.hi[i])
    }
}

/// A smooth real-valued function on a region of C².
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    expr: Expr,
    region: Option<Box4>,
}

impl ScalarField {
    pub fn new(expr: Expr) -> ScalarField {
        ScalarField { expr, region: None }
    }

    pub fn with_region(mut self, region: Box4) -> ScalarField {
        self.region = Some(region);
        self
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn region(&self) -> Option<&Box4> {
        self.region.as_ref()
    }

    /// Same region, different expression.
    pub fn map(&self, f: impl FnOnce(&Expr) -> Expr) -> ScalarField {
        ScalarField {
            expr: f(&self.expr),
            region: self.region,
        }
    }

    pub fn check_region(&self, p: &Point4) -> Result<()> {
        match &self.region {
            Some(b) if !b.contains(p) => Err(Error::OutOfRegion { point: p.arr() }),
            _ if !p.is_finite() => Err(Error::OutOfRegion { point: p.arr() }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, p: &Point4) -> Result<f64> {
        self.check_region(p)?;
        Ok(Tape::of(&self.expr).eval(&p.arr())?[0])
    }

    pub fn diff(&self, v: Var) -> ScalarField {
        self.map(|e| e.diff(v))
    }

    pub fn gradient(&self) -> [ScalarField; 4] {
        Var::ALL.map(|v| self.diff(v))
    }

    /// DSL text of the expression.
    pub fn to_dsl(&self) -> String {
        self.expr.to_string()
    }
}

/// A complex-valued field as a pair of real fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub re: ScalarField,
    pub im: ScalarField,
}

impl ComplexField {
    pub fn from_cexpr(c: CExpr, region: Option<Box4>) -> ComplexField {
        let wrap = |e: Expr| ScalarField { expr: e, region };
        ComplexField {
            re: wrap(c.re),
            im: wrap(c.im),
        }
    }

    pub fn cexpr(&self) -> CExpr {
        CExpr::new(self.re.expr.clone(), self.im.expr.clone())
    }

    pub fn eval(&self, p: &Point4) -> Result<Complex64> {
        self.re.check_region(p)?;
        let t = Tape::compile(&[self.re.expr.clone(), self.im.expr.clone()]);
        let v = t.eval(&p.arr())?;
        Ok(Complex64::new(v[0], v[1]))
    }
}

/// ∂_z^{a_z} ∂_z̄^{b_zbar} ∂_w^{a_w} ∂_w̄^{b_wbar} f with the default order limit.
pub fn wirtinger(f: &ScalarField, a_z: usize, b_zbar: usize, a_w: usize, b_wbar: usize) -> Result<ComplexField> {
    wirtinger_max(f, [a_z, b_zbar, a_w, b_wbar], DEFAULT_MAX_ORDER)
}

pub fn wirtinger_max(f: &ScalarField, orders: [usize; 4], max_order: usize) -> Result<ComplexField> {
    let order: usize = orders.iter().sum();
    if order > max_order {
        return Err(Error::OrderExceeded { order, max: max_order });
    }
    let mut c = CExpr::real(f.expr.clone());
    for _ in 0..orders[0] {
        c = c.dz();
    }
    for _ in 0..orders[1] {
        c = c.dzbar();
    }
    for _ in 0..orders[2] {
        c = c.dw();
    }
    for _ in 0..orders[3] {
        c = c.dwbar();
    }
    Ok(ComplexField::from_cexpr(c, f.region))
}

/// A holomorphic polynomial of degree ≤ 2 in (z, w).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoloPoly {
    pub c0: Complex64,
    pub cz: Complex64,
    pub cw: Complex64,
    pub czz: Complex64,
    pub czw: Complex64,
    pub cww: Complex64,
}

impl HoloPoly {
    pub fn zero() -> HoloPoly {
        let o = Complex64::new(0.0, 0.0);
        HoloPoly {
            c0: o,
            cz: o,
            cw: o,
            czz: o,
            czw: o,
            cww: o,
        }
    }

    pub fn eval(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.c0 + self.cz * z + self.cw * w + self.czz * z * z + self.czw * z * w + self.cww * w * w
    }

    pub fn d_dz(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.cz + 2.0 * self.czz * z + self.czw * w
    }

    pub fn d_dw(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.cw + self.czw * z + 2.0 * self.cww * w
    }

    fn to_cexpr(self, z: &CExpr, w: &CExpr) -> CExpr {
        let k = |c: Complex64| CExpr::new(constant(c.re), constant(c.im));
        let terms = [
            (self.c0, CExpr::one()),
            (self.cz, z.clone()),
            (self.cw, w.clone()),
            (self.czz, z.mul(z)),
            (self.czw, z.mul(w)),
            (self.cww, w.mul(w)),
        ];
        terms
            .iter()
            .filter(|(c, _)| *c != Complex64::new(0.0, 0.0))
            .fold(CExpr::zero(), |acc, (c, m)| acc.add(&k(*c).mul(m)))
    }
}

fn constant(v: f64) -> Expr {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        Expr::int(v as i64)
    } else {
        Expr::real(v)
    }
}

/// Φ(z, w) = (z', w').
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoloMap {
    pub z: HoloPoly,
    pub w: HoloPoly,
}

impl HoloMap {
    pub fn identity() -> HoloMap {
        let mut z = HoloPoly::zero();
        z.cz = Complex64::new(1.0, 0.0);
        let mut w = HoloPoly::zero();
        w.cw = Complex64::new(1.0, 0.0);
        HoloMap { z, w }
    }

    pub fn apply(&self, p: &Point4) -> Point4 {
        Point4::from_zw(self.z.eval(p.z(), p.w()), self.w.eval(p.z(), p.w()))
    }

    /// Complex Jacobian [[∂z'/∂z, ∂z'/∂w], [∂w'/∂z, ∂w'/∂w]] at p.
    pub fn jacobian(&self, p: &Point4) -> [[Complex64; 2]; 2] {
        let (z, w) = (p.z(), p.w());
        [
            [self.z.d_dz(z, w), self.z.d_dw(z, w)],
            [self.w.d_dz(z, w), self.w.d_dw(z, w)],
        ]
    }
}

/// f ∘ Φ with real and imaginary parts expanded in (x, y, u, v).
///
/// The region of the result is dropped, since the preimage of a box is not a box.
pub fn compose_holo(f: &ScalarField, phi: &HoloMap) -> ScalarField {
    let z = CExpr::new(Expr::var(Var::X), Expr::var(Var::Y));
    let w = CExpr::new(Expr::var(Var::U), Expr::var(Var::V));
    let zp = phi.z.to_cexpr(&z, &w);
    let wp = phi.w.to_cexpr(&z, &w);
    let out = substitute_many(std::slice::from_ref(&f.expr), &[zp.re, zp.im, wp.re, wp.im]);
    ScalarField::new(out[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_field, Params};

    fn field(s: &str) -> ScalarField {
        parse_field(s, &Params::new()).unwrap()
    }

    #[test]
    fn wirtinger_of_abs_z_squared_is_zbar() {
        let f = field("x^2+y^2");
        let d = wirtinger(&f, 1, 0, 0, 0).unwrap();
        let v = d.eval(&Point4::new(0.3, -0.7, 0.1, 0.2)).unwrap();
        assert!((v - Complex64::new(0.3, 0.7)).norm() < 1e-15);
    }

    #[test]
    fn order_limit_is_enforced() {
        let f = field("x");
        assert!(matches!(
            wirtinger(&f, 7, 6, 0, 0),
            Err(Error::OrderExceeded { order: 13, max: 12 })
        ));
    }

    #[test]
    fn composition_with_a_shear() {
        let f = field("u + absz2^2");
        let mut phi = HoloMap::identity();
        phi.w.czz = Complex64::new(1.0, 0.0);
        let g = compose_holo(&f, &phi);
        assert_eq!(g.eval(&Point4::new(1.0, 0.0, 0.0, 0.0)).unwrap(), 2.0);
    }

    #[test]
    fn region_is_enforced() {
        let f = field("x").with_region(Box4::cube(Point4::ORIGIN, 1.0));
        assert!(f.eval(&Point4::new(0.5, 0.0, 0.0, 0.0)).is_ok());
        assert!(matches!(
            f.eval(&Point4::new(1.5, 0.0, 0.0, 0.0)),
            Err(Error::OutOfRegion { .. })
        ));
    }
}
