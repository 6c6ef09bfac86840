//! Canonical frames, complex and real Hessian forms, and the Levi form.
//!
//! For a defining function r with |dr| ≠ 0 the frame is
//!
//! ```text
//! L = (2/|dr|)(r_w ∂z − r_z ∂w),      N = (2/|dr|)(r_z̄ ∂z + r_w̄ ∂w),
//! L = ½(X + iY),                      N = ½(ν + iT),
//! ```
//!
//! so that |L| = |N| = 1/√2, Lr = 0, Nr = |∂r|/√2 and ν = ∇r/|∇r|, with
//! |∂r| = |dr|/√2. Real vectors are written in the coordinate basis
//! (∂x, ∂y, ∂u, ∂v).

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{compose_holo, CExpr, Expr, HoloMap, HoloPoly, Point4, ScalarField, Tape, Var};
use crate::TOL_BDRY;

pub type C2 = [Complex64; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Symbolic coefficient fields of the canonical frame of r.
#[derive(Clone, Debug)]
pub struct FrameFields {
    pub r: ScalarField,
    pub r_z: CExpr,
    pub r_w: CExpr,
    /// |dr|², free of square roots.
    pub norm_dr2: Expr,
    pub norm_dr: Expr,
    pub l: [CExpr; 2],
    pub n: [CExpr; 2],
    pub x: [Expr; 4],
    pub y: [Expr; 4],
    pub t: [Expr; 4],
    pub nu: [Expr; 4],
}

pub fn frame_fields(r: &ScalarField) -> FrameFields {
    let e = r.expr();
    let [rx, ry, ru, rv] = Var::ALL.map(|v| e.diff(v));
    let f = CExpr::real(e.clone());
    let r_z = f.dz();
    let r_w = f.dw();
    let norm_dr2 = rx.powi(2).add(&ry.powi(2)).add(&ru.powi(2)).add(&rv.powi(2));
    let norm_dr = norm_dr2.sqrt();
    let two_over = Expr::int(2).div(&norm_dr);
    let l = [r_w.scale(&two_over), r_z.neg().scale(&two_over)];
    let n = [r_z.conj().scale(&two_over), r_w.conj().scale(&two_over)];
    let s = |v: [Expr; 4]| v.map(|t| t.div(&norm_dr));
    FrameFields {
        r: r.clone(),
        x: s([ru.clone(), rv.neg(), rx.neg(), ry.clone()]),
        y: s([rv.neg(), ru.neg(), ry.clone(), rx.clone()]),
        t: s([ry.clone(), rx.neg(), rv.clone(), ru.neg()]),
        nu: s([rx, ry, ru, rv]),
        r_z,
        r_w,
        norm_dr2,
        norm_dr,
        l,
        n,
    }
}

impl FrameFields {
    /// L g = a g_z + b g_w.
    pub fn apply_l(&self, g: &CExpr) -> CExpr {
        g.apply_holo(&self.l[0], &self.l[1])
    }

    /// L̄ g = ā g_z̄ + b̄ g_w̄.
    pub fn apply_lbar(&self, g: &CExpr) -> CExpr {
        g.apply_antiholo(&self.l[0], &self.l[1])
    }

    pub fn apply_n(&self, g: &CExpr) -> CExpr {
        g.apply_holo(&self.n[0], &self.n[1])
    }

    /// Directional derivative along ν.
    pub fn apply_nu(&self, g: &Expr) -> Expr {
        real_directional(&self.nu, g)
    }

    pub fn apply_real(&self, dir: &[Expr; 4], g: &Expr) -> Expr {
        real_directional(dir, g)
    }
}

fn real_directional(dir: &[Expr; 4], g: &Expr) -> Expr {
    Var::ALL
        .iter()
        .zip(dir)
        .fold(Expr::zero(), |acc, (v, d)| acc.add(&d.mul(&g.diff(*v))))
}

/// The frame evaluated at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrameAt {
    #[serde(serialize_with = "crate::report::ser_c2")]
    pub l: C2,
    #[serde(serialize_with = "crate::report::ser_c2")]
    pub n: C2,
    pub x: [f64; 4],
    pub y: [f64; 4],
    pub t: [f64; 4],
    pub nu: [f64; 4],
    pub norm_dr: f64,
    pub norm_del_r: f64,
}

impl FrameAt {
    /// Frame built from the real gradient of r at p.
    pub fn from_gradient(g: [f64; 4], p: &Point4) -> Result<FrameAt> {
        let [rx, ry, ru, rv] = g;
        let nd = g.iter().map(|t| t * t).sum::<f64>().sqrt();
        if !(nd > 1e-14) || !nd.is_finite() {
            return Err(Error::DegenerateGradient {
                point: p.arr(),
                norm: nd,
            });
        }
        let r_z = c(0.5 * rx, -0.5 * ry);
        let r_w = c(0.5 * ru, -0.5 * rv);
        let k = 2.0 / nd;
        let s = |v: [f64; 4]| v.map(|t| t / nd);
        Ok(FrameAt {
            l: [r_w * k, -r_z * k],
            n: [r_z.conj() * k, r_w.conj() * k],
            x: s([ru, -rv, -rx, ry]),
            y: s([-rv, -ru, ry, rx]),
            t: s([ry, -rx, rv, -ru]),
            nu: s([rx, ry, ru, rv]),
            norm_dr: nd,
            norm_del_r: nd / std::f64::consts::SQRT_2,
        })
    }
}

/// Frame of r at p; fails where dr vanishes.
pub fn frame_at(r: &ScalarField, p: &Point4) -> Result<FrameAt> {
    let d = Order2::new(r).eval(p)?;
    FrameAt::from_gradient(d.grad, p)
}

/// Value, gradient and Hessian of a field at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivs2 {
    pub value: f64,
    pub grad: [f64; 4],
    pub hess: [[f64; 4]; 4],
}

/// Compiled evaluator for [`Derivs2`].
pub struct Order2 {
    field: ScalarField,
    tape: Tape,
}

impl Order2 {
    pub fn new(f: &ScalarField) -> Order2 {
        let e = f.expr();
        let mut outs = vec![e.clone()];
        let grad = Var::ALL.map(|v| e.diff(v));
        outs.extend(grad.iter().cloned());
        for i in 0..4 {
            for j in i..4 {
                outs.push(grad[i].diff(Var::from_index(j)));
            }
        }
        Order2 {
            field: f.clone(),
            tape: Tape::compile(&outs),
        }
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn eval(&self, p: &Point4) -> Result<Derivs2> {
        self.field.check_region(p)?;
        let v = self.tape.eval(&p.arr())?;
        let mut hess = [[0.0; 4]; 4];
        let mut k = 5;
        for i in 0..4 {
            for j in i..4 {
                hess[i][j] = v[k];
                hess[j][i] = v[k];
                k += 1;
            }
        }
        Ok(Derivs2 {
            value: v[0],
            grad: [v[1], v[2], v[3], v[4]],
            hess,
        })
    }
}

/// Complex second derivatives of a real function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wirtinger2 {
    pub z: Complex64,
    pub w: Complex64,
    pub zzbar: f64,
    pub zwbar: Complex64,
    pub wwbar: f64,
    pub zz: Complex64,
    pub zw: Complex64,
    pub ww: Complex64,
}

impl Derivs2 {
    pub fn wirtinger(&self) -> Wirtinger2 {
        let [fx, fy, fu, fv] = self.grad;
        let h = &self.hess;
        let (xx, xy, xu, xv) = (h[0][0], h[0][1], h[0][2], h[0][3]);
        let (yy, yu, yv) = (h[1][1], h[1][2], h[1][3]);
        let (uu, uv, vv) = (h[2][2], h[2][3], h[3][3]);
        Wirtinger2 {
            z: c(0.5 * fx, -0.5 * fy),
            w: c(0.5 * fu, -0.5 * fv),
            zzbar: 0.25 * (xx + yy),
            zwbar: c(0.25 * (xu + yv), 0.25 * (xv - yu)),
            wwbar: 0.25 * (uu + vv),
            zz: c(0.25 * (xx - yy), -0.5 * xy),
            zw: c(0.25 * (xu - yv), -0.25 * (xv + yu)),
            ww: c(0.25 * (uu - vv), -0.5 * uv),
        }
    }

    pub fn norm_dr(&self) -> f64 {
        self.grad.iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    pub fn real_form(&self, a: &[f64; 4], b: &[f64; 4]) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += a[i] * self.hess[i][j] * b[j];
            }
        }
        s
    }
}

impl Wirtinger2 {
    /// H(V, W) = Σ f_{j k̄} V^j W̄^k.
    pub fn hermitian(&self, v: &C2, w: &C2) -> Complex64 {
        let (w1, w2) = (w[0].conj(), w[1].conj());
        self.zzbar * v[0] * w1 + self.zwbar * v[0] * w2 + self.zwbar.conj() * v[1] * w1 + self.wwbar * v[1] * w2
    }

    /// Q(V, W) = Σ f_{jk} V^j W^k.
    pub fn quadratic(&self, v: &C2, w: &C2) -> Complex64 {
        self.zz * v[0] * w[0] + self.zw * (v[0] * w[1] + v[1] * w[0]) + self.ww * v[1] * w[1]
    }

    /// Levi value with the unnormalized field r_w∂z − r_z∂w.
    pub fn levi_raw(&self) -> f64 {
        let v = [self.w, -self.z];
        self.hermitian(&v, &v).re
    }

    /// Coordinate-basis Hermitian matrix.
    pub fn matrix(&self) -> HermitianMatrix2 {
        HermitianMatrix2 {
            h11: self.zzbar,
            h12: self.zwbar,
            h22: self.wwbar,
        }
    }
}

/// A 2×2 Hermitian matrix (h21 = conj h12).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HermitianMatrix2 {
    pub h11: f64,
    #[serde(serialize_with = "crate::report::ser_complex")]
    pub h12: Complex64,
    pub h22: f64,
}

impl HermitianMatrix2 {
    pub fn trace(&self) -> f64 {
        self.h11 + self.h22
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12.norm_sqr()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let d = ((self.h11 - self.h22).powi(2) + 4.0 * self.h12.norm_sqr()).sqrt();
        0.5 * (self.trace() - d)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let d = ((self.h11 - self.h22).powi(2) + 4.0 * self.h12.norm_sqr()).sqrt();
        0.5 * (self.trace() + d)
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        self.min_eigenvalue().abs().max(self.max_eigenvalue().abs())
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol * (1.0 + self.norm())
    }

    pub fn add(&self, o: &HermitianMatrix2) -> HermitianMatrix2 {
        HermitianMatrix2 {
            h11: self.h11 + o.h11,
            h12: self.h12 + o.h12,
            h22: self.h22 + o.h22,
        }
    }

    /// ξ* H ξ for ξ in the matrix basis.
    pub fn form(&self, xi: &C2) -> f64 {
        (self.h11 * xi[0].norm_sqr() + self.h22 * xi[1].norm_sqr()) + 2.0 * (self.h12 * xi[0] * xi[1].conj()).re
    }
}

/// A symmetric 4×4 matrix in the basis (X, Y, T, ν).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RealMatrix4 {
    pub m: [[f64; 4]; 4],
}

impl RealMatrix4 {
    /// Largest |m_ij − m_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut a: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                a = a.max((self.m[i][j] - self.m[j][i]).abs());
            }
        }
        a
    }
}

fn second_order(f: &ScalarField, p: &Point4) -> Result<Derivs2> {
    Order2::new(f).eval(p)
}

pub fn complex_hessian(f: &ScalarField, p: &Point4, v: &C2, w: &C2) -> Result<Complex64> {
    Ok(second_order(f, p)?.wirtinger().hermitian(v, w))
}

pub fn complex_quadratic(f: &ScalarField, p: &Point4, v: &C2, w: &C2) -> Result<Complex64> {
    Ok(second_order(f, p)?.wirtinger().quadratic(v, w))
}

pub fn real_hessian(f: &ScalarField, p: &Point4, v: &[f64; 4], w: &[f64; 4]) -> Result<f64> {
    Ok(second_order(f, p)?.real_form(v, w))
}

/// ∇_V W = Σ_j (V W^j) ∂_j for holomorphic fields with symbolic coefficients.
pub fn chern_nabla(v: &[CExpr; 2], w: &[CExpr; 2], p: &Point4) -> Result<C2> {
    let outs = [w[0].apply_holo(&v[0], &v[1]), w[1].apply_holo(&v[0], &v[1])];
    eval_c2(&outs, p)
}

/// ∇_V W̄ = Σ_j (V W̄^j) ∂_j̄, returned as the coefficients of (∂z̄, ∂w̄).
pub fn chern_nabla_bar(v: &[CExpr; 2], w: &[CExpr; 2], p: &Point4) -> Result<C2> {
    let outs = [w[0].conj().apply_holo(&v[0], &v[1]), w[1].conj().apply_holo(&v[0], &v[1])];
    eval_c2(&outs, p)
}

pub(crate) fn eval_c2(outs: &[CExpr; 2], p: &Point4) -> Result<C2> {
    let t = Tape::compile(&[outs[0].re.clone(), outs[0].im.clone(), outs[1].re.clone(), outs[1].im.clone()]);
    let v = t.eval(&p.arr())?;
    Ok([c(v[0], v[1]), c(v[2], v[3])])
}

fn check_on_boundary(value: f64, p: &Point4, tol: f64) -> Result<()> {
    if value.abs() > tol {
        return Err(Error::OffBoundary {
            point: p.arr(),
            value,
            tol,
        });
    }
    Ok(())
}

/// Levi value λ = H_r(L, L) at a boundary point, default boundary tolerance.
pub fn levi(r: &ScalarField, p: &Point4) -> Result<f64> {
    levi_tol(r, p, TOL_BDRY)
}

pub fn levi_tol(r: &ScalarField, p: &Point4, tol: f64) -> Result<f64> {
    let d = second_order(r, p)?;
    check_on_boundary(d.value, p, tol)?;
    levi_from(&d, p)
}

/// H_r(L, L) from local data, without the boundary check.
pub fn levi_from(d: &Derivs2, p: &Point4) -> Result<f64> {
    let f = FrameAt::from_gradient(d.grad, p)?;
    Ok(d.wirtinger().hermitian(&f.l, &f.l).re)
}

/// H_r(r_w∂z − r_z∂w, same), the Levi value before normalizing L.
pub fn levi_raw(r: &ScalarField, p: &Point4, tol: f64) -> Result<f64> {
    let d = second_order(r, p)?;
    check_on_boundary(d.value, p, tol)?;
    Ok(d.wirtinger().levi_raw())
}

/// Symbolic raw Levi expression r_zz̄|r_w|² − 2Re(r_zw̄ r_w r_z̄) + r_ww̄|r_z|².
pub fn levi_raw_field(r: &ScalarField) -> ScalarField {
    let f = CExpr::real(r.expr().clone());
    let (rz, rw) = (f.dz(), f.dw());
    let rzzb = rz.dzbar();
    let rzwb = rz.dwbar();
    let rwwb = rw.dwbar();
    let cross = rzwb.mul(&rw).mul(&rz.conj()).re;
    let e = rzzb
        .re
        .mul(&rw.abs2())
        .sub(&Expr::int(2).mul(&cross))
        .add(&rwwb.re.mul(&rz.abs2()));
    r.map(|_| e)
}

/// Ambient extension Λ = H_r(L, L) = 4Λ̃/|dr|² of the Levi form.
pub fn levi_field(r: &ScalarField) -> ScalarField {
    let raw = levi_raw_field(r);
    let ff = frame_fields(r);
    raw.map(|e| Expr::int(4).mul(e).div(&ff.norm_dr2))
}

/// ℋ_ρ in the frame (L, N) of `reference` (ρ itself when `None`).
pub fn hessian_matrix_ln(rho: &ScalarField, p: &Point4, reference: Option<&ScalarField>) -> Result<HermitianMatrix2> {
    let d = second_order(rho, p)?;
    let g = match reference {
        Some(r) => second_order(r, p)?.grad,
        None => d.grad,
    };
    let f = FrameAt::from_gradient(g, p)?;
    Ok(matrix_in_frame(&d.wirtinger(), &f))
}

pub fn matrix_in_frame(w: &Wirtinger2, f: &FrameAt) -> HermitianMatrix2 {
    HermitianMatrix2 {
        h11: w.hermitian(&f.l, &f.l).re,
        h12: w.hermitian(&f.l, &f.n),
        h22: w.hermitian(&f.n, &f.n).re,
    }
}

/// 𝒬_ρ in the frame (X, Y, T, ν) of `reference` (ρ itself when `None`).
pub fn real_hessian_matrix(rho: &ScalarField, p: &Point4, reference: Option<&ScalarField>) -> Result<RealMatrix4> {
    let d = second_order(rho, p)?;
    let g = match reference {
        Some(r) => second_order(r, p)?.grad,
        None => d.grad,
    };
    let f = FrameAt::from_gradient(g, p)?;
    Ok(real_matrix_in_frame(&d, &f))
}

pub fn real_matrix_in_frame(d: &Derivs2, f: &FrameAt) -> RealMatrix4 {
    let basis = [f.x, f.y, f.t, f.nu];
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = d.real_form(&basis[i], &basis[j]);
        }
    }
    RealMatrix4 { m }
}

/// Normal form at p0: a degree-2 holomorphic map Φ with Φ(0) = p0 and r' = r∘Φ.
///
/// Φ(z', w') = p0 + z'·m1 + (w' + βz'²)·m2 with m1 ⟂ ∂r unit, m2 scaled so
/// r'_w(0) = ½, and β = −Q_r(m1, m1) cancelling r'_zz(0).
pub fn normalize_at(r: &ScalarField, p0: &Point4) -> Result<(HoloMap, ScalarField)> {
    let d = second_order(r, p0)?;
    let w2 = d.wirtinger();
    let norm2 = w2.z.norm_sqr() + w2.w.norm_sqr();
    if !(norm2.sqrt() > 1e-14) {
        return Err(Error::DegenerateGradient {
            point: p0.arr(),
            norm: 2.0 * norm2.sqrt(),
        });
    }
    let nrm = norm2.sqrt();
    let m1 = [w2.w / nrm, -w2.z / nrm];
    let m2 = [w2.z.conj() / (2.0 * norm2), w2.w.conj() / (2.0 * norm2)];
    let beta = -w2.quadratic(&m1, &m1);
    let poly = |base: Complex64, a: Complex64, b: Complex64| HoloPoly {
        c0: base,
        cz: a,
        cw: b,
        czz: beta * b,
        czw: c(0.0, 0.0),
        cww: c(0.0, 0.0),
    };
    let phi = HoloMap {
        z: poly(p0.z(), m1[0], m2[0]),
        w: poly(p0.w(), m1[1], m2[1]),
    };
    let rp = compose_holo(r, &phi);
    Ok((phi, rp))
}

/// Residuals (|r'(0)|, |r'_z(0)|, |r'_w(0) − ½|, |r'_zz(0)|) of a normalized field.
pub fn normalization_residuals(rp: &ScalarField) -> Result<[f64; 4]> {
    let w = second_order(rp, &Point4::ORIGIN)?;
    let w2 = w.wirtinger();
    Ok([w.value.abs(), w2.z.norm(), (w2.w - c(0.5, 0.0)).norm(), w2.zz.norm()])
}
