//! Sampled certificates for positivity and Landau-class conditions.
//!
//! A big-O condition f = O(g) is judged empirically: sample sets at two or
//! more refinement levels approach the degenerate locus, and the maximal
//! ratio |f|/|g| must stay within a growth cap from level to level while
//! the residual |f| on samples with |g| ≤ λ_min shrinks. Certificates are
//! evidence or falsifiers, never proofs.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::boundary::SampleSet;
use crate::cframe::{
    frame_fields, levi_field, matrix_in_frame, real_matrix_in_frame, Derivs2, FrameAt, HermitianMatrix2, Order2,
};
use crate::classify::{point_type, LeviDerivatives};
use crate::construct::{df_bump, df_bump_ext, strict4_datum, normal_datum, MultiplierKind, MultiplierRecipe};
use crate::error::{Error, Result};
use crate::expr::{CExpr, Expr, Point4, ScalarField, Tape};
use crate::{LAMBDA_MIN, TOL_ZERO};

type C2 = [Complex64; 2];

/// Default relative eigenvalue tolerance.
pub const PSD_TOL: f64 = 1e-9;
/// Default growth cap between consecutive refinement levels.
pub const GROWTH_CAP: f64 = 2.0;
/// Ratio maxima below this count as zero when comparing levels.
pub const RATIO_FLOOR: f64 = 1e-9;
/// Fewer samples above λ_min at some level makes a ratio certificate inconclusive.
pub const MIN_ABOVE: usize = 8;
/// Version of the direction grid used by [`basic_estimate_c`].
pub const DIRECTION_GRID_VERSION: u32 = 1;
/// Largest C tried by [`required_c`].
pub const REQUIRED_C_MAX: f64 = 1e6;

const MAX_WITNESSES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionId {
    PshBoundary,
    PshOpen,
    CondLn,
    CondNormal,
    BasicEst,
    Sesqui,
    RealCoords,
    HxHy,
    Type6Normal,
    DfBump,
    RatioO,
    LeviLowerBound,
    GlobalBounds,
    GlobalPsc,
}

impl ConditionId {
    pub const ALL: [ConditionId; 14] = [
        ConditionId::PshBoundary,
        ConditionId::PshOpen,
        ConditionId::CondLn,
        ConditionId::CondNormal,
        ConditionId::BasicEst,
        ConditionId::Sesqui,
        ConditionId::RealCoords,
        ConditionId::HxHy,
        ConditionId::Type6Normal,
        ConditionId::DfBump,
        ConditionId::RatioO,
        ConditionId::LeviLowerBound,
        ConditionId::GlobalBounds,
        ConditionId::GlobalPsc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionId::PshBoundary => "PSH_BOUNDARY",
            ConditionId::PshOpen => "PSH_OPEN",
            ConditionId::CondLn => "COND_LN",
            ConditionId::CondNormal => "COND_NORMAL",
            ConditionId::BasicEst => "BASIC_EST",
            ConditionId::Sesqui => "SESQUI",
            ConditionId::RealCoords => "REAL_COORDS",
            ConditionId::HxHy => "HX_HY",
            ConditionId::Type6Normal => "TYPE6_NORMAL",
            ConditionId::DfBump => "DF_BUMP",
            ConditionId::RatioO => "RATIO_O",
            ConditionId::LeviLowerBound => "LEVI_LOWER_BOUND",
            ConditionId::GlobalBounds => "GLOBAL_BOUNDS",
            ConditionId::GlobalPsc => "GLOBAL_PSC",
        }
    }

    /// Accepts `PSH_BOUNDARY`, `psh-boundary` and `psh_boundary`.
    pub fn parse(s: &str) -> Option<ConditionId> {
        let norm = s.trim().replace('-', "_").to_ascii_uppercase();
        ConditionId::ALL.into_iter().find(|c| c.as_str() == norm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Ratio statistics of one refinement level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStats {
    pub level: usize,
    pub samples: usize,
    /// Samples with |g| > λ_min.
    pub above_min: usize,
    /// C_ℓ = max |f|/|g| over those samples.
    pub max_ratio: f64,
    pub argmax: Option<Point4>,
    /// Samples with |g| ≤ λ_min.
    pub below_min: usize,
    /// Max |f| over the samples with |g| ≤ λ_min.
    pub residual: f64,
}

/// A point with the value that decided it; re-evaluation reproduces `value`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub point: Point4,
    pub value: f64,
    pub level: Option<usize>,
    pub note: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertTolerances {
    pub tol: f64,
    pub lambda_min: f64,
    pub growth_cap: f64,
}

impl Default for CertTolerances {
    fn default() -> Self {
        CertTolerances {
            tol: PSD_TOL,
            lambda_min: LAMBDA_MIN,
            growth_cap: GROWTH_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub condition_id: ConditionId,
    pub label: String,
    pub verdict: Verdict,
    pub samples: usize,
    pub levels: Vec<LevelStats>,
    pub witnesses: Vec<Witness>,
    /// The empirical constant of the condition, when it has one.
    pub constant: Option<f64>,
    pub tolerances: CertTolerances,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }

    /// Witnesses as CSV: x,y,u,v,value.
    pub fn witness_csv(&self) -> String {
        crate::report::csv_table(
            &["x", "y", "u", "v", "value"],
            self.witnesses.iter().map(|w| {
                let p = w.point;
                vec![p.x, p.y, p.u, p.v, w.value]
            }),
        )
    }

    fn relabel(mut self, id: ConditionId, label: &str) -> Certificate {
        self.condition_id = id;
        self.label = label.to_string();
        self
    }
}

/// Pass iff `value ≥ threshold` at every item; items are (point, value, threshold).
///
/// The constant reported is the smallest slack value − threshold.
pub fn pointwise(
    id: ConditionId,
    label: &str,
    items: &[(Point4, f64, f64)],
    tolerances: CertTolerances,
) -> Result<Certificate> {
    if items.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut bad: Vec<&(Point4, f64, f64)> = items.iter().filter(|(_, v, t)| !(v >= t)).collect();
    bad.sort_by(|a, b| (a.1 - a.2).total_cmp(&(b.1 - b.2)));
    let slack = items
        .iter()
        .map(|(_, v, t)| v - t)
        .fold(f64::INFINITY, |a, b| if b.is_nan() { f64::NAN } else { a.min(b) });
    let witnesses = bad
        .iter()
        .take(MAX_WITNESSES)
        .map(|(p, v, t)| Witness {
            point: *p,
            value: *v,
            level: None,
            note: format!("below threshold {}", crate::report::format_f64(*t)),
        })
        .collect();
    Ok(Certificate {
        condition_id: id,
        label: label.to_string(),
        verdict: if bad.is_empty() { Verdict::Pass } else { Verdict::Fail },
        samples: items.len(),
        levels: Vec::new(),
        witnesses,
        constant: Some(slack),
        tolerances,
        notes: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// ratio certificates

/// One sampled pair (f, g) of a ratio condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioSample {
    pub point: Point4,
    pub f: f64,
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioOptions {
    pub lambda_min: f64,
    pub growth_cap: f64,
    pub floor: f64,
    pub min_above: usize,
}

impl Default for RatioOptions {
    fn default() -> Self {
        RatioOptions {
            lambda_min: LAMBDA_MIN,
            growth_cap: GROWTH_CAP,
            floor: RATIO_FLOOR,
            min_above: MIN_ABOVE,
        }
    }
}

fn level_stats(level: usize, samples: &[RatioSample], lambda_min: f64) -> LevelStats {
    let mut st = LevelStats {
        level,
        samples: samples.len(),
        above_min: 0,
        max_ratio: 0.0,
        argmax: None,
        below_min: 0,
        residual: 0.0,
    };
    for s in samples {
        let (f, g) = (s.f.abs(), s.g.abs());
        if g > lambda_min {
            st.above_min += 1;
            let q = f / g;
            if st.argmax.is_none() || q > st.max_ratio || q.is_nan() {
                st.max_ratio = q;
                st.argmax = Some(s.point);
            }
        } else {
            st.below_min += 1;
            if f > st.residual || f.is_nan() {
                st.residual = f;
            }
        }
    }
    st
}

/// Empirical f = O(g) across refinement levels.
///
/// Level ℓ+1 passes when C_{ℓ+1} ≤ cap·max(C_0..C_ℓ, floor) and
/// residual_{ℓ+1} ≤ cap·max(residual_ℓ, C·λ_min), with C the same running max.
pub fn ratio_o(label: &str, levels: &[Vec<RatioSample>], opts: &RatioOptions) -> Result<Certificate> {
    if levels.len() < 2 {
        return Err(Error::Precondition(format!(
            "ratio certificates need at least two refinement levels, got {}",
            levels.len()
        )));
    }
    if levels.iter().all(|l| l.is_empty()) {
        return Err(Error::EmptySamples);
    }
    let stats: Vec<LevelStats> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| level_stats(i, l, opts.lambda_min))
        .collect();
    if stats.iter().all(|s| s.above_min == 0) {
        return Err(Error::Degenerate(format!(
            "every denominator is at most λ_min = {:e}",
            opts.lambda_min
        )));
    }
    let mut witnesses = Vec::new();
    let mut notes = Vec::new();
    let mut c_prev = 0.0f64;
    for pair in stats.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.above_min > 0 {
            c_prev = c_prev.max(a.max_ratio);
        }
        if b.above_min > 0 && !(b.max_ratio <= opts.growth_cap * c_prev.max(opts.floor)) {
            if let Some(p) = b.argmax {
                witnesses.push(Witness {
                    point: p,
                    value: b.max_ratio,
                    level: Some(b.level),
                    note: format!("ratio grew from {:e} to {:e}", c_prev, b.max_ratio),
                });
            }
        }
        let res_cap = opts.growth_cap * a.residual.max(c_prev * opts.lambda_min);
        if b.below_min > 0 && !(b.residual <= res_cap) {
            let worst = levels[b.level]
                .iter()
                .filter(|s| s.g.abs() <= opts.lambda_min)
                .max_by(|x, y| x.f.abs().total_cmp(&y.f.abs()));
            if let Some(s) = worst {
                witnesses.push(Witness {
                    point: s.point,
                    value: s.f.abs(),
                    level: Some(b.level),
                    note: format!("small-denominator residual grew from {:e} to {:e}", a.residual, b.residual),
                });
            }
        }
    }
    let thin = stats.iter().filter(|s| s.above_min < opts.min_above).count();
    let verdict = if !witnesses.is_empty() {
        Verdict::Fail
    } else if thin > 0 {
        notes.push(format!("{thin} level(s) with fewer than {} samples above λ_min", opts.min_above));
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    let constant = stats.iter().map(|s| s.max_ratio).fold(0.0, f64::max);
    Ok(Certificate {
        condition_id: ConditionId::RatioO,
        label: label.to_string(),
        verdict,
        samples: stats.iter().map(|s| s.samples).sum(),
        levels: stats,
        witnesses,
        constant: Some(constant),
        tolerances: CertTolerances {
            tol: opts.floor,
            lambda_min: opts.lambda_min,
            growth_cap: opts.growth_cap,
        },
        notes,
    })
}

enum ProbeKind {
    /// f = |H_ρ(L,N)|², g = H_ρ(L,L).
    PshBoundary(Order2),
    /// f = (H^R(Y,T))² + (H^R(X,T))², g = H_ρ(L,L).
    Sesqui(Order2),
    /// f = (H^R(X,ν)+H^R(Y,T))² + (H^R(Y,ν)−H^R(X,T))², g = H_ρ(L,L).
    RealCoords(Order2),
    /// Residuals of Xh and Yh against the real-coordinate data of r.
    HxHy { r: Order2, h_grad: Tape },
    /// Outputs [f, g] of a tape; f is squared when `square` is set.
    Tape { tape: Tape, square: bool },
    /// Outputs [a_re, a_im, b_re, b_im, g]; f = |a − b|².
    Difference(Tape),
}

/// A compiled (f, g) pair; [`RatioProbe::terms`] re-evaluates a witness.
pub struct RatioProbe {
    kind: ProbeKind,
    region: Option<ScalarField>,
}

fn frame_and_matrix(o2: &Order2, p: &Point4) -> Result<(Derivs2, FrameAt, HermitianMatrix2)> {
    let d = o2.eval(p)?;
    let f = FrameAt::from_gradient(d.grad, p)?;
    let m = matrix_in_frame(&d.wirtinger(), &f);
    Ok((d, f, m))
}

impl RatioProbe {
    pub fn psh_boundary(rho: &ScalarField) -> RatioProbe {
        RatioProbe {
            kind: ProbeKind::PshBoundary(Order2::new(rho)),
            region: None,
        }
    }

    pub fn sesqui(rho: &ScalarField) -> RatioProbe {
        RatioProbe {
            kind: ProbeKind::Sesqui(Order2::new(rho)),
            region: None,
        }
    }

    pub fn real_coords(rho: &ScalarField) -> RatioProbe {
        RatioProbe {
            kind: ProbeKind::RealCoords(Order2::new(rho)),
            region: None,
        }
    }

    pub fn hx_hy(r: &ScalarField, h: &ScalarField) -> RatioProbe {
        let grad: Vec<Expr> = h.gradient().iter().map(|g| g.expr().clone()).collect();
        RatioProbe {
            kind: ProbeKind::HxHy {
                r: Order2::new(r),
                h_grad: Tape::compile(&grad),
            },
            region: Some(h.clone()),
        }
    }

    /// f = (νΛ_ρ)², g = Λ_ρ.
    pub fn normal(rho: &ScalarField) -> RatioProbe {
        let ff = frame_fields(rho);
        let lam = levi_field(rho).expr().clone();
        let nu = ff.apply_nu(&lam);
        RatioProbe {
            kind: ProbeKind::Tape {
                tape: Tape::compile(&[nu, lam]),
                square: true,
            },
            region: Some(rho.clone()),
        }
    }

    /// Generic |f| against |g|.
    pub fn generic(f: &ScalarField, g: &ScalarField) -> RatioProbe {
        RatioProbe {
            kind: ProbeKind::Tape {
                tape: Tape::compile(&[f.expr().clone(), g.expr().clone()]),
                square: false,
            },
            region: Some(f.clone()),
        }
    }

    /// f = |a − b|² against g for complex symbolic a, b.
    pub fn difference(a: &CExpr, b: &CExpr, g: &Expr, region: &ScalarField) -> RatioProbe {
        RatioProbe {
            kind: ProbeKind::Difference(Tape::compile(&[
                a.re.clone(),
                a.im.clone(),
                b.re.clone(),
                b.im.clone(),
                g.clone(),
            ])),
            region: Some(region.clone()),
        }
    }

    /// The pair (f, g) at p.
    pub fn terms(&self, p: &Point4) -> Result<(f64, f64)> {
        if let Some(r) = &self.region {
            r.check_region(p)?;
        }
        match &self.kind {
            ProbeKind::PshBoundary(o2) => {
                let (_, _, m) = frame_and_matrix(o2, p)?;
                Ok((m.h12.norm_sqr(), m.h11))
            }
            ProbeKind::Sesqui(o2) => {
                let (d, f, m) = frame_and_matrix(o2, p)?;
                let q = real_matrix_in_frame(&d, &f).m;
                Ok((q[1][2].powi(2) + q[0][2].powi(2), m.h11))
            }
            ProbeKind::RealCoords(o2) => {
                let (d, f, m) = frame_and_matrix(o2, p)?;
                let q = real_matrix_in_frame(&d, &f).m;
                Ok(((q[0][3] + q[1][2]).powi(2) + (q[1][3] - q[0][2]).powi(2), m.h11))
            }
            ProbeKind::HxHy { r, h_grad } => {
                let (d, f, m) = frame_and_matrix(r, p)?;
                let q = real_matrix_in_frame(&d, &f).m;
                let g = h_grad.eval(&p.arr())?;
                let dot = |a: &[f64; 4]| a.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>();
                let nd = f.norm_dr;
                let ex = dot(&f.x) + (q[0][3] + q[1][2]) / nd;
                let ey = dot(&f.y) - (q[0][2] - q[1][3]) / nd;
                Ok((ex * ex + ey * ey, m.h11))
            }
            ProbeKind::Tape { tape, square } => {
                let v = tape.eval(&p.arr())?;
                Ok((if *square { v[0] * v[0] } else { v[0] }, v[1]))
            }
            ProbeKind::Difference(tape) => {
                let v = tape.eval(&p.arr())?;
                Ok(((v[0] - v[2]).powi(2) + (v[1] - v[3]).powi(2), v[4]))
            }
        }
    }

    /// Evaluates every level in parallel, preserving sample order.
    pub fn sample(&self, levels: &[SampleSet]) -> Result<Vec<Vec<RatioSample>>> {
        levels
            .iter()
            .map(|set| {
                set.samples
                    .par_iter()
                    .map(|s| {
                        let (f, g) = self.terms(&s.point)?;
                        Ok(RatioSample { point: s.point, f, g })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    }

    pub fn certify(&self, id: ConditionId, label: &str, levels: &[SampleSet], opts: &RatioOptions) -> Result<Certificate> {
        let data = self.sample(levels)?;
        Ok(ratio_o(label, &data, opts)?.relabel(id, label))
    }
}

/// |H_ρ(L,N)|² = O(H_ρ(L,L)) on the boundary.
pub fn cond_psh_boundary(rho: &ScalarField, levels: &[SampleSet], opts: &RatioOptions) -> Result<Certificate> {
    RatioProbe::psh_boundary(rho).certify(ConditionId::PshBoundary, "|H(L,N)|^2 / H(L,L)", levels, opts)
}

/// |νH_ρ(L,L)|² = O(H_ρ(L,L)) on the boundary.
pub fn cond_normal(rho: &ScalarField, levels: &[SampleSet], opts: &RatioOptions) -> Result<Certificate> {
    RatioProbe::normal(rho).certify(ConditionId::CondNormal, "|nu H(L,L)|^2 / H(L,L)", levels, opts)
}

/// (H^R(Y,T))² + (H^R(X,T))² = O(H_ρ(L,L)).
pub fn cond_sesqui(rho: &ScalarField, levels: &[SampleSet], opts: &RatioOptions) -> Result<Certificate> {
    RatioProbe::sesqui(rho).certify(ConditionId::Sesqui, "H(Y,T)^2 + H(X,T)^2 / H(L,L)", levels, opts)
}

/// (H^R(X,ν)+H^R(Y,T))² + (H^R(Y,ν)−H^R(X,T))² = O(H_ρ(L,L)).
pub fn cond_real_coords(rho: &ScalarField, levels: &[SampleSet], opts: &RatioOptions) -> Result<Certificate> {
    RatioProbe::real_coords(rho).certify(
        ConditionId::RealCoords,
        "(H(X,nu)+H(Y,T))^2 + (H(Y,nu)-H(X,T))^2 / H(L,L)",
        levels,
        opts,
    )
}

/// Residuals of Xh = −(H^R(X,ν)+H^R(Y,T))/|dr| and Yh = (H^R(X,T)−H^R(Y,ν))/|dr|, squared, against λ.
pub fn check_hx_hy(r: &ScalarField, h: &ScalarField, levels: &[SampleSet], opts: &RatioOptions) -> Result<Certificate> {
    RatioProbe::hx_hy(r, h).certify(ConditionId::HxHy, "|Xh residual|^2 + |Yh residual|^2 / H(L,L)", levels, opts)
}

/// Residual certificates of a multiplier on r.
///
/// Strict type 4: |Lh − F|² = O(λ). Normal derivative: |Lh|² = O(λ) and
/// |LL̄h − F|² = O(λ). A user-given h is checked as a strict type 4 multiplier.
pub fn multiplier_residuals(
    r: &ScalarField,
    recipe: &MultiplierRecipe,
    levels: &[SampleSet],
    opts: &RatioOptions,
) -> Result<Vec<Certificate>> {
    let d = LeviDerivatives::new(r);
    let h = CExpr::real(recipe.h.expr().clone());
    let lh = d.frame.apply_l(&h);
    match recipe.kind {
        MultiplierKind::Strict4 | MultiplierKind::UserGiven => {
            let f = strict4_datum(&d);
            let probe = RatioProbe::difference(&lh, &f, &d.lambda, r);
            Ok(vec![probe.certify(ConditionId::CondLn, "|Lh - F|^2 / H(L,L)", levels, opts)?])
        }
        MultiplierKind::NormalDeriv => {
            let first = RatioProbe::difference(&lh, &CExpr::zero(), &d.lambda, r).certify(
                ConditionId::CondNormal,
                "|Lh|^2 / H(L,L)",
                levels,
                opts,
            )?;
            let llbar = d.frame.apply_l(&lh.conj());
            let f = CExpr::real(normal_datum(&d));
            let second = RatioProbe::difference(&llbar, &f, &d.lambda, r).certify(
                ConditionId::CondNormal,
                "|L Lbar h - F|^2 / H(L,L)",
                levels,
                opts,
            )?;
            Ok(vec![first, second])
        }
    }
}

// ---------------------------------------------------------------------------
// positivity scans

fn psd_threshold(m: &HermitianMatrix2, tol: f64) -> f64 {
    -tol * (1.0 + m.norm())
}

/// Min eigenvalue of ℋ_ρ at p, the value recorded by [`psd_on_samples`] witnesses.
pub fn min_eigenvalue_at(rho: &ScalarField, p: &Point4) -> Result<f64> {
    let o2 = Order2::new(rho);
    Ok(frame_and_matrix(&o2, p)?.2.min_eigenvalue())
}

/// Every ℋ_ρ(p) has min eigenvalue ≥ −tol(1 + ‖ℋ‖).
pub fn psd_on_samples(rho: &ScalarField, points: &[Point4], tol: f64) -> Result<Certificate> {
    let o2 = Order2::new(rho);
    let items = points
        .par_iter()
        .map(|p| {
            let (_, _, m) = frame_and_matrix(&o2, p)?;
            Ok((*p, m.min_eigenvalue(), psd_threshold(&m, tol)))
        })
        .collect::<Result<Vec<_>>>()?;
    let tols = CertTolerances {
        tol,
        ..CertTolerances::default()
    };
    let mut c = pointwise(ConditionId::PshBoundary, "min eigenvalue of H_rho in (L,N)", &items, tols)?;
    c.constant = items.iter().map(|i| i.1).reduce(f64::min);
    Ok(c)
}

/// Smallest c with H(ξ,ξ) ≥ c·Q(ξ,ξ) for Hermitian H and positive definite Q.
fn generalized_min_eigenvalue(h: &HermitianMatrix2, q: &HermitianMatrix2) -> f64 {
    // det(H − cQ) = det Q·c² − (h11 q22 + h22 q11 − 2 Re(h12 conj q12))·c + det H
    let a = q.det();
    let b = -(h.h11 * q.h22 + h.h22 * q.h11 - 2.0 * (h.h12 * q.h12.conj()).re);
    let c = h.det();
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    // the smaller root, computed without cancellation
    let qq = -0.5 * (b + b.signum() * disc);
    let r1 = qq / a;
    let r2 = if qq != 0.0 { c / qq } else { r1 };
    r1.min(r2)
}

/// Coordinate Hessian of ρ together with the coercivity weight ρ²I + ∂ρ∂ρ*.
fn coercivity(d: &Derivs2) -> (HermitianMatrix2, HermitianMatrix2) {
    let w = d.wirtinger();
    let (a, b) = (w.z, w.w);
    let r2 = d.value * d.value;
    // H(ξ,ξ) = η*Hη for η = ξ̄, and |⟨∂ρ,ξ⟩|² = η*(aa*)η with a = (ρ_z, ρ_w)
    let q = HermitianMatrix2 {
        h11: r2 + a.norm_sqr(),
        h12: a * b.conj(),
        h22: r2 + b.norm_sqr(),
    };
    (w.matrix(), q)
}

/// Coordinate Hessian of ρ is psd at every point; the best coercivity c is reported.
pub fn psh_open_scan(rho: &ScalarField, points: &[Point4], tol: f64) -> Result<Certificate> {
    let o2 = Order2::new(rho);
    let rows = points
        .par_iter()
        .map(|p| {
            let d = o2.eval(p)?;
            let (h, q) = coercivity(&d);
            let c = if d.value != 0.0 && q.det() > 0.0 {
                Some(generalized_min_eigenvalue(&h, &q))
            } else {
                None
            };
            Ok(((*p, h.min_eigenvalue(), psd_threshold(&h, tol)), c))
        })
        .collect::<Result<Vec<_>>>()?;
    let items: Vec<_> = rows.iter().map(|r| r.0).collect();
    let tols = CertTolerances {
        tol,
        ..CertTolerances::default()
    };
    let mut cert = pointwise(ConditionId::PshOpen, "min eigenvalue of the complex Hessian", &items, tols)?;
    cert.constant = rows.iter().filter_map(|r| r.1).reduce(f64::min);
    let skipped = rows.iter().filter(|r| r.1.is_none()).count();
    if skipped > 0 {
        cert.notes.push(format!("{skipped} point(s) with rho = 0 left out of the coercivity constant"));
    }
    Ok(cert)
}

/// Coordinate-basis min eigenvalue at p, the value of [`psh_open_scan`] witnesses.
pub fn coordinate_min_eigenvalue_at(rho: &ScalarField, p: &Point4) -> Result<f64> {
    let d = Order2::new(rho).eval(p)?;
    Ok(d.wirtinger().matrix().min_eigenvalue())
}

/// Outcome of [`required_c`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RequiredC {
    pub c: f64,
    /// Grid values tried before success.
    pub tried: usize,
}

/// The C grid: 0, then 10⁻³·2^j up to `c_max`.
pub fn c_grid(c_max: f64) -> Vec<f64> {
    let mut g = vec![0.0];
    let mut c = 1e-3;
    while c <= c_max {
        g.push(c);
        c *= 2.0;
    }
    g
}

/// Smallest grid C with ℋ_{ρ + (C/2)ρ²} psd (relative tol) at every boundary point.
///
/// On the boundary that matrix is ℋ_ρ + diag(0, C|Nρ|²) with |Nρ| = |dρ|/2.
pub fn required_c(rho: &ScalarField, points: &[Point4], tol: f64, c_max: f64) -> Result<RequiredC> {
    if points.is_empty() {
        return Err(Error::EmptySamples);
    }
    let o2 = Order2::new(rho);
    let data = points
        .par_iter()
        .map(|p| {
            let (d, f, m) = frame_and_matrix(&o2, p)?;
            let _ = d;
            Ok((*p, m, f.norm_dr * f.norm_dr / 4.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = c_grid(c_max);
    let mut worst = (f64::INFINITY, points[0]);
    for (i, c) in grid.iter().enumerate() {
        worst = (f64::INFINITY, points[0]);
        let mut ok = true;
        for (p, m, n2) in &data {
            let b = HermitianMatrix2 {
                h22: m.h22 + c * n2,
                ..*m
            };
            let slack = b.min_eigenvalue() - psd_threshold(&b, tol);
            if slack < worst.0 {
                worst = (slack, *p);
            }
            if !(slack >= 0.0 && b.trace() >= 0.0) {
                ok = false;
            }
        }
        if ok {
            return Ok(RequiredC { c: *c, tried: i + 1 });
        }
    }
    Err(Error::RequiredCNotFound {
        c_max,
        witness: worst.1.arr(),
    })
}

// ---------------------------------------------------------------------------
// basic estimate

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// 64 unit vectors of C² quasi-uniform up to a common phase.
///
/// |ξ₁|² runs through Halton base 2 and the relative phase through base 3.
pub fn direction_grid() -> Vec<C2> {
    (1..=64u64)
        .map(|i| {
            let s = radical_inverse(i, 2);
            let phi = 2.0 * PI * radical_inverse(i, 3);
            [Complex64::new(s.sqrt(), 0.0), Complex64::from_polar((1.0 - s).sqrt(), phi)]
        })
        .collect()
}

fn frame_directions(f: &FrameAt) -> [C2; 6] {
    let (l, n) = (f.l, f.n);
    let i = Complex64::i();
    let s = FRAC_1_SQRT_2;
    [
        l,
        n,
        [(l[0] + n[0]) * s, (l[1] + n[1]) * s],
        [(l[0] - n[0]) * s, (l[1] - n[1]) * s],
        [(l[0] + i * n[0]) * s, (l[1] + i * n[1]) * s],
        [(l[0] - i * n[0]) * s, (l[1] - i * n[1]) * s],
    ]
}

/// Denominators below this are skipped.
const BASIC_SKIP: f64 = 1e-20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasicEstimate {
    /// max(0, sup −H(ξ,ξ)/(r²|ξ|² + |⟨∂r,ξ⟩|²)).
    pub c: f64,
    pub argmax: Option<Point4>,
    pub pairs: usize,
    pub skipped: usize,
    pub inconclusive: bool,
    pub grid_version: u32,
}

impl BasicEstimate {
    pub fn to_certificate(&self) -> Certificate {
        let mut notes = vec![format!("{} of {} pairs skipped", self.skipped, self.pairs)];
        if self.inconclusive {
            notes.push("more than half of the pairs had an underflowing denominator".to_string());
        }
        Certificate {
            condition_id: ConditionId::BasicEst,
            label: "-H(xi,xi) / (r^2|xi|^2 + |<dr,xi>|^2)".to_string(),
            verdict: if self.inconclusive { Verdict::Inconclusive } else { Verdict::Pass },
            samples: self.pairs,
            levels: Vec::new(),
            witnesses: self
                .argmax
                .map(|p| Witness {
                    point: p,
                    value: self.c,
                    level: None,
                    note: "largest ratio".to_string(),
                })
                .into_iter()
                .collect(),
            constant: Some(self.c),
            tolerances: CertTolerances::default(),
            notes,
        }
    }
}

/// Empirical smallest C of the basic estimate H_r(ξ,ξ) ≥ −C(r²|ξ|² + |⟨∂r,ξ⟩|²).
pub fn basic_estimate_c(r: &ScalarField, points: &[Point4]) -> Result<BasicEstimate> {
    if points.is_empty() {
        return Err(Error::EmptySamples);
    }
    let o2 = Order2::new(r);
    let grid = direction_grid();
    let per_point = points
        .par_iter()
        .map(|p| {
            let d = o2.eval(p)?;
            let w = d.wirtinger();
            let frame = FrameAt::from_gradient(d.grad, p)?;
            let r2 = d.value * d.value;
            let mut best = (0.0f64, 0usize, 0usize);
            for xi in grid.iter().chain(frame_directions(&frame).iter()) {
                best.1 += 1;
                let den = r2 * (xi[0].norm_sqr() + xi[1].norm_sqr()) + (w.z * xi[0] + w.w * xi[1]).norm_sqr();
                if den < BASIC_SKIP {
                    best.2 += 1;
                    continue;
                }
                let q = -w.hermitian(xi, xi).re / den;
                if q > best.0 {
                    best.0 = q;
                }
            }
            Ok((*p, best))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = BasicEstimate {
        c: 0.0,
        argmax: None,
        pairs: 0,
        skipped: 0,
        inconclusive: false,
        grid_version: DIRECTION_GRID_VERSION,
    };
    for (p, (c, n, s)) in per_point {
        out.pairs += n;
        out.skipped += s;
        if c > out.c {
            out.c = c;
            out.argmax = Some(p);
        }
    }
    out.inconclusive = 2 * out.skipped > out.pairs;
    Ok(out)
}

// ---------------------------------------------------------------------------
// type 6 and Diederich–Fornæss

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Type6Check {
    /// νH_r(L,L) at p0.
    pub value: f64,
    pub scale: f64,
    /// `None` when p0 has type below 6.
    pub vanishes: Option<bool>,
}

/// |νH_r(L,L)(p0)| ≤ tol·scale at a point of type at least 6.
pub fn type6_normal_vanish(r: &ScalarField, p0: &Point4, tol: f64) -> Result<Type6Check> {
    let ff = frame_fields(r);
    let lam = levi_field(r).expr().clone();
    let nu = ff.apply_nu(&lam);
    let v = Tape::compile(&[nu, ff.norm_dr.clone()]).eval(&p0.arr())?;
    let scale = v[1].max(1.0);
    let search = point_type(r, p0, 6, TOL_ZERO)?;
    let low = matches!(search.c_p.order(), Some(k) if k < 6);
    Ok(Type6Check {
        value: v[0],
        scale,
        vanishes: if low { None } else { Some(v[0].abs() <= tol * scale) },
    })
}

/// psh_open_scan of −(−r − Kr²)^η at interior points where −r − Kr² > 0.
pub fn df_check(r: &ScalarField, k: f64, eta: f64, points: &[Point4], tol: f64) -> Result<Certificate> {
    let bump = df_bump(r, k, eta)?;
    let inside = admissible(r, points, |v| -v - k * v * v > 0.0)?;
    let mut c = psh_open_scan(&bump, &inside, tol)?.relabel(ConditionId::DfBump, "interior bump -(-r-Kr^2)^eta");
    c.constant.get_or_insert(k);
    c.notes.push(format!("K = {k}, eta = {eta}, {} admissible points", inside.len()));
    Ok(c)
}

/// The exterior analogue for (r + Kr²)^μ at points where r + Kr² > 0.
pub fn df_check_ext(r: &ScalarField, k: f64, mu: f64, points: &[Point4], tol: f64) -> Result<Certificate> {
    let bump = df_bump_ext(r, k, mu)?;
    let outside = admissible(r, points, |v| v + k * v * v > 0.0)?;
    let mut c = psh_open_scan(&bump, &outside, tol)?.relabel(ConditionId::DfBump, "exterior bump (r+Kr^2)^mu");
    c.notes.push(format!("K = {k}, mu = {mu}, {} admissible points", outside.len()));
    Ok(c)
}

fn admissible(r: &ScalarField, points: &[Point4], keep: impl Fn(f64) -> bool) -> Result<Vec<Point4>> {
    let tape = Tape::of(r.expr());
    let mut out = Vec::new();
    for p in points {
        if keep(tape.eval(&p.arr())?[0]) {
            out.push(*p);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(out)
}

/// Default K grid of [`df_select_k`].
pub const DF_K_GRID: [f64; 7] = [0.0, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4];

/// First K of the grid for which [`df_check`] passes; the last certificate otherwise.
pub fn df_select_k(r: &ScalarField, eta: f64, points: &[Point4], tol: f64, grid: &[f64]) -> Result<(Option<f64>, Certificate)> {
    let mut last = None;
    for &k in grid {
        let c = match df_check(r, k, eta, points, tol) {
            Err(Error::EmptySamples) => break,
            c => c?,
        };
        if c.passed() {
            return Ok((Some(k), c));
        }
        last = Some(c);
    }
    last.map(|c| (None, c)).ok_or(Error::InvalidParam("empty K grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{sample_levels, Locus, SamplePlan};
    use crate::construct::{bend, graft};
    use crate::expr::{parse_field, Box4, Params};

    fn field(s: &str) -> ScalarField {
        parse_field(s, &Params::new()).unwrap()
    }

    fn levels(r: &ScalarField, n: usize, loci: Vec<Locus>) -> Vec<SampleSet> {
        let plan = SamplePlan::new(Box4::cube(Point4::ORIGIN, 0.3), n, 7).with_loci(loci, 0.5);
        sample_levels(r, &plan, 2)
    }

    fn z_locus() -> Locus {
        Locus::new("z=0", vec![field("x"), field("y")])
    }

    #[test]
    fn condition_ids_round_trip() {
        for c in ConditionId::ALL {
            assert_eq!(ConditionId::parse(c.as_str()), Some(c));
            let kebab = c.as_str().to_ascii_lowercase().replace('_', "-");
            assert_eq!(ConditionId::parse(&kebab), Some(c));
            assert_eq!(serde_json::to_value(c).unwrap(), Value::String(c.as_str().into()));
        }
    }

    #[test]
    fn ratio_of_identical_terms_is_one() {
        let mk = |scale: f64| -> Vec<RatioSample> {
            (1..40)
                .map(|i| {
                    let g = scale * i as f64;
                    RatioSample {
                        point: Point4::new(g, 0.0, 0.0, 0.0),
                        f: g,
                        g,
                    }
                })
                .collect()
        };
        let c = ratio_o("f=g", &[mk(1e-2), mk(1e-4)], &RatioOptions::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Pass);
        for l in &c.levels {
            assert!((l.max_ratio - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn growing_ratio_fails_with_witness() {
        let mk = |scale: f64| -> Vec<RatioSample> {
            (1..20)
                .map(|i| RatioSample {
                    point: Point4::new(i as f64, scale, 0.0, 0.0),
                    f: 1.0,
                    g: scale * i as f64,
                })
                .collect()
        };
        let c = ratio_o("1/g", &[mk(1e-2), mk(1e-4)], &RatioOptions::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Fail);
        assert!(!c.witnesses.is_empty());
        let w = &c.witnesses[0];
        assert!((w.value - 1.0 / (1e-4 * w.point.x)).abs() < 1e-9 * w.value);
    }

    #[test]
    fn ratio_needs_two_levels_and_nondegenerate_g() {
        let s = vec![RatioSample {
            point: Point4::ORIGIN,
            f: 1.0,
            g: 0.0,
        }];
        assert!(matches!(ratio_o("x", &[s.clone()], &RatioOptions::default()), Err(Error::Precondition(_))));
        assert!(matches!(ratio_o("x", &[s.clone(), s], &RatioOptions::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn thin_levels_are_inconclusive() {
        let s: Vec<RatioSample> = (0..3)
            .map(|i| RatioSample {
                point: Point4::ORIGIN,
                f: 1.0,
                g: 1.0 + i as f64,
            })
            .collect();
        let c = ratio_o("few", &[s.clone(), s], &RatioOptions::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn psd_of_convex_quadratic() {
        let rho = field("x^2+y^2+u^2+v^2 - 1");
        let pts: Vec<Point4> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.3;
                Point4::new(t.cos(), t.sin(), 0.0, 0.0)
            })
            .collect();
        assert!(psd_on_samples(&rho, &pts, PSD_TOL).unwrap().passed());
        let c = psh_open_scan(&field("x^2+y^2+u^2+v^2"), &[Point4::new(0.3, 0.1, 0.2, -0.4)], PSD_TOL).unwrap();
        assert!(c.passed());
        assert!(c.constant.unwrap() > 0.0);
    }

    #[test]
    fn psd_witness_rechecks() {
        let rho = field("u - x^2 - y^2");
        let pts = [Point4::new(0.1, 0.0, 0.01, 0.0), Point4::new(0.0, 0.2, -0.04, 0.3)];
        let c = psd_on_samples(&rho, &pts, PSD_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Fail);
        for w in &c.witnesses {
            let again = min_eigenvalue_at(&rho, &w.point).unwrap();
            assert!((again - w.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn generalized_eigenvalue_matches_brute_force() {
        let h = HermitianMatrix2 {
            h11: 1.3,
            h12: Complex64::new(0.2, -0.5),
            h22: -0.4,
        };
        let q = HermitianMatrix2 {
            h11: 2.0,
            h12: Complex64::new(0.3, 0.1),
            h22: 1.0,
        };
        let c = generalized_min_eigenvalue(&h, &q);
        let mut brute = f64::INFINITY;
        for i in 0..200 {
            for j in 0..200 {
                let s = i as f64 / 199.0;
                let phi = 2.0 * PI * j as f64 / 200.0;
                let xi = [Complex64::new(s.sqrt(), 0.0), Complex64::from_polar((1.0 - s).sqrt(), phi)];
                brute = brute.min(h.form(&xi) / q.form(&xi));
            }
        }
        assert!(c <= brute + 1e-12 && brute - c < 1e-3, "{c} vs {brute}");
    }

    #[test]
    fn required_c_is_zero_when_already_psh() {
        let r = field("u + x^2 + y^2");
        let set = levels(&r, 40, vec![]);
        let rc = required_c(&r, &set[0].points(), PSD_TOL, REQUIRED_C_MAX).unwrap();
        assert_eq!(rc.c, 0.0);
    }

    #[test]
    fn required_c_makes_bent_field_psd() {
        // tanlog grafted with y + u satisfies the boundary condition but needs bending
        let r = field("u - 0.5*(x-v)^2 - ln(cos(x))")
            .with_region(Box4::new([-1.0, -1.0, -1.0, -1.0], [1.0, 1.0, 1.0, 1.0]));
        let rho = graft(&r, &field("y + u"));
        let set = levels(&r, 200, vec![]);
        let pts = set[0].points();
        let rc = required_c(&rho, &pts, PSD_TOL, REQUIRED_C_MAX).unwrap();
        assert!(psd_on_samples(&bend(&rho, rc.c), &pts, PSD_TOL).unwrap().passed());
        assert!(rc.c.is_finite());
    }

    #[test]
    fn bad_factor_breaks_the_normal_condition() {
        let r = field("u + x^2 + y^2");
        let opts = RatioOptions::default();
        let set = levels(&r, 200, vec![z_locus()]);
        assert!(cond_normal(&r, &set, &opts).unwrap().passed());
        let r4 = field("u + absz2^2");
        let set4 = levels(&r4, 300, vec![z_locus()]);
        let bad = graft(&r4, &field("10*x"));
        let c = cond_normal(&bad, &set4, &opts).unwrap();
        assert_eq!(c.verdict, Verdict::Fail, "{:?}", c.levels);
    }

    #[test]
    fn sesqui_for_convex_and_strictly_pseudoconvex() {
        let opts = RatioOptions::default();
        for s in ["u + x^2 + y^2", "u + absz2"] {
            let r = field(s);
            let set = levels(&r, 200, vec![z_locus()]);
            assert!(cond_sesqui(&r, &set, &opts).unwrap().passed(), "{s}");
        }
    }

    #[test]
    fn basic_estimate_vanishes_for_psh_fields() {
        let r = field("u + absz2");
        let pts: Vec<Point4> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.2;
                Point4::new(0.1 * t.cos(), 0.1 * t.sin(), 0.02 * t.sin(), 0.05 * t.cos())
            })
            .collect();
        let be = basic_estimate_c(&r, &pts).unwrap();
        assert_eq!(be.c, 0.0);
        assert!(!be.inconclusive);
        assert_eq!(direction_grid().len(), 64);
    }

    #[test]
    fn basic_estimate_is_finite_for_quartic() {
        let r = field("u + absz2^2");
        let pts: Vec<Point4> = (0..60)
            .map(|i| {
                let t = i as f64 * 0.37;
                Point4::new(0.15 * t.cos(), 0.15 * t.sin(), 0.03 * (2.0 * t).sin(), 0.1 * t.cos())
            })
            .collect();
        let be = basic_estimate_c(&r, &pts).unwrap();
        assert!(be.c.is_finite());
        assert!(!be.inconclusive);
    }

    #[test]
    fn type6_checks() {
        let t6 = type6_normal_vanish(&field("u + absz2^3"), &Point4::ORIGIN, 1e-10).unwrap();
        assert_eq!(t6.vanishes, Some(true));
        let t4 = type6_normal_vanish(&field("u + absz2^2"), &Point4::ORIGIN, 1e-10).unwrap();
        assert_eq!(t4.vanishes, None);
    }

    #[test]
    fn df_check_for_flat_boundary() {
        let r = field("u");
        let pts: Vec<Point4> = (1..30).map(|i| Point4::new(0.01 * i as f64, 0.0, -0.01 * i as f64, 0.1)).collect();
        for eta in [0.3, 0.5, 0.9] {
            assert!(df_check(&r, 0.0, eta, &pts, PSD_TOL).unwrap().passed());
        }
        assert!(df_check_ext(&r, 0.0, 2.0, &pts.iter().map(|p| Point4::new(p.x, p.y, -p.u, p.v)).collect::<Vec<_>>(), PSD_TOL)
            .unwrap()
            .passed());
    }

    #[test]
    fn df_check_fails_on_levi_negative_field() {
        let r = field("u - x^2 - y^2");
        let pts: Vec<Point4> = (1..30)
            .map(|i| Point4::new(0.01 * i as f64, 0.005 * i as f64, -0.001 * i as f64, 0.0))
            .collect();
        let (k, c) = df_select_k(&r, 0.9, &pts, PSD_TOL, &DF_K_GRID).unwrap();
        assert!(k.is_none());
        assert_eq!(c.verdict, Verdict::Fail);
    }

    #[test]
    fn larger_tolerance_never_breaks_a_pass() {
        let rho = field("u + absz2^2");
        let pts: Vec<Point4> = (0..20).map(|i| Point4::new(0.01 * i as f64, 0.0, -1e-8 * (i as f64).powi(4), 0.0)).collect();
        let a = psh_open_scan(&rho, &pts, 1e-9).unwrap();
        let b = psh_open_scan(&rho, &pts, 1e-6).unwrap();
        assert!(!a.passed() || b.passed());
    }
}
