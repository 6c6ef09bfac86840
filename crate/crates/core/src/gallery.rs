//! Built-in domains and the counterexample checks built on them.
//!
//! Entries: the local and global counterexample domains Ω₂ₖ, the tan–log
//! domain of weak type 4, the quartic model family and rigid tubes u + f(z).
//! Alongside them live exact boundary samplers, the boundary circle with its
//! loop-integral obstruction, and the pointwise checks of the Levi lower
//! bound, boundedness and global pseudoconvexity.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::boundary::{BoundarySample, Locus, SamplePlan, SampleSet};
use crate::certify::{pointwise, CertTolerances, Certificate, ConditionId};
use crate::cframe::{Order2, Wirtinger2};
use crate::error::{Error, Result};
use crate::expr::{parse_field, Box4, CExpr, Params, Point4, ScalarField, Tape};

pub const IDS: [&str; 5] = ["omega_local", "omega_global", "tanlog", "model", "tube"];

/// Largest k accepted by [`make`].
pub const MAX_K: u32 = 12;

/// A claim about an entry and the routine that checks it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Claim {
    pub statement: String,
    pub checked_by: String,
}

fn claim(statement: &str, checked_by: &str) -> Claim {
    Claim {
        statement: statement.to_string(),
        checked_by: checked_by.to_string(),
    }
}

#[derive(Clone, Debug)]
pub struct GalleryEntry {
    pub id: String,
    pub params: BTreeMap<String, String>,
    pub field: ScalarField,
    /// Default seed box for boundary sampling.
    pub bbox: Box4,
    /// Degenerate loci marked for densification.
    pub loci: Vec<Locus>,
    /// Box shrink factor per refinement level.
    pub level_shrink: f64,
    pub claims: Vec<Claim>,
}

impl GalleryEntry {
    /// Default sampling plan: half the seeds pulled toward the loci, samples kept in the box.
    pub fn plan(&self, n: usize, seed: u64) -> SamplePlan {
        let mut p = SamplePlan::new(self.bbox, n, seed)
            .with_loci(self.loci.clone(), 0.5)
            .with_keep(self.bbox);
        p.level_shrink = self.level_shrink;
        p
    }

    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "params": self.params,
            "field": self.field.to_dsl(),
            "box": {"lo": self.bbox.lo, "hi": self.bbox.hi},
            "loci": self.loci.iter().map(|l| l.name.clone()).collect::<Vec<_>>(),
            "claims": self.claims,
        })
    }
}

/// Splits `id:k=v,k2=v2` into the id and its parameters.
pub fn parse_spec(spec: &str) -> Result<(String, BTreeMap<String, String>)> {
    let (id, rest) = match spec.split_once(':') {
        Some((a, b)) => (a.trim(), b),
        None => (spec.trim(), ""),
    };
    let mut params = BTreeMap::new();
    for part in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidParam(format!("expected key=value, got '{part}'")))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((id.to_string(), params))
}

pub fn from_spec(spec: &str) -> Result<GalleryEntry> {
    let (id, params) = parse_spec(spec)?;
    make(&id, &params)
}

fn param_k(params: &BTreeMap<String, String>) -> Result<u32> {
    let k = match params.get("k") {
        None => 3,
        Some(s) => s
            .parse::<u32>()
            .map_err(|_| Error::InvalidParam(format!("k must be an integer, got '{s}'")))?,
    };
    if !(3..=MAX_K).contains(&k) {
        return Err(Error::InvalidParam(format!("k must lie in 3..={MAX_K}, got {k}")));
    }
    Ok(k)
}

fn param_f64(params: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(s) => {
            // accept simple fractions such as 4/3
            let v = match s.split_once('/') {
                Some((a, b)) => a.trim().parse::<f64>().ok().zip(b.trim().parse::<f64>().ok()).map(|(a, b)| a / b),
                None => s.parse::<f64>().ok(),
            };
            v.filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidParam(format!("{key} must be a real number, got '{s}'")))
        }
    }
}

fn check_keys(id: &str, params: &BTreeMap<String, String>, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidParam(format!("unknown parameter '{k}' for {id}"))),
        None => Ok(()),
    }
}

fn field(src: &str, params: &Params) -> Result<ScalarField> {
    Ok(parse_field(src, params)?)
}

/// DSL source of the Ω₂ₖ defining function, with exact rational coefficients.
pub fn omega_dsl(k: u32, global: bool) -> String {
    let (a, b, c) = (k * k, (k - 1) * (k - 1), (k - 2) * (k - 2));
    let mut s = format!(
        "u + (1/{a})*absz2^{k} - (2/{b})*absz2^{}*v + (1/{c})*absz2^{}*v^2 + absz2^{}",
        k - 1,
        k - 2,
        2 * k - 1
    );
    if global {
        s.push_str(" + u^2 + v^2");
    }
    s
}

fn z_locus() -> Locus {
    let p = Params::new();
    Locus::new("z=0", vec![parse_field("x", &p).unwrap(), parse_field("y", &p).unwrap()])
}

fn parabola_locus() -> Locus {
    Locus::new("v=|z|^2", vec![parse_field("v - absz2", &Params::new()).unwrap()])
}

/// The gallery entry `id` with its parameters.
pub fn make(id: &str, params: &BTreeMap<String, String>) -> Result<GalleryEntry> {
    let mut shown = params.clone();
    let entry = match id {
        "omega_local" => {
            check_keys(id, params, &["k"])?;
            let k = param_k(params)?;
            shown.insert("k".into(), k.to_string());
            GalleryEntry {
                id: id.into(),
                params: shown,
                field: field(&omega_dsl(k, false), &Params::new())?,
                bbox: Box4::cube(Point4::ORIGIN, 0.1),
                loci: vec![parabola_locus(), z_locus()],
                level_shrink: 0.5,
                claims: vec![
                    claim("pseudoconvex near the origin", "classify::pseudoconvex_scan"),
                    claim("finite type 2k at the origin", "classify::point_type"),
                    claim(
                        "Levi form at least (1/8)|z|^(2k-6)(a^2+|z|^(2k+2)), a = |z|^2 - v",
                        "gallery::levi_lower_bound_check",
                    ),
                    claim(
                        "no local defining function is plurisubharmonic on the boundary",
                        "gallery::loop_integral, certify::cond_psh_boundary",
                    ),
                ],
            }
        }
        "omega_global" => {
            check_keys(id, params, &["k"])?;
            let k = param_k(params)?;
            shown.insert("k".into(), k.to_string());
            let zmax = z2_bound(k).sqrt();
            GalleryEntry {
                id: id.into(),
                params: shown,
                field: field(&omega_dsl(k, true), &Params::new())?,
                bbox: Box4::new([-zmax, -zmax, -1.0, -0.5], [zmax, zmax, 0.0, 0.5]),
                loci: vec![parabola_locus(), z_locus()],
                level_shrink: 1.0,
                claims: vec![
                    claim("bounded: |z|^2 <= 4^(-1/(2k-1)), |v| <= 1/2, u in [-1,0]", "gallery::global_bounds_check"),
                    claim("pseudoconvex", "gallery::global_psc_check"),
                    claim("finite type 2k at the origin", "classify::point_type"),
                ],
            }
        }
        "tanlog" => {
            check_keys(id, params, &[])?;
            let big = 1e3;
            GalleryEntry {
                id: id.into(),
                params: shown,
                field: field("u - (1/2)*(x-v)^2 - ln(cos(x))", &Params::new())?
                    .with_region(Box4::new([-1.55, -big, -big, -big], [1.55, big, big, big])),
                bbox: Box4::cube(Point4::ORIGIN, 0.5),
                loci: vec![Locus::new("x=v", vec![field("x - v", &Params::new())?])],
                level_shrink: 1.0,
                claims: vec![
                    claim("Levi form (1/16)(x-v)^2 sec^2(x)", "cframe::levi_raw"),
                    claim("weak type 4 at the origin", "classify::strict_type4"),
                    claim("not sesquiconvex at the origin", "certify::cond_sesqui"),
                    claim("r e^h is psh on the boundary for h = y+u and h = y+ln(cos(x))", "certify::cond_psh_boundary"),
                ],
            }
        }
        "model" => {
            check_keys(id, params, &["a"])?;
            let a = param_f64(params, "a", 1.0)?;
            shown.insert("a".into(), params.get("a").cloned().unwrap_or_else(|| "1".into()));
            let mut p = Params::new();
            p.insert("a".into(), a);
            GalleryEntry {
                id: id.into(),
                params: shown,
                field: field("u + $a*absz2*(x^2-y^2) + absz2^2", &p)?,
                bbox: Box4::cube(Point4::ORIGIN, 0.2),
                loci: vec![z_locus()],
                level_shrink: 1.0,
                claims: vec![
                    claim("pseudoconvex at 0 iff |a| <= 4/3", "classify::classify_point"),
                    claim("strict type 4 at 0 iff |a| < 4/3", "classify::strict_type4"),
                    claim("strict type 4 in the sense of Kohn iff |a| < 1", "classify::kohn_strict_type4"),
                ],
            }
        }
        "tube" => {
            check_keys(id, params, &["f"])?;
            let f = params.get("f").cloned().unwrap_or_else(|| "x^4".to_string());
            shown.insert("f".into(), f.clone());
            GalleryEntry {
                id: id.into(),
                params: shown,
                field: field(&format!("u + ({f})"), &Params::new())?,
                bbox: Box4::cube(Point4::ORIGIN, 0.2),
                loci: vec![z_locus()],
                level_shrink: 1.0,
                claims: vec![claim(
                    "psh whenever f is subharmonic; H(L,N) vanishes identically",
                    "certify::cond_psh_boundary",
                )],
            }
        }
        other => return Err(Error::UnknownGallery(other.to_string())),
    };
    Ok(entry)
}

/// `gallery list` payload: every entry with default parameters.
pub fn list() -> Value {
    let entries: Vec<Value> = IDS
        .iter()
        .map(|id| make(id, &BTreeMap::new()).map(|e| e.to_json()).unwrap_or(Value::Null))
        .collect();
    json!({ "entries": entries })
}

// ---------------------------------------------------------------------------
// closed forms

/// μ_k = 1/((k−1)(k−2)).
pub fn mu(k: u32) -> f64 {
    1.0 / (((k - 1) * (k - 2)) as f64)
}

/// Bound on |z|² over the global domain, 4^{−1/(2k−1)}.
pub fn z2_bound(k: u32) -> f64 {
    4f64.powf(-1.0 / (2.0 * k as f64 - 1.0))
}

/// Z(s, v) with r_local = u + Z and s = |z|².
pub fn omega_z(k: u32, s: f64, v: f64) -> f64 {
    let kf = k as f64;
    let k = k as i32;
    s.powi(k) / (kf * kf) - 2.0 * s.powi(k - 1) * v / ((kf - 1.0) * (kf - 1.0))
        + s.powi(k - 2) * v * v / ((kf - 2.0) * (kf - 2.0))
        + s.powi(2 * k - 1)
}

/// First and second Wirtinger derivatives, with the magnitudes of their summands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Partials {
    pub r_z: Complex64,
    pub r_w: Complex64,
    pub r_zzbar: f64,
    pub r_zwbar: Complex64,
    pub r_wwbar: f64,
    /// Sum of absolute values of the displayed summands, per entry.
    pub scale: [f64; 5],
}

impl Partials {
    /// Largest |engine − closed| / scale over the five entries.
    pub fn mismatch(&self, w: &Wirtinger2) -> f64 {
        let diffs = [
            (w.z - self.r_z).norm(),
            (w.w - self.r_w).norm(),
            (w.zzbar - self.r_zzbar).abs(),
            (w.zwbar - self.r_zwbar).norm(),
            (w.wwbar - self.r_wwbar).abs(),
        ];
        diffs
            .iter()
            .zip(self.scale)
            .map(|(d, s)| if s > 0.0 { d / s } else { *d })
            .fold(0.0, f64::max)
    }
}

/// The displayed partials of Ω₂ₖ; `global` adds the |w|² term.
pub fn omega_partials(k: u32, global: bool, p: &Point4) -> Partials {
    let kf = k as f64;
    let ki = k as i32;
    let z = p.z();
    let s = z.norm_sqr();
    let v = p.v;
    let pw = |e: i32| s.powi(e);
    let i = Complex64::i();
    let terms_z = [
        pw(ki - 1) / kf,
        -2.0 * pw(ki - 2) * v / (kf - 1.0),
        pw(ki - 3) * v * v / (kf - 2.0),
        (2.0 * kf - 1.0) * pw(2 * ki - 2),
    ];
    let r_z = z.conj() * terms_z.iter().sum::<f64>();
    let im_w = [pw(ki - 1) / (kf - 1.0).powi(2), -pw(ki - 2) * v / (kf - 2.0).powi(2)];
    let mut r_w = Complex64::new(0.5, 0.0) + i * (im_w[0] + im_w[1]);
    let mut w_scale = 0.5 + im_w[0].abs() + im_w[1].abs();
    let zz = [pw(ki - 3) * (s - v).powi(2), (2.0 * kf - 1.0).powi(2) * pw(2 * ki - 2)];
    let zw = [-pw(ki - 2) / (kf - 1.0), pw(ki - 3) * v / (kf - 2.0)];
    let r_zwbar = i * z.conj() * (zw[0] + zw[1]);
    let mut r_wwbar = pw(ki - 2) / (2.0 * (kf - 2.0).powi(2));
    let mut ww_scale = r_wwbar;
    if global {
        r_w += p.w().conj();
        w_scale += p.w().norm();
        r_wwbar += 1.0;
        ww_scale += 1.0;
    }
    let zn = z.norm();
    Partials {
        r_z,
        r_w,
        r_zzbar: zz[0] + zz[1],
        r_zwbar,
        r_wwbar,
        scale: [
            zn * terms_z.iter().map(|t| t.abs()).sum::<f64>(),
            w_scale,
            pw(ki - 3) * (s + v.abs()).powi(2) + zz[1],
            zn * (zw[0].abs() + zw[1].abs()),
            ww_scale,
        ],
    }
}

/// The displayed partials of the tan–log field.
pub fn tanlog_partials(p: &Point4) -> Partials {
    let (x, v) = (p.x, p.v);
    let t = x.tan();
    let d = x - v;
    Partials {
        r_z: Complex64::new(0.5 * (t - d), 0.0),
        r_w: Complex64::new(0.5, -0.5 * d),
        r_zzbar: 0.25 * t * t,
        r_zwbar: Complex64::new(0.0, 0.25),
        r_wwbar: -0.25,
        scale: [0.5 * (t.abs() + d.abs()), 0.5 * (1.0 + d.abs()), 0.25 * t * t, 0.25, 0.25],
    }
}

/// Levi value of the tan–log field with the unnormalized L: (1/16)(x−v)² sec²x.
pub fn tanlog_levi(p: &Point4) -> f64 {
    let c = p.x.cos();
    (p.x - p.v).powi(2) / (16.0 * c * c)
}

// ---------------------------------------------------------------------------
// exact boundary samplers

/// Root of u + u² + c = 0: `Upper` is the root near 0, `Lower` the root near −1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::Upper => "upper",
            Branch::Lower => "lower",
        }
    }

    pub fn parse(s: &str) -> Result<Branch> {
        match s {
            "upper" => Ok(Branch::Upper),
            "lower" => Ok(Branch::Lower),
            _ => Err(Error::InvalidParam(format!("branch must be upper or lower, got '{s}'"))),
        }
    }
}

/// The u solving the global equation u + u² + Z + v² = 0, if real.
pub fn global_u(k: u32, s: f64, v: f64, branch: Branch) -> Option<f64> {
    let disc = 1.0 - 4.0 * (omega_z(k, s, v) + v * v);
    if disc < 0.0 {
        return None;
    }
    let q = disc.sqrt();
    Some(match branch {
        // written to avoid cancellation near u = 0
        Branch::Upper => -2.0 * (omega_z(k, s, v) + v * v) / (1.0 + q),
        Branch::Lower => -0.5 * (1.0 + q),
    })
}

fn disk(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    let r = radius * rng.gen::<f64>().sqrt();
    Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>())
}

/// Points of the local boundary u = −Z with |z| ≤ zmax and |v| ≤ vmax.
pub fn sample_omega_local(k: u32, n: usize, seed: u64, zmax: f64, vmax: f64) -> Vec<Point4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z = disk(&mut rng, zmax);
            let v = vmax * (2.0 * rng.gen::<f64>() - 1.0);
            Point4::new(z.re, z.im, -omega_z(k, z.norm_sqr(), v), v)
        })
        .collect()
}

/// [`omega_local_levels_from`] with the default starting radius for k.
///
/// λ scales like |z|^{4k−4} near the parabola, so larger k starts farther
/// out to keep the finer levels above the usual λ_min.
pub fn omega_local_levels(k: u32, n: usize, seed: u64, levels: usize) -> Result<Vec<SampleSet>> {
    omega_local_levels_from(k, n, seed, levels, if k == 3 { 0.2 } else { 0.6 })
}

/// Refinement levels of the local boundary concentrating on the parabola v = |z|².
///
/// Level ℓ draws |z| uniformly from [R/2, R], R = 0.2·2^{−ℓ}, and sets
/// v = |z|² + tR^{k+1} with t uniform in [−1, 1], so that a² and |z|^{2k+2}
/// are of the same size there.
pub fn omega_local_levels_from(k: u32, n: usize, seed: u64, levels: usize, r0: f64) -> Result<Vec<SampleSet>> {
    let r = make("omega_local", &BTreeMap::from([("k".to_string(), k.to_string())]))?.field;
    let o2 = Order2::new(&r);
    (0..levels)
        .map(|l| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(l as u64);
            let radius = r0 * 0.5f64.powi(l as i32);
            let mut set = SampleSet::default();
            for i in 0..n {
                let z = Complex64::from_polar(radius * (0.5 + 0.5 * rng.gen::<f64>()), 2.0 * PI * rng.gen::<f64>());
                let s = z.norm_sqr();
                let v = s + radius.powi(k as i32 + 1) * (2.0 * rng.gen::<f64>() - 1.0);
                let p = Point4::new(z.re, z.im, -omega_z(k, s, v), v);
                match BoundarySample::at(&o2, &p, i as u64, crate::TOL_BDRY) {
                    Ok(b) => set.samples.push(b),
                    Err(_) => set.failures += 1,
                }
            }
            Ok(set)
        })
        .collect()
}

/// Points of the global boundary, z uniform in the disk |z|² ≤ 4^{−1/(2k−1)},
/// v uniform in [−½, ½], branch chosen at random; infeasible draws are redrawn.
pub fn sample_omega_global(k: u32, n: usize, seed: u64) -> Vec<Point4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zmax = z2_bound(k).sqrt();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z = disk(&mut rng, zmax);
        let v = rng.gen::<f64>() - 0.5;
        let branch = if rng.gen::<bool>() { Branch::Upper } else { Branch::Lower };
        if let Some(u) = global_u(k, z.norm_sqr(), v, branch) {
            out.push(Point4::new(z.re, z.im, u, v));
        }
    }
    out
}

/// Global boundary points with |z| < 1/10 and |a| < 1/10, a = |z|² − v.
pub fn sample_global_case1(k: u32, n: usize, seed: u64) -> Vec<Point4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z = disk(&mut rng, 0.1);
        let a = 0.1 * (2.0 * rng.gen::<f64>() - 1.0);
        let v = z.norm_sqr() - a;
        let branch = if rng.gen::<bool>() { Branch::Upper } else { Branch::Lower };
        if z.norm() < 0.1 && a.abs() < 0.1 {
            if let Some(u) = global_u(k, z.norm_sqr(), v, branch) {
                out.push(Point4::new(z.re, z.im, u, v));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// the boundary circle and the loop obstruction

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveDomain {
    Local,
    Global,
}

/// u(σ) of the boundary circle of radius σ in the slice v = σ².
pub fn curve_u(k: u32, sigma: f64, domain: CurveDomain, branch: Branch) -> Result<f64> {
    let s = sigma * sigma;
    let kf = k as f64;
    let local = -(1.0 / (kf * kf) - 2.0 / ((kf - 1.0) * (kf - 1.0)) + 1.0 / ((kf - 2.0) * (kf - 2.0)))
        * sigma.powi(2 * k as i32)
        - sigma.powi(4 * k as i32 - 2);
    match (domain, branch) {
        (CurveDomain::Local, Branch::Upper) => Ok(local),
        (CurveDomain::Local, Branch::Lower) => {
            // the mirrored root of the global equation is not on the local boundary
            let u = -1.0 - local;
            let residual = (u + omega_z(k, s, s)).abs();
            Err(Error::CurveOffBoundary {
                branch: branch.name(),
                residual,
            })
        }
        (CurveDomain::Global, b) => global_u(k, s, s, b).ok_or(Error::CurveOffBoundary {
            branch: b.name(),
            residual: f64::NAN,
        }),
    }
}

/// γ_σ(t) = (σe^{it}, u(σ) + iσ²).
pub fn boundary_curve(k: u32, sigma: f64, t: f64, domain: CurveDomain, branch: Branch) -> Result<Point4> {
    let u = curve_u(k, sigma, domain, branch)?;
    let p = Point4::new(sigma * t.cos(), sigma * t.sin(), u, sigma * sigma);
    let s = sigma * sigma;
    let residual = match domain {
        CurveDomain::Local => u + omega_z(k, s, s),
        CurveDomain::Global => u + u * u + omega_z(k, s, s) + s * s,
    };
    if residual.abs() > crate::TOL_BDRY {
        return Err(Error::CurveOffBoundary {
            branch: branch.name(),
            residual: residual.abs(),
        });
    }
    Ok(p)
}

/// ∮_γ 2Re(h_z dz) along γ_σ by the n-point periodic trapezoid rule.
///
/// The second component of γ is constant, so this is ∮ dh for h with the given h_z.
pub fn loop_integral(
    h_z: impl Fn(&Point4) -> Complex64,
    k: u32,
    sigma: f64,
    n: usize,
    domain: CurveDomain,
    branch: Branch,
) -> Result<f64> {
    if n < 64 {
        return Err(Error::InvalidParam(format!("quadrature needs at least 64 nodes, got {n}")));
    }
    let dt = 2.0 * PI / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        let t = j as f64 * dt;
        let p = boundary_curve(k, sigma, t, domain, branch)?;
        let dz = Complex64::i() * Complex64::from_polar(sigma, t);
        acc += 2.0 * (h_z(&p) * dz).re;
    }
    Ok(acc * dt)
}

/// [`loop_integral`] of dh for a field h, with h_z taken symbolically.
pub fn loop_integral_field(h: &ScalarField, k: u32, sigma: f64, n: usize, domain: CurveDomain, branch: Branch) -> Result<f64> {
    let hz = CExpr::real(h.expr().clone()).dz();
    let tape = Tape::compile(&[hz.re, hz.im]);
    let err = std::cell::Cell::new(None);
    let v = loop_integral(
        |p| match tape.eval(&p.arr()) {
            Ok(o) => Complex64::new(o[0], o[1]),
            Err(e) => {
                err.set(Some(e));
                Complex64::new(f64::NAN, 0.0)
            }
        },
        k,
        sigma,
        n,
        domain,
        branch,
    )?;
    match err.into_inner() {
        Some(e) => Err(e.into()),
        None => Ok(v),
    }
}

/// The forced leading term h_z = −2iμ_k z̄|z|^{2k−4}.
pub fn forced_form(k: u32) -> impl Fn(&Point4) -> Complex64 {
    let m = mu(k);
    move |p: &Point4| {
        let z = p.z();
        Complex64::new(0.0, -2.0 * m) * z.conj() * z.norm_sqr().powi(k as i32 - 2)
    }
}

/// 8πμ_kσ^{2k−2}.
pub fn forced_loop_value(k: u32, sigma: f64) -> f64 {
    8.0 * PI * mu(k) * sigma.powi(2 * k as i32 - 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub sigma: f64,
    pub integral: f64,
    pub expected: f64,
    pub ratio: f64,
}

/// Loop integral of the forced form against 8πμ_kσ^{2k−2}, per σ.
pub fn obstruction_scaling(k: u32, sigmas: &[f64], n: usize) -> Result<Vec<ScalingRow>> {
    let form = forced_form(k);
    sigmas
        .iter()
        .map(|&sigma| {
            let integral = loop_integral(&form, k, sigma, n, CurveDomain::Local, Branch::Upper)?;
            let expected = forced_loop_value(k, sigma);
            Ok(ScalingRow {
                sigma,
                integral,
                expected,
                ratio: integral / expected,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// pointwise checks

fn raw_levi(o2: &Order2, p: &Point4) -> Result<f64> {
    Ok(o2.eval(p)?.wirtinger().levi_raw())
}

fn split_a(p: &Point4) -> (f64, f64) {
    let s = p.z().norm_sqr();
    (s, s - p.v)
}

/// Raw Levi value ≥ c·|z|^{2k−6}(a² + |z|^{2k+2}) − 10⁻¹² on local boundary points.
///
/// The bound holds with c = 1/8 near the origin.
pub fn levi_lower_bound_check(k: u32, points: &[Point4], c: f64) -> Result<Certificate> {
    let r = make("omega_local", &BTreeMap::from([("k".to_string(), k.to_string())]))?.field;
    let o2 = Order2::new(&r);
    let ki = k as i32;
    let items = points
        .iter()
        .map(|p| {
            let (s, a) = split_a(p);
            let bound = c * s.powi(ki - 3) * (a * a + s.powi(ki + 1)) - 1e-12;
            Ok((*p, raw_levi(&o2, p)?, bound))
        })
        .collect::<Result<Vec<_>>>()?;
    pointwise(
        ConditionId::LeviLowerBound,
        &format!("H(L,L) >= {c}|z|^(2k-6)(a^2+|z|^(2k+2)), k = {k}"),
        &items,
        CertTolerances::default(),
    )
}

/// |z|² ≤ 4^{−1/(2k−1)}, |v| ≤ ½ and u ∈ [−1, 0], each up to 10⁻⁹.
pub fn global_bounds_check(k: u32, points: &[Point4]) -> Result<Certificate> {
    let zb = z2_bound(k);
    let mut items = Vec::with_capacity(3 * points.len());
    for p in points {
        items.push((*p, zb - p.z().norm_sqr(), -1e-9));
        items.push((*p, 0.5 - p.v.abs(), -1e-9));
        items.push((*p, 0.5 - (p.u + 0.5).abs(), -1e-9));
    }
    let mut c = pointwise(
        ConditionId::GlobalBounds,
        "slack of |z|^2 <= 4^(-1/(2k-1)), |v| <= 1/2, u in [-1,0]",
        &items,
        CertTolerances::default(),
    )?;
    c.samples = points.len();
    let max = |f: &dyn Fn(&Point4) -> f64| points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    c.notes.push(format!(
        "max |z|^2 = {:e}, max |v| = {:e}, min u = {:e}, max u = {:e}",
        max(&|p| p.z().norm_sqr()),
        max(&|p| p.v.abs()),
        -max(&|p| -p.u),
        max(&|p| p.u)
    ));
    Ok(c)
}

/// f_k(t) = t^{k−1} − (k−2)²t + 1/((k−1)²(2k−1)²).
pub fn f_k(k: u32, t: f64) -> f64 {
    let kf = k as f64;
    t.powi(k as i32 - 1) - (kf - 2.0).powi(2) * t + 1.0 / ((kf - 1.0).powi(2) * (2.0 * kf - 1.0).powi(2))
}

/// I_k = (1/10, 4^{−1/(2k−1)}].
pub fn i_k(k: u32) -> (f64, f64) {
    (0.1, z2_bound(k))
}

/// d(z, w) of the second case of the global pseudoconvexity argument.
pub fn d_zw(k: u32, p: &Point4) -> f64 {
    let kf = k as f64;
    let ki = k as i32;
    let (s, a) = split_a(p);
    let a = a.abs();
    (1.0 - s.powi(ki - 2) / (kf - 2.0).powi(2)) * a * a - 2.0 * s.powi(ki - 1) * a / ((kf - 1.0) * (kf - 2.0).powi(2))
        + ((2.0 * kf - 1.0).powi(2) * s.powi(ki + 1) - s.powi(ki) / ((kf - 1.0).powi(2) * (kf - 2.0).powi(2)))
}

/// Whether a global boundary point falls in the first case: |z| < 1/10 and |a| < 1/10.
pub fn is_case1(p: &Point4) -> bool {
    let (s, a) = split_a(p);
    s.sqrt() < 0.1 && a.abs() < 0.1
}

/// The three sub-certificates of the global pseudoconvexity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GlobalPsc {
    /// Raw Levi / (|z|^{2k−6}(a² + |z|^{2k+2})) > 0 on first-case points; the constant is ε.
    pub case1: Certificate,
    /// d(z, w) > 0 on second-case points.
    pub case2: Certificate,
    /// −f_k > 0 on a grid of I_k; the grid value t sits in the x slot of each point.
    pub fk: Certificate,
}

impl GlobalPsc {
    pub fn passed(&self) -> bool {
        self.case1.passed() && self.case2.passed() && self.fk.passed()
    }
}

/// Case split of the global pseudoconvexity argument on boundary samples,
/// plus the scalar check of f_k on `grid` points of I_k.
pub fn global_psc_check(k: u32, points: &[Point4], grid: usize) -> Result<GlobalPsc> {
    let r = make("omega_global", &BTreeMap::from([("k".to_string(), k.to_string())]))?.field;
    let o2 = Order2::new(&r);
    let ki = k as i32;
    let tiny = f64::MIN_POSITIVE;
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for p in points {
        if is_case1(p) {
            let (s, a) = split_a(p);
            let den = s.powi(ki - 3) * (a * a + s.powi(ki + 1));
            if den > 0.0 {
                c1.push((*p, raw_levi(&o2, p)? / den, tiny));
            }
        } else {
            c2.push((*p, d_zw(k, p), tiny));
        }
    }
    let tols = CertTolerances::default();
    let mut case1 = pointwise(ConditionId::GlobalPsc, "case 1: Levi / (|z|^(2k-6)(a^2+|z|^(2k+2)))", &c1, tols)?;
    case1.constant = c1.iter().map(|i| i.1).reduce(f64::min);
    let case2 = pointwise(ConditionId::GlobalPsc, "case 2: d(z,w)", &c2, tols)?;
    let (lo, hi) = i_k(k);
    let fk_items: Vec<_> = (1..=grid)
        .map(|j| {
            let t = lo + (hi - lo) * j as f64 / grid as f64;
            (Point4::new(t, 0.0, 0.0, 0.0), -f_k(k, t), tiny)
        })
        .collect();
    let mut fk = pointwise(ConditionId::GlobalPsc, "-f_k(t) on I_k (t in the x slot)", &fk_items, tols)?;
    fk.constant = fk_items.iter().map(|i| i.1).reduce(f64::min);
    Ok(GlobalPsc { case1, case2, fk })
}

/// ∃ε > 0: Aσ² + Bστ + Cτ² ≥ ε(σ² + τ²), for A, C ≥ 0.
pub fn sclc_check(a: f64, b: f64, c: f64) -> bool {
    a >= 0.0 && c >= 0.0 && a + c > 0.0 && 4.0 * a * c - b * b > 0.0
}

/// Twenty polynomial multipliers of degree at most 4.
pub fn candidate_multipliers() -> Vec<ScalarField> {
    const SRC: [&str; 20] = [
        "x",
        "y",
        "u",
        "v",
        "absz2",
        "x*y",
        "x^2 - y^2",
        "u^2 + v^2",
        "x*v - y*u",
        "absz2*v",
        "absz2^2",
        "v^2",
        "x^3 - 3*x*y^2",
        "y*absz2",
        "absz2*u",
        "2*u + absz2",
        "v - absz2",
        "(v - absz2)^2",
        "x^4 + y^4 + v^2",
        "u + x*y*v + absz2^2 - 3*v^2",
    ];
    SRC.iter()
        .map(|s| parse_field(s, &Params::new()).expect("candidate multipliers parse"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cframe::levi_raw;

    fn k(k: u32) -> BTreeMap<String, String> {
        BTreeMap::from([("k".to_string(), k.to_string())])
    }

    #[test]
    fn spec_strings_parse() {
        let (id, p) = parse_spec("model:a=1.2").unwrap();
        assert_eq!(id, "model");
        assert_eq!(p["a"], "1.2");
        let (id, p) = parse_spec("tanlog").unwrap();
        assert_eq!(id, "tanlog");
        assert!(p.is_empty());
        assert!(matches!(from_spec("nope"), Err(Error::UnknownGallery(_))));
        assert!(matches!(from_spec("omega_local:k=2"), Err(Error::InvalidParam(_))));
        assert!(matches!(from_spec("model:b=1"), Err(Error::InvalidParam(_))));
        let e = from_spec("model:a=4/3").unwrap();
        assert!((e.field.eval(&Point4::new(1.0, 0.0, 0.0, 0.0)).unwrap() - (4.0 / 3.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn omega6_source_matches_literal() {
        let lit = parse_field(
            "u + (1/9)*(x^2+y^2)^3 - (1/2)*(x^2+y^2)^2*v + (x^2+y^2)*v^2 + (x^2+y^2)^5",
            &Params::new(),
        )
        .unwrap();
        let e = make("omega_local", &k(3)).unwrap();
        for p in sample_omega_local(3, 50, 1, 0.5, 0.5) {
            let q = Point4::new(p.x, p.y, p.u + 0.1, p.v);
            assert!((lit.eval(&q).unwrap() - e.field.eval(&q).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn tube_field() {
        let e = from_spec("tube:f=x^4").unwrap();
        assert_eq!(e.field.eval(&Point4::new(0.5, 1.0, 0.25, 3.0)).unwrap(), 0.25 + 0.0625);
    }

    #[test]
    fn list_has_every_entry() {
        let v = list();
        assert_eq!(v["entries"].as_array().unwrap().len(), IDS.len());
    }

    #[test]
    fn exact_samplers_land_on_the_boundary() {
        for kk in [3, 4] {
            let rl = make("omega_local", &k(kk)).unwrap().field;
            for p in sample_omega_local(kk, 200, 3, 0.1, 0.1) {
                assert!(rl.eval(&p).unwrap().abs() < 1e-15);
            }
            let rg = make("omega_global", &k(kk)).unwrap().field;
            for p in sample_omega_global(kk, 200, 3).iter().chain(&sample_global_case1(kk, 50, 4)) {
                assert!(rg.eval(p).unwrap().abs() < 1e-13, "{p:?}");
            }
        }
    }

    #[test]
    fn tanlog_levi_matches() {
        let r = make("tanlog", &BTreeMap::new()).unwrap().field;
        let p = Point4::new(0.7, 0.2, 0.0, -0.3);
        let u = 0.5 * (p.x - p.v).powi(2) + p.x.cos().ln();
        let p = Point4::new(p.x, p.y, u, p.v);
        assert!((levi_raw(&r, &p, 1e-12).unwrap() - tanlog_levi(&p)).abs() < 1e-14);
    }

    #[test]
    fn curve_stays_on_boundary() {
        for kk in [3, 4, 5] {
            for t in [0.0, 1.0, 4.0] {
                let p = boundary_curve(kk, 0.1, t, CurveDomain::Local, Branch::Upper).unwrap();
                let r = make("omega_local", &k(kk)).unwrap().field;
                assert!(r.eval(&p).unwrap().abs() < 1e-15);
                for b in [Branch::Upper, Branch::Lower] {
                    let g = boundary_curve(kk, 0.1, t, CurveDomain::Global, b).unwrap();
                    let rg = make("omega_global", &k(kk)).unwrap().field;
                    assert!(rg.eval(&g).unwrap().abs() < 1e-14);
                }
            }
        }
        let e = boundary_curve(3, 0.1, 0.0, CurveDomain::Local, Branch::Lower).unwrap_err();
        assert!(matches!(e, Error::CurveOffBoundary { branch: "lower", .. }));
    }

    #[test]
    fn forced_loop_value_for_k3() {
        let v = loop_integral(forced_form(3), 3, 0.1, 128, CurveDomain::Local, Branch::Upper).unwrap();
        assert!((v - 4.0 * PI * 1e-4).abs() < 1e-12);
        let v = loop_integral(forced_form(3), 3, 0.05, 128, CurveDomain::Local, Branch::Upper).unwrap();
        assert!((v - 4.0 * PI * 6.25e-6).abs() < 1e-14);
    }

    #[test]
    fn exact_forms_integrate_to_zero() {
        let h = parse_field("x*y + v*x^3", &Params::new()).unwrap();
        for b in [Branch::Upper, Branch::Lower] {
            let v = loop_integral_field(&h, 3, 0.2, 256, CurveDomain::Global, b).unwrap();
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_form_keeps_the_scaling() {
        let base = forced_form(3);
        for sigma in [0.05, 0.1, 0.2] {
            let pert = |p: &Point4| base(p) + 0.1 * p.z().conj() * p.z().norm().powi(3);
            let v = loop_integral(pert, 3, sigma, 256, CurveDomain::Local, Branch::Upper).unwrap();
            assert!((v / forced_loop_value(3, sigma) - 1.0).abs() < 1e-6);
        }
        for row in obstruction_scaling(4, &[0.05, 0.1, 0.2], 128).unwrap() {
            assert!((row.ratio - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sclc_examples() {
        assert!(sclc_check(1.0, 0.0, 1.0));
        assert!(!sclc_check(1.0, 2.0, 1.0));
        assert!(sclc_check(37.0 / 2000.0, -4.0 / 25.0, 17.0 / 16.0));
        assert!(!sclc_check(-1.0, 0.0, 1.0));
    }

    #[test]
    fn f_k_signs() {
        // f_3 vanishes at 1/2 ± √6/5
        let r = 0.5 - 6f64.sqrt() / 5.0;
        assert!(f_k(3, r).abs() < 1e-15);
        assert!(f_k(4, 0.1) < 0.0 && f_k(4, 1.0) < 0.0);
        for kk in 4..10 {
            assert!(f_k(kk, 0.1) <= f_k(4, 0.1));
        }
    }

    #[test]
    fn lower_bound_falsifier() {
        let pts = sample_omega_local(3, 500, 9, 0.1, 0.1);
        assert!(levi_lower_bound_check(3, &pts, 0.125).unwrap().passed());
        assert!(!levi_lower_bound_check(3, &pts, 1.0).unwrap().passed());
    }

    #[test]
    fn global_partials_match() {
        for kk in [3, 4] {
            let r = make("omega_global", &k(kk)).unwrap().field;
            let o2 = Order2::new(&r);
            for p in sample_omega_global(kk, 100, 5) {
                let w = o2.eval(&p).unwrap().wirtinger();
                assert!(omega_partials(kk, true, &p).mismatch(&w) < 1e-10);
            }
        }
    }

    #[test]
    fn d_bound_is_not_sharp_just_outside_case1() {
        // at |z| = 1/10 with a tiny, d dips below zero while the Levi form stays positive
        let r = make("omega_global", &k(3)).unwrap().field;
        let o2 = Order2::new(&r);
        let s = 0.01;
        let v = s - 5.05e-5;
        let u = global_u(3, s, v, Branch::Upper).unwrap();
        let p = Point4::new(0.1, 0.0, u, v);
        assert!(!is_case1(&p));
        assert!(d_zw(3, &p) < 0.0);
        assert!(raw_levi(&o2, &p).unwrap() > 1e-8);
    }

    #[test]
    fn candidates_are_twenty() {
        assert_eq!(candidate_multipliers().len(), 20);
    }
}
