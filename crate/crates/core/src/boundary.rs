//! Projection onto {r = 0}, signed distance, boundary sampling and normal Taylor data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cframe::{levi_from, Derivs2, FrameAt, Order2};
use crate::error::{Error, Result};
use crate::expr::{Box4, Point4, ScalarField, Tape, Var};
use crate::report::csv_table;

const MAX_ITER: usize = 50;

/// Compiled value-and-gradient evaluator.
pub struct Order1 {
    field: ScalarField,
    tape: Tape,
}

impl Order1 {
    pub fn new(f: &ScalarField) -> Order1 {
        let e = f.expr();
        let mut outs = vec![e.clone()];
        outs.extend(Var::ALL.map(|v| e.diff(v)));
        Order1 {
            field: f.clone(),
            tape: Tape::compile(&outs),
        }
    }

    pub fn eval(&self, p: &Point4) -> Result<(f64, [f64; 4])> {
        self.field.check_region(p)?;
        let v = self.tape.eval(&p.arr())?;
        Ok((v[0], [v[1], v[2], v[3], v[4]]))
    }
}

fn unit(g: [f64; 4]) -> Option<[f64; 4]> {
    let n = g.iter().map(|t| t * t).sum::<f64>().sqrt();
    (n > 1e-14 && n.is_finite()).then(|| g.map(|t| t / n))
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reusable projector onto the zero set of r.
pub struct Projector {
    d1: Order1,
    d2: Order2,
    tol: f64,
}

/// A projected point with its signed normal offset: q = point + delta·ν(point).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub point: Point4,
    pub delta: f64,
    pub iterations: usize,
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Option<[f64; 5]> {
    for col in 0..5 {
        let piv = (col..5).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        a.swap(col, piv);
        b.swap(col, piv);
        if a[col][col].abs() < 1e-300 {
            return None;
        }
        for i in col + 1..5 {
            let f = a[i][col] / a[col][col];
            for k in col..5 {
                a[i][k] -= f * a[col][k];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = [0.0; 5];
    for i in (0..5).rev() {
        let s: f64 = (i + 1..5).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

impl Projector {
    pub fn new(r: &ScalarField, tol: f64) -> Projector {
        Projector {
            d1: Order1::new(r),
            d2: Order2::new(r),
            tol,
        }
    }

    /// Damped Newton for r(q − t n) = 0 along a fixed unit direction n.
    fn line_solve(&self, q: &Point4, n: &[f64; 4], count: &mut usize) -> Result<f64> {
        let mut t = 0.0;
        let (mut val, mut grad) = self.d1.eval(q)?;
        while val.abs() > 0.25 * self.tol {
            *count += 1;
            if *count > MAX_ITER {
                break;
            }
            let slope = -dot(&grad, n);
            if slope == 0.0 || !slope.is_finite() {
                break;
            }
            let mut step = -val / slope;
            let mut accepted = false;
            for _ in 0..40 {
                if let Ok((cv, cg)) = self.d1.eval(&q.offset(n, -(t + step))) {
                    if cv.abs() < val.abs() {
                        t += step;
                        val = cv;
                        grad = cg;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(t)
    }

    /// Projection of q onto {r = 0} along the normal through the foot point.
    ///
    /// A line search along ∇r(q) gives the starting foot point; Newton's
    /// method on p + s∇r(p) = q, r(p) = 0 then makes q − p parallel to ∇r(p).
    pub fn project(&self, q: &Point4) -> Result<Projection> {
        let (r0, g0) = self.d1.eval(q)?;
        let n0 = unit(g0).ok_or(Error::DegenerateGradient {
            point: q.arr(),
            norm: 0.0,
        })?;
        let mut count = 0;
        let t0 = self.line_solve(q, &n0, &mut count)?;
        let mut p = q.offset(&n0, -t0);
        let d = self.d2.eval(&p)?;
        let gn = d.norm_dr();
        if !(gn > 1e-14) {
            return Err(Error::DegenerateGradient {
                point: p.arr(),
                norm: gn,
            });
        }
        let mut s = t0 / gn;
        let qa = q.arr();
        let residual = |d: &Derivs2, p: &Point4, s: f64| -> [f64; 5] {
            let pa = p.arr();
            [0, 1, 2, 3, 4].map(|i| if i < 4 { pa[i] + s * d.grad[i] - qa[i] } else { d.value })
        };
        let norm = |r: &[f64; 5]| r.iter().map(|t| t * t).sum::<f64>().sqrt();
        let mut cur = d;
        let mut res = residual(&cur, &p, s);
        let scale = 1.0 + q.norm();
        for it in 0..MAX_ITER {
            let geo = norm(&[res[0], res[1], res[2], res[3], 0.0]);
            if res[4].abs() <= self.tol && geo <= 1e-12 * scale {
                let delta = s * cur.norm_dr();
                return Ok(Projection {
                    point: p,
                    delta,
                    iterations: count + it,
                });
            }
            let mut a = [[0.0; 5]; 5];
            for i in 0..4 {
                for j in 0..4 {
                    a[i][j] = s * cur.hess[i][j] + if i == j { 1.0 } else { 0.0 };
                }
                a[i][4] = cur.grad[i];
                a[4][i] = cur.grad[i];
            }
            let Some(step) = solve5(a, res.map(|t| -t)) else {
                break;
            };
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = p.offset(&[step[0], step[1], step[2], step[3]], lam);
                let cs = s + lam * step[4];
                if let Ok(cd) = self.d2.eval(&cand) {
                    let cr = residual(&cd, &cand, cs);
                    if norm(&cr) < norm(&res) || norm(&cr) <= self.tol {
                        p = cand;
                        s = cs;
                        cur = cd;
                        res = cr;
                        accepted = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(Error::ProjectionFailed {
            start: q.arr(),
            iterations: count + MAX_ITER,
            residual: if res[4].is_finite() { res[4].abs() } else { r0.abs() },
        })
    }
}

pub fn project_to_boundary(r: &ScalarField, q: &Point4, tol: f64) -> Result<Point4> {
    Ok(Projector::new(r, tol).project(q)?.point)
}

/// ±|q − π(q)| with the sign of r(q).
pub fn signed_distance(r: &ScalarField, q: &Point4, tol: f64) -> Result<f64> {
    let pr = Projector::new(r, tol).project(q)?;
    let d = q.dist(&pr.point);
    Ok(if pr.delta < 0.0 { -d } else { d })
}

/// (f(π q), δ(q)·(νf)(π q), f(q) − f(π q) − δ(q)·(νf)(π q)).
pub fn taylor_normal(f: &ScalarField, r: &ScalarField, q: &Point4, tol: f64) -> Result<(f64, f64, f64)> {
    let pr = Projector::new(r, tol).project(q)?;
    let d = q.dist(&pr.point);
    let delta = if pr.delta < 0.0 { -d } else { d };
    let (_, gr) = Order1::new(r).eval(&pr.point)?;
    let nu = unit(gr).ok_or(Error::DegenerateGradient {
        point: pr.point.arr(),
        norm: 0.0,
    })?;
    let (fp, gf) = Order1::new(f).eval(&pr.point)?;
    let normal = delta * dot(&nu, &gf);
    let fq = f.eval(q)?;
    Ok((fp, normal, fq - fp - normal))
}

/// Seed placement inside a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Grid,
    Quasirandom,
    Random,
}

/// A set marked for sampler densification: the common zero set of its constraints.
#[derive(Clone, Debug)]
pub struct Locus {
    pub name: String,
    pub constraints: Vec<ScalarField>,
}

impl Locus {
    pub fn new(name: &str, constraints: Vec<ScalarField>) -> Locus {
        Locus {
            name: name.to_string(),
            constraints,
        }
    }

    /// Gauss–Newton projection of q onto the locus (minimum-norm steps).
    pub fn project(&self, q: &Point4) -> Option<Point4> {
        let evals: Vec<Order1> = self.constraints.iter().map(Order1::new).collect();
        let mut p = *q;
        for _ in 0..MAX_ITER {
            let mut vals = Vec::new();
            let mut jac = Vec::new();
            for e in &evals {
                let (v, g) = e.eval(&p).ok()?;
                vals.push(v);
                jac.push(g);
            }
            if vals.iter().all(|v| v.abs() < 1e-14) {
                return Some(p);
            }
            // solve (J Jᵀ) λ = g by Gaussian elimination, step = −Jᵀ λ
            let m = vals.len();
            let mut a: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    let mut row: Vec<f64> = (0..m).map(|j| dot(&jac[i], &jac[j])).collect();
                    row.push(vals[i]);
                    row
                })
                .collect();
            for col in 0..m {
                let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
                a.swap(col, piv);
                if a[col][col].abs() < 1e-300 {
                    return None;
                }
                for i in 0..m {
                    if i != col {
                        let f = a[i][col] / a[col][col];
                        for k in col..=m {
                            a[i][k] -= f * a[col][k];
                        }
                    }
                }
            }
            let lam: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
            let mut step = [0.0; 4];
            for i in 0..m {
                for (k, s) in step.iter_mut().enumerate() {
                    *s -= lam[i] * jac[i][k];
                }
            }
            p = p.offset(&step, 1.0);
        }
        None
    }
}

/// A boundary point with its frame and Levi value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundarySample {
    pub point: Point4,
    pub frame: FrameAt,
    pub lambda: f64,
    /// Relative distance factor to a densification locus (1 for plain seeds).
    pub weight: f64,
    /// Index of the seed that produced the sample.
    pub seed_index: u64,
}

impl BoundarySample {
    /// Sample at a point already known to lie on the boundary (checked against `tol`).
    pub fn at(order2: &Order2, p: &Point4, seed_index: u64, tol: f64) -> Result<BoundarySample> {
        let d2 = order2.eval(p)?;
        if !(d2.value.abs() <= tol) {
            return Err(Error::OffBoundary {
                point: p.arr(),
                value: d2.value,
                tol,
            });
        }
        Ok(BoundarySample {
            point: *p,
            frame: FrameAt::from_gradient(d2.grad, p)?,
            lambda: levi_from(&d2, p)?,
            weight: 1.0,
            seed_index,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SamplePlan {
    pub bbox: Box4,
    pub n: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub tol: f64,
    pub loci: Vec<Locus>,
    /// Share of seeds pulled toward the loci.
    pub locus_fraction: f64,
    /// Samples are kept only inside this box (defaults to the field region).
    pub keep: Option<Box4>,
    /// Per refinement level, the plain-seed box shrinks about its center by this factor.
    pub level_shrink: f64,
    /// Decades of the locus distance factor covered per level.
    pub decades_per_level: f64,
}

impl SamplePlan {
    pub fn new(bbox: Box4, n: usize, seed: u64) -> SamplePlan {
        SamplePlan {
            bbox,
            n,
            strategy: Strategy::Random,
            seed,
            tol: crate::TOL_BDRY,
            loci: Vec::new(),
            locus_fraction: 0.0,
            keep: None,
            level_shrink: 1.0,
            decades_per_level: 1.0,
        }
    }

    pub fn with_loci(mut self, loci: Vec<Locus>, fraction: f64) -> SamplePlan {
        self.loci = loci;
        self.locus_fraction = fraction;
        self
    }

    pub fn with_strategy(mut self, s: Strategy) -> SamplePlan {
        self.strategy = s;
        self
    }

    pub fn with_keep(mut self, b: Box4) -> SamplePlan {
        self.keep = Some(b);
        self
    }
}

/// Samples with the number of seeds whose projection failed or was discarded.
#[derive(Clone, Debug, Default)]
pub struct SampleSet {
    pub samples: Vec<BoundarySample>,
    pub failures: usize,
}

impl SampleSet {
    pub fn points(&self) -> Vec<Point4> {
        self.samples.iter().map(|s| s.point).collect()
    }

    /// CSV with columns x,y,u,v,lambda,|dr|.
    pub fn to_csv(&self) -> String {
        csv_table(
            &["x", "y", "u", "v", "lambda", "|dr|"],
            self.samples.iter().map(|s| {
                let p = s.point;
                vec![p.x, p.y, p.u, p.v, s.lambda, s.frame.norm_dr]
            }),
        )
    }
}

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

fn seed_fraction(plan: &SamplePlan, index: u64, rng: &mut ChaCha8Rng, shift: &[f64; 4]) -> [f64; 4] {
    match plan.strategy {
        Strategy::Random => [0, 1, 2, 3].map(|_| rng.gen::<f64>()),
        Strategy::Quasirandom => {
            // Halton points with a seeded Cranley–Patterson rotation
            let h = [2, 3, 5, 7].map(|b| radical_inverse(index + 1, b));
            [0, 1, 2, 3].map(|k| (h[k] + shift[k]).fract())
        }
        Strategy::Grid => {
            let side = (plan.n as f64).powf(0.25).ceil().max(1.0) as u64;
            let mut k = index % side.pow(4);
            let mut out = [0.0; 4];
            for o in out.iter_mut() {
                *o = ((k % side) as f64 + 0.5) / side as f64;
                k /= side;
            }
            out
        }
    }
}

fn shrink_box(b: &Box4, factor: f64) -> Box4 {
    let c = b.center().arr();
    Box4 {
        lo: [0, 1, 2, 3].map(|i| c[i] + factor * (b.lo[i] - c[i])),
        hi: [0, 1, 2, 3].map(|i| c[i] + factor * (b.hi[i] - c[i])),
    }
}

/// Samples the boundary at one refinement level (level 0 is the plain plan).
pub fn sample_level(r: &ScalarField, plan: &SamplePlan, level: usize) -> SampleSet {
    let projector = Projector::new(r, plan.tol);
    let order2 = Order2::new(r);
    let bbox = shrink_box(&plan.bbox, plan.level_shrink.powi(level as i32));
    let keep = plan.keep.or(r.region().copied());
    let mut shift_rng = ChaCha8Rng::seed_from_u64(plan.seed);
    shift_rng.set_stream(u64::MAX - level as u64);
    let shift = [0, 1, 2, 3].map(|_| shift_rng.gen::<f64>());
    let one = |index: u64| -> Option<BoundarySample> {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(((level as u64) << 40) | index);
        let frac = seed_fraction(plan, index, &mut rng, &shift);
        let mut q = bbox.lerp(frac);
        let mut weight = 1.0;
        if !plan.loci.is_empty() && rng.gen::<f64>() < plan.locus_fraction {
            let locus = &plan.loci[rng.gen_range(0..plan.loci.len())];
            if let Some(pl) = locus.project(&q) {
                let lo = -(level as f64 + 1.0) * plan.decades_per_level;
                let s = 10f64.powf(lo + rng.gen::<f64>() * plan.decades_per_level);
                let d = [q.x - pl.x, q.y - pl.y, q.u - pl.u, q.v - pl.v];
                q = pl.offset(&d, s);
                weight = s;
            }
        }
        let pr = projector.project(&q).ok()?;
        if let Some(k) = &keep {
            if !k.contains(&pr.point) {
                return None;
            }
        }
        let d2 = order2.eval(&pr.point).ok()?;
        let frame = FrameAt::from_gradient(d2.grad, &pr.point).ok()?;
        let lambda = levi_from(&d2, &pr.point).ok()?;
        Some(BoundarySample {
            point: pr.point,
            frame,
            lambda,
            weight,
            seed_index: index,
        })
    };
    let mut out = SampleSet::default();
    let mut next: u64 = 0;
    let max_seeds = (plan.n as u64).saturating_mul(4).max(64);
    while out.samples.len() < plan.n && next < max_seeds {
        let want = (plan.n - out.samples.len()) as u64;
        let batch = (want + want / 4 + 8).min(max_seeds - next);
        let got: Vec<Option<BoundarySample>> = (next..next + batch).into_par_iter().map(one).collect();
        for s in got {
            match s {
                Some(s) if out.samples.len() < plan.n => out.samples.push(s),
                Some(_) => {}
                None => out.failures += 1,
            }
        }
        next += batch;
    }
    out
}

pub fn sample_boundary(r: &ScalarField, plan: &SamplePlan) -> SampleSet {
    sample_level(r, plan, 0)
}

/// Sample sets at levels 0..levels, progressively concentrated toward the loci.
pub fn sample_levels(r: &ScalarField, plan: &SamplePlan, levels: usize) -> Vec<SampleSet> {
    (0..levels).map(|l| sample_level(r, plan, l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_field, Params};

    fn field(s: &str) -> ScalarField {
        parse_field(s, &Params::new()).unwrap()
    }

    #[test]
    fn flat_projection_and_distance() {
        let r = field("u");
        let p = project_to_boundary(&r, &Point4::new(1.0, 2.0, 0.3, 4.0), 1e-12).unwrap();
        assert_eq!(p, Point4::new(1.0, 2.0, 0.0, 4.0));
        let r1 = field("u - 1");
        let p = project_to_boundary(&r1, &Point4::new(0.0, 0.0, 2.0, 0.0), 1e-12).unwrap();
        assert!(p.dist(&Point4::new(0.0, 0.0, 1.0, 0.0)) < 1e-14);
        assert!((signed_distance(&r, &Point4::new(0.0, 0.0, -0.3, 0.0), 1e-12).unwrap() + 0.3).abs() < 1e-15);
        assert_eq!(signed_distance(&r, &Point4::ORIGIN, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn curved_projection_is_normal() {
        let r = field("u + absz2 + v^2");
        let q = Point4::new(0.3, -0.2, 0.4, 0.25);
        let pr = Projector::new(&r, 1e-13).project(&q).unwrap();
        assert!(r.eval(&pr.point).unwrap().abs() <= 1e-13);
        let (_, g) = Order1::new(&r).eval(&pr.point).unwrap();
        let n = unit(g).unwrap();
        let d = [q.x - pr.point.x, q.y - pr.point.y, q.u - pr.point.u, q.v - pr.point.v];
        let dn = unit(d).unwrap();
        assert!((dot(&n, &dn).abs() - 1.0).abs() < 1e-12);
        assert!(pr.delta > 0.0);
    }

    #[test]
    fn normal_taylor_residual_is_quadratic() {
        let r = field("u");
        let f = field("u^2");
        let t = 0.01;
        let (_, _, res) = taylor_normal(&f, &r, &Point4::new(0.0, 0.0, t, 0.0), 1e-12).unwrap();
        assert!((res - t * t).abs() < 1e-18);
    }

    #[test]
    fn sampling_is_deterministic_and_on_the_boundary() {
        let r = field("u + absz2");
        let plan = SamplePlan::new(Box4::cube(Point4::ORIGIN, 0.2), 200, 7);
        let a = sample_boundary(&r, &plan);
        let b = sample_boundary(&r, &plan);
        assert_eq!(a.samples.len(), 200);
        assert_eq!(a.points(), b.points());
        for s in &a.samples {
            assert!(r.eval(&s.point).unwrap().abs() <= 1e-10);
        }
        for strategy in [Strategy::Grid, Strategy::Quasirandom] {
            let s = sample_boundary(&r, &plan.clone().with_strategy(strategy));
            assert_eq!(s.samples.len(), 200);
        }
    }

    #[test]
    fn locus_projection() {
        let locus = Locus::new("curve", vec![field("x - v"), field("y")]);
        let p = locus.project(&Point4::new(0.3, 0.2, 0.0, -0.1)).unwrap();
        assert!((p.x - p.v).abs() < 1e-14 && p.y.abs() < 1e-14);
    }
}
