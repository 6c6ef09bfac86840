//! End-to-end acceptance run: one line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use pshlab::boundary::{sample_levels, SampleSet};
use pshlab::certify::*;
use pshlab::cframe::{levi_raw, Order2};
use pshlab::classify::{classify_point, point_type, type4_inequality, FiniteType, Pseudoconvexity, Strict4, Tolerances};
use pshlab::construct::*;
use pshlab::expr::{parse_field, Params, Point4, ScalarField};
use pshlab::gallery::*;
use pshlab::suite::{cmd_suite, SuiteConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn field(s: &str) -> ScalarField {
    parse_field(s, &Params::new()).unwrap()
}

fn entry(id: &str, kv: &[(&str, &str)]) -> ScalarField {
    let p: BTreeMap<String, String> = kv.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    make(id, &p).unwrap().field
}

fn omega(k: u32) -> ScalarField {
    entry("omega_local", &[("k", &k.to_string())])
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------

const POOL: [&str; 16] = [
    "x",
    "y*v",
    "u^2",
    "x*y*u",
    "absz2",
    "absw2*x",
    "sin(x+v)",
    "cos(y-2*u)",
    "exp(u*x)",
    "sqrt(2+x^2+v^2)",
    "ln(3+y+u)",
    "tan(x/3)",
    "(1/3)*x*v^2",
    "v^3",
    "cos(x*y)*u",
    "exp(-(u^2+y^2))",
];

fn random_field(rng: &mut ChaCha8Rng) -> ScalarField {
    let terms = rng.gen_range(2..=5);
    let mut s = String::from("0");
    for _ in 0..terms {
        let a = POOL[rng.gen_range(0..POOL.len())];
        let b = POOL[rng.gen_range(0..POOL.len())];
        let c = rng.gen_range(-9..=9);
        s.push_str(&format!(" + ({c}/4)*({a})*({b})"));
    }
    field(&s)
}

fn c1_derivatives() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let f = random_field(&mut rng);
        let o2 = Order2::new(&f);
        for _ in 0..20 {
            let p: [f64; 4] = [0, 1, 2, 3].map(|_| rng.gen_range(-0.5..0.5));
            let d = o2.eval(&Point4::from(p)).map_err(e2s)?;
            for i in 0..4 {
                let (mut a, mut b) = (p, p);
                a[i] += h;
                b[i] -= h;
                let (da, db) = (o2.eval(&Point4::from(a)).map_err(e2s)?, o2.eval(&Point4::from(b)).map_err(e2s)?);
                let fd = (da.value - db.value) / (2.0 * h);
                worst = worst.max((d.grad[i] - fd).abs() / d.grad[i].abs().max(1.0));
                for j in 0..4 {
                    let fd = (da.grad[j] - db.grad[j]) / (2.0 * h);
                    worst = worst.max((d.hess[i][j] - fd).abs() / d.hess[i][j].abs().max(1.0));
                }
            }
        }
    }
    ensure(worst <= 1e-5, format!("max relative error {worst:.2e} over 50 fields x 20 points"))
}

fn c2_tanlog_levi() -> Outcome {
    let r = entry("tanlog", &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (x, y, v) = (rng.gen_range(-1.4..1.4), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let u = 0.5 * (x - v) * (x - v) + f64::cos(x).ln();
        let p = Point4::new(x, y, u, v);
        worst = worst.max((levi_raw(&r, &p, 1e-12).map_err(e2s)? - tanlog_levi(&p)).abs());
    }
    ensure(worst <= 1e-9, format!("max |levi - closed form| = {worst:.2e} at 1000 samples"))
}

fn c3_partials() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in [3, 4] {
        for global in [false, true] {
            let r = entry(if global { "omega_global" } else { "omega_local" }, &[("k", &k.to_string())]);
            let o2 = Order2::new(&r);
            for _ in 0..1000 {
                let p = Point4::from([0, 1, 2, 3].map(|_| rng.gen_range(-0.6..0.6)));
                let w = o2.eval(&p).map_err(e2s)?.wirtinger();
                worst = worst.max(omega_partials(k, global, &p).mismatch(&w));
            }
        }
    }
    ensure(worst <= 1e-10, format!("max relative mismatch {worst:.2e} (k = 3, 4; local and global)"))
}

fn c4_levi_lower_bound() -> Outcome {
    let mut msg = Vec::new();
    let mut ok = true;
    for k in [3, 4] {
        let pts = sample_omega_local(k, 10_000, 40 + k as u64, 0.1, 0.1);
        let c = levi_lower_bound_check(k, &pts, 0.125).map_err(e2s)?;
        ok &= c.passed();
        msg.push(format!("k={k}: {:?}, min slack {:.2e}", c.verdict, c.constant.unwrap_or(f64::NAN)));
    }
    ensure(ok, msg.join("; "))
}

fn c5_types() -> Outcome {
    let mut cases: Vec<(String, ScalarField, usize)> = [3u32, 4, 5]
        .iter()
        .map(|&k| (format!("omega k={k}"), omega(k), 2 * k as usize))
        .collect();
    cases.push(("u+|z|^4".into(), field("u + absz2^2"), 4));
    cases.push(("u+|z|^2".into(), field("u + absz2"), 2));
    let mut msg = Vec::new();
    let mut ok = true;
    for (name, r, want) in cases {
        let t = point_type(&r, &Point4::ORIGIN, want.max(4), 1e-7).map_err(e2s)?;
        ok &= t.c_p == FiniteType::Finite(want);
        msg.push(format!("{name}: {:?}", t.c_p));
    }
    ensure(ok, msg.join("; "))
}

fn model(a: f64) -> ScalarField {
    entry("model", &[("a", &format!("{a:e}"))])
}

fn c6_model_thresholds() -> Outcome {
    let tols = Tolerances::default();
    let mut ok = true;
    let mut rows = Vec::new();
    for a in [0.0, 0.5, 0.9, 1.0, 1.2, 4.0 / 3.0, 1.4] {
        let t = classify_point(&model(a), &Point4::ORIGIN, &tols).map_err(e2s)?;
        let psc = t.pseudoconvex != Pseudoconvexity::No;
        let strict = t.strict4 == Strict4::Strict;
        let kohn = t.kohn4 == Some(true);
        ok &= psc == (a <= 4.0 / 3.0) && strict == (a < 4.0 / 3.0) && kohn == (a < 1.0);
        rows.push(format!("{a:.3}:{}{}{}", psc as u8, strict as u8, kohn as u8));
    }
    // locate the pseudoconvexity threshold by bisection on LL̄λ − |LLλ|
    let margin = |a: f64| type4_inequality(&model(a), &Point4::ORIGIN).map(|v| v.margin(1.0));
    let (mut lo, mut hi) = (1.2, 1.4);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if margin(mid).map_err(e2s)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let err = (0.5 * (lo + hi) - 4.0 / 3.0).abs();
    ok &= err <= 1e-8;
    ensure(ok, format!("a:psc/strict/kohn {}; threshold off by {err:.1e}", rows.join(" ")))
}

fn c7_basic_type4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let a = rng.gen_range(0.0..=4.0 / 3.0);
        let v = type4_inequality(&model(a), &Point4::ORIGIN).map_err(e2s)?;
        worst = worst.min(v.margin(1.0) + 1e-9 * v.scale());
    }
    ensure(worst >= 0.0, format!("min of LLbar(lambda) - |LL(lambda)| + 1e-9 scale = {worst:.3e} over 100 instances"))
}

fn c8_loop() -> Outcome {
    let mut worst = 0.0f64;
    for k in [3, 4] {
        for sigma in [0.05, 0.1] {
            let v = loop_integral(forced_form(k), k, sigma, 256, CurveDomain::Local, Branch::Upper).map_err(e2s)?;
            worst = worst.max((v / forced_loop_value(k, sigma) - 1.0).abs());
        }
    }
    let h = field("x*y");
    let mut exact = 0.0f64;
    for (domain, branch) in [
        (CurveDomain::Local, Branch::Upper),
        (CurveDomain::Global, Branch::Upper),
        (CurveDomain::Global, Branch::Lower),
    ] {
        exact = exact.max(loop_integral_field(&h, 3, 0.1, 256, domain, branch).map_err(e2s)?.abs());
    }
    ensure(
        worst <= 1e-6 && exact <= 1e-10,
        format!("forced form relative error {worst:.1e}; exact form |loop| {exact:.1e}"),
    )
}

fn c9_global() -> Outcome {
    let mut ok = true;
    let mut msg = Vec::new();
    for k in 3..=6 {
        let mut pts = sample_omega_global(k, 10_000, 90 + k as u64);
        let b = global_bounds_check(k, &pts).map_err(e2s)?;
        pts.extend(sample_global_case1(k, 2_500, 190 + k as u64));
        let g = global_psc_check(k, &pts, 10_000).map_err(e2s)?;
        ok &= b.passed() && g.passed();
        msg.push(format!(
            "k={k}: bounds {:?}, eps {:.1e}, case2 {:?} ({}), f_k {:?}",
            b.verdict,
            g.case1.constant.unwrap_or(f64::NAN),
            g.case2.verdict,
            g.case2.samples,
            g.fk.verdict
        ));
    }
    ensure(ok, msg.join("; "))
}

fn tanlog_levels(n: usize, seed: u64) -> (ScalarField, Vec<SampleSet>) {
    let e = make("tanlog", &BTreeMap::new()).unwrap();
    let lv = sample_levels(&e.field, &e.plan(n, seed), 3);
    (e.field, lv)
}

fn c10_counterexample() -> Outcome {
    let opts = RatioOptions::default();
    let r = omega(3);
    let levels = omega_local_levels(3, 2000, 10, 3).map_err(e2s)?;
    let base = cond_psh_boundary(&r, &levels, &opts).map_err(e2s)?;
    let mut fails = (base.verdict == Verdict::Fail) as usize;
    for h in candidate_multipliers() {
        fails += (cond_psh_boundary(&graft(&r, &h), &levels, &opts).map_err(e2s)?.verdict == Verdict::Fail) as usize;
    }
    let (t, lv) = tanlog_levels(2000, 10);
    let mut graft_ok = true;
    for h in ["y+u", "y+ln(cos(x))"] {
        graft_ok &= cond_psh_boundary(&graft(&t, &field(h)), &lv, &opts).map_err(e2s)?.passed();
    }
    ensure(
        fails == 21 && graft_ok,
        format!("omega_6 fails for r and {} of 20 multipliers; tanlog grafts pass: {graft_ok}", fails - (base.verdict == Verdict::Fail) as usize),
    )
}

fn c11_weak_negativity() -> Outcome {
    let r = entry("tanlog", &[]);
    let s = 1e-2;
    let w = Order2::new(&r).eval(&Point4::ORIGIN).map_err(e2s)?.wirtinger();
    let v = [Complex64::new(-1.0, 0.0), Complex64::new(0.0, s)];
    let h = w.hermitian(&v, &v).re;
    let rel = (h / (-s / 2.0) - 1.0).abs();
    ensure(rel <= 0.1, format!("H(V,V)(0) = {h:.6e} vs -s/2 = {:.1e}, off by {:.1}%", -s / 2.0, 100.0 * rel))
}

fn ball_boundary(r: &ScalarField, u_of: impl Fn(f64, f64, f64) -> f64, n: usize, seed: u64) -> Vec<Point4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (x, y, v) = (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        let p = Point4::new(x, y, u_of(x, y, v), v);
        if p.norm() <= 0.2 {
            debug_assert!(r.eval(&p).unwrap().abs() < 1e-12);
            out.push(p);
        }
    }
    out
}

fn quartic_levels(r: &ScalarField, n: usize, seed: u64) -> Vec<SampleSet> {
    let e = make("tube", &BTreeMap::from([("f".to_string(), "absz2^2".to_string())])).unwrap();
    debug_assert_eq!(e.field.to_dsl(), r.to_dsl());
    sample_levels(r, &e.plan(n, seed), 3)
}

fn c12_strict4_pipeline() -> Outcome {
    let opts = RatioOptions::default();
    let mut msg = Vec::new();
    let mut ok = true;
    let cases: [(&str, ScalarField, fn(f64, f64, f64) -> f64); 2] = [
        ("u+|z|^4", field("u + absz2^2"), |x, y, _| -(x * x + y * y).powi(2)),
        ("model a=1", model(1.0), |x, y, _| {
            let s = x * x + y * y;
            -(s * (x * x - y * y) + s * s)
        }),
    ];
    for (name, r, u_of) in cases {
        let rec = multiplier_strict4(&r, &[], TOL_ZERO_DEFAULT).map_err(e2s)?;
        let e = make("model", &BTreeMap::new()).unwrap();
        let levels = sample_levels(&r, &e.plan(1500, 12), 3);
        let res = multiplier_residuals(&r, &rec, &levels, &opts).map_err(e2s)?;
        let rho = graft(&r, &rec.h);
        let pts = ball_boundary(&r, u_of, 10_000, 12);
        let rc = required_c(&rho, &pts, PSD_TOL, REQUIRED_C_MAX).map_err(e2s)?;
        let psd = psd_on_samples(&bend(&rho, rc.c), &pts, PSD_TOL).map_err(e2s)?;
        let pass = res.iter().all(|c| c.passed()) && psd.passed();
        ok &= pass;
        msg.push(format!(
            "{name}: residual {:?}, C = {}, psd {:?} (min eig {:.1e})",
            res.iter().map(|c| c.verdict).collect::<Vec<_>>(),
            rc.c,
            psd.verdict,
            psd.constant.unwrap_or(f64::NAN)
        ));
    }
    ensure(ok, msg.join("; "))
}

const TOL_ZERO_DEFAULT: f64 = 1e-7;

fn c13_normal_pipeline() -> Outcome {
    let opts = RatioOptions::default();
    let r = field("u + absz2^2");
    let rec = multiplier_normal(&r, &[], TOL_ZERO_DEFAULT).map_err(e2s)?;
    let rho = graft(&r, &rec.h);
    let levels = quartic_levels(&r, 1500, 13);
    let psh = cond_psh_boundary(&rho, &levels, &opts).map_err(e2s)?;
    let nor = cond_normal(&rho, &levels, &opts).map_err(e2s)?;
    let bdry = ball_boundary(&r, |x, y, _| -(x * x + y * y).powi(2), 2_000, 13);
    let be = basic_estimate_c(&rho, &bdry).map_err(e2s)?;
    let d = 0.2;
    let (glob, k) = globalize_quadratic(&rho, be.c, d);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut pts = Vec::with_capacity(10_000);
    let (mut inside, mut outside) = (0, 0);
    while pts.len() < 10_000 {
        let p = Point4::from([0, 1, 2, 3].map(|_| rng.gen_range(-d..d)));
        if p.norm() > d {
            continue;
        }
        let rv = rho.eval(&p).map_err(e2s)?;
        if k.in_shrunken_region(rv, &p) {
            if rv < 0.0 {
                inside += 1;
            } else {
                outside += 1;
            }
            pts.push(p);
        }
    }
    let scan = psh_open_scan(&glob, &pts, PSD_TOL).map_err(e2s)?;
    ensure(
        psh.passed() && nor.passed() && scan.passed(),
        format!(
            "psh-boundary {:?}, normal {:?}; C = {:.3}, K1 = {:.3}, K2 = {:.3}; open scan {:?} on {inside} interior + {outside} exterior points",
            psh.verdict, nor.verdict, be.c, k.k1, k.k2, scan.verdict
        ),
    )
}

fn c14_type6() -> Outcome {
    let mut msg = Vec::new();
    let mut ok = true;
    for src in ["u + absz2^3", "u + absz2^4"] {
        let t = type6_normal_vanish(&field(src), &Point4::ORIGIN, TOL_ZERO_DEFAULT).map_err(e2s)?;
        ok &= t.value.abs() <= 1e-10;
        msg.push(format!("{src}: |nu H(L,L)(0)| = {:.1e}", t.value.abs()));
    }
    ensure(ok, msg.join("; "))
}

fn c15_df() -> Outcome {
    let r = field("u + absz2^3");
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let pts: Vec<Point4> = (0..10_000)
        .map(|_| {
            let (x, y, v) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
            let s: f64 = x * x + y * y;
            Point4::new(x, y, -s.powi(3) - rng.gen_range(1e-6..0.05), v)
        })
        .collect();
    let (k, c) = df_select_k(&r, 0.9, &pts, PSD_TOL, &DF_K_GRID).map_err(e2s)?;
    ensure(
        k.is_some() && c.passed(),
        format!("K = {k:?}, verdict {:?} on {} interior points", c.verdict, c.samples),
    )
}

fn near_origin(levels: Vec<SampleSet>, radius: f64) -> Vec<SampleSet> {
    levels
        .into_iter()
        .map(|s| SampleSet {
            samples: s.samples.into_iter().filter(|b| b.point.norm() <= radius).collect(),
            failures: s.failures,
        })
        .collect()
}

fn c16_sesqui() -> Outcome {
    let opts = RatioOptions::default();
    let e = make("model", &BTreeMap::new()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let pool = candidate_multipliers();
    let hs: Vec<ScalarField> = (0..10)
        .map(|_| {
            let (a, b) = (&pool[rng.gen_range(0..pool.len())], &pool[rng.gen_range(0..pool.len())]);
            let (ca, cb) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            field(&format!("({ca})*({}) + ({cb})*({})", a.to_dsl(), b.to_dsl()))
        })
        .collect();
    let mut cases = Vec::new();
    for src in ["u + x^2 + y^2", "u + absz2"] {
        let r = field(src);
        cases.push((src.to_string(), r.clone(), sample_levels(&r, &e.plan(800, 16), 3), Verdict::Pass));
    }
    let (t, lv) = tanlog_levels(2000, 16);
    cases.push(("tanlog".into(), t, near_origin(lv, 0.3), Verdict::Fail));
    let mut ok = true;
    let mut msg = Vec::new();
    for (name, r, levels, want) in cases {
        let base = cond_sesqui(&r, &levels, &opts).map_err(e2s)?.verdict;
        let mut same = 0;
        for h in &hs {
            same += (cond_sesqui(&graft(&r, h), &levels, &opts).map_err(e2s)?.verdict == base) as usize;
        }
        ok &= base == want && same == hs.len();
        msg.push(format!("{name}: {base:?}, unchanged under {same}/10 multipliers"));
    }
    ensure(ok, msg.join("; "))
}

fn c17_determinism() -> Outcome {
    let cfg = SuiteConfig {
        seed: 17,
        samples: 1000,
        ..SuiteConfig::default()
    };
    let a = cmd_suite(&cfg).map_err(e2s)?;
    let b = cmd_suite(&cfg).map_err(e2s)?;
    let (ja, jb) = (a.to_json_string(), b.to_json_string());
    ensure(
        ja == jb,
        format!("{} bytes, identical: {}; matrix {}/{} agree", ja.len(), ja == jb, a.agree, a.total),
    )
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 17] = [
        ("derivative engine vs finite differences", 5.0, c1_derivatives),
        ("closed-form Levi of the tan-log domain", 2.0, c2_tanlog_levi),
        ("displayed partials of omega", 5.0, c3_partials),
        ("Levi lower bound near the origin", 10.0, c4_levi_lower_bound),
        ("type detection", 30.0, c5_types),
        ("model family thresholds", 10.0, c6_model_thresholds),
        ("basic type 4 estimate", 20.0, c7_basic_type4),
        ("loop obstruction", 1.0, c8_loop),
        ("global domain", 10.0, c9_global),
        ("counterexample evidence", 30.0, c10_counterexample),
        ("weak type 4 negativity", 1.0, c11_weak_negativity),
        ("strict type 4 pipeline", 60.0, c12_strict4_pipeline),
        ("type 4 near-boundary pipeline", 60.0, c13_normal_pipeline),
        ("normal derivative at type 6", 5.0, c14_type6),
        ("Diederich-Fornaess bump", 30.0, c15_df),
        ("sesquiconvexity", 30.0, c16_sesqui),
        ("determinism", f64::INFINITY, c17_determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let secs = t.elapsed().as_secs_f64();
        let (ok, detail) = match out {
            Ok(d) => (secs < *budget, d),
            Err(d) => (false, d),
        };
        let over = if secs >= *budget { " (over time budget)" } else { "" };
        println!(
            "criterion {:>2} {}  {name} [{secs:.2} s]{over}: {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" }
        );
        failed += (!ok) as usize;
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
