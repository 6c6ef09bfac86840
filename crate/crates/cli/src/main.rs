//! `pshlab`: classify boundary points, certify conditions, build defining
//! functions and run the gallery suite from the command line.
//!
//! Exit codes: 0 when the check passes, 2 on a mathematical failure (the
//! report carries witnesses), 3 when sampling was too thin to decide, and 1
//! on operational errors such as parse or projection failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pshlab::boundary::{sample_levels, SamplePlan, SampleSet};
use pshlab::certify::*;
use pshlab::classify::{classify_point, Pseudoconvexity, Tolerances};
use pshlab::expr::DEFAULT_MAX_ORDER;
use pshlab::construct::*;
use pshlab::error::Error as CoreError;
use pshlab::expr::{parse_field, Box4, Params, Point4, ScalarField};
use pshlab::gallery::{self, GalleryEntry};
use pshlab::report::{envelope, to_json_string};
use pshlab::suite::{cmd_suite, SuiteConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "pshlab", version, about = "Levi geometry and plurisubharmonic defining functions of domains in C^2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify a boundary point: pseudoconvexity, type, strict type 4.
    Classify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Certify a condition on sampled boundary points.
    Certify {
        /// Condition id, e.g. psh-boundary, sesqui, cond-normal, df-bump.
        condition: String,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunArgs,
        /// Multiplier h: checks r·e^h, or h itself for cond-ln and hx-hy.
        #[arg(long)]
        multiplier: Option<String>,
        /// Exponent η of the interior bump (df-bump).
        #[arg(long, default_value_t = 0.9)]
        eta: f64,
        /// Constant of the Levi lower bound (levi-lower-bound).
        #[arg(long, default_value_t = 0.125)]
        constant: f64,
    },
    /// Build a modified defining function and certify it.
    Construct {
        recipe: Recipe,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunArgs,
        /// Multiplier h for bend and globalize (default: none).
        #[arg(long)]
        multiplier: Option<String>,
        #[arg(long, default_value_t = 0.9)]
        eta: f64,
        /// Write the constructed field (DSL) to this file.
        #[arg(long)]
        field_out: Option<PathBuf>,
    },
    /// Run the gallery verification matrix.
    Suite {
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Gallery utilities.
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
}

#[derive(Subcommand, Debug)]
enum GalleryAction {
    /// List the built-in domains with their claims.
    List,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Recipe {
    /// Strict type 4 multiplier h with r·e^h psh on the boundary.
    Strict4,
    /// Type 4 multiplier that also kills the normal derivative of the Levi form.
    Normal,
    /// r·e^h bent by C·r² with the smallest C from the grid.
    Bend,
    /// ρ + ρ²(K₁ + K₂|p|²) with C from the basic estimate.
    Globalize,
    /// Interior bump −(−r − Kr²)^η with K from the default grid.
    Df,
}

#[derive(Args, Debug)]
struct Source {
    /// Defining function in the field DSL.
    #[arg(long, conflicts_with_all = ["file", "gallery"])]
    field: Option<String>,
    /// File holding the defining function.
    #[arg(long, conflicts_with = "gallery")]
    file: Option<PathBuf>,
    /// Gallery entry, e.g. omega_local:k=3 or model:a=1.2.
    #[arg(long)]
    gallery: Option<String>,
    /// Field parameter NAME=VALUE, bound to $NAME.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Point x,y,u,v.
    #[arg(long, default_value = "0,0,0,0")]
    point: String,
    /// Sampling box: one radius about the origin, or lo_x,lo_y,lo_u,lo_v,hi_x,hi_y,hi_u,hi_v.
    #[arg(long = "box")]
    bbox: Option<String>,
    /// Samples per refinement level (at least 16).
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, default_value_t = pshlab::TOL_ZERO)]
    tol_zero: f64,
    #[arg(long, default_value_t = pshlab::TOL_BDRY)]
    tol_bdry: f64,
    #[arg(long, default_value_t = pshlab::LAMBDA_MIN)]
    lambda_min: f64,
    /// Relative tolerance of positive semi-definiteness tests.
    #[arg(long, default_value_t = PSD_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for CSV plot data (samples, witnesses, λ slices).
    #[arg(long, value_name = "DIR")]
    emit_plots: Option<PathBuf>,
}

impl RunArgs {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol-zero", self.tol_zero),
            ("tol-bdry", self.tol_bdry),
            ("lambda-min", self.lambda_min),
            ("tol", self.tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("--{name} must be a positive number, got {v}");
            }
        }
        if self.samples < 16 {
            bail!("--samples must be at least 16, got {}", self.samples);
        }
        Ok(())
    }

    fn tols(&self) -> Tolerances {
        Tolerances {
            tol_zero: self.tol_zero,
            tol_bdry: self.tol_bdry,
            max_order: DEFAULT_MAX_ORDER,
        }
    }

    fn ratio_opts(&self) -> RatioOptions {
        RatioOptions {
            lambda_min: self.lambda_min,
            ..RatioOptions::default()
        }
    }

    fn point(&self) -> Result<Point4> {
        let v = parse_floats(&self.point).context("--point")?;
        match v.as_slice() {
            [x, y, u, w] => Ok(Point4::new(*x, *y, *u, *w)),
            _ => bail!("--point needs four numbers x,y,u,v"),
        }
    }

    fn bbox(&self) -> Result<Option<Box4>> {
        let Some(s) = &self.bbox else { return Ok(None) };
        let v = parse_floats(s).context("--box")?;
        match v.as_slice() {
            [r] if *r > 0.0 => Ok(Some(Box4::cube(Point4::ORIGIN, *r))),
            [a, b, c, d, e, f, g, h] => Ok(Some(Box4::new([*a, *b, *c, *d], [*e, *f, *g, *h]))),
            _ => bail!("--box needs one positive radius or eight numbers"),
        }
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| anyhow!("'{t}' is not a number")))
        .collect()
}

struct Loaded {
    field: ScalarField,
    entry: Option<GalleryEntry>,
    label: String,
}

impl Source {
    fn params(&self) -> Result<Params> {
        let mut p = Params::new();
        for kv in &self.params {
            let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("--param expects NAME=VALUE, got '{kv}'"))?;
            let v: f64 = v.trim().parse().map_err(|_| anyhow!("--param {k}: '{v}' is not a number"))?;
            p.insert(k.trim().to_string(), v);
        }
        Ok(p)
    }

    fn load(&self) -> Result<Loaded> {
        if let Some(g) = &self.gallery {
            let e = gallery::from_spec(g)?;
            return Ok(Loaded {
                field: e.field.clone(),
                label: g.clone(),
                entry: Some(e),
            });
        }
        let src = match (&self.field, &self.file) {
            (Some(f), None) => f.clone(),
            (None, Some(path)) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            _ => bail!("give exactly one of --field, --file or --gallery"),
        };
        Ok(Loaded {
            field: parse_field(src.trim(), &self.params()?)?,
            entry: None,
            label: src.trim().to_string(),
        })
    }
}

fn load_h(h: &Option<String>) -> Result<Option<ScalarField>> {
    h.as_ref()
        .map(|s| parse_field(s, &Params::new()).map_err(|e| anyhow!("--multiplier: {e}")))
        .transpose()
}

fn plan(loaded: &Loaded, run: &RunArgs) -> Result<SamplePlan> {
    let mut p = match &loaded.entry {
        Some(e) => e.plan(run.samples, run.seed),
        None => SamplePlan::new(Box4::cube(Point4::ORIGIN, 0.2), run.samples, run.seed),
    };
    if let Some(b) = run.bbox()? {
        p.bbox = b;
        p.keep = Some(b);
    }
    p.tol = run.tol_bdry;
    Ok(p)
}

fn omega_k(loaded: &Loaded, id: &str) -> Option<u32> {
    let e = loaded.entry.as_ref()?;
    (e.id == id).then(|| e.params.get("k").and_then(|k| k.parse().ok())).flatten()
}

fn boundary_levels(loaded: &Loaded, run: &RunArgs) -> Result<Vec<SampleSet>> {
    if let (Some(k), None) = (omega_k(loaded, "omega_local"), &run.bbox) {
        // exact samples concentrating on the weakly pseudoconvex parabola
        return Ok(gallery::omega_local_levels(k, run.samples, run.seed, run.levels.max(2))?);
    }
    let levels = sample_levels(&loaded.field, &plan(loaded, run)?, run.levels.max(1));
    if levels.iter().all(|l| l.samples.is_empty()) {
        return Err(CoreError::EmptySamples.into());
    }
    Ok(levels)
}

fn boundary_points(loaded: &Loaded, run: &RunArgs) -> Result<Vec<Point4>> {
    Ok(boundary_levels(loaded, run)?.iter().flat_map(|l| l.points()).collect())
}

/// Uniform points of the sampling box, on both sides of the boundary.
fn box_points(loaded: &Loaded, run: &RunArgs) -> Result<Vec<Point4>> {
    let b = plan(loaded, run)?.bbox;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    Ok((0..run.samples)
        .map(|_| Point4::from([0, 1, 2, 3].map(|i| rng.gen_range(b.lo[i]..=b.hi[i]))))
        .collect())
}

fn box_radius(loaded: &Loaded, run: &RunArgs) -> Result<f64> {
    let b = plan(loaded, run)?.bbox;
    Ok((0..4).map(|i| b.lo[i].abs().max(b.hi[i].abs()).powi(2)).sum::<f64>().sqrt())
}

// ---------------------------------------------------------------------------

struct Outcome {
    report: Value,
    code: u8,
    plots: Vec<(String, String)>,
}

fn worst_code(certs: &[Certificate]) -> u8 {
    if certs.iter().any(|c| c.verdict == Verdict::Fail) {
        2
    } else if certs.iter().any(|c| c.verdict == Verdict::Inconclusive) {
        3
    } else {
        0
    }
}

fn cmd_classify(source: &Source, run: &RunArgs) -> Result<Outcome> {
    let loaded = source.load()?;
    let p = run.point()?;
    let t = classify_point(&loaded.field, &p, &run.tols())?;
    let code = if t.pseudoconvex == Pseudoconvexity::No { 2 } else { 0 };
    Ok(Outcome {
        report: json!({ "source": loaded.label, "type_report": t }),
        code,
        plots: Vec::new(),
    })
}

fn need_h(h: Option<ScalarField>, cond: &str) -> Result<ScalarField> {
    h.ok_or_else(|| anyhow!("{cond} needs --multiplier"))
}

fn need_k(loaded: &Loaded, id: &str, cond: &str) -> Result<u32> {
    omega_k(loaded, id).ok_or_else(|| anyhow!("{cond} applies to --gallery {id}:k=..."))
}

fn cmd_certify(cond: &str, source: &Source, run: &RunArgs, multiplier: &Option<String>, eta: f64, constant: f64) -> Result<Outcome> {
    let id = ConditionId::parse(cond).ok_or_else(|| {
        let names: Vec<_> = ConditionId::ALL.iter().map(|c| c.as_str().to_lowercase().replace('_', "-")).collect();
        anyhow!("unknown condition '{cond}'; expected one of {}", names.join(", "))
    })?;
    let loaded = source.load()?;
    let h = load_h(multiplier)?;
    let r = &loaded.field;
    let rho = match &h {
        Some(h) if !matches!(id, ConditionId::CondLn | ConditionId::HxHy) => graft(r, h),
        _ => r.clone(),
    };
    let opts = run.ratio_opts();
    let mut plots = Vec::new();
    let mut with_levels = |levels: &[SampleSet]| {
        for (i, l) in levels.iter().enumerate() {
            plots.push((format!("samples_level{i}.csv"), l.to_csv()));
        }
    };
    let certs: Vec<Certificate> = match id {
        ConditionId::PshBoundary | ConditionId::CondNormal | ConditionId::Sesqui | ConditionId::RealCoords => {
            let levels = boundary_levels(&loaded, run)?;
            with_levels(&levels);
            vec![match id {
                ConditionId::PshBoundary => cond_psh_boundary(&rho, &levels, &opts)?,
                ConditionId::CondNormal => cond_normal(&rho, &levels, &opts)?,
                ConditionId::Sesqui => cond_sesqui(&rho, &levels, &opts)?,
                _ => cond_real_coords(&rho, &levels, &opts)?,
            }]
        }
        ConditionId::CondLn => {
            let levels = boundary_levels(&loaded, run)?;
            with_levels(&levels);
            multiplier_residuals(r, &MultiplierRecipe::user(need_h(h, cond)?), &levels, &opts)?
        }
        ConditionId::HxHy => {
            let levels = boundary_levels(&loaded, run)?;
            with_levels(&levels);
            vec![check_hx_hy(r, &need_h(h, cond)?, &levels, &opts)?]
        }
        ConditionId::PshOpen => vec![psh_open_scan(&rho, &box_points(&loaded, run)?, run.tol)?],
        ConditionId::BasicEst => vec![basic_estimate_c(&rho, &boundary_points(&loaded, run)?)?.to_certificate()],
        ConditionId::Type6Normal => {
            let p = run.point()?;
            let t = type6_normal_vanish(&rho, &p, run.tol_zero)?;
            let mut c = pointwise(
                id,
                "-|nu H(L,L)| at the point",
                &[(p, -t.value.abs(), -run.tol_zero * t.scale)],
                CertTolerances::default(),
            )?;
            if t.vanishes.is_none() {
                c.verdict = Verdict::Inconclusive;
                c.notes.push("the point has type below 6".into());
            }
            vec![c]
        }
        ConditionId::DfBump => {
            let inside: Vec<Point4> = box_points(&loaded, run)?
                .into_iter()
                .filter(|p| r.eval(p).map(|v| v < 0.0).unwrap_or(false))
                .collect();
            let (k, mut c) = df_select_k(r, eta, &inside, run.tol, &DF_K_GRID)?;
            c.notes.push(format!("selected K = {k:?}"));
            vec![c]
        }
        ConditionId::LeviLowerBound => {
            let k = need_k(&loaded, "omega_local", cond)?;
            let pts = gallery::sample_omega_local(k, run.samples, run.seed, 0.1, 0.1);
            vec![gallery::levi_lower_bound_check(k, &pts, constant)?]
        }
        ConditionId::GlobalBounds => {
            let k = need_k(&loaded, "omega_global", cond)?;
            vec![gallery::global_bounds_check(k, &gallery::sample_omega_global(k, run.samples, run.seed))?]
        }
        ConditionId::GlobalPsc => {
            let k = need_k(&loaded, "omega_global", cond)?;
            let mut pts = gallery::sample_omega_global(k, run.samples, run.seed);
            pts.extend(gallery::sample_global_case1(k, run.samples / 4 + 1, run.seed.wrapping_add(1)));
            let g = gallery::global_psc_check(k, &pts, run.samples)?;
            vec![g.case1, g.case2, g.fk]
        }
        ConditionId::RatioO => bail!("ratio-o compares two arbitrary terms; use a named condition instead"),
    };
    for (i, c) in certs.iter().enumerate() {
        plots.push((format!("witnesses{i}.csv"), c.witness_csv()));
    }
    let report = if certs.len() == 1 {
        json!({ "source": loaded.label, "certificate": certs[0].to_json() })
    } else {
        json!({ "source": loaded.label, "certificates": certs.iter().map(|c| c.to_json()).collect::<Vec<_>>() })
    };
    Ok(Outcome {
        report,
        code: worst_code(&certs),
        plots,
    })
}

fn cmd_construct(
    recipe: Recipe,
    source: &Source,
    run: &RunArgs,
    multiplier: &Option<String>,
    eta: f64,
    field_out: &Option<PathBuf>,
) -> Result<Outcome> {
    let loaded = source.load()?;
    let r = &loaded.field;
    let opts = run.ratio_opts();
    let mut extra = json!({});
    let (field, certs) = match recipe {
        Recipe::Strict4 | Recipe::Normal => {
            // the construction needs B > 0 at the weakly pseudoconvex point
            let at = [run.point()?];
            let rec = if recipe == Recipe::Strict4 {
                multiplier_strict4(r, &at, run.tol_zero)?
            } else {
                multiplier_normal(r, &at, run.tol_zero)?
            };
            let levels = boundary_levels(&loaded, run)?;
            let mut certs = multiplier_residuals(r, &rec, &levels, &opts)?;
            let rho = graft(r, &rec.h);
            if recipe == Recipe::Normal {
                certs.push(cond_psh_boundary(&rho, &levels, &opts)?);
                certs.push(cond_normal(&rho, &levels, &opts)?);
            }
            extra = json!({ "multiplier": rec.to_json(), "grafted": rho.to_dsl() });
            (rec.h, certs)
        }
        Recipe::Bend => {
            let rho = match load_h(multiplier)? {
                Some(h) => graft(r, &h),
                None => r.clone(),
            };
            let pts = boundary_points(&loaded, run)?;
            let rc = required_c(&rho, &pts, run.tol, REQUIRED_C_MAX)?;
            let bent = bend(&rho, rc.c);
            let cert = psd_on_samples(&bent, &pts, run.tol)?;
            extra = json!({ "c": rc.c, "tried": rc.tried });
            (bent, vec![cert])
        }
        Recipe::Globalize => {
            let rho = match load_h(multiplier)? {
                Some(h) => graft(r, &h),
                None => r.clone(),
            };
            let be = basic_estimate_c(&rho, &boundary_points(&loaded, run)?)?;
            let d = box_radius(&loaded, run)?;
            let (g, k) = globalize_quadratic(&rho, be.c, d);
            let pts: Vec<Point4> = box_points(&loaded, run)?
                .into_iter()
                .filter(|p| rho.eval(p).map(|v| k.in_shrunken_region(v, p)).unwrap_or(false))
                .collect();
            let cert = psh_open_scan(&g, &pts, run.tol)?;
            extra = json!({ "c": be.c, "d": d, "constants": k });
            (g, vec![be.to_certificate(), cert])
        }
        Recipe::Df => {
            let inside: Vec<Point4> = box_points(&loaded, run)?
                .into_iter()
                .filter(|p| r.eval(p).map(|v| v < 0.0).unwrap_or(false))
                .collect();
            let (k, cert) = df_select_k(r, eta, &inside, run.tol, &DF_K_GRID)?;
            let kk = k.unwrap_or(*DF_K_GRID.last().unwrap());
            extra = json!({ "k": k, "eta": eta });
            (df_bump(r, kk, eta)?, vec![cert])
        }
    };
    if let Some(path) = field_out {
        fs::write(path, field.to_dsl() + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    let report = json!({
        "source": loaded.label,
        "recipe": format!("{recipe:?}").to_lowercase(),
        "field": field.to_dsl(),
        "details": extra,
        "certificates": certs.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        report,
        code: worst_code(&certs),
        plots: Vec::new(),
    })
}

fn run_suite(k: u32, run: &RunArgs) -> Result<Outcome> {
    let cfg = SuiteConfig {
        k,
        seed: run.seed,
        samples: run.samples,
        levels: run.levels,
        tols: run.tols(),
        lambda_min: run.lambda_min,
        emit_plots: run.emit_plots.is_some(),
    };
    let rep = cmd_suite(&cfg)?;
    Ok(Outcome {
        report: rep.to_json()["result"].clone(),
        code: if rep.all_agree() { 0 } else { 2 },
        plots: rep.plots.clone(),
    })
}

fn write_plots(dir: &Path, plots: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, body) in plots {
        let p = dir.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn emit(command: &str, out: &Outcome, run: Option<&RunArgs>) -> Result<()> {
    let text = to_json_string(&envelope(command, out.report.clone()));
    match run.and_then(|r| r.out.as_ref()) {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            // a closed pipe (e.g. `| head`) is not an error
            match writeln!(out, "{text}").and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    if let Some(dir) = run.and_then(|r| r.emit_plots.as_ref()) {
        write_plots(dir, &out.plots)?;
    }
    Ok(())
}

/// Mathematical failures raised as errors map to exit code 2.
fn error_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<CoreError>() {
        Some(CoreError::StrictType4Violation { .. } | CoreError::TypeExceeds4 { .. } | CoreError::RequiredCNotFound { .. }) => 2,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let (name, out, run) = match &cli.command {
        Command::Classify { source, run } => {
            run.validate()?;
            ("classify", cmd_classify(source, run)?, Some(run))
        }
        Command::Certify {
            condition,
            source,
            run,
            multiplier,
            eta,
            constant,
        } => {
            run.validate()?;
            ("certify", cmd_certify(condition, source, run, multiplier, *eta, *constant)?, Some(run))
        }
        Command::Construct {
            recipe,
            source,
            run,
            multiplier,
            eta,
            field_out,
        } => {
            run.validate()?;
            ("construct", cmd_construct(*recipe, source, run, multiplier, *eta, field_out)?, Some(run))
        }
        Command::Suite { k, run } => {
            run.validate()?;
            ("suite", run_suite(*k, run)?, Some(run))
        }
        Command::Gallery { action: GalleryAction::List } => (
            "gallery list",
            Outcome {
                report: gallery::list(),
                code: 0,
                plots: Vec::new(),
            },
            None,
        ),
    };
    emit(name, &out, run)?;
    Ok(out.code)
}

fn init_threads() -> Result<()> {
    if let Ok(s) = std::env::var("PSHLAB_THREADS") {
        let n: usize = s.trim().parse().map_err(|_| anyhow!("PSHLAB_THREADS must be a positive integer, got '{s}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|_| dispatch(cli));
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}
