//! Task execution. Entries of a sweep run concurrently; each writes only its
//! own files, and the summary is assembled in input order afterwards.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use fronts::constructions::fast_sub::{c_floor, FastSub};
use fronts::constructions::fast_super::FastSuper;
use fronts::constructions::slow_super::{SlowSuper, SlowSuperParams};
use fronts::constructions::*;
use fronts::pde::{fit_drift, make_initial_data, simulate, FrontTrace, InitialKind, SolverConfig};
use fronts::perturbed::{verify_perturbation_bound, BoundReport};
use fronts::reaction::{normalize_to_unit_slope, Nonlinearity};
use fronts::spectral::{run_w, verify_dirichlet_decay, verify_neumann_decay, Boundary, DecayReport, SpectralGrid};
use fronts::wave::{classify, minimal_speed, solve_profile, Regime, WaveOptions, WaveProfile};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AuditKind, ExperimentConfig, GridSpec, SpectralRun, Task};
use crate::output::*;

/// Where and how to run a parsed config.
pub struct RunContext {
    pub out_dir: PathBuf,
    /// Directory that relative input paths resolve against.
    pub base_dir: PathBuf,
    pub workers: usize,
    /// Exact text of the config, hashed into the manifest.
    pub config_text: String,
}

struct EntryOutput<R> {
    row: R,
    artifacts: Vec<Artifact>,
}

fn artifact(out_dir: &Path, kind: &str, label: &str, name: &str) -> Result<Artifact> {
    Ok(Artifact {
        kind: kind.into(),
        label: label.into(),
        path: PathBuf::from(name),
        sha256: sha256_file(&out_dir.join(name))?,
    })
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Pushed => "pushed",
        Regime::PulledSlow => "pulled_slow",
        Regime::PulledFast => "pulled_fast",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Wave at speed `c`, shifted so that `U(0) = 1/2`. At a numerically located
/// pushed speed the shooting may land a hair below `c*`; nudge upward once.
pub fn centered_wave(f: &Nonlinearity, c: f64) -> Result<WaveProfile> {
    let opts = WaveOptions::default();
    let w = solve_profile(f, c, &opts).or_else(|_| solve_profile(f, c * (1.0 + 1e-8), &opts))?;
    let z = w.position_of(0.5).ok_or_else(|| anyhow!("profile never crosses 1/2"))?;
    Ok(w.shifted(z))
}

pub fn profile_rows(w: &WaveProfile, z0: f64, z1: f64, n: usize) -> Vec<Vec<String>> {
    let [lo, hi] = w.domain();
    w.sample_uniform(z0.max(lo), z1.min(hi), n).into_iter().map(|s| vec![num(s.z), num(s.u), num(s.du)]).collect()
}

/// Builds one of the three audited constructions for `f` (rescaled to `f'(0) = 1`).
pub fn build_construction(
    f: &Nonlinearity,
    kind: AuditKind,
    r: Option<f64>,
    epsilon: Option<f64>,
    beta_fraction: Option<f64>,
) -> Result<ConstructedFunction> {
    let (f, _) = normalize_to_unit_slope(f)?;
    Ok(match kind {
        AuditKind::FastSub => ConstructedFunction::new(FastSub::new(&f, r.unwrap_or(0.9), c_floor(&f))?),
        AuditKind::FastSuper => ConstructedFunction::new(FastSuper::new(&f, r.unwrap_or(0.26), 1.0, None)?),
        AuditKind::SlowSuper => {
            let d = SlowSuperParams::default();
            let frac = beta_fraction.unwrap_or(0.99);
            let p = SlowSuperParams::at_fraction(epsilon.unwrap_or(d.eps), frac, d.c);
            ConstructedFunction::new(SlowSuper::new(&f, p)?)
        }
    })
}

#[derive(Debug, Serialize)]
pub struct AuditReport {
    pub kind: ConstructionKind,
    pub params: std::collections::BTreeMap<String, f64>,
    pub t_search: Option<TSearch>,
    pub grid: CertGrid,
    pub verdict: Certification,
    pub residual: ResidualReport,
    pub matching_all_hold: bool,
    pub matching: Vec<MatchingSample>,
}

/// Certifies `c` on `grid`, or on `[T, 10T]` with `T` from the doubling search.
/// When no `T` is found the cap's own window is reported.
pub fn audit(c: &ConstructedFunction, grid: Option<GridSpec>) -> Result<AuditReport> {
    let (grid, t_search) = match grid {
        Some(g) => (CertGrid { t0: g.t0, t1: g.t1, nt: g.nt, x_margin: g.x_margin, nx: g.nx }, None),
        None => {
            let s = find_valid_t(c, 8, 20.0, 400);
            let t = s.found.unwrap_or(2f64.powi(T_CAP_EXPONENT));
            (CertGrid { t0: t, t1: 10.0 * t, nt: 16, x_margin: 20.0, nx: 800 }, Some(s))
        }
    };
    let residual = residual_certify(c, &grid)?;
    let m = matching_check(c, &grid.times())?;
    Ok(AuditReport {
        kind: c.kind(),
        params: c.params(),
        t_search,
        grid,
        verdict: residual.verdict,
        residual,
        matching_all_hold: m.all_hold,
        matching: m.samples,
    })
}

/// Every grid point as `(t, x, N/u, margin, active piece)`.
pub fn residual_rows(c: &ConstructedFunction, grid: &CertGrid) -> Result<Vec<Vec<String>>> {
    let ts = grid.times();
    c.prepare(&ts)?;
    let per_t: Vec<Vec<Vec<String>>> = ts
        .par_iter()
        .map(|&t| {
            grid.positions(c.construction(), t)
                .into_iter()
                .map(|s| {
                    let (e, a) = c.eval_rel(t, s)?;
                    let piece = if a == Active::Left { "left" } else { "right" };
                    Ok(vec![num(t), num(2.0 * t + s), num(e.rel_residual), num(e.rel_margin), piece.to_string()])
                })
                .collect::<Result<Vec<_>, ConstructionError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(per_t.into_iter().flatten().collect())
}

pub fn trace_rows(trace: &FrontTrace, c_star: f64) -> Vec<Vec<String>> {
    trace.entries.iter().map(|&(t, x)| vec![num(t), num(trace.level), num(x), num(c_star * t - x)]).collect()
}

pub fn spectral_report(run: &SpectralRun) -> Result<DecayReport> {
    let gauss = |y: f64| (-y * y / 8.0).exp();
    let grid = SpectralGrid::default();
    Ok(match Boundary::from(run.bc) {
        Boundary::Neumann => {
            verify_neumann_decay(&run_w(Boundary::Neumann, run.coeff, gauss, run.tau_end, &grid)?, run.l)?
        }
        Boundary::Dirichlet => verify_dirichlet_decay(
            &run_w(Boundary::Dirichlet, run.coeff, |y| y * gauss(y), run.tau_end, &grid)?,
            run.l,
        )?,
    })
}

fn speed_entry(out: &Path, a: f64) -> Result<EntryOutput<Vec<String>>> {
    let f = Nonlinearity::cubic(a)?;
    let d = classify(&f)?;
    let name = format!("profile_a{}.csv", num(a));
    let w = centered_wave(&f, d.c_star)?;
    write_csv(&out.join(&name), &["z", "U", "dU"], profile_rows(&w, -20.0, 40.0, 1201))?;
    Ok(EntryOutput {
        row: vec![num(a), num(d.c_star), opt(d.a), opt(d.b), regime_name(d.regime).into()],
        artifacts: vec![artifact(out, "profile", &format!("a={}", num(a)), &name)?],
    })
}

#[allow(clippy::too_many_arguments)]
fn drift_entry(
    out: &Path,
    a: f64,
    t_end: f64,
    dx: f64,
    dt: f64,
    window: [f64; 2],
    level: f64,
    half_width: Option<f64>,
) -> Result<EntryOutput<Vec<String>>> {
    let f = Nonlinearity::cubic(a)?;
    let c_star = minimal_speed(&f, 1e-9)?;
    let base = SolverConfig::drift(t_end);
    let cfg = SolverConfig { dx, dt, domain_half_width: half_width.unwrap_or(base.domain_half_width), ..base };
    let u0 = make_initial_data(InitialKind::Step, &cfg);
    let trace = simulate(&f, u0, &cfg, &[level])?.traces.remove(0);
    let fit = fit_drift(&trace, c_star, window)?;
    let name = format!("trace_a{}.csv", num(a));
    write_csv(&out.join(&name), &["t", "level", "x_lab", "m"], trace_rows(&trace, c_star))?;
    Ok(EntryOutput {
        row: vec![num(a), num(c_star), num(fit.r), num(fit.r_halfwindow), num(fit.residual_rms), num(fit.x)],
        artifacts: vec![artifact(out, "trace", &format!("a={}", num(a)), &name)?],
    })
}

/// Runs the configured task into `ctx.out_dir` and writes `manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Manifest> {
    cfg.validate(&ctx.base_dir)?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let out = ctx.out_dir.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(ctx.workers).build()?;
    let task = cfg.task.name();
    let artifacts = pool.install(|| run_task(cfg, ctx)).with_context(|| format!("task {task}"))?;

    let mut inputs = ctx.config_text.clone().into_bytes();
    if let Some(crate::config::ReactionSpec::Table { path }) = &cfg.reaction {
        inputs.extend(fs::read(ctx.base_dir.join(path))?);
    }
    let manifest = Manifest {
        schema_version: cfg.schema_version,
        task: task.into(),
        inputs_sha256: sha256_hex(&inputs),
        seed: cfg.seed,
        workers: ctx.workers,
        versions: Versions { fronts: fronts::VERSION.into(), fronts_cli: env!("CARGO_PKG_VERSION").into() },
        started_unix,
        wall_time_s: started.elapsed().as_secs_f64(),
        artifacts,
    };
    write_json(&out.join(MANIFEST_NAME), &manifest)?;
    Ok(manifest)
}

fn run_task(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<Artifact>> {
    let out = ctx.out_dir.as_path();
    let mut artifacts = Vec::new();
    let collect = |entries: Vec<EntryOutput<Vec<String>>>, artifacts: &mut Vec<Artifact>| {
        entries
            .into_iter()
            .map(|e| {
                artifacts.extend(e.artifacts);
                e.row
            })
            .collect::<Vec<_>>()
    };
    match &cfg.task {
        Task::SpeedTable { a } => {
            let entries = a
                .par_iter()
                .map(|&a| speed_entry(out, a).with_context(|| format!("speed_table entry a = {a}")))
                .collect::<Result<Vec<_>>>()?;
            let rows = collect(entries, &mut artifacts);
            write_csv(&out.join("speed_table.csv"), &["a", "c_star", "A", "B", "regime"], rows)?;
            artifacts.insert(0, artifact(out, "speed_table", "", "speed_table.csv")?);
        }
        Task::DriftSweep { a, t_end, dx, dt, window, level, domain_half_width } => {
            let entries = a
                .par_iter()
                .map(|&a| {
                    drift_entry(out, a, *t_end, *dx, *dt, *window, *level, *domain_half_width)
                        .with_context(|| format!("drift_sweep entry a = {a}"))
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = collect(entries, &mut artifacts);
            write_csv(&out.join("drift.csv"), &["a", "c_star", "r_fit", "r_halfwindow", "residual", "X"], rows)?;
            artifacts.insert(0, artifact(out, "drift", "", "drift.csv")?);
        }
        Task::ConstructionAudit { construction, r, epsilon, beta_fraction, grid } => {
            let f = cfg.reaction.as_ref().expect("validated").build(&ctx.base_dir)?;
            let c = build_construction(&f, *construction, *r, *epsilon, *beta_fraction)?;
            let rep = audit(&c, *grid)?;
            write_json(&out.join("report.json"), &rep)?;
            let rows = residual_rows(&c, &rep.grid)?;
            write_csv(&out.join("residuals.csv"), &["t", "x", "residual", "margin", "piece"], rows)?;
            artifacts.push(artifact(out, "report", "", "report.json")?);
            artifacts.push(artifact(out, "residuals", "", "residuals.csv")?);
        }
        Task::LemmaAudit { pairs } => {
            let f = cfg.reaction.as_ref().expect("validated").build(&ctx.base_dir)?;
            let (f, _) = normalize_to_unit_slope(&f)?;
            let reps: Vec<BoundReport> = pairs
                .par_iter()
                .map(|&[e, h]| {
                    verify_perturbation_bound(&f, e, h).with_context(|| format!("lemma_audit entry ({e}, {h})"))
                })
                .collect::<Result<_>>()?;
            let rows = reps.iter().map(|r| {
                vec![
                    num(r.epsilon),
                    num(r.eta),
                    num(r.max_ratio),
                    num(r.argmax_z),
                    num(r.z_cap),
                    serde_json::to_value(r.verdict).unwrap().as_str().unwrap_or_default().to_string(),
                ]
            });
            write_csv(&out.join("lemma.csv"), &["epsilon", "eta", "max_ratio", "argmax_z", "z_cap", "verdict"], rows)?;
            write_json(&out.join("lemma.json"), &reps)?;
            artifacts.push(artifact(out, "lemma", "", "lemma.csv")?);
            artifacts.push(artifact(out, "lemma_reports", "", "lemma.json")?);
        }
        Task::SpectralAudit { runs } => {
            let reps: Vec<DecayReport> = runs
                .par_iter()
                .map(|r| {
                    spectral_report(r).with_context(|| format!("spectral_audit entry {:?} coeff {}", r.bc, r.coeff))
                })
                .collect::<Result<_>>()?;
            let rows = reps.iter().map(|r| {
                vec![
                    format!("{:?}", r.bc).to_lowercase(),
                    num(r.coefficient),
                    num(r.w1),
                    num(r.k_l),
                    opt(r.decay_slope),
                    r.pass.to_string(),
                ]
            });
            write_csv(&out.join("spectral.csv"), &["bc", "coeff", "W1", "K_L", "decay_slope", "pass"], rows)?;
            write_json(&out.join("spectral.json"), &reps)?;
            artifacts.push(artifact(out, "spectral", "", "spectral.csv")?);
            artifacts.push(artifact(out, "spectral_reports", "", "spectral.json")?);
        }
    }
    Ok(artifacts)
}
