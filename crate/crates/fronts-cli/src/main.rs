use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fronts::pde::{fit_drift, make_initial_data, simulate, FrontTrace, InitialKind, SolverConfig};
use fronts::perturbed::{first_zero_growth_check, verify_perturbation_bound, SlowedFamily, Verdict};
use fronts::reaction::Nonlinearity;
use fronts::spectral::{run_w, Boundary, SpectralGrid};
use fronts::wave::{classify, minimal_speed, solve_profile, WaveOptions};
use fronts_cli::config::{AuditKind, BcName, ExperimentConfig, GridSpec, SpectralRun};
use fronts_cli::experiment::*;
use fronts_cli::output::{num, write_csv, write_json};
use fronts_cli::plot::{emit_plot_data, PlotKind};
use serde_json::json;

#[derive(Parser)]
#[command(name = "fronts", version, about = "Pulled reaction-diffusion fronts: waves, simulations, certificates")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML), used by `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; relative `--out` paths are placed inside it.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel work.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Wave profile CSV (z, U, dU), shifted so that U(0) = 1/2.
    Wave {
        #[arg(long)]
        a: f64,
        /// A speed, or `min` for the minimal speed.
        #[arg(long, default_value = "min")]
        c: String,
        #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
        z_min: f64,
        #[arg(long, default_value_t = 40.0)]
        z_max: f64,
        #[arg(long, default_value_t = 1201)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimal speed and tail asymptotics as JSON.
    Speed {
        #[arg(long)]
        a: f64,
    },
    /// Step-data simulation; writes the level-set trace CSV.
    Simulate {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 0.05)]
        dx: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        levels: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits m(t) = r ln t + X to a trace CSV.
    Drift {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Vec<f64>,
        /// Level to fit when the trace has several.
        #[arg(long)]
        level: Option<f64>,
    },
    /// Residual certificate and matching inequalities of a construction.
    VerifyConstruction {
        #[arg(long, value_enum)]
        kind: AuditKind,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        beta_fraction: Option<f64>,
        /// t0,t1,nt,x-margin,nx; searched when absent.
        #[arg(long, value_delimiter = ',', num_args = 5)]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Perturbed-wave bound as JSON.
    VerifyLemma {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        eta: f64,
    },
    /// First zero of the slowed profiles against (r + 2) ln t.
    FirstZero {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        r: f64,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        t: Vec<f64>,
    },
    /// Self-similar evolution snapshots (tau, y, w).
    Spectral {
        #[arg(long, value_enum)]
        bc: BcName,
        #[arg(long, allow_negative_numbers = true)]
        coeff: f64,
        #[arg(long, default_value_t = 8.0)]
        tau_end: f64,
        /// Snapshot spacing in tau.
        #[arg(long, default_value_t = 1.0)]
        every: f64,
        /// Keep every k-th grid point in y.
        #[arg(long, default_value_t = 10)]
        y_stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// W1 estimate and decay checks as JSON.
    SpectralVerify {
        #[arg(long, value_enum)]
        bc: BcName,
        #[arg(long, allow_negative_numbers = true)]
        coeff: f64,
        #[arg(long, default_value_t = 8.0)]
        tau_end: f64,
        #[arg(long, default_value_t = 6.0)]
        l: f64,
    },
    /// Runs the experiment in `--config`, writing artifacts and a manifest.
    Sweep,
    /// Long-format plot data from a run's manifest.
    PlotData {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(g: &Global, out: &Option<PathBuf>, default: &str) -> Option<PathBuf> {
    match (out, &g.out_dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => Some(d.join(default)),
        (None, None) => None,
    }
}

fn ensure_parent(p: &Path) -> Result<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(d)?;
    }
    Ok(())
}

/// CSV to `out`, or to stdout.
fn emit_csv(out: Option<PathBuf>, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    match out {
        Some(p) => {
            ensure_parent(&p)?;
            write_csv(&p, header, rows)?;
            eprintln!("wrote {}", p.display());
        }
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(header)?;
            for r in rows {
                w.write_record(&r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn cubic(a: f64) -> Result<Nonlinearity> {
    Nonlinearity::cubic(a).with_context(|| format!("reaction cubic(a = {a})"))
}

/// `(level, [(t, x)], c*)` for one level of a trace file.
type LevelTrace = (f64, Vec<(f64, f64)>, f64);

fn read_trace(path: &Path, level: Option<f64>) -> Result<(FrontTrace, f64)> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut by_level: Vec<LevelTrace> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let v: Vec<f64> = rec.iter().map(|s| s.parse::<f64>()).collect::<Result<_, _>>()?;
        let [t, lv, x, m] = v[..] else { bail!("trace rows need t, level, x_lab, m") };
        let idx = match by_level.iter().position(|e| e.0 == lv) {
            Some(i) => i,
            None => {
                by_level.push((lv, Vec::new(), f64::NAN));
                by_level.len() - 1
            }
        };
        let e = &mut by_level[idx];
        e.1.push((t, x));
        if t > 0.0 && e.2.is_nan() {
            e.2 = (m + x) / t;
        }
    }
    let pick = match level {
        Some(l) => by_level.into_iter().find(|e| (e.0 - l).abs() < 1e-12),
        None if by_level.len() == 1 => by_level.pop(),
        None => bail!("trace has {} levels; choose one with --level", by_level.len()),
    };
    let (lv, entries, c_star) = pick.context("requested level not in the trace")?;
    Ok((FrontTrace { level: lv, entries }, c_star))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(w) = g.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global().ok();
    }
    match &cli.cmd {
        Cmd::Wave { a, c, z_min, z_max, n, out } => {
            let f = cubic(*a)?;
            let c =
                if c == "min" { minimal_speed(&f, 1e-9)? } else { c.parse().context("--c must be a number or min")? };
            let w = centered_wave(&f, c)?;
            emit_csv(resolve(g, out, "wave.csv"), &["z", "U", "dU"], profile_rows(&w, *z_min, *z_max, *n))?;
        }
        Cmd::Speed { a } => {
            let d = classify(&cubic(*a)?)?;
            print_json(&json!({ "c_star": d.c_star, "A": d.a, "B": d.b, "regime": d.regime }))?;
        }
        Cmd::Simulate { a, t_end, dx, dt, levels, out } => {
            let f = cubic(*a)?;
            let c_star = minimal_speed(&f, 1e-9)?;
            let cfg = SolverConfig { dx: *dx, dt: *dt, ..SolverConfig::drift(*t_end) };
            let res = simulate(&f, make_initial_data(InitialKind::Step, &cfg), &cfg, levels)?;
            let rows = res.traces.iter().flat_map(|tr| trace_rows(tr, c_star)).collect();
            emit_csv(resolve(g, out, "trace.csv"), &["t", "level", "x_lab", "m"], rows)?;
        }
        Cmd::Drift { trace, window, level } => {
            let (tr, c_star) = read_trace(trace, *level)?;
            let fit = fit_drift(&tr, c_star, [window[0], window[1]])?;
            print_json(
                &json!({ "r": fit.r, "X": fit.x, "residual_rms": fit.residual_rms, "r_halfwindow": fit.r_halfwindow }),
            )?;
        }
        Cmd::VerifyConstruction { kind, a, r, epsilon, beta_fraction, grid, out } => {
            let c = build_construction(&cubic(*a)?, *kind, *r, *epsilon, *beta_fraction)?;
            let grid = grid.as_ref().map(|v| GridSpec {
                t0: v[0],
                t1: v[1],
                nt: v[2] as usize,
                x_margin: v[3],
                nx: v[4] as usize,
            });
            let rep = audit(&c, grid)?;
            match resolve(g, out, "report.json") {
                Some(p) => {
                    ensure_parent(&p)?;
                    write_json(&p, &rep)?;
                    eprintln!("{:?}: {:?}, matching {}", rep.kind, rep.verdict, rep.matching_all_hold);
                }
                None => print_json(&rep)?,
            }
        }
        Cmd::VerifyLemma { a, epsilon, eta } => {
            let rep = verify_perturbation_bound(&cubic(*a)?, *epsilon, *eta)?;
            print_json(&json!({
                "max_ratio": rep.max_ratio,
                "pass": rep.verdict == Verdict::Pass,
                "argmax_z": rep.argmax_z,
                "z_cap": rep.z_cap,
                "verdict": rep.verdict,
            }))?;
        }
        Cmd::FirstZero { a, r, t } => {
            let wave = solve_profile(&cubic(*a)?, 2.0, &WaveOptions::deep_tail())?;
            let rep = first_zero_growth_check(&SlowedFamily::new(wave, *r)?, t)?;
            let rows = rep
                .rows
                .iter()
                .map(|row| vec![num(row.t), row.z0.map(num).unwrap_or_default(), num(row.required), row.ok.to_string()])
                .collect();
            emit_csv(None, &["t", "z0", "required", "ok"], rows)?;
            eprintln!("increasing: {}, pass: {}", rep.increasing, rep.pass);
        }
        Cmd::Spectral { bc, coeff, tau_end, every, y_stride, out } => {
            let grid = SpectralGrid::default();
            let bc = Boundary::from(*bc);
            let gauss = |y: f64| (-y * y / 8.0).exp();
            let run = match bc {
                Boundary::Neumann => run_w(bc, *coeff, gauss, *tau_end, &grid)?,
                Boundary::Dirichlet => run_w(bc, *coeff, |y| y * gauss(y), *tau_end, &grid)?,
            };
            let n_snap = (run.tau_end / every).floor() as usize;
            let mut rows = Vec::new();
            for k in 0..=n_snap {
                let field = run.field_at(k as f64 * every);
                for i in (0..field.values.len()).step_by((*y_stride).max(1)) {
                    rows.push(vec![num(field.tau), num(field.y(i)), num(field.values[i])]);
                }
            }
            emit_csv(resolve(g, out, "snapshots.csv"), &["tau", "y", "w"], rows)?;
        }
        Cmd::SpectralVerify { bc, coeff, tau_end, l } => {
            let rep = spectral_report(&SpectralRun { bc: *bc, coeff: *coeff, tau_end: *tau_end, l: *l })?;
            print_json(
                &json!({ "W1": rep.w1, "K_L": rep.k_l, "decay_slope": rep.decay_slope, "pass": rep.pass, "report": rep }),
            )?;
        }
        Cmd::Sweep => {
            let path = g.config.as_ref().context("sweep needs --config")?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let out_dir = g
                .out_dir
                .clone()
                .or_else(|| cfg.output_dir.as_ref().map(|d| base_dir.join(d)))
                .context("no output directory: pass --out-dir or set output_dir")?;
            let workers = g.workers.or(cfg.workers).unwrap_or_else(rayon::current_num_threads);
            let ctx = RunContext { out_dir, base_dir, workers, config_text: text };
            let m = run_experiment(&cfg, &ctx)?;
            eprintln!(
                "{}: {} artifacts in {:.1} s -> {}",
                m.task,
                m.artifacts.len(),
                m.wall_time_s,
                ctx.out_dir.display()
            );
        }
        Cmd::PlotData { manifest, kind, out } => {
            let default = format!("{}.csv", serde_json::to_value(kind)?.as_str().unwrap_or("plot"));
            let path = resolve(g, out, &default).unwrap_or_else(|| PathBuf::from(&default));
            ensure_parent(&path)?;
            let n = emit_plot_data(manifest, *kind, &path)?;
            eprintln!("wrote {n} rows to {}", path.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
