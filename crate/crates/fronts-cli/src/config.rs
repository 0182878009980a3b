//! Experiment configuration: a versioned TOML file, unknown keys rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fronts::constructions::linear::tune_linear_cut;
use fronts::reaction::Nonlinearity;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Relative paths resolve against the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub reaction: Option<ReactionSpec>,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionSpec {
    Cubic {
        a: f64,
    },
    /// Two-column CSV `(u, f)`, optionally with a header row.
    Table {
        path: PathBuf,
    },
    LinearCut {
        delta: f64,
    },
}

impl ReactionSpec {
    pub fn build(&self, base: &Path) -> Result<Nonlinearity> {
        match self {
            ReactionSpec::Cubic { a } => Ok(Nonlinearity::cubic(*a)?),
            ReactionSpec::Table { path } => {
                let path = base.join(path);
                let (u, f) = read_table(&path).with_context(|| format!("reading {}", path.display()))?;
                Ok(Nonlinearity::table(u, f)?)
            }
            ReactionSpec::LinearCut { delta } => Ok(tune_linear_cut(*delta)?.0),
        }
    }

    fn validate(&self, base: &Path) -> Result<()> {
        match self {
            ReactionSpec::Cubic { a } => ensure!(*a >= 0.0, "cubic: a = {a} must be nonnegative"),
            ReactionSpec::Table { path } => {
                ensure!(base.join(path).is_file(), "table: {} not found", base.join(path).display())
            }
            ReactionSpec::LinearCut { delta } => {
                ensure!(*delta > 0.0 && *delta <= 0.25, "linear_cut: delta = {delta} outside (0, 0.25]")
            }
        }
        Ok(())
    }
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let (mut u, mut f) = (Vec::new(), Vec::new());
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        ensure!(rec.len() == 2, "row {} has {} columns, expected 2", i + 1, rec.len());
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                u.push(a);
                f.push(b);
            }
            _ if i == 0 => continue,
            _ => bail!("row {} is not numeric", i + 1),
        }
    }
    Ok((u, f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    SpeedTable {
        a: Vec<f64>,
    },
    DriftSweep {
        a: Vec<f64>,
        t_end: f64,
        #[serde(default = "default_dx")]
        dx: f64,
        #[serde(default = "default_dt")]
        dt: f64,
        window: [f64; 2],
        #[serde(default = "default_level")]
        level: f64,
        #[serde(default)]
        domain_half_width: Option<f64>,
    },
    ConstructionAudit {
        construction: AuditKind,
        #[serde(default)]
        r: Option<f64>,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        beta_fraction: Option<f64>,
        /// Fixed grid; when absent, `T` is searched and `[T, 10T]` is used.
        #[serde(default)]
        grid: Option<GridSpec>,
    },
    LemmaAudit {
        pairs: Vec<[f64; 2]>,
    },
    SpectralAudit {
        runs: Vec<SpectralRun>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum AuditKind {
    FastSub,
    FastSuper,
    SlowSuper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t0: f64,
    pub t1: f64,
    pub nt: usize,
    pub x_margin: f64,
    pub nx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralRun {
    pub bc: BcName,
    pub coeff: f64,
    #[serde(default = "default_tau_end")]
    pub tau_end: f64,
    #[serde(default = "default_l")]
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BcName {
    Neumann,
    Dirichlet,
}

impl From<BcName> for fronts::spectral::Boundary {
    fn from(b: BcName) -> Self {
        match b {
            BcName::Neumann => fronts::spectral::Boundary::Neumann,
            BcName::Dirichlet => fronts::spectral::Boundary::Dirichlet,
        }
    }
}

fn default_dx() -> f64 {
    0.05
}
fn default_dt() -> f64 {
    0.01
}
fn default_level() -> f64 {
    0.5
}
fn default_tau_end() -> f64 {
    8.0
}
fn default_l() -> f64 {
    6.0
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::SpeedTable { .. } => "speed_table",
            Task::DriftSweep { .. } => "drift_sweep",
            Task::ConstructionAudit { .. } => "construction_audit",
            Task::LemmaAudit { .. } => "lemma_audit",
            Task::SpectralAudit { .. } => "spectral_audit",
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("parsing experiment config")?;
        Ok(cfg)
    }

    /// Checks ranges and paths. `base` is the directory of the config file.
    pub fn validate(&self, base: &Path) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        if let Some(w) = self.workers {
            ensure!(w >= 1, "workers must be at least 1");
        }
        if let Some(r) = &self.reaction {
            r.validate(base)?;
        }
        let nonneg = |a: &[f64]| -> Result<()> {
            ensure!(!a.is_empty(), "the list of a values is empty");
            ensure!(a.iter().all(|&v| v >= 0.0 && v.is_finite()), "a values must be finite and nonnegative");
            Ok(())
        };
        match &self.task {
            Task::SpeedTable { a } => nonneg(a)?,
            Task::DriftSweep { a, t_end, dx, dt, window, level, domain_half_width } => {
                nonneg(a)?;
                ensure!(*t_end > 0.0 && *dx > 0.0 && *dt > 0.0, "t_end, dx and dt must be positive");
                ensure!(dt <= dx, "dt must not exceed dx");
                ensure!(*level > 0.0 && *level < 1.0, "level must lie in (0, 1)");
                ensure!(
                    window[0] >= 10.0 && window[1] >= 4.0 * window[0] && window[1] <= *t_end,
                    "window must satisfy 10 <= t0, 4 t0 <= t1 <= t_end"
                );
                if let Some(w) = domain_half_width {
                    ensure!(*w >= 50.0 + t_end.sqrt(), "domain_half_width must be at least 50 + sqrt(t_end)");
                }
            }
            Task::ConstructionAudit { construction, r, epsilon, beta_fraction, grid } => {
                ensure!(self.reaction.is_some(), "construction_audit needs a [reaction] table");
                match construction {
                    AuditKind::FastSub => {
                        ensure!(r.is_none_or(|r| r > 0.5 && r < 1.0), "fast_sub: r must lie in (1/2, 1)")
                    }
                    AuditKind::FastSuper => {
                        ensure!(r.is_none_or(|r| r > 0.25 && r < 0.5), "fast_super: r must lie in (1/4, 1/2)")
                    }
                    AuditKind::SlowSuper => {
                        ensure!(r.is_none(), "slow_super has r = 3/2 fixed");
                        ensure!(
                            epsilon.is_none_or(|e| e > 0.0 && e < 0.25),
                            "slow_super: epsilon must lie in (0, 1/4)"
                        );
                        ensure!(
                            beta_fraction.is_none_or(|b| b > 0.0 && b < 1.0),
                            "slow_super: beta_fraction must lie in (0, 1)"
                        );
                    }
                }
                if let Some(g) = grid {
                    ensure!(g.t0 > 1.0 && g.t1 >= g.t0, "grid: need 1 < t0 <= t1");
                    ensure!(g.nt >= 1 && g.nx >= 4 && g.x_margin >= 0.0, "grid: need nt >= 1, nx >= 4, x_margin >= 0");
                }
            }
            Task::LemmaAudit { pairs } => {
                ensure!(self.reaction.is_some(), "lemma_audit needs a [reaction] table");
                ensure!(!pairs.is_empty(), "lemma_audit: pairs is empty");
                for [e, h] in pairs {
                    ensure!(*e > 0.0 && *e < 1.0 && *h > 0.0 && *h < 1.0, "lemma_audit: need 0 < epsilon, eta < 1");
                }
            }
            Task::SpectralAudit { runs } => {
                ensure!(!runs.is_empty(), "spectral_audit: runs is empty");
                for r in runs {
                    ensure!(r.tau_end >= 8.0, "spectral_audit: tau_end must be at least 8");
                    ensure!(r.l > 0.0 && r.coeff.is_finite(), "spectral_audit: need l > 0 and a finite coeff");
                }
            }
        }
        Ok(())
    }
}
