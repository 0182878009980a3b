//! Long-time integration of `∂t u = ∂xx u + f(u)` on a window that follows
//! the front, level-set tracking and logarithmic drift fits.
//!
//! Diffusion is Crank–Nicolson with the compact fourth-order Laplacian
//! `A·u_xx ≈ δ²u/dx²`, `A = tridiag(1, 10, 1)/12`. The reaction is explicit
//! with a Heun predictor-corrector, so the step is second order overall. The
//! very first step is replaced by four backward-Euler quarter steps
//! (Rannacher start-up) to damp the high modes of step data.

use serde::{Deserialize, Serialize};

use crate::numerics::{fit_line, Tridiagonal};
use crate::reaction::Nonlinearity;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdeError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("level {level} has no crossing on the grid at t = {t}")]
    NoCrossing { level: f64, t: f64 },
    #[error("clamp of size {amount:.3e} at t = {t} exceeds 1e-10")]
    Clamp { amount: f64, t: f64 },
    #[error("drift fit is ill-conditioned: {0}")]
    IllConditioned(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImexCn,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dx: f64,
    pub dt: f64,
    pub domain_half_width: f64,
    /// Level used to decide when to shift the window.
    pub recenter_level: f64,
    /// Desired front position as a fraction of the half-width, measured from
    /// the window centre (negative puts the front left of centre).
    pub recenter_target: f64,
    /// Disable to keep the grid fixed in the lab frame.
    #[serde(default = "yes")]
    pub recenter: bool,
    pub t_end: f64,
    /// Trace sampling interval.
    pub output_every: f64,
    pub scheme: Scheme,
}

impl SolverConfig {
    /// Settings used for the drift experiments: the window reaches about
    /// 250 units ahead of the front, so the leading edge never feels the
    /// right boundary up to `t = 2000`.
    pub fn drift(t_end: f64) -> Self {
        SolverConfig {
            dx: 0.05,
            dt: 0.01,
            domain_half_width: 156.0,
            recenter_level: 0.5,
            recenter_target: -0.6,
            recenter: true,
            t_end,
            output_every: 1.0,
            scheme: Scheme::ImexCn,
        }
    }

    pub fn validate(&self) -> Result<(), PdeError> {
        let bad = |m: &str| Err(PdeError::Config(m.to_string()));
        if !(self.dx > 0.0 && self.dt > 0.0 && self.t_end > 0.0 && self.output_every > 0.0) {
            return bad("dx, dt, t_end and output_every must be positive");
        }
        if self.dt > self.dx {
            return bad("dt must not exceed dx");
        }
        if self.domain_half_width < 50.0 + self.t_end.sqrt() {
            return bad("domain_half_width must be at least 50 + sqrt(t_end)");
        }
        if !(self.recenter_level > 0.0 && self.recenter_level < 1.0) {
            return bad("recenter_level must lie in (0, 1)");
        }
        if !(self.recenter_target > -1.0 && self.recenter_target < 1.0) {
            return bad("recenter_target must lie in (-1, 1)");
        }
        Ok(())
    }

    fn n_nodes(&self) -> usize {
        (2.0 * self.domain_half_width / self.dx).round() as usize + 1
    }

    /// Lab coordinate of the first node when `x = 0` sits at the target.
    fn initial_offset(&self) -> f64 {
        let w = self.domain_half_width;
        let cells = (w * (1.0 + self.recenter_target) / self.dx).round();
        -cells * self.dx
    }
}

/// Grid values with their lab-frame placement. The two end values act as
/// Dirichlet data for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub x_offset: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl FieldState {
    pub fn x(&self, i: usize) -> f64 {
        self.x_offset + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    /// Samples `u0` on the grid of `cfg`, with `x = 0` at the target position.
    pub fn from_fn(cfg: &SolverConfig, u0: impl Fn(f64) -> f64) -> Self {
        let x_offset = cfg.initial_offset();
        let values = (0..cfg.n_nodes()).map(|i| u0(x_offset + i as f64 * cfg.dx)).collect();
        FieldState { t: 0.0, x_offset, dx: cfg.dx, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    /// `1` for `x ≤ 0`, `0` beyond.
    Step,
    /// `min(1, e^{−x})`, cut to `0` for `x ≥ x0`.
    FrontLike { x0: f64 },
}

pub fn make_initial_data(kind: InitialKind, cfg: &SolverConfig) -> FieldState {
    match kind {
        InitialKind::Step => FieldState::from_fn(cfg, |x| if x <= 0.0 { 1.0 } else { 0.0 }),
        InitialKind::FrontLike { x0 } => FieldState::from_fn(cfg, |x| if x >= x0 { 0.0 } else { (-x).exp().min(1.0) }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub level: f64,
    pub entries: Vec<(f64, f64)>,
}

/// Rightmost crossing of `u = level`, linearly interpolated, in lab frame.
pub fn track_level_set(state: &FieldState, level: f64) -> Result<f64, PdeError> {
    let u = &state.values;
    for i in (0..u.len() - 1).rev() {
        if u[i] >= level && u[i + 1] < level {
            let s = (u[i] - level) / (u[i] - u[i + 1]);
            return Ok(state.x(i) + s * state.dx);
        }
    }
    Err(PdeError::NoCrossing { level, t: state.t })
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub state: FieldState,
    pub traces: Vec<FrontTrace>,
    /// Largest correction applied by clamping to `[0, 1]`.
    pub max_clamp: f64,
    pub n_shifts: usize,
}

/// Time-stepper state; the two matrices are factored once.
struct Stepper {
    k: f64,
    dt: f64,
    cn: Tridiagonal,
    be: Tridiagonal,
    rhs: Vec<f64>,
    fu: Vec<f64>,
    pred: Vec<f64>,
}

const A_OFF: f64 = 1.0 / 12.0;
const A_DIAG: f64 = 10.0 / 12.0;

impl Stepper {
    fn new(n: usize, dx: f64, dt: f64) -> Self {
        let m = n - 2;
        let k = dt / (dx * dx);
        let cn = Tridiagonal::constant(m, A_OFF - 0.5 * k, A_DIAG + k, A_OFF - 0.5 * k);
        let q = 0.25 * k;
        let be = Tridiagonal::constant(m, A_OFF - q, A_DIAG + 2.0 * q, A_OFF - q);
        Stepper { k, dt, cn, be, rhs: vec![0.0; m], fu: vec![0.0; n], pred: vec![0.0; n] }
    }

    /// `rhs_i = A(u)_i + θk(δ²u)_i + h·A(g)_i` on interior nodes, with the
    /// boundary contributions of the implicit side moved over.
    fn assemble(&mut self, u: &[f64], g: &[f64], theta_k: f64, implicit_k: f64, h: f64) {
        let n = u.len();
        for i in 1..n - 1 {
            let au = A_OFF * (u[i - 1] + u[i + 1]) + A_DIAG * u[i];
            let d2 = u[i - 1] - 2.0 * u[i] + u[i + 1];
            let ag = A_OFF * (g[i - 1] + g[i + 1]) + A_DIAG * g[i];
            self.rhs[i - 1] = au + theta_k * d2 + h * ag;
        }
        let c_b = -(A_OFF - implicit_k);
        self.rhs[0] += c_b * u[0];
        self.rhs[n - 3] += c_b * u[n - 1];
    }

    fn eval_f(dst: &mut [f64], u: &[f64], f: &dyn Fn(f64) -> f64) {
        for (d, &v) in dst.iter_mut().zip(u) {
            *d = f(v);
        }
    }

    /// One Crank–Nicolson/Heun step in place.
    fn step(&mut self, u: &mut [f64], f: &dyn Fn(f64) -> f64) {
        let n = u.len();
        let (k, dt) = (self.k, self.dt);
        Self::eval_f(&mut self.fu, u, f);
        let fu = std::mem::take(&mut self.fu);
        self.assemble(u, &fu, 0.5 * k, 0.5 * k, dt);
        self.cn.solve_in_place(&mut self.rhs);
        self.pred[0] = u[0];
        self.pred[n - 1] = u[n - 1];
        self.pred[1..n - 1].copy_from_slice(&self.rhs);
        let mut fbar = std::mem::take(&mut self.pred);
        for (fb, &f0) in fbar.iter_mut().zip(&fu) {
            *fb = 0.5 * (f(*fb) + f0);
        }
        self.assemble(u, &fbar, 0.5 * k, 0.5 * k, dt);
        self.cn.solve_in_place(&mut self.rhs);
        u[1..n - 1].copy_from_slice(&self.rhs);
        self.fu = fu;
        self.pred = fbar;
    }

    /// Four IMEX backward-Euler quarter steps.
    fn startup(&mut self, u: &mut [f64], f: &dyn Fn(f64) -> f64) {
        let n = u.len();
        let q = 0.25 * self.k;
        for _ in 0..4 {
            Self::eval_f(&mut self.fu, u, f);
            let fu = std::mem::take(&mut self.fu);
            self.assemble(u, &fu, 0.0, q, 0.25 * self.dt);
            self.be.solve_in_place(&mut self.rhs);
            u[1..n - 1].copy_from_slice(&self.rhs);
            self.fu = fu;
        }
    }
}

const CLAMP_LIMIT: f64 = 1e-10;

fn clamp_unit(u: &mut [f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for v in u.iter_mut() {
        if *v < 0.0 {
            worst = worst.max(-*v);
            *v = 0.0;
        } else if *v > 1.0 {
            worst = worst.max(*v - 1.0);
            *v = 1.0;
        }
    }
    worst
}

/// Moves the window right by whole cells so the recentering level sits at
/// the target position.
fn recenter(state: &mut FieldState, cfg: &SolverConfig) -> Result<usize, PdeError> {
    let pos = track_level_set(state, cfg.recenter_level)?;
    let centre = state.x_offset + cfg.domain_half_width;
    let target = centre + cfg.recenter_target * cfg.domain_half_width;
    if pos <= target + state.dx {
        return Ok(0);
    }
    let s = ((pos - target) / state.dx).floor() as usize;
    let n = state.values.len();
    let (left, right) = (state.values[0], state.values[n - 1]);
    state.values.copy_within(s.., 0);
    for v in &mut state.values[n - s..] {
        *v = right;
    }
    state.values[0] = left;
    state.x_offset += s as f64 * state.dx;
    Ok(s)
}

/// Runs to `cfg.t_end`, recording each level every `output_every` time units.
pub fn simulate(f: &Nonlinearity, u0: FieldState, cfg: &SolverConfig, levels: &[f64]) -> Result<SimOutcome, PdeError> {
    simulate_with(&|u| f.eval(u), u0, cfg, levels, |_| {})
}

/// General driver: any reaction closure, and an observer called on the
/// field at every output time (including `t = 0`).
pub fn simulate_with(
    reaction: &dyn Fn(f64) -> f64,
    mut state: FieldState,
    cfg: &SolverConfig,
    levels: &[f64],
    mut observe: impl FnMut(&FieldState),
) -> Result<SimOutcome, PdeError> {
    cfg.validate()?;
    if levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(PdeError::Config("levels must lie in (0, 1)".into()));
    }
    if state.values.len() < 5 || (state.dx - cfg.dx).abs() > 1e-12 * cfg.dx {
        return Err(PdeError::Config("initial field does not match the grid spacing".into()));
    }
    let n_steps = (cfg.t_end / cfg.dt).round() as usize;
    let out_stride = ((cfg.output_every / cfg.dt).round() as usize).max(1);
    let recenter_stride = ((0.5 / cfg.dt).round() as usize).clamp(1, out_stride);
    let t0 = state.t;
    let mut stepper = Stepper::new(state.values.len(), cfg.dx, cfg.dt);
    let mut traces: Vec<FrontTrace> = levels.iter().map(|&level| FrontTrace { level, entries: vec![] }).collect();
    let mut max_clamp: f64 = 0.0;
    let mut n_shifts = 0;

    let record = |state: &FieldState, traces: &mut Vec<FrontTrace>| -> Result<(), PdeError> {
        for tr in traces.iter_mut() {
            let x = track_level_set(state, tr.level)?;
            tr.entries.push((state.t, x));
        }
        Ok(())
    };
    record(&state, &mut traces)?;
    observe(&state);

    for step in 1..=n_steps {
        if step == 1 {
            stepper.startup(&mut state.values, reaction);
        } else {
            stepper.step(&mut state.values, reaction);
        }
        state.t = t0 + step as f64 * cfg.dt;
        let c = clamp_unit(&mut state.values);
        if c > CLAMP_LIMIT {
            return Err(PdeError::Clamp { amount: c, t: state.t });
        }
        max_clamp = max_clamp.max(c);
        if cfg.recenter && step % recenter_stride == 0 {
            n_shifts += recenter(&mut state, cfg)?;
        }
        if step % out_stride == 0 {
            record(&state, &mut traces)?;
            observe(&state);
        }
    }
    Ok(SimOutcome { state, traces, max_clamp, n_shifts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub r: f64,
    #[serde(rename = "X")]
    pub x: f64,
    pub residual_rms: f64,
    pub window: [f64; 2],
    pub n_samples: usize,
    /// Refit on `[√(t_lo·t_hi), t_hi]`.
    pub r_halfwindow: f64,
}

/// Least squares of `m(t) = c*·t − x(t)` against `r·ln t + X`.
pub fn fit_drift(trace: &FrontTrace, c_star: f64, window: [f64; 2]) -> Result<DriftFit, PdeError> {
    let [t_lo, t_hi] = window;
    if t_lo < 10.0 {
        return Err(PdeError::IllConditioned("window must start at t ≥ 10".into()));
    }
    if t_hi < 4.0 * t_lo {
        return Err(PdeError::IllConditioned("window spans less than a factor 4 in t".into()));
    }
    let fit_on = |a: f64, b: f64| -> Result<(crate::numerics::LineFit, usize), PdeError> {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            trace.entries.iter().filter(|(t, _)| *t >= a && *t <= b).map(|&(t, x)| (t.ln(), c_star * t - x)).unzip();
        if xs.len() < 50 {
            return Err(PdeError::IllConditioned(format!("only {} samples in [{a}, {b}]", xs.len())));
        }
        Ok((fit_line(&xs, &ys), xs.len()))
    };
    let (full, n) = fit_on(t_lo, t_hi)?;
    let (half, _) = fit_on((t_lo * t_hi).sqrt(), t_hi)?;
    Ok(DriftFit {
        r: full.slope,
        x: full.intercept,
        residual_rms: full.rms,
        window,
        n_samples: n,
        r_halfwindow: half.slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(t_end: f64) -> SolverConfig {
        SolverConfig { domain_half_width: 60.0, t_end, ..SolverConfig::drift(t_end) }
    }

    #[test]
    fn step_data_definition() {
        let cfg = small_cfg(1.0);
        let s = make_initial_data(InitialKind::Step, &cfg);
        let at = |x: f64| s.values[((x - s.x_offset) / s.dx).round() as usize];
        assert_eq!(at(-10.0), 1.0);
        assert_eq!(at(10.0), 0.0);
        let g = make_initial_data(InitialKind::FrontLike { x0: 20.0 }, &cfg);
        let i = ((10.0 - g.x_offset) / g.dx).round() as usize;
        assert!((g.values[i] - (-g.x(i)).exp()).abs() < 1e-18);
    }

    #[test]
    fn level_of_step_is_cell_midpoint() {
        let s = FieldState { t: 0.0, x_offset: 0.0, dx: 0.1, values: vec![1.0, 1.0, 0.0, 0.0] };
        assert!((track_level_set(&s, 0.5).unwrap() - 0.15).abs() < 1e-15);
        let z = FieldState { values: vec![0.0; 4], ..s };
        assert!(track_level_set(&z, 0.5).is_err());
    }

    #[test]
    fn heat_kernel_with_zero_reaction() {
        let cfg = SolverConfig { dt: 0.005, t_end: 1.0, ..small_cfg(1.0) };
        // Gaussian started at t = 1 in heat-kernel time.
        let g = |x: f64, s: f64| (-(x - 20.0) * (x - 20.0) / (4.0 * s)).exp() / s.sqrt();
        let u0 = FieldState::from_fn(&cfg, |x| g(x, 1.0));
        let mut last = None;
        simulate_with(&|_| 0.0, u0, &SolverConfig { recenter: false, ..cfg }, &[0.1], |s| last = Some(s.clone()))
            .unwrap();
        let s = last.unwrap();
        let err = (0..s.values.len()).map(|i| (s.values[i] - g(s.x(i), 2.0)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "max error {err}");
    }

    #[test]
    fn synthetic_trace_recovers_model() {
        let entries = (10..=2000).map(|t| (t as f64, 2.0 * t as f64 - 1.5 * (t as f64).ln() - 3.0)).collect();
        let tr = FrontTrace { level: 0.5, entries };
        let fit = fit_drift(&tr, 2.0, [100.0, 2000.0]).unwrap();
        assert!((fit.r - 1.5).abs() < 1e-10 && (fit.x - 3.0).abs() < 1e-9);
        assert!((fit.r_halfwindow - 1.5).abs() < 1e-10);
        assert!(fit_drift(&tr, 2.0, [100.0, 300.0]).is_err());
    }

    #[test]
    fn config_guards() {
        assert!(SolverConfig { dt: 0.1, ..small_cfg(1.0) }.validate().is_err());
        assert!(SolverConfig { domain_half_width: 20.0, ..small_cfg(1.0) }.validate().is_err());
        assert!(SolverConfig::drift(2000.0).validate().is_ok());
    }
}
