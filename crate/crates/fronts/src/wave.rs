//! Traveling waves `U'' + cU' + f(U) = 0` by shooting from the unstable
//! manifold of `(1, 0)`, minimal speed by bisection, and tail asymptotics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::numerics::{brent, fit_line};
use crate::ode::{integrate, OdeError, Options, Trajectory};
use crate::reaction::Nonlinearity;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaveError {
    #[error("speed {c} is below the linear speed {c_lin}")]
    SpeedTooLow { c: f64, c_lin: f64 },
    #[error("orbit turned (U' ≥ 0) at U = {u_turn:.3e}: no monotone wave at c = {c}")]
    NotMonotone { c: f64, u_turn: f64 },
    #[error("orbit overshoots U = 0 (slow-mode coefficient negative): no monotone wave at c = {c}")]
    Overshoot { c: f64 },
    #[error("orbit did not reach U = {u_stop:e} within z-span {span}")]
    SpanExhausted { u_stop: f64, span: f64 },
    #[error("minimal speed not bracketed below {cap}")]
    NoBracket { cap: f64 },
    #[error("decay fit requires the pulled minimal speed; got c = {c}")]
    NotPulled { c: f64 },
    #[error("fit window spans only {0:.2} e-foldings")]
    ShortWindow(f64),
    #[error("left exponent {fitted} differs from {expected} by more than 5%")]
    LeftExponent { fitted: f64, expected: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy)]
pub struct WaveOptions {
    /// Launch distance from `(1, 0)` along the unstable eigenvector.
    pub eps0: f64,
    pub rtol: f64,
    /// Integration stops successfully once `U` drops below this.
    pub u_stop: f64,
    /// Maximum integration length in `z`.
    pub span: f64,
}

impl Default for WaveOptions {
    fn default() -> Self {
        WaveOptions { eps0: 1e-8, rtol: 1e-12, u_stop: 1e-10, span: 2000.0 }
    }
}

impl WaveOptions {
    /// Deep-tail settings used when the profile feeds the constructions.
    pub fn deep_tail() -> Self {
        WaveOptions { u_stop: 1e-14, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSample {
    pub z: f64,
    pub u: f64,
    pub du: f64,
}

/// Linear continuation past the last integrated point: `U` solves
/// `U'' + cU' + f'(0)U = 0` there.
#[derive(Debug, Clone, Copy)]
enum Tail {
    Double { mu: f64, a: f64, b: f64 },
    Distinct { mu1: f64, mu2: f64, a1: f64, a2: f64 },
}

impl Tail {
    fn new(c: f64, f0: f64, u: f64, v: f64) -> Self {
        let disc = c * c - 4.0 * f0;
        if disc.abs() <= 1e-12 * c * c {
            let mu = -0.5 * c;
            Tail::Double { mu, a: u, b: v - mu * u }
        } else {
            let sq = disc.max(0.0).sqrt();
            let mu1 = 0.5 * (-c + sq);
            let mu2 = 0.5 * (-c - sq);
            let a2 = (v - mu1 * u) / (mu2 - mu1);
            Tail::Distinct { mu1, mu2, a1: u - a2, a2 }
        }
    }

    fn eval(&self, d: f64) -> [f64; 2] {
        match *self {
            Tail::Double { mu, a, b } => {
                let e = (mu * d).exp();
                [(a + b * d) * e, (b + mu * (a + b * d)) * e]
            }
            Tail::Distinct { mu1, mu2, a1, a2 } => {
                let (e1, e2) = ((mu1 * d).exp(), (mu2 * d).exp());
                [a1 * e1 + a2 * e2, a1 * mu1 * e1 + a2 * mu2 * e2]
            }
        }
    }
}

/// A heteroclinic profile with dense evaluation on all of ℝ.
///
/// Internally the orbit is parametrized by `s ≥ 0` from the launch point;
/// the public coordinate is `z = s − offset`. The default offset puts
/// `U(0) = 1/2`.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub speed: f64,
    traj: Arc<Trajectory<2>>,
    offset: f64,
    eps0: f64,
    lambda_left: f64,
    f: Nonlinearity,
    tail: Tail,
}

impl WaveProfile {
    /// `[U, U']` at `z`.
    pub fn eval(&self, z: f64) -> [f64; 2] {
        let s = z + self.offset;
        if s < 0.0 {
            let e = self.eps0 * (self.lambda_left * s).exp();
            return [1.0 - e, -self.lambda_left * e];
        }
        let s_end = self.traj.t_end();
        if s > s_end {
            return self.tail.eval(s - s_end);
        }
        self.traj.eval(s)
    }

    pub fn u(&self, z: f64) -> f64 {
        self.eval(z)[0]
    }

    pub fn du(&self, z: f64) -> f64 {
        self.eval(z)[1]
    }

    /// `U'' = −cU' − f(U)`.
    pub fn d2u(&self, z: f64) -> f64 {
        let [u, v] = self.eval(z);
        self.d2u_from(u, v)
    }

    pub fn d2u_from(&self, u: f64, v: f64) -> f64 {
        -self.speed * v - self.f.eval(u)
    }

    /// `U'''` from differentiating the profile ODE.
    pub fn d3u(&self, z: f64) -> f64 {
        let [u, v] = self.eval(z);
        let w = self.d2u_from(u, v);
        -self.speed * w - self.f.deriv(u) * v
    }

    /// Integrated domain in the current coordinate.
    pub fn domain(&self) -> [f64; 2] {
        [-self.offset, self.traj.t_end() - self.offset]
    }

    /// Step nodes of the integration, in the current coordinate.
    pub fn samples(&self) -> Vec<WaveSample> {
        self.traj.nodes().into_iter().map(|(s, y)| WaveSample { z: s - self.offset, u: y[0], du: y[1] }).collect()
    }

    pub fn sample_uniform(&self, z0: f64, z1: f64, n: usize) -> Vec<WaveSample> {
        (0..n)
            .map(|i| {
                let z = z0 + (z1 - z0) * i as f64 / (n.max(2) - 1) as f64;
                let [u, du] = self.eval(z);
                WaveSample { z, u, du }
            })
            .collect()
    }

    /// The same orbit re-parametrized so that the new profile is `U(z + d)`.
    pub fn shifted(&self, d: f64) -> WaveProfile {
        let mut p = self.clone();
        p.offset += d;
        p
    }

    /// Position where `U = level`, for `level ∈ (u_stop, 1 − eps0)`.
    pub fn position_of(&self, level: f64) -> Option<f64> {
        let [z0, z1] = self.domain();
        // U is monotone on the integrated orbit: bracket on step nodes.
        let nodes = self.traj.nodes();
        let k = nodes.partition_point(|(_, y)| y[0] > level);
        if k == 0 || k >= nodes.len() {
            return None;
        }
        let (sa, sb) = (nodes[k - 1].0, nodes[k].0);
        let s = brent(|s| self.traj.eval(s)[0] - level, sa, sb, 1e-14)?;
        let z = s - self.offset;
        (z >= z0 && z <= z1).then_some(z)
    }

    /// `(A, B)` of `U ≈ (Bz + A)e^{−√f'(0)z}` read off the linear tail; only
    /// defined at the pulled speed `c = 2√f'(0)`.
    pub fn tail_coefficients(&self) -> Option<(f64, f64)> {
        match self.tail {
            Tail::Double { mu, a, b } => {
                // U = (a + b(s − s_e))e^{μ(s − s_e)}, with s = z + offset.
                let s_e = self.traj.t_end() - self.offset;
                let scale = (-mu * s_e).exp();
                Some(((a - b * s_e) * scale, b * scale))
            }
            Tail::Distinct { .. } => None,
        }
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.f
    }
}

/// Shoots the heteroclinic orbit at speed `c` and normalizes `U(0) = 1/2`.
pub fn solve_profile(f: &Nonlinearity, c: f64, opts: &WaveOptions) -> Result<WaveProfile, WaveError> {
    let c_lin = f.linear_speed();
    if c < c_lin * (1.0 - 1e-12) {
        return Err(WaveError::SpeedTooLow { c, c_lin });
    }
    let traj = shoot(f, c, opts)?;
    let half = {
        let nodes = traj.nodes();
        let k = nodes.partition_point(|(_, y)| y[0] > 0.5);
        let (sa, sb) = (nodes[k - 1].0, nodes[k].0);
        brent(|s| traj.eval(s)[0] - 0.5, sa, sb, 1e-14).expect("U crosses 1/2")
    };
    let y_end = traj.y_end();
    let lambda_left = 0.5 * (-c + (c * c - 4.0 * f.slope_at_one).sqrt());
    Ok(WaveProfile {
        speed: c,
        tail: Tail::new(c, f.slope_at_zero, y_end[0], y_end[1]),
        traj: Arc::new(traj),
        offset: half,
        eps0: opts.eps0,
        lambda_left,
        f: f.clone(),
    })
}

fn shoot(f: &Nonlinearity, c: f64, opts: &WaveOptions) -> Result<Trajectory<2>, WaveError> {
    let lam = 0.5 * (-c + (c * c - 4.0 * f.slope_at_one).sqrt());
    let y0 = [1.0 - opts.eps0, -lam * opts.eps0];
    let u_stop = opts.u_stop;
    let g_low = move |_: f64, y: &[f64; 2]| y[0] - u_stop;
    let g_turn = |_: f64, y: &[f64; 2]| -y[1];
    let rhs = |_: f64, y: &[f64; 2]| [y[1], -c * y[1] - f.eval(y[0])];
    let ode = Options::tol(opts.rtol, 0.0);
    let traj = integrate(rhs, 0.0, y0, opts.span, &ode, &[&g_low, &g_turn])?;
    match traj.event {
        Some(hit) if hit.index == 0 => {
            // Near the origin U = αe^{μ_s z} + βe^{μ_f z}; the orbit stays
            // positive iff α ≥ 0, i.e. V ≥ μ_f U.
            let disc = (c * c - 4.0 * f.slope_at_zero).max(0.0);
            let mu_fast = 0.5 * (-c - disc.sqrt());
            let [u, v] = hit.y;
            if v - mu_fast * u >= -1e-6 * u {
                Ok(traj)
            } else {
                Err(WaveError::Overshoot { c })
            }
        }
        Some(hit) => Err(WaveError::NotMonotone { c, u_turn: hit.y[0] }),
        None => Err(WaveError::SpanExhausted { u_stop, span: opts.span }),
    }
}

/// Whether a monotone front exists at speed `c` (shooting feasibility).
pub fn is_feasible(f: &Nonlinearity, c: f64, opts: &WaveOptions) -> bool {
    shoot(f, c, opts).is_ok()
}

/// Smallest feasible speed, by bisection above `2√f'(0)`.
pub fn minimal_speed(f: &Nonlinearity, tol: f64) -> Result<f64, WaveError> {
    let opts = WaveOptions::default();
    let c_lo = f.linear_speed();
    let span_for = |c: f64| WaveOptions { span: 60.0 * c + 400.0, ..opts };
    if is_feasible(f, c_lo, &span_for(c_lo)) {
        return Ok(c_lo);
    }
    let cap = 1e3;
    let mut lo = c_lo;
    let mut hi = c_lo * 1.25;
    while !is_feasible(f, hi, &span_for(hi)) {
        lo = hi;
        hi *= 1.5;
        if hi > cap {
            return Err(WaveError::NoBracket { cap });
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if is_feasible(f, mid, &span_for(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Pushed,
    PulledSlow,
    PulledFast,
}

/// Fitted tail `(Bz + A)e^{−√f'(0)z}` and the resulting classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayAsymptotics {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub fit_window: Option<[f64; 2]>,
    pub residual: Option<f64>,
    /// `B` from the right half of the window.
    pub b_half: Option<f64>,
    /// Set when the half-window refit disagrees with the full fit.
    pub b_unstable: bool,
    pub regime: Regime,
    pub c_star: f64,
}

pub const TOL_B: f64 = 1e-3;
pub const TOL_SPEED: f64 = 1e-6;

fn fit_tail(p: &WaveProfile, z0: f64, z1: f64, k: f64) -> (f64, f64, f64) {
    let n = 2000;
    let zs: Vec<f64> = (0..n).map(|i| z0 + (z1 - z0) * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = zs.iter().map(|&z| p.u(z) * (k * z).exp()).collect();
    let fit = fit_line(&zs, &ys);
    (fit.intercept, fit.slope, fit.max_abs)
}

/// Least-squares tail fit over the window where `U ∈ [1e-8, 1e-3]`.
pub fn extract_decay(profile: &WaveProfile, f: &Nonlinearity) -> Result<DecayAsymptotics, WaveError> {
    let c_lin = f.linear_speed();
    if (profile.speed - c_lin).abs() > TOL_SPEED {
        return Err(WaveError::NotPulled { c: profile.speed });
    }
    let k = f.slope_at_zero.sqrt();
    let z_lo = profile.position_of(1e-3).ok_or(WaveError::ShortWindow(0.0))?;
    let z_hi = profile.position_of(1e-8).ok_or(WaveError::ShortWindow(0.0))?;
    let efolds = k * (z_hi - z_lo);
    if efolds < 5.0 {
        return Err(WaveError::ShortWindow(efolds));
    }
    let (a, b, residual) = fit_tail(profile, z_lo, z_hi, k);
    let (_, b_half, _) = fit_tail(profile, 0.5 * (z_lo + z_hi), z_hi, k);
    let fast_full = b.abs() <= TOL_B;
    let fast_half = b_half.abs() <= TOL_B;
    let b_unstable =
        fast_full != fast_half || (!fast_full && (b.abs() - b_half.abs()).abs() > 0.2 * b.abs().max(b_half.abs()));
    let regime = if fast_full { Regime::PulledFast } else { Regime::PulledSlow };
    Ok(DecayAsymptotics {
        a: Some(a),
        b: Some(b),
        fit_window: Some([z_lo, z_hi]),
        residual: Some(residual),
        b_half: Some(b_half),
        b_unstable,
        regime,
        c_star: profile.speed,
    })
}

/// Minimal speed, then the tail fit when the front is pulled.
pub fn classify(f: &Nonlinearity) -> Result<DecayAsymptotics, WaveError> {
    let c = minimal_speed(f, 1e-9)?;
    if c > f.linear_speed() + TOL_SPEED {
        return Ok(DecayAsymptotics {
            a: None,
            b: None,
            fit_window: None,
            residual: None,
            b_half: None,
            b_unstable: false,
            regime: Regime::Pushed,
            c_star: c,
        });
    }
    let p = solve_profile(f, c, &WaveOptions::default())?;
    extract_decay(&p, f)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LeftDecay {
    pub nu: f64,
    pub expected: f64,
    pub window: [f64; 2],
}

/// Fits `ln(1 − U) ≈ const + νz` where `1 − U ∈ [1e-7, 1e-3]`.
pub fn left_decay_exponent(profile: &WaveProfile, f: &Nonlinearity) -> Result<LeftDecay, WaveError> {
    let z_lo = profile.position_of(1.0 - 1e-7).ok_or(WaveError::ShortWindow(0.0))?;
    let z_hi = profile.position_of(1.0 - 1e-3).ok_or(WaveError::ShortWindow(0.0))?;
    let n = 500;
    let zs: Vec<f64> = (0..n).map(|i| z_lo + (z_hi - z_lo) * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = zs.iter().map(|&z| (1.0 - profile.u(z)).ln()).collect();
    let nu = fit_line(&zs, &ys).slope;
    if nu * (z_hi - z_lo) < 3.0 {
        return Err(WaveError::ShortWindow(nu * (z_hi - z_lo)));
    }
    let c = profile.speed;
    let expected = 0.5 * (-c + (c * c - 4.0 * f.slope_at_one).sqrt());
    if ((nu - expected) / expected).abs() >= 0.05 {
        return Err(WaveError::LeftExponent { fitted: nu, expected });
    }
    Ok(LeftDecay { nu, expected, window: [z_lo, z_hi] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_cubic_profile_is_closed_form() {
        let f = Nonlinearity::cubic(2.0).unwrap();
        let p = solve_profile(&f, 2.0, &WaveOptions::default()).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..=3000 {
            let z = -15.0 + 0.01 * i as f64;
            err = err.max((p.u(z) - 1.0 / (1.0 + z.exp())).abs());
        }
        assert!(err < 1e-6, "sup error {err}");
        assert!((p.du(0.0) + 0.25).abs() < 1e-7);
    }

    #[test]
    fn tail_continuation_matches_exponential() {
        let f = Nonlinearity::cubic(2.0).unwrap();
        let p = solve_profile(&f, 2.0, &WaveOptions::deep_tail()).unwrap();
        let (a, b) = p.tail_coefficients().unwrap();
        assert!((a - 1.0).abs() < 1e-6, "A = {a}");
        assert!(b.abs() < 1e-6, "B = {b}");
        let z = 40.0;
        assert!((p.u(z) / (-z).exp() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn infeasible_below_pushed_speed() {
        let f = Nonlinearity::cubic(8.0).unwrap();
        assert!(!is_feasible(&f, 2.3, &WaveOptions::default()));
        assert!(is_feasible(&f, 2.6, &WaveOptions::default()));
    }

    #[test]
    fn speed_below_linear_rejected() {
        let f = Nonlinearity::cubic(0.0).unwrap();
        assert!(matches!(solve_profile(&f, 1.5, &WaveOptions::default()), Err(WaveError::SpeedTooLow { .. })));
    }
}
