//! Profiles of `U'' + (2 − ε)U' + f(U) = 0` started from wave data, the
//! perturbation bound against the true wave, and the first zero `Z₀`.
//!
//! The slowed family `U_r(·; t)` (deficit `ε = 2r/t`) used by the fast
//! supersolution lives here as [`SlowedFamily`], together with its
//! `t`-sensitivity, which the residual checks need for `∂t U_r`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::numerics::brent;
use crate::ode::{integrate, OdeError, Options, Trajectory};
use crate::reaction::Nonlinearity;
use crate::wave::{solve_profile, WaveError, WaveOptions, WaveProfile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PerturbError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("|U| exceeded 2 at z = {z}")]
    BlowUp { z: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

const RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PerturbedProfile {
    pub epsilon: f64,
    traj: Arc<Trajectory<2>>,
    pub first_zero: Option<f64>,
}

impl PerturbedProfile {
    /// `[U_ε, U_ε']` at `z` (clamped to the integrated range).
    pub fn eval(&self, z: f64) -> [f64; 2] {
        self.traj.eval(z)
    }

    pub fn z_max(&self) -> f64 {
        self.traj.t_end()
    }

    pub fn samples(&self) -> Vec<(f64, [f64; 2])> {
        self.traj.nodes()
    }
}

/// Integrates on `[0, z_max]`. Without `past_zero` the run stops at the
/// first zero of `U_ε`.
pub fn solve_perturbed(
    f: &Nonlinearity,
    epsilon: f64,
    u0: f64,
    du0: f64,
    z_max: f64,
    past_zero: bool,
) -> Result<PerturbedProfile, PerturbError> {
    if !(0.0..2.0).contains(&epsilon) {
        return Err(PerturbError::Input(format!("epsilon {epsilon} outside [0, 2)")));
    }
    if !(u0 > 0.0 && u0 < 1.0 && du0 < 0.0) {
        return Err(PerturbError::Input("need u0 in (0, 1) and du0 < 0".into()));
    }
    let c = 2.0 - epsilon;
    let rhs = |_: f64, y: &[f64; 2]| [y[1], -c * y[1] - f.eval(y[0])];
    let g_zero = |_: f64, y: &[f64; 2]| y[0];
    let g_blow = |_: f64, y: &[f64; 2]| 2.0 - y[0].abs();
    let opts = Options::tol(RTOL, 1e-300);
    let first = integrate(rhs, 0.0, [u0, du0], z_max, &opts, &[&g_zero, &g_blow])?;
    let (traj, first_zero) = match first.event {
        Some(hit) if hit.index == 1 => return Err(PerturbError::BlowUp { z: hit.t }),
        Some(hit) if past_zero => {
            let full = integrate(rhs, 0.0, [u0, du0], z_max, &opts, &[&g_blow])?;
            if let Some(b) = full.event {
                return Err(PerturbError::BlowUp { z: b.t });
            }
            (full, Some(hit.t))
        }
        Some(hit) => (first, Some(hit.t)),
        None => (first, None),
    };
    Ok(PerturbedProfile { epsilon, traj: Arc::new(traj), first_zero })
}

/// Largest `δ ≤ 1/4` (on a 1e-4 grid) with `f' ≤ f'(1)/2` on `[1 − 2δ, 1]`.
pub fn select_delta(f: &Nonlinearity) -> f64 {
    let half = 0.5 * f.slope_at_one;
    let ok = |d: f64| (0..=400).all(|i| f.deriv(1.0 - 2.0 * d * i as f64 / 400.0) <= half);
    let mut best = 0.0;
    for k in 1..=2500 {
        let d = k as f64 * 1e-4;
        if ok(d) {
            best = d;
        } else {
            break;
        }
    }
    best
}

/// The pulled minimal wave with `U(0) = level`.
pub fn wave_at_level(f: &Nonlinearity, level: f64) -> Result<WaveProfile, PerturbError> {
    if (f.slope_at_zero - 1.0).abs() > 1e-12 {
        return Err(PerturbError::Input("nonlinearity must be normalized to f'(0) = 1".into()));
    }
    let w = solve_profile(f, 2.0, &WaveOptions::deep_tail())?;
    let z = w.position_of(level).ok_or_else(|| PerturbError::Input(format!("level {level} not on the wave")))?;
    Ok(w.shifted(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon: f64,
    pub eta: f64,
    /// Offset added to `U_ε(0)` relative to the wave data.
    pub data_offset: f64,
    pub z_cap: f64,
    pub max_ratio: f64,
    pub argmax_z: f64,
    pub max_dev_u: f64,
    pub max_dev_du: f64,
    pub verdict: Verdict,
}

/// Above this deficit a violated bound is reported as inconclusive: the
/// statement only claims it for `ε` below an unspecified threshold.
const EPS_TRUSTED: f64 = 0.05;

/// Compares `U_ε` and the wave `U` (both started from the wave data at the
/// `1 − δ` level) on `[0, z_cap]`, `z_cap = 0.9·|ln ε|/(1 − η)`.
pub fn verify_perturbation_bound(f: &Nonlinearity, epsilon: f64, eta: f64) -> Result<BoundReport, PerturbError> {
    verify_perturbation_bound_with(f, epsilon, eta, 0.0)
}

pub fn verify_perturbation_bound_with(
    f: &Nonlinearity,
    epsilon: f64,
    eta: f64,
    data_offset: f64,
) -> Result<BoundReport, PerturbError> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(PerturbError::Input("eta must lie in (0, 1/2)".into()));
    }
    let delta = select_delta(f);
    verify_perturbation_bound_from(f, epsilon, eta, data_offset, 1.0 - delta)
}

/// Same check with the common starting point placed at `U(0) = level`.
pub fn verify_perturbation_bound_from(
    f: &Nonlinearity,
    epsilon: f64,
    eta: f64,
    data_offset: f64,
    level: f64,
) -> Result<BoundReport, PerturbError> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(PerturbError::Input("eta must lie in (0, 1/2)".into()));
    }
    let wave = wave_at_level(f, level)?;
    let z_cap = if epsilon > 0.0 { 0.9 * -epsilon.ln() / (1.0 - eta) } else { 20.0 };
    let [u0, du0] = wave.eval(0.0);
    let pert = solve_perturbed(f, epsilon, u0 + data_offset, du0, z_cap.max(1e-3), true)?;
    let n = 4000;
    let (mut max_ratio, mut argmax_z, mut max_dev_u, mut max_dev_du) = (0.0f64, 0.0, 0.0f64, 0.0f64);
    for i in 0..=n {
        let z = z_cap * i as f64 / n as f64;
        let [u, du] = wave.eval(z);
        let [v, dv] = pert.eval(z);
        let (eu, edu) = ((u - v).abs(), (du - dv).abs());
        max_dev_u = max_dev_u.max(eu);
        max_dev_du = max_dev_du.max(edu);
        let bound = (epsilon * (-z).exp()).powf(1.0 - eta);
        let ratio = if bound > 0.0 {
            eu.max(edu) / bound
        } else if eu.max(edu) == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax_z = z;
        }
    }
    let verdict = if max_ratio <= 1.0 {
        Verdict::Pass
    } else if epsilon > EPS_TRUSTED {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    };
    Ok(BoundReport { epsilon, eta, data_offset, z_cap, max_ratio, argmax_z, max_dev_u, max_dev_du, verdict })
}

/// `U_r(·; t)` solving `U'' + (2 − 2r/t)U' + f(U) = 0` with
/// `U(0) = 1 − δ`, `U'(0) = U_*'(−Z_δ(t))`, where `U_*(−Z_δ(t)) = 1 − δ − γ/t`.
#[derive(Debug, Clone)]
pub struct SlowedFamily {
    pub wave: WaveProfile,
    pub r: f64,
    pub delta: f64,
    pub gamma: f64,
    pub z_delta_inf: f64,
}

/// One member of the family with its `t`-derivative `S = ∂t U_r`.
#[derive(Debug, Clone)]
pub struct SlowedProfile {
    pub t: f64,
    traj: Arc<Trajectory<4>>,
    pub first_zero: Option<f64>,
}

impl SlowedProfile {
    /// `[U_r, ∂z U_r, ∂t U_r, ∂t ∂z U_r]`.
    pub fn eval(&self, z: f64) -> [f64; 4] {
        self.traj.eval(z)
    }

    pub fn z_max(&self) -> f64 {
        self.traj.t_end()
    }
}

impl SlowedFamily {
    /// Default `γ = 2·sup|U_*'|·(max(r, 3/2) + 1)/(−f'(1)/4)`.
    pub fn new(wave: WaveProfile, r: f64) -> Result<Self, PerturbError> {
        let f = wave.nonlinearity().clone();
        let sup_du = wave.sample_uniform(-40.0, 40.0, 8001).iter().map(|s| s.du.abs()).fold(0.0, f64::max);
        let gamma = 2.0 * sup_du * (r.max(1.5) + 1.0) / (-f.slope_at_one / 4.0);
        Self::with_gamma(wave, r, gamma)
    }

    pub fn with_gamma(wave: WaveProfile, r: f64, gamma: f64) -> Result<Self, PerturbError> {
        let f = wave.nonlinearity();
        let delta = select_delta(f);
        if delta <= 0.0 {
            return Err(PerturbError::Input("no admissible δ for this nonlinearity".into()));
        }
        let z_delta_inf =
            -wave.position_of(1.0 - delta).ok_or_else(|| PerturbError::Input("1 − δ level missing".into()))?;
        Ok(SlowedFamily { wave, r, delta, gamma, z_delta_inf })
    }

    /// Smallest `t` for which `Z_δ(t)` is defined.
    pub fn t_min(&self) -> f64 {
        self.gamma / (1.0 - self.delta)
    }

    pub fn z_delta(&self, t: f64) -> f64 {
        let level = 1.0 - self.delta - self.gamma / t;
        match self.wave.position_of(level) {
            Some(z) => -z,
            // Level closer to 1 than the launch point: invert the linear left tail.
            None => {
                let z_hi = -self.z_delta_inf;
                let z_lo = z_hi - 200.0;
                -brent(|z| self.wave.u(z) - level, z_lo, z_hi, 1e-14).unwrap_or(z_lo)
            }
        }
    }

    /// `Z_δ'(t) = −γ/(t²·U_*'(−Z_δ))`.
    pub fn z_delta_dot(&self, t: f64) -> f64 {
        let zd = self.z_delta(t);
        -self.gamma / (t * t * self.wave.du(-zd))
    }

    /// Solves up to `z_max`, stopping at the first zero of `U_r`.
    pub fn solve(&self, t: f64, z_max: f64) -> Result<SlowedProfile, PerturbError> {
        if t <= self.t_min() {
            return Err(PerturbError::Input(format!("t = {t} below γ/(1 − δ)")));
        }
        let f = self.wave.nonlinearity();
        let zd = self.z_delta(t);
        let du0 = self.wave.du(-zd);
        let ds0 = -self.wave.d2u(-zd) * self.z_delta_dot(t);
        let eps = 2.0 * self.r / t;
        let deps = -2.0 * self.r / (t * t);
        let c = 2.0 - eps;
        // S'' + (2 − ε)S' − ε_t·U' + f'(U)S = 0.
        let rhs = |_: f64, y: &[f64; 4]| {
            [y[1], -c * y[1] - f.eval(y[0]), y[3], -c * y[3] + deps * y[1] - f.deriv(y[0]) * y[2]]
        };
        let g_zero = |_: f64, y: &[f64; 4]| y[0];
        let g_blow = |_: f64, y: &[f64; 4]| 2.0 - y[0].abs();
        let opts = Options::tol(RTOL, 1e-300);
        let traj = integrate(rhs, 0.0, [1.0 - self.delta, du0, 0.0, ds0], z_max, &opts, &[&g_zero, &g_blow])?;
        let first_zero = match traj.event {
            Some(h) if h.index == 1 => return Err(PerturbError::BlowUp { z: h.t }),
            Some(h) => Some(h.t),
            None => None,
        };
        Ok(SlowedProfile { t, traj: Arc::new(traj), first_zero })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstZeroRow {
    pub t: f64,
    pub z0: Option<f64>,
    pub required: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstZeroReport {
    pub r: f64,
    pub gamma: f64,
    pub delta: f64,
    pub rows: Vec<FirstZeroRow>,
    pub increasing: bool,
    pub pass: bool,
}

/// Checks `Z₀(t) > (r + 2)·ln t` and that `Z₀` increases along `t_samples`.
pub fn first_zero_growth_check(family: &SlowedFamily, t_samples: &[f64]) -> Result<FirstZeroReport, PerturbError> {
    let mut rows = Vec::new();
    for &t in t_samples {
        let required = (family.r + 2.0) * t.ln();
        let z_max = 4.0 * required + 200.0;
        let p = family.solve(t, z_max)?;
        let ok = p.first_zero.is_some_and(|z| z > required);
        rows.push(FirstZeroRow { t, z0: p.first_zero, required, ok });
    }
    let increasing = rows.windows(2).all(|w| match (w[0].z0, w[1].z0) {
        (Some(a), Some(b)) => b > a,
        _ => false,
    });
    let pass = increasing && rows.iter().all(|r| r.ok);
    Ok(FirstZeroReport { r: family.r, gamma: family.gamma, delta: family.delta, rows, increasing, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> Nonlinearity {
        Nonlinearity::cubic(2.0).unwrap()
    }

    #[test]
    fn delta_for_cubics() {
        assert!((select_delta(&f2()) - 1.0 / 12.0).abs() < 1e-4);
        // f_1' = 1 − 3u² ≤ −1 needs u ≥ √(2/3).
        let d1 = (1.0 - (2.0f64 / 3.0).sqrt()) / 2.0;
        assert!((select_delta(&Nonlinearity::cubic(1.0).unwrap()) - d1).abs() < 1e-4);
    }

    #[test]
    fn zero_deficit_reproduces_wave() {
        let f = f2();
        let w = wave_at_level(&f, 0.9).unwrap();
        let [u0, du0] = w.eval(0.0);
        let p = solve_perturbed(&f, 0.0, u0, du0, 20.0, false).unwrap();
        assert!(p.first_zero.is_none());
        for i in 0..=200 {
            let z = 0.1 * i as f64;
            assert!((p.eval(z)[0] - w.u(z)).abs() < 1e-9);
        }
    }

    #[test]
    fn slowed_profile_has_a_zero_and_decreases_before_it() {
        let f = f2();
        let w = wave_at_level(&f, 1.0 - select_delta(&f)).unwrap();
        let [u0, du0] = w.eval(0.0);
        let p = solve_perturbed(&f, 0.1, u0, du0, 200.0, false).unwrap();
        let z0 = p.first_zero.expect("zero");
        for (z, y) in p.samples() {
            if z < z0 {
                assert!(y[1] < 0.0, "U' ≥ 0 at {z}");
            }
        }
    }

    #[test]
    fn sensitivity_matches_finite_difference() {
        let f = f2();
        let w = solve_profile(&f, 2.0, &WaveOptions::deep_tail()).unwrap();
        let fam = SlowedFamily::new(w, 0.26).unwrap();
        let t = 200.0;
        let h = 1e-3;
        let p = fam.solve(t, 10.0).unwrap();
        let pp = fam.solve(t + h, 10.0).unwrap();
        let pm = fam.solve(t - h, 10.0).unwrap();
        for &z in &[0.5, 2.0, 5.0, 9.0] {
            let fd = (pp.eval(z)[0] - pm.eval(z)[0]) / (2.0 * h);
            let s = p.eval(z)[2];
            assert!((fd - s).abs() < 1e-6 * (1.0 + s.abs()), "z={z} fd={fd} s={s}");
        }
    }
}
