//! The case `f(s) = s` on `[0, δ]`: a heat-kernel subsolution glued to the
//! critical wave at the level `δ`.

use serde::{Deserialize, Serialize};

use super::ConstructionError;
use crate::numerics::brent;
use crate::ode::{integrate, Options};
use crate::reaction::Nonlinearity;
use crate::wave::{solve_profile, WaveOptions, WaveProfile};

/// `h(t) = 2t − √(4t² − 2t ln t)`, written without cancellation.
pub fn h_linear(t: f64) -> f64 {
    let l = t.ln();
    2.0 * t * l / (2.0 * t + (4.0 * t * t - 2.0 * t * l).sqrt())
}

/// `U'/U + 1` where the `c = 2` orbit of `f` first reaches `U = δ`. In the
/// linear zone `U = (A + Bz)e^{−z}`, so the sign of this quantity is that of `B`.
pub fn tail_slope_excess(f: &Nonlinearity, delta: f64) -> Result<f64, ConstructionError> {
    let c = 2.0;
    let opts = WaveOptions::deep_tail();
    let lam = 0.5 * (-c + (c * c - 4.0 * f.slope_at_one).sqrt());
    let y0 = [1.0 - opts.eps0, -lam * opts.eps0];
    let rhs = |_: f64, y: &[f64; 2]| [y[1], -c * y[1] - f.eval(y[0])];
    let hit = |_: f64, y: &[f64; 2]| y[0] - delta;
    let turn = |_: f64, y: &[f64; 2]| -y[1];
    let traj = integrate(rhs, 0.0, y0, opts.span, &Options::tol(1e-13, 0.0), &[&hit, &turn])
        .map_err(|e| ConstructionError::Parameter(e.to_string()))?;
    match traj.event {
        Some(h) if h.index == 0 => Ok(h.y[1] / h.y[0] + 1.0),
        Some(_) => Ok(-1.0),
        None => Err(ConstructionError::Parameter(format!("orbit never reaches U = {delta}"))),
    }
}

/// Linear-cut nonlinearity whose critical wave has `B = 0` exactly:
/// bisects the tail parameter `a` of `s(1−s)(1+as)`.
pub fn tune_linear_cut(delta: f64) -> Result<(Nonlinearity, f64), ConstructionError> {
    let g = |a: f64| {
        Nonlinearity::linear_cut(delta, a)
            .map_err(|e| ConstructionError::Parameter(e.to_string()))
            .and_then(|f| tail_slope_excess(&f, delta))
    };
    let (lo, hi) = (0.0, 16.0);
    if g(lo)? <= 0.0 || g(hi)? >= 0.0 {
        return Err(ConstructionError::Parameter("no sign change of B in a ∈ [0, 16]".into()));
    }
    let a = brent(|a| g(a).unwrap_or(-1.0), lo, hi, 1e-15)
        .ok_or_else(|| ConstructionError::Parameter("bisection on a failed".into()))?;
    let f = Nonlinearity::linear_cut(delta, a).map_err(|e| ConstructionError::Parameter(e.to_string()))?;
    Ok((f, a))
}

/// Wave with `U_*(z) = δe^{−z}` on `z ≥ 0`, and the heat-kernel piece.
#[derive(Debug, Clone)]
pub struct LinearCase {
    pub delta: f64,
    pub a: f64,
    pub f: Nonlinearity,
    pub wave: WaveProfile,
    /// `U'/U + 1` at the level `δ` after tuning.
    pub residual_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionCheck {
    pub t: f64,
    pub h: f64,
    /// `U_*(0) − U₀(t, 2t − h)`.
    pub gap: f64,
    pub wave_slope: f64,
    pub kernel_slope: f64,
    pub holds: bool,
}

impl LinearCase {
    pub fn new(delta: f64) -> Result<Self, ConstructionError> {
        let (f, a) = tune_linear_cut(delta)?;
        let residual_b = tail_slope_excess(&f, delta)?;
        let wave = solve_profile(&f, 2.0, &WaveOptions::deep_tail())?;
        let z_delta = wave
            .position_of(delta)
            .ok_or_else(|| ConstructionError::Parameter("level δ missing from the profile".into()))?;
        Ok(LinearCase { delta, a, f, wave: wave.shifted(z_delta), residual_b })
    }

    /// `U_*(z)`: the orbit for `z < 0`, exactly `δe^{−z}` beyond.
    pub fn u_star(&self, z: f64) -> f64 {
        if z >= 0.0 {
            self.delta * (-z).exp()
        } else {
            self.wave.u(z)
        }
    }

    pub fn u_star_slope(&self, z: f64) -> f64 {
        if z >= 0.0 {
            -self.delta * (-z).exp()
        } else {
            self.wave.du(z)
        }
    }

    /// `U₀(t, x) = δ e^t t^{−1/2} e^{−x²/4t}`. With `s = x − 2t` the exponent
    /// is `−½ln t − s − s²/4t`, free of the `t − x²/4t` cancellation.
    pub fn u0(&self, t: f64, x: f64) -> f64 {
        self.u0_moving(t, x - 2.0 * t)
    }

    pub fn u0_moving(&self, t: f64, s: f64) -> f64 {
        self.delta * (-0.5 * t.ln() - s - s * s / (4.0 * t)).exp()
    }

    pub fn u0_slope(&self, t: f64, x: f64) -> f64 {
        -x / (2.0 * t) * self.u0(t, x)
    }

    pub fn check_junction(&self, t: f64) -> Result<JunctionCheck, ConstructionError> {
        if t <= 1.0 {
            return Err(ConstructionError::Domain(format!("t = {t} ≤ 1")));
        }
        let h = h_linear(t);
        let xj = 2.0 * t - h;
        let wave_slope = self.wave.du(0.0);
        let kernel_slope = self.u0_slope(t, xj);
        Ok(JunctionCheck {
            t,
            h,
            gap: self.u_star(0.0) - self.u0_moving(t, -h),
            wave_slope,
            kernel_slope,
            holds: wave_slope < kernel_slope,
        })
    }
}

/// `U_*(x − 2t + h(t))` left of `2t − h(t)`, `U₀(t, x)` right of it.
pub fn eval_linear_case_subsolution(case: &LinearCase, t: f64, x: f64) -> Result<f64, ConstructionError> {
    if t <= 1.0 {
        return Err(ConstructionError::Domain(format!("t = {t} ≤ 1")));
    }
    let h = h_linear(t);
    Ok(if x <= 2.0 * t - h { case.u_star(x - 2.0 * t + h) } else { case.u0(t, x) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_at_100() {
        let direct = 200.0 - (40000.0f64 - 200.0 * 100f64.ln()).sqrt();
        assert!((h_linear(100.0) - direct).abs() < 1e-12);
        assert!((h_linear(100.0) - 2.3158).abs() < 5e-4);
    }

    #[test]
    fn u0_is_delta_at_the_junction() {
        let case = LinearCase::new(0.1).unwrap();
        for &t in &[2.0, 37.0, 1e4] {
            assert!((case.u0_moving(t, -h_linear(t)) - 0.1).abs() < 1e-15);
        }
    }
}
