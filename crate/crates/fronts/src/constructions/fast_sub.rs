//! Subsolution with drift `r ln t`, `r ∈ (1/2, 1)`, for fast-decay fronts.

use std::collections::BTreeMap;

use super::{
    d_dt, f_over_u, normalize_fast, pulled_wave, ConstructedFunction, Construction, ConstructionError,
    ConstructionKind, Orientation, PieceEval,
};
use crate::numerics::{golden_max, smoothstep};
use crate::perturbed::select_delta;
use crate::reaction::Nonlinearity;
use crate::wave::{Regime, WaveProfile};

/// `max_{s ≥ 0} (1+s)e^{−s²/4}`, located numerically.
pub fn gaussian_weight_max() -> (f64, f64) {
    golden_max(|s| (1.0 + s) * (-s * s / 4.0).exp(), 0.0, 10.0, 1e-12)
}

/// Smallest admissible `C = 4Ke²·max_{s≥0}(1+s)e^{−s²/4}`.
pub fn c_floor(f: &Nonlinearity) -> f64 {
    4.0 * f.k_const() * std::f64::consts::E.powi(2) * gaussian_weight_max().1
}

pub struct FastSub {
    pub f: Nonlinearity,
    pub wave: WaveProfile,
    pub r: f64,
    pub eps: f64,
    pub c: f64,
    pub delta: f64,
    pub z: f64,
}

impl FastSub {
    pub fn new(f: &Nonlinearity, r: f64, c: f64) -> Result<Self, ConstructionError> {
        if !(r > 0.5 && r < 1.0) {
            return Err(ConstructionError::Parameter(format!("r = {r} outside (1/2, 1)")));
        }
        let wave = normalize_fast(&pulled_wave(f, Regime::PulledFast)?)?;
        let delta = select_delta(f);
        let z = -wave
            .position_of(1.0 - delta / 2.0)
            .ok_or_else(|| ConstructionError::Parameter("level 1 − δ/2 missing".into()))?;
        Ok(FastSub { f: f.clone(), wave, r, eps: r - 0.5, c, delta, z })
    }

    /// `h(t) = ln(1 + C/√t) + ln(1 + 3ln t/(2t^{1−ε})) − 9ln²t/(16t)`.
    pub fn h(&self, t: f64) -> f64 {
        let l = t.ln();
        (1.0 + self.c / t.sqrt()).ln() + (1.0 + 1.5 * l / t.powf(1.0 - self.eps)).ln() - 9.0 * l * l / (16.0 * t)
    }

    pub fn h_dot(&self, t: f64) -> f64 {
        d_dt(|t| self.h(t), t)
    }

    /// `χ = 1` on `(−∞, −Z−1]`, `0` on `[−Z, ∞)`: `[χ, χ', χ'']`.
    fn chi(&self, xi: f64) -> [f64; 3] {
        let [s, ds, dds] = smoothstep(xi + self.z + 1.0);
        [1.0 - s, -ds, -dds]
    }

    fn xi(&self, t: f64, s: f64) -> f64 {
        s + self.r * t.ln() - self.h(t)
    }
}

impl Construction for FastSub {
    fn kind(&self) -> ConstructionKind {
        ConstructionKind::FastSub
    }

    fn orientation(&self) -> Orientation {
        Orientation::Sub
    }

    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("r".into(), self.r),
            ("epsilon".into(), self.eps),
            ("C".into(), self.c),
            ("delta".into(), self.delta),
            ("Z".into(), self.z),
        ])
    }

    fn wave(&self) -> &WaveProfile {
        &self.wave
    }

    fn band(&self, t: f64) -> [f64; 2] {
        let l = t.ln();
        [l - 1.0, l + 1.0]
    }

    fn s_left(&self, t: f64, margin: f64) -> f64 {
        -self.z - 1.0 - margin - self.r * t.ln() + self.h(t)
    }

    fn right_frame(&self) -> f64 {
        0.5
    }

    fn left(&self, t: f64, s: f64) -> Result<PieceEval, ConstructionError> {
        let xi = self.xi(t, s);
        let [u_w, du] = self.wave.eval(xi);
        let e = (0.5 * self.f.slope_at_one * t).exp();
        let [chi, dchi, ddchi] = self.chi(xi);
        let u = u_w - chi * e;
        let hd = self.h_dot(t);
        let drift = (self.r / t - hd) * du;
        let (fu_w, fu) = (self.f.eval(u_w), self.f.eval(u));
        let cut = e * ((2.0 - self.r / t + hd) * dchi - 0.5 * self.f.slope_at_one * chi + ddchi);
        let n = drift + (fu_w - fu) + cut;
        let scale = drift.abs() + fu_w.abs() + fu.abs() + cut.abs();
        Ok(PieceEval::closed_form(u, n, scale))
    }

    fn right(&self, t: f64, s: f64) -> Result<PieceEval, ConstructionError> {
        let z = s + 0.5 * t.ln();
        let k = 1.0 + self.c / t.sqrt();
        let p = t.powf(-self.eps) + z / t;
        let u = k * p * (-z - z * z / (4.0 * t)).exp();
        // e^{z + z²/4t}·(∂t − ∂zz − (2 − 1/2t)∂z − 1)ũ in the moving frame.
        let b1 = -z / (4.0 * t * t) * k * p;
        let b2 = k * (0.5 / (t * t) - self.eps * t.powf(-1.0 - self.eps));
        let b3 = -self.c / (2.0 * t.powf(1.5)) * p;
        let lin = (b1 + b2 + b3) / (k * p);
        let react = 1.0 - f_over_u(&self.f, u);
        let scale = (b1.abs() + b2.abs() + b3.abs()) / (k * p).abs() + 1.0 + react.abs();
        Ok(PieceEval { value: u, rel_residual: lin + react, rel_margin: 64.0 * f64::EPSILON * scale })
    }
}

/// Fast-decay subsolution with `C` at its floor.
pub fn build_fast_subsolution(f: &Nonlinearity, r: f64) -> Result<ConstructedFunction, ConstructionError> {
    Ok(ConstructedFunction::new(FastSub::new(f, r, c_floor(f))?))
}
