//! Supersolution with drift `(3/2) ln t` for slow-decay fronts.

use std::collections::BTreeMap;

use super::fast_super::{C_FD, TAU_MAX};
use super::{
    f_over_u, normalize_slow, pulled_wave, ConstructedFunction, Construction, ConstructionError, ConstructionKind,
    LeftSuper, Orientation, PieceEval,
};
use crate::perturbed::SlowedFamily;
use crate::reaction::Nonlinearity;
use crate::spectral::{estimate_w1, run_w, Boundary, SpectralGrid, WEvolution};
use crate::wave::{Regime, WaveProfile};

/// Open interval `(1/(1 + 2ε/5), 1/(1 + ε/3))` of admissible `β`.
pub fn beta_window(eps: f64) -> (f64, f64) {
    (1.0 / (1.0 + 0.4 * eps), 1.0 / (1.0 + eps / 3.0))
}

/// Tuning knobs; see [`SlowSuper::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowSuperParams {
    pub eps: f64,
    pub beta: f64,
    pub c: f64,
    pub gamma: Option<f64>,
}

impl SlowSuperParams {
    /// `β` placed at `frac` of its window.
    pub fn at_fraction(eps: f64, frac: f64, c: f64) -> Self {
        let (lo, hi) = beta_window(eps);
        SlowSuperParams { eps, beta: lo + frac * (hi - lo), c, gamma: None }
    }
}

impl Default for SlowSuperParams {
    fn default() -> Self {
        Self::at_fraction(0.249, 0.99, 0.05)
    }
}

pub struct SlowSuper {
    pub f: Nonlinearity,
    pub p: SlowSuperParams,
    pub w1: f64,
    /// `A/B` of the unshifted tail, i.e. `U_* ≈ (z + a_over_b)e^{−z}` after the shift.
    pub a_over_b: f64,
    pub w: WEvolution,
    pub(crate) left: LeftSuper,
}

impl SlowSuper {
    pub fn new(f: &Nonlinearity, p: SlowSuperParams) -> Result<Self, ConstructionError> {
        if !(p.eps > 0.0 && p.eps < 0.25) {
            return Err(ConstructionError::Parameter(format!("ε = {} outside (0, 1/4)", p.eps)));
        }
        let (lo, hi) = beta_window(p.eps);
        if !(p.beta > lo && p.beta < hi) {
            return Err(ConstructionError::Parameter(format!("β = {} outside ({lo}, {hi})", p.beta)));
        }
        if p.c <= 0.0 {
            return Err(ConstructionError::Parameter(format!("C = {} must be positive", p.c)));
        }
        let (wave, a_over_b) = normalize_slow(&pulled_wave(f, Regime::PulledSlow)?)?;
        let family = match p.gamma {
            Some(g) => SlowedFamily::with_gamma(wave, 1.5, g)?,
            None => SlowedFamily::new(wave, 1.5)?,
        };
        let coefficient = 1.5 + p.eps;
        let w =
            run_w(Boundary::Dirichlet, coefficient, |y| y * (-y * y / 8.0).exp(), TAU_MAX, &SpectralGrid::default())?;
        let w1 = estimate_w1(&w)?;
        Ok(SlowSuper { f: f.clone(), p, w1, a_over_b, w, left: LeftSuper::new(family) })
    }

    fn q(&self) -> f64 {
        1.5 + self.p.eps
    }
}

impl Construction for SlowSuper {
    fn kind(&self) -> ConstructionKind {
        ConstructionKind::SlowSuper
    }

    fn orientation(&self) -> Orientation {
        Orientation::Super
    }

    fn params(&self) -> BTreeMap<String, f64> {
        let fam = &self.left.family;
        BTreeMap::from([
            ("r".into(), 1.5),
            ("epsilon".into(), self.p.eps),
            ("beta".into(), self.p.beta),
            ("C".into(), self.p.c),
            ("gamma".into(), fam.gamma),
            ("delta".into(), fam.delta),
            ("Z_delta_inf".into(), fam.z_delta_inf),
            ("W1".into(), self.w1),
            ("shift".into(), self.a_over_b),
        ])
    }

    fn wave(&self) -> &WaveProfile {
        &self.left.family.wave
    }

    fn band(&self, t: f64) -> [f64; 2] {
        let l = t.ln();
        [l, 1.5 * l]
    }

    fn s_left(&self, t: f64, margin: f64) -> f64 {
        -self.left.family.z_delta_inf - margin - 1.5 * t.ln()
    }

    fn right_frame(&self) -> f64 {
        self.q()
    }

    fn prepare(&self, ts: &[f64]) -> Result<(), ConstructionError> {
        self.left.prepare(ts)
    }

    fn left(&self, t: f64, s: f64) -> Result<PieceEval, ConstructionError> {
        self.left.eval(t, s + 1.5 * t.ln(), 0.0)
    }

    fn right(&self, t: f64, s: f64) -> Result<PieceEval, ConstructionError> {
        let tau = t.ln();
        let z = s + self.q() * tau;
        if z <= 0.0 {
            return Err(ConstructionError::Domain(format!("right piece needs z > 0, got {z}")));
        }
        let y = z / t.sqrt();
        let [w, p, m] = self.w.defect(tau, y, C_FD)?;
        let k = self.p.beta / self.w1;
        let a = 1.0 - self.p.c * t.powf(-0.25);
        let a_dot = 0.25 * self.p.c * t.powf(-1.25);
        // ū₂ = A e^{−z} e^{−y²/8} t^{1/2+ε} (β/W₁) w̃.
        let u = a * (-z - y * y / 8.0 + (0.5 + self.p.eps) * tau).exp() * k * w;
        let react = 1.0 - f_over_u(&self.f, u);
        let n = a_dot / a + p / (t * w) + react;
        let margin = m / (t * w.abs()) + 64.0 * f64::EPSILON * (a_dot / a + (p / (t * w)).abs() + 1.0);
        Ok(PieceEval { value: u, rel_residual: n, rel_margin: margin })
    }
}

/// Slow-decay supersolution with the default parameters.
pub fn build_slow_supersolution(
    f: &Nonlinearity,
    eps: f64,
    beta: f64,
) -> Result<ConstructedFunction, ConstructionError> {
    let p = SlowSuperParams { eps, beta, ..SlowSuperParams::default() };
    Ok(ConstructedFunction::new(SlowSuper::new(f, p)?))
}
