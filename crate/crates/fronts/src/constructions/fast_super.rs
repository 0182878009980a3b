//! Supersolution with drift `r ln t`, `r ∈ (1/4, 1/2)`, for fast-decay fronts.

use std::collections::BTreeMap;

use super::{
    d_dt, f_over_u, normalize_fast, pulled_wave, ConstructedFunction, Construction, ConstructionError,
    ConstructionKind, LeftSuper, MatchingSample, Orientation, PieceEval,
};
use crate::perturbed::SlowedFamily;
use crate::reaction::Nonlinearity;
use crate::spectral::{estimate_w1, run_w, Boundary, SpectralGrid, WEvolution};
use crate::wave::{Regime, WaveProfile};

/// Largest `τ = ln t` the stored `w̃` covers: `t` up to `10·2¹⁷` plus slack.
pub const TAU_MAX: f64 = 14.5;

/// Margin constant for finite differences of the stored `w̃`.
pub const C_FD: f64 = 2.0;

pub struct FastSuper {
    pub f: Nonlinearity,
    pub r: f64,
    pub eps: f64,
    pub c: f64,
    pub w1: f64,
    pub w: WEvolution,
    pub(crate) left: LeftSuper,
}

/// Which formula of `w̄` is in force at `(τ, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WBarPiece {
    Explicit,
    Evolved,
}

impl FastSuper {
    pub fn new(f: &Nonlinearity, r: f64, c: f64, gamma: Option<f64>) -> Result<Self, ConstructionError> {
        if !(r > 0.25 && r < 0.5) {
            return Err(ConstructionError::Parameter(format!("r = {r} outside (1/4, 1/2)")));
        }
        if c <= 0.0 {
            return Err(ConstructionError::Parameter(format!("C = {c} must be positive")));
        }
        let wave = normalize_fast(&pulled_wave(f, Regime::PulledFast)?)?;
        let family = match gamma {
            Some(g) => SlowedFamily::with_gamma(wave, r, g)?,
            None => SlowedFamily::new(wave, r)?,
        };
        let w = run_w(Boundary::Neumann, 0.5, |y| (-y * y / 8.0).exp(), TAU_MAX, &SpectralGrid::default())?;
        let w1 = estimate_w1(&w)?;
        Ok(FastSuper { f: f.clone(), r, eps: 0.5 - r, c, w1, w, left: LeftSuper::new(family) })
    }

    /// `h(t) = ln(1 − C t^{−1/4}) + ln(1 − 3ln t/t^{1−ε} + 9ln²t/(4t^{3/2−ε})) − 9ln²t/(16t)`.
    pub fn h(&self, t: f64) -> f64 {
        let (l, e) = (t.ln(), self.eps);
        (1.0 - self.c * t.powf(-0.25)).ln() + (1.0 - 3.0 * l / t.powf(1.0 - e) + 2.25 * l * l / t.powf(1.5 - e)).ln()
            - 9.0 * l * l / (16.0 * t)
    }

    pub fn h_dot(&self, t: f64) -> f64 {
        d_dt(|t| self.h(t), t)
    }

    /// `w₀ = e^{−y²/8}(e^{τ(1/2+ε)} − 2y e^{2ετ} + y² e^{2ετ})` and its
    /// defect `P[w₀]`, with the absolute sum of the defect's terms.
    pub fn w0(&self, tau: f64, y: f64) -> [f64; 3] {
        let e = self.eps;
        let g = (-y * y / 8.0).exp();
        let a = (tau * (0.5 + e)).exp();
        let b = (2.0 * e * tau).exp();
        let c = (-0.5 * tau).exp();
        let w = g * (a - 2.0 * y * b + y * y * b);
        let terms = [
            e * g * a,
            -0.25 * y * g * (e * tau).exp(),
            -4.0 * e * y * g * b,
            g * c * b * (0.5 * y * y - 1.0),
            (2.0 * e + 0.5) * y * y * g * b,
            -2.0 * g * b,
            g * c * b * (y - 0.25 * y.powi(3)),
        ];
        [w, terms.iter().sum(), terms.iter().map(|v| v.abs()).sum()]
    }

    /// `e^{ετ} w̃/W₁` with its defect `e^{ετ}(εw̃ + P[w̃])/W₁` and margin.
    pub fn w_evolved(&self, tau: f64, y: f64) -> Result<[f64; 3], ConstructionError> {
        let [w, p, m] = self.w.defect(tau, y, C_FD)?;
        let k = (self.eps * tau).exp() / self.w1;
        Ok([k * w, k * (self.eps * w + p), k * m])
    }

    /// `w̄` with `P[w̄]` and an absolute margin on `P[w̄]`.
    pub fn w_bar(&self, tau: f64, y: f64) -> Result<([f64; 3], WBarPiece), ConstructionError> {
        let explicit = || {
            let [w, p, sc] = self.w0(tau, y);
            [w, p, 64.0 * f64::EPSILON * sc]
        };
        if y <= 1.0 {
            return Ok((explicit(), WBarPiece::Explicit));
        }
        let ev = self.w_evolved(tau, y)?;
        if y >= 3.0 {
            return Ok((ev, WBarPiece::Evolved));
        }
        let ex = explicit();
        Ok(if ex[0] <= ev[0] { (ex, WBarPiece::Explicit) } else { (ev, WBarPiece::Evolved) })
    }
}

impl Construction for FastSuper {
    fn kind(&self) -> ConstructionKind {
        ConstructionKind::FastSuper
    }

    fn orientation(&self) -> Orientation {
        Orientation::Super
    }

    fn params(&self) -> BTreeMap<String, f64> {
        let fam = &self.left.family;
        BTreeMap::from([
            ("r".into(), self.r),
            ("epsilon".into(), self.eps),
            ("C".into(), self.c),
            ("gamma".into(), fam.gamma),
            ("delta".into(), fam.delta),
            ("Z_delta_inf".into(), fam.z_delta_inf),
            ("W1".into(), self.w1),
        ])
    }

    fn wave(&self) -> &WaveProfile {
        &self.left.family.wave
    }

    fn band(&self, t: f64) -> [f64; 2] {
        let l = t.ln();
        [l - 1.0, l + 1.0]
    }

    fn s_left(&self, t: f64, margin: f64) -> f64 {
        -self.left.family.z_delta_inf - margin - self.r * t.ln() + self.h(t)
    }

    fn right_frame(&self) -> f64 {
        0.5
    }

    fn prepare(&self, ts: &[f64]) -> Result<(), ConstructionError> {
        self.left.prepare(ts)
    }

    fn left(&self, t: f64, s: f64) -> Result<PieceEval, ConstructionError> {
        self.left.eval(t, s + self.r * t.ln() - self.h(t), self.h_dot(t))
    }

    fn right(&self, t: f64, s: f64) -> Result<PieceEval, ConstructionError> {
        let tau = t.ln();
        let z = s + 0.5 * tau;
        if z < 0.0 {
            return Err(ConstructionError::Domain(format!("right piece needs z ≥ 0, got {z}")));
        }
        let y = z / t.sqrt();
        let ([w, p, m], _) = self.w_bar(tau, y)?;
        let a = 1.0 - self.c * t.powf(-0.25);
        let a_dot = 0.25 * self.c * t.powf(-1.25);
        // ū₂ = A e^{−z} e^{−y²/8} t^{−1/2} w̄; the linear part of N/ū is A'/A + P[w̄]/(t w̄).
        let u = a * (-z - y * y / 8.0 - 0.5 * tau).exp() * w;
        let react = 1.0 - f_over_u(&self.f, u);
        let n = a_dot / a + p / (t * w) + react;
        let margin = m / (t * w.abs()) + 64.0 * f64::EPSILON * (a_dot / a + (p / (t * w)).abs() + 1.0);
        Ok(PieceEval { value: u, rel_residual: n, rel_margin: margin })
    }

    /// `w₀ < e^{ετ}w̃/W₁` at `y = 1` and `w₀ > e^{ετ}w̃/W₁` at `y = 3`.
    fn inner_matching(&self, t: f64) -> Result<Vec<MatchingSample>, ConstructionError> {
        let tau = t.ln();
        let mut out = Vec::with_capacity(2);
        for (name, y, below) in [("w_bar_y1", 1.0, true), ("w_bar_y3", 3.0, false)] {
            let ex = self.w0(tau, y)[0];
            let ev = self.w_evolved(tau, y)?[0];
            let holds = if below { ex < ev } else { ex > ev };
            out.push(MatchingSample { name: name.into(), t, position: y, first: ex, second: ev, holds });
        }
        Ok(out)
    }
}

/// Fast-decay supersolution with `C = 1` and the default `γ`.
pub fn build_fast_supersolution(f: &Nonlinearity, r: f64) -> Result<ConstructedFunction, ConstructionError> {
    Ok(ConstructedFunction::new(FastSuper::new(f, r, 1.0, None)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The closed-form `P[w₀]` agrees with finite differences.
    #[test]
    fn w0_defect_matches_finite_differences() {
        let f = Nonlinearity::cubic(2.0).unwrap();
        let sup = FastSuper::new(&f, 0.3, 1.0, None).unwrap();
        let w = |tau: f64, y: f64| sup.w0(tau, y)[0];
        let h = 1e-3;
        for &(tau, y) in &[(3.0, 0.4), (6.0, 1.7), (9.0, 2.9)] {
            let wt =
                (w(tau - 2.0 * h, y) - 8.0 * w(tau - h, y) + 8.0 * w(tau + h, y) - w(tau + 2.0 * h, y)) / (12.0 * h);
            let wy =
                (w(tau, y - 2.0 * h) - 8.0 * w(tau, y - h) + 8.0 * w(tau, y + h) - w(tau, y + 2.0 * h)) / (12.0 * h);
            let wyy = (-w(tau, y - 2.0 * h) + 16.0 * w(tau, y - h) - 30.0 * w(tau, y) + 16.0 * w(tau, y + h)
                - w(tau, y + 2.0 * h))
                / (12.0 * h * h);
            let v = w(tau, y);
            let p = wt - wyy + (y * y / 16.0 - 0.75) * v + 0.5 * (-0.5 * tau).exp() * (wy - 0.25 * y * v);
            let exact = sup.w0(tau, y)[1];
            assert!((p - exact).abs() < 1e-6 * (1.0 + exact.abs()), "τ={tau} y={y}: {p} vs {exact}");
        }
    }
}
