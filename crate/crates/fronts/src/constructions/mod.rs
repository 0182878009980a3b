//! Explicit sub- and supersolutions of `∂t u = ∂xx u + f(u)` and their
//! numerical certification.
//!
//! Every construction is two pieces glued by `max` (subsolutions) or `min`
//! (supersolutions) across a band `[2t + b₀(t), 2t + b₁(t)]`. Positions are
//! handled as `s = x − 2t` internally so that `x ≈ 2t ≈ 10⁶` loses no digits.
//!
//! Residuals `N[u] = ∂t u − ∂xx u − f(u)` are reported relative to `u`, which
//! keeps the sign test meaningful deep in the Gaussian tail where `u`
//! underflows.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::perturbed::{PerturbError, SlowedFamily, SlowedProfile};
use crate::reaction::Nonlinearity;
use crate::spectral::SpectralError;
use crate::wave::{extract_decay, solve_profile, Regime, WaveError, WaveOptions, WaveProfile};

pub mod fast_sub;
pub mod fast_super;
pub mod linear;
pub mod slow_super;

pub use fast_sub::build_fast_subsolution;
pub use fast_super::build_fast_supersolution;
pub use linear::{eval_linear_case_subsolution, h_linear, LinearCase};
pub use slow_super::build_slow_supersolution;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstructionError {
    #[error("regime mismatch: {0}")]
    Regime(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("point outside the construction's domain: {0}")]
    Domain(String),
    #[error("first zero Z₀({t}) = {z0:?} does not exceed {required}")]
    FirstZero { t: f64, z0: Option<f64>, required: f64 },
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Perturbed(#[from] PerturbError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionKind {
    LinearCaseSub,
    FastSub,
    FastSuper,
    SlowSuper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Sub,
    Super,
}

impl Orientation {
    /// Residual has the required sign (`≤ 0` for sub, `≥ 0` for super).
    fn accepts(self, n: f64) -> bool {
        match self {
            Orientation::Sub => n <= 0.0,
            Orientation::Super => n >= 0.0,
        }
    }
}

/// Value and relative residual `N[u]/u` of one piece at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PieceEval {
    pub value: f64,
    pub rel_residual: f64,
    pub rel_margin: f64,
}

impl PieceEval {
    /// From a raw residual whose terms have absolute sum `scale`.
    pub(crate) fn closed_form(value: f64, residual: f64, scale: f64) -> Self {
        PieceEval { value, rel_residual: residual / value, rel_margin: 64.0 * f64::EPSILON * scale / value.abs() }
    }
}

/// One side of a glued construction.
pub trait Construction: Send + Sync {
    fn kind(&self) -> ConstructionKind;
    fn orientation(&self) -> Orientation;
    fn params(&self) -> BTreeMap<String, f64>;
    fn wave(&self) -> &WaveProfile;
    /// Gluing band in `s = x − 2t`.
    fn band(&self, t: f64) -> [f64; 2];
    /// Smallest `s` of interest: well inside the region where `u ≈ 1`.
    fn s_left(&self, t: f64, margin: f64) -> f64;
    /// Logarithmic frame `q` of the right piece, `z = s + q ln t`.
    fn right_frame(&self) -> f64;
    fn left(&self, t: f64, s: f64) -> Result<PieceEval, ConstructionError>;
    fn right(&self, t: f64, s: f64) -> Result<PieceEval, ConstructionError>;
    /// Solves anything that is computed per time slice.
    fn prepare(&self, _ts: &[f64]) -> Result<(), ConstructionError> {
        Ok(())
    }
    /// Matching inequalities internal to a piece, besides the band edges.
    fn inner_matching(&self, _t: f64) -> Result<Vec<MatchingSample>, ConstructionError> {
        Ok(Vec::new())
    }
}

/// A glued construction with its declared pieces.
#[derive(Clone)]
pub struct ConstructedFunction {
    inner: Arc<dyn Construction>,
}

impl std::fmt::Debug for ConstructedFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstructedFunction").field("kind", &self.kind()).field("params", &self.params()).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Active {
    Left,
    Right,
}

impl ConstructedFunction {
    pub fn new(inner: impl Construction + 'static) -> Self {
        ConstructedFunction { inner: Arc::new(inner) }
    }

    pub fn kind(&self) -> ConstructionKind {
        self.inner.kind()
    }

    pub fn orientation(&self) -> Orientation {
        self.inner.orientation()
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        self.inner.params()
    }

    pub fn construction(&self) -> &dyn Construction {
        self.inner.as_ref()
    }

    pub fn band(&self, t: f64) -> [f64; 2] {
        self.inner.band(t)
    }

    pub fn prepare(&self, ts: &[f64]) -> Result<(), ConstructionError> {
        self.inner.prepare(ts)
    }

    /// Glued evaluation at `s = x − 2t`; reports which piece is active.
    pub fn eval_rel(&self, t: f64, s: f64) -> Result<(PieceEval, Active), ConstructionError> {
        let [lo, hi] = self.inner.band(t);
        if s <= lo {
            return Ok((self.inner.left(t, s)?, Active::Left));
        }
        if s >= hi {
            return Ok((self.inner.right(t, s)?, Active::Right));
        }
        let l = self.inner.left(t, s)?;
        let r = self.inner.right(t, s)?;
        let take_left = match self.orientation() {
            Orientation::Sub => l.value >= r.value,
            Orientation::Super => l.value <= r.value,
        };
        Ok(if take_left { (l, Active::Left) } else { (r, Active::Right) })
    }

    pub fn value(&self, t: f64, x: f64) -> Result<f64, ConstructionError> {
        Ok(self.eval_rel(t, x - 2.0 * t)?.0.value)
    }

    /// `(N[u]/u, margin)` at `(t, x)`.
    pub fn residual(&self, t: f64, x: f64) -> Result<(f64, f64), ConstructionError> {
        let e = self.eval_rel(t, x - 2.0 * t)?.0;
        Ok((e.rel_residual, e.rel_margin))
    }

    /// The two band-edge inequalities at time `t`, plus any inner ones.
    pub fn matching(&self, t: f64) -> Result<Vec<MatchingSample>, ConstructionError> {
        let [lo, hi] = self.inner.band(t);
        let (l0, r0) = (self.inner.left(t, lo)?.value, self.inner.right(t, lo)?.value);
        let (l1, r1) = (self.inner.left(t, hi)?.value, self.inner.right(t, hi)?.value);
        // At the left edge the left piece must be the one selected.
        let (left_edge, right_edge) = match self.orientation() {
            Orientation::Sub => (l0 > r0, l1 < r1),
            Orientation::Super => (l0 < r0, l1 > r1),
        };
        let mut out = vec![
            MatchingSample { name: "band_left_edge".into(), t, position: lo, first: l0, second: r0, holds: left_edge },
            MatchingSample {
                name: "band_right_edge".into(),
                t,
                position: hi,
                first: l1,
                second: r1,
                holds: right_edge,
            },
        ];
        out.extend(self.inner.inner_matching(t)?);
        Ok(out)
    }
}

/// One sampled matching inequality: `first` and `second` are the two glued
/// candidates at `position` (`s = x − 2t`, or `y` for inner bands).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSample {
    pub name: String,
    pub t: f64,
    pub position: f64,
    pub first: f64,
    pub second: f64,
    pub holds: bool,
}

/// `t0, t1, nt, x_margin, nx`: log-spaced times and `nx` positions per time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertGrid {
    pub t0: f64,
    pub t1: f64,
    pub nt: usize,
    pub x_margin: f64,
    pub nx: usize,
}

impl CertGrid {
    pub fn times(&self) -> Vec<f64> {
        if self.nt <= 1 {
            return vec![self.t0];
        }
        let (a, b) = (self.t0.ln(), self.t1.ln());
        (0..self.nt).map(|i| (a + (b - a) * i as f64 / (self.nt - 1) as f64).exp()).collect()
    }

    /// Positions `s = x − 2t`: half of them between the far left and just
    /// past the band, half across the Gaussian region out to `y = 8`.
    pub fn positions(&self, c: &dyn Construction, t: f64) -> Vec<f64> {
        let s0 = c.s_left(t, self.x_margin);
        let s1 = c.band(t)[1] + 2.0;
        let s2 = (8.0 * t.sqrt() - c.right_frame() * t.ln()).max(s1 + 10.0);
        let n1 = self.nx / 2;
        let n2 = self.nx - n1;
        let mut out: Vec<f64> = (0..n1).map(|i| s0 + (s1 - s0) * i as f64 / n1 as f64).collect();
        out.extend((0..n2).map(|i| s1 + (s2 - s1) * i as f64 / (n2.max(2) - 1) as f64));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    Certified,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPoint {
    pub t: f64,
    pub x_minus_2t: f64,
    pub rel_residual: f64,
    pub rel_margin: f64,
    pub active: Active,
}

/// Residuals are `N[u]/u`; the margin is in the same units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub region: String,
    pub orientation: Orientation,
    pub n_points: usize,
    pub n_inconclusive: usize,
    pub n_violations: usize,
    pub min_residual: f64,
    pub max_residual: f64,
    pub discretization_margin: f64,
    pub worst: Option<WorstPoint>,
    pub verdict: Certification,
}

/// Fraction of in-margin points tolerated by a certificate.
pub const MAX_INCONCLUSIVE: f64 = 1e-3;

/// Evaluates `N[u]/u` on the grid and classifies every point.
pub fn residual_certify(c: &ConstructedFunction, grid: &CertGrid) -> Result<ResidualReport, ConstructionError> {
    let ts = grid.times();
    c.prepare(&ts)?;
    let orient = c.orientation();
    let rows: Vec<Vec<(f64, f64, PieceEval, Active)>> = ts
        .par_iter()
        .map(|&t| {
            grid.positions(c.construction(), t)
                .into_iter()
                .map(|s| c.eval_rel(t, s).map(|(e, a)| (t, s, e, a)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut rep = ResidualReport {
        region: format!("t in [{}, {}] ({} times), {} positions per time", grid.t0, grid.t1, grid.nt, grid.nx),
        orientation: orient,
        n_points: 0,
        n_inconclusive: 0,
        n_violations: 0,
        min_residual: f64::INFINITY,
        max_residual: f64::NEG_INFINITY,
        discretization_margin: 0.0,
        worst: None,
        verdict: Certification::Certified,
    };
    // Worst = most negative signed excess over the margin.
    let mut worst_score = f64::INFINITY;
    for (t, s, e, a) in rows.into_iter().flatten() {
        rep.n_points += 1;
        let n = e.rel_residual;
        if !n.is_finite() {
            rep.n_violations += 1;
            continue;
        }
        rep.min_residual = rep.min_residual.min(n);
        rep.max_residual = rep.max_residual.max(n);
        rep.discretization_margin = rep.discretization_margin.max(e.rel_margin);
        let signed = if orient == Orientation::Sub { -n } else { n };
        if n.abs() <= e.rel_margin {
            rep.n_inconclusive += 1;
        } else if !orient.accepts(n) {
            rep.n_violations += 1;
        }
        let score = signed - e.rel_margin;
        if score < worst_score {
            worst_score = score;
            rep.worst = Some(WorstPoint { t, x_minus_2t: s, rel_residual: n, rel_margin: e.rel_margin, active: a });
        }
    }
    rep.verdict = if rep.n_violations > 0 {
        Certification::Violated
    } else if rep.n_inconclusive as f64 >= MAX_INCONCLUSIVE * rep.n_points as f64 {
        Certification::Inconclusive
    } else {
        Certification::Certified
    };
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    pub samples: Vec<MatchingSample>,
    pub all_hold: bool,
}

pub fn matching_check(c: &ConstructedFunction, ts: &[f64]) -> Result<MatchingReport, ConstructionError> {
    c.prepare(ts)?;
    let samples: Vec<MatchingSample> =
        ts.par_iter().map(|&t| c.matching(t)).collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect();
    let all_hold = samples.iter().all(|m| m.holds);
    Ok(MatchingReport { samples, all_hold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TAttempt {
    pub t: f64,
    pub verdict: Option<Certification>,
    pub matching: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TSearch {
    pub found: Option<f64>,
    pub attempts: Vec<TAttempt>,
}

pub const T_CAP_EXPONENT: i32 = 16;

/// Smallest `T ∈ {2⁴, …, 2¹⁶}` certified on `[T, 4T]` with every matching
/// inequality holding there. `found = None` means the cap was exceeded.
pub fn find_valid_t(c: &ConstructedFunction, nt: usize, x_margin: f64, nx: usize) -> TSearch {
    let mut attempts = Vec::new();
    for k in 4..=T_CAP_EXPONENT {
        let t = 2f64.powi(k);
        let grid = CertGrid { t0: t, t1: 4.0 * t, nt, x_margin, nx };
        let attempt = residual_certify(c, &grid).and_then(|rep| {
            let m = matching_check(c, &grid.times())?;
            Ok((rep.verdict, m.all_hold))
        });
        match attempt {
            Ok((v, m)) => {
                attempts.push(TAttempt { t, verdict: Some(v), matching: Some(m), error: None });
                if v == Certification::Certified && m {
                    return TSearch { found: Some(t), attempts };
                }
            }
            Err(e) => attempts.push(TAttempt { t, verdict: None, matching: None, error: Some(e.to_string()) }),
        }
    }
    TSearch { found: None, attempts }
}

/// `U_r(·; t)` with `Z_δ(t)` and `Z_δ'(t)`, for one time slice.
pub(crate) struct Slice {
    pub profile: SlowedProfile,
    pub zd: f64,
    pub zd_dot: f64,
}

/// Left piece shared by both supersolutions: `U_*(ξ) + γ/t` for
/// `ξ ≤ −Z_δ(t)` and `U_r(ξ + Z_δ(t); t)` beyond, where `ξ = s + r ln t − h(t)`.
/// `U_r` is solved on demand and kept per `t`.
pub(crate) struct LeftSuper {
    pub family: SlowedFamily,
    map: RwLock<HashMap<u64, Arc<Slice>>>,
}

impl LeftSuper {
    pub fn new(family: SlowedFamily) -> Self {
        LeftSuper { family, map: RwLock::new(HashMap::new()) }
    }

    /// `U_r` must stay positive up to `(r + 2) ln t`.
    fn z_required(&self, t: f64) -> f64 {
        (self.family.r + 2.0) * t.ln()
    }

    fn solve(&self, t: f64) -> Result<Arc<Slice>, ConstructionError> {
        let required = self.z_required(t);
        let profile = self.family.solve(t, required + 1.0)?;
        if let Some(z0) = profile.first_zero {
            if z0 <= required {
                return Err(ConstructionError::FirstZero { t, z0: Some(z0), required });
            }
        }
        Ok(Arc::new(Slice { profile, zd: self.family.z_delta(t), zd_dot: self.family.z_delta_dot(t) }))
    }

    pub fn slice(&self, t: f64) -> Result<Arc<Slice>, ConstructionError> {
        if let Some(p) = self.map.read().unwrap().get(&t.to_bits()) {
            return Ok(p.clone());
        }
        let p = self.solve(t)?;
        self.map.write().unwrap().insert(t.to_bits(), p.clone());
        Ok(p)
    }

    pub fn prepare(&self, ts: &[f64]) -> Result<(), ConstructionError> {
        let missing: Vec<f64> = {
            let map = self.map.read().unwrap();
            ts.iter().copied().filter(|t| !map.contains_key(&t.to_bits())).collect()
        };
        let solved: Vec<(f64, Arc<Slice>)> =
            missing.par_iter().map(|&t| self.solve(t).map(|p| (t, p))).collect::<Result<_, _>>()?;
        let mut map = self.map.write().unwrap();
        for (t, p) in solved {
            map.insert(t.to_bits(), p);
        }
        Ok(())
    }

    /// Value and residual at `ξ`, given `h'(t)`.
    pub fn eval(&self, t: f64, xi: f64, h_dot: f64) -> Result<PieceEval, ConstructionError> {
        let fam = &self.family;
        let r = fam.r;
        let sl = self.slice(t)?;
        if xi <= -sl.zd {
            let f = fam.wave.nonlinearity();
            let [u, du] = fam.wave.eval(xi);
            let g = fam.gamma / t;
            let v = u + g;
            let drift = (r / t - h_dot) * du;
            let (fu, fv) = (f.eval(u), f.eval(v));
            let n = drift - g / t + fu - fv;
            let scale = drift.abs() + g / t + fu.abs() + fv.abs();
            return Ok(PieceEval::closed_form(v, n, scale));
        }
        let z = xi + sl.zd;
        if z > sl.profile.z_max() {
            return Err(ConstructionError::Domain(format!("U_r(·; {t}) evaluated at {z} beyond its first zero")));
        }
        let [u, uz, ut, _] = sl.profile.eval(z);
        let shift = uz * (-r / t - h_dot + sl.zd_dot);
        // ∂t U_r comes from the sensitivity system, integrated at rtol 1e-12.
        Ok(PieceEval {
            value: u,
            rel_residual: (ut + shift) / u,
            rel_margin: 1e-8 * (ut.abs() + shift.abs()) / u.abs(),
        })
    }
}

/// `f(u)/u`, continued by `f'(0)` where `u` underflows.
pub(crate) fn f_over_u(f: &Nonlinearity, u: f64) -> f64 {
    if u.abs() < 1e-280 {
        f.slope_at_zero
    } else {
        f.eval(u) / u
    }
}

/// Central difference with a relative step, for smooth scalar coefficients.
pub(crate) fn d_dt(g: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-4 * t;
    (g(t - 2.0 * h) - 8.0 * g(t - h) + 8.0 * g(t + h) - g(t + 2.0 * h)) / (12.0 * h)
}

/// The `c = 2` wave of `f`, required to be in the given pulled regime.
pub(crate) fn pulled_wave(f: &Nonlinearity, regime: Regime) -> Result<WaveProfile, ConstructionError> {
    if (f.slope_at_zero - 1.0).abs() > 1e-12 {
        return Err(ConstructionError::Parameter("nonlinearity must be normalized to f'(0) = 1".into()));
    }
    let wave = solve_profile(f, 2.0, &WaveOptions::deep_tail())
        .map_err(|e| ConstructionError::Regime(format!("no monotone front at c = 2: {e}")))?;
    let found = extract_decay(&wave, f)?.regime;
    if found != regime {
        return Err(ConstructionError::Regime(format!("expected {regime:?}, found {found:?}")));
    }
    Ok(wave)
}

/// Shift a pulled wave so that `U ≈ e^{−z}` (fast decay, `A = 1`).
pub fn normalize_fast(wave: &WaveProfile) -> Result<WaveProfile, ConstructionError> {
    let (a, _) =
        wave.tail_coefficients().ok_or_else(|| ConstructionError::Regime("wave is not at the pulled speed".into()))?;
    if a <= 0.0 {
        return Err(ConstructionError::Regime(format!("tail amplitude A = {a} is not positive")));
    }
    Ok(wave.shifted(a.ln()))
}

/// Shift a pulled wave so that `U ≈ (z + A)e^{−z}` (slow decay, `B = 1`).
pub fn normalize_slow(wave: &WaveProfile) -> Result<(WaveProfile, f64), ConstructionError> {
    let (a, b) =
        wave.tail_coefficients().ok_or_else(|| ConstructionError::Regime("wave is not at the pulled speed".into()))?;
    if b <= 0.0 {
        return Err(ConstructionError::Regime(format!("tail slope B = {b} is not positive")));
    }
    let d = b.ln();
    Ok((wave.shifted(d), d + a / b))
}

/// `U_*(x − 2t)` as a trivial one-piece construction: `N ≡ 0`.
pub struct ExactWave {
    pub wave: WaveProfile,
}

impl ExactWave {
    /// `N[u]/u` at `(t, x)`, computed from the profile with finite differences
    /// in `t` and `x` of step `h`.
    pub fn residual_fd(&self, t: f64, x: f64, h: f64) -> f64 {
        let u = |t: f64, x: f64| self.wave.u(x - 2.0 * t);
        let f = self.wave.nonlinearity();
        let ut = (u(t - 2.0 * h, x) - 8.0 * u(t - h, x) + 8.0 * u(t + h, x) - u(t + 2.0 * h, x)) / (12.0 * h);
        let uxx = (-u(t, x - 2.0 * h) + 16.0 * u(t, x - h) - 30.0 * u(t, x) + 16.0 * u(t, x + h) - u(t, x + 2.0 * h))
            / (12.0 * h * h);
        (ut - uxx - f.eval(u(t, x))) / u(t, x)
    }
}
