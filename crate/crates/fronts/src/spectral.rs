//! The self-similar leading-edge equation
//!
//! `∂τ w = ∂yy w − (y²/16 − 3/4)w − κ e^{−τ/2}(∂y w − (y/4)w)`
//!
//! on `0 < y < y_max` with a Neumann or Dirichlet condition at `y = 0` and
//! `w = 0` at `y_max`, its ground-mode projection and the constant `W₁`.
//!
//! Crank–Nicolson in `τ`, second-order differences in `y`. The Neumann
//! condition is imposed with the one-sided stencil `w₀ = (4w₁ − w₂)/3`, so
//! the three-point boundary derivative vanishes to rounding.

use serde::{Deserialize, Serialize};

use crate::numerics::{fit_line, simpson, Tridiagonal};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("grid too coarse: dy = {dy} exceeds {limit} for y_max = {y_max}")]
    Coarse { dy: f64, limit: f64, y_max: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("τ = {tau} outside the computed range [0, {tau_end}]")]
    OutOfRange { tau: f64, tau_end: f64 },
    #[error("W₁ extrapolation not converged: successive estimates differ by {rel:.2e}")]
    NotConverged { rel: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub y_max: f64,
    pub dy: f64,
    pub dtau: f64,
    /// Frames are kept every `store_every` steps for later interpolation.
    pub store_every: usize,
}

impl Default for SpectralGrid {
    fn default() -> Self {
        SpectralGrid { y_max: 16.0, dy: 0.005, dtau: 1e-3, store_every: 20 }
    }
}

impl SpectralGrid {
    /// Resolution floor for the `y²/16` potential.
    pub fn dy_limit(&self) -> f64 {
        0.02 * (16.0 / (self.y_max * self.y_max)).sqrt()
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        if self.y_max < 12.0 {
            return Err(SpectralError::Grid("y_max must be at least 12".into()));
        }
        if !(self.dy > 0.0 && self.dtau > 0.0 && self.store_every > 0) {
            return Err(SpectralError::Grid("dy, dtau and store_every must be positive".into()));
        }
        let limit = self.dy_limit();
        if self.dy > limit * (1.0 + 1e-9) {
            return Err(SpectralError::Coarse { dy: self.dy, limit, y_max: self.y_max });
        }
        Ok(())
    }

    fn n_cells(&self) -> usize {
        (self.y_max / self.dy).round() as usize
    }
}

/// One snapshot of `w` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub tau: f64,
    pub dy: f64,
    pub bc: Boundary,
    pub values: Vec<f64>,
}

impl SpectralField {
    pub fn y(&self, i: usize) -> f64 {
        i as f64 * self.dy
    }

    /// Second-order one-sided derivative at `y = 0`.
    pub fn boundary_slope(&self) -> f64 {
        let v = &self.values;
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * self.dy)
    }
}

/// `L(τ)w` at interior node `i`.
#[inline]
fn apply_op(w: &[f64], i: usize, y: f64, dy: f64, drift: f64) -> f64 {
    let d2 = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (dy * dy);
    let d1 = (w[i + 1] - w[i - 1]) / (2.0 * dy);
    d2 - (y * y / 16.0 - 0.75) * w[i] - drift * (d1 - 0.25 * y * w[i])
}

fn close_boundary(w: &mut [f64], bc: Boundary) {
    let n = w.len() - 1;
    w[n] = 0.0;
    w[0] = match bc {
        Boundary::Dirichlet => 0.0,
        Boundary::Neumann => (4.0 * w[1] - w[2]) / 3.0,
    };
}

/// A completed run, with stored frames and their `τ`-derivatives for
/// Hermite interpolation in `τ`.
#[derive(Debug, Clone)]
pub struct WEvolution {
    pub bc: Boundary,
    pub coefficient: f64,
    pub grid: SpectralGrid,
    pub tau_end: f64,
    frame_dtau: f64,
    frames: Vec<Vec<f64>>,
    rates: Vec<Vec<f64>>,
}

fn rate(w: &[f64], tau: f64, grid: &SpectralGrid, coefficient: f64, bc: Boundary) -> Vec<f64> {
    let n = w.len() - 1;
    let drift = coefficient * (-0.5 * tau).exp();
    let mut out = vec![0.0; n + 1];
    for (i, o) in out.iter_mut().enumerate().take(n).skip(1) {
        *o = apply_op(w, i, i as f64 * grid.dy, grid.dy, drift);
    }
    // Keep the boundary row consistent with the elimination used in the solve.
    if bc == Boundary::Neumann {
        out[0] = (4.0 * out[1] - out[2]) / 3.0;
    }
    out
}

/// Weights of the derivatives of orders 0, 1, 2 at 0 from the values at
/// `offsets` (unit spacing), by Fornberg's recursion.
fn fd_weights(offsets: [f64; 5]) -> [[f64; 5]; 3] {
    let mut c = [[0.0; 5]; 3];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..5 {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            for m in (0..=i.min(2)).rev() {
                let prev_i = if m > 0 { c[m - 1][i - 1] } else { 0.0 };
                if j == i - 1 {
                    c[m][i] = c1 * (m as f64 * prev_i - offsets[i - 1] * c[m][i - 1]) / c2;
                }
                let prev_j = if m > 0 { c[m - 1][j] } else { 0.0 };
                c[m][j] = (offsets[i] * c[m][j] - m as f64 * prev_j) / c3;
            }
        }
        c1 = c2;
    }
    c
}

/// Runs the evolution and keeps every `store_every`-th frame.
pub fn run_w(
    bc: Boundary,
    coefficient: f64,
    w0: impl Fn(f64) -> f64,
    tau_end: f64,
    grid: &SpectralGrid,
) -> Result<WEvolution, SpectralError> {
    let mut frames = Vec::new();
    let mut rates = Vec::new();
    evolve(bc, coefficient, w0, tau_end, grid, |step, tau, w| {
        if step % grid.store_every == 0 {
            rates.push(rate(w, tau, grid, coefficient, bc));
            frames.push(w.to_vec());
        }
    })?;
    let frame_dtau = grid.dtau * grid.store_every as f64;
    let tau_end = (frames.len() - 1) as f64 * frame_dtau;
    Ok(WEvolution { bc, coefficient, grid: *grid, tau_end, frame_dtau, frames, rates })
}

/// Snapshots nearest to the requested `τ` values (rounded to the step).
pub fn evolve_w(
    bc: Boundary,
    coefficient: f64,
    w0: impl Fn(f64) -> f64,
    tau_end: f64,
    grid: &SpectralGrid,
    snapshot_taus: &[f64],
) -> Result<Vec<SpectralField>, SpectralError> {
    let wanted: Vec<usize> = snapshot_taus.iter().map(|t| (t / grid.dtau).round() as usize).collect();
    let mut out = Vec::new();
    evolve(bc, coefficient, w0, tau_end, grid, |step, tau, w| {
        if wanted.contains(&step) {
            out.push(SpectralField { tau, dy: grid.dy, bc, values: w.to_vec() });
        }
    })?;
    Ok(out)
}

fn evolve(
    bc: Boundary,
    coefficient: f64,
    w0: impl Fn(f64) -> f64,
    tau_end: f64,
    grid: &SpectralGrid,
    mut visit: impl FnMut(usize, f64, &[f64]),
) -> Result<(), SpectralError> {
    grid.validate()?;
    let n = grid.n_cells();
    let (dy, h) = (grid.dy, 0.5 * grid.dtau);
    let mut w: Vec<f64> = (0..=n).map(|i| w0(i as f64 * dy)).collect();
    close_boundary(&mut w, bc);
    let steps = (tau_end / grid.dtau).round() as usize;
    let m = n - 1;
    let (mut lo, mut diag, mut up, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    visit(0, 0.0, &w);
    for step in 1..=steps {
        let tau0 = (step - 1) as f64 * grid.dtau;
        let tau1 = step as f64 * grid.dtau;
        let drift0 = coefficient * (-0.5 * tau0).exp();
        let drift1 = coefficient * (-0.5 * tau1).exp();
        for i in 1..n {
            let y = i as f64 * dy;
            rhs[i - 1] = w[i] + h * apply_op(&w, i, y, dy, drift0);
            let a = 1.0 / (dy * dy) + drift1 / (2.0 * dy);
            let b = -2.0 / (dy * dy) - (y * y / 16.0 - 0.75) + 0.25 * drift1 * y;
            let c = 1.0 / (dy * dy) - drift1 / (2.0 * dy);
            lo[i - 1] = -h * a;
            diag[i - 1] = 1.0 - h * b;
            up[i - 1] = -h * c;
        }
        if bc == Boundary::Neumann {
            // Substitute w₀ = (4w₁ − w₂)/3 into the first row.
            let a1 = -lo[0];
            diag[0] -= a1 * 4.0 / 3.0;
            up[0] += a1 / 3.0;
        }
        lo[0] = 0.0;
        up[m - 1] = 0.0;
        Tridiagonal::new(lo.clone(), diag.clone(), up.clone()).solve_in_place(&mut rhs);
        w[1..n].copy_from_slice(&rhs);
        close_boundary(&mut w, bc);
        visit(step, tau1, &w);
    }
    Ok(())
}

impl WEvolution {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, k: usize) -> SpectralField {
        SpectralField { tau: k as f64 * self.frame_dtau, dy: self.grid.dy, bc: self.bc, values: self.frames[k].clone() }
    }

    /// Stored frame closest to `tau`.
    pub fn field_at(&self, tau: f64) -> SpectralField {
        let k = ((tau / self.frame_dtau).round() as usize).min(self.frames.len() - 1);
        self.frame(k)
    }

    /// `w(τ, y)`: cubic Hermite in `τ`, cubic Lagrange in `y`; zero past `y_max`.
    pub fn eval(&self, tau: f64, y: f64) -> Result<f64, SpectralError> {
        if !(0.0..=self.tau_end + 1e-12).contains(&tau) {
            return Err(SpectralError::OutOfRange { tau, tau_end: self.tau_end });
        }
        let n = self.frames[0].len() - 1;
        let dy = self.grid.dy;
        if y >= n as f64 * dy {
            return Ok(0.0);
        }
        let y = y.max(0.0);
        let k = ((tau / self.frame_dtau).floor() as usize).min(self.frames.len() - 2);
        let s = (tau - k as f64 * self.frame_dtau) / self.frame_dtau;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        let at = |i: usize| {
            h00 * self.frames[k][i]
                + h10 * self.frame_dtau * self.rates[k][i]
                + h01 * self.frames[k + 1][i]
                + h11 * self.frame_dtau * self.rates[k + 1][i]
        };
        let j = ((y / dy).floor() as usize).min(n - 1);
        let i0 = j.saturating_sub(1).min(n - 3);
        let xs = [0, 1, 2, 3].map(|d| (i0 + d) as f64 * dy);
        let vs = [0, 1, 2, 3].map(|d| at(i0 + d));
        let mut out = 0.0;
        for a in 0..4 {
            let mut l = 1.0;
            for b in 0..4 {
                if a != b {
                    l *= (y - xs[b]) / (xs[a] - xs[b]);
                }
            }
            out += l * vs[a];
        }
        Ok(out)
    }

    /// `P[w] = w_τ − w_yy + (y²/16 − 3/4)w + κe^{−τ/2}(w_y − yw/4)` of the
    /// interpolated solution by 5-point differences at the grid steps
    /// (one-sided near `y = 0`). Returns `[w, P, margin]` with
    /// `margin = c_fd(dy² + dτ²)·scale`.
    pub fn defect(&self, tau: f64, y: f64, c_fd: f64) -> Result<[f64; 3], SpectralError> {
        let (hy, ht) = (self.grid.dy, self.grid.dtau);
        let shift = (y / hy).floor().clamp(0.0, 2.0);
        let offsets: [f64; 5] = std::array::from_fn(|k| k as f64 - shift);
        let [_, d1, d2] = fd_weights(offsets);
        let mut ym = [0.0; 5];
        for (v, o) in ym.iter_mut().zip(offsets) {
            *v = self.eval(tau, y + o * hy)?;
        }
        let tm = [
            self.eval(tau - 2.0 * ht, y)?,
            self.eval(tau - ht, y)?,
            self.eval(tau + ht, y)?,
            self.eval(tau + 2.0 * ht, y)?,
        ];
        let dot = |w: &[f64; 5], c: &[f64; 5]| w.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        let wy = dot(&ym, &d1) / hy;
        let wyy = dot(&ym, &d2) / (hy * hy);
        let wt = (tm[0] - 8.0 * tm[1] + 8.0 * tm[2] - tm[3]) / (12.0 * ht);
        let v = self.eval(tau, y)?;
        let drift = self.coefficient * (-0.5 * tau).exp();
        let p = wt - wyy + (y * y / 16.0 - 0.75) * v + drift * (wy - 0.25 * y * v);
        let margin = c_fd * (hy * hy + ht * ht) * self.truncation_scale(tau, y);
        Ok([v, p, margin])
    }

    /// Local scale of `|∂y⁴w| + |∂τ²w|` near `(τ, y)`, from the stored grid.
    pub fn truncation_scale(&self, tau: f64, y: f64) -> f64 {
        let n = self.frames[0].len() - 1;
        let dy = self.grid.dy;
        let k = ((tau / self.frame_dtau).round() as usize).clamp(1, self.frames.len() - 2);
        let i = ((y / dy).round() as usize).clamp(3, n.saturating_sub(3).max(3));
        if i + 2 > n {
            return 0.0;
        }
        let w = &self.frames[k];
        let d4 = (w[i - 2] - 4.0 * w[i - 1] + 6.0 * w[i] - 4.0 * w[i + 1] + w[i + 2]) / dy.powi(4);
        let dtt = (self.rates[k + 1][i] - self.rates[k - 1][i]) / (2.0 * self.frame_dtau);
        d4.abs() + dtt.abs()
    }
}

/// Ground mode on the grid: `e^{−y²/8}` (Neumann) or `y e^{−y²/8}`
/// (Dirichlet), both unit-normalized by quadrature.
pub fn ground_mode(bc: Boundary, dy: f64, n_cells: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=n_cells)
        .map(|i| {
            let y = i as f64 * dy;
            let g = (-y * y / 8.0).exp();
            if bc == Boundary::Neumann {
                g
            } else {
                y * g
            }
        })
        .collect();
    let norm = simpson(&raw.iter().map(|v| v * v).collect::<Vec<_>>(), dy).sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}

/// `⟨a, b⟩` on `[0, y_max]` by Simpson's rule.
pub fn inner(a: &[f64], b: &[f64], dy: f64) -> f64 {
    simpson(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>(), dy)
}

/// The printed mode `(2π)^{−1/4} e^{−y²/8}`; its half-line norm² is `2^{−1/2}`.
pub fn paper_mode(y: f64) -> f64 {
    (2.0 * std::f64::consts::PI).powf(-0.25) * (-y * y / 8.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProjection {
    /// Against the unit-normalized mode.
    pub unit: f64,
    /// Against `(2π)^{−1/4}e^{−y²/8}` (Neumann only; zero for Dirichlet).
    pub printed: f64,
    /// Coefficient `W` with `w ≈ W·shape`, shape `e^{−y²/8}` or `ye^{−y²/8}`.
    pub shape_coefficient: f64,
}

pub fn project_ground_mode(field: &SpectralField) -> ModeProjection {
    let n = field.values.len() - 1;
    let mode = ground_mode(field.bc, field.dy, n);
    let unit = inner(&mode, &field.values, field.dy);
    let shape: Vec<f64> = (0..=n)
        .map(|i| {
            let y = field.y(i);
            let g = (-y * y / 8.0).exp();
            if field.bc == Boundary::Neumann {
                g
            } else {
                y * g
            }
        })
        .collect();
    let shape_coefficient = inner(&shape, &field.values, field.dy) / inner(&shape, &shape, field.dy);
    let printed = if field.bc == Boundary::Neumann {
        let p: Vec<f64> = (0..=n).map(|i| paper_mode(field.y(i))).collect();
        inner(&p, &field.values, field.dy)
    } else {
        0.0
    };
    ModeProjection { unit, printed, shape_coefficient }
}

/// `M₁ψ = −ψ'' + (y²/16 − 1/4)ψ`, even reflection at `y = 0`, zero at `y_max`.
pub fn discrete_m1(psi: &[f64], dy: f64) -> Vec<f64> {
    let n = psi.len() - 1;
    let mut out = vec![0.0; n + 1];
    for i in 0..n {
        let y = i as f64 * dy;
        let left = if i == 0 { psi[1] } else { psi[i - 1] };
        out[i] = -(psi[i + 1] - 2.0 * psi[i] + left) / (dy * dy) + (y * y / 16.0 - 0.25) * psi[i];
    }
    out
}

/// `Q₁(ψ) = ∫ ψ'² + (y²/16 − 1/4)ψ²`, with a midpoint rule for `ψ'²`.
pub fn quadratic_form_q1(psi: &[f64], dy: f64) -> f64 {
    let n = psi.len() - 1;
    let grad: f64 = (0..n).map(|i| ((psi[i + 1] - psi[i]) / dy).powi(2)).sum::<f64>() * dy;
    let pot: Vec<f64> = (0..=n)
        .map(|i| {
            let y = i as f64 * dy;
            (y * y / 16.0 - 0.25) * psi[i] * psi[i]
        })
        .collect();
    grad + simpson(&pot, dy)
}

/// Richardson elimination of `e^{−τ/2}` and then `e^{−τ}` from three
/// estimates at unit spacing. Returns `(two-term, one-term)` limits.
pub fn richardson_w1(w: [f64; 3]) -> (f64, f64) {
    let s = (-0.5f64).exp();
    let r1a = (w[1] - s * w[0]) / (1.0 - s);
    let r1b = (w[2] - s * w[1]) / (1.0 - s);
    let r2 = (r1b - s * s * r1a) / (1.0 - s * s);
    (r2, r1b)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub bc: Boundary,
    pub coefficient: f64,
    /// Extrapolated `W₁` in the shape convention (`w ≈ W₁·shape`).
    pub w1: f64,
    /// One-step extrapolation, kept as a convergence diagnostic.
    pub w1_one_term: f64,
    /// Raw estimates at `τ = 6, 7, 8`.
    pub w1_raw: [f64; 3],
    pub w1_relative_spread: f64,
    /// Ground-mode limit against the unit-normalized mode.
    pub phi1_unit: f64,
    /// Same limit against the printed `(2π)^{−1/4}e^{−y²/8}` (Neumann).
    pub phi1_printed: f64,
    pub convention: String,
    pub l: f64,
    /// `sup |w − W₁·profile|` (Neumann) or the normalized ratio (Dirichlet).
    pub k_l: f64,
    pub k_profile: Vec<(f64, f64)>,
    pub bounded: bool,
    /// Log-slope of the orthogonal component `‖φ̃(τ)‖` (Neumann).
    pub decay_slope: Option<f64>,
    pub pass: bool,
}

fn raw_w1(run: &WEvolution, tau: f64) -> f64 {
    let p = project_ground_mode(&run.field_at(tau));
    match run.bc {
        Boundary::Neumann => p.shape_coefficient * (-0.5 * tau).exp(),
        Boundary::Dirichlet => p.shape_coefficient,
    }
}

fn extrapolated_w1(run: &WEvolution) -> Result<(f64, f64, [f64; 3]), SpectralError> {
    if run.tau_end < 8.0 - 1e-9 {
        return Err(SpectralError::OutOfRange { tau: 8.0, tau_end: run.tau_end });
    }
    let raw = [raw_w1(run, 6.0), raw_w1(run, 7.0), raw_w1(run, 8.0)];
    let (w1, one) = richardson_w1(raw);
    let rel = ((w1 - one) / w1).abs();
    if rel > 0.05 {
        return Err(SpectralError::NotConverged { rel });
    }
    Ok((w1, one, raw))
}

/// `W₁` as used downstream: Richardson from `τ ∈ {6, 7, 8}`.
pub fn estimate_w1(run: &WEvolution) -> Result<f64, SpectralError> {
    Ok(extrapolated_w1(run)?.0)
}

/// Neumann run: `W₁`, `K(L)` over `τ ∈ [1, τ_end]` and the decay of the
/// orthogonal component of `φ = e^{−τ/2}w`.
pub fn verify_neumann_decay(run: &WEvolution, l: f64) -> Result<DecayReport, SpectralError> {
    if run.bc != Boundary::Neumann {
        return Err(SpectralError::Grid("expected a Neumann run".into()));
    }
    let (w1, one, raw) = extrapolated_w1(run)?;
    let dy = run.grid.dy;
    let n = run.frames[0].len() - 1;
    let mode = ground_mode(Boundary::Neumann, dy, n);
    let i_l = ((l / dy).round() as usize).min(n);
    let mut k_profile = Vec::new();
    let mut orth = Vec::new();
    for k in 0..run.n_frames() {
        let tau = k as f64 * run.frame_dtau;
        if tau < 1.0 - 1e-12 {
            continue;
        }
        let w = &run.frames[k];
        let g = (0.5 * tau).exp();
        let dev = (0..=i_l)
            .map(|i| {
                let y = i as f64 * dy;
                (w[i] - w1 * (-y * y / 8.0).exp() * g).abs()
            })
            .fold(0.0, f64::max);
        k_profile.push((tau, dev));
        let phi: Vec<f64> = w.iter().map(|v| v / g).collect();
        let c = inner(&mode, &phi, dy);
        let rest: Vec<f64> = phi.iter().zip(&mode).map(|(p, m)| p - c * m).collect();
        orth.push((tau, inner(&rest, &rest, dy).sqrt()));
    }
    let k_l = k_profile.iter().map(|p| p.1).fold(0.0, f64::max);
    let mid = 0.5 * (1.0 + run.tau_end);
    let early = k_profile.iter().filter(|p| p.0 <= mid).map(|p| p.1).fold(0.0, f64::max);
    let late = k_profile.iter().filter(|p| p.0 > mid).map(|p| p.1).fold(0.0, f64::max);
    let bounded = late <= 1.5 * early;
    let tail: Vec<&(f64, f64)> = orth.iter().filter(|p| p.0 >= 0.5 * run.tau_end).collect();
    let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    let slope = fit_line(&xs, &ys).slope;
    let proj = project_ground_mode(&run.field_at(run.tau_end));
    let g_end = (-0.5 * run.tau_end).exp();
    let rel = ((w1 - one) / w1).abs();
    Ok(DecayReport {
        bc: Boundary::Neumann,
        coefficient: run.coefficient,
        w1,
        w1_one_term: one,
        w1_raw: raw,
        w1_relative_spread: rel,
        phi1_unit: proj.unit * g_end,
        phi1_printed: proj.printed * g_end,
        convention: "w1 multiplies exp(-y^2/8)exp(tau/2); phi1_unit uses the unit-normalized mode, phi1_printed uses (2pi)^(-1/4)exp(-y^2/8)".into(),
        l,
        k_l,
        k_profile,
        bounded,
        decay_slope: Some(slope),
        pass: rel < 0.01 && bounded && slope <= -0.45,
    })
}

/// Dirichlet run: `W₁` and the ratio `|w − W₁ye^{−y²/8}|/(ye^{−τ/2})` at
/// `τ ∈ {2, 4, 8}`, plus the global bound `w ≤ e^{τ}e^{y²/8}`.
pub fn verify_dirichlet_decay(run: &WEvolution, l: f64) -> Result<DecayReport, SpectralError> {
    if run.bc != Boundary::Dirichlet {
        return Err(SpectralError::Grid("expected a Dirichlet run".into()));
    }
    let (w1, one, raw) = extrapolated_w1(run)?;
    let dy = run.grid.dy;
    let n = run.frames[0].len() - 1;
    let i_l = ((l / dy).round() as usize).min(n);
    let mut k_profile = Vec::new();
    for &tau in &[2.0, 4.0, 8.0] {
        let f = run.field_at(tau);
        let ratio = (1..=i_l)
            .map(|i| {
                let y = i as f64 * dy;
                (f.values[i] - w1 * y * (-y * y / 8.0).exp()).abs() / (y * (-0.5 * tau).exp())
            })
            .fold(0.0, f64::max);
        k_profile.push((tau, ratio));
    }
    let mut dominated = true;
    for k in 0..run.n_frames() {
        let tau = k as f64 * run.frame_dtau;
        let w = &run.frames[k];
        for (i, &v) in w.iter().enumerate() {
            let y = i as f64 * dy;
            if v > tau.exp() * (y * y / 8.0).exp() {
                dominated = false;
            }
        }
    }
    let k_l = k_profile.iter().map(|p| p.1).fold(0.0, f64::max);
    // Saturation test at τ = 2, 4, 8: growth linear in τ would double the
    // increment over the longer interval; a bounded approach shrinks it.
    let (r2, r4, r8) = (k_profile[0].1, k_profile[1].1, k_profile[2].1);
    let bounded = r8 - r4 < r4 - r2 + 1e-9 * r8 && dominated;
    let proj = project_ground_mode(&run.field_at(run.tau_end));
    let rel = ((w1 - one) / w1).abs();
    Ok(DecayReport {
        bc: Boundary::Dirichlet,
        coefficient: run.coefficient,
        w1,
        w1_one_term: one,
        w1_raw: raw,
        w1_relative_spread: rel,
        phi1_unit: proj.unit,
        phi1_printed: 0.0,
        convention: "w1 multiplies y*exp(-y^2/8); phi1_unit uses the unit-normalized Dirichlet mode".into(),
        l,
        k_l,
        k_profile,
        bounded,
        decay_slope: None,
        pass: rel < 0.01 && bounded,
    })
}

#[cfg(test)]
mod tests {
    #[test]
    fn fornberg_weights_match_known_stencils() {
        let [_, d1, d2] = fd_weights([-2.0, -1.0, 0.0, 1.0, 2.0]);
        let e1 = [1.0, -8.0, 0.0, 8.0, -1.0].map(|v| v / 12.0);
        let e2 = [-1.0, 16.0, -30.0, 16.0, -1.0].map(|v| v / 12.0);
        for k in 0..5 {
            assert!((d1[k] - e1[k]).abs() < 1e-13 && (d2[k] - e2[k]).abs() < 1e-13);
        }
        // One-sided second derivative is exact on quartics.
        let [_, _, d2] = fd_weights([0.0, 1.0, 2.0, 3.0, 4.0]);
        let q = |x: f64| x.powi(4) - 2.0 * x * x;
        let approx: f64 = (0..5).map(|k| d2[k] * q(k as f64)).sum();
        assert!((approx - -4.0).abs() < 1e-10, "{approx}");
    }

    use super::*;

    fn g(y: f64) -> f64 {
        (-y * y / 8.0).exp()
    }

    #[test]
    fn neumann_mode_grows_like_exp_half_tau_without_drift() {
        let grid = SpectralGrid { dy: 0.005, dtau: 2e-3, ..Default::default() };
        let snaps = evolve_w(Boundary::Neumann, 0.0, g, 2.0, &grid, &[2.0]).unwrap();
        let s = &snaps[0];
        let e = (1.0f64).exp();
        let err = (0..s.values.len()).map(|i| (s.values[i] - e * g(s.y(i))).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
        assert!(s.boundary_slope().abs() < 1e-8);
    }

    #[test]
    fn dirichlet_mode_is_stationary_without_drift() {
        let grid = SpectralGrid::default();
        let snaps = evolve_w(Boundary::Dirichlet, 0.0, |y| y * g(y), 1.0, &grid, &[1.0]).unwrap();
        let s = &snaps[0];
        assert_eq!(s.values[0], 0.0);
        let err = (0..s.values.len()).map(|i| (s.values[i] - s.y(i) * g(s.y(i))).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn printed_mode_has_norm_squared_inverse_sqrt_two() {
        let dy = 0.005;
        let p: Vec<f64> = (0..=3200).map(|i| paper_mode(i as f64 * dy)).collect();
        assert!((inner(&p, &p, dy) - 0.5f64.sqrt()).abs() < 1e-10);
        let m = ground_mode(Boundary::Neumann, dy, 3200);
        assert!((inner(&m, &m, dy) - 1.0).abs() < 1e-12);
        let second: Vec<f64> = (0..=3200)
            .map(|i| {
                let y = i as f64 * dy;
                (y * y / 4.0 - 0.5) * g(y)
            })
            .collect();
        assert!(inner(&m, &second, dy).abs() < 1e-8);
    }

    #[test]
    fn grid_resolution_guard() {
        let grid = SpectralGrid { dy: 0.02, ..Default::default() };
        assert!(matches!(grid.validate(), Err(SpectralError::Coarse { .. })));
    }

    #[test]
    fn richardson_removes_both_corrections() {
        let f = |t: f64| 3.0 + 0.7 * (-0.5 * t).exp() - 0.2 * (-t).exp();
        let (w, _) = richardson_w1([f(6.0), f(7.0), f(8.0)]);
        assert!((w - 3.0).abs() < 1e-12);
    }
}
