//! Dormand–Prince 5(4) integrator with continuous output and terminal events.
//!
//! All ODE work in the crate (wave shooting, slowed-speed profiles and their
//! sensitivities) goes through [`integrate`]. States are small fixed-size
//! arrays, so everything stays on the stack.

use crate::numerics::brent;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { rtol: 1e-12, atol: 1e-24, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

impl Options {
    pub fn tol(rtol: f64, atol: f64) -> Self {
        Options { rtol, atol, ..Default::default() }
    }
}

/// One accepted step with the coefficients of its quartic interpolant.
#[derive(Debug, Clone)]
struct Segment<const N: usize> {
    t0: f64,
    h: f64,
    rc: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut y = [0.0; N];
        for i in 0..N {
            let r = &self.rc;
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        y
    }
}

/// Which terminal event stopped the integration, and where.
#[derive(Debug, Clone, Copy)]
pub struct EventHit<const N: usize> {
    pub index: usize,
    pub t: f64,
    pub y: [f64; N],
}

/// Dense solution on `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    segs: Vec<Segment<N>>,
    t_start: f64,
    y_start: [f64; N],
    t_end: f64,
    y_end: [f64; N],
    pub event: Option<EventHit<N>>,
}

impl<const N: usize> Trajectory<N> {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn y_end(&self) -> [f64; N] {
        self.y_end
    }

    pub fn n_steps(&self) -> usize {
        self.segs.len()
    }

    /// Interpolated state, clamped to the integrated interval.
    pub fn eval(&self, t: f64) -> [f64; N] {
        if t <= self.t_start || self.segs.is_empty() {
            return self.y_start;
        }
        if t >= self.t_end {
            return self.y_end;
        }
        let k = self.segs.partition_point(|s| s.t0 <= t);
        self.segs[k.saturating_sub(1)].eval(t)
    }

    /// Step endpoints `(t, y)`, including the start.
    pub fn nodes(&self) -> Vec<(f64, [f64; N])> {
        let mut out = Vec::with_capacity(self.segs.len() + 1);
        out.push((self.t_start, self.y_start));
        for (i, s) in self.segs.iter().enumerate() {
            let t1 = if i + 1 == self.segs.len() { self.t_end } else { s.t0 + s.h };
            out.push((t1, s.eval(t1)));
        }
        out
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Event function: a sign change between consecutive steps stops the run.
pub type EventFn<'a, const N: usize> = &'a dyn Fn(f64, &[f64; N]) -> f64;

/// Integrates `y' = rhs(t, y)` forward from `t0` to `t_end` (or until an event).
pub fn integrate<const N: usize, F>(
    rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &Options,
    events: &[EventFn<'_, N>],
) -> Result<Trajectory<N>, OdeError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    assert!(t_end > t0, "integration runs forward only");
    let scale = |a: &[f64; N], b: &[f64; N], i: usize| {
        (opts.atol + opts.rtol * a[i].abs().max(b[i].abs())).max(f64::MIN_POSITIVE)
    };
    let norm = |v: &[f64; N], sk: &dyn Fn(usize) -> f64| {
        (v.iter().enumerate().map(|(i, x)| (x / sk(i)).powi(2)).sum::<f64>() / N as f64).sqrt()
    };

    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    let mut h = {
        let d0 = norm(&y, &|i| scale(&y0, &y0, i));
        let d1 = norm(&k1, &|i| scale(&y0, &y0, i));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(t_end - t0);
        let k2 = rhs(t0 + h0, &axpy(&y0, h0, &[(1.0, &k1)]));
        let dk: [f64; N] = std::array::from_fn(|i| k2[i] - k1[i]);
        let d2 = norm(&dk, &|i| scale(&y0, &y0, i)) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).max(1e-10 * (t_end - t0)).min(t_end - t0).min(opts.h_max)
    };
    let mut g_prev: Vec<f64> = events.iter().map(|g| g(t, &y)).collect();
    let mut segs = Vec::new();
    let mut rejected = false;

    for _ in 0..opts.max_steps {
        if t >= t_end {
            break;
        }
        if t + h > t_end {
            h = t_end - t;
        }
        if h <= 4.0 * f64::EPSILON * t.abs() || h < 1e-300 {
            return Err(OdeError::StepUnderflow { t });
        }
        let k2 = rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = rhs(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = rhs(t + h, &y1);
        let mut errv = [0.0; N];
        for i in 0..N {
            errv[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = norm(&errv, &|i| scale(&y, &y1, i));
        if !err.is_finite() || y1.iter().any(|v| !v.is_finite()) {
            if h < 1e-12 {
                return Err(OdeError::NonFinite { t });
            }
            h *= 0.1;
            rejected = true;
            continue;
        }
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            rejected = true;
            continue;
        }

        let mut rc = [[0.0; N]; 5];
        for i in 0..N {
            let dy = y1[i] - y[i];
            let bspl = h * k1[i] - dy;
            rc[0][i] = y[i];
            rc[1][i] = dy;
            rc[2][i] = bspl;
            rc[3][i] = dy - h * k7[i] - bspl;
            rc[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let seg = Segment { t0: t, h, rc };

        // Earliest sign change among the event functions.
        let mut hit: Option<(usize, f64)> = None;
        for (j, g) in events.iter().enumerate() {
            let g1 = g(t + h, &y1);
            let g0 = g_prev[j];
            let crosses = (g0 > 0.0 && g1 <= 0.0) || (g0 < 0.0 && g1 >= 0.0);
            if crosses {
                let tr = brent(|s| g(s, &seg.eval(s)), t, t + h, 1e-15 * (t + h).abs().max(1.0)).unwrap_or(t + h);
                if hit.is_none_or(|(_, th)| tr < th) {
                    hit = Some((j, tr));
                }
            }
            g_prev[j] = g1;
        }
        segs.push(seg);
        if let Some((index, te)) = hit {
            let ye = segs.last().unwrap().eval(te);
            return Ok(Trajectory {
                segs,
                t_start: t0,
                y_start: y0,
                t_end: te,
                y_end: ye,
                event: Some(EventHit { index, t: te, y: ye }),
            });
        }

        t += h;
        y = y1;
        k1 = k7;
        let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
        if rejected {
            fac = fac.min(1.0);
        }
        rejected = false;
        h = (h * fac).min(opts.h_max);
    }
    if t < t_end {
        return Err(OdeError::TooManySteps { t });
    }
    Ok(Trajectory { segs, t_start: t0, y_start: y0, t_end: t, y_end: y, event: None })
}
