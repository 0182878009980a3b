//! Monostable reaction terms `f` with `f(0) = f(1) = 0` and `f'(0) > 0 > f'(1)`.

use crate::numerics::smoothstep;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReactionError {
    #[error("cubic family parameter must be nonnegative, got a = {0}")]
    NegativeA(f64),
    #[error("linear-cut width must lie in (0, 0.25], got {0}")]
    BadDelta(f64),
    #[error("table needs at least 4 points starting at u = 0 and ending at u = 1")]
    BadTable,
    #[error("table values must vanish at u = 0 and u = 1")]
    TableEndpoints,
    #[error("not monostable: {0}")]
    NotMonostable(String),
    #[error("slope at zero must be positive, got {0}")]
    NonPositiveSlope(f64),
}

/// Natural cubic spline through `(u_i, f_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut lo = vec![0.0; k];
            let mut diag = vec![0.0; k];
            let mut up = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                lo[i - 1] = h0;
                diag[i - 1] = 2.0 * (h0 + h1);
                up[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            crate::numerics::Tridiagonal::new(lo, diag, up).solve_in_place(&mut rhs);
            m[1..n - 1].copy_from_slice(&rhs);
        }
        Spline { x, y, m }
    }

    fn locate(&self, u: f64) -> usize {
        let k = self.x.partition_point(|&xi| xi <= u);
        k.clamp(1, self.x.len() - 1) - 1
    }

    /// Value and first two derivatives; linear extension outside the nodes.
    pub fn eval3(&self, u: f64) -> [f64; 3] {
        let n = self.x.len();
        if u == self.x[0] {
            let d = self.eval3_interior(u, 0)[1];
            return [self.y[0], d, self.m[0]];
        }
        if u == self.x[n - 1] {
            let d = self.eval3_interior(u, n - 2)[1];
            return [self.y[n - 1], d, self.m[n - 1]];
        }
        if u < self.x[0] {
            let d = self.eval3_interior(self.x[0], 0)[1];
            return [self.y[0] + d * (u - self.x[0]), d, 0.0];
        }
        if u > self.x[n - 1] {
            let d = self.eval3_interior(self.x[n - 1], n - 2)[1];
            return [self.y[n - 1] + d * (u - self.x[n - 1]), d, 0.0];
        }
        self.eval3_interior(u, self.locate(u))
    }

    fn eval3_interior(&self, u: f64, i: usize) -> [f64; 3] {
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - u) / h;
        let b = (u - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (self.y[i + 1] - self.y[i]) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dd = a * m0 + b * m1;
        [v, d, dd]
    }
}

/// How `f` is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `f(u) = u(1−u)q(u)`, with `q` given by ascending polynomial coefficients.
    Factored { q: Vec<f64> },
    /// `f(s) = s` on `[0, δ]`, blended by a quintic smoothstep on `[δ, 2δ]`
    /// into `s(1−s)(1+as)`.
    LinearCut { delta: f64, a: f64 },
    /// Natural cubic spline through tabulated data.
    Table(Spline),
    /// `inner / divisor`.
    Scaled { inner: Box<Shape>, divisor: f64 },
}

fn poly3(q: &[f64], u: f64) -> [f64; 3] {
    let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
    for &c in q.iter().rev() {
        ddp = ddp * u + 2.0 * dp;
        dp = dp * u + p;
        p = p * u + c;
    }
    [p, dp, ddp]
}

impl Shape {
    fn eval3(&self, u: f64) -> [f64; 3] {
        match self {
            Shape::Factored { q } => {
                let [p, dp, ddp] = poly3(q, u);
                let g = u * (1.0 - u);
                let dg = 1.0 - 2.0 * u;
                [g * p, dg * p + g * dp, -2.0 * p + 2.0 * dg * dp + g * ddp]
            }
            Shape::LinearCut { delta, a } => {
                let tail = Shape::Factored { q: vec![1.0, *a] };
                if u <= *delta {
                    return [u, 1.0, 0.0];
                }
                let [g, dg, ddg] = tail.eval3(u);
                if u >= 2.0 * delta {
                    return [g, dg, ddg];
                }
                let [s, ds, dds] = smoothstep((u - delta) / delta);
                let (ds, dds) = (ds / delta, dds / (delta * delta));
                let e = g - u;
                let de = dg - 1.0;
                [u + e * s, 1.0 + de * s + e * ds, ddg * s + 2.0 * de * ds + e * dds]
            }
            Shape::Table(sp) => sp.eval3(u),
            Shape::Scaled { inner, divisor } => {
                let [v, d, dd] = inner.eval3(u);
                [v / divisor, d / divisor, dd / divisor]
            }
        }
    }
}

/// A monostable reaction term with cached constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    pub label: String,
    shape: Shape,
    /// f'(0)
    pub slope_at_zero: f64,
    /// f'(1)
    pub slope_at_one: f64,
    /// sup |f'| on [0, 1]
    pub sup_d1: f64,
    /// sup |f''| on [0, 1]
    pub sup_d2: f64,
    /// The cubic-family parameter, when built by [`Nonlinearity::cubic`].
    pub cubic_a: Option<f64>,
}

/// Rescaling `t̃ = time_factor·t`, `x̃ = space_factor·x` that maps a general
/// `f` to one with unit slope at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingMap {
    pub time_factor: f64,
    pub space_factor: f64,
}

impl ScalingMap {
    pub fn identity() -> Self {
        ScalingMap { time_factor: 1.0, space_factor: 1.0 }
    }

    /// A drift coefficient measured in the normalized frame, expressed in the
    /// original variables: `x = x̃/√f'(0)` and `ln t = ln t̃ + const`.
    pub fn drift_to_original(&self, r_normalized: f64) -> f64 {
        r_normalized / self.space_factor
    }
}

impl Nonlinearity {
    fn from_shape(label: String, shape: Shape, cubic_a: Option<f64>) -> Result<Self, ReactionError> {
        let [_, d0, _] = shape.eval3(0.0);
        let [_, d1, _] = shape.eval3(1.0);
        let n = 20_000;
        let (mut s1, mut s2): (f64, f64) = (0.0, 0.0);
        for i in 0..=n {
            let [_, d, dd] = shape.eval3(i as f64 / n as f64);
            s1 = s1.max(d.abs());
            s2 = s2.max(dd.abs());
        }
        let f = Nonlinearity { label, shape, slope_at_zero: d0, slope_at_one: d1, sup_d1: s1, sup_d2: s2, cubic_a };
        f.check_monostable()?;
        Ok(f)
    }

    fn check_monostable(&self) -> Result<(), ReactionError> {
        if self.eval(0.0) != 0.0 || self.eval(1.0) != 0.0 {
            return Err(ReactionError::NotMonostable("nonzero endpoint value".into()));
        }
        if !(self.slope_at_zero > 0.0 && self.slope_at_one < 0.0) {
            return Err(ReactionError::NotMonostable(format!(
                "f'(0) = {}, f'(1) = {}",
                self.slope_at_zero, self.slope_at_one
            )));
        }
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            if self.eval(u) <= 0.0 {
                return Err(ReactionError::NotMonostable(format!("f({u}) ≤ 0")));
            }
        }
        Ok(())
    }

    /// `f_a(u) = u(1−u)(1+au)`.
    pub fn cubic(a: f64) -> Result<Self, ReactionError> {
        if a.is_nan() || a < 0.0 {
            return Err(ReactionError::NegativeA(a));
        }
        let mut f = Self::from_shape(format!("cubic(a={a})"), Shape::Factored { q: vec![1.0, a] }, Some(a))?;
        f.slope_at_one = -(1.0 + a);
        f.slope_at_zero = 1.0;
        Ok(f)
    }

    /// `u(1−u)q(u)` for ascending coefficients `q`.
    pub fn factored(q: Vec<f64>) -> Result<Self, ReactionError> {
        Self::from_shape(format!("factored({q:?})"), Shape::Factored { q }, None)
    }

    /// Exactly linear near zero, see [`Shape::LinearCut`].
    pub fn linear_cut(delta: f64, a: f64) -> Result<Self, ReactionError> {
        if !(delta > 0.0 && delta <= 0.25) {
            return Err(ReactionError::BadDelta(delta));
        }
        if a.is_nan() || a < 0.0 {
            return Err(ReactionError::NegativeA(a));
        }
        Self::from_shape(format!("linear_cut(delta={delta}, a={a})"), Shape::LinearCut { delta, a }, None)
    }

    /// Spline through tabulated `(u, f(u))` pairs sorted by `u` from 0 to 1.
    pub fn table(u: Vec<f64>, f: Vec<f64>) -> Result<Self, ReactionError> {
        if u.len() < 4 || u.len() != f.len() || u[0] != 0.0 || *u.last().unwrap() != 1.0 {
            return Err(ReactionError::BadTable);
        }
        if u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ReactionError::BadTable);
        }
        if f[0] != 0.0 || *f.last().unwrap() != 0.0 {
            return Err(ReactionError::TableEndpoints);
        }
        Self::from_shape(format!("table({} points)", u.len()), Shape::Table(Spline::new(u, f)), None)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.eval3(u)[0]
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        self.eval3(u)[1]
    }

    #[inline]
    pub fn deriv2(&self, u: f64) -> f64 {
        self.eval3(u)[2]
    }

    /// `[f, f', f'']` at `u`.
    #[inline]
    pub fn eval3(&self, u: f64) -> [f64; 3] {
        self.shape.eval3(u)
    }

    /// The constant `K = ‖f''‖∞`.
    pub fn k_const(&self) -> f64 {
        self.sup_d2
    }

    /// Minimal speed of the linearization at zero, `2√f'(0)`.
    pub fn linear_speed(&self) -> f64 {
        2.0 * self.slope_at_zero.sqrt()
    }
}

/// True iff `u ↦ f(u)/u` is decreasing on a uniform grid of `(0, 1]`, with the
/// limit `f'(0)` at zero. Differences above `-1e-12` count as decreasing.
pub fn is_kpp(f: &Nonlinearity, n_samples: usize) -> bool {
    assert!(n_samples >= 100, "n_samples must be at least 100");
    let mut prev = f.slope_at_zero;
    for i in 1..=n_samples {
        let u = i as f64 / n_samples as f64;
        let r = f.eval(u) / u;
        if r - prev > 1e-12 {
            return false;
        }
        prev = r;
    }
    true
}

/// Divides `f` by `f'(0)` so the result has unit slope at zero. Already
/// normalized inputs come back unchanged with the identity map.
pub fn normalize_to_unit_slope(f: &Nonlinearity) -> Result<(Nonlinearity, ScalingMap), ReactionError> {
    let s = f.slope_at_zero;
    if s.is_nan() || s <= 0.0 {
        return Err(ReactionError::NonPositiveSlope(s));
    }
    if s == 1.0 {
        return Ok((f.clone(), ScalingMap::identity()));
    }
    let shape = Shape::Scaled { inner: Box::new(f.shape.clone()), divisor: s };
    let mut g = Nonlinearity::from_shape(format!("{}/{s}", f.label), shape, None)?;
    g.slope_at_zero = 1.0;
    g.slope_at_one = f.slope_at_one / s;
    Ok((g, ScalingMap { time_factor: s, space_factor: s.sqrt() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values_and_slopes() {
        let f = Nonlinearity::cubic(2.0).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(1.0), 0.0);
        assert_eq!(f.eval(0.5), 0.5);
        assert_eq!(f.slope_at_one, -3.0);
        let h = 1e-6;
        let fd = (f.eval(1.0 + h) - f.eval(1.0 - h)) / (2.0 * h);
        assert!((fd + 3.0).abs() < 1e-8);
        assert!((f.sup_d2 - 10.0).abs() < 1e-9);
        assert!(Nonlinearity::cubic(-0.1).is_err());
    }

    #[test]
    fn kpp_detection() {
        assert!(is_kpp(&Nonlinearity::cubic(1.0).unwrap(), 1000));
        assert!(is_kpp(&Nonlinearity::cubic(0.5).unwrap(), 1000));
        assert!(!is_kpp(&Nonlinearity::cubic(2.0).unwrap(), 1000));
    }

    #[test]
    fn normalization_of_scaled_logistic() {
        let f = Nonlinearity::factored(vec![4.0]).unwrap();
        let (g, map) = normalize_to_unit_slope(&f).unwrap();
        assert!((g.slope_at_zero - 1.0).abs() < 1e-14);
        assert!((g.deriv(0.0) - 1.0).abs() < 1e-14);
        assert!((g.eval(0.3) - 0.3 * 0.7).abs() < 1e-15);
        assert_eq!(map.time_factor, 4.0);
        assert_eq!(map.space_factor, 2.0);
        let (_, id) = normalize_to_unit_slope(&Nonlinearity::cubic(3.0).unwrap()).unwrap();
        assert_eq!(id, ScalingMap::identity());
    }

    #[test]
    fn linear_cut_is_linear_then_monostable() {
        let f = Nonlinearity::linear_cut(0.1, 0.5).unwrap();
        assert_eq!(f.eval(0.05), 0.05);
        assert_eq!(f.deriv(0.1), 1.0);
        assert_eq!(f.slope_at_one, -1.5);
        // C² across both joins.
        for &u in &[0.1, 0.2] {
            let l = f.eval3(u - 1e-11);
            let r = f.eval3(u + 1e-11);
            for k in 0..3 {
                assert!((l[k] - r[k]).abs() < 1e-6, "u={u} k={k}");
            }
        }
    }

    #[test]
    fn table_reproduces_smooth_data() {
        let n = 201;
        let u: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let v: Vec<f64> = u.iter().map(|&x| x * (1.0 - x)).collect();
        let f = Nonlinearity::table(u, v).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(1.0), 0.0);
        assert!((f.eval(0.3337) - 0.3337 * 0.6663).abs() < 1e-6);
        assert!((f.slope_at_zero - 1.0).abs() < 5e-3);
    }
}
