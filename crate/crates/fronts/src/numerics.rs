//! Small scalar and banded-matrix helpers shared by the solvers.

/// Brent's method on a bracketing interval. Returns `None` if `f(a)` and
/// `f(b)` have the same strict sign.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
    }
    Some(b)
}

/// Golden-section search for the maximizer of a unimodal function on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Ordinary least squares for `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub max_abs: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    let mut max_abs: f64 = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - slope * x - intercept;
        ss += r * r;
        max_abs = max_abs.max(r.abs());
    }
    LineFit { slope, intercept, rms: (ss / n).sqrt(), max_abs }
}

/// Constant-coefficient tridiagonal system `lo·x[i-1] + diag·x[i] + up·x[i+1]`,
/// factored once and reused for many right-hand sides.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lo: Vec<f64>,
    up_mod: Vec<f64>,
    inv_piv: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lo: Vec<f64>, diag: Vec<f64>, up: Vec<f64>) -> Self {
        let n = diag.len();
        assert!(lo.len() == n && up.len() == n && n > 0);
        let mut up_mod = vec![0.0; n];
        let mut inv_piv = vec![0.0; n];
        let mut piv = diag[0];
        inv_piv[0] = 1.0 / piv;
        up_mod[0] = up[0] * inv_piv[0];
        for i in 1..n {
            piv = diag[i] - lo[i] * up_mod[i - 1];
            inv_piv[i] = 1.0 / piv;
            up_mod[i] = up[i] * inv_piv[i];
        }
        Tridiagonal { lo, up_mod, inv_piv }
    }

    pub fn constant(n: usize, lo: f64, diag: f64, up: f64) -> Self {
        Self::new(vec![lo; n], vec![diag; n], vec![up; n])
    }

    pub fn len(&self) -> usize {
        self.inv_piv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_piv.is_empty()
    }

    /// Solves in place: `rhs` becomes the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        rhs[0] *= self.inv_piv[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lo[i] * rhs[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.up_mod[i] * rhs[i + 1];
        }
    }
}

/// Composite Simpson rule on a uniform grid (odd number of nodes required;
/// the last interval falls back to the trapezoid rule otherwise).
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = if n % 2 == 1 { n } else { n - 1 };
    let mut s = values[0] + values[m - 1];
    for (i, v) in values.iter().enumerate().take(m - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = s * h / 3.0;
    if m < n {
        total += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    total
}

/// Quintic smoothstep: 0 for x ≤ 0, 1 for x ≥ 1, C² in between.
pub fn smoothstep(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        [0.0, 0.0, 0.0]
    } else if x >= 1.0 {
        [1.0, 0.0, 0.0]
    } else {
        let x2 = x * x;
        let s = x2 * x * (10.0 - 15.0 * x + 6.0 * x2);
        let ds = 30.0 * x2 * (1.0 - x) * (1.0 - x);
        let d2s = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
        [s, ds, d2s]
    }
}
