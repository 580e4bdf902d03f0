//! Cubic splines and Gauss–Legendre quadrature.

use std::sync::OnceLock;

/// End condition of a cubic spline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EndCondition {
    /// Prescribed first derivative.
    Clamped(f64),
    /// Zero second derivative.
    Natural,
}

/// Piecewise cubic interpolant with C² continuity.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    /// Requires at least two strictly increasing abscissae.
    pub fn new(x: Vec<f64>, y: Vec<f64>, left: EndCondition, right: EndCondition) -> Option<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        // tridiagonal system for the second derivatives
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            sub[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            sup[i] = h1 / 6.0;
            rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        }
        let h = x[1] - x[0];
        match left {
            EndCondition::Natural => {
                diag[0] = 1.0;
            }
            EndCondition::Clamped(d) => {
                diag[0] = h / 3.0;
                sup[0] = h / 6.0;
                rhs[0] = (y[1] - y[0]) / h - d;
            }
        }
        let h = x[n - 1] - x[n - 2];
        match right {
            EndCondition::Natural => {
                diag[n - 1] = 1.0;
            }
            EndCondition::Clamped(d) => {
                sub[n - 1] = h / 6.0;
                diag[n - 1] = h / 3.0;
                rhs[n - 1] = d - (y[n - 1] - y[n - 2]) / h;
            }
        }
        let m = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
        Some(Self { x, y, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.m[i] + (3.0 * b * b - 1.0) / 6.0 * h * self.m[i + 1]
    }
}

/// Thomas algorithm; `None` on a zero pivot.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return None;
    }
    c[0] = sup[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        if beta == 0.0 {
            return None;
        }
        c[i] = if i + 1 < n { sup[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// 20-point Gauss–Legendre rule on [a, b].
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (x, w) = gl20();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Adaptive bisection around the 20-point rule; accepts when the error
/// estimate is below `max(tol·|I|, atol)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, atol: f64, depth: u32) -> Option<f64> {
    let whole = integrate_gl(f, a, b);
    let mid = 0.5 * (a + b);
    let left = integrate_gl(f, a, mid);
    let right = integrate_gl(f, mid, b);
    let refined = left + right;
    if !refined.is_finite() {
        return None;
    }
    if (refined - whole).abs() <= (tol * refined.abs()).max(atol) {
        return Some(refined);
    }
    if depth == 0 {
        return None;
    }
    Some(integrate_adaptive(f, a, mid, tol, atol, depth - 1)? + integrate_adaptive(f, mid, b, tol, atol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let v = integrate_gl(|x| x.powi(38) + 3.0 * x.powi(5), -1.0, 1.0);
        assert!((v - 2.0 / 39.0).abs() < 1e-14);
        let (_, w) = gauss_legendre(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn clamped_spline_reproduces_cubic() {
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
        let df = |x: f64| 1.0 - 4.0 * x + 1.5 * x * x;
        let x: Vec<f64> = (0..7).map(|i| i as f64 * 0.37).collect();
        let y = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::new(x, y, EndCondition::Clamped(df(0.0)), EndCondition::Clamped(df(6.0 * 0.37))).unwrap();
        for t in [0.0, 0.1, 0.9, 1.5, 2.2] {
            assert!((s.eval(t) - f(t)).abs() < 1e-12);
            assert!((s.deriv(t) - df(t)).abs() < 1e-11);
        }
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(CubicSpline::new(vec![0.0, 0.0, 1.0], vec![0.0; 3], EndCondition::Natural, EndCondition::Natural).is_none());
    }

    #[test]
    fn adaptive_quadrature_handles_log_singularity_off_endpoint() {
        let v = integrate_adaptive(&|x: f64| 1.0 / x.sin() - 1.0 / x, 0.0, 1.0, 1e-14, 0.0, 30).unwrap();
        let exact = (0.5f64).tan().ln() - 1.0f64.ln() + 2.0f64.ln();
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }
}
