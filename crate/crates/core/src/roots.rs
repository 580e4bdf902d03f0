//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Brent's method on a bracket `[a, b]` with `f(a)·f(b) ≤ 0`.
///
/// `fa` and `fb` are the known endpoint values. Stops when the bracket is
/// narrower than `xtol` or `|f| ≤ ftol`.
pub fn brent<F>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64, ftol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NonConvergence(format!("root not bracketed in [{a}, {b}]")));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..max_iter {
        if fb.abs() <= ftol || (b - a).abs() <= xtol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected { (s - b).abs() >= 0.5 * (b - c).abs() } else { (s - b).abs() >= 0.5 * (c - d).abs() };
        let tiny = if bisected { (b - c).abs() < xtol } else { (c - d).abs() < xtol };
        if outside || slow || tiny {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(Error::NonConvergence(format!("Brent iteration budget exhausted near {b}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let f = |x: f64| Ok(x * x * x - 2.0);
        let r = brent(f, 0.0, 2.0, -2.0, 6.0, 1e-14, 0.0, 100).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(brent(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 2.0, 2.0, 1e-12, 0.0, 50).is_err());
    }

    #[test]
    fn handles_steep_functions() {
        let f = |x: f64| Ok((50.0 * (x - 0.3)).tanh());
        let r = brent(f, 0.0, 1.0, (-15.0f64).tanh(), 35f64.tanh(), 1e-14, 0.0, 200).unwrap();
        assert!((r - 0.3).abs() < 1e-13);
    }
}
