//! Banded LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals. Storage reserves
/// `kl` extra super-diagonals for pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i}, {j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Add `v` to entry `(i, j)`, which must lie within the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside declared band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU factorization.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let mut piv = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut min_pivot = f64::INFINITY;
        for p in 0..n {
            let last = (p + self.kl).min(n - 1);
            let mut r = p;
            let mut best = self.get(p, p).abs();
            for i in p + 1..=last {
                let v = self.get(i, p).abs();
                if v > best {
                    best = v;
                    r = i;
                }
            }
            if best == 0.0 || best <= 1e-300 * scale {
                return Err(Error::SingularJacobian(format!("zero pivot in column {p}")));
            }
            min_pivot = min_pivot.min(best);
            piv[p] = r;
            let right = (p + self.ku + self.kl).min(n - 1);
            if r != p {
                for j in p..=right {
                    let (a, b) = (self.idx(p, j), self.idx(r, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(p, p)];
            for i in p + 1..=last {
                let ip = self.idx(i, p);
                let l = self.data[ip] / pivot;
                self.data[ip] = l;
                if l != 0.0 {
                    for j in p + 1..=right {
                        let pj = self.idx(p, j);
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * self.data[pj];
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv, min_pivot, scale })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
    /// Smallest pivot modulus encountered.
    pub min_pivot: f64,
    /// Largest entry modulus of the original matrix.
    pub scale: f64,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let a = &self.m;
        let n = a.n;
        let mut x = rhs.to_vec();
        for p in 0..n {
            x.swap(p, self.piv[p]);
            let last = (p + a.kl).min(n - 1);
            let xp = x[p];
            for i in p + 1..=last {
                x[i] -= a.data[a.idx(i, p)] * xp;
            }
        }
        for p in (0..n).rev() {
            let right = (p + a.ku + a.kl).min(n - 1);
            let mut s = x[p];
            for j in p + 1..=right {
                s -= a.data[a.idx(p, j)] * x[j];
            }
            x[p] = s / a.data[a.idx(p, p)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        // zero leading diagonal forces a row swap
        let n = 7;
        let mut m = BandMatrix::zeros(n, 2, 1);
        for i in 0..n {
            if i > 0 {
                m.add(i, i - 1, 1.0 + i as f64);
            }
            if i > 1 {
                m.add(i, i - 2, 0.5);
            }
            if i + 1 < n {
                m.add(i, i + 1, -2.0);
            }
            if i > 0 {
                m.add(i, i, 0.1 * i as f64);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let b = m.mul_vec(&x);
        let lu = m.factor().unwrap();
        for (a, b) in lu.solve(&b).iter().zip(&x) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let mut m = BandMatrix::zeros(3, 1, 1);
        m.add(0, 0, 1.0);
        m.add(1, 0, 1.0);
        m.add(2, 2, 1.0);
        assert!(m.factor().is_err());
    }
}
