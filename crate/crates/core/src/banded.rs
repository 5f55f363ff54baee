//! Square band matrices (optionally cyclic) with a pivoted band LU solve.
//!
//! A cyclic band of half-width `w` is turned into an ordinary band of half-width
//! `2w` by interleaving indices from both ends (`0, N-1, 1, N-2, ...`), then
//! factored with partial pivoting.

use nalgebra::DMatrix;

use crate::error::{BiharmError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    size: usize,
    half_bw: usize,
    periodic: bool,
    // row-major, 2 * half_bw + 1 entries per row, offset -half_bw first
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(size: usize, half_bw: usize, periodic: bool) -> Result<Self> {
        if size == 0 {
            return Err(BiharmError::Incompatible("empty matrix".into()));
        }
        if periodic && size <= 2 * half_bw {
            return Err(BiharmError::Incompatible(format!(
                "cyclic band of half-width {half_bw} needs more than {} rows, got {size}",
                2 * half_bw
            )));
        }
        Ok(Self {
            size,
            half_bw,
            periodic,
            data: vec![0.0; size * (2 * half_bw + 1)],
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bw
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    fn width(&self) -> usize {
        2 * self.half_bw + 1
    }

    /// Signed band offset of `(i, j)`, wrapped for cyclic matrices.
    fn offset(&self, i: usize, j: usize) -> Option<isize> {
        let n = self.size as isize;
        let w = self.half_bw as isize;
        let mut o = j as isize - i as isize;
        if self.periodic {
            if o > n / 2 {
                o -= n;
            } else if o < -(n - 1) / 2 {
                o += n;
            }
        }
        (o.abs() <= w).then_some(o)
    }

    fn column(&self, i: usize, o: isize) -> Option<usize> {
        let n = self.size as isize;
        let j = i as isize + o;
        if self.periodic {
            Some(j.rem_euclid(n) as usize)
        } else {
            (0..n).contains(&j).then_some(j as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.offset(i, j) {
            Some(o) => self.data[i * self.width() + (o + self.half_bw as isize) as usize],
            None => 0.0,
        }
    }

    /// Adds `value` at `(i, j)`. Panics if `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let o = self.offset(i, j).unwrap_or_else(|| {
            panic!(
                "entry ({i}, {j}) outside band of half-width {}",
                self.half_bw
            )
        });
        let w = self.width();
        self.data[i * w + (o + self.half_bw as isize) as usize] += value;
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        for i in 0..self.size {
            self.add(i, i, shift);
        }
    }

    /// Nonzero-capable entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let w = self.half_bw as isize;
        (-w..=w).filter_map(move |o| {
            let j = self.column(i, o)?;
            Some((j, self.data[i * self.width() + (o + w) as usize]))
        })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size);
        (0..self.size)
            .map(|i| self.row(i).map(|(j, a)| a * v[j]).sum())
            .collect()
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.diagonal().iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.size)
            .map(|i| self.row(i).map(|(_, a)| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| self.row(i).all(|(j, a)| self.get(j, i) == a))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for i in 0..self.size {
            for (j, a) in self.row(i) {
                m[(i, j)] = a;
            }
        }
        m
    }

    /// Solves `A x = rhs` by band LU with partial pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.size {
            return Err(BiharmError::Incompatible(format!(
                "right-hand side has length {}, matrix has {} rows",
                rhs.len(),
                self.size
            )));
        }
        let perm = self.ordering();
        let mut inverse = vec![0; self.size];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let bw = if self.periodic {
            2 * self.half_bw
        } else {
            self.half_bw
        };
        let mut lu = BandLu::new(self.size, bw, bw);
        for (new_i, &old_i) in perm.iter().enumerate() {
            for (old_j, a) in self.row(old_i) {
                if a != 0.0 {
                    lu.set(new_i, inverse[old_j], a);
                }
            }
        }
        lu.factor()?;
        let b: Vec<f64> = perm.iter().map(|&old| rhs[old]).collect();
        let y = lu.solve(b);
        let mut x = vec![0.0; self.size];
        for (new, &old) in perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }

    /// `perm[new] = old`.
    fn ordering(&self) -> Vec<usize> {
        let n = self.size;
        if !self.periodic {
            return (0..n).collect();
        }
        let mut perm = Vec::with_capacity(n);
        let (mut lo, mut hi) = (0, n - 1);
        while lo <= hi {
            perm.push(lo);
            if lo != hi {
                perm.push(hi);
            }
            lo += 1;
            if hi == 0 {
                break;
            }
            hi -= 1;
        }
        perm.truncate(n);
        perm
    }
}

/// Dense-band LU workspace: row `i` holds columns `i - kl ..= i + kl + ku`.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<f64>,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
}

impl BandLu {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            rows: vec![0.0; n * width],
            pivots: vec![0; n],
            multipliers: vec![0.0; n * kl.max(1)],
        }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width() + (j + self.kl - i)
    }

    fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j);
        self.rows[s] = value;
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.rows[self.slot(i, j)]
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let scale = self.rows.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        let tiny = scale * f64::EPSILON * n as f64;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.at(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(BiharmError::Singular {
                    row: k,
                    pivot: best,
                });
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.rows.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            for r in k + 1..=last_row {
                let m = self.at(r, k) / pivot;
                self.multipliers[k * self.kl.max(1) + (r - k - 1)] = m;
                if m == 0.0 {
                    continue;
                }
                let s = self.slot(r, k);
                self.rows[s] = 0.0;
                for j in k + 1..=last_col {
                    let ukj = self.at(k, j);
                    if ukj != 0.0 {
                        let s = self.slot(r, j);
                        self.rows[s] -= m * ukj;
                    }
                }
            }
        }
        Ok(())
    }

    fn solve(&self, mut b: Vec<f64>) -> Vec<f64> {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let last_row = (k + self.kl).min(n - 1);
            for r in k + 1..=last_row {
                let m = self.multipliers[k * self.kl.max(1) + (r - k - 1)];
                b[r] -= m * b[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=last_col {
                acc -= self.at(k, j) * b[j];
            }
            b[k] = acc / self.at(k, k);
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_band(n: usize, w: usize, periodic: bool, seed: &[f64]) -> BandedMatrix {
        let mut m = BandedMatrix::zeros(n, w, periodic).unwrap();
        let mut k = 0;
        for i in 0..n {
            for o in -(w as isize)..=(w as isize) {
                let j = i as isize + o;
                let j = if periodic {
                    j.rem_euclid(n as isize) as usize
                } else if (0..n as isize).contains(&j) {
                    j as usize
                } else {
                    continue;
                };
                m.add(i, j, seed[k % seed.len()]);
                k += 1;
            }
            // keep it comfortably nonsingular
            m.add(i, i, 4.0 * w as f64 + 1.0);
        }
        m
    }

    #[test]
    fn cyclic_offsets_wrap() {
        let mut m = BandedMatrix::zeros(8, 2, true).unwrap();
        m.add(0, 7, 1.5);
        m.add(7, 1, 2.0);
        assert_eq!(m.get(0, 7), 1.5);
        assert_eq!(m.get(7, 1), 2.0);
        assert_eq!(m.get(0, 4), 0.0);
        assert!(BandedMatrix::zeros(4, 2, true).is_err());
    }

    #[test]
    fn solves_indefinite_matrix_needing_pivoting() {
        // zero leading diagonal forces a row interchange
        let mut m = BandedMatrix::zeros(5, 1, false).unwrap();
        let entries = [
            (0, 0, 0.0),
            (0, 1, 1.0),
            (1, 0, 1.0),
            (1, 1, 0.0),
            (1, 2, 2.0),
            (2, 1, 2.0),
            (2, 2, -1.0),
            (2, 3, 1.0),
            (3, 2, 1.0),
            (3, 3, 3.0),
            (3, 4, -1.0),
            (4, 3, -1.0),
            (4, 4, 2.0),
        ];
        for (i, j, v) in entries {
            m.add(i, j, v);
        }
        let x_true = [1.0, -2.0, 0.5, 3.0, -1.0];
        let b = m.mul_vec(&x_true);
        let x = m.solve(&b).unwrap();
        for (a, e) in x.iter().zip(x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandedMatrix::zeros(6, 1, true).unwrap();
        assert!(matches!(
            m.solve(&[1.0; 6]),
            Err(BiharmError::Singular { .. })
        ));
    }

    proptest! {
        #[test]
        fn solve_inverts_mul(
            n in 9usize..40,
            w in 1usize..4,
            periodic in any::<bool>(),
            seed in prop::collection::vec(-1.0f64..1.0, 7..20),
            x in prop::collection::vec(-5.0f64..5.0, 40),
        ) {
            let m = random_band(n, w, periodic, &seed);
            let x = &x[..n];
            let b = m.mul_vec(x);
            let solved = m.solve(&b).unwrap();
            for (a, e) in solved.iter().zip(x) {
                prop_assert!((a - e).abs() < 1e-9 * (1.0 + e.abs()));
            }
            let dense = m.to_dense();
            let dx = &dense * nalgebra::DVector::from_column_slice(x);
            for (a, e) in dx.iter().zip(&b) {
                prop_assert!((a - e).abs() < 1e-12);
            }
        }
    }
}
