//! Direct solvers for the Newton systems.
//!
//! The travelling-wave Jacobian has dense border rows (mass, pin) and is
//! handled by [`DenseLu`]. The transient Jacobian is a periodic band matrix:
//! every row couples only unknowns within cyclic distance `w`. It is solved by
//! eliminating the last `w` unknowns through a Schur complement, which leaves a
//! plain (non-cyclic) band block for LU with partial pivoting.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("matrix must be square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// LU factorisation with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: DenseMatrix) -> Result<Self> {
        let n = a.n;
        let scale = a.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let threshold = f64::EPSILON * scale;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|r| (r, a[(r, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > threshold) {
                return Err(Error::Singular { pivot: k });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
            }
            let inv = 1.0 / a[(k, k)];
            for r in k + 1..n {
                let l = a[(r, k)] * inv;
                if l == 0.0 {
                    continue;
                }
                a[(r, k)] = l;
                let (upper, lower) = a.data.split_at_mut(r * n);
                let pivot_row = &upper[k * n + k + 1..k * n + n];
                for (x, y) in lower[k + 1..n].iter_mut().zip(pivot_row) {
                    *x -= l * y;
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
}

/// Solve `A x = rhs` by LU with partial pivoting.
pub fn solve_dense(a: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != a.size() {
        return Err(Error::InvalidParameter(format!(
            "right-hand side has length {} for a {}x{} matrix",
            rhs.len(),
            a.size(),
            a.size()
        )));
    }
    Ok(DenseLu::factor(a.clone())?.solve(rhs))
}

/// Square matrix whose entry `(i, j)` vanishes unless the cyclic distance
/// between `i` and `j` is at most `half_width`.
#[derive(Debug, Clone)]
pub struct PeriodicBandMatrix {
    n: usize,
    w: usize,
    // row i, offset k in -w..=w stored at i * (2w + 1) + (k + w)
    data: Vec<f64>,
}

impl PeriodicBandMatrix {
    pub fn zeros(n: usize, half_width: usize) -> Self {
        assert!(
            n > 2 * half_width,
            "periodic band of half width {half_width} needs more than {} rows",
            2 * half_width
        );
        Self {
            n,
            w: half_width,
            data: vec![0.0; n * (2 * half_width + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> usize {
        self.w
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
    }

    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let forward = (j + self.n - i) % self.n;
        if forward <= self.w {
            Some(forward + self.w)
        } else if self.n - forward <= self.w {
            Some(self.w - (self.n - forward))
        } else {
            None
        }
    }

    /// Accumulate `value` into entry `(i, j)`. Panics outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self
            .offset(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) lies outside the periodic band"));
        self.data[i * (2 * self.w + 1) + k] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.offset(i, j)
            .map_or(0.0, |k| self.data[i * (2 * self.w + 1) + k])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut dense = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for k in 0..=2 * self.w {
                let j = (i + self.n + k - self.w) % self.n;
                dense[(i, j)] += self.data[i * (2 * self.w + 1) + k];
            }
        }
        dense
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (0..=2 * self.w)
                    .map(|k| {
                        let j = (i + self.n + k - self.w) % self.n;
                        self.data[i * (2 * self.w + 1) + k] * x[j]
                    })
                    .sum()
            })
            .collect()
    }
}

/// Band LU with partial pivoting for a non-cyclic band matrix with lower and
/// upper half width `w`; fill-in extends the upper width to `2w`.
#[derive(Debug, Clone)]
struct BandLu {
    m: usize,
    w: usize,
    // row r holds columns r - w ..= r + 2w
    rows: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(w: usize) -> usize {
        3 * w + 1
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.rows[r * Self::width(self.w) + c + self.w - r]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        let width = Self::width(self.w);
        &mut self.rows[r * width + c + self.w - r]
    }

    fn factor(mut self, threshold: f64) -> Result<Self> {
        let (m, w) = (self.m, self.w);
        for i in 0..m {
            let last_row = (i + w).min(m - 1);
            let last_col = (i + 2 * w).min(m - 1);
            let mut p = i;
            let mut best = self.at(i, i).abs();
            for r in i + 1..=last_row {
                let cand = self.at(r, i).abs();
                if cand > best {
                    best = cand;
                    p = r;
                }
            }
            if !(best > threshold) {
                return Err(Error::Singular { pivot: i });
            }
            self.piv[i] = p;
            if p != i {
                for c in i..=last_col {
                    let a = self.at(i, c);
                    let b = self.at(p, c);
                    *self.at_mut(i, c) = b;
                    *self.at_mut(p, c) = a;
                }
            }
            let inv = 1.0 / self.at(i, i);
            for r in i + 1..=last_row {
                let l = self.at(r, i) * inv;
                *self.at_mut(r, i) = l;
                if l == 0.0 {
                    continue;
                }
                for c in i + 1..=last_col {
                    let u = self.at(i, c);
                    *self.at_mut(r, c) -= l * u;
                }
            }
        }
        Ok(self)
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let (m, w) = (self.m, self.w);
        for i in 0..m {
            b.swap(i, self.piv[i]);
            let bi = b[i];
            if bi != 0.0 {
                for r in i + 1..=(i + w).min(m - 1) {
                    b[r] -= self.at(r, i) * bi;
                }
            }
        }
        for i in (0..m).rev() {
            let mut s = b[i];
            for c in i + 1..=(i + 2 * w).min(m - 1) {
                s -= self.at(i, c) * b[c];
            }
            b[i] = s / self.at(i, i);
        }
    }
}

/// Factorisation of a [`PeriodicBandMatrix`].
#[derive(Debug, Clone)]
pub struct PeriodicBandLu {
    n: usize,
    m: usize,
    interior: BandLu,
    // A11^{-1} A12, column-major m x w
    coupling: Vec<f64>,
    // rows of A21, w x m
    border_rows: Vec<f64>,
    schur: DenseLu,
}

impl PeriodicBandLu {
    pub fn factor(a: &PeriodicBandMatrix) -> Result<Self> {
        let (n, w) = (a.n, a.w);
        let m = n - w;
        let scale = a.data.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        let threshold = f64::EPSILON * scale;

        let mut interior = BandLu {
            m,
            w,
            rows: vec![0.0; m * BandLu::width(w)],
            piv: vec![0; m],
        };
        let mut coupling = vec![0.0; m * w];
        let mut border_rows = vec![0.0; w * m];
        let mut corner = DenseMatrix::zeros(w);
        for i in 0..n {
            for k in 0..=2 * w {
                let value = a.data[i * (2 * w + 1) + k];
                if value == 0.0 {
                    continue;
                }
                let j = (i + n + k - w) % n;
                match (i < m, j < m) {
                    (true, true) => *interior.at_mut(i, j) += value,
                    (true, false) => coupling[(j - m) * m + i] += value,
                    (false, true) => border_rows[(i - m) * m + j] += value,
                    (false, false) => corner[(i - m, j - m)] += value,
                }
            }
        }

        let interior = interior.factor(threshold)?;
        for col in coupling.chunks_mut(m) {
            interior.solve_in_place(col);
        }
        for r in 0..w {
            let row = &border_rows[r * m..(r + 1) * m];
            for c in 0..w {
                let col = &coupling[c * m..(c + 1) * m];
                corner[(r, c)] -= row.iter().zip(col).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        let schur = DenseLu::factor(corner).map_err(|err| match err {
            Error::Singular { pivot } => Error::Singular { pivot: m + pivot },
            other => other,
        })?;
        Ok(Self {
            n,
            m,
            interior,
            coupling,
            border_rows,
            schur,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let w = n - m;
        let mut x = rhs.to_vec();
        let (inner, border) = x.split_at_mut(m);
        self.interior.solve_in_place(inner);
        let reduced: Vec<f64> = (0..w)
            .map(|r| {
                let row = &self.border_rows[r * m..(r + 1) * m];
                border[r] - row.iter().zip(inner.iter()).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        let tail = self.schur.solve(&reduced);
        for (c, &t) in tail.iter().enumerate() {
            let col = &self.coupling[c * m..(c + 1) * m];
            for (xi, yi) in inner.iter_mut().zip(col) {
                *xi -= yi * t;
            }
        }
        border.copy_from_slice(&tail);
        x
    }
}
