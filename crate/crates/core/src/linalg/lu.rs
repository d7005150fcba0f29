//! Dense LU with partial pivoting over `Dd`, plus full-pivot kernel
//! extraction and a 1-norm condition estimate (Hager-style).

use super::dd::Dd;

/// Row-major dense matrix of double-double entries.
#[derive(Clone, Debug)]
pub struct DdMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Dd>,
}

impl DdMatrix {
    pub fn zeros(rows: usize, cols: usize) -> DdMatrix {
        DdMatrix {
            rows,
            cols,
            data: vec![Dd::ZERO; rows * cols],
        }
    }

    pub fn from_f64_rows(rows: &[Vec<f64>]) -> DdMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = DdMatrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = Dd::from_f64(v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Dd] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Dd] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.abs().to_f64())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs().to_f64()).sum())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[Dd]) -> Vec<Dd> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = Dd::ZERO;
                for (a, &b) in self.row(i).iter().zip(x) {
                    acc += *a * b;
                }
                acc
            })
            .collect()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.to_f64()).collect())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for DdMatrix {
    type Output = Dd;
    #[inline(always)]
    fn index(&self, (i, j): (usize, usize)) -> &Dd {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DdMatrix {
    #[inline(always)]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Dd {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FactorError {
    #[error("matrix is numerically singular (pivot ratio {ratio:.3e} below {threshold:.1e})")]
    Singular { ratio: f64, threshold: f64 },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// Packed LU factors of a square matrix, P*A = L*U.
#[derive(Debug)]
pub struct LuFactors {
    lu: DdMatrix,
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl LuFactors {
    /// Factor with partial pivoting. `pivot_ratio_floor` declares the matrix
    /// singular when min|U_ii| / max|U_ii| falls below it; exact zero pivots
    /// always fail.
    pub fn factor(mut a: DdMatrix, pivot_ratio_floor: f64) -> Result<LuFactors, FactorError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(FactorError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let mut imax = k;
            let mut vmax = a[(k, k)].abs().to_f64();
            for i in k + 1..n {
                let v = a[(i, k)].abs().to_f64();
                if v > vmax {
                    vmax = v;
                    imax = i;
                }
            }
            a.swap_rows(k, imax);
            perm.swap(k, imax);
            min_pivot = min_pivot.min(vmax);
            max_pivot = max_pivot.max(vmax);
            if vmax == 0.0 {
                return Err(FactorError::Singular {
                    ratio: 0.0,
                    threshold: pivot_ratio_floor,
                });
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let factor = a[(i, k)] / pivot;
                a[(i, k)] = factor;
                if factor.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let sub = factor * a[(k, j)];
                    a[(i, j)] -= sub;
                }
            }
        }
        let ratio = if max_pivot > 0.0 {
            min_pivot / max_pivot
        } else {
            0.0
        };
        if ratio < pivot_ratio_floor {
            return Err(FactorError::Singular {
                ratio,
                threshold: pivot_ratio_floor,
            });
        }
        Ok(LuFactors {
            lu: a,
            perm,
            min_pivot,
            max_pivot,
        })
    }

    pub fn n(&self) -> usize {
        self.lu.rows()
    }

    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot > 0.0 {
            self.min_pivot / self.max_pivot
        } else {
            0.0
        }
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Solve A x = b.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[Dd]) -> Vec<Dd> {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut x: Vec<Dd> = self.perm.iter().map(|&p| b[p]).collect();
        // Forward: L y = P b (unit diagonal).
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    /// Solve A^T x = b (via U^T z = b, L^T w = z, x = P^T w).
    #[allow(clippy::needless_range_loop)]
    pub fn solve_transpose(&self, b: &[Dd]) -> Vec<Dd> {
        let n = self.n();
        assert_eq!(b.len(), n);
        let mut z = b.to_vec();
        for i in 0..n {
            let mut acc = z[i];
            for j in 0..i {
                acc -= self.lu[(j, i)] * z[j];
            }
            z[i] = acc / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for j in i + 1..n {
                acc -= self.lu[(j, i)] * z[j];
            }
            z[i] = acc;
        }
        let mut x = vec![Dd::ZERO; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    /// One-norm condition estimate of the factored matrix: ||A||_1 times a
    /// Hager power-iteration estimate of ||A^-1||_1.
    pub fn condition_estimate(&self, a: &DdMatrix) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        let norm_a = a.one_norm();
        let mut x = vec![Dd::from_f64(1.0 / n as f64); n];
        let mut est = 0.0f64;
        for _ in 0..5 {
            let y = self.solve(&x);
            let y1: f64 = y.iter().map(|v| v.abs().to_f64()).sum();
            est = est.max(y1);
            let xi: Vec<Dd> = y
                .iter()
                .map(|v| Dd::from_f64(if v.to_f64() >= 0.0 { 1.0 } else { -1.0 }))
                .collect();
            let z = self.solve_transpose(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs().to_f64()))
                .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            let ztx: f64 = z
                .iter()
                .zip(&x)
                .map(|(zi, xi)| zi.to_f64() * xi.to_f64())
                .sum();
            if zmax <= ztx.abs() {
                break;
            }
            x = vec![Dd::ZERO; n];
            x[jmax] = Dd::ONE;
        }
        norm_a * est
    }
}

/// Basis of the (numerical) kernel of a rectangular matrix via Gaussian
/// elimination with full pivoting. A pivot below `rel_tol` times the largest
/// entry ends the elimination; the remaining columns parameterize the kernel.
/// Basis vectors are returned in original column coordinates.
pub fn kernel_basis(mat: &DdMatrix, rel_tol: f64) -> Vec<Vec<Dd>> {
    let r = mat.rows();
    let c = mat.cols();
    let mut m = mat.clone();
    let mut col_perm: Vec<usize> = (0..c).collect();
    let scale = m.max_abs();
    if scale == 0.0 {
        // Zero matrix: kernel is everything.
        return (0..c)
            .map(|j| {
                let mut v = vec![Dd::ZERO; c];
                v[j] = Dd::ONE;
                v
            })
            .collect();
    }
    let tol = rel_tol * scale;
    let mut rank = 0;
    for k in 0..r.min(c) {
        let mut best = (k, k, 0.0f64);
        for i in k..r {
            for j in k..c {
                let v = m[(i, j)].abs().to_f64();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 < tol {
            break;
        }
        m.swap_rows(k, best.0);
        if best.1 != k {
            for i in 0..r {
                let a = m[(i, k)];
                m[(i, k)] = m[(i, best.1)];
                m[(i, best.1)] = a;
            }
            col_perm.swap(k, best.1);
        }
        let pivot = m[(k, k)];
        for i in k + 1..r {
            let factor = m[(i, k)] / pivot;
            if factor.is_zero() {
                continue;
            }
            for j in k..c {
                let sub = factor * m[(k, j)];
                m[(i, j)] -= sub;
            }
        }
        rank = k + 1;
    }
    let mut basis = Vec::with_capacity(c - rank);
    for free in rank..c {
        let mut xp = vec![Dd::ZERO; c];
        xp[free] = Dd::ONE;
        for i in (0..rank).rev() {
            let mut acc = -m[(i, free)];
            for j in i + 1..rank {
                acc -= m[(i, j)] * xp[j];
            }
            xp[i] = acc / m[(i, i)];
        }
        let mut x = vec![Dd::ZERO; c];
        for (pos, &orig) in col_perm.iter().enumerate() {
            x[orig] = xp[pos];
        }
        basis.push(x);
    }
    basis
}
