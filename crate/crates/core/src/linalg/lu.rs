//! Sparse LU factorization with threshold partial pivoting.
//!
//! Left-looking Gilbert-Peierls elimination: each column of `L` and `U` is
//! obtained from a sparse triangular solve whose nonzero pattern comes from a
//! depth-first reach over the columns already factored. Columns are visited in
//! a minimum-degree order of `A + A^T`; within a column the diagonal entry is
//! kept as pivot when it is within `pivot_threshold` of the largest candidate.

use super::ordering::{minimum_degree, OrderingCache};
use super::SparseMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
pub struct LuOptions {
    /// Absolute pivot magnitude at or below which the matrix is reported singular.
    pub pivot_floor: f64,
    /// Relative threshold in `(0, 1]` for keeping the diagonal pivot.
    pub pivot_threshold: f64,
    /// Apply a fill-reducing column ordering.
    pub reorder: bool,
}

impl Default for LuOptions {
    fn default() -> Self {
        Self {
            pivot_floor: 1e-14,
            pivot_threshold: 0.1,
            reorder: true,
        }
    }
}

/// Factors `P A Q = L U`. Immutable once built; solves take `&self`.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    /// Row `i` of `A` is row `pinv[i]` of `P A`.
    pinv: Vec<usize>,
    /// Column `k` of `A Q` is column `q[k]` of `A`.
    q: Vec<usize>,
    norm_one: f64,
}

/// Factors `m` with default options.
pub fn lu_factor(m: &SparseMatrix) -> Result<LuFactorization> {
    LuFactorization::new(m, LuOptions::default())
}

/// Solves `M x = b` with a previously computed factorization.
pub fn lu_solve(f: &LuFactorization, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

impl LuFactorization {
    pub fn new(m: &SparseMatrix, opts: LuOptions) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU of non-square {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        let q: Vec<usize> = if opts.reorder {
            minimum_degree(m)
        } else {
            (0..m.ncols()).collect()
        };
        Self::with_ordering(m, q, opts)
    }

    /// Factors with the column ordering kept in `cache` for this sparsity
    /// pattern, computing and storing it on a miss.
    pub fn with_cache(m: &SparseMatrix, opts: LuOptions, cache: &OrderingCache) -> Result<Self> {
        if !opts.reorder || !m.is_square() {
            return Self::new(m, opts);
        }
        Self::with_ordering(m, cache.ordering(m), opts)
    }

    /// Factors with the given column ordering `q`, a permutation of `0..n`.
    pub fn with_ordering(m: &SparseMatrix, q: Vec<usize>, opts: LuOptions) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU of non-square {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.ncols();
        if q.len() != n {
            return Err(Error::DimensionMismatch(format!("ordering of length {} for {n} columns", q.len())));
        }

        let cap = 4 * m.nnz() + n;
        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut l_idx = Vec::with_capacity(cap);
        let mut l_val = Vec::with_capacity(cap);
        let mut u_ptr = Vec::with_capacity(n + 1);
        let mut u_idx = Vec::with_capacity(cap);
        let mut u_val = Vec::with_capacity(cap);
        let mut pinv = vec![NONE; n];

        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut marked = vec![false; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];

        for k in 0..n {
            l_ptr.push(l_idx.len());
            u_ptr.push(u_idx.len());
            let col = q[k];
            let (b_rows, b_vals) = m.column(col);

            // Nonzero pattern of L \ A(:, col) in topological order: xi[top..n].
            let mut top = n;
            for &i in b_rows {
                if !marked[i] {
                    top = dfs(
                        i, &l_ptr, &l_idx, &pinv, &mut marked, &mut xi, top, &mut stack,
                        &mut pstack,
                    );
                }
            }
            for &j in &xi[top..n] {
                marked[j] = false;
                x[j] = 0.0;
            }
            for (&i, &v) in b_rows.iter().zip(b_vals) {
                x[i] = v;
            }
            for px in top..n {
                let j = xi[px];
                let jj = pinv[j];
                if jj == NONE {
                    continue;
                }
                let xj = x[j];
                // Column jj of L: unit diagonal first, then strictly lower entries.
                let end = if jj + 1 < l_ptr.len() { l_ptr[jj + 1] } else { l_idx.len() };
                for p in l_ptr[jj] + 1..end {
                    x[l_idx[p]] -= l_val[p] * xj;
                }
            }

            let mut ipiv = NONE;
            let mut amax = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    let t = x[i].abs();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                }
            }
            if ipiv == NONE || amax <= opts.pivot_floor {
                return Err(Error::SingularMatrix {
                    step: k,
                    pivot: amax.max(0.0),
                });
            }
            if pinv[col] == NONE && x[col].abs() >= amax * opts.pivot_threshold {
                ipiv = col;
            }
            let pivot = x[ipiv];
            if pivot.abs() <= opts.pivot_floor {
                return Err(Error::SingularMatrix {
                    step: k,
                    pivot: pivot.abs(),
                });
            }
            u_idx.push(k);
            u_val.push(pivot);
            pinv[ipiv] = k;
            l_idx.push(ipiv);
            l_val.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    l_idx.push(i);
                    l_val.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l_ptr.push(l_idx.len());
        u_ptr.push(u_idx.len());
        for r in l_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self {
            n,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
            pinv,
            q,
            norm_one: m.norm_one(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries in `L` and `U` together.
    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for {}x{} factorization",
                b.len(),
                self.n,
                self.n
            )));
        }
        let mut y = vec![0.0; self.n];
        for (i, &bi) in b.iter().enumerate() {
            y[self.pinv[i]] = bi;
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                    y[self.l_idx[p]] -= self.l_val[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let last = self.u_ptr[j + 1] - 1;
            y[j] /= self.u_val[last];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.u_ptr[j]..last {
                    y[self.u_idx[p]] -= self.u_val[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for (k, &col) in self.q.iter().enumerate() {
            x[col] = y[k];
        }
        Ok(x)
    }

    /// Solves `M^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch("transpose rhs length".into()));
        }
        let mut y: Vec<f64> = self.q.iter().map(|&c| b[c]).collect();
        for j in 0..self.n {
            let last = self.u_ptr[j + 1] - 1;
            let mut acc = y[j];
            for p in self.u_ptr[j]..last {
                acc -= self.u_val[p] * y[self.u_idx[p]];
            }
            y[j] = acc / self.u_val[last];
        }
        for j in (0..self.n).rev() {
            let mut acc = y[j];
            for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                acc -= self.l_val[p] * y[self.l_idx[p]];
            }
            y[j] = acc;
        }
        Ok((0..self.n).map(|i| y[self.pinv[i]]).collect())
    }

    /// Hager-Higham estimate of the 1-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for iter in 0..5 {
            let y = match self.solve(&x) {
                Ok(y) => y,
                Err(_) => return f64::INFINITY,
            };
            let new_est: f64 = y.iter().map(|v| v.abs()).sum();
            if iter > 0 && new_est <= est {
                break;
            }
            est = new_est;
            let sign: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = match self.solve_transpose(&sign) {
                Ok(z) => z,
                Err(_) => return f64::INFINITY,
            };
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if iter > 0 && zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[jmax] = 1.0;
        }
        est * self.norm_one
    }
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    start: usize,
    l_ptr: &[usize],
    l_idx: &[usize],
    pinv: &[usize],
    marked: &mut [bool],
    xi: &mut [usize],
    mut top: usize,
    stack: &mut [usize],
    pstack: &mut [usize],
) -> usize {
    let mut head: isize = 0;
    stack[0] = start;
    while head >= 0 {
        let h = head as usize;
        let j = stack[h];
        let jj = pinv[j];
        if !marked[j] {
            marked[j] = true;
            pstack[h] = if jj == NONE { 0 } else { l_ptr[jj] };
        }
        let end = if jj == NONE {
            0
        } else if jj + 1 < l_ptr.len() {
            l_ptr[jj + 1]
        } else {
            l_idx.len()
        };
        let mut done = true;
        let mut p = pstack[h];
        while p < end {
            let i = l_idx[p];
            p += 1;
            if marked[i] {
                continue;
            }
            pstack[h] = p;
            head += 1;
            stack[head as usize] = i;
            done = false;
            break;
        }
        if done {
            pstack[h] = end;
            head -= 1;
            top -= 1;
            xi[top] = j;
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn dense(rows: &[Vec<f64>]) -> SparseMatrix {
        SparseMatrix::from_dense(&DenseMatrix::from_rows(rows), 0.0)
    }

    #[test]
    fn identity_solve_is_noop() {
        let f = lu_factor(&SparseMatrix::identity(2)).unwrap();
        assert_eq!(lu_solve(&f, &[3.0, 7.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn diagonal_solve() {
        let f = lu_factor(&dense(&[vec![2.0, 0.0], vec![0.0, 4.0]])).unwrap();
        assert_eq!(lu_solve(&f, &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn permutation_solve() {
        let f = lu_factor(&dense(&[vec![0.0, 1.0], vec![1.0, 0.0]])).unwrap();
        assert_eq!(lu_solve(&f, &[5.0, 6.0]).unwrap(), vec![6.0, 5.0]);
    }

    #[test]
    fn hand_elimination_case() {
        // [[4,3],[6,3]] x = [10,12]  =>  x = [1,2]
        let f = lu_factor(&dense(&[vec![4.0, 3.0], vec![6.0, 3.0]])).unwrap();
        let x = lu_solve(&f, &[10.0, 12.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_is_singular() {
        let err = lu_factor(&dense(&[vec![1.0, 1.0], vec![1.0, 1.0]])).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { .. }));
    }

    #[test]
    fn transpose_solve_matches_dense() {
        let a = dense(&[
            vec![4.0, 1.0, 0.0],
            vec![2.0, 5.0, 1.0],
            vec![0.0, 3.0, 6.0],
        ]);
        let f = lu_factor(&a).unwrap();
        let x = f.solve_transpose(&[1.0, 2.0, 3.0]).unwrap();
        let r = a.transpose().matvec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-13);
        }
    }

    #[test]
    fn condition_estimate_of_identity_is_one() {
        let f = lu_factor(&SparseMatrix::identity(5)).unwrap();
        assert!((f.condition_estimate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn condition_estimate_grows_near_singularity() {
        let f = lu_factor(&dense(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-9]])).unwrap();
        assert!(f.condition_estimate() > 1e8);
    }

    #[test]
    fn non_square_rejected() {
        assert!(lu_factor(&SparseMatrix::zeros(2, 3)).is_err());
    }
}
