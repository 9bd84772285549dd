//! Newton iteration for square nonlinear systems with a forward-difference
//! Jacobian.

use crate::error::{Error, Result};
use crate::linalg::{LuFactorization, LuOptions, SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Converged once `|dx|_inf <= step_tol * (1 + |x|_inf)` and the residual check holds.
    pub step_tol: f64,
    pub residual_tol: f64,
    /// Relative perturbation for the finite-difference Jacobian.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            step_tol: 1e-12,
            residual_tol: 1e-10,
            fd_step: 1e-7,
        }
    }
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Perturbed coordinate and the step actually representable in floating point.
pub(crate) fn fd_perturb(x: f64, rel: f64) -> (f64, f64) {
    let h = rel * (1.0 + x.abs());
    let xp = x + h;
    (xp, xp - x)
}

/// Forward-difference Jacobian of `fun` at `x`, given `f0 = fun(x)`.
pub fn fd_jacobian<F>(fun: &F, x: &[f64], f0: &[f64], rel: f64, drop_tol: f64) -> SparseMatrix
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut b = TripletBuilder::new(f0.len(), n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let (v, h) = fd_perturb(x[j], rel);
        xp[j] = v;
        let f1 = fun(&xp);
        xp[j] = x[j];
        for (i, (a, c)) in f1.iter().zip(f0).enumerate() {
            let d = (a - c) / h;
            if d.abs() > drop_tol {
                b.push(i, j, d);
            }
        }
    }
    b.build()
}

/// Solves `fun(x) = 0` from `x0`.
pub fn newton_solve<F>(fun: F, x0: &[f64], opts: &NewtonOptions, what: &'static str) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let fail = |iterations| Error::NoConvergence { what, iterations };
    let mut x = x0.to_vec();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(fail(0));
    }
    if x.is_empty() {
        return Ok(x);
    }
    for it in 0..opts.max_iter {
        let f = fun(&x);
        if f.iter().any(|v| !v.is_finite()) {
            return Err(fail(it));
        }
        let jac = fd_jacobian(&fun, &x, &f, opts.fd_step, 0.0);
        let lu = LuFactorization::new(&jac, LuOptions::default()).map_err(|_| fail(it))?;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = lu.solve(&rhs)?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        if norm_inf(&dx) <= opts.step_tol * (1.0 + norm_inf(&x)) {
            let r = fun(&x);
            if norm_inf(&r) <= opts.residual_tol {
                return Ok(x);
            }
        }
    }
    Err(fail(opts.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_scalar_cubic() {
        let x = newton_solve(|x| vec![x[0].powi(3) - 8.0], &[1.0], &NewtonOptions::default(), "t")
            .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_real_root_fails() {
        let r = newton_solve(|x| vec![x[0] * x[0] + 1.0], &[0.5], &NewtonOptions::default(), "t");
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}
