use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, SparseMatrix};

/// Tracked eigenpair at parameter value `p`, normalized so that the
/// bilinear product `phi^T phi` equals `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    pub phi: ComplexVector,
    pub s: Complex64,
    pub p: f64,
    pub c: Complex64,
}

impl TrackerState {
    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    /// `|phi^T phi - c|`.
    pub fn normalization_error(&self) -> f64 {
        (self.phi.bilinear_dot(&self.phi) - self.c).norm()
    }

    /// Whether `s` is real to working precision.
    pub fn is_real(&self) -> bool {
        self.s.im.abs() <= 1e-12 * self.s.norm().max(1.0)
    }

    /// Packs `(phi_re, phi_im, s_re, s_im)`.
    pub(crate) fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.dim() + 2);
        y.extend_from_slice(&self.phi.re);
        y.extend_from_slice(&self.phi.im);
        y.push(self.s.re);
        y.push(self.s.im);
        y
    }

    pub(crate) fn from_vec(y: &[f64], p: f64, c: Complex64) -> Self {
        let r = (y.len() - 2) / 2;
        Self {
            phi: ComplexVector {
                re: y[..r].to_vec(),
                im: y[r..2 * r].to_vec(),
            },
            s: Complex64::new(y[2 * r], y[2 * r + 1]),
            p,
            c,
        }
    }
}

/// `(s E - A) phi` as split real and imaginary parts.
pub(crate) fn pencil_apply(e: &SparseMatrix, a: &SparseMatrix, s: Complex64, phi: &ComplexVector) -> (Vec<f64>, Vec<f64>) {
    let e_re = e.matvec(&phi.re);
    let e_im = e.matvec(&phi.im);
    let mut re = a.matvec(&phi.re);
    let mut im = a.matvec(&phi.im);
    for i in 0..re.len() {
        re[i] = s.re * e_re[i] - s.im * e_im[i] - re[i];
        im[i] = s.re * e_im[i] + s.im * e_re[i] - im[i];
    }
    (re, im)
}

/// `||(s E - A) phi|| / ((|s| ||E||_F + ||A||_F) ||phi||)`.
pub fn residual(e: &SparseMatrix, a: &SparseMatrix, s: Complex64, phi: &ComplexVector) -> f64 {
    let (re, im) = pencil_apply(e, a, s, phi);
    let num: f64 = re.iter().chain(&im).map(|v| v * v).sum::<f64>().sqrt();
    let scale = (s.norm() * e.frobenius_norm() + a.frobenius_norm()) * phi.norm2();
    if scale == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / scale
    }
}

/// Largest initial residual accepted by [`init_from_eigenpair`].
pub const INIT_RESIDUAL_MAX: f64 = 1e-6;

/// Rescales `phi` so that `phi^T phi = c`.
pub fn init_from_eigenpair(
    e: &SparseMatrix,
    a: &SparseMatrix,
    p: f64,
    s: Complex64,
    phi: &ComplexVector,
    c: Complex64,
) -> Result<TrackerState> {
    if phi.len() != e.nrows() || e.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvector of length {} for a pencil of size {}",
            phi.len(),
            e.nrows()
        )));
    }
    if phi.norm2() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let res = residual(e, a, s, phi);
    if !(res <= INIT_RESIDUAL_MAX) {
        return Err(Error::InvalidConfig(format!(
            "initial eigenpair residual {res:.3e} exceeds {INIT_RESIDUAL_MAX:e}"
        )));
    }
    Ok(TrackerState {
        phi: normalize(phi, c)?,
        s,
        p,
        c,
    })
}

pub(crate) fn normalize(phi: &ComplexVector, c: Complex64) -> Result<ComplexVector> {
    let q = phi.bilinear_dot(phi);
    let n2 = phi.norm2();
    if q.norm() <= 1e-14 * n2 * n2 || c.norm() == 0.0 {
        return Err(Error::DegenerateVector);
    }
    Ok(phi.scaled((c / q).sqrt()))
}

/// Moves a real eigenvalue off the real axis: `s_im = eps`, `phi_im = eps phi_re`,
/// followed by renormalization to `c`.
///
/// The renormalization divides `phi` by `1 + j eps`, so only the eigenvalue
/// keeps the perturbation.
pub fn perturb_epsilon(state: &TrackerState, eps: f64) -> TrackerState {
    if eps == 0.0 {
        return state.clone();
    }
    let phi = ComplexVector {
        re: state.phi.re.clone(),
        im: state.phi.re.iter().map(|v| eps * v).collect(),
    };
    TrackerState {
        phi: normalize(&phi, state.c).unwrap_or(phi),
        s: Complex64::new(state.s.re, eps),
        p: state.p,
        c: state.c,
    }
}
