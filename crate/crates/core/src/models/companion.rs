use crate::dae::{DaeModel, Equilibrium, ModelBlocks, ModelProvider, ParamDescriptor};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Damped oscillator `x1' = x2`, `x2' = -p x1 - c x2`.
///
/// Its eigenvalues are the roots of `s^2 + c s + p`, so a complex pair meets
/// on the real axis at `p = c^2 / 4` and splits into two real branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompanionFoldModel {
    pub c: f64,
    pub p_init: f64,
    pub p_fin: f64,
}

impl Default for CompanionFoldModel {
    fn default() -> Self {
        Self {
            c: 2.0,
            p_init: 0.5,
            p_fin: 2.0,
        }
    }
}

pub fn make_companion_fold(c: f64) -> Result<CompanionFoldModel> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidConfig(format!("companion damping must be positive, got {c}")));
    }
    Ok(CompanionFoldModel {
        c,
        ..CompanionFoldModel::default()
    })
}

impl CompanionFoldModel {
    /// Parameter value of the fold.
    pub fn fold_point(&self) -> f64 {
        self.c * self.c / 4.0
    }

    pub fn provider(self) -> ModelProvider<Self> {
        ModelProvider::new(self)
    }
}

impl DaeModel for CompanionFoldModel {
    fn n_states(&self) -> usize {
        2
    }

    fn n_algebraic(&self) -> usize {
        0
    }

    fn f(&self, x: &[f64], _y: &[f64], p: f64, _setpoints: &[f64]) -> Vec<f64> {
        vec![x[1], -p * x[0] - self.c * x[1]]
    }

    fn g(&self, _x: &[f64], _y: &[f64], _p: f64, _setpoints: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn t_matrix(&self, _p: f64) -> SparseMatrix {
        SparseMatrix::identity(2)
    }

    fn parameter(&self) -> ParamDescriptor {
        ParamDescriptor {
            name: "p".into(),
            p_init: self.p_init,
            p_fin: self.p_fin,
        }
    }

    fn equilibrium(&self, p: f64, _warm: Option<&Equilibrium>) -> Result<Equilibrium> {
        Ok(Equilibrium {
            x: vec![0.0, 0.0],
            y: Vec::new(),
            p,
            setpoints: Vec::new(),
        })
    }

    fn analytic_jacobians(&self, eq: &Equilibrium) -> Option<Result<ModelBlocks>> {
        let fx = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, -eq.p), (1, 1, -self.c)]);
        Some(Ok(ModelBlocks {
            t: SparseMatrix::identity(2),
            r: SparseMatrix::zeros(0, 2),
            fx,
            fy: SparseMatrix::zeros(2, 0),
            gx: SparseMatrix::zeros(0, 2),
            gy: SparseMatrix::zeros(0, 0),
        }))
    }

    fn affine_in_parameter(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{fd_jacobians, FdOptions, PencilProvider};
    use crate::linalg::eigenvalues;
    use num_complex::Complex64;

    fn roots(c: f64, p: f64) -> [Complex64; 2] {
        let d = Complex64::new(c * c / 4.0 - p, 0.0).sqrt();
        [-c / 2.0 + d, -c / 2.0 - d]
    }

    fn spectrum(p: f64) -> Vec<Complex64> {
        let pen = make_companion_fold(2.0).unwrap().provider().pencil(p).unwrap();
        eigenvalues(&pen.a.to_dense()).unwrap()
    }

    #[test]
    fn eigenvalues_match_quadratic_formula() {
        for p in [0.25, 0.75, 1.25, 2.0, 4.0] {
            let s = spectrum(p);
            for r in roots(2.0, p) {
                assert!(s.iter().any(|z| (z - r).norm() < 1e-10), "p = {p}");
            }
        }
    }

    #[test]
    fn double_root_at_fold() {
        let s = spectrum(1.0);
        assert!(s.iter().all(|z| (z + 1.0).norm() < 1e-7));
    }

    #[test]
    fn analytic_and_fd_jacobians_agree() {
        let m = make_companion_fold(2.0).unwrap();
        let eq = m.equilibrium(1.5, None).unwrap();
        let fd = fd_jacobians(&m, &eq, &FdOptions::default());
        let an = m.analytic_jacobians(&eq).unwrap().unwrap();
        assert!(fd.fx.add_scaled(1.0, &an.fx, -1.0).unwrap().norm_inf() < 1e-6);
    }

    #[test]
    fn rejects_nonpositive_damping() {
        assert!(make_companion_fold(0.0).is_err());
    }
}
