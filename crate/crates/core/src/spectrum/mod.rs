//! Dense-oracle utilities: full spectra through the reduced state matrix,
//! MAC pairing across parameter steps, participation factors, and reference
//! trajectories built from repeated eigendecompositions.

mod modal;
mod reference;

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::dae::{Pencil, PencilProvider};
use crate::error::{Error, Result};
use crate::linalg::{eig_dense, eigenvalues, ComplexVector, DenseMatrix, LuFactorization, LuOptions};

pub use modal::{mac, pair_by_mac, participation_factors, Pairing, ParticipationMatrix};
pub use reference::{reference_trajectory, ReferencePoint, ReferenceTrajectory, LOW_MAC_FLAG};

/// An eigenvalue with its right and optional left eigenvector.
///
/// Left vectors always live in state coordinates (length `n`) and satisfy
/// `psi^T A_red = s psi^T`. Right vectors are either in state coordinates or,
/// when lifted, in full pencil coordinates `[phi_x; phi_y]`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub s: Complex64,
    pub right: ComplexVector,
    pub left: Option<ComplexVector>,
}

/// Finite spectrum of the pencil at `p` via the reduced state matrix.
pub fn full_spectrum<P: PencilProvider + ?Sized>(
    provider: &P,
    p: f64,
    want_left: bool,
    lift: bool,
) -> Result<Vec<EigenPair>> {
    spectrum_of_pencil(&provider.pencil(p)?, want_left, lift)
}

pub fn spectrum_of_pencil(pencil: &Pencil, want_left: bool, lift: bool) -> Result<Vec<EigenPair>> {
    let reduced = pencil.reduce()?;
    let pairs = eig_dense(&reduced.state_matrix, want_left)?;
    let m = reduced.lift.nrows();
    Ok(pairs
        .into_iter()
        .map(|ev| {
            let right = if lift && m > 0 {
                lift_vector(&reduced.lift, &ev.right)
            } else {
                ev.right
            };
            EigenPair {
                s: ev.value,
                right,
                left: ev.left,
            }
        })
        .collect())
}

/// Appends `phi_y = -W phi_x` to a state-coordinate vector.
fn lift_vector(w: &DenseMatrix, phi_x: &ComplexVector) -> ComplexVector {
    let mut re = phi_x.re.clone();
    let mut im = phi_x.im.clone();
    re.extend(w.matvec(&phi_x.re).into_iter().map(|v| -v));
    im.extend(w.matvec(&phi_x.im).into_iter().map(|v| -v));
    ComplexVector { re, im }
}

/// Finite eigenvalues of `s E - A` computed directly on the pencil, without
/// forming the reduced matrix.
///
/// Uses the shift-invert map `(A - sigma E)^-1 E`, whose eigenvalues are
/// `1 / (s - sigma)`; infinite eigenvalues of the pencil map to zero. The
/// `n_finite` entries of largest modulus are returned.
pub fn pencil_finite_eigenvalues(pencil: &Pencil, n_finite: usize) -> Result<Vec<Complex64>> {
    let r = pencil.dim();
    if n_finite > r {
        return Err(Error::DimensionMismatch(format!(
            "{n_finite} finite eigenvalues requested from a pencil of size {r}"
        )));
    }
    let mut last_err = None;
    for sigma in [0.37, -1.13, 2.71, -7.9] {
        let shifted = pencil.a.add_scaled(1.0, &pencil.e, -sigma)?;
        let lu = match LuFactorization::new(&shifted, LuOptions::default()) {
            Ok(lu) => lu,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let mut w = DenseMatrix::zeros(r, r);
        for j in 0..r {
            if pencil.e.column_is_structurally_zero(j) {
                continue;
            }
            let mut col = vec![0.0; r];
            let (rows, vals) = pencil.e.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                col[i] = v;
            }
            w.set_column(j, &lu.solve(&col)?);
        }
        let mut mu = eigenvalues(&w)?;
        mu.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        return Ok(mu
            .into_iter()
            .take(n_finite)
            .map(|m| Complex64::new(sigma, 0.0) + m.inv())
            .collect());
    }
    Err(last_err.unwrap_or(Error::SingularStateMatrix))
}

/// `-Re(s) / |s|`; zero for the zero eigenvalue.
pub fn damping_ratio(s: Complex64) -> f64 {
    let mag = s.norm();
    if mag == 0.0 {
        0.0
    } else {
        -s.re / mag
    }
}

/// `|Im(s)| / 2 pi`.
pub fn frequency_hz(s: Complex64) -> f64 {
    s.im.abs() / (2.0 * std::f64::consts::PI)
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    index: usize,
    s_re: f64,
    s_im: f64,
    damping_ratio: f64,
    frequency_hz: f64,
}

/// Writes `index,s_re,s_im,damping_ratio,frequency_hz`.
pub fn write_spectrum_csv<W: Write>(out: W, pairs: &[EigenPair]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (index, pair) in pairs.iter().enumerate() {
        w.serialize(SpectrumRow {
            index,
            s_re: pair.s.re,
            s_im: pair.s.im,
            damping_ratio: damping_ratio(pair.s),
            frequency_hz: frequency_hz(pair.s),
        })
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{assemble_pencil, FnProvider, ModelBlocks};
    use crate::linalg::SparseMatrix;

    fn scalar(v: f64) -> SparseMatrix {
        SparseMatrix::from_triplets(1, 1, vec![(0, 0, v)])
    }

    fn toy_pencil() -> Pencil {
        assemble_pencil(&ModelBlocks {
            t: scalar(1.0),
            r: SparseMatrix::zeros(1, 1),
            fx: scalar(-1.0),
            fy: scalar(1.0),
            gx: scalar(1.0),
            gy: scalar(-2.0),
        })
        .unwrap()
    }

    #[test]
    fn reduced_toy_has_single_eigenvalue() {
        let pairs = spectrum_of_pencil(&toy_pencil(), true, true).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].s - Complex64::new(-0.5, 0.0)).norm() < 1e-14);
        // Lifted vector satisfies the full pencil equation.
        let v = &pairs[0].right;
        assert_eq!(v.len(), 2);
        let ratio = v.re[1] / v.re[0];
        assert!((ratio - 0.5).abs() < 1e-14);
    }

    #[test]
    fn decoupled_diagonal() {
        let prov = FnProvider::new(|_| {
            Pencil::new(SparseMatrix::identity(2), SparseMatrix::diagonal(&[-1.0, -2.0]), 2)
        });
        let mut s: Vec<f64> = full_spectrum(&prov, 0.0, false, false)
            .unwrap()
            .iter()
            .map(|p| p.s.re)
            .collect();
        s.sort_by(f64::total_cmp);
        assert_eq!(s, vec![-2.0, -1.0]);
    }

    #[test]
    fn spring_chain_spectrum_is_conjugate_symmetric() {
        // Two equal masses, springs to ground and between them, light damping.
        let a = DenseMatrix::from_rows(&[
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![-2.0, 1.0, -0.1, 0.0],
            vec![1.0, -2.0, 0.0, -0.1],
        ]);
        let pencil =
            Pencil::new(SparseMatrix::identity(4), SparseMatrix::from_dense(&a, 0.0), 4).unwrap();
        let s: Vec<Complex64> = spectrum_of_pencil(&pencil, false, false)
            .unwrap()
            .iter()
            .map(|p| p.s)
            .collect();
        for z in &s {
            assert!(s.iter().any(|w| (w - z.conj()).norm() < 1e-12));
        }
    }

    #[test]
    fn shift_invert_matches_reduction() {
        let s = pencil_finite_eigenvalues(&toy_pencil(), 1).unwrap();
        assert!((s[0] - Complex64::new(-0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn damping_and_frequency() {
        let s = Complex64::new(-3.0, 4.0);
        assert!((damping_ratio(s) - 0.6).abs() < 1e-15);
        assert!((frequency_hz(s) - 4.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert_eq!(damping_ratio(Complex64::new(-2.0, 0.0)), 1.0);
    }

    #[test]
    fn spectrum_csv_header() {
        let pairs = vec![EigenPair {
            s: Complex64::new(-1.0, 2.0),
            right: ComplexVector::zeros(1),
            left: None,
        }];
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &pairs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,s_re,s_im,damping_ratio,frequency_hz\n0,-1.0,2.0,"));
    }
}
