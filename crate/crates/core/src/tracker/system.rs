use num_complex::Complex64;

use super::state::{pencil_apply, residual, TrackerState};
use crate::dae::{PencilProvider, PencilSample};
use crate::error::{Error, Result};
use crate::linalg::{LuFactorization, LuOptions, OrderingCache, SparseMatrix, TripletBuilder};

/// Normalization tolerance enforced by the corrector: `|phi^T phi - c|`.
pub const NORM_TOL: f64 = 1e-10;

/// Block matrix shared by the continuation ODE and the corrector Jacobian.
///
/// With `K = s_r E - A`, the rows read
/// `[K, -s_i E, E phi_r, -E phi_i]`, `[s_i E, K, E phi_i, E phi_r]`,
/// `w [phi_r^T, -phi_i^T, 0, 0]` and `w [phi_i^T, phi_r^T, 0, 0]`,
/// where `w` is 1 for the mass matrix and 2 for the Jacobian of `phi^T phi - c`.
fn augmented_matrix(e: &SparseMatrix, a: &SparseMatrix, st: &TrackerState, w: f64) -> Result<SparseMatrix> {
    let r = e.nrows();
    if st.dim() != r || a.nrows() != r {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} for a pencil of size {r}",
            st.dim()
        )));
    }
    let (sr, si) = (st.s.re, st.s.im);
    let k = e.add_scaled(sr, a, -1.0)?;
    let n = 2 * r + 2;
    let mut b = TripletBuilder::with_capacity(n, n, 2 * k.nnz() + 2 * e.nnz() + 8 * r);
    b.push_block(0, 0, &k, 1.0);
    b.push_block(r, r, &k, 1.0);
    if si != 0.0 {
        b.push_block(0, r, e, -si);
        b.push_block(r, 0, e, si);
    }
    let e_re = e.matvec(&st.phi.re);
    let e_im = e.matvec(&st.phi.im);
    let mut put = |i: usize, j: usize, v: f64| {
        if v != 0.0 {
            b.push(i, j, v);
        }
    };
    for i in 0..r {
        put(i, 2 * r, e_re[i]);
        put(i, 2 * r + 1, -e_im[i]);
        put(r + i, 2 * r, e_im[i]);
        put(r + i, 2 * r + 1, e_re[i]);
    }
    for j in 0..r {
        let (pr, pi) = (st.phi.re[j], st.phi.im[j]);
        put(2 * r, j, w * pr);
        put(2 * r, r + j, -w * pi);
        put(2 * r + 1, j, w * pi);
        put(2 * r + 1, r + j, w * pr);
    }
    Ok(b.build())
}

/// Mass matrix `M(y)` and right-hand side `h(y)` of `M y' = h`.
pub fn assemble_system(sample: &PencilSample, st: &TrackerState) -> Result<(SparseMatrix, Vec<f64>)> {
    let m = augmented_matrix(&sample.e, &sample.a, st, 1.0)?;
    let r = st.dim();
    let (sr, si) = (st.s.re, st.s.im);
    let ad_re = sample.adot.matvec(&st.phi.re);
    let ad_im = sample.adot.matvec(&st.phi.im);
    let ed_re = sample.edot.matvec(&st.phi.re);
    let ed_im = sample.edot.matvec(&st.phi.im);
    let mut h = vec![0.0; 2 * r + 2];
    for i in 0..r {
        h[i] = ad_re[i] - sr * ed_re[i] + si * ed_im[i];
        h[r + i] = ad_im[i] - si * ed_re[i] - sr * ed_im[i];
    }
    Ok((m, h))
}

/// Solution of `M y' = h` together with a 1-norm condition estimate of `M`.
#[derive(Debug, Clone)]
pub struct Tangent {
    pub ydot: Vec<f64>,
    pub cond: f64,
}

pub fn tangent(sample: &PencilSample, st: &TrackerState) -> Result<Tangent> {
    tangent_cached(sample, st, &OrderingCache::new())
}

fn tangent_cached(sample: &PencilSample, st: &TrackerState, cache: &OrderingCache) -> Result<Tangent> {
    let (m, h) = assemble_system(sample, st)?;
    let lu = LuFactorization::with_cache(&m, LuOptions::default(), cache)?;
    let ydot = lu.solve(&h)?;
    if ydot.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix {
            step: 0,
            pivot: 0.0,
        });
    }
    Ok(Tangent {
        ydot,
        cond: lu.condition_estimate(),
    })
}

fn axpy(y: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    y.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

/// One explicit Euler step `y + dp M^-1 h`.
pub fn predict_fem(sample: &PencilSample, st: &TrackerState, dp: f64) -> Result<TrackerState> {
    Ok(fem_step(sample, st, dp, &OrderingCache::new())?.0)
}

pub(crate) fn fem_step(
    sample: &PencilSample,
    st: &TrackerState,
    dp: f64,
    cache: &OrderingCache,
) -> Result<(TrackerState, f64)> {
    let t = tangent_cached(sample, st, cache)?;
    let y = axpy(&st.to_vec(), dp, &t.ydot);
    Ok((TrackerState::from_vec(&y, st.p + dp, st.c), t.cond))
}

/// Classical fourth-order Runge-Kutta step, rebuilding the pencil at every stage.
pub fn predict_rk4<P: PencilProvider + ?Sized>(
    provider: &P,
    st: &TrackerState,
    dp: f64,
    h_p: Option<f64>,
) -> Result<TrackerState> {
    let sample = provider.sample(st.p, h_p)?;
    Ok(rk4_step(provider, &sample, st, dp, h_p, &OrderingCache::new())?.0)
}

fn stage_sample<P: PencilProvider + ?Sized>(
    provider: &P,
    base: &PencilSample,
    p: f64,
    h_p: Option<f64>,
) -> Result<PencilSample> {
    if provider.is_affine() {
        let pen = provider.pencil(p)?;
        Ok(PencilSample {
            e: pen.e,
            a: pen.a,
            edot: base.edot.clone(),
            adot: base.adot.clone(),
            p,
            n_states: pen.n_states,
        })
    } else {
        provider.sample(p, h_p)
    }
}

pub(crate) fn rk4_step<P: PencilProvider + ?Sized>(
    provider: &P,
    sample: &PencilSample,
    st: &TrackerState,
    dp: f64,
    h_p: Option<f64>,
    cache: &OrderingCache,
) -> Result<(TrackerState, f64)> {
    let y0 = st.to_vec();
    let (p0, c) = (st.p, st.c);
    let k1 = tangent_cached(sample, st, cache)?;
    let mid = stage_sample(provider, sample, p0 + dp / 2.0, h_p)?;
    let y2 = axpy(&y0, dp / 2.0, &k1.ydot);
    let k2 = tangent_cached(&mid, &TrackerState::from_vec(&y2, mid.p, c), cache)?;
    let y3 = axpy(&y0, dp / 2.0, &k2.ydot);
    let k3 = tangent_cached(&mid, &TrackerState::from_vec(&y3, mid.p, c), cache)?;
    let end = stage_sample(provider, sample, p0 + dp, h_p)?;
    let y4 = axpy(&y0, dp, &k3.ydot);
    let k4 = tangent_cached(&end, &TrackerState::from_vec(&y4, end.p, c), cache)?;
    let y: Vec<f64> = (0..y0.len())
        .map(|i| y0[i] + dp / 6.0 * (k1.ydot[i] + 2.0 * k2.ydot[i] + 2.0 * k3.ydot[i] + k4.ydot[i]))
        .collect();
    Ok((TrackerState::from_vec(&y, p0 + dp, c), k1.cond))
}

/// Corrected state and the number of Newton iterations spent.
#[derive(Debug, Clone)]
pub struct Corrected {
    pub state: TrackerState,
    pub iterations: usize,
}

fn converged(e: &SparseMatrix, a: &SparseMatrix, st: &TrackerState, tol: f64) -> bool {
    residual(e, a, st.s, &st.phi) <= tol && st.normalization_error() <= NORM_TOL
}

/// Relative size of the last Newton update below which an iterate whose
/// residual is within tolerance is accepted.
pub const CORRECTOR_STEP_TOL: f64 = 1e-8;

/// Newton iteration on `[(s E - A) phi; phi^T phi - c] = 0` at fixed `p`.
///
/// An iterate is accepted once its residual is within `tol` and either no
/// update was needed or the last update was below [`CORRECTOR_STEP_TOL`].
/// Poorly conditioned eigenvalues can sit far from the root while the
/// residual is already small, so the update size is checked as well. When
/// the budget runs out, the residual test alone decides.
pub fn correct_newton(
    e: &SparseMatrix,
    a: &SparseMatrix,
    st: &TrackerState,
    tol: f64,
    max_iter: usize,
) -> Result<Corrected> {
    correct_newton_cached(e, a, st, tol, max_iter, &OrderingCache::new())
}

pub(crate) fn correct_newton_cached(
    e: &SparseMatrix,
    a: &SparseMatrix,
    st: &TrackerState,
    tol: f64,
    max_iter: usize,
    cache: &OrderingCache,
) -> Result<Corrected> {
    let fail = |iterations| Error::NoConvergence {
        what: "eigenpair corrector",
        iterations,
    };
    let r = st.dim();
    let mut cur = st.clone();
    let mut last_update = 0.0;
    for it in 0..=max_iter {
        if converged(e, a, &cur, tol) && (last_update <= CORRECTOR_STEP_TOL || it == max_iter) {
            return Ok(Corrected {
                state: cur,
                iterations: it,
            });
        }
        if it == max_iter {
            break;
        }
        let jac = augmented_matrix(e, a, &cur, 2.0)?;
        let (fr, fi) = pencil_apply(e, a, cur.s, &cur.phi);
        let q: Complex64 = cur.phi.bilinear_dot(&cur.phi) - cur.c;
        let mut rhs: Vec<f64> = fr.iter().chain(&fi).map(|v| -v).collect();
        rhs.push(-q.re);
        rhs.push(-q.im);
        let lu = LuFactorization::with_cache(&jac, LuOptions::default(), cache).map_err(|_| fail(it))?;
        let dy = lu.solve(&rhs)?;
        let y = axpy(&cur.to_vec(), 1.0, &dy);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(fail(it + 1));
        }
        let ds = Complex64::new(dy[2 * r], dy[2 * r + 1]).norm() / cur.s.norm().max(1.0);
        let dphi = dy[..2 * r].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        last_update = ds.max(dphi);
        cur = TrackerState::from_vec(&y, cur.p, cur.c);
        debug_assert_eq!(cur.dim(), r);
    }
    Err(fail(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{FnProvider, Pencil};
    use crate::linalg::ComplexVector;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn scalar_sample(a: f64, adot: f64) -> PencilSample {
        PencilSample {
            e: SparseMatrix::identity(1),
            a: SparseMatrix::diagonal(&[a]),
            edot: SparseMatrix::zeros(1, 1),
            adot: SparseMatrix::diagonal(&[adot]),
            p: 0.0,
            n_states: 1,
        }
    }

    fn real_state(s: f64, phi: &[f64], p: f64) -> TrackerState {
        TrackerState {
            phi: ComplexVector::from_real(phi.to_vec()),
            s: Complex64::new(s, 0.0),
            p,
            c: one(),
        }
    }

    #[test]
    fn scalar_system_by_hand() {
        let (a, ad) = (-1.5, 0.7);
        let (m, h) = assemble_system(&scalar_sample(a, ad), &real_state(a, &[1.0], 0.0)).unwrap();
        let expect = [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
        ];
        for (i, row) in expect.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(m.get(i, j), *v);
            }
        }
        assert_eq!(h, vec![ad, 0.0, 0.0, 0.0]);
        let t = tangent(&scalar_sample(a, ad), &real_state(a, &[1.0], 0.0)).unwrap();
        assert_eq!(t.ydot, vec![0.0, 0.0, ad, 0.0]);
    }

    #[test]
    fn stationary_pencil_has_zero_tangent() {
        let t = tangent(&scalar_sample(-2.0, 0.0), &real_state(-2.0, &[1.0], 0.0)).unwrap();
        assert!(t.ydot.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn imaginary_rhs_only_with_imaginary_content() {
        // diag(-1 + j, -1 - j) as the real 2x2 block [[-1, 1], [-1, -1]].
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, -1.0), (0, 1, 1.0), (1, 0, -1.0), (1, 1, -1.0)]);
        let sample = PencilSample {
            e: SparseMatrix::identity(2),
            a,
            edot: SparseMatrix::zeros(2, 2),
            adot: SparseMatrix::identity(2),
            p: 0.0,
            n_states: 2,
        };
        let h = 0.5f64.sqrt();
        let st = TrackerState {
            phi: ComplexVector::new(vec![h, 0.0], vec![0.0, h]).unwrap(),
            s: Complex64::new(-1.0, 1.0),
            p: 0.0,
            c: one(),
        };
        let (_, rhs) = assemble_system(&sample, &st).unwrap();
        assert!(rhs[2..4].iter().any(|&v| v != 0.0));
        let st_real = real_state(-1.0, &[1.0, 0.0], 0.0);
        let (_, rhs) = assemble_system(&sample, &st_real).unwrap();
        assert!(rhs[2..4].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fem_on_linear_eigenvalue() {
        let st = predict_fem(&scalar_sample(0.0, -1.0), &real_state(0.0, &[1.0], 0.0), 0.1).unwrap();
        assert_eq!(st.s, Complex64::new(-0.1, 0.0));
        assert_eq!(st.p, 0.1);
    }

    fn companion(p: f64) -> Result<Pencil> {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, -p), (1, 1, -2.0)]);
        Pencil::new(SparseMatrix::identity(2), a, 2)
    }

    fn companion_state(p: f64) -> TrackerState {
        let s = Complex64::new(-1.0, (p - 1.0).sqrt());
        let phi = ComplexVector::from_complex(&[one(), s]);
        let q = phi.bilinear_dot(&phi);
        TrackerState {
            phi: phi.scaled(q.sqrt().inv()),
            s,
            p,
            c: one(),
        }
    }

    #[test]
    fn fem_and_rk4_on_companion() {
        let prov = FnProvider::new(companion).affine(true);
        let st = companion_state(2.0);
        let sample = prov.sample(2.0, None).unwrap();
        let exact = Complex64::new(-1.0, 1.1f64.sqrt());
        let fem = predict_fem(&sample, &st, 0.1).unwrap();
        let err = (fem.s - exact).norm();
        assert!(err < 0.01 && err > 1e-5, "FEM error {err}");
        let rk = predict_rk4(&prov, &st, 0.1, None).unwrap();
        assert!((rk.s - exact).norm() < 1e-5);
        let lin = FnProvider::new(|p| {
            Pencil::new(SparseMatrix::identity(1), SparseMatrix::diagonal(&[-p]), 1)
        })
        .affine(true);
        let st = predict_rk4(&lin, &real_state(0.0, &[1.0], 0.0), 0.1, None).unwrap();
        assert!((st.s.re + 0.1).abs() < 1e-12);
    }

    #[test]
    fn corrector_linear_in_s() {
        let e = SparseMatrix::identity(1);
        let a = SparseMatrix::diagonal(&[-2.0]);
        let c = correct_newton(&e, &a, &real_state(-1.99, &[1.0], 0.0), 1e-10, 10).unwrap();
        assert_eq!(c.iterations, 2);
        assert!((c.state.s.re + 2.0).abs() < 1e-14);
    }

    #[test]
    fn corrector_fixed_point() {
        let st = companion_state(2.0);
        let pen = companion(2.0).unwrap();
        let c = correct_newton(&pen.e, &pen.a, &st, 1e-10, 10).unwrap();
        assert_eq!(c.iterations, 0);
        assert_eq!(c.state, st);
    }

    #[test]
    fn corrector_gives_up() {
        let pen = companion(2.0).unwrap();
        let st = real_state(5.0, &[1.0, 0.3], 2.0);
        let r = correct_newton(&pen.e, &pen.a, &st, 1e-10, 1);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}
