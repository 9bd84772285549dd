use eigtrack::linalg::{eig_dense, lu_factor, DenseMatrix, SparseMatrix};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn random_sparse(n: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        // Diagonal dominance keeps the sample well conditioned.
        t.push((i, i, 4.0 + rng.gen::<f64>()));
        for j in 0..n {
            if i != j && rng.gen::<f64>() < density {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, t)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lu_solve_residual_is_small(n in 1usize..200, seed in any::<u64>()) {
        let m = random_sparse(n, 3.0 / n as f64, seed);
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed ^ 0x5a5a);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let f = lu_factor(&m).unwrap();
        let x = f.solve(&b).unwrap();
        let r: Vec<f64> = m.matvec(&x).iter().zip(&b).map(|(a, c)| a - c).collect();
        let rel = norm_inf(&r) / (m.norm_inf() * norm_inf(&x) + norm_inf(&b));
        prop_assert!(rel <= 1e-10, "relative residual {rel}");
    }

    #[test]
    fn eigen_sum_and_product_match_trace_and_determinant(n in 1usize..=10, seed in any::<u64>()) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a = DenseMatrix::from_row_major(n, n, data);
        let pairs = eig_dense(&a, false).unwrap();
        prop_assert_eq!(pairs.len(), n);
        let sum: Complex64 = pairs.iter().map(|p| p.value).sum();
        let prod: Complex64 = pairs.iter().map(|p| p.value).product();
        let fro = a.frobenius_norm();
        prop_assert!((sum - a.trace()).norm() <= 1e-8 * fro);
        let det = a.determinant();
        prop_assert!((prod - det).norm() <= 1e-6 * det.abs().max(1e-300) + 1e-12 * fro.powi(n as i32));
    }

    #[test]
    fn every_eigenpair_meets_residual_contract(n in 1usize..=40, seed in any::<u64>()) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let a = DenseMatrix::from_row_major(n, n, data);
        let at = a.transpose();
        for p in eig_dense(&a, true).unwrap() {
            prop_assert!(rel_residual(&a, p.value, &p.right.to_complex()) <= 1e-8);
            let left = p.left.unwrap().to_complex();
            prop_assert!(rel_residual(&at, p.value, &left) <= 1e-8);
        }
    }
}

fn rel_residual(a: &DenseMatrix, s: Complex64, v: &[Complex64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for (j, vj) in v.iter().enumerate() {
            row += a[(i, j)] * vj;
        }
        acc += (row - s * v[i]).norm_sqr();
    }
    let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    acc.sqrt() / (a.frobenius_norm() * vn)
}

#[test]
fn badly_scaled_matrix_is_balanced() {
    // Entries spanning many orders of magnitude, as in swing equations with a base frequency.
    let a = DenseMatrix::from_rows(&[
        vec![0.0, 314.159, 0.0],
        vec![-0.02, -0.01, 1e-3],
        vec![0.0, -40.0, -0.2],
    ]);
    for p in eig_dense(&a, true).unwrap() {
        assert!(rel_residual(&a, p.value, &p.right.to_complex()) <= 1e-12);
    }
}
