use num_complex::Complex64;

use super::EigenPair;
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;

/// Modal assurance criterion `|a^H b|^2 / ((a^H a)(b^H b))`.
pub fn mac(a: &ComplexVector, b: &ComplexVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("MAC of vectors of length {} and {}", a.len(), b.len())));
    }
    let aa = a.hermitian_dot(a).re;
    let bb = b.hermitian_dot(b).re;
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((a.hermitian_dot(b).norm_sqr() / (aa * bb)).min(1.0))
}

/// Result of matching one spectrum to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    /// For each entry of the previous list, its partner in the next list.
    pub map: Vec<Option<usize>>,
    /// MAC of each matched pair, zero when unmatched.
    pub mac: Vec<f64>,
    /// Entries of the next list that received no partner.
    pub unmatched_next: Vec<usize>,
}

const MAC_TIE: f64 = 1e-12;

/// Greedy maximum-MAC matching; near-equal MACs are resolved by the
/// smaller eigenvalue distance.
pub fn pair_by_mac(prev: &[EigenPair], next: &[EigenPair]) -> Result<Pairing> {
    let mut table = Vec::with_capacity(prev.len() * next.len());
    for (i, a) in prev.iter().enumerate() {
        for (j, b) in next.iter().enumerate() {
            table.push((i, j, mac(&a.right, &b.right)?, (a.s - b.s).norm()));
        }
    }
    let mut map = vec![None; prev.len()];
    let mut macs = vec![0.0; prev.len()];
    let mut taken = vec![false; next.len()];
    loop {
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for &(i, j, m, d) in &table {
            if map[i].is_some() || taken[j] {
                continue;
            }
            best = match best {
                None => Some((i, j, m, d)),
                Some(b) if m > b.2 + MAC_TIE || ((m - b.2).abs() <= MAC_TIE && d < b.3) => {
                    Some((i, j, m, d))
                }
                keep => keep,
            };
        }
        match best {
            Some((i, j, m, _)) => {
                map[i] = Some(j);
                macs[i] = m;
                taken[j] = true;
            }
            None => break,
        }
    }
    let unmatched_next = (0..next.len()).filter(|&j| !taken[j]).collect();
    Ok(Pairing {
        map,
        mac: macs,
        unmatched_next,
    })
}

/// Participation factors `p_ki = psi_ik phi_ki`, indexed by state `k` and mode `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationMatrix {
    pub n_states: usize,
    pub n_modes: usize,
    values: Vec<Complex64>,
}

impl ParticipationMatrix {
    pub fn get(&self, state: usize, mode: usize) -> Complex64 {
        self.values[state * self.n_modes + mode]
    }

    /// Participations of every state in one mode.
    pub fn mode(&self, mode: usize) -> Vec<Complex64> {
        (0..self.n_states).map(|k| self.get(k, mode)).collect()
    }
}

/// Participation factors with left vectors rescaled so that `psi_i phi_i = 1`.
///
/// Only the state components of each right vector are used, so lifted and
/// unlifted spectra give the same result.
pub fn participation_factors(pairs: &[EigenPair]) -> Result<ParticipationMatrix> {
    let n_modes = pairs.len();
    let n_states = match pairs.first().and_then(|p| p.left.as_ref()) {
        Some(l) => l.len(),
        None if pairs.is_empty() => 0,
        None => return Err(Error::InvalidConfig("participation factors need left eigenvectors".into())),
    };
    let mut values = vec![Complex64::new(0.0, 0.0); n_states * n_modes];
    for (i, pair) in pairs.iter().enumerate() {
        let left = pair
            .left
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("participation factors need left eigenvectors".into()))?;
        if left.len() != n_states || pair.right.len() < n_states {
            return Err(Error::DimensionMismatch("left and right eigenvector lengths".into()));
        }
        let phi = pair.right.head(n_states);
        let scale = left.bilinear_dot(&phi);
        let size = left.norm2() * phi.norm2();
        if scale.norm() <= 1e-14 * size || size == 0.0 {
            return Err(Error::DegeneratePair(i));
        }
        for k in 0..n_states {
            values[k * n_modes + i] = left.get(k) * phi.get(k) / scale;
        }
    }
    Ok(ParticipationMatrix {
        n_states,
        n_modes,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_dense, DenseMatrix};

    fn pair(s: f64, v: &[f64]) -> EigenPair {
        EigenPair {
            s: Complex64::new(s, 0.0),
            right: ComplexVector::from_real(v.to_vec()),
            left: None,
        }
    }

    fn pairs_of(a: &DenseMatrix) -> Vec<EigenPair> {
        eig_dense(a, true)
            .unwrap()
            .into_iter()
            .map(|e| EigenPair {
                s: e.value,
                right: e.right,
                left: e.left,
            })
            .collect()
    }

    #[test]
    fn mac_basics() {
        let a = ComplexVector::new(vec![1.0, 2.0], vec![0.5, -1.0]).unwrap();
        assert!((mac(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b = a.scaled(Complex64::new(0.0, 2.0));
        assert!((mac(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        let e0 = ComplexVector::from_real(vec![1.0, 0.0]);
        let e1 = ComplexVector::from_real(vec![0.0, 1.0]);
        assert_eq!(mac(&e0, &e1).unwrap(), 0.0);
        assert_eq!(mac(&e0, &ComplexVector::zeros(2)).unwrap_err(), Error::ZeroVector);
    }

    #[test]
    fn identical_lists_pair_identically() {
        let l = vec![pair(-1.0, &[1.0, 0.2]), pair(-3.0, &[0.1, 1.0])];
        let p = pair_by_mac(&l, &l).unwrap();
        assert_eq!(p.map, vec![Some(0), Some(1)]);
        assert!(p.unmatched_next.is_empty());
    }

    #[test]
    fn swapped_order_is_recovered() {
        let a = DenseMatrix::from_rows(&[vec![-1.0, 0.3, 0.0], vec![0.0, -4.0, 1.0], vec![0.2, 0.0, -9.0]]);
        let prev = pairs_of(&a);
        let perm = [2usize, 0, 1];
        let next: Vec<EigenPair> = perm.iter().map(|&k| prev[k].clone()).collect();
        let p = pair_by_mac(&prev, &next).unwrap();
        for (i, m) in p.map.iter().enumerate() {
            assert_eq!(perm[m.unwrap()], i);
        }
    }

    #[test]
    fn crossing_follows_eigenvectors() {
        // Mode x has moved from -1 to -2.1, mode y from -2 to -0.9: distance
        // pairing would swap them.
        let prev = vec![pair(-1.0, &[1.0, 0.05]), pair(-2.0, &[0.05, 1.0])];
        let next = vec![pair(-0.9, &[0.06, 1.0]), pair(-2.1, &[1.0, 0.04])];
        let p = pair_by_mac(&prev, &next).unwrap();
        assert_eq!(p.map, vec![Some(1), Some(0)]);
    }

    #[test]
    fn unmatched_are_reported() {
        let prev = vec![pair(-1.0, &[1.0, 0.0])];
        let next = vec![pair(-1.0, &[1.0, 0.0]), pair(-2.0, &[0.0, 1.0])];
        let p = pair_by_mac(&prev, &next).unwrap();
        assert_eq!(p.unmatched_next, vec![1]);
    }

    #[test]
    fn diagonal_participation_is_identity() {
        let a = DenseMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -3.0]]);
        let pf = participation_factors(&pairs_of(&a)).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                let s = pairs_of(&a)[i].s.re;
                let expect = if (s + 1.0).abs() < 1e-12 { k == 0 } else { k == 1 };
                assert!((pf.get(k, i).re - f64::from(expect as u8)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn participation_sums_to_one() {
        let a = DenseMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![-2.0, -0.3, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.1, -3.0, -0.2],
        ]);
        let pf = participation_factors(&pairs_of(&a)).unwrap();
        for i in 0..4 {
            let sum: Complex64 = pf.mode(i).iter().sum();
            assert!((sum - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn symmetric_chain_in_phase_mode() {
        // States: x1, x2, v1, v2; identical masses coupled by a spring.
        let a = DenseMatrix::from_rows(&[
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![-1.0, 0.5, -0.1, 0.0],
            vec![0.5, -1.0, 0.0, -0.1],
        ]);
        let pairs = pairs_of(&a);
        let pf = participation_factors(&pairs).unwrap();
        // In-phase mode: x1 = x2, slowest frequency.
        let (i, _) = pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.s.im > 0.0)
            .min_by(|a, b| a.1.s.im.total_cmp(&b.1.s.im))
            .unwrap();
        let v = &pairs[i].right;
        assert!((v.get(0) - v.get(1)).norm() < 1e-10);
        assert!((pf.get(2, i) - pf.get(3, i)).norm() < 1e-10);
    }

    #[test]
    fn missing_left_vectors_rejected() {
        assert!(participation_factors(&[pair(-1.0, &[1.0])]).is_err());
    }

    #[test]
    fn degenerate_pair_detected() {
        let p = EigenPair {
            s: Complex64::new(-1.0, 0.0),
            right: ComplexVector::from_real(vec![1.0, 0.0]),
            left: Some(ComplexVector::from_real(vec![0.0, 1.0])),
        };
        assert_eq!(participation_factors(&[p]).unwrap_err(), Error::DegeneratePair(0));
    }
}
