use super::{full_spectrum, mac, pair_by_mac, EigenPair};
use crate::dae::PencilProvider;
use crate::error::{Error, Result};

/// Steps whose matched MAC falls below this value are flagged.
pub const LOW_MAC_FLAG: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct ReferencePoint {
    pub p: f64,
    /// Full finite spectrum with eigenvectors lifted to pencil coordinates.
    pub spectrum: Vec<EigenPair>,
    pub tracked: usize,
    /// MAC between the tracked vectors at this and the previous grid point.
    pub mac: f64,
    pub low_mac: bool,
}

impl ReferencePoint {
    pub fn tracked_pair(&self) -> &EigenPair {
        &self.spectrum[self.tracked]
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReferenceTrajectory {
    pub points: Vec<ReferencePoint>,
}

impl ReferenceTrajectory {
    pub fn low_mac_steps(&self) -> impl Iterator<Item = &ReferencePoint> {
        self.points.iter().filter(|p| p.low_mac)
    }
}

impl ReferenceTrajectory {
    /// Appends the dense spectrum at `p`, following the tracked eigenvalue
    /// of the previous point by MAC pairing. On an empty trajectory
    /// `seed_index` picks the eigenvalue to follow.
    pub fn push<P: PencilProvider + ?Sized>(&mut self, provider: &P, p: f64, seed_index: usize) -> Result<()> {
        let spectrum = full_spectrum(provider, p, false, true)?;
        let (tracked, m) = match self.points.last() {
            None => {
                if seed_index >= spectrum.len() {
                    return Err(Error::InvalidConfig(format!(
                        "seed index {seed_index} out of range for {} eigenvalues",
                        spectrum.len()
                    )));
                }
                (seed_index, 1.0)
            }
            Some(prev) => {
                let pairing = pair_by_mac(&prev.spectrum, &spectrum)?;
                match pairing.map[prev.tracked] {
                    Some(j) => (j, pairing.mac[prev.tracked]),
                    None => best_by_mac(prev.tracked_pair(), &spectrum)?,
                }
            }
        };
        self.points.push(ReferencePoint {
            p,
            spectrum,
            tracked,
            mac: m,
            low_mac: m < LOW_MAC_FLAG,
        });
        Ok(())
    }
}

/// Dense eigendecomposition at every grid point, following `seed_index`
/// (an index into the spectrum at the first grid point) by MAC pairing.
pub fn reference_trajectory<P: PencilProvider + ?Sized>(
    provider: &P,
    p_grid: &[f64],
    seed_index: usize,
) -> Result<ReferenceTrajectory> {
    let mut traj = ReferenceTrajectory {
        points: Vec::with_capacity(p_grid.len()),
    };
    for &p in p_grid {
        traj.push(provider, p, seed_index)?;
    }
    Ok(traj)
}

fn best_by_mac(target: &EigenPair, spectrum: &[EigenPair]) -> Result<(usize, f64)> {
    let mut best = (0, -1.0);
    for (j, cand) in spectrum.iter().enumerate() {
        let m = mac(&target.right, &cand.right)?;
        if m > best.1 {
            best = (j, m);
        }
    }
    if best.1 < 0.0 {
        return Err(Error::NoCandidate {
            best_mac: 0.0,
            threshold: 0.0,
        });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{FnProvider, Pencil};
    use crate::linalg::SparseMatrix;

    #[test]
    fn scalar_linear_trajectory() {
        let prov = FnProvider::new(|p| {
            Pencil::new(SparseMatrix::identity(1), SparseMatrix::from_triplets(1, 1, vec![(0, 0, -p)]), 1)
        });
        let r = reference_trajectory(&prov, &[0.0, 0.5, 1.0], 0).unwrap();
        let s: Vec<f64> = r.points.iter().map(|pt| pt.tracked_pair().s.re).collect();
        assert_eq!(s, vec![0.0, -0.5, -1.0]);
    }

    #[test]
    fn constant_provider_gives_constant_trajectory() {
        let prov = FnProvider::new(|_| {
            Pencil::new(SparseMatrix::identity(2), SparseMatrix::diagonal(&[-1.0, -5.0]), 2)
        });
        let r = reference_trajectory(&prov, &[0.0, 1.0, 2.0, 3.0], 1).unwrap();
        let first = r.points[0].tracked_pair().s;
        assert!(r.points.iter().all(|pt| pt.tracked_pair().s == first && !pt.low_mac));
    }

    #[test]
    fn seed_out_of_range() {
        let prov = FnProvider::new(|_| Pencil::new(SparseMatrix::identity(1), SparseMatrix::identity(1), 1));
        assert!(reference_trajectory(&prov, &[0.0], 3).is_err());
    }
}
