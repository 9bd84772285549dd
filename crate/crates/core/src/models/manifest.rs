use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dae::{Pencil, PencilProvider};
use crate::error::{Error, Result};
use crate::linalg::{read_matrix_market_file, write_matrix_market_file, SparseMatrix};

/// Pencils read from Matrix Market files at a fixed list of parameter values.
///
/// The provider evaluates only at the listed values. Parameter derivatives
/// are divided differences of neighbouring entries: central in the interior,
/// one-sided at the ends.
#[derive(Debug, Clone)]
pub struct PencilSequence {
    ps: Vec<f64>,
    pencils: Vec<Pencil>,
}

impl PencilSequence {
    /// Builds a sequence from in-memory pencils; `p` must be strictly monotone.
    pub fn new(entries: Vec<(f64, Pencil)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Manifest("no pencils listed".into()));
        }
        let ps: Vec<f64> = entries.iter().map(|(p, _)| *p).collect();
        if ps.iter().any(|p| !p.is_finite()) {
            return Err(Error::Manifest("parameter values must be finite".into()));
        }
        let increasing = ps.windows(2).all(|w| w[1] > w[0]);
        let decreasing = ps.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Manifest("parameter values are not strictly monotone".into()));
        }
        let dim = entries[0].1.dim();
        for (p, pen) in &entries {
            if pen.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "pencil at p = {p} has dimension {}, expected {dim}",
                    pen.dim()
                )));
            }
        }
        let pencils = entries.into_iter().map(|(_, pen)| pen).collect();
        Ok(Self { ps, pencils })
    }

    pub fn len(&self) -> usize {
        self.ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ps.is_empty()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.ps
    }

    /// Dimension `r` shared by all pencils.
    pub fn dim(&self) -> usize {
        self.pencils[0].dim()
    }

    fn index_of(&self, p: f64) -> Result<usize> {
        let tol = 1e-12 * p.abs().max(1.0);
        self.ps
            .iter()
            .position(|&q| (q - p).abs() <= tol)
            .ok_or(Error::ParameterNotAvailable(p))
    }
}

impl PencilProvider for PencilSequence {
    fn pencil(&self, p: f64) -> Result<Pencil> {
        Ok(self.pencils[self.index_of(p)?].clone())
    }

    fn derivatives(&self, p: f64, _base: &Pencil, _h_p: Option<f64>) -> Result<(SparseMatrix, SparseMatrix)> {
        let k = self.index_of(p)?;
        let last = self.len() - 1;
        if last == 0 {
            let r = self.dim();
            return Ok((SparseMatrix::zeros(r, r), SparseMatrix::zeros(r, r)));
        }
        let (lo, hi) = match k {
            0 => (0, 1),
            k if k == last => (last - 1, last),
            k => (k - 1, k + 1),
        };
        let w = 1.0 / (self.ps[hi] - self.ps[lo]);
        let (a, b) = (&self.pencils[hi], &self.pencils[lo]);
        Ok((a.e.add_scaled(w, &b.e, -w)?, a.a.add_scaled(w, &b.a, -w)?))
    }

    fn domain(&self) -> Option<(f64, f64)> {
        let (a, b) = (self.ps[0], self.ps[self.len() - 1]);
        Some((a.min(b), a.max(b)))
    }

    fn grid(&self) -> Option<Vec<f64>> {
        Some(self.ps.clone())
    }
}

/// Reads a manifest whose lines are `p <tab> E-file <tab> A-file`.
///
/// File paths are relative to the manifest's directory. Blank lines and lines
/// starting with `#` are ignored. The state count is inferred from the last
/// structurally nonzero column of the first `E`.
pub fn load_pencil_sequence(manifest_path: &Path) -> Result<PencilSequence> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| Error::Manifest(format!("{}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    let mut n_states = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() != 3 {
            return Err(Error::Manifest(format!(
                "line {}: expected 3 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let p: f64 = fields[0]
            .parse()
            .map_err(|_| Error::Manifest(format!("line {}: bad parameter '{}'", lineno + 1, fields[0])))?;
        let read = |f: &str| -> Result<SparseMatrix> {
            let path = resolve(base, f);
            if !path.is_file() {
                return Err(Error::Manifest(format!("line {}: missing file {}", lineno + 1, path.display())));
            }
            read_matrix_market_file(&path)
        };
        let (e, a) = (read(fields[1])?, read(fields[2])?);
        let pencil = match n_states {
            None => {
                let pen = Pencil::infer(e, a)?;
                n_states = Some(pen.n_states);
                pen
            }
            Some(n) => Pencil::new(e, a, n)?,
        };
        entries.push((p, pencil));
    }
    PencilSequence::new(entries)
}

fn resolve(base: &Path, f: &str) -> PathBuf {
    let path = Path::new(f);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Writes `E_k.mtx`, `A_k.mtx` and a `manifest.tsv` for the given pencils
/// into `dir`, returning the manifest path.
pub fn write_pencil_sequence(dir: &Path, entries: &[(f64, Pencil)]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (k, (p, pen)) in entries.iter().enumerate() {
        let (ef, af) = (format!("E_{k}.mtx"), format!("A_{k}.mtx"));
        write_matrix_market_file(&dir.join(&ef), &pen.e)?;
        write_matrix_market_file(&dir.join(&af), &pen.a)?;
        writeln!(manifest, "{p:?}\t{ef}\t{af}").unwrap();
    }
    let path = dir.join("manifest.tsv");
    std::fs::write(&path, manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_pencil(v: f64) -> Pencil {
        Pencil::new(SparseMatrix::identity(2), SparseMatrix::diagonal(&[v, -1.0]), 2).unwrap()
    }

    #[test]
    fn neighbour_differences() {
        let seq = PencilSequence::new(vec![(0.0, diag_pencil(0.0)), (1.0, diag_pencil(2.0)), (3.0, diag_pencil(3.0))])
            .unwrap();
        let base = seq.pencil(1.0).unwrap();
        let (_, mid) = seq.derivatives(1.0, &base, None).unwrap();
        assert!((mid.get(0, 0) - 1.0).abs() < 1e-15);
        let (_, end) = seq.derivatives(3.0, &base, None).unwrap();
        assert!((end.get(0, 0) - 0.5).abs() < 1e-15);
        assert_eq!(seq.pencil(0.5), Err(Error::ParameterNotAvailable(0.5)));
    }

    #[test]
    fn decreasing_lists_are_monotone() {
        let seq = PencilSequence::new(vec![(2.0, diag_pencil(0.0)), (1.0, diag_pencil(1.0))]).unwrap();
        assert_eq!(seq.domain(), Some((1.0, 2.0)));
        assert!(matches!(
            PencilSequence::new(vec![(1.0, diag_pencil(0.0)), (1.0, diag_pencil(1.0))]),
            Err(Error::Manifest(_))
        ));
    }
}
