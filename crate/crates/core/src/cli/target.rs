use std::path::Path;

use num_complex::Complex64;

use super::config::TargetSelector;
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::spectrum::{damping_ratio, mac, EigenPair};

/// Two candidates whose scores differ by less than this are ambiguous.
pub const TARGET_TIE: f64 = 1e-9;

/// Indices into `pairs` of the eigenvalues to follow.
pub fn select_targets(selector: &TargetSelector, pairs: &[EigenPair]) -> Result<Vec<usize>> {
    match selector {
        TargetSelector::Indices(idx) => {
            if let Some(&bad) = idx.iter().find(|&&k| k >= pairs.len()) {
                return Err(Error::InvalidConfig(format!(
                    "target index {bad} out of range for {} eigenvalues",
                    pairs.len()
                )));
            }
            let mut seen = idx.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != idx.len() {
                return Err(Error::InvalidConfig("repeated target index".into()));
            }
            Ok(idx.clone())
        }
        TargetSelector::Box(b) => select_in_box(*b, pairs).map(|k| vec![k]),
        TargetSelector::Mac(path) => {
            let reference = read_vector(path)?;
            select_by_mac(&reference, pairs).map(|k| vec![k])
        }
    }
}

/// Score of an eigenvalue inside the box `[re0, re1] x [im0, im1]`.
///
/// Proximity falls linearly from 1 at the box center to 0 at its corners
/// and is weighted by `1 - zeta`, so that among equally close candidates the
/// least damped one wins.
pub fn box_score(b: [f64; 4], s: Complex64) -> Option<f64> {
    let [re0, re1, im0, im1] = b;
    if s.re < re0 || s.re > re1 || s.im < im0 || s.im > im1 {
        return None;
    }
    let center = Complex64::new(0.5 * (re0 + re1), 0.5 * (im0 + im1));
    let radius = 0.5 * Complex64::new(re1 - re0, im1 - im0).norm();
    let proximity = if radius > 0.0 { 1.0 - (s - center).norm() / radius } else { 1.0 };
    Some((1.0 - damping_ratio(s)) * proximity)
}

fn select_in_box(b: [f64; 4], pairs: &[EigenPair]) -> Result<usize> {
    let scored: Vec<(usize, f64)> = pairs
        .iter()
        .enumerate()
        .filter_map(|(k, e)| box_score(b, e.s).map(|v| (k, v)))
        .collect();
    best_unique(scored, "target box")
}

fn select_by_mac(reference: &ComplexVector, pairs: &[EigenPair]) -> Result<usize> {
    let mut scored = Vec::with_capacity(pairs.len());
    for (k, e) in pairs.iter().enumerate() {
        if e.right.len() != reference.len() {
            return Err(Error::DimensionMismatch(format!(
                "reference vector has {} entries, eigenvectors have {}",
                reference.len(),
                e.right.len()
            )));
        }
        scored.push((k, mac(reference, &e.right)?));
    }
    best_unique(scored, "reference vector")
}

fn best_unique(mut scored: Vec<(usize, f64)>, what: &str) -> Result<usize> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    match scored.as_slice() {
        [] => Err(Error::InvalidConfig(format!("no eigenvalue matches the {what}"))),
        [(k, _)] => Ok(*k),
        [(k, a), (j, b), ..] => {
            if a - b < TARGET_TIE {
                Err(Error::InvalidConfig(format!(
                    "{what} is ambiguous: eigenvalues {k} and {j} score within {TARGET_TIE:e}"
                )))
            } else {
                Ok(*k)
            }
        }
    }
}

/// Reads one complex entry per line as `re,im` or `re im`; a lone number is real.
pub fn read_vector(path: &Path) -> Result<ComplexVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let num = |f: &str| {
            f.parse::<f64>()
                .map_err(|_| Error::Parse(format!("{} line {}: bad number '{f}'", path.display(), lineno + 1)))
        };
        let v = match fields.as_slice() {
            [re] => Complex64::new(num(re)?, 0.0),
            [re, im] => Complex64::new(num(re)?, num(im)?),
            _ => {
                return Err(Error::Parse(format!(
                    "{} line {}: expected 're,im'",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Parse(format!("{}: no vector entries", path.display())));
    }
    Ok(ComplexVector::from_complex(&values))
}
