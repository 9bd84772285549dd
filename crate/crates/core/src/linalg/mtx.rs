//! Matrix Market coordinate format (real, general).

use std::fmt::Write as _;
use std::path::Path;

use super::SparseMatrix;
use crate::error::{Error, Result};

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn write_matrix_market(m: &SparseMatrix) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz()).unwrap();
    for (i, j, v) in m.iter() {
        writeln!(out, "{} {} {}", i + 1, j + 1, v).unwrap();
    }
    out
}

pub fn read_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty Matrix Market file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 5
        || tokens[0] != "%%matrixmarket"
        || tokens[1] != "matrix"
        || tokens[2] != "coordinate"
        || tokens[3] != "real"
        || tokens[4] != "general"
    {
        return Err(Error::Parse(format!("unsupported header '{header}'")));
    }
    let mut body = lines.filter(|l| !l.trim().is_empty() && !l.starts_with('%'));
    let size = body
        .next()
        .ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims = parse_numbers::<usize>(size, 3)?;
    let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);
    let mut entries = Vec::with_capacity(nnz);
    for line in body {
        let mut it = line.split_whitespace();
        let i: usize = parse_tok(it.next())?;
        let j: usize = parse_tok(it.next())?;
        let v: f64 = parse_tok(it.next())?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(Error::Parse(format!("entry ({i}, {j}) outside {nrows}x{ncols}")));
        }
        entries.push((i - 1, j - 1, v));
    }
    if entries.len() != nnz {
        return Err(Error::Parse(format!(
            "expected {nnz} entries, found {}",
            entries.len()
        )));
    }
    Ok(SparseMatrix::from_triplets(nrows, ncols, entries))
}

pub fn read_matrix_market_file(path: &Path) -> Result<SparseMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_matrix_market(&text)
}

pub fn write_matrix_market_file(path: &Path, m: &SparseMatrix) -> Result<()> {
    std::fs::write(path, write_matrix_market(m))?;
    Ok(())
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>) -> Result<T> {
    tok.ok_or_else(|| Error::Parse("truncated entry line".into()))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad token {tok:?}")))
}

fn parse_numbers<T: std::str::FromStr>(line: &str, count: usize) -> Result<Vec<T>> {
    let out: Vec<T> = line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad token '{t}'"))))
        .collect::<Result<_>>()?;
    if out.len() != count {
        return Err(Error::Parse(format!("expected {count} numbers in '{line}'")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = SparseMatrix::from_triplets(3, 2, vec![(0, 0, 1.5), (2, 1, -0.1), (1, 0, 3e-17)]);
        let text = write_matrix_market(&m);
        assert!(text.starts_with(HEADER));
        assert_eq!(read_matrix_market(&text).unwrap(), m);
    }

    #[test]
    fn rejects_out_of_range_and_bad_header() {
        let bad = format!("{HEADER}\n2 2 1\n3 1 1.0\n");
        assert!(read_matrix_market(&bad).is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n1 1\n1\n").is_err());
    }

    #[test]
    fn comments_are_skipped() {
        let text = format!("{HEADER}\n% a comment\n2 2 1\n2 2 4.0\n");
        assert_eq!(read_matrix_market(&text).unwrap().get(1, 1), 4.0);
    }
}
