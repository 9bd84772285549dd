use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexVector;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFlags {
    pub fold_detected: bool,
    pub perturbed: bool,
    pub reinitialized: bool,
    pub jump_detected: bool,
    /// Set on reference trajectories when MAC pairing was weak.
    #[serde(default)]
    pub low_mac: bool,
}

const TOKENS: [&str; 5] = ["fold_detected", "perturbed", "reinitialized", "jump_detected", "low_mac"];

impl StepFlags {
    fn bits(&self) -> [bool; 5] {
        [self.fold_detected, self.perturbed, self.reinitialized, self.jump_detected, self.low_mac]
    }

    pub fn any(&self) -> bool {
        self.bits().iter().any(|&b| b)
    }

    /// Semicolon-joined flag names; empty when no flag is set.
    pub fn to_tokens(&self) -> String {
        TOKENS
            .iter()
            .zip(self.bits())
            .filter(|(_, b)| *b)
            .map(|(t, _)| *t)
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn from_tokens(text: &str) -> Result<Self> {
        let mut f = StepFlags::default();
        for tok in text.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "fold_detected" => f.fold_detected = true,
                "perturbed" => f.perturbed = true,
                "reinitialized" => f.reinitialized = true,
                "jump_detected" => f.jump_detected = true,
                "low_mac" => f.low_mac = true,
                other => return Err(Error::Parse(format!("unknown flag '{other}'"))),
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub p: f64,
    pub s: Complex64,
    #[serde(default, skip_serializing_if = "ComplexVector::is_empty")]
    pub phi: ComplexVector,
    pub residual: f64,
    pub dp_used: f64,
    pub corrector_iters: usize,
    pub flags: StepFlags,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub parameter: String,
    pub records: Vec<TrajectoryRecord>,
}

pub const CSV_HEADER: [&str; 7] = ["p", "s_re", "s_im", "residual", "dp", "corrector_iters", "flags"];

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn parse_num(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value '{field}'")))
}

impl Trajectory {
    pub fn new(parameter: impl Into<String>) -> Self {
        Self {
            parameter: parameter.into(),
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    /// Records flagged with any of the step flags.
    pub fn flagged(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter(|r| r.flags.any())
    }

    pub fn accepted_steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.records {
            w.write_record([
                num(r.p),
                num(r.s.re),
                num(r.s.im),
                num(r.residual),
                num(r.dp_used),
                r.corrector_iters.to_string(),
                r.flags.to_tokens(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV form; eigenvectors are not part of it and come back empty.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if header.iter().map(str::trim).ne(CSV_HEADER) {
            return Err(Error::Parse(format!(
                "unexpected trajectory header '{}'",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut records = Vec::new();
        for row in rd.records() {
            let row = row.map_err(|e| Error::Parse(e.to_string()))?;
            let f = |i: usize| row.get(i).unwrap_or("");
            records.push(TrajectoryRecord {
                p: parse_num(f(0), "p")?,
                s: Complex64::new(parse_num(f(1), "s_re")?, parse_num(f(2), "s_im")?),
                phi: ComplexVector::zeros(0),
                residual: parse_num(f(3), "residual")?,
                dp_used: parse_num(f(4), "dp")?,
                corrector_iters: f(5)
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad corrector_iters '{}'", f(5))))?,
                flags: StepFlags::from_tokens(f(6))?,
            });
        }
        Ok(Self {
            parameter: "p".into(),
            records,
        })
    }

    /// JSON form; eigenvectors are embedded only when requested.
    pub fn to_json(&self, with_vectors: bool) -> Result<String> {
        let text = if with_vectors {
            serde_json::to_string_pretty(self)
        } else {
            let mut stripped = self.clone();
            for r in &mut stripped.records {
                r.phi = ComplexVector::zeros(0);
            }
            serde_json::to_string_pretty(&stripped)
        };
        text.map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}
