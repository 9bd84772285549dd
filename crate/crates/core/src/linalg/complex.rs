use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex vector stored as split real and imaginary parts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::DimensionMismatch(format!(
                "real part {} vs imaginary part {}",
                re.len(),
                im.len()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    pub fn from_real(re: Vec<f64>) -> Self {
        let im = vec![0.0; re.len()];
        Self { re, im }
    }

    pub fn from_complex(values: &[Complex64]) -> Self {
        Self {
            re: values.iter().map(|z| z.re).collect(),
            im: values.iter().map(|z| z.im).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect()
    }

    /// Unconjugated product `a^T b`.
    pub fn bilinear_dot(&self, other: &ComplexVector) -> Complex64 {
        assert_eq!(self.len(), other.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.len() {
            acc += self.get(k) * other.get(k);
        }
        acc
    }

    /// Conjugated product `a^H b`.
    pub fn hermitian_dot(&self, other: &ComplexVector) -> Complex64 {
        assert_eq!(self.len(), other.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.len() {
            acc += self.get(k).conj() * other.get(k);
        }
        acc
    }

    pub fn norm2(&self) -> f64 {
        self.re
            .iter()
            .chain(&self.im)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        let mut out = Self::zeros(self.len());
        for k in 0..self.len() {
            let z = alpha * self.get(k);
            out.re[k] = z.re;
            out.im[k] = z.im;
        }
        out
    }

    pub fn is_real(&self) -> bool {
        self.im.iter().all(|&v| v == 0.0)
    }

    /// First `n` components.
    pub fn head(&self, n: usize) -> Self {
        Self {
            re: self.re[..n].to_vec(),
            im: self.im[..n].to_vec(),
        }
    }
}
