//! Complex node signals and their CSV form (`node,re,im`).

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A complex value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal(Vec<Complex64>);

impl ComplexSignal {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Unit-modulus signal `e^{i angle_k}`.
    pub fn from_phases(angles: &[f64]) -> Self {
        Self(angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other> = sum conj(self_i) other_i`.
    pub fn dot(&self, other: &Self) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self(self.0.iter().map(|z| z * s).collect())
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(self.0.iter().map(|z| z * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: Complex64, x: &Self) {
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += a * xi;
        }
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.len(),
            });
        }
        Ok(())
    }

    /// Parses `node,re,im` lines. Nodes may come in any order but must cover
    /// `0..n` exactly once. An optional header line is skipped.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, Complex64)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if idx == 0 && line.starts_with("node") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `node,re,im`, found {} fields", fields.len()),
                });
            }
            let node = fields[0].parse::<usize>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad node id `{}`: {e}", fields[0]),
            })?;
            let mut parts = [0.0; 2];
            for (slot, s) in parts.iter_mut().zip(&fields[1..]) {
                *slot = s.parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad number `{s}`: {e}"),
                })?;
            }
            entries.push((node, Complex64::new(parts[0], parts[1])));
        }
        let n = entries.len();
        let mut values = vec![None; n];
        for (node, z) in entries {
            match values.get_mut(node) {
                Some(slot @ None) => *slot = Some(z),
                Some(Some(_)) => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("node {node} listed twice"),
                    })
                }
                None => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("node {node} out of range for {n} entries"),
                    })
                }
            }
        }
        Ok(Self(values.into_iter().map(|z| z.unwrap()).collect()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,re,im\n");
        for (i, z) in self.0.iter().enumerate() {
            writeln!(out, "{i},{:?},{:?}", z.re, z.im).unwrap();
        }
        out
    }
}

impl Index<usize> for ComplexSignal {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ComplexSignal {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl From<Vec<Complex64>> for ComplexSignal {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

impl FromIterator<Complex64> for ComplexSignal {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
