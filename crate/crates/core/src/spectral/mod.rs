//! Graph Laplacians and their low-end eigenvectors ("eigensegments").

mod eigen;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::AffinityMatrix;

/// Largest graph the dense solver accepts.
pub const MAX_DENSE_NODES: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `L = D - W`
    Unnormalized,
    /// `L = I - D^-1/2 W D^-1/2`
    #[default]
    SymmetricNormalized,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::Unnormalized => "unnormalized",
            Normalization::SymmetricNormalized => "symmetric_normalized",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "unnormalized" | "none" => Ok(Normalization::Unnormalized),
            "symmetric_normalized" | "symmetric" | "normalized" | "sym" => {
                Ok(Normalization::SymmetricNormalized)
            }
            _ => Err(Error::Config(format!("unknown normalization {s:?}"))),
        }
    }
}

/// A dense graph Laplacian together with the degrees it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    n: usize,
    matrix: Vec<f64>,
    normalization: Normalization,
    degrees: Vec<f64>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.matrix
            .chunks_exact(self.n)
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Builds `D - W` or `I - D^-1/2 W D^-1/2`.
///
/// In the normalized form an isolated node (degree 0) gets an identity
/// row and column, decoupling it at eigenvalue 1.
pub fn laplacian(w: &AffinityMatrix, normalization: Normalization) -> Laplacian {
    let n = w.n();
    let degrees: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
    let mut matrix = vec![0.0; n * n];
    match normalization {
        Normalization::Unnormalized => {
            for i in 0..n {
                let row = w.row(i);
                for j in 0..n {
                    matrix[i * n + j] = -row[j];
                }
                // D - W: the diagonal weight cancels against its own degree term
                matrix[i * n + i] = degrees[i] - row[i];
            }
        }
        Normalization::SymmetricNormalized => {
            let inv_sqrt: Vec<f64> =
                degrees.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
            for i in 0..n {
                let row = w.row(i);
                for j in 0..n {
                    matrix[i * n + j] = -row[j] * inv_sqrt[i] * inv_sqrt[j];
                }
                matrix[i * n + i] += 1.0;
                if degrees[i] <= 0.0 {
                    matrix[i * n + i] = 1.0;
                }
            }
        }
    }
    Laplacian { n, matrix, normalization, degrees }
}

/// The `k` smallest eigenpairs of a Laplacian, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSegments {
    n: usize,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl EigenSegments {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Smallest `k` eigenpairs of `lap`, with each vector's largest-magnitude
/// entry made positive (lowest index on ties).
pub fn smallest_eigenpairs(lap: &Laplacian, k: usize) -> Result<EigenSegments> {
    symmetric_smallest(lap.n, &lap.matrix, k)
}

/// Smallest `k` eigenpairs of any dense row-major symmetric `n x n` matrix,
/// with the same ordering and sign convention as [`smallest_eigenpairs`].
/// Only the lower triangle is read.
pub fn symmetric_smallest(n: usize, matrix: &[f64], k: usize) -> Result<EigenSegments> {
    if matrix.len() != n * n {
        return Err(Error::Dimension(format!("{} values do not form a {n}x{n} matrix", matrix.len())));
    }
    if let Some(x) = matrix.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidValue(format!("matrix entry {x} is not finite")));
    }
    if k < 1 || k > n {
        return Err(Error::Config(format!("k={k} must lie in 1..={n}")));
    }
    if n > MAX_DENSE_NODES {
        return Err(Error::GraphTooLarge { nodes: n, limit: MAX_DENSE_NODES });
    }
    let pairs = eigen::smallest(n, matrix, k)?;
    let vectors = pairs.vectors.into_iter().map(canonical_sign).collect();
    Ok(EigenSegments { n, values: pairs.values, vectors })
}

fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Second-smallest eigenpair: the Fiedler vector and algebraic connectivity.
pub fn fiedler(lap: &Laplacian) -> Result<(Vec<f64>, f64)> {
    if lap.n < 2 {
        return Err(Error::DegenerateGraph(lap.n));
    }
    let seg = smallest_eigenpairs(lap, 2)?;
    Ok((seg.vectors[1].clone(), seg.values[1]))
}
