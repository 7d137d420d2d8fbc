use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Invertible noise coefficient with operator norm at most one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DiffusionMatrix {
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
}

impl DiffusionMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            sigma: DMatrix::identity(dim, dim),
            sigma_inv: DMatrix::identity(dim, dim),
        }
    }

    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return Err(Error::Config("sigma must be a non-empty square matrix".into()));
        }
        let norm = sigma.clone().svd(false, false).singular_values.max();
        if norm > 1.0 + 1e-12 {
            return Err(Error::Config(format!("sigma has operator norm {norm} > 1")));
        }
        let sigma_inv = sigma
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Config("sigma is not invertible".into()))?;
        let n = sigma.nrows();
        let err = (&sigma * &sigma_inv - DMatrix::<f64>::identity(n, n)).amax();
        if err > 1e-12 {
            return Err(Error::Config(format!(
                "sigma is too ill-conditioned: |sigma sigma^-1 - I| = {err:e}"
            )));
        }
        Ok(Self { sigma, sigma_inv })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    /// `tr(sigma sigma^T)`.
    pub fn trace_sst(&self) -> f64 {
        self.sigma.iter().map(|v| v * v).sum()
    }

    /// `out = sigma v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        mat_vec(&self.sigma, v, out);
    }

    /// `out = sigma^-1 v`.
    pub fn apply_inv(&self, v: &[f64], out: &mut [f64]) {
        mat_vec(&self.sigma_inv, v, out);
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum();
    }
}

impl TryFrom<Vec<Vec<f64>>> for DiffusionMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config("sigma rows must all have length n".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl From<DiffusionMatrix> for Vec<Vec<f64>> {
    fn from(d: DiffusionMatrix) -> Self {
        let n = d.dim();
        (0..n).map(|i| (0..n).map(|j| d.sigma[(i, j)]).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_large_or_singular() {
        assert!(DiffusionMatrix::new(DMatrix::from_row_slice(1, 1, &[2.0])).is_err());
        assert!(DiffusionMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let d = DiffusionMatrix::new(DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.5])).unwrap();
        let v = [0.3, -1.2];
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        d.apply(&v, &mut a);
        d.apply_inv(&a, &mut b);
        assert!((b[0] - v[0]).abs() < 1e-14 && (b[1] - v[1]).abs() < 1e-14);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<DiffusionMatrix>(&json).unwrap(), d);
    }
}
