//! Flat binary and CSV encodings of sampled paths.
//!
//! Binary layout, little endian: `dt: f64`, `n_steps: u64`, `origin: f64`,
//! `dim: u64`, then `(n_steps + 1) * dim` row-major `f64` samples.

use std::fmt::Write as _;
use std::io::{Read, Write};

use super::grid::TimeGrid;
use super::paths::{FbmPath, FuturePath, PastPath};
use crate::error::{Error, Result};

const HEADER_LEN: usize = 32;

/// Read access shared by all sampled path types.
pub trait SampledPath {
    fn grid(&self) -> &TimeGrid;
    fn dim(&self) -> usize;
    fn values(&self) -> &[f64];

    fn to_bytes(&self) -> Vec<u8> {
        encode_binary(self.grid(), self.dim(), self.values())
    }

    fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    fn to_csv(&self) -> String {
        encode_csv(self.grid(), self.dim(), self.values())
    }
}

macro_rules! sampled {
    ($t:ty) => {
        impl SampledPath for $t {
            fn grid(&self) -> &TimeGrid {
                <$t>::grid(self)
            }
            fn dim(&self) -> usize {
                <$t>::dim(self)
            }
            fn values(&self) -> &[f64] {
                <$t>::values(self)
            }
        }
    };
}

sampled!(PastPath);
sampled!(FuturePath);
sampled!(FbmPath);

pub fn encode_binary(grid: &TimeGrid, dim: usize, values: &[f64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    buf.extend_from_slice(&grid.dt().to_le_bytes());
    buf.extend_from_slice(&(grid.n_steps() as u64).to_le_bytes());
    buf.extend_from_slice(&grid.origin().to_le_bytes());
    buf.extend_from_slice(&(dim as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

fn word(bytes: &[u8], i: usize) -> [u8; 8] {
    bytes[8 * i..8 * i + 8].try_into().expect("slice of length 8")
}

/// Decodes a binary path into its grid, dimension and samples.
pub fn decode_binary(bytes: &[u8]) -> Result<(TimeGrid, usize, Vec<f64>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::InvalidArgument("binary path shorter than header".into()));
    }
    let dt = f64::from_le_bytes(word(bytes, 0));
    let n_steps = u64::from_le_bytes(word(bytes, 1)) as usize;
    let origin = f64::from_le_bytes(word(bytes, 2));
    let dim = u64::from_le_bytes(word(bytes, 3)) as usize;
    let grid = TimeGrid::new(dt, n_steps, origin)?;
    let body = &bytes[HEADER_LEN..];
    let expected = grid.n_points() * dim * 8;
    if dim == 0 || body.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "binary path body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of length 8")))
        .collect();
    Ok((grid, dim, values))
}

pub fn read_binary<R: Read>(mut input: R) -> Result<(TimeGrid, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

/// CSV with columns `time, coord_0, ..., coord_{dim-1}`.
pub fn encode_csv(grid: &TimeGrid, dim: usize, values: &[f64]) -> String {
    let mut s = String::from("time");
    for c in 0..dim {
        let _ = write!(s, ",coord_{c}");
    }
    s.push('\n');
    for (i, row) in values.chunks(dim).enumerate() {
        let _ = write!(s, "{}", grid.time(i));
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

impl PastPath {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (grid, dim, values) = decode_binary(bytes)?;
        Self::new(grid, dim, values)
    }
}

impl FuturePath {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (grid, dim, values) = decode_binary(bytes)?;
        Self::new(grid, dim, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let p = PastPath::from_increments(0.25, 2, &[1.0, -2.0, 0.5, 0.125]).unwrap();
        let bytes = p.to_bytes();
        assert_eq!(bytes.len(), 32 + 3 * 2 * 8);
        assert_eq!(PastPath::from_bytes(&bytes).unwrap(), p);
    }

    #[test]
    fn truncated_body_rejected() {
        let f = FuturePath::from_increments(0.5, 1, &[1.0, 2.0]).unwrap();
        let bytes = f.to_bytes();
        assert!(decode_binary(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn csv_layout() {
        let f = FuturePath::from_increments(0.5, 1, &[1.0]).unwrap();
        assert_eq!(f.to_csv(), "time,coord_0\n0,0\n0.5,1\n");
    }
}
