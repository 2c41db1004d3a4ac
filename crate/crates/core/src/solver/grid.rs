use crate::coeffs::Vec2;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const MIN_POINTS: usize = 16;

/// A scalar field on the periodic grid `x_i = i L / n`, row-major with the
/// first axis outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub dim: usize,
    pub n: usize,
    pub period: f64,
    pub time: f64,
    pub values: Vec<f64>,
}

/// JSON sidecar of a binary field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub dim: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub period: f64,
    pub time_stamp: f64,
}

impl GridField {
    pub fn new(dim: usize, n: usize, period: f64, time: f64, values: Vec<f64>) -> Result<Self> {
        check_shape(dim, n, period)?;
        if values.len() != n.pow(dim as u32) {
            return Err(Error::Grid(format!(
                "{} values for a {dim}-D grid with n = {n}",
                values.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value, time });
        }
        Ok(Self {
            dim,
            n,
            period,
            time,
            values,
        })
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(dim: usize, n: usize, period: f64, f: impl Fn(&Vec2) -> f64) -> Result<Self> {
        check_shape(dim, n, period)?;
        let len = n.pow(dim as u32);
        let dx = period / n as f64;
        let values = (0..len)
            .map(|k| f(&point_of(dim, n, dx, k)))
            .collect();
        Self::new(dim, n, period, 0.0, values)
    }

    pub fn constant(dim: usize, n: usize, period: f64, value: f64) -> Result<Self> {
        Self::from_fn(dim, n, period, |_| value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Coordinates of flat index `k`.
    pub fn point(&self, k: usize) -> Vec2 {
        point_of(self.dim, self.n, self.dx(), k)
    }

    /// Flat index of `k` shifted by `offset` cells along `axis`, wrapping.
    pub fn neighbor(&self, k: usize, axis: usize, offset: isize) -> usize {
        let n = self.n;
        let stride = if self.dim == 2 && axis == 0 { n } else { 1 };
        let i = (k / stride) % n;
        let j = (i as isize + offset).rem_euclid(n as isize) as usize;
        k + j * stride - i * stride
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index and value of the smallest entry (first on ties).
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (k, v)| if v < b.1 { (k, v) } else { b })
    }

    pub fn with_values(&self, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            time,
            ..*self
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect(), self.time)
    }

    pub fn header(&self) -> FieldHeader {
        FieldHeader {
            dim: self.dim,
            n: self.n,
            period: self.period,
            time_stamp: self.time,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_bytes(header: &FieldHeader, bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(8) {
            return Err(Error::Grid(format!("{} bytes is not a whole number of f64", bytes.len())));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(header.dim, header.n, header.period, header.time_stamp, values)
    }

    /// Writes `path` (raw values) and `path.json` (header).
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        fs::write(sidecar(path), serde_json::to_vec_pretty(&self.header())?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let header: FieldHeader = serde_json::from_slice(&fs::read(sidecar(path))?)?;
        Self::from_bytes(&header, &fs::read(path)?)
    }
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

fn check_shape(dim: usize, n: usize, period: f64) -> Result<()> {
    if dim != 1 && dim != 2 {
        return Err(Error::Grid(format!("dimension {dim} not in {{1, 2}}")));
    }
    if n < MIN_POINTS {
        return Err(Error::Grid(format!("n = {n} below the minimum {MIN_POINTS}")));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::Grid(format!("period {period} must be positive")));
    }
    Ok(())
}

fn point_of(dim: usize, n: usize, dx: f64, k: usize) -> Vec2 {
    if dim == 1 {
        Vec2::new(k as f64 * dx, 0.0)
    } else {
        Vec2::new((k / n) as f64 * dx, (k % n) as f64 * dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_neighbors() {
        let f = GridField::constant(2, 16, 1.0, 0.0).unwrap();
        // (0, 0) -> left along axis 0 is (15, 0)
        assert_eq!(f.neighbor(0, 0, -1), 15 * 16);
        assert_eq!(f.neighbor(0, 1, -1), 15);
        assert_eq!(f.neighbor(15, 1, 1), 0);
        assert_eq!(f.neighbor(17, 0, 1), 33);
        let g = GridField::constant(1, 16, 1.0, 0.0).unwrap();
        assert_eq!(g.neighbor(15, 0, 1), 0);
        assert_eq!(g.neighbor(3, 0, 16), 3);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridField::constant(1, 8, 1.0, 0.0).is_err());
        assert!(GridField::constant(3, 16, 1.0, 0.0).is_err());
        assert!(GridField::new(1, 16, 1.0, 0.0, vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[4] = f64::NAN;
        assert!(matches!(
            GridField::new(1, 16, 1.0, 0.0, v),
            Err(Error::NonFinite { index: 4, .. })
        ));
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.field");
        let f = GridField::from_fn(2, 16, 2.0, |x| x[0].sin() + x[1]).unwrap();
        f.write(&path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 16 * 16 * 8);
        let g = GridField::read(&path).unwrap();
        assert_eq!(f, g);
        let header: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("u.field.json")).unwrap()).unwrap();
        assert_eq!(header["L"], 2.0);
    }
}
