use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Depth values at or beyond this are treated as invalid readings.
pub const MAX_DEPTH: f64 = 100.0;

/// Dense row-major depth image in meters. Missing pixels are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::Contract(format!(
                "depth map {width}x{height} needs {} values, got {}",
                width.saturating_mul(height),
                data.len()
            )));
        }
        Ok(DepthMap {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        DepthMap {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn missing(width: usize, height: usize) -> Self {
        Self::filled(width, height, f64::NAN)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Value at column `i`, row `j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.width + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.width + i] = v;
    }

    pub fn same_shape(&self, other: &DepthMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_shape(&self, other: &DepthMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "depth map shapes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|v| is_valid_depth(**v)).count()
    }

    pub fn missing_mask(&self) -> Vec<bool> {
        self.data.iter().map(|v| v.is_nan()).collect()
    }

    /// Encodes as a little-endian grayscale PFM (`Pf`, scale -1.0). Rows are
    /// written bottom-to-top as the format prescribes.
    pub fn to_pfm_bytes(&self) -> Vec<u8> {
        let header = format!("Pf\n{} {}\n-1.0\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + 4 * self.data.len());
        out.extend_from_slice(header.as_bytes());
        for row in self.data.chunks(self.width.max(1)).rev() {
            for v in row {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_pfm_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = bytes;
        let mut line = String::new();
        let mut next_token_line = |reader: &mut &[u8]| -> Result<String> {
            line.clear();
            reader
                .read_line(&mut line)
                .map_err(|e| Error::Format(format!("PFM header: {e}")))?;
            Ok(line.trim().to_string())
        };
        let magic = next_token_line(&mut reader)?;
        if magic != "Pf" {
            return Err(Error::Format(format!(
                "expected grayscale PFM 'Pf', found {magic:?}"
            )));
        }
        let dims = next_token_line(&mut reader)?;
        let parsed: Vec<usize> = dims
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("bad PFM dimensions {dims:?}")))?;
        let [width, height] = parsed[..] else {
            return Err(Error::Format(format!("bad PFM dimensions {dims:?}")));
        };
        let scale_line = next_token_line(&mut reader)?;
        let scale: f64 = scale_line
            .parse()
            .map_err(|_| Error::Format(format!("bad PFM scale {scale_line:?}")))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::Format(format!("bad PFM scale {scale}")));
        }
        let little_endian = scale < 0.0;
        let count = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("PFM dimensions overflow".into()))?;
        let mut raw = Vec::new();
        reader
            .read_to_end(&mut raw)
            .map_err(|e| Error::Format(format!("PFM body: {e}")))?;
        if raw.len() != count * 4 {
            return Err(Error::Format(format!(
                "PFM body has {} bytes, expected {}",
                raw.len(),
                count * 4
            )));
        }
        let mut data = vec![0.0; count];
        for (r, row) in raw.chunks_exact(4 * width.max(1)).enumerate() {
            let j = height - 1 - r;
            for (i, b) in row.chunks_exact(4).enumerate() {
                let b: [u8; 4] = b.try_into().expect("4 bytes");
                let v = if little_endian {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                };
                data[j * width + i] = v as f64;
            }
        }
        DepthMap::new(width, height, data)
    }

    pub fn write_pfm(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pfm_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_pfm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pfm_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// True for a usable depth reading in `(0, MAX_DEPTH)`.
#[inline]
pub fn is_valid_depth(d: f64) -> bool {
    d > 0.0 && d < MAX_DEPTH
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(matches!(
            DepthMap::new(3, 2, vec![0.0; 5]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn pfm_header_and_row_order() {
        let m = DepthMap::new(2, 2, vec![1.0, 2.0, 3.0, f64::NAN]).unwrap();
        let bytes = m.to_pfm_bytes();
        assert!(bytes.starts_with(b"Pf\n2 2\n-1.0\n"));
        let body = &bytes[12..];
        // bottom row first
        assert_eq!(f32::from_le_bytes(body[0..4].try_into().unwrap()), 3.0);
        assert!(f32::from_le_bytes(body[4..8].try_into().unwrap()).is_nan());
        assert_eq!(f32::from_le_bytes(body[8..12].try_into().unwrap()), 1.0);
    }

    #[test]
    fn reads_big_endian() {
        let mut bytes = b"Pf\n1 2\n1.0\n".to_vec();
        bytes.extend_from_slice(&0.5f32.to_be_bytes());
        bytes.extend_from_slice(&0.25f32.to_be_bytes());
        let m = DepthMap::from_pfm_bytes(&bytes).unwrap();
        assert_eq!(m.data(), &[0.25, 0.5]);
    }

    #[test]
    fn rejects_malformed_pfm() {
        assert!(DepthMap::from_pfm_bytes(b"PF\n1 1\n-1.0\n\0\0\0\0\0\0\0\0\0\0\0\0").is_err());
        assert!(DepthMap::from_pfm_bytes(b"Pf\n2 1\n-1.0\n\0\0\0\0").is_err());
        assert!(DepthMap::from_pfm_bytes(b"Pf\nx 1\n-1.0\n").is_err());
    }

    proptest! {
        #[test]
        fn pfm_round_trip(w in 1usize..6, h in 1usize..6, seed in any::<u64>()) {
            let data: Vec<f64> = (0..w * h)
                .map(|k| {
                    let v = seed.wrapping_mul(k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40;
                    if v % 7 == 0 { f64::NAN } else { (v as f32 / 1e6) as f64 }
                })
                .collect();
            let m = DepthMap::new(w, h, data).unwrap();
            let back = DepthMap::from_pfm_bytes(&m.to_pfm_bytes()).unwrap();
            prop_assert_eq!(back.missing_mask(), m.missing_mask());
            for (a, b) in m.data().iter().zip(back.data()) {
                prop_assert!(a.is_nan() || a == b);
            }
        }
    }
}
