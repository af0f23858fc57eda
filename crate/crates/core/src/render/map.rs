use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TMAP_MAGIC: &[u8; 4] = b"TMAP";
pub const TMAP_VERSION: u32 = 1;
const TMAP_HEADER_LEN: usize = 20;

/// Dense grid of penetration depths in meters, row-major (row 0 first).
#[derive(Debug, Clone, PartialEq)]
pub struct DeformMap {
    pub height: usize,
    pub width: usize,
    pub d_max: f64,
    pub depths: Vec<f64>,
}

impl DeformMap {
    pub fn zeros(height: usize, width: usize, d_max: f64) -> Self {
        DeformMap {
            height,
            width,
            d_max,
            depths: vec![0.0; height * width],
        }
    }

    /// Builds a map from explicit depths, checking the value range.
    pub fn from_depths(height: usize, width: usize, d_max: f64, depths: Vec<f64>) -> Result<Self> {
        if depths.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} depths for a {height}x{width} map",
                depths.len()
            )));
        }
        if !(d_max.is_finite() && d_max > 0.0) {
            return Err(Error::InvalidArgument(format!("d_max must be > 0, got {d_max}")));
        }
        if let Some((i, d)) = depths
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= 0.0 && **d <= d_max))
        {
            return Err(Error::InvalidArgument(format!(
                "depth {d} at index {i} outside [0, {d_max}]"
            )));
        }
        Ok(DeformMap {
            height,
            width,
            d_max,
            depths,
        })
    }

    pub(crate) fn try_zeros(height: usize, width: usize, d_max: f64) -> Option<Self> {
        let mut depths = Vec::new();
        depths.try_reserve_exact(height * width).ok()?;
        depths.resize(height * width, 0.0);
        Some(DeformMap {
            height,
            width,
            d_max,
            depths,
        })
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.depths[row * self.width + col]
    }

    pub fn max_depth(&self) -> f64 {
        self.depths.iter().copied().fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &DeformMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Depths as stored on disk.
    pub fn depths_f32(&self) -> Vec<f32> {
        self.depths.iter().map(|&d| d as f32).collect()
    }

    /// Encodes the map in the TMAP format.
    pub fn to_tmap_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TMAP_HEADER_LEN + 4 * self.len());
        out.extend_from_slice(TMAP_MAGIC);
        out.extend_from_slice(&TMAP_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.d_max as f32).to_le_bytes());
        for &d in &self.depths {
            out.extend_from_slice(&(d as f32).to_le_bytes());
        }
        out
    }

    pub fn from_tmap_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |message: String| Error::MapFormat {
            path: path.to_owned(),
            message,
        };
        if bytes.len() < TMAP_HEADER_LEN {
            return Err(bad("truncated header".into()));
        }
        if &bytes[0..4] != TMAP_MAGIC {
            return Err(bad("missing TMAP magic".into()));
        }
        let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = word(4);
        if version != TMAP_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let height = word(8) as usize;
        let width = word(12) as usize;
        let d_max = f32::from_bits(word(16)) as f64;
        let expected = TMAP_HEADER_LEN + 4 * height * width;
        if bytes.len() != expected {
            return Err(bad(format!(
                "expected {expected} bytes for {height}x{width}, found {}",
                bytes.len()
            )));
        }
        let depths = bytes[TMAP_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        DeformMap::from_depths(height, width, d_max, depths).map_err(|e| bad(e.to_string()))
    }

    pub fn write_tmap(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tmap_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_tmap(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_tmap_bytes(&bytes, path)
    }

    /// SHA-256 of the TMAP encoding, hex.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_tmap_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// 16-bit binary PGM with `depth / d_max` scaled to `0..=65535`.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for &d in &self.depths {
            let v = ((d / self.d_max).clamp(0.0, 1.0) * 65535.0).round() as u16;
            out.extend_from_slice(&v.to_be_bytes());
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// One line per row, comma-separated depths in meters.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
        for row in self.depths.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|d| format!("{d:e}")).collect();
            writeln!(file, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
        }
        file.flush().map_err(|e| Error::io(path, e))
    }
}
