//! Grayscale frames with intensities in `[0, 1]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A width x height grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    data: Vec<f64>,
}

impl Frame {
    /// All-black frame.
    pub fn new(width: usize, height: usize) -> Self {
        Frame { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::LengthMismatch { left: width * height, right: data.len() });
        }
        Ok(Frame { width, height, data })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Intensity at integer pixel coordinates; everything outside the
    /// frame reads as zero.
    #[inline]
    pub fn get(&self, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Nearest-pixel read at real-valued coordinates.
    #[inline]
    pub fn sample_nearest(&self, x: f64, y: f64) -> f64 {
        self.get((x + 0.5).floor() as i64, (y + 0.5).floor() as i64)
    }

    /// Write as binary PGM (P5, maxval 255). Intensities are clamped to
    /// `[0, 1]` and rounded to the nearest of 256 levels.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    /// Read a binary PGM written by [`Frame::write_pgm`].
    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::BadFile {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        let mut raw = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut raw)?;
        // Header: magic, width, height, maxval as whitespace-separated
        // tokens, then a single whitespace byte before the pixel payload.
        let mut pos = 0usize;
        let mut token = |raw: &[u8]| -> Option<String> {
            while pos < raw.len() && raw[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
                pos += 1;
            }
            (pos > start).then(|| String::from_utf8_lossy(&raw[start..pos]).into_owned())
        };
        if token(&raw).as_deref() != Some("P5") {
            return Err(bad("not a P5 PGM"));
        }
        let width: usize = token(&raw)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad width"))?;
        let height: usize = token(&raw)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad height"))?;
        let maxval: usize = token(&raw)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad maxval"))?;
        if maxval != 255 {
            return Err(bad("only maxval 255 is supported"));
        }
        pos += 1; // single whitespace separating header from payload
        let need = width * height;
        if raw.len() < pos + need {
            return Err(bad("truncated pixel payload"));
        }
        let data = raw[pos..pos + need].iter().map(|&b| f64::from(b) / 255.0).collect();
        Frame::from_data(width, height, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_bounds_reads_zero() {
        let mut f = Frame::new(4, 3);
        f.set(0, 0, 1.0);
        assert_eq!(f.get(-1, 0), 0.0);
        assert_eq!(f.get(0, 3), 0.0);
        assert_eq!(f.get(4, 0), 0.0);
        assert_eq!(f.get(0, 0), 1.0);
    }

    #[test]
    fn nearest_sampling_rounds_to_pixel() {
        let mut f = Frame::new(4, 4);
        f.set(2, 1, 0.5);
        assert_eq!(f.sample_nearest(2.0, 1.0), 0.5);
        assert_eq!(f.sample_nearest(2.4, 0.6), 0.5);
        assert_eq!(f.sample_nearest(1.4, 1.0), 0.0);
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let mut f = Frame::new(5, 2);
        for x in 0..5 {
            f.set(x, 0, x as f64 / 4.0);
            f.set(x, 1, 1.0 - x as f64 / 4.0);
        }
        f.write_pgm(&path).unwrap();
        let g = Frame::read_pgm(&path).unwrap();
        assert_eq!(g.width, 5);
        assert_eq!(g.height, 2);
        for (a, b) in f.data().iter().zip(g.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
