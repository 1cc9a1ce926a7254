use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};
use sha2::{Digest, Sha256};

use super::MonitorError;
use crate::fm::ImagePayload;

/// An RGB8 raster captured `timestamp` seconds after the action started.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
    pub timestamp: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn encode_png(width: u32, height: u32, rgb: &[u8]) -> Vec<u8> {
    let img = RgbImage::from_raw(width, height, rgb.to_vec()).expect("buffer matches dimensions");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

impl Frame {
    pub fn new(width: u32, height: u32, rgb: Vec<u8>, timestamp: f64) -> Result<Self, MonitorError> {
        if width == 0 || height == 0 || rgb.len() != (width * height * 3) as usize {
            return Err(MonitorError::BadFrame(format!(
                "{width}x{height} frame with {} bytes",
                rgb.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            rgb,
            timestamp,
        })
    }

    pub fn solid(width: u32, height: u32, color: [u8; 3], timestamp: f64) -> Self {
        let rgb = color.iter().copied().cycle().take((width * height * 3) as usize).collect();
        Frame {
            width,
            height,
            rgb,
            timestamp,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// SHA-256 of the raw RGB bytes.
    pub fn checksum(&self) -> String {
        sha256_hex(&self.rgb)
    }

    pub fn to_png(&self) -> Vec<u8> {
        encode_png(self.width, self.height, &self.rgb)
    }

    pub fn from_png(bytes: &[u8], timestamp: f64) -> Result<Self, MonitorError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| MonitorError::BadFrame(e.to_string()))?
            .to_rgb8();
        Frame::new(img.width(), img.height(), img.into_raw(), timestamp)
    }

    pub fn payload(&self) -> ImagePayload {
        ImagePayload {
            png: self.to_png(),
            width: self.width,
            height: self.height,
            checksum: self.checksum(),
        }
    }
}

/// Frames stored as `t<seconds>.png`, sorted by timestamp.
pub fn load_frames_dir(dir: &Path) -> Result<Vec<Frame>, MonitorError> {
    let io = |e: std::io::Error| MonitorError::Io(format!("{}: {e}", dir.display()));
    let mut frames = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let Some(t) = stem.strip_prefix('t').and_then(|t| t.parse::<f64>().ok()) else {
            continue;
        };
        let bytes = std::fs::read(&path).map_err(io)?;
        frames.push(Frame::from_png(&bytes, t)?);
    }
    frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_keeps_pixels() {
        let f = Frame::solid(3, 2, [10, 20, 30], 1.5);
        let back = Frame::from_png(&f.to_png(), 1.5).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn directory_is_sorted_by_timestamp() {
        let dir = tempfile::tempdir().unwrap();
        for (name, c) in [("t10.png", 1u8), ("t2.5.png", 2), ("t0.png", 3)] {
            std::fs::write(dir.path().join(name), Frame::solid(1, 1, [c, c, c], 0.0).to_png()).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let frames = load_frames_dir(dir.path()).unwrap();
        let ts: Vec<f64> = frames.iter().map(|f| f.timestamp).collect();
        assert_eq!(ts, vec![0.0, 2.5, 10.0]);
        assert_eq!(frames[0].pixel(0, 0), [3, 3, 3]);
    }

    #[test]
    fn bad_buffer_is_rejected() {
        assert!(Frame::new(2, 2, vec![0; 5], 0.0).is_err());
    }
}
