use super::frame::{encode_png, sha256_hex};
use super::{Frame, MonitorError};
use crate::fm::ImagePayload;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    pub cell_w: u32,
    pub cell_h: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rows: 3,
            cols: 3,
            cell_w: 32,
            cell_h: 32,
        }
    }
}

impl GridSpec {
    pub fn capacity(&self) -> usize {
        (self.rows * self.cols) as usize
    }
}

/// Frames tiled row-major onto one canvas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGrid {
    pub spec: GridSpec,
    pub placed: usize,
    pub width: u32,
    pub height: u32,
    pub canvas: Vec<u8>,
}

impl ImageGrid {
    /// SHA-256 of the raw RGB canvas.
    pub fn checksum(&self) -> String {
        sha256_hex(&self.canvas)
    }

    pub fn to_png(&self) -> Vec<u8> {
        encode_png(self.width, self.height, &self.canvas)
    }

    pub fn payload(&self) -> ImagePayload {
        ImagePayload {
            png: self.to_png(),
            width: self.width,
            height: self.height,
            checksum: self.checksum(),
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.canvas[i], self.canvas[i + 1], self.canvas[i + 2]]
    }
}

/// Placement of a `w`×`h` frame inside a cell: `(offset_x, offset_y, width, height)`.
pub fn fit(w: u32, h: u32, cell_w: u32, cell_h: u32) -> (u32, u32, u32, u32) {
    let (tw, th) = if (w as u64) * (cell_h as u64) <= (h as u64) * (cell_w as u64) {
        (((w as u64 * cell_h as u64) / h as u64).max(1) as u32, cell_h)
    } else {
        (cell_w, ((h as u64 * cell_w as u64) / w as u64).max(1) as u32)
    };
    ((cell_w - tw) / 2, (cell_h - th) / 2, tw, th)
}

/// Nearest-neighbor scaling into cells, aspect preserved, black letterbox
/// and black unused cells.
pub fn compose_grid(frames: &[Frame], spec: GridSpec) -> Result<ImageGrid, MonitorError> {
    if frames.is_empty() {
        return Err(MonitorError::NoFrames);
    }
    if frames.len() > spec.capacity() {
        return Err(MonitorError::GridCapacity {
            frames: frames.len(),
            capacity: spec.capacity(),
        });
    }
    if spec.cell_w == 0 || spec.cell_h == 0 {
        return Err(MonitorError::BadFrame("zero-sized grid cell".into()));
    }
    let width = spec.cols * spec.cell_w;
    let height = spec.rows * spec.cell_h;
    let mut canvas = vec![0u8; (width * height * 3) as usize];
    for (k, f) in frames.iter().enumerate() {
        let k = k as u32;
        let (cx, cy) = ((k % spec.cols) * spec.cell_w, (k / spec.cols) * spec.cell_h);
        let (ox, oy, tw, th) = fit(f.width, f.height, spec.cell_w, spec.cell_h);
        for y in 0..th {
            let sy = (y as u64 * f.height as u64 / th as u64) as u32;
            for x in 0..tw {
                let sx = (x as u64 * f.width as u64 / tw as u64) as u32;
                let px = f.pixel(sx, sy);
                let i = (((cy + oy + y) * width + cx + ox + x) * 3) as usize;
                canvas[i..i + 3].copy_from_slice(&px);
            }
        }
    }
    Ok(ImageGrid {
        spec,
        placed: frames.len(),
        width,
        height,
        canvas,
    })
}
