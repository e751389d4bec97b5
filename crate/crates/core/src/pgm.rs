//! Binary portable graymap (P5, 8-bit) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Graymap {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "graymap {width}x{height} cannot hold {} pixels",
                pixels.len()
            )));
        }
        Ok(Graymap { width, height, pixels })
    }

    /// Quantizes values in `[0, 1]` (clamped) to 8 bits.
    pub fn from_unit(width: usize, height: usize, values: &[f32]) -> Result<Self> {
        let pixels = values.iter().map(|&v| quantize(v)).collect();
        Graymap::new(width, height, pixels)
    }

    pub fn to_unit(&self) -> Vec<f32> {
        self.pixels.iter().map(|&p| p as f32 / 255.0).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8], origin: &Path) -> Result<Self> {
        let err = |detail: String| Error::Graymap { path: origin.to_path_buf(), detail };
        let mut pos = 0;
        let magic = next_token(bytes, &mut pos).ok_or_else(|| err("empty file".into()))?;
        if magic != b"P5" {
            return Err(err(format!("bad magic {:?}, expected P5", String::from_utf8_lossy(magic))));
        }
        let mut field = |name: &str| -> Result<usize> {
            let tok = next_token(bytes, &mut pos).ok_or_else(|| err(format!("missing {name}")))?;
            std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| err(format!("invalid {name} {:?}", String::from_utf8_lossy(tok))))
        };
        let width = field("width")?;
        let height = field("height")?;
        let maxval = field("maxval")?;
        if width == 0 || height == 0 {
            return Err(err(format!("degenerate dimensions {width}x{height}")));
        }
        if maxval != 255 {
            return Err(err(format!("unsupported maxval {maxval}, only 8-bit (255) is read")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let payload = bytes.get(pos..).unwrap_or(&[]);
        if payload.len() != width * height {
            return Err(err(format!(
                "payload has {} bytes, {width}x{height} needs {}",
                payload.len(),
                width * height
            )));
        }
        Graymap::new(width, height, payload.to_vec())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Graymap::decode(&bytes, path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}
