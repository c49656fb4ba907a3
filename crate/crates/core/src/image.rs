//! Minimal raster type and binary PPM/PGM I/O.

use std::path::Path;

use crate::error::{Error, Result};

/// An 8-bit raster with interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image must be non-empty, got {width}x{height}")));
        }
        if channels == 0 {
            return Err(Error::invalid("image must have at least one channel"));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "pixel buffer has {} bytes, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(ImageGrid { width, height, channels, data })
    }

    /// A 3-channel image filled with one color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, 3, data)
    }

    /// Build a 3-channel image from a per-pixel function of `(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.channels)
    }

    /// Copy with the `size`×`size` square at (`left`, `top`) painted black.
    /// The square is clipped to the image.
    pub fn occluded(&self, left: usize, top: usize, size: usize) -> ImageGrid {
        let mut out = self.clone();
        let right = (left + size).min(self.width);
        let bottom = (top + size).min(self.height);
        for y in top..bottom {
            let row = y * self.width * self.channels;
            out.data[row + left * self.channels..row + right * self.channels].fill(0);
        }
        out
    }

    /// Rotate about the image center by `degrees` (counter-clockwise) on a
    /// same-size canvas. Nearest-neighbor sampling; uncovered pixels are black.
    pub fn rotated(&self, degrees: f64) -> ImageGrid {
        let (sin, cos) = degrees.to_radians().sin_cos();
        let cx = self.width as f64 / 2.0;
        let cy = self.height as f64 / 2.0;
        let mut out = vec![0u8; self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                // inverse rotation in image coordinates (y down)
                let sx = cx + cos * dx - sin * dy;
                let sy = cy + sin * dx + cos * dy;
                if sx < 0.0 || sy < 0.0 {
                    continue;
                }
                let (sx, sy) = (sx.floor() as usize, sy.floor() as usize);
                if sx < self.width && sy < self.height {
                    let dst = (y * self.width + x) * self.channels;
                    out[dst..dst + self.channels].copy_from_slice(self.pixel(sx, sy));
                }
            }
        }
        ImageGrid { data: out, ..*self }
    }

    /// Shrink the content by `factor` in (0, 1] and center it on a black
    /// canvas of the original size. Nearest-neighbor sampling.
    pub fn scaled_down(&self, factor: f64) -> Result<ImageGrid> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::invalid(format!("scale factor {factor} not in (0, 1]")));
        }
        let cw = ((self.width as f64 * factor).round() as usize).max(1);
        let ch = ((self.height as f64 * factor).round() as usize).max(1);
        let ox = (self.width - cw) / 2;
        let oy = (self.height - ch) / 2;
        let mut out = vec![0u8; self.data.len()];
        for y in 0..ch {
            let sy = (((y as f64 + 0.5) / factor).floor() as usize).min(self.height - 1);
            for x in 0..cw {
                let sx = (((x as f64 + 0.5) / factor).floor() as usize).min(self.width - 1);
                let dst = ((y + oy) * self.width + x + ox) * self.channels;
                out[dst..dst + self.channels].copy_from_slice(self.pixel(sx, sy));
            }
        }
        Ok(ImageGrid { data: out, ..*self })
    }

    /// Parse a binary PPM (`P6`, 3 channels) or PGM (`P5`, 1 channel) with maxval 255.
    pub fn from_pnm_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let magic = next_token(bytes, &mut pos)?;
        let channels = match magic.as_str() {
            "P6" => 3,
            "P5" => 1,
            other => return Err(Error::format(0, format!("unsupported magic {other:?}, expected P6 or P5"))),
        };
        let width = parse_header_number(bytes, &mut pos)?;
        let height = parse_header_number(bytes, &mut pos)?;
        let maxval = parse_header_number(bytes, &mut pos)?;
        if maxval != 255 {
            return Err(Error::format(pos as u64, format!("maxval {maxval} unsupported, expected 255")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let need = width * height * channels;
        let body = bytes.get(pos..).unwrap_or(&[]);
        if body.len() < need {
            return Err(Error::format(
                bytes.len() as u64,
                format!("raster truncated: {} of {need} bytes", body.len()),
            ));
        }
        Self::new(width, height, channels, body[..need].to_vec())
            .map_err(|e| Error::format(pos as u64, e.to_string()))
    }

    pub fn to_pnm_bytes(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn read_pnm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pnm_bytes(&bytes).map_err(|e| match e {
            Error::Format { offset, message } => {
                Error::format(offset, format!("{}: {message}", path.display()))
            }
            other => other,
        })
    }

    pub fn write_pnm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pnm_bytes()).map_err(|e| Error::io(path, e))
    }
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
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
    if start == *pos {
        return Err(Error::format(start as u64, "unexpected end of header"));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let start = *pos;
    let tok = next_token(bytes, pos)?;
    tok.parse()
        .map_err(|_| Error::format(start as u64, format!("expected a number, found {tok:?}")))
}
