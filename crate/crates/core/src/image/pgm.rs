//! Netpbm graymap reader/writer (plain `P2` and raw `P5`, maxval ≤ 255).

use std::fs;
use std::path::Path;

use super::GrayImage;
use crate::{Error, Result};

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self, field: &'static str) -> Result<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(field, "unexpected end of stream"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, field: &'static str) -> Result<usize> {
        let tok = self.token(field)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                Error::parse(
                    field,
                    format!(
                        "expected a non-negative integer, got {:?}",
                        String::from_utf8_lossy(tok)
                    ),
                )
            })
    }
}

/// Parses a PGM stream. Stored integers become intensities verbatim; no
/// rescaling is applied for maxval below 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut rd = HeaderReader { bytes, pos: 0 };
    let magic = rd.token("magic")?;
    let raw = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(Error::parse(
                "magic",
                format!(
                    "unsupported magic {:?}, expected P2 or P5",
                    String::from_utf8_lossy(other)
                ),
            ))
        }
    };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    if width == 0 || height == 0 {
        return Err(Error::parse("width/height", "dimensions must be positive"));
    }
    let maxval = rd.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::parse("maxval", format!("maxval {maxval} outside 1..=255")));
    }
    let count = width * height;

    let pixels = if raw {
        // Exactly one whitespace byte separates maxval from the raster.
        if rd.pos >= bytes.len() || !bytes[rd.pos].is_ascii_whitespace() {
            return Err(Error::parse("payload", "missing separator after maxval"));
        }
        let data = &bytes[rd.pos + 1..];
        if data.len() != count {
            return Err(Error::parse(
                "payload",
                format!(
                    "expected {count} raster bytes for {width}x{height}, found {}",
                    data.len()
                ),
            ));
        }
        data.iter()
            .map(|&b| check_sample(b as usize, maxval))
            .collect::<Result<Vec<_>>>()?
    } else {
        let mut px = Vec::with_capacity(count);
        for _ in 0..count {
            let v = rd.number("payload").map_err(|e| match e {
                Error::Parse { message, .. } if message.contains("end of stream") => Error::parse(
                    "payload",
                    format!(
                        "expected {count} samples for {width}x{height}, found {}",
                        px.len()
                    ),
                ),
                e => e,
            })?;
            px.push(check_sample(v, maxval)?);
        }
        rd.skip_whitespace_and_comments();
        if rd.pos != bytes.len() {
            return Err(Error::parse(
                "payload",
                format!("trailing data after {count} samples"),
            ));
        }
        px
    };
    GrayImage::new(width, height, pixels)
}

fn check_sample(v: usize, maxval: usize) -> Result<f64> {
    if v > maxval {
        return Err(Error::parse(
            "payload",
            format!("sample {v} exceeds maxval {maxval}"),
        ));
    }
    Ok(v as f64)
}

/// Encodes as raw `P5` with maxval 255. Intensities are rounded half-up and
/// silently clamped to `[0, 255]`.
pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.pixels().len());
    out.extend(img.pixels().iter().map(|&v| quantize(v)));
    out
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> std::io::Result<Result<GrayImage>> {
    Ok(load_pgm(&fs::read(path)?))
}

pub fn write_pgm_file(path: impl AsRef<Path>, img: &GrayImage) -> std::io::Result<()> {
    fs::write(path, save_pgm(img))
}
