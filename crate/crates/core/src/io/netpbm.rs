//! Binary PPM (P6) and PGM (P5) with maxval 255.
//!
//! Header fields are separated by whitespace and may be interleaved with `#` comments
//! running to end of line. Exactly one whitespace byte separates maxval from the raster.
//! ASCII variants and 16-bit rasters are rejected as unsupported.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{GrayImage, RgbImage};
use crate::types::BinaryMask;

#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Rgb(RgbImage),
    Gray(GrayImage),
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
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

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start as u64, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&v| v <= 1 << 24)
            .ok_or_else(|| Error::format(start as u64, format!("{what} out of range")))
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format(0, "not a netpbm file"));
    }
    let channels = match bytes[1] {
        b'6' => 3,
        b'5' => 1,
        b'1'..=b'4' | b'7' => {
            return Err(Error::Unsupported(format!(
                "netpbm variant P{} (only binary P5/P6 are read)",
                bytes[1] as char
            )))
        }
        _ => return Err(Error::format(0, "unknown netpbm magic")),
    };
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval_at = r.pos;
    let maxval = r.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(
            3,
            format!("zero image dimension {width}x{height}"),
        ));
    }
    if maxval != 255 {
        return Err(Error::Unsupported(format!(
            "maxval {maxval} at byte {maxval_at} (only 255 is supported)"
        )));
    }
    match bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => {
            return Err(Error::format(
                r.pos as u64,
                "missing whitespace before raster",
            ))
        }
    }
    let need = width * height * channels;
    let raster = &bytes[r.pos..];
    if raster.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated raster: need {need} bytes, have {}", raster.len()),
        ));
    }
    let raster = &raster[..need];
    Ok(if channels == 3 {
        Image::Rgb(RgbImage::new(width, height, raster.to_vec())?)
    } else {
        Image::Gray(GrayImage::new(
            width,
            height,
            raster.iter().map(|&b| f64::from(b)).collect(),
        )?)
    })
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_bytes());
    out
}

/// Values are rounded and clamped to `0..=255`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.values()
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8),
    );
    out
}

/// One pixel per token: 255 kept, 0 pruned.
pub fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    let g = mask.grid();
    let values = mask
        .bits()
        .iter()
        .map(|&b| if b { 255.0 } else { 0.0 })
        .collect();
    GrayImage::new(g.cols(), g.rows(), values).expect("grid dimensions are positive")
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    match read_image(&path)? {
        Image::Rgb(img) => Ok(img),
        Image::Gray(_) => Err(Error::Unsupported(format!(
            "{}: expected a P6 colour image, found P5",
            path.as_ref().display()
        ))),
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    match read_image(&path)? {
        Image::Gray(img) => Ok(img),
        Image::Rgb(_) => Err(Error::Unsupported(format!(
            "{}: expected a P5 grayscale image, found P6",
            path.as_ref().display()
        ))),
    }
}

pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let bytes = match img {
        Image::Rgb(i) => encode_ppm(i),
        Image::Gray(i) => encode_pgm(i),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
