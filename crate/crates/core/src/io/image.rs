//! Binary netpbm images: 8-bit PPM (`P6`) for color, 16-bit PGM (`P5`) for depth.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("rgb image {width}x{height} is empty")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "rgb image {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Row-major depth map in millimeters. Zero marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("depth image {width}x{height} is empty")));
        }
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "depth image {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Validation(format!("depth value {v} is not a finite non-negative number")));
        }
        Ok(Self { width, height, data })
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

    /// Depth at column `x`, row `y`.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    offset: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::Format(format!(
            "expected magic {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments before each numeric field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::Format("truncated header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos || pos - start > 9 {
            return Err(Error::Format("malformed header field".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed header field".into()))?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("missing header terminator".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("invalid dimensions {width}x{height}")));
    }
    Ok(Header {
        width,
        height,
        maxval,
        offset: pos,
    })
}

fn raster<'a>(bytes: &'a [u8], header: &Header, bytes_per_pixel: usize) -> Result<&'a [u8]> {
    let need = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(bytes_per_pixel))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let payload = &bytes[header.offset..];
    match payload.len().cmp(&need) {
        std::cmp::Ordering::Less => Err(Error::Format(format!(
            "truncated payload: expected {need} bytes, got {}",
            payload.len()
        ))),
        std::cmp::Ordering::Greater => Err(Error::Format(format!(
            "{} bytes of trailing garbage after payload",
            payload.len() - need
        ))),
        std::cmp::Ordering::Equal => Ok(payload),
    }
}

/// Decode a binary PPM with maxval 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let header = parse_header(bytes, b"P6")?;
    if header.maxval != 255 {
        return Err(Error::Format(format!("unsupported PPM maxval {}", header.maxval)));
    }
    let payload = raster(bytes, &header, 3)?;
    RgbImage::new(header.width, header.height, payload.to_vec())
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

/// Decode a binary PGM with maxval 65535 and big-endian samples.
pub fn decode_pgm16(bytes: &[u8]) -> Result<DepthImage> {
    let header = parse_header(bytes, b"P5")?;
    if header.maxval != 65535 {
        return Err(Error::Format(format!(
            "unsupported PGM maxval {} (16-bit depth required)",
            header.maxval
        )));
    }
    let payload = raster(bytes, &header, 2)?;
    let data = payload
        .chunks_exact(2)
        .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])))
        .collect();
    DepthImage::new(header.width, header.height, data)
}

/// Encode depth as 16-bit PGM. Values are rounded to whole millimeters and
/// saturated to the u16 range.
pub fn encode_pgm16(img: &DepthImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    out.reserve(img.data.len() * 2);
    for &v in &img.data {
        let q = v.round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn write_ppm(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm16(path: impl AsRef<Path>) -> Result<DepthImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm16(&bytes)
}

pub fn write_pgm16(img: &DepthImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm16(img)).map_err(|e| Error::io(path, e))
}
