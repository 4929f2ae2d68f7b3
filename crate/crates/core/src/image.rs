//! 8-bit grayscale rasters and their on-disk formats (binary PGM, gray PNG).

use std::io::{BufWriter, Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_DPI: f64 = 500.0;

/// Row-major 8-bit grayscale image. 0 is black ridge ink, 255 is white.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    dpi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    /// Guesses the format from the leading magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"P5") {
            Some(ImageFormat::Pgm)
        } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
            Some(ImageFormat::Png)
        } else {
            None
        }
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        Self::with_dpi(width, height, pixels, DEFAULT_DPI)
    }

    pub fn with_dpi(width: usize, height: usize, pixels: Vec<u8>, dpi: f64) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(pixels.len()) {
            return Err(Error::Dimensions {
                width,
                height,
                len: pixels.len(),
            });
        }
        if !(dpi.is_finite() && dpi > 0.0) {
            return Err(Error::InvalidParameter(format!("dpi must be positive, got {dpi}")));
        }
        Ok(Self {
            width,
            height,
            pixels,
            dpi,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dpi(&self) -> f64 {
        self.dpi
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with coordinates clamped to the image (edge replication).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// The image rotated by 90° clockwise.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut pixels = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                // (x, y) -> (h - 1 - y, x) in a w-high, h-wide image
                pixels[x * h + (h - 1 - y)] = self.get(x, y);
            }
        }
        Self {
            width: h,
            height: w,
            pixels,
            dpi: self.dpi,
        }
    }

    pub fn decode(bytes: &[u8], format: ImageFormat) -> Result<Self> {
        match format {
            ImageFormat::Pgm => decode_pgm(bytes),
            ImageFormat::Png => decode_png(bytes),
        }
    }

    /// Reads a PGM or PNG file, choosing the decoder from its magic bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let format = ImageFormat::sniff(&bytes)
            .ok_or_else(|| Error::UnsupportedImage(format!("{}: neither binary PGM nor PNG", path.display())))?;
        Self::decode(&bytes, format)
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let ppm = (self.dpi / 0.0254).round() as u32;
            enc.set_pixel_dims(Some(png::PixelDimensions {
                xppu: ppm,
                yppu: ppm,
                unit: png::Unit::Meter,
            }));
            let mut writer = enc.write_header().map_err(|e| Error::MalformedImage(e.to_string()))?;
            writer
                .write_image_data(&self.pixels)
                .map_err(|e| Error::MalformedImage(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.encode_pgm())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut next_token = || -> Result<&[u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedImage("truncated PGM header".into()));
        }
        Ok(&bytes[start..pos])
    };
    let magic = next_token()?;
    if magic != b"P5" {
        return Err(Error::MalformedImage("missing P5 magic".into()));
    }
    let mut number = |what: &str| -> Result<usize> {
        let tok = next_token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::MalformedImage(format!("bad PGM {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedImage(format!(
            "PGM maxval {maxval}; only 8-bit (255) is supported"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::MalformedImage("missing raster".into()));
    }
    let raster = &bytes[pos + 1..];
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedImage("PGM dimensions overflow".into()))?;
    if raster.len() < expected {
        return Err(Error::MalformedImage(format!(
            "PGM raster has {} bytes, header claims {expected}",
            raster.len()
        )));
    }
    GrayImage::new(width, height, raster[..expected].to_vec())
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let malformed = |e: png::DecodingError| Error::MalformedImage(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(malformed)?;
    let (color, depth, dims) = {
        let info = reader.info();
        (info.color_type, info.bit_depth, info.pixel_dims)
    };
    if color != png::ColorType::Grayscale {
        return Err(Error::UnsupportedImage(format!(
            "PNG color type {color:?}; only single-channel grayscale is supported"
        )));
    }
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedImage(format!(
            "PNG bit depth {depth:?}; only 8 is supported"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::MalformedImage("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(malformed)?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut pixels = Vec::with_capacity(w * h);
    for row in buf.chunks(frame.line_size).take(h) {
        pixels.extend_from_slice(&row[..w]);
    }
    let dpi = match dims {
        Some(d) if d.unit == png::Unit::Meter && d.xppu > 0 => f64::from(d.xppu) * 0.0254,
        _ => DEFAULT_DPI,
    };
    GrayImage::with_dpi(w, h, pixels, dpi)
}
