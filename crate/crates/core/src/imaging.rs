//! Image containers, decoding, Gaussian smoothing and Sobel gradients.
//!
//! The detector works on the luminance plane while the classifier keeps
//! reading the original RGB raster, so both containers live here.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// Owned 8-bit RGB raster, row-major, no padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::InvalidParam(format!(
                "rgb buffer has {} bytes, expected {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let data = color.iter().copied().cycle().take(width * height * 3).collect();
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, color: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }
}

/// Single-channel 8-bit raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "gray buffer has {} bytes, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Which way an edge runs through a pixel.
///
/// A `Vertical` edge has a mostly horizontal gradient (`|gx| >= |gy|`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeOrientation {
    Horizontal,
    Vertical,
}

impl EdgeOrientation {
    #[inline]
    pub fn from_components(gx: i16, gy: i16) -> Self {
        if gx.unsigned_abs() >= gy.unsigned_abs() {
            EdgeOrientation::Vertical
        } else {
            EdgeOrientation::Horizontal
        }
    }
}

/// Per-pixel Sobel response of a grayscale image.
///
/// `gx`/`gy` hold the raw kernel responses. `mag` is the L1 norm of the
/// two, zeroed on the outer ring and wherever it fell below the gradient
/// threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradientField {
    width: usize,
    height: usize,
    pub gx: Vec<i16>,
    pub gy: Vec<i16>,
    pub mag: Vec<u16>,
    pub orient: Vec<EdgeOrientation>,
}

impl GradientField {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn mag_at(&self, x: usize, y: usize) -> u16 {
        self.mag[y * self.width + x]
    }

    #[inline]
    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Builds a field directly from component planes, deriving `mag` and
    /// `orient`. Mostly useful for tests and synthetic inputs.
    pub fn from_components(
        width: usize,
        height: usize,
        gx: Vec<i16>,
        gy: Vec<i16>,
        gradient_threshold: u16,
    ) -> Result<Self> {
        if gx.len() != width * height || gy.len() != width * height {
            return Err(Error::InvalidParam("gradient planes do not match dimensions".into()));
        }
        let mut mag = Vec::with_capacity(gx.len());
        let mut orient = Vec::with_capacity(gx.len());
        for (&a, &b) in gx.iter().zip(&gy) {
            let m = a.unsigned_abs() + b.unsigned_abs();
            mag.push(if m < gradient_threshold { 0 } else { m });
            orient.push(EdgeOrientation::from_components(a, b));
        }
        Ok(Self {
            width,
            height,
            gx,
            gy,
            mag,
            orient,
        })
    }
}

/// Reads a PNG or binary PPM (P6, maxval 255) file.
pub fn decode_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bytes(&bytes).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}

/// Decodes an in-memory PNG or P6 PPM.
pub fn decode_bytes(bytes: &[u8]) -> std::result::Result<RgbImage, String> {
    if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        decode_png(bytes)
    } else {
        Err("not a PNG or binary PPM (P6) file".into())
    }
}

fn decode_png(bytes: &[u8]) -> std::result::Result<RgbImage, String> {
    let img = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png)
        .decode()
        .map_err(|e| e.to_string())?;
    let rgb = match img {
        DynamicImage::ImageRgb8(buf) => buf,
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            img.to_rgb8()
        }
        other => {
            return Err(format!(
                "unsupported PNG pixel layout {:?}; only 8-bit images are accepted",
                other.color()
            ))
        }
    };
    let (w, h) = rgb.dimensions();
    RgbImage::new(w as usize, h as usize, rgb.into_raw()).map_err(|e| e.to_string())
}

fn decode_ppm(bytes: &[u8]) -> std::result::Result<RgbImage, String> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated PPM header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed PPM header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("PPM header value out of range")?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("truncated PPM header".into()),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("PPM maxval {maxval} unsupported; only 255 is accepted"));
    }
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or("PPM dimensions overflow")?;
    let data = bytes
        .get(pos..pos + needed)
        .ok_or_else(|| format!("PPM pixel data truncated: expected {needed} bytes"))?;
    RgbImage::new(width, height, data.to_vec()).map_err(|e| e.to_string())
}

/// ITU-R BT.601 luminance, rounded to nearest.
pub fn to_gray(img: &RgbImage) -> GrayImage {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let y = 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Normalized 1-D Gaussian taps, centre at index `kernel_size / 2`.
pub fn gaussian_kernel(kernel_size: usize, sigma: f64) -> Result<Vec<f64>> {
    if kernel_size < 3 || kernel_size % 2 == 0 {
        return Err(Error::InvalidParam(format!(
            "gaussian kernel size must be odd and >= 3, got {kernel_size}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParam(format!("gaussian sigma must be > 0, got {sigma}")));
    }
    let r = (kernel_size / 2) as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Separable Gaussian blur with border replication.
pub fn gaussian_smooth(img: &GrayImage, kernel_size: usize, sigma: f64) -> Result<GrayImage> {
    let taps = gaussian_kernel(kernel_size, sigma)?;
    let (w, h) = (img.width, img.height);
    if w == 0 || h == 0 {
        return Ok(img.clone());
    }
    let r = kernel_size / 2;
    let clamp_x = |x: isize| x.clamp(0, w as isize - 1) as usize;
    let clamp_y = |y: isize| y.clamp(0, h as isize - 1) as usize;

    let mut horiz = vec![0.0f64; w * h];
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        let out = &mut horiz[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            if x >= r && x + r < w {
                for (k, t) in taps.iter().enumerate() {
                    acc += t * f64::from(row[x + k - r]);
                }
            } else {
                for (k, t) in taps.iter().enumerate() {
                    acc += t * f64::from(row[clamp_x(x as isize + k as isize - r as isize)]);
                }
            }
            out[x] = acc;
        }
    }

    let mut out = vec![0u8; w * h];
    let mut acc_row = vec![0.0f64; w];
    for y in 0..h {
        acc_row.iter_mut().for_each(|a| *a = 0.0);
        for (k, t) in taps.iter().enumerate() {
            let sy = clamp_y(y as isize + k as isize - r as isize);
            let src = &horiz[sy * w..(sy + 1) * w];
            for (a, s) in acc_row.iter_mut().zip(src) {
                *a += t * s;
            }
        }
        for (o, a) in out[y * w..(y + 1) * w].iter_mut().zip(&acc_row) {
            *o = a.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(GrayImage {
        width: w,
        height: h,
        data: out,
    })
}

/// 3x3 Sobel gradients with an L1 magnitude threshold.
///
/// The outer ring of pixels gets a zero response.
pub fn sobel_gradients(img: &GrayImage, gradient_threshold: u16) -> Result<GradientField> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(Error::InvalidParam(format!(
            "sobel needs at least a 3x3 image, got {w}x{h}"
        )));
    }
    let n = w * h;
    let mut gx = vec![0i16; n];
    let mut gy = vec![0i16; n];
    let mut mag = vec![0u16; n];
    let mut orient = vec![EdgeOrientation::Vertical; n];
    let d = &img.data;
    for y in 1..h - 1 {
        let up = &d[(y - 1) * w..y * w];
        let mid = &d[y * w..(y + 1) * w];
        let down = &d[(y + 1) * w..(y + 2) * w];
        for x in 1..w - 1 {
            let p = |row: &[u8], i: usize| i16::from(row[i]);
            let sx = (p(up, x + 1) - p(up, x - 1))
                + 2 * (p(mid, x + 1) - p(mid, x - 1))
                + (p(down, x + 1) - p(down, x - 1));
            let sy = (p(down, x - 1) - p(up, x - 1))
                + 2 * (p(down, x) - p(up, x))
                + (p(down, x + 1) - p(up, x + 1));
            let i = y * w + x;
            gx[i] = sx;
            gy[i] = sy;
            let m = sx.unsigned_abs() + sy.unsigned_abs();
            mag[i] = if m < gradient_threshold { 0 } else { m };
            orient[i] = EdgeOrientation::from_components(sx, sy);
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
        mag,
        orient,
    })
}
