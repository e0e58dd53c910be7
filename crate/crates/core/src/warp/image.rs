use std::io::Cursor;
use std::path::Path;

use ::image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::WarpError;

/// Row-major image with samples in `[0, 1]`, interleaved by channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    samples: Vec<f64>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, samples: Vec<f64>) -> Result<Self, WarpError> {
        if width == 0 || height == 0 {
            return Err(WarpError::InvalidImage(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(WarpError::InvalidImage(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if samples.len() != expected {
            return Err(WarpError::InvalidImage(format!(
                "expected {expected} samples, found {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(WarpError::InvalidImage(format!(
                "sample {i} = {} outside [0, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: f64) -> Result<Self, WarpError> {
        let n = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; n])
    }

    /// Builds an image by evaluating `f(x, y, channel)` at every sample.
    /// Values are clamped into `[0, 1]`.
    pub fn from_fn(
        width: u32,
        height: u32,
        channels: u8,
        mut f: impl FnMut(u32, u32, u8) -> f64,
    ) -> Result<Self, WarpError> {
        let mut samples = Vec::with_capacity(width as usize * height as usize * channels as usize);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    samples.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(width, height, channels, samples)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    pub fn get(&self, x: u32, y: u32, c: u8) -> f64 {
        self.samples[self.offset(x, y) + c as usize]
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[f64] {
        let o = self.offset(x, y);
        &self.samples[o..o + self.channels as usize]
    }

    pub(crate) fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [f64] {
        let o = self.offset(x, y);
        let c = self.channels as usize;
        &mut self.samples[o..o + c]
    }

    /// Bilinear sample at `(x, y)` with coordinates clamped to the pixel-centre
    /// rectangle `[0, w-1] × [0, h-1]`. Exact at integer coordinates.
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, max_x) };
        let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, max_y) };
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as u32, y0 as u32);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let channels = self.channels as usize;
        let p00 = self.offset(x0, y0);
        if fx == 0.0 && fy == 0.0 {
            out.copy_from_slice(&self.samples[p00..p00 + channels]);
            return;
        }
        let p10 = self.offset(x1, y0);
        let p01 = self.offset(x0, y1);
        let p11 = self.offset(x1, y1);
        for (c, slot) in out.iter_mut().enumerate().take(channels) {
            let top = self.samples[p00 + c] * (1.0 - fx) + self.samples[p10 + c] * fx;
            let bottom = self.samples[p01 + c] * (1.0 - fx) + self.samples[p11 + c] * fx;
            *slot = (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0);
        }
    }

    /// Luma `0.299 R + 0.587 G + 0.114 B` for RGB; identity for grayscale.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let samples = self
            .samples
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            samples,
        }
    }

    /// 8-bit quantization with round-half-up.
    pub fn to_u8(&self) -> Vec<u8> {
        self.samples
            .iter()
            .map(|v| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_u8(width: u32, height: u32, channels: u8, bytes: &[u8]) -> Result<Self, WarpError> {
        Self::new(
            width,
            height,
            channels,
            bytes.iter().map(|b| *b as f64 / 255.0).collect(),
        )
    }

    fn to_dynamic(&self) -> DynamicImage {
        let bytes = self.to_u8();
        if self.channels == 1 {
            DynamicImage::ImageLuma8(
                GrayImage::from_raw(self.width, self.height, bytes).expect("buffer size checked"),
            )
        } else {
            DynamicImage::ImageRgb8(
                RgbImage::from_raw(self.width, self.height, bytes).expect("buffer size checked"),
            )
        }
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self, WarpError> {
        let gray = matches!(
            img,
            DynamicImage::ImageLuma8(_)
                | DynamicImage::ImageLumaA8(_)
                | DynamicImage::ImageLuma16(_)
                | DynamicImage::ImageLumaA16(_)
        );
        if gray {
            let g = img.into_luma8();
            Self::from_u8(g.width(), g.height(), 1, g.as_raw())
        } else {
            let rgb = img.into_rgb8();
            Self::from_u8(rgb.width(), rgb.height(), 3, rgb.as_raw())
        }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, WarpError> {
        let mut buf = Cursor::new(Vec::new());
        self.to_dynamic()
            .write_to(&mut buf, ImageFormat::Png)
            .map_err(|e| WarpError::Io(e.to_string()))?;
        Ok(buf.into_inner())
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, WarpError> {
        let img = ::image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| WarpError::Decode(e.to_string()))?;
        Self::from_dynamic(img)
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self, WarpError> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|e| WarpError::Io(format!("{}: {e}", path.display())))?;
        Self::decode_png(&bytes).map_err(|e| match e {
            WarpError::Decode(msg) => WarpError::Decode(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<(), WarpError> {
        let path = path.as_ref();
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|e| WarpError::Io(format!("{}: {e}", path.display())))
    }
}
