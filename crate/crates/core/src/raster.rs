//! Dense image and score-map containers plus PNG I/O.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::manifest::Resolution;

/// Planar RGB image with channel values in [0, 1], layout `[c][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; 3 * height * width],
        }
    }

    pub fn from_planar(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::shape(format!("3x{height}x{width}"), data.len()));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Bilinear resample of the window `[x0, x0 + cw) x [y0, y0 + ch)` (in
    /// continuous pixel units) onto an `out` grid, using pixel-center
    /// alignment. Used for both resizing and crop-resize.
    pub fn crop_resize(&self, x0: f64, y0: f64, cw: f64, ch: f64, out: Resolution) -> RgbImage {
        let mut dst = RgbImage::zeros(out.height, out.width);
        let sx = cw / out.width as f64;
        let sy = ch / out.height as f64;
        for oy in 0..out.height {
            let fy = y0 + (oy as f64 + 0.5) * sy - 0.5;
            for ox in 0..out.width {
                let fx = x0 + (ox as f64 + 0.5) * sx - 0.5;
                for c in 0..3 {
                    let v = sample_bilinear(self.channel(c), self.height, self.width, fx, fy);
                    dst.set(c, oy, ox, v);
                }
            }
        }
        dst
    }

    pub fn resize(&self, out: Resolution) -> RgbImage {
        if out == self.resolution() {
            return self.clone();
        }
        self.crop_resize(0.0, 0.0, self.width as f64, self.height as f64, out)
    }

    pub fn flip_horizontal(&self) -> RgbImage {
        let mut dst = self.clone();
        for c in 0..3 {
            for y in 0..self.height {
                for x in 0..self.width {
                    dst.set(c, y, self.width - 1 - x, self.get(c, y, x));
                }
            }
        }
        dst
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
            .to_rgb8();
        Ok(Self::from_rgb8(&img))
    }

    pub fn from_rgb8(img: &ImageBuffer<Rgb<u8>, Vec<u8>>) -> Self {
        let (w, h) = img.dimensions();
        let mut out = RgbImage::zeros(h as usize, w as usize);
        for (x, y, px) in img.enumerate_pixels() {
            for c in 0..3 {
                out.set(c, y as usize, x as usize, f64::from(px[c]) / 255.0);
            }
        }
        out
    }

    pub fn to_rgb8(&self) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
            let q = |c| (self.get(c, y as usize, x as usize).clamp(0.0, 1.0) * 255.0).round() as u8;
            Rgb([q(0), q(1), q(2)])
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_rgb8().save(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Bilinear read from a single `h x w` plane with edge clamping.
#[inline]
pub fn sample_bilinear(plane: &[f64], h: usize, w: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let ax = x - x0 as f64;
    let ay = y - y0 as f64;
    let top = plane[y0 * w + x0] * (1.0 - ax) + plane[y0 * w + x1] * ax;
    let bot = plane[y1 * w + x0] * (1.0 - ax) + plane[y1 * w + x1] * ax;
    top * (1.0 - ay) + bot * ay
}

/// The four taps and weights of a clamped bilinear read; weights sum to 1.
pub fn bilinear_taps(h: usize, w: usize, x: f64, y: f64) -> [(usize, f64); 4] {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let ax = x - x0 as f64;
    let ay = y - y0 as f64;
    [
        (y0 * w + x0, (1.0 - ax) * (1.0 - ay)),
        (y0 * w + x1, ax * (1.0 - ay)),
        (y1 * w + x0, (1.0 - ax) * ay),
        (y1 * w + x1, ax * ay),
    ]
}

/// Dense per-pixel traversability scores, every value in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TraversabilityMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl TraversabilityMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape(format!("{height}x{width}"), values.len()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("traversability value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self::new(height, width, vec![value; height * width]).expect("constant map in range")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Bilinear read at continuous pixel coordinates.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        sample_bilinear(&self.values, self.height, self.width, x, y)
    }

    /// Reads the score at a native-resolution pixel of an image of size
    /// `native_w x native_h`, mapping pixel centers onto this map.
    pub fn sample_native(&self, x: u32, y: u32, native_w: u32, native_h: u32) -> f64 {
        let (mx, my) = native_to_map(x, y, native_w, native_h, self.resolution());
        self.sample(mx, my)
    }

    pub fn save_png16(&self, path: impl AsRef<Path>) -> Result<()> {
        save_gray16(path, self.width, self.height, &self.values)
    }
}

/// Maps an integer native pixel to continuous coordinates of a grid of
/// resolution `res`, aligning pixel centers.
pub fn native_to_map(x: u32, y: u32, native_w: u32, native_h: u32, res: Resolution) -> (f64, f64) {
    let mx = (f64::from(x) + 0.5) * res.width as f64 / f64::from(native_w) - 0.5;
    let my = (f64::from(y) + 0.5) * res.height as f64 / f64::from(native_h) - 0.5;
    (mx, my)
}

/// Writes values in [0, 1] as a 16-bit grayscale PNG.
pub fn save_gray16(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
            let v = values[y as usize * width + x as usize].clamp(0.0, 1.0);
            Luma([(v * 65535.0).round() as u16])
        });
    img.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads a 16-bit grayscale PNG as values in [0, 1].
pub fn load_gray16(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .to_luma16();
    let (w, h) = img.dimensions();
    let values = img.pixels().map(|p| f64::from(p[0]) / 65535.0).collect();
    Ok((h as usize, w as usize, values))
}

/// Reads an 8-bit label image (class id per pixel).
pub fn load_class_map(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u32>)> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .to_luma8();
    let (w, h) = img.dimensions();
    let values = img.pixels().map(|p| u32::from(p[0])).collect();
    Ok((h as usize, w as usize, values))
}
