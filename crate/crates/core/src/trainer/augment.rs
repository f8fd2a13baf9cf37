use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::manifest::Resolution;
use crate::raster::RgbImage;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Crop side as a fraction of the image side, drawn uniformly.
    pub crop_scale: (f64, f64),
    pub flip_prob: f64,
    /// Jitter factors are drawn from `[1 - s, 1 + s]`.
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            crop_scale: (0.7, 1.0),
            flip_prob: 0.5,
            brightness: 0.1,
            contrast: 0.1,
            saturation: 0.1,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }
}

/// Crop window `[x0, x0 + cw) x [y0, y0 + ch)` resized to the full grid,
/// optionally mirrored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricTransform {
    pub x0: f64,
    pub y0: f64,
    pub cw: f64,
    pub ch: f64,
    pub flip: bool,
    pub size: Resolution,
}

impl GeometricTransform {
    pub fn identity(size: Resolution) -> Self {
        Self {
            x0: 0.0,
            y0: 0.0,
            cw: size.width as f64,
            ch: size.height as f64,
            flip: false,
            size,
        }
    }

    pub fn sample(size: Resolution, cfg: &AugmentConfig, rng: &mut Rng) -> Self {
        let (lo, hi) = cfg.crop_scale;
        let s = if hi > lo { rng.gen_range(lo..=hi) } else { hi };
        let (w, h) = (size.width as f64, size.height as f64);
        let (cw, ch) = (s * w, s * h);
        let x0 = if w > cw { rng.gen_range(0.0..=w - cw) } else { 0.0 };
        let y0 = if h > ch { rng.gen_range(0.0..=h - ch) } else { 0.0 };
        let flip = rng.gen_bool(cfg.flip_prob.clamp(0.0, 1.0));
        Self { x0, y0, cw, ch, flip, size }
    }

    pub fn apply(&self, image: &RgbImage) -> RgbImage {
        let cropped = if *self == Self::identity(self.size) || (self.flip && self.is_full_frame()) {
            image.clone()
        } else {
            image.crop_resize(self.x0, self.y0, self.cw, self.ch, self.size)
        };
        if self.flip {
            cropped.flip_horizontal()
        } else {
            cropped
        }
    }

    fn is_full_frame(&self) -> bool {
        self.x0 == 0.0 && self.y0 == 0.0 && self.cw == self.size.width as f64 && self.ch == self.size.height as f64
    }

    /// Maps continuous source coordinates into the transformed view, or
    /// `None` when the point falls outside the crop.
    pub fn map_point(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (w, h) = (self.size.width as f64, self.size.height as f64);
        let mut u = (x - self.x0 + 0.5) * w / self.cw - 0.5;
        let v = (y - self.y0 + 0.5) * h / self.ch - 0.5;
        if !(-0.5..=w - 0.5).contains(&u) || !(-0.5..=h - 0.5).contains(&v) {
            return None;
        }
        if self.flip {
            u = w - 1.0 - u;
        }
        Some((u, v))
    }
}

/// Brightness, contrast and saturation factors, applied in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorJitter {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl ColorJitter {
    pub const IDENTITY: ColorJitter = ColorJitter {
        brightness: 1.0,
        contrast: 1.0,
        saturation: 1.0,
    };

    pub fn sample(cfg: &AugmentConfig, rng: &mut Rng) -> Self {
        let mut f = |s: f64| if s > 0.0 { rng.gen_range(1.0 - s..=1.0 + s) } else { 1.0 };
        Self {
            brightness: f(cfg.brightness),
            contrast: f(cfg.contrast),
            saturation: f(cfg.saturation),
        }
    }

    pub fn apply(&self, image: &RgbImage) -> RgbImage {
        if *self == Self::IDENTITY {
            return image.clone();
        }
        let (h, w) = (image.height(), image.width());
        let n = h * w;
        let mut d = image.data().to_vec();
        for v in &mut d {
            *v = (*v * self.brightness).clamp(0.0, 1.0);
        }
        let gray = |d: &[f64], i: usize| 0.299 * d[i] + 0.587 * d[n + i] + 0.114 * d[2 * n + i];
        let mean = (0..n).map(|i| gray(&d, i)).sum::<f64>() / n as f64;
        for v in &mut d {
            *v = ((*v - mean) * self.contrast + mean).clamp(0.0, 1.0);
        }
        for i in 0..n {
            let g = gray(&d, i);
            for c in 0..3 {
                let v = &mut d[c * n + i];
                *v = (g + (*v - g) * self.saturation).clamp(0.0, 1.0);
            }
        }
        RgbImage::from_planar(h, w, d).expect("same shape")
    }
}

#[derive(Debug, Clone)]
pub struct AugmentedPair {
    pub student_view: RgbImage,
    pub teacher_view: RgbImage,
    pub transform: GeometricTransform,
    /// Each input point mapped into the views, `None` if cropped away.
    pub points: Vec<Option<(f64, f64)>>,
}

/// One geometric transform shared by both views and an independent color
/// jitter per view. `points` are continuous pixel coordinates of `image`.
pub fn augment_pair(image: &RgbImage, points: &[(f64, f64)], rng: &mut Rng, cfg: &AugmentConfig) -> AugmentedPair {
    let size = image.resolution();
    if !cfg.enabled {
        return AugmentedPair {
            student_view: image.clone(),
            teacher_view: image.clone(),
            transform: GeometricTransform::identity(size),
            points: points.iter().map(|&(x, y)| Some((x, y))).collect(),
        };
    }
    let transform = GeometricTransform::sample(size, cfg, rng);
    let geo = transform.apply(image);
    let js = ColorJitter::sample(cfg, rng);
    let jt = ColorJitter::sample(cfg, rng);
    AugmentedPair {
        student_view: js.apply(&geo),
        teacher_view: jt.apply(&geo),
        transform,
        points: points.iter().map(|&(x, y)| transform.map_point(x, y)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn ramp(h: usize, w: usize) -> RgbImage {
        let mut img = RgbImage::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    img.set(c, y, x, (x + 3 * y + c) as f64 / (w + 3 * h + 3) as f64);
                }
            }
        }
        img
    }

    #[test]
    fn flip_maps_x_to_mirror() {
        let size = Resolution::new(10, 20);
        let t = GeometricTransform {
            flip: true,
            ..GeometricTransform::identity(size)
        };
        assert_eq!(t.map_point(3.0, 4.0), Some((16.0, 4.0)));
        let img = ramp(10, 20);
        let out = t.apply(&img);
        assert_eq!(out.get(1, 4, 16), img.get(1, 4, 3));
    }

    #[test]
    fn identity_transform_views_differ_only_in_color() {
        let cfg = AugmentConfig {
            crop_scale: (1.0, 1.0),
            flip_prob: 0.0,
            ..AugmentConfig::default()
        };
        let img = ramp(12, 16);
        let a = augment_pair(&img, &[(2.0, 3.0)], &mut rng::seeded(5), &cfg);
        assert_eq!(a.transform, GeometricTransform::identity(img.resolution()));
        assert_eq!(a.points, vec![Some((2.0, 3.0))]);
        assert_ne!(a.student_view, a.teacher_view);
        // undoing each jitter is not possible after clamping, but the
        // spatial structure is shared: the brightest pixel is the same
        let argmax = |im: &RgbImage| {
            (0..im.channel(0).len())
                .max_by(|&i, &j| im.channel(0)[i].total_cmp(&im.channel(0)[j]))
                .unwrap()
        };
        assert_eq!(argmax(&a.student_view), argmax(&a.teacher_view));
    }

    #[test]
    fn crop_drops_outside_points_and_maps_inside_ones() {
        let size = Resolution::new(20, 40);
        let t = GeometricTransform {
            x0: 10.0,
            y0: 0.0,
            cw: 20.0,
            ch: 10.0,
            flip: false,
            size,
        };
        assert_eq!(t.map_point(2.0, 2.0), None);
        let (u, v) = t.map_point(20.0, 5.0).unwrap();
        // pixel centers line up: x' = (x - x0 + 0.5) * 2 - 0.5
        assert!((u - 20.5).abs() < 1e-12 && (v - 10.5).abs() < 1e-12);
        // the mapped point reads the same value in the cropped view
        let img = ramp(20, 40);
        let out = t.apply(&img);
        let src = crate::raster::sample_bilinear(img.channel(0), 20, 40, 20.0, 5.0);
        let dst = crate::raster::sample_bilinear(out.channel(0), 20, 40, u, v);
        assert!((src - dst).abs() < 1e-9);
    }

    #[test]
    fn disabled_is_identity() {
        let img = ramp(8, 8);
        let a = augment_pair(&img, &[(1.0, 1.0)], &mut rng::seeded(0), &AugmentConfig::none());
        assert_eq!(a.student_view, img);
        assert_eq!(a.teacher_view, img);
    }
}
