//! Reference per-pixel regression network mapping an `H x W x 3` image to
//! an `H x W` traversability map in (0, 1).
//!
//! Encoder: a stack of 3x3 stride-2 convolutions with ReLU. Decoder: per
//! encoder stage, a 3x3 convolution with ReLU followed by nearest-neighbor
//! upsampling to the next finer resolution, with an optional additive skip
//! from the matching encoder stage. Head: 1x1 convolution and sigmoid.
//!
//! Gradients are computed by an explicit backward pass over a cached
//! forward; no autodiff machinery is involved.

mod checkpoint;
pub mod ops;
mod params;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use params::{ema_update, ema_update_in_place, NamedArray, ParamSet};

use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::manifest::Resolution;
use crate::raster::{RgbImage, TraversabilityMap};
use crate::rng::Rng;
use ops::{ConvSpec, Tensor};

pub const HEAD_PREFIX: &str = "head.";

/// Fixed input standardization applied before the first convolution.
const INPUT_MEAN: f64 = 0.5;
const INPUT_SCALE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Output channels of each stride-2 encoder stage.
    pub encoder_widths: Vec<usize>,
    /// Add encoder features into the decoder at matching resolutions.
    pub skip_connections: bool,
    pub input_resolution: Resolution,
}

impl ModelConfig {
    pub fn new(input_resolution: Resolution) -> Self {
        Self {
            encoder_widths: vec![8, 16, 16, 32],
            skip_connections: true,
            input_resolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return Err(Error::Config("encoder widths must be non-empty and positive".into()));
        }
        if self.input_resolution.height == 0 || self.input_resolution.width == 0 {
            return Err(Error::Config("input resolution must be positive".into()));
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(Resolution::default())
    }
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    spec: ConvSpec,
    relu: bool,
}

/// Network topology; parameters live in a separate [`ParamSet`] so that
/// student and teacher share one model.
#[derive(Debug, Clone)]
pub struct TraversabilityNet {
    config: ModelConfig,
    encoder: Vec<Layer>,
    /// Decoder stages in forward order (coarsest first).
    decoder: Vec<Layer>,
    head: Layer,
    /// Spatial size of the input and of every encoder output.
    sizes: Vec<(usize, usize)>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    enc_inputs: Vec<Tensor>,
    enc_outputs: Vec<Tensor>,
    dec_inputs: Vec<Tensor>,
    dec_outputs: Vec<Tensor>,
    head_input: Tensor,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

impl TraversabilityNet {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let widths = &config.encoder_widths;
        let n = widths.len();
        let mut encoder = Vec::with_capacity(n);
        let res = config.input_resolution;
        let mut sizes = vec![(res.height, res.width)];
        let mut c_in = 3;
        for &w in widths {
            let spec = ConvSpec { c_in, c_out: w, k: 3, stride: 2 };
            let (h, wd) = *sizes.last().unwrap();
            sizes.push(spec.out_size(h, wd));
            encoder.push(Layer { spec, relu: true });
            c_in = w;
        }
        let mut decoder = Vec::with_capacity(n);
        for k in (0..n).rev() {
            let c_out = if k == 0 { widths[0] } else { widths[k - 1] };
            decoder.push(Layer {
                spec: ConvSpec { c_in, c_out, k: 3, stride: 1 },
                relu: true,
            });
            c_in = c_out;
        }
        let head = Layer {
            spec: ConvSpec { c_in, c_out: 1, k: 1, stride: 1 },
            relu: false,
        };
        Ok(Self {
            config,
            encoder,
            decoder,
            head,
            sizes,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn resolution(&self) -> Resolution {
        self.config.input_resolution
    }

    fn layers(&self) -> impl Iterator<Item = (String, &Layer)> {
        let n = self.encoder.len();
        let enc = self.encoder.iter().enumerate().map(|(i, l)| (format!("enc{i}"), l));
        let dec = self
            .decoder
            .iter()
            .enumerate()
            .map(move |(j, l)| (format!("dec{}", n - 1 - j), l));
        enc.chain(dec).chain(std::iter::once(("head".to_string(), &self.head)))
    }

    /// He-normal convolution weights, zero biases, small head weights.
    pub fn init_params(&self, rng: &mut Rng) -> ParamSet {
        let mut arrays = Vec::new();
        let mut normal_rng = rand_chacha::ChaCha8Rng::from_rng(rng).expect("chacha from rng");
        for (name, layer) in self.layers() {
            let s = layer.spec;
            let fan_in = (s.c_in * s.k * s.k) as f64;
            let std = if name == "head" { 0.1 / fan_in.sqrt() } else { (2.0 / fan_in).sqrt() };
            let dist = Normal::new(0.0, std).expect("positive std");
            let mut w = NamedArray::zeros(format!("{name}.weight"), vec![s.c_out, s.c_in, s.k, s.k]);
            for v in &mut w.data {
                *v = dist.sample(&mut normal_rng);
            }
            arrays.push(w);
            arrays.push(NamedArray::zeros(format!("{name}.bias"), vec![s.c_out]));
        }
        ParamSet::new(arrays)
    }

    /// All-zero parameters of the right shapes.
    pub fn zero_params(&self) -> ParamSet {
        let arrays = self
            .layers()
            .flat_map(|(name, layer)| {
                let s = layer.spec;
                [
                    NamedArray::zeros(format!("{name}.weight"), vec![s.c_out, s.c_in, s.k, s.k]),
                    NamedArray::zeros(format!("{name}.bias"), vec![s.c_out]),
                ]
            })
            .collect();
        ParamSet::new(arrays)
    }

    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        self.zero_params().check_compatible(params)
    }

    fn check_image(&self, image: &RgbImage) -> Result<()> {
        if image.resolution() != self.resolution() {
            return Err(Error::shape(self.resolution(), image.resolution()));
        }
        Ok(())
    }

    pub fn forward(&self, params: &ParamSet, image: &RgbImage) -> Result<TraversabilityMap> {
        let cache = self.forward_cached(params, image)?;
        let res = self.resolution();
        TraversabilityMap::new(res.height, res.width, cache.output)
    }

    pub fn forward_cached(&self, params: &ParamSet, image: &RgbImage) -> Result<ForwardCache> {
        self.check_image(image)?;
        self.check_params(params)?;
        let p = params.arrays();
        let n = self.encoder.len();
        let mut x = Tensor {
            c: 3,
            h: image.height(),
            w: image.width(),
            data: image.data().iter().map(|v| (v - INPUT_MEAN) / INPUT_SCALE).collect(),
        };
        let mut enc_inputs = Vec::with_capacity(n);
        let mut enc_outputs = Vec::with_capacity(n);
        for (i, layer) in self.encoder.iter().enumerate() {
            let mut y = ops::conv2d(&x, &p[2 * i].data, &p[2 * i + 1].data, layer.spec);
            ops::relu_inplace(&mut y);
            enc_inputs.push(x);
            enc_outputs.push(y.clone());
            x = y;
        }
        let mut dec_inputs = Vec::with_capacity(n);
        let mut dec_outputs = Vec::with_capacity(n);
        for (j, layer) in self.decoder.iter().enumerate() {
            let k = n - 1 - j;
            let pi = 2 * (n + j);
            let mut y = ops::conv2d(&x, &p[pi].data, &p[pi + 1].data, layer.spec);
            if layer.relu {
                ops::relu_inplace(&mut y);
            }
            let (th, tw) = self.sizes[k];
            let mut up = ops::upsample_nearest(&y, th, tw);
            if k >= 1 && self.config.skip_connections {
                for (u, s) in up.data.iter_mut().zip(&enc_outputs[k - 1].data) {
                    *u += s;
                }
            }
            dec_inputs.push(x);
            dec_outputs.push(y);
            x = up;
        }
        let hi = 4 * n;
        let z = ops::conv2d(&x, &p[hi].data, &p[hi + 1].data, self.head.spec);
        let output = z.data.iter().map(|&v| sigmoid(v)).collect();
        Ok(ForwardCache {
            enc_inputs,
            enc_outputs,
            dec_inputs,
            dec_outputs,
            head_input: x,
            output,
        })
    }

    /// Accumulates into `grads` the parameter gradient of a scalar whose
    /// gradient with respect to the output map is `grad_output`.
    pub fn backward(
        &self,
        params: &ParamSet,
        cache: &ForwardCache,
        grad_output: &[f64],
        grads: &mut ParamSet,
    ) -> Result<()> {
        let res = self.resolution();
        if grad_output.len() != res.pixels() {
            return Err(Error::shape(res.pixels(), grad_output.len()));
        }
        let p = params.arrays();
        let g = grads.arrays_mut();
        let n = self.encoder.len();

        let gz = Tensor {
            c: 1,
            h: res.height,
            w: res.width,
            data: grad_output
                .iter()
                .zip(&cache.output)
                .map(|(go, y)| go * y * (1.0 - y))
                .collect(),
        };
        let hi = 4 * n;
        let (gw, gb) = split_pair(g, hi);
        let mut gx = ops::conv2d_backward(&cache.head_input, &p[hi].data, self.head.spec, &gz, gw, gb, true)
            .expect("input grad requested");

        let mut enc_grads: Vec<Option<Tensor>> = vec![None; n];
        for j in (0..n).rev() {
            let k = n - 1 - j;
            if k >= 1 && self.config.skip_connections {
                accumulate(&mut enc_grads[k - 1], &gx);
            }
            let y = &cache.dec_outputs[j];
            let mut gy = ops::upsample_nearest_backward(&gx, y.h, y.w);
            ops::relu_backward_inplace(y, &mut gy);
            let pi = 2 * (n + j);
            let (gw, gb) = split_pair(g, pi);
            gx = ops::conv2d_backward(&cache.dec_inputs[j], &p[pi].data, self.decoder[j].spec, &gy, gw, gb, true)
                .expect("input grad requested");
        }
        accumulate(&mut enc_grads[n - 1], &gx);

        for i in (0..n).rev() {
            let Some(mut ga) = enc_grads[i].take() else {
                continue;
            };
            ops::relu_backward_inplace(&cache.enc_outputs[i], &mut ga);
            let (gw, gb) = split_pair(g, 2 * i);
            let gi = ops::conv2d_backward(&cache.enc_inputs[i], &p[2 * i].data, self.encoder[i].spec, &ga, gw, gb, i > 0);
            if let Some(gi) = gi {
                accumulate(&mut enc_grads[i - 1], &gi);
            }
        }
        Ok(())
    }
}

fn split_pair(g: &mut [NamedArray], idx: usize) -> (&mut [f64], &mut [f64]) {
    let (w, rest) = g[idx..].split_at_mut(1);
    (&mut w[0].data, &mut rest[0].data)
}

fn accumulate(slot: &mut Option<Tensor>, g: &Tensor) {
    match slot {
        Some(acc) => {
            debug_assert!(acc.same_shape(g));
            for (a, b) in acc.data.iter_mut().zip(&g.data) {
                *a += b;
            }
        }
        None => *slot = Some(g.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn tiny(res: Resolution, skip: bool) -> TraversabilityNet {
        TraversabilityNet::new(ModelConfig {
            encoder_widths: vec![3, 4, 5],
            skip_connections: skip,
            input_resolution: res,
        })
        .unwrap()
    }

    fn test_image(res: Resolution, seed: u64) -> RgbImage {
        use rand::Rng as _;
        let mut r = rng::seeded(seed);
        let data = (0..3 * res.pixels()).map(|_| r.gen::<f64>()).collect();
        RgbImage::from_planar(res.height, res.width, data).unwrap()
    }

    #[test]
    fn output_matches_input_resolution() {
        let res = Resolution::new(240, 424);
        let net = TraversabilityNet::new(ModelConfig::new(res)).unwrap();
        let params = net.init_params(&mut rng::seeded(0));
        let out = net.forward(&params, &test_image(res, 1)).unwrap();
        assert_eq!(out.resolution(), res);
        assert!(out.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn zero_head_gives_one_half() {
        let res = Resolution::new(20, 28);
        let net = tiny(res, true);
        let mut params = net.init_params(&mut rng::seeded(0));
        params.get_mut("head.weight").unwrap().data.fill(0.0);
        params.get_mut("head.bias").unwrap().data.fill(0.0);
        let out = net.forward(&params, &test_image(res, 2)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn forward_is_deterministic() {
        let res = Resolution::new(19, 23);
        let net = tiny(res, true);
        let params = net.init_params(&mut rng::seeded(4));
        let img = test_image(res, 3);
        assert_eq!(net.forward(&params, &img).unwrap(), net.forward(&params, &img).unwrap());
    }

    #[test]
    fn wrong_input_size_is_shape_mismatch() {
        let net = tiny(Resolution::new(20, 28), true);
        let params = net.init_params(&mut rng::seeded(0));
        let err = net.forward(&params, &test_image(Resolution::new(20, 30), 0)).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    /// Finite-difference check of the full backward pass for a random
    /// linear functional of the output.
    #[test]
    fn backward_matches_finite_differences() {
        use rand::Rng as _;
        for &(res, skip) in &[(Resolution::new(13, 18), true), (Resolution::new(16, 16), false)] {
            let net = tiny(res, skip);
            let mut r = rng::seeded(17);
            let mut params = net.init_params(&mut r);
            // non-trivial head so gradients reach every layer; nonzero biases
            // keep pre-activations off the ReLU kink in dead regions
            for v in &mut params.get_mut("head.weight").unwrap().data {
                *v = r.gen_range(-1.0..1.0);
            }
            for a in params.arrays_mut() {
                if a.name.ends_with(".bias") {
                    for v in &mut a.data {
                        *v = r.gen_range(0.05..0.2);
                    }
                }
            }
            let img = test_image(res, 5);
            let weights: Vec<f64> = (0..res.pixels()).map(|_| r.gen_range(-1.0..1.0)).collect();
            let objective = |p: &ParamSet| -> f64 {
                let out = net.forward(p, &img).unwrap();
                out.values().iter().zip(&weights).map(|(a, b)| a * b).sum()
            };
            let cache = net.forward_cached(&params, &img).unwrap();
            let mut grads = params.zeros_like();
            net.backward(&params, &cache, &weights, &mut grads).unwrap();
            let eps = 1e-6;
            let mut checked = 0;
            for ai in 0..params.len() {
                let len = params.arrays()[ai].data.len();
                for &j in &[0, len / 3, len - 1] {
                    let mut plus = params.clone();
                    plus.arrays_mut()[ai].data[j] += eps;
                    let mut minus = params.clone();
                    minus.arrays_mut()[ai].data[j] -= eps;
                    let fd = (objective(&plus) - objective(&minus)) / (2.0 * eps);
                    let an = grads.arrays()[ai].data[j];
                    let tol = 1e-5 * fd.abs().max(an.abs()).max(1e-3);
                    assert!(
                        (fd - an).abs() <= tol,
                        "{}[{j}]: fd {fd} analytic {an}",
                        params.arrays()[ai].name
                    );
                    checked += 1;
                }
            }
            assert!(checked > 20);
        }
    }

    #[test]
    fn layer_names_are_ordered() {
        let net = tiny(Resolution::new(16, 16), true);
        let names: Vec<_> = net.zero_params().arrays().iter().map(|a| a.name.clone()).collect();
        assert_eq!(names[0], "enc0.weight");
        assert_eq!(names[6], "dec2.weight");
        assert_eq!(names[10], "dec0.weight");
        assert_eq!(names.last().unwrap(), "head.bias");
    }
}
