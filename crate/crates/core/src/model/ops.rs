//! Dense CPU kernels with explicit backward passes.

/// Feature map, layout `[c][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        (self.c, self.h, self.w) == (other.c, other.h, other.w)
    }
}

/// Square convolution geometry. Padding is `k / 2` on every side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub fn pad(&self) -> usize {
        self.k / 2
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        let p = self.pad();
        ((h + 2 * p - self.k) / self.stride + 1, (w + 2 * p - self.k) / self.stride + 1)
    }

    pub fn weight_len(&self) -> usize {
        self.c_out * self.c_in * self.k * self.k
    }

    /// Output index range `[lo, hi)` along one axis for kernel tap `kk`
    /// such that the input index `o * stride + kk - pad` is in `[0, n)`.
    #[inline]
    fn valid_range(&self, kk: usize, n_in: usize, n_out: usize) -> (usize, usize) {
        let p = self.pad();
        let lo = if kk >= p { 0 } else { (p - kk).div_ceil(self.stride) };
        // largest o with o * s + kk - p <= n_in - 1
        let hi = if n_in + p < kk + 1 {
            0
        } else {
            ((n_in - 1 + p - kk) / self.stride + 1).min(n_out)
        };
        (lo.min(hi), hi)
    }
}

pub fn conv2d(input: &Tensor, weight: &[f64], bias: &[f64], spec: ConvSpec) -> Tensor {
    debug_assert_eq!(input.c, spec.c_in);
    let (oh, ow) = spec.out_size(input.h, input.w);
    let mut out = Tensor::zeros(spec.c_out, oh, ow);
    let (k, s, p) = (spec.k, spec.stride, spec.pad());
    let in_plane = input.h * input.w;
    let out_plane = oh * ow;
    for o in 0..spec.c_out {
        let dst = &mut out.data[o * out_plane..(o + 1) * out_plane];
        dst.fill(bias[o]);
        for i in 0..spec.c_in {
            let src = &input.data[i * in_plane..(i + 1) * in_plane];
            for ky in 0..k {
                let (y_lo, y_hi) = spec.valid_range(ky, input.h, oh);
                for kx in 0..k {
                    let wv = weight[((o * spec.c_in + i) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (x_lo, x_hi) = spec.valid_range(kx, input.w, ow);
                    for oy in y_lo..y_hi {
                        let iy = oy * s + ky - p;
                        let row = &src[iy * input.w..(iy + 1) * input.w];
                        let drow = &mut dst[oy * ow..(oy + 1) * ow];
                        if s == 1 {
                            let off = x_lo + kx - p;
                            for (d, v) in drow[x_lo..x_hi].iter_mut().zip(&row[off..]) {
                                *d += wv * v;
                            }
                        } else {
                            for ox in x_lo..x_hi {
                                drow[ox] += wv * row[ox * s + kx - p];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients and returns the input gradient.
pub fn conv2d_backward(
    input: &Tensor,
    weight: &[f64],
    spec: ConvSpec,
    grad_out: &Tensor,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    need_input_grad: bool,
) -> Option<Tensor> {
    let (oh, ow) = (grad_out.h, grad_out.w);
    let (k, s, p) = (spec.k, spec.stride, spec.pad());
    let in_plane = input.h * input.w;
    let out_plane = oh * ow;
    let mut grad_in = need_input_grad.then(|| Tensor::zeros(input.c, input.h, input.w));
    for o in 0..spec.c_out {
        let g = &grad_out.data[o * out_plane..(o + 1) * out_plane];
        grad_b[o] += g.iter().sum::<f64>();
        for i in 0..spec.c_in {
            let src = &input.data[i * in_plane..(i + 1) * in_plane];
            for ky in 0..k {
                let (y_lo, y_hi) = spec.valid_range(ky, input.h, oh);
                for kx in 0..k {
                    let widx = ((o * spec.c_in + i) * k + ky) * k + kx;
                    let wv = weight[widx];
                    let (x_lo, x_hi) = spec.valid_range(kx, input.w, ow);
                    let mut acc = 0.0;
                    for oy in y_lo..y_hi {
                        let iy = oy * s + ky - p;
                        let row = &src[iy * input.w..(iy + 1) * input.w];
                        let grow = &g[oy * ow..(oy + 1) * ow];
                        if s == 1 {
                            let off = x_lo + kx - p;
                            for (gv, v) in grow[x_lo..x_hi].iter().zip(&row[off..]) {
                                acc += gv * v;
                            }
                        } else {
                            for ox in x_lo..x_hi {
                                acc += grow[ox] * row[ox * s + kx - p];
                            }
                        }
                    }
                    grad_w[widx] += acc;
                    if let Some(gi) = grad_in.as_mut() {
                        if wv == 0.0 {
                            continue;
                        }
                        let gplane = &mut gi.data[i * in_plane..(i + 1) * in_plane];
                        for oy in y_lo..y_hi {
                            let iy = oy * s + ky - p;
                            let grow = &g[oy * ow..(oy + 1) * ow];
                            let irow = &mut gplane[iy * input.w..(iy + 1) * input.w];
                            if s == 1 {
                                let off = x_lo + kx - p;
                                for (d, gv) in irow[off..off + (x_hi - x_lo)].iter_mut().zip(&grow[x_lo..x_hi]) {
                                    *d += wv * gv;
                                }
                            } else {
                                for ox in x_lo..x_hi {
                                    irow[ox * s + kx - p] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    grad_in
}

pub fn relu_inplace(t: &mut Tensor) {
    for v in &mut t.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Masks `grad` where the post-activation value is not positive.
pub fn relu_backward_inplace(activated: &Tensor, grad: &mut Tensor) {
    for (g, a) in grad.data.iter_mut().zip(&activated.data) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

#[inline]
fn nearest_index(dst: usize, n_in: usize, n_out: usize) -> usize {
    ((dst * n_in) / n_out).min(n_in - 1)
}

/// Nearest-neighbor resize to `(h, w)`; source index `floor(dst * in / out)`.
pub fn upsample_nearest(input: &Tensor, h: usize, w: usize) -> Tensor {
    let mut out = Tensor::zeros(input.c, h, w);
    let xs: Vec<usize> = (0..w).map(|x| nearest_index(x, input.w, w)).collect();
    for c in 0..input.c {
        let src = input.plane(c);
        for y in 0..h {
            let sy = nearest_index(y, input.h, h);
            let srow = &src[sy * input.w..(sy + 1) * input.w];
            let base = (c * h + y) * w;
            for (x, &sx) in xs.iter().enumerate() {
                out.data[base + x] = srow[sx];
            }
        }
    }
    out
}

pub fn upsample_nearest_backward(grad_out: &Tensor, in_h: usize, in_w: usize) -> Tensor {
    let mut g = Tensor::zeros(grad_out.c, in_h, in_w);
    let xs: Vec<usize> = (0..grad_out.w).map(|x| nearest_index(x, in_w, grad_out.w)).collect();
    for c in 0..grad_out.c {
        for y in 0..grad_out.h {
            let sy = nearest_index(y, in_h, grad_out.h);
            let base = (c * in_h + sy) * in_w;
            let grow = &grad_out.data[(c * grad_out.h + y) * grad_out.w..][..grad_out.w];
            for (x, &sx) in xs.iter().enumerate() {
                g.data[base + sx] += grow[x];
            }
        }
    }
    g
}
