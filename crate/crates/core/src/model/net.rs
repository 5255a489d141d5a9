//! Forward passes of `f` (encode) and `g` (decode), and the hand-written
//! reverse pass of the pair loss.
//!
//! Activations are kept channel-major: `a[ch * positions + pos]`.

use crate::equivariance::{pair_loss, rotate_scene, sphere_mask, unrotate_scene, LossBreakdown, RotationMethod};
use crate::error::{Error, Result};
use crate::synth::TrainSample;
use crate::tensor::{Element, Tensor};

use super::params::{ModelConfig, ToyParams, IMAGE_CHANNELS};

pub const LEAKY_SLOPE: f64 = 0.2;
const POOL: usize = 2;

fn leaky(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        LEAKY_SLOPE * a
    }
}

fn leaky_grad(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// `out[o][p] = b[o] + Σ_i w[o][i] · x[i][p]`.
fn linear(w: &[f64], b: &[f64], x: &[f64], inp: usize, positions: usize) -> Vec<f64> {
    let out = b.len();
    let mut y = vec![0.0; out * positions];
    for o in 0..out {
        let row = &mut y[o * positions..(o + 1) * positions];
        row.fill(b[o]);
        for i in 0..inp {
            let wi = w[o * inp + i];
            for (yv, xv) in row.iter_mut().zip(&x[i * positions..(i + 1) * positions]) {
                *yv += wi * xv;
            }
        }
    }
    y
}

/// Accumulates weight and bias gradients of [`linear`] and returns `dx`.
fn linear_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    inp: usize,
    positions: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let out = db.len();
    let mut dx = vec![0.0; inp * positions];
    for o in 0..out {
        let g = &dy[o * positions..(o + 1) * positions];
        db[o] += g.iter().sum::<f64>();
        for i in 0..inp {
            let xi = &x[i * positions..(i + 1) * positions];
            dw[o * inp + i] += g.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            let wi = w[o * inp + i];
            for (d, gv) in dx[i * positions..(i + 1) * positions].iter_mut().zip(g) {
                *d += wi * gv;
            }
        }
    }
    dx
}

/// Index of the pooled cell containing each full-resolution pixel.
fn coarse_index(image_size: usize) -> Vec<usize> {
    let s = image_size / POOL;
    (0..image_size * image_size).map(|p| (p / image_size / POOL) * s + (p % image_size) / POOL).collect()
}

fn check_shape<T>(t: &Tensor<T>, expected: &[usize], what: &str) -> Result<()> {
    if t.shape() != expected {
        return Err(Error::InvalidShape {
            shape: t.shape().to_vec(),
            reason: format!("{what} must be {expected:?}"),
        });
    }
    Ok(())
}

struct EncodeCache {
    x: Vec<f64>,
    a1: Vec<f64>,
    pooled: Vec<f64>,
}

struct DecodeCache {
    z: Vec<f64>,
    a3: Vec<f64>,
    h3: Vec<f64>,
    y: Vec<f64>,
}

/// Shape-dependent constants shared by the passes.
struct Layout {
    c: ModelConfig,
    pixels: usize,
    cells: usize,
    coarse: Vec<usize>,
    keep: Vec<bool>,
}

impl Layout {
    fn new(c: ModelConfig) -> Result<Self> {
        let n = c.scene_size;
        Ok(Layout {
            c,
            pixels: c.image_size * c.image_size,
            cells: n * n,
            coarse: coarse_index(c.image_size),
            keep: sphere_mask(n, crate::equivariance::SAFE_MASK_RADIUS)?,
        })
    }

    /// Zeroes every code entry whose `(d, h, w)` lies outside the mask.
    /// Code row `o = c · D + d` and column `q = h · W + w` map to voxel `(d, h, w)`.
    fn mask(&self, code: &mut [f64]) {
        let n = self.c.scene_size;
        for (o, row) in code.chunks_exact_mut(self.cells).enumerate() {
            let d = o % n;
            for (v, &k) in row.iter_mut().zip(&self.keep[d * self.cells..(d + 1) * self.cells]) {
                if !k {
                    *v = 0.0;
                }
            }
        }
    }

    fn encode(&self, p: &ToyParams, x: &[f64]) -> (Vec<f64>, EncodeCache) {
        let f = self.c.features;
        let (w1, b1) = p.enc_mix1();
        let a1 = linear(w1, b1, x, IMAGE_CHANNELS, self.pixels);
        let mut pooled = vec![0.0; f * self.cells];
        let scale = 1.0 / (POOL * POOL) as f64;
        for ch in 0..f {
            for (pix, &q) in self.coarse.iter().enumerate() {
                pooled[ch * self.cells + q] += scale * leaky(a1[ch * self.pixels + pix]);
            }
        }
        let (wp, bp) = p.enc_proj();
        let mut code = linear(wp, bp, &pooled, f, self.cells);
        self.mask(&mut code);
        (code, EncodeCache { x: x.to_vec(), a1, pooled })
    }

    fn encode_backward(&self, p: &ToyParams, cache: &EncodeCache, dcode: &[f64], grads: &mut ToyParams) {
        let f = self.c.features;
        let mut da2 = dcode.to_vec();
        self.mask(&mut da2);
        let (wp, _) = p.enc_proj();
        let g = grads.groups_mut();
        let (lo, hi) = g.split_at_mut(3);
        let dpooled = linear_backward(wp, &cache.pooled, &da2, f, self.cells, &mut lo[2], &mut hi[0]);
        let scale = 1.0 / (POOL * POOL) as f64;
        let mut da1 = vec![0.0; f * self.pixels];
        for ch in 0..f {
            for (pix, &q) in self.coarse.iter().enumerate() {
                let i = ch * self.pixels + pix;
                da1[i] = scale * dpooled[ch * self.cells + q] * leaky_grad(cache.a1[i]);
            }
        }
        let (w1, _) = p.enc_mix1();
        let (lo, hi) = g.split_at_mut(1);
        linear_backward(w1, &cache.x, &da1, IMAGE_CHANNELS, self.pixels, &mut lo[0], &mut hi[0]);
    }

    fn decode(&self, p: &ToyParams, code: &[f64]) -> DecodeCache {
        let f = self.c.features;
        let (wd, bd) = p.dec_proj();
        let a3 = linear(wd, bd, code, self.c.code_channels(), self.cells);
        let h3: Vec<f64> = a3.iter().map(|&a| leaky(a)).collect();
        let mut up = vec![0.0; f * self.pixels];
        for ch in 0..f {
            for (pix, &q) in self.coarse.iter().enumerate() {
                up[ch * self.pixels + pix] = h3[ch * self.cells + q];
            }
        }
        let (w4, b4) = p.dec_mix1();
        let y = linear(w4, b4, &up, f, self.pixels).into_iter().map(sigmoid).collect();
        DecodeCache { z: code.to_vec(), a3, h3, y }
    }

    /// Returns the gradient with respect to the code.
    fn decode_backward(&self, p: &ToyParams, cache: &DecodeCache, dy: &[f64], grads: &mut ToyParams) -> Vec<f64> {
        let f = self.c.features;
        // the upsampled features are constant over each block, so sum da4 per cell first
        let mut block = vec![0.0; IMAGE_CHANNELS * self.cells];
        for ch in 0..IMAGE_CHANNELS {
            for (pix, &q) in self.coarse.iter().enumerate() {
                let i = ch * self.pixels + pix;
                let y = cache.y[i];
                block[ch * self.cells + q] += dy[i] * y * (1.0 - y);
            }
        }
        let g = grads.groups_mut();
        {
            let (lo, hi) = g.split_at_mut(7);
            let (dw4, db4) = (&mut lo[6], &mut hi[0]);
            for (o, row) in block.chunks_exact(self.cells).enumerate() {
                db4[o] += row.iter().sum::<f64>();
                for ch in 0..f {
                    let h = &cache.h3[ch * self.cells..(ch + 1) * self.cells];
                    dw4[o * f + ch] += row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        let (w4, _) = p.dec_mix1();
        let mut da3 = vec![0.0; f * self.cells];
        for ch in 0..f {
            for o in 0..IMAGE_CHANNELS {
                let w = w4[o * f + ch];
                for q in 0..self.cells {
                    da3[ch * self.cells + q] += w * block[o * self.cells + q];
                }
            }
        }
        for (d, &a) in da3.iter_mut().zip(&cache.a3) {
            *d *= leaky_grad(a);
        }
        let (wd, _) = p.dec_proj();
        let (lo, hi) = g.split_at_mut(5);
        linear_backward(wd, &cache.z, &da3, self.c.code_channels(), self.cells, &mut lo[4], &mut hi[0])
    }
}

fn image_data<T: Element>(x: &Tensor<T>, c: &ModelConfig) -> Result<Vec<f64>> {
    check_shape(x, &c.image_shape(), "image")?;
    Ok(x.data().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
}

/// Inverse renderer `f`: image `3×H×W` to masked scene `C_s×D×D×D`.
pub fn encode<T: Element>(p: &ToyParams, x: &Tensor<T>) -> Result<Tensor<f64>> {
    let c = p.config();
    let layout = Layout::new(c)?;
    let (code, _) = layout.encode(p, &image_data(x, &c)?);
    Tensor::from_vec(c.scene_shape().to_vec(), code)
}

/// Forward renderer `g`: scene `C_s×D×D×D` to image `3×H×W` in `(0, 1)`.
pub fn decode(p: &ToyParams, z: &Tensor<f64>) -> Result<Tensor<f64>> {
    let c = p.config();
    check_shape(z, &c.scene_shape(), "scene")?;
    let layout = Layout::new(c)?;
    Tensor::from_vec(c.image_shape().to_vec(), layout.decode(p, z.data()).y)
}

/// Every intermediate of one pair evaluation.
pub struct PairForward {
    pub loss: LossBreakdown,
    /// `g(R f(x1))`, the prediction of `x2`.
    pub pred_x2: Tensor<f64>,
    /// `g(R⁻¹ f(x2))`, the prediction of `x1`.
    pub pred_x1: Tensor<f64>,
}

/// Loss of one pair without gradients.
pub fn pair_forward(p: &ToyParams, s: &TrainSample, scene_weight: f64) -> Result<PairForward> {
    let (fwd, _) = run_pair(p, s, scene_weight)?;
    Ok(fwd)
}

struct PairCaches {
    layout: Layout,
    x1: Tensor<f64>,
    x2: Tensor<f64>,
    enc1: EncodeCache,
    enc2: EncodeCache,
    dec1: DecodeCache,
    dec2: DecodeCache,
    z1: Tensor<f64>,
    z2: Tensor<f64>,
    z1r: Tensor<f64>,
    z2r: Tensor<f64>,
}

fn run_pair(p: &ToyParams, s: &TrainSample, scene_weight: f64) -> Result<(PairForward, PairCaches)> {
    let c = p.config();
    let layout = Layout::new(c)?;
    let x1 = Tensor::from_vec(c.image_shape().to_vec(), image_data(&s.x1, &c)?)?;
    let x2 = Tensor::from_vec(c.image_shape().to_vec(), image_data(&s.x2, &c)?)?;
    let shape = c.scene_shape().to_vec();
    let (z1, enc1) = layout.encode(p, x1.data());
    let (z2, enc2) = layout.encode(p, x2.data());
    let z1 = Tensor::from_vec(shape.clone(), z1)?;
    let z2 = Tensor::from_vec(shape.clone(), z2)?;
    let z1r = rotate_scene(&z1, s.pose, RotationMethod::Shear)?;
    let z2r = unrotate_scene(&z2, s.pose, RotationMethod::Shear)?;
    let dec1 = layout.decode(p, z1r.data());
    let dec2 = layout.decode(p, z2r.data());
    let pred_x2 = Tensor::from_vec(c.image_shape().to_vec(), dec1.y.clone())?;
    let pred_x1 = Tensor::from_vec(c.image_shape().to_vec(), dec2.y.clone())?;
    let loss = pair_loss(&x1, &x2, &pred_x2, &pred_x1, &z1, &z2, &z1r, &z2r, scene_weight)?;
    let fwd = PairForward { loss, pred_x2, pred_x1 };
    Ok((fwd, PairCaches { layout, x1, x2, enc1, enc2, dec1, dec2, z1, z2, z1r, z2r }))
}

/// Gradient of `mean|y − x|` with respect to `y`.
fn l1_grad(y: &[f64], x: &[f64]) -> Vec<f64> {
    let inv = 1.0 / y.len() as f64;
    y.iter()
        .zip(x)
        .map(|(a, b)| {
            let d = a - b;
            if d > 0.0 {
                inv
            } else if d < 0.0 {
                -inv
            } else {
                0.0
            }
        })
        .collect()
}

/// Adds `w · ∂rms(a − b)/∂a` to `da` and its negation to `db`. Zero at a zero residual.
fn rms_grad(a: &[f64], b: &[f64], w: f64, da: &mut [f64], db: &mut [f64]) {
    let n = a.len() as f64;
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    if ss == 0.0 || w == 0.0 {
        return;
    }
    let k = w / (n * (ss / n).sqrt());
    for i in 0..a.len() {
        let g = k * (a[i] - b[i]);
        da[i] += g;
        db[i] -= g;
    }
}

/// Loss of one pair and its gradient with respect to every parameter.
///
/// The rotation layer is a permutation, so its adjoint is the inverse
/// rotation: gradients reaching `R z1` flow back through `R⁻¹`, and those
/// reaching `R⁻¹ z2` through `R`.
pub fn pair_loss_and_grad(p: &ToyParams, s: &TrainSample, scene_weight: f64) -> Result<(LossBreakdown, ToyParams)> {
    let (fwd, k) = run_pair(p, s, scene_weight)?;
    let mut grads = ToyParams::zeros(p.config())?;
    let layout = &k.layout;

    let dy1 = l1_grad(&k.dec1.y, k.x2.data());
    let dy2 = l1_grad(&k.dec2.y, k.x1.data());
    let mut dz1r = layout.decode_backward(p, &k.dec1, &dy1, &mut grads);
    let mut dz2r = layout.decode_backward(p, &k.dec2, &dy2, &mut grads);

    let mut dz1 = vec![0.0; k.z1.len()];
    let mut dz2 = vec![0.0; k.z2.len()];
    // rms(f(x2) − R f(x1)) + rms(f(x1) − R⁻¹ f(x2))
    rms_grad(k.z2.data(), k.z1r.data(), scene_weight, &mut dz2, &mut dz1r);
    rms_grad(k.z1.data(), k.z2r.data(), scene_weight, &mut dz1, &mut dz2r);

    let shape = p.config().scene_shape().to_vec();
    let back1 = unrotate_scene(&Tensor::from_vec(shape.clone(), dz1r)?, s.pose, RotationMethod::Shear)?;
    let back2 = rotate_scene(&Tensor::from_vec(shape, dz2r)?, s.pose, RotationMethod::Shear)?;
    for (d, b) in dz1.iter_mut().zip(back1.data()) {
        *d += b;
    }
    for (d, b) in dz2.iter_mut().zip(back2.data()) {
        *d += b;
    }
    layout.encode_backward(p, &k.enc1, &dz1, &mut grads);
    layout.encode_backward(p, &k.enc2, &dz2, &mut grads);
    Ok((fwd.loss, grads))
}
