//! Trainable wavelet pooling unit.
//!
//! Per channel: one-level 2D decomposition with the lifted filter pair, ReLU
//! on each of the four subbands, then an affine combination of the four
//! rectified maps (a 1x1 convolution over the subband axis, shared across
//! positions). The lifting coefficients are shared across channels.
//!
//! Feature maps smaller than the high-pass support are allowed; the filters
//! wrap around periodically (see [`Dwt2Plan::wrapped`]).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dwt2d::{Dwt2Plan, Image, Subbands};
use crate::error::{Error, Result};
use crate::lifting::{build_filters, filter_jacobian, FilterPair, LiftingParams};

/// Subband order used by the combiner weights.
pub const BANDS: [&str; 4] = ["ll", "lh", "hl", "hh"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletUnitParams {
    pub lifting: LiftingParams,
    /// `[w_ll, w_lh, w_hl, w_hh]` per channel.
    pub weights: Vec<[f64; 4]>,
    pub bias: Vec<f64>,
}

impl WaveletUnitParams {
    /// Starts as a low-pass pooling operator: `w_ll = 1`, everything else 0.
    pub fn new(lifting: LiftingParams, channels: usize) -> Self {
        Self {
            lifting,
            weights: vec![[1.0, 0.0, 0.0, 0.0]; channels],
            bias: vec![0.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "{} weight rows but {} biases",
                self.weights.len(),
                self.bias.len()
            )));
        }
        let finite = self
            .weights
            .iter()
            .flatten()
            .chain(&self.bias)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("unit parameters must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitGradients {
    pub d_weights: Vec<[f64; 4]>,
    pub d_bias: Vec<f64>,
    pub d_lifting: Vec<f64>,
    pub d_input: Vec<DMatrix<f64>>,
}

/// Intermediates kept by [`unit_forward`] for the backward pass. ReLU masks
/// are the strictly positive entries of the cached subbands.
#[derive(Debug, Clone)]
pub struct UnitCache {
    filters: FilterPair,
    plan: Dwt2Plan,
    inputs: Vec<DMatrix<f64>>,
    subbands: Vec<Subbands>,
}

impl UnitCache {
    pub fn subbands(&self) -> &[Subbands] {
        &self.subbands
    }

    pub fn filters(&self) -> &FilterPair {
        &self.filters
    }

    /// ReLU masks (1.0 where the subband is strictly positive) for one channel.
    pub fn relu_masks(&self, channel: usize) -> [DMatrix<f64>; 4] {
        self.subbands[channel]
            .bands()
            .map(|b| b.map(|v| if v > 0.0 { 1.0 } else { 0.0 }))
    }
}

fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}

fn check_channels(x: &[Image], p: &WaveletUnitParams) -> Result<(usize, usize)> {
    p.validate()?;
    if x.len() != p.channels() {
        return Err(Error::Shape(format!(
            "{} input channels but {} weight rows",
            x.len(),
            p.channels()
        )));
    }
    let first = x
        .first()
        .ok_or_else(|| Error::Shape("no input channels".into()))?;
    let shape = (first.rows(), first.cols());
    if x.iter().any(|c| (c.rows(), c.cols()) != shape) {
        return Err(Error::Shape("channels differ in size".into()));
    }
    Ok(shape)
}

/// Forward pass; returns the half-resolution map per channel and the cache.
pub fn unit_forward(x: &[Image], p: &WaveletUnitParams) -> Result<(Vec<DMatrix<f64>>, UnitCache)> {
    let (rows, cols) = check_channels(x, p)?;
    let filters = build_filters(&p.lifting);
    let plan = Dwt2Plan::wrapped(&filters, rows, cols)?;
    let mut out = Vec::with_capacity(x.len());
    let mut subbands = Vec::with_capacity(x.len());
    for (c, img) in x.iter().enumerate() {
        let s = plan.forward(img)?;
        let w = p.weights[c];
        let mut y = DMatrix::from_element(rows / 2, cols / 2, p.bias[c]);
        for (band, wb) in s.bands().iter().zip(w) {
            y += relu(band) * wb;
        }
        out.push(y);
        subbands.push(s);
    }
    let cache = UnitCache {
        filters,
        plan,
        inputs: x.iter().map(|i| i.matrix().clone()).collect(),
        subbands,
    };
    Ok((out, cache))
}

/// Backward pass given `dy = dLoss/dy` for each output channel.
pub fn unit_backward(
    dy: &[DMatrix<f64>],
    cache: &UnitCache,
    p: &WaveletUnitParams,
) -> Result<UnitGradients> {
    if dy.len() != cache.subbands.len() || p.channels() != dy.len() {
        return Err(Error::Shape(format!(
            "{} output gradients for {} cached channels",
            dy.len(),
            cache.subbands.len()
        )));
    }
    if p.lifting != *cache.filters.params() {
        return Err(Error::Shape(
            "parameters differ from the cached forward pass".into(),
        ));
    }
    let rows_ops = cache.plan.row_ops();
    let cols_ops = cache.plan.col_ops();
    let (lr, hr) = (rows_ops.low(), rows_ops.high());
    let (lc, hc) = (cols_ops.low(), cols_ops.high());

    let mut d_weights = Vec::with_capacity(dy.len());
    let mut d_bias = Vec::with_capacity(dy.len());
    let mut d_input = Vec::with_capacity(dy.len());
    let mut d_h1 = vec![0.0; cache.filters.h1().len()];

    for (c, g) in dy.iter().enumerate() {
        let s = &cache.subbands[c];
        if g.shape() != s.band_shape() {
            return Err(Error::Shape(format!(
                "gradient is {:?}, output is {:?}",
                g.shape(),
                s.band_shape()
            )));
        }
        let bands = s.bands();
        let mut dw = [0.0; 4];
        for (d, b) in dw.iter_mut().zip(bands) {
            *d = g.zip_fold(b, 0.0, |acc, gv, bv| acc + gv * bv.max(0.0));
        }
        d_weights.push(dw);
        d_bias.push(g.sum());

        // Gradient at each pre-activation subband.
        let w = p.weights[c];
        let [g_ll, g_lh, g_hl, g_hh] = [0, 1, 2, 3]
            .map(|i| g.zip_map(bands[i], |gv, bv| if bv > 0.0 { gv * w[i] } else { 0.0 }));

        let low_rows = &g_ll * lc + &g_hl * hc;
        let high_rows = &g_lh * lc + &g_hh * hc;
        d_input.push(lr.tr_mul(&low_rows) + hr.tr_mul(&high_rows));

        let x = &cache.inputs[c];
        let grad_hr = &high_rows * x.transpose();
        let grad_hc = (g_hl.tr_mul(lr) + g_hh.tr_mul(hr)) * x;
        for (acc, (a, b)) in d_h1.iter_mut().zip(
            rows_ops
                .high_tap_gradient(&grad_hr)
                .into_iter()
                .zip(cols_ops.high_tap_gradient(&grad_hc)),
        ) {
            *acc += a + b;
        }
    }

    let jac = filter_jacobian(&p.lifting);
    let d_lifting = jac
        .tr_mul(&nalgebra::DVector::from_vec(d_h1))
        .as_slice()
        .to_vec();
    Ok(UnitGradients {
        d_weights,
        d_bias,
        d_lifting,
        d_input,
    })
}

/// Replacement for a max-pool layer.
pub fn replace_pool(x: &[Image], p: &WaveletUnitParams) -> Result<Vec<DMatrix<f64>>> {
    unit_forward(x, p).map(|(y, _)| y)
}

/// Replacement for a strided downsampling (shortcut) path.
pub fn replace_downsample(x: &[Image], p: &WaveletUnitParams) -> Result<Vec<DMatrix<f64>>> {
    unit_forward(x, p).map(|(y, _)| y)
}

/// Square convolution kernel bank, `weights[out][in][ky][kx]` flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: usize,
    pub weights: Vec<f64>,
}

impl ConvKernel {
    /// Passes every channel through unchanged.
    pub fn identity(channels: usize, size: usize) -> Self {
        let mut weights = vec![0.0; channels * channels * size * size];
        let centre = size / 2;
        for c in 0..channels {
            weights[((c * channels + c) * size + centre) * size + centre] = 1.0;
        }
        Self {
            out_channels: channels,
            in_channels: channels,
            size,
            weights,
        }
    }

    fn at(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * self.size + ky) * self.size + kx]
    }
}

/// Stride-1 "same" convolution (cross-correlation) with periodic padding.
pub fn conv2d_periodic(x: &[Image], k: &ConvKernel) -> Result<Vec<Image>> {
    if k.size.is_multiple_of(2)
        || k.weights.len() != k.out_channels * k.in_channels * k.size * k.size
    {
        return Err(Error::Shape(format!(
            "kernel must be odd-sized with {} weights, got size {} and {} weights",
            k.out_channels * k.in_channels * k.size * k.size,
            k.size,
            k.weights.len()
        )));
    }
    if x.len() != k.in_channels {
        return Err(Error::Shape(format!(
            "kernel expects {} input channels, got {}",
            k.in_channels,
            x.len()
        )));
    }
    let first = x
        .first()
        .ok_or_else(|| Error::Shape("no input channels".into()))?;
    let (rows, cols) = (first.rows(), first.cols());
    let r = (k.size / 2) as isize;
    (0..k.out_channels)
        .map(|o| {
            Image::from_fn(rows, cols, |y, xx| {
                let mut acc = 0.0;
                for (i, img) in x.iter().enumerate() {
                    let m = img.matrix();
                    for dy in -r..=r {
                        let sy = (y as isize + dy).rem_euclid(rows as isize) as usize;
                        for dx in -r..=r {
                            let sx = (xx as isize + dx).rem_euclid(cols as isize) as usize;
                            acc += k.at(o, i, (dy + r) as usize, (dx + r) as usize) * m[(sy, sx)];
                        }
                    }
                }
                acc
            })
        })
        .collect()
}

/// Replacement for a stride-2 convolution: stride-1 conv, then the unit.
pub fn replace_stride_conv(
    x: &[Image],
    conv: &ConvKernel,
    p: &WaveletUnitParams,
) -> Result<Vec<DMatrix<f64>>> {
    let features = conv2d_periodic(x, conv)?;
    unit_forward(&features, p).map(|(y, _)| y)
}
