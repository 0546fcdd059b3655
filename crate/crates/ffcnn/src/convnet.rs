//! Convolutional feature extractor: sliding-window patch extraction, Saab
//! layers cascaded with max pooling, and flattening into classifier features.
//!
//! Layers are fitted front to back. Each layer's statistics are gathered from
//! the forward pass of the layers before it, one image at a time, so the full
//! patch set never has to sit in memory.

use ndarray::{Array1, Array2};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saab::{fit_saab_from_stats, SaabFitStats, SaabLayer};
use crate::tensor::Tensor3;

/// Geometry and kernel budget of one convolutional layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    /// (height, width) of the sliding window in pixels.
    pub window: (usize, usize),
    pub stride: usize,
    /// Kernel count including the DC kernel.
    pub num_kernels: usize,
    pub use_bias: bool,
    /// Max-pooling (size, stride) after the layer, or `None`. Only
    /// non-overlapping pooling (stride = size) is supported; spatial
    /// remainders are dropped.
    pub pool: Option<(usize, usize)>,
}

impl ConvLayerSpec {
    fn validate(&self, index: usize, input: (usize, usize, usize)) -> Result<()> {
        let (h, w, c) = input;
        let (wh, ww) = self.window;
        if wh == 0 || ww == 0 || self.stride == 0 {
            return Err(Error::config(format!(
                "conv layer {index}: window and stride must be positive"
            )));
        }
        if wh > h || ww > w {
            return Err(Error::config(format!(
                "conv layer {index}: window {wh}x{ww} exceeds input {h}x{w}"
            )));
        }
        let patch_dim = wh * ww * c;
        if self.num_kernels == 0 || self.num_kernels > patch_dim {
            return Err(Error::config(format!(
                "conv layer {index}: kernel count {} outside 1..={patch_dim}",
                self.num_kernels
            )));
        }
        if let Some((size, stride)) = self.pool {
            if size == 0 {
                return Err(Error::config(format!(
                    "conv layer {index}: pool size must be positive"
                )));
            }
            if size != stride {
                return Err(Error::config(format!(
                    "conv layer {index}: only non-overlapping pooling is supported \
                     (size {size} != stride {stride})"
                )));
            }
            let (oh, ow) = conv_output_dims((h, w), self.window, self.stride);
            if size > oh || size > ow {
                return Err(Error::config(format!(
                    "conv layer {index}: pool size {size} exceeds conv output {oh}x{ow}"
                )));
            }
        }
        Ok(())
    }

    /// Shape after convolution and pooling for the given input shape.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize) {
        let (oh, ow) = conv_output_dims((input.0, input.1), self.window, self.stride);
        match self.pool {
            Some((size, _)) => (oh / size, ow / size, self.num_kernels),
            None => (oh, ow, self.num_kernels),
        }
    }
}

fn conv_output_dims(
    input: (usize, usize),
    window: (usize, usize),
    stride: usize,
) -> (usize, usize) {
    (
        (input.0 - window.0) / stride + 1,
        (input.1 - window.1) / stride + 1,
    )
}

/// Valid-convolution sliding windows as rows of a patch matrix: positions in
/// row-major (row, col) order, each patch flattened channel-fastest to match
/// [`Tensor3`] layout.
pub fn extract_patches(
    image: &Tensor3,
    window: (usize, usize),
    stride: usize,
) -> Result<Array2<f64>> {
    let (h, w, c) = image.shape();
    let (wh, ww) = window;
    if wh == 0 || ww == 0 || stride == 0 {
        return Err(Error::numeric("window and stride must be positive"));
    }
    if wh > h || ww > w {
        return Err(Error::numeric(format!(
            "window {wh}x{ww} larger than image {h}x{w}"
        )));
    }
    let (oh, ow) = conv_output_dims((h, w), window, stride);
    let dim = wh * ww * c;
    let mut out = Array2::zeros((oh * ow, dim));
    let span = ww * c;
    for pr in 0..oh {
        for pc in 0..ow {
            let mut row = out.row_mut(pr * ow + pc);
            let dst = row.as_slice_mut().expect("row is contiguous");
            for wr in 0..wh {
                let src = image.row_span(pr * stride + wr, pc * stride, ww);
                for (d, s) in dst[wr * span..(wr + 1) * span].iter_mut().zip(src) {
                    *d = f64::from(*s);
                }
            }
        }
    }
    Ok(out)
}

/// Per-channel max over non-overlapping size×size blocks; trailing rows and
/// columns that do not fill a block are dropped.
pub fn max_pool(t: &Tensor3, size: usize, stride: usize) -> Result<Tensor3> {
    let (h, w, c) = t.shape();
    if size == 0 {
        return Err(Error::numeric("pool size must be positive"));
    }
    if size != stride {
        return Err(Error::numeric(
            "only non-overlapping pooling (stride = size) is supported",
        ));
    }
    if size > h || size > w {
        return Err(Error::numeric(format!(
            "pool size {size} exceeds spatial dims {h}x{w}"
        )));
    }
    let (oh, ow) = (h / size, w / size);
    let mut out = Tensor3::zeros(oh, ow, c);
    for r in 0..oh {
        for col in 0..ow {
            for ch in 0..c {
                let mut best = f32::NEG_INFINITY;
                for br in 0..size {
                    for bc in 0..size {
                        best = best.max(t.get(r * size + br, col * size + bc, ch));
                    }
                }
                out.set(r, col, ch, best);
            }
        }
    }
    Ok(out)
}

/// Trained stack of Saab conv layers plus its flattening convention.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    layers: Vec<(ConvLayerSpec, SaabLayer)>,
    input_shape: (usize, usize, usize),
    /// Drop channel 0 (the DC response) of the last layer when flattening.
    drop_dc_at_output: bool,
}

impl FeatureExtractor {
    pub fn layers(&self) -> &[(ConvLayerSpec, SaabLayer)] {
        &self.layers
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn drop_dc_at_output(&self) -> bool {
        self.drop_dc_at_output
    }

    /// Shape of the last layer's (pooled) output tensor.
    pub fn output_shape(&self) -> (usize, usize, usize) {
        let mut shape = self.input_shape;
        for (spec, _) in &self.layers {
            shape = spec.output_shape(shape);
        }
        shape
    }

    /// Flattened feature length fed to the classifier.
    pub fn feature_len(&self) -> usize {
        let (h, w, k) = self.output_shape();
        if self.drop_dc_at_output {
            h * w * (k - 1)
        } else {
            h * w * k
        }
    }

    pub fn from_parts(
        layers: Vec<(ConvLayerSpec, SaabLayer)>,
        input_shape: (usize, usize, usize),
        drop_dc_at_output: bool,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("feature extractor needs at least one layer"));
        }
        let mut shape = input_shape;
        for (i, (spec, saab)) in layers.iter().enumerate() {
            spec.validate(i, shape)?;
            let expect = spec.window.0 * spec.window.1 * shape.2;
            if saab.input_dim() != expect {
                return Err(Error::config(format!(
                    "conv layer {i}: kernel dim {} does not match window {expect}",
                    saab.input_dim()
                )));
            }
            if saab.num_kernels() != spec.num_kernels {
                return Err(Error::config(format!(
                    "conv layer {i}: {} kernels stored, spec says {}",
                    saab.num_kernels(),
                    spec.num_kernels
                )));
            }
            shape = spec.output_shape(shape);
        }
        let ex = FeatureExtractor {
            layers,
            input_shape,
            drop_dc_at_output,
        };
        if ex.drop_dc_at_output && ex.output_shape().2 == 1 {
            return Err(Error::config(
                "cannot drop the DC channel from a single-kernel output layer",
            ));
        }
        Ok(ex)
    }

    fn check_input(&self, image: &Tensor3) -> Result<()> {
        if image.shape() != self.input_shape {
            return Err(Error::numeric(format!(
                "image shape {:?} does not match extractor input {:?}",
                image.shape(),
                self.input_shape
            )));
        }
        Ok(())
    }

    /// Forward pass through the first `upto` layers (conv + ReLU + pool each).
    pub fn forward_partial(&self, image: &Tensor3, upto: usize) -> Result<Tensor3> {
        self.check_input(image)?;
        let mut t = image.clone();
        for (spec, saab) in &self.layers[..upto] {
            let patches = extract_patches(&t, spec.window, spec.stride)?;
            let responses = saab.apply_batch(patches.view())?;
            let (h, w, _) = t.shape();
            let (oh, ow) = conv_output_dims((h, w), spec.window, spec.stride);
            let data: Vec<f32> = responses.iter().map(|&v| v as f32).collect();
            t = Tensor3::from_vec(oh, ow, spec.num_kernels, data)?;
            if let Some((size, stride)) = spec.pool {
                t = max_pool(&t, size, stride)?;
            }
        }
        Ok(t)
    }

    pub fn forward(&self, image: &Tensor3) -> Result<Tensor3> {
        self.forward_partial(image, self.layers.len())
    }

    /// Flattened classifier features: row-major over positions,
    /// channel-fastest, DC channel dropped when configured.
    pub fn extract_features(&self, image: &Tensor3) -> Result<Array1<f64>> {
        let t = self.forward(image)?;
        let (h, w, k) = t.shape();
        let skip = usize::from(self.drop_dc_at_output);
        let mut out = Array1::zeros(h * w * (k - skip));
        let mut i = 0;
        for r in 0..h {
            for c in 0..w {
                for ch in skip..k {
                    out[i] = f64::from(t.get(r, c, ch));
                    i += 1;
                }
            }
        }
        Ok(out)
    }

    /// Feature matrix for a whole set, one image per row.
    pub fn extract_features_batch(&self, images: &[Tensor3]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((images.len(), self.feature_len()));
        for (i, image) in images.iter().enumerate() {
            let f = self.extract_features(image)?;
            out.row_mut(i).assign(&f);
        }
        Ok(out)
    }
}

/// Fits the Saab layer cascade on a training set.
///
/// `sample_cap` bounds how many images feed the layer statistics: when set
/// below the set size, that many images are drawn uniformly without
/// replacement (seeded) and used for every layer's covariance and bias
/// scan. Layer ℓ sees the forward output of the already-fitted layers 1..ℓ−1.
pub fn fit_extractor(
    images: &[Tensor3],
    specs: &[ConvLayerSpec],
    drop_dc_at_output: bool,
    sample_cap: Option<usize>,
    seed: u64,
    delta_rel: f64,
) -> Result<FeatureExtractor> {
    if specs.is_empty() {
        return Err(Error::config("at least one conv layer spec is required"));
    }
    if images.is_empty() {
        return Err(Error::data("cannot fit an extractor on zero images"));
    }
    let input_shape = images[0].shape();

    let fit_indices: Vec<usize> = match sample_cap {
        Some(cap) if cap == 0 => {
            return Err(Error::config("sample_cap must be positive when set"));
        }
        Some(cap) if cap < images.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive_seed(
                seed,
                &["extractor", "subsample"],
            ));
            let mut picked = rand::seq::index::sample(&mut rng, images.len(), cap).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..images.len()).collect(),
    };

    let mut fitted: Vec<(ConvLayerSpec, SaabLayer)> = Vec::with_capacity(specs.len());
    let mut shape = input_shape;
    for (li, spec) in specs.iter().enumerate() {
        spec.validate(li, shape)?;
        let patch_dim = spec.window.0 * spec.window.1 * shape.2;
        let mut stats = SaabFitStats::new(patch_dim)?;
        let partial = FeatureExtractor {
            layers: fitted.clone(),
            input_shape,
            drop_dc_at_output: false,
        };
        for &idx in &fit_indices {
            if images[idx].shape() != input_shape {
                return Err(Error::data(format!(
                    "image {idx} has shape {:?}, expected {input_shape:?}",
                    images[idx].shape()
                )));
            }
            let t = partial.forward_partial(&images[idx], li)?;
            let patches = extract_patches(&t, spec.window, spec.stride)?;
            stats.add_patches(patches.view())?;
        }
        let layer = fit_saab_from_stats(&stats, spec.num_kernels, spec.use_bias, delta_rel)?;
        fitted.push((spec.clone(), layer));
        shape = spec.output_shape(shape);
    }
    FeatureExtractor::from_parts(fitted, input_shape, drop_dc_at_output)
}
