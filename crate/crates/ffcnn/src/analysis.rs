//! Per-dimension cross-entropy profiles of intermediate feature spaces.
//!
//! Each dimension of an activation matrix is quantized into intervals with
//! 1-D k-means. Every interval predicts its majority class, and each sample
//! whose label matches that majority is charged `-ln(majority fraction)`;
//! misclassified samples contribute nothing. The per-dimension sum is divided
//! by the sample count so spaces of different dimensionality and splits of
//! different size stay comparable. Low values mark discriminative dimensions.

use std::io::Write;

use ndarray::ArrayView2;
use serde::Serialize;

use crate::datasets::LabeledImageSet;
use crate::error::{Error, Result};
use crate::model::FfModel;
use crate::numkit::{kmeans_1d, DEFAULT_MAX_ITER};

/// Default interval count for convolutional and hidden fully-connected spaces.
pub const DEFAULT_INTERVALS_HIDDEN: usize = 32;
/// Default interval count for the low-dimensional output space.
pub const DEFAULT_INTERVALS_OUTPUT: usize = 16;

/// Cross-entropy losses for every dimension of one activation space.
#[derive(Debug, Clone, Serialize)]
pub struct CrossEntropyProfile {
    pub space_name: String,
    /// Per-dimension loss, in dimension order. Always non-negative; zero
    /// means every interval of that dimension is class-pure.
    pub values: Vec<f64>,
    /// Requested interval count. Dimensions with fewer distinct values fall
    /// back to one interval per distinct value.
    pub intervals: usize,
    pub sample_count: usize,
    pub class_count: usize,
}

/// Compact per-space statistics for the JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct SpaceSummary {
    pub space: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    #[serde(rename = "Q")]
    pub intervals: usize,
    pub n_samples: usize,
}

impl CrossEntropyProfile {
    /// Dimensions sorted from most discriminative (lowest loss) upward; ties
    /// keep dimension order.
    pub fn rank_ordered(&self) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self.values.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        ranked
    }

    pub fn summary(&self) -> SpaceSummary {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &v in &self.values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        SpaceSummary {
            space: self.space_name.clone(),
            mean: sum / self.values.len() as f64,
            min,
            max,
            intervals: self.intervals,
            n_samples: self.sample_count,
        }
    }

    /// Writes `dim_index,cross_entropy` rows in dimension order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let ctx = || format!("writing profile CSV for {}", self.space_name);
        writeln!(out, "dim_index,cross_entropy").map_err(Error::io(ctx()))?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v}").map_err(Error::io(ctx()))?;
        }
        Ok(())
    }
}

/// Cross-entropy of a single dimension under majority-vote interval
/// classification.
///
/// The values are partitioned into `intervals` clusters by 1-D k-means; the
/// interval count must not exceed the number of distinct values. Within each
/// interval the majority label (ties going to the smallest class index) is
/// the prediction, and every correctly predicted sample contributes
/// `-ln(majority count / interval size)`. Returns the sum divided by the
/// number of samples.
pub fn dimension_cross_entropy(
    values: &[f64],
    labels: &[usize],
    n_classes: usize,
    intervals: usize,
) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::config(format!(
            "profiled dimension has {} values but {} labels",
            values.len(),
            labels.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::config("cannot profile an empty sample set"));
    }
    if intervals == 0 {
        return Err(Error::config("interval count must be at least 1"));
    }
    if n_classes == 0 {
        return Err(Error::config("class count must be at least 1"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::data(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "non-finite activation at sample {pos}"
        )));
    }

    let clustering = kmeans_1d(values, intervals, DEFAULT_MAX_ITER, tolerance_for(values))?;

    let mut counts = vec![0usize; intervals * n_classes];
    let mut sizes = vec![0usize; intervals];
    for (&k, &label) in clustering.assignments.iter().zip(labels) {
        counts[k * n_classes + label] += 1;
        sizes[k] += 1;
    }

    // Accumulating per interval (not per sample) keeps the result exactly
    // invariant under sample reordering.
    let mut total = 0.0;
    for k in 0..intervals {
        if sizes[k] == 0 {
            continue;
        }
        let majority = counts[k * n_classes..(k + 1) * n_classes]
            .iter()
            .copied()
            .max()
            .unwrap_or(0);
        let p = majority as f64 / sizes[k] as f64;
        total += majority as f64 * -p.ln();
    }
    Ok(total / values.len() as f64)
}

/// Profiles every column of an activation matrix.
///
/// Columns with fewer than `intervals` distinct values are quantized with one
/// interval per distinct value instead (logged as a warning); in particular a
/// constant column collapses to a single interval whose loss is
/// `-p ln p` for majority frequency `p`.
pub fn profile_space(
    activations: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    intervals: usize,
    space_name: &str,
) -> Result<CrossEntropyProfile> {
    let (n, d) = activations.dim();
    if n == 0 || d == 0 {
        return Err(Error::config(format!(
            "cannot profile {space_name}: empty activation matrix ({n} x {d})"
        )));
    }
    if n != labels.len() {
        return Err(Error::config(format!(
            "{space_name} has {n} activation rows but {} labels",
            labels.len()
        )));
    }
    if intervals == 0 {
        return Err(Error::config("interval count must be at least 1"));
    }

    let mut values = Vec::with_capacity(d);
    for dim in 0..d {
        let column: Vec<f64> = activations.column(dim).iter().copied().collect();
        let available = distinct_count(&column);
        let q_eff = intervals.min(available);
        if q_eff < intervals {
            log::warn!(
                "{space_name} dim {dim}: only {available} distinct values, \
                 using {q_eff} intervals instead of {intervals}"
            );
        }
        values.push(dimension_cross_entropy(&column, labels, n_classes, q_eff)?);
    }

    Ok(CrossEntropyProfile {
        space_name: space_name.to_string(),
        values,
        intervals,
        sample_count: n,
        class_count: n_classes,
    })
}

/// Profiles of every space a fitted model exposes, in pipeline order.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub profiles: Vec<CrossEntropyProfile>,
}

impl ProfileReport {
    pub fn summaries(&self) -> Vec<SpaceSummary> {
        self.profiles.iter().map(CrossEntropyProfile::summary).collect()
    }

    /// Mean loss per space, in pipeline order.
    pub fn means(&self) -> Vec<f64> {
        self.profiles.iter().map(|p| p.summary().mean).collect()
    }
}

/// Profiles the flattened convolutional feature space, every hidden FC space,
/// and the output space of a fitted model on the given image set.
///
/// Space names follow the pipeline: `conv{n}` for an `n`-conv-layer
/// extractor, then `fc1`, `fc2`, ... for hidden stages, then `output`.
/// `intervals` overrides the per-space defaults (32 for conv/hidden spaces,
/// 16 for the output space) when given.
pub fn profile_report(
    model: &FfModel,
    set: &LabeledImageSet,
    intervals: Option<usize>,
) -> Result<ProfileReport> {
    let q_hidden = intervals.unwrap_or(DEFAULT_INTERVALS_HIDDEN);
    let q_output = intervals.unwrap_or(DEFAULT_INTERVALS_OUTPUT);
    let n_classes = model.classifier.class_count();

    let features = model.features(&set.images)?;
    let conv_name = format!("conv{}", model.extractor.layers().len());
    let mut profiles = vec![profile_space(
        features.view(),
        &set.labels,
        n_classes,
        q_hidden,
        &conv_name,
    )?];

    let stage_outputs = model.classifier.stage_outputs(features.view())?;
    let n_stages = stage_outputs.len();
    for (i, activations) in stage_outputs.iter().enumerate() {
        let (name, q) = if i + 1 == n_stages {
            ("output".to_string(), q_output)
        } else {
            (format!("fc{}", i + 1), q_hidden)
        };
        profiles.push(profile_space(
            activations.view(),
            &set.labels,
            n_classes,
            q,
            &name,
        )?);
    }

    Ok(ProfileReport { profiles })
}

fn tolerance_for(values: &[f64]) -> f64 {
    let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    1e-6 * max_abs.max(f64::MIN_POSITIVE)
}

/// Distinct values under float equality (so `-0.0` and `0.0` coincide),
/// matching the notion used by the 1-D k-means initializer.
fn distinct_count(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut count = 0usize;
    let mut last = 0.0f64;
    for &v in &sorted {
        if count == 0 || v != last {
            count += 1;
            last = v;
        }
    }
    count
}
