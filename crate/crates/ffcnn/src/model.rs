//! Run configuration, end-to-end model fitting, evaluation, and the `.ffm`
//! container format.
//!
//! A fitted model is the pair (convolutional feature extractor, cascaded
//! least-squares classifier) plus the configuration that produced it and a
//! few human-readable fit statistics. Everything needed to reproduce or
//! verify a run travels inside the container.
//!
//! # Container layout (version 1)
//!
//! | offset | size | content                                  |
//! |--------|------|------------------------------------------|
//! | 0      | 4    | magic `FFM1`                             |
//! | 4      | 4    | format version, u32 little-endian        |
//! | 8      | 8    | header length H, u64 little-endian       |
//! | 16     | H    | JSON header (UTF-8)                      |
//! | 16+H   | rest | named arrays, f64 little-endian, packed  |
//!
//! The header's `arrays` list gives each array's name, dtype (`f64le`) and
//! shape; payload arrays appear in exactly that order, row-major, with no
//! padding between them. Conv layer `i` (1-based) stores `conv{i}.kernels`
//! (kernel count x window length), `conv{i}.bias` (length 1, zero when the
//! layer is biasless) and `conv{i}.energies` (kernel count - 1). FC stage `j`
//! stores `fc{j}.weights` ((inputs + 1) x outputs, bias row last).

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::convnet::{fit_extractor, ConvLayerSpec, FeatureExtractor};
use crate::datasets::{LabeledImageSet, Split};
use crate::error::{Error, Result};
use crate::fclsr::{fit_classifier, FcClassifier, LsrStage, PseudoLabelScheme};
use crate::numkit::{KMeansInit, RidgeSpec};
use crate::saab::{SaabLayer, DEFAULT_DELTA_REL};
use crate::tensor::Tensor3;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: [u8; 4] = *b"FFM1";
const DTYPE: &str = "f64le";
/// Images per feature-extraction chunk during prediction, bounding peak
/// memory on large splits.
const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Mnist,
    Cifar10,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar10",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            DatasetKind::Mnist => 1,
            DatasetKind::Cifar10 => 3,
        }
    }

    /// Loads the split from the matching subdirectory of `root`.
    pub fn load(self, root: &Path, split: Split) -> Result<LabeledImageSet> {
        match self {
            DatasetKind::Mnist => crate::datasets::load_mnist(&root.join("mnist"), split),
            DatasetKind::Cifar10 => crate::datasets::load_cifar10(&root.join("cifar10"), split),
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" => Ok(DatasetKind::Cifar10),
            other => Err(Error::config(format!(
                "unknown dataset '{other}' (expected 'mnist' or 'cifar10')"
            ))),
        }
    }
}

/// Convolutional architecture of a run. The two named presets share the
/// classic two-layer geometry (5x5 windows, stride 1, 2x2 max pooling) and
/// differ only in kernel counts; both drop the final DC channel when
/// flattening. The first layer carries the non-negativity bias, the last
/// layer does not need one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// 6 then 16 kernels; designed for 32x32 single-channel input.
    Lenet5,
    /// 32 then 64 kernels; designed for 32x32 three-channel input.
    ModifiedLenet5,
    Custom {
        layers: Vec<ConvLayerSpec>,
        drop_dc: bool,
    },
}

impl Architecture {
    pub fn conv_specs(&self) -> Vec<ConvLayerSpec> {
        let preset = |kernels: [usize; 2]| {
            kernels
                .iter()
                .enumerate()
                .map(|(i, &k)| ConvLayerSpec {
                    window: (5, 5),
                    stride: 1,
                    num_kernels: k,
                    use_bias: i == 0,
                    pool: Some((2, 2)),
                })
                .collect()
        };
        match self {
            Architecture::Lenet5 => preset([6, 16]),
            Architecture::ModifiedLenet5 => preset([32, 64]),
            Architecture::Custom { layers, .. } => layers.clone(),
        }
    }

    pub fn drop_dc(&self) -> bool {
        match self {
            Architecture::Custom { drop_dc, .. } => *drop_dc,
            _ => true,
        }
    }

    /// Input channel count the preset is defined for; `None` = any.
    pub fn expected_channels(&self) -> Option<usize> {
        match self {
            Architecture::Lenet5 => Some(1),
            Architecture::ModifiedLenet5 => Some(3),
            Architecture::Custom { .. } => None,
        }
    }
}

/// Everything that determines a fitted model. Two runs with equal configs
/// produce byte-identical containers — output locations deliberately live
/// outside the config so they cannot perturb the hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub arch: Architecture,
    /// Output width of every FC stage; the last entry is the class count.
    pub fc_widths: Vec<usize>,
    /// Per-class cluster counts for the first hidden stage; `None` splits the
    /// stage width evenly across classes.
    pub stage_one_clusters: Option<Vec<usize>>,
    pub init: KMeansInit,
    pub seed: u64,
    /// Image budget for the conv-layer statistics (covariances, bias norms).
    /// The classifier always trains on the full feature set.
    pub sample_cap: Option<usize>,
    pub ridge: RidgeSpec,
    /// Relative safety margin of the Saab bias over the largest training
    /// patch norm.
    pub delta_rel: f64,
    /// Interval count for cross-entropy profiling; `None` uses the per-space
    /// defaults. Has no effect on fitting.
    pub profile_intervals: Option<usize>,
}

impl RunConfig {
    /// Baseline digit-recognition run: 6/16 conv kernels, FC widths
    /// 120-84-10 (12 clusters per class at the first stage).
    pub fn mnist_baseline(seed: u64) -> Self {
        RunConfig {
            dataset: DatasetKind::Mnist,
            arch: Architecture::Lenet5,
            fc_widths: vec![120, 84, 10],
            stage_one_clusters: None,
            init: KMeansInit::KMeansPP,
            seed,
            sample_cap: None,
            ridge: RidgeSpec::Auto,
            delta_rel: DEFAULT_DELTA_REL,
            profile_intervals: None,
        }
    }

    /// Baseline color run: 32/64 conv kernels, FC widths 200-100-10.
    pub fn cifar10_baseline(seed: u64) -> Self {
        RunConfig {
            dataset: DatasetKind::Cifar10,
            arch: Architecture::ModifiedLenet5,
            fc_widths: vec![200, 100, 10],
            ..RunConfig::mnist_baseline(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fc_widths.is_empty() {
            return Err(Error::config("at least one FC stage is required"));
        }
        if self.fc_widths.iter().any(|&w| w == 0) {
            return Err(Error::config("FC widths must be positive"));
        }
        let last = *self.fc_widths.last().expect("nonempty");
        if last != 10 {
            return Err(Error::config(format!(
                "final FC width must be 10 (one output per class), got {last}"
            )));
        }
        if let Some(clusters) = &self.stage_one_clusters {
            if self.fc_widths.len() < 2 {
                return Err(Error::config(
                    "stage-one clusters were given but there is no hidden FC stage",
                ));
            }
            if clusters.len() != 10 {
                return Err(Error::config(format!(
                    "stage-one cluster list has {} entries, expected one per class (10)",
                    clusters.len()
                )));
            }
            if clusters.iter().any(|&c| c == 0) {
                return Err(Error::config("stage-one cluster counts must be positive"));
            }
            let total: usize = clusters.iter().sum();
            if total != self.fc_widths[0] {
                return Err(Error::config(format!(
                    "stage-one clusters sum to {total} but the first FC width is {}",
                    self.fc_widths[0]
                )));
            }
        }
        if !(self.delta_rel > 0.0 && self.delta_rel.is_finite()) {
            return Err(Error::config(format!(
                "delta_rel must be a positive finite number, got {}",
                self.delta_rel
            )));
        }
        if self.sample_cap == Some(0) {
            return Err(Error::config("sample_cap must be positive when set"));
        }
        if let RidgeSpec::Value(v) = self.ridge {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "ridge must be a non-negative finite number, got {v}"
                )));
            }
        }
        if let Some(expected) = self.arch.expected_channels() {
            if self.dataset.channels() != expected {
                return Err(Error::config(format!(
                    "architecture expects {expected}-channel input but dataset '{}' has {} channels",
                    self.dataset.as_str(),
                    self.dataset.channels()
                )));
            }
        }
        if self.profile_intervals == Some(0) {
            return Err(Error::config("profile_intervals must be positive when set"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON encoding of the config.
    pub fn hash_hex(&self) -> Result<String> {
        let json = serde_json::to_string(self)
            .map_err(|e| Error::data(format!("encoding run config: {e}")))?;
        Ok(sha256_hex(json.as_bytes()))
    }
}

/// Human-readable fit summary, also used as an integrity cross-check: on
/// load every field must match what the stored arrays imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    /// Images that fed the conv-layer statistics (after `sample_cap`).
    pub fit_images: usize,
    /// Per-layer AC kernel energies, descending.
    pub conv_energies: Vec<Vec<f64>>,
    /// Per-layer shared bias (zero for biasless layers).
    pub conv_bias: Vec<f64>,
    /// Weight-entry count of every FC stage, bias row included.
    pub fc_param_counts: Vec<usize>,
}

impl FitStats {
    fn new(extractor: &FeatureExtractor, classifier: &FcClassifier, fit_images: usize) -> Self {
        FitStats {
            fit_images,
            conv_energies: extractor
                .layers()
                .iter()
                .map(|(_, saab)| saab.energies().to_vec())
                .collect(),
            conv_bias: extractor
                .layers()
                .iter()
                .map(|(_, saab)| saab.bias())
                .collect(),
            fc_param_counts: classifier.param_counts(),
        }
    }
}

/// Per-split evaluation result.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub split: String,
    pub n_samples: usize,
    pub accuracy: f64,
    /// `confusion[t][p]` counts samples of true class `t` predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
}

/// A fitted model together with the config and fit statistics that
/// produced it.
#[derive(Debug, Clone)]
pub struct FfModel {
    pub config: RunConfig,
    pub extractor: FeatureExtractor,
    pub classifier: FcClassifier,
    pub stats: FitStats,
}

/// Fits the conv layers on (capped) image statistics, then the FC cascade on
/// the full training features.
pub fn fit_model(config: &RunConfig, train: &LabeledImageSet) -> Result<FfModel> {
    config.validate()?;
    check_channels(config, train)?;
    let extractor = fit_extractor(
        &train.images,
        &config.arch.conv_specs(),
        config.arch.drop_dc(),
        config.sample_cap,
        config.seed,
        config.delta_rel,
    )?;
    fit_with_extractor(config, extractor, train)
}

/// Fits only the classifier on top of an already-fitted extractor. Used to
/// build model variants that share one set of convolutional kernels.
pub fn fit_with_extractor(
    config: &RunConfig,
    extractor: FeatureExtractor,
    train: &LabeledImageSet,
) -> Result<FfModel> {
    config.validate()?;
    check_channels(config, train)?;
    log::info!(
        "extracting {} features per image over {} training images",
        extractor.feature_len(),
        train.len()
    );
    let features = extractor.extract_features_batch(&train.images)?;
    let fit_images = config.sample_cap.map_or(train.len(), |c| c.min(train.len()));
    fit_on_features(config, extractor, features.view(), &train.labels, fit_images)
}

/// Innermost assembly step: classifier fit on precomputed features. Lets
/// variant builds extract the (large) feature matrix once and reuse it.
pub fn fit_on_features(
    config: &RunConfig,
    extractor: FeatureExtractor,
    features: ndarray::ArrayView2<f64>,
    labels: &[usize],
    fit_images: usize,
) -> Result<FfModel> {
    config.validate()?;
    let stored: Vec<ConvLayerSpec> = extractor.layers().iter().map(|(s, _)| s.clone()).collect();
    if stored != config.arch.conv_specs() || extractor.drop_dc_at_output() != config.arch.drop_dc()
    {
        return Err(Error::config(
            "extractor architecture does not match the run config",
        ));
    }
    if features.ncols() != extractor.feature_len() {
        return Err(Error::numeric(format!(
            "feature matrix has {} columns but the extractor produces {}",
            features.ncols(),
            extractor.feature_len()
        )));
    }
    let classifier = fit_classifier(
        features,
        labels,
        &config.fc_widths,
        config.stage_one_clusters.as_deref(),
        config.init,
        config.ridge,
        config.seed,
    )?;

    let stats = FitStats::new(&extractor, &classifier, fit_images);
    Ok(FfModel {
        config: config.clone(),
        extractor,
        classifier,
        stats,
    })
}

fn check_channels(config: &RunConfig, set: &LabeledImageSet) -> Result<()> {
    if set.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    if let Some(expected) = config.arch.expected_channels() {
        if set.shape.2 != expected {
            return Err(Error::config(format!(
                "architecture expects {expected}-channel input but '{}' images have {} channels",
                set.name, set.shape.2
            )));
        }
    }
    Ok(())
}

impl FfModel {
    /// Classifier features for a batch of images.
    pub fn features(&self, images: &[Tensor3]) -> Result<Array2<f64>> {
        self.extractor.extract_features_batch(images)
    }

    pub fn predict_batch(&self, images: &[Tensor3]) -> Result<Vec<usize>> {
        let mut preds = Vec::with_capacity(images.len());
        for chunk in images.chunks(EVAL_CHUNK) {
            let features = self.extractor.extract_features_batch(chunk)?;
            preds.extend(self.classifier.predict_batch(features.view())?);
        }
        Ok(preds)
    }

    pub fn evaluate(&self, set: &LabeledImageSet, split: Split) -> Result<EvalReport> {
        if set.is_empty() {
            return Err(Error::data("evaluation set is empty"));
        }
        let k = self.classifier.class_count();
        let preds = self.predict_batch(&set.images)?;
        let mut confusion = vec![vec![0usize; k]; k];
        let mut correct = 0usize;
        for (&truth, &pred) in set.labels.iter().zip(&preds) {
            if truth >= k {
                return Err(Error::data(format!(
                    "label {truth} out of range for a {k}-class model"
                )));
            }
            confusion[truth][pred] += 1;
            if truth == pred {
                correct += 1;
            }
        }
        Ok(EvalReport {
            dataset: set.name.clone(),
            split: split.as_str().to_string(),
            n_samples: set.len(),
            accuracy: correct as f64 / set.len() as f64,
            confusion,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, &bytes).map_err(Error::io(format!("writing {}", path.display())))?;
        log::info!("wrote {} ({} bytes)", path.display(), bytes.len());
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(Error::io(format!("reading {}", path.display())))?;
        Self::from_bytes(&bytes)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let catalog = self.array_catalog();
        let header = Header {
            config: self.config.clone(),
            config_hash: self.config.hash_hex()?,
            stats: self.stats.clone(),
            extractor: ExtractorMeta {
                input_shape: self.extractor.input_shape(),
                drop_dc_at_output: self.extractor.drop_dc_at_output(),
                layers: self
                    .extractor
                    .layers()
                    .iter()
                    .map(|(spec, _)| spec.clone())
                    .collect(),
            },
            classifier: ClassifierMeta {
                class_count: self.classifier.class_count(),
                stages: self
                    .classifier
                    .stages()
                    .iter()
                    .map(|s| StageMeta {
                        rectify: s.rectify(),
                        scheme: s.scheme().cloned(),
                    })
                    .collect(),
            },
            arrays: catalog
                .iter()
                .map(|(name, shape, _)| ArrayMeta {
                    name: name.clone(),
                    dtype: DTYPE.to_string(),
                    shape: shape.clone(),
                })
                .collect(),
        };
        let header_bytes = serde_json::to_vec(&header)
            .map_err(|e| Error::data(format!("encoding model header: {e}")))?;

        let payload: usize = catalog.iter().map(|(_, _, data)| 8 * data.len()).sum();
        let mut out = Vec::with_capacity(16 + header_bytes.len() + payload);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for (_, _, data) in &catalog {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::data(format!(
                "container too short: {} bytes, the fixed preamble alone is 16",
                bytes.len()
            )));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::data(format!(
                "bad magic {:02x?} at offset 0, expected {:02x?} (\"FFM1\")",
                &bytes[..4],
                MAGIC
            )));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "container format version {version}, this build reads version {FORMAT_VERSION}"
            )));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.len() - 16;
        if header_len > body {
            return Err(Error::data(format!(
                "header claims {header_len} bytes but only {body} follow the preamble"
            )));
        }
        let header: Header = serde_json::from_slice(&bytes[16..16 + header_len])
            .map_err(|e| Error::data(format!("decoding model header: {e}")))?;

        let recomputed = header.config.hash_hex()?;
        if recomputed != header.config_hash {
            return Err(Error::data(format!(
                "config hash mismatch: stored {}, recomputed {recomputed}",
                header.config_hash
            )));
        }
        header.config.validate()?;

        // Slice the packed payload into the declared arrays.
        let mut offset = 16 + header_len;
        let mut arrays = std::collections::HashMap::new();
        for meta in &header.arrays {
            if meta.dtype != DTYPE {
                return Err(Error::data(format!(
                    "array {}: dtype {} unsupported (expected {DTYPE})",
                    meta.name, meta.dtype
                )));
            }
            let elems: usize = meta.shape.iter().product();
            let end = offset + 8 * elems;
            if end > bytes.len() {
                return Err(Error::data(format!(
                    "array {}: needs bytes {offset}..{end} but the container ends at {}",
                    meta.name,
                    bytes.len()
                )));
            }
            let data: Vec<f64> = bytes[offset..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            if arrays.insert(meta.name.clone(), (meta.shape.clone(), data)).is_some() {
                return Err(Error::data(format!("duplicate array {}", meta.name)));
            }
            offset = end;
        }
        if offset != bytes.len() {
            return Err(Error::data(format!(
                "{} trailing bytes after the last declared array",
                bytes.len() - offset
            )));
        }

        let take_matrix = |name: &str| -> Result<Array2<f64>> {
            let (shape, data) = arrays
                .get(name)
                .ok_or_else(|| Error::data(format!("container is missing array {name}")))?;
            if shape.len() != 2 {
                return Err(Error::data(format!(
                    "array {name}: expected a matrix, got shape {shape:?}"
                )));
            }
            Array2::from_shape_vec((shape[0], shape[1]), data.clone())
                .map_err(|e| Error::data(format!("array {name}: {e}")))
        };
        let take_vector = |name: &str| -> Result<Array1<f64>> {
            let (shape, data) = arrays
                .get(name)
                .ok_or_else(|| Error::data(format!("container is missing array {name}")))?;
            if shape.len() != 1 {
                return Err(Error::data(format!(
                    "array {name}: expected a vector, got shape {shape:?}"
                )));
            }
            Ok(Array1::from_vec(data.clone()))
        };

        let mut layers = Vec::with_capacity(header.extractor.layers.len());
        for (i, spec) in header.extractor.layers.iter().enumerate() {
            let base = format!("conv{}", i + 1);
            let kernels = take_matrix(&format!("{base}.kernels"))?;
            let bias = take_vector(&format!("{base}.bias"))?;
            if bias.len() != 1 {
                return Err(Error::data(format!(
                    "array {base}.bias: expected a single value, got {}",
                    bias.len()
                )));
            }
            let energies = take_vector(&format!("{base}.energies"))?;
            let saab = SaabLayer::from_parts(kernels, bias[0], energies, spec.use_bias)?;
            layers.push((spec.clone(), saab));
        }
        let extractor = FeatureExtractor::from_parts(
            layers,
            header.extractor.input_shape,
            header.extractor.drop_dc_at_output,
        )?;

        let mut stages = Vec::with_capacity(header.classifier.stages.len());
        for (j, meta) in header.classifier.stages.iter().enumerate() {
            let weights = take_matrix(&format!("fc{}.weights", j + 1))?;
            stages.push(LsrStage::from_parts(
                weights,
                meta.rectify,
                meta.scheme.clone(),
            )?);
        }
        let classifier = FcClassifier::from_parts(stages, header.classifier.class_count)?;

        // The embedded config, header metadata, and arrays must all tell the
        // same story.
        if header.extractor.layers != header.config.arch.conv_specs()
            || header.extractor.drop_dc_at_output != header.config.arch.drop_dc()
        {
            return Err(Error::data(
                "stored extractor layers disagree with the embedded config",
            ));
        }
        let widths: Vec<usize> = classifier.stages().iter().map(LsrStage::n_out).collect();
        if widths != header.config.fc_widths {
            return Err(Error::data(format!(
                "stored FC widths {widths:?} disagree with the embedded config {:?}",
                header.config.fc_widths
            )));
        }
        if classifier.feature_len() != extractor.feature_len() {
            return Err(Error::data(format!(
                "classifier expects {} features but the extractor produces {}",
                classifier.feature_len(),
                extractor.feature_len()
            )));
        }
        let expect_stats = FitStats::new(&extractor, &classifier, header.stats.fit_images);
        if header.stats != expect_stats {
            return Err(Error::data(
                "stored fit statistics (parameter counts, energies or biases) do not match \
                 the stored arrays",
            ));
        }

        Ok(FfModel {
            config: header.config,
            extractor,
            classifier,
            stats: header.stats,
        })
    }

    fn array_catalog(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut catalog = Vec::new();
        for (i, (_, saab)) in self.extractor.layers().iter().enumerate() {
            let base = format!("conv{}", i + 1);
            let kernels = saab.kernels();
            catalog.push((
                format!("{base}.kernels"),
                vec![kernels.nrows(), kernels.ncols()],
                kernels.iter().copied().collect(),
            ));
            catalog.push((format!("{base}.bias"), vec![1], vec![saab.bias()]));
            catalog.push((
                format!("{base}.energies"),
                vec![saab.energies().len()],
                saab.energies().to_vec(),
            ));
        }
        for (j, stage) in self.classifier.stages().iter().enumerate() {
            let w = stage.weights();
            catalog.push((
                format!("fc{}.weights", j + 1),
                vec![w.nrows(), w.ncols()],
                w.iter().copied().collect(),
            ));
        }
        catalog
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: RunConfig,
    config_hash: String,
    stats: FitStats,
    extractor: ExtractorMeta,
    classifier: ClassifierMeta,
    arrays: Vec<ArrayMeta>,
}

#[derive(Serialize, Deserialize)]
struct ExtractorMeta {
    input_shape: (usize, usize, usize),
    drop_dc_at_output: bool,
    layers: Vec<ConvLayerSpec>,
}

#[derive(Serialize, Deserialize)]
struct ClassifierMeta {
    class_count: usize,
    stages: Vec<StageMeta>,
}

#[derive(Serialize, Deserialize)]
struct StageMeta {
    rectify: bool,
    scheme: Option<PseudoLabelScheme>,
}

#[derive(Serialize, Deserialize)]
struct ArrayMeta {
    name: String,
    dtype: String,
    shape: Vec<usize>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
