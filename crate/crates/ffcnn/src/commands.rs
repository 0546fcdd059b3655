//! The work behind each CLI subcommand, separated from argument parsing so
//! it can be driven programmatically.

use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{profile_report, ProfileReport};
use crate::convnet::fit_extractor;
use crate::datasets::Split;
use crate::error::{Error, Result};
use crate::model::{fit_model, fit_on_features, EvalReport, FfModel, RunConfig};
use crate::numkit::KMeansInit;

/// Fits a model on the training split and writes the container to `output`.
pub fn cmd_fit(config: &RunConfig, data_root: &Path, output: &Path) -> Result<FfModel> {
    let train = config.dataset.load(data_root, Split::Train)?;
    let model = fit_model(config, &train)?;
    model.save(output)?;
    println!(
        "fitted {} ({} features, fc params {:?}) -> {}",
        config.dataset.as_str(),
        model.extractor.feature_len(),
        model.classifier.param_counts(),
        output.display()
    );
    Ok(model)
}

/// Evaluates a stored model on a split of its own dataset; prints the JSON
/// report and optionally writes it to `output`.
pub fn cmd_eval(
    model_path: &Path,
    data_root: &Path,
    split: Split,
    output: Option<&Path>,
) -> Result<EvalReport> {
    let model = FfModel::load(model_path)?;
    let set = model.config.dataset.load(data_root, split)?;
    let report = model.evaluate(&set, split)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::data(format!("encoding evaluation report: {e}")))?;
    println!("{json}");
    if let Some(path) = output {
        fs::write(path, &json).map_err(Error::io(format!("writing {}", path.display())))?;
    }
    Ok(report)
}

/// Profiles every space of a stored model on a split and writes one
/// `<space>.csv` per space plus `summary.json` into `out_dir`.
///
/// Interval-count precedence: the `intervals` argument, then the value stored
/// in the model's config, then the per-space defaults.
pub fn cmd_profile(
    model_path: &Path,
    data_root: &Path,
    split: Split,
    intervals: Option<usize>,
    out_dir: &Path,
) -> Result<ProfileReport> {
    let model = FfModel::load(model_path)?;
    let set = model.config.dataset.load(data_root, split)?;
    let q = intervals.or(model.config.profile_intervals);
    let report = profile_report(&model, &set, q)?;

    fs::create_dir_all(out_dir)
        .map_err(Error::io(format!("creating {}", out_dir.display())))?;
    for profile in &report.profiles {
        let path = out_dir.join(format!("{}.csv", profile.space_name));
        let file =
            fs::File::create(&path).map_err(Error::io(format!("creating {}", path.display())))?;
        profile.write_csv(file)?;
    }
    let summaries = report.summaries();
    let json = serde_json::to_string_pretty(&summaries)
        .map_err(|e| Error::data(format!("encoding profile summary: {e}")))?;
    let summary_path = out_dir.join("summary.json");
    fs::write(&summary_path, &json)
        .map_err(Error::io(format!("writing {}", summary_path.display())))?;

    println!("{:<8} {:>6} {:>10} {:>10} {:>10}", "space", "dims", "mean", "min", "max");
    for s in &summaries {
        let dims = report
            .profiles
            .iter()
            .find(|p| p.space_name == s.space)
            .map_or(0, |p| p.values.len());
        println!(
            "{:<8} {:>6} {:>10.5} {:>10.5} {:>10.5}",
            s.space, dims, s.mean, s.min, s.max
        );
    }
    println!("profiles written to {}", out_dir.display());
    Ok(report)
}

/// The three classifier variants built on one shared feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// k-means++ pseudo-label initialization.
    Ff1,
    /// random pseudo-label initialization.
    Ff2,
    /// uneven clusters: five classes get 13, five get 11.
    Ff3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ff1, Variant::Ff2, Variant::Ff3];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ff1 => "ff1",
            Variant::Ff2 => "ff2",
            Variant::Ff3 => "ff3",
        }
    }

    /// Derives this variant's config from a base run config.
    pub fn apply(self, base: &RunConfig) -> Result<RunConfig> {
        let mut config = base.clone();
        match self {
            Variant::Ff1 => {
                config.init = KMeansInit::KMeansPP;
                config.stage_one_clusters = None;
            }
            Variant::Ff2 => {
                config.init = KMeansInit::Random;
                config.stage_one_clusters = None;
            }
            Variant::Ff3 => {
                config.init = KMeansInit::KMeansPP;
                config.stage_one_clusters =
                    Some(vec![13, 13, 13, 13, 13, 11, 11, 11, 11, 11]);
            }
        }
        config
            .validate()
            .map_err(|e| Error::config(format!("variant {}: {e}", self.name())))?;
        Ok(config)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ff1" => Ok(Variant::Ff1),
            "ff2" => Ok(Variant::Ff2),
            "ff3" => Ok(Variant::Ff3),
            other => Err(Error::config(format!(
                "unknown variant '{other}' (expected ff1, ff2 or ff3)"
            ))),
        }
    }
}

/// Fits the requested variants on one shared extractor and writes
/// `<variant>.ffm` files into `out_dir`. The conv arrays of every produced
/// container are bit-identical; only the FC stages differ.
pub fn cmd_variants(
    base: &RunConfig,
    variants: &[Variant],
    data_root: &Path,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if variants.is_empty() {
        return Err(Error::config("no variants requested"));
    }
    base.validate()?;
    let configs: Vec<(Variant, RunConfig)> = variants
        .iter()
        .map(|&v| v.apply(base).map(|c| (v, c)))
        .collect::<Result<_>>()?;

    let train = base.dataset.load(data_root, Split::Train)?;
    let extractor = fit_extractor(
        &train.images,
        &base.arch.conv_specs(),
        base.arch.drop_dc(),
        base.sample_cap,
        base.seed,
        base.delta_rel,
    )?;
    let features = extractor.extract_features_batch(&train.images)?;
    let fit_images = base.sample_cap.map_or(train.len(), |c| c.min(train.len()));

    fs::create_dir_all(out_dir)
        .map_err(Error::io(format!("creating {}", out_dir.display())))?;
    let mut paths = Vec::with_capacity(configs.len());
    for (variant, config) in configs {
        let model = fit_on_features(
            &config,
            extractor.clone(),
            features.view(),
            &train.labels,
            fit_images,
        )?;
        let path = out_dir.join(format!("{}.ffm", variant.name()));
        model.save(&path)?;
        println!(
            "{}: fc params {:?} -> {}",
            variant.name(),
            model.classifier.param_counts(),
            path.display()
        );
        paths.push(path);
    }
    Ok(paths)
}
