//! End-to-end checks on the real MNIST and CIFAR-10 datasets.
//!
//! These tests fit actual models and take on the order of 15 minutes on one
//! core. Fitted models are shared across tests, so the suite runs each
//! expensive fit exactly once regardless of test order. Every test prints a
//! `PASS ...` line with its measured numbers; run with `-- --nocapture` to
//! see them.
//!
//! Datasets are read from `$FFCNN_DATA_DIR` (default `/root/data`), expected
//! to contain `mnist/` with the four IDX files and `cifar10/` with the six
//! binary batches.

use std::path::PathBuf;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ffcnn::analysis::profile_report;
use ffcnn::commands::Variant;
use ffcnn::convnet::extract_patches;
use ffcnn::datasets::{LabeledImageSet, Split};
use ffcnn::model::{fit_model, fit_on_features, EvalReport, FfModel, RunConfig};
use ffcnn::numkit::{lsq_solve, RidgeSpec};
use ffcnn::saab::fit_saab;

const ROOT_SEED: u64 = 7;
/// Conv-statistics image budget for the CIFAR-10 fit; the covariances
/// converge long before this, and it keeps the fit to a few minutes.
const CIFAR_SAMPLE_CAP: usize = 10_000;

fn data_root() -> PathBuf {
    std::env::var_os("FFCNN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("/root/data"))
}

fn load(kind: ffcnn::model::DatasetKind, split: Split) -> LabeledImageSet {
    kind.load(&data_root(), split).unwrap_or_else(|e| {
        panic!(
            "loading {} {} from {} (set FFCNN_DATA_DIR to the dataset root): {e}",
            kind.as_str(),
            split.as_str(),
            data_root().display()
        )
    })
}

fn mnist_train() -> &'static LabeledImageSet {
    static SET: OnceLock<LabeledImageSet> = OnceLock::new();
    SET.get_or_init(|| load(ffcnn::model::DatasetKind::Mnist, Split::Train))
}

fn mnist_test() -> &'static LabeledImageSet {
    static SET: OnceLock<LabeledImageSet> = OnceLock::new();
    SET.get_or_init(|| load(ffcnn::model::DatasetKind::Mnist, Split::Test))
}

fn mnist_model() -> &'static FfModel {
    static MODEL: OnceLock<FfModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        fit_model(&RunConfig::mnist_baseline(ROOT_SEED), mnist_train()).expect("baseline MNIST fit")
    })
}

fn mnist_eval() -> &'static EvalReport {
    static REPORT: OnceLock<EvalReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        mnist_model()
            .evaluate(mnist_test(), Split::Test)
            .expect("MNIST test evaluation")
    })
}

fn cifar_model() -> &'static FfModel {
    static MODEL: OnceLock<FfModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let mut config = RunConfig::cifar10_baseline(ROOT_SEED);
        config.sample_cap = Some(CIFAR_SAMPLE_CAP);
        let train = load(ffcnn::model::DatasetKind::Cifar10, Split::Train);
        fit_model(&config, &train).expect("baseline CIFAR-10 fit")
    })
}

#[test]
fn mnist_accuracy_meets_target() {
    let report = mnist_eval();
    assert!(
        report.accuracy >= 0.965,
        "MNIST test accuracy {:.4} is below the 0.9650 floor",
        report.accuracy
    );
    println!(
        "PASS mnist accuracy: {:.4} on {} test images (floor 0.9650)",
        report.accuracy, report.n_samples
    );
}

#[test]
fn cifar10_accuracy_meets_target() {
    let test = load(ffcnn::model::DatasetKind::Cifar10, Split::Test);
    let report = cifar_model()
        .evaluate(&test, Split::Test)
        .expect("CIFAR-10 test evaluation");
    assert!(
        report.accuracy >= 0.59,
        "CIFAR-10 test accuracy {:.4} is below the 0.5900 floor",
        report.accuracy
    );
    println!(
        "PASS cifar-10 accuracy: {:.4} on {} test images (floor 0.5900, conv stats from {} images)",
        report.accuracy,
        report.n_samples,
        cifar_model().stats.fit_images
    );
}

#[test]
fn fc_parameter_counts_match_design() {
    let model = mnist_model();
    let want = vec![45_120, 10_164, 850];
    assert_eq!(model.stats.fc_param_counts, want);
    assert_eq!(model.classifier.param_counts(), want);
    println!(
        "PASS fc parameter counts: {:?} (stage widths {:?})",
        want, model.config.fc_widths
    );
}

#[test]
fn bias_clears_every_training_preactivation() {
    let model = mnist_model();
    let (spec, saab) = &model.extractor.layers()[0];
    assert!(spec.use_bias, "first conv layer should carry the shared bias");
    let mut total = 0u64;
    let mut negative = 0u64;
    for image in &mnist_train().images {
        let patches = extract_patches(image, spec.window, spec.stride).unwrap();
        let pre = saab.pre_activations_batch(patches.view()).unwrap();
        total += pre.len() as u64;
        negative += pre.iter().filter(|&&v| v < 0.0).count() as u64;
    }
    assert_eq!(
        negative, 0,
        "{negative} of {total} first-layer pre-activations are negative; \
         the trailing ReLU would not be the identity"
    );
    println!("PASS bias margin: 0 of {total} first-layer training pre-activations negative");
}

#[test]
fn kernels_stay_orthonormal_with_descending_energies() {
    let mut layers_checked = 0;
    for (model_name, model) in [("mnist", mnist_model()), ("cifar-10", cifar_model())] {
        for (li, (_, saab)) in model.extractor.layers().iter().enumerate() {
            let kernels = saab.kernels();
            let n = kernels.ncols();
            let dc = 1.0 / (n as f64).sqrt();
            for &v in kernels.row(0) {
                assert!(
                    (v - dc).abs() <= 1e-10,
                    "{model_name} layer {li}: DC kernel entry {v} is not 1/sqrt({n})"
                );
            }
            let gram = kernels.dot(&kernels.t());
            for i in 0..gram.nrows() {
                for j in 0..gram.ncols() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (gram[[i, j]] - want).abs() <= 1e-10,
                        "{model_name} layer {li}: kernel gram[{i},{j}] = {} off by more than 1e-10",
                        gram[[i, j]]
                    );
                }
            }
            let energies = saab.energies();
            for w in 1..energies.len() {
                assert!(
                    energies[w] <= energies[w - 1] + 1e-12,
                    "{model_name} layer {li}: energies rise at index {w}"
                );
            }
            layers_checked += 1;
        }
    }
    println!(
        "PASS kernel algebra: {layers_checked} fitted layers orthonormal within 1e-10, energies descending"
    );
}

/// Frobenius norm of the difference between two orthogonal projectors, one
/// per row set; measures the gap between the spanned subspaces.
fn projector_gap(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let pa = a.t().dot(a);
    let pb = b.t().dot(b);
    (&pa - &pb).iter().map(|d| d * d).sum::<f64>().sqrt()
}

#[test]
fn closed_form_fits_match_brute_force_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce5);

    // Subspace fits: compare against a direct dense eigendecomposition of
    // the mean-removed patch covariance in the full patch space.
    let mut subspace_trials = 0;
    for trial in 0..12usize {
        let n = 4 + trial % 9; // patch dim 4..=12
        let rows = 40 + (trial * 5) % 61; // 40..=100 patches
        let k = 2 + trial % (n - 1); // kernels 2..n
        let mut patches = Array2::zeros((rows, n));
        for v in patches.iter_mut() {
            *v = rng.random::<f64>();
        }
        let layer = fit_saab(patches.view(), k, true, 1e-4).unwrap();

        let max_norm = patches
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max);
        let want_bias = (1.0 + 1e-4) * max_norm;
        assert!(
            (layer.bias() - want_bias).abs() <= 1e-12 * want_bias,
            "trial {trial}: bias {} != {want_bias}",
            layer.bias()
        );

        // Remove each patch's mean component, then take the population
        // covariance of what is left.
        let mut ac = patches.clone();
        for mut row in ac.rows_mut() {
            let m = row.sum() / n as f64;
            row -= m;
        }
        let col_mean = ac.mean_axis(Axis(0)).unwrap();
        let centered = &ac - &col_mean;
        let cov = DMatrix::from_fn(n, n, |i, j| {
            centered.column(i).dot(&centered.column(j)) / rows as f64
        });
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let fitted = layer
            .kernels()
            .slice(ndarray::s![1.., ..])
            .to_owned();
        let mut oracle = Array2::zeros((k - 1, n));
        for (w, &c) in order.iter().take(k - 1).enumerate() {
            for i in 0..n {
                oracle[[w, i]] = eig.eigenvectors[(i, c)];
            }
        }
        let gap = projector_gap(&fitted, &oracle);
        assert!(
            gap <= 1e-8,
            "trial {trial}: fitted subspace is {gap:e} away from the oracle"
        );
        for (w, &c) in order.iter().take(k - 1).enumerate() {
            let lam = eig.eigenvalues[c];
            assert!(
                (layer.energies()[w] - lam).abs() <= 1e-8 * lam.abs().max(1.0),
                "trial {trial}: energy {w} = {} vs eigenvalue {lam}",
                layer.energies()[w]
            );
        }
        subspace_trials += 1;
    }

    // Regressions: compare against a dense LU solve of the normal equations.
    let mut regression_trials = 0;
    for trial in 0..10usize {
        let rows = 120 + (trial * 8) % 81; // 120..=200 rows
        let d = 3 + trial % 10; // features, bias column included
        let t = 1 + trial % 4;
        let lambda = [0.0, 1e-3, 0.5][trial % 3];
        let mut x = Array2::zeros((rows, d));
        for v in x.iter_mut() {
            *v = rng.random::<f64>() * 2.0 - 1.0;
        }
        for r in 0..rows {
            x[[r, d - 1]] = 1.0;
        }
        let mut y = Array2::zeros((rows, t));
        for v in y.iter_mut() {
            *v = rng.random::<f64>() * 2.0 - 1.0;
        }
        let (w, _) = lsq_solve(x.view(), y.view(), RidgeSpec::Value(lambda)).unwrap();

        let xm = DMatrix::from_fn(rows, d, |i, j| x[[i, j]]);
        let ym = DMatrix::from_fn(rows, t, |i, j| y[[i, j]]);
        let mut gram = xm.transpose() * &xm;
        for i in 0..d {
            gram[(i, i)] += lambda;
        }
        let rhs = xm.transpose() * &ym;
        let w_star = gram.lu().solve(&rhs).expect("oracle normal-equation solve");

        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..d {
            for j in 0..t {
                num += (w[[i, j]] - w_star[(i, j)]).powi(2);
                den += w_star[(i, j)].powi(2);
            }
        }
        let rel = (num / den.max(1.0)).sqrt();
        assert!(
            rel <= 1e-8,
            "trial {trial}: regression weights differ from the oracle by {rel:e}"
        );
        regression_trials += 1;
    }

    println!(
        "PASS solver oracles: {subspace_trials} subspace fits and {regression_trials} \
         regressions match brute force within 1e-8"
    );
}

// Known to fail: the fitted MNIST model reproducibly measures a small rise
// (~+0.01) at the fc2 -> output hop, while conv2 -> fc1 -> fc2 decreases as
// asserted. The rise persists across estimator variants (interval-local,
// per-class pooled, dimension-global pooled), interval counts, train/test
// splits, and seeds, so it reflects the pipeline itself rather than noise:
// one-vs-all output dimensions quantize worse under a majority-label
// frequency estimate than fc2's sub-class dimensions. The assertion states
// the intended monotone trend and is kept strict rather than loosened.
#[test]
fn cross_entropy_drops_stage_by_stage() {
    let report = profile_report(mnist_model(), mnist_train(), None).expect("profile");
    let names: Vec<&str> = report
        .profiles
        .iter()
        .map(|p| p.space_name.as_str())
        .collect();
    assert_eq!(names, ["conv2", "fc1", "fc2", "output"]);
    let means = report.means();
    for w in 1..means.len() {
        assert!(
            means[w] < means[w - 1],
            "mean cross-entropy must drop at every stage, got {means:?}"
        );
    }
    println!(
        "PASS cross-entropy trend: conv2 {:.4} > fc1 {:.4} > fc2 {:.4} > output {:.4}",
        means[0], means[1], means[2], means[3]
    );
}

#[test]
fn conv_stat_subsampling_barely_moves_accuracy() {
    let full = mnist_eval().accuracy;
    let mut config = RunConfig::mnist_baseline(ROOT_SEED);
    config.sample_cap = Some(1000);
    let capped_model = fit_model(&config, mnist_train()).expect("capped MNIST fit");
    assert_eq!(capped_model.stats.fit_images, 1000);
    let capped = capped_model
        .evaluate(mnist_test(), Split::Test)
        .expect("capped evaluation")
        .accuracy;
    let delta = (full - capped).abs();
    assert!(
        delta <= 0.003,
        "capping conv statistics at 1000 images moved accuracy by {delta:.4} (> 0.0030)"
    );
    println!(
        "PASS conv-stat subsampling: full {full:.4} vs 1000-image cap {capped:.4} \
         (|delta| = {delta:.4}, limit 0.0030)"
    );
}

#[test]
fn identical_runs_reproduce_byte_identical_models() {
    let first = mnist_model();
    let second =
        fit_model(&RunConfig::mnist_baseline(ROOT_SEED), mnist_train()).expect("refit MNIST");

    let bytes_a = first.to_bytes().unwrap();
    let bytes_b = second.to_bytes().unwrap();
    assert!(
        bytes_a == bytes_b,
        "refit with the same config and seed produced a different container"
    );

    let dir = tempfile::tempdir().unwrap();
    let path_a = dir.path().join("a.ffm");
    let path_b = dir.path().join("b.ffm");
    first.save(&path_a).unwrap();
    second.save(&path_b).unwrap();
    assert_eq!(
        std::fs::read(&path_a).unwrap(),
        std::fs::read(&path_b).unwrap(),
        "saved model files differ"
    );

    let report_a = mnist_eval();
    let report_b = second.evaluate(mnist_test(), Split::Test).unwrap();
    assert_eq!(report_a.accuracy.to_bits(), report_b.accuracy.to_bits());
    assert_eq!(report_a.confusion, report_b.confusion);
    println!(
        "PASS determinism: refit reproduced the {}-byte container and the accuracy report exactly",
        bytes_a.len()
    );
}

#[test]
fn classifier_variants_stay_close() {
    let base = RunConfig::mnist_baseline(ROOT_SEED);
    assert_eq!(
        Variant::Ff1.apply(&base).unwrap(),
        base,
        "the baseline config should already be the ff1 variant"
    );
    let ff1 = mnist_model();

    // ff2 runs the whole pipeline independently: its conv arrays must still
    // come out bit-identical because the classifier config cannot reach them.
    let ff2 = fit_model(&Variant::Ff2.apply(&base).unwrap(), mnist_train()).expect("ff2 fit");

    // ff3 shares ff1's extractor the way the variants command does.
    let features = ff1
        .extractor
        .extract_features_batch(&mnist_train().images)
        .unwrap();
    let ff3 = fit_on_features(
        &Variant::Ff3.apply(&base).unwrap(),
        ff1.extractor.clone(),
        features.view(),
        &mnist_train().labels,
        mnist_train().len(),
    )
    .expect("ff3 fit");
    drop(features);

    let models: [(&str, &FfModel); 3] = [("ff1", ff1), ("ff2", &ff2), ("ff3", &ff3)];
    for (name, model) in &models[1..] {
        for ((_, a), (_, b)) in ff1.extractor.layers().iter().zip(model.extractor.layers()) {
            let kernels_match = a
                .kernels()
                .iter()
                .zip(b.kernels().iter())
                .all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(kernels_match, "{name}: conv kernels differ from ff1");
            assert_eq!(a.bias().to_bits(), b.bias().to_bits(), "{name}: bias differs");
            let energies_match = a
                .energies()
                .iter()
                .zip(b.energies().iter())
                .all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(energies_match, "{name}: energies differ from ff1");
        }
    }

    for i in 0..models.len() {
        for j in (i + 1)..models.len() {
            let (name_a, model_a) = models[i];
            let (name_b, model_b) = models[j];
            let differ = model_a
                .classifier
                .stages()
                .iter()
                .zip(model_b.classifier.stages())
                .any(|(sa, sb)| sa.weights() != sb.weights());
            assert!(differ, "{name_a} and {name_b} produced identical FC weights");
        }
    }

    let mut accuracies = Vec::new();
    for (name, model) in &models {
        let accuracy = if *name == "ff1" {
            mnist_eval().accuracy
        } else {
            model.evaluate(mnist_test(), Split::Test).unwrap().accuracy
        };
        accuracies.push((*name, accuracy));
    }
    let lo = accuracies.iter().map(|(_, a)| *a).fold(f64::INFINITY, f64::min);
    let hi = accuracies.iter().map(|(_, a)| *a).fold(0.0, f64::max);
    assert!(
        hi - lo <= 0.015,
        "variant accuracies spread {:.4} exceeds 0.015: {accuracies:?}",
        hi - lo
    );
    println!(
        "PASS classifier variants: ff1 {:.4}, ff2 {:.4}, ff3 {:.4} (spread {:.4}, limit 0.0150)",
        accuracies[0].1,
        accuracies[1].1,
        accuracies[2].1,
        hi - lo
    );
}
