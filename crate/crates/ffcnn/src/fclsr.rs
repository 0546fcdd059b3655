//! Fully-connected decision stages built from cascaded least-squares
//! regressors.
//!
//! Each hidden stage regresses its input onto one-hot pseudo-label targets
//! derived from per-class k-means clustering, then rectifies; the final stage
//! regresses onto the true class one-hots with no rectification. No gradients
//! anywhere: every stage is a single closed-form solve.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{default_tol, kmeans, lsq_solve, KMeansInit, RidgeSpec, DEFAULT_MAX_ITER};
use crate::seed::derive_seed;

/// How one hidden stage's pseudo-labels are built: per-class cluster counts
/// plus the k-means initialization mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoLabelScheme {
    pub clusters_per_class: Vec<usize>,
    pub init: KMeansInit,
}

impl PseudoLabelScheme {
    /// Splits `width` across `num_classes` as evenly as possible, larger
    /// shares going to the lowest class indices (84 over 10 → four 9s, six 8s).
    pub fn even_split(num_classes: usize, width: usize, init: KMeansInit) -> Result<Self> {
        if num_classes == 0 || width < num_classes {
            return Err(Error::config(format!(
                "cannot split width {width} into {num_classes} per-class cluster groups"
            )));
        }
        let base = width / num_classes;
        let extra = width % num_classes;
        let clusters_per_class = (0..num_classes)
            .map(|c| base + usize::from(c < extra))
            .collect();
        Ok(PseudoLabelScheme {
            clusters_per_class,
            init,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.clusters_per_class.len()
    }

    /// Total pseudo-label count M = stage output width.
    pub fn total(&self) -> usize {
        self.clusters_per_class.iter().sum()
    }

    /// Start of each class's pseudo-label block (cumulative cluster counts).
    pub fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.clusters_per_class.len());
        let mut acc = 0;
        for &c in &self.clusters_per_class {
            offsets.push(acc);
            acc += c;
        }
        offsets
    }

    fn validate(&self) -> Result<()> {
        if self.clusters_per_class.is_empty() {
            return Err(Error::config("pseudo-label scheme has no classes"));
        }
        if self.clusters_per_class.iter().any(|&c| c == 0) {
            return Err(Error::config(
                "every class needs at least one pseudo-label cluster",
            ));
        }
        Ok(())
    }
}

/// Pseudo-label per sample: class c, cluster j ↦ offset(c) + j, a bijection
/// between (class, cluster) pairs and 0..M−1. Clustering runs independently
/// per class on that class's feature rows.
pub fn make_pseudo_labels(
    features: ArrayView2<f64>,
    labels: &[usize],
    scheme: &PseudoLabelScheme,
    seed: u64,
) -> Result<Vec<usize>> {
    scheme.validate()?;
    if features.nrows() != labels.len() {
        return Err(Error::numeric(format!(
            "{} feature rows but {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    let n_classes = scheme.num_classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::data(format!(
            "label {bad} outside 0..{n_classes}"
        )));
    }
    let offsets = scheme.offsets();
    let mut pseudo = vec![0usize; labels.len()];
    for class in 0..n_classes {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let q = scheme.clusters_per_class[class];
        if rows.len() < q {
            return Err(Error::data(format!(
                "class {class} has {} samples, fewer than its {q} clusters",
                rows.len()
            )));
        }
        let mut class_features = Array2::zeros((rows.len(), features.ncols()));
        for (r, &i) in rows.iter().enumerate() {
            class_features.row_mut(r).assign(&features.row(i));
        }
        let result = kmeans(
            class_features.view(),
            q,
            scheme.init,
            derive_seed(seed, &["pseudo-labels", &class.to_string()]),
            DEFAULT_MAX_ITER,
            default_tol(class_features.view()),
        )?;
        for (r, &i) in rows.iter().enumerate() {
            pseudo[i] = offsets[class] + result.assignments[r];
        }
    }
    Ok(pseudo)
}

/// One-hot target matrix: row i carries a single 1 at column `labels[i]`.
pub fn one_hot(labels: &[usize], width: usize) -> Result<Array2<f64>> {
    let mut t = Array2::zeros((labels.len(), width));
    for (i, &l) in labels.iter().enumerate() {
        if l >= width {
            return Err(Error::numeric(format!(
                "label {l} does not fit one-hot width {width}"
            )));
        }
        t[[i, l]] = 1.0;
    }
    Ok(t)
}

/// One linear stage: weights of shape (n_in + 1) × n_out with the bias in the
/// last row, optionally followed by a ReLU.
#[derive(Debug, Clone)]
pub struct LsrStage {
    weights: Array2<f64>,
    rectify: bool,
    /// Scheme that generated this stage's targets; `None` for the final
    /// class-target stage.
    scheme: Option<PseudoLabelScheme>,
}

impl LsrStage {
    pub fn from_parts(
        weights: Array2<f64>,
        rectify: bool,
        scheme: Option<PseudoLabelScheme>,
    ) -> Result<Self> {
        if weights.nrows() < 2 {
            return Err(Error::numeric("stage weights need at least one feature row"));
        }
        if !weights.iter().all(|v| v.is_finite()) {
            return Err(Error::numeric("stage weights contain non-finite values"));
        }
        if let Some(s) = &scheme {
            if s.total() != weights.ncols() {
                return Err(Error::config(format!(
                    "scheme width {} does not match stage output {}",
                    s.total(),
                    weights.ncols()
                )));
            }
        }
        Ok(LsrStage {
            weights,
            rectify,
            scheme,
        })
    }

    pub fn n_in(&self) -> usize {
        self.weights.nrows() - 1
    }

    pub fn n_out(&self) -> usize {
        self.weights.ncols()
    }

    pub fn rectify(&self) -> bool {
        self.rectify
    }

    pub fn scheme(&self) -> Option<&PseudoLabelScheme> {
        self.scheme.as_ref()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    /// Weight entries including bias row.
    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_in() {
            return Err(Error::numeric(format!(
                "stage expects {} inputs, got {}",
                self.n_in(),
                x.ncols()
            )));
        }
        let linear = self.weights.slice(ndarray::s![..self.n_in(), ..]);
        let bias = self.weights.row(self.n_in());
        let mut y = x.dot(&linear);
        y += &bias;
        if self.rectify {
            y.mapv_inplace(|v| v.max(0.0));
        }
        Ok(y)
    }
}

/// Fits one stage by least squares on bias-augmented features.
pub fn fit_stage(
    features: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    rectify: bool,
    ridge: RidgeSpec,
    scheme: Option<PseudoLabelScheme>,
) -> Result<LsrStage> {
    if features.nrows() != targets.nrows() {
        return Err(Error::numeric(format!(
            "{} feature rows but {} target rows",
            features.nrows(),
            targets.nrows()
        )));
    }
    for (i, row) in targets.rows().into_iter().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::numeric(format!("target row {i} is not one-hot")));
        }
    }
    let n = features.nrows();
    let mut augmented = Array2::ones((n, features.ncols() + 1));
    augmented
        .slice_mut(ndarray::s![.., ..features.ncols()])
        .assign(&features);
    let (weights, diag) = lsq_solve(augmented.view(), targets, ridge)?;
    if diag.min_norm_fallback {
        warn!(
            "stage solve was rank-deficient; minimum-norm solution taken \
             (ridge {})",
            diag.ridge
        );
    }
    LsrStage::from_parts(weights, rectify, scheme)
}

/// The full FC subnet.
#[derive(Debug, Clone)]
pub struct FcClassifier {
    stages: Vec<LsrStage>,
    class_count: usize,
}

impl FcClassifier {
    pub fn from_parts(stages: Vec<LsrStage>, class_count: usize) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::config("classifier needs at least one stage"));
        }
        for w in stages.windows(2) {
            if w[0].n_out() != w[1].n_in() {
                return Err(Error::config(format!(
                    "stage widths do not chain: {} out vs {} in",
                    w[0].n_out(),
                    w[1].n_in()
                )));
            }
        }
        let last = stages.last().expect("nonempty");
        if last.n_out() != class_count {
            return Err(Error::config(format!(
                "final stage width {} != class count {class_count}",
                last.n_out()
            )));
        }
        if last.rectify() {
            return Err(Error::config("final stage must not rectify"));
        }
        Ok(FcClassifier {
            stages,
            class_count,
        })
    }

    pub fn stages(&self) -> &[LsrStage] {
        &self.stages
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_len(&self) -> usize {
        self.stages[0].n_in()
    }

    pub fn param_counts(&self) -> Vec<usize> {
        self.stages.iter().map(LsrStage::param_count).collect()
    }

    /// Final-stage scores for a batch of feature rows.
    pub fn scores_batch(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut x = features.to_owned();
        for stage in &self.stages {
            x = stage.forward_batch(x.view())?;
        }
        Ok(x)
    }

    /// Activations entering each space after the feature extractor: the
    /// output of every hidden stage plus the final scores, in order.
    pub fn stage_outputs(&self, features: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        let mut outputs = Vec::with_capacity(self.stages.len());
        let mut x = features.to_owned();
        for stage in &self.stages {
            x = stage.forward_batch(x.view())?;
            outputs.push(x.clone());
        }
        Ok(outputs)
    }

    pub fn predict(&self, feature: ArrayView1<f64>) -> Result<(usize, Array1<f64>)> {
        let feature_matrix = feature.insert_axis(ndarray::Axis(0));
        let scores = self.scores_batch(feature_matrix)?;
        let row = scores.row(0);
        Ok((argmax(row), row.to_owned()))
    }

    pub fn predict_batch(&self, features: ArrayView2<f64>) -> Result<Vec<usize>> {
        let scores = self.scores_batch(features)?;
        Ok(scores.rows().into_iter().map(argmax).collect())
    }
}

/// Index of the largest score; ties go to the smallest index.
fn argmax(scores: ArrayView1<f64>) -> usize {
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in scores.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Fits the whole cascade: hidden stages against pseudo-label one-hots (with
/// rectification), the final stage against class one-hots (linear).
///
/// `stage_one_clusters` fixes the per-class cluster counts of the first
/// hidden stage; later hidden widths use an even per-class split. All k-means
/// seeds derive from `seed` per (stage, class).
pub fn fit_classifier(
    features: ArrayView2<f64>,
    labels: &[usize],
    fc_widths: &[usize],
    stage_one_clusters: Option<&[usize]>,
    init: KMeansInit,
    ridge: RidgeSpec,
    seed: u64,
) -> Result<FcClassifier> {
    if fc_widths.is_empty() {
        return Err(Error::config("fc_widths must not be empty"));
    }
    if features.nrows() != labels.len() {
        return Err(Error::numeric(format!(
            "{} feature rows but {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    let class_count = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    if class_count == 0 {
        return Err(Error::data("no labels provided"));
    }
    let last = *fc_widths.last().expect("nonempty");
    if last != class_count {
        return Err(Error::config(format!(
            "final fc width {last} must equal the class count {class_count}"
        )));
    }

    let mut stages = Vec::with_capacity(fc_widths.len());
    let mut x = features.to_owned();
    for (si, &width) in fc_widths.iter().enumerate() {
        let is_final = si == fc_widths.len() - 1;
        let stage_seed = derive_seed(seed, &["fc-stage", &si.to_string()]);
        if is_final {
            let targets = one_hot(labels, class_count)?;
            let stage = fit_stage(x.view(), targets.view(), false, ridge, None)?;
            x = stage.forward_batch(x.view())?;
            stages.push(stage);
        } else {
            let scheme = match (si, stage_one_clusters) {
                (0, Some(counts)) => {
                    let scheme = PseudoLabelScheme {
                        clusters_per_class: counts.to_vec(),
                        init,
                    };
                    if scheme.num_classes() != class_count {
                        return Err(Error::config(format!(
                            "stage-one cluster list covers {} classes, data has {class_count}",
                            scheme.num_classes()
                        )));
                    }
                    if scheme.total() != width {
                        return Err(Error::config(format!(
                            "stage-one clusters sum to {}, fc width is {width}",
                            scheme.total()
                        )));
                    }
                    scheme
                }
                _ => PseudoLabelScheme::even_split(class_count, width, init)?,
            };
            let pseudo = make_pseudo_labels(x.view(), labels, &scheme, stage_seed)?;
            let targets = one_hot(&pseudo, scheme.total())?;
            let stage = fit_stage(x.view(), targets.view(), true, ridge, Some(scheme))?;
            x = stage.forward_batch(x.view())?;
            stages.push(stage);
        }
    }
    FcClassifier::from_parts(stages, class_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    /// Two well-separated blobs per class in 2-D.
    fn blobs(per_cluster: usize) -> (Array2<f64>, Vec<usize>) {
        let centers: [(f64, f64, usize); 4] = [
            (0.0, 0.0, 0),
            (10.0, 0.0, 0),
            (0.0, 10.0, 1),
            (10.0, 10.0, 1),
        ];
        let n = per_cluster * centers.len();
        let mut x = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        for (ci, &(cx, cy, class)) in centers.iter().enumerate() {
            for k in 0..per_cluster {
                let jitter = ((ci * per_cluster + k) as f64 * 0.77).sin() * 0.05;
                x[[row, 0]] = cx + jitter;
                x[[row, 1]] = cy - jitter;
                labels.push(class);
                row += 1;
            }
        }
        (x, labels)
    }

    #[test]
    fn even_split_prefers_low_classes() {
        let s = PseudoLabelScheme::even_split(10, 84, KMeansInit::KMeansPP).unwrap();
        assert_eq!(
            s.clusters_per_class,
            vec![9, 9, 9, 9, 8, 8, 8, 8, 8, 8]
        );
        assert_eq!(s.total(), 84);
        let s = PseudoLabelScheme::even_split(10, 120, KMeansInit::KMeansPP).unwrap();
        assert_eq!(s.clusters_per_class, vec![12; 10]);
    }

    #[test]
    fn pseudo_labels_are_a_bijection_over_blocks() {
        let (x, labels) = blobs(8);
        let scheme = PseudoLabelScheme {
            clusters_per_class: vec![2, 2],
            init: KMeansInit::KMeansPP,
        };
        let pseudo = make_pseudo_labels(x.view(), &labels, &scheme, 3).unwrap();
        // Class 0 rows land in 0..2, class 1 rows in 2..4, all blocks used.
        let mut seen = vec![false; 4];
        for (i, &p) in pseudo.iter().enumerate() {
            let class = labels[i];
            assert!(p >= 2 * class && p < 2 * class + 2, "row {i}: {p}");
            seen[p] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn single_cluster_per_class_reproduces_labels() {
        let (x, labels) = blobs(5);
        let scheme = PseudoLabelScheme {
            clusters_per_class: vec![1, 1],
            init: KMeansInit::Random,
        };
        let pseudo = make_pseudo_labels(x.view(), &labels, &scheme, 0).unwrap();
        assert_eq!(pseudo, labels);
    }

    #[test]
    fn undersized_class_is_named_in_the_error() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]];
        let labels = vec![0, 0, 1];
        let scheme = PseudoLabelScheme {
            clusters_per_class: vec![2, 2],
            init: KMeansInit::KMeansPP,
        };
        let err = make_pseudo_labels(x.view(), &labels, &scheme, 0)
            .unwrap_err()
            .to_string();
        assert!(err.contains("class 1"), "got: {err}");
    }

    #[test]
    fn one_hot_inputs_pass_through_identity_stage() {
        // Features already one-hot and targets equal to them: the regression
        // reproduces its input exactly on training data.
        let labels = vec![0, 1, 2, 0, 1, 2, 2];
        let x = one_hot(&labels, 3).unwrap();
        let stage = fit_stage(x.view(), x.view(), false, RidgeSpec::Value(0.0), None).unwrap();
        let y = stage.forward_batch(x.view()).unwrap();
        for (a, b) in y.iter().zip(x.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn constant_target_is_absorbed_by_the_bias() {
        let x = array![[0.3, -1.2], [2.0, 0.4], [-0.7, 0.9]];
        let targets = one_hot(&[1, 1, 1], 3).unwrap();
        let stage = fit_stage(x.view(), targets.view(), false, RidgeSpec::Auto, None).unwrap();
        let y = stage.forward_batch(x.view()).unwrap();
        for row in y.rows() {
            assert_abs_diff_eq!(row[0], 0.0, epsilon = 1e-6);
            assert_abs_diff_eq!(row[1], 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(row[2], 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn non_one_hot_targets_rejected() {
        let x = array![[1.0], [2.0]];
        let targets = array![[0.5, 0.5], [1.0, 0.0]];
        assert!(fit_stage(x.view(), targets.view(), false, RidgeSpec::Auto, None).is_err());
    }

    #[test]
    fn cascade_classifies_separated_blobs() {
        let (x, labels) = blobs(10);
        let clf = fit_classifier(
            x.view(),
            &labels,
            &[4, 2],
            None,
            KMeansInit::KMeansPP,
            RidgeSpec::Auto,
            7,
        )
        .unwrap();
        assert_eq!(clf.param_counts(), vec![(2 + 1) * 4, (4 + 1) * 2]);
        let predictions = clf.predict_batch(x.view()).unwrap();
        assert_eq!(predictions, labels);
        // Hidden-stage outputs are rectified, so non-negative.
        let hidden = clf.stages()[0].forward_batch(x.view()).unwrap();
        assert!(hidden.iter().all(|&v| v >= 0.0));
        // Training samples at cluster hearts score their own class.
        let (class, scores) = clf.predict(x.row(0)).unwrap();
        assert_eq!(class, 0);
        assert_eq!(scores.len(), 2);
    }

    #[test]
    fn plain_one_stage_regression_also_works() {
        let (x, labels) = blobs(6);
        let clf = fit_classifier(
            x.view(),
            &labels,
            &[2],
            None,
            KMeansInit::KMeansPP,
            RidgeSpec::Auto,
            0,
        )
        .unwrap();
        assert_eq!(clf.stages().len(), 1);
        let predictions = clf.predict_batch(x.view()).unwrap();
        let correct = predictions
            .iter()
            .zip(&labels)
            .filter(|(a, b)| a == b)
            .count();
        assert!(correct >= labels.len() * 9 / 10);
    }

    #[test]
    fn same_seed_same_weights_different_init_different_weights() {
        let (x, labels) = blobs(10);
        let fit = |init, seed| {
            fit_classifier(
                x.view(),
                &labels,
                &[4, 2],
                None,
                init,
                RidgeSpec::Auto,
                seed,
            )
            .unwrap()
        };
        let a = fit(KMeansInit::KMeansPP, 5);
        let b = fit(KMeansInit::KMeansPP, 5);
        assert_eq!(a.stages()[0].weights(), b.stages()[0].weights());

        let c = fit(KMeansInit::Random, 5);
        let dist: f64 = a.stages()[0]
            .weights()
            .iter()
            .zip(c.stages()[0].weights().iter())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 0.0, "different init should move stage-I weights");
    }

    #[test]
    fn zero_feature_vector_is_deterministic() {
        let (x, labels) = blobs(6);
        let clf = fit_classifier(
            x.view(),
            &labels,
            &[4, 2],
            None,
            KMeansInit::KMeansPP,
            RidgeSpec::Auto,
            1,
        )
        .unwrap();
        let zero = Array1::zeros(2);
        let (c1, s1) = clf.predict(zero.view()).unwrap();
        let (c2, s2) = clf.predict(zero.view()).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn width_scheme_mismatch_rejected() {
        let (x, labels) = blobs(6);
        let err = fit_classifier(
            x.view(),
            &labels,
            &[5, 2],
            Some(&[2, 2]),
            KMeansInit::KMeansPP,
            RidgeSpec::Auto,
            0,
        );
        assert!(err.is_err(), "clusters sum 4 vs width 5 must fail");
    }

    #[test]
    fn argmax_ties_break_low() {
        assert_eq!(argmax(array![1.0, 3.0, 3.0].view()), 1);
        assert_eq!(argmax(array![-1.0, -1.0].view()), 0);
    }
}
