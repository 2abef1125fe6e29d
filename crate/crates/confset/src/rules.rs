//! Confidence-set rules: top-`beta`, supervised plug-in, semi-supervised
//! plug-in, and the Monte-Carlo oracle.
//!
//! The plug-in rules factor through one path: fit a probability model, score
//! a calibration pool, perturb the pool scores for continuity, and threshold
//! at the generalized inverse of the pooled empirical `G`. Rule membership at
//! predict time is the inclusive test `p_hat_k(x) >= threshold` on
//! *unperturbed* scores; the perturbation exists only to make the calibration
//! step well-behaved.

use serde::{Deserialize, Serialize};

use crate::distgen::Population;
use crate::gfun::{mc_true_threshold, perturb_scores, EmpiricalG, Threshold};
use crate::probest::{self, ProbModel, SoftmaxHyper};
use crate::types::{ConfidenceSet, LabeledDataset, Matrix, UnlabeledDataset};
use crate::{Error, Result};

/// Which probability estimator a plug-in rule uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum EstimatorChoice {
    /// The exact posterior of a known distribution.
    Oracle { dist: Population },
    /// k-nearest neighbors; `k_neighbors = None` means `ceil(sqrt(n_fit))`.
    Knn { k_neighbors: Option<usize> },
    /// Softmax regression with the given hyperparameters.
    Softmax { hyper: SoftmaxHyper },
}

/// Configuration for fitting a plug-in rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub beta: u32,
    pub estimator: EstimatorChoice,
    /// Standard deviation of the half-normal continuity perturbation applied
    /// to the calibration pool.
    pub noise_std: f64,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(beta: u32, estimator: EstimatorChoice, seed: u64) -> Self {
        FitConfig {
            beta,
            estimator,
            noise_std: crate::gfun::DEFAULT_NOISE_STD,
            seed,
        }
    }
}

/// How a rule maps scores to a label subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleMode {
    /// The `beta` highest-scoring classes, ties broken toward smaller labels.
    TopBeta,
    /// Every class whose score is `>= threshold`.
    Threshold,
}

/// An immutable fitted confidence-set rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRule {
    mode: RuleMode,
    beta: u32,
    threshold: Option<f64>,
    model: ProbModel,
    perturb_seed: Option<u64>,
}

impl ConfidenceRule {
    pub fn mode(&self) -> RuleMode {
        self.mode
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    /// The fitted threshold; `None` for top-`beta` rules.
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn model(&self) -> &ProbModel {
        &self.model
    }

    pub fn k_classes(&self) -> u32 {
        self.model.k_classes()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// The label subset at `x`.
    pub fn predict_set(&self, x: &[f64]) -> Result<ConfidenceSet> {
        let scores = self.model.predict(x)?;
        Ok(self.set_from_scores(&scores))
    }

    /// The label subset implied by a precomputed score vector.
    pub fn set_from_scores(&self, scores: &[f64]) -> ConfidenceSet {
        let space = crate::types::LabelSpace::new(self.k_classes()).expect("K >= 2");
        let mut set = ConfidenceSet::empty(space);
        match self.mode {
            RuleMode::Threshold => {
                let threshold = self.threshold.expect("threshold mode carries a value");
                for (idx, &s) in scores.iter().enumerate() {
                    if s >= threshold {
                        set.insert(idx as u32 + 1).expect("label in range");
                    }
                }
            }
            RuleMode::TopBeta => {
                // Stable sort on (-score, label): ties go to the smaller label.
                let mut order: Vec<usize> = (0..scores.len()).collect();
                order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
                for &idx in order.iter().take(self.beta as usize) {
                    set.insert(idx as u32 + 1).expect("label in range");
                }
            }
        }
        set
    }

    /// Label subsets for a whole feature batch.
    pub fn predict_sets(&self, features: &Matrix) -> Result<Vec<ConfidenceSet>> {
        let mut out = Vec::with_capacity(features.rows());
        let mut scores = vec![0.0; self.k_classes() as usize];
        for row in features.iter_rows() {
            self.model.predict_into(row, &mut scores)?;
            out.push(self.set_from_scores(&scores));
        }
        Ok(out)
    }
}

/// The fixed-cardinality rule returning the `beta` highest-scoring classes.
pub fn fit_top_beta(model: ProbModel, beta: u32) -> Result<ConfidenceRule> {
    let k = model.k_classes();
    if beta < 1 || beta > k {
        return Err(Error::BetaOutOfRange {
            beta: f64::from(beta),
            lo: 1.0,
            hi: f64::from(k),
        });
    }
    Ok(ConfidenceRule {
        mode: RuleMode::TopBeta,
        beta,
        threshold: None,
        model,
        perturb_seed: None,
    })
}

/// A threshold rule whose level is a known constant (used by the oracle path
/// and by tests that pin thresholds directly).
pub fn threshold_rule(model: ProbModel, beta: u32, threshold: Threshold) -> ConfidenceRule {
    ConfidenceRule {
        mode: RuleMode::Threshold,
        beta,
        threshold: Some(threshold.value()),
        model,
        perturb_seed: None,
    }
}

/// Calibrate a threshold rule for `model` on an explicit pool of feature
/// rows: score the pool, perturb for continuity, and invert the empirical `G`
/// at `beta`. This is the shared tail of the supervised, semi-supervised, and
/// full-sample protocols.
pub fn fit_with_pool(
    model: ProbModel,
    pool: &Matrix,
    beta: u32,
    noise_std: f64,
    seed: u64,
) -> Result<ConfidenceRule> {
    let k = model.k_classes();
    if beta < 1 || beta >= k {
        return Err(Error::BetaOutOfRange {
            beta: f64::from(beta),
            lo: 1.0,
            hi: f64::from(k - 1),
        });
    }
    if pool.rows() == 0 {
        return Err(Error::EmptyScores);
    }
    let raw = model.score_matrix(pool)?;
    let perturbed = perturb_scores(&raw, noise_std, seed)?;
    let threshold = EmpiricalG::build(&perturbed)?.generalized_inverse(f64::from(beta))?;
    Ok(ConfidenceRule {
        mode: RuleMode::Threshold,
        beta,
        threshold: Some(threshold.value()),
        model,
        perturb_seed: Some(seed),
    })
}

fn fit_model(train: &LabeledDataset, choice: &EstimatorChoice) -> Result<ProbModel> {
    match choice {
        EstimatorChoice::Oracle { dist } => {
            if dist.dim() != train.dim() {
                return Err(Error::DimensionMismatch {
                    expected: dist.dim(),
                    got: train.dim(),
                });
            }
            Ok(ProbModel::oracle(dist.clone()))
        }
        EstimatorChoice::Knn { k_neighbors } => {
            let k = k_neighbors.unwrap_or_else(|| probest::default_knn_neighbors(train.n()));
            probest::fit_knn(train, k)
        }
        EstimatorChoice::Softmax { hyper } => probest::fit_softmax(train, *hyper),
    }
}

/// Supervised plug-in rule: the model is fit on the first `floor(n/2)` rows,
/// the threshold on the remaining `ceil(n/2)` feature rows with labels
/// discarded. The split is by row order; callers shuffle upstream.
pub fn fit_supervised(train: &LabeledDataset, cfg: &FitConfig) -> Result<ConfidenceRule> {
    fit_semi_supervised(train, &UnlabeledDataset::empty(train.dim()), cfg)
}

/// Semi-supervised plug-in rule: as [`fit_supervised`], but the calibration
/// pool is the held-out half stacked with all unlabeled rows. With an empty
/// unlabeled set this is exactly the supervised fit.
pub fn fit_semi_supervised(
    train: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    cfg: &FitConfig,
) -> Result<ConfidenceRule> {
    if train.n() < 2 {
        return Err(Error::param(
            "train",
            format!("need n >= 2 to split, got n = {}", train.n()),
        ));
    }
    if unlabeled.n() > 0 && unlabeled.dim() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: unlabeled.dim(),
        });
    }
    let (head, held_out) = train.split_half();
    let model = fit_model(&head, &cfg.estimator)?;
    let mut pool = Vec::with_capacity((held_out.n() + unlabeled.n()) * train.dim());
    pool.extend_from_slice(held_out.features.values());
    pool.extend_from_slice(unlabeled.features.values());
    let pool = Matrix::from_rows(pool, held_out.n() + unlabeled.n(), train.dim())?;
    fit_with_pool(model, &pool, cfg.beta, cfg.noise_std, cfg.seed)
}

/// The Monte-Carlo oracle: the exact posterior thresholded at the
/// Monte-Carlo estimate of the population threshold.
pub fn fit_oracle(
    dist: &Population,
    beta: u32,
    mc_size: usize,
    seed: u64,
) -> Result<ConfidenceRule> {
    let k = dist.k();
    if beta < 1 || beta >= k {
        return Err(Error::BetaOutOfRange {
            beta: f64::from(beta),
            lo: 1.0,
            hi: f64::from(k - 1),
        });
    }
    let threshold = mc_true_threshold(dist, beta, mc_size, seed)?;
    Ok(threshold_rule(ProbModel::oracle(dist.clone()), beta, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distgen::{MixtureSpec, PathologySpec};
    use crate::gfun::{DEFAULT_MC_SIZE, DEFAULT_NOISE_STD};
    use crate::rng::derive_seed;
    use crate::types::LabelSpace;

    fn fixed_score_model(k: u32) -> ProbModel {
        // A mixture whose posterior at a chosen point is easy to pin down is
        // clumsy for set-level tests; drive set_from_scores directly instead.
        ProbModel::oracle(Population::Mixture(MixtureSpec::sample(k, 1, 0).unwrap()))
    }

    fn set(rule: &ConfidenceRule, scores: &[f64]) -> Vec<u32> {
        rule.set_from_scores(scores).members()
    }

    #[test]
    fn top_beta_examples() {
        let rule = fit_top_beta(fixed_score_model(3), 2).unwrap();
        assert_eq!(set(&rule, &[0.5, 0.3, 0.2]), vec![1, 2]);

        let rule = fit_top_beta(fixed_score_model(3), 3).unwrap();
        assert_eq!(set(&rule, &[0.2, 0.5, 0.3]), vec![1, 2, 3]);

        // Tie on the top score goes to the smaller label.
        let rule = fit_top_beta(fixed_score_model(3), 1).unwrap();
        assert_eq!(set(&rule, &[0.4, 0.4, 0.2]), vec![1]);
    }

    #[test]
    fn top_beta_rejects_out_of_range() {
        assert!(fit_top_beta(fixed_score_model(3), 0).is_err());
        assert!(fit_top_beta(fixed_score_model(3), 4).is_err());
    }

    #[test]
    fn threshold_membership_examples() {
        let model = fixed_score_model(3);
        let rule = threshold_rule(model.clone(), 1, Threshold::new(0.0).unwrap());
        assert_eq!(set(&rule, &[0.1, 0.0, 0.9]), vec![1, 2, 3]);

        let rule = threshold_rule(model.clone(), 1, Threshold::new(0.95).unwrap());
        assert_eq!(set(&rule, &[0.1, 0.2, 0.9]), Vec::<u32>::new());

        // Inclusive comparison at the threshold.
        let rule = threshold_rule(model, 1, Threshold::new(0.30).unwrap());
        assert_eq!(set(&rule, &[0.30, 0.50, 0.20]), vec![1, 2]);
    }

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let rule = fit_top_beta(fixed_score_model(3), 1).unwrap();
        assert!(rule.predict_set(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn supervised_needs_two_rows_and_valid_beta() {
        let spec = MixtureSpec::sample(3, 2, 1).unwrap();
        let train = spec.sample_labeled(1, 2).unwrap();
        let cfg = FitConfig::new(
            1,
            EstimatorChoice::Oracle {
                dist: Population::Mixture(spec.clone()),
            },
            0,
        );
        assert!(fit_supervised(&train, &cfg).is_err());

        let train = spec.sample_labeled(10, 2).unwrap();
        let bad = FitConfig::new(3, cfg.estimator.clone(), 0);
        assert!(fit_supervised(&train, &bad).is_err());
        assert!(fit_supervised(&train, &cfg).is_ok());
    }

    #[test]
    fn two_row_fit_uses_a_held_out_score() {
        // n = 2, K = 2, beta = 1: the pool is the single held-out point, so
        // the threshold is one of its two perturbed scores.
        let spec = MixtureSpec::sample(2, 1, 5).unwrap();
        let train = spec.sample_labeled(2, 6).unwrap();
        let cfg = FitConfig::new(
            1,
            EstimatorChoice::Oracle {
                dist: Population::Mixture(spec.clone()),
            },
            77,
        );
        let rule = fit_supervised(&train, &cfg).unwrap();
        let held_out = train.features.row(1);
        let raw = rule.model().score_matrix(&Matrix::from_rows(held_out.to_vec(), 1, 1).unwrap())
            .unwrap();
        let perturbed = perturb_scores(&raw, cfg.noise_std, cfg.seed).unwrap();
        let threshold = rule.threshold().unwrap();
        assert!(
            perturbed.values().iter().any(|&v| v == threshold),
            "threshold {threshold} not among perturbed scores {:?}",
            perturbed.values()
        );
    }

    #[test]
    fn identical_inputs_give_byte_identical_rules() {
        let spec = MixtureSpec::sample(4, 3, 9).unwrap();
        let train = spec.sample_labeled(40, 10).unwrap();
        let cfg = FitConfig::new(
            2,
            EstimatorChoice::Knn { k_neighbors: None },
            123,
        );
        let a = fit_supervised(&train, &cfg).unwrap();
        let b = fit_supervised(&train, &cfg).unwrap();
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
    }

    #[test]
    fn supervised_threshold_tracks_population_threshold() {
        // Oracle scores and a large held-out half: the fitted threshold lands
        // within 0.01 of the Monte-Carlo population threshold.
        let spec = MixtureSpec::sample(10, 10, 2).unwrap();
        let pop = Population::Mixture(spec.clone());
        let train = spec.sample_labeled(200_000, 3).unwrap();
        let cfg = FitConfig::new(
            2,
            EstimatorChoice::Oracle { dist: pop.clone() },
            11,
        );
        let rule = fit_supervised(&train, &cfg).unwrap();
        let truth = mc_true_threshold(&pop, 2, DEFAULT_MC_SIZE, derive_seed(0, 0, "truth"))
            .unwrap();
        assert!(
            (rule.threshold().unwrap() - truth.value()).abs() < 0.01,
            "fitted {} vs mc {}",
            rule.threshold().unwrap(),
            truth.value()
        );
    }

    #[test]
    fn empty_unlabeled_set_reduces_to_supervised() {
        let spec = MixtureSpec::sample(5, 2, 4).unwrap();
        let train = spec.sample_labeled(30, 5).unwrap();
        let cfg = FitConfig::new(
            2,
            EstimatorChoice::Knn { k_neighbors: Some(3) },
            42,
        );
        let supervised = fit_supervised(&train, &cfg).unwrap();
        let semi = fit_semi_supervised(&train, &UnlabeledDataset::empty(2), &cfg).unwrap();
        assert_eq!(
            serde_json::to_vec(&supervised).unwrap(),
            serde_json::to_vec(&semi).unwrap()
        );
    }

    #[test]
    fn supervised_rule_ignores_the_unlabeled_sample() {
        let spec = MixtureSpec::sample(5, 2, 4).unwrap();
        let train = spec.sample_labeled(30, 5).unwrap();
        let cfg = FitConfig::new(
            2,
            EstimatorChoice::Knn { k_neighbors: Some(3) },
            42,
        );
        // fit_supervised has no unlabeled argument at all; the contract it
        // must honor is that the semi-supervised path with swapped pools
        // differs while the supervised fit stays fixed.
        let supervised = fit_supervised(&train, &cfg).unwrap();
        let pool_a = spec.sample_unlabeled(500, 100);
        let pool_b = {
            // Shift one pool to force different thresholds.
            let mut features = pool_a.features.clone();
            for i in 0..features.rows() {
                for v in features.row_mut(i) {
                    *v += 3.0;
                }
            }
            UnlabeledDataset::new(features)
        };
        let semi_a = fit_semi_supervised(&train, &pool_a, &cfg).unwrap();
        let semi_b = fit_semi_supervised(&train, &pool_b, &cfg).unwrap();
        assert_ne!(semi_a.threshold(), semi_b.threshold());
        let again = fit_supervised(&train, &cfg).unwrap();
        assert_eq!(
            serde_json::to_vec(&supervised).unwrap(),
            serde_json::to_vec(&again).unwrap()
        );
    }

    #[test]
    fn semi_supervised_rejects_dimension_mismatch() {
        let spec = MixtureSpec::sample(3, 2, 4).unwrap();
        let train = spec.sample_labeled(10, 5).unwrap();
        let other = MixtureSpec::sample(3, 5, 4).unwrap();
        let pool = other.sample_unlabeled(10, 6);
        let cfg = FitConfig::new(1, EstimatorChoice::Knn { k_neighbors: Some(1) }, 0);
        assert!(fit_semi_supervised(&train, &pool, &cfg).is_err());
    }

    #[test]
    fn thresholds_are_nonincreasing_in_beta() {
        let spec = MixtureSpec::sample(6, 3, 14).unwrap();
        let train = spec.sample_labeled(400, 15).unwrap();
        let mut last = f64::INFINITY;
        for beta in 1..6 {
            let cfg = FitConfig::new(
                beta,
                EstimatorChoice::Oracle {
                    dist: Population::Mixture(spec.clone()),
                },
                7,
            );
            let rule = fit_supervised(&train, &cfg).unwrap();
            let threshold = rule.threshold().unwrap();
            assert!(threshold <= last, "threshold rose at beta = {beta}");
            last = threshold;
        }
    }

    #[test]
    fn oracle_rule_on_the_pathology_regions() {
        let spec = PathologySpec::new(2, 10).unwrap();
        let pop = Population::Pathology(spec);
        let rule = fit_oracle(&pop, 2, 200_000, derive_seed(3, 0, "oracle")).unwrap();
        // Inner ball: the beta + 1 leading classes.
        let inner = rule.predict_set(&[0.05, 0.0]).unwrap();
        assert_eq!(inner.members(), vec![1, 2, 3]);
        // Middle annulus: same leading set.
        let middle = rule.predict_set(&[1.5, 0.0]).unwrap();
        assert_eq!(middle.members(), vec![1, 2, 3]);
        // Outer annulus: empty.
        let outer = rule.predict_set(&[4.5, 0.0]).unwrap();
        assert!(outer.is_empty());
    }

    #[test]
    fn rule_serde_round_trips_exactly() {
        let spec = MixtureSpec::sample(4, 2, 20).unwrap();
        let train = spec.sample_labeled(24, 21).unwrap();
        let cfg = FitConfig {
            beta: 2,
            estimator: EstimatorChoice::Softmax {
                hyper: SoftmaxHyper {
                    iters: 50,
                    ..SoftmaxHyper::default()
                },
            },
            noise_std: DEFAULT_NOISE_STD,
            seed: 31,
        };
        let rule = fit_supervised(&train, &cfg).unwrap();
        let json = serde_json::to_string(&rule).unwrap();
        let back: ConfidenceRule = serde_json::from_str(&json).unwrap();
        assert_eq!(rule, back);
        assert_eq!(json, serde_json::to_string(&back).unwrap());
    }

    #[test]
    fn top_beta_cardinality_is_constant() {
        let spec = MixtureSpec::sample(7, 2, 30).unwrap();
        let sample = spec.sample_unlabeled(200, 31);
        for beta in [1u32, 3, 7] {
            let rule = fit_top_beta(
                ProbModel::oracle(Population::Mixture(spec.clone())),
                beta,
            )
            .unwrap();
            for s in rule.predict_sets(&sample.features).unwrap() {
                assert_eq!(s.cardinality(), beta);
            }
        }
    }

    #[test]
    fn sets_nest_as_beta_grows() {
        let spec = MixtureSpec::sample(6, 3, 33).unwrap();
        let train = spec.sample_labeled(400, 34).unwrap();
        let sample = spec.sample_unlabeled(50, 35);
        let mut previous: Option<Vec<ConfidenceSet>> = None;
        for beta in 1..6 {
            let cfg = FitConfig::new(
                beta,
                EstimatorChoice::Oracle {
                    dist: Population::Mixture(spec.clone()),
                },
                7,
            );
            let rule = fit_supervised(&train, &cfg).unwrap();
            let sets = rule.predict_sets(&sample.features).unwrap();
            if let Some(prev) = &previous {
                for (small, big) in prev.iter().zip(&sets) {
                    for label in small.members() {
                        assert!(big.contains(label), "nesting violated at beta = {beta}");
                    }
                }
            }
            previous = Some(sets);
        }
    }

    #[test]
    fn rule_fields_do_not_mutate_after_construction() {
        let rule = fit_top_beta(fixed_score_model(3), 2).unwrap();
        let before = serde_json::to_string(&rule).unwrap();
        let _ = rule.predict_set(&[0.2]).unwrap();
        let _ = rule.set_from_scores(&[0.9, 0.1, 0.0]);
        assert_eq!(before, serde_json::to_string(&rule).unwrap());
        let space = LabelSpace::new(3).unwrap();
        let _ = ConfidenceSet::empty(space);
    }
}
