//! The score-survival function `G`, its empirical version, and the threshold
//! machinery built on its generalized inverse.
//!
//! For a batch of `M` points with `K` class scores each,
//!
//! ```text
//! G_hat(t) = (1 / M) * #{ (i, k) : score(i, k) > t }
//! ```
//!
//! is a nonincreasing right-continuous step function with values in `[0, K]`.
//! Its generalized inverse `G_hat^{-1}(beta) = inf { t : G_hat(t) <= beta }`
//! is attained at a pooled score value (or at 0): sorting the pooled values
//! descending as `v_1 >= ... >= v_{MK}`, the infimum is `v_{floor(beta M) + 1}`
//! when that index exists and `0` otherwise.
//!
//! The inequality directions are deliberate and asymmetric: the indicator in
//! `G_hat` is strict (`>`) while rule membership elsewhere in the crate is
//! inclusive (`>=`). The inverse laws (`G^{-1}(beta) <= t  <=>  G(t) <= beta`,
//! and `G(G^{-1}(beta)) = beta` for continuous `G`) hold in exactly this
//! combination.
//!
//! Estimators with discrete output need a continuity fix before thresholding:
//! [`perturb_scores`] adds an independent half-normal draw to every entry,
//! breaking ties almost surely while moving each score by `O(noise_std)`.

use serde::{Deserialize, Serialize};

use crate::distgen::Population;
use crate::rng::{standard_normal, stream};
use crate::types::ScoreMatrix;
use crate::{Error, Result};

/// A threshold level in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    value: f64,
}

impl Threshold {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::param(
                "threshold",
                format!("need a value in [0, 1], got {value}"),
            ));
        }
        Ok(Threshold { value })
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Pooled, descending-sorted score values of an `M x K` batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalG {
    pooled_scores: Vec<f64>,
    m_points: usize,
    k_classes: usize,
}

impl EmpiricalG {
    /// Pool and sort all `M * K` score values.
    pub fn build(scores: &ScoreMatrix) -> Result<Self> {
        if scores.m_points() == 0 {
            return Err(Error::EmptyScores);
        }
        let mut pooled = scores.values().to_vec();
        pooled.sort_unstable_by(|a, b| b.total_cmp(a));
        Ok(EmpiricalG {
            pooled_scores: pooled,
            m_points: scores.m_points(),
            k_classes: scores.k_classes(),
        })
    }

    pub fn m_points(&self) -> usize {
        self.m_points
    }

    pub fn k_classes(&self) -> usize {
        self.k_classes
    }

    pub fn pooled_scores(&self) -> &[f64] {
        &self.pooled_scores
    }

    /// `G_hat(t)`: the number of pooled values strictly above `t`, divided by
    /// `M`.
    pub fn evaluate(&self, t: f64) -> f64 {
        // Descending order: the prefix holds exactly the values > t.
        let above = self.pooled_scores.partition_point(|&v| v > t);
        above as f64 / self.m_points as f64
    }

    /// `inf { t in [0, 1] : G_hat(t) <= beta }` for `beta in (0, K]`.
    ///
    /// Returns an actual pooled value (or 0), never an interpolated point.
    pub fn generalized_inverse(&self, beta: f64) -> Result<Threshold> {
        if !(beta > 0.0) {
            return Err(Error::BetaOutOfRange {
                beta,
                lo: 0.0,
                hi: self.k_classes as f64,
            });
        }
        if beta > self.k_classes as f64 {
            return Err(Error::BetaOutOfRange {
                beta,
                lo: 0.0,
                hi: self.k_classes as f64,
            });
        }
        let rank = (beta * self.m_points as f64).floor() as usize;
        let value = if rank < self.pooled_scores.len() {
            self.pooled_scores[rank]
        } else {
            0.0
        };
        Threshold::new(value.clamp(0.0, 1.0))
    }
}

/// Add an independent half-normal draw `|N(0, noise_std^2)|` to every score
/// and clip the result to `[0, 1]`. Deterministic in `seed`; `noise_std = 0`
/// returns the input unchanged (up to the clip).
pub fn perturb_scores(scores: &ScoreMatrix, noise_std: f64, seed: u64) -> Result<ScoreMatrix> {
    if noise_std < 0.0 {
        return Err(Error::param(
            "noise_std",
            format!("need a nonnegative standard deviation, got {noise_std}"),
        ));
    }
    let mut out = scores.clone();
    if noise_std > 0.0 {
        let mut rng = stream(seed);
        for v in out.data_mut() {
            *v += noise_std * standard_normal(&mut rng).abs();
        }
    }
    Ok(out.clip())
}

/// Default perturbation scale: variance `e^{-10}`, i.e. `noise_std = e^{-5}`.
pub const DEFAULT_NOISE_STD: f64 = 0.006_737_946_999_085_467; // exp(-5)

/// Default Monte-Carlo sample size for [`mc_true_threshold`].
pub const DEFAULT_MC_SIZE: usize = 1_000_000;

/// Monte-Carlo stand-in for the population threshold `G^{-1}(beta)`: sample
/// `mc_size` feature vectors from the marginal, score them with the exact
/// posterior, and invert the resulting empirical `G` at `beta`.
pub fn mc_true_threshold(
    dist: &Population,
    beta: u32,
    mc_size: usize,
    seed: u64,
) -> Result<Threshold> {
    if mc_size < 1_000 {
        return Err(Error::param(
            "mc_size",
            format!("need at least 1000 Monte-Carlo draws, got {mc_size}"),
        ));
    }
    let scores = exact_posterior_scores(dist, mc_size, seed)?;
    EmpiricalG::build(&scores)?.generalized_inverse(f64::from(beta))
}

/// Exact-posterior scores of `mc_size` fresh draws from the marginal.
pub fn exact_posterior_scores(
    dist: &Population,
    mc_size: usize,
    seed: u64,
) -> Result<ScoreMatrix> {
    let sample = dist.sample_unlabeled(mc_size, seed);
    exact_posterior_scores_of(dist, &sample.features)
}

/// Exact-posterior scores of the given feature rows.
pub fn exact_posterior_scores_of(
    dist: &Population,
    features: &crate::types::Matrix,
) -> Result<ScoreMatrix> {
    let k = dist.k() as usize;
    let m = features.rows();
    let mut data = vec![0.0; m * k];
    for (i, row) in features.iter_rows().enumerate() {
        dist.posterior_into(row, &mut data[i * k..(i + 1) * k])?;
    }
    ScoreMatrix::new(crate::types::Matrix::from_rows(data, m, k)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distgen::{MixtureSpec, PathologySpec};
    use crate::rng::derive_seed;
    use crate::types::Matrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn scores(rows: &[&[f64]]) -> ScoreMatrix {
        let k = rows[0].len();
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        ScoreMatrix::new(Matrix::from_rows(data, rows.len(), k).unwrap()).unwrap()
    }

    /// O(MK) scan oracle: the smallest candidate `t` in `{0} + pooled values`
    /// with `G_hat(t) <= beta`.
    fn brute_force_inverse(g: &EmpiricalG, beta: f64) -> f64 {
        let mut candidates: Vec<f64> = g.pooled_scores().to_vec();
        candidates.push(0.0);
        candidates
            .into_iter()
            .filter(|&t| g.evaluate(t) <= beta)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn evaluate_examples() {
        let g = EmpiricalG::build(&scores(&[&[0.7, 0.3]])).unwrap();
        assert_eq!(g.evaluate(0.5), 1.0);
        assert_eq!(g.evaluate(1.0), 0.0);

        let g = EmpiricalG::build(&scores(&[&[0.9, 0.1], &[0.6, 0.4]])).unwrap();
        assert_eq!(g.evaluate(0.5), 1.0);
    }

    #[test]
    fn build_rejects_empty() {
        let empty = ScoreMatrix::new(Matrix::zeros(0, 3)).unwrap();
        assert!(matches!(EmpiricalG::build(&empty), Err(Error::EmptyScores)));
    }

    #[test]
    fn inverse_examples() {
        let g = EmpiricalG::build(&scores(&[&[0.9, 0.1], &[0.6, 0.4]])).unwrap();
        assert_eq!(g.generalized_inverse(2.0).unwrap().value(), 0.0);
        assert_eq!(g.generalized_inverse(1.0).unwrap().value(), 0.4);
        // beta = 1/(2M): no value may be exceeded, so the max is returned.
        assert_eq!(g.generalized_inverse(0.25).unwrap().value(), 0.9);
    }

    #[test]
    fn inverse_rejects_out_of_range_beta() {
        let g = EmpiricalG::build(&scores(&[&[0.9, 0.1]])).unwrap();
        assert!(g.generalized_inverse(0.0).is_err());
        assert!(g.generalized_inverse(-1.0).is_err());
        assert!(g.generalized_inverse(2.5).is_err());
    }

    #[test]
    fn inverse_matches_brute_force_on_random_instances() {
        let mut rng = stream(derive_seed(2024, 0, "gfun-oracle"));
        for _ in 0..1000 {
            let m = rng.gen_range(1..=8);
            let k = rng.gen_range(2..=4);
            let data: Vec<f64> = (0..m * k).map(|_| rng.gen::<f64>()).collect();
            let sm = ScoreMatrix::new(Matrix::from_rows(data, m, k).unwrap()).unwrap();
            let g = EmpiricalG::build(&sm).unwrap();
            let beta = rng.gen_range(0.01..k as f64);
            let fast = g.generalized_inverse(beta).unwrap().value();
            let slow = brute_force_inverse(&g, beta);
            assert_eq!(fast, slow, "m={m} k={k} beta={beta}");
        }
    }

    #[test]
    fn inverse_law_on_exhaustive_small_instances() {
        // G^{-1}(beta) <= t  <=>  G(t) <= beta, for t strictly between
        // adjacent pooled values; every (M, K) with M <= 5, K <= 3.
        let mut rng = stream(derive_seed(2024, 1, "gfun-law"));
        for m in 1..=5usize {
            for k in 2..=3usize {
                let data: Vec<f64> = (0..m * k).map(|_| rng.gen::<f64>()).collect();
                let sm = ScoreMatrix::new(Matrix::from_rows(data, m, k).unwrap()).unwrap();
                let g = EmpiricalG::build(&sm).unwrap();
                let mut grid = g.pooled_scores().to_vec();
                grid.push(0.0);
                grid.sort_by(f64::total_cmp);
                let midpoints: Vec<f64> = grid.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
                for beta in [0.3, 0.7, 1.0, 1.5, 2.4, k as f64 - 0.01] {
                    if beta >= k as f64 {
                        continue;
                    }
                    let inv = g.generalized_inverse(beta).unwrap().value();
                    for &t in &midpoints {
                        assert_eq!(inv <= t, g.evaluate(t) <= beta, "beta={beta} t={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn approximate_calibration_after_perturbation() {
        let mut rng = stream(derive_seed(2024, 2, "gfun-calib"));
        for trial in 0..50 {
            let m = rng.gen_range(10..200);
            let k = rng.gen_range(2..6);
            let data: Vec<f64> = (0..m * k).map(|_| rng.gen::<f64>() * 0.5 + 0.25).collect();
            let sm = ScoreMatrix::new(Matrix::from_rows(data, m, k).unwrap()).unwrap();
            let perturbed = perturb_scores(&sm, DEFAULT_NOISE_STD, trial).unwrap();
            let g = EmpiricalG::build(&perturbed).unwrap();
            let beta = rng.gen_range(0.5..k as f64 - 0.5);
            let inv = g.generalized_inverse(beta).unwrap().value();
            let diff = (g.evaluate(inv) - beta).abs();
            assert!(
                diff <= k as f64 / m as f64 + 1e-12,
                "|G(G^-1(beta)) - beta| = {diff} with K/M = {}",
                k as f64 / m as f64
            );
        }
    }

    #[test]
    fn threshold_lipschitz_in_sup_norm() {
        // |G_P^{-1}(beta) - G_Q^{-1}(beta)| <= max |P - Q| on 1000 random
        // perturbed pairs over the same points.
        let mut rng = stream(derive_seed(2024, 3, "gfun-lipschitz"));
        for trial in 0..1000 {
            let m = rng.gen_range(2..40);
            let k = rng.gen_range(2..5);
            let base: Vec<f64> = (0..m * k).map(|_| rng.gen::<f64>()).collect();
            let gap = rng.gen_range(0.0..0.2);
            let shifted: Vec<f64> = base
                .iter()
                .map(|v| (v + rng.gen_range(-gap..=gap)).clamp(0.0, 1.0))
                .collect();
            let p = ScoreMatrix::new(Matrix::from_rows(base.clone(), m, k).unwrap()).unwrap();
            let q = ScoreMatrix::new(Matrix::from_rows(shifted.clone(), m, k).unwrap()).unwrap();
            let p = perturb_scores(&p, 1e-9, trial).unwrap();
            let q = perturb_scores(&q, 1e-9, trial).unwrap();
            let sup: f64 = p
                .values()
                .iter()
                .zip(q.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let beta = rng.gen_range(0.1..k as f64);
            let tp = EmpiricalG::build(&p).unwrap().generalized_inverse(beta).unwrap();
            let tq = EmpiricalG::build(&q).unwrap().generalized_inverse(beta).unwrap();
            assert!(
                (tp.value() - tq.value()).abs() <= sup + 1e-12,
                "threshold gap {} exceeds sup-norm gap {sup}",
                (tp.value() - tq.value()).abs()
            );
        }
    }

    #[test]
    fn perturbation_contract() {
        let sm = scores(&[&[0.2, 0.8], &[0.5, 0.5]]);
        let zero = perturb_scores(&sm, 0.0, 99).unwrap();
        assert_eq!(zero.values(), sm.values());
        let a = perturb_scores(&sm, 1e-3, 7).unwrap();
        let b = perturb_scores(&sm, 1e-3, 7).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), perturb_scores(&sm, 1e-3, 8).unwrap().values());
        assert!(perturb_scores(&sm, -0.1, 0).is_err());
    }

    #[test]
    fn perturbation_breaks_ties() {
        let data = vec![0.5; 1000 * 10];
        let sm = ScoreMatrix::new(Matrix::from_rows(data, 1000, 10).unwrap()).unwrap();
        let perturbed = perturb_scores(&sm, (-5.0f64).exp(), 4).unwrap();
        let mut vals = perturbed.values().to_vec();
        vals.sort_by(f64::total_cmp);
        for w in vals.windows(2) {
            assert!(w[0] < w[1], "tie survived the perturbation");
        }
    }

    #[test]
    fn mc_threshold_on_symmetric_two_class_mixture() {
        // d = 1, means 0 and 4: by symmetry G(0.5) = 1, so G^{-1}(1) = 0.5.
        let means = Matrix::from_rows(vec![0.0, 4.0], 2, 1).unwrap();
        let pop = Population::Mixture(MixtureSpec::with_means(means).unwrap());
        let theta = mc_true_threshold(&pop, 1, 1_000_000, derive_seed(0, 0, "sym")).unwrap();
        assert!(
            (theta.value() - 0.5).abs() < 0.01,
            "theta = {}",
            theta.value()
        );
    }

    #[test]
    fn mc_threshold_at_beta_equals_k_is_zero() {
        let means = Matrix::from_rows(vec![0.0, 4.0], 2, 1).unwrap();
        let pop = Population::Mixture(MixtureSpec::with_means(means).unwrap());
        let theta = mc_true_threshold(&pop, 2, 10_000, 1).unwrap();
        assert_eq!(theta.value(), 0.0);
    }

    #[test]
    fn mc_threshold_rejects_tiny_samples() {
        let pop = Population::Pathology(PathologySpec::new(2, 10).unwrap());
        assert!(mc_true_threshold(&pop, 2, 999, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn evaluate_is_nonincreasing(
            data in proptest::collection::vec(0.0f64..=1.0, 4..80),
            grid in proptest::collection::vec(0.0f64..=1.0, 1..20),
        ) {
            let k = 2;
            let m = data.len() / k;
            let sm = ScoreMatrix::new(
                Matrix::from_rows(data[..m * k].to_vec(), m, k).unwrap(),
            ).unwrap();
            let g = EmpiricalG::build(&sm).unwrap();
            let mut grid = grid;
            grid.sort_by(f64::total_cmp);
            for w in grid.windows(2) {
                prop_assert!(g.evaluate(w[0]) >= g.evaluate(w[1]));
            }
            prop_assert!(g.evaluate(0.0) <= k as f64);
            prop_assert_eq!(g.evaluate(1.0), 0.0);
        }
    }
}
