//! Monte-Carlo estimators of the performance measures: error, information,
//! penalized risk, Hamming distance to a reference rule, excess risk, and
//! discrepancy, plus cross-repetition aggregation.
//!
//! Within one repetition every estimator must use the same test rows; the
//! algebraic identity
//!
//! ```text
//! P(G1) - P(G*) = [R_b(G1) - R_b(G*)] + theta * (I(G*) - I(G1))
//! ```
//!
//! holds exactly on a common empirical measure and is tested to 1e-12.
//! The excess risk is computed in its weighted-symmetric-difference form,
//! which is nonnegative by construction and does not difference two noisy
//! risk estimates.

use crate::distgen::Population;
use crate::gfun::Threshold;
use crate::rules::ConfidenceRule;
use crate::types::{ConfidenceSet, EvalReport, LabelSpace, LabeledDataset, Matrix, RiskSample};
use crate::{Error, Result};

/// Empirical error `P(Y not in Gamma(X))` over a labeled test set.
pub fn error_rate(rule: &ConfidenceRule, test: &LabeledDataset) -> Result<f64> {
    if test.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut misses = 0usize;
    let mut scores = vec![0.0; rule.k_classes() as usize];
    for (i, row) in test.features.iter_rows().enumerate() {
        rule.model().predict_into(row, &mut scores)?;
        if !rule.set_from_scores(&scores).contains(test.labels[i]) {
            misses += 1;
        }
    }
    Ok(misses as f64 / test.n() as f64)
}

/// Empirical information `E |Gamma(X)|` over a batch of feature rows.
pub fn information(rule: &ConfidenceRule, features: &Matrix) -> Result<f64> {
    if features.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0u64;
    let mut scores = vec![0.0; rule.k_classes() as usize];
    for row in features.iter_rows() {
        rule.model().predict_into(row, &mut scores)?;
        total += u64::from(rule.set_from_scores(&scores).cardinality());
    }
    Ok(total as f64 / features.rows() as f64)
}

/// Mean symmetric difference `E |Gamma_a(X) xor Gamma_b(X)|` between two
/// rules over a batch of feature rows.
pub fn hamming(
    rule_a: &ConfidenceRule,
    rule_b: &ConfidenceRule,
    features: &Matrix,
) -> Result<f64> {
    if rule_a.k_classes() != rule_b.k_classes() {
        return Err(Error::LabelSpaceMismatch(
            rule_a.k_classes(),
            rule_b.k_classes(),
        ));
    }
    if features.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0u64;
    let mut scores_a = vec![0.0; rule_a.k_classes() as usize];
    let mut scores_b = vec![0.0; rule_b.k_classes() as usize];
    for row in features.iter_rows() {
        rule_a.model().predict_into(row, &mut scores_a)?;
        rule_b.model().predict_into(row, &mut scores_b)?;
        let sa = rule_a.set_from_scores(&scores_a);
        let sb = rule_b.set_from_scores(&scores_b);
        total += u64::from(sa.symmetric_difference_size(&sb)?);
    }
    Ok(total as f64 / features.rows() as f64)
}

/// The penalized risk `P(Gamma) + theta * I(Gamma)`, both terms over the same
/// test rows.
pub fn risk_beta(rule: &ConfidenceRule, test: &LabeledDataset, theta: Threshold) -> Result<f64> {
    let error = error_rate(rule, test)?;
    let info = information(rule, &test.features)?;
    Ok(error + theta.value() * info)
}

/// The ideal set at `x` under the exact posterior: `{k : p_k(x) >= theta}`.
fn oracle_set(dist: &Population, theta: f64, scores: &[f64]) -> ConfidenceSet {
    let space = LabelSpace::new(dist.k()).expect("K >= 2");
    let mut set = ConfidenceSet::empty(space);
    for (idx, &p) in scores.iter().enumerate() {
        if p >= theta {
            set.insert(idx as u32 + 1).expect("label in range");
        }
    }
    set
}

/// Excess risk of `rule` against the exact-posterior rule thresholded at
/// `theta_star`, in the weighted-symmetric-difference form
///
/// ```text
/// (1/M) sum_i sum_k |p_k(X_i) - theta*| 1{ k in Gamma(X_i) xor Gamma*(X_i) }
/// ```
///
/// Nonnegative by construction; exactly zero when `rule` is the oracle rule
/// at the same threshold.
pub fn excess_risk(
    rule: &ConfidenceRule,
    dist: &Population,
    theta_star: Threshold,
    features: &Matrix,
) -> Result<f64> {
    if features.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if rule.k_classes() != dist.k() {
        return Err(Error::LabelSpaceMismatch(rule.k_classes(), dist.k()));
    }
    let theta = theta_star.value();
    let k = dist.k() as usize;
    let mut exact = vec![0.0; k];
    let mut scores = vec![0.0; k];
    let mut total = 0.0;
    for row in features.iter_rows() {
        dist.posterior_into(row, &mut exact)?;
        rule.model().predict_into(row, &mut scores)?;
        let predicted = rule.set_from_scores(&scores);
        let ideal = oracle_set(dist, theta, &exact);
        for (idx, &p) in exact.iter().enumerate() {
            let label = idx as u32 + 1;
            if predicted.contains(label) != ideal.contains(label) {
                total += (p - theta).abs();
            }
        }
    }
    Ok(total / features.rows() as f64)
}

/// Discrepancy `|P(Gamma) - P(Gamma*)| + |beta - I(Gamma)|` with the oracle
/// error supplied as a precomputed scalar.
pub fn discrepancy(
    rule: &ConfidenceRule,
    oracle_error: f64,
    beta: u32,
    test: &LabeledDataset,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&oracle_error) {
        return Err(Error::param(
            "oracle_error",
            format!("need a probability, got {oracle_error}"),
        ));
    }
    let error = error_rate(rule, test)?;
    let info = information(rule, &test.features)?;
    Ok((error - oracle_error).abs() + (f64::from(beta) - info).abs())
}

/// Per-field sample mean and `B - 1`-denominator standard deviation across
/// repetitions. A single repetition yields zero standard deviations and sets
/// the warning flag.
pub fn aggregate(samples: &[RiskSample], config_digest: &str) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let b = samples.len();
    let stat = |field: fn(&RiskSample) -> f64| -> (f64, f64) {
        let mean = samples.iter().map(field).sum::<f64>() / b as f64;
        let std = if b > 1 {
            let ss = samples
                .iter()
                .map(|s| {
                    let d = field(s) - mean;
                    d * d
                })
                .sum::<f64>();
            (ss / (b - 1) as f64).sqrt()
        } else {
            0.0
        };
        (mean, std)
    };
    let (error_mean, error_std) = stat(|s| s.error);
    let (info_mean, info_std) = stat(|s| s.info);
    let (hamming_mean, hamming_std) = stat(|s| s.hamming);
    let (excess_mean, excess_std) = stat(|s| s.excess);
    let (discrepancy_mean, discrepancy_std) = stat(|s| s.discrepancy);
    if b == 1 {
        log::warn!("aggregating a single repetition: standard deviations are degenerate");
    }
    Ok(EvalReport {
        error_mean,
        error_std,
        info_mean,
        info_std,
        hamming_mean,
        hamming_std,
        excess_mean,
        excess_std,
        discrepancy_mean,
        discrepancy_std,
        repetitions: b,
        config_digest: config_digest.to_owned(),
        single_repetition_warning: b == 1,
    })
}

/// Mean conditional error `(1/M) sum_i (1 - sum_{k in Gamma(X_i)} p_k(X_i))`
/// under the exact posterior: the label-free counterpart of [`error_rate`],
/// used where identities must hold pathwise in the features.
pub fn expected_error(
    rule: &ConfidenceRule,
    dist: &Population,
    features: &Matrix,
) -> Result<f64> {
    if features.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = dist.k() as usize;
    let mut exact = vec![0.0; k];
    let mut scores = vec![0.0; k];
    let mut total = 0.0;
    for row in features.iter_rows() {
        dist.posterior_into(row, &mut exact)?;
        rule.model().predict_into(row, &mut scores)?;
        let set = rule.set_from_scores(&scores);
        let covered: f64 = exact
            .iter()
            .enumerate()
            .filter(|(idx, _)| set.contains(*idx as u32 + 1))
            .map(|(_, &p)| p)
            .sum();
        total += 1.0 - covered;
    }
    Ok(total / features.rows() as f64)
}
