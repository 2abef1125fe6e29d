//! Experiment orchestration: table reproduction, the fixed-cardinality
//! inconsistency experiment, and rate sweeps.
//!
//! Every run is driven by a serializable [`ExperimentConfig`]; all randomness
//! derives from `master_seed` through `(seed, repetition, purpose)` hashing,
//! so identical configs produce byte-identical CSV output regardless of the
//! worker-pool size. Repetitions are independent jobs; aggregation is a
//! single-threaded reduce.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distgen::{MixtureSpec, PathologySpec, Population};
use crate::gfun::{self, EmpiricalG, Threshold};
use crate::metrics;
use crate::probest::{ProbModel, SoftmaxHyper};
use crate::rng::derive_seed;
use crate::rules::{self, ConfidenceRule, EstimatorChoice};
use crate::types::{EvalReport, LabeledDataset, Matrix, RiskSample};
use crate::{Error, Result};

/// Sample size for the high-precision oracle-error reference used by the
/// discrepancy metric.
const ORACLE_REF_SIZE: usize = 100_000;

/// Which data-generating process an experiment runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Mixture { k: u32, d: usize },
    Pathology { beta: u32, k: u32, d: usize },
}

/// Which probability estimator plug-in runs fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    Oracle,
    Knn { k_neighbors: Option<usize> },
    Softmax { l2: f64, iters: usize, step: f64 },
}

impl Default for EstimatorKind {
    fn default() -> Self {
        EstimatorKind::Softmax {
            l2: 1e-3,
            iters: 2000,
            step: 0.5,
        }
    }
}

/// Which fitting pipeline plug-in runs use.
///
/// The table-reproduction protocol fits the model on all of `D_n` and
/// calibrates the threshold on `D_N` alone; the analyzed estimator fits on
/// the first half of `D_n` and pools the held-out half with `D_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Paper43,
    Analyzed41,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub betas: Vec<u32>,
    /// Labeled sample size per repetition.
    pub n: usize,
    /// Unlabeled sample size per repetition.
    pub n_unlabeled: usize,
    /// Test sample size per repetition.
    pub m: usize,
    /// Repetitions.
    pub reps: usize,
    pub estimator: EstimatorKind,
    pub protocol: Protocol,
    pub master_seed: u64,
    /// Continuity-perturbation scale for threshold calibration.
    pub noise_std: f64,
    /// Monte-Carlo size for population-threshold references.
    pub mc_oracle_size: usize,
}

impl ExperimentConfig {
    pub fn new(distribution: DistributionSpec, betas: Vec<u32>, master_seed: u64) -> Self {
        ExperimentConfig {
            distribution,
            betas,
            n: 1000,
            n_unlabeled: 10_000,
            m: 1000,
            reps: 20,
            estimator: EstimatorKind::default(),
            protocol: Protocol::Paper43,
            master_seed,
            noise_std: gfun::DEFAULT_NOISE_STD,
            mc_oracle_size: gfun::DEFAULT_MC_SIZE,
        }
    }

    pub fn k(&self) -> u32 {
        match self.distribution {
            DistributionSpec::Mixture { k, .. } => k,
            DistributionSpec::Pathology { k, .. } => k,
        }
    }

    /// Materialize the distribution; mixture means derive from the master
    /// seed.
    pub fn population(&self) -> Result<Population> {
        match self.distribution {
            DistributionSpec::Mixture { k, d } => Ok(Population::Mixture(MixtureSpec::sample(
                k,
                d,
                derive_seed(self.master_seed, 0, "means"),
            )?)),
            DistributionSpec::Pathology { beta, k, d } => {
                Ok(Population::Pathology(PathologySpec::with_geometry(
                    beta,
                    k,
                    d,
                    PathologySpec::DEFAULT_R1,
                    PathologySpec::DEFAULT_R2,
                    PathologySpec::DEFAULT_R3,
                    PathologySpec::DEFAULT_C_L,
                )?))
            }
        }
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(Error::param("betas", "need at least one beta"));
        }
        for &beta in &self.betas {
            if beta < 1 || beta >= self.k() {
                return Err(Error::BetaOutOfRange {
                    beta: f64::from(beta),
                    lo: 1.0,
                    hi: f64::from(self.k() - 1),
                });
            }
        }
        if self.n == 0 || self.m == 0 || self.reps == 0 {
            return Err(Error::param("sizes", "n, m, and reps must be at least 1"));
        }
        if self.noise_std < 0.0 {
            return Err(Error::param("noise_std", "must be nonnegative"));
        }
        Ok(())
    }

    fn estimator_choice(&self, pop: &Population) -> EstimatorChoice {
        match self.estimator {
            EstimatorKind::Oracle => EstimatorChoice::Oracle { dist: pop.clone() },
            EstimatorKind::Knn { k_neighbors } => EstimatorChoice::Knn { k_neighbors },
            EstimatorKind::Softmax { l2, iters, step } => EstimatorChoice::Softmax {
                hyper: SoftmaxHyper { l2, iters, step },
            },
        }
    }

    fn distribution_name(&self) -> String {
        match self.distribution {
            DistributionSpec::Mixture { k, d } => format!("mixture-k{k}-d{d}"),
            DistributionSpec::Pathology { beta, k, d } => format!("pathology-b{beta}-k{k}-d{d}"),
        }
    }
}

/// One aggregated CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub distribution: String,
    pub rule: String,
    pub beta: u32,
    pub n: usize,
    pub n_unlabeled: usize,
    pub m: usize,
    pub reps: usize,
    #[serde(flatten)]
    pub report: EvalReport,
    pub seed: u64,
}

/// A finished experiment: rows plus provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ExperimentConfig,
    pub digest: String,
    pub library_version: String,
    pub duration_ms: u128,
    pub rows: Vec<ReportRow>,
}

pub const CSV_HEADER: &str = "distribution,rule,beta,n,N,M,B,error_mean,error_std,info_mean,info_std,hamming_mean,hamming_std,excess_mean,excess_std,discrepancy_mean,discrepancy_std,seed,digest";

impl BenchReport {
    /// Deterministic CSV: fixed schema, shortest round-trip float formatting,
    /// no timing columns.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "{CSV_HEADER}")?;
        for row in &self.rows {
            let r = &row.report;
            writeln!(
                writer,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.distribution,
                row.rule,
                row.beta,
                row.n,
                row.n_unlabeled,
                row.m,
                row.reps,
                r.error_mean,
                r.error_std,
                r.info_mean,
                r.info_std,
                r.hamming_mean,
                r.hamming_std,
                r.excess_mean,
                r.excess_std,
                r.discrepancy_mean,
                r.discrepancy_std,
                row.seed,
                r.config_digest,
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

fn worker_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    builder
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))
}

/// Population threshold and high-precision oracle error for each beta.
fn oracle_references(
    cfg: &ExperimentConfig,
    pop: &Population,
) -> Result<Vec<(u32, Threshold, f64)>> {
    cfg.betas
        .iter()
        .map(|&beta| {
            let theta = gfun::mc_true_threshold(
                pop,
                beta,
                cfg.mc_oracle_size,
                derive_seed(cfg.master_seed, u64::from(beta), "theta-star"),
            )?;
            let reference = rules::threshold_rule(ProbModel::oracle(pop.clone()), beta, theta);
            let sample = pop.sample_labeled(
                ORACLE_REF_SIZE,
                derive_seed(cfg.master_seed, u64::from(beta), "oracle-ref"),
            )?;
            let error = metrics::error_rate(&reference, &sample)?;
            Ok((beta, theta, error))
        })
        .collect()
}

fn risk_sample(
    rule: &ConfidenceRule,
    reference: &ConfidenceRule,
    pop: &Population,
    theta: Threshold,
    oracle_error: f64,
    beta: u32,
    test: &LabeledDataset,
) -> Result<RiskSample> {
    Ok(RiskSample {
        error: metrics::error_rate(rule, test)?,
        info: metrics::information(rule, &test.features)?,
        hamming: metrics::hamming(rule, reference, &test.features)?,
        excess: metrics::excess_risk(rule, pop, theta, &test.features)?,
        discrepancy: metrics::discrepancy(rule, oracle_error, beta, test)?,
        test_size: test.n(),
    })
}

fn finish(
    cfg: &ExperimentConfig,
    start: Instant,
    rows: Vec<ReportRow>,
) -> BenchReport {
    BenchReport {
        config: cfg.clone(),
        digest: cfg.digest(),
        library_version: env!("CARGO_PKG_VERSION").to_owned(),
        duration_ms: start.elapsed().as_millis(),
        rows,
    }
}

/// Reproduce the oracle tables: per repetition, calibrate the ideal rule's
/// threshold on a fresh unlabeled sample of exact-posterior scores, then
/// score it (and the fixed-cardinality ideal rule) on a fresh test sample.
pub fn run_oracle_table(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<BenchReport> {
    cfg.validate()?;
    if cfg.n_unlabeled == 0 {
        return Err(Error::param("n_unlabeled", "the oracle table needs N >= 1"));
    }
    let start = Instant::now();
    let pop = cfg.population()?;
    let refs = oracle_references(cfg, &pop)?;
    let pool = worker_pool(threads)?;

    type RepSamples = Vec<(RiskSample, RiskSample)>;
    let per_rep: Vec<Result<RepSamples>> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let rep = rep as u64;
                let unlabeled = pop
                    .sample_unlabeled(cfg.n_unlabeled, derive_seed(cfg.master_seed, rep, "pool"));
                let test =
                    pop.sample_labeled(cfg.m, derive_seed(cfg.master_seed, rep, "test"))?;
                let pool_scores = gfun::exact_posterior_scores_of(&pop, &unlabeled.features)?;
                let empirical = EmpiricalG::build(&pool_scores)?;
                refs.iter()
                    .map(|&(beta, theta_star, oracle_error)| {
                        let theta_hat = empirical.generalized_inverse(f64::from(beta))?;
                        let approx = rules::threshold_rule(
                            ProbModel::oracle(pop.clone()),
                            beta,
                            theta_hat,
                        );
                        let top =
                            rules::fit_top_beta(ProbModel::oracle(pop.clone()), beta)?;
                        let reference =
                            rules::threshold_rule(ProbModel::oracle(pop.clone()), beta, theta_star);
                        let a = risk_sample(
                            &approx, &reference, &pop, theta_star, oracle_error, beta, &test,
                        )?;
                        let b = risk_sample(
                            &top, &reference, &pop, theta_star, oracle_error, beta, &test,
                        )?;
                        Ok((a, b))
                    })
                    .collect()
            })
            .collect()
    });

    let mut rows = Vec::new();
    let digest = cfg.digest();
    let collected: Vec<RepSamples> = per_rep.into_iter().collect::<Result<_>>()?;
    for (idx, &(beta, _, _)) in refs.iter().enumerate() {
        for (name, pick) in [
            ("beta-oracle", 0usize),
            ("top-beta-oracle", 1usize),
        ] {
            let samples: Vec<RiskSample> = collected
                .iter()
                .map(|rep| if pick == 0 { rep[idx].0 } else { rep[idx].1 })
                .collect();
            rows.push(ReportRow {
                distribution: cfg.distribution_name(),
                rule: name.to_owned(),
                beta,
                n: 0,
                n_unlabeled: cfg.n_unlabeled,
                m: cfg.m,
                reps: cfg.reps,
                report: metrics::aggregate(&samples, &digest)?,
                seed: cfg.master_seed,
            });
        }
    }
    Ok(finish(cfg, start, rows))
}

/// Reproduce the plug-in tables: per repetition, fit the configured
/// estimator, calibrate the threshold per protocol, and score the plug-in
/// rule and the top-`beta` rule built on the same fitted model.
pub fn run_plugin_table(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<BenchReport> {
    cfg.validate()?;
    if cfg.protocol == Protocol::Paper43 && cfg.n_unlabeled == 0 {
        return Err(Error::param(
            "n_unlabeled",
            "protocol paper43 calibrates on D_N alone and needs N >= 1",
        ));
    }
    if cfg.n < 2 {
        return Err(Error::param("n", "plug-in fits need n >= 2"));
    }
    let start = Instant::now();
    let pop = cfg.population()?;
    let refs = oracle_references(cfg, &pop)?;
    let pool = worker_pool(threads)?;
    let choice = cfg.estimator_choice(&pop);

    type RepSamples = Vec<(RiskSample, RiskSample)>;
    let per_rep: Vec<Result<RepSamples>> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let rep = rep as u64;
                let train =
                    pop.sample_labeled(cfg.n, derive_seed(cfg.master_seed, rep, "train"))?;
                let unlabeled = pop
                    .sample_unlabeled(cfg.n_unlabeled, derive_seed(cfg.master_seed, rep, "pool"));
                let test =
                    pop.sample_labeled(cfg.m, derive_seed(cfg.master_seed, rep, "test"))?;
                let (model, calibration): (ProbModel, Matrix) = match cfg.protocol {
                    Protocol::Paper43 => {
                        let model = fit_choice_model(&train, &choice)?;
                        (model, unlabeled.features.clone())
                    }
                    Protocol::Analyzed41 => {
                        let (head, held_out) = train.split_half();
                        let model = fit_choice_model(&head, &choice)?;
                        let mut data = Vec::with_capacity(
                            (held_out.n() + unlabeled.n()) * train.dim(),
                        );
                        data.extend_from_slice(held_out.features.values());
                        data.extend_from_slice(unlabeled.features.values());
                        let pool_features = Matrix::from_rows(
                            data,
                            held_out.n() + unlabeled.n(),
                            train.dim(),
                        )?;
                        (model, pool_features)
                    }
                };
                let perturb_seed = derive_seed(cfg.master_seed, rep, "perturb");
                refs.iter()
                    .map(|&(beta, theta_star, oracle_error)| {
                        let plugin = rules::fit_with_pool(
                            model.clone(),
                            &calibration,
                            beta,
                            cfg.noise_std,
                            perturb_seed,
                        )?;
                        let top = rules::fit_top_beta(model.clone(), beta)?;
                        let reference =
                            rules::threshold_rule(ProbModel::oracle(pop.clone()), beta, theta_star);
                        let a = risk_sample(
                            &plugin, &reference, &pop, theta_star, oracle_error, beta, &test,
                        )?;
                        let b = risk_sample(
                            &top, &reference, &pop, theta_star, oracle_error, beta, &test,
                        )?;
                        Ok((a, b))
                    })
                    .collect()
            })
            .collect()
    });

    let plugin_name = if cfg.n_unlabeled > 0 { "sse-plugin" } else { "se-plugin" };
    let mut rows = Vec::new();
    let digest = cfg.digest();
    let collected: Vec<RepSamples> = per_rep.into_iter().collect::<Result<_>>()?;
    for (idx, &(beta, _, _)) in refs.iter().enumerate() {
        for (name, pick) in [(plugin_name, 0usize), ("top-beta", 1usize)] {
            let samples: Vec<RiskSample> = collected
                .iter()
                .map(|rep| if pick == 0 { rep[idx].0 } else { rep[idx].1 })
                .collect();
            rows.push(ReportRow {
                distribution: cfg.distribution_name(),
                rule: name.to_owned(),
                beta,
                n: cfg.n,
                n_unlabeled: cfg.n_unlabeled,
                m: cfg.m,
                reps: cfg.reps,
                report: metrics::aggregate(&samples, &digest)?,
                seed: cfg.master_seed,
            });
        }
    }
    Ok(finish(cfg, start, rows))
}

fn fit_choice_model(train: &LabeledDataset, choice: &EstimatorChoice) -> Result<ProbModel> {
    match choice {
        EstimatorChoice::Oracle { dist } => Ok(ProbModel::oracle(dist.clone())),
        EstimatorChoice::Knn { k_neighbors } => {
            let k = k_neighbors
                .unwrap_or_else(|| crate::probest::default_knn_neighbors(train.n()));
            crate::probest::fit_knn(train, k)
        }
        EstimatorChoice::Softmax { hyper } => crate::probest::fit_softmax(train, *hyper),
    }
}

/// Outcome of the fixed-cardinality inconsistency experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InconsistencyReport {
    pub config: ExperimentConfig,
    pub digest: String,
    pub library_version: String,
    pub duration_ms: u128,
    pub beta: u32,
    pub test_size: usize,
    /// Analytic excess-risk floor `beta / (8 (beta + 1)^2)` for any
    /// fixed-cardinality rule on this distribution.
    pub analytic_bound: f64,
    /// Half the analytic bound: the Monte-Carlo acceptance line.
    pub half_bound: f64,
    /// Excess risk of the exact-posterior top-`beta` rule.
    pub top_beta_excess: f64,
    /// Excess risk of the Monte-Carlo oracle rule (independent threshold
    /// draw); zero up to threshold Monte-Carlo error.
    pub oracle_excess: f64,
    pub top_beta_exceeds_half_bound: bool,
}

/// Excess risk of the best fixed-cardinality rule (top-`beta` on the exact
/// posterior) versus the threshold oracle, on the pathology distribution.
pub fn run_inconsistency_experiment(cfg: &ExperimentConfig) -> Result<InconsistencyReport> {
    let start = Instant::now();
    let beta = match cfg.distribution {
        DistributionSpec::Pathology { beta, .. } => beta,
        DistributionSpec::Mixture { .. } => {
            return Err(Error::param(
                "distribution",
                "the inconsistency experiment runs on the pathology distribution",
            ))
        }
    };
    if beta < 2 {
        return Err(Error::param("beta", "the excess-risk bound is vacuous for beta < 2"));
    }
    let pop = cfg.population()?;
    let theta_star = gfun::mc_true_threshold(
        &pop,
        beta,
        cfg.mc_oracle_size,
        derive_seed(cfg.master_seed, 0, "theta-star"),
    )?;
    let test = pop.sample_unlabeled(cfg.m, derive_seed(cfg.master_seed, 0, "pathology-test"));
    let top = rules::fit_top_beta(ProbModel::oracle(pop.clone()), beta)?;
    let top_beta_excess = metrics::excess_risk(&top, &pop, theta_star, &test.features)?;
    let oracle = rules::fit_oracle(
        &pop,
        beta,
        cfg.mc_oracle_size,
        derive_seed(cfg.master_seed, 1, "oracle-theta"),
    )?;
    let oracle_excess = metrics::excess_risk(&oracle, &pop, theta_star, &test.features)?;
    let b = f64::from(beta);
    let analytic_bound = b / (8.0 * (b + 1.0) * (b + 1.0));
    Ok(InconsistencyReport {
        config: cfg.clone(),
        digest: cfg.digest(),
        library_version: env!("CARGO_PKG_VERSION").to_owned(),
        duration_ms: start.elapsed().as_millis(),
        beta,
        test_size: cfg.m,
        analytic_bound,
        half_bound: 0.5 * analytic_bound,
        top_beta_excess,
        oracle_excess,
        top_beta_exceeds_half_bound: top_beta_excess >= 0.5 * analytic_bound,
    })
}

/// Sweep axis: grow the unlabeled pool at fixed `n`, or grow `n` with no
/// unlabeled data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum SweepAxis {
    UnlabeledGrid { sizes: Vec<usize> },
    LabeledGrid { sizes: Vec<usize> },
}

impl SweepAxis {
    fn sizes(&self) -> &[usize] {
        match self {
            SweepAxis::UnlabeledGrid { sizes } => sizes,
            SweepAxis::LabeledGrid { sizes } => sizes,
        }
    }

    fn validate(&self) -> Result<()> {
        let sizes = self.sizes();
        if sizes.len() < 4 {
            return Err(Error::DegenerateGrid(format!(
                "need at least 4 grid sizes, got {}",
                sizes.len()
            )));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DegenerateGrid("sizes must be strictly increasing".into()));
        }
        let span = sizes[sizes.len() - 1] as f64 / sizes[0] as f64;
        if span < 100.0 {
            return Err(Error::DegenerateGrid(format!(
                "grid must span at least two decades, got a factor of {span}"
            )));
        }
        Ok(())
    }
}

/// One grid point of a rate sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rule: String,
    pub n: usize,
    pub n_unlabeled: usize,
    /// Calibration-pool size actually used by the rule.
    pub pool_size: usize,
    /// Mean over repetitions of `|beta - I_hat|`.
    pub mean_deviation: f64,
    pub std_deviation: f64,
}

/// Least-squares slope of `log mean-deviation` against `log(n + N)` (or
/// `log n` on the labeled axis), with its standard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeReport {
    pub config: ExperimentConfig,
    pub digest: String,
    pub library_version: String,
    pub duration_ms: u128,
    pub beta: u32,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub semi_supervised_slope: f64,
    pub semi_supervised_stderr: f64,
    pub supervised_slope: f64,
    pub supervised_stderr: f64,
}

/// Information deviation `|beta - I_hat|` of supervised and semi-supervised
/// rules across a size grid, with log-log slopes.
///
/// Always runs the analyzed pipeline (model on the first half, threshold pool
/// = held-out half plus unlabeled rows): the split is what puts the `n`
/// dependence into the supervised threshold. A repetition shares its data
/// across grid points through common random numbers — larger pools extend
/// smaller ones — so grid points differ only by the quantity under study.
pub fn run_rate_sweep(
    cfg: &ExperimentConfig,
    axis: &SweepAxis,
    threads: Option<usize>,
) -> Result<SlopeReport> {
    cfg.validate()?;
    axis.validate()?;
    let start = Instant::now();
    let beta = cfg.betas[0];
    let pop = cfg.population()?;
    let choice = cfg.estimator_choice(&pop);
    let pool = worker_pool(threads)?;
    let sizes = axis.sizes().to_vec();

    // Per repetition and grid point: (sse deviation, se deviation).
    let per_rep: Vec<Result<Vec<(f64, f64)>>> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let rep = rep as u64;
                match axis {
                    SweepAxis::UnlabeledGrid { sizes } => sweep_unlabeled_rep(
                        cfg, &pop, &choice, beta, rep, sizes,
                    ),
                    SweepAxis::LabeledGrid { sizes } => {
                        sweep_labeled_rep(cfg, &pop, &choice, beta, rep, sizes)
                    }
                }
            })
            .collect()
    });
    let collected: Vec<Vec<(f64, f64)>> = per_rep.into_iter().collect::<Result<_>>()?;

    let mut points = Vec::new();
    let mut sse_xy = Vec::new();
    let mut se_xy = Vec::new();
    for (j, &size) in sizes.iter().enumerate() {
        let sse: Vec<f64> = collected.iter().map(|r| r[j].0).collect();
        let se: Vec<f64> = collected.iter().map(|r| r[j].1).collect();
        let (n, n_unlabeled, x) = match axis {
            SweepAxis::UnlabeledGrid { .. } => {
                (cfg.n, size, ((cfg.n + size) as f64).ln())
            }
            SweepAxis::LabeledGrid { .. } => (size, 0, (size as f64).ln()),
        };
        let half = n.div_ceil(2);
        let (sse_mean, sse_std) = mean_std(&sse);
        let (se_mean, se_std) = mean_std(&se);
        points.push(SweepPoint {
            rule: "sse-plugin".into(),
            n,
            n_unlabeled,
            pool_size: half + n_unlabeled,
            mean_deviation: sse_mean,
            std_deviation: sse_std,
        });
        points.push(SweepPoint {
            rule: "se-plugin".into(),
            n,
            n_unlabeled,
            pool_size: half,
            mean_deviation: se_mean,
            std_deviation: se_std,
        });
        sse_xy.push((x, sse_mean.max(f64::MIN_POSITIVE).ln()));
        se_xy.push((x, se_mean.max(f64::MIN_POSITIVE).ln()));
    }
    let (sse_slope, sse_err) = least_squares_slope(&sse_xy);
    let (se_slope, se_err) = least_squares_slope(&se_xy);
    Ok(SlopeReport {
        config: cfg.clone(),
        digest: cfg.digest(),
        library_version: env!("CARGO_PKG_VERSION").to_owned(),
        duration_ms: start.elapsed().as_millis(),
        beta,
        axis: axis.clone(),
        points,
        semi_supervised_slope: sse_slope,
        semi_supervised_stderr: sse_err,
        supervised_slope: se_slope,
        supervised_stderr: se_err,
    })
}

fn sweep_unlabeled_rep(
    cfg: &ExperimentConfig,
    pop: &Population,
    choice: &EstimatorChoice,
    beta: u32,
    rep: u64,
    sizes: &[usize],
) -> Result<Vec<(f64, f64)>> {
    let max_unlabeled = *sizes.last().expect("validated nonempty");
    let train = pop.sample_labeled(cfg.n, derive_seed(cfg.master_seed, rep, "train"))?;
    let (head, held_out) = train.split_half();
    let model = fit_choice_model(&head, choice)?;
    let unlabeled =
        pop.sample_unlabeled(max_unlabeled, derive_seed(cfg.master_seed, rep, "pool"));
    let held_scores = model.score_matrix(&held_out.features)?;
    let pool_scores = model.score_matrix(&unlabeled.features)?;
    let stacked = held_scores.vstack(&pool_scores)?;
    let perturbed = gfun::perturb_scores(
        &stacked,
        cfg.noise_std,
        derive_seed(cfg.master_seed, rep, "perturb"),
    )?;
    let test_scores = sorted_test_scores(cfg, pop, &model, rep)?;
    let k = model.k_classes() as usize;
    let half = held_out.n();

    // Supervised threshold: the held-out prefix only; identical across cells.
    let se_theta = inverse_of_prefix(&perturbed, half, k, beta)?;
    let se_dev = info_deviation(&test_scores, cfg.m, se_theta, beta);
    sizes
        .iter()
        .map(|&n_unlabeled| {
            let theta = inverse_of_prefix(&perturbed, half + n_unlabeled, k, beta)?;
            Ok((info_deviation(&test_scores, cfg.m, theta, beta), se_dev))
        })
        .collect()
}

fn sweep_labeled_rep(
    cfg: &ExperimentConfig,
    pop: &Population,
    choice: &EstimatorChoice,
    beta: u32,
    rep: u64,
    sizes: &[usize],
) -> Result<Vec<(f64, f64)>> {
    let max_n = *sizes.last().expect("validated nonempty");
    let full = pop.sample_labeled(max_n, derive_seed(cfg.master_seed, rep, "train"))?;
    let mut out = Vec::with_capacity(sizes.len());
    let mut cached_test: Option<(Vec<f64>, ProbModel)> = None;
    for &n in sizes {
        let prefix = LabeledDataset::new(
            Matrix::from_rows(
                full.features.values()[..n * full.dim()].to_vec(),
                n,
                full.dim(),
            )?,
            full.labels[..n].to_vec(),
            full.label_space(),
        )?;
        let (head, held_out) = prefix.split_half();
        let model = fit_choice_model(&head, choice)?;
        let held_scores = model.score_matrix(&held_out.features)?;
        let perturbed = gfun::perturb_scores(
            &held_scores,
            cfg.noise_std,
            derive_seed(cfg.master_seed, rep, "perturb"),
        )?;
        let theta = EmpiricalG::build(&perturbed)?.generalized_inverse(f64::from(beta))?;
        // The oracle model does not depend on the training prefix, so the
        // test scores can be shared; refit estimators rescore per n.
        let test_scores = match (&cached_test, choice) {
            (Some((scores, _)), EstimatorChoice::Oracle { .. }) => scores.clone(),
            _ => {
                let scores = sorted_test_scores(cfg, pop, &model, rep)?;
                cached_test = Some((scores.clone(), model.clone()));
                scores
            }
        };
        let dev = info_deviation(&test_scores, cfg.m, theta, beta);
        out.push((dev, dev));
    }
    Ok(out)
}

/// Model scores of a fresh test sample, pooled and sorted descending, so the
/// empirical information of any threshold rule is one binary search.
fn sorted_test_scores(
    cfg: &ExperimentConfig,
    pop: &Population,
    model: &ProbModel,
    rep: u64,
) -> Result<Vec<f64>> {
    let test = pop.sample_unlabeled(cfg.m, derive_seed(cfg.master_seed, rep, "test"));
    let scores = model.score_matrix(&test.features)?;
    let mut values = scores.values().to_vec();
    values.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(values)
}

fn inverse_of_prefix(
    perturbed: &crate::types::ScoreMatrix,
    rows: usize,
    k: usize,
    beta: u32,
) -> Result<Threshold> {
    let prefix = crate::types::ScoreMatrix::new(Matrix::from_rows(
        perturbed.values()[..rows * k].to_vec(),
        rows,
        k,
    )?)?;
    EmpiricalG::build(&prefix)?.generalized_inverse(f64::from(beta))
}

/// `| beta - I_hat(theta) |` where `I_hat` counts test scores `>= theta`
/// (inclusive, matching rule membership) and divides by the number of test
/// points.
fn info_deviation(sorted_desc: &[f64], m_points: usize, theta: Threshold, beta: u32) -> f64 {
    let count = sorted_desc.partition_point(|&v| v >= theta.value());
    (f64::from(beta) - count as f64 / m_points as f64).abs()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn least_squares_slope(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    let mean_x = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let residual_ss: f64 = xy
        .iter()
        .map(|p| {
            let fitted = mean_y + slope * (p.0 - mean_x);
            (p.1 - fitted) * (p.1 - fitted)
        })
        .sum();
    let dof = (xy.len() as f64 - 2.0).max(1.0);
    (slope, (residual_ss / dof / sxx).sqrt())
}
