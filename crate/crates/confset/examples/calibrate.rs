//! Scratch calibration runs (not part of the deliverable test suite).

use confset::bench::{
    run_inconsistency_experiment, run_oracle_table, run_plugin_table, run_rate_sweep,
    DistributionSpec, EstimatorKind, ExperimentConfig, Protocol, SweepAxis,
};
use confset::distgen::{PathologySpec, Population};
use confset::gfun::mc_true_threshold;
use confset::rng::derive_seed;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if which == "threshold" || which == "all" {
        // Criterion 6 knife edge: where does the MC threshold land per seed?
        let pop = Population::Pathology(PathologySpec::new(2, 10).unwrap());
        for seed in 0..12u64 {
            let theta =
                mc_true_threshold(&pop, 2, 1_000_000, derive_seed(seed, 0, "theta-star"))
                    .unwrap();
            println!("pathology theta (master {seed}): {:.6}", theta.value());
        }
    }

    if which == "oracle" || which == "all" {
        for master in [7u64, 1, 2, 3] {
            let mut cfg = ExperimentConfig::new(
                DistributionSpec::Mixture { k: 10, d: 10 },
                vec![2, 5],
                master,
            );
            cfg.mc_oracle_size = 1_000_000;
            let t = std::time::Instant::now();
            let report = run_oracle_table(&cfg, None).unwrap();
            for row in &report.rows {
                println!(
                    "master {master} {} beta={} err {:.4} ({:.4}) info {:.3} ({:.3}) ham {:.4} exc {:.5} disc {:.4} [{} ms]",
                    row.rule,
                    row.beta,
                    row.report.error_mean,
                    row.report.error_std,
                    row.report.info_mean,
                    row.report.info_std,
                    row.report.hamming_mean,
                    row.report.excess_mean,
                    row.report.discrepancy_mean,
                    t.elapsed().as_millis(),
                );
            }
        }
    }

    if which == "plugin" || which == "all" {
        let noise: f64 = std::env::args()
            .nth(2)
            .and_then(|s| s.parse().ok())
            .unwrap_or(confset::gfun::DEFAULT_NOISE_STD);
        for master in [7u64, 1] {
            let mut cfg = ExperimentConfig::new(
                DistributionSpec::Mixture { k: 10, d: 10 },
                vec![2, 5],
                master,
            );
            cfg.estimator = EstimatorKind::Softmax {
                l2: 1e-3,
                iters: 2000,
                step: 0.5,
            };
            cfg.noise_std = noise;
            cfg.protocol = Protocol::Paper43;
            cfg.mc_oracle_size = 1_000_000;
            let t = std::time::Instant::now();
            let report = run_plugin_table(&cfg, None).unwrap();
            for row in &report.rows {
                println!(
                    "master {master} {} beta={} err {:.4} ({:.4}) info {:.3} ({:.3}) [{} ms]",
                    row.rule,
                    row.beta,
                    row.report.error_mean,
                    row.report.error_std,
                    row.report.info_mean,
                    row.report.info_std,
                    t.elapsed().as_millis(),
                );
            }
        }
    }

    if which == "pathology" || which == "all" {
        for master in [7u64, 1, 2] {
            let mut cfg = ExperimentConfig::new(
                DistributionSpec::Pathology { beta: 2, k: 10, d: 2 },
                vec![2],
                master,
            );
            cfg.m = 100_000;
            cfg.mc_oracle_size = 1_000_000;
            let report = run_inconsistency_experiment(&cfg).unwrap();
            println!(
                "master {master} top-beta excess {:.5} (half bound {:.5}) oracle excess {:.6}",
                report.top_beta_excess, report.half_bound, report.oracle_excess
            );
        }
    }

    if which == "sweep" || which == "all" {
        let noise: f64 = std::env::args()
            .nth(2)
            .and_then(|s| s.parse().ok())
            .unwrap_or(confset::gfun::DEFAULT_NOISE_STD);
        let mut cfg = ExperimentConfig::new(
            DistributionSpec::Mixture { k: 10, d: 10 },
            vec![2],
            7,
        );
        cfg.estimator = EstimatorKind::Oracle;
        cfg.n = 1000;
        cfg.m = 1_000_000;
        cfg.reps = 100;
        cfg.noise_std = noise;
        let t = std::time::Instant::now();
        let axis = SweepAxis::UnlabeledGrid {
            sizes: vec![100, 1_000, 10_000, 100_000],
        };
        let report = run_rate_sweep(&cfg, &axis, None).unwrap();
        println!(
            "unlabeled sweep: sse slope {:.3} ({:.3}), se slope {:.3} ({:.3}) [{} ms]",
            report.semi_supervised_slope,
            report.semi_supervised_stderr,
            report.supervised_slope,
            report.supervised_stderr,
            t.elapsed().as_millis(),
        );
        for p in &report.points {
            println!(
                "  {} n={} N={} pool={} dev {:.5} ({:.5})",
                p.rule, p.n, p.n_unlabeled, p.pool_size, p.mean_deviation, p.std_deviation
            );
        }

        let t = std::time::Instant::now();
        let axis = SweepAxis::LabeledGrid {
            sizes: vec![100, 1_000, 10_000, 100_000],
        };
        let report = run_rate_sweep(&cfg, &axis, None).unwrap();
        println!(
            "labeled sweep: se slope {:.3} ({:.3}) [{} ms]",
            report.supervised_slope,
            report.supervised_stderr,
            t.elapsed().as_millis(),
        );
        for p in &report.points {
            if p.rule == "se-plugin" {
                println!(
                    "  {} n={} pool={} dev {:.5} ({:.5})",
                    p.rule, p.n, p.pool_size, p.mean_deviation, p.std_deviation
                );
            }
        }
    }
}
