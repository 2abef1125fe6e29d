//! Scratch: does means-range [0, 4/sqrt(2)] with identity covariance
//! reproduce the paper-table fingerprint at K = 10 and K = 100?

use confset::distgen::{MixtureSpec, Population};
use confset::gfun;
use confset::probest::mixture_posterior;
use confset::rng::derive_seed;
use confset::types::Matrix;

fn table(k: u32, betas: &[u32], master: u64, scale: f64) {
    let raw = MixtureSpec::sample(k, 10, derive_seed(master, 0, "means")).unwrap();
    let scaled_means: Vec<f64> = (1..=k)
        .flat_map(|c| raw.mean(c).iter().map(|v| v / scale).collect::<Vec<_>>())
        .collect();
    let spec =
        MixtureSpec::with_means(Matrix::from_rows(scaled_means, k as usize, 10).unwrap()).unwrap();
    let pop = Population::Mixture(spec.clone());

    let n = 200_000;
    let data = spec.sample_labeled(n, derive_seed(master, 1, "fp")).unwrap();
    let mut bayes_miss = 0usize;
    for i in 0..n {
        let p = mixture_posterior(data.features.row(i), &spec).unwrap();
        let best = (0..k as usize).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        if best != (data.labels[i] - 1) as usize {
            bayes_miss += 1;
        }
    }
    println!("K={k} scale={scale}: bayes {:.3}", bayes_miss as f64 / n as f64);

    for &beta in betas {
        let theta = gfun::mc_true_threshold(&pop, beta, 1_000_000, derive_seed(master, 2, "th"))
            .unwrap();
        let mut oracle_miss = 0usize;
        let mut top_miss = 0usize;
        let mut info_sum = 0usize;
        for i in 0..n {
            let p = mixture_posterior(data.features.row(i), &spec).unwrap();
            let y = (data.labels[i] - 1) as usize;
            let inside = p[y] >= theta.value();
            if !inside {
                oracle_miss += 1;
            }
            info_sum += p.iter().filter(|&&v| v >= theta.value()).count();
            let mut order: Vec<usize> = (0..k as usize).collect();
            order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
            if !order[..beta as usize].contains(&y) {
                top_miss += 1;
            }
        }
        println!(
            "  beta={beta}: oracle err {:.3} info {:.3} | top-beta err {:.3}",
            oracle_miss as f64 / n as f64,
            info_sum as f64 / n as f64,
            top_miss as f64 / n as f64
        );
    }
}

fn main() {
    let scale = std::f64::consts::SQRT_2;
    for master in [7u64, 1, 2] {
        table(10, &[2, 5], master, scale);
    }
    table(100, &[2, 5, 10, 20], 7, scale);
    table(100, &[2, 5, 10, 20], 1, scale);
}
