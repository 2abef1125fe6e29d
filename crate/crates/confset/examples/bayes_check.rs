//! Scratch: Bayes error of the mixture under parameter variants.

use confset::distgen::MixtureSpec;
use confset::probest::mixture_posterior;
use confset::rng::derive_seed;
use confset::types::Matrix;

fn bayes_and_oracle_error(spec: &MixtureSpec, scale: f64, n: usize, seed: u64) {
    // Features drawn at covariance scale^2 * I around the labeled mean; the
    // posterior for that model is softmax(-|x - mu|^2 / (2 scale^2)), which
    // equals mixture_posterior on rescaled coordinates x/scale, mu/scale.
    let k = spec.k();
    let d = spec.dim();
    let scaled_means: Vec<f64> = (1..=k)
        .flat_map(|c| spec.mean(c).iter().map(|v| v / scale).collect::<Vec<_>>())
        .collect();
    let scaled =
        MixtureSpec::with_means(Matrix::from_rows(scaled_means, k as usize, d).unwrap()).unwrap();
    let data = scaled.sample_labeled(n, seed).unwrap();
    let mut bayes_miss = 0usize;
    let mut top2_miss = 0usize;
    let mut top5_miss = 0usize;
    for i in 0..n {
        let p = mixture_posterior(data.features.row(i), &scaled).unwrap();
        let mut order: Vec<usize> = (0..k as usize).collect();
        order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
        let y = (data.labels[i] - 1) as usize;
        if order[0] != y {
            bayes_miss += 1;
        }
        if !order[..2].contains(&y) {
            top2_miss += 1;
        }
        if !order[..5].contains(&y) {
            top5_miss += 1;
        }
    }
    println!(
        "scale {scale}: bayes {:.3} top2 {:.3} top5 {:.4}",
        bayes_miss as f64 / n as f64,
        top2_miss as f64 / n as f64,
        top5_miss as f64 / n as f64
    );
}

fn main() {
    let n = 100_000;
    for master in [7u64, 1] {
        let spec = MixtureSpec::sample(10, 10, derive_seed(master, 0, "means")).unwrap();
        println!("-- K=10 means from master {master}, range [0,4]^10 --");
        for scale in [1.0, 1.5, 2.0, 2.5] {
            bayes_and_oracle_error(&spec, scale, n, derive_seed(master, 1, "bayes"));
        }
    }
    let spec = MixtureSpec::sample(100, 10, derive_seed(7, 0, "means")).unwrap();
    println!("-- K=100 means from master 7, range [0,4]^10 --");
    for scale in [1.0, 2.0] {
        bayes_and_oracle_error(&spec, scale, n, derive_seed(7, 1, "bayes"));
    }
}
