//! Benchmark data-generating processes.
//!
//! Two distributions, each exposing sampling and the exact class posterior:
//!
//! * [`MixtureSpec`] — the Gaussian-mixture benchmark: uniform label prior on
//!   `1..=K`, features `N(mu_k, I_d)` conditional on the label, class means
//!   drawn i.i.d. uniform on `[0, 4]^d`.
//! * [`PathologySpec`] — a distribution on a ball plus two annuli with
//!   cosine-modulated regression functions, built so that the ideal rule with
//!   expected set size `beta` outputs `beta + 1` classes on part of the
//!   support and the empty set elsewhere. Any rule constrained to a fixed
//!   cardinality pays a constant excess risk here, which is what the
//!   inconsistency experiment measures.
//!
//! On the pathology support the `beta + 1` "leading" classes share one score
//! and the remaining `K - beta - 1` classes share another. The cross-class
//! compensation terms divide by `K - beta - 1` (not `beta + 1`) so the scores
//! sum to one for every `K`; sign gaps, region masses, and the ideal sets are
//! unaffected.

use serde::{Deserialize, Serialize};

use crate::rng::{fill_standard_normal, stream};
use crate::types::{LabelSpace, LabeledDataset, Matrix, UnlabeledDataset};
use crate::{probest, Error, Result};

/// Gaussian-mixture benchmark: `K` means in `R^d`, identity covariance,
/// uniform label prior (both fixed, not parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    k_classes: u32,
    dim: usize,
    means: Matrix,
    seed_of_means: Option<u64>,
}

impl MixtureSpec {
    /// Upper edge of the mean-coordinate box used by [`Self::sample`]:
    /// `2 sqrt(2)`. With identity covariance, means on `[0, 2 sqrt(2)]^d`
    /// describe the same mixture as means on `[0, 4]^d` with noise variance
    /// 2, after scaling all coordinates by `1/sqrt(2)`; this is the geometry
    /// whose `K = 10, d = 10` benchmark has Bayes error near 0.22.
    pub const MEAN_BOX_EDGE: f64 = 2.0 * std::f64::consts::SQRT_2;

    /// Draw the `K` means i.i.d. uniform on `[0, MEAN_BOX_EDGE]^d`,
    /// deterministically in `seed`.
    pub fn sample(k_classes: u32, dim: usize, seed: u64) -> Result<Self> {
        let space = LabelSpace::new(k_classes)?;
        if dim == 0 {
            return Err(Error::param("dim", "need d >= 1"));
        }
        let mut rng = stream(seed);
        let mut means = Matrix::zeros(k_classes as usize, dim);
        for i in 0..k_classes as usize {
            for v in means.row_mut(i) {
                *v = rng.gen_range(0.0..Self::MEAN_BOX_EDGE);
            }
        }
        Ok(MixtureSpec {
            k_classes: space.k(),
            dim,
            means,
            seed_of_means: Some(seed),
        })
    }

    /// Build a mixture from explicit means (one row per class).
    pub fn with_means(means: Matrix) -> Result<Self> {
        let space = LabelSpace::new(means.rows() as u32)?;
        if means.cols() == 0 {
            return Err(Error::param("dim", "need d >= 1"));
        }
        means.check_finite()?;
        Ok(MixtureSpec {
            k_classes: space.k(),
            dim: means.cols(),
            means,
            seed_of_means: None,
        })
    }

    pub fn k(&self) -> u32 {
        self.k_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self, class: u32) -> &[f64] {
        self.means.row((class - 1) as usize)
    }

    pub fn label_space(&self) -> LabelSpace {
        LabelSpace::new(self.k_classes).expect("validated at construction")
    }

    /// Labels i.i.d. uniform on `1..=K`, features Gaussian around the labeled
    /// mean. Rows are drawn sequentially, so a longer sample with the same
    /// seed extends a shorter one.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut rng = stream(seed);
        let mut features = Matrix::zeros(n, self.dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = rng.gen_range(1..=self.k_classes);
            let row = features.row_mut(i);
            fill_standard_normal(&mut rng, row);
            for (v, mu) in row.iter_mut().zip(self.mean(label)) {
                *v += mu;
            }
            labels.push(label);
        }
        LabeledDataset::new(features, labels, self.label_space())
    }

    /// The feature marginal of [`Self::sample_labeled`] with labels discarded;
    /// `n = 0` yields an empty dataset.
    pub fn sample_unlabeled(&self, n: usize, seed: u64) -> UnlabeledDataset {
        if n == 0 {
            return UnlabeledDataset::empty(self.dim);
        }
        let labeled = self
            .sample_labeled(n, seed)
            .expect("n >= 1 cannot fail for a valid spec");
        UnlabeledDataset::new(labeled.features)
    }
}

use rand::Rng;

/// The ball-plus-two-annuli fixture used to falsify fixed-cardinality rules.
///
/// Support: `B(0, r1) + D(r2, 2 r2) + D(r3, 2 r3)` where `D(a, b)` is the
/// annulus `a <= |x| <= b`. The marginal density is `1` on the ball and
/// constant on each annulus, with region masses `w1`, `beta/(beta+1) - w1`,
/// and `1/(beta+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologySpec {
    beta: u32,
    k_classes: u32,
    dim: usize,
    r1: f64,
    r2: f64,
    r3: f64,
    c_l: f64,
}

impl PathologySpec {
    pub const DEFAULT_DIM: usize = 2;
    pub const DEFAULT_R1: f64 = 0.1;
    pub const DEFAULT_R2: f64 = 1.0;
    pub const DEFAULT_R3: f64 = 3.0;
    pub const DEFAULT_C_L: f64 = 1.0 / 16.0;

    /// Default geometry (`d = 2`, `r1 = 0.1`, `r2 = 1`, `r3 = 3`,
    /// `C_L = 1/16`).
    pub fn new(beta: u32, k_classes: u32) -> Result<Self> {
        Self::with_geometry(
            beta,
            k_classes,
            Self::DEFAULT_DIM,
            Self::DEFAULT_R1,
            Self::DEFAULT_R2,
            Self::DEFAULT_R3,
            Self::DEFAULT_C_L,
        )
    }

    pub fn with_geometry(
        beta: u32,
        k_classes: u32,
        dim: usize,
        r1: f64,
        r2: f64,
        r3: f64,
        c_l: f64,
    ) -> Result<Self> {
        LabelSpace::new(k_classes)?;
        if beta < 2 {
            return Err(Error::param("beta", "the construction needs beta >= 2"));
        }
        if k_classes < 2 * beta {
            return Err(Error::param(
                "k_classes",
                format!("need K >= 2 beta, got K = {k_classes}, beta = {beta}"),
            ));
        }
        if dim == 0 {
            return Err(Error::param("dim", "need d >= 1"));
        }
        if !(r1 > 0.0 && r1 < r2 && 2.0 * r2 < r3) {
            return Err(Error::param(
                "radii",
                format!("need 0 < r1 < r2 < 2 r2 < r3, got ({r1}, {r2}, {r3})"),
            ));
        }
        if !(c_l > 0.0 && c_l <= 0.125) {
            return Err(Error::param(
                "c_l",
                format!("need 0 < C_L <= 1/8 for the sign gaps, got {c_l}"),
            ));
        }
        let b = f64::from(beta);
        let w1 = ball_volume(dim, r1);
        if w1 > b / (2.0 * (b + 1.0)) {
            return Err(Error::param(
                "r1",
                format!(
                    "ball mass {w1:.6} exceeds the budget beta/(2(beta+1)) = {:.6}",
                    b / (2.0 * (b + 1.0))
                ),
            ));
        }
        Ok(PathologySpec {
            beta,
            k_classes,
            dim,
            r1,
            r2,
            r3,
            c_l,
        })
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn k(&self) -> u32 {
        self.k_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_space(&self) -> LabelSpace {
        LabelSpace::new(self.k_classes).expect("validated at construction")
    }

    /// Mass of `(ball, middle annulus, outer annulus)`.
    pub fn region_masses(&self) -> (f64, f64, f64) {
        let b = f64::from(self.beta);
        let w1 = ball_volume(self.dim, self.r1);
        (w1, b / (b + 1.0) - w1, 1.0 / (b + 1.0))
    }

    fn region_of(&self, norm: f64) -> Result<Region> {
        if norm <= self.r1 {
            Ok(Region::Ball)
        } else if norm >= self.r2 && norm <= 2.0 * self.r2 {
            Ok(Region::Middle)
        } else if norm >= self.r3 && norm <= 2.0 * self.r3 {
            Ok(Region::Outer)
        } else {
            Err(Error::OffSupport(norm))
        }
    }

    /// Exact posterior at a supported point; errors off the support.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k_classes as usize];
        self.posterior_into(x, &mut out)?;
        Ok(out)
    }

    pub fn posterior_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFiniteFeature { row: 0, col: 0 });
        }
        let region = self.region_of(norm)?;
        let lead = f64::from(self.beta) + 1.0;
        let rest = f64::from(self.k_classes) - lead;
        let (lead_score, rest_score) = match region {
            Region::Ball => {
                let c = self.c_l * (1.0 - (2.0 * std::f64::consts::PI * norm / self.r1).cos());
                (0.5 / lead + c / lead, 0.5 / rest - c / rest)
            }
            Region::Middle => {
                let c = self.c_l * (1.0 - (2.0 * std::f64::consts::PI * norm / self.r2).cos());
                (1.0 / lead - c / lead, c / rest)
            }
            Region::Outer => {
                let c = self.c_l * (1.0 - (2.0 * std::f64::consts::PI * norm / self.r3).cos());
                (0.25 / lead - c / lead, 0.75 / rest + c / rest)
            }
        };
        let lead_n = lead as usize;
        out[..lead_n].fill(lead_score);
        out[lead_n..].fill(rest_score);
        Ok(())
    }

    /// The threshold the construction is designed around, `1/(2(beta+1))`:
    /// the infimum of the leading-class scores on the ball, and the level
    /// whose threshold rule has expected set size exactly `beta`.
    pub fn design_threshold(&self) -> f64 {
        0.5 / (f64::from(self.beta) + 1.0)
    }

    /// Sample features and labels; labels are drawn from the exact posterior.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut rng = stream(seed);
        let mut features = Matrix::zeros(n, self.dim);
        let mut labels = Vec::with_capacity(n);
        let mut scores = vec![0.0; self.k_classes as usize];
        for i in 0..n {
            let row = features.row_mut(i);
            self.sample_point(&mut rng, row);
            let row = features.row(i);
            self.posterior_into(row, &mut scores)
                .expect("sampled points lie on the support");
            labels.push(sample_categorical(&mut rng, &scores));
        }
        LabeledDataset::new(features, labels, self.label_space())
    }

    pub fn sample_unlabeled(&self, n: usize, seed: u64) -> UnlabeledDataset {
        if n == 0 {
            return UnlabeledDataset::empty(self.dim);
        }
        let labeled = self
            .sample_labeled(n, seed)
            .expect("n >= 1 cannot fail for a valid spec");
        UnlabeledDataset::new(labeled.features)
    }

    /// One point: region by mass, then uniform on the ball or density
    /// `rho^(d-1)` radius on the annulus (inverse transform), direction
    /// uniform on the sphere via normalized Gaussians.
    fn sample_point(&self, rng: &mut rand_chacha::ChaCha12Rng, out: &mut [f64]) {
        let (w1, w2, _) = self.region_masses();
        let u: f64 = rng.gen();
        let d = self.dim as f64;
        let radius = if u < w1 {
            self.r1 * rng.gen::<f64>().powf(1.0 / d)
        } else if u < w1 + w2 {
            annulus_radius(rng.gen(), self.r2, d)
        } else {
            annulus_radius(rng.gen(), self.r3, d)
        };
        fill_standard_normal(rng, out);
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in out.iter_mut() {
                *v *= radius / norm;
            }
        } else {
            out.fill(0.0);
            out[0] = radius;
        }
    }
}

#[derive(Clone, Copy)]
enum Region {
    Ball,
    Middle,
    Outer,
}

/// Inverse-transform radius on `[a, 2a]` with density proportional to
/// `rho^(d-1)`.
fn annulus_radius(u: f64, a: f64, d: f64) -> f64 {
    a * (1.0 + u * (2f64.powf(d) - 1.0)).powf(1.0 / d)
}

/// Volume of the Euclidean ball of radius `r` in `d` dimensions, by the
/// two-step recursion `V_d = V_{d-2} * 2 pi r^2 / d`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0 * r,
        _ => ball_volume(dim - 2, r) * 2.0 * std::f64::consts::PI * r * r / dim as f64,
    }
}

fn sample_categorical(rng: &mut rand_chacha::ChaCha12Rng, probs: &[f64]) -> u32 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (idx, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return idx as u32 + 1;
        }
    }
    probs.len() as u32
}

/// A data distribution with a known exact posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Population {
    Mixture(MixtureSpec),
    Pathology(PathologySpec),
}

impl Population {
    pub fn k(&self) -> u32 {
        match self {
            Population::Mixture(spec) => spec.k(),
            Population::Pathology(spec) => spec.k(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Population::Mixture(spec) => spec.dim(),
            Population::Pathology(spec) => spec.dim(),
        }
    }

    pub fn label_space(&self) -> LabelSpace {
        match self {
            Population::Mixture(spec) => spec.label_space(),
            Population::Pathology(spec) => spec.label_space(),
        }
    }

    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k() as usize];
        self.posterior_into(x, &mut out)?;
        Ok(out)
    }

    pub fn posterior_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Population::Mixture(spec) => probest::mixture_posterior_into(x, spec, out),
            Population::Pathology(spec) => spec.posterior_into(x, out),
        }
    }

    pub fn sample_labeled(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        match self {
            Population::Mixture(spec) => spec.sample_labeled(n, seed),
            Population::Pathology(spec) => spec.sample_labeled(n, seed),
        }
    }

    pub fn sample_unlabeled(&self, n: usize, seed: u64) -> UnlabeledDataset {
        match self {
            Population::Mixture(spec) => spec.sample_unlabeled(n, seed),
            Population::Pathology(spec) => spec.sample_unlabeled(n, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_spec_is_deterministic_and_in_range() {
        let a = MixtureSpec::sample(100, 10, 42).unwrap();
        let b = MixtureSpec::sample(100, 10, 42).unwrap();
        assert_eq!(a, b);
        assert!(a
            .means
            .values()
            .iter()
            .all(|&v| (0.0..=MixtureSpec::MEAN_BOX_EDGE).contains(&v)));
        assert_ne!(a, MixtureSpec::sample(100, 10, 43).unwrap());
    }

    #[test]
    fn mixture_mean_coordinates_average_to_half_the_box() {
        // 1e5 Uniform[0, b] coordinates: std of the mean is (b/sqrt(12))/sqrt(1e5),
        // about 0.0026; allow a 5 sigma band.
        let spec = MixtureSpec::sample(10_000, 10, 7).unwrap();
        let vals = spec.means.values();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(
            (mean - MixtureSpec::MEAN_BOX_EDGE / 2.0).abs() < 0.015,
            "mean = {mean}"
        );
    }

    #[test]
    fn mixture_label_histogram_is_uniform() {
        let spec = MixtureSpec::sample(10, 10, 11).unwrap();
        let data = spec.sample_labeled(100_000, 12).unwrap();
        let mut counts = [0usize; 10];
        for &y in &data.labels {
            counts[(y - 1) as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / 100_000.0;
            assert!((freq - 0.1).abs() < 0.005, "freq = {freq}");
        }
    }

    #[test]
    fn mixture_class_conditional_means_match() {
        let means = Matrix::from_rows(vec![0.0, 0.0, 3.0, 1.0], 2, 2).unwrap();
        let spec = MixtureSpec::with_means(means).unwrap();
        let data = spec.sample_labeled(100_000, 5).unwrap();
        let mut sums = [[0.0; 2]; 2];
        let mut counts = [0usize; 2];
        for (i, &y) in data.labels.iter().enumerate() {
            let row = data.features.row(i);
            let class = (y - 1) as usize;
            counts[class] += 1;
            sums[class][0] += row[0];
            sums[class][1] += row[1];
        }
        for class in 0..2 {
            for coord in 0..2 {
                let avg = sums[class][coord] / counts[class] as f64;
                let mu = spec.mean(class as u32 + 1)[coord];
                assert!((avg - mu).abs() < 0.02, "class {class} coord {coord}: {avg} vs {mu}");
            }
        }
    }

    #[test]
    fn single_row_sample_is_valid() {
        let spec = MixtureSpec::sample(3, 4, 0).unwrap();
        let data = spec.sample_labeled(1, 1).unwrap();
        assert_eq!(data.n(), 1);
        assert_eq!(data.dim(), 4);
    }

    #[test]
    fn unlabeled_empty_and_deterministic() {
        let spec = MixtureSpec::sample(5, 3, 2).unwrap();
        assert_eq!(spec.sample_unlabeled(0, 9).n(), 0);
        let a = spec.sample_unlabeled(50, 9);
        let b = spec.sample_unlabeled(50, 9);
        assert_eq!(a, b);
    }

    #[test]
    fn unlabeled_matches_labeled_marginal() {
        // Both draw from the same marginal: two-sample mean test at 5 sigma.
        let spec = MixtureSpec::sample(4, 6, 3).unwrap();
        let n = 20_000;
        let labeled = spec.sample_labeled(n, 100).unwrap();
        let unlabeled = spec.sample_unlabeled(n, 200);
        let mean = |m: &Matrix| m.values().iter().sum::<f64>() / m.values().len() as f64;
        let box_edge = MixtureSpec::MEAN_BOX_EDGE;
        let coord_var = box_edge * box_edge / 12.0 + 1.0;
        let se = (2.0 * coord_var / (n as f64 * 6.0)).sqrt();
        let diff = (mean(&labeled.features) - mean(&unlabeled.features)).abs();
        assert!(diff < 5.0 * se, "diff = {diff}, 5 sigma = {}", 5.0 * se);
    }

    #[test]
    fn longer_sample_extends_shorter_one() {
        let spec = MixtureSpec::sample(6, 2, 21).unwrap();
        let short = spec.sample_unlabeled(100, 33);
        let long = spec.sample_unlabeled(1_000, 33);
        assert_eq!(
            &long.features.values()[..100 * 2],
            short.features.values()
        );
    }

    #[test]
    fn pathology_rejects_bad_parameters() {
        assert!(PathologySpec::new(1, 10).is_err());
        assert!(PathologySpec::new(2, 3).is_err());
        assert!(PathologySpec::with_geometry(2, 10, 2, 0.5, 1.0, 3.0, 1.0 / 16.0).is_err());
        assert!(PathologySpec::with_geometry(2, 10, 2, 0.1, 1.0, 1.5, 1.0 / 16.0).is_err());
        assert!(PathologySpec::with_geometry(2, 10, 2, 0.1, 1.0, 3.0, 0.3).is_err());
        assert!(PathologySpec::new(2, 10).is_ok());
    }

    #[test]
    fn pathology_posterior_at_center_and_on_r2() {
        let spec = PathologySpec::new(2, 10).unwrap();
        let p = spec.posterior(&[0.0, 0.0]).unwrap();
        for k in 0..3 {
            assert_eq!(p[k], 1.0 / 6.0);
        }
        // cos(2 pi) = 1 kills the modulation on the inner edge of the middle annulus.
        let p = spec.posterior(&[1.0, 0.0]).unwrap();
        for k in 0..3 {
            assert!((p[k] - 1.0 / 3.0).abs() < 1e-15);
        }
        for k in 3..10 {
            assert_eq!(p[k], 0.0);
        }
    }

    #[test]
    fn pathology_posterior_sums_to_one() {
        let spec = PathologySpec::new(3, 10).unwrap();
        let data = spec.sample_labeled(2_000, 17).unwrap();
        for i in 0..data.n() {
            let p = spec.posterior(data.features.row(i)).unwrap();
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum = {sum}");
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn pathology_rejects_off_support_points() {
        let spec = PathologySpec::new(2, 10).unwrap();
        assert!(matches!(
            spec.posterior(&[0.5, 0.0]),
            Err(Error::OffSupport(_))
        ));
        assert!(matches!(
            spec.posterior(&[7.0, 0.0]),
            Err(Error::OffSupport(_))
        ));
        assert!(spec.posterior(&[0.05, 0.0]).is_ok());
        assert!(spec.posterior(&[1.5, 0.0]).is_ok());
        assert!(spec.posterior(&[4.0, 0.0]).is_ok());
    }

    #[test]
    fn pathology_region_masses_are_hit() {
        let spec = PathologySpec::new(2, 10).unwrap();
        let (w1, w2, w3) = spec.region_masses();
        assert!((w1 - 0.031_415_9).abs() < 1e-6);
        assert!((w1 + w2 + w3 - 1.0).abs() < 1e-12);
        let data = spec.sample_labeled(100_000, 23).unwrap();
        let mut counts = [0usize; 3];
        for i in 0..data.n() {
            let norm = data.features.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            let region = if norm <= 0.1 {
                0
            } else if (1.0..=2.0).contains(&norm) {
                1
            } else if (3.0..=6.0).contains(&norm) {
                2
            } else {
                panic!("sampled point off the support: norm = {norm}");
            };
            counts[region] += 1;
        }
        let freqs = counts.map(|c| c as f64 / 100_000.0);
        assert!((freqs[0] - w1).abs() < 0.01, "{freqs:?}");
        assert!((freqs[1] - w2).abs() < 0.01, "{freqs:?}");
        assert!((freqs[2] - w3).abs() < 0.01, "{freqs:?}");
    }

    #[test]
    fn pathology_middle_annulus_label_frequencies_match_posterior() {
        let spec = PathologySpec::new(2, 10).unwrap();
        let data = spec.sample_labeled(100_000, 29).unwrap();
        let mut leading = 0usize;
        let mut total = 0usize;
        let mut expected = 0.0;
        for i in 0..data.n() {
            let norm = data.features.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if (1.0..=2.0).contains(&norm) {
                total += 1;
                if data.labels[i] <= 3 {
                    leading += 1;
                }
                let p = spec.posterior(data.features.row(i)).unwrap();
                expected += p[..3].iter().sum::<f64>();
            }
        }
        let observed = leading as f64 / total as f64;
        let expected = expected / total as f64;
        let sigma = (expected * (1.0 - expected) / total as f64).sqrt();
        assert!(
            (observed - expected).abs() < 3.0 * sigma,
            "observed {observed}, expected {expected}, sigma {sigma}"
        );
    }

    #[test]
    fn ball_volume_known_values() {
        assert!((ball_volume(2, 1.0) - std::f64::consts::PI).abs() < 1e-12);
        assert!((ball_volume(3, 1.0) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
        assert!((ball_volume(1, 2.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn population_serde_round_trip() {
        let pop = Population::Pathology(PathologySpec::new(2, 10).unwrap());
        let json = serde_json::to_string(&pop).unwrap();
        let back: Population = serde_json::from_str(&json).unwrap();
        assert_eq!(pop, back);
    }
}
