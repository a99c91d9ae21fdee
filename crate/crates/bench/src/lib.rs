//! Deterministic inputs shared by the benchmarks.

use mallows_core::{Interval, IntervalFrame, LatentDistribution};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Seed used for every generated input.
pub const SEED: u64 = 0x5eed;

/// `n x p` frame of positive-range intervals with the given latents.
pub fn random_frame(n: usize, latents: Vec<LatentDistribution>) -> IntervalFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let p = latents.len();
    let rows = (0..n)
        .map(|_| {
            (0..p)
                .map(|_| {
                    let c: f64 = rng.random_range(-50.0..50.0);
                    let r: f64 = rng.random_range(0.1..20.0);
                    Interval::from_centre_range(c, r).expect("positive range")
                })
                .collect()
        })
        .collect();
    let names = (0..p).map(|j| format!("v{j}")).collect();
    IntervalFrame::new(names, rows, latents).expect("matching shapes")
}

/// Draws `n` values of a latent distribution by inverting its quantile
/// function.
pub fn latent_sample(latent: &LatentDistribution, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ n as u64);
    (0..n)
        .map(|_| latent.quantile_unchecked(rng.random_range(1e-9..1.0)))
        .collect()
}

/// One latent of every parametric family.
pub fn parametric_latents() -> Vec<(&'static str, LatentDistribution)> {
    vec![
        ("uniform", LatentDistribution::Uniform),
        ("triangular", LatentDistribution::Triangular { mode: -0.34 }),
        ("inverted_triangular", LatentDistribution::InvertedTriangular),
        (
            "truncated_normal",
            LatentDistribution::TruncatedNormal { sigma2: 1.0 / 9.0 },
        ),
        (
            "shifted_beta",
            LatentDistribution::ShiftedBeta {
                alpha: 0.44,
                beta: 2.15,
            },
        ),
    ]
}
