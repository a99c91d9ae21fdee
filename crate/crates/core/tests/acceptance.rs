//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Criteria that depend on external datasets look them up under the fixture
//! directory (`MALLOWS_FIXTURES`, default `crates/core/fixtures`) and, for the
//! flights data, also under `data/` at the workspace root.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mallows_core::estimation::{
    empirical_moment_summary, fit_beta_mom, fit_kde, fit_triangular_pearson, test_mode_symmetry, VariableEstimate,
};
use mallows_core::ingest::{
    aggregate, fixture_path, load_interval_csv, load_microdata_csv, load_summary_csv, AggregateOptions,
};
use mallows_core::latent::cross_moment_quadrature;
use mallows_core::mallows::{
    dist_sq_box, dist_sq_general, dist_sq_mahalanobis, dist_sq_musigma, dist_sq_symmetric, iso_distance_set,
    oracle_dist_sq,
};
use mallows_core::moments::{
    correlation_from_cov, cov_model7, covariance_quantile_oracle_matrix, frechet_variance, mean_dist_sq_to,
    sample_barycentre, symbolic_covariance, symbolic_covariance_with,
};
use mallows_core::quadrature::integrate_adaptive;
use mallows_core::{
    cross_moment, Divisor, Interval, IntervalBox, IntervalFrame, LatentDistribution, MahalanobisForm, Matrix,
};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

const CROSS_MOMENT_CLOSED_TOL: f64 = 1e-9;
const CROSS_MOMENT_QUAD_TOL: f64 = 1e-7;
const FORM_AGREEMENT_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-7;
const TRIANGLE_TOL: f64 = 1e-9;
const MAHALANOBIS_TOL: f64 = 1e-10;
const INVERSE_TOL: f64 = 1e-10;
const ZERO_EIGEN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const COVARIANCE_ORACLE_TOL: f64 = 1e-8;
const CREDIT_BARYCENTRE_TOL: f64 = 0.005;
const CREDIT_CORRELATION_TOL: f64 = 0.01;
const FLIGHTS_MOMENT_TOL: f64 = 0.01;
const FLIGHTS_SD_REL_TOL: f64 = 0.005;
const FLIGHTS_CORRELATION_TOL: f64 = 0.01;
const TRIANGULAR_MOMENT_TOL: f64 = 1e-9;
const TRAPEZOID_TOL: f64 = 1e-7;
const BINOMIAL_TOL: f64 = 1e-12;
const ELLIPSE_TOL: f64 = 1e-12;

const ORACLE_PANELS: usize = 64;
const TRAPEZOID_POINTS: usize = 1_000_000;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

/// Collects sub-check results for one criterion.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn within_time(&mut self, elapsed: Duration, limit: Duration) {
        self.check(elapsed < limit, format!("runtime {elapsed:.2?} exceeds {limit:.0?}"));
        self.note(format!("runtime {elapsed:.2?}"));
    }

    fn finish(self) -> Outcome {
        let mut parts = self.failures.clone();
        parts.extend(self.notes);
        Outcome {
            status: if self.failures.is_empty() {
                Status::Pass
            } else {
                Status::Fail
            },
            detail: parts.join("; "),
        }
    }
}

fn skip(detail: impl Into<String>) -> Outcome {
    Outcome {
        status: Status::Skip,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        status: Status::Fail,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("cross-moment exactness", criterion_1),
        ("distance-form equivalence", criterion_2),
        ("metric axioms", criterion_3),
        ("Mahalanobis equivalence", criterion_4),
        ("barycentre and Fréchet variance", criterion_5),
        ("covariance oracle equivalence", criterion_6),
        ("credit-card reproduction", criterion_7),
        ("NY-flights reproduction", criterion_8),
        ("RTT machinery", criterion_9),
        ("delta bound", criterion_10),
        ("iso-distance ellipses", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let tag = match out.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!(
            "criterion {:>2} {tag} {name} [{:.2?}]: {}",
            k + 1,
            start.elapsed(),
            out.detail
        );
    }
    println!("acceptance: {} of {} criteria failed", failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn tri(m: f64) -> LatentDistribution {
    LatentDistribution::triangular(m).unwrap()
}

fn criterion_1() -> Outcome {
    let mut c = Checks::default();
    let start = Instant::now();
    let u = LatentDistribution::Uniform;
    let closed = cross_moment(&u, &tri(0.0));
    let quad = cross_moment_quadrature(&u, &tri(0.0));
    let elapsed = start.elapsed();
    let exact = 7.0 / 30.0;
    c.check(
        (closed - exact).abs() < CROSS_MOMENT_CLOSED_TOL,
        format!("closed form {closed} vs 7/30"),
    );
    c.check(
        (quad - exact).abs() < CROSS_MOMENT_QUAD_TOL,
        format!("quadrature {quad} vs 7/30"),
    );
    c.note(format!(
        "|closed - 7/30| = {:.1e}, |quadrature - 7/30| = {:.1e}",
        (closed - exact).abs(),
        (quad - exact).abs()
    ));
    c.within_time(elapsed, Duration::from_secs(1));
    c.finish()
}

/// Pre-fitted latents shared by the randomised criteria.
struct LatentPool {
    fitted_beta: Vec<LatentDistribution>,
    kde: Vec<LatentDistribution>,
}

impl LatentPool {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let beta_sample = |rng: &mut ChaCha8Rng, a: f64, b: f64, n: usize| -> Vec<f64> {
            let d = Beta::new(a, b).unwrap();
            (0..n).map(|_| 2.0 * d.sample(rng) - 1.0).collect()
        };
        let fitted_beta = [(0.44, 2.15), (1.08, 2.65), (3.0, 1.2), (0.7, 0.7)]
            .iter()
            .map(|&(a, b)| fit_beta_mom(&beta_sample(rng, a, b, 5_000)).unwrap().latent())
            .collect();
        let kde = [(0.5, 3.0), (2.0, 2.0), (4.0, 0.8)]
            .iter()
            .map(|&(a, b)| fit_kde(&beta_sample(rng, a, b, 2_000), None).unwrap())
            .collect();
        Self { fitted_beta, kde }
    }

    /// A non-degenerate latent from any family.
    fn draw(&self, rng: &mut ChaCha8Rng) -> LatentDistribution {
        match rng.random_range(0..7) {
            0 => LatentDistribution::Uniform,
            1 => tri(rng.random_range(-1.0..=1.0)),
            2 => LatentDistribution::InvertedTriangular,
            3 => LatentDistribution::truncated_normal(rng.random_range(0.02..1.0)).unwrap(),
            4 => LatentDistribution::shifted_beta(rng.random_range(0.3..5.0), rng.random_range(0.3..5.0)).unwrap(),
            5 => self.fitted_beta.choose(rng).unwrap().clone(),
            _ => self.kde.choose(rng).unwrap().clone(),
        }
    }

    /// An interval and a matching latent; one in ten is a point.
    fn draw_interval(&self, rng: &mut ChaCha8Rng) -> (Interval, LatentDistribution) {
        let c = rng.random_range(-10.0..10.0);
        if rng.random_range(0..10) == 0 {
            (Interval::point(c), LatentDistribution::Degenerate)
        } else {
            (
                Interval::from_centre_range(c, rng.random_range(0.01..8.0)).unwrap(),
                self.draw(rng),
            )
        }
    }
}

fn criterion_2() -> Outcome {
    let mut c = Checks::default();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pool = LatentPool::new(&mut rng);
    let pairs: Vec<_> = (0..1000)
        .map(|_| (pool.draw_interval(&mut rng), pool.draw_interval(&mut rng)))
        .collect();
    let errors: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|((x1, u1), (x2, u2))| {
            let g = dist_sq_general(x1, u1, x2, u2);
            let m = dist_sq_musigma(x1, u1, x2, u2);
            let o = oracle_dist_sq(x1, u1, x2, u2, ORACLE_PANELS);
            ((g - m).abs(), (g - o).abs())
        })
        .collect();
    let elapsed = start.elapsed();
    let worst_form = errors.iter().map(|e| e.0).fold(0.0, f64::max);
    let worst_oracle = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let mut families: Vec<&str> = pairs.iter().flat_map(|(a, b)| [a.1.family(), b.1.family()]).collect();
    families.sort_unstable();
    families.dedup();
    c.check(
        worst_form < FORM_AGREEMENT_TOL,
        format!("general vs location/scale max error {worst_form:.2e}"),
    );
    c.check(
        worst_oracle < ORACLE_TOL,
        format!("general vs quadrature oracle max error {worst_oracle:.2e}"),
    );
    c.note(format!(
        "1000 pairs over {{{}}}, max |general - musigma| {worst_form:.1e}, max |general - oracle| {worst_oracle:.1e}",
        families.join(", ")
    ));
    c.within_time(elapsed, Duration::from_secs(30));
    c.finish()
}

fn random_box(rng: &mut ChaCha8Rng, latents: &[LatentDistribution]) -> IntervalBox {
    let intervals = latents
        .iter()
        .map(|u| {
            let c = rng.random_range(-5.0..5.0);
            let r = if u.is_degenerate() {
                0.0
            } else {
                rng.random_range(0.0..4.0)
            };
            Interval::from_centre_range(c, r).unwrap()
        })
        .collect();
    IntervalBox::new(intervals, latents.to_vec()).unwrap()
}

fn random_latents(
    rng: &mut ChaCha8Rng,
    pool: &LatentPool,
    p: usize,
    allow_degenerate: bool,
) -> Vec<LatentDistribution> {
    (0..p)
        .map(|_| {
            if allow_degenerate && rng.random_range(0..6) == 0 {
                LatentDistribution::Degenerate
            } else {
                pool.draw(rng)
            }
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pool = LatentPool::new(&mut rng);
    let (mut asym, mut nonzero_self, mut worst_excess) = (0, 0, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let p = rng.random_range(1..=4);
        let lat = random_latents(&mut rng, &pool, p, true);
        let [x, y, z] = [0; 3].map(|_| random_box(&mut rng, &lat));
        let d = |a: &IntervalBox, b: &IntervalBox| dist_sq_box(a, b).unwrap().sqrt();
        if dist_sq_box(&x, &y).unwrap().to_bits() != dist_sq_box(&y, &x).unwrap().to_bits() {
            asym += 1;
        }
        if d(&x, &x) != 0.0 {
            nonzero_self += 1;
        }
        worst_excess = worst_excess.max(d(&x, &z) - d(&x, &y) - d(&y, &z));
    }
    c.check(asym == 0, format!("{asym} asymmetric pairs"));
    c.check(nonzero_self == 0, format!("{nonzero_self} boxes with d(x, x) != 0"));
    c.check(
        worst_excess <= TRIANGLE_TOL,
        format!("triangle inequality violated by {worst_excess:.2e}"),
    );
    c.note(format!(
        "1000 triples, largest d(x,z) - d(x,y) - d(y,z) = {worst_excess:.2e}"
    ));
    c.finish()
}

fn criterion_4() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pool = LatentPool::new(&mut rng);
    let (mut worst_dist, mut worst_inverse, mut worst_zero) = (0.0f64, 0.0f64, 0.0f64);
    let (mut min_live_eig, mut eig_count_errors) = (f64::INFINITY, 0);
    for _ in 0..1000 {
        let p = rng.random_range(1..=6);
        let lat = random_latents(&mut rng, &pool, p, true);
        let form = MahalanobisForm::from_latents(&lat).unwrap();
        let (b1, b2) = (random_box(&mut rng, &lat), random_box(&mut rng, &lat));
        let direct = dist_sq_box(&b1, &b2).unwrap();
        let full = dist_sq_mahalanobis(&b1.centre_range_vector(), &b2.centre_range_vector(), &form).unwrap();
        let reduced = dist_sq_mahalanobis(
            &form.reduce(&b1.centre_range_vector()).unwrap(),
            &form.reduce(&b2.centre_range_vector()).unwrap(),
            &form,
        )
        .unwrap();
        worst_dist = worst_dist.max((direct - full).abs()).max((direct - reduced).abs());
        let k = form.h_reduced.rows();
        let prod = form.h_reduced.matmul(&form.h_reduced_inverse).unwrap();
        worst_inverse = worst_inverse.max(prod.max_abs_diff(&Matrix::identity(k)).unwrap());
        if let Some(inv) = &form.h_inverse {
            worst_inverse = worst_inverse.max(
                form.h
                    .matmul(inv)
                    .unwrap()
                    .max_abs_diff(&Matrix::identity(2 * p))
                    .unwrap(),
            );
        }
        let n_degenerate = lat.iter().filter(|u| u.is_degenerate()).count();
        let eig = form.h.symmetric_eigenvalues().unwrap();
        let zeros = eig.iter().filter(|e| e.abs() <= ZERO_EIGEN_TOL).count();
        if zeros != n_degenerate {
            eig_count_errors += 1;
        }
        worst_zero = worst_zero.max(eig[..n_degenerate].iter().map(|e| e.abs()).fold(0.0, f64::max));
        if n_degenerate < eig.len() {
            min_live_eig = min_live_eig.min(eig[n_degenerate]);
        }
    }
    c.check(
        worst_dist < MAHALANOBIS_TOL,
        format!("box vs Mahalanobis max error {worst_dist:.2e}"),
    );
    c.check(
        worst_inverse < INVERSE_TOL,
        format!("H H^-1 - I max entry {worst_inverse:.2e}"),
    );
    c.check(
        eig_count_errors == 0,
        format!("{eig_count_errors} forms with zero-eigenvalue count != degenerate dimensions"),
    );
    c.check(
        min_live_eig > 0.0,
        format!("smallest non-degenerate eigenvalue {min_live_eig:.2e}"),
    );
    c.note(format!(
        "1000 boxes, p in 1..=6; max distance error {worst_dist:.1e}, max inverse error {worst_inverse:.1e}, \
         smallest positive eigenvalue {min_live_eig:.2e}, largest degenerate eigenvalue {worst_zero:.1e}"
    ));
    c.finish()
}

/// Random frame with per-variable latents; zero-range columns get the
/// degenerate latent. With `dyadic`, bounds are multiples of 1/8 and the row
/// count is a power of two, so column means are exact in any order.
fn random_frame(rng: &mut ChaCha8Rng, pool: &LatentPool, n: usize, p: usize, dyadic: bool) -> IntervalFrame {
    let lat = random_latents(rng, pool, p, true);
    let rows = (0..n)
        .map(|_| {
            lat.iter()
                .map(|u| {
                    let (mut c, mut r): (f64, f64) = (rng.random_range(-20.0..20.0), rng.random_range(0.1..10.0));
                    if dyadic {
                        c = (c * 8.0).round() / 8.0;
                        r = ((r * 4.0).round() / 4.0).max(0.25);
                    }
                    if u.is_degenerate() {
                        r = 0.0;
                    }
                    Interval::from_centre_range(c, r).unwrap()
                })
                .collect()
        })
        .collect();
    let names = (0..p).map(|j| format!("x{j}")).collect();
    IntervalFrame::new(names, rows, lat).unwrap()
}

fn criterion_5() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pool = LatentPool::new(&mut rng);
    let (mut inexact, mut worst_trace, mut not_minimal) = (0, 0.0f64, 0);
    const EPS: f64 = 1e-3;
    for _ in 0..200 {
        let n = 1 << rng.random_range(1..=5);
        let p = rng.random_range(1..=4);
        let frame = random_frame(&mut rng, &pool, n, p, true);
        let b = sample_barycentre(&frame).unwrap();
        let (cm, rm) = frame.centres_ranges();
        for j in 0..p {
            let mc: f64 = (0..n).map(|i| cm[(i, j)]).sum::<f64>() / n as f64;
            let mr: f64 = (0..n).map(|i| rm[(i, j)]).sum::<f64>() / n as f64;
            if b.centres[j] != mc || b.ranges[j] != mr {
                inexact += 1;
            }
        }
        let cov = symbolic_covariance(&frame).unwrap();
        let fv = frechet_variance(&frame).unwrap();
        worst_trace = worst_trace
            .max((cov.trace() - fv).abs())
            .max((b.frechet_variance - fv).abs());
        let base = mean_dist_sq_to(&frame, &b.centres, &b.ranges).unwrap();
        for j in 0..p {
            for sign in [-1.0, 1.0] {
                let mut cs = b.centres.clone();
                cs[j] += sign * EPS;
                if mean_dist_sq_to(&frame, &cs, &b.ranges).unwrap() <= base {
                    not_minimal += 1;
                }
                if !frame.latent(j).is_degenerate() {
                    let mut rs = b.ranges.clone();
                    rs[j] += sign * EPS;
                    if mean_dist_sq_to(&frame, &b.centres, &rs).unwrap() <= base {
                        not_minimal += 1;
                    }
                }
            }
        }
    }
    c.check(
        inexact == 0,
        format!("{inexact} barycentre coordinates differ from componentwise means"),
    );
    c.check(
        worst_trace < TRACE_TOL,
        format!("trace vs Fréchet variance max error {worst_trace:.2e}"),
    );
    c.check(
        not_minimal == 0,
        format!("{not_minimal} perturbations did not increase the objective"),
    );
    c.note(format!(
        "200 frames; max |tr(S_B) - Fréchet variance| = {worst_trace:.1e}; perturbation {EPS}"
    ));
    c.finish()
}

fn criterion_6() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pool = LatentPool::new(&mut rng);
    let frames: Vec<IntervalFrame> = (0..500)
        .map(|_| {
            let n = rng.random_range(2..=10);
            let p = rng.random_range(1..=4);
            random_frame(&mut rng, &pool, n, p, false)
        })
        .collect();
    let worst = frames
        .par_iter()
        .map(|f| {
            let s = symbolic_covariance(f).unwrap().sigma_b;
            let o = covariance_quantile_oracle_matrix(f, ORACLE_PANELS).unwrap();
            s.max_abs_diff(&o).unwrap()
        })
        .reduce(|| 0.0, f64::max);
    c.check(
        worst < COVARIANCE_ORACLE_TOL,
        format!("symbolic vs oracle covariance max error {worst:.2e}"),
    );
    c.note(format!("500 frames (n <= 10, p <= 4), max entry error {worst:.1e}"));
    c.finish()
}

/// Centre and range means printed for the credit-card data.
const CREDIT_CENTRES: [f64; 5] = [26.09, 13.80, 183.97, 24.84, 49.32];
const CREDIT_RANGES: [f64; 5] = [9.15, 10.23, 13.01, 8.96, 11.89];

fn criterion_7() -> Outcome {
    let Some(path) = fixture_path("credit_card.csv") else {
        return fail(
            "credit-card interval fixture 'credit_card.csv' is not bundled (no source was reachable); \
             barycentre and correlation checks could not run",
        );
    };
    let mut c = Checks::default();
    let start = Instant::now();
    let mut frame = match load_interval_csv(&path) {
        Ok(f) => f,
        Err(e) => return fail(format!("cannot load {}: {e}", path.display())),
    };
    let b = sample_barycentre(&frame).unwrap();
    for j in 0..CREDIT_CENTRES.len().min(frame.n_vars()) {
        c.check(
            (b.centres[j] - CREDIT_CENTRES[j]).abs() < CREDIT_BARYCENTRE_TOL,
            format!(
                "centre mean {} = {:.4} vs {}",
                frame.names()[j],
                b.centres[j],
                CREDIT_CENTRES[j]
            ),
        );
        c.check(
            (b.ranges[j] - CREDIT_RANGES[j]).abs() < CREDIT_BARYCENTRE_TOL,
            format!(
                "range mean {} = {:.4} vs {}",
                frame.names()[j],
                b.ranges[j],
                CREDIT_RANGES[j]
            ),
        );
    }
    frame.set_latents(vec![tri(0.0); frame.n_vars()]).unwrap();
    let sb = symbolic_covariance(&frame).unwrap().correlation(frame.names()).unwrap();
    let s7 = correlation_from_cov(&cov_model7(&frame, Divisor::N).unwrap(), frame.names()).unwrap();
    c.check(
        false,
        format!(
            "figure correlation annotations are not available as text, so the {CREDIT_CORRELATION_TOL} comparison cannot be made"
        ),
    );
    c.note(format!(
        "barycentric correlation {sb}; comparison-model correlation {s7}"
    ));
    c.within_time(start.elapsed(), Duration::from_secs(5));
    c.finish()
}

fn flights_path() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("MALLOWS_NYCFLIGHTS") {
        return Some(PathBuf::from(p));
    }
    fixture_path("nycflights_micro.csv").or_else(|| {
        let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/nycflights_micro.csv");
        p.is_file().then_some(p)
    })
}

const FLIGHTS_VARIABLES: [&str; 4] = ["dep_delay", "arr_delay", "air_time", "distance"];
const FLIGHTS_PSI: [f64; 4] = [-0.66, -0.42, -0.21, -0.21];
/// Lower triangle of the printed cross-moment matrix, row by row.
const FLIGHTS_EUU: [[f64; 4]; 4] = [
    [0.59, 0.44, 0.35, 0.34],
    [0.44, 0.35, 0.32, 0.31],
    [0.35, 0.32, 0.37, 0.35],
    [0.34, 0.31, 0.35, 0.34],
];
const FLIGHTS_SD: [f64; 4] = [10.22, 15.83, 75.25, 574.45];
const FLIGHTS_COR: [[f64; 4]; 4] = [
    [1.00, 0.85, -0.18, -0.17],
    [0.85, 1.00, -0.40, -0.39],
    [-0.18, -0.40, 1.00, 0.99],
    [-0.17, -0.39, 0.99, 1.00],
];

fn criterion_8() -> Outcome {
    let Some(path) = flights_path() else {
        return skip("flights microdata not found; run scripts/fetch_nycflights.py to enable this criterion");
    };
    let mut c = Checks::default();
    let micro = match load_microdata_csv(&path) {
        Ok(m) => m,
        Err(e) => return fail(format!("cannot load {}: {e}", path.display())),
    };
    let opts = AggregateOptions {
        trim: 0.05,
        keep_degenerate: false,
        variable_order: Some(FLIGHTS_VARIABLES.iter().map(|s| s.to_string()).collect()),
    };
    let mut agg = aggregate(&micro.records, &opts).unwrap();
    c.note(format!("n = {} groups after trimming", agg.frame.n_rows()));
    let latents = vec![
        fit_beta_mom(&agg.samples[0].values).unwrap().latent(),
        fit_beta_mom(&agg.samples[1].values).unwrap().latent(),
        fit_kde(&agg.samples[2].values, None).unwrap(),
        fit_kde(&agg.samples[3].values, None).unwrap(),
    ];
    let vars: Vec<VariableEstimate> = agg
        .samples
        .iter()
        .zip(&latents)
        .map(|(s, l)| VariableEstimate {
            name: s.variable.clone(),
            latent: Some(l.clone()),
            sample: Some(s.values.clone()),
        })
        .collect();
    let summary = empirical_moment_summary(&vars).unwrap();
    agg.frame.set_latents(latents).unwrap();
    let cov = symbolic_covariance_with(&agg.frame, &summary, Divisor::NMinusOne).unwrap();
    let cor = cov.correlation(agg.frame.names()).unwrap();
    let sd: Vec<f64> = cov.sigma_b.diagonal().iter().map(|v| v.sqrt()).collect();
    for i in 0..4 {
        c.check(
            (summary.psi[i] - FLIGHTS_PSI[i]).abs() < FLIGHTS_MOMENT_TOL,
            format!("Psi[{i}] = {:.4} vs {}", summary.psi[i], FLIGHTS_PSI[i]),
        );
        c.check(
            (sd[i] / FLIGHTS_SD[i] - 1.0).abs() < FLIGHTS_SD_REL_TOL,
            format!("sd[{i}] = {:.3} vs {}", sd[i], FLIGHTS_SD[i]),
        );
        for j in 0..=i {
            c.check(
                (summary.euu[(i, j)] - FLIGHTS_EUU[i][j]).abs() < FLIGHTS_MOMENT_TOL,
                format!("E[{i},{j}] = {:.4} vs {}", summary.euu[(i, j)], FLIGHTS_EUU[i][j]),
            );
            c.check(
                (cor[(i, j)] - FLIGHTS_COR[i][j]).abs() < FLIGHTS_CORRELATION_TOL,
                format!("cor[{i},{j}] = {:.4} vs {}", cor[(i, j)], FLIGHTS_COR[i][j]),
            );
        }
    }
    c.finish()
}

/// Triangular quantile on `[-1, 1]`, written out independently of the library.
fn triangular_quantile(m: f64, t: f64) -> f64 {
    let split = (1.0 + m) / 2.0;
    if t <= split {
        -1.0 + (2.0 * (1.0 + m) * t).sqrt()
    } else {
        1.0 - (2.0 * (1.0 - m) * (1.0 - t)).sqrt()
    }
}

/// Trapezoid rule on a uniform grid over `[0, 1]`.
fn trapezoid<F: Fn(f64) -> f64 + Sync>(f: F, points: usize) -> f64 {
    let h = 1.0 / (points - 1) as f64;
    let interior: f64 = (1..points - 1).into_par_iter().map(|k| f(k as f64 * h)).sum();
    h * (interior + 0.5 * (f(0.0) + f(1.0)))
}

/// Exact two-sided binomial(n, 1/2) p-value as a ratio of big integers.
fn exact_binomial_p(k: u64, n: u64) -> f64 {
    let mut binom = vec![BigUint::one()];
    for j in 1..=n {
        let next = binom[j as usize - 1].clone() * BigUint::from(n - j + 1) / BigUint::from(j);
        binom.push(next);
    }
    let lower: BigUint = binom[..=k as usize].iter().sum();
    let upper: BigUint = binom[k as usize..].iter().sum();
    let tail = if lower < upper { lower } else { upper };
    let total = BigUint::one() << n;
    let doubled = tail * 2u32;
    if doubled >= total {
        return 1.0;
    }
    // Scale so the quotient carries well over 53 significant bits.
    let shift: usize = 128;
    let q: BigUint = (doubled << shift) / &total;
    if q.is_zero() {
        return 0.0;
    }
    let bits = q.bits();
    let drop = bits.saturating_sub(64);
    let top = (q >> drop).to_f64().unwrap();
    top * 2f64.powi(drop as i32 - shift as i32)
}

fn criterion_9() -> Outcome {
    let mut c = Checks::default();
    let grid: Vec<f64> = (-9..=9).map(|k| k as f64 / 10.0).collect();

    let (mut worst_mean, mut worst_literal, mut worst_exact) = (0.0f64, 0.0f64, 0.0f64);
    for &m in &grid {
        let t = tri(m);
        let brk = [0.5 * (1.0 + m)];
        let q = |x: f64| t.quantile_unchecked(x);
        let mean = integrate_adaptive(q, 0.0, 1.0, &brk, 1e-13);
        let second = integrate_adaptive(|x| q(x).powi(2), 0.0, 1.0, &brk, 1e-13);
        worst_mean = worst_mean.max((mean - m / 3.0).abs());
        worst_literal = worst_literal.max((second - (m * m + 3.0) / 6.0).abs());
        worst_exact = worst_exact.max((second - (m * m + 1.0) / 6.0).abs());
    }
    c.check(
        worst_mean < TRIANGULAR_MOMENT_TOL,
        format!("triangular mean vs m/3 max error {worst_mean:.2e}"),
    );
    c.check(
        worst_literal < TRIANGULAR_MOMENT_TOL,
        format!(
            "triangular second moment vs (m^2+3)/6 max error {worst_literal:.3} (the second moment is (m^2+1)/6, \
             matched to {worst_exact:.1e}; (m^2+3)/18 is the variance)"
        ),
    );

    let modes = [-0.9, -0.5, 0.0, 0.3, 0.8];
    let mut worst_trap = 0.0f64;
    for &m1 in &modes {
        for &m2 in &modes {
            let lib = cross_moment(&tri(m1), &tri(m2));
            let oracle = trapezoid(
                |t| triangular_quantile(m1, t) * triangular_quantile(m2, t),
                TRAPEZOID_POINTS,
            );
            worst_trap = worst_trap.max((lib - oracle).abs());
        }
    }
    c.check(
        worst_trap < TRAPEZOID_TOL,
        format!("triangular cross-moments vs trapezoid max error {worst_trap:.2e}"),
    );

    let mut worst_p = 0.0f64;
    let mut sizes: Vec<u64> = (1..=60).collect();
    sizes.extend([100, 257, 564]);
    for &n in &sizes {
        for k in 0..=n {
            let modes: Vec<f64> = (0..n).map(|i| if i < k { 0.5 } else { -0.5 }).collect();
            let p = test_mode_symmetry(&modes, 0.05, 8).unwrap().p_value;
            worst_p = worst_p.max((p - exact_binomial_p(k, n)).abs());
        }
    }
    c.check(
        worst_p < BINOMIAL_TOL,
        format!("symmetry-test p-values vs exact tail sums max error {worst_p:.2e}"),
    );

    match fixture_path("rtt_summary.csv").map(load_summary_csv) {
        Some(Ok(rows)) => {
            let fits = fit_triangular_pearson(&rows, 0.05, None).unwrap();
            let targets = [-0.14, -0.13, -0.34, -0.58, -0.69, -0.34, -0.17, -0.09];
            let worst = fits
                .iter()
                .zip(&targets)
                .map(|(f, t)| (f.mean_scaled_mode - t).abs())
                .fold(0.0, f64::max);
            c.check(worst < 1e-9, format!("RTT fixture mode averages off by {worst:.2e}"));
            let kept: Vec<&str> = fits
                .iter()
                .filter(|f| !f.test.reject)
                .map(|f| f.variable.as_str())
                .collect();
            c.check(
                kept == ["rtt2", "rtt8"],
                format!("symmetry kept for {kept:?}, expected rtt2 and rtt8"),
            );
        }
        Some(Err(e)) => c.check(false, format!("cannot load RTT fixture: {e}")),
        None => c.check(false, "RTT fixture rtt_summary.csv missing"),
    }
    c.note(format!(
        "mean error {worst_mean:.1e}, trapezoid error {worst_trap:.1e}, p-value error {worst_p:.1e} over n in 1..=60, 100, 257, 564"
    ));
    c.note("the RTT correlation and Frobenius figures are not reproduced (data not public)");
    c.finish()
}

fn criterion_10() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pool = LatentPool::new(&mut rng);
    let mut latents = vec![
        LatentDistribution::Uniform,
        LatentDistribution::InvertedTriangular,
        LatentDistribution::Degenerate,
        LatentDistribution::truncated_normal(1.0 / 9.0).unwrap(),
    ];
    latents.extend((-10..=10).map(|k| tri(k as f64 / 10.0)));
    latents.extend([0.001, 0.05, 0.5, 1.0, 100.0].map(|s| LatentDistribution::truncated_normal(s).unwrap()));
    for a in [0.1, 0.44, 1.0, 2.15, 10.0] {
        for b in [0.1, 1.08, 2.65, 10.0] {
            latents.push(LatentDistribution::shifted_beta(a, b).unwrap());
        }
    }
    latents.extend(pool.fitted_beta.iter().cloned());
    latents.extend(pool.kde.iter().cloned());
    let near_edge: Vec<f64> = (0..500).map(|i| 1.0 - 1e-4 * i as f64).collect();
    latents.push(fit_kde(&near_edge, None).unwrap());
    if let Some(Ok(rows)) = fixture_path("rtt_summary.csv").map(load_summary_csv) {
        latents.extend(
            fit_triangular_pearson(&rows, 0.05, None)
                .unwrap()
                .iter()
                .map(|f| f.latent()),
        );
    }
    let bad: Vec<String> = latents
        .iter()
        .filter(|u| !(0.0..=0.25).contains(&(u.second_moment() / 4.0)))
        .map(|u| u.to_string())
        .collect();
    c.check(bad.is_empty(), format!("delta outside [0, 1/4] for {bad:?}"));
    c.note(format!("{} latents checked", latents.len()));
    c.finish()
}

fn criterion_11() -> Outcome {
    let mut c = Checks::default();
    let x0 = Interval::new(-3.0, 5.0).unwrap();
    let deltas = [1.0 / 8.0, 1.0 / 12.0, 1.0 / 24.0, 1.0 / 36.0];
    let n_points = 400;
    let mut previous: Option<(f64, Vec<(f64, f64)>)> = None;
    for &delta in &deltas {
        let pts = iso_distance_set(&x0, delta, 1.0, n_points).unwrap();
        c.check(
            pts.len() == n_points,
            format!("delta {delta}: {} of {n_points} points kept", pts.len()),
        );
        let mc = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let mr = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        c.check(
            (mc - 1.0).abs() < ELLIPSE_TOL && (mr - 8.0).abs() < ELLIPSE_TOL,
            format!("delta {delta}: centre ({mc}, {mr})"),
        );
        let semi_c = pts.iter().map(|p| (p.0 - 1.0).abs()).fold(0.0, f64::max);
        let semi_r = pts.iter().map(|p| (p.1 - 8.0).abs()).fold(0.0, f64::max);
        c.check(
            (semi_c - 1.0).abs() < ELLIPSE_TOL,
            format!("delta {delta}: c semi-axis {semi_c}"),
        );
        c.check(
            (semi_r - 1.0 / delta.sqrt()).abs() < ELLIPSE_TOL,
            format!("delta {delta}: r semi-axis {semi_r} vs {}", 1.0 / delta.sqrt()),
        );
        let off = pts
            .iter()
            .map(|&(pc, pr)| {
                let y = Interval::from_centre_range(pc, pr).unwrap();
                (dist_sq_symmetric(&x0, &y, delta).unwrap() - 1.0).abs()
            })
            .fold(0.0, f64::max);
        c.check(
            off < ELLIPSE_TOL,
            format!("delta {delta}: points off the unit distance by {off:.2e}"),
        );
        if let Some((prev_semi, prev_pts)) = &previous {
            c.check(
                semi_r > *prev_semi,
                format!("delta {delta}: r semi-axis not larger than previous"),
            );
            let outside = prev_pts
                .iter()
                .filter(|&&(pc, pr)| (pc - 1.0).powi(2) + delta * (pr - 8.0).powi(2) > 1.0 + ELLIPSE_TOL)
                .count();
            c.check(
                outside == 0,
                format!("delta {delta}: {outside} points of the previous ellipse lie outside"),
            );
        }
        previous = Some((semi_r, pts));
    }
    c.note("deltas 1/8, 1/12, 1/24, 1/36 around [-3, 5] at unit distance");
    c.finish()
}
