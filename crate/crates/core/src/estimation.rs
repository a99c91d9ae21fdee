//! Fitting latent distributions from microdata.
//!
//! Three levels of information are supported: full microdata samples (fit a
//! shifted Beta by moments or a KDE), per-interval summary statistics only
//! (triangular latents with modes from Pearson's rule), or nothing (assume a
//! family outright, handled by the caller).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::latent::{cross_moment, Kde, LatentDistribution};
use crate::linalg::Matrix;
use crate::mallows::MomentSummary;
use crate::quadrature::compensated_sum;
use crate::special;

/// Minimum sample size accepted by [`fit_kde`].
pub const MIN_KDE_SAMPLE: usize = 10;

/// Scaled microdata `u = 2 (v - c) / r` of one variable, pooled over rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSample {
    pub variable: String,
    pub values: Vec<f64>,
    /// Frame row each value came from, parallel to `values`.
    pub rows: Vec<usize>,
}

impl ScaledSample {
    pub fn new(variable: impl Into<String>) -> Self {
        Self {
            variable: variable.into(),
            values: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: usize, values: &[f64]) {
        self.values.extend_from_slice(values);
        self.rows.extend(std::iter::repeat_n(row, values.len()));
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample mean and mean of squares.
    pub fn raw_moments(&self) -> Result<(f64, f64)> {
        raw_moments(&self.values)
    }
}

fn raw_moments(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("sample".into()));
    }
    let n = values.len() as f64;
    Ok((
        compensated_sum(values.iter().copied()) / n,
        compensated_sum(values.iter().map(|v| v * v)) / n,
    ))
}

/// Maps microdata inside an interval to `[-1, 1]`.
///
/// Values up to `1e-9 max(1, r)` outside the interval are clamped; values
/// further out are reported with their positions.
pub fn scale_to_latent(values: &[f64], interval: &Interval) -> Result<Vec<f64>> {
    let (c, r) = (interval.centre(), interval.range());
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "cannot scale into zero-range interval {interval}"
        )));
    }
    let tol = 1e-9 * r.max(1.0);
    let outside: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| !(v >= interval.lower - tol && v <= interval.upper + tol))
        .map(|(i, _)| i)
        .collect();
    if !outside.is_empty() {
        return Err(Error::OutsideInterval {
            lower: interval.lower,
            upper: interval.upper,
            positions: outside,
        });
    }
    Ok(values.iter().map(|&v| (2.0 * (v - c) / r).clamp(-1.0, 1.0)).collect())
}

/// Result of a method-of-moments Beta fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub alpha: f64,
    pub beta: f64,
    pub n_used: usize,
    /// Mean of `w = (u + 1) / 2`.
    pub mean_w: f64,
    /// Variance of `w` with divisor `n`.
    pub var_w: f64,
}

impl BetaFit {
    pub fn latent(&self) -> LatentDistribution {
        LatentDistribution::ShiftedBeta {
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// Fits `U = 2W - 1`, `W ~ Beta(alpha, beta)`, by matching the mean and
/// variance of `w = (u + 1) / 2`.
pub fn fit_beta_mom(u: &[f64]) -> Result<BetaFit> {
    if u.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            found: u.len(),
        });
    }
    if let Some(i) = u.iter().position(|v| !(-1.0..=1.0).contains(v)) {
        return Err(Error::OutsideInterval {
            lower: -1.0,
            upper: 1.0,
            positions: vec![i],
        });
    }
    let w: Vec<f64> = u.iter().map(|v| 0.5 * (v + 1.0)).collect();
    let n = w.len() as f64;
    let m = compensated_sum(w.iter().copied()) / n;
    let s2 = compensated_sum(w.iter().map(|x| (x - m) * (x - m))) / n;
    if !(s2 > 0.0) {
        return Err(Error::ZeroVariance("beta fit sample".into()));
    }
    let bound = m * (1.0 - m);
    if s2 >= bound {
        return Err(Error::MomentCondition { variance: s2, bound });
    }
    let k = bound / s2 - 1.0;
    Ok(BetaFit {
        alpha: m * k,
        beta: (1.0 - m) * k,
        n_used: u.len(),
        mean_w: m,
        var_w: s2,
    })
}

/// Reflected Gaussian KDE of a scaled sample; see [`Kde`].
pub fn fit_kde(u: &[f64], bandwidth: Option<f64>) -> Result<LatentDistribution> {
    if u.len() < MIN_KDE_SAMPLE {
        return Err(Error::TooFewObservations {
            needed: MIN_KDE_SAMPLE,
            found: u.len(),
        });
    }
    Ok(LatentDistribution::Kde(Kde::fit(u, bandwidth)?))
}

/// Pearson's rule of thumb, `mode = 3 median - 2 mean`.
pub fn pearson_mode(mean: f64, median: f64) -> f64 {
    3.0 * median - 2.0 * mean
}

/// Row-wise Pearson modes and their average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimates {
    pub modes: Vec<f64>,
    pub mean_mode: f64,
}

pub fn estimate_modes_pearson(means: &[f64], medians: &[f64]) -> Result<ModeEstimates> {
    if means.len() != medians.len() {
        return Err(Error::DimensionMismatch {
            expected: means.len(),
            found: medians.len(),
        });
    }
    if means.is_empty() {
        return Err(Error::Empty("mode estimates".into()));
    }
    let modes: Vec<f64> = means.iter().zip(medians).map(|(&m, &md)| pearson_mode(m, md)).collect();
    let mean_mode = compensated_sum(modes.iter().copied()) / modes.len() as f64;
    Ok(ModeEstimates { modes, mean_mode })
}

/// Exact binomial test that modes fall above and below zero equally often.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryTest {
    /// Non-zero modes counted.
    pub n_used: usize,
    pub n_positive: usize,
    /// Two-sided p-value, `min(1, 2 min(P(X <= k), P(X >= k)))` under `Bin(n, 1/2)`.
    pub p_value: f64,
    /// `alpha / n_tests`.
    pub threshold: f64,
    pub reject: bool,
    /// Clopper–Pearson interval for the proportion of positive modes at
    /// level `1 - threshold`.
    pub interval: (f64, f64),
}

pub fn test_mode_symmetry(modes: &[f64], alpha: f64, n_tests: usize) -> Result<SymmetryTest> {
    if modes.is_empty() {
        return Err(Error::Empty("mode list".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 1)")));
    }
    if n_tests == 0 {
        return Err(Error::Domain("n_tests must be at least 1".into()));
    }
    let threshold = alpha / n_tests as f64;
    let n = modes.iter().filter(|&&m| m != 0.0).count() as u64;
    let k = modes.iter().filter(|&&m| m > 0.0).count() as u64;
    if n == 0 {
        return Ok(SymmetryTest {
            n_used: 0,
            n_positive: 0,
            p_value: 1.0,
            threshold,
            reject: false,
            interval: (0.0, 1.0),
        });
    }
    let lower_tail = special::binomial_cdf(k, n, 0.5);
    let upper_tail = special::binomial_sf(k, n, 0.5);
    let p_value = (2.0 * lower_tail.min(upper_tail)).min(1.0);
    Ok(SymmetryTest {
        n_used: n as usize,
        n_positive: k as usize,
        p_value,
        threshold,
        reject: p_value < threshold,
        interval: clopper_pearson(k, n, threshold),
    })
}

/// Exact two-sided confidence interval for a binomial proportion.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        special::inv_reg_inc_beta(0.5 * alpha, kf, nf - kf + 1.0)
    };
    let hi = if k == n {
        1.0
    } else {
        special::inv_reg_inc_beta(1.0 - 0.5 * alpha, kf + 1.0, nf - kf)
    };
    (lo, hi)
}

/// One row of the summary-statistics input: microdata of one variable in
/// one group, described by its mean, median, minimum and maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: String,
    pub variable: String,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// Triangular latent for one variable from summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangularModeFit {
    pub variable: String,
    /// Pearson modes on the original scale.
    pub raw_modes: Vec<f64>,
    /// Modes mapped to `[-1, 1]` with each row's `[min, max]`.
    pub scaled_modes: Vec<f64>,
    /// Average scaled mode, clamped to `[-1, 1]`.
    pub mean_scaled_mode: f64,
    pub test: SymmetryTest,
    /// `mean_scaled_mode` if symmetry is rejected, otherwise 0.
    pub mode: f64,
    /// Rows skipped because `min == max`.
    pub skipped_rows: usize,
}

impl TriangularModeFit {
    pub fn latent(&self) -> LatentDistribution {
        LatentDistribution::Triangular { mode: self.mode }
    }
}

/// Pearson modes per variable, scaled to `[-1, 1]`, averaged, and tested
/// for symmetry with a Bonferroni correction over `n_tests` tests (default:
/// the number of variables). Variables keep their first-appearance order.
pub fn fit_triangular_pearson(
    rows: &[SummaryRow],
    alpha: f64,
    n_tests: Option<usize>,
) -> Result<Vec<TriangularModeFit>> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_var: BTreeMap<&str, Vec<&SummaryRow>> = BTreeMap::new();
    for row in rows {
        if !by_var.contains_key(row.variable.as_str()) {
            order.push(&row.variable);
        }
        by_var.entry(&row.variable).or_default().push(row);
    }
    if order.is_empty() {
        return Err(Error::Empty("summary statistics".into()));
    }
    let n_tests = n_tests.unwrap_or(order.len());
    order
        .iter()
        .map(|&var| {
            let group = &by_var[var];
            let mut raw_modes = Vec::new();
            let mut scaled_modes = Vec::new();
            let mut skipped_rows = 0;
            for row in group {
                let iv = Interval::new(row.min, row.max)?;
                if iv.is_degenerate() {
                    skipped_rows += 1;
                    continue;
                }
                let mo = pearson_mode(row.mean, row.median);
                raw_modes.push(mo);
                scaled_modes.push(2.0 * (mo - iv.centre()) / iv.range());
            }
            if scaled_modes.is_empty() {
                return Err(Error::Empty(format!("no usable rows for variable '{var}'")));
            }
            let mean_scaled_mode =
                (compensated_sum(scaled_modes.iter().copied()) / scaled_modes.len() as f64).clamp(-1.0, 1.0);
            let test = test_mode_symmetry(&scaled_modes, alpha, n_tests)?;
            let mode = if test.reject { mean_scaled_mode } else { 0.0 };
            Ok(TriangularModeFit {
                variable: var.to_string(),
                raw_modes,
                scaled_modes,
                mean_scaled_mode,
                test,
                mode,
                skipped_rows,
            })
        })
        .collect()
}

/// Machine-readable record of one variable's fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub variable: String,
    pub family: String,
    pub parameters: BTreeMap<String, f64>,
    pub n_used: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

impl FitReport {
    /// Describes a fitted latent together with the sample it came from.
    pub fn new(variable: &str, latent: &LatentDistribution, sample: &[f64]) -> Self {
        let mut parameters = BTreeMap::new();
        match *latent {
            LatentDistribution::Triangular { mode } => {
                parameters.insert("mode".into(), mode);
            }
            LatentDistribution::TruncatedNormal { sigma2 } => {
                parameters.insert("sigma2".into(), sigma2);
            }
            LatentDistribution::ShiftedBeta { alpha, beta } => {
                parameters.insert("alpha".into(), alpha);
                parameters.insert("beta".into(), beta);
            }
            LatentDistribution::Kde(ref k) => {
                parameters.insert("bandwidth".into(), k.bandwidth());
                parameters.insert("raw_mass".into(), k.raw_mass());
            }
            _ => {}
        }
        let m = latent.moments();
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("fitted_mean".into(), m.mean);
        diagnostics.insert("fitted_second_moment".into(), m.second_moment);
        if let Ok((mean, second)) = raw_moments(sample) {
            diagnostics.insert("sample_mean".into(), mean);
            diagnostics.insert("sample_second_moment".into(), second);
        }
        Self {
            variable: variable.to_string(),
            family: latent.family().to_string(),
            parameters,
            n_used: sample.len(),
            diagnostics,
        }
    }
}

/// What is known about one variable's latent.
#[derive(Debug, Clone, Default)]
pub struct VariableEstimate {
    pub name: String,
    pub latent: Option<LatentDistribution>,
    pub sample: Option<Vec<f64>>,
}

/// Moment summary from fitted latents and/or raw scaled samples.
///
/// Raw sample moments give `Psi` and the diagonal of the cross-moment
/// matrix; off-diagonal cross-moments integrate products of the fitted
/// quantile functions. A variable with a sample but no fitted latent gets a
/// KDE fit for the off-diagonal terms.
pub fn empirical_moment_summary(vars: &[VariableEstimate]) -> Result<MomentSummary> {
    if vars.is_empty() {
        return Err(Error::Empty("no variables".into()));
    }
    let mut latents = Vec::with_capacity(vars.len());
    let mut psi = Vec::with_capacity(vars.len());
    let mut second = Vec::with_capacity(vars.len());
    for v in vars {
        let sample = v.sample.as_deref().filter(|s| !s.is_empty());
        let latent = match (&v.latent, sample) {
            (Some(l), _) => l.clone(),
            (None, Some(s)) => fit_kde(s, None)?,
            (None, None) => return Err(Error::MissingSpec(v.name.clone())),
        };
        let (m, e2) = match sample {
            Some(s) if !latent.is_degenerate() => raw_moments(s)?,
            _ => {
                let mo = latent.moments();
                (mo.mean, mo.second_moment)
            }
        };
        psi.push(m);
        second.push(e2);
        latents.push(latent);
    }
    let p = vars.len();
    let mut euu = Matrix::from_diagonal(&second);
    for i in 0..p {
        for j in i + 1..p {
            let e = cross_moment(&latents[i], &latents[j]);
            euu[(i, j)] = e;
            euu[(j, i)] = e;
        }
    }
    MomentSummary::from_parts(psi, euu)
}
