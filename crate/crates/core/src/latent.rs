//! Latent microdata distributions on `[-1, 1]`.
//!
//! A microdata value inside an interval with centre `c` and range `r` is
//! modelled as `V = c + U * r / 2`, where `U` is a latent random variable
//! supported on `[-1, 1]`. Everything the distance and covariance formulas
//! need from `U` is its quantile function, its first two moments, and the
//! integral of products of quantile functions (the cross-moment).

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, DEFAULT_TOLERANCE};
use crate::special;

/// Number of grid points used to tabulate a KDE distribution function.
pub const KDE_GRID_POINTS: usize = 1025;

/// Variance of the normal law before truncation when none is given.
pub const DEFAULT_TRUNCATED_NORMAL_SIGMA2: f64 = 1.0 / 9.0;

/// First two moments of a latent variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

/// A distribution for the scaled microdata weight `U`, supported on `[-1, 1]`.
#[derive(Debug, Clone)]
pub enum LatentDistribution {
    Uniform,
    /// Triangular on `[-1, 1]` with the given mode.
    Triangular {
        mode: f64,
    },
    /// Symmetric "V" shape with density `|u|`.
    InvertedTriangular,
    /// `N(0, sigma2)` truncated to `[-1, 1]`.
    TruncatedNormal {
        sigma2: f64,
    },
    /// `U = 2W - 1` with `W ~ Beta(alpha, beta)`.
    ShiftedBeta {
        alpha: f64,
        beta: f64,
    },
    Kde(Kde),
    /// Point mass at zero, used for zero-range variables.
    Degenerate,
}

impl LatentDistribution {
    pub fn triangular(mode: f64) -> Result<Self> {
        let d = Self::Triangular { mode };
        d.validate()?;
        Ok(d)
    }

    pub fn truncated_normal(sigma2: f64) -> Result<Self> {
        let d = Self::TruncatedNormal { sigma2 };
        d.validate()?;
        Ok(d)
    }

    pub fn shifted_beta(alpha: f64, beta: f64) -> Result<Self> {
        let d = Self::ShiftedBeta { alpha, beta };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Triangular { mode } if !(-1.0..=1.0).contains(&mode) => {
                Err(Error::InvalidLatent(format!("triangular mode {mode} outside [-1, 1]")))
            }
            Self::TruncatedNormal { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => Err(Error::InvalidLatent(
                format!("truncated normal sigma2 {sigma2} must be positive"),
            )),
            Self::ShiftedBeta { alpha, beta }
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) =>
            {
                Err(Error::InvalidLatent(format!(
                    "beta shape parameters ({alpha}, {beta}) must be positive"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Short family identifier, as used in JSON specs.
    pub fn family(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Triangular { .. } => "triangular",
            Self::InvertedTriangular => "inverted_triangular",
            Self::TruncatedNormal { .. } => "truncated_normal",
            Self::ShiftedBeta { .. } => "shifted_beta",
            Self::Kde(_) => "kde",
            Self::Degenerate => "degenerate",
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Self::Degenerate)
    }

    /// True for families known to be symmetric about zero.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            Self::Uniform | Self::InvertedTriangular | Self::TruncatedNormal { .. } | Self::Degenerate => true,
            Self::Triangular { mode } => mode == 0.0,
            Self::ShiftedBeta { alpha, beta } => alpha == beta,
            Self::Kde(_) => false,
        }
    }

    /// Generalized inverse distribution function, `t` in `(0, 1]`.
    pub fn quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Domain(format!("quantile probability {t} outside (0, 1]")));
        }
        self.validate()?;
        Ok(self.quantile_unchecked(t))
    }

    /// Quantile without argument checks; `t` is clamped to `[0, 1]`.
    pub fn quantile_unchecked(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let q = match *self {
            Self::Uniform => 2.0 * t - 1.0,
            Self::Triangular { mode } => {
                let split = 0.5 * (mode + 1.0);
                if t <= split {
                    -1.0 + (2.0 * t * (mode + 1.0)).sqrt()
                } else {
                    1.0 - (2.0 * (1.0 - t) * (1.0 - mode)).sqrt()
                }
            }
            Self::InvertedTriangular => {
                if t <= 0.5 {
                    -(1.0 - 2.0 * t).sqrt()
                } else {
                    (2.0 * t - 1.0).sqrt()
                }
            }
            Self::TruncatedNormal { sigma2 } => {
                let sigma = sigma2.sqrt();
                let a = 1.0 / sigma;
                let lo = special::normal_cdf(-a);
                let hi = special::normal_cdf(a);
                sigma * special::normal_quantile(lo + t * (hi - lo))
            }
            Self::ShiftedBeta { alpha, beta } => 2.0 * special::inv_reg_inc_beta(t, alpha, beta) - 1.0,
            Self::Kde(ref k) => k.quantile(t),
            Self::Degenerate => 0.0,
        };
        q.clamp(-1.0, 1.0)
    }

    /// Distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            return if x >= 0.0 { 1.0 } else { 0.0 };
        }
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match *self {
            Self::Uniform => 0.5 * (x + 1.0),
            Self::Triangular { mode } => {
                if x <= mode {
                    (x + 1.0).powi(2) / (2.0 * (mode + 1.0))
                } else {
                    1.0 - (1.0 - x).powi(2) / (2.0 * (1.0 - mode))
                }
            }
            Self::InvertedTriangular => {
                if x < 0.0 {
                    0.5 * (1.0 - x * x)
                } else {
                    0.5 * (1.0 + x * x)
                }
            }
            Self::TruncatedNormal { sigma2 } => {
                let sigma = sigma2.sqrt();
                let lo = special::normal_cdf(-1.0 / sigma);
                let hi = special::normal_cdf(1.0 / sigma);
                (special::normal_cdf(x / sigma) - lo) / (hi - lo)
            }
            Self::ShiftedBeta { alpha, beta } => special::reg_inc_beta(0.5 * (x + 1.0), alpha, beta),
            Self::Kde(ref k) => k.cdf(x),
            Self::Degenerate => unreachable!(),
        }
    }

    /// Density on `[-1, 1]`; zero outside. The degenerate law has no density
    /// and reports zero everywhere.
    pub fn pdf(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        match *self {
            Self::Uniform => 0.5,
            Self::Triangular { mode } => {
                if x < mode {
                    (x + 1.0) / (mode + 1.0)
                } else if mode < 1.0 {
                    (1.0 - x) / (1.0 - mode)
                } else {
                    (x + 1.0) / 2.0
                }
            }
            Self::InvertedTriangular => x.abs(),
            Self::TruncatedNormal { sigma2 } => {
                let sigma = sigma2.sqrt();
                let z = special::normal_cdf(1.0 / sigma) - special::normal_cdf(-1.0 / sigma);
                special::normal_pdf(x / sigma) / (sigma * z)
            }
            Self::ShiftedBeta { alpha, beta } => 0.5 * special::beta_pdf(0.5 * (x + 1.0), alpha, beta),
            Self::Kde(ref k) => k.pdf(x),
            Self::Degenerate => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().mean
    }

    pub fn second_moment(&self) -> f64 {
        self.moments().second_moment
    }

    pub fn variance(&self) -> f64 {
        self.moments().variance
    }

    /// Mean, second raw moment and variance in closed form (piecewise-exact
    /// for KDE).
    pub fn moments(&self) -> Moments {
        let (mean, second) = match *self {
            Self::Uniform => (0.0, 1.0 / 3.0),
            Self::Triangular { mode } => (mode / 3.0, (mode * mode + 1.0) / 6.0),
            Self::InvertedTriangular => (0.0, 0.5),
            Self::TruncatedNormal { sigma2 } => {
                let a = 1.0 / sigma2.sqrt();
                let z = 2.0 * special::normal_cdf(a) - 1.0;
                (0.0, sigma2 * (1.0 - 2.0 * a * special::normal_pdf(a) / z))
            }
            Self::ShiftedBeta { alpha, beta } => {
                let s = alpha + beta;
                let ew = alpha / s;
                let ew2 = alpha * (alpha + 1.0) / (s * (s + 1.0));
                (2.0 * ew - 1.0, 4.0 * ew2 - 4.0 * ew + 1.0)
            }
            Self::Kde(ref k) => (k.mean(), k.second_moment()),
            Self::Degenerate => (0.0, 0.0),
        };
        let variance = match *self {
            // Avoid cancellation in E(U^2) - E(U)^2 where a direct form exists.
            Self::Triangular { mode } => (mode * mode + 3.0) / 18.0,
            Self::ShiftedBeta { alpha, beta } => {
                let s = alpha + beta;
                4.0 * alpha * beta / (s * s * (s + 1.0))
            }
            _ => (second - mean * mean).max(0.0),
        };
        Moments {
            mean,
            second_moment: second,
            variance,
        }
    }

    /// Points in `(0, 1)` where the quantile function is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Triangular { mode } => vec![0.5 * (mode + 1.0)],
            Self::InvertedTriangular => vec![0.5],
            Self::Kde(ref k) => k.breakpoints(),
            _ => Vec::new(),
        }
    }

    /// Points of `[0, 1]` near which the quantile function may behave like a
    /// fractional power of the distance: both ends, and the antimode of the
    /// inverted triangular law, where the density vanishes.
    pub fn singular_points(&self) -> Vec<f64> {
        match *self {
            Self::Degenerate | Self::Uniform => Vec::new(),
            Self::InvertedTriangular => vec![0.0, 0.5, 1.0],
            _ => vec![0.0, 1.0],
        }
    }
}

/// Panel boundaries for integrating products of the given quantile
/// functions over `(0, 1)`: every breakpoint, plus dyadic grading towards
/// every singular point.
pub fn quadrature_breakpoints(latents: &[&LatentDistribution]) -> Vec<f64> {
    let mut singular: Vec<f64> = latents.iter().flat_map(|u| u.singular_points()).collect();
    singular.sort_by(f64::total_cmp);
    singular.dedup();
    let mut out = quadrature::dyadic_grading(&singular);
    for u in latents {
        out.extend(u.breakpoints());
    }
    out
}

impl PartialEq for LatentDistribution {
    fn eq(&self, other: &Self) -> bool {
        use LatentDistribution::*;
        match (self, other) {
            (Uniform, Uniform) | (InvertedTriangular, InvertedTriangular) | (Degenerate, Degenerate) => true,
            (Triangular { mode: a }, Triangular { mode: b }) => a == b,
            (TruncatedNormal { sigma2: a }, TruncatedNormal { sigma2: b }) => a == b,
            (ShiftedBeta { alpha: a1, beta: b1 }, ShiftedBeta { alpha: a2, beta: b2 }) => a1 == a2 && b1 == b2,
            (Kde(a), Kde(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for LatentDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Uniform => write!(f, "uniform"),
            Self::Triangular { mode } => write!(f, "triangular:{mode}"),
            Self::InvertedTriangular => write!(f, "inverted-triangular"),
            Self::TruncatedNormal { sigma2 } => write!(f, "truncated-normal:{sigma2}"),
            Self::ShiftedBeta { alpha, beta } => write!(f, "beta:{alpha},{beta}"),
            Self::Kde(ref k) => write!(f, "kde(h={})", k.bandwidth()),
            Self::Degenerate => write!(f, "degenerate"),
        }
    }
}

impl FromStr for LatentDistribution {
    type Err = Error;

    /// Parses the compact form used on the command line, e.g. `uniform`,
    /// `triangular:-0.34`, `beta:0.44,2.15`, `truncated-normal:0.1111`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let name = name.trim().to_ascii_lowercase().replace('-', "_");
        let nums = |a: Option<&str>| -> Result<Vec<f64>> {
            a.map(|a| {
                a.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidLatent(format!("bad number '{x}' in '{s}'")))
                    })
                    .collect()
            })
            .unwrap_or_else(|| Ok(Vec::new()))
        };
        let args = nums(args)?;
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidLatent(format!("'{s}' expects {n} parameter(s)")))
            }
        };
        match name.as_str() {
            "uniform" | "unif" => {
                want(0)?;
                Ok(Self::Uniform)
            }
            "triangular" | "triang" => {
                if args.is_empty() {
                    Ok(Self::Triangular { mode: 0.0 })
                } else {
                    want(1)?;
                    Self::triangular(args[0])
                }
            }
            "inverted_triangular" | "invtriang" => {
                want(0)?;
                Ok(Self::InvertedTriangular)
            }
            "truncated_normal" | "normal" => {
                if args.is_empty() {
                    Ok(Self::TruncatedNormal {
                        sigma2: DEFAULT_TRUNCATED_NORMAL_SIGMA2,
                    })
                } else {
                    want(1)?;
                    Self::truncated_normal(args[0])
                }
            }
            "beta" | "shifted_beta" => {
                want(2)?;
                Self::shifted_beta(args[0], args[1])
            }
            "degenerate" | "point" => {
                want(0)?;
                Ok(Self::Degenerate)
            }
            _ => Err(Error::InvalidLatent(format!("unknown latent family '{s}'"))),
        }
    }
}

/// Cross-moment `E(U1, U2) = int_0^1 F1^{-1}(t) F2^{-1}(t) dt`.
///
/// Closed forms are used for degenerate inputs, identical distributions and
/// the uniform/triangular pair; everything else is integrated numerically
/// with panels split at both distributions' quantile breakpoints.
pub fn cross_moment(d1: &LatentDistribution, d2: &LatentDistribution) -> f64 {
    use LatentDistribution::*;
    if d1.is_degenerate() || d2.is_degenerate() {
        return 0.0;
    }
    if d1 == d2 {
        return d1.second_moment();
    }
    match (d1, d2) {
        (Uniform, Triangular { mode }) | (Triangular { mode }, Uniform) => (mode * mode + 7.0) / 30.0,
        _ => cross_moment_quadrature(d1, d2),
    }
}

/// Cross-moment by adaptive quadrature only.
pub fn cross_moment_quadrature(d1: &LatentDistribution, d2: &LatentDistribution) -> f64 {
    quadrature::integrate_adaptive(
        |t| d1.quantile_unchecked(t) * d2.quantile_unchecked(t),
        0.0,
        1.0,
        &quadrature_breakpoints(&[d1, d2]),
        DEFAULT_TOLERANCE,
    )
}

/// Correlation between two quantile functions,
/// `(E(U1,U2) - E(U1)E(U2)) / sqrt(Var U1 Var U2)`.
pub fn quantile_correlation(d1: &LatentDistribution, d2: &LatentDistribution) -> Result<f64> {
    let m1 = d1.moments();
    let m2 = d2.moments();
    if m1.variance <= 0.0 {
        return Err(Error::ZeroVarianceLatent(d1.to_string()));
    }
    if m2.variance <= 0.0 {
        return Err(Error::ZeroVarianceLatent(d2.to_string()));
    }
    if d1 == d2 {
        return Ok(1.0);
    }
    let e = cross_moment(d1, d2);
    Ok((e - m1.mean * m2.mean) / (m1.variance * m2.variance).sqrt())
}

/// Quantile of the microdata in an interval with centre `c` and range `r`:
/// `c + (r / 2) F_U^{-1}(t)`.
pub fn microdata_quantile(c: f64, r: f64, dist: &LatentDistribution, t: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(Error::Domain(format!("range {r} must be non-negative")));
    }
    if r == 0.0 {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Domain(format!("quantile probability {t} outside (0, 1]")));
        }
        return Ok(c);
    }
    Ok(c + 0.5 * r * dist.quantile(t)?)
}

// ---------------------------------------------------------------------------
// Kernel density estimate
// ---------------------------------------------------------------------------

/// Gaussian KDE on `[-1, 1]` with reflection at both boundaries.
///
/// The distribution function is tabulated at [`KDE_GRID_POINTS`] equally
/// spaced points at construction and interpolated linearly in between, so the
/// fitted law is the piecewise-uniform distribution with that CDF. Its
/// quantile function is piecewise linear, which makes the moments exact sums
/// over grid cells.
#[derive(Clone)]
pub struct Kde {
    inner: Arc<KdeGrid>,
}

struct KdeGrid {
    bandwidth: f64,
    n_samples: usize,
    raw_mass: f64,
    cdf: Vec<f64>,
    mean: f64,
    second_moment: f64,
    sample_path: Option<String>,
}

impl fmt::Debug for Kde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kde")
            .field("bandwidth", &self.inner.bandwidth)
            .field("n_samples", &self.inner.n_samples)
            .field("mean", &self.inner.mean)
            .field("second_moment", &self.inner.second_moment)
            .finish()
    }
}

impl PartialEq for Kde {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.bandwidth == other.inner.bandwidth && self.inner.cdf == other.inner.cdf)
    }
}

fn grid_step() -> f64 {
    2.0 / (KDE_GRID_POINTS - 1) as f64
}

fn grid_x(k: usize) -> f64 {
    -1.0 + k as f64 * grid_step()
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR / 1.34) n^{-1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> Option<f64> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    if sorted[n - 1] == sorted[0] {
        return None;
    }
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if spread > 0.0 {
        Some(0.9 * spread * (n as f64).powf(-0.2))
    } else {
        None
    }
}

impl Kde {
    /// Fits the reflected Gaussian KDE to samples in `[-1, 1]`.
    ///
    /// Samples within `1e-9` outside the support are clamped; anything further
    /// out is an error. The bandwidth defaults to Silverman's rule.
    pub fn fit(samples: &[f64], bandwidth: Option<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("KDE sample".into()));
        }
        let mut clamped = Vec::with_capacity(samples.len());
        for (i, &u) in samples.iter().enumerate() {
            if !u.is_finite() || !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&u) {
                return Err(Error::OutsideInterval {
                    lower: -1.0,
                    upper: 1.0,
                    positions: vec![i],
                });
            }
            clamped.push(u.clamp(-1.0, 1.0));
        }
        let h = match bandwidth {
            Some(h) if h > 0.0 && h.is_finite() => h,
            Some(h) => return Err(Error::Domain(format!("bandwidth {h} must be positive"))),
            None => silverman_bandwidth(&clamped)
                .ok_or_else(|| Error::Domain("cannot choose a bandwidth for a constant sample".into()))?,
        };
        Ok(Self {
            inner: Arc::new(KdeGrid::build(&clamped, h)),
        })
    }

    /// Records the file the sample was read from, for serialization.
    pub fn with_sample_path(self, path: impl Into<String>) -> Self {
        let mut grid = (*self.inner).clone_grid();
        grid.sample_path = Some(path.into());
        Self { inner: Arc::new(grid) }
    }

    pub fn bandwidth(&self) -> f64 {
        self.inner.bandwidth
    }

    pub fn n_samples(&self) -> usize {
        self.inner.n_samples
    }

    /// Mass of the reflected kernel sum inside `[-1, 1]` before normalization.
    pub fn raw_mass(&self) -> f64 {
        self.inner.raw_mass
    }

    pub fn sample_path(&self) -> Option<&str> {
        self.inner.sample_path.as_deref()
    }

    pub fn mean(&self) -> f64 {
        self.inner.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.inner.second_moment
    }

    /// Tabulated distribution function values at the grid points.
    pub fn cdf_table(&self) -> &[f64] {
        &self.inner.cdf
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let pos = (x + 1.0) / grid_step();
        let k = (pos.floor() as usize).min(KDE_GRID_POINTS - 2);
        let frac = pos - k as f64;
        let f = &self.inner.cdf;
        f[k] + frac * (f[k + 1] - f[k])
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        let pos = (x + 1.0) / grid_step();
        let k = (pos.floor() as usize).min(KDE_GRID_POINTS - 2);
        let f = &self.inner.cdf;
        (f[k + 1] - f[k]) / grid_step()
    }

    /// Smallest `x` with `F(x) >= t`, located by bisection over the grid and
    /// solved exactly within the bracketing cell.
    pub fn quantile(&self, t: f64) -> f64 {
        let f = &self.inner.cdf;
        if t <= 0.0 {
            return -1.0;
        }
        if t >= 1.0 {
            let last = f.iter().position(|&v| v >= 1.0).unwrap_or(KDE_GRID_POINTS - 1);
            return grid_x(last);
        }
        // Invariant: f[lo] < t <= f[hi].
        let mut lo = 0usize;
        let mut hi = KDE_GRID_POINTS - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if f[mid] < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let df = f[hi] - f[lo];
        let frac = if df > 0.0 { (t - f[lo]) / df } else { 1.0 };
        grid_x(lo) + frac * grid_step()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.inner.cdf.iter().copied().filter(|&v| v > 0.0 && v < 1.0).collect();
        out.dedup();
        out
    }
}

impl KdeGrid {
    fn clone_grid(&self) -> Self {
        Self {
            bandwidth: self.bandwidth,
            n_samples: self.n_samples,
            raw_mass: self.raw_mass,
            cdf: self.cdf.clone(),
            mean: self.mean,
            second_moment: self.second_moment,
            sample_path: self.sample_path.clone(),
        }
    }

    fn build(samples: &[f64], h: f64) -> Self {
        let m = KDE_GRID_POINTS;
        let step = grid_step();
        // Linear binning of the sample onto the grid.
        let mut weights = vec![0.0; m];
        for &u in samples {
            let pos = (u + 1.0) / step;
            let j = (pos.floor() as usize).min(m - 2);
            let frac = pos - j as f64;
            weights[j] += 1.0 - frac;
            weights[j + 1] += frac;
        }
        // Gaussian CDF at every integer offset of grid steps; the mirror
        // images of the grid about -1 and +1 are again grid points.
        let span = 2 * (m - 1);
        let table: Vec<f64> = (0..=2 * span)
            .map(|i| {
                let d = i as f64 - span as f64;
                special::normal_cdf(d * step / h)
            })
            .collect();
        let phi = |d: isize| table[(d + span as isize) as usize];
        let n = samples.len() as f64;
        let mut raw = vec![0.0; m];
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let j = j as isize;
            let mirror_hi = span as isize - j;
            let base = phi(-j) + phi(j) + phi(-mirror_hi);
            for (k, slot) in raw.iter_mut().enumerate() {
                let k = k as isize;
                *slot += w * (phi(k - j) + phi(k + j) + phi(k - mirror_hi) - base);
            }
        }
        let raw_mass = raw[m - 1] / n;
        let mut cdf: Vec<f64> = raw.iter().map(|v| v / raw[m - 1]).collect();
        cdf[0] = 0.0;
        cdf[m - 1] = 1.0;
        for k in 1..m {
            if cdf[k] < cdf[k - 1] {
                cdf[k] = cdf[k - 1];
            }
        }
        let mut mean = quadrature::CompensatedSum::new();
        let mut second = quadrature::CompensatedSum::new();
        for k in 0..m - 1 {
            let p = cdf[k + 1] - cdf[k];
            if p == 0.0 {
                continue;
            }
            let (a, b) = (grid_x(k), grid_x(k + 1));
            mean.add(p * 0.5 * (a + b));
            second.add(p * (a * a + a * b + b * b) / 3.0);
        }
        Self {
            bandwidth: h,
            n_samples: samples.len(),
            raw_mass,
            cdf,
            mean: mean.value(),
            second_moment: second.value(),
            sample_path: None,
        }
    }
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

/// Serializable description of a latent distribution, e.g.
/// `{"family": "triangular", "mode": -0.34}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

impl LatentSpec {
    pub fn family(family: &str) -> Self {
        Self {
            family: family.to_string(),
            ..Self::default()
        }
    }

    /// Resolves the spec into a distribution. A relative `sample_path` is
    /// resolved against `base_dir` when given.
    pub fn to_distribution(&self, base_dir: Option<&Path>) -> Result<LatentDistribution> {
        let fam = self.family.trim().to_ascii_lowercase().replace('-', "_");
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidLatent(format!("family '{}' requires field '{name}'", self.family)))
        };
        let d = match fam.as_str() {
            "uniform" => LatentDistribution::Uniform,
            "triangular" => LatentDistribution::triangular(self.mode.unwrap_or(0.0))?,
            "inverted_triangular" => LatentDistribution::InvertedTriangular,
            "truncated_normal" => {
                LatentDistribution::truncated_normal(self.sigma2.unwrap_or(DEFAULT_TRUNCATED_NORMAL_SIGMA2))?
            }
            "shifted_beta" | "beta" => {
                LatentDistribution::shifted_beta(need(self.alpha, "alpha")?, need(self.beta, "beta")?)?
            }
            "degenerate" => LatentDistribution::Degenerate,
            "kde" => {
                let path = self
                    .sample_path
                    .as_deref()
                    .ok_or_else(|| Error::InvalidLatent("family 'kde' requires field 'sample_path'".into()))?;
                let full = match base_dir {
                    Some(dir) if Path::new(path).is_relative() => dir.join(path),
                    _ => Path::new(path).to_path_buf(),
                };
                let samples = read_sample_file(&full)?;
                LatentDistribution::Kde(Kde::fit(&samples, self.bandwidth)?.with_sample_path(path))
            }
            other => return Err(Error::InvalidLatent(format!("unknown latent family '{other}'"))),
        };
        Ok(d)
    }
}

impl From<&LatentDistribution> for LatentSpec {
    fn from(d: &LatentDistribution) -> Self {
        let mut spec = LatentSpec::family(d.family());
        match *d {
            LatentDistribution::Triangular { mode } => spec.mode = Some(mode),
            LatentDistribution::TruncatedNormal { sigma2 } => spec.sigma2 = Some(sigma2),
            LatentDistribution::ShiftedBeta { alpha, beta } => {
                spec.alpha = Some(alpha);
                spec.beta = Some(beta);
            }
            LatentDistribution::Kde(ref k) => {
                spec.bandwidth = Some(k.bandwidth());
                spec.sample_path = k.sample_path().map(str::to_string);
            }
            _ => {}
        }
        spec
    }
}

/// Reads whitespace- or comma-separated numbers from a text file.
pub fn read_sample_file(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v = tok.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("not a number: '{tok}'"),
            })?;
            out.push(v);
        }
    }
    Ok(out)
}
