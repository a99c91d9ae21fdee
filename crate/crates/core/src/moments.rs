//! Barycentres, Fréchet variance and barycentric covariance matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalBox, IntervalFrame};
use crate::latent::{quadrature_breakpoints, LatentDistribution};
use crate::linalg::Matrix;
use crate::mallows::{dist_sq_iid, MomentSummary};
use crate::quadrature::{self, CompensatedSum};

/// Divisor used for sample covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divisor {
    /// `1 / n`, the plug-in (empirical distribution) convention.
    N,
    /// `1 / (n - 1)`.
    NMinusOne,
}

impl Divisor {
    fn value(self, n: usize) -> f64 {
        match self {
            Divisor::N => n as f64,
            Divisor::NMinusOne => (n - 1) as f64,
        }
    }
}

/// Which algebraic form produced a covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceForm {
    /// Arbitrary latents: Schur product with the cross-moment matrix.
    General,
    /// Identically distributed latents.
    Identical,
    /// Identically distributed, mean-zero latents.
    IdenticalMeanZero,
}

/// Sample barycentre of a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barycentre {
    pub centres: Vec<f64>,
    pub ranges: Vec<f64>,
    /// Mean squared distance from the rows to the barycentre.
    pub frechet_variance: f64,
}

impl Barycentre {
    pub fn intervals(&self) -> Vec<Interval> {
        self.centres
            .iter()
            .zip(&self.ranges)
            .map(|(&c, &r)| Interval {
                lower: c - 0.5 * r,
                upper: c + 0.5 * r,
            })
            .collect()
    }

    pub fn to_box(&self, latents: Vec<LatentDistribution>) -> Result<IntervalBox> {
        IntervalBox::with_degenerate_points(self.intervals(), latents)
    }
}

/// Barycentric covariance matrix with the pieces it was assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicCovariance {
    pub sigma_b: Matrix,
    /// `Cov(C_i, C_j)`.
    pub sigma_cc: Matrix,
    /// `Cov(R_i, R_j)`.
    pub sigma_rr: Matrix,
    /// `Cov(C_i, R_j)`.
    pub sigma_cr: Matrix,
    pub summary: MomentSummary,
    pub divisor: Divisor,
    pub form: CovarianceForm,
    pub n: usize,
    /// Smallest eigenvalue of `sigma_b`; reported, not constrained.
    pub min_eigenvalue: f64,
}

impl SymbolicCovariance {
    pub fn correlation(&self, names: &[String]) -> Result<Matrix> {
        correlation_from_cov(&self.sigma_b, names)
    }

    pub fn trace(&self) -> f64 {
        self.sigma_b.trace()
    }
}

fn require_rows(frame: &IntervalFrame, needed: usize) -> Result<()> {
    if frame.n_rows() == 0 {
        return Err(Error::Empty("interval frame has no rows".into()));
    }
    if frame.n_rows() < needed {
        return Err(Error::TooFewObservations {
            needed,
            found: frame.n_rows(),
        });
    }
    Ok(())
}

fn column_means(m: &Matrix) -> Vec<f64> {
    let n = m.rows() as f64;
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m[(i, j)]).collect::<CompensatedSum>().value() / n)
        .collect()
}

/// `[i][j] = Cov(x_i, y_j)` between the columns of two `n x p` matrices.
pub fn cross_covariance(x: &Matrix, y: &Matrix, divisor: Divisor) -> Result<Matrix> {
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: y.rows(),
        });
    }
    let n = x.rows();
    if n < 2 && divisor == Divisor::NMinusOne || n == 0 {
        return Err(Error::TooFewObservations { needed: 2, found: n });
    }
    let mx = column_means(x);
    let my = column_means(y);
    let d = divisor.value(n);
    Ok(Matrix::from_fn(x.cols(), y.cols(), |i, j| {
        (0..n)
            .map(|k| (x[(k, i)] - mx[i]) * (y[(k, j)] - my[j]))
            .collect::<CompensatedSum>()
            .value()
            / d
    }))
}

/// Componentwise means of centres and ranges, with the Fréchet variance
/// computed as the mean squared distance of the rows to that barycentre.
pub fn sample_barycentre(frame: &IntervalFrame) -> Result<Barycentre> {
    require_rows(frame, 1)?;
    frame.ensure_valid()?;
    let (c, r) = frame.centres_ranges();
    let centres = column_means(&c);
    let ranges = column_means(&r);
    let frechet_variance = mean_dist_sq_to(frame, &centres, &ranges)?;
    Ok(Barycentre {
        centres,
        ranges,
        frechet_variance,
    })
}

/// Mean squared distance from the rows of a frame to the box with the given
/// centres and ranges, using the frame's latents.
pub fn mean_dist_sq_to(frame: &IntervalFrame, centres: &[f64], ranges: &[f64]) -> Result<f64> {
    require_rows(frame, 1)?;
    let p = frame.n_vars();
    if centres.len() != p || ranges.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: centres.len().min(ranges.len()),
        });
    }
    let target: Vec<Interval> = centres
        .iter()
        .zip(ranges)
        .map(|(&c, &r)| Interval::from_centre_range(c, r))
        .collect::<Result<_>>()?;
    let mut total = CompensatedSum::new();
    for i in 0..frame.n_rows() {
        for (j, t) in target.iter().enumerate() {
            total.add(dist_sq_iid(&frame.get(i, j), t, frame.latent(j)));
        }
    }
    Ok(total.value() / frame.n_rows() as f64)
}

/// Fréchet variance by the trace formula
/// `sum_i Var(C_i) + delta_i Var(R_i) + E(U_i) Cov(C_i, R_i)`.
pub fn frechet_variance(frame: &IntervalFrame) -> Result<f64> {
    require_rows(frame, 1)?;
    frame.ensure_valid()?;
    let (c, r) = frame.centres_ranges();
    let n = frame.n_rows();
    let mc = column_means(&c);
    let mr = column_means(&r);
    let mut total = CompensatedSum::new();
    for j in 0..frame.n_vars() {
        let m = frame.latent(j).moments();
        let delta = 0.25 * m.second_moment;
        for i in 0..n {
            let dc = c[(i, j)] - mc[j];
            let dr = r[(i, j)] - mr[j];
            total.add(dc * dc + delta * dr * dr + m.mean * dc * dr);
        }
    }
    Ok(total.value() / n as f64)
}

/// Barycentric covariance using the frame's latents and divisor `n`.
pub fn symbolic_covariance(frame: &IntervalFrame) -> Result<SymbolicCovariance> {
    let summary = MomentSummary::from_latents(frame.latents());
    symbolic_covariance_with(frame, &summary, Divisor::N)
}

/// Barycentric covariance
/// `S_CC + (E o S_RR) / 4 + (S_CR Psi) / 2 + (Psi S_RC) / 2`
/// for an explicit moment summary.
///
/// When the summary is that of identically distributed latents the reduced
/// forms are used; they perform the same floating-point operations on the
/// entries that survive, so the result is identical to the general form.
pub fn symbolic_covariance_with(
    frame: &IntervalFrame,
    summary: &MomentSummary,
    divisor: Divisor,
) -> Result<SymbolicCovariance> {
    require_rows(frame, 2)?;
    frame.ensure_valid()?;
    let p = frame.n_vars();
    if summary.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: summary.dim(),
        });
    }
    let (c, r) = frame.centres_ranges();
    let scc = cross_covariance(&c, &c, divisor)?;
    let srr = cross_covariance(&r, &r, divisor)?;
    let scr = cross_covariance(&c, &r, divisor)?;
    let psi = &summary.psi;
    let form = if summary.identical() {
        if summary.mean_zero() {
            CovarianceForm::IdenticalMeanZero
        } else {
            CovarianceForm::Identical
        }
    } else {
        CovarianceForm::General
    };
    let sigma_b = match form {
        CovarianceForm::General => Matrix::from_fn(p, p, |i, j| {
            scc[(i, j)]
                + 0.25 * summary.euu[(i, j)] * srr[(i, j)]
                + 0.5 * scr[(i, j)] * psi[j]
                + 0.5 * psi[i] * scr[(j, i)]
        }),
        CovarianceForm::Identical => {
            let (m, e2) = (psi[0], summary.euu[(0, 0)]);
            Matrix::from_fn(p, p, |i, j| {
                scc[(i, j)] + 0.25 * e2 * srr[(i, j)] + 0.5 * scr[(i, j)] * m + 0.5 * m * scr[(j, i)]
            })
        }
        CovarianceForm::IdenticalMeanZero => {
            let e2 = summary.euu[(0, 0)];
            Matrix::from_fn(p, p, |i, j| scc[(i, j)] + 0.25 * e2 * srr[(i, j)])
        }
    };
    // The cross terms are summed in a different order above and below the
    // diagonal; mirror the upper triangle so the result is exactly symmetric.
    let mut sigma_b = sigma_b;
    for i in 0..p {
        for j in i + 1..p {
            sigma_b[(j, i)] = sigma_b[(i, j)];
        }
    }
    let min_eigenvalue = sigma_b.symmetric_eigenvalues()?.first().copied().unwrap_or(f64::NAN);
    Ok(SymbolicCovariance {
        sigma_b,
        sigma_cc: scc,
        sigma_rr: srr,
        sigma_cr: scr,
        summary: summary.clone(),
        divisor,
        form,
        n: frame.n_rows(),
        min_eigenvalue,
    })
}

/// `D^{-1/2} S D^{-1/2}` with `D = diag(S)`.
pub fn correlation_from_cov(cov: &Matrix, names: &[String]) -> Result<Matrix> {
    if !cov.is_square() {
        return Err(Error::DimensionMismatch {
            expected: cov.rows(),
            found: cov.cols(),
        });
    }
    let d = cov.diagonal();
    for (j, &v) in d.iter().enumerate() {
        if !(v > 0.0) {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
            return Err(Error::ZeroVariance(name));
        }
    }
    let s: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    let p = cov.rows();
    Ok(Matrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (s[i] * s[j])
        }
    }))
}

/// Barycentric covariance of variables `i` and `j` by direct quadrature of
/// `(1/n) sum_k int (F_ki^{-1} - F_Bi^{-1})(F_kj^{-1} - F_Bj^{-1}) dt`, where
/// `F_B` is the barycentre's quantile function.
pub fn covariance_quantile_oracle(frame: &IntervalFrame, i: usize, j: usize, panels: usize) -> Result<f64> {
    let p = frame.n_vars();
    if i >= p || j >= p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: i.max(j) + 1,
        });
    }
    Ok(covariance_quantile_oracle_matrix(frame, panels)?[(i, j)])
}

/// All entries of [`covariance_quantile_oracle`], on one fixed composite
/// rule shared by every pair of variables.
pub fn covariance_quantile_oracle_matrix(frame: &IntervalFrame, panels: usize) -> Result<Matrix> {
    require_rows(frame, 2)?;
    let (n, p) = (frame.n_rows(), frame.n_vars());
    let (c, r) = frame.centres_ranges();
    let cb = column_means(&c);
    let rb = column_means(&r);
    let latents: Vec<&LatentDistribution> = frame.latents().iter().collect();
    let breaks = quadrature_breakpoints(&latents);
    let mut totals = vec![CompensatedSum::new(); p * p];
    let mut dev = vec![0.0; n * p];
    for (t, w) in quadrature::composite_nodes(0.0, 1.0, panels, &breaks, quadrature::ORACLE_NODES) {
        for (j, u) in latents.iter().enumerate() {
            let q = u.quantile_unchecked(t);
            let b = cb[j] + 0.5 * rb[j] * q;
            for k in 0..n {
                dev[k * p + j] = c[(k, j)] + 0.5 * r[(k, j)] * q - b;
            }
        }
        for i in 0..p {
            for j in i..p {
                let at_t: CompensatedSum = (0..n).map(|k| dev[k * p + i] * dev[k * p + j]).collect();
                totals[i * p + j].add(w * at_t.value());
            }
        }
    }
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = totals[i * p + j].value() / n as f64;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Comparison estimator `S_CC + Diag(S_RR + rbar rbar^T) / 24`, which only
/// adjusts the diagonal of the centre covariance.
pub fn cov_model7(frame: &IntervalFrame, divisor: Divisor) -> Result<Matrix> {
    require_rows(frame, 2)?;
    let (c, r) = frame.centres_ranges();
    let mut s = cross_covariance(&c, &c, divisor)?;
    let srr = cross_covariance(&r, &r, divisor)?;
    let rb = column_means(&r);
    for j in 0..frame.n_vars() {
        s[(j, j)] += (srr[(j, j)] + rb[j] * rb[j]) / 24.0;
    }
    Ok(s)
}

/// Frobenius norm of `m1 - m2`.
pub fn frobenius_diff(m1: &Matrix, m2: &Matrix) -> Result<f64> {
    Ok(m1.sub(m2)?.frobenius_norm())
}
