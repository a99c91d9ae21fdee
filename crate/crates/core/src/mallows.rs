//! Mallows' (L2 Wasserstein) distance between intervals and boxes.
//!
//! For intervals `x1`, `x2` with latents `U1`, `U2` the squared distance is
//! the integral over `(0, 1)` of the squared difference of the two microdata
//! quantile functions. Expanding the square gives closed forms in the centres,
//! ranges, the first two moments of the latents and their cross-moment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalBox, IntervalFrame};
use crate::latent::{
    cross_moment, microdata_quantile, quadrature_breakpoints, quantile_correlation, LatentDistribution,
};
use crate::linalg::Matrix;
use crate::quadrature;

/// Rounding can push an exact zero slightly negative; anything above this
/// magnitude is a genuine failure and is left visible.
const NEGATIVE_RESIDUE: f64 = 1e-12;

fn clamp_residue(d: f64) -> f64 {
    if (-NEGATIVE_RESIDUE..0.0).contains(&d) {
        0.0
    } else {
        d
    }
}

/// Squared distance for arbitrary latents (moment form).
pub fn dist_sq_general(x1: &Interval, u1: &LatentDistribution, x2: &Interval, u2: &LatentDistribution) -> f64 {
    let (c1, r1) = (x1.centre(), x1.range());
    let (c2, r2) = (x2.centre(), x2.range());
    let m1 = u1.moments();
    let m2 = u2.moments();
    let dc = c1 - c2;
    let e12 = if r1 == 0.0 || r2 == 0.0 {
        0.0
    } else {
        cross_moment(u1, u2)
    };
    // Grouped so that swapping the arguments gives a bitwise-equal result.
    let own = 0.25 * (r1 * r1 * m1.second_moment + r2 * r2 * m2.second_moment);
    let d = dc * dc + 2.0 * dc * (0.5 * r1 * m1.mean - 0.5 * r2 * m2.mean) + own - 0.5 * r1 * r2 * e12;
    clamp_residue(d)
}

/// Squared distance in location/scale form,
/// `(mu1 - mu2)^2 + (sigma1 - sigma2)^2 + 2 sigma1 sigma2 (1 - rho)`.
pub fn dist_sq_musigma(x1: &Interval, u1: &LatentDistribution, x2: &Interval, u2: &LatentDistribution) -> f64 {
    let (c1, r1) = (x1.centre(), x1.range());
    let (c2, r2) = (x2.centre(), x2.range());
    let m1 = u1.moments();
    let m2 = u2.moments();
    let mu1 = c1 + 0.5 * r1 * m1.mean;
    let mu2 = c2 + 0.5 * r2 * m2.mean;
    let s1 = 0.5 * r1 * m1.variance.sqrt();
    let s2 = 0.5 * r2 * m2.variance.sqrt();
    let spread = if s1 > 0.0 && s2 > 0.0 {
        // Both variances are positive here, so the correlation exists.
        let rho = quantile_correlation(u1, u2).unwrap_or(1.0);
        2.0 * s1 * s2 * (1.0 - rho)
    } else {
        0.0
    };
    clamp_residue((mu1 - mu2).powi(2) + (s1 - s2).powi(2) + spread)
}

/// Squared distance when both intervals share one latent distribution.
pub fn dist_sq_iid(x1: &Interval, x2: &Interval, latent: &LatentDistribution) -> f64 {
    let m = latent.moments();
    let dc = x1.centre() - x2.centre();
    let dr = x1.range() - x2.range();
    clamp_residue(dc * dc + 0.25 * m.second_moment * dr * dr + m.mean * dc * dr)
}

/// Range weight `Var(U) / 4` of a mean-zero latent, the `delta` of
/// [`dist_sq_symmetric`] and [`iso_distance_set`].
pub fn symmetric_delta(latent: &LatentDistribution) -> Result<f64> {
    let m = latent.moments();
    if m.mean.abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "latent {latent} has mean {}; the symmetric form needs mean zero",
            m.mean
        )));
    }
    Ok(0.25 * m.variance)
}

/// Squared distance for a shared symmetric latent with `delta = Var(U) / 4`.
pub fn dist_sq_symmetric(x1: &Interval, x2: &Interval, delta: f64) -> Result<f64> {
    if !(0.0..=0.25).contains(&delta) {
        return Err(Error::Domain(format!("delta {delta} outside [0, 1/4]")));
    }
    let dc = x1.centre() - x2.centre();
    let dr = x1.range() - x2.range();
    Ok(dc * dc + delta * dr * dr)
}

/// Squared distance between boxes whose latents agree dimension by dimension.
///
/// Boxes with different latents in some dimension are rejected with
/// [`Error::LatentMismatch`]; use [`dist_sq_box_general`] for those.
pub fn dist_sq_box(b1: &IntervalBox, b2: &IntervalBox) -> Result<f64> {
    check_dims(b1, b2)?;
    let mut total = quadrature::CompensatedSum::new();
    for (dim, ((x1, u1), (x2, u2))) in b1
        .intervals()
        .iter()
        .zip(b1.latents())
        .zip(b2.intervals().iter().zip(b2.latents()))
        .enumerate()
    {
        if u1 != u2 {
            return Err(Error::LatentMismatch { dim });
        }
        total.add(dist_sq_iid(x1, x2, u1));
    }
    Ok(total.value())
}

/// Squared distance between boxes with arbitrary per-box latents: the sum of
/// [`dist_sq_general`] over dimensions.
pub fn dist_sq_box_general(b1: &IntervalBox, b2: &IntervalBox) -> Result<f64> {
    check_dims(b1, b2)?;
    Ok(b1
        .intervals()
        .iter()
        .zip(b1.latents())
        .zip(b2.intervals().iter().zip(b2.latents()))
        .map(|((x1, u1), (x2, u2))| dist_sq_general(x1, u1, x2, u2))
        .collect::<quadrature::CompensatedSum>()
        .value())
}

fn check_dims(b1: &IntervalBox, b2: &IntervalBox) -> Result<()> {
    if b1.dim() != b2.dim() {
        return Err(Error::DimensionMismatch {
            expected: b1.dim(),
            found: b2.dim(),
        });
    }
    Ok(())
}

/// Squared distance by direct quadrature of the defining integral, with a
/// fixed composite rule of `panels` equal panels, split at the latents'
/// breakpoints and graded towards their singular points. Independent of
/// every closed form above.
pub fn oracle_dist_sq(
    x1: &Interval,
    u1: &LatentDistribution,
    x2: &Interval,
    u2: &LatentDistribution,
    panels: usize,
) -> f64 {
    let breaks = quadrature_breakpoints(&[u1, u2]);
    let (c1, r1) = (x1.centre(), x1.range());
    let (c2, r2) = (x2.centre(), x2.range());
    quadrature::integrate_fixed(
        |t| {
            let q1 = microdata_quantile(c1, r1, u1, t).unwrap_or(f64::NAN);
            let q2 = microdata_quantile(c2, r2, u2, t).unwrap_or(f64::NAN);
            (q1 - q2).powi(2)
        },
        0.0,
        1.0,
        panels,
        &breaks,
        quadrature::ORACLE_NODES,
    )
}

/// First two moments and cross-moments of a vector of latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    /// `E(U_i)`.
    pub psi: Vec<f64>,
    /// `E(U_i^2) / 4`.
    pub delta: Vec<f64>,
    /// `[i][i] = E(U_i^2)`, `[i][j] = E(U_i, U_j)` (cross-moment).
    pub euu: Matrix,
}

impl MomentSummary {
    pub fn from_latents(latents: &[LatentDistribution]) -> Self {
        let p = latents.len();
        let moments: Vec<_> = latents.iter().map(LatentDistribution::moments).collect();
        let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
        let cross: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| cross_moment(&latents[i], &latents[j]))
            .collect();
        let mut euu = Matrix::from_diagonal(&moments.iter().map(|m| m.second_moment).collect::<Vec<_>>());
        for (&(i, j), &e) in pairs.iter().zip(&cross) {
            euu[(i, j)] = e;
            euu[(j, i)] = e;
        }
        Self {
            psi: moments.iter().map(|m| m.mean).collect(),
            delta: moments.iter().map(|m| 0.25 * m.second_moment).collect(),
            euu,
        }
    }

    /// Builds a summary from means and a cross-moment matrix whose diagonal
    /// holds the second moments.
    pub fn from_parts(psi: Vec<f64>, euu: Matrix) -> Result<Self> {
        if !euu.is_square() || euu.rows() != psi.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.len(),
                found: euu.rows(),
            });
        }
        let delta = euu.diagonal().iter().map(|e| 0.25 * e).collect();
        Ok(Self { psi, delta, euu })
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn second_moments(&self) -> Vec<f64> {
        self.euu.diagonal()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.second_moments()
            .iter()
            .zip(&self.psi)
            .map(|(e2, m)| (e2 - m * m).max(0.0))
            .collect()
    }

    /// True when every latent has the same mean and every entry of the
    /// cross-moment matrix equals the common second moment, i.e. the summary
    /// is that of identically distributed latents.
    pub fn identical(&self) -> bool {
        let Some(&m0) = self.psi.first() else { return true };
        let e0 = self.euu[(0, 0)];
        self.psi.iter().all(|&m| m == m0) && self.euu.as_slice().iter().all(|&e| e == e0)
    }

    pub fn mean_zero(&self) -> bool {
        self.psi.iter().all(|&m| m == 0.0)
    }
}

/// The quadratic form that turns the box distance into a Mahalanobis
/// distance on the stacked vector `y = (c^T, r^T)^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MahalanobisForm {
    /// `[[I, Psi/2], [Psi/2, Delta]]`, `2p x 2p`.
    pub h: Matrix,
    /// Closed-form inverse of `h`; present only when no latent is degenerate.
    pub h_inverse: Option<Matrix>,
    /// `h` restricted to `kept_indices`.
    pub h_reduced: Matrix,
    /// Closed-form inverse of `h_reduced`.
    pub h_reduced_inverse: Matrix,
    /// `4 / Var(U_i)` for each non-degenerate dimension, in order.
    pub q: Vec<f64>,
    /// Coordinates of `y` kept after dropping the ranges of degenerate
    /// dimensions: all centres `0..p`, then `p + i` for each live range.
    pub kept_indices: Vec<usize>,
    pub psi: Vec<f64>,
    pub delta: Vec<f64>,
}

impl MahalanobisForm {
    pub fn from_latents(latents: &[LatentDistribution]) -> Result<Self> {
        if latents.is_empty() {
            return Err(Error::Empty("no latent distributions".into()));
        }
        let live: Vec<bool> = latents.iter().map(|u| u.variance() > 0.0).collect();
        let moments: Vec<_> = latents.iter().map(LatentDistribution::moments).collect();
        let psi: Vec<f64> = moments.iter().map(|m| m.mean).collect();
        let delta: Vec<f64> = moments.iter().map(|m| 0.25 * m.second_moment).collect();
        let var: Vec<f64> = moments.iter().map(|m| m.variance).collect();
        Ok(Self::assemble(psi, delta, &var, &live))
    }

    fn assemble(psi: Vec<f64>, delta: Vec<f64>, var: &[f64], live: &[bool]) -> Self {
        let p = psi.len();
        let mut h = Matrix::identity(2 * p);
        for i in 0..p {
            h[(i, p + i)] = 0.5 * psi[i];
            h[(p + i, i)] = 0.5 * psi[i];
            h[(p + i, p + i)] = delta[i];
        }
        let live_dims: Vec<usize> = (0..p).filter(|&i| live[i]).collect();
        let mut kept_indices: Vec<usize> = (0..p).collect();
        kept_indices.extend(live_dims.iter().map(|&i| p + i));
        let h_reduced = h.submatrix(&kept_indices);
        let q: Vec<f64> = live_dims.iter().map(|&i| 4.0 / var[i]).collect();
        // Block inverse with Schur complement Delta - Psi^2 / 4 = diag(Var / 4):
        // [[I + Psi Q Psi / 4, -Psi Q / 2], [-Q Psi / 2, Q]].
        let k = live_dims.len();
        let mut inv = Matrix::identity(p + k);
        for (slot, &i) in live_dims.iter().enumerate() {
            inv[(i, i)] += 0.25 * psi[i] * psi[i] * q[slot];
            inv[(i, p + slot)] = -0.5 * psi[i] * q[slot];
            inv[(p + slot, i)] = -0.5 * psi[i] * q[slot];
            inv[(p + slot, p + slot)] = q[slot];
        }
        let h_inverse = if k == p { Some(inv.clone()) } else { None };
        Self {
            h,
            h_inverse,
            h_reduced,
            h_reduced_inverse: inv,
            q,
            kept_indices,
            psi,
            delta,
        }
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    /// Restricts a full `2p` vector to the kept coordinates.
    pub fn reduce(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != 2 * self.dim() {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.dim(),
                found: y.len(),
            });
        }
        Ok(self.kept_indices.iter().map(|&i| y[i]).collect())
    }
}

/// `(y1 - y2)^T H (y1 - y2)`. Vectors of length `2p` use the full form;
/// vectors laid out by `kept_indices` use the reduced form.
pub fn dist_sq_mahalanobis(y1: &[f64], y2: &[f64], form: &MahalanobisForm) -> Result<f64> {
    if y1.len() != y2.len() {
        return Err(Error::DimensionMismatch {
            expected: y1.len(),
            found: y2.len(),
        });
    }
    let h = if y1.len() == 2 * form.dim() {
        &form.h
    } else if y1.len() == form.kept_indices.len() {
        &form.h_reduced
    } else {
        return Err(Error::DimensionMismatch {
            expected: 2 * form.dim(),
            found: y1.len(),
        });
    };
    let diff: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a - b).collect();
    Ok(clamp_residue(h.quadratic_form(&diff)?))
}

/// Points `(c, r)` on the iso-distance ellipse
/// `(c - c0)^2 + delta (r - r0)^2 = radius^2` around the interval `x0`,
/// sampled at `n_points` equally spaced angles. Points with `r < 0` are not
/// intervals and are omitted.
pub fn iso_distance_set(x0: &Interval, delta: f64, radius: f64, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("delta {delta} must be positive")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("radius {radius} must be positive")));
    }
    let (c0, r0) = (x0.centre(), x0.range());
    let semi_r = radius / delta.sqrt();
    Ok((0..n_points)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n_points as f64;
            (c0 + radius * theta.cos(), r0 + semi_r * theta.sin())
        })
        .filter(|&(_, r)| r >= 0.0)
        .collect())
}

/// Pairwise distances between the rows of a frame, using the frame's
/// per-variable latents. Rows are evaluated in parallel; each entry is
/// computed independently, so the result does not depend on scheduling.
pub fn distance_matrix(frame: &IntervalFrame, squared: bool) -> Result<Matrix> {
    frame.ensure_valid()?;
    let n = frame.n_rows();
    let boxes: Vec<IntervalBox> = (0..n).map(|i| frame.row_box(i)).collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = if i == j {
                        Ok(0.0)
                    } else {
                        dist_sq_box(&boxes[i], &boxes[j])
                    };
                    d.map(|d| if squared { d } else { d.sqrt() })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Matrix::from_rows(&rows)
}
