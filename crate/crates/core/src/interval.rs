//! Intervals, boxes, and interval-valued datasets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::LatentDistribution;
use crate::linalg::Matrix;

/// A closed bounded interval `[lower, upper]`.
///
/// The fields are public so that raw, possibly malformed data can be held and
/// reported by [`IntervalFrame::validate`]; [`Interval::new`] checks them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let iv = Self { lower, upper };
        if !iv.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite interval bound in [{lower}, {upper}]"
            )));
        }
        if !iv.is_ordered() {
            return Err(Error::Domain(format!("interval [{lower}, {upper}] has upper < lower")));
        }
        Ok(iv)
    }

    pub fn from_centre_range(centre: f64, range: f64) -> Result<Self> {
        if range < 0.0 || range.is_nan() {
            return Err(Error::Domain(format!("range {range} must be non-negative")));
        }
        let half = 0.5 * range;
        Self::new(centre - half, centre + half)
    }

    /// The zero-range interval `[x, x]`.
    pub fn point(x: f64) -> Self {
        Self { lower: x, upper: x }
    }

    pub fn centre(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_finite(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn is_ordered(&self) -> bool {
        self.lower <= self.upper
    }

    pub fn is_degenerate(&self) -> bool {
        self.range() == 0.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lower, self.upper)
    }
}

/// A `p`-dimensional box with one latent distribution per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    intervals: Vec<Interval>,
    latents: Vec<LatentDistribution>,
}

impl IntervalBox {
    /// Zero-range dimensions must carry the degenerate latent.
    pub fn new(intervals: Vec<Interval>, latents: Vec<LatentDistribution>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Empty("box with no dimensions".into()));
        }
        if latents.len() != intervals.len() {
            return Err(Error::DimensionMismatch {
                expected: intervals.len(),
                found: latents.len(),
            });
        }
        for (j, (iv, u)) in intervals.iter().zip(&latents).enumerate() {
            if !iv.is_finite() || !iv.is_ordered() {
                return Err(Error::Domain(format!("dimension {j}: invalid interval {iv}")));
            }
            if iv.is_degenerate() && !u.is_degenerate() {
                return Err(Error::InvalidFrame(format!(
                    "dimension {j} has zero range but latent {u}; use the degenerate latent"
                )));
            }
        }
        Ok(Self { intervals, latents })
    }

    /// Like [`IntervalBox::new`], but substitutes the degenerate latent on
    /// zero-range dimensions instead of failing.
    pub fn with_degenerate_points(intervals: Vec<Interval>, mut latents: Vec<LatentDistribution>) -> Result<Self> {
        for (iv, u) in intervals.iter().zip(latents.iter_mut()) {
            if iv.is_degenerate() {
                *u = LatentDistribution::Degenerate;
            }
        }
        Self::new(intervals, latents)
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn latents(&self) -> &[LatentDistribution] {
        &self.latents
    }

    pub fn centres(&self) -> Vec<f64> {
        self.intervals.iter().map(Interval::centre).collect()
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.intervals.iter().map(Interval::range).collect()
    }

    /// The stacked vector `(c^T, r^T)^T`.
    pub fn centre_range_vector(&self) -> Vec<f64> {
        let mut y = self.centres();
        y.extend(self.ranges());
        y
    }
}

/// A rule broken by an interval dataset. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    /// A bound is NaN or infinite.
    NonFinite { row: usize, col: usize },
    /// `upper < lower`.
    OrderViolation { row: usize, col: usize },
    /// The variable mixes zero and positive ranges; `rows` lists the zero-range rows.
    MixedRange { col: usize, rows: Vec<usize> },
    /// All ranges are zero but the latent is not the degenerate one.
    DegenerateLatentMismatch { col: usize },
    /// Ranges are positive but the latent is the degenerate one.
    DegenerateLatentOnPositiveRange { col: usize },
}

impl Violation {
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::NonFinite { .. } => "non_finite",
            Violation::OrderViolation { .. } => "order_violation",
            Violation::MixedRange { .. } => "mixed_range",
            Violation::DegenerateLatentMismatch { .. } => "degenerate_latent_mismatch",
            Violation::DegenerateLatentOnPositiveRange { .. } => "degenerate_latent_on_positive_range",
        }
    }

    pub fn row(&self) -> Option<usize> {
        match *self {
            Violation::NonFinite { row, .. } | Violation::OrderViolation { row, .. } => Some(row),
            _ => None,
        }
    }

    pub fn col(&self) -> usize {
        match *self {
            Violation::NonFinite { col, .. }
            | Violation::OrderViolation { col, .. }
            | Violation::MixedRange { col, .. }
            | Violation::DegenerateLatentMismatch { col }
            | Violation::DegenerateLatentOnPositiveRange { col } => col,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { row, col } => write!(f, "row {row}, column {col}: non-finite bound"),
            Violation::OrderViolation { row, col } => write!(f, "row {row}, column {col}: upper < lower"),
            Violation::MixedRange { col, rows } => {
                write!(
                    f,
                    "column {col}: zero ranges in rows {rows:?} mixed with positive ranges"
                )
            }
            Violation::DegenerateLatentMismatch { col } => {
                write!(f, "column {col}: all ranges are zero but the latent is not degenerate")
            }
            Violation::DegenerateLatentOnPositiveRange { col } => {
                write!(f, "column {col}: positive ranges with the degenerate latent")
            }
        }
    }
}

/// `n` observations of `p` interval-valued variables, with one latent
/// distribution per variable and optional row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalFrame {
    names: Vec<String>,
    cells: Vec<Interval>,
    latents: Vec<LatentDistribution>,
    labels: Option<Vec<String>>,
}

impl IntervalFrame {
    /// Builds a frame from rows of intervals. Only shapes are checked here;
    /// content rules are reported by [`IntervalFrame::validate`].
    pub fn new(names: Vec<String>, rows: Vec<Vec<Interval>>, latents: Vec<LatentDistribution>) -> Result<Self> {
        let p = names.len();
        if p == 0 {
            return Err(Error::InvalidFrame("frame has no variables".into()));
        }
        if latents.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: latents.len(),
            });
        }
        let mut cells = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            cells.extend(row);
        }
        Ok(Self {
            names,
            cells,
            latents,
            labels: None,
        })
    }

    /// Builds a frame with the same latent for every variable, switching
    /// all-zero-range variables to the degenerate latent.
    pub fn with_common_latent(
        names: Vec<String>,
        rows: Vec<Vec<Interval>>,
        latent: LatentDistribution,
    ) -> Result<Self> {
        let p = names.len();
        let mut frame = Self::new(names, rows, vec![latent; p])?;
        frame.assign_degenerate_latents();
        Ok(frame)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len() / self.names.len()
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Row label, or the 1-based row number when the frame has no labels.
    pub fn label(&self, row: usize) -> String {
        match &self.labels {
            Some(l) => l[row].clone(),
            None => (row + 1).to_string(),
        }
    }

    pub fn latents(&self) -> &[LatentDistribution] {
        &self.latents
    }

    pub fn latent(&self, col: usize) -> &LatentDistribution {
        &self.latents[col]
    }

    pub fn get(&self, row: usize, col: usize) -> Interval {
        self.cells[row * self.names.len() + col]
    }

    pub fn row(&self, row: usize) -> &[Interval] {
        let p = self.names.len();
        &self.cells[row * p..(row + 1) * p]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Interval> + '_ {
        let p = self.names.len();
        self.cells.iter().skip(col).step_by(p).copied()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// The row as a box carrying the frame's latents.
    pub fn row_box(&self, row: usize) -> Result<IntervalBox> {
        IntervalBox::new(self.row(row).to_vec(), self.latents.clone())
    }

    pub fn set_latent(&mut self, col: usize, latent: LatentDistribution) -> Result<()> {
        if col >= self.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                found: col + 1,
            });
        }
        self.latents[col] = latent;
        Ok(())
    }

    pub fn set_latents(&mut self, latents: Vec<LatentDistribution>) -> Result<()> {
        if latents.len() != self.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                found: latents.len(),
            });
        }
        self.latents = latents;
        Ok(())
    }

    /// True for variables whose ranges are all zero (and the frame non-empty).
    pub fn degenerate_columns(&self) -> Vec<bool> {
        (0..self.n_vars())
            .map(|j| self.n_rows() > 0 && self.column(j).all(|iv| iv.is_degenerate()))
            .collect()
    }

    /// Gives every all-zero-range variable the degenerate latent.
    pub fn assign_degenerate_latents(&mut self) {
        for (j, degenerate) in self.degenerate_columns().into_iter().enumerate() {
            if degenerate {
                self.latents[j] = LatentDistribution::Degenerate;
            }
        }
    }

    /// Keeps the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let cells = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self {
            names: self.names.clone(),
            cells,
            latents: self.latents.clone(),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    /// Keeps the named variables, in the order given.
    pub fn select_columns(&self, names: &[String]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidFrame("no variables selected".into()));
        }
        let cols: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::InvalidFrame(format!("unknown variable '{n}'")))
            })
            .collect::<Result<_>>()?;
        let cells = (0..self.n_rows())
            .flat_map(|i| cols.iter().map(move |&j| self.get(i, j)))
            .collect();
        Ok(Self {
            names: names.to_vec(),
            cells,
            latents: cols.iter().map(|&j| self.latents[j].clone()).collect(),
            labels: self.labels.clone(),
        })
    }

    /// Drops every row with a zero range in a variable that also has
    /// positive ranges, removing mixed-range violations.
    pub fn drop_mixed_degenerate_rows(&self) -> (Self, Vec<usize>) {
        let mut dropped = Vec::new();
        for j in 0..self.n_vars() {
            let any_positive = self.column(j).any(|iv| iv.range() > 0.0);
            if any_positive {
                dropped.extend(
                    self.column(j)
                        .enumerate()
                        .filter(|(_, iv)| iv.is_degenerate())
                        .map(|(i, _)| i),
                );
            }
        }
        dropped.sort_unstable();
        dropped.dedup();
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|i| dropped.binary_search(i).is_err())
            .collect();
        (self.select_rows(&keep), dropped)
    }

    /// Splits into `n x p` centre and range matrices.
    pub fn centres_ranges(&self) -> (Matrix, Matrix) {
        let (n, p) = (self.n_rows(), self.n_vars());
        let c = Matrix::from_fn(n, p, |i, j| self.get(i, j).centre());
        let r = Matrix::from_fn(n, p, |i, j| self.get(i, j).range());
        (c, r)
    }

    /// Every broken rule, in column-major scan order. Empty iff the frame is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for col in 0..self.n_vars() {
            let mut zero_rows = Vec::new();
            let mut positive = 0usize;
            for (row, iv) in self.column(col).enumerate() {
                if !iv.is_finite() {
                    out.push(Violation::NonFinite { row, col });
                } else if !iv.is_ordered() {
                    out.push(Violation::OrderViolation { row, col });
                } else if iv.is_degenerate() {
                    zero_rows.push(row);
                } else {
                    positive += 1;
                }
            }
            let latent = &self.latents[col];
            if positive > 0 && !zero_rows.is_empty() {
                out.push(Violation::MixedRange { col, rows: zero_rows });
            } else if positive == 0 && !zero_rows.is_empty() && !latent.is_degenerate() {
                out.push(Violation::DegenerateLatentMismatch { col });
            } else if positive > 0 && latent.is_degenerate() {
                out.push(Violation::DegenerateLatentOnPositiveRange { col });
            }
        }
        out
    }

    /// Fails with the list of violations when the frame is not valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = v.iter().map(|x| self.describe(x)).collect();
            Err(Error::InvalidFrame(msgs.join("; ")))
        }
    }

    /// Violation message using variable names and row labels.
    pub fn describe(&self, v: &Violation) -> String {
        let var = &self.names[v.col()];
        match v.row() {
            Some(row) => format!("{} (row {}, variable '{var}')", v.rule(), self.label(row)),
            None => format!("{} (variable '{var}')", v.rule()),
        }
    }
}
