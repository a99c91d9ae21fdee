//! Composite Gauss–Legendre quadrature for piecewise-smooth integrands.
//!
//! Quantile functions of the latent families are smooth between a handful of
//! known breakpoints (the mode of a triangular law, the antimode of the
//! inverted triangular, the grid knots of a KDE) and may have square-root
//! behaviour at the ends of `[0, 1]`. Integrals over `[0, 1]` are therefore
//! split at every breakpoint first; each panel is then bisected adaptively
//! until two successive refinements agree.

use std::sync::OnceLock;

/// Number of Gauss–Legendre nodes per panel.
pub const NODES_PER_PANEL: usize = 32;

/// Nodes per panel of the fixed rules used by the quadrature oracles.
pub const ORACLE_NODES: usize = 8;

/// Nodes of the low-order rule tried first on every panel.
pub const LOW_ORDER_NODES: usize = 4;

/// Default absolute tolerance for [`integrate_adaptive`].
pub const DEFAULT_TOLERANCE: f64 = 1e-11;

const MAX_DEPTH: u32 = 48;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess for the i-th root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// The shared 32-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(NODES_PER_PANEL))
    }

    /// The shared rule used for the first acceptance check of a panel.
    pub fn low_order() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(LOW_ORDER_NODES))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]` with this rule.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Neumaier (improved Kahan) compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Compensated sum of an iterator of values.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Sorted, de-duplicated panel boundaries for `[a, b]` including the given
/// interior breakpoints.
pub fn panel_edges(a: f64, b: f64, breakpoints: &[f64]) -> Vec<f64> {
    let mut edges: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(a);
    edges.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(|x, y| x.partial_cmp(y).expect("breakpoints must not be NaN"));
    edges.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    edges
}

/// Adaptive composite Gauss–Legendre integration of `f` over `[a, b]`.
///
/// The interval is first split at `breakpoints`. Each panel is accepted at
/// once if a low-order rule on the panel and on its two halves agree within
/// the panel's share of `tolerance`; otherwise it is bisected with the
/// standard rule until the one-panel and two-half-panel estimates agree.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breakpoints: &[f64], tolerance: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let rule = GaussLegendre::standard();
    let low = GaussLegendre::low_order();
    let edges = panel_edges(a, b, breakpoints);
    let width = b - a;
    let mut total = CompensatedSum::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let share = (tolerance * (hi - lo) / width).max(1e-18);
        let mid = 0.5 * (lo + hi);
        let coarse = low.integrate(&f, lo, hi);
        let (left, right) = (low.integrate(&f, lo, mid), low.integrate(&f, mid, hi));
        if (left + right - coarse).abs() <= share {
            total.add(left);
            total.add(right);
            continue;
        }
        let whole = rule.integrate(&f, lo, hi);
        refine(&f, rule, lo, hi, whole, share, 0, &mut total);
    }
    total.value()
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    lo: f64,
    hi: f64,
    whole: f64,
    tolerance: f64,
    depth: u32,
    total: &mut CompensatedSum,
) {
    let mid = 0.5 * (lo + hi);
    let left = rule.integrate(f, lo, mid);
    let right = rule.integrate(f, mid, hi);
    let halves = left + right;
    if (halves - whole).abs() <= tolerance || depth >= MAX_DEPTH || mid <= lo || mid >= hi {
        total.add(left);
        total.add(right);
        return;
    }
    let half_tol = (0.5 * tolerance).max(1e-18);
    refine(f, rule, lo, mid, left, half_tol, depth + 1, total);
    refine(f, rule, mid, hi, right, half_tol, depth + 1, total);
}

/// Number of dyadic levels used by [`dyadic_grading`].
pub const GRADING_LEVELS: i32 = 40;

/// Breakpoints `x +- 2^-k`, `k = 1..=GRADING_LEVELS`, for every `x` in
/// `points`, restricted to the open interval `(0, 1)`. Panels cut this way
/// keep a fixed ratio to their distance from each point, so functions with
/// power-law behaviour there are smooth on every panel.
pub fn dyadic_grading(points: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * GRADING_LEVELS as usize * points.len());
    for &x in points {
        for k in 1..=GRADING_LEVELS {
            let h = 2f64.powi(-k);
            out.extend([x - h, x + h].into_iter().filter(|&t| t > 0.0 && t < 1.0));
        }
    }
    out
}

/// [`dyadic_grading`] towards both ends of `[0, 1]`.
pub fn endpoint_grading() -> Vec<f64> {
    dyadic_grading(&[0.0, 1.0])
}

/// Nodes and weights of the non-adaptive composite rule: `panels`
/// equal-width panels over `[a, b]`, each further split at any breakpoint
/// inside it, with an `order`-point Gauss–Legendre rule on every piece.
pub fn composite_nodes(a: f64, b: f64, panels: usize, breakpoints: &[f64], order: usize) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let owned;
    let rule = if order == NODES_PER_PANEL {
        GaussLegendre::standard()
    } else {
        owned = GaussLegendre::new(order);
        &owned
    };
    let h = (b - a) / panels as f64;
    let mut cuts: Vec<f64> = (1..panels).map(|k| a + k as f64 * h).collect();
    cuts.extend_from_slice(breakpoints);
    let edges = panel_edges(a, b, &cuts);
    let mut out = Vec::with_capacity((edges.len() - 1) * rule.nodes.len());
    for w in edges.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[0] + w[1]);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            out.push((mid + half * x, wt * half));
        }
    }
    out
}

/// Integrates `f` with the rule from [`composite_nodes`].
pub fn integrate_fixed<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    breakpoints: &[f64],
    order: usize,
) -> f64 {
    composite_nodes(a, b, panels, breakpoints, order)
        .into_iter()
        .map(|(t, w)| w * f(t))
        .collect::<CompensatedSum>()
        .value()
}
