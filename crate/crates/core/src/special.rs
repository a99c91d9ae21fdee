//! Special functions: log-gamma, the regularized incomplete Beta function and
//! its inverse, normal distribution helpers and exact binomial tails.

use statrs::function::erf;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete Beta function `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * beta_cf(x, a, b) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b).clamp(0.0, 1.0)
    }
}

/// Continued fraction for the incomplete Beta function (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Beta(a, b) density.
pub fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    if x == 0.0 || x == 1.0 {
        // Boundary values: finite only for shape >= 1.
        let s = if x == 0.0 { a } else { b };
        return if s > 1.0 {
            0.0
        } else if s == 1.0 {
            (-ln_beta(a, b)).exp()
        } else {
            f64::INFINITY
        };
    }
    ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)).exp()
}

/// Inverse of the regularized incomplete Beta function: the `p`-quantile of
/// Beta(a, b).
///
/// A closed-form starting point is polished with safeguarded Halley steps;
/// the bracket `[lo, hi]` is maintained so that the iteration cannot leave
/// `[0, 1]`, and bisection takes over if a step misbehaves.
pub fn inv_reg_inc_beta(p: f64, a: f64, b: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let guess = initial_beta_guess(p, a, b);
    // Iterate on whichever tail keeps the unknown below 1/2, where it has
    // full relative precision.
    if guess > 0.5 {
        1.0 - solve_beta_quantile(1.0 - p, b, a, 1.0 - guess)
    } else {
        solve_beta_quantile(p, a, b, guess)
    }
}

fn solve_beta_quantile(p: f64, a: f64, b: f64, guess: f64) -> f64 {
    let ln_b = ln_beta(a, b);
    let mut x = guess;
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    for _ in 0..200 {
        let f = reg_inc_beta(x, a, b) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_b;
        let pdf = ln_pdf.exp();
        let mut next = if pdf.is_finite() && pdf > 0.0 {
            let newton = f / pdf;
            // Halley correction using d(ln pdf)/dx.
            let curv = (a - 1.0) / x - (b - 1.0) / (1.0 - x);
            let denom = 1.0 - 0.5 * newton * curv;
            let step = if denom.abs() > 0.1 { newton / denom } else { newton };
            x - step
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let converged = (next - x).abs() <= 4.0 * f64::EPSILON * x.max(1e-300) || hi - lo <= 1e-16 * hi;
        x = next;
        if converged {
            break;
        }
    }
    x
}

fn initial_beta_guess(p: f64, a: f64, b: f64) -> f64 {
    if a >= 1.0 && b >= 1.0 {
        // Abramowitz & Stegun 26.5.22 via the normal quantile.
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            x = -x;
        }
        let al = (x * x - 3.0) / 6.0;
        let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
        let w = x * (al + h).sqrt() / h
            - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
        let guess = a / (a + b * (2.0 * w).exp());
        guess.clamp(1e-300, 1.0 - 1e-16)
    } else {
        let lna = (a / (a + b)).ln();
        let lnb = (b / (a + b)).ln();
        let t = (a * lna).exp() / a;
        let u = (b * lnb).exp() / b;
        let w = t + u;
        let guess = if p < t / w {
            (a * w * p).powf(1.0 / a)
        } else {
            1.0 - (b * w * (1.0 - p)).powf(1.0 / b)
        };
        guess.clamp(1e-300, 1.0 - 1e-16)
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, polished with Newton steps on the cdf.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        let d = normal_pdf(x);
        if d > 0.0 {
            x -= (normal_cdf(x) - p) / d;
        }
    }
    x
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Binomial probability mass `P(X = k)` for `X ~ Bin(n, p)`.
pub fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Lower tail `P(X <= k)` by direct summation of the mass function.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    let terms = (0..=k).map(|j| binomial_pmf(j, n, p));
    crate::quadrature::compensated_sum(terms).min(1.0)
}

/// Upper tail `P(X >= k)` by direct summation of the mass function.
pub fn binomial_sf(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let terms = (k..=n).map(|j| binomial_pmf(j, n, p));
    crate::quadrature::compensated_sum(terms).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(101.0), 363.739_375_555_563_5, epsilon = 1e-10);
    }

    #[test]
    fn incomplete_beta_special_cases() {
        // Beta(1, 1) is uniform.
        assert_abs_diff_eq!(reg_inc_beta(0.3, 1.0, 1.0), 0.3, epsilon = 1e-15);
        // Beta(2, 1): F(x) = x^2.
        assert_abs_diff_eq!(reg_inc_beta(0.4, 2.0, 1.0), 0.16, epsilon = 1e-15);
        // Beta(1, 3): F(x) = 1 - (1 - x)^3.
        assert_abs_diff_eq!(reg_inc_beta(0.2, 1.0, 3.0), 1.0 - 0.8f64.powi(3), epsilon = 1e-15);
        // Symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
        let v = reg_inc_beta(0.37, 0.44, 2.15) + reg_inc_beta(0.63, 2.15, 0.44);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn inverse_beta_round_trips() {
        for &(a, b) in &[
            (0.44, 2.15),
            (1.08, 2.65),
            (1.0, 1.0),
            (5.0, 0.3),
            (0.2, 0.2),
            (30.0, 40.0),
        ] {
            for k in 1..100 {
                let p = k as f64 / 100.0;
                let x = inv_reg_inc_beta(p, a, b);
                assert!((0.0..=1.0).contains(&x));
                // Allow for the spacing of doubles near x, which bounds how
                // closely any representable x can reproduce p.
                let slack = 2.0 * beta_pdf(x, a, b) * f64::EPSILON * x;
                assert!((reg_inc_beta(x, a, b) - p).abs() <= 1e-12 + slack, "{a} {b} {p}");
            }
            for &p in &[1e-12, 1e-8, 1.0 - 1e-9] {
                let x = inv_reg_inc_beta(p, a, b);
                assert!((reg_inc_beta(x, a, b) - p).abs() <= 1e-12 + 1e-9 * p);
            }
        }
    }

    #[test]
    fn normal_helpers_are_consistent() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_cdf(3.0), 0.998_650_101_968_369_9, epsilon = 1e-15);
        for &p in &[1e-10, 0.00135, 0.3, 0.5, 0.9, 0.999] {
            assert_abs_diff_eq!(normal_cdf(normal_quantile(p)), p, epsilon = 1e-15);
        }
    }

    #[test]
    fn binomial_tails_sum_to_one() {
        let n = 40;
        let lower = binomial_cdf(17, n, 0.5);
        let upper = binomial_sf(18, n, 0.5);
        assert_abs_diff_eq!(lower + upper, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(binomial_pmf(2, 4, 0.5), 6.0 / 16.0, epsilon = 1e-14);
    }
}
