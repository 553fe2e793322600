//! Scalar special functions: normal and Student's t cdfs and quantiles.
//!
//! The h-function recursion composes cdfs and quantiles across vine levels,
//! so these are kept at ~1e-10 absolute accuracy: closed-form/statrs seeds
//! followed by a Newton polish against our own cdf.

use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal cdf.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "norm_quantile: p must be in (0,1)");
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    // Newton polish; skip deep in the tails where the pdf underflows.
    if x.abs() < 8.0 {
        for _ in 0..3 {
            let f = norm_cdf(x) - p;
            let step = f / norm_pdf(x);
            x -= step;
            if step.abs() < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
    }
    x
}

/// Student's t density with `df` degrees of freedom.
pub fn t_pdf(x: f64, df: f64) -> f64 {
    t_ln_pdf(x, df).exp()
}

/// Log-density of the Student's t distribution.
pub fn t_ln_pdf(x: f64, df: f64) -> f64 {
    ln_gamma((df + 1.0) / 2.0)
        - ln_gamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - 0.5 * (df + 1.0) * (x * x / df).ln_1p()
}

/// Student's t cdf with `df` degrees of freedom.
pub fn t_cdf(x: f64, df: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    let z = df / (df + x * x);
    let half_tail = 0.5 * beta_reg(df / 2.0, 0.5, z);
    if x > 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

/// Student's t quantile with `df` degrees of freedom.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "t_quantile: p must be in (0,1)");
    if (p - 0.5).abs() < 1e-300 {
        return 0.0;
    }
    // Seed from a normal quantile mapped through the Cornish-Fisher-style
    // expansion, then Newton polish against t_cdf. The pdf normalizer is
    // hoisted out of the iteration.
    let mut x = t_quantile_seed(p, df);
    let ln_norm = ln_gamma((df + 1.0) / 2.0)
        - ln_gamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln();
    for _ in 0..3 {
        let f = t_cdf(x, df) - p;
        let d = (ln_norm - 0.5 * (df + 1.0) * (x * x / df).ln_1p()).exp();
        if d <= 0.0 || !f.is_finite() {
            break;
        }
        let step = f / d;
        let next = x - step;
        if !next.is_finite() {
            break;
        }
        x = next;
        if step.abs() < 1e-11 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

fn t_quantile_seed(p: f64, df: f64) -> f64 {
    // Hill (1970) approximation.
    let sign = if p < 0.5 { -1.0 } else { 1.0 };
    let pp = 2.0 * p.min(1.0 - p);
    if df <= 1.0 + 1e-12 {
        // Cauchy quantile, exact
        return (std::f64::consts::PI * (p - 0.5)).tan();
    }
    let a = 1.0 / (df - 0.5);
    let b = 48.0 / (a * a);
    let mut c = ((20700.0 * a / b - 98.0) * a - 16.0) * a + 96.36;
    let d = ((94.5 / (b + c) - 3.0) / b + 1.0) * (a * std::f64::consts::FRAC_PI_2).sqrt() * df;
    let mut y = (d * pp).powf(2.0 / df);
    if y > 0.05 + a {
        let x = norm_quantile(pp * 0.5);
        y = x * x;
        if df < 5.0 {
            c += 0.3 * (df - 4.5) * (x.abs() + 0.6);
        }
        let c2 = (((0.05 * d * x.abs() - 5.0) * x.abs() + 7.0) * x.abs() - 2.0) * x.abs() + b + c;
        y = (((((0.4 * y + 6.3) * y + 36.0) * y + 94.5) / c2 - y - 3.0) / b + 1.0) * x.abs();
        y = a * y * y;
        y = if y > 0.002 { y.exp() - 1.0 } else { 0.5 * y * y + y };
    } else {
        y = ((1.0 / (((df + 6.0) / (df * y) - 0.089 * d - 0.822) * (df + 2.0) * 3.0)
            + 0.5 / (df + 4.0))
            * y
            - 1.0)
            * (df + 1.0)
            / (df + 2.0)
            + 1.0 / y;
    }
    sign * (df * y).sqrt()
}

/// Log of the gamma function (re-export for internal use).
pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}
