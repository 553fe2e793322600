//! Variance-discounting local-level dynamic linear model per margin:
//! forward filtering, state evolution, one-step-ahead forecasting, and the
//! probability integral transform against the forecast distribution.

use crate::error::{Error, Result};
use crate::special::{t_cdf, t_quantile};
use serde::{Deserialize, Serialize};

/// Discount factors and observation/state multipliers (local level: F=G=1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DLMConfig {
    /// Variance discount in (0, 1].
    pub beta: f64,
    /// State discount in (0, 1].
    pub delta: f64,
    pub f: f64,
    pub g: f64,
}

impl Default for DLMConfig {
    fn default() -> DLMConfig {
        DLMConfig {
            beta: 0.96,
            delta: 0.975,
            f: 1.0,
            g: 1.0,
        }
    }
}

impl DLMConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) || !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!(
                "discounts out of (0,1]: beta={}, delta={}",
                self.beta, self.delta
            )));
        }
        Ok(())
    }
}

/// Prior state at time t: theta_t ~ T with mean a, scale R; observation
/// precision has r degrees of freedom and point estimate derived from c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DLMPrior {
    pub a: f64,
    pub r_mat: f64,
    pub r: f64,
    pub c: f64,
}

impl DLMPrior {
    /// Diffuse initial state.
    pub fn initial() -> DLMPrior {
        DLMPrior {
            a: 0.0,
            r_mat: 1e-6,
            r: 10.0,
            c: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_mat > 0.0 && self.r > 0.0 && self.c > 0.0) {
            return Err(Error::Numerical(format!(
                "prior state scalars must stay positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Posterior state after absorbing y_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DLMPosterior {
    pub m: f64,
    pub c_mat: f64,
    pub n: f64,
    pub s: f64,
}

/// One-step-ahead forecast: a non-standardized Student's t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastDist {
    pub nu: f64,
    pub mu: f64,
    pub sigma2: f64,
}

/// Absorbs an observation into the prior state.
pub fn filter_update(config: &DLMConfig, prior: &DLMPrior, y: f64) -> Result<DLMPosterior> {
    prior.validate()?;
    let f = config.f;
    let e = y - f * prior.a;
    let q = prior.c + f * prior.r_mat * f;
    if q <= 0.0 {
        return Err(Error::Numerical(format!("forecast variance q = {q} <= 0")));
    }
    let a_coef = prior.r_mat * f / q;
    let m = prior.a + a_coef * e;
    let n = prior.r + 1.0;
    let z = (prior.r + e * e / q) / n;
    let c_mat = (prior.r_mat - a_coef * a_coef * q) * z;
    let s = z * prior.c;
    Ok(DLMPosterior { m, c_mat, n, s })
}

/// Evolves the posterior at time t into the prior at time t+1 using the
/// discount factors: r+ = beta*n, c+ = s, a+ = G m, R+ = G C G' / delta.
pub fn evolve(config: &DLMConfig, post: &DLMPosterior) -> DLMPrior {
    let g = config.g;
    DLMPrior {
        a: g * post.m,
        r_mat: g * post.c_mat * g / config.delta,
        r: config.beta * post.n,
        c: post.s,
    }
}

/// One-step-ahead forecast distribution implied by a prior state.
pub fn forecast(config: &DLMConfig, prior: &DLMPrior) -> ForecastDist {
    let f = config.f;
    ForecastDist {
        nu: prior.r,
        mu: f * prior.a,
        sigma2: f * prior.r_mat * f + prior.c,
    }
}

/// Probability integral transform of an observation against a forecast.
pub fn pit(fd: &ForecastDist, y: f64) -> f64 {
    t_cdf((y - fd.mu) / fd.sigma2.sqrt(), fd.nu)
}

/// Quantile of the forecast distribution (inverse PIT).
pub fn inv_pit(fd: &ForecastDist, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::ParamDomain(format!("u = {u} out of (0,1)")));
    }
    Ok(fd.mu + fd.sigma2.sqrt() * t_quantile(u, fd.nu))
}

/// A full forward filter over one margin. Per time step, records the PIT of
/// y_t against the pre-update forecast (strict one-step-ahead).
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub pits: Vec<f64>,
    pub forecasts: Vec<ForecastDist>,
    pub final_prior: DLMPrior,
}

pub fn run_filter(config: &DLMConfig, ys: &[f64]) -> Result<FilterOutput> {
    config.validate()?;
    let mut prior = DLMPrior::initial();
    let mut pits = Vec::with_capacity(ys.len());
    let mut forecasts = Vec::with_capacity(ys.len());
    for &y in ys {
        let fd = forecast(config, &prior);
        pits.push(pit(&fd, y));
        forecasts.push(fd);
        let post = filter_update(config, &prior, y)?;
        prior = evolve(config, &post);
    }
    Ok(FilterOutput {
        pits,
        forecasts,
        final_prior: prior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_uniform_pvalue;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn cfg() -> DLMConfig {
        DLMConfig::default()
    }

    #[test]
    fn zero_error_update() {
        let prior = DLMPrior {
            a: 0.5,
            r_mat: 0.1,
            r: 10.0,
            c: 0.01,
        };
        let post = filter_update(&cfg(), &prior, 0.5).unwrap();
        assert_eq!(post.m, prior.a);
        // z = r/n < 1 when the error is zero
        assert!((post.s / prior.c - 10.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn hand_worked_first_update() {
        let prior = DLMPrior::initial();
        let post = filter_update(&cfg(), &prior, 0.01).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
        assert!(rel(post.m, 9.090_909_090_909_09e-4) < 1e-8, "m = {}", post.m);
        assert!(rel(post.n, 11.0) < 1e-12);
        // z = (10 + e^2/q)/11 with e=0.01, q=1.1e-5
        let z = (10.0 + 0.01 * 0.01 / 1.1e-5) / 11.0;
        assert!(rel(post.s, z * 1e-5) < 1e-8, "s = {}", post.s);
        assert!(rel(post.c_mat, (1e-6 - (1.0 / 11.0f64).powi(2) * 1.1e-5) * z) < 1e-8);
        // cross-check against the frozen hand values
        assert!(rel(post.c_mat, 1.577_761e-6) < 1e-5);
        assert!(rel(post.s, 1.735_537e-5) < 1e-5);
    }

    #[test]
    fn evolve_formulas() {
        let post = DLMPosterior {
            m: 0.2,
            c_mat: 2e-6,
            n: 11.0,
            s: 3e-5,
        };
        let prior = evolve(&cfg(), &post);
        assert!((prior.r - 10.56).abs() < 1e-12);
        assert!((prior.r_mat - 2e-6 / 0.975).abs() < 1e-18);
        assert!((prior.r_mat - 2.051_282e-6).abs() < 1e-11);
        assert_eq!(prior.a, 0.2);
        assert_eq!(prior.c, 3e-5);
        // delta = 1: no inflation
        let mut c1 = cfg();
        c1.delta = 1.0;
        assert_eq!(evolve(&c1, &post).r_mat, post.c_mat);
    }

    #[test]
    fn constant_data_converges() {
        let c0 = 0.03;
        let mut prior = DLMPrior::initial();
        let mut last_gap = f64::INFINITY;
        for t in 0..400 {
            let post = filter_update(&cfg(), &prior, c0).unwrap();
            let gap = (post.m - c0).abs();
            if t > 5 {
                assert!(gap <= last_gap + 1e-15, "gap grew at t={t}");
            }
            last_gap = gap;
            prior = evolve(&cfg(), &post);
        }
        assert!(last_gap < 1e-4);
    }

    #[test]
    fn pit_reference_values() {
        let fd = ForecastDist {
            nu: 10.0,
            mu: 0.0,
            sigma2: 1.0,
        };
        assert!((pit(&fd, 0.0) - 0.5).abs() < 1e-14);
        assert!((pit(&fd, 1.812_461_122_810_733) - 0.95).abs() < 1e-10);
        let y = inv_pit(&fd, pit(&fd, 1.234)).unwrap();
        assert!((y - 1.234).abs() < 1e-9);
        assert!(inv_pit(&fd, 0.0).is_err());
        assert!(inv_pit(&fd, 1.0).is_err());
    }

    #[test]
    fn pit_uniform_on_self_simulated_series() {
        // draw y_t from the model's own forecast distribution each step
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let config = cfg();
        let mut prior = DLMPrior::initial();
        let mut ys = Vec::with_capacity(2000);
        for _ in 0..2000 {
            let fd = forecast(&config, &prior);
            let u: f64 = rng.gen_range(1e-9..1.0 - 1e-9);
            let y = inv_pit(&fd, u).unwrap();
            ys.push(y);
            let post = filter_update(&config, &prior, y).unwrap();
            prior = evolve(&config, &post);
        }
        let out = run_filter(&config, &ys).unwrap();
        assert!(ks_uniform_pvalue(&out.pits) > 0.01);
    }

    #[test]
    fn state_stays_positive_on_random_walk() {
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        let config = cfg();
        let mut prior = DLMPrior::initial();
        let mut level = 0.0f64;
        for _ in 0..10_000 {
            level += 0.01 * (rng.gen::<f64>() - 0.5);
            let y = level + 0.02 * (rng.gen::<f64>() - 0.5);
            let post = filter_update(&config, &prior, y).unwrap();
            prior = evolve(&config, &post);
            assert!(prior.r_mat > 0.0 && prior.r > 0.0 && prior.c > 0.0);
        }
    }

    #[test]
    fn no_discount_converges_on_constant_data() {
        let config = DLMConfig {
            beta: 1.0,
            delta: 1.0,
            f: 1.0,
            g: 1.0,
        };
        let ys = vec![0.02; 1500];
        let out = run_filter(&config, &ys).unwrap();
        let last = out.forecasts.last().unwrap();
        let early_gap = (out.forecasts[100].mu - 0.02).abs();
        let last_gap = (last.mu - 0.02).abs();
        assert!(last_gap < 1e-3 && last_gap < early_gap);
        let mid = out.forecasts[700].sigma2;
        assert!(last.sigma2 <= mid);
    }
}
