//! Portfolio layer: joint next-day return simulation through a vine copula
//! with per-margin forecast distributions, value-at-risk, Sharpe-ratio
//! estimation, constrained weight optimization, and a rolling backtest.

use crate::dlm::{self, DLMConfig, DLMPrior, ForecastDist};
use crate::error::{Error, Result};
use crate::stats::{column_means, empirical_quantile, sample_covariance};
use crate::vine::VineCopula;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Trading-day annualization constant.
pub const TRADING_DAYS: f64 = 252.0;

/// Simulated next-day returns (rows = samples, columns = assets) with the
/// derived sample mean vector and covariance matrix.
#[derive(Debug, Clone)]
pub struct ForecastPanel {
    pub samples: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl ForecastPanel {
    pub fn from_samples(samples: Vec<Vec<f64>>) -> Result<ForecastPanel> {
        if samples.is_empty() {
            return Err(Error::Data("empty forecast panel".into()));
        }
        let d = samples[0].len();
        if d == 0 || samples.iter().any(|r| r.len() != d) {
            return Err(Error::Data("ragged forecast panel".into()));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite simulated return".into()));
        }
        let mu = column_means(&samples);
        let sigma = sample_covariance(&samples);
        Ok(ForecastPanel { samples, mu, sigma })
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

/// Simulates `n` joint next-day returns: u ~ copula, then each margin is
/// mapped to the observation scale through its forecast-distribution
/// quantile function.
pub fn joint_forecast<R: Rng + ?Sized>(
    forecasts: &[ForecastDist],
    copula: &VineCopula,
    n: usize,
    rng: &mut R,
) -> Result<ForecastPanel> {
    if forecasts.len() != copula.d() {
        return Err(Error::Config(format!(
            "{} margins but copula dimension {}",
            forecasts.len(),
            copula.d()
        )));
    }
    let us = copula.simulate(n, rng)?;
    let mut samples = Vec::with_capacity(n);
    for u in &us {
        let mut row = Vec::with_capacity(u.len());
        for (j, fd) in forecasts.iter().enumerate() {
            row.push(dlm::inv_pit(fd, u[j].clamp(1e-12, 1.0 - 1e-12))?);
        }
        samples.push(row);
    }
    ForecastPanel::from_samples(samples)
}

fn portfolio_returns(panel: &ForecastPanel, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != panel.d() {
        return Err(Error::Config(format!(
            "weight length {} does not match panel dimension {}",
            w.len(),
            panel.d()
        )));
    }
    Ok(panel
        .samples
        .iter()
        .map(|r| r.iter().zip(w).map(|(y, wj)| y * wj).sum())
        .collect())
}

/// Empirical `level` quantile of the simulated portfolio return.
pub fn var_quantile(panel: &ForecastPanel, w: &[f64], level: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::Config(format!("VaR level {level} out of [0,1]")));
    }
    let rets = portfolio_returns(panel, w)?;
    Ok(empirical_quantile(&rets, level))
}

/// Annualized predicted Sharpe ratio 252 w'mu / sqrt(252 w'Sigma w) under a
/// zero-return risk-free asset.
pub fn sharpe_estimate(w: &[f64], panel: &ForecastPanel) -> Result<f64> {
    if w.len() != panel.d() {
        return Err(Error::Config(format!(
            "weight length {} does not match panel dimension {}",
            w.len(),
            panel.d()
        )));
    }
    let mean: f64 = w.iter().zip(&panel.mu).map(|(wj, m)| wj * m).sum();
    let mut var = 0.0;
    for (i, wi) in w.iter().enumerate() {
        for (j, wj) in w.iter().enumerate() {
            var += wi * wj * panel.sigma[i][j];
        }
    }
    if var <= 0.0 {
        return Err(Error::ParamDomain(format!(
            "portfolio variance w'Sigma w = {var} <= 0"
        )));
    }
    Ok(TRADING_DAYS * mean / (TRADING_DAYS * var).sqrt())
}

/// Box constraints applied to every weight alongside the simplex constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Bounds {
    fn default() -> Bounds {
        Bounds { lo: 0.05, hi: 0.25 }
    }
}

impl Bounds {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi && self.lo >= 0.0) {
            return Err(Error::Config(format!(
                "bad weight bounds [{}, {}]",
                self.lo, self.hi
            )));
        }
        let (dl, dh) = (d as f64 * self.lo, d as f64 * self.hi);
        if dl > 1.0 + 1e-12 || dh < 1.0 - 1e-12 {
            return Err(Error::Config(format!(
                "infeasible bounds: d*lo = {dl}, d*hi = {dh} must bracket 1"
            )));
        }
        Ok(())
    }
}

/// Euclidean projection onto {w : sum w = 1, lo <= w_j <= hi} by bisecting
/// on the common shift.
pub fn project_box_simplex(x: &[f64], b: Bounds) -> Vec<f64> {
    let clip_sum = |c: f64| -> f64 { x.iter().map(|v| (v + c).clamp(b.lo, b.hi)).sum() };
    let (mut lo, mut hi) = (-1.0 - b.hi, 1.0 + b.hi);
    while clip_sum(lo) > 1.0 {
        lo = 2.0 * lo;
    }
    while clip_sum(hi) < 1.0 {
        hi = 2.0 * hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clip_sum(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let mut w: Vec<f64> = x.iter().map(|v| (v + c).clamp(b.lo, b.hi)).collect();
    // absorb the residual rounding into an interior coordinate
    let resid = 1.0 - w.iter().sum::<f64>();
    if let Some(j) = (0..w.len()).find(|&j| w[j] + resid >= b.lo && w[j] + resid <= b.hi) {
        w[j] += resid;
    }
    w
}

fn sharpe_gradient(w: &[f64], panel: &ForecastPanel) -> Vec<f64> {
    let d = w.len();
    let mean: f64 = w.iter().zip(&panel.mu).map(|(wj, m)| wj * m).sum();
    let mut sw = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            sw[i] += panel.sigma[i][j] * w[j];
        }
    }
    let q: f64 = w.iter().zip(&sw).map(|(wi, s)| wi * s).sum();
    let sq = (TRADING_DAYS * q).sqrt();
    (0..d)
        .map(|i| TRADING_DAYS * panel.mu[i] / sq - TRADING_DAYS * mean * TRADING_DAYS * sw[i] / (sq * sq * sq))
        .collect()
}

fn assert_feasible(w: &[f64], b: Bounds) {
    let s: f64 = w.iter().sum();
    assert!((s - 1.0).abs() < 1e-8, "weights sum to {s}");
    for &wj in w {
        assert!(
            wj >= b.lo - 1e-9 && wj <= b.hi + 1e-9,
            "weight {wj} outside [{}, {}]",
            b.lo,
            b.hi
        );
    }
}

/// Maximizes the predicted Sharpe ratio over the box-constrained simplex via
/// multi-start projected-gradient ascent (50 Dirichlet starts, 500 steps,
/// base step 1e-2 with backtracking).
pub fn optimize_weights<R: Rng + ?Sized>(
    panel: &ForecastPanel,
    bounds: Bounds,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = panel.d();
    bounds.validate(d)?;
    let mut best_w: Option<Vec<f64>> = None;
    let mut best_sr = f64::NEG_INFINITY;
    for start in 0..50 {
        let mut w = if start == 0 {
            vec![1.0 / d as f64; d]
        } else {
            // flat Dirichlet draw via normalized exponentials
            let e: Vec<f64> = (0..d).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        };
        w = project_box_simplex(&w, bounds);
        let mut sr = sharpe_estimate(&w, panel)?;
        for _ in 0..500 {
            let grad = sharpe_gradient(&w, panel);
            let mut step = 1e-2;
            let mut improved = false;
            for _ in 0..20 {
                let cand: Vec<f64> = w.iter().zip(&grad).map(|(wj, g)| wj + step * g).collect();
                let cand = project_box_simplex(&cand, bounds);
                let cand_sr = sharpe_estimate(&cand, panel)?;
                if cand_sr > sr {
                    w = cand;
                    sr = cand_sr;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if sr > best_sr {
            best_sr = sr;
            best_w = Some(w);
        }
    }
    let w = best_w.expect("at least one start");
    assert_feasible(&w, bounds);
    Ok(w)
}

/// Backtest configuration: warm-up length, per-day simulation size, VaR
/// level, weight bounds, and the dependence-model refresh interval
/// (`None` = fit once on the warm-up window and keep it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub warmup: usize,
    pub n_samples: usize,
    pub var_level: f64,
    pub bounds: Bounds,
    pub refit_every: Option<usize>,
    pub dlm: DLMConfig,
}

impl Default for BacktestConfig {
    fn default() -> BacktestConfig {
        BacktestConfig {
            warmup: 250,
            n_samples: 10_000,
            var_level: 0.10,
            bounds: Bounds::default(),
            refit_every: None,
            dlm: DLMConfig::default(),
        }
    }
}

/// One out-of-sample day of the backtest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DailyRecord {
    pub day: usize,
    pub weights: Vec<f64>,
    pub realized: f64,
    pub forecast_mean: f64,
    pub var: f64,
    pub exceeded: bool,
}

/// Backtest output: per-day records plus realized annualized Sharpe ratio
/// and the empirical VaR exceedance rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    pub daily: Vec<DailyRecord>,
    pub sharpe: f64,
    pub var_coverage: f64,
}

/// Converts an adjusted-close price matrix (rows = days) to log returns.
pub fn log_returns(prices: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if prices.len() < 2 {
        return Err(Error::Data("need at least two price rows".into()));
    }
    let d = prices[0].len();
    for (t, row) in prices.iter().enumerate() {
        if row.len() != d {
            return Err(Error::Data(format!("ragged price row {t}")));
        }
        for (j, &p) in row.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Data(format!(
                    "bad price {p} at row {t}, column {j}"
                )));
            }
        }
    }
    Ok((1..prices.len())
        .map(|t| {
            (0..d)
                .map(|j| (prices[t][j] / prices[t - 1][j]).ln())
                .collect()
        })
        .collect())
}

/// Realized annualized Sharpe ratio of a daily return series; a degenerate
/// (zero-variance) series scores 0.
pub fn realized_sharpe(daily: &[f64]) -> f64 {
    if daily.len() < 2 {
        return 0.0;
    }
    let n = daily.len() as f64;
    let mean = daily.iter().sum::<f64>() / n;
    let var = daily.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return 0.0;
    }
    TRADING_DAYS * mean / (TRADING_DAYS * var).sqrt()
}

/// Rolling one-step-ahead backtest over a return matrix. `fit_copula` is
/// invoked on the warm-up PITs (and again every `refit_every` days when
/// set); each day the margins are filtered, a joint panel is simulated,
/// weights are optimized, and the realized return and VaR exceedance are
/// recorded.
pub fn backtest_returns<R: Rng + ?Sized>(
    returns: &[Vec<f64>],
    config: &BacktestConfig,
    fit_copula: &mut dyn FnMut(&[Vec<f64>]) -> Result<VineCopula>,
    rng: &mut R,
) -> Result<BacktestReport> {
    let t_total = returns.len();
    let d = if t_total > 0 { returns[0].len() } else { 0 };
    if d == 0 {
        return Err(Error::Data("empty return matrix".into()));
    }
    if config.warmup < 2 || config.warmup >= t_total {
        return Err(Error::Config(format!(
            "warm-up {} must lie in [2, {})",
            config.warmup, t_total
        )));
    }
    config.dlm.validate()?;
    config.bounds.validate(d)?;
    if config.n_samples == 0 {
        return Err(Error::Config("n_samples must be positive".into()));
    }

    // forward-filter each margin over the warm-up window, keeping PITs
    let mut priors = vec![DLMPrior::initial(); d];
    let mut pits: Vec<Vec<f64>> = Vec::with_capacity(config.warmup);
    for row in &returns[..config.warmup] {
        let mut urow = Vec::with_capacity(d);
        for j in 0..d {
            let fd = dlm::forecast(&config.dlm, &priors[j]);
            urow.push(dlm::pit(&fd, row[j]).clamp(1e-9, 1.0 - 1e-9));
            let post = dlm::filter_update(&config.dlm, &priors[j], row[j])?;
            priors[j] = dlm::evolve(&config.dlm, &post);
        }
        pits.push(urow);
    }
    let mut copula = fit_copula(&pits)?;
    if copula.d() != d {
        return Err(Error::Config(format!(
            "fitted copula dimension {} does not match {} assets",
            copula.d(),
            d
        )));
    }

    let mut daily = Vec::with_capacity(t_total - config.warmup);
    let mut exceed = 0usize;
    for t in config.warmup..t_total {
        if let Some(every) = config.refit_every {
            if every > 0 && t > config.warmup && (t - config.warmup) % every == 0 {
                copula = fit_copula(&pits)?;
            }
        }
        let forecasts: Vec<ForecastDist> = priors
            .iter()
            .map(|p| dlm::forecast(&config.dlm, p))
            .collect();
        let panel = joint_forecast(&forecasts, &copula, config.n_samples, rng)?;
        let w = optimize_weights(&panel, config.bounds, rng)?;
        // risk is measured on a fresh draw: the empirical quantile of the
        // panel the weights were optimized on is biased shallow for the
        // selected portfolio
        let risk_panel = joint_forecast(&forecasts, &copula, config.n_samples, rng)?;
        let var = var_quantile(&risk_panel, &w, config.var_level)?;
        let forecast_mean: f64 = w.iter().zip(&risk_panel.mu).map(|(wj, m)| wj * m).sum();
        let realized: f64 = w.iter().zip(&returns[t]).map(|(wj, y)| wj * y).sum();
        let exceeded = realized < var;
        exceed += exceeded as usize;
        daily.push(DailyRecord {
            day: t,
            weights: w,
            realized,
            forecast_mean,
            var,
            exceeded,
        });
        let mut urow = Vec::with_capacity(d);
        for j in 0..d {
            urow.push(dlm::pit(&forecasts[j], returns[t][j]).clamp(1e-9, 1.0 - 1e-9));
            let post = dlm::filter_update(&config.dlm, &priors[j], returns[t][j])?;
            priors[j] = dlm::evolve(&config.dlm, &post);
        }
        pits.push(urow);
    }
    let rets: Vec<f64> = daily.iter().map(|r| r.realized).collect();
    Ok(BacktestReport {
        sharpe: realized_sharpe(&rets),
        var_coverage: exceed as f64 / daily.len().max(1) as f64,
        daily,
    })
}

/// Price-level entry point: converts adjusted closes to log returns, then
/// runs [`backtest_returns`].
pub fn backtest<R: Rng + ?Sized>(
    prices: &[Vec<f64>],
    config: &BacktestConfig,
    fit_copula: &mut dyn FnMut(&[Vec<f64>]) -> Result<VineCopula>,
    rng: &mut R,
) -> Result<BacktestReport> {
    let rets = log_returns(prices)?;
    backtest_returns(&rets, config, fit_copula, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::{FamilyTag, PairCopula, PairParams};
    use crate::stats::{kendall_tau, ks_uniform_pvalue};
    use crate::vine::VineStructure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn fam(s: &str) -> FamilyTag {
        FamilyTag::parse(s).unwrap()
    }

    fn std_normal_forecast() -> ForecastDist {
        // huge df makes the forecast t effectively standard normal
        ForecastDist {
            nu: 1e6,
            mu: 0.0,
            sigma2: 1.0,
        }
    }

    fn independence_copula(d: usize) -> VineCopula {
        let trees: Vec<Vec<(usize, usize)>> = (0..d - 1)
            .map(|k| (0..d - 1 - k).map(|i| (i, i + 1)).collect())
            .collect();
        VineCopula::independence(VineStructure::new(d, trees)).unwrap()
    }

    fn gaussian_pair_copula(d: usize, tau: f64) -> VineCopula {
        let trees: Vec<Vec<(usize, usize)>> = (0..d - 1)
            .map(|k| (0..d - 1 - k).map(|i| (i, i + 1)).collect())
            .collect();
        let structure = VineStructure::new(d, trees);
        let mut pairs: Vec<Vec<PairCopula>> = (0..d - 1)
            .map(|k| vec![PairCopula::independence(); d - 1 - k])
            .collect();
        pairs[0] = (0..d - 1)
            .map(|_| PairCopula::new(fam("N"), PairParams::tau_only(tau)).unwrap())
            .collect();
        VineCopula::new(structure, pairs, d - 1).unwrap()
    }

    #[test]
    fn independence_margins_match_forecast_distribution() {
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        let fds = vec![std_normal_forecast(); 3];
        let copula = independence_copula(3);
        let panel = joint_forecast(&fds, &copula, 4000, &mut rng).unwrap();
        for j in 0..3 {
            let us: Vec<f64> = panel
                .samples
                .iter()
                .map(|r| dlm::pit(&fds[j], r[j]))
                .collect();
            assert!(ks_uniform_pvalue(&us) > 0.01, "margin {j} fails KS");
        }
    }

    #[test]
    fn strong_dependence_preserved_in_returns() {
        let mut rng = ChaCha12Rng::seed_from_u64(102);
        let fds = vec![std_normal_forecast(); 2];
        // Gaussian pair with rho = 0.9 -> tau = 2/pi asin(0.9)
        let tau = 2.0 / std::f64::consts::PI * 0.9f64.asin();
        let copula = gaussian_pair_copula(2, tau);
        let panel = joint_forecast(&fds, &copula, 10_000, &mut rng).unwrap();
        let x: Vec<f64> = panel.samples.iter().map(|r| r[0]).collect();
        let y: Vec<f64> = panel.samples.iter().map(|r| r[1]).collect();
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let my = y.iter().sum::<f64>() / y.len() as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..x.len() {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx).powi(2);
            syy += (y[i] - my).powi(2);
        }
        assert!(sxy / (sxx * syy).sqrt() > 0.7);
    }

    #[test]
    fn panel_preserves_copula_kendall_tau() {
        let mut rng = ChaCha12Rng::seed_from_u64(103);
        let fds = vec![std_normal_forecast(); 2];
        let tau = 0.5;
        let copula = gaussian_pair_copula(2, tau);
        let n = 10_000;
        let panel = joint_forecast(&fds, &copula, n, &mut rng).unwrap();
        let x: Vec<f64> = panel.samples.iter().map(|r| r[0]).collect();
        let y: Vec<f64> = panel.samples.iter().map(|r| r[1]).collect();
        let emp = kendall_tau(&x, &y);
        // asymptotic sd of tau-hat under independence bounds the error scale
        let se = (2.0 * (2.0 * n as f64 + 5.0) / (9.0 * n as f64 * (n as f64 - 1.0))).sqrt();
        assert!((emp - tau).abs() < 3.0 * se, "emp tau {emp} vs {tau}");
    }

    #[test]
    fn var_trivial_and_normal_reference() {
        let panel = ForecastPanel::from_samples(vec![vec![0.03]; 50]).unwrap();
        assert_eq!(var_quantile(&panel, &[1.0], 0.10).unwrap(), 0.03);
        assert_eq!(var_quantile(&panel, &[1.0], 0.5).unwrap(), 0.03);

        let mut rng = ChaCha12Rng::seed_from_u64(104);
        let fds = vec![std_normal_forecast()];
        let copula_free: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![dlm::inv_pit(&fds[0], rng.gen_range(1e-9..1.0 - 1e-9)).unwrap()])
            .collect();
        let panel = ForecastPanel::from_samples(copula_free).unwrap();
        let v = var_quantile(&panel, &[1.0], 0.10).unwrap();
        assert!((v - (-1.2816)).abs() < 0.05, "10% VaR {v}");
        let med = var_quantile(&panel, &[1.0], 0.5).unwrap();
        assert!(med.abs() < 0.05);
    }

    #[test]
    fn sharpe_formula_and_scale_invariance() {
        // mu-hat = 0 -> 0
        let mut rng = ChaCha12Rng::seed_from_u64(105);
        let zero_mean: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let x: f64 = rng.gen::<f64>() - 0.5;
                vec![x, -x]
            })
            .collect();
        let panel = ForecastPanel::from_samples(zero_mean).unwrap();
        let mut p0 = panel.clone();
        p0.mu = vec![0.0, 0.0];
        assert_eq!(sharpe_estimate(&[0.7, 0.3], &p0).unwrap(), 0.0);

        // d = 9, equal weights, mu_j = mu0, Sigma = sigma^2 I
        let d = 9;
        let (mu0, sigma) = (0.001, 0.02);
        let mut p = ForecastPanel {
            samples: vec![vec![0.0; d]; 2],
            mu: vec![mu0; d],
            sigma: vec![vec![0.0; d]; d],
        };
        for j in 0..d {
            p.sigma[j][j] = sigma * sigma;
        }
        let w = vec![1.0 / d as f64; d];
        let sr = sharpe_estimate(&w, &p).unwrap();
        let expect = 3.0 * TRADING_DAYS.sqrt() * mu0 / sigma;
        assert!((sr - expect).abs() < 1e-10, "sr {sr} vs {expect}");

        // positive scaling leaves the ratio unchanged
        let c = 7.3;
        let mut ps = p.clone();
        ps.mu.iter_mut().for_each(|m| *m *= c);
        ps.sigma
            .iter_mut()
            .for_each(|row| row.iter_mut().for_each(|v| *v *= c * c));
        let srs = sharpe_estimate(&w, &ps).unwrap();
        assert!((srs - sr).abs() < 1e-10);

        // degenerate variance is a domain error
        let mut pz = p.clone();
        pz.sigma = vec![vec![0.0; d]; d];
        assert!(sharpe_estimate(&w, &pz).is_err());
    }

    fn synthetic_panel(rng: &mut ChaCha12Rng, mu: &[f64], sd: &[f64], n: usize) -> ForecastPanel {
        let d = mu.len();
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|j| {
                        let u: f64 = rng.gen_range(1e-9..1.0 - 1e-9);
                        mu[j] + sd[j] * crate::special::norm_quantile(u)
                    })
                    .collect()
            })
            .collect();
        ForecastPanel::from_samples(samples).unwrap()
    }

    fn random_search_oracle(panel: &ForecastPanel, b: Bounds, points: usize, seed: u64) -> f64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let d = panel.d();
        let mut best = f64::NEG_INFINITY;
        for _ in 0..points {
            let e: Vec<f64> = (0..d).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let s: f64 = e.iter().sum();
            let w = project_box_simplex(&e.iter().map(|v| v / s).collect::<Vec<_>>(), b);
            let sr = sharpe_estimate(&w, panel).unwrap();
            if sr > best {
                best = sr;
            }
        }
        best
    }

    #[test]
    fn optimizer_matches_random_search_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(106);
        let mu = [0.0008, -0.0002, 0.0011, 0.0004, 0.0006];
        let sd = [0.012, 0.018, 0.02, 0.009, 0.015];
        let panel = synthetic_panel(&mut rng, &mu, &sd, 4000);
        let b = Bounds { lo: 0.05, hi: 0.35 };
        let w = optimize_weights(&panel, b, &mut rng).unwrap();
        let sr = sharpe_estimate(&w, &panel).unwrap();
        let oracle = random_search_oracle(&panel, b, 1_000_000, 9001);
        assert!(
            sr >= oracle - 1e-3,
            "optimizer {sr} below oracle {oracle} - 1e-3"
        );

        // scale invariance of the argmax: optimizer at 100x panel agrees
        let mut scaled = panel.clone();
        scaled
            .samples
            .iter_mut()
            .for_each(|r| r.iter_mut().for_each(|v| *v *= 100.0));
        let scaled = ForecastPanel::from_samples(scaled.samples).unwrap();
        let ws = optimize_weights(&scaled, b, &mut rng).unwrap();
        let sr_scaled = sharpe_estimate(&ws, &scaled).unwrap();
        assert!((sr_scaled - sr).abs() < 2e-3, "{sr_scaled} vs {sr}");
    }

    #[test]
    fn optimizer_concentrates_on_dominant_asset() {
        let mut rng = ChaCha12Rng::seed_from_u64(107);
        let mu = [0.0002, 0.0002, 0.003, 0.0002];
        let sd = [0.01, 0.01, 0.01, 0.01];
        let panel = synthetic_panel(&mut rng, &mu, &sd, 6000);
        let b = Bounds { lo: 0.0, hi: 1.0 };
        let w = optimize_weights(&panel, b, &mut rng).unwrap();
        // brute-force oracle on the 0.01 grid over the probability simplex
        let mut best = (f64::NEG_INFINITY, vec![0.0; 4]);
        for a in 0..=100 {
            for bb in 0..=(100 - a) {
                for c in 0..=(100 - a - bb) {
                    let wv = vec![
                        a as f64 / 100.0,
                        bb as f64 / 100.0,
                        c as f64 / 100.0,
                        (100 - a - bb - c) as f64 / 100.0,
                    ];
                    if let Ok(sr) = sharpe_estimate(&wv, &panel) {
                        if sr > best.0 {
                            best = (sr, wv);
                        }
                    }
                }
            }
        }
        assert!(w[2] > 0.8, "dominant-asset weight {}", w[2]);
        assert!(best.1[2] > 0.8);
        assert!(sharpe_estimate(&w, &panel).unwrap() >= best.0 - 1e-3);
    }

    #[test]
    fn symmetric_panel_gives_equal_weights() {
        let mut rng = ChaCha12Rng::seed_from_u64(108);
        let d = 4;
        let mu = vec![0.001; d];
        let sd = vec![0.015; d];
        let panel = synthetic_panel(&mut rng, &mu, &sd, 5000);
        // symmetrize the moments exactly so exchangeability is structural
        let mut p = panel.clone();
        p.mu = vec![0.001; d];
        let mut s = vec![vec![0.0; d]; d];
        for j in 0..d {
            s[j][j] = 0.015 * 0.015;
        }
        p.sigma = s;
        let b = Bounds { lo: 0.05, hi: 0.95 };
        let w = optimize_weights(&p, b, &mut rng).unwrap();
        let sr_eq = sharpe_estimate(&vec![1.0 / d as f64; d], &p).unwrap();
        let sr_w = sharpe_estimate(&w, &p).unwrap();
        assert!((sr_w - sr_eq).abs() < 1e-6, "{sr_w} vs {sr_eq}");
    }

    #[test]
    fn bounds_feasibility_and_errors() {
        let mut rng = ChaCha12Rng::seed_from_u64(109);
        let mu: Vec<f64> = (0..9).map(|j| 0.0002 * (j as f64 + 1.0)).collect();
        let sd = vec![0.012; 9];
        let panel = synthetic_panel(&mut rng, &mu, &sd, 3000);
        let b = Bounds::default();
        let w = optimize_weights(&panel, b, &mut rng).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        for &wj in &w {
            assert!((0.05 - 1e-9..=0.25 + 1e-9).contains(&wj));
        }
        // infeasible: 4 assets cannot each carry at least 0.30
        assert!(Bounds { lo: 0.30, hi: 0.40 }.validate(4).is_err());
        assert!(Bounds { lo: 0.0, hi: 0.20 }.validate(4).is_err());
    }

    #[test]
    fn constant_prices_give_zero_sharpe_and_no_exceedances() {
        let prices = vec![vec![100.0, 50.0, 20.0]; 80];
        let config = BacktestConfig {
            warmup: 40,
            n_samples: 1000,
            var_level: 0.10,
            bounds: Bounds { lo: 0.0, hi: 1.0 },
            refit_every: None,
            dlm: DLMConfig::default(),
        };
        let mut rng = ChaCha12Rng::seed_from_u64(110);
        let mut fit = |_pits: &[Vec<f64>]| Ok(independence_copula(3));
        let report = backtest(&prices, &config, &mut fit, &mut rng).unwrap();
        assert_eq!(report.sharpe, 0.0);
        assert!(report.daily.iter().all(|r| r.realized == 0.0));
        assert_eq!(report.var_coverage, 0.0);
    }

    #[test]
    fn bad_prices_are_rejected_with_location() {
        let mut prices = vec![vec![100.0, 50.0]; 10];
        prices[4][1] = f64::NAN;
        let err = log_returns(&prices).unwrap_err().to_string();
        assert!(err.contains("row 4") && err.contains("column 1"), "{err}");
        prices[4][1] = -3.0;
        assert!(log_returns(&prices).is_err());
    }

    #[test]
    fn self_consistent_backtest_var_coverage() {
        // generate returns from the same joint model the backtest assumes:
        // filter states evolve on the simulated data themselves
        let d = 3;
        let tau = 0.5;
        let truth = gaussian_pair_copula(d, tau);
        let config = BacktestConfig {
            warmup: 100,
            n_samples: 2000,
            var_level: 0.10,
            bounds: Bounds { lo: 0.0, hi: 1.0 },
            refit_every: None,
            dlm: DLMConfig::default(),
        };
        let mut gen_rng = ChaCha12Rng::seed_from_u64(111);
        let t_total = 600;
        let mut priors = vec![DLMPrior::initial(); d];
        let mut returns = Vec::with_capacity(t_total);
        let us = truth.simulate(t_total, &mut gen_rng).unwrap();
        for u in &us {
            let mut row = Vec::with_capacity(d);
            for j in 0..d {
                let fd = dlm::forecast(&config.dlm, &priors[j]);
                let y = dlm::inv_pit(&fd, u[j].clamp(1e-9, 1.0 - 1e-9)).unwrap();
                row.push(y);
                let post = dlm::filter_update(&config.dlm, &priors[j], y).unwrap();
                priors[j] = dlm::evolve(&config.dlm, &post);
            }
            returns.push(row);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(112);
        let mut fit = |_pits: &[Vec<f64>]| Ok(gaussian_pair_copula(d, tau));
        let report = backtest_returns(&returns, &config, &mut fit, &mut rng).unwrap();
        let n_days = report.daily.len() as f64;
        // binomial 95% band around 0.10 over 500 out-of-sample days
        let half = 1.96 * (0.1f64 * 0.9 / n_days).sqrt();
        assert!(
            (report.var_coverage - 0.10).abs() < half + 1e-12,
            "coverage {} outside band +-{half}",
            report.var_coverage
        );
    }

    #[test]
    fn independence_model_on_correlated_data_understates_risk() {
        // strong common factor in the data, independence copula in the model:
        // diversification is overstated, so the 10% VaR is exceeded much
        // more often than 10% of the time
        let d = 4;
        let tau = 0.7;
        let truth = gaussian_pair_copula(d, tau);
        let config = BacktestConfig {
            warmup: 100,
            n_samples: 2000,
            var_level: 0.10,
            bounds: Bounds { lo: 0.0, hi: 1.0 },
            refit_every: None,
            dlm: DLMConfig::default(),
        };
        let mut gen_rng = ChaCha12Rng::seed_from_u64(113);
        let t_total = 500;
        let mut priors = vec![DLMPrior::initial(); d];
        let mut returns = Vec::with_capacity(t_total);
        let us = truth.simulate(t_total, &mut gen_rng).unwrap();
        for u in &us {
            let mut row = Vec::with_capacity(d);
            for j in 0..d {
                let fd = dlm::forecast(&config.dlm, &priors[j]);
                let y = dlm::inv_pit(&fd, u[j].clamp(1e-9, 1.0 - 1e-9)).unwrap();
                row.push(y);
                let post = dlm::filter_update(&config.dlm, &priors[j], y).unwrap();
                priors[j] = dlm::evolve(&config.dlm, &post);
            }
            returns.push(row);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(114);
        let mut fit_indep = |_pits: &[Vec<f64>]| Ok(independence_copula(d));
        let indep = backtest_returns(&returns, &config, &mut fit_indep, &mut rng).unwrap();
        let mut rng2 = ChaCha12Rng::seed_from_u64(114);
        let mut fit_true = |_pits: &[Vec<f64>]| Ok(gaussian_pair_copula(d, tau));
        let truth_run = backtest_returns(&returns, &config, &mut fit_true, &mut rng2).unwrap();
        assert!(
            indep.var_coverage > 0.14,
            "independence coverage {} not materially above 0.10",
            indep.var_coverage
        );
        assert!(indep.var_coverage > truth_run.var_coverage + 0.03);
    }

    #[test]
    fn projection_hits_box_simplex_exactly() {
        let b = Bounds { lo: 0.05, hi: 0.25 };
        let mut rng = ChaCha12Rng::seed_from_u64(115);
        for _ in 0..200 {
            let x: Vec<f64> = (0..9).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let w = project_box_simplex(&x, b);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            assert!(w.iter().all(|&v| (0.05 - 1e-9..=0.25 + 1e-9).contains(&v)));
        }
    }
}
