//! Reversible jump MCMC for tree-by-tree Bayesian vine selection: shrinkage
//! priors, within-model random-walk sweeps, a local between-models move on
//! pair families and a global joint update of the level tree, plus the
//! level-by-level driver and posterior-mode extraction.

use crate::error::{Error, Result};
use crate::pair::{
    pair_ln_density, pair_loglik, CopulaKind, FamilyTag, PairCopula, PairParams,
};
use crate::special::{norm_cdf, norm_quantile};
use crate::tree_space::{count_spanning_trees, qt_lognormalizer, sample_tree_excluding, AllowedGraph};
use crate::vine::{pseudo_pair_arrays, EdgeSets, VineCopula, VineStructure};
use num_bigint::BigInt;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

const LN_HALF: f64 = -std::f64::consts::LN_2;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn ln30() -> f64 {
    30f64.ln()
}

/// Prior on the Student's t degrees of freedom over (1, 30).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DfPrior {
    /// Density proportional to log(nu).
    LogNu,
    /// Flat on log(nu), i.e. density proportional to 1/nu.
    FlatLogNu,
}

/// Model prior: uniform over admissible trees, exp(-lambda * d_e) per pair
/// family, flat tau in (-1, 1), and a proper degrees-of-freedom prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub lambda: f64,
    pub df_prior: DfPrior,
}

impl Default for PriorConfig {
    fn default() -> PriorConfig {
        PriorConfig {
            lambda: 1.0,
            df_prior: DfPrior::LogNu,
        }
    }
}

/// Sampler tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    pub iterations: usize,
    pub burn_in: usize,
    /// Random-walk and proposal sd on tau.
    pub sigma_tau: f64,
    /// Random-walk and proposal sd on log(nu).
    pub sigma_lognu: f64,
    /// Similarity parameter of the tree proposal.
    pub p_tree: f64,
    /// Shape of the update-count distribution q_N.
    pub qn_shape: f64,
    /// Relative floor on family-proposal weights.
    pub proposal_floor: f64,
    /// Assume the tree-proposal normalizers cancel in the acceptance ratio
    /// instead of computing the exact correction.
    pub paper_cancellation: bool,
    /// Row cap for the degrees-of-freedom grid search in plug-in fits.
    pub fit_subsample: Option<usize>,
    /// Weight of the prior component in the parameter proposal mixture.
    pub prior_mix: f64,
}

impl Default for TuningParams {
    fn default() -> TuningParams {
        TuningParams {
            iterations: 50_000,
            burn_in: 2_500,
            sigma_tau: 0.0125,
            sigma_lognu: 0.1,
            p_tree: 0.667,
            qn_shape: 3.5,
            proposal_floor: 0.05,
            paper_cancellation: false,
            fit_subsample: Some(50),
            prior_mix: 0.1,
        }
    }
}

impl TuningParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations {} must exceed burn-in {}",
                self.iterations, self.burn_in
            )));
        }
        if !(self.sigma_tau > 0.0 && self.sigma_lognu > 0.0 && self.qn_shape > 0.0) {
            return Err(Error::Config("proposal scales must be positive".into()));
        }
        if !(self.p_tree > 0.0 && self.p_tree < 1.0) {
            return Err(Error::Config(format!("p_tree = {} out of (0,1)", self.p_tree)));
        }
        if !(self.proposal_floor > 0.0 && self.proposal_floor <= 1.0) {
            return Err(Error::Config(format!(
                "proposal floor = {} out of (0,1]",
                self.proposal_floor
            )));
        }
        if !(0.0..1.0).contains(&self.prior_mix) {
            return Err(Error::Config(format!(
                "prior mixture weight = {} out of [0,1)",
                self.prior_mix
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

/// Log-density of the degrees-of-freedom prior on the natural nu scale.
pub fn df_log_prior_density(nu: f64, which: DfPrior) -> f64 {
    if !(nu > 1.0 && nu <= 30.0) {
        return f64::NEG_INFINITY;
    }
    match which {
        // normalizer: integral of log(x) over (1,30) = 30 log 30 - 29
        DfPrior::LogNu => nu.ln().ln() - (30.0 * ln30() - 29.0).ln(),
        DfPrior::FlatLogNu => -nu.ln() - ln30().ln(),
    }
}

/// Log prior density of one pair copula's parameters in the sampling
/// parameterization (tau, log nu).
fn param_log_prior(prior: &PriorConfig, family: FamilyTag, params: &PairParams) -> f64 {
    match family.kind {
        CopulaKind::Independence => 0.0,
        CopulaKind::StudentT => {
            let nu = params.df.unwrap_or(f64::NAN);
            // Jacobian d nu / d log nu = nu
            LN_HALF + df_log_prior_density(nu, prior.df_prior) + nu.ln()
        }
        _ => LN_HALF,
    }
}

fn pair_param_log_prior(prior: &PriorConfig, c: &PairCopula) -> f64 {
    param_log_prior(prior, c.family, &c.params)
}

fn pair_log_prior(prior: &PriorConfig, c: &PairCopula) -> f64 {
    -prior.lambda * c.family.param_count() as f64 + pair_param_log_prior(prior, c)
}

/// Log prior of one level's model and parameters up to the constant tree
/// term -log |STP_k| (uniform over admissible trees).
pub fn log_prior(prior: &PriorConfig, stp_log_count: f64, pairs: &[PairCopula]) -> f64 {
    -stp_log_count + pairs.iter().map(|c| pair_log_prior(prior, c)).sum::<f64>()
}

// ---------------------------------------------------------------------------
// q_N and truncated-normal proposal helpers
// ---------------------------------------------------------------------------

/// Probability masses of the update-count proposal q_N over {1..num_edges}.
pub fn qn_masses(num_edges: usize, shape: f64) -> Vec<f64> {
    assert!(num_edges >= 1);
    let m = num_edges as f64;
    let em = (-shape).exp();
    let raw: Vec<f64> = (1..=num_edges)
        .map(|k| {
            let frac = (1.0 - em) / (m * em + k as f64 * (1.0 - em));
            ((1.0 - frac).ln() / shape).abs()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

fn sample_discrete<R: Rng + ?Sized>(rng: &mut R, masses: &[f64]) -> usize {
    let mut roll = rng.gen::<f64>();
    for (i, &m) in masses.iter().enumerate() {
        roll -= m;
        if roll <= 0.0 {
            return i;
        }
    }
    masses.len() - 1
}

/// Draws N ~ q_N on {1..num_edges}.
pub fn draw_qn<R: Rng + ?Sized>(rng: &mut R, num_edges: usize, shape: f64) -> usize {
    sample_discrete(rng, &qn_masses(num_edges, shape)) + 1
}

/// Uniform size-n subset of {0..m-1}, sorted.
fn sample_subset<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    for i in 0..n {
        let j = rng.gen_range(i..m);
        idx.swap(i, j);
    }
    idx.truncate(n);
    idx.sort_unstable();
    idx
}

/// Inverse-cdf draw from a normal truncated to (lo, hi).
pub fn trunc_norm_sample<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let a = norm_cdf((lo - mu) / sigma);
    let b = norm_cdf((hi - mu) / sigma);
    let u = (a + rng.gen::<f64>() * (b - a)).clamp(1e-15, 1.0 - 1e-15);
    (mu + sigma * norm_quantile(u)).clamp(lo + 1e-12, hi - 1e-12)
}

/// Log-density of a normal truncated to (lo, hi).
pub fn trunc_norm_ln_pdf(x: f64, mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if x < lo || x > hi {
        return f64::NEG_INFINITY;
    }
    let z = norm_cdf((hi - mu) / sigma) - norm_cdf((lo - mu) / sigma);
    let s = (x - mu) / sigma;
    -0.5 * s * s - 0.5 * LN_2PI - sigma.ln() - z.ln()
}

fn trunc_norm_ln_z(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    (norm_cdf((hi - mu) / sigma) - norm_cdf((lo - mu) / sigma)).ln()
}

// ---------------------------------------------------------------------------
// Plug-in fits and family proposals
// ---------------------------------------------------------------------------

fn default_plugin_params(family: FamilyTag) -> PairParams {
    match family.kind {
        CopulaKind::Independence => PairParams::empty(),
        CopulaKind::StudentT => PairParams::with_df(0.0, (ln30() / 2.0).exp()),
        _ => PairParams::tau_only(0.0),
    }
}

/// Proposal-center fit: Kendall's tau inversion on the full rows; the
/// Student's t degrees of freedom are profiled on a coarse integer grid
/// (step 2) over the subsample and refined around the coarse argmax.
fn proposal_fit(family: FamilyTag, rows: &[(f64, f64)], sub: &[(f64, f64)]) -> Result<PairParams> {
    if rows.len() < 10 {
        return Err(Error::Estimation(format!(
            "need at least 10 rows to fit, got {}",
            rows.len()
        )));
    }
    let xs: Vec<f64> = rows.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = rows.iter().map(|p| p.1).collect();
    let tau = crate::stats::kendall_tau(&xs, &ys);
    if !tau.is_finite() {
        return Err(Error::Estimation(
            "degenerate data: sample Kendall's tau undefined".into(),
        ));
    }
    let tau = tau.clamp(-crate::pair::TAU_CAP, crate::pair::TAU_CAP);
    if family.kind != CopulaKind::StudentT {
        return Ok(PairParams::tau_only(tau));
    }
    let mut best = (f64::NEG_INFINITY, 10.0);
    let mut eval = |nu: f64, best: &mut (f64, f64)| -> Result<()> {
        let c = PairCopula::new(FamilyTag::STUDENT_T, PairParams::with_df(tau, nu))?;
        let ll = pair_loglik(&c, sub)?;
        if ll > best.0 {
            *best = (ll, nu);
        }
        Ok(())
    };
    for nu in (2u32..=30).step_by(2) {
        eval(nu as f64, &mut best)?;
    }
    let center = best.1;
    for nu in [center - 1.0, center + 1.0] {
        if (2.0..=30.0).contains(&nu) {
            eval(nu, &mut best)?;
        }
    }
    Ok(PairParams::with_df(tau, best.1))
}

fn ll_arrays(c: &PairCopula, arrays: &(Vec<f64>, Vec<f64>)) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..arrays.0.len() {
        total += pair_ln_density(c, arrays.0[i], arrays.1[i])?;
    }
    Ok(total)
}

#[derive(Clone)]
struct CandFit {
    family: FamilyTag,
    params: PairParams,
    plug_ll: f64,
}

/// Floored, normalized log-probabilities from log-likelihood weights.
fn floored_log_probs(lls: &[f64], floor: f64) -> Vec<f64> {
    let lmax = lls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lfloor = lmax + floor.ln();
    let lw: Vec<f64> = lls.iter().map(|&l| l.max(lfloor)).collect();
    let lse = lmax + lw.iter().map(|&l| (l - lmax).exp()).sum::<f64>().ln();
    lw.iter().map(|&l| l - lse).collect()
}

/// Draw parameters from the parameter prior in the (tau, log nu) space.
fn sample_param_prior<R: Rng + ?Sized>(
    rng: &mut R,
    family: FamilyTag,
    prior: &PriorConfig,
) -> PairParams {
    let tau = (rng.gen::<f64>() * 2.0 - 1.0).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
    let df = if family.kind == CopulaKind::StudentT {
        let x = match prior.df_prior {
            DfPrior::FlatLogNu => rng.gen::<f64>() * ln30(),
            DfPrior::LogNu => {
                // rejection from uniform against the x*e^x density shape
                let cap = ln30() * 30.0;
                loop {
                    let x = rng.gen::<f64>() * ln30();
                    if rng.gen::<f64>() * cap <= x * x.exp() {
                        break x;
                    }
                }
            }
        };
        Some(x.exp().clamp(1.0 + 1e-9, 30.0))
    } else {
        None
    };
    PairParams { tau, df }
}

fn theta_trunc_ln_pdf(
    family: FamilyTag,
    center: &PairParams,
    value: &PairParams,
    tuning: &TuningParams,
) -> f64 {
    let mut lnp = trunc_norm_ln_pdf(value.tau, center.tau, tuning.sigma_tau, -1.0, 1.0);
    if family.kind == CopulaKind::StudentT {
        let x0 = center.df.expect("t center has df").ln();
        let x = value.df.expect("t value has df").ln();
        lnp += trunc_norm_ln_pdf(x, x0, tuning.sigma_lognu, 0.0, ln30());
    }
    lnp
}

/// Log proposal density of `value` under the prior-mixture proposal centered
/// at the plug-in estimate (reverse-move term).
fn theta_ln_phi(
    family: FamilyTag,
    center: &PairParams,
    value: &PairParams,
    tuning: &TuningParams,
    prior: &PriorConfig,
) -> f64 {
    if family.kind == CopulaKind::Independence {
        return 0.0;
    }
    let ln_rw = theta_trunc_ln_pdf(family, center, value, tuning);
    if tuning.prior_mix == 0.0 {
        return ln_rw;
    }
    let ln_pr = param_log_prior(prior, family, value) + tuning.prior_mix.ln();
    let ln_rw = ln_rw + (1.0 - tuning.prior_mix).ln();
    // log-sum-exp of the two mixture components
    let m = ln_pr.max(ln_rw);
    m + ((ln_pr - m).exp() + (ln_rw - m).exp()).ln()
}

/// Draws proposal parameters from the prior-mixture proposal around a
/// plug-in center; returns the proposal and its log proposal density.
fn draw_theta<R: Rng + ?Sized>(
    rng: &mut R,
    family: FamilyTag,
    center: &PairParams,
    tuning: &TuningParams,
    prior: &PriorConfig,
) -> (PairParams, f64) {
    if family.kind == CopulaKind::Independence {
        return (PairParams::empty(), 0.0);
    }
    let value = if rng.gen::<f64>() < tuning.prior_mix {
        sample_param_prior(rng, family, prior)
    } else {
        let tau = trunc_norm_sample(rng, center.tau, tuning.sigma_tau, -1.0, 1.0);
        let df = if family.kind == CopulaKind::StudentT {
            let x0 = center.df.expect("t center has df").ln();
            Some(trunc_norm_sample(rng, x0, tuning.sigma_lognu, 0.0, ln30()).exp())
        } else {
            None
        };
        PairParams { tau, df }
    };
    let lnp = theta_ln_phi(family, center, &value, tuning, prior);
    (value, lnp)
}

// ---------------------------------------------------------------------------
// Chain state
// ---------------------------------------------------------------------------

/// Audit record of one between-models proposal: the acceptance ratio and its
/// three factors, with a snapshot of the proposed state for independent
/// recomputation.
#[derive(Debug, Clone)]
pub struct MoveAudit {
    pub kind: char,
    pub ln_alpha: f64,
    pub ln_l_ratio: f64,
    pub ln_prior_ratio: f64,
    pub ln_q_ratio: f64,
    pub accepted: bool,
    pub proposal_tree: Vec<(usize, usize)>,
    pub proposal_pairs: Vec<PairCopula>,
}

struct LevelChain<'a> {
    k: usize,
    data: &'a [Vec<f64>],
    candidates: Vec<FamilyTag>,
    trees: Vec<Vec<(usize, usize)>>,
    pairs: Vec<Vec<PairCopula>>,
    sets: Vec<Vec<EdgeSets>>,
    arrays: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
    ll: Vec<Vec<f64>>,
    stp_graph: AllowedGraph,
    stp_single: bool,
    version: u64,
    fit_cache: HashMap<(usize, usize, &'static str, u64), (PairParams, f64)>,
    cand_cache: HashMap<(usize, usize, u64), (EdgeSets, (Vec<f64>, Vec<f64>))>,
    last_audit: Option<MoveAudit>,
    keep_audit: bool,
}

impl<'a> LevelChain<'a> {
    fn new(
        d: usize,
        data: &'a [Vec<f64>],
        lower: &[(Vec<(usize, usize)>, Vec<PairCopula>)],
        candidates: &[FamilyTag],
    ) -> Result<LevelChain<'a>> {
        let k = lower.len() + 1;
        if k > d - 1 {
            return Err(Error::Config(format!("level {k} exceeds d-1 = {}", d - 1)));
        }
        let stp_graph = if k == 1 {
            AllowedGraph::complete(d)
        } else {
            AllowedGraph::from_tree(&lower[k - 2].0)
        };
        let stp_single = count_spanning_trees(&stp_graph) == BigInt::from(1u32);
        let mut chain = LevelChain {
            k,
            data,
            candidates: candidates.to_vec(),
            trees: Vec::new(),
            pairs: Vec::new(),
            sets: Vec::new(),
            arrays: Vec::new(),
            ll: Vec::new(),
            stp_graph,
            stp_single,
            version: 0,
            fit_cache: HashMap::new(),
            cand_cache: HashMap::new(),
            last_audit: None,
            keep_audit: false,
        };
        for (tree, pairs) in lower {
            chain.push_level(tree.clone(), pairs.clone())?;
        }
        // level-k start: deterministic admissible tree, all-independence
        let init = greedy_spanning_tree(&chain.stp_graph)?;
        let fams = vec![PairCopula::independence(); init.len()];
        chain.push_level(init, fams)?;
        Ok(chain)
    }

    /// Appends one level, computing its edge sets, pseudo-obs arrays and
    /// per-edge log-likelihoods from the level below.
    fn push_level(&mut self, tree: Vec<(usize, usize)>, pairs: Vec<PairCopula>) -> Result<()> {
        let l = self.trees.len();
        let mut sets = Vec::with_capacity(tree.len());
        let mut arrays = Vec::with_capacity(tree.len());
        let mut ll = Vec::with_capacity(tree.len());
        for (idx, &(a, b)) in tree.iter().enumerate() {
            let (s, arr) = self.edge_inputs(l, a, b)?;
            ll.push(ll_arrays(&pairs[idx], &arr)?);
            sets.push(s);
            arrays.push(arr);
        }
        self.trees.push(tree);
        self.pairs.push(pairs);
        self.sets.push(sets);
        self.arrays.push(arrays);
        self.ll.push(ll);
        Ok(())
    }

    /// Edge sets and input arrays of a (possibly off-tree) edge at `level`.
    fn edge_inputs(&self, level: usize, a: usize, b: usize) -> Result<(EdgeSets, (Vec<f64>, Vec<f64>))> {
        if level == 0 {
            let sets = EdgeSets {
                union: vec![a.min(b), a.max(b)],
                cond: vec![],
                ci: a.min(b),
                cj: a.max(b),
            };
            let first: Vec<f64> = self.data.iter().map(|r| r[sets.ci]).collect();
            let second: Vec<f64> = self.data.iter().map(|r| r[sets.cj]).collect();
            Ok((sets, (first, second)))
        } else {
            pseudo_pair_arrays(
                &self.sets[level - 1],
                &self.pairs[level - 1],
                &self.arrays[level - 1],
                a,
                b,
            )
        }
    }

    /// Cached variant of `edge_inputs` for top-level candidate edges.
    fn cached_edge_inputs(&mut self, a: usize, b: usize) -> Result<(EdgeSets, (Vec<f64>, Vec<f64>))> {
        let key = (a.min(b), a.max(b), self.version);
        if let Some(v) = self.cand_cache.get(&key) {
            return Ok(v.clone());
        }
        let v = self.edge_inputs(self.k - 1, a, b)?;
        self.cand_cache.insert(key, v.clone());
        Ok(v)
    }

    /// Plug-in fit (parameters and proposal log-likelihood) of one candidate
    /// family on the given arrays, cached per top-level edge and pseudo-obs
    /// version.
    ///
    /// The proposal likelihood is evaluated on the same deterministic strided
    /// subsample as the degrees-of-freedom grid search and rescaled to the
    /// full sample size. The weighting enters the sampler only through the
    /// family proposal q_B; forward and reverse directions share this cache,
    /// so the acceptance ratio remains exact.
    fn plugin_fit(
        &mut self,
        a: usize,
        b: usize,
        family: FamilyTag,
        arrays: &(Vec<f64>, Vec<f64>),
        tuning: &TuningParams,
    ) -> Result<CandFit> {
        let key = (a.min(b), a.max(b), family.as_str(), self.version);
        if let Some((params, ll)) = self.fit_cache.get(&key) {
            return Ok(CandFit {
                family,
                params: *params,
                plug_ll: *ll,
            });
        }
        let rows: Vec<(f64, f64)> = arrays.0.iter().cloned().zip(arrays.1.iter().cloned()).collect();
        let sub: Vec<(f64, f64)> = match tuning.fit_subsample {
            Some(cap) if rows.len() > cap => {
                let stride = (rows.len() / cap).max(1);
                rows.iter().step_by(stride).cloned().collect()
            }
            _ => rows.clone(),
        };
        let scale = if sub.is_empty() {
            1.0
        } else {
            rows.len() as f64 / sub.len() as f64
        };
        let params = if family.kind == CopulaKind::Independence {
            PairParams::empty()
        } else {
            match proposal_fit(family, &rows, &sub) {
                Ok(p) => p,
                Err(_) => default_plugin_params(family),
            }
        };
        let c = PairCopula::new(family, params)?;
        let ll = scale * pair_loglik(&c, &sub)?;
        self.fit_cache.insert(key, (params, ll));
        Ok(CandFit {
            family,
            params,
            plug_ll: ll,
        })
    }

    fn total_ll(&self) -> f64 {
        self.ll.iter().flatten().sum()
    }

    fn top(&self) -> usize {
        self.k - 1
    }

    fn bump_version(&mut self) {
        self.version += 1;
        self.fit_cache.clear();
        self.cand_cache.clear();
    }

    // -- within-model move ---------------------------------------------------

    /// Single-site Metropolis-Hastings sweep over every parameter of levels
    /// 1..k. Returns the number of accepted updates.
    fn within_sweep<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        prior: &PriorConfig,
        tuning: &TuningParams,
    ) -> Result<usize> {
        let mut accepted = 0;
        for l in 0..self.k {
            for e in 0..self.trees[l].len() {
                let kind = self.pairs[l][e].family.kind;
                if kind == CopulaKind::Independence {
                    continue;
                }
                if self.update_site(rng, prior, tuning, l, e, false)? {
                    accepted += 1;
                }
                if kind == CopulaKind::StudentT && self.update_site(rng, prior, tuning, l, e, true)? {
                    accepted += 1;
                }
            }
        }
        Ok(accepted)
    }

    /// One truncated-normal random-walk update of a single parameter,
    /// cascading pseudo-obs recomputation to the affected edges above.
    fn update_site<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        prior: &PriorConfig,
        tuning: &TuningParams,
        l: usize,
        e: usize,
        df_site: bool,
    ) -> Result<bool> {
        let old_pair = self.pairs[l][e].clone();
        let (cur, sigma, lo, hi) = if df_site {
            (old_pair.params.df.unwrap().ln(), tuning.sigma_lognu, 0.0, ln30())
        } else {
            (old_pair.params.tau, tuning.sigma_tau, -1.0, 1.0)
        };
        let prop = trunc_norm_sample(rng, cur, sigma, lo, hi);
        let new_params = if df_site {
            PairParams {
                tau: old_pair.params.tau,
                df: Some(prop.exp()),
            }
        } else {
            PairParams {
                tau: prop,
                df: old_pair.params.df,
            }
        };
        let new_pair = match PairCopula::new(old_pair.family, new_params) {
            Ok(c) => c,
            Err(_) => return Ok(false),
        };

        // apply in place with an undo log
        let mut undo_arrays: Vec<(usize, usize, (Vec<f64>, Vec<f64>))> = Vec::new();
        let mut undo_ll: Vec<(usize, usize, f64)> = Vec::new();
        let mut delta_ll = 0.0;
        self.pairs[l][e] = new_pair.clone();
        let res = (|chain: &mut LevelChain| -> Result<f64> {
            let nll = ll_arrays(&chain.pairs[l][e], &chain.arrays[l][e])?;
            undo_ll.push((l, e, chain.ll[l][e]));
            delta_ll += nll - chain.ll[l][e];
            chain.ll[l][e] = nll;
            let mut changed = vec![e];
            for j in (l + 1)..chain.k {
                let mut next = Vec::new();
                for (idx, &(a, b)) in chain.trees[j].clone().iter().enumerate() {
                    if changed.contains(&a) || changed.contains(&b) {
                        let (_, arr) = pseudo_pair_arrays(
                            &chain.sets[j - 1],
                            &chain.pairs[j - 1],
                            &chain.arrays[j - 1],
                            a,
                            b,
                        )?;
                        let nll = ll_arrays(&chain.pairs[j][idx], &arr)?;
                        undo_arrays.push((j, idx, std::mem::replace(&mut chain.arrays[j][idx], arr)));
                        undo_ll.push((j, idx, chain.ll[j][idx]));
                        delta_ll += nll - chain.ll[j][idx];
                        chain.ll[j][idx] = nll;
                        next.push(idx);
                    }
                }
                changed = next;
            }
            Ok(delta_ll)
        })(self);

        let delta_ll = match res {
            Ok(v) => v,
            Err(err) => {
                // restore and propagate
                for (j, idx, arr) in undo_arrays.into_iter().rev() {
                    self.arrays[j][idx] = arr;
                }
                for (j, idx, v) in undo_ll.into_iter().rev() {
                    self.ll[j][idx] = v;
                }
                self.pairs[l][e] = old_pair;
                return Err(err);
            }
        };

        let d_prior = pair_param_log_prior(prior, &new_pair) - pair_param_log_prior(prior, &old_pair);
        // asymmetric truncation normalizers of the random walk
        let d_prop = trunc_norm_ln_z(cur, sigma, lo, hi) - trunc_norm_ln_z(prop, sigma, lo, hi);
        let ln_alpha = delta_ll + d_prior + d_prop;
        if ln_alpha >= 0.0 || rng.gen::<f64>().ln() < ln_alpha {
            if l + 1 < self.k && !undo_arrays.is_empty() {
                self.bump_version();
            }
            Ok(true)
        } else {
            for (j, idx, arr) in undo_arrays.into_iter().rev() {
                self.arrays[j][idx] = arr;
            }
            for (j, idx, v) in undo_ll.into_iter().rev() {
                self.ll[j][idx] = v;
            }
            self.pairs[l][e] = old_pair;
            Ok(false)
        }
    }

    // -- between-models move on families (tree fixed) ------------------------

    fn family_move<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        prior: &PriorConfig,
        tuning: &TuningParams,
    ) -> Result<bool> {
        let top = self.top();
        let m = self.trees[top].len();
        let n_upd = draw_qn(rng, m, tuning.qn_shape);
        let selected = sample_subset(rng, m, n_upd);

        let mut ln_q = 0.0;
        let mut ln_prior_delta = 0.0;
        let mut delta_ll = 0.0;
        let mut proposals: Vec<(usize, PairCopula, f64)> = Vec::with_capacity(n_upd);
        for &e in &selected {
            let (a, b) = self.trees[top][e];
            let arrays = self.arrays[top][e].clone();
            let mut fits = Vec::with_capacity(self.candidates.len());
            for &fam in &self.candidates.clone() {
                fits.push(self.plugin_fit(a, b, fam, &arrays, tuning)?);
            }
            let cur_tag = self.pairs[top][e].family;
            // forward: candidates excluding the current family
            let fwd: Vec<&CandFit> = fits.iter().filter(|f| f.family != cur_tag).collect();
            if fwd.is_empty() {
                return Ok(false);
            }
            let lp_fwd = floored_log_probs(
                &fwd.iter().map(|f| f.plug_ll).collect::<Vec<_>>(),
                tuning.proposal_floor,
            );
            let pick = sample_discrete(rng, &lp_fwd.iter().map(|l| l.exp()).collect::<Vec<_>>());
            let star = fwd[pick].clone();
            let (theta_star, ln_phi_fwd) = draw_theta(rng, star.family, &star.params, tuning, prior);
            ln_q -= lp_fwd[pick] + ln_phi_fwd;
            // reverse: candidates excluding the proposed family
            let rev: Vec<&CandFit> = fits.iter().filter(|f| f.family != star.family).collect();
            let lp_rev = floored_log_probs(
                &rev.iter().map(|f| f.plug_ll).collect::<Vec<_>>(),
                tuning.proposal_floor,
            );
            let pos_cur = rev
                .iter()
                .position(|f| f.family == cur_tag)
                .expect("current family among reverse candidates");
            let cur_center = &rev[pos_cur].params.clone();
            let ln_phi_rev = theta_ln_phi(cur_tag, cur_center, &self.pairs[top][e].params, tuning, prior);
            ln_q += lp_rev[pos_cur] + ln_phi_rev;

            let new_pair = match PairCopula::new(star.family, theta_star) {
                Ok(c) => c,
                Err(_) => return Ok(false),
            };
            ln_prior_delta += pair_log_prior(prior, &new_pair) - pair_log_prior(prior, &self.pairs[top][e]);
            let nll = ll_arrays(&new_pair, &self.arrays[top][e])?;
            delta_ll += nll - self.ll[top][e];
            proposals.push((e, new_pair, nll));
        }

        let ln_alpha = delta_ll + ln_prior_delta + ln_q;
        let accepted = ln_alpha >= 0.0 || rng.gen::<f64>().ln() < ln_alpha;
        if self.keep_audit {
            let mut pp = self.pairs[top].clone();
            for (e, c, _) in &proposals {
                pp[*e] = c.clone();
            }
            self.last_audit = Some(MoveAudit {
                kind: 'F',
                ln_alpha,
                ln_l_ratio: delta_ll,
                ln_prior_ratio: ln_prior_delta,
                ln_q_ratio: ln_q,
                accepted,
                proposal_tree: self.trees[top].clone(),
                proposal_pairs: pp,
            });
        }
        if accepted {
            for (e, c, nll) in proposals {
                self.pairs[top][e] = c;
                self.ll[top][e] = nll;
            }
        }
        Ok(accepted)
    }

    // -- between-models move on the tree and families jointly ----------------

    fn tree_move<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        prior: &PriorConfig,
        tuning: &TuningParams,
    ) -> Result<bool> {
        let top = self.top();
        if self.stp_single {
            return Ok(false);
        }
        let cur_tree = self.trees[top].clone();
        let mut t_star = sample_tree_excluding(&self.stp_graph, &cur_tree, tuning.p_tree, rng)?;
        t_star.sort_unstable();

        let mut ln_q_fwd = 0.0;
        let mut ln_q_rev = 0.0;
        let mut prior_new = 0.0;
        let mut prior_old = 0.0;
        let mut ll_new_total = 0.0;
        let mut new_pairs = Vec::with_capacity(t_star.len());
        let mut new_sets = Vec::with_capacity(t_star.len());
        let mut new_arrays = Vec::with_capacity(t_star.len());
        let mut new_lls = Vec::with_capacity(t_star.len());
        for &(a, b) in &t_star {
            let (sets, arrays) = self.cached_edge_inputs(a, b)?;
            let mut fits = Vec::with_capacity(self.candidates.len());
            for &fam in &self.candidates.clone() {
                fits.push(self.plugin_fit(a, b, fam, &arrays, tuning)?);
            }
            let lp = floored_log_probs(
                &fits.iter().map(|f| f.plug_ll).collect::<Vec<_>>(),
                tuning.proposal_floor,
            );
            let pick = sample_discrete(rng, &lp.iter().map(|l| l.exp()).collect::<Vec<_>>());
            let star = fits[pick].clone();
            let (theta_star, ln_phi) = draw_theta(rng, star.family, &star.params, tuning, prior);
            ln_q_fwd += lp[pick] + ln_phi;
            let new_pair = match PairCopula::new(star.family, theta_star) {
                Ok(c) => c,
                Err(_) => return Ok(false),
            };
            prior_new += pair_log_prior(prior, &new_pair);
            let nll = ll_arrays(&new_pair, &arrays)?;
            ll_new_total += nll;
            new_pairs.push(new_pair);
            new_sets.push(sets);
            new_arrays.push(arrays);
            new_lls.push(nll);
        }
        // reverse proposal terms over the current tree's edges
        for e in 0..cur_tree.len() {
            let (a, b) = cur_tree[e];
            let arrays = self.arrays[top][e].clone();
            let mut fits = Vec::with_capacity(self.candidates.len());
            for &fam in &self.candidates.clone() {
                fits.push(self.plugin_fit(a, b, fam, &arrays, tuning)?);
            }
            let lp = floored_log_probs(
                &fits.iter().map(|f| f.plug_ll).collect::<Vec<_>>(),
                tuning.proposal_floor,
            );
            let cur_tag = self.pairs[top][e].family;
            let pos = fits
                .iter()
                .position(|f| f.family == cur_tag)
                .expect("current family among candidates");
            let ln_phi = theta_ln_phi(cur_tag, &fits[pos].params, &self.pairs[top][e].params, tuning, prior);
            ln_q_rev += lp[pos] + ln_phi;
            prior_old += pair_log_prior(prior, &self.pairs[top][e]);
        }

        let delta_ll = ll_new_total - self.ll[top].iter().sum::<f64>();
        let mut ln_q = ln_q_rev - ln_q_fwd;
        if !tuning.paper_cancellation {
            // exact correction: the q_T normalizers around the two centers
            ln_q += qt_lognormalizer(&self.stp_graph, &cur_tree, tuning.p_tree)?
                - qt_lognormalizer(&self.stp_graph, &t_star, tuning.p_tree)?;
        }
        let ln_prior_delta = prior_new - prior_old;
        let ln_alpha = delta_ll + ln_prior_delta + ln_q;
        let accepted = ln_alpha >= 0.0 || rng.gen::<f64>().ln() < ln_alpha;
        if self.keep_audit {
            self.last_audit = Some(MoveAudit {
                kind: 'T',
                ln_alpha,
                ln_l_ratio: delta_ll,
                ln_prior_ratio: ln_prior_delta,
                ln_q_ratio: ln_q,
                accepted,
                proposal_tree: t_star.clone(),
                proposal_pairs: new_pairs.clone(),
            });
        }
        if accepted {
            self.trees[top] = t_star;
            self.pairs[top] = new_pairs;
            self.sets[top] = new_sets;
            self.arrays[top] = new_arrays;
            self.ll[top] = new_lls;
        }
        Ok(accepted)
    }
}

/// Deterministic admissible starting tree: lexicographic greedy Kruskal.
fn greedy_spanning_tree(g: &AllowedGraph) -> Result<Vec<(usize, usize)>> {
    let mut parent: Vec<usize> = (0..g.n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut edges: Vec<(usize, usize)> = g.edges.clone();
    edges.sort_unstable();
    let mut tree = Vec::with_capacity(g.n - 1);
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            tree.push((a, b));
        }
    }
    if tree.len() != g.n - 1 {
        return Err(Error::Structure("admissible graph is disconnected".into()));
    }
    tree.sort_unstable();
    Ok(tree)
}

// ---------------------------------------------------------------------------
// Traces, mode extraction, level driver
// ---------------------------------------------------------------------------

/// One per-iteration trace record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub level: usize,
    pub model_hash: u64,
    pub loglik: f64,
    pub accepted_move: char,
}

/// Sampled-model registry entry: one distinct (T_k, B_k) label.
#[derive(Debug, Clone)]
pub struct ModelInfo {
    pub label: String,
    pub canonical: String,
    pub tree: Vec<(usize, usize)>,
    pub families: Vec<FamilyTag>,
    pub count_post_burnin: usize,
    pub first_iter: usize,
}

/// Full per-level sampler history, the input to `posterior_mode`.
#[derive(Debug, Clone)]
pub struct LevelHistory {
    pub level: usize,
    pub models: Vec<ModelInfo>,
    /// Per iteration: model index, level-1..k parameter snapshots, loglik,
    /// accepted between-move tag.
    pub iters: Vec<(usize, Vec<Vec<PairParams>>, f64, char)>,
    pub burn_in: usize,
}

/// Posterior-mode estimate of one level.
#[derive(Debug, Clone)]
pub struct LevelEstimate {
    pub tree: Vec<(usize, usize)>,
    pub pairs: Vec<PairCopula>,
    /// Conditional posterior means of the lower levels' parameters.
    pub lower_params: Vec<Vec<PairParams>>,
    pub mode_frequency: f64,
    pub mode_label: String,
}

/// Canonical label of a level state: sorted tree edges plus the per-edge
/// family names, e.g. `T[0-1,0-2]|N,I`.
pub fn model_label(tree: &[(usize, usize)], fams: &[FamilyTag]) -> String {
    let t: Vec<String> = tree.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    let f: Vec<&str> = fams.iter().map(|x| x.as_str()).collect();
    format!("T[{}]|{}", t.join(","), f.join(","))
}

fn hash_label(label: &str) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    label.hash(&mut h);
    h.finish()
}

fn gaussian_like(fams: &[FamilyTag]) -> bool {
    fams.iter()
        .all(|f| matches!(f.kind, CopulaKind::Gaussian | CopulaKind::Independence))
}

/// Empirical mode over post-burn-in (T_k, B_k) labels with Gaussian-state
/// collapse; parameter estimates are conditional posterior means over the
/// modal model's iterations.
pub fn posterior_mode(history: &LevelHistory) -> Result<LevelEstimate> {
    let post: Vec<&(usize, Vec<Vec<PairParams>>, f64, char)> = history
        .iters
        .iter()
        .skip(history.burn_in)
        .collect();
    if post.is_empty() {
        return Err(Error::Estimation("empty post-burn-in trace".into()));
    }
    // canonical counts, ties broken by first occurrence
    let mut canon_counts: Vec<(String, usize, usize)> = Vec::new();
    for (mi, m) in history.models.iter().enumerate() {
        let cnt = post.iter().filter(|(i, _, _, _)| *i == mi).count();
        if cnt == 0 {
            continue;
        }
        match canon_counts.iter_mut().find(|(c, _, _)| *c == m.canonical) {
            Some(entry) => entry.1 += cnt,
            None => canon_counts.push((m.canonical.clone(), cnt, m.first_iter)),
        }
    }
    let best_canon = canon_counts
        .iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .expect("nonempty model table")
        .clone();
    // concrete representative: most-visited label within the canonical class
    let rep = history
        .models
        .iter()
        .enumerate()
        .filter(|(_, m)| m.canonical == best_canon.0)
        .max_by(|a, b| {
            let ca = post.iter().filter(|(i, _, _, _)| *i == a.0).count();
            let cb = post.iter().filter(|(i, _, _, _)| *i == b.0).count();
            ca.cmp(&cb).then(b.1.first_iter.cmp(&a.1.first_iter))
        })
        .expect("canonical class nonempty");
    let (rep_idx, rep_info) = rep;
    let modal: Vec<&&(usize, Vec<Vec<PairParams>>, f64, char)> =
        post.iter().filter(|(i, _, _, _)| *i == rep_idx).collect();
    let k = modal[0].1.len();
    let mut means: Vec<Vec<PairParams>> = Vec::with_capacity(k);
    for l in 0..k {
        let edges = modal[0].1[l].len();
        let mut level = Vec::with_capacity(edges);
        for e in 0..edges {
            let taus: Vec<f64> = modal.iter().map(|r| r.1[l][e].tau).collect();
            let tau = taus.iter().sum::<f64>() / taus.len() as f64;
            let df = if modal[0].1[l][e].df.is_some() {
                let dfs: Vec<f64> = modal.iter().filter_map(|r| r.1[l][e].df).collect();
                Some(dfs.iter().sum::<f64>() / dfs.len() as f64)
            } else {
                None
            };
            level.push(PairParams { tau, df });
        }
        means.push(level);
    }
    let top = k - 1;
    let pairs: Vec<PairCopula> = rep_info
        .families
        .iter()
        .zip(&means[top])
        .map(|(&f, &p)| PairCopula::new(f, p))
        .collect::<Result<_>>()?;
    Ok(LevelEstimate {
        tree: rep_info.tree.clone(),
        pairs,
        lower_params: means[..top].to_vec(),
        mode_frequency: best_canon.1 as f64 / post.len() as f64,
        mode_label: best_canon.0,
    })
}

/// Marginal posterior-mode tree of a level run: post-burn-in visit counts
/// summed over all family vectors sharing a tree; ties broken by first
/// occurrence.
pub fn marginal_modal_tree(history: &LevelHistory) -> Vec<(usize, usize)> {
    let mut counts: Vec<(Vec<(usize, usize)>, usize, usize)> = Vec::new();
    for m in &history.models {
        if m.count_post_burnin == 0 {
            continue;
        }
        match counts.iter_mut().find(|(t, _, _)| *t == m.tree) {
            Some(e) => e.1 += m.count_post_burnin,
            None => counts.push((m.tree.clone(), m.count_post_burnin, m.first_iter)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .map(|(t, _, _)| t)
        .unwrap_or_default()
}

/// Output of one level run: the mode estimate, the model-frequency table,
/// the per-iteration trace, and the raw history.
pub struct LevelRun {
    pub level: usize,
    pub estimate: LevelEstimate,
    pub model_table: Vec<(String, usize)>,
    pub trace: Vec<TraceRecord>,
    pub history: LevelHistory,
}

/// Runs the level-k chain with the lower levels fixed.
pub fn run_level<R: Rng + ?Sized>(
    d: usize,
    data: &[Vec<f64>],
    lower: &[(Vec<(usize, usize)>, Vec<PairCopula>)],
    candidates: &[FamilyTag],
    prior: &PriorConfig,
    tuning: &TuningParams,
    rng: &mut R,
) -> Result<LevelRun> {
    tuning.validate()?;
    if candidates.len() < 2 {
        return Err(Error::Config("need at least two candidate families".into()));
    }
    let mut chain = LevelChain::new(d, data, lower, candidates)?;
    let k = chain.k;
    let top = chain.top();
    let lower_gaussian = chain.pairs[..top].iter().all(|lvl| {
        gaussian_like(&lvl.iter().map(|c| c.family).collect::<Vec<_>>())
    });

    let mut models: Vec<ModelInfo> = Vec::new();
    let mut model_index: HashMap<String, usize> = HashMap::new();
    let mut iters = Vec::with_capacity(tuning.iterations);
    for r in 0..tuning.iterations {
        chain.within_sweep(rng, prior, tuning)?;
        let use_tree = !chain.stp_single && rng.gen_bool(0.5);
        let accepted = if use_tree {
            chain.tree_move(rng, prior, tuning)?
        } else {
            chain.family_move(rng, prior, tuning)?
        };
        let tag = if !accepted {
            '-'
        } else if use_tree {
            'T'
        } else {
            'F'
        };
        let fams: Vec<FamilyTag> = chain.pairs[top].iter().map(|c| c.family).collect();
        let label = model_label(&chain.trees[top], &fams);
        let mi = match model_index.get(&label) {
            Some(&i) => i,
            None => {
                let canonical = if lower_gaussian && gaussian_like(&fams) {
                    "GAUSS".to_string()
                } else {
                    label.clone()
                };
                models.push(ModelInfo {
                    label: label.clone(),
                    canonical,
                    tree: chain.trees[top].clone(),
                    families: fams,
                    count_post_burnin: 0,
                    first_iter: r,
                });
                model_index.insert(label, models.len() - 1);
                models.len() - 1
            }
        };
        if r >= tuning.burn_in {
            models[mi].count_post_burnin += 1;
        }
        let params: Vec<Vec<PairParams>> = chain.pairs.iter()
            .map(|lvl| lvl.iter().map(|c| c.params).collect())
            .collect();
        iters.push((mi, params, chain.total_ll(), tag));
    }

    let history = LevelHistory {
        level: k,
        models,
        iters,
        burn_in: tuning.burn_in,
    };
    let estimate = posterior_mode(&history)?;
    let mut model_table: Vec<(String, usize)> = history
        .models
        .iter()
        .filter(|m| m.count_post_burnin > 0)
        .map(|m| (m.label.clone(), m.count_post_burnin))
        .collect();
    model_table.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let trace: Vec<TraceRecord> = history
        .iters
        .iter()
        .enumerate()
        .map(|(i, (mi, _, ll, tag))| TraceRecord {
            iter: i,
            level: k,
            model_hash: hash_label(&history.models[*mi].label),
            loglik: *ll,
            accepted_move: *tag,
        })
        .collect();
    Ok(LevelRun {
        level: k,
        estimate,
        model_table,
        trace,
        history,
    })
}

/// Output of the full tree-by-tree selection.
pub struct SelectionOutput {
    pub model: VineCopula,
    pub levels: Vec<LevelRun>,
}

/// Sequential Bayesian selection: runs the level chains for k = 1..d-1,
/// threading the empirical-mode estimates and refreshed lower-level
/// parameter means downward.
pub fn select_vine<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    d: usize,
    candidates: &[FamilyTag],
    prior: &PriorConfig,
    tuning: &TuningParams,
    rng: &mut R,
) -> Result<SelectionOutput> {
    if d < 2 {
        return Err(Error::Config(format!("dimension {d} too small")));
    }
    let mut lower: Vec<(Vec<(usize, usize)>, Vec<PairCopula>)> = Vec::new();
    let mut runs = Vec::new();
    for _k in 1..d {
        let run = run_level(d, data, &lower, candidates, prior, tuning, rng)?;
        // refresh lower-level parameters with the conditional posterior means
        for (l, params) in run.estimate.lower_params.iter().enumerate() {
            for (e, &p) in params.iter().enumerate() {
                lower[l].1[e] = PairCopula::new(lower[l].1[e].family, p)?;
            }
        }
        lower.push((run.estimate.tree.clone(), run.estimate.pairs.clone()));
        runs.push(run);
    }
    let trees: Vec<Vec<(usize, usize)>> = lower.iter().map(|(t, _)| t.clone()).collect();
    let pairs: Vec<Vec<PairCopula>> = lower.iter().map(|(_, p)| p.clone()).collect();
    let model = VineCopula::new(VineStructure::new(d, trees), pairs, d - 1)?;
    Ok(SelectionOutput {
        model,
        levels: runs,
    })
}

/// Runs `iterations` between-model proposals with audit retention on a fresh
/// level chain and returns the audit records alongside fresh, cache-free
/// recomputations of each proposal's level log-likelihood delta.
pub fn audit_moves<R: Rng + ?Sized>(
    d: usize,
    data: &[Vec<f64>],
    lower: &[(Vec<(usize, usize)>, Vec<PairCopula>)],
    candidates: &[FamilyTag],
    prior: &PriorConfig,
    tuning: &TuningParams,
    iterations: usize,
    rng: &mut R,
) -> Result<Vec<(MoveAudit, f64)>> {
    let mut chain = LevelChain::new(d, data, lower, candidates)?;
    chain.keep_audit = true;
    let mut out = Vec::new();
    let top = chain.top();
    for _ in 0..iterations {
        chain.within_sweep(rng, prior, tuning)?;
        let cur_tree = chain.trees[top].clone();
        let cur_pairs = chain.pairs[top].clone();
        let use_tree = !chain.stp_single && rng.gen_bool(0.5);
        chain.last_audit = None;
        if use_tree {
            chain.tree_move(rng, prior, tuning)?;
        } else {
            chain.family_move(rng, prior, tuning)?;
        }
        if let Some(audit) = chain.last_audit.take() {
            // from-scratch recomputation of the level likelihood on a probe
            // chain carrying the live lower-level parameters
            let lower_live: Vec<(Vec<(usize, usize)>, Vec<PairCopula>)> = (0..top)
                .map(|l| (chain.trees[l].clone(), chain.pairs[l].clone()))
                .collect();
            let fresh_on = |tree: &Vec<(usize, usize)>, pairs: &Vec<PairCopula>| -> Result<f64> {
                let probe = LevelChain::new(d, data, &lower_live, candidates)?;
                let mut total = 0.0;
                for (idx, &(a, b)) in tree.iter().enumerate() {
                    let (_, arr) = probe.edge_inputs(top, a, b)?;
                    total += ll_arrays(&pairs[idx], &arr)?;
                }
                Ok(total)
            };
            let fresh_delta =
                fresh_on(&audit.proposal_tree, &audit.proposal_pairs)? - fresh_on(&cur_tree, &cur_pairs)?;
            out.push((audit, fresh_delta));
        }
    }
    Ok(out)
}
