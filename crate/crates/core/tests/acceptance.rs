//! Acceptance suite: ten end-to-end criteria, one printed PASS/FAIL line
//! each. Heavier MCMC criteria run at desk scale with seeded replications.

use bayesvine::baselines::{gaussian_copula_loglik, scenario};
use bayesvine::dlm::{self, DLMConfig, DLMPrior, ForecastDist};
use bayesvine::io::{replicate_study, seed_stream, write_selection_outputs, RunConfig, StudyOutput};
use bayesvine::pair::{
    hfunc, hinv, pair_density, CondArg, FamilyTag, PairCopula, PairParams,
};
use bayesvine::portfolio::{
    self, joint_forecast, optimize_weights, sharpe_estimate, var_quantile, BacktestConfig, Bounds,
    ForecastPanel,
};
use bayesvine::quad::composite_gauss_legendre;
use bayesvine::rjmcmc::{
    model_label, qn_masses, run_level, select_vine, DfPrior, PriorConfig, TuningParams,
};
use bayesvine::stats::{kendall_tau, ks_uniform_pvalue};
use bayesvine::tree_space::{
    count_spanning_trees, enumerate_spanning_trees, enumerate_vines, AllowedGraph,
};
use bayesvine::vine::{VineCopula, VineStructure};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;

fn fam(s: &str) -> FamilyTag {
    FamilyTag::parse(s).unwrap()
}

fn report(criterion: usize, name: &str, pass: bool, details: &str) {
    println!(
        "ACCEPTANCE {criterion} {name}: {} ({details})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {details}");
}

#[test]
fn criterion_01_prior_recovery() {
    let start = std::time::Instant::now();
    let d = 3;
    let data: Vec<Vec<f64>> = Vec::new();
    let candidates = vec![fam("I"), fam("N"), fam("C")];
    let prior = PriorConfig {
        lambda: 1.0,
        df_prior: DfPrior::LogNu,
    };
    let tuning = TuningParams {
        iterations: 100_000,
        burn_in: 5_000,
        prior_mix: 0.5,
        ..TuningParams::default()
    };
    let mut rng = ChaCha12Rng::seed_from_u64(73);
    let run = run_level(d, &data, &[], &candidates, &prior, &tuning, &mut rng).unwrap();

    // exact prior: uniform over spanning trees, exp(-lambda * params) per
    // family, parameter priors integrate to one
    let trees = enumerate_spanning_trees(&AllowedGraph::complete(3));
    let mut exact: HashMap<String, f64> = HashMap::new();
    let mut z = 0.0;
    for t in &trees {
        for f1 in &candidates {
            for f2 in &candidates {
                let w =
                    (-(prior.lambda) * (f1.param_count() + f2.param_count()) as f64).exp();
                exact.insert(model_label(t, &[*f1, *f2]), w);
                z += w;
            }
        }
    }
    let total: usize = run.model_table.iter().map(|(_, c)| c).sum();
    let mut tv = 0.0;
    for (label, w) in &exact {
        let emp = run
            .model_table
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, c)| *c as f64 / total as f64)
            .unwrap_or(0.0);
        tv += (emp - w / z).abs();
    }
    for (label, c) in &run.model_table {
        if !exact.contains_key(label) {
            tv += *c as f64 / total as f64;
        }
    }
    tv *= 0.5;
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "prior recovery",
        tv < 0.02 && secs < 120.0,
        &format!("TV = {tv:.4} (< 0.02), runtime {secs:.1} s (< 120 s)"),
    );
}

fn scenario3_study() -> StudyOutput {
    let candidates = FamilyTag::candidate_set();
    let prior = PriorConfig::default();
    let tuning = TuningParams {
        iterations: 15_000,
        burn_in: 2_500,
        ..TuningParams::default()
    };
    replicate_study(3, 10, 500, &candidates, &prior, &tuning, 2026).unwrap()
}

#[test]
fn criteria_02_03_scenario3_structure_and_sparsity() {
    let start = std::time::Instant::now();
    let study = scenario3_study();
    let secs = start.elapsed().as_secs_f64();

    let modal = study.rows.iter().filter(|r| r.bayes_modal_t1).count();
    let mean_rel: f64 =
        study.rows.iter().map(|r| r.bayes_rel).sum::<f64>() / study.rows.len() as f64;
    report(
        2,
        "scenario 3 structure recovery",
        modal >= 8 && (95.0..=105.0).contains(&mean_rel) && secs < 7200.0,
        &format!(
            "modal T1 correct {modal}/10 (>= 8), mean relative loglik {mean_rel:.1}% \
             (in [95, 105]), runtime {secs:.0} s (< 7200 s)"
        ),
    );

    // criterion 3 reuses the same ten fitted replications
    let mean_count = |rows: &[Vec<usize>]| -> f64 {
        rows.iter()
            .map(|c| c[1..].iter().sum::<usize>() as f64)
            .sum::<f64>()
            / rows.len() as f64
    };
    let bayes_levels: Vec<Vec<usize>> =
        study.rows.iter().map(|r| r.bayes_nonindep.clone()).collect();
    let diss_levels: Vec<Vec<usize>> = study
        .rows
        .iter()
        .map(|r| r.dissmann_nonindep.clone())
        .collect();
    let bayes_avg = mean_count(&bayes_levels);
    let diss_avg = mean_count(&diss_levels);
    report(
        3,
        "scenario 3 sparsity",
        bayes_avg < 2.0 && bayes_avg <= diss_avg,
        &format!(
            "Bayes non-independence pairs at levels 2-5: {bayes_avg:.2}/10 (< 2), \
             greedy baseline {diss_avg:.2} (Bayes <= baseline)"
        ),
    );
}

#[test]
fn criterion_04_head_to_head_scenarios_1_2() {
    let candidates = FamilyTag::candidate_set();
    let prior = PriorConfig::default();
    let tuning = TuningParams {
        iterations: 4_000,
        burn_in: 1_000,
        ..TuningParams::default()
    };
    let mut wins = Vec::new();
    for id in [1, 2] {
        let study = replicate_study(id, 10, 500, &candidates, &prior, &tuning, 515).unwrap();
        wins.push(study.bayes_wins_vs_dissmann);
    }
    report(
        4,
        "head-to-head vs greedy baseline",
        wins.iter().all(|&w| w >= 7),
        &format!(
            "Bayes loglik beats the greedy fit in {}/10 (scenario 1) and {}/10 \
             (scenario 2); both >= 7",
            wins[0], wins[1]
        ),
    );
}

#[test]
fn criterion_05_scenario4_gaussian_detection() {
    let candidates = FamilyTag::candidate_set();
    let prior = PriorConfig::default();
    let tuning = TuningParams {
        iterations: 4_000,
        burn_in: 1_000,
        ..TuningParams::default()
    };
    let study = replicate_study(4, 5, 500, &candidates, &prior, &tuning, 404).unwrap();
    let mean_gauss: f64 = study
        .rows
        .iter()
        .map(|r| r.bayes_gauss_or_indep as f64)
        .sum::<f64>()
        / study.rows.len() as f64;
    let mean_rel: f64 =
        study.rows.iter().map(|r| r.bayes_rel).sum::<f64>() / study.rows.len() as f64;
    report(
        5,
        "scenario 4 Gaussian detection",
        mean_gauss >= 12.0 && (97.0..=103.0).contains(&mean_rel),
        &format!(
            "Gaussian/Independence pairs {mean_gauss:.1}/15 (>= 12), \
             mean relative loglik {mean_rel:.1}% (in [97, 103])"
        ),
    );
}

#[test]
fn criterion_06_combinatorics() {
    let counts: Vec<usize> = [3, 4, 5]
        .iter()
        .map(|&d| enumerate_vines(d).unwrap().len())
        .collect();
    let vines_ok = counts == vec![3, 24, 480];

    // determinant tree counts against exhaustive enumeration on complete
    // graphs up to 6 nodes and random subgraphs
    let mut kirchhoff_ok = true;
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    for d in 2..=6usize {
        let g = AllowedGraph::complete(d);
        kirchhoff_ok &= count_spanning_trees(&g)
            == num_bigint::BigInt::from(enumerate_spanning_trees(&g).len());
        for _ in 0..40 {
            let edges: Vec<(usize, usize)> = (0..d)
                .flat_map(|a| ((a + 1)..d).map(move |b| (a, b)))
                .filter(|_| rng.gen::<f64>() < 0.7)
                .collect();
            if edges.len() < d - 1 {
                continue;
            }
            let weights = vec![1.0; edges.len()];
            let g = AllowedGraph {
                n: d,
                edges,
                weights,
            };
            kirchhoff_ok &= count_spanning_trees(&g)
                == num_bigint::BigInt::from(enumerate_spanning_trees(&g).len());
        }
    }

    let masses = qn_masses(5, 3.5);
    let reference = [0.573, 0.178, 0.109, 0.079, 0.062];
    let qn_ok = masses
        .iter()
        .zip(&reference)
        .all(|(m, r)| (m - r).abs() <= 0.001);
    report(
        6,
        "combinatorics",
        vines_ok && kirchhoff_ok && qn_ok,
        &format!(
            "vine counts {counts:?} (= [3, 24, 480]), determinant tree counts match \
             enumeration: {kirchhoff_ok}, edge-subset proposal masses within 0.001: {qn_ok}"
        ),
    );
}

#[test]
fn criterion_07_numerics() {
    let cases = vec![
        PairCopula::new(fam("N"), PairParams::tau_only(0.5)).unwrap(),
        PairCopula::new(fam("N"), PairParams::tau_only(-0.6)).unwrap(),
        PairCopula::new(fam("T"), PairParams::with_df(0.5, 4.0)).unwrap(),
        PairCopula::new(fam("C"), PairParams::tau_only(0.7)).unwrap(),
        PairCopula::new(fam("C90"), PairParams::tau_only(-0.4)).unwrap(),
        PairCopula::new(fam("C180"), PairParams::tau_only(0.3)).unwrap(),
        PairCopula::new(fam("G"), PairParams::tau_only(0.6)).unwrap(),
        PairCopula::new(fam("G270"), PairParams::tau_only(-0.5)).unwrap(),
    ];

    // density normalization over the unit square
    let (xs, ws) = composite_gauss_legendre(16, 32, 0.0, 1.0);
    let mut norm_err: f64 = 0.0;
    for c in &cases {
        let mut total = 0.0;
        for (u, wu) in xs.iter().zip(&ws) {
            for (v, wv) in xs.iter().zip(&ws) {
                total += wu * wv * pair_density(c, *u, *v).unwrap();
            }
        }
        norm_err = norm_err.max((total - 1.0).abs());
    }

    // d h(u|v) / d u = c(u, v) by central finite differences
    let mut h_err: f64 = 0.0;
    let eps = 1e-5;
    for c in &cases {
        for &u in &[0.2, 0.5, 0.8] {
            for &v in &[0.3, 0.6, 0.9] {
                let fd = (hfunc(c, u + eps, v, CondArg::Second).unwrap()
                    - hfunc(c, u - eps, v, CondArg::Second).unwrap())
                    / (2.0 * eps);
                h_err = h_err.max((fd - pair_density(c, u, v).unwrap()).abs());
            }
        }
    }

    // hinv roundtrip
    let mut inv_err: f64 = 0.0;
    for c in &cases {
        for &p in &[0.05, 0.3, 0.7, 0.95] {
            for &v in &[0.2, 0.5, 0.8] {
                let u = hinv(c, p, v, CondArg::Second).unwrap();
                inv_err = inv_err.max((hfunc(c, u, v, CondArg::Second).unwrap() - p).abs());
            }
        }
    }

    // all-Gaussian d=3 vine equals the trivariate Gaussian copula density
    let (tau12, tau23, tau13g2) = (0.5, -0.3, 0.4);
    let vine = VineCopula::new(
        VineStructure::new(3, vec![vec![(0, 1), (1, 2)], vec![(0, 1)]]),
        vec![
            vec![
                PairCopula::new(fam("N"), PairParams::tau_only(tau12)).unwrap(),
                PairCopula::new(fam("N"), PairParams::tau_only(tau23)).unwrap(),
            ],
            vec![PairCopula::new(fam("N"), PairParams::tau_only(tau13g2)).unwrap()],
        ],
        2,
    )
    .unwrap();
    let rho = |t: f64| (std::f64::consts::FRAC_PI_2 * t).sin();
    let (r12, r23, p13) = (rho(tau12), rho(tau23), rho(tau13g2));
    let r13 = p13 * ((1.0 - r12 * r12) * (1.0 - r23 * r23)).sqrt() + r12 * r23;
    let r = DMatrix::from_row_slice(3, 3, &[1.0, r12, r13, r12, 1.0, r23, r13, r23, 1.0]);
    let mut gauss_err: f64 = 0.0;
    for point in [[0.3, 0.6, 0.8], [0.1, 0.5, 0.2], [0.9, 0.4, 0.7]] {
        let lhs = vine.vine_ln_density(&point).unwrap();
        let rhs = gaussian_copula_loglik(&r, &[point.to_vec()]).unwrap();
        gauss_err = gauss_err.max((lhs - rhs).abs());
    }

    // full-density and tree-by-tree likelihood factorizations agree
    let truth = scenario(1).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    let data = truth.simulate(40, &mut rng).unwrap();
    let by_levels: f64 = (1..=truth.d() - 1)
        .map(|k| truth.level_loglik(k, &data).unwrap())
        .sum();
    let by_density: f64 = data
        .iter()
        .map(|row| truth.vine_ln_density(row).unwrap())
        .sum();
    let fact_err = (by_levels - by_density).abs();

    report(
        7,
        "numerics",
        norm_err < 1e-3 && h_err < 1e-5 && inv_err < 1e-9 && gauss_err < 1e-8 && fact_err < 1e-10,
        &format!(
            "normalization {norm_err:.2e} (< 1e-3), h vs finite difference {h_err:.2e} \
             (< 1e-5), inverse-h roundtrip {inv_err:.2e} (< 1e-9), Gaussian vine vs \
             Gaussian copula {gauss_err:.2e} (< 1e-8), factorization gap {fact_err:.2e} (< 1e-10)"
        ),
    );
}

#[test]
fn criterion_08_dlm_filter() {
    let config = DLMConfig::default();
    let prior = DLMPrior {
        a: 0.0,
        r_mat: 1e-6,
        r: 10.0,
        c: 1e-5,
    };
    let post = dlm::filter_update(&config, &prior, 0.01).unwrap();
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    // hand-computed: e = 0.01, q = 1.1e-5, A = 1/11, z = (10 + 1e-4/1.1e-5)/11
    let z = (10.0 + 1e-4 / 1.1e-5) / 11.0;
    let m_ok = rel(post.m, 1e-6 * 0.01 / 1.1e-5) < 1e-8;
    let c_ok = rel(post.c_mat, (1e-6 - (1.0f64 / 11.0).powi(2) * 1.1e-5) * z) < 1e-8;
    let s_ok = rel(post.s, z * 1e-5) < 1e-8;
    let n_ok = post.n == 11.0;
    let hand_ok = m_ok
        && c_ok
        && s_ok
        && n_ok
        && rel(post.m, 9.0909e-4) < 1e-4
        && rel(post.c_mat, 1.5777e-6) < 1e-4
        && rel(post.s, 1.7355e-5) < 1e-4;

    // PIT uniformity on self-simulated data
    let mut rng = ChaCha12Rng::seed_from_u64(88);
    let mut state = DLMPrior::initial();
    let mut ys = Vec::with_capacity(2000);
    for _ in 0..2000 {
        let fd = dlm::forecast(&config, &state);
        let y = dlm::inv_pit(&fd, rng.gen_range(1e-9..1.0 - 1e-9)).unwrap();
        ys.push(y);
        let post = dlm::filter_update(&config, &state, y).unwrap();
        state = dlm::evolve(&config, &post);
    }
    let out = dlm::run_filter(&config, &ys).unwrap();
    let p = ks_uniform_pvalue(&out.pits);

    report(
        8,
        "dynamic linear model",
        hand_ok && p > 0.01,
        &format!(
            "hand-worked update m/C/s/n to 1e-8 relative: {hand_ok}, \
             PIT uniformity KS p = {p:.3} (> 0.01)"
        ),
    );
}

fn serial_copula(d: usize, family: &str, tau: f64) -> VineCopula {
    let trees: Vec<Vec<(usize, usize)>> = (0..d - 1)
        .map(|k| (0..d - 1 - k).map(|i| (i, i + 1)).collect())
        .collect();
    let structure = VineStructure::new(d, trees);
    let mut pairs: Vec<Vec<PairCopula>> = (0..d - 1)
        .map(|k| vec![PairCopula::independence(); d - 1 - k])
        .collect();
    pairs[0] = (0..d - 1)
        .map(|_| PairCopula::new(fam(family), PairParams::tau_only(tau)).unwrap())
        .collect();
    VineCopula::new(structure, pairs, d - 1).unwrap()
}

fn self_consistent_returns(
    truth: &VineCopula,
    dlm_config: &DLMConfig,
    t_total: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let d = truth.d();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let us = truth.simulate(t_total, &mut rng).unwrap();
    let mut priors = vec![DLMPrior::initial(); d];
    let mut returns = Vec::with_capacity(t_total);
    for u in &us {
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            let fd = dlm::forecast(dlm_config, &priors[j]);
            let y = dlm::inv_pit(&fd, u[j].clamp(1e-9, 1.0 - 1e-9)).unwrap();
            row.push(y);
            let post = dlm::filter_update(dlm_config, &priors[j], y).unwrap();
            priors[j] = dlm::evolve(dlm_config, &post);
        }
        returns.push(row);
    }
    returns
}

#[test]
fn criterion_09_portfolio() {
    // optimizer vs random-search oracle
    let mut rng = ChaCha12Rng::seed_from_u64(91);
    let mu = [0.0008, -0.0002, 0.0011, 0.0004, 0.0006];
    let sd = [0.012, 0.018, 0.02, 0.009, 0.015];
    let samples: Vec<Vec<f64>> = (0..4000)
        .map(|_| {
            (0..5)
                .map(|j| {
                    mu[j]
                        + sd[j]
                            * bayesvine::special::norm_quantile(rng.gen_range(1e-9..1.0 - 1e-9))
                })
                .collect()
        })
        .collect();
    let panel = ForecastPanel::from_samples(samples).unwrap();
    let b = Bounds { lo: 0.05, hi: 0.35 };
    let w = optimize_weights(&panel, b, &mut rng).unwrap();
    let sr = sharpe_estimate(&w, &panel).unwrap();
    let mut oracle = f64::NEG_INFINITY;
    let mut orng = ChaCha12Rng::seed_from_u64(92);
    for _ in 0..1_000_000 {
        let e: Vec<f64> = (0..5).map(|_| -orng.gen::<f64>().max(1e-300).ln()).collect();
        let s: f64 = e.iter().sum();
        let cand = portfolio::project_box_simplex(&e.iter().map(|v| v / s).collect::<Vec<_>>(), b);
        let cand_sr = sharpe_estimate(&cand, &panel).unwrap();
        if cand_sr > oracle {
            oracle = cand_sr;
        }
    }
    let opt_ok = sr >= oracle - 1e-3;

    // self-consistent 500-day VaR coverage
    let dlm_config = DLMConfig::default();
    let truth = serial_copula(3, "N", 0.5);
    let bt = BacktestConfig {
        warmup: 100,
        n_samples: 2000,
        var_level: 0.10,
        bounds: Bounds { lo: 0.0, hi: 1.0 },
        refit_every: None,
        dlm: dlm_config,
    };
    let returns = self_consistent_returns(&truth, &dlm_config, 2100, 93);
    let mut rng_bt = ChaCha12Rng::seed_from_u64(94);
    let mut fit_true = |_p: &[Vec<f64>]| Ok(serial_copula(3, "N", 0.5));
    let well = portfolio::backtest_returns(&returns, &bt, &mut fit_true, &mut rng_bt).unwrap();
    let n_days = well.daily.len() as f64;
    let half = 1.96 * (0.1f64 * 0.9 / n_days).sqrt();
    let coverage_ok = (well.var_coverage - 0.10).abs() < half;

    // independence misspecification on strongly dependent data
    let truth4 = serial_copula(4, "N", 0.7);
    let returns4 = self_consistent_returns(&truth4, &dlm_config, 600, 95);
    let mut rng_i = ChaCha12Rng::seed_from_u64(96);
    let mut fit_indep = |p: &[Vec<f64>]| {
        let d = p[0].len();
        let trees: Vec<Vec<(usize, usize)>> = (0..d - 1)
            .map(|k| (0..d - 1 - k).map(|i| (i, i + 1)).collect())
            .collect();
        VineCopula::independence(VineStructure::new(d, trees))
    };
    // force a diversified book: with weight free to concentrate in a single
    // asset the copula never enters the portfolio quantile
    let bt4 = BacktestConfig {
        bounds: Bounds { lo: 0.15, hi: 0.35 },
        ..bt
    };
    let indep = portfolio::backtest_returns(&returns4, &bt4, &mut fit_indep, &mut rng_i).unwrap();
    let mut rng_t = ChaCha12Rng::seed_from_u64(96);
    let mut fit_true4 = |_p: &[Vec<f64>]| Ok(serial_copula(4, "N", 0.7));
    let well4 = portfolio::backtest_returns(&returns4, &bt4, &mut fit_true4, &mut rng_t).unwrap();
    let misspec_ok = indep.var_coverage > well4.var_coverage + 0.03 && indep.var_coverage > 0.13;

    report(
        9,
        "portfolio",
        opt_ok && coverage_ok && misspec_ok,
        &format!(
            "optimizer Sharpe {sr:.4} vs oracle {oracle:.4} (within 1e-3), \
             self-consistent VaR coverage {:.3} in 0.10 +- {half:.3}, \
             independence-copula coverage {:.3} vs correct model {:.3} (materially worse)",
            well.var_coverage, indep.var_coverage, well4.var_coverage
        ),
    );
}

#[test]
fn criterion_10_determinism() {
    let truth = scenario(3).unwrap();
    let mut sim_rng = seed_stream(7, "determinism-data");
    let data = truth.simulate(150, &mut sim_rng).unwrap();
    let candidates = vec![fam("I"), fam("N"), fam("C"), fam("G")];
    let prior = PriorConfig::default();
    let tuning = TuningParams {
        iterations: 2_000,
        burn_in: 500,
        ..TuningParams::default()
    };
    let config = RunConfig {
        command: "fit-bayes".into(),
        inputs: vec!["sim.csv".into()],
        seed: 7,
        iterations: tuning.iterations,
        burn_in: tuning.burn_in,
        lambda: prior.lambda,
        candidates: candidates.iter().map(|c| c.as_str().to_string()).collect(),
        paper_cancellation: false,
        df_prior: "lognu".into(),
        output_dir: "out".into(),
        rank_transform: false,
        scenario: Some(3),
        n: Some(150),
    };
    let run_once = |dir: &std::path::Path| {
        let mut rng = seed_stream(config.seed, "fit-bayes");
        let out = select_vine(&data, truth.d(), &candidates, &prior, &tuning, &mut rng).unwrap();
        write_selection_outputs(dir, &config, &out).unwrap();
    };
    let d1 = tempfile::TempDir::new().unwrap();
    let d2 = tempfile::TempDir::new().unwrap();
    run_once(d1.path());
    run_once(d2.path());
    let mut names: Vec<String> = std::fs::read_dir(d1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut identical = !names.is_empty();
    for name in &names {
        identical &= std::fs::read(d1.path().join(name)).unwrap()
            == std::fs::read(d2.path().join(name)).unwrap();
    }
    // rank transform and simulation are equally replay-stable
    let mut sim_rng2 = seed_stream(7, "determinism-data");
    let data2 = truth.simulate(150, &mut sim_rng2).unwrap();
    identical &= data == data2;

    // a dependence summary sanity check so the artifacts are non-trivial
    let c01 = kendall_tau(
        &data.iter().map(|r| r[0]).collect::<Vec<_>>(),
        &data.iter().map(|r| r[1]).collect::<Vec<_>>(),
    );
    report(
        10,
        "determinism",
        identical,
        &format!(
            "{} artifacts byte-identical across same-seed re-runs \
             (fitted on data with tau(0,1) = {c01:.2})",
            names.len()
        ),
    );
}

// smoke check that the VaR helper stays wired into the suite above
#[test]
fn var_helper_consistency() {
    let panel = ForecastPanel::from_samples(vec![vec![0.01], vec![0.03], vec![0.02]]).unwrap();
    assert_eq!(var_quantile(&panel, &[1.0], 0.5).unwrap(), 0.02);
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let fds = vec![ForecastDist {
        nu: 10.0,
        mu: 0.0,
        sigma2: 1.0,
    }];
    let copula = VineCopula::independence(VineStructure::new(2, vec![vec![(0, 1)]])).unwrap();
    // dimension mismatch is rejected
    assert!(joint_forecast(&fds, &copula, 10, &mut rng).is_err());
}
