//! Frequentist baselines and study fixtures: greedy tree-by-tree selection
//! (maximum spanning tree on |Kendall's tau| with AIC family choice),
//! Gaussian-copula MLE, the four simulation-study scenarios, and the
//! relative log-likelihood metric.

use crate::error::{Error, Result};
use crate::pair::{fit_pair, pair_loglik, CopulaKind, FamilyTag, PairCopula, PairParams};
use crate::special::norm_quantile;
use crate::stats::kendall_tau;
use crate::tree_space::AllowedGraph;
use crate::vine::{pseudo_pair_arrays, EdgeSets, VineCopula, VineStructure};
use nalgebra::DMatrix;

fn pc(tag: &str, tau: f64) -> PairCopula {
    PairCopula::new(FamilyTag::parse(tag).unwrap(), PairParams::tau_only(tau)).unwrap()
}

fn pc_t(tau: f64, df: f64) -> PairCopula {
    PairCopula::new(
        FamilyTag::parse("T").unwrap(),
        PairParams::with_df(tau, df),
    )
    .unwrap()
}

fn ind() -> PairCopula {
    PairCopula::independence()
}

/// The four true models of the simulation study (d = 6 each).
pub fn scenario(id: usize) -> Result<VineCopula> {
    match id {
        1 => {
            // T1: 1-2, 2-3, 3-4, 3-5, 3-6; deeper trees centered on 2-3 / 1,3|2
            let s = VineStructure::new(
                6,
                vec![
                    vec![(0, 1), (1, 2), (2, 3), (2, 4), (2, 5)],
                    vec![(0, 1), (1, 2), (1, 3), (1, 4)],
                    vec![(0, 1), (0, 2), (0, 3)],
                    vec![(0, 2), (1, 2)],
                    vec![(0, 1)],
                ],
            );
            let pairs = vec![
                vec![
                    pc("N", 0.59),
                    pc("C", 0.71),
                    pc("C180", 0.80),
                    pc("N", -0.71),
                    pc_t(0.65, 3.0),
                ],
                vec![pc("G", 0.75), pc("N", 0.41), pc("C270", -0.60), pc("N", -0.37)],
                vec![pc_t(0.26, 5.0), pc("N", -0.26), pc("C90", -0.56)],
                vec![pc("N", 0.13), pc("C", 0.20)],
                vec![pc("G180", 0.52)],
            ];
            VineCopula::new(s, pairs, 5)
        }
        2 => {
            // star trees: T1 at variable 1, each deeper tree at the first edge
            let s = VineStructure::new(
                6,
                vec![
                    vec![(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)],
                    vec![(0, 1), (0, 2), (0, 3), (0, 4)],
                    vec![(0, 1), (0, 2), (0, 3)],
                    vec![(0, 1), (0, 2)],
                    vec![(0, 1)],
                ],
            );
            let pairs = vec![
                vec![
                    pc_t(0.54, 5.0),
                    pc("C90", -0.67),
                    pc("C180", 0.64),
                    pc("N", -0.59),
                    pc_t(0.54, 6.0),
                ],
                vec![pc("G", 0.71), pc("G270", -0.71), pc("C270", -0.60), pc("N", -0.45)],
                vec![pc_t(0.30, 8.0), pc("N", -0.30), pc("C90", -0.43)],
                vec![pc("N", 0.19), pc("C", 0.43)],
                vec![pc("G180", 0.50)],
            ];
            VineCopula::new(s, pairs, 5)
        }
        3 => {
            // Scenario 1's first tree with different parameters, truncated at 1
            let s = VineStructure::new(
                6,
                vec![
                    vec![(0, 1), (1, 2), (2, 3), (2, 4), (2, 5)],
                    vec![(0, 1), (1, 2), (1, 3), (1, 4)],
                    vec![(0, 1), (0, 2), (0, 3)],
                    vec![(0, 2), (1, 2)],
                    vec![(0, 1)],
                ],
            );
            let pairs = vec![
                vec![
                    pc("N", 0.41),
                    pc("C", 0.50),
                    pc("C180", 0.50),
                    pc("N", -0.33),
                    pc_t(0.49, 5.0),
                ],
                vec![ind(); 4],
                vec![ind(); 3],
                vec![ind(); 2],
                vec![ind()],
            ];
            VineCopula::new(s, pairs, 1)
        }
        4 => {
            // all-Gaussian model
            let s = VineStructure::new(
                6,
                vec![
                    // 1-2, 2-3, 2-4, 3-5, 3-6
                    vec![(0, 1), (1, 2), (1, 3), (2, 4), (2, 5)],
                    // 1,3|2 ; 2,5|3 ; 3,4|2 ; 5,6|3
                    vec![(0, 1), (1, 3), (1, 2), (3, 4)],
                    // 1,5|2,3 ; 2,6|3,5 ; 4,5|2,3
                    vec![(0, 1), (1, 3), (1, 2)],
                    // 1,6|2,3,5 ; 4,6|2,3,5
                    vec![(0, 1), (1, 2)],
                    // 1,4|2,3,5,6
                    vec![(0, 1)],
                ],
            );
            let pairs = vec![
                vec![
                    pc("N", 0.41),
                    pc("N", 0.49),
                    pc("N", -0.33),
                    pc("N", -0.26),
                    pc("N", 0.13),
                ],
                vec![pc("N", 0.59), pc("N", 0.13), pc("N", 0.41), pc("N", -0.33)],
                vec![pc("N", 0.26), pc("N", -0.41), pc("N", 0.19)],
                vec![pc("N", 0.49), pc("N", 0.41)],
                vec![pc("N", -0.33)],
            ];
            VineCopula::new(s, pairs, 5)
        }
        other => Err(Error::Config(format!("unknown scenario id {other}"))),
    }
}

/// Kruskal maximum spanning tree; ties broken by lexicographic edge order.
fn max_spanning_tree(n: usize, edges: &[(usize, usize)], weights: &[f64]) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..edges.len()).collect();
    idx.sort_by(|&x, &y| {
        weights[y]
            .partial_cmp(&weights[x])
            .unwrap()
            .then(edges[x].cmp(&edges[y]))
    });
    let mut dsu: Vec<usize> = (0..n).collect();
    fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
        if dsu[x] != x {
            let r = find(dsu, dsu[x]);
            dsu[x] = r;
        }
        dsu[x]
    }
    let mut tree = Vec::with_capacity(n - 1);
    for i in idx {
        let (a, b) = edges[i];
        let (ra, rb) = (find(&mut dsu, a), find(&mut dsu, b));
        if ra != rb {
            dsu[ra] = rb;
            tree.push((a.min(b), a.max(b)));
        }
    }
    tree.sort_unstable();
    tree
}

/// Asymptotic two-sided p-value of the Kendall-tau test of independence.
fn tau_independence_pvalue(tau: f64, n: usize) -> f64 {
    let nf = n as f64;
    let z = 3.0 * tau.abs() * (nf * (nf - 1.0) / (2.0 * (2.0 * nf + 5.0))).sqrt();
    2.0 * (1.0 - crate::special::norm_cdf(z))
}

/// Per-edge AIC family choice: argmin over the candidate set of
/// -2 loglik + 2 (number of parameters); Independence scores 0.
fn select_family_aic(data: &[(f64, f64)], candidates: &[FamilyTag]) -> Result<PairCopula> {
    let mut best: Option<(f64, PairCopula)> = None;
    for &fam in candidates {
        let (aic, c) = if fam.kind == CopulaKind::Independence {
            (0.0, PairCopula::independence())
        } else {
            let params = fit_pair(fam, data)?;
            let c = PairCopula::new(fam, params)?;
            let ll = pair_loglik(&c, data)?;
            (-2.0 * ll + 2.0 * fam.param_count() as f64, c)
        };
        match &best {
            Some((b, _)) if aic >= *b => {}
            _ => best = Some((aic, c)),
        }
    }
    Ok(best.expect("nonempty candidate set").1)
}

/// Greedy tree-by-tree selection: per level, the maximum spanning tree on
/// absolute sample Kendall's tau over proximity-admissible edges, then AIC
/// family selection per edge with plug-in estimates.
pub fn dissmann_select(data: &[Vec<f64>], candidates: &[FamilyTag]) -> Result<VineCopula> {
    let d = data
        .first()
        .map(|r| r.len())
        .ok_or_else(|| Error::Data("empty data".into()))?;
    if d < 2 {
        return Err(Error::Data(format!("dimension {d} too small")));
    }
    let mut trees: Vec<Vec<(usize, usize)>> = Vec::with_capacity(d - 1);
    let mut pairs: Vec<Vec<PairCopula>> = Vec::with_capacity(d - 1);
    // sets and arrays of the previously selected level's edges
    let mut prev_sets: Vec<EdgeSets> = Vec::new();
    let mut prev_arrays: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();

    for level in 1..d {
        let (cand_edges, cand_payload): (Vec<(usize, usize)>, Vec<(EdgeSets, (Vec<f64>, Vec<f64>))>) =
            if level == 1 {
                let mut es = Vec::new();
                let mut ps = Vec::new();
                for a in 0..d {
                    for b in (a + 1)..d {
                        let first: Vec<f64> = data.iter().map(|r| r[a]).collect();
                        let second: Vec<f64> = data.iter().map(|r| r[b]).collect();
                        es.push((a, b));
                        ps.push((
                            EdgeSets {
                                union: vec![a, b],
                                cond: vec![],
                                ci: a,
                                cj: b,
                            },
                            (first, second),
                        ));
                    }
                }
                (es, ps)
            } else {
                let parent_tree = &trees[level - 2];
                let g = AllowedGraph::from_tree(parent_tree);
                let mut es = Vec::new();
                let mut ps = Vec::new();
                for &(a, b) in &g.edges {
                    let payload = pseudo_pair_arrays(
                        &prev_sets,
                        &pairs[level - 2],
                        &prev_arrays,
                        a,
                        b,
                    )?;
                    es.push((a, b));
                    ps.push(payload);
                }
                (es, ps)
            };
        let weights: Vec<f64> = cand_payload
            .iter()
            .map(|(_, (f, s))| {
                let t = kendall_tau(f, s);
                if t.is_finite() {
                    t.abs()
                } else {
                    0.0
                }
            })
            .collect();
        let n_nodes = if level == 1 { d } else { d - level + 1 };
        let tree = max_spanning_tree(n_nodes, &cand_edges, &weights);
        let mut level_pairs = Vec::with_capacity(tree.len());
        let mut sets = Vec::with_capacity(tree.len());
        let mut arrays = Vec::with_capacity(tree.len());
        for &e in &tree {
            let pos = cand_edges.iter().position(|&x| x == e).unwrap();
            let (s, (f, snd)) = cand_payload[pos].clone();
            let rows: Vec<(f64, f64)> = f.iter().cloned().zip(snd.iter().cloned()).collect();
            // independence pre-test guards AIC against the selection bias of
            // having just picked the largest spurious |tau| in the tree
            let chosen = if tau_independence_pvalue(kendall_tau(&f, &snd), rows.len()) > 0.05 {
                PairCopula::independence()
            } else {
                select_family_aic(&rows, candidates)?
            };
            level_pairs.push(chosen);
            sets.push(s);
            arrays.push((f, snd));
        }
        trees.push(tree);
        pairs.push(level_pairs);
        prev_sets = sets;
        prev_arrays = arrays;
    }
    VineCopula::new(VineStructure::new(d, trees), pairs, d - 1)
}

/// Log-likelihood of a Gaussian copula with correlation matrix `r` on
/// uniform data (columns transformed through the normal quantile).
pub fn gaussian_copula_loglik(r: &DMatrix<f64>, data: &[Vec<f64>]) -> Result<f64> {
    let d = r.nrows();
    let chol = nalgebra::Cholesky::new(r.clone())
        .ok_or_else(|| Error::Numerical("correlation matrix not positive definite".into()))?;
    let inv = chol.inverse();
    let ln_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let mut total = 0.0;
    for row in data {
        let z = nalgebra::DVector::from_iterator(d, row.iter().map(|&u| norm_quantile(u)));
        let q = (z.transpose() * (&inv * &z))[(0, 0)] - z.dot(&z);
        total += -0.5 * ln_det - 0.5 * q;
    }
    Ok(total)
}

/// MLE of the Gaussian copula correlation matrix: normal-scores sample
/// correlation refined by up to 50 projected-gradient steps on the
/// likelihood (off-diagonal entries only, diagonal pinned to one).
pub fn gaussian_copula_mle(data: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = data.len();
    let d = data
        .first()
        .map(|r| r.len())
        .ok_or_else(|| Error::Data("empty data".into()))?;
    if n < 10 {
        return Err(Error::Estimation(format!("need at least 10 rows, got {n}")));
    }
    let z: Vec<Vec<f64>> = data
        .iter()
        .map(|r| r.iter().map(|&u| norm_quantile(u.clamp(1e-12, 1.0 - 1e-12))).collect())
        .collect();
    // normal-scores second-moment matrix
    let mut s = DMatrix::<f64>::zeros(d, d);
    for row in &z {
        for i in 0..d {
            for j in 0..d {
                s[(i, j)] += row[i] * row[j];
            }
        }
    }
    s /= n as f64;
    // normalize to a correlation matrix
    let mut r = s.clone();
    for i in 0..d {
        for j in 0..d {
            r[(i, j)] = s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt();
        }
    }
    for i in 0..d {
        r[(i, i)] = 1.0;
    }
    if nalgebra::Cholesky::new(r.clone()).is_none() {
        return Err(Error::Numerical(
            "normal-scores correlation not positive definite".into(),
        ));
    }
    // gradient of ll/n wrt R is (R^-1 S R^-1 - R^-1)/2; ascend off-diagonals
    let mut ll = gaussian_copula_loglik(&r, data)?;
    let mut step = 0.1;
    for _ in 0..50 {
        let inv = match nalgebra::Cholesky::new(r.clone()) {
            Some(c) => c.inverse(),
            None => break,
        };
        let grad = (&inv * &s * &inv - &inv) * 0.5;
        let mut cand = r.clone();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    cand[(i, j)] += step * grad[(i, j)];
                }
            }
        }
        match gaussian_copula_loglik(&cand, data) {
            Ok(cll) if cll > ll => {
                r = cand;
                ll = cll;
                step *= 1.2;
            }
            _ => {
                step *= 0.5;
                if step < 1e-10 {
                    break;
                }
            }
        }
    }
    Ok(r)
}

/// 100 * loglik(estimate) / loglik(truth) on the same data, anchored at the
/// independence model's zero log-likelihood.
pub fn relative_loglik(estimate_ll: f64, truth_ll: f64) -> Result<f64> {
    if truth_ll <= 0.0 {
        return Err(Error::Numerical(format!(
            "true-model log-likelihood {truth_ll} is not positive; relative metric undefined"
        )));
    }
    Ok(100.0 * estimate_ll / truth_ll)
}

/// Number of non-independence pairs per tree level.
pub fn non_independence_counts(copula: &VineCopula) -> Vec<usize> {
    copula
        .pairs
        .iter()
        .map(|level| {
            level
                .iter()
                .filter(|p| p.family.kind != CopulaKind::Independence)
                .count()
        })
        .collect()
}
