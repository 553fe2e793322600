//! Regular vine copulas: tree sequences with proximity validation,
//! conditioned/conditioning set derivation, pseudo-observations,
//! density/likelihood evaluation, simulation, and truncation.
//!
//! Structures are stored as explicit per-level edge lists: tree 1 connects
//! variables 0..d-1 (0-based internally; serialized 1-based), and edges of
//! tree k reference node indices into tree k-1's edge list.

use crate::error::{Error, Result};
use crate::pair::{CondArg, CopulaKind, FamilyTag, PairCopula, PairParams};
use crate::pair::{hfunc, hinv, pair_ln_density, pair_loglik};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// A regular vine tree sequence (structure only, no families/parameters).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VineStructure {
    pub d: usize,
    /// trees[k] holds the edges of tree k+1; each edge joins two node
    /// indices: variables for tree 1, previous-tree edge indices otherwise.
    pub trees: Vec<Vec<(usize, usize)>>,
}

/// A structural defect found by [`VineStructure::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based tree level.
    pub level: usize,
    /// Edge index within the level (usize::MAX for level-wide defects).
    pub edge: usize,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "tree {} edge {}: {}", self.level, self.edge, self.message)
    }
}

/// Derived label sets of one edge: complete union, conditioning set, and the
/// two conditioned variables (all 0-based, sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSets {
    pub union: Vec<usize>,
    pub cond: Vec<usize>,
    pub ci: usize,
    pub cj: usize,
}

impl EdgeSets {
    /// Human-readable label like "1,3|2" (1-based).
    pub fn label(&self) -> String {
        let base = format!("{},{}", self.ci + 1, self.cj + 1);
        if self.cond.is_empty() {
            base
        } else {
            let cond: Vec<String> = self.cond.iter().map(|v| (v + 1).to_string()).collect();
            format!("{}|{}", base, cond.join(","))
        }
    }
}

/// Derived sets for every edge of every tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedSets {
    pub levels: Vec<Vec<EdgeSets>>,
}

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b.iter()).cloned().collect();
    u.sort_unstable();
    u.dedup();
    u
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().filter(|x| b.contains(x)).cloned().collect()
}

impl VineStructure {
    pub fn new(d: usize, trees: Vec<Vec<(usize, usize)>>) -> VineStructure {
        VineStructure { d, trees }
    }

    /// Number of tree levels present (at most d-1).
    pub fn levels(&self) -> usize {
        self.trees.len()
    }

    /// Checks the regular-vine conditions; an empty list means the
    /// structure is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.d < 2 {
            out.push(Violation {
                level: 1,
                edge: usize::MAX,
                message: format!("dimension {} too small", self.d),
            });
            return out;
        }
        if self.trees.len() > self.d - 1 {
            out.push(Violation {
                level: self.trees.len(),
                edge: usize::MAX,
                message: format!("{} trees but dimension {}", self.trees.len(), self.d),
            });
            return out;
        }
        for (t, edges) in self.trees.iter().enumerate() {
            let n_nodes = self.d - t;
            if edges.len() != n_nodes - 1 {
                out.push(Violation {
                    level: t + 1,
                    edge: usize::MAX,
                    message: format!("expected {} edges, found {}", n_nodes - 1, edges.len()),
                });
                return out;
            }
            // node indices in range, no self-loops
            for (i, &(a, b)) in edges.iter().enumerate() {
                if a >= n_nodes || b >= n_nodes {
                    out.push(Violation {
                        level: t + 1,
                        edge: i,
                        message: format!("node index out of range in ({a},{b})"),
                    });
                    return out;
                }
                if a == b {
                    out.push(Violation {
                        level: t + 1,
                        edge: i,
                        message: "self-loop".into(),
                    });
                    return out;
                }
            }
            // spanning tree: connected with n-1 edges
            let mut dsu: Vec<usize> = (0..n_nodes).collect();
            fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
                if dsu[x] != x {
                    let r = find(dsu, dsu[x]);
                    dsu[x] = r;
                }
                dsu[x]
            }
            for (i, &(a, b)) in edges.iter().enumerate() {
                let (ra, rb) = (find(&mut dsu, a), find(&mut dsu, b));
                if ra == rb {
                    out.push(Violation {
                        level: t + 1,
                        edge: i,
                        message: "cycle: edge joins already-connected nodes".into(),
                    });
                } else {
                    dsu[ra] = rb;
                }
            }
            if !out.is_empty() {
                return out;
            }
            // proximity: tree-k edges join tree-(k-1) edges sharing one node
            if t > 0 {
                let prev = &self.trees[t - 1];
                for (i, &(a, b)) in edges.iter().enumerate() {
                    let (pa, pb) = (prev[a], prev[b]);
                    let shared = [pa.0, pa.1]
                        .iter()
                        .filter(|x| **x == pb.0 || **x == pb.1)
                        .count();
                    if shared != 1 {
                        out.push(Violation {
                            level: t + 1,
                            edge: i,
                            message: format!(
                                "proximity violated: parents {:?} and {:?} share {} nodes",
                                pa, pb, shared
                            ),
                        });
                    }
                }
                if !out.is_empty() {
                    return out;
                }
            }
        }
        out
    }

    /// Computes complete unions, conditioning sets, and conditioned pairs
    /// for every edge. Fails on invalid structures.
    pub fn derive_sets(&self) -> Result<DerivedSets> {
        let violations = self.validate();
        if let Some(v) = violations.first() {
            return Err(Error::Structure(v.to_string()));
        }
        let mut levels: Vec<Vec<EdgeSets>> = Vec::with_capacity(self.trees.len());
        for (t, edges) in self.trees.iter().enumerate() {
            let mut sets = Vec::with_capacity(edges.len());
            for &(a, b) in edges {
                let (union, cond) = if t == 0 {
                    (vec![a.min(b), a.max(b)], Vec::new())
                } else {
                    let pa = &levels[t - 1][a];
                    let pb = &levels[t - 1][b];
                    (
                        sorted_union(&pa.union, &pb.union),
                        sorted_intersection(&pa.union, &pb.union),
                    )
                };
                let conditioned: Vec<usize> = union
                    .iter()
                    .filter(|x| !cond.contains(x))
                    .cloned()
                    .collect();
                if conditioned.len() != 2 {
                    return Err(Error::Structure(format!(
                        "tree {}: conditioned set {:?} is not a pair",
                        t + 1,
                        conditioned
                    )));
                }
                sets.push(EdgeSets {
                    union,
                    cond,
                    ci: conditioned[0],
                    cj: conditioned[1],
                });
            }
            levels.push(sets);
        }
        Ok(DerivedSets { levels })
    }
}

/// A regular vine copula: structure, per-edge pair copulas, truncation level.
#[derive(Debug, Clone, PartialEq)]
pub struct VineCopula {
    pub structure: VineStructure,
    /// pairs[k][e] matches structure.trees[k][e].
    pub pairs: Vec<Vec<PairCopula>>,
    /// Truncation level K in 1..=d-1; pairs above level K are Independence.
    pub truncation: usize,
    derived: DerivedSets,
}

impl VineCopula {
    pub fn new(
        structure: VineStructure,
        pairs: Vec<Vec<PairCopula>>,
        truncation: usize,
    ) -> Result<VineCopula> {
        let derived = structure.derive_sets()?;
        if pairs.len() != structure.trees.len() {
            return Err(Error::Structure(format!(
                "{} pair levels for {} trees",
                pairs.len(),
                structure.trees.len()
            )));
        }
        for (k, (ps, es)) in pairs.iter().zip(&structure.trees).enumerate() {
            if ps.len() != es.len() {
                return Err(Error::Structure(format!(
                    "tree {}: {} pairs for {} edges",
                    k + 1,
                    ps.len(),
                    es.len()
                )));
            }
            for p in ps {
                p.validate()?;
                if k + 1 > truncation && p.family.kind != CopulaKind::Independence {
                    return Err(Error::Structure(format!(
                        "non-independence pair above truncation level {truncation} at tree {}",
                        k + 1
                    )));
                }
            }
        }
        if truncation == 0 || truncation > structure.d - 1 {
            return Err(Error::Structure(format!(
                "truncation level {truncation} out of 1..={}",
                structure.d - 1
            )));
        }
        Ok(VineCopula {
            structure,
            pairs,
            truncation,
            derived,
        })
    }

    /// An all-independence vine on the given structure.
    pub fn independence(structure: VineStructure) -> Result<VineCopula> {
        let pairs = structure
            .trees
            .iter()
            .map(|es| vec![PairCopula::independence(); es.len()])
            .collect();
        let truncation = structure.d - 1;
        VineCopula::new(structure, pairs, truncation)
    }

    pub fn d(&self) -> usize {
        self.structure.d
    }

    pub fn derived(&self) -> &DerivedSets {
        &self.derived
    }

    /// Total number of copula parameters (Independence 0, StudentT 2, else 1).
    pub fn param_count(&self) -> usize {
        self.pairs
            .iter()
            .flatten()
            .map(|p| p.family.param_count())
            .sum()
    }

    /// Replaces all pairs above level `k` with Independence.
    pub fn truncate(mut self, k: usize) -> Result<VineCopula> {
        if k == 0 || k > self.d() - 1 {
            return Err(Error::Structure(format!(
                "truncation level {k} out of 1..={}",
                self.d() - 1
            )));
        }
        for level in k..self.pairs.len() {
            for p in &mut self.pairs[level] {
                *p = PairCopula::independence();
            }
        }
        self.truncation = k;
        Ok(self)
    }
}

/// Pseudo-observation arrays: levels[k][e] = (u_{i(e)|D(e)}, u_{j(e)|D(e)}).
#[derive(Debug, Clone)]
pub struct PseudoObs {
    pub levels: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
}

/// Derived sets and pseudo-obs arrays of a prospective edge joining parent
/// edges `a` and `b` of the previous tree. The parents must satisfy the
/// proximity condition. Returns the edge's label sets and its
/// (u_{i|D}, u_{j|D}) arrays.
pub fn pseudo_pair_arrays(
    parent_sets: &[EdgeSets],
    pairs_below: &[PairCopula],
    parent_arrays: &[(Vec<f64>, Vec<f64>)],
    a: usize,
    b: usize,
) -> Result<(EdgeSets, (Vec<f64>, Vec<f64>))> {
    let (pa, pb) = (&parent_sets[a], &parent_sets[b]);
    let union = sorted_union(&pa.union, &pb.union);
    let cond = sorted_intersection(&pa.union, &pb.union);
    let conditioned: Vec<usize> = union
        .iter()
        .filter(|x| !cond.contains(x))
        .cloned()
        .collect();
    if conditioned.len() != 2 {
        return Err(Error::Structure(format!(
            "parents {} and {} violate proximity",
            pa.label(),
            pb.label()
        )));
    }
    let sets = EdgeSets {
        union,
        cond,
        ci: conditioned[0],
        cj: conditioned[1],
    };
    let (pi, pj) = if parent_sets[a].union.contains(&sets.ci) {
        (a, b)
    } else {
        (b, a)
    };
    let transform = |parent: usize, var: usize| -> Result<Vec<f64>> {
        let ps = &parent_sets[parent];
        let (first, second) = &parent_arrays[parent];
        let c = &pairs_below[parent];
        let n = first.len();
        let mut arr = Vec::with_capacity(n);
        if var == ps.ci {
            for r in 0..n {
                arr.push(hfunc(c, first[r], second[r], CondArg::Second)?);
            }
        } else if var == ps.cj {
            for r in 0..n {
                arr.push(hfunc(c, second[r], first[r], CondArg::First)?);
            }
        } else {
            return Err(Error::Structure(format!(
                "variable {var} not conditioned in parent edge {parent}"
            )));
        }
        Ok(arr)
    };
    let arrays = (transform(pi, sets.ci)?, transform(pj, sets.cj)?);
    Ok((sets, arrays))
}

/// Computes level-(L) pseudo-obs arrays from the level-(L-1) arrays and the
/// level-(L-1) pair copulas (L is 1-based, at least 2).
pub fn advance_pseudo_obs(
    structure: &VineStructure,
    derived: &DerivedSets,
    level: usize,
    pairs_below: &[PairCopula],
    parent_arrays: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    assert!(level >= 2);
    let t = level - 1;
    let edges = &structure.trees[t];
    let mut out = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        let (_, arrays) =
            pseudo_pair_arrays(&derived.levels[t - 1], pairs_below, parent_arrays, a, b)?;
        out.push(arrays);
    }
    Ok(out)
}

impl VineCopula {
    /// Pseudo-observations for levels 1..=upto (Eq.-style recursion through
    /// h-functions). Level-1 arrays are the raw data columns.
    pub fn pseudo_obs(&self, data: &[Vec<f64>], upto: usize) -> Result<PseudoObs> {
        let d = self.d();
        let upto = upto.min(self.structure.trees.len());
        for row in data {
            if row.len() != d {
                return Err(Error::Data(format!(
                    "row has {} entries, expected {d}",
                    row.len()
                )));
            }
        }
        let mut levels = Vec::with_capacity(upto);
        if upto == 0 {
            return Ok(PseudoObs { levels });
        }
        let mut first_level = Vec::with_capacity(self.structure.trees[0].len());
        for sets in &self.derived.levels[0] {
            let ci: Vec<f64> = data.iter().map(|r| r[sets.ci]).collect();
            let cj: Vec<f64> = data.iter().map(|r| r[sets.cj]).collect();
            first_level.push((ci, cj));
        }
        levels.push(first_level);
        for level in 2..=upto {
            let next = advance_pseudo_obs(
                &self.structure,
                &self.derived,
                level,
                &self.pairs[level - 2],
                &levels[level - 2],
            )?;
            levels.push(next);
        }
        Ok(PseudoObs { levels })
    }

    /// Log-likelihood contribution of tree `k` (1-based).
    pub fn level_loglik(&self, k: usize, data: &[Vec<f64>]) -> Result<f64> {
        if k == 0 || k > self.structure.trees.len() {
            return Err(Error::Structure(format!("level {k} out of range")));
        }
        let pobs = self.pseudo_obs(data, k)?;
        self.level_loglik_on(k, &pobs)
    }

    /// Level log-likelihood reusing precomputed pseudo-observations.
    pub fn level_loglik_on(&self, k: usize, pobs: &PseudoObs) -> Result<f64> {
        let arrays = &pobs.levels[k - 1];
        let mut total = 0.0;
        for (e, c) in self.pairs[k - 1].iter().enumerate() {
            let (first, second) = &arrays[e];
            let rows: Vec<(f64, f64)> = first.iter().cloned().zip(second.iter().cloned()).collect();
            total += pair_loglik(c, &rows)?;
        }
        Ok(total)
    }

    /// Full log-likelihood: sum of level contributions up to the truncation.
    pub fn vine_loglik(&self, data: &[Vec<f64>]) -> Result<f64> {
        let upto = self.truncation.min(self.structure.trees.len());
        let pobs = self.pseudo_obs(data, upto)?;
        let mut total = 0.0;
        for k in 1..=upto {
            total += self.level_loglik_on(k, &pobs)?;
        }
        Ok(total)
    }

    /// Log-density at a single point, evaluated by an independent per-point
    /// recursion over the tree sequence.
    pub fn vine_ln_density(&self, point: &[f64]) -> Result<f64> {
        let d = self.d();
        if point.len() != d {
            return Err(Error::Data(format!(
                "point has {} entries, expected {d}",
                point.len()
            )));
        }
        let upto = self.truncation.min(self.structure.trees.len());
        let mut total = 0.0;
        // per-edge conditional-cdf values for the current level
        let mut values: Vec<(f64, f64)> = Vec::new();
        for level in 1..=upto {
            let t = level - 1;
            let mut next = Vec::with_capacity(self.structure.trees[t].len());
            for (idx, &(a, b)) in self.structure.trees[t].iter().enumerate() {
                let sets = &self.derived.levels[t][idx];
                let (u, v) = if t == 0 {
                    (point[sets.ci], point[sets.cj])
                } else {
                    let take = |parent: usize, var: usize| -> Result<f64> {
                        let ps = &self.derived.levels[t - 1][parent];
                        let (pf, psnd) = values[parent];
                        let c = &self.pairs[t - 1][parent];
                        if var == ps.ci {
                            hfunc(c, pf, psnd, CondArg::Second)
                        } else {
                            hfunc(c, psnd, pf, CondArg::First)
                        }
                    };
                    let (pi, pj) = if self.derived.levels[t - 1][a].union.contains(&sets.ci) {
                        (a, b)
                    } else {
                        (b, a)
                    };
                    (take(pi, sets.ci)?, take(pj, sets.cj)?)
                };
                total += pair_ln_density(&self.pairs[t][idx], u, v)?;
                next.push((u, v));
            }
            values = next;
        }
        Ok(total)
    }

    /// Density at a single point (Eq.-(1)-style product over trees).
    pub fn vine_density(&self, point: &[f64]) -> Result<f64> {
        self.vine_ln_density(point).map(f64::exp)
    }
}

// One step of the elimination order: the variable removed and its descent
// path (one edge per level, identified by (level-1, edge index in the
// original structure)).
#[derive(Debug, Clone)]
struct Elimination {
    var: usize,
    /// path[k] = original edge index at tree index k, for k in 0..path.len()
    path: Vec<usize>,
}

fn elimination_order(structure: &VineStructure, derived: &DerivedSets) -> Result<Vec<Elimination>> {
    let d = structure.d;
    if structure.trees.len() != d - 1 {
        return Err(Error::Structure(
            "simulation requires a complete tree sequence".into(),
        ));
    }
    let mut active: Vec<Vec<bool>> = structure
        .trees
        .iter()
        .map(|es| vec![true; es.len()])
        .collect();
    let mut order = Vec::with_capacity(d - 1);
    for top in (1..=d - 1).rev() {
        // exactly one active edge at tree index top-1
        let top_idx = active[top - 1]
            .iter()
            .position(|&x| x)
            .ok_or_else(|| Error::Structure("no active top edge".into()))?;
        let x = derived.levels[top - 1][top_idx].cj;
        let mut path = Vec::with_capacity(top);
        for k in 0..top {
            let hits: Vec<usize> = (0..structure.trees[k].len())
                .filter(|&e| {
                    active[k][e] && {
                        let s = &derived.levels[k][e];
                        s.ci == x || s.cj == x
                    }
                })
                .collect();
            if hits.len() != 1 {
                return Err(Error::Structure(format!(
                    "variable {x} conditioned in {} active edges at tree {}",
                    hits.len(),
                    k + 1
                )));
            }
            active[k][hits[0]] = false;
            path.push(hits[0]);
        }
        order.push(Elimination { var: x, path });
    }
    Ok(order)
}

impl VineCopula {
    /// Simulates `n` rows by inverse-Rosenblatt sampling along an
    /// elimination ordering of the tree sequence.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let d = self.d();
        let derived = &self.derived;
        let order = elimination_order(&self.structure, derived)?;
        // first variable: the one never eliminated
        let mut eliminated = vec![false; d];
        for e in &order {
            eliminated[e.var] = true;
        }
        let v1 = (0..d)
            .find(|&v| !eliminated[v])
            .ok_or_else(|| Error::Structure("no root variable".into()))?;
        // map complete union -> (tree index, edge index) for partner lookups
        let mut by_union: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for (t, level) in derived.levels.iter().enumerate() {
            for (e, sets) in level.iter().enumerate() {
                by_union.insert(sets.union.clone(), (t, e));
            }
        }

        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let w: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let mut u = vec![f64::NAN; d];
            u[v1] = w[0];
            let mut memo: HashMap<(usize, Vec<usize>), f64> = HashMap::new();
            // order is recorded top-down; simulate in reverse (small paths first)
            for (m, elim) in order.iter().rev().enumerate() {
                let mut val = w[m + 1];
                for k in (0..elim.path.len()).rev() {
                    let e = elim.path[k];
                    let sets = &derived.levels[k][e];
                    let (y, arg) = if elim.var == sets.ci {
                        (sets.cj, CondArg::Second)
                    } else {
                        (sets.ci, CondArg::First)
                    };
                    let pv = self.cond_value(y, &sets.cond, &u, &by_union, &mut memo)?;
                    val = hinv(&self.pairs[k][e], val, pv, arg)?;
                }
                u[elim.var] = val;
            }
            out.push(u);
        }
        Ok(out)
    }

    // u_{y|cond} at a single sampled point, by recursive h-transforms.
    fn cond_value(
        &self,
        y: usize,
        cond: &[usize],
        u: &[f64],
        by_union: &HashMap<Vec<usize>, (usize, usize)>,
        memo: &mut HashMap<(usize, Vec<usize>), f64>,
    ) -> Result<f64> {
        if cond.is_empty() {
            return Ok(u[y]);
        }
        let key = (y, cond.to_vec());
        if let Some(&v) = memo.get(&key) {
            return Ok(v);
        }
        let union = sorted_union(&[y], cond);
        let &(t, e) = by_union.get(&union).ok_or_else(|| {
            Error::Structure(format!("no edge with union {union:?} for conditional value"))
        })?;
        let sets = &self.derived.levels[t][e];
        let (s, arg) = if y == sets.ci {
            (sets.cj, CondArg::Second)
        } else if y == sets.cj {
            (sets.ci, CondArg::First)
        } else {
            return Err(Error::Structure(format!(
                "variable {y} not conditioned in edge {}",
                sets.label()
            )));
        };
        let sub_cond: Vec<usize> = cond.iter().filter(|&&c| c != s).cloned().collect();
        let a = self.cond_value(y, &sub_cond, u, by_union, memo)?;
        let b = self.cond_value(s, &sub_cond, u, by_union, memo)?;
        let v = hfunc(&self.pairs[t][e], a, b, arg)?;
        memo.insert(key, v);
        Ok(v)
    }
}

// ---------------------------------------------------------------------------
// JSON serialization: label-based schema
// {d, trees: [[{i, j, cond, family, tau, df?}]], truncation}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EdgeSpec {
    i: usize,
    j: usize,
    cond: Vec<usize>,
    family: FamilyTag,
    tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    df: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct VineCopulaSpec {
    d: usize,
    trees: Vec<Vec<EdgeSpec>>,
    truncation: usize,
}

impl Serialize for VineCopula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let trees = self
            .derived
            .levels
            .iter()
            .zip(&self.pairs)
            .map(|(level, pairs)| {
                level
                    .iter()
                    .zip(pairs)
                    .map(|(sets, p)| EdgeSpec {
                        i: sets.ci + 1,
                        j: sets.cj + 1,
                        cond: sets.cond.iter().map(|v| v + 1).collect(),
                        family: p.family,
                        tau: p.params.tau,
                        df: p.params.df,
                    })
                    .collect()
            })
            .collect();
        VineCopulaSpec {
            d: self.d(),
            trees,
            truncation: self.truncation,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VineCopula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = VineCopulaSpec::deserialize(d)?;
        vine_from_spec(spec).map_err(serde::de::Error::custom)
    }
}

fn vine_from_spec(spec: VineCopulaSpec) -> Result<VineCopula> {
    let d = spec.d;
    let mut trees: Vec<Vec<(usize, usize)>> = Vec::with_capacity(spec.trees.len());
    let mut pairs: Vec<Vec<PairCopula>> = Vec::with_capacity(spec.trees.len());
    // rebuilt unions per level, used to match parents at the next level
    let mut unions: Vec<Vec<Vec<usize>>> = Vec::new();
    for (t, level) in spec.trees.iter().enumerate() {
        let mut edges = Vec::with_capacity(level.len());
        let mut level_pairs = Vec::with_capacity(level.len());
        let mut level_unions = Vec::with_capacity(level.len());
        for e in level {
            if e.i == 0 || e.j == 0 || e.i > d || e.j > d {
                return Err(Error::Structure(format!(
                    "edge label {},{} out of 1..={d}",
                    e.i, e.j
                )));
            }
            let mut union: Vec<usize> = vec![e.i - 1, e.j - 1];
            for &c in &e.cond {
                if c == 0 || c > d {
                    return Err(Error::Structure(format!("cond label {c} out of 1..={d}")));
                }
                union.push(c - 1);
            }
            union.sort_unstable();
            union.dedup();
            if union.len() != t + 2 {
                return Err(Error::Structure(format!(
                    "edge {},{}|{:?} at tree {} has wrong union size",
                    e.i,
                    e.j,
                    e.cond,
                    t + 1
                )));
            }
            let pair = if t == 0 {
                (e.i - 1, e.j - 1)
            } else {
                // find the two previous-level edges whose unions merge here
                let prev = &unions[t - 1];
                let mut found = None;
                'outer: for a in 0..prev.len() {
                    for b in (a + 1)..prev.len() {
                        if sorted_union(&prev[a], &prev[b]) == union
                            && sorted_intersection(&prev[a], &prev[b]).len() == t
                        {
                            found = Some((a, b));
                            break 'outer;
                        }
                    }
                }
                found.ok_or_else(|| {
                    Error::Structure(format!(
                        "no parent edges for {},{}|{:?} at tree {}",
                        e.i,
                        e.j,
                        e.cond,
                        t + 1
                    ))
                })?
            };
            edges.push(pair);
            level_pairs.push(PairCopula::new(
                e.family,
                PairParams {
                    tau: e.tau,
                    df: e.df,
                },
            )?);
            level_unions.push(union);
        }
        trees.push(edges);
        pairs.push(level_pairs);
        unions.push(level_unions);
    }
    VineCopula::new(VineStructure::new(d, trees), pairs, spec.truncation)
}
