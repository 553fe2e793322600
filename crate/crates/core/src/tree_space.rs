//! Spanning-tree spaces under the proximity condition: counting (matrix-tree
//! theorem), enumeration, weighted sampling, and tree-proposal weights.

use crate::error::{Error, Result};
use crate::vine::VineStructure;
use num_bigint::BigInt;
use rand::Rng;

/// A graph of admissible tree edges. For level 1 this is the complete graph
/// on the variables; for level k > 1 the nodes are the edges of tree k-1 and
/// admissible pairs are those sharing exactly one node.
#[derive(Debug, Clone)]
pub struct AllowedGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

fn norm_edge(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl AllowedGraph {
    /// Complete graph K_d with unit weights (level-1 tree space).
    pub fn complete(d: usize) -> AllowedGraph {
        let mut edges = Vec::new();
        for a in 0..d {
            for b in (a + 1)..d {
                edges.push((a, b));
            }
        }
        let weights = vec![1.0; edges.len()];
        AllowedGraph {
            n: d,
            edges,
            weights,
        }
    }

    /// Admissible graph for the next level: nodes are the given tree's
    /// edges, joined when they share exactly one endpoint (proximity).
    pub fn from_tree(tree: &[(usize, usize)]) -> AllowedGraph {
        let n = tree.len();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                let (e, f) = (tree[a], tree[b]);
                let shared = [e.0, e.1]
                    .iter()
                    .filter(|x| **x == f.0 || **x == f.1)
                    .count();
                if shared == 1 {
                    edges.push((a, b));
                }
            }
        }
        let weights = vec![1.0; edges.len()];
        AllowedGraph {
            n,
            edges,
            weights,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<AllowedGraph> {
        if weights.len() != self.edges.len() {
            return Err(Error::Config(format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Config("edge weights must be positive".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let e = norm_edge(a, b);
        self.edges.iter().position(|&x| x == e)
    }

    fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                let o = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[o] {
                    seen[o] = true;
                    stack.push(o);
                }
            }
        }
        seen.iter().all(|&x| x)
    }
}

/// Exact spanning-tree count by the matrix-tree theorem (integer Laplacian
/// cofactor determinant, computed with Bareiss elimination).
pub fn count_spanning_trees(g: &AllowedGraph) -> BigInt {
    if g.n == 0 || !g.is_connected() {
        return BigInt::from(0);
    }
    if g.n == 1 {
        return BigInt::from(1);
    }
    let m = g.n - 1;
    let mut lap = vec![vec![BigInt::from(0); m]; m];
    for &(a, b) in &g.edges {
        if a < m {
            lap[a][a] += 1;
        }
        if b < m {
            lap[b][b] += 1;
        }
        if a < m && b < m {
            lap[a][b] -= 1;
            lap[b][a] -= 1;
        }
    }
    bareiss_det(lap)
}

// Fraction-free Gaussian elimination; exact for integer matrices.
fn bareiss_det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut sign = 1i32;
    let mut prev = BigInt::from(1);
    for k in 0..n {
        if a[k][k] == BigInt::from(0) {
            // pivot search
            let swap = (k + 1..n).find(|&r| a[r][k] != BigInt::from(0));
            match swap {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::from(0),
            }
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let num = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = num / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if sign < 0 {
        -det
    } else {
        det
    }
}

/// Weighted matrix-tree total: sum over spanning trees of the product of
/// edge weights (floating-point Laplacian cofactor determinant).
pub fn weighted_tree_sum(g: &AllowedGraph) -> f64 {
    if g.n == 0 || !g.is_connected() {
        return 0.0;
    }
    if g.n == 1 {
        return 1.0;
    }
    let m = g.n - 1;
    let mut lap = nalgebra::DMatrix::<f64>::zeros(m, m);
    for (idx, &(a, b)) in g.edges.iter().enumerate() {
        let w = g.weights[idx];
        if a < m {
            lap[(a, a)] += w;
        }
        if b < m {
            lap[(b, b)] += w;
        }
        if a < m && b < m {
            lap[(a, b)] -= w;
            lap[(b, a)] -= w;
        }
    }
    lap.determinant()
}

/// Brute-force enumeration of all spanning trees (oracle-scale graphs only).
/// Each tree is a sorted list of normalized edges.
pub fn enumerate_spanning_trees(g: &AllowedGraph) -> Vec<Vec<(usize, usize)>> {
    let m = g.edges.len();
    let need = g.n.saturating_sub(1);
    let mut out = Vec::new();
    if need == 0 || m < need {
        return out;
    }
    let mut pick: Vec<usize> = (0..need).collect();
    loop {
        let edges: Vec<(usize, usize)> = pick.iter().map(|&i| g.edges[i]).collect();
        if is_spanning_tree(g.n, &edges) {
            let mut t: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| norm_edge(a, b)).collect();
            t.sort_unstable();
            out.push(t);
        }
        // next combination
        let mut i = need;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if pick[i] != i + m - need {
                break;
            }
        }
        if pick[need - 1] == m - 1 && pick[0] == m - need {
            return out;
        }
        pick[i] += 1;
        for j in i + 1..need {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

fn is_spanning_tree(n: usize, edges: &[(usize, usize)]) -> bool {
    if edges.len() != n - 1 {
        return false;
    }
    let mut dsu: Vec<usize> = (0..n).collect();
    fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
        if dsu[x] != x {
            let r = find(dsu, dsu[x]);
            dsu[x] = r;
        }
        dsu[x]
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut dsu, a), find(&mut dsu, b));
        if ra == rb {
            return false;
        }
        dsu[ra] = rb;
    }
    true
}

/// Samples a spanning tree with probability proportional to the product of
/// its edge weights (Wilson's loop-erased random walk).
pub fn sample_spanning_tree<R: Rng + ?Sized>(
    g: &AllowedGraph,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if !g.is_connected() {
        return Err(Error::Structure("graph is disconnected".into()));
    }
    // adjacency with weights
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.n];
    for (idx, &(a, b)) in g.edges.iter().enumerate() {
        adj[a].push((b, g.weights[idx]));
        adj[b].push((a, g.weights[idx]));
    }
    let root = rng.gen_range(0..g.n);
    let mut in_tree = vec![false; g.n];
    in_tree[root] = true;
    let mut next = vec![usize::MAX; g.n];
    let mut tree = Vec::with_capacity(g.n - 1);
    for start in 0..g.n {
        if in_tree[start] {
            continue;
        }
        // weighted random walk until the tree is hit
        let mut v = start;
        while !in_tree[v] {
            let total: f64 = adj[v].iter().map(|&(_, w)| w).sum();
            let mut roll = rng.gen::<f64>() * total;
            let mut chosen = adj[v].last().expect("connected node has neighbors").0;
            for &(o, w) in &adj[v] {
                roll -= w;
                if roll <= 0.0 {
                    chosen = o;
                    break;
                }
            }
            next[v] = chosen;
            v = chosen;
        }
        // loop-erased retrace
        let mut v = start;
        while !in_tree[v] {
            in_tree[v] = true;
            tree.push(norm_edge(v, next[v]));
            v = next[v];
        }
    }
    tree.sort_unstable();
    Ok(tree)
}

/// Unnormalized log proposal weight of tree `t` around `center`:
/// log p^{overlap} (1-p)^{non-overlap}, with overlap counted against the
/// center's edge set. Errors if `t` is not an admissible spanning tree or
/// equals the center (the center is excluded from the proposal support).
pub fn qt_logweight(
    g: &AllowedGraph,
    center: &[(usize, usize)],
    t: &[(usize, usize)],
    p: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&p) || p <= 0.0 {
        return Err(Error::Config(format!("p = {p} out of (0,1)")));
    }
    let tn: Vec<(usize, usize)> = t.iter().map(|&(a, b)| norm_edge(a, b)).collect();
    for &(a, b) in &tn {
        if g.edge_index(a, b).is_none() {
            return Err(Error::Structure(format!(
                "edge ({a},{b}) not admissible in the tree space"
            )));
        }
    }
    if !is_spanning_tree(g.n, &tn) {
        return Err(Error::Structure("proposal is not a spanning tree".into()));
    }
    let cn: Vec<(usize, usize)> = center.iter().map(|&(a, b)| norm_edge(a, b)).collect();
    let overlap = tn.iter().filter(|e| cn.contains(e)).count();
    if overlap == tn.len() && tn.len() == cn.len() {
        return Err(Error::Structure(
            "proposal equals the center tree (excluded from support)".into(),
        ));
    }
    Ok(overlap as f64 * p.ln() + (tn.len() - overlap) as f64 * (1.0 - p).ln())
}

/// Log normalizer of the tree proposal around `center`: the weighted
/// matrix-tree total with edge weights p/(1-p) on center edges and 1
/// elsewhere, scaled by (1-p)^{n-1}, minus the center's own weight p^{n-1}.
pub fn qt_lognormalizer(g: &AllowedGraph, center: &[(usize, usize)], p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) || p <= 0.0 {
        return Err(Error::Config(format!("p = {p} out of (0,1)")));
    }
    let cn: Vec<(usize, usize)> = center.iter().map(|&(a, b)| norm_edge(a, b)).collect();
    let ratio = p / (1.0 - p);
    let weights: Vec<f64> = g
        .edges
        .iter()
        .map(|e| if cn.contains(e) { ratio } else { 1.0 })
        .collect();
    let weighted = g.clone().with_weights(weights)?;
    let total = weighted_tree_sum(&weighted);
    let m = (g.n - 1) as f64;
    let z = total - ratio.powf(m);
    if z <= 0.0 {
        return Err(Error::Structure(
            "tree space has no tree other than the center".into(),
        ));
    }
    Ok(m * (1.0 - p).ln() + z.ln())
}

/// Draws a proposal tree with probability proportional to the q_T weights,
/// excluding the center. Uses rejection on the Wilson sampler, with an
/// explicit enumeration fallback for tiny spaces.
pub fn sample_tree_excluding<R: Rng + ?Sized>(
    g: &AllowedGraph,
    center: &[(usize, usize)],
    p: f64,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let cn: Vec<(usize, usize)> = {
        let mut v: Vec<(usize, usize)> = center.iter().map(|&(a, b)| norm_edge(a, b)).collect();
        v.sort_unstable();
        v
    };
    let ratio = p / (1.0 - p);
    let weights: Vec<f64> = g
        .edges
        .iter()
        .map(|e| if cn.contains(e) { ratio } else { 1.0 })
        .collect();
    let weighted = g.clone().with_weights(weights)?;
    for _ in 0..64 {
        let t = sample_spanning_tree(&weighted, rng)?;
        if t != cn {
            return Ok(t);
        }
    }
    // near-degenerate space: enumerate and sample exactly
    let all = enumerate_spanning_trees(g);
    if all.len() > 64 {
        return Err(Error::Numerical(
            "tree proposal rejection loop failed on a large space".into(),
        ));
    }
    let mut cands = Vec::new();
    let mut ws = Vec::new();
    for t in all {
        if t == cn {
            continue;
        }
        let lw = qt_logweight(g, &cn, &t, p)?;
        cands.push(t);
        ws.push(lw.exp());
    }
    if cands.is_empty() {
        return Err(Error::Structure(
            "tree space has no tree other than the center".into(),
        ));
    }
    let total: f64 = ws.iter().sum();
    let mut roll = rng.gen::<f64>() * total;
    for (t, w) in cands.iter().zip(&ws) {
        roll -= w;
        if roll <= 0.0 {
            return Ok(t.clone());
        }
    }
    Ok(cands.last().unwrap().clone())
}

/// Enumerates every regular vine tree sequence on `d` variables (d <= 5).
pub fn enumerate_vines(d: usize) -> Result<Vec<VineStructure>> {
    if !(2..=5).contains(&d) {
        return Err(Error::Config(format!(
            "vine enumeration supported for 2 <= d <= 5, got {d}"
        )));
    }
    let mut out = Vec::new();
    let mut trees: Vec<Vec<(usize, usize)>> = Vec::new();
    fn recurse(
        d: usize,
        trees: &mut Vec<Vec<(usize, usize)>>,
        out: &mut Vec<VineStructure>,
    ) {
        if trees.len() == d - 1 {
            out.push(VineStructure::new(d, trees.clone()));
            return;
        }
        let g = if trees.is_empty() {
            AllowedGraph::complete(d)
        } else {
            AllowedGraph::from_tree(trees.last().unwrap())
        };
        for t in enumerate_spanning_trees(&g) {
            trees.push(t);
            recurse(d, trees, out);
            trees.pop();
        }
    }
    recurse(d, &mut trees, &mut out);
    Ok(out)
}
