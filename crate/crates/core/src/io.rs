//! Run configuration, seeded stream splitting, CSV ingestion, artifact
//! serialization, and the replication-study driver shared by the CLI and
//! the integration tests.

use crate::baselines::{
    self, dissmann_select, gaussian_copula_loglik, gaussian_copula_mle, relative_loglik,
};
use crate::error::{Error, Result};
use crate::pair::{FamilyTag, PairCopula};
use crate::rjmcmc::{select_vine, PriorConfig, SelectionOutput, TraceRecord, TuningParams};
use crate::vine::{VineCopula, VineStructure};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Full provenance record embedded in every output artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub inputs: Vec<String>,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub lambda: f64,
    pub candidates: Vec<String>,
    pub paper_cancellation: bool,
    pub df_prior: String,
    pub output_dir: String,
    #[serde(default)]
    pub rank_transform: bool,
    #[serde(default)]
    pub scenario: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
}

impl RunConfig {
    pub fn candidate_tags(&self) -> Result<Vec<FamilyTag>> {
        if self.candidates.len() < 2 {
            return Err(Error::Config(
                "need at least two candidate families".into(),
            ));
        }
        self.candidates.iter().map(|s| FamilyTag::parse(s)).collect()
    }

    pub fn prior(&self) -> Result<PriorConfig> {
        let df_prior = match self.df_prior.as_str() {
            "lognu" => crate::rjmcmc::DfPrior::LogNu,
            "flat-lognu" => crate::rjmcmc::DfPrior::FlatLogNu,
            other => {
                return Err(Error::Config(format!(
                    "unknown df prior '{other}' (expected lognu | flat-lognu)"
                )))
            }
        };
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda = {} invalid", self.lambda)));
        }
        Ok(PriorConfig {
            lambda: self.lambda,
            df_prior,
        })
    }

    pub fn tuning(&self) -> TuningParams {
        TuningParams {
            iterations: self.iterations,
            burn_in: self.burn_in,
            paper_cancellation: self.paper_cancellation,
            ..TuningParams::default()
        }
    }
}

/// 64-bit FNV-1a; stable across platforms and releases so seed streams
/// never move.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives an independent named RNG stream from the root seed; adding a new
/// consumer never perturbs existing streams.
pub fn seed_stream(root: u64, name: &str) -> ChaCha12Rng {
    let mut bytes = Vec::with_capacity(name.len() + 8);
    bytes.extend_from_slice(&root.to_le_bytes());
    bytes.extend_from_slice(name.as_bytes());
    ChaCha12Rng::seed_from_u64(fnv1a(&bytes))
}

/// Serialization form of a vine copula model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineModelJson {
    pub d: usize,
    pub truncation: usize,
    pub trees: Vec<Vec<(usize, usize)>>,
    pub pairs: Vec<Vec<PairCopula>>,
}

impl VineModelJson {
    pub fn from_copula(c: &VineCopula) -> VineModelJson {
        VineModelJson {
            d: c.d(),
            truncation: c.truncation,
            trees: c.structure.trees.clone(),
            pairs: c.pairs.clone(),
        }
    }

    pub fn to_copula(&self) -> Result<VineCopula> {
        VineCopula::new(
            VineStructure::new(self.d, self.trees.clone()),
            self.pairs.clone(),
            self.truncation,
        )
    }
}

/// Envelope written around every JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub config: RunConfig,
    pub version: String,
    pub payload: T,
}

pub fn library_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Writes a JSON artifact with the run configuration and library version
/// embedded.
pub fn write_artifact<T: Serialize>(path: &Path, config: &RunConfig, payload: &T) -> Result<()> {
    let art = Artifact {
        config: config.clone(),
        version: library_version(),
        payload,
    };
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &art)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Reads a headered CSV of numbers; returns column names and row-major data.
pub fn read_csv_matrix(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    if headers.is_empty() {
        return Err(Error::Data("CSV has no columns".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {}: {} fields, expected {}",
                i + 1,
                rec.len(),
                headers.len()
            )));
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "row {}, column '{}': cannot parse '{}'",
                    i + 1,
                    headers[j],
                    field
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {}, column '{}': non-finite value",
                    i + 1,
                    headers[j]
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("CSV has no data rows".into()));
    }
    Ok((headers, rows))
}

/// Rejects constant columns, naming the offending column.
pub fn check_constant_columns(headers: &[String], rows: &[Vec<f64>]) -> Result<()> {
    for j in 0..headers.len() {
        let first = rows[0][j];
        if rows.iter().all(|r| r[j] == first) {
            return Err(Error::Data(format!(
                "column '{}' is constant",
                headers[j]
            )));
        }
    }
    Ok(())
}

/// Maps each column to ranks r/(n+1) on (0,1).
pub fn rank_transform(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mut out = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| rows[a][j].partial_cmp(&rows[b][j]).unwrap());
        for (rank, &i) in idx.iter().enumerate() {
            out[i][j] = (rank + 1) as f64 / (n + 1) as f64;
        }
    }
    out
}

/// Validates copula-scale data, or rank-transforms raw data when requested.
pub fn prepare_unit_data(
    headers: &[String],
    rows: &[Vec<f64>],
    do_rank_transform: bool,
) -> Result<Vec<Vec<f64>>> {
    check_constant_columns(headers, rows)?;
    if do_rank_transform {
        return Ok(rank_transform(rows));
    }
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Data(format!(
                    "row {}, column '{}': value {} outside (0,1); \
                     pass raw data with the rank-transform option",
                    i + 1,
                    headers[j],
                    v
                )));
            }
        }
    }
    Ok(rows.to_vec())
}

/// Writes a row-major matrix as a headered CSV.
pub fn write_csv_matrix(path: &Path, headers: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one level's MCMC trace.
pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "level", "model_hash", "loglik", "accepted_move"])?;
    for t in trace {
        w.write_record([
            t.iter.to_string(),
            t.level.to_string(),
            t.model_hash.to_string(),
            format!("{:.10e}", t.loglik),
            t.accepted_move.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one level's visited-model frequency table.
pub fn write_model_table_csv(path: &Path, table: &[(String, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", "count_post_burnin"])?;
    for (label, count) in table {
        w.write_record([label.clone(), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the full fit-bayes artifact set: model JSON plus per-level trace
/// and model-frequency CSVs.
pub fn write_selection_outputs(
    out_dir: &Path,
    config: &RunConfig,
    out: &SelectionOutput,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_artifact(
        &out_dir.join("model.json"),
        config,
        &VineModelJson::from_copula(&out.model),
    )?;
    for run in &out.levels {
        write_trace_csv(
            &out_dir.join(format!("trace_level_{}.csv", run.level)),
            &run.trace,
        )?;
        write_model_table_csv(
            &out_dir.join(format!("model_table_level_{}.csv", run.level)),
            &run.model_table,
        )?;
    }
    Ok(())
}

/// One replication of the simulation study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub rep: usize,
    /// Relative log likelihoods (percent of the true model's), per method.
    pub bayes_rel: f64,
    pub dissmann_rel: f64,
    pub gauss_rel: f64,
    pub indep_rel: f64,
    /// Non-independence pair counts per tree level.
    pub bayes_nonindep: Vec<usize>,
    pub dissmann_nonindep: Vec<usize>,
    /// Whether the Bayesian modal first tree equals the truth.
    pub bayes_modal_t1: bool,
    /// Whether every selected pair at every level is Gaussian/Independence.
    pub bayes_all_gaussian: bool,
    /// Number of selected pairs (out of d(d-1)/2) that are Gaussian or
    /// Independence.
    pub bayes_gauss_or_indep: usize,
}

/// Replication-study output plus aggregate win counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyOutput {
    pub scenario: usize,
    pub rows: Vec<ReplicationResult>,
    pub bayes_wins_vs_dissmann: usize,
}

fn edge_set(tree: &[(usize, usize)]) -> std::collections::BTreeSet<(usize, usize)> {
    tree.iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect()
}

/// Simulates `reps` data sets from a scenario truth and fits the Bayesian
/// procedure, the greedy frequentist baseline, the Gaussian-copula MLE, and
/// the independence model to each.
pub fn replicate_study(
    scenario_id: usize,
    reps: usize,
    n: usize,
    candidates: &[FamilyTag],
    prior: &PriorConfig,
    tuning: &TuningParams,
    root_seed: u64,
) -> Result<StudyOutput> {
    let truth = baselines::scenario(scenario_id)?;
    let d = truth.d();
    let true_t1 = edge_set(&truth.structure.trees[0]);
    let mut rows = Vec::with_capacity(reps);
    let mut wins = 0;
    for rep in 0..reps {
        let mut sim_rng = seed_stream(root_seed, &format!("sim-{scenario_id}-{rep}"));
        let data = truth.simulate(n, &mut sim_rng)?;
        let truth_ll = truth.vine_loglik(&data)?;

        let mut bayes_rng = seed_stream(root_seed, &format!("bayes-{scenario_id}-{rep}"));
        let bayes = select_vine(&data, d, candidates, prior, tuning, &mut bayes_rng)?;
        let bayes_ll = bayes.model.vine_loglik(&data)?;
        let diss = dissmann_select(&data, candidates)?;
        let diss_ll = diss.vine_loglik(&data)?;
        let r_hat = gaussian_copula_mle(&data)?;
        let gauss_ll = gaussian_copula_loglik(&r_hat, &data)?;

        let bayes_rel = relative_loglik(bayes_ll, truth_ll)?;
        let dissmann_rel = relative_loglik(diss_ll, truth_ll)?;
        if bayes_rel > dissmann_rel {
            wins += 1;
        }
        let gauss_or_indep = bayes
            .model
            .pairs
            .iter()
            .flatten()
            .filter(|p| {
                matches!(
                    p.family.kind,
                    crate::pair::CopulaKind::Gaussian | crate::pair::CopulaKind::Independence
                )
            })
            .count();
        let all_gaussian = gauss_or_indep == bayes.model.pairs.iter().flatten().count();
        rows.push(ReplicationResult {
            rep,
            bayes_rel,
            dissmann_rel,
            gauss_rel: relative_loglik(gauss_ll, truth_ll)?,
            indep_rel: relative_loglik(0.0, truth_ll)?,
            bayes_nonindep: baselines::non_independence_counts(&bayes.model),
            dissmann_nonindep: baselines::non_independence_counts(&diss),
            // marginal posterior mode over first trees, family vectors summed
            bayes_modal_t1: edge_set(&crate::rjmcmc::marginal_modal_tree(
                &bayes.levels[0].history,
            )) == true_t1,
            bayes_all_gaussian: all_gaussian,
            bayes_gauss_or_indep: gauss_or_indep,
        });
    }
    Ok(StudyOutput {
        scenario: scenario_id,
        rows,
        bayes_wins_vs_dissmann: wins,
    })
}

/// Writes the per-replication study table.
pub fn write_study_csv(path: &Path, study: &StudyOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "rep",
        "bayes_rel",
        "dissmann_rel",
        "gauss_rel",
        "indep_rel",
        "bayes_nonindep",
        "dissmann_nonindep",
        "bayes_modal_t1",
    ])?;
    for r in &study.rows {
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("|")
        };
        w.write_record([
            r.rep.to_string(),
            format!("{:.6}", r.bayes_rel),
            format!("{:.6}", r.dissmann_rel),
            format!("{:.6}", r.gauss_rel),
            format!("{:.6}", r.indep_rel),
            join(&r.bayes_nonindep),
            join(&r.dissmann_nonindep),
            r.bayes_modal_t1.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::scenario;
    use tempfile::TempDir;

    #[test]
    fn seed_streams_are_independent_and_stable() {
        use rand::RngCore;
        let mut a1 = seed_stream(7, "level-1");
        let mut a2 = seed_stream(7, "level-1");
        let mut b = seed_stream(7, "level-2");
        let mut c = seed_stream(8, "level-1");
        let xs: Vec<u64> = (0..4).map(|_| a1.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| a2.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs[0], b.next_u64());
        assert_ne!(xs[0], c.next_u64());
        // frozen reference so streams can never silently move
        assert_eq!(fnv1a(b"abc"), 0xe71fa2190541574b);
    }

    #[test]
    fn vine_model_json_roundtrip() {
        let truth = scenario(1).unwrap();
        let js = VineModelJson::from_copula(&truth);
        let text = serde_json::to_string(&js).unwrap();
        let back: VineModelJson = serde_json::from_str(&text).unwrap();
        let rebuilt = back.to_copula().unwrap();
        assert_eq!(rebuilt.structure, truth.structure);
        assert_eq!(rebuilt.pairs, truth.pairs);
        assert_eq!(rebuilt.truncation, truth.truncation);
    }

    #[test]
    fn csv_roundtrip_and_diagnostics() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("m.csv");
        let headers = vec!["a".to_string(), "b".to_string()];
        let rows = vec![vec![0.25, 0.5], vec![0.75, 0.125]];
        write_csv_matrix(&p, &headers, &rows).unwrap();
        let (h2, r2) = read_csv_matrix(&p).unwrap();
        assert_eq!(h2, headers);
        for (x, y) in r2.iter().flatten().zip(rows.iter().flatten()) {
            assert_eq!(x, y);
        }

        std::fs::write(&p, "a,b\n0.5,oops\n").unwrap();
        let err = read_csv_matrix(&p).unwrap_err().to_string();
        assert!(err.contains("column 'b'") && err.contains("row 1"), "{err}");
    }

    #[test]
    fn constant_column_named_in_error() {
        let headers = vec!["x".to_string(), "steady".to_string()];
        let rows = vec![vec![0.2, 0.4], vec![0.3, 0.4], vec![0.9, 0.4]];
        let err = prepare_unit_data(&headers, &rows, false)
            .unwrap_err()
            .to_string();
        assert!(err.contains("steady"), "{err}");
    }

    #[test]
    fn unit_domain_enforced_unless_rank_transformed() {
        let headers = vec!["x".to_string(), "y".to_string()];
        let rows = vec![vec![0.2, 1.4], vec![0.3, -0.4], vec![0.9, 0.1]];
        assert!(prepare_unit_data(&headers, &rows, false).is_err());
        let u = prepare_unit_data(&headers, &rows, true).unwrap();
        for v in u.iter().flatten() {
            assert!(*v > 0.0 && *v < 1.0);
        }
        // ranks: column y values 1.4, -0.4, 0.1 -> ranks 3, 1, 2 over n+1 = 4
        assert_eq!(u[0][1], 0.75);
        assert_eq!(u[1][1], 0.25);
        assert_eq!(u[2][1], 0.50);
    }

    #[test]
    fn artifact_embeds_config_and_version() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("a.json");
        let config = RunConfig {
            command: "fit-bayes".into(),
            inputs: vec!["data.csv".into()],
            seed: 7,
            iterations: 15000,
            burn_in: 2500,
            lambda: 1.0,
            candidates: vec!["I".into(), "N".into()],
            paper_cancellation: false,
            df_prior: "lognu".into(),
            output_dir: "out".into(),
            rank_transform: false,
            scenario: None,
            n: None,
        };
        write_artifact(&p, &config, &vec![1, 2, 3]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let art: Artifact<Vec<i32>> = serde_json::from_str(&text).unwrap();
        assert_eq!(art.config, config);
        assert_eq!(art.payload, vec![1, 2, 3]);
        assert_eq!(art.version, library_version());
    }
}
