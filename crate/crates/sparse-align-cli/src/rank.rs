//! `rank`: score every (query, candidate) pair from a manifest, rank the
//! candidates, and report retrieval metrics plus batch sparsity.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sparse_align::metrics::{
    auc, map, mrr, p_at_1, sparsity_stats, Candidate, MetricReport, RankedList, SparsityStats,
};
use sparse_align::ot::TransportPlan;

use crate::error::{CliError, Result};
use crate::pipeline::{default_metric, embed_document, pair_costs, solve_pair, EmbeddedDoc};
use crate::{load_table, write_json, SolverArgs};

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Manifest JSON: [{"query": path, "candidates": [{"path", "relevant"}]}].
    pub manifest: PathBuf,
    /// Word-embedding table in the text vector format.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output path for the JSON report (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    query: String,
    candidates: Vec<ManifestCandidate>,
}

#[derive(Debug, Deserialize)]
struct ManifestCandidate {
    path: String,
    relevant: bool,
}

#[derive(Debug, Serialize)]
pub struct QueryReport {
    pub query_id: String,
    /// Candidates in rank order (best score first).
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Serialize)]
pub struct MetricsBlock {
    pub map: Option<MetricReport>,
    pub mrr: Option<MetricReport>,
    pub p_at_1: Option<MetricReport>,
    pub auc: Option<MetricReport>,
}

#[derive(Debug, Serialize)]
pub struct FailureRecord {
    pub query: String,
    pub candidate: String,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct RankReport {
    pub queries: Vec<QueryReport>,
    pub metrics: MetricsBlock,
    pub sparsity: Option<SparsityStats>,
    pub failures: Vec<FailureRecord>,
}

/// Manifest paths resolve relative to the manifest file's directory.
fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("SPARSE_ALIGN_THREADS") {
        let n: usize = raw.parse().map_err(|_| {
            CliError::input(format!("SPARSE_ALIGN_THREADS must be a number, got {raw:?}"))
        })?;
        if n > 0 {
            builder = builder.num_threads(n);
        }
    }
    builder
        .build()
        .map_err(|e| CliError::input(e.to_string()))
}

pub fn run(args: &RankArgs) -> Result<()> {
    let manifest_text = std::fs::read_to_string(&args.manifest)?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&manifest_text)?;
    if entries.is_empty() {
        return Err(CliError::input("manifest lists no queries"));
    }
    for (qi, e) in entries.iter().enumerate() {
        if e.candidates.is_empty() {
            return Err(CliError::input(format!(
                "query {qi} ({}) lists no candidates",
                e.query
            )));
        }
    }
    let base = args
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    let table = load_table(&args.embeddings)?;

    // Embed every distinct document once, sequentially.
    let mut docs: HashMap<PathBuf, EmbeddedDoc> = HashMap::new();
    for entry in &entries {
        for raw in std::iter::once(entry.query.as_str())
            .chain(entry.candidates.iter().map(|c| c.path.as_str()))
        {
            if let Entry::Vacant(slot) = docs.entry(resolve(&base, raw)) {
                let doc = embed_document(slot.key(), &table)?;
                slot.insert(doc);
            }
        }
    }

    let metric = args
        .solver
        .metric
        .unwrap_or_else(|| default_metric(args.solver.variant));
    let spec = args.solver.spec();
    let cfg = args.solver.config();

    // Solve pairs in parallel; results land in per-pair slots so output
    // order follows the manifest regardless of completion order.
    let jobs: Vec<(usize, usize)> = entries
        .iter()
        .enumerate()
        .flat_map(|(qi, e)| (0..e.candidates.len()).map(move |ci| (qi, ci)))
        .collect();
    type PairOutcome = std::result::Result<(f64, TransportPlan), String>;
    let outcomes: Vec<((usize, usize), PairOutcome)> = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|&(qi, ci)| {
                let entry = &entries[qi];
                let query_doc = &docs[&resolve(&base, &entry.query)];
                let cand_doc = &docs[&resolve(&base, &entry.candidates[ci].path)];
                let outcome = pair_costs(query_doc, cand_doc, metric)
                    .and_then(|cost| solve_pair(&cost, &spec, &cfg))
                    .map(|solved| (solved.similarity, solved.alignment.plan))
                    .map_err(|e| e.to_string());
                ((qi, ci), outcome)
            })
            .collect()
    });

    let mut scores: Vec<Vec<Option<f64>>> = entries
        .iter()
        .map(|e| vec![None; e.candidates.len()])
        .collect();
    let mut plans = Vec::new();
    let mut failures = Vec::new();
    for ((qi, ci), outcome) in outcomes {
        match outcome {
            Ok((score, plan)) => {
                scores[qi][ci] = Some(score);
                plans.push(plan);
            }
            Err(error) => failures.push(FailureRecord {
                query: entries[qi].query.clone(),
                candidate: entries[qi].candidates[ci].path.clone(),
                error,
            }),
        }
    }

    let mut queries = Vec::new();
    let mut lists = Vec::new();
    for (entry, row) in entries.iter().zip(&scores) {
        let cands: Vec<Candidate> = entry
            .candidates
            .iter()
            .zip(row)
            .filter_map(|(c, score)| {
                score.map(|score| Candidate {
                    candidate_id: c.path.clone(),
                    score,
                    relevant: c.relevant,
                })
            })
            .collect();
        if cands.is_empty() {
            continue;
        }
        let list = RankedList::new(entry.query.clone(), cands)?;
        queries.push(QueryReport {
            query_id: entry.query.clone(),
            candidates: list.candidates().to_vec(),
        });
        lists.push(list);
    }
    if queries.is_empty() {
        return Err(CliError::Solver(
            "every query/candidate pair failed to solve".into(),
        ));
    }

    let metrics = MetricsBlock {
        map: map(&lists).ok(),
        mrr: mrr(&lists).ok(),
        p_at_1: p_at_1(&lists).ok(),
        auc: auc(&lists).ok(),
    };
    let sparsity = match args.solver.lambda {
        Some(lambda) => sparsity_stats(&plans, lambda).ok(),
        // Plans differ in shape, so each is thresholded at its own default.
        None => per_plan_default_sparsity(&plans),
    };

    let report = RankReport {
        queries,
        metrics,
        sparsity,
        failures,
    };
    write_json(&report, args.out.as_deref())
}

/// Batch sparsity where each plan is thresholded at its own default
/// lambda = 0.01/(n*m); shapes vary across pairs.
fn per_plan_default_sparsity(plans: &[TransportPlan]) -> Option<SparsityStats> {
    if plans.is_empty() {
        return None;
    }
    let mut count = 0.0;
    let mut percent = 0.0;
    for p in plans {
        let lambda = sparse_align::constraints::default_lambda(p.rows(), p.cols());
        let stats = sparsity_stats(std::slice::from_ref(p), lambda).ok()?;
        count += stats.mean_active_count;
        percent += stats.mean_active_percent;
    }
    let n = plans.len() as f64;
    Some(SparsityStats {
        mean_active_count: count / n,
        mean_active_percent: percent / n,
    })
}
