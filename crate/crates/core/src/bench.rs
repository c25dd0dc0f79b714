//! Timing harness comparing the abstraction levels on one repository.
//!
//! For each requested level the harness times dependency-graph construction
//! and the full composition loop (search plus refinement), interleaving the
//! levels across repetitions so cache drift and allocator state spread evenly,
//! and reports the medians. Level 0 is always measured as the baseline the
//! `speedup` column divides against, whether or not a level-0 row was asked
//! for. The hierarchy itself is built once up front: it is per-repository
//! preprocessing, not per-query work, which is the point of the comparison.

use std::time::Instant;

use serde::Serialize;

use crate::abstraction::AbstractionHierarchy;
use crate::composition::{count_plans, dependency_graph_at, SolveOptions};
use crate::model::QueryView;
use crate::refinement::{compose_with_refinement, ComposeOutcome};
use crate::repository::RepositoryDocument;
use crate::{Error, Result};

/// One (dataset, query, level) measurement.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    /// Dataset label, conventionally `path#qN`.
    pub dataset: String,
    pub level: u8,
    pub repo_services: usize,
    /// Services activated in this level's dependency graph.
    pub dg_services: usize,
    pub dg_build_ms: f64,
    /// Median wall time of the full composition loop started at this level.
    pub solve_ms: f64,
    /// Exact plan count in this level's graph (decimal, arbitrary precision).
    pub plan_count: String,
    /// First objective's value on the returned concrete plan, if any.
    pub objective_value: Option<f64>,
    /// `solved_at_<level>`, `no_solution`, or `timeout`.
    pub refinement: String,
    /// Level-0 median dependency-graph build time over this level's.
    pub speedup: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn ms(from: Instant) -> f64 {
    from.elapsed().as_secs_f64() * 1e3
}

/// Benchmarks `levels` on one query of `doc`. `dataset` is a label carried
/// into the rows.
pub fn bench_dataset(
    doc: &RepositoryDocument,
    dataset: &str,
    query_index: usize,
    levels: &[u8],
    repetitions: usize,
    options: &SolveOptions,
) -> Result<Vec<BenchRow>> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument(
            "at least one repetition is required".to_string(),
        ));
    }
    if let Some(bad) = levels.iter().find(|l| **l > 3) {
        return Err(Error::InvalidArgument(format!(
            "abstraction level must be 0..=3, got {bad}"
        )));
    }
    let query = doc.queries.get(query_index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "query index {query_index} out of range ({} queries)",
            doc.queries.len()
        ))
    })?;
    let view = QueryView::new(&doc.ontology, query)?;
    let hierarchy = AbstractionHierarchy::build(doc)?;

    // level 0 is the baseline even when it was not requested
    let mut measured: Vec<u8> = levels.to_vec();
    if !measured.contains(&0) {
        measured.push(0);
    }

    let mut build_times: Vec<Vec<f64>> = vec![Vec::new(); measured.len()];
    let mut solve_times: Vec<Vec<f64>> = vec![Vec::new(); measured.len()];
    let mut outcomes: Vec<Option<ComposeOutcome>> = vec![None; measured.len()];
    for _ in 0..repetitions {
        for (i, &level) in measured.iter().enumerate() {
            let t = Instant::now();
            let dg = dependency_graph_at(doc, &hierarchy, &view, level)?;
            build_times[i].push(ms(t));
            drop(dg);

            let t = Instant::now();
            match compose_with_refinement(doc, &hierarchy, &view, level, options) {
                Ok(outcome) => {
                    solve_times[i].push(ms(t));
                    outcomes[i] = Some(outcome);
                }
                Err(Error::Timeout) => {
                    solve_times[i].push(ms(t));
                    outcomes[i] = None;
                }
                Err(e) => return Err(e),
            }
        }
    }

    let index_of = |level: u8| measured.iter().position(|l| *l == level).unwrap();
    let baseline = median(build_times[index_of(0)].clone());

    let objective = query.objectives.first().map(|(p, _)| p.clone());
    let mut rows = Vec::new();
    for &level in levels {
        let i = index_of(level);
        let dg = dependency_graph_at(doc, &hierarchy, &view, level)?;
        let build = median(build_times[i].clone());
        let (refinement, objective_value) = match &outcomes[i] {
            Some(ComposeOutcome::Solved(result)) => (
                format!("solved_at_{}", result.level_used),
                objective
                    .as_ref()
                    .and_then(|p| result.plan.qos.get(p).ok()),
            ),
            Some(ComposeOutcome::NoSolution { .. }) => ("no_solution".to_string(), None),
            None => ("timeout".to_string(), None),
        };
        rows.push(BenchRow {
            dataset: dataset.to_string(),
            level,
            repo_services: doc.services.len(),
            dg_services: dg.active_count(),
            dg_build_ms: build,
            solve_ms: median(solve_times[i].clone()),
            plan_count: count_plans(&doc.ontology, &dg, &view)?.to_string(),
            objective_value,
            refinement,
            speedup: baseline / build,
        });
    }
    Ok(rows)
}
