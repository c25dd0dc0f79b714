//! `qosc` — command-line frontend for the composition engine.
//!
//! Subcommands mirror the library's workflow: `validate` and `abstract`
//! inspect a repository, `compose` answers one of its queries, `gen` writes
//! synthetic repositories, and `bench` measures how the abstraction levels
//! pay off. Exit codes are part of the contract: 0 success, 1 validation
//! violations, 2 usage/load errors, 3 no solution, 4 deadline elapsed.

use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qosc_core::abstraction::AbstractionHierarchy;
use qosc_core::bench::{bench_dataset, BenchRow};
use qosc_core::composition::{
    dependency_graph_at, find_constrained, optimal_single_qos, plan_meets_output_req,
    SolveOptions,
};
use qosc_core::datagen::{generate, GeneratorConfig, RedundancyMix};
use qosc_core::model::QueryView;
use qosc_core::refinement::{
    compose_with_refinement, ComposeOutcome, ComposeResult, RefinementEvent,
};
use qosc_core::repository::{self, summarize, RepositoryDocument};

#[derive(Parser)]
#[command(name = "qosc", version, about = "QoS-aware semantic service composition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a repository document and print its section sizes.
    Validate(ValidateArgs),
    /// Build the abstraction hierarchy and print its report as JSON.
    Abstract(AbstractArgs),
    /// Answer one of a repository's queries.
    Compose(ComposeArgs),
    /// Generate a synthetic repository.
    Gen(GenArgs),
    /// Measure dependency-graph construction and solving per level, as CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Repository JSON file.
    repo: PathBuf,
}

#[derive(Args)]
struct AbstractArgs {
    /// Repository JSON file.
    repo: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Backend {
    /// Constraint-satisfying search optimizing the query's first objective.
    Constrained,
    /// Minimize response time, ignoring constraints.
    OptimalRt,
    /// Maximize throughput, ignoring constraints.
    OptimalThroughput,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RefineMode {
    On,
    Off,
}

#[derive(Args)]
struct ComposeArgs {
    /// Repository JSON file (queries are taken from it).
    repo: PathBuf,
    /// Index of the query to answer.
    #[arg(long, default_value_t = 0)]
    query: usize,
    /// Abstraction level the search starts at (0 = concrete services).
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(0..=3))]
    level: u8,
    #[arg(long, value_enum, default_value_t = Backend::Constrained)]
    backend: Backend,
    /// Refine on violation (`on`, constrained backend only): fall back to
    /// partial refinement and level reversion instead of giving up.
    #[arg(long, value_enum, default_value_t = RefineMode::On)]
    refine: RefineMode,
    /// Search deadline in milliseconds. Overrides QOSC_DEADLINE_MS; the
    /// default without either is 60000.
    #[arg(long)]
    deadline_ms: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Where to write the generated repository.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    services: usize,
    /// Concept count; the parameter map is sized to match.
    #[arg(long, default_value_t = 40)]
    concepts: usize,
    #[arg(long, default_value_t = 3)]
    queries: usize,
    /// Constraint tightness in [0, 1]: 0 loose, 1 at the attainable optimum.
    #[arg(long, default_value_t = 0.5)]
    tightness: f64,
    /// Redundancy mix `equivalent,dominant,iioe,unrelated` (sums to 1).
    #[arg(long)]
    mix: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Repository JSON files; every query of each is measured.
    #[arg(required = true)]
    repos: Vec<PathBuf>,
    /// Abstraction levels to measure (level 0 is always measured as baseline).
    #[arg(long, value_delimiter = ',', default_values_t = [0u8, 1, 2, 3])]
    levels: Vec<u8>,
    /// Restrict to one query index instead of all.
    #[arg(long)]
    query: Option<usize>,
    /// Timing repetitions per measurement (medians are reported).
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    /// Per-level search deadline in milliseconds (flag, then
    /// QOSC_DEADLINE_MS, then 60000).
    #[arg(long)]
    deadline_ms: Option<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<qosc_core::Error>() {
                Some(qosc_core::Error::NoSolution) => 3,
                Some(qosc_core::Error::Timeout) => 4,
                _ => 2,
            };
            std::process::ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Validate(args) => validate(args),
        Command::Abstract(args) => do_abstract(args),
        Command::Compose(args) => compose(args),
        Command::Gen(args) => gen(args),
        Command::Bench(args) => bench(args),
    }
}

/// Flag, then environment, then the 60 s default.
fn resolve_deadline(flag_ms: Option<u64>) -> anyhow::Result<Duration> {
    let ms = match flag_ms {
        Some(ms) => ms,
        None => match std::env::var("QOSC_DEADLINE_MS") {
            Ok(raw) => raw
                .trim()
                .parse()
                .context("QOSC_DEADLINE_MS must be a millisecond count")?,
            Err(_) => 60_000,
        },
    };
    Ok(Duration::from_millis(ms))
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load(path: &PathBuf) -> anyhow::Result<RepositoryDocument> {
    repository::load(path).with_context(|| format!("loading {}", path.display()))
}

fn validate(args: ValidateArgs) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(&args.repo)
        .with_context(|| format!("reading {}", args.repo.display()))?;
    match repository::from_json_str(&text) {
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&summarize(&doc))?);
            Ok(0)
        }
        Err(qosc_core::Error::Validation(violations)) => {
            for v in &violations {
                eprintln!("violation: {v}");
            }
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

fn do_abstract(args: AbstractArgs) -> anyhow::Result<u8> {
    let doc = load(&args.repo)?;
    let hierarchy = AbstractionHierarchy::build(&doc)?;
    let mut text = serde_json::to_string_pretty(&hierarchy.report())?;
    text.push('\n');
    emit(&args.out, &text)?;
    Ok(0)
}

fn compose(args: ComposeArgs) -> anyhow::Result<u8> {
    let doc = load(&args.repo)?;
    let query = doc.queries.get(args.query).with_context(|| {
        format!(
            "query index {} out of range ({} queries in the repository)",
            args.query,
            doc.queries.len()
        )
    })?;
    let view = QueryView::new(&doc.ontology, query)?;
    let hierarchy = AbstractionHierarchy::build(&doc)?;
    let options = SolveOptions {
        deadline: Some(resolve_deadline(args.deadline_ms)?),
    };

    let outcome = match (args.backend, args.refine) {
        (Backend::Constrained, RefineMode::On) => {
            compose_with_refinement(&doc, &hierarchy, &view, args.level, &options)?
        }
        (Backend::Constrained, RefineMode::Off) => {
            single_level(&doc, &hierarchy, &view, args.level, |dg| {
                find_constrained(&doc.ontology, dg, &view, &doc.qos_specs, &options)
            })?
        }
        (backend, _) => {
            let param = match backend {
                Backend::OptimalRt => "response_time",
                Backend::OptimalThroughput => "throughput",
                Backend::Constrained => unreachable!(),
            };
            single_level(&doc, &hierarchy, &view, args.level, |dg| {
                match optimal_single_qos(&doc.ontology, dg, &view, &doc.qos_specs, param) {
                    Ok(plan) => Ok(Some(plan)),
                    Err(qosc_core::Error::NoSolution) => Ok(None),
                    Err(e) => Err(e),
                }
            })?
        }
    };

    let mut text = serde_json::to_string_pretty(&outcome)?;
    text.push('\n');
    emit(&args.out, &text)?;
    Ok(match outcome {
        ComposeOutcome::Solved(_) => 0,
        ComposeOutcome::NoSolution { .. } => 3,
    })
}

/// One-level search without the refinement loop: solve on the level's graph,
/// reconstruct, and accept only a concrete plan that meets the query's
/// output requirement.
fn single_level(
    doc: &RepositoryDocument,
    hierarchy: &AbstractionHierarchy,
    view: &QueryView,
    level: u8,
    solve: impl FnOnce(&qosc_core::composition::DependencyGraph)
        -> qosc_core::Result<Option<qosc_core::model::CompositionPlan>>,
) -> anyhow::Result<ComposeOutcome> {
    let dg = dependency_graph_at(doc, hierarchy, view, level)?;
    let Some(plan) = solve(&dg)? else {
        return Ok(ComposeOutcome::NoSolution {
            trace: vec![RefinementEvent::NoPlanAtLevel { level }],
        });
    };
    let concrete =
        qosc_core::composition::reconstruct(doc, hierarchy, view, &plan, &Default::default())?;
    let views0 = doc.service_views()?;
    if !plan_meets_output_req(&doc.ontology, &views0, view, &concrete)? {
        return Ok(ComposeOutcome::NoSolution {
            trace: vec![RefinementEvent::ReconstructedPlanViolated {
                level,
                violated: vec!["output requirement".to_string()],
            }],
        });
    }
    Ok(ComposeOutcome::Solved(ComposeResult {
        plan: concrete,
        level_used: level,
        trace: vec![RefinementEvent::Solved { level }],
    }))
}

fn parse_mix(raw: &str) -> anyhow::Result<RedundancyMix> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .context("--mix expects four comma-separated numbers")?;
    let [p_equivalent, p_dominant, p_iioe, p_unrelated] = parts[..] else {
        anyhow::bail!("--mix expects exactly four shares, got {}", parts.len());
    };
    Ok(RedundancyMix {
        p_equivalent,
        p_dominant,
        p_iioe,
        p_unrelated,
    })
}

fn gen(args: GenArgs) -> anyhow::Result<u8> {
    let mut config = GeneratorConfig {
        seed: args.seed,
        n_services: args.services,
        n_concepts: args.concepts,
        n_parameters: args.concepts,
        n_queries: args.queries,
        constraint_tightness: args.tightness,
        ..GeneratorConfig::default()
    };
    if let Some(raw) = &args.mix {
        config.redundancy = parse_mix(raw)?;
    }
    let doc = generate(&config)?;
    repository::save(&doc, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("{}", serde_json::to_string_pretty(&summarize(&doc))?);
    Ok(0)
}

fn csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(
        "dataset,level,repo_services,dg_services,dg_build_ms,solve_ms,plan_count,objective_value,refinement,speedup\n",
    );
    for r in rows {
        let objective = r.objective_value.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{},{},{},{:.2}\n",
            r.dataset,
            r.level,
            r.repo_services,
            r.dg_services,
            r.dg_build_ms,
            r.solve_ms,
            r.plan_count,
            objective,
            r.refinement,
            r.speedup,
        ));
    }
    s
}

fn bench(args: BenchArgs) -> anyhow::Result<u8> {
    let options = SolveOptions {
        deadline: Some(resolve_deadline(args.deadline_ms)?),
    };
    let mut rows = Vec::new();
    for path in &args.repos {
        let doc = load(path)?;
        let queries: Vec<usize> = match args.query {
            Some(qi) => vec![qi],
            None => (0..doc.queries.len()).collect(),
        };
        for qi in queries {
            let label = format!("{}#q{qi}", path.display());
            rows.extend(bench_dataset(
                &doc,
                &label,
                qi,
                &args.levels,
                args.repetitions,
                &options,
            )?);
        }
    }
    emit(&args.out, &csv(&rows))?;
    Ok(0)
}
