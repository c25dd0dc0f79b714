//! Synthetic repository generation for tests and benchmarks.
//!
//! Generated repositories are built around a fixed-length service pipeline
//! whose stages the query must traverse, so every generated query is solvable
//! by construction. Redundancy is then layered on top in controlled
//! proportions: signature-identical copies (equivalence classes), services a
//! stage subsumes functionally (dominance groups), more-demanding twins whose
//! activation implies the stage's (IIOE trees), and activatable noise that no
//! abstraction can collapse. The proportions are what the benchmarks vary to
//! study how much each abstraction level shrinks the search space.
//!
//! Generation is deterministic: the same config (including seed) produces a
//! byte-identical document.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composition::{build_dependency_graph, solution_qos_bounds};
use crate::model::{
    canonical_spec, Direction, Polarity, QoSSpec, QoSVector, Query, QueryView, ServiceDescriptor,
    ServiceView,
};
use crate::ontology::{Condition, Ontology};
use crate::repository::RepositoryDocument;
use crate::{Error, Result};

/// Length of the guaranteed-solvable pipeline every repository contains.
pub const STAGES: usize = 5;

/// Share of each redundancy kind among the non-backbone services.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RedundancyMix {
    /// Signature-identical copy of a pipeline stage (fresh QoS).
    pub p_equivalent: f64,
    /// Service the stage dominates: narrower inputs, wider outputs.
    pub p_dominant: f64,
    /// More-demanding, output-equivalent twin that heads an IIOE tree.
    pub p_iioe: f64,
    /// Activatable service outside every pipeline signature.
    pub p_unrelated: f64,
}

impl Default for RedundancyMix {
    fn default() -> Self {
        RedundancyMix {
            p_equivalent: 0.4,
            p_dominant: 0.25,
            p_iioe: 0.15,
            p_unrelated: 0.2,
        }
    }
}

/// Truncated normal distribution for one QoS parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QosDistribution {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_concepts: usize,
    /// Probability that a non-pipeline concept specializes an earlier one.
    pub subsumption_density: f64,
    pub n_parameters: usize,
    pub n_atoms: usize,
    pub n_services: usize,
    pub redundancy: RedundancyMix,
    /// QoS parameter name → its sampling distribution. Names must be
    /// canonical so aggregation semantics are known.
    pub qos_distributions: BTreeMap<String, QosDistribution>,
    pub n_queries: usize,
    /// 0 = constraints sit at the worst attainable chain value (loose),
    /// 1 = at the best (tight). Per-query jitter of ±0.1 is added.
    pub constraint_tightness: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let dist = |mean, std, min, max| QosDistribution {
            mean,
            std,
            min,
            max,
        };
        GeneratorConfig {
            seed: 42,
            n_concepts: 40,
            subsumption_density: 0.15,
            n_parameters: 40,
            n_atoms: 8,
            n_services: 60,
            redundancy: RedundancyMix::default(),
            qos_distributions: [
                ("response_time".to_string(), dist(100.0, 40.0, 1.0, 1000.0)),
                ("throughput".to_string(), dist(50.0, 20.0, 1.0, 500.0)),
                ("reliability".to_string(), dist(0.9, 0.05, 0.5, 1.0)),
                ("availability".to_string(), dist(0.9, 0.05, 0.5, 1.0)),
            ]
            .into_iter()
            .collect(),
            n_queries: 3,
            constraint_tightness: 0.5,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleConfig(msg));
        let m = &self.redundancy;
        let ps = [m.p_equivalent, m.p_dominant, m.p_iioe, m.p_unrelated];
        if ps.iter().any(|p| *p < 0.0) {
            return fail("redundancy shares must be nonnegative".to_string());
        }
        let sum: f64 = ps.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return fail(format!("redundancy shares must sum to 1, got {sum}"));
        }
        let tiers = 3 * (STAGES + 1);
        if self.n_concepts < tiers {
            return fail(format!(
                "need at least {tiers} concepts for the {STAGES}-stage pipeline tiers, got {}",
                self.n_concepts
            ));
        }
        if self.n_concepts == tiers && m.p_unrelated > 0.0 {
            return fail(
                "unrelated services need at least one concept beyond the pipeline tiers"
                    .to_string(),
            );
        }
        if self.n_parameters < self.n_concepts {
            return fail(format!(
                "need a parameter per concept: {} parameters for {} concepts",
                self.n_parameters, self.n_concepts
            ));
        }
        if self.n_atoms < STAGES {
            return fail(format!(
                "need an atom per pipeline stage ({STAGES}), got {}",
                self.n_atoms
            ));
        }
        if self.n_services < STAGES {
            return fail(format!(
                "need at least the {STAGES} pipeline services, got {}",
                self.n_services
            ));
        }
        if self.qos_distributions.is_empty() {
            return fail("at least one QoS distribution is required".to_string());
        }
        for (name, d) in &self.qos_distributions {
            if canonical_spec(name).is_none() {
                return fail(format!("unknown QoS parameter: {name}"));
            }
            if d.std <= 0.0 || !(d.min < d.max) {
                return fail(format!(
                    "distribution for {name} needs std > 0 and min < max"
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.subsumption_density) {
            return fail("subsumption_density must lie in [0, 1]".to_string());
        }
        if !(0.0..=1.0).contains(&self.constraint_tightness) {
            return fail("constraint_tightness must lie in [0, 1]".to_string());
        }
        Ok(())
    }
}

/// Box–Muller with rejection against the truncation range.
fn sample_truncated(rng: &mut ChaCha8Rng, d: &QosDistribution) -> Result<f64> {
    for _ in 0..1000 {
        let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]: keeps ln finite
        let u2: f64 = rng.random::<f64>();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        let v = d.mean + d.std * z;
        if v >= d.min && v <= d.max {
            return Ok(v);
        }
    }
    Err(Error::InfeasibleConfig(format!(
        "truncation range [{}, {}] is practically unreachable from N({}, {})",
        d.min, d.max, d.mean, d.std
    )))
}

fn param_of(concept: &str) -> String {
    format!("{}_val", concept.to_lowercase())
}

fn stage_atom(s: usize) -> String {
    format!("stage{s}_done")
}

/// Generates a repository document from `config`, queries included.
pub fn generate(config: &GeneratorConfig) -> Result<RepositoryDocument> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // -- ontology: three tiers per pipeline stage plus free concepts --------
    let mut concepts: BTreeSet<String> = BTreeSet::new();
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    let base = |s: usize| format!("Stage{s}");
    let mid = |s: usize| format!("Stage{s}Mid");
    let fine = |s: usize| format!("Stage{s}Fine");
    for s in 0..=STAGES {
        concepts.insert(base(s));
        concepts.insert(mid(s));
        concepts.insert(fine(s));
        edges.insert((mid(s), base(s)));
        edges.insert((fine(s), mid(s)));
    }
    let n_free = config.n_concepts - concepts.len();
    let free: Vec<String> = (0..n_free).map(|j| format!("Topic{j}")).collect();
    for (j, c) in free.iter().enumerate() {
        concepts.insert(c.clone());
        if j > 0 && rng.random::<f64>() < config.subsumption_density {
            let parent = rng.random_range(0..j);
            edges.insert((c.clone(), free[parent].clone()));
        }
    }

    let mut parameters: BTreeMap<String, String> = concepts
        .iter()
        .map(|c| (param_of(c), c.clone()))
        .collect();
    let concept_list: Vec<String> = concepts.iter().cloned().collect();
    for i in 0..config.n_parameters - config.n_concepts {
        let c = &concept_list[i % concept_list.len()];
        parameters.insert(format!("alias{}_{}", i, param_of(c)), c.clone());
    }

    let mut atoms: BTreeSet<String> = (1..=STAGES).map(stage_atom).collect();
    let mut implications: BTreeSet<(String, String)> = BTreeSet::new();
    for j in 0..config.n_atoms - STAGES {
        atoms.insert(format!("fact{j}"));
        if j > 0 {
            implications.insert((format!("fact{j}"), format!("fact{}", j - 1)));
        }
    }

    let onto = Ontology::new(concepts, edges, parameters, atoms, implications)?;

    // -- services: pipeline backbone, then redundancy in proportion ---------
    let spec_names: Vec<&String> = config.qos_distributions.keys().collect();
    let sample_qos = |rng: &mut ChaCha8Rng| -> Result<QoSVector> {
        let mut values = BTreeMap::new();
        for name in &spec_names {
            values.insert(
                (*name).clone(),
                sample_truncated(rng, &config.qos_distributions[*name])?,
            );
        }
        Ok(QoSVector { values })
    };

    let mut services: Vec<ServiceDescriptor> = Vec::new();
    let push = |services: &mut Vec<ServiceDescriptor>,
                    id: String,
                    inputs: &[String],
                    outputs: &[String],
                    pre: Condition,
                    post: Condition,
                    qos: QoSVector| {
        services.push(ServiceDescriptor {
            id: id.clone(),
            inputs: inputs.iter().cloned().collect(),
            outputs: outputs.iter().cloned().collect(),
            method: format!("invoke_{id}"),
            qos,
            pre,
            post,
        });
    };

    for s in 1..=STAGES {
        let qos = sample_qos(&mut rng)?;
        push(
            &mut services,
            format!("base_s{s}"),
            &[param_of(&base(s - 1))],
            &[param_of(&fine(s))],
            Condition::truth(),
            Condition::new([stage_atom(s)]),
            qos,
        );
    }

    let extras = config.n_services - STAGES;
    let mix = &config.redundancy;
    for k in 0..extras {
        let q = sample_qos(&mut rng)?;
        let roll: f64 = rng.random();
        let s = rng.random_range(1..=STAGES);
        if roll < mix.p_equivalent {
            push(
                &mut services,
                format!("eq{k}_s{s}"),
                &[param_of(&base(s - 1))],
                &[param_of(&fine(s))],
                Condition::truth(),
                Condition::new([stage_atom(s)]),
                q,
            );
        } else if roll < mix.p_equivalent + mix.p_dominant {
            push(
                &mut services,
                format!("dom{k}_s{s}"),
                &[param_of(&mid(s - 1))],
                &[param_of(&mid(s))],
                Condition::truth(),
                Condition::truth(),
                q,
            );
        } else if roll < mix.p_equivalent + mix.p_dominant + mix.p_iioe {
            push(
                &mut services,
                format!("root{k}_s{s}"),
                &[param_of(&mid(s - 1))],
                &[param_of(&fine(s))],
                Condition::truth(),
                Condition::new([stage_atom(s)]),
                q,
            );
        } else if free.is_empty() {
            // a zero unrelated share can still be rolled through float
            // round-off in the cumulative thresholds; fold it into the
            // equivalent bucket rather than demand free concepts
            push(
                &mut services,
                format!("eq{k}_s{s}"),
                &[param_of(&base(s - 1))],
                &[param_of(&fine(s))],
                Condition::truth(),
                Condition::new([stage_atom(s)]),
                q,
            );
        } else {
            let t = rng.random_range(0..=STAGES);
            let topic = rng.random_range(0..free.len());
            push(
                &mut services,
                format!("noise{k}"),
                &[param_of(&fine(t))],
                &[param_of(&free[topic])],
                Condition::truth(),
                Condition::truth(),
                q,
            );
        }
    }

    // -- QoS specs and queries ----------------------------------------------
    let specs: Vec<QoSSpec> = config
        .qos_distributions
        .keys()
        .map(|name| canonical_spec(name).expect("validated above"))
        .collect();

    let views: BTreeMap<String, ServiceView> = services
        .iter()
        .map(|s| Ok((s.id.clone(), ServiceView::from_descriptor(&onto, s)?)))
        .collect::<Result<_>>()?;

    let objective_spec = specs
        .iter()
        .find(|s| s.name == "response_time")
        .unwrap_or(&specs[0]);
    let objective_dir = match objective_spec.polarity {
        Polarity::Negative => Direction::Minimize,
        Polarity::Positive => Direction::Maximize,
    };

    let mut queries = Vec::new();
    for _ in 0..config.n_queries {
        let query = Query {
            inputs: [param_of(&fine(0))].into_iter().collect(),
            outputs: [param_of(&base(STAGES))].into_iter().collect(),
            input_spec: Condition::truth(),
            output_req: Condition::truth(),
            objectives: vec![(objective_spec.name.clone(), objective_dir)],
            constraints: Vec::new(),
        };
        let view = QueryView::new(&onto, &query)?;
        let dg = build_dependency_graph(&onto, &views, &view, 0, None)?;
        if !dg.covers_query(&onto, &view)? {
            return Err(Error::InfeasibleConfig(
                "generated pipeline fails to cover its own query".to_string(),
            ));
        }
        let jitter = 0.2 * (rng.random::<f64>() - 0.5);
        let tightness = (config.constraint_tightness + jitter).clamp(0.0, 1.0);
        let mut constraints = Vec::new();
        for spec in &specs {
            if spec.name == objective_spec.name {
                continue;
            }
            let (best, worst) = solution_qos_bounds(&onto, &dg, &view, spec)?;
            constraints.push((spec.name.clone(), worst + tightness * (best - worst)));
        }
        let mut query = query;
        query.constraints = constraints;
        queries.push(query);
    }

    let metadata: BTreeMap<String, String> = [
        ("generator".to_string(), "synthetic-pipeline".to_string()),
        ("seed".to_string(), config.seed.to_string()),
        ("stages".to_string(), STAGES.to_string()),
    ]
    .into_iter()
    .collect();

    RepositoryDocument::new(metadata, onto, specs, services, queries)
}
