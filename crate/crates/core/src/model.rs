//! Core value types: QoS parameters, services, queries, composition plans.
//!
//! Everything here is an immutable value object. Services are described over
//! parameter *names*; [`ServiceView`] and [`QueryView`] are the concept-space
//! projections the planner actually works on (names resolved through the
//! ontology's parameter map, conditions kept as-is).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ontology::{Condition, Ontology};
use crate::{Error, Result};

/// Whether a higher value is desirable (`positive`) or a lower one (`negative`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// How a parameter aggregates over a plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Sum along the most expensive producer→consumer path (e.g. response time).
    AdditiveCriticalPath,
    /// Product over all plan nodes (e.g. reliability, availability).
    Multiplicative,
    /// Minimum over all plan nodes (e.g. throughput).
    MinBottleneck,
}

/// Declaration of one QoS parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoSSpec {
    pub name: String,
    pub polarity: Polarity,
    pub aggregation: Aggregation,
}

impl QoSSpec {
    /// `a` is strictly preferable to `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self.polarity {
            Polarity::Positive => a > b,
            Polarity::Negative => a < b,
        }
    }

    pub fn best_of(&self, a: f64, b: f64) -> f64 {
        if self.better(a, b) {
            a
        } else {
            b
        }
    }

    pub fn worst_of(&self, a: f64, b: f64) -> f64 {
        if self.better(a, b) {
            b
        } else {
            a
        }
    }

    /// Non-strict constraint check: upper bound for negative parameters,
    /// lower bound for positive ones.
    pub fn satisfies(&self, value: f64, bound: f64) -> bool {
        match self.polarity {
            Polarity::Positive => value >= bound,
            Polarity::Negative => value <= bound,
        }
    }

    /// Aggregated value of the empty plan.
    pub fn empty_plan_value(&self) -> f64 {
        match self.aggregation {
            Aggregation::AdditiveCriticalPath => 0.0,
            Aggregation::Multiplicative => 1.0,
            Aggregation::MinBottleneck => f64::INFINITY,
        }
    }
}

/// The conventional reading of well-known parameter names. Repositories may
/// declare other names freely, but if one of these is declared its polarity
/// and aggregation must match.
pub fn canonical_spec(name: &str) -> Option<QoSSpec> {
    let (polarity, aggregation) = match name {
        "response_time" => (Polarity::Negative, Aggregation::AdditiveCriticalPath),
        "throughput" => (Polarity::Positive, Aggregation::MinBottleneck),
        "reliability" | "availability" => (Polarity::Positive, Aggregation::Multiplicative),
        _ => return None,
    };
    Some(QoSSpec {
        name: name.to_string(),
        polarity,
        aggregation,
    })
}

/// Values for the declared QoS parameters of one service (or one plan).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QoSVector {
    pub values: BTreeMap<String, f64>,
}

impl QoSVector {
    pub fn new<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        QoSVector {
            values: values.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.values
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownQos(name.to_string()))
    }
}

/// A service: what it consumes, what it produces, under which conditions,
/// and at which quality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub id: String,
    /// Input parameter names (registered in the ontology's parameter map).
    pub inputs: BTreeSet<String>,
    /// Output parameter names.
    pub outputs: BTreeSet<String>,
    /// Opaque method identifier (not interpreted by the planner).
    pub method: String,
    pub qos: QoSVector,
    pub pre: Condition,
    pub post: Condition,
}

/// Optimization direction for an objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// A composition request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    /// Provided parameter names.
    pub inputs: BTreeSet<String>,
    /// Demanded parameter names.
    pub outputs: BTreeSet<String>,
    /// What is known about the provided inputs.
    pub input_spec: Condition,
    /// What must hold for the produced outputs.
    pub output_req: Condition,
    /// Only the first objective is optimized; the rest are reported.
    pub objectives: Vec<(String, Direction)>,
    /// `(parameter, bound)`; the bound side follows the parameter's polarity.
    pub constraints: Vec<(String, f64)>,
}

/// Either end of a data-flow edge inside a plan.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Producer {
    /// A query input parameter feeds the consumer directly.
    QueryInput(String),
    /// A plan node's output feeds the consumer.
    Service(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consumer {
    /// The edge delivers one of the query's demanded outputs.
    Query,
    Service(String),
}

/// One resolved data dependency: `producer` supplies the consumer's demand
/// for `concept` (the concept is the consumer-side demand being covered).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlanEdge {
    pub producer: Producer,
    pub consumer: Consumer,
    pub concept: String,
}

/// A selected sub-DAG of the dependency graph that serves the query.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompositionPlan {
    /// Abstraction level the node ids live at (0 = concrete services).
    pub level: u8,
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<PlanEdge>,
    pub qos: QoSVector,
}

impl CompositionPlan {
    /// Producers feeding `consumer`, in deterministic order.
    pub fn producers_of(&self, consumer: &Consumer) -> Vec<&PlanEdge> {
        self.edges.iter().filter(|e| &e.consumer == consumer).collect()
    }

    /// Edges leaving `node` (as a service producer).
    pub fn edges_from(&self, node: &str) -> Vec<&PlanEdge> {
        self.edges
            .iter()
            .filter(|e| matches!(&e.producer, Producer::Service(id) if id == node))
            .collect()
    }
}

/// A service projected into concept space: inputs/outputs as concept sets.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceView {
    pub id: String,
    pub inputs: BTreeSet<String>,
    pub outputs: BTreeSet<String>,
    pub pre: Condition,
    pub post: Condition,
    pub qos: QoSVector,
}

impl ServiceView {
    pub fn from_descriptor(onto: &Ontology, s: &ServiceDescriptor) -> Result<Self> {
        let map = |params: &BTreeSet<String>| -> Result<BTreeSet<String>> {
            params
                .iter()
                .map(|p| onto.concept_of(p).map(str::to_string))
                .collect()
        };
        Ok(ServiceView {
            id: s.id.clone(),
            inputs: map(&s.inputs)?,
            outputs: map(&s.outputs)?,
            pre: s.pre.clone(),
            post: s.post.clone(),
            qos: s.qos.clone(),
        })
    }
}

/// A query projected into concept space.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryView {
    /// Provided parameter name → its concept.
    pub input_params: BTreeMap<String, String>,
    /// Concepts available before any service runs.
    pub input_concepts: BTreeSet<String>,
    /// Demanded concept → the output parameter names asking for it.
    pub output_demands: BTreeMap<String, BTreeSet<String>>,
    pub input_spec: Condition,
    pub output_req: Condition,
    pub objectives: Vec<(String, Direction)>,
    pub constraints: Vec<(String, f64)>,
}

impl QueryView {
    pub fn new(onto: &Ontology, q: &Query) -> Result<Self> {
        let mut input_params = BTreeMap::new();
        for p in &q.inputs {
            input_params.insert(p.clone(), onto.concept_of(p)?.to_string());
        }
        let input_concepts = input_params.values().cloned().collect();
        let mut output_demands: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for p in &q.outputs {
            output_demands
                .entry(onto.concept_of(p)?.to_string())
                .or_default()
                .insert(p.clone());
        }
        Ok(QueryView {
            input_params,
            input_concepts,
            output_demands,
            input_spec: q.input_spec.clone(),
            output_req: q.output_req.clone(),
            objectives: q.objectives.clone(),
            constraints: q.constraints.clone(),
        })
    }
}

/// Structural validation of one service against the ontology and the
/// repository's QoS declarations. Violations come back as data; an empty
/// list means the descriptor is well-formed.
pub fn validate_service(onto: &Ontology, specs: &[QoSSpec], s: &ServiceDescriptor) -> Vec<String> {
    let mut v = Vec::new();
    if s.id.is_empty() {
        v.push("service id must be non-empty".to_string());
    }
    if s.inputs.is_empty() {
        v.push(format!("service `{}`: inputs must be non-empty", s.id));
    }
    if s.outputs.is_empty() {
        v.push(format!("service `{}`: outputs must be non-empty", s.id));
    }
    for p in s.inputs.iter().chain(s.outputs.iter()) {
        if !onto.has_parameter(p) {
            v.push(format!("service `{}`: unknown parameter `{p}`", s.id));
        }
    }
    for atom in s.pre.atoms.iter().chain(s.post.atoms.iter()) {
        if !onto.has_atom(atom) {
            v.push(format!("service `{}`: unknown atom `{atom}`", s.id));
        }
    }
    for spec in specs {
        match s.qos.values.get(&spec.name) {
            None => v.push(format!(
                "service `{}`: missing QoS value for `{}`",
                s.id, spec.name
            )),
            Some(&val) => {
                let ok = match spec.aggregation {
                    Aggregation::Multiplicative => (0.0..=1.0).contains(&val),
                    Aggregation::AdditiveCriticalPath | Aggregation::MinBottleneck => {
                        val > 0.0 && val.is_finite()
                    }
                };
                if !ok {
                    v.push(format!(
                        "service `{}`: QoS `{}` = {val} out of range",
                        s.id, spec.name
                    ));
                }
            }
        }
    }
    let declared: BTreeSet<&String> = specs.iter().map(|sp| &sp.name).collect();
    for name in s.qos.values.keys() {
        if !declared.contains(name) {
            v.push(format!("service `{}`: undeclared QoS parameter `{name}`", s.id));
        }
    }
    v
}
