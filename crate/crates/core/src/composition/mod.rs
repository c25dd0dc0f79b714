//! Dependency-graph construction and plan search.
//!
//! Composition starts from a query's provided inputs and repeatedly activates
//! every service whose input concepts are covered and whose precondition is
//! implied by the accumulated knowledge. The least fixpoint of that process,
//! organized into layers by earliest activation, is the dependency graph —
//! the search space every solver in this module works on. The same builder
//! runs unchanged against abstract service views, which is how the
//! abstraction levels shrink the search space without changing the planners.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{QueryView, ServiceView};
use crate::ontology::{Condition, Ontology};
use crate::Result;

pub mod aggregate;
pub mod counting;
pub mod reconstruct;
pub mod solve;

pub use aggregate::{aggregate_qos, plan_meets_output_req, plan_qos, validate_plan};
pub use counting::{count_plans, enumerate_plans};
pub use reconstruct::reconstruct;
pub use solve::{find_constrained, optimal_single_qos, solution_qos_bounds, SolveOptions};

/// Layered least fixpoint of service activation for one query.
#[derive(Clone, Debug)]
pub struct DependencyGraph {
    /// Abstraction level the views came from (0 = concrete).
    pub level: u8,
    /// `layers[k]` = services first activatable with the concepts and
    /// knowledge available after layers `< k`.
    pub layers: Vec<BTreeSet<String>>,
    /// `available_concepts[k]` = concepts on hand before layer `k` runs
    /// (query inputs at 0); the last entry is the final coverage.
    pub available_concepts: Vec<BTreeSet<String>>,
    /// `knowledge[k]` = accumulated condition before layer `k` runs
    /// (query input spec at 0, then conjoined with every activated
    /// service's postcondition).
    pub knowledge: Vec<Condition>,
    /// Views of every candidate service, activated or not.
    pub services: BTreeMap<String, ServiceView>,
    layer_of: BTreeMap<String, usize>,
}

impl DependencyGraph {
    pub fn layer_of(&self, id: &str) -> Option<usize> {
        self.layer_of.get(id).copied()
    }

    pub fn is_active(&self, id: &str) -> bool {
        self.layer_of.contains_key(id)
    }

    /// Number of activated services across all layers.
    pub fn active_count(&self) -> usize {
        self.layers.iter().map(BTreeSet::len).sum()
    }

    /// Concepts available once every layer has run.
    pub fn final_available(&self) -> &BTreeSet<String> {
        self.available_concepts
            .last()
            .expect("available_concepts is never empty")
    }

    /// True when every demanded query output is covered by the graph.
    pub fn covers_query(&self, onto: &Ontology, query: &QueryView) -> Result<bool> {
        let available = self.final_available();
        for demand in query.output_demands.keys() {
            if !onto.covers(available, demand)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Activation test: every input demand is covered by an available concept and
/// the precondition follows from the accumulated knowledge.
pub fn is_activated(
    onto: &Ontology,
    view: &ServiceView,
    available: &BTreeSet<String>,
    knowledge: &Condition,
) -> Result<bool> {
    for demand in &view.inputs {
        if !onto.covers(available, demand)? {
            return Ok(false);
        }
    }
    onto.implies(knowledge, &view.pre)
}

/// Builds the layered dependency graph for `query` over `views`.
///
/// `suppressions` only matters at level 3: when a tree is activated (or is a
/// candidate in the same layer), other candidates whose root lies inside its
/// tree are redundant — every plan through them exists through the container —
/// and are dropped. Mutual containment keeps the lexicographically smallest.
/// Suppression never removes an already-activated service.
pub fn build_dependency_graph(
    onto: &Ontology,
    views: &BTreeMap<String, ServiceView>,
    query: &QueryView,
    level: u8,
    suppressions: Option<&BTreeMap<String, BTreeSet<String>>>,
) -> Result<DependencyGraph> {
    let mut layers: Vec<BTreeSet<String>> = Vec::new();
    let mut available_concepts = vec![query.input_concepts.clone()];
    let mut knowledge = vec![query.input_spec.clone()];
    let mut layer_of: BTreeMap<String, usize> = BTreeMap::new();

    loop {
        let available = available_concepts.last().unwrap();
        let known = knowledge.last().unwrap();
        let mut candidates: BTreeSet<String> = BTreeSet::new();
        for (id, view) in views {
            if !layer_of.contains_key(id) && is_activated(onto, view, available, known)? {
                candidates.insert(id.clone());
            }
        }
        if let Some(sup) = suppressions {
            let mut suppressors: BTreeSet<String> = layer_of.keys().cloned().collect();
            suppressors.extend(candidates.iter().cloned());
            let kept: BTreeSet<String> = candidates
                .iter()
                .filter(|b| {
                    !suppressors
                        .iter()
                        .any(|a| a != *b && sup.get(a).is_some_and(|s| s.contains(*b)))
                })
                .cloned()
                .collect();
            candidates = kept;
        }
        if candidates.is_empty() {
            break;
        }

        let mut next_available = available.clone();
        let mut next_knowledge = known.clone();
        for id in &candidates {
            let view = &views[id];
            next_available.extend(view.outputs.iter().cloned());
            next_knowledge = next_knowledge.and(&view.post);
        }
        let k = layers.len();
        for id in &candidates {
            layer_of.insert(id.clone(), k);
        }
        layers.push(candidates);
        available_concepts.push(next_available);
        knowledge.push(next_knowledge);
    }

    Ok(DependencyGraph {
        level,
        layers,
        available_concepts,
        knowledge,
        services: views.clone(),
        layer_of,
    })
}

/// Builds the dependency graph for `query` at an abstraction level, wiring in
/// the level's views and, at level 3, the tree-containment suppressions.
pub fn dependency_graph_at(
    doc: &crate::repository::RepositoryDocument,
    hierarchy: &crate::abstraction::AbstractionHierarchy,
    query: &QueryView,
    level: u8,
) -> Result<DependencyGraph> {
    let views = hierarchy.views_at_level(doc, level)?;
    let suppressions = (level == 3).then(|| hierarchy.tree_suppressions());
    build_dependency_graph(&doc.ontology, &views, query, level, suppressions.as_ref())
}

/// Producer choice for one demanded concept.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Choice {
    /// A query input parameter (weightless).
    Input(String),
    /// An activated service and its layer.
    Svc(String, usize),
}

/// Producers eligible to feed `demand` for a consumer that runs at
/// `layer_limit` (services strictly earlier; `layers.len()` admits everyone,
/// which is the rule for query outputs). Query inputs are always eligible,
/// one choice per matching parameter.
pub(crate) fn eligible_producers(
    onto: &Ontology,
    dg: &DependencyGraph,
    query: &QueryView,
    demand: &str,
    layer_limit: usize,
) -> Result<Vec<Choice>> {
    let mut out = Vec::new();
    for (param, concept) in &query.input_params {
        if onto.subsumes(concept, demand)? {
            out.push(Choice::Input(param.clone()));
        }
    }
    for (k, layer) in dg.layers.iter().enumerate().take(layer_limit) {
        for id in layer {
            let view = &dg.services[id];
            for o in &view.outputs {
                if onto.subsumes(o, demand)? {
                    out.push(Choice::Svc(id.clone(), k));
                    break;
                }
            }
        }
    }
    Ok(out)
}
