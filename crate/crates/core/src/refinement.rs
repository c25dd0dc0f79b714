//! Constraint-driven refinement of abstract plans.
//!
//! An abstract plan prices each node at its representative's QoS. When that
//! estimate violates a query constraint, the plan is not necessarily dead:
//! every node stands for a pool of members, and *partial refinement* re-picks
//! one member per node, weighting the pick toward the violated parameters.
//! The weights come from how much of each parameter's attainable range the
//! constraint leaves available, so hopeless constraints decline the whole
//! attempt early (there is no assignment worth trying) and comfortable ones
//! drop out of the scoring entirely.
//!
//! When partial refinement declines or fails, *complete refinement* abandons
//! the current abstraction level and retries one level below — a coarser
//! search space traded for exact member visibility — bottoming out at the
//! concrete repository. The orchestrator [`compose_with_refinement`] chains
//! both mechanisms and verifies every candidate on its reconstructed,
//! concrete form before accepting it, so a returned plan satisfies the
//! constraints at level 0 no matter which abstraction produced it.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::abstraction::{select_representative, AbstractionHierarchy};
use crate::composition::{
    aggregate_qos, dependency_graph_at, find_constrained, optimal_single_qos,
    plan_meets_output_req, plan_qos, reconstruct, DependencyGraph, SolveOptions,
};
use crate::model::{
    CompositionPlan, Consumer, Polarity, Producer, QoSSpec, QoSVector, QueryView, ServiceView,
};
use crate::ontology::Ontology;
use crate::repository::RepositoryDocument;
use crate::{Error, Result};

/// Attainable QoS ranges for a plan whose nodes are member pools.
#[derive(Clone, Debug, Serialize)]
pub struct QoSBounds {
    /// Abstract node id → parameter → (min, max) over the node's pool.
    pub node_bounds: BTreeMap<String, BTreeMap<String, (f64, f64)>>,
    /// Parameter → (aggregated min, aggregated max) over the whole plan,
    /// combined with the parameter's own aggregation operator.
    pub aggregated: BTreeMap<String, (f64, f64)>,
}

/// How a partial-refinement pass ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementOutcome {
    /// Re-selection produced a plan meeting every constraint.
    Satisfied,
    /// Some violated constraint is unreachable even at the pool optimum;
    /// re-selection was not attempted.
    Declined,
    /// Re-selection ran but the best reachable assignment still violates.
    Exhausted,
}

/// Everything one partial-refinement pass computed, kept per query —
/// the preprocessing-time hierarchy is never mutated.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementSession {
    /// The input plan with its QoS re-aggregated under the new bindings
    /// (topology is untouched; node and edge sets are identical).
    pub plan: CompositionPlan,
    pub bounds: QoSBounds,
    /// Constraint parameters that were violated on entry.
    pub violated: Vec<String>,
    /// Normalized violation severity per constrained parameter (0 = ignored).
    pub nv: BTreeMap<String, f64>,
    /// Re-selection weights: `nv` scaled to sum to 1.
    pub weights: BTreeMap<String, f64>,
    /// Abstract node id → member chosen under the new weights. Values are
    /// concrete services for level-1 plans and class ids for levels 2 and 3.
    pub rebindings: BTreeMap<String, String>,
    pub outcome: RefinementOutcome,
}

fn spec_named<'a>(specs: &'a [QoSSpec], name: &str) -> Result<&'a QoSSpec> {
    specs
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownQos(name.to_string()))
}

fn violated_constraints(
    specs: &[QoSSpec],
    qos: &QoSVector,
    constraints: &[(String, f64)],
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (param, bound) in constraints {
        let spec = spec_named(specs, param)?;
        if !spec.satisfies(qos.get(param)?, *bound) {
            out.push(param.clone());
        }
    }
    Ok(out)
}

/// A synthetic view map carrying one QoS value per plan node, so the
/// plan-aggregation machinery can run over hypothetical member choices.
fn views_with_qos(values: &BTreeMap<String, QoSVector>) -> BTreeMap<String, ServiceView> {
    values
        .iter()
        .map(|(id, qos)| {
            let view = ServiceView {
                id: id.clone(),
                inputs: BTreeSet::new(),
                outputs: BTreeSet::new(),
                pre: Default::default(),
                post: Default::default(),
                qos: qos.clone(),
            };
            (id.clone(), view)
        })
        .collect()
}

/// Pool bounds plus their plan-level aggregation. Assumes nonnegative QoS
/// values, under which every aggregation operator is monotone in each node's
/// value — so aggregating all-min and all-max values brackets every
/// assignment.
fn bounds_from_pools(
    specs: &[QoSSpec],
    plan: &CompositionPlan,
    pools: &BTreeMap<String, BTreeMap<String, QoSVector>>,
) -> Result<QoSBounds> {
    let mut node_bounds: BTreeMap<String, BTreeMap<String, (f64, f64)>> = BTreeMap::new();
    for (node, pool) in pools {
        let mut per_param = BTreeMap::new();
        for spec in specs {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for qos in pool.values() {
                let v = qos.get(&spec.name)?;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            per_param.insert(spec.name.clone(), (lo, hi));
        }
        node_bounds.insert(node.clone(), per_param);
    }

    let mut aggregated = BTreeMap::new();
    for spec in specs {
        let pick = |side: usize| -> BTreeMap<String, QoSVector> {
            node_bounds
                .iter()
                .map(|(node, per)| {
                    let (lo, hi) = per[&spec.name];
                    let v = if side == 0 { lo } else { hi };
                    (node.clone(), QoSVector::new([(spec.name.clone(), v)]))
                })
                .collect()
        };
        let lo = aggregate_qos(spec, &views_with_qos(&pick(0)), plan)?;
        let hi = aggregate_qos(spec, &views_with_qos(&pick(1)), plan)?;
        aggregated.insert(spec.name.clone(), (lo, hi));
    }
    Ok(QoSBounds {
        node_bounds,
        aggregated,
    })
}

/// Member pool of one abstract node with the QoS each member would bring:
/// concrete services for classes, classes (priced at their representatives)
/// for groups and trees.
fn unrestricted_pool(
    views0: &BTreeMap<String, ServiceView>,
    hierarchy: &AbstractionHierarchy,
    level: u8,
    node: &str,
) -> Result<BTreeMap<String, QoSVector>> {
    let missing = || Error::StaleHierarchy(format!("plan references unknown abstract id: {node}"));
    let collect = |ids: &BTreeSet<String>,
                   views: &BTreeMap<String, ServiceView>|
     -> BTreeMap<String, QoSVector> {
        ids.iter()
            .map(|id| (id.clone(), views[id].qos.clone()))
            .collect()
    };
    match level {
        1 => Ok(collect(
            &hierarchy.class(node).ok_or_else(missing)?.members,
            views0,
        )),
        2 => Ok(collect(
            &hierarchy.group(node).ok_or_else(missing)?.members,
            hierarchy.level1_views(),
        )),
        3 => Ok(collect(
            &hierarchy.tree(node).ok_or_else(missing)?.tree_members,
            hierarchy.level2_views(),
        )),
        _ => Err(Error::InvalidArgument(format!(
            "no member pools at level {level}"
        ))),
    }
}

/// Attainable QoS ranges for an abstract plan, per node and aggregated, over
/// the full (unrestricted) member pools.
pub fn plan_bounds(
    doc: &RepositoryDocument,
    hierarchy: &AbstractionHierarchy,
    plan: &CompositionPlan,
) -> Result<QoSBounds> {
    let views0 = doc.service_views()?;
    let mut pools = BTreeMap::new();
    for node in &plan.nodes {
        pools.insert(
            node.clone(),
            unrestricted_pool(&views0, hierarchy, plan.level, node)?,
        );
    }
    bounds_from_pools(&doc.qos_specs, plan, &pools)
}

/// Group members that can stand in for `node` in this particular plan.
///
/// A member class is eligible when
/// 1. the node's own feed suffices: every member input is covered by what the
///    plan's incoming edges and the query inputs deliver to this node
///    (guaranteeing the substitution survives reconstruction), and its
///    precondition follows from the graph knowledge at the node's layer;
/// 2. the member still produces every concept the plan takes from the node;
/// 3. swapping the node's postcondition for the member's keeps every
///    later plan node's precondition derivable.
///
/// The group root always qualifies: the node planned with the root's
/// signature, so each clause reduces to what the graph already verified.
pub fn level2_candidates(
    onto: &Ontology,
    hierarchy: &AbstractionHierarchy,
    dg: &DependencyGraph,
    query: &QueryView,
    plan: &CompositionPlan,
    node: &str,
) -> Result<BTreeSet<String>> {
    let group = hierarchy
        .group(node)
        .ok_or_else(|| Error::StaleHierarchy(format!("unknown group: {node}")))?;
    eligible_members(onto, hierarchy, dg, query, plan, node, &group.members)
}

fn eligible_members(
    onto: &Ontology,
    hierarchy: &AbstractionHierarchy,
    dg: &DependencyGraph,
    query: &QueryView,
    plan: &CompositionPlan,
    node: &str,
    candidates: &BTreeSet<String>,
) -> Result<BTreeSet<String>> {
    let layer = dg.layer_of(node).ok_or_else(|| {
        Error::InvalidArgument(format!("plan node `{node}` is not in the dependency graph"))
    })?;

    // concepts this node's incoming edges (plus the query) put on its table
    let mut offered = query.input_concepts.clone();
    for e in &plan.edges {
        if matches!(&e.consumer, Consumer::Service(c) if c == node) {
            if let Producer::Service(p) = &e.producer {
                offered.extend(dg.services[p].outputs.iter().cloned());
            }
        }
    }
    // concepts the plan takes from this node
    let demanded: BTreeSet<&String> = plan
        .edges
        .iter()
        .filter(|e| matches!(&e.producer, Producer::Service(p) if p == node))
        .map(|e| &e.concept)
        .collect();

    let knowledge = &dg.knowledge[layer];
    let input_spec_closure = onto.condition_closure(&query.input_spec)?;
    let mut post_closures: BTreeMap<&String, BTreeSet<String>> = BTreeMap::new();
    for dg_layer in &dg.layers {
        for id in dg_layer {
            post_closures.insert(id, onto.condition_closure(&dg.services[id].post)?);
        }
    }
    let mut later_nodes: Vec<(&String, usize)> = Vec::new();
    for m in &plan.nodes {
        let ml = dg.layer_of(m).ok_or_else(|| {
            Error::InvalidArgument(format!("plan node `{m}` is not in the dependency graph"))
        })?;
        if m != node && ml > layer {
            later_nodes.push((m, ml));
        }
    }

    let mut out = BTreeSet::new();
    'candidate: for id in candidates {
        let view = hierarchy
            .level1_views()
            .get(id)
            .ok_or_else(|| Error::StaleHierarchy(format!("unknown class: {id}")))?;
        for demand in &view.inputs {
            if !onto.covers(&offered, demand)? {
                continue 'candidate;
            }
        }
        if !onto.implies(knowledge, &view.pre)? {
            continue 'candidate;
        }
        for concept in &demanded {
            let mut covered = false;
            for o in &view.outputs {
                if onto.subsumes(o, concept)? {
                    covered = true;
                    break;
                }
            }
            if !covered {
                continue 'candidate;
            }
        }
        let candidate_posts = onto.condition_closure(&view.post)?;
        for (m, ml) in &later_nodes {
            let pre = &dg.services[*m].pre;
            let supported = pre.atoms.iter().all(|atom| {
                input_spec_closure.contains(atom)
                    || candidate_posts.contains(atom)
                    || post_closures.iter().any(|(s, closure)| {
                        *s != node
                            && dg.layer_of(s).is_some_and(|l| l < *ml)
                            && closure.contains(atom)
                    })
            });
            if !supported {
                continue 'candidate;
            }
        }
        out.insert(id.clone());
    }
    Ok(out)
}

/// One pass of constraint-driven member re-selection over an abstract plan.
///
/// The pass declines without re-selecting when some violated constraint is
/// out of reach even at its pool-wide best. Otherwise each constrained
/// parameter is scored by how demanding its bound is within the attainable
/// range — parameters safe even at the worst bound score zero and drop out —
/// and every node re-picks its member under those scores. Level-3 nodes pick
/// in two stages (tree member, then that group's eligible classes); level-2
/// pools are pre-filtered to members that can functionally stand in.
///
/// Plans that already satisfy every constraint are a caller bug and are
/// rejected, matching the orchestration flow where refinement only runs on
/// violation. One pass is all there is: a failed re-selection reports
/// `Exhausted` and the caller moves down a level.
pub fn partial_refine(
    doc: &RepositoryDocument,
    hierarchy: &AbstractionHierarchy,
    dg: &DependencyGraph,
    query: &QueryView,
    plan: &CompositionPlan,
) -> Result<RefinementSession> {
    if !(1..=3).contains(&plan.level) {
        return Err(Error::InvalidArgument(format!(
            "partial refinement applies to abstract plans, not level {}",
            plan.level
        )));
    }
    let specs = &doc.qos_specs;
    let onto = &doc.ontology;
    let violated = violated_constraints(specs, &plan.qos, &query.constraints)?;
    if violated.is_empty() {
        return Err(Error::InvalidArgument(
            "plan already satisfies its constraints; nothing to refine".to_string(),
        ));
    }

    let views0 = doc.service_views()?;
    let mut pools: BTreeMap<String, BTreeMap<String, QoSVector>> = BTreeMap::new();
    for node in &plan.nodes {
        let pool = if plan.level == 2 {
            let eligible = level2_candidates(onto, hierarchy, dg, query, plan, node)?;
            if eligible.is_empty() {
                // cannot happen for plans built against this graph — the
                // group root always qualifies — so the plan is foreign
                return Err(Error::StaleHierarchy(format!(
                    "no member of `{node}` fits the plan around it"
                )));
            }
            eligible
                .iter()
                .map(|id| (id.clone(), hierarchy.level1_views()[id].qos.clone()))
                .collect()
        } else {
            unrestricted_pool(&views0, hierarchy, plan.level, node)?
        };
        pools.insert(node.clone(), pool);
    }
    let bounds = bounds_from_pools(specs, plan, &pools)?;

    // (best, worst) per constrained parameter, polarity-resolved
    let mut reach: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for (param, _) in &query.constraints {
        let spec = spec_named(specs, param)?;
        let (lo, hi) = bounds.aggregated[param];
        reach.insert(
            param.clone(),
            match spec.polarity {
                Polarity::Positive => (hi, lo),
                Polarity::Negative => (lo, hi),
            },
        );
    }

    let mut unreachable = false;
    for (param, bound) in &query.constraints {
        if !violated.contains(param) {
            continue;
        }
        let spec = spec_named(specs, param)?;
        if !spec.satisfies(reach[param].0, *bound) {
            unreachable = true;
            break;
        }
    }
    if unreachable {
        return Ok(RefinementSession {
            plan: plan.clone(),
            bounds,
            violated,
            nv: BTreeMap::new(),
            weights: BTreeMap::new(),
            rebindings: BTreeMap::new(),
            outcome: RefinementOutcome::Declined,
        });
    }

    let mut nv: BTreeMap<String, f64> = BTreeMap::new();
    for (param, bound) in &query.constraints {
        let spec = spec_named(specs, param)?;
        let (_, worst) = reach[param];
        let (lo, hi) = bounds.aggregated[param];
        let v = if spec.satisfies(worst, *bound) {
            0.0 // safe under any assignment: keep it out of the scoring
        } else if hi == lo {
            // a degenerate pool that still violates can only mean the current
            // binding fell outside the (restricted) pool; weight it fully
            1.0
        } else {
            match spec.polarity {
                Polarity::Positive => (bound - lo) / (hi - lo),
                Polarity::Negative => (hi - bound) / (hi - lo),
            }
        };
        nv.insert(param.clone(), v);
    }
    let total: f64 = nv.values().sum();
    if total == 0.0 {
        // every constrained parameter is safe across the pools, yet the plan
        // violates: the recorded bindings lie outside the pools
        let weights = nv.clone();
        return Ok(RefinementSession {
            plan: plan.clone(),
            bounds,
            violated,
            nv,
            weights,
            rebindings: BTreeMap::new(),
            outcome: RefinementOutcome::Declined,
        });
    }
    let weights: BTreeMap<String, f64> = nv.iter().map(|(p, v)| (p.clone(), v / total)).collect();

    let mut rebindings: BTreeMap<String, String> = BTreeMap::new();
    let mut chosen_qos: BTreeMap<String, QoSVector> = BTreeMap::new();
    for node in &plan.nodes {
        let member = match plan.level {
            1 | 2 => select_representative(&pools[node], specs, &weights)?,
            _ => {
                let group_id = select_representative(&pools[node], specs, &weights)?;
                let group = hierarchy
                    .group(&group_id)
                    .ok_or_else(|| Error::StaleHierarchy(format!("unknown group: {group_id}")))?;
                let eligible =
                    eligible_members(onto, hierarchy, dg, query, plan, node, &group.members)?;
                if eligible.is_empty() {
                    // the chosen group's root is always eligible (it matches
                    // the tree root's outputs and needs no more than it), so
                    // an empty pool means the plan predates this hierarchy
                    return Err(Error::StaleHierarchy(format!(
                        "no member of `{group_id}` fits the plan around `{node}`"
                    )));
                }
                let pool: BTreeMap<String, QoSVector> = eligible
                    .iter()
                    .map(|id| (id.clone(), hierarchy.level1_views()[id].qos.clone()))
                    .collect();
                select_representative(&pool, specs, &weights)?
            }
        };
        let qos = match plan.level {
            1 => views0[&member].qos.clone(),
            _ => hierarchy.level1_views()[&member].qos.clone(),
        };
        chosen_qos.insert(node.clone(), qos);
        rebindings.insert(node.clone(), member);
    }

    let mut refined = plan.clone();
    refined.qos = plan_qos(specs, &views_with_qos(&chosen_qos), &refined)?;
    let outcome = if violated_constraints(specs, &refined.qos, &query.constraints)?.is_empty() {
        RefinementOutcome::Satisfied
    } else {
        RefinementOutcome::Exhausted
    };
    Ok(RefinementSession {
        plan: refined,
        bounds,
        violated,
        nv,
        weights,
        rebindings,
        outcome,
    })
}

/// Level reversion: the next-coarser search space, bottoming out at the
/// concrete repository.
pub fn complete_refine(level: u8) -> Result<u8> {
    match level {
        1..=3 => Ok(level - 1),
        0 => Err(Error::InvalidArgument(
            "level 0 is the original repository; nothing to revert to".to_string(),
        )),
        _ => Err(Error::InvalidArgument(format!(
            "abstraction level must be 0..=3, got {level}"
        ))),
    }
}

/// One step of the end-to-end composition loop, for the trace.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RefinementEvent {
    /// A constraint-satisfying plan was found and verified at this level.
    Solved { level: u8 },
    /// The constrained search found nothing at this level.
    NoPlanAtLevel { level: u8 },
    /// A partial-refinement pass ran on the level's best fallback plan.
    PartialRefinement {
        level: u8,
        violated: Vec<String>,
        nv: BTreeMap<String, f64>,
        weights: BTreeMap<String, f64>,
        rebindings: BTreeMap<String, String>,
        outcome: RefinementOutcome,
    },
    /// An abstract plan passed its checks but its concrete form violated a
    /// constraint or the output requirement (two nodes can collapse onto one
    /// concrete service, which may stretch an additive critical path past
    /// the abstract estimate); the level is abandoned.
    ReconstructedPlanViolated { level: u8, violated: Vec<String> },
    /// Level reversion.
    CompleteRefinement { from: u8, to: u8 },
}

/// A verified level-0 plan plus where and how it was found.
#[derive(Clone, Debug, Serialize)]
pub struct ComposeResult {
    pub plan: CompositionPlan,
    /// Abstraction level whose search produced the plan.
    pub level_used: u8,
    pub trace: Vec<RefinementEvent>,
}

/// Outcome of the full composition loop.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ComposeOutcome {
    Solved(ComposeResult),
    /// No level, down to the concrete repository, holds a satisfying plan.
    NoSolution { trace: Vec<RefinementEvent> },
}

/// Composes `query` starting at `start_level`, refining on violation.
///
/// Per level: run the constrained search; on success reconstruct to level 0
/// and accept only if the concrete plan still meets every constraint and the
/// output requirement. When the search comes up empty, fall back to the
/// single-parameter optimum, and if that violates constraints attempt one
/// partial-refinement pass; a satisfied pass is reconstructed and verified
/// the same way. Anything else reverts one level and retries. At level 0 the
/// search is exhaustive over concrete services, so failure there is a
/// verified no-solution.
///
/// Timeouts from the constrained search propagate as errors, distinct from
/// no-solution. The deadline applies per level.
pub fn compose_with_refinement(
    doc: &RepositoryDocument,
    hierarchy: &AbstractionHierarchy,
    query: &QueryView,
    start_level: u8,
    options: &SolveOptions,
) -> Result<ComposeOutcome> {
    if start_level > 3 {
        return Err(Error::InvalidArgument(format!(
            "abstraction level must be 0..=3, got {start_level}"
        )));
    }
    let onto = &doc.ontology;
    let specs = &doc.qos_specs;
    let views0 = doc.service_views()?;
    let mut trace: Vec<RefinementEvent> = Vec::new();
    let mut level = start_level;

    loop {
        let dg = dependency_graph_at(doc, hierarchy, query, level)?;

        // a candidate abstract plan is only accepted on its concrete form
        let verify = |plan: &CompositionPlan,
                          rebindings: &BTreeMap<String, String>,
                          trace: &mut Vec<RefinementEvent>|
         -> Result<Option<CompositionPlan>> {
            let concrete = reconstruct(doc, hierarchy, query, plan, rebindings)?;
            let mut violated = violated_constraints(specs, &concrete.qos, &query.constraints)?;
            if violated.is_empty() && !plan_meets_output_req(onto, &views0, query, &concrete)? {
                violated.push("output requirement".to_string());
            }
            if violated.is_empty() {
                trace.push(RefinementEvent::Solved { level });
                Ok(Some(concrete))
            } else {
                trace.push(RefinementEvent::ReconstructedPlanViolated { level, violated });
                Ok(None)
            }
        };

        match find_constrained(onto, &dg, query, specs, options)? {
            Some(plan) => {
                if let Some(concrete) = verify(&plan, &BTreeMap::new(), &mut trace)? {
                    return Ok(ComposeOutcome::Solved(ComposeResult {
                        plan: concrete,
                        level_used: level,
                        trace,
                    }));
                }
            }
            None => {
                trace.push(RefinementEvent::NoPlanAtLevel { level });
                if level > 0 {
                    let objective = query
                        .objectives
                        .first()
                        .map(|(p, _)| p.clone())
                        .or_else(|| query.constraints.first().map(|(p, _)| p.clone()))
                        .or_else(|| specs.first().map(|s| s.name.clone()));
                    let fallback = match &objective {
                        Some(param) => match optimal_single_qos(onto, &dg, query, specs, param) {
                            Ok(plan) => Some(plan),
                            Err(Error::NoSolution) => None,
                            Err(e) => return Err(e),
                        },
                        None => None,
                    };
                    if let Some(plan) = fallback {
                        if !violated_constraints(specs, &plan.qos, &query.constraints)?.is_empty()
                        {
                            let session = partial_refine(doc, hierarchy, &dg, query, &plan)?;
                            trace.push(RefinementEvent::PartialRefinement {
                                level,
                                violated: session.violated.clone(),
                                nv: session.nv.clone(),
                                weights: session.weights.clone(),
                                rebindings: session.rebindings.clone(),
                                outcome: session.outcome,
                            });
                            if session.outcome == RefinementOutcome::Satisfied {
                                if let Some(concrete) =
                                    verify(&session.plan, &session.rebindings, &mut trace)?
                                {
                                    return Ok(ComposeOutcome::Solved(ComposeResult {
                                        plan: concrete,
                                        level_used: level,
                                        trace,
                                    }));
                                }
                            }
                        }
                        // a fallback plan that satisfies constraints but was
                        // not found by the search failed the output
                        // requirement; nothing to refine, drop a level
                    }
                }
            }
        }

        if level == 0 {
            return Ok(ComposeOutcome::NoSolution { trace });
        }
        let next = complete_refine(level)?;
        trace.push(RefinementEvent::CompleteRefinement {
            from: level,
            to: next,
        });
        level = next;
    }
}
