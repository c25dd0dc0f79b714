//! Reference implementations the acceptance suite checks the library against.
//!
//! Everything here is rebuilt from first principles on top of the raw
//! repository data: subsumption and implication closures are saturated from
//! the edge lists, activation re-runs the layered fixpoint over plain sets,
//! plans are materialized as whole edge-sets by a straight recursive
//! enumeration, and QoS is re-aggregated from those edge-sets. None of it
//! shares search or caching logic with the library — agreement between the
//! two routes is what the acceptance criteria measure.

use std::collections::{BTreeMap, BTreeSet};

use qosc_core::model::{Aggregation, Polarity, QoSSpec, Query, ServiceView};
use qosc_core::repository::RepositoryDocument;

/// `(producer, consumer, concept)` with producers encoded as `in:<param>` or
/// `svc:<id>` and consumers as `query` or `svc:<id>`.
pub type RefEdge = (String, String, String);
pub type EdgeSet = BTreeSet<RefEdge>;

/// Closure tables recomputed from the raw ontology data.
pub struct World {
    /// concept → all super-concepts, including itself.
    sups: BTreeMap<String, BTreeSet<String>>,
    /// atom → all implied atoms, including itself.
    implied: BTreeMap<String, BTreeSet<String>>,
    /// parameter name → concept.
    params: BTreeMap<String, String>,
}

impl World {
    pub fn new(doc: &RepositoryDocument) -> World {
        let onto = &doc.ontology;
        World {
            sups: saturate(onto.concepts(), onto.subsumption_edges()),
            implied: saturate(onto.atoms(), onto.atom_implications()),
            params: onto.parameter_map().clone(),
        }
    }

    /// `sub ⊑ sup` in the reflexive-transitive closure.
    pub fn le(&self, sub: &str, sup: &str) -> bool {
        self.sups.get(sub).is_some_and(|s| s.contains(sup))
    }

    pub fn concept_of(&self, param: &str) -> &str {
        &self.params[param]
    }

    /// Atoms entailed by `atoms` under the implication closure.
    pub fn close(&self, atoms: &BTreeSet<String>) -> BTreeSet<String> {
        atoms
            .iter()
            .flat_map(|a| self.implied[a].iter().cloned())
            .collect()
    }

    /// Every atom of `want` follows from `have`.
    pub fn entails(&self, have: &BTreeSet<String>, want: &BTreeSet<String>) -> bool {
        let closed = self.close(have);
        want.iter().all(|a| closed.contains(a))
    }

    /// Some available concept refines `demand`.
    pub fn covered(&self, available: &BTreeSet<String>, demand: &str) -> bool {
        available.iter().any(|c| self.le(c, demand))
    }
}

/// Fixpoint saturation of `item → ancestors` from a raw edge list.
fn saturate(
    items: &BTreeSet<String>,
    edges: &BTreeSet<(String, String)>,
) -> BTreeMap<String, BTreeSet<String>> {
    let mut up: BTreeMap<String, BTreeSet<String>> = items
        .iter()
        .map(|c| (c.clone(), [c.clone()].into()))
        .collect();
    loop {
        let mut changed = false;
        for (sub, sup) in edges {
            let add = up[sup].clone();
            let entry = up.get_mut(sub).expect("edge endpoint not declared");
            let before = entry.len();
            entry.extend(add);
            changed |= entry.len() != before;
        }
        if !changed {
            return up;
        }
    }
}

/// A service reduced to the sets the composition semantics actually read.
#[derive(Clone, Debug)]
pub struct RefSvc {
    pub inputs: BTreeSet<String>,
    pub outputs: BTreeSet<String>,
    pub pre: BTreeSet<String>,
    pub post: BTreeSet<String>,
    pub qos: BTreeMap<String, f64>,
}

/// Concrete services straight from the document descriptors, with parameter
/// names resolved to concepts by the [`World`]'s own map.
pub fn raw_services(world: &World, doc: &RepositoryDocument) -> BTreeMap<String, RefSvc> {
    doc.services
        .iter()
        .map(|s| {
            (
                s.id.clone(),
                RefSvc {
                    inputs: s.inputs.iter().map(|p| world.concept_of(p).to_string()).collect(),
                    outputs: s.outputs.iter().map(|p| world.concept_of(p).to_string()).collect(),
                    pre: s.pre.atoms.clone(),
                    post: s.post.atoms.clone(),
                    qos: s.qos.values.clone(),
                },
            )
        })
        .collect()
}

/// Abstract services from a set of library views (the hierarchy under test
/// supplies the signatures; activation and counting stay independent).
pub fn view_services(views: &BTreeMap<String, ServiceView>) -> BTreeMap<String, RefSvc> {
    views
        .iter()
        .map(|(id, v)| {
            (
                id.clone(),
                RefSvc {
                    inputs: v.inputs.clone(),
                    outputs: v.outputs.clone(),
                    pre: v.pre.atoms.clone(),
                    post: v.post.atoms.clone(),
                    qos: v.qos.values.clone(),
                },
            )
        })
        .collect()
}

/// A query reduced to sets, resolved through the [`World`]'s parameter map.
pub struct RefQuery {
    /// Provided parameter → its concept.
    pub input_params: BTreeMap<String, String>,
    pub input_concepts: BTreeSet<String>,
    pub input_spec: BTreeSet<String>,
    /// Demanded output concepts (deduplicated).
    pub demands: BTreeSet<String>,
    pub output_req: BTreeSet<String>,
    pub constraints: Vec<(String, f64)>,
}

pub fn ref_query(world: &World, query: &Query) -> RefQuery {
    let input_params: BTreeMap<String, String> = query
        .inputs
        .iter()
        .map(|p| (p.clone(), world.concept_of(p).to_string()))
        .collect();
    RefQuery {
        input_concepts: input_params.values().cloned().collect(),
        input_params,
        input_spec: query.input_spec.atoms.clone(),
        demands: query
            .outputs
            .iter()
            .map(|p| world.concept_of(p).to_string())
            .collect(),
        output_req: query.output_req.atoms.clone(),
        constraints: query.constraints.clone(),
    }
}

/// Layered activation fixpoint, recomputed over the reference sets.
pub struct Activation {
    pub layers: Vec<BTreeSet<String>>,
    pub final_available: BTreeSet<String>,
}

/// Runs the activation fixpoint: a service joins the earliest layer whose
/// accumulated concepts cover all its inputs and whose accumulated knowledge
/// entails its precondition. `suppressions` (level 3 only) drops a candidate
/// whenever any active or simultaneously-candidate service contains it.
pub fn activate(
    world: &World,
    services: &BTreeMap<String, RefSvc>,
    query: &RefQuery,
    suppressions: Option<&BTreeMap<String, BTreeSet<String>>>,
) -> Activation {
    let mut layers: Vec<BTreeSet<String>> = Vec::new();
    let mut active: BTreeSet<String> = BTreeSet::new();
    let mut available = query.input_concepts.clone();
    let mut knowledge = query.input_spec.clone();
    loop {
        let mut candidates: BTreeSet<String> = services
            .iter()
            .filter(|(id, s)| {
                !active.contains(*id)
                    && s.inputs.iter().all(|d| world.covered(&available, d))
                    && world.entails(&knowledge, &s.pre)
            })
            .map(|(id, _)| id.clone())
            .collect();
        if let Some(sup) = suppressions {
            let suppressors: BTreeSet<String> =
                active.union(&candidates).cloned().collect();
            candidates.retain(|b| {
                !suppressors
                    .iter()
                    .any(|a| a != b && sup.get(a).is_some_and(|inside| inside.contains(b)))
            });
        }
        if candidates.is_empty() {
            return Activation {
                layers,
                final_available: available,
            };
        }
        for id in &candidates {
            available.extend(services[id].outputs.iter().cloned());
            knowledge.extend(services[id].post.iter().cloned());
        }
        active.extend(candidates.iter().cloned());
        layers.push(candidates);
    }
}

/// Producers able to feed `demand` for a consumer running at `layer_limit`:
/// every matching query input parameter, plus every service activated in an
/// earlier layer with an output refining the demand.
fn producers(
    world: &World,
    services: &BTreeMap<String, RefSvc>,
    query: &RefQuery,
    act: &Activation,
    demand: &str,
    layer_limit: usize,
) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for (param, concept) in &query.input_params {
        if world.le(concept, demand) {
            out.push((format!("in:{param}"), 0));
        }
    }
    for (k, layer) in act.layers.iter().enumerate().take(layer_limit) {
        for id in layer {
            if services[id].outputs.iter().any(|o| world.le(o, demand)) {
                out.push((format!("svc:{id}"), k));
            }
        }
    }
    out
}

/// Exhaustively enumerates every plan as a closed edge-set: one producer per
/// obligation, a chosen service's own inputs becoming obligations the first
/// time it is picked. Panics past `cap` so runaway spaces fail loudly.
pub fn enumerate(
    world: &World,
    services: &BTreeMap<String, RefSvc>,
    query: &RefQuery,
    act: &Activation,
    cap: usize,
) -> BTreeSet<EdgeSet> {
    fn go(
        world: &World,
        services: &BTreeMap<String, RefSvc>,
        query: &RefQuery,
        act: &Activation,
        pending: &mut Vec<(String, String, usize)>,
        chosen: &mut BTreeSet<String>,
        edges: &mut EdgeSet,
        out: &mut BTreeSet<EdgeSet>,
        cap: usize,
    ) {
        let Some((demand, consumer, limit)) = pending.pop() else {
            assert!(out.len() < cap, "reference enumeration exceeded {cap} plans");
            out.insert(edges.clone());
            return;
        };
        for (producer, layer) in producers(world, services, query, act, &demand, limit) {
            let edge = (producer.clone(), consumer.clone(), demand.clone());
            edges.insert(edge.clone());
            let expand = producer
                .strip_prefix("svc:")
                .filter(|id| !chosen.contains(*id))
                .map(str::to_string);
            let mut pushed = 0;
            if let Some(id) = &expand {
                chosen.insert(id.clone());
                for d in &services[id].inputs {
                    pending.push((d.clone(), format!("svc:{id}"), layer));
                    pushed += 1;
                }
            }
            go(world, services, query, act, pending, chosen, edges, out, cap);
            for _ in 0..pushed {
                pending.pop();
            }
            if let Some(id) = &expand {
                chosen.remove(id);
            }
            edges.remove(&edge);
        }
        pending.push((demand, consumer, limit));
    }

    let mut pending: Vec<(String, String, usize)> = query
        .demands
        .iter()
        .rev()
        .map(|d| (d.clone(), "query".to_string(), act.layers.len()))
        .collect();
    let mut out = BTreeSet::new();
    go(
        world,
        services,
        query,
        act,
        &mut pending,
        &mut BTreeSet::new(),
        &mut BTreeSet::new(),
        &mut out,
        cap,
    );
    out
}

/// Service ids appearing in an edge-set (as producers or consumers).
pub fn plan_nodes(edges: &EdgeSet) -> BTreeSet<String> {
    edges
        .iter()
        .flat_map(|(p, c, _)| [p, c])
        .filter_map(|side| side.strip_prefix("svc:"))
        .map(str::to_string)
        .collect()
}

/// Re-aggregates one QoS parameter over an edge-set from its definition:
/// longest node-weighted dependency path, product over nodes, or minimum
/// over nodes; empty plans take the parameter's neutral value.
pub fn aggregate(services: &BTreeMap<String, RefSvc>, spec: &QoSSpec, edges: &EdgeSet) -> f64 {
    let nodes = plan_nodes(edges);
    if nodes.is_empty() {
        return match spec.aggregation {
            Aggregation::AdditiveCriticalPath => 0.0,
            Aggregation::Multiplicative => 1.0,
            Aggregation::MinBottleneck => f64::INFINITY,
        };
    }
    let weight = |id: &String| services[id].qos[&spec.name];
    match spec.aggregation {
        Aggregation::AdditiveCriticalPath => {
            let mut preds: BTreeMap<&String, BTreeSet<&String>> =
                nodes.iter().map(|n| (n, BTreeSet::new())).collect();
            for (p, c, _) in edges {
                if let (Some(a), Some(b)) = (p.strip_prefix("svc:"), c.strip_prefix("svc:")) {
                    if a != b {
                        let (a, b) = (a.to_string(), b.to_string());
                        let key = nodes.get(&b).expect("consumer is a node");
                        preds.get_mut(key).unwrap().insert(nodes.get(&a).unwrap());
                    }
                }
            }
            let mut dp: BTreeMap<&String, f64> = BTreeMap::new();
            let mut best = 0.0f64;
            while dp.len() < nodes.len() {
                let ready: Vec<&String> = nodes
                    .iter()
                    .filter(|n| !dp.contains_key(*n) && preds[*n].iter().all(|p| dp.contains_key(*p)))
                    .collect();
                assert!(!ready.is_empty(), "plan edge-set has a dependency cycle");
                for n in ready {
                    let longest_in = preds[n].iter().map(|p| dp[*p]).fold(0.0f64, f64::max);
                    let v = weight(n) + longest_in;
                    best = best.max(v);
                    dp.insert(n, v);
                }
            }
            best
        }
        Aggregation::Multiplicative => {
            let mut v = 1.0;
            for id in &nodes {
                v *= weight(id);
            }
            v
        }
        Aggregation::MinBottleneck => {
            let mut v = f64::INFINITY;
            for id in &nodes {
                v = v.min(weight(id));
            }
            v
        }
    }
}

/// A value satisfies a bound according to the parameter's polarity.
pub fn satisfies(spec: &QoSSpec, value: f64, bound: f64) -> bool {
    match spec.polarity {
        Polarity::Positive => value >= bound,
        Polarity::Negative => value <= bound,
    }
}

/// The query's output requirement follows from the joint postconditions of
/// the services that deliver directly to the query (vacuously true when the
/// requirement is empty).
pub fn meets_output_req(
    world: &World,
    services: &BTreeMap<String, RefSvc>,
    query: &RefQuery,
    edges: &EdgeSet,
) -> bool {
    if query.output_req.is_empty() {
        return true;
    }
    let mut post: BTreeSet<String> = BTreeSet::new();
    for (p, c, _) in edges {
        if c == "query" {
            if let Some(id) = p.strip_prefix("svc:") {
                post.extend(services[id].post.iter().cloned());
            }
        }
    }
    world.entails(&post, &query.output_req)
}

/// Best aggregated value of `spec` over a set of plans (`None` if empty).
pub fn best_value(
    services: &BTreeMap<String, RefSvc>,
    spec: &QoSSpec,
    plans: &BTreeSet<EdgeSet>,
) -> Option<f64> {
    plans
        .iter()
        .map(|p| aggregate(services, spec, p))
        .reduce(|a, b| match spec.polarity {
            Polarity::Positive => a.max(b),
            Polarity::Negative => a.min(b),
        })
}

/// Whether some enumerated plan meets every constraint and the output
/// requirement.
pub fn exists_satisfying(
    world: &World,
    services: &BTreeMap<String, RefSvc>,
    query: &RefQuery,
    specs: &[QoSSpec],
    plans: &BTreeSet<EdgeSet>,
) -> bool {
    let spec_of = |name: &str| specs.iter().find(|s| s.name == name).expect("declared spec");
    plans.iter().any(|plan| {
        query
            .constraints
            .iter()
            .all(|(name, bound)| satisfies(spec_of(name), aggregate(services, spec_of(name), plan), *bound))
            && meets_output_req(world, services, query, plan)
    })
}

/// All ordered reachable pairs `(u, v)`, `u ≠ v`, by Floyd–Warshall.
pub fn reachable_pairs(
    nodes: &BTreeSet<String>,
    edges: &BTreeSet<(String, String)>,
) -> BTreeSet<(String, String)> {
    let ids: Vec<&String> = nodes.iter().collect();
    let idx: BTreeMap<&String, usize> = ids.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let n = ids.len();
    let mut m = vec![false; n * n];
    for (u, v) in edges {
        m[idx[u] * n + idx[v]] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if m[i * n + k] {
                for j in 0..n {
                    if m[k * n + j] {
                        m[i * n + j] = true;
                    }
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[i * n + j] {
                out.insert((ids[i].clone(), ids[j].clone()));
            }
        }
    }
    out
}

/// Transitive reduction of a DAG from the definition: keep an edge iff no
/// intermediate node sits on an alternative path between its endpoints.
pub fn reduction_oracle(
    nodes: &BTreeSet<String>,
    edges: &BTreeSet<(String, String)>,
) -> BTreeSet<(String, String)> {
    let reach = reachable_pairs(nodes, edges);
    edges
        .iter()
        .filter(|(u, v)| {
            !nodes.iter().any(|w| {
                w != u && w != v
                    && reach.contains(&(u.clone(), w.clone()))
                    && reach.contains(&(w.clone(), v.clone()))
            })
        })
        .cloned()
        .collect()
}
