//! Plan-level QoS aggregation and structural plan validation.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    Aggregation, CompositionPlan, Consumer, Producer, QoSSpec, QoSVector, QueryView, ServiceView,
};
use crate::ontology::{Condition, Ontology};
use crate::{Error, Result};

/// Service-to-service predecessor map of a plan (query inputs and the query
/// sink are weightless and don't appear).
fn predecessors(plan: &CompositionPlan) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut preds: BTreeMap<&str, BTreeSet<&str>> =
        plan.nodes.iter().map(|n| (n.as_str(), BTreeSet::new())).collect();
    for edge in &plan.edges {
        if let (Producer::Service(a), Consumer::Service(b)) = (&edge.producer, &edge.consumer) {
            if a != b && plan.nodes.contains(a) {
                if let Some(set) = preds.get_mut(b.as_str()) {
                    set.insert(a.as_str());
                }
            }
        }
    }
    preds
}

/// Service ids in dependency order, or an error if the plan has a cycle.
fn topological_order(plan: &CompositionPlan) -> Result<Vec<String>> {
    let preds = predecessors(plan);
    let mut indegree: BTreeMap<&str, usize> =
        preds.iter().map(|(n, ps)| (*n, ps.len())).collect();
    let mut succs: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (n, ps) in &preds {
        for &p in ps {
            succs.entry(p).or_default().push(*n);
        }
    }
    let mut ready: Vec<&str> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut order = Vec::with_capacity(plan.nodes.len());
    while let Some(n) = ready.pop() {
        order.push(n.to_string());
        for &m in succs.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indegree.get_mut(m).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(m);
            }
        }
    }
    if order.len() != plan.nodes.len() {
        return Err(Error::InvalidArgument(
            "plan has a dependency cycle".to_string(),
        ));
    }
    Ok(order)
}

/// Aggregates one QoS parameter over a plan: longest node-weighted path for
/// additive parameters, product over nodes for multiplicative, minimum over
/// nodes for bottleneck. Empty plans take the parameter's neutral value.
pub fn aggregate_qos(
    spec: &QoSSpec,
    views: &BTreeMap<String, ServiceView>,
    plan: &CompositionPlan,
) -> Result<f64> {
    if plan.nodes.is_empty() {
        return Ok(spec.empty_plan_value());
    }
    let weight = |id: &str| -> Result<f64> {
        views
            .get(id)
            .ok_or_else(|| Error::UnknownService(id.to_string()))?
            .qos
            .get(&spec.name)
    };
    match spec.aggregation {
        Aggregation::AdditiveCriticalPath => {
            let preds = predecessors(plan);
            let order = topological_order(plan)?;
            let mut dp: BTreeMap<&str, f64> = BTreeMap::new();
            let mut best = 0.0f64;
            for id in &order {
                let longest_in = preds[id.as_str()]
                    .iter()
                    .map(|p| dp[p])
                    .fold(0.0f64, f64::max);
                let v = weight(id)? + longest_in;
                best = best.max(v);
                dp.insert(id.as_str(), v);
            }
            Ok(best)
        }
        Aggregation::Multiplicative => {
            let mut v = 1.0;
            for id in &plan.nodes {
                v *= weight(id)?;
            }
            Ok(v)
        }
        Aggregation::MinBottleneck => {
            let mut v = f64::INFINITY;
            for id in &plan.nodes {
                v = v.min(weight(id)?);
            }
            Ok(v)
        }
    }
}

/// Aggregates every declared parameter into one vector.
pub fn plan_qos(
    specs: &[QoSSpec],
    views: &BTreeMap<String, ServiceView>,
    plan: &CompositionPlan,
) -> Result<QoSVector> {
    let mut values = BTreeMap::new();
    for spec in specs {
        values.insert(spec.name.clone(), aggregate_qos(spec, views, plan)?);
    }
    Ok(QoSVector { values })
}

/// Output-requirement check: the conjoined postconditions of the services
/// chosen to deliver the query outputs must imply the requirement. Vacuously
/// true when no requirement is stated.
pub fn plan_meets_output_req(
    onto: &Ontology,
    views: &BTreeMap<String, ServiceView>,
    query: &QueryView,
    plan: &CompositionPlan,
) -> Result<bool> {
    if query.output_req.is_true() {
        return Ok(true);
    }
    let mut delivered = Condition::truth();
    for edge in &plan.edges {
        if edge.consumer == Consumer::Query {
            if let Producer::Service(id) = &edge.producer {
                let view = views
                    .get(id)
                    .ok_or_else(|| Error::UnknownService(id.clone()))?;
                delivered = delivered.and(&view.post);
            }
        }
    }
    onto.implies(&delivered, &query.output_req)
}

/// Structural validation of a plan against its level's views and the query.
/// Over-feeding edges (a producer covering a concept its consumer no longer
/// demands) are legal — substitution keeps them — but every actual demand
/// must be fed by a producer that really covers it.
pub fn validate_plan(
    onto: &Ontology,
    views: &BTreeMap<String, ServiceView>,
    query: &QueryView,
    plan: &CompositionPlan,
) -> Vec<String> {
    let mut problems = Vec::new();
    for id in &plan.nodes {
        if !views.contains_key(id) {
            problems.push(format!("plan node `{id}` is not a known service"));
        }
    }

    let produces = |producer: &Producer, concept: &str| -> bool {
        match producer {
            Producer::QueryInput(param) => query
                .input_params
                .get(param)
                .is_some_and(|c| onto.subsumes(c, concept).unwrap_or(false)),
            Producer::Service(id) => views.get(id).is_some_and(|v| {
                v.outputs
                    .iter()
                    .any(|o| onto.subsumes(o, concept).unwrap_or(false))
            }),
        }
    };

    for edge in &plan.edges {
        if !onto.has_concept(&edge.concept) {
            problems.push(format!("edge references unknown concept `{}`", edge.concept));
            continue;
        }
        match &edge.producer {
            Producer::QueryInput(param) => {
                if !query.input_params.contains_key(param) {
                    problems.push(format!("edge producer `{param}` is not a query input"));
                    continue;
                }
            }
            Producer::Service(id) => {
                if !plan.nodes.contains(id) {
                    problems.push(format!("edge producer `{id}` is not a plan node"));
                    continue;
                }
            }
        }
        if let Consumer::Service(id) = &edge.consumer {
            if !plan.nodes.contains(id) {
                problems.push(format!("edge consumer `{id}` is not a plan node"));
                continue;
            }
        }
        if !produces(&edge.producer, &edge.concept) {
            problems.push(format!(
                "producer {:?} does not cover demanded concept `{}`",
                edge.producer, edge.concept
            ));
        }
    }

    for id in &plan.nodes {
        let Some(view) = views.get(id) else { continue };
        for demand in &view.inputs {
            let fed = plan.edges.iter().any(|e| {
                e.concept == *demand && e.consumer == Consumer::Service(id.clone())
            });
            if !fed {
                problems.push(format!("input `{demand}` of node `{id}` has no producer"));
            }
        }
    }
    for demand in query.output_demands.keys() {
        let fed = plan
            .edges
            .iter()
            .any(|e| e.concept == *demand && e.consumer == Consumer::Query);
        if !fed {
            problems.push(format!("query output `{demand}` has no producer"));
        }
    }

    if topological_order(plan).is_err() {
        problems.push("plan has a dependency cycle".to_string());
    }
    problems
}
