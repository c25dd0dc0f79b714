//! First abstraction level: functional equivalence.
//!
//! Two services are equivalent when they demand the same input concepts,
//! produce the same output concepts, and their pre/postconditions mutually
//! imply each other. Parameter names play no role. The repository partitions
//! under this relation; each class is abstracted into one service whose QoS
//! is borrowed from a *representative* member chosen by normalized weighted
//! sum.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{QoSSpec, QoSVector, ServiceView};
use crate::ontology::{Condition, Ontology};
use crate::Result;

use super::{EquivalenceClass, Signature};

/// Functional equivalence test (all six conditions).
pub fn equivalent(onto: &Ontology, a: &ServiceView, b: &ServiceView) -> Result<bool> {
    Ok(a.inputs == b.inputs
        && a.outputs == b.outputs
        && onto.conditions_equivalent(&a.pre, &b.pre)?
        && onto.conditions_equivalent(&a.post, &b.post)?)
}

/// Output equivalence: same output concept set, postconditions mutually imply.
/// Needed by both the dominance test (as an exclusion) and the IIOE relation
/// (as a requirement).
pub fn output_equivalent(onto: &Ontology, a: &ServiceView, b: &ServiceView) -> Result<bool> {
    Ok(a.outputs == b.outputs && onto.conditions_equivalent(&a.post, &b.post)?)
}

/// Partition all services under equivalence. Classes come back ordered by
/// their smallest member id; abstract ids `S1_1, S1_2, …` are minted in that
/// order. Representatives use equal weights over the declared parameters.
pub fn partition_level1(
    onto: &Ontology,
    views: &BTreeMap<String, ServiceView>,
    specs: &[QoSSpec],
) -> Result<Vec<EquivalenceClass>> {
    // Equivalence is exactly equality of the closed signature, so grouping by
    // that key partitions without pairwise tests.
    type Key = (BTreeSet<String>, BTreeSet<String>, Condition, Condition);
    let mut groups: BTreeMap<Key, BTreeSet<String>> = BTreeMap::new();
    let mut signatures: BTreeMap<Key, Signature> = BTreeMap::new();
    for (id, view) in views {
        let key: Key = (
            view.inputs.clone(),
            view.outputs.clone(),
            onto.close_condition(&view.pre)?,
            onto.close_condition(&view.post)?,
        );
        signatures.entry(key.clone()).or_insert_with(|| Signature {
            inputs: key.0.clone(),
            outputs: key.1.clone(),
            pre: key.2.clone(),
            post: key.3.clone(),
        });
        groups.entry(key).or_default().insert(id.clone());
    }

    let mut classes: Vec<(BTreeSet<String>, Signature)> = groups
        .into_iter()
        .map(|(key, members)| (members, signatures.remove(&key).unwrap()))
        .collect();
    classes.sort_by(|a, b| a.0.first().cmp(&b.0.first()));

    let weights = equal_weights(specs);
    let mut out = Vec::new();
    for (k, (members, signature)) in classes.into_iter().enumerate() {
        let pool: BTreeMap<String, QoSVector> = members
            .iter()
            .map(|id| (id.clone(), views[id].qos.clone()))
            .collect();
        let representative = select_representative(&pool, specs, &weights)?;
        out.push(EquivalenceClass {
            abstract_id: format!("S1_{}", k + 1),
            members,
            signature,
            representative,
            weights_used: weights.clone(),
        });
    }
    Ok(out)
}

/// Equal weights `1/m` over the declared parameters.
pub fn equal_weights(specs: &[QoSSpec]) -> BTreeMap<String, f64> {
    if specs.is_empty() {
        return BTreeMap::new();
    }
    let w = 1.0 / specs.len() as f64;
    specs.iter().map(|s| (s.name.clone(), w)).collect()
}

/// Normalizes one parameter's values to [0, 1] within a candidate pool:
/// 1 is best, 0 is worst, respecting polarity. When every member has the same
/// value the parameter cannot discriminate and everyone gets 1.
pub fn normalize_qos(spec: &QoSSpec, values: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values.values() {
        min = min.min(v);
        max = max.max(v);
    }
    values
        .iter()
        .map(|(id, &v)| {
            let nv = if max == min {
                1.0
            } else {
                match spec.polarity {
                    crate::model::Polarity::Positive => (v - min) / (max - min),
                    crate::model::Polarity::Negative => (max - v) / (max - min),
                }
            };
            (id.clone(), nv)
        })
        .collect()
}

/// Picks the member with the maximum weighted sum of normalized values.
/// Ties break to the lexicographically smallest id so the choice is
/// reproducible across runs and platforms.
pub fn select_representative(
    pool: &BTreeMap<String, QoSVector>,
    specs: &[QoSSpec],
    weights: &BTreeMap<String, f64>,
) -> Result<String> {
    assert!(!pool.is_empty(), "representative selection over an empty pool");
    let mut scores: BTreeMap<String, f64> = pool.keys().map(|id| (id.clone(), 0.0)).collect();
    for spec in specs {
        let w = weights.get(&spec.name).copied().unwrap_or(0.0);
        if w == 0.0 {
            continue;
        }
        let mut values = BTreeMap::new();
        for (id, qos) in pool {
            values.insert(id.clone(), qos.get(&spec.name)?);
        }
        for (id, nv) in normalize_qos(spec, &values) {
            *scores.get_mut(&id).unwrap() += w * nv;
        }
    }
    let mut best: Option<(&String, f64)> = None;
    for (id, &score) in &scores {
        // strict improvement keeps the smallest id on ties (BTreeMap order)
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((id, score));
        }
    }
    Ok(best.unwrap().0.clone())
}
