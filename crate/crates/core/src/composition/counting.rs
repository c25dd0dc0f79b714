//! Counting and enumerating the functional plans in a dependency graph.
//!
//! A plan resolves every obligation — first the query's demanded output
//! concepts, then transitively each chosen service's input demands — by
//! picking exactly one eligible producer. Identical choice-sets count once:
//! when two consumers pick the same service, that service's own inputs are
//! resolved a single time for both. The exact count enumerates these closed
//! assignments; past a leaf budget [`count_plans`] falls back to the
//! per-obligation product/sum recurrence, which prices shared producers
//! independently and can therefore overcount heavily shared spaces.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;

use crate::model::{CompositionPlan, Consumer, PlanEdge, Producer, QoSSpec, QueryView};
use crate::ontology::Ontology;
use crate::{Error, Result};

use super::aggregate::plan_qos;
use super::{eligible_producers, Choice, DependencyGraph};

/// Leaves the exact enumeration may visit before deferring to the recurrence.
/// Generous enough that every instance the brute-force oracle can check
/// (≤ 10,000 plans) is counted exactly.
const EXACT_LEAF_BUDGET: u64 = 200_000;

#[derive(Clone, Debug)]
struct Obligation {
    demand: String,
    consumer: Consumer,
    layer_limit: usize,
}

struct Search<'a> {
    onto: &'a Ontology,
    dg: &'a DependencyGraph,
    query: &'a QueryView,
    producers: BTreeMap<(String, usize), Vec<Choice>>,
}

impl<'a> Search<'a> {
    fn new(onto: &'a Ontology, dg: &'a DependencyGraph, query: &'a QueryView) -> Self {
        Search {
            onto,
            dg,
            query,
            producers: BTreeMap::new(),
        }
    }

    fn producers(&mut self, demand: &str, limit: usize) -> Result<Vec<Choice>> {
        let key = (demand.to_string(), limit);
        if let Some(cached) = self.producers.get(&key) {
            return Ok(cached.clone());
        }
        let ps = eligible_producers(self.onto, self.dg, self.query, demand, limit)?;
        self.producers.insert(key, ps.clone());
        Ok(ps)
    }

    fn root_obligations(&self) -> Vec<Obligation> {
        let all = self.dg.layers.len();
        self.query
            .output_demands
            .keys()
            .rev() // stack pops smallest demand first
            .map(|d| Obligation {
                demand: d.clone(),
                consumer: Consumer::Query,
                layer_limit: all,
            })
            .collect()
    }

    /// Depth-first walk over closed assignments. Returns `false` when the
    /// leaf budget ran out mid-walk (the visit counts are then meaningless).
    fn walk(
        &mut self,
        pending: &mut Vec<Obligation>,
        resolved: &mut BTreeSet<String>,
        edges: &mut BTreeSet<PlanEdge>,
        leaves_left: &mut u64,
        on_leaf: &mut dyn FnMut(&BTreeSet<String>, &BTreeSet<PlanEdge>) -> Result<()>,
    ) -> Result<bool> {
        let Some(ob) = pending.pop() else {
            if *leaves_left == 0 {
                return Ok(false);
            }
            *leaves_left -= 1;
            on_leaf(resolved, edges)?;
            return Ok(true);
        };

        for choice in self.producers(&ob.demand, ob.layer_limit)? {
            let (producer, expand) = match &choice {
                Choice::Input(param) => (Producer::QueryInput(param.clone()), None),
                Choice::Svc(id, layer) => (
                    Producer::Service(id.clone()),
                    (!resolved.contains(id)).then(|| (id.clone(), *layer)),
                ),
            };
            let edge = PlanEdge {
                producer,
                consumer: ob.consumer.clone(),
                concept: ob.demand.clone(),
            };
            edges.insert(edge.clone());
            let mut pushed = 0;
            if let Some((id, layer)) = &expand {
                resolved.insert(id.clone());
                for demand in &self.dg.services[id].inputs {
                    pending.push(Obligation {
                        demand: demand.clone(),
                        consumer: Consumer::Service(id.clone()),
                        layer_limit: *layer,
                    });
                    pushed += 1;
                }
            }

            let ok = self.walk(pending, resolved, edges, leaves_left, on_leaf)?;

            for _ in 0..pushed {
                pending.pop();
            }
            if let Some((id, _)) = &expand {
                resolved.remove(id);
            }
            edges.remove(&edge);
            if !ok {
                return Ok(false);
            }
        }

        pending.push(ob);
        Ok(true)
    }

    /// Product/sum recurrence: ways(demand, limit) sums over eligible
    /// producers, multiplying a service's input ways. Shared services are
    /// priced once per use, not once per plan.
    fn recurrence_ways(
        &mut self,
        demand: &str,
        limit: usize,
        memo: &mut BTreeMap<(String, usize), BigUint>,
    ) -> Result<BigUint> {
        let key = (demand.to_string(), limit);
        if let Some(v) = memo.get(&key) {
            return Ok(v.clone());
        }
        let mut total = BigUint::from(0u32);
        for choice in self.producers(demand, limit)? {
            match choice {
                Choice::Input(_) => total += 1u32,
                Choice::Svc(id, layer) => {
                    let mut ways = BigUint::from(1u32);
                    let inputs = self.dg.services[&id].inputs.clone();
                    for d in &inputs {
                        ways *= self.recurrence_ways(d, layer, memo)?;
                        if ways == BigUint::from(0u32) {
                            break;
                        }
                    }
                    total += ways;
                }
            }
        }
        memo.insert(key, total.clone());
        Ok(total)
    }
}

/// Number of distinct plans serving `query` in `dg`.
pub fn count_plans(onto: &Ontology, dg: &DependencyGraph, query: &QueryView) -> Result<BigUint> {
    count_plans_with_budget(onto, dg, query, EXACT_LEAF_BUDGET)
}

/// [`count_plans`] with an explicit exact-enumeration budget (0 forces the
/// recurrence fallback).
pub fn count_plans_with_budget(
    onto: &Ontology,
    dg: &DependencyGraph,
    query: &QueryView,
    budget: u64,
) -> Result<BigUint> {
    let mut search = Search::new(onto, dg, query);
    let mut pending = search.root_obligations();
    let mut count: u64 = 0;
    let mut leaves_left = budget;
    let finished = search.walk(
        &mut pending,
        &mut BTreeSet::new(),
        &mut BTreeSet::new(),
        &mut leaves_left,
        &mut |_, _| {
            count += 1;
            Ok(())
        },
    )?;
    if finished {
        return Ok(BigUint::from(count));
    }

    let mut memo = BTreeMap::new();
    let mut total = BigUint::from(1u32);
    let all = dg.layers.len();
    for demand in query.output_demands.keys() {
        total *= search.recurrence_ways(demand, all, &mut memo)?;
    }
    Ok(total)
}

/// Exhaustively materializes every plan, with aggregated QoS per plan.
/// Errors when the space exceeds `cap` — callers wanting totals beyond that
/// should use [`count_plans`].
pub fn enumerate_plans(
    onto: &Ontology,
    dg: &DependencyGraph,
    query: &QueryView,
    specs: &[QoSSpec],
    cap: usize,
) -> Result<Vec<CompositionPlan>> {
    let mut search = Search::new(onto, dg, query);
    let mut pending = search.root_obligations();
    let mut plans: Vec<CompositionPlan> = Vec::new();
    let mut overflow = false;
    let mut leaves_left = u64::MAX;
    search.walk(
        &mut pending,
        &mut BTreeSet::new(),
        &mut BTreeSet::new(),
        &mut leaves_left,
        &mut |resolved, edges| {
            if plans.len() == cap {
                overflow = true;
                return Err(Error::InvalidArgument(format!(
                    "plan space exceeds enumeration cap {cap}"
                )));
            }
            plans.push(CompositionPlan {
                level: dg.level,
                nodes: resolved.clone(),
                edges: edges.clone(),
                qos: Default::default(),
            });
            Ok(())
        },
    )?;
    debug_assert!(!overflow);
    for plan in &mut plans {
        plan.qos = plan_qos(specs, &dg.services, plan)?;
    }
    Ok(plans)
}
