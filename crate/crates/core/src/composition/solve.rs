//! Plan solvers: single-parameter optimum and constrained search.
//!
//! Both work on per-obligation *chain values*: the contribution one demanded
//! concept makes to the plan aggregate if resolved through a given producer.
//! For additive and bottleneck parameters a plan's aggregate is exactly the
//! structural combination of its obligation chains (sharing a producer never
//! changes a max-of-sums or a min), so dynamic programming over (demand,
//! layer-limit) pairs is exact. Multiplicative parameters price each node
//! once per plan, not per use, so the table is only a seed/bound there and
//! the optimum comes from exhaustive search with pruning.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use crate::model::{
    Aggregation, CompositionPlan, Consumer, Direction, PlanEdge, Polarity, Producer, QoSSpec,
    QueryView,
};
use crate::ontology::Ontology;
use crate::{Error, Result};

use super::aggregate::{plan_meets_output_req, plan_qos};
use super::{eligible_producers, Choice, DependencyGraph};

/// Knobs for [`find_constrained`]. The deadline is checked at every choice
/// point; when it expires the best plan found so far is returned, or a
/// timeout error if there is none yet.
#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub deadline: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            deadline: Some(Duration::from_secs(60)),
        }
    }
}

/// Memoized chain-value tables for one QoS parameter: the polarity-best and
/// polarity-worst value a single obligation can reach, per (demand, limit).
struct ChainTables<'a> {
    onto: &'a Ontology,
    dg: &'a DependencyGraph,
    query: &'a QueryView,
    spec: &'a QoSSpec,
    best: BTreeMap<(String, usize), f64>,
    worst: BTreeMap<(String, usize), f64>,
}

impl<'a> ChainTables<'a> {
    fn new(
        onto: &'a Ontology,
        dg: &'a DependencyGraph,
        query: &'a QueryView,
        spec: &'a QoSSpec,
    ) -> Self {
        ChainTables {
            onto,
            dg,
            query,
            spec,
            best: BTreeMap::new(),
            worst: BTreeMap::new(),
        }
    }

    /// Structural combination of a service's own value with its resolved
    /// input chains.
    fn combine(&self, own: f64, input_chains: &[f64]) -> f64 {
        match self.spec.aggregation {
            Aggregation::AdditiveCriticalPath => {
                own + input_chains.iter().copied().fold(0.0, f64::max)
            }
            Aggregation::Multiplicative => own * input_chains.iter().product::<f64>(),
            Aggregation::MinBottleneck => input_chains
                .iter()
                .copied()
                .fold(own, f64::min),
        }
    }

    fn chain(&mut self, demand: &str, limit: usize, want_best: bool) -> Result<f64> {
        let key = (demand.to_string(), limit);
        let cached = if want_best {
            self.best.get(&key)
        } else {
            self.worst.get(&key)
        };
        if let Some(&v) = cached {
            return Ok(v);
        }
        let mut result: Option<f64> = None;
        for choice in eligible_producers(self.onto, self.dg, self.query, demand, limit)? {
            let v = match choice {
                Choice::Input(_) => self.spec.empty_plan_value(),
                Choice::Svc(id, layer) => {
                    let own = self.dg.services[&id].qos.get(&self.spec.name)?;
                    let inputs: Vec<String> =
                        self.dg.services[&id].inputs.iter().cloned().collect();
                    let mut chains = Vec::with_capacity(inputs.len());
                    for d in &inputs {
                        chains.push(self.chain(d, layer, want_best)?);
                    }
                    self.combine(own, &chains)
                }
            };
            result = Some(match result {
                None => v,
                Some(r) if want_best => self.spec.best_of(r, v),
                Some(r) => self.spec.worst_of(r, v),
            });
        }
        let v = result.ok_or(Error::NoSolution)?;
        if want_best {
            self.best.insert(key, v);
        } else {
            self.worst.insert(key, v);
        }
        Ok(v)
    }

    /// Combines per-demand chains into a whole-solution value.
    fn total(&mut self, want_best: bool) -> Result<f64> {
        let all = self.dg.layers.len();
        let demands: Vec<String> = self.query.output_demands.keys().cloned().collect();
        let mut chains = Vec::with_capacity(demands.len());
        for d in &demands {
            chains.push(self.chain(d, all, want_best)?);
        }
        Ok(match self.spec.aggregation {
            Aggregation::AdditiveCriticalPath => chains.iter().copied().fold(0.0, f64::max),
            Aggregation::Multiplicative => chains.iter().product(),
            Aggregation::MinBottleneck => chains.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }
}

/// Best- and worst-achievable aggregate for one parameter over all plans in
/// the graph. Exact for additive and bottleneck aggregation; for
/// multiplicative parameters the figures price shared producers per use and
/// so bracket the true range from outside. Errors with no-solution when some
/// query output is unreachable.
pub fn solution_qos_bounds(
    onto: &Ontology,
    dg: &DependencyGraph,
    query: &QueryView,
    spec: &QoSSpec,
) -> Result<(f64, f64)> {
    let mut tables = ChainTables::new(onto, dg, query, spec);
    Ok((tables.total(true)?, tables.total(false)?))
}

#[derive(Clone, Debug)]
struct Obligation {
    demand: String,
    consumer: Consumer,
    layer_limit: usize,
}

/// Resolves every obligation by the table-best producer (ties go to the
/// first choice in producer order: query inputs, then earlier layers,
/// then id). Exact for additive/bottleneck; a seed incumbent otherwise.
fn greedy_best_plan(
    onto: &Ontology,
    dg: &DependencyGraph,
    query: &QueryView,
    tables: &mut ChainTables,
) -> Result<CompositionPlan> {
    let all = dg.layers.len();
    let mut pending: Vec<Obligation> = query
        .output_demands
        .keys()
        .map(|d| Obligation {
            demand: d.clone(),
            consumer: Consumer::Query,
            layer_limit: all,
        })
        .collect();
    let mut nodes: BTreeSet<String> = BTreeSet::new();
    let mut edges: BTreeSet<PlanEdge> = BTreeSet::new();
    while let Some(ob) = pending.pop() {
        let mut picked: Option<(Choice, f64)> = None;
        for choice in eligible_producers(onto, dg, query, &ob.demand, ob.layer_limit)? {
            let v = match &choice {
                Choice::Input(_) => tables.spec.empty_plan_value(),
                Choice::Svc(id, layer) => {
                    let own = dg.services[id].qos.get(&tables.spec.name)?;
                    let inputs: Vec<String> = dg.services[id].inputs.iter().cloned().collect();
                    let mut chains = Vec::with_capacity(inputs.len());
                    for d in &inputs {
                        chains.push(tables.chain(d, *layer, true)?);
                    }
                    tables.combine(own, &chains)
                }
            };
            let better = match &picked {
                None => true,
                Some((_, pv)) => tables.spec.better(v, *pv),
            };
            if better {
                picked = Some((choice, v));
            }
        }
        let (choice, _) = picked.ok_or(Error::NoSolution)?;
        let producer = match &choice {
            Choice::Input(param) => Producer::QueryInput(param.clone()),
            Choice::Svc(id, layer) => {
                if nodes.insert(id.clone()) {
                    for demand in &dg.services[id].inputs {
                        pending.push(Obligation {
                            demand: demand.clone(),
                            consumer: Consumer::Service(id.clone()),
                            layer_limit: *layer,
                        });
                    }
                }
                Producer::Service(id.clone())
            }
        };
        edges.insert(PlanEdge {
            producer,
            consumer: ob.consumer,
            concept: ob.demand,
        });
    }
    Ok(CompositionPlan {
        level: dg.level,
        nodes,
        edges,
        qos: Default::default(),
    })
}

/// Plan optimizing a single parameter over the whole graph.
///
/// Additive and bottleneck parameters come from exact dynamic programming.
/// Multiplicative parameters fall back to exhaustive search seeded with the
/// table-greedy plan and pruned by the running product; the search is exact
/// within an internal leaf budget that comfortably covers oracle-sized
/// instances, beyond which the best plan found is returned. Plans are not
/// filtered by the query's output requirement here — this backend answers
/// "how good can this parameter get", constraint semantics live in
/// [`find_constrained`].
pub fn optimal_single_qos(
    onto: &Ontology,
    dg: &DependencyGraph,
    query: &QueryView,
    specs: &[QoSSpec],
    objective: &str,
) -> Result<CompositionPlan> {
    let spec = specs
        .iter()
        .find(|s| s.name == objective)
        .ok_or_else(|| Error::UnknownQos(objective.to_string()))?;
    if !dg.covers_query(onto, query)? {
        return Err(Error::NoSolution);
    }
    let mut tables = ChainTables::new(onto, dg, query, spec);
    let mut plan = match spec.aggregation {
        Aggregation::AdditiveCriticalPath | Aggregation::MinBottleneck => {
            greedy_best_plan(onto, dg, query, &mut tables)?
        }
        Aggregation::Multiplicative => {
            let seed = greedy_best_plan(onto, dg, query, &mut tables)?;
            let seed_value = plan_qos(specs, &dg.services, &seed)?.get(objective)?;
            let mut search = ProductSearch {
                onto,
                dg,
                query,
                spec,
                incumbent: Some((seed, seed_value)),
                leaves_left: PRODUCT_LEAF_BUDGET,
            };
            let mut pending: Vec<Obligation> = query
                .output_demands
                .keys()
                .rev()
                .map(|d| Obligation {
                    demand: d.clone(),
                    consumer: Consumer::Query,
                    layer_limit: dg.layers.len(),
                })
                .collect();
            search.walk(&mut pending, &mut BTreeSet::new(), &mut BTreeSet::new(), 1.0)?;
            search.incumbent.map(|(p, _)| p).ok_or(Error::NoSolution)?
        }
    };
    plan.qos = plan_qos(specs, &dg.services, &plan)?;
    Ok(plan)
}

const PRODUCT_LEAF_BUDGET: u64 = 500_000;

/// Exhaustive maximizer for one multiplicative parameter.
struct ProductSearch<'a> {
    onto: &'a Ontology,
    dg: &'a DependencyGraph,
    query: &'a QueryView,
    spec: &'a QoSSpec,
    incumbent: Option<(CompositionPlan, f64)>,
    leaves_left: u64,
}

impl ProductSearch<'_> {
    fn walk(
        &mut self,
        pending: &mut Vec<Obligation>,
        nodes: &mut BTreeSet<String>,
        edges: &mut BTreeSet<PlanEdge>,
        product: f64,
    ) -> Result<()> {
        if self.leaves_left == 0 {
            return Ok(());
        }
        // values lie in [0, 1], so the running product only shrinks
        if let Some((_, best)) = &self.incumbent {
            if product <= *best {
                return Ok(());
            }
        }
        let Some(ob) = pending.pop() else {
            self.leaves_left -= 1;
            let plan = CompositionPlan {
                level: self.dg.level,
                nodes: nodes.clone(),
                edges: edges.clone(),
                qos: Default::default(),
            };
            let better = match &self.incumbent {
                None => true,
                Some((_, best)) => product > *best,
            };
            if better {
                self.incumbent = Some((plan, product));
            }
            return Ok(());
        };
        for choice in eligible_producers(self.onto, self.dg, self.query, &ob.demand, ob.layer_limit)?
        {
            let (producer, fresh) = match &choice {
                Choice::Input(param) => (Producer::QueryInput(param.clone()), None),
                Choice::Svc(id, layer) => (
                    Producer::Service(id.clone()),
                    (!nodes.contains(id)).then(|| (id.clone(), *layer)),
                ),
            };
            let mut next_product = product;
            let mut pushed = 0;
            if let Some((id, layer)) = &fresh {
                next_product *= self.dg.services[id].qos.get(&self.spec.name)?;
                nodes.insert(id.clone());
                for demand in &self.dg.services[id].inputs {
                    pending.push(Obligation {
                        demand: demand.clone(),
                        consumer: Consumer::Service(id.clone()),
                        layer_limit: *layer,
                    });
                    pushed += 1;
                }
            }
            let edge = PlanEdge {
                producer,
                consumer: ob.consumer.clone(),
                concept: ob.demand.clone(),
            };
            edges.insert(edge.clone());

            self.walk(pending, nodes, edges, next_product)?;

            edges.remove(&edge);
            for _ in 0..pushed {
                pending.pop();
            }
            if let Some((id, _)) = &fresh {
                nodes.remove(id);
            }
        }
        pending.push(ob);
        Ok(())
    }
}

/// Branch-and-bound search for a plan satisfying every constraint, optimizing
/// the query's first objective among the satisfying plans (first hit wins
/// when there is no objective). Plans failing the query's output requirement
/// are rejected. Returns `Ok(None)` when the space holds no satisfying plan;
/// timeout is an error only when it fires before any satisfying plan showed
/// up, otherwise the incumbent is returned.
pub fn find_constrained(
    onto: &Ontology,
    dg: &DependencyGraph,
    query: &QueryView,
    specs: &[QoSSpec],
    options: &SolveOptions,
) -> Result<Option<CompositionPlan>> {
    let spec_of = |name: &str| -> Result<&QoSSpec> {
        specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownQos(name.to_string()))
    };
    let mut constraints = Vec::new();
    for (name, bound) in &query.constraints {
        constraints.push((spec_of(name)?, *bound));
    }
    let objective = match query.objectives.first() {
        None => None,
        Some((name, direction)) => {
            let spec = spec_of(name)?;
            let consistent = matches!(
                (direction, &spec.polarity),
                (Direction::Minimize, Polarity::Negative)
                    | (Direction::Maximize, Polarity::Positive)
            );
            if !consistent {
                return Err(Error::InvalidArgument(format!(
                    "objective direction on `{name}` conflicts with its polarity"
                )));
            }
            Some(spec)
        }
    };

    if !dg.covers_query(onto, query)? {
        return Ok(None);
    }

    let mut watched: Vec<&QoSSpec> = constraints.iter().map(|(s, _)| *s).collect();
    if let Some(spec) = objective {
        if !watched.iter().any(|s| s.name == spec.name) {
            watched.push(spec);
        }
    }
    let mut tables: BTreeMap<String, ChainTables> = BTreeMap::new();
    for spec in &watched {
        tables.insert(spec.name.clone(), ChainTables::new(onto, dg, query, spec));
    }

    let deadline = options.deadline.map(|d| Instant::now() + d);
    let mut search = ConstrainedSearch {
        onto,
        dg,
        query,
        specs,
        constraints,
        objective,
        tables,
        deadline,
        incumbent: None,
        timed_out: false,
        satisfied_without_objective: false,
    };
    let mut pending: Vec<Obligation> = query
        .output_demands
        .keys()
        .rev()
        .map(|d| Obligation {
            demand: d.clone(),
            consumer: Consumer::Query,
            layer_limit: dg.layers.len(),
        })
        .collect();
    search.walk(&mut pending, &mut BTreeMap::new(), &mut BTreeSet::new())?;

    match search.incumbent {
        Some((mut plan, _)) => {
            plan.qos = plan_qos(specs, &dg.services, &plan)?;
            Ok(Some(plan))
        }
        None if search.timed_out => Err(Error::Timeout),
        None => Ok(None),
    }
}

struct ConstrainedSearch<'a> {
    onto: &'a Ontology,
    dg: &'a DependencyGraph,
    query: &'a QueryView,
    specs: &'a [QoSSpec],
    constraints: Vec<(&'a QoSSpec, f64)>,
    objective: Option<&'a QoSSpec>,
    tables: BTreeMap<String, ChainTables<'a>>,
    deadline: Option<Instant>,
    incumbent: Option<(CompositionPlan, f64)>,
    timed_out: bool,
    /// Set when there is no objective and an incumbent exists: stop searching.
    satisfied_without_objective: bool,
}

impl ConstrainedSearch<'_> {
    /// Optimistic (polarity-best) completion value for one parameter given
    /// the chosen nodes and the still-pending obligations.
    fn optimistic(
        &mut self,
        spec: &QoSSpec,
        chosen: &BTreeMap<String, usize>,
        edges: &BTreeSet<PlanEdge>,
        pending: &[Obligation],
    ) -> Result<f64> {
        match spec.aggregation {
            Aggregation::AdditiveCriticalPath => {
                // partial critical path over resolved edges only grows
                let mut current = 0.0f64;
                {
                    let mut dp: BTreeMap<&str, f64> = BTreeMap::new();
                    let mut preds: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
                    for e in edges {
                        if let (Producer::Service(a), Consumer::Service(b)) =
                            (&e.producer, &e.consumer)
                        {
                            preds.entry(b.as_str()).or_default().push(a.as_str());
                        }
                    }
                    // chosen is processed in insertion-compatible order via
                    // layers: producers always sit in earlier layers
                    let mut order: Vec<(&String, &usize)> = chosen.iter().collect();
                    order.sort_by_key(|(id, layer)| (**layer, (*id).clone()));
                    for (id, _) in order {
                        let own = self.dg.services[id].qos.get(&spec.name)?;
                        let longest_in = preds
                            .get(id.as_str())
                            .map(|ps| ps.iter().map(|p| dp[*p]).fold(0.0, f64::max))
                            .unwrap_or(0.0);
                        let v = own + longest_in;
                        current = current.max(v);
                        dp.insert(id.as_str(), v);
                    }
                }
                let mut bound = current;
                for ob in pending {
                    let t = self.tables.get_mut(&spec.name).unwrap();
                    bound = bound.max(t.chain(&ob.demand, ob.layer_limit, true)?);
                }
                Ok(bound)
            }
            Aggregation::Multiplicative => {
                let mut v = 1.0;
                for id in chosen.keys() {
                    v *= self.dg.services[id].qos.get(&spec.name)?;
                }
                Ok(v)
            }
            Aggregation::MinBottleneck => {
                let mut v = f64::INFINITY;
                for id in chosen.keys() {
                    v = v.min(self.dg.services[id].qos.get(&spec.name)?);
                }
                for ob in pending {
                    let producers = eligible_producers(
                        self.onto,
                        self.dg,
                        self.query,
                        &ob.demand,
                        ob.layer_limit,
                    )?;
                    let free = producers.iter().any(|c| match c {
                        Choice::Input(_) => true,
                        Choice::Svc(id, _) => chosen.contains_key(id),
                    });
                    if free {
                        continue; // resolvable without any new node
                    }
                    let t = self.tables.get_mut(&spec.name).unwrap();
                    v = v.min(t.chain(&ob.demand, ob.layer_limit, true)?);
                }
                Ok(v)
            }
        }
    }

    fn prune(
        &mut self,
        chosen: &BTreeMap<String, usize>,
        edges: &BTreeSet<PlanEdge>,
        pending: &[Obligation],
    ) -> Result<bool> {
        let constraints = self.constraints.clone();
        for (spec, bound) in constraints {
            let opt = self.optimistic(spec, chosen, edges, pending)?;
            if !spec.satisfies(opt, bound) {
                return Ok(true);
            }
        }
        if let (Some(spec), Some((_, best))) = (self.objective, &self.incumbent) {
            let best = *best;
            let opt = self.optimistic(spec, chosen, edges, pending)?;
            if spec.better(best, opt) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn walk(
        &mut self,
        pending: &mut Vec<Obligation>,
        chosen: &mut BTreeMap<String, usize>,
        edges: &mut BTreeSet<PlanEdge>,
    ) -> Result<()> {
        if self.satisfied_without_objective || self.timed_out {
            return Ok(());
        }
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                self.timed_out = true;
                return Ok(());
            }
        }
        if self.prune(chosen, edges, pending)? {
            return Ok(());
        }
        let Some(ob) = pending.pop() else {
            let plan = CompositionPlan {
                level: self.dg.level,
                nodes: chosen.keys().cloned().collect(),
                edges: edges.clone(),
                qos: Default::default(),
            };
            let qos = plan_qos(self.specs, &self.dg.services, &plan)?;
            for (spec, bound) in &self.constraints {
                if !spec.satisfies(qos.get(&spec.name)?, *bound) {
                    return Ok(());
                }
            }
            if !plan_meets_output_req(self.onto, &self.dg.services, self.query, &plan)? {
                return Ok(());
            }
            match self.objective {
                None => {
                    self.incumbent = Some((plan, 0.0));
                    self.satisfied_without_objective = true;
                }
                Some(spec) => {
                    let v = qos.get(&spec.name)?;
                    let better = match &self.incumbent {
                        None => true,
                        Some((_, best)) => spec.better(v, *best),
                    };
                    if better {
                        self.incumbent = Some((plan, v));
                    }
                }
            }
            return Ok(());
        };

        for choice in
            eligible_producers(self.onto, self.dg, self.query, &ob.demand, ob.layer_limit)?
        {
            let (producer, fresh) = match &choice {
                Choice::Input(param) => (Producer::QueryInput(param.clone()), None),
                Choice::Svc(id, layer) => (
                    Producer::Service(id.clone()),
                    (!chosen.contains_key(id)).then(|| (id.clone(), *layer)),
                ),
            };
            let mut pushed = 0;
            if let Some((id, layer)) = &fresh {
                chosen.insert(id.clone(), *layer);
                for demand in &self.dg.services[id].inputs {
                    pending.push(Obligation {
                        demand: demand.clone(),
                        consumer: Consumer::Service(id.clone()),
                        layer_limit: *layer,
                    });
                    pushed += 1;
                }
            }
            let edge = PlanEdge {
                producer,
                consumer: ob.consumer.clone(),
                concept: ob.demand.clone(),
            };
            edges.insert(edge.clone());

            self.walk(pending, chosen, edges)?;

            edges.remove(&edge);
            for _ in 0..pushed {
                pending.pop();
            }
            if let Some((id, _)) = &fresh {
                chosen.remove(id);
            }
            if self.satisfied_without_objective || self.timed_out {
                break;
            }
        }
        pending.push(ob);
        Ok(())
    }
}
