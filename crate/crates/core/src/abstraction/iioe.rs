//! Third abstraction level: input implication / output equivalence (IIOE).
//!
//! `iioe(a, b)` holds when `a` and `b` are output-equivalent, every input of
//! `b` is a super-concept of some input of `a`, and `a`'s precondition implies
//! `b`'s. Activating `a` then implies `b` is activatable too, so planning only
//! needs the most demanding member of each chain. The relation is a preorder
//! on output-equivalent services; mutual pairs are collapsed before the graph
//! is transitively reduced, and each level-2 service roots one tree whose
//! members are everything reachable from it.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{QoSSpec, QoSVector, ServiceView};
use crate::ontology::Ontology;
use crate::Result;

use super::equivalence::{equal_weights, output_equivalent, select_representative};
use super::{DominanceGroup, IIOETree};

/// The IIOE relation: activation of `a` implies activatability of `b`.
pub fn iioe(onto: &Ontology, a: &ServiceView, b: &ServiceView) -> Result<bool> {
    if !output_equivalent(onto, a, b)? {
        return Ok(false);
    }
    for i in &b.inputs {
        let mut covered = false;
        for i2 in &a.inputs {
            if onto.subsumes(i2, i)? {
                covered = true;
                break;
            }
        }
        if !covered {
            return Ok(false);
        }
    }
    onto.implies(&a.pre, &b.pre)
}

/// Unique transitive reduction of a DAG: drop every edge whose target stays
/// reachable through some other successor.
pub fn transitive_reduction(
    nodes: &BTreeSet<String>,
    edges: &BTreeSet<(String, String)>,
) -> BTreeSet<(String, String)> {
    let mut succ: BTreeMap<&str, BTreeSet<&str>> = nodes.iter().map(|n| (n.as_str(), BTreeSet::new())).collect();
    for (u, v) in edges {
        succ.get_mut(u.as_str()).unwrap().insert(v.as_str());
    }
    let reach = reachability(nodes, edges);
    edges
        .iter()
        .filter(|(u, v)| {
            !succ[u.as_str()]
                .iter()
                .any(|w| *w != v.as_str() && reach[*w].contains(v.as_str()))
        })
        .cloned()
        .collect()
}

/// Reflexive-transitive reachability per node.
fn reachability<'a>(
    nodes: &'a BTreeSet<String>,
    edges: &'a BTreeSet<(String, String)>,
) -> BTreeMap<&'a str, BTreeSet<&'a str>> {
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (u, v) in edges {
        succ.entry(u.as_str()).or_default().push(v.as_str());
    }
    let mut out: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for start in nodes {
        let mut seen: BTreeSet<&str> = [start.as_str()].into_iter().collect();
        let mut stack = vec![start.as_str()];
        while let Some(n) = stack.pop() {
            for &m in succ.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        out.insert(start.as_str(), seen);
    }
    out
}

/// Result of the IIOE construction over the level-2 services.
pub struct IioeGraph {
    /// Transitively reduced edges between mutual-component representatives.
    pub edges: BTreeSet<(String, String)>,
    /// One tree per level-2 service, aligned with the group order.
    pub trees: Vec<IIOETree>,
}

/// Builds the IIOE graph and the per-service trees.
///
/// `groups` fixes the order in which `S3_k` ids are minted (tree `S3_k` roots
/// at group `S2_k`); `views` and `qos` are keyed by the level-2 abstract ids.
pub fn build_iioe_graph(
    onto: &Ontology,
    groups: &[DominanceGroup],
    views: &BTreeMap<String, ServiceView>,
    qos: &BTreeMap<String, QoSVector>,
    specs: &[QoSSpec],
) -> Result<IioeGraph> {
    let ids: Vec<&String> = groups.iter().map(|g| &g.abstract_id).collect();
    let mut rel: BTreeMap<(&String, &String), bool> = BTreeMap::new();
    for &a in &ids {
        for &b in &ids {
            if a != b {
                rel.insert((a, b), iioe(onto, &views[a], &views[b])?);
            }
        }
    }

    // Collapse mutual pairs into components so the graph stays acyclic.
    // IIOE is transitive, so cycles are exactly the mutual components.
    let mut comp_of: BTreeMap<&String, &String> = ids.iter().map(|&i| (i, i)).collect();
    for &a in &ids {
        for &b in &ids {
            if a < b && rel[&(a, b)] && rel[&(b, a)] {
                let ra = comp_of[a];
                let rb = comp_of[b];
                let keep = ra.min(rb);
                for (_, r) in comp_of.iter_mut() {
                    if *r == ra || *r == rb {
                        *r = keep;
                    }
                }
            }
        }
    }
    let comp_nodes: BTreeSet<String> = comp_of.values().map(|s| s.to_string()).collect();
    let mut comp_edges: BTreeSet<(String, String)> = BTreeSet::new();
    for &a in &ids {
        for &b in &ids {
            if a != b && rel[&(a, b)] {
                let (ca, cb) = (comp_of[a], comp_of[b]);
                if ca != cb {
                    comp_edges.insert((ca.clone(), cb.clone()));
                }
            }
        }
    }

    debug_assert!(
        is_acyclic(&comp_nodes, &comp_edges),
        "IIOE component graph must be a DAG"
    );
    let reduced = transitive_reduction(&comp_nodes, &comp_edges);
    let reach = reachability(&comp_nodes, &reduced);

    // Members of a component (shared by all its nodes).
    let mut comp_members: BTreeMap<&String, BTreeSet<String>> = BTreeMap::new();
    for &id in &ids {
        comp_members.entry(comp_of[id]).or_default().insert(id.clone());
    }

    let weights = equal_weights(specs);
    let mut trees = Vec::new();
    for (k, group) in groups.iter().enumerate() {
        let root = &group.abstract_id;
        let mut tree_members: BTreeSet<String> = BTreeSet::new();
        for comp in &reach[comp_of[root].as_str()] {
            tree_members.extend(comp_members[&comp.to_string()].iter().cloned());
        }
        let pool: BTreeMap<String, QoSVector> = tree_members
            .iter()
            .map(|id| (id.clone(), qos[id].clone()))
            .collect();
        let representative = select_representative(&pool, specs, &weights)?;
        trees.push(IIOETree {
            abstract_id: format!("S3_{}", k + 1),
            root: root.clone(),
            tree_members,
            representative,
        });
    }
    Ok(IioeGraph {
        edges: reduced,
        trees,
    })
}

fn is_acyclic(nodes: &BTreeSet<String>, edges: &BTreeSet<(String, String)>) -> bool {
    let mut indeg: BTreeMap<&str, usize> = nodes.iter().map(|n| (n.as_str(), 0)).collect();
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (u, v) in edges {
        *indeg.get_mut(v.as_str()).unwrap() += 1;
        succ.entry(u.as_str()).or_default().push(v.as_str());
    }
    let mut queue: Vec<&str> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut seen = 0;
    while let Some(n) = queue.pop() {
        seen += 1;
        for &m in succ.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indeg.get_mut(m).unwrap();
            *d -= 1;
            if *d == 0 {
                queue.push(m);
            }
        }
    }
    seen == nodes.len()
}
