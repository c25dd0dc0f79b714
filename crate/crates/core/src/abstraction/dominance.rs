//! Second abstraction level: dominance.
//!
//! A level-1 service dominates another when it can run whenever the other can
//! (more general inputs, weaker precondition) and delivers at least as much
//! (at-least-as-specific outputs, stronger postcondition), without being
//! output-equivalent to it. Every non-dominated service roots a group holding
//! itself plus everything it dominates; dominated services form no group of
//! their own. Groups may overlap.

use std::collections::BTreeMap;

use crate::model::ServiceView;
use crate::ontology::Ontology;
use crate::Result;

use super::equivalence::output_equivalent;
use super::{DominanceGroup, EquivalenceClass};

/// Dominance test: `a ≻ b`.
///
/// (i) every input of `a` is a super-concept of some input of `b`;
/// (ii) every output of `b` has an output of `a` at least as specific;
/// (iii) `b`'s precondition implies `a`'s, `a`'s postcondition implies `b`'s;
/// (iv) `a` and `b` are not output-equivalent.
pub fn dominates(onto: &Ontology, a: &ServiceView, b: &ServiceView) -> Result<bool> {
    for i in &a.inputs {
        let mut covered = false;
        for i2 in &b.inputs {
            if onto.subsumes(i2, i)? {
                covered = true;
                break;
            }
        }
        if !covered {
            return Ok(false);
        }
    }
    for o2 in &b.outputs {
        let mut covered = false;
        for o in &a.outputs {
            if onto.subsumes(o, o2)? {
                covered = true;
                break;
            }
        }
        if !covered {
            return Ok(false);
        }
    }
    if !onto.implies(&b.pre, &a.pre)? || !onto.implies(&a.post, &b.post)? {
        return Ok(false);
    }
    Ok(!output_equivalent(onto, a, b)?)
}

/// Builds dominance groups over the level-1 services, one per non-dominated
/// service, in the given level-1 order (`S2_1, S2_2, …`).
///
/// A service counts as dominated only when the relation is one-sided. Mutual
/// dominance is possible for signatures whose output sets differ syntactically
/// but cover each other (e.g. one lists a redundant super-concept); dropping
/// both sides would lose their functionality from the abstract space, so both
/// stay roots.
pub fn build_level2(
    onto: &Ontology,
    level1: &[EquivalenceClass],
    views: &BTreeMap<String, ServiceView>,
) -> Result<Vec<DominanceGroup>> {
    let ids: Vec<&String> = level1.iter().map(|c| &c.abstract_id).collect();
    let mut dom: BTreeMap<(&String, &String), bool> = BTreeMap::new();
    for &a in &ids {
        for &b in &ids {
            if a != b {
                dom.insert((a, b), dominates(onto, &views[a], &views[b])?);
            }
        }
    }
    let strictly_dominated = |b: &String| {
        ids.iter()
            .any(|&a| a != b && dom[&(a, b)] && !dom[&(b, a)])
    };

    let mut groups = Vec::new();
    let mut k = 0;
    for class in level1 {
        let root = &class.abstract_id;
        if strictly_dominated(root) {
            continue;
        }
        k += 1;
        let mut members: std::collections::BTreeSet<String> =
            [root.clone()].into_iter().collect();
        for &b in &ids {
            if b != root && dom[&(root, b)] {
                members.insert(b.clone());
            }
        }
        groups.push(DominanceGroup {
            abstract_id: format!("S2_{k}"),
            root: root.clone(),
            members,
            signature: class.signature.clone(),
        });
    }
    Ok(groups)
}
