//! The three-level abstraction hierarchy over a service repository.
//!
//! Each level shrinks the search space seen by the planner while keeping at
//! least one way to realize every composition that existed below:
//!
//! 1. **Equivalence classes** merge services with identical signatures
//!    (inputs, outputs, pre- and postcondition up to implication closure).
//!    One member — the best under equal-weight scoring — represents the class.
//! 2. **Dominance groups** keep only services that are not strictly dominated
//!    (broader inputs, richer outputs, weaker pre, stronger post). Each
//!    surviving class roots a group containing everything it dominates.
//! 3. **IIOE trees** chain output-equivalent services whose activation implies
//!    each other's activatability; one tree per level-2 service, represented
//!    by its best member.
//!
//! Plans found against an abstract level are later reconstructed down to
//! concrete services, possibly swapping the representative for another member
//! when QoS constraints demand it.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::model::{QoSVector, ServiceView};
use crate::ontology::Condition;
use crate::repository::RepositoryDocument;
use crate::{Error, Result};

pub mod dominance;
pub mod equivalence;
pub mod iioe;

pub use dominance::{build_level2, dominates};
pub use equivalence::{
    equal_weights, equivalent, normalize_qos, output_equivalent, partition_level1,
    select_representative,
};
pub use iioe::{build_iioe_graph, iioe, transitive_reduction};

/// Functional signature in concept space, with conditions taken modulo
/// implication closure so equality means logical equivalence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub inputs: BTreeSet<String>,
    pub outputs: BTreeSet<String>,
    pub pre: Condition,
    pub post: Condition,
}

/// Level 1: a maximal set of mutually equivalent services.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceClass {
    /// Dense id of the form `S1_k`.
    pub abstract_id: String,
    /// Concrete service ids in the class.
    pub members: BTreeSet<String>,
    /// The member whose QoS the class assumes in planning.
    pub representative: String,
    pub signature: Signature,
    /// Weights the representative was selected under (equal by default);
    /// refinement re-selects with violation-driven weights instead.
    pub weights_used: BTreeMap<String, f64>,
}

/// Level 2: a non-dominated class together with everything it dominates.
///
/// Groups may overlap — a dominated class belongs to every dominator's group.
#[derive(Clone, Debug, Serialize)]
pub struct DominanceGroup {
    /// Dense id of the form `S2_k`.
    pub abstract_id: String,
    /// The dominating level-1 id; the group plans with its signature and QoS.
    pub root: String,
    /// Level-1 ids: the root plus all classes it dominates.
    pub members: BTreeSet<String>,
    pub signature: Signature,
}

/// Level 3: the level-2 services reachable from one root via IIOE.
#[derive(Clone, Debug, Serialize)]
pub struct IIOETree {
    /// Dense id of the form `S3_k`, aligned with the root's `S2_k`.
    pub abstract_id: String,
    /// The level-2 id the tree is rooted at; activation of the root implies
    /// activatability of every member, so the tree activates via the root.
    pub root: String,
    /// Level-2 ids reachable from the root (including it).
    pub tree_members: BTreeSet<String>,
    /// The member whose QoS the tree assumes in planning.
    pub representative: String,
}

/// All three levels built over one repository, plus the derived views each
/// level exposes to the dependency-graph builder.
#[derive(Clone, Debug)]
pub struct AbstractionHierarchy {
    pub level1: Vec<EquivalenceClass>,
    pub level2: Vec<DominanceGroup>,
    pub level3: Vec<IIOETree>,
    /// Transitively reduced IIOE edges between level-2 ids (mutual components
    /// collapsed onto their smallest id).
    pub iioe_edges: BTreeSet<(String, String)>,
    service_count: usize,
    views1: BTreeMap<String, ServiceView>,
    views2: BTreeMap<String, ServiceView>,
    views3: BTreeMap<String, ServiceView>,
    class_index: BTreeMap<String, usize>,
    group_index: BTreeMap<String, usize>,
    tree_index: BTreeMap<String, usize>,
}

impl AbstractionHierarchy {
    pub fn build(doc: &RepositoryDocument) -> Result<Self> {
        let onto = &doc.ontology;
        let views0 = doc.service_views()?;

        let level1 = partition_level1(onto, &views0, &doc.qos_specs)?;
        let views1: BTreeMap<String, ServiceView> = level1
            .iter()
            .map(|class| {
                let view = ServiceView {
                    id: class.abstract_id.clone(),
                    inputs: class.signature.inputs.clone(),
                    outputs: class.signature.outputs.clone(),
                    pre: class.signature.pre.clone(),
                    post: class.signature.post.clone(),
                    qos: views0[&class.representative].qos.clone(),
                };
                (class.abstract_id.clone(), view)
            })
            .collect();

        let level2 = build_level2(onto, &level1, &views1)?;
        let views2: BTreeMap<String, ServiceView> = level2
            .iter()
            .map(|group| {
                // The group plans as its root: dominance guarantees the root
                // can stand in for any member.
                let view = ServiceView {
                    id: group.abstract_id.clone(),
                    inputs: group.signature.inputs.clone(),
                    outputs: group.signature.outputs.clone(),
                    pre: group.signature.pre.clone(),
                    post: group.signature.post.clone(),
                    qos: views1[&group.root].qos.clone(),
                };
                (group.abstract_id.clone(), view)
            })
            .collect();

        let qos2: BTreeMap<String, QoSVector> = views2
            .iter()
            .map(|(id, v)| (id.clone(), v.qos.clone()))
            .collect();
        let graph = build_iioe_graph(onto, &level2, &views2, &qos2, &doc.qos_specs)?;
        let views3: BTreeMap<String, ServiceView> = graph
            .trees
            .iter()
            .map(|tree| {
                // Activation uses the root (the most demanding member); QoS
                // comes from the selected representative.
                let root = &views2[&tree.root];
                let view = ServiceView {
                    id: tree.abstract_id.clone(),
                    inputs: root.inputs.clone(),
                    outputs: root.outputs.clone(),
                    pre: root.pre.clone(),
                    post: root.post.clone(),
                    qos: views2[&tree.representative].qos.clone(),
                };
                (tree.abstract_id.clone(), view)
            })
            .collect();

        let class_index = level1
            .iter()
            .enumerate()
            .map(|(i, c)| (c.abstract_id.clone(), i))
            .collect();
        let group_index = level2
            .iter()
            .enumerate()
            .map(|(i, g)| (g.abstract_id.clone(), i))
            .collect();
        let tree_index = graph
            .trees
            .iter()
            .enumerate()
            .map(|(i, t)| (t.abstract_id.clone(), i))
            .collect();

        Ok(AbstractionHierarchy {
            level1,
            level2,
            level3: graph.trees,
            iioe_edges: graph.edges,
            service_count: views0.len(),
            views1,
            views2,
            views3,
            class_index,
            group_index,
            tree_index,
        })
    }

    pub fn class(&self, abstract_id: &str) -> Option<&EquivalenceClass> {
        self.class_index.get(abstract_id).map(|&i| &self.level1[i])
    }

    pub fn group(&self, abstract_id: &str) -> Option<&DominanceGroup> {
        self.group_index.get(abstract_id).map(|&i| &self.level2[i])
    }

    pub fn tree(&self, abstract_id: &str) -> Option<&IIOETree> {
        self.tree_index.get(abstract_id).map(|&i| &self.level3[i])
    }

    pub fn level1_views(&self) -> &BTreeMap<String, ServiceView> {
        &self.views1
    }

    pub fn level2_views(&self) -> &BTreeMap<String, ServiceView> {
        &self.views2
    }

    pub fn level3_views(&self) -> &BTreeMap<String, ServiceView> {
        &self.views3
    }

    /// The service views the planner sees at `level` (0 = concrete).
    pub fn views_at_level(
        &self,
        doc: &RepositoryDocument,
        level: u8,
    ) -> Result<BTreeMap<String, ServiceView>> {
        match level {
            0 => doc.service_views(),
            1 => Ok(self.views1.clone()),
            2 => Ok(self.views2.clone()),
            3 => Ok(self.views3.clone()),
            _ => Err(Error::InvalidArgument(format!(
                "abstraction level must be 0..=3, got {level}"
            ))),
        }
    }

    /// Containment relation between trees for level-3 graph construction:
    /// tree B is suppressed by tree A when B's root already sits inside A (so
    /// keeping A loses nothing B offers). Trees containing each other's roots
    /// keep only the lexicographically smaller id. The relation is precomputed
    /// from membership alone, so which trees survive a layer never depends on
    /// the order candidates are examined in.
    pub fn tree_suppressions(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut sup: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for a in &self.level3 {
            for b in &self.level3 {
                if a.abstract_id == b.abstract_id || !a.tree_members.contains(&b.root) {
                    continue;
                }
                let mutual = b.tree_members.contains(&a.root);
                if !mutual || a.abstract_id < b.abstract_id {
                    sup.entry(a.abstract_id.clone())
                        .or_default()
                        .insert(b.abstract_id.clone());
                }
            }
        }
        sup
    }

    pub fn report(&self) -> HierarchyReport {
        HierarchyReport {
            service_count: self.service_count,
            class_count: self.level1.len(),
            group_count: self.level2.len(),
            tree_count: self.level3.len(),
            classes: self.level1.clone(),
            groups: self.level2.clone(),
            trees: self.level3.clone(),
            iioe_edges: self.iioe_edges.iter().cloned().collect(),
        }
    }
}

/// Serializable summary of a built hierarchy.
#[derive(Clone, Debug, Serialize)]
pub struct HierarchyReport {
    pub service_count: usize,
    pub class_count: usize,
    pub group_count: usize,
    pub tree_count: usize,
    pub classes: Vec<EquivalenceClass>,
    pub groups: Vec<DominanceGroup>,
    pub trees: Vec<IIOETree>,
    pub iioe_edges: Vec<(String, String)>,
}
