//! Concepts, subsumption, parameter mapping, and the condition language.
//!
//! Parameters (the names appearing in service signatures and queries) map to
//! concepts through [`Ontology::concept_of`]; matchmaking happens purely in
//! concept space. Subsumption `sub ⊑ sup` is the reflexive-transitive closure
//! of the declared child→parent edges and must be acyclic, which makes it a
//! partial order.
//!
//! Conditions (preconditions, postconditions, input specifications, output
//! requirements) are conjunctions of named atoms. Atom implications form a
//! second, independent DAG; `implies(a, b)` holds when every atom of `b` is
//! reachable from some atom of `a` in that DAG's reflexive-transitive closure.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A conjunction of atoms. The empty condition is logically true.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Condition {
    pub atoms: BTreeSet<String>,
}

impl Condition {
    pub fn new<I, S>(atoms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Condition {
            atoms: atoms.into_iter().map(Into::into).collect(),
        }
    }

    /// Logically true: a conjunction over no atoms.
    pub fn truth() -> Self {
        Condition::default()
    }

    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Conjunction of `self` and `other`.
    pub fn and(&self, other: &Condition) -> Condition {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Condition { atoms }
    }
}

/// How two concepts stand to each other under subsumption.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptRelation {
    Equal,
    /// First is a strict sub-concept of the second.
    Sub,
    /// First is a strict super-concept of the second.
    Super,
    Unrelated,
}

/// Immutable semantic backbone: concept DAG, parameter map, atom implication DAG.
#[derive(Clone, Debug, PartialEq)]
pub struct Ontology {
    concepts: BTreeSet<String>,
    subsumption_edges: BTreeSet<(String, String)>,
    parameter_map: BTreeMap<String, String>,
    atoms: BTreeSet<String>,
    atom_implications: BTreeSet<(String, String)>,
    /// Per concept: all super-concepts including itself.
    ancestors: BTreeMap<String, BTreeSet<String>>,
    /// Per concept: all sub-concepts including itself.
    descendants: BTreeMap<String, BTreeSet<String>>,
    /// Per atom: all implied atoms including itself.
    atom_closure: BTreeMap<String, BTreeSet<String>>,
}

impl Ontology {
    /// Builds and validates an ontology.
    ///
    /// `subsumption_edges` are `(child, parent)` pairs; `atom_implications`
    /// are `(stronger, weaker)` pairs. Both relations must reference declared
    /// ids and form DAGs (a cycle would break antisymmetry of the orders).
    pub fn new(
        concepts: BTreeSet<String>,
        subsumption_edges: BTreeSet<(String, String)>,
        parameter_map: BTreeMap<String, String>,
        atoms: BTreeSet<String>,
        atom_implications: BTreeSet<(String, String)>,
    ) -> Result<Self> {
        let mut violations = Vec::new();
        if concepts.iter().any(|c| c.is_empty()) {
            violations.push("empty concept id".to_string());
        }
        for (child, parent) in &subsumption_edges {
            for c in [child, parent] {
                if !concepts.contains(c) {
                    violations.push(format!("subsumption edge references unknown concept `{c}`"));
                }
            }
            if child == parent {
                violations.push(format!("self-subsumption on `{child}`"));
            }
        }
        for (param, concept) in &parameter_map {
            if !concepts.contains(concept) {
                violations.push(format!(
                    "parameter `{param}` maps to unknown concept `{concept}`"
                ));
            }
        }
        for (stronger, weaker) in &atom_implications {
            for a in [stronger, weaker] {
                if !atoms.contains(a) {
                    violations.push(format!("atom implication references unknown atom `{a}`"));
                }
            }
            if stronger == weaker {
                violations.push(format!("self-implication on atom `{stronger}`"));
            }
        }
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }

        let ancestors = transitive_up_sets(&concepts, &subsumption_edges)
            .map_err(|cycle| Error::Validation(vec![format!("subsumption cycle through `{cycle}`")]))?;
        let atom_closure = transitive_up_sets(&atoms, &atom_implications)
            .map_err(|cycle| Error::Validation(vec![format!("atom implication cycle through `{cycle}`")]))?;

        let mut descendants: BTreeMap<String, BTreeSet<String>> = concepts
            .iter()
            .map(|c| (c.clone(), BTreeSet::new()))
            .collect();
        for (c, ups) in &ancestors {
            for up in ups {
                descendants.get_mut(up).unwrap().insert(c.clone());
            }
        }

        Ok(Ontology {
            concepts,
            subsumption_edges,
            parameter_map,
            atoms,
            atom_implications,
            ancestors,
            descendants,
            atom_closure,
        })
    }

    pub fn concepts(&self) -> &BTreeSet<String> {
        &self.concepts
    }

    pub fn subsumption_edges(&self) -> &BTreeSet<(String, String)> {
        &self.subsumption_edges
    }

    pub fn parameter_map(&self) -> &BTreeMap<String, String> {
        &self.parameter_map
    }

    pub fn atoms(&self) -> &BTreeSet<String> {
        &self.atoms
    }

    pub fn atom_implications(&self) -> &BTreeSet<(String, String)> {
        &self.atom_implications
    }

    pub fn has_concept(&self, c: &str) -> bool {
        self.concepts.contains(c)
    }

    pub fn has_atom(&self, a: &str) -> bool {
        self.atoms.contains(a)
    }

    pub fn has_parameter(&self, p: &str) -> bool {
        self.parameter_map.contains_key(p)
    }

    fn check_concept(&self, c: &str) -> Result<()> {
        if self.concepts.contains(c) {
            Ok(())
        } else {
            Err(Error::UnknownConcept(c.to_string()))
        }
    }

    /// All super-concepts of `c`, including `c` itself.
    pub fn ancestors_of(&self, c: &str) -> Result<&BTreeSet<String>> {
        self.ancestors
            .get(c)
            .ok_or_else(|| Error::UnknownConcept(c.to_string()))
    }

    /// All sub-concepts of `c`, including `c` itself.
    pub fn descendants_of(&self, c: &str) -> Result<&BTreeSet<String>> {
        self.descendants
            .get(c)
            .ok_or_else(|| Error::UnknownConcept(c.to_string()))
    }

    /// `sub ⊑ sup` in the reflexive-transitive closure.
    pub fn subsumes(&self, sub: &str, sup: &str) -> Result<bool> {
        self.check_concept(sup)?;
        Ok(self.ancestors_of(sub)?.contains(sup))
    }

    pub fn relate(&self, c1: &str, c2: &str) -> Result<ConceptRelation> {
        self.check_concept(c1)?;
        self.check_concept(c2)?;
        Ok(if c1 == c2 {
            ConceptRelation::Equal
        } else if self.ancestors[c1].contains(c2) {
            ConceptRelation::Sub
        } else if self.ancestors[c2].contains(c1) {
            ConceptRelation::Super
        } else {
            ConceptRelation::Unrelated
        })
    }

    /// The concept a parameter name stands for.
    pub fn concept_of(&self, param: &str) -> Result<&str> {
        self.parameter_map
            .get(param)
            .map(String::as_str)
            .ok_or_else(|| Error::UnknownParameter(param.to_string()))
    }

    /// Whether some concept in `available` is a sub-concept of `demand`,
    /// i.e. a value of any available concept can be fed where `demand` is asked.
    pub fn covers(&self, available: &BTreeSet<String>, demand: &str) -> Result<bool> {
        let subs = self.descendants_of(demand)?;
        Ok(available.iter().any(|c| subs.contains(c)))
    }

    /// Reflexive-transitive expansion of a condition's atoms.
    pub fn condition_closure(&self, cond: &Condition) -> Result<BTreeSet<String>> {
        let mut out = BTreeSet::new();
        for atom in &cond.atoms {
            let closed = self
                .atom_closure
                .get(atom)
                .ok_or_else(|| Error::UnknownAtom(atom.clone()))?;
            out.extend(closed.iter().cloned());
        }
        Ok(out)
    }

    /// Canonical closed form of a condition (same meaning, closure as atom set).
    pub fn close_condition(&self, cond: &Condition) -> Result<Condition> {
        Ok(Condition {
            atoms: self.condition_closure(cond)?,
        })
    }

    /// `a → b`: every atom of `b` follows from some atom of `a`.
    pub fn implies(&self, a: &Condition, b: &Condition) -> Result<bool> {
        for atom in &b.atoms {
            if !self.atoms.contains(atom) {
                return Err(Error::UnknownAtom(atom.clone()));
            }
        }
        let closure = self.condition_closure(a)?;
        Ok(b.atoms.iter().all(|atom| closure.contains(atom)))
    }

    /// Mutual implication: the two conditions have the same meaning.
    pub fn conditions_equivalent(&self, a: &Condition, b: &Condition) -> Result<bool> {
        Ok(self.condition_closure(a)? == self.condition_closure(b)?)
    }
}

/// Reflexive-transitive up-sets of a DAG given as (lower, upper) edges.
/// Returns `Err(node)` naming a node on a cycle if the relation is cyclic.
fn transitive_up_sets(
    nodes: &BTreeSet<String>,
    edges: &BTreeSet<(String, String)>,
) -> std::result::Result<BTreeMap<String, BTreeSet<String>>, String> {
    let mut direct: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (lo, up) in edges {
        direct.entry(lo.as_str()).or_default().push(up.as_str());
    }
    let mut done: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    // 0 = unvisited, 1 = on stack, 2 = finished
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();

    for start in nodes {
        // Iterative DFS with an explicit stack so deep chains cannot overflow.
        let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
        while let Some(&(node, next_child)) = stack.last() {
            let children: &[&str] = direct.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if next_child == 0 {
                match state.get(node) {
                    Some(1) => return Err(node.to_string()),
                    Some(2) => {
                        stack.pop();
                        continue;
                    }
                    _ => {
                        state.insert(node, 1);
                    }
                }
            }
            if next_child < children.len() {
                stack.last_mut().unwrap().1 += 1;
                let child = children[next_child];
                match state.get(child) {
                    Some(1) => return Err(child.to_string()),
                    Some(2) => {}
                    _ => stack.push((child, 0)),
                }
            } else {
                let mut set: BTreeSet<String> = BTreeSet::new();
                set.insert(node.to_string());
                for child in children {
                    set.extend(done[*child].iter().cloned());
                }
                done.insert(node.to_string(), set);
                state.insert(node, 2);
                stack.pop();
            }
        }
    }
    Ok(done)
}
