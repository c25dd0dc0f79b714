//! The on-disk repository document: one self-contained JSON file holding the
//! ontology, QoS declarations, services, and optional queries.
//!
//! Set-valued fields serialize as sorted arrays and loading rejects duplicate
//! elements (duplicates are almost always generator bugs). The parameter map
//! serializes as an array of `[name, concept]` pairs so duplicate names are
//! detectable too. See `docs/format.md` for the full schema; the only
//! accepted version string is `"v1"`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{
    canonical_spec, validate_service, Direction, QoSSpec, QoSVector, Query, QueryView,
    ServiceDescriptor, ServiceView,
};
use crate::ontology::{Condition, Ontology};
use crate::{Error, Result};

pub const FORMAT_VERSION: &str = "v1";

/// A fully validated repository.
#[derive(Clone, Debug, PartialEq)]
pub struct RepositoryDocument {
    pub version: String,
    pub metadata: BTreeMap<String, String>,
    pub ontology: Ontology,
    pub qos_specs: Vec<QoSSpec>,
    pub services: Vec<ServiceDescriptor>,
    pub queries: Vec<Query>,
}

impl RepositoryDocument {
    /// Assembles and validates a document from parts.
    pub fn new(
        metadata: BTreeMap<String, String>,
        ontology: Ontology,
        qos_specs: Vec<QoSSpec>,
        services: Vec<ServiceDescriptor>,
        queries: Vec<Query>,
    ) -> Result<Self> {
        let doc = RepositoryDocument {
            version: FORMAT_VERSION.to_string(),
            metadata,
            ontology,
            qos_specs,
            services,
            queries,
        };
        let violations = doc.violations();
        if violations.is_empty() {
            Ok(doc)
        } else {
            Err(Error::Validation(violations))
        }
    }

    /// All structural problems in the document (empty = valid).
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.version != FORMAT_VERSION {
            v.push(format!(
                "unsupported version `{}` (expected `{FORMAT_VERSION}`)",
                self.version
            ));
        }
        let mut names = BTreeSet::new();
        for spec in &self.qos_specs {
            if !names.insert(&spec.name) {
                v.push(format!("duplicate QoS parameter `{}`", spec.name));
            }
            if let Some(canonical) = canonical_spec(&spec.name) {
                if canonical != *spec {
                    v.push(format!(
                        "QoS parameter `{}` must be declared {:?}/{:?}",
                        spec.name, canonical.polarity, canonical.aggregation
                    ));
                }
            }
        }
        let mut ids = BTreeSet::new();
        for s in &self.services {
            if !ids.insert(&s.id) {
                v.push(format!("duplicate service id `{}`", s.id));
            }
            v.extend(validate_service(&self.ontology, &self.qos_specs, s));
        }
        for (i, q) in self.queries.iter().enumerate() {
            if let Err(e) = QueryView::new(&self.ontology, q) {
                v.push(format!("query {i}: {e}"));
            }
            for atom in q.input_spec.atoms.iter().chain(q.output_req.atoms.iter()) {
                if !self.ontology.has_atom(atom) {
                    v.push(format!("query {i}: unknown atom `{atom}`"));
                }
            }
            if q.outputs.is_empty() {
                v.push(format!("query {i}: outputs must be non-empty"));
            }
            for (name, _) in &q.objectives {
                if !names.contains(name) {
                    v.push(format!("query {i}: objective over undeclared QoS `{name}`"));
                }
            }
            for (name, bound) in &q.constraints {
                if !names.contains(name) {
                    v.push(format!("query {i}: constraint over undeclared QoS `{name}`"));
                }
                if !bound.is_finite() {
                    v.push(format!("query {i}: non-finite constraint bound for `{name}`"));
                }
            }
        }
        v
    }

    pub fn spec(&self, name: &str) -> Result<&QoSSpec> {
        self.qos_specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownQos(name.to_string()))
    }

    pub fn service(&self, id: &str) -> Result<&ServiceDescriptor> {
        self.services
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::UnknownService(id.to_string()))
    }

    /// Concept-space views of all services, keyed by id.
    pub fn service_views(&self) -> Result<BTreeMap<String, ServiceView>> {
        self.services
            .iter()
            .map(|s| Ok((s.id.clone(), ServiceView::from_descriptor(&self.ontology, s)?)))
            .collect()
    }
}

/// Exact cardinalities of a document's sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub concepts: usize,
    pub subsumption_edges: usize,
    pub parameters: usize,
    pub atoms: usize,
    pub atom_implications: usize,
    pub qos_parameters: usize,
    pub services: usize,
    pub queries: usize,
}

pub fn summarize(doc: &RepositoryDocument) -> Summary {
    Summary {
        concepts: doc.ontology.concepts().len(),
        subsumption_edges: doc.ontology.subsumption_edges().len(),
        parameters: doc.ontology.parameter_map().len(),
        atoms: doc.ontology.atoms().len(),
        atom_implications: doc.ontology.atom_implications().len(),
        qos_parameters: doc.qos_specs.len(),
        services: doc.services.len(),
        queries: doc.queries.len(),
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<RepositoryDocument> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}

pub fn save(doc: &RepositoryDocument, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json_string(doc))?;
    Ok(())
}

pub fn from_json_str(text: &str) -> Result<RepositoryDocument> {
    let dto: DocDto = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    dto.into_document()
}

/// Deterministic serialization (sorted sets, stable field order).
pub fn to_json_string(doc: &RepositoryDocument) -> String {
    let dto = DocDto::from_document(doc);
    let mut s = serde_json::to_string_pretty(&dto).expect("document serialization cannot fail");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Wire format. Arrays here are *lists* so that duplicate elements survive
// parsing and can be rejected with a precise message during conversion.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DocDto {
    version: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    ontology: OntologyDto,
    #[serde(default)]
    qos_specs: Vec<QoSSpec>,
    #[serde(default)]
    services: Vec<ServiceDto>,
    #[serde(default)]
    queries: Vec<QueryDto>,
}

#[derive(Serialize, Deserialize)]
struct OntologyDto {
    concepts: Vec<String>,
    #[serde(default)]
    subsumption_edges: Vec<(String, String)>,
    #[serde(default)]
    parameter_map: Vec<(String, String)>,
    #[serde(default)]
    atoms: Vec<String>,
    #[serde(default)]
    atom_implications: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct ServiceDto {
    id: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    method: String,
    qos: BTreeMap<String, f64>,
    #[serde(default)]
    pre: Vec<String>,
    #[serde(default)]
    post: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct QueryDto {
    inputs: Vec<String>,
    outputs: Vec<String>,
    #[serde(default)]
    input_spec: Vec<String>,
    #[serde(default)]
    output_req: Vec<String>,
    #[serde(default)]
    objectives: Vec<(String, Direction)>,
    #[serde(default)]
    constraints: Vec<(String, f64)>,
}

fn set_of(items: Vec<String>, what: &str, violations: &mut Vec<String>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for item in items {
        if !out.insert(item.clone()) {
            violations.push(format!("duplicate element `{item}` in {what}"));
        }
    }
    out
}

fn pair_set_of(
    items: Vec<(String, String)>,
    what: &str,
    violations: &mut Vec<String>,
) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for item in items {
        if !out.insert(item.clone()) {
            violations.push(format!("duplicate pair `({}, {})` in {what}", item.0, item.1));
        }
    }
    out
}

impl DocDto {
    fn into_document(self) -> Result<RepositoryDocument> {
        let mut violations = Vec::new();

        let concepts = set_of(self.ontology.concepts, "concepts", &mut violations);
        let subsumption_edges = pair_set_of(
            self.ontology.subsumption_edges,
            "subsumption_edges",
            &mut violations,
        );
        let atoms = set_of(self.ontology.atoms, "atoms", &mut violations);
        let atom_implications = pair_set_of(
            self.ontology.atom_implications,
            "atom_implications",
            &mut violations,
        );
        let mut parameter_map = BTreeMap::new();
        for (name, concept) in self.ontology.parameter_map {
            if parameter_map.insert(name.clone(), concept).is_some() {
                violations.push(format!("duplicate parameter `{name}` in parameter_map"));
            }
        }

        let mut services = Vec::new();
        for dto in self.services {
            let what = format!("service `{}`", dto.id);
            services.push(ServiceDescriptor {
                inputs: set_of(dto.inputs, &format!("{what} inputs"), &mut violations),
                outputs: set_of(dto.outputs, &format!("{what} outputs"), &mut violations),
                pre: Condition {
                    atoms: set_of(dto.pre, &format!("{what} pre"), &mut violations),
                },
                post: Condition {
                    atoms: set_of(dto.post, &format!("{what} post"), &mut violations),
                },
                qos: QoSVector { values: dto.qos },
                id: dto.id,
                method: dto.method,
            });
        }

        let mut queries = Vec::new();
        for (i, dto) in self.queries.into_iter().enumerate() {
            let what = format!("query {i}");
            queries.push(Query {
                inputs: set_of(dto.inputs, &format!("{what} inputs"), &mut violations),
                outputs: set_of(dto.outputs, &format!("{what} outputs"), &mut violations),
                input_spec: Condition {
                    atoms: set_of(dto.input_spec, &format!("{what} input_spec"), &mut violations),
                },
                output_req: Condition {
                    atoms: set_of(dto.output_req, &format!("{what} output_req"), &mut violations),
                },
                objectives: dto.objectives,
                constraints: dto.constraints,
            });
        }

        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }

        let ontology = Ontology::new(
            concepts,
            subsumption_edges,
            parameter_map,
            atoms,
            atom_implications,
        )?;

        if self.version != FORMAT_VERSION {
            return Err(Error::Validation(vec![format!(
                "unsupported version `{}` (expected `{FORMAT_VERSION}`)",
                self.version
            )]));
        }
        let mut doc = RepositoryDocument::new(
            self.metadata,
            ontology,
            self.qos_specs,
            services,
            queries,
        )?;
        doc.version = self.version;
        Ok(doc)
    }

    fn from_document(doc: &RepositoryDocument) -> DocDto {
        DocDto {
            version: doc.version.clone(),
            metadata: doc.metadata.clone(),
            ontology: OntologyDto {
                concepts: doc.ontology.concepts().iter().cloned().collect(),
                subsumption_edges: doc.ontology.subsumption_edges().iter().cloned().collect(),
                parameter_map: doc
                    .ontology
                    .parameter_map()
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
                atoms: doc.ontology.atoms().iter().cloned().collect(),
                atom_implications: doc.ontology.atom_implications().iter().cloned().collect(),
            },
            qos_specs: doc.qos_specs.clone(),
            services: doc
                .services
                .iter()
                .map(|s| ServiceDto {
                    id: s.id.clone(),
                    inputs: s.inputs.iter().cloned().collect(),
                    outputs: s.outputs.iter().cloned().collect(),
                    method: s.method.clone(),
                    qos: s.qos.values.clone(),
                    pre: s.pre.atoms.iter().cloned().collect(),
                    post: s.post.atoms.iter().cloned().collect(),
                })
                .collect(),
            queries: doc
                .queries
                .iter()
                .map(|q| QueryDto {
                    inputs: q.inputs.iter().cloned().collect(),
                    outputs: q.outputs.iter().cloned().collect(),
                    input_spec: q.input_spec.atoms.iter().cloned().collect(),
                    output_req: q.output_req.atoms.iter().cloned().collect(),
                    objectives: q.objectives.clone(),
                    constraints: q.constraints.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "version": "v1",
            "ontology": {
                "concepts": ["A", "B"],
                "subsumption_edges": [["A", "B"]],
                "parameter_map": [["pa", "A"], ["pb", "B"]],
                "atoms": ["t"],
                "atom_implications": []
            },
            "qos_specs": [
                {"name": "response_time", "polarity": "negative", "aggregation": "additive_critical_path"}
            ],
            "services": [
                {"id": "s1", "inputs": ["pa"], "outputs": ["pb"], "method": "m1",
                 "qos": {"response_time": 12.5}, "pre": [], "post": ["t"]}
            ],
            "queries": [
                {"inputs": ["pa"], "outputs": ["pb"], "input_spec": [], "output_req": [],
                 "objectives": [["response_time", "minimize"]],
                 "constraints": [["response_time", 100.0]]}
            ]
        }"#
        .to_string()
    }

    #[test]
    fn loads_a_minimal_document() {
        let doc = from_json_str(&minimal_json()).unwrap();
        assert_eq!(doc.services.len(), 1);
        assert_eq!(doc.queries.len(), 1);
        assert_eq!(doc.services[0].qos.get("response_time").unwrap(), 12.5);
    }

    #[test]
    fn empty_services_list_is_valid() {
        let json = r#"{"version": "v1", "ontology": {"concepts": []}}"#;
        let doc = from_json_str(json).unwrap();
        assert!(doc.services.is_empty());
        assert_eq!(summarize(&doc).services, 0);
    }

    #[test]
    fn cyclic_subsumption_fails_validation() {
        let json = r#"{
            "version": "v1",
            "ontology": {"concepts": ["A", "B"], "subsumption_edges": [["A","B"],["B","A"]]}
        }"#;
        assert!(matches!(from_json_str(json), Err(Error::Validation(_))));
    }

    #[test]
    fn duplicate_set_elements_are_rejected() {
        let json = r#"{
            "version": "v1",
            "ontology": {"concepts": ["A", "A"]}
        }"#;
        match from_json_str(json) {
            Err(Error::Validation(v)) => assert!(v[0].contains("duplicate element `A`")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_parameter_map_names_are_rejected() {
        let json = r#"{
            "version": "v1",
            "ontology": {"concepts": ["A"], "parameter_map": [["p","A"],["p","A"]]}
        }"#;
        assert!(matches!(from_json_str(json), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = from_json_str("{ not json").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line 1")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let json = r#"{"version": "v2", "ontology": {"concepts": []}}"#;
        assert!(matches!(from_json_str(json), Err(Error::Validation(_))));
    }

    #[test]
    fn round_trip_preserves_the_document() {
        let doc = from_json_str(&minimal_json()).unwrap();
        let text = to_json_string(&doc);
        let doc2 = from_json_str(&text).unwrap();
        assert_eq!(doc, doc2);
        // serialization itself is deterministic
        assert_eq!(text, to_json_string(&doc2));
    }

    #[test]
    fn summarize_reports_exact_cardinalities() {
        let doc = from_json_str(&minimal_json()).unwrap();
        let s = summarize(&doc);
        assert_eq!(s.concepts, 2);
        assert_eq!(s.subsumption_edges, 1);
        assert_eq!(s.parameters, 2);
        assert_eq!(s.atoms, 1);
        assert_eq!(s.services, 1);
        assert_eq!(s.queries, 1);
    }

    #[test]
    fn canonical_qos_names_must_keep_their_meaning() {
        let json = r#"{
            "version": "v1",
            "ontology": {"concepts": []},
            "qos_specs": [{"name": "reliability", "polarity": "negative", "aggregation": "multiplicative"}]
        }"#;
        assert!(matches!(from_json_str(json), Err(Error::Validation(_))));
    }
}
