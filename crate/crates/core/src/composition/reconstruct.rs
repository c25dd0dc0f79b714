//! Reverting abstract plans to the original service space.
//!
//! Every abstract node names a pool of concrete services; reconstruction
//! substitutes one pool member per node — the hierarchy's representative by
//! default, or the member chosen during refinement (the `rebindings` map,
//! keyed by abstract node id). Substituting down a level can change a node's
//! input demands (dominated members demand more specific concepts, tree
//! members demand less specific ones), so after substitution each concrete
//! input lacking an exactly-matching edge gets one added from the node's
//! original producers, falling back to the query inputs. Edges whose concept
//! no longer matches a demand stay in place; they over-feed the consumer,
//! which is harmless.
//!
//! The result's QoS is recomputed from the concrete services rather than
//! copied from the abstract plan: representatives carry their pool's QoS by
//! construction, so the two agree except when two abstract nodes collapse
//! onto one concrete service, where only recomputation is honest.

use std::collections::{BTreeMap, BTreeSet};

use crate::abstraction::AbstractionHierarchy;
use crate::model::{CompositionPlan, Consumer, PlanEdge, Producer, QueryView, ServiceView};
use crate::repository::RepositoryDocument;
use crate::{Error, Result};

use super::aggregate::plan_qos;

fn stale(id: &str, detail: &str) -> Error {
    Error::StaleHierarchy(format!("{detail}: {id}"))
}

/// Resolves one abstract node id to a concrete (level-0) service id.
fn concrete_member(
    hierarchy: &AbstractionHierarchy,
    level: u8,
    id: &str,
    rebindings: &BTreeMap<String, String>,
) -> Result<String> {
    match level {
        0 => Ok(id.to_string()),
        1 => {
            let class = hierarchy
                .class(id)
                .ok_or_else(|| stale(id, "plan references unknown class"))?;
            match rebindings.get(id) {
                None => Ok(class.representative.clone()),
                Some(m) if class.members.contains(m) => Ok(m.clone()),
                Some(m) => Err(stale(m, "rebinding outside the class")),
            }
        }
        2 => {
            let group = hierarchy
                .group(id)
                .ok_or_else(|| stale(id, "plan references unknown group"))?;
            let class_id = match rebindings.get(id) {
                None => group.root.clone(),
                Some(m) if group.members.contains(m) => m.clone(),
                Some(m) => return Err(stale(m, "rebinding outside the group")),
            };
            let class = hierarchy
                .class(&class_id)
                .ok_or_else(|| stale(&class_id, "group member is not a class"))?;
            Ok(class.representative.clone())
        }
        3 => {
            let tree = hierarchy
                .tree(id)
                .ok_or_else(|| stale(id, "plan references unknown tree"))?;
            let class_id = match rebindings.get(id) {
                Some(m) => {
                    let known = tree.tree_members.iter().any(|g| {
                        hierarchy
                            .group(g)
                            .is_some_and(|g| g.members.contains(m))
                    });
                    if !known {
                        return Err(stale(m, "rebinding outside the tree"));
                    }
                    m.clone()
                }
                None => {
                    let group = hierarchy
                        .group(&tree.representative)
                        .ok_or_else(|| stale(&tree.representative, "tree representative is not a group"))?;
                    group.root.clone()
                }
            };
            let class = hierarchy
                .class(&class_id)
                .ok_or_else(|| stale(&class_id, "tree member is not a class"))?;
            Ok(class.representative.clone())
        }
        _ => Err(Error::InvalidArgument(format!(
            "plan level {level} out of range"
        ))),
    }
}

fn producer_covers(
    onto: &crate::ontology::Ontology,
    views: &BTreeMap<String, ServiceView>,
    query: &QueryView,
    producer: &Producer,
    demand: &str,
) -> Result<bool> {
    match producer {
        Producer::QueryInput(param) => match query.input_params.get(param) {
            Some(concept) => onto.subsumes(concept, demand),
            None => Ok(false),
        },
        Producer::Service(id) => {
            let view = views
                .get(id)
                .ok_or_else(|| Error::UnknownService(id.clone()))?;
            for o in &view.outputs {
                if onto.subsumes(o, demand)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Replaces every abstract node of `plan` with a concrete service and repairs
/// the edge set so each concrete input demand is exactly covered. Rebinding
/// values name the refined choice: a concrete service for level-1 plans, a
/// class id for level-2 and level-3 plans (rebindings for nodes absent from
/// the plan are ignored). Fails with a stale-hierarchy error when the plan or
/// a rebinding references pools the hierarchy does not contain.
pub fn reconstruct(
    doc: &RepositoryDocument,
    hierarchy: &AbstractionHierarchy,
    query: &QueryView,
    plan: &CompositionPlan,
    rebindings: &BTreeMap<String, String>,
) -> Result<CompositionPlan> {
    let views = doc.service_views()?;
    let onto = &doc.ontology;

    let mut concrete_of: BTreeMap<String, String> = BTreeMap::new();
    for id in &plan.nodes {
        concrete_of.insert(
            id.clone(),
            concrete_member(hierarchy, plan.level, id, rebindings)?,
        );
    }
    let substitute = |p: &Producer| -> Producer {
        match p {
            Producer::Service(a) => Producer::Service(concrete_of[a].clone()),
            other => other.clone(),
        }
    };

    let mut edges: BTreeSet<PlanEdge> = BTreeSet::new();
    for e in &plan.edges {
        let consumer = match &e.consumer {
            Consumer::Service(a) => Consumer::Service(concrete_of[a].clone()),
            Consumer::Query => Consumer::Query,
        };
        edges.insert(PlanEdge {
            producer: substitute(&e.producer),
            consumer,
            concept: e.concept.clone(),
        });
    }

    for (abstract_id, concrete_id) in &concrete_of {
        let view = views
            .get(concrete_id)
            .ok_or_else(|| Error::UnknownService(concrete_id.clone()))?;
        let demands: Vec<String> = view.inputs.iter().cloned().collect();
        for demand in demands {
            let fed = edges.iter().any(|e| {
                e.concept == demand
                    && matches!(&e.consumer, Consumer::Service(c) if c == concrete_id)
            });
            if fed {
                continue;
            }
            // the node's own producers first, then the query inputs
            let original_producers: BTreeSet<Producer> = plan
                .edges
                .iter()
                .filter(|e| matches!(&e.consumer, Consumer::Service(c) if c == abstract_id))
                .map(|e| substitute(&e.producer))
                .collect();
            let mut chosen: Option<Producer> = None;
            for p in &original_producers {
                if producer_covers(onto, &views, query, p, &demand)? {
                    chosen = Some(p.clone());
                    break;
                }
            }
            if chosen.is_none() {
                for (param, concept) in &query.input_params {
                    if onto.subsumes(concept, &demand)? {
                        chosen = Some(Producer::QueryInput(param.clone()));
                        break;
                    }
                }
            }
            let producer = chosen.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no producer for demand `{demand}` of substituted service `{concrete_id}`"
                ))
            })?;
            edges.insert(PlanEdge {
                producer,
                consumer: Consumer::Service(concrete_id.clone()),
                concept: demand,
            });
        }
    }

    let mut result = CompositionPlan {
        level: 0,
        nodes: concrete_of.values().cloned().collect(),
        edges,
        qos: Default::default(),
    };
    result.qos = plan_qos(&doc.qos_specs, &views, &result)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::validate_plan;
    use crate::model::{canonical_spec, Query, QoSVector, ServiceDescriptor};
    use crate::ontology::{Condition, Ontology};

    fn doc(
        concepts: &[&str],
        edges: &[(&str, &str)],
        params: &[(&str, &str)],
        services: &[(&str, &[&str], &[&str], f64, f64)],
        query: (&[&str], &[&str]),
    ) -> (RepositoryDocument, QueryView) {
        let onto = Ontology::new(
            concepts.iter().map(|s| s.to_string()).collect(),
            edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            params
                .iter()
                .map(|(p, c)| (p.to_string(), c.to_string()))
                .collect(),
            BTreeSet::new(),
            BTreeSet::new(),
        )
        .unwrap();
        let services = services
            .iter()
            .map(|(id, ins, outs, rt, rel)| ServiceDescriptor {
                id: id.to_string(),
                inputs: ins.iter().map(|s| s.to_string()).collect(),
                outputs: outs.iter().map(|s| s.to_string()).collect(),
                method: format!("m_{id}"),
                qos: QoSVector::new([
                    ("response_time".to_string(), *rt),
                    ("reliability".to_string(), *rel),
                ]),
                pre: Condition::truth(),
                post: Condition::truth(),
            })
            .collect();
        let q = Query {
            inputs: query.0.iter().map(|s| s.to_string()).collect(),
            outputs: query.1.iter().map(|s| s.to_string()).collect(),
            input_spec: Condition::truth(),
            output_req: Condition::truth(),
            objectives: vec![],
            constraints: vec![],
        };
        let specs = vec![
            canonical_spec("response_time").unwrap(),
            canonical_spec("reliability").unwrap(),
        ];
        let doc =
            RepositoryDocument::new(BTreeMap::new(), onto, specs, services, vec![q.clone()])
                .unwrap();
        let view = QueryView::new(&doc.ontology, &q).unwrap();
        (doc, view)
    }

    fn edge(producer: Producer, consumer: Consumer, concept: &str) -> PlanEdge {
        PlanEdge {
            producer,
            consumer,
            concept: concept.to_string(),
        }
    }

    fn svc(id: &str) -> Producer {
        Producer::Service(id.to_string())
    }
    fn input(param: &str) -> Producer {
        Producer::QueryInput(param.to_string())
    }
    fn to(id: &str) -> Consumer {
        Consumer::Service(id.to_string())
    }

    /// Two interchangeable text extractors feeding a rater.
    fn level1_fixture() -> (RepositoryDocument, QueryView, AbstractionHierarchy) {
        let (doc, q) = doc(
            &["Img", "Txt", "Rating"],
            &[],
            &[("img", "Img"), ("txt", "Txt"), ("rating", "Rating")],
            &[
                ("a1", &["img"], &["txt"], 40.0, 0.99),
                ("a2", &["img"], &["txt"], 60.0, 0.9),
                ("b1", &["txt"], &["rating"], 30.0, 0.95),
            ],
            (&["img"], &["rating"]),
        );
        let h = AbstractionHierarchy::build(&doc).unwrap();
        (doc, q, h)
    }

    fn level1_plan() -> CompositionPlan {
        CompositionPlan {
            level: 1,
            nodes: ["S1_1", "S1_2"].iter().map(|s| s.to_string()).collect(),
            edges: [
                edge(input("img"), to("S1_1"), "Img"),
                edge(svc("S1_1"), to("S1_2"), "Txt"),
                edge(svc("S1_2"), Consumer::Query, "Rating"),
            ]
            .into_iter()
            .collect(),
            qos: QoSVector::default(),
        }
    }

    #[test]
    fn level1_defaults_substitute_representatives_with_identical_qos() {
        let (doc, q, h) = level1_fixture();
        assert_eq!(h.class("S1_1").unwrap().representative, "a1");
        let out = reconstruct(&doc, &h, &q, &level1_plan(), &BTreeMap::new()).unwrap();
        assert_eq!(out.level, 0);
        assert_eq!(
            out.nodes,
            ["a1", "b1"].iter().map(|s| s.to_string()).collect()
        );
        assert_eq!(out.qos.get("response_time").unwrap(), 70.0);
        assert_eq!(out.qos.get("reliability").unwrap(), 0.99 * 0.95);
        let views = doc.service_views().unwrap();
        assert!(validate_plan(&doc.ontology, &views, &q, &out).is_empty());
    }

    #[test]
    fn level1_rebinding_picks_the_named_member() {
        let (doc, q, h) = level1_fixture();
        let rebind: BTreeMap<String, String> =
            [("S1_1".to_string(), "a2".to_string())].into_iter().collect();
        let out = reconstruct(&doc, &h, &q, &level1_plan(), &rebind).unwrap();
        assert!(out.nodes.contains("a2") && !out.nodes.contains("a1"));
        assert_eq!(out.qos.get("response_time").unwrap(), 90.0);
    }

    #[test]
    fn foreign_rebinding_and_unknown_node_are_stale() {
        let (doc, q, h) = level1_fixture();
        let rebind: BTreeMap<String, String> =
            [("S1_1".to_string(), "b1".to_string())].into_iter().collect();
        assert!(matches!(
            reconstruct(&doc, &h, &q, &level1_plan(), &rebind),
            Err(Error::StaleHierarchy(_))
        ));
        let mut plan = level1_plan();
        plan.nodes.insert("S1_99".to_string());
        assert!(matches!(
            reconstruct(&doc, &h, &q, &plan, &BTreeMap::new()),
            Err(Error::StaleHierarchy(_))
        ));
    }

    #[test]
    fn level0_plan_passes_through_with_recomputed_qos() {
        let (doc, q, h) = level1_fixture();
        let plan = CompositionPlan {
            level: 0,
            nodes: ["a2", "b1"].iter().map(|s| s.to_string()).collect(),
            edges: [
                edge(input("img"), to("a2"), "Img"),
                edge(svc("a2"), to("b1"), "Txt"),
                edge(svc("b1"), Consumer::Query, "Rating"),
            ]
            .into_iter()
            .collect(),
            qos: QoSVector::default(),
        };
        let out = reconstruct(&doc, &h, &q, &plan, &BTreeMap::new()).unwrap();
        assert_eq!(out.nodes, plan.nodes);
        assert_eq!(out.edges, plan.edges);
        assert_eq!(out.qos.get("response_time").unwrap(), 90.0);
    }

    /// `maker` turns raw scans into images; the rating step is a dominance
    /// group whose root reads any `Data` but whose dominated member insists
    /// on an `Img` — rebinding to it forces an edge repair.
    fn level2_fixture() -> (RepositoryDocument, QueryView, AbstractionHierarchy) {
        let (doc, q) = doc(
            &["Raw", "Data", "Img", "Rating", "GenRating"],
            &[("Img", "Data"), ("Rating", "GenRating")],
            &[
                ("raw", "Raw"),
                ("img", "Img"),
                ("data", "Data"),
                ("rating", "Rating"),
                ("gen_rating", "GenRating"),
            ],
            &[
                ("any_rater", &["data"], &["rating"], 50.0, 0.9),
                ("img_rater", &["img"], &["gen_rating"], 20.0, 0.99),
                ("maker", &["raw"], &["img"], 10.0, 0.95),
            ],
            (&["raw"], &["gen_rating"]),
        );
        let h = AbstractionHierarchy::build(&doc).unwrap();
        (doc, q, h)
    }

    #[test]
    fn level2_rebinding_to_a_dominated_member_repairs_the_feed() {
        let (doc, q, h) = level2_fixture();
        // any_rater's class roots the group; img_rater's class is dominated
        let group = h.group("S2_1").unwrap();
        assert_eq!(h.class(&group.root).unwrap().representative, "any_rater");
        assert!(group.members.contains("S1_2"));
        assert_eq!(h.class("S1_2").unwrap().representative, "img_rater");

        let plan = CompositionPlan {
            level: 2,
            nodes: ["S2_1", "S2_2"].iter().map(|s| s.to_string()).collect(),
            edges: [
                edge(input("raw"), to("S2_2"), "Raw"),
                edge(svc("S2_2"), to("S2_1"), "Data"),
                edge(svc("S2_1"), Consumer::Query, "GenRating"),
            ]
            .into_iter()
            .collect(),
            qos: QoSVector::default(),
        };

        let out = reconstruct(&doc, &h, &q, &plan, &BTreeMap::new()).unwrap();
        assert_eq!(
            out.nodes,
            ["any_rater", "maker"].iter().map(|s| s.to_string()).collect()
        );
        assert_eq!(out.edges.len(), 3);

        let rebind: BTreeMap<String, String> =
            [("S2_1".to_string(), "S1_2".to_string())].into_iter().collect();
        let out = reconstruct(&doc, &h, &q, &plan, &rebind).unwrap();
        assert!(out.nodes.contains("img_rater"));
        // the substituted rater demands Img, fed by maker via a repaired edge
        assert!(out.edges.contains(&edge(svc("maker"), to("img_rater"), "Img")));
        // the original Data edge stays as an over-feed
        assert!(out.edges.contains(&edge(svc("maker"), to("img_rater"), "Data")));
        let views = doc.service_views().unwrap();
        assert!(validate_plan(&doc.ontology, &views, &q, &out).is_empty());
        assert_eq!(out.qos.get("response_time").unwrap(), 30.0);
    }

    /// Output-equivalent raters where the general-input one is strictly
    /// faster: the tree roots at the demanding member, represents at the
    /// fast one.
    fn level3_fixture() -> (RepositoryDocument, QueryView, AbstractionHierarchy) {
        let (doc, q) = doc(
            &["Data", "Img", "Rating"],
            &[("Img", "Data")],
            &[("img", "Img"), ("data", "Data"), ("rating", "Rating")],
            &[
                ("gen", &["data"], &["rating"], 10.0, 0.9),
                ("spy", &["img"], &["rating"], 99.0, 0.9),
            ],
            (&["img"], &["rating"]),
        );
        let h = AbstractionHierarchy::build(&doc).unwrap();
        (doc, q, h)
    }

    #[test]
    fn level3_default_walks_representative_then_root_then_member() {
        let (doc, q, h) = level3_fixture();
        let tree = h.tree("S3_2").unwrap();
        assert_eq!(tree.root, "S2_2");
        assert_eq!(tree.representative, "S2_1");
        assert_eq!(tree.tree_members.len(), 2);

        let plan = CompositionPlan {
            level: 3,
            nodes: ["S3_2".to_string()].into_iter().collect(),
            edges: [
                edge(input("img"), to("S3_2"), "Img"),
                edge(svc("S3_2"), Consumer::Query, "Rating"),
            ]
            .into_iter()
            .collect(),
            qos: QoSVector::default(),
        };
        let out = reconstruct(&doc, &h, &q, &plan, &BTreeMap::new()).unwrap();
        assert_eq!(out.nodes, ["gen".to_string()].into_iter().collect());
        // gen demands the broader Data; the query input still covers it
        assert!(out.edges.contains(&edge(input("img"), to("gen"), "Data")));
        assert_eq!(
            out.qos.get("response_time").unwrap(),
            h.level3_views()["S3_2"].qos.get("response_time").unwrap()
        );
        let views = doc.service_views().unwrap();
        assert!(validate_plan(&doc.ontology, &views, &q, &out).is_empty());

        // rebinding to the root's own class keeps the original edge shape
        let rebind: BTreeMap<String, String> =
            [("S3_2".to_string(), "S1_2".to_string())].into_iter().collect();
        let out = reconstruct(&doc, &h, &q, &plan, &rebind).unwrap();
        assert_eq!(out.nodes, ["spy".to_string()].into_iter().collect());
        assert_eq!(out.edges.len(), 2);
        assert_eq!(out.qos.get("response_time").unwrap(), 99.0);
    }
}
