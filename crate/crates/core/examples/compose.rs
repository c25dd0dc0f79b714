//! Minimal programmatic use: load a repository, build the hierarchy once,
//! answer its first query. Run from the workspace root:
//!
//! ```text
//! cargo run -p qosc-core --example compose
//! ```

use qosc_core::abstraction::AbstractionHierarchy;
use qosc_core::composition::SolveOptions;
use qosc_core::model::QueryView;
use qosc_core::refinement::{compose_with_refinement, ComposeOutcome};
use qosc_core::repository;

fn main() -> qosc_core::Result<()> {
    let doc = repository::load("fixtures/running_example.repo.json")?;
    let hierarchy = AbstractionHierarchy::build(&doc)?;          // per-repository
    let query = QueryView::new(&doc.ontology, &doc.queries[0])?; // per-query
    let options = SolveOptions::default();                       // 60 s deadline
    match compose_with_refinement(&doc, &hierarchy, &query, 3, &options)? {
        ComposeOutcome::Solved(result) => println!("{:?}", result.plan),
        ComposeOutcome::NoSolution { .. } => println!("verified: no plan"),
    }
    Ok(())
}
