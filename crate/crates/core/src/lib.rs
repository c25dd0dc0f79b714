//! QoS-aware semantic service composition.
//!
//! The engine answers composition queries over a repository of semantically
//! described services. To keep the search space manageable it precomputes a
//! three-level abstraction hierarchy:
//!
//! 1. **Equivalence classes** — functionally interchangeable services collapse
//!    into one abstract service carrying a representative's QoS.
//! 2. **Dominance groups** — services whose functionality is covered by a
//!    non-dominated root disappear behind that root.
//! 3. **IIOE trees** — output-equivalent services whose activation is implied
//!    by another's activation form trees; only roots participate in planning.
//!
//! Queries are solved on the abstract space and the solution is reconstructed
//! back to concrete services. When QoS constraints fail on the abstract
//! solution, *partial refinement* re-selects representatives inside the fixed
//! plan topology; if that is impossible, *complete refinement* drops one
//! abstraction level and re-plans, down to the original repository, which
//! guarantees completeness.

pub mod abstraction;
pub mod bench;
pub mod composition;
pub mod datagen;
pub mod model;
pub mod ontology;
pub mod refinement;
pub mod repository;

use thiserror::Error;

/// Unified error type for the whole engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown concept: {0}")]
    UnknownConcept(String),
    #[error("unknown parameter: {0}")]
    UnknownParameter(String),
    #[error("unknown atom: {0}")]
    UnknownAtom(String),
    #[error("unknown service: {0}")]
    UnknownService(String),
    #[error("unknown QoS parameter: {0}")]
    UnknownQos(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no solution")]
    NoSolution,
    #[error("deadline elapsed before a solution was found")]
    Timeout,
    #[error("stale hierarchy: {0}")]
    StaleHierarchy(String),
    #[error("infeasible generator config: {0}")]
    InfeasibleConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
