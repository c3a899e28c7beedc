//! Typed-STRIPS PDDL front end: parsing and grounding.
//!
//! Supported requirements are `:strips`, `:typing`, `:equality` (evaluated
//! statically while grounding) and `:action-costs` (parsed, costs ignored).
//! Preconditions and goals are positive conjunctions; `(not (= ?x ?y))` is
//! the only negation accepted.

pub mod ast;
mod ground;
mod parser;
pub mod sexpr;

use thiserror::Error;

pub use ast::{DomainAst, ProblemAst};
pub use ground::ground;
pub use parser::{parse_domain, parse_problem};

use crate::task::{PlanningTask, TaskError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PddlError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("unsupported requirement '{0}'")]
    UnsupportedRequirement(String),
    #[error("unsupported feature at {line}:{col}: {feature}")]
    UnsupportedFeature {
        line: usize,
        col: usize,
        feature: String,
    },
    #[error("type error: {0}")]
    Type(String),
    #[error("problem targets domain '{found}' but domain is '{expected}'")]
    DomainMismatch { expected: String, found: String },
    #[error(transparent)]
    Task(#[from] TaskError),
}

pub fn parse(domain_text: &str, problem_text: &str) -> Result<(DomainAst, ProblemAst), PddlError> {
    let domain = parse_domain(domain_text)?;
    let problem = parse_problem(problem_text, &domain)?;
    Ok((domain, problem))
}

/// Parses and grounds in one step.
pub fn load(domain_text: &str, problem_text: &str) -> Result<PlanningTask, PddlError> {
    let (d, p) = parse(domain_text, problem_text)?;
    ground(&d, &p)
}
