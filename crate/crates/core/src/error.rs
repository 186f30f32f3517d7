use thiserror::Error;

use crate::model::{Diagnostic, StateId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("model is invalid: {}", format_diagnostics(.0))]
    InvalidModel(Vec<Diagnostic>),

    #[error("consecutive states {from} -> {to} at position {position} do not form an edge")]
    InvalidPrefix {
        position: usize,
        from: StateId,
        to: StateId,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("prefix must contain at least one edge")]
    EmptyPrefix,

    #[error("set is not closed: state {state} can leave it")]
    NotClosed { state: StateId },

    #[error("state {0} has no edge inside the set")]
    NoInternalEdge(StateId),

    #[error("set is not an end-component: {0}")]
    NotEndComponent(String),

    #[error("model must alternate between player-1 and probabilistic states (edge {from} -> {to})")]
    NotAlternating { from: StateId, to: StateId },

    #[error("model is not normalized for the gadget reduction: {0}")]
    NotNormalized(String),

    #[error("end-component does not qualify: {0}")]
    NotQualifying(String),

    #[error("guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("internal cross-check failed: {0}")]
    CrossCheck(String),

    #[error("policy iteration did not converge within {0} rounds")]
    NoConvergence(usize),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
