//! Small hand-checkable models used by tests, examples and the CLI.

use crate::energy_game::{Credit, CreditVector};
use crate::model::{GameGraph, Mdp, ModelDraft, ModelKind, Owner, Prob};

/// `q0` (player 1, priority 1) charges `+1` on a self-loop or pays `-10` to
/// reach the coin `q1`, which returns to `q0` or moves to the Büchi state
/// `q2` (priority 0); leaving `q2` costs `-10`.
pub fn recharge_loop() -> Mdp {
    let mut d = ModelDraft::new(ModelKind::Mdp);
    let q0 = d.add_state("q0", Owner::Player1, 1);
    let q1 = d.add_state("q1", Owner::Random, 1);
    let q2 = d.add_state("q2", Owner::Player1, 0);
    d.add_edge(q0, q0, 1, None);
    d.add_edge(q0, q1, -10, None);
    d.add_edge(q1, q0, 0, Some(Prob::half()));
    d.add_edge(q1, q2, 0, Some(Prob::half()));
    d.add_edge(q2, q0, -10, None);
    d.into_mdp().expect("fixture is valid")
}

/// A coin `a` (priority 1) that loses one unit and retries, or escapes to the
/// absorbing state `b` (priority 0).
pub fn leaky_chain() -> Mdp {
    let mut d = ModelDraft::new(ModelKind::Mdp);
    let a = d.add_state("a", Owner::Random, 1);
    let b = d.add_state("b", Owner::Player1, 0);
    d.add_edge(a, a, -1, Some(Prob::half()));
    d.add_edge(a, b, 0, Some(Prob::half()));
    d.add_edge(b, b, 0, None);
    d.into_mdp().expect("fixture is valid")
}

/// Gadget game of [`leaky_chain`]: `a` (player 2) picks `L` (player 1,
/// priority 1) or `R` (player 2, priority 0); both return to `a` at cost 1
/// or move to `b`.
pub fn leaky_chain_gadget() -> GameGraph {
    let mut d = ModelDraft::new(ModelKind::Game);
    let a = d.add_state("a", Owner::Player2, 1);
    let l = d.add_state("L", Owner::Player1, 1);
    let r = d.add_state("R", Owner::Player2, 0);
    let b = d.add_state("b", Owner::Player1, 0);
    d.add_edge(a, l, 0, None);
    d.add_edge(a, r, 0, None);
    d.add_edge(l, a, -1, None);
    d.add_edge(l, b, 0, None);
    d.add_edge(r, a, -1, None);
    d.add_edge(r, b, 0, None);
    d.add_edge(b, b, 0, None);
    d.into_game().expect("fixture is valid")
}

/// Hand-derived credits of [`leaky_chain_gadget`]: player 2 cycles through
/// `R` from `a` and `R`; `L` escapes to `b`.
pub fn leaky_chain_gadget_credits() -> CreditVector {
    CreditVector(vec![Credit::Unwinnable, Credit::Finite(0), Credit::Unwinnable, Credit::Finite(0)])
}
