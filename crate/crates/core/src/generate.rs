//! Seeded random models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelDraft, ModelKind, Owner, Priority, Prob, StateId, Weight};
use crate::{GameGraph, Mdp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub states: usize,
    /// Weights are drawn from `-max_weight..=max_weight`.
    pub max_weight: Weight,
    /// Priorities are drawn from `0..=max_priority`.
    pub max_priority: Priority,
    /// Probability of each ordered pair being an edge.
    pub density: f64,
    /// Fraction of states that are random (or player 2 in games).
    pub random_fraction: f64,
    pub kind: ModelKind,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            states: 6,
            max_weight: 3,
            max_priority: 4,
            density: 0.3,
            random_fraction: 0.4,
            kind: ModelKind::Mdp,
            seed: 0,
        }
    }
}

impl GenParams {
    fn check(&self) -> Result<()> {
        if self.states == 0 {
            return Err(Error::InvalidParams("at least one state is required".into()));
        }
        if self.max_weight < 0 {
            return Err(Error::InvalidParams("max_weight must be non-negative".into()));
        }
        for (name, v) in [("density", self.density), ("random_fraction", self.random_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Splits one into `k` positive parts with small denominators.
fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<Prob> {
    let parts: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
    let total: i64 = parts.iter().sum();
    parts.into_iter().map(|p| Prob::new(p, total).expect("positive part")).collect()
}

fn add_edges(d: &mut ModelDraft, rng: &mut ChaCha8Rng, q: StateId, succ: &[StateId], w: Weight, mdp: bool) {
    let random = mdp && d.arena().owner(q) == Owner::Random;
    let probs = random.then(|| random_distribution(rng, succ.len()));
    for (j, &s) in succ.iter().enumerate() {
        let weight = rng.gen_range(-w..=w);
        d.add_edge(q, s, weight, probs.as_ref().map(|p| p[j]));
    }
}

fn opponent(kind: ModelKind) -> Owner {
    match kind {
        ModelKind::Mdp => Owner::Random,
        ModelKind::Game => Owner::Player2,
    }
}

/// A random model. States left without edges get a weight-0 self-loop and
/// the maximal priority.
pub fn random_instance(params: &GenParams) -> Result<Model> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.states;
    let mut d = ModelDraft::new(params.kind);
    for q in 0..n {
        let owner = if rng.gen_bool(params.random_fraction) { opponent(params.kind) } else { Owner::Player1 };
        let priority = rng.gen_range(0..=params.max_priority);
        d.add_state(format!("s{q}"), owner, priority);
    }
    let mdp = params.kind == ModelKind::Mdp;
    let mut lonely = Vec::new();
    for q in 0..n {
        let succ: Vec<StateId> = (0..n).filter(|_| rng.gen_bool(params.density)).collect();
        if succ.is_empty() {
            lonely.push(q);
        } else {
            add_edges(&mut d, &mut rng, q, &succ, params.max_weight, mdp);
        }
    }
    if lonely.is_empty() {
        return d.into_model();
    }
    // repair totality
    let arena = d.arena().clone();
    let mut fixed = ModelDraft::new(params.kind);
    for q in arena.states() {
        let p = if lonely.contains(&q) { params.max_priority } else { arena.priority(q) };
        fixed.add_state(arena.name(q), arena.owner(q), p);
    }
    for e in arena.edges() {
        fixed.add_edge(e.src, e.dst, e.weight, e.prob);
    }
    for q in lonely {
        fixed.add_edge(q, q, 0, mdp.then(Prob::one).filter(|_| arena.owner(q) == Owner::Random));
    }
    fixed.into_model()
}

pub fn random_mdp(params: &GenParams) -> Result<Mdp> {
    match random_instance(&GenParams { kind: ModelKind::Mdp, ..params.clone() })? {
        Model::Mdp(m) => Ok(m),
        Model::Game(_) => unreachable!("kind is mdp"),
    }
}

pub fn random_game(params: &GenParams) -> Result<GameGraph> {
    match random_instance(&GenParams { kind: ModelKind::Game, ..params.clone() })? {
        Model::Game(g) => Ok(g),
        Model::Mdp(_) => unreachable!("kind is game"),
    }
}

/// A random MDP that is a single end-component: a Hamiltonian cycle plus
/// extra edges with probability `density`, at most `max_out` per state.
pub fn random_mec(params: &GenParams, max_out: usize) -> Result<Mdp> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.states;
    let mut order: Vec<StateId> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut d = ModelDraft::new(ModelKind::Mdp);
    for q in 0..n {
        let owner = if rng.gen_bool(params.random_fraction) { Owner::Random } else { Owner::Player1 };
        d.add_state(format!("s{q}"), owner, rng.gen_range(0..=params.max_priority));
    }
    for i in 0..n {
        let q = order[i];
        let mut succ = vec![order[(i + 1) % n]];
        for s in 0..n {
            if succ.len() < max_out.max(1) && !succ.contains(&s) && rng.gen_bool(params.density) {
                succ.push(s);
            }
        }
        add_edges(&mut d, &mut rng, q, &succ, params.max_weight, true);
    }
    d.into_mdp()
}
