//! Markov decision processes, two-player game graphs, and the path functionals
//! evaluated over their plays.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Rational;

/// Dense state index. Sub-model constructions return explicit index maps.
pub type StateId = usize;
pub type Weight = i64;
pub type Priority = u32;
pub type StateSet = BTreeSet<StateId>;

/// Transition probability in lowest terms, `0 < p <= 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prob(Ratio<i64>);

impl Prob {
    pub fn new(numer: i64, denom: i64) -> Option<Prob> {
        if denom == 0 {
            return None;
        }
        let r = Ratio::new(numer, denom);
        if r <= Ratio::zero() || r > Ratio::one() {
            return None;
        }
        Some(Prob(r))
    }

    pub fn one() -> Prob {
        Prob(Ratio::one())
    }

    pub fn half() -> Prob {
        Prob(Ratio::new(1, 2))
    }

    pub fn from_ratio(r: Ratio<i64>) -> Option<Prob> {
        Prob::new(*r.numer(), *r.denom())
    }

    pub fn numer(self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(self) -> i64 {
        *self.0.denom()
    }

    pub fn ratio(self) -> Ratio<i64> {
        self.0
    }

    pub fn to_big(self) -> BigRational {
        BigRational::new(BigInt::from(self.numer()), BigInt::from(self.denom()))
    }
}

impl fmt::Debug for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Owner {
    Player1,
    Player2,
    Random,
}

impl Owner {
    pub fn keyword(self) -> &'static str {
        match self {
            Owner::Player1 => "p1",
            Owner::Player2 => "p2",
            Owner::Random => "prob",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum ModelKind {
    Mdp,
    Game,
}

impl ModelKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ModelKind::Mdp => "mdp",
            ModelKind::Game => "game",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateInfo {
    pub name: String,
    pub owner: Owner,
    pub priority: Priority,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: StateId,
    pub dst: StateId,
    pub weight: Weight,
    /// Present exactly on edges leaving probabilistic states.
    pub prob: Option<Prob>,
}

/// A violated model invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    NoOutgoingEdge { state: StateId },
    DanglingEdge { src: StateId, dst: StateId },
    DuplicateEdge { src: StateId, dst: StateId },
    WrongOwner { state: StateId, owner: Owner },
    MissingProbability { src: StateId, dst: StateId },
    UnexpectedProbability { src: StateId, dst: StateId },
    ProbabilitySum { state: StateId, sum: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoOutgoingEdge { state } => {
                write!(f, "totality: state {state} has no outgoing edge")
            }
            Diagnostic::DanglingEdge { src, dst } => {
                write!(f, "edge {src} -> {dst} refers to an unknown state")
            }
            Diagnostic::DuplicateEdge { src, dst } => write!(f, "duplicate edge {src} -> {dst}"),
            Diagnostic::WrongOwner { state, owner } => {
                write!(f, "state {state} has owner {owner:?} not allowed in this model kind")
            }
            Diagnostic::MissingProbability { src, dst } => {
                write!(f, "edge {src} -> {dst} leaves a probabilistic state but has no probability")
            }
            Diagnostic::UnexpectedProbability { src, dst } => {
                write!(f, "edge {src} -> {dst} carries a probability but its source is not probabilistic")
            }
            Diagnostic::ProbabilitySum { state, sum } => {
                write!(f, "distribution of state {state} sums to {sum}, not 1")
            }
        }
    }
}

/// Shared graph storage behind [`Mdp`] and [`GameGraph`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arena {
    kind: ModelKind,
    states: Vec<StateInfo>,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
}

impl Arena {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        0..self.states.len()
    }

    pub fn state(&self, q: StateId) -> &StateInfo {
        &self.states[q]
    }

    pub fn owner(&self, q: StateId) -> Owner {
        self.states[q].owner
    }

    pub fn priority(&self, q: StateId) -> Priority {
        self.states[q].priority
    }

    pub fn name(&self, q: StateId) -> &str {
        &self.states[q].name
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, q: StateId) -> impl Iterator<Item = &Edge> + '_ {
        self.out[q].iter().map(move |&e| &self.edges[e])
    }

    pub fn successors(&self, q: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.out_edges(q).map(|e| e.dst)
    }

    pub fn out_degree(&self, q: StateId) -> usize {
        self.out[q].len()
    }

    pub fn edge(&self, src: StateId, dst: StateId) -> Option<&Edge> {
        self.out_edges(src).find(|e| e.dst == dst)
    }

    /// Largest absolute edge weight `W`.
    pub fn max_weight(&self) -> Weight {
        self.edges.iter().map(|e| e.weight.abs()).max().unwrap_or(0)
    }

    /// Largest priority `d`.
    pub fn max_priority(&self) -> Priority {
        self.states.iter().map(|s| s.priority).max().unwrap_or(0)
    }

    pub fn predecessors(&self) -> Vec<Vec<StateId>> {
        let mut pred = vec![Vec::new(); self.len()];
        for e in &self.edges {
            pred[e.dst].push(e.src);
        }
        pred
    }

    pub fn names(&self) -> Vec<String> {
        self.states.iter().map(|s| s.name.clone()).collect()
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let n = self.len();
        for (q, s) in self.states.iter().enumerate() {
            let allowed = match self.kind {
                ModelKind::Mdp => s.owner != Owner::Player2,
                ModelKind::Game => s.owner != Owner::Random,
            };
            if !allowed {
                diags.push(Diagnostic::WrongOwner { state: q, owner: s.owner });
            }
        }
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                diags.push(Diagnostic::DanglingEdge { src: e.src, dst: e.dst });
                continue;
            }
            if !seen.insert((e.src, e.dst)) {
                diags.push(Diagnostic::DuplicateEdge { src: e.src, dst: e.dst });
            }
            match (self.states[e.src].owner, e.prob) {
                (Owner::Random, None) => {
                    diags.push(Diagnostic::MissingProbability { src: e.src, dst: e.dst })
                }
                (Owner::Player1 | Owner::Player2, Some(_)) => {
                    diags.push(Diagnostic::UnexpectedProbability { src: e.src, dst: e.dst })
                }
                _ => {}
            }
        }
        for q in 0..n {
            if self.out[q].is_empty() {
                diags.push(Diagnostic::NoOutgoingEdge { state: q });
            }
            if self.states[q].owner == Owner::Random && !self.out[q].is_empty() {
                let sum = self
                    .out_edges(q)
                    .filter_map(|e| e.prob)
                    .fold(BigRational::zero(), |acc, p| acc + p.to_big());
                if !sum.is_one() {
                    diags.push(Diagnostic::ProbabilitySum { state: q, sum: sum.to_string() });
                }
            }
        }
        diags
    }

    /// Probability of moving `src -> dst`, one for the chosen edge of a player state.
    pub fn prob(&self, src: StateId, dst: StateId) -> Option<Prob> {
        self.edge(src, dst).map(|e| e.prob.unwrap_or_else(Prob::one))
    }
}

/// Unvalidated model under construction.
#[derive(Clone, Debug)]
pub struct ModelDraft {
    arena: Arena,
}

impl ModelDraft {
    pub fn new(kind: ModelKind) -> Self {
        ModelDraft {
            arena: Arena { kind, states: Vec::new(), edges: Vec::new(), out: Vec::new() },
        }
    }

    pub fn add_state(&mut self, name: impl Into<String>, owner: Owner, priority: Priority) -> StateId {
        self.arena.states.push(StateInfo { name: name.into(), owner, priority });
        self.arena.out.push(Vec::new());
        self.arena.states.len() - 1
    }

    pub fn add_edge(&mut self, src: StateId, dst: StateId, weight: Weight, prob: Option<Prob>) {
        let idx = self.arena.edges.len();
        self.arena.edges.push(Edge { src, dst, weight, prob });
        if src < self.arena.out.len() {
            self.arena.out[src].push(idx);
        }
    }

    pub fn len(&self) -> usize {
        self.arena.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arena.is_empty()
    }

    pub fn set_owner(&mut self, q: StateId, owner: Owner) {
        self.arena.states[q].owner = owner;
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn has_edge(&self, src: StateId, dst: StateId) -> bool {
        self.arena.edge(src, dst).is_some()
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        self.arena.validate()
    }

    pub fn kind(&self) -> ModelKind {
        self.arena.kind
    }

    pub fn into_mdp(self) -> Result<Mdp> {
        if self.arena.kind != ModelKind::Mdp {
            return Err(Error::InvalidParams("draft is a game, not an mdp".into()));
        }
        let diags = self.arena.validate();
        if diags.is_empty() {
            Ok(Mdp(self.arena))
        } else {
            Err(Error::InvalidModel(diags))
        }
    }

    pub fn into_game(self) -> Result<GameGraph> {
        if self.arena.kind != ModelKind::Game {
            return Err(Error::InvalidParams("draft is an mdp, not a game".into()));
        }
        let diags = self.arena.validate();
        if diags.is_empty() {
            Ok(GameGraph(self.arena))
        } else {
            Err(Error::InvalidModel(diags))
        }
    }

    pub fn into_model(self) -> Result<Model> {
        match self.arena.kind {
            ModelKind::Mdp => self.into_mdp().map(Model::Mdp),
            ModelKind::Game => self.into_game().map(Model::Game),
        }
    }
}

/// A validated Markov decision process. Owners are `Player1` or `Random`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mdp(Arena);

/// A validated two-player game graph. Owners are `Player1` or `Player2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameGraph(Arena);

impl Deref for Mdp {
    type Target = Arena;
    fn deref(&self) -> &Arena {
        &self.0
    }
}

impl Deref for GameGraph {
    type Target = Arena;
    fn deref(&self) -> &Arena {
        &self.0
    }
}

impl Mdp {
    pub fn arena(&self) -> &Arena {
        &self.0
    }

    /// Re-opens the model for editing.
    pub fn to_draft(&self) -> ModelDraft {
        ModelDraft { arena: self.0.clone() }
    }

    /// Same graph with every weight replaced by `f(edge)`.
    pub fn map_weights(&self, f: impl Fn(&Edge) -> Weight) -> Mdp {
        let mut arena = self.0.clone();
        for e in &mut arena.edges {
            e.weight = f(e);
        }
        Mdp(arena)
    }

    /// Same graph with priorities replaced by `f(state)`.
    pub fn map_priorities(&self, f: impl Fn(StateId) -> Priority) -> Mdp {
        let mut arena = self.0.clone();
        for (q, s) in arena.states.iter_mut().enumerate() {
            s.priority = f(q);
        }
        Mdp(arena)
    }

    /// Same supports with the distribution of `q` replaced by `f(q)` (edge order).
    /// Panics if a replacement is not a distribution over the same support.
    pub fn map_distributions(&self, f: impl Fn(StateId, usize) -> Vec<Prob>) -> Mdp {
        let mut arena = self.0.clone();
        for q in 0..arena.len() {
            if arena.states[q].owner != Owner::Random {
                continue;
            }
            let probs = f(q, arena.out[q].len());
            assert_eq!(probs.len(), arena.out[q].len());
            for (slot, p) in arena.out[q].clone().into_iter().zip(probs) {
                arena.edges[slot].prob = Some(p);
            }
        }
        assert!(arena.validate().is_empty(), "replacement distribution is invalid");
        Mdp(arena)
    }

    /// View of the same graph as a game where probabilistic choices become adversarial.
    pub fn as_adversarial_game(&self) -> GameGraph {
        let mut arena = self.0.clone();
        arena.kind = ModelKind::Game;
        for s in &mut arena.states {
            if s.owner == Owner::Random {
                s.owner = Owner::Player2;
            }
        }
        for e in &mut arena.edges {
            e.prob = None;
        }
        GameGraph(arena)
    }
}

impl GameGraph {
    pub fn arena(&self) -> &Arena {
        &self.0
    }

    pub fn to_draft(&self) -> ModelDraft {
        ModelDraft { arena: self.0.clone() }
    }

    pub fn map_weights(&self, f: impl Fn(&Edge) -> Weight) -> GameGraph {
        let mut arena = self.0.clone();
        for e in &mut arena.edges {
            e.weight = f(e);
        }
        GameGraph(arena)
    }
}

/// Either kind of validated model, as read from a model file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Model {
    Mdp(Mdp),
    Game(GameGraph),
}

impl Model {
    pub fn arena(&self) -> &Arena {
        match self {
            Model::Mdp(m) => m.arena(),
            Model::Game(g) => g.arena(),
        }
    }
}

pub fn validate(arena: &Arena) -> Vec<Diagnostic> {
    arena.validate()
}

fn check_prefix<'a>(arena: &'a Arena, prefix: &[StateId]) -> Result<Vec<&'a Edge>> {
    let mut edges = Vec::with_capacity(prefix.len().saturating_sub(1));
    for (position, pair) in prefix.windows(2).enumerate() {
        let edge = arena.edge(pair[0], pair[1]).ok_or(Error::InvalidPrefix {
            position,
            from: pair[0],
            to: pair[1],
        })?;
        edges.push(edge);
    }
    Ok(edges)
}

/// Sum of edge weights along `prefix`.
pub fn energy_level(arena: &Arena, prefix: &[StateId]) -> Result<i64> {
    energy_level_by(arena, prefix, |e| e.weight)
}

/// [`energy_level`] with the weight of each traversed edge given by `weight`.
pub fn energy_level_by(arena: &Arena, prefix: &[StateId], weight: impl Fn(&Edge) -> i64) -> Result<i64> {
    Ok(check_prefix(arena, prefix)?.into_iter().map(weight).sum())
}

/// Average weight per step over `prefix`; the finite-horizon mean-payoff estimate.
pub fn running_mean<S: Scalar>(arena: &Arena, prefix: &[StateId]) -> Result<S> {
    if prefix.len() < 2 {
        return Err(Error::EmptyPrefix);
    }
    let total = energy_level(arena, prefix)?;
    Ok(S::from_int(total) / S::from_int(prefix.len() as i64 - 1))
}

/// Winning conditions over infinite plays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Objective {
    Parity,
    Energy { credit: u64 },
    MeanPayoff { threshold: Rational, strict: bool },
    EnergyParity { credit: u64 },
    MeanPayoffParity { threshold: Rational, strict: bool },
    MeanPayoffOrParity { threshold: Rational, strict: bool },
    EnergyOrParity { credit: u64 },
}

/// An ultimately periodic play `stem · cycle^ω`; `cycle` must be non-empty and
/// `stem.last -> cycle[0]` and `cycle.last -> cycle[0]` must be edges.
#[derive(Clone, Debug)]
pub struct Lasso {
    pub stem: Vec<StateId>,
    pub cycle: Vec<StateId>,
}

impl Lasso {
    fn unrolled(&self, cycles: usize) -> Vec<StateId> {
        let mut path = self.stem.clone();
        for _ in 0..cycles {
            path.extend_from_slice(&self.cycle);
        }
        path.push(self.cycle[0]);
        path
    }

    pub fn min_recurring_priority(&self, arena: &Arena) -> Priority {
        self.cycle.iter().map(|&q| arena.priority(q)).min().unwrap_or(0)
    }

    /// Exact limit-average weight of the play.
    pub fn mean_payoff(&self, arena: &Arena) -> Result<Rational> {
        let mut cyc = self.cycle.clone();
        cyc.push(self.cycle[0]);
        let sum = energy_level(arena, &cyc)?;
        Ok(Rational::new(sum.into(), (self.cycle.len() as i64).into()))
    }

    /// Lowest energy level over all prefixes, `None` if it diverges to minus infinity.
    pub fn min_energy(&self, arena: &Arena) -> Result<Option<i64>> {
        let path = self.unrolled(1);
        check_prefix(arena, &path)?;
        let mut cyc = self.cycle.clone();
        cyc.push(self.cycle[0]);
        if energy_level(arena, &cyc)? < 0 {
            return Ok(None);
        }
        let mut level = 0;
        let mut lowest = 0;
        for pair in path.windows(2) {
            level += arena.edge(pair[0], pair[1]).map(|e| e.weight).unwrap_or(0);
            lowest = lowest.min(level);
        }
        Ok(Some(lowest))
    }
}

impl Objective {
    /// Decides whether the lasso play satisfies the objective.
    pub fn holds_on(&self, arena: &Arena, lasso: &Lasso) -> Result<bool> {
        let parity = lasso.min_recurring_priority(arena) % 2 == 0;
        let energy = |credit: u64| -> Result<bool> {
            Ok(matches!(lasso.min_energy(arena)?, Some(low) if credit as i64 + low >= 0))
        };
        let mean = |threshold: &Rational, strict: bool| -> Result<bool> {
            let mp = lasso.mean_payoff(arena)?;
            Ok(if strict { &mp > threshold } else { &mp >= threshold })
        };
        Ok(match self {
            Objective::Parity => parity,
            Objective::Energy { credit } => energy(*credit)?,
            Objective::MeanPayoff { threshold, strict } => mean(threshold, *strict)?,
            Objective::EnergyParity { credit } => parity && energy(*credit)?,
            Objective::MeanPayoffParity { threshold, strict } => parity && mean(threshold, *strict)?,
            Objective::MeanPayoffOrParity { threshold, strict } => parity || mean(threshold, *strict)?,
            Objective::EnergyOrParity { credit } => parity || energy(*credit)?,
        })
    }
}

/// Old-to-new index map of a model transform. Original states keep their
/// index; added states have no preimage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Embedding {
    pub old_to_new: Vec<StateId>,
    pub new_to_old: Vec<Option<StateId>>,
}

impl Embedding {
    pub fn prefix(old: usize, new: usize) -> Self {
        let mut new_to_old = vec![None; new];
        for (q, slot) in new_to_old.iter_mut().enumerate().take(old) {
            *slot = Some(q);
        }
        Embedding { old_to_new: (0..old).collect(), new_to_old }
    }

    pub fn is_identity(&self) -> bool {
        self.old_to_new.len() == self.new_to_old.len()
    }
}

/// Name lookup for reports and error messages.
pub fn names_of(arena: &Arena, set: &StateSet) -> Vec<String> {
    set.iter().map(|&q| arena.name(q).to_string()).collect()
}
