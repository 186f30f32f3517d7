//! Finite-memory strategies as deterministic transducers, and the controller
//! interface used to drive simulations.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arena, Owner, Prob, StateId, Weight};

/// A distribution over successors. Pure moves have a single entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Choice(pub Vec<(StateId, Prob)>);

impl Choice {
    pub fn pure(q: StateId) -> Choice {
        Choice(vec![(q, Prob::one())])
    }

    /// Uniform over `succ`, which must be non-empty.
    pub fn uniform(succ: &[StateId]) -> Choice {
        let k = succ.len() as i64;
        Choice(succ.iter().map(|&q| (q, Prob::new(1, k).expect("non-empty support"))).collect())
    }

    pub fn as_pure(&self) -> Option<StateId> {
        match self.0.as_slice() {
            [(q, _)] => Some(*q),
            _ => None,
        }
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.0.iter().map(|(q, _)| *q)
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> StateId {
        if let Some(q) = self.as_pure() {
            return q;
        }
        sample_weighted(&self.0, rng)
    }
}

/// Exact inverse-CDF sampling: draws an integer below the common denominator.
pub(crate) fn sample_weighted(dist: &[(StateId, Prob)], rng: &mut dyn RngCore) -> StateId {
    let lcm = dist.iter().fold(1i128, |acc, (_, p)| num_integer::lcm(acc, p.denom() as i128));
    let draw = (((rng.next_u64() as u128) << 64 | rng.next_u64() as u128) % lcm as u128) as i128;
    let mut acc = 0i128;
    for (q, p) in dist {
        acc += p.numer() as i128 * (lcm / p.denom() as i128);
        if draw < acc {
            return *q;
        }
    }
    dist.last().expect("non-empty distribution").0
}

/// How memory evolves along an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryUpdate {
    /// Single memory state.
    Constant,
    /// Memory tracks the energy level, saturated to `0..=cap`.
    EnergyLevel { cap: u64 },
}

/// A deterministic transducer `<Mem, m0, update, next>`.
///
/// `next` is a step function in the memory value: for each controlled state a
/// list of `(threshold, choice)` sorted by threshold, and the move at memory
/// `m` is the entry with the largest threshold `<= m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transducer {
    update: MemoryUpdate,
    moves: Vec<Vec<(u64, Choice)>>,
}

impl Transducer {
    pub fn memoryless(n: usize) -> Self {
        Transducer { update: MemoryUpdate::Constant, moves: vec![Vec::new(); n] }
    }

    pub fn energy_based(n: usize, cap: u64) -> Self {
        Transducer { update: MemoryUpdate::EnergyLevel { cap }, moves: vec![Vec::new(); n] }
    }

    pub fn set(&mut self, q: StateId, choice: Choice) {
        self.moves[q] = vec![(0, choice)];
    }

    /// Adds a breakpoint. Thresholds must be pushed in increasing order.
    pub fn push(&mut self, q: StateId, threshold: u64, choice: Choice) {
        if let Some((last, c)) = self.moves[q].last() {
            assert!(*last < threshold, "thresholds must increase");
            if *c == choice {
                return;
            }
        }
        self.moves[q].push((threshold, choice));
    }

    pub fn update_rule(&self) -> MemoryUpdate {
        self.update
    }

    pub fn memory_size(&self) -> u64 {
        match self.update {
            MemoryUpdate::Constant => 1,
            MemoryUpdate::EnergyLevel { cap } => cap + 1,
        }
    }

    pub fn initial_memory(&self, credit: u64) -> u64 {
        match self.update {
            MemoryUpdate::Constant => 0,
            MemoryUpdate::EnergyLevel { cap } => credit.min(cap),
        }
    }

    pub fn next_memory(&self, m: u64, weight: Weight) -> u64 {
        match self.update {
            MemoryUpdate::Constant => 0,
            MemoryUpdate::EnergyLevel { cap } => (m as i64 + weight).clamp(0, cap as i64) as u64,
        }
    }

    pub fn breakpoints(&self, q: StateId) -> &[(u64, Choice)] {
        &self.moves[q]
    }

    pub fn is_defined(&self, q: StateId) -> bool {
        !self.moves[q].is_empty()
    }

    pub fn next_move(&self, m: u64, q: StateId) -> Option<&Choice> {
        let table = &self.moves[q];
        let idx = table.partition_point(|(t, _)| *t <= m);
        if idx == 0 {
            table.first().map(|(_, c)| c)
        } else {
            Some(&table[idx - 1].1)
        }
    }

    /// Checks that every move follows an edge from a player-1 state.
    pub fn check(&self, arena: &Arena) -> Result<()> {
        if self.moves.len() != arena.len() {
            return Err(Error::InvalidParams("strategy and model sizes differ".into()));
        }
        for (q, table) in self.moves.iter().enumerate() {
            if table.is_empty() {
                continue;
            }
            if arena.owner(q) != Owner::Player1 {
                return Err(Error::InvalidParams(format!("strategy moves at non-player-1 state {q}")));
            }
            for (_, choice) in table {
                for dst in choice.support() {
                    if arena.edge(q, dst).is_none() {
                        return Err(Error::InvalidPrefix { position: 0, from: q, to: dst });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}

/// Something that picks player-1 moves during a play.
pub trait Controller {
    /// Resets internal state for a play starting at `q` with the given credit.
    fn start(&mut self, q: StateId, credit: u64);
    /// Picks a successor of player-1 state `q`.
    fn choose(&mut self, arena: &Arena, q: StateId, rng: &mut dyn RngCore) -> StateId;
    /// Observes the traversed edge.
    fn advance(&mut self, from: StateId, to: StateId, weight: Weight);
}

/// A transducer being executed.
#[derive(Clone, Debug)]
pub struct TransducerRun<'a> {
    pub strategy: &'a Transducer,
    pub memory: u64,
}

impl<'a> TransducerRun<'a> {
    pub fn new(strategy: &'a Transducer) -> Self {
        TransducerRun { strategy, memory: 0 }
    }
}

impl Controller for TransducerRun<'_> {
    fn start(&mut self, _q: StateId, credit: u64) {
        self.memory = self.strategy.initial_memory(credit);
    }

    fn choose(&mut self, arena: &Arena, q: StateId, rng: &mut dyn RngCore) -> StateId {
        match self.strategy.next_move(self.memory, q) {
            Some(c) => c.sample(rng),
            None => arena.successors(q).next().expect("totality"),
        }
    }

    fn advance(&mut self, _from: StateId, _to: StateId, weight: Weight) {
        self.memory = self.strategy.next_memory(self.memory, weight);
    }
}

/// Picks uniformly among all successors.
#[derive(Clone, Debug, Default)]
pub struct RandomController;

impl Controller for RandomController {
    fn start(&mut self, _q: StateId, _credit: u64) {}

    fn choose(&mut self, arena: &Arena, q: StateId, rng: &mut dyn RngCore) -> StateId {
        let succ: Vec<_> = arena.successors(q).collect();
        succ[(rng.next_u64() % succ.len() as u64) as usize]
    }

    fn advance(&mut self, _from: StateId, _to: StateId, _weight: Weight) {}
}
