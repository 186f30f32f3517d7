//! Two-player energy Büchi games: minimal initial credits by a saturated
//! credit fixpoint, the explicit credit unfolding, and a Büchi game solver.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arena, GameGraph, ModelDraft, ModelKind, Owner, StateId, StateSet};
use crate::strategy::{Choice, Transducer};

/// Minimal initial credit of one state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Credit {
    Finite(u64),
    Unwinnable,
}

impl Credit {
    pub fn finite(self) -> Option<u64> {
        match self {
            Credit::Finite(c) => Some(c),
            Credit::Unwinnable => None,
        }
    }

    pub fn is_winnable(self) -> bool {
        matches!(self, Credit::Finite(_))
    }
}

impl fmt::Display for Credit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Credit::Finite(c) => write!(f, "{c}"),
            Credit::Unwinnable => write!(f, "unwinnable"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CreditVector(pub Vec<Credit>);

impl CreditVector {
    pub fn get(&self, q: StateId) -> Credit {
        self.0[q]
    }

    pub fn winning(&self) -> StateSet {
        self.0.iter().enumerate().filter(|(_, c)| c.is_winnable()).map(|(q, _)| q).collect()
    }

    pub fn max_finite(&self) -> u64 {
        self.0.iter().filter_map(|c| c.finite()).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_options(&self) -> Vec<Option<u64>> {
        self.0.iter().map(|c| c.finite()).collect()
    }
}

pub(crate) const INF: u64 = u64::MAX;

/// Cap used when none is given: `2·|Q|·W`, at least 1.
pub fn default_cap(g: &Arena) -> u64 {
    (2 * g.len() as u64 * g.max_weight() as u64).max(1)
}

fn check_buchi(g: &Arena) -> Result<()> {
    if let Some(q) = g.states().find(|&q| g.priority(q) > 1) {
        return Err(Error::InvalidParams(format!("state {q} has priority above 1")));
    }
    Ok(())
}

/// Credits with an energy-based witness.
#[derive(Clone, Debug)]
pub struct EnergyBuchiSolution {
    pub credits: CreditVector,
    pub cap: u64,
    /// Memory is the energy level saturated at `cap`.
    pub strategy: Transducer,
}

fn need(x: u64, w: i64, cap: u64) -> u64 {
    if x == INF {
        return INF;
    }
    let v = (x as i128 - w as i128).max(0);
    if v > cap as i128 {
        INF
    } else {
        v as u64
    }
}

/// Controllable predecessor threshold: the least credit at `q` that forces
/// the next state into the region described by `x`, with the witnessing move.
fn cpre(g: &Arena, x: &[u64], q: StateId, cap: u64) -> (u64, Option<StateId>) {
    let mut edges = g.out_edges(q);
    match g.owner(q) {
        Owner::Player1 => {
            let mut best = (INF, None);
            for e in edges.by_ref() {
                let v = need(x[e.dst], e.weight, cap);
                if v < best.0 {
                    best = (v, Some(e.dst));
                }
            }
            best
        }
        _ => (edges.map(|e| need(x[e.dst], e.weight, cap)).max().unwrap_or(INF), None),
    }
}

/// Minimal credits for energy Büchi (`priority 0` states visited infinitely
/// often while the energy level stays non-negative) with levels saturated at
/// `cap` (default [`default_cap`]).
///
/// Computes `νZ. μY. (Büchi ∩ cpre(Z)) ∪ cpre(Y)` over upward-closed sets of
/// `(state, credit)` pairs, each represented by its least credit. This is the
/// winning region of the Büchi game produced by [`unfold_energy`].
pub fn solve_energy_buchi_game(g: &GameGraph, cap: Option<u64>) -> Result<EnergyBuchiSolution> {
    check_buchi(g)?;
    let cap = cap.unwrap_or_else(|| default_cap(g)).max(1);
    Ok(solve_arena(g, cap))
}

pub(crate) fn solve_arena(g: &Arena, cap: u64) -> EnergyBuchiSolution {
    let n = g.len();
    let pred = g.predecessors();
    let buchi: Vec<bool> = (0..n).map(|q| g.priority(q) == 0).collect();
    let mut z = vec![0u64; n];
    loop {
        let (y, marks) = inner_fixpoint(g, &pred, &buchi, &z, cap);
        if y == z {
            let mut strategy = Transducer::energy_based(n, cap);
            for (q, list) in marks.into_iter().enumerate() {
                if g.owner(q) != Owner::Player1 {
                    continue;
                }
                for (v, mv) in list.into_iter().rev() {
                    strategy.push(q, v, Choice::pure(mv));
                }
            }
            let credits = CreditVector(
                y.iter().map(|&v| if v == INF { Credit::Unwinnable } else { Credit::Finite(v) }).collect(),
            );
            return EnergyBuchiSolution { credits, cap, strategy };
        }
        z = y;
    }
}

/// Least fixpoint for a fixed `z`; also returns, per player-1 state, the
/// sequence of (threshold, move) updates in the order they happened.
fn inner_fixpoint(
    g: &Arena,
    pred: &[Vec<StateId>],
    buchi: &[bool],
    z: &[u64],
    cap: u64,
) -> (Vec<u64>, Vec<Vec<(u64, StateId)>>) {
    let n = g.len();
    let mut y = vec![INF; n];
    let mut marks: Vec<Vec<(u64, StateId)>> = vec![Vec::new(); n];
    let mut queued = vec![false; n];
    let mut queue = VecDeque::new();
    for q in 0..n {
        if buchi[q] {
            let (v, mv) = cpre(g, z, q, cap);
            if v < y[q] {
                y[q] = v;
                if let Some(mv) = mv {
                    marks[q].push((v, mv));
                }
                for &p in &pred[q] {
                    if !queued[p] {
                        queued[p] = true;
                        queue.push_back(p);
                    }
                }
            }
        }
    }
    while let Some(q) = queue.pop_front() {
        queued[q] = false;
        let (v, mv) = cpre(g, &y, q, cap);
        if v < y[q] {
            y[q] = v;
            if let Some(mv) = mv {
                marks[q].push((v, mv));
            }
            for &p in &pred[q] {
                if !queued[p] {
                    queued[p] = true;
                    queue.push_back(p);
                }
            }
        }
    }
    (y, marks)
}

/// The Büchi game over `(state, credit)` pairs.
#[derive(Clone, Debug)]
pub struct UnfoldedGame {
    pub game: GameGraph,
    pub cap: u64,
    /// Losing sink reached on energy underflow.
    pub bottom: StateId,
}

impl UnfoldedGame {
    pub fn node(&self, q: StateId, c: u64) -> StateId {
        q * (self.cap as usize + 1) + c as usize
    }
}

/// Explicit unfolding: `(q, c) -> (q', min(cap, c + w))` when `c + w >= 0`,
/// otherwise to the sink. Büchi nodes are `(q, c)` with `priority(q) = 0`.
pub fn unfold_energy(g: &GameGraph, cap: u64) -> Result<UnfoldedGame> {
    check_buchi(g)?;
    if cap == 0 {
        return Err(Error::InvalidParams("cap must be at least 1".into()));
    }
    let width = cap as usize + 1;
    let mut d = ModelDraft::new(ModelKind::Game);
    for q in g.states() {
        for c in 0..width {
            d.add_state(format!("{}@{c}", g.name(q)), g.owner(q), g.priority(q));
        }
    }
    let bottom = d.add_state("bottom", Owner::Player1, 1);
    d.add_edge(bottom, bottom, 0, None);
    for q in g.states() {
        for c in 0..width {
            let src = q * width + c;
            let mut to_bottom = false;
            for e in g.out_edges(q) {
                let level = c as i64 + e.weight;
                if level < 0 {
                    if !to_bottom {
                        d.add_edge(src, bottom, e.weight, None);
                        to_bottom = true;
                    }
                } else {
                    let next = (level as u64).min(cap) as usize;
                    d.add_edge(src, e.dst * width + next, e.weight, None);
                }
            }
        }
    }
    Ok(UnfoldedGame { game: d.into_game()?, cap, bottom })
}

/// Attractor for player 1 (`player1 = true`) or player 2 inside `domain`,
/// with the attracting move for the attracting player's states.
pub fn game_attractor(
    g: &Arena,
    domain: &[bool],
    target: &[bool],
    player1: bool,
) -> (Vec<bool>, Vec<Option<StateId>>) {
    let n = g.len();
    let pred = g.predecessors();
    let mut attr: Vec<bool> = (0..n).map(|q| domain[q] && target[q]).collect();
    let mut mv = vec![None; n];
    let mut remaining: Vec<usize> = (0..n).map(|q| g.successors(q).filter(|&s| domain[s]).count()).collect();
    let mut queue: VecDeque<StateId> = (0..n).filter(|&q| attr[q]).collect();
    while let Some(v) = queue.pop_front() {
        for &u in &pred[v] {
            if !domain[u] || attr[u] {
                continue;
            }
            let mine = (g.owner(u) == Owner::Player1) == player1;
            let join = if mine {
                mv[u] = Some(v);
                true
            } else {
                remaining[u] -= 1;
                remaining[u] == 0
            };
            if join {
                attr[u] = true;
                queue.push_back(u);
            }
        }
    }
    (attr, mv)
}

/// Player-1 winning region of a Büchi game (priority 0 infinitely often) with
/// a memoryless winning strategy on it.
pub fn solve_buchi_game(g: &GameGraph) -> Result<(StateSet, Vec<Option<StateId>>)> {
    check_buchi(g)?;
    let (win, strat) = buchi_region(g);
    Ok((win.iter().enumerate().filter(|(_, &b)| b).map(|(q, _)| q).collect(), strat))
}

pub(crate) fn buchi_region(g: &Arena) -> (Vec<bool>, Vec<Option<StateId>>) {
    let n = g.len();
    let mut w = vec![true; n];
    loop {
        let target: Vec<bool> = (0..n).map(|q| w[q] && g.priority(q) == 0).collect();
        let (reach, mv) = game_attractor(g, &w, &target, true);
        if reach == w {
            let mut strat = vec![None; n];
            for q in 0..n {
                if !w[q] || g.owner(q) != Owner::Player1 {
                    continue;
                }
                strat[q] = if target[q] { g.successors(q).find(|&s| w[s]) } else { mv[q] };
            }
            return (w, strat);
        }
        let rest: Vec<bool> = (0..n).map(|q| w[q] && !reach[q]).collect();
        let (lost, _) = game_attractor(g, &w, &rest, false);
        for q in 0..n {
            if lost[q] {
                w[q] = false;
            }
        }
    }
}

/// Credits read column-wise from the unfolded game's winning region.
pub fn credits_by_unfolding(g: &GameGraph, cap: u64) -> Result<CreditVector> {
    let u = unfold_energy(g, cap)?;
    let (win, _) = buchi_region(&u.game);
    Ok(CreditVector(
        g.states()
            .map(|q| {
                (0..=cap)
                    .find(|&c| win[u.node(q, c)])
                    .map_or(Credit::Unwinnable, Credit::Finite)
            })
            .collect(),
    ))
}
