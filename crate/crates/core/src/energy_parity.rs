//! Almost-sure energy parity for MDPs: reduction of energy Büchi MDPs to
//! two-player games through probabilistic gadgets, the even-priority copy
//! construction, and strategy assembly.

use std::collections::BTreeMap;

use crate::decomposition::restrict;
use crate::energy_game::{default_cap, solve_arena, Credit, CreditVector, EnergyBuchiSolution};
use crate::error::{Error, Result};
use crate::model::{Mdp, ModelDraft, ModelKind, Owner, Priority, Prob, StateId, StateSet};
use crate::strategy::{Choice, Transducer};
use crate::transform::{is_alternating, make_alternating, normalize_for_energy, Alternating};
use crate::GameGraph;

/// Where a node of a gadget game comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GadgetNode {
    Original(StateId),
    Left(StateId),
    Right(StateId),
}

#[derive(Clone, Debug)]
pub struct GadgetGame {
    pub game: GameGraph,
    pub provenance: Vec<GadgetNode>,
}

/// Replaces each probabilistic state `q` by a player-2 node choosing between
/// `(q, L)` (player 1, priority 1) and `(q, R)` (player 2, priority 0), both
/// leading to the successors of `q` with the original weights.
///
/// Requires priorities in `{0, 1}` and probabilistic states of priority 1
/// with at most two successors, as produced by [`normalize_for_energy`].
pub fn gadgetize(m: &Mdp) -> Result<GadgetGame> {
    for q in m.states() {
        if m.priority(q) > 1 {
            return Err(Error::NotNormalized(format!("state {q} has priority {}", m.priority(q))));
        }
        if m.owner(q) == Owner::Random && (m.priority(q) != 1 || m.out_degree(q) > 2) {
            return Err(Error::NotNormalized(format!(
                "probabilistic state {q} must have priority 1 and at most two successors"
            )));
        }
    }
    let mut d = ModelDraft::new(ModelKind::Game);
    let mut provenance = Vec::new();
    for q in m.states() {
        let owner = if m.owner(q) == Owner::Random { Owner::Player2 } else { Owner::Player1 };
        d.add_state(m.name(q), owner, m.priority(q));
        provenance.push(GadgetNode::Original(q));
    }
    for q in m.states() {
        if m.owner(q) != Owner::Random {
            for e in m.out_edges(q) {
                d.add_edge(q, e.dst, e.weight, None);
            }
            continue;
        }
        let l = d.add_state(format!("{}/L", m.name(q)), Owner::Player1, 1);
        let r = d.add_state(format!("{}/R", m.name(q)), Owner::Player2, 0);
        provenance.push(GadgetNode::Left(q));
        provenance.push(GadgetNode::Right(q));
        d.add_edge(q, l, 0, None);
        d.add_edge(q, r, 0, None);
        for e in m.out_edges(q) {
            d.add_edge(l, e.dst, e.weight, None);
            d.add_edge(r, e.dst, e.weight, None);
        }
    }
    Ok(GadgetGame { game: d.into_game()?, provenance })
}

fn check_buchi_mdp(m: &Mdp) -> Result<()> {
    match m.states().find(|&q| m.priority(q) > 1) {
        Some(q) => Err(Error::InvalidParams(format!("state {q} has priority above 1"))),
        None => Ok(()),
    }
}

/// Minimal credits for almost-sure energy Büchi in `m` (priorities in `{0, 1}`).
pub fn solve_energy_buchi_mdp(m: &Mdp) -> Result<CreditVector> {
    check_buchi_mdp(m)?;
    Ok(energy_buchi_mdp(m, None)?.credits)
}

/// Credits and an energy-based strategy over the states of `m`. With no cap
/// the default cap of the gadget game is used.
pub fn energy_buchi_mdp(m: &Mdp, cap: Option<u64>) -> Result<EnergyBuchiSolution> {
    check_buchi_mdp(m)?;
    let (normal, _) = normalize_for_energy(m);
    let gadget = gadgetize(&normal)?;
    let cap = cap.unwrap_or_else(|| default_cap(&gadget.game).max(1));
    let sol = solve_arena(&gadget.game, cap);
    let n = m.len();
    let mut strategy = Transducer::energy_based(n, cap);
    for q in m.states().filter(|&q| m.owner(q) == Owner::Player1) {
        for (t, c) in sol.strategy.breakpoints(q) {
            strategy.push(q, *t, c.clone());
        }
    }
    Ok(EnergyBuchiSolution { credits: CreditVector(sol.credits.0[..n].to_vec()), cap, strategy })
}

/// Where a state of the copy construction comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CopyNode {
    Original(StateId),
    Copy(StateId, Priority),
    Sink,
}

/// The energy Büchi MDP whose copy `i` commits to visiting even priority `i`
/// infinitely often and nothing smaller.
#[derive(Clone, Debug)]
pub struct CopiedMdp {
    pub mdp: Mdp,
    /// States of the source model.
    pub base: usize,
    /// Committed even priorities `0, 2, ..., 2r`.
    pub evens: Vec<Priority>,
    pub sink: StateId,
}

impl CopiedMdp {
    pub fn copy(&self, q: StateId, i: Priority) -> StateId {
        self.base + (i as usize / 2) * self.base + q
    }

    pub fn node(&self, x: StateId) -> CopyNode {
        if x < self.base {
            CopyNode::Original(x)
        } else if x == self.sink {
            CopyNode::Sink
        } else {
            let k = x - self.base;
            CopyNode::Copy(k % self.base, 2 * (k / self.base) as Priority)
        }
    }

    /// States of copy `i` together with the sink.
    pub fn copy_states(&self, i: Priority) -> StateSet {
        let mut s: StateSet = (0..self.base).map(|q| self.copy(q, i)).collect();
        s.insert(self.sink);
        s
    }
}

/// Copy construction over an alternating model.
pub fn parity_to_buchi_copies(m: &Mdp) -> Result<CopiedMdp> {
    if let Some((from, to)) = is_alternating(m) {
        return Err(Error::NotAlternating { from, to });
    }
    let n = m.len();
    let top_even = m.states().map(|q| m.priority(q)).filter(|p| p % 2 == 0).max();
    let evens: Vec<Priority> = match top_even {
        Some(r) => (0..=r).step_by(2).collect(),
        None => Vec::new(),
    };
    let mut d = ModelDraft::new(ModelKind::Mdp);
    for q in m.states() {
        d.add_state(m.name(q), m.owner(q), 1);
    }
    for &i in &evens {
        for q in m.states() {
            let pr = if m.priority(q) == i { 0 } else { 1 };
            d.add_state(format!("{}#{i}", m.name(q)), m.owner(q), pr);
        }
    }
    let sink = d.add_state("sink", Owner::Player1, 1);
    let cm = CopiedMdp { mdp: m.clone(), base: n, evens: evens.clone(), sink };
    d.add_edge(sink, sink, 0, None);
    for q in m.states() {
        for e in m.out_edges(q) {
            d.add_edge(q, e.dst, e.weight, e.prob);
        }
        if m.owner(q) == Owner::Player1 {
            d.add_edge(q, sink, 0, None);
            for &i in &evens {
                d.add_edge(cm.copy(q, i), sink, 0, None);
                for e in m.out_edges(q).filter(|e| m.priority(e.dst) >= i) {
                    d.add_edge(q, cm.copy(e.dst, i), e.weight, None);
                    d.add_edge(cm.copy(q, i), cm.copy(e.dst, i), e.weight, None);
                }
            }
        } else {
            for &i in &evens {
                if m.successors(q).all(|s| m.priority(s) >= i) {
                    for e in m.out_edges(q) {
                        d.add_edge(cm.copy(q, i), cm.copy(e.dst, i), e.weight, e.prob);
                    }
                } else {
                    d.add_edge(cm.copy(q, i), sink, 0, Some(Prob::one()));
                }
            }
        }
    }
    Ok(CopiedMdp { mdp: d.into_mdp()?, ..cm })
}

/// Almost-sure energy parity answer.
#[derive(Clone, Debug)]
pub struct EnergyParityResult {
    pub winning: StateSet,
    pub credits: CreditVector,
    /// Energy-based witness over the states of the input model.
    pub strategy: Transducer,
    /// Committed even priority at each state's minimal credit; `None` while
    /// the strategy is still steering towards a commitment.
    pub copy_index: Vec<Option<Priority>>,
    /// `2·(|Z|+1)·W`.
    pub memory_bound: u64,
}

impl EnergyParityResult {
    pub fn memory_size(&self) -> u64 {
        self.strategy.memory_size()
    }
}

/// Per-copy and reach-phase solutions at a common cap.
struct TwoPhase {
    cont: BTreeMap<Priority, (Vec<StateId>, EnergyBuchiSolution)>,
    phase2: Mdp,
    phase2_sol: EnergyBuchiSolution,
    gates: BTreeMap<StateId, (StateId, Priority)>,
}

impl TwoPhase {
    fn cont(&self, i: Priority, q: StateId, cm: &CopiedMdp) -> Credit {
        let (old, sol) = &self.cont[&i];
        let node = cm.copy(q, i);
        match old.binary_search(&node) {
            Ok(pos) => sol.credits.get(pos),
            Err(_) => Credit::Unwinnable,
        }
    }
}

fn two_phase(alt: &Mdp, cm: &CopiedMdp, cap: Option<u64>) -> Result<TwoPhase> {
    let mut cont = BTreeMap::new();
    for &i in &cm.evens {
        let (sub, old) = restrict(&cm.mdp, &cm.copy_states(i))?;
        let sol = energy_buchi_mdp(&sub, cap)?;
        cont.insert(i, (old, sol));
    }
    let mut tp = TwoPhase {
        cont,
        phase2: alt.clone(),
        phase2_sol: EnergyBuchiSolution { credits: CreditVector::default(), cap: 0, strategy: Transducer::memoryless(0) },
        gates: BTreeMap::new(),
    };
    let mut d = ModelDraft::new(ModelKind::Mdp);
    for q in alt.states() {
        d.add_state(alt.name(q), alt.owner(q), 1);
    }
    let target = d.add_state("committed", Owner::Player1, 0);
    d.add_edge(target, target, 0, None);
    let mut gate_of = BTreeMap::new();
    for q in alt.states() {
        for e in alt.out_edges(q) {
            d.add_edge(q, e.dst, e.weight, e.prob);
        }
    }
    for q in alt.states().filter(|&q| alt.owner(q) == Owner::Player1) {
        for e in alt.out_edges(q) {
            for &i in &cm.evens {
                if alt.priority(e.dst) < i {
                    continue;
                }
                let Credit::Finite(c) = tp.cont(i, e.dst, cm) else { continue };
                let gate = *gate_of.entry((e.dst, i)).or_insert_with(|| {
                    let g = d.add_state(format!("{}#{i}!", alt.name(e.dst)), Owner::Player1, 1);
                    d.add_edge(g, target, -(c as i64), None);
                    g
                });
                tp.gates.insert(gate, (e.dst, i));
                d.add_edge(q, gate, e.weight, None);
            }
        }
    }
    tp.phase2 = d.into_mdp()?;
    tp.phase2_sol = energy_buchi_mdp(&tp.phase2, cap)?;
    Ok(tp)
}

fn credits_of(tp: &TwoPhase, n: usize) -> Vec<Credit> {
    tp.phase2_sol.credits.0[..n].to_vec()
}

/// Almost-sure energy parity: winning set, minimal credits and an
/// energy-based witness strategy.
///
/// The credits are computed twice, once on the full copy construction and
/// once copy by copy followed by a reach phase whose targets demand the
/// continuation credit of the copy; disagreement is reported as an error.
pub fn solve_energy_parity(m: &Mdp) -> Result<EnergyParityResult> {
    let n = m.len();
    let alt = make_alternating(m);
    let cm = parity_to_buchi_copies(&alt.mdp)?;
    let w = m.max_weight().max(0) as u64;
    // credits of the source model, hence of every copy, stay below this
    let cap = Some(2 * (n as u64 + 1) * w.max(1));
    let one_shot = energy_buchi_mdp(&cm.mdp, cap)?;
    let credits: Vec<Credit> = one_shot.credits.0[..n].to_vec();

    let full = two_phase(&alt.mdp, &cm, cap)?;
    let split = credits_of(&full, n);
    if split != credits {
        return Err(Error::CrossCheck(format!(
            "copy-wise credits {split:?} differ from one-shot credits {credits:?}"
        )));
    }
    let winning: StateSet = (0..n).filter(|&q| credits[q].is_winnable()).collect();
    let memory_bound = 2 * (winning.len() as u64 + 1) * w;

    let (level_cap, tp) = minimal_uniform_cap(&alt.mdp, &cm, &credits, n)?;
    let strategy = assemble(m, &alt, &cm, &tp, level_cap, &winning);

    let copy_index = (0..n)
        .map(|q| {
            let c = credits[q].finite()?;
            cm.evens.iter().copied().find(|&i| matches!(tp.cont(i, q, &cm), Credit::Finite(k) if k <= c))
        })
        .collect();
    Ok(EnergyParityResult { winning, credits: CreditVector(credits), strategy, copy_index, memory_bound })
}

/// Smallest cap at which the two-phase computation already yields the exact
/// credits: galloping from the largest credit, then bisection.
fn minimal_uniform_cap(alt: &Mdp, cm: &CopiedMdp, credits: &[Credit], n: usize) -> Result<(u64, TwoPhase)> {
    let exact = |cap: u64| -> Result<Option<TwoPhase>> {
        let tp = two_phase(alt, cm, Some(cap))?;
        Ok((credits_of(&tp, n) == credits).then_some(tp))
    };
    let start = credits.iter().filter_map(|c| c.finite()).max().unwrap_or(0);
    if start == 0 {
        if let Some(tp) = exact(0)? {
            return Ok((0, tp));
        }
    }
    let start = start.max(1);
    let mut lo = start - 1;
    let mut hi = start;
    let mut best;
    loop {
        if let Some(tp) = exact(hi)? {
            best = tp;
            break;
        }
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::CrossCheck("cap search overflow".into()))?;
        if hi > 1 << 40 {
            return Err(Error::CrossCheck("no uniform cap reproduces the credits".into()));
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match exact(mid)? {
            Some(tp) => {
                hi = mid;
                best = tp;
            }
            None => lo = mid,
        }
    }
    Ok((hi, best))
}

/// Lifts an alternating-model successor back to the source model.
fn lift(alt: &Alternating, q: StateId, succ: StateId, n: usize) -> StateId {
    if succ < n {
        return succ;
    }
    match alt.relay_edge(succ) {
        Some((src, dst)) if src == q => dst,
        _ => succ,
    }
}

fn assemble(
    m: &Mdp,
    alt: &Alternating,
    cm: &CopiedMdp,
    tp: &TwoPhase,
    cap: u64,
    winning: &StateSet,
) -> Transducer {
    let n = m.len();
    let mut t = Transducer::energy_based(n, cap);
    for q in m.states().filter(|&q| m.owner(q) == Owner::Player1) {
        let fallback = m.successors(q).next().unwrap();
        for e in 0..=cap {
            let mut choice = None;
            if winning.contains(&q) {
                for &i in &cm.evens {
                    if !matches!(tp.cont(i, q, cm), Credit::Finite(k) if k <= e) {
                        continue;
                    }
                    let (old, sol) = &tp.cont[&i];
                    let node = old.binary_search(&cm.copy(q, i)).unwrap();
                    let next = sol.strategy.next_move(sol.strategy.initial_memory(e), node);
                    if let Some(s) = next.and_then(Choice::as_pure) {
                        if let CopyNode::Copy(target, _) = cm.node(old[s]) {
                            choice = Some(lift(alt, q, target, n));
                        }
                    }
                    break;
                }
                if choice.is_none() {
                    let strat = &tp.phase2_sol.strategy;
                    if let Some(s) = strat.next_move(strat.initial_memory(e), q).and_then(Choice::as_pure) {
                        let s = tp.gates.get(&s).map_or(s, |&(dst, _)| dst);
                        choice = Some(lift(alt, q, s, n));
                    }
                }
            }
            let pick = choice.filter(|s| m.edge(q, *s).is_some()).unwrap_or(fallback);
            t.push(q, e, Choice::pure(pick));
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn gadget_of_recharge_loop() {
        let m = fixtures::recharge_loop();
        let g = gadgetize(&m).unwrap();
        assert_eq!(g.game.len(), 5);
        assert_eq!(g.game.owner(1), Owner::Player2);
        assert_eq!(g.provenance[3], GadgetNode::Left(1));
        assert_eq!(g.game.owner(3), Owner::Player1);
        assert_eq!(g.game.priority(3), 1);
        assert_eq!(g.game.owner(4), Owner::Player2);
        assert_eq!(g.game.priority(4), 0);
        assert_eq!(g.game.edge(1, 3).unwrap().weight, 0);
        let mut succ: Vec<_> = g.game.successors(4).collect();
        succ.sort();
        assert_eq!(succ, vec![0, 2]);
    }

    #[test]
    fn gadget_without_random_states() {
        let mut d = ModelDraft::new(ModelKind::Mdp);
        let a = d.add_state("a", Owner::Player1, 0);
        d.add_edge(a, a, 2, None);
        let m = d.into_mdp().unwrap();
        let g = gadgetize(&m).unwrap();
        assert_eq!(g.game.len(), 1);
        assert_eq!(g.game.owner(0), Owner::Player1);
    }

    #[test]
    fn leaky_chain_gadget_matches_fixture() {
        let g = gadgetize(&fixtures::leaky_chain()).unwrap();
        let fixture = fixtures::leaky_chain_gadget();
        assert_eq!(g.game.len(), fixture.len());
        for (node, expect) in [(0, 0), (2, 1), (3, 2), (1, 3)] {
            assert_eq!(g.game.owner(node), fixture.owner(expect));
            assert_eq!(g.game.priority(node), fixture.priority(expect));
        }
    }

    #[test]
    fn gadget_rejects_unnormalized() {
        let mut d = ModelDraft::new(ModelKind::Mdp);
        let a = d.add_state("a", Owner::Random, 0);
        d.add_edge(a, a, 0, Some(Prob::one()));
        assert!(matches!(gadgetize(&d.into_mdp().unwrap()), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn energy_buchi_mdp_examples() {
        let c = solve_energy_buchi_mdp(&fixtures::recharge_loop()).unwrap();
        assert_eq!(c.get(0), Credit::Finite(0));
        let c = solve_energy_buchi_mdp(&fixtures::leaky_chain()).unwrap();
        assert_eq!(c.get(0), Credit::Unwinnable);
    }

    #[test]
    fn copies_count_and_sink_rule() {
        let alt = make_alternating(&fixtures::recharge_loop());
        let cm = parity_to_buchi_copies(&alt.mdp).unwrap();
        let n = alt.mdp.len();
        assert_eq!(cm.mdp.len(), 2 * n + 1);
        let buchi: Vec<_> = cm.mdp.states().filter(|&q| cm.mdp.priority(q) == 0).collect();
        assert_eq!(buchi, vec![cm.copy(2, 0), cm.copy(alt.relays[&(2, 0)], 0)]);
        assert_eq!(cm.node(cm.copy(2, 0)), CopyNode::Copy(2, 0));
        assert!(matches!(
            parity_to_buchi_copies(&fixtures::recharge_loop()),
            Err(Error::NotAlternating { .. })
        ));

        let mut d = ModelDraft::new(ModelKind::Mdp);
        let a = d.add_state("a", Owner::Player1, 2);
        let r = d.add_state("r", Owner::Random, 2);
        let b = d.add_state("b", Owner::Player1, 1);
        d.add_edge(a, r, 0, None);
        d.add_edge(r, a, 0, Prob::new(1, 2));
        d.add_edge(r, b, 0, Prob::new(1, 2));
        d.add_edge(b, r, 0, None);
        let cm = parity_to_buchi_copies(&d.into_mdp().unwrap()).unwrap();
        assert_eq!(cm.mdp.successors(cm.copy(r, 2)).collect::<Vec<_>>(), vec![cm.sink]);
        assert_eq!(cm.evens, vec![0, 2]);
    }

    #[test]
    fn recharge_loop_energy_parity() {
        let res = solve_energy_parity(&fixtures::recharge_loop()).unwrap();
        assert_eq!(res.winning, [0, 1, 2].into());
        assert_eq!(res.credits.0, vec![Credit::Finite(0), Credit::Finite(10), Credit::Finite(10)]);
        assert!(res.memory_size() <= res.memory_bound);
        res.strategy.check(&fixtures::recharge_loop()).unwrap();
    }

    #[test]
    fn leaky_chain_energy_parity() {
        let res = solve_energy_parity(&fixtures::leaky_chain()).unwrap();
        assert_eq!(res.winning, [1].into());
        assert_eq!(res.credits.get(0), Credit::Unwinnable);
    }

    #[test]
    fn all_odd_priorities_lose() {
        let m = fixtures::recharge_loop().map_priorities(|_| 3);
        let res = solve_energy_parity(&m).unwrap();
        assert!(res.winning.is_empty());
    }
}
