//! Almost-sure mean-payoff parity: winning end-components, reachability
//! composition, the round-based witness strategy, and the disjunctions of
//! parity with mean payoff or energy.

use std::collections::BTreeMap;

use rand::RngCore;

use crate::decomposition::{
    almost_sure_reach_strategy, almost_sure_reach_within, full_mask, mask_of, mec_decompose,
    mec_decompose_within, random_attractor_within, reach_value, restrict, set_of, EndComponent, Mask,
};
use num_rational::Ratio;

use crate::energy_game::{default_cap, solve_arena, Credit, CreditVector};
use crate::energy_parity::energy_buchi_mdp;
use crate::error::{Error, Result};
use crate::meanpayoff::mec_value;
use crate::model::{Arena, GameGraph, Mdp, ModelDraft, ModelKind, Owner, Priority, Prob, StateId, StateSet, Weight};
use crate::strategy::Controller;
use crate::Rational;

pub(crate) fn meets(gain: &Rational, threshold: &Rational, strict: bool) -> bool {
    if strict {
        gain > threshold
    } else {
        gain >= threshold
    }
}

/// One round of the winning end-component search, for even priority `priority`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    pub priority: Priority,
    /// States of the sub-MDP entering this round.
    pub domain: StateSet,
    /// Maximal end-components using only priorities `>= priority` and containing it.
    pub candidates: Vec<StateSet>,
    /// Candidates whose optimal gain meets the threshold, with that gain.
    pub qualified: Vec<(StateSet, Rational)>,
    pub win: StateSet,
    /// Random attractor of `win` inside `domain`, removed before the next round.
    pub attractor: StateSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WinningEcReport {
    pub iterations: Vec<IterationTrace>,
    pub win: StateSet,
}

/// End-components with even minimum priority `2i` using no smaller priority,
/// found inside `domain`: remove the random attractor of priorities below
/// `2i`, decompose the rest, keep components containing `2i`.
fn candidates_at(m: &Mdp, domain: &[bool], priority: Priority) -> (Vec<EndComponent>, Mask) {
    let n = m.len();
    let low: Mask = (0..n).map(|q| domain[q] && m.priority(q) < priority).collect();
    let attr = random_attractor_within(m, domain, &low);
    let sub: Mask = (0..n).map(|q| domain[q] && !attr[q]).collect();
    let dec = mec_decompose_within(m, &sub);
    let cands = dec
        .components
        .into_iter()
        .filter(|u| u.states.iter().any(|&q| m.priority(q) == priority))
        .collect();
    (cands, sub)
}

/// Union of all winning end-components for mean payoff `>= threshold`
/// (`>` when `strict`) together with parity, with the per-round trace.
pub fn winning_end_components(m: &Mdp, threshold: &Rational, strict: bool) -> Result<WinningEcReport> {
    let n = m.len();
    let mut domain = full_mask(n);
    let mut iterations = Vec::new();
    let mut win = StateSet::new();
    for half in 0..=(m.max_priority() / 2) {
        let priority = 2 * half;
        let (cands, _) = candidates_at(m, &domain, priority);
        let mut qualified = Vec::new();
        for u in &cands {
            let v = mec_value::<Rational>(m, u)?;
            if meets(&v.gain, threshold, strict) {
                qualified.push((u.states.clone(), v.gain));
            }
        }
        let round_win: StateSet = qualified.iter().flat_map(|(s, _)| s.iter().copied()).collect();
        let attr = random_attractor_within(m, &domain, &mask_of(n, &round_win));
        let trace = IterationTrace {
            priority,
            domain: set_of(&domain),
            candidates: cands.into_iter().map(|u| u.states).collect(),
            qualified,
            win: round_win.clone(),
            attractor: set_of(&attr),
        };
        for q in 0..n {
            if attr[q] {
                domain[q] = false;
            }
        }
        win.extend(round_win);
        iterations.push(trace);
    }
    Ok(WinningEcReport { iterations, win })
}

#[derive(Clone, Debug)]
pub struct MpParityResult {
    pub almost_sure: StateSet,
    pub report: WinningEcReport,
    /// Memoryless strategy steering into the winning end-components.
    pub reach_strategy: Vec<Option<StateId>>,
}

/// States winning mean-payoff parity almost surely: almost-sure reachability
/// of the winning end-components.
pub fn solve_mp_parity(m: &Mdp, threshold: &Rational, strict: bool) -> Result<MpParityResult> {
    let report = winning_end_components(m, threshold, strict)?;
    let n = m.len();
    let target = mask_of(n, &report.win);
    let win = almost_sure_reach_within(m, &full_mask(n), &target);
    Ok(MpParityResult {
        almost_sure: set_of(&win),
        reach_strategy: almost_sure_reach_strategy(m, &win, &target),
        report,
    })
}

/// Maximal probability of mean-payoff parity per state.
pub fn mp_parity_values(m: &Mdp, threshold: &Rational, strict: bool) -> Result<Vec<Rational>> {
    let report = winning_end_components(m, threshold, strict)?;
    reach_value::<Rational>(m, &report.win)
}

/// Round lengths of the gain stage grow at least like this.
pub fn schedule(round: u64) -> u64 {
    round * round
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    SeekPriority,
    PlayGain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundStrategyState {
    pub round: u64,
    pub stage: Stage,
    pub steps: u64,
    /// Length of this round's seek stage.
    pub seek_steps: u64,
    /// Length of this round's gain stage.
    pub target: u64,
}

impl RoundStrategyState {
    pub fn epsilon(&self) -> f64 {
        1.0 / self.round as f64
    }
}

/// The round-based witness inside a qualifying end-component: seek the
/// minimum priority, then follow the optimal-gain policy for a number of steps
/// that outgrows both the schedule and `round · seek_steps · W`.
#[derive(Clone, Debug)]
pub struct RoundStrategy {
    pub component: EndComponent,
    pub min_priority: Priority,
    pub gain: Rational,
    pub seek: Vec<Option<StateId>>,
    pub optimal: BTreeMap<StateId, StateId>,
    pub max_weight: Weight,
    priorities: Vec<Priority>,
    pub state: RoundStrategyState,
    pub history: Vec<RoundStrategyState>,
}

/// Builds the round strategy for a winning end-component `u`.
pub fn round_strategy(m: &Mdp, u: &EndComponent, threshold: &Rational, strict: bool) -> Result<RoundStrategy> {
    let min_priority = u.min_priority(m);
    if min_priority % 2 == 1 {
        return Err(Error::NotQualifying(format!("minimum priority {min_priority} is odd")));
    }
    let value = mec_value::<Rational>(m, u)?;
    if !meets(&value.gain, threshold, strict) {
        return Err(Error::NotQualifying(format!("gain {} misses the threshold {threshold}", value.gain)));
    }
    let n = m.len();
    let inside = mask_of(n, &u.states);
    let target: Mask = (0..n).map(|q| inside[q] && m.priority(q) == min_priority).collect();
    let win = almost_sure_reach_within(m, &inside, &target);
    let seek = almost_sure_reach_strategy(m, &win, &target);
    let max_weight = m
        .edges()
        .iter()
        .filter(|e| inside[e.src] && inside[e.dst])
        .map(|e| e.weight.abs())
        .max()
        .unwrap_or(0);
    Ok(RoundStrategy {
        component: u.clone(),
        min_priority,
        gain: value.gain,
        seek,
        optimal: value.policy,
        max_weight,
        priorities: (0..n).map(|q| m.priority(q)).collect(),
        state: RoundStrategyState { round: 1, stage: Stage::SeekPriority, steps: 0, seek_steps: 0, target: 0 },
        history: Vec::new(),
    })
}

impl RoundStrategy {
    fn enter(&mut self, q: StateId) {
        if self.state.stage == Stage::SeekPriority && self.priorities[q] == self.min_priority {
            let i = self.state.round;
            let k = self.state.steps;
            self.state.seek_steps = k;
            self.state.target = schedule(i).max(i * k * self.max_weight as u64);
            self.state.stage = Stage::PlayGain;
            self.state.steps = 0;
        }
    }

    pub fn round(&self) -> u64 {
        self.state.round
    }
}

impl Controller for RoundStrategy {
    fn start(&mut self, q: StateId, _credit: u64) {
        self.state = RoundStrategyState { round: 1, stage: Stage::SeekPriority, steps: 0, seek_steps: 0, target: 0 };
        self.history.clear();
        self.enter(q);
    }

    fn choose(&mut self, arena: &Arena, q: StateId, _rng: &mut dyn RngCore) -> StateId {
        let pick = match self.state.stage {
            Stage::SeekPriority => self.seek[q],
            Stage::PlayGain => self.optimal.get(&q).copied(),
        };
        pick.or_else(|| self.optimal.get(&q).copied())
            .unwrap_or_else(|| arena.successors(q).next().expect("totality"))
    }

    fn advance(&mut self, _from: StateId, to: StateId, _weight: Weight) {
        self.state.steps += 1;
        if self.state.stage == Stage::PlayGain && self.state.steps >= self.state.target {
            self.history.push(self.state.clone());
            self.state = RoundStrategyState {
                round: self.state.round + 1,
                stage: Stage::SeekPriority,
                steps: 0,
                seek_steps: 0,
                target: 0,
            };
        }
        self.enter(to);
    }
}

/// Union of end-components that are almost-sure winning for parity alone.
pub fn parity_winning_ecs(m: &Mdp) -> StateSet {
    let n = m.len();
    let all = full_mask(n);
    let mut out = StateSet::new();
    for half in 0..=(m.max_priority() / 2) {
        let (cands, _) = candidates_at(m, &all, 2 * half);
        for u in cands {
            out.extend(u.states);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct DisjunctionMpResult {
    pub almost_sure: StateSet,
    /// Winning end-components through the parity disjunct.
    pub parity_part: StateSet,
    /// Maximal end-components through the mean-payoff disjunct.
    pub mean_payoff_part: StateSet,
}

/// Almost-sure set for parity or mean payoff `>= threshold` (`>` if strict).
pub fn solve_disjunction_mp_parity(m: &Mdp, threshold: &Rational, strict: bool) -> Result<DisjunctionMpResult> {
    let parity_part = parity_winning_ecs(m);
    let mut mean_payoff_part = StateSet::new();
    for u in mec_decompose(m).components {
        if meets(&mec_value::<Rational>(m, &u)?.gain, threshold, strict) {
            mean_payoff_part.extend(u.states);
        }
    }
    let n = m.len();
    let target: StateSet = parity_part.union(&mean_payoff_part).copied().collect();
    let win = almost_sure_reach_within(m, &full_mask(n), &mask_of(n, &target));
    Ok(DisjunctionMpResult { almost_sure: set_of(&win), parity_part, mean_payoff_part })
}

#[derive(Clone, Debug)]
pub struct DisjunctionEnergyResult {
    pub winning: StateSet,
    /// Least credit per state; zero wherever parity is reached almost surely.
    pub credits: CreditVector,
    /// Almost-sure reach set of the parity-winning end-components.
    pub parity_region: StateSet,
    /// States of other maximal end-components that win the energy game inside
    /// their component, with the credit needed there.
    pub energy_admission: BTreeMap<StateId, u64>,
}

/// Almost-sure set for parity or energy, with least credits.
///
/// Plays either enter the almost-sure parity region (energy no longer
/// matters) or commit inside a maximal end-component whose energy game they
/// win; until then the energy level must stay non-negative.
pub fn solve_disjunction_energy_parity(m: &Mdp) -> Result<DisjunctionEnergyResult> {
    let n = m.len();
    let parity = parity_winning_ecs(m);
    let region = almost_sure_reach_within(m, &full_mask(n), &mask_of(n, &parity));
    let mut admission = BTreeMap::new();
    let outside: Mask = region.iter().map(|&r| !r).collect();
    for u in mec_decompose_within(m, &outside).components {
        let (sub, old) = restrict(m, &u.states)?;
        let game = energy_only(&sub.as_adversarial_game())?;
        let sol = solve_arena(&game, default_cap(&game));
        for (i, &q) in old.iter().enumerate() {
            if let Credit::Finite(c) = sol.credits.get(i) {
                admission.insert(q, c);
            }
        }
    }
    // energy Büchi MDP: entering the parity region or committing ends the play
    let mut d = ModelDraft::new(ModelKind::Mdp);
    for q in m.states() {
        d.add_state(m.name(q), m.owner(q), 1);
    }
    let done = d.add_state("done", Owner::Player1, 0);
    d.add_edge(done, done, 0, None);
    let mut hub = vec![None; n];
    for (&q, &c) in &admission {
        let h = d.add_state(format!("{}?", m.name(q)), Owner::Player1, 1);
        let gate = d.add_state(format!("{}!", m.name(q)), Owner::Player1, 1);
        d.add_edge(h, q, 0, None);
        d.add_edge(h, gate, 0, None);
        d.add_edge(gate, done, -(c as i64), None);
        hub[q] = Some(h);
    }
    for q in m.states() {
        if region[q] {
            let p = (m.owner(q) == Owner::Random).then(Prob::one);
            d.add_edge(q, done, 0, p);
            continue;
        }
        let mut into_region: Option<Ratio<i64>> = None;
        for e in m.out_edges(q) {
            if region[e.dst] {
                let p = e.prob.map_or(Ratio::from_integer(1), Prob::ratio);
                into_region = Some(into_region.map_or(p, |acc| acc + p));
            } else {
                d.add_edge(q, hub[e.dst].unwrap_or(e.dst), e.weight, e.prob);
            }
        }
        if let Some(p) = into_region {
            let p = if m.owner(q) == Owner::Random { Prob::from_ratio(p) } else { None };
            d.add_edge(q, done, 0, p);
        }
    }
    let h = d.into_mdp()?;
    let sol = energy_buchi_mdp(&h, None)?;
    let credits: Vec<Credit> = (0..n)
        .map(|q| {
            if region[q] {
                Credit::Finite(0)
            } else {
                sol.credits.get(hub[q].unwrap_or(q))
            }
        })
        .collect();
    let vector = CreditVector(credits);
    Ok(DisjunctionEnergyResult {
        winning: vector.winning(),
        credits: vector,
        parity_region: set_of(&region),
        energy_admission: admission,
    })
}

/// Same game with every state accepting, so only the energy condition remains.
fn energy_only(g: &GameGraph) -> Result<GameGraph> {
    let mut d = ModelDraft::new(ModelKind::Game);
    for q in g.states() {
        d.add_state(g.name(q), g.owner(q), 0);
    }
    for e in g.edges() {
        d.add_edge(e.src, e.dst, e.weight, None);
    }
    d.into_game()
}
