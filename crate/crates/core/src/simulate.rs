//! Seeded Monte-Carlo plays under a controller.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arena, Owner, Priority, StateId, Weight};
use crate::strategy::{Controller, RandomController};

/// Number of leading states kept in [`RunStats::trace`].
pub const TRACE_LEN: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seed: u64,
    pub horizon: u64,
    pub start: StateId,
    pub credit: u64,
    /// Least energy level seen, initial credit included.
    pub min_energy: i64,
    pub final_energy: i64,
    pub total_weight: i64,
    pub mean_payoff: f64,
    /// Average weight over the last tenth of the play.
    pub tail_mean: f64,
    /// Visits per state over the last tenth of the play.
    pub tail_histogram: BTreeMap<StateId, u64>,
    /// Visits per priority over the last tenth of the play.
    pub tail_priorities: BTreeMap<Priority, u64>,
    pub tail_min_priority: Option<Priority>,
    pub buchi_visits: u64,
    /// Longest stretch of steps without visiting a priority-0 state.
    pub longest_buchi_gap: u64,
    pub trace: Vec<StateId>,
}

impl RunStats {
    pub fn energy_ok(&self) -> bool {
        self.min_energy >= 0
    }

    pub fn tail_parity_ok(&self) -> bool {
        self.tail_min_priority.is_some_and(|p| p % 2 == 0)
    }
}

struct Sampler {
    modulus: u128,
    cumulative: Vec<(u128, StateId)>,
}

impl Sampler {
    fn new(arena: &Arena, q: StateId) -> Sampler {
        let edges: Vec<_> = arena.out_edges(q).collect();
        let modulus = edges
            .iter()
            .fold(1u128, |acc, e| num_integer::lcm(acc, e.prob.map_or(1, |p| p.denom()) as u128));
        let mut acc = 0u128;
        let cumulative = edges
            .iter()
            .map(|e| {
                let p = e.prob.expect("validated");
                acc += p.numer() as u128 * (modulus / p.denom() as u128);
                (acc, e.dst)
            })
            .collect();
        Sampler { modulus, cumulative }
    }

    fn draw(&self, rng: &mut dyn RngCore) -> StateId {
        let x = (((rng.next_u64() as u128) << 64) | rng.next_u64() as u128) % self.modulus;
        self.cumulative.iter().find(|(c, _)| x < *c).unwrap_or(self.cumulative.last().expect("non-empty")).1
    }
}

/// Plays `horizon` steps from `start` with initial `credit`. Player-2 states
/// use `opponent`, uniform random when absent.
pub fn simulate(
    arena: &Arena,
    player1: &mut dyn Controller,
    opponent: Option<&mut dyn Controller>,
    start: StateId,
    credit: u64,
    seed: u64,
    horizon: u64,
) -> Result<RunStats> {
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be positive".into()));
    }
    if start >= arena.len() {
        return Err(Error::InvalidParams(format!("start state {start} out of range")));
    }
    let mut fallback = RandomController;
    let opponent: &mut dyn Controller = match opponent {
        Some(c) => c,
        None => &mut fallback,
    };
    let samplers: Vec<Option<Sampler>> = arena
        .states()
        .map(|q| (arena.owner(q) == Owner::Random).then(|| Sampler::new(arena, q)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    player1.start(start, credit);
    opponent.start(start, credit);

    let tail_from = horizon - horizon.div_ceil(10);
    let mut energy = credit as i64;
    let mut min_energy = energy;
    let mut total: i64 = 0;
    let mut tail_total: i64 = 0;
    let mut tail_histogram = BTreeMap::new();
    let mut tail_priorities = BTreeMap::new();
    let mut tail_min_priority: Option<Priority> = None;
    let mut buchi_visits = 0;
    let mut last_buchi = 0u64;
    let mut longest_buchi_gap = 0u64;
    let mut trace = vec![start];
    let mut q = start;
    for step in 0..horizon {
        let next = match arena.owner(q) {
            Owner::Player1 => player1.choose(arena, q, &mut rng),
            Owner::Player2 => opponent.choose(arena, q, &mut rng),
            Owner::Random => samplers[q].as_ref().expect("random state").draw(&mut rng),
        };
        let weight: Weight = arena
            .edge(q, next)
            .ok_or_else(|| Error::InvalidPrefix { position: step as usize, from: q, to: next })?
            .weight;
        player1.advance(q, next, weight);
        opponent.advance(q, next, weight);
        energy += weight;
        total += weight;
        min_energy = min_energy.min(energy);
        q = next;
        if arena.priority(q) == 0 {
            buchi_visits += 1;
            last_buchi = step + 1;
        }
        longest_buchi_gap = longest_buchi_gap.max(step + 1 - last_buchi);
        if step >= tail_from {
            tail_total += weight;
            *tail_histogram.entry(q).or_insert(0) += 1;
            let p = arena.priority(q);
            *tail_priorities.entry(p).or_insert(0) += 1;
            tail_min_priority = Some(tail_min_priority.map_or(p, |t| t.min(p)));
        }
        if trace.len() < TRACE_LEN {
            trace.push(q);
        }
    }
    Ok(RunStats {
        seed,
        horizon,
        start,
        credit,
        min_energy,
        final_energy: energy,
        total_weight: total,
        mean_payoff: total as f64 / horizon as f64,
        tail_mean: tail_total as f64 / (horizon - tail_from) as f64,
        tail_histogram,
        tail_priorities,
        tail_min_priority,
        buchi_visits,
        longest_buchi_gap,
        trace,
    })
}

/// Runs `runs` independent plays in parallel; play `k` uses seed `seed + k`
/// and a fresh controller from `make`.
pub fn simulate_batch<C, F>(
    arena: &Arena,
    make: F,
    start: StateId,
    credit: u64,
    seed: u64,
    horizon: u64,
    runs: u64,
) -> Result<Vec<RunStats>>
where
    C: Controller,
    F: Fn() -> C + Sync,
{
    (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut c = make();
            simulate(arena, &mut c, None, start, credit, seed.wrapping_add(k), horizon)
        })
        .collect()
}
