//! Optimal expected mean payoff inside end-components.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::decomposition::{check_end_component, mec_decompose, restrict, sccs_of, EndComponent};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Mdp, Owner, StateId};
use crate::scalar::Scalar;
use crate::strategy::{Choice, Transducer};

/// Optimal gain of an end-component with a pure memoryless witness and the
/// bias vector certifying it. Maps are keyed by states of the full model.
#[derive(Clone, Debug, PartialEq)]
pub struct MecValue<S> {
    pub gain: S,
    pub policy: BTreeMap<StateId, StateId>,
    pub bias: BTreeMap<StateId, S>,
}

/// The memoryless strategy playing all internal edges uniformly at random.
pub fn uniform_strategy(m: &Mdp, u: &EndComponent) -> Result<Transducer> {
    check_end_component(m, &u.states)?;
    let mut t = Transducer::memoryless(m.len());
    for (&q, succ) in &u.retained {
        t.set(q, Choice::uniform(succ));
    }
    Ok(t)
}

/// Gain and bias of a pure memoryless policy (`policy[q]` for player-1 states).
/// Each recurrent class pins the bias of its smallest state to zero.
pub(crate) fn evaluate<S: Scalar>(m: &Mdp, policy: &[Option<StateId>]) -> Option<(Vec<S>, Vec<S>)> {
    let n = m.len();
    let moves: Vec<Vec<(StateId, S)>> = (0..n)
        .map(|q| match m.owner(q) {
            Owner::Player1 => vec![(policy[q].expect("policy covers player-1 states"), S::one())],
            _ => m.out_edges(q).map(|e| (e.dst, S::from_prob(e.prob.unwrap()))).collect(),
        })
        .collect();
    let reward: Vec<S> = (0..n)
        .map(|q| match m.owner(q) {
            Owner::Player1 => S::from_int(m.edge(q, policy[q].unwrap()).unwrap().weight),
            _ => m
                .out_edges(q)
                .fold(S::zero(), |acc, e| acc + S::from_prob(e.prob.unwrap()) * S::from_int(e.weight)),
        })
        .collect();
    let succ: Vec<Vec<StateId>> = moves.iter().map(|mv| mv.iter().map(|(s, _)| *s).collect()).collect();
    let comps = sccs_of(&succ, &vec![true; n]);
    let mut comp_of = vec![0; n];
    for (i, c) in comps.iter().enumerate() {
        for &q in c {
            comp_of[q] = i;
        }
    }
    let mut gain = vec![S::zero(); n];
    let mut bias = vec![S::zero(); n];
    let mut recurrent = vec![false; n];
    for (ci, c) in comps.iter().enumerate() {
        if c.iter().any(|&q| succ[q].iter().any(|&s| comp_of[s] != ci)) {
            continue;
        }
        // unknowns: gain, then bias of every state but the reference c[0]
        let k = c.len();
        let pos: BTreeMap<StateId, usize> = c.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let mut a = vec![vec![S::zero(); k]; k];
        let mut b = vec![S::zero(); k];
        for (row, &q) in c.iter().enumerate() {
            a[row][0] = S::one();
            if row > 0 {
                a[row][row] = a[row][row].clone() + S::one();
            }
            for (s, p) in &moves[q] {
                let j = pos[s];
                if j > 0 {
                    a[row][j] = a[row][j].clone() - p.clone();
                }
            }
            b[row] = reward[q].clone();
        }
        let x = linalg::solve(a, b)?;
        for (i, &q) in c.iter().enumerate() {
            recurrent[q] = true;
            gain[q] = x[0].clone();
            bias[q] = if i == 0 { S::zero() } else { x[i].clone() };
        }
    }
    let transient: Vec<StateId> = (0..n).filter(|&q| !recurrent[q]).collect();
    if !transient.is_empty() {
        let k = transient.len();
        let mut pos = vec![usize::MAX; n];
        for (i, &q) in transient.iter().enumerate() {
            pos[q] = i;
        }
        let system = |rhs: &dyn Fn(StateId) -> S, known: &[S]| -> Option<Vec<S>> {
            let mut a = vec![vec![S::zero(); k]; k];
            let mut b = vec![S::zero(); k];
            for (row, &q) in transient.iter().enumerate() {
                a[row][row] = S::one();
                b[row] = rhs(q);
                for (s, p) in &moves[q] {
                    if recurrent[*s] {
                        b[row] = b[row].clone() + p.clone() * known[*s].clone();
                    } else {
                        a[row][pos[*s]] = a[row][pos[*s]].clone() - p.clone();
                    }
                }
            }
            linalg::solve(a, b)
        };
        let g = system(&|_| S::zero(), &gain)?;
        for (i, &q) in transient.iter().enumerate() {
            gain[q] = g[i].clone();
        }
        let h = system(&|q| reward[q].clone() - gain[q].clone(), &bias)?;
        for (i, &q) in transient.iter().enumerate() {
            bias[q] = h[i].clone();
        }
    }
    Some((gain, bias))
}

/// Optimal gain of the sub-MDP induced by `u`, by multichain policy iteration
/// (gain improvement first, then bias improvement among gain-preserving moves).
pub fn mec_value<S: Scalar>(m: &Mdp, u: &EndComponent) -> Result<MecValue<S>> {
    check_end_component(m, &u.states)?;
    let (sub, old) = restrict(m, &u.states)?;
    let n = sub.len();
    let mut policy: Vec<Option<StateId>> = (0..n)
        .map(|q| if sub.owner(q) == Owner::Player1 { sub.successors(q).min() } else { None })
        .collect();
    let limit = 1000 + 50 * n;
    for _ in 0..limit {
        let (gain, bias) =
            evaluate::<S>(&sub, &policy).ok_or_else(|| Error::CrossCheck("singular policy evaluation".into()))?;
        let mut changed = false;
        for q in 0..n {
            if sub.owner(q) != Owner::Player1 {
                continue;
            }
            let cur = policy[q].unwrap();
            let best = sub
                .successors(q)
                .fold(None::<StateId>, |acc, s| match acc {
                    Some(b) if !gain[s].exceeds(&gain[b]) => Some(b),
                    _ => Some(s),
                })
                .unwrap();
            if gain[best].exceeds(&gain[cur]) {
                policy[q] = Some(best);
                changed = true;
            }
        }
        if changed {
            continue;
        }
        let score = |q: StateId, s: StateId| S::from_int(sub.edge(q, s).unwrap().weight) + bias[s].clone();
        for q in 0..n {
            if sub.owner(q) != Owner::Player1 {
                continue;
            }
            let cur = policy[q].unwrap();
            let mut best = cur;
            let mut best_score = score(q, cur);
            for s in sub.successors(q) {
                if !gain[s].approx_eq(&gain[cur]) {
                    continue;
                }
                let sc = score(q, s);
                if sc.exceeds(&best_score) {
                    best = s;
                    best_score = sc;
                }
            }
            if best != cur {
                policy[q] = Some(best);
                changed = true;
            }
        }
        if !changed {
            let g0 = gain[0].clone();
            if gain.iter().any(|g| !g.approx_eq(&g0)) {
                return Err(Error::CrossCheck("gain is not uniform over the end-component".into()));
            }
            return Ok(MecValue {
                gain: g0,
                policy: (0..n).filter_map(|q| policy[q].map(|s| (old[q], old[s]))).collect(),
                bias: (0..n).map(|q| (old[q], bias[q].clone())).collect(),
            });
        }
    }
    Err(Error::NoConvergence(limit))
}

/// Checks the average-reward optimality equations for `value` on `u`.
pub fn certify_gain<S: Scalar>(m: &Mdp, u: &EndComponent, value: &MecValue<S>) -> bool {
    let g = &value.gain;
    let h = |q: StateId| value.bias.get(&q).cloned();
    for &q in &u.states {
        let Some(hq) = h(q) else { return false };
        let lhs = g.clone() + hq;
        match m.owner(q) {
            Owner::Random => {
                let mut rhs = S::zero();
                for e in m.out_edges(q) {
                    let Some(hs) = h(e.dst) else { return false };
                    rhs = rhs + S::from_prob(e.prob.unwrap()) * (S::from_int(e.weight) + hs);
                }
                if !lhs.approx_eq(&rhs) {
                    return false;
                }
            }
            _ => {
                for e in m.out_edges(q).filter(|e| u.contains(e.dst)) {
                    let hs = h(e.dst).unwrap();
                    if (S::from_int(e.weight) + hs).exceeds(&lhs) {
                        return false;
                    }
                }
                let Some(&s) = value.policy.get(&q) else { return false };
                if !u.contains(s) {
                    return false;
                }
                let chosen = S::from_int(m.edge(q, s).map(|e| e.weight).unwrap_or(0)) + h(s).unwrap();
                if !chosen.approx_eq(&lhs) {
                    return false;
                }
            }
        }
    }
    true
}

/// [`mec_value`] for every maximal end-component, in decomposition order.
pub fn all_mec_values<S: Scalar>(m: &Mdp) -> Result<Vec<(EndComponent, MecValue<S>)>> {
    let dec = mec_decompose(m);
    dec.components
        .into_par_iter()
        .map(|u| mec_value::<S>(m, &u).map(|v| (u, v)))
        .collect()
}
