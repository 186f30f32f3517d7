//! Brute-force reference solvers. They share no solving code with the main
//! algorithms and are meant for small instances only.

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::energy_game::{Credit, CreditVector};
use crate::error::{Error, Result};
use crate::linalg::solve;
use crate::model::{Arena, Mdp, Owner, Priority, StateId, StateSet, Weight};
use crate::Rational;

/// Largest product size the product oracles accept.
pub const PRODUCT_GUARD: usize = 100_000;
/// Largest number of memoryless policies enumerated.
pub const POLICY_GUARD: u128 = 10_000;
/// Largest state count for subset enumeration.
pub const SUBSET_GUARD: usize = 14;

/// Credit bound used by the product oracles: `2·|Q|·W + 2`.
pub fn oracle_cap(m: &Arena) -> u64 {
    2 * m.len() as u64 * m.max_weight().unsigned_abs() + 2
}

/// Qualitative skeleton: owners, priorities and successor lists.
#[derive(Clone, Debug)]
struct Graph {
    owner: Vec<Owner>,
    prio: Vec<Priority>,
    succ: Vec<Vec<usize>>,
}

impl Graph {
    fn of(m: &Arena) -> Graph {
        Graph {
            owner: m.states().map(|q| m.owner(q)).collect(),
            prio: m.states().map(|q| m.priority(q)).collect(),
            succ: m.states().map(|q| m.successors(q).collect()).collect(),
        }
    }

    fn len(&self) -> usize {
        self.owner.len()
    }
}

/// Kosaraju on the subgraph induced by `alive`; returns a component id per
/// state (`usize::MAX` outside `alive`).
fn kosaraju(succ: &[Vec<usize>], alive: &[bool]) -> Vec<usize> {
    let n = succ.len();
    let mut pred = vec![Vec::new(); n];
    for q in 0..n {
        if alive[q] {
            for &s in &succ[q] {
                if alive[s] {
                    pred[s].push(q);
                }
            }
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if !alive[root] || seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some((q, i)) = stack.pop() {
            if let Some(&s) = succ[q].get(i) {
                stack.push((q, i + 1));
                if alive[s] && !seen[s] {
                    seen[s] = true;
                    stack.push((s, 0));
                }
            } else {
                order.push(q);
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = next;
        let mut stack = vec![root];
        while let Some(q) = stack.pop() {
            for &p in &pred[q] {
                if comp[p] == usize::MAX {
                    comp[p] = next;
                    stack.push(p);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Maximal end-components inside `alive` by repeated pruning.
fn mecs(g: &Graph, alive: &[bool]) -> Vec<StateSet> {
    let n = g.len();
    let mut alive = alive.to_vec();
    loop {
        let comp = kosaraju(&g.succ, &alive);
        let bad: Vec<usize> = (0..n)
            .filter(|&q| alive[q])
            .filter(|&q| match g.owner[q] {
                Owner::Random => g.succ[q].iter().any(|&s| comp[s] != comp[q]),
                _ => !g.succ[q].iter().any(|&s| comp[s] == comp[q]),
            })
            .collect();
        if bad.is_empty() {
            let mut groups = std::collections::BTreeMap::<usize, StateSet>::new();
            for q in (0..n).filter(|&q| alive[q]) {
                groups.entry(comp[q]).or_default().insert(q);
            }
            return groups.into_values().collect();
        }
        for q in bad {
            alive[q] = false;
        }
    }
}

/// `νZ. μY. T ∪ {player 1: some successor in Y} ∪ {random: all successors in Z, some in Y}`.
fn almost_sure(g: &Graph, target: &[bool]) -> Vec<bool> {
    let n = g.len();
    let mut z = vec![true; n];
    loop {
        let mut y = target.iter().zip(&z).map(|(&t, &zz)| t && zz).collect::<Vec<_>>();
        loop {
            let mut changed = false;
            for q in 0..n {
                if y[q] || !z[q] {
                    continue;
                }
                let hit = g.succ[q].iter().any(|&s| y[s]);
                let ok = match g.owner[q] {
                    Owner::Random => hit && g.succ[q].iter().all(|&s| z[s]),
                    _ => hit,
                };
                if ok {
                    y[q] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if y == z {
            return z;
        }
        z = y;
    }
}

/// States almost surely satisfying parity: reach an end-component whose
/// least priority is even.
fn almost_sure_parity(g: &Graph) -> Vec<bool> {
    let n = g.len();
    let mut good = vec![false; n];
    let top = g.prio.iter().copied().max().unwrap_or(0);
    for even in (0..=top).step_by(2) {
        let alive: Vec<bool> = g.prio.iter().map(|&p| p >= even).collect();
        for u in mecs(g, &alive) {
            if u.iter().any(|&q| g.prio[q] == even) {
                for q in u {
                    good[q] = true;
                }
            }
        }
    }
    almost_sure(g, &good)
}

/// Independent almost-sure reachability.
pub fn almost_sure_reach_oracle(m: &Mdp, target: &StateSet) -> StateSet {
    let g = Graph::of(m);
    let t: Vec<bool> = (0..m.len()).map(|q| target.contains(&q)).collect();
    almost_sure(&g, &t).iter().enumerate().filter(|(_, &w)| w).map(|(q, _)| q).collect()
}

/// Independent maximal end-component decomposition.
pub fn mec_oracle(m: &Mdp) -> Vec<StateSet> {
    mecs(&Graph::of(m), &vec![true; m.len()])
}

/// Independent qualitative parity: states that win parity almost surely.
pub fn almost_sure_parity_oracle(m: &Mdp) -> StateSet {
    almost_sure_parity(&Graph::of(m)).iter().enumerate().filter(|(_, &w)| w).map(|(q, _)| q).collect()
}

fn guard_product(m: &Arena, cap: u64) -> Result<usize> {
    let size = (cap as u128 + 2) * m.len() as u128;
    if size > PRODUCT_GUARD as u128 {
        return Err(Error::GuardExceeded(format!("product of {size} states exceeds {PRODUCT_GUARD}")));
    }
    Ok(size as usize)
}

/// Product of `m` with energy levels `0..=cap` (saturating at `cap`) and, once
/// the level would drop below zero, an underflow copy of `m`. Levels carry
/// `level_priority(q)`, underflow copies `underflow_priority(q)`.
fn energy_product(
    m: &Arena,
    cap: u64,
    level_priority: impl Fn(StateId) -> Priority,
    underflow_priority: impl Fn(StateId) -> Priority,
) -> Graph {
    let n = m.len();
    let levels = cap as usize + 1;
    let node = |q: usize, c: usize| q * levels + c;
    let under = |q: usize| n * levels + q;
    let total = n * levels + n;
    let mut g = Graph { owner: vec![Owner::Player1; total], prio: vec![0; total], succ: vec![Vec::new(); total] };
    for q in 0..n {
        for c in 0..levels {
            let x = node(q, c);
            g.owner[x] = m.owner(q);
            g.prio[x] = level_priority(q);
            let mut s: Vec<usize> = m
                .out_edges(q)
                .map(|e| {
                    let v = c as i64 + e.weight;
                    if v < 0 {
                        under(e.dst)
                    } else {
                        node(e.dst, (v as usize).min(cap as usize))
                    }
                })
                .collect();
            s.sort_unstable();
            s.dedup();
            g.succ[x] = s;
        }
        let x = under(q);
        g.owner[x] = m.owner(q);
        g.prio[x] = underflow_priority(q);
        g.succ[x] = m.successors(q).map(under).collect();
    }
    g
}

fn least_credits(m: &Arena, cap: u64, win: &[bool]) -> CreditVector {
    let levels = cap as usize + 1;
    CreditVector(
        (0..m.len())
            .map(|q| match (0..levels).find(|&c| win[q * levels + c]) {
                Some(c) => Credit::Finite(c as u64),
                None => Credit::Unwinnable,
            })
            .collect(),
    )
}

/// Least initial credit for energy parity almost surely, levels saturating
/// at `cap` (default [`oracle_cap`]). Underflow is absorbing and losing.
pub fn product_energy_oracle(m: &Mdp, cap: Option<u64>) -> Result<CreditVector> {
    let cap = cap.unwrap_or_else(|| oracle_cap(m));
    guard_product(m, cap)?;
    let mut g = energy_product(m, cap, |q| m.priority(q), |_| 1);
    let n = m.len();
    let base = n * (cap as usize + 1);
    for q in 0..n {
        g.succ[base + q] = vec![base + q];
    }
    let win = almost_sure_parity(&g);
    Ok(least_credits(m, cap, &win))
}

/// Least initial credit for "energy or parity" almost surely: energy levels
/// carry priority 0 and an underflow continues in a copy where only parity
/// can still be won.
pub fn product_disjunction_oracle(m: &Mdp, cap: Option<u64>) -> Result<CreditVector> {
    let cap = cap.unwrap_or_else(|| oracle_cap(m));
    guard_product(m, cap)?;
    let g = energy_product(m, cap, |_| 0, |q| m.priority(q));
    let win = almost_sure_parity(&g);
    Ok(least_credits(m, cap, &win))
}

fn to_rational(p: crate::model::Prob) -> Rational {
    p.to_big()
}

/// Long-run average of each bottom component of the chain given by
/// `choice` (player-1 successor per state) restricted to `states`.
fn chain_gains(m: &Arena, states: &[StateId], choice: &[Option<StateId>]) -> Vec<Rational> {
    let n = m.len();
    let mut alive = vec![false; n];
    for &q in states {
        alive[q] = true;
    }
    let next = |q: StateId| -> Vec<(StateId, Rational, Weight)> {
        match choice[q] {
            Some(s) => vec![(s, Rational::one(), m.edge(q, s).expect("edge").weight)],
            None => m
                .out_edges(q)
                .filter(|e| alive[e.dst])
                .map(|e| (e.dst, e.prob.map_or_else(Rational::one, to_rational), e.weight))
                .collect(),
        }
    };
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|q| if alive[q] { next(q).into_iter().map(|(s, _, _)| s).collect() } else { Vec::new() })
        .collect();
    let comp = kosaraju(&succ, &alive);
    let mut comps = std::collections::BTreeMap::<usize, Vec<StateId>>::new();
    for &q in states {
        comps.entry(comp[q]).or_default().push(q);
    }
    let mut gains = Vec::new();
    for members in comps.values() {
        let id = comp[members[0]];
        if members.iter().any(|&q| succ[q].iter().any(|&s| comp[s] != id)) {
            continue;
        }
        let k = members.len();
        let index = |q: StateId| members.iter().position(|&x| x == q).expect("member");
        // rows: balance equations for all but the last state, then normalization
        let mut a = vec![vec![Rational::zero(); k]; k];
        let mut b = vec![Rational::zero(); k];
        let mut reward = vec![Rational::zero(); k];
        for (i, &q) in members.iter().enumerate() {
            for (s, p, w) in next(q) {
                let j = index(s);
                if j + 1 < k {
                    a[j][i] += p.clone();
                }
                reward[i] += p * Rational::from_integer(w.into());
            }
        }
        for (j, row) in a.iter_mut().enumerate().take(k - 1) {
            row[j] -= Rational::one();
        }
        a[k - 1] = vec![Rational::one(); k];
        b[k - 1] = Rational::one();
        let pi = solve(a, b).expect("stationary distribution is unique");
        gains.push(pi.iter().zip(&reward).map(|(x, r)| x * r).sum());
    }
    gains
}

/// Optimal mean payoff of end-component `states` by enumerating every
/// memoryless deterministic policy that stays inside.
pub fn policy_enum_mp_oracle(m: &Mdp, states: &StateSet) -> Result<Rational> {
    let inside = |q: StateId| states.contains(&q);
    let list: Vec<StateId> = states.iter().copied().collect();
    let options: Vec<Vec<StateId>> = list
        .iter()
        .map(|&q| {
            if m.owner(q) == Owner::Random {
                Vec::new()
            } else {
                m.successors(q).filter(|&s| inside(s)).collect()
            }
        })
        .collect();
    let count = options.iter().filter(|o| !o.is_empty()).map(|o| o.len() as u128).product::<u128>();
    if count > POLICY_GUARD {
        return Err(Error::GuardExceeded(format!("{count} policies exceed {POLICY_GUARD}")));
    }
    if options.iter().zip(&list).any(|(o, &q)| o.is_empty() && m.owner(q) != Owner::Random) {
        return Err(Error::NotEndComponent("a player-1 state has no internal edge".into()));
    }
    let mut best: Option<Rational> = None;
    let mut digits = vec![0usize; list.len()];
    loop {
        let mut choice = vec![None; m.len()];
        for (i, &q) in list.iter().enumerate() {
            if !options[i].is_empty() {
                choice[q] = Some(options[i][digits[i]]);
            }
        }
        for g in chain_gains(m, &list, &choice) {
            if best.as_ref().is_none_or(|b| g > *b) {
                best = Some(g);
            }
        }
        // odometer over the choice digits
        let mut i = 0;
        loop {
            if i == list.len() {
                return best.ok_or_else(|| Error::NotEndComponent("no bottom component".into()));
            }
            if options[i].is_empty() {
                i += 1;
                continue;
            }
            digits[i] += 1;
            if digits[i] < options[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Whether `states` is an end-component, checked from the definition.
pub fn is_end_component(m: &Arena, states: &StateSet) -> bool {
    if states.is_empty() {
        return false;
    }
    let n = m.len();
    let mut succ = vec![Vec::new(); n];
    for &q in states {
        let internal: Vec<StateId> = m.successors(q).filter(|s| states.contains(s)).collect();
        match m.owner(q) {
            Owner::Random if internal.len() != m.out_degree(q) => return false,
            _ if internal.is_empty() => return false,
            _ => succ[q] = internal,
        }
    }
    // every state reaches every other inside
    let start = *states.iter().next().expect("non-empty");
    let reach = |forward: bool| -> BTreeSet<StateId> {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(q) = stack.pop() {
            let next: Vec<StateId> = if forward {
                succ[q].clone()
            } else {
                states.iter().copied().filter(|&p| succ[p].contains(&q)).collect()
            };
            for s in next {
                if seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        seen
    };
    reach(true) == *states && reach(false) == *states
}

/// All end-components by subset enumeration.
pub fn enumerate_end_components(m: &Arena) -> Result<Vec<StateSet>> {
    let n = m.len();
    if n > SUBSET_GUARD {
        return Err(Error::GuardExceeded(format!("{n} states exceed {SUBSET_GUARD} for subset enumeration")));
    }
    Ok((1u32..(1 << n))
        .map(|bits| (0..n).filter(|&q| bits >> q & 1 == 1).collect::<StateSet>())
        .filter(|s| is_end_component(m, s))
        .collect())
}

/// Inclusion-maximal sets among `all`.
pub fn maximal(all: &[StateSet]) -> Vec<StateSet> {
    all.iter().filter(|s| !all.iter().any(|t| t != *s && s.is_subset(t))).cloned().collect()
}

/// Union of winning end-components for mean-payoff parity, from the
/// definition: an end-component with even least priority whose optimal
/// mean payoff meets the threshold.
pub fn winning_ec_oracle(m: &Mdp, threshold: &Rational, strict: bool) -> Result<StateSet> {
    let mut win = StateSet::new();
    for u in enumerate_end_components(m)? {
        if u.is_subset(&win) {
            continue;
        }
        let least = u.iter().map(|&q| m.priority(q)).min().expect("non-empty");
        if least % 2 == 1 {
            continue;
        }
        let gain = policy_enum_mp_oracle(m, &u)?;
        if if strict { gain > *threshold } else { gain >= *threshold } {
            win.extend(u);
        }
    }
    Ok(win)
}

/// Almost-sure mean-payoff parity from [`winning_ec_oracle`].
pub fn mp_parity_oracle(m: &Mdp, threshold: &Rational, strict: bool) -> Result<StateSet> {
    Ok(almost_sure_reach_oracle(m, &winning_ec_oracle(m, threshold, strict)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{ModelDraft, ModelKind, Prob};

    #[test]
    fn product_energy_on_fixtures() {
        let c = product_energy_oracle(&fixtures::recharge_loop(), None).unwrap();
        assert_eq!(c.0, vec![Credit::Finite(0), Credit::Finite(10), Credit::Finite(10)]);
        let c = product_energy_oracle(&fixtures::leaky_chain(), None).unwrap();
        assert_eq!(c.0, vec![Credit::Unwinnable, Credit::Finite(0)]);
    }

    #[test]
    fn product_disjunction_on_fixtures() {
        let c = product_disjunction_oracle(&fixtures::leaky_chain(), None).unwrap();
        assert_eq!(c.0, vec![Credit::Finite(0), Credit::Finite(0)]);
    }

    #[test]
    fn guard_trips() {
        let mut d = ModelDraft::new(ModelKind::Mdp);
        let a = d.add_state("a", Owner::Player1, 0);
        d.add_edge(a, a, 1_000_000, None);
        assert!(matches!(product_energy_oracle(&d.into_mdp().unwrap(), None), Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn policy_enumeration_gains() {
        let m = fixtures::recharge_loop();
        let all: StateSet = [0, 1, 2].into();
        assert_eq!(policy_enum_mp_oracle(&m, &all).unwrap(), Rational::from_integer(1.into()));
        let mut d = ModelDraft::new(ModelKind::Mdp);
        let a = d.add_state("a", Owner::Random, 0);
        let b = d.add_state("b", Owner::Player1, 0);
        d.add_edge(a, a, 3, Prob::new(1, 3));
        d.add_edge(a, b, 0, Prob::new(2, 3));
        d.add_edge(b, a, 0, None);
        let m = d.into_mdp().unwrap();
        // stationary (3/5, 2/5), reward at a is 1
        assert_eq!(policy_enum_mp_oracle(&m, &[0, 1].into()).unwrap(), Rational::new(3.into(), 5.into()));
    }

    #[test]
    fn end_component_enumeration() {
        let m = fixtures::recharge_loop();
        let ecs = enumerate_end_components(&m).unwrap();
        assert!(ecs.contains(&[0].into()));
        assert!(ecs.contains(&[0, 1, 2].into()));
        assert!(!ecs.contains(&[0, 1].into()));
        assert_eq!(maximal(&ecs), vec![StateSet::from([0, 1, 2])]);
        assert_eq!(mec_oracle(&m), maximal(&ecs));
        let m = fixtures::leaky_chain();
        assert_eq!(mec_oracle(&m), vec![StateSet::from([1])]);
        assert_eq!(almost_sure_reach_oracle(&m, &[1].into()), [0, 1].into());
        assert_eq!(almost_sure_parity_oracle(&m), [0, 1].into());
    }

    #[test]
    fn mp_parity_from_definition() {
        let m = fixtures::leaky_chain();
        let zero = Rational::zero();
        assert_eq!(mp_parity_oracle(&m, &zero, false).unwrap(), [0, 1].into());
        assert!(mp_parity_oracle(&m, &zero, true).unwrap().is_empty());
    }
}
