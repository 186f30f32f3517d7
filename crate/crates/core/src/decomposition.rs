//! End-components, maximal end-component decomposition, random attractors and
//! reachability (qualitative and quantitative).

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Arena, Mdp, ModelDraft, ModelKind, Owner, StateId, StateSet};
use crate::scalar::Scalar;

/// Membership mask over the states of a model.
pub type Mask = Vec<bool>;

pub fn mask_of(n: usize, set: &StateSet) -> Mask {
    let mut mask = vec![false; n];
    for &q in set {
        mask[q] = true;
    }
    mask
}

pub fn set_of(mask: &[bool]) -> StateSet {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(q, _)| q).collect()
}

pub fn full_mask(n: usize) -> Mask {
    vec![true; n]
}

/// A δ-closed, strongly connected state set together with the player-1 edges
/// that stay inside it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndComponent {
    pub states: StateSet,
    pub retained: BTreeMap<StateId, Vec<StateId>>,
}

impl EndComponent {
    /// Validates `states` as an end-component of `m`.
    pub fn new(m: &Mdp, states: StateSet) -> Result<Self> {
        check_end_component(m, &states)?;
        let retained = states
            .iter()
            .filter(|&&q| m.owner(q) == Owner::Player1)
            .map(|&q| (q, m.successors(q).filter(|s| states.contains(s)).collect()))
            .collect();
        Ok(EndComponent { states, retained })
    }

    pub fn contains(&self, q: StateId) -> bool {
        self.states.contains(&q)
    }

    pub fn min_priority(&self, m: &Arena) -> u32 {
        self.states.iter().map(|&q| m.priority(q)).min().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Maximal end-components with a state-to-component index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MecDecomposition {
    pub components: Vec<EndComponent>,
    pub membership: Vec<Option<usize>>,
}

impl MecDecomposition {
    pub fn component_of(&self, q: StateId) -> Option<&EndComponent> {
        self.membership[q].map(|i| &self.components[i])
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

fn check_closed(m: &Mdp, states: &StateSet) -> Result<()> {
    for &q in states {
        if m.owner(q) == Owner::Random {
            if m.successors(q).any(|s| !states.contains(&s)) {
                return Err(Error::NotClosed { state: q });
            }
        } else if !m.successors(q).any(|s| states.contains(&s)) {
            return Err(Error::NoInternalEdge(q));
        }
    }
    Ok(())
}

pub fn check_end_component(m: &Mdp, states: &StateSet) -> Result<()> {
    if states.is_empty() {
        return Err(Error::NotEndComponent("empty set".into()));
    }
    if let Some(&q) = states.iter().find(|&&q| q >= m.len()) {
        return Err(Error::NotEndComponent(format!("unknown state {q}")));
    }
    check_closed(m, states)?;
    let mask = mask_of(m.len(), states);
    let comps = sccs(m, &mask);
    if comps.len() != 1 {
        return Err(Error::NotEndComponent("not strongly connected".into()));
    }
    Ok(())
}

/// Strongly connected components of the graph induced by `active`.
pub fn sccs(m: &Arena, active: &[bool]) -> Vec<Vec<StateId>> {
    let n = m.len();
    let succ: Vec<Vec<StateId>> = (0..n)
        .map(|q| if active[q] { m.successors(q).filter(|&s| active[s]).collect() } else { Vec::new() })
        .collect();
    sccs_of(&succ, active)
}

/// Iterative Tarjan over adjacency lists; components come out in reverse
/// topological order.
pub fn sccs_of(succ: &[Vec<StateId>], active: &[bool]) -> Vec<Vec<StateId>> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if !active[root] || index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(StateId, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next < succ[v].len() {
                let w = succ[v][*next];
                *next += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Random attractor of `target` inside the sub-model `domain`: the least set
/// containing `target` that absorbs player-1 states whose in-domain successors
/// all lie inside, and probabilistic states with some successor inside.
pub fn random_attractor_within(m: &Arena, domain: &[bool], target: &[bool]) -> Mask {
    attractor_blocking(m, domain, target, &vec![false; m.len()])
}

/// [`random_attractor_within`] where states in `blocked` never join.
pub fn attractor_blocking(m: &Arena, domain: &[bool], target: &[bool], blocked: &[bool]) -> Mask {
    let n = m.len();
    let pred = m.predecessors();
    let mut attr: Mask = (0..n).map(|q| domain[q] && target[q]).collect();
    let mut remaining: Vec<usize> = (0..n)
        .map(|q| m.successors(q).filter(|&s| domain[s]).count())
        .collect();
    let mut queue: VecDeque<StateId> = (0..n).filter(|&q| attr[q]).collect();
    while let Some(v) = queue.pop_front() {
        for &u in &pred[v] {
            if !domain[u] || attr[u] || blocked[u] {
                continue;
            }
            let join = match m.owner(u) {
                Owner::Random | Owner::Player2 => true,
                Owner::Player1 => {
                    remaining[u] -= 1;
                    remaining[u] == 0
                }
            };
            if join {
                attr[u] = true;
                queue.push_back(u);
            }
        }
    }
    attr
}

pub fn random_attractor(m: &Mdp, target: &StateSet) -> StateSet {
    let n = m.len();
    set_of(&random_attractor_within(m, &full_mask(n), &mask_of(n, target)))
}

/// Maximal end-components of the sub-model induced by `domain`, which must be
/// δ-closed for probabilistic states (escaping probabilistic states are never
/// part of a component).
pub fn mec_decompose_within(m: &Mdp, domain: &[bool]) -> MecDecomposition {
    let n = m.len();
    let mut active: Mask = domain.to_vec();
    loop {
        let comps = sccs(m, &active);
        let mut comp_of = vec![usize::MAX; n];
        for (i, c) in comps.iter().enumerate() {
            for &q in c {
                comp_of[q] = i;
            }
        }
        let mut bad = vec![false; n];
        let mut any = false;
        for q in 0..n {
            if !active[q] {
                continue;
            }
            let c = comp_of[q];
            let escapes = match m.owner(q) {
                Owner::Random => m.successors(q).any(|s| comp_of[s] != c || !active[s]),
                _ => !m.successors(q).any(|s| active[s] && comp_of[s] == c),
            };
            if escapes {
                bad[q] = true;
                any = true;
            }
        }
        if !any {
            let mut components = Vec::new();
            let mut membership = vec![None; n];
            let mut ordered = comps;
            ordered.sort();
            for c in ordered {
                let states: StateSet = c.iter().copied().collect();
                let retained = states
                    .iter()
                    .filter(|&&q| m.owner(q) == Owner::Player1)
                    .map(|&q| (q, m.successors(q).filter(|s| states.contains(s)).collect()))
                    .collect();
                for &q in &states {
                    membership[q] = Some(components.len());
                }
                components.push(EndComponent { states, retained });
            }
            return MecDecomposition { components, membership };
        }
        let attr = random_attractor_within(m, &active, &bad);
        for q in 0..n {
            if attr[q] {
                active[q] = false;
            }
        }
    }
}

pub fn mec_decompose(m: &Mdp) -> MecDecomposition {
    mec_decompose_within(m, &full_mask(m.len()))
}

/// Sub-MDP induced by the δ-closed set `u`, with the new-to-old index map.
pub fn restrict(m: &Mdp, u: &StateSet) -> Result<(Mdp, Vec<StateId>)> {
    check_closed(m, u)?;
    let old: Vec<StateId> = u.iter().copied().collect();
    let mut new_of = vec![usize::MAX; m.len()];
    let mut d = ModelDraft::new(ModelKind::Mdp);
    for (i, &q) in old.iter().enumerate() {
        new_of[q] = i;
        let s = m.state(q);
        d.add_state(s.name.clone(), s.owner, s.priority);
    }
    for &q in &old {
        for e in m.out_edges(q).filter(|e| u.contains(&e.dst)) {
            d.add_edge(new_of[q], new_of[e.dst], e.weight, e.prob);
        }
    }
    Ok((d.into_mdp()?, old))
}

/// States of `domain` from which `target` is reachable along in-domain edges.
pub fn backward_reach(m: &Arena, domain: &[bool], target: &[bool]) -> Mask {
    let pred = m.predecessors();
    let n = m.len();
    let mut seen: Mask = (0..n).map(|q| domain[q] && target[q]).collect();
    let mut queue: VecDeque<StateId> = (0..n).filter(|&q| seen[q]).collect();
    while let Some(v) = queue.pop_front() {
        for &u in &pred[v] {
            if domain[u] && !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

/// Almost-sure reachability inside `domain`.
pub fn almost_sure_reach_within(m: &Mdp, domain: &[bool], target: &[bool]) -> Mask {
    let n = m.len();
    let mut r: Mask = domain.to_vec();
    loop {
        let reach = backward_reach(m, &r, target);
        let mut bad: Mask = (0..n).map(|q| r[q] && !reach[q]).collect();
        // states already outside r count as losing
        for q in 0..n {
            if !domain[q] {
                continue;
            }
            if !r[q] {
                bad[q] = true;
            }
        }
        let guard: Mask = (0..n).map(|q| domain[q] && !target[q]).collect();
        let blocked: Mask = (0..n).map(|q| target[q]).collect();
        let attr = attractor_blocking(m, domain, &bad, &blocked);
        let mut changed = false;
        for q in 0..n {
            if r[q] && attr[q] && guard[q] {
                r[q] = false;
                changed = true;
            }
        }
        if !changed {
            return r;
        }
    }
}

pub fn almost_sure_reach(m: &Mdp, target: &StateSet) -> StateSet {
    let n = m.len();
    set_of(&almost_sure_reach_within(m, &full_mask(n), &mask_of(n, target)))
}

/// Memoryless strategy for the almost-sure set `win` (as returned by
/// [`almost_sure_reach_within`]): each player-1 state moves to a successor in
/// `win` one layer closer to `target`, smallest index on ties.
pub fn almost_sure_reach_strategy(m: &Mdp, win: &[bool], target: &[bool]) -> Vec<Option<StateId>> {
    let layer = layers(m, win, target);
    let mut out = vec![None; m.len()];
    for q in 0..m.len() {
        if !win[q] || m.owner(q) != Owner::Player1 {
            continue;
        }
        if target[q] {
            out[q] = m.successors(q).filter(|&s| win[s]).min();
            continue;
        }
        out[q] = m
            .successors(q)
            .filter(|&s| win[s] && layer[s] < layer[q])
            .min_by_key(|&s| (layer[s], s));
    }
    out
}

/// Backward distance to `target` inside `domain`, where a probabilistic state
/// counts once any successor is ranked. Unranked states get `usize::MAX`.
pub fn layers(m: &Mdp, domain: &[bool], target: &[bool]) -> Vec<usize> {
    let n = m.len();
    let pred = m.predecessors();
    let mut layer = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for q in 0..n {
        if domain[q] && target[q] {
            layer[q] = 0;
            queue.push_back(q);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in &pred[v] {
            if domain[u] && layer[u] == usize::MAX {
                layer[u] = layer[v] + 1;
                queue.push_back(u);
            }
        }
    }
    layer
}

/// Maximal reachability probability of `target` per state, by policy
/// iteration over pure memoryless strategies with exact linear solves.
pub fn reach_value<S: Scalar>(m: &Mdp, target: &StateSet) -> Result<Vec<S>> {
    reach_value_with_policy(m, target).map(|(v, _)| v)
}

pub fn reach_value_with_policy<S: Scalar>(
    m: &Mdp,
    target: &StateSet,
) -> Result<(Vec<S>, Vec<Option<StateId>>)> {
    let n = m.len();
    let all = full_mask(n);
    let tmask = mask_of(n, target);
    let one = almost_sure_reach_within(m, &all, &tmask);
    let can = backward_reach(m, &all, &tmask);
    let unknown: Vec<StateId> = (0..n).filter(|&q| !one[q] && can[q]).collect();
    let mut policy = almost_sure_reach_strategy(m, &one, &tmask);
    let layer = layers(m, &all, &tmask);
    for &q in &unknown {
        if m.owner(q) == Owner::Player1 {
            policy[q] = m.successors(q).filter(|&s| layer[s] < layer[q]).min_by_key(|&s| (layer[s], s));
        }
    }
    let fixed = |q: StateId| -> Option<S> {
        if one[q] {
            Some(S::one())
        } else if !can[q] {
            Some(S::zero())
        } else {
            None
        }
    };
    let mut pos = vec![usize::MAX; n];
    for (i, &q) in unknown.iter().enumerate() {
        pos[q] = i;
    }
    let limit = 10 * n + 10;
    for _ in 0..limit {
        let k = unknown.len();
        let mut a = vec![vec![S::zero(); k]; k];
        let mut b = vec![S::zero(); k];
        for (i, &q) in unknown.iter().enumerate() {
            a[i][i] = S::one();
            let moves: Vec<(StateId, S)> = match m.owner(q) {
                Owner::Player1 => vec![(policy[q].expect("proper policy"), S::one())],
                _ => m.out_edges(q).map(|e| (e.dst, S::from_prob(e.prob.unwrap()))).collect(),
            };
            for (s, p) in moves {
                match fixed(s) {
                    Some(v) => b[i] = b[i].clone() + p * v,
                    None => a[i][pos[s]] = a[i][pos[s]].clone() - p,
                }
            }
        }
        let x = linalg::solve(a, b).ok_or_else(|| Error::CrossCheck("reachability system is singular".into()))?;
        let value = |q: StateId| fixed(q).unwrap_or_else(|| x[pos[q]].clone());
        let mut improved = false;
        for &q in &unknown {
            if m.owner(q) != Owner::Player1 {
                continue;
            }
            let current = value(policy[q].unwrap());
            let mut best: Option<(StateId, S)> = None;
            for s in m.successors(q) {
                let v = value(s);
                if best.as_ref().map_or(true, |(_, bv)| v.exceeds(bv)) {
                    best = Some((s, v));
                }
            }
            let (s, v) = best.unwrap();
            if v.exceeds(&current) {
                policy[q] = Some(s);
                improved = true;
            }
        }
        if !improved {
            let values = (0..n).map(value).collect();
            return Ok((values, policy));
        }
    }
    Err(Error::NoConvergence(limit))
}
