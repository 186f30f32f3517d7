//! Structure-preserving rewrites: binary probabilistic branching with hoisted
//! priorities, and strict alternation between player-1 and probabilistic states.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::One;

use crate::model::{Embedding, Mdp, ModelDraft, ModelKind, Owner, Prob, Priority, StateId};

/// Smallest odd priority not below every priority of `m`.
pub fn odd_ceiling(m: &Mdp) -> Priority {
    let d = m.max_priority();
    if d % 2 == 1 {
        d
    } else {
        d + 1
    }
}

fn copy_states(m: &Mdp) -> ModelDraft {
    let mut d = ModelDraft::new(ModelKind::Mdp);
    for q in m.states() {
        let s = m.state(q);
        d.add_state(s.name.clone(), s.owner, s.priority);
    }
    d
}

/// Rewrites `m` so that every probabilistic state has at most two successors
/// and carries the odd priority [`odd_ceiling`].
///
/// A probabilistic state with a different priority becomes a player-1 state
/// with one weight-0 edge into a fresh probabilistic root. Distributions with
/// `k > 2` successors become a chain of `k - 1` binary nodes: the node for the
/// `j`-th successor branches `p_j / rest` against the remaining mass. Chain
/// edges carry weight 0 except the edge reaching an original successor.
pub fn normalize_for_energy(m: &Mdp) -> (Mdp, Embedding) {
    let top = odd_ceiling(m);
    let mut d = copy_states(m);
    let n = m.len();
    for q in m.states() {
        match m.owner(q) {
            Owner::Random => {
                let root = if m.priority(q) == top {
                    q
                } else {
                    let root = d.add_state(format!("{}~root", m.name(q)), Owner::Random, top);
                    d.set_owner(q, Owner::Player1);
                    d.add_edge(q, root, 0, None);
                    root
                };
                let succ: Vec<_> = m.out_edges(q).map(|e| (e.dst, e.weight, e.prob.unwrap())).collect();
                split_chain(&mut d, m.name(q), root, &succ, top);
            }
            _ => {
                for e in m.out_edges(q) {
                    d.add_edge(q, e.dst, e.weight, None);
                }
            }
        }
    }
    let out = d.into_mdp().expect("normalization preserves validity");
    let len = out.len();
    (out, Embedding::prefix(n, len))
}

fn split_chain(
    d: &mut ModelDraft,
    name: &str,
    root: StateId,
    succ: &[(StateId, i64, Prob)],
    top: Priority,
) {
    if succ.len() <= 2 {
        for &(dst, w, p) in succ {
            d.add_edge(root, dst, w, Some(p));
        }
        return;
    }
    let mut node = root;
    let mut rest: Ratio<i64> = Ratio::one();
    for (j, &(dst, w, p)) in succ.iter().enumerate() {
        let remaining = succ.len() - j;
        if remaining == 2 {
            let (dst2, w2, p2) = succ[j + 1];
            let a = Prob::from_ratio(p.ratio() / rest).expect("conditional probability");
            let b = Prob::from_ratio(p2.ratio() / rest).expect("conditional probability");
            d.add_edge(node, dst, w, Some(a));
            d.add_edge(node, dst2, w2, Some(b));
            return;
        }
        let here = Prob::from_ratio(p.ratio() / rest).expect("conditional probability");
        let next = d.add_state(format!("{name}~split{j}"), Owner::Random, top);
        let stay = Prob::from_ratio(Ratio::one() - here.ratio()).expect("remaining mass is positive");
        d.add_edge(node, dst, w, Some(here));
        d.add_edge(node, next, 0, Some(stay));
        rest -= p.ratio();
        node = next;
    }
}

/// Result of [`make_alternating`].
#[derive(Clone, Debug)]
pub struct Alternating {
    pub mdp: Mdp,
    pub embedding: Embedding,
    /// Relay inserted on each original edge joining two same-owner states.
    pub relays: BTreeMap<(StateId, StateId), StateId>,
}

impl Alternating {
    /// Original state behind `q`; relays map to the source of their edge.
    pub fn original_of(&self, q: StateId) -> StateId {
        match self.embedding.new_to_old[q] {
            Some(o) => o,
            None => {
                let (&(src, _), _) = self.relays.iter().find(|(_, &r)| r == q).expect("relay");
                src
            }
        }
    }

    /// Original edge whose relay is `q`.
    pub fn relay_edge(&self, q: StateId) -> Option<(StateId, StateId)> {
        self.relays.iter().find(|(_, &r)| r == q).map(|(&e, _)| e)
    }
}

/// Inserts a relay of the opposite owner on every edge joining two states of
/// the same owner. The relay has the source's priority; the first half of the
/// split edge keeps weight and probability, the second has weight 0.
pub fn make_alternating(m: &Mdp) -> Alternating {
    let mut d = copy_states(m);
    let mut relays = BTreeMap::new();
    for e in m.edges() {
        let so = m.owner(e.src);
        if so != m.owner(e.dst) {
            d.add_edge(e.src, e.dst, e.weight, e.prob);
            continue;
        }
        let relay_owner = if so == Owner::Random { Owner::Player1 } else { Owner::Random };
        let r = d.add_state(
            format!("{}>{}", m.name(e.src), m.name(e.dst)),
            relay_owner,
            m.priority(e.src),
        );
        relays.insert((e.src, e.dst), r);
        d.add_edge(e.src, r, e.weight, e.prob);
        let p = if relay_owner == Owner::Random { Some(Prob::one()) } else { None };
        d.add_edge(r, e.dst, 0, p);
    }
    let mdp = d.into_mdp().expect("alternation preserves validity");
    let len = mdp.len();
    Alternating { embedding: Embedding::prefix(m.len(), len), mdp, relays }
}

pub fn is_alternating(m: &Mdp) -> Option<(StateId, StateId)> {
    m.edges()
        .iter()
        .find(|e| m.owner(e.src) == m.owner(e.dst))
        .map(|e| (e.src, e.dst))
}
