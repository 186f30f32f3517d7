//! Seeded instance families and property checks shared by the property
//! suites and the acceptance gate. Every check returns `Err(reason)` on a
//! violation.

#![allow(dead_code)]

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qparity::decomposition::{
    almost_sure_reach, mask_of, mec_decompose, mec_decompose_within, random_attractor, reach_value,
};
use qparity::energy_game::{
    credits_by_unfolding, default_cap, solve_buchi_game, solve_energy_buchi_game, unfold_energy, Credit,
};
use qparity::energy_parity::solve_energy_parity;
use qparity::generate::{random_game, random_mdp, random_mec, GenParams};
use qparity::meanpayoff::mec_value;
use qparity::model::{energy_level, Embedding, Lasso};
use qparity::mp_parity::{
    solve_disjunction_energy_parity, solve_disjunction_mp_parity, solve_mp_parity,
};
use qparity::oracle::{
    almost_sure_reach_oracle, mec_oracle, mp_parity_oracle, policy_enum_mp_oracle, product_energy_oracle,
};
use qparity::simulate::simulate;
use qparity::strategy::{Controller, RandomController, TransducerRun};
use qparity::{Arena, GameGraph, Mdp, ModelKind, Owner, Prob, Rational, StateId, StateSet};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
}

/// The small-instance family: `|Q| ≤ 6`, `W ≤ 3`, `d ≤ 4`.
pub fn small_params(seed: u64) -> GenParams {
    let mut r = rng(seed, 1);
    GenParams {
        states: r.gen_range(1..=6),
        max_weight: r.gen_range(1..=3),
        max_priority: r.gen_range(0..=4),
        density: [0.3, 0.45, 0.6][r.gen_range(0..3)],
        random_fraction: [0.25, 0.5, 0.75][r.gen_range(0..3)],
        kind: ModelKind::Mdp,
        seed,
    }
}

pub fn small_mdp(seed: u64) -> Mdp {
    random_mdp(&small_params(seed)).expect("generator params are valid")
}

pub fn buchi_game(seed: u64) -> GameGraph {
    random_game(&GenParams { max_priority: 1, ..small_params(seed) }).expect("valid")
}

/// A single end-component with at most `max_out` successors per state.
pub fn small_mec(seed: u64, max_out: usize) -> Mdp {
    let mut p = small_params(seed);
    p.states = 1 + (seed as usize % 7);
    random_mec(&p, max_out).expect("valid")
}

fn scaled(m: &Mdp, k: i64) -> Mdp {
    m.map_weights(|e| e.weight * k)
}

// ---- energy games ----------------------------------------------------------

/// `(q, c)` winning in the unfolded game implies `(q, c + 1)` winning, and
/// the least winning column equals the symbolic credits.
pub fn credit_monotonicity(seed: u64) -> Check {
    let g = buchi_game(seed);
    let cap = default_cap(&g);
    let u = unfold_energy(&g, cap).map_err(|e| e.to_string())?;
    let (win, _) = solve_buchi_game(&u.game).map_err(|e| e.to_string())?;
    let symbolic = solve_energy_buchi_game(&g, None).map_err(|e| e.to_string())?.credits;
    for q in g.states() {
        for c in 0..cap {
            ensure!(
                !win.contains(&u.node(q, c)) || win.contains(&u.node(q, c + 1)),
                "seed {seed}: ({q}, {c}) wins but ({q}, {}) loses",
                c + 1
            );
        }
        let least = (0..=cap).find(|&c| win.contains(&u.node(q, c)));
        let expected = least.map_or(Credit::Unwinnable, Credit::Finite);
        ensure!(symbolic.get(q) == expected, "seed {seed}: state {q} symbolic {:?} unfolded {expected:?}", symbolic.get(q));
    }
    Ok(())
}

/// Doubling the cap changes neither game credits nor energy-parity credits.
pub fn cap_doubling(seed: u64) -> Check {
    let g = buchi_game(seed);
    let cap = default_cap(&g);
    let a = solve_energy_buchi_game(&g, Some(cap)).map_err(|e| e.to_string())?.credits;
    let b = solve_energy_buchi_game(&g, Some(2 * cap)).map_err(|e| e.to_string())?.credits;
    ensure!(a == b, "seed {seed}: game credits {a:?} at cap {cap} vs {b:?} at {}", 2 * cap);
    let explicit = credits_by_unfolding(&g, 2 * cap).map_err(|e| e.to_string())?;
    ensure!(a == explicit, "seed {seed}: symbolic {a:?} vs unfolded {explicit:?}");
    let m = small_mdp(seed);
    let c = qparity::oracle::oracle_cap(&m);
    let x = product_energy_oracle(&m, Some(c)).map_err(|e| e.to_string())?;
    let y = product_energy_oracle(&m, Some(2 * c)).map_err(|e| e.to_string())?;
    ensure!(x == y, "seed {seed}: product credits change with the cap");
    Ok(())
}

/// `k·w` multiplies every winnable credit and every end-component gain by `k`.
pub fn weight_scaling(seed: u64) -> Check {
    let k = 2 + (seed % 3) as i64;
    let m = small_mdp(seed);
    let base = solve_energy_parity(&m).map_err(|e| e.to_string())?;
    let big = solve_energy_parity(&scaled(&m, k)).map_err(|e| e.to_string())?;
    for q in m.states() {
        let expected = match base.credits.get(q) {
            Credit::Finite(c) => Credit::Finite(c * k as u64),
            Credit::Unwinnable => Credit::Unwinnable,
        };
        ensure!(big.credits.get(q) == expected, "seed {seed}: credit of {q} not scaled by {k}");
    }
    let g = buchi_game(seed);
    let gs = g.map_weights(|e| e.weight * k);
    let a = solve_energy_buchi_game(&g, None).map_err(|e| e.to_string())?.credits;
    let b = solve_energy_buchi_game(&gs, None).map_err(|e| e.to_string())?.credits;
    for q in g.states() {
        let expected = a.get(q).finite().map(|c| c * k as u64);
        ensure!(b.get(q).finite() == expected, "seed {seed}: game credit of {q} not scaled");
    }
    let kk = Rational::from_integer(k.into());
    for u in mec_decompose(&m).components {
        let v = mec_value::<Rational>(&m, &u).map_err(|e| e.to_string())?;
        let w = mec_value::<Rational>(&scaled(&m, k), &u).map_err(|e| e.to_string())?;
        ensure!(w.gain == &v.gain * &kk, "seed {seed}: gain {} scaled by {k} gave {}", v.gain, w.gain);
    }
    Ok(())
}

/// Changing probabilities but not supports leaves energy-parity answers alone.
pub fn support_invariance(seed: u64) -> Check {
    let m = small_mdp(seed);
    let base = solve_energy_parity(&m).map_err(|e| e.to_string())?;
    let other = m.map_distributions(|q, deg| {
        let mut r = rng(seed, 7 + q as u64);
        let parts: Vec<i64> = (0..deg).map(|_| r.gen_range(1..=9)).collect();
        let total: i64 = parts.iter().sum();
        parts.into_iter().map(|p| Prob::new(p, total).expect("positive")).collect()
    });
    let alt = solve_energy_parity(&other).map_err(|e| e.to_string())?;
    ensure!(base.winning == alt.winning, "seed {seed}: winning set depends on probabilities");
    ensure!(base.credits == alt.credits, "seed {seed}: credits depend on probabilities");
    Ok(())
}

fn thresholds(seed: u64) -> Vec<Rational> {
    let mut r = rng(seed, 3);
    (0..3).map(|_| Rational::new(r.gen_range(-6..=6).into(), r.gen_range(1..=3).into())).collect()
}

/// Strict-threshold answers are contained in non-strict ones.
pub fn strict_subset(seed: u64) -> Check {
    let m = small_mdp(seed);
    for nu in thresholds(seed) {
        let strict = solve_mp_parity(&m, &nu, true).map_err(|e| e.to_string())?;
        let weak = solve_mp_parity(&m, &nu, false).map_err(|e| e.to_string())?;
        ensure!(strict.almost_sure.is_subset(&weak.almost_sure), "seed {seed}: strict ⊄ non-strict at {nu}");
        ensure!(strict.report.win.is_subset(&weak.report.win), "seed {seed}: strict end-components ⊄ non-strict");
    }
    Ok(())
}

/// Disjunctions win wherever the matching conjunction wins, with no more credit.
pub fn disjunction_containment(seed: u64) -> Check {
    let m = small_mdp(seed);
    for nu in thresholds(seed) {
        for strict in [false, true] {
            let conj = solve_mp_parity(&m, &nu, strict).map_err(|e| e.to_string())?;
            let disj = solve_disjunction_mp_parity(&m, &nu, strict).map_err(|e| e.to_string())?;
            ensure!(conj.almost_sure.is_subset(&disj.almost_sure), "seed {seed}: mp disjunction misses states at {nu}");
        }
    }
    let conj = solve_energy_parity(&m).map_err(|e| e.to_string())?;
    let disj = solve_disjunction_energy_parity(&m).map_err(|e| e.to_string())?;
    for q in m.states() {
        if let Credit::Finite(c) = conj.credits.get(q) {
            let d = disj.credits.get(q).finite();
            ensure!(d.is_some_and(|d| d <= c), "seed {seed}: state {q} wins the conjunction with {c} but disjunction has {d:?}");
        }
    }
    Ok(())
}

// ---- differential checks -----------------------------------------------------

/// Energy parity against the product oracle, plus the memory accounting.
pub fn energy_parity_differential(seed: u64) -> Check {
    let m = small_mdp(seed);
    let oracle = product_energy_oracle(&m, None).map_err(|e| e.to_string())?;
    let ours = solve_energy_parity(&m).map_err(|e| format!("seed {seed}: {e}"))?;
    ensure!(ours.credits == oracle, "seed {seed}: credits {:?} vs oracle {:?}", ours.credits, oracle);
    ensure!(ours.winning == oracle.winning(), "seed {seed}: winning sets differ");
    Ok(())
}

/// Memory of the synthesized energy-parity strategy against `2·(|Z|+1)·W`.
pub fn memory_accounting(seed: u64) -> Result<(u64, u64), String> {
    let m = small_mdp(seed);
    let r = solve_energy_parity(&m).map_err(|e| e.to_string())?;
    Ok((r.memory_size(), r.memory_bound))
}

/// `mec_value` against policy enumeration on one generated end-component.
pub fn mec_differential(seed: u64) -> Check {
    let m = small_mec(seed, 3);
    let dec = mec_decompose(&m);
    ensure!(dec.components.len() == 1, "seed {seed}: generator produced {} components", dec.components.len());
    let u = &dec.components[0];
    let ours = mec_value::<Rational>(&m, u).map_err(|e| e.to_string())?;
    let oracle = policy_enum_mp_oracle(&m, &u.states).map_err(|e| e.to_string())?;
    ensure!(ours.gain == oracle, "seed {seed}: gain {} vs oracle {oracle}", ours.gain);
    Ok(())
}

/// The winning end-component search against the definition, with its trace.
pub fn algorithm_audit(seed: u64) -> Check {
    let m = small_mdp(seed);
    let d = m.max_priority();
    for nu in thresholds(seed) {
        for strict in [false, true] {
            let ours = solve_mp_parity(&m, &nu, strict).map_err(|e| e.to_string())?;
            let oracle = mp_parity_oracle(&m, &nu, strict).map_err(|e| e.to_string())?;
            ensure!(ours.almost_sure == oracle, "seed {seed} ν={nu} strict={strict}: {:?} vs {oracle:?}", ours.almost_sure);
            let trace = &ours.report.iterations;
            ensure!(trace.len() as u32 <= d / 2 + 1, "seed {seed}: {} iterations", trace.len());
            let mut removed = StateSet::new();
            for (k, it) in trace.iter().enumerate() {
                ensure!(it.priority == 2 * k as u32, "seed {seed}: iteration {k} has priority {}", it.priority);
                ensure!(it.domain.is_disjoint(&removed), "seed {seed}: domain overlaps earlier attractors");
                for &q in &it.domain {
                    let succ: Vec<StateId> = m.successors(q).collect();
                    ensure!(succ.iter().any(|s| it.domain.contains(s)), "seed {seed}: {q} has no edge in the sub-MDP");
                    if m.owner(q) == Owner::Random {
                        ensure!(succ.iter().all(|s| it.domain.contains(s)), "seed {seed}: {q} escapes the sub-MDP");
                    }
                }
                ensure!(it.attractor.is_subset(&it.domain), "seed {seed}: attractor leaves the domain");
                ensure!(it.win.is_subset(&it.attractor), "seed {seed}: win not in attractor");
                for (u, gain) in &it.qualified {
                    ensure!(it.candidates.contains(u), "seed {seed}: qualified set is not a candidate");
                    let least = u.iter().map(|&q| m.priority(q)).min().unwrap();
                    ensure!(least == it.priority, "seed {seed}: qualified set has least priority {least}");
                    ensure!(if strict { *gain > nu } else { *gain >= nu }, "seed {seed}: gain {gain} misses {nu}");
                }
                removed.extend(it.attractor.iter().copied());
            }
        }
    }
    Ok(())
}

// ---- structural properties ---------------------------------------------------

/// Path in `image` from the image of `q` to the image of `r` through fresh
/// states only, as a state sequence.
fn image_path(image: &Arena, emb: &Embedding, q: StateId, r: StateId) -> Option<Vec<StateId>> {
    let (start, goal) = (emb.old_to_new[q], emb.old_to_new[r]);
    let mut stack = vec![vec![start]];
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap();
        for s in image.successors(last) {
            if s == goal {
                let mut p = path.clone();
                p.push(s);
                return Some(p);
            }
            if emb.new_to_old[s].is_none() && !path.contains(&s) {
                let mut p = path.clone();
                p.push(s);
                stack.push(p);
            }
        }
    }
    None
}

fn image_of(image: &Arena, emb: &Embedding, play: &[StateId]) -> Option<Vec<StateId>> {
    let mut out = vec![emb.old_to_new[play[0]]];
    for w in play.windows(2) {
        let p = image_path(image, emb, w[0], w[1])?;
        out.extend_from_slice(&p[1..]);
    }
    Some(out)
}

fn random_walk(m: &Arena, seed: u64, len: usize) -> Vec<StateId> {
    let mut r = rng(seed, 11);
    let mut q = r.gen_range(0..m.len());
    let mut play = vec![q];
    for _ in 0..len {
        let succ: Vec<StateId> = m.successors(q).collect();
        q = succ[r.gen_range(0..succ.len())];
        play.push(q);
    }
    play
}

/// Both transforms preserve energy levels of corresponding prefixes and the
/// least recurring priority of lassos, and produce valid models.
pub fn transforms_preserve(seed: u64) -> Check {
    let m = small_mdp(seed);
    let (normal, emb_n) = qparity::transform::normalize_for_energy(&m);
    let alt = qparity::transform::make_alternating(&m);
    ensure!(normal.validate().is_empty(), "seed {seed}: normalized model invalid");
    ensure!(alt.mdp.validate().is_empty(), "seed {seed}: alternating model invalid");
    ensure!(qparity::transform::is_alternating(&alt.mdp).is_none(), "seed {seed}: not alternating");
    let play = random_walk(&m, seed, 12);
    let el = energy_level(&m, &play).map_err(|e| e.to_string())?;
    for (name, image, emb) in [("normalize", normal.arena(), &emb_n), ("alternate", alt.mdp.arena(), &alt.embedding)] {
        let p = image_of(image, emb, &play).ok_or(format!("seed {seed}: {name} lost an edge"))?;
        ensure!(energy_level(image, &p).map_err(|e| e.to_string())? == el, "seed {seed}: {name} changes energy");
    }
    // a lasso: close the walk on its first repeated state
    let cycle_start = (0..play.len()).find(|&i| play[i + 1..].contains(&play[i]));
    if let Some(i) = cycle_start {
        let j = i + 1 + play[i + 1..].iter().position(|&s| s == play[i]).unwrap();
        let stem = play[..i].to_vec();
        let cycle = play[i..j].to_vec();
        let lasso = Lasso { stem, cycle: cycle.clone() };
        let least = lasso.min_recurring_priority(&m);
        for (name, image, emb) in [("normalize", normal.arena(), &emb_n), ("alternate", alt.mdp.arena(), &alt.embedding)] {
            let mut closed = cycle.clone();
            closed.push(cycle[0]);
            let img = image_of(image, emb, &closed).ok_or(format!("seed {seed}: {name} lost a cycle edge"))?;
            let img_lasso = Lasso { stem: vec![], cycle: img[..img.len() - 1].to_vec() };
            ensure!(img_lasso.min_recurring_priority(image) == least, "seed {seed}: {name} changes the recurring priority");
        }
    }
    Ok(())
}

/// Random attractors are monotone and idempotent. Removing one keeps the
/// MECs it does not touch and creates none outside the original MECs.
pub fn attractor_properties(seed: u64) -> Check {
    let m = small_mdp(seed);
    let mut r = rng(seed, 5);
    let small: StateSet = m.states().filter(|_| r.gen_bool(0.3)).collect();
    let mut large = small.clone();
    large.extend(m.states().filter(|_| r.gen_bool(0.3)));
    let a = random_attractor(&m, &small);
    let b = random_attractor(&m, &large);
    ensure!(a.is_subset(&b), "seed {seed}: attractor not monotone");
    ensure!(random_attractor(&m, &a) == a, "seed {seed}: attractor not idempotent");
    let rest: Vec<bool> = m.states().map(|q| !a.contains(&q)).collect();
    let after: Vec<StateSet> = mec_decompose_within(&m, &rest).components.into_iter().map(|u| u.states).collect();
    let before: Vec<StateSet> = mec_decompose(&m).components.into_iter().map(|u| u.states).filter(|u| u.is_disjoint(&a)).collect();
    for u in &before {
        ensure!(after.contains(u), "seed {seed}: MEC {u:?} disjoint from the attractor was lost");
    }
    let all: Vec<StateSet> = mec_decompose(&m).components.into_iter().map(|u| u.states).collect();
    for u in &after {
        ensure!(all.iter().any(|v| u.is_subset(v)), "seed {seed}: {u:?} is not inside an original MEC");
    }
    Ok(())
}

/// MEC decomposition, almost-sure reach and reach values against
/// independent computations and the Bellman equations.
pub fn decomposition_properties(seed: u64) -> Check {
    let m = small_mdp(seed);
    let ours: Vec<StateSet> = mec_decompose(&m).components.into_iter().map(|u| u.states).collect();
    let mut theirs = mec_oracle(&m);
    theirs.sort();
    let mut sorted = ours.clone();
    sorted.sort();
    ensure!(sorted == theirs, "seed {seed}: MECs {sorted:?} vs {theirs:?}");
    if m.len() <= 8 {
        let all = qparity::oracle::enumerate_end_components(&m).map_err(|e| e.to_string())?;
        let mut maximal = qparity::oracle::maximal(&all);
        maximal.sort();
        ensure!(maximal == theirs, "seed {seed}: subset enumeration disagrees");
    }
    let mut r = rng(seed, 9);
    let target: StateSet = m.states().filter(|_| r.gen_bool(0.3)).collect();
    let a = almost_sure_reach(&m, &target);
    ensure!(a == almost_sure_reach_oracle(&m, &target), "seed {seed}: almost-sure reach differs");
    let v = reach_value::<Rational>(&m, &target).map_err(|e| e.to_string())?;
    for q in m.states() {
        ensure!(v[q].is_one() == a.contains(&q), "seed {seed}: value 1 at {q} disagrees with almost-sure reach");
        if target.contains(&q) {
            continue;
        }
        let expected = match m.owner(q) {
            Owner::Random => m
                .out_edges(q)
                .map(|e| e.prob.unwrap().to_big() * &v[e.dst])
                .fold(Rational::zero(), |acc, x| acc + x),
            _ => m.successors(q).map(|s| v[s].clone()).max().unwrap(),
        };
        ensure!(v[q] == expected, "seed {seed}: Bellman equation fails at {q}");
    }
    let _ = mask_of(m.len(), &target);
    Ok(())
}

/// Under random finite-memory strategies, states seen in the final tenth of
/// a long run lie inside one maximal end-component.
pub fn tail_in_mec(seed: u64) -> Check {
    let m = small_mdp(seed);
    let mecs: Vec<StateSet> = mec_decompose(&m).components.into_iter().map(|u| u.states).collect();
    for k in 0..20u64 {
        let mut r = rng(seed, 100 + k);
        let cap = r.gen_range(0..=6);
        let mut t = qparity::strategy::Transducer::energy_based(m.len(), cap);
        for q in m.states().filter(|&q| m.owner(q) == Owner::Player1) {
            let succ: Vec<StateId> = m.successors(q).collect();
            for level in 0..=cap {
                t.push(q, level, qparity::strategy::Choice::pure(succ[r.gen_range(0..succ.len())]));
            }
        }
        let mut run = TransducerRun::new(&t);
        let stats = simulate(&m, &mut run, None, r.gen_range(0..m.len()), cap, seed ^ k, 20_000).map_err(|e| e.to_string())?;
        let tail: StateSet = stats.tail_histogram.keys().copied().collect();
        ensure!(mecs.iter().any(|u| tail.is_subset(u)), "seed {seed}: tail {tail:?} outside every MEC");
    }
    Ok(())
}

/// The energy-Büchi game strategy keeps energy and visits Büchi states
/// against random opponents.
pub fn game_strategy_sound(seed: u64) -> Check {
    let g = buchi_game(seed);
    let sol = solve_energy_buchi_game(&g, None).map_err(|e| e.to_string())?;
    let cap = sol.cap;
    let horizon = 10 * cap * g.len() as u64;
    for q in g.states() {
        let Credit::Finite(c) = sol.credits.get(q) else { continue };
        for k in 0..100u64 {
            let mut run = TransducerRun::new(&sol.strategy);
            let mut opp = RandomController;
            let s = simulate(&g, &mut run, Some(&mut opp as &mut dyn Controller), q, c, seed.wrapping_mul(1000).wrapping_add(k), horizon)
                .map_err(|e| e.to_string())?;
            ensure!(s.energy_ok(), "seed {seed}: energy drops below 0 from {q} with credit {c}");
            ensure!(
                s.longest_buchi_gap <= g.len() as u64 * (cap + 1),
                "seed {seed}: {} steps without a Büchi visit",
                s.longest_buchi_gap
            );
        }
    }
    Ok(())
}

/// The energy-parity witness keeps energy and shows an even least priority
/// in the tail, from every winning state at its least credit.
pub fn energy_parity_witness(seed: u64, runs: u64, horizon: u64) -> Check {
    let m = small_mdp(seed);
    let r = solve_energy_parity(&m).map_err(|e| e.to_string())?;
    for &q in &r.winning {
        let c = r.credits.get(q).finite().unwrap();
        for k in 0..runs {
            let mut run = TransducerRun::new(&r.strategy);
            let s = simulate(&m, &mut run, None, q, c, seed.wrapping_mul(7919).wrapping_add(k), horizon).map_err(|e| e.to_string())?;
            ensure!(s.energy_ok(), "seed {seed}: energy {} from {q} with credit {c}", s.min_energy);
            ensure!(s.tail_parity_ok(), "seed {seed}: tail least priority {:?} from {q}", s.tail_min_priority);
        }
    }
    Ok(())
}

/// Floating-point gains track the exact ones.
pub fn scalar_agreement(seed: u64) -> Check {
    let m = small_mec(seed, 3);
    let u = &mec_decompose(&m).components[0];
    let exact = mec_value::<Rational>(&m, u).map_err(|e| e.to_string())?.gain;
    let exact = num_traits::ToPrimitive::to_f64(&exact).unwrap();
    let f = mec_value::<f64>(&m, u).map_err(|e| e.to_string())?.gain;
    let s = mec_value::<f32>(&m, u).map_err(|e| e.to_string())?.gain;
    ensure!((f - exact).abs() < 1e-9, "seed {seed}: f64 gain {f} vs {exact}");
    ensure!((s as f64 - exact).abs() < 1e-3, "seed {seed}: f32 gain {s} vs {exact}");
    Ok(())
}

pub fn count_failures(checks: impl Iterator<Item = Check>) -> (usize, Vec<String>) {
    let mut n = 0;
    let mut fails = Vec::new();
    for c in checks {
        n += 1;
        if let Err(e) = c {
            fails.push(e);
        }
    }
    (n, fails)
}
