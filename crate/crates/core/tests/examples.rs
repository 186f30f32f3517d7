use qparity::decomposition::{almost_sure_reach, mec_decompose, random_attractor, reach_value, restrict};
use qparity::energy_game::{solve_buchi_game, solve_energy_buchi_game, unfold_energy, Credit, CreditVector};
use qparity::energy_parity::{gadgetize, parity_to_buchi_copies, solve_energy_buchi_mdp, solve_energy_parity};
use qparity::fixtures::{leaky_chain, leaky_chain_gadget, recharge_loop};
use qparity::io::{export_dot, parse_model, write_model, DotOptions};
use qparity::meanpayoff::{certify_gain, mec_value, uniform_strategy};
use qparity::model::{energy_level, running_mean, Diagnostic, ModelDraft};
use qparity::mp_parity::{round_strategy, solve_disjunction_energy_parity, solve_mp_parity, winning_end_components};
use qparity::oracle::{policy_enum_mp_oracle, product_energy_oracle};
use qparity::simulate::simulate;
use qparity::strategy::TransducerRun;
use qparity::transform::make_alternating;
use qparity::{Model, ModelKind, Owner, Prob, Rational, StateSet};

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn set(xs: &[usize]) -> StateSet {
    xs.iter().copied().collect()
}

fn credits(xs: &[Option<u64>]) -> CreditVector {
    CreditVector(xs.iter().map(|c| c.map_or(Credit::Unwinnable, Credit::Finite)).collect())
}

#[test]
fn bundled_models_match_fixtures() {
    let cases: [(&str, Model); 3] = [
        (include_str!("../models/recharge.mdp"), Model::Mdp(recharge_loop())),
        (include_str!("../models/leaky.mdp"), Model::Mdp(leaky_chain())),
        (include_str!("../models/leaky-gadget.game"), Model::Game(leaky_chain_gadget())),
    ];
    for (text, expected) in cases {
        let parsed = parse_model(text).unwrap();
        assert_eq!(write_model(parsed.arena(), None), write_model(expected.arena(), None));
    }
    let m = parse_model(include_str!("../models/three-priorities.mdp")).unwrap();
    assert!(m.arena().validate().is_empty());
}

#[test]
fn recharge_model_shape() {
    let m = recharge_loop();
    assert!(m.validate().is_empty());
    assert_eq!(m.max_weight(), 10);
    assert_eq!(m.max_priority(), 1);
    assert_eq!(energy_level(&m, &[0, 0, 0, 1]).unwrap(), -8);
    assert_eq!(energy_level(&m, &[0, 1, 2, 0]).unwrap(), -20);
    assert_eq!(energy_level(&m, &[2]).unwrap(), 0);
    assert_eq!(running_mean::<Rational>(&m, &[0, 0, 0]).unwrap(), rat(1, 1));
    assert_eq!(running_mean::<Rational>(&leaky_chain(), &[0, 0, 0, 1]).unwrap(), rat(-2, 3));
    assert!(running_mean::<Rational>(&m, &[0]).is_err());
}

#[test]
fn validation_diagnostics() {
    let mut d = ModelDraft::new(ModelKind::Mdp);
    let p = d.add_state("p", Owner::Random, 0);
    let x = d.add_state("x", Owner::Player1, 0);
    d.add_state("dead", Owner::Player1, 0);
    d.add_edge(p, x, 0, Prob::new(1, 2));
    d.add_edge(p, p, 0, Prob::new(1, 3));
    d.add_edge(x, x, 0, None);
    let diags = d.validate();
    assert!(diags.iter().any(|e| matches!(e, Diagnostic::NoOutgoingEdge { state: 2 })));
    assert!(diags.iter().any(|e| matches!(e, Diagnostic::ProbabilitySum { state: 0, .. })));
}

#[test]
fn decomposition_examples() {
    let m = recharge_loop();
    let dec = mec_decompose(&m);
    assert_eq!(dec.components.len(), 1);
    assert_eq!(dec.components[0].states, set(&[0, 1, 2]));
    let l = leaky_chain();
    let dec = mec_decompose(&l);
    assert_eq!(dec.components.iter().map(|c| c.states.clone()).collect::<Vec<_>>(), vec![set(&[1])]);
    assert_eq!(random_attractor(&l, &set(&[1])), set(&[0, 1]));
    assert_eq!(almost_sure_reach(&l, &set(&[1])), set(&[0, 1]));
    assert_eq!(reach_value::<Rational>(&l, &set(&[1])).unwrap()[0], rat(1, 1));
    let (sub, map) = restrict(&l, &set(&[1])).unwrap();
    assert_eq!((sub.len(), map), (1, vec![1]));
    assert!(restrict(&l, &set(&[0])).is_err());
}

#[test]
fn gain_examples() {
    let m = recharge_loop();
    let u = &mec_decompose(&m).components[0];
    let v = mec_value::<Rational>(&m, u).unwrap();
    assert_eq!(v.gain, rat(1, 1));
    assert_eq!(v.policy[&0], 0);
    assert!(certify_gain(&m, u, &v));
    let mut bumped = v.clone();
    bumped.gain += rat(1, 1);
    assert!(!certify_gain(&m, u, &bumped));
    assert_eq!(policy_enum_mp_oracle(&m, &u.states).unwrap(), rat(1, 1));
    let sigma = uniform_strategy(&m, u).unwrap();
    assert_eq!(sigma.next_move(0, 0).unwrap().support().collect::<Vec<_>>(), vec![0, 1]);
    assert_eq!(sigma.next_move(0, 2).unwrap().as_pure(), Some(0));
    assert_eq!(sigma.memory_size(), 1);
}

#[test]
fn energy_game_examples() {
    let g = leaky_chain_gadget();
    let u = unfold_energy(&g, 4).unwrap();
    assert_eq!(u.game.len(), 5 * g.len() + 1);
    let sol = solve_energy_buchi_game(&g, None).unwrap();
    assert_eq!(sol.credits, qparity::fixtures::leaky_chain_gadget_credits());
    let (win, _) = solve_buchi_game(&u.game).unwrap();
    for c in 0..=4 {
        assert!(!win.contains(&u.node(0, c)), "a wins with credit {c}");
        assert!(!win.contains(&u.node(2, c)), "R wins with credit {c}");
    }
}

#[test]
fn energy_parity_examples() {
    let m = recharge_loop();
    let gadget = gadgetize(&m).unwrap();
    assert_eq!(gadget.game.len(), 2 + 3);
    assert_eq!(solve_energy_buchi_mdp(&m).unwrap().get(0), Credit::Finite(0));
    assert_eq!(solve_energy_buchi_mdp(&leaky_chain()).unwrap(), credits(&[None, Some(0)]));

    let alt = make_alternating(&m);
    let copies = parity_to_buchi_copies(&alt.mdp).unwrap();
    assert_eq!(copies.mdp.len(), 2 * alt.mdp.len() + 1);
    assert_eq!(copies.evens, vec![0]);

    let r = solve_energy_parity(&m).unwrap();
    assert_eq!(r.winning, set(&[0, 1, 2]));
    assert_eq!(r.credits, credits(&[Some(0), Some(10), Some(10)]));
    assert_eq!(product_energy_oracle(&m, Some(40)).unwrap(), r.credits);

    let odd = m.map_priorities(|_| 1);
    assert!(solve_energy_parity(&odd).unwrap().winning.is_empty());
}

/// `b` is an absorbing Büchi state, so only `a` loses outright; with credit
/// no larger than the oracle cap `a` never wins.
#[test]
fn leaky_chain_energy_parity() {
    let l = leaky_chain();
    let r = solve_energy_parity(&l).unwrap();
    assert_eq!(r.winning, set(&[1]));
    assert_eq!(r.credits.get(0), Credit::Unwinnable);
    assert_eq!(product_energy_oracle(&l, Some(12)).unwrap().get(0), Credit::Unwinnable);
}

#[test]
fn mean_payoff_parity_examples() {
    let l = leaky_chain();
    let zero = rat(0, 1);
    assert_eq!(winning_end_components(&l, &zero, false).unwrap().win, set(&[1]));
    assert!(winning_end_components(&l, &zero, true).unwrap().win.is_empty());
    assert_eq!(solve_mp_parity(&l, &zero, false).unwrap().almost_sure, set(&[0, 1]));
    assert!(solve_mp_parity(&l, &zero, true).unwrap().almost_sure.is_empty());
    let m = recharge_loop();
    assert_eq!(winning_end_components(&m, &zero, false).unwrap().win, set(&[0, 1, 2]));

    let d = solve_disjunction_energy_parity(&l).unwrap();
    assert_eq!(d.winning, set(&[0, 1]));
    assert_eq!(d.credits, credits(&[Some(0), Some(0)]));
}

#[test]
fn round_strategy_on_recharge() {
    let m = recharge_loop();
    let u = mec_decompose(&m).components[0].clone();
    let sigma = round_strategy(&m, &u, &rat(0, 1), false).unwrap();
    assert_eq!(sigma.optimal[&0], 0);
    assert_eq!(sigma.seek[0], Some(1));
    assert!(round_strategy(&leaky_chain(), &mec_decompose(&leaky_chain()).components[0], &rat(1, 1), false).is_err());
}

#[test]
fn simulation_examples() {
    let m = recharge_loop();
    let r = solve_energy_parity(&m).unwrap();
    for seed in 0..200 {
        let s = simulate(&m, &mut TransducerRun::new(&r.strategy), None, 0, 0, seed, 10_000).unwrap();
        assert!(s.energy_ok() && s.buchi_visits >= 1, "seed {seed}");
    }
    let l = leaky_chain();
    let t = qparity::strategy::Transducer::memoryless(l.len());
    let s = simulate(&l, &mut TransducerRun::new(&t), None, 0, 0, 1, 1000).unwrap();
    assert_eq!(s.tail_priorities.keys().copied().collect::<Vec<_>>(), vec![0]);
    assert!(simulate(&l, &mut TransducerRun::new(&t), None, 0, 0, 1, 0).is_err());
}

#[test]
fn dot_examples() {
    let m = recharge_loop();
    let z = solve_energy_parity(&m).unwrap().winning;
    let dot = export_dot(&m, &DotOptions { highlight: z, title: None });
    assert_eq!(dot.matches("shape=diamond").count(), 1);
    assert_eq!(dot.matches("palegreen").count(), 3);
}
