use std::collections::HashMap;

use netlearn_core::inference::{
    build_engine, resolve_engine, BeliefEngine, EngineChoice, FilterEngine, FilterMode, GenericEngine, TieRule, Trajectory,
    DEFAULT_ENUMERATION_BUDGET,
};
use netlearn_core::network::{Network, Topology};
use netlearn_core::signal::{Label, SignalMatrix, SignalModel};

const TOL: f64 = 1e-9;

fn all_matrices(n: usize, horizon: usize) -> Vec<SignalMatrix> {
    SignalMatrix::enumerate(|_, _| 2, n, horizon)
}

fn assert_same(a: &Trajectory, b: &Trajectory, what: &str) {
    for i in 0..a.n_agents() {
        for t in 0..a.horizon() {
            assert_eq!(a.action(i, t), b.action(i, t), "{what}: action of {i} at {t}");
            let (x, y) = (a.belief(i, t), b.belief(i, t));
            for (u, v, name) in [
                (x.p, y.p, "p"),
                (x.llr, y.llr, "L"),
                (x.social, y.social, "S"),
                (x.private, y.private, "P"),
            ] {
                assert!((u - v).abs() < TOL, "{what}: {name} of {i} at {t}: {u} vs {v}");
            }
        }
    }
}

#[test]
fn filter_engines_match_enumeration() {
    for p in [0.6, 0.75, 0.9] {
        let model = SignalModel::symmetric_binary(p).unwrap();
        for n in [2, 3] {
            for (topology, mode) in [(Topology::Complete, FilterMode::Complete), (Topology::Star, FilterMode::Star)] {
                let net = Network::make(topology, n, None).unwrap();
                for horizon in 1..=5 {
                    let generic = GenericEngine::build(&model, &net, horizon, TieRule::G, DEFAULT_ENUMERATION_BUDGET).unwrap();
                    let filter = FilterEngine::new(mode, &model, &net, horizon, TieRule::G).unwrap();
                    for m in all_matrices(n, horizon) {
                        let what = format!("p={p} n={n} T={horizon} {topology:?}");
                        assert_same(&generic.play(&m).unwrap(), &filter.play(&m).unwrap(), &what);
                    }
                }
            }
        }
    }
}

#[test]
fn tie_rule_b_also_matches() {
    let model = SignalModel::symmetric_binary(0.75).unwrap();
    let net = Network::make(Topology::Complete, 3, None).unwrap();
    let generic = GenericEngine::build(&model, &net, 4, TieRule::B, DEFAULT_ENUMERATION_BUDGET).unwrap();
    let filter = FilterEngine::new(FilterMode::Complete, &model, &net, 4, TieRule::B).unwrap();
    for m in all_matrices(3, 4) {
        assert_same(&generic.play(&m).unwrap(), &filter.play(&m).unwrap(), "tie b");
    }
}

fn flipped(m: &SignalMatrix) -> SignalMatrix {
    let rows: Vec<Vec<u8>> = (0..m.n_agents()).map(|i| m.row(i).iter().map(|s| 1 - s).collect()).collect();
    SignalMatrix::from_rows(&rows)
}

#[test]
fn relabeling_states_negates_beliefs() {
    let model = SignalModel::symmetric_binary(0.8).unwrap();
    for topology in [Topology::Ring, Topology::Complete, Topology::Star] {
        let net = Network::make(topology, 3, None).unwrap();
        let horizon = 4;
        let g = GenericEngine::build(&model, &net, horizon, TieRule::G, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let b = GenericEngine::build(&model, &net, horizon, TieRule::B, DEFAULT_ENUMERATION_BUDGET).unwrap();
        for m in all_matrices(3, horizon) {
            let x = g.play(&m).unwrap();
            let y = b.play(&flipped(&m)).unwrap();
            for i in 0..3 {
                for t in 0..horizon {
                    let (u, v) = (x.belief(i, t), y.belief(i, t));
                    assert!((u.llr + v.llr).abs() < TOL);
                    assert!((u.social + v.social).abs() < TOL);
                    assert!((u.private + v.private).abs() < TOL);
                    assert_eq!(x.action(i, t), y.action(i, t).flip());
                }
            }
        }
    }
}

/// Beliefs depend on the signal matrix only through the agent's own signals
/// and the observed action history.
fn check_measurable(engine: &dyn BeliefEngine, net: &Network, horizon: usize) {
    let n = net.n_agents();
    let plays: Vec<Trajectory> = all_matrices(n, horizon).iter().map(|m| engine.play(m).unwrap()).collect();
    for i in 0..n {
        for t in 0..horizon {
            let mut seen: HashMap<(Vec<u8>, Vec<Label>), f64> = HashMap::new();
            for tr in &plays {
                let own = tr.signals.row(i)[..=t].to_vec();
                let hist: Vec<Label> = net
                    .neighbors(i)
                    .iter()
                    .flat_map(|&j| (0..t).map(move |s| (j, s)))
                    .map(|(j, s)| tr.action(j, s))
                    .collect();
                let l = tr.belief(i, t).llr;
                let prev = *seen.entry((own, hist)).or_insert(l);
                assert!((prev - l).abs() < TOL, "agent {i} t {t}");
            }
        }
    }
}

#[test]
fn beliefs_are_measurable_in_information_sets() {
    let model = SignalModel::symmetric_binary(0.7).unwrap();
    for topology in [Topology::Ring, Topology::Complete, Topology::Star] {
        let net = Network::make(topology, 3, None).unwrap();
        let g = GenericEngine::build(&model, &net, 4, TieRule::G, DEFAULT_ENUMERATION_BUDGET).unwrap();
        check_measurable(&g, &net, 4);
    }
    for (topology, mode) in [(Topology::Complete, FilterMode::Complete), (Topology::Star, FilterMode::Star)] {
        let net = Network::make(topology, 3, None).unwrap();
        let f = FilterEngine::new(mode, &model, &net, 4, TieRule::G).unwrap();
        check_measurable(&f, &net, 4);
    }
}

#[test]
fn generic_handles_ternary_and_overrides() {
    let tri = netlearn_core::signal::SignalDist::new(
        vec!["lo".into(), "mid".into(), "hi".into()],
        vec![0.2, 0.3, 0.5],
        vec![0.5, 0.3, 0.2],
    )
    .unwrap();
    let late = netlearn_core::signal::SignalDist::new(vec!["x".into(), "y".into()], vec![0.6, 0.4], vec![0.3, 0.7]).unwrap();
    let model = SignalModel::stationary(tri).with_override(1, 1, late);
    let net = Network::make(Topology::Ring, 2, None).unwrap();
    let e = GenericEngine::build(&model, &net, 3, TieRule::G, DEFAULT_ENUMERATION_BUDGET).unwrap();
    let m = model.bound_m();
    let sizes = |i: usize, t: usize| model.alphabet_size(i, t);
    for mat in SignalMatrix::enumerate(sizes, 2, 3) {
        let tr = e.play(&mat).unwrap();
        for i in 0..2 {
            for t in 0..3 {
                let b = tr.belief(i, t);
                assert!(b.private.abs() <= m * (t + 1) as f64 + TOL);
                assert!((b.llr - b.social - b.private).abs() < TOL);
            }
        }
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

    // Whatever `auto` picks must reproduce full enumeration.
    #[test]
    fn auto_engine_is_always_applicable(
        n in 1usize..=3,
        horizon in 1usize..=3,
        p in proptest::sample::select(vec![0.6, 0.75, 0.9]),
        mask in proptest::collection::vec(proptest::bool::ANY, 9),
        bits in proptest::collection::vec(0u8..2, 9),
    ) {
        let edges: Vec<(usize, usize)> = (0..n * n).filter(|&k| mask[k]).map(|k| (k / n, k % n)).collect();
        let net = Network::from_edges(n, &edges).unwrap();
        let model = SignalModel::symmetric_binary(p).unwrap();
        let kind = resolve_engine(EngineChoice::Auto, &model, &net).unwrap();
        let auto = build_engine(kind, &model, &net, horizon, TieRule::G, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let generic = GenericEngine::build(&model, &net, horizon, TieRule::G, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let rows: Vec<Vec<u8>> = (0..n).map(|i| bits[i * 3..i * 3 + horizon].to_vec()).collect();
        let m = SignalMatrix::from_rows(&rows);
        assert_same(&generic.play(&m).unwrap(), &auto.play(&m).unwrap(), kind.name());
    }
}
