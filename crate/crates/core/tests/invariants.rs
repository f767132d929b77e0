use edgedel::deletion::approximate;
use edgedel::divergence::{exact_kl, kl_bound};
use edgedel::harness::{run_experiment_with, ExperimentSpec};
use edgedel::netio::{parse_hugin_subset, parse_network, read_report, serialize_hugin, serialize_network, write_report};
use edgedel::par::Exec;
use edgedel::param::{edbp_step, StepOptions};
use edgedel::{synth, EdgeParams, EngineState, Network};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn network(seed: u64, n: usize) -> (Network, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = synth::random_network(&mut rng, n, 3, 3);
    (net, rng)
}

fn close(a: &Network, b: &Network) -> bool {
    a.variables() == b.variables()
        && a.cpts().iter().zip(b.cpts()).all(|(x, y)| {
            x.child == y.child
                && x.parents == y.parents
                && x.table.iter().zip(&y.table).all(|(p, q)| (p - q).abs() <= 1e-11 * p.abs().max(1.0))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonical_and_hugin_round_trip(seed in any::<u64>(), n in 1usize..9) {
        let (net, _) = network(seed, n);
        let back = parse_network(&serialize_network(&net)).unwrap();
        prop_assert!(close(&net, &back));
        let back = parse_hugin_subset(&serialize_hugin(&net)).unwrap();
        prop_assert!(close(&net, &back));
    }

    #[test]
    fn posteriors_are_distributions(seed in any::<u64>(), n in 1usize..10) {
        let (net, mut rng) = network(seed, n);
        let ev = synth::random_evidence(&mut rng, &net, 3);
        let st = EngineState::compile(&net, &ev).unwrap();
        prop_assert!(st.pr_e() > 0.0 && st.pr_e() <= 1.0 + 1e-12);
        for m in st.all_marginals().unwrap() {
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(m.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn divergences_are_ordered_and_nonnegative(seed in any::<u64>(), n in 3usize..7) {
        let (net, mut rng) = network(seed, n);
        let edges = net.edges();
        prop_assume!(!edges.is_empty());
        let k = rng.gen_range(1..=edges.len().min(3));
        let (aug, mut plan, mut del) = approximate(&net, &edges[..k]).unwrap();
        for e in &mut plan.entries {
            let c = e.params.card();
            let pm = synth::SyntheticCptLaw::UniformSimplex.sample_row(&mut rng, c);
            let se = (0..c).map(|_| rng.gen_range(0.01..1.0)).collect();
            e.params = EdgeParams::new(pm, se).unwrap();
        }
        del.set_params(&plan).unwrap();
        let ev = synth::random_evidence(&mut rng, &net, 2);
        let evp = del.evidence(&ev);
        let bound = kl_bound(&aug, &del, &plan, &ev, &evp).unwrap().total;
        let exact = exact_kl(&aug, &del, &plan, &ev, &evp).unwrap();
        prop_assert!(exact >= -1e-12);
        prop_assert!(exact <= bound + 1e-9);
    }

    #[test]
    fn edbp_sweeps_keep_priors_normalized(seed in any::<u64>(), n in 3usize..8) {
        let (net, mut rng) = network(seed, n);
        prop_assume!(!net.edges().is_empty());
        let ev = synth::random_evidence(&mut rng, &net, 2);
        let (_, plan, del) = approximate(&net, &net.edges()).unwrap();
        let next = edbp_step(&del, &plan, &del.evidence(&ev), StepOptions::default()).unwrap();
        for e in &next.entries {
            prop_assert!((e.params.pm.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(e.params.se.iter().all(|&s| (0.0..=1.0).contains(&s)));
        }
    }
}

#[test]
fn reports_round_trip_and_parallel_matches_sequential() {
    let spec = ExperimentSpec::from_toml(
        r#"
name = "grid3"
network = { kind = "grid", rows = 3, cols = 3 }
instances = 4
k = [0, 3, 12]
methods = ["ed-kl", "ed-bp"]
selections = ["rand", "guided", "mi"]
seed = 99
map = true
"#,
    )
    .unwrap();
    let dir = std::path::Path::new(".");
    let seq = run_experiment_with(&spec, dir, Exec::Sequential).unwrap();
    let par = run_experiment_with(&spec, dir, Exec::Parallel).unwrap();
    assert_eq!(seq.len(), 4 * 2 * 3 * 3);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_report(&seq, &mut a).unwrap();
    write_report(&par, &mut b).unwrap();
    assert_eq!(a, b);

    let back = read_report(a.as_slice()).unwrap();
    assert_eq!(back.len(), seq.len());
    for (x, y) in back.iter().zip(&seq) {
        assert_eq!((x.instance, x.method, x.selection, x.edges_deleted), (y.instance, y.method, y.selection, y.edges_deleted));
        let kl = y.kl_bound.unwrap();
        assert!((x.kl_bound.unwrap() - kl).abs() <= 1e-11 * kl.max(1.0));
    }
}
