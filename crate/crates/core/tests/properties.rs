use adele::optimizer::{amosa_optimize, is_mutually_nondominated, perturb, AmosaConfig};
use adele::selection::{skip_probability, AdeleParams, ElevatorAssignment, SelectorState};
use adele::topology::{Dims, Topology};
use adele::traffic::{shuffle_destination, TrafficMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn topology() -> impl Strategy<Value = Topology> {
    (1usize..=4, 1usize..=4, 2usize..=4)
        .prop_flat_map(|(x, y, l)| {
            let cells = x * y;
            (Just((x, y, l)), proptest::sample::subsequence((0..cells).collect::<Vec<_>>(), 1..=cells.min(4)))
        })
        .prop_map(|((x, y, l), cells)| {
            Topology::new(Dims::new(x, y, l), cells.into_iter().map(|c| (c % x, c / x)).collect()).unwrap()
        })
}

proptest! {
    #[test]
    fn node_ids_round_trip(t in topology()) {
        for id in 0..t.node_count() {
            prop_assert_eq!(t.node_id(t.coord(id)), id);
        }
    }

    #[test]
    fn skip_probability_is_bounded_and_monotone(n in 1usize..10, xi in 0.0f64..0.99, r1 in 0.0f64..1.0, r2 in 0.0f64..1.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let (p_lo, p_hi) = (skip_probability(lo, n, xi), skip_probability(hi, n, xi));
        prop_assert!((0.0..=1.0 - xi).contains(&p_lo));
        prop_assert!(p_lo <= p_hi + 1e-12);
    }

    #[test]
    fn relative_costs_sum_to_one(samples in proptest::collection::vec((0usize..5, 0.0f64..20.0), 0..40)) {
        let mut s = SelectorState::new((0..5).collect(), AdeleParams::default(), ChaCha8Rng::seed_from_u64(0)).unwrap();
        for (k, t) in samples {
            s.update_cost(k, t).unwrap();
        }
        let total: f64 = (0..5).map(|k| s.relative_cost(k).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adele_only_picks_subset_members(seed in any::<u64>(), costs in proptest::collection::vec(0.0f64..5.0, 3)) {
        let t = Topology::new(Dims::new(4, 4, 2), vec![(0, 0), (3, 0), (0, 3), (3, 3)]).unwrap();
        let subset = vec![0, 2, 3];
        let mut s = SelectorState::new(subset.clone(), AdeleParams::default(), ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for (k, c) in subset.iter().zip(costs) {
            s.set_cost(*k, c).unwrap();
        }
        for id in 0..16 {
            let e = s.select_adele(t.coord(id), t.coord(id + 16), &t);
            prop_assert!(subset.contains(&e));
        }
    }

    #[test]
    fn shuffle_is_a_permutation_on_powers_of_two(bits in 1u32..10) {
        let n = 1usize << bits;
        let mut hit = vec![false; n];
        for s in 0..n {
            if let Some(d) = shuffle_destination(s, n) {
                prop_assert!(d < n && d != s);
                prop_assert!(!hit[d]);
                hit[d] = true;
            }
        }
    }

    #[test]
    fn perturb_keeps_assignments_valid(t in topology(), seed in any::<u64>(), steps in 1usize..50) {
        let e = t.elevator_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = ElevatorAssignment::nearest(&t);
        for _ in 0..steps {
            a = perturb(&a, e, (1, e), &mut rng);
            prop_assert!(a.validate(&t).is_ok());
            for s in a.subsets() {
                prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn archives_are_mutually_nondominated(t in topology(), seed in any::<u64>()) {
        let config = AmosaConfig { t_initial: 10.0, t_final: 0.1, iterations_per_temp: 30, seed, ..AmosaConfig::default() };
        let archive = amosa_optimize(&t, &TrafficMatrix::uniform(t.node_count()), &config).unwrap();
        prop_assert!(!archive.is_empty());
        prop_assert!(archive.len() <= config.soft_limit);
        prop_assert!(is_mutually_nondominated(&archive));
        prop_assert!(archive.windows(2).all(|w| w[0].objectives.variance <= w[1].objectives.variance));
    }
}
