mod common;

use cmahpo::CmaState;
use common::*;
use proptest::prelude::*;

#[test]
fn exp_transform_gives_identical_candidates() {
    check_monotone_invariance(&[1, 2, 3], &[2, 5, 10], 25).unwrap();
}

#[test]
fn translated_problem_mirrors_original() {
    check_translation(&[4, 5, 6], &[2, 5, 10], 25).unwrap();
}

#[test]
fn covariance_stays_positive_definite() {
    let r = spd_run(rastrigin, 4, 150, 9).unwrap();
    assert!(r.min_eigenvalue > 0.0, "{}", r.min_eigenvalue);
    assert!(r.max_residual <= 1e-9, "{}", r.max_residual);
}

#[test]
fn same_seed_same_trajectory() {
    let (a, ma, _) = trajectory(rastrigin, vec![1.0; 6], 1.0, 77, 40);
    let (b, mb, _) = trajectory(rastrigin, vec![1.0; 6], 1.0, 77, 40);
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    let (c, _, _) = trajectory(rastrigin, vec![1.0; 6], 1.0, 78, 40);
    assert_ne!(a, c);
}

#[test]
fn snapshot_midway_continues_identically() {
    let mut a = CmaState::new(vec![0.3; 5], 0.7, 12).unwrap();
    for _ in 0..17 {
        let mut pop = a.ask().unwrap();
        for c in &mut pop {
            c.fitness = Some(rosenbrock(&c.vector));
        }
        a.tell(pop).unwrap();
    }
    let mut b = CmaState::from_snapshot(&a.to_snapshot()).unwrap();
    for _ in 0..10 {
        let mut pa = a.ask().unwrap();
        let mut pb = b.ask().unwrap();
        assert_eq!(pa, pb);
        for (x, y) in pa.iter_mut().zip(&mut pb) {
            x.fitness = Some(rosenbrock(&x.vector));
            y.fitness = x.fitness;
        }
        a.tell(pa).unwrap();
        b.tell(pb).unwrap();
    }
    assert_eq!(a.mean(), b.mean());
    assert_eq!(a.cov(), b.cov());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mean_stays_in_hull_of_parents(seed in any::<u64>(), n in 1usize..8, shuffle in any::<u64>()) {
        let mut state = CmaState::new(vec![0.0; n], 1.0, seed).unwrap();
        for _ in 0..5 {
            let mut pop = state.ask().unwrap();
            for c in &mut pop {
                c.fitness = Some(sphere(&c.vector));
            }
            let mut ranked = pop.clone();
            ranked.sort_by(|a, b| a.fitness.unwrap().total_cmp(&b.fitness.unwrap()));
            let mu = state.params().parent_count;
            let parents: Vec<Vec<f64>> = ranked[..mu].iter().map(|c| c.vector.clone()).collect();
            // order in which candidates are told must not matter
            let k = (shuffle as usize) % pop.len();
            pop.rotate_left(k);
            state.tell(pop).unwrap();
            for i in 0..n {
                let lo = parents.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
                let hi = parents.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
                let m = state.mean()[i];
                let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
                prop_assert!(m >= lo - slack && m <= hi + slack);
            }
        }
    }

    #[test]
    fn weights_are_a_convex_combination(n in 1usize..40) {
        let p = cmahpo::CmaParams::new(n).unwrap();
        let sum: f64 = p.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(p.weights.iter().all(|&w| w > 0.0));
        prop_assert!(p.c_1 + p.c_mu <= 1.0);
    }
}
