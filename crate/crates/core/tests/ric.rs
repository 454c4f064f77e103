mod common;

use approx::assert_abs_diff_eq;
use omprip::ensemble::{column_normalized, gaussian, random_sparse, rng_for, signal_on};
use omprip::numerics::dot;
use omprip::ric::{
    coordinate_correlation_bound_check, ric_profile, subset_deviation, DEFAULT_CHECK_TOL,
};
use omprip::{
    build_instance, evaluate_conditions, exact_ric, lemma1_forward_check, lemma2_check,
    DenseMatrix, RicError, SparseSignal,
};
use proptest::prelude::*;

fn three_columns() -> DenseMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![h, h]]).unwrap()
}

#[test]
fn three_column_example() {
    let a = three_columns();
    let rep = exact_ric(&a, 2, 100).unwrap();
    assert_abs_diff_eq!(rep.delta, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    assert_abs_diff_eq!(rep.delta, common::brute_force_ric(&a, 2), epsilon = 1e-12);
    assert_eq!(rep.witness_subset, vec![0, 2]);
    assert_eq!(rep.subsets_examined, 3);
}

#[test]
fn matches_brute_force_oracle() {
    for seed in 0..15 {
        let mut rng = rng_for(seed, 0);
        let a = gaussian(5, 8, &mut rng);
        for k in 1..=4 {
            let ours = exact_ric(&a, k, 1000).unwrap().delta;
            assert_abs_diff_eq!(ours, common::brute_force_ric(&a, k), epsilon = 1e-10);
        }
    }
}

#[test]
fn identity_has_zero_constant() {
    let rep = exact_ric(&DenseMatrix::identity(4), 2, 100).unwrap();
    assert_eq!(rep.delta, 0.0);
}

#[test]
fn budget_and_order_errors() {
    let a = DenseMatrix::identity(10);
    assert!(matches!(
        exact_ric(&a, 5, 100),
        Err(RicError::BudgetExceeded {
            count: 252,
            budget: 100
        })
    ));
    assert!(matches!(
        exact_ric(&a, 0, 100),
        Err(RicError::InvalidOrder { .. })
    ));
    assert!(matches!(
        exact_ric(&a, 11, 100),
        Err(RicError::InvalidOrder { .. })
    ));
}

#[test]
fn construction_constant_equals_t() {
    for &(k, t) in &[(2, 0.8), (3, 0.5), (4, 0.95)] {
        let inst = build_instance(k, t).unwrap();
        assert_abs_diff_eq!(
            exact_ric(&inst.a, k + 1, 100).unwrap().delta,
            t,
            epsilon = 1e-8
        );
    }
}

#[test]
fn conditions_examples() {
    let zero = evaluate_conditions(0.0, 5);
    assert!(zero.rows.iter().all(|r| r.satisfied));

    let r = evaluate_conditions(0.30, 2);
    assert!(r.rows[0].satisfied);
    assert_abs_diff_eq!(r.rows[0].threshold, 0.4142136, epsilon = 1e-7);
    assert_abs_diff_eq!(r.rows[2].threshold, 0.2357023, epsilon = 1e-7);
    assert!(!r.rows[2].satisfied);
    assert_abs_diff_eq!(r.rows[3].threshold, 0.2928932, epsilon = 1e-7);
    assert!(!r.rows[3].satisfied);

    let edge = evaluate_conditions(1.0 / 3.0, 4);
    assert!(edge.rows[0].satisfied);
    assert!(!edge.rows[1].satisfied);
    assert!(!edge.in_gap);

    let gap = evaluate_conditions(0.5, 2);
    assert!(gap.in_gap && !gap.in_failure_region);
    assert!(evaluate_conditions(0.6, 2).in_failure_region);
}

#[test]
fn disjoint_pair_identity_case() {
    let a = DenseMatrix::identity(3);
    let x = SparseSignal::new(3, vec![0], vec![1.0]).unwrap();
    let xp = SparseSignal::new(3, vec![1], vec![1.0]).unwrap();
    let c = lemma1_forward_check(&a, &x, &xp, 0.0, DEFAULT_CHECK_TOL).unwrap();
    assert_eq!(c.inner, 0.0);
    assert!(c.equality && c.implication_holds && c.bound_holds);
    assert_abs_diff_eq!(c.energy_sum, 2.0, epsilon = 1e-15);
}

#[test]
fn energy_sum_two_without_equality() {
    let t = 1.0 / 3f64.sqrt();
    let inst = build_instance(2, t).unwrap();
    let delta = exact_ric(&inst.a, 3, 100).unwrap().delta;
    let x = SparseSignal::new(3, vec![0, 1], vec![1.0, 1.0]).unwrap();
    let xp = SparseSignal::new(3, vec![2], vec![1.0]).unwrap();
    let c = lemma1_forward_check(&inst.a, &x, &xp, delta, 1e-10).unwrap();
    assert_abs_diff_eq!(c.energy_sum, 2.0, epsilon = 1e-10);
    assert_abs_diff_eq!(c.inner, 2f64.sqrt() / 3.0, epsilon = 1e-10);
    assert!(c.inner < delta);
    assert!(c.converse_counterexample);
    assert!(c.implication_holds && !c.equality);
}

#[test]
fn disjoint_pair_rejects_overlap() {
    let a = DenseMatrix::identity(3);
    let x = SparseSignal::new(3, vec![0, 1], vec![1.0, 1.0]).unwrap();
    assert!(matches!(
        lemma1_forward_check(&a, &x, &x, 0.0, 1e-9),
        Err(RicError::OverlappingSupports { index: 0 })
    ));
}

#[test]
fn subspace_bound_examples() {
    let a = DenseMatrix::identity(4);
    let x = SparseSignal::new(4, vec![1, 3], vec![3.0, -4.0]).unwrap();
    let c = lemma2_check(&a, &[1, 3], &x, 0.0, 1e-12).unwrap();
    assert_abs_diff_eq!(c.value, 5.0, epsilon = 1e-14);
    assert!(c.lower_ok && c.upper_ok);

    let inst = build_instance(2, 0.8).unwrap();
    let c = lemma2_check(&inst.a, &[0, 1, 2], &inst.x, 0.8, 1e-10).unwrap();
    assert!(c.lower_ok && c.upper_ok);
    assert!(matches!(
        lemma2_check(&inst.a, &[0], &inst.x, 0.8, 1e-10),
        Err(RicError::SupportViolation)
    ));
}

#[test]
fn subspace_bound_seeded_triples() {
    for seed in 0..100 {
        let mut rng = rng_for(seed, 5);
        let a = column_normalized(8, 10, &mut rng);
        let size = 1 + seed as usize % 3;
        let x = random_sparse(10, size, &mut rng);
        let s = x.support().to_vec();
        let delta = exact_ric(&a, size, 1000).unwrap().delta;
        if delta >= 1.0 {
            continue;
        }
        let c = lemma2_check(&a, &s, &x, delta, 1e-10).unwrap();
        assert!(c.lower_ok && c.upper_ok, "seed {seed}: {c:?}");
    }
}

#[test]
fn coordinate_bound_examples() {
    let a = DenseMatrix::identity(3);
    let x = SparseSignal::new(3, vec![0], vec![7.0]).unwrap();
    let c = coordinate_correlation_bound_check(&a, &x, 1, 0.0, 1e-12).unwrap();
    assert_eq!(c.value, 0.0);
    assert!(c.holds);

    let t = 1.0 / 3f64.sqrt();
    let inst = build_instance(2, t).unwrap();
    let c = coordinate_correlation_bound_check(&inst.a, &inst.x, 2, t, 1e-10).unwrap();
    assert_abs_diff_eq!(c.value, 2.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(c.bound, 0.8164966, epsilon = 1e-7);
    assert!(c.holds);
}

#[test]
fn coordinate_bound_seeded_triples() {
    for seed in 0..100 {
        let mut rng = rng_for(seed, 6);
        let a = column_normalized(8, 10, &mut rng);
        let x = random_sparse(10, 2, &mut rng);
        let j = (0..10).find(|j| !x.support().contains(j)).unwrap();
        let delta = exact_ric(&a, 3, 1000).unwrap().delta;
        let c = coordinate_correlation_bound_check(&a, &x, j, delta, 1e-10).unwrap();
        assert!(c.holds, "seed {seed}: {c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn monotone_and_first_order_identity(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 0);
        let a = gaussian(5, 7, &mut rng);
        let profile = ric_profile(&a, 4, 1000).unwrap();
        for w in profile.windows(2) {
            prop_assert!(w[0].delta <= w[1].delta);
        }
        let d1 = (0..7)
            .map(|j| { let c = a.column(j); (dot(&c, &c) - 1.0).abs() })
            .fold(0.0, f64::max);
        prop_assert!((profile[0].delta - d1).abs() <= 1e-12);
    }

    #[test]
    fn witness_reproduces_delta(seed in any::<u64>(), k in 1usize..5) {
        let mut rng = rng_for(seed, 0);
        let a = column_normalized(6, 9, &mut rng);
        let rep = exact_ric(&a, k, 1000).unwrap();
        let (dev, _, _) = subset_deviation(&a, &rep.witness_subset).unwrap();
        prop_assert!((dev - rep.delta).abs() <= 1e-10);
    }

    #[test]
    fn permutation_invariance(seed in any::<u64>(), perm in Just((0..8).collect::<Vec<usize>>()).prop_shuffle()) {
        let mut rng = rng_for(seed, 0);
        let a = column_normalized(6, 8, &mut rng);
        let ap = a.select_columns(&perm).unwrap();
        let r = exact_ric(&a, 3, 1000).unwrap();
        let rp = exact_ric(&ap, 3, 1000).unwrap();
        prop_assert!((r.delta - rp.delta).abs() <= 1e-12);
        let mapped: Vec<usize> = rp.witness_subset.iter().map(|&i| perm[i]).collect();
        let (dev, _, _) = subset_deviation(&a, &mapped).unwrap();
        prop_assert!((dev - r.delta).abs() <= 1e-12);
    }

    #[test]
    fn disjoint_pair_inequalities(seed in any::<u64>(), s1 in 1usize..3, s2 in 1usize..3) {
        let mut rng = rng_for(seed, 0);
        let a = column_normalized(7, 9, &mut rng);
        let mut idx: Vec<usize> = (0..9).collect();
        for i in 0..(s1 + s2) {
            let j = rng_range(&mut rng, i, 9);
            idx.swap(i, j);
        }
        let mut t1 = idx[..s1].to_vec();
        let mut t2 = idx[s1..s1 + s2].to_vec();
        t1.sort_unstable();
        t2.sort_unstable();
        let x = signal_on(9, &t1, &mut rng);
        let xp = signal_on(9, &t2, &mut rng);
        let delta = exact_ric(&a, s1 + s2, 1000).unwrap().delta;
        let c = lemma1_forward_check(&a, &x, &xp, delta, 1e-10).unwrap();
        prop_assert!(c.bound_holds);
        prop_assert!(c.implication_holds);
        prop_assert!(c.sum_bounds_hold);
    }
}

fn rng_range(rng: &mut impl rand::Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..hi)
}
