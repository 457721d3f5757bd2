//! Cross-module invariants, mostly property-based: counting monotonicity,
//! projection excess equality, witness nonnegativity and verification, and
//! oracle dominance.

use proptest::prelude::*;

use stardisc::{
    build_witness, exact_star_discrepancy, generate_uniform, one_dim_star_discrepancy,
    verify_trace, AnchoredBox, DecisionRule, PointSet, DEFAULT_BUDGET,
};

fn small_box(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, dim)
}

proptest! {
    #[test]
    fn counting_is_monotone_in_the_box(seed in any::<u64>(), upper in small_box(3)) {
        let p = generate_uniform(40, 3, seed).unwrap();
        let lo = AnchoredBox::new(upper.clone()).unwrap();
        let grown: Vec<f64> = upper.iter().map(|c| (c + 0.1).min(1.0)).collect();
        let hi = AnchoredBox::new(grown).unwrap();
        prop_assert!(p.count_closed(&hi).unwrap() >= p.count_closed(&lo).unwrap());
    }

    #[test]
    fn open_count_never_exceeds_closed(seed in any::<u64>(), upper in small_box(2)) {
        let p = generate_uniform(30, 2, seed).unwrap();
        let bx = AnchoredBox::new(upper).unwrap();
        prop_assert!(p.count_open(&bx).unwrap() <= p.count_closed(&bx).unwrap());
    }

    #[test]
    fn full_cube_excess_is_exactly_zero(seed in any::<u64>(), n in 1usize..64, s in 1usize..6) {
        let p = generate_uniform(n, s, seed).unwrap();
        prop_assert_eq!(p.excess(&AnchoredBox::full(s)).unwrap(), 0.0);
    }

    #[test]
    fn projection_preserves_embedded_excess(seed in any::<u64>(), upper in small_box(2)) {
        let p = generate_uniform(48, 4, seed).unwrap();
        let q = p.project(2).unwrap();
        let small = AnchoredBox::new(upper.clone()).unwrap();
        let mut embedded = upper;
        embedded.extend_from_slice(&[1.0, 1.0]);
        let big = AnchoredBox::new(embedded).unwrap();
        let diff = q.excess(&small).unwrap() - p.excess(&big).unwrap();
        prop_assert!(diff.abs() < 1e-9);
    }

    #[test]
    fn generation_is_a_pure_function_of_its_arguments(seed in any::<u64>()) {
        prop_assert_eq!(
            generate_uniform(16, 3, seed).unwrap(),
            generate_uniform(16, 3, seed).unwrap()
        );
    }

    #[test]
    fn witness_box_volume_stays_above_a_quarter(seed in any::<u64>()) {
        let p = generate_uniform(128, 6, seed).unwrap();
        let w = build_witness(&p, DecisionRule::Threshold).unwrap();
        prop_assert!(w.witness_box.volume() >= 0.25);
        prop_assert!(w.excess >= 0.0);
    }

    #[test]
    fn witness_never_beats_the_exact_oracle(seed in any::<u64>(), n in 4usize..32, s in 1usize..4) {
        let p = generate_uniform(n, s, seed).unwrap();
        let w = build_witness(&p, DecisionRule::Threshold).unwrap();
        let d = exact_star_discrepancy(&p, DEFAULT_BUDGET).unwrap().d_star;
        prop_assert!(w.excess / n as f64 <= d + 1e-9);
    }

    #[test]
    fn binomial_cdf_is_monotone_and_normalized(n in 1u64..200, p in 0.0..=1.0f64) {
        let mut prev = 0.0;
        for k in 0..=n {
            let c = stardisc::binomial::cdf(n, p, k).unwrap();
            prop_assert!(c + 1e-12 >= prev);
            prev = c;
        }
        prop_assert!((prev - 1.0).abs() < 1e-12);
    }
}

#[test]
fn threshold_witness_verifies_on_a_hundred_random_instances() {
    for seed in 0..100u64 {
        let p = generate_uniform(256, 8, seed).unwrap();
        let w = build_witness(&p, DecisionRule::Threshold).unwrap();
        assert!(verify_trace(&p, &w).unwrap(), "seed {seed}");
    }
}

#[test]
fn greedy_witness_verifies_and_stays_monotone() {
    for seed in 0..50u64 {
        let p = generate_uniform(256, 8, seed).unwrap();
        let w = build_witness(&p, DecisionRule::Greedy).unwrap();
        assert!(verify_trace(&p, &w).unwrap(), "seed {seed}");
        assert!(w.excess >= 0.0);
    }
}

#[test]
fn one_dim_oracles_agree_on_a_thousand_random_sets() {
    for seed in 0..1000u64 {
        let n = 1 + (seed as usize * 7) % 64;
        let p = generate_uniform(n, 1, seed).unwrap();
        let grid = exact_star_discrepancy(&p, DEFAULT_BUDGET).unwrap().d_star;
        let formula = one_dim_star_discrepancy(&p).unwrap();
        assert!(
            (grid - formula).abs() < 1e-12,
            "seed {seed}, n {n}: grid {grid} vs formula {formula}"
        );
    }
}

#[test]
fn csv_round_trip_preserves_every_bit() {
    for seed in [1u64, 99, 31337] {
        let p = generate_uniform(23, 4, seed).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = PointSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(
            p.points()
                .flatten()
                .map(|c| c.to_bits())
                .collect::<Vec<_>>(),
            q.points()
                .flatten()
                .map(|c| c.to_bits())
                .collect::<Vec<_>>()
        );
    }
}
