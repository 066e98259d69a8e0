use homlab::ergodic::{
    aligned_partition, check_covariance, check_subadditivity, competitor_bracket, mu_eval,
    mu_upper_bound, SubadditiveProcessSpec,
};
use homlab::surface_cell::{brute_force_min_units, random_instance, solve_min_cut};
use homlab::volume_cell::{assemble_volume_problem, solve_volume_cell};
use homlab::{
    estimate_ghom, sample_medium, CutOptions, GeneratorKind, Neighborhood, Rational,
    RationalDirection, SurfaceFamily, VolumeIntegrand,
};
use ndarray::arr2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn neighborhood(n8: bool) -> Neighborhood {
    if n8 {
        Neighborhood::n8()
    } else {
        Neighborhood::N4
    }
}

fn direction(tilted: bool) -> RationalDirection {
    if tilted {
        RationalDirection::new(vec![3, 4], 5).unwrap()
    } else {
        RationalDirection::axis(2, 1)
    }
}

fn spec(alpha: f64, beta: f64, tilted: bool, seed: u64) -> SubadditiveProcessSpec {
    SubadditiveProcessSpec::new(
        vec![1.0],
        &direction(tilted),
        SurfaceFamily::Perimeter,
        GeneratorKind::iid_cells(alpha, beta, 0.5),
        seed,
        CutOptions::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_cut_matches_enumeration(seed in any::<u64>(), n8 in any::<bool>(), ints in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_instance(&mut rng, neighborhood(n8), ints).unwrap();
        prop_assert_eq!(solve_min_cut(&g).units, brute_force_min_units(&g).unwrap());
    }

    #[test]
    fn raising_weights_never_lowers_the_cut(seed in any::<u64>(), n8 in any::<bool>(), bump in 1i64..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_instance(&mut rng, neighborhood(n8), true).unwrap();
        let before = solve_min_cut(&g).units;
        let mut heavier = g.clone();
        for (i, e) in heavier.edges.iter_mut().enumerate() {
            if (seed >> (i % 64)) & 1 == 1 {
                e.units += bump * g.unit as i64;
            }
        }
        prop_assert!(solve_min_cut(&heavier).units >= before);
    }

    #[test]
    fn covariance_is_exact(seed in 0u64..10_000, tilted in any::<bool>(), z in -6i64..=6, part in any::<u64>()) {
        let s = spec(1.0, 3.0, tilted, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(part);
        let (interval, _) = aligned_partition(&mut rng, s.frame.scale(), 2, 2, 8);
        let report = check_covariance(&s, seed, &interval, z).unwrap();
        prop_assert!(report.pass, "{}", report);
    }

    #[test]
    fn mu_is_subadditive_and_bounded(seed in 0u64..10_000, tilted in any::<bool>(), pieces in 2usize..=3, part in any::<u64>()) {
        let s = spec(1.0, 3.0, tilted, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(part);
        let (interval, cuts) = aligned_partition(&mut rng, s.frame.scale(), pieces, 2, 8);
        let report = check_subadditivity(&s, seed, &interval, &cuts).unwrap();
        prop_assert!(report.pass && report.slack >= 0.0, "{}", report);
        let mu = mu_eval(&s, seed, &interval).unwrap();
        prop_assert!(mu >= 0.0 && mu <= mu_upper_bound(&s, &interval).unwrap());
    }

    #[test]
    fn cell_value_lies_in_competitor_bracket(seed in 0u64..10_000, tilted in any::<bool>(), t in 6u32..=16) {
        let s = spec(1.0, 3.0, tilted, seed);
        let v = estimate_ghom(&s, &[t], 1).unwrap().normalized[0][0];
        let (lo, hi) = competitor_bracket(&s, seed, t).unwrap();
        prop_assert!(lo <= v && v <= hi, "{} {} {}", lo, v, hi);
        if !tilted {
            prop_assert!(v >= 1.0);
        }
    }

    #[test]
    fn reflected_query_is_bit_identical(seed in 0u64..10_000, tilted in any::<bool>()) {
        let s = spec(1.0, 3.0, tilted, seed);
        let a = estimate_ghom(&s, &[8], 2).unwrap();
        let b = estimate_ghom(&s.reflected().unwrap(), &[8], 2).unwrap();
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn shifts_compose(seed in any::<u64>(), a in prop::array::uniform2(-50i64..50), b in prop::array::uniform2(-50i64..50), z in prop::array::uniform2(-20i64..20)) {
        let f = sample_medium(GeneratorKind::iid_cells(1.0, 3.0, 0.5), seed).unwrap();
        let ab = [a[0] + b[0], a[1] + b[1]];
        prop_assert_eq!(
            f.shift(&a).shift(&b).coefficient_at(&z).unwrap(),
            f.shift(&ab).coefficient_at(&z).unwrap()
        );
    }

    #[test]
    fn direction_display_round_trips(a in -9i64..=9, b in -9i64..=9) {
        prop_assume!(a != 0 || b != 0);
        // Pythagorean scaling keeps the direction rational.
        let (n, d) = (vec![a * a - b * b, 2 * a * b], a * a + b * b);
        let nu = RationalDirection::new(n, d).unwrap();
        prop_assert_eq!(nu.to_string().parse::<RationalDirection>().unwrap(), nu.clone());
        prop_assert_eq!(nu.negated().negated(), nu);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn volume_value_within_growth_bounds(seed in 0u64..1_000, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        prop_assume!(x.abs() + y.abs() > 0.1);
        let field = sample_medium(GeneratorKind::iid_cells(1.0, 4.0, 0.5), seed).unwrap();
        let f = VolumeIntegrand::new(field, 2.0).unwrap();
        let xi = arr2(&[[x, y]]);
        let zero = Rational::from_integer(0);
        let pb = assemble_volume_problem(&f, xi.view(), &[zero, zero], Rational::from_integer(4), Rational::new(1, 2)).unwrap();
        let affine = pb.energy();
        let res = solve_volume_cell(&pb, 1e-10, 10_000).unwrap();
        let n2 = x * x + y * y;
        prop_assert!(res.value <= affine + 1e-9 * affine.abs().max(1.0));
        prop_assert!(res.normalized >= n2 * (1.0 - 1e-9) && res.normalized <= 4.0 * n2 * (1.0 + 1e-9));
    }
}
