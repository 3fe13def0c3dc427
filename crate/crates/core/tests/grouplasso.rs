mod common;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use common::{orthonormal_columns, prox_group_lasso, random_group_problem};
use sdami::basis::{BasisExpansion, BasisSpec, GroupId};
use sdami::dataget::simulate_case;
use sdami::grouplasso::{
    kkt_residual, select_lambda2_cv, solve, GroupLassoConfig, GroupLassoProblem,
};
use sdami::util::rng_from_seed;

#[test]
fn toy_problem_matches_proximal_gradient_per_coordinate() {
    let p = random_group_problem(50, &[2, 2, 2], 11);
    let lam = 0.2 * p.lambda_max();
    let bcd = solve(&p, lam, 1e-12, 10_000).unwrap();
    let oracle = prox_group_lasso(&p, lam, 20_000);
    for (g, theta) in &oracle {
        let ours = &bcd.coefficients[g];
        for (a, b) in ours.iter().zip(theta) {
            assert!((a - b).abs() <= 1e-6, "{g}: {a} vs {b}");
        }
    }
}

#[test]
fn zero_penalty_on_orthonormal_disjoint_groups_is_least_squares() {
    let n = 60;
    let q = orthonormal_columns(n, 6, 3);
    let mut blocks = BTreeMap::new();
    for g in 0..3 {
        blocks.insert(
            GroupId::Main(g),
            q.slice(ndarray::s![.., 2 * g..2 * g + 2]).to_owned(),
        );
    }
    let e = BasisExpansion::from_matrices(blocks).unwrap();
    let mut rng = rng_from_seed(4);
    let y = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    let p = GroupLassoProblem::new(e, &y).unwrap();
    let part = solve(&p, 0.0, 1e-12, 1000).unwrap();
    for (g, b) in &p.expansion.blocks {
        let ls = b.matrix.t().dot(&p.y) / n as f64;
        let d = &part.coefficients[g] - &ls;
        assert!(d.iter().all(|v| v.abs() <= 1e-10));
    }
}

#[test]
fn lambda_max_gives_exact_zero() {
    let p = random_group_problem(80, &[3, 2, 1, 3], 5);
    let lmax = p.lambda_max();
    let part = solve(&p, lmax, 1e-10, 1000).unwrap();
    assert!(part.is_empty());
    assert!(part
        .coefficients
        .values()
        .all(|t| t.iter().all(|v| *v == 0.0)));
    assert!(kkt_residual(&p, &part) <= 1e-10);
    // The same bound computed directly from the definition.
    let direct = p
        .expansion
        .blocks
        .iter()
        .map(|(g, b)| common::norm2(&(b.matrix.t().dot(&p.y) / 80.0)) / p.weights[g])
        .fold(0.0, f64::max);
    assert!((direct - lmax).abs() <= 1e-12 * lmax);
    assert!(!solve(&p, 0.99 * lmax, 1e-10, 1000).unwrap().is_empty());
}

#[test]
fn perturbed_solution_violates_kkt() {
    let p = random_group_problem(50, &[2, 3, 2], 6);
    let lam = 0.3 * p.lambda_max();
    let mut part = solve(&p, lam, 1e-10, 5000).unwrap();
    assert!(kkt_residual(&p, &part) <= 1e-8);
    let g = *part.coefficients.keys().next().unwrap();
    part.coefficients.get_mut(&g).unwrap()[0] += 0.1;
    assert!(kkt_residual(&p, &part) > 1e-8);
}

#[test]
fn objective_is_monotone_over_sweeps() {
    for seed in 0..10 {
        let p = random_group_problem(60, &[3, 3, 2, 1, 2, 3], seed);
        let part = solve(&p, 0.1 * p.lambda_max(), 1e-10, 2000).unwrap();
        for w in part.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }
}

#[test]
fn pure_interaction_enters_without_its_mains() {
    let mut rng = rng_from_seed(7);
    let n = 300;
    let x = Array2::<f64>::from_shape_fn((n, 2), |_| rng.random_range(-2.5..2.5));
    let y = Array1::from_shape_fn(n, |i| {
        x[[i, 0]] * x[[i, 1]] + 0.1 * rng.sample::<f64, _>(StandardNormal)
    });
    let screened = BTreeSet::from([0, 1]);
    let p = GroupLassoProblem::from_data(x.view(), &y, &screened, &BasisSpec::default()).unwrap();
    let part = solve(&p, 0.5 * p.lambda_max(), 1e-10, 1000).unwrap();
    assert_eq!(part.interaction_groups, vec![(0, 1)]);
    assert!(part.main_set.is_empty());
}

#[test]
fn cross_validation_is_reproducible() {
    let d = simulate_case(3, 150, 8, 0.5, 21).unwrap();
    let screened = BTreeSet::from([0, 1, 2, 3, 4]);
    let cfg = GroupLassoConfig::default();
    let p =
        GroupLassoProblem::from_data(d.x.view(), &d.y, &screened, &BasisSpec::default()).unwrap();
    let path = p.default_path(&cfg);
    let (a, ta) = select_lambda2_cv(&p, 5, &path, 99, &cfg).unwrap();
    let (b, tb) = select_lambda2_cv(&p, 5, &path, 99, &cfg).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(a, b);
    assert!(ta.selected <= ta.min_index);
    let limit = ta.rows[ta.min_index].mean_cv_err + ta.rows[ta.min_index].se_cv_err;
    assert!(ta.rows[ta.selected].mean_cv_err <= limit);
}

#[test]
fn pure_noise_gives_empty_partition() {
    let cfg = GroupLassoConfig::default();
    let empty = (0..20)
        .filter(|&seed| {
            let mut rng = rng_from_seed(300 + seed);
            let x = Array2::<f64>::from_shape_fn((150, 4), |_| rng.random_range(-2.5..2.5));
            let y = Array1::from_shape_fn(150, |_| rng.sample::<f64, _>(StandardNormal));
            let screened = BTreeSet::from([0, 1, 2, 3]);
            let p = GroupLassoProblem::from_data(x.view(), &y, &screened, &BasisSpec::default())
                .unwrap();
            let path = p.default_path(&cfg);
            let (part, _) = select_lambda2_cv(&p, 5, &path, seed, &cfg).unwrap();
            part.is_empty()
        })
        .count();
    assert!(empty >= 18, "empty partition in {empty}/20 runs");
}

#[test]
fn case5_pair_is_recovered_from_its_screened_set() {
    let cfg = GroupLassoConfig::default();
    let hits = (0..20)
        .filter(|&seed| {
            let d = simulate_case(5, 300, 10, 0.5, 700 + seed).unwrap();
            let screened = BTreeSet::from([0, 1, 2]);
            let p =
                GroupLassoProblem::from_data(d.x.view(), &d.y, &screened, &BasisSpec::default())
                    .unwrap();
            let path = p.default_path(&cfg);
            let (part, _) = select_lambda2_cv(&p, 5, &path, seed, &cfg).unwrap();
            part.interaction_groups.contains(&(1, 2))
        })
        .count();
    assert!(hits > 10, "pair (x2, x3) recovered in {hits}/20 runs");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn block_descent_agrees_with_oracle(
        dims in prop::collection::vec(1usize..=3, 1..=6),
        frac in 0.02f64..0.9,
        seed in any::<u64>(),
    ) {
        let p = random_group_problem(50, &dims, seed);
        let lam = frac * p.lambda_max();
        let part = solve(&p, lam, 1e-10, 10_000).unwrap();
        let oracle = prox_group_lasso(&p, lam, 20_000);
        prop_assert!(part.converged);
        prop_assert!(kkt_residual(&p, &part) <= 1e-6);
        let ours = p.objective(&part.coefficients, lam);
        let theirs = p.objective(&oracle, lam);
        prop_assert!((ours - theirs).abs() <= 1e-6, "{} vs {}", ours, theirs);
        let active: BTreeSet<GroupId> = part.active_groups().into_iter().collect();
        for (g, t) in &part.coefficients {
            prop_assert_eq!(active.contains(g), t.iter().any(|v| *v != 0.0));
        }
    }
}
