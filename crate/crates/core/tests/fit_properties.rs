mod common;

use chartensor::crossval::{cross_validate, CvPlan};
use chartensor::density::{evaluate, Space};
use chartensor::factorization::{
    estimate_groups, fit, initial_model, variable_groups, AdmmOptions, CoupledProblem, FitOptions, Support,
};
use chartensor::{sample, CpdModel, ScalingRecord, TripleCf};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn planted_problem(n_vars: usize, rows: usize, seed: u64) -> (Planted, Vec<TripleCf>) {
    let planted = Planted::two_component(n_vars);
    let data = planted.sample(rows, seed);
    let opts = FitOptions::new(2, planted.k_max);
    let groups = variable_groups(n_vars, &opts).unwrap();
    let (triples, dropped) = estimate_groups(&data, &groups, planted.k_max, 30).unwrap();
    assert!(dropped.is_empty());
    (planted, triples)
}

#[test]
fn constraints_hold_after_every_block_update() {
    let (_, triples) = planted_problem(4, 4000, 1);
    let problem = CoupledProblem::new(triples).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut model = initial_model(4, 3, 3, ScalingRecord::identity(4), &mut rng).unwrap();
    let admm = AdmmOptions::default();
    for _ in 0..15 {
        for n in 0..4 {
            let mut factors = model.factors().to_vec();
            factors[n] = problem.factor_update(n, &model, admm.ridge).unwrap();
            // `CpdModel::new` re-validates the simplex and zero-frequency constraints.
            model = CpdModel::new(3, model.lambda().to_vec(), factors, model.scaling().clone()).unwrap();
        }
        let lambda = problem.lambda_update(&model, &admm).unwrap();
        model = CpdModel::new(3, lambda, model.factors().to_vec(), model.scaling().clone()).unwrap();
    }
}

#[test]
fn factor_updates_are_exact_block_minimizers() {
    let (planted, triples) = planted_problem(5, 5000, 3);
    let problem = CoupledProblem::new(triples).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = initial_model(5, 2, planted.k_max, ScalingRecord::identity(5), &mut rng).unwrap();
    for n in 0..5 {
        let once = problem.factor_update(n, &model, 1e-10).unwrap();
        let mut factors = model.factors().to_vec();
        factors[n] = once;
        let m1 = CpdModel::new(planted.k_max, model.lambda().to_vec(), factors.clone(), ScalingRecord::identity(5)).unwrap();
        factors[n] = problem.factor_update(n, &m1, 1e-10).unwrap();
        let m2 = CpdModel::new(planted.k_max, model.lambda().to_vec(), factors, ScalingRecord::identity(5)).unwrap();
        let (o1, o2) = (problem.objective(&m1).unwrap(), problem.objective(&m2).unwrap());
        assert!((o1 - o2).abs() <= 1e-10 * o1, "variable {n}: {o1} then {o2}");
    }
}

#[test]
fn planted_fit_reaches_the_noise_floor() {
    let planted = Planted::two_component(5);
    let data = planted.sample(50_000, 5);
    let opts = FitOptions {
        support: Support::Unit,
        ..FitOptions::new(2, 3)
    };
    let (_, report) = fit(&data, &opts).unwrap();
    let groups = variable_groups(5, &opts).unwrap();
    let (triples, _) = estimate_groups(&data, &groups, 3, 30).unwrap();
    let truth = CoupledProblem::new(triples).unwrap().objective(&planted.model()).unwrap();
    assert!(report.final_objective() <= 10.0 * truth);
    assert!(report.final_objective() <= report.trajectory[0]);
    assert!(report.trajectory.iter().all(|o| o.is_finite()));
}

#[test]
fn seeded_fits_are_deterministic() {
    let data = Planted::two_component(4).sample(3000, 6);
    let opts = FitOptions::new(3, 3);
    let (a, ra) = fit(&data, &opts).unwrap();
    let (b, rb) = fit(&data, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.trajectory, rb.trajectory);
}

#[test]
fn converged_synthetic_fit_has_real_density() {
    let data = Planted::two_component(4).sample(10_000, 7);
    let (model, report) = fit(&data, &FitOptions::new(2, 3)).unwrap();
    assert!(report.converged);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let probes: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..4).map(|_| rand::Rng::random::<f64>(&mut rng)).collect())
        .collect();
    let evals: Vec<_> = probes
        .iter()
        .map(|x| evaluate(&model, x, Space::Normalized).unwrap().signed)
        .collect();
    let max_density = evals.iter().map(|z| z.re).fold(0.0, f64::max);
    let max_imag = evals.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    assert!(max_imag <= 1e-6 * max_density, "{max_imag} vs {max_density}");
}

#[test]
fn sampled_marginals_match_model_marginals() {
    let planted = Planted::two_component(4);
    let data = planted.sample(20_000, 9);
    let opts = FitOptions {
        support: Support::Unit,
        ..FitOptions::new(2, 3)
    };
    let (model, _) = fit(&data, &opts).unwrap();
    let draws = sample(&model, 100_000, 10).unwrap();
    let bins = 32;
    for n in 0..4 {
        let marginal = model.marginal(&[n]).unwrap();
        // Expected bin masses from the clamped marginal density.
        let per_bin = 64;
        let mass: Vec<f64> = (0..bins)
            .map(|b| {
                (0..per_bin)
                    .map(|i| {
                        let x = (b as f64 + (i as f64 + 0.5) / per_bin as f64) / bins as f64;
                        evaluate(&marginal, &[x], Space::Normalized).unwrap().density
                    })
                    .sum::<f64>()
            })
            .collect();
        let total: f64 = mass.iter().sum();
        let mut counts = vec![0usize; bins];
        for x in draws.column(n) {
            counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&mass)
            .map(|(&c, &m)| {
                let e = m / total * draws.n_rows() as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 1% critical value of chi-squared with 31 degrees of freedom.
        assert!(chi2 < 52.19, "variable {n}: chi2 {chi2}");
    }
}

#[test]
fn sample_then_refit_recovers_weights() {
    let planted = Planted::two_component(5);
    let draws = sample(&planted.model(), 50_000, 11).unwrap();
    let opts = FitOptions {
        support: Support::Unit,
        ..FitOptions::new(2, 3)
    };
    let (model, _) = fit(&draws, &opts).unwrap();
    let r = recovery(&model, &planted.model());
    assert!(r.lambda_tv <= 0.05, "{r:?}");
}

#[test]
fn cross_validation_selects_the_planted_cutoff() {
    let planted = Planted::two_component(4);
    let data = planted.sample(50_000, 12);
    let base = FitOptions {
        support: Support::Unit,
        ..FitOptions::new(2, 3)
    };
    let plan = CvPlan {
        seed: 13,
        ..CvPlan::new(CvPlan::parse_grid("F=2;K=1,3,7").unwrap())
    };
    let outcome = cross_validate(&data, &plan, &base).unwrap();
    assert_eq!(outcome.cells.len(), 3);
    assert_eq!(outcome.selected, (2, 3), "{:?}", outcome.cells);
}

#[test]
fn single_cell_cross_validation_matches_training() {
    let data = Planted::two_component(3).sample(2000, 14);
    let base = FitOptions::new(2, 2);
    let outcome = cross_validate(&data, &CvPlan::new(vec![(2, 2)]), &base).unwrap();
    let (model, _) = fit(&data, &base).unwrap();
    assert_eq!(outcome.model, model);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn component_relabeling_is_a_gauge(perm_seed in 0u64..1000, x in proptest::collection::vec(0.0f64..1.0, 4)) {
        let (_, triples) = planted_problem(4, 1500, 15);
        let problem = CoupledProblem::new(triples).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        let model = initial_model(4, 3, 3, ScalingRecord::identity(4), &mut rng).unwrap();
        let perms = permutations(3);
        let perm = &perms[(perm_seed % perms.len() as u64) as usize];
        let relabeled = model.permute_components(perm).unwrap();
        let (a, b) = (problem.objective(&model).unwrap(), problem.objective(&relabeled).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a);
        let (e1, e2) = (model.entry(&[1, -2, 0, 3]).unwrap(), relabeled.entry(&[1, -2, 0, 3]).unwrap());
        prop_assert!((e1 - e2).norm() <= 1e-14);
        let (d1, d2) = (
            evaluate(&model, &x, Space::Normalized).unwrap().signed,
            evaluate(&relabeled, &x, Space::Normalized).unwrap().signed,
        );
        prop_assert!((d1 - d2).norm() <= 1e-12);
    }
}
