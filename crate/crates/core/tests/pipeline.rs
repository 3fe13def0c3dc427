use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use sdami::basis::GroupId;
use sdami::dataget::{f1, simulate_case, Dataset};
use sdami::net::{Mlp, OptimizerConfig};
use sdami::pipeline::{fit, screen_and_partition, Grid, PipelineConfig, SdamiModel};
use sdami::util::rng_from_seed;
use sdami::SdamiError;

fn quick_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.net.hidden_layers = vec![8, 6];
    c.net.optimizer = OptimizerConfig {
        epochs: 200,
        ..OptimizerConfig::default()
    };
    c
}

fn noise_data(n: usize, k: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let x = Array2::from_shape_fn((n, k), |_| rng.random_range(-2.5..2.5));
    let y = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    Dataset::new(x, y).unwrap()
}

#[test]
fn pure_noise_gives_an_intercept_only_model() {
    let config = quick_config();
    let empty = (0..20)
        .filter(|&seed| {
            let (model, _) = fit(&noise_data(150, 10, 800 + seed), &config, seed).unwrap();
            model.is_intercept_only()
        })
        .count();
    assert!(empty >= 18, "intercept-only in {empty}/20 runs");
}

#[test]
fn intercept_only_model_predicts_a_constant() {
    let d = noise_data(100, 5, 1);
    let mut model = fit(
        &simulate_case(1, 100, 5, 0.5, 2).unwrap(),
        &quick_config(),
        3,
    )
    .unwrap()
    .0;
    model.components.clear();
    model.intercept = 1.25;
    assert!(model
        .predict(d.x.view())
        .unwrap()
        .iter()
        .all(|v| *v == 1.25));
}

#[test]
fn models_round_trip_through_json() {
    let d = simulate_case(3, 120, 8, 0.5, 4).unwrap();
    let (model, _) = fit(&d, &quick_config(), 5).unwrap();
    assert!(!model.is_intercept_only());
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    model.save(&a).unwrap();
    let back = SdamiModel::load(&a).unwrap();
    back.save(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(back, model);
    let (p, q) = (
        model.predict(d.x.view()).unwrap(),
        back.predict(d.x.view()).unwrap(),
    );
    assert!(p.iter().zip(&q).all(|(u, v)| u.to_bits() == v.to_bits()));

    let text = std::fs::read_to_string(&a).unwrap();
    let cut = &text[..text.len() / 2];
    assert!(matches!(
        SdamiModel::from_json(cut),
        Err(SdamiError::CorruptModel(_))
    ));
    let bumped = text.replacen("\"version\": 1", "\"version\": 99", 1);
    assert_ne!(bumped, text);
    assert!(matches!(
        SdamiModel::from_json(&bumped),
        Err(SdamiError::Version { found: 99, .. })
    ));
}

#[test]
fn prediction_needs_the_referenced_columns() {
    let d = simulate_case(1, 100, 6, 0.5, 6).unwrap();
    let (model, _) = fit(&d, &quick_config(), 7).unwrap();
    let max = *model.selected_variables().iter().next_back().unwrap();
    let narrow = d.x.slice(ndarray::s![.., ..max]).to_owned();
    assert!(matches!(
        model.predict(narrow.view()),
        Err(SdamiError::DimensionMismatch(_))
    ));
}

#[test]
fn stages_only_narrow_the_variable_set() {
    for seed in 0..4 {
        let d = simulate_case(3 + seed as u32, 150, 20, 0.5, 10 + seed).unwrap();
        let sel = screen_and_partition(&d, &quick_config(), seed).unwrap();
        let screened = sel.screened().clone();
        assert!(sel.partition.selected_variables().is_subset(&screened));
        for &(a, b) in &sel.partition.interaction_groups {
            assert!(a < b && screened.contains(&a) && screened.contains(&b));
        }
        let (model, report) = fit(&d, &quick_config(), seed).unwrap();
        let groups: BTreeSet<GroupId> = sel.partition.active_groups().into_iter().collect();
        assert!(model.components.keys().all(|g| groups.contains(g)));
        assert_eq!(
            report.screened,
            screened.iter().copied().collect::<Vec<_>>()
        );
    }
}

#[test]
fn training_beats_the_intercept_only_predictor() {
    for seed in 0..3 {
        let d = simulate_case(4, 150, 10, 0.5, 20 + seed).unwrap();
        let (model, report) = fit(&d, &quick_config(), seed).unwrap();
        let yc = d.y.mapv(|v| v - d.y.mean().unwrap());
        let null = yc.dot(&yc) / d.n() as f64;
        assert!(report.train_mse <= null);
        let r = model.predict(d.x.view()).unwrap() - &d.y;
        assert!((r.dot(&r) / d.n() as f64 - report.train_mse).abs() <= 1e-12);
    }
}

#[test]
fn component_curves() {
    let d = simulate_case(1, 100, 6, 0.5, 30).unwrap();
    let (mut model, _) = fit(&d, &quick_config(), 31).unwrap();
    let g = *model.components.keys().next().unwrap();
    let one = model.component_curve(g, &Grid::Line(vec![0.3])).unwrap();
    assert_eq!(one.values, vec![0.0]);
    assert!(model
        .component_curve(GroupId::Main(5_000), &Grid::Line(vec![0.0]))
        .is_err());
    // A zero first layer gives a flat curve.
    let sub = model.components.get_mut(&g).unwrap();
    let dims = sub.net.layer_dims.clone();
    let mut flat = Mlp::init(&dims, 1).unwrap();
    flat.clamp_first_layer(0.0);
    sub.net = flat;
    let curve = model
        .component_curve(g, &Grid::Line(Grid::linspace(-2.5, 2.5, 11)))
        .unwrap();
    assert!(curve.values.iter().all(|v| v.abs() <= 1e-15));
}

#[test]
fn case1_recovers_the_main_effects() {
    let truth: BTreeSet<usize> = (0..4).collect();
    for seed in 0..3 {
        let d = simulate_case(1, 150, 150, 0.5, 40 + seed).unwrap();
        let sel = screen_and_partition(&d, &PipelineConfig::default(), 41 + seed).unwrap();
        let p = &sel.partition;
        assert!(truth.is_subset(&p.main_set), "{:?}", p.main_set);
        // Cross-validation may admit small extra groups; the true mains dominate them.
        let weakest_true = truth
            .iter()
            .map(|&j| p.component_norms[&GroupId::Main(j)])
            .fold(f64::MAX, f64::min);
        for g in p.active_groups() {
            if !matches!(g, GroupId::Main(j) if truth.contains(&j)) {
                assert!(
                    p.component_norms[&g] < 0.25 * weakest_true,
                    "{g}: {}",
                    p.component_norms[&g]
                );
            }
        }
    }
}

/// Centered rms distance between `values` and `f1` on `grid`.
fn rms_to_f1(grid: &[f64], values: &[f64]) -> f64 {
    let t: Vec<f64> = grid.iter().map(|&x| f1(x)).collect();
    let (tm, vm) = (
        t.iter().sum::<f64>() / t.len() as f64,
        values.iter().sum::<f64>() / values.len() as f64,
    );
    let ss: f64 = values
        .iter()
        .zip(&t)
        .map(|(v, t)| (v - vm - (t - tm)).powi(2))
        .sum();
    (ss / grid.len() as f64).sqrt()
}

/// Fitted dependence on `x1` with the other columns averaged over the training rows.
fn partial_dependence(model: &SdamiModel, x: &Array2<f64>, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&v| {
            let mut z = x.clone();
            z.column_mut(0).fill(v);
            model.predict(z.view()).unwrap().mean().unwrap()
        })
        .collect()
}

#[test]
fn case3_first_component_tracks_the_truth() {
    let grid = Grid::linspace(-2.5, 2.5, 101);
    let mut net_errs = Vec::new();
    for seed in 0..5 {
        let d = simulate_case(3, 300, 150, 0.5, 50 + seed).unwrap();
        let (model, _) = fit(&d, &PipelineConfig::default(), 51 + seed).unwrap();
        let curve = model
            .component_curve(GroupId::Main(0), &Grid::Line(grid.clone()))
            .unwrap();
        net_errs.push(rms_to_f1(&grid, &curve.values));
        let pd = rms_to_f1(&grid, &partial_dependence(&model, &d.x, &grid));
        assert!(pd <= 0.25, "seed {seed}: partial dependence rms {pd}");
    }
    // Pairs containing x1 can take over part of f1, so the main network alone is checked on most runs only.
    let good = net_errs.iter().filter(|e| **e <= 0.25).count();
    eprintln!("main-network rms discrepancies {net_errs:?}");
    assert!(good >= 2, "{net_errs:?}");
}

#[test]
fn case3_pair_is_found_in_most_runs() {
    let config = PipelineConfig::default();
    let hits = (0..20)
        .filter(|&seed| {
            let d = simulate_case(3, 300, 150, 0.5, 900 + seed).unwrap();
            let sel = screen_and_partition(&d, &config, seed).unwrap();
            sel.partition.interaction_groups.contains(&(3, 4))
        })
        .count();
    assert!(hits > 10, "pair (x4, x5) found in {hits}/20 runs");
}
