use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dataset::{generate_synthetic, Splits, SyntheticParams};
use crate::model::Variant;

fn toy(seed: u64) -> Dataset {
    let p = SyntheticParams {
        num_nodes: 60,
        num_classes: 3,
        feat_dim: 8,
        train: 15,
        val: 15,
        test: 20,
        seed,
        ..SyntheticParams::default()
    };
    generate_synthetic(&p).unwrap()
}

fn quick(epochs: usize) -> HParams {
    HParams {
        learning_rate: 0.01,
        epochs,
        patience: epochs,
        ..HParams::default()
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let ds = toy(0);
    let mut model = build_model(&ModelConfig::new(Variant::Gat, 2), &ds, 1).unwrap();
    let before = model.clone();
    let hp = HParams {
        learning_rate: 0.0,
        ..quick(10)
    };
    let res = train(&mut model, &ds, &hp).unwrap();
    assert_eq!(model.params(), before.params());
    assert_eq!(res.traces.len(), 10);
    for t in &res.traces {
        assert_eq!(t.loss, res.traces[0].loss);
        assert_eq!(t.acc_val, res.traces[0].acc_val);
    }
}

#[test]
fn high_homophily_graph_is_learned() {
    let p = SyntheticParams {
        homophily: 0.95,
        ..SyntheticParams::default().with_nodes(400)
    };
    let ds = generate_synthetic(&p).unwrap();
    let hp = quick(200);
    let summary = run_seeds(&ModelConfig::new(Variant::Gat, 2), &ds, &hp, &[0, 1, 2, 3, 4], 1).unwrap();
    for run in &summary.runs {
        let last = run.result.traces.last().unwrap();
        assert!(last.acc_train >= 0.9, "seed {}: {}", run.seed, last.acc_train);
    }
}

#[test]
fn training_is_deterministic() {
    let ds = toy(1);
    let mut cfg = ModelConfig::new(Variant::Adgat, 3);
    cfg.dropout = 0.4;
    let hp = HParams {
        diagnostics_every: 5,
        ..quick(30)
    };
    let a = train_fresh(&cfg, &ds, &hp).unwrap();
    let b = train_fresh(&cfg, &ds, &hp).unwrap();
    assert_eq!(a, b);
    let c = train_fresh(&cfg, &ds, &HParams { seed: 9, ..hp }).unwrap();
    assert_ne!(a.params_digest, c.params_digest);
    assert!(a.traces[0].smv.is_some() && a.traces[1].smv.is_none() && a.traces[5].corr.is_some());
}

#[test]
fn early_stopping_and_selection_use_validation_only() {
    let ds = toy(2);
    let hp = HParams {
        patience: 5,
        ..quick(300)
    };
    let res = train_fresh(&ModelConfig::new(Variant::Gat, 2), &ds, &hp).unwrap();
    assert!(res.traces.len() < 300);
    assert_eq!(res.traces.len(), res.best_epoch + 1 + 5);
    assert_eq!(res.test_at_best, res.traces[res.best_epoch].acc_test);
    // Selection recomputed with test columns stripped agrees.
    let vals: Vec<f64> = res.traces.iter().map(|t| t.acc_val).collect();
    assert_eq!(select_best(&vals), Some(res.best_epoch));
    let max = vals.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(vals.iter().position(|&v| v == max), Some(res.best_epoch));
    assert_eq!(select_best(&[0.5, 0.7, 0.7, 0.1]), Some(1));
}

#[test]
fn nonfinite_loss_aborts() {
    let mut ds = toy(3);
    ds.features = Matrix::filled(ds.num_nodes(), ds.feat_dim(), 1e300);
    let err = train_fresh(&ModelConfig::new(Variant::Gat, 2), &ds, &quick(5)).unwrap_err();
    assert!(matches!(err, Error::Diverged { .. }), "{err}");
}

#[test]
fn weight_decay_adds_lambda_theta() {
    let ds = toy(4);
    let model = build_model(&ModelConfig::new(Variant::Adgat, 2), &ds, 0).unwrap();
    let ctx = GraphContext::new(&model, &ds).unwrap();
    let (l0, _, g0) = loss_and_gradients(&model, &ctx, &ds, 0.0, None).unwrap();
    let (l1, _, g1) = loss_and_gradients(&model, &ctx, &ds, 0.1, None).unwrap();
    let sq: f64 = model
        .params()
        .iter()
        .map(|p| p.as_slice().iter().map(|v| v * v).sum::<f64>())
        .sum();
    assert!((l1 - l0 - 0.05 * sq).abs() < 1e-12);
    for ((a, b), p) in g0.iter().zip(&g1).zip(model.params()) {
        let expect = a.zip_map(p, |g, w| g + 0.1 * w);
        assert!(b.max_abs_diff(&expect) < 1e-12);
    }
    let rep = crate::model::grad_check_model(&model, &ds, 0.0, 1e-5, 0).unwrap();
    assert!(rep.max_rel_error < 1e-4);
}

#[test]
fn first_layer_gradient_after_one_step_matches_finite_differences() {
    let ds = toy(5);
    let hp = quick(1);
    let mut model = build_model(&ModelConfig::new(Variant::Gat, 2), &ds, hp.seed).unwrap();
    train(&mut model, &ds, &hp).unwrap();
    // A two-epoch run records, at epoch 1, the gradient after exactly one step.
    let two = train_fresh(
        &ModelConfig::new(Variant::Gat, 2),
        &ds,
        &HParams {
            epochs: 2,
            patience: 2,
            ..hp.clone()
        },
    )
    .unwrap();
    let ctx = GraphContext::new(&model, &ds).unwrap();
    let idx = model.first_attention_weight();
    let eps = 1e-6;
    let mut total = 0.0;
    let count = model.params()[idx].len();
    for k in 0..count {
        let mut plus = model.clone();
        plus.params_mut()[idx].as_mut_slice()[k] += eps;
        let mut minus = model.clone();
        minus.params_mut()[idx].as_mut_slice()[k] -= eps;
        let lp = loss_and_gradients(&plus, &ctx, &ds, hp.weight_decay, None).unwrap().0;
        let lm = loss_and_gradients(&minus, &ctx, &ds, hp.weight_decay, None).unwrap().0;
        total += ((lp - lm) / (2.0 * eps)).abs();
    }
    let fd = total / count as f64;
    assert!(
        (two.traces[1].grad_l1_mean - fd).abs() < 1e-4,
        "{} vs {fd}",
        two.traces[1].grad_l1_mean
    );
}

#[test]
fn seed_aggregation() {
    let ds = toy(6);
    let cfg = ModelConfig::new(Variant::Gat, 2);
    let hp = quick(15);
    let one = run_seeds(&cfg, &ds, &hp, &[4], 1).unwrap();
    assert_eq!(one.test_mean, one.runs[0].result.test_at_best);
    assert_eq!(one.test_std, 0.0);
    let twice = run_seeds(&cfg, &ds, &hp, &[4, 4], 2).unwrap();
    assert_eq!(twice.test_std, 0.0);
    let seeds: Vec<u64> = (0..10).collect();
    let ten = run_seeds(&cfg, &ds, &hp, &seeds, 3).unwrap();
    let mean = ten.runs.iter().map(|r| r.result.test_at_best).sum::<f64>() / 10.0;
    assert!((ten.test_mean - mean).abs() < 1e-12);
    let serial = run_seeds(&cfg, &ds, &hp, &seeds, 1).unwrap();
    assert_eq!(serial, ten);
    assert!(run_seeds(&cfg, &ds, &hp, &[], 1).is_err());
}

#[test]
fn sweep_selection() {
    let ds = toy(7);
    let cfg = ModelConfig::new(Variant::Gat, 2);
    let base = quick(10);

    let single = SweepGrid {
        learning_rate: vec![0.02],
        weight_decay: vec![0.0],
        beta: vec![],
    };
    let r = hparam_sweep(&single, &cfg, &ds, &base, &[0], 1).unwrap();
    assert_eq!((r.best.learning_rate, r.best.weight_decay), (0.02, 0.0));

    let diverging = SweepGrid {
        learning_rate: vec![0.01, 1e300],
        weight_decay: vec![0.0],
        beta: vec![],
    };
    let r = hparam_sweep(&diverging, &cfg, &ds, &base, &[0], 1).unwrap();
    assert_eq!(r.best.learning_rate, 0.01);
    assert!(r.rows[1].error.as_deref().unwrap().contains("diverged"));

    let grid = SweepGrid {
        learning_rate: vec![0.001, 0.01, 0.05],
        weight_decay: vec![0.0, 5e-4],
        beta: vec![],
    };
    let r = hparam_sweep(&grid, &cfg, &ds, &base, &[0, 1], 1).unwrap();
    assert_eq!(r.rows.len(), 6);
    let max = r.rows.iter().map(|row| row.val_mean).fold(f64::MIN, f64::max);
    assert_eq!(r.rows[r.best_row].val_mean, max);
    let first_max = r.rows.iter().position(|row| row.val_mean == max).unwrap();
    assert_eq!(
        r.best_row, first_max,
        "ties resolve to the earliest (smallest lr, then decay) point"
    );
    assert!(hparam_sweep(
        &SweepGrid {
            learning_rate: vec![],
            ..grid
        },
        &cfg,
        &ds,
        &base,
        &[0],
        1
    )
    .is_err());
}

#[test]
fn traces_round_trip_through_csv() {
    let ds = toy(8);
    let hp = HParams {
        diagnostics_every: 2,
        ..quick(6)
    };
    let res = train_fresh(&ModelConfig::new(Variant::Gat, 2), &ds, &hp).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    res.write_csv(&path, "config=abc seeds=[0]").unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# config=abc"));
    assert!(text.lines().nth(1).unwrap().starts_with("epoch,loss,acc_train"));
    assert_eq!(read_traces_csv(&path).unwrap(), res.traces);
    assert!(matches!(
        read_traces_csv(&dir.path().join("none.csv")),
        Err(Error::MissingFile(_))
    ));
}

#[test]
fn hparam_validation() {
    assert!(HParams {
        epochs: 0,
        patience: 0,
        ..HParams::default()
    }
    .validate()
    .is_err());
    assert!(HParams {
        patience: 600,
        ..HParams::default()
    }
    .validate()
    .is_err());
    assert!(HParams {
        learning_rate: -1.0,
        ..HParams::default()
    }
    .validate()
    .is_err());
    assert!(HParams {
        dropout: Some(1.0),
        ..HParams::default()
    }
    .validate()
    .is_err());
    assert!(HParams::default().validate().is_ok());
    let hp: HParams = toml::from_str("learning_rate = 0.01\nepochs = 20\npatience = 5").unwrap();
    assert_eq!(hp.epochs, 20);
}

#[test]
fn mean_std_population() {
    let (m, s) = mean_std(&[1.0, 3.0]);
    assert_eq!((m, s), (2.0, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let xs: Vec<f64> = (0..7).map(|_| rng.gen()).collect();
    let (m, _) = mean_std(&xs);
    assert!((m - xs.iter().sum::<f64>() / 7.0).abs() < 1e-15);
    let _ = Splits {
        train: vec![],
        val: vec![],
        test: vec![],
    };
}
