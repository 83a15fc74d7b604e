use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::nn::{init_weights, Activation, ColumnCorrector, LayerSpec, NetSpec, Normalization, WeightVector};
use crate::qg::Grid;

fn grid() -> Grid {
    Grid::new(8, 6)
}

/// Pairs whose targets come from a random teacher network.
fn teacher_pairs(n: usize, seed: u64) -> (Vec<TrainingPair>, ColumnCorrector) {
    let g = grid();
    let spec = NetSpec::column_default();
    let mut norm = Normalization::identity();
    norm.out_std = vec![0.01, 0.02];
    let teacher = ColumnCorrector::new(spec.clone(), init_weights(&spec, seed + 100), norm).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..n)
        .map(|c| {
            let input: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let target = teacher.apply(g, &input).unwrap();
            TrainingPair { cycle: c, input, target }
        })
        .collect();
    (pairs, teacher)
}

fn quick() -> AdamConfig {
    AdamConfig { batch_size: 64, max_epochs: 200, patience: 50, seed: 3, ..Default::default() }
}

#[test]
fn config_validation() {
    AdamConfig::default().validate().unwrap();
    assert!(AdamConfig { patience: 1024, ..Default::default() }.validate().is_err());
    assert!(AdamConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
    let d = AdamConfig::default();
    assert_eq!((d.learning_rate, d.batch_size, d.max_epochs, d.patience), (1e-3, 1024, 1024, 256));
}

#[test]
fn zero_targets_train_to_zero_output() {
    let (mut pairs, _) = teacher_pairs(16, 1);
    pairs.iter_mut().for_each(|p| p.target.iter_mut().for_each(|v| *v = 0.0));
    let ds = Dataset::from_pairs(grid(), pairs).unwrap();
    let cfg = AdamConfig { max_epochs: 1024, patience: 256, ..quick() };
    let (corr, _) = adam_train(&ds, &NetSpec::column_default(), &cfg).unwrap();
    let (xs, ys) = ds.normalized(ds.train_pairs()).unwrap();
    let m = mse(&corr.spec, corr.weights.as_slice(), &xs, &ys);
    assert!(m <= 1e-6, "final training MSE {m:e}");
}

#[test]
fn linear_net_matches_least_squares() {
    let spec = NetSpec::new(vec![LayerSpec { input: 4, output: 2, activation: Activation::Linear }]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 200;
    let xs: Vec<[f64; 4]> = (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
    let ys: Vec<[f64; 2]> = xs
        .iter()
        .map(|x| {
            let e0: f64 = rng.random_range(-0.1..0.1);
            let e1: f64 = rng.random_range(-0.1..0.1);
            [0.5 * x[0] - x[1] + 0.2 * x[3] + 0.3 + e0, x[2] - 0.7 * x[0] - 0.1 + e1]
        })
        .collect();
    let cfg = AdamConfig {
        learning_rate: 1e-2,
        batch_size: n,
        max_epochs: 6000,
        patience: 5999,
        seed: 1,
        ..Default::default()
    };
    let (w, _) = adam_fit(&spec, WeightVector::zeros(&spec), (&xs, &ys), (&xs, &ys), &cfg).unwrap();
    // normal equations with a bias column
    let a = DMatrix::from_fn(n, 5, |r, c| if c < 4 { xs[r][c] } else { 1.0 });
    for o in 0..2 {
        let y = DVector::from_fn(n, |r, _| ys[r][o]);
        let sol = (a.transpose() * &a).lu().solve(&(a.transpose() * y)).unwrap();
        for c in 0..4 {
            assert!((w.0[o * 4 + c] - sol[c]).abs() < 1e-4, "w[{o},{c}] {} vs {}", w.0[o * 4 + c], sol[c]);
        }
        assert!((w.0[8 + o] - sol[4]).abs() < 1e-4);
    }
}

#[test]
fn training_is_deterministic() {
    let (pairs, _) = teacher_pairs(8, 2);
    let ds = Dataset::from_pairs(grid(), pairs).unwrap();
    let cfg = AdamConfig { max_epochs: 20, patience: 10, ..quick() };
    let (a, ha) = adam_train(&ds, &NetSpec::column_default(), &cfg).unwrap();
    let (b, hb) = adam_train(&ds, &NetSpec::column_default(), &cfg).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a.weights, b.weights);
    assert_eq!(ha.to_csv(), hb.to_csv());
}

#[test]
fn early_stop_restores_best_weights() {
    let (pairs, _) = teacher_pairs(8, 3);
    let ds = Dataset::from_pairs(grid(), pairs).unwrap();
    let cfg = AdamConfig { learning_rate: 3e-2, max_epochs: 300, patience: 5, ..quick() };
    let (corr, hist) = adam_train(&ds, &NetSpec::column_default(), &cfg).unwrap();
    let (xv, yv) = ds.normalized(ds.validation_pairs()).unwrap();
    let v = mse(&corr.spec, corr.weights.as_slice(), &xv, &yv);
    assert!((v - hist.best_val_mse).abs() <= 1e-12);
    let min = hist.epochs.iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min);
    assert_eq!(min, hist.best_val_mse);
    if hist.stopped_early {
        assert!(hist.epochs.last().unwrap().event.as_deref().unwrap().starts_with("early_stop"));
    }
}

#[test]
fn nan_input_aborts() {
    let spec = NetSpec::column_default();
    let mut xs = vec![[0.1, 0.2, 0.3, 0.4]; 10];
    xs[3][1] = f64::NAN;
    let ys = vec![[0.0, 0.0]; 10];
    let r = adam_fit(&spec, init_weights(&spec, 0), (&xs, &ys), (&xs, &ys), &quick());
    assert!(matches!(r, Err(Error::Training { epoch: 0, .. })));
}

#[test]
fn normalized_mse_anchors() {
    let (pairs, teacher) = teacher_pairs(4, 4);
    assert_eq!(evaluate_normalized_mse(&teacher, grid(), &pairs).unwrap(), 0.0);
    let spec = NetSpec::column_default();
    let zero = ColumnCorrector::new(spec.clone(), WeightVector::zeros(&spec), Normalization::identity()).unwrap();
    assert_eq!(evaluate_normalized_mse(&zero, grid(), &pairs).unwrap(), 1.0);
    assert!(matches!(evaluate_normalized_mse(&zero, grid(), &[]), Err(Error::Insufficient(_))));
}

#[test]
fn trained_net_beats_zero_predictor_in_sample() {
    let (pairs, _) = teacher_pairs(16, 6);
    let ds = Dataset::from_pairs(grid(), pairs).unwrap();
    let (corr, _) = adam_train(&ds, &NetSpec::column_default(), &quick()).unwrap();
    let e = evaluate_normalized_mse(&corr, grid(), ds.train_pairs()).unwrap();
    assert!(e < 1.0, "{e}");
}
