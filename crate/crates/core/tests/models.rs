use glyphlab::augment::AugmentPolicy;
use glyphlab::dataset::LabeledDataset;
use glyphlab::models::{cnn_train, evaluate_cnn, mlr_train, reference_cnn, Model, TrainConfig};
use glyphlab::synthetic::{shapes, ShapesConfig};
use glyphlab::{Error, Rng, Tensor};

fn blobs(per_class: usize, seed: u64) -> LabeledDataset {
    let mut rng = Rng::new(seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * per_class {
        let c = i % 2;
        let center = if c == 0 { -2.0 } else { 2.0 };
        data.push(center + 0.5 * rng.normal());
        data.push(center + 0.5 * rng.normal());
        labels.push(c);
    }
    LabeledDataset::new(
        Tensor::from_vec(&[2 * per_class, 1, 2], data).unwrap(),
        labels,
        vec!["neg".into(), "pos".into()],
    )
    .unwrap()
}

fn quick_cnn(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 2,
        learning_rate: 1e-3,
        seed: 3,
        ..TrainConfig::cnn_default()
    }
}

fn tiny_shapes(per_class: usize, seed: u64) -> LabeledDataset {
    shapes(&ShapesConfig {
        noise: 0.0,
        ..ShapesConfig::new(32, per_class, seed)
    })
    .unwrap()
}

#[test]
fn mlr_separates_blobs() {
    let train = blobs(30, 1);
    let val = blobs(10, 2);
    let (model, history) = mlr_train(&train, &val, &TrainConfig::mlr_default()).unwrap();
    assert_eq!(history.len(), 500);
    assert!(history.train_acc.contains(&1.0));
    assert_eq!(*history.val_acc.last().unwrap(), 1.0);
    let p = model.predict_proba(train.images()).unwrap();
    for row in p.data().chunks(2) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn mlr_zero_epochs_is_uniform() {
    let train = blobs(5, 1);
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::mlr_default()
    };
    let (model, history) = mlr_train(&train, &train, &cfg).unwrap();
    assert!(history.is_empty());
    let (loss, _) = model.loss_and_grad(train.images(), train.labels(), 0.0).unwrap();
    assert!((loss - 2f64.ln()).abs() < 1e-12);
    assert!(model.predict_proba(train.images()).unwrap().data().iter().all(|&v| v == 0.5));
}

#[test]
fn mlr_rejects_single_class() {
    let train = blobs(5, 1);
    let zeros: Vec<usize> = (0..train.len()).filter(|&i| train.labels()[i] == 0).collect();
    let one_class = train.subset(&zeros);
    assert!(matches!(
        mlr_train(&one_class, &train, &TrainConfig::mlr_default()),
        Err(Error::Argument(_))
    ));
}

#[test]
fn mlr_is_deterministic_with_augmentation() {
    let train = tiny_shapes(3, 4);
    let cfg = TrainConfig {
        epochs: 5,
        augment_policy: AugmentPolicy::lossy(),
        ..TrainConfig::mlr_default()
    };
    let a = mlr_train(&train, &train, &cfg).unwrap();
    let b = mlr_train(&train, &train, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cnn_zero_epochs_returns_initial_model() {
    let train = tiny_shapes(2, 1);
    let (model, history) = cnn_train(&train, &train, &quick_cnn(0)).unwrap();
    assert!(history.is_empty());
    let mut expected = reference_cnn(32).unwrap();
    expected.initialize(3).unwrap();
    assert_eq!(model, expected);
}

#[test]
fn cnn_rejects_non_binary_and_bad_sizes() {
    let three = LabeledDataset::new(Tensor::zeros(&[3, 32, 32]), vec![0, 1, 2], vec!["a".into(), "b".into(), "c".into()])
        .unwrap();
    assert!(matches!(cnn_train(&three, &three, &quick_cnn(1)), Err(Error::Argument(_))));
    let odd = LabeledDataset::new(Tensor::zeros(&[2, 48, 48]), vec![0, 1], vec!["a".into(), "b".into()]).unwrap();
    assert!(matches!(cnn_train(&odd, &odd, &quick_cnn(1)), Err(Error::Argument(_))));
}

#[test]
fn cnn_training_is_deterministic_and_order_invariant() {
    let train = tiny_shapes(3, 5);
    let val = tiny_shapes(2, 6);
    let cfg = TrainConfig {
        augment_policy: AugmentPolicy::lossy(),
        ..quick_cnn(2)
    };
    let (m1, h1) = cnn_train(&train, &val, &cfg).unwrap();
    let (m2, h2) = cnn_train(&train, &val, &cfg).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(m1, m2);

    let reversed: Vec<usize> = (0..train.len()).rev().collect();
    let (m3, h3) = cnn_train(&train.subset(&reversed), &val, &cfg).unwrap();
    assert_eq!(h1, h3);
    assert_eq!(m1, m3);
}

#[test]
fn cnn_fits_separable_toy() {
    let train = tiny_shapes(4, 8);
    let cfg = TrainConfig {
        batch_size: 1,
        ..quick_cnn(20)
    };
    let (model, history) = cnn_train(&train, &train, &cfg).unwrap();
    assert_eq!(history.len(), 20);
    let (loss, acc, probs) = evaluate_cnn(&model, &train).unwrap();
    assert!(loss < 0.1, "mean BCE {loss}");
    assert_eq!(acc, 1.0);
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));

    let wrapped = Model::Cnn(model);
    let rows = wrapped.class_probabilities(train.images()).unwrap();
    assert_eq!(rows.shape(), &[8, 2]);
    for row in rows.data().chunks(2) {
        assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
    }
}
