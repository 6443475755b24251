use ndf::data::{make_sample_set, SampleSet, SamplingPolicy};
use ndf::field::{project_batch, DistanceField, ProjectionConfig};
use ndf::geom::{exact_udf, seeded_rng, Point, Sphere};
use ndf::neural::{train, train_model, Arch, Conditioning, NeuralError, NeuralModel, TrainConfig};
use rand::Rng;

fn circle_set(n: usize) -> (Sphere<2>, SampleSet<2>) {
    let circle = Sphere::<2>::new(Point::zeros(), 0.3);
    let set = make_sample_set("circle", &circle, n, 300, &SamplingPolicy::default(), 0).unwrap();
    (circle, set)
}

fn small_arch() -> Arch {
    Arch {
        resolutions: vec![16, 8],
        channels: 4,
        decoder_hidden: vec![32, 32],
        ..Arch::default_for(2)
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let (_, set) = circle_set(2000);
    let model = NeuralModel::<f32>::new(small_arch(), 3).unwrap();
    let cfg = TrainConfig {
        lr: 0.0,
        epochs: 1,
        points_per_shape: 256,
        ..Default::default()
    };
    let (after, log) = train_model(model.clone(), std::slice::from_ref(&set), &cfg).unwrap();
    assert_eq!(after.params(), model.params());
    assert_eq!(log.step_losses.len(), 1);
}

#[test]
fn same_seed_gives_identical_curves() {
    let (_, set) = circle_set(2000);
    let sets = vec![set.clone(), set];
    let cfg = TrainConfig {
        epochs: 5,
        batch_shapes: 1,
        points_per_shape: 128,
        lr: 1e-3,
        ..Default::default()
    };
    let (m1, l1) = train::<2, f32>(small_arch(), &sets, &cfg).unwrap();
    let (m2, l2) = train::<2, f32>(small_arch(), &sets, &cfg).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(m1, m2);
    assert_eq!(l1.step_losses.len(), 10);
    let other = TrainConfig { seed: 1, ..cfg };
    let (_, l3) = train::<2, f32>(small_arch(), &sets, &other).unwrap();
    assert_ne!(l1.step_losses, l3.step_losses);
}

#[test]
fn bad_training_inputs_are_rejected() {
    let (_, set) = circle_set(100);
    let cfg = TrainConfig::default();
    assert!(matches!(train::<2, f32>(small_arch(), &[], &cfg), Err(NeuralError::EmptyDataset)));
    let mut bad = set.clone();
    bad.points[3] = Point::<2>::new(0.9, 0.0);
    assert!(matches!(
        train::<2, f32>(small_arch(), &[bad], &cfg),
        Err(NeuralError::OutOfBox { .. })
    ));
    let ad = Arch {
        conditioning: Conditioning::AutoDecoder { shapes: 2 },
        ..small_arch()
    };
    assert!(train::<2, f32>(ad, &[set], &cfg).is_err());
    let nan = TrainConfig {
        lr: f64::NAN,
        ..Default::default()
    };
    assert!(nan.validate().is_err());
}

/// Single-shape run with the default network and optimizer settings.
#[test]
fn circle_pilot_converges() {
    let (circle, set) = circle_set(20_000);
    let cfg = TrainConfig {
        epochs: 2000,
        val_every: 500,
        ..Default::default()
    };
    let (model, log) = train::<2, f32>(Arch::default_for(2), std::slice::from_ref(&set), &cfg).unwrap();
    let val = log.last_val().unwrap();
    assert!(val < 0.005, "validation loss {val}");
    let first = log.step_losses[0];
    let tail: f64 = log.step_losses[log.step_losses.len() - 100..].iter().sum::<f64>() / 100.0;
    assert!(first / tail >= 10.0, "loss went from {first} to {tail}");

    // projection from near-surface starts moves points towards the circle
    let f = model.condition(&set.input).unwrap();
    let mut rng = seeded_rng(5);
    let starts: Vec<Point<2>> = (0..4000)
        .map(|_| Point::<2>::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
        .filter(|p| f.eval(p) < 0.1)
        .collect();
    let moved = project_batch(&f, &starts, &ProjectionConfig::default()).unwrap();
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let mut before: Vec<f64> = moved.source.iter().map(|&i| exact_udf(&circle, &starts[i]).unwrap()).collect();
    let mut after: Vec<f64> = moved.points.iter().map(|q| exact_udf(&circle, q).unwrap()).collect();
    let (b, a) = (median(&mut before), median(&mut after));
    assert!(a < b, "median UDF {b} -> {a}");
    assert!(a < 0.01, "median UDF after projection {a}");
}
