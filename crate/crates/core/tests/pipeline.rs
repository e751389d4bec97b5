use gdcnn::data::{generate_synthetic_dataset, load_manifest, load_samples, Sample};
use gdcnn::model::{evaluate, init_params, train, Head, ModelConfig, Parameters, TrainHyper};
use gdcnn::pgm::Graymap;
use gdcnn::Label;

fn synthetic(n_per_class: usize, seed: u64) -> (tempfile::TempDir, Vec<Sample>) {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_synthetic_dataset(n_per_class, seed, dir.path()).unwrap();
    let samples = load_samples(&manifest, 137).unwrap();
    (dir, samples)
}

fn small_gap() -> ModelConfig {
    ModelConfig { conv_filters: [4, 8, 8, 8], head: Head::Gap, dropout_rate: 0.0, ..ModelConfig::default() }
}

fn overfit_hyper() -> TrainHyper {
    TrainHyper { batch_size: 10, epochs: 80, learning_rate: 1e-3, seed: 0, noise_sigma: 0.0 }
}

#[test]
fn overfits_forty_samples_with_smoothed_loss_non_increasing() {
    let (_dir, samples) = synthetic(20, 3);
    assert_eq!(samples.len(), 40);
    let (params, history) = train(&small_gap(), &samples, &[], &overfit_hyper()).unwrap();
    let last = history.last().unwrap();
    assert!(last.train_acc >= 0.95, "final train accuracy {}", last.train_acc);

    let means: Vec<f64> =
        history.chunks(10).map(|w| w.iter().map(|r| r.train_loss).sum::<f64>() / w.len() as f64).collect();
    for pair in means.windows(2) {
        assert!(pair[1] <= pair[0], "windowed losses {means:?}");
    }
    let eval = evaluate(&params, &small_gap(), &samples).unwrap();
    assert!(eval.accuracy() >= 0.95);
}

#[test]
fn dense_head_also_learns_the_synthetic_task() {
    let (_dir, samples) = synthetic(20, 5);
    let config = ModelConfig { head: Head::Dense, dense_hidden: 16, ..small_gap() };
    let hyper = TrainHyper { epochs: 40, ..overfit_hyper() };
    let (_, history) = train(&config, &samples, &[], &hyper).unwrap();
    assert!(history.last().unwrap().train_acc >= 0.95, "{:?}", history.last());
}

#[test]
fn training_is_reproducible() {
    let (_dir, samples) = synthetic(4, 9);
    let config = ModelConfig { dropout_rate: 0.5, ..small_gap() };
    let hyper = TrainHyper { epochs: 3, batch_size: 3, noise_sigma: 0.05, ..overfit_hyper() };
    let (a, ha) = train(&config, &samples, &samples[..2], &hyper).unwrap();
    let (b, hb) = train(&config, &samples, &samples[..2], &hyper).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let (c, _) = train(&config, &samples, &[], &TrainHyper { seed: 1, ..hyper }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn three_row_fixture_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("id,path,label\n");
    for (i, (label, level)) in [(0, 200u8), (1, 40), (0, 180)].into_iter().enumerate() {
        let (w, h) = (50 + 10 * i, 64);
        let name = format!("img{i}.pgm");
        Graymap::new(w, h, vec![level; w * h]).unwrap().write(dir.path().join(&name)).unwrap();
        text.push_str(&format!("r{i},{name},{label}\n"));
    }
    std::fs::write(dir.path().join("m.csv"), text).unwrap();
    let manifest = load_manifest(dir.path().join("m.csv")).unwrap();
    assert_eq!(manifest.class_counts(), [2, 1]);
    let samples = load_samples(&manifest, 137).unwrap();
    assert!(samples.iter().all(|s| s.image.shape() == [1, 137, 137]));
    assert_eq!(samples[1].label, Label::Female);
    let config = small_gap();
    let hyper = TrainHyper { epochs: 2, batch_size: 2, ..overfit_hyper() };
    let (params, history) = train(&config, &samples, &samples, &hyper).unwrap();
    assert_eq!(history.len(), 2);
    assert!(history.iter().all(|r| r.val_acc.is_some()));
    let eval = evaluate(&params, &config, &samples).unwrap();
    assert_eq!(eval.predictions.len(), 3);
    assert_eq!(eval.counts[0].total(), 3);
}

fn std_of(params: &Parameters, name: &str) -> f64 {
    let t = params.get(name).unwrap();
    let n = t.numel() as f64;
    let mean = t.sum() / n;
    (t.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[test]
fn he_uniform_init_has_expected_spread() {
    let config = ModelConfig::default();
    let params = init_params(&config, 11).unwrap();
    for (name, fan_in) in [("conv2.weight", 32 * 9), ("conv3.weight", 64 * 9), ("conv4.weight", 128 * 9)] {
        let expect = (2.0 / fan_in as f64).sqrt();
        let got = std_of(&params, name);
        assert!((got / expect - 1.0).abs() < 0.05, "{name}: {got} vs {expect}");
    }
    assert_eq!(params.get("conv1.bias").unwrap().sum(), 0.0);
    assert_eq!(params.get("class_weights").unwrap().shape(), &[2, 128]);
}
