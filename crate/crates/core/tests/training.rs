mod common;

use edgesr::training::{random_extractor, Dataset, EdgeTrainer, SrTrainer, StepLosses};
use edgesr::{Checkpoint, Error, Scale, SuperResolver, TrainConfig};

fn toy_config(dir: &std::path::Path) -> TrainConfig {
    TrainConfig {
        scale: Scale::X2,
        hr_size: 32,
        batch_size: 2,
        generator_width: 4,
        discriminator_width: 4,
        max_steps: 4,
        checkpoint_interval: 0,
        checkpoint_dir: dir.into(),
        ..Default::default()
    }
}

fn toy_data() -> Dataset {
    Dataset::from_images(common::synthetic_set(4, 40, 11), 32).unwrap()
}

fn sr_trainer(cfg: &TrainConfig, stage1: &Checkpoint) -> SrTrainer {
    SrTrainer::new(cfg, stage1, Box::new(random_extractor(cfg, 16).unwrap())).unwrap()
}

#[test]
fn checkpoint_bytes_survive_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let mut t = EdgeTrainer::new(&cfg).unwrap();
    t.train_step(&toy_data()).unwrap();
    let bytes = t.checkpoint().unwrap().to_bytes().unwrap();
    let again = Checkpoint::from_bytes(&bytes).unwrap().to_bytes().unwrap();
    assert_eq!(bytes, again);

    let path = dir.path().join("c.safetensors");
    t.checkpoint().unwrap().save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(Checkpoint::load(&path).unwrap().to_bytes().unwrap(), bytes);
}

#[test]
fn optimizer_state_records_betas_and_one_update_per_network_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let data = toy_data();
    let mut t = EdgeTrainer::new(&cfg).unwrap();
    for _ in 0..3 {
        t.train_step(&data).unwrap();
    }
    let ckpt = t.checkpoint().unwrap();
    for net in ["g1", "d1"] {
        assert_eq!(ckpt.extra[&format!("optim.{net}.beta1")], "0");
        assert_eq!(ckpt.extra[&format!("optim.{net}.beta2")], "0.9");
        assert_eq!(ckpt.extra[&format!("optim.{net}.t")], "3");
    }
    let (g, d) = t.optimizers();
    assert_eq!((g.steps(), d.steps()), (3, 3));
    assert!((d.lr - 0.1 * g.lr).abs() < 1e-18);
}

fn losses_of(steps: &[StepLosses]) -> Vec<(u64, u64)> {
    steps.iter().map(|s| (s.objective.to_bits(), s.discriminator.to_bits())).collect()
}

#[test]
fn identical_seeds_train_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let data = toy_data();
    let run = || {
        let mut t = EdgeTrainer::new(&cfg).unwrap();
        let s: Vec<_> = (0..3).map(|_| t.train_step(&data).unwrap()).collect();
        (losses_of(&s), t.generator().store().digest().unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn resumed_edge_training_matches_uninterrupted_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let data = toy_data();

    let mut straight = EdgeTrainer::new(&cfg).unwrap();
    let all: Vec<_> = (0..4).map(|_| straight.train_step(&data).unwrap()).collect();

    let mut first = EdgeTrainer::new(&cfg).unwrap();
    for _ in 0..2 {
        first.train_step(&data).unwrap();
    }
    let path = dir.path().join("mid.safetensors");
    first.checkpoint().unwrap().save(&path).unwrap();
    let mut second = EdgeTrainer::resume(&cfg, &Checkpoint::load(&path).unwrap()).unwrap();
    let tail: Vec<_> = (0..2).map(|_| second.train_step(&data).unwrap()).collect();

    assert_eq!(losses_of(&all[2..]), losses_of(&tail));
    assert_eq!(
        straight.generator().store().digest().unwrap(),
        second.generator().store().digest().unwrap()
    );
    assert_eq!(
        straight.discriminator().store().digest().unwrap(),
        second.discriminator().store().digest().unwrap()
    );
    assert_eq!(
        straight.checkpoint().unwrap().to_bytes().unwrap(),
        second.checkpoint().unwrap().to_bytes().unwrap()
    );
}

#[test]
fn image_stage_keeps_the_edge_generator_frozen_and_resumes_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let data = toy_data();
    let mut edge = EdgeTrainer::new(&cfg).unwrap();
    edge.train_step(&data).unwrap();
    let stage1 = edge.checkpoint().unwrap();
    let g1_digest = edge.generator().store().digest().unwrap();

    let mut straight = sr_trainer(&cfg, &stage1);
    let all: Vec<_> = (0..3).map(|_| straight.train_step(&data).unwrap()).collect();
    assert_eq!(straight.edge_generator().store().digest().unwrap(), g1_digest);
    assert_eq!(straight.frozen_digest(), g1_digest);
    let ckpt = straight.checkpoint().unwrap();
    for (name, t) in stage1.section("g1") {
        let saved = &ckpt.section("g1")[&name];
        let (a, b): (Vec<f32>, Vec<f32>) = (
            t.flatten_all().unwrap().to_vec1().unwrap(),
            saved.flatten_all().unwrap().to_vec1().unwrap(),
        );
        assert_eq!(a, b, "{name}");
    }
    let (g, d) = straight.optimizers();
    assert_eq!((g.steps(), d.steps()), (3, 3));

    let mut first = sr_trainer(&cfg, &stage1);
    first.train_step(&data).unwrap();
    let mid = Checkpoint::from_bytes(&first.checkpoint().unwrap().to_bytes().unwrap()).unwrap();
    let mut second = SrTrainer::resume(&cfg, &mid, Box::new(random_extractor(&cfg, 16).unwrap())).unwrap();
    let tail: Vec<_> = (0..2).map(|_| second.train_step(&data).unwrap()).collect();
    assert_eq!(losses_of(&all[1..]), losses_of(&tail));
    assert_eq!(
        straight.generator().store().digest().unwrap(),
        second.generator().store().digest().unwrap()
    );

    // The final checkpoint drives inference.
    let resolver = SuperResolver::from_checkpoint(&ckpt).unwrap();
    let lr = data.evaluation_samples(&cfg).unwrap()[0].lr.clone();
    let p = resolver.predict(&lr).unwrap();
    assert_eq!(p.sr.dim(), (32, 32, 3));
}

#[test]
fn zero_feature_matching_weight_leaves_only_the_adversarial_term() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        lambda_fm: 0.0,
        ..toy_config(dir.path())
    };
    let mut t = EdgeTrainer::new(&cfg).unwrap();
    for _ in 0..2 {
        let s = t.train_step(&toy_data()).unwrap();
        let adv = s.component("adversarial").unwrap();
        assert!(s.component("feature_matching").unwrap() > 0.0);
        assert!((s.objective - cfg.lambda_g1 * adv).abs() <= 1e-6 * adv.abs().max(1.0));
    }
}

#[test]
fn reconstruction_only_objective_decreases_on_a_fixed_batch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        batch_size: 1,
        random_crop: false,
        hr_size: 32,
        lambda_g2: 0.0,
        lambda_p: 0.0,
        lambda_s: 0.0,
        ..toy_config(dir.path())
    };
    let data = Dataset::from_images(common::synthetic_set(1, 32, 5), 32).unwrap();
    let mut edge = EdgeTrainer::new(&cfg).unwrap();
    edge.train_step(&data).unwrap();
    let mut t = sr_trainer(&cfg, &edge.checkpoint().unwrap());
    let l1: Vec<f64> = (0..12).map(|_| t.train_step(&data).unwrap().objective).collect();
    assert!(
        l1.windows(2).all(|w| w[1] < w[0]),
        "l1 trajectory {l1:?}"
    );
    let s = t.train_step(&data).unwrap();
    assert!(s.component("perceptual").is_none() && s.component("style").is_none());
}

#[test]
fn divergence_dumps_state_and_reports_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        lr_initial: 1e30,
        ..toy_config(dir.path())
    };
    let data = toy_data();
    let mut t = EdgeTrainer::new(&cfg).unwrap();
    let err = (0..10).find_map(|_| t.train_step(&data).err()).expect("training diverges");
    match err {
        Error::NonFiniteLoss { step, dump, .. } => {
            let dump = dump.expect("state dumped");
            assert!(dump.is_file());
            assert!(dump.file_name().unwrap().to_string_lossy().contains(&format!("nonfinite-step{step}")));
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn checkpoints_land_in_the_configured_directory_at_each_interval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        max_steps: 4,
        checkpoint_interval: 2,
        ..toy_config(dir.path())
    };
    let data = toy_data();
    let stage1 = EdgeTrainer::new(&cfg).unwrap().run(&data).unwrap();
    assert_eq!(stage1.step, 4);
    for name in ["edge-step0000002", "edge-step0000004", "edge"] {
        assert!(dir.path().join(format!("{name}.safetensors")).is_file(), "{name}");
    }
    let mut sr = sr_trainer(&cfg, &stage1);
    let done = sr.run(&data).unwrap();
    assert_eq!((done.stage.as_str(), done.step), ("sr", 4));
    assert!(dir.path().join("sr.safetensors").is_file());
}
