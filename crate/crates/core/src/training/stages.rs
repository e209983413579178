use std::path::PathBuf;

use candle_core::{DType, Device, Tensor};

use crate::error::{Error, Result};
use crate::imaging::offset_upsample;
use crate::losses::{
    feature_matching, hinge_d, hinge_g, joint_g1, joint_g2, l1, perceptual_from_features, scalar,
    style_from_features, FeatureExtractor, LossWeights, Vgg19,
};
use crate::networks::{
    default_device, edges_to_tensor, image_to_tensor, Checkpoint, Discriminator, Generator, Mode,
};

use super::data::Dataset;
use super::trainlog::TrainLog;
use super::optim::Adam;
use super::plateau::Plateau;
use super::sample::SamplePair;
use super::TrainConfig;

pub const EDGE_STAGE: &str = "edge";
pub const SR_STAGE: &str = "sr";

/// Seeds derived from the global seed for each network's initialization.
const G1_SEED: u64 = 1;
const D1_SEED: u64 = 2;
const G2_SEED: u64 = 3;
const D2_SEED: u64 = 4;
const EXTRACTOR_SEED: u64 = 5;

/// Losses of one training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLosses {
    pub step: u64,
    /// The generator's joint objective.
    pub objective: f64,
    pub discriminator: f64,
    /// Individual unweighted generator terms.
    pub components: Vec<(&'static str, f64)>,
    pub lr: f64,
}

impl StepLosses {
    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }
}

fn stack(samples: &[SamplePair], f: impl Fn(&SamplePair) -> Result<Tensor>) -> Result<Tensor> {
    let parts = samples.iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(Tensor::cat(&parts, 0)?)
}

/// Network inputs and targets of a batch.
struct EdgeBatch {
    g1_input: Tensor,
    hr_gray: Tensor,
    c_gt: Tensor,
}

fn edge_batch(samples: &[SamplePair], dev: &Device, dt: DType) -> Result<EdgeBatch> {
    let gray_up = stack(samples, |s| image_to_tensor(&s.lr_gray_up, dev, dt))?;
    let c_lr_up = stack(samples, |s| edges_to_tensor(&s.c_lr_up, dev, dt))?;
    Ok(EdgeBatch {
        g1_input: Tensor::cat(&[&gray_up, &c_lr_up], 1)?,
        hr_gray: stack(samples, |s| image_to_tensor(&s.hr_gray, dev, dt))?,
        c_gt: stack(samples, |s| edges_to_tensor(&s.c_gt, dev, dt))?,
    })
}

/// The G1 input tensor for a batch of samples.
pub fn g1_input(samples: &[SamplePair], dev: &Device, dt: DType) -> Result<Tensor> {
    Ok(edge_batch(samples, dev, dt)?.g1_input)
}

fn check_finite(values: &[(&str, f64)]) -> Option<String> {
    values
        .iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(k, v)| format!("{k} = {v}"))
}

fn stage_lr(cfg: &TrainConfig, plateau: &Plateau) -> f64 {
    if plateau.fired() {
        cfg.lr_fine
    } else {
        cfg.lr_initial
    }
}

fn save_plateau(ckpt: &mut Checkpoint, plateau: &Plateau) -> Result<()> {
    let text = toml::to_string(plateau).map_err(|e| Error::Checkpoint(e.to_string()))?;
    ckpt.extra.insert("scheduler".into(), text);
    Ok(())
}

fn load_plateau(ckpt: &Checkpoint) -> Result<Plateau> {
    let text = ckpt
        .extra
        .get("scheduler")
        .ok_or_else(|| Error::Checkpoint("missing scheduler state".into()))?;
    toml::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
}

fn open_log(cfg: &TrainConfig) -> Result<Option<TrainLog>> {
    cfg.log_path.as_deref().map(TrainLog::open).transpose()
}

fn checkpoint_path(cfg: &TrainConfig, name: &str) -> PathBuf {
    cfg.resolved_checkpoint_dir().join(format!("{name}.safetensors"))
}

/// Stage 1: adversarial training of the edge generator.
pub struct EdgeTrainer {
    cfg: TrainConfig,
    g1: Generator,
    d1: Discriminator,
    opt_g: Adam,
    opt_d: Adam,
    plateau: Plateau,
    step: u64,
    log: Option<TrainLog>,
}

impl EdgeTrainer {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let (dev, dt) = default_device();
        let g1 = Generator::new(cfg.edge_generator(), cfg.seed.wrapping_add(G1_SEED), &dev, dt)?;
        let d1 = Discriminator::new(cfg.edge_discriminator(), cfg.seed.wrapping_add(D1_SEED), &dev, dt)?;
        let plateau = Plateau::new(cfg.plateau_window, cfg.plateau_min_improvement, cfg.plateau_patience);
        Ok(Self {
            opt_g: Adam::new(cfg.lr_initial, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
            opt_d: Adam::new(
                cfg.lr_initial * cfg.d_to_g_lr_ratio,
                cfg.adam_beta1,
                cfg.adam_beta2,
                cfg.adam_eps,
            ),
            cfg: cfg.clone(),
            g1,
            d1,
            plateau,
            step: 0,
            log: open_log(cfg)?,
        })
    }

    /// Continues from a stage-1 checkpoint.
    pub fn resume(cfg: &TrainConfig, ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.stage != EDGE_STAGE {
            return Err(Error::Checkpoint(format!(
                "expected a {EDGE_STAGE:?} checkpoint, found {:?}",
                ckpt.stage
            )));
        }
        let mut t = Self::new(cfg)?;
        ckpt.restore_store("g1", t.g1.store())?;
        ckpt.restore_store("d1", t.d1.store())?;
        t.opt_g = Adam::load_from(ckpt, "g1", t.g1.store())?;
        t.opt_d = Adam::load_from(ckpt, "d1", t.d1.store())?;
        t.plateau = load_plateau(ckpt)?;
        t.step = ckpt.step;
        Ok(t)
    }

    pub fn generator(&self) -> &Generator {
        &self.g1
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.d1
    }

    pub fn optimizers(&self) -> (&Adam, &Adam) {
        (&self.opt_g, &self.opt_d)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One D update followed by one G update.
    pub fn train_step(&mut self, data: &Dataset) -> Result<StepLosses> {
        let (dev, dt) = default_device();
        let w = self.cfg.loss_weights();
        let samples = data.batch(&self.cfg, self.step)?;
        let b = edge_batch(&samples, &dev, dt)?;

        let c_pred = self.g1.forward(&b.g1_input, Mode::Train)?;

        let real = self.d1.judge(&b.c_gt, &b.hr_gray, Mode::Train)?;
        let fake = self.d1.judge(&c_pred.detach(), &b.hr_gray, Mode::Train)?;
        let d_loss = hinge_d(&real.scores, &fake.scores)?;
        let d_value = scalar(&d_loss)?;

        let both = self.d1.judge(
            &Tensor::cat(&[&b.c_gt, &c_pred], 0)?,
            &Tensor::cat(&[&b.hr_gray, &b.hr_gray], 0)?,
            Mode::Eval,
        )?;
        let n = samples.len();
        let real_feats = both
            .features
            .iter()
            .map(|f| Ok(f.narrow(0, 0, n)?.detach()))
            .collect::<Result<Vec<_>>>()?;
        let fake_feats = both
            .features
            .iter()
            .map(|f| Ok(f.narrow(0, n, n)?))
            .collect::<Result<Vec<_>>>()?;
        let adv = hinge_g(&both.scores.narrow(0, n, n)?)?;
        let fm = feature_matching(&real_feats, &fake_feats)?;
        let g_loss = joint_g1(&adv, &fm, &w)?;

        let components = vec![("adversarial", scalar(&adv)?), ("feature_matching", scalar(&fm)?)];
        let objective = scalar(&g_loss)?;
        let mut checked = components.clone();
        checked.push(("discriminator", d_value));
        checked.push(("objective", objective));
        if let Some(detail) = check_finite(&checked) {
            return Err(self.abort(detail));
        }

        let d_grads = d_loss.backward()?;
        self.opt_d.step(&d_grads, self.d1.store())?;
        let g_grads = g_loss.backward()?;
        self.opt_g.step(&g_grads, self.g1.store())?;

        let lr = self.opt_g.lr;
        self.step += 1;
        if self.plateau.observe(objective) {
            log::info!("edge stage: objective plateaued at step {}", self.step);
        }
        self.set_lr(stage_lr(&self.cfg, &self.plateau));
        let out = StepLosses {
            step: self.step,
            objective,
            discriminator: d_value,
            components,
            lr,
        };
        self.record(&out)?;
        Ok(out)
    }

    fn set_lr(&mut self, lr: f64) {
        self.opt_g.lr = lr;
        self.opt_d.lr = lr * self.cfg.d_to_g_lr_ratio;
    }

    fn record(&mut self, s: &StepLosses) -> Result<()> {
        if let Some(log) = &mut self.log {
            let mut items = s.components.clone();
            items.push(("discriminator", s.discriminator));
            items.push(("objective", s.objective));
            log.record(EDGE_STAGE, s.step, s.lr, &items)?;
        }
        Ok(())
    }

    fn abort(&self, detail: String) -> Error {
        let path = checkpoint_path(&self.cfg, &format!("edge-nonfinite-step{}", self.step));
        let dump = self.checkpoint().and_then(|c| c.save(&path)).ok().map(|_| path);
        Error::NonFiniteLoss {
            step: self.step as usize,
            detail,
            dump,
        }
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut c = Checkpoint::new(self.step, EDGE_STAGE, self.cfg.to_toml_string()?);
        c.insert_store("g1", self.g1.store());
        c.insert_store("d1", self.d1.store());
        self.opt_g.save_into(&mut c, "g1");
        self.opt_d.save_into(&mut c, "d1");
        save_plateau(&mut c, &self.plateau)?;
        Ok(c)
    }

    /// Trains until `max_steps`, saving at the configured interval and at the
    /// end.
    pub fn run(&mut self, data: &Dataset) -> Result<Checkpoint> {
        while (self.step as usize) < self.cfg.max_steps {
            let s = self.train_step(data)?;
            if s.step % 50 == 0 {
                log::info!("edge step {}: objective {:.4} d {:.4}", s.step, s.objective, s.discriminator);
            }
            let every = self.cfg.checkpoint_interval as u64;
            if every > 0 && self.step.is_multiple_of(every) {
                self.checkpoint()?
                    .save(&checkpoint_path(&self.cfg, &format!("edge-step{:07}", self.step)))?;
            }
        }
        let c = self.checkpoint()?;
        c.save(&checkpoint_path(&self.cfg, EDGE_STAGE))?;
        Ok(c)
    }
}

/// Runs stage 1 from scratch.
pub fn train_edge_stage(cfg: &TrainConfig, data: &Dataset) -> Result<Checkpoint> {
    EdgeTrainer::new(cfg)?.run(data)
}

/// Network inputs and targets for stage 2.
struct SrBatch {
    g1_input: Tensor,
    incomplete: Tensor,
    hr: Tensor,
}

fn sr_batch(samples: &[SamplePair], dev: &Device, dt: DType) -> Result<SrBatch> {
    let incomplete = stack(samples, |s| {
        image_to_tensor(&offset_upsample(&s.lr, s.scale)?, dev, dt)
    })?;
    Ok(SrBatch {
        g1_input: g1_input(samples, dev, dt)?,
        incomplete,
        hr: stack(samples, |s| image_to_tensor(&s.hr, dev, dt))?,
    })
}

/// The frozen extractor named by the config, or an error when none is set.
pub fn load_extractor(cfg: &TrainConfig) -> Result<Vgg19> {
    let (dev, dt) = default_device();
    let path = cfg.extractor_weights.as_ref().ok_or_else(|| {
        Error::Config(
            "extractor_weights is not set; the image stage needs VGG-19 weights \
             (see `edgesr init-extractor`)"
                .into(),
        )
    })?;
    Vgg19::load(path, &dev, dt)
}

/// A small randomly initialized extractor for desk-scale experiments.
pub fn random_extractor(cfg: &TrainConfig, width_divisor: usize) -> Result<Vgg19> {
    let (dev, dt) = default_device();
    Vgg19::random(width_divisor, cfg.seed.wrapping_add(EXTRACTOR_SEED), &dev, dt)
}

/// Stage 2: the completion generator, with the edge generator frozen.
pub struct SrTrainer {
    cfg: TrainConfig,
    base: Checkpoint,
    g1: Generator,
    g1_digest: String,
    g2: Generator,
    d2: Discriminator,
    opt_g: Adam,
    opt_d: Adam,
    plateau: Plateau,
    extractor: Box<dyn FeatureExtractor>,
    step: u64,
    log: Option<TrainLog>,
}

impl SrTrainer {
    /// Starts stage 2 from a checkpoint holding a trained edge generator.
    pub fn new(cfg: &TrainConfig, stage1: &Checkpoint, extractor: Box<dyn FeatureExtractor>) -> Result<Self> {
        cfg.validate()?;
        let (dev, dt) = default_device();
        let g1 = Generator::new(cfg.edge_generator(), cfg.seed.wrapping_add(G1_SEED), &dev, dt)?;
        stage1.restore_store("g1", g1.store())?;
        let g1_digest = g1.store().digest()?;
        let g2 = Generator::new(cfg.completion_generator(), cfg.seed.wrapping_add(G2_SEED), &dev, dt)?;
        let d2 = Discriminator::new(
            cfg.completion_discriminator(),
            cfg.seed.wrapping_add(D2_SEED),
            &dev,
            dt,
        )?;
        let mut base = Checkpoint::new(0, SR_STAGE, "");
        for section in ["g1", "d1", "optim/g1", "optim/d1"] {
            base.insert_section(section, stage1.section(section));
        }
        base.extra = stage1
            .extra
            .iter()
            .filter(|(k, _)| k.starts_with("optim.g1.") || k.starts_with("optim.d1."))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(Self {
            opt_g: Adam::new(cfg.lr_initial, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
            opt_d: Adam::new(
                cfg.lr_initial * cfg.d_to_g_lr_ratio,
                cfg.adam_beta1,
                cfg.adam_beta2,
                cfg.adam_eps,
            ),
            plateau: Plateau::new(cfg.plateau_window, cfg.plateau_min_improvement, cfg.plateau_patience),
            cfg: cfg.clone(),
            base,
            g1,
            g1_digest,
            g2,
            d2,
            extractor,
            step: 0,
            log: open_log(cfg)?,
        })
    }

    /// Continues from a stage-2 checkpoint.
    pub fn resume(cfg: &TrainConfig, ckpt: &Checkpoint, extractor: Box<dyn FeatureExtractor>) -> Result<Self> {
        if ckpt.stage != SR_STAGE {
            return Err(Error::Checkpoint(format!(
                "expected a {SR_STAGE:?} checkpoint, found {:?}",
                ckpt.stage
            )));
        }
        let mut t = Self::new(cfg, ckpt, extractor)?;
        ckpt.restore_store("g2", t.g2.store())?;
        ckpt.restore_store("d2", t.d2.store())?;
        t.opt_g = Adam::load_from(ckpt, "g2", t.g2.store())?;
        t.opt_d = Adam::load_from(ckpt, "d2", t.d2.store())?;
        t.plateau = load_plateau(ckpt)?;
        t.step = ckpt.step;
        Ok(t)
    }

    pub fn edge_generator(&self) -> &Generator {
        &self.g1
    }

    pub fn generator(&self) -> &Generator {
        &self.g2
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.d2
    }

    pub fn optimizers(&self) -> (&Adam, &Adam) {
        (&self.opt_g, &self.opt_d)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Digest of the frozen edge generator taken when the stage started.
    pub fn frozen_digest(&self) -> &str {
        &self.g1_digest
    }

    fn verify_frozen(&self) -> Result<()> {
        let now = self.g1.store().digest()?;
        if now != self.g1_digest {
            return Err(Error::Checkpoint(format!(
                "edge generator changed during the image stage ({} -> {now})",
                self.g1_digest
            )));
        }
        Ok(())
    }

    pub fn train_step(&mut self, data: &Dataset) -> Result<StepLosses> {
        let (dev, dt) = default_device();
        let w: LossWeights = self.cfg.loss_weights();
        let samples = data.batch(&self.cfg, self.step)?;
        let b = sr_batch(&samples, &dev, dt)?;

        let c_pred = self.g1.forward(&b.g1_input, Mode::Eval)?.detach();
        let g2_input = Tensor::cat(&[&b.incomplete, &c_pred], 1)?;
        let pred = self.g2.forward(&g2_input, Mode::Train)?;

        let real = self.d2.judge(&b.hr, &c_pred, Mode::Train)?;
        let fake = self.d2.judge(&pred.detach(), &c_pred, Mode::Train)?;
        let d_loss = hinge_d(&real.scores, &fake.scores)?;
        let d_value = scalar(&d_loss)?;

        let adv = hinge_g(&self.d2.judge(&pred, &c_pred, Mode::Eval)?.scores)?;
        let rec = l1(&pred, &b.hr)?;
        let mut components = vec![("l1", scalar(&rec)?), ("adversarial", scalar(&adv)?)];
        let zero = Tensor::zeros((), dt, &dev)?;
        let (perc, style) = if w.lambda_p > 0.0 || w.lambda_s > 0.0 {
            let gt_feats: Vec<Tensor> = self
                .extractor
                .features(&b.hr)?
                .into_iter()
                .map(|t| t.detach())
                .collect();
            let pred_feats = self.extractor.features(&pred)?;
            let p = perceptual_from_features(&gt_feats, &pred_feats)?;
            let s = style_from_features(&gt_feats, &pred_feats)?;
            components.push(("perceptual", scalar(&p)?));
            components.push(("style", scalar(&s)?));
            (p, s)
        } else {
            (zero.clone(), zero)
        };
        let g_loss = joint_g2(&rec, &adv, &perc, &style, &w)?;
        let objective = scalar(&g_loss)?;

        let mut checked = components.clone();
        checked.push(("discriminator", d_value));
        checked.push(("objective", objective));
        if let Some(detail) = check_finite(&checked) {
            return Err(self.abort(detail));
        }

        let d_grads = d_loss.backward()?;
        self.opt_d.step(&d_grads, self.d2.store())?;
        let g_grads = g_loss.backward()?;
        self.opt_g.step(&g_grads, self.g2.store())?;

        let lr = self.opt_g.lr;
        self.step += 1;
        if self.plateau.observe(objective) {
            log::info!("image stage: objective plateaued at step {}", self.step);
        }
        let next = stage_lr(&self.cfg, &self.plateau);
        self.opt_g.lr = next;
        self.opt_d.lr = next * self.cfg.d_to_g_lr_ratio;
        let out = StepLosses {
            step: self.step,
            objective,
            discriminator: d_value,
            components,
            lr,
        };
        if let Some(log) = &mut self.log {
            let mut items = out.components.clone();
            items.push(("discriminator", out.discriminator));
            items.push(("objective", out.objective));
            log.record(SR_STAGE, out.step, out.lr, &items)?;
        }
        Ok(out)
    }

    fn abort(&self, detail: String) -> Error {
        let path = checkpoint_path(&self.cfg, &format!("sr-nonfinite-step{}", self.step));
        let dump = self.checkpoint().and_then(|c| c.save(&path)).ok().map(|_| path);
        Error::NonFiniteLoss {
            step: self.step as usize,
            detail,
            dump,
        }
    }

    /// All four networks' state. Fails if the edge generator has changed.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        self.verify_frozen()?;
        let mut c = self.base.clone();
        c.step = self.step;
        c.stage = SR_STAGE.to_string();
        c.config = self.cfg.to_toml_string()?;
        c.insert_store("g2", self.g2.store());
        c.insert_store("d2", self.d2.store());
        self.opt_g.save_into(&mut c, "g2");
        self.opt_d.save_into(&mut c, "d2");
        save_plateau(&mut c, &self.plateau)?;
        Ok(c)
    }

    pub fn run(&mut self, data: &Dataset) -> Result<Checkpoint> {
        while (self.step as usize) < self.cfg.max_steps {
            let s = self.train_step(data)?;
            if s.step % 50 == 0 {
                log::info!("image step {}: objective {:.4} d {:.4}", s.step, s.objective, s.discriminator);
            }
            let every = self.cfg.checkpoint_interval as u64;
            if every > 0 && self.step.is_multiple_of(every) {
                self.checkpoint()?
                    .save(&checkpoint_path(&self.cfg, &format!("sr-step{:07}", self.step)))?;
            }
        }
        let c = self.checkpoint()?;
        c.save(&checkpoint_path(&self.cfg, SR_STAGE))?;
        Ok(c)
    }
}

/// Runs stage 2 from a stage-1 checkpoint, loading the extractor named in the
/// config.
pub fn train_sr_stage(cfg: &TrainConfig, data: &Dataset, stage1: &Checkpoint) -> Result<Checkpoint> {
    let extractor = load_extractor(cfg)?;
    SrTrainer::new(cfg, stage1, Box::new(extractor))?.run(data)
}
