use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use edgesr::imaging::{canny, gray_to_rgb, read_edge_png, read_png, to_grayscale, write_edge_png, write_png};
use edgesr::metrics::ImageMetrics;
use edgesr::training::{
    load_extractor, train_edge_stage, Dataset, EdgeTrainer, SrTrainer, EDGE_STAGE, SR_STAGE,
};
use edgesr::{
    baseline_upscale, degrade_pair, edge_precision_recall, psnr, reference, ssim, Checkpoint, ImageTensor, Method,
    MetricsReport, SuperResolver, TrainConfig, Vgg19,
};
use log::{info, warn};

use crate::{BaselineArg, Common, StageArg};

fn config(common: &Common) -> Result<TrainConfig> {
    let mut cfg = match &common.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = common.scale {
        cfg.scale = s;
    }
    if let Some(s) = common.sigma_canny {
        cfg.canny_sigma = s;
    }
    if let Some(s) = common.sigma_blur {
        cfg.degrade_sigma = s;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// PNG files in `dir`, sorted by name.
fn pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

fn rgb(img: ImageTensor) -> Result<ImageTensor> {
    Ok(if img.channels() == 1 { gray_to_rgb(&img)? } else { img })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn degrade(common: &Common, input: &Path, output: &Path) -> Result<()> {
    let cfg = config(common)?;
    std::fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    let mut manifest = csv::Writer::from_path(output.join("manifest.csv"))?;
    manifest.write_record(["lr", "hr", "scale", "sigma_blur"])?;
    let mut written = 0;
    for path in pngs(input)? {
        let hr = match read_png(&path) {
            Ok(img) => img,
            Err(e) => {
                warn!("skipping {e}");
                continue;
            }
        };
        let (_, lr) = match degrade_pair(&hr, cfg.scale, cfg.degrade_sigma) {
            Ok(pair) => pair,
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        let name = format!("{}.png", stem(&path));
        write_png(&lr, output.join(&name))?;
        let hr_name = path.file_name().unwrap_or_default().to_string_lossy();
        manifest.write_record([
            name.as_str(),
            hr_name.as_ref(),
            &cfg.scale.factor().to_string(),
            &cfg.degrade_sigma.to_string(),
        ])?;
        written += 1;
    }
    manifest.flush()?;
    ensure!(written > 0, "no readable PNG images in {}", input.display());
    info!("wrote {written} LR images to {}", output.display());
    Ok(())
}

pub fn train(
    common: &Common,
    data_dir: &Path,
    stage: StageArg,
    checkpoint: Option<&Path>,
    resume: bool,
    steps: Option<usize>,
) -> Result<()> {
    let mut cfg = config(common)?;
    if let Some(n) = steps {
        cfg.max_steps = n;
    }
    let data = Dataset::load_dir(data_dir, cfg.hr_size)?;
    info!("{} training images", data.len());
    let load = |p: Option<&Path>| -> Result<Checkpoint> {
        let p = p.context("--checkpoint is required here")?;
        Ok(Checkpoint::load(p)?)
    };

    if resume {
        let ckpt = load(checkpoint)?;
        ensure!(ckpt.stage == EDGE_STAGE || ckpt.stage == SR_STAGE, "unknown stage {:?}", ckpt.stage);
        let stage1 = if ckpt.stage == EDGE_STAGE {
            EdgeTrainer::resume(&cfg, &ckpt)?.run(&data)?
        } else {
            return finish(SrTrainer::resume(&cfg, &ckpt, Box::new(load_extractor(&cfg)?))?.run(&data)?);
        };
        if stage == StageArg::Both {
            return finish(SrTrainer::new(&cfg, &stage1, Box::new(load_extractor(&cfg)?))?.run(&data)?);
        }
        return finish(stage1);
    }

    match stage {
        StageArg::Edge => finish(train_edge_stage(&cfg, &data)?),
        StageArg::Sr => {
            let stage1 = load(checkpoint)?;
            finish(SrTrainer::new(&cfg, &stage1, Box::new(load_extractor(&cfg)?))?.run(&data)?)
        }
        StageArg::Both => {
            // Fail on a missing extractor before spending time on stage 1.
            let extractor = load_extractor(&cfg)?;
            let stage1 = train_edge_stage(&cfg, &data)?;
            finish(SrTrainer::new(&cfg, &stage1, Box::new(extractor))?.run(&data)?)
        }
    }
}

fn finish(ckpt: Checkpoint) -> Result<()> {
    info!("{} stage finished at step {}", ckpt.stage, ckpt.step);
    Ok(())
}

pub fn infer(common: &Common, checkpoint: &Path, input: &Path, out: &Path, baselines: bool) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut resolver = SuperResolver::from_checkpoint(&ckpt)?;
    if let Some(s) = common.scale {
        ensure!(
            s == resolver.scale(),
            "checkpoint was trained for {}, but --scale asks for {s}",
            resolver.scale()
        );
    }
    if let Some(sigma) = common.sigma_canny {
        resolver = SuperResolver::new(
            resolver.edge_generator().clone(),
            resolver.completion_generator().clone(),
            resolver.scale(),
            sigma,
        );
    }
    let lr = read_png(input)?;
    let p = resolver.predict(&lr)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_png(&p.sr, with_suffix(out, "_sr.png"))?;
    write_edge_png(&p.edges, with_suffix(out, "_edges.png"))?;
    if baselines {
        let lr = rgb(lr)?;
        for (method, suffix) in [(Method::Bicubic, "_bicubic.png"), (Method::Nearest, "_nearest.png")] {
            write_png(&baseline_upscale(&lr, resolver.scale(), method)?, with_suffix(out, suffix))?;
        }
    }
    info!("wrote {}_sr.png ({}x{})", out.display(), p.sr.width(), p.sr.height());
    Ok(())
}

/// `dir/<stem>.png`, else `dir/<stem><suffix>.png`.
fn paired(dir: &Path, stem: &str, suffix: &str) -> Option<PathBuf> {
    [format!("{stem}.png"), format!("{stem}{suffix}.png")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

pub fn evaluate(
    common: &Common,
    gt_dir: &Path,
    pred_dir: Option<&Path>,
    method: Option<BaselineArg>,
    edges_dir: Option<&Path>,
    dataset: Option<String>,
    out: &Path,
) -> Result<()> {
    let cfg = config(common)?;
    let scale = cfg.scale;
    let dataset = dataset.unwrap_or_else(|| stem(gt_dir));
    let method_name = match method {
        Some(BaselineArg::Bicubic) => "bicubic".to_string(),
        Some(BaselineArg::Nearest) => "nearest".to_string(),
        None => "predictions".to_string(),
    };
    let mut report = MetricsReport::new(&dataset, scale, &method_name);
    let mut unpaired = Vec::new();
    for gt_path in pngs(gt_dir)? {
        let id = stem(&gt_path);
        let gt = rgb(read_png(&gt_path)?)?;
        let (gt, pred) = match (method, pred_dir) {
            (Some(m), _) => {
                let (hr, lr) = degrade_pair(&gt, scale, cfg.degrade_sigma)?;
                let m = if m == BaselineArg::Bicubic { Method::Bicubic } else { Method::Nearest };
                let up = baseline_upscale(&lr, scale, m)?;
                (hr, up)
            }
            (None, Some(dir)) => {
                let Some(p) = paired(dir, &id, "_sr") else {
                    unpaired.push(id);
                    continue;
                };
                let pred = rgb(read_png(&p)?)?;
                let gt = if pred.dim() != gt.dim() && pred.dim() == gt.mod_crop(scale.factor())?.dim() {
                    gt.mod_crop(scale.factor())?
                } else {
                    gt
                };
                ensure!(
                    pred.dim() == gt.dim(),
                    "{id}: prediction is {:?}, ground truth {:?}",
                    pred.dim(),
                    gt.dim()
                );
                (gt, pred)
            }
            (None, None) => bail!("either --pred or --method is required"),
        };
        let (precision, recall) = match edges_dir {
            Some(dir) => {
                let Some(p) = paired(dir, &id, "_edges") else {
                    unpaired.push(format!("{id} (edges)"));
                    continue;
                };
                let pred_edges = read_edge_png(&p)?;
                let gt_edges = canny(&to_grayscale(&gt)?, cfg.canny_sigma)?;
                let (p, r) = edge_precision_recall(&pred_edges, &gt_edges)
                    .with_context(|| format!("{id}: edge map size"))?;
                (Some(p), Some(r))
            }
            None => (None, None),
        };
        report.push(ImageMetrics {
            image_id: id,
            psnr_db: psnr(&pred, &gt)?,
            ssim: ssim(&pred, &gt)?,
            precision,
            recall,
        })?;
    }
    for id in &unpaired {
        warn!("no prediction for {id}");
    }
    ensure!(!report.rows().is_empty(), "no image pairs to evaluate in {}", gt_dir.display());

    let text = report.render_text(&reference::lookup(&dataset, scale));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    report.write_csv(std::fs::File::create(with_suffix(out, ".csv"))?)?;
    std::fs::write(with_suffix(out, ".txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn init_extractor(out: &Path, width_divisor: usize, seed: u64) -> Result<()> {
    let (dev, dt) = edgesr::networks::default_device();
    let vgg = Vgg19::random(width_divisor, seed, &dev, dt)?;
    vgg.save(out)?;
    info!("wrote random extractor to {}", out.display());
    Ok(())
}
