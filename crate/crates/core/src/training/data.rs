use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{read_png, ImageTensor};

use super::sample::{make_sample, make_sample_at, SamplePair};
use super::TrainConfig;

/// Named HR training images, all at least `hr_size` on each side.
#[derive(Debug, Clone)]
pub struct Dataset {
    items: Vec<(String, ImageTensor)>,
}

impl Dataset {
    /// Keeps RGB images at least `min_size` on each side; anything else is
    /// dropped with a warning.
    pub fn from_images(images: Vec<(String, ImageTensor)>, min_size: usize) -> Result<Self> {
        let items: Vec<_> = images
            .into_iter()
            .filter(|(name, img)| {
                let ok = img.height() >= min_size && img.width() >= min_size && img.channels() == 3;
                if !ok {
                    log::warn!(
                        "skipping {name}: {}x{}x{} is not an RGB image of at least {min_size}x{min_size}",
                        img.height(),
                        img.width(),
                        img.channels()
                    );
                }
                ok
            })
            .collect();
        if items.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { items })
    }

    /// Reads every PNG in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path, min_size: usize) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        paths.sort();
        let mut images = Vec::with_capacity(paths.len());
        for p in paths {
            match read_png(&p) {
                Ok(img) => {
                    let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    images.push((name, img));
                }
                Err(e) => log::warn!("skipping unreadable image: {e}"),
            }
        }
        Self::from_images(images, min_size)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(String, ImageTensor)] {
        &self.items
    }

    /// Dataset indices of the batch used at `step`. Each epoch visits every
    /// image once in a seeded random order.
    pub fn batch_indices(&self, seed: u64, step: u64, batch_size: usize) -> Vec<usize> {
        let n = self.items.len() as u64;
        let mut cached: Option<(u64, Vec<usize>)> = None;
        (0..batch_size as u64)
            .map(|i| {
                let g = step * batch_size as u64 + i;
                let epoch = g / n;
                if cached.as_ref().map(|c| c.0) != Some(epoch) {
                    cached = Some((epoch, epoch_order(seed, epoch, self.items.len())));
                }
                cached.as_ref().expect("just set").1[(g % n) as usize]
            })
            .collect()
    }

    /// The training samples for `step`: random crops when configured,
    /// otherwise center crops.
    pub fn batch(&self, cfg: &TrainConfig, step: u64) -> Result<Vec<SamplePair>> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6372_6f70);
        rng.set_stream(step);
        self.batch_indices(cfg.seed, step, cfg.batch_size)
            .into_iter()
            .map(|i| {
                let img = &self.items[i].1;
                if cfg.random_crop {
                    let top = rng.random_range(0..=img.height() - cfg.hr_size);
                    let left = rng.random_range(0..=img.width() - cfg.hr_size);
                    make_sample_at(img, cfg, top, left)
                } else {
                    make_sample(img, cfg)
                }
            })
            .collect()
    }

    /// Center-cropped samples of every image, in dataset order.
    pub fn evaluation_samples(&self, cfg: &TrainConfig) -> Result<Vec<SamplePair>> {
        self.items.iter().map(|(_, img)| make_sample(img, cfg)).collect()
    }
}

fn epoch_order(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}
