//! Two-stage training: the edge generator first, then the completion
//! generator with the edge generator frozen.

mod config;
mod data;
mod trainlog;
mod optim;
mod plateau;
mod sample;
mod stages;

pub use config::{TrainConfig, CHECKPOINT_DIR_ENV};
pub use data::Dataset;
pub use trainlog::TrainLog;
pub use optim::Adam;
pub use plateau::Plateau;
pub use sample::{from_hr, make_sample, make_sample_at, SamplePair};
pub use stages::{
    g1_input, load_extractor, random_extractor, train_edge_stage, train_sr_stage, EdgeTrainer, SrTrainer,
    StepLosses, EDGE_STAGE, SR_STAGE,
};

pub(crate) use sample::lr_inputs;
