use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Named trainable parameters plus non-trainable buffers (spectral-norm
/// estimate vectors) of one network.
///
/// Cloning a `Var` shares its storage, so layers keep their own handles and
/// updates made through the store (optimizer steps, checkpoint loads) are
/// visible to them.
#[derive(Debug, Clone)]
pub struct ParamStore {
    params: BTreeMap<String, Var>,
    buffers: BTreeMap<String, Var>,
    device: Device,
    dtype: DType,
}

/// Deterministic parameter initializer.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn normal(&mut self, n: usize, std: f64) -> Vec<f64> {
        let dist = Normal::new(0.0, std).expect("finite std");
        (0..n).map(|_| dist.sample(&mut self.rng)).collect()
    }
}

impl ParamStore {
    pub fn new(device: Device, dtype: DType) -> Self {
        Self {
            params: BTreeMap::new(),
            buffers: BTreeMap::new(),
            device,
            dtype,
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    fn tensor(&self, values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Ok(Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?)
    }

    pub fn add_param(&mut self, name: &str, values: Vec<f64>, shape: &[usize]) -> Result<Var> {
        let var = Var::from_tensor(&self.tensor(values, shape)?)?;
        if self.params.insert(name.to_string(), var.clone()).is_some() {
            return Err(Error::Config(format!("duplicate parameter {name}")));
        }
        Ok(var)
    }

    pub fn add_buffer(&mut self, name: &str, values: Vec<f64>, shape: &[usize]) -> Result<Var> {
        let var = Var::from_tensor(&self.tensor(values, shape)?)?;
        if self.buffers.insert(name.to_string(), var.clone()).is_some() {
            return Err(Error::Config(format!("duplicate buffer {name}")));
        }
        Ok(var)
    }

    /// Trainable parameters in name order.
    pub fn params(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.params.iter()
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(|v| v.elem_count()).sum()
    }

    /// Parameters and buffers under one namespace; buffers carry a `buffer.`
    /// prefix.
    pub fn named_tensors(&self) -> BTreeMap<String, Tensor> {
        let mut out = BTreeMap::new();
        for (k, v) in &self.params {
            out.insert(k.clone(), v.as_tensor().detach());
        }
        for (k, v) in &self.buffers {
            out.insert(format!("buffer.{k}"), v.as_tensor().detach());
        }
        out
    }

    /// Overwrites every parameter and buffer from `tensors`. Names and shapes
    /// must match exactly.
    pub fn load(&self, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        let expected = self.params.len() + self.buffers.len();
        if tensors.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} tensors, found {}",
                tensors.len()
            )));
        }
        let targets = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), v))
            .chain(self.buffers.iter().map(|(k, v)| (format!("buffer.{k}"), v)));
        for (name, var) in targets {
            let src = tensors
                .get(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if src.shape() != var.shape() {
                return Err(Error::Checkpoint(format!(
                    "{name}: shape {:?} does not match {:?}",
                    src.shape(),
                    var.shape()
                )));
            }
            var.set(&src.to_dtype(self.dtype)?.to_device(&self.device)?)?;
        }
        Ok(())
    }

    /// SHA-256 over names, shapes and raw values of all parameters and
    /// buffers.
    pub fn digest(&self) -> Result<String> {
        let mut h = Sha256::new();
        for (name, t) in self.named_tensors() {
            h.update(name.as_bytes());
            h.update(format!("{:?}", t.dims()).as_bytes());
            let values: Vec<f64> = t.to_dtype(DType::F64)?.flatten_all()?.to_vec1()?;
            for v in values {
                h.update(v.to_le_bytes());
            }
        }
        Ok(hex::encode(h.finalize()))
    }
}
