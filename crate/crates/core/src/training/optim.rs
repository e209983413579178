use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::{DType, Tensor};

use crate::error::{Error, Result};
use crate::networks::{Checkpoint, ParamStore};

/// Adam with bias correction. Moment estimates are keyed by parameter name.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn betas(&self) -> (f64, f64) {
        (self.beta1, self.beta2)
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to every parameter of `store` that received a
    /// gradient.
    pub fn step(&mut self, grads: &GradStore, store: &ParamStore) -> Result<()> {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, var) in store.params() {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            let g = &g.detach();
            let m = match self.m.get(name) {
                Some(m) => ((m * self.beta1)? + (g * (1.0 - self.beta1))?)?,
                None => (g * (1.0 - self.beta1))?,
            };
            let v = match self.v.get(name) {
                Some(v) => ((v * self.beta2)? + (g.sqr()? * (1.0 - self.beta2))?)?,
                None => (g.sqr()? * (1.0 - self.beta2))?,
            };
            let denom = ((&v / c2)?.sqrt()? + self.eps)?;
            let update = ((&m / c1)? / denom)?;
            var.set(&(var.as_tensor() - (update * self.lr)?)?)?;
            self.m.insert(name.clone(), m);
            self.v.insert(name.clone(), v);
        }
        Ok(())
    }

    /// Stores moments under `optim/<section>/m|v/<param>` and hyperparameters
    /// in the checkpoint header.
    pub fn save_into(&self, ckpt: &mut Checkpoint, section: &str) {
        ckpt.insert_section(&format!("optim/{section}/m"), self.m.clone());
        ckpt.insert_section(&format!("optim/{section}/v"), self.v.clone());
        let key = |k: &str| format!("optim.{section}.{k}");
        ckpt.extra.insert(key("lr"), self.lr.to_string());
        ckpt.extra.insert(key("beta1"), self.beta1.to_string());
        ckpt.extra.insert(key("beta2"), self.beta2.to_string());
        ckpt.extra.insert(key("eps"), self.eps.to_string());
        ckpt.extra.insert(key("t"), self.t.to_string());
    }

    pub fn load_from(ckpt: &Checkpoint, section: &str, store: &ParamStore) -> Result<Self> {
        let get = |k: &str| -> Result<&String> {
            let key = format!("optim.{section}.{k}");
            ckpt.extra
                .get(&key)
                .ok_or_else(|| Error::Checkpoint(format!("missing optimizer field {key}")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad optimizer field {k}")))
        };
        let t: u64 = get("t")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad optimizer step".into()))?;
        let convert = |map: BTreeMap<String, Tensor>| -> Result<BTreeMap<String, Tensor>> {
            map.into_iter()
                .map(|(k, v)| Ok((k, v.to_dtype(store.dtype())?.to_device(store.device())?)))
                .collect()
        };
        let m = convert(ckpt.section(&format!("optim/{section}/m")))?;
        let v = convert(ckpt.section(&format!("optim/{section}/v")))?;
        Ok(Self {
            lr: num("lr")?,
            beta1: num("beta1")?,
            beta2: num("beta2")?,
            eps: num("eps")?,
            t,
            m,
            v,
        })
    }

    /// Second-moment estimate for one parameter, as `f64` values.
    pub fn second_moment(&self, name: &str) -> Result<Option<Vec<f64>>> {
        self.v
            .get(name)
            .map(|v| Ok(v.to_dtype(DType::F64)?.flatten_all()?.to_vec1()?))
            .transpose()
    }
}
