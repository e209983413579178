use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use candle_core::{Device, Tensor};
use safetensors::SafeTensors;
use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "edgesr-checkpoint/1";
const HEADER_KEY: &str = "edgesr";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    step: u64,
    stage: String,
    config: String,
    #[serde(default)]
    extra: BTreeMap<String, String>,
}

/// Named tensors of every network and optimizer plus a small header, stored
/// as one safetensors file.
///
/// Tensor names are `<section>/<name>`, e.g. `g1/encoder.0.weight` or
/// `optim/g1/m/encoder.0.weight`.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub step: u64,
    pub stage: String,
    /// Config snapshot as TOML text.
    pub config: String,
    pub extra: BTreeMap<String, String>,
    tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new(step: u64, stage: impl Into<String>, config: impl Into<String>) -> Self {
        Self {
            step,
            stage: stage.into(),
            config: config.into(),
            extra: BTreeMap::new(),
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    /// All tensors under `section/`, with the prefix removed.
    pub fn section(&self, section: &str) -> BTreeMap<String, Tensor> {
        let prefix = format!("{section}/");
        self.tensors
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(&prefix).map(|n| (n.to_string(), v.clone())))
            .collect()
    }

    pub fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}/");
        self.tensors.keys().any(|k| k.starts_with(&prefix))
    }

    pub fn insert_section(&mut self, section: &str, tensors: BTreeMap<String, Tensor>) {
        for (k, v) in tensors {
            self.tensors.insert(format!("{section}/{k}"), v);
        }
    }

    pub fn insert_store(&mut self, section: &str, store: &ParamStore) {
        self.insert_section(section, store.named_tensors());
    }

    pub fn restore_store(&self, section: &str, store: &ParamStore) -> Result<()> {
        if !self.has_section(section) {
            return Err(Error::Checkpoint(format!("checkpoint has no {section:?} weights")));
        }
        store
            .load(&self.section(section))
            .map_err(|e| Error::Checkpoint(format!("{section}: {e}")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format: FORMAT_TAG.to_string(),
            step: self.step,
            stage: self.stage.clone(),
            config: self.config.clone(),
            extra: self.extra.clone(),
        };
        let text = toml::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let meta = HashMap::from([(HEADER_KEY.to_string(), text)]);
        let contiguous = self
            .tensors
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.contiguous()?)))
            .collect::<Result<Vec<_>>>()?;
        safetensors::serialize(contiguous, Some(meta)).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (_, meta) =
            SafeTensors::read_metadata(bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let text = meta
            .metadata()
            .as_ref()
            .and_then(|m| m.get(HEADER_KEY))
            .ok_or_else(|| Error::Checkpoint("missing checkpoint header".into()))?;
        let header: Header = toml::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if header.format != FORMAT_TAG {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format {:?}, expected {FORMAT_TAG:?}",
                header.format
            )));
        }
        let tensors = candle_core::safetensors::load_buffer(bytes, &Device::Cpu)
            .map_err(|e| Error::Checkpoint(e.to_string()))?
            .into_iter()
            .collect();
        Ok(Self {
            step: header.step,
            stage: header.stage,
            config: header.config,
            extra: header.extra,
            tensors,
        })
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut tmp = PathBuf::from(path);
        tmp.set_extension("tmp");
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
