use candle_core::{Tensor, Var};

use super::ops::{conv2d, instance_normalize, l2_normalize, reflect_pad, ConvGeometry};
use super::params::{Init, ParamStore};
use super::Mode;
use crate::error::Result;

pub const INIT_STD: f64 = 0.02;

/// Power-iteration estimate of a weight's largest singular value. The left
/// singular vector estimate `u` persists across calls as a buffer and is
/// refined once per training-mode forward pass.
#[derive(Debug, Clone)]
pub struct SpectralNorm {
    u: Var,
}

impl SpectralNorm {
    pub fn new(store: &mut ParamStore, name: &str, rows: usize, init: &mut Init) -> Result<Self> {
        let raw = init.normal(rows, 1.0);
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let u = store.add_buffer(
            &format!("{name}.weight_u"),
            raw.into_iter().map(|v| v / norm).collect(),
            &[rows],
        )?;
        Ok(Self { u })
    }

    /// `weight / σ̂`, where `σ̂ = uᵀ W v` with `u`, `v` held constant.
    pub fn apply(&self, weight: &Tensor, mode: Mode) -> Result<Tensor> {
        let rows = weight.dim(0)?;
        let mat = weight.reshape((rows, ()))?;
        let fixed = mat.detach();
        let mut u = self.u.as_tensor().detach().reshape((rows, 1))?;
        if mode == Mode::Train {
            let v = l2_normalize(&fixed.t()?.matmul(&u)?)?;
            u = l2_normalize(&fixed.matmul(&v)?)?;
            self.u.set(&u.reshape(rows)?)?;
        }
        let v = l2_normalize(&fixed.t()?.matmul(&u)?)?;
        let sigma = u.t()?.matmul(&mat.matmul(&v)?)?;
        Ok(weight.broadcast_div(&sigma.reshape((1, 1, 1, 1))?)?)
    }

    pub fn u(&self) -> &Var {
        &self.u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zero(usize),
    Reflect(usize),
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    weight: Var,
    bias: Var,
    spectral: Option<SpectralNorm>,
    geom: ConvGeometry,
    reflect: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        init: &mut Init,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        dilation: usize,
        spectral: bool,
    ) -> Result<Self> {
        let n = out_channels * in_channels * kernel * kernel;
        let weight = store.add_param(
            &format!("{name}.weight"),
            init.normal(n, INIT_STD),
            &[out_channels, in_channels, kernel, kernel],
        )?;
        let bias = store.add_param(&format!("{name}.bias"), vec![0.0; out_channels], &[out_channels])?;
        let spectral = if spectral {
            Some(SpectralNorm::new(store, name, out_channels, init)?)
        } else {
            None
        };
        let (zero, reflect) = match padding {
            Padding::Zero(p) => (p, 0),
            Padding::Reflect(p) => (0, p),
        };
        Ok(Self {
            weight,
            bias,
            spectral,
            geom: ConvGeometry::new(kernel, stride, zero, dilation),
            reflect,
        })
    }

    /// The weight actually used in the convolution: spectrally normalized
    /// when enabled, and detached from the graph in eval mode.
    pub fn effective_weight(&self, mode: Mode) -> Result<Tensor> {
        let w = match mode {
            Mode::Train => self.weight.as_tensor().clone(),
            Mode::Eval => self.weight.as_tensor().detach(),
        };
        match &self.spectral {
            Some(sn) => sn.apply(&w, mode),
            None => Ok(w),
        }
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let w = self.effective_weight(mode)?;
        let b = match mode {
            Mode::Train => self.bias.as_tensor().clone(),
            Mode::Eval => self.bias.as_tensor().detach(),
        };
        let x = reflect_pad(x, self.reflect)?;
        Ok(conv2d(&x, &w, Some(&b), self.geom)?)
    }

    pub fn geometry(&self) -> ConvGeometry {
        self.geom
    }

    /// Total padding on each side (reflect or zero).
    pub fn padding(&self) -> usize {
        self.reflect + self.geom.padding
    }

    pub fn spectral(&self) -> Option<&SpectralNorm> {
        self.spectral.as_ref()
    }

    pub fn weight(&self) -> &Var {
        &self.weight
    }
}

/// Instance normalization with learned per-channel scale and shift.
#[derive(Debug, Clone)]
pub struct InstanceNorm {
    gamma: Var,
    beta: Var,
}

impl InstanceNorm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.add_param(&format!("{name}.gamma"), vec![1.0; channels], &[channels])?,
            beta: store.add_param(&format!("{name}.beta"), vec![0.0; channels], &[channels])?,
        })
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let c = x.dim(1)?;
        let (g, b) = match mode {
            Mode::Train => (self.gamma.as_tensor().clone(), self.beta.as_tensor().clone()),
            Mode::Eval => (self.gamma.as_tensor().detach(), self.beta.as_tensor().detach()),
        };
        let y = instance_normalize(x)?;
        Ok(y
            .broadcast_mul(&g.reshape((1, c, 1, 1))?)?
            .broadcast_add(&b.reshape((1, c, 1, 1))?)?)
    }
}
