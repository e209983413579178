//! Tensor primitives the networks are built from.
//!
//! Convolution is lowered to `im2col` followed by one matrix product. The
//! `im2col` gather is a custom autograd op whose backward pass is the matching
//! `col2im` scatter-add, so the whole convolution differentiates through two
//! matrix products instead of a transposed convolution.

use std::ops::{AddAssign, Mul};

use candle_core::{
    backend::BackendStorage, CpuStorage, CustomOp1, CustomOp2, Layout, Result, Shape, Tensor, D,
};

/// Square-kernel convolution parameters. `padding` is zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvGeometry {
    pub fn new(kernel: usize, stride: usize, padding: usize, dilation: usize) -> Self {
        Self {
            kernel,
            stride,
            padding,
            dilation,
        }
    }

    /// Output length along one axis, or `None` when the input is too small.
    pub fn output_len(&self, input: usize) -> Option<usize> {
        let span = self.dilation * (self.kernel - 1) + 1;
        let padded = input + 2 * self.padding;
        (padded >= span).then(|| (padded - span) / self.stride + 1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Im2Col {
    geom: ConvGeometry,
}

#[derive(Debug, Clone, Copy)]
struct Col2Im {
    geom: ConvGeometry,
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
}

/// Output columns `ox` whose input column `ox * stride + offset - padding`
/// lies inside `0..w`.
fn valid_range(g: ConvGeometry, offset: usize, w: usize, ow: usize) -> (usize, usize) {
    let (st, pad) = (g.stride as isize, g.padding as isize);
    let shift = offset as isize - pad;
    let lo = if shift >= 0 { 0 } else { (-shift + st - 1) / st };
    let hi = if (w as isize) - shift <= 0 {
        0
    } else {
        ((w as isize - shift - 1) / st + 1).min(ow as isize)
    };
    (lo as usize, (hi.max(lo)) as usize)
}

/// Visits every run of in-bounds taps sharing one output row as
/// `(dst, src, len)`: column-matrix entries `dst..dst + len` read input
/// entries `src, src + stride, ...`.
/// Rows enumerate `(c, ky, kx)`; columns enumerate `(b, oy, ox)`.
fn for_each_run(
    g: ConvGeometry,
    (b, c, h, w): (usize, usize, usize, usize),
    mut f: impl FnMut(usize, usize, usize),
) -> (usize, usize) {
    let oh = g.output_len(h).unwrap_or(0);
    let ow = g.output_len(w).unwrap_or(0);
    let n_cols = b * oh * ow;
    let k = g.kernel;
    for ch in 0..c {
        for ky in 0..k {
            let (oy_lo, oy_hi) = valid_range(g, ky * g.dilation, h, oh);
            for kx in 0..k {
                let row = (ch * k + ky) * k + kx;
                let (ox_lo, ox_hi) = valid_range(g, kx * g.dilation, w, ow);
                if ox_lo >= ox_hi {
                    continue;
                }
                let ix_lo = ox_lo * g.stride + kx * g.dilation - g.padding;
                for bi in 0..b {
                    let plane = (bi * c + ch) * h * w;
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + ky * g.dilation - g.padding;
                        let dst = row * n_cols + (bi * oh + oy) * ow + ox_lo;
                        f(dst, plane + iy * w + ix_lo, ox_hi - ox_lo);
                    }
                }
            }
        }
    }
    (c * k * k, n_cols)
}

fn im2col<T: Copy + Default>(src: &[T], g: ConvGeometry, dims: (usize, usize, usize, usize)) -> (Vec<T>, usize, usize) {
    let (b, c, h, w) = dims;
    let oh = g.output_len(h).unwrap_or(0);
    let ow = g.output_len(w).unwrap_or(0);
    let mut out = vec![T::default(); c * g.kernel * g.kernel * b * oh * ow];
    let st = g.stride;
    let (rows, cols) = for_each_run(g, dims, |dst, s, len| {
        let d = &mut out[dst..dst + len];
        if st == 1 {
            d.copy_from_slice(&src[s..s + len]);
        } else {
            for (i, v) in d.iter_mut().enumerate() {
                *v = src[s + i * st];
            }
        }
    });
    (out, rows, cols)
}

fn col2im<T: Copy + Default + AddAssign>(cols: &[T], g: ConvGeometry, dims: (usize, usize, usize, usize)) -> Vec<T> {
    let (b, c, h, w) = dims;
    let mut out = vec![T::default(); b * c * h * w];
    let st = g.stride;
    for_each_run(g, dims, |dst, s, len| {
        let from = &cols[dst..dst + len];
        if st == 1 {
            for (o, v) in out[s..s + len].iter_mut().zip(from) {
                *o += *v;
            }
        } else {
            for (i, v) in from.iter().enumerate() {
                out[s + i * st] += *v;
            }
        }
    });
    out
}

fn contiguous_slice<'a, T>(data: &'a [T], layout: &Layout) -> Result<&'a [T]> {
    match layout.contiguous_offsets() {
        Some((start, end)) => Ok(&data[start..end]),
        None => candle_core::bail!("expected a contiguous tensor"),
    }
}

impl CustomOp1 for Im2Col {
    fn name(&self) -> &'static str {
        "im2col"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> Result<(CpuStorage, Shape)> {
        let dims = layout.shape().dims4()?;
        let (storage, rows, cols) = match storage {
            CpuStorage::F32(v) => {
                let (o, r, c) = im2col(contiguous_slice(v, layout)?, self.geom, dims);
                (CpuStorage::F32(o), r, c)
            }
            CpuStorage::F64(v) => {
                let (o, r, c) = im2col(contiguous_slice(v, layout)?, self.geom, dims);
                (CpuStorage::F64(o), r, c)
            }
            other => candle_core::bail!("im2col: unsupported dtype {:?}", other.dtype()),
        };
        Ok((storage, Shape::from((rows, cols))))
    }

    fn bwd(&self, arg: &Tensor, _res: &Tensor, grad_res: &Tensor) -> Result<Option<Tensor>> {
        let (batch, channels, height, width) = arg.dims4()?;
        let op = Col2Im {
            geom: self.geom,
            batch,
            channels,
            height,
            width,
        };
        Ok(Some(grad_res.contiguous()?.apply_op1(op)?))
    }
}

impl CustomOp1 for Col2Im {
    fn name(&self) -> &'static str {
        "col2im"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> Result<(CpuStorage, Shape)> {
        let dims = (self.batch, self.channels, self.height, self.width);
        let out = match storage {
            CpuStorage::F32(v) => CpuStorage::F32(col2im(contiguous_slice(v, layout)?, self.geom, dims)),
            CpuStorage::F64(v) => CpuStorage::F64(col2im(contiguous_slice(v, layout)?, self.geom, dims)),
            other => candle_core::bail!("col2im: unsupported dtype {:?}", other.dtype()),
        };
        Ok((out, Shape::from(dims)))
    }

    fn bwd(&self, _arg: &Tensor, _res: &Tensor, grad_res: &Tensor) -> Result<Option<Tensor>> {
        Ok(Some(grad_res.contiguous()?.apply_op1(Im2Col { geom: self.geom })?))
    }
}

/// One run of taps within a single input/output plane pair, as
/// `(kernel index, output offset, input offset, len)`.
type PlaneRun = (usize, usize, usize, usize);

fn plane_runs(g: ConvGeometry, h: usize, w: usize) -> (Vec<PlaneRun>, usize, usize) {
    let oh = g.output_len(h).unwrap_or(0);
    let ow = g.output_len(w).unwrap_or(0);
    let mut runs = Vec::new();
    for ky in 0..g.kernel {
        let (oy_lo, oy_hi) = valid_range(g, ky * g.dilation, h, oh);
        for kx in 0..g.kernel {
            let (ox_lo, ox_hi) = valid_range(g, kx * g.dilation, w, ow);
            if ox_lo >= ox_hi {
                continue;
            }
            let ix_lo = ox_lo * g.stride + kx * g.dilation - g.padding;
            for oy in oy_lo..oy_hi {
                let iy = oy * g.stride + ky * g.dilation - g.padding;
                runs.push((ky * g.kernel + kx, oy * ow + ox_lo, iy * w + ix_lo, ox_hi - ox_lo));
            }
        }
    }
    (runs, oh, ow)
}

trait Element: Copy + Default + AddAssign + Mul<Output = Self> {}
impl Element for f32 {}
impl Element for f64 {}

/// `y[b, o] += Σ_c w[o, c] ⋆ x[b, c]` by shifted multiply-adds.
fn direct_forward<T: Element>(x: &[T], wt: &[T], g: ConvGeometry, (b, c, h, w): (usize, usize, usize, usize), o: usize) -> Vec<T> {
    let (runs, oh, ow) = plane_runs(g, h, w);
    let kk = g.kernel * g.kernel;
    let st = g.stride;
    let mut y = vec![T::default(); b * o * oh * ow];
    for bi in 0..b {
        for oi in 0..o {
            let yp = &mut y[(bi * o + oi) * oh * ow..][..oh * ow];
            for ci in 0..c {
                let xp = &x[(bi * c + ci) * h * w..][..h * w];
                let wk = &wt[(oi * c + ci) * kk..][..kk];
                for &(k, yo, xo, len) in &runs {
                    let wv = wk[k];
                    let dst = &mut yp[yo..yo + len];
                    if st == 1 {
                        for (d, v) in dst.iter_mut().zip(&xp[xo..xo + len]) {
                            *d += wv * *v;
                        }
                    } else {
                        for (i, d) in dst.iter_mut().enumerate() {
                            *d += wv * xp[xo + i * st];
                        }
                    }
                }
            }
        }
    }
    y
}

fn direct_input_grad<T: Element>(gy: &[T], wt: &[T], g: ConvGeometry, (b, c, h, w): (usize, usize, usize, usize), o: usize) -> Vec<T> {
    let (runs, oh, ow) = plane_runs(g, h, w);
    let kk = g.kernel * g.kernel;
    let st = g.stride;
    let mut gx = vec![T::default(); b * c * h * w];
    for bi in 0..b {
        for ci in 0..c {
            let xp = &mut gx[(bi * c + ci) * h * w..][..h * w];
            for oi in 0..o {
                let yp = &gy[(bi * o + oi) * oh * ow..][..oh * ow];
                let wk = &wt[(oi * c + ci) * kk..][..kk];
                for &(k, yo, xo, len) in &runs {
                    let wv = wk[k];
                    let src = &yp[yo..yo + len];
                    if st == 1 {
                        for (d, v) in xp[xo..xo + len].iter_mut().zip(src) {
                            *d += wv * *v;
                        }
                    } else {
                        for (i, v) in src.iter().enumerate() {
                            xp[xo + i * st] += wv * *v;
                        }
                    }
                }
            }
        }
    }
    gx
}

fn direct_weight_grad<T: Element>(gy: &[T], x: &[T], g: ConvGeometry, (b, c, h, w): (usize, usize, usize, usize), o: usize) -> Vec<T> {
    let (runs, oh, ow) = plane_runs(g, h, w);
    let kk = g.kernel * g.kernel;
    let st = g.stride;
    let mut gw = vec![T::default(); o * c * kk];
    for bi in 0..b {
        for oi in 0..o {
            let yp = &gy[(bi * o + oi) * oh * ow..][..oh * ow];
            for ci in 0..c {
                let xp = &x[(bi * c + ci) * h * w..][..h * w];
                let wk = &mut gw[(oi * c + ci) * kk..][..kk];
                for &(k, yo, xo, len) in &runs {
                    let src = &yp[yo..yo + len];
                    let mut acc = T::default();
                    if st == 1 {
                        for (a, v) in src.iter().zip(&xp[xo..xo + len]) {
                            acc += *a * *v;
                        }
                    } else {
                        for (i, a) in src.iter().enumerate() {
                            acc += *a * xp[xo + i * st];
                        }
                    }
                    wk[k] += acc;
                }
            }
        }
    }
    gw
}

#[derive(Debug, Clone, Copy)]
enum DirectKind {
    Forward,
    InputGrad { height: usize, width: usize },
    WeightGrad { kernel: usize },
}

/// Shift-and-accumulate convolution for layers with few channels, where the
/// column matrix would dwarf the arithmetic.
#[derive(Debug, Clone, Copy)]
struct DirectConv {
    geom: ConvGeometry,
    kind: DirectKind,
}

impl DirectConv {
    fn run<T: Element>(&self, a: &[T], a_dims: &[usize], bb: &[T], b_dims: &[usize]) -> Result<(Vec<T>, Shape)> {
        let g = self.geom;
        match self.kind {
            DirectKind::Forward => {
                let (n, c, h, w) = (a_dims[0], a_dims[1], a_dims[2], a_dims[3]);
                let o = b_dims[0];
                let oh = g.output_len(h).unwrap_or(0);
                let ow = g.output_len(w).unwrap_or(0);
                Ok((direct_forward(a, bb, g, (n, c, h, w), o), Shape::from((n, o, oh, ow))))
            }
            DirectKind::InputGrad { height, width } => {
                let (n, o) = (a_dims[0], a_dims[1]);
                let c = b_dims[1];
                let dims = (n, c, height, width);
                Ok((direct_input_grad(a, bb, g, dims, o), Shape::from(dims)))
            }
            DirectKind::WeightGrad { kernel } => {
                let (n, o) = (a_dims[0], a_dims[1]);
                let (c, h, w) = (b_dims[1], b_dims[2], b_dims[3]);
                Ok((
                    direct_weight_grad(a, bb, g, (n, c, h, w), o),
                    Shape::from((o, c, kernel, kernel)),
                ))
            }
        }
    }
}

impl CustomOp2 for DirectConv {
    fn name(&self) -> &'static str {
        "direct-conv"
    }

    fn cpu_fwd(&self, s1: &CpuStorage, l1: &Layout, s2: &CpuStorage, l2: &Layout) -> Result<(CpuStorage, Shape)> {
        let (d1, d2) = (l1.shape().dims(), l2.shape().dims());
        match (s1, s2) {
            (CpuStorage::F32(a), CpuStorage::F32(b)) => {
                let (v, s) = self.run(contiguous_slice(a, l1)?, d1, contiguous_slice(b, l2)?, d2)?;
                Ok((CpuStorage::F32(v), s))
            }
            (CpuStorage::F64(a), CpuStorage::F64(b)) => {
                let (v, s) = self.run(contiguous_slice(a, l1)?, d1, contiguous_slice(b, l2)?, d2)?;
                Ok((CpuStorage::F64(v), s))
            }
            _ => candle_core::bail!("direct-conv: unsupported dtypes {:?}, {:?}", s1.dtype(), s2.dtype()),
        }
    }

    fn bwd(&self, x: &Tensor, w: &Tensor, _res: &Tensor, grad: &Tensor) -> Result<(Option<Tensor>, Option<Tensor>)> {
        if !matches!(self.kind, DirectKind::Forward) {
            candle_core::bail!("direct-conv gradients are not differentiable");
        }
        let (_, _, h, wd) = x.dims4()?;
        let grad = grad.contiguous()?;
        let gx = grad.apply_op2(
            &w.contiguous()?,
            DirectConv {
                geom: self.geom,
                kind: DirectKind::InputGrad { height: h, width: wd },
            },
        )?;
        let gw = grad.apply_op2(
            &x.contiguous()?,
            DirectConv {
                geom: self.geom,
                kind: DirectKind::WeightGrad { kernel: self.geom.kernel },
            },
        )?;
        Ok((Some(gx), Some(gw)))
    }
}

/// Channel-product threshold below which convolutions skip the column matrix.
const DIRECT_MAX_CHANNEL_PRODUCT: usize = 256;

/// 2-D convolution of `x: (B, C, H, W)` with `weight: (O, C, k, k)`.
pub fn conv2d(x: &Tensor, weight: &Tensor, bias: Option<&Tensor>, geom: ConvGeometry) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let (o, wc, kh, kw) = weight.dims4()?;
    if wc != c || kh != geom.kernel || kw != geom.kernel {
        candle_core::bail!(
            "conv2d: input has {c} channels, weight is {o}x{wc}x{kh}x{kw}, kernel {}",
            geom.kernel
        );
    }
    let (Some(oh), Some(ow)) = (geom.output_len(h), geom.output_len(w)) else {
        candle_core::bail!("conv2d: {h}x{w} input too small for {geom:?}");
    };
    let y = convolve(x, weight, geom, c * o <= DIRECT_MAX_CHANNEL_PRODUCT, (b, c, oh, ow, o))?;
    match bias {
        Some(bias) => y.broadcast_add(&bias.reshape((1, o, 1, 1))?),
        None => Ok(y),
    }
}

fn convolve(x: &Tensor, weight: &Tensor, geom: ConvGeometry, direct: bool, dims: (usize, usize, usize, usize, usize)) -> Result<Tensor> {
    if direct {
        x.contiguous()?.apply_op2(&weight.contiguous()?, DirectConv { geom, kind: DirectKind::Forward })
    } else {
        lowered_conv(x, weight, geom, dims)
    }
}

fn lowered_conv(x: &Tensor, weight: &Tensor, geom: ConvGeometry, (b, c, oh, ow, o): (usize, usize, usize, usize, usize)) -> Result<Tensor> {
    let cols = x.contiguous()?.apply_op1(Im2Col { geom })?;
    weight
        .reshape((o, c * geom.kernel * geom.kernel))?
        .matmul(&cols)?
        .reshape((o, b, oh, ow))?
        .transpose(0, 1)?
        .contiguous()
}

fn reflect_indices(n: usize, pad: usize) -> Vec<u32> {
    (-(pad as isize)..(n + pad) as isize)
        .map(|i| crate::imaging::reflect_index(i, n) as u32)
        .collect()
}

/// Mirror padding (border sample not repeated) on the last two dims. Pads
/// wider than the input keep reflecting back and forth.
pub fn reflect_pad(x: &Tensor, pad: usize) -> Result<Tensor> {
    if pad == 0 {
        return Ok(x.clone());
    }
    let (_, _, h, w) = x.dims4()?;
    let dev = x.device();
    let rows = Tensor::new(reflect_indices(h, pad), dev)?;
    let cols = Tensor::new(reflect_indices(w, pad), dev)?;
    x.index_select(&rows, 2)?.index_select(&cols, 3)
}

pub const INSTANCE_NORM_EPS: f64 = 1e-5;

/// Per-sample, per-channel normalization over the spatial dims, without the
/// affine part.
pub fn instance_normalize(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let flat = x.reshape((b, c, h * w))?;
    let mean = flat.mean_keepdim(D::Minus1)?;
    let centered = flat.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
    let scale = (var + INSTANCE_NORM_EPS)?.sqrt()?;
    centered.broadcast_div(&scale)?.reshape((b, c, h, w))
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    let pos = x.relu()?;
    let neg = x.neg()?.relu()?;
    pos - (neg * slope)?
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    (x.neg()?.exp()? + 1.0)?.recip()
}

/// Nearest-neighbor 2× enlargement of the last two dims.
pub fn upsample_nearest2x(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    x.reshape((b, c, h, 1, w, 1))?
        .broadcast_as((b, c, h, 2, w, 2))?
        .reshape((b, c, 2 * h, 2 * w))
}

/// `x / ‖x‖₂` with a small floor on the norm.
pub fn l2_normalize(x: &Tensor) -> Result<Tensor> {
    let norm = x.sqr()?.sum_all()?.sqrt()?;
    let norm = (norm + 1e-12)?;
    x.broadcast_div(&norm)
}
