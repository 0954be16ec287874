//! Dense `f32` tensors and the inference-only operators both CNN graphs are
//! built from.
//!
//! Rank-4 tensors are laid out batch × channel × height × width. Every
//! operator is a pure function of its inputs; reductions run in a fixed order
//! so repeated calls are bit-identical.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A dense row-major tensor of rank 1 to 4.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(Error::InvalidShape(alloc::format!("rank must be 1..=4, got {}", shape.len())));
        }
        if let Some(pos) = shape.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(alloc::format!("dimension {pos} is zero")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidShape(alloc::format!("shape {:?} needs {} elements, got {}", shape, expected, data.len())));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![value; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false: every dimension is at least one.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Splits a rank-4 tensor into `(n, c, h, w)`.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match *self.shape.as_slice() {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::ShapeMismatch { what: "rank", expected: 4, actual: self.rank() }),
        }
    }

    /// Stacks equally shaped tensors along a new leading axis, or along the
    /// existing batch axis for rank-4 inputs.
    pub fn concat_batch(parts: &[Tensor]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidShape("cannot stack zero tensors".into()))?;
        let (_, c, h, w) = first.dims4()?;
        let mut n = 0;
        let mut data = Vec::with_capacity(parts.iter().map(Tensor::len).sum());
        for p in parts {
            let (pn, pc, ph, pw) = p.dims4()?;
            check_dim("channels", c, pc)?;
            check_dim("height", h, ph)?;
            check_dim("width", w, pw)?;
            n += pn;
            data.extend_from_slice(&p.data);
        }
        Self::new(&[n, c, h, w], data)
    }

    /// Returns sample `i` of a rank-4 tensor as a `1×C×H×W` tensor.
    pub fn batch_item(&self, i: usize) -> Result<Self> {
        let (n, c, h, w) = self.dims4()?;
        if i >= n {
            return Err(Error::ShapeMismatch { what: "batch index", expected: n, actual: i });
        }
        let per = c * h * w;
        Self::new(&[1, c, h, w], self.data[i * per..(i + 1) * per].to_vec())
    }
}

fn check_dim(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch { what, expected, actual });
    }
    Ok(())
}

/// Output length of a sliding window along one axis, or `None` when the
/// padded extent is shorter than the window.
pub fn window_output_len(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// A convolution layer borrowing its parameters.
#[derive(Clone, Copy, Debug)]
pub struct ConvSpec<'a> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: &'a Tensor,
    /// `None` is equivalent to an all-zero bias.
    pub bias: Option<&'a Tensor>,
}

impl<'a> ConvSpec<'a> {
    /// Derives channel and kernel sizes from a `(out, in, kh, kw)` weight tensor.
    pub fn new(weights: &'a Tensor, bias: Option<&'a Tensor>, stride: usize, padding: usize) -> Result<Self> {
        let (out_channels, in_channels, kernel_h, kernel_w) = weights.dims4()?;
        if stride == 0 {
            return Err(Error::InvalidShape("convolution stride must be positive".into()));
        }
        if let Some(b) = bias {
            check_dim("bias rank", 1, b.rank())?;
            check_dim("bias length", out_channels, b.len())?;
        }
        Ok(Self { in_channels, out_channels, kernel_h, kernel_w, stride, padding, weights, bias })
    }
}

// Micro-kernel tile: MR output channels × NR output pixels.
const MR: usize = 8;
const NR: usize = 16;

/// 2-D cross-correlation (no kernel flip) with symmetric zero padding.
///
/// Each output element is accumulated in `f64` over `(c, ky, kx)` in
/// ascending order, then the bias is added and the sum rounded to `f32`.
pub fn conv2d(input: &Tensor, spec: &ConvSpec<'_>) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    check_dim("input channels", spec.in_channels, c)?;
    check_dim("weight rank", 4, spec.weights.rank())?;
    let (kh, kw, s, p) = (spec.kernel_h, spec.kernel_w, spec.stride, spec.padding);
    let oh = window_output_len(h, kh, s, p).ok_or(Error::ShapeMismatch {
        what: "padded height vs kernel height",
        expected: kh,
        actual: h + 2 * p,
    })?;
    let ow = window_output_len(w, kw, s, p).ok_or(Error::ShapeMismatch {
        what: "padded width vs kernel width",
        expected: kw,
        actual: w + 2 * p,
    })?;
    let cout = spec.out_channels;
    let k_len = c * kh * kw;
    let pixels = oh * ow;
    let groups = cout.div_ceil(MR);
    let tiles = pixels.div_ceil(NR);

    // Weights packed as [group][k][MR], zero-padded past `cout`.
    let wdata = spec.weights.data();
    let mut packed_w = vec![0.0f64; groups * k_len * MR];
    for co in 0..cout {
        let (g, r) = (co / MR, co % MR);
        let src = &wdata[co * k_len..(co + 1) * k_len];
        let dst = &mut packed_w[g * k_len * MR..(g + 1) * k_len * MR];
        for (k, &v) in src.iter().enumerate() {
            dst[k * MR + r] = f64::from(v);
        }
    }
    let bias: Vec<f64> = match spec.bias {
        Some(b) => b.data().iter().map(|&v| f64::from(v)).collect(),
        None => vec![0.0; cout],
    };

    let mut out = vec![0.0f32; n * cout * pixels];
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    let padded_plane = hp * wp;
    let mut padded = vec![0.0f64; c * padded_plane];
    let mut tile = vec![0.0f64; k_len * NR];
    // Offset of each (c, ky, kx) tap relative to a pixel's window origin.
    let mut tap_offsets = Vec::with_capacity(k_len);
    for ci in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                tap_offsets.push(ci * padded_plane + ky * wp + kx);
            }
        }
    }
    let plane = h * w;
    for b in 0..n {
        let img = &input.data()[b * c * plane..(b + 1) * c * plane];
        for ci in 0..c {
            for y in 0..h {
                let src = &img[ci * plane + y * w..ci * plane + (y + 1) * w];
                let start = ci * padded_plane + (y + p) * wp + p;
                for (d, &v) in padded[start..start + w].iter_mut().zip(src) {
                    *d = f64::from(v);
                }
            }
        }

        let out_img = &mut out[b * cout * pixels..(b + 1) * cout * pixels];
        for t in 0..tiles {
            // Window origins in the padded image; pixels past the end reuse
            // origin 0 and their results are discarded.
            let mut origin = [0usize; NR];
            for (j, o) in origin.iter_mut().enumerate() {
                let px = t * NR + j;
                if px < pixels {
                    *o = (px / ow) * s * wp + (px % ow) * s;
                }
            }
            for (dst, &off) in tile.chunks_exact_mut(NR).zip(&tap_offsets) {
                for (d, &o) in dst.iter_mut().zip(&origin) {
                    *d = padded[off + o];
                }
            }
            for g in 0..groups {
                let wg = &packed_w[g * k_len * MR..(g + 1) * k_len * MR];
                let acc = micro_kernel(wg, &tile, k_len);
                for (r, row) in acc.iter().enumerate() {
                    let co = g * MR + r;
                    if co >= cout {
                        break;
                    }
                    for (j, &v) in row.iter().enumerate() {
                        let px = t * NR + j;
                        if px >= pixels {
                            break;
                        }
                        out_img[co * pixels + px] = (v + bias[co]) as f32;
                    }
                }
            }
        }
    }
    Tensor::new(&[n, cout, oh, ow], out)
}

#[inline(always)]
fn micro_kernel(w: &[f64], cols: &[f64], k_len: usize) -> [[f64; NR]; MR] {
    debug_assert!(w.len() >= k_len * MR && cols.len() >= k_len * NR);
    #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
    {
        // SAFETY: slice lengths checked above; the feature is enabled at compile time.
        unsafe { simd::micro_kernel_avx512(w, cols, k_len) }
    }
    #[cfg(all(target_arch = "x86_64", target_feature = "avx2", target_feature = "fma", not(target_feature = "avx512f")))]
    {
        // SAFETY: as above.
        unsafe { simd::micro_kernel_avx2(w, cols, k_len) }
    }
    #[cfg(not(all(
        target_arch = "x86_64",
        any(target_feature = "avx512f", all(target_feature = "avx2", target_feature = "fma"))
    )))]
    {
        micro_kernel_portable(w, cols, k_len)
    }
}

#[allow(dead_code)]
fn micro_kernel_portable(w: &[f64], cols: &[f64], k_len: usize) -> [[f64; NR]; MR] {
    let mut acc = [[0.0f64; NR]; MR];
    for (wk, ck) in w.chunks_exact(MR).zip(cols.chunks_exact(NR)).take(k_len) {
        for r in 0..MR {
            let a = wk[r];
            for j in 0..NR {
                acc[r][j] += a * ck[j];
            }
        }
    }
    acc
}

#[cfg(target_arch = "x86_64")]
mod simd {
    use super::{MR, NR};
    use core::arch::x86_64::*;

    #[cfg(target_feature = "avx512f")]
    #[inline(always)]
    pub(super) unsafe fn micro_kernel_avx512(w: &[f64], cols: &[f64], k_len: usize) -> [[f64; NR]; MR] {
        let mut acc = [[_mm512_setzero_pd(); 2]; MR];
        let mut wp = w.as_ptr();
        let mut cp = cols.as_ptr();
        // Full-mask loads: plain `loadu` picks up a UB-check memcpy when debug
        // assertions are on, which costs several times the FMA work.
        for _ in 0..k_len {
            let c0 = _mm512_maskz_loadu_pd(0xff, cp);
            let c1 = _mm512_maskz_loadu_pd(0xff, cp.add(8));
            for (r, row) in acc.iter_mut().enumerate() {
                let a = _mm512_set1_pd(*wp.add(r));
                row[0] = _mm512_fmadd_pd(a, c0, row[0]);
                row[1] = _mm512_fmadd_pd(a, c1, row[1]);
            }
            wp = wp.add(MR);
            cp = cp.add(NR);
        }
        let mut out = [[0.0f64; NR]; MR];
        for (o, row) in out.iter_mut().zip(acc.iter()) {
            _mm512_storeu_pd(o.as_mut_ptr(), row[0]);
            _mm512_storeu_pd(o.as_mut_ptr().add(8), row[1]);
        }
        out
    }

    #[cfg(all(target_feature = "avx2", target_feature = "fma"))]
    #[allow(dead_code)]
    #[inline(always)]
    pub(super) unsafe fn micro_kernel_avx2(w: &[f64], cols: &[f64], k_len: usize) -> [[f64; NR]; MR] {
        // Two passes over the 16 columns keep the 16 accumulators in ymm registers.
        let mut out = [[0.0f64; NR]; MR];
        for half in 0..2 {
            let mut acc = [[_mm256_setzero_pd(); 2]; MR];
            let mut wp = w.as_ptr();
            let mut cp = cols.as_ptr().add(half * 8);
            let all = _mm256_set1_epi64x(-1);
            for _ in 0..k_len {
                let c0 = _mm256_maskload_pd(cp, all);
                let c1 = _mm256_maskload_pd(cp.add(4), all);
                for (r, row) in acc.iter_mut().enumerate() {
                    let a = _mm256_set1_pd(*wp.add(r));
                    row[0] = _mm256_fmadd_pd(a, c0, row[0]);
                    row[1] = _mm256_fmadd_pd(a, c1, row[1]);
                }
                wp = wp.add(MR);
                cp = cp.add(NR);
            }
            for (o, row) in out.iter_mut().zip(acc.iter()) {
                _mm256_storeu_pd(o.as_mut_ptr().add(half * 8), row[0]);
                _mm256_storeu_pd(o.as_mut_ptr().add(half * 8 + 4), row[1]);
            }
        }
        out
    }
}

/// Max pooling over square windows; padded cells count as negative infinity.
pub fn maxpool2d(input: &Tensor, kernel: usize, stride: usize, padding: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let oh = window_output_len(h, kernel, stride, padding).ok_or(Error::ShapeMismatch {
        what: "padded height vs pool kernel",
        expected: kernel,
        actual: h + 2 * padding,
    })?;
    let ow = window_output_len(w, kernel, stride, padding).ok_or(Error::ShapeMismatch {
        what: "padded width vs pool kernel",
        expected: kernel,
        actual: w + 2 * padding,
    })?;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in input.data().chunks_exact(h * w) {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                for ky in 0..kernel {
                    let y = (oy * stride + ky) as isize - padding as isize;
                    if y < 0 || y as usize >= h {
                        continue;
                    }
                    for kx in 0..kernel {
                        let x = (ox * stride + kx) as isize - padding as isize;
                        if x < 0 || x as usize >= w {
                            continue;
                        }
                        let v = plane[y as usize * w + x as usize];
                        if v > best {
                            best = v;
                        }
                    }
                }
                out.push(best);
            }
        }
    }
    Tensor::new(&[n, c, oh, ow], out)
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place(t: &mut Tensor) {
    for v in &mut t.data {
        // NaN and -0.0 both become +0.0
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
}

/// Per-channel batch-normalization parameters in inference mode.
#[derive(Clone, Copy, Debug)]
pub struct BatchNormSpec<'a> {
    pub gamma: &'a Tensor,
    pub beta: &'a Tensor,
    pub running_mean: &'a Tensor,
    pub running_var: &'a Tensor,
    pub epsilon: f32,
}

impl BatchNormSpec<'_> {
    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn validate(&self) -> Result<()> {
        let c = self.channels();
        check_dim("batchnorm beta length", c, self.beta.len())?;
        check_dim("batchnorm mean length", c, self.running_mean.len())?;
        check_dim("batchnorm variance length", c, self.running_var.len())?;
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter("batchnorm epsilon must be non-negative".into()));
        }
        if self.running_var.data().iter().any(|&v| !(v >= 0.0) || !(v + self.epsilon > 0.0)) {
            return Err(Error::InvalidParameter("batchnorm variance must be non-negative with var + epsilon > 0".into()));
        }
        Ok(())
    }
}

/// `y = gamma * (x - mean) / sqrt(var + eps) + beta`, per channel.
pub fn batchnorm_infer(input: &Tensor, spec: &BatchNormSpec<'_>) -> Result<Tensor> {
    let (_, c, h, w) = input.dims4()?;
    spec.validate()?;
    check_dim("batchnorm channels", spec.channels(), c)?;
    let mut out = input.clone();
    let plane = h * w;
    for (i, chunk) in out.data.chunks_exact_mut(plane).enumerate() {
        let ch = i % c;
        let mean = f64::from(spec.running_mean.data()[ch]);
        let denom = libm::sqrt(f64::from(spec.running_var.data()[ch]) + f64::from(spec.epsilon));
        let gamma = f64::from(spec.gamma.data()[ch]);
        let beta = f64::from(spec.beta.data()[ch]);
        for v in chunk {
            *v = (gamma * (f64::from(*v) - mean) / denom + beta) as f32;
        }
    }
    Ok(out)
}

/// Affine map `y = x W + b` for `x: [N, D]`, `W: [D, M]`, `b: [M]`.
pub fn linear(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, d) = match *input.shape() {
        [n, d] => (n, d),
        _ => return Err(Error::ShapeMismatch { what: "linear input rank", expected: 2, actual: input.rank() }),
    };
    let m = match *weights.shape() {
        [wd, m] => {
            check_dim("linear inner dimension", d, wd)?;
            m
        }
        _ => return Err(Error::ShapeMismatch { what: "linear weight rank", expected: 2, actual: weights.rank() }),
    };
    check_dim("linear bias length", m, bias.len())?;
    let mut out = Vec::with_capacity(n * m);
    let wdata = weights.data();
    for row in input.data().chunks_exact(d) {
        let mut acc: Vec<f64> = bias.data().iter().map(|&b| f64::from(b)).collect();
        for (i, &x) in row.iter().enumerate() {
            let x = f64::from(x);
            for (a, &wv) in acc.iter_mut().zip(&wdata[i * m..(i + 1) * m]) {
                *a += x * f64::from(wv);
            }
        }
        out.extend(acc.into_iter().map(|v| v as f32));
    }
    Tensor::new(&[n, m], out)
}

/// Elementwise sum of identically shaped tensors.
pub fn add(lhs: &Tensor, rhs: &Tensor) -> Result<Tensor> {
    if lhs.shape() != rhs.shape() {
        let axis = lhs.shape().iter().zip(rhs.shape()).position(|(a, b)| a != b).unwrap_or(0);
        return Err(Error::ShapeMismatch {
            what: "add operand dimension",
            expected: lhs.shape().get(axis).copied().unwrap_or(lhs.rank()),
            actual: rhs.shape().get(axis).copied().unwrap_or(rhs.rank()),
        });
    }
    let data = lhs.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
    Tensor::new(lhs.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn tensor_rejects_bad_shapes() {
        assert!(Tensor::new(&[2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(&[0, 2], vec![]).is_err());
        assert!(Tensor::new(&[1, 1, 1, 1, 1], vec![0.0]).is_err());
    }

    #[test]
    fn conv_all_ones_same_padding() {
        let x = Tensor::full(&[1, 1, 3, 3], 1.0).unwrap();
        let k = Tensor::full(&[1, 1, 3, 3], 1.0).unwrap();
        let spec = ConvSpec::new(&k, None, 1, 1).unwrap();
        let y = conv2d(&x, &spec).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn conv_zero_weights_gives_bias() {
        let x = Tensor::full(&[2, 3, 5, 4], 0.7).unwrap();
        let k = Tensor::zeros(&[2, 3, 3, 3]).unwrap();
        let b = t(&[2], &[1.5, -2.0]);
        let y = conv2d(&x, &ConvSpec::new(&k, Some(&b), 2, 1).unwrap()).unwrap();
        assert_eq!(y.shape(), &[2, 2, 3, 2]);
        for (i, v) in y.data().iter().enumerate() {
            let co = (i / 6) % 2;
            assert_eq!(*v, [1.5, -2.0][co]);
        }
    }

    #[test]
    fn conv_same_padding_at_model_geometry() {
        assert_eq!(window_output_len(75, 3, 1, 1), Some(75));
        assert_eq!(window_output_len(170, 3, 1, 1), Some(170));
    }

    #[test]
    fn conv_errors_name_dimension() {
        let x = Tensor::zeros(&[1, 2, 4, 4]).unwrap();
        let k = Tensor::zeros(&[1, 3, 3, 3]).unwrap();
        let err = conv2d(&x, &ConvSpec::new(&k, None, 1, 0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { what: "input channels", .. }));
        let k = Tensor::zeros(&[1, 2, 7, 7]).unwrap();
        let err = conv2d(&x, &ConvSpec::new(&k, None, 1, 1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { what: "padded height vs kernel height", .. }));
    }

    #[test]
    fn maxpool_examples() {
        let y = maxpool2d(&t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]), 2, 2, 0).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let y = maxpool2d(&Tensor::zeros(&[1, 1, 75, 170]).unwrap(), 2, 2, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 37, 85]);
        let x = t(&[1, 1, 3, 3], &[0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0]);
        let y = maxpool2d(&x, 3, 2, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[5.0; 4]);
    }

    #[test]
    fn maxpool_padding_never_wins() {
        let x = Tensor::full(&[1, 1, 2, 2], -3.0).unwrap();
        let y = maxpool2d(&x, 3, 1, 1).unwrap();
        assert!(y.data().iter().all(|&v| v == -3.0));
        assert!(maxpool2d(&x, 5, 1, 1).is_err());
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(&t(&[3], &[-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(relu(&t(&[2], &[-1.0, -5.0])).data(), &[0.0, 0.0]);
        let pos = t(&[3], &[0.0, 1.0, 7.5]);
        assert_eq!(relu(&pos), pos);
    }

    fn bn_params(g: f32, b: f32, m: f32, v: f32) -> [Tensor; 4] {
        [t(&[1], &[g]), t(&[1], &[b]), t(&[1], &[m]), t(&[1], &[v])]
    }

    #[test]
    fn batchnorm_examples() {
        let [g, b, m, v] = bn_params(1.0, 0.0, 1.0, 1.0);
        let spec = BatchNormSpec { gamma: &g, beta: &b, running_mean: &m, running_var: &v, epsilon: 0.0 };
        assert_eq!(batchnorm_infer(&t(&[1, 1, 1, 1], &[2.0]), &spec).unwrap().data(), &[1.0]);

        let [g, b, m, v] = bn_params(2.0, 5.0, 1.0, 3.0);
        let spec = BatchNormSpec { gamma: &g, beta: &b, running_mean: &m, running_var: &v, epsilon: 1.0 };
        assert_eq!(batchnorm_infer(&t(&[1, 1, 1, 1], &[3.0]), &spec).unwrap().data(), &[7.0]);

        let [g, b, m, v] = bn_params(1.0, 0.0, 0.0, 1.0);
        let spec = BatchNormSpec { gamma: &g, beta: &b, running_mean: &m, running_var: &v, epsilon: 0.0 };
        let x = t(&[1, 1, 2, 2], &[0.1, -3.7, 1e6, 0.0]);
        assert_eq!(batchnorm_infer(&x, &spec).unwrap(), x);

        let x2 = Tensor::zeros(&[1, 2, 1, 1]).unwrap();
        assert!(batchnorm_infer(&x2, &spec).is_err());
    }

    #[test]
    fn linear_examples() {
        let x = t(&[1, 2], &[1.0, 2.0]);
        let eye = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let zero_b = Tensor::zeros(&[2]).unwrap();
        assert_eq!(linear(&x, &eye, &zero_b).unwrap(), x);
        let y = linear(&t(&[2, 2], &[4.0, 5.0, 6.0, 7.0]), &Tensor::zeros(&[2, 2]).unwrap(), &t(&[2], &[1.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 1.0, 2.0]);
        let three = t(&[2, 2], &[3.0, 0.0, 0.0, 3.0]);
        assert_eq!(linear(&x, &three, &zero_b).unwrap().data(), &[3.0, 6.0]);
        assert!(linear(&x, &Tensor::zeros(&[3, 2]).unwrap(), &zero_b).is_err());
    }

    #[test]
    fn add_examples() {
        let x = t(&[2], &[1.0, 2.0]);
        assert_eq!(add(&x, &Tensor::zeros(&[2]).unwrap()).unwrap(), x);
        assert_eq!(add(&x, &t(&[2], &[-1.0, -2.0])).unwrap().data(), &[0.0, 0.0]);
        assert_eq!(add(&x, &t(&[2], &[3.0, 4.0])).unwrap().data(), &[4.0, 6.0]);
        assert!(add(&x, &Tensor::zeros(&[3]).unwrap()).is_err());
    }
}
