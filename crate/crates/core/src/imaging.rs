//! RGB images, resizing to the model geometry, tensor conversion and a
//! synthetic seed-image generator.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Interleaved 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidShape("image dimensions must be positive".into()));
        }
        if pixels.len() != 3 * height * width {
            return Err(Error::ShapeMismatch { what: "image pixel buffer", expected: 3 * height * width, actual: pixels.len() });
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(3 * height * width).collect();
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Mean of each channel over all pixels.
    pub fn channel_means(&self) -> [f64; 3] {
        let mut sums = [0u64; 3];
        for px in self.pixels.chunks_exact(3) {
            for (s, &v) in sums.iter_mut().zip(px) {
                *s += u64::from(v);
            }
        }
        let n = (self.height * self.width) as f64;
        sums.map(|s| s as f64 / n)
    }
}

/// Bilinear resampling with half-pixel-centred sample positions; edges are
/// clamped. Output values are rounded to nearest.
pub fn resize_bilinear(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidShape("resize target must be at least 1x1".into()));
    }
    if out_h == img.height && out_w == img.width {
        return Ok(img.clone());
    }
    let ys = sample_positions(img.height, out_h);
    let xs = sample_positions(img.width, out_w);
    let mut pixels = Vec::with_capacity(3 * out_h * out_w);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = img.pixel(y0, x0);
            let p01 = img.pixel(y0, x1);
            let p10 = img.pixel(y1, x0);
            let p11 = img.pixel(y1, x1);
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p01[c]) * fx;
                let bottom = f64::from(p10[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push(libm::floor(v + 0.5).clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::new(out_h, out_w, pixels)
}

/// For each output index: the two source indices and the weight of the second.
fn sample_positions(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let lo = libm::floor(src) as usize;
            let hi = (lo + 1).min(input - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

/// Optional per-channel normalization applied after scaling to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

/// Channels-first `1×3×H×W` tensor with values `pixel / 255`, then
/// `(v - mean) / std` when a normalization is given.
pub fn to_tensor(img: &Image, norm: Option<&Normalization>) -> Tensor {
    let plane = img.height * img.width;
    let mut data = vec![0.0f32; 3 * plane];
    for (i, px) in img.pixels.chunks_exact(3).enumerate() {
        for c in 0..3 {
            let mut v = f32::from(px[c]) / 255.0;
            if let Some(n) = norm {
                v = (v - n.mean[c]) / n.std[c];
            }
            data[c * plane + i] = v;
        }
    }
    Tensor::new(&[1, 3, img.height, img.width], data).expect("image dimensions are positive")
}

/// Parameters of one synthetic seed image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub class_id: u8,
    pub base_color: [u8; 3],
    /// Cycles per pixel of the sinusoidal texture along the long axis.
    pub texture_frequency: f64,
    /// Standard deviation of additive Gaussian noise, as a fraction of 255.
    pub noise_std: f64,
    pub seed: u64,
}

pub const SYNTH_BACKGROUND: [u8; 3] = [18, 16, 14];
const TEXTURE_AMPLITUDE: f64 = 0.2;

/// Renders a dark background with a centred ellipse ("seed") filled with the
/// base colour, modulated by a sinusoid and perturbed by Gaussian noise.
/// Ellipse size and texture phase jitter slightly with the seed.
pub fn gen_synthetic(spec: &SynthSpec, h: usize, w: usize) -> Result<Image> {
    if h < 8 || w < 8 {
        return Err(Error::InvalidShape("synthetic images need at least 8x8 pixels".into()));
    }
    if !(spec.texture_frequency >= 0.0) || !(spec.noise_std >= 0.0) {
        return Err(Error::InvalidParameter("texture frequency and noise std must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let semi_x = 0.44 * w as f64 * rng.random_range(0.9..1.0);
    let semi_y = 0.40 * h as f64 * rng.random_range(0.9..1.0);
    let shift = rng.random_range(0.0..w as f64);
    let noise = Normal::new(0.0, spec.noise_std * 255.0).expect("std is finite and non-negative");
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);

    let mut pixels = Vec::with_capacity(3 * h * w);
    for y in 0..h {
        for x in 0..w {
            let dx = (x as f64 + 0.5 - cx) / semi_x;
            let dy = (y as f64 + 0.5 - cy) / semi_y;
            if dx * dx + dy * dy > 1.0 {
                pixels.extend_from_slice(&SYNTH_BACKGROUND);
                continue;
            }
            let phase = 2.0 * core::f64::consts::PI * spec.texture_frequency * (x as f64 + shift);
            let modulation = 1.0 + TEXTURE_AMPLITUDE * libm::sin(phase);
            for &base in &spec.base_color {
                let mut v = f64::from(base) * modulation;
                if spec.noise_std > 0.0 {
                    v += noise.sample(&mut rng);
                }
                pixels.push(libm::round(v).clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::new(h, w, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(class_id: u8, base_color: [u8; 3]) -> SynthSpec {
        SynthSpec { class_id, base_color, texture_frequency: 0.05, noise_std: 0.05, seed: 11 }
    }

    #[test]
    fn image_validates_buffer() {
        assert!(Image::new(2, 2, vec![0; 11]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = gen_synthetic(&spec(0, [180, 160, 120]), 20, 30).unwrap();
        assert_eq!(resize_bilinear(&img, 20, 30).unwrap(), img);
        let flat = Image::filled(7, 5, [10, 200, 33]).unwrap();
        let big = resize_bilinear(&flat, 75, 170).unwrap();
        assert!(big.pixels().chunks(3).all(|p| p == [10, 200, 33]));
        let small = resize_bilinear(&flat, 1, 2).unwrap();
        assert!(small.pixels().chunks(3).all(|p| p == [10, 200, 33]));
    }

    #[test]
    fn resize_column_is_monotone() {
        let col = Image::new(2, 1, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let out = resize_bilinear(&col, 4, 1).unwrap();
        let reds: Vec<u8> = (0..4).map(|y| out.pixel(y, 0)[0]).collect();
        // positions -0.25, 0.25, 0.75, 1.25 clamp to 0, 0.25, 0.75, 1
        assert_eq!(reds, vec![0, 64, 191, 255]);
        assert!(reds.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn to_tensor_scaling() {
        let img = Image::new(1, 2, vec![255, 0, 255, 0, 255, 0]).unwrap();
        let t = to_tensor(&img, None);
        assert_eq!(t.shape(), &[1, 3, 1, 2]);
        assert_eq!(t.data(), &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let n = Normalization { mean: [0.5; 3], std: [0.5; 3] };
        let t = to_tensor(&img, Some(&n));
        assert_eq!(t.data()[0], 1.0);
        assert_eq!(t.data()[1], -1.0);
        let big = Image::filled(75, 170, [1, 2, 3]).unwrap();
        assert_eq!(to_tensor(&big, None).shape(), &[1, 3, 75, 170]);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let s = spec(1, [120, 160, 180]);
        assert_eq!(gen_synthetic(&s, 75, 170).unwrap(), gen_synthetic(&s, 75, 170).unwrap());
        let other = SynthSpec { seed: 12, ..s };
        assert_ne!(gen_synthetic(&s, 75, 170).unwrap(), gen_synthetic(&other, 75, 170).unwrap());
    }

    #[test]
    fn plain_synthetic_ellipse_is_base_colour() {
        let s = SynthSpec { texture_frequency: 0.0, noise_std: 0.0, ..spec(0, [180, 160, 120]) };
        let img = gen_synthetic(&s, 75, 170).unwrap();
        for px in img.pixels().chunks(3) {
            assert!(px == [180, 160, 120] || px == SYNTH_BACKGROUND);
        }
        assert_eq!(img.pixel(37, 85), [180, 160, 120]);
        assert_eq!(img.pixel(0, 0), SYNTH_BACKGROUND);
    }

    #[test]
    fn class_colours_differ_in_red_mean() {
        let a = gen_synthetic(&spec(0, [180, 160, 120]), 75, 170).unwrap();
        let b = gen_synthetic(&spec(1, [120, 160, 180]), 75, 170).unwrap();
        assert!(a.channel_means()[0] > b.channel_means()[0]);
    }

    #[test]
    fn synthetic_rejects_tiny_images() {
        assert!(gen_synthetic(&spec(0, [1, 2, 3]), 7, 20).is_err());
    }
}
