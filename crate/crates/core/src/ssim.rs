//! Gaussian-windowed SSIM and structural diversity of a render set.
//!
//! Diversity is `1 - mean pairwise SSIM`, so a set of identical renders (or
//! a single render) scores exactly zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimParams {
    pub window_size: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window_size: 11,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 3 || self.window_size % 2 == 0 {
            return Err(Error::argument(format!(
                "ssim window_size must be odd and >= 3, got {}",
                self.window_size
            )));
        }
        for (name, v) in [
            ("window_sigma", self.window_sigma),
            ("k1", self.k1),
            ("k2", self.k2),
            ("dynamic_range", self.dynamic_range),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::argument(format!(
                    "ssim {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    // Normalized window of exactly `window_size` taps.
    fn window(&self) -> Vec<f64> {
        let r = (self.window_size / 2) as isize;
        let denom = 2.0 * self.window_sigma * self.window_sigma;
        let mut w: Vec<f64> = (-r..=r)
            .map(|i| (-((i * i) as f64) / denom).exp())
            .collect();
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= sum);
        w
    }
}

/// Separable filtering restricted to windows fully inside the image.
fn valid_filter(width: usize, height: usize, src: &[f64], kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (ow, oh) = (width + 1 - k, height + 1 - k);
    let mut tmp = vec![0.0; ow * height];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..ow {
            tmp[y * ow + x] = kernel.iter().zip(&row[x..x + k]).map(|(w, v)| w * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        let dst = &mut out[y * ow..(y + 1) * ow];
        for (j, &wk) in kernel.iter().enumerate() {
            let src_row = &tmp[(y + j) * ow..(y + j + 1) * ow];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += wk * s;
            }
        }
    }
    out
}

/// Per-image windowed first and second moments, reusable across pairs.
struct LocalMoments {
    mean: Vec<f64>,
    mean_sq: Vec<f64>,
}

impl LocalMoments {
    fn new(img: &GrayImage, window: &[f64]) -> Self {
        let (w, h) = img.dimensions();
        let squares: Vec<f64> = img.data().iter().map(|v| v * v).collect();
        LocalMoments {
            mean: valid_filter(w, h, img.data(), window),
            mean_sq: valid_filter(w, h, &squares, window),
        }
    }
}

fn check_pair(a: &GrayImage, b: &GrayImage, p: &SsimParams) -> Result<()> {
    p.validate()?;
    if a.dimensions() != b.dimensions() {
        return Err(Error::argument(format!(
            "ssim needs images of identical size, got {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.width() < p.window_size || a.height() < p.window_size {
        return Err(Error::argument(format!(
            "image {}x{} is smaller than the {}x{} ssim window",
            a.width(),
            a.height(),
            p.window_size,
            p.window_size
        )));
    }
    Ok(())
}

fn ssim_from_moments(
    a: &GrayImage,
    b: &GrayImage,
    ma: &LocalMoments,
    mb: &LocalMoments,
    window: &[f64],
    p: &SsimParams,
) -> f64 {
    let (w, h) = a.dimensions();
    let products: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    let cross = valid_filter(w, h, &products, window);
    let (c1, c2) = (p.c1(), p.c2());
    let mut total = 0.0;
    for i in 0..cross.len() {
        let (mu_a, mu_b) = (ma.mean[i], mb.mean[i]);
        let mu_ab = mu_a * mu_b;
        let var_a = ma.mean_sq[i] - mu_a * mu_a;
        let var_b = mb.mean_sq[i] - mu_b * mu_b;
        let cov = cross[i] - mu_ab;
        let num = (2.0 * mu_ab + c1) * (2.0 * cov + c2);
        let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        total += num / den;
    }
    total / cross.len() as f64
}

/// Mean SSIM over all interior windows of two same-sized images.
pub fn ssim(a: &GrayImage, b: &GrayImage, p: &SsimParams) -> Result<f64> {
    check_pair(a, b, p)?;
    let window = p.window();
    let ma = LocalMoments::new(a, &window);
    let mb = LocalMoments::new(b, &window);
    Ok(ssim_from_moments(a, b, &ma, &mb, &window, p))
}

/// Renders produced by one method from one sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderSet {
    pub sketch_id: String,
    renders: Vec<GrayImage>,
}

impl RenderSet {
    /// All renders must share the dimensions of the first.
    pub fn new(sketch_id: impl Into<String>, renders: Vec<GrayImage>) -> Result<Self> {
        let sketch_id = sketch_id.into();
        let first = renders
            .first()
            .ok_or_else(|| Error::argument(format!("render set '{sketch_id}' is empty")))?
            .dimensions();
        if let Some((i, r)) = renders
            .iter()
            .enumerate()
            .find(|(_, r)| r.dimensions() != first)
        {
            return Err(Error::argument(format!(
                "render {i} of set '{sketch_id}' is {}x{}, expected {}x{}",
                r.width(),
                r.height(),
                first.0,
                first.1
            )));
        }
        Ok(RenderSet { sketch_id, renders })
    }

    /// Like [`RenderSet::new`], but renders whose size differs from the first
    /// are resized to it. Returns one warning per resized render.
    pub fn aligned(
        sketch_id: impl Into<String>,
        renders: Vec<GrayImage>,
    ) -> Result<(Self, Vec<String>)> {
        let sketch_id = sketch_id.into();
        let Some(first) = renders.first().map(GrayImage::dimensions) else {
            return Err(Error::argument(format!(
                "render set '{sketch_id}' is empty"
            )));
        };
        let mut warnings = Vec::new();
        let mut out = Vec::with_capacity(renders.len());
        for (i, r) in renders.into_iter().enumerate() {
            if r.dimensions() == first {
                out.push(r);
            } else {
                let msg = format!(
                    "render {i} of set '{sketch_id}' resized from {}x{} to {}x{}",
                    r.width(),
                    r.height(),
                    first.0,
                    first.1
                );
                log::warn!("{msg}");
                warnings.push(msg);
                out.push(resize_bilinear(&r, first.0, first.1)?);
            }
        }
        Ok((
            RenderSet {
                sketch_id,
                renders: out,
            },
            warnings,
        ))
    }

    pub fn renders(&self) -> &[GrayImage] {
        &self.renders
    }

    pub fn len(&self) -> usize {
        self.renders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.renders.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSsim {
    pub mean: f64,
    pub pairs: usize,
    /// Set had fewer than two renders; `mean` is 1 by convention.
    pub degenerate: bool,
}

/// SSIM of every unordered pair `(i, j)`, `i < j`, in lexicographic order.
pub fn pairwise_ssim(set: &RenderSet, p: &SsimParams) -> Result<Vec<f64>> {
    let renders = set.renders();
    if let Some(first) = renders.first() {
        check_pair(first, first, p)?;
    }
    let window = p.window();
    let moments: Vec<LocalMoments> = renders
        .par_iter()
        .map(|r| LocalMoments::new(r, &window))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..renders.len())
        .flat_map(|i| (i + 1..renders.len()).map(move |j| (i, j)))
        .collect();
    Ok(pairs
        .par_iter()
        .map(|&(i, j)| {
            ssim_from_moments(
                &renders[i],
                &renders[j],
                &moments[i],
                &moments[j],
                &window,
                p,
            )
        })
        .collect())
}

/// Mean SSIM over all `n(n-1)/2` render pairs, summed in pair order.
pub fn mean_pairwise_ssim(set: &RenderSet, p: &SsimParams) -> Result<PairwiseSsim> {
    p.validate()?;
    if set.len() < 2 {
        return Ok(PairwiseSsim {
            mean: 1.0,
            pairs: 0,
            degenerate: true,
        });
    }
    let scores = pairwise_ssim(set, p)?;
    let sum: f64 = scores.iter().sum();
    Ok(PairwiseSsim {
        mean: sum / scores.len() as f64,
        pairs: scores.len(),
        degenerate: false,
    })
}

/// `1 - mean_pairwise_ssim`; not clamped, so the range is `[0, 2]`.
pub fn structural_diversity(set: &RenderSet, p: &SsimParams) -> Result<f64> {
    Ok(1.0 - mean_pairwise_ssim(set, p)?.mean)
}
