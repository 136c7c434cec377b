//! Grayscale raster type, file decoding and the image operations shared by
//! every metric: bilinear resizing, Gaussian blurring and the 2-D DCT
//! descriptor used as the built-in feature extractor.
//!
//! All convolutions replicate the nearest edge pixel outside the image.

use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};

/// Side length of the square raster the DCT descriptor is computed on.
pub const DESCRIPTOR_SIDE: usize = 32;
/// Default number of zigzag coefficients kept by [`dct_descriptor`].
pub const DEFAULT_DESCRIPTOR_DIMS: usize = 64;
const MAX_DESCRIPTOR_DIMS: usize = DESCRIPTOR_SIDE * DESCRIPTOR_SIDE;

// ITU-R BT.601 luma weights.
const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// Single-channel raster with row-major luminance values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Builds an image, checking the dimensions and that every value is a
    /// finite number in `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument(format!(
                "image dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::argument(format!(
                "expected {} pixel values for a {width}x{height} image, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::argument(format!(
                "pixel {i} has value {} outside [0, 1]",
                data[i]
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Constant-valued image. `value` is clamped into `[0, 1]`.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        GrayImage::new(width, height, vec![value.clamp(0.0, 1.0); width * height])
    }

    /// Builds an image from a function of `(x, y)`; results are clamped into
    /// `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        GrayImage::new(width, height, data)
    }

    // Values already known to satisfy the invariants.
    pub(crate) fn from_raw_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        GrayImage {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    /// Photometric inversion, `1 - v` per pixel.
    pub fn inverted(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| 1.0 - v).collect(),
        }
    }

    pub fn transposed(&self) -> GrayImage {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.get(x, y));
            }
        }
        GrayImage {
            width: self.height,
            height: self.width,
            data,
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Converts to an 8-bit grayscale buffer, rounding to the nearest level.
    pub fn to_luma8(&self) -> image::GrayImage {
        let bytes = self
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    /// Converts a decoded image to luminance. Colour inputs use BT.601
    /// weights; grayscale inputs are only rescaled. Alpha is ignored.
    pub fn from_dynamic(img: &DynamicImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data: Vec<f64> = match img {
            DynamicImage::ImageLuma8(b) => b.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
            DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
            DynamicImage::ImageLuma16(b) => {
                b.as_raw().iter().map(|&v| v as f64 / 65535.0).collect()
            }
            DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
            DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => img
                .to_rgb16()
                .pixels()
                .map(|p| luminance(p.0.map(|c| c as f64 / 65535.0)))
                .collect(),
            DynamicImage::ImageRgb32F(_) | DynamicImage::ImageRgba32F(_) => img
                .to_rgb32f()
                .pixels()
                .map(|p| luminance(p.0.map(|c| c as f64)))
                .collect(),
            _ => img
                .to_rgb8()
                .pixels()
                .map(|p| luminance(p.0.map(|c| c as f64 / 255.0)))
                .collect(),
        };
        GrayImage::new(w, h, data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }
}

fn luminance([r, g, b]: [f64; 3]) -> f64 {
    LUMA_R * r + LUMA_G * g + LUMA_B * b
}

/// Decodes a PNG or JPEG file into a [`GrayImage`].
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::input(path, e))?;
    let format = image::guess_format(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(Error::Format(format!(
            "{}: unsupported image format {format:?}, expected PNG or JPEG",
            path.display()
        )));
    }
    let decoded = image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    GrayImage::from_dynamic(&decoded)
}

/// Writes an 8-bit grayscale PNG.
pub fn save_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.to_luma8()
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::input(path, e))
}

/// Bilinear resampling with pixel-centre alignment and edge clamping.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::argument(format!(
            "resize target must be at least 1x1, got {out_w}x{out_h}"
        )));
    }
    if (out_w, out_h) == img.dimensions() {
        return Ok(img.clone());
    }
    let xs = sample_positions(img.width, out_w);
    let ys = sample_positions(img.height, out_h);
    let mut data = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Ok(GrayImage::from_raw_clamped(out_w, out_h, data))
}

// For each output index: the two source indices and the weight of the second.
fn sample_positions(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    let last = (in_len - 1) as f64;
    (0..out_len)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

/// Normalized 1-D Gaussian kernel of radius `ceil(3 * sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::argument(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= sum);
    Ok(kernel)
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma)?;
    let data = separable_filter(img.width, img.height, &img.data, &kernel, &kernel);
    Ok(GrayImage::from_raw_clamped(img.width, img.height, data))
}

/// Convolves a row-major field with `row_kernel` along x and then
/// `col_kernel` along y, replicating edge samples. Kernels have odd length
/// and are centred.
pub(crate) fn separable_filter(
    width: usize,
    height: usize,
    src: &[f64],
    row_kernel: &[f64],
    col_kernel: &[f64],
) -> Vec<f64> {
    let rr = (row_kernel.len() / 2) as isize;
    let cr = (col_kernel.len() / 2) as isize;
    let (w, h) = (width as isize, height as isize);

    let mut tmp = vec![0.0; width * height];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &wk) in row_kernel.iter().enumerate() {
                let sx = (x + k as isize - rr).clamp(0, w - 1) as usize;
                acc += wk * row[sx];
            }
            tmp[y * width + x as usize] = acc;
        }
    }

    let mut out = vec![0.0; width * height];
    for y in 0..h {
        for (k, &wk) in col_kernel.iter().enumerate() {
            let sy = (y + k as isize - cr).clamp(0, h - 1) as usize;
            let src_row = &tmp[sy * width..(sy + 1) * width];
            let dst_row = &mut out[y as usize * width..(y as usize + 1) * width];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += wk * s;
            }
        }
    }
    out
}

/// Orthonormal DCT-II basis: `basis[k][n] = a(k) cos(pi (2n + 1) k / 2N)`.
fn dct_basis(n: usize) -> Vec<f64> {
    let mut basis = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let scale = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        for i in 0..n {
            basis[k * n + i] =
                scale * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
        }
    }
    basis
}

/// Orthonormal 2-D DCT-II of an `n x n` row-major block. Output index
/// `[u * n + v]` holds vertical frequency `u` and horizontal frequency `v`.
pub fn dct2(block: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(block.len(), n * n, "dct2 expects an n x n block");
    let basis = dct_basis(n);
    // Rows first: tmp[y][v] = sum_x block[y][x] basis[v][x]
    let mut tmp = vec![0.0; n * n];
    for y in 0..n {
        for v in 0..n {
            tmp[y * n + v] = (0..n).map(|x| block[y * n + x] * basis[v * n + x]).sum();
        }
    }
    let mut out = vec![0.0; n * n];
    for u in 0..n {
        for v in 0..n {
            out[u * n + v] = (0..n).map(|y| basis[u * n + y] * tmp[y * n + v]).sum();
        }
    }
    out
}

/// JPEG-style zigzag traversal of an `n x n` grid as `(row, col)` pairs,
/// starting at DC and moving to `(0, 1)` then `(1, 0)`.
pub fn zigzag_order(n: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(n * n);
    for s in 0..(2 * n - 1) {
        let lo = s.saturating_sub(n - 1);
        let hi = s.min(n - 1);
        if s % 2 == 0 {
            for row in (lo..=hi).rev() {
                order.push((row, s - row));
            }
        } else {
            for row in lo..=hi {
                order.push((row, s - row));
            }
        }
    }
    order
}

/// Low-frequency DCT descriptor: the image is resized to 32x32, transformed
/// with the orthonormal 2-D DCT-II and the first `dims` coefficients in
/// zigzag order are returned.
pub fn dct_descriptor(img: &GrayImage, dims: usize) -> Result<Vec<f64>> {
    if dims == 0 || dims > MAX_DESCRIPTOR_DIMS {
        return Err(Error::argument(format!(
            "descriptor dims must be in 1..={MAX_DESCRIPTOR_DIMS}, got {dims}"
        )));
    }
    let small = resize_bilinear(img, DESCRIPTOR_SIDE, DESCRIPTOR_SIDE)?;
    let coeffs = dct2(small.data(), DESCRIPTOR_SIDE);
    Ok(zigzag_order(DESCRIPTOR_SIDE)
        .into_iter()
        .take(dims)
        .map(|(u, v)| coeffs[u * DESCRIPTOR_SIDE + v])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_dct(block: &[f64], n: usize) -> Vec<f64> {
        let nf = n as f64;
        let a = |k: usize| {
            if k == 0 {
                (1.0 / nf).sqrt()
            } else {
                (2.0 / nf).sqrt()
            }
        };
        let mut out = vec![0.0; n * n];
        for u in 0..n {
            for v in 0..n {
                let mut acc = 0.0;
                for y in 0..n {
                    for x in 0..n {
                        acc += block[y * n + x]
                            * (std::f64::consts::PI * (2 * y + 1) as f64 * u as f64 / (2.0 * nf))
                                .cos()
                            * (std::f64::consts::PI * (2 * x + 1) as f64 * v as f64 / (2.0 * nf))
                                .cos();
                    }
                }
                out[u * n + v] = a(u) * a(v) * acc;
            }
        }
        out
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::NAN]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.5]).is_err());
        assert!(GrayImage::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn resize_identity_is_bitwise() {
        let img = GrayImage::from_fn(7, 5, |x, y| ((x * 31 + y * 17) % 11) as f64 / 10.0).unwrap();
        let out = resize_bilinear(&img, 7, 5).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = GrayImage::constant(5, 3, 0.5).unwrap();
        let out = resize_bilinear(&img, 13, 2).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    // Reference bilinear interpolator written per output pixel from the
    // continuous-coordinate definition.
    fn reference_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for oy in 0..out_h {
            for ox in 0..out_w {
                let sx = ((ox as f64 + 0.5) * img.width() as f64 / out_w as f64 - 0.5)
                    .max(0.0)
                    .min((img.width() - 1) as f64);
                let sy = ((oy as f64 + 0.5) * img.height() as f64 / out_h as f64 - 0.5)
                    .max(0.0)
                    .min((img.height() - 1) as f64);
                let mut acc = 0.0;
                for y in 0..img.height() {
                    for x in 0..img.width() {
                        let wx = (1.0 - (sx - x as f64).abs()).max(0.0);
                        let wy = (1.0 - (sy - y as f64).abs()).max(0.0);
                        acc += wx * wy * img.get(x, y);
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn resize_matches_reference_interpolator() {
        let img = GrayImage::new(1, 2, vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear(&img, 1, 4).unwrap();
        let expected = reference_bilinear(&img, 1, 4);
        // Frozen from the reference: [0, 0.25, 0.75, 1].
        assert_eq!(expected, vec![0.0, 0.25, 0.75, 1.0]);
        for (a, b) in out.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }

        let img = GrayImage::from_fn(5, 4, |x, y| ((x * 7 + y * 3) % 5) as f64 / 4.0).unwrap();
        let out = resize_bilinear(&img, 9, 3).unwrap();
        for (a, b) in out.data().iter().zip(reference_bilinear(&img, 9, 3)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_rejects_zero_dimension() {
        let img = GrayImage::constant(2, 2, 0.0).unwrap();
        assert!(matches!(
            resize_bilinear(&img, 0, 2),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn blur_constant_image() {
        let img = GrayImage::constant(9, 6, 0.3).unwrap();
        let out = gaussian_blur(&img, 2.0).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn blur_single_pixel_matches_direct_convolution() {
        let mut data = vec![0.0; 15 * 15];
        data[7 * 15 + 7] = 1.0;
        let img = GrayImage::new(15, 15, data).unwrap();
        let out = gaussian_blur(&img, 1.0).unwrap();
        let k = gaussian_kernel(1.0).unwrap();
        let c = k[k.len() / 2];
        assert!((out.get(7, 7) - c * c).abs() < 1e-15);

        // Direct 2-D convolution with the outer-product kernel.
        let r = (k.len() / 2) as isize;
        for y in 0..15isize {
            for x in 0..15isize {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        acc += k[(dx + r) as usize]
                            * k[(dy + r) as usize]
                            * img.get_clamped(x + dx, y + dy);
                    }
                }
                assert!((out.get(x as usize, y as usize) - acc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn blur_preserves_mean_with_constant_padding() {
        let img = GrayImage::from_fn(40, 40, |x, y| {
            if (15..25).contains(&x) && (12..28).contains(&y) {
                0.9
            } else {
                0.2
            }
        })
        .unwrap();
        let out = gaussian_blur(&img, 1.5).unwrap();
        assert!((out.mean() - img.mean()).abs() < 1e-6);
    }

    #[test]
    fn blur_rejects_non_positive_sigma() {
        let img = GrayImage::constant(4, 4, 0.5).unwrap();
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn zigzag_prefix() {
        let z = zigzag_order(4);
        assert_eq!(&z[..6], &[(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2)]);
        assert_eq!(z.len(), 16);
        assert_eq!(z[15], (3, 3));
    }

    #[test]
    fn descriptor_of_constant_images() {
        let ones = GrayImage::constant(32, 32, 1.0).unwrap();
        let d = dct_descriptor(&ones, 4).unwrap();
        assert!((d[0] - 32.0).abs() < 1e-12);
        assert!(d[1..].iter().all(|v| v.abs() < 1e-12));

        let zeros = GrayImage::constant(32, 32, 0.0).unwrap();
        assert!(dct_descriptor(&zeros, 64)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn descriptor_dims_out_of_range() {
        let img = GrayImage::constant(8, 8, 0.5).unwrap();
        assert!(dct_descriptor(&img, 0).is_err());
        assert!(dct_descriptor(&img, 1025).is_err());
        assert_eq!(dct_descriptor(&img, 1024).unwrap().len(), 1024);
    }

    #[test]
    fn horizontal_cosine_lands_in_one_slot() {
        let n = DESCRIPTOR_SIDE;
        let img = GrayImage::from_fn(n, n, |x, _| {
            0.5 + 0.5 * (std::f64::consts::PI * (2 * x + 1) as f64 / (2.0 * n as f64)).cos()
        })
        .unwrap();
        let d = dct_descriptor(&img, 1024).unwrap();
        let oracle = brute_force_dct(img.data(), n);
        let zz = zigzag_order(n);
        for (i, &(u, v)) in zz.iter().enumerate() {
            assert!((d[i] - oracle[u * n + v]).abs() < 1e-9, "slot {i}");
        }
        // AC energy only in zigzag slot 1, i.e. (row 0, col 1).
        let ac: Vec<usize> = (1..1024).filter(|&i| d[i].abs() > 1e-9).collect();
        assert_eq!(ac, vec![1]);
    }

    #[test]
    fn dct_parseval() {
        let img =
            GrayImage::from_fn(32, 32, |x, y| ((x * 13 + y * 29) % 17) as f64 / 16.0).unwrap();
        let d = dct_descriptor(&img, 1024).unwrap();
        let energy: f64 = d.iter().map(|v| v * v).sum();
        let pixels: f64 = img.data().iter().map(|v| v * v).sum();
        assert!(((energy - pixels) / pixels).abs() < 1e-6);
    }

    #[test]
    fn transpose_round_trip() {
        let img = GrayImage::from_fn(3, 5, |x, y| (x + 3 * y) as f64 / 15.0).unwrap();
        let t = img.transposed();
        assert_eq!(t.dimensions(), (5, 3));
        assert_eq!(t.get(4, 2), img.get(2, 4));
        assert_eq!(t.transposed(), img);
    }
}
