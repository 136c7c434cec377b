//! Heuristic sketch synthesis: Canny edge detection, Hough line extraction
//! and rasterization of either into a black-on-white sketch.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{gaussian_blur, GrayImage};

// Normalized magnitudes closer than this are treated as equal during
// non-maximum suppression, so round-off cannot flip a tie.
const NMS_TIE_TOLERANCE: f64 = 1e-9;

/// Binary edge raster, row-major, values exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::argument(format!(
                "expected {} edge values for a {width}x{height} map, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::argument("edge map values must be 0 or 1"));
        }
        Ok(EdgeMap {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        EdgeMap {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        EdgeMap {
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// Edge pixel coordinates in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Black strokes on a white background.
    pub fn to_sketch(&self) -> GrayImage {
        let data = self.data.iter().map(|&v| 1.0 - v as f64).collect();
        GrayImage::from_raw_clamped(self.width, self.height, data)
    }
}

/// Horizontal and vertical Sobel responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

/// 3x3 Sobel gradients with edge-clamped borders.
pub fn sobel_gradients(img: &GrayImage) -> Result<Gradients> {
    let (w, h) = img.dimensions();
    if w < 3 || h < 3 {
        return Err(Error::argument(format!(
            "sobel needs an image of at least 3x3, got {w}x{h}"
        )));
    }
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
            let i = y as usize * w + x as usize;
            gx[i] = (p(1, -1) - p(-1, -1)) + 2.0 * (p(1, 0) - p(-1, 0)) + (p(1, 1) - p(-1, 1));
            gy[i] = (p(-1, 1) - p(-1, -1)) + 2.0 * (p(0, 1) - p(0, -1)) + (p(1, 1) - p(1, -1));
        }
    }
    Ok(Gradients {
        width: w,
        height: h,
        gx,
        gy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CannyParams {
    pub sigma: f64,
    /// Hysteresis thresholds on the max-normalized gradient magnitude.
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            sigma: 1.4,
            low: 0.1,
            high: 0.3,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::argument(format!(
                "canny sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(0.0 < self.low && self.low < self.high && self.high <= 1.0) {
            return Err(Error::argument(format!(
                "canny thresholds must satisfy 0 < low < high <= 1, got low={} high={}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Gradient magnitude scaled so its maximum is 1 (all zeros when the image
/// has no gradient).
pub fn normalized_magnitude(g: &Gradients) -> Vec<f64> {
    let mut mag: Vec<f64> = g.gx.iter().zip(&g.gy).map(|(x, y)| x.hypot(*y)).collect();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        mag.iter_mut().for_each(|m| *m /= max);
    }
    mag
}

fn compare(a: f64, b: f64) -> std::cmp::Ordering {
    if (a - b).abs() <= NMS_TIE_TOLERANCE {
        std::cmp::Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
    }
}

// Step along the gradient direction, quantized to 0, 45, 90 or 135 degrees
// (y pointing down).
fn quantized_step(gx: f64, gy: f64) -> (isize, isize) {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        (1, 0)
    } else if angle < 67.5 {
        (1, 1)
    } else if angle < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Canny edge detector: Gaussian blur, Sobel gradients, max-normalized
/// magnitude, 4-direction non-maximum suppression and double-threshold
/// hysteresis with 8-connectivity.
pub fn canny(img: &GrayImage, params: &CannyParams) -> Result<EdgeMap> {
    params.validate()?;
    let blurred = gaussian_blur(img, params.sigma)?;
    let grads = sobel_gradients(&blurred)?;
    let mag = normalized_magnitude(&grads);
    let (w, h) = (grads.width, grads.height);

    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // A pixel survives when it is not below its forward neighbour and
    // strictly above its backward one; exact ties keep the backward pixel.
    let mut thin = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m < params.low {
                continue;
            }
            let (dx, dy) = quantized_step(grads.gx[i], grads.gy[i]);
            let (xi, yi) = (x as isize, y as isize);
            let forward = at(xi + dx, yi + dy);
            let backward = at(xi - dx, yi - dy);
            if compare(m, forward).is_ge() && compare(m, backward).is_gt() {
                thin[i] = m;
            }
        }
    }

    let mut edges = vec![0u8; w * h];
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= params.high {
            edges[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if edges[j] == 0 && thin[j] >= params.low {
                    edges[j] = 1;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(EdgeMap {
        width: w,
        height: h,
        data: edges,
    })
}

/// Straight line in normal form: `x cos(theta) + y sin(theta) = rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughLine {
    pub rho: f64,
    /// Radians in `[0, pi)`.
    pub theta: f64,
    pub votes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughParams {
    pub theta_steps: usize,
    /// Accumulator bin width along rho, in pixels.
    pub rho_resolution: f64,
    pub min_votes: u32,
}

impl Default for HoughParams {
    fn default() -> Self {
        HoughParams {
            theta_steps: 180,
            rho_resolution: 1.0,
            min_votes: 20,
        }
    }
}

/// Dense (theta, rho) vote accumulator.
#[derive(Debug, Clone)]
pub struct HoughAccumulator {
    pub theta_steps: usize,
    pub rho_resolution: f64,
    /// Number of rho bins on each side of zero.
    pub rho_half: usize,
    votes: Vec<u32>,
}

impl HoughAccumulator {
    pub fn rho_bins(&self) -> usize {
        2 * self.rho_half + 1
    }

    pub fn votes(&self, theta_idx: usize, rho_idx: usize) -> u32 {
        self.votes[theta_idx * self.rho_bins() + rho_idx]
    }

    pub fn theta(&self, theta_idx: usize) -> f64 {
        theta_idx as f64 * PI / self.theta_steps as f64
    }

    pub fn rho(&self, rho_idx: usize) -> f64 {
        (rho_idx as f64 - self.rho_half as f64) * self.rho_resolution
    }
}

fn check_hough_params(params: &HoughParams) -> Result<()> {
    if params.theta_steps < 2 {
        return Err(Error::argument(format!(
            "hough theta_steps must be at least 2, got {}",
            params.theta_steps
        )));
    }
    if !(params.rho_resolution > 0.0) {
        return Err(Error::argument(format!(
            "hough rho_resolution must be positive, got {}",
            params.rho_resolution
        )));
    }
    if params.min_votes < 1 {
        return Err(Error::argument("hough min_votes must be at least 1"));
    }
    Ok(())
}

/// Accumulates votes of every edge pixel for `theta_steps` angles in
/// `[0, pi)`.
pub fn hough_accumulator(edges: &EdgeMap, params: &HoughParams) -> Result<HoughAccumulator> {
    check_hough_params(params)?;
    let diag = (edges.width as f64).hypot(edges.height as f64);
    let rho_half = (diag / params.rho_resolution).ceil() as usize;
    let bins = 2 * rho_half + 1;
    let trig: Vec<(f64, f64)> = (0..params.theta_steps)
        .map(|t| {
            let theta = t as f64 * PI / params.theta_steps as f64;
            (theta.cos(), theta.sin())
        })
        .collect();
    let mut votes = vec![0u32; params.theta_steps * bins];
    for (x, y) in edges.pixels() {
        for (t, &(c, s)) in trig.iter().enumerate() {
            let rho = x as f64 * c + y as f64 * s;
            let r = (rho / params.rho_resolution).round() as isize + rho_half as isize;
            votes[t * bins + r as usize] += 1;
        }
    }
    Ok(HoughAccumulator {
        theta_steps: params.theta_steps,
        rho_resolution: params.rho_resolution,
        rho_half,
        votes,
    })
}

/// Lines at local maxima of the Hough accumulator with at least
/// `min_votes` votes, sorted by votes descending, then theta and rho
/// ascending.
///
/// The theta axis wraps: the neighbour of theta index 0 across the seam is
/// the last theta index with rho negated.
pub fn hough_lines(edges: &EdgeMap, params: &HoughParams) -> Result<Vec<HoughLine>> {
    let acc = hough_accumulator(edges, params)?;
    let steps = acc.theta_steps as isize;
    let bins = acc.rho_bins() as isize;
    let mut lines = Vec::new();
    for t in 0..steps {
        for r in 0..bins {
            let v = acc.votes(t as usize, r as usize);
            if v < params.min_votes {
                continue;
            }
            let mut is_max = true;
            'nbrs: for dt in -1..=1isize {
                for dr in -1..=1isize {
                    if dt == 0 && dr == 0 {
                        continue;
                    }
                    let (mut nt, mut nr) = (t + dt, r + dr);
                    if nt < 0 || nt >= steps {
                        nt = nt.rem_euclid(steps);
                        nr = bins - 1 - nr;
                    }
                    if nr < 0 || nr >= bins {
                        continue;
                    }
                    let nv = acc.votes(nt as usize, nr as usize);
                    let earlier = (nt, nr) < (t, r);
                    if nv > v || (nv == v && earlier) {
                        is_max = false;
                        break 'nbrs;
                    }
                }
            }
            if is_max {
                lines.push(HoughLine {
                    rho: acc.rho(r as usize),
                    theta: acc.theta(t as usize),
                    votes: v,
                });
            }
        }
    }
    lines.sort_by(|a, b| {
        b.votes
            .cmp(&a.votes)
            .then(a.theta.total_cmp(&b.theta))
            .then(a.rho.total_cmp(&b.rho))
    });
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchMode {
    Canny,
    Hough,
}

impl std::str::FromStr for SketchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canny" => Ok(SketchMode::Canny),
            "hough" => Ok(SketchMode::Hough),
            other => Err(Error::argument(format!(
                "unknown sketch mode '{other}', expected canny or hough"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchParams {
    pub mode: SketchMode,
    pub canny: CannyParams,
    pub hough: HoughParams,
    /// Strongest lines drawn in hough mode.
    pub max_lines: usize,
}

impl Default for SketchParams {
    fn default() -> Self {
        SketchParams {
            mode: SketchMode::Canny,
            canny: CannyParams::default(),
            hough: HoughParams::default(),
            max_lines: 64,
        }
    }
}

/// Turns a photograph into a sketch-like image: black strokes on white.
///
/// Canny mode draws the edge map as-is. Hough mode draws the strongest
/// detected lines with a 1-pixel stroke, keeping only line pixels that lie
/// within one pixel of a detected edge. Applying this to its own output is
/// not guaranteed to reproduce it.
pub fn synthesize_sketch(img: &GrayImage, params: &SketchParams) -> Result<GrayImage> {
    let edges = canny(img, &params.canny)?;
    match params.mode {
        SketchMode::Canny => Ok(edges.to_sketch()),
        SketchMode::Hough => {
            let lines = hough_lines(&edges, &params.hough)?;
            Ok(rasterize_lines(&edges, &lines[..lines.len().min(params.max_lines)]).to_sketch())
        }
    }
}

/// Keeps the pixels of `edges` that lie on one of `lines`.
pub fn rasterize_lines(edges: &EdgeMap, lines: &[HoughLine]) -> EdgeMap {
    let (w, h) = (edges.width, edges.height);
    let mut out = EdgeMap::empty(w, h);
    let mut mark = |x: f64, y: f64| {
        let (xr, yr) = (x.round(), y.round());
        if xr < 0.0 || yr < 0.0 || xr >= w as f64 || yr >= h as f64 {
            return;
        }
        let (xi, yi) = (xr as usize, yr as usize);
        if edges.is_edge(xi, yi) {
            out.data[yi * w + xi] = 1;
        }
    };
    for line in lines {
        let (c, s) = (line.theta.cos(), line.theta.sin());
        if s.abs() >= c.abs() {
            for x in 0..w {
                mark(x as f64, (line.rho - x as f64 * c) / s);
            }
        } else {
            for y in 0..h {
                mark((line.rho - y as f64 * s) / c, y as f64);
            }
        }
    }
    out
}
