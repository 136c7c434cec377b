//! Procedurally generated benchmark corpus.
//!
//! Sketches are line drawings of simple building masses with window grids.
//! Three synthetic methods produce renders from them:
//!
//! - `identity` returns the sketch unchanged for every render;
//! - `noisy-copy` redraws the sketch with jittered strokes and pixel noise;
//! - `shuffled-unrelated` returns noisy copies of *other* sketches.
//!
//! The real corpus contains shaded facade images. Everything is derived
//! from one seed, so the corpus is identical across runs and platforms.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::error::{Error, Result};
use crate::imaging::{save_png, GrayImage};

pub const IDENTITY: &str = "identity";
pub const NOISY_COPY: &str = "noisy-copy";
pub const SHUFFLED_UNRELATED: &str = "shuffled-unrelated";

const BACKGROUND: f64 = 0.96;
const INK: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    pub sketches: usize,
    pub renders_per_sketch: usize,
    pub real_images: usize,
    /// Square image side in pixels.
    pub size: usize,
    pub seed: u64,
    /// Maximum stroke displacement of noisy copies, in pixels.
    pub jitter: f64,
    /// Standard deviation of additive pixel noise in noisy copies.
    pub noise: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            sketches: 6,
            renders_per_sketch: 10,
            real_images: 50,
            size: 256,
            seed: 20_240_601,
            jitter: 2.0,
            noise: 0.06,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: (f64, f64),
    b: (f64, f64),
}

/// Line-art description of one sketch.
#[derive(Debug, Clone)]
pub struct Drawing {
    segments: Vec<Segment>,
}

fn rect(segments: &mut Vec<Segment>, x0: f64, y0: f64, x1: f64, y1: f64) {
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    for i in 0..4 {
        segments.push(Segment {
            a: corners[i],
            b: corners[(i + 1) % 4],
        });
    }
}

impl Drawing {
    /// Random building: one or two masses on a ground line, window grids,
    /// and an optional pitched roof.
    pub fn random(rng: &mut impl Rng, size: usize) -> Self {
        let s = size as f64;
        let ground = s * rng.random_range(0.80..0.90);
        let mut segments = vec![Segment {
            a: (s * 0.04, ground),
            b: (s * 0.96, ground),
        }];
        let masses = rng.random_range(1..=2);
        let mut left = s * rng.random_range(0.08..0.18);
        for m in 0..masses {
            let remaining = s * 0.92 - left;
            let width = if masses == 1 || m == 1 {
                remaining * rng.random_range(0.6..0.95)
            } else {
                remaining * rng.random_range(0.35..0.55)
            };
            let top = ground - s * rng.random_range(0.25..0.65);
            let right = left + width;
            rect(&mut segments, left, top, right, ground);

            let cols = rng.random_range(2..=5);
            let rows = rng.random_range(2..=6);
            let (cw, rh) = ((right - left) / cols as f64, (ground - top) / rows as f64);
            for r in 0..rows {
                for c in 0..cols {
                    if r == rows - 1 && c == cols / 2 {
                        // Door
                        let dx = left + c as f64 * cw;
                        rect(
                            &mut segments,
                            dx + cw * 0.3,
                            top + r as f64 * rh + rh * 0.2,
                            dx + cw * 0.7,
                            ground,
                        );
                        continue;
                    }
                    let (wx, wy) = (left + c as f64 * cw, top + r as f64 * rh);
                    rect(
                        &mut segments,
                        wx + cw * 0.25,
                        wy + rh * 0.25,
                        wx + cw * 0.75,
                        wy + rh * 0.7,
                    );
                }
            }
            if rng.random_bool(0.5) {
                let peak = ((left + right) / 2.0, top - s * rng.random_range(0.06..0.15));
                segments.push(Segment {
                    a: (left, top),
                    b: peak,
                });
                segments.push(Segment {
                    a: peak,
                    b: (right, top),
                });
            }
            left = right + s * rng.random_range(0.0..0.04);
        }
        Drawing { segments }
    }

    /// Same drawing with every endpoint moved by up to `jitter` pixels.
    pub fn jittered(&self, rng: &mut impl Rng, jitter: f64) -> Drawing {
        if jitter <= 0.0 {
            return self.clone();
        }
        let mut j = |p: (f64, f64)| {
            (
                p.0 + rng.random_range(-jitter..=jitter),
                p.1 + rng.random_range(-jitter..=jitter),
            )
        };
        Drawing {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    a: j(s.a),
                    b: j(s.b),
                })
                .collect(),
        }
    }

    /// Dark strokes, two pixels wide, on a light background.
    pub fn render(&self, size: usize) -> GrayImage {
        let mut data = vec![BACKGROUND; size * size];
        for seg in &self.segments {
            let (dx, dy) = (seg.b.0 - seg.a.0, seg.b.1 - seg.a.1);
            let steps = (dx.abs().max(dy.abs()) * 2.0).ceil().max(1.0) as usize;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let (x, y) = (seg.a.0 + t * dx, seg.a.1 + t * dy);
                for (ox, oy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                    let (px, py) = ((x - 0.5 + ox).floor(), (y - 0.5 + oy).floor());
                    if px >= 0.0 && py >= 0.0 && px < size as f64 && py < size as f64 {
                        data[py as usize * size + px as usize] = INK;
                    }
                }
            }
        }
        GrayImage::from_raw_clamped(size, size, data)
    }
}

fn add_noise(img: &GrayImage, rng: &mut impl Rng, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let data = img.data().iter().map(|v| v + normal.sample(rng)).collect();
    GrayImage::from_raw_clamped(img.width(), img.height(), data)
}

/// Shaded facade photograph stand-in: sky gradient, a lit building mass
/// with dark windows, and sensor noise.
pub fn real_image(rng: &mut impl Rng, size: usize) -> GrayImage {
    let s = size as f64;
    let sky_top = rng.random_range(0.6..0.9);
    let sky_bottom = rng.random_range(0.75..1.0);
    let facade = rng.random_range(0.3..0.7);
    let window = facade * rng.random_range(0.2..0.6);
    let ground = s * rng.random_range(0.78..0.92);
    let (left, right) = (
        s * rng.random_range(0.05..0.3),
        s * rng.random_range(0.7..0.95),
    );
    let top = ground - s * rng.random_range(0.3..0.7);
    let (cols, rows) = (
        rng.random_range(3..=7) as f64,
        rng.random_range(3..=8) as f64,
    );
    let (cw, rh) = ((right - left) / cols, (ground - top) / rows);
    let shade = rng.random_range(-0.15..0.15);
    let clean = GrayImage::from_fn(size, size, |x, y| {
        let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
        if yf >= ground {
            return 0.35;
        }
        if xf >= left && xf < right && yf >= top {
            let (u, v) = (((xf - left) / cw).fract(), ((yf - top) / rh).fract());
            let lit = facade + shade * (xf - left) / (right - left);
            if (0.25..0.75).contains(&u) && (0.25..0.7).contains(&v) {
                return window;
            }
            return lit;
        }
        sky_top + (sky_bottom - sky_top) * yf / s
    })
    .expect("valid size");
    add_noise(&clean, rng, 0.02)
}

/// In-memory benchmark corpus.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub sketches: Vec<GrayImage>,
    /// `(method name, renders[sketch][k])`
    pub methods: Vec<(String, Vec<Vec<GrayImage>>)>,
    pub real: Vec<GrayImage>,
}

pub fn generate(spec: &BenchmarkSpec) -> Result<Benchmark> {
    if spec.sketches < 2 || spec.renders_per_sketch < 1 || spec.size < 32 {
        return Err(Error::argument(
            "benchmark needs at least 2 sketches, 1 render per sketch and 32-pixel images",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let drawings: Vec<Drawing> = (0..spec.sketches)
        .map(|_| Drawing::random(&mut rng, spec.size))
        .collect();
    let sketches: Vec<GrayImage> = drawings.iter().map(|d| d.render(spec.size)).collect();

    let noisy = |d: &Drawing, rng: &mut ChaCha8Rng| {
        add_noise(
            &d.jittered(rng, spec.jitter).render(spec.size),
            rng,
            spec.noise,
        )
    };

    let identity = sketches
        .iter()
        .map(|s| vec![s.clone(); spec.renders_per_sketch])
        .collect();
    let noisy_copy = drawings
        .iter()
        .map(|d| {
            (0..spec.renders_per_sketch)
                .map(|_| noisy(d, &mut rng))
                .collect()
        })
        .collect();
    let n = spec.sketches;
    let shuffled = (0..n)
        .map(|i| {
            (0..spec.renders_per_sketch)
                .map(|k| noisy(&drawings[(i + 1 + k % (n - 1)) % n], &mut rng))
                .collect()
        })
        .collect();
    let real = (0..spec.real_images)
        .map(|_| real_image(&mut rng, spec.size))
        .collect();

    Ok(Benchmark {
        sketches,
        methods: vec![
            (IDENTITY.to_string(), identity),
            (NOISY_COPY.to_string(), noisy_copy),
            (SHUFFLED_UNRELATED.to_string(), shuffled),
        ],
        real,
    })
}

fn sketch_id(i: usize) -> String {
    format!("s{:02}", i + 1)
}

/// Writes the corpus as PNG files plus `manifest.json` under `dir` and
/// returns the manifest path.
pub fn write_benchmark(dir: impl AsRef<Path>, spec: &BenchmarkSpec) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let bench = generate(spec)?;
    let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::input(p, e));
    for sub in ["sketches", "real", "methods"] {
        mkdir(&dir.join(sub))?;
    }

    let mut sketches = Vec::new();
    for (i, img) in bench.sketches.iter().enumerate() {
        let rel = format!("sketches/{}.png", sketch_id(i));
        save_png(img, dir.join(&rel))?;
        sketches.push(json!({ "id": sketch_id(i), "image": rel }));
    }
    let mut real = Vec::new();
    for (i, img) in bench.real.iter().enumerate() {
        let rel = format!("real/r{:03}.png", i + 1);
        save_png(img, dir.join(&rel))?;
        real.push(json!(rel));
    }
    let mut methods = Vec::new();
    for (name, groups) in &bench.methods {
        mkdir(&dir.join("methods").join(name))?;
        let mut render_groups = Vec::new();
        for (i, renders) in groups.iter().enumerate() {
            let mut images = Vec::new();
            for (k, img) in renders.iter().enumerate() {
                let rel = format!("methods/{name}/{}_{k:02}.png", sketch_id(i));
                save_png(img, dir.join(&rel))?;
                images.push(json!(rel));
            }
            render_groups.push(json!({ "sketch_id": sketch_id(i), "images": images }));
        }
        methods.push(json!({ "name": name, "render_groups": render_groups }));
    }
    let manifest = json!({
        "_comment": "synthetic benchmark: procedurally generated sketches, renders and real images",
        "real_images": real,
        "sketches": sketches,
        "methods": methods,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::input(&path, e))?;
    Ok(path)
}
