//! End-to-end evaluation of image-to-image methods over a sketch corpus.
//!
//! For every method the harness reports content distance (sketch vs each
//! render), FID of the pooled renders against the real corpus, and the
//! structural diversity of each sketch's render set. A baseline row scores
//! the sketches themselves, and every pair of rows is compared with a
//! two-tailed t-test on content distance and diversity.
//!
//! Work fans out over rayon, but every reduction folds results in manifest
//! order, so the report does not depend on the number of worker threads.

mod manifest;
mod report;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::{
    content_distance_with, embeddings_from_table, proxy_content_encoding, ContentEmbedding,
    L1Aggregation,
};
use crate::error::{Error, Result};
use crate::features::{load_feature_csv, FeatureTable};
use crate::fid::{fid, FeatureMatrix, FeatureSource, DEFAULT_FID_EPS};
use crate::imaging::{
    dct_descriptor, load_image, resize_bilinear, GrayImage, DEFAULT_DESCRIPTOR_DIMS,
};
use crate::ssim::{structural_diversity, RenderSet, SsimParams};
use crate::stats::{summarize, t_test, TTestKind};

pub use manifest::{
    load_manifest, parse_manifest, render_id, Manifest, MethodEntry, RenderGroup, SketchEntry,
};
pub use report::{
    parse_json_report, render_report, CorpusSizes, EvaluationReport, MethodRow, MethodSize, Metric,
    Provenance, ReportFormat, SignificanceEntry, SKETCH_BASELINE,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub alpha: f64,
    pub fid_eps: f64,
    pub ssim: SsimParams,
    pub descriptor_dims: usize,
    /// Every image is resized to this square side before any metric.
    pub metric_resolution: usize,
    pub include_sketch_baseline: bool,
    /// Average content distance per sketch before summarizing and testing.
    pub per_sketch_content: bool,
    pub content_aggregation: L1Aggregation,
    pub test_kind: TTestKind,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            alpha: 0.05,
            fid_eps: DEFAULT_FID_EPS,
            ssim: SsimParams::default(),
            descriptor_dims: DEFAULT_DESCRIPTOR_DIMS,
            metric_resolution: 256,
            include_sketch_baseline: true,
            per_sketch_content: false,
            content_aggregation: L1Aggregation::Mean,
            test_kind: TTestKind::Welch,
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::argument(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.fid_eps >= 0.0) || !self.fid_eps.is_finite() {
            return Err(Error::argument(format!(
                "fid_eps must be >= 0, got {}",
                self.fid_eps
            )));
        }
        self.ssim.validate()?;
        if self.descriptor_dims == 0 || self.descriptor_dims > 1024 {
            return Err(Error::argument(format!(
                "descriptor_dims must be in 1..=1024, got {}",
                self.descriptor_dims
            )));
        }
        if self.metric_resolution < self.ssim.window_size.max(16) {
            return Err(Error::argument(format!(
                "metric_resolution {} is smaller than the ssim window or the 16x16 content grid",
                self.metric_resolution
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::input(path, e))?;
        let cfg: EvaluationConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_resized(path: &Path, side: usize) -> Result<GrayImage> {
    resize_bilinear(&load_image(path)?, side, side)
}

fn descriptor_matrix(images: &[GrayImage], dims: usize) -> Result<FeatureMatrix> {
    let rows = images
        .par_iter()
        .map(|img| dct_descriptor(img, dims))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_rows(&rows, FeatureSource::BuiltinDescriptor)
}

fn rows_for_ids(
    table: &FeatureTable,
    ids: &[String],
) -> std::result::Result<Vec<Vec<f64>>, Vec<String>> {
    let missing: Vec<String> = ids
        .iter()
        .filter(|id| table.get(id).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(missing);
    }
    Ok(ids
        .iter()
        .map(|id| table.get(id).unwrap().to_vec())
        .collect())
}

fn preview(ids: &[String]) -> String {
    let head: Vec<&str> = ids.iter().take(3).map(String::as_str).collect();
    if ids.len() > 3 {
        format!("{} and {} more", head.join(", "), ids.len() - 3)
    } else {
        head.join(", ")
    }
}

/// Realism reference corpus, resolved once for all methods.
enum RealFeatures {
    Descriptor(FeatureMatrix),
    External(FeatureMatrix),
    Unavailable(String),
}

struct Sketches {
    images: Vec<GrayImage>,
    proxy: Vec<ContentEmbedding>,
    index: HashMap<String, usize>,
}

/// Everything needed to score one method besides its manifest entry.
struct Context<'a> {
    cfg: &'a EvaluationConfig,
    sketches: &'a Sketches,
    real: &'a RealFeatures,
}

fn load_sketches(m: &Manifest, cfg: &EvaluationConfig) -> Result<Sketches> {
    let side = cfg.metric_resolution;
    let images = m
        .sketches
        .par_iter()
        .map(|s| load_resized(&s.image, side).map_err(|e| e.context(format!("sketch '{}'", s.id))))
        .collect::<Result<Vec<_>>>()?;
    let proxy = images
        .par_iter()
        .zip(m.sketches.par_iter())
        .map(|(img, s)| proxy_content_encoding(img, s.id.clone()))
        .collect::<Result<Vec<_>>>()?;
    let index = m
        .sketches
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), i))
        .collect();
    Ok(Sketches {
        images,
        proxy,
        index,
    })
}

fn load_real(m: &Manifest, cfg: &EvaluationConfig) -> RealFeatures {
    if let Some(path) = &m.real_features_file {
        return match load_feature_csv(path).and_then(|t| FeatureMatrix::from_table(&t)) {
            Ok(f) => RealFeatures::External(f),
            Err(e) => RealFeatures::Unavailable(format!("real feature file unusable: {e}")),
        };
    }
    if m.real_images.is_empty() {
        return RealFeatures::Unavailable("no real images in the manifest".into());
    }
    let side = cfg.metric_resolution;
    let result = m
        .real_images
        .par_iter()
        .map(|p| load_resized(p, side))
        .collect::<Result<Vec<_>>>()
        .and_then(|imgs| descriptor_matrix(&imgs, cfg.descriptor_dims));
    match result {
        Ok(f) => RealFeatures::Descriptor(f),
        Err(e) => RealFeatures::Unavailable(format!("real corpus unusable: {e}")),
    }
}

fn fid_against_real(
    ctx: &Context<'_>,
    generated: &FeatureMatrix,
    warnings: &mut Vec<String>,
) -> Option<f64> {
    let real = match (ctx.real, generated.source) {
        (RealFeatures::Unavailable(why), _) => {
            warnings.push(format!("FID skipped: {why}"));
            return None;
        }
        (RealFeatures::Descriptor(f), FeatureSource::BuiltinDescriptor)
        | (RealFeatures::External(f), FeatureSource::ExternalFile) => f,
        (RealFeatures::Descriptor(_), FeatureSource::ExternalFile) => {
            warnings.push(
                "FID skipped: method supplies external features but the real corpus uses the \
                 built-in descriptor (add real_features_file)"
                    .into(),
            );
            return None;
        }
        (RealFeatures::External(_), FeatureSource::BuiltinDescriptor) => {
            warnings.push(
                "FID skipped: real corpus uses external features but the method has no \
                 features_file"
                    .into(),
            );
            return None;
        }
    };
    if generated.n() < 2 {
        warnings.push(format!("FID skipped: only {} render(s)", generated.n()));
        return None;
    }
    match fid(real, generated, ctx.cfg.fid_eps) {
        Ok(r) => {
            warnings.extend(r.warnings);
            Some(r.distance)
        }
        Err(e) => {
            warnings.push(format!("FID failed: {e}"));
            None
        }
    }
}

/// External embeddings for the sketch and every render of every group, or
/// the reason they cannot be used.
fn external_embeddings(
    method: &MethodEntry,
) -> Result<Option<std::result::Result<HashMap<String, ContentEmbedding>, String>>> {
    let Some(path) = &method.embeddings_file else {
        return Ok(None);
    };
    let table = load_feature_csv(path)?;
    let mut ids = Vec::new();
    for g in &method.render_groups {
        ids.push(g.sketch_id.clone());
        ids.extend((0..g.images.len()).map(|k| g.render_id(k)));
    }
    let missing: Vec<String> = ids
        .iter()
        .filter(|id| table.get(id).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Ok(Some(Err(format!(
            "embeddings file lacks {} id(s) ({}); using the proxy encoder",
            missing.len(),
            preview(&missing)
        ))));
    }
    Ok(Some(Ok(embeddings_from_table(&table)
        .into_iter()
        .map(|e| (e.id.clone(), e))
        .collect())))
}

fn evaluate_method(ctx: &Context<'_>, method: &MethodEntry) -> Result<MethodRow> {
    let cfg = ctx.cfg;
    let mut row = MethodRow::new(method.name.clone());

    // Flattened (group, render) order is the manifest order.
    let flat: Vec<(usize, usize)> = method
        .render_groups
        .iter()
        .enumerate()
        .flat_map(|(g, group)| (0..group.images.len()).map(move |k| (g, k)))
        .collect();
    let renders = flat
        .par_iter()
        .map(|&(g, k)| {
            let group = &method.render_groups[g];
            load_resized(&group.images[k], cfg.metric_resolution)
                .map_err(|e| e.context(format!("render {}", group.render_id(k))))
        })
        .collect::<Result<Vec<_>>>()?;

    // Content distance.
    let external = match external_embeddings(method)? {
        None => None,
        Some(Ok(map)) => Some(map),
        Some(Err(warning)) => {
            row.warnings.push(warning);
            None
        }
    };
    let per_render = flat
        .par_iter()
        .zip(renders.par_iter())
        .map(|(&(g, k), img)| {
            let group = &method.render_groups[g];
            let rid = group.render_id(k);
            match &external {
                Some(map) => content_distance_with(
                    &map[&group.sketch_id],
                    &map[&rid],
                    cfg.content_aggregation,
                ),
                None => {
                    let sketch = &ctx.sketches.proxy[ctx.sketches.index[&group.sketch_id]];
                    let render = proxy_content_encoding(img, rid)?;
                    content_distance_with(sketch, &render, cfg.content_aggregation)
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    row.content_samples = if cfg.per_sketch_content {
        let mut out = Vec::with_capacity(method.render_groups.len());
        let mut offset = 0;
        for group in &method.render_groups {
            let chunk = &per_render[offset..offset + group.images.len()];
            out.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
            offset += group.images.len();
        }
        out
    } else {
        per_render
    };
    row.content = Some(summarize(&row.content_samples)?);

    // FID over renders pooled across sketches.
    let generated = match &method.features_file {
        Some(path) => {
            let table = load_feature_csv(path)?;
            let ids: Vec<String> = flat
                .iter()
                .map(|&(g, k)| method.render_groups[g].render_id(k))
                .collect();
            match rows_for_ids(&table, &ids) {
                Ok(rows) => Some(FeatureMatrix::from_rows(
                    &rows,
                    FeatureSource::ExternalFile,
                )?),
                Err(missing) => {
                    row.warnings.push(format!(
                        "FID skipped: features file lacks {} render id(s) ({})",
                        missing.len(),
                        preview(&missing)
                    ));
                    None
                }
            }
        }
        None => Some(descriptor_matrix(&renders, cfg.descriptor_dims)?),
    };
    if let Some(generated) = generated {
        row.fid = fid_against_real(ctx, &generated, &mut row.warnings);
    }

    // Structural diversity per render group.
    let mut offset = 0;
    let mut diversity = Vec::with_capacity(method.render_groups.len());
    for group in &method.render_groups {
        let n = group.images.len();
        let set = RenderSet::new(
            group.sketch_id.clone(),
            renders[offset..offset + n].to_vec(),
        )?;
        offset += n;
        if n < 2 {
            row.warnings.push(format!(
                "sketch '{}' has a single render; diversity is 0 by convention",
                group.sketch_id
            ));
        }
        diversity.push(
            structural_diversity(&set, &cfg.ssim)
                .map_err(|e| e.context(format!("sketch '{}'", group.sketch_id)))?,
        );
    }
    row.diversity = Some(summarize(&diversity)?);
    row.diversity_samples = diversity;
    Ok(row)
}

fn sketch_baseline_row(ctx: &Context<'_>) -> Result<MethodRow> {
    let cfg = ctx.cfg;
    let sketches = ctx.sketches;
    let mut row = MethodRow::new(SKETCH_BASELINE);
    row.content_samples = sketches
        .proxy
        .iter()
        .map(|e| content_distance_with(e, e, cfg.content_aggregation))
        .collect::<Result<_>>()?;
    row.content = Some(summarize(&row.content_samples)?);

    match ctx.real {
        RealFeatures::External(_) => row
            .warnings
            .push("FID skipped: real corpus uses external features and sketches have none".into()),
        _ => {
            let features = descriptor_matrix(&sketches.images, cfg.descriptor_dims)?;
            row.fid = fid_against_real(ctx, &features, &mut row.warnings);
        }
    }

    row.diversity_samples = sketches
        .images
        .iter()
        .zip(&sketches.proxy)
        .map(|(img, e)| {
            let set = RenderSet::new(e.id.clone(), vec![img.clone()])?;
            structural_diversity(&set, &cfg.ssim)
        })
        .collect::<Result<_>>()?;
    row.diversity = Some(summarize(&row.diversity_samples)?);
    Ok(row)
}

fn significance(
    rows: &[MethodRow],
    cfg: &EvaluationConfig,
    warnings: &mut Vec<String>,
) -> Vec<SignificanceEntry> {
    let mut out = Vec::new();
    for metric in [Metric::ContentDistance, Metric::StructuralDiversity] {
        let samples = |r: &MethodRow| -> Vec<f64> {
            match metric {
                Metric::ContentDistance => r.content_samples.clone(),
                Metric::StructuralDiversity => r.diversity_samples.clone(),
            }
        };
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let (a, b) = (samples(&rows[i]), samples(&rows[j]));
                match t_test(&a, &b, cfg.alpha, cfg.test_kind) {
                    Ok(test) => out.push(SignificanceEntry {
                        metric,
                        method_a: rows[i].name.clone(),
                        method_b: rows[j].name.clone(),
                        test,
                    }),
                    Err(e) => warnings.push(format!(
                        "{} t-test {} vs {} skipped: {e}",
                        metric.label(),
                        rows[i].name,
                        rows[j].name
                    )),
                }
            }
        }
    }
    out
}

/// Runs the full protocol. Failures inside one method become warnings on
/// that method's row; only invalid configuration or unreadable sketches
/// abort the whole evaluation.
pub fn evaluate(m: &Manifest, cfg: &EvaluationConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let sketches = load_sketches(m, cfg)?;
    let real = load_real(m, cfg);
    let ctx = Context {
        cfg,
        sketches: &sketches,
        real: &real,
    };

    let mut rows = Vec::with_capacity(m.methods.len() + 1);
    for method in &m.methods {
        match evaluate_method(&ctx, method) {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("method '{}' aborted: {e}", method.name);
                let mut row = MethodRow::new(method.name.clone());
                row.warnings.push(format!("evaluation aborted: {e}"));
                rows.push(row);
            }
        }
    }
    let mut notes = vec![
        "content distance uses external embeddings when a method's embeddings_file covers the \
         sketch and all renders, otherwise the built-in edge-density proxy encoder"
            .to_string(),
        "FID uses external features when both the real corpus and the method provide them, \
         otherwise the built-in DCT descriptor"
            .to_string(),
    ];
    if cfg.include_sketch_baseline {
        rows.push(sketch_baseline_row(&ctx)?);
        notes.push(format!(
            "'{SKETCH_BASELINE}' compares each sketch with itself through the active encoder, \
             so its content distance is exactly 0; a learned encoder that regenerates the \
             sketch before encoding would report a small positive value"
        ));
    }

    let mut warnings = Vec::new();
    let significance = significance(&rows, cfg, &mut warnings);

    Ok(EvaluationReport {
        rows,
        significance,
        warnings,
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: *cfg,
            corpus: CorpusSizes {
                real_images: m.real_images.len(),
                sketches: m.sketches.len(),
                methods: m
                    .methods
                    .iter()
                    .map(|me| MethodSize {
                        name: me.name.clone(),
                        render_groups: me.render_groups.len(),
                        renders: me.render_count(),
                    })
                    .collect(),
            },
            notes,
        },
    })
}

/// [`evaluate`] on a dedicated pool of `workers` threads.
pub fn evaluate_with_workers(
    m: &Manifest,
    cfg: &EvaluationConfig,
    workers: usize,
) -> Result<EvaluationReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::argument(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| evaluate(m, cfg))
}
