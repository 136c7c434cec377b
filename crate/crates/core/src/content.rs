//! Content distance between a sketch and its renders.
//!
//! Embeddings come either from an external encoder (loaded from the
//! feature CSV format) or from the built-in proxy encoder, which describes
//! an image by the density of Canny edges in a 16x16 grid of cells. The
//! proxy captures coarse layout and ignores palette and fine texture.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::edges::{canny, CannyParams, EdgeMap};
use crate::error::{Error, Result};
use crate::features::{load_feature_csv, FeatureTable};
use crate::imaging::GrayImage;

/// Cells per side of the proxy encoder grid.
pub const PROXY_GRID: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderTag {
    External,
    ProxyEdge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentEmbedding {
    pub id: String,
    pub values: Vec<f64>,
    pub encoder: EncoderTag,
}

impl ContentEmbedding {
    pub fn new(id: impl Into<String>, values: Vec<f64>, encoder: EncoderTag) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(Error::argument(format!("embedding '{id}' is empty")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument(format!(
                "embedding '{id}' has a non-finite value"
            )));
        }
        Ok(ContentEmbedding {
            id,
            values,
            encoder,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// How absolute component differences are aggregated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum L1Aggregation {
    /// Mean over components, comparable across embedding sizes.
    #[default]
    Mean,
    /// Plain L1 sum.
    Sum,
}

/// Fraction of edge pixels in each cell of a 16x16 grid, row-major over
/// cells. Cell boundaries are `floor(i * width / 16)`.
pub fn edge_density_grid(edges: &EdgeMap) -> Result<Vec<f64>> {
    let (w, h) = (edges.width(), edges.height());
    if w < PROXY_GRID || h < PROXY_GRID {
        return Err(Error::argument(format!(
            "proxy content encoding needs at least {PROXY_GRID}x{PROXY_GRID} pixels, got {w}x{h}"
        )));
    }
    let bounds =
        |len: usize| -> Vec<usize> { (0..=PROXY_GRID).map(|i| i * len / PROXY_GRID).collect() };
    let (xb, yb) = (bounds(w), bounds(h));
    let mut out = Vec::with_capacity(PROXY_GRID * PROXY_GRID);
    for cy in 0..PROXY_GRID {
        for cx in 0..PROXY_GRID {
            let mut count = 0usize;
            for y in yb[cy]..yb[cy + 1] {
                for x in xb[cx]..xb[cx + 1] {
                    count += edges.is_edge(x, y) as usize;
                }
            }
            let area = (yb[cy + 1] - yb[cy]) * (xb[cx + 1] - xb[cx]);
            out.push(count as f64 / area as f64);
        }
    }
    Ok(out)
}

/// Deterministic stand-in for a learned content encoder: Canny edges with
/// default parameters pooled into a 256-dimensional edge-density vector.
pub fn proxy_content_encoding(img: &GrayImage, id: impl Into<String>) -> Result<ContentEmbedding> {
    if img.width() < PROXY_GRID || img.height() < PROXY_GRID {
        return Err(Error::argument(format!(
            "proxy content encoding needs at least {PROXY_GRID}x{PROXY_GRID} pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let edges = canny(img, &CannyParams::default())?;
    ContentEmbedding::new(id, edge_density_grid(&edges)?, EncoderTag::ProxyEdge)
}

pub fn embeddings_from_table(table: &FeatureTable) -> Vec<ContentEmbedding> {
    table
        .iter()
        .map(|(id, values)| ContentEmbedding {
            id: id.to_string(),
            values: values.to_vec(),
            encoder: EncoderTag::External,
        })
        .collect()
}

/// Reads externally computed embeddings from the feature CSV format.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<ContentEmbedding>> {
    Ok(embeddings_from_table(&load_feature_csv(path)?))
}

/// Mean absolute component difference.
pub fn content_distance(sketch: &ContentEmbedding, render: &ContentEmbedding) -> Result<f64> {
    content_distance_with(sketch, render, L1Aggregation::Mean)
}

pub fn content_distance_with(
    sketch: &ContentEmbedding,
    render: &ContentEmbedding,
    aggregation: L1Aggregation,
) -> Result<f64> {
    if sketch.encoder != render.encoder {
        return Err(Error::argument(format!(
            "cannot compare embeddings from different encoders ({:?} '{}' vs {:?} '{}')",
            sketch.encoder, sketch.id, render.encoder, render.id
        )));
    }
    if sketch.dim() != render.dim() {
        return Err(Error::argument(format!(
            "embedding dimensions differ: '{}' has {}, '{}' has {}",
            sketch.id,
            sketch.dim(),
            render.id,
            render.dim()
        )));
    }
    let sum: f64 = sketch
        .values
        .iter()
        .zip(&render.values)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(match aggregation {
        L1Aggregation::Mean => sum / sketch.dim() as f64,
        L1Aggregation::Sum => sum,
    })
}
