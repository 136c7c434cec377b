//! Automatic measures for evaluating sketch-to-render generative design
//! methods.
//!
//! Three measures, one per design criterion:
//!
//! - **content distance** ([`content`]): how well a render keeps the overall
//!   structure of the sketch it was generated from, as the mean absolute
//!   difference of content embeddings;
//! - **FID** ([`fid`]): realism, the Frechet distance between Gaussian fits of
//!   real and generated image features;
//! - **structural diversity** ([`ssim`]): one minus the mean pairwise SSIM of
//!   the renders produced from one sketch.
//!
//! [`edges`] synthesizes sketch-like training inputs from photographs,
//! [`stats`] provides summaries and t-tests, and [`harness`] runs the whole
//! protocol over a manifest and renders a report table.

pub mod content;
pub mod edges;
pub mod error;
pub mod features;
pub mod fid;
pub mod harness;
pub mod imaging;
mod serde_f64;
pub mod ssim;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use imaging::GrayImage;
