//! Python bindings for `design_eval`.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use design_eval::content::{self, ContentEmbedding, EncoderTag, L1Aggregation};
use design_eval::edges::{self, CannyParams, EdgeMap, HoughParams, SketchMode, SketchParams};
use design_eval::fid::{
    self as fid_mod, FeatureMatrix, FeatureSource, GaussianStats, DEFAULT_FID_EPS,
};
use design_eval::harness::{self, EvaluationConfig, ReportFormat};
use design_eval::ssim::{self as ssim_mod, RenderSet, SsimParams};
use design_eval::stats::{self, TTestKind};
use design_eval::{imaging, synthetic, Error};

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.root() {
        Error::Input { .. } | Error::MissingFiles(_) => PyOSError::new_err(msg),
        Error::Numerical(_) => PyArithmeticError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for design_eval::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Grayscale image with values in [0, 1], stored row-major.
#[pyclass(
    name = "GrayImage",
    module = "design_eval_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyGrayImage {
    inner: imaging::GrayImage,
}

impl From<imaging::GrayImage> for PyGrayImage {
    fn from(inner: imaging::GrayImage) -> Self {
        PyGrayImage { inner }
    }
}

#[pymethods]
impl PyGrayImage {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(imaging::GrayImage::new(width, height, data).py()?.into())
    }

    #[staticmethod]
    fn constant(width: usize, height: usize, value: f64) -> PyResult<Self> {
        Ok(imaging::GrayImage::constant(width, height, value)
            .py()?
            .into())
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<f64> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err(format!(
                "pixel ({x}, {y}) out of bounds"
            )));
        }
        Ok(self.inner.get(x, y))
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn save_png(&self, path: PathBuf) -> PyResult<()> {
        imaging::save_png(&self.inner, path).py()
    }

    fn __eq__(&self, other: &PyGrayImage) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Binary edge map.
#[pyclass(
    name = "EdgeMap",
    module = "design_eval_py",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyEdgeMap {
    inner: EdgeMap,
}

#[pymethods]
impl PyEdgeMap {
    #[new]
    fn new(width: usize, height: usize, data: Vec<u8>) -> PyResult<Self> {
        Ok(PyEdgeMap {
            inner: EdgeMap::new(width, height, data).py()?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn count(&self) -> usize {
        self.inner.count()
    }

    fn data(&self) -> Vec<u8> {
        self.inner.data().to_vec()
    }

    /// Edge pixels as (x, y) pairs in row-major order.
    fn pixels(&self) -> Vec<(usize, usize)> {
        self.inner.pixels().collect()
    }

    fn to_sketch(&self) -> PyGrayImage {
        self.inner.to_sketch().into()
    }
}

#[pyfunction]
fn load_image(path: PathBuf) -> PyResult<PyGrayImage> {
    Ok(imaging::load_image(path).py()?.into())
}

#[pyfunction]
fn resize_bilinear(img: &PyGrayImage, width: usize, height: usize) -> PyResult<PyGrayImage> {
    Ok(imaging::resize_bilinear(&img.inner, width, height)
        .py()?
        .into())
}

#[pyfunction]
fn gaussian_blur(img: &PyGrayImage, sigma: f64) -> PyResult<PyGrayImage> {
    Ok(imaging::gaussian_blur(&img.inner, sigma).py()?.into())
}

#[pyfunction]
#[pyo3(signature = (img, dims = imaging::DEFAULT_DESCRIPTOR_DIMS))]
fn dct_descriptor(img: &PyGrayImage, dims: usize) -> PyResult<Vec<f64>> {
    imaging::dct_descriptor(&img.inner, dims).py()
}

#[pyfunction]
#[pyo3(signature = (img, sigma = 1.4, low = 0.1, high = 0.3))]
fn canny(img: &PyGrayImage, sigma: f64, low: f64, high: f64) -> PyResult<PyEdgeMap> {
    Ok(PyEdgeMap {
        inner: edges::canny(&img.inner, &CannyParams { sigma, low, high }).py()?,
    })
}

/// Returns (rho, theta, votes) tuples, strongest first.
#[pyfunction]
#[pyo3(signature = (edge_map, theta_steps = 180, rho_resolution = 1.0, min_votes = 20))]
fn hough_lines(
    edge_map: &PyEdgeMap,
    theta_steps: usize,
    rho_resolution: f64,
    min_votes: u32,
) -> PyResult<Vec<(f64, f64, u32)>> {
    let params = HoughParams {
        theta_steps,
        rho_resolution,
        min_votes,
    };
    let lines = edges::hough_lines(&edge_map.inner, &params).py()?;
    Ok(lines.iter().map(|l| (l.rho, l.theta, l.votes)).collect())
}

#[pyfunction]
#[pyo3(signature = (img, mode = "canny", sigma = 1.4, low = 0.1, high = 0.3))]
fn synthesize_sketch(
    img: &PyGrayImage,
    mode: &str,
    sigma: f64,
    low: f64,
    high: f64,
) -> PyResult<PyGrayImage> {
    let params = SketchParams {
        mode: mode.parse::<SketchMode>().py()?,
        canny: CannyParams { sigma, low, high },
        ..Default::default()
    };
    Ok(edges::synthesize_sketch(&img.inner, &params).py()?.into())
}

#[pyfunction]
fn ssim(a: &PyGrayImage, b: &PyGrayImage) -> PyResult<f64> {
    ssim_mod::ssim(&a.inner, &b.inner, &SsimParams::default()).py()
}

/// Returns (mean pairwise SSIM, number of pairs, degenerate flag).
#[pyfunction]
fn mean_pairwise_ssim(renders: Vec<PyRef<'_, PyGrayImage>>) -> PyResult<(f64, usize, bool)> {
    let set = render_set(renders)?;
    let r = ssim_mod::mean_pairwise_ssim(&set, &SsimParams::default()).py()?;
    Ok((r.mean, r.pairs, r.degenerate))
}

#[pyfunction]
fn structural_diversity(renders: Vec<PyRef<'_, PyGrayImage>>) -> PyResult<f64> {
    let set = render_set(renders)?;
    ssim_mod::structural_diversity(&set, &SsimParams::default()).py()
}

fn render_set(renders: Vec<PyRef<'_, PyGrayImage>>) -> PyResult<RenderSet> {
    RenderSet::new("python", renders.iter().map(|r| r.inner.clone()).collect()).py()
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn stats_from(mu: Vec<f64>, sigma: &[Vec<f64>], n: usize) -> PyResult<GaussianStats> {
    GaussianStats::new(DVector::from_vec(mu), matrix(sigma)?, n).py()
}

/// Returns (mean vector, covariance rows) of a feature matrix given as rows.
#[pyfunction]
fn gaussian_stats(rows: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let f = FeatureMatrix::from_rows(&rows, FeatureSource::ExternalFile).py()?;
    let g = fid_mod::gaussian_stats(&f).py()?;
    Ok((g.mu.iter().copied().collect(), rows_of(&g.sigma)))
}

#[pyfunction]
fn sqrtm_psd(m: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows_of(&fid_mod::sqrtm_psd(&matrix(&m)?).py()?))
}

#[pyfunction]
#[pyo3(signature = (mu1, sigma1, mu2, sigma2, eps = DEFAULT_FID_EPS))]
fn frechet_distance(
    mu1: Vec<f64>,
    sigma1: Vec<Vec<f64>>,
    mu2: Vec<f64>,
    sigma2: Vec<Vec<f64>>,
    eps: f64,
) -> PyResult<f64> {
    let g1 = stats_from(mu1, &sigma1, 2)?;
    let g2 = stats_from(mu2, &sigma2, 2)?;
    fid_mod::frechet_distance(&g1, &g2, eps).py()
}

/// Returns (distance, warnings).
#[pyfunction]
#[pyo3(signature = (real, generated, eps = DEFAULT_FID_EPS))]
fn fid(real: Vec<Vec<f64>>, generated: Vec<Vec<f64>>, eps: f64) -> PyResult<(f64, Vec<String>)> {
    let r = FeatureMatrix::from_rows(&real, FeatureSource::ExternalFile).py()?;
    let g = FeatureMatrix::from_rows(&generated, FeatureSource::ExternalFile).py()?;
    let out = fid_mod::fid(&r, &g, eps).py()?;
    Ok((out.distance, out.warnings))
}

/// 16x16 grid of Canny edge densities, row-major.
#[pyfunction]
fn proxy_content_encoding(img: &PyGrayImage) -> PyResult<Vec<f64>> {
    Ok(content::proxy_content_encoding(&img.inner, "python")
        .py()?
        .values)
}

#[pyfunction]
#[pyo3(signature = (a, b, l1_raw = false))]
fn content_distance(a: Vec<f64>, b: Vec<f64>, l1_raw: bool) -> PyResult<f64> {
    let a = ContentEmbedding::new("a", a, EncoderTag::External).py()?;
    let b = ContentEmbedding::new("b", b, EncoderTag::External).py()?;
    let agg = if l1_raw {
        L1Aggregation::Sum
    } else {
        L1Aggregation::Mean
    };
    content::content_distance_with(&a, &b, agg).py()
}

/// Returns (mean, sample standard deviation).
#[pyfunction]
fn summarize(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let s = stats::summarize(&values).py()?;
    Ok((s.mean, s.std))
}

#[pyfunction]
#[pyo3(signature = (a, b, alpha = 0.05, pooled = false))]
fn t_test<'py>(
    py: Python<'py>,
    a: Vec<f64>,
    b: Vec<f64>,
    alpha: f64,
    pooled: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = if pooled {
        TTestKind::Student
    } else {
        TTestKind::Welch
    };
    let r = stats::t_test(&a, &b, alpha, kind).py()?;
    let d = PyDict::new(py);
    d.set_item("t", r.t)?;
    d.set_item("df", r.df)?;
    d.set_item("p", r.p)?;
    d.set_item("significant", r.significant)?;
    Ok(d)
}

/// Evaluates a manifest and returns the rendered report.
#[pyfunction]
#[pyo3(signature = (manifest, config = None, format = "json", workers = None))]
fn evaluate(
    manifest: PathBuf,
    config: Option<PathBuf>,
    format: &str,
    workers: Option<usize>,
) -> PyResult<String> {
    let format: ReportFormat = format.parse().py()?;
    let cfg = match config {
        Some(p) => EvaluationConfig::load(p).py()?,
        None => EvaluationConfig::default(),
    };
    let m = harness::load_manifest(manifest).py()?;
    let report = match workers {
        Some(w) => harness::evaluate_with_workers(&m, &cfg, w),
        None => harness::evaluate(&m, &cfg),
    }
    .py()?;
    Ok(harness::render_report(&report, format))
}

/// Writes the procedural benchmark and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = None))]
fn make_benchmark(out_dir: PathBuf, seed: Option<u64>) -> PyResult<PathBuf> {
    let mut spec = synthetic::BenchmarkSpec::default();
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    synthetic::write_benchmark(out_dir, &spec).py()
}

#[pymodule]
fn design_eval_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyEdgeMap>()?;
    m.add_function(wrap_pyfunction!(load_image, m)?)?;
    m.add_function(wrap_pyfunction!(resize_bilinear, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_blur, m)?)?;
    m.add_function(wrap_pyfunction!(dct_descriptor, m)?)?;
    m.add_function(wrap_pyfunction!(canny, m)?)?;
    m.add_function(wrap_pyfunction!(hough_lines, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_sketch, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(mean_pairwise_ssim, m)?)?;
    m.add_function(wrap_pyfunction!(structural_diversity, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_stats, m)?)?;
    m.add_function(wrap_pyfunction!(sqrtm_psd, m)?)?;
    m.add_function(wrap_pyfunction!(frechet_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fid, m)?)?;
    m.add_function(wrap_pyfunction!(proxy_content_encoding, m)?)?;
    m.add_function(wrap_pyfunction!(content_distance, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(t_test, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(make_benchmark, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
