use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use design_eval::content::{
    content_distance_with, load_embeddings, proxy_content_encoding, ContentEmbedding, L1Aggregation,
};
use design_eval::edges::{synthesize_sketch, CannyParams, SketchMode, SketchParams};
use design_eval::features::load_feature_csv;
use design_eval::fid::{fid, FeatureMatrix, FeatureSource, DEFAULT_FID_EPS};
use design_eval::harness::{
    evaluate_with_workers, load_manifest, render_report, EvaluationConfig, ReportFormat,
};
use design_eval::imaging::{
    dct_descriptor, load_image, resize_bilinear, save_png, GrayImage, DEFAULT_DESCRIPTOR_DIMS,
};
use design_eval::ssim::{mean_pairwise_ssim, ssim, RenderSet, SsimParams};
use design_eval::stats::{t_test, TTestKind};
use design_eval::synthetic::{write_benchmark, BenchmarkSpec};
use design_eval::{Error, Result};

#[derive(Parser)]
#[command(
    name = "design-eval",
    version,
    about = "Evaluation measures for sketch-to-render design"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every method of a benchmark manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// JSON file with EvaluationConfig fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Average content distance per sketch before testing.
        #[arg(long)]
        per_sketch: bool,
        /// Student's pooled-variance t-test instead of Welch's.
        #[arg(long)]
        pooled: bool,
        /// Raw L1 sum instead of mean absolute difference.
        #[arg(long)]
        l1_raw: bool,
    },
    /// Derive sketches from images with Canny edges or Hough lines.
    Sketch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "canny")]
        mode: String,
        #[arg(long, default_value_t = 1.4)]
        sigma: f64,
        #[arg(long, default_value_t = 0.1)]
        low: f64,
        #[arg(long, default_value_t = 0.3)]
        high: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// SSIM of two images.
    Ssim {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Structural diversity of all images in a directory.
    Diversity {
        #[arg(long)]
        dir: PathBuf,
    },
    /// FID between two image directories or feature CSV files.
    Fid {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FID_EPS)]
        eps: f64,
        /// Descriptor length for image directories.
        #[arg(long, default_value_t = DEFAULT_DESCRIPTOR_DIMS)]
        dims: usize,
        /// Square side images are resized to before describing them.
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Content distance between a sketch and a render.
    Content {
        /// Image path, or an embedding id when --embeddings is given.
        #[arg(long)]
        sketch: String,
        #[arg(long)]
        render: String,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        l1_raw: bool,
    },
    /// Two-tailed t-test on two CSV columns (`file.csv:column`).
    Ttest {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        pooled: bool,
    },
    /// Write the procedural benchmark corpus and its manifest.
    MakeBenchmark {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::input(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::input("<stdout>", e))
        }
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::input(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::input(dir, e))?.path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::input(dir, "no PNG or JPEG images in directory"));
    }
    Ok(files)
}

fn run(cli: Cli) -> Result<()> {
    let workers = cli.workers;
    if workers == Some(0) {
        return Err(Error::argument("--workers must be at least 1"));
    }
    match cli.command {
        Command::Evaluate {
            manifest,
            config,
            format,
            out,
            per_sketch,
            pooled,
            l1_raw,
        } => {
            let format: ReportFormat = format.parse()?;
            let mut cfg = match config {
                Some(path) => EvaluationConfig::load(path)?,
                None => EvaluationConfig::default(),
            };
            cfg.per_sketch_content |= per_sketch;
            if pooled {
                cfg.test_kind = TTestKind::Student;
            }
            if l1_raw {
                cfg.content_aggregation = L1Aggregation::Sum;
            }
            let manifest = load_manifest(&manifest)?;
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let report = evaluate_with_workers(&manifest, &cfg, workers)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(&render_report(&report, format), out.as_deref())
        }
        Command::Sketch {
            input,
            mode,
            sigma,
            low,
            high,
            out,
        } => {
            let params = SketchParams {
                mode: mode.parse::<SketchMode>()?,
                canny: CannyParams { sigma, low, high },
                ..Default::default()
            };
            params.canny.validate()?;
            let inputs = if input.is_dir() {
                list_images(&input)?
            } else {
                vec![input]
            };
            std::fs::create_dir_all(&out).map_err(|e| Error::input(&out, e))?;
            for path in inputs {
                let sketch = synthesize_sketch(&load_image(&path)?, &params)
                    .map_err(|e| e.context(path.display().to_string()))?;
                let stem = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("sketch");
                let target = out.join(format!("{stem}.png"));
                save_png(&sketch, &target)?;
                println!("{}", target.display());
            }
            Ok(())
        }
        Command::Ssim { a, b } => {
            let a = load_image(&a)?;
            let b = load_image(&b)?;
            let b = if b.dimensions() != a.dimensions() {
                eprintln!(
                    "warning: resizing second image from {}x{} to {}x{}",
                    b.width(),
                    b.height(),
                    a.width(),
                    a.height()
                );
                resize_bilinear(&b, a.width(), a.height())?
            } else {
                b
            };
            println!("{}", ssim(&a, &b, &SsimParams::default())?);
            Ok(())
        }
        Command::Diversity { dir } => {
            let renders = list_images(&dir)?
                .iter()
                .map(load_image)
                .collect::<Result<Vec<GrayImage>>>()?;
            let name = dir.display().to_string();
            let (set, warnings) = RenderSet::aligned(name, renders)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            let r = mean_pairwise_ssim(&set, &SsimParams::default())?;
            if r.degenerate {
                eprintln!("warning: a single render has no pairs; diversity is 0");
            }
            println!("diversity {}", 1.0 - r.mean);
            println!("mean_ssim {}", r.mean);
            println!("pairs {}", r.pairs);
            Ok(())
        }
        Command::Fid {
            real,
            generated,
            eps,
            dims,
            resolution,
        } => {
            let load = |p: &Path| -> Result<FeatureMatrix> {
                if p.is_dir() {
                    let rows = list_images(p)?
                        .iter()
                        .map(|f| {
                            let img = resize_bilinear(&load_image(f)?, resolution, resolution)?;
                            dct_descriptor(&img, dims)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    FeatureMatrix::from_rows(&rows, FeatureSource::BuiltinDescriptor)
                } else {
                    FeatureMatrix::from_table(&load_feature_csv(p)?)
                }
            };
            if real.is_dir() != generated.is_dir() {
                return Err(Error::argument(
                    "--real and --generated must both be directories or both be feature CSV files",
                ));
            }
            let r = fid(&load(&real)?, &load(&generated)?, eps)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", r.distance);
            Ok(())
        }
        Command::Content {
            sketch,
            render,
            embeddings,
            l1_raw,
        } => {
            let agg = if l1_raw {
                L1Aggregation::Sum
            } else {
                L1Aggregation::Mean
            };
            let (s, r) = match embeddings {
                Some(path) => {
                    let all = load_embeddings(&path)?;
                    let find = |id: &str| -> Result<ContentEmbedding> {
                        all.iter().find(|e| e.id == id).cloned().ok_or_else(|| {
                            Error::Reference(format!("id '{id}' not found in {}", path.display()))
                        })
                    };
                    (find(&sketch)?, find(&render)?)
                }
                None => {
                    let encode = |p: &str| -> Result<ContentEmbedding> {
                        let img = resize_bilinear(&load_image(p)?, 256, 256)?;
                        proxy_content_encoding(&img, p)
                    };
                    (encode(&sketch)?, encode(&render)?)
                }
            };
            println!("{}", content_distance_with(&s, &r, agg)?);
            Ok(())
        }
        Command::Ttest {
            a,
            b,
            alpha,
            pooled,
        } => {
            let kind = if pooled {
                TTestKind::Student
            } else {
                TTestKind::Welch
            };
            let r = t_test(&read_column(&a)?, &read_column(&b)?, alpha, kind)?;
            println!("t {}", r.t);
            println!("df {}", r.df);
            println!("p {}", r.p);
            println!("significant {}", r.significant);
            Ok(())
        }
        Command::MakeBenchmark { out, seed } => {
            let mut spec = BenchmarkSpec::default();
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let path = write_benchmark(&out, &spec)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

/// Reads `file.csv:column`, where column is a header name or a zero-based
/// index. Without `:column` the file must have exactly one column.
fn read_column(spec: &str) -> Result<Vec<f64>> {
    let (path, column) = match spec.rsplit_once(':') {
        Some((p, c)) if !p.is_empty() && !c.contains(['/', '\\']) => (p, Some(c)),
        _ => (spec, None),
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::input(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("{path}: {e}")))?
        .clone();
    let idx = match column {
        None if headers.len() == 1 => 0,
        None => {
            return Err(Error::argument(format!(
                "{path} has {} columns; use {path}:<column>",
                headers.len()
            )))
        }
        Some(c) => match headers.iter().position(|h| h == c) {
            Some(i) => i,
            None => c
                .parse::<usize>()
                .ok()
                .filter(|&i| i < headers.len())
                .ok_or_else(|| Error::argument(format!("{path}: no column '{c}'")))?,
        },
    };
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("{path}: {e}")))?;
        let line = row + 2;
        let cell = record
            .get(idx)
            .ok_or_else(|| Error::Format(format!("{path} line {line}: missing column {idx}")))?;
        let v: f64 = cell
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("{path} line {line}: '{cell}' is not a number")))?;
        if !v.is_finite() {
            return Err(Error::Format(format!(
                "{path} line {line}: non-finite value"
            )));
        }
        values.push(v);
    }
    Ok(values)
}
