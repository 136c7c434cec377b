use std::path::Path;
use std::process::{Command, Output};

use design_eval::imaging::save_png;
use design_eval::synthetic::{write_benchmark, BenchmarkSpec};
use design_eval::GrayImage;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_design-eval"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_image(path: &Path, f: impl Fn(usize, usize) -> f64) {
    save_png(&GrayImage::from_fn(32, 32, f).unwrap(), path).unwrap();
}

#[test]
fn ssim_of_a_file_with_itself_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    write_image(&a, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
    let o = cli(&["ssim", "--a", p(&a), "--b", p(&a)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 1.0);
}

#[test]
fn diversity_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.png", "b.png", "c.png"] {
        write_image(&dir.path().join(name), |x, _| x as f64 / 31.0);
    }
    let o = cli(&["diversity", "--dir", p(dir.path())]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("diversity 0\n"), "{}", stdout(&o));
    assert!(stdout(&o).contains("pairs 3"));
}

#[test]
fn ttest_hand_case_and_column_specs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scores.csv");
    std::fs::write(&csv, "a,b\n1,2\n2,3\n3,4\n4,5\n5,6\n").unwrap();
    let o = cli(&[
        "ttest",
        "--a",
        &format!("{}:a", p(&csv)),
        "--b",
        &format!("{}:1", p(&csv)),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("t -1\n") && out.contains("df 8\n"), "{out}");
    assert!(out.contains("significant false"));

    let o = cli(&[
        "ttest",
        "--a",
        &format!("{}:zzz", p(&csv)),
        "--b",
        &format!("{}:a", p(&csv)),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fid_from_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let real = dir.path().join("real.csv");
    let generated = dir.path().join("gen.csv");
    std::fs::write(&real, "id,f0\na,0\nb,1\nc,2\n").unwrap();
    std::fs::write(&generated, "id,f0\na,3\nb,4\nc,5\n").unwrap();
    let o = cli(&[
        "fid",
        "--real",
        p(&real),
        "--generated",
        p(&generated),
        "--eps",
        "0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d: f64 = stdout(&o).trim().parse().unwrap();
    assert!((d - 9.0).abs() < 1e-9, "{d}");

    std::fs::write(&generated, "id,f0\na,3\na,4\n").unwrap();
    let o = cli(&["fid", "--real", p(&real), "--generated", p(&generated)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn content_with_embeddings_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("emb.csv");
    std::fs::write(&emb, "id,f0,f1\ns1,0,0\ns1/0,1,3\n").unwrap();
    let o = cli(&[
        "content",
        "--sketch",
        "s1",
        "--render",
        "s1/0",
        "--embeddings",
        p(&emb),
    ]);
    assert_eq!(stdout(&o).trim(), "2");
    let o = cli(&[
        "content",
        "--sketch",
        "s1",
        "--render",
        "s1/0",
        "--embeddings",
        p(&emb),
        "--l1-raw",
    ]);
    assert_eq!(stdout(&o).trim(), "4");

    let img = dir.path().join("a.png");
    write_image(&img, |x, _| if x < 16 { 0.0 } else { 1.0 });
    let o = cli(&["content", "--sketch", p(&img), "--render", p(&img)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "0");
}

#[test]
fn sketch_writes_one_file_per_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    std::fs::create_dir(&input).unwrap();
    write_image(
        &input.join("step.png"),
        |x, _| if x < 16 { 0.0 } else { 1.0 },
    );
    write_image(&input.join("flat.jpg"), |_, _| 0.5);
    let out = dir.path().join("out");
    for mode in ["canny", "hough"] {
        let o = cli(&[
            "sketch",
            "--input",
            p(&input),
            "--mode",
            mode,
            "--out",
            p(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("step.png").is_file() && out.join("flat.png").is_file());
    }
    let o = cli(&[
        "sketch",
        "--input",
        p(&input),
        "--mode",
        "canny",
        "--low",
        "0.5",
        "--high",
        "0.2",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_formats_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let spec = BenchmarkSpec {
        sketches: 2,
        renders_per_sketch: 2,
        real_images: 4,
        size: 48,
        ..Default::default()
    };
    let manifest = write_benchmark(dir.path(), &spec).unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"metric_resolution": 48, "descriptor_dims": 4}"#,
    )
    .unwrap();

    let o = cli(&[
        "evaluate",
        "--manifest",
        p(&manifest),
        "--config",
        p(&config),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("Method"));
    assert!(stdout(&o).contains("Conceptual Sketches"));

    let out = dir.path().join("report.csv");
    let o = cli(&[
        "evaluate",
        "--manifest",
        p(&manifest),
        "--config",
        p(&config),
        "--format",
        "csv",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .starts_with("method,content_mean"));

    let o = cli(&["evaluate", "--manifest", p(&manifest), "--format", "xml"]);
    assert_eq!(o.status.code(), Some(1));
    let o = cli(&[
        "evaluate",
        "--manifest",
        p(&dir.path().join("missing.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    let o = cli(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}
