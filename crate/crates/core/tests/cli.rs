use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use strain_iqa::cli::fmt_num;
use strain_iqa::connectivity::{build_kernel, score_pair, GaussianProfile, DEFAULT_TRUNCATION};
use strain_iqa::corpus::{load_pair, StretchMode};
use strain_iqa::regression::{load_jacobian, TileJacobian};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_strain-iqa"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn save_png(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
    image::GrayImage::from_fn(w, h, |x, y| image::Luma([f(x, y)])).save(path).unwrap();
}

/// One textured reference and `levels` degraded copies with growing additive
/// checkerboard noise; dmos grows with the noise.
struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(levels: u32) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let base = |x: u32, y: u32| 60 + ((x * 7 + y * 3) % 40) as u8 + ((x / 4 + y / 4) % 2) as u8 * 50;
        save_png(&dir.path().join("ref.png"), 16, 16, base);
        let mut manifest = String::from("ref_path,deg_path,dmos,category,codec,quality\n");
        for q in 1..=levels {
            let name = format!("deg{q}.png");
            save_png(&dir.path().join(&name), 16, 16, |x, y| {
                let b = base(x, y) as i32;
                let n = if (x + y) % 2 == 0 { q as i32 * 4 } else { -(q as i32) * 4 };
                (b + n).clamp(0, 255) as u8
            });
            manifest.push_str(&format!("ref.png,{name},{},,JPEG,{q}\n", q as f64 / (levels as f64 + 1.0)));
        }
        std::fs::write(dir.path().join("manifest.csv"), manifest).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

#[test]
fn score_identical_files() {
    let f = Fixture::new(1);
    let o = run(&["score", "--metric", "euclid", "--ref", &f.p("ref.png"), "--deg", &f.p("ref.png")]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 0.0);
    let o = run(&["score", "--metric", "ssim", "--ref", &f.p("ref.png"), "--deg", &f.p("ref.png")]);
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 1.0);
}

#[test]
fn score_matches_library_call() {
    let f = Fixture::new(2);
    let o = run(&["score", "--metric", "gauss:2.0", "--ref", &f.p("ref.png"), "--deg", &f.p("deg2.png")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (r, d, _) = load_pair(f.path("ref.png"), f.path("deg2.png"), StretchMode::PerImage).unwrap();
    let k = build_kernel(GaussianProfile::new(2.0).unwrap(), DEFAULT_TRUNCATION).unwrap();
    assert_eq!(stdout(&o).trim(), fmt_num(score_pair(&r, &d, &k).unwrap()));
}

#[test]
fn batch_rows_follow_manifest_and_are_reproducible() {
    let f = Fixture::new(3);
    let args = |out: &str| {
        vec![
            "batch".to_string(),
            "--manifest".into(),
            f.p("manifest.csv"),
            "--metric".into(),
            "dog:3.6,5.2,0.7".into(),
            "--out".into(),
            f.p(out),
        ]
    };
    let o = bin().args(args("a.csv")).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    bin().args(args("b.csv")).output().unwrap();
    let a = std::fs::read_to_string(f.path("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(f.path("b.csv")).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "row,ref_path,deg_path,dmos,metric,score,error");
    for (i, l) in lines[1..].iter().enumerate() {
        assert!(l.starts_with(&format!("{},ref.png,deg{}.png,", i + 1, i + 1)));
    }
}

#[test]
fn batch_reports_row_failures() {
    let f = Fixture::new(2);
    save_png(&f.path("small.png"), 8, 8, |_, _| 0);
    let mut m = std::fs::read_to_string(f.path("manifest.csv")).unwrap();
    m.push_str("ref.png,small.png,0.9,,,\n");
    std::fs::write(f.path("manifest.csv"), m).unwrap();
    let o = run(&["batch", "--manifest", &f.p("manifest.csv"), "--metric", "euclid", "--out", &f.p("o.csv")]);
    assert_eq!(o.status.code(), Some(8));
    let out = std::fs::read_to_string(f.path("o.csv")).unwrap();
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().last().unwrap().contains("shape"));
}

#[test]
fn empty_manifest_rejected() {
    let f = Fixture::new(1);
    std::fs::write(f.path("empty.csv"), "").unwrap();
    let o = run(&["batch", "--manifest", &f.p("empty.csv"), "--metric", "euclid", "--out", &f.p("o.csv")]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
}

#[test]
fn train_zero_iterations_writes_identity_and_is_seeded() {
    let f = Fixture::new(4);
    let train = |out: &str, iters: &str| {
        run(&[
            "train",
            "--manifest",
            &f.p("manifest.csv"),
            "--iters",
            iters,
            "--seed",
            "3",
            "--out",
            &f.p(out),
            "--trace",
            &f.p(&format!("{out}.trace")),
        ])
    };
    let o = train("zero.txt", "0");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("initial_error"));
    assert_eq!(load_jacobian(f.path("zero.txt")).unwrap().entries(), TileJacobian::identity().entries());

    train("a.txt", "300");
    train("b.txt", "300");
    assert_eq!(std::fs::read(f.path("a.txt")).unwrap(), std::fs::read(f.path("b.txt")).unwrap());
    assert_eq!(std::fs::read(f.path("a.txt.trace")).unwrap(), std::fs::read(f.path("b.txt.trace")).unwrap());
}

#[test]
fn train_rejects_constant_dmos() {
    let f = Fixture::new(3);
    let m = "ref_path,deg_path,dmos,category,codec,quality\nref.png,deg1.png,0.5,,,\nref.png,deg2.png,0.5,,,\nref.png,deg3.png,0.5,,,\n";
    std::fs::write(f.path("flat.csv"), m).unwrap();
    let o = run(&["train", "--manifest", &f.p("flat.csv"), "--seed", "1", "--out", &f.p("j.txt")]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn sweep_single_point_grid() {
    let f = Fixture::new(4);
    let mut m = std::fs::read_to_string(f.path("manifest.csv")).unwrap();
    // a second reference so two folds exist
    std::fs::copy(f.path("ref.png"), f.path("ref2.png")).unwrap();
    for q in 1..=4 {
        m.push_str(&format!("ref2.png,deg{q}.png,{},,,\n", q as f64 / 6.0));
    }
    std::fs::write(f.path("manifest.csv"), m).unwrap();
    let args = |out: &str| {
        run(&[
            "sweep",
            "--manifest",
            &f.p("manifest.csv"),
            "--metric",
            "gauss",
            "--grid",
            "1.5",
            "--folds",
            "2",
            "--seed",
            "4",
            "--out",
            &f.p(out),
        ])
    };
    let o = args("s1.csv");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 2);
    let table = std::fs::read_to_string(f.path("s1.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    args("s2.csv");
    assert_eq!(table, std::fs::read_to_string(f.path("s2.csv")).unwrap());
}

#[test]
fn compare_perfect_rank_data() {
    let f = Fixture::new(5);
    let o = run(&[
        "compare",
        "--manifest",
        &f.p("manifest.csv"),
        "--metrics",
        "euclid,ssim",
        "--seed",
        "1",
        "--stretch",
        "none",
        "--csv",
        &f.p("r.csv"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(f.path("r.csv")).unwrap();
    let oriented: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert_eq!(oriented, vec![1.0, 1.0]);
    let text = stdout(&o);
    let cmp = text.lines().skip_while(|l| !l.starts_with("comparisons")).nth(2).unwrap();
    assert!(cmp.split_whitespace().nth(6).unwrap().parse::<f64>().unwrap() == 1.0, "{cmp}");
    let again = run(&["compare", "--manifest", &f.p("manifest.csv"), "--metrics", "euclid,ssim", "--seed", "1", "--stretch", "none"]);
    assert_eq!(text, stdout(&again));
}

#[test]
fn scatter_from_batch_files() {
    let f = Fixture::new(4);
    for (metric, out) in [("euclid", "e.csv"), ("gauss:1.0", "g.csv")] {
        let o = run(&["batch", "--manifest", &f.p("manifest.csv"), "--metric", metric, "--out", &f.p(out)]);
        assert!(o.status.success());
    }
    let o = run(&[
        "scatter",
        "--manifest",
        &f.p("manifest.csv"),
        "--scores",
        &format!("{},{}", f.p("e.csv"), f.p("g.csv")),
        "--zscore",
        "--out",
        &f.p("s.csv"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(f.path("s.csv")).unwrap();
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next().unwrap(), "row,dmos,euclid,gauss:1");
    let col: Vec<f64> = rows.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!((col.iter().sum::<f64>() / col.len() as f64).abs() < 1e-9);

    let short = Fixture::new(3);
    let o = run(&["batch", "--manifest", &short.p("manifest.csv"), "--metric", "euclid", "--out", &short.p("e.csv")]);
    assert!(o.status.success());
    let o = run(&["scatter", "--manifest", &f.p("manifest.csv"), "--scores", &short.p("e.csv"), "--out", &f.p("x.csv")]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn failure_classes_have_distinct_exit_codes() {
    let f = Fixture::new(1);
    std::fs::write(f.path("garbage.png"), b"not an image").unwrap();
    save_png(&f.path("small.png"), 8, 8, |_, _| 1);
    let score = |metric: &str, deg: &str| run(&["score", "--metric", metric, "--ref", &f.p("ref.png"), "--deg", deg]);
    assert_eq!(score("euclid", &f.p("missing.png")).status.code(), Some(3));
    assert_eq!(score("euclid", &f.p("garbage.png")).status.code(), Some(4));
    assert_eq!(score("euclid", &f.p("small.png")).status.code(), Some(5));
    assert_eq!(score("gauss:-1", &f.p("deg1.png")).status.code(), Some(2));
    let o = score("wat", &f.p("deg1.png"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
}

#[test]
fn thread_override_validated() {
    let f = Fixture::new(1);
    let o = bin()
        .env("STRAIN_IQA_THREADS", "zero")
        .args(["score", "--metric", "euclid", "--ref", &f.p("ref.png"), "--deg", &f.p("deg1.png")])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .env("STRAIN_IQA_THREADS", "2")
        .args(["score", "--metric", "euclid", "--ref", &f.p("ref.png"), "--deg", &f.p("deg1.png")])
        .output()
        .unwrap();
    assert!(o.status.success());
}
