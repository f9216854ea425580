use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use satsr_core::deteval::{format_sigma_diff, sigma_diff, EvalReport};
use satsr_core::raster::io::{read_image, write_image};
use satsr_core::raster::Bands;
use satsr_core::synthetic;
use sha2::{Digest, Sha256};

fn satsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satsr"))
        .args(args)
        .env_remove("SATSR_THREADS")
        .output()
        .expect("spawn satsr")
}

fn ok(args: &[&str]) -> String {
    let out = satsr(args);
    assert!(
        out.status.success(),
        "satsr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sha256(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

const SMALL_FOREST: [&str; 6] = [
    "--n-estimators",
    "4",
    "--min-samples-split",
    "50",
    "--sample-rate",
    "0.3",
];

fn train(dir: &Path, name: &str, seed: &str) -> PathBuf {
    let model = dir.join(name);
    let mut args = vec!["--seed", seed, "sr-train", "--synthetic", "2", "--out", p(&model)];
    args.extend(SMALL_FOREST);
    ok(&args);
    model
}

#[test]
fn sr_train_is_reproducible_and_apply_scales() {
    let dir = tempfile::tempdir().unwrap();
    let a = train(dir.path(), "a.rfsr", "42");
    let b = train(dir.path(), "b.rfsr", "42");
    assert_eq!(sha256(&a), sha256(&b));

    let lr = dir.path().join("lr.png");
    write_image(&lr, &synthetic::noise_image(68, 68, Bands::Rgb, 1)).unwrap();
    let sr = dir.path().join("sr.png");
    ok(&["sr-apply", "--model", p(&a), "--in", p(&lr), "--out", p(&sr)]);
    let img = read_image(&sr).unwrap();
    assert_eq!((img.width(), img.height(), img.bands()), (136, 136, Bands::Rgb));

    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run["tool"], "satsr");
    assert!(run["command"]["sr-apply"].is_object(), "{run}");
}

#[test]
fn sr_eval_writes_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(dir.path(), "m.rfsr", "3");
    let hr_dir = dir.path().join("hr");
    fs::create_dir(&hr_dir).unwrap();
    for i in 0..2 {
        write_image(
            &hr_dir.join(format!("{i}.png")),
            &synthetic::scene(synthetic::SceneKind::Edges, 64, i),
        )
        .unwrap();
    }
    let csv = dir.path().join("eval.csv");
    ok(&["sr-eval", "--model", p(&model), "--hr", p(&hr_dir), "--out", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "gsd_out,scale,method,psnr,ssim");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("60,2,bicubic,"), "{}", lines[1]);
    assert!(lines[2].starts_with("60,2,rfsr,"), "{}", lines[2]);
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        let ssim: f64 = cols[4].parse().unwrap();
        assert!(
            cols[3].parse::<f64>().unwrap() > 10.0 && ssim > 0.0 && ssim <= 1.0,
            "{l}"
        );
    }
}

#[test]
fn degrade_single_and_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("scene.png");
    write_image(&src, &synthetic::noise_image(128, 96, Bands::Rgb, 4)).unwrap();
    let out = dir.path().join("d60.png");
    ok(&["degrade", "--in", p(&src), "--out-gsd", "60", "--out", p(&out)]);
    let img = read_image(&out).unwrap();
    assert_eq!((img.width(), img.height()), (64, 48));

    let ladder = dir.path().join("ladder");
    ok(&["degrade", "--in", p(&src), "--ladder", "--out-dir", p(&ladder)]);
    for (gsd, w) in [(60, 64), (120, 32), (240, 16), (480, 8)] {
        let img = read_image(&ladder.join(format!("scene_{gsd}cm.png"))).unwrap();
        assert_eq!(img.width(), w);
    }
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = satsr(&[
        "degrade",
        "--in",
        p(&dir.path().join("nope.png")),
        "--out-gsd",
        "60",
        "--out",
        p(&dir.path().join("x.png")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.png"));
    assert_eq!(satsr(&["det-eval"]).status.code(), Some(2));
}

/// 200 single-boat images; the first 120 have an exact detection, so the
/// pooled curve has precision 1 and recall 0.6 at every threshold.
fn detection_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut gt = String::from("image_id,category,xmin,ymin,xmax,ymax\n");
    let mut dets = String::from("image_id,category,xmin,ymin,xmax,ymax,confidence\n");
    for i in 0..200 {
        gt.push_str(&format!("img{i:03},Boat,10,10,30,30\n"));
        if i < 120 {
            dets.push_str(&format!("img{i:03},Boat,10,10,30,30,0.9\n"));
        }
    }
    let (g, d) = (dir.join("gt.csv"), dir.join("dets.csv"));
    fs::write(&g, gt).unwrap();
    fs::write(&d, dets).unwrap();
    (g, d)
}

#[test]
fn det_eval_with_and_without_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, dets) = detection_fixture(dir.path());
    let plain = dir.path().join("plain");
    let stdout = ok(&[
        "--seed",
        "1",
        "det-eval",
        "--gt",
        p(&gt),
        "--dets",
        p(&dets),
        "--out-dir",
        p(&plain),
    ]);
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(plain.join("report.json")).unwrap()).unwrap();
    assert!((report.map_value - 0.6).abs() < 1e-12);
    assert!(
        report.sigma > 0.0 && report.sigma * report.sigma < 0.0018,
        "sigma {}",
        report.sigma
    );
    assert!(stdout.contains(&format!("{:.2} ± {:.2}", report.map_value, report.sigma)));
    let table = fs::read_to_string(plain.join("table4.csv")).unwrap();
    assert!(table.starts_with("model,data,gsd_cm,map,sigma,cell\n"), "{table}");

    // Baseline 0.07 lower with a combined sigma of sqrt(2) * 0.03.
    let mut baseline = report.clone();
    baseline.map_value = report.map_value - 0.07;
    baseline.sigma = (0.0018 - report.sigma * report.sigma).sqrt();
    let base_path = dir.path().join("baseline.json");
    fs::write(&base_path, serde_json::to_string(&baseline).unwrap()).unwrap();
    let cmp = dir.path().join("cmp");
    let stdout = ok(&[
        "--seed",
        "1",
        "det-eval",
        "--gt",
        p(&gt),
        "--dets",
        p(&dets),
        "--baseline",
        p(&base_path),
        "--out-dir",
        p(&cmp),
    ]);
    let expected = format_sigma_diff(
        sigma_diff(report.map_value, report.sigma, baseline.map_value, baseline.sigma)
            .unwrap()
            .sigma_diff,
    );
    assert_eq!(expected, "+1.7σ");
    assert!(stdout.contains("(+1.7σ)"), "{stdout}");
    let table = fs::read_to_string(cmp.join("table4.csv")).unwrap();
    assert!(
        table.starts_with("model,data,gsd_cm,map,sigma,sigma_diff,cell\n"),
        "{table}"
    );
}

#[test]
fn det_eval_rejects_bad_confidence_with_row() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, _) = detection_fixture(dir.path());
    let dets = dir.path().join("bad.csv");
    fs::write(
        &dets,
        "image_id,category,xmin,ymin,xmax,ymax,confidence\nimg000,Boat,10,10,30,30,0.5\nimg001,Boat,10,10,30,30,1.5\n",
    )
    .unwrap();
    let out = satsr(&[
        "det-eval",
        "--gt",
        p(&gt),
        "--dets",
        p(&dets),
        "--out-dir",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("1.5"), "{err}");
}

#[test]
fn dataset_split_and_tiles() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    fs::create_dir(&images).unwrap();
    for i in 0..10 {
        write_image(
            &images.join(format!("im{i}.png")),
            &synthetic::noise_image(40, 40, Bands::Luma, i),
        )
        .unwrap();
    }
    let run = |out: &Path| {
        ok(&[
            "--seed",
            "1",
            "dataset",
            "--images",
            p(&images),
            "--ratio",
            "0.6",
            "--out-dir",
            p(out),
        ]);
        let split: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("split.json")).unwrap()).unwrap();
        assert_eq!(split["train"].as_array().unwrap().len(), 6);
        assert_eq!(split["test"].as_array().unwrap().len(), 4);
        sha256(&out.join("split.json"))
    };
    assert_eq!(run(&dir.path().join("a")), run(&dir.path().join("b")));

    let big = dir.path().join("big");
    fs::create_dir(&big).unwrap();
    write_image(
        &big.join("scene.png"),
        &synthetic::noise_image(1088, 1088, Bands::Luma, 9),
    )
    .unwrap();
    let labels = dir.path().join("labels.csv");
    fs::write(
        &labels,
        "image_id,category,xmin,ymin,xmax,ymax\nscene.png,Boat,530,100,560,120\n",
    )
    .unwrap();
    let out = dir.path().join("tiled");
    ok(&[
        "dataset",
        "--images",
        p(&big),
        "--labels",
        p(&labels),
        "--tile",
        "544",
        "--ratio",
        "0.5",
        "--out-dir",
        p(&out),
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("tiles.json")).unwrap()).unwrap();
    let tiles = manifest["tiles"].as_array().unwrap();
    assert_eq!(tiles.len(), 4);
    for t in tiles {
        let img = read_image(&out.join("tiles").join(format!("{}.png", t["id"].as_str().unwrap()))).unwrap();
        assert_eq!((img.width(), img.height()), (544, 544));
    }
    // The straddling box keeps more than a quarter of its area in both tiles.
    let csv = fs::read_to_string(out.join("tiles.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
}
