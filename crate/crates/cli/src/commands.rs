use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use satsr_core::datasetio::{self, ClassMap, SplitManifest, TileConfig, TileEntry};
use satsr_core::deteval::{self, EvalConfig, EvalReport, GroundTruthBox, Table4Row};
use satsr_core::quality::{aggregate, QualityScore};
use satsr_core::raster::io::{is_supported_image, read_image, write_image};
use satsr_core::rfsr::{self, ForestParams, SrModel};
use satsr_core::sensorsim::{self, SensorSpec, NATIVE_GSD_CM};
use satsr_core::synthetic;

use crate::{
    BenchArgs, Cli, CliError, Command, DatasetArgs, DegradeArgs, DetEvalArgs, SrApplyArgs, SrEvalArgs, SrTrainArgs,
};

type CliResult<T> = Result<T, CliError>;

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    #[serde(flatten)]
    cli: &'a Cli,
}

/// Runs the selected command, then records the resolved configuration in
/// `run.json` next to its outputs.
pub fn run(cli: &Cli) -> CliResult<()> {
    let out_dir = match &cli.command {
        Command::Degrade(a) => degrade(a)?,
        Command::SrTrain(a) => sr_train(a, cli.seed)?,
        Command::SrApply(a) => sr_apply(a)?,
        Command::SrEval(a) => sr_eval(a)?,
        Command::DetEval(a) => det_eval(a, cli.seed)?,
        Command::Dataset(a) => dataset(a, cli.seed)?,
        Command::Bench(a) => bench(a)?,
    };
    if let Some(dir) = out_dir {
        let record = RunRecord {
            tool: "satsr",
            version: env!("CARGO_PKG_VERSION"),
            cli,
        };
        write_json(&dir.join("run.json"), &record)?;
    }
    Ok(())
}

fn require_exists(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{}: no such file or directory",
            path.display()
        )))
    }
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| satsr_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn create_file(path: &Path) -> CliResult<BufWriter<File>> {
    create_dir(&parent_dir(path))?;
    let f = File::create(path).map_err(|e| satsr_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(BufWriter::new(f))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    create_dir(&parent_dir(path))?;
    fs::write(path, text).map_err(|e| satsr_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Image files named directly plus supported images inside named
/// directories, each directory listed in name order.
fn collect_images(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        require_exists(p)?;
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| satsr_core::Error::Io {
                    path: p.clone(),
                    source: e,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.is_file() && is_supported_image(e))
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no input images found".into()));
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn degrade(a: &DegradeArgs) -> CliResult<Option<PathBuf>> {
    require_exists(&a.input)?;
    let img = read_image(&a.input)?;
    let native = a.native_gsd.or(img.gsd_cm()).unwrap_or(NATIVE_GSD_CM);
    let img = img.with_gsd(Some(native));
    if a.ladder {
        let dir = a
            .out_dir
            .clone()
            .ok_or_else(|| CliError::Usage("--ladder needs --out-dir".into()))?;
        create_dir(&dir)?;
        let name = stem(&a.input);
        for (gsd, out) in sensorsim::simulate_ladder(&img)? {
            let path = dir.join(format!("{name}_{gsd}cm.png"));
            write_image(&path, &out)?;
            println!("{} {}x{} @ {gsd} cm", path.display(), out.width(), out.height());
        }
        return Ok(Some(dir));
    }
    let (Some(out_gsd), Some(out)) = (a.out_gsd, a.out.as_ref()) else {
        return Err(CliError::Usage(
            "--out-gsd and --out are required without --ladder".into(),
        ));
    };
    let spec = SensorSpec::new(native, out_gsd)?;
    let degraded = sensorsim::degrade(&img, &spec)?;
    write_image(out, &degraded)?;
    println!(
        "{} {}x{} @ {out_gsd} cm",
        out.display(),
        degraded.width(),
        degraded.height()
    );
    Ok(Some(parent_dir(out)))
}

fn sr_train(a: &SrTrainArgs, seed: u64) -> CliResult<Option<PathBuf>> {
    let images = match a.synthetic {
        Some(n) => synthetic::corpus(n, 128, seed)
            .into_iter()
            .map(|(_, img)| img)
            .collect(),
        None => collect_images(&a.hr)?
            .iter()
            .map(|p| read_image(p))
            .collect::<Result<Vec<_>, _>>()?,
    };
    let params = ForestParams {
        n_estimators: a.n_estimators,
        max_depth: a.max_depth,
        min_samples_split: a.min_samples_split,
        features_per_split: a.features_per_split,
        sample_rate: a.sample_rate,
        bootstrap: !a.no_bootstrap,
    };
    let model = SrModel::train(&images, a.scale, &params, seed)?;
    rfsr::save_model(&model, &a.out)?;
    println!(
        "{}: {}x model, {} trees, oob r2 {:.4}, oob mse {:.4}",
        a.out.display(),
        model.scale(),
        model.forest().trees().len(),
        model.oob_r2(),
        model.oob_mse()
    );
    Ok(Some(parent_dir(&a.out)))
}

fn load_model(path: &Path) -> CliResult<SrModel> {
    require_exists(path)?;
    Ok(rfsr::load_model(path)?)
}

fn sr_apply(a: &SrApplyArgs) -> CliResult<Option<PathBuf>> {
    let model = load_model(&a.model)?;
    require_exists(&a.input)?;
    if a.input.is_dir() {
        create_dir(&a.out)?;
        for p in collect_images(std::slice::from_ref(&a.input))? {
            let out = a.out.join(p.file_name().unwrap_or_default());
            let sr = rfsr::super_resolve(&model, &read_image(&p)?)?;
            write_image(&out, &sr)?;
        }
        Ok(Some(a.out.clone()))
    } else {
        let sr = rfsr::super_resolve(&model, &read_image(&a.input)?)?;
        write_image(&a.out, &sr)?;
        println!("{} {}x{}", a.out.display(), sr.width(), sr.height());
        Ok(Some(parent_dir(&a.out)))
    }
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn sr_eval(a: &SrEvalArgs) -> CliResult<Option<PathBuf>> {
    let images: Vec<_> = collect_images(&a.hr)?
        .iter()
        .map(|p| read_image(p).map(|img| img.with_gsd(Some(a.gsd))))
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("gsd_out,scale,method,psnr,ssim\n");
    for path in &a.model {
        let model = load_model(path)?;
        let mut bicubic: Vec<QualityScore> = Vec::new();
        let mut sr: Vec<QualityScore> = Vec::new();
        for img in &images {
            let s = rfsr::score_against_bicubic(&model, img)?;
            bicubic.push(s.bicubic);
            sr.push(s.rfsr);
        }
        let gsd_out = a.gsd * model.scale() as f64;
        for (method, scores) in [("bicubic", &bicubic), ("rfsr", &sr)] {
            let agg = aggregate(scores);
            let line = format!(
                "{gsd_out},{},{method},{},{:.4}\n",
                model.scale(),
                fmt_psnr(agg.psnr_db),
                agg.ssim
            );
            print!("{line}");
            csv.push_str(&line);
        }
    }
    write_text(&a.out, &csv)?;
    Ok(Some(parent_dir(&a.out)))
}

fn det_eval(a: &DetEvalArgs, seed: u64) -> CliResult<Option<PathBuf>> {
    require_exists(&a.gt)?;
    require_exists(&a.dets)?;
    let baseline: Option<EvalReport> = match &a.baseline {
        None => None,
        Some(p) => {
            require_exists(p)?;
            let text = fs::read_to_string(p).map_err(|e| satsr_core::Error::Io {
                path: p.clone(),
                source: e,
            })?;
            Some(serde_json::from_str(&text).map_err(satsr_core::Error::from)?)
        }
    };
    let gts = deteval::read_ground_truth(&a.gt)?;
    let dets = deteval::read_detections(&a.dets)?;
    let cfg = EvalConfig {
        match_iou: a.match_iou,
        nms_iou: a.nms_iou,
        n_bootstrap: a.bootstrap,
    };
    let report = deteval::evaluate_with(&dets, &gts, seed, &cfg)?;
    let comparison = match &baseline {
        Some(b) => Some(deteval::sigma_diff(
            report.map_value,
            report.sigma,
            b.map_value,
            b.sigma,
        )?),
        None => None,
    };
    let row = Table4Row {
        model: a.model.clone(),
        data: a.data.clone(),
        gsd_cm: a.gsd,
        map: report.map_value,
        sigma: report.sigma,
        comparison,
    };
    create_dir(&a.out_dir)?;
    write_json(&a.out_dir.join("report.json"), &report)?;
    deteval::write_table4_csv(create_file(&a.out_dir.join("table4.csv"))?, std::slice::from_ref(&row))?;
    println!("{} {} {} cm: {}", row.model, row.data, row.gsd_cm, row.cell());
    Ok(Some(a.out_dir.clone()))
}

fn read_labels(path: &Path) -> CliResult<Vec<GroundTruthBox>> {
    require_exists(path)?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    if ext == "json" || ext == "geojson" {
        let text = fs::read_to_string(path).map_err(|e| satsr_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(datasetio::parse_geojson(&text, &ClassMap::xview())?)
    } else {
        Ok(deteval::read_ground_truth(path)?)
    }
}

#[derive(Serialize)]
struct TileManifestEntry {
    #[serde(flatten)]
    entry: TileEntry,
    split: &'static str,
}

#[derive(Serialize)]
struct TileManifest {
    size: usize,
    overlap: usize,
    min_retained: f64,
    tiles: Vec<TileManifestEntry>,
}

fn dataset(a: &DatasetArgs, seed: u64) -> CliResult<Option<PathBuf>> {
    let paths = collect_images(std::slice::from_ref(&a.images))?;
    let ids: Vec<String> = paths.iter().map(|p| stem(p)).collect();
    let split = SplitManifest::from_ids(&ids, a.ratio, seed)?;
    create_dir(&a.out_dir)?;
    write_json(&a.out_dir.join("split.json"), &split)?;
    println!("split: {} train, {} test", split.train.len(), split.test.len());

    let labels = match &a.labels {
        Some(p) => read_labels(p)?,
        None => Vec::new(),
    };
    let Some(size) = a.tile else {
        return Ok(Some(a.out_dir.clone()));
    };
    let cfg = TileConfig {
        size,
        overlap: a.overlap,
        min_retained: a.min_retained,
    };
    // Labels may name images with or without their extension.
    let mut by_image: BTreeMap<String, Vec<GroundTruthBox>> = BTreeMap::new();
    for b in labels {
        let key = stem(Path::new(&b.image_id));
        by_image.entry(key).or_default().push(b);
    }
    let tile_dir = a.out_dir.join("tiles");
    create_dir(&tile_dir)?;
    let mut manifest = TileManifest {
        size,
        overlap: a.overlap,
        min_retained: a.min_retained,
        tiles: Vec::new(),
    };
    let mut tile_labels = Vec::new();
    for (path, id) in paths.iter().zip(&ids) {
        let img = read_image(path)?;
        let boxes = by_image.get(id).map(Vec::as_slice).unwrap_or(&[]);
        for t in datasetio::tile(&img, id, boxes, &cfg)? {
            write_image(&tile_dir.join(format!("{}.png", t.id())), &t.raster)?;
            tile_labels.extend(t.boxes.iter().cloned());
            manifest.tiles.push(TileManifestEntry {
                entry: t.manifest_entry(),
                split: if split.is_train(id) { "train" } else { "test" },
            });
        }
    }
    write_json(&a.out_dir.join("tiles.json"), &manifest)?;
    deteval::write_ground_truth(create_file(&a.out_dir.join("tiles.csv"))?, &tile_labels)?;
    println!("tiles: {} written to {}", manifest.tiles.len(), tile_dir.display());
    Ok(Some(a.out_dir.clone()))
}

fn bench(a: &BenchArgs) -> CliResult<Option<PathBuf>> {
    let model = load_model(&a.model)?;
    let img = match &a.input {
        Some(p) => {
            require_exists(p)?;
            read_image(p)?
        }
        None => synthetic::scene(synthetic::SceneKind::Glyphs, 544, 0),
    };
    let report = rfsr::benchmark(&model, &img, a.runs)?;
    println!(
        "{}x{} -> {}x{}: median {:.4} s, p90 {:.4} s, min {:.4} s over {} runs (published reference {:.1} s)",
        report.width,
        report.height,
        report.width * report.scale,
        report.height * report.scale,
        report.median_s,
        report.p90_s,
        report.min_s,
        report.runs,
        report.reference_s
    );
    match &a.out {
        Some(out) => {
            write_json(out, &report)?;
            Ok(Some(parent_dir(out)))
        }
        None => Ok(None),
    }
}
