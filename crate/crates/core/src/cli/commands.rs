use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::*;
use crate::clustering::DbscanParams;
use crate::descriptor::store::{read_any, write_csv_file, write_store};
use crate::descriptor::{occlusion_heatmap, DescriptorFunction, DescriptorVector};
use crate::eval::{curve_from_errors, curves_csv, oracle, random_baseline, video_seed, VideoDiagnostic};
use crate::geo::{haversine_distance, GeoPoint};
use crate::image::ImageGrid;
use crate::index::{build_index, load_index, save_index, IndexConfig, IndexMode};
use crate::keyframes::{rgb_histogram, select_from_histograms, KeyframeConfig};
use crate::output::{json_line, read_jsonl, read_predictions, votes_geojson, write_predictions, write_text, Fixed9};
use crate::synth::sweep::{invariance_sweep, sweep_csv, test_card, HalvesHistogram, Transform};
use crate::synth::{benchmark_videos, generate_world, SyntheticWorld, VideoSpec, WorldManifest, WorldSpec};
use crate::voting::{locate_video, AggregationConfig, KeypointSource, Prediction, Strategy, VideoQuery};

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| {
        // serde_json reports line/column; convert to a byte offset
        let offset: usize = bytes.split(|b| *b == b'\n').take(e.line().saturating_sub(1)).map(|l| l.len() + 1).sum();
        Error::format((offset + e.column().saturating_sub(1)) as u64, format!("{}: {e}", path.display()))
    })
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| Error::invalid(e.to_string()))
}

pub(super) fn index_build(a: &IndexBuildArgs) -> Result<()> {
    let mut m = RunManifest::new("index build", a, Some(a.seed))?;
    m.input(&a.input)?;
    let records = read_any(&a.input)?;
    let cfg = IndexConfig {
        mode: match a.mode {
            ModeArg::Exact => IndexMode::Exact,
            ModeArg::Approx => IndexMode::Approximate,
        },
        num_partitions: a.partitions,
        probes: a.probes,
        kmeans_iterations: a.kmeans_iterations,
        seed: a.seed,
    };
    if cfg.mode == IndexMode::Approximate {
        cfg.resolve(records.len())?;
    }
    let index = build_index(&records, &cfg)?;
    save_index(&index, &a.out)?;
    m.output(&a.out);
    m.write_for(&a.out)
}

#[derive(Debug, Deserialize)]
struct RawSidecar {
    width: usize,
    height: usize,
    count: usize,
}

#[derive(Debug, Serialize)]
struct KeyframeOutput {
    frames: usize,
    threshold: f64,
    normalized: bool,
    keyframes: Vec<usize>,
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pnm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub(super) fn keyframes(a: &KeyframesArgs) -> Result<()> {
    let cfg = KeyframeConfig { threshold: a.threshold, normalize_hist: a.normalized };
    let mut m = RunManifest::new("keyframes", a, None)?;
    let hists = if a.frames.is_dir() {
        let files = frame_files(&a.frames)?;
        for f in &files {
            m.input(f)?;
        }
        files
            .par_iter()
            .map(|f| rgb_histogram(&ImageGrid::read_pnm(f)?))
            .collect::<Result<Vec<_>>>()?
    } else {
        let sidecar = a.sidecar.clone().unwrap_or_else(|| {
            let mut s = a.frames.as_os_str().to_owned();
            s.push(".json");
            PathBuf::from(s)
        });
        m.input(&a.frames)?;
        m.input(&sidecar)?;
        let meta: RawSidecar = read_json(&sidecar)?;
        if meta.width == 0 || meta.height == 0 {
            return Err(Error::Config("raw frames need positive width and height".into()));
        }
        let bytes = fs::read(&a.frames).map_err(|e| Error::io(&a.frames, e))?;
        let frame = meta.width * meta.height * 3;
        let expected = frame * meta.count;
        if bytes.len() < expected {
            let at = bytes.len() / frame * frame;
            return Err(Error::format(at as u64, format!("raw stream ends inside frame {}", bytes.len() / frame)));
        }
        if bytes.len() > expected {
            return Err(Error::format(expected as u64, "raw stream has bytes after the last declared frame"));
        }
        bytes
            .par_chunks(frame)
            .map(|c| rgb_histogram(&ImageGrid::new(meta.width, meta.height, 3, c.to_vec())?))
            .collect::<Result<Vec<_>>>()?
    };
    let frames = hists.len();
    let keyframes = select_from_histograms(hists, &cfg)?;
    let out = KeyframeOutput { frames, threshold: a.threshold, normalized: a.normalized, keyframes };
    write_text(&a.out, &pretty(&out)?)?;
    m.output(&a.out);
    m.write_for(&a.out)
}

fn world_model(path: &Path) -> Result<SyntheticWorld> {
    let wm: WorldManifest = read_json(path)?;
    SyntheticWorld::model(wm.spec, wm.seed)
}

pub(super) fn locate(a: &LocateArgs) -> Result<()> {
    let strategy: Strategy = a.strategy.parse()?;
    let cfg = AggregationConfig {
        k: a.k,
        strategy,
        lambda: a.lambda,
        top_s: a.s.unwrap_or(a.k),
        dbscan: DbscanParams { eps: a.eps, min_pts: a.min_pts },
        top_matches: a.top_matches,
    };
    cfg.validate()?;
    let mut m = RunManifest::new("locate", a, Some(a.seed))?;
    m.input(&a.index)?;
    m.input(&a.video_descriptors)?;
    let world = match &a.world {
        Some(w) => {
            m.input(w)?;
            Some(world_model(w)?)
        }
        None => None,
    };
    let index = load_index(&a.index)?;
    let videos: Vec<VideoQuery> = read_jsonl(&a.video_descriptors)?;
    let source = world.as_ref().map(|w| w as &dyn KeypointSource);
    let per_video: Vec<Vec<Prediction>> = videos
        .par_iter()
        .enumerate()
        .map(|(pos, v)| {
            let (cands, p) = locate_video(v, &index, &cfg, source)?;
            let mut out = vec![p];
            if a.baselines {
                out.push(random_baseline(&cands, video_seed(a.seed, pos))?);
                out.push(oracle(&cands, v.ground_truth)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let preds: Vec<Prediction> = per_video.into_iter().flatten().collect();
    write_predictions(&a.out, &preds)?;
    m.output(&a.out);
    if let Some(g) = &a.geojson {
        write_text(g, &votes_geojson(&preds)?)?;
        m.output(g);
    }
    m.write_for(&a.out)
}

#[derive(Debug, Deserialize)]
struct TruthRow {
    video_id: String,
    lat: f64,
    lon: f64,
}

fn read_truths(path: &Path) -> Result<HashMap<String, GeoPoint>> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut out = HashMap::new();
    if is_csv {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(0, format!("{}: {e}", path.display())))?;
        for row in rdr.deserialize::<TruthRow>() {
            let row = row.map_err(|e| {
                let offset = e.position().map_or(0, |p| p.byte());
                Error::format(offset, format!("{}: {e}", path.display()))
            })?;
            out.insert(row.video_id, GeoPoint::new(row.lat, row.lon)?);
        }
    } else {
        for v in read_jsonl::<VideoQuery>(path)? {
            if let Some(t) = v.ground_truth {
                out.insert(v.video_id, t);
            }
        }
    }
    Ok(out)
}

pub(super) fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let eval = crate::eval::EvalConfig { grid: a.grid.clone(), seed: 0 };
    eval.validate()?;
    let mut m = RunManifest::new("evaluate", a, None)?;
    m.input(&a.predictions)?;
    m.input(&a.truths)?;
    let preds = read_predictions(&a.predictions)?;
    let truths = read_truths(&a.truths)?;
    let mut methods: Vec<String> = Vec::new();
    let mut diagnostics = Vec::with_capacity(preds.len());
    for p in &preds {
        let truth = *truths
            .get(&p.video_id)
            .ok_or_else(|| Error::invalid(format!("no ground truth for video {}", p.video_id)))?;
        if !methods.contains(&p.strategy) {
            methods.push(p.strategy.clone());
        }
        diagnostics.push(VideoDiagnostic {
            video_id: p.video_id.clone(),
            method: p.strategy.clone(),
            pred_lat: p.lat,
            pred_lon: p.lon,
            truth_lat: Fixed9(truth.lat),
            truth_lon: Fixed9(truth.lon),
            error_m: haversine_distance(p.location()?, truth)?,
            winning_location_id: p.winning_location_id,
            winning_tally: p.total_vote,
            no_dense_cluster: p.no_dense_cluster,
        });
    }
    let curves = methods
        .iter()
        .map(|meth| {
            let errs: Vec<f64> = diagnostics.iter().filter(|d| &d.method == meth).map(|d| d.error_m).collect();
            curve_from_errors(meth, &errs, &a.grid)
        })
        .collect::<Result<Vec<_>>>()?;
    write_text(&a.out, &curves_csv(&a.grid, &curves))?;
    m.output(&a.out);
    if let Some(d) = &a.diagnostics {
        write_text(d, &pretty(&diagnostics)?)?;
        m.output(d);
    }
    m.write_for(&a.out)
}

pub(super) fn heatmap(a: &HeatmapArgs) -> Result<()> {
    let mut m = RunManifest::new("heatmap", a, None)?;
    m.input(&a.query_image)?;
    let f: &dyn DescriptorFunction = match a.descriptor {
        DescriptorArg::SyntheticHistogram => &HalvesHistogram,
    };
    let query = ImageGrid::read_pnm(&a.query_image)?;
    let reference = if let Some(p) = &a.reference_descriptor {
        m.input(p)?;
        let r = DescriptorVector::new(read_json::<Vec<f64>>(p)?)?;
        let expected = f.describe(&query)?.dim();
        if r.dim() != expected {
            return Err(Error::Config(format!(
                "reference descriptor has {} values, the {} descriptor has {expected}",
                r.dim(),
                a.descriptor.name()
            )));
        }
        r
    } else if let Some(p) = &a.reference_image {
        m.input(p)?;
        f.describe(&ImageGrid::read_pnm(p)?)?
    } else {
        f.describe(&query)?
    };
    let map = occlusion_heatmap(&query, &reference, f, a.patch, a.stride.unwrap_or(a.patch))?;
    write_text(&a.out, &map.to_csv())?;
    m.output(&a.out);
    m.write_for(&a.out)
}

pub(super) fn synth_world(a: &SynthWorldArgs) -> Result<()> {
    let spec = WorldSpec { rows: a.rows, cols: a.cols, spacing_m: a.spacing, dim: a.dim, noise: a.noise, ..WorldSpec::default() };
    let world = generate_world(&spec, a.seed)?;
    if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv_file(&a.out, &world.records)?;
    } else {
        write_store(&a.out, &world.records)?;
    }
    let manifest_path = a.manifest.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".world.json");
        PathBuf::from(s)
    });
    write_text(&manifest_path, &pretty(&world.manifest())?)?;
    let mut m = RunManifest::new("synth world", a, Some(a.seed))?;
    m.output(&a.out);
    m.output(&manifest_path);
    m.write_for(&a.out)
}

pub(super) fn synth_videos(a: &SynthVideosArgs) -> Result<()> {
    let mut m = RunManifest::new("synth videos", a, Some(a.seed))?;
    m.input(&a.world)?;
    let world = world_model(&a.world)?;
    let d = VideoSpec::default();
    let spec = VideoSpec {
        keyframes: a.keyframes,
        noise: a.noise.unwrap_or(d.noise),
        confusion: a.confusion.unwrap_or(d.confusion),
        distractor_rate: a.distractors.unwrap_or(d.distractor_rate),
        path_length_m: a.path_length.unwrap_or(d.path_length_m),
        keypoints: !a.no_keypoints,
    };
    let videos = benchmark_videos(&world, a.count, &spec, a.seed)?;
    let mut text = String::new();
    for v in &videos {
        text.push_str(&json_line(v)?);
        text.push('\n');
    }
    write_text(&a.out, &text)?;
    m.output(&a.out);
    if let Some(t) = &a.truths {
        let mut csv = String::from("video_id,lat,lon\n");
        for v in &videos {
            let g = v.ground_truth.expect("synthetic videos carry ground truth");
            csv.push_str(&format!("{},{:.9},{:.9}\n", v.video_id, g.lat, g.lon));
        }
        write_text(t, &csv)?;
        m.output(t);
    }
    m.write_for(&a.out)
}

pub(super) fn synth_sweep(a: &SynthSweepArgs) -> Result<()> {
    let mut m = RunManifest::new("synth sweep", a, None)?;
    let image = match &a.image {
        Some(p) => {
            m.input(p)?;
            ImageGrid::read_pnm(p)?
        }
        None => test_card(a.size)?,
    };
    let transform = match (a.transform, a.step) {
        (TransformArg::Rotation, None) => Transform::rotation(),
        (TransformArg::Rotation, Some(s)) => Transform::Rotation { step_deg: s },
        (TransformArg::Scale, None) => Transform::scale(),
        (TransformArg::Scale, Some(s)) => Transform::Scale { step: s },
    };
    let points = invariance_sweep(&HalvesHistogram, &image, transform)?;
    write_text(&a.out, &sweep_csv(transform, &points))?;
    m.output(&a.out);
    m.write_for(&a.out)
}
