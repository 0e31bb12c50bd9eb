//! Subcommand implementations. Work is computed in parallel and written
//! sequentially, so no two threads touch the output directory at once.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sparse_radar::doa::Taper;
use sparse_radar::eval::{evaluate_dataset, fuse_doppler_images, Estimator};
use sparse_radar::geometry::AngleGrid;
use sparse_radar::image::Image;
use sparse_radar::io::{self, ImageMeta};
use sparse_radar::neural::{mix_datasets, train, NetworkConfig, RefCnn, RefCnnConfig, TrainReport, UNet};
use sparse_radar::pipeline::{
    eval_cases, ground_truth, infer_ranks, process_cube, refcnn_samples, scene_seeds, unet_samples, DasEstimator,
    DnnEstimator, MusicEstimator, RankData, RefCnnEstimator, SceneSample,
};
use sparse_radar::psf::{psf_image, psf_range_channel, psf_scene, psf_study_scene};
use sparse_radar::synthesis::{generate_point_scene, simulate_if_cube, Scene};

use crate::config::RunConfig;
use crate::manifest::{Entry, Manifest};
use crate::{CliError, Command, ModelKind};

type Res<T> = Result<T, CliError>;

/// Model description stored in a weight manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Unet(NetworkConfig),
    ReferenceCnn(RefCnnConfig),
}

#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    config: &'a RunConfig,
}

fn parse<T: FromStr<Err = sparse_radar::Error>>(s: &str) -> Res<T> {
    T::from_str(s).map_err(CliError::from)
}

fn parse_taper(s: &str) -> Res<Taper> {
    match s {
        "hann" => Ok(Taper::Hann),
        "rectangular" | "rect" | "none" => Ok(Taper::Rectangular),
        other => Err(CliError::Config(format!("unknown taper `{other}`"))),
    }
}

fn apply_overrides(cmd: &Command, cfg: &mut RunConfig) -> Res<()> {
    match cmd {
        Command::Simulate { n, array } => {
            if let Some(n) = n {
                cfg.simulate.n_scenes = *n;
            }
            if let Some(a) = array {
                cfg.pipeline.array = parse(a)?;
            }
        }
        Command::Psf { array, estimators, .. } => {
            if let Some(a) = array {
                cfg.psf.array = parse(a)?;
            }
            if !estimators.is_empty() {
                cfg.psf.estimators = estimators.iter().map(|s| parse(s)).collect::<Res<_>>()?;
            }
        }
        Command::Train { mix_fraction, epochs, .. } => {
            if let Some(f) = mix_fraction {
                cfg.train.mix_fraction = *f;
            }
            if let Some(e) = epochs {
                cfg.train.core.epochs = *e;
            }
        }
        Command::Infer { ranks: Some(k), .. } => cfg.pipeline.doppler_ranks = *k,
        Command::Das { taper: Some(t), .. } => cfg.das_taper = parse_taper(t)?,
        _ => {}
    }
    Ok(())
}

pub fn execute(cmd: Command, mut cfg: RunConfig, out: &Path) -> Res<()> {
    apply_overrides(&cmd, &mut cfg)?;
    cfg.resolve()?;
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let out = fs::canonicalize(out)?;
    io::write_json(&out.join("config.resolved.json"), &Resolved { command: cmd.name(), config: &cfg })?;
    log::info!("{} -> {}", cmd.name(), out.display());
    match cmd {
        Command::Simulate { .. } => simulate(&cfg, &out),
        Command::Psf { scene, .. } => psf(&cfg, scene.as_deref(), &out),
        Command::Features { manifest } => features(&cfg, &manifest, &out),
        Command::Gt { manifest } => gt(&cfg, &manifest, &out),
        Command::Train { dataset, mix, model, .. } => train_cmd(&cfg, &dataset, mix.as_deref(), model, &out),
        Command::Infer { weights, dataset, cube, .. } => infer(&cfg, &weights, dataset.as_deref(), cube.as_deref(), &out),
        Command::Das { dataset, .. } => classical(&cfg, &dataset, true, &out),
        Command::Music { dataset } => classical(&cfg, &dataset, false, &out),
        Command::Evaluate { dataset, weights, refcnn_weights, estimators } => {
            evaluate(&cfg, &dataset, weights.as_deref(), refcnn_weights.as_deref(), &estimators, &out)
        }
        Command::Fuse { images } => fuse(&cfg, &images, &out),
    }
}

/// Writes `stem.bin`, its sidecar and `stem.pgm`.
fn write_image_set(out: &Path, stem: &str, img: &Image<f64>, meta: ImageMeta, db: f64) -> Res<PathBuf> {
    let bin = out.join(format!("{stem}.bin"));
    io::write_image(&bin, img, meta)?;
    io::write_pgm(&out.join(format!("{stem}.pgm")), img, db)?;
    Ok(bin)
}

fn image_meta(cfg: &RunConfig, grid: &AngleGrid, img: &Image<f64>) -> ImageMeta {
    let ranges = cfg.pipeline.image_grid().ok().map(|g| g.ranges_m).filter(|r| r.len() == img.n_r);
    ImageMeta { n_r: img.n_r, n_theta: img.n_theta, ranges_m: ranges, angles: Some(grid.clone()) }
}

fn simulate(cfg: &RunConfig, out: &Path) -> Res<()> {
    let p = &cfg.pipeline;
    let array = p.input_array()?;
    let grid = p.angle_grid()?;
    let first = cfg.simulate.first_index;
    let results: Vec<_> = (first..first + cfg.simulate.n_scenes as u64)
        .into_par_iter()
        .map(|i| -> Res<_> {
            let [s_scene, s_in, s_gt] = scene_seeds(cfg.seed, i);
            let scene = generate_point_scene(&p.scenes, s_scene)?;
            let cube = simulate_if_cube::<f32>(&p.radar, &array, &scene, &p.noise, &p.pattern, s_in)?;
            let gt = ground_truth::<f32>(&scene, p, s_gt)?;
            Ok((format!("scene_{i:05}"), scene, cube, gt))
        })
        .collect::<Res<_>>()?;
    let mut entries = Vec::with_capacity(results.len());
    for (id, scene, cube, gt) in results {
        let scene_path = out.join(format!("{id}_scene.json"));
        io::write_scene(&scene_path, &scene)?;
        let cube_path = out.join(format!("{id}_cube.bin"));
        io::write_cube(&cube_path, &cube)?;
        let gt = gt.cast::<f64>();
        let gt_path = write_image_set(out, &format!("{id}_gt"), &gt, image_meta(cfg, &grid, &gt), cfg.pgm_dynamic_range_db)?;
        entries.push(Entry {
            id,
            scene: Some(scene_path),
            cube: Some(cube_path),
            ground_truth: Some(gt_path),
            ..Entry::default()
        });
    }
    let m = Manifest { command: "simulate".into(), array: Some(p.array), n_v: Some(array.n_v()), entries };
    m.save(out)?;
    Ok(())
}

#[derive(Serialize)]
struct PsfRow {
    estimator: String,
    peak_deg: f64,
    width_deg: Option<f64>,
    psl_db: Option<f64>,
}

fn psf(cfg: &RunConfig, scene: Option<&Path>, out: &Path) -> Res<()> {
    let scene = match scene {
        Some(p) => io::read_scene(p)?,
        None => psf_scene(&cfg.psf),
    };
    let cuts = psf_study_scene(&cfg.psf, &scene, cfg.seed)?;
    let grid = AngleGrid::uniform(cfg.psf.grid_bins, -1.0, 1.0)?;
    let rc = psf_range_channel(&cfg.psf, &scene, cfg.seed)?;
    let mut csv = String::from("estimator,peak_deg,width_deg,psl_db\n");
    let mut rows = Vec::new();
    for (cut, est) in cuts.iter().zip(&cfg.psf.estimators) {
        let name = est.name();
        fs::write(out.join(format!("psf_{name}.csv")), io::spectrum_csv(&grid, &cut.values)?)?;
        let img = psf_image(*est, &cfg.psf, &rc, &grid)?;
        let meta = ImageMeta { n_r: img.n_r, n_theta: img.n_theta, ranges_m: None, angles: Some(grid.clone()) };
        write_image_set(out, &format!("psf_{name}"), &img, meta, cfg.pgm_dynamic_range_db)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!("{name},{},{},{}\n", cut.peak_deg, opt(cut.width_deg), opt(cut.psl_db)));
        rows.push(PsfRow { estimator: name.into(), peak_deg: cut.peak_deg, width_deg: cut.width_deg, psl_db: cut.psl_db });
    }
    fs::write(out.join("psf_report.csv"), csv)?;
    io::write_json(&out.join("psf_report.json"), &rows)?;
    Ok(())
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str, id: &str) -> Res<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::Config(format!("manifest entry `{id}` has no {what}")))
}

fn features(cfg: &RunConfig, manifest: &Path, out: &Path) -> Res<()> {
    let m = Manifest::load(manifest)?;
    let p = &cfg.pipeline;
    let grid = p.angle_grid()?;
    let processed: Vec<Vec<RankData<f32>>> = m
        .entries
        .par_iter()
        .map(|e| -> Res<_> {
            let cube = io::read_cube::<f32>(required(&e.cube, "cube", &e.id)?)?;
            if cube.params() != &p.radar {
                return Err(CliError::Config(format!("cube `{}` was recorded with different radar parameters", e.id)));
            }
            Ok(process_cube(&cube, p)?)
        })
        .collect::<Res<_>>()?;
    let mut entries = Vec::with_capacity(m.entries.len());
    for (e, ranks) in m.entries.iter().zip(processed) {
        let mut e = e.clone();
        e.features.clear();
        e.range_channel.clear();
        for (k, r) in ranks.iter().enumerate() {
            let f = out.join(format!("{}_rank{}_features.bin", e.id, k + 1));
            io::write_features(&f, &r.features, Some(&grid))?;
            let rc = out.join(format!("{}_rank{}_rc.bin", e.id, k + 1));
            io::write_range_channel(&rc, &r.rc)?;
            e.features.push(f);
            e.range_channel.push(rc);
        }
        entries.push(e);
    }
    Manifest { command: "features".into(), entries, ..m }.save(out)?;
    Ok(())
}

fn gt(cfg: &RunConfig, manifest: &Path, out: &Path) -> Res<()> {
    let m = Manifest::load(manifest)?;
    let grid = cfg.pipeline.angle_grid()?;
    let images: Vec<Image<f64>> = m
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| -> Res<_> {
            let scene = io::read_scene(required(&e.scene, "scene", &e.id)?)?;
            let [_, _, s_gt] = scene_seeds(cfg.seed, i as u64);
            Ok(ground_truth::<f32>(&scene, &cfg.pipeline, s_gt)?.cast())
        })
        .collect::<Res<_>>()?;
    let mut entries = Vec::with_capacity(images.len());
    for (e, img) in m.entries.iter().zip(images) {
        let path = write_image_set(out, &format!("{}_gt", e.id), &img, image_meta(cfg, &grid, &img), cfg.pgm_dynamic_range_db)?;
        entries.push(Entry { ground_truth: Some(path), ..e.clone() });
    }
    Manifest { command: "gt".into(), entries, ..m }.save(out)?;
    Ok(())
}

/// Processed samples of a feature manifest. Missing ground truth becomes an
/// all-zero image unless `need_gt` is set.
fn load_samples(cfg: &RunConfig, manifest: &Manifest, need_gt: bool) -> Res<Vec<SceneSample<f32>>> {
    manifest
        .entries
        .par_iter()
        .map(|e| -> Res<_> {
            if e.features.is_empty() || e.features.len() != e.range_channel.len() {
                return Err(CliError::Config(format!("entry `{}` has no features; run `features` first", e.id)));
            }
            let mut ranks = Vec::with_capacity(e.features.len());
            let mut grid = None;
            for (f, rc) in e.features.iter().zip(&e.range_channel) {
                let (features, meta) = io::read_features::<f32>(f)?;
                grid = grid.or(meta.angles);
                ranks.push(RankData { rc: io::read_range_channel::<f32>(rc)?, features });
            }
            let (n_r, n_theta) = (ranks[0].features.n_r, ranks[0].features.n_theta);
            let ground_truth = match (&e.ground_truth, need_gt) {
                (Some(p), _) => io::read_image::<f32>(p)?.0,
                (None, false) => Image::zeros(n_r, n_theta),
                (None, true) => return Err(CliError::Config(format!("entry `{}` has no ground truth", e.id))),
            };
            let scene = match &e.scene {
                Some(p) => io::read_scene(p)?,
                None => Scene::default(),
            };
            let grid = match grid {
                Some(g) => g,
                None => cfg.pipeline.angle_grid()?,
            };
            Ok(SceneSample { id: e.id.clone(), scene, ranks, ground_truth, grid, lambda: cfg.pipeline.lambda() })
        })
        .collect()
}

fn largest_mix(n_a: usize, n_b: usize, fraction: f64) -> usize {
    (0..=n_a + n_b)
        .rev()
        .find(|&t| {
            let a = (fraction * t as f64).round() as usize;
            a <= n_a && t - a <= n_b
        })
        .unwrap_or(0)
}

fn train_cmd(cfg: &RunConfig, dataset: &Path, mix: Option<&Path>, model: ModelKind, out: &Path) -> Res<()> {
    let mut data = load_samples(cfg, &Manifest::load(dataset)?, true)?;
    if let Some(mix) = mix {
        let other = load_samples(cfg, &Manifest::load(mix)?, true)?;
        let f = cfg.train.mix_fraction;
        let total = cfg.train.mix_total.unwrap_or_else(|| largest_mix(data.len(), other.len(), f));
        data = mix_datasets(&data, &other, f, total, cfg.seed)?;
    }
    let n_val = cfg.train.validation_count;
    if n_val >= data.len() {
        return Err(CliError::Config(format!("{n_val} validation entries leave no training data")));
    }
    let (train_set, val_set) = data.split_at(data.len() - n_val);
    let tc = &cfg.train.core;
    let weights = out.join("weights.bin");
    let report: TrainReport = match model {
        ModelKind::Unet => {
            let mut net = UNet::<f32>::new(cfg.network.clone(), cfg.seed)?;
            let report = train(&mut net, &unet_samples(train_set, &tc.loss)?, &unet_samples(val_set, &tc.loss)?, tc)?;
            io::write_weights(&weights, &net.weights, &ModelSpec::Unet(cfg.network.clone()))?;
            report
        }
        ModelKind::ReferenceCnn => {
            let mut net = RefCnn::<f32>::new(cfg.reference_cnn.clone(), cfg.seed)?;
            let report = train(&mut net, &refcnn_samples(train_set, &tc.loss), &refcnn_samples(val_set, &tc.loss), tc)?;
            io::write_weights(&weights, &net.weights, &ModelSpec::ReferenceCnn(cfg.reference_cnn.clone()))?;
            report
        }
    };
    fs::write(out.join("loss_curve.csv"), report.to_csv())?;
    if let Some(last) = report.curve.last() {
        log::info!("final training loss {:.6e}", last.train);
    }
    Ok(())
}

fn load_model(path: &Path) -> Res<(ModelSpec, Vec<f32>, Vec<sparse_radar::neural::ParamEntry>, u64)> {
    let (m, values) = io::read_weights::<f32, ModelSpec>(path)
        .map_err(|e| CliError::Runtime(format!("cannot load weights {}: {e}", path.display())))?;
    Ok((m.model, values, m.params, m.seed))
}

pub fn load_unet(path: &Path) -> Res<UNet<f32>> {
    match load_model(path)? {
        (ModelSpec::Unet(c), values, params, seed) => {
            let mut net = UNet::new(c, seed)?;
            net.weights.load_flat(&params, &values)?;
            Ok(net)
        }
        _ => Err(CliError::Config(format!("{} holds a reference CNN, not a U-Net", path.display()))),
    }
}

pub fn load_refcnn(path: &Path) -> Res<RefCnn<f32>> {
    match load_model(path)? {
        (ModelSpec::ReferenceCnn(c), values, params, seed) => {
            let mut net = RefCnn::new(c, seed)?;
            net.weights.load_flat(&params, &values)?;
            Ok(net)
        }
        _ => Err(CliError::Config(format!("{} holds a U-Net, not a reference CNN", path.display()))),
    }
}

fn infer(cfg: &RunConfig, weights: &Path, dataset: Option<&Path>, cube: Option<&Path>, out: &Path) -> Res<()> {
    let net = load_unet(weights)?;
    let k = cfg.pipeline.doppler_ranks;
    let (inputs, grid, base): (Vec<(String, Vec<RankData<f32>>)>, AngleGrid, Option<Manifest>) = match (dataset, cube) {
        (Some(d), _) => {
            let m = Manifest::load(d)?;
            let samples = load_samples(cfg, &m, false)?;
            let grid = samples[0].grid.clone();
            let mut inputs = Vec::new();
            for s in samples {
                if s.ranks.len() < k {
                    return Err(CliError::Config(format!("entry `{}` has {} Doppler ranks, {k} requested", s.id, s.ranks.len())));
                }
                inputs.push((s.id, s.ranks.into_iter().take(k).collect()));
            }
            (inputs, grid, Some(m))
        }
        (None, Some(c)) => {
            let cube = io::read_cube::<f32>(c)?;
            if cube.params() != &cfg.pipeline.radar {
                return Err(CliError::Config("cube radar parameters differ from the configuration".into()));
            }
            let id = c.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "cube".into());
            (vec![(id, process_cube(&cube, &cfg.pipeline)?)], cfg.pipeline.angle_grid()?, None)
        }
        (None, None) => return Err(CliError::Config("infer needs --dataset or --cube".into())),
    };
    let (_, h, w) = net.input_shape();
    for (id, ranks) in &inputs {
        let f = &ranks[0].features;
        if (f.n_r, f.n_theta) != (h, w) {
            return Err(CliError::Config(format!(
                "features of `{id}` are {}x{}, network expects {h}x{w}",
                f.n_r, f.n_theta
            )));
        }
    }
    let results: Vec<(Vec<Image<f32>>, Image<f32>)> = inputs
        .par_iter()
        .map(|(_, ranks)| -> Res<_> {
            let imgs = infer_ranks(&net, ranks)?;
            let fused = fuse_doppler_images(&imgs)?;
            Ok((imgs, fused))
        })
        .collect::<Res<_>>()?;
    let db = cfg.pgm_dynamic_range_db;
    let mut entries = Vec::new();
    for ((id, _), (imgs, fused)) in inputs.iter().zip(results) {
        let mut paths = Vec::new();
        for (r, img) in imgs.iter().enumerate() {
            let img = img.cast::<f64>();
            paths.push(write_image_set(out, &format!("{id}_rank{}", r + 1), &img, image_meta(cfg, &grid, &img), db)?);
        }
        let fused = fused.cast::<f64>();
        paths.push(write_image_set(out, &format!("{id}_fused"), &fused, image_meta(cfg, &grid, &fused), db)?);
        let mut e = base.as_ref().and_then(|m| m.entries.iter().find(|e| &e.id == id).cloned()).unwrap_or_default();
        e.id = id.clone();
        e.images = paths;
        entries.push(e);
    }
    Manifest { command: "infer".into(), array: None, n_v: None, entries }.save(out)?;
    Ok(())
}

fn classical(cfg: &RunConfig, dataset: &Path, das: bool, out: &Path) -> Res<()> {
    let m = Manifest::load(dataset)?;
    let samples = load_samples(cfg, &m, false)?;
    let das_est = DasEstimator { taper: cfg.das_taper };
    let music_est = MusicEstimator { options: cfg.music };
    let name = if das { "das" } else { "music" };
    let images: Vec<Image<f64>> = samples
        .par_iter()
        .map(|s| {
            let rc = &s.primary().rc;
            if das {
                das_est.image(rc, s.lambda, &s.grid)
            } else {
                music_est.image(rc, s.lambda, &s.grid)
            }
        })
        .collect::<Result<_, _>>()?;
    let mut entries = Vec::new();
    for ((s, img), e) in samples.iter().zip(&images).zip(&m.entries) {
        let path = write_image_set(out, &format!("{}_{name}", s.id), img, image_meta(cfg, &s.grid, img), cfg.pgm_dynamic_range_db)?;
        let (r, _) = img.argmax();
        fs::write(out.join(format!("{}_{name}_spectrum.csv", s.id)), io::spectrum_csv(&s.grid, img.row(r))?)?;
        entries.push(Entry { images: vec![path], ..e.clone() });
    }
    Manifest { command: name.into(), entries, ..m }.save(out)?;
    Ok(())
}

fn evaluate(
    cfg: &RunConfig,
    dataset: &Path,
    weights: Option<&Path>,
    refcnn_weights: Option<&Path>,
    names: &[String],
    out: &Path,
) -> Res<()> {
    let unet = weights.map(load_unet).transpose()?;
    let refcnn = refcnn_weights.map(load_refcnn).transpose()?;
    let cases = eval_cases(load_samples(cfg, &Manifest::load(dataset)?, true)?);
    let mut names: Vec<String> = names.to_vec();
    if names.is_empty() {
        names = vec!["das".into(), "music".into()];
        if unet.is_some() {
            names.push("dnn".into());
        }
        if refcnn.is_some() {
            names.push("reference_cnn".into());
        }
    }
    let das = DasEstimator { taper: cfg.das_taper };
    let das_rect = DasEstimator { taper: Taper::Rectangular };
    let music = MusicEstimator { options: cfg.music };
    let dnn = unet.as_ref().map(|net| DnnEstimator { net });
    let rcnn = refcnn.as_ref().map(|net| RefCnnEstimator { net });
    let mut ests: Vec<&dyn Estimator<SceneSample<f32>>> = Vec::new();
    for n in &names {
        match n.as_str() {
            "das" => ests.push(&das),
            "das_rect" => ests.push(&das_rect),
            "music" => ests.push(&music),
            "dnn" => ests.push(dnn.as_ref().ok_or_else(|| CliError::Config("dnn needs --weights".into()))?),
            "reference_cnn" => {
                ests.push(rcnn.as_ref().ok_or_else(|| CliError::Config("reference_cnn needs --refcnn-weights".into()))?)
            }
            other => return Err(CliError::Config(format!("unknown estimator `{other}`"))),
        }
    }
    let report = evaluate_dataset(&ests, &cases, &cfg.eval)?;
    fs::write(out.join("metrics.csv"), report.to_csv())?;
    io::write_json(&out.join("metrics.json"), &report)?;
    for (alg, case, err) in &report.failures {
        log::warn!("{alg} failed on {case}: {err}");
    }
    Ok(())
}

fn fuse(cfg: &RunConfig, images: &[PathBuf], out: &Path) -> Res<()> {
    let mut imgs = Vec::with_capacity(images.len());
    let mut meta = None;
    for p in images {
        let (img, m) = io::read_image::<f64>(p)?;
        meta.get_or_insert(m);
        imgs.push(img);
    }
    let fused = fuse_doppler_images(&imgs)?;
    let meta = meta.expect("at least one image");
    write_image_set(out, "fused", &fused, meta, cfg.pgm_dynamic_range_db)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use sparse_radar::geometry::ArrayKind;
    use sparse_radar::psf::PsfEstimator;

    #[test]
    fn mix_size_is_feasible() {
        assert_eq!(largest_mix(10, 10, 0.5), 20);
        // 5 splits as round(2.5) = 3 plus 2.
        assert_eq!(largest_mix(10, 2, 0.5), 5);
        assert_eq!(largest_mix(3, 0, 1.0), 3);
        let (a, b) = (vec![0; 10], vec![1; 2]);
        assert!(mix_datasets(&a, &b, 0.5, 5, 0).is_ok());
        assert!(mix_datasets(&a, &b, 0.5, 6, 0).is_err());
    }

    #[test]
    fn model_spec_is_tagged() {
        let s = serde_json::to_value(ModelSpec::Unet(NetworkConfig::default())).unwrap();
        assert_eq!(s["kind"], "unet");
        assert_eq!(s["depth"], 3);
    }

    #[test]
    fn parses_names() {
        assert_eq!(parse::<ArrayKind>("fig4c").unwrap(), ArrayKind::Sparse4);
        assert!(matches!(parse::<ArrayKind>("fig9"), Err(CliError::Config(_))));
        assert_eq!(parse::<PsfEstimator>("mf").unwrap(), PsfEstimator::MatchedFilter);
        assert!(parse_taper("kaiser").is_err());
    }
}
