//! Scene-to-sample chain shared by the CLI, the training set builder and
//! the evaluation estimators: simulate a scene with the input array and the
//! enhanced array, run range/Doppler processing, extract features on an
//! angle crop and image the ground truth on the same pixel grid.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doa::{das_windowed, music_row, MusicOptions, Taper};
use crate::error::{Error, Result};
use crate::eval::{EvalCase, Estimator};
use crate::features::{extract_features, reference_cnn_input, FeatureImage};
use crate::geometry::{enhanced_ula, AngleGrid, ArrayKind, ImageGrid, RadarParams, VirtualArray};
use crate::image::Image;
use crate::neural::{
    feature_tensor, preprocess_target, refcnn::covariance_tensor, LossConfig, Model, RefCnn, Sample, Tensor, UNet,
};
use crate::rd::{self, RangeChannelMatrix};
use crate::scalar::Real;
use crate::synthesis::{
    generate_point_scene, matched_filter_image, simulate_if_cube, NoiseSpec, PatternSpec, RadarCube, RdOptions, Scene,
    SceneGenConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub radar: RadarParams,
    pub array: ArrayKind,
    pub scenes: SceneGenConfig,
    pub noise: NoiseSpec,
    /// Noise added to the enhanced-array recording; none by default.
    pub gt_noise: NoiseSpec,
    pub pattern: PatternSpec,
    pub rd: RdOptions,
    /// Bins of the full angle grid over `u in [-1, 1]`.
    pub grid_bins: usize,
    /// Centred crop of the full grid used for features and images.
    pub angle_bins: usize,
    pub range_start: usize,
    pub range_bins: usize,
    /// Ground-truth pixels below this fraction of the image peak are zeroed.
    pub gt_floor: f64,
    /// Doppler ranks processed per range bin.
    pub doppler_ranks: usize,
    pub enhanced_rx: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            radar: RadarParams { n_chirp: 8, n_samples: 128, ..RadarParams::default() },
            array: ArrayKind::Sparse4,
            scenes: SceneGenConfig::default(),
            noise: NoiseSpec::snr(20.0),
            gt_noise: NoiseSpec::none(),
            pattern: PatternSpec::default(),
            rd: RdOptions::default(),
            grid_bins: 450,
            angle_bins: 64,
            range_start: 0,
            range_bins: 64,
            gt_floor: 0.3,
            doppler_ranks: 1,
            enhanced_rx: crate::geometry::ENHANCED_RX,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.scenes.validate()?;
        if self.angle_bins == 0 || self.angle_bins > self.grid_bins {
            return Err(Error::Config(format!(
                "angle crop of {} bins does not fit a {}-bin grid",
                self.angle_bins, self.grid_bins
            )));
        }
        let n_r = self.radar.n_range_bins();
        if self.range_bins == 0 || self.range_start + self.range_bins > n_r {
            return Err(Error::Config(format!(
                "range rows {}..{} exceed the {n_r} range bins",
                self.range_start,
                self.range_start + self.range_bins
            )));
        }
        if !(0.0..1.0).contains(&self.gt_floor) {
            return Err(Error::Config(format!("ground-truth floor {} outside [0, 1)", self.gt_floor)));
        }
        if self.doppler_ranks == 0 || self.doppler_ranks > self.radar.n_chirp {
            return Err(Error::Config(format!("{} Doppler ranks with {} chirps", self.doppler_ranks, self.radar.n_chirp)));
        }
        if self.enhanced_rx == 0 {
            return Err(Error::Config("enhanced array needs at least one RX".into()));
        }
        Ok(())
    }

    pub fn angle_grid(&self) -> Result<AngleGrid> {
        AngleGrid::uniform(self.grid_bins, -1.0, 1.0)?.center_crop(self.angle_bins)
    }

    pub fn image_grid(&self) -> Result<ImageGrid> {
        Ok(ImageGrid::from_range_bins(&self.radar, self.range_start, self.range_bins, self.angle_grid()?))
    }

    pub fn input_array(&self) -> Result<VirtualArray> {
        self.array.build(&self.radar)
    }

    pub fn enhanced_array(&self) -> Result<VirtualArray> {
        enhanced_ula(&self.radar, self.enhanced_rx)
    }

    pub fn lambda(&self) -> f64 {
        self.radar.wavelength()
    }
}

/// Seeds for the scene draw, the input noise and the ground-truth noise of
/// scene `index`.
pub fn scene_seeds(seed: u64, index: u64) -> [u64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    [rng.next_u64(), rng.next_u64(), rng.next_u64()]
}

/// One processed Doppler rank: range-channel rows and their features.
#[derive(Debug, Clone, PartialEq)]
pub struct RankData<T> {
    pub rc: RangeChannelMatrix<T>,
    pub features: FeatureImage<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample<T> {
    pub id: String,
    pub scene: Scene,
    /// Doppler ranks 1..=k in order.
    pub ranks: Vec<RankData<T>>,
    pub ground_truth: Image<T>,
    pub grid: AngleGrid,
    pub lambda: f64,
}

impl<T: Real> SceneSample<T> {
    pub fn primary(&self) -> &RankData<T> {
        &self.ranks[0]
    }
}

fn crop_rows<T: Real>(rc: &RangeChannelMatrix<T>, start: usize, n: usize) -> RangeChannelMatrix<T> {
    RangeChannelMatrix {
        data: rc.data[start * rc.n_v..(start + n) * rc.n_v].to_vec(),
        n_r: n,
        n_v: rc.n_v,
        array: rc.array.clone(),
        doppler_bins: rc.doppler_bins[start..start + n].to_vec(),
        rank: rc.rank,
        range_bin_m: rc.range_bin_m,
    }
}

/// Range-Doppler processing and feature extraction of an input cube.
pub fn process_cube<T: Real>(cube: &RadarCube<T>, cfg: &PipelineConfig) -> Result<Vec<RankData<T>>> {
    let grid = cfg.angle_grid()?;
    let rdc = rd::range_doppler(cube, cfg.rd.range_window, cfg.rd.doppler_window);
    let sel = rd::select_doppler_bins(&rd::mean_magnitude(&rdc), cfg.doppler_ranks)?;
    (1..=cfg.doppler_ranks)
        .map(|rank| {
            let rc = crop_rows(&rd::extract_range_channel(&rdc, &sel, rank)?, cfg.range_start, cfg.range_bins);
            let features = extract_features(&rc, cfg.lambda(), &grid)?;
            Ok(RankData { rc, features })
        })
        .collect()
}

/// Floored enhanced-array image of `scene` on the pipeline pixel grid.
pub fn ground_truth<T: Real>(scene: &Scene, cfg: &PipelineConfig, noise_seed: u64) -> Result<Image<T>> {
    let enhanced = cfg.enhanced_array()?;
    let cube = simulate_if_cube::<T>(&cfg.radar, &enhanced, scene, &cfg.gt_noise, &cfg.pattern, noise_seed)?;
    let gt = matched_filter_image(&cfg.radar, &enhanced, &cube, &cfg.image_grid()?, &cfg.rd)?;
    Ok(gt.with_floor(T::lit(cfg.gt_floor)).image)
}

/// Simulates and processes `scene` with explicit noise seeds.
pub fn process_scene<T: Real>(
    id: String,
    scene: Scene,
    cfg: &PipelineConfig,
    input_seed: u64,
    gt_seed: u64,
) -> Result<SceneSample<T>> {
    let cube = simulate_if_cube::<T>(&cfg.radar, &cfg.input_array()?, &scene, &cfg.noise, &cfg.pattern, input_seed)?;
    let ranks = process_cube(&cube, cfg)?;
    let ground_truth = ground_truth(&scene, cfg, gt_seed)?;
    Ok(SceneSample { id, scene, ranks, ground_truth, grid: cfg.angle_grid()?, lambda: cfg.lambda() })
}

/// Scene `index` of the random dataset seeded by `seed`.
pub fn random_sample<T: Real>(cfg: &PipelineConfig, seed: u64, index: u64) -> Result<SceneSample<T>> {
    let [s_scene, s_in, s_gt] = scene_seeds(seed, index);
    let scene = generate_point_scene(&cfg.scenes, s_scene)?;
    process_scene(format!("scene_{index:05}"), scene, cfg, s_in, s_gt)
}

/// Scenes `first..first + n` of the dataset seeded by `seed`.
pub fn generate_dataset<T: Real>(cfg: &PipelineConfig, seed: u64, first: u64, n: usize) -> Result<Vec<SceneSample<T>>> {
    cfg.validate()?;
    (0..n as u64).into_par_iter().map(|i| random_sample(cfg, seed, first + i)).collect()
}

/// U-Net training pairs (rank-1 features, preprocessed ground truth).
pub fn unet_samples<T: Real>(samples: &[SceneSample<T>], loss: &LossConfig) -> Result<Vec<Sample<Tensor<T>, T>>> {
    samples
        .iter()
        .map(|s| {
            Ok(Sample { input: feature_tensor(&s.primary().features)?, target: preprocess_target(&s.ground_truth, loss).data })
        })
        .collect()
}

/// Per-range-bin training pairs for the reference CNN.
pub fn refcnn_samples<T: Real>(samples: &[SceneSample<T>], loss: &LossConfig) -> Vec<Sample<Tensor<T>, T>> {
    let mut out = Vec::new();
    for s in samples {
        let target = preprocess_target(&s.ground_truth, loss);
        let rc = &s.primary().rc;
        for r in 0..rc.n_r {
            out.push(Sample { input: covariance_tensor(&reference_cnn_input(rc.row(r))), target: target.row(r).to_vec() });
        }
    }
    out
}

/// Evaluation cases over the rank-1 data of each sample.
pub fn eval_cases<T: Real>(samples: Vec<SceneSample<T>>) -> Vec<EvalCase<SceneSample<T>>> {
    samples
        .into_iter()
        .map(|s| EvalCase { id: s.id.clone(), ground_truth: s.ground_truth.cast(), data: s })
        .collect()
}

fn rows_image<T: Real>(rows: Vec<Vec<T>>) -> Result<Image<f64>> {
    Ok(Image::from_rows(&rows)?.cast())
}

/// Tapered delay-and-sum on the input array.
#[derive(Debug, Clone, Copy, Default)]
pub struct DasEstimator {
    pub taper: Taper,
}

impl DasEstimator {
    pub fn image<T: Real>(&self, rc: &RangeChannelMatrix<T>, lambda: f64, grid: &AngleGrid) -> Result<Image<f64>> {
        let pos = rc.positions();
        let rows = (0..rc.n_r).map(|r| das_windowed(rc.row(r), &pos, lambda, grid, self.taper)).collect::<Result<_>>()?;
        rows_image::<T>(rows)
    }
}

impl<T: Real> Estimator<SceneSample<T>> for DasEstimator {
    fn name(&self) -> String {
        match self.taper {
            Taper::Hann => "das".into(),
            Taper::Rectangular => "das_rect".into(),
        }
    }

    fn estimate(&self, s: &SceneSample<T>) -> Result<Image<f64>> {
        self.image(&s.primary().rc, s.lambda, &s.grid)
    }
}

/// Spatially smoothed MUSIC with AIC order selection per range bin.
#[derive(Debug, Clone, Copy, Default)]
pub struct MusicEstimator {
    pub options: MusicOptions,
}

impl MusicEstimator {
    pub fn image<T: Real>(&self, rc: &RangeChannelMatrix<T>, lambda: f64, grid: &AngleGrid) -> Result<Image<f64>> {
        let pos = rc.positions();
        let rows = (0..rc.n_r)
            .map(|r| music_row(rc.row(r), &pos, lambda, grid, self.options).map(|m| m.spectrum))
            .collect::<Result<_>>()?;
        rows_image::<T>(rows)
    }
}

impl<T: Real> Estimator<SceneSample<T>> for MusicEstimator {
    fn name(&self) -> String {
        "music".into()
    }

    fn estimate(&self, s: &SceneSample<T>) -> Result<Image<f64>> {
        self.image(&s.primary().rc, s.lambda, &s.grid)
    }
}

/// Trained U-Net applied to the rank-1 feature image.
pub struct DnnEstimator<'a, T> {
    pub net: &'a UNet<T>,
}

impl<T: Real> Estimator<SceneSample<T>> for DnnEstimator<'_, T> {
    fn name(&self) -> String {
        "dnn".into()
    }

    fn estimate(&self, s: &SceneSample<T>) -> Result<Image<f64>> {
        Ok(self.net.infer_image(&s.primary().features)?.cast())
    }
}

/// Per-range-bin covariance CNN.
pub struct RefCnnEstimator<'a, T> {
    pub net: &'a RefCnn<T>,
}

impl<T: Real> Estimator<SceneSample<T>> for RefCnnEstimator<'_, T> {
    fn name(&self) -> String {
        "reference_cnn".into()
    }

    fn estimate(&self, s: &SceneSample<T>) -> Result<Image<f64>> {
        let rc = &s.primary().rc;
        let rows = (0..rc.n_r)
            .map(|r| self.net.predict(&covariance_tensor(&reference_cnn_input(rc.row(r)))))
            .collect::<Result<_>>()?;
        rows_image::<T>(rows)
    }
}

/// U-Net output for every Doppler rank of `ranks`.
pub fn infer_ranks<T: Real>(net: &UNet<T>, ranks: &[RankData<T>]) -> Result<Vec<Image<T>>> {
    ranks.iter().map(|r| net.infer_image(&r.features)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        PipelineConfig { enhanced_rx: 64, ..PipelineConfig::default() }
    }

    #[test]
    fn default_shapes() {
        let cfg = small();
        cfg.validate().unwrap();
        let s: SceneSample<f32> = random_sample(&cfg, 3, 0).unwrap();
        assert_eq!(s.primary().features.n_r, 64);
        assert_eq!(s.primary().features.n_theta, 64);
        assert_eq!(s.ground_truth.shape(), (64, 64));
        assert_eq!(s.primary().rc.n_v, 12);
        let grid = cfg.angle_grid().unwrap();
        assert!(grid.degrees()[0] < -8.0 && grid.degrees()[63] > 8.0);
    }

    #[test]
    fn ground_truth_marks_target_pixel() {
        let cfg = small();
        let u = 3f64.to_radians().sin();
        let scene = Scene::single(crate::synthesis::PointTarget::at(5.7, u, num_complex::Complex64::new(1.0, 0.0)));
        let s: SceneSample<f64> = process_scene("t".into(), scene, &cfg, 1, 2).unwrap();
        let (r, a) = s.ground_truth.argmax();
        assert_eq!(r, (5.7 / cfg.radar.range_bin_m()).round() as usize);
        assert!((a as isize - s.grid.nearest(u) as isize).abs() <= 1);
    }

    #[test]
    fn dataset_is_seed_deterministic() {
        let cfg = small();
        let a: Vec<SceneSample<f32>> = generate_dataset(&cfg, 9, 5, 2).unwrap();
        let b: Vec<SceneSample<f32>> = generate_dataset(&cfg, 9, 5, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[1].id, "scene_00006");
        assert_ne!(a[0].ground_truth, a[1].ground_truth);
    }

    #[test]
    fn rejects_bad_crops() {
        assert!(PipelineConfig { angle_bins: 500, ..small() }.validate().is_err());
        assert!(PipelineConfig { range_start: 10, ..small() }.validate().is_err());
    }
}
