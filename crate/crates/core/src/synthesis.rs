//! FMCW MIMO IF-signal simulation, synthetic scene generation and
//! matched-filter ground-truth imaging with the enhanced array.

use std::f64::consts::PI;

use num_complex::{Complex, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    polar_from_position, position_from_polar, ImageGrid, RadarParams, VirtualArray, SPEED_OF_LIGHT,
};
use crate::image::Image;
use crate::rd::{self, RangeChannelMatrix, WindowSpec};
use crate::scalar::{Cplx, Real};

/// Point scatterer. Position and velocity are `(x, y)` with `y` along
/// boresight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTarget {
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    pub amplitude: Complex64,
}

impl PointTarget {
    pub fn at(range_m: f64, u: f64, amplitude: Complex64) -> Self {
        Self { position: position_from_polar(range_m, u), velocity: [0.0; 2], amplitude }
    }

    /// Slant range and azimuth sine.
    pub fn polar(&self) -> (f64, f64) {
        polar_from_position(self.position)
    }

    /// Sets a purely radial velocity (positive = receding).
    pub fn with_radial_velocity(mut self, v: f64) -> Self {
        let r = self.position[0].hypot(self.position[1]);
        if r > 0.0 {
            self.velocity = [v * self.position[0] / r, v * self.position[1] / r];
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    pub targets: Vec<PointTarget>,
    #[serde(default)]
    pub sensor_velocity: [f64; 2],
}

impl Scene {
    pub fn single(target: PointTarget) -> Self {
        Self { targets: vec![target], sensor_velocity: [0.0; 2] }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.targets.iter_mut().for_each(|t| t.amplitude *= factor);
        s
    }
}

/// Additive complex white Gaussian noise. The SNR is the ratio between the
/// weakest scatterer's per-sample power and the noise power.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: Option<f64>,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { snr_db: None }
    }

    pub fn snr(db: f64) -> Self {
        Self { snr_db: Some(db) }
    }
}

/// Combined (two-way) antenna element gain over azimuth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PatternSpec {
    /// `cos(theta)^exponent`.
    CosinePower { exponent: f64 },
    /// Piecewise-linear table, normalised to its maximum.
    Table { angles_deg: Vec<f64>, gains: Vec<f64> },
}

impl Default for PatternSpec {
    fn default() -> Self {
        Self::CosinePower { exponent: 2.0 }
    }
}

/// Real gain in `[0, 1]` of the element pattern at azimuth `theta` (rad).
pub fn apply_element_pattern(theta: f64, pattern: &PatternSpec) -> f64 {
    match pattern {
        PatternSpec::CosinePower { exponent } => {
            if *exponent == 0.0 {
                return 1.0;
            }
            let c = theta.cos();
            if c <= 0.0 {
                0.0
            } else {
                c.powf(*exponent).clamp(0.0, 1.0)
            }
        }
        PatternSpec::Table { angles_deg, gains } => {
            if angles_deg.is_empty() || angles_deg.len() != gains.len() {
                return 1.0;
            }
            let peak = gains.iter().cloned().fold(0.0, f64::max);
            if peak <= 0.0 {
                return 0.0;
            }
            let a = theta.to_degrees();
            let n = angles_deg.len();
            let g = if a <= angles_deg[0] {
                gains[0]
            } else if a >= angles_deg[n - 1] {
                gains[n - 1]
            } else {
                let i = angles_deg.windows(2).position(|w| a >= w[0] && a <= w[1]).unwrap_or(0);
                let t = (a - angles_deg[i]) / (angles_deg[i + 1] - angles_deg[i]);
                gains[i] + t * (gains[i + 1] - gains[i])
            };
            (g / peak).clamp(0.0, 1.0)
        }
    }
}

/// Complex IF samples indexed `(virtual_channel, chirp, sample)`, stored
/// channel-major in the element order of `array`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube<T> {
    data: Vec<Cplx<T>>,
    params: RadarParams,
    array: VirtualArray,
}

impl<T: Real> RadarCube<T> {
    pub fn from_parts(data: Vec<Cplx<T>>, params: RadarParams, array: VirtualArray) -> Result<Self> {
        let expected = array.n_v() * params.n_chirp * params.n_samples;
        if data.len() != expected {
            return Err(Error::Shape(format!("cube has {} samples, expected {expected}", data.len())));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Format("cube contains non-finite samples".into()));
        }
        Ok(Self { data, params, array })
    }

    pub fn zeros(params: RadarParams, array: VirtualArray) -> Self {
        let n = array.n_v() * params.n_chirp * params.n_samples;
        Self { data: vec![Complex::new(T::zero(), T::zero()); n], params, array }
    }

    /// `(n_v, n_chirp, n_samples)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.array.n_v(), self.params.n_chirp, self.params.n_samples)
    }

    pub fn params(&self) -> &RadarParams {
        &self.params
    }

    pub fn array(&self) -> &VirtualArray {
        &self.array
    }

    pub fn data(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Cplx<T>> {
        self.data
    }

    pub fn chirp(&self, ch: usize, chirp: usize) -> &[Cplx<T>] {
        let n_s = self.params.n_samples;
        let start = (ch * self.params.n_chirp + chirp) * n_s;
        &self.data[start..start + n_s]
    }

    #[inline]
    pub fn get(&self, ch: usize, chirp: usize, sample: usize) -> Cplx<T> {
        self.data[(ch * self.params.n_chirp + chirp) * self.params.n_samples + sample]
    }

    /// Same samples stored in a different channel order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let array = self.array.with_element_order(order)?;
        let per_ch = self.params.n_chirp * self.params.n_samples;
        let mut data = Vec::with_capacity(self.data.len());
        for &ch in order {
            data.extend_from_slice(&self.data[ch * per_ch..(ch + 1) * per_ch]);
        }
        Ok(Self { data, params: self.params.clone(), array })
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Simulates the complex IF cube of `scene` seen by `array`.
///
/// Each sample is the coherent sum over targets of
/// `A_k g(theta_k) exp(2 pi j (mu t tau_k + f_c tau_k))`, with `tau_k` taken
/// from the exact TX-target-RX path length. Targets and sensor move by
/// `velocity * T_c` between chirps and are frozen within a chirp. Noise is
/// drawn from a per-chirp RNG stream so the result is independent of thread
/// scheduling.
pub fn simulate_if_cube<T: Real>(
    params: &RadarParams,
    array: &VirtualArray,
    scene: &Scene,
    noise: &NoiseSpec,
    pattern: &PatternSpec,
    seed: u64,
) -> Result<RadarCube<T>> {
    params.validate()?;
    let max_range = params.max_range_m();
    let mut gains = Vec::with_capacity(scene.targets.len());
    for t in &scene.targets {
        if !(t.position[0].is_finite() && t.position[1].is_finite()) {
            return Err(Error::Domain("target position is not finite".into()));
        }
        if t.amplitude.norm() == 0.0 || !t.amplitude.norm().is_finite() {
            return Err(Error::Domain("target amplitude must be non-zero and finite".into()));
        }
        let (r, u) = t.polar();
        if r > max_range {
            return Err(Error::Domain(format!(
                "target at {r:.3} m is beyond the unambiguous range {max_range:.3} m"
            )));
        }
        gains.push(apply_element_pattern(u.clamp(-1.0, 1.0).asin(), pattern));
    }

    let n_v = array.n_v();
    let (n_c, n_s) = (params.n_chirp, params.n_samples);
    let antennas: Vec<([f64; 2], [f64; 2])> = (0..n_v).map(|m| array.channel_antennas(m)).collect();
    for t in &scene.targets {
        for (tx, rx) in &antennas {
            if dist(*tx, t.position) < 1e-9 || dist(*rx, t.position) < 1e-9 {
                return Err(Error::SingularGeometry("target coincides with an antenna".into()));
            }
        }
    }

    let noise_sigma = match noise.snr_db {
        Some(db) if !scene.targets.is_empty() => {
            if !db.is_finite() {
                return Err(Error::Config("SNR must be finite".into()));
            }
            let weakest = scene
                .targets
                .iter()
                .zip(&gains)
                .map(|(t, g)| (t.amplitude * g).norm_sqr())
                .fold(f64::INFINITY, f64::min);
            Some((weakest / 10f64.powf(db / 10.0)).sqrt())
        }
        _ => None,
    };

    let two_pi = 2.0 * PI;
    let dt = params.chirp_s / n_s as f64;
    let mu = params.chirp_rate();
    let fc = params.carrier_hz;

    let chirps: Vec<Vec<Cplx<T>>> = (0..n_c)
        .into_par_iter()
        .map(|chirp| {
            let elapsed = chirp as f64 * params.chirp_s;
            let mut buf = vec![Complex64::new(0.0, 0.0); n_v * n_s];
            for (t, g) in scene.targets.iter().zip(&gains) {
                let pos = [
                    t.position[0] + (t.velocity[0] - scene.sensor_velocity[0]) * elapsed,
                    t.position[1] + (t.velocity[1] - scene.sensor_velocity[1]) * elapsed,
                ];
                let amp = t.amplitude * g;
                for (m, (tx, rx)) in antennas.iter().enumerate() {
                    let tau = (dist(*tx, pos) + dist(*rx, pos)) / SPEED_OF_LIGHT;
                    let phase0 = two_pi * (fc * tau).fract();
                    let dphi = two_pi * mu * tau * dt;
                    for (s, out) in buf[m * n_s..(m + 1) * n_s].iter_mut().enumerate() {
                        let (sn, cs) = (phase0 + dphi * s as f64).sin_cos();
                        *out += amp * Complex64::new(cs, sn);
                    }
                }
            }
            if let Some(sigma) = noise_sigma {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(chirp as u64);
                let s = sigma / std::f64::consts::SQRT_2;
                for z in buf.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *z += Complex64::new(re * s, im * s);
                }
            }
            buf.into_iter().map(|z| Complex::new(T::lit(z.re), T::lit(z.im))).collect()
        })
        .collect();

    let mut data = vec![Complex::new(T::zero(), T::zero()); n_v * n_c * n_s];
    for (chirp, buf) in chirps.iter().enumerate() {
        for m in 0..n_v {
            let dst = (m * n_c + chirp) * n_s;
            data[dst..dst + n_s].copy_from_slice(&buf[m * n_s..(m + 1) * n_s]);
        }
    }
    Ok(RadarCube { data, params: params.clone(), array: array.clone() })
}

/// Single far-field snapshot `x_m = sum_k a_k exp(j 2 pi/lambda u_k x_m)`,
/// the phase convention of the IF model, plus complex Gaussian noise at
/// `snr_db` relative to the weakest source.
pub fn simulate_snapshot<T: Real, R: Rng>(
    positions: &[f64],
    lambda: f64,
    sources: &[(f64, Complex64)],
    snr_db: Option<f64>,
    rng: &mut R,
) -> Vec<Cplx<T>> {
    let k = 2.0 * PI / lambda;
    let mut x: Vec<Complex64> = positions
        .iter()
        .map(|&p| sources.iter().map(|(u, a)| a * Complex64::from_polar(1.0, k * u * p)).sum())
        .collect();
    if let Some(db) = snr_db {
        let weakest = sources.iter().map(|(_, a)| a.norm_sqr()).fold(f64::INFINITY, f64::min);
        if weakest.is_finite() {
            let s = (weakest / 10f64.powf(db / 10.0) / 2.0).sqrt();
            for z in x.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z += Complex64::new(re * s, im * s);
            }
        }
    }
    x.into_iter().map(|z| Complex::new(T::lit(z.re), T::lit(z.im))).collect()
}

/// Parameter ranges for random point-target scenes. Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneGenConfig {
    pub count: [usize; 2],
    pub range_m: [f64; 2],
    pub angle_deg: [f64; 2],
    /// Probability that the next two targets are placed as a close pair in
    /// the same range bin.
    pub pair_probability: f64,
    pub separation_deg: [f64; 2],
    pub amplitude: [f64; 2],
    /// Radial speed magnitude of targets; the sign is random.
    pub target_speed_mps: [f64; 2],
    pub sensor_speed_mps: [f64; 2],
    pub clutter_count: [usize; 2],
    pub clutter_amplitude: [f64; 2],
    /// Snap target ranges to the centre of the nearest range bin of this
    /// width; zero disables.
    pub range_quantum_m: f64,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            count: [1, 3],
            range_m: [2.0, 9.0],
            angle_deg: [-7.0, 7.0],
            pair_probability: 0.5,
            separation_deg: [0.5, 2.0],
            amplitude: [0.5, 1.0],
            target_speed_mps: [0.0, 0.0],
            sensor_speed_mps: [0.0, 0.0],
            clutter_count: [0, 0],
            clutter_amplitude: [0.02, 0.05],
            range_quantum_m: 0.0,
        }
    }
}

impl SceneGenConfig {
    pub fn validate(&self) -> Result<()> {
        fn ordered(name: &str, r: [f64; 2]) -> Result<()> {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::Config(format!("{name} range [{}, {}] is inverted", r[0], r[1])));
            }
            Ok(())
        }
        if self.count[0] == 0 || self.count[0] > self.count[1] {
            return Err(Error::Config(format!("target count range {:?} is invalid", self.count)));
        }
        if self.clutter_count[0] > self.clutter_count[1] {
            return Err(Error::Config("clutter count range is inverted".into()));
        }
        ordered("range_m", self.range_m)?;
        ordered("angle_deg", self.angle_deg)?;
        ordered("separation_deg", self.separation_deg)?;
        ordered("amplitude", self.amplitude)?;
        ordered("target_speed_mps", self.target_speed_mps)?;
        ordered("sensor_speed_mps", self.sensor_speed_mps)?;
        ordered("clutter_amplitude", self.clutter_amplitude)?;
        if self.range_m[0] <= 0.0 {
            return Err(Error::Config("ranges must be positive".into()));
        }
        if self.angle_deg[0] <= -90.0 || self.angle_deg[1] >= 90.0 {
            return Err(Error::Config("angles must lie inside (-90, 90) degrees".into()));
        }
        if self.amplitude[0] <= 0.0 || self.clutter_amplitude[0] < 0.0 {
            return Err(Error::Config("amplitudes must be positive".into()));
        }
        if self.separation_deg[0] < 0.0
            || self.separation_deg[1] > self.angle_deg[1] - self.angle_deg[0]
        {
            return Err(Error::Config("separation range does not fit the angle span".into()));
        }
        if !(0.0..=1.0).contains(&self.pair_probability) {
            return Err(Error::Config("pair probability must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Random scene drawn deterministically from `seed`.
pub fn generate_point_scene(config: &SceneGenConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(config.count[0]..=config.count[1]);
    let mut targets = Vec::with_capacity(n);

    let snap = |r: f64| {
        if config.range_quantum_m > 0.0 {
            (r / config.range_quantum_m).round() * config.range_quantum_m
        } else {
            r
        }
    };
    let draw_amp = |rng: &mut ChaCha8Rng, span: [f64; 2]| {
        Complex64::from_polar(uniform(rng, span), rng.random_range(0.0..2.0 * PI))
    };
    let speed = |rng: &mut ChaCha8Rng| {
        let v = uniform(rng, config.target_speed_mps);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    };

    while targets.len() < n {
        let range = snap(uniform(&mut rng, config.range_m));
        let remaining = n - targets.len();
        if remaining >= 2 && rng.random_bool(config.pair_probability) {
            let gap = uniform(&mut rng, config.separation_deg);
            let first = uniform(&mut rng, [config.angle_deg[0], config.angle_deg[1] - gap]);
            for angle in [first, first + gap] {
                let amp = draw_amp(&mut rng, config.amplitude);
                let v = speed(&mut rng);
                targets.push(PointTarget::at(range, angle.to_radians().sin(), amp).with_radial_velocity(v));
            }
        } else {
            let angle = uniform(&mut rng, config.angle_deg);
            let amp = draw_amp(&mut rng, config.amplitude);
            let v = speed(&mut rng);
            targets.push(PointTarget::at(range, angle.to_radians().sin(), amp).with_radial_velocity(v));
        }
    }

    let n_clutter = rng.random_range(config.clutter_count[0]..=config.clutter_count[1]);
    for _ in 0..n_clutter {
        let range = uniform(&mut rng, config.range_m);
        let angle = uniform(&mut rng, config.angle_deg);
        let amp = draw_amp(&mut rng, config.clutter_amplitude);
        if amp.norm() > 0.0 {
            targets.push(PointTarget::at(range, angle.to_radians().sin(), amp));
        }
    }

    let s = uniform(&mut rng, config.sensor_speed_mps);
    let dir = rng.random_range(0.0..2.0 * PI);
    Ok(Scene { targets, sensor_velocity: [s * dir.cos(), s * dir.sin()] })
}

/// Magnitude image on a range x azimuth-sine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthImage<T> {
    pub image: Image<T>,
    pub grid: ImageGrid,
}

impl<T: Real> GroundTruthImage<T> {
    /// Zeroes sidelobe residue below `fraction` of the image peak.
    pub fn with_floor(mut self, fraction: T) -> Self {
        self.image.apply_floor(fraction);
        self
    }
}

/// Range/Doppler processing options shared by the input and ground-truth
/// paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RdOptions {
    pub range_window: WindowSpec,
    pub doppler_window: WindowSpec,
}

impl Default for RdOptions {
    fn default() -> Self {
        Self { range_window: WindowSpec::Hann, doppler_window: WindowSpec::Hann }
    }
}

/// Near-field back-projection of range-compressed channel data.
///
/// For each pixel and channel the exact two-way delay `tau` gives a
/// fractional range bin `b = B tau`; the channel spectrum is linearly
/// interpolated there after removing the symmetric-window phase ramp
/// `exp(j pi (b - k)(N - 1)/N)`, then the carrier phase `exp(-2 pi j f_c tau)`
/// is compensated and the channels are summed coherently.
pub fn backproject<T: Real>(
    params: &RadarParams,
    rc: &RangeChannelMatrix<T>,
    grid: &ImageGrid,
) -> Result<GroundTruthImage<T>> {
    let n_fft = params.n_samples as f64;
    let ramp = PI * (n_fft - 1.0) / n_fft;
    let fc = params.carrier_hz;
    let bw = params.bandwidth_hz;
    let n_r = rc.n_r;
    let antennas: Vec<([f64; 2], [f64; 2])> = (0..rc.n_v).map(|m| rc.array.channel_antennas(m)).collect();
    let columns: Vec<Vec<Complex64>> = (0..rc.n_v)
        .map(|m| rc.channel(m).iter().map(|z| Complex64::new(z.re.as_f64(), z.im.as_f64())).collect())
        .collect();
    let next_bin = Complex64::from_polar(1.0, ramp);
    let u = grid.angles.values();

    let rows: Vec<Vec<T>> = grid
        .ranges_m
        .par_iter()
        .map(|&range| {
            u.iter()
                .map(|&uu| {
                    let p = position_from_polar(range, uu);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for ((tx, rx), col) in antennas.iter().zip(&columns) {
                        let tau = (dist(*tx, p) + dist(*rx, p)) / SPEED_OF_LIGHT;
                        let b = bw * tau;
                        let k0 = b.floor();
                        if k0 < 0.0 || k0 as usize + 1 >= n_r {
                            continue;
                        }
                        let k = k0 as usize;
                        let f = b - k0;
                        let rot = Complex64::from_polar(1.0, -ramp * f - 2.0 * PI * (fc * tau).fract());
                        acc += rot * (col[k] * (1.0 - f) + col[k + 1] * next_bin * f);
                    }
                    T::lit(acc.norm())
                })
                .collect()
        })
        .collect();
    Ok(GroundTruthImage { image: Image::from_rows(&rows)?, grid: grid.clone() })
}

/// Ground-truth image of `cube` recorded with the enhanced array: range and
/// Doppler processing identical to the input path, rank-1 Doppler selection,
/// then near-field back-projection.
pub fn matched_filter_image<T: Real>(
    params: &RadarParams,
    enhanced_array: &VirtualArray,
    cube: &RadarCube<T>,
    grid: &ImageGrid,
    rd_opts: &RdOptions,
) -> Result<GroundTruthImage<T>> {
    if cube.array().n_v() != enhanced_array.n_v() {
        return Err(Error::Shape(format!(
            "cube has {} channels, imaging array has {}",
            cube.array().n_v(),
            enhanced_array.n_v()
        )));
    }
    if grid.ranges_m.is_empty() || grid.angles.is_empty() {
        return Err(Error::Shape("empty image grid".into()));
    }
    let rdc = rd::range_doppler(cube, rd_opts.range_window, rd_opts.doppler_window);
    let mean = rd::mean_magnitude(&rdc);
    let sel = rd::select_doppler_bins(&mean, 1)?;
    let rc = rd::extract_range_channel(&rdc, &sel, 1)?;
    backproject(params, &rc, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_virtual_array, ArrayKind};

    fn small_params() -> RadarParams {
        RadarParams { n_chirp: 8, n_samples: 128, ..RadarParams::default() }
    }

    #[test]
    fn pattern_values() {
        let cos2 = PatternSpec::default();
        assert_eq!(apply_element_pattern(0.0, &cos2), 1.0);
        assert!((apply_element_pattern(60f64.to_radians(), &cos2) - 0.25).abs() < 1e-12);
        let iso = PatternSpec::CosinePower { exponent: 0.0 };
        for a in [-1.5, -0.3, 0.0, 0.7, 1.5] {
            assert_eq!(apply_element_pattern(a, &iso), 1.0);
        }
        let table = PatternSpec::Table { angles_deg: vec![-90.0, 0.0, 90.0], gains: vec![0.0, 2.0, 0.0] };
        assert_eq!(apply_element_pattern(0.0, &table), 1.0);
        assert!((apply_element_pattern(45f64.to_radians(), &table) - 0.5).abs() < 1e-12);
        for a in [0.1, 0.4, 1.2] {
            assert_eq!(apply_element_pattern(a, &cos2), apply_element_pattern(-a, &cos2));
        }
    }

    #[test]
    fn colocated_channels_are_identical() {
        let p = small_params();
        let arr = build_virtual_array(&[0.0], &[0.0, 0.0, 0.0]).unwrap();
        let scene = Scene::single(PointTarget::at(4.0, 0.1, Complex64::new(1.0, 0.0)));
        let cube: RadarCube<f64> =
            simulate_if_cube(&p, &arr, &scene, &NoiseSpec::none(), &PatternSpec::default(), 0).unwrap();
        for c in 0..p.n_chirp {
            assert_eq!(cube.chirp(0, c), cube.chirp(1, c));
            assert_eq!(cube.chirp(0, c), cube.chirp(2, c));
        }
        assert!(cube.data().iter().any(|z| z.im.abs() > 0.1));
    }

    #[test]
    fn zero_range_is_singular() {
        let p = small_params();
        let arr = build_virtual_array(&[0.0], &[0.0]).unwrap();
        let scene = Scene::single(PointTarget { position: [0.0, 0.0], velocity: [0.0; 2], amplitude: Complex64::new(1.0, 0.0) });
        let r: Result<RadarCube<f64>> =
            simulate_if_cube(&p, &arr, &scene, &NoiseSpec::none(), &PatternSpec::default(), 0);
        assert!(matches!(r, Err(Error::SingularGeometry(_))));
    }

    #[test]
    fn amplitude_linearity() {
        let p = small_params();
        let arr = ArrayKind::Sparse4.build(&p).unwrap();
        let scene = Scene {
            targets: vec![
                PointTarget::at(3.0, -0.05, Complex64::new(0.7, 0.2)),
                PointTarget::at(6.1, 0.08, Complex64::new(-0.3, 0.5)).with_radial_velocity(2.0),
            ],
            sensor_velocity: [0.5, 1.0],
        };
        let a: RadarCube<f64> =
            simulate_if_cube(&p, &arr, &scene, &NoiseSpec::none(), &PatternSpec::default(), 0).unwrap();
        let b: RadarCube<f64> =
            simulate_if_cube(&p, &arr, &scene.scaled(2.0), &NoiseSpec::none(), &PatternSpec::default(), 0)
                .unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x * 2.0 - y).norm() < 1e-12);
        }
    }

    #[test]
    fn doppler_phase_step_per_chirp() {
        let p = small_params();
        let arr = build_virtual_array(&[0.0], &[0.0]).unwrap();
        let v = 6.0;
        let scene = Scene::single(PointTarget::at(5.0, 0.0, Complex64::new(1.0, 0.0)).with_radial_velocity(v));
        let cube: RadarCube<f64> =
            simulate_if_cube(&p, &arr, &scene, &NoiseSpec::none(), &PatternSpec::CosinePower { exponent: 0.0 }, 0)
                .unwrap();
        let expected = 2.0 * PI * p.carrier_hz * 2.0 * v * p.chirp_s / SPEED_OF_LIGHT;
        let step = (cube.get(0, 1, 0) * cube.get(0, 0, 0).conj()).arg();
        let wrapped = (expected + PI).rem_euclid(2.0 * PI) - PI;
        assert!((step - wrapped).abs() < 1e-6, "{step} vs {wrapped}");
        assert!(v < p.max_velocity_mps());
    }

    #[test]
    fn identical_seeds_give_identical_cubes() {
        let p = small_params();
        let arr = ArrayKind::Sparse6.build(&p).unwrap();
        let scene = generate_point_scene(&SceneGenConfig::default(), 3).unwrap();
        let a: RadarCube<f32> =
            simulate_if_cube(&p, &arr, &scene, &NoiseSpec::snr(10.0), &PatternSpec::default(), 11).unwrap();
        let b: RadarCube<f32> =
            simulate_if_cube(&p, &arr, &scene, &NoiseSpec::snr(10.0), &PatternSpec::default(), 11).unwrap();
        assert_eq!(a, b);
        let c: RadarCube<f32> =
            simulate_if_cube(&p, &arr, &scene, &NoiseSpec::snr(10.0), &PatternSpec::default(), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_power_matches_configuration() {
        let p = RadarParams { n_chirp: 16, n_samples: 512, ..RadarParams::default() };
        let arr = ArrayKind::Sparse6.build(&p).unwrap();
        let scene = Scene {
            targets: vec![
                PointTarget::at(4.0, 0.0, Complex64::new(2.0, 0.0)),
                PointTarget::at(5.0, 0.0, Complex64::new(0.0, 0.5)),
            ],
            sensor_velocity: [0.0; 2],
        };
        let pattern = PatternSpec::default();
        let clean: RadarCube<f64> = simulate_if_cube(&p, &arr, &scene, &NoiseSpec::none(), &pattern, 5).unwrap();
        let noisy: RadarCube<f64> = simulate_if_cube(&p, &arr, &scene, &NoiseSpec::snr(6.0), &pattern, 5).unwrap();
        let n = clean.data().len();
        assert!(n >= 100_000);
        let measured: f64 =
            clean.data().iter().zip(noisy.data()).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>() / n as f64;
        let expected = 0.25 / 10f64.powf(0.6);
        assert!((measured / expected - 1.0).abs() < 0.05, "{measured} vs {expected}");
    }

    #[test]
    fn scene_generation_is_deterministic_and_validated() {
        let cfg = SceneGenConfig::default();
        assert_eq!(generate_point_scene(&cfg, 9).unwrap(), generate_point_scene(&cfg, 9).unwrap());
        let one = SceneGenConfig { count: [1, 1], ..cfg.clone() };
        for s in 0..20 {
            assert_eq!(generate_point_scene(&one, s).unwrap().targets.len(), 1);
        }
        let bad = SceneGenConfig { range_m: [5.0, 2.0], ..cfg.clone() };
        assert!(matches!(generate_point_scene(&bad, 0), Err(Error::Config(_))));
        let bad = SceneGenConfig { count: [3, 1], ..cfg };
        assert!(matches!(generate_point_scene(&bad, 0), Err(Error::Config(_))));
    }

    #[test]
    fn pairs_share_range_and_respect_gap() {
        let cfg = SceneGenConfig { count: [2, 2], pair_probability: 1.0, ..SceneGenConfig::default() };
        for seed in 0..50 {
            let s = generate_point_scene(&cfg, seed).unwrap();
            let (r0, u0) = s.targets[0].polar();
            let (r1, u1) = s.targets[1].polar();
            assert!((r0 - r1).abs() < 1e-9);
            let gap = (u1.asin() - u0.asin()).to_degrees();
            assert!((0.5..=2.0).contains(&gap), "{gap}");
        }
    }

    #[test]
    fn zero_cube_gives_zero_image() {
        let p = small_params();
        let arr = ArrayKind::Enhanced.build(&p).unwrap();
        let cube = RadarCube::<f64>::zeros(p.clone(), arr.clone());
        let grid = ImageGrid::from_range_bins(&p, 10, 4, crate::geometry::AngleGrid::uniform(16, -0.1, 0.1).unwrap());
        let img = matched_filter_image(&p, &arr, &cube, &grid, &RdOptions::default()).unwrap();
        assert!(img.image.data.iter().all(|v| *v == 0.0));
        let wrong = ArrayKind::Full.build(&p).unwrap();
        assert!(matches!(matched_filter_image(&p, &wrong, &cube, &grid, &RdOptions::default()), Err(Error::Shape(_))));
    }
}
