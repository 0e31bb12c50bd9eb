//! On-disk formats. Binary payloads are little-endian `f32`; each `.bin`
//! file has a JSON sidecar with the same stem.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureImage, N_FEAT, PLANE_NAMES};
use crate::geometry::{AngleGrid, RadarParams, VirtualArray};
use crate::image::Image;
use crate::neural::{ParamEntry, WeightStore};
use crate::rd::RangeChannelMatrix;
use crate::scalar::{Cplx, Real};
use crate::synthesis::{RadarCube, Scene};

/// Sidecar path of a binary file.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

pub fn read_json<S: DeserializeOwned>(path: &Path) -> Result<S> {
    let bytes = fs::read(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn write_f32<T: Real>(path: &Path, values: impl IntoIterator<Item = T>) -> Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f32<T: Real>(path: &Path) -> Result<Vec<T>> {
    let bytes = fs::read(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!("{}: length {} is not a multiple of 4", path.display(), bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect())
}

fn interleave<T: Real>(z: &[Cplx<T>]) -> impl Iterator<Item = T> + '_ {
    z.iter().flat_map(|c| [c.re, c.im])
}

fn deinterleave<T: Real>(v: &[T]) -> Vec<Cplx<T>> {
    v.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect()
}

fn expect_len(path: &Path, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Format(format!("{}: {got} values, sidecar implies {want}", path.display())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeMeta {
    pub n_v: usize,
    pub n_chirp: usize,
    pub n_samples: usize,
    pub params: RadarParams,
    pub array: VirtualArray,
}

/// Writes `cube` as interleaved `(re, im)` samples, channel-major.
pub fn write_cube<T: Real>(bin: &Path, cube: &RadarCube<T>) -> Result<()> {
    let (n_v, n_chirp, n_samples) = cube.shape();
    write_f32(bin, interleave(cube.data()))?;
    let meta = CubeMeta { n_v, n_chirp, n_samples, params: cube.params().clone(), array: cube.array().clone() };
    write_json(&sidecar_path(bin), &meta)
}

pub fn read_cube<T: Real>(bin: &Path) -> Result<RadarCube<T>> {
    let meta: CubeMeta = read_json(&sidecar_path(bin))?;
    if meta.array.n_v() != meta.n_v || meta.params.n_chirp != meta.n_chirp || meta.params.n_samples != meta.n_samples {
        return Err(Error::Format(format!("{}: inconsistent cube sidecar", bin.display())));
    }
    let v = read_f32::<T>(bin)?;
    expect_len(bin, v.len(), 2 * meta.n_v * meta.n_chirp * meta.n_samples)?;
    RadarCube::from_parts(deinterleave(&v), meta.params, meta.array)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeChannelMeta {
    pub n_v: usize,
    /// Always 1: the matrix is stored like a single-chirp cube.
    pub n_chirp: usize,
    pub n_samples: usize,
    pub array: VirtualArray,
    pub doppler_bins: Vec<usize>,
    pub rank: usize,
    pub range_bin_m: f64,
}

/// Stores a range-channel matrix in the cube layout with one chirp, one
/// range bin per sample.
pub fn write_range_channel<T: Real>(bin: &Path, rc: &RangeChannelMatrix<T>) -> Result<()> {
    let by_channel: Vec<Cplx<T>> = (0..rc.n_v).flat_map(|m| rc.channel(m)).collect();
    write_f32(bin, interleave(&by_channel))?;
    let meta = RangeChannelMeta {
        n_v: rc.n_v,
        n_chirp: 1,
        n_samples: rc.n_r,
        array: rc.array.clone(),
        doppler_bins: rc.doppler_bins.clone(),
        rank: rc.rank,
        range_bin_m: rc.range_bin_m,
    };
    write_json(&sidecar_path(bin), &meta)
}

pub fn read_range_channel<T: Real>(bin: &Path) -> Result<RangeChannelMatrix<T>> {
    let meta: RangeChannelMeta = read_json(&sidecar_path(bin))?;
    let v = deinterleave(&read_f32::<T>(bin)?);
    let (n_v, n_r) = (meta.n_v, meta.n_samples);
    expect_len(bin, v.len(), n_v * n_r)?;
    if meta.n_chirp != 1 || meta.array.n_v() != n_v || meta.doppler_bins.len() != n_r {
        return Err(Error::Format(format!("{}: inconsistent range-channel sidecar", bin.display())));
    }
    let data = (0..n_r).flat_map(|r| (0..n_v).map(move |m| (r, m))).map(|(r, m)| v[m * n_r + r]).collect();
    Ok(RangeChannelMatrix {
        data,
        n_r,
        n_v,
        array: meta.array,
        doppler_bins: meta.doppler_bins,
        rank: meta.rank,
        range_bin_m: meta.range_bin_m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_feat: usize,
    pub plane_names: Vec<String>,
    pub log_epsilon: f64,
    /// Azimuth sines of the columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<AngleGrid>,
}

pub fn write_features<T: Real>(bin: &Path, f: &FeatureImage<T>, angles: Option<&AngleGrid>) -> Result<()> {
    write_f32(bin, f.planes.iter().copied())?;
    let meta = FeatureMeta {
        n_r: f.n_r,
        n_theta: f.n_theta,
        n_feat: N_FEAT,
        plane_names: PLANE_NAMES.iter().map(|s| s.to_string()).collect(),
        log_epsilon: f.log_epsilon,
        angles: angles.cloned(),
    };
    write_json(&sidecar_path(bin), &meta)
}

pub fn read_features<T: Real>(bin: &Path) -> Result<(FeatureImage<T>, FeatureMeta)> {
    let meta: FeatureMeta = read_json(&sidecar_path(bin))?;
    if meta.n_feat != N_FEAT || meta.plane_names.iter().zip(PLANE_NAMES).any(|(a, b)| a != b) {
        return Err(Error::Format(format!("{}: unexpected plane layout {:?}", bin.display(), meta.plane_names)));
    }
    let planes = read_f32::<T>(bin)?;
    expect_len(bin, planes.len(), N_FEAT * meta.n_r * meta.n_theta)?;
    let f = FeatureImage { planes, n_r: meta.n_r, n_theta: meta.n_theta, log_epsilon: meta.log_epsilon };
    Ok((f, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges_m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<AngleGrid>,
}

/// Raw float plane of an image.
pub fn write_image<T: Real>(bin: &Path, img: &Image<T>, meta: ImageMeta) -> Result<()> {
    if (meta.n_r, meta.n_theta) != img.shape() {
        return Err(Error::Shape(format!("image {:?} with sidecar {}x{}", img.shape(), meta.n_r, meta.n_theta)));
    }
    write_f32(bin, img.data.iter().copied())?;
    write_json(&sidecar_path(bin), &meta)
}

pub fn read_image<T: Real>(bin: &Path) -> Result<(Image<T>, ImageMeta)> {
    let meta: ImageMeta = read_json(&sidecar_path(bin))?;
    let data = read_f32::<T>(bin)?;
    expect_len(bin, data.len(), meta.n_r * meta.n_theta)?;
    Ok((Image::from_vec(data, meta.n_r, meta.n_theta)?, meta))
}

/// 8-bit binary PGM of `20 log10(|v| / max)` over `dynamic_range_db`.
/// Rows are range bins, far range at the top.
pub fn write_pgm<T: Real>(path: &Path, img: &Image<T>, dynamic_range_db: f64) -> Result<()> {
    let peak = img.data.iter().map(|v| v.as_f64().abs()).fold(0.0, f64::max);
    let mut bytes = format!("P5\n{} {}\n255\n", img.n_theta, img.n_r).into_bytes();
    for r in (0..img.n_r).rev() {
        for v in img.row(r) {
            let m = v.as_f64().abs();
            let level = if peak > 0.0 && m > 0.0 {
                let db = 20.0 * (m / peak).log10();
                ((db + dynamic_range_db) / dynamic_range_db).clamp(0.0, 1.0)
            } else {
                0.0
            };
            bytes.push((level * 255.0).round() as u8);
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Two-column `u,value` CSV.
pub fn spectrum_csv<T: Real>(grid: &AngleGrid, values: &[T]) -> Result<String> {
    if grid.len() != values.len() {
        return Err(Error::Shape(format!("{} grid bins, {} values", grid.len(), values.len())));
    }
    let mut s = String::from("u,value\n");
    for (u, v) in grid.values().iter().zip(values) {
        s.push_str(&format!("{u},{v}\n"));
    }
    Ok(s)
}

/// Weight-file sidecar: tensor layout plus the model description needed to
/// rebuild the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest<C> {
    pub model: C,
    pub seed: u64,
    pub params: Vec<ParamEntry>,
}

pub fn write_weights<T: Real, C: Serialize>(bin: &Path, store: &WeightStore<T>, model: &C) -> Result<()> {
    write_f32(bin, store.flat())?;
    write_json(&sidecar_path(bin), &WeightManifest { model, seed: store.seed, params: store.manifest() })
}

/// Flat values and manifest of a weight file.
pub fn read_weights<T: Real, C: DeserializeOwned>(bin: &Path) -> Result<(WeightManifest<C>, Vec<T>)> {
    let manifest: WeightManifest<C> = read_json(&sidecar_path(bin))?;
    let values = read_f32::<T>(bin)?;
    let need = manifest.params.iter().map(|p| p.offset + p.shape.iter().product::<usize>()).max().unwrap_or(0);
    if values.len() < need {
        return Err(Error::Format(format!("{}: {} values, manifest needs {need}", bin.display(), values.len())));
    }
    Ok((manifest, values))
}

pub fn write_scene(path: &Path, scene: &Scene) -> Result<()> {
    write_json(path, scene)
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ArrayKind;
    use crate::neural::{NetworkConfig, UNet};

    fn params() -> RadarParams {
        RadarParams { n_chirp: 2, n_samples: 8, ..RadarParams::default() }
    }

    #[test]
    fn cube_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = params();
        let array = ArrayKind::Sparse4.build(&p).unwrap();
        let n = array.n_v() * 2 * 8;
        let data: Vec<Cplx<f32>> = (0..n).map(|i| Complex::new(i as f32, -(i as f32) * 0.5)).collect();
        let cube = RadarCube::from_parts(data, p, array).unwrap();
        let bin = dir.path().join("c.bin");
        write_cube(&bin, &cube).unwrap();
        let meta: CubeMeta = read_json(&sidecar_path(&bin)).unwrap();
        assert_eq!(meta.n_v, 12);
        assert_eq!(read_cube::<f32>(&bin).unwrap(), cube);
        fs::write(&bin, [0u8; 12]).unwrap();
        assert!(read_cube::<f32>(&bin).is_err());
    }

    #[test]
    fn range_channel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let array = ArrayKind::Sparse6.build(&params()).unwrap();
        let mut rc = RangeChannelMatrix::<f64>::zeros(5, array, 0.15);
        for (i, z) in rc.data.iter_mut().enumerate() {
            *z = Complex::new(i as f64, 1.0);
        }
        let bin = dir.path().join("rc.bin");
        write_range_channel(&bin, &rc).unwrap();
        assert_eq!(read_range_channel::<f64>(&bin).unwrap(), rc);
    }

    #[test]
    fn feature_plane_order_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let f = FeatureImage::<f32> { planes: (0..5 * 6).map(|i| i as f32).collect(), n_r: 2, n_theta: 3, log_epsilon: 1e-6 };
        let bin = dir.path().join("f.bin");
        write_features(&bin, &f, None).unwrap();
        let (g, meta) = read_features::<f32>(&bin).unwrap();
        assert_eq!(g, f);
        assert_eq!(meta.plane_names[4], PLANE_NAMES[4]);
        assert_eq!(g.plane(3), &[18.0, 19.0, 20.0, 21.0, 22.0, 23.0]);
    }

    #[test]
    fn weights_round_trip_into_network() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = NetworkConfig { depth: 1, base_channels: 2, input_height: 4, input_width: 4, ..Default::default() };
        let net = UNet::<f32>::new(cfg.clone(), 5).unwrap();
        let bin = dir.path().join("w.bin");
        write_weights(&bin, &net.weights, &cfg).unwrap();
        let (m, values) = read_weights::<f32, NetworkConfig>(&bin).unwrap();
        assert_eq!(m.model, cfg);
        let mut other = UNet::<f32>::new(cfg, 6).unwrap();
        other.weights.load_flat(&m.params, &values).unwrap();
        assert_eq!(other.weights.flat(), net.weights.flat());
    }

    #[test]
    fn pgm_header_and_scale() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_vec(vec![1.0, 0.1, 0.0, 0.01], 2, 2).unwrap();
        let path = dir.path().join("i.pgm");
        write_pgm(&path, &img, 40.0).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        // bottom row (range 0) is written last
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 0, 255, 128]);
    }

    #[test]
    fn spectrum_csv_rows() {
        let g = AngleGrid::uniform(3, -0.5, 0.5).unwrap();
        let s = spectrum_csv(&g, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s, "u,value\n-0.5,1\n0,2\n0.5,3\n");
        assert!(spectrum_csv(&g, &[1.0]).is_err());
    }
}
