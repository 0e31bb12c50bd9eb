//! Range-Doppler processing: windowed 2-D FFT, mean magnitude image,
//! per-range Doppler bin selection and range-channel extraction.

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::doa::peaks::find_peaks;
use crate::error::{Error, Result};
use crate::geometry::{VirtualArray, VirtualElement};
use crate::scalar::{Cplx, Real};
use crate::synthesis::RadarCube;

/// Taper applied before an FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowSpec {
    Rectangular,
    #[default]
    Hann,
}

impl WindowSpec {
    /// Symmetric window of length `n`.
    pub fn coefficients<T: Real>(self, n: usize) -> Vec<T> {
        match self {
            Self::Rectangular => vec![T::one(); n],
            Self::Hann if n <= 1 => vec![T::one(); n],
            Self::Hann => (0..n)
                .map(|i| {
                    let x = 2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64;
                    T::lit(0.5 - 0.5 * x.cos())
                })
                .collect(),
        }
    }
}

/// Unnormalised forward DFT of `signal * window`.
pub fn windowed_fft<T: Real>(signal: &[Cplx<T>], window: &[T]) -> Vec<Cplx<T>> {
    let mut buf: Vec<Cplx<T>> = signal.iter().zip(window).map(|(s, w)| s.scale(*w)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Complex range-Doppler data, indexed `(channel, doppler_bin, range_bin)`.
///
/// The Doppler axis is shifted so zero velocity sits at bin `n_doppler / 2`.
#[derive(Debug, Clone)]
pub struct RangeDopplerCube<T: Real> {
    data: Vec<Cplx<T>>,
    n_v: usize,
    n_doppler: usize,
    n_range: usize,
    range_bin_m: f64,
    velocity_bin_mps: f64,
    array: VirtualArray,
}

impl<T: Real> RangeDopplerCube<T> {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_v, self.n_doppler, self.n_range)
    }

    #[inline]
    pub fn get(&self, ch: usize, doppler: usize, range: usize) -> Cplx<T> {
        self.data[(ch * self.n_doppler + doppler) * self.n_range + range]
    }

    pub fn data(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub fn array(&self) -> &VirtualArray {
        &self.array
    }

    pub fn range_axis_m(&self) -> Vec<f64> {
        (0..self.n_range).map(|k| k as f64 * self.range_bin_m).collect()
    }

    /// Radial velocity of each Doppler bin (positive = receding).
    pub fn velocity_axis_mps(&self) -> Vec<f64> {
        let mid = (self.n_doppler / 2) as f64;
        (0..self.n_doppler).map(|d| (d as f64 - mid) * self.velocity_bin_mps).collect()
    }

    pub fn zero_doppler_bin(&self) -> usize {
        self.n_doppler / 2
    }
}

/// Per-channel 2-D FFT keeping the one-sided range spectrum.
pub fn range_doppler<T: Real>(
    cube: &RadarCube<T>,
    range_window: WindowSpec,
    doppler_window: WindowSpec,
) -> RangeDopplerCube<T> {
    let (n_v, n_c, n_s) = cube.shape();
    let n_r = n_s / 2;
    let wr: Vec<T> = range_window.coefficients(n_s);
    let wd: Vec<T> = doppler_window.coefficients(n_c);
    let mut planner = FftPlanner::<T>::new();
    let fft_r = planner.plan_fft_forward(n_s);
    let fft_d = planner.plan_fft_forward(n_c);

    let mut data = vec![Complex::new(T::zero(), T::zero()); n_v * n_c * n_r];
    data.par_chunks_mut(n_c * n_r).enumerate().for_each(|(ch, out)| {
        let mut fast = vec![Complex::new(T::zero(), T::zero()); n_s];
        let mut range_spec = vec![Complex::new(T::zero(), T::zero()); n_c * n_r];
        for chirp in 0..n_c {
            let src = cube.chirp(ch, chirp);
            for ((f, s), w) in fast.iter_mut().zip(src).zip(&wr) {
                *f = s.scale(*w);
            }
            fft_r.process(&mut fast);
            range_spec[chirp * n_r..(chirp + 1) * n_r].copy_from_slice(&fast[..n_r]);
        }
        let mut slow = vec![Complex::new(T::zero(), T::zero()); n_c];
        let shift = n_c - n_c / 2;
        for r in 0..n_r {
            for (chirp, s) in slow.iter_mut().enumerate() {
                *s = range_spec[chirp * n_r + r].scale(wd[chirp]);
            }
            fft_d.process(&mut slow);
            for d in 0..n_c {
                out[d * n_r + r] = slow[(d + shift) % n_c];
            }
        }
    });

    let p = cube.params();
    RangeDopplerCube {
        data,
        n_v,
        n_doppler: n_c,
        n_range: n_r,
        range_bin_m: p.range_bin_m(),
        velocity_bin_mps: p.wavelength() / (2.0 * n_c as f64 * p.chirp_s),
        array: cube.array().clone(),
    }
}

/// Real image indexed `(doppler_bin, range_bin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanImage<T> {
    pub data: Vec<T>,
    pub n_doppler: usize,
    pub n_range: usize,
}

impl<T: Real> MeanImage<T> {
    #[inline]
    pub fn get(&self, doppler: usize, range: usize) -> T {
        self.data[doppler * self.n_range + range]
    }

    pub fn doppler_profile(&self, range: usize) -> Vec<T> {
        (0..self.n_doppler).map(|d| self.get(d, range)).collect()
    }
}

/// Mean over channels of the range-Doppler magnitudes.
pub fn mean_magnitude<T: Real>(rd: &RangeDopplerCube<T>) -> MeanImage<T> {
    let plane = rd.n_doppler * rd.n_range;
    let mut acc = vec![T::zero(); plane];
    for ch in rd.data.chunks(plane) {
        for (a, z) in acc.iter_mut().zip(ch) {
            *a += z.norm();
        }
    }
    let scale = T::one() / T::from_usize_lossy(rd.n_v.max(1));
    acc.iter_mut().for_each(|a| *a *= scale);
    MeanImage { data: acc, n_doppler: rd.n_doppler, n_range: rd.n_range }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerDetection<T> {
    pub bin: usize,
    pub magnitude: T,
}

/// Per range bin, Doppler detections sorted strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerSelection<T> {
    pub per_range: Vec<Vec<DopplerDetection<T>>>,
    pub k: usize,
}

impl<T: Real> DopplerSelection<T> {
    /// Doppler bin used for `range` at 1-based `rank`; ranks beyond the
    /// available detections fall back to the strongest one.
    pub fn bin(&self, range: usize, rank: usize) -> usize {
        let dets = &self.per_range[range];
        dets.get(rank - 1).unwrap_or(&dets[0]).bin
    }

    pub fn n_range(&self) -> usize {
        self.per_range.len()
    }
}

/// Selects up to `k` Doppler bins per range bin.
///
/// Rank 1 is always the arg-max of the Doppler profile; further ranks are the
/// remaining local maxima (prominence-based peak search) by descending
/// magnitude.
pub fn select_doppler_bins<T: Real>(mean: &MeanImage<T>, k: usize) -> Result<DopplerSelection<T>> {
    if k == 0 {
        return Err(Error::Config("doppler selection needs k >= 1".into()));
    }
    let per_range = (0..mean.n_range)
        .map(|r| {
            let profile = mean.doppler_profile(r);
            let mut best = 0;
            for (i, v) in profile.iter().enumerate() {
                if *v > profile[best] {
                    best = i;
                }
            }
            let mut dets = vec![DopplerDetection { bin: best, magnitude: profile[best] }];
            if k > 1 {
                let peaks = find_peaks(&profile, T::zero(), T::neg_infinity());
                let mut others: Vec<DopplerDetection<T>> = peaks
                    .indices
                    .iter()
                    .zip(&peaks.heights)
                    .filter(|(i, _)| **i != best)
                    .map(|(&bin, &magnitude)| DopplerDetection { bin, magnitude })
                    .collect();
                others.sort_by(|a, b| b.magnitude.partial_cmp(&a.magnitude).unwrap().then(a.bin.cmp(&b.bin)));
                dets.extend(others.into_iter().take(k - 1));
            }
            dets
        })
        .collect();
    Ok(DopplerSelection { per_range, k })
}

/// Complex range x channel matrix `S_IF` for one Doppler rank, channels in
/// ascending virtual position.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeChannelMatrix<T> {
    /// Row-major `n_r x n_v`.
    pub data: Vec<Cplx<T>>,
    pub n_r: usize,
    pub n_v: usize,
    /// Virtual array with elements in row order.
    pub array: VirtualArray,
    /// Doppler bin that produced each row.
    pub doppler_bins: Vec<usize>,
    pub rank: usize,
    pub range_bin_m: f64,
}

impl<T: Real> RangeChannelMatrix<T> {
    pub fn row(&self, r: usize) -> &[Cplx<T>] {
        &self.data[r * self.n_v..(r + 1) * self.n_v]
    }

    pub fn positions(&self) -> Vec<f64> {
        self.array.positions()
    }

    pub fn elements(&self) -> &[VirtualElement] {
        self.array.elements()
    }

    /// Column of channel `m` over all range bins.
    pub fn channel(&self, m: usize) -> Vec<Cplx<T>> {
        (0..self.n_r).map(|r| self.data[r * self.n_v + m]).collect()
    }

    pub fn zeros(n_r: usize, array: VirtualArray, range_bin_m: f64) -> Self {
        let n_v = array.n_v();
        Self {
            data: vec![Complex::new(T::zero(), T::zero()); n_r * n_v],
            n_r,
            n_v,
            array,
            doppler_bins: vec![0; n_r],
            rank: 1,
            range_bin_m,
        }
    }
}

/// Row `r` holds every channel at `(sel.bin(r, rank), r)`.
pub fn extract_range_channel<T: Real>(
    rd: &RangeDopplerCube<T>,
    sel: &DopplerSelection<T>,
    rank: usize,
) -> Result<RangeChannelMatrix<T>> {
    if rank == 0 || rank > sel.k {
        return Err(Error::OutOfBounds(format!("rank {rank} outside 1..={}", sel.k)));
    }
    if sel.n_range() != rd.n_range {
        return Err(Error::Shape(format!(
            "selection covers {} range bins, cube has {}",
            sel.n_range(),
            rd.n_range
        )));
    }
    let order = rd.array.sorted_channel_order();
    let doppler_bins: Vec<usize> = (0..rd.n_range).map(|r| sel.bin(r, rank)).collect();
    let mut data = Vec::with_capacity(rd.n_range * rd.n_v);
    for (r, &d) in doppler_bins.iter().enumerate() {
        data.extend(order.iter().map(|&ch| rd.get(ch, d, r)));
    }
    Ok(RangeChannelMatrix {
        data,
        n_r: rd.n_range,
        n_v: rd.n_v,
        array: rd.array.with_element_order(&order)?,
        doppler_bins,
        rank,
        range_bin_m: rd.range_bin_m,
    })
}
