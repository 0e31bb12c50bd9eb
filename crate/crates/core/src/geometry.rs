//! Radar parameters, MIMO virtual arrays, sparse thinning and angle grids.
//!
//! All geometry is one-dimensional along the array axis (`x`); targets live in
//! the `(x, y)` plane with `y` pointing along boresight. The azimuth sine `u`
//! of a point is measured positive toward the `-x` side of the array, i.e.
//! `x = -r * u`. With that convention the steering phase `exp(-j 2 pi/lambda u x)`
//! is matched to the received wavefront, so beamforming peaks at the target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Element pitch of the full MIMO virtual array in wavelengths.
pub const VIRTUAL_PITCH_WAVELENGTHS: f64 = 0.58;

/// RX indices kept by the 6-RX sparse configuration.
pub const SPARSE6_RX: [usize; 6] = [0, 2, 5, 9, 13, 15];
/// RX indices kept by the 4-RX sparse configuration.
pub const SPARSE4_RX: [usize; 4] = [0, 4, 11, 15];

/// Number of RX elements of the enhanced ground-truth array.
pub const ENHANCED_RX: usize = 256;

/// FMCW waveform and array constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_chirp: usize,
    pub chirp_s: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub d_tx_m: f64,
    pub d_rx_m: f64,
    /// Fast-time samples per chirp.
    pub n_samples: usize,
}

impl Default for RadarParams {
    fn default() -> Self {
        let carrier_hz = 77e9;
        let lambda = SPEED_OF_LIGHT / carrier_hz;
        let pitch = VIRTUAL_PITCH_WAVELENGTHS * lambda;
        Self {
            carrier_hz,
            bandwidth_hz: 1e9,
            n_chirp: 128,
            chirp_s: 80.6e-6,
            n_tx: 3,
            n_rx: 16,
            d_tx_m: pitch,
            d_rx_m: 3.0 * pitch,
            n_samples: 1260,
        }
    }
}

impl RadarParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Chirp rate `B / T_c` in Hz/s.
    pub fn chirp_rate(&self) -> f64 {
        self.bandwidth_hz / self.chirp_s
    }

    /// Range covered by one bin of the fast-time FFT, `c / 2B`.
    pub fn range_bin_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    /// Bins kept after one-sided range spectrum selection.
    pub fn n_range_bins(&self) -> usize {
        self.n_samples / 2
    }

    pub fn max_range_m(&self) -> f64 {
        self.n_range_bins() as f64 * self.range_bin_m()
    }

    /// Unambiguous radial velocity `lambda / (4 T_c)`.
    pub fn max_velocity_mps(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_s)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("chirp_s", self.chirp_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("n_chirp", self.n_chirp),
            ("n_tx", self.n_tx),
            ("n_rx", self.n_rx),
            ("n_samples", self.n_samples),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.d_tx_m.is_finite() && self.d_rx_m.is_finite()) {
            return Err(Error::Config("element spacings must be finite".into()));
        }
        Ok(())
    }
}

/// One channel of the virtual array: the TX/RX pair and its phase-centre
/// coordinate `x_tx + x_rx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualElement {
    pub position_m: f64,
    pub tx: usize,
    pub rx: usize,
}

/// Ordered 1-D virtual array built from TX and RX placements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArrayConfig", into = "ArrayConfig")]
pub struct VirtualArray {
    tx_positions_m: Vec<f64>,
    rx_positions_m: Vec<f64>,
    kept_rx: Vec<usize>,
    elements: Vec<VirtualElement>,
}

/// On-disk description of an array configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub tx_positions_m: Vec<f64>,
    pub rx_positions_m: Vec<f64>,
    pub kept_rx: Vec<usize>,
}

impl TryFrom<ArrayConfig> for VirtualArray {
    type Error = Error;

    fn try_from(cfg: ArrayConfig) -> Result<Self> {
        let full = build_virtual_array(&cfg.tx_positions_m, &cfg.rx_positions_m)?;
        thin_array(&full, &cfg.kept_rx)
    }
}

impl From<VirtualArray> for ArrayConfig {
    fn from(a: VirtualArray) -> Self {
        Self {
            tx_positions_m: a.tx_positions_m,
            rx_positions_m: a.rx_positions_m,
            kept_rx: a.kept_rx,
        }
    }
}

impl VirtualArray {
    /// Builds an array whose channel storage order is given explicitly.
    ///
    /// Used to model radar cubes that store channels in hardware order; the
    /// extraction stage re-sorts channels by position.
    pub fn with_element_order(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.elements.len() {
            return Err(Error::Shape(format!(
                "permutation has {} entries for {} elements",
                order.len(),
                self.elements.len()
            )));
        }
        let mut seen = vec![false; order.len()];
        for &i in order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidGeometry("element order is not a permutation".into()));
            }
        }
        let mut out = self.clone();
        out.elements = order.iter().map(|&i| self.elements[i]).collect();
        Ok(out)
    }

    pub fn elements(&self) -> &[VirtualElement] {
        &self.elements
    }

    pub fn positions(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.position_m).collect()
    }

    pub fn n_v(&self) -> usize {
        self.elements.len()
    }

    pub fn tx_positions_m(&self) -> &[f64] {
        &self.tx_positions_m
    }

    pub fn rx_positions_m(&self) -> &[f64] {
        &self.rx_positions_m
    }

    pub fn kept_rx(&self) -> &[usize] {
        &self.kept_rx
    }

    /// Distance between the outermost virtual elements.
    pub fn extent_m(&self) -> f64 {
        let p = self.positions();
        let lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Indices that order the stored channels by ascending position, ties
    /// broken by (tx, rx) so the order does not depend on storage order.
    pub fn sorted_channel_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.elements.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ea, eb) = (&self.elements[a], &self.elements[b]);
            ea.position_m
                .total_cmp(&eb.position_m)
                .then(ea.tx.cmp(&eb.tx))
                .then(ea.rx.cmp(&eb.rx))
        });
        idx
    }

    /// Physical TX and RX coordinates of channel `m` as points on the x axis.
    pub fn channel_antennas(&self, m: usize) -> ([f64; 2], [f64; 2]) {
        let e = &self.elements[m];
        ([self.tx_positions_m[e.tx], 0.0], [self.rx_positions_m[e.rx], 0.0])
    }
}

fn check_coordinates(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidGeometry(format!("{name} list is empty")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGeometry(format!("{name} contains a non-finite coordinate")));
    }
    Ok(())
}

fn assemble(tx: &[f64], rx: &[f64], kept_rx: Vec<usize>) -> VirtualArray {
    let mut elements: Vec<VirtualElement> = (0..tx.len())
        .flat_map(|t| {
            kept_rx.iter().map(move |&r| (t, r))
        })
        .map(|(t, r)| VirtualElement { position_m: tx[t] + rx[r], tx: t, rx: r })
        .collect();
    elements.sort_by(|a, b| {
        a.position_m
            .total_cmp(&b.position_m)
            .then(a.tx.cmp(&b.tx))
            .then(a.rx.cmp(&b.rx))
    });
    VirtualArray {
        tx_positions_m: tx.to_vec(),
        rx_positions_m: rx.to_vec(),
        kept_rx,
        elements,
    }
}

/// All pairwise sums `tx_i + rx_j`, sorted; coincident positions stay
/// separate channels.
pub fn build_virtual_array(tx_positions: &[f64], rx_positions: &[f64]) -> Result<VirtualArray> {
    check_coordinates("tx", tx_positions)?;
    check_coordinates("rx", rx_positions)?;
    Ok(assemble(tx_positions, rx_positions, (0..rx_positions.len()).collect()))
}

/// Rebuilds the virtual array keeping only the RX elements in `keep_rx`.
pub fn thin_array(array: &VirtualArray, keep_rx: &[usize]) -> Result<VirtualArray> {
    if keep_rx.is_empty() {
        return Err(Error::InvalidGeometry("keep set is empty".into()));
    }
    let n_rx = array.rx_positions_m.len();
    if let Some(&bad) = keep_rx.iter().find(|&&r| r >= n_rx) {
        return Err(Error::InvalidGeometry(format!("rx index {bad} out of range 0..{n_rx}")));
    }
    let mut keep = keep_rx.to_vec();
    keep.sort_unstable();
    keep.dedup();
    Ok(assemble(&array.tx_positions_m, &array.rx_positions_m, keep))
}

/// 3-dB beamwidth `51.05 lambda / D` in degrees.
pub fn resolution_3db<T: Real>(aperture_length: T, lambda: T) -> Result<T> {
    if !(aperture_length > T::zero()) || !aperture_length.is_finite() {
        return Err(Error::Domain(format!("aperture length must be positive, got {aperture_length}")));
    }
    Ok(T::lit(51.05) * lambda / aperture_length)
}

/// Named array layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayKind {
    /// 3 TX x 16 RX, 48 virtual elements.
    Full,
    /// Six retained RX, 18 virtual elements.
    Sparse6,
    /// Four retained RX, 12 virtual elements.
    Sparse4,
    /// 1 TX x 256 RX half-wavelength ULA used for ground truth.
    Enhanced,
}

impl std::str::FromStr for ArrayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "fig4a" => Ok(Self::Full),
            "sparse6" | "fig4b" => Ok(Self::Sparse6),
            "sparse4" | "fig4c" => Ok(Self::Sparse4),
            "enhanced" | "gt" => Ok(Self::Enhanced),
            other => Err(Error::Config(format!("unknown array `{other}`"))),
        }
    }
}

impl ArrayKind {
    pub fn build(self, params: &RadarParams) -> Result<VirtualArray> {
        match self {
            Self::Full => mimo_array(params),
            Self::Sparse6 => thin_array(&mimo_array(params)?, &SPARSE6_RX),
            Self::Sparse4 => thin_array(&mimo_array(params)?, &SPARSE4_RX),
            Self::Enhanced => enhanced_ula(params, ENHANCED_RX),
        }
    }
}

fn centered(n: usize, pitch: f64) -> Vec<f64> {
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n).map(|i| (i as f64 - mid) * pitch).collect()
}

/// Full MIMO array from `params`, centred so the virtual array is symmetric
/// about `x = 0`.
pub fn mimo_array(params: &RadarParams) -> Result<VirtualArray> {
    params.validate()?;
    build_virtual_array(&centered(params.n_tx, params.d_tx_m), &centered(params.n_rx, params.d_rx_m))
}

/// Single TX at the centre of an `n_rx`-element half-wavelength RX line.
pub fn enhanced_ula(params: &RadarParams, n_rx: usize) -> Result<VirtualArray> {
    params.validate()?;
    if n_rx == 0 {
        return Err(Error::InvalidGeometry("enhanced array needs at least one RX".into()));
    }
    build_virtual_array(&[0.0], &centered(n_rx, params.wavelength() / 2.0))
}

/// Uniform grid of azimuth sines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AngleGrid {
    u: Vec<f64>,
}

impl TryFrom<Vec<f64>> for AngleGrid {
    type Error = Error;

    fn try_from(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::Config("angle grid is empty".into()));
        }
        if u.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::Config("angle grid values must lie in [-1, 1]".into()));
        }
        if u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("angle grid must be strictly increasing".into()));
        }
        Ok(Self { u })
    }
}

impl From<AngleGrid> for Vec<f64> {
    fn from(g: AngleGrid) -> Self {
        g.u
    }
}

impl Default for AngleGrid {
    /// 450 samples spanning the whole visible region.
    fn default() -> Self {
        Self::uniform(450, -1.0, 1.0).expect("default grid is valid")
    }
}

impl AngleGrid {
    pub fn uniform(n: usize, u_min: f64, u_max: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("angle grid needs at least one bin".into()));
        }
        if n == 1 {
            return Self::try_from(vec![0.5 * (u_min + u_max)]);
        }
        if !(u_max > u_min) {
            return Err(Error::Config(format!("angle grid bounds inverted: [{u_min}, {u_max}]")));
        }
        let step = (u_max - u_min) / (n - 1) as f64;
        Self::try_from((0..n).map(|i| u_min + step * i as f64).collect::<Vec<_>>())
    }

    /// `len` consecutive bins starting at `start`.
    pub fn crop(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.u.len() {
            return Err(Error::OutOfBounds(format!(
                "crop {start}..{} of a {}-bin grid",
                start + len,
                self.u.len()
            )));
        }
        Ok(Self { u: self.u[start..start + len].to_vec() })
    }

    /// Centred crop of `len` bins.
    pub fn center_crop(&self, len: usize) -> Result<Self> {
        let start = self.u.len().saturating_sub(len) / 2;
        self.crop(start, len)
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        if self.u.len() < 2 {
            0.0
        } else {
            (self.u[self.u.len() - 1] - self.u[0]) / (self.u.len() - 1) as f64
        }
    }

    /// Index of the grid value closest to `u`.
    pub fn nearest(&self, u: f64) -> usize {
        let mut best = 0;
        for (i, v) in self.u.iter().enumerate() {
            if (v - u).abs() < (self.u[best] - u).abs() {
                best = i;
            }
        }
        best
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.u.iter().map(|u| u.asin().to_degrees()).collect()
    }
}

/// Range x azimuth-sine pixel grid for back-projection imaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub ranges_m: Vec<f64>,
    pub angles: AngleGrid,
}

impl ImageGrid {
    /// Pixel rows at the centres of range bins `first..first + n` of `params`.
    pub fn from_range_bins(params: &RadarParams, first: usize, n: usize, angles: AngleGrid) -> Self {
        let dr = params.range_bin_m();
        Self { ranges_m: (first..first + n).map(|k| k as f64 * dr).collect(), angles }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ranges_m.len(), self.angles.len())
    }
}

/// Cartesian position of a point at slant range `r` and azimuth sine `u`.
pub fn position_from_polar(range_m: f64, u: f64) -> [f64; 2] {
    [-range_m * u, range_m * (1.0 - u * u).max(0.0).sqrt()]
}

/// Slant range and azimuth sine of a point, as seen from the array origin.
pub fn polar_from_position(p: [f64; 2]) -> (f64, f64) {
    let r = p[0].hypot(p[1]);
    if r == 0.0 {
        (0.0, 0.0)
    } else {
        (r, -p[0] / r)
    }
}
