//! Classical direction-of-arrival estimators and the prominence peak finder.

pub mod das;
pub mod eigen;
pub mod music;
pub mod peaks;

pub use das::{das_windowed, Taper};
pub use eigen::{hermitian_eigen, EigenDecomposition};
pub use music::{aic_order, music_row, music_spectrum, smoothed_covariance, MusicOptions};
pub use peaks::{find_peaks, PeakSet};
