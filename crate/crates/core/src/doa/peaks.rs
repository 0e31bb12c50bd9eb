//! Local-maximum search with topographic prominence, following the
//! plateau and base conventions of the widely used `find_peaks` routine:
//! plateaus report their left-centre index, edges are never peaks, and a
//! peak's base on each side is the lowest sample before a strictly higher
//! one (or the boundary).

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet<T> {
    pub indices: Vec<usize>,
    pub heights: Vec<T>,
    pub prominences: Vec<T>,
}

impl<T: Real> PeakSet<T> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Indices of local maxima; a flat top reports `(left + right) / 2`.
pub fn local_maxima<T: Real>(x: &[T]) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let last = n - 1;
    let mut i = 1;
    while i < last {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < last && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }
    out
}

/// Prominence of the sample at `peak`.
pub fn prominence<T: Real>(x: &[T], peak: usize) -> T {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..=peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peaks with `prominence >= min_prominence` and `height >= min_height`.
pub fn find_peaks<T: Real>(x: &[T], min_prominence: T, min_height: T) -> PeakSet<T> {
    let mut set = PeakSet { indices: Vec::new(), heights: Vec::new(), prominences: Vec::new() };
    for i in local_maxima(x) {
        if x[i] < min_height {
            continue;
        }
        let p = prominence(x, i);
        if p >= min_prominence {
            set.indices.push(i);
            set.heights.push(x[i]);
            set.prominences.push(p);
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_peak() {
        let p = find_peaks(&[0.0, 1.0, 0.0], 0.0, f64::NEG_INFINITY);
        assert_eq!(p.indices, vec![1]);
        assert_eq!(p.prominences, vec![1.0]);
    }

    #[test]
    fn nested_peaks() {
        let p = find_peaks(&[0.0, 3.0, 1.0, 2.0, 0.0], 0.0, f64::NEG_INFINITY);
        assert_eq!(p.indices, vec![1, 3]);
        assert_eq!(p.prominences, vec![3.0, 1.0]);
    }

    #[test]
    fn ramps_and_edges_are_not_peaks() {
        let up: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(find_peaks(&up, 0.0, f64::NEG_INFINITY).is_empty());
        let down: Vec<f64> = up.iter().rev().cloned().collect();
        assert!(find_peaks(&down, 0.0, f64::NEG_INFINITY).is_empty());
        assert!(find_peaks(&[5.0f32], 0.0, 0.0).is_empty());
        assert!(find_peaks::<f32>(&[], 0.0, 0.0).is_empty());
    }

    #[test]
    fn plateau_reports_left_centre() {
        assert_eq!(local_maxima(&[0.0, 2.0, 2.0, 0.0]), vec![1]);
        assert_eq!(local_maxima(&[0.0, 2.0, 2.0, 2.0, 0.0]), vec![2]);
        assert_eq!(local_maxima(&[0.0, 2.0, 2.0, 2.0]), Vec::<usize>::new());
    }

    #[test]
    fn equal_heights_see_through_each_other() {
        let p = find_peaks(&[0.0, 2.0, 1.0, 2.0, 0.0], 0.0, f64::NEG_INFINITY);
        assert_eq!(p.prominences, vec![2.0, 2.0]);
    }

    #[test]
    fn thresholds_filter() {
        let x = [0.0, 0.4, 0.1, 0.9, 0.2, 0.6, 0.55, 0.7, 0.0];
        let p = find_peaks(&x, 0.1, 0.5);
        assert_eq!(p.indices, vec![3, 7]);
    }
}
