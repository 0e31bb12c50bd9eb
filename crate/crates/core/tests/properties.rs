use num_complex::Complex;
use proptest::prelude::*;
use sparse_radar::doa::music::{aic_order, smoothed_covariance};
use sparse_radar::doa::{find_peaks, hermitian_eigen, music_spectrum};
use sparse_radar::eval::{fuse_doppler_images, match_detections, metrics};
use sparse_radar::features::{covariance, steering_matrix, CovarianceMatrix};
use sparse_radar::geometry::AngleGrid;
use sparse_radar::image::Image;
use sparse_radar::neural::loss::{bce, mse_l1};
use sparse_radar::Cplx;

/// Peaks by direct search: every maximal flat run bounded by strictly lower
/// neighbours, with bases found by scanning out to the nearest strictly
/// higher sample.
fn oracle_peaks(x: &[f64], min_prom: f64) -> Vec<(usize, f64)> {
    let n = x.len();
    let mut out = Vec::new();
    for a in 1..n.saturating_sub(1) {
        if x[a - 1] >= x[a] {
            continue;
        }
        let mut b = a;
        while b + 1 < n && x[b + 1] == x[a] {
            b += 1;
        }
        if b + 1 >= n || x[b + 1] >= x[a] {
            continue;
        }
        let p = (a + b) / 2;
        let h = x[p];
        let left_stop = (0..p).rev().find(|&j| x[j] > h).map_or(0, |j| j + 1);
        let right_stop = (p + 1..n).find(|&j| x[j] > h).map_or(n - 1, |j| j - 1);
        let lmin = x[left_stop..=p].iter().cloned().fold(f64::INFINITY, f64::min);
        let rmin = x[p..=right_stop].iter().cloned().fold(f64::INFINITY, f64::min);
        let prom = h - lmin.max(rmin);
        if prom >= min_prom {
            out.push((p, prom));
        }
    }
    out
}

fn oracle_match(est: &[usize], gt: &[usize], d: usize) -> (u64, u64, u64, u64) {
    let mut dist = vec![vec![usize::MAX; gt.len()]; est.len()];
    for (i, e) in est.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            dist[i][j] = e.abs_diff(*g);
        }
    }
    let tp = (0..gt.len()).filter(|&j| (0..est.len()).any(|i| dist[i][j] <= d)).count() as u64;
    let fp = (0..est.len()).filter(|&i| (0..gt.len()).all(|j| dist[i][j] > d)).count() as u64;
    let tn = u64::from(est.is_empty() && gt.is_empty());
    (tp, fp, gt.len() as u64 - tp, tn)
}

fn cplx_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Cplx<f64>>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex::new(a, b)), len)
}

fn image(n_r: usize, n_t: usize) -> impl Strategy<Value = Image<f64>> {
    prop::collection::vec(0.0f64..1.0, n_r * n_t).prop_map(move |d| Image::from_vec(d, n_r, n_t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn peaks_match_direct_search(x in prop::collection::vec(0i32..6, 0..40), prom in 0.0f64..3.0) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let got = find_peaks(&x, prom, f64::NEG_INFINITY);
        let want = oracle_peaks(&x, prom);
        prop_assert_eq!(&got.indices, &want.iter().map(|p| p.0).collect::<Vec<_>>());
        for (a, b) in got.prominences.iter().zip(&want) {
            prop_assert!((a - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn matching_agrees_with_exhaustive(
        est in prop::collection::vec(0usize..30, 0..6),
        gt in prop::collection::vec(0usize..30, 0..6),
        d in 0usize..6,
    ) {
        let c = match_detections(&est, &gt, d);
        prop_assert_eq!((c.tp, c.fp, c.fn_, c.tn), oracle_match(&est, &gt, d));
    }

    #[test]
    fn true_positives_grow_with_distance(
        est in prop::collection::vec(0usize..30, 0..6),
        gt in prop::collection::vec(0usize..30, 0..6),
        d in 0usize..6,
    ) {
        let a = match_detections(&est, &gt, d);
        let b = match_detections(&est, &gt, d + 1);
        prop_assert!(b.tp >= a.tp);
        prop_assert!(b.fp <= a.fp);
        let r = metrics(&b);
        for v in [r.pd, r.pfa, r.precision].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn covariance_is_normalised_hermitian(x in cplx_vec(2..12)) {
        prop_assume!(x.iter().any(|z| z.norm() > 1e-3));
        let s = covariance(&x);
        prop_assert!((s.frobenius() - 1.0).abs() < 1e-12);
        for i in 0..s.n {
            for j in 0..s.n {
                prop_assert!((s.get(i, j) - s.get(j, i).conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn smoothed_covariance_is_psd(x in cplx_vec(4..20), frac in 0.3f64..1.0) {
        prop_assume!(x.iter().any(|z| z.norm() > 1e-3));
        let l = ((x.len() as f64 * frac).ceil() as usize).clamp(1, x.len());
        let s = smoothed_covariance(&x, l).unwrap();
        let m = &s.matrix;
        for i in 0..l {
            for j in 0..l {
                prop_assert!((m.get(i, j) - m.get(j, i).conj()).norm() < 1e-12);
            }
        }
        let e = hermitian_eigen(&m.data, l).unwrap();
        prop_assert!(e.values.iter().all(|v| *v > -1e-10));
    }

    #[test]
    fn music_ignores_positive_scaling(x in cplx_vec(6..10), c in 0.01f64..100.0, k in 1usize..3) {
        prop_assume!(x.iter().all(|z| z.norm() > 1e-2));
        let n = x.len();
        let s = smoothed_covariance(&x, n - 2).unwrap().matrix;
        let scaled = CovarianceMatrix { data: s.data.iter().map(|z| z * c).collect(), ..s.clone() };
        let pos: Vec<f64> = (0..s.n).map(|i| 0.5 * i as f64).collect();
        let grid = AngleGrid::uniform(64, -1.0, 1.0).unwrap();
        let a = music_spectrum(&s, &pos, 1.0, k, &grid).unwrap();
        let b = music_spectrum(&scaled, &pos, 1.0, k, &grid).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-6 * p.abs().max(1e-3));
        }
        let ea = hermitian_eigen(&s.data, s.n).unwrap();
        let eb = hermitian_eigen(&scaled.data, s.n).unwrap();
        prop_assert_eq!(aic_order(&ea, 4), aic_order(&eb, 4));
    }

    #[test]
    fn steering_mirrors_to_conjugate(x in prop::collection::vec(-0.05f64..0.05, 1..10), n in 2usize..40) {
        let grid = AngleGrid::uniform(n, -1.0, 1.0).unwrap();
        let v = steering_matrix::<f64>(&x, 0.004, &grid, None).unwrap();
        for m in 0..x.len() {
            for j in 0..n {
                prop_assert!((v.get(m, j) - v.get(m, n - 1 - j).conj()).norm() < 1e-9);
                prop_assert!((v.get(m, j).norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fusion_is_a_lattice_join(a in image(3, 5), b in image(3, 5), c in image(3, 5)) {
        let f = |xs: &[Image<f64>]| fuse_doppler_images(xs).unwrap();
        prop_assert_eq!(f(&[a.clone(), a.clone()]), a.clone());
        prop_assert_eq!(f(&[a.clone(), b.clone()]), f(&[b.clone(), a.clone()]));
        let ab = f(&[a.clone(), b.clone()]);
        prop_assert_eq!(f(&[ab.clone(), c.clone()]), f(&[a.clone(), b.clone(), c.clone()]));
        for ((x, y), z) in ab.data.iter().zip(&a.data).zip(&b.data) {
            prop_assert!(x >= y && x >= z);
        }
        let up = Image::from_vec(a.data.iter().map(|v| v + 0.5).collect(), 3, 5).unwrap();
        let fu = f(&[up, b.clone()]);
        prop_assert!(fu.data.iter().zip(&ab.data).all(|(p, q)| p >= q));
    }

    #[test]
    fn losses_are_non_negative(
        p in prop::collection::vec(0.0f64..=1.0, 1..30),
        bits in prop::collection::vec(any::<bool>(), 30),
        alpha in 0.0f64..1.0,
    ) {
        let y: Vec<f64> = p.iter().zip(&bits).map(|(_, b)| f64::from(u8::from(*b))).collect();
        prop_assert!(bce(&p, &y).loss >= 0.0);
        let l = mse_l1(&p, &y, alpha);
        prop_assert!(l.loss >= 0.0);
        let l0 = mse_l1(&p, &y, 0.0);
        let mean_abs = p.iter().map(|v| v.abs()).sum::<f64>() / p.len() as f64;
        prop_assert!((l.loss - l0.loss - alpha * mean_abs).abs() < 1e-12);
    }
}

#[test]
fn sparsity_term_shrinks_outputs() {
    // With y = 0.5 everywhere the L1 weight moves the minimiser of
    // (x - y)^2 + alpha |x| to y - alpha / 2.
    let y = [0.5];
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        let l = mse_l1(&[x], &y, 0.4).loss;
        if l < best.0 {
            best = (l, x);
        }
    }
    assert!((best.1 - 0.3).abs() < 1e-3);
}
