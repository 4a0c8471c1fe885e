//! Gaussian KDE of acceleration starts and ranking of its Fourier spectrum.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

pub const KDE_BANDWIDTH_S: f64 = 6.0;

/// One-hour window sampled at 1 Hz.
pub const WINDOW_GRID_LEN: usize = 3600;

/// Kernel contributions beyond this many bandwidths are below f64 resolution.
const KERNEL_SUPPORT: f64 = 10.0;

/// Gaussian KDE of `starts_rel` evaluated at `t = 0, 1, .., grid_len - 1` seconds.
/// Starts are accumulated in ascending order, so input order does not matter.
pub fn kde_density(starts_rel: &[f64], bandwidth_s: f64, grid_len: usize) -> Result<Vec<f64>> {
    if starts_rel.len() < 2 {
        return Err(Error::data(format!(
            "KDE needs at least two starts, got {}",
            starts_rel.len()
        )));
    }
    if !(bandwidth_s > 0.0) {
        return Err(Error::config("KDE bandwidth must be positive"));
    }
    let n = starts_rel.len() as f64;
    let norm = 1.0 / (n * bandwidth_s * (2.0 * PI).sqrt());
    let mut sorted = starts_rel.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut density = vec![0.0; grid_len];
    for &s in &sorted {
        let lo = (s - KERNEL_SUPPORT * bandwidth_s).ceil().max(0.0) as usize;
        let hi = ((s + KERNEL_SUPPORT * bandwidth_s).floor() + 1.0).clamp(0.0, grid_len as f64) as usize;
        for (t, d) in density.iter_mut().enumerate().take(hi).skip(lo) {
            let z = (t as f64 - s) / bandwidth_s;
            *d += (-0.5 * z * z).exp();
        }
    }
    density.iter_mut().for_each(|d| *d *= norm);
    Ok(density)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// The `k` strictly positive frequencies (Hz) with the largest Fourier amplitude,
/// strongest first; ties go to the lower frequency.
///
/// The density is transformed at its own length `n` (1 Hz samples), so the
/// candidates are the bins `j / n` for `j = 1..=n/2`.
///
/// Amplitudes below `1e-9` of the total mass are treated as exactly zero so that
/// round-off on a flat spectrum does not decide the ranking.
pub fn top_fourier_frequencies(density: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::config("number of Fourier frequencies must be at least 1"));
    }
    let n = density.len();
    if n < 2 {
        return Err(Error::data("density needs at least two samples"));
    }
    let mut buf: Vec<Complex<f64>> = density.iter().map(|&d| Complex::new(d, 0.0)).collect();
    forward_fft(n).process(&mut buf);

    let mass: f64 = density.iter().map(|d| d.abs()).sum();
    let floor = 1e-9 * mass;
    let mut ranked: Vec<(usize, f64)> = (1..=n / 2)
        .map(|j| {
            let m = buf[j].norm();
            (j, if m <= floor { 0.0 } else { m })
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(j, _)| j as f64 / n as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_dft_magnitude(x: &[f64], j: usize) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &v) in x.iter().enumerate() {
            let ang = -2.0 * PI * (j * t) as f64 / x.len() as f64;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        re.hypot(im)
    }

    #[test]
    fn coincident_starts_peak() {
        let d = kde_density(&[0.0, 0.0], 6.0, WINDOW_GRID_LEN).unwrap();
        let expected = 1.0 / (6.0 * (2.0 * PI).sqrt());
        assert!((d[0] - expected).abs() < 1e-15);
        assert!((d[0] - 0.06649).abs() < 1e-5);
    }

    #[test]
    fn mirror_symmetry() {
        let d = kde_density(&[100.0, 200.0], 6.0, WINDOW_GRID_LEN).unwrap();
        assert_eq!(d[100], d[200]);
        assert_eq!(d[90], d[210]);
    }

    #[test]
    fn too_few_starts() {
        assert!(kde_density(&[3.0], 6.0, WINDOW_GRID_LEN).is_err());
    }

    #[test]
    fn truncated_kernel_matches_full_sum() {
        let starts = [12.5, 400.0, 401.0, 3590.0];
        let d = kde_density(&starts, 6.0, WINDOW_GRID_LEN).unwrap();
        let norm = 1.0 / (4.0 * 6.0 * (2.0 * PI).sqrt());
        for t in [0usize, 13, 70, 400, 1000, 3599] {
            let full: f64 = starts
                .iter()
                .map(|s| (-0.5 * ((t as f64 - s) / 6.0).powi(2)).exp())
                .sum::<f64>()
                * norm;
            assert!((d[t] - full).abs() < 1e-18, "t = {t}");
        }
    }

    #[test]
    fn impulse_train_period_recovered_against_brute_dft() {
        let n = WINDOW_GRID_LEN;
        for period in [60.0, 75.0, 90.0, 100.0, 110.0, 120.0] {
            let starts: Vec<f64> = (0..).map(|i| i as f64 * period).take_while(|&s| s < n as f64).collect();
            let d = kde_density(&starts, 6.0, n).unwrap();
            let top = top_fourier_frequencies(&d, 1).unwrap()[0];
            assert!((top - 1.0 / period).abs() < 1.3e-4, "period {period}: {top}");
            // Oracle: argmax of a directly evaluated DFT over the positive bins.
            let best = (1..=n / 2)
                .max_by(|&a, &b| brute_dft_magnitude(&d, a).total_cmp(&brute_dft_magnitude(&d, b)).then(b.cmp(&a)))
                .unwrap();
            assert_eq!(top, best as f64 / n as f64, "period {period}");
        }
    }

    #[test]
    fn flat_spectrum_falls_back_to_lowest_bins() {
        let flat = vec![0.25; WINDOW_GRID_LEN];
        let top = top_fourier_frequencies(&flat, 3).unwrap();
        assert_eq!(top, vec![1.0 / 3600.0, 2.0 / 3600.0, 3.0 / 3600.0]);
    }

    #[test]
    fn ranking_is_by_magnitude() {
        let n = WINDOW_GRID_LEN;
        let x: Vec<f64> = (0..n)
            .map(|t| {
                let t = t as f64;
                1.0 + 0.5 * (2.0 * PI * 64.3 * t / 3600.0).cos() + 0.2 * (2.0 * PI * 200.0 * t / 3600.0).cos()
            })
            .collect();
        let top = top_fourier_frequencies(&x, 5).unwrap();
        let mut mags: Vec<(usize, f64)> = (1..=n / 2).map(|j| (j, brute_dft_magnitude(&x, j))).collect();
        mags.sort_by(|a, b| b.1.total_cmp(&a.1));
        let want: Vec<f64> = mags[..5].iter().map(|(j, _)| *j as f64 / 3600.0).collect();
        assert_eq!(top, want);
    }

    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mass_is_conserved_away_from_edges(starts in prop::collection::vec(50.0f64..=3550.0, 2..300)) {
            let mass: f64 = kde_density(&starts, KDE_BANDWIDTH_S, WINDOW_GRID_LEN).unwrap().iter().sum();
            // The exact sum is 1 - 1.5e-23; allow for summation rounding only.
            prop_assert!((0.97..=1.0 + 1e-12).contains(&mass), "mass {mass}");
        }

        #[test]
        fn start_order_does_not_matter(
            starts in prop::collection::vec(0.0f64..3600.0, 2..120),
            seed in any::<u64>(),
        ) {
            let mut shuffled = starts.clone();
            shuffled.shuffle(&mut crate::rng::rng_from(seed));
            let a = kde_density(&starts, KDE_BANDWIDTH_S, WINDOW_GRID_LEN).unwrap();
            let b = kde_density(&shuffled, KDE_BANDWIDTH_S, WINDOW_GRID_LEN).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(top_fourier_frequencies(&a, 30).unwrap(), top_fourier_frequencies(&b, 30).unwrap());
        }
    }
}
