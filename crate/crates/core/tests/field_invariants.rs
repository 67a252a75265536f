use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use cavitydtc::field::{bunching, order_parameter, CField, Grid, Spectral};
use num_complex::Complex64;
use proptest::prelude::*;

fn random_state(grid: &Grid, re: &[f64], im: &[f64]) -> CField {
    let psi = re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect();
    CField::from_profile(grid, psi).unwrap()
}

/// Plane-wave amplitudes a_m = Δz/√L Σ_j ψ_j e^{-i k_m z_j}, by direct summation.
fn modes(grid: &Grid, psi: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n_points;
    (0..n)
        .map(|m| {
            let k = 2.0 * PI * m as f64 / grid.length;
            psi.iter()
                .zip(&grid.positions)
                .map(|(p, z)| p * Complex64::from_polar(1.0, -k * z))
                .sum::<Complex64>()
                * (grid.spacing / grid.length.sqrt())
        })
        .collect()
}

fn arb_state(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-1.0..1.0f64, n), prop::collection::vec(-1.0..1.0f64, n))
        .prop_filter("non-zero", |(a, b)| a.iter().chain(b).any(|x| x.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trip_preserves_norm((re, im) in arb_state(64)) {
        let grid = Grid::new(4, 16).unwrap();
        let s = random_state(&grid, &re, &im);
        let spectral = Spectral::new(grid.n_points);
        let mut buf = s.psi.clone();
        let mut scratch = spectral.scratch();
        spectral.forward(&mut buf, &mut scratch);
        let parseval: f64 = buf.iter().map(|a| a.norm_sqr()).sum::<f64>() / grid.n_points as f64 * grid.spacing;
        prop_assert!((parseval - 1.0).abs() < 1e-12);
        spectral.inverse(&mut buf, &mut scratch);
        let back = CField { psi: buf, alpha: s.alpha, time: 0.0 };
        prop_assert!((back.norm(&grid) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theta_and_bunching_from_mode_projections((re, im) in arb_state(64)) {
        let grid = Grid::new(4, 16).unwrap();
        let s = random_state(&grid, &re, &im);
        let a = modes(&grid, &s.psi);
        let n = grid.n_points;
        // cos(kz) couples modes m and m ± K, with K the number of wavelengths
        let kk = grid.n_wavelengths();
        let pair = |shift: usize| -> f64 {
            (0..n).map(|m| (a[m].conj() * a[(m + shift) % n]).re).sum()
        };
        let norm: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        let theta = pair(kk);
        let b = 0.5 * norm + 0.5 * pair(2 * kk);
        prop_assert!((order_parameter(&s, &grid) - theta).abs() < 1e-10);
        prop_assert!((bunching(&s, &grid) - b).abs() < 1e-10);
    }

    #[test]
    fn half_period_translation_is_the_mirror((re, im) in arb_state(64)) {
        let grid = Grid::new(4, 16).unwrap();
        let s = random_state(&grid, &re, &im);
        let t = s.half_period_translated(&grid);
        prop_assert!((order_parameter(&t, &grid) + order_parameter(&s, &grid)).abs() < 1e-14);
        prop_assert!((bunching(&t, &grid) - bunching(&s, &grid)).abs() < 1e-14);
    }

    #[test]
    fn observables_stay_in_range((re, im) in arb_state(64)) {
        let grid = Grid::new(4, 16).unwrap();
        let s = random_state(&grid, &re, &im);
        let theta = order_parameter(&s, &grid);
        let b = bunching(&s, &grid);
        prop_assert!((-1.0..=1.0).contains(&theta));
        prop_assert!((0.0..=1.0).contains(&b));
    }
}

#[test]
fn uniform_state_has_no_order() {
    for cells in [1, 2, 8, 32] {
        let grid = Grid::new(cells, 16).unwrap();
        let s = CField::uniform(&grid);
        assert_abs_diff_eq!(order_parameter(&s, &grid), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bunching(&s, &grid), 0.5, epsilon = 1e-14);
    }
}
