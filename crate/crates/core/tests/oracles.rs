mod common;

use std::f64::consts::PI;

use common::*;
use maglat_core::bands::BandEngine;
use maglat_core::*;

fn grid_outside_windows(count: usize, lo: f64, hi: f64, margin: f64) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / count as f64)
        .filter(|&k| distance_to_singular(k) > margin)
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn q2_matches_closed_form() {
    let engine = BandEngine::new(make_flux(1, 2).unwrap());
    let ks = grid_outside_windows(1000, 0.0, 20.0, bands::EXCLUSION_HALF_WIDTH);
    assert_eq!(ks.len(), 1000);
    for k in ks {
        let got = engine.band_function(SpectralParameter::positive(k).unwrap()).unwrap();
        let want = theta_star_q2(k);
        assert!(rel_err(got.theta_star, want) < 1e-8, "k={k}: {} vs {want}", got.theta_star);
    }
}

#[test]
fn q3_matches_closed_form_for_both_p() {
    for p in [1, 2] {
        let engine = BandEngine::new(make_flux(p as i64, 3).unwrap());
        for k in grid_outside_windows(1000, 0.0, 20.0, bands::EXCLUSION_HALF_WIDTH) {
            let got = engine.band_function(SpectralParameter::positive(k).unwrap()).unwrap();
            let want = theta_star_q3(k, p);
            assert!(rel_err(got.theta_star, want) < 1e-8, "p={p} k={k}: {} vs {want}", got.theta_star);
        }
    }
}

#[test]
fn large_theta_star_near_a_singular_point() {
    // k = 18.85 lies 4.4e-4 above 6π; references from a 50-digit evaluation
    // of the q = 3 closed form
    let k = SpectralParameter::positive(18.85).unwrap();
    for (p, want) in [(1, 36254488.73536524), (2, -35215368.72507599)] {
        let engine = BandEngine::new(make_flux(p, 3).unwrap());
        let got = engine.band_function(k).unwrap().theta_star;
        assert!(rel_err(got, want) < 1e-9, "p={p}: {got} vs {want}");
        let coarse = engine.band_function_unrefined(k).unwrap().theta_star;
        assert!(rel_err(coarse, want) < 1e-6, "p={p}: {coarse}");
        assert!(coarse.signum() == want.signum());
    }
}

#[test]
fn documented_single_points() {
    let s = band_function(SpectralParameter::positive(2.0).unwrap(), make_flux(1, 2).unwrap()).unwrap();
    assert!(rel_err(s.theta_star, theta_star_q2(2.0)) < 1e-8);
    let s = band_function(SpectralParameter::positive(2.5).unwrap(), make_flux(1, 3).unwrap()).unwrap();
    assert!(rel_err(s.theta_star, theta_star_q3(2.5, 1)) < 1e-8);
}

#[test]
fn q2_diverges_towards_k_equal_one() {
    let engine = BandEngine::new(make_flux(1, 2).unwrap());
    let mut last = 0.0;
    for d in [1e-2, 1e-3, 1e-4, 1e-5] {
        let lo = engine.band_function(SpectralParameter::positive(1.0 - d).unwrap()).unwrap();
        let hi = engine.band_function(SpectralParameter::positive(1.0 + d).unwrap()).unwrap();
        let m = lo.theta_star.abs().min(hi.theta_star.abs());
        assert!(m > last, "|Θ*| should grow as k → 1");
        last = m;
    }
    assert!(last > 1e9);
}

#[test]
fn negative_regime_is_imaginary_momentum() {
    // q = 2 closed form continued to k = iκ stays real
    let engine = BandEngine::new(make_flux(1, 2).unwrap());
    for kappa in [0.3, 1.0, 1.7, 2.5, 4.0] {
        let got = engine.band_function(SpectralParameter::negative(kappa).unwrap()).unwrap();
        let k = num_complex::Complex64::new(0.0, kappa);
        let k2 = k * k;
        let num = -4.0 * k2 + (k2 - 1.0).powi(2) * (2.0 * k).cos() - (k2 + 1.0).powi(2) * (4.0 * k).cos();
        let s = ((k2 - 1.0) * k.sin()).powi(2);
        let want = num / s;
        assert!(want.im.abs() < 1e-12 * want.norm());
        assert!(rel_err(got.theta_star, want.re) < 1e-8, "κ={kappa}");
    }
}

/// Roots of `h + 2s = 0` for q = 2, i.e. the zero set of the fiber
/// determinant at θ = (0, 0).
fn q2_upper_roots(a: f64, b: f64) -> Vec<f64> {
    let f = |k: f64| n2(k) - 2.0 * s_factor(k, 2);
    roots(f, a, b, 200_000, 1e-14)
}

#[test]
fn q2_zero_set_matches_closed_form() {
    let flux = make_flux(1, 2).unwrap();
    let engine = BandEngine::new(flux);
    let oracle = q2_upper_roots(1e-3, 20.0);
    assert!(oracle.len() > 10);

    // Θ*(k) = 2 located independently through the engine
    let gap = |k: f64| {
        if distance_to_singular(k) < 1e-6 {
            return f64::NAN;
        }
        engine
            .band_function(SpectralParameter::positive(k).unwrap())
            .map(|s| s.theta_star - 2.0)
            .unwrap_or(f64::NAN)
    };
    let h = 1e-4;
    let mut found = Vec::new();
    let mut x0 = 1e-3;
    let mut g0 = gap(x0);
    while x0 < 20.0 {
        let x1 = x0 + h;
        let g1 = gap(x1);
        if g0.is_finite() && g1.is_finite() && g0 * g1 < 0.0 && g0.abs() < 1e3 && g1.abs() < 1e3 {
            found.push(bisect(gap, x0, x1, 1e-13));
        }
        x0 = x1;
        g0 = g1;
    }
    assert_eq!(found.len(), oracle.len(), "engine {found:?}\noracle {oracle:?}");
    for (a, b) in found.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        // the matrix itself is singular there
        let lu = assemble(
            SpectralParameter::positive(*b).unwrap(),
            Quasimomentum::upper_extremal(),
            flux,
        )
        .lu()
        .unwrap();
        assert!(lu.is_rank_deficient(1e-10), "k={b}: pivot ratio {}", lu.pivot_ratio());
    }
}

#[test]
fn assembled_matrix_regular_away_from_roots() {
    let flux = make_flux(1, 2).unwrap();
    let lu = assemble(SpectralParameter::positive(2.0).unwrap(), Quasimomentum::upper_extremal(), flux)
        .lu()
        .unwrap();
    assert!(lu.log_det.log_magnitude.is_finite());
    assert!(!lu.is_rank_deficient(1e-10));
    let k = q2_upper_roots(1e-3, 20.0)[0];
    for off in [-1e-3, 1e-3] {
        let lu = assemble(SpectralParameter::positive(k + off).unwrap(), Quasimomentum::upper_extremal(), flux)
            .lu()
            .unwrap();
        assert!(!lu.is_rank_deficient(1e-10));
    }
}

#[test]
fn refine_edge_matches_closed_form_bisection() {
    let flux = make_flux(1, 2).unwrap();
    // first positive band edge: |Θ*| crosses 2 for the first time
    let g = |k: f64| theta_star_q2(k).abs() - 2.0;
    let mut k = 0.01;
    while g(k) * g(k + 1e-3) > 0.0 {
        k += 1e-3;
    }
    let bracket = (k, k + 1e-3);
    let oracle = bisect(g, bracket.0, bracket.1, 1e-14);
    let edge = refine_edge(bracket, flux, Regime::Positive, 1e-12).unwrap();
    assert!((edge - oracle).abs() < 1e-8, "{edge} vs {oracle}");

    let reversed = refine_edge((bracket.1, bracket.0), flux, Regime::Positive, 1e-12).unwrap();
    assert_eq!(edge, reversed);

    let engine = BandEngine::new(flux);
    for tol in [1e-6, 1e-7, 1e-8] {
        let (lo, hi) = engine.bisect(bracket, Regime::Positive, tol).unwrap();
        assert!(hi - lo <= tol);
        assert!(hi - lo > tol / 4.0);
        assert!(lo <= oracle + 1e-12 && oracle <= hi + 1e-12);
    }
}

#[test]
fn narrow_band_next_to_k_equal_one_for_q11() {
    // 4/11 has a genuine band within 5·10⁻⁴ of k = 1 (value checked in
    // 80-digit arithmetic), while |Θ*| still diverges at k = 1 itself
    let engine = BandEngine::new(make_flux(4, 11).unwrap());
    let s = engine.band_function(SpectralParameter::positive(0.9995).unwrap()).unwrap();
    assert!((s.theta_star - 147.806_607_199_236).abs() < 1e-6 * 147.8);
    let s = engine.band_function(SpectralParameter::positive(0.9999).unwrap()).unwrap();
    assert!(s.theta_star < -1e12);
}

#[test]
fn no_flat_bands_at_singular_points() {
    let mut fluxes = coprime_fluxes(12);
    fluxes.sort_by_key(|f| (f.q(), f.p()));
    for flux in fluxes {
        let engine = BandEngine::new(flux);
        let mut centres = vec![1.0];
        centres.extend((1..=30).map(|n| n as f64 * PI));
        for c in centres {
            // the scanner's flank probes sit at 2ε; 10⁻⁴ is a looser check
            let flank = 2.0 * bands::EXCLUSION_HALF_WIDTH;
            for side in [-flank, flank, -1e-4, 1e-4] {
                let z = SpectralParameter::positive(c + side).unwrap();
                match engine.band_function(z) {
                    Ok(s) => assert!(s.theta_star.abs() > 1e3, "{flux} at {}: {}", c + side, s.theta_star),
                    // a singular ring means d₊ ≈ d₋, i.e. |Θ*| beyond 10¹²
                    Err(Error::SingularRing { .. }) => {}
                    Err(e) => panic!("{flux} at {}: {e}", c + side),
                }
            }
        }
    }
}
