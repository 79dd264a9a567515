//! Derived spectral quantities: measure of the spectrum per momentum period,
//! narrow-band statistics, the high-energy profile, Thouless reference values
//! and the star-graph negative eigenvalues.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bands::{Band, BandEngine, BandSet, ScanConfig};
use crate::error::{Error, Result};
use crate::fiber::{Regime, SpectralParameter};
use crate::model::FluxRatio;

/// Catalan's constant to 20 significant digits.
pub const CATALAN: f64 = 0.915_965_594_177_219_015_05;

/// Bands narrower than `NARROW_BAND_MARGIN / n` in `k` are non-butterfly.
pub const NARROW_BAND_MARGIN: f64 = 5.0;

/// Spectral measure of one flux at high energies.
///
/// `window_measure` is the normalized band length on `(nπ, (n+1)π)` and
/// `window_measure_doubled` the same on `(2nπ, (2n+1)π)`. Both carry an
/// `O(1/n)` bias (narrow bands and gaps opening at touching points), which
/// the Richardson combination `p_sigma = 2·m(2n) − m(n)` removes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub flux: FluxRatio,
    pub n: u32,
    pub p_sigma: f64,
    pub window_measure: f64,
    pub window_measure_doubled: f64,
    pub thouless_ref: f64,
    pub band_count_in_window: usize,
}

fn period_window(engine: &BandEngine, n: u32, cfg: &ScanConfig) -> Result<BandSet> {
    let lo = n as f64 * PI;
    engine.scan_window(Regime::Positive, lo, lo + PI, cfg)
}

/// Normalized band measure on the momentum period `(nπ, (n+1)π)`.
pub fn window_measure(flux: FluxRatio, n: u32, cfg: &ScanConfig) -> Result<(f64, usize)> {
    if n == 0 {
        return Err(Error::InvalidParameter("period index must be >= 1".into()));
    }
    let set = period_window(&BandEngine::new(flux), n, cfg)?;
    Ok((set.parameter_measure() / PI, set.len()))
}

pub fn probability_sigma(flux: FluxRatio, n: u32, cfg: &ScanConfig) -> Result<MeasureReport> {
    let (m1, count) = window_measure(flux, n, cfg)?;
    let (m2, _) = window_measure(flux, 2 * n, cfg)?;
    Ok(MeasureReport {
        flux,
        n,
        p_sigma: (2.0 * m2 - m1).clamp(0.0, 1.0),
        window_measure: m1,
        window_measure_doubled: m2,
        thouless_ref: thouless_reference(flux.q()),
        band_count_in_window: count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandSpecies {
    Butterfly,
    NonButterfly,
}

pub fn classify(band: &Band, n: u32) -> BandSpecies {
    if band.width() < NARROW_BAND_MARGIN / n as f64 {
        BandSpecies::NonButterfly
    } else {
        BandSpecies::Butterfly
    }
}

/// Narrow bands around `k = nπ`, widths and gaps on the energy scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrowBandReport {
    pub flux: FluxRatio,
    pub n: u32,
    /// Momentum intervals, ascending.
    pub bands: Vec<(f64, f64)>,
    pub widths: Vec<f64>,
    pub gaps: Vec<f64>,
}

pub fn narrow_band_stats(flux: FluxRatio, n: u32, cfg: &ScanConfig) -> Result<NarrowBandReport> {
    if n < 20 {
        return Err(Error::InvalidParameter(format!(
            "narrow-band statistics need n >= 20, got {n}"
        )));
    }
    let centre = n as f64 * PI;
    let set = BandEngine::new(flux).scan_window(Regime::Positive, centre - 0.5, centre + 0.5, cfg)?;
    let bands: Vec<(f64, f64)> = set.by_parameter().iter().map(|b| (b.z_lo, b.z_hi)).collect();
    if bands.is_empty() {
        return Err(Error::NoNarrowBands { n });
    }
    let widths = bands.iter().map(|&(a, b)| b * b - a * a).collect();
    let gaps = bands
        .windows(2)
        .map(|w| w[1].0 * w[1].0 - w[0].1 * w[0].1)
        .collect();
    Ok(NarrowBandReport {
        flux,
        n,
        bands,
        widths,
        gaps,
    })
}

/// Split of the window measure into bands inside the non-magnetic bands
/// (butterfly) and inside the non-magnetic gaps (non-butterfly), both as
/// lengths in `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesMeasure {
    pub butterfly: f64,
    pub non_butterfly: f64,
}

pub fn species_measure(flux: FluxRatio, n: u32, cfg: &ScanConfig) -> Result<SpeciesMeasure> {
    let magnetic = period_window(&BandEngine::new(flux), n, cfg)?;
    let baseline = period_window(&BandEngine::new(FluxRatio::baseline()), n, cfg)?;
    let base: Vec<(f64, f64)> = baseline.by_parameter().iter().map(|b| (b.z_lo, b.z_hi)).collect();
    let mut inside = 0.0;
    let mut total = 0.0;
    for b in magnetic.by_parameter() {
        total += b.width();
        for &(lo, hi) in &base {
            inside += (b.z_hi.min(hi) - b.z_lo.max(lo)).max(0.0);
        }
    }
    Ok(SpeciesMeasure {
        butterfly: inside,
        non_butterfly: total - inside,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    /// `k − nπ`, in `(0, π)`.
    pub phase: f64,
    pub theta_star: f64,
    pub member: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticProfile {
    pub flux: FluxRatio,
    pub n: u32,
    pub samples: Vec<ProfileSample>,
}

impl AsymptoticProfile {
    /// Fraction of samples in the spectrum.
    pub fn member_fraction(&self) -> f64 {
        let m = self.samples.iter().filter(|s| s.member).count();
        m as f64 / self.samples.len().max(1) as f64
    }
}

/// Smallest period index accepted by the asymptotic profile.
pub const MIN_PROFILE_INDEX: u32 = 50;

/// `Θ*(nπ + φ)` on the midpoint grid of `φ ∈ (0, π)` with `⌈π·density⌉`
/// points. Samples on a singular ring are dropped.
pub fn asymptotic_band_profile(flux: FluxRatio, n: u32, grid_density: f64) -> Result<AsymptoticProfile> {
    if !(grid_density > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "profile grid density must be positive, got {grid_density}"
        )));
    }
    let count = (PI * grid_density).ceil() as usize;
    let phases: Vec<f64> = (0..count).map(|j| (j as f64 + 0.5) * PI / count as f64).collect();
    asymptotic_profile_at(flux, n, &phases)
}

/// Profile at caller-chosen phases `φ ∈ (0, π)`.
pub fn asymptotic_profile_at(flux: FluxRatio, n: u32, phases: &[f64]) -> Result<AsymptoticProfile> {
    use rayon::prelude::*;
    if n < MIN_PROFILE_INDEX {
        return Err(Error::InvalidParameter(format!(
            "asymptotic profile needs n >= {MIN_PROFILE_INDEX}, got {n}"
        )));
    }
    let engine = BandEngine::new(flux);
    let base = n as f64 * PI;
    let samples = phases
        .par_iter()
        .map(|&phase| {
            let z = SpectralParameter::positive(base + phase)?;
            match engine.band_function_unrefined(z) {
                Ok(s) => Ok(Some(ProfileSample {
                    phase,
                    theta_star: s.theta_star,
                    member: s.in_spectrum(),
                })),
                Err(Error::SingularRing { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(AsymptoticProfile { flux, n, samples })
}

/// Normalized Thouless value `4·C_Cat/(π q)`.
pub fn thouless_reference(q: u32) -> f64 {
    4.0 * CATALAN / (PI * q as f64)
}

/// Catalan's constant from the alternating series with Euler's
/// transformation, for cross-checking [`CATALAN`].
pub fn catalan_series(terms: usize) -> f64 {
    // van Wijngaarden: average of successive partial sums, repeated
    let mut partial = Vec::with_capacity(terms);
    let mut s = 0.0;
    for n in 0..terms {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        s += sign / ((2 * n + 1) as f64).powi(2);
        partial.push(s);
    }
    while partial.len() > 1 {
        partial = partial.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    partial[0]
}

/// Negative eigenvalues `−tan²(mπ/N)` of a star graph with `N` half-lines
/// and the circulant coupling, ascending.
pub fn star_graph_negative_eigenvalues(n: u32) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::DegreeTooSmall(n as usize));
    }
    let m_max = if n % 2 == 1 { n / 2 } else { (n - 1) / 2 };
    let mut ev: Vec<f64> = (1..=m_max)
        .map(|m| -(m as f64 * PI / n as f64).tan().powi(2))
        .collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_flux;

    #[test]
    fn catalan_constant() {
        assert!((CATALAN - 0.9159).abs() < 1e-4);
        assert!((catalan_series(40) - CATALAN).abs() < 1e-12);
    }

    #[test]
    fn thouless_values() {
        assert!((thouless_reference(2) - 2.0 * CATALAN / PI).abs() < 1e-15);
        assert!((thouless_reference(2) - 0.58312).abs() < 1e-5);
        for q in 2..12 {
            assert!(thouless_reference(q + 1) < thouless_reference(q));
        }
    }

    #[test]
    fn star_graph_small() {
        let e4 = star_graph_negative_eigenvalues(4).unwrap();
        assert_eq!(e4.len(), 1);
        assert!((e4[0] + 1.0).abs() < 1e-12);
        let e3 = star_graph_negative_eigenvalues(3).unwrap();
        assert_eq!(e3.len(), 1);
        assert!((e3[0] + 3.0).abs() < 1e-12);
        let e5 = star_graph_negative_eigenvalues(5).unwrap();
        let expected = [-(2.0 * PI / 5.0).tan().powi(2), -(PI / 5.0).tan().powi(2)];
        assert_eq!(e5.len(), 2);
        for (a, b) in e5.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(star_graph_negative_eigenvalues(2).is_err());
    }

    #[test]
    fn classification_margin() {
        let narrow = Band {
            z_lo: 0.0,
            z_hi: 0.01,
            touching: false,
            clipped: false,
        };
        assert_eq!(classify(&narrow, 100), BandSpecies::NonButterfly);
        assert_eq!(classify(&narrow, 1000), BandSpecies::Butterfly);
    }

    #[test]
    fn profile_requires_large_n() {
        let f = make_flux(1, 3).unwrap();
        assert!(asymptotic_band_profile(f, 10, 100.0).is_err());
        assert!(asymptotic_band_profile(f, 50, 0.0).is_err());
    }

    #[test]
    fn narrow_stats_requires_large_n() {
        let f = make_flux(1, 2).unwrap();
        assert!(narrow_band_stats(f, 5, &ScanConfig::default()).is_err());
    }
}
