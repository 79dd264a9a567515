//! Band function, band scanning and edge refinement.
//!
//! The fiber determinant has the form `c(z)·(h(z) + s(z)·Θ_q)` with
//! `s = (k²−1)^q sin^q k`. Evaluating it at the two extremal quasimomenta
//! (Θ_q = ±2) gives `d₊ = c(h + 2s)` and `d₋ = c(h − 2s)`, hence
//!
//! ```text
//! Θ*(z) = −h/s = −2 (d₊ + d₋) / (d₊ − d₋)
//! ```
//!
//! and `z` lies in the spectrum iff `|Θ*(z)| ≤ 2`. The unknown prefactor
//! `c(z)` cancels. `s` vanishes at `k = 1` and `k = nπ`; those points are
//! skipped by small exclusion windows and decided by flanking probes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fiber::{assemble_with, build_layout, energy, fiber_log_det, CellLayout, Regime, SpectralParameter};
use crate::linalg::{extended_det, ExtendedComplex, LogDet};
use crate::model::{FluxRatio, Quasimomentum};

/// Half-width of the windows skipped around zeros of `s`.
pub const EXCLUSION_HALF_WIDTH: f64 = 1e-6;
/// Samples per unit of `k` (or `κ`).
pub const DEFAULT_GRID_DENSITY: f64 = 2e4;
/// Bisection tolerance for band edges, in `z`.
pub const DEFAULT_EDGE_TOL: f64 = 1e-10;
/// Default upper limit of the negative-regime scan.
pub const DEFAULT_KAPPA_MAX: f64 = 6.0;
/// `d₊/d₋` closer than this to one is treated as `s = 0`.
pub const SINGULAR_RING_TOL: f64 = 1e-12;
/// Above this `|Θ*|` the double-precision ratio has lost more than about
/// `ε·|Θ*|` relative accuracy and is recomputed in double-double arithmetic.
pub const REFINE_ABOVE: f64 = 1e4;
/// Non-collapse tolerance: `Im` part allowed up to `tol · max(1, |Θ*|)²`.
pub const DEFAULT_IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandFunctionSample {
    pub z: SpectralParameter,
    pub theta_star: f64,
    pub imag_residual: f64,
}

impl BandFunctionSample {
    pub fn in_spectrum(&self) -> bool {
        self.theta_star.abs() <= 2.0
    }

    /// `|Θ*| − 2`, non-positive inside bands.
    pub fn gap_function(&self) -> f64 {
        self.theta_star.abs() - 2.0
    }
}

/// Band-function evaluator bound to one flux.
#[derive(Debug, Clone)]
pub struct BandEngine {
    flux: FluxRatio,
    layout: CellLayout,
    upper: Quasimomentum,
    lower: Quasimomentum,
    imag_tol: f64,
}

impl BandEngine {
    /// Engine for `flux`. The baseline `0/1` is accepted.
    pub fn new(flux: FluxRatio) -> Self {
        BandEngine {
            flux,
            layout: build_layout(flux),
            upper: Quasimomentum::upper_extremal(),
            lower: Quasimomentum::lower_extremal(flux.q()),
            imag_tol: DEFAULT_IMAG_TOL,
        }
    }

    pub fn with_imag_tol(mut self, tol: f64) -> Self {
        self.imag_tol = tol;
        self
    }

    pub fn flux(&self) -> FluxRatio {
        self.flux
    }

    pub fn layout(&self) -> &CellLayout {
        &self.layout
    }

    /// Fiber determinants at Θ_q = +2 and Θ_q = −2.
    pub fn extremal_determinants(&self, z: SpectralParameter) -> Result<(LogDet, LogDet)> {
        let plus = fiber_log_det(&self.layout, z, self.upper)?;
        let minus = fiber_log_det(&self.layout, z, self.lower)?;
        Ok((plus, minus))
    }

    /// `Θ*(z)`. Large values, where `d₊ − d₋` cancels, are recomputed with
    /// extended-precision determinants.
    pub fn band_function(&self, z: SpectralParameter) -> Result<BandFunctionSample> {
        let sample = self.band_function_unrefined(z)?;
        if sample.theta_star.abs() <= REFINE_ABOVE {
            return Ok(sample);
        }
        let plus = extended_det(&assemble_with(&self.layout, z, self.upper).matrix)?;
        let minus = extended_det(&assemble_with(&self.layout, z, self.lower).matrix)?;
        let Some(r) = plus.ratio(&minus) else {
            return Ok(sample);
        };
        let one = ExtendedComplex::from_complex(1.0.into());
        let w = r.add(one).div(r.sub(one)).to_complex() * 2.0;
        Ok(BandFunctionSample {
            z,
            theta_star: -w.re,
            imag_residual: w.im.abs(),
        })
    }

    /// `Θ*(z)` in double precision only. Its relative error grows like
    /// `ε·|Θ*|`, which is harmless for deciding membership.
    pub fn band_function_unrefined(&self, z: SpectralParameter) -> Result<BandFunctionSample> {
        let (plus, minus) = self.extremal_determinants(z)?;
        if plus.is_singular() && minus.is_singular() {
            return Err(Error::SingularRing { z: z.value() });
        }
        let scale = plus.log_magnitude.max(minus.log_magnitude);
        let a = plus.scaled(scale);
        let b = minus.scaled(scale);
        let diff = a - b;
        if diff.norm() <= SINGULAR_RING_TOL * a.norm().max(b.norm()) {
            return Err(Error::SingularRing { z: z.value() });
        }
        let w = (a + b) / diff * 2.0;
        let theta_star = -w.re;
        let imag_residual = w.im.abs();
        let tolerance = self.imag_tol * theta_star.abs().max(1.0).powi(2);
        if !(imag_residual <= tolerance) {
            return Err(Error::NonCollapse {
                z: z.value(),
                residual: imag_residual,
                tolerance,
            });
        }
        Ok(BandFunctionSample {
            z,
            theta_star,
            imag_residual,
        })
    }

    /// `|Θ*| − 2` for scanning. A singular ring means `d₊/d₋ ≈ 1`, i.e.
    /// `|Θ*| ≳ 4/SINGULAR_RING_TOL`, which is reported as `+∞`.
    fn gap_at(&self, regime: Regime, value: f64) -> Result<f64> {
        let z = SpectralParameter::new(regime, value)?;
        match self.band_function_unrefined(z) {
            Ok(s) => Ok(s.gap_function()),
            Err(Error::SingularRing { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Bisection of a band edge inside `bracket` to width `tol`.
    pub fn refine_edge(&self, bracket: (f64, f64), regime: Regime, tol: f64) -> Result<f64> {
        let (lo, hi) = self.bisect(bracket, regime, tol)?;
        Ok(0.5 * (lo + hi))
    }

    /// Final bisection bracket, `hi − lo <= tol`.
    pub fn bisect(&self, bracket: (f64, f64), regime: Regime, tol: f64) -> Result<(f64, f64)> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("edge tolerance {tol}")));
        }
        let (mut lo, mut hi) = if bracket.0 <= bracket.1 {
            bracket
        } else {
            (bracket.1, bracket.0)
        };
        let inside_lo = self.gap_at(regime, lo)? <= 0.0;
        let inside_hi = self.gap_at(regime, hi)? <= 0.0;
        if inside_lo == inside_hi {
            return Err(Error::InvalidBracket { lo, hi });
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (self.gap_at(regime, mid)? <= 0.0) == inside_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo, hi))
    }
}

pub fn band_function(z: SpectralParameter, flux: FluxRatio) -> Result<BandFunctionSample> {
    BandEngine::new(flux).band_function(z)
}

pub fn refine_edge(bracket: (f64, f64), flux: FluxRatio, regime: Regime, tol: f64) -> Result<f64> {
    BandEngine::new(flux).refine_edge(bracket, regime, tol)
}

/// Zeros of `s` in `[lo, hi]` (positive regime only: `k = 1` and `k = nπ`).
pub fn singular_points(regime: Regime, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = Vec::new();
    if regime == Regime::Positive {
        if (lo..=hi).contains(&1.0) {
            pts.push(1.0);
        }
        let first = (lo / PI).ceil().max(1.0) as u64;
        let mut n = first;
        while n as f64 * PI <= hi {
            pts.push(n as f64 * PI);
            n += 1;
        }
        pts.sort_by(f64::total_cmp);
    }
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub grid_density: f64,
    pub tol: f64,
    pub exclusion: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            grid_density: DEFAULT_GRID_DENSITY,
            tol: DEFAULT_EDGE_TOL,
            exclusion: EXCLUSION_HALF_WIDTH,
        }
    }
}

impl ScanConfig {
    pub fn with_density(grid_density: f64) -> Self {
        ScanConfig {
            grid_density,
            ..Default::default()
        }
    }

    pub fn step(&self) -> f64 {
        1.0 / self.grid_density
    }
}

/// One spectral band in terms of the spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub z_lo: f64,
    pub z_hi: f64,
    /// Assembled from pieces separated by less than the edge tolerance.
    pub touching: bool,
    /// An end sits at the scan boundary or an exclusion flank rather than at
    /// a refined edge.
    pub clipped: bool,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.z_hi - self.z_lo
    }
}

/// Disjoint bands of one flux and regime, sorted by energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    pub flux: FluxRatio,
    pub regime: Regime,
    pub bands: Vec<Band>,
    pub edge_tolerance: f64,
    /// Scanned range of the spectral parameter.
    pub range: (f64, f64),
}

impl BandSet {
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Energy intervals `[e_lo, e_hi]`, ascending.
    pub fn energy_bands(&self) -> Vec<(f64, f64)> {
        self.bands
            .iter()
            .map(|b| {
                let (a, c) = (energy(self.regime, b.z_lo), energy(self.regime, b.z_hi));
                (a.min(c), a.max(c))
            })
            .collect()
    }

    /// Total length of the bands in the spectral parameter.
    pub fn parameter_measure(&self) -> f64 {
        self.bands.iter().map(Band::width).sum()
    }

    /// Bands ordered by the spectral parameter (ascending `k` or `κ`).
    pub fn by_parameter(&self) -> Vec<Band> {
        let mut v = self.bands.clone();
        v.sort_by(|a, b| a.z_lo.total_cmp(&b.z_lo));
        v
    }
}

pub fn scan_bands(flux: FluxRatio, regime: Regime, limit: f64, cfg: &ScanConfig) -> Result<BandSet> {
    BandEngine::new(flux).scan_window(regime, 0.0, limit, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum End {
    Edge,
    Boundary,
    Flank(f64),
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    lo_end: End,
    hi_end: End,
    touching: bool,
}

impl BandEngine {
    /// Bands with spectral parameter in `(lo, hi]`.
    pub fn scan_window(&self, regime: Regime, lo: f64, hi: f64, cfg: &ScanConfig) -> Result<BandSet> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("scan range ({lo}, {hi}]")));
        }
        if !(cfg.grid_density > 0.0 && cfg.tol > 0.0 && cfg.exclusion > 0.0) {
            return Err(Error::InvalidParameter(format!("scan configuration {cfg:?}")));
        }
        let eps = cfg.exclusion;
        let step = cfg.step();

        let singular = singular_points(regime, lo - 2.0 * eps, hi + 2.0 * eps);
        if let Some(spacing) = singular
            .windows(2)
            .map(|w| w[1] - w[0])
            .min_by(f64::total_cmp)
        {
            if step > 0.5 * spacing {
                return Err(Error::GridTooCoarse { step, spacing });
            }
        }

        // segments between consecutive boundaries
        let mut cuts: Vec<(f64, End)> = vec![(lo, End::Boundary)];
        for &x in &singular {
            if x > lo + 2.0 * eps && x < hi - 2.0 * eps {
                cuts.push((x, End::Flank(x)));
            }
        }
        cuts.push((hi, End::Boundary));
        // a range end sitting on a singular point becomes a flank
        for cut in cuts.iter_mut() {
            if let Some(&x) = singular.iter().find(|&&x| (x - cut.0).abs() <= 2.0 * eps) {
                cut.1 = End::Flank(x);
            }
        }
        // k = 0 is a removable point of Θ*; keep the first probe off zero
        if lo == 0.0 {
            cuts[0].1 = End::Flank(0.0);
        }

        let mut pieces: Vec<Piece> = Vec::new();
        for w in cuts.windows(2) {
            let (a, a_end) = w[0];
            let (b, b_end) = w[1];
            let start = match a_end {
                End::Flank(x) => x + 2.0 * eps,
                _ => a,
            };
            let stop = match b_end {
                End::Flank(x) => x - 2.0 * eps,
                _ => b,
            };
            if stop <= start {
                continue;
            }
            let seg = self.scan_segment(regime, (start, a_end), (stop, b_end), step, cfg.tol)?;
            pieces.extend(seg);
        }

        let pieces = merge_pieces(pieces, cfg.tol);
        let mut bands: Vec<Band> = pieces
            .into_iter()
            .map(|p| Band {
                // Θ* is continuous at zero, so a band at the first probe reaches it
                z_lo: if lo == 0.0 && p.lo_end == End::Flank(0.0) { 0.0 } else { p.lo },
                z_hi: p.hi,
                touching: p.touching,
                clipped: p.lo_end != End::Edge || p.hi_end != End::Edge,
            })
            .collect();
        if regime == Regime::Negative {
            bands.reverse();
        }
        Ok(BandSet {
            flux: self.flux,
            regime,
            bands,
            edge_tolerance: cfg.tol,
            range: (lo, hi),
        })
    }

    fn scan_segment(
        &self,
        regime: Regime,
        (start, start_end): (f64, End),
        (stop, stop_end): (f64, End),
        step: f64,
        tol: f64,
    ) -> Result<Vec<Piece>> {
        let first = (start / step).floor() as i64 + 1;
        let last = (stop / step).ceil() as i64 - 1;
        let mut zs = Vec::with_capacity((last - first + 3).max(2) as usize);
        zs.push(start);
        zs.extend((first..=last).map(|i| i as f64 * step).filter(|&z| z > start && z < stop));
        zs.push(stop);

        let mut gs = self.gap_batch(regime, &zs)?;
        self.resolve_hidden_crossings(regime, &mut zs, &mut gs)?;

        let mut pieces = Vec::new();
        let mut open: Option<(f64, End)> = if gs[0] <= 0.0 {
            Some((start, start_end))
        } else {
            None
        };
        for i in 1..zs.len() {
            let was_in = gs[i - 1] <= 0.0;
            let is_in = gs[i] <= 0.0;
            if was_in == is_in {
                continue;
            }
            let edge = self.refine_edge((zs[i - 1], zs[i]), regime, tol)?;
            if is_in {
                open = Some((edge, End::Edge));
            } else if let Some((lo, lo_end)) = open.take() {
                pieces.push(Piece {
                    lo,
                    hi: edge,
                    lo_end,
                    hi_end: End::Edge,
                    touching: false,
                });
            }
        }
        if let Some((lo, lo_end)) = open {
            pieces.push(Piece {
                lo,
                hi: stop,
                lo_end,
                hi_end: stop_end,
                touching: false,
            });
        }
        Ok(pieces)
    }

    fn gap_batch(&self, regime: Regime, zs: &[f64]) -> Result<Vec<f64>> {
        zs.par_iter()
            .map(|&z| self.gap_at(regime, z))
            .collect::<Result<Vec<f64>>>()
    }

    /// Resample 10× denser around local extrema of `g` that sit close to
    /// zero without crossing it, where a narrow band or gap could hide
    /// between two grid points.
    fn resolve_hidden_crossings(&self, regime: Regime, zs: &mut Vec<f64>, gs: &mut Vec<f64>) -> Result<()> {
        let mut extra = Vec::new();
        for i in 1..zs.len().saturating_sub(1) {
            let (l, c, r) = (gs[i - 1], gs[i], gs[i + 1]);
            let same_side = (l <= 0.0) == (c <= 0.0) && (c <= 0.0) == (r <= 0.0);
            if !same_side {
                continue;
            }
            let extremum = (c < l && c < r && c > 0.0) || (c > l && c > r && c <= 0.0);
            if !extremum {
                continue;
            }
            let spread = (l - c).abs().max((r - c).abs());
            if c.abs() < 2.0 * spread {
                let (a, b) = (zs[i - 1], zs[i + 1]);
                let h = (b - a) / 20.0;
                extra.extend((1..20).filter(|&j| j != 10).map(|j| a + j as f64 * h));
            }
        }
        if extra.is_empty() {
            return Ok(());
        }
        let extra_g = self.gap_batch(regime, &extra)?;
        let mut all: Vec<(f64, f64)> = zs.iter().copied().zip(gs.iter().copied()).collect();
        all.extend(extra.into_iter().zip(extra_g));
        all.sort_by(|x, y| x.0.total_cmp(&y.0));
        all.dedup_by(|x, y| x.0 == y.0);
        *zs = all.iter().map(|p| p.0).collect();
        *gs = all.iter().map(|p| p.1).collect();
        Ok(())
    }
}

/// Join pieces across exclusion windows (both flanks in band) and across
/// gaps narrower than `tol`.
fn merge_pieces(pieces: Vec<Piece>, tol: f64) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::with_capacity(pieces.len());
    for p in pieces {
        if let Some(last) = out.last_mut() {
            let across_window = matches!((last.hi_end, p.lo_end), (End::Flank(a), End::Flank(b)) if a == b);
            let touching = p.lo - last.hi < tol;
            if across_window || touching {
                last.hi = p.hi;
                last.hi_end = p.hi_end;
                last.touching |= touching && !across_window;
                continue;
            }
        }
        out.push(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_flux;

    #[test]
    fn singular_points_positive() {
        let pts = singular_points(Regime::Positive, 0.0, 7.0);
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0], 1.0);
        assert!((pts[1] - PI).abs() < 1e-15 && (pts[2] - 2.0 * PI).abs() < 1e-15);
        assert!(singular_points(Regime::Negative, 0.0, 7.0).is_empty());
    }

    #[test]
    fn coarse_grid_rejected() {
        let f = make_flux(1, 2).unwrap();
        let err = scan_bands(f, Regime::Positive, 10.0, &ScanConfig::with_density(0.5)).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
    }

    #[test]
    fn invalid_bracket() {
        let f = make_flux(1, 2).unwrap();
        let e = BandEngine::new(f);
        // both points deep inside a gap near k = 1
        let err = e.refine_edge((1.001, 1.002), Regime::Positive, 1e-10).unwrap_err();
        assert!(matches!(err, Error::InvalidBracket { .. }));
    }

    #[test]
    fn singular_ring_at_excluded_point() {
        let f = make_flux(1, 2).unwrap();
        let err = band_function(SpectralParameter::positive(PI).unwrap(), f);
        assert!(matches!(err, Err(Error::SingularRing { .. })), "{err:?}");
    }

    #[test]
    fn merge_touching_pieces() {
        let p = |lo, hi| Piece {
            lo,
            hi,
            lo_end: End::Edge,
            hi_end: End::Edge,
            touching: false,
        };
        let merged = merge_pieces(vec![p(0.0, 1.0), p(1.0 + 1e-12, 2.0), p(3.0, 4.0)], 1e-10);
        assert_eq!(merged.len(), 2);
        assert!(merged[0].touching);
        assert_eq!(merged[0].hi, 2.0);
    }
}
