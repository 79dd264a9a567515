//! Row types and their wire formats. CSV is canonical: reals are written in
//! fixed point with 12 significant digits, and JSON carries the same rounded
//! values with the metadata inlined.

use std::path::Path;

use maglat_core::{BandSet, FluxRatio, Regime};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SIGNIFICANT_DIGITS: i32 = 12;

/// `x` in fixed point with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn fixed(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.*}", (SIGNIFICANT_DIGITS - 1) as usize, if x.is_finite() { 0.0 } else { x });
    }
    let mut mag = x.abs().log10().floor() as i32;
    if 10f64.powi(mag) > x.abs() {
        mag -= 1;
    }
    let decimals = (SIGNIFICANT_DIGITS - 1 - mag).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    // rounding may carry into a new leading digit
    let carried = s.parse::<f64>().map(|v| v.abs() >= 10f64.powi(mag + 1)).unwrap_or(false);
    if carried && decimals > 0 {
        format!("{:.*}", decimals - 1, x)
    } else {
        s
    }
}

/// `x` rounded to wire precision.
pub fn canonical(x: f64) -> f64 {
    fixed(x).parse().expect("fixed-point output parses")
}

/// A row type with a CSV header and formatted fields.
pub trait CsvRecord: DeserializeOwned {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn to_csv<T: CsvRecord>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(T::HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r.fields()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

pub fn from_csv<T: CsvRecord>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::Parse(e.to_string()))?;
    if header.iter().ne(T::HEADER.iter().copied()) {
        return Err(CliError::Parse(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::Parse(e.to_string())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowRegime {
    Negative,
    Positive,
    /// Positive energies in the period window `(nπ, (n+1)π)` of `k`.
    Asymptotic,
}

impl RowRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            RowRegime::Negative => "negative",
            RowRegime::Positive => "positive",
            RowRegime::Asymptotic => "asymptotic",
        }
    }
}

impl From<Regime> for RowRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::Positive => RowRegime::Positive,
            Regime::Negative => RowRegime::Negative,
        }
    }
}

/// One band as an energy interval. `band_index` counts from 1 in ascending
/// energy within its flux and regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub p: u32,
    pub q: u32,
    pub regime: RowRegime,
    pub band_index: usize,
    pub e_lo: f64,
    pub e_hi: f64,
}

impl CsvRecord for BandRow {
    const HEADER: &'static [&'static str] = &["p", "q", "regime", "band_index", "e_lo", "e_hi"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.p.to_string(),
            self.q.to_string(),
            self.regime.as_str().to_string(),
            self.band_index.to_string(),
            fixed(self.e_lo),
            fixed(self.e_hi),
        ]
    }
}

impl BandRow {
    pub fn from_set(set: &BandSet, regime: RowRegime) -> Vec<BandRow> {
        let mut energies = set.energy_bands();
        energies.sort_by(|a, b| a.0.total_cmp(&b.0));
        energies
            .into_iter()
            .enumerate()
            .map(|(i, (lo, hi))| BandRow {
                p: set.flux.p(),
                q: set.flux.q(),
                regime,
                band_index: i + 1,
                e_lo: canonical(lo),
                e_hi: canonical(hi),
            })
            .collect()
    }
}

/// Order of `p/q` by value, exact.
fn flux_key(p: u32, q: u32) -> impl Fn(u32, u32) -> std::cmp::Ordering {
    move |p2, q2| (p as u64 * q2 as u64).cmp(&(p2 as u64 * q as u64)).then(q.cmp(&q2))
}

pub fn sort_band_rows(rows: &mut [BandRow]) {
    rows.sort_by(|a, b| {
        flux_key(a.p, a.q)(b.p, b.q)
            .then(a.regime.cmp(&b.regime))
            .then(a.band_index.cmp(&b.band_index))
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbRow {
    pub p: u32,
    pub q: u32,
    pub p_sigma: f64,
    pub thouless_ref: f64,
    pub n: u32,
}

impl CsvRecord for ProbRow {
    const HEADER: &'static [&'static str] = &["p", "q", "p_sigma", "thouless_ref", "n"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.p.to_string(),
            self.q.to_string(),
            fixed(self.p_sigma),
            fixed(self.thouless_ref),
            self.n.to_string(),
        ]
    }
}

pub fn sort_prob_rows(rows: &mut [ProbRow]) {
    rows.sort_by(|a, b| flux_key(a.p, a.q)(b.p, b.q));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarRow {
    pub degree: u32,
    pub m: u32,
    pub energy: f64,
}

impl CsvRecord for StarRow {
    const HEADER: &'static [&'static str] = &["degree", "m", "energy"];

    fn fields(&self) -> Vec<String> {
        vec![self.degree.to_string(), self.m.to_string(), fixed(self.energy)]
    }
}

/// Run parameters written next to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub engine: String,
    pub version: String,
    pub command: String,
    pub fluxes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion_half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_max_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic_n: Option<u32>,
    pub narrow_band_margin: f64,
    pub precision: String,
}

impl Metadata {
    pub fn new(command: &str, fluxes: &[FluxRatio]) -> Self {
        Metadata {
            engine: "maglat".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            fluxes: fluxes.iter().map(|f| f.to_string()).collect(),
            grid_density: None,
            edge_tolerance: None,
            exclusion_half_width: None,
            kmax: None,
            kappa_max: None,
            kappa_max_note: None,
            asymptotic_n: None,
            narrow_band_margin: maglat_core::analysis::NARROW_BAND_MARGIN,
            precision: format!("{SIGNIFICANT_DIGITS} significant digits, fixed point"),
        }
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a Metadata,
    rows: &'a [T],
}

pub fn to_json<T: Serialize>(meta: &Metadata, rows: &[T]) -> String {
    let mut s = serde_json::to_string_pretty(&Document { metadata: meta, rows }).expect("serializable");
    s.push('\n');
    s
}

pub fn metadata_json(meta: &Metadata) -> String {
    let mut s = serde_json::to_string_pretty(meta).expect("serializable");
    s.push('\n');
    s
}

/// Path of the metadata sidecar for a data file.
pub fn sidecar_path(data: &Path) -> std::path::PathBuf {
    data.with_extension("meta.json")
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
