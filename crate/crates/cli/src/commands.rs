//! Subcommand execution. Every per-flux computation runs on a worker pool of
//! `--jobs` threads; rows are sorted before writing so the pool size never
//! affects the output bytes.

use std::f64::consts::PI;

use maglat_core::analysis::probability_sigma;
use maglat_core::bands::EXCLUSION_HALF_WIDTH;
use maglat_core::{star_graph_negative_eigenvalues, BandEngine, Regime, ScanConfig};
use rayon::prelude::*;

use crate::config::{resolve, Command, CommandKind, Format, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{
    canonical, metadata_json, sidecar_path, sort_band_rows, sort_prob_rows, to_csv, to_json, write_file, BandRow,
    CsvRecord, Metadata, ProbRow, RowRegime, StarRow,
};
use crate::svg::render_butterfly;

const KAPPA_MAX_NOTE: &str =
    "empirical bound: no negative bands are searched beyond kappa_max; none were found beyond 6 for q <= 12";

/// Resolve the configuration and execute the subcommand.
pub fn run(command: &Command) -> Result<()> {
    let cfg = resolve(command)?;
    if command.dump_config() {
        let text = toml::to_string(&cfg.effective).map_err(|e| CliError::Usage(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
    pool.install(|| execute(&cfg))
}

pub fn execute(cfg: &RunConfig) -> Result<()> {
    match cfg.command {
        CommandKind::Bands | CommandKind::Butterfly => {
            let rows = band_rows(cfg)?;
            write_bands(cfg, &rows)
        }
        CommandKind::Prob => {
            let rows = prob_rows(cfg)?;
            let mut meta = Metadata::new("prob", &cfg.fluxes);
            scan_metadata(&mut meta, cfg);
            write_table(cfg, &meta, &rows)
        }
        CommandKind::Star => {
            let rows = star_rows(cfg)?;
            write_table(cfg, &Metadata::new("star", &[]), &rows)
        }
    }
}

pub fn scan_config(cfg: &RunConfig) -> ScanConfig {
    ScanConfig {
        grid_density: cfg.grid,
        tol: cfg.tol,
        exclusion: EXCLUSION_HALF_WIDTH,
    }
}

/// Band rows of every configured flux, sorted.
pub fn band_rows(cfg: &RunConfig) -> Result<Vec<BandRow>> {
    let scan = scan_config(cfg);
    let per_flux = cfg
        .fluxes
        .par_iter()
        .map(|&flux| {
            let engine = BandEngine::new(flux);
            let set = engine.scan_window(Regime::Positive, 0.0, cfg.kmax, &scan)?;
            let mut rows = BandRow::from_set(&set, RowRegime::Positive);
            if cfg.neg {
                let set = engine.scan_window(Regime::Negative, 0.0, cfg.kappa_max, &scan)?;
                rows.extend(BandRow::from_set(&set, RowRegime::Negative));
            }
            if cfg.asymptotic {
                let lo = cfg.n as f64 * PI;
                let set = engine.scan_window(Regime::Positive, lo, lo + PI, &scan)?;
                rows.extend(BandRow::from_set(&set, RowRegime::Asymptotic));
            }
            Ok(rows)
        })
        .collect::<maglat_core::Result<Vec<_>>>()?;
    let mut rows: Vec<BandRow> = per_flux.into_iter().flatten().collect();
    sort_band_rows(&mut rows);
    Ok(rows)
}

pub fn prob_rows(cfg: &RunConfig) -> Result<Vec<ProbRow>> {
    let scan = scan_config(cfg);
    let mut rows = cfg
        .fluxes
        .par_iter()
        .map(|&flux| {
            let r = probability_sigma(flux, cfg.n, &scan)?;
            Ok(ProbRow {
                p: flux.p(),
                q: flux.q(),
                p_sigma: canonical(r.p_sigma),
                thouless_ref: canonical(r.thouless_ref),
                n: r.n,
            })
        })
        .collect::<maglat_core::Result<Vec<_>>>()?;
    sort_prob_rows(&mut rows);
    Ok(rows)
}

/// Negative star-graph eigenvalues, ascending per degree.
pub fn star_rows(cfg: &RunConfig) -> Result<Vec<StarRow>> {
    let mut rows = Vec::new();
    for &degree in &cfg.degrees {
        let ev = star_graph_negative_eigenvalues(degree)?;
        let m_max = ev.len() as u32;
        rows.extend(ev.into_iter().enumerate().map(|(i, e)| StarRow {
            degree,
            // the deepest level belongs to the largest m
            m: m_max - i as u32,
            energy: canonical(e),
        }));
    }
    Ok(rows)
}

fn scan_metadata(meta: &mut Metadata, cfg: &RunConfig) {
    meta.grid_density = Some(cfg.grid);
    meta.edge_tolerance = Some(cfg.tol);
    meta.exclusion_half_width = Some(EXCLUSION_HALF_WIDTH);
}

pub fn band_metadata(cfg: &RunConfig) -> Metadata {
    let mut meta = Metadata::new(cfg.command.as_str(), &cfg.fluxes);
    scan_metadata(&mut meta, cfg);
    meta.kmax = Some(cfg.kmax);
    if cfg.neg {
        meta.kappa_max = Some(cfg.kappa_max);
        meta.kappa_max_note = Some(KAPPA_MAX_NOTE.into());
    }
    if cfg.asymptotic {
        meta.asymptotic_n = Some(cfg.n);
    }
    meta
}

fn write_bands(cfg: &RunConfig, rows: &[BandRow]) -> Result<()> {
    let meta = band_metadata(cfg);
    let asymptotic_n = cfg.asymptotic.then_some(cfg.n);
    if cfg.format == Format::Svg {
        return write_file(&cfg.out, &render_butterfly(rows, asymptotic_n));
    }
    write_table(cfg, &meta, rows)?;
    if cfg.svg {
        write_file(&cfg.out.with_extension("svg"), &render_butterfly(rows, asymptotic_n))?;
    }
    Ok(())
}

fn write_table<T: CsvRecord + serde::Serialize>(cfg: &RunConfig, meta: &Metadata, rows: &[T]) -> Result<()> {
    match cfg.format {
        Format::Csv => {
            write_file(&cfg.out, &to_csv(rows))?;
            write_file(&sidecar_path(&cfg.out), &metadata_json(meta))
        }
        Format::Json => write_file(&cfg.out, &to_json(meta, rows)),
        Format::Svg => Err(CliError::Usage("--format svg is only available for butterfly".into())),
    }
}
