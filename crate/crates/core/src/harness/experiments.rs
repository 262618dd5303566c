//! Experiment runners. Every runner first computes its full result in memory
//! (cells in parallel, assembled in grid order) and only then writes files,
//! so output bytes never depend on scheduling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EstimatorKind, ExperimentConfig, TcComparisonConfig, XStar};
use super::score_file::ScoreSampleFile;
use crate::error::{Error, Result};
use crate::linear_model::{sample_dataset, variance_density, Dataset, ManifoldSpec, StateVector};
use crate::numerics::{mean_and_stderr, spearman};
use crate::rem::{condensation_time, tc_approx_alpha, tc_exact};
use crate::rng::{derive_seed, rng_from_seed, standard_normal, PRNG_NAME};
use crate::score::{EmpiricalScore, ExactScore};
use crate::spectral::{
    detect_dimension, estimate_spectrum, gap_profile, predicted_spectrum, random_matrix_spectrum,
    singular_spectrum, DimensionEstimate, Estimator, GapProfile, SpectrumRecord,
};

/// Coordinate marking dataset streams in seed derivation.
const DATASET_TAG: u64 = 0x0DA7_A5E7;
const TC_TAG: u64 = 0x7C;

pub fn fmt9(v: f64) -> String {
    format!("{v:.8e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub estimator: EstimatorKind,
    pub n_index: usize,
    pub t_index: usize,
    pub rep: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSeed {
    pub estimator: EstimatorKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub t_index: usize,
    pub rep: usize,
    pub seed: u64,
    pub dataset_seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub prng: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CellSeed>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, config: &ExperimentConfig, cells: Vec<CellSeed>, started: Instant) -> Self {
        RunManifest {
            tool: "geomem".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            prng: PRNG_NAME.into(),
            config: config.clone(),
            cells,
            started_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: RunManifest = serde_json::from_str(&text)?;
        m.config.validate()?;
        Ok(m)
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(dir: &Path, name: &str, text: &str, outputs: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    outputs.push(name.to_string());
    Ok(())
}

/// Seed of the dataset used by every cell with this `N` index and repetition.
pub fn dataset_seed(cfg: &ExperimentConfig, n_index: usize, rep: usize) -> u64 {
    let rep = if cfg.fresh_dataset_per_rep { rep } else { 0 };
    derive_seed(cfg.master_seed, &[DATASET_TAG, n_index as u64, rep as u64])
}

/// `derive_seed(master, [N-index, t-index, rep, estimator])`.
pub fn cell_seed(cfg: &ExperimentConfig, key: &CellKey) -> u64 {
    derive_seed(
        cfg.master_seed,
        &[
            key.n_index as u64,
            key.t_index as u64,
            key.rep as u64,
            key.estimator.code(),
        ],
    )
}

fn needs_dataset(cfg: &ExperimentConfig, est: EstimatorKind) -> bool {
    match est {
        EstimatorKind::Empirical => true,
        EstimatorKind::Exact => cfg.x_star == XStar::DatasetPoint,
        _ => false,
    }
}

/// Grid cells in output order. The analytic estimator is deterministic and
/// gets a single repetition.
pub fn cells(cfg: &ExperimentConfig) -> Vec<CellKey> {
    let nt = cfg.t_values().len();
    let mut out = Vec::new();
    for &estimator in &cfg.estimators {
        let reps = if estimator.is_stochastic() { cfg.repetitions } else { 1 };
        for n_index in 0..cfg.n_list.len() {
            for t_index in 0..nt {
                for rep in 0..reps {
                    out.push(CellKey {
                        estimator,
                        n_index,
                        t_index,
                        rep,
                    });
                }
            }
        }
    }
    out
}

fn cell_seeds(cfg: &ExperimentConfig, keys: &[CellKey]) -> Vec<CellSeed> {
    keys.iter()
        .map(|k| CellSeed {
            estimator: k.estimator,
            n: cfg.n_list[k.n_index],
            t_index: k.t_index,
            rep: k.rep,
            seed: cell_seed(cfg, k),
            dataset_seed: needs_dataset(cfg, k.estimator).then(|| dataset_seed(cfg, k.n_index, k.rep)),
        })
        .collect()
}

/// Datasets keyed by `(N index, dataset repetition)`.
fn build_datasets(cfg: &ExperimentConfig, keys: &[CellKey]) -> Result<BTreeMap<(usize, usize), EmpiricalScore>> {
    let mut wanted: Vec<(usize, usize)> = keys
        .iter()
        .filter(|k| needs_dataset(cfg, k.estimator))
        .map(|k| (k.n_index, if cfg.fresh_dataset_per_rep { k.rep } else { 0 }))
        .collect();
    wanted.sort_unstable();
    wanted.dedup();
    let built: Vec<((usize, usize), EmpiricalScore)> = wanted
        .into_par_iter()
        .map(|(ni, rep)| {
            let ds = sample_dataset(&cfg.spec, cfg.n_list[ni], dataset_seed(cfg, ni, rep))?;
            Ok(((ni, rep), EmpiricalScore { dataset: ds }))
        })
        .collect::<Result<_>>()?;
    Ok(built.into_iter().collect())
}

fn compute_cell(
    cfg: &ExperimentConfig,
    key: &CellKey,
    t: f64,
    datasets: &BTreeMap<(usize, usize), EmpiricalScore>,
) -> Result<SpectrumRecord> {
    let spec = &cfg.spec;
    let n = cfg.n_list[key.n_index];
    let seed = cell_seed(cfg, key);
    let d = spec.ambient_dim();
    let oracle = datasets.get(&(key.n_index, if cfg.fresh_dataset_per_rep { key.rep } else { 0 }));
    let x_star = match (cfg.x_star, oracle) {
        (XStar::DatasetPoint, Some(o)) => o.dataset.point(0).into_owned(),
        _ => DVector::zeros(d),
    };
    let tc_at = |x: &StateVector| condensation_time(spec, x, n, cfg.tc_method);
    match key.estimator {
        EstimatorKind::Analytic => predicted_spectrum(spec, t, n, &tc_at),
        EstimatorKind::RandomMatrix => random_matrix_spectrum(spec, t, n, &tc_at, seed),
        EstimatorKind::Exact => estimate_spectrum(
            &ExactScore { spec: spec.clone() },
            &x_star,
            t,
            cfg.probes(),
            seed,
            cfg.probe_mode,
            cfg.probe_design,
        ),
        EstimatorKind::Empirical => {
            let oracle = oracle.ok_or_else(|| Error::Oracle("dataset missing for empirical cell".into()))?;
            estimate_spectrum(oracle, &x_star, t, cfg.probes(), seed, cfg.probe_mode, cfg.probe_design)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumCell {
    pub key: CellKey,
    pub n: usize,
    pub t: f64,
    pub record: SpectrumRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct AveragedSpectrum {
    pub estimator: EstimatorKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub reps: usize,
    pub mean_raw: Vec<f64>,
    pub mean_scaled: Vec<f64>,
    pub stderr_scaled: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SpectraResult {
    pub cells: Vec<SpectrumCell>,
    pub averages: Vec<AveragedSpectrum>,
    pub seeds: Vec<CellSeed>,
}

impl SpectraResult {
    pub fn average(&self, estimator: EstimatorKind, n: usize, t_index: usize) -> Option<&AveragedSpectrum> {
        let t = self
            .cells
            .iter()
            .find(|c| c.key.t_index == t_index)
            .map(|c| c.t)?;
        self.averages
            .iter()
            .find(|a| a.estimator == estimator && a.n == n && a.t == t)
    }
}

/// Index-wise averages of the sorted spectra over repetitions.
fn average_cells(cells: &[SpectrumCell]) -> Vec<AveragedSpectrum> {
    let mut groups: BTreeMap<(EstimatorKind, usize, usize), Vec<&SpectrumCell>> = BTreeMap::new();
    for c in cells {
        groups
            .entry((c.key.estimator, c.key.n_index, c.key.t_index))
            .or_default()
            .push(c);
    }
    groups
        .into_values()
        .map(|group| {
            let len = group.iter().map(|c| c.record.len()).min().unwrap_or(0);
            let scaled: Vec<Vec<f64>> = group.iter().map(|c| c.record.values()).collect();
            let mut mean_raw = Vec::with_capacity(len);
            let mut mean_scaled = Vec::with_capacity(len);
            let mut stderr_scaled = Vec::with_capacity(len);
            for i in 0..len {
                let raw: Vec<f64> = group.iter().map(|c| c.record.values_raw[i]).collect();
                mean_raw.push(mean_and_stderr(&raw).0);
                let col: Vec<f64> = scaled.iter().map(|v| v[i]).collect();
                let (m, se) = mean_and_stderr(&col);
                mean_scaled.push(m);
                stderr_scaled.push(se);
            }
            AveragedSpectrum {
                estimator: group[0].key.estimator,
                n: group[0].n,
                t: group[0].t,
                reps: group.len(),
                mean_raw,
                mean_scaled,
                stderr_scaled,
            }
        })
        .collect()
}

pub fn compute_spectra(cfg: &ExperimentConfig) -> Result<SpectraResult> {
    cfg.validate()?;
    let ts = cfg.t_values();
    let keys = cells(cfg);
    let datasets = build_datasets(cfg, &keys)?;
    let records: Vec<SpectrumRecord> = keys
        .par_iter()
        .map(|k| compute_cell(cfg, k, ts[k.t_index], &datasets))
        .collect::<Result<_>>()?;
    let cells: Vec<SpectrumCell> = keys
        .iter()
        .zip(records)
        .map(|(k, record)| SpectrumCell {
            key: *k,
            n: cfg.n_list[k.n_index],
            t: ts[k.t_index],
            record,
        })
        .collect();
    let averages = average_cells(&cells);
    Ok(SpectraResult {
        seeds: cell_seeds(cfg, &keys),
        cells,
        averages,
    })
}

pub fn spectra_csv(result: &SpectraResult) -> String {
    let mut out = String::from("estimator,N,t,rep,index,value_raw,value_scaled\n");
    for c in &result.cells {
        let scaled = c.record.values();
        for (i, (raw, sc)) in c.record.values_raw.iter().zip(&scaled).enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.key.estimator.as_str(),
                c.n,
                fmt9(c.t),
                c.key.rep,
                i + 1,
                fmt9(*raw),
                fmt9(*sc)
            ));
        }
    }
    out
}

pub fn averages_csv(result: &SpectraResult) -> String {
    let mut out = String::from("estimator,N,t,reps,index,mean_raw,mean_scaled,stderr_scaled\n");
    for a in &result.averages {
        for i in 0..a.mean_raw.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                a.estimator.as_str(),
                a.n,
                fmt9(a.t),
                a.reps,
                i + 1,
                fmt9(a.mean_raw[i]),
                fmt9(a.mean_scaled[i]),
                fmt9(a.stderr_scaled[i])
            ));
        }
    }
    out
}

/// Writes `spectra.csv`, `spectra_mean.csv` and `manifest.json` into `out_dir`.
pub fn run_spectra_vs_time(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let result = compute_spectra(cfg)?;
    ensure_dir(out_dir)?;
    let mut outputs = Vec::new();
    write_text(out_dir, "spectra.csv", &spectra_csv(&result), &mut outputs)?;
    write_text(out_dir, "spectra_mean.csv", &averages_csv(&result), &mut outputs)?;
    let mut manifest = RunManifest::new("spectra", cfg, result.seeds, started);
    manifest.outputs = outputs;
    manifest.write(out_dir)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct DimsRow {
    pub estimator: EstimatorKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub rep: usize,
    pub k: usize,
    pub no_gap: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimsSummary {
    pub estimator: EstimatorKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub reps: usize,
    pub mean_k: f64,
    pub no_gap_rate: f64,
    /// Fraction of repetitions that found the true manifold dimension.
    pub match_rate: f64,
}

#[derive(Debug, Clone)]
pub struct DimsResult {
    pub rows: Vec<DimsRow>,
    pub summary: Vec<DimsSummary>,
    pub seeds: Vec<CellSeed>,
}

pub fn compute_dimension_sweep(cfg: &ExperimentConfig) -> Result<DimsResult> {
    let spectra = compute_spectra(cfg)?;
    let m = cfg.spec.manifold_dim();
    let mut rows = Vec::with_capacity(spectra.cells.len());
    for c in &spectra.cells {
        let est = detect_dimension(&c.record, cfg.c, cfg.discard)?;
        rows.push(DimsRow {
            estimator: c.key.estimator,
            n: c.n,
            t: c.t,
            rep: c.key.rep,
            k: est.k,
            no_gap: est.no_gap,
        });
    }
    let mut groups: BTreeMap<(EstimatorKind, usize, usize), Vec<&DimsRow>> = BTreeMap::new();
    for (c, r) in spectra.cells.iter().zip(&rows) {
        groups
            .entry((c.key.estimator, c.key.n_index, c.key.t_index))
            .or_default()
            .push(r);
    }
    let summary = groups
        .into_values()
        .map(|g| {
            let reps = g.len() as f64;
            DimsSummary {
                estimator: g[0].estimator,
                n: g[0].n,
                t: g[0].t,
                reps: g.len(),
                mean_k: g.iter().map(|r| r.k as f64).sum::<f64>() / reps,
                no_gap_rate: g.iter().filter(|r| r.no_gap).count() as f64 / reps,
                match_rate: g.iter().filter(|r| r.k == m).count() as f64 / reps,
            }
        })
        .collect();
    Ok(DimsResult {
        rows,
        summary,
        seeds: spectra.seeds,
    })
}

/// Writes `dims.csv`, `dims_summary.csv` and `manifest.json` into `out_dir`.
pub fn run_dimension_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let result = compute_dimension_sweep(cfg)?;
    ensure_dir(out_dir)?;
    let mut outputs = Vec::new();
    let mut rows = String::from("estimator,N,t,rep,k,no_gap\n");
    for r in &result.rows {
        rows.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.estimator.as_str(),
            r.n,
            fmt9(r.t),
            r.rep,
            r.k,
            r.no_gap
        ));
    }
    write_text(out_dir, "dims.csv", &rows, &mut outputs)?;
    let mut summary = String::from("estimator,N,t,reps,mean_k,no_gap_rate,match_rate\n");
    for s in &result.summary {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.estimator.as_str(),
            s.n,
            fmt9(s.t),
            s.reps,
            fmt9(s.mean_k),
            fmt9(s.no_gap_rate),
            fmt9(s.match_rate)
        ));
    }
    write_text(out_dir, "dims_summary.csv", &summary, &mut outputs)?;
    let mut manifest = RunManifest::new("dims", cfg, result.seeds, started);
    manifest.outputs = outputs;
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Writes one dataset CSV per `(N, repetition)` plus `manifest.json`.
pub fn run_generate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let started = Instant::now();
    ensure_dir(out_dir)?;
    let reps = if cfg.fresh_dataset_per_rep { cfg.repetitions } else { 1 };
    let jobs: Vec<(usize, usize)> = (0..cfg.n_list.len())
        .flat_map(|ni| (0..reps).map(move |r| (ni, r)))
        .collect();
    let names: Vec<String> = jobs
        .par_iter()
        .map(|&(ni, rep)| {
            let n = cfg.n_list[ni];
            let ds = sample_dataset(&cfg.spec, n, dataset_seed(cfg, ni, rep))?;
            let name = format!("dataset_N{n}_rep{rep}.csv");
            ds.write_csv(&out_dir.join(&name))?;
            Ok(name)
        })
        .collect::<Result<_>>()?;
    let seeds = jobs
        .iter()
        .map(|&(ni, rep)| CellSeed {
            estimator: EstimatorKind::Empirical,
            n: cfg.n_list[ni],
            t_index: 0,
            rep,
            seed: dataset_seed(cfg, ni, rep),
            dataset_seed: Some(dataset_seed(cfg, ni, rep)),
        })
        .collect();
    let mut manifest = RunManifest::new("generate", cfg, seeds, started);
    manifest.outputs = names;
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Spec whose variances are the eigenvalues of `FᵀF` for a `d×m` matrix `F`
/// with i.i.d. `N(0, s²)` entries; the covariance `FFᵀ` seen in its eigenbasis.
pub fn random_projection_spec(d: usize, m: usize, scale: f64, seed: u64) -> Result<ManifoldSpec> {
    let mut rng = rng_from_seed(seed);
    let f = DMatrix::from_fn(d, m, |_, _| scale * standard_normal(&mut rng));
    let gram = f.transpose() * &f;
    let eig: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ManifoldSpec::from_variances(d, &eig)
}

fn random_state(d: usize, scale: f64, seed: u64) -> StateVector {
    let mut rng = rng_from_seed(seed);
    DVector::from_fn(d, |_, _| scale * standard_normal(&mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcMode {
    /// `(α, t_c exact, t_c closed form)` at one random state.
    AlphaSweep,
    /// `(ω²(x), t_c exact)` over many random states at fixed `α`.
    Positions,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub tc_exact: Option<f64>,
    pub tc_approx: f64,
    pub residual: Option<f64>,
    pub multiple_roots: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositionRow {
    pub sample: usize,
    pub omega2: f64,
    pub tc_exact: Option<f64>,
    pub tc_approx: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TcComparison {
    pub spec: ManifoldSpec,
    pub alpha_rows: Vec<AlphaRow>,
    pub position_rows: Vec<PositionRow>,
}

impl TcComparison {
    /// Spearman correlation of `ω²` and exact `t_c` over successful rows.
    pub fn position_spearman(&self) -> Option<f64> {
        let ok: Vec<&PositionRow> = self.position_rows.iter().filter(|r| r.tc_exact.is_some()).collect();
        if ok.len() < 3 {
            return None;
        }
        let w: Vec<f64> = ok.iter().map(|r| r.omega2).collect();
        let t: Vec<f64> = ok.iter().filter_map(|r| r.tc_exact).collect();
        Some(spearman(&w, &t))
    }
}

/// Condensation times for the random-projection spec of `cfg`. Root-finding
/// failures are recorded in the row instead of aborting the run.
pub fn run_tc_comparison(cfg: &TcComparisonConfig, seed: u64, modes: &[TcMode]) -> Result<TcComparison> {
    let spec = random_projection_spec(cfg.ambient_dim, cfg.manifold_dim, cfg.projection_scale, derive_seed(seed, &[TC_TAG, 0]))?;
    let d = cfg.ambient_dim;
    let mut alpha_rows = Vec::new();
    let mut position_rows = Vec::new();
    if modes.contains(&TcMode::AlphaSweep) {
        let x = random_state(d, cfg.x_scale, derive_seed(seed, &[TC_TAG, 1]));
        alpha_rows = cfg
            .alpha_grid
            .values()
            .par_iter()
            .map(|&alpha| {
                let tc_approx = tc_approx_alpha(&spec, &x, alpha)?;
                Ok(match tc_exact(&spec, &x, alpha) {
                    Ok(sol) => AlphaRow {
                        alpha,
                        tc_exact: Some(sol.t),
                        tc_approx,
                        residual: Some(sol.residual),
                        multiple_roots: sol.multiple_roots,
                        error: None,
                    },
                    Err(e) => AlphaRow {
                        alpha,
                        tc_exact: None,
                        tc_approx,
                        residual: None,
                        multiple_roots: false,
                        error: Some(e.to_string()),
                    },
                })
            })
            .collect::<Result<_>>()?;
    }
    if modes.contains(&TcMode::Positions) {
        position_rows = (0..cfg.samples)
            .into_par_iter()
            .map(|i| {
                let x = random_state(d, cfg.x_scale, derive_seed(seed, &[TC_TAG, 2, i as u64]));
                let omega2 = variance_density(&spec, &x)?;
                let tc_approx = tc_approx_alpha(&spec, &x, cfg.alpha)?;
                let (tc_exact, error) = match tc_exact(&spec, &x, cfg.alpha) {
                    Ok(sol) => (Some(sol.t), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                Ok(PositionRow {
                    sample: i,
                    omega2,
                    tc_exact,
                    tc_approx,
                    error,
                })
            })
            .collect::<Result<_>>()?;
    }
    Ok(TcComparison {
        spec,
        alpha_rows,
        position_rows,
    })
}

fn opt9(v: Option<f64>) -> String {
    v.map(fmt9).unwrap_or_default()
}

fn csv_field(s: &Option<String>) -> String {
    s.as_deref().map(|e| format!("\"{}\"", e.replace('"', "'"))).unwrap_or_default()
}

/// Writes `tc_alpha.csv` and/or `tc_positions.csv` plus `manifest.json`.
pub fn write_tc_comparison(cfg: &ExperimentConfig, modes: &[TcMode], out_dir: &Path) -> Result<(TcComparison, RunManifest)> {
    cfg.validate()?;
    let started = Instant::now();
    let result = run_tc_comparison(&cfg.tc_comparison, cfg.master_seed, modes)?;
    ensure_dir(out_dir)?;
    let mut outputs = Vec::new();
    if modes.contains(&TcMode::AlphaSweep) {
        let mut s = String::from("alpha,tc_exact,tc_approx,residual,multiple_roots,error\n");
        for r in &result.alpha_rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt9(r.alpha),
                opt9(r.tc_exact),
                fmt9(r.tc_approx),
                opt9(r.residual),
                r.multiple_roots,
                csv_field(&r.error)
            ));
        }
        write_text(out_dir, "tc_alpha.csv", &s, &mut outputs)?;
    }
    if modes.contains(&TcMode::Positions) {
        let mut s = String::from("sample,omega2,tc_exact,tc_approx,error\n");
        for r in &result.position_rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.sample,
                fmt9(r.omega2),
                opt9(r.tc_exact),
                fmt9(r.tc_approx),
                csv_field(&r.error)
            ));
        }
        write_text(out_dir, "tc_positions.csv", &s, &mut outputs)?;
    }
    let mut manifest = RunManifest::new("tc", cfg, Vec::new(), started);
    manifest.outputs = outputs;
    manifest.write(out_dir)?;
    Ok((result, manifest))
}

#[derive(Debug, Clone)]
pub struct ScoreFileAnalysis {
    pub spectrum: SpectrumRecord,
    pub gaps: Option<GapProfile>,
    pub dimension: DimensionEstimate,
}

/// SVD, gap profile and detected dimension of stored score samples. Never
/// evaluates a score.
pub fn analyze_score_file(path: &Path, c: f64, discard: usize) -> Result<ScoreFileAnalysis> {
    let file = ScoreSampleFile::read(path)?;
    analyze_scores(&file, c, discard)
}

pub fn analyze_scores(file: &ScoreSampleFile, c: f64, discard: usize) -> Result<ScoreFileAnalysis> {
    let x0 = file
        .x0
        .as_ref()
        .map(|v| DVector::from_column_slice(v))
        .unwrap_or_else(|| DVector::zeros(file.dim()));
    let spectrum = singular_spectrum(&file.scores, None, &x0, file.t, "file", Estimator::Forward)?;
    let gaps = if spectrum.len() >= 2 {
        Some(gap_profile(&spectrum)?)
    } else {
        None
    };
    let dimension = detect_dimension(&spectrum, c, discard)?;
    Ok(ScoreFileAnalysis {
        spectrum,
        gaps,
        dimension,
    })
}

/// Writes `spectrum.csv` (+ JSON sidecar) and `dimension.json` into `out_dir`.
pub fn write_analysis(analysis: &ScoreFileAnalysis, x_id: &str, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    crate::spectral::write_spectrum_csv(
        &out_dir.join("spectrum.csv"),
        &[(x_id.to_string(), analysis.spectrum.clone())],
    )?;
    let summary = serde_json::json!({
        "k": analysis.dimension.k,
        "no_gap": analysis.dimension.no_gap,
        "c": analysis.dimension.c,
        "discard": analysis.dimension.discard,
        "threshold": analysis.dimension.threshold,
        "flagged_index": analysis.dimension.flagged_index,
        "trace": analysis.dimension.trace,
        "rank_deficient": analysis.spectrum.rank_deficient,
        "gap_argmax": analysis.gaps.as_ref().map(|g| g.argmax),
    });
    let path = out_dir.join("dimension.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))
}

/// Stores a probe matrix of `oracle` as a score-sample file.
pub fn export_scores(s: &DMatrix<f64>, t: f64, x0: Option<&StateVector>, path: &Path) -> Result<()> {
    ScoreSampleFile {
        t,
        x0: x0.map(|x| x.iter().copied().collect()),
        scores: s.clone(),
    }
    .write(path)
}

/// Reloads a dataset written by [`run_generate`].
pub fn load_dataset(path: &Path, spec: ManifoldSpec) -> Result<Dataset> {
    Dataset::read_csv(path, spec)
}
