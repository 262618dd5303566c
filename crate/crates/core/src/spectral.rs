//! Singular spectra of score Jacobians: probe-based estimates from any
//! [`ScoreOracle`], the random-matrix model of the empirical Jacobian, its
//! mean-field spectrum, gap profiles and intrinsic-dimension detection.
//!
//! Spectra are always stored in descending order. Gaps are indexed from 1:
//! the gap "at k" is `values[k-1] − values[k]`, so for a linear manifold of
//! dimension `m` in `d` ambient dimensions the stiff/soft split sits at
//! `k = d − m`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_time, Error, Result};
use crate::linear_model::{ManifoldSpec, StateVector};
use crate::rem::phi;
use crate::rng::{rng_from_seed, standard_normal, SimRng};
use crate::score::ScoreOracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    Forward,
    Central,
}

/// How the probe directions `ε_i` are drawn.
///
/// `Gaussian` draws i.i.d. standard normals. `Orthogonal` stacks blocks of
/// `√d·Q` with `Q` Haar-orthogonal, so each full block has `Σ εεᵀ = d·I` and
/// a linear oracle is recovered without sampling error once `K` is a
/// multiple of `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeDesign {
    #[default]
    Orthogonal,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Forward,
    Central,
    Analytic,
    RandomMatrix,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Forward => "forward",
            Estimator::Central => "central",
            Estimator::Analytic => "analytic",
            Estimator::RandomMatrix => "random_matrix",
        }
    }
}

impl From<ProbeMode> for Estimator {
    fn from(mode: ProbeMode) -> Self {
        match mode {
            ProbeMode::Forward => Estimator::Forward,
            ProbeMode::Central => Estimator::Central,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    /// Singular values as computed, descending.
    pub values_raw: Vec<f64>,
    /// Factor applied by [`SpectrumRecord::values`].
    pub scale: f64,
    pub x_star: Vec<f64>,
    pub t: f64,
    pub probes: usize,
    pub oracle: String,
    pub estimator: Estimator,
    /// Fewer probes than dimensions; only `probes` values are available.
    pub rank_deficient: bool,
}

impl SpectrumRecord {
    pub fn len(&self) -> usize {
        self.values_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_raw.is_empty()
    }

    /// `values_raw · scale`.
    pub fn values(&self) -> Vec<f64> {
        self.values_raw.iter().map(|v| v * self.scale).collect()
    }
}

/// Default probe count: `max(4d, 100)` rounded up to a multiple of `d`.
pub fn default_probe_count(d: usize) -> usize {
    let k = (4 * d).max(100);
    k.div_ceil(d) * d
}

/// Haar-orthogonal `d×d` matrix from the QR factorization of a Gaussian matrix.
fn haar_orthogonal(d: usize, rng: &mut SimRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| standard_normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// The `d×K` matrix of probe directions for a given seed.
pub fn probe_directions(d: usize, k: usize, seed: u64, design: ProbeDesign) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    match design {
        ProbeDesign::Gaussian => DMatrix::from_fn(d, k, |_, _| standard_normal(&mut rng)),
        ProbeDesign::Orthogonal => {
            let mut eps = DMatrix::zeros(d, k);
            let root_d = (d as f64).sqrt();
            let mut col = 0;
            while col < k {
                let q = haar_orthogonal(d, &mut rng) * root_d;
                let take = d.min(k - col);
                eps.columns_mut(col, take).copy_from(&q.columns(0, take));
                col += take;
            }
            eps
        }
    }
}

/// `d×K` matrix of score evaluations around `x0` at perturbations of size `√t`.
///
/// Forward columns are `s(x0 + √t εᵢ)`; central columns are
/// `(s(x0 + √t εᵢ) − s(x0 − √t εᵢ))/2`. Columns are evaluated in parallel and
/// assembled in probe order.
pub fn score_matrix(
    oracle: &dyn ScoreOracle,
    x0: &StateVector,
    t: f64,
    k: usize,
    seed: u64,
    mode: ProbeMode,
    design: ProbeDesign,
) -> Result<DMatrix<f64>> {
    check_time(t)?;
    check_dim(oracle.dim(), x0.len())?;
    if k == 0 {
        return Err(Error::invalid("K", "need at least one probe"));
    }
    let d = x0.len();
    let eps = probe_directions(d, k, seed, design);
    let step = t.sqrt();
    let columns: Vec<DVector<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let delta = eps.column(i) * step;
            let plus = oracle.evaluate(&(x0 + &delta), t)?;
            match mode {
                ProbeMode::Forward => Ok(plus),
                ProbeMode::Central => {
                    let minus = oracle.evaluate(&(x0 - &delta), t)?;
                    Ok((plus - minus) * 0.5)
                }
            }
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&columns))
}

/// Descending singular values of `s`.
pub fn singular_values(s: &DMatrix<f64>) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Err(Error::invalid("S", "empty matrix"));
    }
    if let Some(bad) = s.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("score matrix entry {bad}")));
    }
    let svd = s.clone().try_svd(false, false, f64::EPSILON, 0).ok_or_else(|| {
        Error::NonFinite("singular value decomposition did not converge".into())
    })?;
    let mut values: Vec<f64> = svd.singular_values.iter().map(|v| v.abs()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Wraps the singular values of a probe matrix in a record.
///
/// `scale` defaults to `√t/√K`, which turns the probe spectrum into that of
/// the normalized Jacobian `t·∂s/∂x`.
pub fn singular_spectrum(
    s: &DMatrix<f64>,
    scale: Option<f64>,
    x_star: &StateVector,
    t: f64,
    oracle: &str,
    estimator: Estimator,
) -> Result<SpectrumRecord> {
    let values_raw = singular_values(s)?;
    let (d, k) = s.shape();
    Ok(SpectrumRecord {
        values_raw,
        scale: scale.unwrap_or_else(|| (t / k as f64).sqrt()),
        x_star: x_star.iter().copied().collect(),
        t,
        probes: k,
        oracle: oracle.to_string(),
        estimator,
        rank_deficient: k < d,
    })
}

/// Probe matrix plus SVD in one call.
#[allow(clippy::too_many_arguments)]
pub fn estimate_spectrum(
    oracle: &dyn ScoreOracle,
    x0: &StateVector,
    t: f64,
    k: usize,
    seed: u64,
    mode: ProbeMode,
    design: ProbeDesign,
) -> Result<SpectrumRecord> {
    let s = score_matrix(oracle, x0, t, k, seed, mode, design)?;
    singular_spectrum(&s, None, x0, t, oracle.kind().as_str(), mode.into())
}

/// Column `j` is `[s(x + √t eⱼ) − s(x)]/√t`.
pub fn smoothed_jacobian(oracle: &dyn ScoreOracle, x: &StateVector, t: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    check_dim(oracle.dim(), x.len())?;
    let d = x.len();
    let step = t.sqrt();
    let base = oracle.evaluate(x, t)?;
    let columns: Vec<DVector<f64>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut xp = x.clone();
            xp[j] += step;
            Ok((oracle.evaluate(&xp, t)? - &base) / step)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&columns))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    /// `gaps[i] = values[i] − values[i+1]`.
    pub gaps: Vec<f64>,
    /// 1-based position of the largest gap (smallest on ties).
    pub argmax: usize,
}

impl GapProfile {
    /// The gap between `values[k-1]` and `values[k]`.
    pub fn at(&self, k: usize) -> f64 {
        self.gaps[k - 1]
    }
}

pub fn gap_profile_of(values: &[f64]) -> Result<GapProfile> {
    if values.len() < 2 {
        return Err(Error::invalid("spectrum", "need at least two values for a gap"));
    }
    let gaps: Vec<f64> = values.windows(2).map(|w| w[0] - w[1]).collect();
    let mut argmax = 0;
    for (i, g) in gaps.iter().enumerate() {
        if *g > gaps[argmax] {
            argmax = i;
        }
    }
    Ok(GapProfile { gaps, argmax: argmax + 1 })
}

/// Gaps of the scaled spectrum.
pub fn gap_profile(record: &SpectrumRecord) -> Result<GapProfile> {
    gap_profile_of(&record.values())
}

/// `σ²(1+α_m^{-1/2})² / (t + σ²(1+α_m^{-1/2})²)`.
pub fn theoretical_gap(sigma2: f64, t: f64, alpha_m: f64) -> Result<f64> {
    check_time(t)?;
    if !(alpha_m > 0.0 && alpha_m <= 1.0) {
        return Err(Error::invalid("alpha_m", format!("must lie in (0, 1], got {alpha_m}")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("sigma2", format!("must be nonnegative, got {sigma2}")));
    }
    let a = sigma2 * (1.0 + alpha_m.powf(-0.5)).powi(2);
    Ok(a / (t + a))
}

/// Condensation time as a function of position.
pub type TcAt<'a> = &'a (dyn Fn(&StateVector) -> Result<f64> + Sync);

/// `φ(t, 0)` and `φ(t, eⱼ√t)` for every `j`.
fn phi_terms(spec: &ManifoldSpec, t: f64, n: usize, tc_at: TcAt) -> Result<(f64, Vec<f64>)> {
    let d = spec.ambient_dim();
    let origin = DVector::zeros(d);
    let phi0 = phi(t, tc_at(&origin)?, n)?;
    let step = t.sqrt();
    let mut per_dir = Vec::with_capacity(d);
    for j in 0..d {
        let mut e = DVector::zeros(d);
        e[j] = step;
        per_dir.push(phi(t, tc_at(&e)?, n)?);
    }
    Ok((phi0, per_dir))
}

/// One draw of the random empirical Jacobian: independent entries with mean
/// `−δᵢⱼ/(t+σᵢ²)` and variance `σᵢ²/(t(t+σᵢ²))·[φ(t,0) + φ(t,eⱼ√t)]`.
pub fn random_matrix_jacobian(
    spec: &ManifoldSpec,
    t: f64,
    n: usize,
    tc_at: TcAt,
    seed: u64,
) -> Result<DMatrix<f64>> {
    check_time(t)?;
    let (phi0, phis) = phi_terms(spec, t, n, tc_at)?;
    Ok(random_jacobian_with(spec.variances(), t, |j| phi0 + phis[j], seed))
}

fn random_jacobian_with(variances: &[f64], t: f64, fluct: impl Fn(usize) -> f64, seed: u64) -> DMatrix<f64> {
    let d = variances.len();
    let mut rng = rng_from_seed(seed);
    let mut j_mat = DMatrix::zeros(d, d);
    // column-major fill keeps the stream order fixed
    for j in 0..d {
        let f = fluct(j);
        for i in 0..d {
            let v = variances[i];
            let mean = if i == j { -1.0 / (t + v) } else { 0.0 };
            let sd = (v / (t * (t + v)) * f).sqrt();
            j_mat[(i, j)] = mean + sd * standard_normal(&mut rng);
        }
    }
    j_mat
}

/// Spectrum of one random-matrix Jacobian draw, scaled by `t`.
pub fn random_matrix_spectrum(
    spec: &ManifoldSpec,
    t: f64,
    n: usize,
    tc_at: TcAt,
    seed: u64,
) -> Result<SpectrumRecord> {
    let j = random_matrix_jacobian(spec, t, n, tc_at, seed)?;
    let d = spec.ambient_dim();
    let mut rec = singular_spectrum(&j, Some(t), &DVector::zeros(d), t, "random_matrix", Estimator::RandomMatrix)?;
    rec.probes = d;
    Ok(rec)
}

/// `s̄ᵢ = sqrt((t+σᵢ²)⁻² + C·[φ(t,0) + φ(t,eᵢ√t)]²)` with
/// `C = Σₖ σₖ²/(t²(t+σₖ²)²)`, sorted descending and scaled by `t`.
pub fn predicted_spectrum(spec: &ManifoldSpec, t: f64, n: usize, tc_at: TcAt) -> Result<SpectrumRecord> {
    check_time(t)?;
    if n < 2 {
        return Err(Error::invalid("n", "need N >= 2"));
    }
    let (phi0, phis) = phi_terms(spec, t, n, tc_at)?;
    let mut values = predicted_values(spec.variances(), t, |i| phi0 + phis[i]);
    values.sort_by(|a, b| b.total_cmp(a));
    let d = spec.ambient_dim();
    Ok(SpectrumRecord {
        values_raw: values,
        scale: t,
        x_star: vec![0.0; d],
        t,
        probes: d,
        oracle: "analytic".into(),
        estimator: Estimator::Analytic,
        rank_deficient: false,
    })
}

fn predicted_values(variances: &[f64], t: f64, fluct: impl Fn(usize) -> f64) -> Vec<f64> {
    let c: f64 = variances
        .iter()
        .map(|v| v / (t * t * (t + v).powi(2)))
        .sum();
    variances
        .iter()
        .enumerate()
        .map(|(i, v)| ((t + v).powi(-2) + c * fluct(i).powi(2)).sqrt())
        .collect()
}

/// Relative floor under which second differences count as round-off.
pub const DETECT_NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub k: usize,
    pub c: f64,
    pub discard: usize,
    /// `|v[j-1] − 2v[j] + v[j+1]|` for interior `j` of the retained values.
    pub trace: Vec<f64>,
    pub threshold: f64,
    /// Index into the full spectrum of the first flagged point, if any.
    pub flagged_index: Option<usize>,
    pub no_gap: bool,
}

/// First index after `discard` where the absolute second difference exceeds
/// `c` times its median; `k = d − (j + 1)` for that index `j`.
pub fn detect_dimension_of(values: &[f64], c: f64, discard: usize) -> Result<DimensionEstimate> {
    let d = values.len();
    if d < discard + 3 {
        return Err(Error::invalid(
            "discard",
            format!("need at least 3 values after discarding {discard} of {d}"),
        ));
    }
    if !(c > 0.0) {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    let kept = &values[discard..];
    let trace: Vec<f64> = kept
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]).abs())
        .collect();
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = (c * crate::numerics::median(&trace)).max(DETECT_NOISE_FLOOR * top);
    let flagged_index = trace
        .iter()
        .position(|&v| v > threshold)
        .map(|p| p + 1 + discard);
    let k = flagged_index.map_or(0, |j| d - (j + 1));
    Ok(DimensionEstimate {
        k,
        c,
        discard,
        trace,
        threshold,
        flagged_index,
        no_gap: flagged_index.is_none(),
    })
}

pub fn detect_dimension(record: &SpectrumRecord, c: f64, discard: usize) -> Result<DimensionEstimate> {
    detect_dimension_of(&record.values(), c, discard)
}

/// Writes `x_id,t,estimator,index,value` rows (scaled values, 1-based index)
/// and a JSON sidecar `<path>.json` with the record metadata.
pub fn write_spectrum_csv(path: &Path, records: &[(String, SpectrumRecord)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "x_id,t,estimator,index,value").map_err(io)?;
    for (x_id, rec) in records {
        for (i, v) in rec.values().iter().enumerate() {
            writeln!(w, "{x_id},{:?},{},{},{:?}", rec.t, rec.estimator.as_str(), i + 1, v).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    let sidecar = path.with_extension("json");
    let meta: Vec<serde_json::Value> = records
        .iter()
        .map(|(x_id, rec)| {
            serde_json::json!({
                "x_id": x_id,
                "t": rec.t,
                "estimator": rec.estimator,
                "oracle": rec.oracle,
                "probes": rec.probes,
                "scale": rec.scale,
                "rank_deficient": rec.rank_deficient,
                "x_star": rec.x_star,
            })
        })
        .collect();
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
}
