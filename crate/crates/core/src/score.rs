//! Score functions of the linear model: exact, empirical (finite training
//! set), active-sample approximation and stored samples, all behind
//! [`ScoreOracle`].
//!
//! Energy convention: `E_μ(x) = ½‖y^μ‖² − x·y^μ`, so the Boltzmann weights
//! `exp(−E_μ/t)/Z` coincide with the posterior pattern weights of the
//! Gaussian mixture. Everything is accumulated in log space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_time, Error, Result};
use crate::linear_model::{posterior_draw, Dataset, ManifoldSpec, StateVector};
use crate::numerics::logsumexp;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Exact,
    Empirical,
    ActiveSample,
    FileBacked,
}

impl OracleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::Exact => "exact",
            OracleKind::Empirical => "empirical",
            OracleKind::ActiveSample => "active_sample",
            OracleKind::FileBacked => "file_backed",
        }
    }
}

/// `s(x, t) = ∇ₓ log p_t(x)`.
pub trait ScoreOracle: Sync {
    fn dim(&self) -> usize;
    fn kind(&self) -> OracleKind;
    fn evaluate(&self, x: &StateVector, t: f64) -> Result<DVector<f64>>;
}

/// Score of `N(0, Λ + tI)`: `sᵢ = −xᵢ/(σ²(i) + t)`.
pub fn exact_score(spec: &ManifoldSpec, x: &StateVector, t: f64) -> Result<DVector<f64>> {
    check_time(t)?;
    check_dim(spec.ambient_dim(), x.len())?;
    Ok(DVector::from_iterator(
        x.len(),
        x.iter().zip(spec.variances()).map(|(xi, v)| -xi / (v + t)),
    ))
}

/// `t · ∂s/∂x`, diagonal with entries `−t/(σ²(i) + t)`.
pub fn exact_normalized_jacobian(spec: &ManifoldSpec, t: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    let diag = DVector::from_iterator(
        spec.ambient_dim(),
        spec.variances().iter().map(|v| -t / (v + t)),
    );
    Ok(DMatrix::from_diagonal(&diag))
}

fn check_dataset(dataset: &Dataset, x: &StateVector) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(dataset.dim(), x.len())
}

fn gaussian_logits(dataset: &Dataset, x: &StateVector, t: f64) -> Vec<f64> {
    let scale = -0.5 / t;
    dataset
        .points()
        .column_iter()
        .map(|y| {
            let sq: f64 = y.iter().zip(x.iter()).map(|(a, b)| (b - a) * (b - a)).sum();
            scale * sq
        })
        .collect()
}

/// `log w_μ(x, t)`: log posterior probability of pattern `μ` given `x`.
pub fn empirical_log_weights(dataset: &Dataset, x: &StateVector, t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    check_dataset(dataset, x)?;
    let mut logits = gaussian_logits(dataset, x, t);
    let lse = logsumexp(&logits);
    logits.iter_mut().for_each(|l| *l -= lse);
    Ok(logits)
}

/// `Σ_μ w_μ (y^μ − x)/t`.
pub fn empirical_score(dataset: &Dataset, x: &StateVector, t: f64) -> Result<DVector<f64>> {
    let log_w = empirical_log_weights(dataset, x, t)?;
    let mut mean = DVector::zeros(x.len());
    for (mu, lw) in log_w.iter().enumerate() {
        let w = lw.exp();
        if w > 0.0 {
            mean.axpy(w, &dataset.point(mu), 1.0);
        }
    }
    Ok((mean - x) / t)
}

#[derive(Debug, Clone)]
pub struct EnergyLevels {
    pub energies: Vec<f64>,
}

/// `E_μ(x) = ½‖y^μ‖² − x·y^μ`.
pub fn energy_levels(dataset: &Dataset, x: &StateVector) -> Result<EnergyLevels> {
    check_dataset(dataset, x)?;
    let energies = dataset
        .points()
        .column_iter()
        .zip(dataset.sq_norms())
        .map(|(y, &n2)| 0.5 * n2 - y.dot(x))
        .collect();
    Ok(EnergyLevels { energies })
}

/// `log Z = log Σ_μ exp(−β E_μ(x))`.
pub fn log_partition(dataset: &Dataset, x: &StateVector, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
    }
    let levels = energy_levels(dataset, x)?;
    let scaled: Vec<f64> = levels.energies.iter().map(|e| -beta * e).collect();
    let z = logsumexp(&scaled);
    if z.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFinite("log partition function".into()))
    }
}

/// Log of the `N`-component mixture density `p_t^N(x)`, assembled from
/// [`log_partition`] at `β = 1/t`.
pub fn log_mixture_density(dataset: &Dataset, x: &StateVector, t: f64) -> Result<f64> {
    check_time(t)?;
    let d = dataset.dim() as f64;
    let n = dataset.len() as f64;
    let log_z = log_partition(dataset, x, 1.0 / t)?;
    Ok(-0.5 * d * (2.0 * std::f64::consts::PI * t).ln() - n.ln() - x.norm_squared() / (2.0 * t)
        + log_z)
}

/// Mean of `(y − x)/t` over `n_active` posterior draws `y ~ p(x₀ | x; t)`.
pub fn active_sample_score(
    spec: &ManifoldSpec,
    x: &StateVector,
    t: f64,
    n_active: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    check_time(t)?;
    check_dim(spec.ambient_dim(), x.len())?;
    if n_active < 1 {
        return Err(Error::invalid("n_active", "must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut acc = DVector::zeros(x.len());
    for _ in 0..n_active {
        acc += posterior_draw(spec, x, t, &mut rng);
    }
    Ok((acc / n_active as f64 - x) / t)
}

/// Predicted per-coordinate variance of the score estimate,
/// `tσ²/(σ²+t) / (n_eff t²)`.
pub fn estimator_variance(
    spec: &ManifoldSpec,
    x: &StateVector,
    t: f64,
    n_eff: f64,
) -> Result<DVector<f64>> {
    check_time(t)?;
    check_dim(spec.ambient_dim(), x.len())?;
    if !(n_eff >= 1.0) {
        return Err(Error::invalid("n_eff", format!("must be >= 1, got {n_eff}")));
    }
    Ok(DVector::from_iterator(
        x.len(),
        spec.variances()
            .iter()
            .map(|v| t * v / (v + t) / (n_eff * t * t)),
    ))
}

#[derive(Debug, Clone)]
pub struct ExactScore {
    pub spec: ManifoldSpec,
}

impl ScoreOracle for ExactScore {
    fn dim(&self) -> usize {
        self.spec.ambient_dim()
    }
    fn kind(&self) -> OracleKind {
        OracleKind::Exact
    }
    fn evaluate(&self, x: &StateVector, t: f64) -> Result<DVector<f64>> {
        exact_score(&self.spec, x, t)
    }
}

#[derive(Debug, Clone)]
pub struct EmpiricalScore {
    pub dataset: Dataset,
}

impl ScoreOracle for EmpiricalScore {
    fn dim(&self) -> usize {
        self.dataset.dim()
    }
    fn kind(&self) -> OracleKind {
        OracleKind::Empirical
    }
    fn evaluate(&self, x: &StateVector, t: f64) -> Result<DVector<f64>> {
        empirical_score(&self.dataset, x, t)
    }
}

/// Active-sample oracle. The stream for each call is derived from `seed` and
/// the bit patterns of `(x, t)`, so repeated calls agree.
#[derive(Debug, Clone)]
pub struct ActiveSampleScore {
    pub spec: ManifoldSpec,
    pub n_active: usize,
    pub seed: u64,
}

impl ScoreOracle for ActiveSampleScore {
    fn dim(&self) -> usize {
        self.spec.ambient_dim()
    }
    fn kind(&self) -> OracleKind {
        OracleKind::ActiveSample
    }
    fn evaluate(&self, x: &StateVector, t: f64) -> Result<DVector<f64>> {
        let mut coords: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        coords.push(t.to_bits());
        let seed = derive_seed(self.seed, &coords);
        active_sample_score(&self.spec, x, t, self.n_active, seed)
    }
}

/// Scores read from a file; answers only at the stored `(x, t)` pairs.
#[derive(Debug, Clone)]
pub struct FileBackedScore {
    pub t: f64,
    pub states: Vec<StateVector>,
    pub scores: Vec<DVector<f64>>,
}

impl ScoreOracle for FileBackedScore {
    fn dim(&self) -> usize {
        self.scores.first().map_or(0, |s| s.len())
    }
    fn kind(&self) -> OracleKind {
        OracleKind::FileBacked
    }
    fn evaluate(&self, x: &StateVector, t: f64) -> Result<DVector<f64>> {
        if t.to_bits() != self.t.to_bits() {
            return Err(Error::StateNotStored);
        }
        self.states
            .iter()
            .position(|s| s.len() == x.len() && s.iter().zip(x.iter()).all(|(a, b)| a == b))
            .map(|i| self.scores[i].clone())
            .ok_or(Error::StateNotStored)
    }
}
