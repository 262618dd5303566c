//! Positional random-energy-model thermodynamics of the empirical score.
//!
//! `zeta` is the finite-`d` moment generating function of the energies at a
//! fixed state `x`; condensation happens where `α + ζ(1) − ζ′(1) = 0` with
//! `α = log N / d`. The closed form [`tc_approx`] is its large-`t` expansion.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_time, Error, Result};
use crate::linear_model::{norm_moments, variance_density, Dataset, ManifoldSpec, StateVector};
use crate::score::log_partition;

pub const TC_BRACKET: (f64, f64) = (1e-8, 1e6);
pub const TC_MAX_ITER: usize = 200;
/// Log-spaced scan points used to locate sign changes before bisecting.
const TC_SCAN_POINTS: usize = 400;

fn zeta_terms(
    spec: &ManifoldSpec,
    x: &StateVector,
    t: f64,
    lambda: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    check_time(t)?;
    check_dim(spec.ambient_dim(), x.len())?;
    for &v in spec.variances() {
        let u = 1.0 + lambda * v / t;
        if u <= 0.0 {
            return Err(Error::LogDomain(u));
        }
    }
    Ok(spec
        .variances()
        .iter()
        .zip(x.iter())
        .map(|(&v, &xi)| (v, xi, 1.0 + lambda * v / t))
        .collect())
}

/// `ζ(λ) = d⁻¹[−½ Σ log(1 + λσ²/t) + (λ²/2t²) Σ x²σ²/(1 + λσ²/t)]`.
pub fn zeta(spec: &ManifoldSpec, x: &StateVector, t: f64, lambda: f64) -> Result<f64> {
    let d = spec.ambient_dim() as f64;
    let (mut logs, mut quad) = (0.0, 0.0);
    for (v, xi, u) in zeta_terms(spec, x, t, lambda)? {
        logs += u.ln();
        quad += xi * xi * v / u;
    }
    Ok((-0.5 * logs + lambda * lambda / (2.0 * t * t) * quad) / d)
}

pub fn zeta_prime(spec: &ManifoldSpec, x: &StateVector, t: f64, lambda: f64) -> Result<f64> {
    let d = spec.ambient_dim() as f64;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (v, xi, u) in zeta_terms(spec, x, t, lambda)? {
        a += v / u;
        b += xi * xi * v / u;
        c += xi * xi * v * v / (u * u);
    }
    Ok((-a / (2.0 * t) + lambda / (t * t) * b - lambda * lambda / (2.0 * t * t * t) * c) / d)
}

/// `α + ζ(1; t) − ζ′(1; t)`.
pub fn condensation_condition(spec: &ManifoldSpec, x: &StateVector, t: f64, alpha: f64) -> Result<f64> {
    Ok(alpha + zeta(spec, x, t, 1.0)? - zeta_prime(spec, x, t, 1.0)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TcSolution {
    pub t: f64,
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
    /// More than one sign change was seen; `t` is the smallest root.
    pub multiple_roots: bool,
}

/// Smallest root of the condensation condition in [`TC_BRACKET`], by a
/// log-grid scan followed by geometric bisection.
pub fn tc_exact(spec: &ManifoldSpec, x: &StateVector, alpha: f64) -> Result<TcSolution> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    let g = |t: f64| condensation_condition(spec, x, t, alpha);
    let (lo, hi) = TC_BRACKET;
    let grid = crate::numerics::logspace(lo, hi, TC_SCAN_POINTS);
    let mut values = Vec::with_capacity(grid.len());
    for &t in &grid {
        values.push(g(t)?);
    }
    let crossings: Vec<usize> = (0..grid.len() - 1)
        .filter(|&i| values[i] == 0.0 || values[i].signum() != values[i + 1].signum())
        .collect();
    let Some(&first) = crossings.first() else {
        return Err(Error::NoSignChange { lo, hi });
    };
    let multiple_roots = crossings.len() > 1;

    let (mut a, mut b) = (grid[first], grid[first + 1]);
    let (mut ga, mut gb) = (values[first], values[first + 1]);
    let mut iterations = 0;
    while iterations < TC_MAX_ITER && ga != 0.0 {
        let mid = (a * b).sqrt();
        if !(mid > a && mid < b) {
            break;
        }
        let gm = g(mid)?;
        iterations += 1;
        if gm == 0.0 {
            a = mid;
            ga = 0.0;
            break;
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
            gb = gm;
        }
    }
    let (t, residual) = if ga.abs() <= gb.abs() { (a, ga) } else { (b, gb) };
    Ok(TcSolution {
        t,
        residual,
        iterations,
        bracket: (lo, hi),
        multiple_roots,
    })
}

pub fn alpha_from_n(n: usize, d: usize) -> f64 {
    (n as f64).ln() / d as f64
}

/// `sqrt((r₄/2 + ω²(x)) / (2α))` with `α = log N / d`.
pub fn tc_approx(spec: &ManifoldSpec, x: &StateVector, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("n", "closed-form condensation time needs N >= 2"));
    }
    tc_approx_alpha(spec, x, alpha_from_n(n, spec.ambient_dim()))
}

pub fn tc_approx_alpha(spec: &ManifoldSpec, x: &StateVector, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    let (_, r4) = norm_moments(spec);
    let omega2 = variance_density(spec, x)?;
    Ok(((0.5 * r4 + omega2) / (2.0 * alpha)).sqrt())
}

/// `t_c = 0` is accepted and means the state never condenses.
fn check_tc(tc: f64) -> Result<()> {
    if tc >= 0.0 && tc.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("tc", format!("must be nonnegative, got {tc}")))
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {v}")))
    }
}

/// `max(1/N, 1/t − 1/t_c)`.
pub fn phi(t: f64, tc: f64, n: usize) -> Result<f64> {
    check_time(t)?;
    check_tc(tc)?;
    if n < 1 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    Ok((1.0 / n as f64).max(1.0 / t - 1.0 / tc))
}

/// `φ(t, x)` together with where it was evaluated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiValue {
    pub t: f64,
    pub x: Vec<f64>,
    pub value: f64,
}

/// `φ(t, x)` with `t_c(x)` from the chosen method.
pub fn phi_at(spec: &ManifoldSpec, x: &StateVector, t: f64, n: usize, method: TcMethod) -> Result<PhiValue> {
    let tc = condensation_time(spec, x, n, method)?;
    Ok(PhiValue {
        t,
        x: x.iter().copied().collect(),
        value: phi(t, tc, n)?,
    })
}

/// Number of patterns effectively averaged by the empirical score:
/// `min(N, t_c/(t_c − t))` below `t_c`, `N` above.
pub fn effective_n(t: f64, tc: f64, n: usize) -> Result<f64> {
    check_time(t)?;
    check_tc(tc)?;
    if n < 1 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let cap = n as f64;
    if t < tc {
        Ok(cap.min(tc / (tc - t)))
    } else {
        Ok(cap)
    }
}

/// `Y = Z(2β)/Z(β)²` at `β = 1/t`; equals `Σ w_μ²`.
pub fn participation_ratio(dataset: &Dataset, x: &StateVector, t: f64) -> Result<f64> {
    check_time(t)?;
    let beta = 1.0 / t;
    Ok((log_partition(dataset, x, 2.0 * beta)? - 2.0 * log_partition(dataset, x, beta)?).exp())
}

/// `1 − t/t_c`, defined on `0 < t ≤ t_c`.
pub fn expected_participation(t: f64, tc: f64) -> Result<f64> {
    check_time(t)?;
    check_positive("tc", tc)?;
    if t > tc {
        return Err(Error::invalid(
            "t",
            format!("t = {t} exceeds t_c = {tc}; only defined in the condensed phase"),
        ));
    }
    Ok(1.0 - t / tc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcMethod {
    Approx,
    Exact,
}

/// Condensation time at `x` for a dataset of size `n`, by either method.
pub fn condensation_time(spec: &ManifoldSpec, x: &StateVector, n: usize, method: TcMethod) -> Result<f64> {
    match method {
        TcMethod::Approx => tc_approx(spec, x, n),
        TcMethod::Exact => {
            if n < 2 {
                return Err(Error::invalid("n", "condensation time needs N >= 2"));
            }
            Ok(tc_exact(spec, x, alpha_from_n(n, spec.ambient_dim()))?.t)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondensationProfile {
    pub x: Vec<f64>,
    pub alpha: f64,
    pub t_c_exact: Option<TcSolution>,
    pub t_c_approx: f64,
}

pub fn condensation_profile(spec: &ManifoldSpec, x: &StateVector, alpha: f64) -> Result<CondensationProfile> {
    let t_c_approx = tc_approx_alpha(spec, x, alpha)?;
    let t_c_exact = match tc_exact(spec, x, alpha) {
        Ok(sol) => Some(sol),
        Err(Error::NoSignChange { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(CondensationProfile {
        x: x.iter().copied().collect(),
        alpha,
        t_c_exact,
        t_c_approx,
    })
}
