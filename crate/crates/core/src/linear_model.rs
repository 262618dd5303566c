//! Linear-manifold Gaussian data model.
//!
//! Data live on a coordinate-aligned linear subspace: coordinate `i` of a data
//! point is a centered normal with variance `σ²(i)`, and the variances come in
//! blocks. Blocks are kept sorted by descending variance and laid out from
//! coordinate 0 onwards; coordinates not covered by a block have zero variance.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_time, Error, Result};
use crate::rng::{rng_from_seed, standard_normal};

pub type StateVector = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub dim: usize,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    ambient_dim: usize,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ManifoldSpec {
    ambient_dim: usize,
    blocks: Vec<Block>,
    variances: Vec<f64>,
}

impl TryFrom<RawSpec> for ManifoldSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        ManifoldSpec::new(raw.ambient_dim, raw.blocks)
    }
}

impl From<ManifoldSpec> for RawSpec {
    fn from(spec: ManifoldSpec) -> Self {
        RawSpec {
            ambient_dim: spec.ambient_dim,
            blocks: spec.blocks,
        }
    }
}

impl ManifoldSpec {
    pub fn new(ambient_dim: usize, mut blocks: Vec<Block>) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::invalid("ambient_dim", "must be positive"));
        }
        if blocks.iter().any(|b| b.dim == 0) {
            return Err(Error::invalid("blocks", "block dimensions must be positive"));
        }
        if blocks.iter().any(|b| !(b.variance >= 0.0) || !b.variance.is_finite()) {
            return Err(Error::invalid("blocks", "variances must be finite and >= 0"));
        }
        let used: usize = blocks.iter().map(|b| b.dim).sum();
        if used > ambient_dim {
            return Err(Error::invalid(
                "blocks",
                format!("block dimensions sum to {used} > ambient_dim {ambient_dim}"),
            ));
        }
        if !blocks.iter().any(|b| b.variance > 0.0) {
            return Err(Error::invalid("blocks", "at least one variance must be positive"));
        }
        // stable: equal variances keep their input order
        blocks.sort_by(|a, b| b.variance.total_cmp(&a.variance));

        let mut variances = Vec::with_capacity(ambient_dim);
        for b in &blocks {
            variances.extend(std::iter::repeat_n(b.variance, b.dim));
        }
        variances.resize(ambient_dim, 0.0);

        Ok(Self {
            ambient_dim,
            blocks,
            variances,
        })
    }

    /// One block of dimension 1 per positive entry of `variances`.
    pub fn from_variances(ambient_dim: usize, variances: &[f64]) -> Result<Self> {
        let blocks = variances
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| Block { dim: 1, variance: v })
            .collect();
        Self::new(ambient_dim, blocks)
    }

    pub fn isotropic(ambient_dim: usize, variance: f64) -> Result<Self> {
        Self::new(
            ambient_dim,
            vec![Block {
                dim: ambient_dim,
                variance,
            }],
        )
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Per-coordinate variances `σ²(i)`, length `d`.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn manifold_dim(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.variance > 0.0)
            .map(|b| b.dim)
            .sum()
    }

    /// Number of sorted-descending Jacobian singular values that sit above the
    /// gap separating block `b` from everything with larger variance.
    pub fn gap_position_before_block(&self, b: usize) -> usize {
        self.ambient_dim - self.blocks[..b].iter().map(|blk| blk.dim).sum::<usize>()
    }
}

/// `N` points drawn from the linear model; stored one point per column.
#[derive(Debug, Clone)]
pub struct Dataset {
    spec: ManifoldSpec,
    points: DMatrix<f64>,
    sq_norms: Vec<f64>,
    seed: u64,
}

impl Dataset {
    pub fn from_points(spec: ManifoldSpec, points: DMatrix<f64>, seed: u64) -> Result<Self> {
        check_dim(spec.ambient_dim(), points.nrows())?;
        if points.ncols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset points".into()));
        }
        let sq_norms = points.column_iter().map(|c| c.norm_squared()).collect();
        Ok(Self {
            spec,
            points,
            sq_norms,
            seed,
        })
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `d × N` matrix, one point per column.
    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, mu: usize) -> DVectorView<'_, f64> {
        self.points.column(mu)
    }

    pub fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    /// Writes one point per row, preceded by `# d=<d> N=<N> seed=<seed>`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "# d={} N={} seed={}", self.dim(), self.len(), self.seed);
        for col in self.points.column_iter() {
            let row: Vec<String> = col.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a dataset written by [`Dataset::write_csv`]. Points must have zero
    /// coordinates wherever `spec` has zero variance.
    pub fn read_csv(path: &Path, spec: ManifoldSpec) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let d = spec.ambient_dim();
        let mut seed = 0;
        let mut values = Vec::new();
        let mut rows = 0usize;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for tok in header.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("seed=") {
                        seed = v.parse().map_err(|_| Error::MalformedHeader {
                            path: path.into(),
                            reason: format!("bad seed `{v}`"),
                        })?;
                    } else if let Some(v) = tok.strip_prefix("d=") {
                        if v.parse::<usize>().ok() != Some(d) {
                            return Err(Error::MalformedHeader {
                                path: path.into(),
                                reason: format!("d={v} does not match spec dimension {d}"),
                            });
                        }
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d {
                return Err(Error::ShapeMismatch {
                    path: path.into(),
                    line: lineno,
                    reason: format!("expected {d} values, found {}", fields.len()),
                });
            }
            for (col, f) in fields.iter().enumerate() {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: lineno,
                    reason: format!("cannot parse `{f}` as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteEntry {
                        path: path.into(),
                        line: lineno,
                        column: col + 1,
                    });
                }
                values.push(v);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::EmptyDataset);
        }
        let points = DMatrix::from_vec(d, rows, values);
        for (i, &var) in spec.variances().iter().enumerate() {
            if var == 0.0 && points.row(i).iter().any(|&v| v != 0.0) {
                return Err(Error::invalid(
                    "dataset",
                    format!("coordinate {i} has zero variance but nonzero entries"),
                ));
            }
        }
        Dataset::from_points(spec, points, seed)
    }
}

/// Draws `n` i.i.d. points. Only positive-variance coordinates consume normal
/// draws, in point-major order; the rest are exactly zero.
pub fn sample_dataset(spec: &ManifoldSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("n", "dataset size must be at least 1"));
    }
    let d = spec.ambient_dim();
    let stds: Vec<f64> = spec.variances().iter().map(|v| v.sqrt()).collect();
    let mut rng = rng_from_seed(seed);
    let mut points = DMatrix::zeros(d, n);
    for mut col in points.column_iter_mut() {
        for (x, &s) in col.iter_mut().zip(&stds) {
            if s > 0.0 {
                *x = s * standard_normal(&mut rng);
            }
        }
    }
    Dataset::from_points(spec.clone(), points, seed)
}

/// `ω²(x) = d⁻¹ Σ xᵢ² σ²(i)`.
pub fn variance_density(spec: &ManifoldSpec, x: &StateVector) -> Result<f64> {
    check_dim(spec.ambient_dim(), x.len())?;
    let sum: f64 = x
        .iter()
        .zip(spec.variances())
        .map(|(xi, v)| xi * xi * v)
        .sum();
    Ok(sum / spec.ambient_dim() as f64)
}

/// Second and fourth variance moments `(d⁻¹ Σ σ², d⁻¹ Σ σ⁴)`.
pub fn norm_moments(spec: &ManifoldSpec) -> (f64, f64) {
    let d = spec.ambient_dim() as f64;
    spec.blocks().iter().fold((0.0, 0.0), |(r2, r4), b| {
        let m = b.dim as f64;
        (r2 + m * b.variance / d, r4 + m * b.variance * b.variance / d)
    })
}

/// Draws from `p(x₀ | x; t)`: independent coordinates with mean `σ²x/(σ²+t)`
/// and variance `tσ²/(σ²+t)`.
pub fn posterior_sample(
    spec: &ManifoldSpec,
    x: &StateVector,
    t: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<StateVector>> {
    check_time(t)?;
    check_dim(spec.ambient_dim(), x.len())?;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(posterior_draw(spec, x, t, &mut rng));
    }
    Ok(out)
}

pub(crate) fn posterior_draw(
    spec: &ManifoldSpec,
    x: &StateVector,
    t: f64,
    rng: &mut crate::rng::SimRng,
) -> StateVector {
    DVector::from_iterator(
        x.len(),
        x.iter().zip(spec.variances()).map(|(&xi, &v)| {
            if v > 0.0 {
                let mean = v * xi / (v + t);
                let sd = (t * v / (v + t)).sqrt();
                mean + sd * standard_normal(rng)
            } else {
                0.0
            }
        }),
    )
}
