//! Maximizing the discriminant ratio.
//!
//! Two solvers share the regularized pencil `(s_num, s_den + epsilon I)` with
//! `epsilon = epsilon_scale * trace(s_den) / D`:
//!
//! * ratio-trace: rows of `T` are the top-`d` generalized eigenvectors of the pencil.
//! * trace-ratio: the fixed-point iteration `T_t = top-d eigenvectors of
//!   s_num - lambda_t (s_den + epsilon I)`, `lambda_{t+1} = trace(T_t s_num T_t^T) /
//!   trace(T_t (s_den + epsilon I) T_t^T)`, which maximizes the ratio of sums exactly.
//!
//! Either way the returned rows satisfy `v^T (s_den + epsilon I) v = 1` and carry a
//! deterministic sign (largest-magnitude coordinate positive).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::descriptors::{DescriptorSet, EmbeddingModel, ModelConfig};
use crate::error::{Error, Result};
use crate::pairing::PairPartition;
use crate::scatter::{build_scatter, trace_form, BetaWeights, ScatterPair};

pub const DEFAULT_RATIO: f64 = 10.0;
pub const DEFAULT_EPSILON_SCALE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    RatioTrace,
    TraceRatio,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMode::RatioTrace => "ratio-trace",
            SolverMode::TraceRatio => "trace-ratio",
        })
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio-trace" => Ok(SolverMode::RatioTrace),
            "trace-ratio" => Ok(SolverMode::TraceRatio),
            other => Err(Error::InvalidArgument(format!("unknown solver mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Embedding dimension; `None` keeps the input dimension.
    pub output_dim: Option<usize>,
    pub epsilon_scale: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: SolverMode::RatioTrace,
            output_dim: None,
            epsilon_scale: DEFAULT_EPSILON_SCALE,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }
}

impl SolverConfig {
    pub fn resolved_dim(&self, input_dim: usize) -> Result<usize> {
        let d = self.output_dim.unwrap_or(input_dim);
        if d == 0 || d > input_dim {
            return Err(Error::InvalidArgument(format!(
                "output dimension {d} must lie in 1..={input_dim}"
            )));
        }
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon_scale >= 0.0) || !self.epsilon_scale.is_finite() {
            return Err(Error::InvalidArgument("epsilon_scale must be finite and >= 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Equal weight on every pair, the pairwise analogue of LDA.
pub fn preset_lde() -> BetaWeights {
    BetaWeights::uniform()
}

fn check_ratio(r: f64) -> Result<()> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("preset ratio must be finite and > 1, got {r}")));
    }
    Ok(())
}

/// Near pairs emphasized on both sides: `(r, 1, r, 1)`.
pub fn preset_lfda_like(r: f64) -> Result<BetaWeights> {
    check_ratio(r)?;
    BetaWeights::new(r, 1.0, r, 1.0)
}

/// Rel-Far and Irr-Near emphasized: `(1, r, r, 1)`.
pub fn preset_rde(r: f64) -> Result<BetaWeights> {
    check_ratio(r)?;
    BetaWeights::new(1.0, r, r, 1.0)
}

/// Named weighting schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Lde,
    LfdaLike,
    Rde,
}

impl Preset {
    pub fn betas(self, r: f64) -> Result<BetaWeights> {
        match self {
            Preset::Lde => Ok(preset_lde()),
            Preset::LfdaLike => preset_lfda_like(r),
            Preset::Rde => preset_rde(r),
        }
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_pencil(a: &DMatrix<f64>, b: &DMatrix<f64>, d: usize) -> Result<usize> {
    let n = a.nrows();
    if !a.is_square() || !b.is_square() || b.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.nrows(),
        });
    }
    if d == 0 || d > n {
        return Err(Error::InvalidArgument(format!("requested {d} eigenpairs of a {n}x{n} pencil")));
    }
    Ok(n)
}

/// Eigenvalues sorted descending with ties by original index.
fn descending_order(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order
}

fn fix_sign(row: &mut [f64]) {
    let mut best = 0;
    for (idx, v) in row.iter().enumerate() {
        if v.abs() > row[best].abs() {
            best = idx;
        }
    }
    if row[best] < 0.0 {
        row.iter_mut().for_each(|v| *v = -*v);
    }
}

fn apply_sign_convention(t: &mut DMatrix<f64>) {
    for r in 0..t.nrows() {
        let mut row: Vec<f64> = t.row(r).iter().copied().collect();
        fix_sign(&mut row);
        for (c, v) in row.into_iter().enumerate() {
            t[(r, c)] = v;
        }
    }
}

fn quad(v: &[f64], m: &DMatrix<f64>) -> f64 {
    let x = DVector::from_column_slice(v);
    x.dot(&(m * &x))
}

#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// `d x D`, one eigenvector per row, `v^T B v = 1`.
    pub vectors: DMatrix<f64>,
}

/// Top-`d` eigenpairs of `A v = lambda B v` for symmetric `A` and SPD `B`.
///
/// `B` is whitened through its own eigendecomposition `B = U M U^T`, the standard
/// problem `(U M^-1/2)^T A (U M^-1/2)` is solved, and its eigenvectors are mapped back.
pub fn generalized_eigs(s_num: &DMatrix<f64>, s_den_reg: &DMatrix<f64>, d: usize) -> Result<GeneralizedEigen> {
    let n = check_pencil(s_num, s_den_reg, d)?;
    let a = symmetrize(s_num);
    let b = symmetrize(s_den_reg);

    let b_eig = SymmetricEigen::new(b.clone());
    let max_mu = b_eig.eigenvalues.max();
    let min_mu = b_eig.eigenvalues.min();
    if !(max_mu > 0.0) || min_mu <= n as f64 * f64::EPSILON * max_mu {
        return Err(Error::NotPositiveDefinite { min_eig: min_mu });
    }
    let mut whiten = b_eig.eigenvectors.clone();
    for (c, mu) in b_eig.eigenvalues.iter().enumerate() {
        whiten.column_mut(c).scale_mut(1.0 / mu.sqrt());
    }
    let reduced = symmetrize(&(whiten.transpose() * &a * &whiten));
    let c_eig = SymmetricEigen::new(reduced);
    let order = descending_order(&c_eig.eigenvalues);

    let mut vectors = DMatrix::zeros(d, n);
    let mut values = Vec::with_capacity(d);
    for (row, &idx) in order.iter().take(d).enumerate() {
        let col = &whiten * c_eig.eigenvectors.column(idx);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let norm = quad(&v, &b).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        fix_sign(&mut v);
        values.push(quad(&v, &a));
        for (c, x) in v.into_iter().enumerate() {
            vectors[(row, c)] = x;
        }
    }
    // Rayleigh refinement can swap numerically tied neighbours; restore the order.
    let mut rows: Vec<usize> = (0..d).collect();
    rows.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let vectors = vectors.select_rows(rows.iter());
    let values = rows.iter().map(|&i| values[i]).collect();
    Ok(GeneralizedEigen { values, vectors })
}

/// `|A v - lambda B v| / (|A v| + |lambda| |B v|)`.
pub fn eigen_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64, v: &[f64]) -> f64 {
    let x = DVector::from_column_slice(v);
    let av = a * &x;
    let bv = b * &x;
    let denom = av.norm() + lambda.abs() * bv.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (&av - &bv * lambda).norm() / denom
}

#[derive(Debug, Clone)]
pub struct TraceRatioSolution {
    /// `d x D` with orthonormal rows.
    pub projection: DMatrix<f64>,
    pub ratio: f64,
    /// `lambda_0, lambda_1, ...`; `lambda_0 = trace(A) / trace(B)`.
    pub history: Vec<f64>,
}

impl TraceRatioSolution {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

fn top_eigenvectors(m: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let order = descending_order(&eig.eigenvalues);
    let n = m.nrows();
    let mut out = DMatrix::zeros(d, n);
    for (row, &idx) in order.iter().take(d).enumerate() {
        out.row_mut(row).copy_from(&eig.eigenvectors.column(idx).transpose());
    }
    out
}

/// Maximizes `trace(T A T^T) / trace(T B T^T)` over `d x D` matrices with orthonormal
/// rows. Stops once `|lambda_{t+1} - lambda_t| <= tol (1 + |lambda_t|)`.
pub fn trace_ratio(
    s_num: &DMatrix<f64>,
    s_den_reg: &DMatrix<f64>,
    d: usize,
    max_iters: usize,
    tol: f64,
) -> Result<TraceRatioSolution> {
    check_pencil(s_num, s_den_reg, d)?;
    let a = symmetrize(s_num);
    let b = symmetrize(s_den_reg);
    let tb = b.trace();
    if !(tb > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eig: tb });
    }
    let mut lambda = a.trace() / tb;
    let mut history = vec![lambda];
    for _ in 0..max_iters {
        let v = top_eigenvectors(&(&a - &b * lambda), d);
        let den = trace_form(&v, &b);
        if !(den > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eig: den });
        }
        let next = trace_form(&v, &a) / den;
        history.push(next);
        let converged = (next - lambda).abs() <= tol * (1.0 + lambda.abs());
        lambda = next;
        if converged {
            return Ok(TraceRatioSolution {
                projection: v,
                ratio: lambda,
                history,
            });
        }
    }
    Err(Error::NoConvergence {
        iters: max_iters,
        last_ratio: lambda,
    })
}

/// Rotates the rows of `w` inside their span until every row has the same
/// `v^T B v`, then scales so that value is one. Row rotations and a global scale
/// leave the trace ratio unchanged.
fn equalize_rows(w: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let d = w.nrows();
    let mut t = w.clone();
    let gram = |t: &DMatrix<f64>| t * b * t.transpose();
    let target = gram(&t).trace() / d as f64;
    let mut active: Vec<usize> = (0..d).collect();
    while active.len() > 1 {
        let m = gram(&t);
        let hi = *active
            .iter()
            .max_by(|&&x, &&y| m[(x, x)].total_cmp(&m[(y, y)]).then(y.cmp(&x)))
            .unwrap();
        let lo = *active
            .iter()
            .min_by(|&&x, &&y| m[(x, x)].total_cmp(&m[(y, y)]).then(x.cmp(&y)))
            .unwrap();
        if hi == lo {
            break;
        }
        let (a, c, off) = (m[(hi, hi)], m[(lo, lo)], m[(hi, lo)]);
        let mid = 0.5 * (a + c);
        let half = 0.5 * (a - c);
        let radius = half.hypot(off);
        if radius > 0.0 {
            let phase = off.atan2(half);
            let cos_arg = ((target - mid) / radius).clamp(-1.0, 1.0);
            let theta = 0.5 * (phase + cos_arg.acos());
            let (s, co) = theta.sin_cos();
            let row_hi: Vec<f64> = t.row(hi).iter().copied().collect();
            let row_lo: Vec<f64> = t.row(lo).iter().copied().collect();
            for col in 0..t.ncols() {
                t[(hi, col)] = co * row_hi[col] + s * row_lo[col];
                t[(lo, col)] = -s * row_hi[col] + co * row_lo[col];
            }
        }
        active.retain(|&r| r != hi);
    }
    t / target.sqrt()
}

/// A fitted projection before it is wrapped with its training record.
#[derive(Debug, Clone)]
pub struct Solution {
    pub projection: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub epsilon: f64,
    pub ratio: f64,
    pub iterations: usize,
}

/// `s_den + epsilon I` with `epsilon = epsilon_scale * trace(s_den) / D`.
pub fn regularize(s_den: &DMatrix<f64>, epsilon_scale: f64) -> (DMatrix<f64>, f64) {
    let n = s_den.nrows();
    let epsilon = epsilon_scale * s_den.trace() / n as f64;
    (s_den + DMatrix::identity(n, n) * epsilon, epsilon)
}

/// Solves for `T` directly from a scatter pair.
pub fn solve(scatter: &ScatterPair, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    if scatter.s_den.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    if scatter.s_num.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateNumerator);
    }
    let n = scatter.dim();
    let d = config.resolved_dim(n)?;
    let (b, epsilon) = regularize(&scatter.s_den, config.epsilon_scale);
    let a = &scatter.s_num;

    let (mut projection, iterations) = match config.mode {
        SolverMode::RatioTrace => (generalized_eigs(a, &b, d)?.vectors, 0),
        SolverMode::TraceRatio => {
            let sol = trace_ratio(a, &b, d, config.max_iters, config.tol)?;
            let iterations = sol.iterations();
            let mut t = equalize_rows(&sol.projection, &b);
            apply_sign_convention(&mut t);
            (t, iterations)
        }
    };

    let mut forms: Vec<(f64, usize)> = (0..d)
        .map(|r| {
            let row: Vec<f64> = projection.row(r).iter().copied().collect();
            (quad(&row, a), r)
        })
        .collect();
    forms.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    projection = projection.select_rows(forms.iter().map(|(_, r)| r));
    let eigenvalues = forms.iter().map(|(v, _)| v.max(0.0)).collect();
    let ratio = trace_form(&projection, a) / trace_form(&projection, &b);
    Ok(Solution {
        projection,
        eigenvalues,
        epsilon,
        ratio,
        iterations,
    })
}

/// Learns an embedding from a partitioned descriptor set.
pub fn fit(
    set: &DescriptorSet,
    partition: &PairPartition,
    betas: &BetaWeights,
    config: &SolverConfig,
) -> Result<EmbeddingModel> {
    let scatter = build_scatter(set, partition, betas)?;
    let sol = solve(&scatter, config)?;
    let model = EmbeddingModel {
        config: ModelConfig {
            k: partition.k,
            betas: *betas,
            epsilon_scale: config.epsilon_scale,
            epsilon: sol.epsilon,
            solver_mode: config.mode,
            input_dim: set.dim(),
            output_dim: sol.projection.nrows(),
            seed: partition.seed,
        },
        projection: sol.projection,
        eigenvalues: sol.eigenvalues,
        achieved_ratio: sol.ratio,
        iterations: sol.iterations,
    };
    model.validate()?;
    Ok(model)
}

/// Maps every descriptor through `T`: output rows are `x_i T^T`.
pub fn project(model: &EmbeddingModel, set: &DescriptorSet) -> Result<DescriptorSet> {
    project_with(&model.projection, set)
}

pub fn project_with(projection: &DMatrix<f64>, set: &DescriptorSet) -> Result<DescriptorSet> {
    if projection.ncols() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: projection.ncols(),
            got: set.dim(),
        });
    }
    let d = projection.nrows();
    let mut values = Vec::with_capacity(set.len() * d);
    for i in 0..set.len() {
        let x = set.row(i);
        for r in 0..d {
            values.push(projection.row(r).iter().zip(x).map(|(t, v)| t * v).sum());
        }
    }
    set.with_values(values, d)
}

/// Principal angles (radians, ascending) between the row spaces of `a` and `b`,
/// computed from sines so that tiny angles stay accurate.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let qa = a.transpose().qr().q();
    let qb = b.transpose().qr().q();
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let mut sines: Vec<f64> = residual
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    sines.sort_by(f64::total_cmp);
    Ok(sines.into_iter().map(f64::asin).collect())
}
