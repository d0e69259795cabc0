//! Descriptor sets and learned embedding models.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scatter::BetaWeights;
use crate::solver::SolverMode;

/// `N` descriptors of dimension `D`, stored row-major, each tagged with the id of the
/// local part it depicts. Descriptors sharing a group id are matching.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    values: Vec<f64>,
    group_ids: Vec<u64>,
    source_tags: Option<Vec<String>>,
}

impl DescriptorSet {
    /// Builds a set from row-major `values` (length `N * dim`) and `N` group ids.
    pub fn new(values: Vec<f64>, dim: usize, group_ids: Vec<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSet("descriptor dimension must be at least 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidSet(format!(
                "{} values do not form rows of length {dim}",
                values.len()
            )));
        }
        let n = values.len() / dim;
        if n != group_ids.len() {
            return Err(Error::InvalidSet(format!(
                "{n} descriptors but {} group ids",
                group_ids.len()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidSet(format!("need at least 2 descriptors, got {n}")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSet(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            dim,
            values,
            group_ids,
            source_tags: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], group_ids: Vec<u64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidSet(format!(
                "row {bad} has {} columns, expected {dim}",
                rows[bad].len()
            )));
        }
        Self::new(rows.concat(), dim, group_ids)
    }

    pub fn with_source_tags(mut self, tags: Vec<String>) -> Result<Self> {
        if tags.len() != self.len() {
            return Err(Error::InvalidSet(format!(
                "{} source tags for {} descriptors",
                tags.len(),
                self.len()
            )));
        }
        self.source_tags = Some(tags);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.group_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn group_ids(&self) -> &[u64] {
        &self.group_ids
    }

    pub fn group(&self, i: usize) -> u64 {
        self.group_ids[i]
    }

    pub fn source_tags(&self) -> Option<&[String]> {
        self.source_tags.as_deref()
    }

    /// Squared Euclidean distance between rows `i` and `j` in the original space.
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `N x D` matrix view of the descriptors.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.values)
    }

    /// Same descriptors re-expressed under new rows; group ids and tags are kept.
    pub(crate) fn with_values(&self, values: Vec<f64>, dim: usize) -> Result<Self> {
        let mut out = Self::new(values, dim, self.group_ids.clone())?;
        out.source_tags = self.source_tags.clone();
        Ok(out)
    }
}

/// Everything needed to reproduce a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub k: usize,
    pub betas: BetaWeights,
    pub epsilon_scale: f64,
    /// Absolute ridge added to the denominator scatter: `epsilon_scale * trace(s_den) / D`.
    pub epsilon: f64,
    pub solver_mode: SolverMode,
    pub input_dim: usize,
    pub output_dim: usize,
    pub seed: u64,
}

/// A learned linear map `T` (`d x D`) with its spectrum and training configuration.
///
/// Rows are normalized so that `v^T (s_den + epsilon I) v = 1`. For ratio-trace models
/// `eigenvalues` are the generalized eigenvalues of the pencil; for trace-ratio models
/// they are the per-row numerator forms `v^T s_num v`, which equal the per-row ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub projection: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub config: ModelConfig,
    /// `trace(T s_num T^T) / trace(T (s_den + epsilon I) T^T)` at the returned projection.
    pub achieved_ratio: f64,
    /// Trace-ratio iterations used; zero for ratio-trace fits.
    pub iterations: usize,
}

impl EmbeddingModel {
    /// The identity map on `dim` coordinates, useful as the "no learning" baseline.
    pub fn identity(dim: usize) -> Self {
        Self {
            projection: DMatrix::identity(dim, dim),
            eigenvalues: vec![1.0; dim],
            config: ModelConfig {
                k: 1,
                betas: BetaWeights::uniform(),
                epsilon_scale: 0.0,
                epsilon: 0.0,
                solver_mode: SolverMode::RatioTrace,
                input_dim: dim,
                output_dim: dim,
                seed: 0,
            },
            achieved_ratio: 1.0,
            iterations: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.nrows()
    }

    /// Checks the shape and ordering invariants that do not depend on training data.
    pub fn validate(&self) -> Result<()> {
        let (d, big_d) = self.projection.shape();
        if d == 0 || d > big_d {
            return Err(Error::InvalidArgument(format!(
                "projection has {d} rows for input dimension {big_d}"
            )));
        }
        if self.config.input_dim != big_d || self.config.output_dim != d {
            return Err(Error::InvalidArgument(format!(
                "config dims {}x{} disagree with projection {d}x{big_d}",
                self.config.output_dim, self.config.input_dim
            )));
        }
        if self.eigenvalues.len() != d {
            return Err(Error::InvalidArgument(format!(
                "{} eigenvalues for {d} projection rows",
                self.eigenvalues.len()
            )));
        }
        if self.projection.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("projection has non-finite entries".into()));
        }
        if self.eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("eigenvalues are not sorted non-increasing".into()));
        }
        if self.eigenvalues.iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::InvalidArgument("eigenvalues must be nonnegative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(DescriptorSet::new(vec![1.0, 2.0], 2, vec![0]).is_err());
        assert!(DescriptorSet::new(vec![1.0, 2.0, 3.0], 2, vec![0, 1]).is_err());
        assert!(DescriptorSet::new(vec![1.0, 2.0], 1, vec![0]).is_err());
        assert!(DescriptorSet::new(vec![1.0, f64::NAN], 1, vec![0, 1]).is_err());
        assert!(DescriptorSet::new(vec![], 0, vec![]).is_err());
    }

    #[test]
    fn row_access_and_distance() {
        let set = DescriptorSet::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]], vec![0, 1]).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.row(1), &[3.0, 4.0]);
        assert_eq!(set.sq_dist(0, 1), 25.0);
        assert_eq!(set.to_matrix()[(1, 0)], 3.0);
    }

    #[test]
    fn identity_model_is_valid() {
        EmbeddingModel::identity(3).validate().unwrap();
    }

    #[test]
    fn unsorted_eigenvalues_rejected() {
        let mut m = EmbeddingModel::identity(2);
        m.eigenvalues = vec![0.5, 2.0];
        assert!(m.validate().is_err());
    }
}
