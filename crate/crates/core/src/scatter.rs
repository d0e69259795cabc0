//! Pairwise scatter matrices and the regularized discriminant ratio
//!
//! ```text
//!          b_IN * sum_{IN} d_ij(T) + b_IF * sum_{IF} d_ij(T)
//! J(T) = -----------------------------------------------------,   d_ij(T) = |T (x_i - x_j)|^2
//!          b_RN * sum_{RN} d_ij(T) + b_RF * sum_{RF} d_ij(T)
//! ```
//!
//! Each sum is `trace(T S T^T)` for the pairwise scatter `S = sum (x_i - x_j)(x_i - x_j)^T`,
//! so the ratio is also `trace(T s_num T^T) / trace(T s_den T^T)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::descriptors::DescriptorSet;
use crate::error::{Error, Result};
use crate::pairing::{Pair, PairPartition, Subset};

/// Importance of each pair subset in the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaWeights {
    pub beta_rn: f64,
    pub beta_rf: f64,
    pub beta_in: f64,
    pub beta_if: f64,
}

impl BetaWeights {
    pub fn new(beta_rn: f64, beta_rf: f64, beta_in: f64, beta_if: f64) -> Result<Self> {
        let betas = Self {
            beta_rn,
            beta_rf,
            beta_in,
            beta_if,
        };
        betas.validate()?;
        Ok(betas)
    }

    /// All four weights equal to one.
    pub fn uniform() -> Self {
        Self {
            beta_rn: 1.0,
            beta_rf: 1.0,
            beta_in: 1.0,
            beta_if: 1.0,
        }
    }

    pub fn get(&self, which: Subset) -> f64 {
        match which {
            Subset::RelNear => self.beta_rn,
            Subset::RelFar => self.beta_rf,
            Subset::IrrNear => self.beta_in,
            Subset::IrrFar => self.beta_if,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.beta_rn, self.beta_rf, self.beta_in, self.beta_if]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "betas must be finite and nonnegative, got {:?}",
                self.as_array()
            )));
        }
        if self.beta_in + self.beta_if <= 0.0 || self.beta_rn + self.beta_rf <= 0.0 {
            return Err(Error::InvalidArgument(
                "both the relevant and irrelevant weight pairs need a positive entry".into(),
            ));
        }
        Ok(())
    }
}

/// Numerator (irrelevant side) and denominator (relevant side) scatter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPair {
    pub s_num: DMatrix<f64>,
    pub s_den: DMatrix<f64>,
}

impl ScatterPair {
    pub fn dim(&self) -> usize {
        self.s_num.nrows()
    }

    /// Symmetric within `1e-12` relative and PSD with smallest eigenvalue at least
    /// `-1e-10` times the largest, for both matrices.
    pub fn check_invariants(&self) -> Result<()> {
        for (name, m) in [("s_num", &self.s_num), ("s_den", &self.s_den)] {
            let scale = m.amax().max(f64::MIN_POSITIVE);
            let asym = (m - m.transpose()).amax();
            if asym > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "{name} is not symmetric (max asymmetry {asym:e})"
                )));
            }
            let eig = SymmetricEigen::new(m.clone()).eigenvalues;
            let max = eig.max();
            let min = eig.min();
            if min < -1e-10 * max.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidArgument(format!(
                    "{name} is not positive semidefinite (eigenvalues in [{min:e}, {max:e}])"
                )));
            }
        }
        Ok(())
    }
}

/// `|T (x_i - x_j)|^2`.
pub fn squared_distance(projection: &DMatrix<f64>, x_i: &[f64], x_j: &[f64]) -> Result<f64> {
    let dim = projection.ncols();
    for x in [x_i, x_j] {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
    }
    Ok(projected_sq_dist(projection, x_i, x_j))
}

pub(crate) fn projected_sq_dist(projection: &DMatrix<f64>, x_i: &[f64], x_j: &[f64]) -> f64 {
    let diff: Vec<f64> = x_i.iter().zip(x_j).map(|(a, b)| a - b).collect();
    let mut total = 0.0;
    for r in 0..projection.nrows() {
        let row = projection.row(r);
        let y: f64 = row.iter().zip(&diff).map(|(t, d)| t * d).sum();
        total += y * y;
    }
    total
}

const LEAF_PAIRS: usize = 64;
const PARALLEL_PAIRS: usize = 8192;

/// Packed upper triangle of `sum (x_i - x_j)(x_i - x_j)^T`, accumulated as a balanced
/// binary tree over the pair list. The split points depend only on the list length,
/// so the parallel and sequential evaluations agree bit for bit.
fn tree_scatter(set: &DescriptorSet, pairs: &[Pair]) -> Vec<f64> {
    let dim = set.dim();
    let packed = dim * (dim + 1) / 2;
    if pairs.len() <= LEAF_PAIRS {
        let mut acc = vec![0.0; packed];
        let mut diff = vec![0.0; dim];
        for &(i, j) in pairs {
            for (d, (a, b)) in diff.iter_mut().zip(set.row(i).iter().zip(set.row(j))) {
                *d = a - b;
            }
            let mut slot = 0;
            for r in 0..dim {
                for c in r..dim {
                    acc[slot] += diff[r] * diff[c];
                    slot += 1;
                }
            }
        }
        return acc;
    }
    let (left, right) = pairs.split_at(pairs.len() / 2);
    let (mut a, b) = if pairs.len() >= PARALLEL_PAIRS {
        rayon::join(|| tree_scatter(set, left), || tree_scatter(set, right))
    } else {
        (tree_scatter(set, left), tree_scatter(set, right))
    };
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// `weight * sum_{(i,j) in pairs} (x_i - x_j)(x_i - x_j)^T`; empty lists give zero.
pub fn weighted_scatter(set: &DescriptorSet, pairs: &[Pair], weight: f64) -> DMatrix<f64> {
    let dim = set.dim();
    let packed = tree_scatter(set, pairs);
    let mut out = DMatrix::zeros(dim, dim);
    let mut slot = 0;
    for r in 0..dim {
        for c in r..dim {
            let v = weight * packed[slot];
            out[(r, c)] = v;
            out[(c, r)] = v;
            slot += 1;
        }
    }
    out
}

/// `s_num = b_IN S(IN) + b_IF S(IF)`, `s_den = b_RN S(RN) + b_RF S(RF)`.
pub fn build_scatter(set: &DescriptorSet, partition: &PairPartition, betas: &BetaWeights) -> Result<ScatterPair> {
    betas.validate()?;
    partition.validate(set)?;
    let part = |which: Subset| weighted_scatter(set, partition.subset(which), betas.get(which));
    let s_num = part(Subset::IrrNear) + part(Subset::IrrFar);
    let s_den = part(Subset::RelNear) + part(Subset::RelFar);
    if s_den.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    Ok(ScatterPair { s_num, s_den })
}

/// `trace(T S T^T)`.
pub fn trace_form(projection: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    (projection * s * projection.transpose()).trace()
}

/// The ratio by direct summation of projected pair distances.
pub fn objective(
    projection: &DMatrix<f64>,
    set: &DescriptorSet,
    partition: &PairPartition,
    betas: &BetaWeights,
) -> Result<f64> {
    if projection.ncols() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: projection.ncols(),
        });
    }
    let subset_sum = |which: Subset| -> f64 {
        partition
            .subset(which)
            .iter()
            .map(|&(i, j)| projected_sq_dist(projection, set.row(i), set.row(j)))
            .sum()
    };
    let num = betas.beta_in * subset_sum(Subset::IrrNear) + betas.beta_if * subset_sum(Subset::IrrFar);
    let den = betas.beta_rn * subset_sum(Subset::RelNear) + betas.beta_rf * subset_sum(Subset::RelFar);
    if den <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// The same ratio evaluated through the scatter matrices.
pub fn objective_from_scatter(projection: &DMatrix<f64>, scatter: &ScatterPair) -> Result<f64> {
    if projection.ncols() != scatter.dim() {
        return Err(Error::DimensionMismatch {
            expected: scatter.dim(),
            got: projection.ncols(),
        });
    }
    let den = trace_form(projection, &scatter.s_den);
    if den <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(trace_form(projection, &scatter.s_num) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::{build_partition, PartitionConfig};
    use crate::rng::SplitMix64;

    fn random_set(rng: &mut SplitMix64, n: usize, dim: usize, groups: u64) -> DescriptorSet {
        let values = (0..n * dim).map(|_| rng.normal()).collect();
        let ids = (0..n as u64).map(|i| i % groups).collect();
        DescriptorSet::new(values, dim, ids).unwrap()
    }

    fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    #[test]
    fn distance_examples() {
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(squared_distance(&eye, &[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        let t = DMatrix::from_row_slice(1, 2, &[2.0, 0.0]);
        assert_eq!(squared_distance(&t, &[1.0, 0.0], &[0.0, 0.0]).unwrap(), 4.0);
        let mut rng = SplitMix64::new(1);
        let t = random_matrix(&mut rng, 3, 2);
        assert_eq!(squared_distance(&t, &[0.7, -2.0], &[0.7, -2.0]).unwrap(), 0.0);
        assert!(squared_distance(&t, &[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn scatter_outer_product_and_empty() {
        let set = DescriptorSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]], vec![0, 0]).unwrap();
        let s = weighted_scatter(&set, &[(0, 1)], 1.0);
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(weighted_scatter(&set, &[], 3.0), DMatrix::zeros(2, 2));
    }

    #[test]
    fn scatter_trace_matches_direct_sum() {
        let mut rng = SplitMix64::new(42);
        let set = random_set(&mut rng, 30, 6, 4);
        let pairs: Vec<Pair> = (0..30).flat_map(|i| (i + 1..30).map(move |j| (i, j))).collect();
        let s = weighted_scatter(&set, &pairs, 1.0);
        for _ in 0..10 {
            let t = random_matrix(&mut rng, 4, 6);
            let direct: f64 = pairs
                .iter()
                .map(|&(i, j)| squared_distance(&t, set.row(i), set.row(j)).unwrap())
                .sum();
            let via = trace_form(&t, &s);
            assert!((direct - via).abs() <= 1e-10 * direct.abs(), "{direct} vs {via}");
        }
    }

    #[test]
    fn parallel_tree_is_bit_identical() {
        let mut rng = SplitMix64::new(8);
        let set = random_set(&mut rng, 200, 3, 7);
        let pairs: Vec<Pair> = (0..200).flat_map(|i| (i + 1..200).map(move |j| (i, j))).collect();
        assert!(pairs.len() > PARALLEL_PAIRS);
        let a = weighted_scatter(&set, &pairs, 1.0);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| weighted_scatter(&set, &pairs, 1.0));
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_betas_pool_subsets() {
        let mut rng = SplitMix64::new(3);
        let set = random_set(&mut rng, 40, 4, 5);
        let p = build_partition(&set, &PartitionConfig::default()).unwrap();
        let sp = build_scatter(&set, &p, &BetaWeights::uniform()).unwrap();
        let all_rel: Vec<Pair> = p.relevant().collect();
        let all_irr: Vec<Pair> = p.irrelevant().collect();
        let rel = weighted_scatter(&set, &all_rel, 1.0);
        let irr = weighted_scatter(&set, &all_irr, 1.0);
        assert!((&sp.s_den - &rel).amax() <= 1e-10 * rel.amax());
        assert!((&sp.s_num - &irr).amax() <= 1e-10 * irr.amax());
    }

    #[test]
    fn additivity_and_homogeneity() {
        let mut rng = SplitMix64::new(4);
        let set = random_set(&mut rng, 40, 3, 4);
        let p = build_partition(&set, &PartitionConfig::default()).unwrap();
        let betas = BetaWeights::new(0.5, 2.0, 3.0, 0.25).unwrap();
        let sp = build_scatter(&set, &p, &betas).unwrap();
        let num = weighted_scatter(&set, &p.irr_near, 3.0) + weighted_scatter(&set, &p.irr_far, 0.25);
        let den = weighted_scatter(&set, &p.rel_near, 0.5) + weighted_scatter(&set, &p.rel_far, 2.0);
        assert_eq!(sp.s_num, num);
        assert_eq!(sp.s_den, den);

        let doubled = BetaWeights::new(1.0, 4.0, 6.0, 0.5).unwrap();
        let sp2 = build_scatter(&set, &p, &doubled).unwrap();
        assert!((sp2.s_num - &sp.s_num * 2.0).amax() <= 1e-12 * sp.s_num.amax());
        assert!((sp2.s_den - &sp.s_den * 2.0).amax() <= 1e-12 * sp.s_den.amax());
        sp.check_invariants().unwrap();
    }

    #[test]
    fn empty_irr_near_gives_zero_numerator() {
        // Move every irrelevant pair to Irr-Far, then switch Irr-Far off.
        let set = DescriptorSet::from_rows(&[vec![0.0], vec![0.1], vec![5.0], vec![5.2]], vec![0, 0, 1, 1]).unwrap();
        let mut p = build_partition(&set, &PartitionConfig::default()).unwrap();
        p.irr_far.append(&mut p.irr_near);
        let betas = BetaWeights::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let sp = build_scatter(&set, &p, &betas).unwrap();
        assert!(sp.s_num.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_denominator_rejected() {
        let set = DescriptorSet::from_rows(&[vec![0.0], vec![1.0], vec![3.0]], vec![0, 1, 2]).unwrap();
        let p = build_partition(&set, &PartitionConfig::default()).unwrap();
        assert!(matches!(
            build_scatter(&set, &p, &BetaWeights::uniform()),
            Err(Error::DegenerateDenominator)
        ));
        assert!(BetaWeights::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(BetaWeights::new(1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn symmetric_case_gives_unit_ratio() {
        // One relevant and one irrelevant pair at equal projected distance.
        let p = PairPartition {
            rel_near: vec![(0, 1)],
            irr_near: vec![(1, 2)],
            ..Default::default()
        };
        let t = DMatrix::from_row_slice(1, 1, &[1.0]);
        let set = DescriptorSet::from_rows(&[vec![0.0], vec![2.0], vec![4.0]], vec![0, 0, 1]).unwrap();
        assert_eq!(objective(&t, &set, &p, &BetaWeights::uniform()).unwrap(), 1.0);
    }

    #[test]
    fn objective_scale_invariant_and_matches_scatter() {
        let mut rng = SplitMix64::new(17);
        let set = random_set(&mut rng, 50, 5, 6);
        let p = build_partition(&set, &PartitionConfig::default()).unwrap();
        let betas = BetaWeights::new(1.0, 10.0, 10.0, 1.0).unwrap();
        let sp = build_scatter(&set, &p, &betas).unwrap();
        let t = random_matrix(&mut rng, 2, 5);
        let base = objective(&t, &set, &p, &betas).unwrap();
        for c in [-2.0, 0.5, 10.0] {
            let scaled = objective(&(&t * c), &set, &p, &betas).unwrap();
            assert!((scaled - base).abs() <= 1e-10 * base.abs());
        }
        let via = objective_from_scatter(&t, &sp).unwrap();
        assert!((via - base).abs() <= 1e-10 * (1.0 + base.abs()));
        let zero = DMatrix::zeros(2, 5);
        assert!(matches!(objective(&zero, &set, &p, &betas), Err(Error::ZeroDenominator)));
    }
}
