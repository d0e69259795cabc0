//! Distance-distribution statistics for an embedding.
//!
//! The overlap between two distance samples is the intersection of their normalized
//! histograms over a shared range: `sum_b min(h_a(b), h_b(b))`, so identical
//! distributions score 1 and disjoint ones 0.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptors::{DescriptorSet, EmbeddingModel};
use crate::error::{Error, Result};
use crate::pairing::{PairPartition, Subset};
use crate::rng::SplitMix64;
use crate::scatter::projected_sq_dist;
use crate::solver::project_with;

pub const DEFAULT_BINS: usize = 100;
pub const BALANCE_CAP: usize = 20_000;
pub const DEFAULT_MATCHES: usize = 15;
pub const REPORT_FORMAT: &str = "rde-eval-report";
pub const REPORT_VERSION: u32 = 1;

/// Euclidean pair distances per subset, in pair order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubsetDistances {
    pub rel_near: Vec<f64>,
    pub rel_far: Vec<f64>,
    pub irr_near: Vec<f64>,
    pub irr_far: Vec<f64>,
}

impl SubsetDistances {
    pub fn get(&self, which: Subset) -> &[f64] {
        match which {
            Subset::RelNear => &self.rel_near,
            Subset::RelFar => &self.rel_far,
            Subset::IrrNear => &self.irr_near,
            Subset::IrrFar => &self.irr_far,
        }
    }

    fn get_mut(&mut self, which: Subset) -> &mut Vec<f64> {
        match which {
            Subset::RelNear => &mut self.rel_near,
            Subset::RelFar => &mut self.rel_far,
            Subset::IrrNear => &mut self.irr_near,
            Subset::IrrFar => &mut self.irr_far,
        }
    }
}

/// Distances under `projection`, or in the original space when it is `None`.
pub fn subset_distances(
    set: &DescriptorSet,
    partition: &PairPartition,
    projection: Option<&DMatrix<f64>>,
) -> Result<SubsetDistances> {
    if let Some(t) = projection {
        if t.ncols() != set.dim() {
            return Err(Error::DimensionMismatch {
                expected: set.dim(),
                got: t.ncols(),
            });
        }
    }
    partition.validate(set)?;
    let mut out = SubsetDistances::default();
    for which in Subset::ALL {
        *out.get_mut(which) = partition
            .subset(which)
            .iter()
            .map(|&(i, j)| {
                let sq = match projection {
                    Some(t) => projected_sq_dist(t, set.row(i), set.row(j)),
                    None => set.sq_dist(i, j),
                };
                sq.sqrt()
            })
            .collect();
    }
    Ok(out)
}

fn sample_range<'a>(samples: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
    samples
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Counts of `samples` in `bins` equal-width bins over `[lo, hi]`; the top edge falls
/// into the last bin and a degenerate range puts everything in bin 0.
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    let width = hi - lo;
    for &x in samples {
        let idx = if width > 0.0 {
            (((x - lo) / width) * bins as f64).floor().max(0.0) as usize
        } else {
            0
        };
        counts[idx.min(bins - 1)] += 1;
    }
    counts
}

/// Normalized histogram intersection of two samples on their shared range.
pub fn overlap_error(samples_a: &[f64], samples_b: &[f64], bins: usize) -> Result<f64> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(Error::EmptySubset("overlap_error needs two nonempty samples".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("bins must be at least 2, got {bins}")));
    }
    if samples_a.iter().chain(samples_b).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let (lo, hi) = sample_range(samples_a.iter().chain(samples_b));
    let ha = histogram(samples_a, lo, hi, bins);
    let hb = histogram(samples_b, lo, hi, bins);
    let na = samples_a.len() as u128;
    let nb = samples_b.len() as u128;
    // Exact integer intersection: sum_b min(ca / na, cb / nb) * na * nb.
    let shared: u128 = ha
        .iter()
        .zip(&hb)
        .map(|(&ca, &cb)| (ca as u128 * nb).min(cb as u128 * na))
        .sum();
    Ok(shared as f64 / (na * nb) as f64)
}

/// Overlap of the first embedded coordinate between the two groups of a two-class set.
pub fn class_overlap_error(embedded: &DescriptorSet, bins: usize) -> Result<f64> {
    let mut groups: Vec<u64> = embedded.group_ids().to_vec();
    groups.sort_unstable();
    groups.dedup();
    if groups.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "class overlap needs exactly two groups, found {}",
            groups.len()
        )));
    }
    let coord = |g: u64| -> Vec<f64> {
        (0..embedded.len())
            .filter(|&i| embedded.group(i) == g)
            .map(|i| embedded.row(i)[0])
            .collect()
    };
    overlap_error(&coord(groups[0]), &coord(groups[1]), bins)
}

/// Per-subset sample size used before measuring overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    /// Use every pair.
    Off,
    /// The smallest subset size, capped at [`BALANCE_CAP`].
    Auto,
    PerSubset(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub code: String,
    pub label: String,
    pub total_pairs: usize,
    /// True when the subset held fewer pairs than the balancing target.
    pub undersized: bool,
    pub distances: Vec<f64>,
    /// Histogram over the report's shared range.
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMatch {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub matching: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingRecord {
    pub m: usize,
    pub pairs: Vec<CrossMatch>,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub balance_target: Option<usize>,
    pub bins: usize,
    /// Shared histogram range `[lo, hi]` over all four subsets.
    pub range: [f64; 2],
    pub subsets: Vec<SubsetReport>,
    /// Overlap of {Rel-Near, Rel-Far} against {Irr-Near, Irr-Far}.
    pub err_rel_irr: f64,
    /// Overlap of Rel-Far against Irr-Near.
    pub err_rfar_inear: f64,
    pub matching: Option<MatchingRecord>,
}

impl EvalReport {
    pub fn subset(&self, which: Subset) -> &SubsetReport {
        self.subsets
            .iter()
            .find(|s| s.code == which.code())
            .expect("report holds all four subsets")
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: EvalReport = serde_json::from_str(text)?;
        if report.format != REPORT_FORMAT {
            return Err(Error::Version {
                expected: REPORT_FORMAT.into(),
                found: report.format,
            });
        }
        if report.version != REPORT_VERSION {
            return Err(Error::Version {
                expected: REPORT_VERSION.to_string(),
                found: report.version.to_string(),
            });
        }
        Ok(report)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Subsamples each subset (in subset order, one seeded stream) to `target` pairs,
/// keeping the chosen pairs in their original order.
fn balance_distances(all: &SubsetDistances, target: Option<usize>, seed: u64) -> (SubsetDistances, [bool; 4]) {
    let Some(target) = target else {
        return (all.clone(), [false; 4]);
    };
    let mut rng = SplitMix64::new(seed);
    let mut out = SubsetDistances::default();
    let mut undersized = [false; 4];
    for (slot, which) in Subset::ALL.into_iter().enumerate() {
        let src = all.get(which);
        undersized[slot] = src.len() < target;
        let dst = out.get_mut(which);
        if src.len() <= target {
            dst.extend_from_slice(src);
        } else {
            let mut picked = rng.sample_indices(src.len(), target);
            picked.sort_unstable();
            dst.extend(picked.into_iter().map(|i| src[i]));
        }
    }
    (out, undersized)
}

/// Builds the full report for `model` (identity when `None`).
pub fn eval_report(
    set: &DescriptorSet,
    partition: &PairPartition,
    model: Option<&EmbeddingModel>,
    bins: usize,
    balance: Balance,
    seed: u64,
) -> Result<EvalReport> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("bins must be at least 2, got {bins}")));
    }
    for which in Subset::ALL {
        if partition.subset(which).is_empty() {
            return Err(Error::EmptySubset(format!("{} has no pairs", which.label())));
        }
    }
    let all = subset_distances(set, partition, model.map(|m| &m.projection))?;
    let target = match balance {
        Balance::Off => None,
        Balance::Auto => Some(
            Subset::ALL
                .iter()
                .map(|&s| partition.subset(s).len())
                .min()
                .unwrap_or(0)
                .min(BALANCE_CAP),
        ),
        Balance::PerSubset(0) => {
            return Err(Error::InvalidArgument("balance size must be positive".into()))
        }
        Balance::PerSubset(n) => Some(n),
    };
    let (dist, undersized) = balance_distances(&all, target, seed);

    let relevant: Vec<f64> = dist.rel_near.iter().chain(&dist.rel_far).copied().collect();
    let irrelevant: Vec<f64> = dist.irr_near.iter().chain(&dist.irr_far).copied().collect();
    let err_rel_irr = overlap_error(&relevant, &irrelevant, bins)?;
    let err_rfar_inear = overlap_error(&dist.rel_far, &dist.irr_near, bins)?;

    let (lo, hi) = sample_range(relevant.iter().chain(&irrelevant));
    let subsets = Subset::ALL
        .into_iter()
        .enumerate()
        .map(|(slot, which)| SubsetReport {
            code: which.code().into(),
            label: which.label().into(),
            total_pairs: partition.subset(which).len(),
            undersized: undersized[slot],
            counts: histogram(dist.get(which), lo, hi, bins),
            distances: dist.get(which).to_vec(),
        })
        .collect();

    Ok(EvalReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        seed,
        balance_target: target,
        bins,
        range: [lo, hi],
        subsets,
        err_rel_irr,
        err_rfar_inear,
        matching: None,
    })
}

/// The `m` closest cross pairs `(a, b)` between two sets after embedding, ordered by
/// distance then by `(a, b)`. Precision is the fraction sharing a group id.
pub fn closest_cross_pairs(
    set_a: &DescriptorSet,
    set_b: &DescriptorSet,
    projection: Option<&DMatrix<f64>>,
    m: usize,
) -> Result<MatchingRecord> {
    if set_a.dim() != set_b.dim() {
        return Err(Error::DimensionMismatch {
            expected: set_a.dim(),
            got: set_b.dim(),
        });
    }
    let total = set_a.len() * set_b.len();
    if m == 0 || m > total {
        return Err(Error::InvalidArgument(format!(
            "m = {m} must lie in 1..={total} (|A| * |B|)"
        )));
    }
    let (ea, eb) = match projection {
        Some(t) => (project_with(t, set_a)?, project_with(t, set_b)?),
        None => (set_a.clone(), set_b.clone()),
    };
    let mut all: Vec<(f64, usize, usize)> = (0..ea.len())
        .into_par_iter()
        .flat_map_iter(|a| {
            let ea = &ea;
            let eb = &eb;
            (0..eb.len()).map(move |b| {
                let sq: f64 = ea.row(a).iter().zip(eb.row(b)).map(|(x, y)| (x - y) * (x - y)).sum();
                (sq, a, b)
            })
        })
        .collect();
    let order = |x: &(f64, usize, usize), y: &(f64, usize, usize)| {
        x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
    };
    if m < all.len() {
        all.select_nth_unstable_by(m - 1, order);
        all.truncate(m);
    }
    all.sort_by(order);
    let pairs: Vec<CrossMatch> = all
        .into_iter()
        .map(|(sq, a, b)| CrossMatch {
            a,
            b,
            distance: sq.sqrt(),
            matching: set_a.group(a) == set_b.group(b),
        })
        .collect();
    let hits = pairs.iter().filter(|p| p.matching).count();
    Ok(MatchingRecord {
        m,
        precision: hits as f64 / m as f64,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::{build_partition, PartitionConfig};
    use proptest::prelude::*;

    #[test]
    fn identical_samples_overlap_fully() {
        let a = [0.3, 1.0, 2.5, 2.5, 7.0];
        assert_eq!(overlap_error(&a, &a, 10).unwrap(), 1.0);
        assert_eq!(overlap_error(&[4.0], &[4.0, 4.0], 2).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_samples_do_not_overlap() {
        let a: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert_eq!(overlap_error(&a, &b, 100).unwrap(), 0.0);
    }

    #[test]
    fn overlap_rejects_bad_input() {
        assert!(overlap_error(&[], &[1.0], 10).is_err());
        assert!(overlap_error(&[1.0], &[1.0], 1).is_err());
    }

    #[test]
    fn histogram_edges() {
        assert_eq!(histogram(&[0.0, 0.5, 1.0], 0.0, 1.0, 2), vec![1, 2]);
        assert_eq!(histogram(&[3.0, 3.0], 3.0, 3.0, 4), vec![2, 0, 0, 0]);
    }

    fn toy() -> (DescriptorSet, PairPartition) {
        let set = DescriptorSet::from_rows(
            &[vec![0.0, 0.0], vec![3.0, 4.0], vec![0.5, 0.1], vec![9.0, 9.0], vec![8.0, 9.5]],
            vec![0, 0, 1, 1, 2],
        )
        .unwrap();
        let p = PairPartition {
            rel_near: vec![(0, 1)],
            rel_far: vec![(2, 3)],
            irr_near: vec![(0, 2)],
            irr_far: vec![(1, 4)],
            ..Default::default()
        };
        (set, p)
    }

    #[test]
    fn subset_distance_examples() {
        let (set, p) = toy();
        let d = subset_distances(&set, &p, None).unwrap();
        assert_eq!(d.rel_near, vec![5.0]);
        let zero = DMatrix::zeros(1, 2);
        let z = subset_distances(&set, &p, Some(&zero)).unwrap();
        assert!(Subset::ALL.iter().all(|&s| z.get(s).iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn report_identical_and_separated() {
        let (set, p) = toy();
        // Relevant distances 5 and ~12.1, irrelevant ~0.51 and 7.43: partial overlap.
        let r = eval_report(&set, &p, None, 10, Balance::Off, 0).unwrap();
        assert!((0.0..=1.0).contains(&r.err_rel_irr));
        assert!(r.range[0] <= r.subsets.iter().flat_map(|s| &s.distances).cloned().fold(f64::INFINITY, f64::min));

        // Every subset holds one pair at distance 1: identical distributions.
        let line = DescriptorSet::from_rows(
            &[vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![10.0], vec![11.0]],
            vec![0, 0, 1, 1, 2, 3],
        )
        .unwrap();
        let same = PairPartition {
            rel_near: vec![(0, 1)],
            rel_far: vec![(2, 3)],
            irr_near: vec![(1, 2)],
            irr_far: vec![(4, 5)],
            ..Default::default()
        };
        let r = eval_report(&line, &same, None, 100, Balance::Off, 0).unwrap();
        assert_eq!(r.err_rel_irr, 1.0);
        assert_eq!(r.err_rfar_inear, 1.0);
    }

    #[test]
    fn perfect_separation_gives_zero() {
        let set = DescriptorSet::from_rows(
            &[vec![0.0], vec![0.1], vec![0.2], vec![10.0], vec![20.0], vec![10.05]],
            vec![0, 0, 0, 1, 2, 1],
        )
        .unwrap();
        let p = build_partition(&set, &PartitionConfig { k: 1, ..Default::default() }).unwrap();
        let r = eval_report(&set, &p, None, 100, Balance::Off, 0).unwrap();
        assert_eq!(r.err_rel_irr, 0.0);
    }

    #[test]
    fn empty_subset_rejected() {
        let (set, mut p) = toy();
        p.irr_far.clear();
        assert!(matches!(eval_report(&set, &p, None, 10, Balance::Off, 0), Err(Error::EmptySubset(_))));
    }

    #[test]
    fn balancing_is_seeded_and_flags_small_subsets() {
        let dist = SubsetDistances {
            rel_near: (0..10).map(f64::from).collect(),
            rel_far: (0..3).map(f64::from).collect(),
            irr_near: (0..8).map(f64::from).collect(),
            irr_far: (0..20).map(f64::from).collect(),
        };
        let (a, flags) = balance_distances(&dist, Some(5), 4);
        let (b, _) = balance_distances(&dist, Some(5), 4);
        assert_eq!(a, b);
        assert_eq!(flags, [false, true, false, false]);
        assert_eq!(a.rel_near.len(), 5);
        assert_eq!(a.rel_far.len(), 3);
        assert!(a.irr_far.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn report_json_round_trip() {
        let (set, p) = toy();
        let r = eval_report(&set, &p, None, 10, Balance::Auto, 3).unwrap();
        assert_eq!(r.balance_target, Some(1));
        let back = EvalReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let bad = r.to_json().unwrap().replace("\"version\": 1", "\"version\": 9");
        assert!(EvalReport::from_json(&bad).is_err());
    }

    #[test]
    fn self_match_and_disjoint_groups() {
        let (set, _) = toy();
        let rec = closest_cross_pairs(&set, &set, None, set.len()).unwrap();
        assert_eq!(rec.precision, 1.0);
        assert!(rec.pairs.iter().all(|p| p.a == p.b && p.distance == 0.0));

        let shifted = DescriptorSet::new(set.values().to_vec(), 2, vec![10, 11, 12, 13, 14]).unwrap();
        for m in [1, 7, 25] {
            assert_eq!(closest_cross_pairs(&set, &shifted, None, m).unwrap().precision, 0.0);
        }
        assert!(closest_cross_pairs(&set, &set, None, 26).is_err());
    }

    #[test]
    fn class_overlap_needs_two_groups() {
        let two = DescriptorSet::from_rows(&[vec![0.0], vec![1.0], vec![5.0], vec![6.0]], vec![0, 0, 1, 1]).unwrap();
        assert_eq!(class_overlap_error(&two, 10).unwrap(), 0.0);
        let (set, _) = toy();
        assert!(class_overlap_error(&set, 10).is_err());
    }

    proptest! {
        #[test]
        fn overlap_symmetric_bounded_permutation_invariant(
            a in prop::collection::vec(-100.0f64..100.0, 1..60),
            b in prop::collection::vec(-100.0f64..100.0, 1..60),
            bins in 2usize..64,
            shift in 0usize..59,
        ) {
            let ab = overlap_error(&a, &b, bins).unwrap();
            let ba = overlap_error(&b, &a, bins).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            let mut rotated = a.clone();
            rotated.rotate_left(shift % a.len());
            prop_assert_eq!(overlap_error(&rotated, &b, bins).unwrap(), ab);
            prop_assert_eq!(overlap_error(&a, &a, bins).unwrap(), 1.0);
        }

        #[test]
        fn overlap_scale_invariant(
            a in prop::collection::vec(0.0f64..50.0, 1..40),
            b in prop::collection::vec(0.0f64..50.0, 1..40),
            exp in -6i32..7,
        ) {
            // Power-of-two factors keep every bin index exact.
            let c = 2f64.powi(exp);
            let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
            prop_assert_eq!(overlap_error(&sa, &sb, 17).unwrap(), overlap_error(&a, &b, 17).unwrap());
        }
    }
}
