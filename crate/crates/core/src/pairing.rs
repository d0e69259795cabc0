//! Matching / non-matching pair enumeration and the four-way near/far partition.
//!
//! A relevant pair `(i, j)` is Rel-Near when `x_i` is among the `k` nearest matching
//! descriptors of `x_j`, or `x_j` among the `k` nearest matching descriptors of `x_i`.
//! Irrelevant pairs follow the same rule over non-matching descriptors. Neighbour
//! ranking uses squared Euclidean distance in the original space against every
//! candidate in the set, with ties broken by lower index.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::descriptors::DescriptorSet;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Index pair `(i, j)` with `i < j`.
pub type Pair = (usize, usize);

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionConfig {
    pub k: usize,
    /// Per-point cap on sampled non-matching partners; `None` keeps every cross-group pair.
    pub max_irrelevant_per_point: Option<usize>,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            max_irrelevant_per_point: None,
            seed: 0,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.max_irrelevant_per_point == Some(0) {
            return Err(Error::InvalidArgument(
                "max_irrelevant_per_point must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subset {
    RelNear,
    RelFar,
    IrrNear,
    IrrFar,
}

impl Subset {
    pub const ALL: [Subset; 4] = [Subset::RelNear, Subset::RelFar, Subset::IrrNear, Subset::IrrFar];

    pub fn code(self) -> &'static str {
        match self {
            Subset::RelNear => "RN",
            Subset::RelFar => "RF",
            Subset::IrrNear => "IN",
            Subset::IrrFar => "IF",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Subset::RelNear => "Rel-Near",
            Subset::RelFar => "Rel-Far",
            Subset::IrrNear => "Irr-Near",
            Subset::IrrFar => "Irr-Far",
        }
    }

    pub fn is_relevant(self) -> bool {
        matches!(self, Subset::RelNear | Subset::RelFar)
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RN" => Ok(Subset::RelNear),
            "RF" => Ok(Subset::RelFar),
            "IN" => Ok(Subset::IrrNear),
            "IF" => Ok(Subset::IrrFar),
            other => Err(Error::Format(format!("unknown subset code {other:?}"))),
        }
    }
}

/// Matching and non-matching pairs before the near/far split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePairs {
    pub relevant: Vec<Pair>,
    pub irrelevant: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairPartition {
    pub rel_near: Vec<Pair>,
    pub rel_far: Vec<Pair>,
    pub irr_near: Vec<Pair>,
    pub irr_far: Vec<Pair>,
    /// Neighbour count the split was computed with.
    pub k: usize,
    /// Seed used for irrelevant-pair sampling.
    pub seed: u64,
}

impl PairPartition {
    pub fn subset(&self, which: Subset) -> &[Pair] {
        match which {
            Subset::RelNear => &self.rel_near,
            Subset::RelFar => &self.rel_far,
            Subset::IrrNear => &self.irr_near,
            Subset::IrrFar => &self.irr_far,
        }
    }

    fn subset_mut(&mut self, which: Subset) -> &mut Vec<Pair> {
        match which {
            Subset::RelNear => &mut self.rel_near,
            Subset::RelFar => &mut self.rel_far,
            Subset::IrrNear => &mut self.irr_near,
            Subset::IrrFar => &mut self.irr_far,
        }
    }

    pub fn relevant(&self) -> impl Iterator<Item = Pair> + '_ {
        self.rel_near.iter().chain(&self.rel_far).copied()
    }

    pub fn irrelevant(&self) -> impl Iterator<Item = Pair> + '_ {
        self.irr_near.iter().chain(&self.irr_far).copied()
    }

    pub fn total_pairs(&self) -> usize {
        Subset::ALL.iter().map(|&s| self.subset(s).len()).sum()
    }

    /// Collapses the near/far split: all relevant pairs go to Rel-Near and all
    /// irrelevant pairs to Irr-Near, leaving both far subsets empty.
    pub fn merge_near_far(&self) -> PairPartition {
        PairPartition {
            rel_near: self.relevant().collect(),
            rel_far: Vec::new(),
            irr_near: self.irrelevant().collect(),
            irr_far: Vec::new(),
            k: self.k,
            seed: self.seed,
        }
    }

    /// Checks index bounds, `i < j`, label consistency and pairwise disjointness.
    pub fn validate(&self, set: &DescriptorSet) -> Result<()> {
        let mut seen = BTreeSet::new();
        for which in Subset::ALL {
            for &(i, j) in self.subset(which) {
                check_pair(set, (i, j), which.is_relevant())?;
                if !seen.insert((i, j)) {
                    return Err(Error::InvalidArgument(format!(
                        "pair ({i}, {j}) appears more than once in the partition"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# rde-partition k={} seed={}\n", self.k, self.seed);
        for which in Subset::ALL {
            for &(i, j) in self.subset(which) {
                out.push_str(&format!("{} {i} {j}\n", which.code()));
            }
        }
        out
    }

    /// Parses the `subset i j` line format. The `# rde-partition k=.. seed=..` header
    /// is required; other `#` lines are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut partition = PairPartition::default();
        let mut header = false;
        for (idx, line) in text.lines().enumerate() {
            let row = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# rde-partition") {
                for token in rest.split_whitespace() {
                    let (key, value) = token.split_once('=').ok_or_else(|| Error::Parse {
                        row,
                        col: 0,
                        msg: format!("bad header token {token:?}"),
                    })?;
                    let parsed = value.parse::<u64>().map_err(|_| Error::Parse {
                        row,
                        col: 0,
                        msg: format!("header value {value:?} is not an integer"),
                    })?;
                    match key {
                        "k" => partition.k = parsed as usize,
                        "seed" => partition.seed = parsed,
                        _ => {}
                    }
                }
                header = true;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    row,
                    col: fields.len().min(3) + 1,
                    msg: "expected `subset i j`".into(),
                });
            }
            let which: Subset = fields[0].parse().map_err(|_| Error::Parse {
                row,
                col: 1,
                msg: format!("unknown subset {:?}", fields[0]),
            })?;
            let parse_idx = |col: usize| {
                fields[col].parse::<usize>().map_err(|_| Error::Parse {
                    row,
                    col: col + 1,
                    msg: format!("{:?} is not an index", fields[col]),
                })
            };
            let pair = (parse_idx(1)?, parse_idx(2)?);
            partition.subset_mut(which).push(pair);
        }
        if !header {
            return Err(Error::Format("missing `# rde-partition` header".into()));
        }
        Ok(partition)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn check_pair(set: &DescriptorSet, (i, j): Pair, relevant: bool) -> Result<()> {
    let n = set.len();
    if i >= j || j >= n {
        return Err(Error::InvalidArgument(format!(
            "pair ({i}, {j}) must satisfy i < j < {n}"
        )));
    }
    if (set.group(i) == set.group(j)) != relevant {
        return Err(Error::InvalidArgument(format!(
            "pair ({i}, {j}) labelled {} but groups are {} and {}",
            if relevant { "relevant" } else { "irrelevant" },
            set.group(i),
            set.group(j)
        )));
    }
    Ok(())
}

/// All within-group pairs, plus cross-group pairs either exhaustively or sampled per point.
///
/// Sampling rule with cap `m`: one [`SplitMix64`] stream seeded with `config.seed`; for
/// each point `i` in index order, list its non-matching partners in ascending index
/// order and draw `min(m, len)` of them with partial Fisher-Yates. Each drawn partner
/// contributes the pair `(min(i, j), max(i, j))`; duplicates collapse and the result is
/// sorted.
pub fn enumerate_pairs(set: &DescriptorSet, config: &PartitionConfig) -> Result<CandidatePairs> {
    config.validate()?;
    let n = set.len();
    let groups = set.group_ids();

    let mut relevant = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if groups[i] == groups[j] {
                relevant.push((i, j));
            }
        }
    }

    let irrelevant = match config.max_irrelevant_per_point {
        None => {
            let mut all = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if groups[i] != groups[j] {
                        all.push((i, j));
                    }
                }
            }
            all
        }
        Some(cap) => {
            let mut rng = SplitMix64::new(config.seed);
            let mut chosen = BTreeSet::new();
            for i in 0..n {
                let partners: Vec<usize> = (0..n).filter(|&j| groups[j] != groups[i]).collect();
                for slot in rng.sample_indices(partners.len(), cap) {
                    let j = partners[slot];
                    chosen.insert((i.min(j), i.max(j)));
                }
            }
            chosen.into_iter().collect()
        }
    };

    if relevant.is_empty() && irrelevant.is_empty() {
        return Err(Error::DegenerateLabeling);
    }
    Ok(CandidatePairs {
        relevant,
        irrelevant,
    })
}

/// The `k` nearest matching and `k` nearest non-matching neighbours of each point,
/// each list sorted by index for membership lookups.
#[derive(Debug, Clone)]
struct NeighbourLists {
    matching: Vec<Vec<usize>>,
    non_matching: Vec<Vec<usize>>,
}

fn k_nearest(mut candidates: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, by_rank);
        candidates.truncate(k);
    }
    let mut picked: Vec<usize> = candidates.into_iter().map(|(_, idx)| idx).collect();
    picked.sort_unstable();
    picked
}

fn neighbour_lists(set: &DescriptorSet, k: usize) -> NeighbourLists {
    let n = set.len();
    let lists: Vec<(Vec<usize>, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let g = set.group(i);
            let mut same = Vec::new();
            let mut other = Vec::new();
            for c in 0..n {
                if c == i {
                    continue;
                }
                let entry = (set.sq_dist(i, c), c);
                if set.group(c) == g {
                    same.push(entry);
                } else {
                    other.push(entry);
                }
            }
            (k_nearest(same, k), k_nearest(other, k))
        })
        .collect();
    let (matching, non_matching) = lists.into_iter().unzip();
    NeighbourLists {
        matching,
        non_matching,
    }
}

/// Splits candidate pairs into the four subsets. Pair order within each subset follows
/// the input order.
pub fn partition_pairs(
    set: &DescriptorSet,
    pairs: &CandidatePairs,
    config: &PartitionConfig,
) -> Result<PairPartition> {
    config.validate()?;
    for &p in &pairs.relevant {
        check_pair(set, p, true)?;
    }
    for &p in &pairs.irrelevant {
        check_pair(set, p, false)?;
    }

    let nn = neighbour_lists(set, config.k);
    let is_near = |lists: &[Vec<usize>], (i, j): Pair| {
        lists[i].binary_search(&j).is_ok() || lists[j].binary_search(&i).is_ok()
    };

    let mut partition = PairPartition {
        k: config.k,
        seed: config.seed,
        ..Default::default()
    };
    for &p in &pairs.relevant {
        if is_near(&nn.matching, p) {
            partition.rel_near.push(p);
        } else {
            partition.rel_far.push(p);
        }
    }
    for &p in &pairs.irrelevant {
        if is_near(&nn.non_matching, p) {
            partition.irr_near.push(p);
        } else {
            partition.irr_far.push(p);
        }
    }
    Ok(partition)
}

/// [`enumerate_pairs`] followed by [`partition_pairs`].
pub fn build_partition(set: &DescriptorSet, config: &PartitionConfig) -> Result<PairPartition> {
    let pairs = enumerate_pairs(set, config)?;
    partition_pairs(set, &pairs, config)
}
