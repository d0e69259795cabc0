//! Deterministic synthetic descriptor sets.
//!
//! * `diagonal-intra`: two classes, each a chain of isotropic clusters laid along the
//!   diagonal `u = (1, 1) / sqrt(2)`. Class 1 is class 0 shifted horizontally, so the
//!   class mean difference is not the within-class direction; only the direction
//!   orthogonal to the chains separates them cleanly.
//! * `boundary-shape`: two classes, each four isotropic clusters at fixed positions; class
//!   1 is the point reflection of class 0 through the origin. Two clusters of each class
//!   sit on a vertical column near the origin, the other two on arms pointing away, so the
//!   class boundary bends around the origin. The direction of largest inter-class
//!   variance mixes the clusters next to the boundary, while a different direction keeps
//!   them apart.
//! * `gaussian-groups`: `n_groups` isotropic Gaussian groups in `D` dimensions, with an
//!   optional block of trailing nuisance coordinates whose group centers spread widely
//!   and whose within-group noise is large.
//!
//! All randomness comes from [`SplitMix64`] seeded with `spec.seed`, drawn in the order
//! documented on each generator.

use std::fmt;
use std::str::FromStr;

use crate::descriptors::DescriptorSet;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    DiagonalIntra,
    BoundaryShape,
    GaussianGroups,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::DiagonalIntra => "diagonal-intra",
            Scenario::BoundaryShape => "boundary-shape",
            Scenario::GaussianGroups => "gaussian-groups",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal-intra" => Ok(Scenario::DiagonalIntra),
            "boundary-shape" => Ok(Scenario::BoundaryShape),
            "gaussian-groups" => Ok(Scenario::GaussianGroups),
            other => Err(Error::InvalidArgument(format!("unknown scenario {other:?}"))),
        }
    }
}

/// Generator parameters. For `diagonal-intra`, `between_spread` is the horizontal class
/// shift and `within_spread` the cluster spacing along the chain. For `boundary-shape`,
/// `between_spread` scales the cluster layout and `within_spread` is unused. In both toy
/// scenarios `noise_scale` is the isotropic per-cluster standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n_per_group: usize,
    pub dim: usize,
    pub noise_scale: f64,
    pub seed: u64,
    /// `gaussian-groups` only.
    pub n_groups: usize,
    pub between_spread: f64,
    pub within_spread: f64,
    /// Trailing nuisance coordinates (`gaussian-groups` only).
    pub nuisance_dims: usize,
    /// Spread of group centers along nuisance coordinates.
    pub nuisance_spread: f64,
    /// Local clusters per class (`diagonal-intra` only; `boundary-shape` always uses four).
    pub clusters_per_class: usize,
}

impl ScenarioSpec {
    pub fn diagonal_intra(seed: u64) -> Self {
        Self {
            scenario: Scenario::DiagonalIntra,
            n_per_group: 200,
            dim: 2,
            noise_scale: 0.5,
            seed,
            n_groups: 2,
            between_spread: 3.0,
            within_spread: 6.0,
            nuisance_dims: 0,
            nuisance_spread: 0.0,
            clusters_per_class: 5,
        }
    }

    pub fn boundary_shape(seed: u64) -> Self {
        Self {
            scenario: Scenario::BoundaryShape,
            n_per_group: 200,
            dim: 2,
            noise_scale: 0.5,
            seed,
            n_groups: 2,
            between_spread: 1.0,
            within_spread: 1.0,
            nuisance_dims: 0,
            nuisance_spread: 0.0,
            clusters_per_class: BOUNDARY_LAYOUT.len(),
        }
    }

    pub fn gaussian_groups(seed: u64) -> Self {
        Self {
            scenario: Scenario::GaussianGroups,
            n_per_group: 10,
            dim: 8,
            noise_scale: 1.0,
            seed,
            n_groups: 20,
            between_spread: 3.0,
            within_spread: 1.0,
            nuisance_dims: 0,
            nuisance_spread: 0.0,
            clusters_per_class: 1,
        }
    }

    pub fn default_for(scenario: Scenario, seed: u64) -> Self {
        match scenario {
            Scenario::DiagonalIntra => Self::diagonal_intra(seed),
            Scenario::BoundaryShape => Self::boundary_shape(seed),
            Scenario::GaussianGroups => Self::gaussian_groups(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_per_group == 0 {
            return bad("n_per_group must be positive".into());
        }
        for (name, v) in [
            ("noise_scale", self.noise_scale),
            ("between_spread", self.between_spread),
            ("within_spread", self.within_spread),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        match self.scenario {
            Scenario::DiagonalIntra | Scenario::BoundaryShape => {
                if self.dim != 2 {
                    return bad(format!("{} requires dim = 2, got {}", self.scenario, self.dim));
                }
                if self.clusters_per_class == 0 {
                    return bad("clusters_per_class must be positive".into());
                }
                if self.n_per_group < 2 {
                    return bad("two-class scenarios need at least 2 points per class".into());
                }
            }
            Scenario::GaussianGroups => {
                if self.n_groups == 0 || self.n_groups * self.n_per_group < 2 {
                    return bad("gaussian-groups needs at least 2 descriptors".into());
                }
                if self.dim == 0 || self.nuisance_dims >= self.dim {
                    return bad(format!(
                        "nuisance_dims ({}) must leave at least one signal dimension of {}",
                        self.nuisance_dims, self.dim
                    ));
                }
                if !(self.nuisance_spread >= 0.0) || !self.nuisance_spread.is_finite() {
                    return bad("nuisance_spread must be finite and >= 0".into());
                }
            }
        }
        Ok(())
    }
}

/// Generates the descriptor set described by `spec`.
///
/// Draw order: toy scenarios emit class 0 then class 1; point `p` of a class belongs to
/// cluster `p % clusters_per_class` and consumes two normals (x then y).
/// `gaussian-groups` first draws every group center (signal coordinates, then nuisance
/// coordinates), then every point group by group, coordinate by coordinate.
pub fn generate(spec: &ScenarioSpec) -> Result<DescriptorSet> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let (values, groups) = match spec.scenario {
        Scenario::DiagonalIntra => toy(spec, &mut rng, diagonal_center),
        Scenario::BoundaryShape => {
            let spec = ScenarioSpec { clusters_per_class: BOUNDARY_LAYOUT.len(), ..spec.clone() };
            toy(&spec, &mut rng, boundary_center)
        }
        Scenario::GaussianGroups => gaussian_groups(spec, &mut rng),
    };
    DescriptorSet::new(values, spec.dim, groups)
}

fn diagonal_center(spec: &ScenarioSpec, class: usize, cluster: usize) -> [f64; 2] {
    let c = spec.clusters_per_class as f64;
    let along = (cluster as f64 - (c - 1.0) / 2.0) * spec.within_spread;
    let u = std::f64::consts::FRAC_1_SQRT_2;
    let shift = if class == 1 { spec.between_spread } else { 0.0 };
    [along * u + shift, along * u]
}

/// Class 0 cluster centers for `boundary-shape` at unit scale.
pub const BOUNDARY_LAYOUT: [[f64; 2]; 4] = [[4.0, -1.5], [-3.0, -3.7], [-0.1, 3.1], [-0.1, 0.7]];

fn boundary_center(spec: &ScenarioSpec, class: usize, cluster: usize) -> [f64; 2] {
    let side = if class == 0 { 1.0 } else { -1.0 };
    let [x, y] = BOUNDARY_LAYOUT[cluster % BOUNDARY_LAYOUT.len()];
    [side * spec.between_spread * x, side * spec.between_spread * y]
}

fn toy(
    spec: &ScenarioSpec,
    rng: &mut SplitMix64,
    center: fn(&ScenarioSpec, usize, usize) -> [f64; 2],
) -> (Vec<f64>, Vec<u64>) {
    let mut values = Vec::with_capacity(4 * spec.n_per_group);
    let mut groups = Vec::with_capacity(2 * spec.n_per_group);
    for class in 0..2 {
        for p in 0..spec.n_per_group {
            let [cx, cy] = center(spec, class, p % spec.clusters_per_class);
            values.push(cx + spec.noise_scale * rng.normal());
            values.push(cy + spec.noise_scale * rng.normal());
            groups.push(class as u64);
        }
    }
    (values, groups)
}

fn gaussian_groups(spec: &ScenarioSpec, rng: &mut SplitMix64) -> (Vec<f64>, Vec<u64>) {
    let signal = spec.dim - spec.nuisance_dims;
    let centers: Vec<Vec<f64>> = (0..spec.n_groups)
        .map(|_| {
            (0..spec.dim)
                .map(|c| {
                    let spread = if c < signal { spec.between_spread } else { spec.nuisance_spread };
                    spread * rng.normal()
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(spec.n_groups * spec.n_per_group * spec.dim);
    let mut groups = Vec::with_capacity(spec.n_groups * spec.n_per_group);
    for (g, center) in centers.iter().enumerate() {
        for _ in 0..spec.n_per_group {
            for (c, &mu) in center.iter().enumerate() {
                let sd = if c < signal { spec.within_spread } else { spec.noise_scale };
                values.push(mu + sd * rng.normal());
            }
            groups.push(g as u64);
        }
    }
    (values, groups)
}
