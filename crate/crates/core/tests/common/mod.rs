//! Shared fixtures and independent reference implementations for integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rde_core::rng::SplitMix64;
use rde_core::{DescriptorSet, PairPartition};

pub fn random_set(rng: &mut SplitMix64, n: usize, dim: usize, groups: u64) -> DescriptorSet {
    let values: Vec<f64> = (0..n * dim).map(|_| rng.normal()).collect();
    let ids: Vec<u64> = (0..n).map(|i| i as u64 % groups).collect();
    DescriptorSet::new(values, dim, ids).unwrap()
}

/// Gaussian groups with per-group centers, so near/far splits are non-trivial.
pub fn clustered_set(rng: &mut SplitMix64, n: usize, dim: usize, groups: u64, spread: f64) -> DescriptorSet {
    let centers: Vec<Vec<f64>> = (0..groups).map(|_| (0..dim).map(|_| spread * rng.normal()).collect()).collect();
    let ids: Vec<u64> = (0..n).map(|i| i as u64 % groups).collect();
    let mut values = Vec::with_capacity(n * dim);
    for &g in &ids {
        for c in &centers[g as usize] {
            values.push(c + rng.normal());
        }
    }
    DescriptorSet::new(values, dim, ids).unwrap()
}

pub fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

pub fn random_spd(rng: &mut SplitMix64, n: usize, shift: f64) -> DMatrix<f64> {
    let g = random_matrix(rng, n, n);
    &g * g.transpose() + DMatrix::identity(n, n) * shift
}

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Whether `j` is among the `k` nearest of `i` within `candidates`, ranking by squared
/// distance with ties broken toward lower index. Counts strictly better candidates.
pub fn within_k(set: &DescriptorSet, i: usize, j: usize, k: usize, same_group: bool) -> bool {
    let dij = sq(set.row(i), set.row(j));
    let better = (0..set.len())
        .filter(|&c| c != i && c != j)
        .filter(|&c| (set.group(c) == set.group(i)) == same_group)
        .filter(|&c| {
            let dc = sq(set.row(i), set.row(c));
            dc < dij || (dc == dij && c < j)
        })
        .count();
    better < k
}

/// Brute-force four-way partition of every pair in the set.
pub fn brute_partition(set: &DescriptorSet, k: usize) -> PairPartition {
    let mut p = PairPartition {
        k,
        ..Default::default()
    };
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let same = set.group(i) == set.group(j);
            let near = within_k(set, i, j, k, same) || within_k(set, j, i, k, same);
            match (same, near) {
                (true, true) => p.rel_near.push((i, j)),
                (true, false) => p.rel_far.push((i, j)),
                (false, true) => p.irr_near.push((i, j)),
                (false, false) => p.irr_far.push((i, j)),
            }
        }
    }
    p
}

/// Lower-triangular `L` with `L L^T = b`.
pub fn cholesky(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = b[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                assert!(s > 0.0, "matrix is not positive definite");
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    l
}

fn lower_solve(l: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = rhs.clone();
    for c in 0..rhs.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for p in 0..i {
                s -= l[(i, p)] * x[(p, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: `(values, vectors as columns)`.
pub fn jacobi(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 * m.norm_squared().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (mp, mq) = (m[(r, p)], m[(r, q)]);
                    m[(r, p)] = c * mp - s * mq;
                    m[(r, q)] = s * mp + c * mq;
                }
                for r in 0..n {
                    let (mp, mq) = (m[(p, r)], m[(q, r)]);
                    m[(p, r)] = c * mp - s * mq;
                    m[(q, r)] = s * mp + c * mq;
                }
                for r in 0..n {
                    let (vp, vq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = c * vp - s * vq;
                    v[(r, q)] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

/// Generalized eigenpairs of `(a, b)` by Cholesky reduction, descending; vectors are
/// rows normalized to `v^T b v = 1`.
pub fn oracle_generalized(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let l = cholesky(b);
    let n = a.nrows();
    let linv = lower_solve(&l, &DMatrix::identity(n, n));
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let (vals, vecs) = jacobi(&c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    let back = linv.transpose() * vecs;
    let mut rows = DMatrix::zeros(n, n);
    for (r, &idx) in order.iter().enumerate() {
        rows.row_mut(r).copy_from(&back.column(idx).transpose());
    }
    (order.iter().map(|&i| vals[i]).collect(), rows)
}

/// Largest principal angle (radians) between the row spaces of `a` and `b`, via
/// Gram-Schmidt and the projection residual norm.
pub fn max_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let orth = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for r in 0..m.nrows() {
            let mut v: Vec<f64> = m.row(r).iter().copied().collect();
            for _ in 0..2 {
                for q in &basis {
                    let d: f64 = v.iter().zip(q).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
                }
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            basis.push(v.into_iter().map(|x| x / nrm).collect());
        }
        basis
    };
    let qa = orth(a);
    let qb = orth(b);
    let mut worst: f64 = 0.0;
    for v in &qb {
        let mut res = v.clone();
        for q in &qa {
            let d: f64 = v.iter().zip(q).map(|(x, y)| x * y).sum();
            res.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
        }
        let s = res.iter().map(|x| x * x).sum::<f64>().sqrt().min(1.0);
        worst = worst.max(s.asin());
    }
    worst
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
