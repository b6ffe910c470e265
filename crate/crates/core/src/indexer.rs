//! Distances between failures, fault-count estimation and clustering.
//!
//! The count is estimated with a subtractive mountain method over the
//! distance matrix; the medoids it picks seed a swap-based K-medoids.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("distance matrix is not square ({rows} rows, row {row} has {len} entries)")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("distance matrix entry ({0}, {1}) is negative or not finite")]
    BadEntry(usize, usize),
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("distance matrix diagonal entry {0} is not zero")]
    NonzeroDiagonal(usize),
    #[error("cannot form {k} clusters from {n} failures")]
    TooManyClusters { k: usize, n: usize },
    #[error("fingerprints have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no failures to index")]
    Empty,
}

/// Ratio of the larger to the smaller original image side.
pub fn size_div(side_a: usize, side_b: usize) -> f64 {
    let (lo, hi) = if side_a <= side_b {
        (side_a, side_b)
    } else {
        (side_b, side_a)
    };
    hi as f64 / lo as f64
}

/// Learned dissimilarity scaled by the size ratio: `(1 - sim) * sd`.
pub fn pms_distance(sim: f64, sd: f64) -> f64 {
    (1.0 - sim) * sd
}

/// Symmetric, zero-diagonal, finite, nonnegative `n x n` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for DistanceMatrix {
    type Error = IndexError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, IndexError> {
        let n = rows.len();
        let mut d = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(IndexError::NotSquare {
                    rows: n,
                    row: i,
                    len: r.len(),
                });
            }
            d.extend_from_slice(r);
        }
        let m = DistanceMatrix { n, d };
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(IndexError::NonzeroDiagonal(i));
            }
            for j in 0..n {
                let v = m.get(i, j);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(IndexError::BadEntry(i, j));
                }
                if v != m.get(j, i) {
                    return Err(IndexError::Asymmetric(i, j));
                }
            }
        }
        Ok(m)
    }
}

impl From<DistanceMatrix> for Vec<Vec<f64>> {
    fn from(m: DistanceMatrix) -> Self {
        m.d.chunks(m.n.max(1))
            .take(m.n)
            .map(|r| r.to_vec())
            .collect()
    }
}

impl DistanceMatrix {
    /// Builds a matrix from `f(i, j)` evaluated for `i < j` only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, IndexError> {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(IndexError::BadEntry(i, j));
                }
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Ok(DistanceMatrix { n, d })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.clone().into()
    }

    fn mean_off_diagonal(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                s += self.get(i, j);
            }
        }
        s / (self.n * (self.n - 1) / 2) as f64
    }
}

/// Mountain-method constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainConfig {
    /// `r_a = max(ra_factor * mean distance, ra_floor)`.
    pub ra_factor: f64,
    pub ra_floor: f64,
    /// `r_b = rb_factor * r_a`.
    pub rb_factor: f64,
    /// Stop once the best revised potential drops below `delta` times the
    /// first medoid's potential.
    pub delta: f64,
}

impl Default for MountainConfig {
    fn default() -> Self {
        MountainConfig {
            ra_factor: 1.0,
            ra_floor: 0.5,
            rb_factor: 1.5,
            delta: 0.15,
        }
    }
}

fn argmax_first(v: &[f64], skip: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if skip[i] {
            continue;
        }
        if best.is_none_or(|b| x > v[b]) {
            best = Some(i);
        }
    }
    best
}

/// `r_a` and the initial potential of every failure.
fn potentials(d: &DistanceMatrix, cfg: &MountainConfig) -> (f64, Vec<f64>) {
    let n = d.len();
    let ra = (cfg.ra_factor * d.mean_off_diagonal()).max(cfg.ra_floor);
    if ra <= 0.0 {
        return (ra, vec![0.0; n]);
    }
    let alpha = (2.0 / ra).powi(2);
    let pot = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (-alpha * d.get(i, j).powi(2)).exp())
                .sum()
        })
        .collect();
    (ra, pot)
}

/// Picks medoids by repeatedly taking the highest-potential failure and
/// discounting the potential around it. Returns them in selection order;
/// their count is the estimated number of faults.
pub fn estimate_fault_count(d: &DistanceMatrix, cfg: &MountainConfig) -> Vec<usize> {
    let n = d.len();
    if n == 0 {
        return Vec::new();
    }
    let (ra, mut pot) = potentials(d, cfg);
    if ra <= 0.0 {
        // every failure coincides
        return vec![0];
    }
    let beta = (2.0 / (cfg.rb_factor * ra)).powi(2);
    let mut chosen = vec![false; n];
    let mut medoids = Vec::new();
    let mut first = None;
    while let Some(c) = argmax_first(&pot, &chosen) {
        let p = pot[c];
        match first {
            None => first = Some(p),
            Some(f) if p < cfg.delta * f || p <= 0.0 => break,
            Some(_) => {}
        }
        medoids.push(c);
        chosen[c] = true;
        for i in 0..n {
            pot[i] -= p * (-beta * d.get(i, c).powi(2)).exp();
        }
    }
    medoids
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub medoids: Vec<usize>,
    /// Cluster index (position in `medoids`) of every failure.
    pub assignment: Vec<usize>,
    pub cost: f64,
}

fn assign(d: &DistanceMatrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let assignment = (0..d.len())
        .map(|i| {
            let mut best = 0;
            for (c, &m) in medoids.iter().enumerate().skip(1) {
                if d.get(i, m) < d.get(i, medoids[best]) {
                    best = c;
                }
            }
            cost += d.get(i, medoids[best]);
            best
        })
        .collect();
    (assignment, cost)
}

/// Swap-based K-medoids. Each round tries every (medoid, non-medoid) swap
/// in index order and applies the cheapest one if it strictly lowers the
/// total distance. Failures go to the nearest medoid, lowest index on ties.
pub fn kmedoids(d: &DistanceMatrix, initial: &[usize]) -> Result<ClusteringResult, IndexError> {
    let (n, k) = (d.len(), initial.len());
    if n == 0 {
        return Err(IndexError::Empty);
    }
    if k == 0 || k > n {
        return Err(IndexError::TooManyClusters { k, n });
    }
    let mut medoids = initial.to_vec();
    let (mut assignment, mut cost) = assign(d, &medoids);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for mi in 0..k {
            for cand in 0..n {
                if medoids.contains(&cand) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[mi] = cand;
                let (_, c) = assign(d, &trial);
                if c < best.map_or(cost, |b| b.2) {
                    best = Some((mi, cand, c));
                }
            }
        }
        match best {
            Some((mi, cand, _)) => {
                medoids[mi] = cand;
                let (a, c) = assign(d, &medoids);
                assignment = a;
                cost = c;
            }
            None => break,
        }
    }
    Ok(ClusteringResult {
        k,
        medoids,
        assignment,
        cost,
    })
}

/// Estimates the count, then refines the estimate's medoids.
pub fn cluster(d: &DistanceMatrix, cfg: &MountainConfig) -> Result<ClusteringResult, IndexError> {
    let seeds = estimate_fault_count(d, cfg);
    kmedoids(d, &seeds)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64, IndexError> {
    if a.len() != b.len() {
        return Err(IndexError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Number of statement pairs ordered strictly oppositely by the two rankings.
/// A pair tied in either list contributes nothing.
pub fn kendall_distance(a: &[u32], b: &[u32]) -> Result<f64, IndexError> {
    if a.len() != b.len() {
        return Err(IndexError::LengthMismatch(a.len(), b.len()));
    }
    let mut n = 0u64;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let x = (a[i] as i64 - a[j] as i64).signum();
            let y = (b[i] as i64 - b[j] as i64).signum();
            if x * y < 0 {
                n += 1;
            }
        }
    }
    Ok(n as f64)
}

/// Failure-indexing technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sure,
    CovHit,
    CovCount,
    MseerGp19,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Sure,
        Method::CovHit,
        Method::CovCount,
        Method::MseerGp19,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sure => "sure",
            Method::CovHit => "cov_hit",
            Method::CovCount => "cov_count",
            Method::MseerGp19 => "mseer_gp19",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown method `{0}` (expected sure, cov_hit, cov_count or mseer_gp19)")]
pub struct UnknownMethod(pub String);

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownMethod(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Block matrix: `within` inside a block, `across` between blocks.
    fn blocks(sizes: &[usize], within: f64, across: f64) -> (DistanceMatrix, Vec<usize>) {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect();
        let l = labels.clone();
        let d = DistanceMatrix::from_fn(
            labels.len(),
            |i, j| {
                if l[i] == l[j] {
                    within
                } else {
                    across
                }
            },
        )
        .unwrap();
        (d, labels)
    }

    /// Same partition up to relabeling.
    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn eq11_examples() {
        assert_eq!(size_div(10, 8), 1.25);
        assert_eq!(size_div(8, 10), 1.25);
        assert_eq!(size_div(31, 31), 1.0);
        assert!((size_div(31, 39) - 1.258).abs() < 1e-3);
        assert_eq!(pms_distance(1.0, 1.7), 0.0);
        assert_eq!(pms_distance(0.0, 1.26), 1.26);
        assert!((pms_distance(0.99, 1.0) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn three_blobs() {
        let (d, labels) = blocks(&[2, 2, 3], 0.01, 3.0);
        let seeds = estimate_fault_count(&d, &MountainConfig::default());
        assert_eq!(seeds.len(), 3);
        let mut blobs: Vec<usize> = seeds.iter().map(|&s| labels[s]).collect();
        blobs.sort();
        assert_eq!(blobs, vec![0, 1, 2]);
        let r = kmedoids(&d, &seeds).unwrap();
        assert!(same_partition(&r.assignment, &labels));
    }

    #[test]
    fn degenerate_counts() {
        let zero = DistanceMatrix::from_fn(5, |_, _| 0.0).unwrap();
        assert_eq!(
            estimate_fault_count(&zero, &MountainConfig::default()).len(),
            1
        );
        let no_floor = MountainConfig {
            ra_floor: 0.0,
            ..MountainConfig::default()
        };
        assert_eq!(estimate_fault_count(&zero, &no_floor), vec![0]);
        let one = DistanceMatrix::from_fn(1, |_, _| 0.0).unwrap();
        assert_eq!(estimate_fault_count(&one, &no_floor), vec![0]);
        assert_eq!(cluster(&one, &no_floor).unwrap().assignment, vec![0]);
    }

    #[test]
    fn k_equals_n_and_k_equals_one() {
        let (d, _) = blocks(&[2, 3], 0.2, 1.0);
        let all: Vec<usize> = (0..5).collect();
        let r = kmedoids(&d, &all).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.assignment, all);
        // k = 1: the medoid minimises its column sum
        let d = DistanceMatrix::from_fn(4, |i, j| (i as f64 - j as f64).abs()).unwrap();
        let r = kmedoids(&d, &[0]).unwrap();
        let sums: Vec<f64> = (0..4).map(|c| (0..4).map(|i| d.get(i, c)).sum()).collect();
        let best = sums.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(sums[r.medoids[0]], best);
        assert!(matches!(
            kmedoids(&d, &[0, 1, 2, 3, 0]),
            Err(IndexError::TooManyClusters { k: 5, n: 4 })
        ));
    }

    #[test]
    fn baseline_distances() {
        assert_eq!(kendall_distance(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0.0);
        assert_eq!(kendall_distance(&[1, 2, 3], &[3, 2, 1]).unwrap(), 3.0);
        // ties in one list are not reversals
        assert_eq!(kendall_distance(&[1, 1, 3], &[2, 1, 3]).unwrap(), 0.0);
        assert_eq!(
            euclidean(&[1., 1., 0.], &[1., 0., 1.]).unwrap(),
            2f64.sqrt()
        );
        assert!(euclidean(&[1.], &[1., 2.]).is_err());
        assert!(kendall_distance(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(DistanceMatrix::try_from(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::try_from(vec![vec![1.0]]).is_err());
        assert!(DistanceMatrix::try_from(vec![vec![0.0, f64::NAN], vec![f64::NAN, 0.0]]).is_err());
        let ok = DistanceMatrix::try_from(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let json = serde_json::to_string(&ok).unwrap();
        assert_eq!(json, "[[0.0,1.0],[1.0,0.0]]");
        assert_eq!(serde_json::from_str::<DistanceMatrix>(&json).unwrap(), ok);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("crosstab".parse::<Method>().is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = DistanceMatrix> {
        (3usize..12).prop_flat_map(|n| {
            proptest::collection::vec(0.0f64..3.0, n * n)
                .prop_map(move |v| DistanceMatrix::from_fn(n, |i, j| v[i * n + j]).unwrap())
        })
    }

    proptest! {
        #[test]
        fn eq11_monotone(s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, sd1 in 1.0f64..3.0, sd2 in 1.0f64..3.0) {
            if s1 < s2 { prop_assert!(pms_distance(s1, sd1) > pms_distance(s2, sd1)); }
            if sd1 < sd2 { prop_assert!(pms_distance(s1, sd1) < pms_distance(s1, sd2)); }
        }

        #[test]
        fn kmedoids_is_well_formed(d in arb_matrix(), k in 1usize..5) {
            let k = k.min(d.len());
            let seeds: Vec<usize> = (0..k).collect();
            let (_, initial_cost) = assign(&d, &seeds);
            let r = kmedoids(&d, &seeds).unwrap();
            prop_assert!(r.cost <= initial_cost);
            for (c, &m) in r.medoids.iter().enumerate() {
                prop_assert_eq!(r.assignment[m], c);
            }
            prop_assert_eq!(r.assignment.len(), d.len());
        }

        #[test]
        fn estimate_is_permutation_equivariant(d in arb_matrix(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let n = d.len();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            // permuted[perm[i]][perm[j]] = d[i][j]
            let mut inv = vec![0; n];
            for (i, &p) in perm.iter().enumerate() { inv[p] = i; }
            let pd = DistanceMatrix::from_fn(n, |a, b| d.get(inv[a], inv[b])).unwrap();
            let cfg = MountainConfig { ra_floor: 0.0, ..MountainConfig::default() };
            // equivariance only holds when no two failures tie on potential
            let mut p = potentials(&d, &cfg).1;
            p.sort_by(f64::total_cmp);
            prop_assume!(p.windows(2).all(|w| w[1] - w[0] > 1e-9));
            let m1 = estimate_fault_count(&d, &cfg);
            let m2 = estimate_fault_count(&pd, &cfg);
            let mapped: Vec<usize> = m1.iter().map(|&i| perm[i]).collect();
            prop_assert_eq!(mapped, m2);
        }

        // Cross distances stay within 10% of each other and block sizes within
        // 2..=4: with a 0.15 stop threshold, a 2-block next to a 6-block
        // (sizes [2, 2, 6, 3]) is discounted below the cut-off.
        #[test]
        fn separated_blocks_are_recovered(
            sizes in proptest::collection::vec(2usize..=4, 1..=4),
            across in 1.26f64..4.0,
            jitter in proptest::collection::vec(0.0f64..1.0, 900),
        ) {
            let within_max = across / 100.0;
            let labels: Vec<usize> = sizes.iter().enumerate()
                .flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
            let n = labels.len();
            let d = DistanceMatrix::from_fn(n, |i, j| {
                let u = jitter[i * n + j];
                if labels[i] == labels[j] { u * within_max * 0.99 } else { across * (1.0 + 0.1 * u) }
            }).unwrap();
            let r = cluster(&d, &MountainConfig::default()).unwrap();
            prop_assert_eq!(r.k, sizes.len());
            prop_assert!(same_partition(&r.assignment, &labels));
        }
    }
}
