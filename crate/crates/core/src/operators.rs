//! Measurement models: Gaussian sensing ensembles, entrywise observation
//! sampling, observation-set partitioning, and empirical RIP probing.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{gaussian_matrix, seeded_rng};

/// A linear measurement map given by d dense matrices: X maps to the vector
/// of tr(A_i^T X).
#[derive(Debug, Clone)]
pub struct SensingOperator {
    m: usize,
    n: usize,
    mats: Vec<Matrix>,
}

impl SensingOperator {
    pub fn new(mats: Vec<Matrix>) -> Result<Self> {
        let first = mats.first().ok_or_else(|| Error::ConfigInvalid {
            field: "mats".into(),
            message: "need at least one measurement matrix".into(),
        })?;
        let (m, n) = (first.rows(), first.cols());
        for a in &mats {
            if a.rows() != m || a.cols() != n {
                return Err(Error::ShapeMismatch {
                    context: "sensing matrices must share dimensions".into(),
                });
            }
        }
        Ok(Self { m, n, mats })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_measurements(&self) -> usize {
        self.mats.len()
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.mats
    }

    /// The complete single-entry ensemble {e_i e_j^T}: an exact isometry
    /// whose alternating minimization reduces to the power method.
    pub fn single_entry_ensemble(m: usize, n: usize) -> Self {
        let mut mats = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                let mut a = Matrix::zeros(m, n);
                a.set(i, j, 1.0);
                mats.push(a);
            }
        }
        Self { m, n, mats }
    }

    /// Text serialization: "m n d" then d dense matrix blocks.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.m, self.n, self.mats.len());
        for a in &self.mats {
            out.push_str(&a.to_text());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))?;
        let parts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse("bad header".into())))
            .collect::<Result<_>>()?;
        let [m, n, d] = parts[..] else {
            return Err(Error::Parse("expected 'm n d' header".into()));
        };
        let rest: Vec<&str> = lines.collect();
        let block = m + 1;
        if rest.len() < d * block {
            return Err(Error::Parse("truncated operator file".into()));
        }
        let mats = (0..d)
            .map(|i| Matrix::from_text(&rest[i * block..(i + 1) * block].join("\n")))
            .collect::<Result<Vec<_>>>()?;
        if mats.iter().any(|a| a.rows() != m || a.cols() != n) {
            return Err(Error::Parse("block dimensions disagree with header".into()));
        }
        Self::new(mats)
    }
}

/// Gaussian ensemble with entries i.i.d. Normal(0, 1/d), which centers the
/// restricted isometry ratio at 1: E||A(X)||^2 = ||X||_F^2.
pub fn gaussian_ensemble(m: usize, n: usize, d: usize, seed: u64) -> SensingOperator {
    let mut rng = seeded_rng(seed);
    let std = 1.0 / (d as f64).sqrt();
    let mats = (0..d).map(|_| gaussian_matrix(m, n, std, &mut rng)).collect();
    SensingOperator { m, n, mats }
}

/// Forward map: b_i = tr(A_i^T X).
pub fn apply_sensing(op: &SensingOperator, x: &Matrix) -> Result<Vec<f64>> {
    if x.rows() != op.m || x.cols() != op.n {
        return Err(Error::ShapeMismatch {
            context: format!(
                "apply_sensing: X is {}x{}, operator is {}x{}",
                x.rows(),
                x.cols(),
                op.m,
                op.n
            ),
        });
    }
    Ok(op.mats.iter().map(|a| a.dot(x)).collect())
}

/// Adjoint map: sum_i b_i A_i.
pub fn adjoint_sensing(op: &SensingOperator, b: &[f64]) -> Result<Matrix> {
    if b.len() != op.mats.len() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "adjoint_sensing: got {} coefficients for {} matrices",
                b.len(),
                op.mats.len()
            ),
        });
    }
    let mut out = Matrix::zeros(op.m, op.n);
    for (bi, a) in b.iter().zip(&op.mats) {
        if *bi == 0.0 {
            continue;
        }
        out = out.add(&a.scale(*bi));
    }
    Ok(out)
}

/// Monte-Carlo lower bound on the rank-k RIP constant: the max over seeded
/// random rank-k unit-Frobenius test matrices of | ||A(X)||^2 - 1 |.
/// Exact computation is NP-hard, so this is reported as a lower bound only.
pub fn estimate_rip_constant(op: &SensingOperator, k: usize, trials: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f = gaussian_matrix(op.m, k, 1.0, &mut rng);
        let g = gaussian_matrix(op.n, k, 1.0, &mut rng);
        let x = f.matmul(&g.transpose());
        let norm = x.frobenius_norm();
        if norm == 0.0 {
            continue;
        }
        let x = x.scale(1.0 / norm);
        let b = apply_sensing(op, &x).expect("shapes checked by construction");
        let energy: f64 = b.iter().map(|v| v * v).sum();
        worst = worst.max((energy - 1.0).abs());
    }
    worst
}

/// Observed entries of an m x n matrix, as unique (row, col, value) triplets.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    m: usize,
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl ObservationSet {
    pub fn new(m: usize, n: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for &(i, j, v) in &entries {
            if i >= m || j >= n {
                return Err(Error::IndexOutOfBounds { i, j, m, n });
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { index: i * n + j });
            }
            if !seen.insert((i, j)) {
                return Err(Error::DuplicateObservation { i, j });
            }
        }
        Ok(Self { m, n, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Dense P_Omega(M) semantics: observed values placed on a zero matrix.
    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.m, self.n);
        for &(i, j, v) in &self.entries {
            out.set(i, j, v);
        }
        out
    }

    /// Triplet text format: "m n" header then "i j value" lines sorted
    /// lexicographically by (i, j).
    pub fn to_text(&self) -> String {
        let mut sorted = self.entries.clone();
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut out = format!("{} {}\n", self.m, self.n);
        for (i, j, v) in sorted {
            out.push_str(&format!("{i} {j} {v:.16e}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))?;
        let mut it = header.split_whitespace();
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad header".into()))?;
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad header".into()))?;
        let mut entries = Vec::new();
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let [i, j, v] = toks[..] else {
                return Err(Error::Parse(format!("bad triplet line {line:?}")));
            };
            entries.push((
                i.parse().map_err(|_| Error::Parse("bad row index".into()))?,
                j.parse().map_err(|_| Error::Parse("bad col index".into()))?,
                v.parse().map_err(|_| Error::Parse("bad value".into()))?,
            ));
        }
        Self::new(m, n, entries)
    }
}

/// A disjoint split of an observation set into 2T+1 parts over a common grid.
#[derive(Debug, Clone)]
pub struct PartitionedObservations {
    parts: Vec<ObservationSet>,
}

impl PartitionedObservations {
    pub fn parts(&self) -> &[ObservationSet] {
        &self.parts
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn m(&self) -> usize {
        self.parts[0].m()
    }

    pub fn n(&self) -> usize {
        self.parts[0].n()
    }

    pub fn total_observations(&self) -> usize {
        self.parts.iter().map(|p| p.len()).sum()
    }

    /// Union of all parts as a single observation set.
    pub fn union(&self) -> ObservationSet {
        let entries: Vec<_> = self
            .parts
            .iter()
            .flat_map(|p| p.entries().iter().copied())
            .collect();
        ObservationSet::new(self.m(), self.n(), entries)
            .expect("parts are disjoint by construction")
    }
}

/// Observe each entry of M independently with probability p.
pub fn sample_omega(m: &Matrix, p: f64, seed: u64) -> ObservationSet {
    assert!(p > 0.0 && p <= 1.0, "p must be in (0, 1]");
    let mut rng = seeded_rng(seed);
    let mut entries = Vec::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if rng.gen::<f64>() < p {
                entries.push((i, j, m.get(i, j)));
            }
        }
    }
    ObservationSet {
        m: m.rows(),
        n: m.cols(),
        entries,
    }
}

/// Assign each observation independently and uniformly to one of 2T+1
/// disjoint parts. The parts always form a true partition of the input.
pub fn partition_omega(
    omega: &ObservationSet,
    t: usize,
    seed: u64,
) -> Result<PartitionedObservations> {
    if omega.is_empty() {
        return Err(Error::EmptyPartition);
    }
    let num_parts = 2 * t + 1;
    let mut rng = seeded_rng(seed);
    let mut buckets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); num_parts];
    for &e in omega.entries() {
        buckets[rng.gen_range(0..num_parts)].push(e);
    }
    let parts = buckets
        .into_iter()
        .map(|entries| ObservationSet {
            m: omega.m,
            n: omega.n,
            entries,
        })
        .collect();
    Ok(PartitionedObservations { parts })
}

/// Read M at the listed indices: the triplet form of P_Omega(M).
pub fn project_omega(m: &Matrix, indices: &[(usize, usize)]) -> Result<ObservationSet> {
    let mut entries = Vec::with_capacity(indices.len());
    for &(i, j) in indices {
        if i >= m.rows() || j >= m.cols() {
            return Err(Error::IndexOutOfBounds {
                i,
                j,
                m: m.rows(),
                n: m.cols(),
            });
        }
        entries.push((i, j, m.get(i, j)));
    }
    ObservationSet::new(m.rows(), m.cols(), entries)
}
