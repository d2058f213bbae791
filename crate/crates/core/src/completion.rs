//! Matrix completion: clipped-SVD initialization, alternating least squares
//! with per-column decoupled solves, and incoherence diagnostics.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{self, qr_decompose, svd_topk_with_budget, SvdResult};
use crate::matrix::Matrix;
use crate::operators::{ObservationSet, PartitionedObservations};
use crate::sensing::{ConvergenceTrace, FactorPair, Mode, SolverConfig, TraceRecord};

const ORTHONORMAL_TOL: f64 = 1e-8;

/// Incoherence measurement of an orthonormal basis: mu = sqrt(m/k) times the
/// largest row norm. mu = 1 is perfectly spread mass; mu = sqrt(m/k) means a
/// single row carries a whole unit direction.
#[derive(Debug, Clone)]
pub struct IncoherenceReport {
    pub mu: f64,
    pub max_row_norm: f64,
    pub argmax_row: usize,
}

pub fn incoherence_of(u: &Matrix) -> Result<IncoherenceReport> {
    let k = u.cols();
    let defect = linalg::spectral_norm(&u.transpose_matmul(u).sub(&Matrix::identity(k)));
    if defect > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal {
            defect,
            tolerance: ORTHONORMAL_TOL,
        });
    }
    let mut max_row_norm = 0.0;
    let mut argmax_row = 0;
    for i in 0..u.rows() {
        let norm = u.row_norm(i);
        if norm > max_row_norm {
            max_row_norm = norm;
            argmax_row = i;
        }
    }
    Ok(IncoherenceReport {
        mu: (u.rows() as f64 / k as f64).sqrt() * max_row_norm,
        max_row_norm,
        argmax_row,
    })
}

/// Zero every entry larger in magnitude than `threshold`, then re-orthonormalize
/// the columns. The output spans the clipped matrix's column space.
pub fn clip_and_orthonormalize(u0: &Matrix, threshold: f64) -> Result<Matrix> {
    assert!(threshold > 0.0, "threshold must be positive");
    let clipped = Matrix::from_fn(u0.rows(), u0.cols(), |i, j| {
        let v = u0.get(i, j);
        if v.abs() > threshold {
            0.0
        } else {
            v
        }
    });
    match qr_decompose(&clipped) {
        Ok((q, _)) => Ok(q),
        Err(Error::RankDeficient { .. }) => Err(Error::ClippedToRankDeficient),
        Err(e) => Err(e),
    }
}

/// Clipping threshold for an initializer with `rows` rows, per the
/// incoherence definition's per-side scaling.
pub fn clip_threshold(mu: f64, k: usize, rows: usize) -> f64 {
    2.0 * mu * (k as f64).sqrt() / (rows as f64).sqrt()
}

/// Spectral initializer for completion: top-k left singular vectors of
/// (1/p_hat) P_Omega0(M), clipped and re-orthonormalized.
pub fn init_complete(part0: &ObservationSet, p_hat: f64, k: usize, mu: f64) -> Result<Matrix> {
    if part0.is_empty() {
        return Err(Error::EmptyPartition);
    }
    assert!(p_hat > 0.0 && p_hat <= 1.0, "p_hat must be in (0, 1]");
    let dense = part0.to_dense().scale(1.0 / p_hat);
    let svd = svd_topk_with_budget(&dense, k, linalg::SVD_MAX_SWEEPS)?;
    clip_and_orthonormalize(&svd.u, clip_threshold(mu, k, dense.rows()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowBlockSide {
    /// Solve for V with U fixed: one k-variable system per column of M.
    VStep,
    /// Solve for U with V fixed: one k-variable system per row of M.
    UStep,
}

/// Result of a decoupled row-block solve, with the indices that could not be
/// determined from the given observations.
#[derive(Debug, Clone)]
pub struct RowBlockSolution {
    pub factor: Matrix,
    /// Columns (V-step) or rows (U-step) with zero observations; their
    /// factor rows are zero.
    pub unobserved: Vec<usize>,
    /// Indices whose k x k normal system was singular and got the min-norm
    /// solution.
    pub singular: Vec<usize>,
}

/// The completion objective decouples: for each column j (V-step), minimize
/// sum over observed (i,j) of (M_ij - <row_i(basis), v>)^2, a k x k normal
/// system. The U-step is symmetric over rows.
pub fn solve_row_block(
    basis: &Matrix,
    part: &ObservationSet,
    side: RowBlockSide,
) -> Result<RowBlockSolution> {
    solve_row_block_with_ridge(basis, part, side, 0.0)
}

pub fn solve_row_block_with_ridge(
    basis: &Matrix,
    part: &ObservationSet,
    side: RowBlockSide,
    ridge: f64,
) -> Result<RowBlockSolution> {
    if part.is_empty() {
        return Err(Error::EmptyPartition);
    }
    let k = basis.cols();
    let out_rows = match side {
        RowBlockSide::VStep => part.n(),
        RowBlockSide::UStep => part.m(),
    };
    // Accumulate per-column (or per-row) normal systems in one pass.
    let mut grams = vec![Matrix::zeros(k, k); out_rows];
    let mut rhs = vec![vec![0.0; k]; out_rows];
    let mut counts = vec![0usize; out_rows];
    for &(i, j, value) in part.entries() {
        let (target, basis_row) = match side {
            RowBlockSide::VStep => (j, i),
            RowBlockSide::UStep => (i, j),
        };
        let row = basis.row(basis_row);
        let gram = &mut grams[target];
        for a in 0..k {
            rhs[target][a] += value * row[a];
            for b in 0..k {
                let cur = gram.get(a, b);
                gram.set(a, b, cur + row[a] * row[b]);
            }
        }
        counts[target] += 1;
    }
    let mut factor = Matrix::zeros(out_rows, k);
    let mut unobserved = Vec::new();
    let mut singular = Vec::new();
    for idx in 0..out_rows {
        if counts[idx] == 0 {
            unobserved.push(idx);
            continue;
        }
        let mut gram = grams[idx].clone();
        if ridge > 0.0 {
            for a in 0..k {
                let cur = gram.get(a, a);
                gram.set(a, a, cur + ridge);
            }
        }
        match cholesky_solve(&gram, &rhs[idx]) {
            Some(x) => factor.set_column_from_row(idx, &x),
            None => {
                singular.push(idx);
                let x = linalg::pinv_solve(&gram, &rhs[idx]);
                factor.set_column_from_row(idx, &x);
            }
        }
    }
    Ok(RowBlockSolution {
        factor,
        unobserved,
        singular,
    })
}

impl Matrix {
    fn set_column_from_row(&mut self, row: usize, values: &[f64]) {
        for (j, v) in values.iter().enumerate() {
            self.set(row, j, *v);
        }
    }
}

/// Cholesky solve for a small SPD system; None when not positive definite
/// to working precision.
fn cholesky_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    let scale = (0..n).map(|i| a.get(i, i)).fold(0.0f64, f64::max);
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for p in 0..j {
                s -= l.get(i, p) * l.get(j, p);
            }
            if i == j {
                if s <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return None;
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    // Forward then back substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l.get(i, p) * y[p];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for p in (i + 1)..n {
            s -= l.get(p, i) * x[p];
        }
        x[i] = s / l.get(i, i);
    }
    Some(x)
}

/// A completion instance: the partitioned observations plus dimensions,
/// target rank, and the sampling probability (supplied or estimated).
#[derive(Debug, Clone)]
pub struct CompletionProblem {
    pub partitions: PartitionedObservations,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub p_hat: f64,
}

impl CompletionProblem {
    /// Build from partitions, estimating p_hat from the initializer
    /// partition when no probability is supplied: |Omega_0| (2T+1) / (m n).
    pub fn new(partitions: PartitionedObservations, k: usize, p: Option<f64>) -> Result<Self> {
        let (m, n) = (partitions.m(), partitions.n());
        let p_hat = match p {
            Some(p) => p,
            None => {
                let parts = partitions.num_parts() as f64;
                (partitions.parts()[0].len() as f64 * parts / (m * n) as f64).min(1.0)
            }
        };
        if !(0.0..=1.0).contains(&p_hat) || p_hat == 0.0 {
            return Err(Error::ConfigInvalid {
                field: "p_hat".into(),
                message: format!("must be in (0, 1], got {p_hat}"),
            });
        }
        Ok(Self {
            partitions,
            m,
            n,
            k,
            p_hat,
        })
    }
}

/// Frobenius residual of the pair against the observed entries.
fn observed_residual(pair: &FactorPair, omega: &ObservationSet) -> f64 {
    let mut sum = 0.0;
    for &(i, j, value) in omega.entries() {
        let mut pred = 0.0;
        for c in 0..pair.rank() {
            pred += pair.u_hat.get(i, c) * pair.v_hat.get(j, c);
        }
        sum += (pred - value) * (pred - value);
    }
    sum.sqrt()
}

/// Alternating minimization for matrix completion.
///
/// Initializes from the clipped SVD of the scaled initializer partition,
/// then alternates decoupled V- and U-solves. With `cfg.omega_reuse` (the
/// default) every update and the initializer see the full observed set;
/// otherwise each half-step consumes its own fresh partition and the
/// initializer sees only partition 0, which matches the analysis-friendly
/// variant but starves per-column systems at desk-scale sampling rates.
pub fn altmin_complete(
    problem: &CompletionProblem,
    cfg: &SolverConfig,
    mu: f64,
    truth: Option<&SvdResult>,
) -> Result<(FactorPair, ConvergenceTrace)> {
    let expected_parts = 2 * cfg.t_max + 1;
    if problem.partitions.num_parts() != expected_parts {
        return Err(Error::ConfigInvalid {
            field: "partitions".into(),
            message: format!(
                "need 2T+1 = {expected_parts} parts for T = {}, got {}",
                cfg.t_max,
                problem.partitions.num_parts()
            ),
        });
    }
    let union = problem.partitions.union();
    let union_norm = {
        let mut s = 0.0;
        for &(_, _, v) in union.entries() {
            s += v * v;
        }
        s.sqrt()
    };
    let started = Instant::now();
    let mut trace = ConvergenceTrace::default();

    let init_part = if cfg.omega_reuse {
        &union
    } else {
        &problem.partitions.parts()[0]
    };
    trace.partitions_used.push(0);
    let mut u = init_complete(init_part, problem.p_hat, problem.k, mu)?;
    let dist_u_of = |u: &Matrix| -> Option<f64> {
        truth.map(|t| linalg::subspace_distance(u, &t.u).unwrap_or(1.0))
    };
    let dist_v_of = |v: &Matrix| -> Option<f64> {
        truth.map(|t| linalg::subspace_distance(v, &t.v).unwrap_or(1.0))
    };
    trace.records.push(TraceRecord {
        iter: 0,
        residual: union_norm,
        dist_u: dist_u_of(&u),
        dist_v: None,
        elapsed_ms: started.elapsed().as_secs_f64() * 1000.0,
    });
    let mut v = Matrix::zeros(problem.n, problem.k);
    for t in 0..cfg.t_max {
        let (v_part_idx, u_part_idx) = (t + 1, cfg.t_max + t + 1);
        let v_part = if cfg.omega_reuse {
            &union
        } else {
            &problem.partitions.parts()[v_part_idx]
        };
        let u_part = if cfg.omega_reuse {
            &union
        } else {
            &problem.partitions.parts()[u_part_idx]
        };
        trace.partitions_used.push(v_part_idx);
        trace.partitions_used.push(u_part_idx);

        if cfg.mode == Mode::Orthonormalized {
            let (q, _) = qr_decompose(&u).map_err(|_| Error::ClippedToRankDeficient)?;
            u = q;
        }
        let v_sol = solve_row_block_with_ridge(&u, v_part, RowBlockSide::VStep, cfg.ls_regularizer)?;
        v = v_sol.factor;
        for idx in v_sol.unobserved {
            trace.zero_filled.push((t + 1, 0, idx));
        }
        trace.min_norm_fallbacks += v_sol.singular.len();
        trace
            .half_residuals
            .push(observed_residual(&FactorPair { u_hat: u.clone(), v_hat: v.clone() }, &union));

        if cfg.mode == Mode::Orthonormalized {
            let (q, _) = qr_decompose(&v).map_err(|_| Error::ClippedToRankDeficient)?;
            v = q;
        }
        let u_sol = solve_row_block_with_ridge(&v, u_part, RowBlockSide::UStep, cfg.ls_regularizer)?;
        u = u_sol.factor;
        for idx in u_sol.unobserved {
            trace.zero_filled.push((t + 1, 1, idx));
        }
        trace.min_norm_fallbacks += u_sol.singular.len();
        let r_full = observed_residual(&FactorPair { u_hat: u.clone(), v_hat: v.clone() }, &union);
        trace.half_residuals.push(r_full);
        trace.records.push(TraceRecord {
            iter: t + 1,
            residual: r_full,
            dist_u: dist_u_of(&u),
            dist_v: dist_v_of(&v),
            elapsed_ms: started.elapsed().as_secs_f64() * 1000.0,
        });
        if union_norm > 0.0 && r_full <= cfg.tol * union_norm {
            break;
        }
    }
    Ok((FactorPair { u_hat: u, v_hat: v }, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::generate_problem;
    use crate::operators::{partition_omega, sample_omega};
    use crate::rng::{gaussian_matrix, seeded_rng};

    #[test]
    fn incoherence_extremes() {
        let m = 6;
        // First k columns of the identity: maximally coherent.
        let eye = Matrix::from_fn(m, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let rep = incoherence_of(&eye).unwrap();
        assert!((rep.mu - (m as f64 / 2.0).sqrt()).abs() < 1e-12);
        // Normalized all-ones column: perfectly incoherent.
        let ones = Matrix::from_fn(m, 1, |_, _| 1.0 / (m as f64).sqrt());
        let rep = incoherence_of(&ones).unwrap();
        assert!((rep.mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incoherence_matches_row_scan() {
        let g = gaussian_matrix(100, 2, 1.0, &mut seeded_rng(4));
        let (q, _) = qr_decompose(&g).unwrap();
        let rep = incoherence_of(&q).unwrap();
        let mut best = 0.0f64;
        for i in 0..100 {
            best = best.max(q.row_norm(i));
        }
        assert!((rep.mu - (50.0f64).sqrt() * best).abs() < 1e-12);
        assert!((q.row_norm(rep.argmax_row) - rep.max_row_norm).abs() < 1e-15);
    }

    #[test]
    fn incoherence_rejects_non_orthonormal() {
        let g = gaussian_matrix(10, 2, 1.0, &mut seeded_rng(5));
        assert!(matches!(
            incoherence_of(&g),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    #[test]
    fn clipping_identity_below_threshold() {
        let g = gaussian_matrix(30, 3, 1.0, &mut seeded_rng(6));
        let (q, _) = qr_decompose(&g).unwrap();
        let clipped = clip_and_orthonormalize(&q, 10.0).unwrap();
        assert!(linalg::subspace_distance(&clipped, &q).unwrap() < 1e-10);
    }

    #[test]
    fn clipping_whole_column_fails() {
        let e1 = Matrix::new(4, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            clip_and_orthonormalize(&e1, 0.9),
            Err(Error::ClippedToRankDeficient)
        ));
    }

    #[test]
    fn init_complete_full_grid_matches_clipped_svd() {
        let problem = generate_problem(20, 20, 2, 2.0, 7).unwrap();
        let omega = sample_omega(&problem.matrix, 1.0, 8);
        let u0 = init_complete(&omega, 1.0, 2, 3.0).unwrap();
        let d = linalg::subspace_distance(&u0, &problem.truth.u).unwrap();
        assert!(d < 1e-8, "dist {d}");
    }

    #[test]
    fn init_single_entry_is_row_axis() {
        let omega = ObservationSet::new(5, 5, vec![(2, 3, 7.0)]).unwrap();
        let dense = omega.to_dense();
        let svd = svd_topk_with_budget(&dense, 1, 500).unwrap();
        // Pre-clip initializer is the basis vector of the observed row.
        assert!((svd.u.get(2, 0).abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn row_block_exact_on_full_grid() {
        let problem = generate_problem(10, 8, 2, 2.0, 9).unwrap();
        let omega = sample_omega(&problem.matrix, 1.0, 10);
        let sol = solve_row_block(&problem.truth.u, &omega, RowBlockSide::VStep).unwrap();
        assert!(sol.unobserved.is_empty());
        // v_j recovers row j of V* Sigma*.
        let expected = Matrix::from_fn(8, 2, |j, c| {
            problem.truth.v.get(j, c) * problem.truth.sigma[c]
        });
        assert!(sol.factor.sub(&expected).frobenius_norm() < 1e-9);
    }

    #[test]
    fn row_block_flags_unobserved_column() {
        let problem = generate_problem(4, 3, 1, 1.0, 11).unwrap();
        // Only column 0 observed.
        let omega = ObservationSet::new(
            4,
            3,
            (0..4).map(|i| (i, 0, problem.matrix.get(i, 0))).collect(),
        )
        .unwrap();
        let sol = solve_row_block(&problem.truth.u, &omega, RowBlockSide::VStep).unwrap();
        assert_eq!(sol.unobserved, vec![1, 2]);
        assert_eq!(sol.factor.get(1, 0), 0.0);
        assert_eq!(sol.factor.get(2, 0), 0.0);
    }

    #[test]
    fn fully_observed_completion_recovers_exactly() {
        let problem = generate_problem(15, 15, 2, 2.0, 12).unwrap();
        let omega = sample_omega(&problem.matrix, 1.0, 13);
        let t = 3;
        let partitions = partition_omega(&omega, t, 14).unwrap();
        let cp = CompletionProblem::new(partitions, 2, Some(1.0)).unwrap();
        let cfg = SolverConfig {
            t_max: t,
            ..Default::default()
        };
        let (pair, _) = altmin_complete(&cp, &cfg, problem.mu, Some(&problem.truth)).unwrap();
        let rel = problem.matrix.sub(&pair.reconstruct()).frobenius_norm()
            / problem.matrix.frobenius_norm();
        assert!(rel < 1e-10, "relative error {rel}");
    }

    #[test]
    fn partition_log_consumes_each_index_once() {
        let problem = generate_problem(15, 15, 1, 1.0, 15).unwrap();
        let omega = sample_omega(&problem.matrix, 1.0, 16);
        let t = 2;
        let partitions = partition_omega(&omega, t, 17).unwrap();
        let cp = CompletionProblem::new(partitions, 1, Some(1.0)).unwrap();
        let cfg = SolverConfig {
            t_max: t,
            tol: 0.0,
            omega_reuse: false,
            ..Default::default()
        };
        let (_, trace) = altmin_complete(&cp, &cfg, problem.mu, None).unwrap();
        let mut used = trace.partitions_used.clone();
        used.sort_unstable();
        assert_eq!(used, (0..2 * t + 1).collect::<Vec<_>>());
    }

    #[test]
    fn p_hat_estimate_is_unbiased_shape() {
        let problem = generate_problem(40, 40, 1, 1.0, 18).unwrap();
        let omega = sample_omega(&problem.matrix, 0.5, 19);
        let partitions = partition_omega(&omega, 4, 20).unwrap();
        let part0_len = partitions.parts()[0].len();
        let cp = CompletionProblem::new(partitions, 1, None).unwrap();
        let expected = part0_len as f64 * 9.0 / 1600.0;
        assert!((cp.p_hat - expected).abs() < 1e-12);
    }
}
