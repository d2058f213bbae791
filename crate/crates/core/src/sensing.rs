//! Matrix-sensing solvers: alternating minimization with spectral
//! initialization, the QR-orthonormalized variant, and the stagewise solver
//! that grows the rank one singular direction at a time.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, qr_decompose, solve_least_squares_detailed, svd_topk_with_budget, SvdResult,
};
use crate::matrix::Matrix;
use crate::operators::{adjoint_sensing, apply_sensing, SensingOperator};

/// The bilinear iterate (U_hat, V_hat) representing X = U_hat * V_hat^T.
#[derive(Debug, Clone)]
pub struct FactorPair {
    pub u_hat: Matrix,
    pub v_hat: Matrix,
}

impl FactorPair {
    pub fn rank(&self) -> usize {
        self.u_hat.cols()
    }

    pub fn reconstruct(&self) -> Matrix {
        self.u_hat.matmul(&self.v_hat.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Standard,
    /// Orthonormalize each iterate by QR before the opposite solve. Spans
    /// produced this way match the standard mode exactly; this is the
    /// validation mode.
    Orthonormalized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Maximum outer iterations.
    pub t_max: usize,
    /// Early-stop threshold on the relative residual. The reference
    /// algorithms run exactly T iterations; easy instances saturate machine
    /// precision far sooner, hence the default.
    pub tol: f64,
    pub mode: Mode,
    /// Optional ridge added to least-squares subproblems; 0 matches the
    /// reference algorithms exactly.
    pub ls_regularizer: f64,
    pub seed: u64,
    /// Completion only: solve every update against the full observed set
    /// instead of consuming a fresh partition per half-step. Fresh
    /// partitions exist for analysis-style runs; at desk scale they starve
    /// the per-column subproblems.
    pub omega_reuse: bool,
    /// Sweep budget for inner truncated SVDs.
    pub svd_budget: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_max: 50,
            tol: 1e-12,
            mode: Mode::Standard,
            ls_regularizer: 0.0,
            seed: 0,
            omega_reuse: true,
            svd_budget: linalg::SVD_MAX_SWEEPS,
        }
    }
}

/// One trace record. Record 0 is the post-initialization state (no V yet,
/// residual is ||b||); record t >= 1 reflects the completed iteration t.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iter: usize,
    pub residual: f64,
    pub dist_u: Option<f64>,
    pub dist_v: Option<f64>,
    pub elapsed_ms: f64,
}

/// Per-run convergence log emitted by every solver.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
    /// Residual after every half-step (V-solve and U-solve), in order.
    pub half_residuals: Vec<f64>,
    /// Record indices at which each stage of the stagewise solver began.
    pub stage_starts: Vec<usize>,
    /// Partition indices consumed, in order (completion only).
    pub partitions_used: Vec<usize>,
    /// Count of least-squares subproblems that fell back to the min-norm
    /// solution because the design was rank deficient.
    pub min_norm_fallbacks: usize,
    /// (iter, side, index) of columns/rows zero-filled for lack of
    /// observations (completion only). Side 0 = V-step, 1 = U-step.
    pub zero_filled: Vec<(usize, usize, usize)>,
}

impl ConvergenceTrace {
    pub fn iterations_run(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_dist_u(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.dist_u)
    }

    pub fn final_dist_v(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.dist_v)
    }
}

/// Objective value ||A(U_hat V_hat^T) - b||_2.
pub fn residual(op: &SensingOperator, b: &[f64], pair: &FactorPair) -> Result<f64> {
    let bx = apply_sensing(op, &pair.reconstruct())?;
    if bx.len() != b.len() {
        return Err(Error::ShapeMismatch {
            context: "residual: measurement length mismatch".into(),
        });
    }
    Ok(bx.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
}

const DEGENERATE_INIT_TOL: f64 = 1e-12;

/// Spectral initialization: top-k left singular vectors of the adjoint
/// image of the measurements.
pub fn init_sensing(op: &SensingOperator, b: &[f64], k: usize) -> Result<Matrix> {
    let back = adjoint_sensing(op, b)?;
    if back.frobenius_norm() == 0.0 {
        return Err(Error::DegenerateInit {
            k,
            sigma_k: 0.0,
            threshold: DEGENERATE_INIT_TOL,
        });
    }
    let svd = svd_topk_with_budget(&back, k, linalg::SVD_MAX_SWEEPS)?;
    let sigma1 = svd.sigma[0];
    let sigma_k = svd.sigma[k - 1];
    if sigma_k < DEGENERATE_INIT_TOL * sigma1 {
        return Err(Error::DegenerateInit {
            k,
            sigma_k,
            threshold: DEGENERATE_INIT_TOL,
        });
    }
    Ok(svd.u)
}

/// Design matrix for the V-solve: row i is vec(A_i^T U), so that
/// b_i = <A_i^T U, V> for the row-major vectorization of V (n*k unknowns).
fn v_step_design(op: &SensingOperator, u: &Matrix) -> Matrix {
    let d = op.num_measurements();
    let (n, k) = (op.n(), u.cols());
    let mut design = Matrix::zeros(d, n * k);
    for (idx, a) in op.matrices().iter().enumerate() {
        let atu = a.transpose_matmul(u); // n x k
        for j in 0..n {
            for c in 0..k {
                design.set(idx, j * k + c, atu.get(j, c));
            }
        }
    }
    design
}

/// Design matrix for the U-solve: row i is vec(A_i V) (m*k unknowns).
fn u_step_design(op: &SensingOperator, v: &Matrix) -> Matrix {
    let d = op.num_measurements();
    let (m, k) = (op.m(), v.cols());
    let mut design = Matrix::zeros(d, m * k);
    for (idx, a) in op.matrices().iter().enumerate() {
        let av = a.matmul(v); // m x k
        for r in 0..m {
            for c in 0..k {
                design.set(idx, r * k + c, av.get(r, c));
            }
        }
    }
    design
}

fn unvec(x: &[f64], rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |i, j| x[i * cols + j])
}

/// Solve one sensing half-step, optionally ridge-regularized.
fn half_step(
    design: Matrix,
    b: &[f64],
    rows: usize,
    cols: usize,
    ridge: f64,
    fallbacks: &mut usize,
) -> Matrix {
    let (design, rhs) = if ridge > 0.0 {
        // Augment with sqrt(ridge) * I rows.
        let q = design.cols();
        let mut aug = Matrix::zeros(design.rows() + q, q);
        for i in 0..design.rows() {
            for j in 0..q {
                aug.set(i, j, design.get(i, j));
            }
        }
        let s = ridge.sqrt();
        for j in 0..q {
            aug.set(design.rows() + j, j, s);
        }
        let mut rhs = b.to_vec();
        rhs.extend(std::iter::repeat(0.0).take(q));
        (aug, rhs)
    } else {
        (design, b.to_vec())
    };
    let sol = solve_least_squares_detailed(&design, &rhs);
    if sol.rank_deficient {
        *fallbacks += 1;
    }
    unvec(&sol.x, rows, cols)
}

struct IterateObserver<'a> {
    truth: Option<&'a SvdResult>,
    started: Instant,
}

impl<'a> IterateObserver<'a> {
    fn new(truth: Option<&'a SvdResult>) -> Self {
        Self {
            truth,
            started: Instant::now(),
        }
    }

    fn dist_u(&self, u: &Matrix) -> Option<f64> {
        self.truth.map(|t| {
            let cols = u.cols().min(t.u.cols());
            linalg::subspace_distance(u, &t.u.leading_columns(cols)).unwrap_or(1.0)
        })
    }

    fn dist_v(&self, v: &Matrix) -> Option<f64> {
        self.truth.map(|t| {
            let cols = v.cols().min(t.v.cols());
            linalg::subspace_distance(v, &t.v.leading_columns(cols)).unwrap_or(1.0)
        })
    }

    fn elapsed_ms(&self) -> f64 {
        self.started.elapsed().as_secs_f64() * 1000.0
    }
}

/// Alternating minimization for matrix sensing. Alternates exact
/// least-squares solves for V and U from the spectral initializer, stopping
/// after `t_max` iterations or when the relative residual drops below `tol`.
pub fn altmin_sense(
    op: &SensingOperator,
    b: &[f64],
    k: usize,
    cfg: &SolverConfig,
    truth: Option<&SvdResult>,
) -> Result<(FactorPair, ConvergenceTrace)> {
    let u0 = init_sensing(op, b, k)?;
    altmin_sense_from(op, b, u0, cfg, truth, None)
}

/// Inner loop shared by `altmin_sense` and the stagewise solver: run the
/// alternations from a given initial U.
fn altmin_sense_from(
    op: &SensingOperator,
    b: &[f64],
    u0: Matrix,
    cfg: &SolverConfig,
    truth: Option<&SvdResult>,
    existing: Option<(ConvergenceTrace, usize)>,
) -> Result<(FactorPair, ConvergenceTrace)> {
    let k = u0.cols();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let obs = IterateObserver::new(truth);
    let (mut trace, iter_base) = existing.unwrap_or_default();
    let mut u = u0;
    trace.records.push(TraceRecord {
        iter: iter_base,
        residual: b_norm,
        dist_u: obs.dist_u(&u),
        dist_v: None,
        elapsed_ms: obs.elapsed_ms(),
    });
    let mut v = Matrix::zeros(op.n(), k);
    for t in 0..cfg.t_max {
        if cfg.mode == Mode::Orthonormalized {
            let (q, _) = qr_decompose(&u).map_err(|_| Error::RankDeficient {
                smallest: 0.0,
                threshold: linalg::QR_RANK_TOL,
            })?;
            u = q;
        }
        let design_v = v_step_design(op, &u);
        v = half_step(design_v, b, op.n(), k, cfg.ls_regularizer, &mut trace.min_norm_fallbacks);
        let r_half = residual(op, b, &FactorPair { u_hat: u.clone(), v_hat: v.clone() })?;
        trace.half_residuals.push(r_half);

        if cfg.mode == Mode::Orthonormalized {
            let (q, _) = qr_decompose(&v).map_err(|_| Error::RankDeficient {
                smallest: 0.0,
                threshold: linalg::QR_RANK_TOL,
            })?;
            v = q;
        }
        let design_u = u_step_design(op, &v);
        u = half_step(design_u, b, op.m(), k, cfg.ls_regularizer, &mut trace.min_norm_fallbacks);
        let r_full = residual(op, b, &FactorPair { u_hat: u.clone(), v_hat: v.clone() })?;
        trace.half_residuals.push(r_full);

        trace.records.push(TraceRecord {
            iter: iter_base + t + 1,
            residual: r_full,
            dist_u: obs.dist_u(&u),
            dist_v: obs.dist_v(&v),
            elapsed_ms: obs.elapsed_ms(),
        });
        if b_norm > 0.0 && r_full <= cfg.tol * b_norm {
            break;
        }
    }
    Ok((FactorPair { u_hat: u, v_hat: v }, trace))
}

/// Stagewise alternating minimization. Stage i initializes from one
/// projected-gradient (SVP) step with step size 3/4 and then runs the
/// rank-i alternations; the final stage-k pair is returned.
pub fn stage_altmin(
    op: &SensingOperator,
    b: &[f64],
    k: usize,
    cfg: &SolverConfig,
    truth: Option<&SvdResult>,
) -> Result<(FactorPair, ConvergenceTrace)> {
    let mut trace = ConvergenceTrace::default();
    let mut iter_base = 0usize;
    let mut current: Option<FactorPair> = None;
    for stage in 1..=k {
        trace.stage_starts.push(trace.records.len());
        let x = current
            .as_ref()
            .map(|p| p.reconstruct())
            .unwrap_or_else(|| Matrix::zeros(op.m(), op.n()));
        let ax = apply_sensing(op, &x)?;
        let grad_coeff: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        let step = adjoint_sensing(op, &grad_coeff)?;
        let svp_target = x.sub(&step.scale(0.75));
        let svd = svd_topk_with_budget(&svp_target, stage, cfg.svd_budget)?;
        let sigma1 = svd.sigma[0];
        if sigma1 == 0.0 || svd.sigma[stage - 1] < DEGENERATE_INIT_TOL * sigma1 {
            return Err(Error::DegenerateInit {
                k: stage,
                sigma_k: svd.sigma[stage - 1],
                threshold: DEGENERATE_INIT_TOL,
            });
        }
        let (pair, new_trace) = altmin_sense_from(
            op,
            b,
            svd.u,
            cfg,
            truth,
            Some((std::mem::take(&mut trace), iter_base)),
        )?;
        trace = new_trace;
        iter_base = trace.records.last().map(|r| r.iter + 1).unwrap_or(0);
        current = Some(pair);
    }
    Ok((current.expect("k >= 1"), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::generate_problem;
    use crate::operators::{gaussian_ensemble, SensingOperator};

    #[test]
    fn residual_examples() {
        let op = gaussian_ensemble(3, 3, 6, 1);
        let problem = generate_problem(3, 3, 2, 2.0, 5).unwrap();
        let b = apply_sensing(&op, &problem.matrix).unwrap();
        // Exact factors of a consistent system.
        let scaled_u = Matrix::from_fn(3, 2, |i, j| {
            problem.truth.u.get(i, j) * problem.truth.sigma[j]
        });
        let pair = FactorPair {
            u_hat: scaled_u,
            v_hat: problem.truth.v.clone(),
        };
        assert!(residual(&op, &b, &pair).unwrap() < 1e-10);
        // Zero factors give ||b||.
        let zero = FactorPair {
            u_hat: Matrix::zeros(3, 2),
            v_hat: Matrix::zeros(3, 2),
        };
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((residual(&op, &b, &zero).unwrap() - b_norm).abs() < 1e-12);
    }

    #[test]
    fn residual_matches_brute_force() {
        let op = gaussian_ensemble(4, 3, 8, 2);
        let problem = generate_problem(4, 3, 2, 3.0, 6).unwrap();
        let b = apply_sensing(&op, &problem.matrix).unwrap();
        let pair = FactorPair {
            u_hat: crate::rng::gaussian_matrix(4, 2, 1.0, &mut crate::rng::seeded_rng(7)),
            v_hat: crate::rng::gaussian_matrix(3, 2, 1.0, &mut crate::rng::seeded_rng(8)),
        };
        // Direct double-loop evaluation.
        let x = pair.reconstruct();
        let mut sum = 0.0;
        for (idx, a) in op.matrices().iter().enumerate() {
            let mut tr = 0.0;
            for r in 0..4 {
                for c in 0..3 {
                    tr += a.get(r, c) * x.get(r, c);
                }
            }
            sum += (tr - b[idx]) * (tr - b[idx]);
        }
        let expected = sum.sqrt();
        assert!((residual(&op, &b, &pair).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn init_from_single_entry_ensemble_is_svd_of_m() {
        let problem = generate_problem(5, 4, 2, 2.0, 11).unwrap();
        let op = SensingOperator::single_entry_ensemble(5, 4);
        let b = apply_sensing(&op, &problem.matrix).unwrap();
        let u0 = init_sensing(&op, &b, 2).unwrap();
        let d = linalg::subspace_distance(&u0, &problem.truth.u).unwrap();
        assert!(d < 1e-8, "dist {d}");
    }

    #[test]
    fn init_zero_measurements_degenerate() {
        let op = gaussian_ensemble(4, 4, 10, 3);
        assert!(matches!(
            init_sensing(&op, &vec![0.0; 10], 2),
            Err(Error::DegenerateInit { .. })
        ));
    }

    #[test]
    fn init_rank1_gaussian_not_orthogonal_to_truth() {
        let problem = generate_problem(8, 8, 1, 1.0, 21).unwrap();
        let op = gaussian_ensemble(8, 8, 80, 22);
        let b = apply_sensing(&op, &problem.matrix).unwrap();
        let u0 = init_sensing(&op, &b, 1).unwrap();
        let d = linalg::subspace_distance(&u0, &problem.truth.u).unwrap();
        assert!(d < 1.0, "initializer orthogonal to truth: {d}");
    }

    #[test]
    fn consistent_rank_k_converges_immediately() {
        let problem = generate_problem(6, 6, 2, 2.0, 31).unwrap();
        let op = gaussian_ensemble(6, 6, 72, 32);
        let b = apply_sensing(&op, &problem.matrix).unwrap();
        let cfg = SolverConfig {
            t_max: 5,
            ..Default::default()
        };
        let (pair, trace) = altmin_sense(&op, &b, 2, &cfg, Some(&problem.truth)).unwrap();
        let rel = problem
            .matrix
            .sub(&pair.reconstruct())
            .frobenius_norm()
            / problem.matrix.frobenius_norm();
        assert!(rel < 1e-8, "relative error {rel}");
        // Half-step residuals never increase in standard mode.
        for w in trace.half_residuals.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }

    #[test]
    fn stage_altmin_k1_matches_rank1_behavior() {
        let problem = generate_problem(8, 8, 1, 1.0, 41).unwrap();
        let op = gaussian_ensemble(8, 8, 100, 42);
        let b = apply_sensing(&op, &problem.matrix).unwrap();
        let cfg = SolverConfig {
            t_max: 30,
            ..Default::default()
        };
        let (pair, trace) = stage_altmin(&op, &b, 1, &cfg, Some(&problem.truth)).unwrap();
        assert_eq!(trace.stage_starts, vec![0]);
        let rel = problem.matrix.sub(&pair.reconstruct()).frobenius_norm()
            / problem.matrix.frobenius_norm();
        assert!(rel < 1e-6, "relative error {rel}");
    }

    #[test]
    fn trace_iters_strictly_increase() {
        let problem = generate_problem(6, 6, 2, 4.0, 51).unwrap();
        let op = gaussian_ensemble(6, 6, 90, 52);
        let b = apply_sensing(&op, &problem.matrix).unwrap();
        let cfg = SolverConfig {
            t_max: 8,
            ..Default::default()
        };
        let (_, trace) = stage_altmin(&op, &b, 2, &cfg, Some(&problem.truth)).unwrap();
        for w in trace.records.windows(2) {
            assert!(w[1].iter > w[0].iter);
        }
        assert_eq!(trace.records[0].iter, 0);
        assert_eq!(trace.stage_starts.len(), 2);
    }
}
