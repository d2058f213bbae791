//! Dense linear-algebra kernels: Householder QR, truncated SVD by block
//! power (subspace) iteration, least squares with min-norm fallback,
//! spectral norm, and the principal-angle subspace distance.
//!
//! Everything here is pure and deterministic for fixed inputs. The iterative
//! SVD uses a fixed internal seed for its start block, so identical inputs
//! always produce identical output.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Relative pivot threshold below which a QR factor counts as rank deficient.
pub const QR_RANK_TOL: f64 = 1e-12;
/// Relative change in the singular-value estimates at which subspace
/// iteration declares convergence.
pub const SVD_SIGMA_TOL: f64 = 1e-12;
/// Default sweep budget for the iterative SVD.
pub const SVD_MAX_SWEEPS: usize = 500;
/// Relative threshold for span-rank detection in `subspace_distance`.
pub const RANK_DETECT_TOL: f64 = 1e-9;
/// Relative threshold below which a singular value is reported as exactly 0.
pub const SIGMA_ZERO_TOL: f64 = 1e-12;

// Fixed seed for the subspace-iteration start block.
const SVD_START_SEED: u64 = 0x5eed_01d_u64;

/// Top-k singular triplets of a matrix: `a ~ u * diag(sigma) * v^T`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `u * diag(sigma) * v^T`.
    pub fn reconstruct(&self) -> Matrix {
        let k = self.sigma.len();
        let scaled = Matrix::from_fn(self.u.rows(), k, |i, j| self.u.get(i, j) * self.sigma[j]);
        scaled.matmul(&self.v.transpose())
    }

    /// Truncate to the leading `k` triplets.
    pub fn truncated(&self, k: usize) -> SvdResult {
        SvdResult {
            u: self.u.leading_columns(k),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.leading_columns(k),
        }
    }
}

/// Thin Householder QR of an m x k matrix (m >= k) with the R diagonal
/// forced positive, which makes the factorization unique.
pub fn qr_decompose(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (m, k) = (a.rows(), a.cols());
    if m < k {
        return Err(Error::ShapeMismatch {
            context: format!("qr_decompose needs rows >= cols, got {m}x{k}"),
        });
    }
    let mut r = a.clone();
    // Householder vectors, one per column.
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v: Vec<f64> = (j..m).map(|i| r.get(i, j)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += sign * norm;
            let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if vnorm > 0.0 {
                for x in v.iter_mut() {
                    *x /= vnorm;
                }
                // Apply I - 2vv^T to the trailing block of R.
                for c in j..k {
                    let dot: f64 = (j..m).map(|i| v[i - j] * r.get(i, c)).sum();
                    for i in j..m {
                        let val = r.get(i, c) - 2.0 * v[i - j] * dot;
                        r.set(i, c, val);
                    }
                }
            } else {
                v = vec![0.0; m - j];
            }
        } else {
            v = vec![0.0; m - j];
        }
        reflectors.push(v);
    }
    // Rank check on the R diagonal.
    let diag_max = (0..k).map(|j| r.get(j, j).abs()).fold(0.0, f64::max);
    let diag_min = (0..k).map(|j| r.get(j, j).abs()).fold(f64::INFINITY, f64::min);
    if diag_max == 0.0 || diag_min <= QR_RANK_TOL * diag_max {
        return Err(Error::RankDeficient {
            smallest: if diag_min.is_finite() { diag_min } else { 0.0 },
            threshold: QR_RANK_TOL * diag_max,
        });
    }
    // Build thin Q by applying the reflectors in reverse to I's first k cols.
    let mut q = Matrix::from_fn(m, k, |i, j| if i == j { 1.0 } else { 0.0 });
    for j in (0..k).rev() {
        let v = &reflectors[j];
        if v.iter().all(|x| *x == 0.0) {
            continue;
        }
        for c in 0..k {
            let dot: f64 = (j..m).map(|i| v[i - j] * q.get(i, c)).sum();
            for i in j..m {
                let val = q.get(i, c) - 2.0 * v[i - j] * dot;
                q.set(i, c, val);
            }
        }
    }
    // Sign convention: positive R diagonal.
    for j in 0..k {
        if r.get(j, j) < 0.0 {
            for c in j..k {
                let val = -r.get(j, c);
                r.set(j, c, val);
            }
            for i in 0..m {
                let val = -q.get(i, j);
                q.set(i, j, val);
            }
        }
    }
    // Zero the strictly-lower part of R (roundoff residue from reflections).
    let mut r_upper = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            r_upper.set(i, j, r.get(i, j));
        }
    }
    Ok((q, r_upper))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns eigenvalues in nonincreasing order with matching eigenvectors
/// as columns. Intended for small (k x k) systems.
pub(crate) fn sym_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm().max(1.0);
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q).abs();
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m.get(i, p);
                    let miq = m.get(i, q);
                    m.set(i, p, c * mip - s * miq);
                    m.set(i, q, s * mip + c * miq);
                }
                for j in 0..n {
                    let mpj = m.get(p, j);
                    let mqj = m.get(q, j);
                    m.set(p, j, c * mpj - s * mqj);
                    m.set(q, j, s * mpj + c * mqj);
                }
                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    (values, vectors)
}

/// Full SVD of a small k x k matrix via Jacobi on R^T R.
fn small_svd(r: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let k = r.cols();
    let gram = r.transpose_matmul(r);
    let (evals, vr) = sym_eigen(&gram);
    let sigma: Vec<f64> = evals.iter().map(|e| e.max(0.0).sqrt()).collect();
    let rv = r.matmul(&vr);
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let mut ur = Matrix::zeros(r.rows(), k);
    for j in 0..k {
        if sigma[j] > SIGMA_ZERO_TOL * sigma_max && sigma[j] > 0.0 {
            let col: Vec<f64> = (0..r.rows()).map(|i| rv.get(i, j) / sigma[j]).collect();
            ur.set_column(j, &col);
        }
    }
    complete_orthonormal(&mut ur);
    (ur, sigma, vr)
}

/// Fill zero columns of an (otherwise orthonormal-column) matrix with a
/// deterministic orthonormal completion: Gram-Schmidt over coordinate axes.
fn complete_orthonormal(m: &mut Matrix) {
    let (rows, cols) = (m.rows(), m.cols());
    for j in 0..cols {
        let norm: f64 = (0..rows).map(|i| m.get(i, j).powi(2)).sum::<f64>().sqrt();
        if norm > 0.5 {
            continue;
        }
        // Find a coordinate axis with large residual against current columns.
        let mut best: Option<Vec<f64>> = None;
        let mut best_norm = 0.0;
        for axis in 0..rows {
            let mut cand = vec![0.0; rows];
            cand[axis] = 1.0;
            for c in 0..cols {
                if c == j {
                    continue;
                }
                let dot: f64 = (0..rows).map(|i| m.get(i, c) * cand[i]).sum();
                for (i, x) in cand.iter_mut().enumerate() {
                    *x -= dot * m.get(i, c);
                }
            }
            let n: f64 = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > best_norm {
                best_norm = n;
                best = Some(cand);
            }
            if n > 0.9 {
                break;
            }
        }
        if let Some(mut cand) = best {
            for x in cand.iter_mut() {
                *x /= best_norm;
            }
            m.set_column(j, &cand);
        }
    }
}

/// Top-k singular triplets by block power iteration with QR
/// re-orthonormalization each sweep, with the default sweep budget.
pub fn svd_topk(a: &Matrix, k: usize) -> Result<SvdResult> {
    svd_topk_with_budget(a, k, SVD_MAX_SWEEPS)
}

pub fn svd_topk_with_budget(a: &Matrix, k: usize, max_sweeps: usize) -> Result<SvdResult> {
    let (m, n) = (a.rows(), a.cols());
    if k == 0 || k > m.min(n) {
        return Err(Error::ShapeMismatch {
            context: format!("svd_topk: k={k} out of range for {m}x{n}"),
        });
    }
    if a.frobenius_norm() == 0.0 {
        let mut u = Matrix::zeros(m, k);
        let mut v = Matrix::zeros(n, k);
        complete_orthonormal(&mut u);
        complete_orthonormal(&mut v);
        return Ok(SvdResult {
            u,
            sigma: vec![0.0; k],
            v,
        });
    }
    // Deterministic Gaussian start block on the V side.
    let mut rng = rng::seeded_rng(SVD_START_SEED);
    let start = rng::gaussian_matrix(n, k, 1.0, &mut rng);
    let mut v = orthonormalize_columns(&start);
    let mut last_sigma: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut factors: Option<(Matrix, Vec<f64>, Matrix)> = None;
    for _ in 0..max_sweeps {
        let w = a.matmul(&v); // m x k
        let (qw, rw) = match qr_decompose(&w) {
            Ok(t) => t,
            Err(_) => {
                // Rank-deficient sweep: w spans fewer than k directions.
                // Re-orthonormalize leniently and keep iterating.
                (orthonormalize_columns(&w), Matrix::identity(k))
            }
        };
        let (ur, sigma, vr) = small_svd(&rw);
        let u_full = qw.matmul(&ur);
        let v_full = v.matmul(&vr);
        let done = match &last_sigma {
            Some(prev) => {
                let s1 = sigma[0].max(f64::MIN_POSITIVE);
                sigma
                    .iter()
                    .zip(prev)
                    .all(|(s, p)| (s - p).abs() <= SVD_SIGMA_TOL * s1)
            }
            None => false,
        };
        last_sigma = Some(sigma.clone());
        factors = Some((u_full, sigma, v_full.clone()));
        if done {
            converged = true;
            break;
        }
        // Next iterate: orthonormalized A^T * u-directions = V-side subspace.
        let z = a.transpose_matmul(&qw); // n x k
        v = orthonormalize_columns(&z);
    }
    if !converged {
        return Err(Error::DidNotConverge { sweeps: max_sweeps });
    }
    let (u, mut sigma, v) = factors.unwrap();
    // Degenerate trailing values: report exact zeros and deterministically
    // complete the corresponding singular vectors.
    let sigma1 = sigma[0];
    let floor = SIGMA_ZERO_TOL * (m.max(n) as f64) * sigma1;
    let mut u = u;
    let mut v = v;
    for j in 0..k {
        if sigma[j] < floor {
            sigma[j] = 0.0;
            u.set_column(j, &vec![0.0; m]);
            v.set_column(j, &vec![0.0; n]);
        }
    }
    complete_orthonormal(&mut u);
    complete_orthonormal(&mut v);
    Ok(SvdResult { u, sigma, v })
}

/// Orthonormal basis for the columns via modified Gram-Schmidt, with
/// deterministic completion when columns are dependent. Always returns a
/// matrix with exactly `cols` orthonormal columns.
fn orthonormalize_columns(a: &Matrix) -> Matrix {
    let (m, k) = (a.rows(), a.cols());
    let mut q = Matrix::zeros(m, k);
    let scale = a.frobenius_norm().max(1.0);
    for j in 0..k {
        let mut col = a.column(j);
        for _pass in 0..2 {
            for c in 0..j {
                let dot: f64 = (0..m).map(|i| q.get(i, c) * col[i]).sum();
                for (i, x) in col.iter_mut().enumerate() {
                    *x -= dot * q.get(i, c);
                }
            }
        }
        let norm: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-13 * scale {
            for x in col.iter_mut() {
                *x /= norm;
            }
            q.set_column(j, &col);
        }
    }
    complete_orthonormal(&mut q);
    q
}

/// Least-squares solve with rank-deficiency report.
#[derive(Debug, Clone)]
pub struct LsSolution {
    pub x: Vec<f64>,
    /// True when the design was rank deficient and the minimum-norm
    /// minimizer was returned via the pseudo-inverse path.
    pub rank_deficient: bool,
}

/// Minimizer of ||design * x - rhs||_2. Total: rank-deficient designs get
/// the minimum-norm minimizer.
pub fn solve_least_squares(design: &Matrix, rhs: &[f64]) -> Vec<f64> {
    solve_least_squares_detailed(design, rhs).x
}

pub fn solve_least_squares_detailed(design: &Matrix, rhs: &[f64]) -> LsSolution {
    assert_eq!(design.rows(), rhs.len(), "rhs length mismatch");
    let (d, q) = (design.rows(), design.cols());
    if d >= q {
        if let Ok((qm, rm)) = qr_decompose(design) {
            let qtb = qm.transpose_matvec(rhs);
            let x = back_substitute(&rm, &qtb);
            return LsSolution {
                x,
                rank_deficient: false,
            };
        }
    }
    // Min-norm pseudo-inverse path: x = V pinv(Lambda) V^T A^T b via the
    // eigendecomposition of the smaller Gram matrix.
    let x = if d >= q {
        let gram = design.transpose_matmul(design); // q x q
        let atb = design.transpose_matvec(rhs);
        pinv_solve(&gram, &atb)
    } else {
        let gram = design.matmul(&design.transpose()); // d x d
        let y = pinv_solve(&gram, rhs);
        design.transpose_matvec(&y)
    };
    LsSolution {
        x,
        rank_deficient: true,
    }
}

/// Solve a symmetric PSD system via Jacobi eigendecomposition, dropping
/// eigenvalues below a relative threshold (min-norm behavior).
pub(crate) fn pinv_solve(gram: &Matrix, rhs: &[f64]) -> Vec<f64> {
    let (evals, vecs) = sym_eigen(gram);
    let emax = evals.first().copied().unwrap_or(0.0).max(0.0);
    let n = gram.rows();
    let vt_b = vecs.transpose_matvec(rhs);
    let mut coeff = vec![0.0; n];
    for i in 0..n {
        if evals[i] > 1e-12 * emax && evals[i] > 0.0 {
            coeff[i] = vt_b[i] / evals[i];
        }
    }
    vecs.matvec(&coeff)
}

fn back_substitute(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let k = r.cols();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in (i + 1)..k {
            s -= r.get(i, j) * x[j];
        }
        x[i] = s / r.get(i, i);
    }
    x
}

/// Largest singular value, via power iteration on A^T A.
pub fn spectral_norm(a: &Matrix) -> f64 {
    let (m, n) = (a.rows(), a.cols());
    let fro = a.frobenius_norm();
    if fro == 0.0 {
        return 0.0;
    }
    let mut rng = rng::seeded_rng(SVD_START_SEED ^ 0xa5a5);
    let mut x = rng::gaussian_vec(n.min(m).max(n), &mut rng);
    x.truncate(n);
    if x.len() < n {
        x.resize(n, 1.0);
    }
    let mut norm_est = 0.0f64;
    for _ in 0..2000 {
        let y = a.matvec(&x);
        let z = a.transpose_matvec(&y);
        let znorm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if znorm == 0.0 {
            // x fell in the null space; restart deterministically shifted.
            x = vec![1.0; n];
            continue;
        }
        let new_est = znorm.sqrt();
        let done = (new_est - norm_est).abs() <= 1e-14 * new_est;
        norm_est = new_est;
        x = z.iter().map(|v| v / znorm).collect();
        if done {
            break;
        }
    }
    norm_est
}

/// Principal-angle distance between the spans of the two inputs.
///
/// Columns need not be orthonormal; spans are detected by a rank-revealing
/// SVD. Returns 1 when the span dimensions differ and 0 iff the spans
/// coincide. Computed as sqrt(1 - sigma_min(U^T W)^2), which avoids
/// forming an explicit orthogonal complement.
pub fn subspace_distance(u_hat: &Matrix, w_hat: &Matrix) -> Result<f64> {
    if u_hat.rows() != w_hat.rows() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "subspace_distance: {} vs {} rows",
                u_hat.rows(),
                w_hat.rows()
            ),
        });
    }
    let qu = span_basis(u_hat)?;
    let qw = span_basis(w_hat)?;
    if qu.cols() != qw.cols() {
        return Ok(1.0);
    }
    let g = qu.transpose_matmul(&qw);
    let gram = g.transpose_matmul(&g);
    let (evals, _) = sym_eigen(&gram);
    let smin_sq = evals.last().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    Ok((1.0 - smin_sq).max(0.0).sqrt())
}

/// Orthonormal basis of the span with rank detection.
fn span_basis(a: &Matrix) -> Result<Matrix> {
    let k = a.cols().min(a.rows());
    let svd = svd_topk(a, k)?;
    let s1 = svd.sigma.first().copied().unwrap_or(0.0);
    if s1 == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let rank = svd
        .sigma
        .iter()
        .take_while(|s| **s > RANK_DETECT_TOL * s1)
        .count();
    if rank == 0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(svd.u.leading_columns(rank))
}
