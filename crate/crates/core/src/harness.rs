//! Experiment harness: seeded problem generation, sensing/completion
//! experiment orchestration, convergence summaries, and the CSV/JSON
//! artifact formats.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::completion::{self, altmin_complete, CompletionProblem};
use crate::error::{Error, Result};
use crate::linalg::SvdResult;
use crate::matrix::Matrix;
use crate::operators::{apply_sensing, gaussian_ensemble, partition_omega, sample_omega};
use crate::rng::{gaussian_matrix, seeded_rng};
use crate::sensing::{altmin_sense, stage_altmin, ConvergenceTrace, Mode, SolverConfig, TraceRecord};

/// dist values at or below this are treated as roundoff floor and excluded
/// from decay-rate statistics.
pub const DECAY_FLOOR: f64 = 1e-10;

pub const TRACE_HEADER: &str = "iter,residual,dist_u,dist_v,elapsed_ms";

/// A synthetic rank-k ground truth with prescribed spectrum and measured
/// incoherence.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub matrix: Matrix,
    pub truth: SvdResult,
    pub kappa: f64,
    pub mu: f64,
    pub seed: u64,
}

/// Seeded rank-k instance: Gaussian factors orthonormalized by QR, singular
/// values geometrically spaced from kappa down to 1. For k = 1 the single
/// singular value is 1 (the realized condition number is 1 regardless).
pub fn generate_problem(m: usize, n: usize, k: usize, kappa: f64, seed: u64) -> Result<ProblemInstance> {
    if k == 0 || k > m.min(n) {
        return Err(Error::ConfigInvalid {
            field: "k".into(),
            message: format!("need 1 <= k <= min(m, n) = {}, got {k}", m.min(n)),
        });
    }
    if !(kappa >= 1.0) {
        return Err(Error::ConfigInvalid {
            field: "kappa".into(),
            message: format!("need kappa >= 1, got {kappa}"),
        });
    }
    let mut rng = seeded_rng(seed);
    let gu = gaussian_matrix(m, k, 1.0, &mut rng);
    let gv = gaussian_matrix(n, k, 1.0, &mut rng);
    let (u, _) = crate::linalg::qr_decompose(&gu)?;
    let (v, _) = crate::linalg::qr_decompose(&gv)?;
    let sigma: Vec<f64> = if k == 1 {
        vec![1.0]
    } else {
        (0..k)
            .map(|i| kappa.powf((k - 1 - i) as f64 / (k - 1) as f64))
            .collect()
    };
    let truth = SvdResult {
        u,
        sigma: sigma.clone(),
        v,
    };
    let matrix = truth.reconstruct();
    let mu_u = completion::incoherence_of(&truth.u)?.mu;
    let mu_v = completion::incoherence_of(&truth.v)?.mu;
    Ok(ProblemInstance {
        matrix,
        truth,
        kappa: sigma[0] / sigma[k - 1],
        mu: mu_u.max(mu_v),
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    #[default]
    Altmin,
    Stage,
    AltminOrth,
}

fn default_c() -> f64 {
    6.0
}
fn default_t() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-12
}
fn default_kappa() -> f64 {
    2.0
}
fn default_mu() -> f64 {
    3.0
}
fn default_sense_threshold() -> f64 {
    1e-4
}
fn default_complete_threshold() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensingConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Measurement count multiplier: d = c * k * n * ceil(ln n).
    #[serde(default = "default_c")]
    pub d_mult: f64,
    #[serde(default)]
    pub noise_ratio: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t_max: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub seed: u64,
    /// Pass threshold on the final relative error.
    #[serde(default = "default_sense_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletionConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Entry sampling probability.
    pub p: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t_max: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_complete_threshold")]
    pub threshold: f64,
}

/// Everything a run produces, kept in memory; the JSON document written to
/// disk is the fixed-key subset (see `report_json`).
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: serde_json::Value,
    pub trace: ConvergenceTrace,
    pub final_rel_error: f64,
    pub final_dist_u: Option<f64>,
    pub final_dist_v: Option<f64>,
    pub decay_median_ratio: Option<f64>,
    pub pass: bool,
    pub wall_time_ms: f64,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    config: &'a serde_json::Value,
    final_rel_error: f64,
    final_dist_u: Option<f64>,
    final_dist_v: Option<f64>,
    iterations_run: usize,
    decay_median_ratio: Option<f64>,
    pass: bool,
}

impl ExperimentReport {
    pub fn report_json(&self) -> String {
        let doc = ReportDoc {
            config: &self.config,
            final_rel_error: self.final_rel_error,
            final_dist_u: self.final_dist_u,
            final_dist_v: self.final_dist_v,
            iterations_run: self.trace.iterations_run(),
            decay_median_ratio: self.decay_median_ratio,
            pass: self.pass,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("report serialization");
        s.push('\n');
        s
    }
}

/// ceil(ln n), at least 1, so d never collapses for tiny n.
fn log_factor(n: usize) -> usize {
    ((n as f64).ln().ceil() as usize).max(1)
}

pub fn measurement_count(c: f64, k: usize, n: usize) -> usize {
    ((c * k as f64 * n as f64 * log_factor(n) as f64).round() as usize).max(1)
}

fn validate_common(m: usize, n: usize, k: usize, field: &str) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::ConfigInvalid {
            field: "m/n".into(),
            message: "dimensions must be positive".into(),
        });
    }
    if k == 0 || k > m.min(n) {
        return Err(Error::ConfigInvalid {
            field: field.into(),
            message: format!("need 1 <= k <= min(m, n), got {k}"),
        });
    }
    Ok(())
}

pub fn run_sensing_experiment(config: &SensingConfig) -> Result<ExperimentReport> {
    validate_common(config.m, config.n, config.k, "k")?;
    if config.d_mult <= 0.0 {
        return Err(Error::ConfigInvalid {
            field: "d_mult".into(),
            message: format!("must be positive, got {}", config.d_mult),
        });
    }
    if config.noise_ratio < 0.0 {
        return Err(Error::ConfigInvalid {
            field: "noise_ratio".into(),
            message: "must be nonnegative".into(),
        });
    }
    let started = Instant::now();
    let problem = generate_problem(config.m, config.n, config.k, config.kappa, config.seed)?;
    let d = measurement_count(config.d_mult, config.k, config.n);
    let op = gaussian_ensemble(config.m, config.n, d, config.seed.wrapping_add(1));
    let mut b = apply_sensing(&op, &problem.matrix)?;
    if config.noise_ratio > 0.0 {
        // Noise matrix rescaled so ||N||_F = ratio * sigma_k^*.
        let sigma_k = *problem.truth.sigma.last().unwrap();
        let raw = gaussian_matrix(config.m, config.n, 1.0, &mut seeded_rng(config.seed.wrapping_add(2)));
        let noise = raw.scale(config.noise_ratio * sigma_k / raw.frobenius_norm());
        let bn = apply_sensing(&op, &noise)?;
        for (bi, ni) in b.iter_mut().zip(bn) {
            *bi += ni;
        }
    }
    let solver_cfg = SolverConfig {
        t_max: config.t_max,
        tol: config.tol,
        mode: if config.solver == Solver::AltminOrth {
            Mode::Orthonormalized
        } else {
            Mode::Standard
        },
        seed: config.seed,
        ..Default::default()
    };
    let (pair, trace) = match config.solver {
        Solver::Stage => stage_altmin(&op, &b, config.k, &solver_cfg, Some(&problem.truth))?,
        _ => altmin_sense(&op, &b, config.k, &solver_cfg, Some(&problem.truth))?,
    };
    let final_rel_error = problem.matrix.sub(&pair.reconstruct()).frobenius_norm()
        / problem.matrix.frobenius_norm();
    finish_report(
        serde_json::to_value(config).expect("config serialization"),
        trace,
        final_rel_error,
        config.threshold,
        started,
    )
}

pub fn run_completion_experiment(config: &CompletionConfig) -> Result<ExperimentReport> {
    validate_common(config.m, config.n, config.k, "k")?;
    if !(config.p > 0.0 && config.p <= 1.0) {
        return Err(Error::ConfigInvalid {
            field: "p".into(),
            message: format!("must be in (0, 1], got {}", config.p),
        });
    }
    let started = Instant::now();
    let problem = generate_problem(config.m, config.n, config.k, config.kappa, config.seed)?;
    let omega = sample_omega(&problem.matrix, config.p, config.seed.wrapping_add(3));
    let partitions = partition_omega(&omega, config.t_max, config.seed.wrapping_add(4))?;
    let cp = CompletionProblem::new(partitions, config.k, Some(config.p))?;
    let solver_cfg = SolverConfig {
        t_max: config.t_max,
        tol: config.tol,
        seed: config.seed,
        ..Default::default()
    };
    let (pair, trace) = altmin_complete(&cp, &solver_cfg, config.mu, Some(&problem.truth))?;
    let final_rel_error = problem.matrix.sub(&pair.reconstruct()).frobenius_norm()
        / problem.matrix.frobenius_norm();
    finish_report(
        serde_json::to_value(config).expect("config serialization"),
        trace,
        final_rel_error,
        config.threshold,
        started,
    )
}

fn finish_report(
    config: serde_json::Value,
    trace: ConvergenceTrace,
    final_rel_error: f64,
    threshold: f64,
    started: Instant,
) -> Result<ExperimentReport> {
    let decay_median_ratio = convergence_report(&trace).ok().map(|s| s.median_ratio);
    let pass = final_rel_error <= threshold;
    Ok(ExperimentReport {
        final_dist_u: trace.final_dist_u(),
        final_dist_v: trace.final_dist_v(),
        config,
        trace,
        final_rel_error,
        decay_median_ratio,
        pass,
        wall_time_ms: started.elapsed().as_secs_f64() * 1000.0,
    })
}

/// Geometric-decay statistics of a trace's dist_u column.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    /// Consecutive ratios dist^{t+1}/dist^t over pre-floor iterations.
    pub ratios: Vec<f64>,
    pub median_ratio: f64,
    /// First record index whose dist is at or below the 1e-10 floor, if any.
    pub floor_iteration: Option<usize>,
    /// Least-squares slope of log10(dist) against iteration, pre-floor.
    pub slope: f64,
}

pub fn convergence_report(trace: &ConvergenceTrace) -> Result<ConvergenceSummary> {
    let dists: Vec<(usize, f64)> = trace
        .records
        .iter()
        .filter_map(|r| r.dist_u.map(|d| (r.iter, d)))
        .collect();
    if dists.len() < 3 {
        return Err(Error::InsufficientTrace {
            records: dists.len(),
            needed: 3,
        });
    }
    let floor_iteration = dists.iter().position(|&(_, d)| d <= DECAY_FLOOR);
    let live = &dists[..floor_iteration.unwrap_or(dists.len())];
    let mut ratios = Vec::new();
    for w in live.windows(2) {
        if w[0].1 > DECAY_FLOOR && w[1].1 > DECAY_FLOOR {
            ratios.push(w[1].1 / w[0].1);
        }
    }
    let median_ratio = median(&ratios).unwrap_or(f64::NAN);
    // One-variable least squares of log10(dist) vs iter.
    let slope = if live.len() >= 2 {
        let xs: Vec<f64> = live.iter().map(|&(t, _)| t as f64).collect();
        let ys: Vec<f64> = live.iter().map(|&(_, d)| d.log10()).collect();
        let n = xs.len() as f64;
        let xm = xs.iter().sum::<f64>() / n;
        let ym = ys.iter().sum::<f64>() / n;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(ConvergenceSummary {
        ratios,
        median_ratio,
        floor_iteration,
        slope,
    })
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

pub fn trace_to_csv(trace: &ConvergenceTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        out.push_str(&format!(
            "{},{:.17e},{},{},{:.3}\n",
            r.iter,
            r.residual,
            fmt_opt(r.dist_u),
            fmt_opt(r.dist_v),
            r.elapsed_ms
        ));
    }
    out
}

pub fn trace_from_csv(text: &str) -> Result<ConvergenceTrace> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "expected trace header `{TRACE_HEADER}`, got {other:?}"
            )))
        }
    }
    let mut trace = ConvergenceTrace::default();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!(
                "trace line {}: expected 5 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse =
            |s: &str| -> Result<f64> { s.trim().parse().map_err(|e| Error::Parse(format!("{e}"))) };
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                parse(s).map(Some)
            }
        };
        trace.records.push(TraceRecord {
            iter: fields[0]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{e}")))?,
            residual: parse(fields[1])?,
            dist_u: parse_opt(fields[2])?,
            dist_v: parse_opt(fields[3])?,
            elapsed_ms: parse(fields[4])?,
        });
    }
    Ok(trace)
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write the run's trace CSV and report JSON into `dir` with the given stem.
pub fn write_artifacts(report: &ExperimentReport, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(format!("{stem}_trace.csv")), &trace_to_csv(&report.trace))?;
    write_atomic(&dir.join(format!("{stem}_report.json")), &report.report_json())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_problem_invariants() {
        let p = generate_problem(30, 20, 3, 5.0, 1).unwrap();
        assert!((p.kappa - 5.0).abs() < 1e-10 * 5.0);
        assert_eq!(p.truth.sigma, vec![5.0, 5.0f64.sqrt(), 1.0]);
        let recon_err = p.matrix.sub(&p.truth.reconstruct()).frobenius_norm();
        assert!(recon_err <= 1e-10 * p.matrix.frobenius_norm());
    }

    #[test]
    fn kappa_one_gives_flat_spectrum() {
        let p = generate_problem(10, 10, 3, 1.0, 2).unwrap();
        assert_eq!(p.truth.sigma, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn realized_mu_is_modest_at_scale() {
        let p = generate_problem(100, 100, 2, 2.0, 7).unwrap();
        assert!(p.mu <= 4.0, "mu = {}", p.mu);
    }

    #[test]
    fn generate_problem_is_deterministic() {
        let a = generate_problem(12, 9, 2, 3.0, 9).unwrap();
        let b = generate_problem(12, 9, 2, 3.0, 9).unwrap();
        assert_eq!(a.matrix.to_text(), b.matrix.to_text());
    }

    #[test]
    fn convergence_report_geometric() {
        let mut trace = ConvergenceTrace::default();
        for t in 0..8 {
            trace.records.push(TraceRecord {
                iter: t,
                residual: 0.0,
                dist_u: Some(0.25f64.powi(t as i32)),
                dist_v: None,
                elapsed_ms: 0.0,
            });
        }
        let s = convergence_report(&trace).unwrap();
        for r in &s.ratios {
            assert!((r - 0.25).abs() < 1e-12);
        }
        assert!((s.median_ratio - 0.25).abs() < 1e-12);
        assert!((s.slope + 4.0f64.log10()).abs() < 1e-10);
        assert_eq!(s.floor_iteration, None);
    }

    #[test]
    fn convergence_report_constant() {
        let mut trace = ConvergenceTrace::default();
        for t in 0..5 {
            trace.records.push(TraceRecord {
                iter: t,
                residual: 0.0,
                dist_u: Some(0.3),
                dist_v: None,
                elapsed_ms: 0.0,
            });
        }
        let s = convergence_report(&trace).unwrap();
        assert!((s.median_ratio - 1.0).abs() < 1e-12);
        assert!(s.slope.abs() < 1e-12);
    }

    #[test]
    fn convergence_report_needs_three_records() {
        let mut trace = ConvergenceTrace::default();
        trace.records.push(TraceRecord {
            iter: 0,
            residual: 1.0,
            dist_u: Some(0.5),
            dist_v: None,
            elapsed_ms: 0.0,
        });
        assert!(matches!(
            convergence_report(&trace),
            Err(Error::InsufficientTrace { records: 1, needed: 3 })
        ));
    }

    #[test]
    fn floor_iterations_excluded() {
        let mut trace = ConvergenceTrace::default();
        let dists = [1e-1, 1e-3, 1e-5, 1e-12, 1e-13];
        for (t, d) in dists.iter().enumerate() {
            trace.records.push(TraceRecord {
                iter: t,
                residual: 0.0,
                dist_u: Some(*d),
                dist_v: None,
                elapsed_ms: 0.0,
            });
        }
        let s = convergence_report(&trace).unwrap();
        assert_eq!(s.floor_iteration, Some(3));
        assert_eq!(s.ratios.len(), 2);
    }

    #[test]
    fn trace_csv_roundtrip() {
        let mut trace = ConvergenceTrace::default();
        trace.records.push(TraceRecord {
            iter: 0,
            residual: 3.5,
            dist_u: Some(0.25),
            dist_v: None,
            elapsed_ms: 1.5,
        });
        trace.records.push(TraceRecord {
            iter: 1,
            residual: 1e-9,
            dist_u: None,
            dist_v: Some(0.125),
            elapsed_ms: 2.5,
        });
        let csv = trace_to_csv(&trace);
        assert!(csv.starts_with(TRACE_HEADER));
        let back = trace_from_csv(&csv).unwrap();
        assert_eq!(back.records.len(), 2);
        assert_eq!(back.records[0].dist_u, Some(0.25));
        assert_eq!(back.records[0].dist_v, None);
        assert_eq!(back.records[1].dist_v, Some(0.125));
        assert_eq!(back.records[1].residual, 1e-9);
    }

    #[test]
    fn trace_csv_rejects_wrong_header() {
        assert!(matches!(
            trace_from_csv("t,res\n0,1\n"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn sensing_experiment_small_run_passes() {
        let config = SensingConfig {
            m: 10,
            n: 10,
            k: 2,
            kappa: 2.0,
            d_mult: 3.0,
            noise_ratio: 0.0,
            t_max: 25,
            tol: 1e-12,
            solver: Solver::Altmin,
            seed: 5,
            threshold: 1e-4,
        };
        let report = run_sensing_experiment(&config).unwrap();
        assert!(report.pass, "rel error {}", report.final_rel_error);
        assert!(report.final_dist_u.unwrap() < 1e-4);
        let json = report.report_json();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["config"]["m"], 10);
        assert_eq!(parsed["pass"], true);
        // Key order is pinned.
        let config_pos = json.find("\"config\"").unwrap();
        let err_pos = json.find("\"final_rel_error\"").unwrap();
        let pass_pos = json.find("\"pass\"").unwrap();
        assert!(config_pos < err_pos && err_pos < pass_pos);
    }

    #[test]
    fn sensing_experiment_deterministic_csv() {
        let config = SensingConfig {
            m: 8,
            n: 8,
            k: 1,
            kappa: 1.0,
            d_mult: 3.0,
            noise_ratio: 0.0,
            t_max: 10,
            tol: 1e-12,
            solver: Solver::Altmin,
            seed: 6,
            threshold: 1e-4,
        };
        let a = run_sensing_experiment(&config).unwrap();
        let b = run_sensing_experiment(&config).unwrap();
        // Byte-identical up to the wall-clock column.
        let strip = |csv: &str| -> Vec<String> {
            csv.lines()
                .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
                .collect()
        };
        assert_eq!(strip(&trace_to_csv(&a.trace)), strip(&trace_to_csv(&b.trace)));
    }

    #[test]
    fn completion_experiment_fully_observed() {
        let config = CompletionConfig {
            m: 15,
            n: 15,
            k: 2,
            kappa: 2.0,
            p: 1.0,
            mu: 3.0,
            t_max: 5,
            tol: 1e-12,
            seed: 7,
            threshold: 1e-10,
        };
        let report = run_completion_experiment(&config).unwrap();
        assert!(report.pass, "rel error {}", report.final_rel_error);
    }

    #[test]
    fn invalid_configs_are_field_labeled() {
        let config = SensingConfig {
            m: 5,
            n: 5,
            k: 9,
            kappa: 2.0,
            d_mult: 3.0,
            noise_ratio: 0.0,
            t_max: 5,
            tol: 1e-12,
            solver: Solver::Altmin,
            seed: 0,
            threshold: 1e-4,
        };
        match run_sensing_experiment(&config) {
            Err(Error::ConfigInvalid { field, .. }) => assert_eq!(field, "k"),
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn config_serde_uses_upper_t_and_kebab_solver() {
        let json = r#"{"m":4,"n":4,"k":1,"p":1.0,"T":7,"seed":3}"#;
        let cfg: CompletionConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.t_max, 7);
        assert!((cfg.mu - 3.0).abs() < 1e-15);
        let s: Solver = serde_json::from_str("\"altmin-orth\"").unwrap();
        assert_eq!(s, Solver::AltminOrth);
    }

    #[test]
    fn artifacts_written_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let config = SensingConfig {
            m: 6,
            n: 6,
            k: 1,
            kappa: 1.0,
            d_mult: 3.0,
            noise_ratio: 0.0,
            t_max: 5,
            tol: 1e-12,
            solver: Solver::Altmin,
            seed: 8,
            threshold: 1e-4,
        };
        let report = run_sensing_experiment(&config).unwrap();
        write_artifacts(&report, dir.path(), "run").unwrap();
        let csv = fs::read_to_string(dir.path().join("run_trace.csv")).unwrap();
        assert!(csv.starts_with(TRACE_HEADER));
        let json = fs::read_to_string(dir.path().join("run_report.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(parsed["iterations_run"].as_u64().unwrap() >= 1);
        // No temp files left behind.
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .to_string_lossy()
                    .contains(".tmp")
            })
            .collect();
        assert!(leftovers.is_empty());
    }
}
