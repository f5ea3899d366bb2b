//! End-to-end verification of the reformulation chain on one instance.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::cp_lift::{
    assemble_qcqp, atom_with_tag, check_constraints_kronecker, check_constraints_vectorized,
    eval_objective_kronecker, eval_objective_vectorized, kron_blocks, kron_consistency, names,
    objective_kernel, verify_lifting_hypothesis, LiftedPoint,
};
use crate::error::{Error, Result};
use crate::io::RunConfig;
use crate::linnet::{
    deep_objective, expand_to_layers, oracle_opt, shallow_objective, train_shallow, OracleResult,
    ProblemInstance,
};
use crate::rank_sdp::{
    check_complementarity, lift_to_block, projector_witness, rank_sdp_objective,
    ComplementarityTriple,
};
use crate::relax::{build_relaxation, solve};
use crate::report::ConstraintReport;
use crate::tensor::{singular_values, sym_eig};

/// Agreement required between matched residuals of the two lifted forms.
pub const MATCHED_RESIDUAL_TOL: f64 = 1e-10;
/// Lower bound on the smallest eigenvalue of the objective kernel.
pub const KERNEL_PSD_TOL: f64 = 1e-10;

/// Lifted atom of the closed-form optimum: factor `W*`, lift to the block
/// matrix, attach its projector witness.
pub fn optimal_atom(inst: &ProblemInstance, oracle: &OracleResult) -> Result<LiftedPoint> {
    let t = optimal_triple(inst, oracle)?;
    Ok(atom_with_tag(&t, "oracle optimum"))
}

fn optimal_triple(inst: &ProblemInstance, oracle: &OracleResult) -> Result<ComplementarityTriple> {
    let p = oracle.factor_point(inst.r())?;
    let w = lift_to_block(&p)?.into_matrix();
    projector_witness(&w, inst.r())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Pass,
    VerificationFailure,
    InputError,
    NonConvergence,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            Self::Pass => 0,
            Self::VerificationFailure => 1,
            Self::InputError => 2,
            Self::NonConvergence => 3,
        }
    }

    /// Exit status for an error that aborted a command.
    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Shape { .. }
            | Error::UnknownSchema(_)
            | Error::UnknownGenerator(_)
            | Error::Config(_)
            | Error::WidthIncompatible(_)
            | Error::Dimension(_)
            | Error::Io(_) => Self::InputError,
            Error::EigNoConvergence { .. } | Error::Divergence { .. } | Error::Breakdown(_) => {
                Self::NonConvergence
            }
            _ => Self::VerificationFailure,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Section {
    pub name: String,
    pub report: ConstraintReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
    pub status: ExitStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelaxationSummary {
    pub lower_bound: f64,
    pub objective: f64,
    pub safety_margin: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub widths: Vec<usize>,
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub rank_constraint_vacuous: bool,
    pub opt_value: Option<f64>,
    pub trained_objective: Option<f64>,
    pub atom_objective: Option<f64>,
    pub relaxation: Option<RelaxationSummary>,
    pub tampered: bool,
    pub sections: Vec<Section>,
    pub errors: Vec<StageError>,
    pub status: ExitStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl VerifyReport {
    pub fn exit_code(&self) -> i32 {
        self.status.code()
    }

    pub fn section(&self, name: &str) -> Option<&ConstraintReport> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .map(|s| &s.report)
    }

    /// `section / row` names of every failed check.
    pub fn failed_checks(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .sections
            .iter()
            .flat_map(|s| {
                s.report
                    .failures()
                    .map(move |r| format!("{} / {}", s.name, r.name))
            })
            .collect();
        out.extend(self.errors.iter().map(|e| format!("{} / error", e.stage)));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "instance: widths {:?}, n = {}, d = {}, r = {}",
            self.widths, self.n, self.d, self.r
        );
        if self.rank_constraint_vacuous {
            let _ = writeln!(
                s,
                "note: r >= min(d_0, d_N), the rank constraint is vacuous"
            );
        }
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.12e}"));
        let _ = writeln!(s, "optimum (closed form): {}", opt(self.opt_value));
        let _ = writeln!(s, "trained objective:     {}", opt(self.trained_objective));
        let _ = writeln!(s, "optimal atom objective: {}", opt(self.atom_objective));
        if self.tampered {
            let _ = writeln!(s, "note: optimal atom was tampered by configuration");
        }
        if let Some(r) = &self.relaxation {
            let _ = writeln!(
                s,
                "relaxation: lower bound {:.12e}, gap {:.3e}, residuals {:.2e}/{:.2e}, {} iterations, {}",
                r.lower_bound,
                r.gap,
                r.primal_residual,
                r.dual_residual,
                r.iterations,
                if r.converged { "converged" } else { "NOT converged" }
            );
        }
        for sec in &self.sections {
            let _ = writeln!(s, "\n[{}]\n{}", sec.name, sec.report);
        }
        for e in &self.errors {
            let _ = writeln!(s, "\nerror in {}: {}", e.stage, e.message);
        }
        let failed = self.failed_checks();
        if !failed.is_empty() {
            let _ = writeln!(s, "\nfailed checks:");
            for f in failed {
                let _ = writeln!(s, "  {f}");
            }
        }
        if let Some(ms) = self.elapsed_ms {
            let _ = writeln!(s, "elapsed: {ms} ms");
        }
        let _ = writeln!(s, "status: {:?} (exit {})", self.status, self.status.code());
        s
    }
}

struct Run<'a> {
    inst: &'a ProblemInstance,
    cfg: &'a RunConfig,
    report: VerifyReport,
}

impl Run<'_> {
    fn section(&mut self, name: &str, report: ConstraintReport) {
        self.report.sections.push(Section {
            name: name.to_string(),
            report,
        });
    }

    fn error(&mut self, stage: &str, e: &Error, status: ExitStatus) {
        self.report.errors.push(StageError {
            stage: stage.to_string(),
            message: e.to_string(),
            status,
        });
    }

    fn oracle(&mut self) -> Option<OracleResult> {
        let oracle = match oracle_opt(self.inst) {
            Ok(o) => o,
            Err(e) => {
                self.error("oracle", &e, ExitStatus::VerificationFailure);
                return None;
            }
        };
        self.report.opt_value = Some(oracle.opt_value);
        let mut rep = ConstraintReport::new();
        let q_min = sym_eig(&objective_kernel(self.inst))
            .map(|e| e.min_eigenvalue())
            .unwrap_or(f64::NEG_INFINITY);
        rep.upper("-min eig(Q)", -q_min, KERNEL_PSD_TOL);
        let rank = singular_values(&oracle.w_star).map_or(f64::INFINITY, |sv| {
            let cut = self.cfg.rank_tol * sv.first().copied().unwrap_or(0.0).max(1.0);
            sv.iter().filter(|&&s| s > cut).count() as f64
        });
        rep.upper("rank(W*) - r", rank - self.inst.r() as f64, 0.0);
        self.section("oracle", rep);
        Some(oracle)
    }

    fn trainer(&mut self, opt: f64) {
        let mut rep = ConstraintReport::new();
        match train_shallow(self.inst, &self.cfg.train) {
            Ok(out) => {
                self.report.trained_objective = Some(out.objective);
                rep.upper(
                    "optimum - trained objective",
                    opt - out.objective,
                    self.cfg.chain_tol,
                );
            }
            Err(e) => self.error("trainer", &e, ExitStatus::VerificationFailure),
        }
        self.section("trainer", rep);
    }

    fn chain(&mut self, oracle: &OracleResult, atom: &LiftedPoint) -> Result<()> {
        let inst = self.inst;
        let tol = self.cfg.chain_tol;
        let p = oracle.factor_point(inst.r())?;
        let deep = deep_objective(&expand_to_layers(&p, inst.widths())?, inst)?;
        let shallow = shallow_objective(&p, inst)?;
        let block = rank_sdp_objective(lift_to_block(&p)?.w(), inst)?;
        let qcqp = assemble_qcqp(inst).objective(&atom.z)?;
        let vectorized = eval_objective_vectorized(atom, inst)?;
        let kronecker = eval_objective_kronecker(&kron_blocks(atom)?, inst)?;
        self.report.atom_objective = Some(vectorized);
        let mut rep = ConstraintReport::new();
        rep.equality("deep - shallow", deep - shallow, tol);
        rep.equality("shallow - block", shallow - block, tol);
        rep.equality("block - qcqp", block - qcqp, tol);
        rep.equality("qcqp - lifted (vectorized)", qcqp - vectorized, tol);
        rep.equality(
            "lifted (vectorized) - lifted (kronecker)",
            vectorized - kronecker,
            tol,
        );
        rep.equality(
            "lifted objective - optimum",
            vectorized - oracle.opt_value,
            self.cfg.objective_tol,
        );
        self.section("objective chain", rep);
        Ok(())
    }

    fn lifted(&mut self, atom: &LiftedPoint) -> Result<()> {
        let tol = self.cfg.constraint_tol;
        let vectorized = check_constraints_vectorized(atom, self.inst, tol);
        let mut kronecker = check_constraints_kronecker(atom, self.inst, tol);
        kronecker.equality(
            "kronecker consistency",
            kron_consistency(atom, &kron_blocks(atom)?)?,
            tol,
        );
        let mut agree = ConstraintReport::new();
        for (a, b) in names::MATCHED {
            let diff = match (vectorized.residual(a), kronecker.residual(b)) {
                (Some(x), Some(y)) => x - y,
                _ => f64::INFINITY,
            };
            agree.equality(format!("{a} vs {b}"), diff, MATCHED_RESIDUAL_TOL);
        }
        self.section("lifted (vectorized)", vectorized);
        self.section("lifted (kronecker)", kronecker);
        self.section("matched residuals", agree);
        Ok(())
    }

    fn relaxation(&mut self, oracle: &OracleResult, atom: &LiftedPoint) -> Result<()> {
        let inst = self.inst;
        let prob = build_relaxation(&assemble_qcqp(inst), inst)?;
        let mut rep = ConstraintReport::new();
        let blocks = prob.embed(&atom.bordered())?;
        rep.upper(
            "optimal atom: affine violation",
            prob.affine_violation(&blocks),
            self.cfg.constraint_tol,
        );
        let res = solve(&prob, &self.cfg.relax)?;
        // An unconverged iterate certifies nothing; the status reports it.
        if res.converged {
            rep.upper(
                "lower bound - optimum",
                res.lower_bound - oracle.opt_value,
                self.cfg.sandwich_tol,
            );
        }
        self.report.relaxation = Some(RelaxationSummary {
            lower_bound: res.lower_bound,
            objective: res.objective,
            safety_margin: res.safety_margin,
            gap: oracle.opt_value - res.lower_bound,
            primal_residual: res.primal_residual,
            dual_residual: res.dual_residual,
            iterations: res.iterations,
            converged: res.converged,
        });
        self.section("relaxation", rep);
        Ok(())
    }
}

/// Runs oracle, trainer, witness, lifted-form checks, hypothesis sampling,
/// relaxation and sandwich on one instance. Errors inside a stage are
/// recorded in the report; only an invalid configuration aborts.
pub fn run_verify(
    inst: &ProblemInstance,
    cfg: &RunConfig,
    deterministic: bool,
) -> Result<VerifyReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut run = Run {
        inst,
        cfg,
        report: VerifyReport {
            widths: inst.widths().to_vec(),
            n: inst.n(),
            d: inst.d(),
            r: inst.r(),
            rank_constraint_vacuous: inst.rank_constraint_vacuous(),
            opt_value: None,
            trained_objective: None,
            atom_objective: None,
            relaxation: None,
            tampered: cfg.tamper_w_prime.is_some(),
            sections: Vec::new(),
            errors: Vec::new(),
            status: ExitStatus::Pass,
            elapsed_ms: None,
        },
    };

    if let Some(oracle) = run.oracle() {
        run.trainer(oracle.opt_value);
        match optimal_triple(inst, &oracle) {
            Ok(mut t) => {
                if let Some(scale) = cfg.tamper_w_prime {
                    t.w_prime = t.w_prime.scale(scale);
                }
                run.section(
                    "witness",
                    check_complementarity(&t, inst.r(), cfg.constraint_tol),
                );
                let atom = atom_with_tag(&t, "oracle optimum");
                if let Err(e) = run.chain(&oracle, &atom) {
                    run.error("objective chain", &e, ExitStatus::VerificationFailure);
                }
                if let Err(e) = run.lifted(&atom) {
                    run.error("lifted", &e, ExitStatus::VerificationFailure);
                }
                if let Err(e) = run.relaxation(&oracle, &atom) {
                    run.error("relaxation", &e, ExitStatus::for_error(&e));
                }
            }
            Err(e) => run.error("witness", &e, ExitStatus::VerificationFailure),
        }
    }
    match verify_lifting_hypothesis(inst, cfg.hypothesis_samples, cfg.seed, cfg.constraint_tol) {
        Ok(rep) => run.section("lifting hypothesis", rep),
        Err(e) => run.error("lifting hypothesis", &e, ExitStatus::VerificationFailure),
    }

    let mut report = run.report;
    let any_failed = report.sections.iter().any(|s| !s.report.passed());
    let converged = report.relaxation.as_ref().is_some_and(|r| r.converged);
    report.status = if any_failed
        || report
            .errors
            .iter()
            .any(|e| e.status == ExitStatus::VerificationFailure)
    {
        ExitStatus::VerificationFailure
    } else if !report.errors.is_empty() || !converged {
        ExitStatus::NonConvergence
    } else {
        ExitStatus::Pass
    };
    if !deterministic {
        report.elapsed_ms = Some(start.elapsed().as_millis() as u64);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DenseMatrix;

    fn tiny() -> ProblemInstance {
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.5, -1.0]]).unwrap();
        let y = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.0]]).unwrap();
        ProblemInstance::new(x, y, vec![1, 1]).unwrap()
    }

    #[test]
    fn tiny_instance_passes() {
        let rep = run_verify(&tiny(), &RunConfig::default(), true).unwrap();
        assert_eq!(rep.status, ExitStatus::Pass, "{}", rep.to_text());
        assert!(rep.elapsed_ms.is_none());
    }

    #[test]
    fn tampering_is_reported() {
        let cfg = RunConfig {
            tamper_w_prime: Some(0.9),
            ..RunConfig::default()
        };
        let inst = tiny();
        let rep = run_verify(&inst, &cfg, true).unwrap();
        assert_eq!(rep.status, ExitStatus::VerificationFailure);
        let res = rep
            .section("lifted (vectorized)")
            .unwrap()
            .residual(names::TRACE_W_PRIME)
            .unwrap();
        assert!((res.abs() - 0.1 * inst.r() as f64).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_maps_to_nonconvergence() {
        let mut cfg = RunConfig::default();
        cfg.relax.max_iters = 2;
        let rep = run_verify(&tiny(), &cfg, true).unwrap();
        assert_eq!(rep.exit_code(), 3);
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_verify(&tiny(), &RunConfig::default(), true).unwrap();
        let b = run_verify(&tiny(), &RunConfig::default(), true).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_text(), b.to_text());
    }
}
