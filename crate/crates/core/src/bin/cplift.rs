use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use cplift::cp_lift::{
    assemble_qcqp, check_constraints_kronecker, check_constraints_vectorized,
    eval_objective_vectorized,
};
use cplift::io::{self, GeneratorSpec, RunConfig};
use cplift::linnet::{oracle_opt, train_shallow, FactorPoint, ProblemInstance};
use cplift::relax::{build_relaxation, certify_sandwich, solve};
use cplift::verify::{optimal_atom, run_verify, ExitStatus};
use cplift::{random, Error};

#[derive(Parser)]
#[command(
    name = "cplift",
    version,
    about = "Lifted reformulation checks for linear network training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    constraint_tol: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol_primal: Option<f64>,
    #[arg(long)]
    tol_dual: Option<f64>,
    #[arg(long)]
    train_iters: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                io::load_config(p).with_context(|| format!("reading config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.train.seed = s;
            cfg.relax.seed = s;
        }
        if let Some(v) = self.constraint_tol {
            cfg.constraint_tol = v;
        }
        if let Some(v) = self.samples {
            cfg.hypothesis_samples = v;
        }
        if let Some(v) = self.rho {
            cfg.relax.rho = v;
        }
        if let Some(v) = self.max_iters {
            cfg.relax.max_iters = v;
        }
        if let Some(v) = self.tol_primal {
            cfg.relax.tol_primal = v;
        }
        if let Some(v) = self.tol_dual {
            cfg.relax.tol_dual = v;
        }
        if let Some(v) = self.train_iters {
            cfg.train.max_iters = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen {
        /// random-gaussian, exact-fit or low-rank-plus-noise
        #[arg(long, default_value = "random-gaussian")]
        generator: String,
        /// Comma-separated layer widths d_0,...,d_N.
        #[arg(long, value_delimiter = ',', required = true)]
        widths: Vec<usize>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate every objective representation at a random factor point.
    Eval {
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Gradient descent on the factored objective.
    Train {
        instance: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Closed-form global optimum.
    Oracle { instance: PathBuf },
    /// Lift the optimum to an atom and check both lifted forms.
    Lift {
        instance: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the full verification chain.
    Verify {
        instance: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Omit timings so reports are byte-identical across runs.
        #[arg(long)]
        deterministic: bool,
    },
    /// Solve the PSD relaxation and compare with the optimum.
    Relax {
        instance: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write the PSD relaxation in SDPA sparse format.
    Export {
        instance: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn load(path: &Path) -> anyhow::Result<ProblemInstance> {
    io::load_instance(path).with_context(|| format!("reading instance {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<ExitStatus> {
    match cli.command {
        Command::Gen {
            generator,
            widths,
            n,
            seed,
            noise,
            output,
        } => {
            let mut spec = GeneratorSpec::named(&generator, widths, n)?;
            if let Some(s) = noise {
                spec.noise = s;
            }
            let text = io::generate_file(&spec, seed)?.to_json();
            match output {
                Some(p) => std::fs::write(&p, text + "\n")
                    .with_context(|| format!("writing {}", p.display()))?,
                None => println!("{text}"),
            }
        }
        Command::Eval { instance, seed } => {
            let inst = load(&instance)?;
            let p = FactorPoint::random_for(&mut random::seeded(seed), &inst);
            let deep = cplift::linnet::deep_objective(
                &cplift::linnet::expand_to_layers(&p, inst.widths())?,
                &inst,
            )?;
            let shallow = cplift::linnet::shallow_objective(&p, &inst)?;
            let block = cplift::rank_sdp::lift_to_block(&p)?;
            let t = cplift::rank_sdp::projector_witness(block.w(), inst.r())?;
            let atom = cplift::cp_lift::atom_from_triple(&t);
            let blocks = cplift::cp_lift::kron_blocks(&atom)?;
            println!("deep network        {deep:.15e}");
            println!("factored            {shallow:.15e}");
            println!(
                "block matrix        {:.15e}",
                cplift::rank_sdp::rank_sdp_objective(block.w(), &inst)?
            );
            println!(
                "qcqp                {:.15e}",
                assemble_qcqp(&inst).objective(&atom.z)?
            );
            println!(
                "lifted (vectorized) {:.15e}",
                eval_objective_vectorized(&atom, &inst)?
            );
            println!(
                "lifted (kronecker)  {:.15e}",
                cplift::cp_lift::eval_objective_kronecker(&blocks, &inst)?
            );
        }
        Command::Train { instance, cfg } => {
            let inst = load(&instance)?;
            let cfg = cfg.resolve()?;
            let out = train_shallow(&inst, &cfg.train)?;
            let opt = oracle_opt(&inst)?.opt_value;
            println!("objective  {:.12e}", out.objective);
            println!("optimum    {opt:.12e}");
            println!("grad norm  {:.3e}", out.grad_norm);
            let state = match (out.converged, out.stalled) {
                (true, _) => "converged",
                (false, true) => "stalled at working precision",
                (false, false) => "cap reached",
            };
            println!("iterations {} ({state})", out.iterations);
            if !out.converged && !out.stalled {
                return Ok(ExitStatus::NonConvergence);
            }
        }
        Command::Oracle { instance } => {
            let inst = load(&instance)?;
            let o = oracle_opt(&inst)?;
            println!("optimum        {:.15e}", o.opt_value);
            println!("effective rank {} (bound {})", o.effective_rank, inst.r());
            println!("W* =\n{:?}", o.w_star);
        }
        Command::Lift { instance, cfg } => {
            let inst = load(&instance)?;
            let cfg = cfg.resolve()?;
            let atom = optimal_atom(&inst, &oracle_opt(&inst)?)?;
            let a = check_constraints_vectorized(&atom, &inst, cfg.constraint_tol);
            let b = check_constraints_kronecker(&atom, &inst, cfg.constraint_tol);
            println!("{}", assemble_qcqp(&inst).cone.describe());
            println!("vectorized form:\n{a}\nkronecker form:\n{b}");
            if !(a.passed() && b.passed()) {
                return Ok(ExitStatus::VerificationFailure);
            }
        }
        Command::Verify {
            instance,
            cfg,
            json,
            deterministic,
        } => {
            let inst = load(&instance)?;
            let cfg = cfg.resolve()?;
            let report = run_verify(&inst, &cfg, deterministic)?;
            print!("{}", report.to_text());
            if let Some(p) = json {
                std::fs::write(&p, report.to_json() + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            return Ok(report.status);
        }
        Command::Relax { instance, cfg } => {
            let inst = load(&instance)?;
            let cfg = cfg.resolve()?;
            let prob = build_relaxation(&assemble_qcqp(&inst), &inst)?;
            let res = solve(&prob, &cfg.relax)?;
            println!(
                "lower bound {:.12e} (margin {:.2e})",
                res.lower_bound, res.safety_margin
            );
            println!(
                "residuals   {:.2e} / {:.2e} after {} iterations",
                res.primal_residual, res.dual_residual, res.iterations
            );
            if !res.converged {
                println!("not converged");
                return Ok(ExitStatus::NonConvergence);
            }
            let s = certify_sandwich(&inst, &res, cfg.sandwich_tol)?;
            println!("optimum     {:.12e}", s.opt_value);
            println!("gap         {:.3e}", s.gap);
        }
        Command::Export { instance, output } => {
            let inst = load(&instance)?;
            let prob = build_relaxation(&assemble_qcqp(&inst), &inst)?;
            io::export_sdpa(&prob, &output)
                .with_context(|| format!("writing {}", output.display()))?;
            println!(
                "wrote {} constraints to {}",
                prob.constraints.len(),
                output.display()
            );
        }
    }
    Ok(ExitStatus::Pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match run(cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.downcast_ref::<Error>()
                .map_or(ExitStatus::InputError, ExitStatus::for_error)
        }
    };
    ExitCode::from(status.code() as u8)
}
