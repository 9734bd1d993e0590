use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sgs_admm::imipadmm::ProxMode;
use sgs_admm::instances::{oracle_solve, InstancePreset, KktPoint};
use sgs_admm::problem_file;
use sgs_admm::sgsadmm::SweepInexactness;
use sgs_admm::trials::{run, verify_run, Algorithm, RunOutput, RunSettings};
use sgs_admm::verify::{summarize, write_report, Ledger};
use sgs_admm::{Execution, ProblemSpec, ToleranceSchedule};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_MET: u8 = 2;

#[derive(Parser)]
#[command(name = "sgsadmm", version, about = "sGS-based inexact indefinite-proximal ADMM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver and log one CSV row per iteration.
    Solve(RunArgs),
    /// Run a solver and write the convergence ledger as CSV.
    Verify(RunArgs),
    /// Write a preset as a problem file.
    Gen {
        #[arg(long)]
        preset: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Built-in instance (tiny, lasso1, box1, threeby2, stress, twobytwo).
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    preset: Option<String>,
    /// Problem file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "sgs")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.618)]
    tau: f64,
    #[arg(long, default_value_t = 1e-8)]
    stop_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Tolerance schedule: zero | geom:<ε0>:<r> | pow:<ε0>:<p>.
    #[arg(long, default_value = "zero")]
    eps: ToleranceSchedule,
    /// Proximal terms: auto | zero | shift:<λ> | stress.
    #[arg(long, default_value = "auto")]
    prox: ProxMode,
    /// Subproblem inexactness: exact | tilt:<seed> | cg.
    #[arg(long, default_value = "exact")]
    inexact: SweepInexactness,
    /// Check every sGS iterate against the equivalent two-block step.
    #[arg(long)]
    cross_check: bool,
    /// Iteration log path (solve); stdout when omitted.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Ledger report path (verify); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure carrying its exit status.
struct Fail(u8, String);

impl From<sgs_admm::Error> for Fail {
    fn from(e: sgs_admm::Error) -> Self {
        Fail(EXIT_INPUT, e.to_string())
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Self {
        Fail(EXIT_INPUT, e.to_string())
    }
}

impl From<csv::Error> for Fail {
    fn from(e: csv::Error) -> Self {
        Fail(EXIT_INPUT, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => solve(&args),
        Command::Verify(args) => verify(&args),
        Command::Gen { preset, out } => gen(&preset, out.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("sgsadmm: {msg}");
            ExitCode::from(code)
        }
    }
}

fn sink(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load(args: &RunArgs) -> Result<ProblemSpec, Fail> {
    match (&args.preset, &args.input) {
        (Some(name), None) => Ok(InstancePreset::by_name(name)?.generate()?),
        (None, Some(path)) => problem_file::read(path).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", path.display()))),
        _ => Err(Fail(EXIT_INPUT, "give exactly one of --preset and --input".into())),
    }
}

fn settings(args: &RunArgs) -> Result<RunSettings, Fail> {
    if !(args.tau > 0.0 && args.tau < 1.618_034) {
        return Err(Fail(EXIT_INPUT, format!("--tau {} is outside (0, (1+√5)/2)", args.tau)));
    }
    if !(args.sigma > 0.0 && args.sigma.is_finite()) {
        return Err(Fail(EXIT_INPUT, format!("--sigma {} must be positive", args.sigma)));
    }
    Ok(RunSettings {
        algorithm: args.algorithm,
        sigma: args.sigma,
        tau: args.tau,
        stop_tol: args.stop_tol,
        max_iter: args.max_iter,
        eps: args.eps,
        prox: args.prox,
        inexact: args.inexact,
        cross_check: args.cross_check,
    })
}

/// Oracle KKT point, or the final iterate of a converged run when the
/// enumeration is out of reach.
fn anchor(spec: &ProblemSpec, out: &RunOutput) -> Option<KktPoint> {
    oracle_solve(spec, 1e-10).ok().or_else(|| {
        out.outcome.converged.then(|| {
            eprintln!("sgsadmm: oracle unavailable, anchoring the ledger at the final iterate");
            let s = &out.outcome.state;
            KktPoint { x: s.x.clone(), y: s.y.clone(), z: s.z.clone(), residual: f64::NAN }
        })
    })
}

/// Shortest representation that reads back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn solve(args: &RunArgs) -> Result<(), Fail> {
    let spec = load(args)?;
    let settings = settings(args)?;
    let start = Instant::now();
    let out = run(&spec, &settings)?;
    let wall = start.elapsed();

    let states = out.outcome.states();
    let ledger = match anchor(&spec, &out) {
        Some(a) => Some(Ledger::new(&spec, &out.config, &a)?),
        None => None,
    };
    let mut w = csv::Writer::from_writer(sink(args.log.as_ref())?);
    w.write_record([
        "k", "primal_res", "dual_x_res", "dual_y_res", "kkt_total", "eps_k", "cert_x", "cert_y", "phi_k",
    ])?;
    for (k, rec) in out.outcome.trace.iter().enumerate() {
        let phi = ledger.as_ref().map_or(String::new(), |l| num(l.phi(&states, k)));
        w.write_record([
            rec.k.to_string(),
            num(rec.kkt.primal),
            num(rec.kkt.dual_x),
            num(rec.kkt.dual_y),
            num(rec.kkt.total),
            num(rec.eps),
            num(rec.cert_x),
            num(rec.cert_y),
            phi,
        ])?;
    }
    w.flush()?;
    let summary = format!(
        "iterations={} final_residual={:e} converged={} wall_time={:.3}s",
        out.outcome.iterations,
        out.outcome.final_residual(),
        out.outcome.converged,
        wall.as_secs_f64()
    );
    if args.log.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    if out.outcome.converged {
        Ok(())
    } else {
        Err(Fail(EXIT_NOT_MET, format!("max_iter {} reached without convergence", settings.max_iter)))
    }
}

fn verify(args: &RunArgs) -> Result<(), Fail> {
    let spec = load(args)?;
    let out = run(&spec, &settings(args)?)?;
    let anchor = anchor(&spec, &out)
        .ok_or_else(|| Fail(EXIT_NOT_MET, "no anchor: oracle unavailable and the run did not converge".into()))?;
    let rows = verify_run(&spec, &out, &anchor, Execution::default())?;
    write_report(&rows, sink(args.out.as_ref())?)?;
    let s = summarize(&rows);
    let msg = format!(
        "iterations={} converged={} rows={} failures={} worst_ratio={:.3e}",
        out.outcome.iterations, out.outcome.converged, s.rows, s.failures, s.worst_ratio
    );
    if args.out.is_some() {
        println!("{msg}");
    } else {
        eprintln!("{msg}");
    }
    if !out.outcome.converged {
        return Err(Fail(EXIT_NOT_MET, "max_iter reached without convergence".into()));
    }
    if s.failures > 0 {
        return Err(Fail(EXIT_NOT_MET, format!("{} ledger rows failed", s.failures)));
    }
    Ok(())
}

fn gen(preset: &str, out: Option<&PathBuf>) -> Result<(), Fail> {
    let spec = InstancePreset::by_name(preset)?.generate()?;
    let mut w = sink(out)?;
    w.write_all(problem_file::to_string(&spec).as_bytes())?;
    w.flush()?;
    Ok(())
}
