//! `kjet` command line: problem-file ingestion, command dispatch, and
//! machine-readable reports.
//!
//! Exit codes: 0 ok, 1 usage/parse, 2 singular metric, 3 Finsler axiom
//! violation, 4 slit exit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use kjet_core::connections::{
    autoparallel_curve_system, bucataru_connection, dual_to_primal, miron_connection,
    DualCoefficients,
};
use kjet_core::integrate::{
    integrate, kpath_system, residual_along, state_labels, write_csv, IntegratorConfig, OdeSystem,
};
use kjet_core::lagrange::cartan_connection;
use kjet_core::phase::{euler_degree, PhasePoint};
use kjet_core::problem::ProblemSetup;
use kjet_core::report::{CheckReport, CheckStatus};
use kjet_core::verify::run_verify;
use kjet_core::{Error, KSemispray};

const EXIT_USAGE: u8 = 1;
const EXIT_SINGULAR_METRIC: u8 = 2;
const EXIT_FINSLER_VIOLATION: u8 = 3;
const EXIT_SLIT_EXIT: u8 = 4;

#[derive(Parser)]
#[command(name = "kjet", version, about = "Semisprays and nonlinear connections on order-k tangent bundles", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Miron,
    Bucataru,
    Cartan,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Kpath,
    Autoparallel,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the problem's semispray and test its homogeneity.
    Semispray { file: PathBuf },
    /// Build a nonlinear connection and print its coefficients.
    Connection {
        file: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
    },
    /// Iterate the semispray sequence and test constancy.
    Sequence {
        file: PathBuf,
        #[arg(long)]
        iterations: u32,
    },
    /// Integrate a k-path or autoparallel system and export the trajectory.
    Integrate {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Kpath)]
        kind: Kind,
        #[arg(long, value_enum, default_value_t = Method::Bucataru)]
        method: Method,
        /// Initial state, semicolon-separated in slot order: x;y1;...;yk.
        #[arg(long)]
        init: String,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// CSV output path for the trajectory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full verification suite on the problem file.
    Verify { file: PathBuf },
}

#[derive(Serialize)]
struct Report {
    command: String,
    input_sha256: String,
    checks: Vec<CheckReport>,
    elapsed_ms: u128,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let started = Instant::now();
    let format = cli.report;
    let outcome = dispatch(&cli.command, format);
    match outcome {
        Ok(run) => {
            let report = Report {
                command: run.command,
                input_sha256: run.digest,
                checks: run.checks,
                elapsed_ms: started.elapsed().as_millis(),
            };
            emit(&report, format);
            ExitCode::from(run.exit)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::SingularMetric(_) => EXIT_SINGULAR_METRIC,
        Error::FinslerAxiomViolation(_) => EXIT_FINSLER_VIOLATION,
        _ => EXIT_USAGE,
    }
}

struct Run {
    command: String,
    digest: String,
    checks: Vec<CheckReport>,
    exit: u8,
}

fn dispatch(command: &Command, format: ReportFormat) -> kjet_core::Result<Run> {
    match command {
        Command::Semispray { file } => cmd_semispray(file, format),
        Command::Connection { file, method } => cmd_connection(file, *method, format),
        Command::Sequence { file, iterations } => cmd_sequence(file, *iterations, format),
        Command::Integrate {
            file,
            kind,
            method,
            init,
            t0,
            t1,
            step,
            out,
        } => cmd_integrate(file, *kind, *method, init, *t0, *t1, *step, out.as_deref(), format),
        Command::Verify { file } => cmd_verify(file, format),
    }
}

fn load(file: &Path) -> kjet_core::Result<(ProblemSetup, String)> {
    let (mut setup, bytes) = ProblemSetup::from_path(file)?;
    if let Ok(seed) = std::env::var("KJET_SEED") {
        setup.seed = seed
            .parse()
            .map_err(|_| Error::Invalid(format!("KJET_SEED = '{seed}' is not an integer")))?;
    }
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok((setup, digest))
}

fn emit(report: &Report, format: ReportFormat) {
    match format {
        ReportFormat::Json => {
            println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
        }
        ReportFormat::Text => {
            println!("command: {}", report.command);
            println!("input sha256: {}", report.input_sha256);
            for c in &report.checks {
                let residual = c
                    .residual
                    .map_or("-".to_string(), |r| format!("{r:.6e}"));
                let point = c.point.as_ref().map_or("-".to_string(), |p| {
                    let vals: Vec<String> = p.iter().map(|v| format!("{v:.4}")).collect();
                    format!("({})", vals.join(", "))
                });
                let mut line =
                    format!("{:<52} {:<6} residual={residual:<13} point={point}", c.name, c.status);
                if !c.notes.is_empty() {
                    line.push_str(&format!("  [{}]", c.notes.join("; ")));
                }
                println!("{line}");
            }
            println!("elapsed: {} ms", report.elapsed_ms);
        }
    }
}

fn text_mode(format: ReportFormat) -> bool {
    format == ReportFormat::Text
}

/// Integral homogeneity degree of an expression, probed over 0..=2k+2.
fn detect_degree(
    e: &kjet_core::Expr,
    setup: &ProblemSetup,
    points: &[PhasePoint],
) -> Option<i64> {
    if e.is_zero() {
        return None; // zero is homogeneous of every degree
    }
    (0..=(2 * setup.ctx.k as i64 + 2))
        .find(|r| euler_degree(e, *r, setup.ctx, points, setup.tol.euler).passed())
}

fn degree_label(
    e: &kjet_core::Expr,
    setup: &ProblemSetup,
    points: &[PhasePoint],
) -> String {
    if e.is_zero() {
        "any".to_string()
    } else {
        detect_degree(e, setup, points).map_or("none".to_string(), |d| d.to_string())
    }
}

fn cmd_semispray(file: &Path, format: ReportFormat) -> kjet_core::Result<Run> {
    let (setup, digest) = load(file)?;
    let s = setup.semispray()?;
    let points = setup.sample(50, setup.seed)?;
    if text_mode(format) {
        for (i, g) in s.g.iter().enumerate() {
            println!("G{} = {}  (degree: {})", i + 1, g, degree_label(g, &setup, &points));
        }
    }
    let checks = vec![s.is_kspray(&points, setup.tol.euler)];
    Ok(Run {
        command: format!("semispray {}", file.display()),
        digest,
        checks,
        exit: 0,
    })
}

fn connection_for(
    setup: &ProblemSetup,
    s: &KSemispray,
    method: Method,
) -> kjet_core::Result<DualCoefficients> {
    match method {
        Method::Miron => Ok(miron_connection(s)),
        Method::Bucataru => Ok(bucataru_connection(s)),
        Method::Cartan => {
            let spec = setup.lagrangian.as_ref().ok_or_else(|| {
                Error::FinslerAxiomViolation(
                    "cartan connection needs a Finsler problem file".to_string(),
                )
            })?;
            if !spec.finsler {
                return Err(Error::FinslerAxiomViolation(
                    "problem file is not flagged finsler".to_string(),
                ));
            }
            let (_, cartan) = cartan_connection(spec)?;
            Ok(cartan)
        }
    }
}

fn cmd_connection(file: &Path, method: Method, format: ReportFormat) -> kjet_core::Result<Run> {
    let (setup, digest) = load(file)?;
    let s = setup.semispray()?;
    let d = connection_for(&setup, &s, method)?;
    let points = setup.sample(50, setup.seed)?;
    if text_mode(format) {
        let primal = dual_to_primal(&d);
        for (m, matrix) in d.m.iter().enumerate() {
            for (i, row) in matrix.iter().enumerate() {
                for (j, entry) in row.iter().enumerate() {
                    println!(
                        "M({})[{},{}] = {}  (degree: {})",
                        m + 1,
                        i + 1,
                        j + 1,
                        entry,
                        degree_label(entry, &setup, &points)
                    );
                }
            }
        }
        for (m, matrix) in primal.n.iter().enumerate() {
            for (i, row) in matrix.iter().enumerate() {
                for (j, entry) in row.iter().enumerate() {
                    println!("N({})[{},{}] = {}", m + 1, i + 1, j + 1, entry);
                }
            }
        }
    }
    let mut checks = vec![s.is_kspray(&points, setup.tol.euler)];
    checks.push(kjet_core::connections::verify_frame_duality(
        &kjet_core::connections::adapted_frame(&d),
        &points,
        setup.tol.pairing,
    ));
    Ok(Run {
        command: format!("connection {}", file.display()),
        digest,
        checks,
        exit: 0,
    })
}

fn cmd_sequence(file: &Path, iterations: u32, format: ReportFormat) -> kjet_core::Result<Run> {
    if iterations == 0 {
        return Err(Error::Invalid("--iterations must be >= 1".to_string()));
    }
    let (setup, digest) = load(file)?;
    let s = setup.semispray()?;
    let seq = s.sequence(iterations as usize);
    let points = setup.sample(50, setup.seed)?;
    if text_mode(format) {
        for (step, item) in seq.iter().enumerate() {
            let coeffs: Vec<String> = item.g.iter().map(|g| g.to_string()).collect();
            println!("S{}: G = {}", step + 1, coeffs.join(", "));
        }
    }
    let mut max_gap = 0.0f64;
    let mut canonical = true;
    for item in &seq[1..] {
        if item.g != s.g {
            canonical = false;
        }
        for (a, b) in item.g.iter().zip(s.g.iter()) {
            let gap = kjet_core::Expr::sub(a.clone(), b.clone());
            for p in &points {
                max_gap = max_gap.max(gap.evaluate(setup.ctx, p)?.abs());
            }
        }
    }
    let mut check = CheckReport::from_residual("sequence_constant", max_gap, setup.tol.sequence);
    check.notes.push(if canonical {
        "iterates canonically equal".to_string()
    } else {
        "iterates differ canonically".to_string()
    });
    if check.status == CheckStatus::Fail && setup.expects_fail("sequence_constant") {
        check.notes.push("expected".to_string());
    }
    Ok(Run {
        command: format!("sequence {}", file.display()),
        digest,
        checks: vec![check],
        exit: 0,
    })
}

fn parse_init(init: &str, setup: &ProblemSetup) -> kjet_core::Result<PhasePoint> {
    let values: Vec<f64> = init
        .split(';')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("bad init component '{part}'")))
        })
        .collect::<kjet_core::Result<_>>()?;
    PhasePoint::from_flat(setup.ctx, &values)
}

#[allow(clippy::too_many_arguments)]
fn cmd_integrate(
    file: &Path,
    kind: Kind,
    method: Method,
    init: &str,
    t0: f64,
    t1: f64,
    step: f64,
    out: Option<&Path>,
    format: ReportFormat,
) -> kjet_core::Result<Run> {
    let (setup, digest) = load(file)?;
    let s = setup.semispray()?;
    let sys: OdeSystem = match kind {
        Kind::Kpath => kpath_system(&s),
        Kind::Autoparallel => {
            let d = connection_for(&setup, &s, method)?;
            autoparallel_curve_system(&d)
        }
    };
    let init_point = parse_init(init, &setup)?;
    let cfg = IntegratorConfig {
        step,
        margin: setup.tol.margin,
    };
    let traj = integrate(&sys, &init_point, t0, t1, &cfg)?;
    if let Some(path) = out {
        let f = std::fs::File::create(path)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        write_csv(&traj, std::io::BufWriter::new(f))
            .map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    }
    let mut checks = Vec::new();
    let self_res = residual_along(&traj, &sys)?;
    checks.push(
        CheckReport::from_residual("self_residual", self_res, setup.tol.kpath_residual)
            .at_point(traj.final_state().flatten())
            .with_note(format!(
                "final state: {}",
                describe_state(traj.final_state(), setup.ctx)
            )),
    );
    if kind == Kind::Autoparallel {
        let s2 = s.next_semispray();
        let res2 = residual_along(&traj, &kpath_system(&s2))?;
        checks.push(CheckReport::from_residual(
            "next_kpath_residual",
            res2,
            setup.tol.kpath_residual,
        ));
    }
    if let Some(t) = traj.slit_exit {
        checks.push(
            CheckReport::fail("slit_exit", 0.0).with_note(format!("left slit domain at t = {t}")),
        );
    }
    if text_mode(format) {
        println!(
            "integrated {} steps, final state: {}",
            traj.times.len() - 1,
            describe_state(traj.final_state(), setup.ctx)
        );
    }
    Ok(Run {
        command: format!("integrate {}", file.display()),
        digest,
        checks,
        exit: if traj.slit_exit.is_some() { EXIT_SLIT_EXIT } else { 0 },
    })
}

fn describe_state(p: &PhasePoint, ctx: kjet_core::Context) -> String {
    state_labels(ctx)
        .iter()
        .zip(p.flatten())
        .map(|(label, v)| format!("{label}={v:.12}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_verify(file: &Path, _format: ReportFormat) -> kjet_core::Result<Run> {
    let (setup, digest) = load(file)?;
    let checks = run_verify(&setup);
    let exit = if checks.iter().any(|c| c.status == CheckStatus::Error) {
        EXIT_USAGE
    } else {
        0
    };
    Ok(Run {
        command: format!("verify {}", file.display()),
        digest,
        checks,
        exit,
    })
}
