//! Command-line harness for the holomorphic Lie algebroid engine.
//!
//! Every subcommand maps onto a scenario command registered in the core
//! crate; the report JSON goes to stdout (or `--out`), a one-line summary
//! per check goes to stderr, and trajectories can be exported as CSV.
//! Exit status: 0 when every check passes, 1 when a check fails,
//! 2 when the input is rejected.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use algebroid_core::expr::{Assignment, Expression, VariableContext};
use algebroid_core::report::Tolerances;
use algebroid_core::sampling::SamplingSpec;
use algebroid_core::scenario::{self, ProbePoint, Scenario};

#[derive(Parser)]
#[command(
    name = "algebroid",
    about = "Validate holomorphic Lie algebroid structure data, derive sprays and nonlinear connections from Lagrangians, and transport Lagrange structures between the algebroid and the tangent bundle of its base.",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structure identities, the Jacobi identity, and chart data.
    Validate(CommonArgs),
    /// Derive the canonical spray of a Lagrangian and test it.
    DeriveSpray(CommonArgs),
    /// Derive a nonlinear connection from spray coefficients and test it.
    DeriveConnection(CommonArgs),
    /// Transport a Lagrange structure across the anchor (rank cases 1-3).
    Induce(CommonArgs),
    /// Integrate the spray ODE and export the trajectory.
    Integrate(CommonArgs),
    /// Run every applicable check and emit one combined report.
    Report(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::DeriveSpray(_) => "derive-spray",
            Command::DeriveConnection(_) => "derive-connection",
            Command::Induce(_) => "induce",
            Command::Integrate(_) => "integrate",
            Command::Report(_) => "report",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Validate(a)
            | Command::DeriveSpray(a)
            | Command::DeriveConnection(a)
            | Command::Induce(a)
            | Command::Integrate(a)
            | Command::Report(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Catalog entry name or path to a definition JSON file.
    #[arg(long)]
    algebroid: Option<String>,
    /// Lagrangian as a DSL expression.
    #[arg(long)]
    lagrangian: Option<String>,
    /// Which bundle the Lagrangian lives on: `e` (default) or `tm`.
    #[arg(long)]
    domain: Option<String>,
    /// Rank case for `induce` (1, 2 or 3); inferred from the anchor rank
    /// when omitted.
    #[arg(long)]
    case: Option<u8>,
    /// Transport direction label, echoed into the report.
    #[arg(long)]
    direction: Option<String>,
    /// Spray coefficients, one expression per fiber dimension,
    /// separated by `;`.
    #[arg(long, value_delimiter = ';')]
    spray: Option<Vec<String>>,
    /// Probe point: n + m complex literals like `1+2i`, comma-separated.
    #[arg(long)]
    at: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample-point count.
    #[arg(long)]
    points: Option<usize>,
    /// Override for exact-identity tolerances (default 1e-9).
    #[arg(long)]
    tol_exact: Option<f64>,
    /// Override for metric-mediated tolerances (default 1e-8).
    #[arg(long)]
    tol_metric: Option<f64>,
    /// Override for finite-difference cross-checks (default 1e-6).
    #[arg(long)]
    tol_fd: Option<f64>,
    /// Override for ODE admissibility (default 1e-6).
    #[arg(long)]
    tol_ode: Option<f64>,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the trajectory CSV here (integrate only).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Load a scenario JSON file; explicit flags override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

fn parse_complex(text: &str) -> Result<Complex64, String> {
    let ctx = VariableContext::holomorphic_base(1);
    let expr = Expression::parse(text.trim(), &ctx)
        .map_err(|e| format!("bad complex literal `{text}`: {e}"))?;
    if !expr.free_vars().is_empty() {
        return Err(format!("`{text}` is not a constant"));
    }
    let values: Assignment<Complex64> = Assignment {
        z: vec![Complex64::new(0.0, 0.0)],
        zb: vec![Complex64::new(0.0, 0.0)],
        u: vec![],
        ub: vec![],
    };
    expr.eval(&values)
        .map_err(|e| format!("bad complex literal `{text}`: {e}"))
}

fn parse_probe(text: &str, n: usize, m: usize) -> Result<ProbePoint, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != n + m {
        return Err(format!(
            "probe needs {n} z components and {m} u components, got {}",
            parts.len()
        ));
    }
    let mut values = Vec::with_capacity(parts.len());
    for part in parts {
        let c = parse_complex(part)?;
        values.push([c.re, c.im]);
    }
    Ok(ProbePoint {
        z: values[..n].to_vec(),
        u: values[n..].to_vec(),
    })
}

fn build_scenario(name: &str, args: &CommonArgs) -> Result<Scenario, String> {
    let mut scenario = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read scenario file: {e}"))?;
            serde_json::from_str::<Scenario>(&text)
                .map_err(|e| format!("bad scenario file: {e}"))?
        }
        None => Scenario {
            command: name.to_string(),
            algebroid: String::new(),
            lagrangian: None,
            domain: "e".to_string(),
            case: None,
            direction: None,
            spray: None,
            t_end: None,
            step: None,
            sampling: SamplingSpec::default(),
            tolerances: Tolerances::default(),
            probe: None,
        },
    };
    scenario.command = name.to_string();
    if let Some(a) = &args.algebroid {
        scenario.algebroid = a.clone();
    }
    if scenario.algebroid.is_empty() {
        return Err("missing --algebroid (catalog name or definition file)".to_string());
    }
    if let Some(l) = &args.lagrangian {
        scenario.lagrangian = Some(l.clone());
    }
    if let Some(d) = &args.domain {
        if d != "e" && d != "tm" {
            return Err(format!("--domain must be `e` or `tm`, got `{d}`"));
        }
        scenario.domain = d.clone();
    }
    if args.case.is_some() {
        scenario.case = args.case;
    }
    if let Some(d) = &args.direction {
        scenario.direction = Some(d.clone());
    }
    if let Some(s) = &args.spray {
        scenario.spray = Some(s.clone());
    }
    if args.t_end.is_some() {
        scenario.t_end = args.t_end;
    }
    if args.step.is_some() {
        scenario.step = args.step;
    }
    if let Some(seed) = args.seed {
        scenario.sampling.seed = seed;
    }
    if let Some(count) = args.points {
        scenario.sampling.count = count;
    }
    if let Some(t) = args.tol_exact {
        scenario.tolerances.exact = t;
    }
    if let Some(t) = args.tol_metric {
        scenario.tolerances.metric = t;
    }
    if let Some(t) = args.tol_fd {
        scenario.tolerances.fd = t;
    }
    if let Some(t) = args.tol_ode {
        scenario.tolerances.ode = t;
    }
    if let Some(at) = &args.at {
        let spec = scenario::load_algebroid(&scenario.algebroid).map_err(|e| format!("{e}"))?;
        scenario.probe = Some(parse_probe(at, spec.n, spec.m)?);
    }
    Ok(scenario)
}

fn real_main() -> Result<bool, String> {
    let cli = Cli::parse();
    let name = cli.command.name();
    let args = cli.command.args();
    let scenario = build_scenario(name, args)?;
    let (report, trajectory) = scenario::run(&scenario).map_err(|e| format!("{e}"))?;

    for check in &report.checks {
        eprintln!(
            "{:<40} residual {:>12.3e}  tol {:>8.1e}  {}",
            check.name,
            check.max_residual,
            check.tolerance,
            if check.pass { "pass" } else { "FAIL" }
        );
    }

    if let Some(path) = &args.csv {
        match &trajectory {
            Some(traj) => {
                let mut file = std::fs::File::create(path)
                    .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
                traj.write_csv(&mut file)
                    .map_err(|e| format!("csv write failed: {e}"))?;
                let manifest = algebroid_core::spray::manifest(
                    &scenario::load_algebroid(&scenario.algebroid).map_err(|e| format!("{e}"))?,
                    traj,
                )
                .map_err(|e| format!("{e}"))?;
                let manifest_path = path.with_extension("manifest.json");
                std::fs::write(
                    &manifest_path,
                    serde_json::to_string_pretty(&manifest).unwrap(),
                )
                .map_err(|e| format!("cannot write {}: {e}", manifest_path.display()))?;
            }
            None => return Err("--csv is only meaningful for `integrate`".to_string()),
        }
    }

    let json = serde_json::to_string_pretty(&report).map_err(|e| format!("{e}"))?;
    match &args.out {
        Some(path) => std::fs::write(path, json.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(json.as_bytes())
                .and_then(|_| stdout.write_all(b"\n"))
                .map_err(|e| format!("{e}"))?;
        }
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
