//! Command-line front end: `gen`, `check`, `oracle` and `sim`.
//!
//! Exit codes: 0 certified (or bounded / grid-clean), 1 not certified,
//! 2 inconclusive, 3 usage or input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::kyp::{build_fdi, certify_network, frequency_grid_check, log_grid, Method, Verdict};
use crate::lti::HURWITZ_TOL;
use crate::netfile::{gen_example, parse_network_file, Network, ReportFile, Topology};
use crate::sim::{closed_loop_ss, default_dt, sample_links_per_agent, simulate, write_csv, Disturbance};

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_NOT_CERTIFIED: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "netiqc", version, about = "Robust stability certificates for uncertain LTI networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Monolithic,
    Neighborhood,
    Linkwise,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Monolithic => vec![Method::Monolithic],
            MethodArg::Neighborhood => vec![Method::Neighborhood],
            MethodArg::Linkwise => vec![Method::Linkwise],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write an example network file
    Gen {
        #[arg(long, value_enum, default_value = "path")]
        topology: Topology,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Agent numerator coefficients, highest power first
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1")]
        num: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1,25")]
        den: Vec<f64>,
        #[arg(long, allow_hyphen_values = true, default_value_t = -2.0)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.15)]
        beta: f64,
        /// Output path; stdout if omitted
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Certify robust stability
    Check {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Write a JSON report here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Frequency-grid sweep of each condition's FDI
    Oracle {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Grid points between 1e-3 and 1e5 rad/s (file grid if omitted)
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Simulate one sampled realization of the link uncertainty
    Sim {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5.0)]
        horizon: f64,
        #[arg(long)]
        dt: Option<f64>,
        /// Link channel (1-based) receiving a unit-area pulse
        #[arg(long, default_value_t = 1)]
        channel: usize,
        /// Write the trajectory as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_ERROR
                }
            };
        }
    };
    match dispatch(cli.cmd, out, err) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Cmd, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    match cmd {
        Cmd::Gen { topology, n, num, den, alpha, beta, output } => {
            let file = gen_example(topology, n, &num, &den, alpha, beta).map_err(|e| e.to_string())?;
            let text = file.to_json() + "\n";
            match output {
                Some(p) => std::fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display()))?,
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string())?,
            }
            Ok(0)
        }
        Cmd::Check { input, method, report } => check(&input, method, report.as_deref(), out, err),
        Cmd::Oracle { input, method, points, eps } => oracle(&input, method, points, eps, out),
        Cmd::Sim { input, seed, horizon, dt, channel, csv } => sim(&input, seed, horizon, dt, channel, csv, out),
    }
}

fn load(input: &std::path::Path) -> Result<Network, String> {
    parse_network_file(input).map_err(|e| e.to_string())
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3e}")
    } else {
        "-".into()
    }
}

fn check(
    input: &std::path::Path,
    method: MethodArg,
    report_path: Option<&std::path::Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, String> {
    let net = load(input)?;
    let start = Instant::now();
    let report = certify_network(&net.graph, &net.agents, &net.multiplier, &method.methods(), &net.options)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let file = ReportFile::new(report, Some(input.display().to_string()), elapsed);

    if file.vacuous {
        let _ = writeln!(
            err,
            "warning: nominal loop fails (well-posed: {}, stable: {}, max Re λ = {:.3e}); certificates are vacuous",
            file.assumption1.well_posed, file.assumption1.nominal_stable, file.assumption1.max_real_eig
        );
    }
    let w = |e: std::io::Error| e.to_string();
    writeln!(
        out,
        "{:<14} {:<13} {:>10} {:>10} {:>10} {:>10} {:>10}  {:>8}",
        "condition", "status", "t*", "eps", "residual", "grid max", "at ω", "time [s]"
    )
    .map_err(w)?;
    for m in &file.methods {
        for c in &m.conditions {
            writeln!(
                out,
                "{:<14} {:<13} {:>10} {:>10} {:>10} {:>10} {:>10}  {:>8.3}",
                c.label.to_string(),
                format!("{:?}", c.status),
                fmt_num(c.t_opt),
                fmt_num(c.eps_achieved),
                fmt_num(c.lmi_residual),
                fmt_num(c.grid_max_eig),
                c.grid_argmax,
                c.seconds
            )
            .map_err(w)?;
            if let Some(note) = &c.note {
                writeln!(out, "    note: {note}").map_err(w)?;
            }
        }
        writeln!(out, "{}: {:?}", m.method, m.overall).map_err(w)?;
    }
    writeln!(out, "wall clock: {elapsed:.3} s").map_err(w)?;

    if let Some(p) = report_path {
        std::fs::write(p, file.to_json() + "\n").map_err(|e| format!("{}: {e}", p.display()))?;
    }

    let overall: Vec<Verdict> = file.methods.iter().map(|m| m.overall).collect();
    Ok(exit_code(&overall))
}

/// One method: its verdict. Several: certified if any certifies, since each
/// method alone is a sufficient condition.
pub fn exit_code(overall: &[Verdict]) -> i32 {
    if overall.contains(&Verdict::Certified) {
        EXIT_CERTIFIED
    } else if overall.contains(&Verdict::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_NOT_CERTIFIED
    }
}

fn oracle(
    input: &std::path::Path,
    method: MethodArg,
    points: Option<usize>,
    eps: f64,
    out: &mut dyn Write,
) -> Result<i32, String> {
    let net = load(input)?;
    let grid = match points {
        Some(p) => log_grid(1e-3, 1e5, p.max(1)),
        None => net.options.grid.clone(),
    };
    let w = |e: std::io::Error| e.to_string();
    writeln!(out, "{:<14} {:>12} {:>12}", "condition", "max eig", "at ω").map_err(w)?;
    let mut clean = true;
    for m in method.methods() {
        for label in m.labels(&net.graph) {
            let fdi = build_fdi(&net.graph, &net.agents, &net.multiplier, label).map_err(|e| e.to_string())?;
            let g = frequency_grid_check(&fdi, &grid, eps);
            clean &= g.max_eig < 0.0;
            writeln!(out, "{:<14} {:>12.4e} {:>12}", label.to_string(), g.max_eig, g.argmax.to_string()).map_err(w)?;
        }
    }
    Ok(if clean { 0 } else { EXIT_NOT_CERTIFIED })
}

fn sim(
    input: &std::path::Path,
    seed: u64,
    horizon: f64,
    dt: Option<f64>,
    channel: usize,
    csv: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, String> {
    let net = load(input)?;
    let links = sample_links_per_agent(&net.graph, &net.sectors, seed).map_err(|e| e.to_string())?;
    let cl = closed_loop_ss(&net.graph, &net.agents, &links).map_err(|e| e.to_string())?;
    if channel == 0 || channel > cl.nu() {
        return Err(format!("channel must be in 1..={}", cl.nu()));
    }
    let dt = dt.unwrap_or_else(|| default_dt(&cl));
    let dist = Disturbance::Pulse { channel: channel - 1, area: 1.0, width: 10.0 * dt };
    let res = simulate(&cl, &dist, horizon, dt).map_err(|e| e.to_string())?;
    let hurwitz = cl.is_hurwitz(HURWITZ_TOL);
    let w = |e: std::io::Error| e.to_string();
    writeln!(out, "seed: {seed}").map_err(w)?;
    writeln!(out, "closed-loop spectral abscissa: {:.4e} (Hurwitz: {hurwitz})", cl.spectral_abscissa()).map_err(w)?;
    writeln!(out, "steps: {}, dt: {dt:.3e}", res.t.len().saturating_sub(1)).map_err(w)?;
    writeln!(out, "bounded: {}", res.bounded).map_err(w)?;
    if let Some(r) = res.energy_ratio {
        writeln!(out, "output/disturbance energy ratio: {r:.4e}").map_err(w)?;
    }
    if let Some(p) = csv {
        let f = std::fs::File::create(&p).map_err(|e| format!("{}: {e}", p.display()))?;
        write_csv(&res, f).map_err(|e| e.to_string())?;
    }
    Ok(if res.bounded && hurwitz { 0 } else { EXIT_NOT_CERTIFIED })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn gen_then_check_monolithic() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("net.json");
        let r = dir.path().join("report.json");
        let f = f.to_str().unwrap();
        let (code, _, _) = run_str(&["netiqc", "gen", "--n", "4", "--alpha", "-2", "--output", f]);
        assert_eq!(code, 0);
        let (code, out, _) = run_str(&["netiqc", "check", "-i", f, "--method", "monolithic", "--report", r.to_str().unwrap()]);
        assert_eq!(code, EXIT_CERTIFIED, "{out}");
        assert!(out.contains("monolithic"));
        let rep = ReportFile::from_json(&std::fs::read_to_string(&r).unwrap()).unwrap();
        assert!(rep.overall_consistent());
    }

    #[test]
    fn bad_input_is_error() {
        let (code, _, err) = run_str(&["netiqc", "check", "-i", "/nonexistent.json"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(err.contains("cannot read"));
        let (code, _, _) = run_str(&["netiqc", "frobnicate"]);
        assert_eq!(code, EXIT_ERROR);
        let (code, _, err) = run_str(&["netiqc", "gen", "--topology", "ring", "--n", "2"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(err.contains("bad topology"));
    }

    #[test]
    fn exit_code_rules() {
        use Verdict::*;
        assert_eq!(exit_code(&[NotCertified, Certified]), 0);
        assert_eq!(exit_code(&[NotCertified, Inconclusive]), 2);
        assert_eq!(exit_code(&[NotCertified]), 1);
    }

    #[test]
    fn sim_runs() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("net.json");
        let c = dir.path().join("y.csv");
        let f = f.to_str().unwrap();
        run_str(&["netiqc", "gen", "--n", "3", "--output", f]);
        let (code, out, _) =
            run_str(&["netiqc", "sim", "-i", f, "--seed", "7", "--horizon", "0.5", "--dt", "1e-3", "--csv", c.to_str().unwrap()]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("bounded: true"));
        let text = std::fs::read_to_string(c).unwrap();
        assert!(text.starts_with("t,y_1,y_2,y_3"));
    }
}
