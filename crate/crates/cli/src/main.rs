use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfl_cli::{
    parse_int_rows, parse_real, parse_rows, run, CliError, Command, ExperimentConfig, SpecSource, EXIT_ASSERT,
};
use dfl_core::visibility::{DEFAULT_WORK_BUDGET, SLAB_NORM_BOUND};

#[derive(Parser, Debug)]
#[command(name = "dfl", version, about = "Dense forest constructions, visibility estimates and certificates")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; the DFL_THREADS environment variable takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON run report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Source {
    /// Builtin spec: peres, three-lattice, z2, golden, golden-strip, axis-visit.
    #[arg(long, conflicts_with = "spec")]
    builtin: Option<String>,
    /// Forest spec JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
}

impl From<Source> for SpecSource {
    fn from(s: Source) -> Self {
        SpecSource { builtin: s.builtin, spec: s.spec }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a point cloud in a centered window.
    Gen {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        radius: f64,
        /// CSV output, one point per line.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scatter plot output.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Longest empty segments over a decreasing epsilon list.
    Visibility {
        #[command(flatten)]
        source: Source,
        /// Comma-separated, decreasing.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long)]
        radius: f64,
        /// Row-run budget per epsilon for unions of grids.
        #[arg(long, default_value_t = DEFAULT_WORK_BUDGET)]
        budget: u64,
        /// Log-log curve output.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Empty slab certificate for a cut-and-project spec, checked on the window.
    Slab {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = SLAB_NORM_BOUND)]
        norm_bound: f64,
    },
    /// Check the orbit inclusion on grid and random probe points.
    Equidist {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Orbit length; defaults to the value the inclusion needs.
        #[arg(long)]
        m: Option<u64>,
    },
    /// Certify a piecewise linear section of the 3-torus as unavoidable.
    Unavoidable {
        /// Section JSON; defaults to the three axis circles.
        #[arg(long)]
        section: Option<PathBuf>,
    },
    /// Certified uniformly Diophantine margins.
    Udt {
        /// Tuple rows separated by ';', coordinates by ','. Accepts phi and sqrtN.
        #[arg(long)]
        theta: String,
        #[arg(long, value_delimiter = ',')]
        t: Vec<u64>,
        #[arg(long, default_value_t = 1e-4)]
        mesh: f64,
        /// Fail unless every certified margin is positive.
        #[arg(long)]
        expect_positive: bool,
    },
    /// Exponent calculus row for (n, s).
    UdtExponents {
        #[arg(long)]
        n: i64,
        #[arg(long)]
        s: i64,
    },
    /// Monte Carlo exception volume for an integer matrix U.
    UdtMc {
        /// Rows of U separated by ';', entries by ','.
        #[arg(long)]
        u: String,
        #[arg(long, value_delimiter = ',')]
        t: Vec<u64>,
        /// Phi as c*T^-tau or c*T^-tau*log(T)^beta.
        #[arg(long, default_value = "T^-2")]
        phi: String,
        #[arg(long, default_value_t = 1.0)]
        n_box: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Union of rotated triangular lattices.
    Tbg {
        /// Rotation angles in radians.
        #[arg(long, value_delimiter = ',')]
        angles: Vec<String>,
        /// Shifts as x,y pairs separated by ';'.
        #[arg(long)]
        shifts: String,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Summarize earlier run reports.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn build(cli: Cli) -> Result<ExperimentConfig, CliError> {
    let command = match cli.cmd {
        Cmd::Gen { source, radius, out, svg } => Command::Gen { source: source.into(), radius, out, svg },
        Cmd::Visibility { source, eps, radius, budget, svg } => {
            Command::Visibility { source: source.into(), epsilons: eps, radius, budget, svg }
        }
        Cmd::Slab { source, radius, norm_bound } => Command::Slab { source: source.into(), radius, norm_bound },
        Cmd::Equidist { d, eps, samples, m } => Command::Equidist { d, epsilon: eps, samples, m },
        Cmd::Unavoidable { section } => Command::Unavoidable { section },
        Cmd::Udt { theta, t, mesh, expect_positive } => {
            Command::Udt { theta: parse_rows(&theta)?, t, mesh, expect_positive }
        }
        Cmd::UdtExponents { n, s } => Command::UdtExponents { n, s },
        Cmd::UdtMc { u, t, phi, n_box, samples } => Command::UdtMc { u: parse_int_rows(&u)?, t, phi, n_box, samples },
        Cmd::Tbg { angles, shifts, radius, out, svg } => {
            let angles = angles.iter().map(|a| parse_real(a)).collect::<Result<Vec<_>, _>>()?;
            let shifts = parse_rows(&shifts)?
                .into_iter()
                .map(|r| match r.as_slice() {
                    [x, y] => Ok([*x, *y]),
                    _ => Err(CliError::Malformed("shifts need two coordinates each".into())),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Command::Tbg { angles, shifts, radius, out, svg }
        }
        Cmd::Report { inputs } => Command::Report { inputs },
    };
    Ok(ExperimentConfig { command, seed: cli.seed, threads: cli.threads, report: cli.report, timing: cli.timing })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let threads = std::env::var("DFL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).or(config.threads);
    if let Some(n) = threads {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    eprintln!("seed: {}", config.seed);
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let body = report.to_json();
    match &config.report {
        Some(path) => {
            if let Err(source) = std::fs::write(path, &body) {
                let e = CliError::Io { path: path.clone(), source };
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        }
        None => print!("{body}"),
    }
    for a in &report.assertions {
        eprintln!("{} {}", if a.passed { "PASS" } else { "FAIL" }, a.name);
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ASSERT as u8)
    }
}
