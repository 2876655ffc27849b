//! Experiment configuration, dispatch and report writing for the `dfl` tool.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dfl_core::diophantine::{
    alpha_exponent, convergence_threshold, exception_volume_mc, phi_visibility_exponent, udt_certified_inf, PhiSpec,
    ThetaTuple,
};
use dfl_core::forest_gen::{
    generate, generic_plane, min_pairwise_distance, peres_forest, three_lattice_forest, union_closure_obstruction,
    CutProjectSpec, ForestSpec, PointCloud, Section,
};
use dfl_core::lattice_core::{Grid, Lattice, Window};
use dfl_core::torus_dynamics::{certify_unavoidable, check_propreduc_with_m, probe_points, propreduc_m, UnavoidOutcome};
use dfl_core::visibility::{empty_slab_certificate_with, verify_slab, visibility_curve_with};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub mod svg;

/// Exit status for failed assertions.
pub const EXIT_ASSERT: i32 = 1;
/// Exit status for an unknown subcommand (clap's usage error).
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_MALFORMED: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown command: {0}")]
    UnknownCommand(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownCommand(_) => EXIT_UNKNOWN,
            CliError::Malformed(_) | CliError::Io { .. } => EXIT_MALFORMED,
            CliError::Budget(_) => EXIT_BUDGET,
        }
    }
}

impl From<dfl_core::Error> for CliError {
    fn from(e: dfl_core::Error) -> Self {
        if e.is_budget() {
            CliError::Budget(e.to_string())
        } else {
            CliError::Malformed(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Where a forest spec comes from: a builtin name or a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
}

pub const BUILTINS: &[&str] = &["peres", "three-lattice", "z2", "golden", "golden-strip", "axis-visit"];

pub fn builtin_spec(name: &str) -> Option<ForestSpec> {
    Some(match name {
        "peres" => peres_forest(),
        "three-lattice" => three_lattice_forest(),
        "z2" => ForestSpec::UnionOfGrids { grids: vec![Grid::unshifted(Lattice::identity(2))] },
        "golden" => ForestSpec::CutProject(CutProjectSpec::golden_2_3()),
        "golden-strip" => ForestSpec::CutProject(CutProjectSpec::golden_strip()),
        "axis-visit" => ForestSpec::ToralVisit { section: Section::axis_circles(), plane: generic_plane(), base: [0.0; 3] },
        _ => return None,
    })
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, body: &str) -> CliResult<()> {
    std::fs::write(path, body).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

impl SpecSource {
    pub fn load(&self) -> CliResult<ForestSpec> {
        match (&self.builtin, &self.spec) {
            (Some(name), None) => builtin_spec(name)
                .ok_or_else(|| CliError::Malformed(format!("unknown builtin '{name}', expected one of {BUILTINS:?}"))),
            (None, Some(path)) => {
                let text = read_file(path)?;
                // a bare cut-and-project spec is accepted as well
                serde_json::from_str::<ForestSpec>(&text)
                    .or_else(|e| serde_json::from_str::<CutProjectSpec>(&text).map(ForestSpec::CutProject).map_err(|_| e))
                    .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
            }
            _ => Err(CliError::Malformed("give exactly one of --builtin or --spec".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Gen {
        #[serde(flatten)]
        source: SpecSource,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        svg: Option<PathBuf>,
    },
    Visibility {
        #[serde(flatten)]
        source: SpecSource,
        epsilons: Vec<f64>,
        radius: f64,
        budget: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        svg: Option<PathBuf>,
    },
    Slab {
        #[serde(flatten)]
        source: SpecSource,
        radius: f64,
        norm_bound: f64,
    },
    Equidist {
        d: usize,
        epsilon: f64,
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<u64>,
    },
    Unavoidable {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        section: Option<PathBuf>,
    },
    Udt {
        theta: Vec<Vec<f64>>,
        t: Vec<u64>,
        mesh: f64,
        expect_positive: bool,
    },
    UdtExponents {
        n: i64,
        s: i64,
    },
    UdtMc {
        u: Vec<Vec<i64>>,
        t: Vec<u64>,
        phi: String,
        n_box: f64,
        samples: usize,
    },
    Tbg {
        angles: Vec<f64>,
        shifts: Vec<[f64; 2]>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        svg: Option<PathBuf>,
    },
    Report {
        inputs: Vec<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub command: Command,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Record wall-clock time; off by default so reports are byte-stable.
    #[serde(default)]
    pub timing: bool,
}

fn check_eps(e: f64) -> CliResult<()> {
    if e > 0.0 && e < 0.5 {
        Ok(())
    } else {
        Err(CliError::Malformed(format!("epsilon {e} must lie in (0, 1/2)")))
    }
}

fn check_radius(r: f64) -> CliResult<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(CliError::Malformed(format!("radius {r} must be positive")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        let exists = |p: &PathBuf| {
            if p.exists() {
                Ok(())
            } else {
                Err(CliError::Malformed(format!("{} does not exist", p.display())))
            }
        };
        match &self.command {
            Command::Gen { source, radius, .. } | Command::Slab { source, radius, .. } => {
                check_radius(*radius)?;
                source.spec.iter().try_for_each(exists)?;
            }
            Command::Visibility { source, epsilons, radius, .. } => {
                check_radius(*radius)?;
                source.spec.iter().try_for_each(exists)?;
                epsilons.iter().try_for_each(|&e| check_eps(e))?;
            }
            Command::Equidist { epsilon, d, .. } => {
                check_eps(*epsilon)?;
                if !(1..=3).contains(d) {
                    return Err(CliError::Malformed("d must be 1, 2 or 3".into()));
                }
            }
            Command::Unavoidable { section } => section.iter().try_for_each(exists)?,
            Command::Tbg { radius, .. } => check_radius(*radius)?,
            Command::Report { inputs } => inputs.iter().try_for_each(exists)?,
            Command::Udt { .. } | Command::UdtExponents { .. } | Command::UdtMc { .. } => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.command {
            Command::Gen { .. } => "gen",
            Command::Visibility { .. } => "visibility",
            Command::Slab { .. } => "slab",
            Command::Equidist { .. } => "equidist",
            Command::Unavoidable { .. } => "unavoidable",
            Command::Udt { .. } => "udt",
            Command::UdtExponents { .. } => "udt-exponents",
            Command::UdtMc { .. } => "udt-mc",
            Command::Tbg { .. } => "tbg",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub results: Value,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

struct Checks(Vec<Assertion>);

impl Checks {
    fn add(&mut self, name: impl Into<String>, passed: bool) {
        self.0.push(Assertion { name: name.into(), passed });
    }
}

/// Run one experiment and write its artifacts. The report itself is
/// returned; writing it is left to the caller.
pub fn run(config: &ExperimentConfig) -> CliResult<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let mut checks = Checks(Vec::new());
    let results = match &config.command {
        Command::Gen { source, radius, out, svg } => {
            let spec = source.load()?;
            run_gen(&spec, *radius, out.as_deref(), svg.as_deref(), &mut checks)?
        }
        Command::Visibility { source, epsilons, radius, budget, svg } => {
            let spec = source.load()?;
            let w = Window::centered(2, *radius);
            let rep = visibility_curve_with(&spec, epsilons, &w, *budget)?;
            checks.add("monotone in epsilon", rep.monotone);
            checks.add(
                "lengths within window diameter",
                rep.records.iter().all(|r| r.max_empty_length <= w.diameter() * (1.0 + 1e-12)),
            );
            if let Some(path) = svg {
                write_file(path, &svg::curve_svg(&rep))?;
            }
            serde_json::to_value(&rep).expect("report serializes")
        }
        Command::Slab { source, radius, norm_bound } => {
            let spec = match source.load()? {
                ForestSpec::CutProject(c) => c,
                _ => return Err(CliError::Malformed("slab needs a cut-and-project spec".into())),
            };
            let w = Window::centered(spec.n, *radius);
            let cert = empty_slab_certificate_with(&spec, &w, *norm_bound, config.seed)?;
            let cloud = generate(&ForestSpec::CutProject(spec), &w)?;
            let ok = verify_slab(&cert, &cloud)?;
            checks.add("slab verified on window", ok);
            json!({
                "q": cert.q,
                "gap": [cert.gap.0, cert.gap.1],
                "epsilon": cert.epsilon,
                "points_checked": cloud.len(),
                "certificate": cert,
            })
        }
        Command::Equidist { d, epsilon, samples, m } => {
            let m = m.unwrap_or_else(|| propreduc_m(*d, *epsilon));
            let xs = probe_points(*d, *samples, config.seed);
            let bad = check_propreduc_with_m(*d, *epsilon, m, &xs)?;
            checks.add("no inclusion violations", bad.is_empty());
            json!({ "d": d, "epsilon": epsilon, "M": m, "samples": xs.len(), "violations": bad })
        }
        Command::Unavoidable { section } => {
            let section = match section {
                Some(p) => serde_json::from_str::<Section>(&read_file(p)?)
                    .map_err(|e| CliError::Malformed(format!("{}: {e}", p.display())))?,
                None => Section::axis_circles(),
            };
            let out = certify_unavoidable(&section)?;
            match &out {
                UnavoidOutcome::Certified(c) => {
                    checks.add("tail bound rechecks", c.tail_ok());
                    checks.add("section certified", true);
                }
                UnavoidOutcome::Counterexample { .. } => checks.add("section certified", false),
            }
            serde_json::to_value(&out).expect("outcome serializes")
        }
        Command::Udt { theta, t, mesh, expect_positive } => {
            let th = ThetaTuple::new(theta.clone())?;
            let mut rows = Vec::new();
            for &tt in t {
                let r = udt_certified_inf(&th, tt, *mesh)?;
                checks.add(format!("T={tt}: certified <= raw minimum"), r.certified <= r.raw_min + 1e-15);
                if *expect_positive {
                    checks.add(format!("T={tt}: certified margin positive"), r.certified > 0.0);
                }
                rows.push(r);
            }
            json!({ "theta": theta, "reports": rows })
        }
        Command::UdtExponents { n, s } => {
            let d = n - 1;
            let tau = convergence_threshold(*s, d)?;
            let exp = phi_visibility_exponent(d, tau)?;
            let alpha = alpha_exponent(*n, *s)?;
            let lhs = exp;
            let rhs = alpha + num_rational::Rational64::from_integer(d);
            checks.add("visibility exponent = (n-1) + alpha", lhs == rhs);
            json!({ "n": n, "s": s, "tau": tau.to_string(), "exponent": exp.to_string(), "alpha": alpha.to_string() })
        }
        Command::UdtMc { u, t, phi, n_box, samples } => {
            let phi: PhiSpec = phi.parse().map_err(|e: dfl_core::Error| CliError::Malformed(e.to_string()))?;
            let mut rows = Vec::new();
            for &tt in t {
                let r = exception_volume_mc(u, tt, &phi, *n_box, *samples, config.seed)?;
                checks.add(format!("T={tt}: estimate finite"), r.estimate.is_finite());
                rows.push(r);
            }
            let ratios: Vec<f64> = rows.iter().map(|r| r.bound_ratio).filter(|x| *x > 0.0).collect();
            let spread = if ratios.is_empty() {
                Value::Null
            } else {
                let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
                let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
                json!(hi / lo)
            };
            json!({ "phi": phi.to_string(), "reports": rows, "bound_ratio_spread": spread })
        }
        Command::Tbg { angles, shifts, radius, out, svg } => {
            let spec = ForestSpec::Tbg { angles: angles.clone(), shifts: shifts.clone() };
            let mut v = run_gen(&spec, *radius, out.as_deref(), svg.as_deref(), &mut checks)?;
            let grids = spec.grids().unwrap_or_default();
            let mut pairs = Vec::new();
            for i in 0..grids.len() {
                for j in i + 1..grids.len() {
                    let r = union_closure_obstruction(&grids[i].lattice, &grids[j].lattice)?;
                    pairs.push(json!({ "pair": [i, j], "closure": r }));
                }
            }
            v["pairs"] = Value::Array(pairs);
            v
        }
        Command::Report { inputs } => {
            let mut rows = Vec::new();
            for p in inputs {
                let rep: RunReport = serde_json::from_str(&read_file(p)?)
                    .map_err(|e| CliError::Malformed(format!("{}: {e}", p.display())))?;
                checks.add(format!("{}: {}", p.display(), rep.config.name()), rep.passed);
                rows.push(json!({
                    "input": p,
                    "command": rep.config.name(),
                    "passed": rep.passed,
                    "failed": rep.assertions.iter().filter(|a| !a.passed).map(|a| a.name.clone()).collect::<Vec<_>>(),
                }));
            }
            json!({ "runs": rows })
        }
    };
    let passed = checks.0.iter().all(|a| a.passed);
    Ok(RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        results,
        assertions: checks.0,
        passed,
        wall_clock_s: config.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

fn run_gen(spec: &ForestSpec, radius: f64, out: Option<&Path>, svg: Option<&Path>, checks: &mut Checks) -> CliResult<Value> {
    let w = Window::centered(spec.dim(), radius);
    let cloud = generate(spec, &w)?;
    checks.add("points inside window", cloud.iter().all(|p| w.contains(p)));
    let min_dist = if cloud.len() >= 2 { Some(min_pairwise_distance(&cloud)?) } else { None };
    if let Some(d) = min_dist {
        checks.add("distinct points", d > 0.0);
    }
    if let Some(path) = out {
        write_file(path, &cloud.to_csv())?;
    }
    if let Some(path) = svg {
        write_file(path, &svg::scatter_svg(&cloud, &w)?)?;
    }
    Ok(json!({ "dim": cloud.dim, "count": cloud.len(), "min_distance": min_dist }))
}

/// Write a scatter plot of a planar cloud, fitted to `w`.
pub fn emit_scatter_svg(p: &PointCloud, w: &Window, path: &Path) -> CliResult<()> {
    write_file(path, &svg::scatter_svg(p, w)?)
}

/// Parse `a,b;c,d` into rows. Entries may be numbers or `phi`, `sqrtN`,
/// optionally negated.
pub fn parse_rows(s: &str) -> CliResult<Vec<Vec<f64>>> {
    s.split(';').map(|row| row.split(',').map(parse_real).collect()).collect()
}

pub fn parse_int_rows(s: &str) -> CliResult<Vec<Vec<i64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| x.trim().parse::<i64>().map_err(|e| CliError::Malformed(format!("'{x}': {e}"))))
                .collect()
        })
        .collect()
}

pub fn parse_real(x: &str) -> CliResult<f64> {
    let x = x.trim();
    if let Some(rest) = x.strip_prefix('-') {
        return parse_real(rest).map(|v| -v);
    }
    if x == "phi" {
        return Ok(dfl_core::forest_gen::golden_ratio());
    }
    if let Some(n) = x.strip_prefix("sqrt") {
        return parse_real(n).map(f64::sqrt);
    }
    x.parse::<f64>().map_err(|e| CliError::Malformed(format!("'{x}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig {
            command: Command::Visibility {
                source: SpecSource { builtin: Some("peres".into()), spec: None },
                epsilons: vec![0.4, 0.2],
                radius: 10.0,
                budget: 1000,
                svg: None,
            },
            seed: 0,
            threads: None,
            report: None,
            timing: false,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn reals_parse() {
        assert_eq!(parse_rows("0;phi").unwrap(), vec![vec![0.0], vec![dfl_core::forest_gen::golden_ratio()]]);
        assert!((parse_real("-sqrt2").unwrap() + 2f64.sqrt()).abs() < 1e-15);
        assert!(parse_real("x").is_err());
    }

    #[test]
    fn exponent_row() {
        let cfg = ExperimentConfig {
            command: Command::UdtExponents { n: 2, s: 3 },
            seed: 0,
            threads: None,
            report: None,
            timing: false,
        };
        let rep = run(&cfg).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.results["alpha"], "1");
    }

    #[test]
    fn bad_epsilon_is_malformed() {
        let cfg = ExperimentConfig {
            command: Command::Equidist { d: 1, epsilon: 0.7, samples: 10, m: None },
            seed: 0,
            threads: None,
            report: None,
            timing: false,
        };
        assert_eq!(run(&cfg).unwrap_err().exit_code(), EXIT_MALFORMED);
    }
}
