//! Command-line front end: `solve`, `converge`, `ddm`, `example` and `check`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::assembly::MaterialParams;
use crate::case::{CaseId, ManufacturedCase};
use crate::error::{Error, Result};
use crate::harness::{
    check_invariants, convergence_study_with, history_to_csv, iterations_to_csv, rows_to_csv, run_example, ExampleParams,
    SolveMode, VARIABLES,
};
use crate::mesh::Rect;
use crate::solve::{DdmOptions, RobinParams};

/// Environment variable overriding the output directory of the config file.
pub const OUTPUT_ENV: &str = "SDG_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "sdg", version, about = "Coupled Stokes-Darcy solver with Robin-Robin domain decomposition")]
pub struct Cli {
    /// JSON configuration file; flags take precedence over its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (beats SDG_OUTPUT_DIR and the config file).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monolithic solve on the finest listed mesh.
    Solve(Opts),
    /// Monolithic convergence sweep.
    Converge(Opts),
    /// Robin-Robin sweep: errors plus iteration counts.
    Ddm(Opts),
    /// One of the shipped examples with table, iteration series and field samples.
    Example(Opts),
    /// Invariant suite on one mesh.
    Check(Opts),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Opts {
    /// Example number 1..=4.
    #[arg(long, alias = "id")]
    pub case: Option<u32>,
    /// Polynomial degree 1..=3.
    #[arg(long)]
    pub k: Option<usize>,
    /// Viscosity.
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Mesh levels (cells per unit length), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Permeability.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// Slip coefficient.
    #[arg(long, allow_negative_numbers = true)]
    pub slip: Option<f64>,
    /// Penalty constant.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Porous Robin parameter.
    #[arg(long, allow_negative_numbers = true)]
    pub dp: Option<f64>,
    /// Fluid Robin parameter.
    #[arg(long, allow_negative_numbers = true)]
    pub df: Option<f64>,
    /// Stopping tolerance of the Robin-Robin iteration.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Iteration cap of the Robin-Robin iteration.
    #[arg(long)]
    pub max_iter: Option<usize>,
}

/// Fully resolved run settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub case: u32,
    pub k: usize,
    pub mu: f64,
    pub ns: Vec<usize>,
    pub kappa: Option<f64>,
    pub slip: Option<f64>,
    pub gamma: f64,
    pub dp: f64,
    pub df: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub stokes: Option<Rect>,
    pub darcy: Option<Rect>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: 1,
            k: 1,
            mu: 1.0,
            ns: vec![2, 4, 8, 16, 32],
            kappa: None,
            slip: None,
            gamma: 1.0,
            dp: 1.0,
            df: 0.25,
            tol: 1e-6,
            max_iter: 100_000,
            stokes: None,
            darcy: None,
            output: PathBuf::from("output"),
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| cfg_err(format!("`{key}` must be a number")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| cfg_err(format!("`{key}` must be a non-negative integer")))
}

fn as_rect(key: &str, v: &Value) -> Result<Rect> {
    let a = v.as_array().ok_or_else(|| cfg_err(format!("`{key}` must be [xmin, xmax, ymin, ymax]")))?;
    if a.len() != 4 {
        return Err(cfg_err(format!("`{key}` must have four entries")));
    }
    let c: Vec<f64> = a.iter().map(|x| as_f64(key, x)).collect::<Result<_>>()?;
    Rect::new(c[0], c[1], c[2], c[3]).map_err(|e| cfg_err(format!("`{key}`: {e}")))
}

impl RunConfig {
    /// Apply the entries of a JSON object.
    pub fn apply_json(&mut self, text: &str) -> Result<()> {
        let v: Value = serde_json::from_str(text).map_err(|e| cfg_err(format!("malformed config: {e}")))?;
        let obj = v.as_object().ok_or_else(|| cfg_err("config must be a JSON object"))?;
        for (key, val) in obj {
            match key.as_str() {
                "case" | "id" => self.case = as_usize(key, val)? as u32,
                "k" => self.k = as_usize(key, val)?,
                "mu" => self.mu = as_f64(key, val)?,
                "n" => {
                    self.ns = match val {
                        Value::Array(a) => a.iter().map(|x| as_usize(key, x)).collect::<Result<_>>()?,
                        _ => vec![as_usize(key, val)?],
                    }
                }
                "kappa" => self.kappa = Some(as_f64(key, val)?),
                "slip" | "G" => self.slip = Some(as_f64(key, val)?),
                "gamma" => self.gamma = as_f64(key, val)?,
                "dp" => self.dp = as_f64(key, val)?,
                "df" => self.df = as_f64(key, val)?,
                "tol" => self.tol = as_f64(key, val)?,
                "max_iter" => self.max_iter = as_usize(key, val)?,
                "stokes" => self.stokes = Some(as_rect(key, val)?),
                "darcy" => self.darcy = Some(as_rect(key, val)?),
                "output" => {
                    self.output = PathBuf::from(val.as_str().ok_or_else(|| cfg_err("`output` must be a string"))?)
                }
                other => return Err(cfg_err(format!("unknown config key `{other}`"))),
            }
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, o: &Opts) {
        if let Some(v) = o.case {
            self.case = v;
        }
        if let Some(v) = o.k {
            self.k = v;
        }
        if let Some(v) = o.mu {
            self.mu = v;
        }
        if let Some(v) = &o.n {
            self.ns = v.clone();
        }
        if o.kappa.is_some() {
            self.kappa = o.kappa;
        }
        if o.slip.is_some() {
            self.slip = o.slip;
        }
        if let Some(v) = o.gamma {
            self.gamma = v;
        }
        if let Some(v) = o.dp {
            self.dp = v;
        }
        if let Some(v) = o.df {
            self.df = v;
        }
        if let Some(v) = o.tol {
            self.tol = v;
        }
        if let Some(v) = o.max_iter {
            self.max_iter = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.k) {
            return Err(cfg_err(format!("k must be 1, 2 or 3, got {}", self.k)));
        }
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(cfg_err("n must list positive mesh levels"));
        }
        if self.ns.len() > 1 && self.ns.iter().any(|n| !n.is_power_of_two()) {
            return Err(cfg_err("mesh levels of a study must be powers of two"));
        }
        if self.ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(cfg_err("mesh levels must be strictly increasing"));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(cfg_err("tol must be positive and max_iter nonzero"));
        }
        RobinParams::new(self.dp, self.df)?;
        self.material()?;
        Ok(())
    }

    pub fn case(&self) -> Result<ManufacturedCase> {
        let mut c = ManufacturedCase::new(CaseId::from_number(self.case, self.mu)?);
        c.mu = self.mu;
        if let Some(k) = self.kappa {
            c.kappa = k;
        }
        if let Some(g) = self.slip {
            c.slip = g;
        }
        if let Some(r) = self.stokes {
            c.stokes = r;
        }
        if let Some(r) = self.darcy {
            c.darcy = r;
        }
        Ok(c)
    }

    pub fn material(&self) -> Result<MaterialParams> {
        let c = self.case()?;
        MaterialParams::new(c.mu, c.kappa, c.slip, self.gamma)
    }

    pub fn ddm_options(&self) -> Result<DdmOptions> {
        Ok(DdmOptions { params: RobinParams::new(self.dp, self.df)?, tol: self.tol, max_iter: self.max_iter })
    }
}

/// Resolve the configuration: defaults, then the config file, then the
/// environment output override, then flags.
pub fn resolve(cli: &Cli, env_output: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if matches!(cli.command, Command::Solve(_)) {
        cfg.ns = vec![8];
    }
    if matches!(cli.command, Command::Check(_)) {
        cfg.ns = vec![2];
    }
    if let Some(p) = &cli.config {
        let text = std::fs::read_to_string(p).map_err(|e| cfg_err(format!("cannot read {}: {e}", p.display())))?;
        cfg.apply_json(&text)?;
    }
    if let Some(o) = env_output {
        cfg.output = o;
    }
    if let Some(o) = &cli.output {
        cfg.output = o.clone();
    }
    let opts = match &cli.command {
        Command::Solve(o) | Command::Converge(o) | Command::Ddm(o) | Command::Example(o) | Command::Check(o) => o,
    };
    cfg.apply_flags(opts);
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), body)?;
    Ok(())
}

fn print_rows(rows: &[crate::harness::ConvergenceRow]) {
    for r in rows {
        let mut line = format!("n={:>3}", r.n);
        if let Some(e) = r.errors {
            for (name, v) in VARIABLES.iter().zip(e.as_array()) {
                let _ = write!(line, "  {name}={v:.3e}");
            }
        }
        if let Some(o) = r.orders {
            let _ = write!(line, "  orders=({:.2}, {:.2}, {:.2}, {:.2})", o[0], o[1], o[2], o[3]);
        }
        if let Some(i) = r.iterations {
            let _ = write!(line, "  iterations={i}");
        }
        if let Some(f) = &r.failure {
            let _ = write!(line, "  FAILED: {f}");
        }
        println!("{line}");
    }
}

fn first_failure(rows: &[crate::harness::ConvergenceRow]) -> Result<()> {
    match rows.iter().find_map(|r| r.failure.clone()) {
        Some(f) => Err(Error::Solver(f)),
        None => Ok(()),
    }
}

/// Execute a parsed command.
pub fn execute(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let case = cfg.case()?;
    let params = cfg.material()?;
    let out = &cfg.output;
    match &cli.command {
        Command::Solve(_) => {
            let n = *cfg.ns.last().unwrap();
            let rows = convergence_study_with(case, params, cfg.k, &[n], SolveMode::Monolithic)?;
            print_rows(&rows);
            first_failure(&rows)?;
            write(out, "errors.csv", &rows_to_csv(&rows))?;
        }
        Command::Converge(_) => {
            let rows = convergence_study_with(case, params, cfg.k, &cfg.ns, SolveMode::Monolithic)?;
            print_rows(&rows);
            write(out, "errors.csv", &rows_to_csv(&rows))?;
            first_failure(&rows)?;
        }
        Command::Ddm(_) => {
            let rows = convergence_study_with(case, params, cfg.k, &cfg.ns, SolveMode::Ddm(cfg.ddm_options()?))?;
            print_rows(&rows);
            write(out, "errors.csv", &rows_to_csv(&rows))?;
            write(out, "iterations.csv", &iterations_to_csv(&rows))?;
            for r in &rows {
                if !r.history.is_empty() {
                    write(out, &format!("history_n{}.csv", r.n), &history_to_csv(&r.history))?;
                }
            }
            first_failure(&rows)?;
        }
        Command::Example(_) => {
            if cfg.stokes.is_some() || cfg.darcy.is_some() || cfg.kappa.is_some() || cfg.slip.is_some() {
                return Err(cfg_err("examples use their own geometry and coefficients"));
            }
            let p = ExampleParams {
                k: cfg.k,
                mu: cfg.mu,
                ns: cfg.ns.clone(),
                ddm: Some(cfg.ddm_options()?),
                sample_density: 20,
            };
            let bundle = run_example(cfg.case, &p)?;
            print_rows(&bundle.rows);
            if let Some(i) = bundle.iterations {
                println!("Robin-Robin iterations on n={}: {i}", cfg.ns.last().unwrap());
            }
            println!("interface continuity residual: {:.3e}", bundle.continuity);
            bundle.write_to(out)?;
        }
        Command::Check(_) => {
            let results = check_invariants(case, cfg.ns[0], cfg.k)?;
            let mut csv = String::from("name,value,tolerance,pass\n");
            for r in &results {
                println!("{} {:<20} {:.3e} (tolerance {:.1e})", if r.pass { "PASS" } else { "FAIL" }, r.name, r.value, r.tolerance);
                let _ = writeln!(csv, "{},{:.6e},{:.1e},{}", r.name, r.value, r.tolerance, r.pass);
            }
            write(out, "check.csv", &csv)?;
            if let Some(r) = results.iter().find(|r| !r.pass) {
                return Err(Error::Solver(format!("invariant `{}` failed", r.name)));
            }
        }
    }
    Ok(())
}

/// Exit status of an error: 2 for bad input, 1 for failures while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::Unsupported(_) | Error::Construction(_) => 2,
        _ => 1,
    }
}

/// Parse arguments, run, and return the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let env_output = std::env::var_os(OUTPUT_ENV).map(PathBuf::from);
    let result = resolve(&cli, env_output).and_then(|cfg| execute(&cli, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
