//! Command-line front end for `polyharm`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod expr;
pub mod pipeline;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{Format, Resolved, RunConfig};
use report::{Outcome, Report};

/// Bad invocation or configuration; exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser, Debug)]
#[command(name = "polyharm", version, about = "Harmonic functions on groups of polynomial growth")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Growth function, doubling constants and Pansu ratios.
    Growth(Flags),
    /// Pansu ratios and a fitted growth degree.
    Pansu(Flags),
    /// Relative volume comparison thresholds.
    Rvc(Flags),
    /// Dirichlet problem on a ball.
    Dirichlet(Flags),
    /// Poincaré constants over the field battery.
    Poincare(Flags),
    /// Mean-value constants over the field battery.
    Meanvalue(Flags),
    /// Harnack ratio of a positive harmonic function.
    Harnack(Flags),
    /// Gram-matrix estimate of the space of harmonic functions of degree d.
    Dim(Flags),
    /// Exact dimension of harmonic polynomials of degree d on Z^D.
    Oracle(Flags),
    /// Exhaustive rough-isometry check.
    RoughCheck(Flags),
    /// Extension operator on the injectivized target.
    RoughExtend(Flags),
    /// Mean-value stability of extended harmonic functions.
    RoughMvl(Flags),
    /// All stages in sequence.
    All(Flags),
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// TOML configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub generators: Option<String>,
    #[arg(long)]
    pub nmax: Option<u32>,
    #[arg(long)]
    pub radius: Option<u32>,
    #[arg(long)]
    pub inner: Option<u32>,
    /// Polynomial degree.
    #[arg(long = "d")]
    pub d: Option<u32>,
    /// Homogeneous dimension.
    #[arg(long = "D")]
    pub big_d: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<u32>>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub solver_tol: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<u32>>,
    /// Formula in x1, x2, .. (or x, y, z), or a CSV of `coords..,value`.
    #[arg(long, allow_hyphen_values = true)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Source window radius of the subdivided lattice.
    #[arg(long)]
    pub window: Option<u32>,
    /// Radius of the extension region in the product group.
    #[arg(long)]
    pub region: Option<u32>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Edge list `u,v` of a custom source graph.
    #[arg(long)]
    pub graph_csv: Option<PathBuf>,
    /// Rows `x,coords..` giving the image of each source vertex.
    #[arg(long)]
    pub map_csv: Option<PathBuf>,
    /// Include the mean-value suite in `all`.
    #[arg(long)]
    pub mvl: bool,
}

impl Flags {
    pub fn into_config(self) -> Result<RunConfig, UsageError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_toml_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$($field).+ = v.into(); })*
            };
        }
        set!(group => group, generators => generators, radius => radius, d => d,
             rel_tol => rel_tol, seed => seed, scales => scales, theta => theta,
             a => rough.a, b => rough.b, region => rough.region);
        c.nmax = self.nmax.or(c.nmax);
        c.inner = self.inner.or(c.inner);
        c.big_d = self.big_d.or(c.big_d);
        c.schedule = self.schedule.or(c.schedule);
        c.solver_tol = self.solver_tol.or(c.solver_tol);
        c.boundary = self.boundary.or(c.boundary);
        c.cache_dir = self.cache_dir.or(c.cache_dir);
        c.out = self.out.or(c.out);
        c.format = self.format.or(c.format);
        c.jobs = self.jobs.or(c.jobs);
        c.rough.window = self.window.or(c.rough.window);
        c.rough.graph_csv = self.graph_csv.or(c.rough.graph_csv);
        c.rough.map_csv = self.map_csv.or(c.rough.map_csv);
        c.rough.mvl |= self.mvl;
        Ok(c)
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Growth(_) => "growth",
            Command::Pansu(_) => "pansu",
            Command::Rvc(_) => "rvc",
            Command::Dirichlet(_) => "dirichlet",
            Command::Poincare(_) => "poincare",
            Command::Meanvalue(_) => "meanvalue",
            Command::Harnack(_) => "harnack",
            Command::Dim(_) => "dim",
            Command::Oracle(_) => "oracle",
            Command::RoughCheck(_) => "rough-check",
            Command::RoughExtend(_) => "rough-extend",
            Command::RoughMvl(_) => "rough-mvl",
            Command::All(_) => "all",
        }
    }

    fn flags(self) -> Flags {
        match self {
            Command::Growth(f)
            | Command::Pansu(f)
            | Command::Rvc(f)
            | Command::Dirichlet(f)
            | Command::Poincare(f)
            | Command::Meanvalue(f)
            | Command::Harnack(f)
            | Command::Dim(f)
            | Command::Oracle(f)
            | Command::RoughCheck(f)
            | Command::RoughExtend(f)
            | Command::RoughMvl(f)
            | Command::All(f) => f,
        }
    }
}

/// Runs one command on a resolved configuration.
pub fn execute(name: &str, res: &Resolved) -> anyhow::Result<(Outcome, BTreeMap<String, f64>)> {
    let t = Instant::now();
    let outcome = match name {
        "growth" => commands::growth(res)?,
        "pansu" => commands::pansu(res)?,
        "rvc" => commands::rvc(res)?,
        "dirichlet" => commands::dirichlet(res)?,
        "poincare" => commands::poincare(res)?,
        "meanvalue" => commands::meanvalue(res)?,
        "harnack" => commands::harnack(res)?,
        "dim" => commands::dim(res)?,
        "oracle" => commands::oracle(res)?,
        "rough-check" => commands::rough_check(res)?,
        "rough-extend" => commands::rough_extend(res)?,
        "rough-mvl" => commands::rough_mvl(res)?,
        "all" => {
            let mut run = pipeline::pipeline_all(res);
            run.timings.insert("total".into(), t.elapsed().as_secs_f64());
            return Ok((run.outcome, run.timings));
        }
        other => anyhow::bail!(UsageError(format!("unknown command {other}"))),
    };
    Ok((outcome, BTreeMap::from([("total".into(), t.elapsed().as_secs_f64())])))
}

/// Parses `argv`, runs the command, writes reports; returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let name = cli.command.name();
    let resolved = match cli.command.flags().into_config().and_then(RunConfig::resolve) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    if let Some(jobs) = resolved.config.jobs {
        // Fails only if the global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let (outcome, timings) = match execute(name, &resolved) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            return if e.downcast_ref::<UsageError>().is_some() { 2 } else { 1 };
        }
    };
    let report = Report::new(name, &resolved.config, &outcome, timings);
    if let Some(dir) = &resolved.config.out {
        if let Err(e) = report.write(dir, outcome.csv.as_deref()) {
            let _ = writeln!(stderr, "error: writing reports to {}: {e}", dir.display());
            return 1;
        }
    }
    let printed = match (resolved.config.format, &outcome.csv, &outcome.text) {
        (Some(Format::Json), _, _) | (Some(Format::Csv), None, _) | (None, None, None) => report.to_json() + "\n",
        (_, Some(csv), _) => csv.clone(),
        (None, None, Some(text)) => format!("{text}\n"),
    };
    let _ = stdout.write_all(printed.as_bytes());
    if outcome.passed {
        0
    } else {
        let _ = writeln!(stderr, "{name}: check failed");
        1
    }
}
