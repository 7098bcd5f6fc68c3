use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use c11fit::erm::{self, RegressionProblem, SolveOptions};
use c11fit::gamma::gamma1;
use c11fit::sim::{self, MPolicy, SimConfig};
use c11fit::wells::{self, CellComplex};
use c11fit::{io, Error, OneField, Result};

#[derive(Parser)]
#[command(name = "c11fit", version, about = "C^{1,1} regression and extension of scattered data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a 1-field to CSV data (x1..xd, y) and write the solve report as JSON.
    Fit(FitArgs),
    /// Smallest seminorm over gradients for fixed values from CSV data.
    Seminorm(SeminormArgs),
    /// Build the cell complex of a fitted field.
    Extend(ExtendArgs),
    /// Evaluate a cell complex at query points (CSV x1..xd).
    Eval(EvalArgs),
    /// Run the disk experiments and write records and surfaces.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct FitArgs {
    input: PathBuf,
    /// Seminorm bound; defaults to the sample-size schedule.
    #[arg(long)]
    m: Option<f64>,
    /// Objective tolerance.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    max_iters: Option<u64>,
    /// JSON-lines trace of the cutting-plane iterations.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SeminormArgs {
    input: PathBuf,
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtendArgs {
    /// A field, or a fit report containing one.
    field: PathBuf,
    /// Defaults to the field's own seminorm.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    complex: PathBuf,
    queries: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// SimConfig JSON (one object or a list); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed seminorm bound instead of the schedule.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Grid points per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    max_iters: Option<u64>,
    /// Consecutive seeds per configuration.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Run the size sweep (n = 8, 23, 38, 84, 180) instead of a single n.
    #[arg(long, conflicts_with = "noise_sweep")]
    size_sweep: bool,
    /// Run the noise sweep (sigma = 2^-5..2^-1) at the given n.
    #[arg(long)]
    noise_sweep: bool,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory for records.csv and the surface CSVs.
    #[arg(long, default_value = "sim_out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Seminorm(a) => seminorm(a),
        Command::Extend(a) => extend(a),
        Command::Eval(a) => eval(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn fit(a: FitArgs) -> Result<()> {
    let (base, y) = io::read_problem(&a.input)?;
    let m = a.m.unwrap_or_else(|| erm::schedule_m(base.len(), base.dim()));
    let problem = match a.gamma {
        Some(tol) => RegressionProblem::with_tolerance(base, y, m, tol)?,
        None => RegressionProblem::new(base, y, m)?,
    };
    let mut opts = SolveOptions { max_iters: a.max_iters, ..SolveOptions::default() };
    if let Some(path) = &a.trace {
        opts.trace = Some(Box::new(std::io::BufWriter::new(File::create(path)?)));
    }
    let report = erm::solve_with(&problem, opts)?;
    io::write_json(output(a.out.as_deref())?, &report)
}

fn seminorm(a: SeminormArgs) -> Result<()> {
    let (base, y) = io::read_problem(&a.input)?;
    let mut opts = erm::SeminormOptions::default();
    if let Some(cap) = a.max_iters {
        opts.max_iters = cap;
    }
    let (value, field) = erm::minimize_seminorm_with(&base, &y, opts)?;
    io::write_json(output(a.out.as_deref())?, &serde_json::json!({ "gamma1": value, "field": field }))
}

/// Accepts a bare field or any object with a `field` member.
fn load_field(path: &Path) -> Result<OneField> {
    let value: serde_json::Value = io::read_json(path)?;
    let inner = match value.get("field") {
        Some(f) => f.clone(),
        None => value,
    };
    Ok(serde_json::from_value(inner)?)
}

fn extend(a: ExtendArgs) -> Result<()> {
    let field = load_field(&a.field)?;
    let m = match a.m {
        Some(m) => m,
        None => {
            let (g, _) = gamma1(&field);
            if g == 0.0 {
                return Err(Error::InvalidInput("the field is affine; pass --m".into()));
            }
            g
        }
    };
    let complex = wells::build_complex(&field, m)?;
    io::write_json(output(a.out.as_deref())?, &complex)
}

fn eval(a: EvalArgs) -> Result<()> {
    let complex: CellComplex = io::read_json(&a.complex)?;
    let queries = io::read_points(&a.queries, complex.dim())?;
    let results = queries.iter().map(|x| complex.eval(x)).collect::<Result<Vec<_>>>()?;
    io::write_evaluations(output(a.out.as_deref())?, &queries, &results)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut base: Vec<SimConfig> = match &a.config {
        Some(path) => {
            let value: serde_json::Value = io::read_json(path)?;
            if value.is_array() {
                serde_json::from_value(value)?
            } else {
                vec![serde_json::from_value(value)?]
            }
        }
        None if a.size_sweep => sim::size_sweep(&sim::SWEEP_SIZES, 1),
        None if a.noise_sweep => sim::noise_sweep(a.n.unwrap_or(84), 1),
        None => vec![SimConfig::default()],
    };
    for cfg in &mut base {
        if let Some(n) = a.n.filter(|_| !a.size_sweep) {
            cfg.n = n;
        }
        if let Some(s) = a.sigma.filter(|_| !a.noise_sweep) {
            cfg.sigma = s;
        }
        if let Some(seed) = a.seed {
            cfg.seed = seed;
        }
        if let Some(m) = a.m {
            cfg.m_policy = MPolicy::Fixed(m);
        }
        if a.gamma.is_some() {
            cfg.gamma_tol = a.gamma;
        }
        if let Some(g) = a.grid {
            cfg.grid_per_axis = g;
        }
        if a.max_iters.is_some() {
            cfg.max_iters = a.max_iters;
        }
    }
    std::fs::create_dir_all(&a.out)?;
    let mut configs = Vec::new();
    for cfg in base {
        for i in 0..a.runs {
            let mut c = SimConfig { seed: cfg.seed + i, ..cfg.clone() };
            c.validate()?;
            let name = format!("surface_n{}_sigma{}_seed{}.csv", c.n, c.sigma, c.seed);
            c.surface_path.get_or_insert_with(|| a.out.join(name));
            configs.push(c);
        }
    }
    if let Some(g) = configs.first().map(|c| c.grid_per_axis) {
        sim::write_surface(&a.out.join("surface_target.csv"), g, |x| Ok(sim::target(x)))?;
    }
    let records = sim::run_sweep(&configs, a.workers, &a.out.join("records.csv"))?;
    sim::write_records(&records, std::io::stdout().lock())
}
