use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vcselect::io::{digest_bytes, parse_dataset, write_dataset_file};
use vcselect::simulation::{gen_dataset, run_monte_carlo, Method, SimConfig};
use vcselect::{run_fit, CriterionMode, Error, FitOptions, GridOptions, ReadOptions};

const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "vcselect", version, about = "Zero and constant coefficient selection in varying-coefficient models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a dataset with header t,y,x1,...,xp and write a JSON export.
    Fit(FitArgs),
    /// Run the Monte Carlo study and write report.json and report.txt.
    Simulate(SimArgs),
    /// Write one synthetic dataset from the simulation design.
    Generate(GenArgs),
}

#[derive(clap::Args)]
struct FitArgs {
    data: PathBuf,
    /// Number of B-spline basis functions.
    #[arg(long = "K", default_value_t = 10)]
    k: usize,
    /// Spline order (4 = cubic).
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Criterion for the adaptive fit.
    #[arg(long, default_value = "ebic")]
    criterion: CriterionMode,
    /// Criterion for the initial group-Lasso fit.
    #[arg(long, default_value = "bic")]
    initial_criterion: CriterionMode,
    /// Points per tuning grid.
    #[arg(long, default_value_t = 15)]
    grid_size: usize,
    /// Smallest grid value as a fraction of the largest.
    #[arg(long, default_value_t = 1e-3)]
    grid_ratio: f64,
    /// Map the observed t range onto [0, 1].
    #[arg(long)]
    rescale_t: bool,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Fit once at --lambda1/--lambda2 instead of searching a grid.
    #[arg(long)]
    no_tune: bool,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    p: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated list, e.g. glasso-BIC,aglasso-BIC-EBIC,oracle.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, default_value_t = 0.1)]
    noise_var: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long = "K", default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 15)]
    grid_size: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replication index within the seed.
    #[arg(long, default_value_t = 0)]
    rep: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_var: f64,
    #[arg(long)]
    out: PathBuf,
}

fn fit(args: FitArgs) -> Result<ExitCode, Error> {
    let bytes = std::fs::read(&args.data)?;
    let data = parse_dataset(bytes.as_slice(), ReadOptions { rescale_t: args.rescale_t })?;
    let opts = FitOptions {
        n_basis: args.k,
        order: args.order,
        initial_criterion: args.initial_criterion,
        criterion: args.criterion,
        grid: GridOptions {
            points: args.grid_size,
            ratio: args.grid_ratio,
        },
        lambda0: args.lambda0,
        lambda1: args.lambda1,
        lambda2: args.lambda2,
        no_tune: args.no_tune,
        ..FitOptions::default()
    };
    let export = run_fit(&data, &digest_bytes(&bytes), &opts)?;
    let json = export.to_json()?;
    match &args.out {
        Some(path) => std::fs::write(path, json)?,
        None => print!("{json}"),
    }
    if export.diagnostics.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "warning: solver did not reach the KKT tolerance (residual {:.3e})",
            export.diagnostics.kkt_residual
        );
        Ok(ExitCode::from(EXIT_NOT_CONVERGED))
    }
}

fn workers() -> Result<Option<usize>, Error> {
    match std::env::var("VCSELECT_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .map(Some)
            .ok_or_else(|| Error::InvalidConfig(format!("VCSELECT_WORKERS must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn simulate(args: SimArgs) -> Result<ExitCode, Error> {
    let config = SimConfig {
        n: args.n,
        p: args.p,
        rho: args.rho,
        noise_var: args.noise_var,
        reps: args.reps,
        seed: args.seed,
        methods: args.methods.unwrap_or_else(|| Method::ALL.to_vec()),
        n_basis: args.k,
        grid_points: args.grid_size,
        ..SimConfig::default()
    };
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers()? {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let report = pool.install(|| run_monte_carlo(&config))?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("report.json"), report.to_json()?)?;
    let tables = report.render_tables();
    std::fs::write(args.out.join("report.txt"), &tables)?;
    print!("{tables}");
    Ok(ExitCode::SUCCESS)
}

fn generate(args: GenArgs) -> Result<ExitCode, Error> {
    let config = SimConfig {
        n: args.n,
        p: args.p,
        seed: args.seed,
        noise_var: args.noise_var,
        ..SimConfig::default()
    };
    let (data, _) = gen_dataset(&config, args.rep)?;
    write_dataset_file(&args.out, &data)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
    }
}
