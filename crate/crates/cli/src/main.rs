use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rdalloc_cli::commands::{
    self, AllocateArgs, CompareArgs, FitArgs, MethodArg, SimulateArgs, StatsArgs, SweepArgs,
};
use rdalloc_core::FitOptions;

/// Fit rate-distortion surfaces to measured samples and split a bit budget
/// among deep-feature streams.
#[derive(Parser)]
#[command(name = "rdalloc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodFlag {
    /// Closed-form optimum with nonnegativity clipping.
    Proposed,
    /// Equal split (Method 1).
    Equal,
    /// Proportional to tensor element counts (Method 2).
    PropElements,
    /// Proportional to tensor element variances (Method 3).
    PropVariance,
    /// Brute-force lattice search (verification oracle).
    Grid,
}

impl From<MethodFlag> for MethodArg {
    fn from(value: MethodFlag) -> Self {
        match value {
            MethodFlag::Proposed => MethodArg::Proposed,
            MethodFlag::Equal => MethodArg::Equal,
            MethodFlag::PropElements => MethodArg::PropElements,
            MethodFlag::PropVariance => MethodArg::PropVariance,
            MethodFlag::Grid => MethodArg::Grid,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the surface model to a samples file and write a params file.
    Fit {
        /// Samples CSV (scalarized `R_*,D_t` or raw `R_*,A_*` schema).
        #[arg(long)]
        input: PathBuf,
        /// Output parameter file.
        #[arg(long)]
        params: PathBuf,
        /// Task weights for scalarizing raw performance data, e.g. 8,1,1.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Iteration cap for the solver.
        #[arg(long, default_value_t = 500)]
        max_iterations: usize,
    },
    /// Compute one allocation from a fitted params file.
    Allocate {
        /// Fitted parameter file from `fit`.
        #[arg(long)]
        params: PathBuf,
        /// Total rate budget in kbits.
        #[arg(long)]
        budget: f64,
        #[arg(long, value_enum, default_value_t = MethodFlag::Proposed)]
        method: MethodFlag,
        /// Tensor element counts per stream (Method 2), e.g. 49152,8192.
        #[arg(long, value_delimiter = ',')]
        elements: Option<Vec<u64>>,
        /// Tensor element variances per stream (Method 3).
        #[arg(long, value_delimiter = ',')]
        variances: Option<Vec<f64>>,
        /// Lattice step for the grid method, kbits.
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
    },
    /// Compare methods across several budgets.
    Sweep {
        #[arg(long)]
        params: PathBuf,
        /// Budgets in kbits, e.g. 1000,1500,2000.
        #[arg(long, value_delimiter = ',')]
        budgets: Vec<f64>,
        /// Subset of methods to sweep; defaults to proposed plus the three
        /// baselines.
        #[arg(long, value_enum, value_delimiter = ',')]
        methods: Vec<MethodFlag>,
        #[arg(long, value_delimiter = ',')]
        elements: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        variances: Option<Vec<f64>>,
        /// Lattice step when the grid method is swept.
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
        /// Also write the comparison table as CSV.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Emit plot data: `<prefix>.surface.csv` plus one
        /// `<prefix>.line<budget>.csv` per budget (two-stream surfaces).
        #[arg(long)]
        emit_surface: Option<String>,
    },
    /// Generate a synthetic dataset.
    Simulate {
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
        /// Synthetic model file; omit for the built-in three-task,
        /// two-stream model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Task weights for the emitted total distortion.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Relative noise sigma on measured performances.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Grid points per rate axis.
        #[arg(long, default_value_t = 10)]
        grid_points: usize,
        #[arg(long, default_value_t = 50.0)]
        rate_min: f64,
        #[arg(long, default_value_t = 3000.0)]
        rate_max: f64,
        /// Emit raw per-task performances instead of scalarized samples.
        #[arg(long)]
        raw: bool,
    },
    /// Compare every method at a single budget.
    Compare {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        budget: f64,
        #[arg(long, value_delimiter = ',')]
        elements: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        variances: Option<Vec<f64>>,
        /// Append the brute-force lattice row as a cross-check.
        #[arg(long)]
        with_grid: bool,
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit {
            input,
            params,
            weights,
            max_iterations,
        } => commands::run_fit(&FitArgs {
            input,
            params_out: params,
            weights,
            options: FitOptions {
                max_iterations,
                ..FitOptions::default()
            },
        })
        .map(|_| ()),
        Command::Allocate {
            params,
            budget,
            method,
            elements,
            variances,
            grid_step,
        } => commands::run_allocate(&AllocateArgs {
            params,
            budget,
            method: method.into(),
            stats: StatsArgs {
                elements,
                variances,
            },
            grid_step,
        })
        .map(|_| ()),
        Command::Sweep {
            params,
            budgets,
            methods,
            elements,
            variances,
            grid_step,
            output,
            emit_surface,
        } => commands::run_sweep(&SweepArgs {
            params,
            budgets,
            methods: methods.into_iter().map(Into::into).collect(),
            stats: StatsArgs {
                elements,
                variances,
            },
            grid_step,
            output,
            emit_surface,
        })
        .map(|_| ()),
        Command::Simulate {
            output,
            model,
            weights,
            seed,
            noise,
            grid_points,
            rate_min,
            rate_max,
            raw,
        } => commands::run_simulate(&SimulateArgs {
            output,
            model,
            weights,
            seed,
            noise,
            grid_points,
            rate_min,
            rate_max,
            raw,
        }),
        Command::Compare {
            params,
            budget,
            elements,
            variances,
            with_grid,
            grid_step,
        } => commands::run_compare(&CompareArgs {
            params,
            budget,
            stats: StatsArgs {
                elements,
                variances,
            },
            with_grid,
            grid_step,
        })
        .map(|_| ()),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
