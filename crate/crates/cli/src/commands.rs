//! Command implementations behind the CLI subcommands. Each takes parsed
//! arguments, does the work through `rdalloc-core`, prints its report to
//! stdout, and returns the structured result for tests to inspect.

use std::path::{Path, PathBuf};

use rdalloc_core::{
    allocate_clipped, allocate_equal, allocate_proportional, build_rd_samples, compare_methods,
    default_models, fit_surface, generate_task_performances, grid_search_allocation, Allocation,
    ComparisonRow, FitOptions, FitReport, Method, SamplingPlan, StreamStats, SurfaceParams,
    WeightVector,
};

use crate::io::{self, Dataset};
use crate::CliError;

/// Stream statistics supplied on the command line for Methods 2 and 3.
#[derive(Debug, Clone, Default)]
pub struct StatsArgs {
    pub elements: Option<Vec<u64>>,
    pub variances: Option<Vec<f64>>,
}

impl StatsArgs {
    fn require(&self, n_streams: usize) -> Result<StreamStats, CliError> {
        let elements = self.elements.clone().ok_or_else(|| {
            CliError::Usage("--elements is required for the proportional methods".into())
        })?;
        let variances = self.variances.clone().ok_or_else(|| {
            CliError::Usage("--variances is required for the proportional methods".into())
        })?;
        if elements.len() != n_streams || variances.len() != n_streams {
            return Err(CliError::Usage(format!(
                "stream stats must have {n_streams} entries to match the surface"
            )));
        }
        Ok(StreamStats::new(elements, variances)?)
    }
}

pub struct FitArgs {
    pub input: PathBuf,
    pub params_out: PathBuf,
    /// Task weights for re-scalarizing raw performance data.
    pub weights: Option<Vec<f64>>,
    pub options: FitOptions,
}

/// Fits the surface to a sample file and writes the parameter file.
/// Raw-performance inputs are scalarized with the given weights (uniform by
/// default); pre-scalarized inputs reject `--weights` since their distortion
/// column is already a fixed combination.
pub fn run_fit(args: &FitArgs) -> Result<FitReport, CliError> {
    let dataset = io::read_dataset(&args.input)?;
    let samples = match &dataset {
        Dataset::Scalarized(samples) => {
            if args.weights.is_some() {
                return Err(CliError::Usage(
                    "--weights needs raw performance data (R_*,A_* columns); \
                     this file already carries D_t"
                        .into(),
                ));
            }
            samples.clone()
        }
        Dataset::Raw { table, .. } => {
            let m = table.first().map_or(0, |p| p.tasks.len());
            let weights = match &args.weights {
                Some(w) => WeightVector::new(w.clone())?,
                None => WeightVector::uniform(m)?,
            };
            build_rd_samples(table, &weights)?
        }
    };
    let report = fit_surface(&samples, &args.options)?;
    io::write_params(&args.params_out, &report, samples.len())?;

    let params = &report.params;
    println!(
        "fitted {} samples over {} streams",
        samples.len(),
        params.n_streams()
    );
    println!("gamma {}", params.gamma());
    for (j, a) in params.alphas().iter().enumerate() {
        println!("alpha_{} {}", j + 1, a);
    }
    for (j, b) in params.betas().iter().enumerate() {
        println!("beta_{} {}", j + 1, b);
    }
    match report.r_squared {
        Some(r2) => println!("R^2 {r2}"),
        None => println!("R^2 undefined (zero-variance data)"),
    }
    println!(
        "residuals: mean {}, max |.| {}",
        report.residual_mean, report.residual_max_abs
    );
    println!(
        "{} after {} iterations",
        if report.converged {
            "converged"
        } else {
            "NOT converged"
        },
        report.iterations
    );
    println!("wrote {}", args.params_out.display());

    if !report.converged {
        return Err(CliError::NotConverged);
    }
    Ok(report)
}

/// Method selector as it appears on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    Proposed,
    Equal,
    PropElements,
    PropVariance,
    Grid,
}

pub struct AllocateArgs {
    pub params: PathBuf,
    pub budget: f64,
    pub method: MethodArg,
    pub stats: StatsArgs,
    pub grid_step: f64,
}

/// Computes one allocation and prints it as a table plus a machine-readable
/// CSV row.
pub fn run_allocate(args: &AllocateArgs) -> Result<Allocation, CliError> {
    let params = io::read_params(&args.params)?;
    let allocation =
        allocate_with_method(&params, args.method, &args.stats, args.budget, args.grid_step)?;
    print_allocation_table(&allocation);
    println!();
    println!("{}", machine_header(params.n_streams()));
    println!("{}", machine_row(&allocation));
    Ok(allocation)
}

fn allocate_with_method(
    params: &SurfaceParams,
    method: MethodArg,
    stats: &StatsArgs,
    budget: f64,
    grid_step: f64,
) -> Result<Allocation, CliError> {
    let n = params.n_streams();
    Ok(match method {
        MethodArg::Proposed => allocate_clipped(params, budget)?,
        MethodArg::Equal => allocate_equal(n, budget)?.evaluated_on(params)?,
        MethodArg::PropElements => {
            let stats = stats.require(n)?;
            let mut a =
                allocate_proportional(&stats.element_shares(), budget)?.evaluated_on(params)?;
            a.method = Method::PropElements;
            a
        }
        MethodArg::PropVariance => {
            let stats = stats.require(n)?;
            let mut a =
                allocate_proportional(stats.variance_shares(), budget)?.evaluated_on(params)?;
            a.method = Method::PropVariance;
            a
        }
        MethodArg::Grid => grid_search_allocation(params, budget, grid_step)?,
    })
}

fn print_allocation_table(allocation: &Allocation) {
    println!(
        "method {}  budget {} kbits",
        allocation.method, allocation.budget
    );
    for (j, r) in allocation.rates.iter().enumerate() {
        println!("  R_{}  {:14.4} kbits", j + 1, r);
    }
    if let Some(d) = allocation.predicted_distortion {
        println!("  predicted distortion {d:.6}");
    }
    if let Some(l) = allocation.multiplier {
        println!("  multiplier {l:.6e}");
    }
}

fn machine_header(n_streams: usize) -> String {
    let mut s = String::from("method,budget");
    for j in 1..=n_streams {
        s.push_str(&format!(",R_{j}"));
    }
    s.push_str(",predicted_distortion,multiplier");
    s
}

fn machine_row(a: &Allocation) -> String {
    let mut s = format!("{},{}", a.method, a.budget);
    for r in &a.rates {
        s.push_str(&format!(",{r}"));
    }
    match a.predicted_distortion {
        Some(d) => s.push_str(&format!(",{d}")),
        None => s.push(','),
    }
    match a.multiplier {
        Some(l) => s.push_str(&format!(",{l}")),
        None => s.push(','),
    }
    s
}

pub struct SweepArgs {
    pub params: PathBuf,
    pub budgets: Vec<f64>,
    /// Methods to include; empty means the proposed method plus all three
    /// baselines.
    pub methods: Vec<MethodArg>,
    pub stats: StatsArgs,
    /// Lattice step when the grid method is included.
    pub grid_step: f64,
    /// Write the comparison table as CSV here as well.
    pub output: Option<PathBuf>,
    /// Prefix for surface/constraint-line plot data emission.
    pub emit_surface: Option<String>,
}

/// Compares methods across a list of budgets. Optionally emits surface and
/// constraint-line plot data for two-stream surfaces.
pub fn run_sweep(args: &SweepArgs) -> Result<Vec<(f64, Vec<ComparisonRow>)>, CliError> {
    if args.budgets.is_empty() {
        return Err(CliError::Usage("--budgets must not be empty".into()));
    }
    for &b in &args.budgets {
        if !(b.is_finite() && b > 0.0) {
            return Err(CliError::Usage(format!("budgets must be positive, got {b}")));
        }
    }
    let params = io::read_params(&args.params)?;
    let methods: &[MethodArg] = if args.methods.is_empty() {
        &[
            MethodArg::Proposed,
            MethodArg::Equal,
            MethodArg::PropElements,
            MethodArg::PropVariance,
        ]
    } else {
        &args.methods
    };

    let mut table = Vec::with_capacity(args.budgets.len());
    for &budget in &args.budgets {
        let mut rows = Vec::with_capacity(methods.len());
        for &method in methods {
            let allocation =
                allocate_with_method(&params, method, &args.stats, budget, args.grid_step)?;
            rows.push(ComparisonRow {
                method: allocation.method,
                allocation,
            });
        }
        table.push((budget, rows));
    }

    let mut csv = machine_header(params.n_streams());
    csv.push('\n');
    println!(
        "{:>10}  {:<14}  {:>14}  rates (kbits)",
        "budget", "method", "distortion"
    );
    for (budget, rows) in &table {
        for row in rows {
            let a = &row.allocation;
            let rates = a
                .rates
                .iter()
                .map(|r| format!("{r:.2}"))
                .collect::<Vec<_>>()
                .join(", ");
            println!(
                "{:>10}  {:<14}  {:>14.6}  ({rates})",
                budget,
                row.method.label(),
                a.predicted_distortion.unwrap_or(f64::NAN),
            );
            csv.push_str(&machine_row(a));
            csv.push('\n');
        }
    }

    if let Some(path) = &args.output {
        std::fs::write(path, &csv).map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        })?;
        println!("wrote {}", path.display());
    }
    if let Some(prefix) = &args.emit_surface {
        let max_budget = args.budgets.iter().cloned().fold(0.0f64, f64::max);
        let surface_path = PathBuf::from(format!("{prefix}.surface.csv"));
        io::write_surface_grid(&surface_path, &params, max_budget, 51)?;
        println!("wrote {}", surface_path.display());
        for &budget in &args.budgets {
            let line_path = PathBuf::from(format!("{prefix}.line{budget}.csv"));
            io::write_constraint_line(&line_path, &params, budget, 201)?;
            println!("wrote {}", line_path.display());
        }
    }
    Ok(table)
}

pub struct SimulateArgs {
    pub output: PathBuf,
    pub model: Option<PathBuf>,
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    pub noise: f64,
    pub grid_points: usize,
    pub rate_min: f64,
    pub rate_max: f64,
    /// Emit raw per-task performances instead of scalarized samples.
    pub raw: bool,
}

/// Generates a synthetic dataset and writes it in one of the two CSV
/// schemas. Deterministic for a fixed model, plan and seed.
pub fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let models = match &args.model {
        Some(path) => io::read_model_file(path)?,
        None => default_models(),
    };
    let n_streams = models[0].n_streams();
    let grid =
        SamplingPlan::uniform_grid(n_streams, args.grid_points, args.rate_min, args.rate_max)?;
    let plan = SamplingPlan::new(grid, args.noise, args.seed)?;
    let table = generate_task_performances(&models, &plan)?;

    if args.raw {
        if args.weights.is_some() {
            return Err(CliError::Usage(
                "--weights has no effect with --raw; scalarize at fit time instead".into(),
            ));
        }
        let baselines: Vec<f64> = models.iter().map(|m| m.baseline()).collect();
        io::write_raw_csv(&args.output, &baselines, &table)?;
    } else {
        let weights = match &args.weights {
            Some(w) => WeightVector::new(w.clone())?,
            None => WeightVector::uniform(models.len())?,
        };
        let samples = build_rd_samples(&table, &weights)?;
        io::write_samples_csv(&args.output, &samples)?;
    }
    println!(
        "wrote {} ({} grid points, seed {}, noise sigma {})",
        args.output.display(),
        table.len(),
        args.seed,
        args.noise
    );
    Ok(())
}

pub struct CompareArgs {
    pub params: PathBuf,
    pub budget: f64,
    pub stats: StatsArgs,
    /// Append the brute-force lattice row as an independent cross-check.
    pub with_grid: bool,
    pub grid_step: f64,
}

/// Compares every allocation method at a single budget.
pub fn run_compare(args: &CompareArgs) -> Result<Vec<ComparisonRow>, CliError> {
    let params = io::read_params(&args.params)?;
    let stats = args.stats.require(params.n_streams())?;
    let mut rows = compare_methods(&params, &stats, args.budget)?;
    if args.with_grid {
        let oracle = grid_search_allocation(&params, args.budget, args.grid_step)?;
        rows.push(ComparisonRow {
            method: Method::GridSearch,
            allocation: oracle,
        });
    }
    println!("{}", machine_header(params.n_streams()));
    for row in &rows {
        println!("{}", machine_row(&row.allocation));
    }
    Ok(rows)
}

/// Shared helper for tests: reads a params file.
pub fn load_params(path: &Path) -> Result<SurfaceParams, CliError> {
    io::read_params(path)
}
