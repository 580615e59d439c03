//! File formats: sample datasets (CSV), fitted parameter files, synthetic
//! model files, and plot-ready surface emissions.
//!
//! Two dataset schemas are supported, distinguished by the header:
//!
//! ```text
//! R_1,...,R_N,D_t                 scalarized rate-distortion samples
//! ```
//!
//! ```text
//! # baselines: A1,...,AM          uncompressed per-task performances
//! R_1,...,R_N,A_1,...,A_M         raw measured performances per rate tuple
//! ```
//!
//! The raw form supports re-scalarization: feeding the same file to `fit`
//! with different task weights re-derives the total distortion without
//! touching the measurements. Rates are kbits per tensor; distortions are
//! dimensionless. All floats are written in Rust's shortest round-trip
//! representation, so write-read is lossless and byte-deterministic.
//!
//! Parameter files are flat `key value` text: `n_streams`, `gamma`,
//! `alpha_1..N`, `beta_1..N`, plus provenance (`samples`, `r_squared`,
//! residual stats, `iterations`, `converged`, `timestamp_unix`). Unknown
//! keys are ignored on read. Set `SOURCE_DATE_EPOCH` to pin the timestamp
//! for byte-reproducible outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rdalloc_core::{
    FitReport, PerfPoint, RateVector, RdSample, SurfaceParams, SyntheticTaskModel,
    TaskPerformance,
};

use crate::CliError;

/// A parsed input dataset in either schema.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    /// Pre-scalarized `(rates, D_t)` samples.
    Scalarized(Vec<RdSample>),
    /// Raw per-task performances with their uncompressed baselines.
    Raw {
        baselines: Vec<f64>,
        table: Vec<PerfPoint>,
    },
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        match self {
            Dataset::Scalarized(s) => s.len(),
            Dataset::Raw { table, .. } => table.len(),
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::File {
        path: path.display().to_string(),
        source,
    })
}

fn parse_float(path: &Path, line: usize, column: usize, field: &str) -> Result<f64, CliError> {
    field.trim().parse::<f64>().map_err(|_| {
        parse_err(
            path,
            line,
            format!("column {}: invalid number {:?}", column + 1, field.trim()),
        )
    })
}

/// Reads a dataset file, detecting the schema from its header.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate().peekable();

    // optional baselines entry ahead of the header
    let mut baselines: Option<Vec<f64>> = None;
    if let Some((lineno, line)) = lines.peek().copied() {
        if let Some(rest) = line.strip_prefix("# baselines:") {
            let values = rest
                .split(',')
                .enumerate()
                .map(|(col, field)| parse_float(path, lineno + 1, col, field))
                .collect::<Result<Vec<f64>, _>>()?;
            if values.is_empty() {
                return Err(parse_err(path, lineno + 1, "baselines entry is empty"));
            }
            baselines = Some(values);
            lines.next();
        }
    }

    let Some((header_lineno, header)) = lines.next() else {
        return Err(parse_err(path, 1, "empty file, expected a CSV header"));
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let n_rates = columns
        .iter()
        .take_while(|c| c.starts_with("R_"))
        .count();
    if n_rates == 0 {
        return Err(parse_err(
            path,
            header_lineno + 1,
            format!("header must start with R_1,...,R_N, got {header:?}"),
        ));
    }
    for (j, c) in columns[..n_rates].iter().enumerate() {
        let expected = format!("R_{}", j + 1);
        if **c != expected {
            return Err(parse_err(
                path,
                header_lineno + 1,
                format!("column {}: expected {expected:?}, got {c:?}", j + 1),
            ));
        }
    }
    let rest = &columns[n_rates..];

    if rest == ["D_t"] {
        if baselines.is_some() {
            return Err(parse_err(
                path,
                header_lineno + 1,
                "baselines entry is only valid with raw performance columns",
            ));
        }
        let mut samples = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n_rates + 1 {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("expected {} fields, got {}", n_rates + 1, fields.len()),
                ));
            }
            let mut rates = Vec::with_capacity(n_rates);
            for (col, field) in fields[..n_rates].iter().enumerate() {
                rates.push(parse_float(path, lineno + 1, col, field)?);
            }
            let d = parse_float(path, lineno + 1, n_rates, fields[n_rates])?;
            let rates = RateVector::new(rates)
                .map_err(|e| parse_err(path, lineno + 1, e.to_string()))?;
            samples
                .push(RdSample::new(rates, d).map_err(|e| parse_err(path, lineno + 1, e.to_string()))?);
        }
        if samples.is_empty() {
            return Err(parse_err(path, header_lineno + 2, "no data rows"));
        }
        return Ok(Dataset::Scalarized(samples));
    }

    // raw schema: A_1..A_M columns and a mandatory baselines entry
    let n_tasks = rest.len();
    for (i, c) in rest.iter().enumerate() {
        let expected = format!("A_{}", i + 1);
        if **c != expected {
            return Err(parse_err(
                path,
                header_lineno + 1,
                format!(
                    "column {}: expected {expected:?} or \"D_t\", got {c:?}",
                    n_rates + i + 1
                ),
            ));
        }
    }
    if n_tasks == 0 {
        return Err(parse_err(
            path,
            header_lineno + 1,
            "header needs a D_t column or A_1,...,A_M columns",
        ));
    }
    let Some(baselines) = baselines else {
        return Err(parse_err(
            path,
            header_lineno + 1,
            "raw performance data needs a leading \"# baselines: ...\" entry",
        ));
    };
    if baselines.len() != n_tasks {
        return Err(parse_err(
            path,
            1,
            format!(
                "baselines entry has {} values but the header has {} tasks",
                baselines.len(),
                n_tasks
            ),
        ));
    }

    let mut table = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_rates + n_tasks {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("expected {} fields, got {}", n_rates + n_tasks, fields.len()),
            ));
        }
        let mut rates = Vec::with_capacity(n_rates);
        for (col, field) in fields[..n_rates].iter().enumerate() {
            rates.push(parse_float(path, lineno + 1, col, field)?);
        }
        let rates =
            RateVector::new(rates).map_err(|e| parse_err(path, lineno + 1, e.to_string()))?;
        let mut tasks = Vec::with_capacity(n_tasks);
        for i in 0..n_tasks {
            let measured = parse_float(path, lineno + 1, n_rates + i, fields[n_rates + i])?;
            tasks.push(
                TaskPerformance::new(i + 1, baselines[i], measured)
                    .map_err(|e| parse_err(path, lineno + 1, e.to_string()))?,
            );
        }
        table.push(PerfPoint { rates, tasks });
    }
    if table.is_empty() {
        return Err(parse_err(path, header_lineno + 2, "no data rows"));
    }
    Ok(Dataset::Raw { baselines, table })
}

/// Writes scalarized samples in the `R_1,...,R_N,D_t` schema.
pub fn write_samples_csv(path: &Path, samples: &[RdSample]) -> Result<(), CliError> {
    let n = samples.first().map_or(0, |s| s.rates().len());
    let mut out = String::new();
    for j in 1..=n {
        let _ = write!(out, "R_{j},");
    }
    out.push_str("D_t\n");
    for s in samples {
        for r in s.rates().as_slice() {
            let _ = write!(out, "{r},");
        }
        let _ = writeln!(out, "{}", s.total_distortion());
    }
    write_file(path, &out)
}

/// Writes raw per-task performances with their baselines entry.
pub fn write_raw_csv(
    path: &Path,
    baselines: &[f64],
    table: &[PerfPoint],
) -> Result<(), CliError> {
    let n = table.first().map_or(0, |p| p.rates.len());
    let mut out = String::from("# baselines: ");
    for (i, b) in baselines.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{b}");
    }
    out.push('\n');
    for j in 1..=n {
        let _ = write!(out, "R_{j},");
    }
    for i in 1..=baselines.len() {
        let _ = write!(out, "A_{i}");
        out.push(if i == baselines.len() { '\n' } else { ',' });
    }
    for point in table {
        for r in point.rates.as_slice() {
            let _ = write!(out, "{r},");
        }
        for (i, t) in point.tasks.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", t.measured());
        }
        out.push('\n');
    }
    write_file(path, &out)
}

fn timestamp_unix() -> u64 {
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(v) = epoch.trim().parse() {
            return v;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes fitted surface parameters plus fit provenance as flat key-value
/// text, one `key value` pair per line.
pub fn write_params(path: &Path, report: &FitReport, n_samples: usize) -> Result<(), CliError> {
    let params = &report.params;
    let mut out = String::from("# fitted rate-distortion surface parameters\n");
    let _ = writeln!(out, "n_streams {}", params.n_streams());
    let _ = writeln!(out, "gamma {}", params.gamma());
    for (j, a) in params.alphas().iter().enumerate() {
        let _ = writeln!(out, "alpha_{} {}", j + 1, a);
    }
    for (j, b) in params.betas().iter().enumerate() {
        let _ = writeln!(out, "beta_{} {}", j + 1, b);
    }
    let _ = writeln!(out, "samples {n_samples}");
    match report.r_squared {
        Some(r2) => {
            let _ = writeln!(out, "r_squared {r2}");
        }
        None => {
            let _ = writeln!(out, "r_squared undefined");
        }
    }
    let _ = writeln!(out, "residual_mean {}", report.residual_mean);
    let _ = writeln!(out, "residual_max_abs {}", report.residual_max_abs);
    let _ = writeln!(out, "iterations {}", report.iterations);
    let _ = writeln!(out, "converged {}", report.converged);
    let _ = writeln!(out, "timestamp_unix {}", timestamp_unix());
    write_file(path, &out)
}

/// Reads surface parameters back from a key-value parameter file.
/// Provenance keys are ignored; unknown keys are tolerated.
pub fn read_params(path: &Path) -> Result<SurfaceParams, CliError> {
    let text = read_to_string(path)?;
    let mut n_streams: Option<usize> = None;
    let mut gamma: Option<f64> = None;
    let mut alphas: Vec<(usize, f64)> = Vec::new();
    let mut betas: Vec<(usize, f64)> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once(char::is_whitespace) else {
            return Err(parse_err(path, lineno + 1, format!("expected \"key value\", got {line:?}")));
        };
        let value = value.trim();
        let bad_value =
            |what: &str| parse_err(path, lineno + 1, format!("invalid {what} {value:?}"));
        match key {
            "n_streams" => {
                n_streams = Some(value.parse().map_err(|_| bad_value("stream count"))?);
            }
            "gamma" => {
                gamma = Some(value.parse().map_err(|_| bad_value("number"))?);
            }
            _ => {
                if let Some(idx) = key.strip_prefix("alpha_") {
                    let idx: usize = idx.parse().map_err(|_| bad_value("alpha index"))?;
                    alphas.push((idx, value.parse().map_err(|_| bad_value("number"))?));
                } else if let Some(idx) = key.strip_prefix("beta_") {
                    let idx: usize = idx.parse().map_err(|_| bad_value("beta index"))?;
                    betas.push((idx, value.parse().map_err(|_| bad_value("number"))?));
                }
                // provenance and unknown keys: ignored
            }
        }
    }

    let Some(n) = n_streams else {
        return Err(parse_err(path, 1, "missing n_streams"));
    };
    let Some(gamma) = gamma else {
        return Err(parse_err(path, 1, "missing gamma"));
    };
    let collect = |mut pairs: Vec<(usize, f64)>, name: &str| -> Result<Vec<f64>, CliError> {
        pairs.sort_by_key(|(idx, _)| *idx);
        let indices: Vec<usize> = pairs.iter().map(|(idx, _)| *idx).collect();
        if indices != (1..=n).collect::<Vec<_>>() {
            return Err(parse_err(
                path,
                1,
                format!("expected {name}_1..{name}_{n}, found indices {indices:?}"),
            ));
        }
        Ok(pairs.into_iter().map(|(_, v)| v).collect())
    };
    let alphas = collect(alphas, "alpha")?;
    let betas = collect(betas, "beta")?;
    SurfaceParams::new(gamma, alphas, betas).map_err(CliError::from)
}

/// Reads synthetic task models from flat key-value text:
///
/// ```text
/// streams 2
/// tasks 3
/// baseline_1 90
/// offset_1 0.008
/// coeff_1 0.1,0.25
/// decay_1 0.0007,0.02
/// ...
/// ```
pub fn read_model_file(path: &Path) -> Result<Vec<SyntheticTaskModel>, CliError> {
    let text = read_to_string(path)?;
    let mut streams: Option<usize> = None;
    let mut tasks: Option<usize> = None;
    let mut baselines: Vec<(usize, f64)> = Vec::new();
    let mut offsets: Vec<(usize, f64)> = Vec::new();
    let mut coeffs: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut decays: Vec<(usize, Vec<f64>)> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once(char::is_whitespace) else {
            return Err(parse_err(path, lineno + 1, format!("expected \"key value\", got {line:?}")));
        };
        let value = value.trim();
        let scalar = |what: &str| -> Result<f64, CliError> {
            value
                .parse()
                .map_err(|_| parse_err(path, lineno + 1, format!("invalid {what} {value:?}")))
        };
        let list = || -> Result<Vec<f64>, CliError> {
            value
                .split(',')
                .enumerate()
                .map(|(col, field)| parse_float(path, lineno + 1, col, field))
                .collect()
        };
        let index = |key: &str, prefix: &str| -> Result<usize, CliError> {
            key[prefix.len()..]
                .parse()
                .map_err(|_| parse_err(path, lineno + 1, format!("invalid task index in {key:?}")))
        };
        if key == "streams" {
            streams = Some(scalar("stream count")? as usize);
        } else if key == "tasks" {
            tasks = Some(scalar("task count")? as usize);
        } else if key.starts_with("baseline_") {
            baselines.push((index(key, "baseline_")?, scalar("baseline")?));
        } else if key.starts_with("offset_") {
            offsets.push((index(key, "offset_")?, scalar("offset")?));
        } else if key.starts_with("coeff_") {
            coeffs.push((index(key, "coeff_")?, list()?));
        } else if key.starts_with("decay_") {
            decays.push((index(key, "decay_")?, list()?));
        } else {
            return Err(parse_err(path, lineno + 1, format!("unknown key {key:?}")));
        }
    }

    let Some(n_streams) = streams else {
        return Err(parse_err(path, 1, "missing streams"));
    };
    let Some(n_tasks) = tasks else {
        return Err(parse_err(path, 1, "missing tasks"));
    };
    let mut models = Vec::with_capacity(n_tasks);
    for task in 1..=n_tasks {
        let find_scalar = |pairs: &[(usize, f64)], what: &str| -> Result<f64, CliError> {
            pairs
                .iter()
                .find(|(idx, _)| *idx == task)
                .map(|(_, v)| *v)
                .ok_or_else(|| parse_err(path, 1, format!("missing {what}_{task}")))
        };
        let find_list = |pairs: &[(usize, Vec<f64>)], what: &str| -> Result<Vec<f64>, CliError> {
            let v = pairs
                .iter()
                .find(|(idx, _)| *idx == task)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| parse_err(path, 1, format!("missing {what}_{task}")))?;
            if v.len() != n_streams {
                return Err(parse_err(
                    path,
                    1,
                    format!("{what}_{task} has {} values, expected {n_streams}", v.len()),
                ));
            }
            Ok(v)
        };
        models.push(SyntheticTaskModel::new(
            task,
            find_scalar(&baselines, "baseline")?,
            find_scalar(&offsets, "offset")?,
            find_list(&coeffs, "coeff")?,
            find_list(&decays, "decay")?,
        )?);
    }
    Ok(models)
}

/// Writes an `R_1,R_2,D_t` grid of the surface for 3-D plots. Two-stream
/// surfaces only.
pub fn write_surface_grid(
    path: &Path,
    params: &SurfaceParams,
    rate_max: f64,
    points_per_axis: usize,
) -> Result<(), CliError> {
    if params.n_streams() != 2 {
        return Err(CliError::Usage(format!(
            "surface emission needs a two-stream surface, got {} streams",
            params.n_streams()
        )));
    }
    let mut out = String::from("R_1,R_2,D_t\n");
    for i in 0..points_per_axis {
        let r1 = rate_max * i as f64 / (points_per_axis - 1) as f64;
        for k in 0..points_per_axis {
            let r2 = rate_max * k as f64 / (points_per_axis - 1) as f64;
            let d = params.eval(&[r1, r2]).map_err(CliError::from)?;
            let _ = writeln!(out, "{r1},{r2},{d}");
        }
    }
    write_file(path, &out)
}

/// Writes the distortion along the budget line `R_1 + R_2 = budget`,
/// sampled at `points` positions of `R_1` in `[0, budget]`.
pub fn write_constraint_line(
    path: &Path,
    params: &SurfaceParams,
    budget: f64,
    points: usize,
) -> Result<(), CliError> {
    if params.n_streams() != 2 {
        return Err(CliError::Usage(format!(
            "constraint-line emission needs a two-stream surface, got {} streams",
            params.n_streams()
        )));
    }
    let mut out = String::from("R_1,R_2,D_t\n");
    for i in 0..points {
        let r1 = budget * i as f64 / (points - 1) as f64;
        let r2 = (budget - r1).max(0.0);
        let d = params.eval(&[r1, r2]).map_err(CliError::from)?;
        let _ = writeln!(out, "{r1},{r2},{d}");
    }
    write_file(path, &out)
}
