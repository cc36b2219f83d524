//! Dataset files, the fit pipeline used by the CLI, and the JSON export.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::penalty::{GroupClass, PenaltyWeights};
use crate::solver::{compute_adaptive_weights, FitResult, Problem, SolverConfig};
use crate::spline::{build_design, eval_coef_function, make_knots};
use crate::tuning::{
    fit_lambda0_path, fit_pair_grid, lambda1_max, lambda2_max, log_grid, CriterionMode, GridOptions,
    TuningReport,
};

/// Observations `(t_i, y_i, x_i)` with `t` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub x: DMatrix<f64>,
    pub column_names: Vec<String>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, t: Vec<f64>, x: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::dims("dataset has no rows"));
        }
        if t.len() != n || x.nrows() != n {
            return Err(Error::dims(format!(
                "y has {n} rows, t has {}, x has {}",
                t.len(),
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::dims("dataset has no covariates"));
        }
        if column_names.len() != x.ncols() {
            return Err(Error::dims(format!(
                "{} column names for {} covariates",
                column_names.len(),
                x.ncols()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("y in row {}", i + 1)));
        }
        if let Some(i) = t.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("t in row {}", i + 1)));
        }
        if let Some(i) = t.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfRange {
                what: format!("t in row {}", i + 1),
                value: t[i],
            });
        }
        for (j, col) in x.column_iter().enumerate() {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("column '{}' in row {}", column_names[j], i + 1)));
            }
        }
        Ok(Dataset { y, t, x, column_names })
    }

    /// Same as [`Dataset::new`] with `x` given column-major as `n * p` values
    /// and generated names `x1..xp`.
    pub fn from_column_major(y: Vec<f64>, t: Vec<f64>, x: &[f64], p: usize) -> Result<Self> {
        let n = y.len();
        if n.checked_mul(p) != Some(x.len()) {
            return Err(Error::dims(format!("x has {} values, expected {n} * {p}", x.len())));
        }
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Dataset::new(y, t, DMatrix::from_column_slice(n, p, x), names)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Map `t` affinely so its minimum becomes 0 and its maximum 1.
    pub rescale_t: bool,
}

/// Reads a comma-separated file with header `t,y,x1,...,xp`.
pub fn read_dataset(path: impl AsRef<Path>, opts: ReadOptions) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    parse_dataset(bytes.as_slice(), opts)
}

/// Hex SHA-256 of a byte string.
pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn parse_dataset(reader: impl Read, opts: ReadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    if names.len() < 3 || !names[0].eq_ignore_ascii_case("t") || !names[1].eq_ignore_ascii_case("y") {
        return Err(Error::Parse {
            line: 1,
            message: "header must be t,y,x1,...,xp with at least one covariate".into(),
        });
    }
    let p = names.len() - 2;
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != names.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        for (field, name) in rec.iter().zip(&names) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column '{name}': cannot parse '{field}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column '{name}': non-finite value '{field}'"),
                });
            }
            xs.push(v);
        }
        let row = &xs[xs.len() - names.len()..];
        t.push(row[0]);
        y.push(row[1]);
        let cov = row[2..].to_vec();
        xs.truncate(xs.len() - names.len());
        xs.extend(cov);
        if !opts.rescale_t && !(0.0..=1.0).contains(&t[t.len() - 1]) {
            return Err(Error::OutOfRange {
                what: format!("t at line {line}"),
                value: t[t.len() - 1],
            });
        }
    }
    if y.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    if opts.rescale_t {
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::InvalidConfig("cannot rescale t: all values are equal".into()));
        }
        for v in &mut t {
            *v = ((*v - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
    }
    let n = y.len();
    let x = DMatrix::from_row_slice(n, p, &xs);
    Dataset::new(y, t, x, names[2..].to_vec())
}

/// Writes the dataset with shortest round-trip decimal formatting.
pub fn write_dataset(writer: impl Write, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string(), "y".to_string()];
    header.extend(data.column_names.iter().cloned());
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..data.n() {
        let mut row = vec![format!("{:?}", data.t[i]), format!("{:?}", data.y[i])];
        row.extend((0..data.p()).map(|j| format!("{:?}", data.x[(i, j)])));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_dataset_file(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    write_dataset(std::fs::File::create(path)?, data)
}

/// Settings for [`run_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub n_basis: usize,
    pub order: usize,
    /// Criterion for the initial group-Lasso fit.
    pub initial_criterion: CriterionMode,
    /// Criterion for the adaptive fit.
    pub criterion: CriterionMode,
    pub grid: GridOptions,
    pub lambda0: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    /// Fit once at the given `lambda1, lambda2` instead of searching a grid.
    pub no_tune: bool,
    pub solver: SolverConfig,
    pub export_grid_size: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_basis: 10,
            order: 4,
            initial_criterion: CriterionMode::Bic,
            criterion: CriterionMode::Ebic,
            grid: GridOptions::default(),
            lambda0: None,
            lambda1: None,
            lambda2: None,
            no_tune: false,
            solver: SolverConfig::default(),
            export_grid_size: 201,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda0", self.lambda0), ("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidConfig(format!("{name} must be finite and nonnegative")));
                }
            }
        }
        if self.no_tune && (self.lambda1.is_none() || self.lambda2.is_none()) {
            return Err(Error::InvalidConfig("--no-tune requires both lambda1 and lambda2".into()));
        }
        if self.grid.points < 1 || !(self.grid.ratio > 0.0 && self.grid.ratio <= 1.0) {
            return Err(Error::InvalidConfig("grid needs at least one point and a ratio in (0, 1]".into()));
        }
        if self.export_grid_size < 2 {
            return Err(Error::InvalidConfig("export grid needs at least 2 points".into()));
        }
        if self.order < 1 || self.n_basis < self.order {
            return Err(Error::InvalidConfig("basis dimension must be at least the spline order".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisExport {
    pub k: usize,
    pub order: usize,
    pub knots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningExport {
    pub lambda0: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub initial_criterion: Option<CriterionMode>,
    pub initial_criterion_value: Option<f64>,
    pub criterion: Option<CriterionMode>,
    pub criterion_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsExport {
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub jitter_events: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateExport {
    pub name: String,
    /// `zero`, `constant` or `varying`.
    pub class: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub function: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitExport {
    pub software: String,
    pub input_sha256: String,
    pub n: usize,
    pub p: usize,
    pub basis: BasisExport,
    pub tuning: TuningExport,
    pub rss: f64,
    pub diagnostics: DiagnosticsExport,
    pub grid: Vec<f64>,
    pub covariates: Vec<CovariateExport>,
}

impl FitExport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn classes(&self) -> Vec<&str> {
        self.covariates.iter().map(|c| c.class.as_str()).collect()
    }
}

fn criterion_value(report: &TuningReport) -> Option<f64> {
    report.criterion_values[report.chosen]
}

/// Runs the full pipeline: group-Lasso initial fit tuned by
/// `initial_criterion`, adaptive weights, then the double-penalty fit tuned by
/// `criterion`. Manual lambdas replace the corresponding grids.
pub fn run_fit(data: &Dataset, input_sha256: &str, opts: &FitOptions) -> Result<FitExport> {
    opts.validate()?;
    let spec = make_knots(opts.n_basis - opts.order, opts.order)?;
    let design = build_design(&data.x, &data.t, &spec)?;
    let problem = Problem::new(&data.y, &design)?;
    let (n, p, k) = (design.n(), design.p(), design.k());
    let g = opts.grid;

    let mut tuning = TuningExport {
        lambda0: None,
        lambda1: 0.0,
        lambda2: 0.0,
        initial_criterion: None,
        initial_criterion_value: None,
        criterion: None,
        criterion_value: None,
    };

    let weights = if opts.no_tune && opts.lambda0.is_none() {
        PenaltyWeights::unit(p)
    } else {
        let grid0 = match opts.lambda0 {
            Some(l) => vec![l],
            None => log_grid(lambda1_max(&data.y, &design, &PenaltyWeights::unit(p)), g.points, g.ratio),
        };
        let path = fit_lambda0_path(&problem, &grid0, &opts.solver)?;
        let (initial, report) = path.select(opts.initial_criterion, n, p, k)?;
        tuning.lambda0 = Some(initial.lambda1);
        if opts.lambda0.is_none() {
            tuning.initial_criterion = Some(opts.initial_criterion);
            tuning.initial_criterion_value = criterion_value(&report);
        }
        compute_adaptive_weights(&initial, 0.0)
    };

    let fit: FitResult = if opts.no_tune {
        problem.fit_double_penalty(
            opts.lambda1.unwrap(),
            opts.lambda2.unwrap(),
            &weights,
            &opts.solver,
            None,
        )?
    } else {
        let grid1 = match opts.lambda1 {
            Some(l) => vec![l],
            None => log_grid(lambda1_max(&data.y, &design, &weights), g.points, g.ratio),
        };
        let grid2 = match opts.lambda2 {
            Some(l) => vec![l],
            None => log_grid(lambda2_max(&data.y, &design, &weights), g.points, g.ratio),
        };
        let fits = fit_pair_grid(&problem, &weights, &grid1, &grid2, &opts.solver)?;
        let (fit, report) = fits.select(opts.criterion, n, p, k)?;
        tuning.criterion = Some(opts.criterion);
        tuning.criterion_value = criterion_value(&report);
        fit
    };
    tuning.lambda1 = fit.lambda1;
    tuning.lambda2 = fit.lambda2;

    let m = opts.export_grid_size;
    let grid: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
    let covariates = (0..p)
        .map(|j| {
            let class = fit.coef.class(j);
            Ok(CovariateExport {
                name: data.column_names[j].clone(),
                class: class.label().to_string(),
                value: match class {
                    GroupClass::Constant(c) => Some(c),
                    _ => None,
                },
                function: match class {
                    GroupClass::Varying => Some(eval_coef_function(fit.coef.group(j), &spec, &grid)?),
                    _ => None,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FitExport {
        software: crate::SOFTWARE.to_string(),
        input_sha256: input_sha256.to_string(),
        n,
        p,
        basis: BasisExport {
            k,
            order: spec.order(),
            knots: spec.knots().to_vec(),
        },
        tuning,
        rss: fit.rss,
        diagnostics: DiagnosticsExport {
            iterations: fit.n_iter,
            converged: fit.converged,
            kkt_residual: fit.kkt,
            jitter_events: fit.jitter_events,
            objective: fit.objective(),
        },
        grid,
        covariates,
    })
}
