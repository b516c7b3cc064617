//! Config-driven front end: builds a measure, runs one command and renders
//! the result as a CSV or JSON table with a provenance header.

pub mod config;
pub mod table;

use std::path::Path;

use bslab_core::bskernel::{r_form, KernelError};
use bslab_core::field::{eigenfunction_grid, norm_limit_report, tail_box, FieldError};
use bslab_core::measure::{kato_diagnostic, AtomicMeasure, MeasureDescriptor, MeasureError};
use bslab_core::spectral::{
    c_mu, gamma_top, lambda_asymptotic, perturbation_report, solve_bound_state, SpectralError,
};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{CommandName, Format, Parameters, RunConfig};
pub use table::{Cell, Provenance, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid measure: {0}")]
    Measure(#[from] MeasureError),
    #[error("numerical failure: {0}")]
    Spectral(#[from] SpectralError),
    #[error("numerical failure: {0}")]
    Field(#[from] FieldError),
    #[error("numerical failure: {0}")]
    Kernel(#[from] KernelError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for validation errors, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Measure(_) => 2,
            CliError::Spectral(_) | CliError::Field(_) | CliError::Kernel(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Runs a config and returns the rendered output.
pub fn execute(config: &RunConfig) -> Result<String, CliError> {
    let m = config.measure.build()?;
    let (relation, table) = run_command(config, &m)?;
    let provenance = Provenance {
        version: VERSION.to_string(),
        config_hash: config.hash(),
        command: config.command.to_string(),
        measure: serde_json::to_string(&config.measure).expect("descriptor serializes"),
        mu_total: m.total_mass(),
        relation: relation.to_string(),
    };
    Ok(match config.output.format {
        Format::Csv => table.to_csv(&provenance),
        Format::Json => table.to_json(&provenance),
    })
}

/// Runs a config and writes the output file.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let text = execute(config)?;
    let path = Path::new(&config.output.path);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn run_command(config: &RunConfig, m: &AtomicMeasure) -> Result<(&'static str, Table), CliError> {
    let mt = m.total_mass();
    Ok(match &config.parameters {
        Parameters::GammaSweep(p) => {
            let points = p.k.par_iter().map(|&k| gamma_top(m, k)).collect::<Result<Vec<_>, _>>()?;
            let mut t = Table::new(&["k", "gamma", "omega", "iterations"]);
            for pt in points {
                t.rows.push(vec![
                    Cell::Num(pt.k),
                    Cell::Num(pt.gamma),
                    Cell::Num(pt.omega(mt)),
                    Cell::Int(pt.iterations as u64),
                ]);
            }
            ("principal eigenvalue gamma(k) of Q(-k^2); omega = -2 pi gamma / (mu_T ln k)", t)
        }
        Parameters::BoundState(p) => {
            let states = p.alpha.par_iter().map(|&a| solve_bound_state(m, a)).collect::<Result<Vec<_>, _>>()?;
            let mut t = Table::new(&["alpha", "k", "lambda", "lambda_asym", "ratio"]);
            t.note("c_mu", Cell::Num(c_mu(m)?));
            for bs in states {
                let asym = lambda_asymptotic(m, bs.alpha)?;
                t.rows.push(vec![
                    Cell::Num(bs.alpha),
                    Cell::Num(bs.k_alpha),
                    Cell::Num(bs.lambda),
                    Cell::Num(asym.value),
                    if asym.underflow { Cell::Missing } else { Cell::Num(bs.lambda / asym.value) },
                ]);
            }
            ("bound state alpha gamma(k) = 1, lambda = -k^2, against the weak-coupling law -C_mu exp(-4 pi / (alpha mu_T))", t)
        }
        Parameters::Cmu(_) => {
            let mut t = Table::default();
            t.note("r_form", Cell::Num(r_form(m)?));
            t.note("c_mu", Cell::Num(c_mu(m)?));
            ("C_mu = exp(4 pi (R 1, 1) / mu_T^2), the prefactor of the weak-coupling eigenvalue law", t)
        }
        Parameters::Eigenfunction(p) => {
            let bs = solve_bound_state(m, p.alpha)?;
            let region = p.region.unwrap_or_else(|| tail_box(m, bs.k_alpha));
            let grid = eigenfunction_grid(m, &bs, region, p.nx, p.ny)?;
            let mut t = Table::default();
            t.note("alpha", Cell::Num(p.alpha));
            t.note("k", Cell::Num(bs.k_alpha));
            t.note("l2_norm_kernel", Cell::Num(grid.l2_norm_kernel));
            t.note("l2_norm_grid", Cell::Num(grid.l2_norm_grid));
            t.note("support_inside_box", Cell::Bool(grid.norms_comparable()));
            match config.output.format {
                Format::Csv => t.body = Some(grid.to_csv()),
                Format::Json => {
                    t.columns = vec!["x".into(), "y".into(), "f".into()];
                    for iy in 0..grid.ny {
                        for ix in 0..grid.nx {
                            t.rows.push(vec![
                                Cell::Num(grid.x(ix)),
                                Cell::Num(grid.y(iy)),
                                Cell::Num(grid.values[(iy, ix)]),
                            ]);
                        }
                    }
                }
            }
            ("eigenfunction f = k R(-k^2) phi = (k / 2 pi) sum_j w_j phi_j K0(k |x - x_j|), rows y-outer x-inner", t)
        }
        Parameters::KatoCheck(p) => {
            let report = kato_diagnostic(m, &p.eps)?;
            let mut t = Table::new(&["eps", "sup_estimate"]);
            t.note("flags_non_kato", Cell::Bool(report.flags_non_kato()));
            for r in &report.rows {
                t.rows.push(vec![Cell::Num(r.eps), Cell::Num(r.sup_estimate)]);
            }
            ("sup over x of the integral of |ln|x - y|| over the eps-disc around x, which tends to 0 for Kato-class measures", t)
        }
        Parameters::Perturbation(p) => {
            let report = perturbation_report(m, &p.k)?;
            let mut t = Table::new(&[
                "k",
                "gamma",
                "omega",
                "gap",
                "rest_diameter",
                "dev",
                "scaled_omega",
                "scaled_dev",
            ]);
            t.note("first_order", Cell::Num(report.first_order));
            for r in &report.rows {
                t.rows.push(vec![
                    Cell::Num(r.k),
                    Cell::Num(r.gamma),
                    Cell::Num(r.omega),
                    Cell::Num(r.gap),
                    Cell::Num(r.rest_diameter),
                    Cell::Num(r.dev),
                    Cell::Num(r.scaled_omega),
                    Cell::Num(r.scaled_dev),
                ]);
            }
            ("T(k) = -2 pi Q(-k^2) / (mu_T ln k) = 1_mu projection + O(1/ln k); (omega - 1) ln k tends to first_order", t)
        }
        Parameters::Convergence(p) => {
            let mut t = Table::new(&["level", "atoms", "gamma", "difference", "observed_order"]);
            let mut descriptor: MeasureDescriptor = config.measure.clone();
            let mut gammas: Vec<f64> = Vec::new();
            for level in 0..p.levels {
                let mm = descriptor.build()?;
                let g = gamma_top(&mm, p.k)?.gamma;
                let diff = gammas.last().map(|prev| g - prev);
                let order = match gammas.len() {
                    n if n >= 2 => {
                        let d_prev = gammas[n - 1] - gammas[n - 2];
                        Some((d_prev / diff.unwrap()).abs().log2())
                    }
                    _ => None,
                };
                t.rows.push(vec![
                    Cell::Int(level as u64),
                    Cell::Int(mm.len() as u64),
                    Cell::Num(g),
                    diff.map_or(Cell::Missing, Cell::Num),
                    order.map_or(Cell::Missing, Cell::Num),
                ]);
                gammas.push(g);
                descriptor = descriptor.refined();
            }
            t.note("k", Cell::Num(p.k));
            ("gamma(k) under repeated doubling of the resolution; observed order log2 of successive difference ratios", t)
        }
        Parameters::NormLimit(p) => {
            let rows = norm_limit_report(m, &p.alpha)?;
            let mut t = Table::new(&["alpha", "k", "norm", "limit", "deviation"]);
            for r in rows {
                t.rows.push(vec![
                    Cell::Num(r.alpha),
                    Cell::Num(r.k),
                    Cell::Num(r.norm),
                    Cell::Num(r.limit),
                    Cell::Num(r.deviation),
                ]);
            }
            ("L2 norm of the eigenfunction f_alpha against its weak-coupling limit mu_T / (2 sqrt(pi))", t)
        }
    })
}

/// One-off run settings given as flags instead of a config file.
#[derive(Debug, Clone, Default)]
pub struct FlagRun {
    /// Measure descriptor as JSON.
    pub measure: String,
    pub command: String,
    pub alpha: Option<Vec<f64>>,
    pub k: Option<Vec<f64>>,
    pub out: String,
    pub format: Option<Format>,
}

impl FlagRun {
    /// Builds the equivalent config; the format defaults to the extension of
    /// the output path.
    pub fn to_config(&self) -> Result<RunConfig, CliError> {
        let measure: Value = serde_json::from_str(&self.measure)
            .map_err(|e| CliError::Config(format!("--measure: {e}")))?;
        let command: CommandName = serde_json::from_value(Value::String(self.command.clone()))
            .map_err(|_| CliError::Config(format!("--command: unknown command {:?}", self.command)))?;
        let single = |name: &str, v: &Option<Vec<f64>>| -> Result<Value, CliError> {
            match v.as_deref() {
                Some([x]) => Ok(json!(x)),
                _ => Err(CliError::Config(format!("--{name}: {command} takes exactly one value"))),
            }
        };
        let list = |name: &str, v: &Option<Vec<f64>>| -> Result<Value, CliError> {
            v.as_ref().map(|l| json!(l)).ok_or_else(|| CliError::Config(format!("--{name}: required by {command}")))
        };
        let mut params = serde_json::Map::new();
        let (uses_alpha, uses_k) = match command {
            CommandName::GammaSweep | CommandName::Perturbation => {
                params.insert("k".into(), list("k", &self.k)?);
                (false, true)
            }
            CommandName::BoundState | CommandName::NormLimit => {
                params.insert("alpha".into(), list("alpha", &self.alpha)?);
                (true, false)
            }
            CommandName::Eigenfunction => {
                params.insert("alpha".into(), single("alpha", &self.alpha)?);
                (true, false)
            }
            CommandName::Convergence => {
                params.insert("k".into(), single("k", &self.k)?);
                (false, true)
            }
            CommandName::Cmu | CommandName::KatoCheck => (false, false),
        };
        if self.alpha.is_some() && !uses_alpha {
            return Err(CliError::Config(format!("--alpha: not used by {command}")));
        }
        if self.k.is_some() && !uses_k {
            return Err(CliError::Config(format!("--k: not used by {command}")));
        }
        let format = self.format.unwrap_or(if self.out.ends_with(".json") { Format::Json } else { Format::Csv });
        let config = json!({
            "measure": measure,
            "command": command,
            "parameters": params,
            "output": {"path": self.out, "format": format},
        });
        RunConfig::from_json(&config.to_string())
    }
}
