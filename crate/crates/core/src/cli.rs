//! Batch commands behind the `symcap` binary. Every command returns a report
//! that embeds the library version and the validated [`RunConfig`].

use serde::{Deserialize, Serialize};

use crate::body::ConvexBody;
use crate::capacities::{
    besse_check, ellipsoid_oracle, zoll_check, Besse, CapacityReport, OracleComparison,
};
use crate::checks::{gradcheck, CheckRow};
use crate::error::{Error, Result};
use crate::pipeline::{analyze, PipelineOptions};
use crate::solver::SolverOptions;
use crate::spectrum::{CriticalCircle, IndexSource, Route};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Grid sizes and truncations swept by [`cmd_converge`].
pub const CONVERGE_L_MAX: [usize; 4] = [8, 16, 32, 64];
pub const CONVERGE_GRID: [usize; 3] = [256, 512, 1024];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Capacities,
    Besse,
    Gradcheck,
    Oracle,
    Converge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    /// Inline JSON (starting with `{`) or a path to a JSON file.
    pub body: Option<String>,
    /// Ellipsoid axes for the oracle command.
    pub a: Option<Vec<f64>>,
    pub l_max: usize,
    pub grid: usize,
    pub k_max: usize,
    pub eta: Option<f64>,
    pub seed: u64,
    pub tol_grad: f64,
    pub out: OutputFormat,
    pub trace: bool,
    pub no_timestamp: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            body: None,
            a: None,
            l_max: 32,
            grid: 512,
            k_max: 4,
            eta: None,
            seed: 0,
            tol_grad: 1e-9,
            out: OutputFormat::Json,
            trace: false,
            no_timestamp: false,
        }
    }

    pub fn with_body(mut self, body: &str) -> Self {
        self.body = Some(body.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_max == 0 {
            return Err(Error::InvalidInput("--lmax must be at least 1".into()));
        }
        if self.grid < 4 * self.l_max {
            return Err(Error::GridTooCoarse {
                grid: self.grid,
                l_max: self.l_max,
            });
        }
        if self.k_max == 0 {
            return Err(Error::InvalidInput("--k must be at least 1".into()));
        }
        if !(self.tol_grad > 0.0 && self.tol_grad.is_finite()) {
            return Err(Error::InvalidInput("--tol-grad must be positive".into()));
        }
        if let Some(e) = self.eta {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidInput("--eta must be positive".into()));
            }
        }
        match self.command {
            Command::Oracle => {
                if self.a.is_none() && self.body.is_none() {
                    return Err(Error::InvalidInput("oracle needs --a or --body".into()));
                }
                if let Some(a) = &self.a {
                    if a.is_empty() || a.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                        return Err(Error::InvalidInput("--a must list positive reals".into()));
                    }
                }
            }
            _ => {
                if self.body.is_none() {
                    return Err(Error::InvalidInput("--body is required".into()));
                }
            }
        }
        Ok(())
    }

    pub fn load_body(&self) -> Result<ConvexBody> {
        let src = self
            .body
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("--body is required".into()))?;
        let text = if src.trim_start().starts_with('{') {
            src.to_string()
        } else {
            std::fs::read_to_string(src)
                .map_err(|e| Error::InvalidInput(format!("cannot read {src}: {e}")))?
        };
        ConvexBody::from_json(&text)
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            l_max: self.l_max,
            grid: self.grid,
            k_max: self.k_max,
            eta: self.eta,
            solver: SolverOptions {
                seed: self.seed,
                grad_tol: self.tol_grad,
                ..SolverOptions::default()
            },
            ..PipelineOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub config: RunConfig,
}

fn meta(cfg: &RunConfig) -> Meta {
    let timestamp = if cfg.no_timestamp {
        None
    } else {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs())
    };
    Meta {
        version: VERSION.to_string(),
        timestamp,
        config: cfg.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub id: String,
    pub action: f64,
    pub transverse_index: Option<usize>,
    pub nullity: Option<usize>,
    pub degenerate: bool,
    pub index_source: Option<IndexSource>,
    pub residual: f64,
    pub boundary_residual: Option<f64>,
    pub ode_residual: Option<f64>,
    pub multiplicity: usize,
    pub provenance: String,
}

impl From<&CriticalCircle> for SpectrumRow {
    fn from(c: &CriticalCircle) -> Self {
        let route = match c.provenance.route {
            Route::Ratio => "ratio",
            Route::Free => "free",
        };
        SpectrumRow {
            id: c.id.clone(),
            action: c.action,
            transverse_index: c.transverse_index,
            nullity: c.nullity,
            degenerate: c.degenerate,
            index_source: c.index_source,
            residual: c.residual,
            boundary_residual: c.boundary_residual,
            ode_residual: c.ode_residual,
            multiplicity: c.multiplicity,
            provenance: format!("{}:{route}", c.provenance.seed_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    #[serde(flatten)]
    pub meta: Meta,
    pub eta: f64,
    pub circles: Vec<SpectrumRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitiesOutput {
    #[serde(flatten)]
    pub meta: Meta,
    pub eta: f64,
    pub capacities: CapacityReport,
    pub oracle: Option<OracleComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesseOutput {
    #[serde(flatten)]
    pub meta: Meta,
    pub caps: Vec<Option<f64>>,
    pub besse: Option<Besse>,
    pub zoll: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckOutput {
    #[serde(flatten)]
    pub meta: Meta,
    pub rows: Vec<CheckRow>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    #[serde(flatten)]
    pub meta: Meta,
    pub a: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub l_max: usize,
    pub grid: usize,
    pub caps: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeDelta {
    pub grid: usize,
    pub k: usize,
    /// `|c_k(l_max = 64) − c_k(l_max = 32)|`.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeOutput {
    #[serde(flatten)]
    pub meta: Meta,
    pub rows: Vec<ConvergeRow>,
    pub deltas: Vec<ConvergeDelta>,
}

fn slot_values(r: &CapacityReport) -> Vec<Option<f64>> {
    r.caps.iter().map(|c| c.value).collect()
}

/// Multistart spectrum with residuals, and indices below `η`.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<SpectrumReport> {
    cfg.validate()?;
    let body = cfg.load_body()?;
    let an = analyze(&body, &cfg.pipeline_options())?;
    Ok(SpectrumReport {
        meta: meta(cfg),
        eta: an.eta,
        circles: an.circles.iter().map(SpectrumRow::from).collect(),
    })
}

pub fn cmd_capacities(cfg: &RunConfig) -> Result<CapacitiesOutput> {
    cfg.validate()?;
    let body = cfg.load_body()?;
    let an = analyze(&body, &cfg.pipeline_options())?;
    let oracle =
        matches!(body.kind(), crate::body::BodyKind::Ellipsoid { .. }).then_some(an.oracle);
    Ok(CapacitiesOutput {
        meta: meta(cfg),
        eta: an.eta,
        capacities: an.capacities,
        oracle,
    })
}

pub fn cmd_besse(cfg: &RunConfig) -> Result<BesseOutput> {
    cfg.validate()?;
    let body = cfg.load_body()?;
    let mut opts = cfg.pipeline_options();
    opts.k_max = opts.k_max.max(2 * body.dim_n());
    let an = analyze(&body, &opts)?;
    let besse = besse_check(&an.capacities, 1e-6)?;
    let zoll = zoll_check(&an.capacities, 1e-6)?;
    Ok(BesseOutput {
        meta: meta(cfg),
        caps: slot_values(&an.capacities),
        besse,
        zoll,
    })
}

pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<GradcheckOutput> {
    cfg.validate()?;
    let body = cfg.load_body()?;
    let rows = gradcheck(
        &body,
        cfg.l_max.min(16),
        cfg.grid.min(128).max(4 * cfg.l_max.min(16)),
        100,
        cfg.seed,
    )?;
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(GradcheckOutput {
        meta: meta(cfg),
        rows,
        all_pass,
    })
}

pub fn cmd_oracle(cfg: &RunConfig) -> Result<OracleOutput> {
    cfg.validate()?;
    let mut a = match &cfg.a {
        Some(a) => a.clone(),
        None => cfg.load_body()?.ellipsoid_equivalent(),
    };
    a.sort_by(f64::total_cmp);
    let values = ellipsoid_oracle(&a, cfg.k_max);
    Ok(OracleOutput {
        meta: meta(cfg),
        a,
        values,
    })
}

/// Capacities over the `l_max × grid` sweep; combinations with `grid < 4·l_max` are skipped.
pub fn cmd_converge(cfg: &RunConfig) -> Result<ConvergeOutput> {
    cfg.validate()?;
    let body = cfg.load_body()?;
    let mut rows = Vec::new();
    for &grid in &CONVERGE_GRID {
        for &l_max in &CONVERGE_L_MAX {
            if grid < 4 * l_max {
                continue;
            }
            let mut opts = cfg.pipeline_options();
            opts.l_max = l_max;
            opts.grid = grid;
            let an = analyze(&body, &opts)?;
            rows.push(ConvergeRow {
                l_max,
                grid,
                caps: slot_values(&an.capacities),
            });
        }
    }
    let mut deltas = Vec::new();
    for &grid in &CONVERGE_GRID {
        let find = |l: usize| rows.iter().find(|r| r.l_max == l && r.grid == grid);
        if let (Some(a), Some(b)) = (find(64), find(32)) {
            for k in 0..cfg.k_max {
                let delta = match (a.caps[k], b.caps[k]) {
                    (Some(x), Some(y)) => Some((x - y).abs()),
                    _ => None,
                };
                deltas.push(ConvergeDelta {
                    grid,
                    k: k + 1,
                    delta,
                });
            }
        }
    }
    Ok(ConvergeOutput {
        meta: meta(cfg),
        rows,
        deltas,
    })
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn sci(v: &Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Runs the configured command and renders its report.
pub fn run(cfg: &RunConfig) -> Result<String> {
    let csv_out = cfg.out == OutputFormat::Csv;
    match cfg.command {
        Command::Spectrum => {
            let r = cmd_spectrum(cfg)?;
            if !csv_out {
                return Ok(json(&r));
            }
            let rows = r
                .circles
                .iter()
                .map(|c| {
                    vec![
                        c.action.to_string(),
                        opt(&c.transverse_index),
                        opt(&c.nullity),
                        sci(&c.boundary_residual),
                        sci(&c.ode_residual),
                        c.multiplicity.to_string(),
                        c.provenance.clone(),
                    ]
                })
                .collect();
            csv_text(
                &[
                    "action",
                    "transverse_index",
                    "nullity",
                    "boundary_residual",
                    "ode_residual",
                    "multiplicity",
                    "provenance",
                ],
                rows,
            )
        }
        Command::Capacities => {
            let r = cmd_capacities(cfg)?;
            if !csv_out {
                return Ok(json(&r));
            }
            let rows = r
                .capacities
                .caps
                .iter()
                .map(|c| {
                    let method = c.method.map(|m| {
                        serde_json::to_value(m)
                            .unwrap()
                            .as_str()
                            .unwrap()
                            .to_string()
                    });
                    vec![
                        c.k.to_string(),
                        opt(&c.value),
                        c.source.clone().unwrap_or_default(),
                        method.unwrap_or_default(),
                    ]
                })
                .collect();
            csv_text(&["k", "value", "source", "method"], rows)
        }
        Command::Besse => {
            let r = cmd_besse(cfg)?;
            if !csv_out {
                return Ok(json(&r));
            }
            let b = r.besse.as_ref();
            csv_text(
                &["besse_i", "tau", "mu", "zoll"],
                vec![vec![
                    opt(&b.map(|b| b.i)),
                    opt(&b.map(|b| b.tau)),
                    opt(&b.map(|b| b.mu)),
                    r.zoll.to_string(),
                ]],
            )
        }
        Command::Gradcheck => {
            let r = cmd_gradcheck(cfg)?;
            if !csv_out {
                return Ok(json(&r));
            }
            let rows = r
                .rows
                .iter()
                .map(|c| {
                    vec![
                        c.check.clone(),
                        c.samples.to_string(),
                        c.max_error.to_string(),
                        c.tol.to_string(),
                        c.pass.to_string(),
                    ]
                })
                .collect();
            csv_text(&["check", "samples", "max_error", "tol", "pass"], rows)
        }
        Command::Oracle => {
            let r = cmd_oracle(cfg)?;
            if !csv_out {
                return Ok(json(&r));
            }
            let rows = r
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| vec![(i + 1).to_string(), v.to_string()])
                .collect();
            csv_text(&["k", "value"], rows)
        }
        Command::Converge => {
            let r = cmd_converge(cfg)?;
            if !csv_out {
                return Ok(json(&r));
            }
            let mut header = vec!["l_max".to_string(), "grid".to_string()];
            header.extend((1..=cfg.k_max).map(|k| format!("c{k}")));
            let rows = r
                .rows
                .iter()
                .map(|row| {
                    let mut v = vec![row.l_max.to_string(), row.grid.to_string()];
                    v.extend(row.caps.iter().map(opt));
                    v
                })
                .collect();
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            csv_text(&h, rows)
        }
    }
}

/// Machine-readable error object written to stderr by the binary.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({"error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()})
        .to_string()
}
