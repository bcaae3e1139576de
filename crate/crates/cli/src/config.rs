//! JSON configuration of the `solve` subcommand.

use std::path::{Path, PathBuf};

use legendre_pcg::pcg::PreconditionerChoice;
use legendre_pcg::{
    CoefficientField, Diffusion, Example, ProblemSpec, SolverConfig, TransformMode, Truncation,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Expr {
    Number(f64),
    Text(String),
}

impl Expr {
    fn field(&self, dim: usize, key: &str) -> Result<CoefficientField, CliError> {
        let text = match self {
            Expr::Number(v) => v.to_string(),
            Expr::Text(s) => s.clone(),
        };
        CoefficientField::parse(&text, dim).map_err(|e| CliError::Usage(format!("{key}: {e}")))
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Isotropic(Expr),
    PerAxis(Vec<Expr>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Cutoff {
    One(usize),
    PerAxis(Vec<usize>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub beta: BetaSpec,
    pub alpha: Option<Expr>,
    /// Source term used when `rhs` is `"load"`.
    pub f: Option<Expr>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub example: Option<String>,
    pub coefficients: Option<Coefficients>,
    pub dim: Option<usize>,
    pub n: usize,
    pub t1: Option<Cutoff>,
    pub t2: Option<usize>,
    pub epsilon: Option<f64>,
    pub kmax: Option<usize>,
    pub preconditioner: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    /// `reference`, `accelerated` or `auto` (default).
    pub transform: Option<String>,
    /// `ones` (default), `random` or `load`.
    pub rhs: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsKind {
    Ones,
    Random,
    Load,
}

/// Everything `solve` needs, validated.
pub struct SolveJob {
    pub label: String,
    pub spec: ProblemSpec,
    pub config: SolverConfig,
    pub mode: TransformMode,
    pub rhs: RhsKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

pub fn load(path: &Path, cli_seed: Option<u64>) -> Result<SolveJob, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: SolveConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    build(cfg, cli_seed)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn build(cfg: SolveConfig, cli_seed: Option<u64>) -> Result<SolveJob, CliError> {
    if cfg.n < 3 {
        return Err(usage(format!("n: {} is too small, need n >= 3", cfg.n)));
    }
    let (label, spec) = match (&cfg.example, &cfg.coefficients) {
        (Some(_), Some(_)) => {
            return Err(usage("example, coefficients: give exactly one of the two"));
        }
        (None, None) => return Err(usage("example: missing (or give coefficients)")),
        (Some(name), None) => {
            let ex: Example = name.parse().map_err(|e| usage(format!("example: {e}")))?;
            if let Some(d) = cfg.dim {
                if d != ex.dim() {
                    return Err(usage(format!("dim: {d} does not match {ex} (dimension {})", ex.dim())));
                }
            }
            let spec = ex.spec(cfg.n).map_err(|e| usage(format!("n: {e}")))?;
            (ex.name().to_string(), spec)
        }
        (None, Some(c)) => {
            let dim = cfg.dim.ok_or_else(|| usage("dim: required with coefficients"))?;
            if !(1..=3).contains(&dim) {
                return Err(usage(format!("dim: {dim} must be 1, 2 or 3")));
            }
            let diffusion = match &c.beta {
                BetaSpec::Isotropic(e) => Diffusion::Isotropic(e.field(dim, "coefficients.beta")?),
                BetaSpec::PerAxis(v) => {
                    if v.len() != dim {
                        return Err(usage(format!(
                            "coefficients.beta: {} per-axis entries for dimension {dim}",
                            v.len()
                        )));
                    }
                    Diffusion::PerAxis(
                        v.iter()
                            .map(|e| e.field(dim, "coefficients.beta"))
                            .collect::<Result<_, _>>()?,
                    )
                }
            };
            let alpha = match &c.alpha {
                Some(e) => e.field(dim, "coefficients.alpha")?,
                None => CoefficientField::zero(dim).map_err(|e| usage(e.to_string()))?,
            };
            let f = match &c.f {
                Some(e) => e.field(dim, "coefficients.f")?,
                None => CoefficientField::constant(dim, 1.0).map_err(|e| usage(e.to_string()))?,
            };
            let label = match &c.beta {
                BetaSpec::Isotropic(_) => diffusion.axis(0).name().to_string(),
                BetaSpec::PerAxis(_) => diffusion
                    .fields()
                    .iter()
                    .map(|f| f.name().to_string())
                    .collect::<Vec<_>>()
                    .join("|"),
            };
            let spec = ProblemSpec::new(cfg.n, diffusion, alpha, f).map_err(|e| usage(e.to_string()))?;
            (label, spec)
        }
    };

    let mut config = SolverConfig {
        record_history: true,
        ..SolverConfig::default()
    };
    if let Some(eps) = cfg.epsilon {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(usage(format!("epsilon: {eps} must be positive")));
        }
        config.epsilon = eps;
    }
    if let Some(k) = cfg.kmax {
        if k == 0 {
            return Err(usage("kmax: must be at least 1"));
        }
        config.k_max = k;
    }
    let kind = cfg.preconditioner.as_deref().unwrap_or("truncated");
    config.preconditioner = match kind.to_ascii_lowercase().as_str() {
        "none" => PreconditionerChoice::None,
        "truncated" => {
            let t2 = cfg.t2.unwrap_or(0);
            let trunc = match &cfg.t1 {
                None | Some(Cutoff::One(_)) => {
                    let t1 = match &cfg.t1 {
                        Some(Cutoff::One(t)) => *t,
                        _ => 0,
                    };
                    if spec.diffusion().is_isotropic() {
                        Truncation::new(t1, t2)
                    } else {
                        Truncation::per_axis(vec![t1; spec.dim()], t2)
                    }
                }
                Some(Cutoff::PerAxis(v)) => {
                    if spec.diffusion().is_isotropic() && v.len() != 1 {
                        return Err(usage("t1: per-axis cutoffs need per-axis diffusion"));
                    }
                    if !spec.diffusion().is_isotropic() && v.len() != spec.dim() {
                        return Err(usage(format!(
                            "t1: {} cutoffs for dimension {}",
                            v.len(),
                            spec.dim()
                        )));
                    }
                    Truncation::per_axis(v.clone(), t2)
                }
            };
            PreconditionerChoice::Truncated(trunc)
        }
        other => {
            return Err(usage(format!(
                "preconditioner: '{other}' must be 'truncated' or 'none'"
            )))
        }
    };

    let mode = match cfg.transform.as_deref().unwrap_or("auto") {
        "auto" => TransformMode::auto(spec.grid_order()),
        other => other
            .parse()
            .map_err(|_| usage(format!("transform: '{other}' must be auto, reference or accelerated")))?,
    };
    let rhs = match cfg.rhs.as_deref().unwrap_or("ones") {
        "ones" => RhsKind::Ones,
        "random" => RhsKind::Random,
        "load" => RhsKind::Load,
        other => return Err(usage(format!("rhs: '{other}' must be ones, random or load"))),
    };
    Ok(SolveJob {
        label,
        spec,
        config,
        mode,
        rhs,
        seed: cfg.seed.or(cli_seed).unwrap_or(42),
        output: cfg.output,
    })
}

/// Parses `6:2` or `4-3-3:0` (the `:t2` part defaults to 0).
pub fn parse_truncation(s: &str) -> Result<Truncation, CliError> {
    let (b, a) = match s.split_once(':') {
        Some((b, a)) => (b, a),
        None => (s, "0"),
    };
    let t2: usize = a
        .trim()
        .parse()
        .map_err(|_| usage(format!("--t: bad reaction cutoff in '{s}'")))?;
    let t1: Vec<usize> = b
        .split('-')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--t: bad diffusion cutoff in '{s}'")))?;
    Ok(if t1.len() == 1 {
        Truncation::new(t1[0], t2)
    } else {
        Truncation::per_axis(t1, t2)
    })
}
