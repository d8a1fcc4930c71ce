//! Structured plain-text (TOML) configuration for scenario runs.
//!
//! A file always names a builtin case; the case constants are applied first
//! and any keys present in the file override them. Unknown keys are
//! rejected. The uncertainty functions (theta(t), Psi(x,t)) are only
//! available through the builtin cases, so `case` is mandatory.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use gdrem_control::linalg::pinv;
use gdrem_control::mrac::compute_gains;
use gdrem_control::sim::{build_case, EstimatorConfig, ScenarioConfig};

use crate::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Builtin case providing the uncertainty functions and defaults.
    pub case: u8,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub gdrem: GdremSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// State dimension; must match the matrix payload lengths when given.
    pub n: Option<usize>,
    /// Input dimension.
    pub m: Option<usize>,
    /// Row-major n x n state matrix.
    pub a: Option<Vec<f64>>,
    /// Row-major n x m input matrix.
    pub b: Option<Vec<f64>>,
    /// Row-major n x n Hurwitz reference matrix.
    pub a_ref: Option<Vec<f64>>,
    /// Row-major n x m reference input matrix.
    pub b_ref: Option<Vec<f64>>,
    /// Row-major n x n symmetric positive definite Lyapunov weight.
    pub q: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub x0_ref: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdremSection {
    pub k0: Option<f64>,
    pub epsilon: Option<f64>,
    pub epsilon_bar: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    /// One of gdrem | gradient | rls | drem (default gdrem).
    pub kind: Option<String>,
    pub gamma0: Option<f64>,
    pub gamma1: Option<f64>,
    /// Gradient baseline gain (diagonal Gamma = gain I).
    pub gain: Option<f64>,
    /// RLS baseline initial gain Gamma(0) = gain0 I.
    pub gain0: Option<f64>,
    /// RLS forgetting factor.
    pub lambda_f: Option<f64>,
    /// DREM baseline gain.
    pub gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub record_every: Option<usize>,
    /// Parametrization filter gain l.
    pub l: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub label: Option<String>,
}

fn mat_from_key(
    key: &str,
    rows: usize,
    cols: usize,
    data: &[f64],
) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(CliError::Config(format!(
            "system.{key}: expected {rows}x{cols} = {} entries, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

fn vec_from_key(key: &str, len: usize, data: &[f64]) -> Result<DVector<f64>> {
    if data.len() != len {
        return Err(CliError::Config(format!(
            "system.{key}: expected {len} entries, got {}",
            data.len()
        )));
    }
    Ok(DVector::from_row_slice(data))
}

impl ConfigFile {
    /// Apply the file on top of the builtin case and validate the result.
    pub fn into_scenario(self) -> Result<ScenarioConfig> {
        let mut cfg = build_case(self.case)
            .map_err(|e| CliError::Config(format!("case: {e}")))?;
        let (n, m, _p) = cfg.system.dims;

        if let Some(n_given) = self.system.n {
            if n_given != n {
                return Err(CliError::Config(format!(
                    "system.n: builtin case {} has n = {n}, got {n_given} (the case fixes the uncertainty dimensions)",
                    self.case
                )));
            }
        }
        if let Some(m_given) = self.system.m {
            if m_given != m {
                return Err(CliError::Config(format!(
                    "system.m: builtin case {} has m = {m}, got {m_given}",
                    self.case
                )));
            }
        }

        let mut gains_stale = false;
        if let Some(a) = &self.system.a {
            cfg.system.a = mat_from_key("a", n, n, a)?;
            gains_stale = true;
        }
        if let Some(b) = &self.system.b {
            cfg.system.b = mat_from_key("b", n, m, b)?;
            gains_stale = true;
        }
        if let Some(a_ref) = &self.system.a_ref {
            cfg.system.a_ref = mat_from_key("a_ref", n, n, a_ref)?;
            gains_stale = true;
        }
        if let Some(b_ref) = &self.system.b_ref {
            cfg.system.b_ref = mat_from_key("b_ref", n, m, b_ref)?;
            gains_stale = true;
        }
        if let Some(q) = &self.system.q {
            cfg.system.q = mat_from_key("q", n, n, q)?;
            gains_stale = true;
        }
        if gains_stale {
            let (k_x, k_r, p_lyap) = compute_gains(
                &cfg.system.a,
                &cfg.system.b,
                &cfg.system.a_ref,
                &cfg.system.b_ref,
                &cfg.system.q,
            )?;
            cfg.system.k_x = k_x;
            cfg.system.k_r = k_r;
            cfg.system.p_lyap = p_lyap;
            cfg.system.b_pinv = pinv(&cfg.system.b)?;
        }
        if let Some(kappa) = self.system.kappa {
            cfg.system.kappa = kappa;
        }
        if let Some(x0) = &self.system.x0 {
            cfg.system.x0 = vec_from_key("x0", n, x0)?;
        }
        if let Some(x0_ref) = &self.system.x0_ref {
            cfg.system.x0_ref = vec_from_key("x0_ref", n, x0_ref)?;
        }

        if let Some(k0) = self.gdrem.k0 {
            cfg.gdrem.k0 = k0;
        }
        if let Some(eps) = self.gdrem.epsilon {
            cfg.gdrem.epsilon = eps;
        }
        if let Some(eb) = self.gdrem.epsilon_bar {
            cfg.gdrem.epsilon_bar = eb;
        }
        if let Some(mu) = self.gdrem.mu {
            cfg.gdrem.mu = mu;
        }

        cfg.estimator = self.estimator.resolve(cfg.estimator)?;

        if let Some(dt) = self.sim.dt {
            cfg.dt = dt;
        }
        if let Some(tf) = self.sim.t_final {
            cfg.t_final = tf;
        }
        if let Some(re) = self.sim.record_every {
            cfg.record_every = re;
        }
        if let Some(l) = self.sim.l {
            cfg.l = l;
        }
        if let Some(label) = self.output.label {
            cfg.label = label;
        }

        validate_scenario(&cfg)?;
        Ok(cfg)
    }
}

impl EstimatorSection {
    /// Default estimator gains used when the section leaves them out.
    pub const DEFAULT_GRADIENT_GAIN: f64 = 10.0;
    pub const DEFAULT_RLS_GAIN0: f64 = 10.0;
    pub const DEFAULT_RLS_LAMBDA_F: f64 = 1.0;
    pub const DEFAULT_DREM_GAMMA: f64 = 10.0;

    fn resolve(&self, base: EstimatorConfig) -> Result<EstimatorConfig> {
        let kind = match &self.kind {
            None => return self.fill(base),
            Some(k) => k.as_str(),
        };
        let resolved = match kind {
            "gdrem" => {
                let (g0, g1) = match base {
                    EstimatorConfig::Gdrem { gamma0, gamma1 } => (gamma0, gamma1),
                    _ => (10.0, 1.0),
                };
                EstimatorConfig::Gdrem {
                    gamma0: self.gamma0.unwrap_or(g0),
                    gamma1: self.gamma1.unwrap_or(g1),
                }
            }
            "gradient" => EstimatorConfig::Gradient {
                gain: self.gain.unwrap_or(Self::DEFAULT_GRADIENT_GAIN),
            },
            "rls" => EstimatorConfig::Rls {
                gain0: self.gain0.unwrap_or(Self::DEFAULT_RLS_GAIN0),
                lambda_f: self.lambda_f.unwrap_or(Self::DEFAULT_RLS_LAMBDA_F),
            },
            "drem" => EstimatorConfig::Drem {
                gamma: self.gamma.unwrap_or(Self::DEFAULT_DREM_GAMMA),
            },
            other => {
                return Err(CliError::Config(format!(
                    "estimator.kind: unknown estimator {other:?} (expected gdrem, gradient, rls or drem)"
                )))
            }
        };
        Ok(resolved)
    }

    /// No kind given: apply gain overrides onto the base estimator.
    fn fill(&self, base: EstimatorConfig) -> Result<EstimatorConfig> {
        match base {
            EstimatorConfig::Gdrem { gamma0, gamma1 } => Ok(EstimatorConfig::Gdrem {
                gamma0: self.gamma0.unwrap_or(gamma0),
                gamma1: self.gamma1.unwrap_or(gamma1),
            }),
            other => Ok(other),
        }
    }
}

/// Run the scenario's own validation and translate the Theorem-1 gain
/// condition into the message contract the CLI promises.
pub fn validate_scenario(cfg: &ScenarioConfig) -> Result<()> {
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))
}

/// Parse a TOML config file into a validated scenario.
pub fn parse_config_file(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ConfigFile = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    file.into_scenario()
}

/// Resolve the `--case N | --config PATH` pair with CLI-level overrides.
pub fn resolve_scenario(
    case: Option<u8>,
    config: Option<&Path>,
    dt: Option<f64>,
    t_final: Option<f64>,
) -> Result<ScenarioConfig> {
    let mut cfg = match (case, config) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "--case and --config are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "one of --case or --config is required".into(),
            ))
        }
        (Some(c), None) => build_case(c).map_err(|e| CliError::Config(e.to_string()))?,
        (None, Some(path)) => parse_config_file(path)?,
    };
    if let Some(dt) = dt {
        cfg.dt = dt;
    }
    if let Some(tf) = t_final {
        cfg.t_final = tf;
    }
    validate_scenario(&cfg)?;
    Ok(cfg)
}
