//! Adaptive laws: the G-DREM law with switched gain and the three classical
//! baselines (gradient descent, recursive least squares, DREM) used for
//! comparison runs. All laws are derivative providers for a shared integrator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gdrem::GdremConfig;
use crate::linalg::adjugate_det;

/// Estimator selection for a scenario run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    Gdrem,
    Gradient,
    Rls,
    Drem,
}

impl EstimatorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gdrem" => Ok(Self::Gdrem),
            "gradient" => Ok(Self::Gradient),
            "rls" => Ok(Self::Rls),
            "drem" => Ok(Self::Drem),
            other => Err(Error::Config(format!(
                "unknown estimator '{other}' (expected gdrem | gradient | rls | drem)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gdrem => "gdrem",
            Self::Gradient => "gradient",
            Self::Rls => "rls",
            Self::Drem => "drem",
        }
    }
}

/// Switched gain of the G-DREM law:
/// gamma = gamma1 below the floor min(mu^p, eps^p), gamma0 / omega^2 above it,
/// so the effective rate gamma * omega^2 is the constant gamma0 when excited.
pub fn gdrem_gain(omega: f64, cfg: &GdremConfig, gamma0: f64, gamma1: f64, p: usize) -> f64 {
    if omega <= cfg.omega_floor(p) {
        gamma1
    } else {
        gamma0 / (omega * omega)
    }
}

/// G-DREM law: dtheta_hat/dt = -gamma(omega) * omega * (omega theta_hat - Upsilon).
pub fn gdrem_law_derivative(
    theta_hat: &DMatrix<f64>,
    omega: f64,
    upsilon: &DMatrix<f64>,
    cfg: &GdremConfig,
    gamma0: f64,
    gamma1: f64,
) -> Result<DMatrix<f64>> {
    if upsilon.shape() != theta_hat.shape() {
        return Err(Error::shape(
            "gdrem_law_derivative",
            format!("{:?}", theta_hat.shape()),
            format!("{:?}", upsilon.shape()),
        ));
    }
    let gamma = gdrem_gain(omega, cfg, gamma0, gamma1, theta_hat.nrows());
    Ok(-gamma * omega * (omega * theta_hat - upsilon))
}

/// Gradient-descent baseline with the stabilizing sign:
/// dtheta_hat/dt = -Gamma phibar (phibar^T theta_hat - z^T).
pub fn baseline_gradient_derivative(
    theta_hat: &DMatrix<f64>,
    phi_bar: &DVector<f64>,
    z: &DVector<f64>,
    gamma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (p, m) = theta_hat.shape();
    if phi_bar.len() != p || z.len() != m || gamma.shape() != (p, p) {
        return Err(Error::shape(
            "baseline_gradient_derivative",
            format!("phibar {p}, z {m}, Gamma {p}x{p}"),
            format!("phibar {}, z {}, Gamma {:?}", phi_bar.len(), z.len(), gamma.shape()),
        ));
    }
    let err = phi_bar.transpose() * theta_hat - z.transpose(); // 1 x m
    Ok(-(gamma * phi_bar) * err)
}

/// Recursive-least-squares baseline:
/// dtheta_hat/dt as the gradient form with matrix gain Gamma,
/// dGamma/dt = lambda_f Gamma - Gamma phibar phibar^T Gamma.
pub fn baseline_rls_derivative(
    theta_hat: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    phi_bar: &DVector<f64>,
    z: &DVector<f64>,
    lambda_f: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = theta_hat.nrows();
    if gamma.shape() != (p, p) {
        return Err(Error::shape(
            "baseline_rls_derivative",
            format!("Gamma {p}x{p}"),
            format!("{:?}", gamma.shape()),
        ));
    }
    let sym = 0.5 * (gamma + gamma.transpose());
    let shift = 1e-9 * (1.0 + sym.norm()) * DMatrix::identity(p, p);
    if (&sym + shift).cholesky().is_none() {
        return Err(Error::numerical("RLS gain matrix lost positive definiteness"));
    }
    let dtheta = baseline_gradient_derivative(theta_hat, phi_bar, z, gamma)?;
    let gp = gamma * phi_bar;
    let dgamma = lambda_f * gamma - &gp * gp.transpose();
    Ok((dtheta, dgamma))
}

/// DREM baseline: dtheta_hat/dt = -gamma adj(phi) (phi theta_hat - y).
pub fn baseline_drem_derivative(
    theta_hat: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    y: &DMatrix<f64>,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    let (p, m) = theta_hat.shape();
    if phi.shape() != (p, p) || y.shape() != (p, m) {
        return Err(Error::shape(
            "baseline_drem_derivative",
            format!("phi {p}x{p}, y {p}x{m}"),
            format!("phi {:?}, y {:?}", phi.shape(), y.shape()),
        ));
    }
    let adj = adjugate_det(phi)?.adj;
    Ok(-gamma * adj * (phi * theta_hat - y))
}
