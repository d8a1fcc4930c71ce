//! The G-DREM pipeline: dynamic extension of the normalized regression,
//! eigenvalue-based dynamic regularization with virtual eigenvalues, mixing
//! to a scalar regressor, the indistinguishable-parameter projection and the
//! decaying-disturbance diagnostic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{adjugate_det_spectral, sym_eig, SymEig};

/// Pipeline configuration.
#[derive(Debug, Clone, Copy)]
pub struct GdremConfig {
    /// Extension filter gain (1/s).
    pub k0: f64,
    /// Virtual eigenvalue magnitude.
    pub epsilon: f64,
    /// Clipping threshold below which raw eigenvalues count as zero.
    pub epsilon_bar: f64,
    /// Assumed excitation floor; used only by the estimator's gain switch.
    pub mu: f64,
}

impl GdremConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k0 <= 0.0 {
            return Err(Error::Config(format!("k0 must be positive, got {}", self.k0)));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.epsilon_bar < 0.0 {
            return Err(Error::Config(format!(
                "epsilon_bar must be nonnegative, got {}",
                self.epsilon_bar
            )));
        }
        if self.mu <= 0.0 {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }

    /// Gain-switch threshold min(mu^p, epsilon^p) for regressor dimension p.
    pub fn omega_floor(&self, p: usize) -> f64 {
        self.mu.powi(p as i32).min(self.epsilon.powi(p as i32))
    }
}

/// Filter states of the extension pipeline plus the regularized products.
#[derive(Debug, Clone)]
pub struct GdremState {
    /// Extended regressor filter state (p x p, symmetric PSD).
    pub phi: DMatrix<f64>,
    /// Extended regressand filter state (p x m).
    pub y: DMatrix<f64>,
    /// Decaying-disturbance diagnostic filter state (p x m).
    pub d: DMatrix<f64>,
    /// Regularized regressor `Phi = V diag(lambda_bar) V^T`.
    pub phi_reg: DMatrix<f64>,
    /// Mixed regressand `Upsilon = adj(Phi) y`.
    pub upsilon: DMatrix<f64>,
    /// Scalar regressor `omega = det(Phi)`.
    pub omega: f64,
    /// Diagnostic `eps = adj(Phi) d`.
    pub eps_term: DMatrix<f64>,
    /// Decomposition of the raw `phi`.
    pub decomposition: SymEig,
}

/// Derivatives of the three extension filters:
/// dphi/dt = -k0 phi + phibar phibar^T,
/// dy/dt   = -k0 y   + phibar z^T,
/// dd/dt   = -k0 d   + decay_input.
pub fn extend_derivatives(
    k0: f64,
    phi: &DMatrix<f64>,
    y: &DMatrix<f64>,
    d: &DMatrix<f64>,
    phi_bar: &DVector<f64>,
    z: &DVector<f64>,
    decay_input: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let p = phi_bar.len();
    let m = z.len();
    if phi.shape() != (p, p) {
        return Err(Error::shape("extend_derivatives(phi)", format!("{p}x{p}"), format!("{:?}", phi.shape())));
    }
    if y.shape() != (p, m) {
        return Err(Error::shape("extend_derivatives(y)", format!("{p}x{m}"), format!("{:?}", y.shape())));
    }
    if d.shape() != (p, m) || decay_input.shape() != (p, m) {
        return Err(Error::shape("extend_derivatives(d)", format!("{p}x{m}"), format!("{:?}", d.shape())));
    }
    let dphi = -k0 * phi + phi_bar * phi_bar.transpose();
    let dy = -k0 * y + phi_bar * z.transpose();
    let dd = -k0 * d + decay_input;
    Ok((dphi, dy, dd))
}

/// Result of the dynamic regularization step.
#[derive(Debug, Clone)]
pub struct Regularized {
    /// `Phi`: the regularized regressor (zero matrix on the all-clipped branch).
    pub phi_reg: DMatrix<f64>,
    /// Regularized spectrum `lambda_bar` (all zeros on the all-clipped branch).
    pub lambdas_bar: DVector<f64>,
    /// Decomposition of the raw input.
    pub decomposition: SymEig,
    /// True when every raw eigenvalue fell below `epsilon_bar`.
    pub all_clipped: bool,
}

/// Eigenvalue clipping: raw eigenvalues >= epsilon_bar are kept, smaller ones
/// are replaced by the virtual eigenvalue epsilon. When every eigenvalue was
/// replaced the whole spectrum collapses to zero and `Phi = 0`.
pub fn regularize(phi: &DMatrix<f64>, cfg: &GdremConfig) -> Result<Regularized> {
    let decomposition = sym_eig(phi, cfg.epsilon_bar)?;
    let p = decomposition.dim();
    let all_clipped = decomposition.rank == 0;
    let lambdas_bar = if all_clipped {
        DVector::zeros(p)
    } else {
        DVector::from_fn(p, |i, _| {
            let l = decomposition.lambdas[i];
            if l >= cfg.epsilon_bar {
                l
            } else {
                cfg.epsilon
            }
        })
    };
    let phi_reg = if all_clipped {
        DMatrix::zeros(p, p)
    } else {
        &decomposition.v * DMatrix::from_diagonal(&lambdas_bar) * decomposition.v.transpose()
    };
    Ok(Regularized {
        phi_reg,
        lambdas_bar,
        decomposition,
        all_clipped,
    })
}

/// Mixing: `Upsilon = adj(Phi) y`, `omega = det(Phi)`, computed through the
/// spectral fast path of the adjugate so near-singular `Phi` stays stable.
pub fn mix(reg: &Regularized, y: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let ad = adjugate_det_spectral(&reg.decomposition.v, &reg.lambdas_bar);
    (ad.adj * y, ad.det)
}

/// Indistinguishable parameters `Theta = theta - V2 V2^T theta`: the
/// projection of the true parameters away from the regressor nullspace.
pub fn indistinguishable_params(theta: &DMatrix<f64>, decomposition: &SymEig) -> DMatrix<f64> {
    theta - &decomposition.nullspace_projector * theta
}

/// Diagnostic `eps = adj(Phi) d`, expected to vanish exponentially.
pub fn decay_diagnostic(reg: &Regularized, d: &DMatrix<f64>) -> DMatrix<f64> {
    let ad = adjugate_det_spectral(&reg.decomposition.v, &reg.lambdas_bar);
    ad.adj * d
}

/// Full pipeline step from the raw filter states: regularize, mix, project.
pub fn pipeline_outputs(
    phi: &DMatrix<f64>,
    y: &DMatrix<f64>,
    d: &DMatrix<f64>,
    cfg: &GdremConfig,
) -> Result<GdremState> {
    let reg = regularize(phi, cfg)?;
    let (upsilon, omega) = mix(&reg, y);
    let eps_term = decay_diagnostic(&reg, d);
    Ok(GdremState {
        phi: phi.clone(),
        y: y.clone(),
        d: d.clone(),
        phi_reg: reg.phi_reg.clone(),
        upsilon,
        omega,
        eps_term,
        decomposition: reg.decomposition,
    })
}
