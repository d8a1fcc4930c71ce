//! Fixed-step closed-loop integration of the augmented state (plant,
//! reference model, parametrization filters, extension filters, adjustable
//! parameters) and the registry of the three builtin experiment cases.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::{
    baseline_drem_derivative, baseline_gradient_derivative, baseline_rls_derivative,
    gdrem_law_derivative, EstimatorKind,
};
use crate::gdrem::{extend_derivatives, indistinguishable_params, mix, regularize, GdremConfig};
use crate::linalg::pinv;
use crate::mrac::{
    compute_control, compute_gains, parametrize_step, plant_derivative, reference_derivative,
    MracSystem, ParametrizationState,
};
use crate::trace::{Sample, Trace};

/// Estimator selection with its gains.
#[derive(Debug, Clone, Copy)]
pub enum EstimatorConfig {
    Gdrem { gamma0: f64, gamma1: f64 },
    Gradient { gain: f64 },
    Rls { gain0: f64, lambda_f: f64 },
    Drem { gamma: f64 },
}

impl EstimatorConfig {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            Self::Gdrem { .. } => EstimatorKind::Gdrem,
            Self::Gradient { .. } => EstimatorKind::Gradient,
            Self::Rls { .. } => EstimatorKind::Rls,
            Self::Drem { .. } => EstimatorKind::Drem,
        }
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub system: MracSystem,
    pub gdrem: GdremConfig,
    pub estimator: EstimatorConfig,
    /// Parametrization filter gain.
    pub l: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Subsampling stride for the recorded trace.
    pub record_every: usize,
    pub case_id: Option<u8>,
    pub label: String,
    /// Initial adjustable parameters (p x m); zero by default.
    pub theta_hat0: DMatrix<f64>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.gdrem.validate()?;
        if self.dt <= 0.0 {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_final <= self.dt {
            return Err(Error::Config(format!(
                "t_final must exceed dt, got t_final = {}, dt = {}",
                self.t_final, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be >= 1".into()));
        }
        if self.l <= 0.0 {
            return Err(Error::Config(format!("l must be positive, got {}", self.l)));
        }
        if self.system.kappa <= 0.0 {
            return Err(Error::Config(format!(
                "kappa must be positive, got {}",
                self.system.kappa
            )));
        }
        match self.estimator {
            EstimatorConfig::Gdrem { gamma0, gamma1 } => {
                if gamma0 <= 0.0 || gamma1 <= 0.0 {
                    return Err(Error::Config(format!(
                        "gamma0 and gamma1 must be positive, got {gamma0}, {gamma1}"
                    )));
                }
                let floor = 1.0 / (2.0 * self.system.kappa);
                if gamma0 <= floor {
                    return Err(Error::Config(format!(
                        "closed-loop stability requires gamma0 > 1/(2 kappa) = {floor}, got gamma0 = {gamma0}"
                    )));
                }
            }
            EstimatorConfig::Gradient { gain } => {
                if gain <= 0.0 {
                    return Err(Error::Config(format!("gradient gain must be positive, got {gain}")));
                }
            }
            EstimatorConfig::Rls { gain0, lambda_f } => {
                if gain0 <= 0.0 || lambda_f <= 0.0 {
                    return Err(Error::Config(format!(
                        "RLS gains must be positive, got gain0 = {gain0}, lambda_f = {lambda_f}"
                    )));
                }
            }
            EstimatorConfig::Drem { gamma } => {
                if gamma <= 0.0 {
                    return Err(Error::Config(format!("DREM gamma must be positive, got {gamma}")));
                }
            }
        }
        let (p, m) = (self.system.dims.2, self.system.dims.1);
        if self.theta_hat0.shape() != (p, m) {
            return Err(Error::Config(format!(
                "theta_hat0 must be {p}x{m}, got {:?}",
                self.theta_hat0.shape()
            )));
        }
        Ok(())
    }
}

fn paper_system(
    p: usize,
    theta_of_t: crate::mrac::ThetaFn,
    psi: crate::mrac::RegressorFn,
) -> Result<MracSystem> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let a_ref = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -5.2915, -3.2547]);
    let b_ref = &b * -5.2915;
    let q = DMatrix::identity(2, 2);
    let (k_x, k_r, p_lyap) = compute_gains(&a, &b, &a_ref, &b_ref, &q)?;
    let b_pinv = pinv(&b)?;
    Ok(MracSystem {
        a,
        b,
        a_ref,
        b_ref,
        k_x,
        k_r,
        p_lyap,
        q,
        kappa: 1.0,
        b_pinv,
        theta_of_t,
        psi,
        z_cmd: Arc::new(|_| DVector::from_element(1, 1.0)),
        x0: DVector::from_vec(vec![-1.0, 0.0]),
        x0_ref: DVector::from_vec(vec![-1.0, 0.0]),
        dims: (2, 1, p),
    })
}

/// Builtin experiment cases with the published parameter block:
/// k = l = 10, mu = eps = 1e-8, eps_bar = 1e-17, kappa = gamma1 = 1,
/// gamma0 = 10, Q = I, x0 = x0ref = [-1, 0].
pub fn build_case(case_id: u8) -> Result<ScenarioConfig> {
    let (p, theta_of_t, psi, t_final): (usize, crate::mrac::ThetaFn, crate::mrac::RegressorFn, f64) =
        match case_id {
            1 => (
                2,
                Arc::new(|_t: f64| DMatrix::from_column_slice(2, 1, &[-1.75, 0.5])),
                Arc::new(|_x: &DVector<f64>, t: f64| {
                    if t < 5.0 {
                        DVector::from_vec(vec![1.0, -5.0 * (10.0 * t).cos()])
                    } else {
                        DVector::from_vec(vec![(10.0 * t).cos(), -5.0 * (10.0 * t).cos()])
                    }
                }),
                10.0,
            ),
            2 => (
                2,
                Arc::new(|t: f64| DMatrix::from_column_slice(2, 1, &[-1.75 * (25.0 * t).sin(), 0.5])),
                Arc::new(|_x: &DVector<f64>, t: f64| {
                    DVector::from_vec(vec![(10.0 * t).cos(), -5.0 * (10.0 * t).cos()])
                }),
                10.0,
            ),
            3 => (
                5,
                Arc::new(|_t: f64| {
                    DMatrix::from_column_slice(5, 1, &[-22.22, 23.74, -82.66, 31.45, 73.33])
                }),
                Arc::new(|x: &DVector<f64>, _t: f64| {
                    DVector::from_vec(vec![
                        x[0],
                        x[1],
                        x[0].abs() * x[1],
                        x[1].abs() * x[1],
                        x[0].powi(3),
                    ])
                }),
                20.0,
            ),
            other => return Err(Error::Config(format!("unknown builtin case {other} (expected 1, 2 or 3)"))),
        };
    let system = paper_system(p, theta_of_t, psi)?;
    Ok(ScenarioConfig {
        system,
        gdrem: GdremConfig {
            k0: 10.0,
            epsilon: 1e-8,
            epsilon_bar: 1e-17,
            mu: 1e-8,
        },
        estimator: EstimatorConfig::Gdrem {
            gamma0: 10.0,
            gamma1: 1.0,
        },
        l: 10.0,
        dt: 1e-4,
        t_final,
        record_every: 10,
        case_id: Some(case_id),
        label: format!("case{case_id}"),
        theta_hat0: DMatrix::zeros(p, 1),
    })
}

/// Classical 4th-order Runge-Kutta update of a flat state vector.
pub fn rk4_step(
    state: &DVector<f64>,
    t: f64,
    dt: f64,
    rhs: &mut dyn FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
) -> Result<DVector<f64>> {
    let k1 = rhs(t, state)?;
    let k2 = rhs(t + 0.5 * dt, &(state + 0.5 * dt * &k1))?;
    let k3 = rhs(t + 0.5 * dt, &(state + 0.5 * dt * &k2))?;
    let k4 = rhs(t + dt, &(state + dt * &k3))?;
    Ok(state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Offsets of the augmented-state blocks in the flat vector.
struct Layout {
    n: usize,
    m: usize,
    p: usize,
    x: usize,
    x_ref: usize,
    psi_bar: usize,
    e_bar: usize,
    v_bar: usize,
    phi: usize,
    y: usize,
    d: usize,
    theta_hat: usize,
    gamma_rls: Option<usize>,
    total: usize,
}

impl Layout {
    fn new(n: usize, m: usize, p: usize, rls: bool) -> Self {
        let x = 0;
        let x_ref = x + n;
        let psi_bar = x_ref + n;
        let e_bar = psi_bar + p;
        let v_bar = e_bar + n;
        let phi = v_bar + m;
        let y = phi + p * p;
        let d = y + p * m;
        let theta_hat = d + p * m;
        let after = theta_hat + p * m;
        let (gamma_rls, total) = if rls {
            (Some(after), after + p * p)
        } else {
            (None, after)
        };
        Layout {
            n,
            m,
            p,
            x,
            x_ref,
            psi_bar,
            e_bar,
            v_bar,
            phi,
            y,
            d,
            theta_hat,
            gamma_rls,
            total,
        }
    }

    fn vec(&self, s: &DVector<f64>, off: usize, len: usize) -> DVector<f64> {
        DVector::from_iterator(len, s.as_slice()[off..off + len].iter().copied())
    }

    fn mat(&self, s: &DVector<f64>, off: usize, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(rows, cols, &s.as_slice()[off..off + rows * cols])
    }

    fn put_vec(&self, dst: &mut DVector<f64>, off: usize, v: &DVector<f64>) {
        dst.as_mut_slice()[off..off + v.len()].copy_from_slice(v.as_slice());
    }

    fn put_mat(&self, dst: &mut DVector<f64>, off: usize, m: &DMatrix<f64>) {
        dst.as_mut_slice()[off..off + m.len()].copy_from_slice(m.as_slice());
    }
}

/// Everything the recorder needs about one evaluation point.
struct StepOutputs {
    psi: DVector<f64>,
    e_ref: DVector<f64>,
    u: DVector<f64>,
    u_bl: DVector<f64>,
    u_ad: DVector<f64>,
    u_nd: DVector<f64>,
    phi_bar: DVector<f64>,
    z: DVector<f64>,
    omega: f64,
    lambdas: DVector<f64>,
    rank: usize,
    theta_hat: DMatrix<f64>,
    theta_cap: DMatrix<f64>,
    theta_true: DMatrix<f64>,
    eps_norm: f64,
    projector: DMatrix<f64>,
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    layout: Layout,
    /// B-pseudoinverse applied to e_ref(t0+), used by the
    /// decaying-disturbance diagnostic input of the extension.
    b_pinv_eref0: DVector<f64>,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let (n, m, p) = cfg.system.dims;
        let layout = Layout::new(n, m, p, matches!(cfg.estimator, EstimatorConfig::Rls { .. }));
        let e_ref0 = &cfg.system.x0 - &cfg.system.x0_ref;
        let b_pinv_eref0 = &cfg.system.b_pinv * e_ref0;
        Runner {
            cfg,
            layout,
            b_pinv_eref0,
        }
    }

    fn initial_state(&self) -> DVector<f64> {
        let lay = &self.layout;
        let mut s = DVector::zeros(lay.total);
        lay.put_vec(&mut s, lay.x, &self.cfg.system.x0);
        lay.put_vec(&mut s, lay.x_ref, &self.cfg.system.x0_ref);
        lay.put_mat(&mut s, lay.theta_hat, &self.cfg.theta_hat0);
        if let Some(off) = lay.gamma_rls {
            if let EstimatorConfig::Rls { gain0, .. } = self.cfg.estimator {
                lay.put_mat(&mut s, off, &(DMatrix::identity(lay.p, lay.p) * gain0));
            }
        }
        s
    }

    /// One full right-hand-side evaluation at (t, state).
    fn eval(&self, t: f64, state: &DVector<f64>) -> Result<(DVector<f64>, StepOutputs)> {
        let lay = &self.layout;
        let sys = &self.cfg.system;
        let (n, m, p) = (lay.n, lay.m, lay.p);

        let x = lay.vec(state, lay.x, n);
        let x_ref = lay.vec(state, lay.x_ref, n);
        let psi_bar = lay.vec(state, lay.psi_bar, p);
        let e_bar = lay.vec(state, lay.e_bar, n);
        let v_bar = lay.vec(state, lay.v_bar, m);
        let phi = {
            let mut ph = lay.mat(state, lay.phi, p, p);
            // the right-hand side is symmetric; kill integrator roundoff skew
            ph = 0.5 * (&ph + ph.transpose());
            ph
        };
        let y = lay.mat(state, lay.y, p, m);
        let d = lay.mat(state, lay.d, p, m);
        let theta_hat = lay.mat(state, lay.theta_hat, p, m);

        let e_ref = &x - &x_ref;
        let psi_val = (sys.psi)(&x, t);
        let z_cmd_val = (sys.z_cmd)(t);
        let theta_true = (sys.theta_of_t)(t);

        let ctrl = compute_control(sys, &x, &x_ref, &z_cmd_val, &theta_hat, &psi_val);
        let par = ParametrizationState {
            psi_bar: psi_bar.clone(),
            e_bar: e_bar.clone(),
            v_bar: v_bar.clone(),
            l: self.cfg.l,
        };
        let pstep = parametrize_step(&par, sys, &e_ref, &psi_val, &ctrl.u_ad, &ctrl.u_nd);

        // decaying disturbance input of the extension: phibar times the
        // residual of the parametrization identity at nonzero e_ref(t0+)
        let decay = (-self.cfg.l * t).exp() / pstep.denom;
        let decay_vec: DVector<f64> = decay * &self.b_pinv_eref0;
        let decay_input = &pstep.phi_bar * decay_vec.transpose();

        let (dphi, dy, dd) = extend_derivatives(
            self.cfg.gdrem.k0,
            &phi,
            &y,
            &d,
            &pstep.phi_bar,
            &pstep.z,
            &decay_input,
        )?;

        let reg = regularize(&phi, &self.cfg.gdrem)?;
        let (upsilon, omega) = mix(&reg, &y);
        let theta_cap = indistinguishable_params(&theta_true, &reg.decomposition);
        let eps_term = crate::gdrem::decay_diagnostic(&reg, &d);

        let dx = plant_derivative(sys, &x, &ctrl.u, &psi_val, t)?;
        let dx_ref = reference_derivative(sys, &x_ref, &z_cmd_val);

        let mut deriv = DVector::zeros(lay.total);
        lay.put_vec(&mut deriv, lay.x, &dx);
        lay.put_vec(&mut deriv, lay.x_ref, &dx_ref);
        lay.put_vec(&mut deriv, lay.psi_bar, &pstep.d_psi_bar);
        lay.put_vec(&mut deriv, lay.e_bar, &pstep.d_e_bar);
        lay.put_vec(&mut deriv, lay.v_bar, &pstep.d_v_bar);
        lay.put_mat(&mut deriv, lay.phi, &dphi);
        lay.put_mat(&mut deriv, lay.y, &dy);
        lay.put_mat(&mut deriv, lay.d, &dd);

        let dtheta_hat = match self.cfg.estimator {
            EstimatorConfig::Gdrem { gamma0, gamma1 } => {
                gdrem_law_derivative(&theta_hat, omega, &upsilon, &self.cfg.gdrem, gamma0, gamma1)?
            }
            EstimatorConfig::Gradient { gain } => baseline_gradient_derivative(
                &theta_hat,
                &pstep.phi_bar,
                &pstep.z,
                &(DMatrix::identity(p, p) * gain),
            )?,
            EstimatorConfig::Rls { lambda_f, .. } => {
                let off = lay.gamma_rls.expect("RLS layout");
                let gamma = lay.mat(state, off, p, p);
                let (dth, dg) =
                    baseline_rls_derivative(&theta_hat, &gamma, &pstep.phi_bar, &pstep.z, lambda_f)?;
                lay.put_mat(&mut deriv, off, &dg);
                dth
            }
            EstimatorConfig::Drem { gamma } => baseline_drem_derivative(&theta_hat, &phi, &y, gamma)?,
        };
        lay.put_mat(&mut deriv, lay.theta_hat, &dtheta_hat);

        if deriv.iter().any(|v| !v.is_finite()) {
            let component = self.name_nonfinite_block(&deriv);
            return Err(Error::IntegrationFailure { t, component });
        }

        let outputs = StepOutputs {
            psi: psi_val,
            e_ref,
            u: ctrl.u,
            u_bl: ctrl.u_bl,
            u_ad: ctrl.u_ad,
            u_nd: ctrl.u_nd,
            phi_bar: pstep.phi_bar,
            z: pstep.z,
            omega,
            lambdas: reg.decomposition.lambdas.clone(),
            rank: reg.decomposition.rank,
            theta_hat,
            theta_cap,
            theta_true,
            eps_norm: eps_term.norm(),
            projector: reg.decomposition.nullspace_projector.clone(),
        };
        Ok((deriv, outputs))
    }

    fn name_nonfinite_block(&self, deriv: &DVector<f64>) -> String {
        let lay = &self.layout;
        let blocks: Vec<(&str, usize, usize)> = vec![
            ("plant state x", lay.x, lay.n),
            ("reference state x_ref", lay.x_ref, lay.n),
            ("filter Psi_bar", lay.psi_bar, lay.p),
            ("filter e_bar", lay.e_bar, lay.n),
            ("filter v_bar", lay.v_bar, lay.m),
            ("extension phi", lay.phi, lay.p * lay.p),
            ("extension y", lay.y, lay.p * lay.m),
            ("diagnostic d", lay.d, lay.p * lay.m),
            ("estimate theta_hat", lay.theta_hat, lay.p * lay.m),
        ];
        for (name, off, len) in blocks {
            if deriv.as_slice()[off..off + len].iter().any(|v| !v.is_finite()) {
                return name.to_string();
            }
        }
        "RLS gain matrix".to_string()
    }

    fn sample(&self, t: f64, state: &DVector<f64>, out: &StepOutputs) -> Sample {
        let lay = &self.layout;
        Sample {
            t,
            x: lay.vec(state, lay.x, lay.n),
            x_ref: lay.vec(state, lay.x_ref, lay.n),
            e_ref: out.e_ref.clone(),
            u: out.u.clone(),
            u_bl: out.u_bl.clone(),
            u_ad: out.u_ad.clone(),
            u_nd: out.u_nd.clone(),
            phi_bar: out.phi_bar.clone(),
            z: out.z.clone(),
            omega: out.omega,
            lambdas: out.lambdas.clone(),
            rank: out.rank,
            theta_hat: out.theta_hat.clone(),
            theta_cap: out.theta_cap.clone(),
            norm_theta_cap_err: (&out.theta_hat - &out.theta_cap).norm(),
            norm_theta_err: (&out.theta_hat - &out.theta_true).norm(),
            eps_norm: out.eps_norm,
            projector: out.projector.clone(),
            psi: out.psi.clone(),
            theta_true: out.theta_true.clone(),
        }
    }
}

/// Run one scenario to completion and return the recorded trace.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace> {
    cfg.validate()?;
    let runner = Runner::new(cfg);
    let (n, m, p) = cfg.system.dims;
    let mut trace = Trace::new(n, m, p);
    let mut state = runner.initial_state();
    let steps = (cfg.t_final / cfg.dt).round() as usize;

    for step in 0..steps {
        let t = step as f64 * cfg.dt;
        let (k1, out) = runner.eval(t, &state)?;
        if step % cfg.record_every == 0 {
            trace.push(runner.sample(t, &state, &out))?;
        }
        let dt = cfg.dt;
        let k2 = runner.eval(t + 0.5 * dt, &(&state + 0.5 * dt * &k1))?.0;
        let k3 = runner.eval(t + 0.5 * dt, &(&state + 0.5 * dt * &k2))?.0;
        let k4 = runner.eval(t + dt, &(&state + dt * &k3))?.0;
        state += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure {
                t: t + dt,
                component: "augmented state after step".into(),
            });
        }
    }
    let t_final = steps as f64 * cfg.dt;
    let (_, out) = runner.eval(t_final, &state)?;
    trace.push(runner.sample(t_final, &state, &out))?;
    Ok(trace)
}
