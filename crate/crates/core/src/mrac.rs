//! Plant, reference model, three-term control law and the measurable
//! parametrization producing the normalized regression pair (phibar, z).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{pinv, solve_lyapunov};

/// Ground-truth uncertainty parameters as a function of time (p x m).
pub type ThetaFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
/// Regressor Psi(x, t) (length p).
pub type RegressorFn = Arc<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync>;
/// Reference command z_cmd(t) (length m).
pub type CommandFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Configured closed-loop system: plant, reference model, gains and the
/// uncertainty ground truth. Immutable and shareable between runs.
#[derive(Clone)]
pub struct MracSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub a_ref: DMatrix<f64>,
    pub b_ref: DMatrix<f64>,
    pub k_x: DMatrix<f64>,
    pub k_r: DMatrix<f64>,
    pub p_lyap: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub kappa: f64,
    pub b_pinv: DMatrix<f64>,
    pub theta_of_t: ThetaFn,
    pub psi: RegressorFn,
    pub z_cmd: CommandFn,
    pub x0: DVector<f64>,
    pub x0_ref: DVector<f64>,
    /// State, input and regressor dimensions (n, m, p).
    pub dims: (usize, usize, usize),
}

impl std::fmt::Debug for MracSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MracSystem")
            .field("dims", &self.dims)
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}

/// Feedback/feedforward gains and the Lyapunov matrix for a matched pair of
/// plant and reference model:
/// `K_x = -B^dag (A - A_ref)`, `K_r = B^dag B_ref`, `A_ref^T P + P A_ref = -Q`.
pub fn compute_gains(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a_ref: &DMatrix<f64>,
    b_ref: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || a_ref.shape() != (n, n) || b_ref.shape() != (n, m) {
        return Err(Error::shape(
            "compute_gains",
            format!("A {n}x{n}, B {n}x{m}, A_ref {n}x{n}, B_ref {n}x{m}"),
            format!("A_ref {:?}, B_ref {:?}", a_ref.shape(), b_ref.shape()),
        ));
    }
    let b_dag = pinv(b)?;
    // matched-model condition: A - A_ref and B_ref must lie in the range of B
    let proj = DMatrix::identity(n, n) - b * &b_dag;
    let mismatch_a = (&proj * (a - a_ref)).norm();
    let mismatch_b = (&proj * b_ref).norm();
    let scale = 1.0 + a.norm() + a_ref.norm() + b_ref.norm();
    if mismatch_a > 1e-9 * scale || mismatch_b > 1e-9 * scale {
        return Err(Error::ModelMismatch {
            reason: format!(
                "(I - B B^dag)(A - A_ref) norm {:.3e}, (I - B B^dag) B_ref norm {:.3e}",
                mismatch_a, mismatch_b
            ),
        });
    }
    let k_x = -(&b_dag * (a - a_ref));
    let k_r = &b_dag * b_ref;
    let p = solve_lyapunov(a_ref, q)?;
    Ok((k_x, k_r, p))
}

/// The four terms of the control law: baseline, adaptive and nonlinear
/// damping, plus their sum.
pub struct ControlTerms {
    pub u: DVector<f64>,
    pub u_bl: DVector<f64>,
    pub u_ad: DVector<f64>,
    pub u_nd: DVector<f64>,
}

/// u = K_x x + K_r z_cmd + theta_hat^T Psi - kappa B^T P e_ref Psi^T Psi.
pub fn compute_control(
    sys: &MracSystem,
    x: &DVector<f64>,
    x_ref: &DVector<f64>,
    z_cmd_val: &DVector<f64>,
    theta_hat: &DMatrix<f64>,
    psi_val: &DVector<f64>,
) -> ControlTerms {
    let e_ref = x - x_ref;
    let u_bl = &sys.k_x * x + &sys.k_r * z_cmd_val;
    let u_ad = theta_hat.transpose() * psi_val;
    let psi_sq = psi_val.dot(psi_val);
    let u_nd = -sys.kappa * psi_sq * (sys.b.transpose() * &sys.p_lyap * e_ref);
    let u = &u_bl + &u_ad + &u_nd;
    ControlTerms { u, u_bl, u_ad, u_nd }
}

/// dx/dt = A x + B (u - theta^T(t) Psi(x, t)).
pub fn plant_derivative(
    sys: &MracSystem,
    x: &DVector<f64>,
    u: &DVector<f64>,
    psi_val: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    if psi_val.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure {
            t,
            component: "regressor Psi(x, t)".into(),
        });
    }
    let theta = (sys.theta_of_t)(t);
    Ok(&sys.a * x + &sys.b * (u - theta.transpose() * psi_val))
}

/// dx_ref/dt = A_ref x_ref + B_ref z_cmd.
pub fn reference_derivative(
    sys: &MracSystem,
    x_ref: &DVector<f64>,
    z_cmd_val: &DVector<f64>,
) -> DVector<f64> {
    &sys.a_ref * x_ref + &sys.b_ref * z_cmd_val
}

/// Filter states of the measurable parametrization plus the per-step
/// normalized regression pair.
#[derive(Debug, Clone)]
pub struct ParametrizationState {
    pub psi_bar: DVector<f64>,
    pub e_bar: DVector<f64>,
    pub v_bar: DVector<f64>,
    pub l: f64,
}

/// Output of one parametrization evaluation.
pub struct ParametrizationStep {
    /// Normalized regressor phibar = Psibar / (1 + Psibar^T Psibar).
    pub phi_bar: DVector<f64>,
    /// Normalized regressand z (length m).
    pub z: DVector<f64>,
    pub d_psi_bar: DVector<f64>,
    pub d_e_bar: DVector<f64>,
    pub d_v_bar: DVector<f64>,
    /// Normalization denominator 1 + Psibar^T Psibar (>= 1).
    pub denom: f64,
}

/// Evaluate the normalized regression pair and the three filter derivatives.
pub fn parametrize_step(
    par: &ParametrizationState,
    sys: &MracSystem,
    e_ref: &DVector<f64>,
    psi_val: &DVector<f64>,
    u_ad: &DVector<f64>,
    u_nd: &DVector<f64>,
) -> ParametrizationStep {
    let denom = 1.0 + par.psi_bar.dot(&par.psi_bar);
    let phi_bar = &par.psi_bar / denom;
    let chi = e_ref - par.l * &par.e_bar - &sys.a_ref * &par.e_bar;
    let z = -(&sys.b_pinv * chi - &par.v_bar) / denom;
    let d_psi_bar = -par.l * &par.psi_bar + psi_val;
    let d_e_bar = -par.l * &par.e_bar + e_ref;
    let d_v_bar = -par.l * &par.v_bar + u_ad + u_nd;
    ParametrizationStep {
        phi_bar,
        z,
        d_psi_bar,
        d_e_bar,
        d_v_bar,
        denom,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paper_plant() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let a_ref = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -5.2915, -3.2547]);
        let b_ref = &b * -5.2915;
        let q = DMatrix::identity(2, 2);
        (a, b, a_ref, b_ref, q)
    }

    fn test_system() -> MracSystem {
        let (a, b, a_ref, b_ref, q) = paper_plant();
        let (k_x, k_r, p) = compute_gains(&a, &b, &a_ref, &b_ref, &q).unwrap();
        let b_pinv = pinv(&b).unwrap();
        MracSystem {
            a,
            b,
            a_ref,
            b_ref,
            k_x,
            k_r,
            p_lyap: p,
            q,
            kappa: 1.0,
            b_pinv,
            theta_of_t: Arc::new(|_| DMatrix::from_column_slice(2, 1, &[-1.75, 0.5])),
            psi: Arc::new(|_, t| DVector::from_vec(vec![1.0, -5.0 * (10.0 * t).cos()])),
            z_cmd: Arc::new(|_| DVector::from_element(1, 1.0)),
            x0: DVector::from_vec(vec![-1.0, 0.0]),
            x0_ref: DVector::from_vec(vec![-1.0, 0.0]),
            dims: (2, 1, 2),
        }
    }

    #[test]
    fn gains_match_reference_values() {
        let (a, b, a_ref, b_ref, q) = paper_plant();
        let (k_x, k_r, p) = compute_gains(&a, &b, &a_ref, &b_ref, &q).unwrap();
        assert_abs_diff_eq!(k_x[(0, 0)], -5.2915, epsilon = 1e-9);
        assert_abs_diff_eq!(k_x[(0, 1)], -3.2547, epsilon = 1e-9);
        assert_abs_diff_eq!(k_r[(0, 0)], -5.2915, epsilon = 1e-9);
        // reconstruction invariants
        assert!(((&a + &b * &k_x) - &a_ref).norm() < 1e-9);
        assert!((&b * &k_r - &b_ref).norm() < 1e-9);
        assert!((a_ref.transpose() * &p + &p * &a_ref + &q).norm() <= 1e-9 * q.norm());
    }

    #[test]
    fn gains_trivial_when_already_matched() {
        let (_, b, a_ref, _, q) = paper_plant();
        let (k_x, k_r, _) = compute_gains(&a_ref, &b, &a_ref, &b, &q).unwrap();
        assert!(k_x.norm() < 1e-12);
        assert!((k_r - DMatrix::identity(1, 1)).norm() < 1e-12);
    }

    #[test]
    fn gains_random_matched_instance() {
        // companion-form pair: A and A_ref differ only in the last row,
        // which lies in the range of B = e_n, so matching always holds
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 3;
        let b = DMatrix::from_column_slice(n, 1, &[0.0, 0.0, 1.0]);
        let mut a = DMatrix::zeros(n, n);
        a[(0, 1)] = 1.0;
        a[(1, 2)] = 1.0;
        for j in 0..n {
            a[(n - 1, j)] = rng.gen_range(-2.0..2.0);
        }
        // char poly (s+1)(s+2)(s+3) = s^3 + 6 s^2 + 11 s + 6
        let mut a_ref = a.clone();
        a_ref[(n - 1, 0)] = -6.0;
        a_ref[(n - 1, 1)] = -11.0;
        a_ref[(n - 1, 2)] = -6.0;
        let q = DMatrix::identity(n, n);
        let b_ref = &b * 2.0;
        let (k_x, k_r, p) = compute_gains(&a, &b, &a_ref, &b_ref, &q).unwrap();
        assert!(((&a + &b * k_x) - &a_ref).norm() < 1e-8);
        assert!((&b * k_r - &b_ref).norm() < 1e-8);
        assert!((a_ref.transpose() * &p + &p * &a_ref + &q).norm() < 1e-8);
    }

    #[test]
    fn gains_reject_mismatch() {
        let (a, b, _, b_ref, q) = paper_plant();
        // A - A_ref outside the range of B
        let a_bad = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -5.2915, -3.2547]);
        assert!(matches!(
            compute_gains(&a, &b, &a_bad, &b_ref, &q),
            Err(Error::ModelMismatch { .. })
        ));
    }

    #[test]
    fn control_terms() {
        let sys = test_system();
        // x = [-1, 0], z_cmd = 1: u_bl = 5.2915 - 5.2915 = 0
        let x = DVector::from_vec(vec![-1.0, 0.0]);
        let c = compute_control(
            &sys,
            &x,
            &x,
            &DVector::from_element(1, 1.0),
            &DMatrix::zeros(2, 1),
            &DVector::from_vec(vec![1.0, -5.0]),
        );
        assert_abs_diff_eq!(c.u_bl[0], 0.0, epsilon = 1e-12);
        // e_ref = 0 -> u_nd = 0; theta_hat = 0 -> u_ad = 0
        assert_eq!(c.u_nd.norm(), 0.0);
        assert_eq!(c.u_ad.norm(), 0.0);
    }

    #[test]
    fn perfect_cancellation_keeps_error_zero() {
        let sys = test_system();
        let x = DVector::from_vec(vec![0.3, -0.2]);
        let t = 0.7;
        let psi_val = (sys.psi)(&x, t);
        let theta = (sys.theta_of_t)(t);
        let z1 = DVector::from_element(1, 1.0);
        // u = u_bl + theta^T Psi cancels the uncertainty exactly
        let u = &sys.k_x * &x + &sys.k_r * &z1 + theta.transpose() * &psi_val;
        let dx = plant_derivative(&sys, &x, &u, &psi_val, t).unwrap();
        let dref = reference_derivative(&sys, &x, &z1);
        assert!((dx - dref).norm() < 1e-12);
    }

    #[test]
    fn case3_regressor_by_hand() {
        // Wing-Rock regressor at x = [1, -2]: [1, -2, -2, -4, 1]
        let psi = |x: &DVector<f64>| {
            DVector::from_vec(vec![
                x[0],
                x[1],
                x[0].abs() * x[1],
                x[1].abs() * x[1],
                x[0].powi(3),
            ])
        };
        let v = psi(&DVector::from_vec(vec![1.0, -2.0]));
        assert_eq!(v.as_slice(), &[1.0, -2.0, -2.0, -4.0, 1.0]);
    }

    #[test]
    fn plant_rejects_nonfinite_regressor() {
        let sys = test_system();
        let x = DVector::zeros(2);
        let bad = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(matches!(
            plant_derivative(&sys, &x, &DVector::zeros(1), &bad, 1.0),
            Err(Error::IntegrationFailure { .. })
        ));
    }

    #[test]
    fn parametrization_rest_initial_condition() {
        let sys = test_system();
        let par = ParametrizationState {
            psi_bar: DVector::zeros(2),
            e_bar: DVector::zeros(2),
            v_bar: DVector::zeros(1),
            l: 10.0,
        };
        let step = parametrize_step(
            &par,
            &sys,
            &DVector::zeros(2),
            &DVector::from_vec(vec![1.0, -5.0]),
            &DVector::zeros(1),
            &DVector::zeros(1),
        );
        assert_eq!(step.z.norm(), 0.0);
        assert_eq!(step.phi_bar.norm(), 0.0);
        assert!(step.denom >= 1.0);
    }

    #[test]
    fn normalized_regressor_bounded() {
        let sys = test_system();
        // |phibar| = |Psibar| / (1 + |Psibar|^2) <= 1/2 for any Psibar
        for s in [0.0, 0.3, 1.0, 7.0, 1e4] {
            let par = ParametrizationState {
                psi_bar: DVector::from_vec(vec![s, -s]),
                e_bar: DVector::zeros(2),
                v_bar: DVector::zeros(1),
                l: 10.0,
            };
            let step = parametrize_step(
                &par,
                &sys,
                &DVector::zeros(2),
                &DVector::zeros(2),
                &DVector::zeros(1),
                &DVector::zeros(1),
            );
            assert!(step.phi_bar.norm() <= 0.5 + 1e-12);
        }
    }
}
