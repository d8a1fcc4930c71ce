//! Small dense symmetric linear algebra used by the estimator pipeline:
//! eigendecomposition, adjugate/determinant, continuous Lyapunov solve and
//! Moore-Penrose pseudoinverse. Matrices in this problem class are tiny
//! (p <= 5), so everything is direct and allocation costs are irrelevant.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const JACOBI_SWEEP_LIMIT: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-14;

/// Eigenvalue decomposition of a symmetric positive semidefinite matrix,
/// split into range (`v1`) and nullspace (`v2`) at a rank threshold.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Orthogonal matrix, columns are eigenvectors ordered by descending eigenvalue.
    pub v: DMatrix<f64>,
    /// Eigenvalues, descending. Near-zero negatives are clamped to zero.
    pub lambdas: DVector<f64>,
    /// Count of eigenvalues >= the rank threshold.
    pub rank: usize,
    /// Eigenspace basis (first `rank` columns of `v`).
    pub v1: DMatrix<f64>,
    /// Nullspace basis (remaining columns of `v`).
    pub v2: DMatrix<f64>,
    /// `v2 * v2^T`; basis-sign invariant, idempotent, symmetric.
    pub nullspace_projector: DMatrix<f64>,
}

impl SymEig {
    pub fn dim(&self) -> usize {
        self.v.nrows()
    }
}

/// Adjugate and determinant of a square matrix.
#[derive(Debug, Clone)]
pub struct AdjDet {
    pub adj: DMatrix<f64>,
    pub det: f64,
}

fn check_symmetric(s: &DMatrix<f64>) -> Result<()> {
    let scale = 1.0 + s.amax();
    let tol = 1e-9 * scale;
    let mut max_asym: f64 = 0.0;
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            max_asym = max_asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if max_asym > tol {
        return Err(Error::SymmetryViolation { max_asym, tol });
    }
    Ok(())
}

fn off_diag_norm(a: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are returned in descending order with a deterministic
/// eigenvector sign (largest-magnitude entry of each column made positive).
/// `rank_threshold` splits the spectrum into range and nullspace parts.
pub fn sym_eig(s: &DMatrix<f64>, rank_threshold: f64) -> Result<SymEig> {
    let p = s.nrows();
    if p == 0 || s.ncols() != p {
        return Err(Error::shape("sym_eig", "square p x p, p >= 1", format!("{}x{}", p, s.ncols())));
    }
    check_symmetric(s)?;

    let scale = 1.0 + s.norm();
    // work on the symmetrized copy so tolerated asymmetry cannot bias rotations
    let mut a = DMatrix::from_fn(p, p, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = DMatrix::<f64>::identity(p, p);

    let mut converged = false;
    for _ in 0..JACOBI_SWEEP_LIMIT {
        if off_diag_norm(&a) <= JACOBI_OFF_TOL * scale {
            converged = true;
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = a[(i, j)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(j, j)] - a[(i, i)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // A <- J^T A J with the Givens rotation J acting on (i, j)
                for k in 0..p {
                    let aki = a[(k, i)];
                    let akj = a[(k, j)];
                    a[(k, i)] = c * aki - sn * akj;
                    a[(k, j)] = sn * aki + c * akj;
                }
                for k in 0..p {
                    let aik = a[(i, k)];
                    let ajk = a[(j, k)];
                    a[(i, k)] = c * aik - sn * ajk;
                    a[(j, k)] = sn * aik + c * ajk;
                }
                for k in 0..p {
                    let vki = v[(k, i)];
                    let vkj = v[(k, j)];
                    v[(k, i)] = c * vki - sn * vkj;
                    v[(k, j)] = sn * vki + c * vkj;
                }
            }
        }
    }
    if !converged && off_diag_norm(&a) > JACOBI_OFF_TOL * scale {
        return Err(Error::numerical(format!(
            "Jacobi iteration did not converge in {} sweeps",
            JACOBI_SWEEP_LIMIT
        )));
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[(y, y)].partial_cmp(&a[(x, x)]).unwrap());

    let clamp_tol = 1e-10 * scale;
    let mut lambdas = DVector::zeros(p);
    let mut vecs = DMatrix::zeros(p, p);
    for (col, &idx) in order.iter().enumerate() {
        let mut lam = a[(idx, idx)];
        if lam < 0.0 && lam > -clamp_tol {
            lam = 0.0;
        }
        lambdas[col] = lam;
        // deterministic sign: largest-|entry| positive
        let mut best = 0;
        for k in 1..p {
            if v[(k, idx)].abs() > v[(best, idx)].abs() {
                best = k;
            }
        }
        let sign = if v[(best, idx)] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..p {
            vecs[(k, col)] = sign * v[(k, idx)];
        }
    }

    let rank = lambdas.iter().filter(|&&l| l >= rank_threshold).count();
    let v1 = vecs.columns(0, rank).into_owned();
    let v2 = vecs.columns(rank, p - rank).into_owned();
    let nullspace_projector = &v2 * v2.transpose();

    Ok(SymEig {
        v: vecs,
        lambdas,
        rank,
        v1,
        v2,
        nullspace_projector,
    })
}

fn det_recursive(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    match p {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => {
            let mut det = 0.0;
            for j in 0..p {
                let minor = minor_of(m, 0, j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                det += sign * m[(0, j)] * det_recursive(&minor);
            }
            det
        }
    }
}

fn minor_of(m: &DMatrix<f64>, row: usize, col: usize) -> DMatrix<f64> {
    let p = m.nrows();
    DMatrix::from_fn(p - 1, p - 1, |i, j| {
        let ii = if i < row { i } else { i + 1 };
        let jj = if j < col { j } else { j + 1 };
        m[(ii, jj)]
    })
}

/// Adjugate and determinant by cofactor expansion. Valid for any square
/// matrix including singular ones; for p = 1 the adjugate is [[1]].
pub fn adjugate_det(m: &DMatrix<f64>) -> Result<AdjDet> {
    let p = m.nrows();
    if p == 0 || m.ncols() != p {
        return Err(Error::shape("adjugate_det", "square p x p, p >= 1", format!("{}x{}", p, m.ncols())));
    }
    if p == 1 {
        return Ok(AdjDet {
            adj: DMatrix::from_element(1, 1, 1.0),
            det: m[(0, 0)],
        });
    }
    let mut adj = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            // adj_ij = cofactor_ji
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(i, j)] = sign * det_recursive(&minor_of(m, j, i));
        }
    }
    Ok(AdjDet {
        adj,
        det: det_recursive(m),
    })
}

/// Adjugate and determinant of `V diag(lambdas) V^T` from its spectrum:
/// det = prod(lambda_i), adj = V diag(prod_{j != i} lambda_j) V^T.
///
/// Numerically stable for near-singular input since no division is involved.
pub fn adjugate_det_spectral(v: &DMatrix<f64>, lambdas: &DVector<f64>) -> AdjDet {
    let p = lambdas.len();
    let det: f64 = lambdas.iter().product();
    let mut coeffs = DVector::zeros(p);
    for i in 0..p {
        let mut prod = 1.0;
        for j in 0..p {
            if j != i {
                prod *= lambdas[j];
            }
        }
        coeffs[i] = prod;
    }
    let mut adj = DMatrix::zeros(p, p);
    for i in 0..p {
        let vi = v.column(i);
        for r in 0..p {
            for c in 0..p {
                adj[(r, c)] += coeffs[i] * vi[r] * vi[c];
            }
        }
    }
    AdjDet { adj, det }
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Solve the continuous Lyapunov equation `A_ref^T P + P A_ref + Q = 0`
/// for Hurwitz `A_ref` and symmetric positive definite `Q` through the
/// vectorized linear system.
pub fn solve_lyapunov(a_ref: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a_ref.nrows();
    if a_ref.ncols() != n || q.shape() != (n, n) {
        return Err(Error::shape(
            "solve_lyapunov",
            format!("A_ref {0}x{0}, Q {0}x{0}", n),
            format!("A_ref {}x{}, Q {}x{}", n, a_ref.ncols(), q.nrows(), q.ncols()),
        ));
    }
    check_symmetric(q)?;

    let eye = DMatrix::<f64>::identity(n, n);
    let at = a_ref.transpose();
    // vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P)
    let k = kron(&eye, &at) + kron(&at, &eye);
    let rhs = DVector::from_fn(n * n, |idx, _| -q[(idx % n, idx / n)]);
    let lu = k.lu();
    let vec_p = lu.solve(&rhs).ok_or_else(|| Error::StabilityViolation {
        reason: "vectorized Lyapunov system is singular (A_ref has eigenvalues on the imaginary axis?)".into(),
    })?;
    let mut p = DMatrix::from_fn(n, n, |i, j| vec_p[j * n + i]);
    // symmetrize against roundoff
    p = 0.5 * (&p + p.transpose());

    let residual = (&at * &p + &p * a_ref + q).norm();
    if residual > 1e-9 * q.norm() {
        return Err(Error::StabilityViolation {
            reason: format!("Lyapunov residual {:.3e} exceeds tolerance", residual),
        });
    }
    if p.clone().cholesky().is_none() {
        return Err(Error::StabilityViolation {
            reason: "Lyapunov solution is not positive definite (A_ref not Hurwitz)".into(),
        });
    }
    Ok(p)
}

/// Moore-Penrose pseudoinverse of a full-column-rank matrix:
/// `B^dag = (B^T B)^{-1} B^T`.
pub fn pinv(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let bt = b.transpose();
    let gram = &bt * b;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient { context: "pinv: B^T B is not positive definite".into() })?;
    // nalgebra accepts semidefinite factorizations with zero pivots; reject
    // those explicitly so rank-deficient B is reported instead of Inf output
    let l = chol.l();
    let max_pivot = l.diagonal().iter().fold(0.0f64, |m, &v| m.max(v));
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |m, &v| m.min(v));
    // pivots are square roots, so a condition cutoff of 1e-14 on B^T B
    // becomes a ratio of 1e-7 between the extreme pivots
    if !(min_pivot > 1e-7 * max_pivot) {
        return Err(Error::RankDeficient { context: "pinv: B has (numerically) dependent columns".into() });
    }
    Ok(chol.solve(&bt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn random_psd(rng: &mut impl Rng, p: usize) -> DMatrix<f64> {
        let g = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        &g * g.transpose()
    }

    #[test]
    fn sym_eig_identity() {
        let e = sym_eig(&DMatrix::identity(2, 2), 0.0).unwrap();
        assert_abs_diff_eq!(e.lambdas[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.lambdas[1], 1.0, epsilon = 1e-12);
        assert_eq!(e.rank, 2);
        assert_eq!(e.v2.ncols(), 0);
    }

    #[test]
    fn sym_eig_diagonal_nullspace() {
        let e = sym_eig(&mat(2, 2, &[1.0, 0.0, 0.0, 0.0]), 1e-12).unwrap();
        assert_abs_diff_eq!(e.lambdas[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.lambdas[1], 0.0, epsilon = 1e-12);
        assert_eq!(e.rank, 1);
        // V2 spans e2
        assert_abs_diff_eq!(e.v2[(0, 0)].abs(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.v2[(1, 0)].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sym_eig_closed_form_2x2() {
        // closed-form oracle for [[2,1],[1,2]]: eigenvalues 3, 1 with
        // eigenvectors [1,1]/sqrt(2) and [1,-1]/sqrt(2)
        let e = sym_eig(&mat(2, 2, &[2.0, 1.0, 1.0, 2.0]), 0.0).unwrap();
        assert_abs_diff_eq!(e.lambdas[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.lambdas[1], 1.0, epsilon = 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.v[(0, 0)], s, epsilon = 1e-12);
        assert_abs_diff_eq!(e.v[(1, 0)], s, epsilon = 1e-12);
        assert_abs_diff_eq!(e.v[(0, 1)].abs(), s, epsilon = 1e-12);
        assert_abs_diff_eq!(e.v[(1, 1)].abs(), s, epsilon = 1e-12);
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let r = sym_eig(&mat(2, 2, &[1.0, 2.0, 0.0, 1.0]), 0.0);
        assert!(matches!(r, Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn sym_eig_reconstruction_and_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in 1..=5 {
            for _ in 0..50 {
                let s = random_psd(&mut rng, p);
                let e = sym_eig(&s, 1e-12).unwrap();
                let recon = &e.v * DMatrix::from_diagonal(&e.lambdas) * e.v.transpose();
                assert!((recon - &s).norm() <= 1e-10 * (1.0 + s.norm()));
                let vtv = e.v.transpose() * &e.v;
                assert!((vtv - DMatrix::identity(p, p)).norm() <= 1e-10);
                assert!(e.lambdas.iter().all(|&l| l >= 0.0));
                // projector idempotent + symmetric
                let pr = &e.nullspace_projector;
                assert!((pr * pr - pr).norm() <= 1e-10);
                assert!((pr.transpose() - pr).norm() <= 1e-10);
                // orthogonality chain: phi * V2 V2^T = 0
                assert!((&s * pr).norm() <= 1e-8 * s.norm().max(1e-30));
            }
        }
    }

    #[test]
    fn sym_eig_deterministic_signs() {
        let s = mat(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let a = sym_eig(&s, 0.0).unwrap();
        let b = sym_eig(&s, 0.0).unwrap();
        assert_eq!(a.v.as_slice(), b.v.as_slice());
        for c in 0..3 {
            let col = a.v.column(c);
            let best = (0..3).max_by(|&i, &j| col[i].abs().partial_cmp(&col[j].abs()).unwrap()).unwrap();
            assert!(col[best] > 0.0);
        }
    }

    #[test]
    fn projector_sign_invariance() {
        // flipping nullspace basis signs must not change V2 V2^T
        let s = mat(2, 2, &[1.0, -5.0, -5.0, 25.0]); // vv^T for v = [1, -5], rank 1
        let e = sym_eig(&s, 1e-9).unwrap();
        assert_eq!(e.rank, 1);
        let flipped = -&e.v2;
        let pr = &flipped * flipped.transpose();
        assert!((pr - &e.nullspace_projector).norm() <= 1e-12);
    }

    #[test]
    fn adjugate_det_identity_and_2x2() {
        let r = adjugate_det(&DMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(r.det, 1.0, epsilon = 1e-14);
        assert!((r.adj - DMatrix::identity(2, 2)).norm() < 1e-14);

        let r = adjugate_det(&mat(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(r.det, -2.0, epsilon = 1e-14);
        let expect = mat(2, 2, &[4.0, -2.0, -3.0, 1.0]);
        assert!((r.adj - expect).norm() < 1e-14);
    }

    #[test]
    fn adjugate_det_1x1() {
        let r = adjugate_det(&mat(1, 1, &[3.5])).unwrap();
        assert_abs_diff_eq!(r.det, 3.5, epsilon = 1e-14);
        assert_abs_diff_eq!(r.adj[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn adjugate_identity_property_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in 1..=5 {
            for _ in 0..20 {
                let m = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-2.0..2.0));
                let r = adjugate_det(&m).unwrap();
                let lhs = &r.adj * &m;
                let rhs = DMatrix::identity(p, p) * r.det;
                let tol = 1e-9 * (1.0 + m.norm().powi(p as i32));
                assert!((lhs - rhs).norm() <= tol);
            }
        }
    }

    #[test]
    fn adjugate_spectral_matches_cofactor() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for p in 1..=5 {
            for _ in 0..20 {
                let s = random_psd(&mut rng, p);
                let e = sym_eig(&s, 0.0).unwrap();
                let spec = adjugate_det_spectral(&e.v, &e.lambdas);
                let cof = adjugate_det(&s).unwrap();
                let scale = 1.0 + s.norm().powi(p as i32);
                assert!((spec.det - cof.det).abs() <= 1e-9 * scale);
                assert!((spec.adj - cof.adj).norm() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn adjugate_singular_annihilates() {
        // det = 0 => adj * M = 0
        let m = mat(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 1.0, 1.0, 1.0]);
        let r = adjugate_det(&m).unwrap();
        assert_abs_diff_eq!(r.det, 0.0, epsilon = 1e-12);
        assert!((r.adj * m).norm() <= 1e-12);
    }

    #[test]
    fn lyapunov_trivial() {
        let p = solve_lyapunov(&(-DMatrix::identity(2, 2)), &(2.0 * DMatrix::identity(2, 2))).unwrap();
        assert!((p - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn lyapunov_reference_model() {
        // Kronecker-product oracle values for the second-order reference model
        let a = mat(2, 2, &[0.0, 1.0, -5.2915, -3.2547]);
        let q = DMatrix::identity(2, 2);
        let p = solve_lyapunov(&a, &q).unwrap();
        let expect = mat(2, 2, &[1.27406573, 0.09449117, 0.09449117, 0.18265621]);
        assert!((&p - expect).norm() < 1e-7);
        assert!((a.transpose() * &p + &p * &a + &q).norm() <= 1e-9 * q.norm());
    }

    #[test]
    fn lyapunov_random_stable_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let g = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let a = g - 4.0 * DMatrix::identity(3, 3); // strongly stable
        let q0 = random_psd(&mut rng, 3) + DMatrix::identity(3, 3);
        let p = solve_lyapunov(&a, &q0).unwrap();
        assert!((a.transpose() * &p + &p * &a + &q0).norm() <= 1e-9 * q0.norm());
        assert!(p.cholesky().is_some());
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = mat(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            solve_lyapunov(&a, &DMatrix::identity(2, 2)),
            Err(Error::StabilityViolation { .. })
        ));
    }

    #[test]
    fn pinv_examples() {
        let b = mat(2, 1, &[0.0, 1.0]);
        let d = pinv(&b).unwrap();
        assert!((d - mat(1, 2, &[0.0, 1.0])).norm() < 1e-12);

        let d = pinv(&DMatrix::identity(2, 2)).unwrap();
        assert!((d - DMatrix::identity(2, 2)).norm() < 1e-12);

        let b = mat(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let d = pinv(&b).unwrap();
        assert!((d * b - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn pinv_rank_deficient() {
        let b = mat(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(pinv(&b), Err(Error::RankDeficient { .. })));
    }

    proptest! {
        #[test]
        fn prop_reconstruction(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = rng.gen_range(1..=5);
            let s = random_psd(&mut rng, p);
            let e = sym_eig(&s, 1e-12).unwrap();
            let recon = &e.v * DMatrix::from_diagonal(&e.lambdas) * e.v.transpose();
            prop_assert!((recon - &s).norm() <= 1e-10 * (1.0 + s.norm()));
        }

        #[test]
        fn prop_adjugate_identity(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(2654435761));
            let p = rng.gen_range(1..=5);
            let m = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-3.0..3.0));
            let r = adjugate_det(&m).unwrap();
            let resid = (&r.adj * &m - DMatrix::identity(p, p) * r.det).norm();
            prop_assert!(resid <= 1e-9 * (1.0 + m.norm().powi(p as i32)));
        }
    }
}
