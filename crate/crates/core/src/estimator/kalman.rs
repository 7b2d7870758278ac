use nalgebra::{DMatrix, DVector};

use super::EstimatorError;

/// Continuous-time model of the extended state `ξ = [x, ẋ, θ, u_l]` for one
/// axis. The second row is the leader's point-mass dynamics, the last row is
/// the time derivative of `u_l = −L1(x − θᵀφ) − L2(ẋ − θᵀφ̇)`.
///
/// `B` maps an additional known force on the leader into `ξ̇`.
pub fn build_system_matrices(
    mass: f64,
    damping: f64,
    l1: f64,
    l2: f64,
    phi_dot: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let nt = phi_dot.len();
    let dim = nt + 3;
    let last = dim - 1;
    let mut a = DMatrix::zeros(dim, dim);
    a[(0, 1)] = 1.0;
    a[(1, 1)] = -damping / mass;
    a[(1, last)] = 1.0 / mass;
    a[(last, 1)] = -l1 + l2 * damping / mass;
    for i in 0..nt {
        a[(last, 2 + i)] = l1 * phi_dot[i];
    }
    a[(last, last)] = -l2 / mass;
    let mut b = DVector::zeros(dim);
    b[1] = 1.0 / mass;
    b[last] = -l2 / mass;
    (a, b)
}

/// Selects `[x, ẋ, u_l]` from the extended state.
pub fn measurement_matrix(dim: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(3, dim);
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    h[(2, dim - 1)] = 1.0;
    h
}

/// `K = P Hᵀ R⁻¹`.
pub fn kalman_gain(
    p: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, EstimatorError> {
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(EstimatorError::Singular { what: "measurement covariance R" })?;
    Ok(p * h.transpose() * r_inv)
}

/// One explicit Euler step of `Ṗ = PAᵀ + AP − PHᵀR⁻¹HP + Q`, symmetrized.
pub fn riccati_step(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    dt: f64,
) -> Result<DMatrix<f64>, EstimatorError> {
    if !(dt > 0.0) {
        return Err(EstimatorError::InvalidParam {
            field: "dt",
            reason: format!("must be > 0, got {dt}"),
        });
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(EstimatorError::Singular { what: "measurement covariance R" })?;
    let ph = p * h.transpose();
    let pdot = p * a.transpose() + a * p - &ph * r_inv * ph.transpose() + q;
    let next = p + pdot * dt;
    let next = (&next + next.transpose()) * 0.5;
    let min_eigenvalue = next.clone().symmetric_eigenvalues().min();
    if min_eigenvalue < -1e-9 {
        return Err(EstimatorError::LostDefiniteness { min_eigenvalue });
    }
    Ok(next)
}

/// `U = ξ̃ᵀ P⁻¹ ξ̃`.
pub fn lyapunov_energy(p: &DMatrix<f64>, err: &DVector<f64>) -> Result<f64, EstimatorError> {
    let sol = p
        .clone()
        .cholesky()
        .map(|ch| ch.solve(err))
        .or_else(|| p.clone().lu().solve(err))
        .ok_or(EstimatorError::Singular { what: "covariance P" })?;
    Ok(err.dot(&sol).max(0.0))
}

/// Joint tracking/estimation error system for `[e, ė, ξ̃]` on one axis.
pub fn extended_error_system(
    a: &DMatrix<f64>,
    k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    mass: f64,
    damping: f64,
    s: f64,
    n_term: f64,
) -> DMatrix<f64> {
    let dim = a.nrows();
    let mut abar = DMatrix::zeros(dim + 2, dim + 2);
    abar[(0, 1)] = 1.0;
    abar[(1, 0)] = -n_term / mass;
    abar[(1, 1)] = -(damping + s) / mass;
    abar[(1, 2 + dim - 1)] = 1.0 / mass;
    abar.view_mut((2, 2), (dim, dim)).copy_from(&(a - k * h));
    abar
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn theta_rows_are_zero() {
        for n in 0..3 {
            let (a, _) = build_system_matrices(2.0, 1.0, 100.0, 10.0, &DVector::from_element(n + 1, 0.5));
            for i in 2..2 + n + 1 {
                assert!(a.row(i).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn free_mass_matrices() {
        let (a, b) = build_system_matrices(1.0, 0.0, 0.0, 0.0, &DVector::from_vec(vec![0.0, 1.0]));
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(b[1], 1.0);
        // the only other entry is the force coupling into ẍ
        let nonzero: Vec<_> = a
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| (i % 5, i / 5))
            .collect();
        assert_eq!(nonzero, vec![(0, 1), (1, 4)]);
    }

    #[test]
    fn force_row_velocity_entry() {
        let (a, _) = build_system_matrices(2.0, 1.0, 100.0, 10.0, &DVector::from_vec(vec![0.0, 1.0]));
        assert_relative_eq!(a[(4, 1)], -95.0, epsilon = 1e-12);
        let (a0, _) = build_system_matrices(2.0, 1.0, 100.0, 10.0, &DVector::from_vec(vec![0.0]));
        assert_relative_eq!(a0[(3, 1)], -95.0, epsilon = 1e-12);
        assert_relative_eq!(a[(4, 3)], 100.0, epsilon = 1e-12);
        assert_relative_eq!(a[(4, 4)], -5.0, epsilon = 1e-12);
    }

    #[test]
    fn system_matrix_matches_model_derivative() {
        // ξ̇ computed from the nonlinear definitions equals Aξ at a random state
        let (m, c, l1, l2) = (12.8, 5.0, 500.0, 50.0);
        let s: f64 = 0.4;
        let phi_dot = DVector::from_vec(vec![0.0, 1.0]);
        let (a, _) = build_system_matrices(m, c, l1, l2, &phi_dot);
        let (x, xd, th0, th1) = (0.02, -0.3, 0.05, 0.2);
        let ul = -l1 * (x - (th0 + th1 * s)) - l2 * (xd - th1);
        let xdd = (ul - c * xd) / m;
        let uld = -l1 * (xd - th1) - l2 * xdd;
        let xi = DVector::from_vec(vec![x, xd, th0, th1, ul]);
        let got = &a * xi;
        let want = DVector::from_vec(vec![xd, xdd, 0.0, 0.0, uld]);
        assert!((got - want).norm() < 1e-9);
    }

    #[test]
    fn scalar_riccati_closed_form() {
        let z = DMatrix::zeros(1, 1);
        let i = DMatrix::identity(1, 1);
        let mut p = DMatrix::from_element(1, 1, 1.0);
        let dt = 1e-4;
        for _ in 0..5000 {
            p = riccati_step(&p, &z, &i, &z, &i, dt).unwrap();
        }
        assert!((p[(0, 0)] - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn riccati_zero_fixed_point_and_symmetry() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -3.0, -0.5]);
        let h = DMatrix::identity(2, 2);
        let z = DMatrix::zeros(2, 2);
        let r = DMatrix::identity(2, 2);
        assert_eq!(riccati_step(&z, &a, &h, &z, &r, 1e-3).unwrap(), z);
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let q = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.2]);
        let next = riccati_step(&p, &a, &h, &q, &r, 1e-3).unwrap();
        assert_eq!(&next - next.transpose(), z);
    }

    #[test]
    fn riccati_flags_indefinite_result() {
        let p = DMatrix::from_row_slice(1, 1, &[1e-3]);
        let a = DMatrix::from_row_slice(1, 1, &[-1000.0]);
        let h = DMatrix::identity(1, 1);
        let r = DMatrix::identity(1, 1);
        let q = DMatrix::zeros(1, 1);
        let e = riccati_step(&p, &a, &h, &q, &r, 0.01).unwrap_err();
        assert!(matches!(e, EstimatorError::LostDefiniteness { .. }));
    }

    #[test]
    fn gain_identities() {
        let h = measurement_matrix(5);
        let k = kalman_gain(&DMatrix::identity(5, 5), &h, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(k, h.transpose());
        let k0 = kalman_gain(&DMatrix::zeros(5, 5), &h, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(k0, DMatrix::zeros(5, 3));
        assert!(kalman_gain(&DMatrix::identity(5, 5), &h, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn gain_matches_dense_solve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let g = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let p = &g * g.transpose();
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1e-6, 1e-4, 1e-2]));
        let h = measurement_matrix(5);
        let k = kalman_gain(&p, &h, &r).unwrap();
        // oracle: solve Kᵀ from Rᵀ Kᵀ = (P Hᵀ)ᵀ with a QR factorization
        let kt = r.transpose().qr().solve(&(&p * h.transpose()).transpose()).unwrap();
        assert!((&k - kt.transpose()).norm() < 1e-9 * k.norm());
    }

    #[test]
    fn lyapunov_identities() {
        let p = DMatrix::identity(5, 5);
        assert_eq!(lyapunov_energy(&p, &DVector::zeros(5)).unwrap(), 0.0);
        let mut e = DVector::zeros(5);
        e[0] = 1.0;
        assert_eq!(lyapunov_energy(&p, &e).unwrap(), 1.0);
        assert!(lyapunov_energy(&DMatrix::zeros(5, 5), &e).is_err());
    }

    #[test]
    fn error_system_spectrum_is_union() {
        let a = -DMatrix::identity(4, 4);
        let k = DMatrix::zeros(4, 3);
        let h = measurement_matrix(4);
        let abar = extended_error_system(&a, &k, &h, 1.0, 2.0, 0.0, 1.0);
        for ev in abar.complex_eigenvalues().iter() {
            assert!((ev.re + 1.0).abs() < 1e-6 && ev.im.abs() < 1e-6, "{ev}");
        }
        // general case: block-triangular union
        let a2 = DMatrix::from_row_slice(4, 4, &[
            -2.0, 1.0, 0.0, 0.0, 0.0, -3.0, 0.5, 0.0, 0.0, 0.0, -0.5, 0.0, 1.0, 0.0, 0.0, -4.0,
        ]);
        let abar = extended_error_system(&a2, &k, &h, 2.0, 3.0, 1.0, 6.0);
        let mut got: Vec<f64> = abar.complex_eigenvalues().iter().map(|e| e.re).collect();
        // 2y² + 4y + 6 = 0 → y = −1 ± i√2
        let mut want = vec![-2.0, -3.0, -0.5, -4.0, -1.0, -1.0];
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
    }
}
