use nalgebra::{DMatrix, Vector2};

use super::{PointMassParams, TwoLinkArmParams};

/// First-order terms of the tracking-error dynamics around a leader sample:
/// `M ë + (C + S) ė + N e ≈ −ũ_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedErrorDynamics {
    /// N·s/m
    pub s: DMatrix<f64>,
    /// N/m
    pub n_term: DMatrix<f64>,
}

/// Constant-coefficient model: both terms vanish (G is constant).
pub fn linearize_point_mass(_params: &PointMassParams) -> LinearizedErrorDynamics {
    LinearizedErrorDynamics {
        s: DMatrix::zeros(3, 3),
        n_term: DMatrix::zeros(3, 3),
    }
}

/// Analytic partials of the arm along the sample `(q, q̇, q̈)`:
/// `S_ij = Σ_k ∂C_ik/∂q̇_j q̇_k`,
/// `N_ij = Σ_k ∂M_ik/∂q_j q̈_k + Σ_k ∂C_ik/∂q_j q̇_k + ∂G_i/∂q_j`.
pub fn linearize_two_link(
    params: &TwoLinkArmParams,
    q: &Vector2<f64>,
    qdot: &Vector2<f64>,
    qddot: &Vector2<f64>,
) -> LinearizedErrorDynamics {
    let b = params.m2 * params.l1 * params.lc2;
    let (s2, c2) = q[1].sin_cos();
    let (w1, w2) = (qdot[0], qdot[1]);
    let (a1, a2) = (qddot[0], qddot[1]);

    let s = DMatrix::from_row_slice(2, 2, &[-b * s2 * w2, -b * s2 * (w1 + w2), b * s2 * w1, 0.0]);

    let gs12 = params.m2 * params.lc2 * params.g * (q[0] + q[1]).sin();
    let g11 = -(params.m1 * params.lc1 + params.m2 * params.l1) * params.g * q[0].sin() - gs12;
    // only q2 enters M and C
    let dm_dq2 = [-b * s2 * (2.0 * a1 + a2), -b * s2 * a1];
    let dc_dq2 = [b * c2 * (-2.0 * w1 * w2 - w2 * w2), b * c2 * w1 * w1];
    let n_term = DMatrix::from_row_slice(
        2,
        2,
        &[
            g11,
            dm_dq2[0] + dc_dq2[0] - gs12,
            -gs12,
            dm_dq2[1] + dc_dq2[1] - gs12,
        ],
    );
    LinearizedErrorDynamics { s, n_term }
}
