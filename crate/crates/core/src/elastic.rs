//! Elastic bending and membrane forces with Gauss–Newton Jacobians.

use crate::{Mat3, Vec3};

/// Nodal forces and position Jacobian blocks of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementForce<const N: usize> {
    pub force: [Vec3; N],
    pub jacobian: [[Mat3; N]; N],
}

impl<const N: usize> ElementForce<N> {
    pub fn zero() -> Self {
        Self { force: [Vec3::zeros(); N], jacobian: [[Mat3::zeros(); N]; N] }
    }

    pub fn add(&mut self, other: &Self) {
        for a in 0..N {
            self.force[a] += other.force[a];
            for b in 0..N {
                self.jacobian[a][b] += other.jacobian[a][b];
            }
        }
    }
}

/// `3 (θ − θ̄) / H̄`.
#[inline]
pub fn bending_strain(theta: f64, rest_angle: f64, avg_height: f64) -> f64 {
    3.0 * (theta - rest_angle) / avg_height
}

/// Force `−(A σ) ∂s/∂x` and Jacobian `−(A k) ∂s/∂x ∂s/∂xᵀ` for a scalar strain `s`.
pub fn scalar_strain_force<const N: usize>(area_stress: f64, area_stiffness: f64, ds: &[Vec3; N]) -> ElementForce<N> {
    let mut out = ElementForce::zero();
    for a in 0..N {
        out.force[a] = -area_stress * ds[a];
        for b in 0..N {
            out.jacobian[a][b] = -area_stiffness * ds[a] * ds[b].transpose();
        }
    }
    out
}

/// Bending force from the elastic strain `ε_e` (plastic part already removed).
pub fn bending_force(elastic_strain: f64, kb: f64, area: f64, avg_height: f64, grad_theta: &[Vec3; 4]) -> ElementForce<4> {
    let s = 3.0 / avg_height;
    let ds = grad_theta.map(|g| s * g);
    scalar_strain_force(area * kb * elastic_strain, area * kb, &ds)
}

pub fn bending_energy(elastic_strain: f64, kb: f64, area: f64) -> f64 {
    0.5 * area * kb * elastic_strain * elastic_strain
}

/// Membrane force for elastic Green strain `e` with Voigt stiffness `ks`.
///
/// `grad[k][a]` is `∂ε_k/∂x_a`.
pub fn stretch_force(elastic_strain: &Vec3, ks: &Mat3, area: f64, grad: &[[Vec3; 3]; 3]) -> ElementForce<3> {
    membrane_force(&(ks * elastic_strain), ks, area, grad)
}

/// Force `−A Σ_k σ_k ∂ε_k/∂x` with Gauss–Newton Jacobian `−A Σ_kl C_kl ∂ε_k ∂ε_lᵀ`.
pub fn membrane_force(stress: &Vec3, tangent: &Mat3, area: f64, grad: &[[Vec3; 3]; 3]) -> ElementForce<3> {
    let mut out = ElementForce::zero();
    for a in 0..3 {
        out.force[a] = -area * (stress[0] * grad[0][a] + stress[1] * grad[1][a] + stress[2] * grad[2][a]);
        for b in 0..3 {
            let mut m = Mat3::zeros();
            for k in 0..3 {
                for l in 0..3 {
                    let c = tangent[(k, l)];
                    if c != 0.0 {
                        m += c * grad[k][a] * grad[l][b].transpose();
                    }
                }
            }
            out.jacobian[a][b] = -area * m;
        }
    }
    out
}

/// `½ A (k11 ε_uu² + k22 ε_vv² + 2 k12 ε_uu ε_vv + k33 ε_uv²)`.
pub fn stretch_energy(elastic_strain: &Vec3, ks: &Mat3, area: f64) -> f64 {
    0.5 * area * elastic_strain.dot(&(ks * elastic_strain))
}
