//! Shifting-anchor internal friction with a dwell-dependent stick threshold.

use serde::{Deserialize, Serialize};

use crate::elastic::{scalar_strain_force, stretch_force, ElementForce};
use crate::{sign, Mat3, Vec3};

/// Slack allowed on the stick test so a strain sitting exactly on the band
/// edge keeps sticking instead of re-slipping on rounding noise.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionParams {
    pub eps0: f64,
    pub eps_inf: f64,
    pub tau: f64,
}

impl FrictionParams {
    pub fn threshold(&self, t_stick: f64) -> f64 {
        threshold(t_stick, self.eps0, self.eps_inf, self.tau)
    }
}

/// `ε_inf − (ε_inf − ε_0) e^{−t_stick/τ_f}`.
#[inline]
pub fn threshold(t_stick: f64, eps0: f64, eps_inf: f64, tau: f64) -> f64 {
    eps0 - (eps_inf - eps0) * (-t_stick / tau).exp_m1()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrictionState {
    pub anchor: f64,
    pub t_stick: f64,
    pub last_strain: f64,
}

impl FrictionState {
    pub fn at(strain: f64) -> Self {
        Self { anchor: strain, t_stick: 0.0, last_strain: strain }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionUpdate {
    pub slipped: bool,
    /// `ε − ε̄` before the anchor moved.
    pub deviation: f64,
    /// Threshold the deviation was tested against.
    pub threshold: f64,
}

/// Advances one element. `clock_dt` is `h · time_scale`.
///
/// On slip the dwell clock restarts and the anchor is dragged to the edge of
/// the fresh band, `|ε − ε̄| = ε_0`.
pub fn friction_update(state: &mut FrictionState, strain: f64, clock_dt: f64, params: &FrictionParams) -> FrictionUpdate {
    let deviation = strain - state.anchor;
    let thres = params.threshold(state.t_stick);
    let slipped = deviation.abs() > thres + FEASIBILITY_TOL;
    if slipped {
        state.t_stick = 0.0;
        state.anchor += sign(deviation) * (deviation.abs() - params.eps0);
    } else {
        state.t_stick += clock_dt;
    }
    state.last_strain = strain;
    FrictionUpdate { slipped, deviation, threshold: thres }
}

/// Force of `W = A (½ K ε² − K ε̄ ε)` for a scalar strain with gradient `ds`.
pub fn friction_force<const N: usize>(deviation: f64, k_friction: f64, area: f64, ds: &[Vec3; N]) -> ElementForce<N> {
    scalar_strain_force(area * k_friction * deviation, area * k_friction, ds)
}

pub fn friction_energy(strain: f64, anchor: f64, k_friction: f64, area: f64) -> f64 {
    area * (0.5 * k_friction * strain * strain - k_friction * anchor * strain)
}

/// Runs the three membrane axes independently.
pub fn tensile_friction_update(
    states: &mut [FrictionState; 3],
    strain: &Vec3,
    clock_dt: f64,
    params: &FrictionParams,
) -> [FrictionUpdate; 3] {
    std::array::from_fn(|k| friction_update(&mut states[k], strain[k], clock_dt, params))
}

/// Membrane friction force with diagonal stiffness `k`.
pub fn tensile_friction_force(strain: &Vec3, states: &[FrictionState; 3], k: [f64; 3], area: f64, grad: &[[Vec3; 3]; 3]) -> ElementForce<3> {
    let dev = Vec3::new(strain.x - states[0].anchor, strain.y - states[1].anchor, strain.z - states[2].anchor);
    stretch_force(&dev, &Mat3::from_diagonal(&Vec3::from(k)), area, grad)
}
