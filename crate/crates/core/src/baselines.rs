//! Comparison models without dwell: Dahl friction and hardening-only plasticity.

use serde::{Deserialize, Serialize};

use crate::plasticity::{plastic_step, HardeningParams, PlasticState, PlasticUpdate};
use crate::sign;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DahlParams {
    pub stiffness: f64,
    pub saturation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DahlState {
    pub stress: f64,
    /// `dσ/dε` along the most recent direction of motion.
    pub tangent: f64,
    pub last_strain: f64,
}

impl DahlState {
    pub fn new(params: &DahlParams, strain: f64) -> Self {
        Self { stress: 0.0, tangent: params.stiffness, last_strain: strain }
    }
}

/// Explicit step of `dσ/dε = k_d (1 − sign(ε̇) σ/σ_c)` over `rate · h`.
pub fn dahl_update(state: &mut DahlState, rate: f64, h: f64, params: &DahlParams) -> f64 {
    let d = rate * h;
    if d == 0.0 {
        return state.stress;
    }
    let s = sign(d);
    let slope = params.stiffness * (1.0 - s * state.stress / params.saturation);
    state.stress = (state.stress + slope * d).clamp(-params.saturation, params.saturation);
    state.tangent = (params.stiffness * (1.0 - s * state.stress / params.saturation)).max(0.0);
    state.stress
}

/// Feeds a new strain sample; the rate is the difference to the previous one.
pub fn dahl_follow(state: &mut DahlState, strain: f64, params: &DahlParams) -> f64 {
    let d = strain - state.last_strain;
    state.last_strain = strain;
    dahl_update(state, d, 1.0, params)
}

/// Hardening plasticity with `K_h` frozen at `K_h0` and no clock.
pub fn hardening_only_step(state: &mut PlasticState, strain: f64, kb: f64, kh0: f64, eps_y0: f64) -> PlasticUpdate {
    let p = HardeningParams { kh0, g: 0.0, tau: 1.0, stiffness: kb, yield0: eps_y0, time_dependent: false };
    plastic_step(state, strain, 0.0, &p)
}
