//! Model selection and per-channel hysteresis state.
//!
//! A channel is one scalar strain carrying friction and plastic state: the
//! angle deviation `θ − θ̄` of a hinge, or one Green strain component of a face.

use serde::{Deserialize, Serialize};

use crate::baselines::{dahl_follow, DahlParams, DahlState};
use crate::friction::{friction_update, FrictionParams, FrictionState};
use crate::material::MaterialParams;
use crate::plasticity::{plastic_step, HardeningParams, PlasticState};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSelector {
    #[default]
    Paper,
    Dahl,
    HardeningOnly,
    Elastic,
}

impl ModelSelector {
    pub const ALL: [ModelSelector; 4] = [Self::Paper, Self::Dahl, Self::HardeningOnly, Self::Elastic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Paper => "paper",
            Self::Dahl => "dahl",
            Self::HardeningOnly => "hardening_only",
            Self::Elastic => "elastic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionModel {
    Off,
    TimeDependent,
    Dahl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlasticModel {
    Off,
    TimeDependent,
    HardeningOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub friction: FrictionModel,
    pub plasticity: PlasticModel,
    /// Apply friction and plasticity to membrane axes as well as hinges.
    pub tensile: bool,
}

impl ModelConfig {
    pub fn from_selector(sel: ModelSelector) -> Self {
        let (friction, plasticity) = match sel {
            ModelSelector::Paper => (FrictionModel::TimeDependent, PlasticModel::TimeDependent),
            ModelSelector::Dahl => (FrictionModel::Dahl, PlasticModel::Off),
            ModelSelector::HardeningOnly => (FrictionModel::Off, PlasticModel::HardeningOnly),
            ModelSelector::Elastic => (FrictionModel::Off, PlasticModel::Off),
        };
        Self { friction, plasticity, tensile: true }
    }

    pub fn elastic() -> Self {
        Self::from_selector(ModelSelector::Elastic)
    }

    pub fn paper() -> Self {
        Self::from_selector(ModelSelector::Paper)
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::paper()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub friction: FrictionParams,
    pub k_friction: f64,
    pub dahl: DahlParams,
    pub hardening: HardeningParams,
}

impl ChannelParams {
    pub fn bending(m: &MaterialParams, model: &ModelConfig) -> Self {
        let kf = m.k_friction();
        Self {
            friction: FrictionParams { eps0: m.eps0, eps_inf: m.eps_inf, tau: m.tau_f },
            k_friction: kf,
            dahl: DahlParams { stiffness: kf, saturation: kf * m.eps0 },
            hardening: HardeningParams {
                kh0: m.kh0,
                g: m.g,
                tau: m.tau_p,
                stiffness: m.kb(),
                yield0: m.eps_y0,
                time_dependent: model.plasticity == PlasticModel::TimeDependent,
            },
        }
    }

    /// Parameters for the `uu`, `vv` and `uv` membrane axes.
    pub fn tensile(m: &MaterialParams, model: &ModelConfig) -> [Self; 3] {
        let kf = m.tensile_friction_stiffness();
        let ke = [m.k11, m.k22, m.k33];
        let eps0 = m.tensile_eps0();
        std::array::from_fn(|k| Self {
            friction: FrictionParams { eps0, eps_inf: m.tensile_eps_inf(), tau: m.tau_f },
            k_friction: kf[k],
            dahl: DahlParams { stiffness: kf[k], saturation: kf[k] * eps0 },
            hardening: HardeningParams {
                kh0: m.kh0,
                g: m.g,
                tau: m.tau_p,
                stiffness: ke[k],
                yield0: m.tensile_eps_y0(),
                time_dependent: model.plasticity == PlasticModel::TimeDependent,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub friction: FrictionState,
    pub dahl: DahlState,
    pub plastic: PlasticState,
}

impl ChannelState {
    pub fn new(params: &ChannelParams) -> Self {
        Self {
            friction: FrictionState::default(),
            dahl: DahlState::new(&params.dahl, 0.0),
            plastic: PlasticState::new(&params.hardening),
        }
    }

    /// Strain the elastic stress acts on: plastic offset removed and capped at yield.
    pub fn elastic_stress_strain(&self, total: f64, model: &ModelConfig) -> f64 {
        match model.plasticity {
            PlasticModel::Off => total,
            _ => self.plastic.stress_strain(total),
        }
    }

    /// Friction stress and its tangent stiffness, both in channel strain units.
    pub fn friction_stress(&self, total: f64, params: &ChannelParams, model: &ModelConfig) -> (f64, f64) {
        match model.friction {
            FrictionModel::Off => (0.0, 0.0),
            FrictionModel::TimeDependent => {
                let e = total - self.plastic.plastic;
                (params.k_friction * (e - self.friction.anchor), params.k_friction)
            }
            FrictionModel::Dahl => (self.dahl.stress, self.dahl.tangent),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChannelReport {
    pub slipped: bool,
    pub yielded: bool,
    pub flow: f64,
    /// `|ε − ε̄| / ε_inf` before the anchor update.
    pub guard_ratio: f64,
}

/// Plasticity first, then friction on the resulting elastic strain.
pub fn update_channel(
    state: &mut ChannelState,
    total: f64,
    clock_dt: f64,
    params: &ChannelParams,
    model: &ModelConfig,
) -> ChannelReport {
    let mut report = ChannelReport::default();
    if model.plasticity != PlasticModel::Off {
        let u = plastic_step(&mut state.plastic, total, clock_dt, &params.hardening);
        report.yielded = u.yielded;
        report.flow = u.flow;
    }
    let elastic = total - state.plastic.plastic;
    match model.friction {
        FrictionModel::Off => {}
        FrictionModel::TimeDependent => {
            let u = friction_update(&mut state.friction, elastic, clock_dt, &params.friction);
            report.slipped = u.slipped;
            report.guard_ratio = if params.friction.eps_inf > 0.0 {
                u.deviation.abs() / params.friction.eps_inf
            } else {
                0.0
            };
        }
        FrictionModel::Dahl => {
            dahl_follow(&mut state.dahl, elastic, &params.dahl);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{preset, PresetFamily};

    #[test]
    fn selector_round_trip() {
        for m in ModelSelector::ALL {
            assert_eq!(ModelSelector::parse(m.name()), Some(m));
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert_eq!(ModelSelector::parse("nope"), None);
    }

    #[test]
    fn disabled_models_leave_state_alone() {
        let m = preset("cotton", PresetFamily::Specimen).unwrap();
        let model = ModelConfig::elastic();
        let p = ChannelParams::bending(&m, &model);
        let mut s = ChannelState::new(&p);
        let before = s;
        update_channel(&mut s, 2.5, 0.01, &p, &model);
        assert_eq!(s, before);
        assert_eq!(s.friction_stress(2.5, &p, &model), (0.0, 0.0));
    }

    #[test]
    fn friction_sees_elastic_part() {
        let m = preset("cotton", PresetFamily::Specimen).unwrap();
        let model = ModelConfig::paper();
        let p = ChannelParams::bending(&m, &model);
        let mut s = ChannelState::new(&p);
        let r = update_channel(&mut s, 2.9, 0.01, &p, &model);
        assert!(r.yielded && r.flow > 0.0);
        let e = 2.9 - s.plastic.plastic;
        assert!((e - s.friction.anchor - p.friction.eps0).abs() < 1e-12);
    }
}
