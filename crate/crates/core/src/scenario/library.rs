//! The canonical specimen experiments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    Action, Easing, Event, Jitter, MaterialSpec, MeshConfig, MeshShape, RigidMotion, Scenario, Selector, TorqueSpec,
};
use crate::contact::{Obstacle, Shape};
use crate::inelastic::{FrictionModel, ModelSelector, PlasticModel};
use crate::material::{preset, PresetFamily, TensileParams};
use crate::solver::{Damping, SolverConfig};
use crate::{Error, Result};

pub const NAMES: [&str; 6] = [
    "single_wrinkle_friction",
    "single_wrinkle_plastic",
    "fold_drop_container",
    "press_weight",
    "tensile_center_press",
    "cylinder_twist",
];

/// Kinematic length of a hold phase; the clocks are scaled to cover the dwell.
pub const HOLD_WINDOW: f64 = 0.5;

/// Simulated seconds between release and the final measurement.
pub const SETTLE: f64 = 10.0;

/// Mass-proportional damping used by the specimen scenes (1/s).
pub const SPECIMEN_DAMPING: f64 = 5.0;

const BIG: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub material: String,
    /// Dwell (s) of the hold phase.
    pub hold: f64,
    pub h: f64,
    pub model: ModelSelector,
    pub friction: Option<FrictionModel>,
    pub plasticity: Option<PlasticModel>,
    /// Grid vertices per side, or vertices around a cylinder.
    pub resolution: Option<usize>,
    /// Fold or twist angle (rad).
    pub angle: Option<f64>,
    /// Press depth (m).
    pub depth: Option<f64>,
    pub jitter: Option<Jitter>,
    pub settle: f64,
    pub snapshot_interval: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            material: "cotton".into(),
            hold: 500.0,
            h: 0.01,
            model: ModelSelector::Paper,
            friction: None,
            plasticity: None,
            resolution: None,
            angle: None,
            depth: None,
            jitter: None,
            settle: SETTLE,
            snapshot_interval: 10,
        }
    }
}

pub fn canonical(name: &str, p: &Params) -> Result<Scenario> {
    if !(p.hold >= 0.0 && p.hold.is_finite()) {
        return Err(Error::Config(format!("hold must be finite and >= 0, got {}", p.hold)));
    }
    if !(p.settle >= 0.0 && p.settle.is_finite()) {
        return Err(Error::Config("settle must be finite and >= 0".into()));
    }
    let mut s = match name {
        "single_wrinkle_friction" => single_wrinkle(p, 0.5 * PI, Some(PlasticModel::Off), None),
        "single_wrinkle_plastic" => single_wrinkle(p, 175f64.to_radians(), None, Some(FrictionModel::Off)),
        "fold_drop_container" => fold_drop_container(p),
        "press_weight" => press_weight(p),
        "tensile_center_press" => tensile_center_press(p)?,
        "cylinder_twist" => cylinder_twist(p),
        _ => {
            return Err(Error::Config(format!("unknown scenario `{name}`; known scenarios: {}", NAMES.join(", "))));
        }
    };
    s.name = name.to_string();
    s.model = p.model;
    s.solver.h = p.h;
    s.snapshot_interval = p.snapshot_interval;
    if p.friction.is_some() {
        s.friction = p.friction;
    }
    if p.plasticity.is_some() {
        s.plasticity = p.plasticity;
    }
    if let Some(j) = p.jitter {
        s.mesh.jitter = Some(j);
    }
    s.validate()?;
    Ok(s)
}

fn base(p: &Params, mesh: MeshConfig, gravity: bool) -> Scenario {
    Scenario {
        name: String::new(),
        mesh,
        material: MaterialSpec::Name(p.material.clone()),
        model: p.model,
        tensile: true,
        friction: None,
        plasticity: None,
        solver: SolverConfig {
            h: p.h,
            gravity: if gravity { [0.0, 0.0, -9.81] } else { [0.0; 3] },
            damping: Damping { mass: SPECIMEN_DAMPING, stiffness: 0.0 },
            ..SolverConfig::default()
        },
        obstacles: vec![],
        events: vec![],
        duration: None,
        snapshot_interval: p.snapshot_interval,
        torque: None,
    }
}

/// Appends a hold of `p.hold` seconds starting at `t`; returns its end time.
fn push_hold(events: &mut Vec<Event>, t: f64, p: &Params) -> f64 {
    let window = p.hold.min(HOLD_WINDOW);
    if window > 0.0 {
        events.push(Event::span(t, window, Action::Hold { time_scale: None, dwell: Some(p.hold.max(window)) }));
    }
    t + window
}

fn measure(tag: &str, reference: Option<&str>) -> Action {
    Action::Measure { tag: tag.into(), reference: reference.map(Into::into) }
}

fn everything_below_x(x: f64) -> Selector {
    Selector::rest_box([-BIG, -BIG, -BIG], [x, BIG, BIG])
}

fn everything_above_x(x: f64) -> Selector {
    Selector::rest_box([x, -BIG, -BIG], [BIG, BIG, BIG])
}

const SHEET: f64 = 0.3;

fn sheet_resolution(p: &Params) -> usize {
    p.resolution.unwrap_or(61)
}

/// Half the sheet is pinned, the other half is folded up about the center line,
/// held, then released to recover.
fn single_wrinkle(p: &Params, fold: f64, plastic: Option<PlasticModel>, friction: Option<FrictionModel>) -> Scenario {
    let n = sheet_resolution(p);
    let mut s = base(p, MeshConfig::grid(SHEET, SHEET, n, n), false);
    let line = 0.5 * SHEET;
    let dx = SHEET / (n - 1) as f64;
    let angle = p.angle.unwrap_or(fold);
    s.plasticity = plastic;
    s.friction = friction;
    let mut ev = vec![
        Event::at(0.0, Action::Pin { selector: everything_below_x(line) }),
        Event::span(
            0.0,
            1.0,
            Action::MoveHandles {
                group: "flap".into(),
                selector: everything_above_x(line + 0.5 * dx),
                stiffness: super::DEFAULT_HANDLE_STIFFNESS,
                motion: RigidMotion { axis_point: [line, 0.0, 0.0], axis: [0.0, 1.0, 0.0], angle: -angle, translation: [0.0; 3] },
                easing: Easing::Smoothstep,
            },
        ),
    ];
    let t = push_hold(&mut ev, 1.0, p);
    ev.push(Event::at(t, measure("held", None)));
    ev.push(Event::at(t, Action::Release { group: Some("flap".into()) }));
    ev.push(Event::at(t + p.settle, measure("final", Some("held"))));
    s.events = ev;
    s
}

/// The free half of a sheet lying on the ground is folded almost flat onto the
/// pinned half, a box presses the fold, then lifts off.
fn press_weight(p: &Params) -> Scenario {
    let n = sheet_resolution(p);
    let mut s = base(p, MeshConfig::grid(SHEET, SHEET, n, n), false);
    let ground = Obstacle::new("ground", Shape::Plane { point: [0.0; 3], normal: [0.0, 0.0, 1.0] });
    let delta = ground.thickness;
    s.mesh.offset = [0.0, 0.0, delta];
    let line = 0.5 * SHEET;
    let dx = SHEET / (n - 1) as f64;
    let gap = 0.004;
    let hz = 0.02;
    let lift = 0.25;
    let weight = Obstacle {
        friction: 0.5,
        ..Obstacle::new(
            "weight",
            Shape::Box { center: [0.075, 0.5 * SHEET, gap + hz + lift], half_extents: [0.1, 0.2, hz] },
        )
    };
    s.obstacles = vec![ground, weight];
    let angle = p.angle.unwrap_or(175f64.to_radians());
    let mut ev = vec![
        Event::at(0.0, Action::Pin { selector: everything_below_x(line) }),
        Event::span(
            0.0,
            1.0,
            Action::MoveHandles {
                group: "flap".into(),
                selector: everything_above_x(line + 0.5 * dx),
                stiffness: super::DEFAULT_HANDLE_STIFFNESS,
                motion: RigidMotion { axis_point: [line, 0.0, delta], axis: [0.0, 1.0, 0.0], angle: -angle, translation: [0.0; 3] },
                easing: Easing::Smoothstep,
            },
        ),
        Event::span(1.0, 0.5, Action::SetObstaclePose { obstacle: "weight".into(), offset: [0.0, 0.0, -lift], easing: Easing::Smoothstep }),
        Event::at(1.5, Action::Release { group: Some("flap".into()) }),
    ];
    let t = push_hold(&mut ev, 1.5, p);
    ev.push(Event::at(t, measure("held", None)));
    ev.push(Event::span(t, 0.5, Action::SetObstaclePose { obstacle: "weight".into(), offset: [0.0; 3], easing: Easing::Smoothstep }));
    ev.push(Event::at(t + 0.5 + p.settle, measure("final", Some("held"))));
    s.events = ev;
    s
}

/// Drops a sheet into an open cylindrical container.
fn fold_drop_container(p: &Params) -> Scenario {
    let n = p.resolution.unwrap_or(31);
    let mut mesh = MeshConfig::grid(SHEET, SHEET, n, n);
    mesh.offset = [-0.5 * SHEET, -0.5 * SHEET, 0.15];
    let mut s = base(p, mesh, true);
    s.solver.damping.mass = 1.0;
    s.solver.self_collision = Some(crate::contact::SelfCollision { thickness: 2e-3, stiffness: 500.0 });
    s.obstacles = vec![
        Obstacle::new("ground", Shape::Plane { point: [0.0; 3], normal: [0.0, 0.0, 1.0] }),
        Obstacle::new(
            "container",
            Shape::Tube { base: [0.0; 3], axis: [0.0, 0.0, 1.0], radius: 0.08, wall: 0.005, height: 0.1 },
        ),
    ];
    let mut ev = vec![];
    let t = push_hold(&mut ev, 1.5, p);
    ev.push(Event::at(t, measure("held", None)));
    s.events = ev;
    s
}

/// Edge-pinned sheet pressed at its center by a box punch.
fn tensile_center_press(p: &Params) -> Result<Scenario> {
    let n = sheet_resolution(p);
    let mut s = base(p, MeshConfig::grid(SHEET, SHEET, n, n), true);
    let m = preset(&p.material, PresetFamily::Specimen)?;
    s.material = MaterialSpec::Preset {
        preset: p.material.clone(),
        tensile: Some(TensileParams {
            k11f: Some(0.5 * m.k11),
            k22f: Some(0.5 * m.k22),
            k33f: Some(0.5 * m.k33),
            eps0: Some(0.002),
            eps_inf: Some(0.02),
            eps_y0: Some(0.01),
        }),
    };
    let depth = p.depth.unwrap_or(0.02);
    let c = 0.5 * SHEET;
    let hz = 0.01;
    let punch = Obstacle {
        friction: 0.0,
        ..Obstacle::new("punch", Shape::Box { center: [c, c, 0.002 + hz], half_extents: [0.03, 0.03, hz] })
    };
    s.obstacles = vec![punch];
    let edge = [
        Selector::rest_box([-BIG, -BIG, -BIG], [0.0, BIG, BIG]),
        Selector::rest_box([SHEET, -BIG, -BIG], [BIG, BIG, BIG]),
        Selector::rest_box([-BIG, -BIG, -BIG], [BIG, 0.0, BIG]),
        Selector::rest_box([-BIG, SHEET, -BIG], [BIG, BIG, BIG]),
    ];
    let mut ev: Vec<Event> = edge.into_iter().map(|selector| Event::at(0.0, Action::Pin { selector })).collect();
    ev.push(Event::span(
        0.0,
        1.0,
        Action::SetObstaclePose { obstacle: "punch".into(), offset: [0.0, 0.0, -depth - 0.002 - 0.001], easing: Easing::Smoothstep },
    ));
    let t = push_hold(&mut ev, 1.0, p);
    ev.push(Event::at(t, measure("held", None)));
    ev.push(Event::span(t, 0.5, Action::SetObstaclePose { obstacle: "punch".into(), offset: [0.0; 3], easing: Easing::Smoothstep }));
    ev.push(Event::at(t + 0.5 + 0.5 * p.settle, measure("final", Some("held"))));
    s.events = ev;
    Ok(s)
}

pub const CYLINDER_RADIUS: f64 = 0.08;
pub const CYLINDER_HEIGHT: f64 = 0.1;

/// Tube with its bottom ring pinned and its top ring twisted about the axis and back.
fn cylinder_twist(p: &Params) -> Scenario {
    let around = p.resolution.unwrap_or(64);
    let along = (around / 2).max(2);
    let mesh = MeshConfig {
        shape: MeshShape::Cylinder { radius: CYLINDER_RADIUS, height: CYLINDER_HEIGHT, n_around: around, n_along: along },
        offset: [0.0; 3],
        jitter: None,
    };
    let mut s = base(p, mesh, false);
    let angle = p.angle.unwrap_or(0.25 * PI);
    let eps = 1e-6;
    let top = Selector::rest_box([-BIG, -BIG, CYLINDER_HEIGHT - eps], [BIG, BIG, BIG]);
    let twist = |a: f64| Action::MoveHandles {
        group: "top".into(),
        selector: top.clone(),
        stiffness: super::DEFAULT_HANDLE_STIFFNESS,
        motion: RigidMotion { axis_point: [0.0; 3], axis: [0.0, 0.0, 1.0], angle: a, translation: [0.0; 3] },
        easing: Easing::Smoothstep,
    };
    let mut ev = vec![
        Event::at(0.0, Action::Pin { selector: Selector::rest_box([-BIG, -BIG, -BIG], [BIG, BIG, eps]) }),
        Event::span(0.0, 1.0, twist(angle)),
    ];
    let t = push_hold(&mut ev, 1.0, p);
    ev.push(Event::at(t, measure("held", None)));
    ev.push(Event::span(t, 1.0, twist(-angle)));
    ev.push(Event::at(t + 1.0 + p.settle, measure("final", Some("held"))));
    s.events = ev;
    s.torque = Some(TorqueSpec { group: "top".into(), axis_point: [0.0; 3], axis: [0.0, 0.0, 1.0] });
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_names_build() {
        for n in NAMES {
            let s = canonical(n, &Params::default()).unwrap();
            assert_eq!(s.name, n);
            s.validate().unwrap();
        }
        assert!(canonical("nope", &Params::default()).is_err());
        assert!(canonical("press_weight", &Params { hold: -1.0, ..Params::default() }).is_err());
    }

    #[test]
    fn hold_window_scales_clock() {
        let s = canonical("single_wrinkle_friction", &Params::default()).unwrap();
        let hold = s.events.iter().find(|e| matches!(e.action, Action::Hold { .. })).unwrap();
        assert_eq!(hold.duration, HOLD_WINDOW);
        assert!(matches!(hold.action, Action::Hold { dwell: Some(d), .. } if d == 500.0));
        let short = canonical("single_wrinkle_friction", &Params { hold: 0.2, ..Params::default() }).unwrap();
        let hold = short.events.iter().find(|e| matches!(e.action, Action::Hold { .. })).unwrap();
        assert_eq!(hold.duration, 0.2);
    }

    #[test]
    fn ablation_models() {
        let f = canonical("single_wrinkle_friction", &Params::default()).unwrap().model_config();
        assert_eq!(f.plasticity, PlasticModel::Off);
        assert_eq!(f.friction, FrictionModel::TimeDependent);
        let p = canonical("single_wrinkle_plastic", &Params::default()).unwrap().model_config();
        assert_eq!(p.friction, FrictionModel::Off);
        assert_eq!(p.plasticity, PlasticModel::TimeDependent);
    }
}
