//! Declarative experiment scripts and the runner that plays them.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::analysis::{crease_set, wrinkle_metric, TorqueSample, CREASE_THRESHOLD};
use crate::contact::Obstacle;
use crate::inelastic::{FrictionModel, ModelConfig, ModelSelector, PlasticModel};
use crate::material::{preset, MaterialParams, PresetFamily, TensileParams};
use crate::mesh::{build_cylinder, build_grid, ClothMesh};
use crate::obj::mesh_from_obj;
use crate::solver::{Handle, SolverConfig, StepReport, Simulator};
use crate::{Error, Result, Vec3};

pub mod library;
pub mod output;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshShape {
    Grid { width: f64, height: f64, nx: usize, ny: usize },
    Cylinder { radius: f64, height: f64, n_around: usize, n_along: usize },
    Obj { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    pub seed: u64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    #[serde(flatten)]
    pub shape: MeshShape,
    /// Rigid translation applied to rest and current positions.
    #[serde(default)]
    pub offset: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<Jitter>,
}

impl MeshConfig {
    pub fn grid(width: f64, height: f64, nx: usize, ny: usize) -> Self {
        Self { shape: MeshShape::Grid { width, height, nx, ny }, offset: [0.0; 3], jitter: None }
    }

    /// Builds the mesh; relative OBJ paths resolve against `base_dir`.
    pub fn build(&self, density: f64, base_dir: Option<&Path>) -> Result<ClothMesh> {
        let mut mesh = match &self.shape {
            MeshShape::Grid { width, height, nx, ny } => build_grid(*width, *height, *nx, *ny, density)?,
            MeshShape::Cylinder { radius, height, n_around, n_along } => {
                build_cylinder(*radius, *height, *n_around, *n_along, density)?
            }
            MeshShape::Obj { path } => {
                let p = match base_dir {
                    Some(d) if path.is_relative() => d.join(path),
                    _ => path.clone(),
                };
                mesh_from_obj(BufReader::new(File::open(&p)?), density)?
            }
        };
        mesh.translate(Vec3::from(self.offset));
        if let Some(j) = self.jitter {
            if !(j.amplitude >= 0.0 && j.amplitude.is_finite()) {
                return Err(Error::Config("jitter amplitude must be >= 0".into()));
            }
            mesh.jitter(j.amplitude, j.seed);
        }
        Ok(mesh)
    }
}

/// A preset name, a preset with tensile overrides, or a full parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Name(String),
    Preset {
        preset: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tensile: Option<TensileParams>,
    },
    Inline(MaterialParams),
}

impl MaterialSpec {
    pub fn resolve(&self) -> Result<MaterialParams> {
        let m = match self {
            MaterialSpec::Name(n) => preset(n, PresetFamily::Specimen)?,
            MaterialSpec::Preset { preset: n, tensile } => {
                let mut m = preset(n, PresetFamily::Specimen)?;
                if let Some(t) = tensile {
                    let o = &mut m.tensile;
                    o.k11f = t.k11f.or(o.k11f);
                    o.k22f = t.k22f.or(o.k22f);
                    o.k33f = t.k33f.or(o.k33f);
                    o.eps0 = t.eps0.or(o.eps0);
                    o.eps_inf = t.eps_inf.or(o.eps_inf);
                    o.eps_y0 = t.eps_y0.or(o.eps_y0);
                }
                m
            }
            MaterialSpec::Inline(m) => *m,
        };
        m.validated()
    }

    pub fn name(&self) -> String {
        match self {
            MaterialSpec::Name(n) | MaterialSpec::Preset { preset: n, .. } => n.clone(),
            MaterialSpec::Inline(_) => "custom".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Selector {
    All,
    Indices { indices: Vec<usize> },
    /// Vertices whose rest position lies in the closed box.
    RestBox { min: [f64; 3], max: [f64; 3] },
}

impl Selector {
    pub fn rest_box(min: [f64; 3], max: [f64; 3]) -> Self {
        Selector::RestBox { min, max }
    }

    pub fn select(&self, mesh: &ClothMesh) -> Vec<usize> {
        match self {
            Selector::All => (0..mesh.vertex_count()).collect(),
            Selector::Indices { indices } => indices.clone(),
            Selector::RestBox { min, max } => {
                const SLACK: f64 = 1e-9;
                mesh.rest_positions
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| (0..3).all(|k| p[k] >= min[k] - SLACK && p[k] <= max[k] + SLACK))
                    .map(|(i, _)| i)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Easing {
    #[default]
    Linear,
    Smoothstep,
}

impl Easing {
    pub fn apply(self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            Easing::Linear => s,
            Easing::Smoothstep => s * s * (3.0 - 2.0 * s),
        }
    }
}

/// Rotation by `angle` about the line through `axis_point` along `axis`, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigidMotion {
    pub axis_point: [f64; 3],
    pub axis: [f64; 3],
    pub angle: f64,
    pub translation: [f64; 3],
}

impl Default for RigidMotion {
    fn default() -> Self {
        Self { axis_point: [0.0; 3], axis: [0.0, 0.0, 1.0], angle: 0.0, translation: [0.0; 3] }
    }
}

impl RigidMotion {
    /// Applies fraction `s` of the motion to `p`.
    pub fn apply(&self, p: Vec3, s: f64) -> Vec3 {
        let c = Vec3::from(self.axis_point);
        let rotated = if self.angle != 0.0 {
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::from(self.axis)), s * self.angle);
            c + r * (p - c)
        } else {
            p
        };
        rotated + s * Vec3::from(self.translation)
    }
}

pub const DEFAULT_HANDLE_STIFFNESS: f64 = 100.0;

fn default_handle_stiffness() -> f64 {
    DEFAULT_HANDLE_STIFFNESS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Pin { selector: Selector },
    Unpin { selector: Selector },
    /// Drives a handle group along a rigid motion. Vertices already in the
    /// group start from their current targets, others from their positions.
    MoveHandles {
        group: String,
        selector: Selector,
        #[serde(default = "default_handle_stiffness")]
        stiffness: f64,
        #[serde(default)]
        motion: RigidMotion,
        #[serde(default)]
        easing: Easing,
    },
    /// Moves an obstacle's translation to `offset` over the event duration.
    SetObstaclePose {
        obstacle: String,
        offset: [f64; 3],
        #[serde(default)]
        easing: Easing,
    },
    /// Accelerates the friction and hardening clocks while active.
    /// `dwell` (s) sets `time_scale = dwell / duration`.
    Hold {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        time_scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dwell: Option<f64>,
    },
    /// Removes a handle group, or all groups when `group` is absent.
    Release {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        group: Option<String>,
    },
    /// Records hinge deviations; with `reference`, also recovery against that earlier record.
    Measure {
        tag: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<String>,
    },
    ZeroVelocity,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Pin { .. } => "pin",
            Action::Unpin { .. } => "unpin",
            Action::MoveHandles { .. } => "move_handles",
            Action::SetObstaclePose { .. } => "set_obstacle_pose",
            Action::Hold { .. } => "hold",
            Action::Release { .. } => "release",
            Action::Measure { .. } => "measure",
            Action::ZeroVelocity => "zero_velocity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub start: f64,
    #[serde(default)]
    pub duration: f64,
    pub action: Action,
}

impl Event {
    pub fn at(start: f64, action: Action) -> Self {
        Self { start, duration: 0.0, action }
    }

    pub fn span(start: f64, duration: f64, action: Action) -> Self {
        Self { start, duration, action }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorqueSpec {
    pub group: String,
    pub axis_point: [f64; 3],
    pub axis: [f64; 3],
}

fn default_true() -> bool {
    true
}

fn default_snapshot_interval() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub mesh: MeshConfig,
    pub material: MaterialSpec,
    #[serde(default)]
    pub model: ModelSelector,
    /// Friction and plasticity on membrane axes as well as hinges.
    #[serde(default = "default_true")]
    pub tensile: bool,
    /// Overrides the friction law chosen by `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<FrictionModel>,
    /// Overrides the plastic law chosen by `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plasticity: Option<PlasticModel>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub events: Vec<Event>,
    /// Total kinematic time; defaults to the end of the last event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    /// Steps between OBJ snapshots; 0 disables snapshots.
    #[serde(default = "default_snapshot_interval")]
    pub snapshot_interval: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque: Option<TorqueSpec>,
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn model_config(&self) -> ModelConfig {
        let base = ModelConfig::from_selector(self.model);
        ModelConfig {
            friction: self.friction.unwrap_or(base.friction),
            plasticity: self.plasticity.unwrap_or(base.plasticity),
            tensile: self.tensile,
        }
    }

    pub fn end_time(&self) -> f64 {
        let last = self.events.iter().map(|e| e.start + e.duration).fold(0.0, f64::max);
        self.duration.unwrap_or(last)
    }

    /// Checks everything that does not need the mesh.
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let bad = |i: usize, m: String| Err(Error::Config(format!("event {i}: {m}")));
        let mut prev = 0.0;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.start.is_finite() && e.start >= 0.0 && e.duration.is_finite() && e.duration >= 0.0) {
                return bad(i, "start and duration must be finite and >= 0".into());
            }
            if e.start < prev {
                return bad(i, format!("starts at {} before the previous event ({prev})", e.start));
            }
            prev = e.start;
            match &e.action {
                Action::Hold { time_scale, dwell } => {
                    self.hold_scale(e, *time_scale, *dwell).map_err(|m| Error::Config(format!("event {i}: {m}")))?;
                }
                Action::MoveHandles { stiffness, motion, .. } => {
                    if !(*stiffness > 0.0 && stiffness.is_finite()) {
                        return bad(i, "handle stiffness must be positive".into());
                    }
                    if motion.angle != 0.0 && Vec3::from(motion.axis).norm() == 0.0 {
                        return bad(i, "rotation axis must be non-zero".into());
                    }
                }
                Action::SetObstaclePose { obstacle, offset, .. } => {
                    if !self.obstacles.iter().any(|o| &o.name == obstacle) {
                        return bad(i, format!("unknown obstacle `{obstacle}`"));
                    }
                    if !offset.iter().all(|c| c.is_finite()) {
                        return bad(i, "obstacle offset must be finite".into());
                    }
                }
                Action::Measure { reference: Some(r), .. } => {
                    let known = self.events[..i].iter().any(|p| matches!(&p.action, Action::Measure { tag, .. } if tag == r));
                    if !known {
                        return bad(i, format!("reference `{r}` is not an earlier measurement"));
                    }
                }
                _ => {}
            }
        }
        if let Some(t) = &self.torque {
            if Vec3::from(t.axis).norm() == 0.0 {
                return Err(Error::Config("torque axis must be non-zero".into()));
            }
        }
        if !(self.end_time() >= 0.0 && self.end_time().is_finite()) {
            return Err(Error::Config("duration must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn hold_scale(&self, e: &Event, time_scale: Option<f64>, dwell: Option<f64>) -> std::result::Result<f64, String> {
        let s = match (time_scale, dwell) {
            (Some(s), None) => s,
            (None, Some(d)) => {
                if !(e.duration > 0.0) {
                    return Err("a dwell hold needs a positive duration".into());
                }
                d / e.duration
            }
            _ => return Err("hold needs exactly one of `time_scale` or `dwell`".into()),
        };
        if !(s.is_finite() && s >= 1.0) {
            return Err(format!("hold time_scale must be >= 1, got {s}"));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub tag: String,
    pub step: usize,
    pub time_s: f64,
    pub clock_s: f64,
    pub mean_dev_rad: f64,
    pub max_dev_rad: f64,
    pub crease_hinges: usize,
    pub crease_mean_dev_rad: f64,
    pub recovery_pct: Option<f64>,
    pub max_plastic: f64,
    pub max_anchor: f64,
    #[serde(skip)]
    pub deviations: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub measurements: Vec<MeasurementRecord>,
    pub torque: Vec<TorqueSample>,
    pub stats: Vec<StepReport>,
    pub warnings: Vec<String>,
}

impl RunResult {
    pub fn measurement(&self, tag: &str) -> Option<&MeasurementRecord> {
        self.measurements.iter().find(|m| m.tag == tag)
    }
}

#[derive(Debug, Clone)]
struct Planned {
    index: usize,
    start: usize,
    steps: usize,
    action: Action,
    /// Captured when a continuous event starts.
    handle_base: Vec<(usize, Vec3)>,
    obstacle_from: Vec3,
    scale: f64,
}

/// Plays a scenario on one simulator.
pub struct Runner {
    pub sim: Simulator,
    pub scenario: Scenario,
    pub result: RunResult,
    plan: Vec<Planned>,
    total_steps: usize,
    base_time_scale: f64,
    next: usize,
}

fn to_steps(t: f64, h: f64) -> usize {
    (t / h).round() as usize
}

impl Runner {
    pub fn new(scenario: &Scenario, base_dir: Option<&Path>) -> Result<Self> {
        scenario.validate()?;
        let material = scenario.material.resolve()?;
        let mesh = scenario.mesh.build(material.rho, base_dir)?;
        let mut sim = Simulator::new(mesh, material, scenario.model_config(), scenario.solver.clone())?;
        sim.set_obstacles(scenario.obstacles.clone())?;
        let n = sim.mesh.vertex_count();
        let h = scenario.solver.h;
        let mut plan = Vec::with_capacity(scenario.events.len());
        for (index, e) in scenario.events.iter().enumerate() {
            let check = |sel: &Selector| -> Result<()> {
                if let Selector::Indices { indices } = sel {
                    if let Some(&v) = indices.iter().find(|&&v| v >= n) {
                        return Err(Error::Config(format!("event {index}: vertex {v} out of range ({n} vertices)")));
                    }
                }
                Ok(())
            };
            let mut scale = 1.0;
            match &e.action {
                Action::Pin { selector } | Action::Unpin { selector } | Action::MoveHandles { selector, .. } => {
                    check(selector)?
                }
                Action::Hold { time_scale, dwell } => scale = scenario.hold_scale(e, *time_scale, *dwell).map_err(Error::Config)?,
                _ => {}
            }
            plan.push(Planned {
                index,
                start: to_steps(e.start, h),
                steps: to_steps(e.duration, h),
                action: e.action.clone(),
                handle_base: Vec::new(),
                obstacle_from: Vec3::zeros(),
                scale,
            });
        }
        Ok(Self {
            total_steps: to_steps(scenario.end_time(), h),
            base_time_scale: scenario.solver.time_scale,
            sim,
            scenario: scenario.clone(),
            result: RunResult::default(),
            plan,
            next: 0,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Steps taken so far.
    pub fn steps_done(&self) -> usize {
        self.next
    }

    /// Fires due events and advances one step.
    pub fn advance(&mut self) -> Result<&StepReport> {
        let k = self.next;
        self.begin_step(k)?;
        let report = self.sim.step().map_err(|e| self.attach_event(k, e))?;
        self.result.stats.push(report);
        if let Some(t) = &self.scenario.torque {
            let torque = self.sim.handle_torque(&t.group, Vec3::from(t.axis_point), Vec3::from(t.axis));
            self.result.torque.push(TorqueSample { step: self.sim.step_index, time_s: self.sim.time, torque });
        }
        self.next += 1;
        Ok(self.result.stats.last().expect("just pushed"))
    }

    /// Runs to the end. `snapshot` sees the simulator at step 0 and every
    /// `snapshot_interval` steps after.
    pub fn run(&mut self, mut snapshot: impl FnMut(&Simulator) -> Result<()>) -> Result<()> {
        let interval = self.scenario.snapshot_interval;
        if interval > 0 && self.next == 0 {
            snapshot(&self.sim)?;
        }
        while self.next < self.total_steps {
            self.advance()?;
            if interval > 0 && self.next % interval == 0 {
                snapshot(&self.sim)?;
            }
        }
        self.fire_instant(self.total_steps)?;
        self.result.warnings = self.sim.warnings.clone();
        Ok(())
    }

    fn attach_event(&self, k: usize, e: Error) -> Error {
        match self.plan.iter().rev().find(|p| p.start <= k) {
            Some(p) => Error::Event { index: p.index, action: p.action.name().into(), source: Box::new(e) },
            None => e,
        }
    }

    fn begin_step(&mut self, k: usize) -> Result<()> {
        self.fire_instant(k)?;
        let mut scale = self.base_time_scale;
        for i in 0..self.plan.len() {
            let p = &self.plan[i];
            if p.start > k || (p.steps > 0 && k >= p.start + p.steps) || (p.steps == 0 && k > p.start) {
                continue;
            }
            let s = if p.steps == 0 { 1.0 } else { ((k + 1 - p.start) as f64 / p.steps as f64).min(1.0) };
            match &p.action {
                Action::MoveHandles { group, motion, easing, .. } => {
                    let s = easing.apply(s);
                    let targets: Vec<Vec3> = p.handle_base.iter().map(|(_, b)| motion.apply(*b, s)).collect();
                    if let Some(hs) = self.sim.handles.group_mut(group) {
                        for (h, t) in hs.iter_mut().zip(targets) {
                            h.target = t;
                        }
                    }
                }
                Action::SetObstaclePose { obstacle, offset, easing } => {
                    let s = easing.apply(s);
                    let to = Vec3::from(*offset);
                    let from = p.obstacle_from;
                    if let Some(o) = self.sim.obstacles_mut().iter_mut().find(|o| &o.name == obstacle) {
                        o.offset = from + s * (to - from);
                    }
                }
                Action::Hold { .. } if p.steps > 0 => scale = p.scale,
                _ => {}
            }
        }
        self.sim.config.time_scale = scale;
        Ok(())
    }

    /// Applies every event starting at step `k`, in script order.
    fn fire_instant(&mut self, k: usize) -> Result<()> {
        for i in 0..self.plan.len() {
            if self.plan[i].start != k {
                continue;
            }
            let index = self.plan[i].index;
            let action = self.plan[i].action.clone();
            let wrap = |e: Error| Error::Event { index, action: action.name().into(), source: Box::new(e) };
            match &action {
                Action::Pin { selector } => {
                    for v in selector.select(&self.sim.mesh) {
                        self.sim.pin(v);
                    }
                }
                Action::Unpin { selector } => {
                    for v in selector.select(&self.sim.mesh) {
                        self.sim.unpin(v);
                    }
                }
                Action::MoveHandles { group, selector, stiffness, .. } => {
                    let existing: std::collections::HashMap<usize, Vec3> = self
                        .sim
                        .handles
                        .group(group)
                        .map(|hs| hs.iter().map(|h| (h.vertex, h.target)).collect())
                        .unwrap_or_default();
                    let base: Vec<(usize, Vec3)> = selector
                        .select(&self.sim.mesh)
                        .into_iter()
                        .map(|v| (v, existing.get(&v).copied().unwrap_or(self.sim.mesh.positions[v])))
                        .collect();
                    let handles =
                        base.iter().map(|&(vertex, target)| Handle { vertex, target, stiffness: *stiffness }).collect();
                    self.sim.handles.set_group(group, handles).map_err(wrap)?;
                    self.plan[i].handle_base = base;
                }
                Action::SetObstaclePose { obstacle, .. } => {
                    let from = self.sim.obstacles().iter().find(|o| &o.name == obstacle).map(|o| o.offset);
                    self.plan[i].obstacle_from = from.unwrap_or_default();
                }
                Action::Hold { .. } => {}
                Action::Release { group } => match group {
                    Some(g) => {
                        self.sim.handles.remove_group(g);
                    }
                    None => self.sim.handles.clear(),
                },
                Action::Measure { tag, reference } => {
                    let rec = self.measure(tag, reference.as_deref()).map_err(wrap)?;
                    self.result.measurements.push(rec);
                }
                Action::ZeroVelocity => self.sim.zero_velocities(),
            }
        }
        Ok(())
    }

    fn measure(&self, tag: &str, reference: Option<&str>) -> Result<MeasurementRecord> {
        let dev = self.sim.hinge_deviations()?;
        let all = wrinkle_metric(&dev, None);
        let reference = match reference {
            Some(r) => Some(
                self.result
                    .measurement(r)
                    .ok_or_else(|| Error::Config(format!("reference measurement `{r}` was not recorded")))?,
            ),
            None => None,
        };
        let held = reference.map_or(&dev, |r| &r.deviations);
        let set = crease_set(held, CREASE_THRESHOLD);
        let crease = wrinkle_metric(&dev, Some(&set));
        let recovery = match reference {
            Some(r) if !set.is_empty() => Some(crate::analysis::crease_recovery(&r.deviations, &dev, CREASE_THRESHOLD)?),
            _ => None,
        };
        let max_plastic = self.sim.hinge_states.iter().map(|s| s.plastic.plastic.abs()).fold(0.0, f64::max);
        let max_anchor = self.sim.hinge_states.iter().map(|s| s.friction.anchor.abs()).fold(0.0, f64::max);
        Ok(MeasurementRecord {
            tag: tag.to_string(),
            step: self.sim.step_index,
            time_s: self.sim.time,
            clock_s: self.sim.clock,
            mean_dev_rad: all.mean_deviation,
            max_dev_rad: all.max_deviation,
            crease_hinges: set.len(),
            crease_mean_dev_rad: crease.mean_deviation,
            recovery_pct: recovery,
            max_plastic,
            max_anchor,
            deviations: dev,
        })
    }
}

/// Runs a scenario to completion without snapshots.
pub fn run(scenario: &Scenario) -> Result<(Simulator, RunResult)> {
    let mut r = Runner::new(scenario, None)?;
    r.run(|_| Ok(()))?;
    Ok((r.sim, r.result))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(events: Vec<Event>) -> Scenario {
        Scenario {
            name: "flat".into(),
            mesh: MeshConfig::grid(0.1, 0.1, 6, 6),
            material: MaterialSpec::Name("cotton".into()),
            model: ModelSelector::Paper,
            tensile: true,
            friction: None,
            plasticity: None,
            solver: SolverConfig { gravity: [0.0; 3], ..SolverConfig::default() },
            obstacles: vec![],
            events,
            duration: Some(0.2),
            snapshot_interval: 5,
            torque: None,
        }
    }

    #[test]
    fn empty_script_keeps_flat_sheet() {
        let mut s = flat(vec![Event::at(0.0, Action::Pin { selector: Selector::Indices { indices: vec![0] } })]);
        s.events.clear();
        let mut r = Runner::new(&s, None).unwrap();
        let mut frames = Vec::new();
        r.run(|sim| {
            frames.push(sim.mesh.positions.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(frames.len(), 5);
        for f in &frames[1..] {
            for (a, b) in f.iter().zip(&frames[0]) {
                assert!((a - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let s = library::canonical("cylinder_twist", &library::Params::default()).unwrap();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let text = r#"{"mesh": {"type": "grid", "width": 0.1, "height": 0.1, "nx": 3, "ny": 3},
                       "material": {"preset": "cotton", "tensile": {"eps0t": 0.002}},
                       "events": [{"start": 0, "action": {"type": "measure", "tag": "a"}}]}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.material.resolve().unwrap().tensile.eps0, Some(0.002));
        assert!(Scenario::from_json(r#"{"mesh": {"type": "grid"}, "material": "cotton"}"#).is_err());
    }

    #[test]
    fn validation_errors() {
        let mut s = flat(vec![Event::span(0.0, 0.1, Action::Hold { time_scale: Some(0.5), dwell: None })]);
        assert!(s.validate().is_err());
        s.events = vec![Event::at(0.1, Action::ZeroVelocity), Event::at(0.05, Action::ZeroVelocity)];
        assert!(s.validate().is_err());
        s.events = vec![Event::at(0.0, Action::Measure { tag: "b".into(), reference: Some("a".into()) })];
        assert!(s.validate().is_err());
        s.events = vec![Event::at(0.0, Action::Pin { selector: Selector::Indices { indices: vec![1000] } })];
        assert!(Runner::new(&s, None).is_err());
        s.events.clear();
        s.material = MaterialSpec::Name("silk".into());
        assert!(matches!(Runner::new(&s, None), Err(Error::UnknownPreset { .. })));
    }

    #[test]
    fn hold_scales_clock_only() {
        let s = flat(vec![Event::span(0.0, 0.1, Action::Hold { time_scale: None, dwell: Some(100.0) })]);
        let (sim, _) = run(&s).unwrap();
        assert!((sim.time - 0.2).abs() < 1e-12);
        assert!((sim.clock - (100.0 + 0.1)).abs() < 1e-9);
    }

    #[test]
    fn handles_follow_motion() {
        let motion = RigidMotion { translation: [0.0, 0.0, 0.01], ..RigidMotion::default() };
        let s = flat(vec![Event::span(
            0.0,
            0.1,
            Action::MoveHandles { group: "g".into(), selector: Selector::Indices { indices: vec![7] }, stiffness: 10.0, motion, easing: Easing::Linear },
        )]);
        let mut r = Runner::new(&s, None).unwrap();
        let z0 = r.sim.mesh.positions[7].z;
        r.run(|_| Ok(())).unwrap();
        let h = r.sim.handles.group("g").unwrap()[0];
        assert!((h.target.z - (z0 + 0.01)).abs() < 1e-15);
    }

    #[test]
    fn easing_endpoints() {
        for e in [Easing::Linear, Easing::Smoothstep] {
            assert_eq!(e.apply(0.0), 0.0);
            assert_eq!(e.apply(1.0), 1.0);
            assert_eq!(e.apply(2.0), 1.0);
        }
        assert_eq!(Easing::Smoothstep.apply(0.5), 0.5);
    }
}
