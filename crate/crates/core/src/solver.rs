//! Linearized implicit Euler stepping with block-Jacobi CG.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{contact_forces, self_collision_forces, ContactState, Obstacle, SelfCollision};
use crate::elastic::{bending_energy, membrane_force, stretch_energy};
use crate::inelastic::{update_channel, ChannelParams, ChannelState, ChannelReport, ModelConfig};
use crate::material::MaterialParams;
use crate::mesh::ClothMesh;
use crate::sparse::{cg_solve_from, BlockMatrix, BlockPattern, CgReport};
use crate::{Error, Mat3, Result, Vec3};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Damping {
    /// Mass-proportional coefficient α (1/s): `f = −α M v`.
    pub mass: f64,
    /// Stiffness-proportional coefficient β (s): `f = β J_x v`.
    pub stiffness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub h: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub gravity: [f64; 3],
    pub damping: Damping,
    /// Multiplier on `h` for the friction and hardening clocks.
    pub time_scale: f64,
    /// A friction deviation above this many `ε_inf` trips the step-size warning.
    pub friction_guard_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_collision: Option<SelfCollision>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 0.01,
            cg_tol: 1e-6,
            cg_max_iters: 1000,
            gravity: [0.0, 0.0, -9.81],
            damping: Damping::default(),
            time_scale: 1.0,
            friction_guard_factor: 10.0,
            self_collision: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad("h must be positive");
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return bad("cg_tol must lie in (0, 1)");
        }
        if self.cg_max_iters == 0 {
            return bad("cg_max_iters must be positive");
        }
        if !(self.time_scale.is_finite() && self.time_scale >= 1.0) {
            return bad("time_scale must be >= 1");
        }
        if !(self.damping.mass >= 0.0 && self.damping.stiffness >= 0.0) {
            return bad("damping coefficients must be >= 0");
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return bad("gravity must be finite");
        }
        if !(self.friction_guard_factor > 0.0) {
            return bad("friction_guard_factor must be positive");
        }
        Ok(())
    }

    pub fn gravity(&self) -> Vec3 {
        Vec3::from(self.gravity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Handle {
    pub vertex: usize,
    pub target: Vec3,
    pub stiffness: f64,
}

impl Handle {
    /// Restoring force `−k (x − x_h)`.
    pub fn force(&self, x: Vec3) -> Vec3 {
        -self.stiffness * (x - self.target)
    }
}

/// Named groups of penalty handles, iterated in name order.
#[derive(Debug, Clone, Default)]
pub struct HandleSet {
    groups: BTreeMap<String, Vec<Handle>>,
}

impl HandleSet {
    pub fn set_group(&mut self, name: &str, handles: Vec<Handle>) -> Result<()> {
        for h in &handles {
            if !(h.stiffness > 0.0 && h.stiffness.is_finite()) {
                return Err(Error::Config(format!("handle stiffness must be positive (vertex {})", h.vertex)));
            }
            if !h.target.iter().all(|c| c.is_finite()) {
                return Err(Error::Config(format!("handle target for vertex {} is not finite", h.vertex)));
            }
        }
        self.groups.insert(name.to_string(), handles);
        Ok(())
    }

    pub fn group(&self, name: &str) -> Option<&[Handle]> {
        self.groups.get(name).map(Vec::as_slice)
    }

    pub fn group_mut(&mut self, name: &str) -> Option<&mut Vec<Handle>> {
        self.groups.get_mut(name)
    }

    pub fn remove_group(&mut self, name: &str) -> Option<Vec<Handle>> {
        self.groups.remove(name)
    }

    pub fn clear(&mut self) {
        self.groups.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &Handle> {
        self.groups.values().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.values().all(Vec::is_empty)
    }
}

/// Assembled forces and Jacobians for one step.
#[derive(Debug, Clone)]
pub struct ForceAccumulator {
    pub f: Vec<Vec3>,
    /// `∂f/∂x`.
    pub jx: BlockMatrix,
    /// `∂f/∂v`.
    pub jv: BlockMatrix,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub slips: usize,
    pub yields: usize,
    pub guard_trips: usize,
    pub max_guard_ratio: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Energy {
    pub kinetic: f64,
    pub bending: f64,
    pub stretching: f64,
    pub gravity: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.bending + self.stretching + self.gravity
    }
}

#[derive(Debug, Clone)]
pub struct Simulator {
    pub mesh: ClothMesh,
    pub material: MaterialParams,
    pub model: ModelConfig,
    pub config: SolverConfig,
    pub hinge_states: Vec<ChannelState>,
    pub face_states: Vec<[ChannelState; 3]>,
    pub handles: HandleSet,
    obstacles: Vec<Obstacle>,
    contact: ContactState,
    bend_params: ChannelParams,
    tensile_params: [ChannelParams; 3],
    pattern: Arc<BlockPattern>,
    hinge_slots: Vec<[[usize; 4]; 4]>,
    face_slots: Vec<[[usize; 3]; 3]>,
    /// Kinematic time.
    pub time: f64,
    pub step_index: usize,
    /// Accumulated friction/hardening clock (`Σ h · time_scale`).
    pub clock: f64,
    pub warnings: Vec<String>,
    pub guard_trip_steps: usize,
    /// Previous velocity change, used to warm-start CG.
    last_dv: Vec<Vec3>,
}

pub const STEP_SIZE_ADVICE: &str = "reduce the time step (recommended h = 0.001 s)";

impl Simulator {
    pub fn new(mesh: ClothMesh, material: MaterialParams, model: ModelConfig, config: SolverConfig) -> Result<Self> {
        let material = material.validated()?;
        config.validate()?;
        let n = mesh.vertex_count();
        let pattern = Arc::new(BlockPattern::from_elements(
            n,
            mesh.faces.iter().map(|f| f.as_slice()).chain(mesh.hinges.iter().map(|h| h.as_slice())),
        ));
        let hinge_slots = mesh.hinges.iter().map(|h| pattern.element_slots(h)).collect();
        let face_slots = mesh.faces.iter().map(|f| pattern.element_slots(f)).collect();
        let bend_params = ChannelParams::bending(&material, &model);
        let tensile_params = ChannelParams::tensile(&material, &model);
        let hinge_states = vec![ChannelState::new(&bend_params); mesh.hinges.len()];
        let face_states =
            vec![std::array::from_fn(|k| ChannelState::new(&tensile_params[k])); mesh.faces.len()];
        Ok(Self {
            contact: ContactState::new(0, n),
            mesh,
            material,
            model,
            config,
            hinge_states,
            face_states,
            handles: HandleSet::default(),
            obstacles: Vec::new(),
            bend_params,
            tensile_params,
            pattern,
            hinge_slots,
            face_slots,
            time: 0.0,
            step_index: 0,
            clock: 0.0,
            warnings: Vec::new(),
            guard_trip_steps: 0,
            last_dv: Vec::new(),
        })
    }

    pub fn set_obstacles(&mut self, obstacles: Vec<Obstacle>) -> Result<()> {
        for o in &obstacles {
            if !(o.stiffness > 0.0 && o.thickness >= 0.0 && o.friction >= 0.0) {
                return Err(Error::Config(format!("obstacle `{}` needs k_c > 0, δ >= 0, μ >= 0", o.name)));
            }
        }
        self.contact = ContactState::new(obstacles.len(), self.mesh.vertex_count());
        self.obstacles = obstacles;
        Ok(())
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn obstacles_mut(&mut self) -> &mut [Obstacle] {
        &mut self.obstacles
    }

    pub fn contact_state(&self) -> &ContactState {
        &self.contact
    }

    pub fn bend_params(&self) -> &ChannelParams {
        &self.bend_params
    }

    pub fn tensile_params(&self) -> &[ChannelParams; 3] {
        &self.tensile_params
    }

    pub fn pattern(&self) -> &Arc<BlockPattern> {
        &self.pattern
    }

    pub fn pin(&mut self, vertex: usize) {
        self.mesh.pinned[vertex] = true;
        self.mesh.velocities[vertex] = Vec3::zeros();
    }

    pub fn unpin(&mut self, vertex: usize) {
        self.mesh.pinned[vertex] = false;
    }

    /// Stops every vertex and drops the solver's warm start.
    pub fn zero_velocities(&mut self) {
        self.mesh.velocities.iter_mut().for_each(|v| *v = Vec3::zeros());
        self.last_dv.clear();
    }

    fn face_model(&self) -> ModelConfig {
        if self.model.tensile {
            self.model
        } else {
            ModelConfig::elastic()
        }
    }

    /// Current angle deviation `θ − θ̄` for every hinge.
    pub fn hinge_deviations(&self) -> Result<Vec<f64>> {
        let x = &self.mesh.positions;
        (0..self.mesh.hinges.len())
            .into_par_iter()
            .map(|h| Ok(self.mesh.dihedral(h, x)?.angle - self.mesh.hinge_rest[h].rest_angle))
            .collect()
    }

    pub fn hinge_angles(&self) -> Result<Vec<f64>> {
        let x = &self.mesh.positions;
        (0..self.mesh.hinges.len()).into_par_iter().map(|h| Ok(self.mesh.dihedral(h, x)?.angle)).collect()
    }

    pub fn face_strains(&self) -> Result<Vec<Vec3>> {
        let x = &self.mesh.positions;
        (0..self.mesh.faces.len()).into_par_iter().map(|f| Ok(self.mesh.green_strain(f, x)?.strain)).collect()
    }

    /// Internal, gravity, damping and handle forces at the current state.
    pub fn internal_forces(&self) -> Result<ForceAccumulator> {
        let mesh = &self.mesh;
        let x = &mesh.positions;
        let n = mesh.vertex_count();
        let model = self.model;
        let kb = self.material.kb();
        let bp = self.bend_params;

        let hinge_terms: Vec<([Vec3; 4], f64, f64)> = (0..mesh.hinges.len())
            .into_par_iter()
            .with_min_len(512)
            .map(|h| {
                let d = mesh.dihedral(h, x)?;
                let r = &mesh.hinge_rest[h];
                let q = d.angle - r.rest_angle;
                let st = &self.hinge_states[h];
                let e = st.elastic_stress_strain(q, &model);
                let (fs, fk) = st.friction_stress(q, &bp, &model);
                let s = r.strain_scale();
                let c = r.area * s * s;
                Ok((d.gradient, c * (kb * e + fs), c * (kb + fk)))
            })
            .collect::<Result<_>>()?;

        let fm = self.face_model();
        let ks = self.material.stretch_stiffness();
        let tp = self.tensile_params;
        let face_terms: Vec<crate::elastic::ElementForce<3>> = (0..mesh.faces.len())
            .into_par_iter()
            .with_min_len(512)
            .map(|f| {
                let g = mesh.green_strain(f, x)?;
                let st = &self.face_states[f];
                let e = Vec3::from_fn(|k, _| st[k].elastic_stress_strain(g.strain[k], &fm));
                let mut stress = ks * e;
                let mut tangent = ks;
                for k in 0..3 {
                    let (fs, fk) = st[k].friction_stress(g.strain[k], &tp[k], &fm);
                    stress[k] += fs;
                    tangent[(k, k)] += fk;
                }
                Ok(membrane_force(&stress, &tangent, mesh.face_rest[f].area, &g.grad))
            })
            .collect::<Result<_>>()?;

        let mut f = vec![Vec3::zeros(); n];
        let mut jx = BlockMatrix::zeros(self.pattern.clone());
        for (h, (grad, stress, stiff)) in hinge_terms.iter().enumerate() {
            let v = mesh.hinges[h];
            let slots = &self.hinge_slots[h];
            for a in 0..4 {
                f[v[a]] -= *stress * grad[a];
                for b in 0..4 {
                    jx.blocks[slots[a][b]] -= *stiff * grad[a] * grad[b].transpose();
                }
            }
        }
        for (fi, el) in face_terms.iter().enumerate() {
            let v = mesh.faces[fi];
            let slots = &self.face_slots[fi];
            for a in 0..3 {
                f[v[a]] += el.force[a];
                for b in 0..3 {
                    jx.blocks[slots[a][b]] += el.jacobian[a][b];
                }
            }
        }

        let mut jv = BlockMatrix::zeros(self.pattern.clone());
        let beta = self.config.damping.stiffness;
        if beta > 0.0 {
            let mut jxv = vec![Vec3::zeros(); n];
            jx.mul_vec(&mesh.velocities, &mut jxv);
            for i in 0..n {
                f[i] += beta * jxv[i];
            }
            for (dst, src) in jv.blocks.iter_mut().zip(&jx.blocks) {
                *dst = beta * src;
            }
        }
        let g = self.config.gravity();
        let alpha = self.config.damping.mass;
        for i in 0..n {
            let m = mesh.lumped_mass[i];
            f[i] += m * g;
            if alpha > 0.0 {
                f[i] -= alpha * m * mesh.velocities[i];
                jv.add_diag(i, &(-alpha * m * Mat3::identity()));
            }
        }
        for hd in self.handles.iter() {
            f[hd.vertex] += hd.force(x[hd.vertex]);
            jx.add_diag(hd.vertex, &(-hd.stiffness * Mat3::identity()));
        }
        Ok(ForceAccumulator { f, jx, jv })
    }

    /// Full assembly, refreshing contact stick anchors at the current positions.
    pub fn assemble(&mut self) -> Result<ForceAccumulator> {
        let mut acc = self.internal_forces()?;
        let n = self.mesh.vertex_count();
        if !self.obstacles.is_empty() || self.config.self_collision.is_some() {
            let mut jd = vec![Mat3::zeros(); n];
            contact_forces(&self.obstacles, &self.mesh.positions, &self.mesh.pinned, &mut self.contact, &mut acc.f, &mut jd);
            if let Some(sc) = &self.config.self_collision {
                self_collision_forces(sc, &self.mesh.faces, &self.mesh.positions, &mut acc.f, &mut jd);
            }
            for (i, j) in jd.iter().enumerate() {
                if *j != Mat3::zeros() {
                    acc.jx.add_diag(i, j);
                }
            }
        }
        Ok(acc)
    }

    /// Builds `(M − h² J_x − h J_v)` and `h (f + h J_x v)`.
    pub fn system(&self, acc: &ForceAccumulator) -> (BlockMatrix, Vec<Vec3>) {
        let h = self.config.h;
        let n = self.mesh.vertex_count();
        let mut a = BlockMatrix::zeros(self.pattern.clone());
        for ((dst, jx), jv) in a.blocks.iter_mut().zip(&acc.jx.blocks).zip(&acc.jv.blocks) {
            *dst = -h * h * jx - h * jv;
        }
        for i in 0..n {
            a.add_diag(i, &(self.mesh.lumped_mass[i] * Mat3::identity()));
        }
        let mut jxv = vec![Vec3::zeros(); n];
        acc.jx.mul_vec(&self.mesh.velocities, &mut jxv);
        let rhs = (0..n).map(|i| h * (acc.f[i] + h * jxv[i])).collect();
        (a, rhs)
    }

    /// Advances one step: assemble, solve, integrate, then update hysteresis state.
    pub fn step(&mut self) -> Result<StepReport> {
        let start = Instant::now();
        let acc = self.assemble()?;
        let (a, rhs) = self.system(&acc);
        let guess = (self.last_dv.len() == rhs.len()).then_some(self.last_dv.as_slice());
        let (dv, cg) = cg_solve_from(&a, &rhs, &self.mesh.pinned, guess, self.config.cg_tol, self.config.cg_max_iters)?;
        self.integrate(&dv)?;
        self.last_dv = dv;
        let mut report = self.update_states();
        self.finish_report(&mut report, cg, start);
        Ok(report)
    }

    fn integrate(&mut self, dv: &[Vec3]) -> Result<()> {
        let h = self.config.h;
        let mesh = &mut self.mesh;
        for i in 0..mesh.vertex_count() {
            if mesh.pinned[i] {
                mesh.velocities[i] = Vec3::zeros();
                continue;
            }
            mesh.velocities[i] += dv[i];
            mesh.positions[i] += h * mesh.velocities[i];
        }
        if let Some(i) = mesh
            .positions
            .iter()
            .zip(&mesh.velocities)
            .position(|(x, v)| !(x.iter().all(|c| c.is_finite()) && v.iter().all(|c| c.is_finite())))
        {
            return Err(Error::NonFinite { vertex: i });
        }
        self.time += h;
        self.step_index += 1;
        Ok(())
    }

    /// Updates friction and plastic state against the current positions.
    pub fn update_states(&mut self) -> StepReport {
        let clock_dt = self.config.h * self.config.time_scale;
        self.clock += clock_dt;
        let mut report = StepReport::default();
        let model = self.model;
        let fm = self.face_model();
        let hinge_on = model.friction != crate::inelastic::FrictionModel::Off
            || model.plasticity != crate::inelastic::PlasticModel::Off;
        let face_on = fm.friction != crate::inelastic::FrictionModel::Off
            || fm.plasticity != crate::inelastic::PlasticModel::Off;
        let mesh = &self.mesh;
        let x = &mesh.positions;
        let tally = |r: &ChannelReport, guard: f64, rep: &mut StepReport| {
            rep.slips += r.slipped as usize;
            rep.yields += (r.flow > 0.0) as usize;
            if r.guard_ratio > guard {
                rep.guard_trips += 1;
            }
            rep.max_guard_ratio = rep.max_guard_ratio.max(r.guard_ratio);
        };
        let guard = self.config.friction_guard_factor;
        if hinge_on {
            let bp = self.bend_params;
            let reports: Vec<ChannelReport> = self
                .hinge_states
                .par_iter_mut()
                .enumerate()
                .with_min_len(512)
                .map(|(h, st)| {
                    // A degenerate hinge keeps its state; the next assembly reports it.
                    match mesh.dihedral(h, x) {
                        Ok(d) => update_channel(st, d.angle - mesh.hinge_rest[h].rest_angle, clock_dt, &bp, &model),
                        Err(_) => ChannelReport::default(),
                    }
                })
                .collect();
            for r in &reports {
                tally(r, guard, &mut report);
            }
        }
        if face_on {
            let tp = self.tensile_params;
            let reports: Vec<[ChannelReport; 3]> = self
                .face_states
                .par_iter_mut()
                .enumerate()
                .with_min_len(512)
                .map(|(f, st)| match mesh.green_strain(f, x) {
                    Ok(g) => std::array::from_fn(|k| update_channel(&mut st[k], g.strain[k], clock_dt, &tp[k], &fm)),
                    Err(_) => [ChannelReport::default(); 3],
                })
                .collect();
            for r in reports.iter().flatten() {
                tally(r, guard, &mut report);
            }
        }
        if report.guard_trips > 0 {
            self.guard_trip_steps += 1;
            let msg = format!(
                "friction stability guard tripped on {} elements at step {} (max |ε − ε̄| = {:.3} ε_inf); {}",
                report.guard_trips, self.step_index, report.max_guard_ratio, STEP_SIZE_ADVICE
            );
            if self.guard_trip_steps == 1 {
                log::warn!("{msg}");
                self.warnings.push(msg);
            }
        }
        report
    }

    fn finish_report(&self, report: &mut StepReport, cg: CgReport, start: Instant) {
        report.step = self.step_index;
        report.time = self.time;
        report.cg_iterations = cg.iterations;
        report.cg_residual = cg.relative_residual;
        report.wall_seconds = start.elapsed().as_secs_f64();
    }

    pub fn momentum(&self) -> Vec3 {
        self.mesh.velocities.iter().zip(&self.mesh.lumped_mass).map(|(v, m)| *m * v).sum()
    }

    /// Kinetic, elastic (with current plastic offsets) and gravitational energy.
    pub fn energy(&self) -> Result<Energy> {
        let mesh = &self.mesh;
        let x = &mesh.positions;
        let kinetic = 0.5
            * mesh.velocities.iter().zip(&mesh.lumped_mass).map(|(v, m)| m * v.norm_squared()).sum::<f64>();
        let kb = self.material.kb();
        let mut bending = 0.0;
        for h in 0..mesh.hinges.len() {
            let r = &mesh.hinge_rest[h];
            let q = mesh.dihedral(h, x)?.angle - r.rest_angle;
            let e = q - self.hinge_states[h].plastic.plastic;
            bending += bending_energy(r.strain_scale() * e, kb, r.area);
        }
        let ks = self.material.stretch_stiffness();
        let mut stretching = 0.0;
        for f in 0..mesh.faces.len() {
            let s = mesh.green_strain(f, x)?.strain;
            let st = &self.face_states[f];
            let e = Vec3::from_fn(|k, _| s[k] - st[k].plastic.plastic);
            stretching += stretch_energy(&e, &ks, mesh.face_rest[f].area);
        }
        let g = self.config.gravity();
        let gravity = -x.iter().zip(&mesh.lumped_mass).map(|(p, m)| m * g.dot(p)).sum::<f64>();
        Ok(Energy { kinetic, bending, stretching, gravity })
    }

    /// Torque of a handle group's forces about an axis: `Σ (r × f)·axis`.
    pub fn handle_torque(&self, group: &str, axis_point: Vec3, axis: Vec3) -> f64 {
        let a = axis.normalize();
        self.handles.group(group).map_or(0.0, |hs| {
            hs.iter()
                .map(|h| {
                    let x = self.mesh.positions[h.vertex];
                    (x - axis_point).cross(&h.force(x)).dot(&a)
                })
                .sum()
        })
    }
}
