//! Run artifacts: OBJ snapshots, measurement and diagnostic CSVs, manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MeasurementRecord, Runner, Scenario};
use crate::analysis::write_torque_csv;
use crate::obj::write_obj;
use crate::solver::{Simulator, StepReport};
use crate::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub scenario: String,
    pub material: String,
    pub model: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub steps: usize,
    pub vertices: usize,
    pub snapshots: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OutputOptions {
    pub solver_stats: bool,
    pub diagnostics: bool,
    pub threads: usize,
}

pub fn frame_name(step: usize) -> String {
    format!("frame_{step:05}.obj")
}

pub fn write_measurements_csv<W: Write>(w: W, records: &[MeasurementRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct StatsRow {
    step: usize,
    time_s: f64,
    cg_iterations: usize,
    cg_residual: f64,
    wall_s: f64,
    slips: usize,
    yields: usize,
}

pub fn write_solver_stats_csv<W: Write>(w: W, stats: &[StepReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in stats {
        out.serialize(StatsRow {
            step: s.step,
            time_s: s.time,
            cg_iterations: s.cg_iterations,
            cg_residual: s.cg_residual,
            wall_s: s.wall_seconds,
            slips: s.slips,
            yields: s.yields,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FrictionRow {
    element: usize,
    strain: f64,
    elastic: f64,
    anchor: f64,
    t_stick: f64,
    threshold: f64,
}

#[derive(Serialize)]
struct PlasticRow {
    element: usize,
    strain: f64,
    elastic: f64,
    plastic: f64,
    hardening_strain: f64,
    yield_strain: f64,
    hardening: f64,
    t_plastic: f64,
}

/// Per-hinge friction state at the simulator's current pose.
pub fn write_friction_diag<W: Write>(w: W, sim: &Simulator) -> Result<()> {
    let dev = sim.hinge_deviations()?;
    let p = sim.bend_params().friction;
    let mut out = csv::Writer::from_writer(w);
    for (i, (st, q)) in sim.hinge_states.iter().zip(&dev).enumerate() {
        out.serialize(FrictionRow {
            element: i,
            strain: *q,
            elastic: q - st.plastic.plastic,
            anchor: st.friction.anchor,
            t_stick: st.friction.t_stick,
            threshold: p.threshold(st.friction.t_stick),
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Per-hinge plastic state at the simulator's current pose.
pub fn write_plastic_diag<W: Write>(w: W, sim: &Simulator) -> Result<()> {
    let dev = sim.hinge_deviations()?;
    let mut out = csv::Writer::from_writer(w);
    for (i, (st, q)) in sim.hinge_states.iter().zip(&dev).enumerate() {
        let p = &st.plastic;
        out.serialize(PlasticRow {
            element: i,
            strain: *q,
            elastic: q - p.plastic,
            plastic: p.plastic,
            hardening_strain: p.hardening_strain,
            yield_strain: p.yield_strain,
            hardening: p.hardening,
            t_plastic: p.t_plastic,
        })?;
    }
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs `scenario` and writes every artifact into `dir`.
pub fn run_to_dir(scenario: &Scenario, base_dir: Option<&Path>, dir: &Path, opts: OutputOptions, seed: Option<u64>) -> Result<(Runner, Manifest)> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    fs::write(dir.join("scenario.json"), scenario.to_json() + "\n")?;
    let mut runner = Runner::new(scenario, base_dir)?;
    let faces = runner.sim.mesh.faces.clone();
    let mut snapshots = 0usize;
    runner.run(|sim| {
        let mut w = create(&snap_dir.join(frame_name(sim.step_index)))?;
        write_obj(&mut w, &sim.mesh.positions, &faces)?;
        w.flush()?;
        snapshots += 1;
        Ok(())
    })?;
    let r = &runner.result;
    write_measurements_csv(create(&dir.join("measurements.csv"))?, &r.measurements)?;
    if scenario.torque.is_some() {
        write_torque_csv(create(&dir.join("torque.csv"))?, &r.torque)?;
    }
    if opts.solver_stats {
        write_solver_stats_csv(create(&dir.join("solver_stats.csv"))?, &r.stats)?;
    }
    if opts.diagnostics {
        write_friction_diag(create(&dir.join("friction_diag.csv"))?, &runner.sim)?;
        write_plastic_diag(create(&dir.join("plastic_diag.csv"))?, &runner.sim)?;
    }
    let manifest = Manifest {
        version: VERSION.to_string(),
        scenario: scenario.name.clone(),
        material: scenario.material.name(),
        model: scenario.model.name().to_string(),
        seed,
        threads: opts.threads,
        steps: runner.total_steps(),
        vertices: runner.sim.mesh.vertex_count(),
        snapshots,
        warnings: r.warnings.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok((runner, manifest))
}

/// Paths of the snapshot files in `dir`, sorted by name.
pub fn snapshot_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir.join("snapshots"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "obj"))
        .collect();
    v.sort();
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::library::{canonical, Params};

    #[test]
    fn artifacts_written() {
        let p = Params { resolution: Some(7), hold: 1.0, settle: 0.2, snapshot_interval: 50, ..Params::default() };
        let s = canonical("single_wrinkle_friction", &p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = OutputOptions { solver_stats: true, diagnostics: true, threads: 1 };
        let (runner, m) = run_to_dir(&s, None, dir.path(), opts, None).unwrap();
        assert_eq!(m.steps, runner.total_steps());
        for f in ["scenario.json", "manifest.json", "measurements.csv", "solver_stats.csv", "friction_diag.csv", "plastic_diag.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let snaps = snapshot_files(dir.path()).unwrap();
        assert_eq!(snaps.len(), m.snapshots);
        assert!(snaps[0].ends_with("frame_00000.obj"));
        let csv = fs::read_to_string(dir.path().join("measurements.csv")).unwrap();
        assert!(csv.starts_with("tag,step,time_s,clock_s,mean_dev_rad"));
        assert_eq!(csv.lines().count(), 3);
    }
}
