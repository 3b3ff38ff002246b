//! Wrinkle metrics, recovery curves, torque traces and timing tables.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::solver::Simulator;
use crate::{Error, Result};

/// Hinges whose held deviation exceeds this (rad) form the crease set.
pub const CREASE_THRESHOLD: f64 = 0.2;

/// Smallest held deviation for which recovery is defined.
pub const MIN_DEFORMATION: f64 = 1e-6;

/// `100 (1 − |θ_final − θ̄| / |θ_held − θ̄|)`.
pub fn recovery_percentage(theta_held: f64, theta_final: f64, rest: f64) -> Result<f64> {
    let held = (theta_held - rest).abs();
    if !(held > MIN_DEFORMATION) {
        return Err(Error::Config(format!("no deformation to recover from (|θ_held − θ̄| = {held:e})")));
    }
    Ok(100.0 * (1.0 - (theta_final - rest).abs() / held))
}

/// Indices of hinges deformed by more than `threshold` in `held` deviations.
pub fn crease_set(held_deviation: &[f64], threshold: f64) -> Vec<usize> {
    held_deviation.iter().enumerate().filter(|(_, d)| d.abs() > threshold).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WrinkleMetric {
    pub mean_deviation: f64,
    pub max_deviation: f64,
    /// Present when measured against a held reference.
    pub recovery: Option<f64>,
}

/// Mean and max `|θ − θ̄|` over `set` (all hinges when `set` is `None`).
pub fn wrinkle_metric(deviation: &[f64], set: Option<&[usize]>) -> WrinkleMetric {
    let (sum, max, n) = match set {
        Some(s) => s.iter().map(|&i| deviation[i].abs()).fold((0.0, 0.0f64, 0usize), |(a, m, n), d| (a + d, m.max(d), n + 1)),
        None => deviation.iter().map(|d| d.abs()).fold((0.0, 0.0f64, 0usize), |(a, m, n), d| (a + d, m.max(d), n + 1)),
    };
    WrinkleMetric { mean_deviation: if n > 0 { sum / n as f64 } else { 0.0 }, max_deviation: max, recovery: None }
}

/// Recovery of the mean crease deviation: `100 (1 − mean|final| / mean|held|)`
/// over the crease set of `held`. Deviations are `θ − θ̄`.
pub fn crease_recovery(held: &[f64], final_: &[f64], threshold: f64) -> Result<f64> {
    let set = crease_set(held, threshold);
    if set.is_empty() {
        return Err(Error::Config(format!("no hinge deformed by more than {threshold} rad")));
    }
    let h = wrinkle_metric(held, Some(&set)).mean_deviation;
    let f = wrinkle_metric(final_, Some(&set)).mean_deviation;
    recovery_percentage(h, f, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub hold_s: f64,
    pub log10_hold: f64,
    pub recovery_pct: f64,
}

impl RecoveryPoint {
    pub fn new(hold_s: f64, recovery_pct: f64) -> Self {
        Self { hold_s, log10_hold: hold_s.log10(), recovery_pct }
    }
}

/// Sorts by hold time and checks the sweep covers at least two decades with three points.
pub fn recovery_curve(mut points: Vec<RecoveryPoint>) -> Result<Vec<RecoveryPoint>> {
    points.sort_by(|a, b| a.hold_s.total_cmp(&b.hold_s));
    if points.len() < 3 {
        return Err(Error::Config("a recovery curve needs at least 3 hold times".into()));
    }
    if points.iter().any(|p| !(p.hold_s > 0.0)) {
        return Err(Error::Config("hold times must be positive".into()));
    }
    let span = points.last().unwrap().log10_hold - points[0].log10_hold;
    if span < 2.0 - 1e-12 {
        return Err(Error::Config(format!("hold times span {span:.2} decades; at least 2 required")));
    }
    Ok(points)
}

/// True when recovery never increases with hold time (within `tol` percentage points).
pub fn is_non_increasing(points: &[RecoveryPoint], tol: f64) -> bool {
    points.windows(2).all(|w| w[1].recovery_pct <= w[0].recovery_pct + tol)
}

pub fn write_recovery_csv<W: Write>(w: W, points: &[RecoveryPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueSample {
    pub step: usize,
    pub time_s: f64,
    pub torque: f64,
}

/// Reaction torque of a handle group about an axis at the simulator's current state.
pub fn reaction_torque(sim: &Simulator, group: &str, axis_point: crate::Vec3, axis: crate::Vec3) -> f64 {
    sim.handle_torque(group, axis_point, axis)
}

pub fn peak_torque(trace: &[TorqueSample]) -> f64 {
    trace.iter().map(|s| s.torque.abs()).fold(0.0, f64::max)
}

/// Largest step-to-step torque change divided by the peak magnitude.
pub fn max_jump_fraction(trace: &[TorqueSample]) -> f64 {
    let peak = peak_torque(trace);
    if peak == 0.0 {
        return 0.0;
    }
    trace.windows(2).map(|w| (w[1].torque - w[0].torque).abs()).fold(0.0, f64::max) / peak
}

pub fn write_torque_csv<W: Write>(w: W, trace: &[TorqueSample]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in trace {
        out.serialize(s)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub vertices: usize,
    pub model_on: bool,
    pub sec_per_step: f64,
}

/// Mean wall time per step after `warmup` unmeasured steps.
pub fn time_steps(sim: &mut Simulator, warmup: usize, steps: usize) -> Result<f64> {
    if steps < 50 {
        return Err(Error::Config(format!("timing needs at least 50 measured steps, got {steps}")));
    }
    for _ in 0..warmup {
        sim.step()?;
    }
    let start = Instant::now();
    for _ in 0..steps {
        sim.step()?;
    }
    Ok(start.elapsed().as_secs_f64() / steps as f64)
}

/// Mean wall time per step of a scripted run, skipping `warmup` steps.
pub fn time_scenario(scenario: &crate::scenario::Scenario, warmup: usize, steps: usize) -> Result<f64> {
    if steps < 50 {
        return Err(Error::Config(format!("timing needs at least 50 measured steps, got {steps}")));
    }
    let mut runner = crate::scenario::Runner::new(scenario, None)?;
    if runner.total_steps() < warmup + steps {
        return Err(Error::Config(format!(
            "scenario `{}` has {} steps; timing needs {}",
            scenario.name,
            runner.total_steps(),
            warmup + steps
        )));
    }
    for _ in 0..warmup {
        runner.advance()?;
    }
    let start = Instant::now();
    for _ in 0..steps {
        runner.advance()?;
    }
    Ok(start.elapsed().as_secs_f64() / steps as f64)
}

/// `(on − off) / off` for matching pairs of rows.
pub fn overhead(rows: &[TimingRow], vertices: usize) -> Option<f64> {
    let on = rows.iter().find(|r| r.vertices == vertices && r.model_on)?;
    let off = rows.iter().find(|r| r.vertices == vertices && !r.model_on)?;
    Some((on.sec_per_step - off.sec_per_step) / off.sec_per_step)
}

pub fn write_timing_csv<W: Write>(w: W, rows: &[TimingRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn recovery_examples() {
        assert_eq!(recovery_percentage(PI / 2.0, PI, PI).unwrap(), 100.0);
        assert_eq!(recovery_percentage(PI / 2.0, PI / 2.0, PI).unwrap(), 0.0);
        assert!((recovery_percentage(PI / 2.0, 3.0 * PI / 4.0, PI).unwrap() - 50.0).abs() < 1e-12);
        assert!(recovery_percentage(PI, 2.0, PI).is_err());
        assert!(recovery_percentage(1.0, 3.0, 0.0).unwrap() < 0.0);
    }

    #[test]
    fn crease_set_and_metric() {
        let held = [0.0, 0.5, -0.3, 0.1];
        assert_eq!(crease_set(&held, CREASE_THRESHOLD), vec![1, 2]);
        let m = wrinkle_metric(&held, Some(&[1, 2]));
        assert!((m.mean_deviation - 0.4).abs() < 1e-15);
        assert_eq!(m.max_deviation, 0.5);
        let fin = [0.0, 0.25, -0.15, 0.0];
        assert!((crease_recovery(&held, &fin, CREASE_THRESHOLD).unwrap() - 50.0).abs() < 1e-12);
        let fin = [0.0, 0.5, 0.0, 0.0];
        assert!((crease_recovery(&held, &fin, CREASE_THRESHOLD).unwrap() - 37.5).abs() < 1e-12);
        assert!(crease_recovery(&[0.0; 3], &[0.0; 3], CREASE_THRESHOLD).is_err());
    }

    #[test]
    fn curve_checks() {
        let pts = vec![RecoveryPoint::new(100.0, 70.0), RecoveryPoint::new(1.0, 90.0), RecoveryPoint::new(10.0, 80.0)];
        let c = recovery_curve(pts).unwrap();
        assert_eq!(c[0].hold_s, 1.0);
        assert!(is_non_increasing(&c, 0.0));
        assert!(recovery_curve(vec![RecoveryPoint::new(1.0, 1.0), RecoveryPoint::new(10.0, 1.0)]).is_err());
        assert!(recovery_curve(vec![RecoveryPoint::new(1.0, 1.0), RecoveryPoint::new(2.0, 1.0), RecoveryPoint::new(10.0, 1.0)]).is_err());
        let mut buf = Vec::new();
        write_recovery_csv(&mut buf, &c).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("hold_s,log10_hold,recovery_pct\n1.0,0.0,90.0\n"));
    }

    #[test]
    fn torque_jumps() {
        let t: Vec<TorqueSample> =
            [0.0, 1.0, 2.0, 1.5].iter().enumerate().map(|(i, &q)| TorqueSample { step: i, time_s: i as f64, torque: q }).collect();
        assert_eq!(peak_torque(&t), 2.0);
        assert_eq!(max_jump_fraction(&t), 0.5);
        assert_eq!(max_jump_fraction(&[]), 0.0);
    }

    proptest! {
        #[test]
        fn recovery_is_scale_invariant(held in 0.01f64..3.0, frac in -1.0f64..2.0, c in 0.01f64..100.0, rest in -3.0f64..3.0) {
            let a = recovery_percentage(rest + held, rest + frac * held, rest).unwrap();
            let b = recovery_percentage(rest + c * held, rest + c * frac * held, rest).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!(a <= 100.0);
        }
    }
}
