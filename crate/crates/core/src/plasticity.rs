//! Time-dependent hardening plasticity: yield test, flow split, hardening clock.

use serde::{Deserialize, Serialize};

use crate::{sign, Vec3};

/// Tolerance on the yield surface. Strains within it count as on the surface,
/// which keeps the hardening clock running under a held load without flowing
/// on rounding noise.
pub const YIELD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardeningParams {
    pub kh0: f64,
    pub g: f64,
    pub tau: f64,
    /// Elastic stiffness of the channel (`K_b`, or `k_ii` for a membrane axis).
    pub stiffness: f64,
    pub yield0: f64,
    /// When false `K_h` stays at `K_h0` and the clock never runs.
    pub time_dependent: bool,
}

/// `K_h0 (1 − g (1 − e^{−t/τ_p}))`.
#[inline]
pub fn hardening_param(t_plastic: f64, kh0: f64, g: f64, tau: f64) -> f64 {
    kh0 * (1.0 - g * (1.0 - (-t_plastic / tau).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasticState {
    pub plastic: f64,
    pub hardening_strain: f64,
    pub yield_strain: f64,
    /// `K_h` from the most recent yield step.
    pub hardening: f64,
    pub t_plastic: f64,
}

impl PlasticState {
    pub fn new(params: &HardeningParams) -> Self {
        Self { plastic: 0.0, hardening_strain: 0.0, yield_strain: params.yield0, hardening: params.kh0, t_plastic: 0.0 }
    }

    /// Elastic strain used for stress: `ε − ε_p` with magnitude capped at `ε_Y`.
    pub fn stress_strain(&self, total: f64) -> f64 {
        let e = total - self.plastic;
        if e.abs() > self.yield_strain {
            sign(e) * self.yield_strain
        } else {
            e
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasticUpdate {
    pub yielded: bool,
    /// Plastic increment magnitude this step.
    pub flow: f64,
}

/// Advances one element against total strain `total`. `clock_dt` is `h · time_scale`.
///
/// Order: clock, `K_h`, `ε_hp`, `ε_p`, `ε_Y`.
pub fn plastic_step(state: &mut PlasticState, total: f64, clock_dt: f64, params: &HardeningParams) -> PlasticUpdate {
    let e = total - state.plastic;
    if e.abs() <= state.yield_strain - YIELD_TOL {
        state.t_plastic = 0.0;
        return PlasticUpdate { yielded: false, flow: 0.0 };
    }
    let kh = if params.time_dependent {
        if state.plastic == 0.0 || sign(e) == sign(state.plastic) {
            state.t_plastic += clock_dt;
        } else {
            state.t_plastic = 0.0;
        }
        hardening_param(state.t_plastic, params.kh0, params.g, params.tau)
    } else {
        params.kh0
    };
    let excess = e.abs() - state.yield_strain;
    let mut flow = 0.0;
    if excess > YIELD_TOL {
        flow = params.stiffness / (params.stiffness + kh) * excess;
        state.hardening_strain += flow;
        state.plastic += sign(e) * flow;
    }
    state.hardening = kh;
    state.yield_strain = params.yield0 + state.hardening_strain * kh / params.stiffness;
    PlasticUpdate { yielded: true, flow }
}

/// Runs the three membrane axes independently, each with its own stiffness.
pub fn tensile_plastic_step(
    states: &mut [PlasticState; 3],
    strain: &Vec3,
    clock_dt: f64,
    params: &[HardeningParams; 3],
) -> [PlasticUpdate; 3] {
    std::array::from_fn(|k| plastic_step(&mut states[k], strain[k], clock_dt, &params[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cotton() -> HardeningParams {
        HardeningParams { kh0: 5e-6, g: 0.99, tau: 30.0, stiffness: 5e-6 / 3.0, yield0: 1.8, time_dependent: true }
    }

    #[test]
    fn hardening_values() {
        assert_eq!(hardening_param(0.0, 5e-6, 0.99, 30.0), 5e-6);
        assert!((hardening_param(1e6, 5e-6, 0.99, 30.0) - 5e-8).abs() < 1e-20);
        let r = hardening_param(30.0, 1.0, 0.99, 30.0);
        assert!((r - 0.3742006).abs() < 1e-7);
    }

    #[test]
    fn half_flow_at_equal_stiffness() {
        let p = HardeningParams { kh0: 1.0, g: 0.5, tau: 30.0, stiffness: 1.0, yield0: 2.0, time_dependent: true };
        let mut s = PlasticState::new(&p);
        let u = plastic_step(&mut s, 3.0, 0.0, &p);
        assert!(u.yielded);
        assert!((u.flow - 0.5).abs() < 1e-12);
        assert!((s.plastic - 0.5).abs() < 1e-12);
        assert!((s.hardening_strain - 0.5).abs() < 1e-12);
        assert!((s.yield_strain - 2.5).abs() < 1e-12);
    }

    #[test]
    fn sub_yield_only_resets_clock() {
        let p = cotton();
        let mut s = PlasticState { t_plastic: 4.0, ..PlasticState::new(&p) };
        let before = s;
        assert!(!plastic_step(&mut s, 1.0, 0.01, &p).yielded);
        assert_eq!(s, PlasticState { t_plastic: 0.0, ..before });
    }

    #[test]
    fn perfect_plastic_limit() {
        let p = HardeningParams { kh0: 0.0, g: 0.5, tau: 30.0, stiffness: 2.0, yield0: 0.3, time_dependent: true };
        for total in [0.31, 0.5, 1.7, -0.9, 12.0] {
            let mut s = PlasticState::new(&p);
            plastic_step(&mut s, total, 0.01, &p);
            assert!(((total - s.plastic).abs() - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn held_load_converges() {
        let p = cotton();
        let mut s = PlasticState::new(&p);
        let total = 2.9;
        let mut done = None;
        let mut last_flow = f64::INFINITY;
        let mut last = s;
        for n in 0..100_000 {
            let u = plastic_step(&mut s, total, 0.01, &p);
            assert!(u.flow <= last_flow + 1e-15);
            assert!(s.hardening_strain >= last.hardening_strain);
            last_flow = u.flow;
            last = s;
            if (total - s.plastic).abs() <= s.yield_strain + YIELD_TOL {
                done = Some(n);
                break;
            }
        }
        assert!(done.is_some());
    }

    #[test]
    fn longer_hold_more_plastic_strain() {
        for stiffness in [5e-6 / 3.0, 1.2e-4 / 3.0] {
            let p = HardeningParams { kh0: 3.0 * stiffness, ..cotton() };
            let hold = |seconds: f64| {
                let mut s = PlasticState::new(&p);
                plastic_step(&mut s, 2.9, 0.01, &p);
                for _ in 0..50 {
                    plastic_step(&mut s, 2.9, seconds / 50.0, &p);
                }
                s.plastic
            };
            assert!(hold(500.0) > hold(1.0));
        }
    }

    #[test]
    fn hardening_only_ignores_time() {
        let p = HardeningParams { time_dependent: false, ..cotton() };
        let run = |dt: f64, steps: usize| {
            let mut s = PlasticState::new(&p);
            for _ in 0..steps {
                plastic_step(&mut s, 2.9, dt, &p);
            }
            s
        };
        let a = run(0.02, 50);
        let b = run(10.0, 50);
        assert_eq!(a, b);
        assert_eq!(a.t_plastic, 0.0);
    }

    #[test]
    fn infinite_tau_matches_hardening_only() {
        let script = [0.5, 2.5, 2.9, 2.9, 1.0, -2.5, -3.0, 0.0];
        let main = HardeningParams { tau: f64::INFINITY, ..cotton() };
        let base = HardeningParams { time_dependent: false, ..cotton() };
        let (mut a, mut b) = (PlasticState::new(&main), PlasticState::new(&base));
        for e in script {
            plastic_step(&mut a, e, 5.0, &main);
            plastic_step(&mut b, e, 5.0, &base);
            assert_eq!(a.plastic.to_bits(), b.plastic.to_bits());
            assert_eq!(a.yield_strain.to_bits(), b.yield_strain.to_bits());
        }
    }

    #[test]
    fn axes_are_independent() {
        let p = [cotton(); 3];
        let mut s = [PlasticState::new(&p[0]); 3];
        tensile_plastic_step(&mut s, &Vec3::new(2.5, 0.3, -0.2), 0.01, &p);
        assert!(s[0].plastic > 0.0);
        assert_eq!((s[1].plastic, s[2].plastic), (0.0, 0.0));
        let mut z = [PlasticState::new(&p[0]); 3];
        tensile_plastic_step(&mut z, &Vec3::zeros(), 0.01, &p);
        assert_eq!(z, [PlasticState::new(&p[0]); 3]);
    }

    proptest! {
        #[test]
        fn hardening_bounds(t in 0.0f64..1e5, kh0 in 1e-9f64..1.0, g in 0.01f64..0.99) {
            let k = hardening_param(t, kh0, g, 30.0);
            prop_assert!(k <= kh0 * (1.0 + 1e-15) && k >= kh0 * (1.0 - g) * (1.0 - 1e-12));
        }

        #[test]
        fn no_flow_inside_yield(history in proptest::collection::vec(-5.0f64..5.0, 1..100)) {
            let p = cotton();
            let mut s = PlasticState::new(&p);
            for e in history {
                let before = s;
                let u = plastic_step(&mut s, e, 0.3, &p);
                if (e - before.plastic).abs() <= before.yield_strain {
                    prop_assert_eq!(u.flow, 0.0);
                    prop_assert_eq!(s.plastic, before.plastic);
                }
                prop_assert!(s.hardening_strain >= before.hardening_strain);
                prop_assert!((s.yield_strain - (p.yield0 + s.hardening_strain * s.hardening / p.stiffness)).abs() < 1e-9);
            }
        }

        #[test]
        fn odd_symmetry(history in proptest::collection::vec(-5.0f64..5.0, 1..60)) {
            let p = [cotton(); 3];
            let mut a = [PlasticState::new(&p[0]); 3];
            let mut b = a;
            for e in history {
                tensile_plastic_step(&mut a, &Vec3::new(e, 0.5 * e, -e), 0.1, &p);
                tensile_plastic_step(&mut b, &Vec3::new(-e, -0.5 * e, e), 0.1, &p);
                for k in 0..3 {
                    prop_assert_eq!(a[k].plastic, -b[k].plastic);
                }
            }
        }
    }
}
