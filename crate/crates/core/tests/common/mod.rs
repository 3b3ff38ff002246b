//! Finite-difference oracles shared by the gradient tests and the acceptance run.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrinkle::elastic::{bending_energy, bending_force, bending_strain, stretch_energy, stretch_force};
use wrinkle::friction::{friction_energy, friction_force};
use wrinkle::mesh::{dihedral_angle, green_strain, FaceRest};
use wrinkle::{Mat3, Vec2, Vec3};

pub const FD_STEP: f64 = 1e-6;

/// Worst relative error over a batch of random elements.
#[derive(Debug, Clone, Copy, Default)]
pub struct FdReport {
    pub elements: usize,
    pub max_rel_error: f64,
}

impl FdReport {
    fn push(&mut self, analytic: &[Vec3], fd: &[Vec3]) {
        let diff: f64 = analytic.iter().zip(fd).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
        let scale: f64 = fd.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt().max(1e-8);
        self.elements += 1;
        self.max_rel_error = self.max_rel_error.max(diff / scale);
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s))
}

/// Central differences of `f` with respect to each coordinate of each point.
fn central<const N: usize>(x: &[Vec3; N], f: impl Fn(&[Vec3; N]) -> f64) -> [Vec3; N] {
    let mut g = [Vec3::zeros(); N];
    for a in 0..N {
        for c in 0..3 {
            let mut p = *x;
            let mut m = *x;
            p[a][c] += FD_STEP;
            m[a][c] -= FD_STEP;
            g[a][c] = (f(&p) - f(&m)) / (2.0 * FD_STEP);
        }
    }
    g
}

/// A well-shaped hinge: unit edge on the x axis, wings bent by a random angle.
fn random_hinge(rng: &mut ChaCha8Rng) -> [Vec3; 4] {
    let x0 = Vec3::zeros();
    let x1 = Vec3::new(1.0, 0.0, 0.0);
    let a: f64 = rng.gen_range(0.3..2.8);
    let b = rng.gen_range(-2.8..-0.3f64);
    let (ra, rb) = (rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5));
    let x2 = Vec3::new(rng.gen_range(0.1..0.9), ra * a.cos(), ra * a.sin());
    let x3 = Vec3::new(rng.gen_range(0.1..0.9), rb * b.cos(), rb * b.sin());
    let q = rand_vec(rng, 0.05);
    [x0 + q, x1, x2, x3]
}

fn angle(x: &[Vec3; 4]) -> f64 {
    dihedral_angle(x[0], x[1], x[2], x[3]).expect("hinge is well shaped").angle
}

pub fn dihedral_gradient(n: usize, seed: u64) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = FdReport::default();
    for _ in 0..n {
        let x = random_hinge(&mut rng);
        let g = dihedral_angle(x[0], x[1], x[2], x[3]).unwrap().gradient;
        r.push(&g, &central(&x, angle));
    }
    r
}

pub fn bending(n: usize, seed: u64) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = FdReport::default();
    for _ in 0..n {
        let x = random_hinge(&mut rng);
        let rest = rng.gen_range(2.0..4.2);
        let (kb, area, height) = (rng.gen_range(1e-6..1e-3), rng.gen_range(0.1..1.0), rng.gen_range(0.2..1.0));
        let plastic = rng.gen_range(-0.5..0.5);
        let energy = |x: &[Vec3; 4]| bending_energy(bending_strain(angle(x), rest, height) - plastic, kb, area);
        let d = dihedral_angle(x[0], x[1], x[2], x[3]).unwrap();
        let e = bending_strain(d.angle, rest, height) - plastic;
        let f = bending_force(e, kb, area, height, &d.gradient).force;
        let fd = central(&x, energy).map(|g| -g);
        r.push(&f, &fd);
    }
    r
}

fn random_face(rng: &mut ChaCha8Rng) -> (FaceRest, [Vec3; 3]) {
    let uv = [Vec2::new(0.0, 0.0), Vec2::new(rng.gen_range(0.5..1.5), rng.gen_range(-0.2..0.2)), Vec2::new(rng.gen_range(-0.3..0.5), rng.gen_range(0.5..1.5))];
    let rest = FaceRest::new(uv).unwrap();
    let x = uv.map(|p| Vec3::new(p.x, p.y, 0.0) + rand_vec(rng, 0.2));
    (rest, x)
}

pub fn stretching(n: usize, seed: u64) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = FdReport::default();
    for _ in 0..n {
        let (rest, x) = random_face(&mut rng);
        let (k11, k22, k12, k33) = (rng.gen_range(10.0..200.0), rng.gen_range(10.0..200.0), rng.gen_range(0.0..5.0), rng.gen_range(5.0..50.0));
        let ks = Mat3::new(k11, k12, 0.0, k12, k22, 0.0, 0.0, 0.0, k33);
        let plastic = rand_vec(&mut rng, 0.01);
        let area = rest.area;
        let energy = |x: &[Vec3; 3]| stretch_energy(&(green_strain(&rest, *x).strain - plastic), &ks, area);
        let g = green_strain(&rest, x);
        let f = stretch_force(&(g.strain - plastic), &ks, area, &g.grad).force;
        r.push(&f, &central(&x, energy).map(|g| -g));
    }
    r
}

/// Hinge friction: the force of the anchored spring on the bending strain.
pub fn friction(n: usize, seed: u64) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = FdReport::default();
    for _ in 0..n {
        let x = random_hinge(&mut rng);
        let rest = rng.gen_range(2.0..4.2);
        let (kf, area, height) = (rng.gen_range(1e-7..1e-4), rng.gen_range(0.1..1.0), rng.gen_range(0.2..1.0));
        let anchor = rng.gen_range(-2.0..2.0);
        let strain = |x: &[Vec3; 4]| bending_strain(angle(x), rest, height);
        let energy = |x: &[Vec3; 4]| friction_energy(strain(x), anchor, kf, area);
        let d = dihedral_angle(x[0], x[1], x[2], x[3]).unwrap();
        let ds = d.gradient.map(|g| (3.0 / height) * g);
        let f = friction_force(strain(&x) - anchor, kf, area, &ds).force;
        r.push(&f, &central(&x, energy).map(|g| -g));
    }
    r
}
