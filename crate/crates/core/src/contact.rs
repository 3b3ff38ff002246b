//! Penalty contact against analytic obstacles, plus optional naive self-repulsion.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Plane { point: [f64; 3], normal: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    /// Solid capped cylinder from `base` along `axis` for `height`.
    Cylinder { base: [f64; 3], axis: [f64; 3], radius: f64, height: f64 },
    /// Open container wall: an annulus of inner radius `radius` and thickness `wall`.
    Tube { base: [f64; 3], axis: [f64; 3], radius: f64, wall: f64, height: f64 },
    Box { center: [f64; 3], half_extents: [f64; 3] },
}

fn v(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Signed distance to an axis-aligned 2D box and its gradient.
fn box2(p: [f64; 2], half: [f64; 2]) -> (f64, [f64; 2]) {
    let q = [p[0].abs() - half[0], p[1].abs() - half[1]];
    let s = [if p[0] < 0.0 { -1.0 } else { 1.0 }, if p[1] < 0.0 { -1.0 } else { 1.0 }];
    if q[0] > 0.0 || q[1] > 0.0 {
        let o = [q[0].max(0.0), q[1].max(0.0)];
        let len = (o[0] * o[0] + o[1] * o[1]).sqrt();
        (len, [s[0] * o[0] / len, s[1] * o[1] / len])
    } else if q[0] > q[1] {
        (q[0], [s[0], 0.0])
    } else {
        (q[1], [0.0, s[1]])
    }
}

/// Axial frame helper: returns (radial distance, axial coordinate, radial unit, axis unit).
fn axial(p: Vec3, base: Vec3, axis: Vec3) -> (f64, f64, Vec3, Vec3) {
    let a = axis.normalize();
    let d = p - base;
    let h = d.dot(&a);
    let radial = d - h * a;
    let r = radial.norm();
    let ur = if r > 1e-14 {
        radial / r
    } else {
        let t = if a.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        (t - a * a.dot(&t)).normalize()
    };
    (r, h, ur, a)
}

impl Shape {
    /// Signed distance from `p` and the outward unit normal.
    pub fn signed_distance(&self, p: Vec3) -> (f64, Vec3) {
        match self {
            Shape::Plane { point, normal } => {
                let n = v(*normal).normalize();
                ((p - v(*point)).dot(&n), n)
            }
            Shape::Sphere { center, radius } => {
                let d = p - v(*center);
                let len = d.norm();
                let n = if len > 1e-14 { d / len } else { Vec3::z() };
                (len - radius, n)
            }
            Shape::Cylinder { base, axis, radius, height } => {
                let (r, h, ur, a) = axial(p, v(*base), v(*axis));
                let (d, g) = box2([r, h - 0.5 * height], [*radius, 0.5 * height]);
                (d, g[0] * ur + g[1] * a)
            }
            Shape::Tube { base, axis, radius, wall, height } => {
                let (r, h, ur, a) = axial(p, v(*base), v(*axis));
                let (d, g) = box2([r - radius - 0.5 * wall, h - 0.5 * height], [0.5 * wall, 0.5 * height]);
                (d, g[0] * ur + g[1] * a)
            }
            Shape::Box { center, half_extents } => {
                let d = p - v(*center);
                let q = d.abs() - v(*half_extents);
                let s = d.map(|c| if c < 0.0 { -1.0 } else { 1.0 });
                if q.max() > 0.0 {
                    let o = q.map(|c| c.max(0.0));
                    let len = o.norm();
                    (len, s.component_mul(&o) / len)
                } else {
                    let k = q.imax();
                    let mut n = Vec3::zeros();
                    n[k] = s[k];
                    (q[k], n)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub name: String,
    pub shape: Shape,
    /// Penalty stiffness `k_c`.
    pub stiffness: f64,
    /// Contact offset `δ`: force starts when a vertex is closer than this.
    pub thickness: f64,
    /// Coulomb coefficient `μ`.
    pub friction: f64,
    /// Current rigid translation applied to the shape.
    #[serde(skip)]
    pub offset: Vec3,
}

impl Obstacle {
    pub fn new(name: impl Into<String>, shape: Shape) -> Self {
        Self { name: name.into(), shape, stiffness: DEFAULT_STIFFNESS, thickness: DEFAULT_THICKNESS, friction: DEFAULT_FRICTION, offset: Vec3::zeros() }
    }

    pub fn signed_distance(&self, p: Vec3) -> (f64, Vec3) {
        self.shape.signed_distance(p - self.offset)
    }
}

pub const DEFAULT_STIFFNESS: f64 = 1000.0;
pub const DEFAULT_THICKNESS: f64 = 1e-3;
pub const DEFAULT_FRICTION: f64 = 0.3;

/// Tangential stick anchors per obstacle and vertex, in the obstacle's frame.
#[derive(Debug, Clone, Default)]
pub struct ContactState {
    anchors: Vec<Vec<Option<Vec3>>>,
}

impl ContactState {
    pub fn new(obstacles: usize, vertices: usize) -> Self {
        Self { anchors: vec![vec![None; vertices]; obstacles] }
    }

    pub fn in_contact(&self, obstacle: usize, vertex: usize) -> bool {
        self.anchors[obstacle][vertex].is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexContact {
    pub force: Vec3,
    pub jacobian: Mat3,
    pub anchor: Option<Vec3>,
}

/// Penalty response of one vertex against one obstacle; `anchor` is the
/// previous stick point in the obstacle frame.
pub fn vertex_contact(ob: &Obstacle, x: Vec3, anchor: Option<Vec3>) -> VertexContact {
    let (d, n) = ob.signed_distance(x);
    let pen = ob.thickness - d;
    if !(pen > 0.0) {
        return VertexContact { force: Vec3::zeros(), jacobian: Mat3::zeros(), anchor: None };
    }
    let k = ob.stiffness;
    let nn = n * n.transpose();
    let normal = k * pen;
    let mut force = normal * n;
    let mut jacobian = -k * nn;
    let local = x - ob.offset;
    let mut new_anchor = Some(local);
    if ob.friction > 0.0 {
        let a = anchor.unwrap_or(local);
        let disp = local - a;
        let dt = disp - n * n.dot(&disp);
        let trial = -k * dt;
        let limit = ob.friction * normal;
        let tangent = Mat3::identity() - nn;
        let t = trial.norm();
        if t <= limit {
            force += trial;
            jacobian -= k * tangent;
            new_anchor = Some(a);
        } else {
            let scale = limit / t;
            force += scale * trial;
            jacobian -= k * scale * tangent;
            new_anchor = Some(local - scale * dt);
        }
    }
    VertexContact { force, jacobian, anchor: new_anchor }
}

/// Adds obstacle forces and diagonal Jacobian blocks for all free vertices.
pub fn contact_forces(
    obstacles: &[Obstacle],
    positions: &[Vec3],
    pinned: &[bool],
    state: &mut ContactState,
    force: &mut [Vec3],
    jacobian_diag: &mut [Mat3],
) {
    for (oi, ob) in obstacles.iter().enumerate() {
        for (i, x) in positions.iter().enumerate() {
            if pinned[i] {
                state.anchors[oi][i] = None;
                continue;
            }
            let c = vertex_contact(ob, *x, state.anchors[oi][i]);
            state.anchors[oi][i] = c.anchor;
            if c.anchor.is_some() {
                force[i] += c.force;
                jacobian_diag[i] += c.jacobian;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfCollision {
    pub thickness: f64,
    pub stiffness: f64,
}

/// Closest point on triangle `abc` to `p` as barycentric weights.
pub fn closest_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> [f64; 3] {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return [1.0 - t, t, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return [1.0 - t, 0.0, t];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - t, t];
    }
    let denom = 1.0 / (va + vb + vc);
    let (vv, ww) = (vb * denom, vc * denom);
    [1.0 - vv - ww, vv, ww]
}

/// Vertex–triangle repulsion for non-adjacent pairs closer than `thickness`.
///
/// Only the diagonal Jacobian blocks are kept, which preserves the
/// sparsity pattern and keeps the system positive definite.
pub fn self_collision_forces(
    params: &SelfCollision,
    faces: &[[usize; 3]],
    positions: &[Vec3],
    force: &mut [Vec3],
    jacobian_diag: &mut [Mat3],
) -> usize {
    let h = params.thickness;
    if !(h > 0.0) {
        return 0;
    }
    // Cells at least as large as a typical face keep the per-face cell range small.
    let mean_extent = faces
        .iter()
        .map(|f| {
            let xs = f.map(|i| positions[i]);
            (xs[0].sup(&xs[1]).sup(&xs[2]) - xs[0].inf(&xs[1]).inf(&xs[2])).max()
        })
        .sum::<f64>()
        / faces.len().max(1) as f64;
    let cell = (2.0 * h).max(mean_extent);
    let key = |p: Vec3| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (vi, &p) in positions.iter().enumerate() {
        grid.entry(key(p)).or_default().push(vi);
    }
    const MAX_CELLS: i64 = 4096;
    let mut pairs = Vec::new();
    let mut cands = Vec::new();
    for (fi, f) in faces.iter().enumerate() {
        let xs = f.map(|i| positions[i]);
        let (k0, k1) = (key(xs[0].inf(&xs[1]).inf(&xs[2]).add_scalar(-h)), key(xs[0].sup(&xs[1]).sup(&xs[2]).add_scalar(h)));
        let span = (k1.0 - k0.0 + 1) * (k1.1 - k0.1 + 1) * (k1.2 - k0.2 + 1);
        cands.clear();
        if span > MAX_CELLS {
            cands.extend(0..positions.len());
        } else {
            for i in k0.0..=k1.0 {
                for j in k0.1..=k1.1 {
                    for k in k0.2..=k1.2 {
                        if let Some(vs) = grid.get(&(i, j, k)) {
                            cands.extend_from_slice(vs);
                        }
                    }
                }
            }
        }
        pairs.extend(cands.iter().filter(|v| !f.contains(v)).map(|&v| (v, fi)));
    }
    pairs.sort_unstable();
    let mut hits = 0;
    for (vi, fi) in pairs {
        let p = positions[vi];
        let f = faces[fi];
        let (a, b, c) = (positions[f[0]], positions[f[1]], positions[f[2]]);
        let w = closest_on_triangle(p, a, b, c);
        let q = w[0] * a + w[1] * b + w[2] * c;
        let d = (p - q).norm();
        if d >= h {
            continue;
        }
        let n = if d > 1e-12 {
            (p - q) / d
        } else {
            let nf = (b - a).cross(&(c - a));
            nf.normalize()
        };
        let mag = params.stiffness * (h - d);
        let nn = params.stiffness * n * n.transpose();
        force[vi] += mag * n;
        jacobian_diag[vi] -= nn;
        for k in 0..3 {
            force[f[k]] -= w[k] * mag * n;
            jacobian_diag[f[k]] -= w[k] * w[k] * nn;
        }
        hits += 1;
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ground() -> Obstacle {
        Obstacle { friction: 0.0, ..Obstacle::new("ground", Shape::Plane { point: [0.0; 3], normal: [0.0, 0.0, 1.0] }) }
    }

    #[test]
    fn separated_vertex_feels_nothing() {
        let g = ground();
        let c = vertex_contact(&g, Vec3::new(0.3, 0.1, 2.0 * g.thickness), None);
        assert_eq!(c.force, Vec3::zeros());
        assert!(c.anchor.is_none());
    }

    #[test]
    fn penetration_law() {
        let g = ground();
        let d = 4e-4;
        let c = vertex_contact(&g, Vec3::new(0.0, 0.0, g.thickness - d), None);
        assert!((c.force - Vec3::new(0.0, 0.0, g.stiffness * d)).norm() < 1e-12);
        assert!((c.jacobian[(2, 2)] + g.stiffness).abs() < 1e-12);
    }

    #[test]
    fn stick_cancels_small_pull() {
        // One vertex, mass m, pressed by load W and pulled sideways by P < μW.
        let ob = Obstacle { friction: 0.5, ..ground() };
        let (m, h, w, pull) = (1e-3, 1e-3, 0.2, 0.05);
        let mut x = Vec3::new(0.0, 0.0, ob.thickness - w / ob.stiffness);
        let mut v = Vec3::zeros();
        let mut anchor = None;
        for _ in 0..20_000 {
            let c = vertex_contact(&ob, x, anchor);
            anchor = c.anchor;
            let f = c.force + Vec3::new(pull, 0.0, -w) - 2.0 * v * m / h * 0.05;
            let a = Mat3::identity() * m - h * h * c.jacobian;
            let dv = a.try_inverse().unwrap() * (h * (f + h * c.jacobian * v));
            v += dv;
            x += h * v;
        }
        let c = vertex_contact(&ob, x, anchor);
        assert!((c.force.x + pull).abs() < 1e-6, "tangential {}", c.force.x);
        assert!(v.x.abs() < 1e-6);
        assert!(x.x.abs() < pull / ob.stiffness * 1.01);
    }

    #[test]
    fn slip_caps_tangential_force() {
        let ob = Obstacle { friction: 0.2, ..ground() };
        let x0 = Vec3::new(0.0, 0.0, 0.5 * ob.thickness);
        let c0 = vertex_contact(&ob, x0, None);
        let c = vertex_contact(&ob, x0 + Vec3::new(0.5, 0.0, 0.0), c0.anchor);
        let n = ob.stiffness * 0.5 * ob.thickness;
        assert!((c.force.x.abs() - ob.friction * n).abs() < 1e-12);
        assert!(c.force.x < 0.0);
    }

    #[test]
    fn shape_normals() {
        let s = Shape::Sphere { center: [0.0; 3], radius: 1.0 };
        let (d, n) = s.signed_distance(Vec3::new(0.0, 2.0, 0.0));
        assert!((d - 1.0).abs() < 1e-12 && (n - Vec3::y()).norm() < 1e-12);
        let b = Shape::Box { center: [0.0; 3], half_extents: [1.0, 2.0, 3.0] };
        let (d, n) = b.signed_distance(Vec3::new(0.0, 0.0, -3.5));
        assert!((d - 0.5).abs() < 1e-12 && (n + Vec3::z()).norm() < 1e-12);
        let (d, n) = b.signed_distance(Vec3::new(0.9, 0.0, 0.0));
        assert!((d + 0.1).abs() < 1e-12 && (n - Vec3::x()).norm() < 1e-12);
        let c = Shape::Cylinder { base: [0.0; 3], axis: [0.0, 0.0, 1.0], radius: 1.0, height: 2.0 };
        let (d, n) = c.signed_distance(Vec3::new(0.0, 1.5, 1.0));
        assert!((d - 0.5).abs() < 1e-12 && (n - Vec3::y()).norm() < 1e-12);
        let (d, n) = c.signed_distance(Vec3::new(0.2, 0.0, 2.5));
        assert!((d - 0.5).abs() < 1e-12 && (n - Vec3::z()).norm() < 1e-12);
        let t = Shape::Tube { base: [0.0; 3], axis: [0.0, 0.0, 1.0], radius: 1.0, wall: 0.1, height: 1.0 };
        let (d, n) = t.signed_distance(Vec3::new(0.8, 0.0, 0.5));
        assert!((d - 0.2).abs() < 1e-12 && (n + Vec3::x()).norm() < 1e-12);
        let (d, _) = t.signed_distance(Vec3::new(0.0, 0.0, 0.5));
        assert!(d > 0.9);
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Vec3::zeros(), Vec3::x(), Vec3::y());
        assert_eq!(closest_on_triangle(Vec3::new(-1.0, -1.0, 0.0), a, b, c), [1.0, 0.0, 0.0]);
        let w = closest_on_triangle(Vec3::new(0.25, 0.25, 1.0), a, b, c);
        assert!((w[1] - 0.25).abs() < 1e-12 && (w[2] - 0.25).abs() < 1e-12);
        let w = closest_on_triangle(Vec3::new(0.5, -1.0, 0.0), a, b, c);
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn self_repulsion_is_balanced() {
        let faces = vec![[0, 1, 2], [3, 4, 5]];
        let d = 1e-4;
        let x = vec![
            Vec3::zeros(),
            Vec3::x(),
            Vec3::y(),
            Vec3::new(0.2, 0.2, d),
            Vec3::new(5.0, 5.0, 5.0),
            Vec3::new(5.0, 6.0, 5.0),
        ];
        let mut f = vec![Vec3::zeros(); 6];
        let mut j = vec![Mat3::zeros(); 6];
        let n = self_collision_forces(&SelfCollision { thickness: 1e-3, stiffness: 100.0 }, &faces, &x, &mut f, &mut j);
        assert_eq!(n, 1);
        let total: Vec3 = f.iter().sum();
        assert!(total.norm() < 1e-12);
        assert!(f[3].z > 0.0);
    }

    proptest! {
        #[test]
        fn forces_never_point_inward(
            px in -2.0f64..2.0, py in -2.0f64..2.0, pz in -2.0f64..2.0,
            shape_id in 0usize..5, mu in 0.0f64..1.0,
            ax in -0.01f64..0.01, ay in -0.01f64..0.01,
        ) {
            let shape = match shape_id {
                0 => Shape::Plane { point: [0.0; 3], normal: [0.0, 0.3, 1.0] },
                1 => Shape::Sphere { center: [0.0; 3], radius: 1.0 },
                2 => Shape::Cylinder { base: [0.0, 0.0, -1.0], axis: [0.0, 0.0, 1.0], radius: 1.0, height: 2.0 },
                3 => Shape::Tube { base: [0.0, 0.0, -1.0], axis: [0.0, 0.0, 1.0], radius: 1.0, wall: 0.2, height: 2.0 },
                _ => Shape::Box { center: [0.0; 3], half_extents: [1.0, 0.5, 0.7] },
            };
            let ob = Obstacle { friction: mu, thickness: 0.05, ..Obstacle::new("o", shape) };
            let x = Vec3::new(px, py, pz);
            let anchor = Some(x + Vec3::new(ax, ay, 0.0));
            let c = vertex_contact(&ob, x, anchor);
            let (_, n) = ob.signed_distance(x);
            prop_assert!(c.force.dot(&n) >= -1e-12);
            let sym = c.jacobian - c.jacobian.transpose();
            prop_assert!(sym.norm() < 1e-9);
        }
    }
}
