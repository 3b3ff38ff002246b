//! Triangle mesh with rest-state data, generators, and hinge/face geometry.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Mat2, Result, Vec2, Vec3};

/// Faces with rest area below this are rejected.
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeRest {
    pub rest_angle: f64,
    pub rest_edge_length: f64,
    /// Mean of the two triangle heights over the shared edge.
    pub avg_height: f64,
    /// `l * H / 3`.
    pub area: f64,
}

impl HingeRest {
    /// Factor mapping an angle deviation to bending strain.
    #[inline]
    pub fn strain_scale(&self) -> f64 {
        3.0 / self.avg_height
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceRest {
    pub area: f64,
    /// Inverse of `[u1 - u0, u2 - u0]` in material coordinates.
    pub inv_material: Mat2,
    /// d(F_u)/d(x_k) and d(F_v)/d(x_k) for the three corners.
    pub shape_u: [f64; 3],
    pub shape_v: [f64; 3],
}

impl FaceRest {
    pub fn new(uv: [Vec2; 3]) -> Option<Self> {
        let dm = Mat2::from_columns(&[uv[1] - uv[0], uv[2] - uv[0]]);
        let area = 0.5 * dm.determinant().abs();
        if !(area > MIN_FACE_AREA) {
            return None;
        }
        let inv = dm.try_inverse()?;
        let (a, b, c, d) = (inv[(0, 0)], inv[(0, 1)], inv[(1, 0)], inv[(1, 1)]);
        Some(Self {
            area,
            inv_material: inv,
            shape_u: [-a - c, a, c],
            shape_v: [-b - d, b, d],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dihedral {
    /// In (0, 2π], π when flat; folding toward the face normal decreases it.
    pub angle: f64,
    pub gradient: [Vec3; 4],
}

/// Green strain `(E_uu, E_vv, E_uv)` of one face with `grad[k][a] = ∂ε_k/∂x_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenStrain {
    pub strain: Vec3,
    pub grad: [[Vec3; 3]; 3],
}

#[derive(Debug, Clone)]
pub struct ClothMesh {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    /// `(edge v0, edge v1, opposite in face 0, opposite in face 1)`.
    pub hinges: Vec<[usize; 4]>,
    pub hinge_faces: Vec<[usize; 2]>,
    pub rest_uv: Vec<Vec2>,
    pub lumped_mass: Vec<f64>,
    pub pinned: Vec<bool>,
    pub rest_positions: Vec<Vec3>,
    pub hinge_rest: Vec<HingeRest>,
    pub face_rest: Vec<FaceRest>,
    pub boundary_edges: Vec<[usize; 2]>,
    pub density: f64,
}

fn check_dim(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDimension { name, value })
    }
}

fn check_count(name: &'static str, value: usize, min: usize) -> Result<()> {
    if value >= min {
        Ok(())
    } else {
        Err(Error::InvalidDimension { name, value: value as f64 })
    }
}

impl ClothMesh {
    /// Builds a mesh whose rest state is `positions`, with per-face material coordinates.
    pub fn from_parts(
        positions: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        face_uv: Vec<[Vec2; 3]>,
        rest_uv: Vec<Vec2>,
        density: f64,
    ) -> Result<Self> {
        check_dim("density", density)?;
        let n = positions.len();
        if faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        if face_uv.len() != faces.len() || rest_uv.len() != n {
            return Err(Error::InvalidMesh("material coordinate count mismatch".into()));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite { vertex: i });
        }
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!("face {fi} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex")));
            }
        }

        let face_rest = faces
            .iter()
            .zip(&face_uv)
            .enumerate()
            .map(|(fi, (f, uv))| {
                let world = 0.5
                    * (positions[f[1]] - positions[f[0]])
                        .cross(&(positions[f[2]] - positions[f[0]]))
                        .norm();
                if !(world > MIN_FACE_AREA) {
                    return Err(Error::DegenerateFace { face: fi, area: world });
                }
                FaceRest::new(*uv).ok_or(Error::DegenerateFace { face: fi, area: 0.0 })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut lumped_mass = vec![0.0; n];
        for (f, r) in faces.iter().zip(&face_rest) {
            for &v in f {
                lumped_mass[v] += density * r.area / 3.0;
            }
        }
        if let Some(i) = lumped_mass.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::InvalidMesh(format!("vertex {i} belongs to no face")));
        }

        let (hinges, hinge_faces, boundary_edges) = build_hinges(&faces)?;
        let mut mesh = Self {
            velocities: vec![Vec3::zeros(); n],
            rest_positions: positions.clone(),
            positions,
            faces,
            hinges,
            hinge_faces,
            rest_uv,
            lumped_mass,
            pinned: vec![false; n],
            hinge_rest: Vec::new(),
            face_rest,
            boundary_edges,
            density,
        };
        mesh.hinge_rest = (0..mesh.hinges.len())
            .map(|h| mesh.compute_hinge_rest(h))
            .collect::<Result<Vec<_>>>()?;
        Ok(mesh)
    }

    fn compute_hinge_rest(&self, h: usize) -> Result<HingeRest> {
        let [v0, v1, v2, v3] = self.hinges[h];
        let x = &self.rest_positions;
        let d = self.dihedral(h, x)?;
        let e = x[v1] - x[v0];
        let l = e.norm();
        let ha = e.cross(&(x[v2] - x[v0])).norm() / l;
        let hb = e.cross(&(x[v3] - x[v0])).norm() / l;
        let avg_height = 0.5 * (ha + hb);
        Ok(HingeRest { rest_angle: d.angle, rest_edge_length: l, avg_height, area: l * avg_height / 3.0 })
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.hinges.len() + self.boundary_edges.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.lumped_mass.iter().sum()
    }

    pub fn rest_area(&self) -> f64 {
        self.face_rest.iter().map(|f| f.area).sum()
    }

    /// Dihedral angle of hinge `h` evaluated at `x`.
    pub fn dihedral(&self, h: usize, x: &[Vec3]) -> Result<Dihedral> {
        let [v0, v1, v2, v3] = self.hinges[h];
        dihedral_angle(x[v0], x[v1], x[v2], x[v3]).map_err(|side| {
            let face = self.hinge_faces[h][side];
            let f = self.faces[face];
            let area = 0.5 * (x[f[1]] - x[f[0]]).cross(&(x[f[2]] - x[f[0]])).norm();
            Error::DegenerateFace { face, area }
        })
    }

    /// Green strain of face `f` evaluated at `x`.
    pub fn green_strain(&self, f: usize, x: &[Vec3]) -> Result<GreenStrain> {
        let [a, b, c] = self.faces[f];
        let xs = [x[a], x[b], x[c]];
        let area = 0.5 * (xs[1] - xs[0]).cross(&(xs[2] - xs[0])).norm();
        if !(area > MIN_FACE_AREA) {
            return Err(Error::DegenerateFace { face: f, area });
        }
        Ok(green_strain(&self.face_rest[f], xs))
    }

    /// Displaces every vertex along a random direction; rest data is untouched.
    pub fn jitter(&mut self, amplitude: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.positions {
            let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            *p += amplitude * d;
        }
    }

    pub fn translate(&mut self, offset: Vec3) {
        for p in self.positions.iter_mut().chain(self.rest_positions.iter_mut()) {
            *p += offset;
        }
    }
}

type HingeTopology = (Vec<[usize; 4]>, Vec<[usize; 2]>, Vec<[usize; 2]>);

fn build_hinges(faces: &[[usize; 3]]) -> Result<HingeTopology> {
    // (face, from, to, opposite) per directed half-edge, keyed by undirected edge.
    let mut edges: HashMap<(usize, usize), Vec<(usize, usize, usize, usize)>> = HashMap::new();
    let mut order = Vec::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b, o) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            let entry = edges.entry(key).or_default();
            if entry.is_empty() {
                order.push(key);
            }
            entry.push((fi, a, b, o));
        }
    }
    let mut hinges = Vec::new();
    let mut hinge_faces = Vec::new();
    let mut boundary = Vec::new();
    for key in order {
        let he = &edges[&key];
        match he.as_slice() {
            [(_, a, b, _)] => boundary.push([*a, *b]),
            [(f0, a, b, o0), (f1, c, d, o1)] => {
                if !(c == b && d == a) {
                    return Err(Error::InvalidMesh(format!(
                        "faces {f0} and {f1} have inconsistent orientation"
                    )));
                }
                hinges.push([*a, *b, *o0, *o1]);
                hinge_faces.push([*f0, *f1]);
            }
            _ => {
                return Err(Error::InvalidMesh(format!(
                    "edge ({}, {}) is shared by {} faces",
                    key.0,
                    key.1,
                    he.len()
                )))
            }
        }
    }
    Ok((hinges, hinge_faces, boundary))
}

/// Dihedral angle and its gradient for the hinge `(x0, x1)` with wings `x2` and `x3`.
///
/// Face 0 is `(x0, x1, x2)` and face 1 is `(x1, x0, x3)`. On failure returns which
/// face (0 or 1) is degenerate.
pub fn dihedral_angle(x0: Vec3, x1: Vec3, x2: Vec3, x3: Vec3) -> std::result::Result<Dihedral, usize> {
    let e = x1 - x0;
    let e_len2 = e.norm_squared();
    let na = e.cross(&(x2 - x0));
    let nb = (x0 - x1).cross(&(x3 - x1));
    let (la, lb) = (na.norm(), nb.norm());
    if !(0.5 * la > MIN_FACE_AREA) || !(e_len2 > 0.0) {
        return Err(0);
    }
    if !(0.5 * lb > MIN_FACE_AREA) {
        return Err(1);
    }
    let e_len = e_len2.sqrt();
    let (ua, ub) = (na / la, nb / lb);
    let sin = ua.cross(&ub).dot(&(e / e_len));
    let cos = ua.dot(&ub);
    let angle = PI + sin.atan2(cos);

    // Heights over the edge are |N| / |e|.
    let g2 = -ua * (e_len / la);
    let g3 = -ub * (e_len / lb);
    let aa = (x2 - x0).dot(&e) / e_len2;
    let ab = (x3 - x0).dot(&e) / e_len2;
    let g0 = -(1.0 - aa) * g2 - (1.0 - ab) * g3;
    let g1 = -aa * g2 - ab * g3;
    Ok(Dihedral { angle, gradient: [g0, g1, g2, g3] })
}

pub fn green_strain(rest: &FaceRest, x: [Vec3; 3]) -> GreenStrain {
    let fu = rest.shape_u[0] * x[0] + rest.shape_u[1] * x[1] + rest.shape_u[2] * x[2];
    let fv = rest.shape_v[0] * x[0] + rest.shape_v[1] * x[1] + rest.shape_v[2] * x[2];
    let strain = Vec3::new(0.5 * (fu.dot(&fu) - 1.0), 0.5 * (fv.dot(&fv) - 1.0), 0.5 * fu.dot(&fv));
    let mut grad = [[Vec3::zeros(); 3]; 3];
    for k in 0..3 {
        let (bu, bv) = (rest.shape_u[k], rest.shape_v[k]);
        grad[0][k] = bu * fu;
        grad[1][k] = bv * fv;
        grad[2][k] = 0.5 * (bu * fv + bv * fu);
    }
    GreenStrain { strain, grad }
}

/// Uniform `nx × ny` grid in the z = 0 plane, u along x and v along y.
///
/// Every quad is split along the same diagonal so all faces have equal area.
pub fn build_grid(width: f64, height: f64, nx: usize, ny: usize, density: f64) -> Result<ClothMesh> {
    check_dim("width", width)?;
    check_dim("height", height)?;
    check_dim("density", density)?;
    check_count("nx", nx, 2)?;
    check_count("ny", ny, 2)?;
    let idx = |i: usize, j: usize| j * nx + i;
    let mut positions = Vec::with_capacity(nx * ny);
    let mut uv = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (width * i as f64 / (nx - 1) as f64, height * j as f64 / (ny - 1) as f64);
            positions.push(Vec3::new(x, y, 0.0));
            uv.push(Vec2::new(x, y));
        }
    }
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let face_uv = faces.iter().map(|f| [uv[f[0]], uv[f[1]], uv[f[2]]]).collect();
    ClothMesh::from_parts(positions, faces, face_uv, uv, density)
}

/// Closed tube around the z axis with `n_around` vertices per ring and `n_along` rings.
///
/// Faces are wound so their normals point inward; axial hinges then rest at
/// `π − 2π/n_around`. Material u runs around the tube (unwrapped at the seam
/// with chord spacing), v along the axis.
pub fn build_cylinder(radius: f64, height: f64, n_around: usize, n_along: usize, density: f64) -> Result<ClothMesh> {
    check_dim("radius", radius)?;
    check_dim("height", height)?;
    check_dim("density", density)?;
    check_count("n_around", n_around, 3)?;
    check_count("n_along", n_along, 2)?;
    let chord = 2.0 * radius * (PI / n_around as f64).sin();
    let idx = |i: usize, j: usize| j * n_around + (i % n_around);
    let mut positions = Vec::with_capacity(n_around * n_along);
    let mut uv = Vec::with_capacity(n_around * n_along);
    for j in 0..n_along {
        let z = height * j as f64 / (n_along - 1) as f64;
        for i in 0..n_around {
            let phi = 2.0 * PI * i as f64 / n_around as f64;
            positions.push(Vec3::new(radius * phi.cos(), radius * phi.sin(), z));
            uv.push(Vec2::new(chord * i as f64, z));
        }
    }
    let mut faces = Vec::new();
    let mut face_uv = Vec::new();
    for j in 0..n_along - 1 {
        for i in 0..n_around {
            let (z0, z1) = (uv[idx(0, j)].y, uv[idx(0, j + 1)].y);
            let (u0, u1) = (chord * i as f64, chord * (i + 1) as f64);
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            let (ua, ub, uc, ud) = (Vec2::new(u0, z0), Vec2::new(u1, z0), Vec2::new(u1, z1), Vec2::new(u0, z1));
            faces.push([a, c, b]);
            face_uv.push([ua, uc, ub]);
            faces.push([a, d, c]);
            face_uv.push([ua, ud, uc]);
        }
    }
    ClothMesh::from_parts(positions, faces, face_uv, uv, density)
}

/// Material coordinates for an arbitrary face: u follows the projection of the
/// world x axis onto the face plane (or the first edge if that is degenerate).
pub fn planar_face_uv(x: [Vec3; 3]) -> Option<[Vec2; 3]> {
    let n = (x[1] - x[0]).cross(&(x[2] - x[0]));
    let len = n.norm();
    if !(len > 0.0) {
        return None;
    }
    let n = n / len;
    let ex = Vec3::x();
    let mut u = ex - n * n.dot(&ex);
    if u.norm() < 1e-6 {
        u = x[1] - x[0];
    }
    let u = u.normalize();
    let v = n.cross(&u);
    Some(x.map(|p| Vec2::new((p - x[0]).dot(&u), (p - x[0]).dot(&v))))
}
