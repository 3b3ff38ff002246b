mod common;

use common::{bending, dihedral_gradient, friction, stretching};

const N: usize = 1000;
const TOL: f64 = 1e-4;

#[test]
fn dihedral_gradient_matches_fd() {
    let r = dihedral_gradient(N, 1);
    assert_eq!(r.elements, N);
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn bending_force_matches_fd() {
    let r = bending(N, 2);
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn stretching_force_matches_fd() {
    let r = stretching(N, 3);
    assert!(r.max_rel_error < TOL, "{r:?}");
}

#[test]
fn friction_force_matches_fd() {
    let r = friction(N, 4);
    assert!(r.max_rel_error < TOL, "{r:?}");
}
