//! Block-sparse (3×3) symmetric matrices and preconditioned conjugate gradient.

use std::sync::Arc;

use rayon::prelude::*;

use crate::{Error, Mat3, Result, Vec3};

/// Reduction chunk length; fixed so sums do not depend on the thread count.
const CHUNK: usize = 1024;

/// Row-compressed sparsity of vertex–vertex blocks, columns sorted per row.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPattern {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    diag: Vec<usize>,
}

impl BlockPattern {
    /// Couples every pair of vertices that share an element. Diagonals are always present.
    pub fn from_elements<'a>(n: usize, elements: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for el in elements {
            for &a in el {
                rows[a].extend_from_slice(el);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, mut r) in rows.into_iter().enumerate() {
            r.sort_unstable();
            r.dedup();
            diag.push(cols.len() + r.binary_search(&i).expect("diagonal present"));
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, diag }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz_blocks(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        self.row(i).binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn diag_slot(&self, i: usize) -> usize {
        self.diag[i]
    }

    /// Slot table for an element, `out[a][b]` addressing block `(v[a], v[b])`.
    pub fn element_slots<const N: usize>(&self, v: &[usize; N]) -> [[usize; N]; N] {
        std::array::from_fn(|a| std::array::from_fn(|b| self.slot(v[a], v[b]).expect("element block in pattern")))
    }
}

#[derive(Debug, Clone)]
pub struct BlockMatrix {
    pattern: Arc<BlockPattern>,
    pub blocks: Vec<Mat3>,
}

impl BlockMatrix {
    pub fn zeros(pattern: Arc<BlockPattern>) -> Self {
        let blocks = vec![Mat3::zeros(); pattern.nnz_blocks()];
        Self { pattern, blocks }
    }

    pub fn pattern(&self) -> &Arc<BlockPattern> {
        &self.pattern
    }

    pub fn size(&self) -> usize {
        self.pattern.n
    }

    pub fn clear(&mut self) {
        self.blocks.iter_mut().for_each(|b| *b = Mat3::zeros());
    }

    /// Adds `m` to block `(i, j)`; panics if the block is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, m: &Mat3) {
        let s = self.pattern.slot(i, j).expect("block in pattern");
        self.blocks[s] += m;
    }

    pub fn add_diag(&mut self, i: usize, m: &Mat3) {
        let s = self.pattern.diag[i];
        self.blocks[s] += m;
    }

    pub fn diag(&self, i: usize) -> &Mat3 {
        &self.blocks[self.pattern.diag[i]]
    }

    pub fn get(&self, i: usize, j: usize) -> Mat3 {
        self.pattern.slot(i, j).map_or_else(Mat3::zeros, |s| self.blocks[s])
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[Vec3], y: &mut [Vec3]) {
        let p = &self.pattern;
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            let mut acc = Vec3::zeros();
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                acc += self.blocks[k] * x[p.cols[k]];
            }
            *yi = acc;
        });
    }

    /// Largest asymmetry `‖A_ij − A_jiᵀ‖` over all block pairs.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.size() {
            for &j in self.pattern.row(i) {
                worst = worst.max((self.get(i, j) - self.get(j, i).transpose()).norm());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.size();
        let mut d = nalgebra::DMatrix::zeros(3 * n, 3 * n);
        for i in 0..n {
            for &j in self.pattern.row(i) {
                let b = self.get(i, j);
                d.view_mut((3 * i, 3 * j), (3, 3)).copy_from(&b);
            }
        }
        d
    }
}

/// Deterministic dot product over 3-vectors.
pub fn dot(a: &[Vec3], b: &[Vec3]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u.dot(v)).sum::<f64>())
        .collect();
    partial.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` on the unfixed subspace with block-Jacobi preconditioning.
///
/// Rows and columns of fixed vertices are treated as identity with zero
/// right-hand side, so their components come back exactly zero.
pub fn cg_solve(a: &BlockMatrix, b: &[Vec3], fixed: &[bool], tol: f64, max_iters: usize) -> Result<(Vec<Vec3>, CgReport)> {
    cg_solve_from(a, b, fixed, None, tol, max_iters)
}

/// [`cg_solve`] starting from `x0` (fixed components are zeroed). The
/// residual is still measured relative to `‖b‖`.
pub fn cg_solve_from(
    a: &BlockMatrix,
    b: &[Vec3],
    fixed: &[bool],
    x0: Option<&[Vec3]>,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<Vec3>, CgReport)> {
    let n = a.size();
    assert_eq!(b.len(), n);
    assert_eq!(fixed.len(), n);
    let pattern = a.pattern.clone();
    let apply = |x: &[Vec3], y: &mut [Vec3]| {
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            if fixed[i] {
                *yi = x[i];
                return;
            }
            let mut acc = Vec3::zeros();
            for k in pattern.row_ptr[i]..pattern.row_ptr[i + 1] {
                let j = pattern.cols[k];
                if !fixed[j] {
                    acc += a.blocks[k] * x[j];
                }
            }
            *yi = acc;
        });
    };
    let precond: Vec<Mat3> = (0..n)
        .map(|i| {
            if fixed[i] {
                return Mat3::identity();
            }
            let d = a.diag(i);
            d.try_inverse().unwrap_or_else(|| {
                Mat3::from_diagonal(&d.diagonal().map(|v| if v != 0.0 { 1.0 / v } else { 1.0 }))
            })
        })
        .collect();

    let mut r: Vec<Vec3> = b.iter().zip(fixed).map(|(bi, &f)| if f { Vec3::zeros() } else { *bi }).collect();
    let b_norm = dot(&r, &r).sqrt();
    if b_norm == 0.0 {
        return Ok((vec![Vec3::zeros(); n], CgReport { iterations: 0, relative_residual: 0.0 }));
    }
    let mut x = match x0 {
        Some(x0) => {
            assert_eq!(x0.len(), n);
            let x: Vec<Vec3> = x0.iter().zip(fixed).map(|(xi, &f)| if f { Vec3::zeros() } else { *xi }).collect();
            let mut ax = vec![Vec3::zeros(); n];
            apply(&x, &mut ax);
            for ((ri, axi), &f) in r.iter_mut().zip(&ax).zip(fixed) {
                if !f {
                    *ri -= axi;
                }
            }
            let residual = dot(&r, &r).sqrt() / b_norm;
            if residual <= tol {
                return Ok((x, CgReport { iterations: 0, relative_residual: residual }));
            }
            x
        }
        None => vec![Vec3::zeros(); n],
    };
    let mut z: Vec<Vec3> = r.iter().zip(&precond).map(|(ri, m)| m * ri).collect();
    let mut p = z.clone();
    let mut ap = vec![Vec3::zeros(); n];
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 1..=max_iters {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::CgNotConverged { iterations: it, residual });
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        residual = dot(&r, &r).sqrt() / b_norm;
        if residual <= tol {
            return Ok((x, CgReport { iterations: it, relative_residual: residual }));
        }
        z.par_iter_mut().zip(&r).zip(&precond).for_each(|((zi, ri), m)| *zi = m * ri);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::CgNotConverged { iterations: max_iters, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn full_pattern(n: usize) -> Arc<BlockPattern> {
        let all: Vec<usize> = (0..n).collect();
        Arc::new(BlockPattern::from_elements(n, [all.as_slice()]))
    }

    #[test]
    fn identity_one_iteration() {
        let p = Arc::new(BlockPattern::from_elements(4, std::iter::empty()));
        let mut a = BlockMatrix::zeros(p);
        for i in 0..4 {
            a.add_diag(i, &Mat3::identity());
        }
        let b: Vec<Vec3> = (0..4).map(|i| Vec3::new(i as f64, 1.0, -2.0)).collect();
        let (x, rep) = cg_solve(&a, &b, &[false; 4], 1e-12, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_system() {
        let p = Arc::new(BlockPattern::from_elements(3, std::iter::empty()));
        let mut a = BlockMatrix::zeros(p);
        let d = [Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.5, 4.0, 8.0), Vec3::new(9.0, 1e-3, 2.0)];
        for i in 0..3 {
            a.add_diag(i, &Mat3::from_diagonal(&d[i]));
        }
        let b = vec![Vec3::new(1.0, 1.0, 1.0); 3];
        let (x, _) = cg_solve(&a, &b, &[false; 3], 1e-10, 10).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                assert!((x[i][k] - 1.0 / d[i][k]).abs() < 1e-8 / d[i][k]);
            }
        }
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10;
        let m = nalgebra::DMatrix::<f64>::from_fn(3 * n, 3 * n, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &m * m.transpose() + nalgebra::DMatrix::identity(3 * n, 3 * n) * 0.5;
        let mut a = BlockMatrix::zeros(full_pattern(n));
        for i in 0..n {
            for j in 0..n {
                a.add(i, j, &Mat3::from_fn(|r, c| spd[(3 * i + r, 3 * j + c)]));
            }
        }
        let b: Vec<Vec3> = (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let rhs = nalgebra::DVector::from_iterator(3 * n, b.iter().flat_map(|v| v.iter().copied()));
        let oracle = spd.clone().cholesky().unwrap().solve(&rhs);
        let (x, _) = cg_solve(&a, &b, &vec![false; n], 1e-14, 500).unwrap();
        for i in 0..n {
            for k in 0..3 {
                assert!((x[i][k] - oracle[3 * i + k]).abs() < 1e-8);
            }
        }
        assert!(a.asymmetry() < 1e-12);
        assert!((a.to_dense() - spd).norm() < 1e-12);
    }

    #[test]
    fn fixed_rows_are_zero() {
        let mut a = BlockMatrix::zeros(full_pattern(3));
        for i in 0..3 {
            for j in 0..3 {
                let v = if i == j { 4.0 } else { -1.0 };
                a.add(i, j, &(Mat3::identity() * v));
            }
        }
        let b = vec![Vec3::new(1.0, 2.0, 3.0); 3];
        let (x, _) = cg_solve(&a, &b, &[false, true, false], 1e-12, 50).unwrap();
        assert_eq!(x[1], Vec3::zeros());
        // Reduced 2×2 system [[4,-1],[-1,4]] per component.
        for k in 0..3 {
            assert!((x[0][k] - b[0][k] / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn stalls_report_residual() {
        let mut a = BlockMatrix::zeros(full_pattern(2));
        a.add_diag(0, &Mat3::identity());
        a.add_diag(1, &(-Mat3::identity()));
        let b = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        assert!(matches!(cg_solve(&a, &b, &[false; 2], 1e-12, 5), Err(Error::CgNotConverged { .. })));
    }

    #[test]
    fn dot_is_thread_count_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<Vec3> = (0..10_000).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| dot(&a, &a));
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| dot(&a, &a));
        assert_eq!(one.to_bits(), four.to_bits());
    }
}
