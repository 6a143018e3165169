//! Smoothed-aggregation algebraic multigrid, applied as a CG preconditioner.
//!
//! Unknowns are grouped in contiguous blocks (the free DOFs of one node, or
//! the coarse DOFs of one aggregate). Aggregation works on the block graph,
//! the tentative prolongator interpolates a near-kernel basis (rigid-body
//! modes on the finest level) exactly, and one damped-Jacobi step smooths it.
//! Levels are relaxed with Chebyshev polynomials in D^-1 A; the coarsest
//! level is factored densely.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::bc::ReducedSystem;
use super::cg::{solve_pcg, CgOptions, SolveResult};
use super::csr::{CsrMatrix, CHUNK};
use super::SolveError;
use crate::mesh::{Mesh, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmgOptions {
    /// Block strength-of-connection threshold.
    pub strength: f64,
    pub smoother_degree: usize,
    /// Coarsening stops once a level has at most this many unknowns.
    pub coarse_size: usize,
    pub max_levels: usize,
}

impl Default for AmgOptions {
    fn default() -> Self {
        AmgOptions {
            strength: 0.08,
            smoother_degree: 3,
            coarse_size: 1500,
            max_levels: 12,
        }
    }
}

/// Blocked unknowns together with a near-kernel basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpace {
    /// Block `b` owns unknowns `block_ptr[b]..block_ptr[b + 1]`.
    pub block_ptr: Vec<usize>,
    /// Row-major, `cols` values per unknown.
    pub nullspace: Vec<f64>,
    pub cols: usize,
}

impl BlockSpace {
    pub fn len(&self) -> usize {
        *self.block_ptr.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocks(&self) -> usize {
        self.block_ptr.len().saturating_sub(1)
    }

    fn owner(&self) -> Vec<u32> {
        let mut owner = vec![0u32; self.len()];
        for b in 0..self.blocks() {
            owner[self.block_ptr[b]..self.block_ptr[b + 1]].fill(b as u32);
        }
        owner
    }
}

/// The six rigid-body modes on the free DOFs `free` (full ids, 3 per node,
/// ascending), blocked by node. Rotations are taken about the centroid and
/// scaled by the model size so all columns have comparable magnitude.
pub fn rigid_body_space(nodes: &[Point], free: &[usize]) -> BlockSpace {
    let n = nodes.len().max(1) as f64;
    let centroid = nodes.iter().fold(Point::zeros(), |s, p| s + p) / n;
    let scale = nodes
        .iter()
        .map(|p| (p - centroid).norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut block_ptr = vec![0];
    let mut nullspace = Vec::with_capacity(free.len() * 6);
    for (k, &dof) in free.iter().enumerate() {
        let (node, c) = (dof / 3, dof % 3);
        if k > 0 && free[k - 1] / 3 != node {
            block_ptr.push(k);
        }
        let x = (nodes[node] - centroid) / scale;
        let mut row = [0.0; 6];
        row[c] = 1.0;
        // rotations about x, y, z: omega x r
        match c {
            0 => {
                row[4] = x.z;
                row[5] = -x.y;
            }
            1 => {
                row[3] = -x.z;
                row[5] = x.x;
            }
            _ => {
                row[3] = x.y;
                row[4] = -x.x;
            }
        }
        nullspace.extend_from_slice(&row);
    }
    if !free.is_empty() {
        block_ptr.push(free.len());
    }
    BlockSpace {
        block_ptr,
        nullspace,
        cols: 6,
    }
}

/// Interpolation from the linear (vertex-only) field to the quadratic field
/// on the same mesh, restricted to free DOFs. Returns the prolongator and
/// the rigid-body space of the vertex DOFs.
pub fn quadratic_to_linear(mesh: &Mesh, free: &[usize]) -> Result<(CsrMatrix, BlockSpace), SolveError> {
    let elements = mesh.quadratic_elements()?;
    let n_nodes = mesh.node_count();
    // mid-edge node -> its two vertices
    const EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)];
    let mut is_vertex = vec![false; n_nodes];
    let mut parents = vec![[u32::MAX; 2]; n_nodes];
    for el in elements {
        for &v in &el[..4] {
            is_vertex[v] = true;
        }
        for (k, &(i, j)) in EDGES.iter().enumerate() {
            parents[el[4 + k]] = [el[i] as u32, el[j] as u32];
        }
    }
    let coarse_free: Vec<usize> = free.iter().copied().filter(|&d| is_vertex[d / 3]).collect();
    let mut full_to_coarse = vec![u32::MAX; 3 * n_nodes];
    for (k, &dof) in coarse_free.iter().enumerate() {
        full_to_coarse[dof] = k as u32;
    }

    let mut row_ptr = Vec::with_capacity(free.len() + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for &dof in free {
        let (node, c) = (dof / 3, dof % 3);
        if is_vertex[node] {
            col_idx.push(full_to_coarse[dof]);
            values.push(1.0);
        } else {
            let mut entries: Vec<u32> = parents[node]
                .iter()
                .filter(|&&p| p != u32::MAX)
                .map(|&p| full_to_coarse[3 * p as usize + c])
                .filter(|&k| k != u32::MAX)
                .collect();
            entries.sort_unstable();
            for k in entries {
                col_idx.push(k);
                values.push(0.5);
            }
        }
        row_ptr.push(col_idx.len());
    }
    let p = CsrMatrix::new(free.len(), coarse_free.len(), row_ptr, col_idx, values);
    Ok((p, rigid_body_space(mesh.nodes(), &coarse_free)))
}

/// Largest linear level that is still factored directly.
pub const DIRECT_COARSE_LIMIT: usize = 400_000;

/// CG on a reduced quadratic-element system, preconditioned by a V-cycle
/// whose first coarse level is the linear field on the same mesh. Returns
/// the solve (its `seconds` include the hierarchy setup) and the level sizes.
pub fn solve_multigrid(
    mesh: &Mesh,
    system: &ReducedSystem,
    options: &CgOptions,
) -> Result<(SolveResult, Vec<usize>), SolveError> {
    let start = std::time::Instant::now();
    let free = system.map.free_dofs();
    let first = quadratic_to_linear(mesh, free)?;
    let amg = AmgOptions {
        coarse_size: DIRECT_COARSE_LIMIT,
        ..AmgOptions::default()
    };
    let mg = Multigrid::new(&system.k, rigid_body_space(mesh.nodes(), free), Some(first), &amg)?;
    let mut result = solve_pcg(&system.k, &system.f, options, &mg)?;
    result.seconds = start.elapsed().as_secs_f64();
    Ok((result, mg.sizes()))
}

/// Something that approximately applies K^-1; must be symmetric for CG.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self, SolveError> {
        Ok(Jacobi {
            inv_diag: inverse_diagonal(a)?,
        })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        zip_map(z, r, &self.inv_diag, |ri, di| ri * di);
    }
}

fn inverse_diagonal(a: &CsrMatrix) -> Result<Vec<f64>, SolveError> {
    let diag = a.diagonal();
    if let Some(dof) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(SolveError::ZeroDiagonal { dof });
    }
    Ok(diag.iter().map(|d| 1.0 / d).collect())
}

fn zip_map(out: &mut [f64], a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) {
    out.par_chunks_mut(CHUNK)
        .zip(a.par_chunks(CHUNK).zip(b.par_chunks(CHUNK)))
        .for_each(|(oc, (ac, bc))| {
            for (o, (x, y)) in oc.iter_mut().zip(ac.iter().zip(bc)) {
                *o = f(*x, *y);
            }
        });
}

/// Chebyshev smoother. Its products with A read a single-precision copy of
/// the values: the V-cycle is bandwidth bound and only has to approximate
/// the inverse, while CG itself keeps the full-precision operator.
struct Smoother {
    inv_diag: Vec<f64>,
    values: Vec<f32>,
    lmin: f64,
    lmax: f64,
    degree: usize,
}

impl Smoother {
    fn new(a: &CsrMatrix, degree: usize) -> Result<Self, SolveError> {
        let inv_diag = inverse_diagonal(a)?;
        let rho = spectral_radius(a, &inv_diag);
        Ok(Smoother {
            inv_diag,
            values: a.values.iter().map(|&v| v as f32).collect(),
            lmin: rho * 1.1 / 30.0,
            lmax: rho * 1.1,
            degree,
        })
    }

    /// y = A x using the single-precision values.
    fn mul(&self, a: &CsrMatrix, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), a.ncols());
        assert_eq!(y.len(), a.nrows());
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let start = c * CHUNK;
            for (k, yi) in out.iter_mut().enumerate() {
                let i = start + k;
                let range = a.row_ptr[i]..a.row_ptr[i + 1];
                let mut s = 0.0;
                for (&j, &v) in a.col_idx[range.clone()].iter().zip(&self.values[range]) {
                    s += f64::from(v) * x[j as usize];
                }
                *yi = s;
            }
        });
    }

    /// Chebyshev iteration for A x = b in the D^-1 A spectrum
    /// [lmin, lmax]; `x` is overwritten from zero when `zero_start`.
    fn relax(&self, a: &CsrMatrix, b: &[f64], x: &mut [f64], zero_start: bool) {
        let n = b.len();
        let mut r = vec![0.0; n];
        let mut w = vec![0.0; n];
        if zero_start {
            x.fill(0.0);
            zip_map(&mut r, b, &self.inv_diag, |bi, di| bi * di);
        } else {
            self.mul(a, x, &mut w);
            r.par_iter_mut()
                .zip(b.par_iter().zip(w.par_iter().zip(self.inv_diag.par_iter())))
                .for_each(|(ri, (bi, (wi, di)))| *ri = (bi - wi) * di);
        }
        let theta = 0.5 * (self.lmax + self.lmin);
        let delta = 0.5 * (self.lmax - self.lmin);
        let sigma = theta / delta;
        let mut rho = 1.0 / sigma;
        let mut d: Vec<f64> = r.par_iter().map(|ri| ri / theta).collect();
        for k in 0..self.degree {
            x.par_iter_mut().zip(d.par_iter()).for_each(|(xi, di)| *xi += di);
            if k + 1 == self.degree {
                break;
            }
            self.mul(a, &d, &mut w);
            let rho_next = 1.0 / (2.0 * sigma - rho);
            let (c1, c2) = (rho_next * rho, 2.0 * rho_next / delta);
            r.par_iter_mut()
                .zip(d.par_iter_mut().zip(w.par_iter().zip(self.inv_diag.par_iter())))
                .for_each(|(ri, (di, (wi, dinv)))| {
                    *ri -= wi * dinv;
                    *di = c1 * *di + c2 * *ri;
                });
            rho = rho_next;
        }
    }
}

/// Largest eigenvalue of D^-1 A, from a short Lanczos run on the
/// symmetrically scaled matrix.
fn spectral_radius(a: &CsrMatrix, inv_diag: &[f64]) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let s: Vec<f64> = inv_diag.iter().map(|d| d.sqrt()).collect();
    let steps = n.min(12);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin()).collect();
    let norm = super::csr::norm2(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    let mut v_prev = vec![0.0; n];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut tmp = vec![0.0; n];
    let mut w = vec![0.0; n];
    for _ in 0..steps {
        zip_map(&mut tmp, &v, &s, |x, y| x * y);
        a.mul_vec_into(&tmp, &mut w);
        let beta_prev = betas.last().copied().unwrap_or(0.0);
        w.par_iter_mut()
            .zip(s.par_iter().zip(v_prev.par_iter()))
            .for_each(|(wi, (si, pi))| *wi = *wi * si - beta_prev * pi);
        let alpha = super::csr::dot(&w, &v);
        w.par_iter_mut().zip(v.par_iter()).for_each(|(wi, vi)| *wi -= alpha * vi);
        alphas.push(alpha);
        let beta = super::csr::norm2(&w);
        if beta <= 1e-12 * alpha.abs() {
            break;
        }
        betas.push(beta);
        std::mem::swap(&mut v_prev, &mut v);
        v.par_iter_mut().zip(w.par_iter()).for_each(|(vi, wi)| *vi = wi / beta);
    }
    let m = alphas.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j || j + 1 == i {
            betas[i.min(j)]
        } else {
            0.0
        }
    });
    SymmetricEigen::new(t).eigenvalues.iter().copied().fold(f64::MIN, f64::max)
}

/// Row-parallel sparse product with a fixed accumulation order.
pub(crate) fn spgemm(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
    assert_eq!(a.ncols(), b.nrows());
    let ncols = b.ncols();
    let rows: Vec<usize> = (0..a.nrows()).step_by(CHUNK).collect();
    let parts: Vec<(Vec<usize>, Vec<u32>, Vec<f64>)> = rows
        .par_iter()
        .map_init(
            || (vec![0.0f64; ncols], vec![u32::MAX; ncols]),
            |(acc, mark), &start| {
                let end = (start + CHUNK).min(a.nrows());
                let mut lens = Vec::with_capacity(end - start);
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                let mut list: Vec<u32> = Vec::new();
                for i in start..end {
                    list.clear();
                    let (ac, av) = a.row(i);
                    for (&k, &aik) in ac.iter().zip(av) {
                        let (bc, bv) = b.row(k as usize);
                        for (&j, &bkj) in bc.iter().zip(bv) {
                            let ju = j as usize;
                            if mark[ju] != i as u32 {
                                mark[ju] = i as u32;
                                acc[ju] = 0.0;
                                list.push(j);
                            }
                            acc[ju] += aik * bkj;
                        }
                    }
                    list.sort_unstable();
                    for &j in &list {
                        cols.push(j);
                        vals.push(acc[j as usize]);
                    }
                    lens.push(list.len());
                }
                (lens, cols, vals)
            },
        )
        .collect();
    concat_rows(a.nrows(), ncols, parts)
}

/// R A P with R = P^T.
fn galerkin(r: &CsrMatrix, a: &CsrMatrix, p: &CsrMatrix) -> CsrMatrix {
    let coarse = if p.nnz() <= 4 * p.nrows() {
        galerkin_fused(r, a, p)
    } else {
        let ap = spgemm(a, p);
        spgemm(r, &ap)
    };
    symmetrize(coarse)
}

/// R A P computed one coarse row at a time without forming A P; cheap when
/// P has very few entries per row.
fn galerkin_fused(r: &CsrMatrix, a: &CsrMatrix, p: &CsrMatrix) -> CsrMatrix {
    let ncols = p.ncols();
    let rows: Vec<usize> = (0..r.nrows()).step_by(CHUNK).collect();
    let parts: Vec<(Vec<usize>, Vec<u32>, Vec<f64>)> = rows
        .par_iter()
        .map_init(
            || (vec![0.0f64; ncols], vec![u32::MAX; ncols]),
            |(acc, mark), &start| {
                let end = (start + CHUNK).min(r.nrows());
                let mut lens = Vec::with_capacity(end - start);
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                let mut list: Vec<u32> = Vec::new();
                for ci in start..end {
                    list.clear();
                    let (rc, rv) = r.row(ci);
                    for (&i, &rii) in rc.iter().zip(rv) {
                        let (ac, av) = a.row(i as usize);
                        for (&k, &aik) in ac.iter().zip(av) {
                            let w = rii * aik;
                            let (pc, pv) = p.row(k as usize);
                            for (&j, &pkj) in pc.iter().zip(pv) {
                                let ju = j as usize;
                                if mark[ju] != ci as u32 {
                                    mark[ju] = ci as u32;
                                    acc[ju] = 0.0;
                                    list.push(j);
                                }
                                acc[ju] += w * pkj;
                            }
                        }
                    }
                    list.sort_unstable();
                    for &j in &list {
                        cols.push(j);
                        vals.push(acc[j as usize]);
                    }
                    lens.push(list.len());
                }
                (lens, cols, vals)
            },
        )
        .collect();
    concat_rows(r.nrows(), ncols, parts)
}

fn concat_rows(nrows: usize, ncols: usize, parts: Vec<(Vec<usize>, Vec<u32>, Vec<f64>)>) -> CsrMatrix {
    let mut row_ptr = Vec::with_capacity(nrows + 1);
    row_ptr.push(0);
    let total: usize = parts.iter().map(|p| p.1.len()).sum();
    let mut col_idx = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for (lens, cols, vals) in parts {
        for l in lens {
            row_ptr.push(row_ptr.last().unwrap() + l);
        }
        col_idx.extend_from_slice(&cols);
        values.extend_from_slice(&vals);
    }
    CsrMatrix::new(nrows, ncols, row_ptr, col_idx, values)
}

pub(crate) fn transpose(a: &CsrMatrix) -> CsrMatrix {
    let mut counts = vec![0usize; a.ncols() + 1];
    for &j in &a.col_idx {
        counts[j as usize + 1] += 1;
    }
    for j in 0..a.ncols() {
        counts[j + 1] += counts[j];
    }
    let row_ptr = counts.clone();
    let mut next = counts;
    let mut col_idx = vec![0u32; a.nnz()];
    let mut values = vec![0.0; a.nnz()];
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let p = next[j as usize];
            col_idx[p] = i as u32;
            values[p] = v;
            next[j as usize] += 1;
        }
    }
    CsrMatrix::new(a.ncols(), a.nrows(), row_ptr, col_idx, values)
}

/// (A + A^T) / 2 for a structurally symmetric A.
fn symmetrize(a: CsrMatrix) -> CsrMatrix {
    let t = transpose(&a);
    let mut a = a;
    if t.col_idx == a.col_idx && t.row_ptr == a.row_ptr {
        a.values.iter_mut().zip(&t.values).for_each(|(x, y)| *x = 0.5 * (*x + y));
    }
    a
}

/// Strong block neighbours: ||A_IJ||_F >= theta sqrt(||A_II||_F ||A_JJ||_F).
fn strength_graph(a: &CsrMatrix, space: &BlockSpace, theta: f64) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
    let owner = space.owner();
    let nb = space.blocks();
    let per_block: Vec<(f64, Vec<(u32, f64)>)> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let mut entries: Vec<(u32, f64)> = Vec::new();
            for i in space.block_ptr[b]..space.block_ptr[b + 1] {
                let (cols, vals) = a.row(i);
                entries.extend(cols.iter().zip(vals).map(|(&j, &v)| (owner[j as usize], v * v)));
            }
            entries.sort_by_key(|e| e.0);
            let mut merged: Vec<(u32, f64)> = Vec::new();
            for (j, v) in entries {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            let own = merged.iter().find(|e| e.0 == b as u32).map_or(0.0, |e| e.1.sqrt());
            (own, merged)
        })
        .collect();
    let mut ptr = vec![0];
    let mut adj = Vec::new();
    let mut weight = Vec::new();
    for (b, (own, merged)) in per_block.iter().enumerate() {
        for &(j, s) in merged {
            if j as usize == b {
                continue;
            }
            let s = s.sqrt();
            if s >= theta * (own * per_block[j as usize].0).sqrt() {
                adj.push(j);
                weight.push(s);
            }
        }
        ptr.push(adj.len());
    }
    (ptr, adj, weight)
}

/// Greedy three-phase aggregation; returns the aggregate id of each block.
fn aggregate(ptr: &[usize], adj: &[u32], weight: &[f64]) -> (Vec<u32>, usize) {
    const NONE: u32 = u32::MAX;
    let nb = ptr.len() - 1;
    let nbrs = |i: usize| &adj[ptr[i]..ptr[i + 1]];
    let mut agg = vec![NONE; nb];
    let mut count = 0u32;
    for i in 0..nb {
        if agg[i] == NONE && nbrs(i).iter().all(|&j| agg[j as usize] == NONE) {
            agg[i] = count;
            for &j in nbrs(i) {
                agg[j as usize] = count;
            }
            count += 1;
        }
    }
    let seeded = agg.clone();
    for i in 0..nb {
        if agg[i] != NONE {
            continue;
        }
        let best = (ptr[i]..ptr[i + 1])
            .filter(|&k| seeded[adj[k] as usize] != NONE)
            .max_by(|&x, &y| weight[x].total_cmp(&weight[y]).then(y.cmp(&x)));
        if let Some(k) = best {
            agg[i] = seeded[adj[k] as usize];
        }
    }
    for i in 0..nb {
        if agg[i] == NONE {
            agg[i] = count;
            for &j in nbrs(i) {
                if agg[j as usize] == NONE {
                    agg[j as usize] = count;
                }
            }
            count += 1;
        }
    }
    (agg, count as usize)
}

/// Tentative prolongator: per aggregate, an orthonormal basis of the local
/// near-kernel (thin QR); R becomes the coarse near-kernel.
fn tentative(space: &BlockSpace, agg: &[u32], n_agg: usize) -> (CsrMatrix, BlockSpace) {
    let c = space.cols;
    let n = space.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_agg];
    for (b, &g) in agg.iter().enumerate() {
        members[g as usize].push(b);
    }
    // per fine unknown: (first coarse column, column count, values)
    let mut row_entries: Vec<(u32, Vec<f64>)> = vec![(0, Vec::new()); n];
    let mut block_ptr = vec![0];
    let mut nullspace = Vec::new();
    for blocks in &members {
        let rows: Vec<usize> = blocks
            .iter()
            .flat_map(|&b| space.block_ptr[b]..space.block_ptr[b + 1])
            .collect();
        let m = rows.len();
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut r = vec![vec![0.0; c]; c];
        for j in 0..c {
            let mut v: Vec<f64> = rows.iter().map(|&i| space.nullspace[i * c + j]).collect();
            let orig = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut h = vec![0.0; q.len()];
            for _ in 0..2 {
                for (t, qt) in q.iter().enumerate() {
                    let proj: f64 = qt.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(qt).for_each(|(vi, qi)| *vi -= proj * qi);
                    h[t] += proj;
                }
            }
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (t, ht) in h.iter().enumerate() {
                r[t][j] = *ht;
            }
            if orig > 0.0 && nv > 1e-10 * orig && q.len() < m {
                r[q.len()][j] = nv;
                v.iter_mut().for_each(|x| *x /= nv);
                q.push(v);
            }
        }
        let first = *block_ptr.last().unwrap() as u32;
        for (k, &i) in rows.iter().enumerate() {
            row_entries[i] = (first, q.iter().map(|col| col[k]).collect());
        }
        for row in r.iter().take(q.len()) {
            nullspace.extend_from_slice(row);
        }
        if !q.is_empty() {
            block_ptr.push(first as usize + q.len());
        }
    }
    let n_coarse = *block_ptr.last().unwrap();
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for (first, vals) in row_entries {
        for (k, v) in vals.into_iter().enumerate() {
            col_idx.push(first + k as u32);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    (
        CsrMatrix::new(n, n_coarse, row_ptr, col_idx, values),
        BlockSpace {
            block_ptr,
            nullspace,
            cols: c,
        },
    )
}

/// P = (I - 4/(3 rho) D^-1 A) T.
fn smooth_prolongator(a: &CsrMatrix, smoother: &Smoother, t: &CsrMatrix) -> CsrMatrix {
    let omega = 4.0 / (3.0 * smoother.lmax / 1.1);
    let mut at = spgemm(a, t);
    for i in 0..at.nrows() {
        let scale = omega * smoother.inv_diag[i];
        let (start, end) = (at.row_ptr[i], at.row_ptr[i + 1]);
        for v in &mut at.values[start..end] {
            *v *= -scale;
        }
        let (tc, tv) = t.row(i);
        for (&j, &v) in tc.iter().zip(tv) {
            // every column of T's row is present in (A T)'s row since A has a diagonal
            if let Ok(p) = at.col_idx[start..end].binary_search(&j) {
                at.values[start + p] += v;
            }
        }
    }
    at
}

/// Exact solver for the coarsest level: dense for small operators, sparse
/// Cholesky (fill-reducing ordering) otherwise.
enum CoarseSolver {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Sparse(faer::sparse::linalg::solvers::Llt<usize, f64>),
}

const DENSE_LIMIT: usize = 2000;

impl CoarseSolver {
    fn new(a: &CsrMatrix) -> Result<Self, SolveError> {
        let n = a.nrows();
        let singular = SolveError::SingularCoarseOperator { size: n };
        if n <= DENSE_LIMIT {
            let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
            return dense.cholesky().map(CoarseSolver::Dense).ok_or(singular);
        }
        // the upper triangle of a symmetric CSR matrix is the lower triangle in CSC
        let mut col_ptr = vec![0usize];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j as usize >= i {
                    row_idx.push(j as usize);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let symbolic = faer::sparse::SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let lower = faer::sparse::SparseColMat::new(symbolic, values);
        lower
            .sp_cholesky(faer::Side::Lower)
            .map(CoarseSolver::Sparse)
            .map_err(|_| singular)
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        match self {
            CoarseSolver::Dense(c) => x.copy_from_slice(c.solve(&DVector::from_column_slice(b)).as_slice()),
            CoarseSolver::Sparse(llt) => {
                use faer::linalg::solvers::Solve;
                x.copy_from_slice(b);
                let n = x.len();
                llt.solve_in_place(faer::MatMut::from_column_major_slice_mut(x, n, 1));
            }
        }
    }
}

struct Level {
    smoother: Smoother,
    p: CsrMatrix,
    r: CsrMatrix,
}

/// V-cycle preconditioner. The finest operator is borrowed; coarse operators
/// are Galerkin products.
pub struct Multigrid<'a> {
    fine: &'a CsrMatrix,
    ops: Vec<CsrMatrix>,
    levels: Vec<Level>,
    coarse: CoarseSolver,
}

impl<'a> Multigrid<'a> {
    /// Builds the hierarchy for `a`. `first`, when given, is a fixed first
    /// prolongator (e.g. quadratic to linear) with its coarse block space,
    /// always applied; aggregation takes over below it. The coarsest level
    /// is factored, densely up to 2000 unknowns and sparsely beyond.
    pub fn new(
        a: &'a CsrMatrix,
        space: BlockSpace,
        first: Option<(CsrMatrix, BlockSpace)>,
        options: &AmgOptions,
    ) -> Result<Self, SolveError> {
        assert_eq!(space.len(), a.nrows());
        let mut ops: Vec<CsrMatrix> = Vec::new();
        let mut levels = Vec::new();
        let mut space = space;
        let mut first = first;
        loop {
            let op = ops.last().unwrap_or(a);
            let n = op.nrows();
            let done = n <= options.coarse_size || levels.len() + 1 >= options.max_levels;
            if done && first.is_none() {
                break;
            }
            let smoother = Smoother::new(op, options.smoother_degree)?;
            let (p, next_space) = match first.take() {
                Some(fixed) => fixed,
                None => {
                    let (ptr, adj, weight) = strength_graph(op, &space, options.strength);
                    let (agg, n_agg) = aggregate(&ptr, &adj, &weight);
                    let (t, next_space) = tentative(&space, &agg, n_agg);
                    (smooth_prolongator(op, &smoother, &t), next_space)
                }
            };
            if p.ncols() == 0 || p.ncols() >= n {
                break;
            }
            let r = transpose(&p);
            let coarse = galerkin(&r, op, &p);
            levels.push(Level { smoother, p, r });
            ops.push(coarse);
            space = next_space;
        }
        let coarse = CoarseSolver::new(ops.last().unwrap_or(a))?;
        Ok(Multigrid {
            fine: a,
            ops,
            levels,
            coarse,
        })
    }

    /// Unknowns per level, finest first.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.fine.nrows())
            .chain(self.ops.iter().map(|o| o.nrows()))
            .collect()
    }

    /// Stored nonzeros over all levels relative to the finest operator.
    pub fn operator_complexity(&self) -> f64 {
        let total: usize = self.fine.nnz() + self.ops.iter().map(|o| o.nnz()).sum::<usize>();
        total as f64 / self.fine.nnz().max(1) as f64
    }

    fn op(&self, level: usize) -> &CsrMatrix {
        if level == 0 {
            self.fine
        } else {
            &self.ops[level - 1]
        }
    }

    fn cycle(&self, level: usize, b: &[f64], x: &mut [f64]) {
        if level == self.levels.len() {
            self.coarse.solve(b, x);
            return;
        }
        let a = self.op(level);
        let lv = &self.levels[level];
        lv.smoother.relax(a, b, x, true);
        let mut res = vec![0.0; b.len()];
        lv.smoother.mul(a, x, &mut res);
        res.par_iter_mut().zip(b.par_iter()).for_each(|(r, bi)| *r = bi - *r);
        let bc = lv.r.mul_vec(&res);
        let mut xc = vec![0.0; bc.len()];
        self.cycle(level + 1, &bc, &mut xc);
        lv.p.mul_vec_into(&xc, &mut res);
        x.par_iter_mut().zip(res.par_iter()).for_each(|(xi, ci)| *xi += ci);
        lv.smoother.relax(a, b, x, false);
    }
}

impl Preconditioner for Multigrid<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }
}
