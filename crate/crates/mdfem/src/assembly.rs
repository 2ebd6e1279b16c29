//! Assembly of the 2x2 block system over free degrees of freedom.
//!
//! Block 0 is the bulk space (duplicated across interfaces), block 1 the
//! continuous interface space. The form is
//!
//! ```text
//! a(v, w) = sum_i  A_i  (grad v0, grad w0)_{region i}
//!         + sum_j  A_j  (dv1, dw1)_{segment j}
//!         + sum_{sides}  B_j  (v0 - v1, w0 - w1)_{edge}
//! ```
//!
//! with piecewise-constant coefficients, so every integral is exact.

use std::sync::Arc;

use nalgebra::Vector2;

use crate::space::DofMap;
use crate::sparse::{Coo, Csr};
use crate::{Error, Result};

/// Piecewise-constant problem coefficients.
#[derive(Debug, Clone)]
pub struct Coefficients {
    /// Bulk diffusion per region, > 0.
    pub a_bulk: Vec<f64>,
    /// Tangential diffusion per interface segment, > 0.
    pub a_iface: Vec<f64>,
    /// Robin coupling per interface segment, >= 0.
    pub b_robin: Vec<f64>,
}

impl Coefficients {
    pub fn constant(n_regions: usize, n_segments: usize, a0: f64, a1: f64, b: f64) -> Self {
        Coefficients {
            a_bulk: vec![a0; n_regions],
            a_iface: vec![a1; n_segments],
            b_robin: vec![b; n_segments],
        }
    }

    pub fn validate(&self, n_regions: usize, n_segments: usize) -> Result<()> {
        if self.a_bulk.len() != n_regions {
            return Err(Error::DimensionMismatch { expected: n_regions, got: self.a_bulk.len() });
        }
        for (arr, n) in [(&self.a_iface, n_segments), (&self.b_robin, n_segments)] {
            if arr.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: arr.len() });
            }
        }
        for (i, &a) in self.a_bulk.iter().enumerate() {
            if !(a > 0.0) {
                return Err(Error::NonPositiveCoefficient { kind: "bulk", index: i });
            }
        }
        for (j, &a) in self.a_iface.iter().enumerate() {
            if !(a > 0.0) {
                return Err(Error::NonPositiveCoefficient { kind: "interface", index: j });
            }
        }
        for (j, &b) in self.b_robin.iter().enumerate() {
            if !(b >= 0.0) {
                return Err(Error::NonPositiveCoefficient { kind: "coupling", index: j });
            }
        }
        Ok(())
    }

    pub fn alpha_max(&self) -> f64 {
        self.a_iface.iter().cloned().fold(0.0, f64::max)
    }

    pub fn beta_max(&self) -> f64 {
        self.b_robin.iter().cloned().fold(0.0, f64::max)
    }
}

/// Assembled block system over free dofs.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub a00: Csr,
    pub a01: Csr,
    pub a10: Csr,
    pub a11: Csr,
    pub b0: Vec<f64>,
    pub b1: Vec<f64>,
    pub dofs: Arc<DofMap>,
}

/// Local P1 stiffness for a triangle, times `coeff`.
fn local_stiffness(p: [crate::geometry::Point; 3], coeff: f64) -> ([[f64; 3]; 3], f64) {
    let d1 = p[1] - p[0];
    let d2 = p[2] - p[0];
    let det = d1.x * d2.y - d1.y * d2.x;
    let area = 0.5 * det;
    // constant gradients of the barycentric basis
    let g = [
        Vector2::new(p[1].y - p[2].y, p[2].x - p[1].x) / det,
        Vector2::new(p[2].y - p[0].y, p[0].x - p[2].x) / det,
        Vector2::new(p[0].y - p[1].y, p[1].x - p[0].x) / det,
    ];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = coeff * area * g[i].dot(&g[j]);
        }
    }
    (k, area)
}

/// Assemble the block system. `f_bulk(region, x, y)` and `f_iface(segment,
/// x, y)` are the volume and line sources; `lift` optionally supplies
/// Dirichlet data `(g0, g1)` as full-dof vectors (only fixed entries are
/// read; `None` means homogeneous).
pub fn assemble(
    dofs: &Arc<DofMap>,
    coeffs: &Coefficients,
    f_bulk: &dyn Fn(usize, f64, f64) -> f64,
    f_iface: &dyn Fn(usize, f64, f64) -> f64,
    lift: Option<(&[f64], &[f64])>,
) -> Result<BlockSystem> {
    let mesh = &dofs.mesh;
    let n_regions = coeffs.a_bulk.len();
    let n_segments = coeffs.a_iface.len();
    coeffs.validate(n_regions, n_segments)?;
    let (n0, n1) = (dofs.n_bulk_free, dofs.n_iface_free);
    if n0 + n1 == 0 {
        return Err(Error::EmptySystem);
    }

    let zeros0;
    let zeros1;
    let (g0, g1): (&[f64], &[f64]) = match lift {
        Some((g0, g1)) => (g0, g1),
        None => {
            zeros0 = vec![0.0; dofs.n_bulk()];
            zeros1 = vec![0.0; dofs.n_iface()];
            (&zeros0, &zeros1)
        }
    };

    let mut a00 = Coo::new(n0, n0);
    let mut a01 = Coo::new(n0, n1);
    let mut a11 = Coo::new(n1, n1);
    let mut b0 = vec![0.0; n0];
    let mut b1 = vec![0.0; n1];

    // bulk stiffness and load (3-point mid-edge quadrature, exact for P2)
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let r = mesh.tri_region[t];
        let p = tri.map(|v| mesh.vertices[v]);
        let (k, area) = local_stiffness(p, coeffs.a_bulk[r]);
        let ds = dofs.tri_dof[t];
        for i in 0..3 {
            let fi = dofs.bulk_free[ds[i]];
            for j in 0..3 {
                if fi == usize::MAX {
                    continue;
                }
                let fj = dofs.bulk_free[ds[j]];
                if fj == usize::MAX {
                    b0[fi] -= k[i][j] * g0[ds[j]];
                } else {
                    a00.push(fi, fj, k[i][j]);
                }
            }
        }
        for e in 0..3 {
            let mid = nalgebra::center(&p[(e + 1) % 3], &p[(e + 2) % 3]);
            let fv = f_bulk(r, mid.x, mid.y) * area / 3.0;
            // basis values at the opposite edge midpoints: 0, 1/2, 1/2
            for i in 0..3 {
                let fi = dofs.bulk_free[ds[i]];
                if i != e && fi != usize::MAX {
                    b0[fi] += 0.5 * fv;
                }
            }
        }
    }

    // interface tangential stiffness and load (2-point Gauss)
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    for (e, &[va, vb]) in mesh.interface_edges.iter().enumerate() {
        let j = mesh.edge_segment[e];
        let (pa, pb) = (mesh.vertices[va], mesh.vertices[vb]);
        let len = (pb - pa).norm();
        let ds = [
            dofs.iface_dof_of_vertex[va].unwrap(),
            dofs.iface_dof_of_vertex[vb].unwrap(),
        ];
        let k = coeffs.a_iface[j] / len;
        let local = [[k, -k], [-k, k]];
        for i in 0..2 {
            let fi = dofs.iface_free[ds[i]];
            if fi == usize::MAX {
                continue;
            }
            for jj in 0..2 {
                let fj = dofs.iface_free[ds[jj]];
                if fj == usize::MAX {
                    b1[fi] -= local[i][jj] * g1[ds[jj]];
                } else {
                    a11.push(fi, fj, local[i][jj]);
                }
            }
            for &t in &gauss {
                let q = pa + (pb - pa) * t;
                let basis = if i == 0 { 1.0 - t } else { t };
                b1[fi] += 0.5 * len * f_iface(j, q.x, q.y) * basis;
            }
        }
    }

    // Robin coupling: B_j * edge mass on (v0 - v1), once per side
    for s in &dofs.trace_sides {
        let b = coeffs.b_robin[s.segment];
        if b == 0.0 {
            continue;
        }
        let m = [
            [b * s.length / 3.0, b * s.length / 6.0],
            [b * s.length / 6.0, b * s.length / 3.0],
        ];
        for i in 0..2 {
            for j in 0..2 {
                let (bi, bj) = (s.bulk[i], s.bulk[j]);
                let (ii, ij) = (s.iface[i], s.iface[j]);
                let (fbi, fbj) = (dofs.bulk_free[bi], dofs.bulk_free[bj]);
                let (fii, fij) = (dofs.iface_free[ii], dofs.iface_free[ij]);
                if fbi != usize::MAX {
                    if fbj != usize::MAX {
                        a00.push(fbi, fbj, m[i][j]);
                    } else {
                        b0[fbi] -= m[i][j] * g0[bj];
                    }
                    if fij != usize::MAX {
                        a01.push(fbi, fij, -m[i][j]);
                    } else {
                        b0[fbi] += m[i][j] * g1[ij];
                    }
                }
                if fii != usize::MAX {
                    if fij != usize::MAX {
                        a11.push(fii, fij, m[i][j]);
                    } else {
                        b1[fii] -= m[i][j] * g1[ij];
                    }
                    if fbj == usize::MAX {
                        b1[fii] += m[i][j] * g0[bj];
                    }
                }
            }
        }
    }

    let a00 = a00.to_csr();
    let a01 = a01.to_csr();
    let a10 = a01.transpose();
    let a11 = a11.to_csr();
    debug_assert!(a00.max_asymmetry() == 0.0);
    debug_assert!(a11.max_asymmetry() == 0.0);
    Ok(BlockSystem { a00, a01, a10, a11, b0, b1, dofs: Arc::clone(dofs) })
}

impl BlockSystem {
    pub fn n0(&self) -> usize {
        self.b0.len()
    }

    pub fn n1(&self) -> usize {
        self.b1.len()
    }

    /// Energy (squared) of a free-dof pair through the assembled blocks.
    pub fn energy(&self, u0: &[f64], u1: &[f64]) -> f64 {
        let mut t = self.a00.quad_form(u0, u0) + self.a11.quad_form(u1, u1);
        let mut a01u1 = vec![0.0; self.n0()];
        self.a01.matvec(u1, &mut a01u1);
        t += 2.0 * u0.iter().zip(&a01u1).map(|(a, b)| a * b).sum::<f64>();
        t
    }

    /// Apply the full block operator: (y0, y1) = A (u0, u1).
    pub fn apply(&self, u0: &[f64], u1: &[f64], y0: &mut [f64], y1: &mut [f64]) {
        self.a00.matvec(u0, y0);
        let mut tmp = vec![0.0; self.n0()];
        self.a01.matvec(u1, &mut tmp);
        for (y, t) in y0.iter_mut().zip(&tmp) {
            *y += t;
        }
        self.a11.matvec(u1, y1);
        let mut tmp1 = vec![0.0; self.n1()];
        self.a10.matvec(u0, &mut tmp1);
        for (y, t) in y1.iter_mut().zip(&tmp1) {
            *y += t;
        }
    }
}

/// Element-by-element evaluation of the energy seminorm squared on full-dof
/// vectors. Independent of the matrix assembly; used as an oracle and for
/// errors between nested levels.
pub fn energy_seminorm_sq(dofs: &DofMap, coeffs: &Coefficients, u0: &[f64], u1: &[f64]) -> f64 {
    let mesh = &dofs.mesh;
    let mut total = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|v| mesh.vertices[v]);
        let (k, _) = local_stiffness(p, coeffs.a_bulk[mesh.tri_region[t]]);
        let ds = dofs.tri_dof[t];
        for i in 0..3 {
            for j in 0..3 {
                total += k[i][j] * u0[ds[i]] * u0[ds[j]];
            }
        }
    }
    for (e, &[va, vb]) in mesh.interface_edges.iter().enumerate() {
        let len = (mesh.vertices[vb] - mesh.vertices[va]).norm();
        let du = u1[dofs.iface_dof_of_vertex[vb].unwrap()]
            - u1[dofs.iface_dof_of_vertex[va].unwrap()];
        total += coeffs.a_iface[mesh.edge_segment[e]] * du * du / len;
    }
    for s in &dofs.trace_sides {
        let da = u0[s.bulk[0]] - u1[s.iface[0]];
        let db = u0[s.bulk[1]] - u1[s.iface[1]];
        // integral of a linear squared over the edge
        total += coeffs.b_robin[s.segment] * s.length * (da * da + da * db + db * db) / 3.0;
    }
    total
}
