//! Block factorization, Schur complement and PCG.
//!
//! The bulk block A00 is block-diagonal over the bulk regions (no element
//! couples two regions), so it is factored region by region and the system
//! is reduced to the interface unknowns:
//!
//! ```text
//! S = A11 - A10 A00^{-1} A01,    s = b1 - A10 A00^{-1} b0.
//! ```
//!
//! S is applied matrix-free inside PCG; the bulk solution is recovered by
//! back-substitution, A00 u0 = b0 - A01 u1.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assembly::BlockSystem;
use crate::sparse::{Coo, SkylineChol};
use crate::{Error, Result};

/// Refuse to form a dense Schur matrix beyond this size.
pub const DEFAULT_SCHUR_CAP: usize = 20_000;

/// Factored bulk block with the Schur complement as an operator.
pub struct SchurOperator<'a> {
    pub sys: &'a BlockSystem,
    /// Free bulk indices per region.
    region_dofs: Vec<Vec<usize>>,
    chols: Vec<Option<SkylineChol>>,
}

impl<'a> SchurOperator<'a> {
    pub fn new(sys: &'a BlockSystem) -> Result<Self> {
        let dofs = &sys.dofs;
        let n_regions = dofs.bulk_region.iter().copied().max().map_or(0, |m| m + 1);
        let mut region_dofs = vec![Vec::new(); n_regions];
        for dof in 0..dofs.n_bulk() {
            let free = dofs.bulk_free[dof];
            if free != usize::MAX {
                region_dofs[dofs.bulk_region[dof]].push(free);
            }
        }
        let chols: Vec<Option<SkylineChol>> = region_dofs
            .par_iter()
            .enumerate()
            .map(|(r, idx)| {
                if idx.is_empty() {
                    return Ok(None);
                }
                let block = sys.a00.submatrix(idx);
                SkylineChol::factor(&block)
                    .map(Some)
                    .map_err(|_| Error::FactorizationBreakdown { region: r })
            })
            .collect::<Result<_>>()?;
        Ok(SchurOperator { sys, region_dofs, chols })
    }

    /// Solve A00 x = b, region by region.
    pub fn solve_a00(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        let parts: Vec<(usize, Vec<f64>)> = self
            .region_dofs
            .par_iter()
            .enumerate()
            .filter_map(|(r, idx)| {
                let chol = self.chols[r].as_ref()?;
                let local: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
                Some((r, chol.solve(&local)))
            })
            .collect();
        for (r, sol) in parts {
            for (k, &i) in self.region_dofs[r].iter().enumerate() {
                x[i] = sol[k];
            }
        }
        x
    }

    /// Apply the Schur complement: y = A11 x - A10 A00^{-1} A01 x.
    pub fn apply(&self, x1: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.sys.n1()];
        self.sys.a11.matvec(x1, &mut y);
        let t = self.sys.a01.apply(x1);
        let w = self.solve_a00(&t);
        let mut a10w = vec![0.0; self.sys.n1()];
        self.sys.a10.matvec(&w, &mut a10w);
        for (yi, wi) in y.iter_mut().zip(&a10w) {
            *yi -= wi;
        }
        y
    }

    /// Reduced right-hand side s = b1 - A10 A00^{-1} b0.
    pub fn reduced_rhs(&self) -> Vec<f64> {
        let w = self.solve_a00(&self.sys.b0);
        let mut s = self.sys.b1.clone();
        let mut a10w = vec![0.0; self.sys.n1()];
        self.sys.a10.matvec(&w, &mut a10w);
        for (si, wi) in s.iter_mut().zip(&a10w) {
            *si -= wi;
        }
        s
    }

    /// Back-substitute the bulk unknowns for a given interface solution.
    pub fn recover_bulk(&self, u1: &[f64]) -> Vec<f64> {
        let mut rhs = self.sys.b0.clone();
        let t = self.sys.a01.apply(u1);
        for (ri, ti) in rhs.iter_mut().zip(&t) {
            *ri -= ti;
        }
        self.solve_a00(&rhs)
    }

    /// Dense Schur matrix by column solves; symmetrized, since each column
    /// is computed independently up to roundoff.
    pub fn assemble_dense(&self, cap: usize) -> Result<DMatrix<f64>> {
        let n1 = self.sys.n1();
        if n1 > cap {
            return Err(Error::SchurMemoryCap { n1, cap });
        }
        let cols: Vec<Vec<f64>> = (0..n1)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n1];
                e[j] = 1.0;
                self.apply(&e)
            })
            .collect();
        let mut s = DMatrix::zeros(n1, n1);
        for j in 0..n1 {
            for i in 0..n1 {
                s[(i, j)] = 0.5 * (cols[j][i] + cols[i][j]);
            }
        }
        Ok(s)
    }
}

/// Outcome of a PCG run.
#[derive(Debug, Clone)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Preconditioned residual norm sqrt(r' T r) per iteration, from 0.
    pub residuals: Vec<f64>,
    /// Condition number estimate from the PCG Lanczos recurrence.
    pub cond_estimate: Option<f64>,
}

/// Preconditioned conjugate gradients with x0 = 0. `apply_a` must be
/// symmetric positive definite, `apply_m` a symmetric positive definite
/// approximate inverse (identity for plain CG). Stops when the
/// preconditioned residual norm sqrt(r' T r) drops below `rtol` times its
/// initial value; a direction with p' A p <= 0 is an SPD violation.
pub fn pcg(
    apply_a: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    apply_m: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<PcgResult> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = apply_m(&r);
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    if !(rz >= 0.0) {
        return Err(Error::NotSpd(format!("preconditioner gives r'Tr = {}", rz)));
    }
    let norm0 = rz.sqrt();
    let mut residuals = vec![norm0];
    if norm0 == 0.0 {
        return Ok(PcgResult { x, iterations: 0, converged: true, residuals, cond_estimate: None });
    }
    let mut p = z.clone();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut converged = false;
    let mut iterations = max_iter;
    for it in 0..max_iter {
        let ap = apply_a(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::NotSpd(format!(
                "PCG breakdown at iteration {}: p'Ap = {}",
                it, pap
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = apply_m(&r);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let norm = rz_new.max(0.0).sqrt();
        residuals.push(norm);
        alphas.push(alpha);
        if norm <= rtol * norm0 {
            converged = true;
            iterations = it + 1;
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let cond_estimate = lanczos_condition(&alphas, &betas);
    Ok(PcgResult { x, iterations, converged, residuals, cond_estimate })
}

/// Eigenvalue bounds of the preconditioned operator from the CG
/// coefficients: the Lanczos tridiagonal has diagonal 1/a_k + b_{k-1}/a_{k-1}
/// and off-diagonal sqrt(b_k)/a_k.
fn lanczos_condition(alphas: &[f64], betas: &[f64]) -> Option<f64> {
    let m = alphas.len();
    if m < 2 {
        return None;
    }
    let mut t = DMatrix::zeros(m, m);
    for k in 0..m {
        t[(k, k)] = 1.0 / alphas[k] + if k > 0 { betas[k - 1] / alphas[k - 1] } else { 0.0 };
        if k + 1 < m && k < betas.len() {
            let off = betas[k].max(0.0).sqrt() / alphas[k];
            t[(k, k + 1)] = off;
            t[(k + 1, k)] = off;
        }
    }
    let eig = t.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    (min > 0.0).then(|| max / min)
}

/// Full solution of the block system.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub pcg: Option<PcgResult>,
}

/// Solve via the Schur reduction and PCG on the interface unknowns.
pub fn solve_schur_pcg(
    sys: &BlockSystem,
    precond: Option<&(dyn Fn(&[f64]) -> Vec<f64> + Sync)>,
    rtol: f64,
    max_iter: usize,
) -> Result<Solution> {
    let op = SchurOperator::new(sys)?;
    if sys.n1() == 0 {
        let u0 = op.solve_a00(&sys.b0);
        return Ok(Solution { u0, u1: Vec::new(), pcg: None });
    }
    let s = op.reduced_rhs();
    let identity = |r: &[f64]| r.to_vec();
    let apply_m: &(dyn Fn(&[f64]) -> Vec<f64> + Sync) = match precond {
        Some(m) => m,
        None => &identity,
    };
    let result = pcg(&|x| op.apply(x), apply_m, &s, rtol, max_iter)?;
    let u0 = op.recover_bulk(&result.x);
    Ok(Solution { u0, u1: result.x.clone(), pcg: Some(result) })
}

/// Direct solve of the full 2x2 block system; the oracle for everything else.
pub fn monolithic_solve(sys: &BlockSystem) -> Result<Solution> {
    let (n0, n1) = (sys.n0(), sys.n1());
    let n = n0 + n1;
    if n == 0 {
        return Err(Error::EmptySystem);
    }
    let mut coo = Coo::new(n, n);
    for r in 0..n0 {
        for (c, v) in sys.a00.row(r) {
            coo.push(r, c, v);
        }
        for (c, v) in sys.a01.row(r) {
            coo.push(r, n0 + c, v);
        }
    }
    for r in 0..n1 {
        for (c, v) in sys.a10.row(r) {
            coo.push(n0 + r, c, v);
        }
        for (c, v) in sys.a11.row(r) {
            coo.push(n0 + r, n0 + c, v);
        }
    }
    let chol = SkylineChol::factor(&coo.to_csr())
        .map_err(|e| Error::NotSpd(format!("monolithic system: {}", e)))?;
    let b: Vec<f64> = sys.b0.iter().chain(&sys.b1).copied().collect();
    let x = chol.solve(&b);
    Ok(Solution { u0: x[..n0].to_vec(), u1: x[n0..].to_vec(), pcg: None })
}
