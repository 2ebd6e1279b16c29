//! Theory-facing diagnostics: interface graph Laplacian and mass matrix,
//! Poincaré constant, spectral equivalence of the Schur complement with the
//! graph Laplacian, coercivity-walk connectivity, and corner singular
//! exponents.

use nalgebra::{Cholesky, DMatrix};

use crate::assembly::Coefficients;
use crate::geometry::{EdgeKind, MixedDomain};
use crate::solver::{SchurOperator, DEFAULT_SCHUR_CAP};
use crate::space::DofMap;
use crate::sparse::{Coo, Csr, SkylineChol};
use crate::{Error, Result};

/// Graph of the interface mesh: one node per interface dof, one weighted
/// edge per interface mesh edge.
#[derive(Debug, Clone)]
pub struct InterfaceGraph {
    pub n_nodes: usize,
    /// (node, node, length), lengths positive.
    pub edges: Vec<(usize, usize, f64)>,
    /// Dirichlet mask per node.
    pub fixed: Vec<bool>,
    /// Node -> free index (usize::MAX if fixed); matches `DofMap::iface_free`.
    pub free: Vec<usize>,
    pub n_free: usize,
}

impl InterfaceGraph {
    pub fn from_dofs(dofs: &DofMap) -> InterfaceGraph {
        let mesh = &dofs.mesh;
        let edges = mesh
            .interface_edges
            .iter()
            .map(|&[a, b]| {
                let len = (mesh.vertices[b] - mesh.vertices[a]).norm();
                (
                    dofs.iface_dof_of_vertex[a].unwrap(),
                    dofs.iface_dof_of_vertex[b].unwrap(),
                    len,
                )
            })
            .collect();
        InterfaceGraph {
            n_nodes: dofs.n_iface(),
            edges,
            fixed: dofs.iface_fixed.clone(),
            free: dofs.iface_free.clone(),
            n_free: dofs.n_iface_free,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|&(_, _, l)| l).sum()
    }
}

/// Weighted graph Laplacian on the free nodes: the quadratic form is
/// (Lv, v) = 1/2 * sum over ordered node pairs of (v(x) - v(y))^2 / |x - y|.
/// Dirichlet rows and columns are eliminated.
pub fn graph_laplacian(g: &InterfaceGraph) -> Csr {
    let mut coo = Coo::new(g.n_free, g.n_free);
    for &(a, b, len) in &g.edges {
        let w = 1.0 / len;
        let (fa, fb) = (g.free[a], g.free[b]);
        if fa != usize::MAX {
            coo.push(fa, fa, w);
        }
        if fb != usize::MAX {
            coo.push(fb, fb, w);
        }
        if fa != usize::MAX && fb != usize::MAX {
            coo.push(fa, fb, -w);
            coo.push(fb, fa, -w);
        }
    }
    coo.to_csr()
}

/// Diagonal mass matrix on the free nodes: entry at x is
/// 1/2 * sum of the lengths of the edges meeting x.
pub fn mass_matrix(g: &InterfaceGraph) -> Vec<f64> {
    let mut m = vec![0.0; g.n_free];
    for &(a, b, len) in &g.edges {
        for n in [a, b] {
            let f = g.free[n];
            if f != usize::MAX {
                m[f] += 0.5 * len;
            }
        }
    }
    m
}

/// Result of the Poincaré-constant computation.
#[derive(Debug, Clone)]
pub enum Poincare {
    Finite(f64),
    /// A connected component of free nodes touches no Dirichlet node, so
    /// constants make v'Mv / v'Lv unbounded.
    Infinite { component: Vec<usize> },
}

/// Largest generalized eigenvalue D of (M, L): v'Mv <= D v'Lv for all v.
/// Power iteration on L^{-1} M with direct L-solves, relative tolerance 1e-6.
pub fn poincare_constant(g: &InterfaceGraph) -> Result<Poincare> {
    if g.n_free == 0 {
        return Err(Error::EmptySystem);
    }
    // a free component with no fixed neighbour carries the constant vector
    if let Some(component) = floating_component(g) {
        return Ok(Poincare::Infinite { component });
    }
    let l = graph_laplacian(g);
    let m = mass_matrix(g);
    let chol = SkylineChol::factor(&l)
        .map_err(|e| Error::NotSpd(format!("interface graph Laplacian: {}", e)))?;
    let n = g.n_free;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618).sin()).collect();
    let mut d_old = 0.0;
    for _ in 0..100_000 {
        let mv: Vec<f64> = v.iter().zip(&m).map(|(a, b)| a * b).collect();
        let w = chol.solve(&mv);
        // Rayleigh quotient d = v'Mv / v'Lv at the new iterate
        let wm: f64 = w.iter().zip(&m).map(|(a, b)| a * a * b).sum();
        let wl: f64 = l.quad_form(&w, &w);
        let d = wm / wl;
        let norm = wm.sqrt();
        v = w.iter().map(|x| x / norm).collect();
        if (d - d_old).abs() <= 1e-6 * d.abs() {
            return Ok(Poincare::Finite(d));
        }
        d_old = d;
    }
    Ok(Poincare::Finite(d_old))
}

fn floating_component(g: &InterfaceGraph) -> Option<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); g.n_nodes];
    for &(a, b, _) in &g.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; g.n_nodes];
    for start in 0..g.n_nodes {
        if seen[start] || g.fixed[start] {
            continue;
        }
        let mut comp = vec![start];
        let mut stack = vec![start];
        seen[start] = true;
        let mut anchored = false;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if g.fixed[y] {
                    anchored = true;
                } else if !seen[y] {
                    seen[y] = true;
                    comp.push(y);
                    stack.push(y);
                }
            }
        }
        if !anchored {
            comp.sort_unstable();
            return Some(comp);
        }
    }
    None
}

/// Spectral equivalence constants of the two-sided bound
/// c1 v'Lv <= v'Sv <= c2 v'Lv, together with the analytic upper bound
/// amax + D * bmax.
#[derive(Debug, Clone)]
pub struct Equivalence {
    pub c1: f64,
    pub c2: f64,
    /// amax + D * bmax (infinite if D is).
    pub bound: f64,
    pub poincare: f64,
}

pub fn spectral_equivalence(
    op: &SchurOperator,
    dofs: &DofMap,
    coeffs: &Coefficients,
) -> Result<Equivalence> {
    let g = InterfaceGraph::from_dofs(dofs);
    let n = g.n_free;
    if n == 0 {
        return Err(Error::EmptySystem);
    }
    let s = op.assemble_dense(DEFAULT_SCHUR_CAP)?;
    let l_sparse = graph_laplacian(&g);
    let mut l = DMatrix::zeros(n, n);
    for r in 0..n {
        for (c, v) in l_sparse.row(r) {
            l[(r, c)] += v;
        }
    }
    // generalized eigenvalues of (S, L) via L = R R' and R^{-1} S R^{-T}
    let chol = Cholesky::new(l)
        .ok_or_else(|| Error::NotSpd("interface graph Laplacian is singular".into()))?;
    let linv_s = chol.l_dirty().clone().solve_lower_triangular(&s).ok_or_else(|| {
        Error::NotSpd("triangular solve failed in spectral equivalence".into())
    })?;
    let w = chol
        .l_dirty()
        .clone()
        .solve_lower_triangular(&linv_s.transpose())
        .ok_or_else(|| Error::NotSpd("triangular solve failed in spectral equivalence".into()))?;
    let w = 0.5 * (&w + w.transpose());
    let eig = w.symmetric_eigen();
    let c1 = eig.eigenvalues.min();
    let c2 = eig.eigenvalues.max();
    let (poincare, bound) = match poincare_constant(&g)? {
        Poincare::Finite(d) => (d, coeffs.alpha_max() + d * coeffs.beta_max()),
        Poincare::Infinite { .. } => (f64::INFINITY, f64::INFINITY),
    };
    Ok(Equivalence { c1, c2, bound, poincare })
}

/// Vertex of the bipartite region/segment adjacency graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GNode {
    Region(usize),
    Segment(usize),
}

/// A covering walk through the bipartite graph, ending at a region that
/// touches the domain boundary.
#[derive(Debug, Clone)]
pub struct Walk {
    pub steps: Vec<GNode>,
    /// Number of edges traversed; at most 2(|I| + |J|).
    pub n: usize,
}

/// BFS from the boundary-touching regions over G = (I, J, E0). Returns a
/// walk visiting every reachable vertex and ending at a boundary region,
/// or the list of unreachable interface segments.
pub fn coercivity_walk(d: &MixedDomain) -> std::result::Result<Walk, Vec<usize>> {
    let ni = d.bulk_regions.len();
    let nj = d.interface_segments.len();
    // adjacency over vertices 0..ni (regions) and ni..ni+nj (segments)
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); ni + nj];
    for &(i, j) in &d.e0 {
        adj[i].push(ni + j);
        adj[ni + j].push(i);
    }
    let roots = d.boundary_touching_regions();
    let mut parent = vec![usize::MAX; ni + nj];
    let mut order = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for &r in &roots {
        parent[r] = r;
        queue.push_back(r);
    }
    while let Some(x) = queue.pop_front() {
        order.push(x);
        for &y in &adj[x] {
            if parent[y] == usize::MAX {
                parent[y] = x;
                queue.push_back(y);
            }
        }
    }
    let unreachable: Vec<usize> =
        (0..nj).filter(|&j| parent[ni + j] == usize::MAX).collect();
    if !unreachable.is_empty() {
        return Err(unreachable);
    }
    // Euler tour of each BFS tree: down and back up every tree edge, so the
    // walk starts and ends at a boundary root and visits every vertex
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); ni + nj];
    for &x in &order {
        if parent[x] != x {
            children[parent[x]].push(x);
        }
    }
    // tours of multiple roots are concatenated; each starts and ends at its
    // own boundary region, so the combined walk still ends at one
    let mut steps = Vec::new();
    let mut n = 0;
    for &r in &roots {
        euler(r, &children, ni, &mut steps, &mut n);
    }
    Ok(Walk { steps, n })
}

fn node_of(x: usize, ni: usize) -> GNode {
    if x < ni {
        GNode::Region(x)
    } else {
        GNode::Segment(x - ni)
    }
}

fn euler(x: usize, children: &[Vec<usize>], ni: usize, steps: &mut Vec<GNode>, n: &mut usize) {
    steps.push(node_of(x, ni));
    for &c in &children[x] {
        *n += 1;
        euler(c, children, ni, steps, n);
        steps.push(node_of(x, ni));
        *n += 1;
    }
}

/// Corner type for the singular-exponent formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerKind {
    /// Both pieces meeting at the corner carry Dirichlet data (set S).
    Dirichlet,
    /// One Dirichlet and one Robin piece (set M).
    Mixed,
}

#[derive(Debug, Clone)]
pub struct Exponents {
    /// All lambda in the open interval (0, 1).
    pub lambdas: Vec<f64>,
    /// Predicted bulk Sobolev index min(2, 1 + min lambda); 2 if no lambda.
    pub sobolev_index: f64,
    /// Set when omega is at (or numerically at) the slit-tip limit 2*pi,
    /// which the corner enumeration excludes.
    pub tip_warning: bool,
}

/// Singular exponents lambda_{l} = l*pi/omega (Dirichlet corners) or
/// (l - 1/2)*pi/omega (mixed corners), restricted to (0, 1).
pub fn singular_exponents(omega: f64, kind: CornerKind) -> Result<Exponents> {
    if !(omega > 0.0 && omega <= 2.0 * std::f64::consts::PI) {
        return Err(Error::InadmissibleAngle { omega });
    }
    let ratio = omega / (2.0 * std::f64::consts::PI);
    let is_int = |x: f64| (x - x.round()).abs() < 1e-12;
    match kind {
        CornerKind::Dirichlet if is_int(ratio) => {
            return Err(Error::InadmissibleAngle { omega })
        }
        CornerKind::Mixed if is_int(ratio + 0.5) => {
            return Err(Error::InadmissibleAngle { omega })
        }
        _ => {}
    }
    let mut lambdas = Vec::new();
    let mut l = 1.0f64;
    loop {
        let lam = match kind {
            CornerKind::Dirichlet => l * std::f64::consts::PI / omega,
            CornerKind::Mixed => (l - 0.5) * std::f64::consts::PI / omega,
        };
        if lam >= 1.0 {
            break;
        }
        if lam > 0.0 {
            lambdas.push(lam);
        }
        l += 1.0;
    }
    let sobolev_index = match lambdas.first() {
        Some(&min) => (1.0 + min).min(2.0),
        None => 2.0,
    };
    let tip_warning = (omega - 2.0 * std::f64::consts::PI).abs() < 1e-9;
    Ok(Exponents { lambdas, sobolev_index, tip_warning })
}

/// Corner angles of a bulk region's outer loop with their Appendix-style
/// classification: Dirichlet-Dirichlet, mixed, or `None` when both incident
/// pieces are interfaces (outside the enumerated sets).
pub fn region_corners(d: &MixedDomain, region: usize) -> Vec<(f64, Option<CornerKind>)> {
    let loop_ = &d.bulk_regions[region].outer;
    let n = loop_.len();
    let kind_of = |a: usize, b: usize| -> EdgeKind {
        d.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map(|e| e.kind)
            .unwrap_or(EdgeKind::Boundary)
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let prev = loop_[(k + n - 1) % n];
        let cur = loop_[k];
        let next = loop_[(k + 1) % n];
        let u = d.points[cur] - d.points[prev];
        let v = d.points[next] - d.points[cur];
        let turn = v.y.atan2(v.x) - u.y.atan2(u.x);
        let turn = (turn + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
            - std::f64::consts::PI;
        let omega = std::f64::consts::PI - turn;
        let dirichlet_in = matches!(kind_of(prev, cur), EdgeKind::Boundary);
        let dirichlet_out = matches!(kind_of(cur, next), EdgeKind::Boundary);
        let kind = match (dirichlet_in, dirichlet_out) {
            (true, true) => Some(CornerKind::Dirichlet),
            (true, false) | (false, true) => Some(CornerKind::Mixed),
            (false, false) => None,
        };
        out.push((omega, kind));
    }
    out
}
