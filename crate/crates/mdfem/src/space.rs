//! Finite element spaces on a fitted mesh.
//!
//! Bulk degrees of freedom are duplicated across interfaces: every vertex
//! carries one dof per *triangle fan*, a maximal group of incident triangles
//! connected through edges at the vertex that do not lie on an interface.
//! Interior vertices have one fan, vertices inside an interface have two,
//! a junction of m interface edges has m, and a free slit tip has one.
//! The interface space is continuous: one dof per vertex touched by an
//! interface edge, shared across junctions.

use std::collections::HashMap;
use std::sync::Arc;

use crate::mesh::FittedMesh;
use crate::sparse::{Coo, Csr};
use crate::{Error, Result};

/// One side of an interface edge, as seen from an adjacent bulk triangle.
#[derive(Debug, Clone, Copy)]
pub struct TraceSide {
    pub edge: usize,
    pub segment: usize,
    pub region: usize,
    /// Bulk dofs at the edge endpoints, on this side.
    pub bulk: [usize; 2],
    /// Interface dofs at the edge endpoints.
    pub iface: [usize; 2],
    /// Edge length.
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub mesh: Arc<FittedMesh>,
    /// Bulk dof per triangle corner.
    pub tri_dof: Vec<[usize; 3]>,
    /// Vertex of each bulk dof.
    pub bulk_vertex: Vec<usize>,
    /// Region of each bulk dof's fan.
    pub bulk_region: Vec<usize>,
    /// Vertex of each interface dof.
    pub iface_vertex: Vec<usize>,
    /// Interface dof at a vertex, if any.
    pub iface_dof_of_vertex: Vec<Option<usize>>,
    pub trace_sides: Vec<TraceSide>,
    /// Dirichlet-constrained dofs (homogeneous boundary on the polygon).
    pub bulk_fixed: Vec<bool>,
    pub iface_fixed: Vec<bool>,
    /// Dof -> free index (usize::MAX if fixed).
    pub bulk_free: Vec<usize>,
    pub iface_free: Vec<usize>,
    pub n_bulk_free: usize,
    pub n_iface_free: usize,
}

impl DofMap {
    pub fn n_bulk(&self) -> usize {
        self.bulk_vertex.len()
    }

    pub fn n_iface(&self) -> usize {
        self.iface_vertex.len()
    }

    pub fn build(mesh: &Arc<FittedMesh>) -> Result<DofMap> {
        let nv = mesh.vertices.len();
        let iface_edge_set: HashMap<(usize, usize), usize> = mesh
            .interface_edges
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| ((a.min(b), a.max(b)), e))
            .collect();

        // incident (triangle, corner) per vertex
        let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for k in 0..3 {
                incident[tri[k]].push((t, k));
            }
        }

        // fans: connect incident triangles across shared non-interface edges
        let mut tri_dof = vec![[usize::MAX; 3]; mesh.triangles.len()];
        let mut bulk_vertex = Vec::new();
        let mut bulk_region = Vec::new();
        for v in 0..nv {
            let tris = &incident[v];
            // other-edge -> local positions, to pair triangles sharing it
            let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
            for (i, &(t, k)) in tris.iter().enumerate() {
                let tri = mesh.triangles[t];
                for other in [tri[(k + 1) % 3], tri[(k + 2) % 3]] {
                    let e = (v.min(other), v.max(other));
                    if !iface_edge_set.contains_key(&e) {
                        by_edge.entry(e).or_default().push(i);
                    }
                }
            }
            let mut comp = vec![usize::MAX; tris.len()];
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); tris.len()];
            for (_, ids) in &by_edge {
                if ids.len() == 2 {
                    adj[ids[0]].push(ids[1]);
                    adj[ids[1]].push(ids[0]);
                }
            }
            for start in 0..tris.len() {
                if comp[start] != usize::MAX {
                    continue;
                }
                let dof = bulk_vertex.len();
                bulk_vertex.push(v);
                bulk_region.push(mesh.tri_region[tris[start].0]);
                let mut stack = vec![start];
                comp[start] = dof;
                while let Some(i) = stack.pop() {
                    let (t, k) = tris[i];
                    tri_dof[t][k] = dof;
                    debug_assert_eq!(mesh.tri_region[t], bulk_region[dof]);
                    for &n in &adj[i] {
                        if comp[n] == usize::MAX {
                            comp[n] = dof;
                            stack.push(n);
                        }
                    }
                }
            }
        }

        // interface dofs: one per vertex on an interface, continuous
        let mut iface_dof_of_vertex = vec![None; nv];
        let mut iface_vertex = Vec::new();
        for &[a, b] in &mesh.interface_edges {
            for v in [a, b] {
                if iface_dof_of_vertex[v].is_none() {
                    iface_dof_of_vertex[v] = Some(iface_vertex.len());
                    iface_vertex.push(v);
                }
            }
        }

        // trace sides: each interface edge seen from each adjacent triangle
        let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_tris.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut trace_sides = Vec::new();
        for (e, &[a, b]) in mesh.interface_edges.iter().enumerate() {
            let key = (a.min(b), a.max(b));
            let tris = edge_tris.get(&key).ok_or_else(|| {
                Error::Meshing(format!("interface edge {} not in any triangle", e))
            })?;
            if tris.len() != 2 {
                return Err(Error::Meshing(format!(
                    "interface edge {} has {} adjacent triangles",
                    e,
                    tris.len()
                )));
            }
            let length = (mesh.vertices[b] - mesh.vertices[a]).norm();
            for &t in tris {
                let tri = mesh.triangles[t];
                let ka = tri.iter().position(|&v| v == a).unwrap();
                let kb = tri.iter().position(|&v| v == b).unwrap();
                trace_sides.push(TraceSide {
                    edge: e,
                    segment: mesh.edge_segment[e],
                    region: mesh.tri_region[t],
                    bulk: [tri_dof[t][ka], tri_dof[t][kb]],
                    iface: [
                        iface_dof_of_vertex[a].unwrap(),
                        iface_dof_of_vertex[b].unwrap(),
                    ],
                    length,
                });
            }
        }

        // homogeneous Dirichlet on the polygon boundary, for both spaces
        let bulk_fixed: Vec<bool> =
            bulk_vertex.iter().map(|&v| mesh.is_boundary_vertex[v]).collect();
        let iface_fixed: Vec<bool> =
            iface_vertex.iter().map(|&v| mesh.is_boundary_vertex[v]).collect();
        let number = |fixed: &[bool]| {
            let mut free = vec![usize::MAX; fixed.len()];
            let mut n = 0;
            for (d, &fx) in fixed.iter().enumerate() {
                if !fx {
                    free[d] = n;
                    n += 1;
                }
            }
            (free, n)
        };
        let (bulk_free, n_bulk_free) = number(&bulk_fixed);
        let (iface_free, n_iface_free) = number(&iface_fixed);

        Ok(DofMap {
            mesh: Arc::clone(mesh),
            tri_dof,
            bulk_vertex,
            bulk_region,
            iface_vertex,
            iface_dof_of_vertex,
            trace_sides,
            bulk_fixed,
            iface_fixed,
            bulk_free,
            iface_free,
            n_bulk_free,
            n_iface_free,
        })
    }

    /// Nodal interpolation onto all bulk dofs; `f(region, x, y)`.
    pub fn interpolate_bulk(&self, f: impl Fn(usize, f64, f64) -> f64) -> Vec<f64> {
        self.bulk_vertex
            .iter()
            .zip(&self.bulk_region)
            .map(|(&v, &r)| {
                let p = self.mesh.vertices[v];
                f(r, p.x, p.y)
            })
            .collect()
    }

    /// Nodal interpolation onto all interface dofs.
    pub fn interpolate_iface(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.iface_vertex
            .iter()
            .map(|&v| {
                let p = self.mesh.vertices[v];
                f(p.x, p.y)
            })
            .collect()
    }
}

/// Prolongation matrices (all dofs, fine x coarse) between a mesh and its
/// regular refinement. Exact because the refinement is nested.
pub fn prolongation(coarse: &DofMap, fine: &DofMap) -> Result<(Csr, Csr)> {
    let cm = &coarse.mesh;
    let fm = &fine.mesh;
    if fm
        .parent
        .as_deref()
        .map_or(true, |p| !std::ptr::eq(p as *const FittedMesh, &**cm as *const FittedMesh))
    {
        return Err(Error::Invalid(
            "prolongation requires the fine mesh to be a refinement of the coarse mesh".into(),
        ));
    }

    // bulk: evaluate the coarse function in the parent triangle of any fine
    // triangle of the dof's fan; this picks the correct side of an interface
    let mut p0 = Coo::new(fine.n_bulk(), coarse.n_bulk());
    let mut seen = vec![false; fine.n_bulk()];
    for (t, tri) in fm.triangles.iter().enumerate() {
        let pt = fm.tri_parent[t];
        let ctri = cm.triangles[pt];
        let [pa, pb, pc] = ctri.map(|v| cm.vertices[v]);
        let area = {
            let d1 = pb - pa;
            let d2 = pc - pa;
            d1.x * d2.y - d1.y * d2.x
        };
        for k in 0..3 {
            let fd = fine.tri_dof[t][k];
            if seen[fd] {
                continue;
            }
            seen[fd] = true;
            let p = fm.vertices[tri[k]];
            let w0 = ((pb - p).x * (pc - p).y - (pb - p).y * (pc - p).x) / area;
            let w1 = ((pc - p).x * (pa - p).y - (pc - p).y * (pa - p).x) / area;
            let w2 = 1.0 - w0 - w1;
            for (w, cv) in [(w0, 0), (w1, 1), (w2, 2)] {
                if w.abs() > 1e-12 {
                    p0.push(fd, coarse.tri_dof[pt][cv], w);
                }
            }
        }
    }

    // interface: parent vertices copy, edge midpoints average the endpoints
    let mut p1 = Coo::new(fine.n_iface(), coarse.n_iface());
    let mut done = vec![false; fine.n_iface()];
    for v in 0..fm.n_parent_vertices.min(fm.vertices.len()) {
        if let (Some(fd), Some(cd)) =
            (fine.iface_dof_of_vertex[v], coarse.iface_dof_of_vertex[v])
        {
            p1.push(fd, cd, 1.0);
            done[fd] = true;
        }
    }
    for (fe, &pe) in fm.iface_edge_parent.iter().enumerate() {
        let [ca, cb] = cm.interface_edges[pe];
        let [fa, fb] = fm.interface_edges[fe];
        for fv in [fa, fb] {
            if fv < fm.n_parent_vertices {
                continue;
            }
            let fd = fine.iface_dof_of_vertex[fv].unwrap();
            if !done[fd] {
                done[fd] = true;
                p1.push(fd, coarse.iface_dof_of_vertex[ca].unwrap(), 0.5);
                p1.push(fd, coarse.iface_dof_of_vertex[cb].unwrap(), 0.5);
            }
        }
    }
    Ok((p0.to_csr(), p1.to_csr()))
}
