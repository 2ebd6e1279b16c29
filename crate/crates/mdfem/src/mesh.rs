//! Interface-fitted triangulation and nested regular refinement.
//!
//! The initial mesh is a constrained Delaunay triangulation (via `spade`)
//! whose constraint set contains every interface piece, pre-split into
//! chains of edges no longer than the target mesh size. All further meshes
//! come from regular (red) refinement so the hierarchy is nested.

use std::collections::HashMap;
use std::sync::Arc;

use spade::{ConstrainedDelaunayTriangulation, Triangulation as _};

use crate::geometry::{EdgeKind, MixedDomain, Point};
use crate::{Error, Result};

/// Conforming triangulation fitted to the interfaces.
#[derive(Debug, Clone)]
pub struct FittedMesh {
    pub vertices: Vec<Point>,
    /// Vertex index triples, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Bulk region tag per triangle.
    pub tri_region: Vec<usize>,
    /// Mesh edges lying on interfaces.
    pub interface_edges: Vec<[usize; 2]>,
    /// Interface segment tag (J) per interface edge.
    pub edge_segment: Vec<usize>,
    pub is_boundary_vertex: Vec<bool>,
    /// Max edge length.
    pub h: f64,
    pub min_angle_deg: f64,
    pub parent: Option<Arc<FittedMesh>>,
    /// Child triangle -> parent triangle (empty for a root mesh).
    pub tri_parent: Vec<usize>,
    /// Child interface edge -> parent interface edge.
    pub iface_edge_parent: Vec<usize>,
    /// Parent vertices keep their indices; children append new ones.
    pub n_parent_vertices: usize,
}

fn tri_angles(a: Point, b: Point, c: Point) -> [f64; 3] {
    let la = (c - b).norm();
    let lb = (a - c).norm();
    let lc = (b - a).norm();
    let angle = |opp: f64, s1: f64, s2: f64| {
        (((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0)).acos()
    };
    [angle(la, lb, lc), angle(lb, lc, la), angle(lc, la, lb)]
}

fn tri_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// Build the interface-fitted triangulation with target mesh size `h_target`.
pub fn triangulate(domain: &MixedDomain, h_target: f64) -> Result<FittedMesh> {
    triangulate_with(domain, h_target, 20.0)
}

pub fn triangulate_with(
    domain: &MixedDomain,
    h_target: f64,
    min_angle_deg: f64,
) -> Result<FittedMesh> {
    assert!(h_target > 0.0);
    domain.check_clearance()?;

    // pre-split every arrangement edge into pieces of length <= h_target
    let mut cdt: ConstrainedDelaunayTriangulation<spade::Point2<f64>> = Default::default();
    let mut handle_of: HashMap<(u64, u64), spade::handles::FixedVertexHandle> = HashMap::new();
    let key = |p: Point| (p.x.to_bits(), p.y.to_bits());
    let mut insert = |cdt: &mut ConstrainedDelaunayTriangulation<spade::Point2<f64>>,
                      p: Point|
     -> Result<spade::handles::FixedVertexHandle> {
        if let Some(&h) = handle_of.get(&key(p)) {
            return Ok(h);
        }
        let h = cdt
            .insert(spade::Point2::new(p.x, p.y))
            .map_err(|e| Error::Meshing(format!("vertex insertion failed: {:?}", e)))?;
        handle_of.insert(key(p), h);
        Ok(h)
    };
    for edge in &domain.edges {
        let a = domain.points[edge.a];
        let b = domain.points[edge.b];
        let len = (b - a).norm();
        let pieces = (len / h_target).ceil().max(1.0) as usize;
        let mut prev = insert(&mut cdt, a)?;
        for k in 1..=pieces {
            let t = k as f64 / pieces as f64;
            let p = if k == pieces { b } else { Point::from(a.coords + (b - a) * t) };
            let cur = insert(&mut cdt, p)?;
            if prev != cur {
                cdt.add_constraint(prev, cur);
            }
            prev = cur;
        }
    }

    let params = spade::RefinementParameters::<f64>::new()
        .with_angle_limit(spade::AngleLimit::from_deg(min_angle_deg))
        .with_max_allowed_area(0.5 * h_target * h_target)
        .keep_constraint_edges();
    cdt.refine(params);

    // extract vertices / triangles
    let vertices: Vec<Point> =
        cdt.vertices().map(|v| Point::new(v.position().x, v.position().y)).collect();
    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(cdt.num_inner_faces());
    for f in cdt.inner_faces() {
        let [a, b, c] = f.vertices().map(|v| v.fix().index());
        if tri_area(vertices[a], vertices[b], vertices[c]) > 0.0 {
            triangles.push([a, b, c]);
        } else {
            triangles.push([a, c, b]);
        }
    }

    // classify constraint edges: boundary vs interface (+ segment tag)
    let tol = domain.snap_tol.max(1e-12);
    let poly = &domain.polygon;
    let n_poly = poly.len();
    let dist_to_boundary = |p: Point| -> f64 {
        (0..n_poly)
            .map(|i| {
                let a = poly[i];
                let b = poly[(i + 1) % n_poly];
                let ab = b - a;
                let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                (p - (a + ab * t)).norm()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let iface_arr: Vec<(usize, Point, Point)> = domain
        .edges
        .iter()
        .filter_map(|e| match e.kind {
            EdgeKind::Interface(j) => Some((j, domain.points[e.a], domain.points[e.b])),
            EdgeKind::Boundary => None,
        })
        .collect();
    let mut interface_edges = Vec::new();
    let mut edge_segment = Vec::new();
    for e in cdt.undirected_edges() {
        if !e.is_constraint_edge() {
            continue;
        }
        let [va, vb] = e.vertices().map(|v| v.fix().index());
        let mid = Point::from((vertices[va].coords + vertices[vb].coords) * 0.5);
        if dist_to_boundary(mid) <= tol {
            continue;
        }
        let seg = iface_arr
            .iter()
            .find(|(_, a, b)| {
                let ab = b - a;
                let t = (mid - a).dot(&ab) / ab.norm_squared();
                t >= -1e-9 && t <= 1.0 + 1e-9 && (mid - (a + ab * t)).norm() <= tol
            })
            .map(|&(j, _, _)| j);
        match seg {
            Some(j) => {
                interface_edges.push([va, vb]);
                edge_segment.push(j);
            }
            None => {
                return Err(Error::Meshing(format!(
                    "constraint edge near ({}, {}) matches no interface",
                    mid.x, mid.y
                )))
            }
        }
    }

    let is_boundary_vertex: Vec<bool> =
        vertices.iter().map(|&p| dist_to_boundary(p) <= tol).collect();

    let mut mesh = FittedMesh {
        vertices,
        triangles,
        tri_region: Vec::new(),
        interface_edges,
        edge_segment,
        is_boundary_vertex,
        h: 0.0,
        min_angle_deg: 0.0,
        parent: None,
        tri_parent: Vec::new(),
        iface_edge_parent: Vec::new(),
        n_parent_vertices: 0,
    };
    mesh.tag_regions(domain)?;
    mesh.update_quality();
    mesh.verify_fitted(domain)?;
    Ok(mesh)
}

impl FittedMesh {
    fn update_quality(&mut self) {
        let mut h: f64 = 0.0;
        let mut min_angle = f64::INFINITY;
        for t in &self.triangles {
            let [a, b, c] = [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]];
            for (p, q) in [(a, b), (b, c), (c, a)] {
                h = h.max((q - p).norm());
            }
            for ang in tri_angles(a, b, c) {
                min_angle = min_angle.min(ang);
            }
        }
        self.h = h;
        self.min_angle_deg = min_angle.to_degrees();
    }

    /// Flood fill across non-interface edges; one region per connected
    /// component of triangles, identified by locating a barycenter.
    fn tag_regions(&mut self, domain: &MixedDomain) -> Result<()> {
        let iface_set: std::collections::HashSet<(usize, usize)> = self
            .interface_edges
            .iter()
            .map(|&[a, b]| (a.min(b), a.max(b)))
            .collect();
        let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_tris.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut region = vec![usize::MAX; self.triangles.len()];
        for start in 0..self.triangles.len() {
            if region[start] != usize::MAX {
                continue;
            }
            let tri = self.triangles[start];
            let bary = Point::from(
                (self.vertices[tri[0]].coords
                    + self.vertices[tri[1]].coords
                    + self.vertices[tri[2]].coords)
                    / 3.0,
            );
            let r = domain.locate_region(bary).ok_or_else(|| {
                Error::Meshing(format!("triangle barycenter ({}, {}) in no region", bary.x, bary.y))
            })?;
            let mut stack = vec![start];
            region[start] = r;
            while let Some(t) = stack.pop() {
                let tri = self.triangles[t];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    let e = (a.min(b), a.max(b));
                    if iface_set.contains(&e) {
                        continue;
                    }
                    for &n in &edge_tris[&e] {
                        if region[n] == usize::MAX {
                            region[n] = r;
                            stack.push(n);
                        }
                    }
                }
            }
        }
        self.tri_region = region;
        Ok(())
    }

    /// Every interface segment must be covered exactly by its tagged edges.
    fn verify_fitted(&self, domain: &MixedDomain) -> Result<()> {
        let mut covered = vec![0.0f64; domain.interface_segments.len()];
        for (e, &[a, b]) in self.interface_edges.iter().enumerate() {
            covered[self.edge_segment[e]] += (self.vertices[b] - self.vertices[a]).norm();
        }
        for (j, seg) in domain.interface_segments.iter().enumerate() {
            if (covered[j] - seg.length).abs() > 1e-9 * seg.length.max(1.0) {
                return Err(Error::Meshing(format!(
                    "interface {} covered length {} != {}",
                    j, covered[j], seg.length
                )));
            }
        }
        Ok(())
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        tri_area(a, b, c)
    }

    /// Sum of triangle areas per region.
    pub fn region_areas(&self, n_regions: usize) -> Vec<f64> {
        let mut areas = vec![0.0; n_regions];
        for t in 0..self.triangles.len() {
            areas[self.tri_region[t]] += self.triangle_area(t);
        }
        areas
    }

    /// Mesh edges with only one adjacent triangle (the domain boundary).
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut out: Vec<(usize, usize)> =
            count.into_iter().filter(|&(_, c)| c == 1).map(|(e, _)| e).collect();
        out.sort_unstable();
        out
    }

    /// Regular (red) refinement: every edge is bisected, every triangle is
    /// split into four similar children. The parent's vertices keep their
    /// indices, so coarse functions prolong exactly.
    pub fn refine(parent: &Arc<FittedMesh>) -> FittedMesh {
        let mut vertices = parent.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            let e = (a.min(b), a.max(b));
            *midpoint.entry(e).or_insert_with(|| {
                let p = Point::from((vertices[e.0].coords + vertices[e.1].coords) * 0.5);
                vertices.push(p);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(parent.triangles.len() * 4);
        let mut tri_region = Vec::with_capacity(parent.triangles.len() * 4);
        let mut tri_parent = Vec::with_capacity(parent.triangles.len() * 4);
        for (t, &[a, b, c]) in parent.triangles.iter().enumerate() {
            let mab = mid(a, b, &mut vertices);
            let mbc = mid(b, c, &mut vertices);
            let mca = mid(c, a, &mut vertices);
            for child in [[a, mab, mca], [b, mbc, mab], [c, mca, mbc], [mab, mbc, mca]] {
                triangles.push(child);
                tri_region.push(parent.tri_region[t]);
                tri_parent.push(t);
            }
        }
        let mut interface_edges = Vec::with_capacity(parent.interface_edges.len() * 2);
        let mut edge_segment = Vec::with_capacity(parent.interface_edges.len() * 2);
        let mut iface_edge_parent = Vec::with_capacity(parent.interface_edges.len() * 2);
        for (e, &[a, b]) in parent.interface_edges.iter().enumerate() {
            let m = mid(a, b, &mut vertices);
            for child in [[a, m], [m, b]] {
                interface_edges.push(child);
                edge_segment.push(parent.edge_segment[e]);
                iface_edge_parent.push(e);
            }
        }
        let mut mesh = FittedMesh {
            vertices,
            triangles,
            tri_region,
            interface_edges,
            edge_segment,
            is_boundary_vertex: Vec::new(),
            h: 0.0,
            min_angle_deg: 0.0,
            parent: Some(Arc::clone(parent)),
            tri_parent,
            iface_edge_parent,
            n_parent_vertices: parent.vertices.len(),
        };
        let mut flags = vec![false; mesh.vertices.len()];
        for (a, b) in mesh.boundary_edges() {
            flags[a] = true;
            flags[b] = true;
        }
        mesh.is_boundary_vertex = flags;
        mesh.update_quality();
        mesh
    }
}
