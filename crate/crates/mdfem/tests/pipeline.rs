//! Whole-library pipeline: arrangement -> mesh -> spaces -> assembly ->
//! Schur reduction with the two-level preconditioner, cross-checked against
//! the monolithic direct solve.

use std::sync::Arc;

use mdfem::assembly::{assemble, Coefficients};
use mdfem::geometry::{build_arrangement, unit_square};
use mdfem::mesh::{triangulate, FittedMesh};
use mdfem::precond::build_preconditioner;
use mdfem::solver::{monolithic_solve, solve_schur_pcg, SchurOperator};
use mdfem::space::DofMap;
use mdfem::Segment2D;

fn peak(_: usize, x: f64, y: f64) -> f64 {
    (-10.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt()).exp()
}

#[test]
fn full_pipeline_matches_direct_solve() {
    // two chords and a finite slit crossing one of them
    let segs = [
        Segment2D::new(0.35, 0.0, 0.35, 1.0),
        Segment2D::new(0.0, 0.6, 1.0, 0.6),
        Segment2D::new(0.2, 0.2, 0.55, 0.45),
    ];
    let domain = build_arrangement(unit_square(), &segs, 1e-9).unwrap();
    assert!(domain.bulk_regions.len() >= 4);
    assert_eq!(domain.free_tips.len(), 2);

    let mesh = Arc::new(triangulate(&domain, 0.08).unwrap());
    let dofs = Arc::new(DofMap::build(&mesh).unwrap());
    let coeffs = Coefficients::constant(
        domain.bulk_regions.len(),
        domain.interface_segments.len(),
        1.0,
        1.0,
        10.0,
    );
    let sys = assemble(&dofs, &coeffs, &peak, &peak, None).unwrap();

    let op = SchurOperator::new(&sys).unwrap();
    let pre = build_preconditioner(&op, &dofs, 0.25).unwrap();
    let iterative =
        solve_schur_pcg(&sys, Some(&|r: &[f64]| pre.apply(r)), 1e-12, 10_000).unwrap();
    let direct = monolithic_solve(&sys).unwrap();

    let d0: Vec<f64> = iterative.u0.iter().zip(&direct.u0).map(|(a, b)| a - b).collect();
    let d1: Vec<f64> = iterative.u1.iter().zip(&direct.u1).map(|(a, b)| a - b).collect();
    let diff = sys.energy(&d0, &d1).max(0.0).sqrt();
    let scale = sys.energy(&direct.u0, &direct.u1).sqrt();
    assert!(diff <= 1e-9 * scale.max(1.0), "energy diff {} (scale {})", diff, scale);
    assert!(iterative.pcg.unwrap().converged);
}

#[test]
fn refinement_reduces_the_residual_against_a_finer_solve() {
    let segs = [Segment2D::new(0.5, 0.0, 0.5, 1.0)];
    let domain = build_arrangement(unit_square(), &segs, 1e-9).unwrap();
    let coeffs = Coefficients::constant(
        domain.bulk_regions.len(),
        domain.interface_segments.len(),
        1.0,
        1.0,
        1.0,
    );

    let m0 = Arc::new(triangulate(&domain, 0.3).unwrap());
    let m1 = Arc::new(FittedMesh::refine(&m0));
    let m2 = Arc::new(FittedMesh::refine(&m1));
    let mut at_center = Vec::new();
    for m in [&m0, &m1, &m2] {
        let dofs = Arc::new(DofMap::build(m).unwrap());
        let sys = assemble(&dofs, &coeffs, &peak, &peak, None).unwrap();
        let sol = monolithic_solve(&sys).unwrap();
        // value at the bulk dof nearest the domain center
        let (mut best, mut val) = (f64::INFINITY, 0.0);
        for (d, &f) in dofs.bulk_free.iter().enumerate() {
            if f == usize::MAX {
                continue;
            }
            let p = m.vertices[dofs.bulk_vertex[d]];
            let dist = (p.x - 0.25).hypot(p.y - 0.5);
            if dist < best {
                best = dist;
                val = sol.u0[f];
            }
        }
        at_center.push(val);
    }
    // successive refinements move the sampled value monotonically closer to
    // the finest one, i.e. the hierarchy actually converges somewhere
    let target = at_center[2];
    assert!((at_center[1] - target).abs() < (at_center[0] - target).abs());
}
