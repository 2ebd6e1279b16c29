//! Key-value diagnostic report: interface-graph constants, spectral
//! equivalence, coercivity walk and corner exponents.

use std::fmt::Write as _;

use mdfem::analysis::{
    coercivity_walk, poincare_constant, region_corners, singular_exponents, InterfaceGraph,
    Poincare,
};
use mdfem::solver::SchurOperator;

use crate::config::ExperimentConfig;
use crate::experiments::{build_problem, CliResult};

pub fn run_diagnose(cfg: &ExperimentConfig) -> CliResult<String> {
    cfg.validate()?;
    let prob = build_problem(cfg)?;
    let d = &prob.domain;
    let mut s = String::new();
    writeln!(s, "regions = {}", d.bulk_regions.len())?;
    writeln!(s, "segments = {}", d.interface_segments.len())?;
    writeln!(s, "junctions = {}", d.junction_points.len())?;
    writeln!(s, "free_tips = {}", d.free_tips.len())?;
    writeln!(s, "mesh_h = {}", prob.mesh.h)?;
    writeln!(s, "mesh_min_angle_deg = {}", prob.mesh.min_angle_deg)?;
    writeln!(s, "bulk_dofs_free = {}", prob.dofs.n_bulk_free)?;
    writeln!(s, "iface_dofs_free = {}", prob.dofs.n_iface_free)?;

    let g = InterfaceGraph::from_dofs(&prob.dofs);
    match poincare_constant(&g)? {
        Poincare::Finite(dd) => writeln!(s, "poincare_D = {}", dd)?,
        Poincare::Infinite { component } => {
            writeln!(s, "poincare_D = inf (floating component {:?})", component)?
        }
    }

    let op = SchurOperator::new(&prob.sys)?;
    match mdfem::analysis::spectral_equivalence(&op, &prob.dofs, &prob.coeffs) {
        Ok(eq) => {
            writeln!(s, "spectral_c1 = {}", eq.c1)?;
            writeln!(s, "spectral_c2 = {}", eq.c2)?;
            writeln!(s, "spectral_bound = {}", eq.bound)?;
        }
        Err(e) => writeln!(s, "spectral_equivalence = skipped ({})", e)?,
    }

    match coercivity_walk(d) {
        Ok(walk) => writeln!(s, "coercivity_walk_n = {}", walk.n)?,
        Err(unreachable) => {
            writeln!(s, "coercivity_walk = unreachable segments {:?}", unreachable)?
        }
    }

    let mut worst: Option<f64> = None;
    for region in 0..d.bulk_regions.len() {
        for (omega, kind) in region_corners(d, region) {
            let Some(kind) = kind else { continue };
            if let Ok(exp) = singular_exponents(omega, kind) {
                if let Some(&lam) = exp.lambdas.first() {
                    worst = Some(worst.map_or(lam, |w: f64| w.min(lam)));
                }
            }
        }
    }
    match worst {
        Some(lam) => {
            writeln!(s, "min_singular_exponent = {}", lam)?;
            writeln!(s, "sobolev_index = {}", (1.0 + lam).min(2.0))?;
        }
        None => writeln!(s, "sobolev_index = 2 (no singular corners)")?,
    }
    Ok(s)
}
