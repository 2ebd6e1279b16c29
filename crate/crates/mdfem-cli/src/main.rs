//! Command-line entry point for the mixed-dimensional solver experiments.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mdfem_cli::config::{AIfaceSpec, ExperimentConfig, GeometrySpec};
use mdfem_cli::diagnose::run_diagnose;
use mdfem_cli::experiments::{
    self, build_problem, expand_full, run_convergence, run_iteration_study, run_solve, CliResult,
};
use mdfem_cli::io;

/// Mixed-dimensional elliptic solver: meshing, solving and experiment
/// studies on a unit square with embedded line interfaces.
#[derive(Parser)]
#[command(name = "mdfem-cli", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Geometry: `chords:N`, `segments:N[,MAXLEN]`, or a segment file path.
    #[arg(long)]
    geometry: Option<String>,
    /// Seed for all random draws (geometry and uniform coefficients).
    #[arg(long)]
    seed: Option<u64>,
    /// Target mesh size (domain units).
    #[arg(long)]
    h: Option<f64>,
    /// Number of solved refinement levels in the convergence study.
    #[arg(long)]
    levels: Option<usize>,
    /// Coarse mesh size(s) H for the preconditioner (repeatable).
    #[arg(long = "H")]
    h_coarse: Vec<f64>,
    /// Interface coefficient: `const:v` or `uniform:a,b`.
    #[arg(long = "A-iface")]
    a_iface: Option<String>,
    /// Robin coupling coefficient(s) B (repeatable; studies sweep them).
    #[arg(long = "B")]
    b: Vec<f64>,
    /// PCG relative tolerance on the preconditioned residual norm.
    #[arg(long)]
    rtol: Option<f64>,
    /// Output directory (created if missing); default: current directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread count (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also record unpreconditioned CG iteration counts.
    #[arg(long)]
    unpreconditioned: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the arrangement and fitted mesh; write mesh and segment tables.
    Mesh(CommonArgs),
    /// Solve one problem (Schur reduction + preconditioned CG).
    Solve(CommonArgs),
    /// Convergence study over nested refinements against a finer reference.
    Convergence(CommonArgs),
    /// Preconditioner iteration-count study over H and B.
    Iterations(CommonArgs),
    /// Report interface-graph constants, spectral bounds and corner exponents.
    Diagnose(CommonArgs),
}

fn parse_geometry(s: &str) -> Result<GeometrySpec, String> {
    if let Some(rest) = s.strip_prefix("chords:") {
        let count = rest.parse().map_err(|e| format!("bad chord count: {}", e))?;
        return Ok(GeometrySpec::InfiniteChords { count });
    }
    if let Some(rest) = s.strip_prefix("segments:") {
        let (count, max_length) = match rest.split_once(',') {
            Some((c, m)) => (
                c.parse().map_err(|e| format!("bad segment count: {}", e))?,
                m.parse().map_err(|e| format!("bad max length: {}", e))?,
            ),
            None => (rest.parse().map_err(|e| format!("bad segment count: {}", e))?, 0.2),
        };
        return Ok(GeometrySpec::FiniteSegments { count, max_length });
    }
    Ok(GeometrySpec::File { path: PathBuf::from(s) })
}

fn resolve_config(args: &CommonArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_toml(&fs::read_to_string(path)?)?,
        None => {
            // all other fields take their documented defaults
            ExperimentConfig::from_toml("[geometry]\nkind = \"infinite_chords\"\ncount = 1\n")?
        }
    };
    if let Some(g) = &args.geometry {
        cfg.geometry = parse_geometry(g)?;
    } else if args.config.is_none() {
        return Err("either --config or --geometry is required".into());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(h) = args.h {
        cfg.h_target = h;
    }
    if let Some(levels) = args.levels {
        cfg.levels = levels;
    }
    if !args.h_coarse.is_empty() {
        cfg.h_coarse = args.h_coarse.clone();
    }
    if let Some(a) = &args.a_iface {
        cfg.a_iface = a.parse::<AIfaceSpec>()?;
    }
    if !args.b.is_empty() {
        cfg.b_values = args.b.clone();
    }
    if let Some(rtol) = args.rtol {
        cfg.rtol = rtol;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.clone());
    }
    if args.unpreconditioned {
        cfg.unpreconditioned = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run(args: &CommonArgs, command: &Command) -> CliResult<()> {
    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()?;
    }
    let cfg = resolve_config(args)?;
    match command {
        Command::Mesh(_) => {
            let dir = out_dir(&cfg)?;
            let segments = experiments::segments_from_config(&cfg)?;
            let prob = build_problem(&cfg)?;
            io::write_segments(&dir.join("segments.txt"), &segments)?;
            io::write_mesh(&dir.join("mesh.txt"), &prob.mesh)?;
            println!(
                "mesh: {} vertices, {} triangles, {} interface edges, h = {}, min angle = {:.2} deg",
                prob.mesh.vertices.len(),
                prob.mesh.triangles.len(),
                prob.mesh.interface_edges.len(),
                prob.mesh.h,
                prob.mesh.min_angle_deg
            );
            println!("wrote {} and {}", dir.join("segments.txt").display(), dir.join("mesh.txt").display());
        }
        Command::Solve(_) => {
            let dir = out_dir(&cfg)?;
            let (prob, sol) = run_solve(&cfg)?;
            let (u0, u1) = expand_full(&prob.dofs, &sol);
            let mut text = String::new();
            writeln!(text, "# bulk_dofs {} (columns: vertex region value)", u0.len())?;
            for (d, v) in u0.iter().enumerate() {
                writeln!(text, "{} {} {}", prob.dofs.bulk_vertex[d], prob.dofs.bulk_region[d], v)?;
            }
            writeln!(text, "# iface_dofs {} (columns: vertex value)", u1.len())?;
            for (d, v) in u1.iter().enumerate() {
                writeln!(text, "{} {}", prob.dofs.iface_vertex[d], v)?;
            }
            fs::write(dir.join("solution.txt"), text)?;
            if let Some(pcg) = &sol.pcg {
                io::write_residuals(&dir.join("residuals.csv"), pcg)?;
                println!(
                    "solved: {} PCG iterations, condition estimate {}",
                    pcg.iterations,
                    pcg.cond_estimate.map_or("n/a".into(), |k| format!("{:.3}", k))
                );
            } else {
                println!("solved directly (no interface unknowns)");
            }
            println!("wrote {}", dir.join("solution.txt").display());
        }
        Command::Convergence(_) => {
            let dir = out_dir(&cfg)?;
            let res = run_convergence(&cfg)?;
            fs::write(dir.join("convergence.csv"), res.to_csv())?;
            fs::write(
                dir.join("convergence.gp"),
                experiments::convergence_gnuplot("convergence.csv"),
            )?;
            for r in &res.rows {
                println!("level {}  h = {:.6}  energy error = {:.6e}", r.level, r.h, r.energy_error);
            }
            println!("fitted slope: {:.4}", res.slope);
            println!("wrote {} and convergence.gp", dir.join("convergence.csv").display());
        }
        Command::Iterations(_) => {
            let dir = out_dir(&cfg)?;
            let study = run_iteration_study(&cfg)?;
            fs::write(dir.join("iterations.csv"), study.to_csv())?;
            fs::write(
                dir.join("iterations.gp"),
                experiments::iterations_gnuplot("iterations.csv"),
            )?;
            print!("{}", study.to_csv());
            println!("wrote {} and iterations.gp", dir.join("iterations.csv").display());
        }
        Command::Diagnose(_) => {
            print!("{}", run_diagnose(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = match &cli.command {
        Command::Mesh(a)
        | Command::Solve(a)
        | Command::Convergence(a)
        | Command::Iterations(a)
        | Command::Diagnose(a) => a,
    };
    match run(args, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::FAILURE
        }
    }
}
