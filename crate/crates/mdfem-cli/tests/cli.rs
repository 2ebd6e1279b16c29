//! End-to-end tests of the compiled binary: every verb runs, files land in
//! the output directory, and fixed config + seed reproduces identical bytes.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdfem-cli"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("binary failed to start");
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn mesh_verb_writes_segment_and_mesh_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = run_ok(&[
        "mesh", "--geometry", "chords:3", "--seed", "5", "--h", "0.2", "--out", out,
    ]);
    assert!(stdout.contains("vertices"));
    let mesh_text = fs::read_to_string(dir.path().join("mesh.txt")).unwrap();
    assert!(mesh_text.contains("# vertices"));
    assert!(mesh_text.contains("# triangles"));
    assert!(mesh_text.contains("# interface_edges"));
    assert!(dir.path().join("segments.txt").exists());
}

#[test]
fn solve_verb_writes_solution_and_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = run_ok(&[
        "solve", "--geometry", "chords:2", "--seed", "3", "--h", "0.05", "--H", "0.25",
        "--out", out,
    ]);
    assert!(stdout.contains("PCG iterations"));
    let sol = fs::read_to_string(dir.path().join("solution.txt")).unwrap();
    assert!(sol.contains("# bulk_dofs"));
    assert!(sol.contains("# iface_dofs"));
    let res = fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert!(res.starts_with("iteration,residual"));
}

#[test]
fn convergence_verb_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = run_ok(&[
        "convergence", "--geometry", "chords:2", "--seed", "4", "--h", "0.3",
        "--levels", "2", "--out", out,
    ]);
    assert!(stdout.contains("fitted slope"));
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(csv.starts_with("level,h,energy_error"));
    assert!(csv.contains("# fitted_slope,"));
    assert!(dir.path().join("convergence.gp").exists());
}

#[test]
fn diagnose_verb_prints_report() {
    let stdout = run_ok(&["diagnose", "--geometry", "chords:2", "--seed", "1", "--h", "0.25"]);
    for key in ["regions =", "poincare_D =", "spectral_c1 =", "sobolev_index"] {
        assert!(stdout.contains(key), "missing {:?} in\n{}", key, stdout);
    }
}

#[test]
fn config_file_with_flag_overrides_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    fs::write(
        &cfg_path,
        "seed = 11\nh_target = 0.08\nh_coarse = [0.3]\nb_values = [1.0]\n\n\
         [geometry]\nkind = \"infinite_chords\"\ncount = 4\n",
    )
    .unwrap();
    let csv = |out: &Path| fs::read_to_string(out.join("iterations.csv")).unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(&[
            "iterations", "--config", cfg_path.to_str().unwrap(), "--threads", "1",
            "--out", out.to_str().unwrap(),
        ]);
    }
    // bit-identical output for a fixed config and seed
    assert_eq!(csv(&out_a), csv(&out_b));
    assert!(csv(&out_a).starts_with("H,A_iface,B,iterations,kappa"));

    // a flag overrides the config seed and changes the geometry
    let out_c = dir.path().join("c");
    run_ok(&[
        "iterations", "--config", cfg_path.to_str().unwrap(), "--threads", "1",
        "--seed", "12", "--out", out_c.to_str().unwrap(),
    ]);
    assert_ne!(csv(&out_a), csv(&out_c));
}

#[test]
fn missing_geometry_is_an_error() {
    let out = bin().args(["mesh"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--config or --geometry"));
}
