//! Text formats: segment files, mesh/matrix exports, residual histories.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use mdfem::mesh::FittedMesh;
use mdfem::solver::PcgResult;
use mdfem::sparse::Csr;
use mdfem::Segment2D;

/// Read interface segments from a text file: one `x1 y1 x2 y2` per line,
/// whitespace-separated; blank lines and `#` comments are ignored.
pub fn read_segments(path: &Path) -> io::Result<Vec<Segment2D>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        match vals {
            Ok(v) if v.len() == 4 => out.push(Segment2D::new(v[0], v[1], v[2], v[3])),
            _ => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: expected `x1 y1 x2 y2`", path.display(), lineno + 1),
                ))
            }
        }
    }
    Ok(out)
}

pub fn segments_to_string(segments: &[Segment2D]) -> String {
    let mut s = String::from("# interface segments: x1 y1 x2 y2 per line\n");
    for seg in segments {
        writeln!(s, "{} {} {} {}", seg.a.x, seg.a.y, seg.b.x, seg.b.y).unwrap();
    }
    s
}

pub fn write_segments(path: &Path, segments: &[Segment2D]) -> io::Result<()> {
    fs::write(path, segments_to_string(segments))
}

/// Mesh export with three whitespace-separated tables, each introduced by a
/// header line documenting its columns and row count.
pub fn mesh_to_string(mesh: &FittedMesh) -> String {
    let mut s = String::new();
    writeln!(s, "# vertices {} (columns: x y)", mesh.vertices.len()).unwrap();
    for p in &mesh.vertices {
        writeln!(s, "{} {}", p.x, p.y).unwrap();
    }
    writeln!(s, "# triangles {} (columns: v0 v1 v2 region)", mesh.triangles.len()).unwrap();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], mesh.tri_region[t]).unwrap();
    }
    writeln!(
        s,
        "# interface_edges {} (columns: va vb segment)",
        mesh.interface_edges.len()
    )
    .unwrap();
    for (e, &[a, b]) in mesh.interface_edges.iter().enumerate() {
        writeln!(s, "{} {} {}", a, b, mesh.edge_segment[e]).unwrap();
    }
    s
}

pub fn write_mesh(path: &Path, mesh: &FittedMesh) -> io::Result<()> {
    fs::write(path, mesh_to_string(mesh))
}

/// Sparse matrix in coordinate text form: `row col value` per entry.
pub fn matrix_to_string(a: &Csr) -> String {
    let mut s = format!("# matrix {} x {} (columns: row col value)\n", a.nrows(), a.ncols());
    for r in 0..a.nrows() {
        for (c, v) in a.row(r) {
            writeln!(s, "{} {} {}", r, c, v).unwrap();
        }
    }
    s
}

pub fn write_matrix(path: &Path, a: &Csr) -> io::Result<()> {
    fs::write(path, matrix_to_string(a))
}

/// Residual history CSV: preconditioned residual norm per iteration.
pub fn residuals_to_csv(pcg: &PcgResult) -> String {
    let mut s = String::from("iteration,residual\n");
    for (it, r) in pcg.residuals.iter().enumerate() {
        writeln!(s, "{},{}", it, r).unwrap();
    }
    s
}

pub fn write_residuals(path: &Path, pcg: &PcgResult) -> io::Result<()> {
    fs::write(path, residuals_to_csv(pcg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_file_round_trip_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("segs.txt");
        let segs = vec![
            Segment2D::new(0.0, 0.5, 1.0, 0.5),
            Segment2D::new(0.25, 0.0, 0.25, 1.0),
        ];
        write_segments(&path, &segs).unwrap();
        let back = read_segments(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].b.y, 1.0);

        fs::write(&path, "# comment\n\n0 0.5 1 0.5  # trailing\n").unwrap();
        assert_eq!(read_segments(&path).unwrap().len(), 1);

        fs::write(&path, "0 0.5 1\n").unwrap();
        assert!(read_segments(&path).is_err());
    }

    #[test]
    fn mesh_export_has_documented_headers() {
        let d = mdfem::geometry::build_arrangement(
            mdfem::geometry::unit_square(),
            &[Segment2D::new(0.0, 0.5, 1.0, 0.5)],
            1e-9,
        )
        .unwrap();
        let mesh = mdfem::mesh::triangulate(&d, 0.3).unwrap();
        let text = mesh_to_string(&mesh);
        assert!(text.starts_with(&format!("# vertices {} (columns: x y)", mesh.vertices.len())));
        assert!(text.contains("# triangles"));
        assert!(text.contains("# interface_edges"));
        let rows = text.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(
            rows,
            mesh.vertices.len() + mesh.triangles.len() + mesh.interface_edges.len()
        );
    }
}
