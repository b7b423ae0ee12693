//! Plain-text mesh files and legacy VTK export.
//!
//! `shellmesh v1` layout:
//! ```text
//! shellmesh v1
//! <r_inner> <r_outer> <angular_level> <radial_layers>
//! vertices <n>
//! <x> <y> <z>            (n lines)
//! tets <m>
//! <a> <b> <c> <d>        (m lines, zero-based)
//! facets <k>
//! <a> <b> <c> <inner|outer>
//! ```

use std::io::{BufRead, Write};

use super::{validate, BoundaryFacet, BoundaryTag, ShellMesh};
use crate::error::{Error, Result};
use crate::Vec3;

pub fn write_shellmesh<W: Write>(mut w: W, mesh: &ShellMesh) -> Result<()> {
    writeln!(w, "shellmesh v1")?;
    writeln!(w, "{:.17e} {:.17e} {} {}", mesh.r_inner, mesh.r_outer, mesh.angular_level, mesh.radial_layers)?;
    writeln!(w, "vertices {}", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    writeln!(w, "tets {}", mesh.tets.len())?;
    for t in &mesh.tets {
        writeln!(w, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "facets {}", mesh.facets.len())?;
    for f in &mesh.facets {
        writeln!(w, "{} {} {} {}", f.vertices[0], f.vertices[1], f.vertices[2], f.tag.as_str())?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        loop {
            self.line += 1;
            match self.inner.next() {
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(l.trim().to_string());
                    }
                }
                None => return Err(Error::Parse(format!("unexpected end of file at line {}", self.line))),
            }
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("line {}: {msg}", self.line))
    }

    fn fields<T: std::str::FromStr>(&mut self, n: usize) -> Result<Vec<T>> {
        let l = self.next()?;
        let v: Vec<T> = l
            .split_whitespace()
            .map(|s| s.parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err("malformed number"))?;
        if v.len() != n {
            return Err(self.err(&format!("expected {n} fields")));
        }
        Ok(v)
    }

    fn count(&mut self, keyword: &str) -> Result<usize> {
        let l = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(keyword) {
            return Err(self.err(&format!("expected `{keyword} <count>`")));
        }
        it.next().and_then(|s| s.parse().ok()).ok_or_else(|| self.err("missing count"))
    }
}

/// Reads and validates a `shellmesh v1` file.
pub fn read_shellmesh<R: BufRead>(reader: R) -> Result<ShellMesh> {
    let mut lines = Lines { inner: reader.lines(), line: 0 };
    if lines.next()? != "shellmesh v1" {
        return Err(lines.err("missing `shellmesh v1` header"));
    }
    let head = lines.next()?;
    let parts: Vec<&str> = head.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(lines.err("expected `r_inner r_outer angular_level radial_layers`"));
    }
    let bad = |_| Error::Parse(format!("line {}: malformed header", lines.line));
    let r_inner: f64 = parts[0].parse().map_err(bad)?;
    let r_outer: f64 = parts[1].parse().map_err(bad)?;
    let angular_level: u32 = parts[2].parse().map_err(|_| Error::Parse("malformed level".into()))?;
    let radial_layers: usize = parts[3].parse().map_err(|_| Error::Parse("malformed layer count".into()))?;

    let nv = lines.count("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let v: Vec<f64> = lines.fields(3)?;
        vertices.push(Vec3::new(v[0], v[1], v[2]));
    }
    let nt = lines.count("tets")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let v: Vec<usize> = lines.fields(4)?;
        tets.push([v[0], v[1], v[2], v[3]]);
    }
    let nf = lines.count("facets")?;
    let mut facets = Vec::with_capacity(nf);
    for _ in 0..nf {
        let l = lines.next()?;
        let p: Vec<&str> = l.split_whitespace().collect();
        if p.len() != 4 {
            return Err(lines.err("expected `a b c tag`"));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("line {}: bad index", lines.line)));
        let tag = match p[3] {
            "inner" => BoundaryTag::Inner,
            "outer" => BoundaryTag::Outer,
            other => return Err(lines.err(&format!("unknown tag `{other}`"))),
        };
        facets.push(BoundaryFacet { vertices: [idx(p[0])?, idx(p[1])?, idx(p[2])?], tag });
    }
    let mesh = ShellMesh { vertices, tets, facets, r_inner, r_outer, angular_level, radial_layers };
    validate(&mesh)?;
    Ok(mesh)
}

/// Point data attached to a VTK export.
pub enum VtkField<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [Vec3]),
}

/// Legacy ASCII VTK unstructured grid of the linear tets, with optional
/// point data on the mesh vertices.
pub fn write_vtk<W: Write>(mut w: W, mesh: &ShellMesh, fields: &[VtkField]) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "shell mesh r_inner={} r_outer={}", mesh.r_inner, mesh.r_outer)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    writeln!(w, "CELLS {} {}", mesh.tets.len(), 5 * mesh.tets.len())?;
    for t in &mesh.tets {
        writeln!(w, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.tets.len())?;
    for _ in &mesh.tets {
        writeln!(w, "10")?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.vertices.len())?;
    }
    for f in fields {
        match f {
            VtkField::Scalar(name, vals) => {
                if vals.len() != mesh.vertices.len() {
                    return Err(Error::InvalidParameter(format!("field {name} has wrong length")));
                }
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in vals.iter() {
                    writeln!(w, "{v:.17e}")?;
                }
            }
            VtkField::Vector(name, vals) => {
                if vals.len() != mesh.vertices.len() {
                    return Err(Error::InvalidParameter(format!("field {name} has wrong length")));
                }
                writeln!(w, "VECTORS {name} double")?;
                for v in vals.iter() {
                    writeln!(w, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_shell_mesh;

    #[test]
    fn round_trip() {
        let m = build_shell_mesh(1.0, 3.0, 1, 2, 1.2).unwrap();
        let mut buf = Vec::new();
        write_shellmesh(&mut buf, &m).unwrap();
        let back = read_shellmesh(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn header_and_tags_checked() {
        assert!(read_shellmesh("meshfile v2\n".as_bytes()).is_err());
        let m = build_shell_mesh(1.0, 2.0, 0, 1, 1.0).unwrap();
        let mut buf = Vec::new();
        write_shellmesh(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen(" inner", " middle", 1);
        assert!(read_shellmesh(text.as_bytes()).is_err());
    }

    #[test]
    fn vtk_layout() {
        let m = build_shell_mesh(1.0, 2.0, 0, 1, 1.0).unwrap();
        let p: Vec<f64> = m.vertices.iter().map(|v| v.norm()).collect();
        let mut buf = Vec::new();
        write_vtk(&mut buf, &m, &[VtkField::Scalar("radius", &p), VtkField::Vector("position", &m.vertices)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("CELLS 60 300"));
        assert!(text.contains("POINT_DATA 24"));
        assert!(text.contains("VECTORS position double"));
    }
}
