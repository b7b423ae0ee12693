//! Solution output: VTK for viewers, CSV for coefficient vectors.

use std::io::Write;

use super::MixedSystem;
use crate::error::{Error, Result};
use crate::mesh::{write_vtk, VtkField};
use crate::Vec3;

/// Velocity and pressure at the mesh vertices as a legacy VTK grid.
pub fn write_solution_vtk<W: Write>(w: W, sys: &MixedSystem, velocity: &[f64], pressure: &[f64]) -> Result<()> {
    let nv = sys.mesh.vertices.len();
    if velocity.len() != sys.velocity_dofs() {
        return Err(Error::InvalidParameter("velocity vector has the wrong length".into()));
    }
    let u: Vec<Vec3> = (0..nv).map(|i| Vec3::new(velocity[3 * i], velocity[3 * i + 1], velocity[3 * i + 2])).collect();
    let p: Vec<f64> = match sys.pressure_space {
        super::PressureSpace::Continuous => pressure.to_vec(),
        super::PressureSpace::Discontinuous => {
            // Average of the element values sharing each vertex.
            let mut acc = vec![(0.0, 0usize); nv];
            for (t, tet) in sys.mesh.tets.iter().enumerate() {
                for (i, &v) in tet.iter().enumerate() {
                    acc[v].0 += pressure[4 * t + i];
                    acc[v].1 += 1;
                }
            }
            acc.iter().map(|(s, n)| s / (*n).max(1) as f64).collect()
        }
    };
    write_vtk(w, &sys.mesh, &[VtkField::Vector("velocity", &u), VtkField::Scalar("pressure", &p)])
}

/// One row per velocity node (`node,x,y,z,u1,u2,u3`), then one row per
/// pressure dof (`dof,p`) in a second block separated by a blank line.
pub fn write_coefficients_csv<W: Write>(mut w: W, sys: &MixedSystem, velocity: &[f64], pressure: &[f64]) -> Result<()> {
    writeln!(w, "node,x,y,z,u1,u2,u3")?;
    for (n, x) in sys.space.nodes.iter().enumerate() {
        writeln!(w, "{n},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", x.x, x.y, x.z, velocity[3 * n], velocity[3 * n + 1], velocity[3 * n + 2])?;
    }
    writeln!(w)?;
    writeln!(w, "dof,p")?;
    for (q, p) in pressure.iter().enumerate() {
        writeln!(w, "{q},{p:.17e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::build_shell_mesh;
    use crate::params::FlowParams;

    #[test]
    fn exports_have_expected_sizes() {
        let m = build_shell_mesh(1.0, 2.0, 0, 1, 1.0).unwrap();
        let sys = assemble(&m, &FlowParams::new(1.0, 1.0, 1.0).unwrap()).unwrap();
        let v = sys.space.interpolate(|x| Ok(*x)).unwrap();
        let p = vec![1.0; sys.pressure_dofs()];
        let mut buf = Vec::new();
        write_solution_vtk(&mut buf, &sys, &v, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("VECTORS velocity double") && text.contains("SCALARS pressure double 1"));
        let mut buf = Vec::new();
        write_coefficients_csv(&mut buf, &sys, &v, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + sys.space.n_nodes() + 1 + 1 + sys.pressure_dofs());
    }
}
