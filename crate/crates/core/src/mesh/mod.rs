//! Tetrahedral meshes of the spherical shell `B_R \ B̄_{r_inner}`: an
//! icosphere extruded into graded radial layers, each prism cut into three
//! tetrahedra.

mod io;

pub use io::{read_shellmesh, write_shellmesh, write_vtk, VtkField};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Inner,
    Outer,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Inner => "inner",
            BoundaryTag::Outer => "outer",
        }
    }
}

/// Boundary triangle, oriented with its normal pointing out of the shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 3],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShellMesh {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    pub facets: Vec<BoundaryFacet>,
    pub r_inner: f64,
    pub r_outer: f64,
    pub angular_level: u32,
    pub radial_layers: usize,
}

/// Icosphere on the unit sphere: vertices and outward-oriented triangles.
pub fn icosphere(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let mut verts: Vec<Vec3> = raw.iter().map(|&(x, y, z)| Vec3::new(x, y, z).normalize()).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

/// Layer radii from `r_inner` to `r_outer` whose thicknesses grow by `grading`.
pub fn graded_radii(r_inner: f64, r_outer: f64, layers: usize, grading: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..layers).map(|i| grading.powi(i as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut radii = Vec::with_capacity(layers + 1);
    let mut r = r_inner;
    radii.push(r);
    for (i, w) in weights.iter().enumerate() {
        r = if i + 1 == layers { r_outer } else { r + (r_outer - r_inner) * w / total };
        radii.push(r);
    }
    radii
}

pub fn tet_volume(p: &[Vec3; 4]) -> f64 {
    (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0])) / 6.0
}

impl ShellMesh {
    pub fn tet_points(&self, t: usize) -> [Vec3; 4] {
        let [a, b, c, d] = self.tets[t];
        [self.vertices[a], self.vertices[b], self.vertices[c], self.vertices[d]]
    }

    pub fn facets_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryFacet> {
        self.facets.iter().filter(move |f| f.tag == tag)
    }

    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| tet_volume(&self.tet_points(t))).sum()
    }

    /// Largest edge length over all tets.
    pub fn max_diameter(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.tets.len() {
            let p = self.tet_points(t);
            for i in 0..4 {
                for j in (i + 1)..4 {
                    h = h.max((p[i] - p[j]).norm());
                }
            }
        }
        h
    }
}

/// Builds the shell mesh. Vertices lie exactly on the layer spheres.
pub fn build_shell_mesh(
    r_inner: f64,
    r_outer: f64,
    angular_level: u32,
    radial_layers: usize,
    grading: f64,
) -> Result<ShellMesh> {
    if !(r_inner > 0.0) {
        return Err(Error::InvalidParameter(format!("inner radius must be positive, got {r_inner}")));
    }
    if !(r_outer >= 2.0 * r_inner) {
        return Err(Error::InvalidParameter(format!(
            "outer radius {r_outer} must be at least twice the inner radius {r_inner}"
        )));
    }
    if radial_layers == 0 {
        return Err(Error::InvalidParameter("need at least one radial layer".into()));
    }
    if !(grading >= 1.0 && grading.is_finite()) {
        return Err(Error::InvalidParameter(format!("grading must be >= 1, got {grading}")));
    }
    let radii = graded_radii(r_inner, r_outer, radial_layers, grading);
    build_from_radii(&radii, angular_level)
}

/// Builds a shell mesh with the given layer radii (strictly increasing).
pub fn build_from_radii(radii: &[f64], angular_level: u32) -> Result<ShellMesh> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(Error::InvalidParameter("layer radii must be positive and strictly increasing".into()));
    }
    let (sphere, faces) = icosphere(angular_level);
    let nv = sphere.len();
    let layers = radii.len() - 1;
    let mut vertices = Vec::with_capacity(nv * radii.len());
    for &r in radii {
        vertices.extend(sphere.iter().map(|v| v * r));
    }
    let mut tets = Vec::with_capacity(3 * faces.len() * layers);
    for l in 0..layers {
        let lo = l * nv;
        let hi = (l + 1) * nv;
        for f in &faces {
            let mut s = *f;
            s.sort_unstable();
            let [a, b, c] = s;
            let cand = [
                [lo + a, lo + b, lo + c, hi + c],
                [lo + a, lo + b, hi + b, hi + c],
                [lo + a, hi + a, hi + b, hi + c],
            ];
            for mut t in cand {
                let p = [vertices[t[0]], vertices[t[1]], vertices[t[2]], vertices[t[3]]];
                if tet_volume(&p) < 0.0 {
                    t.swap(2, 3);
                }
                tets.push(t);
            }
        }
    }
    let mut facets = Vec::with_capacity(2 * faces.len());
    for &[a, b, c] in &faces {
        facets.push(BoundaryFacet { vertices: [a, c, b], tag: BoundaryTag::Inner });
    }
    let top = layers * nv;
    for &[a, b, c] in &faces {
        facets.push(BoundaryFacet { vertices: [top + a, top + b, top + c], tag: BoundaryTag::Outer });
    }
    let mesh = ShellMesh {
        vertices,
        tets,
        facets,
        r_inner: radii[0],
        r_outer: radii[layers],
        angular_level,
        radial_layers: layers,
    };
    validate(&mesh)?;
    Ok(mesh)
}

/// Geometric quality summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshQualityReport {
    pub tets: usize,
    pub vertices: usize,
    pub min_dihedral_deg: f64,
    pub max_dihedral_deg: f64,
    pub min_volume: f64,
    pub total_volume: f64,
    /// Counts of `3 r_in / r_circ` in ten equal bins over `[0, 1]`.
    pub radius_ratio_histogram: [usize; 10],
    pub inner_euler_characteristic: i64,
    pub outer_euler_characteristic: i64,
}

fn dihedral_angles(p: &[Vec3; 4]) -> [f64; 6] {
    let faces = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
    let normals: Vec<Vec3> = faces
        .iter()
        .enumerate()
        .map(|(opp, f)| {
            let n = (p[f[1]] - p[f[0]]).cross(&(p[f[2]] - p[f[0]])).normalize();
            // orient outward: away from the opposite vertex
            if n.dot(&(p[opp] - p[f[0]])) > 0.0 {
                -n
            } else {
                n
            }
        })
        .collect();
    let mut out = [0.0; 6];
    let mut k = 0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            out[k] = (std::f64::consts::PI - normals[i].dot(&normals[j]).clamp(-1.0, 1.0).acos()).to_degrees();
            k += 1;
        }
    }
    out
}

fn radius_ratio(p: &[Vec3; 4]) -> f64 {
    let v = tet_volume(p).abs();
    let area = |a: Vec3, b: Vec3, c: Vec3| 0.5 * (b - a).cross(&(c - a)).norm();
    let s = area(p[1], p[2], p[3]) + area(p[0], p[2], p[3]) + area(p[0], p[1], p[3]) + area(p[0], p[1], p[2]);
    let r_in = 3.0 * v / s;
    // circumcenter from the linear system 2 (p_i - p_0)·c = |p_i|² - |p_0|²
    let a = nalgebra::Matrix3::from_rows(&[
        (p[1] - p[0]).transpose() * 2.0,
        (p[2] - p[0]).transpose() * 2.0,
        (p[3] - p[0]).transpose() * 2.0,
    ]);
    let rhs = Vec3::new(
        p[1].norm_squared() - p[0].norm_squared(),
        p[2].norm_squared() - p[0].norm_squared(),
        p[3].norm_squared() - p[0].norm_squared(),
    );
    match a.lu().solve(&rhs) {
        Some(c) => 3.0 * r_in / (c - p[0]).norm(),
        None => 0.0,
    }
}

fn euler_characteristic(tris: &[[usize; 3]]) -> i64 {
    let mut verts = std::collections::HashSet::new();
    let mut edges = std::collections::HashSet::new();
    for t in tris {
        for i in 0..3 {
            verts.insert(t[i]);
            let (a, b) = (t[i], t[(i + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    verts.len() as i64 - edges.len() as i64 + tris.len() as i64
}

/// Checks every mesh invariant and reports element quality.
pub fn validate(mesh: &ShellMesh) -> Result<MeshQualityReport> {
    let n = mesh.vertices.len();
    if mesh.tets.iter().flatten().chain(mesh.facets.iter().flat_map(|f| f.vertices.iter())).any(|&v| v >= n) {
        return Err(Error::InvalidMesh("vertex index out of range".into()));
    }
    let mut inverted = Vec::new();
    let mut min_volume = f64::INFINITY;
    let mut total = 0.0;
    let mut min_dih: f64 = 180.0;
    let mut max_dih: f64 = 0.0;
    let mut hist = [0usize; 10];
    for t in 0..mesh.tets.len() {
        let p = mesh.tet_points(t);
        let v = tet_volume(&p);
        if !(v > 0.0) {
            inverted.push(t);
            continue;
        }
        min_volume = min_volume.min(v);
        total += v;
        for a in dihedral_angles(&p) {
            min_dih = min_dih.min(a);
            max_dih = max_dih.max(a);
        }
        let q = radius_ratio(&p).clamp(0.0, 1.0);
        hist[((q * 10.0) as usize).min(9)] += 1;
    }
    if !inverted.is_empty() {
        return Err(Error::InvertedElements { ids: inverted });
    }

    let mut face_count: HashMap<[usize; 3], (usize, usize, usize)> = HashMap::new();
    for (t, tet) in mesh.tets.iter().enumerate() {
        for skip in 0..4 {
            let mut f = [0usize; 3];
            let mut k = 0;
            for (i, &v) in tet.iter().enumerate() {
                if i != skip {
                    f[k] = v;
                    k += 1;
                }
            }
            f.sort_unstable();
            let e = face_count.entry(f).or_insert((0, t, skip));
            e.0 += 1;
        }
    }
    if let Some((f, _)) = face_count.iter().find(|(_, c)| c.0 > 2) {
        return Err(Error::InvalidMesh(format!("face {f:?} shared by more than two tets")));
    }
    let mut tagged: HashMap<[usize; 3], &BoundaryFacet> = HashMap::new();
    for fac in &mesh.facets {
        let mut k = fac.vertices;
        k.sort_unstable();
        if tagged.insert(k, fac).is_some() {
            return Err(Error::InvalidMesh(format!("duplicate boundary facet {k:?}")));
        }
    }
    let boundary: Vec<_> = face_count.iter().filter(|(_, c)| c.0 == 1).collect();
    if boundary.len() != tagged.len() {
        return Err(Error::InvalidMesh(format!(
            "{} boundary faces but {} tagged facets",
            boundary.len(),
            tagged.len()
        )));
    }
    for (key, &(_, t, skip)) in boundary {
        let fac = tagged
            .get(key)
            .ok_or_else(|| Error::InvalidMesh(format!("untagged boundary face {key:?}")))?;
        let target = match fac.tag {
            BoundaryTag::Inner => mesh.r_inner,
            BoundaryTag::Outer => mesh.r_outer,
        };
        for &v in &fac.vertices {
            let r = mesh.vertices[v].norm();
            if (r - target).abs() > 0.02 * target {
                return Err(Error::InvalidMesh(format!(
                    "{} facet vertex {v} at radius {r}, expected {target}",
                    fac.tag.as_str()
                )));
            }
        }
        // outward orientation: normal points away from the owning tet's opposite vertex
        let [a, b, c] = fac.vertices.map(|v| mesh.vertices[v]);
        let normal = (b - a).cross(&(c - a));
        let opp = mesh.vertices[mesh.tets[t][skip]];
        if normal.dot(&(opp - a)) >= 0.0 {
            return Err(Error::InvalidMesh(format!("boundary facet {key:?} is not outward oriented")));
        }
    }
    let chi = |tag| {
        let tris: Vec<[usize; 3]> = mesh.facets_with_tag(tag).map(|f| f.vertices).collect();
        euler_characteristic(&tris)
    };
    let report = MeshQualityReport {
        tets: mesh.tets.len(),
        vertices: n,
        min_dihedral_deg: min_dih,
        max_dihedral_deg: max_dih,
        min_volume,
        total_volume: total,
        radius_ratio_histogram: hist,
        inner_euler_characteristic: chi(BoundaryTag::Inner),
        outer_euler_characteristic: chi(BoundaryTag::Outer),
    };
    if report.inner_euler_characteristic != 2 || report.outer_euler_characteristic != 2 {
        return Err(Error::InvalidMesh("boundary surfaces are not closed spheres".into()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn level_zero_single_layer_counts() {
        let m = build_shell_mesh(1.0, 2.0, 0, 1, 1.0).unwrap();
        assert_eq!(m.tets.len(), 60);
        assert_eq!(m.vertices.len(), 24);
        assert_eq!(m.facets.len(), 40);
    }

    #[test]
    fn graded_level_two_mesh_is_valid() {
        let m = build_shell_mesh(1.0, 4.0, 2, 8, 1.3).unwrap();
        let rep = validate(&m).unwrap();
        assert!(rep.min_volume > 0.0);
        assert_eq!(rep.inner_euler_characteristic, 2);
        assert_eq!(rep.outer_euler_characteristic, 2);
        assert!(rep.min_dihedral_deg > 10.0, "{}", rep.min_dihedral_deg);
    }

    #[test]
    fn refinement_quadruples_boundary_facets() {
        for level in 0..3 {
            let a = build_shell_mesh(1.0, 2.0, level, 1, 1.0).unwrap();
            let b = build_shell_mesh(1.0, 2.0, level + 1, 1, 1.0).unwrap();
            for tag in [BoundaryTag::Inner, BoundaryTag::Outer] {
                assert_eq!(b.facets_with_tag(tag).count(), 4 * a.facets_with_tag(tag).count());
            }
        }
    }

    #[test]
    fn inverted_tet_is_named() {
        let mut m = build_shell_mesh(1.0, 2.0, 0, 1, 1.0).unwrap();
        m.tets[17].swap(0, 1);
        match validate(&m) {
            Err(Error::InvertedElements { ids }) => assert_eq!(ids, vec![17]),
            other => panic!("expected inverted element error, got {other:?}"),
        }
    }

    #[test]
    fn volume_converges_at_second_order() {
        let exact = 4.0 * PI / 3.0 * (8.0 - 1.0);
        let errs: Vec<f64> = (1..=4)
            .map(|l| (build_shell_mesh(1.0, 2.0, l, 2, 1.0).unwrap().volume() - exact).abs() / exact)
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.5 && ratio < 4.5, "{errs:?}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_shell_mesh(1.0, 1.5, 0, 1, 1.0).is_err());
        assert!(build_shell_mesh(1.0, 2.0, 0, 0, 1.0).is_err());
        assert!(build_shell_mesh(1.0, 2.0, 0, 1, 0.5).is_err());
    }

    #[test]
    fn graded_radii_thickness_ratio() {
        let r = graded_radii(1.0, 4.0, 5, 1.3);
        assert_eq!(r.len(), 6);
        assert_eq!(r[5], 4.0);
        for i in 1..4 {
            let ratio = (r[i + 1] - r[i]) / (r[i] - r[i - 1]);
            assert!((ratio - 1.3).abs() < 1e-12);
        }
    }
}
