//! Taylor–Hood (P2 velocity / P1 pressure) discretization of the truncated
//! rotating Oseen problem on a shell mesh.
//!
//! Velocity dof `3 * node + component`, where nodes are the mesh vertices
//! followed by the edge midpoints. The saddle system is
//! `[A Bᵀ; B 0]` with `A` the matrix of `a_R + δ_R` and
//! `B[q, (b, k)] = -∫ ∂_k φ_b ψ_q`.

mod export;
mod infsup;
mod solve;
pub mod sparse;

pub use export::{write_coefficients_csv, write_solution_vtk};
pub use infsup::{discrete_infsup, discrete_infsup_with, InfSupEstimate, InfSupMethod};
pub use solve::{
    artificial_traction, dirichlet_lift, load_vector, mass_conservation_residual, solve, solve_with, weak_traction_residual,
    SolveOptions, SolveResult, SolverMethod, TractionField,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, ShellMesh};
use crate::params::FlowParams;
use crate::quadrature::{tet_rule, triangle_rule};
use crate::Vec3;
use sparse::Csr;

/// Local edge numbering of a tet; P2 node `4 + e` sits on edge `e`.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
const TRI_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [0, 2]];

/// Quadratic Lagrange space on the mesh: vertex nodes then edge nodes.
#[derive(Debug, Clone)]
pub struct P2Space {
    pub n_vertices: usize,
    /// Sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    pub tet_nodes: Vec<[usize; 10]>,
    pub nodes: Vec<Vec3>,
    /// Nodes on the inner sphere, sorted.
    pub inner_nodes: Vec<usize>,
    /// Nodes on the outer sphere, sorted.
    pub outer_nodes: Vec<usize>,
}

impl P2Space {
    pub fn new(mesh: &ShellMesh) -> Self {
        let mut edges: Vec<[usize; 2]> = mesh
            .tets
            .iter()
            .flat_map(|t| TET_EDGES.iter().map(move |e| sorted_pair(t[e[0]], t[e[1]])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let nv = mesh.vertices.len();
        let mut space = Self { n_vertices: nv, edges, tet_nodes: Vec::new(), nodes: Vec::new(), inner_nodes: Vec::new(), outer_nodes: Vec::new() };
        space.tet_nodes = mesh
            .tets
            .iter()
            .map(|t| {
                let mut n = [0usize; 10];
                n[..4].copy_from_slice(t);
                for (k, e) in TET_EDGES.iter().enumerate() {
                    n[4 + k] = space.edge_node(t[e[0]], t[e[1]]);
                }
                n
            })
            .collect();
        space.nodes = mesh
            .vertices
            .iter()
            .copied()
            .chain(space.edges.iter().map(|e| (mesh.vertices[e[0]] + mesh.vertices[e[1]]) * 0.5))
            .collect();
        let boundary = |tag| {
            let mut v: Vec<usize> = mesh.facets_with_tag(tag).flat_map(|f| space.facet_nodes(&f.vertices)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let (inner, outer) = (boundary(BoundaryTag::Inner), boundary(BoundaryTag::Outer));
        space.inner_nodes = inner;
        space.outer_nodes = outer;
        space
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn velocity_dofs(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn edge_node(&self, a: usize, b: usize) -> usize {
        let key = sorted_pair(a, b);
        self.n_vertices + self.edges.binary_search(&key).expect("edge belongs to the mesh")
    }

    /// Nodes of a triangle `[a, b, c]`: vertices then edges `ab, bc, ac`.
    pub fn facet_nodes(&self, f: &[usize; 3]) -> [usize; 6] {
        let mut n = [f[0], f[1], f[2], 0, 0, 0];
        for (k, e) in TRI_EDGES.iter().enumerate() {
            n[3 + k] = self.edge_node(f[e[0]], f[e[1]]);
        }
        n
    }

    /// Nodal interpolant of a vector field, evaluated in parallel.
    pub fn interpolate<F>(&self, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&Vec3) -> Result<Vec3> + Sync,
    {
        let vals: Vec<Vec3> = self.nodes.par_iter().map(&f).collect::<Result<_>>()?;
        Ok(vals.iter().flat_map(|v| [v.x, v.y, v.z]).collect())
    }
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Volume and barycentric gradients of a tet.
pub fn tet_geometry(p: &[Vec3; 4]) -> (f64, [Vec3; 4]) {
    let j = crate::Mat3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let det = j.determinant();
    let inv = j.try_inverse().expect("non-degenerate tet");
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    (det.abs() / 6.0, [-(g1 + g2 + g3), g1, g2, g3])
}

/// Barycentric coordinates of `x` in the tet.
pub fn barycentric(p: &[Vec3; 4], x: &Vec3) -> [f64; 4] {
    let j = crate::Mat3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let l = j.try_inverse().expect("non-degenerate tet") * (x - p[0]);
    [1.0 - l.x - l.y - l.z, l.x, l.y, l.z]
}

pub fn p2_values(l: &[f64; 4]) -> [f64; 10] {
    let mut v = [0.0; 10];
    for i in 0..4 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, e) in TET_EDGES.iter().enumerate() {
        v[4 + k] = 4.0 * l[e[0]] * l[e[1]];
    }
    v
}

pub fn p2_gradients(l: &[f64; 4], g: &[Vec3; 4]) -> [Vec3; 10] {
    let mut d = [Vec3::zeros(); 10];
    for i in 0..4 {
        d[i] = g[i] * (4.0 * l[i] - 1.0);
    }
    for (k, e) in TET_EDGES.iter().enumerate() {
        d[4 + k] = (g[e[0]] * l[e[1]] + g[e[1]] * l[e[0]]) * 4.0;
    }
    d
}

fn p2_triangle_values(l: &[f64; 3]) -> [f64; 6] {
    let mut v = [0.0; 6];
    for i in 0..3 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, e) in TRI_EDGES.iter().enumerate() {
        v[3 + k] = 4.0 * l[e[0]] * l[e[1]];
    }
    v
}

/// Which outward direction enters the outer surface term of `a_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SurfaceNormal {
    /// `x / R` at the quadrature point.
    #[default]
    Exact,
    /// The flat facet's unit normal.
    Discrete,
}

/// Pressure element paired with the P2 velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PressureSpace {
    /// Continuous P1 on the vertices (Taylor–Hood).
    Continuous,
    /// Discontinuous P1, four dofs per tet. Not inf-sup stable.
    Discontinuous,
}

/// Outer boundary facet with the tet that owns it.
#[derive(Debug, Clone, Copy)]
pub struct OuterFacet {
    pub vertices: [usize; 3],
    pub tet: usize,
}

/// Assembled saddle-point operators; immutable after construction.
#[derive(Debug, Clone)]
pub struct MixedSystem {
    pub mesh: ShellMesh,
    pub params: FlowParams,
    pub space: P2Space,
    pub pressure_space: PressureSpace,
    pub normal: SurfaceNormal,
    /// `a_R + δ_R` on velocity dofs.
    pub a: Csr,
    /// `β_R`: pressure rows, velocity columns.
    pub b: Csr,
    /// Scalar P2 stiffness.
    pub stiffness: Csr,
    /// Scalar P2 volume mass.
    pub mass: Csr,
    /// Scalar P2 mass on the outer sphere.
    pub boundary_mass: Csr,
    pub pressure_mass: Csr,
    /// Scalar part of `A` shared by the three components (everything except
    /// the rotation coupling `ρ e₁ × u`).
    pub scalar_operator: Csr,
    /// Velocity load without body force (the body force is added by `solve`).
    pub rhs_v: Vec<f64>,
    /// Velocity dofs fixed by Dirichlet data on the inner sphere, sorted.
    pub constrained: Vec<usize>,
    pub outer_facets: Vec<OuterFacet>,
}

struct ElementBlocks {
    nodes: [usize; 10],
    stiffness: [[f64; 10]; 10],
    transport: [[f64; 10]; 10],
    mass: [[f64; 10]; 10],
    /// `-∫ ∂_k φ_b λ_q`, indexed `[q][b][k]`.
    divergence: [[[f64; 3]; 10]; 4],
}

fn element_blocks(mesh: &ShellMesh, space: &P2Space, p: &FlowParams, t: usize, rule: &[crate::quadrature::SimplexPoint<4>]) -> ElementBlocks {
    let pts = mesh.tet_points(t);
    let (vol, g) = tet_geometry(&pts);
    let mut e = ElementBlocks {
        nodes: space.tet_nodes[t],
        stiffness: [[0.0; 10]; 10],
        transport: [[0.0; 10]; 10],
        mass: [[0.0; 10]; 10],
        divergence: [[[0.0; 3]; 10]; 4],
    };
    for q in rule {
        let l = q.bary;
        let w = q.weight * vol;
        let x = pts[0] * l[0] + pts[1] * l[1] + pts[2] * l[2] + pts[3] * l[3];
        // Transport field τ e₁ - ρ e₁ × x.
        let beta = Vec3::new(p.tau, p.rho * x.z, -p.rho * x.y);
        let phi = p2_values(&l);
        let dphi = p2_gradients(&l, &g);
        let adv: [f64; 10] = std::array::from_fn(|b| beta.dot(&dphi[b]));
        for a in 0..10 {
            for b in 0..10 {
                e.stiffness[a][b] += w * dphi[a].dot(&dphi[b]);
                e.transport[a][b] += w * adv[b] * phi[a];
                e.mass[a][b] += w * phi[a] * phi[b];
            }
        }
        for (qi, &lq) in l.iter().enumerate() {
            for b in 0..10 {
                for k in 0..3 {
                    e.divergence[qi][b][k] -= w * dphi[b][k] * lq;
                }
            }
        }
    }
    e
}

/// Taylor–Hood system with the exact `x / R` in the surface term.
pub fn assemble(mesh: &ShellMesh, p: &FlowParams) -> Result<MixedSystem> {
    assemble_with(mesh, p, PressureSpace::Continuous, SurfaceNormal::Exact)
}

pub fn assemble_with(mesh: &ShellMesh, p: &FlowParams, pressure: PressureSpace, normal: SurfaceNormal) -> Result<MixedSystem> {
    if mesh.facets_with_tag(BoundaryTag::Inner).next().is_none() || mesh.facets_with_tag(BoundaryTag::Outer).next().is_none() {
        return Err(Error::InvalidMesh("mesh lacks an inner or outer boundary tag".into()));
    }
    if (mesh.r_inner - p.r_inner).abs() > 1e-12 * p.r_inner {
        return Err(Error::InvalidParameter(format!(
            "mesh inner radius {} differs from the obstacle radius {}",
            mesh.r_inner, p.r_inner
        )));
    }
    let space = P2Space::new(mesh);
    let nn = space.n_nodes();
    // Products of two quadratics with a linear coefficient: degree 5.
    let rule = tet_rule(4);
    let blocks: Vec<ElementBlocks> = (0..mesh.tets.len()).into_par_iter().map(|t| element_blocks(mesh, &space, p, t, &rule)).collect();

    let cap = 100 * blocks.len();
    let (mut tk, mut tt, mut tm) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
    let np = match pressure {
        PressureSpace::Continuous => mesh.vertices.len(),
        PressureSpace::Discontinuous => 4 * mesh.tets.len(),
    };
    let mut tb = Vec::with_capacity(120 * blocks.len());
    let mut tp = Vec::with_capacity(16 * blocks.len());
    for (t, e) in blocks.iter().enumerate() {
        for a in 0..10 {
            for b in 0..10 {
                tk.push((e.nodes[a], e.nodes[b], e.stiffness[a][b]));
                tt.push((e.nodes[a], e.nodes[b], e.transport[a][b]));
                tm.push((e.nodes[a], e.nodes[b], e.mass[a][b]));
            }
        }
        let pdofs = pressure_dofs(mesh, pressure, t);
        for q in 0..4 {
            for b in 0..10 {
                for k in 0..3 {
                    tb.push((pdofs[q], 3 * e.nodes[b] + k, e.divergence[q][b][k]));
                }
            }
        }
        let vol = tet_geometry(&mesh.tet_points(t)).0;
        for i in 0..4 {
            for j in 0..4 {
                let m = if i == j { vol / 10.0 } else { vol / 20.0 };
                tp.push((pdofs[i], pdofs[j], m));
            }
        }
    }
    drop(blocks);
    let stiffness = Csr::from_triplets(nn, nn, tk);
    let transport = Csr::from_triplets(nn, nn, tt);
    let mass = Csr::from_triplets(nn, nn, tm);
    let b = Csr::from_triplets(np, 3 * nn, tb);
    let pressure_mass = Csr::from_triplets(np, np, tp);

    // Outer surface terms.
    let r = mesh.r_outer;
    let srule = triangle_rule(4);
    let mut tg = Vec::new();
    let mut tw = Vec::new();
    for f in mesh.facets_with_tag(BoundaryTag::Outer) {
        let v = f.vertices.map(|i| mesh.vertices[i]);
        let cross = (v[1] - v[0]).cross(&(v[2] - v[0]));
        let area = 0.5 * cross.norm();
        let n = cross.normalize();
        let nodes = space.facet_nodes(&f.vertices);
        for q in &srule {
            let l = q.bary;
            let x = v[0] * l[0] + v[1] * l[1] + v[2] * l[2];
            let dir1 = match normal {
                SurfaceNormal::Exact => x.x / r,
                SurfaceNormal::Discrete => n.x,
            };
            let phi = p2_triangle_values(&l);
            let w = q.weight * area;
            for a in 0..6 {
                for bb in 0..6 {
                    let m = w * phi[a] * phi[bb];
                    tg.push((nodes[a], nodes[bb], m));
                    tw.push((nodes[a], nodes[bb], m * (1.0 - dir1)));
                }
            }
        }
    }
    let boundary_mass = Csr::from_triplets(nn, nn, tg);
    let weighted = Csr::from_triplets(nn, nn, tw);

    // A = I ⊗ (K + T + (τ/2) M_w) + Coriolis ⊗ M.
    let half_tau = 0.5 * p.tau;
    let mut ta = Vec::with_capacity(3 * stiffness.nnz() + 2 * mass.nnz());
    for (i, j, v) in stiffness.triplets().chain(transport.triplets()) {
        for c in 0..3 {
            ta.push((3 * i + c, 3 * j + c, v));
        }
    }
    for (i, j, v) in weighted.triplets() {
        for c in 0..3 {
            ta.push((3 * i + c, 3 * j + c, half_tau * v));
        }
    }
    for (i, j, v) in mass.triplets() {
        // ρ e₁ × u = ρ (0, -u₃, u₂)
        ta.push((3 * i + 1, 3 * j + 2, -p.rho * v));
        ta.push((3 * i + 2, 3 * j + 1, p.rho * v));
    }
    let a = Csr::from_triplets(3 * nn, 3 * nn, ta);
    let scalar_operator = Csr::from_triplets(
        nn,
        nn,
        stiffness.triplets().chain(transport.triplets()).chain(weighted.triplets().map(|(i, j, v)| (i, j, half_tau * v))).collect(),
    );

    let constrained: Vec<usize> = space.inner_nodes.iter().flat_map(|&n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
    let outer_facets = outer_facet_owners(mesh);
    Ok(MixedSystem {
        mesh: mesh.clone(),
        params: *p,
        rhs_v: vec![0.0; 3 * nn],
        space,
        pressure_space: pressure,
        normal,
        a,
        b,
        stiffness,
        mass,
        boundary_mass,
        pressure_mass,
        scalar_operator,
        constrained,
        outer_facets,
    })
}

pub(crate) fn pressure_dofs(mesh: &ShellMesh, pressure: PressureSpace, t: usize) -> [usize; 4] {
    match pressure {
        PressureSpace::Continuous => mesh.tets[t],
        PressureSpace::Discontinuous => [4 * t, 4 * t + 1, 4 * t + 2, 4 * t + 3],
    }
}

fn outer_facet_owners(mesh: &ShellMesh) -> Vec<OuterFacet> {
    let mut faces: Vec<([usize; 3], usize)> = Vec::with_capacity(4 * mesh.tets.len());
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
            faces.push((f, t));
        }
    }
    faces.sort_unstable();
    mesh.facets_with_tag(BoundaryTag::Outer)
        .map(|f| {
            let mut key = f.vertices;
            key.sort_unstable();
            let i = faces.partition_point(|(g, _)| *g < key);
            OuterFacet { vertices: f.vertices, tet: faces[i].1 }
        })
        .collect()
}

impl MixedSystem {
    pub fn pressure_dofs(&self) -> usize {
        self.b.nrows
    }

    pub fn velocity_dofs(&self) -> usize {
        self.a.nrows
    }

    fn component_form(&self, m: &Csr, w: &[f64], v: &[f64]) -> f64 {
        let nn = self.space.n_nodes();
        (0..3)
            .map(|c| {
                let wc: Vec<f64> = (0..nn).map(|i| w[3 * i + c]).collect();
                let vc: Vec<f64> = (0..nn).map(|i| v[3 * i + c]).collect();
                m.bilinear(&wc, &vc)
            })
            .sum()
    }

    /// `(w, v)^(R) = ∫ ∇w·∇v + (τ/2) ∫_{∂B_R} w·v`.
    pub fn inner_product(&self, w: &[f64], v: &[f64]) -> f64 {
        self.component_form(&self.stiffness, w, v) + 0.5 * self.params.tau * self.component_form(&self.boundary_mass, w, v)
    }

    /// `‖∇w‖₂`.
    pub fn gradient_norm(&self, w: &[f64]) -> f64 {
        self.component_form(&self.stiffness, w, w).max(0.0).sqrt()
    }

    /// `‖w‖₂` over the shell.
    pub fn l2_norm(&self, w: &[f64]) -> f64 {
        self.component_form(&self.mass, w, w).max(0.0).sqrt()
    }

    /// `‖w‖₂` on the outer sphere.
    pub fn boundary_norm(&self, w: &[f64]) -> f64 {
        self.component_form(&self.boundary_mass, w, w).max(0.0).sqrt()
    }

    /// `wᵀ A v`, i.e. `a_R(v, w) + δ_R(v, w)`.
    pub fn form(&self, w: &[f64], v: &[f64]) -> f64 {
        self.a.bilinear(w, v)
    }

    /// Zeroes the constrained (inner-sphere) entries of a velocity vector.
    pub fn restrict_to_test_space(&self, w: &mut [f64]) {
        for &d in &self.constrained {
            w[d] = 0.0;
        }
    }
}

/// `|w|^(R) = (‖∇w‖₂² + (τ/2) ‖w‖²_{∂B_R})^{1/2}`.
pub fn weighted_norm(sys: &MixedSystem, w: &[f64]) -> f64 {
    sys.inner_product(w, w).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_shell_mesh;
    use std::f64::consts::PI;

    fn params() -> FlowParams {
        FlowParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn dof_counts() {
        let m = build_shell_mesh(1.0, 2.0, 0, 1, 1.0).unwrap();
        let sys = assemble(&m, &params()).unwrap();
        assert_eq!(sys.space.n_vertices, 24);
        assert_eq!(sys.velocity_dofs(), 3 * (24 + sys.space.edges.len()));
        assert_eq!(sys.pressure_dofs(), 24);
        // The shell is homotopic to a sphere, so V - E + F - T = 2.
        let faces: usize = 4 * m.tets.len();
        let boundary = m.facets.len();
        let interior_faces = (faces - boundary) / 2;
        let chi = 24i64 - sys.space.edges.len() as i64 + (interior_faces + boundary) as i64 - m.tets.len() as i64;
        assert_eq!(chi, 2);
    }

    #[test]
    fn shape_functions_partition_unity_and_nodality() {
        let l = [0.1, 0.2, 0.3, 0.4];
        assert!((p2_values(&l).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let pts = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        let (_, g) = tet_geometry(&pts);
        let s: Vec3 = p2_gradients(&l, &g).iter().sum();
        assert!(s.norm() < 1e-14);
        let mid = [0.5, 0.5, 0.0, 0.0];
        let v = p2_values(&mid);
        assert!((v[4] - 1.0).abs() < 1e-15 && v.iter().enumerate().all(|(i, x)| i == 4 || x.abs() < 1e-15));
    }

    #[test]
    fn transport_of_constant_vanishes() {
        let m = build_shell_mesh(1.0, 3.0, 1, 3, 1.2).unwrap();
        let p = FlowParams { tau: 1.0, rho: 0.0, r_inner: 1.0 };
        let sys = assemble(&m, &p).unwrap();
        let nn = sys.space.n_nodes();
        let c: Vec<f64> = (0..nn).flat_map(|_| [0.3, -1.0, 2.0]).collect();
        // Stiffness and transport annihilate constants; only the surface term survives.
        let av = sys.a.matvec(&c);
        let surf = sys.form(&c, &c);
        // The icosphere is symmetric under x₁ → -x₁, so only the area remains.
        let area: f64 = m
            .facets_with_tag(BoundaryTag::Outer)
            .map(|f| {
                let v = f.vertices.map(|i| m.vertices[i]);
                0.5 * (v[1] - v[0]).cross(&(v[2] - v[0])).norm()
            })
            .sum();
        let want = 0.5 * area * (0.09 + 1.0 + 4.0);
        assert!((surf - want).abs() < 1e-10 * want, "{surf} vs {want}");
        assert!((area - 4.0 * PI * 9.0).abs() < 0.1 * area);
        let interior = (0..nn).filter(|n| sys.space.outer_nodes.binary_search(n).is_err());
        for n in interior {
            for k in 0..3 {
                assert!(av[3 * n + k].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_norm_of_constant() {
        let m = build_shell_mesh(1.0, 2.0, 2, 4, 1.0).unwrap();
        let sys = assemble(&m, &params()).unwrap();
        let w = sys.space.interpolate(|_| Ok(Vec3::x())).unwrap();
        let n2 = weighted_norm(&sys, &w).powi(2);
        let want = 0.5 * 16.0 * PI;
        assert!((n2 - want).abs() < 0.02 * want, "{n2} vs {want}");
        assert_eq!(weighted_norm(&sys, &vec![0.0; w.len()]), 0.0);
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        assert!((weighted_norm(&sys, &w2) - 2.0 * weighted_norm(&sys, &w)).abs() < 1e-12);
    }

    #[test]
    fn divergence_against_constant_pressure_is_boundary_flux() {
        // β_R(w, 1) = -∫ div w = -(flux out of the outer sphere) + flux through the inner.
        let m = build_shell_mesh(1.0, 2.0, 1, 2, 1.0).unwrap();
        let sys = assemble(&m, &params()).unwrap();
        let ones = vec![1.0; sys.pressure_dofs()];
        // A tangential rotation has zero flux through both polyhedral surfaces
        // only up to geometry; a constant field has exactly zero net flux.
        let w = sys.space.interpolate(|_| Ok(Vec3::new(1.0, -2.0, 0.5))).unwrap();
        let bw = sys.b.matvec(&w);
        assert!(crate::fem::sparse::dot(&ones, &bw).abs() < 1e-12);
        // A linear field x has div = 3, so β(w, 1) = -3 |D_R|.
        let w = sys.space.interpolate(|x| Ok(*x)).unwrap();
        let val = crate::fem::sparse::dot(&ones, &sys.b.matvec(&w));
        assert!((val + 3.0 * m.volume()).abs() < 1e-10);
    }

    #[test]
    fn rotation_form_is_skew() {
        // δ_R(w, w) reduces to a boundary term that vanishes for w = 0 on both spheres.
        let m = build_shell_mesh(1.0, 3.0, 1, 3, 1.2).unwrap();
        let p = FlowParams { tau: 0.0, rho: 1.5, r_inner: 1.0 };
        let sys = assemble(&m, &p).unwrap();
        let mut w = sys.space.interpolate(|x| Ok(Vec3::new(x.y * x.z, (x.x).sin(), x.norm_squared()))).unwrap();
        sys.restrict_to_test_space(&mut w);
        for &n in &sys.space.outer_nodes {
            for k in 0..3 {
                w[3 * n + k] = 0.0;
            }
        }
        let n2 = weighted_norm(&sys, &w).powi(2);
        assert!((sys.form(&w, &w) - n2).abs() < 1e-10 * n2);
    }

    #[test]
    fn discontinuous_pressure_dofs() {
        let m = build_shell_mesh(1.0, 2.0, 0, 1, 1.0).unwrap();
        let sys = assemble_with(&m, &params(), PressureSpace::Discontinuous, SurfaceNormal::Exact).unwrap();
        assert_eq!(sys.pressure_dofs(), 4 * 60);
        let total: f64 = sys.pressure_mass.values.iter().sum();
        assert!((total - m.volume()).abs() < 1e-12);
    }

    #[test]
    fn radius_mismatch_rejected() {
        let m = build_shell_mesh(1.0, 2.0, 0, 1, 1.0).unwrap();
        let p = FlowParams::new(1.0, 1.0, 0.5).unwrap();
        assert!(assemble(&m, &p).is_err());
    }
}
