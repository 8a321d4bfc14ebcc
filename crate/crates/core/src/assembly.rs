//! Crouzeix-Raviart and conforming P1 matrices on a [`TriMesh`].
//!
//! The CR basis function attached to local edge `i` of a triangle (the edge
//! opposite vertex `i`) is `1 - 2 lambda_i`, where `lambda_i` is the
//! barycentric coordinate of that vertex. Boundary edges and boundary vertices
//! carry no degree of freedom.

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::quadrature::{triangle_area, TriangleRule};
use crate::sparse::CsrMatrix;

/// Coefficients over the free degrees of freedom of a discrete space.
pub type DofVector = Vec<f64>;

/// Numbering of the free entities (interior edges or interior vertices) of a
/// mesh, in increasing entity order.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    entity_to_dof: Vec<Option<usize>>,
    dof_to_entity: Vec<usize>,
}

impl DofMap {
    fn from_mask(free: impl Iterator<Item = bool>) -> Self {
        let mut entity_to_dof = Vec::new();
        let mut dof_to_entity = Vec::new();
        for (entity, is_free) in free.enumerate() {
            if is_free {
                entity_to_dof.push(Some(dof_to_entity.len()));
                dof_to_entity.push(entity);
            } else {
                entity_to_dof.push(None);
            }
        }
        DofMap { entity_to_dof, dof_to_entity }
    }

    /// Free CR degrees of freedom: the interior edges.
    pub fn cr(mesh: &TriMesh) -> Self {
        Self::from_mask(mesh.boundary_edge.iter().map(|&b| !b))
    }

    /// Free P1 degrees of freedom: the interior vertices.
    pub fn p1(mesh: &TriMesh) -> Self {
        Self::from_mask((0..mesh.num_vertices()).map(|v| !mesh.is_boundary_vertex(v)))
    }

    pub fn len(&self) -> usize {
        self.dof_to_entity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_to_entity.is_empty()
    }

    pub fn dof(&self, entity: usize) -> Option<usize> {
        self.entity_to_dof[entity]
    }

    pub fn entity(&self, dof: usize) -> usize {
        self.dof_to_entity[dof]
    }
}

/// Stiffness and mass of a discrete space together with its numbering.
#[derive(Debug, Clone)]
pub struct FeSystem {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub dofs: DofMap,
}

/// Gradients of the three barycentric coordinates of `tri`.
pub fn barycentric_gradients(tri: &[Point; 3]) -> [[f64; 2]; 3] {
    let two_area = 2.0 * triangle_area(tri);
    let [p0, p1, p2] = tri;
    [
        [(p1[1] - p2[1]) / two_area, (p2[0] - p1[0]) / two_area],
        [(p2[1] - p0[1]) / two_area, (p0[0] - p2[0]) / two_area],
        [(p0[1] - p1[1]) / two_area, (p1[0] - p0[0]) / two_area],
    ]
}

/// Barycentric coordinates of `p` with respect to `tri`.
pub fn barycentric_coordinates(tri: &[Point; 3], p: Point) -> [f64; 3] {
    let area = triangle_area(tri);
    let [a, b, c] = *tri;
    [
        triangle_area(&[p, b, c]) / area,
        triangle_area(&[a, p, c]) / area,
        triangle_area(&[a, b, p]) / area,
    ]
}

/// Element stiffness of the P1 hat functions of the three vertices.
pub fn p1_local_stiffness(tri: &[Point; 3]) -> [[f64; 3]; 3] {
    let area = triangle_area(tri).abs();
    let g = barycentric_gradients(tri);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// Element mass of the P1 hat functions: `|K| (1 + delta_ij) / 12`.
pub fn p1_local_mass(tri: &[Point; 3]) -> [[f64; 3]; 3] {
    let area = triangle_area(tri).abs();
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// Element stiffness of the CR basis functions on the three local edges.
pub fn cr_local_stiffness(tri: &[Point; 3]) -> [[f64; 3]; 3] {
    let area = triangle_area(tri).abs();
    let g = barycentric_gradients(tri);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (gi, gj) = ([-2.0 * g[i][0], -2.0 * g[i][1]], [-2.0 * g[j][0], -2.0 * g[j][1]]);
            k[i][j] = area * (gi[0] * gj[0] + gi[1] * gj[1]);
        }
    }
    k
}

/// Element mass of the CR basis functions, which is diagonal with entries
/// `|K| / 3`.
pub fn cr_local_mass(tri: &[Point; 3]) -> [[f64; 3]; 3] {
    let area = triangle_area(tri).abs();
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 3.0;
    }
    m
}

fn checked_points(mesh: &TriMesh, t: usize) -> Result<[Point; 3]> {
    let area = mesh.signed_area(t);
    let scale = mesh.h * mesh.h;
    if !(area > 64.0 * f64::EPSILON * scale) {
        return Err(Error::DegenerateTriangle { index: t, area });
    }
    Ok(mesh.triangle_points(t))
}

/// Assembles the CR stiffness and mass matrices over the interior edges.
pub fn assemble_cr(mesh: &TriMesh) -> Result<FeSystem> {
    let dofs = DofMap::cr(mesh);
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    let mut diag = vec![0.0; dofs.len()];
    for t in 0..mesh.num_triangles() {
        let tri = checked_points(mesh, t)?;
        let k = cr_local_stiffness(&tri);
        debug_assert!({
            let p1 = p1_local_stiffness(&tri);
            (0..9).all(|q| (k[q / 3][q % 3] - 4.0 * p1[q / 3][q % 3]).abs() <= 1e-13 * k[0][0].abs().max(1.0))
        });
        let m = cr_local_mass(&tri);
        let local = mesh.tri_edges[t].map(|e| dofs.dof(e));
        for i in 0..3 {
            let Some(di) = local[i] else { continue };
            diag[di] += m[i][i];
            for j in 0..3 {
                if let Some(dj) = local[j] {
                    triplets.push((di, dj, k[i][j]));
                }
            }
        }
    }
    let n = dofs.len();
    Ok(FeSystem { stiffness: CsrMatrix::from_triplets(n, n, triplets), mass: CsrMatrix::from_diagonal(&diag), dofs })
}

/// Assembles the conforming P1 stiffness and mass matrices over the interior
/// vertices.
pub fn assemble_p1(mesh: &TriMesh) -> Result<FeSystem> {
    let dofs = DofMap::p1(mesh);
    let mut k_triplets = Vec::with_capacity(9 * mesh.num_triangles());
    let mut m_triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let tri = checked_points(mesh, t)?;
        let k = p1_local_stiffness(&tri);
        let m = p1_local_mass(&tri);
        let local = mesh.triangles[t].map(|v| dofs.dof(v));
        for i in 0..3 {
            let Some(di) = local[i] else { continue };
            for j in 0..3 {
                if let Some(dj) = local[j] {
                    k_triplets.push((di, dj, k[i][j]));
                    m_triplets.push((di, dj, m[i][j]));
                }
            }
        }
    }
    let n = dofs.len();
    Ok(FeSystem {
        stiffness: CsrMatrix::from_triplets(n, n, k_triplets),
        mass: CsrMatrix::from_triplets(n, n, m_triplets),
        dofs,
    })
}

/// Load vector `(f, phi_e)` over the free CR degrees of freedom, integrated
/// with the triangle rule of degree `quad_degree`.
pub fn cr_load_vector(
    mesh: &TriMesh,
    dofs: &DofMap,
    f: impl Fn(Point) -> f64,
    quad_degree: usize,
) -> Result<DofVector> {
    let rule = TriangleRule::with_degree(quad_degree)?;
    let mut load = vec![0.0; dofs.len()];
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangle_points(t);
        let area = triangle_area(&tri).abs();
        let local = mesh.tri_edges[t].map(|e| dofs.dof(e));
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let p = crate::quadrature::barycentric_to_point(&tri, l);
            let value = f(p);
            if !value.is_finite() {
                return Err(Error::NonFinite { x: p[0], y: p[1], value });
            }
            for i in 0..3 {
                if let Some(d) = local[i] {
                    load[d] += w * area * value * (1.0 - 2.0 * l[i]);
                }
            }
        }
    }
    Ok(load)
}

/// The three local CR coefficients of triangle `t` (zero on boundary edges).
pub fn local_cr_coefficients(mesh: &TriMesh, dofs: &DofMap, coeffs: &[f64], t: usize) -> [f64; 3] {
    mesh.tri_edges[t].map(|e| dofs.dof(e).map_or(0.0, |d| coeffs[d]))
}

/// Values of the CR function with coefficients `coeffs` at `points`.
pub fn evaluate_cr(mesh: &TriMesh, dofs: &DofMap, coeffs: &[f64], points: &[Point]) -> Result<Vec<f64>> {
    if coeffs.len() != dofs.len() {
        return Err(Error::DimensionMismatch { expected: dofs.len(), found: coeffs.len() });
    }
    points
        .iter()
        .map(|&p| {
            let [a, b, c] = mesh.locate(p)?;
            let tri = [mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]];
            let lambda = barycentric_coordinates(&tri, p);
            let opposite = [[b, c], [c, a], [a, b]];
            let mut value = 0.0;
            for i in 0..3 {
                let [p0, p1] = opposite[i];
                let edge = mesh.find_edge(p0, p1).expect("located triangle edges exist");
                if let Some(d) = dofs.dof(edge) {
                    value += coeffs[d] * (1.0 - 2.0 * lambda[i]);
                }
            }
            Ok(value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{edge_midpoints, uniform_mesh};

    #[test]
    fn dof_counts() {
        for n in [1, 2, 5, 8] {
            let mesh = uniform_mesh(n).unwrap();
            assert_eq!(DofMap::cr(&mesh).len(), 3 * n * n - 2 * n);
            assert_eq!(DofMap::p1(&mesh).len(), (n - 1) * (n - 1));
        }
    }

    #[test]
    fn cr_local_is_four_times_p1() {
        let tri = [[0.1, 0.2], [0.9, 0.3], [0.4, 1.1]];
        let (cr, p1) = (cr_local_stiffness(&tri), p1_local_stiffness(&tri));
        for i in 0..3 {
            for j in 0..3 {
                assert!((cr[i][j] - 4.0 * p1[i][j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cr_mass_by_quadrature() {
        // Independent check of the closed-form local mass with a degree-2 rule.
        let tri = [[0.1, 0.2], [0.9, 0.3], [0.4, 1.1]];
        let rule = TriangleRule::with_degree(2).unwrap();
        let m = cr_local_mass(&tri);
        for i in 0..3 {
            for j in 0..3 {
                let q = rule.integrate(&tri, |p| {
                    let l = barycentric_coordinates(&tri, p);
                    (1.0 - 2.0 * l[i]) * (1.0 - 2.0 * l[j])
                });
                assert!((q - m[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cr_mass_is_diagonal_with_closed_form_entries() {
        let n = 6;
        let mesh = uniform_mesh(n).unwrap();
        let sys = assemble_cr(&mesh).unwrap();
        let m = &sys.mass;
        assert_eq!(m.nnz(), sys.dofs.len());
        for r in 0..m.nrows {
            assert_eq!(m.row_nnz(r), 1);
            assert!((m.get(r, r) - 1.0 / (3.0 * (n * n) as f64)).abs() < 1e-16);
        }
        assert!(sys.stiffness.is_symmetric(1e-14));
    }

    #[test]
    fn p1_on_two_by_two() {
        let sys = assemble_p1(&uniform_mesh(2).unwrap()).unwrap();
        assert_eq!(sys.stiffness.nnz(), 1);
        assert!((sys.stiffness.get(0, 0) - 4.0).abs() < 1e-14);
        // Six triangles of area 1/8 meet at the centre, each adding |K|/6.
        assert!((sys.mass.get(0, 0) - 6.0 * (1.0 / 8.0) / 6.0).abs() < 1e-15);
    }

    #[test]
    fn constant_load() {
        let n = 4;
        let mesh = uniform_mesh(n).unwrap();
        let dofs = DofMap::cr(&mesh);
        let c = 2.5;
        let load = cr_load_vector(&mesh, &dofs, |_| c, 2).unwrap();
        let area = 1.0 / (2.0 * (n * n) as f64);
        for v in &load {
            assert!((v - c * 2.0 * area / 3.0).abs() < 1e-15);
        }
        assert!(cr_load_vector(&mesh, &dofs, |_| 0.0, 4).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn load_of_basis_function_is_mass_column() {
        let mesh = uniform_mesh(3).unwrap();
        let sys = assemble_cr(&mesh).unwrap();
        let e = sys.dofs.entity(4);
        let mut coeffs = vec![0.0; sys.dofs.len()];
        coeffs[4] = 1.0;
        let f = |p: Point| evaluate_cr(&mesh, &sys.dofs, &coeffs, &[p]).unwrap()[0];
        // Quadrature points are interior to triangles, so locate is unambiguous.
        let load = cr_load_vector(&mesh, &sys.dofs, f, 2).unwrap();
        for (d, v) in load.iter().enumerate() {
            assert!((v - sys.mass.get(d, 4)).abs() < 1e-13, "dof {d} (edge {e})");
        }
    }

    #[test]
    fn non_finite_load_rejected() {
        let mesh = uniform_mesh(2).unwrap();
        let dofs = DofMap::cr(&mesh);
        assert!(matches!(cr_load_vector(&mesh, &dofs, |_| f64::NAN, 4), Err(Error::NonFinite { .. })));
        assert!(matches!(cr_load_vector(&mesh, &dofs, |_| 1.0, 1), Err(Error::UnsupportedQuadrature(1))));
    }

    #[test]
    fn evaluation_is_kronecker_at_midpoints() {
        let mesh = uniform_mesh(3).unwrap();
        let dofs = DofMap::cr(&mesh);
        let mids = edge_midpoints(&mesh);
        let zero = vec![0.0; dofs.len()];
        assert!(evaluate_cr(&mesh, &dofs, &zero, &mids).unwrap().iter().all(|&v| v == 0.0));
        for d in [0, 5, dofs.len() - 1] {
            let mut coeffs = zero.clone();
            coeffs[d] = 1.0;
            let values = evaluate_cr(&mesh, &dofs, &coeffs, &mids).unwrap();
            for (e, v) in values.iter().enumerate() {
                let expect = if e == dofs.entity(d) { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-14);
            }
        }
        assert!(matches!(evaluate_cr(&mesh, &dofs, &zero, &[[1.5, 0.2]]), Err(Error::PointOutside { .. })));
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let mut mesh = uniform_mesh(1).unwrap();
        mesh.vertices[1] = [0.5, 0.5];
        assert!(matches!(assemble_cr(&mesh), Err(Error::DegenerateTriangle { index: 0, .. })));
        assert!(matches!(assemble_p1(&mesh), Err(Error::DegenerateTriangle { index: 0, .. })));
    }
}
