//! Structured triangulations of the unit square.
//!
//! Every mesh is the `n x n` grid of squares, each split along the diagonal
//! from its lower-left to its upper-right corner. Vertices are numbered
//! row by row (`j * (n + 1) + i` for the point `(i / n, j / n)`), triangles
//! are counterclockwise, and edges are stored as `(min, max)` vertex pairs
//! sorted lexicographically, which fixes the Crouzeix-Raviart degree of
//! freedom numbering.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    /// Subdivisions per side.
    pub n: usize,
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Canonical `(min, max)` vertex pairs, sorted.
    pub edges: Vec<[usize; 2]>,
    /// Local edge `i` of a triangle is the edge opposite its vertex `i`.
    pub tri_edges: Vec<[usize; 3]>,
    pub boundary_edge: Vec<bool>,
    /// Length of the longest edge.
    pub h: f64,
}

/// Builds the uniform diagonal triangulation with `n` cells per side.
pub fn uniform_mesh(n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::InvalidConfig("mesh subdivision count must be positive".into()));
    }
    let stride = n + 1;
    let mut vertices = Vec::with_capacity(stride * stride);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * stride + i;
            let v10 = v00 + 1;
            let v01 = v00 + stride;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Ok(TriMesh::from_parts(n, vertices, triangles))
}

/// Regular refinement: every triangle is split into four congruent children
/// through its edge midpoints. The child is numbered on the `2n` grid, so it
/// coincides with `uniform_mesh(2n)` up to triangle order.
pub fn refine_uniform(mesh: &TriMesh) -> TriMesh {
    let n = 2 * mesh.n;
    let stride = n + 1;
    let mut vertices = Vec::with_capacity(stride * stride);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    // Parent vertex (i, j) becomes child vertex (2i, 2j); midpoints land on
    // the half-integer positions of the parent grid.
    let grid = |v: usize| -> (usize, usize) { (2 * (v % (mesh.n + 1)), 2 * (v / (mesh.n + 1))) };
    let id = |(i, j): (usize, usize)| j * stride + i;
    let mid = |a: (usize, usize), b: (usize, usize)| ((a.0 + b.0) / 2, (a.1 + b.1) / 2);

    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for t in &mesh.triangles {
        let [a, b, c] = t.map(grid);
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        triangles.push([id(a), id(ab), id(ca)]);
        triangles.push([id(ab), id(b), id(bc)]);
        triangles.push([id(ca), id(bc), id(c)]);
        triangles.push([id(ab), id(bc), id(ca)]);
    }
    TriMesh::from_parts(n, vertices, triangles)
}

/// Midpoint of each edge, in edge order.
pub fn edge_midpoints(mesh: &TriMesh) -> Vec<Point> {
    mesh.edges
        .iter()
        .map(|&[a, b]| {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
        })
        .collect()
}

impl TriMesh {
    fn from_parts(n: usize, vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> TriMesh {
        let mut edges: Vec<[usize; 2]> = triangles
            .iter()
            .flat_map(|&[a, b, c]| [[b, c], [c, a], [a, b]])
            .map(|[p, q]| [p.min(q), p.max(q)])
            .collect();
        edges.sort_unstable();
        edges.dedup();

        let mut adjacency = vec![0u8; edges.len()];
        let tri_edges: Vec<[usize; 3]> = triangles
            .iter()
            .map(|&[a, b, c]| {
                [[b, c], [c, a], [a, b]].map(|[p, q]| {
                    let e = edges
                        .binary_search(&[p.min(q), p.max(q)])
                        .expect("edge collected from this triangle");
                    adjacency[e] += 1;
                    e
                })
            })
            .collect();
        let boundary_edge = adjacency.iter().map(|&count| count == 1).collect();

        let h = edges
            .iter()
            .map(|&[a, b]| distance(vertices[a], vertices[b]))
            .fold(0.0, f64::max);

        TriMesh { n, vertices, triangles, edges, tri_edges, boundary_edge, h }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.boundary_edge.iter().filter(|&&b| b).count()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.num_edges() - self.num_boundary_edges()
    }

    /// Vertex coordinates of triangle `t`.
    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Signed area of triangle `t` (positive for counterclockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let (i, j) = (v % (self.n + 1), v / (self.n + 1));
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// Finds the edge joining two vertices, if any.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&[a.min(b), a.max(b)]).ok()
    }

    /// Vertices of the triangle containing `p`, in counterclockwise order,
    /// located by index arithmetic on the grid. Points on shared edges are
    /// assigned to one of the neighbours deterministically.
    pub fn locate(&self, p: Point) -> Result<[usize; 3]> {
        const SLACK: f64 = 1e-12;
        let [x, y] = p;
        let range = -SLACK..=1.0 + SLACK;
        if !(range.contains(&x) && range.contains(&y)) {
            return Err(Error::PointOutside { x, y });
        }
        let n = self.n;
        let sx = (x * n as f64).clamp(0.0, n as f64);
        let sy = (y * n as f64).clamp(0.0, n as f64);
        let i = (sx.floor() as usize).min(n - 1);
        let j = (sy.floor() as usize).min(n - 1);
        let stride = n + 1;
        let v00 = j * stride + i;
        let v11 = v00 + stride + 1;
        if sx - i as f64 >= sy - j as f64 {
            Ok([v00, v00 + 1, v11])
        } else {
            Ok([v00, v11, v00 + stride])
        }
    }

    /// Checks the structural invariants of a uniform diagonal mesh.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let expect = |what: &str, found: usize, expected: usize| {
            if found == expected {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{what}: expected {expected}, found {found}")))
            }
        };
        expect("vertex count", self.num_vertices(), (n + 1) * (n + 1))?;
        expect("triangle count", self.num_triangles(), 2 * n * n)?;
        expect("edge count", self.num_edges(), 3 * n * n + 2 * n)?;
        expect("boundary edge count", self.num_boundary_edges(), 4 * n)?;
        let area = 1.0 / (2.0 * (n * n) as f64);
        for t in 0..self.num_triangles() {
            let a = self.signed_area(t);
            if (a - area).abs() > 1e-14 {
                return Err(Error::DegenerateTriangle { index: t, area: a });
            }
        }
        Ok(())
    }

    /// Writes a plain-text dump: a header line `n vertices triangles edges`,
    /// then one line per vertex (`x y`), per triangle (`a b c`) and per edge
    /// (`a b boundary`).
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io { path: path.to_path_buf(), source };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let mut body = format!(
            "{} {} {} {}\n",
            self.n,
            self.num_vertices(),
            self.num_triangles(),
            self.num_edges()
        );
        for [x, y] in &self.vertices {
            body.push_str(&format!("{x:.17e} {y:.17e}\n"));
        }
        for [a, b, c] in &self.triangles {
            body.push_str(&format!("{a} {b} {c}\n"));
        }
        for (e, [a, b]) in self.edges.iter().enumerate() {
            body.push_str(&format!("{a} {b} {}\n", u8::from(self.boundary_edge[e])));
        }
        out.write_all(body.as_bytes()).map_err(io)?;
        out.flush().map_err(io)
    }
}

fn distance(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}
