//! Triangulations of the unit square.
//!
//! A [`TriMesh`] is a set of vertex coordinates plus a shared, immutable
//! [`Topology`]. Moving-mesh methods relocate vertices but never change
//! connectivity, so moved meshes share the topology of the mesh they came
//! from and only the coordinate array is copied.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Areas at or below this are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-14;

/// Sides of the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn outward_normal(self) -> Point {
        match self {
            Side::Bottom => Point::new(0.0, -1.0),
            Side::Right => Point::new(1.0, 0.0),
            Side::Top => Point::new(0.0, 1.0),
            Side::Left => Point::new(-1.0, 0.0),
        }
    }

    /// Index of the coordinate that is constant along this side.
    pub fn fixed_axis(self) -> usize {
        match self {
            Side::Left | Side::Right => 0,
            Side::Bottom | Side::Top => 1,
        }
    }

    fn of_point(p: &Point, tol: f64) -> Vec<Side> {
        let mut sides = Vec::new();
        if p.y.abs() <= tol {
            sides.push(Side::Bottom);
        }
        if (p.x - 1.0).abs() <= tol {
            sides.push(Side::Right);
        }
        if (p.y - 1.0).abs() <= tol {
            sides.push(Side::Top);
        }
        if p.x.abs() <= tol {
            sides.push(Side::Left);
        }
        sides
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Interior,
    /// Boundary vertex that may slide along one side.
    Edge(Side),
    /// Pinned boundary vertex: a square corner, or any boundary vertex not on
    /// a side of the unit square.
    Corner,
}

/// A boundary edge, oriented so the domain lies to its left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub element: usize,
    pub side: Option<Side>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowTag {
    Inflow,
    Outflow,
}

/// Reference element used to build an affine map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    /// (0,0), (1,0), (0,1); used for basis functions and quadrature.
    UnitRight,
    /// Equilateral triangle of unit area; used by the mesh energy.
    Equilateral,
}

impl Reference {
    pub fn vertices(self) -> [Point; 3] {
        match self {
            Reference::UnitRight => [
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
            Reference::Equilateral => {
                let s = 2.0 / 3f64.powf(0.25);
                [
                    Point::new(0.0, 0.0),
                    Point::new(s, 0.0),
                    Point::new(0.5 * s, 0.5 * 3f64.sqrt() * s),
                ]
            }
        }
    }

    /// Edge matrix `[v1 - v0, v2 - v0]` of the reference element.
    pub fn edge_matrix(self) -> Matrix2<f64> {
        let [v0, v1, v2] = self.vertices();
        Matrix2::from_columns(&[v1 - v0, v2 - v0])
    }
}

/// Affine map `x = jacobian * xi + origin` from a reference element onto a
/// mesh element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub jacobian: Matrix2<f64>,
    pub inverse_jacobian: Matrix2<f64>,
    pub det_jacobian: f64,
    pub origin: Point,
}

impl AffineMap {
    pub fn apply(&self, xi: &Point) -> Point {
        self.jacobian * xi + self.origin
    }

    pub fn apply_inverse(&self, x: &Point) -> Point {
        self.inverse_jacobian * (x - self.origin)
    }
}

/// Connectivity shared by a mesh and all its relocations.
#[derive(Debug)]
pub struct Topology {
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub vertex_kinds: Vec<VertexKind>,
    /// Elements incident to each vertex.
    pub vertex_elements: Vec<Vec<usize>>,
    /// Edge-neighbours of each vertex, sorted.
    pub vertex_neighbors: Vec<Vec<usize>>,
    /// `element_neighbors[k][i]` is the element across the edge opposite
    /// local vertex `i`.
    pub element_neighbors: Vec<[Option<usize>; 3]>,
}

impl Topology {
    fn build(n_vertices: usize, triangles: Vec<[usize; 3]>, vertices: &[Point]) -> Result<Self> {
        for (k, tri) in triangles.iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= n_vertices) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {k} references vertex {v} of {n_vertices}"
                )));
            }
        }

        let mut vertex_elements = vec![Vec::new(); n_vertices];
        for (k, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_elements[v].push(k);
            }
        }

        // Directed edge -> (element, local index of opposite vertex).
        let mut directed: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (k, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                if directed.insert((a, b), (k, i)).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a}, {b}) appears twice with the same orientation"
                    )));
                }
            }
        }

        let mut element_neighbors = vec![[None; 3]; triangles.len()];
        let mut boundary_edges = Vec::new();
        for (k, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                match directed.get(&(b, a)) {
                    Some(&(other, _)) => element_neighbors[k][i] = Some(other),
                    None => boundary_edges.push(BoundaryEdge {
                        vertices: [a, b],
                        element: k,
                        side: None,
                    }),
                }
            }
        }

        let mut vertex_neighbors = vec![Vec::new(); n_vertices];
        for tri in &triangles {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        vertex_neighbors[tri[i]].push(tri[j]);
                    }
                }
            }
        }
        for nb in &mut vertex_neighbors {
            nb.sort_unstable();
            nb.dedup();
        }

        // Tag boundary edges lying on a side of the unit square, then derive
        // vertex kinds from the tags.
        const TOL: f64 = 1e-12;
        let mut vertex_sides: Vec<Vec<Side>> = vec![Vec::new(); n_vertices];
        let mut on_boundary = vec![false; n_vertices];
        for edge in &mut boundary_edges {
            let [a, b] = edge.vertices;
            on_boundary[a] = true;
            on_boundary[b] = true;
            let sa = Side::of_point(&vertices[a], TOL);
            let sb = Side::of_point(&vertices[b], TOL);
            edge.side = sa.iter().copied().find(|s| sb.contains(s));
            if let Some(side) = edge.side {
                for v in [a, b] {
                    if !vertex_sides[v].contains(&side) {
                        vertex_sides[v].push(side);
                    }
                }
            }
        }
        boundary_edges.sort_by_key(|e| (e.side, e.vertices));

        let vertex_kinds = (0..n_vertices)
            .map(|v| {
                if !on_boundary[v] {
                    VertexKind::Interior
                } else if vertex_sides[v].len() == 1 && Side::of_point(&vertices[v], TOL).len() == 1
                {
                    VertexKind::Edge(vertex_sides[v][0])
                } else {
                    VertexKind::Corner
                }
            })
            .collect();

        Ok(Topology {
            triangles,
            boundary_edges,
            vertex_kinds,
            vertex_elements,
            vertex_neighbors,
            element_neighbors,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Point>,
    topology: Arc<Topology>,
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles() == other.triangles()
    }
}

impl TriMesh {
    /// Builds a mesh from raw parts. Triangles must be counterclockwise.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let topology = Topology::build(vertices.len(), triangles, &vertices)?;
        let mesh = TriMesh {
            vertices,
            topology: Arc::new(topology),
        };
        mesh.check_areas()?;
        Ok(mesh)
    }

    /// Uniform mesh of the unit square with `n` cells per side, each cell
    /// split along its lower-left to upper-right diagonal.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "cells per side must be at least 1".into(),
            ));
        }
        let h = 1.0 / n as f64;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                // Exact endpoints so boundary detection never sees roundoff.
                let x = if i == n { 1.0 } else { i as f64 * h };
                let y = if j == n { 1.0 } else { j as f64 * h };
                vertices.push(Point::new(x, y));
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) =
                    (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::from_parts(vertices, triangles)
    }

    /// Same connectivity, new coordinates. Fails if any element is inverted
    /// or degenerate.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vertices.len(),
                got: vertices.len(),
            });
        }
        let mesh = TriMesh {
            vertices,
            topology: Arc::clone(&self.topology),
        };
        mesh.check_areas()?;
        Ok(mesh)
    }

    /// Same connectivity, new coordinates, without the area check.
    pub(crate) fn with_vertices_unchecked(&self, vertices: Vec<Point>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        TriMesh {
            vertices,
            topology: Arc::clone(&self.topology),
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.topology.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.topology.boundary_edges
    }

    pub fn vertex_kinds(&self) -> &[VertexKind] {
        &self.topology.vertex_kinds
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn shares_topology(&self, other: &TriMesh) -> bool {
        Arc::ptr_eq(&self.topology, &other.topology)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.topology.triangles.len()
    }

    pub fn element_vertices(&self, k: usize) -> [Point; 3] {
        let [a, b, c] = self.topology.triangles[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area; positive for counterclockwise elements.
    pub fn signed_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.element_vertices(k);
        signed_area(&a, &b, &c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|k| self.signed_area(k)).sum()
    }

    pub fn min_area(&self) -> f64 {
        (0..self.n_elements())
            .map(|k| self.signed_area(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Longest pairwise vertex distance, i.e. the longest edge.
    pub fn diam(&self, k: usize) -> f64 {
        let [a, b, c] = self.element_vertices(k);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges()
            .iter()
            .map(|e| (self.vertices[e.vertices[1]] - self.vertices[e.vertices[0]]).norm())
            .sum()
    }

    pub fn affine_map(&self, k: usize, reference: Reference) -> Result<AffineMap> {
        let area = self.signed_area(k);
        if area <= DEGENERATE_AREA {
            return Err(Error::DegenerateElement { element: k, area });
        }
        let [x0, x1, x2] = self.element_vertices(k);
        let edges = Matrix2::from_columns(&[x1 - x0, x2 - x0]);
        let ref_edges = reference.edge_matrix();
        let ref_inv = ref_edges
            .try_inverse()
            .expect("reference element is non-degenerate");
        let jacobian = edges * ref_inv;
        let inverse_jacobian = ref_edges
            * edges
                .try_inverse()
                .ok_or(Error::DegenerateElement { element: k, area })?;
        let xi0 = reference.vertices()[0];
        Ok(AffineMap {
            jacobian,
            inverse_jacobian,
            det_jacobian: jacobian.determinant(),
            origin: x0 - jacobian * xi0,
        })
    }

    /// Tags every boundary edge inflow (`b·n < 0` at its midpoint) or
    /// outflow. Characteristic edges (`b·n = 0`) count as outflow.
    pub fn classify_boundary<F>(&self, flow: F, t: f64) -> Vec<FlowTag>
    where
        F: Fn(&Point, f64) -> Point,
    {
        self.boundary_edges()
            .iter()
            .map(|e| {
                let a = self.vertices[e.vertices[0]];
                let b = self.vertices[e.vertices[1]];
                let d = b - a;
                let normal = Point::new(d.y, -d.x);
                if flow(&(0.5 * (a + b)), t).dot(&normal) < 0.0 {
                    FlowTag::Inflow
                } else {
                    FlowTag::Outflow
                }
            })
            .collect()
    }

    /// Checks every structural invariant of a unit-square mesh.
    pub fn validate_unit_square(&self) -> Result<()> {
        self.check_areas()?;
        let total = self.total_area();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMesh(format!(
                "total area {total} differs from 1"
            )));
        }
        let length = self.boundary_length();
        if (length - 4.0).abs() > 1e-12 {
            return Err(Error::InvalidMesh(format!(
                "boundary length {length} differs from 4"
            )));
        }
        if let Some(e) = self.boundary_edges().iter().find(|e| e.side.is_none()) {
            return Err(Error::InvalidMesh(format!(
                "boundary edge {:?} is off the unit square",
                e.vertices
            )));
        }
        Ok(())
    }

    fn check_areas(&self) -> Result<()> {
        for k in 0..self.n_elements() {
            let area = self.signed_area(k);
            if !(area > DEGENERATE_AREA) {
                return Err(Error::DegenerateElement { element: k, area });
            }
        }
        Ok(())
    }
}

pub fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_counts() {
        let m = TriMesh::uniform(1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_elements(), 2);
        assert!(m.vertex_kinds().iter().all(|k| *k == VertexKind::Corner));
        assert_eq!(TriMesh::uniform(16).unwrap().n_elements(), 512);
        let big = TriMesh::uniform(128).unwrap();
        assert_eq!(big.n_elements(), 32768);
        assert_eq!(big.n_vertices(), 129 * 129);
        assert!(matches!(
            TriMesh::uniform(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn uniform_is_valid() {
        for n in [1, 2, 5, 16] {
            let m = TriMesh::uniform(n).unwrap();
            m.validate_unit_square().unwrap();
            assert_eq!(m.boundary_edges().len(), 4 * n);
            for side in Side::ALL {
                assert_eq!(
                    m.boundary_edges()
                        .iter()
                        .filter(|e| e.side == Some(side))
                        .count(),
                    n
                );
            }
            let corners = m
                .vertex_kinds()
                .iter()
                .filter(|k| **k == VertexKind::Corner)
                .count();
            assert_eq!(corners, 4);
        }
    }

    #[test]
    fn boundary_edges_point_outward() {
        let m = TriMesh::uniform(3).unwrap();
        for e in m.boundary_edges() {
            let d = m.vertices()[e.vertices[1]] - m.vertices()[e.vertices[0]];
            let n = Point::new(d.y, -d.x).normalize();
            assert_abs_diff_eq!(
                (n - e.side.unwrap().outward_normal()).norm(),
                0.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn affine_map_identity_and_scaling() {
        let m = TriMesh::from_parts(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let map = m.affine_map(0, Reference::UnitRight).unwrap();
        assert_abs_diff_eq!(map.jacobian, Matrix2::identity(), epsilon = 1e-15);
        assert_abs_diff_eq!(map.det_jacobian, 1.0, epsilon = 1e-15);

        let h = 0.125;
        let m = TriMesh::from_parts(
            vec![Point::new(0.0, 0.0), Point::new(h, 0.0), Point::new(0.0, h)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let map = m.affine_map(0, Reference::UnitRight).unwrap();
        assert_abs_diff_eq!(map.jacobian, Matrix2::identity() * h, epsilon = 1e-15);
        assert_abs_diff_eq!(map.det_jacobian, h * h, epsilon = 1e-15);
    }

    #[test]
    fn equilateral_reference_has_unit_area() {
        let [a, b, c] = Reference::Equilateral.vertices();
        assert_abs_diff_eq!(signed_area(&a, &b, &c), 1.0, epsilon = 1e-14);
        let m = TriMesh::from_parts(vec![a, b, c], vec![[0, 1, 2]]).unwrap();
        let map = m.affine_map(0, Reference::Equilateral).unwrap();
        assert_abs_diff_eq!(map.det_jacobian, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(map.jacobian, Matrix2::identity(), epsilon = 1e-14);
    }

    #[test]
    fn affine_map_round_trip() {
        let m = TriMesh::uniform(4).unwrap();
        for reference in [Reference::UnitRight, Reference::Equilateral] {
            for k in 0..m.n_elements() {
                let map = m.affine_map(k, reference).unwrap();
                assert_abs_diff_eq!(
                    map.jacobian * map.inverse_jacobian,
                    Matrix2::identity(),
                    epsilon = 1e-12
                );
                assert!(map.det_jacobian > 0.0);
                let verts = m.element_vertices(k);
                for (xi, x) in reference.vertices().iter().zip(verts.iter()) {
                    assert_abs_diff_eq!(map.apply(xi), *x, epsilon = 1e-12);
                    assert_abs_diff_eq!(map.apply_inverse(x), *xi, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn degenerate_element_is_rejected() {
        let m = TriMesh::uniform(1).unwrap();
        let mut v = m.vertices().to_vec();
        v[3] = Point::new(2.0, 0.0);
        let flat = m.with_vertices_unchecked(v);
        assert!(matches!(
            flat.affine_map(0, Reference::UnitRight),
            Err(Error::DegenerateElement { .. })
        ));
    }

    #[test]
    fn diam_values() {
        let tri = |p: [[f64; 2]; 3]| {
            TriMesh::from_parts(
                p.iter().map(|q| Point::new(q[0], q[1])).collect(),
                vec![[0, 1, 2]],
            )
            .unwrap()
        };
        assert_abs_diff_eq!(
            tri([[0., 0.], [1., 0.], [0., 1.]]).diam(0),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        let s = 0.3;
        assert_abs_diff_eq!(
            tri([[0., 0.], [s, 0.], [s / 2., s * 3f64.sqrt() / 2.]]).diam(0),
            s,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            tri([[0., 0.], [3., 0.], [0., 4.]]).diam(0),
            5.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn diam_bounds_area() {
        let m = TriMesh::uniform(7).unwrap();
        for k in 0..m.n_elements() {
            assert!(m.diam(k) >= (2.0 * m.signed_area(k)).sqrt());
        }
    }

    #[test]
    fn classify_cylinder_flow() {
        let m = TriMesh::uniform(4).unwrap();
        let b = |_: &Point, _: f64| Point::new(1.0, 0.7002075);
        let tags = m.classify_boundary(b, 0.0);
        for (e, tag) in m.boundary_edges().iter().zip(&tags) {
            let expected = match e.side.unwrap() {
                Side::Left | Side::Bottom => FlowTag::Inflow,
                Side::Right | Side::Top => FlowTag::Outflow,
            };
            assert_eq!(*tag, expected);
        }

        let vertical = |_: &Point, _: f64| Point::new(0.0, 1.0);
        let tags = m.classify_boundary(vertical, 0.0);
        for (e, tag) in m.boundary_edges().iter().zip(&tags) {
            let expected = if e.side == Some(Side::Bottom) {
                FlowTag::Inflow
            } else {
                FlowTag::Outflow
            };
            assert_eq!(*tag, expected);
        }
    }

    #[test]
    fn classification_is_refinement_invariant() {
        let b = |p: &Point, _: f64| Point::new(p.y - 0.3, p.x - 0.6);
        let per_side = |n: usize| {
            let m = TriMesh::uniform(n).unwrap();
            let tags = m.classify_boundary(b, 0.0);
            // Sample the tag at a fixed set of boundary points.
            let probes = [0.1, 0.45, 0.8];
            let mut out = Vec::new();
            for side in Side::ALL {
                for &s in &probes {
                    let (i, _) = m
                        .boundary_edges()
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| e.side == Some(side))
                        .find(|(_, e)| {
                            let a = m.vertices()[e.vertices[0]][1 - side.fixed_axis()];
                            let c = m.vertices()[e.vertices[1]][1 - side.fixed_axis()];
                            a.min(c) <= s && s <= a.max(c)
                        })
                        .unwrap();
                    out.push(tags[i]);
                }
            }
            out
        };
        assert_eq!(per_side(5), per_side(10));
        assert_eq!(per_side(5), per_side(20));
    }
}
