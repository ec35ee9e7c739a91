//! Linear finite element assembly with optional streamline-upwind
//! Petrov-Galerkin (SUPG) stabilization.
//!
//! For linear elements the SUPG test function is `φ_i + τ_K b·∇φ_i` on each
//! element `K`. The assembled semi-discrete system is `M u' + A(t) u = f(t)`
//! with
//!
//! ```text
//! M_ij = (φ_j, φ_i) + Σ_K τ_K (φ_j, b·∇φ_i)_K
//! A_ij = (b·∇φ_j, φ_i) + ε(∇φ_j, ∇φ_i)
//!        + Σ_K τ_K [(b·∇φ_j, b·∇φ_i)_K + ε(∇φ_j, ∇(b·∇φ_i))_K]
//! f_i  = (f, φ_i) + Σ_K τ_K (f, b·∇φ_i)_K
//! ```
//!
//! Matrices use the edge-midpoint rule, exact for the polynomial integrands
//! that arise with constant or linear flows. The load uses a 24-point
//! composite rule, since sources can carry layers much thinner than an
//! element.
//!
//! The `-εΔu_h` part of the element residual vanishes for linear elements.
//! `∇(b·∇φ_i)` is `(∇b)^T ∇φ_i`, which is zero for constant flows.

use nalgebra::Matrix2;

use crate::error::Result;
use crate::mesh::{FlowTag, Point, Reference, TriMesh};
use crate::problems::{BoundaryCondition, ProblemSpec};
use crate::quadrature::{EDGE_MIDPOINTS, SUBDIVIDED_RULE};
use crate::sparse::{SparseMatrix, Triplets};

/// Element Péclet number `|b| diam / (2ε)`. Infinite for `ε = 0` with a
/// nonzero flow, zero without flow.
pub fn peclet(diam: f64, b_inf: f64, eps: f64) -> f64 {
    if b_inf == 0.0 {
        0.0
    } else if eps == 0.0 {
        f64::INFINITY
    } else {
        b_inf * diam / (2.0 * eps)
    }
}

/// Stabilization parameter `τ = diam / |b| · min(1, Pe / 3)`; zero without
/// flow.
pub fn tau(diam: f64, b_inf: f64, eps: f64) -> f64 {
    if b_inf == 0.0 {
        return 0.0;
    }
    let xi = (peclet(diam, b_inf, eps) / 3.0).min(1.0);
    diam / b_inf * xi
}

/// Per-element stabilization data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StabilizationParams {
    pub enabled: bool,
    pub tau: Vec<f64>,
    pub peclet: Vec<f64>,
    /// Largest flow speed over the element's quadrature points.
    pub b_inf: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub mass: SparseMatrix,
    pub operator: SparseMatrix,
    pub load: Vec<f64>,
    /// Sorted `(vertex, value)` pairs.
    pub dirichlet_nodes: Vec<(usize, f64)>,
    pub stabilization: StabilizationParams,
}

impl AssembledSystem {
    /// Imposes this system's Dirichlet rows on a combined matrix and rhs.
    pub fn apply_dirichlet(&self, combined: &mut SparseMatrix, rhs: &mut [f64]) {
        apply_dirichlet(&self.dirichlet_nodes, combined, rhs);
    }
}

/// Gradients of the three linear basis functions on a triangle.
pub fn basis_gradients(p: &[Point; 3], area: f64) -> [Point; 3] {
    let s = 0.5 / area;
    [
        Point::new(p[1].y - p[2].y, p[2].x - p[1].x) * s,
        Point::new(p[2].y - p[0].y, p[0].x - p[2].x) * s,
        Point::new(p[0].y - p[1].y, p[1].x - p[0].x) * s,
    ]
}

pub fn assemble(
    mesh: &TriMesh,
    problem: &ProblemSpec,
    t: f64,
    supg: bool,
) -> Result<AssembledSystem> {
    let nv = mesh.n_vertices();
    let ne = mesh.n_elements();
    let eps = problem.eps;
    let mut mass = Triplets::with_capacity(9 * ne);
    let mut operator = Triplets::with_capacity(9 * ne);
    let mut load = vec![0.0; nv];
    let mut stab = StabilizationParams {
        enabled: supg,
        tau: Vec::with_capacity(ne),
        peclet: Vec::with_capacity(ne),
        b_inf: Vec::with_capacity(ne),
    };

    for (k, tri) in mesh.triangles().iter().enumerate() {
        let map = mesh.affine_map(k, Reference::UnitRight)?;
        let area = 0.5 * map.det_jacobian;
        let p = mesh.element_vertices(k);
        let grads = basis_gradients(&p, area);

        struct QuadPoint {
            phi: [f64; 3],
            weight: f64,
            b: Point,
            jac: Matrix2<f64>,
        }
        let qps: Vec<QuadPoint> = EDGE_MIDPOINTS
            .iter()
            .map(|(l, w)| {
                let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
                QuadPoint {
                    phi: *l,
                    weight: w * area,
                    b: (problem.flow)(&x, t),
                    jac: (problem.flow_jacobian)(&x, t),
                }
            })
            .collect();

        let b_inf = qps.iter().fold(0.0f64, |m, q| m.max(q.b.norm()));
        let diam = mesh.diam(k);
        let tau_k = if supg { tau(diam, b_inf, eps) } else { 0.0 };
        stab.tau.push(tau_k);
        stab.peclet.push(peclet(diam, b_inf, eps));
        stab.b_inf.push(b_inf);

        let mut m_loc = [[0.0; 3]; 3];
        let mut a_loc = [[0.0; 3]; 3];
        let mut f_loc = [0.0; 3];
        for (l, w) in SUBDIVIDED_RULE.iter() {
            let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
            let weight = w * area * (problem.source)(&x, t);
            if weight == 0.0 {
                continue;
            }
            let b = if tau_k != 0.0 {
                (problem.flow)(&x, t)
            } else {
                Point::zeros()
            };
            for i in 0..3 {
                f_loc[i] += weight * (l[i] + tau_k * b.dot(&grads[i]));
            }
        }
        for q in &qps {
            let streamline: [f64; 3] = std::array::from_fn(|i| q.b.dot(&grads[i]));
            let jt = q.jac.transpose();
            for i in 0..3 {
                let test = q.phi[i] + tau_k * streamline[i];
                for j in 0..3 {
                    m_loc[i][j] += q.weight * q.phi[j] * test;
                    a_loc[i][j] += q.weight * streamline[j] * test;
                    if tau_k != 0.0 && eps != 0.0 {
                        a_loc[i][j] += q.weight * tau_k * eps * grads[j].dot(&(jt * grads[i]));
                    }
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                a_loc[i][j] += eps * area * grads[j].dot(&grads[i]);
            }
        }

        for i in 0..3 {
            load[tri[i]] += f_loc[i];
            for j in 0..3 {
                mass.push(tri[i], tri[j], m_loc[i][j]);
                operator.push(tri[i], tri[j], a_loc[i][j]);
            }
        }
    }

    Ok(AssembledSystem {
        mass: mass.compress(nv, nv)?,
        operator: operator.compress(nv, nv)?,
        load,
        dirichlet_nodes: dirichlet_nodes(mesh, problem, t),
        stabilization: stab,
    })
}

/// Boundary vertices carrying Dirichlet data at time `t`, with their values
/// evaluated at the current vertex positions.
pub fn dirichlet_nodes(mesh: &TriMesh, problem: &ProblemSpec, t: f64) -> Vec<(usize, f64)> {
    let mut nodes: Vec<usize> = match problem.bc {
        BoundaryCondition::DirichletFromExact | BoundaryCondition::DirichletZero => mesh
            .boundary_edges()
            .iter()
            .flat_map(|e| e.vertices)
            .collect(),
        BoundaryCondition::InflowDirichletZero => {
            let tags = mesh.classify_boundary(|p, t| (problem.flow)(p, t), t);
            mesh.boundary_edges()
                .iter()
                .zip(tags)
                .filter(|(_, tag)| *tag == FlowTag::Inflow)
                .flat_map(|(e, _)| e.vertices)
                .collect()
        }
    };
    nodes.sort_unstable();
    nodes.dedup();
    nodes
        .into_iter()
        .map(|v| (v, problem.dirichlet_value(&mesh.vertices()[v], t)))
        .collect()
}

/// Replaces each Dirichlet row by the identity and sets the rhs entry to the
/// boundary value. Neumann (outflow) rows are untouched.
pub fn apply_dirichlet(nodes: &[(usize, f64)], combined: &mut SparseMatrix, rhs: &mut [f64]) {
    for &(v, value) in nodes {
        combined.set_identity_row(v);
        rhs[v] = value;
    }
}
