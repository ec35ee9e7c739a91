//! Discrete mesh energy and its analytic gradient.
//!
//! ```text
//! I = Σ_K |K| G(J_K, det J_K, M_K)
//! G = α sqrt(det M) tr(J M⁻¹ Jᵀ)^p + (1 - 2α) 2^p sqrt(det M) (det J / sqrt(det M))^p
//! ```
//!
//! The inverse metric in the alignment term makes `G` homogeneous of degree
//! `1 - p` in `M`, so `det(M)^{(p-1)/2} ∂I/∂x` is unchanged when `M` is
//! scaled by a constant, and the minimizer makes `Fᵀ M F` a multiple of the
//! identity (elements equilateral in the metric).
//!
//! `J_K` is the inverse Jacobian of the affine map from the unit-area
//! equilateral reference element onto `K`. With `E = [x1 - x0, x2 - x0]`
//! and the reference edge matrix `Ê`, `J = Ê E⁻¹`, so derivatives are
//! taken with respect to `E`:
//!
//! ```text
//! ∂|K|/∂E     = |K| E⁻ᵀ
//! ∂tr/∂E      = -2 JᵀJ M⁻¹ E⁻ᵀ
//! ∂det J/∂E   = -det J E⁻ᵀ
//! ```
//!
//! Columns of `∂(|K| G)/∂E` are the gradients for `x1` and `x2`; the `x0`
//! gradient is minus their sum.

use nalgebra::Matrix2;

use super::MmpdeConfig;
use crate::error::{Error, Result};
use crate::mesh::{Point, Reference, TriMesh, VertexKind};

struct ElementTerm {
    energy: f64,
    gradient: [Point; 3],
    /// `∂(|K| G)/∂M_K`.
    d_metric: Matrix2<f64>,
}

fn element_term(
    mesh: &TriMesh,
    k: usize,
    m: &Matrix2<f64>,
    ref_edges: &Matrix2<f64>,
    cfg: &MmpdeConfig,
    with_gradient: bool,
) -> Result<ElementTerm> {
    let [x0, x1, x2] = mesh.element_vertices(k);
    let e = Matrix2::from_columns(&[x1 - x0, x2 - x0]);
    let det_e = e.determinant();
    if !(det_e > 0.0) {
        return Err(Error::InvalidMesh(format!(
            "element {k} is inverted (det {det_e:e})"
        )));
    }
    let e_inv = e
        .try_inverse()
        .ok_or_else(|| Error::InvalidMesh(format!("element {k} is singular")))?;
    let area = 0.5 * det_e;
    let j = ref_edges * e_inv;
    let det_j = ref_edges.determinant() / det_e;
    let det_m = m.determinant();
    let m_inv = m.try_inverse().filter(|_| det_m > 0.0).ok_or_else(|| {
        Error::InvalidArgument(format!("metric on element {k} is not positive definite"))
    })?;
    let sqrt_det_m = det_m.sqrt();
    let trace = (j * m_inv * j.transpose()).trace();
    let (alpha, p) = (cfg.alpha, cfg.p);

    let c_align = alpha * sqrt_det_m;
    let c_equi = (1.0 - 2.0 * alpha) * 2f64.powf(p) * sqrt_det_m.powf(1.0 - p);
    let trace_p = trace.powf(p);
    let det_j_p = det_j.powf(p);
    let energy = area * (c_align * trace_p + c_equi * det_j_p);

    let mut gradient = [Point::zeros(); 3];
    let mut d_metric = Matrix2::zeros();
    if with_gradient {
        let e_inv_t = e_inv.transpose();
        let d_trace = j.transpose() * j * m_inv * e_inv_t * -2.0;
        let d_e = (e_inv_t * trace_p + d_trace * (p * trace.powf(p - 1.0))) * (c_align * area)
            + e_inv_t * (c_equi * area * det_j_p * (1.0 - p));
        let g1 = d_e.column(0).into_owned();
        let g2 = d_e.column(1).into_owned();
        gradient = [-(g1 + g2), g1, g2];
        // ∂sqrt(det M)/∂M = sqrt(det M) M⁻¹ / 2, ∂tr/∂M = -M⁻¹ JᵀJ M⁻¹.
        let jtj = j.transpose() * j;
        d_metric = (m_inv * (0.5 * c_align * trace_p + 0.5 * (1.0 - p) * c_equi * det_j_p)
            - m_inv * jtj * m_inv * (c_align * p * trace.powf(p - 1.0)))
            * area;
    }
    Ok(ElementTerm {
        energy,
        gradient,
        d_metric,
    })
}

fn check_tensors(mesh: &TriMesh, element_tensors: &[Matrix2<f64>]) -> Result<()> {
    if element_tensors.len() != mesh.n_elements() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_elements(),
            got: element_tensors.len(),
        });
    }
    Ok(())
}

/// Mesh energy for fixed element metrics.
pub fn energy(mesh: &TriMesh, element_tensors: &[Matrix2<f64>], cfg: &MmpdeConfig) -> Result<f64> {
    check_tensors(mesh, element_tensors)?;
    let ref_edges = Reference::Equilateral.edge_matrix();
    let mut total = 0.0;
    for (k, m) in element_tensors.iter().enumerate() {
        total += element_term(mesh, k, m, &ref_edges, cfg, false)?.energy;
    }
    Ok(total)
}

/// Energy and the unconstrained gradient `∂I/∂x_i` for every vertex.
pub fn energy_and_gradient(
    mesh: &TriMesh,
    element_tensors: &[Matrix2<f64>],
    cfg: &MmpdeConfig,
) -> Result<(f64, Vec<Point>)> {
    check_tensors(mesh, element_tensors)?;
    let ref_edges = Reference::Equilateral.edge_matrix();
    let mut total = 0.0;
    let mut grad = vec![Point::zeros(); mesh.n_vertices()];
    for (k, (tri, m)) in mesh.triangles().iter().zip(element_tensors).enumerate() {
        let term = element_term(mesh, k, m, &ref_edges, cfg, true)?;
        total += term.energy;
        for (v, g) in tri.iter().zip(term.gradient) {
            grad[*v] += g;
        }
    }
    Ok((total, grad))
}

/// Energy and unconstrained gradient when the metric is a function of
/// position: `vertex_metric[v]` is its value at vertex `v`, and
/// `vertex_metric_grad[v][c]` its derivative along coordinate `c` there.
/// Element metrics are vertex means, so the gradient picks up
/// `tr(∂(|K|G)/∂M_K ∂M/∂x_c) / 3` from every element around a vertex.
pub fn field_energy_and_gradient(
    mesh: &TriMesh,
    vertex_metric: &[Matrix2<f64>],
    vertex_metric_grad: &[[Matrix2<f64>; 2]],
    cfg: &MmpdeConfig,
) -> Result<(f64, Vec<Point>)> {
    let (elements, grad) =
        field_element_energies_and_gradient(mesh, vertex_metric, vertex_metric_grad, cfg)?;
    Ok((elements.iter().sum(), grad))
}

/// As [`field_energy_and_gradient`], keeping the per-element energies.
pub(crate) fn field_element_energies_and_gradient(
    mesh: &TriMesh,
    vertex_metric: &[Matrix2<f64>],
    vertex_metric_grad: &[[Matrix2<f64>; 2]],
    cfg: &MmpdeConfig,
) -> Result<(Vec<f64>, Vec<Point>)> {
    for len in [vertex_metric.len(), vertex_metric_grad.len()] {
        if len != mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_vertices(),
                got: len,
            });
        }
    }
    let ref_edges = Reference::Equilateral.edge_matrix();
    let mut elements = Vec::with_capacity(mesh.n_elements());
    let mut grad = vec![Point::zeros(); mesh.n_vertices()];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let m = (vertex_metric[tri[0]] + vertex_metric[tri[1]] + vertex_metric[tri[2]]) / 3.0;
        let term = element_term(mesh, k, &m, &ref_edges, cfg, true)?;
        elements.push(term.energy);
        for (v, g) in tri.iter().zip(term.gradient) {
            let dm = &vertex_metric_grad[*v];
            let chain = Point::new(
                term.d_metric.component_mul(&dm[0]).sum(),
                term.d_metric.component_mul(&dm[1]).sum(),
            ) / 3.0;
            grad[*v] += g + chain;
        }
    }
    Ok((elements, grad))
}

/// Restricts a per-vertex field to the admissible motions: corners are
/// pinned and side vertices keep only the tangential component.
pub fn constrain(mesh: &TriMesh, field: &mut [Point]) {
    for (g, kind) in field.iter_mut().zip(mesh.vertex_kinds()) {
        match kind {
            VertexKind::Interior => {}
            VertexKind::Edge(side) => g[side.fixed_axis()] = 0.0,
            VertexKind::Corner => *g = Point::zeros(),
        }
    }
}

/// Gradient of the energy restricted to admissible vertex motions.
pub fn energy_gradient(
    mesh: &TriMesh,
    element_tensors: &[Matrix2<f64>],
    cfg: &MmpdeConfig,
) -> Result<Vec<Point>> {
    let (_, mut grad) = energy_and_gradient(mesh, element_tensors, cfg)?;
    constrain(mesh, &mut grad);
    Ok(grad)
}
