//! H¹-seminorms and L² errors of piecewise linear fields.

use crate::assembly::basis_gradients;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::problems::ExactSolution;
use crate::quadrature::SUBDIVIDED_RULE;

/// Norms of a discrete solution at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    /// H¹-seminorm error against the exact solution, or the seminorm of the
    /// discrete solution when there is none.
    pub h1_semi: f64,
    /// L² error against the exact solution (NaN without one).
    pub l2: f64,
    pub against_exact: bool,
    pub t: f64,
    pub n_elements: usize,
}

fn check_len(mesh: &TriMesh, u: &[f64]) -> Result<()> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            got: u.len(),
        });
    }
    Ok(())
}

fn element_gradient(mesh: &TriMesh, k: usize, u: &[f64]) -> (f64, [Point; 3], Point) {
    let p = mesh.element_vertices(k);
    let area = mesh.signed_area(k);
    let g = basis_gradients(&p, area);
    let tri = mesh.triangles()[k];
    (
        area,
        p,
        g[0] * u[tri[0]] + g[1] * u[tri[1]] + g[2] * u[tri[2]],
    )
}

/// `|u_h|_1 = sqrt(Σ_K |K| |∇u_h|²)`, exact for piecewise linears.
pub fn h1_seminorm(mesh: &TriMesh, u: &[f64]) -> Result<f64> {
    check_len(mesh, u)?;
    let sum: f64 = (0..mesh.n_elements())
        .map(|k| {
            let (area, _, g) = element_gradient(mesh, k, u);
            area * g.norm_squared()
        })
        .sum();
    Ok(sum.sqrt())
}

/// `|u - u_h|_1` with the subdivided degree-4 rule on every element.
pub fn h1_seminorm_error<G>(mesh: &TriMesh, u: &[f64], exact_grad: G, t: f64) -> Result<f64>
where
    G: Fn(&Point, f64) -> Point,
{
    check_len(mesh, u)?;
    let mut sum = 0.0;
    for k in 0..mesh.n_elements() {
        let (area, p, g) = element_gradient(mesh, k, u);
        for (l, w) in SUBDIVIDED_RULE.iter() {
            let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
            sum += w * area * (g - exact_grad(&x, t)).norm_squared();
        }
    }
    Ok(sum.sqrt())
}

/// `‖u - u_h‖_0` with the subdivided degree-4 rule on every element.
pub fn l2_error<F>(mesh: &TriMesh, u: &[f64], exact: F, t: f64) -> Result<f64>
where
    F: Fn(&Point, f64) -> f64,
{
    check_len(mesh, u)?;
    let mut sum = 0.0;
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.element_vertices(k);
        let area = mesh.signed_area(k);
        for (l, w) in SUBDIVIDED_RULE.iter() {
            let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
            let uh = l[0] * u[tri[0]] + l[1] * u[tri[1]] + l[2] * u[tri[2]];
            sum += w * area * (uh - exact(&x, t)).powi(2);
        }
    }
    Ok(sum.sqrt())
}

/// Norms of `u` at time `t`, measured against `exact` when there is one.
pub fn report(
    mesh: &TriMesh,
    u: &[f64],
    exact: Option<&ExactSolution>,
    t: f64,
) -> Result<NormReport> {
    let (h1_semi, l2) = match exact {
        Some(ex) => (
            h1_seminorm_error(mesh, u, |x, t| (ex.gradient)(x, t), t)?,
            l2_error(mesh, u, |x, t| (ex.value)(x, t), t)?,
        ),
        None => (h1_seminorm(mesh, u)?, f64::NAN),
    };
    Ok(NormReport {
        h1_semi,
        l2,
        against_exact: exact.is_some(),
        t,
        n_elements: mesh.n_elements(),
    })
}
