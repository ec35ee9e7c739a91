//! Hessian recovery by local quadratic least-squares fits.

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Coefficients in the fit are only trusted when the patch's design matrix
/// has a singular value ratio above this.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct RecoveredHessian {
    pub hessians: Vec<Matrix2<f64>>,
    /// Vertices whose patch stayed rank deficient; their Hessian is zero.
    pub rank_deficient: usize,
}

/// Fits `c0 + c1 x + c2 y + c3 x² + c4 xy + c5 y²` to the nodal values on
/// each vertex patch (the vertex and its edge neighbours, widened to the
/// second ring when that is too few points or rank deficient) and returns
/// `[[2 c3, c4], [c4, 2 c5]]`.
pub fn recover_hessian(mesh: &TriMesh, u: &[f64]) -> Result<RecoveredHessian> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            got: u.len(),
        });
    }
    let neighbors = &mesh.topology().vertex_neighbors;
    let mut hessians = Vec::with_capacity(mesh.n_vertices());
    let mut rank_deficient = 0;
    let mut patch = Vec::new();
    for v in 0..mesh.n_vertices() {
        patch.clear();
        patch.push(v);
        patch.extend_from_slice(&neighbors[v]);
        let mut fit = if patch.len() >= 6 {
            fit_quadratic(mesh, u, v, &patch)
        } else {
            None
        };
        if fit.is_none() {
            let first_ring = patch.len();
            for i in 1..first_ring {
                patch.extend_from_slice(&neighbors[patch[i]]);
            }
            patch.sort_unstable();
            patch.dedup();
            fit = fit_quadratic(mesh, u, v, &patch);
        }
        match fit {
            Some(h) => hessians.push(h),
            None => {
                rank_deficient += 1;
                hessians.push(Matrix2::zeros());
            }
        }
    }
    if rank_deficient > 0 {
        warn!("hessian recovery: {rank_deficient} rank-deficient patches set to zero");
    }
    Ok(RecoveredHessian {
        hessians,
        rank_deficient,
    })
}

fn fit_quadratic(
    mesh: &TriMesh,
    u: &[f64],
    centre: usize,
    patch: &[usize],
) -> Option<Matrix2<f64>> {
    if patch.len() < 6 {
        return None;
    }
    let c = mesh.vertices()[centre];
    let scale = patch
        .iter()
        .map(|&w| (mesh.vertices()[w] - c).norm())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut a = DMatrix::zeros(patch.len(), 6);
    let mut b = DVector::zeros(patch.len());
    for (row, &w) in patch.iter().enumerate() {
        let d = (mesh.vertices()[w] - c) / scale;
        let r = [1.0, d.x, d.y, d.x * d.x, d.x * d.y, d.y * d.y];
        for (col, value) in r.into_iter().enumerate() {
            a[(row, col)] = value;
        }
        b[row] = u[w];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return None;
    }
    let coef = svd.solve(&b, 0.0).ok()?;
    let s2 = scale * scale;
    let (hxx, hxy, hyy) = (2.0 * coef[3] / s2, coef[4] / s2, 2.0 * coef[5] / s2);
    Some(Matrix2::new(hxx, hxy, hxy, hyy))
}
