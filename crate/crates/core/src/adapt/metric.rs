//! Metric tensors built from recovered Hessians.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// `|H| = Σ |λ_i| v_i v_iᵀ` for a symmetric 2x2 matrix. Semidefinite input
/// is returned up to sign; otherwise the spectral projectors are well
/// conditioned, since `λ_1 - λ_2 = |λ_1| + |λ_2|`.
pub fn abs_symmetric(h: &Matrix2<f64>) -> Matrix2<f64> {
    let (a, b, c) = (h[(0, 0)], 0.5 * (h[(0, 1)] + h[(1, 0)]), h[(1, 1)]);
    let sym = Matrix2::new(a, b, b, c);
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mean + radius, mean - radius);
    if l2 >= 0.0 {
        return sym;
    }
    if l1 <= 0.0 {
        return -sym;
    }
    let p1 = (sym - Matrix2::identity() * l2) / (l1 - l2);
    let p2 = Matrix2::identity() - p1;
    p1 * l1 + p2 * -l2
}

/// `M = det(I + |H|)^{-1/6} (I + |H|)`.
pub fn metric_tensor(h: &Matrix2<f64>) -> Matrix2<f64> {
    let m = Matrix2::identity() + abs_symmetric(h);
    let m = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(0, 1)], m[(1, 1)]);
    m * m.determinant().powf(-1.0 / 6.0)
}

/// Metric at the vertices plus its element averages.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub vertex_tensors: Vec<Matrix2<f64>>,
    pub element_tensors: Vec<Matrix2<f64>>,
}

impl MetricField {
    pub fn new(mesh: &TriMesh, vertex_tensors: Vec<Matrix2<f64>>) -> Result<Self> {
        if vertex_tensors.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_vertices(),
                got: vertex_tensors.len(),
            });
        }
        let (element_tensors, _) = element_metric(mesh, &vertex_tensors);
        Ok(MetricField {
            vertex_tensors,
            element_tensors,
        })
    }

    pub fn identity(mesh: &TriMesh) -> Self {
        MetricField {
            vertex_tensors: vec![Matrix2::identity(); mesh.n_vertices()],
            element_tensors: vec![Matrix2::identity(); mesh.n_elements()],
        }
    }

    pub fn from_hessians(mesh: &TriMesh, hessians: &[Matrix2<f64>]) -> Result<Self> {
        Self::new(mesh, hessians.iter().map(metric_tensor).collect())
    }

    /// Replaces each vertex tensor by the mean over the vertex and its edge
    /// neighbours, `sweeps` times. Means of SPD tensors stay SPD.
    pub fn smoothed(&self, mesh: &TriMesh, sweeps: usize) -> Result<Self> {
        let neighbors = &mesh.topology().vertex_neighbors;
        let mut tensors = self.vertex_tensors.clone();
        for _ in 0..sweeps {
            tensors = neighbors
                .iter()
                .enumerate()
                .map(|(v, ws)| {
                    let sum = ws.iter().fold(tensors[v], |acc, &w| acc + tensors[w]);
                    sum / (ws.len() + 1) as f64
                })
                .collect();
        }
        Self::new(mesh, tensors)
    }

    pub fn sigma(&self, mesh: &TriMesh) -> f64 {
        sigma_h(mesh, &self.element_tensors)
    }
}

/// Element averages of a vertex-linear metric (the mean of the three
/// vertex tensors) and `σ_h = Σ |K| sqrt(det M_K)`.
pub fn element_metric(mesh: &TriMesh, vertex_tensors: &[Matrix2<f64>]) -> (Vec<Matrix2<f64>>, f64) {
    let tensors: Vec<Matrix2<f64>> = mesh
        .triangles()
        .iter()
        .map(|t| (vertex_tensors[t[0]] + vertex_tensors[t[1]] + vertex_tensors[t[2]]) / 3.0)
        .collect();
    let sigma = sigma_h(mesh, &tensors);
    (tensors, sigma)
}

pub fn sigma_h(mesh: &TriMesh, element_tensors: &[Matrix2<f64>]) -> f64 {
    element_tensors
        .iter()
        .enumerate()
        .map(|(k, m)| mesh.signed_area(k) * m.determinant().sqrt())
        .sum()
}

/// Largest ratio of an element's metric volume to the mean,
/// `max_K |K| sqrt(det M_K) / (σ_h / N)`. Equals one for an exactly
/// equidistributed mesh.
pub fn equidistribution_quality(mesh: &TriMesh, element_tensors: &[Matrix2<f64>]) -> f64 {
    let mean = sigma_h(mesh, element_tensors) / mesh.n_elements() as f64;
    element_tensors
        .iter()
        .enumerate()
        .map(|(k, m)| mesh.signed_area(k) * m.determinant().sqrt() / mean)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_hessian_gives_identity() {
        assert_eq!(metric_tensor(&Matrix2::zeros()), Matrix2::identity());
    }

    #[test]
    fn diagonal_hessian() {
        let m = metric_tensor(&Matrix2::new(7.0, 0.0, 0.0, 0.0));
        assert_abs_diff_eq!(
            m,
            Matrix2::new(8f64.powf(5.0 / 6.0), 0.0, 0.0, 8f64.powf(-1.0 / 6.0)),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(m[(0, 0)], 5.65685, epsilon = 1e-5);
        assert_abs_diff_eq!(m[(1, 1)], 0.70711, epsilon = 1e-5);
        let n = metric_tensor(&Matrix2::new(-7.0, 0.0, 0.0, 0.0));
        assert_abs_diff_eq!(m, n, epsilon = 1e-15);
    }

    #[test]
    fn abs_of_rotated_indefinite() {
        // H = R diag(3, -2) Rᵀ  ->  |H| = R diag(3, 2) Rᵀ.
        let (c, s) = (0.6f64, 0.8f64);
        let r = Matrix2::new(c, -s, s, c);
        let h = r * Matrix2::new(3.0, 0.0, 0.0, -2.0) * r.transpose();
        let expected = r * Matrix2::new(3.0, 0.0, 0.0, 2.0) * r.transpose();
        assert_abs_diff_eq!(abs_symmetric(&h), expected, epsilon = 1e-14);
    }

    #[test]
    fn near_equal_eigenvalues_stay_finite() {
        // Recovered Hessians of radially symmetric data look like this.
        let h = Matrix2::new(-4096.000000000001, 0.0, 0.0, -4096.000000000002);
        assert_eq!(abs_symmetric(&h), -h);
        let m = metric_tensor(&h);
        assert!(m.iter().all(|v| v.is_finite()) && m.determinant() > 0.0);
        let h = Matrix2::new(7.0, 1e-13, 1e-13, 7.0 + 1e-13);
        assert_eq!(abs_symmetric(&h), h);
    }

    #[test]
    fn metric_is_spd_with_floor() {
        for (a, b, c) in [
            (1e4, -3e3, -2e2),
            (0.0, 5.0, 0.0),
            (-1.0, 0.0, -1.0),
            (1e-8, 0.0, 0.0),
        ] {
            let h = Matrix2::new(a, b, b, c);
            let m = metric_tensor(&h);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
            let eig = m.symmetric_eigenvalues();
            let floor = (Matrix2::identity() + abs_symmetric(&h))
                .determinant()
                .powf(-1.0 / 6.0);
            assert!(eig.min() > 0.0);
            assert!(eig.min() >= floor * (1.0 - 1e-12));
        }
    }

    #[test]
    fn element_averages_and_sigma() {
        let mesh = TriMesh::uniform(3).unwrap();
        let (tensors, sigma) = element_metric(&mesh, &vec![Matrix2::identity(); mesh.n_vertices()]);
        assert!(tensors.iter().all(|m| *m == Matrix2::identity()));
        assert_abs_diff_eq!(sigma, 1.0, epsilon = 1e-14);
        let (_, sigma) = element_metric(&mesh, &vec![Matrix2::identity() * 4.0; mesh.n_vertices()]);
        assert_abs_diff_eq!(sigma, 4.0, epsilon = 1e-14);

        let single = TriMesh::from_parts(
            vec![[0.0, 0.0].into(), [1.0, 0.0].into(), [0.0, 1.0].into()],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let diag = Matrix2::new(4.0, 0.0, 0.0, 1.0);
        let (tensors, _) =
            element_metric(&single, &[Matrix2::identity(), Matrix2::identity(), diag]);
        assert_abs_diff_eq!(
            tensors[0],
            Matrix2::new(2.0, 0.0, 0.0, 1.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn uniform_mesh_is_equidistributed_for_constant_metric() {
        let mesh = TriMesh::uniform(4).unwrap();
        let m = MetricField::new(
            &mesh,
            vec![Matrix2::new(3.0, 1.0, 1.0, 2.0); mesh.n_vertices()],
        )
        .unwrap();
        assert_abs_diff_eq!(
            equidistribution_quality(&mesh, &m.element_tensors),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn smoothing_keeps_constants_and_spreads_peaks() {
        let mesh = TriMesh::uniform(4).unwrap();
        let c = Matrix2::new(3.0, 1.0, 1.0, 2.0);
        let m = MetricField::new(&mesh, vec![c; mesh.n_vertices()]).unwrap();
        let s = m.smoothed(&mesh, 3).unwrap();
        for t in &s.vertex_tensors {
            assert_abs_diff_eq!(*t, c, epsilon = 1e-14);
        }

        let centre = 12; // (0.5, 0.5) on the 5x5 vertex grid
        let mut vt = vec![Matrix2::identity(); mesh.n_vertices()];
        vt[centre] = Matrix2::identity() * 8.0;
        let m = MetricField::new(&mesh, vt).unwrap();
        let s = m.smoothed(&mesh, 1).unwrap();
        let deg = mesh.topology().vertex_neighbors[centre].len() as f64;
        assert_abs_diff_eq!(
            s.vertex_tensors[centre][(0, 0)],
            (8.0 + deg) / (deg + 1.0),
            epsilon = 1e-14
        );
        for &w in &mesh.topology().vertex_neighbors[centre] {
            assert!(s.vertex_tensors[w][(0, 0)] > 1.0);
        }
        assert_eq!(
            m.smoothed(&mesh, 0).unwrap().vertex_tensors,
            m.vertex_tensors
        );
    }
}
