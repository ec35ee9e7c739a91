//! Transfer of piecewise linear fields between meshes.

use crate::error::{Error, Result};
use crate::mesh::{signed_area, Point, TriMesh};

/// Points this far outside the mesh are clamped onto it.
const CLAMP_TOL: f64 = 1e-9;
/// Barycentric slack accepted as "inside" during the walk.
const INSIDE_TOL: f64 = 1e-12;

/// Point location in a fixed triangulation by neighbour walking, with a
/// brute-force fallback.
pub struct Locator<'a> {
    mesh: &'a TriMesh,
    max_walk: usize,
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let max_walk = 4 * (mesh.n_elements() as f64).sqrt() as usize + 16;
        Locator { mesh, max_walk }
    }

    fn barycentric(&self, k: usize, p: &Point) -> [f64; 3] {
        let [a, b, c] = self.mesh.element_vertices(k);
        let area = signed_area(&a, &b, &c);
        [
            signed_area(p, &b, &c) / area,
            signed_area(&a, p, &c) / area,
            signed_area(&a, &b, p) / area,
        ]
    }

    /// Element containing `p` and the barycentric coordinates of `p` (or of
    /// its closest point when `p` lies just outside the mesh).
    pub fn locate(&self, p: &Point, hint: usize) -> Result<(usize, [f64; 3])> {
        let neighbors = &self.mesh.topology().element_neighbors;
        let mut k = hint.min(self.mesh.n_elements().saturating_sub(1));
        for _ in 0..self.max_walk {
            let lam = self.barycentric(k, p);
            let (i, worst) =
                lam.iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |acc, (i, l)| {
                            if l < acc.1 {
                                (i, l)
                            } else {
                                acc
                            }
                        },
                    );
            if worst >= -INSIDE_TOL {
                return Ok((k, lam));
            }
            match neighbors[k][i] {
                Some(next) => k = next,
                None => break,
            }
        }
        self.brute_force(p)
    }

    fn brute_force(&self, p: &Point) -> Result<(usize, [f64; 3])> {
        let mut best = (f64::INFINITY, 0, [0.0; 3]);
        for k in 0..self.mesh.n_elements() {
            let lam = self.barycentric(k, p);
            if lam.iter().all(|&l| l >= -INSIDE_TOL) {
                return Ok((k, lam));
            }
            let (dist, closest) = closest_point(&self.mesh.element_vertices(k), p);
            if dist < best.0 {
                best = (dist, k, self.barycentric(k, &closest));
            }
        }
        if best.0 <= CLAMP_TOL {
            Ok((best.1, best.2))
        } else {
            Err(Error::InterpolationFailure { x: p.x, y: p.y })
        }
    }
}

/// Distance from `p` to a triangle it lies outside of, and the closest
/// point on the boundary.
fn closest_point(tri: &[Point; 3], p: &Point) -> (f64, Point) {
    let mut best = (f64::INFINITY, tri[0]);
    for i in 0..3 {
        let (a, b) = (tri[i], tri[(i + 1) % 3]);
        let ab = b - a;
        let s = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        let q = a + ab * s;
        let d = (p - q).norm();
        if d < best.0 {
            best = (d, q);
        }
    }
    best
}

/// Evaluates the piecewise linear interpolant of `u_old` on `old_mesh` at
/// every vertex of `new_mesh`.
pub fn interpolate(old_mesh: &TriMesh, u_old: &[f64], new_mesh: &TriMesh) -> Result<Vec<f64>> {
    if u_old.len() != old_mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: old_mesh.n_vertices(),
            got: u_old.len(),
        });
    }
    let same_topology = old_mesh.shares_topology(new_mesh);
    let locator = Locator::new(old_mesh);
    let mut last = 0;
    let mut out = Vec::with_capacity(new_mesh.n_vertices());
    for (i, p) in new_mesh.vertices().iter().enumerate() {
        if same_topology && old_mesh.vertices()[i] == *p {
            out.push(u_old[i]);
            continue;
        }
        let hint = match old_mesh.topology().vertex_elements.get(i) {
            Some(ks) if same_topology && !ks.is_empty() => ks[0],
            _ => last,
        };
        let (k, lam) = locator.locate(p, hint)?;
        last = k;
        let tri = old_mesh.triangles()[k];
        out.push(lam[0] * u_old[tri[0]] + lam[1] * u_old[tri[1]] + lam[2] * u_old[tri[2]]);
    }
    Ok(out)
}
