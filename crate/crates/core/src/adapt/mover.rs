//! Explicit pseudo-time integration of the MMPDE gradient flow
//! `dx_i/dτ = -(P_i / γ) ∂I/∂x_i`.

use log::debug;
use nalgebra::Matrix2;

use super::energy::{constrain, energy, field_element_energies_and_gradient};
use super::interpolate::Locator;
use super::metric::element_metric;
use super::{MetricField, MmpdeConfig};
use crate::assembly::basis_gradients;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh, VertexKind, DEGENERATE_AREA};

const MAX_HALVINGS: usize = 20;

/// Outcome of one [`mmpde_step`] call.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub energy_before: f64,
    pub energy_after: f64,
    /// Sub-steps that moved the mesh.
    pub accepted: usize,
    /// Total step halvings across all sub-steps.
    pub halvings: usize,
    /// Smallest element area of the returned mesh.
    pub min_area: f64,
}

/// `P = det(M)^{(p-1)/2}`; makes the flow invariant under `M -> cM`.
pub fn balance_factor(m: &Matrix2<f64>, p: f64) -> f64 {
    m.determinant().powf(0.5 * (p - 1.0))
}

struct Flow {
    energy: f64,
    velocity: Vec<Point>,
    /// Energy curvature estimate per vertex, in the units of the velocity.
    stiffness: Vec<f64>,
}

/// The vertex metric of the mesh a step starts from, extended to the whole
/// domain by linear interpolation so it can follow moving vertices.
struct BackgroundMetric<'a> {
    mesh: &'a TriMesh,
    tensors: &'a [Matrix2<f64>],
    locator: Locator<'a>,
    /// Per-element gradients `[∂M/∂x, ∂M/∂y]` of the interpolant.
    slopes: Vec<[Matrix2<f64>; 2]>,
}

impl<'a> BackgroundMetric<'a> {
    fn new(mesh: &'a TriMesh, tensors: &'a [Matrix2<f64>]) -> Self {
        let slopes = mesh
            .triangles()
            .iter()
            .enumerate()
            .map(|(k, tri)| {
                let g = basis_gradients(&mesh.element_vertices(k), mesh.signed_area(k));
                let mut s = [Matrix2::zeros(); 2];
                for (gi, &v) in g.iter().zip(tri) {
                    s[0] += tensors[v] * gi.x;
                    s[1] += tensors[v] * gi.y;
                }
                s
            })
            .collect();
        BackgroundMetric {
            mesh,
            tensors,
            locator: Locator::new(mesh),
            slopes,
        }
    }

    /// Metric values and slopes at the vertices of a relocated mesh;
    /// `hints` carries the last containing element of each vertex.
    fn sample(
        &self,
        moved: &TriMesh,
        hints: &mut [usize],
    ) -> Result<(Vec<Matrix2<f64>>, Vec<[Matrix2<f64>; 2]>)> {
        let mut values = Vec::with_capacity(moved.n_vertices());
        let mut slopes = Vec::with_capacity(moved.n_vertices());
        for (i, p) in moved.vertices().iter().enumerate() {
            if *p == self.mesh.vertices()[i] {
                values.push(self.tensors[i]);
                slopes.push(self.slopes[hints[i]]);
                continue;
            }
            let (k, lam) = self.locator.locate(p, hints[i])?;
            hints[i] = k;
            let tri = self.mesh.triangles()[k];
            values.push(
                self.tensors[tri[0]] * lam[0]
                    + self.tensors[tri[1]] * lam[1]
                    + self.tensors[tri[2]] * lam[2],
            );
            slopes.push(self.slopes[k]);
        }
        Ok((values, slopes))
    }

    /// Energy and admissible velocity `-(P_i/γ) ∂I/∂x_i` on `moved`.
    fn velocity(&self, moved: &TriMesh, hints: &mut [usize], cfg: &MmpdeConfig) -> Result<Flow> {
        let (values, slopes) = self.sample(moved, hints)?;
        let (elements, mut grad) =
            field_element_energies_and_gradient(moved, &values, &slopes, cfg)?;
        constrain(moved, &mut grad);
        // Curvature of the energy along a vertex displacement is about
        // Σ e_K / h_K² over the vertex's elements, h_K the element altitude.
        let mut stiffness = vec![0.0; moved.n_vertices()];
        for (k, (tri, e)) in moved.triangles().iter().zip(&elements).enumerate() {
            let h = 2.0 * moved.signed_area(k) / moved.diam(k);
            for &v in tri {
                stiffness[v] += e / (h * h);
            }
        }
        for ((g, m), s) in grad.iter_mut().zip(&values).zip(stiffness.iter_mut()) {
            let mobility = balance_factor(m, cfg.p) / cfg.gamma;
            *g *= -mobility;
            *s *= mobility;
        }
        Ok(Flow {
            energy: elements.iter().sum(),
            velocity: grad,
            stiffness,
        })
    }

    fn energy(&self, moved: &TriMesh, hints: &mut [usize], cfg: &MmpdeConfig) -> Result<f64> {
        let (values, _) = self.sample(moved, hints)?;
        let (tensors, _) = element_metric(moved, &values);
        energy(moved, &tensors, cfg)
    }
}

/// Energy and the admissible mesh velocity `-(P_i/γ) ∂I/∂x_i` at the start
/// of a step, with the metric following the vertices.
pub fn mmpde_velocity(
    mesh: &TriMesh,
    metric: &MetricField,
    cfg: &MmpdeConfig,
) -> Result<(f64, Vec<Point>)> {
    if metric.vertex_tensors.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            got: metric.vertex_tensors.len(),
        });
    }
    let background = BackgroundMetric::new(mesh, &metric.vertex_tensors);
    let mut hints = initial_hints(mesh);
    let flow = background.velocity(mesh, &mut hints, cfg)?;
    Ok((flow.energy, flow.velocity))
}

fn initial_hints(mesh: &TriMesh) -> Vec<usize> {
    mesh.topology()
        .vertex_elements
        .iter()
        .map(|ks| ks.first().copied().unwrap_or(0))
        .collect()
}

/// Smallest altitude among the elements around each vertex.
fn vertex_altitudes(mesh: &TriMesh) -> Vec<f64> {
    let altitude: Vec<f64> = (0..mesh.n_elements())
        .map(|k| 2.0 * mesh.signed_area(k) / mesh.diam(k))
        .collect();
    mesh.topology()
        .vertex_elements
        .iter()
        .map(|ks| {
            ks.iter()
                .map(|&k| altitude[k])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Pseudo-time step of each vertex: a diagonally preconditioned step,
/// `step_fraction / stiffness`, capped so no vertex moves more than
/// `max_move` of its altitude. A single global step would be set by the
/// stiffest vertex and leave the rest of the mesh nearly frozen.
fn vertex_steps(mesh: &TriMesh, flow: &Flow, cfg: &MmpdeConfig) -> Vec<f64> {
    flow.velocity
        .iter()
        .zip(&flow.stiffness)
        .zip(vertex_altitudes(mesh))
        .map(|((v, k), h)| {
            let speed = v.norm();
            if speed == 0.0 || *k == 0.0 {
                return 0.0;
            }
            (cfg.step_fraction / k).min(cfg.max_move * h / speed)
        })
        .collect()
}

fn displaced(mesh: &TriMesh, velocity: &[Point], steps: &[f64]) -> TriMesh {
    let verts = mesh
        .vertices()
        .iter()
        .zip(velocity.iter().zip(steps))
        .zip(mesh.vertex_kinds())
        .map(|((x, (v, d_tau)), kind)| {
            let mut y = x + v * *d_tau;
            if let VertexKind::Edge(side) = kind {
                let free = 1 - side.fixed_axis();
                y[side.fixed_axis()] = x[side.fixed_axis()];
                y[free] = y[free].clamp(0.0, 1.0);
            }
            y
        })
        .collect();
    mesh.with_vertices_unchecked(verts)
}

/// Advances the mesh by `cfg.sub_steps` explicit Euler steps of the mesh
/// equation, each vertex with its own step. The metric is a fixed function
/// of position: the vertex tensors on the input mesh, linearly interpolated,
/// so vertices moving
/// into regions of large metric carry it with them and the flow drives the
/// mesh toward equidistribution.
///
/// A sub-step that inverts an element or raises the energy is halved and
/// retried. If the energy cannot be lowered within the halving budget the
/// mesh is treated as stationary and returned as is; an inversion that
/// persists through every halving is an adaptation failure.
pub fn mmpde_step(
    mesh: &TriMesh,
    metric: &MetricField,
    cfg: &MmpdeConfig,
) -> Result<(TriMesh, StepReport)> {
    cfg.validate()?;
    if metric.vertex_tensors.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            got: metric.vertex_tensors.len(),
        });
    }
    let background = BackgroundMetric::new(mesh, &metric.vertex_tensors);
    let mut hints = initial_hints(mesh);
    let mut current = mesh.clone();
    let mut flow = background.velocity(&current, &mut hints, cfg)?;
    let energy_before = flow.energy;
    let mut e_cur = energy_before;
    let mut accepted = 0;
    let mut halvings = 0;

    'outer: for _ in 0..cfg.sub_steps {
        if flow.velocity.iter().all(|v| *v == Point::zeros()) {
            break;
        }
        let mut steps = match cfg.d_tau {
            Some(d) => vec![d; flow.velocity.len()],
            None => vertex_steps(&current, &flow, cfg),
        };
        let mut tries = 0;
        loop {
            let trial = displaced(&current, &flow.velocity, &steps);
            let inverted = trial.min_area() <= DEGENERATE_AREA;
            let mut trial_hints = hints.clone();
            let e_trial = if inverted {
                None
            } else {
                Some(background.energy(&trial, &mut trial_hints, cfg)?)
            };
            match e_trial {
                Some(e) if e <= e_cur => {
                    current = trial;
                    hints = trial_hints;
                    e_cur = e;
                    accepted += 1;
                    break;
                }
                _ if tries == MAX_HALVINGS => {
                    if inverted {
                        return Err(Error::AdaptationFailure {
                            step: 0,
                            reason: format!(
                                "element inversion persists after {MAX_HALVINGS} step halvings"
                            ),
                        });
                    }
                    debug!("mmpde: energy stationary after {accepted} sub-steps");
                    break 'outer;
                }
                _ => {
                    steps.iter_mut().for_each(|s| *s *= 0.5);
                    tries += 1;
                    halvings += 1;
                }
            }
        }
        flow = background.velocity(&current, &mut hints, cfg)?;
    }

    let min_area = current.min_area();
    Ok((
        current,
        StepReport {
            energy_before,
            energy_after: e_cur,
            accepted,
            halvings,
            min_area,
        },
    ))
}
