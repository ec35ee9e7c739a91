//! Metric-driven mesh movement: Hessian recovery, metric tensors, the mesh
//! energy and its gradient flow, and mesh-to-mesh interpolation.

mod energy;
mod hessian;
mod interpolate;
mod metric;
mod mover;

pub use energy::{
    constrain, energy, energy_and_gradient, energy_gradient, field_energy_and_gradient,
};
pub use hessian::{recover_hessian, RecoveredHessian};
pub use interpolate::{interpolate, Locator};
pub use metric::{
    abs_symmetric, element_metric, equidistribution_quality, metric_tensor, sigma_h, MetricField,
};
pub use mover::{balance_factor, mmpde_step, mmpde_velocity, StepReport};

use crate::error::{Error, Result};

/// Parameters of the mesh energy and its pseudo-time integration.
#[derive(Clone, Debug, PartialEq)]
pub struct MmpdeConfig {
    /// Balance between alignment and equidistribution, `0 < alpha <= 1/2`.
    pub alpha: f64,
    /// Energy exponent, `p > 1`.
    pub p: f64,
    /// Mesh time scale.
    pub gamma: f64,
    /// Pseudo-time steps per call.
    pub sub_steps: usize,
    /// Fixed pseudo-time step for every vertex. `None` gives each vertex
    /// the step `step_fraction / stiffness`, where the stiffness estimates
    /// the energy curvature around it; `P_i / γ` then cancels, so `gamma`
    /// only matters with a fixed step.
    pub d_tau: Option<f64>,
    /// Fraction of a diagonal Newton step taken per sub-step, `0 < f <= 1`.
    pub step_fraction: f64,
    /// Largest vertex displacement per sub-step, as a fraction of the
    /// smallest altitude among the vertex's elements.
    pub max_move: f64,
    /// Neighbour-averaging sweeps applied to the vertex metric before it
    /// drives the mesh.
    pub metric_smoothing: usize,
}

impl Default for MmpdeConfig {
    fn default() -> Self {
        MmpdeConfig {
            alpha: 1.0 / 3.0,
            p: 1.5,
            gamma: 0.1,
            sub_steps: 2,
            d_tau: None,
            step_fraction: 0.2,
            max_move: 0.2,
            metric_smoothing: 5,
        }
    }
}

impl MmpdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1/2], got {}",
                self.alpha
            )));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "p must exceed 1, got {}",
                self.p
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if let Some(d) = self.d_tau {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "d_tau must be positive, got {d}"
                )));
            }
        }
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "step_fraction must lie in (0, 1], got {}",
                self.step_fraction
            )));
        }
        if !(self.max_move > 0.0 && self.max_move < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "max_move must lie in (0, 1), got {}",
                self.max_move
            )));
        }
        Ok(())
    }
}
