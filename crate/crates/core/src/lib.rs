//! Fixed- and moving-mesh Galerkin and SUPG finite element solvers for the
//! time-dependent convection-diffusion equation on the unit square.
//!
//! The moving-mesh methods relocate the vertices of a uniform triangulation
//! by a gradient flow of a metric-based mesh energy (MMPDE), with the metric
//! built from a recovered Hessian of the current solution. Each time step
//! moves the mesh, interpolates the solution onto it, and then takes a
//! Crank-Nicolson step of the physical equation.

pub mod adapt;
pub mod assembly;
pub mod error;
pub mod io;
pub mod mesh;
pub mod norms;
pub mod problems;
pub mod quadrature;
pub mod sparse;
pub mod timestep;

pub use error::{Error, Result};
pub use mesh::{Point, TriMesh};
pub use problems::ProblemSpec;
pub use timestep::{run_simulation, Method, RunConfig, RunOutput, SolutionState};
