//! Benchmark problems: flow fields, diffusivity, sources, boundary and
//! initial data, and exact solutions where they exist.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::mesh::Point;

pub type ScalarFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point, f64) -> Point + Send + Sync>;
/// `J[(k, l)] = d b_k / d x_l`.
pub type MatrixFn = Arc<dyn Fn(&Point, f64) -> Matrix2<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Dirichlet data from the exact solution on the whole boundary.
    DirichletFromExact,
    /// `u = 0` on inflow edges, homogeneous Neumann on outflow edges.
    InflowDirichletZero,
    /// `u = 0` on the whole boundary.
    DirichletZero,
}

#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarFn,
    pub gradient: VectorFn,
}

/// The convection-diffusion problem `u_t + b·∇u - ε Δu = f` on the unit
/// square.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub eps: f64,
    pub flow: VectorFn,
    pub flow_jacobian: MatrixFn,
    pub source: ScalarFn,
    pub bc: BoundaryCondition,
    pub initial: ScalarFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("eps", &self.eps)
            .field("bc", &self.bc)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "diffusivity must be non-negative, got {}",
                self.eps
            )));
        }
        if self.bc == BoundaryCondition::DirichletFromExact && self.exact.is_none() {
            return Err(Error::InvalidArgument(format!(
                "problem {} takes Dirichlet data from an exact solution it does not have",
                self.name
            )));
        }
        Ok(())
    }

    pub fn flow_at(&self, p: &Point, t: f64) -> Point {
        (self.flow)(p, t)
    }

    /// Boundary value at `p` for the Dirichlet part of the boundary.
    pub fn dirichlet_value(&self, p: &Point, t: f64) -> f64 {
        match (&self.bc, &self.exact) {
            (BoundaryCondition::DirichletFromExact, Some(exact)) => (exact.value)(p, t),
            _ => 0.0,
        }
    }
}

fn constant_flow(b: Point) -> (VectorFn, MatrixFn) {
    (Arc::new(move |_, _| b), Arc::new(|_, _| Matrix2::zeros()))
}

/// Stable evaluation of `1 / (1 + e^z)`.
fn logistic_complement(z: f64) -> f64 {
    0.5 * (1.0 - (0.5 * z).tanh())
}

/// Traveling layer `u = (1 + exp(C(x + y - t)))^{-1}` with `b = (1, 1)`.
pub fn example1(c: f64, eps: f64) -> Result<ProblemSpec> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sharpness C must be positive, got {c}"
        )));
    }
    let (flow, flow_jacobian) = constant_flow(Point::new(1.0, 1.0));
    let value: ScalarFn = Arc::new(move |p, t| logistic_complement(c * (p.x + p.y - t)));
    let gradient: VectorFn = Arc::new(move |p, t| {
        let s = logistic_complement(c * (p.x + p.y - t));
        let d = -c * s * (1.0 - s);
        Point::new(d, d)
    });
    // With s = (1 + e^z)^{-1}: e^z s^2 = s(1 - s) and (e^z - 1) s = 1 - 2s.
    let source: ScalarFn = Arc::new(move |p, t| {
        let s = logistic_complement(c * (p.x + p.y - t));
        let w = s * (1.0 - s);
        -c * w - 2.0 * eps * c * c * w * (1.0 - 2.0 * s)
    });
    let initial = {
        let value = Arc::clone(&value);
        Arc::new(move |p: &Point, _| value(p, 0.0))
    };
    let problem = ProblemSpec {
        name: "example1".into(),
        eps,
        flow,
        flow_jacobian,
        source,
        bc: BoundaryCondition::DirichletFromExact,
        initial,
        exact: Some(ExactSolution { value, gradient }),
    };
    problem.validate()?;
    Ok(problem)
}

/// Convected cylinder of radius 0.2 centred at (0.25, 0.25) with
/// `b = (1, 0.7002075)`, zero inflow data and free outflow.
pub fn example2(eps: f64) -> Result<ProblemSpec> {
    let (flow, flow_jacobian) = constant_flow(Point::new(1.0, 0.7002075));
    let centre = Point::new(0.25, 0.25);
    let problem = ProblemSpec {
        name: "example2".into(),
        eps,
        flow,
        flow_jacobian,
        source: Arc::new(|_, _| 0.0),
        bc: BoundaryCondition::InflowDirichletZero,
        initial: Arc::new(move |p, _| if (p - centre).norm() <= 0.2 { 1.0 } else { 0.0 }),
        exact: None,
    };
    problem.validate()?;
    Ok(problem)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HillFlow {
    /// `b = (2, 3)`.
    Constant,
    /// `b = (y - t, x - t)`.
    TimeDependent,
}

/// Pulsating hill with a circular interior layer of width `sqrt(eps)`:
/// `u = 16 sin(πt) x(1-x) y(1-y) (1/2 + atan(2 eps^{-1/2} (1/16 - |x - c|^2)) / π)`.
pub fn example3(flow: HillFlow, eps: f64) -> Result<ProblemSpec> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "example3 needs a positive diffusivity, got {eps}"
        )));
    }
    let hill = Hill {
        k: 2.0 / eps.sqrt(),
    };
    let (flow_fn, flow_jacobian): (VectorFn, MatrixFn) = match flow {
        HillFlow::Constant => constant_flow(Point::new(2.0, 3.0)),
        HillFlow::TimeDependent => (
            Arc::new(|p, t| Point::new(p.y - t, p.x - t)),
            Arc::new(|_, _| Matrix2::new(0.0, 1.0, 1.0, 0.0)),
        ),
    };
    let value: ScalarFn = Arc::new(move |p, t| 16.0 * (PI * t).sin() * hill.eval(p).value);
    let gradient: VectorFn = Arc::new(move |p, t| {
        let h = hill.eval(p);
        16.0 * (PI * t).sin() * Point::new(h.dx, h.dy)
    });
    let source: ScalarFn = {
        let b = Arc::clone(&flow_fn);
        Arc::new(move |p, t| {
            let h = hill.eval(p);
            let s = 16.0 * (PI * t).sin();
            let u_t = 16.0 * PI * (PI * t).cos() * h.value;
            let grad = s * Point::new(h.dx, h.dy);
            u_t + b(p, t).dot(&grad) - eps * s * h.laplacian
        })
    };
    let name = match flow {
        HillFlow::Constant => "example3",
        HillFlow::TimeDependent => "example3-rotating",
    };
    let problem = ProblemSpec {
        name: name.into(),
        eps,
        flow: flow_fn,
        flow_jacobian,
        source,
        bc: BoundaryCondition::DirichletZero,
        initial: Arc::new(|_, _| 0.0),
        exact: Some(ExactSolution { value, gradient }),
    };
    problem.validate()?;
    Ok(problem)
}

/// Spatial part of the hill, `x(1-x) y(1-y) A(x, y)`, with derivatives.
#[derive(Clone, Copy)]
struct Hill {
    k: f64,
}

struct HillEval {
    value: f64,
    dx: f64,
    dy: f64,
    laplacian: f64,
}

impl Hill {
    const R2: f64 = 0.25 * 0.25;

    fn eval(&self, p: &Point) -> HillEval {
        let (x, y) = (p.x, p.y);
        let (bx, by) = (x * (1.0 - x), y * (1.0 - y));
        let poly = bx * by;
        let (poly_x, poly_y) = ((1.0 - 2.0 * x) * by, bx * (1.0 - 2.0 * y));
        let (poly_xx, poly_yy) = (-2.0 * by, -2.0 * bx);

        let (cx, cy) = (x - 0.5, y - 0.5);
        let g = self.k * (Self::R2 - cx * cx - cy * cy);
        let (g_x, g_y, g_xx) = (-2.0 * self.k * cx, -2.0 * self.k * cy, -2.0 * self.k);
        let d = 1.0 / (1.0 + g * g);
        let a = 0.5 + g.atan() / PI;
        let (a_x, a_y) = (d * g_x / PI, d * g_y / PI);
        let a_xx = (d * g_xx - 2.0 * g * d * d * g_x * g_x) / PI;
        let a_yy = (d * g_xx - 2.0 * g * d * d * g_y * g_y) / PI;

        HillEval {
            value: poly * a,
            dx: poly_x * a + poly * a_x,
            dy: poly_y * a + poly * a_y,
            laplacian: poly_xx * a
                + 2.0 * poly_x * a_x
                + poly * a_xx
                + poly_yy * a
                + 2.0 * poly_y * a_y
                + poly * a_yy,
        }
    }
}

/// Heat equation (`b = 0`, `ε = 1`) with the smooth manufactured solution
/// `u = sin(πx) sin(πy) (1 + sin(πt))`.
pub fn heat() -> ProblemSpec {
    let (flow, flow_jacobian) = constant_flow(Point::zeros());
    let shape = |p: &Point| (PI * p.x).sin() * (PI * p.y).sin();
    let value: ScalarFn = Arc::new(move |p, t| shape(p) * (1.0 + (PI * t).sin()));
    let gradient: VectorFn = Arc::new(|p, t| {
        let a = 1.0 + (PI * t).sin();
        Point::new(
            PI * (PI * p.x).cos() * (PI * p.y).sin(),
            PI * (PI * p.x).sin() * (PI * p.y).cos(),
        ) * a
    });
    ProblemSpec {
        name: "heat".into(),
        eps: 1.0,
        flow,
        flow_jacobian,
        source: Arc::new(move |p, t| {
            shape(p) * (PI * (PI * t).cos() + 2.0 * PI * PI * (1.0 + (PI * t).sin()))
        }),
        bc: BoundaryCondition::DirichletFromExact,
        initial: Arc::new(move |p, _| shape(p)),
        exact: Some(ExactSolution { value, gradient }),
    }
}

/// Linear steady solution `u = x + y` under a constant flow: an exact
/// solution of every discretisation here.
pub fn steady_linear(b: Point, eps: f64) -> ProblemSpec {
    let (flow, flow_jacobian) = constant_flow(b);
    let value: ScalarFn = Arc::new(|p, _| p.x + p.y);
    ProblemSpec {
        name: "steady-linear".into(),
        eps,
        flow,
        flow_jacobian,
        source: Arc::new(move |_, _| b.x + b.y),
        bc: BoundaryCondition::DirichletFromExact,
        initial: Arc::clone(&value),
        exact: Some(ExactSolution {
            value,
            gradient: Arc::new(|_, _| Point::new(1.0, 1.0)),
        }),
    }
}

/// Looks up a benchmark by CLI name.
pub fn by_name(name: &str, c: f64, eps: f64, flow: HillFlow) -> Result<ProblemSpec> {
    match name {
        "example1" => example1(c, eps),
        "example2" => example2(eps),
        "example3" => example3(flow, eps),
        "heat" => Ok(heat()),
        other => Err(Error::InvalidArgument(format!("unknown problem {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn example1_on_the_layer() {
        let p = example1(100.0, 1e-4).unwrap();
        let exact = p.exact.as_ref().unwrap();
        for (x, t) in [(0.3, 0.5), (0.0, 0.0), (0.25, 0.75)] {
            let q = Point::new(x, t - x);
            assert_abs_diff_eq!((exact.value)(&q, t), 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!((p.source)(&q, t), -100.0 / 4.0, epsilon = 1e-12);
        }
        // No overflow far from the layer.
        let far = (exact.value)(&Point::new(1.0, 1.0), 0.0);
        assert!(far >= 0.0 && far < 1e-80);
        assert_eq!((exact.value)(&Point::new(0.0, 0.0), 0.5), 1.0);
    }

    #[test]
    fn example1_rejects_bad_c() {
        assert!(example1(0.0, 1e-4).is_err());
    }

    #[test]
    fn example2_cylinder() {
        let p = example2(1e-4).unwrap();
        assert_eq!((p.initial)(&Point::new(0.25, 0.25), 0.0), 1.0);
        assert_eq!((p.initial)(&Point::new(0.9, 0.9), 0.0), 0.0);
        assert_eq!((p.initial)(&Point::new(0.45, 0.25), 0.0), 1.0);
        assert_eq!((p.initial)(&Point::new(0.25, 0.05), 0.0), 1.0);
        assert_eq!(p.bc, BoundaryCondition::InflowDirichletZero);
        assert!(p.exact.is_none());
        assert_eq!(p.dirichlet_value(&Point::new(0.0, 0.3), 0.2), 0.0);
    }

    #[test]
    fn example3_values() {
        let p = example3(HillFlow::Constant, 1e-6).unwrap();
        let u = &p.exact.as_ref().unwrap().value;
        for q in [Point::new(0.3, 0.7), Point::new(0.5, 0.5)] {
            assert_eq!(u(&q, 0.0), 0.0);
        }
        for (y, t) in [(0.3, 0.2), (0.9, 0.5)] {
            assert_abs_diff_eq!(u(&Point::new(0.0, y), t), 0.0, epsilon = 1e-300);
        }
        let centre = u(&Point::new(0.5, 0.5), 0.5);
        let expected = 0.5 + 125f64.atan() / PI;
        assert_abs_diff_eq!(centre, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(centre, 0.9974536, epsilon = 1e-7);
        assert!(example3(HillFlow::Constant, 0.0).is_err());
    }

    #[test]
    fn flows_are_divergence_free() {
        let p = Point::new(0.3, 0.8);
        for problem in [
            example1(100.0, 1e-4).unwrap(),
            example2(0.0).unwrap(),
            example3(HillFlow::Constant, 1e-6).unwrap(),
            example3(HillFlow::TimeDependent, 1e-6).unwrap(),
        ] {
            let j = (problem.flow_jacobian)(&p, 0.37);
            assert_eq!(j.trace(), 0.0, "{}", problem.name);
        }
    }

    #[test]
    fn flow_jacobian_matches_differences() {
        let problem = example3(HillFlow::TimeDependent, 1e-6).unwrap();
        let (p, t, h) = (Point::new(0.2, 0.6), 0.3, 1e-6);
        let j = (problem.flow_jacobian)(&p, t);
        for l in 0..2 {
            let mut e = Point::zeros();
            e[l] = h;
            let d = ((problem.flow)(&(p + e), t) - (problem.flow)(&(p - e), t)) / (2.0 * h);
            for k in 0..2 {
                assert_abs_diff_eq!(j[(k, l)], d[k], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn dirichlet_from_exact_requires_exact() {
        let mut p = heat();
        p.exact = None;
        assert!(p.validate().is_err());
        let mut q = example2(0.0).unwrap();
        q.eps = -1.0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(
            by_name("example2", 100.0, 0.0, HillFlow::Constant)
                .unwrap()
                .name,
            "example2"
        );
        assert!(by_name("example9", 100.0, 0.0, HillFlow::Constant).is_err());
    }
}
