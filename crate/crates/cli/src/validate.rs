//! Quick oracle checks against the installed solver: stabilization values,
//! exactness on a linear solution, the mesh-energy gradient, manufactured
//! sources, and the temporal order of Crank-Nicolson.

use mmsupg::adapt::{energy, energy_and_gradient, MmpdeConfig};
use mmsupg::assembly::{peclet, tau};
use mmsupg::problems::{example1, example3, heat, steady_linear, HillFlow};
use mmsupg::timestep::Method;
use mmsupg::{run_simulation, Point, ProblemSpec, Result, RunConfig, TriMesh};
use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn stabilization() -> Check {
    let cases = [
        (tau(0.1, 1.0, 1e-4), 0.1),
        (tau(0.1, 1.0, 0.1), 0.1 * (0.5 / 3.0)),
        (tau(0.1, 1.0, 0.0), 0.1),
        (tau(0.1, 0.0, 1e-4), 0.0),
        (peclet(0.1, 1.0, 1e-4), 500.0),
        (peclet(0.1, 1.0, 0.1), 0.5),
    ];
    let worst = cases.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Check {
        name: "stabilization values",
        passed: worst <= 1e-15,
        detail: format!("max deviation {worst:e}"),
    }
}

fn consistency() -> Result<Check> {
    let problem = steady_linear(Point::new(1.0, 0.5), 1e-2);
    let exact = problem
        .exact
        .clone()
        .expect("linear problem has an exact solution");
    let mut worst = 0.0f64;
    for method in Method::ALL {
        let cfg = RunConfig {
            method,
            n: 4,
            dt: 0.01,
            t_final: 1.0,
            init_adapt_cycles: 1,
            ..RunConfig::default()
        };
        let out = run_simulation(&problem, &cfg)?;
        let last = out.final_state();
        for (p, u) in last.mesh.vertices().iter().zip(&last.u) {
            worst = worst.max((u - (exact.value)(p, last.t)).abs());
        }
    }
    Ok(Check {
        name: "linear solution exact",
        passed: worst <= 1e-8,
        detail: format!("max nodal error {worst:e}"),
    })
}

fn random_spd(rng: &mut StdRng) -> Matrix2<f64> {
    let a = Matrix2::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
    );
    a * a.transpose() + Matrix2::identity() * 0.2
}

fn perturbed_mesh(n: usize, rng: &mut StdRng) -> Result<TriMesh> {
    let mesh = TriMesh::uniform(n)?;
    let h = 1.0 / n as f64;
    let verts = mesh
        .vertices()
        .iter()
        .zip(mesh.vertex_kinds())
        .map(|(p, kind)| match kind {
            mmsupg::mesh::VertexKind::Interior => {
                p + Point::new(rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25)) * h
            }
            _ => *p,
        })
        .collect();
    mesh.with_vertices(verts)
}

fn energy_gradient() -> Result<Check> {
    let mut rng = StdRng::seed_from_u64(7);
    let cfg = MmpdeConfig::default();
    let step = 1e-6;
    let mut worst = 0.0f64;
    for instance in 0..20 {
        let mesh = perturbed_mesh(2 + instance % 4, &mut rng)?;
        let tensors: Vec<_> = (0..mesh.n_elements())
            .map(|_| random_spd(&mut rng))
            .collect();
        let (_, grad) = energy_and_gradient(&mesh, &tensors, &cfg)?;
        let scale = grad.iter().map(|g| g.amax()).fold(0.0, f64::max);
        for v in 0..mesh.n_vertices() {
            for c in 0..2 {
                let shifted = |d: f64| -> Result<f64> {
                    let mut verts = mesh.vertices().to_vec();
                    verts[v][c] += d;
                    energy(&mesh.with_vertices(verts)?, &tensors, &cfg)
                };
                let fd = (shifted(step)? - shifted(-step)?) / (2.0 * step);
                worst = worst.max((fd - grad[v][c]).abs() / scale);
            }
        }
    }
    Ok(Check {
        name: "mesh energy gradient",
        passed: worst <= 1e-5,
        detail: format!("max relative error {worst:e}"),
    })
}

/// Fourth-order central difference of `g` at 0.
fn d1(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (g(-2.0 * h) - 8.0 * g(-h) + 8.0 * g(h) - g(2.0 * h)) / (12.0 * h)
}

fn d2(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-g(-2.0 * h) + 16.0 * g(-h) - 30.0 * g(0.0) + 16.0 * g(h) - g(2.0 * h)) / (12.0 * h * h)
}

/// Largest residual of `f = u_t + b·∇u - εΔu` over the points, relative to
/// the size of the operator's terms but never below 1: where every term
/// underflows, differencing noise would otherwise dominate.
fn source_residual(p: &ProblemSpec, points: &[(Point, f64)], h: f64) -> f64 {
    let u = &p.exact.as_ref().expect("manufactured problem").value;
    let mut worst = 0.0f64;
    for (x, t) in points {
        let at = |dx: f64, dy: f64, dt: f64| u(&Point::new(x.x + dx, x.y + dy), t + dt);
        let ut = d1(|s| at(0.0, 0.0, s), h);
        let ux = d1(|s| at(s, 0.0, 0.0), h);
        let uy = d1(|s| at(0.0, s, 0.0), h);
        let lap = d2(|s| at(s, 0.0, 0.0), h) + d2(|s| at(0.0, s, 0.0), h);
        let b = p.flow_at(x, *t);
        let conv = b.x * ux + b.y * uy;
        let scale = ut.abs() + conv.abs() + p.eps * lap.abs();
        let f = (p.source)(x, *t);
        worst = worst.max((f - (ut + conv - p.eps * lap)).abs() / scale.max(1.0));
    }
    worst
}

fn manufactured_sources() -> Result<Check> {
    let mut rng = StdRng::seed_from_u64(11);
    let mut sample = |n: usize, keep: &dyn Fn(&Point, f64) -> bool| {
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let x = Point::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            let t = rng.random_range(0.05..0.5);
            if keep(&x, t) {
                pts.push((x, t));
            }
        }
        pts
    };
    let anywhere = |_: &Point, _: f64| true;
    let off_ramp = |x: &Point, t: f64| (x.x + x.y - t).abs() > 0.1;
    let off_ring =
        |x: &Point, _: f64| ((x.x - 0.5).powi(2) + (x.y - 0.5).powi(2) - 1.0 / 16.0).abs() > 0.02;
    let cases = [
        (example1(10.0, 1e-2)?, sample(100, &anywhere), 1e-4),
        (
            example3(HillFlow::Constant, 1e-2)?,
            sample(100, &anywhere),
            1e-4,
        ),
        (
            example3(HillFlow::TimeDependent, 1e-2)?,
            sample(100, &anywhere),
            1e-4,
        ),
        (example1(100.0, 1e-4)?, sample(100, &off_ramp), 1e-5),
        (
            example3(HillFlow::Constant, 1e-6)?,
            sample(100, &off_ring),
            1e-5,
        ),
    ];
    let worst = cases
        .iter()
        .map(|(p, pts, h)| source_residual(p, pts, *h))
        .fold(0.0, f64::max);
    Ok(Check {
        name: "manufactured sources",
        passed: worst <= 1e-6,
        detail: format!("max relative residual {worst:e}"),
    })
}

fn time_order() -> Result<Check> {
    let problem = heat();
    let finals: Vec<Vec<f64>> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| {
            let cfg = RunConfig {
                method: Method::FmFem,
                n: 8,
                dt,
                t_final: 1.0,
                ..RunConfig::default()
            };
            Ok(run_simulation(&problem, &cfg)?.final_state().u.clone())
        })
        .collect::<Result<_>>()?;
    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let order = (diff(&finals[0], &finals[1]) / diff(&finals[1], &finals[2])).log2();
    Ok(Check {
        name: "Crank-Nicolson order",
        passed: order >= 1.9,
        detail: format!("observed order {order:.3}"),
    })
}

/// Runs every check, printing one line each. Returns whether all passed.
pub fn run_checks() -> Result<bool> {
    let checks = [
        stabilization(),
        consistency()?,
        energy_gradient()?,
        manufactured_sources()?,
        time_order()?,
    ];
    for c in &checks {
        println!(
            "{} {:<24} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    Ok(checks.iter().all(|c| c.passed))
}
