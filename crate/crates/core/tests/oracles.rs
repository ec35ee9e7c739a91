mod common;

use common::{d1, nodal, perturbed_mesh, random_spd};
use mmsupg::adapt::{field_energy_and_gradient, MmpdeConfig};
use mmsupg::assembly::{assemble, basis_gradients};
use mmsupg::problems::{example1, example3, heat, steady_linear, HillFlow};
use mmsupg::sparse::relative_residual;
use mmsupg::{Point, ProblemSpec, TriMesh};
use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Plain Galerkin mass and operator built from closed-form P1 integrals.
/// The flow must be linear so that `∫ b φ_i = Σ_k b(x_k) ∫ φ_k φ_i`.
fn reference_galerkin(
    mesh: &TriMesh,
    problem: &ProblemSpec,
    t: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = mesh.n_vertices();
    let mut mass = vec![vec![0.0; n]; n];
    let mut op = vec![vec![0.0; n]; n];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.element_vertices(k);
        let area = mesh.signed_area(k);
        let g = basis_gradients(&p, area);
        let b: Vec<Point> = p.iter().map(|x| (problem.flow)(x, t)).collect();
        for i in 0..3 {
            // ∫ b φ_i over the element.
            let mut b_i = Point::zeros();
            for (kk, bk) in b.iter().enumerate() {
                b_i += bk * area / 12.0 * if kk == i { 2.0 } else { 1.0 };
            }
            for j in 0..3 {
                let m = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                mass[tri[i]][tri[j]] += m;
                op[tri[i]][tri[j]] += b_i.dot(&g[j]) + problem.eps * area * g[i].dot(&g[j]);
            }
        }
    }
    (mass, op)
}

#[test]
fn galerkin_assembly_matches_closed_form_integrals() {
    let mut rng = StdRng::seed_from_u64(1);
    let problems = [
        steady_linear(Point::new(1.0, -0.4), 0.05),
        example3(HillFlow::TimeDependent, 1e-2).unwrap(),
        example1(100.0, 1e-4).unwrap(),
    ];
    for instance in 0..12 {
        let mesh = perturbed_mesh(2 + instance % 4, 0.3, &mut rng);
        let problem = &problems[instance % problems.len()];
        let t = rng.random_range(0.0..0.5);
        let sys = assemble(&mesh, problem, t, false).unwrap();
        let (mass, op) = reference_galerkin(&mesh, problem, t);
        let scale = op.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..mesh.n_vertices() {
            for j in 0..mesh.n_vertices() {
                assert!(
                    (sys.mass.get(i, j) - mass[i][j]).abs() <= 1e-14,
                    "mass ({i},{j})"
                );
                assert!(
                    (sys.operator.get(i, j) - op[i][j]).abs() <= 1e-12 * scale,
                    "operator ({i},{j})"
                );
            }
        }
        assert_eq!(
            sys.stabilization.tau.iter().copied().fold(0.0, f64::max),
            0.0
        );
    }
}

#[test]
fn steady_linear_solution_solves_the_assembled_system() {
    let mut rng = StdRng::seed_from_u64(2);
    for instance in 0..10 {
        let mesh = perturbed_mesh(3 + instance % 3, 0.3, &mut rng);
        let b = Point::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let eps = [1.0, 1e-2, 1e-6, 0.0][instance % 4];
        let problem = steady_linear(b, eps);
        let u = nodal(&mesh, |p| p.x + p.y);
        for supg in [false, true] {
            let sys = assemble(&mesh, &problem, 0.0, supg).unwrap();
            let mut a = sys.operator.clone();
            let mut rhs = sys.load.clone();
            sys.apply_dirichlet(&mut a, &mut rhs);
            let r = relative_residual(&a, &u, &rhs).unwrap();
            assert!(
                r <= 1e-10,
                "instance {instance}, supg {supg}: residual {r:e}"
            );
        }
    }
}

#[test]
fn exact_gradients_match_differences() {
    let mut rng = StdRng::seed_from_u64(3);
    let problems = [
        (example1(100.0, 1e-4).unwrap(), 1e-5),
        (example1(10.0, 1e-2).unwrap(), 1e-4),
        (example3(HillFlow::Constant, 1e-2).unwrap(), 1e-4),
        (example3(HillFlow::Constant, 1e-6).unwrap(), 1e-6),
        (heat(), 1e-3),
    ];
    for (problem, h) in &problems {
        let exact = problem.exact.as_ref().unwrap();
        for _ in 0..50 {
            let x = Point::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            let t = rng.random_range(0.05..0.5);
            let u = |dx: f64, dy: f64| (exact.value)(&Point::new(x.x + dx, x.y + dy), t);
            let fd = Point::new(d1(|s| u(s, 0.0), *h), d1(|s| u(0.0, s), *h));
            let g = (exact.gradient)(&x, t);
            let err = (fd - g).norm() / g.norm().max(1.0);
            assert!(err <= 1e-7, "{} at {x:?}, t {t}: {err:e}", problem.name);
        }
    }
}

#[test]
fn hill_layer_width_scales_with_root_eps() {
    // Along the ray y = 1/2 the arctan factor is u / (16 sin(πt) x(1-x) y(1-y)).
    let ratio = |eps: f64| {
        let p = example3(HillFlow::Constant, eps).unwrap();
        let u = p.exact.unwrap().value;
        let factor = |r: f64| {
            let (x, y) = (0.5 + r, 0.5);
            u(&Point::new(x, y), 0.5) / (16.0 * x * (1.0 - x) * y * (1.0 - y))
        };
        // The factor falls from 1 to 0 as r crosses 1/4.
        let crossing = |level: f64| {
            let (mut lo, mut hi) = (0.0, 0.45);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if factor(mid) > level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        (crossing(0.25) - crossing(0.75)) / eps.sqrt()
    };
    let ratios: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|&e| ratio(e)).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo <= 1.5, "{ratios:?}");
}

#[test]
fn position_dependent_energy_gradient_matches_differences() {
    // Metric M(x) = A + x B + y C with random SPD parts.
    let mut rng = StdRng::seed_from_u64(4);
    let cfg = MmpdeConfig::default();
    for instance in 0..20 {
        let mesh = perturbed_mesh(2 + instance % 3, 0.25, &mut rng);
        let parts: [Matrix2<f64>; 3] = [
            random_spd(&mut rng),
            random_spd(&mut rng),
            random_spd(&mut rng),
        ];
        let field = |m: &TriMesh| {
            let vals: Vec<_> = m
                .vertices()
                .iter()
                .map(|p| parts[0] + parts[1] * p.x + parts[2] * p.y)
                .collect();
            let slopes = vec![[parts[1], parts[2]]; m.n_vertices()];
            field_energy_and_gradient(m, &vals, &slopes, &cfg).unwrap()
        };
        let (_, grad) = field(&mesh);
        let scale = grad.iter().map(|g| g.amax()).fold(0.0, f64::max);
        let step = 1e-6;
        for v in 0..mesh.n_vertices() {
            for c in 0..2 {
                let shifted = |d: f64| {
                    let mut verts = mesh.vertices().to_vec();
                    verts[v][c] += d;
                    field(&mesh.with_vertices(verts).unwrap()).0
                };
                let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
                assert!(
                    (fd - grad[v][c]).abs() <= 1e-6 * scale,
                    "instance {instance}, vertex {v}"
                );
            }
        }
    }
}

#[test]
fn assembled_load_sums_to_the_source_integral() {
    // Σ_i f_i = ∫ f for Galerkin; the subdivided rule is exact for
    // quadratic sources on every element.
    let mut rng = StdRng::seed_from_u64(5);
    let mut problem = steady_linear(Point::new(1.0, 0.0), 0.1);
    problem.source = std::sync::Arc::new(|p, _| 3.0 * p.x * p.x + p.x * p.y);
    let mesh = perturbed_mesh(5, 0.3, &mut rng);
    let sys = assemble(&mesh, &problem, 0.0, false).unwrap();
    let total: f64 = sys.load.iter().sum();
    assert!((total - (1.0 + 0.25)).abs() <= 1e-13, "{total}");
}
