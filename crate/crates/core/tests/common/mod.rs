#![allow(dead_code)]

use mmsupg::mesh::VertexKind;
use mmsupg::{Point, TriMesh};
use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::Rng;

/// Uniform mesh with interior vertices displaced by up to `shift` cells.
pub fn perturbed_mesh(n: usize, shift: f64, rng: &mut StdRng) -> TriMesh {
    let mesh = TriMesh::uniform(n).unwrap();
    let h = 1.0 / n as f64;
    let verts = mesh
        .vertices()
        .iter()
        .zip(mesh.vertex_kinds())
        .map(|(p, kind)| match kind {
            VertexKind::Interior => {
                p + Point::new(
                    rng.random_range(-shift..shift),
                    rng.random_range(-shift..shift),
                ) * h
            }
            _ => *p,
        })
        .collect();
    mesh.with_vertices(verts).unwrap()
}

pub fn random_spd(rng: &mut StdRng) -> Matrix2<f64> {
    let a = Matrix2::from_fn(|_, _| rng.random_range(-2.0..2.0));
    a * a.transpose() + Matrix2::identity() * 0.2
}

pub fn nodal(mesh: &TriMesh, f: impl Fn(&Point) -> f64) -> Vec<f64> {
    mesh.vertices().iter().map(f).collect()
}

/// Fourth-order central differences at 0.
pub fn d1(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (g(-2.0 * h) - 8.0 * g(-h) + 8.0 * g(h) - g(2.0 * h)) / (12.0 * h)
}

pub fn d2(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-g(-2.0 * h) + 16.0 * g(-h) - 30.0 * g(0.0) + 16.0 * g(h) - g(2.0 * h)) / (12.0 * h * h)
}
