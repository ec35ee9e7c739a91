//! Triangle quadrature rules in barycentric coordinates. Weights sum to one
//! and are multiplied by the element area at the call site.

use std::sync::LazyLock;

/// Edge-midpoint rule, exact for polynomials of degree 2.
pub const EDGE_MIDPOINTS: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

const A1: f64 = 0.445_948_490_915_964_886_318_329_253_883_05;
const B1: f64 = 1.0 - 2.0 * A1;
const W1: f64 = 0.223_381_589_678_011_465_695_007_008_433_12;
const A2: f64 = 0.091_576_213_509_770_743_459_571_463_402_202;
const B2: f64 = 1.0 - 2.0 * A2;
const W2: f64 = 0.109_951_743_655_321_867_638_326_324_900_21;

/// Six-point Dunavant rule, exact for polynomials of degree 4.
pub const DUNAVANT6: [([f64; 3], f64); 6] = [
    ([A1, A1, B1], W1),
    ([A1, B1, A1], W1),
    ([B1, A1, A1], W1),
    ([A2, A2, B2], W2),
    ([A2, B2, A2], W2),
    ([B2, A2, A2], W2),
];

/// Composite rule: [`DUNAVANT6`] on each of the four midpoint subtriangles.
/// Used for loads and error norms: with interior layers far thinner than an
/// element, a single low-order rule samples the layer erratically.
pub static SUBDIVIDED_RULE: LazyLock<Vec<([f64; 3], f64)>> = LazyLock::new(|| {
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mid = |a: usize, b: usize| -> [f64; 3] {
        std::array::from_fn(|c| 0.5 * (corners[a][c] + corners[b][c]))
    };
    let (m01, m12, m02) = (mid(0, 1), mid(1, 2), mid(0, 2));
    let pieces = [
        [corners[0], m01, m02],
        [m01, corners[1], m12],
        [m02, m12, corners[2]],
        [m01, m12, m02],
    ];
    pieces
        .iter()
        .flat_map(|piece| {
            DUNAVANT6.iter().map(move |(l, w)| {
                let lam = std::array::from_fn(|c| {
                    l[0] * piece[0][c] + l[1] * piece[1][c] + l[2] * piece[2][c]
                });
                (lam, 0.25 * w)
            })
        })
        .collect()
});

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of `l1^a l2^b l3^c` over the reference triangle,
    /// divided by its area: `2 a! b! c! / (a + b + c + 2)!`.
    fn monomial_average(a: u32, b: u32, c: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2)
    }

    fn check(rule: &[([f64; 3], f64)], degree: u32) {
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    let q: f64 = rule
                        .iter()
                        .map(|(l, w)| {
                            w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32)
                        })
                        .sum();
                    let exact = monomial_average(a, b, c);
                    assert!(
                        (q - exact).abs() < 1e-15,
                        "degree ({a},{b},{c}): {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_midpoints_degree_two() {
        check(&EDGE_MIDPOINTS, 2);
    }

    #[test]
    fn dunavant_degree_four() {
        check(&DUNAVANT6, 4);
    }

    #[test]
    fn subdivided_rule_degree_four() {
        assert_eq!(SUBDIVIDED_RULE.len(), 24);
        check(&SUBDIVIDED_RULE, 4);
    }

    #[test]
    fn subdivided_rule_is_closer_on_a_kink() {
        // |l1 - 1/2| has a kink through the element; the composite rule,
        // whose subtriangles do not straddle it, integrates it exactly.
        let f = |l: &[f64; 3]| (l[0] - 0.5).abs();
        let exact = 0.25;
        let single: f64 = DUNAVANT6.iter().map(|(l, w)| w * f(l)).sum();
        let composite: f64 = SUBDIVIDED_RULE.iter().map(|(l, w)| w * f(l)).sum();
        assert!((composite - exact).abs() < 1e-14, "{composite}");
        assert!((single - exact).abs() > 1e-3);
    }
}
