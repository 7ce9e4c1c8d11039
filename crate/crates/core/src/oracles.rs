//! Independent reference computations used by tests.
//!
//! Nothing here shares code with the functions it checks: angles come from
//! tangent vectors rather than side lengths, and cycles from enumerating
//! walks rather than from an SCC algorithm.

use std::collections::BTreeSet;

use crate::models::{MPoint, ModelId};

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn cdiv(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let d = b.0 * b.0 + b.1 * b.1;
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}

fn between_vectors(u: [f64; 3], w: [f64; 3]) -> f64 {
    let dot = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
    let c = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt().atan2(dot)
}

/// The angle at `v` from the tangent directions of the two arms.
///
/// In the disk, the Möbius map `z -> (z - v) / (1 - conj(v) z)` moves `v`
/// to the origin, where geodesics are diameters and the map is conformal.
pub fn tangent_angle(model: ModelId, a: &MPoint, v: &MPoint, b: &MPoint) -> f64 {
    match model {
        ModelId::Euclidean => {
            let (a, v, b) = (a.raw(), v.raw(), b.raw());
            between_vectors([a[0] - v[0], a[1] - v[1], 0.0], [b[0] - v[0], b[1] - v[1], 0.0])
        }
        ModelId::Poincare => {
            let d = |p: &MPoint| {
                let c = p.coords(model);
                (c[0], c[1])
            };
            let vz = d(v);
            let move_to_origin = |z: (f64, f64)| {
                let num = (z.0 - vz.0, z.1 - vz.1);
                let den = cmul((vz.0, -vz.1), z);
                cdiv(num, (1.0 - den.0, -den.1))
            };
            let (ma, mb) = (move_to_origin(d(a)), move_to_origin(d(b)));
            between_vectors([ma.0, ma.1, 0.0], [mb.0, mb.1, 0.0])
        }
        ModelId::Sphere => {
            let (a, v, b) = (a.raw(), v.raw(), b.raw());
            let project = |p: [f64; 3]| {
                let k = p[0] * v[0] + p[1] * v[1] + p[2] * v[2];
                [p[0] - k * v[0], p[1] - k * v[1], p[2] - k * v[2]]
            };
            between_vectors(project(a), project(b))
        }
    }
}

/// Composite Simpson's rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0 && n > 0);
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + f(b) + inner)
}

/// Hyperbolic distance from the disk origin to radius `r`, by integrating
/// the metric density `2 / (1 - x^2)`.
pub fn disk_radius_length(r: f64) -> f64 {
    simpson(|x| 2.0 / (1.0 - x * x), 0.0, r, 20_000)
}

/// Cycles of a digraph on nodes `0..n`, in the same shape as the graph
/// module reports them: maximal sets of mutually reachable nodes with a
/// closed walk, each sorted, the list sorted.
///
/// Reachability comes from extending every simple path one edge at a time.
pub fn brute_cycles(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut reach = vec![vec![false; n]; n];
    for start in 0..n {
        let mut paths = vec![vec![start]];
        while let Some(path) = paths.pop() {
            let last = *path.last().expect("non-empty");
            for &(from, to) in edges {
                if from != last {
                    continue;
                }
                reach[start][to] = true;
                if !path.contains(&to) {
                    let mut next = path.clone();
                    next.push(to);
                    paths.push(next);
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    let mut cycles = Vec::new();
    for i in 0..n {
        if !reach[i][i] || seen.contains(&i) {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        seen.extend(class.iter().copied());
        cycles.push(class);
    }
    cycles.sort();
    cycles
}
