//! Reference implementations that the acceptance suite checks the library
//! against. They favour directness over speed and share no code with the
//! routines they check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tradenet::graph::Graph;

/// Inverse-CDF draws from `P(X >= s) = (s / x_min)^-m`.
pub fn pareto_samples(m: f64, x_min: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| x_min * (1.0 - rng.gen::<f64>()).powf(-1.0 / m))
        .collect()
}

/// `∫_a^∞ p(x) dx` for the Pareto density `m x_min^m x^(-m-1)`, by composite
/// Simpson in `u = ln(x / a)` up to where the remaining mass is below 1e-13.
pub fn pareto_tail_mass(m: f64, x_min: f64, a: f64) -> f64 {
    let u_max = 1e13f64.ln() / m + 1.0;
    let n = 200_000;
    let h = u_max / n as f64;
    let f = |u: f64| {
        let x = a * u.exp();
        m * x_min.powf(m) * x.powf(-m - 1.0) * x
    };
    let mut s = f(0.0) + f(u_max);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Smallest number of boxes, each with all pairwise distances below `l_b`,
/// that cover the giant component. Branch and bound over box assignments.
pub fn exhaustive_min_cover(g: &Graph, l_b: usize) -> usize {
    let d: Vec<Vec<usize>> = (0..g.node_count()).map(|v| g.bfs(v)).collect();
    let nodes = g.giant_component();
    let mut boxes: Vec<Vec<usize>> = Vec::new();
    let mut best = nodes.len();
    search(&nodes, 0, &d, l_b, &mut boxes, &mut best);
    best
}

fn search(nodes: &[usize], i: usize, d: &[Vec<usize>], l_b: usize, boxes: &mut Vec<Vec<usize>>, best: &mut usize) {
    if boxes.len() >= *best {
        return;
    }
    if i == nodes.len() {
        *best = boxes.len();
        return;
    }
    let v = nodes[i];
    for b in 0..boxes.len() {
        if boxes[b].iter().all(|&u| d[u][v] < l_b) {
            boxes[b].push(v);
            search(nodes, i + 1, d, l_b, boxes, best);
            boxes[b].pop();
        }
    }
    boxes.push(vec![v]);
    search(nodes, i + 1, d, l_b, boxes, best);
    boxes.pop();
}

/// Named test graphs with at most 12 nodes.
pub fn small_graphs() -> Vec<(&'static str, Graph)> {
    let grid = (0..12usize).flat_map(|v| {
        let (r, c) = (v / 4, v % 4);
        let right = (c < 3).then_some((v, v + 1));
        let down = (r < 2).then_some((v, v + 4));
        right.into_iter().chain(down)
    });
    let barbell = [
        (0, 1),
        (0, 2),
        (1, 2),
        (2, 3),
        (3, 4),
        (4, 5),
        (5, 6),
        (6, 7),
        (6, 8),
        (7, 8),
        (8, 9),
    ];
    let flower = [
        (0, 4),
        (4, 1),
        (0, 5),
        (5, 1),
        (1, 6),
        (6, 2),
        (1, 7),
        (7, 2),
        (2, 8),
        (8, 3),
        (2, 9),
        (9, 3),
        (3, 10),
        (10, 0),
        (3, 11),
        (11, 0),
    ];
    vec![
        ("path4", Graph::path(4)),
        ("path7", Graph::path(7)),
        ("path12", Graph::path(12)),
        ("cycle8", Graph::cycle(8)),
        ("cycle11", Graph::cycle(11)),
        ("star6", Graph::star(6)),
        ("complete5", Graph::complete(5)),
        ("flower2", Graph::from_edges(12, flower).unwrap()),
        ("barbell", Graph::from_edges(10, barbell).unwrap()),
        ("grid3x4", Graph::from_edges(12, grid).unwrap()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_cover_on_known_instances() {
        assert_eq!(exhaustive_min_cover(&Graph::path(4), 2), 2);
        assert_eq!(exhaustive_min_cover(&Graph::path(7), 3), 3);
        assert_eq!(exhaustive_min_cover(&Graph::complete(5), 2), 1);
        assert_eq!(exhaustive_min_cover(&Graph::cycle(8), 1), 8);
        assert_eq!(exhaustive_min_cover(&Graph::star(6), 3), 1);
    }

    #[test]
    fn small_graphs_are_small() {
        for (name, g) in small_graphs() {
            assert!(g.node_count() <= 12, "{name}");
        }
    }

    #[test]
    fn quadrature_of_whole_support_is_one() {
        assert!((pareto_tail_mass(2.5, 1.0, 1.0) - 1.0).abs() < 1e-9);
    }
}
