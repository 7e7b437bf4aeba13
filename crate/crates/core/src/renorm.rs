//! Box-covering renormalization.
//!
//! A covering at scale `l_b` partitions the giant component into boxes in
//! which every pair of nodes is closer than `l_b` hops. Counting boxes across
//! scales gives the box dimension `d_B` (`N_p ~ l_b^-d_B`); the degree of the
//! best-connected box in the box graph gives the degree dimension `d_k`
//! (`k_p / k_max ~ l_b^-d_k`). Together they predict the degree exponent
//! `gamma = 1 + 2 d_B / d_k`.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, UNREACHABLE};
use crate::streams::{substream, Stream};
use crate::tails::least_squares;

pub const DEFAULT_COVER_SEEDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxCovering {
    pub l_b: usize,
    /// Box of each node of the input graph; `None` outside the giant component.
    pub assignment: Vec<Option<usize>>,
    pub n_boxes: usize,
}

impl BoxCovering {
    /// Members of every box, each list in ascending node order.
    pub fn boxes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_boxes];
        for (v, b) in self.assignment.iter().enumerate() {
            if let Some(b) = b {
                out[*b].push(v);
            }
        }
        out
    }
}

/// Greedy random-order burning.
///
/// Nodes of the giant component are shuffled with the covering substream of
/// `seed`. The first uncovered node founds a box; uncovered nodes are then
/// absorbed, in shuffled order, while they lie closer than `l_b` to every
/// member already in the box.
pub fn box_cover(g: &Graph, l_b: usize, seed: u64) -> Result<BoxCovering> {
    if l_b == 0 {
        return Err(Error::config("l_b", "box size must be at least 1"));
    }
    let mut order = g.giant_component();
    order.shuffle(&mut substream(seed, Stream::Covering));
    let mut rank = vec![UNREACHABLE; g.node_count()];
    for (i, &v) in order.iter().enumerate() {
        rank[v] = i;
    }

    let mut assignment = vec![None; g.node_count()];
    let mut ball = Ball::new(g.node_count());
    let mut n_boxes = 0;
    let mut feasible: Vec<usize> = Vec::new();
    for &founder in &order {
        if assignment[founder].is_some() {
            continue;
        }
        let b = n_boxes;
        n_boxes += 1;
        assignment[founder] = Some(b);
        // Uncovered nodes close to every member so far, in shuffled order.
        ball.fill(g, founder, l_b - 1);
        feasible.clear();
        feasible.extend(ball.members().iter().copied().filter(|&v| assignment[v].is_none()));
        feasible.sort_unstable_by_key(|&v| rank[v]);
        while let Some((&next, rest)) = feasible.split_first() {
            assignment[next] = Some(b);
            ball.fill(g, next, l_b - 1);
            let kept: Vec<usize> = rest.iter().copied().filter(|&v| ball.contains(v)).collect();
            feasible = kept;
        }
    }
    Ok(BoxCovering {
        l_b,
        assignment,
        n_boxes,
    })
}

/// Depth-limited BFS with a reusable visit stamp.
struct Ball {
    stamp: Vec<u32>,
    depth: Vec<usize>,
    current: u32,
    members: Vec<usize>,
}

impl Ball {
    fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            depth: vec![0; n],
            current: 0,
            members: Vec::new(),
        }
    }

    /// Nodes within `radius` hops of `center`, excluding the center.
    fn fill(&mut self, g: &Graph, center: usize, radius: usize) {
        self.current += 1;
        self.members.clear();
        self.stamp[center] = self.current;
        self.depth[center] = 0;
        let mut head = 0;
        let mut frontier = vec![center];
        while head < frontier.len() {
            let u = frontier[head];
            head += 1;
            if self.depth[u] == radius {
                continue;
            }
            for &v in g.neighbors(u) {
                if self.stamp[v] != self.current {
                    self.stamp[v] = self.current;
                    self.depth[v] = self.depth[u] + 1;
                    frontier.push(v);
                    self.members.push(v);
                }
            }
        }
    }

    fn members(&self) -> &[usize] {
        &self.members
    }

    fn contains(&self, v: usize) -> bool {
        self.stamp[v] == self.current
    }
}

/// Degree of every box in the box graph, where two boxes are adjacent when
/// any of their members are.
pub fn renormalized_degrees(g: &Graph, covering: &BoxCovering) -> Vec<usize> {
    let mut pairs = HashSet::new();
    for u in 0..g.node_count() {
        let Some(bu) = covering.assignment[u] else { continue };
        for &v in g.neighbors(u) {
            if let Some(bv) = covering.assignment[v] {
                if bu < bv {
                    pairs.insert((bu, bv));
                }
            }
        }
    }
    let mut degree = vec![0; covering.n_boxes];
    for (a, b) in pairs {
        degree[a] += 1;
        degree[b] += 1;
    }
    degree
}

/// Hub convention: the largest box degree, 0 for an empty covering.
pub fn hub_degree(g: &Graph, covering: &BoxCovering) -> usize {
    renormalized_degrees(g, covering).into_iter().max().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSummary {
    pub l_b: usize,
    pub n_p_mean: f64,
    pub n_p_std: f64,
    pub k_p_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractalFit {
    pub scales: Vec<ScaleSummary>,
    /// Hub degree of the unrenormalized giant component.
    pub k_max: usize,
    pub d_b: Option<f64>,
    pub d_k: Option<f64>,
    pub r2_b: Option<f64>,
    pub r2_k: Option<f64>,
    /// Set when a dimension could not be regressed.
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl FractalFit {
    pub fn gamma_prediction(&self) -> Option<f64> {
        gamma_prediction(self.d_b?, self.d_k?).ok()
    }
}

/// Box and degree dimensions from coverings at each scale, averaged over
/// `cover_seeds` coverings whose seeds are drawn from the covering substream
/// of `seed`. Coverings run on up to `jobs` threads; the result does not
/// depend on `jobs`.
pub fn fractal_dimensions(
    g: &Graph,
    scales: &[usize],
    seed: u64,
    cover_seeds: usize,
    jobs: usize,
) -> Result<FractalFit> {
    if scales.len() < 3 {
        return Err(Error::config("renorm.scales", "at least 3 scales are required"));
    }
    if let Some(&bad) = scales.iter().find(|&&l| l == 0) {
        return Err(Error::config(
            "renorm.scales",
            format!("scale {bad} must be at least 1"),
        ));
    }
    if cover_seeds == 0 {
        return Err(Error::config("renorm.cover_seeds", "must be at least 1"));
    }
    let giant = g.giant_component();
    if giant.is_empty() {
        return Err(Error::EmptyInput("graph has no nodes"));
    }
    let h = g.induced(&giant);
    let k_max = h.max_degree();
    let mut rng = substream(seed, Stream::Covering);
    let seeds: Vec<u64> = (0..cover_seeds).map(|_| rng.gen()).collect();

    let tasks: Vec<(usize, u64)> = scales
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let results = run_tasks(&h, &tasks, jobs.max(1))?;

    let mut summaries = Vec::with_capacity(scales.len());
    for (i, &l_b) in scales.iter().enumerate() {
        let chunk = &results[i * cover_seeds..(i + 1) * cover_seeds];
        let n = cover_seeds as f64;
        let n_p_mean = chunk.iter().map(|r| r.0 as f64).sum::<f64>() / n;
        let var = chunk.iter().map(|r| (r.0 as f64 - n_p_mean).powi(2)).sum::<f64>() / n;
        let k_p_mean = chunk.iter().map(|r| r.1 as f64).sum::<f64>() / n;
        summaries.push(ScaleSummary {
            l_b,
            n_p_mean,
            n_p_std: var.sqrt(),
            k_p_mean,
        });
    }

    let mut notes = Vec::new();
    let mut degenerate = false;
    let first = summaries[0].n_p_mean;
    let (d_b, r2_b) = if summaries.iter().all(|s| s.n_p_mean == first) {
        degenerate = true;
        notes.push(format!("box count is {first} at every scale; d_B undefined"));
        (None, None)
    } else {
        let pts: Vec<(f64, f64)> = summaries
            .iter()
            .map(|s| ((s.l_b as f64).ln(), s.n_p_mean.ln()))
            .collect();
        match least_squares(&pts) {
            Some(line) => (Some(-line.slope), Some(line.r2)),
            None => {
                degenerate = true;
                notes.push("scales coincide; d_B undefined".to_string());
                (None, None)
            }
        }
    };

    let k_pts: Vec<(f64, f64)> = summaries
        .iter()
        .filter(|s| s.k_p_mean > 0.0 && k_max > 0)
        .map(|s| ((s.l_b as f64).ln(), (s.k_p_mean / k_max as f64).ln()))
        .collect();
    let skipped = summaries.len() - k_pts.len();
    if skipped > 0 {
        notes.push(format!("{skipped} scale(s) with no inter-box links left out of d_k"));
    }
    let k_line = (k_pts.len() >= 3).then(|| least_squares(&k_pts)).flatten();
    let (d_k, r2_k) = match k_line {
        Some(line) => (Some(-line.slope), Some(line.r2)),
        None => {
            degenerate = true;
            notes.push("fewer than 3 scales with a usable hub degree; d_k undefined".to_string());
            (None, None)
        }
    };

    Ok(FractalFit {
        scales: summaries,
        k_max,
        d_b,
        d_k,
        r2_b,
        r2_k,
        degenerate,
        notes,
    })
}

/// `(n_boxes, hub degree)` for each `(l_b, seed)` task, in task order.
fn run_tasks(g: &Graph, tasks: &[(usize, u64)], jobs: usize) -> Result<Vec<(usize, usize)>> {
    let cover = |&(l_b, s): &(usize, u64)| -> Result<(usize, usize)> {
        let c = box_cover(g, l_b, s)?;
        Ok((c.n_boxes, hub_degree(g, &c)))
    };
    if jobs == 1 || tasks.len() < 2 {
        return tasks.iter().map(cover).collect();
    }
    let per = tasks.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = tasks
            .chunks(per)
            .map(|chunk| scope.spawn(move || chunk.iter().map(cover).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(tasks.len());
        for h in handles {
            out.extend(h.join().expect("covering thread panicked")?);
        }
        Ok(out)
    })
}

/// `1 + 2 d_b / d_k`.
pub fn gamma_prediction(d_b: f64, d_k: f64) -> Result<f64> {
    if d_k.is_nan() || d_k <= 0.0 {
        return Err(Error::Domain(format!("d_k must be positive, got {d_k}")));
    }
    Ok(1.0 + 2.0 * d_b / d_k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_diameter(g: &Graph, c: &BoxCovering) {
        for members in c.boxes() {
            for &u in &members {
                let d = g.bfs(u);
                for &v in &members {
                    assert!(d[v] < c.l_b, "{u}-{v} at {} in box of scale {}", d[v], c.l_b);
                }
            }
        }
    }

    #[test]
    fn unit_scale_gives_singletons() {
        let g = Graph::complete(7);
        let c = box_cover(&g, 1, 3).unwrap();
        assert_eq!(c.n_boxes, 7);
        assert_eq!(hub_degree(&g, &c), 6);
        assert_eq!(renormalized_degrees(&g, &c), vec![6; 7]);
    }

    #[test]
    fn complete_graph_one_box() {
        let g = Graph::complete(6);
        let c = box_cover(&g, 2, 0).unwrap();
        assert_eq!(c.n_boxes, 1);
        assert_eq!(hub_degree(&g, &c), 0);
    }

    #[test]
    fn zero_scale_is_config_error() {
        assert!(matches!(
            box_cover(&Graph::path(3), 0, 0),
            Err(Error::Config { ref key, .. }) if key == "l_b"
        ));
    }

    #[test]
    fn two_box_path_renormalizes_to_an_edge() {
        let g = Graph::path(4);
        let c = BoxCovering {
            l_b: 2,
            assignment: vec![Some(0), Some(0), Some(1), Some(1)],
            n_boxes: 2,
        };
        assert_eq!(renormalized_degrees(&g, &c), vec![1, 1]);
    }

    #[test]
    fn only_giant_component_is_covered() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 3), (4, 5)]).unwrap();
        let c = box_cover(&g, 2, 1).unwrap();
        assert_eq!(c.assignment[4], None);
        assert_eq!(c.assignment[5], None);
        assert!(c.assignment[..4].iter().all(Option::is_some));
        check_diameter(&g, &c);
    }

    #[test]
    fn coverings_respect_the_diameter_bound() {
        let g = Graph::from_edges(
            12,
            [
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 0),
                (3, 4),
                (4, 5),
                (5, 6),
                (6, 7),
                (7, 4),
                (2, 8),
                (8, 9),
                (9, 10),
                (10, 11),
                (11, 8),
            ],
        )
        .unwrap();
        for l_b in 1..=6 {
            for seed in 0..10 {
                check_diameter(&g, &box_cover(&g, l_b, seed).unwrap());
            }
        }
    }

    #[test]
    fn seed_determinism() {
        let g = Graph::path(50);
        assert_eq!(box_cover(&g, 4, 11).unwrap(), box_cover(&g, 4, 11).unwrap());
    }

    #[test]
    fn gamma_prediction_limits() {
        for d in [0.5, 1.0, 2.0] {
            assert_eq!(gamma_prediction(d, d).unwrap(), 3.0);
            assert_eq!(gamma_prediction(d, 2.0 * d).unwrap(), 2.0);
        }
        assert!((gamma_prediction(2.0, 3.0).unwrap() - 7.0 / 3.0).abs() < 1e-15);
        assert!(matches!(gamma_prediction(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(gamma_prediction(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn star_is_degenerate_once_one_box_covers_it() {
        let g = Graph::star(999);
        let fit = fractal_dimensions(&g, &[3, 4, 5], 0, 2, 1).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.d_b, None);
        assert!(fit.scales.iter().all(|s| s.n_p_mean == 1.0 && s.k_p_mean == 0.0));
    }

    #[test]
    fn fewer_than_three_scales_rejected() {
        assert!(fractal_dimensions(&Graph::path(10), &[2, 4], 0, 1, 1).is_err());
    }

    #[test]
    fn jobs_do_not_change_results() {
        let g = Graph::path(300);
        let a = fractal_dimensions(&g, &[2, 4, 8], 5, 4, 1).unwrap();
        let b = fractal_dimensions(&g, &[2, 4, 8], 5, 4, 3).unwrap();
        assert_eq!(a, b);
    }
}
