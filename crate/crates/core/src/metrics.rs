//! Topology observables and return-series construction.
//!
//! The per-degree tables (neighbor degree `D(k)`, clustering `C(k)` and path
//! length `l(k)`) are computed on the undirected projection, where `k` is the
//! number of distinct trading partners.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graph::{Graph, UNREACHABLE};
use crate::netcore::{Agent, TradeNetwork};
use crate::streams::{substream, Stream};
use crate::tails::least_squares;

/// `ln(v[t+1] / v[t])`, with `None` wherever either value is not positive.
pub fn log_returns(series: &[f64]) -> Vec<Option<f64>> {
    series
        .windows(2)
        .map(|w| (w[0] > 0.0 && w[1] > 0.0).then(|| (w[1] / w[0]).ln()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeMode {
    In,
    Out,
    #[default]
    Total,
}

impl DegreeMode {
    pub fn of(self, agent: &Agent) -> usize {
        match self {
            DegreeMode::In => agent.k_in(),
            DegreeMode::Out => agent.k_out(),
            DegreeMode::Total => agent.k_total(),
        }
    }
}

impl fmt::Display for DegreeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegreeMode::In => "in",
            DegreeMode::Out => "out",
            DegreeMode::Total => "total",
        })
    }
}

impl FromStr for DegreeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in" => Ok(DegreeMode::In),
            "out" => Ok(DegreeMode::Out),
            "total" => Ok(DegreeMode::Total),
            _ => Err(Error::config(
                "degree_mode",
                format!("expected in|out|total, got {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeHistogram {
    pub mode: DegreeMode,
    /// `k -> (count, P(k))`.
    pub entries: BTreeMap<usize, (usize, f64)>,
    pub agents: usize,
}

impl DegreeHistogram {
    pub fn probability(&self, k: usize) -> f64 {
        self.entries.get(&k).map_or(0.0, |e| e.1)
    }

    /// Degrees of all agents with `k >= 1`, in ascending order, as samples
    /// for tail fitting.
    pub fn positive_samples(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|(&k, _)| k > 0)
            .flat_map(|(&k, &(c, _))| std::iter::repeat_n(k as f64, c))
            .collect()
    }
}

pub fn degree_distribution(net: &TradeNetwork, mode: DegreeMode) -> Result<DegreeHistogram> {
    let alive: Vec<&Agent> = net.agents().iter().filter(|a| a.is_alive()).collect();
    if alive.is_empty() {
        return Err(Error::EmptyInput("network has no agents"));
    }
    let mut counts = BTreeMap::new();
    for a in &alive {
        *counts.entry(mode.of(a)).or_insert(0usize) += 1;
    }
    let n = alive.len();
    let entries = counts.into_iter().map(|(k, c)| (k, (c, c as f64 / n as f64))).collect();
    Ok(DegreeHistogram {
        mode,
        entries,
        agents: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeRow {
    pub k: usize,
    pub value: f64,
    /// Agents (or BFS sources) averaged into this row.
    pub samples: usize,
    /// Set when the value is a convention rather than a measurement, such as
    /// the zero clustering of degree-1 agents.
    pub flagged: bool,
}

/// One observable tabulated against degree, rows in ascending `k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DegreeTable {
    pub rows: Vec<DegreeRow>,
}

/// Least-squares fit of a table's values against `ln k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeTest {
    pub slope: f64,
    pub stderr: f64,
    /// Two-sided p-value for a zero slope.
    pub p_value: f64,
    pub points: usize,
}

impl DegreeTable {
    pub fn get(&self, k: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k).map(|r| r.value)
    }

    pub fn restricted(&self, min_samples: usize) -> DegreeTable {
        DegreeTable {
            rows: self.rows.iter().filter(|r| r.samples >= min_samples).copied().collect(),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.rows.is_empty()).then(|| self.rows.iter().map(|r| r.value).sum::<f64>() / self.rows.len() as f64)
    }

    /// `max - min` of the row values.
    pub fn range(&self) -> Option<f64> {
        let max = self.rows.iter().map(|r| r.value).reduce(f64::max)?;
        let min = self.rows.iter().map(|r| r.value).reduce(f64::min)?;
        Some(max - min)
    }

    /// Population standard deviation of the row values over their mean.
    pub fn coefficient_of_variation(&self) -> Option<f64> {
        let mean = self.mean()?;
        let n = self.rows.len() as f64;
        let var = self.rows.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / n;
        Some(var.sqrt() / mean)
    }

    /// Regression of the values on `ln k`. Needs three rows with distinct k.
    pub fn log_slope(&self) -> Option<SlopeTest> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.k > 0)
            .map(|r| ((r.k as f64).ln(), r.value))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let line = least_squares(&pts)?;
        let dof = (pts.len() - 2) as f64;
        let p_value = if line.slope_stderr > 0.0 {
            let t = StudentsT::new(0.0, 1.0, dof).ok()?;
            2.0 * t.sf((line.slope / line.slope_stderr).abs())
        } else if line.slope != 0.0 {
            0.0
        } else {
            1.0
        };
        Some(SlopeTest {
            slope: line.slope,
            stderr: line.slope_stderr,
            p_value,
            points: pts.len(),
        })
    }
}

fn tabulate(values: impl IntoIterator<Item = (usize, f64, bool)>) -> DegreeTable {
    let mut acc: BTreeMap<usize, (f64, usize, bool)> = BTreeMap::new();
    for (k, v, flag) in values {
        let e = acc.entry(k).or_insert((0.0, 0, false));
        e.0 += v;
        e.1 += 1;
        e.2 |= flag;
    }
    DegreeTable {
        rows: acc
            .into_iter()
            .map(|(k, (sum, n, flagged))| DegreeRow {
                k,
                value: sum / n as f64,
                samples: n,
                flagged,
            })
            .collect(),
    }
}

/// `D(k)`: mean over agents of degree `k` of their neighbors' mean degree.
pub fn degree_correlation(net: &TradeNetwork) -> Result<DegreeTable> {
    graph_degree_correlation(&Graph::from_network(net))
}

pub fn graph_degree_correlation(g: &Graph) -> Result<DegreeTable> {
    if g.edge_count() == 0 {
        return Err(Error::EmptyInput("network has no links"));
    }
    Ok(tabulate((0..g.node_count()).filter(|&v| g.degree(v) > 0).map(|v| {
        let nbrs = g.neighbors(v);
        let s: usize = nbrs.iter().map(|&u| g.degree(u)).sum();
        (nbrs.len(), s as f64 / nbrs.len() as f64, false)
    })))
}

/// Local clustering of one node: closed wedges over wedges.
pub fn local_clustering(g: &Graph, v: usize) -> f64 {
    let nbrs = g.neighbors(v);
    let d = nbrs.len();
    if d < 2 {
        return 0.0;
    }
    let mut links = 0usize;
    for (i, &u) in nbrs.iter().enumerate() {
        links += count_common(g.neighbors(u), &nbrs[i + 1..]);
    }
    links as f64 / (d * (d - 1) / 2) as f64
}

/// Size of the intersection of two sorted lists.
fn count_common(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// `C(k)`. Degree-1 agents enter as 0 and flag their row; isolated agents
/// are left out.
pub fn clustering_by_degree(net: &TradeNetwork) -> DegreeTable {
    graph_clustering_by_degree(&Graph::from_network(net))
}

pub fn graph_clustering_by_degree(g: &Graph) -> DegreeTable {
    tabulate(
        (0..g.node_count())
            .filter(|&v| g.degree(v) > 0)
            .map(|v| (g.degree(v), local_clustering(g, v), g.degree(v) < 2)),
    )
}

/// `l(k)`: for BFS sources of degree `k` in the giant component, the mean
/// distance to every other giant-component node.
///
/// When `sources` reaches the component size every node is a source and the
/// table is exact. Otherwise sources are drawn round-robin across degree
/// classes (lowest degree first), uniformly within a class, so rare hub
/// degrees are represented. The draw uses the sampling substream of `seed`.
pub fn path_length_by_degree(net: &TradeNetwork, sources: usize, seed: u64) -> Result<DegreeTable> {
    graph_path_length_by_degree(&Graph::from_network(net), sources, seed)
}

pub fn graph_path_length_by_degree(g: &Graph, sources: usize, seed: u64) -> Result<DegreeTable> {
    let giant = g.giant_component();
    if giant.len() < 2 {
        return Err(Error::EmptyInput("no connected component with two or more agents"));
    }
    let chosen = if sources >= giant.len() {
        giant.clone()
    } else {
        stratified_sources(g, &giant, sources, seed)
    };
    let members: HashSet<usize> = giant.iter().copied().collect();
    debug_assert!(chosen.iter().all(|v| members.contains(v)));
    let others = (giant.len() - 1) as f64;
    let mut dist = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    let mut values = Vec::with_capacity(chosen.len());
    for &s in &chosen {
        g.bfs_into(s, &mut dist, &mut queue);
        let total: usize = giant
            .iter()
            .map(|&v| dist[v])
            .inspect(|&d| debug_assert!(d != UNREACHABLE))
            .sum();
        values.push((g.degree(s), total as f64 / others, false));
    }
    Ok(tabulate(values))
}

fn stratified_sources(g: &Graph, giant: &[usize], budget: usize, seed: u64) -> Vec<usize> {
    let mut rng = substream(seed, Stream::Sampling);
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &v in giant {
        classes.entry(g.degree(v)).or_default().push(v);
    }
    let mut pools: Vec<Vec<usize>> = classes.into_values().collect();
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }
    let mut out = Vec::with_capacity(budget);
    while out.len() < budget {
        for pool in &mut pools {
            if out.len() == budget {
                break;
            }
            if let Some(v) = pool.pop() {
                out.push(v);
            }
        }
    }
    out.sort_unstable();
    out
}

/// The three per-degree tables together.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeProfile {
    pub neighbor_degree: DegreeTable,
    pub clustering: DegreeTable,
    pub path_length: DegreeTable,
}

pub fn degree_profile(net: &TradeNetwork, sources: usize, seed: u64) -> Result<DegreeProfile> {
    let g = Graph::from_network(net);
    Ok(DegreeProfile {
        neighbor_degree: graph_degree_correlation(&g)?,
        clustering: graph_clustering_by_degree(&g),
        path_length: graph_path_length_by_degree(&g, sources, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{AgentId, GrowthConfig};

    fn net_from(n: usize, links: &[(usize, usize)]) -> TradeNetwork {
        let mut net = TradeNetwork::empty(GrowthConfig::default(), 0).unwrap();
        for _ in 0..n {
            net.add_agent();
        }
        for &(s, t) in links {
            net.add_link(AgentId(s), AgentId(t), 1.0).unwrap();
        }
        net
    }

    fn ring5() -> TradeNetwork {
        net_from(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
    }

    fn in_star() -> TradeNetwork {
        net_from(5, &[(1, 0), (2, 0), (3, 0), (4, 0)])
    }

    #[test]
    fn log_returns_examples() {
        assert_eq!(log_returns(&[5.0, 5.0, 5.0]), vec![Some(0.0), Some(0.0)]);
        let r = log_returns(&[100.0, 200.0]);
        assert!((r[0].unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let r = log_returns(&[1.0, std::f64::consts::E, 1.0]);
        assert!((r[0].unwrap() - 1.0).abs() < 1e-15);
        assert!((r[1].unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(log_returns(&[1.0, 0.0, 2.0]), vec![None, None]);
    }

    #[test]
    fn ring_and_star_histograms() {
        let h = degree_distribution(&ring5(), DegreeMode::Total).unwrap();
        assert_eq!(h.probability(2), 1.0);
        let h = degree_distribution(&in_star(), DegreeMode::Total).unwrap();
        assert_eq!(h.probability(4), 0.2);
        assert_eq!(h.probability(1), 0.8);
        let h = degree_distribution(&in_star(), DegreeMode::In).unwrap();
        assert_eq!(h.probability(0), 0.8);
        assert_eq!(h.entries[&4].0, 1);
        assert_eq!(h.positive_samples(), vec![4.0]);
    }

    #[test]
    fn empty_network_errors() {
        let net = net_from(0, &[]);
        assert!(matches!(
            degree_distribution(&net, DegreeMode::Total),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            degree_correlation(&net_from(3, &[])),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            path_length_by_degree(&net_from(3, &[]), 10, 0),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn neighbor_degree_examples() {
        let d = degree_correlation(&ring5()).unwrap();
        assert_eq!(d.get(2), Some(2.0));
        let d = degree_correlation(&in_star()).unwrap();
        assert_eq!(d.get(4), Some(1.0));
        assert_eq!(d.get(1), Some(4.0));
    }

    #[test]
    fn clustering_examples() {
        let c = graph_clustering_by_degree(&Graph::complete(3));
        assert_eq!(c.get(2), Some(1.0));
        let c = clustering_by_degree(&in_star());
        assert_eq!(c.get(4), Some(0.0));
        assert!(c.rows.iter().find(|r| r.k == 1).unwrap().flagged);
        let c = graph_clustering_by_degree(&Graph::path(3));
        assert_eq!(c.get(2), Some(0.0));
        assert!(!c.rows.iter().find(|r| r.k == 2).unwrap().flagged);
    }

    #[test]
    fn clustering_of_a_diamond() {
        // Node 1 sees neighbors 0, 2, 3; pairs (0,2) and (2,3) are linked,
        // (0,3) is not.
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert!((local_clustering(&g, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(local_clustering(&g, 0), 1.0);
    }

    #[test]
    fn path_length_examples() {
        let l = graph_path_length_by_degree(&Graph::complete(5), 100, 0).unwrap();
        assert_eq!(l.get(4), Some(1.0));
        let l = graph_path_length_by_degree(&Graph::path(3), 100, 0).unwrap();
        assert_eq!(l.get(2), Some(1.0));
        assert_eq!(l.get(1), Some(1.5));
    }

    #[test]
    fn sampled_sources_cover_every_degree_class() {
        let g = Graph::star(50);
        let l = graph_path_length_by_degree(&g, 2, 9).unwrap();
        assert_eq!(l.get(50), Some(1.0));
        assert_eq!(l.get(1), Some((1.0 + 2.0 * 49.0) / 50.0));
        assert_eq!(l.rows.iter().map(|r| r.samples).sum::<usize>(), 2);
    }

    #[test]
    fn table_summaries() {
        let t = DegreeTable {
            rows: vec![
                DegreeRow {
                    k: 1,
                    value: 2.0,
                    samples: 30,
                    flagged: false,
                },
                DegreeRow {
                    k: 2,
                    value: 4.0,
                    samples: 5,
                    flagged: false,
                },
                DegreeRow {
                    k: 4,
                    value: 6.0,
                    samples: 25,
                    flagged: false,
                },
            ],
        };
        let r = t.restricted(20);
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.mean(), Some(4.0));
        assert_eq!(r.range(), Some(4.0));
        assert!((r.coefficient_of_variation().unwrap() - 0.5).abs() < 1e-15);
        assert!(t.log_slope().unwrap().slope > 0.0);
    }

    #[test]
    fn slope_test_detects_exact_log_decay() {
        let t = DegreeTable {
            rows: (1..=10)
                .map(|k| DegreeRow {
                    k,
                    value: 5.0 - (k as f64).ln(),
                    samples: 1,
                    flagged: false,
                })
                .collect(),
        };
        let s = t.log_slope().unwrap();
        assert!((s.slope + 1.0).abs() < 1e-12);
        assert!(s.p_value < 1e-6);
    }
}
