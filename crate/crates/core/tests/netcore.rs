use proptest::prelude::*;
use tradenet::io::EdgeList;
use tradenet::{AgentId, GrowthConfig, TradeNetwork};

fn cfg(pa_offset: f64) -> GrowthConfig {
    GrowthConfig {
        pa_offset,
        ..GrowthConfig::default()
    }
}

fn partners(net: &TradeNetwork, id: AgentId) -> Vec<AgentId> {
    let a = net.agent(id).unwrap();
    a.in_links().chain(a.out_links()).map(|(p, _)| p).collect()
}

/// Hub 0 producing for leaves 1..=10: the hub has total degree 10, every
/// leaf degree 1. `isolated` extra agents follow with no links.
fn star_with(pa_offset: f64, isolated: usize, seed: u64) -> TradeNetwork {
    let mut net = TradeNetwork::empty(cfg(pa_offset), seed).unwrap();
    for _ in 0..11 + isolated {
        net.add_agent();
    }
    for leaf in 1..=10 {
        net.add_link(AgentId(0), AgentId(leaf), 1.0).unwrap();
    }
    net
}

fn star(seed: u64) -> TradeNetwork {
    star_with(0.0, 0, seed)
}

#[test]
fn hub_frequency_follows_kernel() {
    const TRIALS: u64 = 100_000;
    let mut counts = [0u64; 11];
    for seed in 0..TRIALS {
        let mut net = star(seed);
        let att = net.attach_preferential(1, 0.5);
        let p = partners(&net, att.agent);
        assert_eq!(p.len(), 1);
        counts[p[0].index()] += 1;
    }
    // Exact kernel probabilities by enumeration over the 11 candidates.
    let weights: Vec<f64> = (0..11).map(|i| if i == 0 { 10.0 } else { 1.0 }).collect();
    let total: f64 = weights.iter().sum();
    let chi2: f64 = counts
        .iter()
        .zip(&weights)
        .map(|(&c, &w)| {
            let e = TRIALS as f64 * w / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 99.9th percentile of chi-square with 10 degrees of freedom.
    assert!(chi2 < 29.59, "chi2 = {chi2}, counts {counts:?}");
    let hub = counts[0] as f64 / TRIALS as f64;
    assert!((hub - 0.5).abs() <= 0.01, "{hub}");
}

#[test]
fn direction_mix_extremes() {
    for seed in 0..20 {
        let mut net = star(seed);
        let a = net.attach_preferential(3, 1.0).agent;
        assert_eq!(net.degrees(a).unwrap(), (0, 3));
        let b = net.attach_preferential(3, 0.0).agent;
        assert_eq!(net.degrees(b).unwrap(), (3, 0));
    }
}

#[test]
fn clamp_is_reported() {
    let mut net = TradeNetwork::new(cfg(1.0), 1).unwrap();
    let att = net.attach_preferential(5, 0.5);
    assert_eq!((att.requested, att.created), (5, 3));
    assert!(att.clamped());
    assert_eq!(net.link_count(), 6);
}

#[test]
fn remove_in_links_updates_suppliers() {
    let mut net = TradeNetwork::empty(cfg(1.0), 0).unwrap();
    for _ in 0..6 {
        net.add_agent();
    }
    for s in 1..5 {
        net.add_link(AgentId(s), AgentId(0), 1.0).unwrap();
    }
    net.add_link(AgentId(0), AgentId(5), 1.0).unwrap();
    let before: Vec<usize> = (1..5).map(|s| net.degrees(AgentId(s)).unwrap().1).collect();
    assert_eq!(net.remove_in_links(AgentId(0)).unwrap(), 4);
    assert_eq!(net.link_count(), 1);
    for (i, s) in (1..5).enumerate() {
        assert_eq!(net.degrees(AgentId(s)).unwrap().1, before[i] - 1);
    }
    assert_eq!(net.degrees(AgentId(0)).unwrap(), (0, 1));
    assert_eq!(net.remove_in_links(AgentId(1)).unwrap(), 0);
    assert_eq!(net.link_count(), 1);
    net.check_consistency().unwrap();
}

#[derive(Debug, Clone)]
enum Op {
    Agent,
    Link(usize, usize),
    Attach(usize, f64),
    Connect(f64),
    Strip(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Agent),
        (0usize..64, 0usize..64).prop_map(|(a, b)| Op::Link(a, b)),
        (1usize..4, 0.0f64..=1.0).prop_map(|(m, d)| Op::Attach(m, d)),
        (0.0f64..=1.0).prop_map(Op::Connect),
        (0usize..64).prop_map(Op::Strip),
    ]
}

fn apply(net: &mut TradeNetwork, ops: &[Op]) {
    for o in ops {
        let n = net.len();
        match *o {
            Op::Agent => {
                net.add_agent();
            }
            Op::Link(a, b) if n > 0 => {
                let _ = net.add_link(AgentId(a % n), AgentId(b % n), 1.0);
            }
            Op::Attach(m, d) => {
                net.attach_preferential(m, d);
            }
            Op::Connect(d) => {
                net.connect_preferential(d);
            }
            Op::Strip(a) if n > 0 => {
                net.remove_in_links(AgentId(a % n)).unwrap();
            }
            _ => {}
        }
    }
}

proptest! {
    #[test]
    fn bookkeeping_survives_any_sequence(
        n0 in 1usize..6,
        offset in prop_oneof![Just(0.0), 0.0f64..3.0],
        seed in any::<u64>(),
        ops in prop::collection::vec(op(), 0..80),
    ) {
        let cfg = GrowthConfig { n0, pa_offset: offset, ..GrowthConfig::default() };
        let mut net = TradeNetwork::new(cfg, seed).unwrap();
        apply(&mut net, &ops);
        prop_assert!(net.check_consistency().is_ok(), "{:?}", net.check_consistency());
        let k_in: usize = net.agents().iter().map(|a| a.k_in()).sum();
        let k_out: usize = net.agents().iter().map(|a| a.k_out()).sum();
        prop_assert_eq!(k_in, net.link_count());
        prop_assert_eq!(k_out, net.link_count());
        for a in net.agents() {
            prop_assert!(a.out_links().all(|(t, w)| t != a.id() && w > 0.0));
        }
    }

    #[test]
    fn same_seed_same_network(seed in any::<u64>(), ops in prop::collection::vec(op(), 0..60)) {
        let build = || {
            let mut net = TradeNetwork::new(GrowthConfig::default(), seed).unwrap();
            apply(&mut net, &ops);
            net
        };
        let (a, b) = (build(), build());
        prop_assert_eq!(EdgeList::from_network(&a, None), EdgeList::from_network(&b, None));
    }

    #[test]
    fn zero_offset_avoids_isolated_agents(isolated in 1usize..20, seed in any::<u64>()) {
        let mut net = TradeNetwork::new(cfg(0.0), seed).unwrap();
        let lonely: Vec<AgentId> = (0..isolated).map(|_| net.add_agent()).collect();
        for _ in 0..10 {
            let att = net.attach_preferential(1, 0.5);
            for p in partners(&net, att.agent) {
                prop_assert!(!lonely.contains(&p));
            }
        }
    }
}

#[test]
fn positive_offset_reaches_isolated_agents() {
    const TRIALS: u64 = 20_000;
    let mut hits = 0;
    for seed in 0..TRIALS {
        let mut net = star_with(1.0, 1, seed);
        let att = net.attach_preferential(1, 0.5);
        hits += u64::from(partners(&net, att.agent) == [AgentId(11)]);
    }
    // Weights: hub 11, ten leaves 2 each, the isolated agent 1.
    let p = 1.0 / 32.0;
    let f = hits as f64 / TRIALS as f64;
    let sd = (p * (1.0 - p) / TRIALS as f64).sqrt();
    assert!((f - p).abs() < 4.0 * sd, "{f} vs {p}");
}
