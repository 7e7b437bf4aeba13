//! Trade settlement, insolvency, collapse avalanches and the simulation loop.
//!
//! Per link `i -> j` carrying `W` labor units, the producer `i` is paid
//! `alpha * W`, where `alpha` is the producer's exchange rate. Settling the
//! link moves `(alpha - 1) * W` into the producer's energy and the same amount
//! out of the consumer's, so settlement is zero-sum.
//!
//! An agent is insolvent when its energy falls strictly below
//! `-theta * k_total * default_weight`. A collapsing agent loses all of its
//! consumption links and its energy is discharged to zero. Its suppliers lose a
//! production link each, which lowers their own tolerance and may push them
//! over the threshold in turn.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::log_returns;
use crate::netcore::{AgentId, Attachment, GrowthConfig, TradeNetwork};

/// Exchange-rate policy: maps a producer's `(k_in, k_out)` to the rate at
/// which its labor is rewarded. Must return a finite positive value.
pub trait ExchangeRule {
    fn rate(&self, k_in: usize, k_out: usize) -> f64;
}

/// `(k_in + 1) / (k_out + 1)`: demand over supply, regularized at zero degree.
#[derive(Debug, Clone, Copy, Default)]
pub struct DemandSupplyRatio;

impl ExchangeRule for DemandSupplyRatio {
    fn rate(&self, k_in: usize, k_out: usize) -> f64 {
        (k_in as f64 + 1.0) / (k_out as f64 + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    /// Tolerated deficit per unit of trade before an agent collapses.
    pub theta: f64,
    pub steps: usize,
    pub growth: GrowthConfig,
    /// Per-step probability of adding an agent; otherwise one link is added
    /// between existing agents.
    pub new_agent_probability: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            steps: 100_000,
            growth: GrowthConfig::default(),
            new_agent_probability: 0.1,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::config("theta", "must be a finite value > 0"));
        }
        if !(0.0..=1.0).contains(&self.new_agent_probability) {
            return Err(Error::config("new_agent_probability", "must lie in [0, 1]"));
        }
        self.growth.validate()
    }
}

/// One collapse avalanche.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvalancheRecord {
    pub step: usize,
    /// Distinct agents that collapsed.
    pub r: usize,
    /// Links destroyed.
    pub k_t: usize,
    pub seed_agent: AgentId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrowthEvent {
    Agent(Attachment),
    /// A link between existing agents, or `None` if no free pair was found.
    Link(Option<(AgentId, AgentId)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub growth: GrowthEvent,
    pub avalanches: Vec<AvalancheRecord>,
    /// Overall product after the step.
    pub u_t: f64,
    /// Change of total energy across settlement (zero up to rounding).
    pub energy_drift: f64,
}

impl StepReport {
    /// Links created by this step's growth phase.
    pub fn links_added(&self) -> usize {
        match &self.growth {
            GrowthEvent::Agent(a) => a.created,
            GrowthEvent::Link(l) => usize::from(l.is_some()),
        }
    }

    pub fn links_destroyed(&self) -> usize {
        self.avalanches.iter().map(|a| a.k_t).sum()
    }
}

pub fn exchange_rate(net: &TradeNetwork, producer: AgentId, consumer: AgentId) -> Result<f64> {
    exchange_rate_with(&DemandSupplyRatio, net, producer, consumer)
}

pub fn exchange_rate_with<R: ExchangeRule + ?Sized>(
    rule: &R,
    net: &TradeNetwork,
    producer: AgentId,
    consumer: AgentId,
) -> Result<f64> {
    net.agent(consumer)?;
    let (k_in, k_out) = net.degrees(producer)?;
    Ok(rule.rate(k_in, k_out))
}

/// Settles every link once with the default exchange rule and returns the
/// change in total energy.
pub fn settle_trades(net: &mut TradeNetwork) -> f64 {
    settle_trades_with(&DemandSupplyRatio, net)
}

pub fn settle_trades_with<R: ExchangeRule + ?Sized>(rule: &R, net: &mut TradeNetwork) -> f64 {
    let agents = net.agents_mut();
    let mut delta = vec![0.0f64; agents.len()];
    for a in agents.iter() {
        if a.out_links.is_empty() {
            continue;
        }
        let margin = rule.rate(a.k_in(), a.k_out()) - 1.0;
        let i = a.id().index();
        for (&j, &w) in &a.out_links {
            let flow = margin * w;
            delta[i] += flow;
            delta[j.index()] -= flow;
        }
    }
    let before: f64 = agents.iter().map(|a| a.energy).sum();
    for (a, d) in agents.iter_mut().zip(&delta) {
        a.energy += d;
    }
    let after: f64 = agents.iter().map(|a| a.energy).sum();
    after - before
}

/// Strict: an agent sitting exactly on its threshold is solvent.
pub fn is_insolvent(net: &TradeNetwork, id: AgentId, theta: f64) -> Result<bool> {
    let a = net.agent(id)?;
    Ok(insolvent(a.energy(), a.k_total(), theta, net.config().default_weight))
}

fn insolvent(energy: f64, k_total: usize, theta: f64, weight: f64) -> bool {
    energy < -theta * k_total as f64 * weight
}

/// Runs a breadth-first collapse starting from an insolvent `seed`.
///
/// Queue order is FIFO; suppliers pushed over the threshold by one collapse
/// are enqueued in ascending id order. Each agent collapses at most once per
/// avalanche.
pub fn trigger_cascade(net: &mut TradeNetwork, seed: AgentId, theta: f64, step: usize) -> Result<AvalancheRecord> {
    if !is_insolvent(net, seed, theta)? {
        return Err(Error::Contract(format!("cascade seeded at solvent agent {seed}")));
    }
    let weight = net.config().default_weight;
    let mut queue = VecDeque::from([seed]);
    let mut queued = HashSet::from([seed]);
    let mut r = 0;
    let mut k_t = 0;
    while let Some(a) = queue.pop_front() {
        let suppliers = net.strip_in_links(a);
        net.agents_mut()[a.index()].energy = 0.0;
        r += 1;
        k_t += suppliers.len();
        let mut failing: Vec<AgentId> = suppliers
            .into_iter()
            .filter(|s| !queued.contains(s))
            .filter(|s| {
                let ag = &net.agents()[s.index()];
                insolvent(ag.energy(), ag.k_total(), theta, weight)
            })
            .collect();
        failing.sort_unstable();
        for s in failing {
            queued.insert(s);
            queue.push_back(s);
        }
    }
    Ok(AvalancheRecord {
        step,
        r,
        k_t,
        seed_agent: seed,
    })
}

/// Total weight of all production links.
pub fn overall_product(net: &TradeNetwork) -> f64 {
    net.agents().iter().flat_map(|a| a.out_links.values()).sum()
}

/// Advances the network by one step: growth, settlement, collapses, then the
/// overall product.
///
/// Insolvent agents are scanned in ascending id order and each one that still
/// consumes something seeds an avalanche. Agents without in-links are skipped
/// because a collapse could not remove anything from them.
pub fn step(net: &mut TradeNetwork, cfg: &DynamicsConfig, t: usize) -> StepReport {
    let g = *net.config();
    let growth = if net.rng_mut().gen::<f64>() < cfg.new_agent_probability {
        GrowthEvent::Agent(net.attach_preferential(g.m_new, g.direction_mix))
    } else {
        GrowthEvent::Link(net.connect_preferential(g.direction_mix))
    };

    let energy_drift = settle_trades(net);
    let mut avalanches = Vec::new();
    for i in 0..net.len() {
        let a = &net.agents()[i];
        // An agent with nothing to consume has nothing to shed; it keeps
        // producing at a loss until demand for its own output recovers.
        if a.k_in() == 0 {
            continue;
        }
        if insolvent(a.energy(), a.k_total(), cfg.theta, g.default_weight) {
            let rec = trigger_cascade(net, AgentId(i), cfg.theta, t).expect("seed checked insolvent");
            avalanches.push(rec);
        }
    }

    StepReport {
        step: t,
        growth,
        avalanches,
        u_t: overall_product(net),
        energy_drift,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub config: DynamicsConfig,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    /// Overall product, starting with the seed network's value.
    pub u_t: Vec<f64>,
    /// `ln(u_t[t+1] / u_t[t])`; `None` marks a gap where either value is not
    /// positive.
    pub returns: Vec<Option<f64>>,
    pub avalanches: Vec<AvalancheRecord>,
    pub final_network: TradeNetwork,
    pub config_echo: ConfigEcho,
    /// Largest absolute energy drift seen across any settlement.
    pub max_energy_drift: f64,
}

/// A running simulation. Use [`Simulation::step`] to drive it by hand or
/// [`run_simulation`] for a complete run.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: DynamicsConfig,
    seed: u64,
    net: TradeNetwork,
    t: usize,
}

impl Simulation {
    pub fn new(cfg: DynamicsConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let net = TradeNetwork::new(cfg.growth, seed)?;
        Ok(Self { cfg, seed, net, t: 0 })
    }

    pub fn network(&self) -> &TradeNetwork {
        &self.net
    }

    pub fn config(&self) -> &DynamicsConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps_done(&self) -> usize {
        self.t
    }

    pub fn step(&mut self) -> StepReport {
        self.t += 1;
        step(&mut self.net, &self.cfg, self.t)
    }

    pub fn into_network(self) -> TradeNetwork {
        self.net
    }
}

/// Builds the seed network and runs `cfg.steps` steps. The result depends
/// only on `(cfg, seed)`.
pub fn run_simulation(cfg: &DynamicsConfig, seed: u64) -> Result<SimulationOutput> {
    run_simulation_observed(cfg, seed, |_, _| {})
}

/// [`run_simulation`] with a callback invoked after every step.
pub fn run_simulation_observed<F>(cfg: &DynamicsConfig, seed: u64, mut observe: F) -> Result<SimulationOutput>
where
    F: FnMut(&StepReport, &TradeNetwork),
{
    let mut sim = Simulation::new(*cfg, seed)?;
    let mut u_t = Vec::with_capacity(cfg.steps + 1);
    u_t.push(overall_product(sim.network()));
    let mut avalanches = Vec::new();
    let mut max_energy_drift = 0.0f64;
    for _ in 0..cfg.steps {
        let report = sim.step();
        observe(&report, sim.network());
        u_t.push(report.u_t);
        max_energy_drift = max_energy_drift.max(report.energy_drift.abs());
        avalanches.extend(report.avalanches);
    }
    Ok(SimulationOutput {
        returns: log_returns(&u_t),
        u_t,
        avalanches,
        final_network: sim.into_network(),
        config_echo: ConfigEcho { config: *cfg, seed },
        max_energy_drift,
    })
}
