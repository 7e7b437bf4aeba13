//! Directed trade network and preferential-attachment growth.
//!
//! A link `i -> j` means agent `i` produces for agent `j`: it is an out-link
//! (production) of `i` and an in-link (consumption) of `j`. Every link is
//! stored twice, once on each endpoint, and the two copies always agree.

use std::fmt;

use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::SumTree;
use crate::streams::{substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl AgentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    id: AgentId,
    /// Internal economic energy, in labor units.
    pub(crate) energy: f64,
    /// Suppliers of this agent, keyed by source, with link weight.
    pub(crate) in_links: IndexMap<AgentId, f64>,
    /// Consumers of this agent, keyed by target, with link weight.
    pub(crate) out_links: IndexMap<AgentId, f64>,
    alive: bool,
}

impl Agent {
    fn new(id: AgentId) -> Self {
        Self {
            id,
            energy: 0.0,
            in_links: IndexMap::new(),
            out_links: IndexMap::new(),
            alive: true,
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Collapsing does not clear this flag: a collapsed agent keeps its
    /// production links and can be chosen again by later attachments.
    pub fn is_alive(&self) -> bool {
        self.alive
    }

    pub fn k_in(&self) -> usize {
        self.in_links.len()
    }

    pub fn k_out(&self) -> usize {
        self.out_links.len()
    }

    pub fn k_total(&self) -> usize {
        self.in_links.len() + self.out_links.len()
    }

    pub fn in_links(&self) -> impl Iterator<Item = (AgentId, f64)> + '_ {
        self.in_links.iter().map(|(&s, &w)| (s, w))
    }

    pub fn out_links(&self) -> impl Iterator<Item = (AgentId, f64)> + '_ {
        self.out_links.iter().map(|(&t, &w)| (t, w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthConfig {
    /// Seed agents, arranged in a directed ring.
    pub n0: usize,
    /// Links created per new agent.
    pub m_new: usize,
    /// Additive offset on total degree in the attachment kernel.
    pub pa_offset: f64,
    /// Labor units carried by every new link.
    pub default_weight: f64,
    /// Probability that a new link points away from the newcomer.
    pub direction_mix: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            n0: 3,
            m_new: 1,
            pa_offset: 1.0,
            default_weight: 1.0,
            direction_mix: 0.5,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::config("n0", "must be at least 1"));
        }
        if self.m_new == 0 {
            return Err(Error::config("m_new", "must be at least 1"));
        }
        if !(self.pa_offset >= 0.0 && self.pa_offset.is_finite()) {
            return Err(Error::config("pa_offset", "must be a finite value >= 0"));
        }
        if !(self.default_weight > 0.0 && self.default_weight.is_finite()) {
            return Err(Error::config("default_weight", "must be a finite value > 0"));
        }
        if !(0.0..=1.0).contains(&self.direction_mix) {
            return Err(Error::config("direction_mix", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Outcome of one preferential attachment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    pub agent: AgentId,
    pub requested: usize,
    pub created: usize,
}

impl Attachment {
    /// True when fewer links were created than requested because there were
    /// not enough existing agents to link to.
    pub fn clamped(&self) -> bool {
        self.created < self.requested
    }
}

#[derive(Debug, Clone)]
pub struct TradeNetwork {
    agents: Vec<Agent>,
    link_count: usize,
    cfg: GrowthConfig,
    rng: ChaCha8Rng,
    /// Attachment weights `k_total + pa_offset`, indexed by agent.
    attach: SumTree,
}

impl TradeNetwork {
    /// Seeds `cfg.n0` agents on a directed ring `i -> (i + 1) mod n0`. A single
    /// seed agent gets no link (no self-loops).
    pub fn new(cfg: GrowthConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut net = Self {
            agents: Vec::with_capacity(cfg.n0),
            link_count: 0,
            cfg,
            rng: substream(seed, Stream::Growth),
            attach: SumTree::new(),
        };
        for _ in 0..cfg.n0 {
            net.push_agent();
        }
        if cfg.n0 > 1 {
            for i in 0..cfg.n0 {
                let j = (i + 1) % cfg.n0;
                net.insert_link(AgentId(i), AgentId(j), cfg.default_weight);
            }
        }
        Ok(net)
    }

    /// An empty network with no agents, for building fixtures by hand.
    pub fn empty(cfg: GrowthConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            agents: Vec::new(),
            link_count: 0,
            cfg,
            rng: substream(seed, Stream::Growth),
            attach: SumTree::new(),
        })
    }

    pub fn config(&self) -> &GrowthConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn link_count(&self) -> usize {
        self.link_count
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, id: AgentId) -> Result<&Agent> {
        self.agents.get(id.0).ok_or(Error::UnknownAgent(id))
    }

    pub fn contains(&self, id: AgentId) -> bool {
        id.0 < self.agents.len()
    }

    pub fn has_link(&self, source: AgentId, target: AgentId) -> bool {
        self.agents
            .get(source.0)
            .is_some_and(|a| a.out_links.contains_key(&target))
    }

    pub fn degrees(&self, id: AgentId) -> Result<(usize, usize)> {
        let a = self.agent(id)?;
        Ok((a.k_in(), a.k_out()))
    }

    pub fn energy(&self, id: AgentId) -> Result<f64> {
        Ok(self.agent(id)?.energy)
    }

    pub fn set_energy(&mut self, id: AgentId, energy: f64) -> Result<()> {
        let a = self.agents.get_mut(id.0).ok_or(Error::UnknownAgent(id))?;
        a.energy = energy;
        Ok(())
    }

    pub fn total_energy(&self) -> f64 {
        self.agents.iter().map(|a| a.energy).sum()
    }

    /// Appends an isolated agent.
    pub fn add_agent(&mut self) -> AgentId {
        self.push_agent()
    }

    /// Adds `source -> target` with the given weight. Rejects unknown agents,
    /// self-loops, duplicates and nonpositive weights.
    pub fn add_link(&mut self, source: AgentId, target: AgentId, weight: f64) -> Result<()> {
        self.agent(source)?;
        self.agent(target)?;
        if source == target {
            return Err(Error::Domain(format!("self-loop on agent {source}")));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Domain(format!("link weight {weight} is not positive")));
        }
        if self.has_link(source, target) {
            return Err(Error::Domain(format!("duplicate link {source} -> {target}")));
        }
        self.insert_link(source, target, weight);
        Ok(())
    }

    /// Grows the network by one agent linked to up to `m_new` distinct existing
    /// agents. Each partner is drawn with probability proportional to
    /// `k_total + pa_offset`; each link points newcomer -> partner with
    /// probability `direction_mix` and partner -> newcomer otherwise.
    pub fn attach_preferential(&mut self, m_new: usize, direction_mix: f64) -> Attachment {
        let partners = self.draw_distinct(m_new);
        let agent = self.push_agent();
        let w = self.cfg.default_weight;
        for &p in &partners {
            if self.rng.gen::<f64>() < direction_mix {
                self.insert_link(agent, p, w);
            } else {
                self.insert_link(p, agent, w);
            }
        }
        Attachment {
            agent,
            requested: m_new,
            created: partners.len(),
        }
    }

    /// Adds one link between two existing agents, both drawn preferentially.
    /// The orientation follows `direction_mix` relative to the first draw.
    /// Returns `None` when no new link could be placed.
    pub fn connect_preferential(&mut self, direction_mix: f64) -> Option<(AgentId, AgentId)> {
        const ATTEMPTS: usize = 32;
        if self.agents.len() < 2 {
            return None;
        }
        for _ in 0..ATTEMPTS {
            let pair = self.draw_distinct(2);
            let (a, b) = (pair[0], pair[1]);
            let (s, t) = if self.rng.gen::<f64>() < direction_mix {
                (a, b)
            } else {
                (b, a)
            };
            if !self.has_link(s, t) {
                self.insert_link(s, t, self.cfg.default_weight);
                return Some((s, t));
            }
        }
        None
    }

    /// Deletes every in-link of `id` together with the mirrored out-link at
    /// each supplier. Returns the number of links removed.
    pub fn remove_in_links(&mut self, id: AgentId) -> Result<usize> {
        self.agent(id)?;
        Ok(self.strip_in_links(id).len())
    }

    /// Removes the in-links of a known agent, returning the suppliers that
    /// lost a production link, in removal order.
    pub(crate) fn strip_in_links(&mut self, id: AgentId) -> Vec<AgentId> {
        let suppliers = std::mem::take(&mut self.agents[id.0].in_links);
        for &s in suppliers.keys() {
            let removed = self.agents[s.0].out_links.swap_remove(&id);
            debug_assert!(removed.is_some(), "mirror broken at {s} -> {id}");
            self.refresh_weight(s);
        }
        self.refresh_weight(id);
        self.link_count -= suppliers.len();
        suppliers.into_keys().collect()
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub(crate) fn agents_mut(&mut self) -> &mut [Agent] {
        &mut self.agents
    }

    /// Full-scan check of the link bookkeeping. Intended for tests and debug
    /// sweeps; cost is linear in the number of links.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let mut n_in = 0;
        let mut n_out = 0;
        for a in &self.agents {
            n_in += a.k_in();
            n_out += a.k_out();
            for (&t, &w) in &a.out_links {
                if t == a.id {
                    return Err(format!("self-loop at {t}"));
                }
                if w <= 0.0 {
                    return Err(format!("nonpositive weight on {} -> {t}", a.id));
                }
                match self.agents.get(t.0).and_then(|b| b.in_links.get(&a.id)) {
                    Some(&w2) if w2 == w => {}
                    _ => return Err(format!("out-link {} -> {t} has no mirror", a.id)),
                }
            }
            for (&s, _) in &a.in_links {
                if !self.has_link(s, a.id) {
                    return Err(format!("in-link {s} -> {} has no mirror", a.id));
                }
            }
            let expect = a.k_total() as f64 + self.cfg.pa_offset;
            if self.attach.get(a.id.0) != expect {
                return Err(format!("stale attachment weight at {}", a.id));
            }
        }
        if n_in != self.link_count || n_out != self.link_count {
            return Err(format!(
                "link_count {} but in-sum {n_in}, out-sum {n_out}",
                self.link_count
            ));
        }
        Ok(())
    }

    fn push_agent(&mut self) -> AgentId {
        let id = AgentId(self.agents.len());
        self.agents.push(Agent::new(id));
        self.attach.push(self.cfg.pa_offset);
        id
    }

    fn insert_link(&mut self, source: AgentId, target: AgentId, weight: f64) {
        self.agents[source.0].out_links.insert(target, weight);
        self.agents[target.0].in_links.insert(source, weight);
        self.link_count += 1;
        self.refresh_weight(source);
        self.refresh_weight(target);
    }

    fn refresh_weight(&mut self, id: AgentId) {
        let w = self.agents[id.0].k_total() as f64 + self.cfg.pa_offset;
        self.attach.set(id.0, w);
    }

    /// Draws up to `m` distinct existing agents proportionally to their
    /// attachment weight. Chosen agents are masked out of the sampler until the
    /// draw completes, which is the same law as redrawing duplicates. When only
    /// zero-weight agents remain they are drawn uniformly.
    fn draw_distinct(&mut self, m: usize) -> Vec<AgentId> {
        let m = m.min(self.attach.len());
        let mut chosen = Vec::with_capacity(m);
        let mut saved = Vec::with_capacity(m);
        while chosen.len() < m {
            let pick = match self.attach.sample(&mut self.rng) {
                Some(i) => i,
                None => {
                    let rest: Vec<usize> = (0..self.agents.len())
                        .filter(|&i| !chosen.contains(&AgentId(i)))
                        .collect();
                    rest[self.rng.gen_range(0..rest.len())]
                }
            };
            saved.push((pick, self.attach.get(pick)));
            self.attach.set(pick, 0.0);
            chosen.push(AgentId(pick));
        }
        for (i, w) in saved {
            self.attach.set(i, w);
        }
        chosen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n0: usize) -> GrowthConfig {
        GrowthConfig {
            n0,
            ..GrowthConfig::default()
        }
    }

    #[test]
    fn ring_of_three() {
        let net = TradeNetwork::new(cfg(3), 0).unwrap();
        assert_eq!(net.len(), 3);
        assert_eq!(net.link_count(), 3);
        for i in 0..3 {
            assert_eq!(net.degrees(AgentId(i)).unwrap(), (1, 1));
        }
        assert!(net.has_link(AgentId(2), AgentId(0)));
        net.check_consistency().unwrap();
    }

    #[test]
    fn single_seed_has_no_self_loop() {
        let net = TradeNetwork::new(cfg(1), 0).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.link_count(), 0);
    }

    #[test]
    fn zero_seed_agents_rejected() {
        let err = TradeNetwork::new(cfg(0), 0).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "n0"));
        let bad = GrowthConfig {
            m_new: 0,
            ..GrowthConfig::default()
        };
        assert!(TradeNetwork::new(bad, 0).is_err());
    }

    #[test]
    fn single_agent_is_always_the_partner() {
        let mut net = TradeNetwork::new(cfg(1), 9).unwrap();
        let att = net.attach_preferential(1, 0.5);
        assert_eq!(att.created, 1);
        assert_eq!(net.link_count(), 1);
        let (kin, kout) = net.degrees(AgentId(0)).unwrap();
        assert_eq!(kin + kout, 1);
    }

    #[test]
    fn attachment_clamps_to_population() {
        let mut net = TradeNetwork::new(cfg(3), 1).unwrap();
        let att = net.attach_preferential(5, 0.5);
        assert_eq!(att.created, 3);
        assert!(att.clamped());
        assert_eq!(net.link_count(), 6);
        net.check_consistency().unwrap();
    }

    #[test]
    fn remove_in_links_bookkeeping() {
        let mut net = TradeNetwork::empty(cfg(1), 0).unwrap();
        let hub = net.add_agent();
        let leaves: Vec<_> = (0..4).map(|_| net.add_agent()).collect();
        for &l in &leaves {
            net.add_link(l, hub, 1.0).unwrap();
        }
        net.add_link(hub, leaves[0], 1.0).unwrap();
        assert_eq!(net.link_count(), 5);
        assert_eq!(net.remove_in_links(hub).unwrap(), 4);
        assert_eq!(net.link_count(), 1);
        for &l in &leaves {
            assert_eq!(net.degrees(l).unwrap().1, 0);
        }
        assert_eq!(net.degrees(hub).unwrap(), (0, 1));
        net.check_consistency().unwrap();
        // Second call is a no-op.
        assert_eq!(net.remove_in_links(hub).unwrap(), 0);
        assert_eq!(net.link_count(), 1);
    }

    #[test]
    fn degrees_of_named_shapes() {
        let mut net = TradeNetwork::empty(cfg(1), 0).unwrap();
        let hub = net.add_agent();
        for _ in 0..5 {
            let l = net.add_agent();
            net.add_link(l, hub, 1.0).unwrap();
        }
        let lonely = net.add_agent();
        assert_eq!(net.degrees(hub).unwrap(), (5, 0));
        assert_eq!(net.degrees(lonely).unwrap(), (0, 0));
        assert!(matches!(
            net.degrees(AgentId(99)),
            Err(Error::UnknownAgent(AgentId(99)))
        ));
        assert!(net.remove_in_links(AgentId(99)).is_err());
    }

    #[test]
    fn rejects_bad_links() {
        let mut net = TradeNetwork::new(cfg(3), 0).unwrap();
        assert!(net.add_link(AgentId(0), AgentId(0), 1.0).is_err());
        assert!(net.add_link(AgentId(0), AgentId(1), 1.0).is_err());
        assert!(net.add_link(AgentId(1), AgentId(0), 0.0).is_err());
        net.add_link(AgentId(1), AgentId(0), 2.0).unwrap();
        net.check_consistency().unwrap();
    }

    #[test]
    fn zero_offset_skips_isolated_agents() {
        let c = GrowthConfig {
            n0: 4,
            pa_offset: 0.0,
            ..GrowthConfig::default()
        };
        let mut net = TradeNetwork::new(c, 5).unwrap();
        let isolated: Vec<_> = (0..6).map(|_| net.add_agent()).collect();
        for _ in 0..500 {
            let picked = net.draw_distinct(1)[0];
            assert!(!isolated.contains(&picked));
        }
    }

    #[test]
    fn zero_offset_falls_back_to_uniform_when_all_isolated() {
        let c = GrowthConfig {
            n0: 1,
            pa_offset: 0.0,
            ..GrowthConfig::default()
        };
        let mut net = TradeNetwork::new(c, 5).unwrap();
        net.add_agent();
        let att = net.attach_preferential(2, 1.0);
        assert_eq!(att.created, 2);
        net.check_consistency().unwrap();
    }
}
