//! Evolving scale-free trade networks with collapse avalanches.
//!
//! Agents trade labor along directed links that are created by preferential
//! attachment. Every step the trades are settled into each agent's internal
//! energy; agents whose deficit exceeds a degree-proportional threshold
//! collapse, lose their consumption links and can drag their suppliers down
//! with them. The overall product (total link weight) and its log-returns are
//! the macroscopic observables.
//!
//! Around the simulator sit the analysis tools: topology profiles
//! ([`metrics`]), heavy-tail fitting and the degree/return exponent bridge
//! ([`tails`]), box-covering renormalization ([`renorm`]), Pareto
//! Value-at-Risk with its exponent envelope ([`risk`]) and the file formats
//! used by the command-line tool ([`io`]).

pub mod dynamics;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod netcore;
pub mod renorm;
pub mod risk;
mod sampler;
pub mod tails;

pub use error::{Error, Result};
pub use netcore::{AgentId, GrowthConfig, TradeNetwork};

/// Named random substreams derived from one master seed.
pub mod streams {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Stream {
        Growth = 1,
        Covering = 2,
        Sampling = 3,
    }

    /// Independent generator for `stream` under `seed`. Changing the draws
    /// made on one stream never shifts another.
    pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        rng
    }
}
