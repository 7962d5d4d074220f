//! Accumulators shared by the link-level uplink and downlink simulations.

use crate::channel::C64;
use crate::stats::{Batched, Estimate, Projection, Running, DEFAULT_BATCHES};

/// Per-user result of a link-level simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkUser {
    /// Use-and-forget SINR: coherent power over residual power.
    pub sinr: Estimate,
    /// Least-squares effective gain on the user's own symbol.
    pub gain: C64,
    /// Mean power leaked from the other users' symbols.
    pub inter_user_power: f64,
    /// Mean power of the user's own symbol term.
    pub own_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub users: Vec<LinkUser>,
    pub redraws: usize,
}

impl LinkReport {
    pub fn sinr(&self) -> Vec<Estimate> {
        self.users.iter().map(|u| u.sinr).collect()
    }
}

pub struct LinkAccumulator {
    proj: Vec<Batched<Projection>>,
    inter: Vec<Running>,
    own: Vec<Running>,
}

impl LinkAccumulator {
    pub fn new(users: usize, n_samples: usize) -> Self {
        Self {
            proj: vec![Batched::new(n_samples, DEFAULT_BATCHES); users],
            inter: vec![Running::default(); users],
            own: vec![Running::default(); users],
        }
    }

    /// Records one draw for user `u`: the row `c` of effective coefficients
    /// (output u per unit symbol i), the symbols and the additive noise.
    pub fn push(&mut self, sample: usize, u: usize, c: &[C64], symbols: &[C64], noise: C64) {
        let own = c[u] * symbols[u];
        let inter: C64 = c
            .iter()
            .zip(symbols)
            .enumerate()
            .filter(|(i, _)| *i != u)
            .map(|(_, (ci, si))| ci * si)
            .sum();
        self.proj[u].batch_mut(sample).push(own + inter + noise, symbols[u]);
        self.inter[u].push(inter.norm_sqr());
        self.own[u].push(own.norm_sqr());
    }

    pub fn finish(self, redraws: usize) -> LinkReport {
        let users = self
            .proj
            .iter()
            .zip(&self.inter)
            .zip(&self.own)
            .map(|((p, i), o)| LinkUser {
                sinr: p.sinr(),
                gain: p.total().gain(),
                inter_user_power: i.mean(),
                own_power: o.mean(),
            })
            .collect();
        LinkReport { users, redraws }
    }
}
