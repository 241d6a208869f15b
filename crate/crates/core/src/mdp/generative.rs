use super::MdpInstance;
use crate::error::Result;
use crate::sampling::{AliasTable, RngState};
use std::cell::Cell;

/// Generative-model access: draws `j ~ p(·|i,a)` and counts every draw.
#[derive(Debug)]
pub struct GenerativeModel {
    tables: Vec<AliasTable>,
    counter: Cell<u64>,
}

impl GenerativeModel {
    pub fn new(mdp: &MdpInstance) -> Result<Self> {
        let tables = (0..mdp.num_pairs())
            .map(|k| AliasTable::build(mdp.transition_row(k)))
            .collect::<Result<_>>()?;
        Ok(Self {
            tables,
            counter: Cell::new(0),
        })
    }

    /// Next state after state-action pair index `k`.
    #[inline]
    pub fn sample_pair(&self, k: usize, rng: &mut RngState) -> usize {
        self.counter.set(self.counter.get() + 1);
        self.tables[k].sample(rng)
    }

    /// Next state after taking action `a` in state `i`.
    pub fn sample(&self, mdp: &MdpInstance, i: usize, a: usize, rng: &mut RngState) -> Result<usize> {
        let k = mdp.pair(i, a)?;
        Ok(self.sample_pair(k, rng))
    }

    /// Number of draws served so far.
    pub fn samples(&self) -> u64 {
        self.counter.get()
    }

    pub fn reset_counter(&self) {
        self.counter.set(0);
    }
}
