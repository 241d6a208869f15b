//! Seeded randomness and weighted discrete samplers.

mod alias;
mod rng;
mod sumtree;

pub use alias::AliasTable;
pub use rng::{RngState, Stream};
pub use sumtree::{LinearScan, SamplerKind, SumTree, WeightSampler};
