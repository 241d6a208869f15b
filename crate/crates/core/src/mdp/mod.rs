//! MDP instances, the generative sampling model, instance generators and exact oracles.

mod generate;
mod generative;
mod instance;
mod oracle;

pub use generate::{generate_instance, GeneratorParams, InstanceKind};
pub use generative::GenerativeModel;
pub use instance::{Feasibility, MdpInstance, Policy, FORMAT_TAG};
pub use oracle::{
    chain_mixing_time, deterministic_policy_count, evaluate_policy, for_each_deterministic_policy, induced_chain,
    max_min_occupancy, mixing_time, optimal_oracle, power_decay_check, stationary_distribution, verify_norm_bounds,
    NormCheck, NormKindReport, OptimalSolution, PolicyEvaluation, PowerDecay,
};
