//! Abstraction tower for the mutual annihilation protocol: the
//! lower-bounding two-species chain, scalar M-chains that dominate it, the
//! pathwise coupling between the two and extinction-time analytics.

mod coupling;
mod dominance;
mod lower_bound;
mod mchain;

pub use coupling::{simulate_coupling, CouplingRun};
pub use dominance::{check_dominance, Condition, DominanceReport, DominanceViolation, DOMINANCE_TOLERANCE};
pub use lower_bound::{lb_transition_probs, LowerBoundingChain, MinTransition};
pub use mchain::{
    expected_extinction_steps, mchain_state_after, paper_mchain, simulate_mchain, ExtinctionSteps, MChainRun,
    MChainSpec,
};
