//! Empirical checks of the representation-preservation guarantees of
//! constrained fine-tuning after instance-discrimination pretraining.

mod checks;
mod lipschitz;
mod protocol;

pub use checks::{
    check_corollary1, check_corollary1_reps, check_theorem1, check_theorem1_reps, corollary_bound_constant,
    mean_pairwise_inner, CorollaryCheck, PairPlan, TheoremCheck, COROLLARY_LIMIT, THEOREM_SLACK,
};
pub use lipschitz::{estimate_lipschitz, estimate_lipschitz_with, LipschitzEstimate};
pub use protocol::{theory_protocol, TheoremCheckReport, TheoryConfig, TheoryRun, THEORY_REPORT_FILE};

#[cfg(test)]
mod tests;
