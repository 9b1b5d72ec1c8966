//! Exact tabular oracles and the heterogeneity / aggregation diagnostics.

mod diagnostics;
mod tabular;

pub use diagnostics::{
    fedrac_ideal_target, fedrac_value_target, kappa_monte_carlo, measure_kappa, measure_linearization_error,
    measure_omega, omega_monte_carlo, Estimate,
};
pub use tabular::{
    bellman_q, brute_force_fed_optimum, deterministic_policy, discounted_visitation, exact_policy_eval,
    federated_objective, greedy, policy_table, value_iteration, FedOptimum, MAX_ENUMERATION,
};
