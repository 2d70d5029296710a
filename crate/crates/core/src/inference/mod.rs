//! Invariance testing: residual distributions with and without an
//! intervention on one predictor are compared window by window with a
//! two-sample KS test; an edge `i → j` is declared when more than a
//! fraction `q` of windows reject at level `α`.

mod discover;
mod ks;

pub use discover::{
    discover_graph, test_edge, Aggregation, DiscoveryConfig, DiscoveryReport, EdgeTestReport, PreparedDiscovery,
    WindowScheme,
};
pub use ks::{kolmogorov_q, ks_distance, ks_exact_p_value, ks_two_sample, KsResult};
