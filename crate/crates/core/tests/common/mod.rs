use knockoff_causal::synth::{Dependence, ScmEdge, ScmSpec};

/// Five AR(1) nodes (a = 0.5, noise variance 0.3) with one linear link from
/// node 0 to node 3 at lag 2, coupling 0.8.
pub fn driven_spec() -> ScmSpec {
    ScmSpec {
        n_nodes: 5,
        autocoefficients: vec![0.5; 5],
        edges: vec![ScmEdge {
            source: 0,
            target: 3,
            coupling: 0.8,
            lag: 2,
            function: Dependence::Linear,
        }],
        noise_variances: vec![0.3; 5],
        length: 2000,
        burn_in: 500,
    }
}
