//! Benchmark fixtures shared by the criterion targets.

use zeno_fusion::fusion::FusionScenario;
use zeno_fusion::hamiltonian::{ModelKind, ModelParams};

/// Fast-preset fusion attempt with cavity and atomic loss.
pub fn lossy_scenario(kind: ModelKind) -> FusionScenario {
    let p = ModelParams {
        omega: 0.05,
        kappa: 0.1,
        gamma: 0.1,
        ..Default::default()
    };
    FusionScenario::new(kind, &p, 5, 5, true).expect("valid scenario")
}
