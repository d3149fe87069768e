//! Semantic backends: runtime monitoring, bounded exhaustive checking and an
//! external verifier adapter.

pub mod bounded;
pub mod eval;
pub mod external;
pub mod monitor;
pub mod runtime;

pub use bounded::{bounded_check, candidate_txs, BoundedBackend, BoundedConfig, Tx};
pub use external::{external_verify, ExternalBackend, ToolConfig};
pub use eval::{eval_bool, Domain, EvalContext, EvalError};
pub use monitor::{obligations, Monitor, Obligation, ObligationKind, Violation};
pub use runtime::{parse_scenario, run_scenario, RuntimeBackend, ScenarioError, IMPL_REF};
