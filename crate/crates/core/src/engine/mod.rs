//! The round-based server/client state machine.
//!
//! One round: sample clients, hand each a payload from the algorithm,
//! train locally (optionally on a worker pool), validate and optionally
//! privatize the returned updates, aggregate in ascending client-id order,
//! then evaluate.

mod aggregate;
mod config;
mod metrics;
mod sim;
mod state;

pub use aggregate::weighted_average;
pub use config::{HyperParams, RunConfig};
pub use metrics::{write_metrics_csv, RoundMetrics, METRICS_HEADER};
pub use sim::{evaluate_global, evaluate_personalized, sample_clients, Simulation};
pub use state::{ClassEntry, ClassTable, ClientState, ServerState};
