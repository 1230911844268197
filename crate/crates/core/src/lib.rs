//! Multi-tenant placement of quantum circuits onto a networked cluster of
//! QPUs, priority-driven allocation of communication qubits for remote
//! gates, and a seedable discrete-event simulator of probabilistic EPR-pair
//! generation.

pub mod analysis;
pub mod baselines;
pub mod cloud;
pub mod experiment;
pub mod partition;
pub mod placement;
pub mod qasm;
pub mod scheduler;
pub mod seed;
pub mod sim;
pub mod time;
pub mod workload;
