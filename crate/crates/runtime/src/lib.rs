//! Runs expanded programs, alone or as a set of replicas ordered by
//! consensus over the simulated network.

pub mod cluster;
pub mod interp;
pub mod script;

pub use cluster::{machine_literals, replay, Cluster, ClusterConfig, ClusterError, Report};
pub use interp::{
    Backend, Call, FieldWrite, Immediate, Interp, MachineParams, RuntimeError, Value,
};
pub use script::{parse_script, ScriptCall, ScriptError};
