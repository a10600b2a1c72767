//! Consensus layer: action encoding, a seeded network simulator, the durable
//! replica log and a multi-Paxos replica, plus a cluster harness that wires
//! them together.

pub mod codec;
pub mod net;
pub mod paxos;
pub mod rng;
pub mod sim;
pub mod storage;

pub use codec::{ActionKey, CodecError, Envelope, FieldValue, SerializedAction};
pub use net::{Event, NetConfig, NetError, Network, NodeId, Partition};
pub use paxos::{Ballot, Delivery, DeliveryKind, Msg, Outputs, Replica, ReplicaConfig, Value};
pub use sim::{Notice, Sent, SimCluster, SimError};
pub use storage::{FailingStorage, FileStorage, MemStorage, Record, Storage, StorageError};
