//! Agent-to-cloud sync and the signed request envelope.

mod batch;
mod envelope;
mod keys;
mod schedule;
mod transport;
pub mod wire;

pub use batch::{handle_ack, make_batch, SyncBatch};
pub use envelope::{authorize, verify_and_scope, MessageKind, SignedEnvelope, WIRE_VERSION};
pub use keys::{derive_signing_key, KeyRegistry, SERVER_ID};
pub use schedule::{SyncOutcome, SyncScheduler};
pub use transport::{
    read_frame, serve_connection, spawn_tcp_server, Delivery, Endpoint, FaultyTransport,
    TcpEndpoint, TransportStats, Uplink,
};
