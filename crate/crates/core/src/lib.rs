//! Active network telescope measurement pipeline.
//!
//! The crate turns raw packet captures from an active telescope into
//! structured exploit events and plot-ready analytics:
//!
//! * [`packet`] — classic capture-file parsing, the active responder state
//!   machine, and rotation batching.
//! * [`reassembly`] — connection keying, retransmission dedup, and byte
//!   stream reconstruction.
//! * [`decode`] — the deterministic multi-encoding decode and normalization
//!   chain that produces stable text for matching.
//! * [`signature`] — the three-indicator conjunctive detector for React
//!   Flight prototype-chain exploitation, plus backend endpoint extraction.
//! * [`geo`] / [`store`] — offline geo/ASN enrichment and the daily
//!   partitioned event store.
//! * [`sim`] — the synthetic campaign generator that doubles as the
//!   verification oracle for everything upstream.
//! * [`analytics`] — time series, correlation, coverage, country ranking,
//!   coupling, growth curves, and port heatmaps over the store.
//! * [`pipeline`] — glue that runs captures end to end into the store.

pub mod analytics;
pub mod decode;
pub mod geo;
pub mod packet;
pub mod pipeline;
pub mod reassembly;
pub mod signature;
pub mod sim;
pub mod store;

pub use decode::{decode, normalize, printable_ratio, DecodeConfig, DecodeStep, DecodedPayload};
pub use packet::{
    parse_capture_file, rotate, PacketRecord, ParsedCapture, ResponderState, TcpFlags,
    TelescopeConfig,
};
pub use reassembly::{assemble, dedup, ConnectionKey, ConnectionTracker, ReassembledConnection};
pub use signature::{
    classify_connection, extract_backends, match_signature, BackendScan, ClassifyOptions,
    ExploitEvent, SignatureMatch,
};
pub use store::{append, enrich, read_store, EventRow, WriteReceipt};
