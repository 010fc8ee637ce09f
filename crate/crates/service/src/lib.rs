//! Annotation service: SQLite persistence, campaign state and the HTTP/JSON
//! API used by annotators and the simulator.

pub mod api;
pub mod clock;
pub mod error;
pub mod export;
pub mod lock;
pub mod platform;
pub mod store;

pub use api::{router, serve, shared, SharedPlatform, Submission};
pub use clock::{Clock, ManualClock, SystemClock};
pub use error::ServiceError;
pub use export::ExportVariant;
pub use lock::DataDirLock;
pub use platform::{
    BatchPayload, Platform, Registration, RoundView, Settings, DEFAULT_SESSION_TTL_SECS,
};
pub use store::Store;
