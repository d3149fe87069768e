//! Deterministic chain simulator: accounts, storage, transactions and nested calls.

pub mod exec;
pub mod journal;
pub mod persist;
pub mod state;
pub mod storage;
pub mod value;

pub use journal::{Journaled, ReplayError};
pub use exec::{FrameExit, FrameInfo, FrameKind, Limits, NoObserver, Observer, Receipt, SimError, Status, WrapEvent};
pub use state::{Account, ChainState, Code, LogEntry, World, FIRST_ADDRESS};
pub use storage::{Slot, Storage, StorageError};
pub use value::{Address, Bytes, Value};
