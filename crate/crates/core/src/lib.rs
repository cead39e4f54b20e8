//! Large-MIMO space-time block codes from cyclic division algebras, detected
//! by multistage likelihood ascent search.
//!
//! The crate covers the signal model, code construction, the Rayleigh
//! channel, the detector with its soft outputs, training-based channel
//! estimation, and a Monte-Carlo BER harness.

pub mod channel;
pub mod detector;
pub mod estimation;
pub mod error;
pub mod harness;
pub mod signal;
pub mod stbc;
pub mod system;

pub use channel::{SnrModel, Frame, Phase};
pub use detector::{mlas_detect, DetectorConfig, FilterKind, InitialFilter};
pub use error::{Error, Result};
pub use signal::{SignalSet, SignalSpace, SymbolVector};
pub use stbc::{CdaCode, CodeVariant};
pub use system::{Dims, RealSystem};
