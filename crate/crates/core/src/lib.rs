//! Table structure recognition as logical-location regression.
//!
//! * [`table`]: logical coordinates, adjacency, markup emission and parsing.
//! * [`metrics`]: logical accuracy, adjacency F1, TEDS, BLEU, IoU matching.
//! * [`synth`]: seeded synthetic corpora with word boxes and distance labels.
//! * [`tensor`]: a small float64 reverse-mode autodiff engine with Adam.
//! * [`regressor`]: the cascade logical-location regressor and its losses.
//! * [`ldp`]: logical-distance pre-training and weight transfer.
//! * [`cli`]: the `tablelogic` command-line front end.

pub mod cli;
pub mod error;
pub mod ldp;
pub mod metrics;
pub mod regressor;
pub mod synth;
pub mod table;
pub mod tensor;

pub use error::{Error, Result};
