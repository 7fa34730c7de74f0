//! Tick ingestion, event windows, Breaking-news classification and the
//! cross-event test pipeline.

pub mod classify;
pub mod descriptives;
pub mod events;
pub mod pipeline;
pub mod synthetic;
pub mod ticks;

pub use classify::{classify_event, BreakInfo, Classification, GapRule};
pub use descriptives::{descriptives, Descriptives, Summary};
pub use events::{load_sample, EventRecord, EventSpec, Manifest, Sample, WindowConfig};
pub use pipeline::{run_event_tests, EventTestReport, PipelineConfig};
pub use ticks::{load_ticks, TickLoadOptions, TickRecord};
