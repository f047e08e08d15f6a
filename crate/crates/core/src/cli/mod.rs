//! Config-driven verification runs behind the `warpgeo` binary.

pub mod config;
pub mod report;
pub mod run;

pub use config::{load_config, parse_config, RunConfig, Sampling, Task};
pub use report::{Report, Row, RowKind, TaskSummary, CSV_HEADER};
pub use run::{point_dump, run, sample_points, RunOptions};
