//! End-to-end certified bounds, report generation and the library side of
//! the `pkl` command-line tool.

pub mod config;
pub mod e2e;
pub mod error;
pub mod report;

pub use config::{read_poly, RunConfig};
pub use e2e::{construct_certificate, end_to_end_bound, end_to_end_bound_with, ConstructParams, EndToEndReport, Mode};
pub use error::{BenchError, Result};
pub use report::{figures_data, sosdist_table, table_vrd, FigureRow, SosDistTable, VrdCell};
