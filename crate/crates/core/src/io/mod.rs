//! Trace files (CSV) and line plots (SVG).

pub mod csv;
pub mod svg;

pub use self::csv::{read_trace, read_trace_from, write_trace, write_trace_to};
pub use self::svg::{emit_svg, LineStyle, PlotSpec, SeriesSpec};
