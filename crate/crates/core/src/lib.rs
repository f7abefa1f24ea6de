pub mod compile;
pub mod diagnostic;
pub mod graph;
pub mod synth;
pub mod text;
pub mod value;

pub use diagnostic::{Diagnostic, Severity};
pub use value::{deep_equal, Kind, Value};
