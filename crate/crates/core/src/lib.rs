//! Core of the `lf` toolchain: the LF-IR dialect, a reference interpreter,
//! the hardware-enabling transformations, memory partitioning, a
//! resource-constrained scheduler and the micro-benchmark suite.

pub mod bench;
pub mod diag;
pub mod interp;
pub mod ir;
pub mod partition;
pub mod sched;
pub mod transform;

pub use diag::{Diagnostic, Diagnostics, Location, Severity};
pub use ir::{parse_module, print_module, validate, IrModule};
pub use interp::{compare_images, run, Bank, ExecTrace, MemoryImage, ScalarKind, Word};
pub use transform::{run_pipeline, PassConfig, PassLog, PipelineOutput};
