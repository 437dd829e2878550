//! Shared fixtures for the criterion benchmarks.

use lf_core::bench::BenchmarkCase;
use lf_core::transform::{run_pipeline, PassConfig};
use lf_core::IrModule;

/// A registry kernel in its original form.
pub fn raw(name: &str) -> IrModule {
    BenchmarkCase::lookup(name).and_then(|c| c.generate()).expect("registry case")
}

/// A registry kernel after the default pipeline.
pub fn transformed(name: &str) -> IrModule {
    run_pipeline(&raw(name), &PassConfig::default()).expect("pipeline").module
}
