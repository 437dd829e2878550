use rayon::prelude::*;

use super::{build_dfg, schedule_block, ResourceModel, ScheduleResult};
use crate::diag::Diagnostic;
use crate::interp::{run_entry, ExecTrace, MemoryImage};
use crate::ir::IrModule;

/// List-schedules every block of every function.
pub fn schedule_module(m: &IrModule, r: &ResourceModel) -> ScheduleResult {
    let sites: Vec<(usize, usize)> =
        m.functions.iter().enumerate().flat_map(|(fi, f)| (0..f.blocks.len()).map(move |bi| (fi, bi))).collect();
    let blocks = sites
        .par_iter()
        .map(|&(fi, bi)| schedule_block(&build_dfg(m, &m.functions[fi], bi, r), r))
        .collect();
    ScheduleResult { blocks, total_cycles: None }
}

#[derive(Debug, Clone)]
pub struct CycleReport {
    pub total: u64,
    pub schedule: ScheduleResult,
    pub trace: ExecTrace,
    pub output: MemoryImage,
}

/// Runs the entry on `img` and charges each visited block its scheduled
/// latency, plus the branch cost per executed branch.
pub fn count_cycles(m: &IrModule, r: &ResourceModel, img: &MemoryImage) -> Result<CycleReport, Diagnostic> {
    let (output, trace) = run_entry(m, img)?;
    let mut schedule = schedule_module(m, r);
    let mut total = trace.branches * u64::from(r.branch);
    for b in &schedule.blocks {
        total += trace.visits_of(&b.function, &b.block) * u64::from(b.latency);
    }
    schedule.total_cycles = Some(total);
    Ok(CycleReport { total, schedule, trace, output })
}
