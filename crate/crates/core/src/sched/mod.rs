//! Resource-constrained scheduling of basic blocks and trace-driven cycle
//! counting.

mod check;
mod cycles;
mod dfg;
mod list;
mod optimal;
mod render;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::ir::{BinOp, CastOp, InstKind, Instruction};

pub use check::check_schedule;
pub use cycles::{count_cycles, schedule_module, CycleReport};
pub use dfg::{build_dfg, DependenceGraph, Edge, EdgeKind, Node};
pub use list::schedule_block;
pub use optimal::{lower_bound, optimal_schedule};
pub use render::{parse_report, render_gantt, render_report, ReportLine, ScheduleReport};

/// Operation classes that share a latency and, optionally, a unit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpClass {
    Load,
    Store,
    /// add, sub, icmp, select, gep and integer casts.
    IntAlu,
    IntMul,
    IntDiv,
    FAdd,
    FMul,
    FDiv,
    FCmp,
    /// sitofp, fptosi.
    Convert,
    Call,
}

impl OpClass {
    pub const ALL: [OpClass; 11] = [
        OpClass::Load,
        OpClass::Store,
        OpClass::IntAlu,
        OpClass::IntMul,
        OpClass::IntDiv,
        OpClass::FAdd,
        OpClass::FMul,
        OpClass::FDiv,
        OpClass::FCmp,
        OpClass::Convert,
        OpClass::Call,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpClass::Load => "load",
            OpClass::Store => "store",
            OpClass::IntAlu => "alu",
            OpClass::IntMul => "mul",
            OpClass::IntDiv => "div",
            OpClass::FAdd => "fadd",
            OpClass::FMul => "fmul",
            OpClass::FDiv => "fdiv",
            OpClass::FCmp => "fcmp",
            OpClass::Convert => "convert",
            OpClass::Call => "call",
        }
    }

    /// Class of a schedulable instruction; `None` for phis and terminators.
    pub fn of(i: &Instruction) -> Option<OpClass> {
        Some(match &i.kind {
            InstKind::Load { .. } => OpClass::Load,
            InstKind::Store { .. } => OpClass::Store,
            InstKind::Gep { .. } | InstKind::Icmp { .. } | InstKind::Select { .. } => OpClass::IntAlu,
            InstKind::Cast { op: CastOp::SiToFp | CastOp::FpToSi, .. } => OpClass::Convert,
            InstKind::Cast { .. } => OpClass::IntAlu,
            InstKind::Binary { op, .. } => match op {
                BinOp::Add | BinOp::Sub => OpClass::IntAlu,
                BinOp::Mul => OpClass::IntMul,
                BinOp::SDiv | BinOp::SRem => OpClass::IntDiv,
                BinOp::FAdd | BinOp::FSub => OpClass::FAdd,
                BinOp::FMul => OpClass::FMul,
                BinOp::FDiv => OpClass::FDiv,
            },
            InstKind::Fcmp { .. } => OpClass::FCmp,
            InstKind::Call { .. } => OpClass::Call,
            InstKind::Phi { .. } | InstKind::Br { .. } | InstKind::CondBr { .. } | InstKind::Ret { .. } => return None,
        })
    }
}

impl fmt::Display for OpClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        OpClass::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let known: Vec<_> = OpClass::ALL.iter().map(|c| c.name()).collect();
            format!("unknown op class `{s}` (known: {})", known.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceModel {
    pub latency: BTreeMap<OpClass, u32>,
    /// Accesses per memory bank per cycle.
    pub ports: u32,
    /// Unit counts; classes not listed are unbounded.
    pub units: BTreeMap<OpClass, u32>,
    /// Latency-0 classes whose dependent chains may share a cycle.
    pub chainable: Vec<OpClass>,
    /// Longest chain of chainable operations in one cycle.
    pub max_chain: u32,
    /// Cycles charged per executed branch.
    pub branch: u32,
}

impl Default for ResourceModel {
    fn default() -> Self {
        use OpClass::*;
        let latency = [
            (Load, 2),
            (Store, 1),
            (IntAlu, 0),
            (IntMul, 1),
            (IntDiv, 8),
            (FAdd, 5),
            (FMul, 4),
            (FDiv, 16),
            (FCmp, 5),
            (Convert, 5),
            (Call, 10),
        ]
        .into_iter()
        .collect();
        ResourceModel { latency, ports: 2, units: BTreeMap::new(), chainable: vec![IntAlu], max_chain: 3, branch: 1 }
    }
}

impl ResourceModel {
    pub fn with_ports(mut self, ports: u32) -> Self {
        self.ports = ports.max(1);
        self
    }

    pub fn with_latency(mut self, class: OpClass, lat: u32) -> Self {
        self.latency.insert(class, lat);
        self
    }

    pub fn with_units(mut self, class: OpClass, n: u32) -> Self {
        self.units.insert(class, n.max(1));
        self
    }

    pub fn lat(&self, c: OpClass) -> u32 {
        self.latency.get(&c).copied().unwrap_or(1)
    }

    pub fn is_chainable(&self, c: OpClass) -> bool {
        self.lat(c) == 0 && self.chainable.contains(&c)
    }
}

/// One scheduled instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    /// Index of the instruction within its block.
    pub inst: usize,
    pub start: u32,
    pub lat: u32,
    pub bank: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSchedule {
    pub function: String,
    pub block: String,
    /// One entry per DFG node, in program order.
    pub slots: Vec<Slot>,
    /// Cycles from block entry until the last instruction completes.
    pub latency: u32,
}

impl BlockSchedule {
    /// Accesses per bank per cycle.
    pub fn port_usage(&self) -> BTreeMap<(String, u32), u32> {
        let mut out = BTreeMap::new();
        for s in &self.slots {
            if let Some(b) = &s.bank {
                *out.entry((b.clone(), s.start)).or_insert(0) += 1;
            }
        }
        out
    }
}

/// Makespan of a set of start times: the end of the last instruction, each
/// occupying at least one cycle.
pub(crate) fn makespan(g: &DependenceGraph, start: &[u32]) -> u32 {
    g.nodes.iter().zip(start).map(|(n, s)| s + n.lat.max(1)).max().unwrap_or(0)
}

pub(crate) fn to_block_schedule(g: &DependenceGraph, start: &[u32]) -> BlockSchedule {
    BlockSchedule {
        function: g.function.clone(),
        block: g.block.clone(),
        slots: g
            .nodes
            .iter()
            .zip(start)
            .map(|(n, &s)| Slot { inst: n.inst, start: s, lat: n.lat, bank: n.bank.clone() })
            .collect(),
        latency: makespan(g, start),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleResult {
    pub blocks: Vec<BlockSchedule>,
    /// Filled in by [`count_cycles`].
    pub total_cycles: Option<u64>,
}

impl ScheduleResult {
    pub fn block(&self, function: &str, block: &str) -> Option<&BlockSchedule> {
        self.blocks.iter().find(|b| b.function == function && b.block == block)
    }
}
