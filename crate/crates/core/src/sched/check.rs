use std::collections::HashMap;

use super::{makespan, BlockSchedule, DependenceGraph, ResourceModel};

/// Verifies dependence timing, chain depth, per-cycle resource budgets and
/// the reported latency. Returns every violation found.
pub fn check_schedule(g: &DependenceGraph, s: &BlockSchedule, r: &ResourceModel) -> Result<(), Vec<String>> {
    let mut errs = Vec::new();
    if s.slots.len() != g.len() || s.slots.iter().zip(&g.nodes).any(|(a, n)| a.inst != n.inst) {
        return Err(vec![format!("{}: schedule does not cover the block's instructions", s.block)]);
    }
    let start: Vec<u32> = s.slots.iter().map(|x| x.start).collect();
    for e in &g.edges {
        if start[e.to] < start[e.from] + e.delay {
            errs.push(format!(
                "{}: inst {} starts at {} but depends on inst {} (start {}, delay {})",
                s.block, g.nodes[e.to].inst, start[e.to], g.nodes[e.from].inst, start[e.from], e.delay
            ));
        }
    }
    let mut depth = vec![1u32; g.len()];
    for v in 0..g.len() {
        depth[v] = 1 + g.preds[v]
            .iter()
            .map(|&e| &g.edges[e])
            .filter(|e| e.chains() && start[e.from] == start[v])
            .map(|e| depth[e.from])
            .max()
            .unwrap_or(0);
        if g.nodes[v].chainable && depth[v] > r.max_chain {
            errs.push(format!("{}: inst {} chains {} deep", s.block, g.nodes[v].inst, depth[v]));
        }
    }
    let mut usage: HashMap<(&str, u32), (u32, u32)> = HashMap::new();
    for (v, n) in g.nodes.iter().enumerate() {
        if let Some((name, cap)) = &n.pool {
            usage.entry((name.as_str(), start[v])).or_insert((0, *cap)).0 += 1;
        }
    }
    for ((name, c), (used, cap)) in usage {
        if used > cap {
            errs.push(format!("{}: {name} used {used} times in cycle {c} (limit {cap})", s.block));
        }
    }
    if s.latency != makespan(g, &start) {
        errs.push(format!("{}: latency {} but instructions end at {}", s.block, s.latency, makespan(g, &start)));
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}
