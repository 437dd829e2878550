use std::collections::HashMap;

use super::{to_block_schedule, BlockSchedule, DependenceGraph, ResourceModel};

/// Pools as dense indices with capacities.
pub(crate) struct Pools {
    pub of_node: Vec<Option<usize>>,
    pub capacity: Vec<u32>,
}

impl Pools {
    pub fn new(g: &DependenceGraph) -> Pools {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut capacity = Vec::new();
        let of_node = g
            .nodes
            .iter()
            .map(|n| {
                n.pool.as_ref().map(|(name, cap)| {
                    *ids.entry(name.as_str()).or_insert_with(|| {
                        capacity.push(*cap);
                        capacity.len() - 1
                    })
                })
            })
            .collect();
        Pools { of_node, capacity }
    }
}

/// Earliest cycle at which `v` may start given its scheduled predecessors,
/// and the chain depth it would have there.
pub(crate) fn earliest(g: &DependenceGraph, v: usize, start: &[u32], depth: &[u32], max_chain: u32) -> (u32, u32) {
    let est = g.preds[v].iter().map(|&e| start[g.edges[e].from] + g.edges[e].delay).max().unwrap_or(0);
    let d = 1 + g.preds[v]
        .iter()
        .map(|&e| &g.edges[e])
        .filter(|e| e.chains() && start[e.from] == est)
        .map(|e| depth[e.from])
        .max()
        .unwrap_or(0);
    if g.nodes[v].chainable && d > max_chain {
        (est + 1, 1)
    } else {
        (est, d)
    }
}

/// Cycle-driven list scheduling. Priority is the longest path to the block
/// end; ties go to the earlier instruction.
pub fn schedule_block(g: &DependenceGraph, r: &ResourceModel) -> BlockSchedule {
    let n = g.len();
    let tail = g.tails();
    let pools = Pools::new(g);
    let mut start = vec![0u32; n];
    let mut depth = vec![0u32; n];
    let mut done = vec![false; n];
    let mut missing: Vec<usize> = g.preds.iter().map(Vec::len).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&v| missing[v] == 0).collect();
    let mut usage: HashMap<(usize, u32), u32> = HashMap::new();
    let mut left = n;
    let mut t = 0u32;
    while left > 0 {
        loop {
            ready.sort_by_key(|&v| (std::cmp::Reverse(tail[v]), v));
            let mut placed = Vec::new();
            for &v in &ready {
                let (est, d) = earliest(g, v, &start, &depth, r.max_chain);
                if est > t {
                    continue;
                }
                if let Some(p) = pools.of_node[v] {
                    let used = usage.entry((p, t)).or_insert(0);
                    if *used >= pools.capacity[p] {
                        continue;
                    }
                    *used += 1;
                }
                start[v] = t;
                depth[v] = if est == t { d } else { 1 };
                done[v] = true;
                placed.push(v);
            }
            if placed.is_empty() {
                break;
            }
            left -= placed.len();
            ready.retain(|v| !done[*v]);
            for v in placed {
                for &e in &g.succs[v] {
                    let w = g.edges[e].to;
                    missing[w] -= 1;
                    if missing[w] == 0 {
                        ready.push(w);
                    }
                }
            }
        }
        t += 1;
    }
    to_block_schedule(g, &start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;
    use crate::sched::build_dfg;

    fn loads(n: usize, banks: usize) -> String {
        let mut s = String::new();
        for b in 0..banks {
            s += &format!("@m{b} = global [8 x float] zeroinitializer\n");
        }
        s += "define void @main() {\nentry:\n";
        for i in 0..n {
            s += &format!("  %p{i} = getelementptr inbounds [8 x float]* @m{}, i64 0, i64 {}\n", i % banks, i / banks);
        }
        for i in 0..n {
            s += &format!("  %v{i} = load float* %p{i}\n");
        }
        s + "  ret void\n}\n"
    }

    fn load_starts(src: &str) -> Vec<u32> {
        let m = parse_module(src).unwrap().module;
        let r = ResourceModel::default();
        let g = build_dfg(&m, &m.functions[0], 0, &r);
        let s = schedule_block(&g, &r);
        s.slots.iter().filter(|x| x.bank.is_some()).map(|x| x.start).collect()
    }

    #[test]
    fn dual_ports_per_bank() {
        assert_eq!(load_starts(&loads(2, 1)), vec![0, 0]);
        assert_eq!(load_starts(&loads(4, 1)), vec![0, 0, 1, 1]);
        assert_eq!(load_starts(&loads(8, 4)), vec![0; 8]);
    }

    #[test]
    fn chains_of_zero_latency_ops_are_bounded() {
        let src = "@o = global [1 x i64] zeroinitializer
define void @main() {
entry:
  %a = add i64 1, 2
  %b = add i64 %a, 3
  %c = add i64 %b, 4
  %d = add i64 %c, 5
  %e = add i64 %d, 6
  ret void
}
";
        let m = parse_module(src).unwrap().module;
        let r = ResourceModel::default();
        let s = schedule_block(&build_dfg(&m, &m.functions[0], 0, &r), &r);
        let starts: Vec<u32> = s.slots.iter().map(|x| x.start).collect();
        assert_eq!(starts, vec![0, 0, 0, 1, 1]);
        assert_eq!(s.latency, 2);
    }
}
