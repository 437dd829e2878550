use std::collections::HashMap;

use super::{OpClass, ResourceModel};
use crate::ir::{is_intrinsic, Function, InstKind, IrModule, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    /// Index of the instruction within its block.
    pub inst: usize,
    pub class: OpClass,
    pub lat: u32,
    pub chainable: bool,
    /// Memory bank touched, for loads and stores. `?` when the address
    /// cannot be traced to a global.
    pub bank: Option<String>,
    /// Shared resource and its per-cycle capacity.
    pub pool: Option<(String, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Data,
    Memory,
    /// Program order between volatile accesses to one bank.
    Order,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub delay: u32,
    pub kind: EdgeKind,
}

impl Edge {
    /// Zero-delay data edge between operations that may share a cycle.
    pub fn chains(&self) -> bool {
        self.kind == EdgeKind::Data && self.delay == 0
    }
}

/// Dependences among the non-phi, non-terminator instructions of a block.
/// Edges always point forward in program order.
#[derive(Debug, Clone)]
pub struct DependenceGraph {
    pub function: String,
    pub block: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub preds: Vec<Vec<usize>>,
    pub succs: Vec<Vec<usize>>,
}

impl DependenceGraph {
    fn new(function: String, block: String, nodes: Vec<Node>, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(|e| (e.from, e.to, e.kind as u8));
        edges.dedup_by(|a, b| a.from == b.from && a.to == b.to && a.delay <= b.delay);
        let mut preds = vec![Vec::new(); nodes.len()];
        let mut succs = vec![Vec::new(); nodes.len()];
        for (k, e) in edges.iter().enumerate() {
            succs[e.from].push(k);
            preds[e.to].push(k);
        }
        DependenceGraph { function, block, nodes, edges, preds, succs }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.succs[from].iter().any(|&e| self.edges[e].to == to)
    }

    /// Longest delay-weighted path from each node to the block end,
    /// counting the node's own occupancy.
    pub fn tails(&self) -> Vec<u32> {
        let mut tail = vec![0u32; self.len()];
        for v in (0..self.len()).rev() {
            let own = self.nodes[v].lat.max(1);
            tail[v] = self.succs[v]
                .iter()
                .map(|&e| self.edges[e].delay + tail[self.edges[e].to])
                .fold(own, u32::max);
        }
        tail
    }

    /// Longest delay-weighted path from any source to each node.
    pub fn heads(&self) -> Vec<u32> {
        let mut head = vec![0u32; self.len()];
        for v in 0..self.len() {
            head[v] = self.preds[v].iter().map(|&e| head[self.edges[e].from] + self.edges[e].delay).max().unwrap_or(0);
        }
        head
    }
}

/// Where a pointer points: the global and, when every index on the way is
/// constant, the flat element offset.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Target {
    global: Option<String>,
    offset: Option<i64>,
}

fn pointer_targets(f: &Function) -> HashMap<String, Target> {
    let mut out: HashMap<String, Target> = HashMap::new();
    // Definitions may appear in any block order; iterate until stable.
    loop {
        let mut changed = false;
        for i in f.insts() {
            let Some(r) = &i.result else { continue };
            if out.contains_key(r) {
                continue;
            }
            let resolve = |v: &Value| match v {
                Value::Global(g) => Some(Target { global: Some(g.clone()), offset: Some(0) }),
                Value::Local(l) => out.get(l).cloned(),
                _ => None,
            };
            let t = match &i.kind {
                InstKind::Gep { base, .. } => resolve(&base.value).map(|b| Target {
                    global: b.global,
                    offset: b.offset.zip(i.gep_flat_offset()).map(|(a, c)| a + c),
                }),
                InstKind::Cast { value, .. } if value.ty.is_ptr() => {
                    resolve(&value.value).map(|b| Target { global: b.global, offset: None })
                }
                _ => None,
            };
            if let Some(t) = t {
                out.insert(r.clone(), t);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    out
}

fn target_of(targets: &HashMap<String, Target>, v: &Value) -> Target {
    match v {
        Value::Global(g) => Target { global: Some(g.clone()), offset: Some(0) },
        Value::Local(l) => targets.get(l).cloned().unwrap_or(Target { global: None, offset: None }),
        _ => Target { global: None, offset: None },
    }
}

/// Builds the dependence graph of block `bi` of `f`.
pub fn build_dfg(m: &IrModule, f: &Function, bi: usize, r: &ResourceModel) -> DependenceGraph {
    let targets = pointer_targets(f);
    let block = &f.blocks[bi];
    let mut nodes = Vec::new();
    let mut targets_of_node: Vec<Option<Target>> = Vec::new();
    let mut def: HashMap<&str, usize> = HashMap::new();
    for (ii, inst) in block.insts.iter().enumerate() {
        let Some(class) = OpClass::of(inst) else { continue };
        let t = inst.memory_ptr().map(|p| target_of(&targets, &p.value));
        let bank = t.as_ref().map(|t| t.global.clone().unwrap_or_else(|| "?".into()));
        let pool = match &bank {
            Some(b) => Some((format!("bank:{b}"), r.ports)),
            None => r.units.get(&class).map(|&n| (format!("unit:{class}"), n)),
        };
        if let Some(res) = &inst.result {
            def.insert(res.as_str(), nodes.len());
        }
        nodes.push(Node { inst: ii, class, lat: r.lat(class), chainable: r.is_chainable(class), bank, pool });
        targets_of_node.push(t);
    }

    let mut edges = Vec::new();
    let data_delay = |u: &Node| if u.lat == 0 && !u.chainable { 1 } else { u.lat };
    for (v, node) in nodes.iter().enumerate() {
        for op in block.insts[node.inst].operands() {
            if let Some(&u) = op.value.as_local().and_then(|n| def.get(n)) {
                edges.push(Edge { from: u, to: v, delay: data_delay(&nodes[u]), kind: EdgeKind::Data });
            }
        }
    }

    let is_store = |n: &Node| n.class == OpClass::Store;
    let is_barrier = |n: &Node| {
        n.class == OpClass::Call
            && matches!(&block.insts[n.inst].kind, InstKind::Call { callee, .. } if !is_intrinsic(callee) && m.function(callee).is_some())
    };
    let mem: Vec<usize> = (0..nodes.len()).filter(|&v| nodes[v].bank.is_some() || is_barrier(&nodes[v])).collect();
    for (a, &u) in mem.iter().enumerate() {
        for &v in &mem[a + 1..] {
            let (nu, nv) = (&nodes[u], &nodes[v]);
            if is_barrier(nu) || is_barrier(nv) {
                edges.push(Edge { from: u, to: v, delay: nu.lat, kind: EdgeKind::Memory });
                continue;
            }
            if !(is_store(nu) || is_store(nv)) {
                continue;
            }
            let (tu, tv) = (targets_of_node[u].as_ref().unwrap(), targets_of_node[v].as_ref().unwrap());
            let same_bank = tu.global.is_none() || tv.global.is_none() || tu.global == tv.global;
            if !same_bank {
                continue;
            }
            let may_alias = !(tu.global == tv.global && matches!((tu.offset, tv.offset), (Some(x), Some(y)) if x != y));
            let delay = if is_store(nu) && may_alias { nu.lat } else { 0 };
            edges.push(Edge { from: u, to: v, delay, kind: EdgeKind::Memory });
        }
    }

    let mut last_volatile: HashMap<String, usize> = HashMap::new();
    for (v, node) in nodes.iter().enumerate() {
        if block.insts[node.inst].is_volatile() {
            let bank = node.bank.clone().expect("memory access");
            if let Some(u) = last_volatile.insert(bank, v) {
                edges.push(Edge { from: u, to: v, delay: 0, kind: EdgeKind::Order });
            }
        }
    }
    DependenceGraph::new(f.name.clone(), block.label.clone(), nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    fn graph(src: &str) -> DependenceGraph {
        let m = parse_module(src).unwrap().module;
        build_dfg(&m, &m.functions[0], 0, &ResourceModel::default())
    }

    #[test]
    fn data_edges_follow_ssa() {
        let g = graph(
            "@a = global float 0.000000e+00
@b = global float 0.000000e+00
@c = global float 0.000000e+00
define void @main() {
entry:
  %x = load float* @a
  %y = load float* @b
  %z = fmul float %x, %y
  store float %z, float* @c
  ret void
}
",
        );
        assert_eq!(g.len(), 4);
        assert!(g.has_edge(0, 2) && g.has_edge(1, 2) && g.has_edge(2, 3));
        assert_eq!(g.edges.len(), 3);
    }

    #[test]
    fn memory_edges_only_within_a_bank() {
        let g = graph(
            "@a_p0 = global [2 x float] zeroinitializer
@a_p1 = global [2 x float] zeroinitializer
define void @main() {
entry:
  %p = getelementptr inbounds [2 x float]* @a_p0, i64 0, i64 0
  %q = getelementptr inbounds [2 x float]* @a_p1, i64 0, i64 0
  %v = load float* %p
  store float 1.000000e+00, float* %q
  store float 2.000000e+00, float* %p
  store float 3.000000e+00, float* %p
  ret void
}
",
        );
        // nodes: gep, gep, load, store a_p1, store a_p0, store a_p0
        assert!(!g.has_edge(2, 3));
        assert!(g.has_edge(2, 4));
        let e = g.edges.iter().find(|e| e.from == 4 && e.to == 5).unwrap();
        assert_eq!(e.delay, 1);
    }
}
