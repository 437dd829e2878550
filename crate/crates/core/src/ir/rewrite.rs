//! Small editing utilities shared by the passes.

use std::collections::{HashMap, HashSet};

use super::*;

/// Replaces every use of the named locals in `f`. Replacement values keep
/// the operand's type annotation.
pub fn replace_uses(f: &mut Function, map: &HashMap<String, Value>) {
    if map.is_empty() {
        return;
    }
    for b in &mut f.blocks {
        for inst in &mut b.insts {
            for op in inst.operands_mut() {
                if let Value::Local(n) = &op.value {
                    if let Some(v) = resolve(map, n) {
                        op.value = v;
                    }
                }
            }
        }
    }
}

/// Follows replacement chains (`a -> %b`, `b -> 3`).
fn resolve(map: &HashMap<String, Value>, name: &str) -> Option<Value> {
    let mut cur = map.get(name)?.clone();
    let mut steps = 0;
    while let Value::Local(n) = &cur {
        match map.get(n) {
            Some(next) if steps < map.len() => {
                cur = next.clone();
                steps += 1;
            }
            _ => break,
        }
    }
    Some(cur)
}

/// Number of uses of each local name.
pub fn use_counts(f: &Function) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for inst in f.insts() {
        for op in inst.operands() {
            if let Value::Local(n) = &op.value {
                *counts.entry(n.clone()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Generates names that do not collide with any existing local or label.
#[derive(Debug, Clone, Default)]
pub struct NameGen {
    taken: HashSet<String>,
    counter: usize,
}

impl NameGen {
    pub fn for_function(f: &Function) -> NameGen {
        let mut taken: HashSet<String> = f.params.iter().map(|p| p.name.clone()).collect();
        for b in &f.blocks {
            taken.insert(b.label.clone());
            for i in &b.insts {
                if let Some(r) = &i.result {
                    taken.insert(r.clone());
                }
            }
        }
        NameGen { taken, counter: 0 }
    }

    /// A fresh name derived from `base`. Purely numeric bases get a letter
    /// prefix so they never look like sequentially numbered values.
    pub fn fresh(&mut self, base: &str, tag: &str) -> String {
        let stem = if base.chars().all(|c| c.is_ascii_digit()) { format!("v{base}") } else { base.to_string() };
        loop {
            let cand = if tag.is_empty() && self.counter == 0 {
                stem.clone()
            } else {
                format!("{stem}.{tag}{}", self.counter)
            };
            self.counter += 1;
            if self.taken.insert(cand.clone()) {
                return cand;
            }
        }
    }

    pub fn reserve(&mut self, name: &str) -> bool {
        self.taken.insert(name.to_string())
    }
}

/// Renames references to block `old` inside the phis of `f` to `new`,
/// restricted to blocks whose label is in `in_blocks`.
pub fn retarget_phis(f: &mut Function, in_blocks: &[String], old: &str, new: &str) {
    for b in &mut f.blocks {
        if !in_blocks.contains(&b.label) {
            continue;
        }
        for inst in &mut b.insts {
            if let InstKind::Phi { incoming, .. } = &mut inst.kind {
                for (_, l) in incoming.iter_mut() {
                    if l == old {
                        *l = new.to_string();
                    }
                }
            }
        }
    }
}

/// Drops the phi entries for predecessor `pred` in block `block`.
pub fn remove_phi_incoming(f: &mut Function, block: usize, pred: &str) {
    for inst in &mut f.blocks[block].insts {
        if let InstKind::Phi { incoming, .. } = &mut inst.kind {
            incoming.retain(|(_, l)| l != pred);
        }
    }
}

/// Splits block `bi` before instruction `at`. The tail (including the
/// terminator) moves to a new block placed right after `bi`; the head is
/// left without a terminator. Phis in the old successors are retargeted.
/// Returns the new block's index.
pub fn split_block(f: &mut Function, bi: usize, at: usize, names: &mut NameGen) -> usize {
    let old_label = f.blocks[bi].label.clone();
    let new_label = names.fresh(&old_label, "split");
    let tail: Vec<Instruction> = f.blocks[bi].insts.drain(at..).collect();
    let succs: Vec<String> = tail.last().map(|t| t.successors().into_iter().map(String::from).collect()).unwrap_or_default();
    f.blocks.insert(bi + 1, Block { label: new_label.clone(), insts: tail });
    retarget_phis(f, &succs, &old_label, &new_label);
    bi + 1
}

/// Renames purely numeric locals so they are numbered 0, 1, 2, ... in
/// definition order (parameters first), as the textual form expects.
pub fn renumber(f: &mut Function) {
    let is_num = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
    let mut map: HashMap<String, String> = HashMap::new();
    let mut next = 0usize;
    for p in &f.params {
        if is_num(&p.name) {
            map.insert(p.name.clone(), next.to_string());
            next += 1;
        }
    }
    for b in &f.blocks {
        for i in &b.insts {
            if let Some(r) = &i.result {
                if is_num(r) {
                    map.insert(r.clone(), next.to_string());
                    next += 1;
                }
            }
        }
    }
    if map.iter().all(|(k, v)| k == v) {
        return;
    }
    for p in &mut f.params {
        if let Some(n) = map.get(&p.name) {
            p.name = n.clone();
        }
    }
    for b in &mut f.blocks {
        for i in &mut b.insts {
            if let Some(r) = &mut i.result {
                if let Some(n) = map.get(r.as_str()) {
                    *r = n.clone();
                }
            }
            for op in i.operands_mut() {
                if let Value::Local(l) = &mut op.value {
                    if let Some(n) = map.get(l.as_str()) {
                        *l = n.clone();
                    }
                }
            }
        }
    }
}

/// Clones a list of blocks, renaming every local defined in them and every
/// label among them with `suffix`. Uses of names in `subst` are replaced
/// first. Returns the clones and the name map used.
pub fn clone_blocks(
    blocks: &[Block],
    subst: &HashMap<String, Value>,
    names: &mut NameGen,
    tag: &str,
) -> (Vec<Block>, HashMap<String, String>, HashMap<String, String>) {
    let mut value_map: HashMap<String, String> = HashMap::new();
    let mut label_map: HashMap<String, String> = HashMap::new();
    for b in blocks {
        label_map.insert(b.label.clone(), names.fresh(&b.label, tag));
        for i in &b.insts {
            if let Some(r) = &i.result {
                value_map.insert(r.clone(), names.fresh(r, tag));
            }
        }
    }
    let out = blocks
        .iter()
        .map(|b| {
            let insts = b
                .insts
                .iter()
                .map(|i| {
                    let mut c = i.clone();
                    if let Some(r) = &mut c.result {
                        *r = value_map[r.as_str()].clone();
                    }
                    for op in c.operands_mut() {
                        if let Value::Local(n) = &op.value {
                            if let Some(v) = subst.get(n) {
                                op.value = v.clone();
                            } else if let Some(new) = value_map.get(n) {
                                op.value = Value::Local(new.clone());
                            }
                        }
                    }
                    if let InstKind::Phi { incoming, .. } = &mut c.kind {
                        for (_, l) in incoming.iter_mut() {
                            if let Some(new) = label_map.get(l.as_str()) {
                                *l = new.clone();
                            }
                        }
                    }
                    for s in c.successors_mut() {
                        if let Some(new) = label_map.get(s.as_str()) {
                            *s = new.clone();
                        }
                    }
                    c
                })
                .collect();
            Block { label: label_map[&b.label].clone(), insts }
        })
        .collect();
    (out, value_map, label_map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    #[test]
    fn renumber_makes_numbering_dense() {
        let mut m = parse_module(
            "define i32 @f(i32 %a) {\nentry:\n  %5 = add i32 %a, 1\n  %x = add i32 %5, 1\n  %9 = add i32 %x, %5\n  ret i32 %9\n}",
        )
        .unwrap()
        .module;
        renumber(&mut m.functions[0]);
        let text = crate::ir::print_module(&m);
        assert!(text.contains("%0 = add i32 %a, 1"));
        assert!(text.contains("%1 = add i32 %x, %0"));
        assert!(text.contains("ret i32 %1"));
    }

    #[test]
    fn split_block_retargets_successor_phis() {
        let mut m = parse_module(
            "define i64 @f() {\nentry:\n  %a = add i64 1, 2\n  br label %j\nj:\n  %p = phi i64 [ %a, %entry ]\n  ret i64 %p\n}",
        )
        .unwrap()
        .module;
        let f = &mut m.functions[0];
        let mut names = NameGen::for_function(f);
        let nb = split_block(f, 0, 1, &mut names);
        let target = f.blocks[nb].label.clone();
        f.blocks[0].insts.push(Instruction::new(None, InstKind::Br { target }));
        assert!(crate::ir::validate(&m).is_empty(), "{}", crate::ir::validate(&m));
    }
}
