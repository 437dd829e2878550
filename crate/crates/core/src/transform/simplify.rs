//! Cleanup after unrolling and inlining: constant folding, trivial phis,
//! constant branches, unreachable blocks, dead code and straight-line block
//! merging, repeated until nothing changes. Volatile accesses are never
//! removed.

use std::collections::{HashMap, HashSet};

use super::fold::fold;
use crate::ir::cfg::Cfg;
use crate::ir::rewrite::{remove_phi_incoming, replace_uses};
use crate::ir::{Function, InstKind, Instruction, IrModule, Value};

pub fn simplify(m: &IrModule) -> IrModule {
    let mut out = m.clone();
    for f in &mut out.functions {
        simplify_function(f);
    }
    out
}

pub(crate) fn simplify_function(f: &mut Function) {
    loop {
        let mut changed = fold_constants(f);
        changed |= fold_phis(f);
        changed |= fold_branches(f);
        changed |= remove_unreachable(f);
        changed |= remove_dead(f);
        changed |= merge_blocks(f);
        if !changed {
            break;
        }
    }
}

fn fold_constants(f: &mut Function) -> bool {
    let mut map = HashMap::new();
    for b in &mut f.blocks {
        b.insts.retain(|i| match (&i.result, fold(&i.kind)) {
            (Some(r), Some(v)) => {
                map.insert(r.clone(), v);
                false
            }
            _ => true,
        });
    }
    replace_uses(f, &map);
    !map.is_empty()
}

/// A phi whose incoming values agree, ignoring references to itself.
fn trivial_phi(i: &Instruction) -> Option<Value> {
    let InstKind::Phi { incoming, .. } = &i.kind else { return None };
    let me = i.result.as_deref()?;
    let mut vals = incoming.iter().map(|(v, _)| &v.value).filter(|v| v.as_local() != Some(me));
    let first = vals.next()?.clone();
    vals.all(|v| *v == first).then_some(first)
}

fn fold_phis(f: &mut Function) -> bool {
    let mut map = HashMap::new();
    for b in &mut f.blocks {
        b.insts.retain(|i| match trivial_phi(i) {
            Some(v) => {
                map.insert(i.result.clone().expect("phi result"), v);
                false
            }
            None => true,
        });
    }
    replace_uses(f, &map);
    !map.is_empty()
}

fn fold_branches(f: &mut Function) -> bool {
    let mut changed = false;
    for bi in 0..f.blocks.len() {
        let Some(InstKind::CondBr { cond, if_true, if_false }) = f.blocks[bi].terminator().map(|t| t.kind.clone())
        else {
            continue;
        };
        let taken = match (&cond.value, if_true == if_false) {
            (_, true) => if_true.clone(),
            (Value::Int(c), _) => {
                let (keep, drop) = if *c != 0 { (if_true, if_false) } else { (if_false, if_true) };
                if let Some(d) = f.block_index(&drop) {
                    let label = f.blocks[bi].label.clone();
                    remove_phi_incoming(f, d, &label);
                }
                keep
            }
            _ => continue,
        };
        *f.blocks[bi].terminator_mut().expect("terminator") = Instruction::new(None, InstKind::Br { target: taken });
        changed = true;
    }
    changed
}

fn remove_unreachable(f: &mut Function) -> bool {
    let cfg = Cfg::new(f);
    let dead: HashSet<String> =
        (0..f.blocks.len()).filter(|&b| !cfg.reachable(b)).map(|b| f.blocks[b].label.clone()).collect();
    if dead.is_empty() {
        return false;
    }
    f.blocks.retain(|b| !dead.contains(&b.label));
    for b in &mut f.blocks {
        for i in &mut b.insts {
            if let InstKind::Phi { incoming, .. } = &mut i.kind {
                incoming.retain(|(_, l)| !dead.contains(l));
            }
        }
    }
    true
}

fn remove_dead(f: &mut Function) -> bool {
    let defs: HashMap<&str, &Instruction> =
        f.insts().filter_map(|i| i.result.as_deref().map(|r| (r, i))).collect();
    let mut live: HashSet<&str> = HashSet::new();
    let mut work: Vec<&Instruction> = f.insts().filter(|i| i.has_side_effects()).collect();
    while let Some(i) = work.pop() {
        for op in i.operands() {
            if let Some(n) = op.value.as_local() {
                if live.insert(n) {
                    if let Some(d) = defs.get(n) {
                        work.push(d);
                    }
                }
            }
        }
    }
    let live: HashSet<String> = live.into_iter().map(String::from).collect();
    let mut changed = false;
    for b in &mut f.blocks {
        let before = b.insts.len();
        b.insts.retain(|i| i.has_side_effects() || i.result.as_ref().is_some_and(|r| live.contains(r)));
        changed |= b.insts.len() != before;
    }
    changed
}

/// Merges a block into its sole predecessor when that predecessor has no
/// other successor.
fn merge_blocks(f: &mut Function) -> bool {
    let mut changed = false;
    loop {
        let cfg = Cfg::new(f);
        let pair = (0..f.blocks.len()).find_map(|b| {
            let [s] = cfg.succs[b][..] else { return None };
            (s != b && s != 0 && cfg.preds[s] == [b]).then_some((b, s))
        });
        let Some((b, s)) = pair else { break };
        let mut succ = f.blocks.remove(s);
        let b = if s < b { b - 1 } else { b };
        let mut map = HashMap::new();
        succ.insts.retain(|i| match &i.kind {
            InstKind::Phi { incoming, .. } => {
                if let Some((v, _)) = incoming.first() {
                    map.insert(i.result.clone().expect("phi result"), v.value.clone());
                }
                false
            }
            _ => true,
        });
        f.blocks[b].insts.pop();
        f.blocks[b].insts.extend(succ.insts);
        let merged = f.blocks[b].label.clone();
        for blk in &mut f.blocks {
            for i in &mut blk.insts {
                if let InstKind::Phi { incoming, .. } = &mut i.kind {
                    for (_, l) in incoming.iter_mut() {
                        if *l == succ.label {
                            *l = merged.clone();
                        }
                    }
                }
            }
        }
        replace_uses(f, &map);
        changed = true;
    }
    changed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_module, validate};

    #[test]
    fn folds_and_keeps_volatile_loads() {
        let src = "@a = global [2 x float] zeroinitializer
@o = global [1 x float] zeroinitializer
define void @main() {
entry:
  %p = getelementptr inbounds [2 x float]* @a, i64 0, i64 0
  %dead = load float* %p
  %q = getelementptr inbounds [2 x float]* @a, i64 0, i64 1
  %kept = load volatile float* %q
  %x = fmul float 2.000000e+00, 3.000000e+00
  %r = getelementptr inbounds [1 x float]* @o, i64 0, i64 0
  store float %x, float* %r
  ret void
}
";
        let m = parse_module(src).unwrap().module;
        let out = simplify(&m);
        assert!(validate(&out).is_empty());
        let f = &out.functions[0];
        assert!(f.insts().any(|i| i.is_volatile() && matches!(i.kind, InstKind::Load { .. })));
        assert!(!f.insts().any(|i| i.result.as_deref() == Some("dead")));
        assert!(!f.insts().any(|i| matches!(i.kind, InstKind::Binary { .. })));
        assert!(f.insts().any(|i| matches!(&i.kind, InstKind::Store { value, .. } if value.value == Value::float(6.0))));
    }

    #[test]
    fn constant_branches_collapse_to_one_block() {
        let src = "@o = global [1 x i64] zeroinitializer
define void @main() {
entry:
  %c = icmp slt i64 1, 2
  br i1 %c, label %a, label %b
a:
  br label %j
b:
  br label %j
j:
  %v = phi i64 [ 10, %a ], [ 20, %b ]
  %p = getelementptr inbounds [1 x i64]* @o, i64 0, i64 0
  store i64 %v, i64* %p
  ret void
}
";
        let m = parse_module(src).unwrap().module;
        let out = simplify(&m);
        assert!(validate(&out).is_empty(), "{}", validate(&out));
        let f = &out.functions[0];
        assert_eq!(f.blocks.len(), 1);
        assert!(f.insts().any(|i| matches!(&i.kind, InstKind::Store { value, .. } if value.value == Value::Int(10))));
    }
}
