//! Full unrolling of counted loops.
//!
//! A loop qualifies when it has one latch ending in an unconditional branch
//! back to the header, a single preheader, and leaves only from the header
//! through `br (icmp iv, C)`, where `iv` is a header phi starting at a
//! constant and stepped by a constant `add`. Such a loop with trip count T
//! and B instructions is replaced by T straight copies plus a final header
//! copy whenever `T * B <= threshold`.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::ir::cfg::{Cfg, NaturalLoop};
use crate::ir::rewrite::{clone_blocks, replace_uses, NameGen};
use crate::ir::{normalize_int, BinOp, Block, Function, InstKind, Instruction, IrModule, Type, Value};

/// A loop recognized as counted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountedLoop {
    pub header: usize,
    pub latch: usize,
    pub preheader: usize,
    /// The block reached when the loop finishes.
    pub exit: usize,
    /// The header's successor inside the loop.
    pub body_entry: usize,
    pub blocks: BTreeSet<usize>,
    pub iv: String,
    pub init: i64,
    pub step: i64,
    /// Number of times the body runs.
    pub trip: u64,
    /// Instructions in all loop blocks.
    pub size: usize,
}

impl CountedLoop {
    /// Recognizes `lp` as a counted loop, simulating at most `max_trip`
    /// iterations of the exit test.
    pub fn analyze(f: &Function, cfg: &Cfg, lp: &NaturalLoop, max_trip: u64) -> Option<CountedLoop> {
        let h = lp.header;
        let [latch] = lp.latches[..] else { return None };
        match &f.blocks[latch].terminator()?.kind {
            InstKind::Br { target } if *target == f.blocks[h].label => {}
            InstKind::CondBr { .. } if latch == h => {}
            _ => return None,
        }
        let outside: Vec<usize> = cfg.preds[h].iter().copied().filter(|p| !lp.blocks.contains(p)).collect();
        let [preheader] = outside[..] else { return None };
        if cfg.preds[h].len() != 2 {
            return None;
        }
        for &b in &lp.blocks {
            if b != h && cfg.succs[b].iter().any(|s| !lp.blocks.contains(s)) {
                return None;
            }
        }
        let InstKind::CondBr { cond, if_true, if_false } = &f.blocks[h].terminator()?.kind else { return None };
        let t = f.block_index(if_true)?;
        let e = f.block_index(if_false)?;
        let (body_entry, exit, enter_on) = match (lp.blocks.contains(&t), lp.blocks.contains(&e)) {
            (true, false) => (t, e, true),
            (false, true) => (e, t, false),
            _ => return None,
        };
        let cond_name = cond.value.as_local()?;
        let header = &f.blocks[h];
        let cmp = header.insts.iter().find(|i| i.result.as_deref() == Some(cond_name))?;
        let InstKind::Icmp { pred, lhs, rhs } = &cmp.kind else { return None };
        let (iv, bound, iv_left) = match (lhs.value.as_local(), rhs.const_int(), rhs.value.as_local(), lhs.const_int()) {
            (Some(n), Some(c), _, _) => (n, c, true),
            (_, _, Some(n), Some(c)) => (n, c, false),
            _ => return None,
        };
        let phi = header.insts.iter().find(|i| i.result.as_deref() == Some(iv))?;
        let InstKind::Phi { ty: Type::Int(width), incoming } = &phi.kind else { return None };
        let pre_label = &f.blocks[preheader].label;
        let latch_label = &f.blocks[latch].label;
        let init = incoming.iter().find(|(_, l)| l == pre_label)?.0.const_int()?;
        let next = incoming.iter().find(|(_, l)| l == latch_label)?.0.value.as_local()?;
        let step = lp.blocks.iter().flat_map(|&b| f.blocks[b].insts.iter()).find_map(|i| {
            if i.result.as_deref() != Some(next) {
                return None;
            }
            match &i.kind {
                InstKind::Binary { op: BinOp::Add, lhs, rhs } if lhs.value.as_local() == Some(iv) => rhs.const_int(),
                InstKind::Binary { op: BinOp::Add, lhs, rhs } if rhs.value.as_local() == Some(iv) => lhs.const_int(),
                _ => None,
            }
        })?;

        let mut i = init;
        let mut trip = 0u64;
        loop {
            let c = if iv_left { pred.eval(i, bound, *width) } else { pred.eval(bound, i, *width) };
            if c != enter_on {
                break;
            }
            trip += 1;
            if trip > max_trip {
                return None;
            }
            i = normalize_int(i.wrapping_add(step), *width);
        }
        let size = lp.blocks.iter().map(|&b| f.blocks[b].insts.len()).sum();
        Some(CountedLoop {
            header: h,
            latch,
            preheader,
            exit,
            body_entry,
            blocks: lp.blocks.clone(),
            iv: iv.to_string(),
            init,
            step,
            trip,
            size,
        })
    }

    fn iv_width(&self, f: &Function) -> u32 {
        f.blocks[self.header]
            .insts
            .iter()
            .find_map(|i| match &i.kind {
                InstKind::Phi { ty: Type::Int(w), .. } if i.result.as_deref() == Some(self.iv.as_str()) => Some(*w),
                _ => None,
            })
            .unwrap_or(64)
    }
}

/// Fully unrolls every counted loop whose trip count times size is within
/// `threshold`, innermost loops first.
pub fn unroll_loops(m: &IrModule, threshold: u64) -> IrModule {
    let mut out = m.clone();
    for f in &mut out.functions {
        let mut rejected: HashSet<String> = HashSet::new();
        loop {
            let cfg = Cfg::new(f);
            let mut did = false;
            for lp in cfg.loops() {
                let label = f.blocks[lp.header].label.clone();
                if rejected.contains(&label) {
                    continue;
                }
                let size: u64 = lp.blocks.iter().map(|&b| f.blocks[b].insts.len() as u64).sum();
                let max_trip = threshold / size.max(1);
                match CountedLoop::analyze(f, &cfg, &lp, max_trip) {
                    Some(cl) if cl.trip * cl.size as u64 <= threshold => {
                        unroll(f, &cl);
                        did = true;
                        break;
                    }
                    _ => {
                        rejected.insert(label);
                    }
                }
            }
            if !did {
                break;
            }
        }
    }
    out
}

fn unroll(f: &mut Function, cl: &CountedLoop) {
    let mut names = NameGen::for_function(f);
    let width = cl.iv_width(f);
    let header_label = f.blocks[cl.header].label.clone();
    let latch_label = f.blocks[cl.latch].label.clone();
    let pre_label = f.blocks[cl.preheader].label.clone();
    let exit_label = f.blocks[cl.exit].label.clone();
    let body_entry_label = f.blocks[cl.body_entry].label.clone();
    let loop_blocks: Vec<Block> = cl.blocks.iter().map(|&b| f.blocks[b].clone()).collect();
    let header = f.blocks[cl.header].clone();
    let phis: Vec<(String, Value, Value)> = header
        .insts
        .iter()
        .filter_map(|i| match &i.kind {
            InstKind::Phi { incoming, .. } => {
                let from = |l: &str| incoming.iter().find(|(_, x)| x == l).map(|(v, _)| v.value.clone());
                Some((i.result.clone()?, from(&pre_label)?, from(&latch_label)?))
            }
            _ => None,
        })
        .collect();

    // Values of the header phis on entry to iteration k.
    let mut subst: HashMap<String, Value> = phis.iter().map(|(n, init, _)| (n.clone(), init.clone())).collect();
    let mut copies: Vec<Vec<Block>> = Vec::new();
    let mut header_labels: Vec<String> = Vec::new();
    let mut last_map: HashMap<String, String> = HashMap::new();
    for k in 0..=cl.trip {
        subst.insert(
            cl.iv.clone(),
            Value::Int(normalize_int(cl.init.wrapping_add((k as i64).wrapping_mul(cl.step)), width)),
        );
        let src: &[Block] = if k == cl.trip { std::slice::from_ref(&header) } else { &loop_blocks };
        let (mut blocks, value_map, label_map) = clone_blocks(src, &subst, &mut names, "u");
        let h = blocks.iter_mut().find(|b| b.label == label_map[&header_label]).expect("header copy");
        h.insts.retain(|i| !i.is_phi());
        let target = if k == cl.trip {
            exit_label.clone()
        } else if body_entry_label == header_label {
            label_map[&header_label].clone()
        } else {
            label_map[&body_entry_label].clone()
        };
        *h.insts.last_mut().expect("terminator") = Instruction::new(None, InstKind::Br { target });
        header_labels.push(label_map[&header_label].clone());
        copies.push(blocks);

        let next: HashMap<String, Value> = phis
            .iter()
            .map(|(n, _, latch_val)| {
                let v = match latch_val {
                    Value::Local(l) if subst.contains_key(l) => subst[l].clone(),
                    Value::Local(l) if value_map.contains_key(l) => Value::Local(value_map[l].clone()),
                    other => other.clone(),
                };
                (n.clone(), v)
            })
            .collect();
        if k < cl.trip {
            subst.extend(next);
        } else {
            last_map = value_map;
        }
    }
    // Back edges of copy k go to the header copy of k + 1.
    for k in 0..cl.trip as usize {
        let (own, next) = (header_labels[k].clone(), header_labels[k + 1].clone());
        for b in &mut copies[k] {
            if let Some(t) = b.insts.last_mut() {
                for s in t.successors_mut() {
                    if *s == own {
                        *s = next.clone();
                    }
                }
            }
        }
    }

    // Values leaving the loop are the final header copy's.
    let mut outside: HashMap<String, Value> = HashMap::new();
    for inst in &header.insts {
        if let Some(r) = &inst.result {
            let v = if inst.is_phi() { subst[r].clone() } else { Value::Local(last_map[r].clone()) };
            outside.insert(r.clone(), v);
        }
    }
    let last_header = header_labels.last().expect("at least one copy").clone();
    let first_header = header_labels[0].clone();

    let pos = cl.blocks.iter().next().copied().expect("non-empty loop");
    let mut kept: Vec<Block> = Vec::new();
    let mut insert_at = 0;
    for (i, b) in std::mem::take(&mut f.blocks).into_iter().enumerate() {
        if i == pos {
            insert_at = kept.len();
        }
        if !cl.blocks.contains(&i) {
            kept.push(b);
        }
    }
    let new_blocks: Vec<Block> = copies.into_iter().flatten().collect();
    kept.splice(insert_at..insert_at, new_blocks);
    f.blocks = kept;

    for b in &mut f.blocks {
        if b.label == pre_label {
            if let Some(t) = b.insts.last_mut() {
                for s in t.successors_mut() {
                    if *s == header_label {
                        *s = first_header.clone();
                    }
                }
            }
        }
        if b.label == exit_label {
            for inst in &mut b.insts {
                if let InstKind::Phi { incoming, .. } = &mut inst.kind {
                    for (_, l) in incoming.iter_mut() {
                        if *l == header_label {
                            *l = last_header.clone();
                        }
                    }
                }
            }
        }
    }
    replace_uses(f, &outside);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_entry, Bank, MemoryImage};
    use crate::ir::{parse_module, validate};

    // Trip 8, 5 instructions in the loop: phi, icmp, br in the header and
    // the body below.
    const LOOP: &str = "@a = global [8 x float] zeroinitializer
@o = global [8 x float] zeroinitializer
define void @main() {
entry:
  br label %h
h:
  %i = phi i64 [ 0, %entry ], [ %n, %b ]
  %c = icmp slt i64 %i, 8
  br i1 %c, label %b, label %x
b:
  %p = getelementptr inbounds [8 x float]* @a, i64 0, i64 %i
  %v = load float* %p
  %w = fmul float %v, %v
  %q = getelementptr inbounds [8 x float]* @o, i64 0, i64 %i
  store float %w, float* %q
  %n = add i64 %i, 1
  br label %h
x:
  ret void
}
";

    fn image() -> MemoryImage {
        let mut img = MemoryImage::new();
        img.insert("a", Bank::from_f32(&[1.0, -2.0, 3.0, 0.5, 7.0, -1.5, 2.25, 9.0]));
        img
    }

    #[test]
    fn unrolls_within_threshold() {
        let m = parse_module(LOOP).unwrap().module;
        let out = unroll_loops(&m, 100);
        assert!(validate(&out).is_empty(), "{}", validate(&out));
        assert!(!Cfg::new(&out.functions[0]).has_back_edges());
        let a = run_entry(&m, &image()).unwrap().0;
        let b = run_entry(&out, &image()).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn leaves_loop_above_threshold() {
        let m = parse_module(LOOP).unwrap().module;
        assert_eq!(unroll_loops(&m, 4), m);
    }

    #[test]
    fn runtime_trip_count_is_left_alone() {
        let src = LOOP
            .replace("@o = global [8 x float] zeroinitializer", "@o = global [8 x float] zeroinitializer\n@k = global i64 8")
            .replace("entry:\n  br label %h", "entry:\n  %lim = load i64* @k\n  br label %h")
            .replace("icmp slt i64 %i, 8", "icmp slt i64 %i, %lim");
        let m = parse_module(&src).unwrap().module;
        assert_eq!(unroll_loops(&m, 1_000_000), m);
    }

    #[test]
    fn nested_loops_and_exit_values() {
        let src = "@o = global [1 x i64] zeroinitializer
define void @main() {
entry:
  br label %oh
oh:
  %i = phi i64 [ 0, %entry ], [ %in, %ol ]
  %s = phi i64 [ 0, %entry ], [ %t, %ol ]
  %oc = icmp slt i64 %i, 3
  br i1 %oc, label %ih.pre, label %done
ih.pre:
  br label %ih
ih:
  %j = phi i64 [ 0, %ih.pre ], [ %jn, %ib ]
  %t = phi i64 [ %s, %ih.pre ], [ %u, %ib ]
  %ic = icmp ne i64 %j, 4
  br i1 %ic, label %ib, label %ol
ib:
  %m = mul i64 %i, %j
  %u = add i64 %t, %m
  %jn = add i64 %j, 1
  br label %ih
ol:
  %in = add i64 %i, 1
  br label %oh
done:
  %p = getelementptr inbounds [1 x i64]* @o, i64 0, i64 0
  store i64 %s, i64* %p
  ret void
}
";
        let m = parse_module(src).unwrap().module;
        let expected = run_entry(&m, &MemoryImage::new()).unwrap().0;
        // Inner only: 4 x 8 = 32 fits, the outer loop afterwards does not.
        let inner = unroll_loops(&m, 40);
        assert!(validate(&inner).is_empty(), "{}", validate(&inner));
        assert_eq!(Cfg::new(&inner.functions[0]).loops().len(), 1);
        assert_eq!(run_entry(&inner, &MemoryImage::new()).unwrap().0, expected);
        let all = unroll_loops(&m, 10_000);
        assert!(validate(&all).is_empty(), "{}", validate(&all));
        assert!(!Cfg::new(&all.functions[0]).has_back_edges());
        assert_eq!(run_entry(&all, &MemoryImage::new()).unwrap().0, expected);
    }
}
