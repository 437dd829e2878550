use std::collections::{HashMap, HashSet};

use crate::ir::rewrite::{clone_blocks, replace_uses, split_block, NameGen};
use crate::ir::{InstKind, Instruction, IrModule, Operand, Value};

/// Functions that can reach themselves through calls.
fn recursive_functions(m: &IrModule) -> HashSet<String> {
    let callees: HashMap<&str, Vec<&str>> = m
        .functions
        .iter()
        .map(|f| {
            let cs = f
                .insts()
                .filter_map(|i| match &i.kind {
                    InstKind::Call { callee, .. } if m.function(callee).is_some() => Some(callee.as_str()),
                    _ => None,
                })
                .collect();
            (f.name.as_str(), cs)
        })
        .collect();
    let mut out = HashSet::new();
    for f in &m.functions {
        let mut seen = HashSet::new();
        let mut stack: Vec<&str> = callees[f.name.as_str()].clone();
        while let Some(g) = stack.pop() {
            if g == f.name {
                out.insert(f.name.clone());
                break;
            }
            if seen.insert(g) {
                stack.extend(callees.get(g).into_iter().flatten());
            }
        }
    }
    out
}

/// Inlines every call to a non-recursive in-module function of at most
/// `threshold` instructions. Intrinsics are never inlined.
pub fn inline_calls(m: &IrModule, threshold: u64) -> IrModule {
    let mut out = m.clone();
    let recursive = recursive_functions(m);
    let eligible = |out: &IrModule, callee: &str| {
        !recursive.contains(callee) && out.function(callee).is_some_and(|f| f.inst_count() as u64 <= threshold)
    };
    loop {
        let mut site = None;
        'find: for (fi, f) in out.functions.iter().enumerate() {
            for (bi, b) in f.blocks.iter().enumerate() {
                for (ii, inst) in b.insts.iter().enumerate() {
                    if let InstKind::Call { callee, .. } = &inst.kind {
                        if callee != &f.name && eligible(&out, callee) {
                            site = Some((fi, bi, ii));
                            break 'find;
                        }
                    }
                }
            }
        }
        let Some((fi, bi, ii)) = site else { break };
        inline_site(&mut out, fi, bi, ii);
    }
    out
}

fn inline_site(m: &mut IrModule, fi: usize, bi: usize, ii: usize) {
    let call = m.functions[fi].blocks[bi].insts[ii].clone();
    let InstKind::Call { callee, args, ret } = &call.kind else { unreachable!("call site") };
    let callee_fn = m.function(callee).expect("in-module callee").clone();
    let f = &mut m.functions[fi];
    let mut names = NameGen::for_function(f);
    for b in &callee_fn.blocks {
        names.reserve(&b.label);
    }
    let cont = split_block(f, bi, ii + 1, &mut names);
    f.blocks[bi].insts.pop();

    let subst: HashMap<String, Value> =
        callee_fn.params.iter().zip(args).map(|(p, a)| (p.name.clone(), a.value.clone())).collect();
    let (mut clones, _, _) = clone_blocks(&callee_fn.blocks, &subst, &mut names, "i");
    let cont_label = f.blocks[cont].label.clone();
    let mut returns: Vec<(Operand, String)> = Vec::new();
    for b in &mut clones {
        if let Some(InstKind::Ret { value }) = b.insts.last().map(|i| i.kind.clone()) {
            if let Some(v) = value {
                returns.push((v, b.label.clone()));
            }
            *b.insts.last_mut().expect("terminator") = Instruction::new(None, InstKind::Br { target: cont_label.clone() });
        }
    }
    let entry_label = clones[0].label.clone();
    f.blocks[bi].insts.push(Instruction::new(None, InstKind::Br { target: entry_label }));
    let n = clones.len();
    f.blocks.splice(bi + 1..bi + 1, clones);
    let cont = cont + n;

    if let Some(res) = &call.result {
        if returns.len() == 1 {
            let mut map = HashMap::new();
            map.insert(res.clone(), returns[0].0.value.clone());
            replace_uses(f, &map);
        } else {
            let phi = Instruction::new(
                Some(res.clone()),
                InstKind::Phi { ty: ret.clone(), incoming: returns.into_iter().map(|(v, l)| (Operand::new(ret.clone(), v.value), l)).collect() },
            );
            f.blocks[cont].insts.insert(0, phi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_entry, MemoryImage};
    use crate::ir::{parse_module, validate};

    const SRC: &str = "@o = global [1 x float] zeroinitializer
define float @helper(float %x, float %y) {
entry:
  %a = fmul float %x, %y
  %b = fadd float %a, %x
  %c = fcmp ogt float %b, 0.000000e+00
  br i1 %c, label %pos, label %neg
pos:
  ret float %b
neg:
  ret float 0.000000e+00
}
define void @main() {
entry:
  %r = call float @helper(float 2.000000e+00, float 3.000000e+00)
  %s = call float @helper(float %r, float -1.000000e+00)
  %p = getelementptr inbounds [1 x float]* @o, i64 0, i64 0
  store float %s, float* %p
  ret void
}
";

    fn calls_to(m: &IrModule, name: &str) -> usize {
        m.functions
            .iter()
            .flat_map(|f| f.insts())
            .filter(|i| matches!(&i.kind, InstKind::Call { callee, .. } if callee == name))
            .count()
    }

    #[test]
    fn inlines_all_sites_and_preserves_results() {
        let m = parse_module(SRC).unwrap().module;
        let out = inline_calls(&m, 10);
        assert_eq!(calls_to(&out, "helper"), 0);
        assert!(validate(&out).is_empty(), "{}", validate(&out));
        let before = run_entry(&m, &MemoryImage::new()).unwrap().0;
        let after = run_entry(&out, &MemoryImage::new()).unwrap().0;
        assert_eq!(before.get("o"), after.get("o"));
    }

    #[test]
    fn zero_threshold_changes_nothing() {
        let m = parse_module(SRC).unwrap().module;
        assert_eq!(inline_calls(&m, 0), m);
    }

    #[test]
    fn recursive_calls_are_kept() {
        let src = "define i64 @fact(i64 %n) {
entry:
  %z = icmp sle i64 %n, 1
  br i1 %z, label %base, label %rec
base:
  ret i64 1
rec:
  %m = sub i64 %n, 1
  %r = call i64 @fact(i64 %m)
  %p = mul i64 %n, %r
  ret i64 %p
}
define i64 @main() {
entry:
  %v = call i64 @fact(i64 5)
  ret i64 %v
}
";
        let m = parse_module(src).unwrap().module;
        let out = inline_calls(&m, 1000);
        assert_eq!(calls_to(&out, "fact"), 2);
    }
}
