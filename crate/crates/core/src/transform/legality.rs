use crate::diag::{Diagnostic, Diagnostics, Location};
use crate::ir::{is_intrinsic, InstKind, IrModule};

/// Flags constructs the hardware flow cannot take: any instruction that
/// touches a vector type, and calls to anything outside the intrinsic set
/// and the module's own functions.
pub fn check_legality(m: &IrModule) -> Diagnostics {
    let mut d = Diagnostics::new();
    for f in &m.functions {
        for b in &f.blocks {
            for (i, inst) in b.insts.iter().enumerate() {
                let loc = || Location::Inst { function: f.name.clone(), block: b.label.clone(), index: i };
                let vector = inst.result_type().contains_vector()
                    || inst.operands().iter().any(|o| o.ty.contains_vector())
                    || matches!(&inst.kind, InstKind::Cast { to, .. } if to.contains_vector());
                if vector {
                    d.push(Diagnostic::error(
                        "unsupported-kernel",
                        loc(),
                        format!("explicitly vectorized instruction `{inst}`"),
                    ));
                    continue;
                }
                if let InstKind::Call { callee, .. } = &inst.kind {
                    if !is_intrinsic(callee) && m.function(callee).is_none() {
                        d.push(Diagnostic::error(
                            "unsupported-kernel",
                            loc(),
                            format!("call to @{callee}, which is neither a supported intrinsic nor defined in the module"),
                        ));
                    }
                }
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    #[test]
    fn vector_instruction_is_one_error() {
        let m = parse_module(
            "define <4 x float> @k(<4 x float> %a, <4 x float> %b) {\nentry:\n  %c = fmul <4 x float> %a, %b\n  ret <4 x float> %c\n}\ndefine void @main() {\nentry:\n  ret void\n}\n",
        )
        .unwrap()
        .module;
        let d = check_legality(&m);
        // The `ret` of a vector also touches the vector type.
        assert!(d.iter().all(|x| x.code == "unsupported-kernel"));
        assert!(d.iter().any(|x| x.message.contains("fmul <4 x float>")));
    }

    #[test]
    fn external_call_is_flagged_and_intrinsics_are_not() {
        let m = parse_module(
            "declare float @sinf(float)\ndefine float @main(float %x) {\nentry:\n  %e = call float @expf(float %x)\n  %y = call float @sinf(float %e)\n  ret float %y\n}\n",
        )
        .unwrap()
        .module;
        let d = check_legality(&m);
        assert_eq!(d.len(), 1);
        assert!(d.0[0].message.contains("@sinf"));
    }
}
