use std::fmt::Write;

use super::*;

/// Operand spelling for loads and geps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Syntax {
    /// `load float* %p` — the canonical form.
    #[default]
    Legacy,
    /// `load float, float* %p`.
    Modern,
}

/// Canonical (legacy-spelling) text of a module.
pub fn print_module(m: &IrModule) -> String {
    print_module_with(m, Syntax::Legacy)
}

pub fn print_module_with(m: &IrModule, syntax: Syntax) -> String {
    let mut out = String::new();
    for g in &m.globals {
        let kw = if g.constant { "constant" } else { "global" };
        let _ = write!(out, "@{} = {kw} {} ", g.name, g.ty);
        match &g.init {
            Init::Zero => out.push_str("zeroinitializer"),
            Init::Values(vals) => {
                let mut it = vals.iter();
                write_init(&mut out, &g.ty, &mut it);
            }
        }
        if let Some(a) = g.align {
            let _ = write!(out, ", align {a}");
        }
        out.push('\n');
    }
    if !m.globals.is_empty() && !(m.declarations.is_empty() && m.functions.is_empty()) {
        out.push('\n');
    }
    for d in &m.declarations {
        let params: Vec<String> = d.params.iter().map(Type::to_string).collect();
        let _ = writeln!(out, "declare {} @{}({})", d.ret, d.name, params.join(", "));
    }
    if !m.declarations.is_empty() && !m.functions.is_empty() {
        out.push('\n');
    }
    for (i, f) in m.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_function(&mut out, f, syntax);
    }
    out
}

fn write_init<'a>(out: &mut String, ty: &Type, vals: &mut impl Iterator<Item = &'a Value>) {
    match ty {
        Type::Array(e, n) => {
            out.push('[');
            for i in 0..*n {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{e} ");
                write_init(out, e, vals);
            }
            out.push(']');
        }
        _ => {
            let v = vals.next().cloned().unwrap_or(Value::Int(0));
            out.push_str(&value_text(ty, &v));
        }
    }
}

fn print_function(out: &mut String, f: &Function, syntax: Syntax) {
    let params: Vec<String> = f.params.iter().map(|p| format!("{} %{}", p.ty, p.name)).collect();
    let _ = writeln!(out, "define {} @{}({}) {{", f.ret, f.name, params.join(", "));
    for b in &f.blocks {
        let _ = writeln!(out, "{}:", b.label);
        for inst in &b.insts {
            out.push_str("  ");
            out.push_str(&inst_text(inst, syntax));
            out.push('\n');
        }
    }
    out.push_str("}\n");
}

/// Text of a float constant: short decimal when it is exact,
/// otherwise the 64-bit hexadecimal pattern of the widened value.
pub(crate) fn float_text(bits: u32) -> String {
    let v = f32::from_bits(bits);
    if v.is_finite() {
        let s = format!("{:.6e}", f64::from(v));
        // Rust prints `1.000000e0`; the dialect wants `1.000000e+00`.
        if let Some((mant, exp)) = s.split_once('e') {
            let e: i32 = exp.parse().unwrap_or(0);
            let text = format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs());
            if let Ok(back) = text.parse::<f64>() {
                // Exact in double, as the upstream assembler requires.
                if back == f64::from(v) {
                    return text;
                }
            }
        }
    }
    format!("0x{:016X}", f64::from(v).to_bits())
}

fn value_text(ty: &Type, v: &Value) -> String {
    match v {
        Value::Local(n) => format!("%{n}"),
        Value::Global(n) => format!("@{n}"),
        Value::Int(i) => {
            if *ty == Type::Int(1) {
                if *i != 0 { "true".into() } else { "false".into() }
            } else {
                i.to_string()
            }
        }
        Value::Float(b) => float_text(*b),
    }
}

fn op_text(o: &Operand) -> String {
    format!("{} {}", o.ty, value_text(&o.ty, &o.value))
}

fn bare(o: &Operand) -> String {
    value_text(&o.ty, &o.value)
}

fn align_text(align: Option<u32>) -> String {
    align.map(|a| format!(", align {a}")).unwrap_or_default()
}

pub(crate) fn inst_text(inst: &Instruction, syntax: Syntax) -> String {
    let mut s = String::new();
    if let Some(r) = &inst.result {
        let _ = write!(s, "%{r} = ");
    }
    match &inst.kind {
        InstKind::Gep { inbounds, base, indices } => {
            s.push_str("getelementptr ");
            if *inbounds {
                s.push_str("inbounds ");
            }
            match syntax {
                Syntax::Legacy => s.push_str(&op_text(base)),
                Syntax::Modern => {
                    let src = base.ty.pointee().map(Type::to_string).unwrap_or_default();
                    let _ = write!(s, "{src}, {}", op_text(base));
                }
            }
            for i in indices {
                let _ = write!(s, ", {}", op_text(i));
            }
        }
        InstKind::Load { volatile, ptr, align } => {
            s.push_str("load ");
            if *volatile {
                s.push_str("volatile ");
            }
            if syntax == Syntax::Modern {
                let pointee = ptr.ty.pointee().map(Type::to_string).unwrap_or_default();
                let _ = write!(s, "{pointee}, ");
            }
            s.push_str(&op_text(ptr));
            s.push_str(&align_text(*align));
        }
        InstKind::Store { volatile, value, ptr, align } => {
            s.push_str("store ");
            if *volatile {
                s.push_str("volatile ");
            }
            let _ = write!(s, "{}, {}{}", op_text(value), op_text(ptr), align_text(*align));
        }
        InstKind::Cast { op, value, to } => {
            let _ = write!(s, "{} {} to {to}", op.name(), op_text(value));
        }
        InstKind::Binary { op, lhs, rhs } => {
            let _ = write!(s, "{} {}, {}", op.name(), op_text(lhs), bare(rhs));
        }
        InstKind::Icmp { pred, lhs, rhs } => {
            let _ = write!(s, "icmp {} {}, {}", pred.name(), op_text(lhs), bare(rhs));
        }
        InstKind::Fcmp { pred, lhs, rhs } => {
            let _ = write!(s, "fcmp {} {}, {}", pred.name(), op_text(lhs), bare(rhs));
        }
        InstKind::Select { cond, on_true, on_false } => {
            let _ = write!(s, "select {}, {}, {}", op_text(cond), op_text(on_true), op_text(on_false));
        }
        InstKind::Phi { ty, incoming } => {
            let _ = write!(s, "phi {ty} ");
            let parts: Vec<String> = incoming.iter().map(|(v, l)| format!("[ {}, %{l} ]", bare(v))).collect();
            s.push_str(&parts.join(", "));
        }
        InstKind::Br { target } => {
            let _ = write!(s, "br label %{target}");
        }
        InstKind::CondBr { cond, if_true, if_false } => {
            let _ = write!(s, "br {}, label %{if_true}, label %{if_false}", op_text(cond));
        }
        InstKind::Ret { value } => match value {
            Some(v) => {
                let _ = write!(s, "ret {}", op_text(v));
            }
            None => s.push_str("ret void"),
        },
        InstKind::Call { ret, callee, args } => {
            let a: Vec<String> = args.iter().map(op_text).collect();
            let _ = write!(s, "call {ret} @{callee}({})", a.join(", "));
        }
    }
    s
}

impl std::fmt::Display for Instruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&inst_text(self, Syntax::Legacy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_constants_use_short_decimal_when_exact() {
        assert_eq!(float_text(1.0f32.to_bits()), "1.000000e+00");
        assert_eq!(float_text(0.125f32.to_bits()), "1.250000e-01");
        assert_eq!(float_text(0.1f32.to_bits()), "0x3FB99999A0000000");
        assert_eq!(float_text(f32::NEG_INFINITY.to_bits()), "0xFFF0000000000000");
    }

    #[test]
    fn global_prints_in_legacy_form() {
        let m = IrModule {
            globals: vec![GlobalDef::zeroed("arg0", Type::array(Type::Float, 2), Some(8))],
            ..Default::default()
        };
        assert_eq!(print_module(&m), "@arg0 = global [2 x float] zeroinitializer, align 8\n");
    }

    #[test]
    fn volatile_load_keeps_keyword() {
        let inst = Instruction::new(
            Some("2".into()),
            InstKind::Load { volatile: true, ptr: Operand::local(Type::ptr(Type::Float), "0"), align: Some(8) },
        );
        assert_eq!(inst_text(&inst, Syntax::Legacy), "%2 = load volatile float* %0, align 8");
        assert_eq!(inst_text(&inst, Syntax::Modern), "%2 = load volatile float, float* %0, align 8");
    }
}
