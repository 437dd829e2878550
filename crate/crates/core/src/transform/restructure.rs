//! Turns the software calling convention of an ahead-of-time compiled
//! kernel into a standalone one:
//!
//! ```text
//! define void @main(i8* %retval, i8* %run_options, i8** %params, i8** %temps, i64* %prof_counters)
//! ```
//!
//! becomes `define void @main()` reading inputs from `@arg<k>`, scratch
//! buffers in `@temp<k>` and writing the result to `@retval`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::diag::{Diagnostic, Location};
use crate::ir::rewrite::renumber;
use crate::ir::{GlobalDef, InstKind, IrModule, Type, Value};

/// Parameter positions of the three roles in the entry signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SignatureRoles {
    pub params: Option<usize>,
    pub temps: Option<usize>,
    pub retval: Option<usize>,
}

impl SignatureRoles {
    /// Finds the roles by parameter name, falling back to the five-argument
    /// positional convention `(retval, run_options, params, temps, prof_counters)`.
    pub fn identify(params: &[crate::ir::Param]) -> Option<SignatureRoles> {
        let i8p = Type::ptr(Type::Int(8));
        let i8pp = Type::ptr(i8p.clone());
        let find = |name: &str, ty: &Type| params.iter().position(|p| p.name == name && &p.ty == ty);
        let named = SignatureRoles { params: find("params", &i8pp), temps: find("temps", &i8pp), retval: find("retval", &i8p) };
        if named != SignatureRoles::default() {
            return Some(named);
        }
        let positional = [i8p.clone(), i8p, i8pp.clone(), i8pp, Type::ptr(Type::i64())];
        if params.len() == 5 && params.iter().zip(&positional).all(|(p, t)| &p.ty == t) {
            return Some(SignatureRoles { params: Some(2), temps: Some(3), retval: Some(0) });
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Role {
    Arg(i64),
    Temp(i64),
    Retval,
}

impl Role {
    fn global_name(self) -> String {
        match self {
            Role::Arg(k) => format!("arg{k}"),
            Role::Temp(k) => format!("temp{k}"),
            Role::Retval => "retval".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Table {
    Params,
    Temps,
}

#[derive(Debug, Clone, PartialEq)]
enum Abs {
    /// Points at entry `k` of an address table.
    Slot(Table, i64),
    /// A buffer address, typed once its array type has been revealed.
    Buffer(Role, Option<Type>),
}

/// Rewrites the entry function into standalone form. Modules whose entry
/// already takes no arguments are returned unchanged.
pub fn restructure_signature(m: &IrModule) -> Result<IrModule, Diagnostic> {
    let Some(entry_name) = m.entry_name().map(String::from) else { return Ok(m.clone()) };
    let fi = m.functions.iter().position(|f| f.name == entry_name).expect("entry exists");
    let f = &m.functions[fi];
    if f.params.is_empty() {
        return Ok(m.clone());
    }
    let floc = || Location::Function(entry_name.clone());
    let roles = SignatureRoles::identify(&f.params).ok_or_else(|| {
        Diagnostic::error("roles-unidentifiable", floc(), "entry signature has no params/temps/retval arguments")
    })?;

    let mut abs: HashMap<String, Abs> = HashMap::new();
    if let Some(i) = roles.params {
        abs.insert(f.params[i].name.clone(), Abs::Slot(Table::Params, 0));
    }
    if let Some(i) = roles.temps {
        abs.insert(f.params[i].name.clone(), Abs::Slot(Table::Temps, 0));
    }
    if let Some(i) = roles.retval {
        abs.insert(f.params[i].name.clone(), Abs::Buffer(Role::Retval, None));
    }
    let other_params: HashSet<&str> = f
        .params
        .iter()
        .enumerate()
        .filter(|(i, _)| ![roles.params, roles.temps, roles.retval].contains(&Some(*i)))
        .map(|(_, p)| p.name.as_str())
        .collect();

    // Walk the definitions that peel buffers out of the tables.
    let mut buffer_types: BTreeMap<Role, Type> = BTreeMap::new();
    let mut dissolved: HashSet<(usize, usize)> = HashSet::new();
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, inst) in b.insts.iter().enumerate() {
            let iloc = || Location::Inst { function: entry_name.clone(), block: b.label.clone(), index: ii };
            for op in inst.operands() {
                if let Value::Local(n) = &op.value {
                    if other_params.contains(n.as_str()) {
                        return Err(Diagnostic::error(
                            "roles-unidentifiable",
                            iloc(),
                            format!("runtime argument %{n} is used by the kernel"),
                        ));
                    }
                }
            }
            let Some(src) = inst.operands().iter().find_map(|o| o.value.as_local().and_then(|n| abs.get(n).cloned()))
            else {
                continue;
            };
            let new = match (&inst.kind, &src) {
                (InstKind::Gep { indices, .. }, Abs::Slot(t, k)) if indices.len() == 1 => match indices[0].const_int() {
                    Some(c) => Some(Abs::Slot(*t, k + c)),
                    None => {
                        return Err(Diagnostic::error("roles-unidentifiable", iloc(), "dynamic index into the address table"))
                    }
                },
                (InstKind::Cast { .. }, Abs::Slot(..)) => Some(src.clone()),
                (InstKind::Load { ptr, .. }, Abs::Slot(t, k)) => {
                    let role = match t {
                        Table::Params => Role::Arg(*k),
                        Table::Temps => Role::Temp(*k),
                    };
                    let loaded = ptr.ty.pointee().cloned().unwrap_or(Type::Void);
                    let ty = match loaded.pointee() {
                        Some(Type::Int(8)) => None,
                        Some(t) => Some(t.clone()),
                        None => return Err(Diagnostic::error("roles-unidentifiable", iloc(), "table entry is not an address")),
                    };
                    Some(Abs::Buffer(role, ty))
                }
                (InstKind::Cast { to, .. }, Abs::Buffer(role, None)) => Some(Abs::Buffer(*role, to.pointee().cloned())),
                (_, Abs::Buffer(_, Some(_))) => None,
                _ => {
                    return Err(Diagnostic::error(
                        "roles-unidentifiable",
                        iloc(),
                        format!("unsupported use of the calling-convention arguments in `{inst}`"),
                    ))
                }
            };
            if let Some(a) = new {
                if let Abs::Buffer(role, Some(t)) = &a {
                    if !matches!(t, Type::Array(..)) {
                        return Err(Diagnostic::error(
                            "unsized-buffer",
                            iloc(),
                            format!("buffer {} is viewed as {t}*; its array size cannot be recovered", role.global_name()),
                        ));
                    }
                    match buffer_types.get(role) {
                        Some(prev) if prev != t => {
                            return Err(Diagnostic::error(
                                "roles-unidentifiable",
                                iloc(),
                                format!("buffer {} is used both as {prev} and {t}", role.global_name()),
                            ))
                        }
                        _ => {
                            buffer_types.insert(*role, t.clone());
                        }
                    }
                }
                let r = inst.result.clone().expect("value-producing instruction");
                abs.insert(r, a);
                dissolved.insert((bi, ii));
            }
        }
    }
    // A buffer that is used but never sized cannot be placed in memory.
    for b in &f.blocks {
        for (ii, inst) in b.insts.iter().enumerate() {
            for op in inst.operands() {
                if let Some(Abs::Buffer(role, None)) = op.value.as_local().and_then(|n| abs.get(n)) {
                    let is_peel = matches!(inst.kind, InstKind::Cast { .. });
                    if !is_peel {
                        return Err(Diagnostic::error(
                            "unsized-buffer",
                            Location::Inst { function: entry_name.clone(), block: b.label.clone(), index: ii },
                            format!("buffer {} is used without an array type", role.global_name()),
                        ));
                    }
                }
            }
        }
    }

    let mut out = m.clone();
    for role in buffer_types.keys() {
        let name = role.global_name();
        if m.global(&name).is_some() {
            return Err(Diagnostic::error("duplicate-name", Location::Global(name.clone()), "global already exists"));
        }
    }
    for (role, ty) in &buffer_types {
        out.globals.push(GlobalDef::zeroed(role.global_name(), ty.clone(), Some(8)));
    }
    let nf = &mut out.functions[fi];
    nf.params.clear();
    for (bi, b) in nf.blocks.iter_mut().enumerate() {
        let mut ii = 0;
        b.insts.retain(|_| {
            let keep = !dissolved.contains(&(bi, ii));
            ii += 1;
            keep
        });
        for inst in &mut b.insts {
            for op in inst.operands_mut() {
                if let Some(Abs::Buffer(role, Some(_))) = op.value.as_local().and_then(|n| abs.get(n)) {
                    op.value = Value::Global(role.global_name());
                }
            }
        }
    }
    renumber(nf);

    let inputs: BTreeSet<String> =
        buffer_types.keys().filter(|r| matches!(r, Role::Arg(_))).map(|r| r.global_name()).collect();
    let outputs: BTreeSet<String> = buffer_types.keys().filter(|r| **r == Role::Retval).map(|r| r.global_name()).collect();
    mark_io_volatile(&mut out, &inputs, &outputs);
    Ok(out)
}

type Roots = Vec<HashMap<String, BTreeSet<String>>>;

fn roots_of(roots: &Roots, fi: usize, v: &Value) -> BTreeSet<String> {
    match v {
        Value::Global(g) => BTreeSet::from([g.clone()]),
        Value::Local(n) => roots[fi].get(n).cloned().unwrap_or_default(),
        _ => BTreeSet::new(),
    }
}

/// Globals each pointer-typed local may point into, per function. Tracked
/// through geps, casts, phis, selects and call arguments.
fn pointer_roots(m: &IrModule) -> Roots {
    let findex: HashMap<String, usize> = m.functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
    let mut roots: Roots = vec![HashMap::new(); m.functions.len()];
    let of = roots_of;
    let mut changed = true;
    while changed {
        changed = false;
        for (fi, f) in m.functions.iter().enumerate() {
            for inst in f.insts() {
                let mut add: Vec<(usize, String, BTreeSet<String>)> = Vec::new();
                match &inst.kind {
                    InstKind::Gep { base, .. } => add.push((fi, inst.result.clone().unwrap_or_default(), of(&roots, fi, &base.value))),
                    InstKind::Cast { value, .. } if value.ty.is_ptr() => {
                        add.push((fi, inst.result.clone().unwrap_or_default(), of(&roots, fi, &value.value)))
                    }
                    InstKind::Phi { ty, incoming } if ty.is_ptr() => {
                        let s = incoming.iter().flat_map(|(v, _)| of(&roots, fi, &v.value)).collect();
                        add.push((fi, inst.result.clone().unwrap_or_default(), s));
                    }
                    InstKind::Select { on_true, on_false, .. } if on_true.ty.is_ptr() => {
                        let mut s = of(&roots, fi, &on_true.value);
                        s.extend(of(&roots, fi, &on_false.value));
                        add.push((fi, inst.result.clone().unwrap_or_default(), s));
                    }
                    InstKind::Call { callee, args, .. } => {
                        if let Some(&ci) = findex.get(callee) {
                            for (p, a) in m.functions[ci].params.iter().zip(args) {
                                if a.ty.is_ptr() {
                                    add.push((ci, p.name.clone(), of(&roots, fi, &a.value)));
                                }
                            }
                        }
                    }
                    _ => {}
                }
                for (tf, name, s) in add {
                    if s.is_empty() {
                        continue;
                    }
                    let e = roots[tf].entry(name).or_default();
                    let before = e.len();
                    e.extend(s);
                    changed |= e.len() != before;
                }
            }
        }
    }
    roots
}

/// Globals the module may store to.
pub fn written_globals(m: &IrModule) -> BTreeSet<String> {
    let roots = pointer_roots(m);
    let mut out = BTreeSet::new();
    for (fi, f) in m.functions.iter().enumerate() {
        for inst in f.insts() {
            if let InstKind::Store { ptr, .. } = &inst.kind {
                out.extend(roots_of(&roots, fi, &ptr.value));
            }
        }
    }
    out
}

/// Marks every load that may read an input global and every store that may
/// write an output global as volatile.
pub fn mark_io_volatile(m: &mut IrModule, inputs: &BTreeSet<String>, outputs: &BTreeSet<String>) {
    let roots = pointer_roots(m);
    let of = roots_of;
    for (fi, f) in m.functions.iter_mut().enumerate() {
        for b in &mut f.blocks {
            for inst in &mut b.insts {
                match &mut inst.kind {
                    InstKind::Load { volatile, ptr, .. } if of(&roots, fi, &ptr.value).iter().any(|g| inputs.contains(g)) => {
                        *volatile = true;
                    }
                    InstKind::Store { volatile, ptr, .. } if of(&roots, fi, &ptr.value).iter().any(|g| outputs.contains(g)) => {
                        *volatile = true;
                    }
                    _ => {}
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_module, print_module};

    const ALG1: &str = "define void @main(i8* %retval, i8* %run_options, i8** %params, i8** %temps, i64* %prof_counters) {
  %0 = bitcast i8** %params to [2 x float]**
  %arg0 = load [2 x float]** %0, align 8
  %1 = load i8** %temps, align 8
  %2 = getelementptr inbounds [2 x float]* %arg0, i64 0, i64 0
  %3 = getelementptr inbounds [2 x float]* %arg0, i64 0, i64 1
  %4 = load float* %2, align 8
  %5 = load float* %3, align 8
  ret void
}
";

    const ALG2: &str = "@arg0 = global [2 x float] zeroinitializer, align 8
define void @main() {
  %0 = getelementptr inbounds [2 x float]* @arg0, i64 0, i64 0
  %1 = getelementptr inbounds [2 x float]* @arg0, i64 0, i64 1
  %2 = load volatile float* %0, align 8
  %3 = load volatile float* %1, align 8
  ret void
}
";

    #[test]
    fn first_listing_becomes_second() {
        let got = restructure_signature(&parse_module(ALG1).unwrap().module).unwrap();
        let want = parse_module(ALG2).unwrap().module;
        assert!(got.structurally_eq(&want), "{}", print_module(&got));
    }

    #[test]
    fn standalone_module_is_unchanged() {
        let m = parse_module(ALG2).unwrap().module;
        assert_eq!(restructure_signature(&m).unwrap(), m);
    }

    #[test]
    fn load_then_bitcast_and_output_stores() {
        let src = "define void @main(i8* %retval, i8* %run_options, i8** %params, i8** %temps, i64* %prof_counters) {
entry:
  %s1 = getelementptr inbounds i8** %params, i64 1
  %b1 = load i8** %s1, align 8
  %a1 = bitcast i8* %b1 to [3 x float]*
  %o = bitcast i8* %retval to [3 x float]*
  %p = getelementptr inbounds [3 x float]* %a1, i64 0, i64 2
  %v = load float* %p, align 4
  %q = getelementptr inbounds [3 x float]* %o, i64 0, i64 0
  store float %v, float* %q, align 4
  ret void
}
";
        let m = restructure_signature(&parse_module(src).unwrap().module).unwrap();
        let text = print_module(&m);
        assert!(text.contains("@arg1 = global [3 x float] zeroinitializer, align 8"), "{text}");
        assert!(text.contains("@retval = global [3 x float] zeroinitializer, align 8"));
        assert!(text.contains("load volatile float*"));
        assert!(text.contains("store volatile float"));
        assert!(crate::ir::validate(&m).is_empty());
    }

    #[test]
    fn unsized_input_is_rejected() {
        let src = "define void @main(i8* %retval, i8* %run_options, i8** %params, i8** %temps, i64* %prof_counters) {
entry:
  %0 = bitcast i8** %params to float**
  %a = load float** %0
  %v = load float* %a
  ret void
}
";
        let e = restructure_signature(&parse_module(src).unwrap().module).unwrap_err();
        assert_eq!(e.code, "unsized-buffer");
    }

    #[test]
    fn unknown_signature_is_rejected() {
        let m = parse_module("define void @main(float* %x) {\nentry:\n  ret void\n}\n").unwrap().module;
        assert_eq!(restructure_signature(&m).unwrap_err().code, "roles-unidentifiable");
    }

    #[test]
    fn volatility_follows_pointers_into_callees() {
        let src = "@arg0 = global [2 x float] zeroinitializer
@retval = global [2 x float] zeroinitializer
define void @copy([2 x float]* %src, [2 x float]* %dst) {
entry:
  %p = getelementptr inbounds [2 x float]* %src, i64 0, i64 1
  %v = load float* %p
  %q = getelementptr inbounds [2 x float]* %dst, i64 0, i64 1
  store float %v, float* %q
  ret void
}
define void @main() {
entry:
  call void @copy([2 x float]* @arg0, [2 x float]* @retval)
  ret void
}
";
        let mut m = parse_module(src).unwrap().module;
        mark_io_volatile(&mut m, &BTreeSet::from(["arg0".into()]), &BTreeSet::from(["retval".into()]));
        let text = print_module(&m);
        assert!(text.contains("load volatile float* %p"));
        assert!(text.contains("store volatile float %v"));
    }
}
