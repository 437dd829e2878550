use std::collections::{HashMap, HashSet};

use super::cfg::Cfg;
use super::*;
use crate::diag::{Diagnostic, Diagnostics, Location};

/// Signature of a built-in intrinsic: (return, params).
pub(crate) fn intrinsic_signature(name: &str) -> Option<(Type, Vec<Type>)> {
    match name {
        "expf" | "tanhf" | "logf" => Some((Type::Float, vec![Type::Float])),
        "llvm.maxnum.f32" => Some((Type::Float, vec![Type::Float, Type::Float])),
        _ => None,
    }
}

/// Structural validation: names, types, terminators, SSA dominance.
/// Returns an empty list iff the module is well formed; out-of-range
/// constant `inbounds` indices produce warnings.
pub fn validate(m: &IrModule) -> Diagnostics {
    let mut d = Diagnostics::new();
    let mut names = HashSet::new();
    for g in &m.globals {
        if !names.insert(g.name.as_str()) {
            d.push(Diagnostic::error("duplicate-name", Location::Global(g.name.clone()), "duplicate global name"));
        }
        check_global(g, &mut d);
    }
    let mut fnames = HashSet::new();
    for decl in &m.declarations {
        if !fnames.insert(decl.name.as_str()) {
            d.push(Diagnostic::error("duplicate-name", Location::Function(decl.name.clone()), "duplicate function name"));
        }
    }
    for f in &m.functions {
        if !fnames.insert(f.name.as_str()) {
            d.push(Diagnostic::error("duplicate-name", Location::Function(f.name.clone()), "duplicate function name"));
        }
    }
    for f in &m.functions {
        FnChecker::new(m, f, &mut d).run();
    }
    d
}

fn check_global(g: &GlobalDef, d: &mut Diagnostics) {
    let loc = || Location::Global(g.name.clone());
    if matches!(g.ty, Type::Void | Type::Ptr(_)) || g.ty.contains_vector() {
        d.push(Diagnostic::error("type-mismatch", loc(), format!("unsupported global type {}", g.ty)));
        return;
    }
    if let Init::Values(vals) = &g.init {
        if vals.len() as u64 != g.ty.flat_len() {
            d.push(Diagnostic::error(
                "bad-initializer",
                loc(),
                format!("initializer has {} values, type {} needs {}", vals.len(), g.ty, g.ty.flat_len()),
            ));
        }
        let leaf = g.ty.leaf();
        let ok = vals.iter().all(|v| match v {
            Value::Int(_) => leaf.is_int(),
            Value::Float(_) => leaf.is_float(),
            _ => false,
        });
        if !ok {
            d.push(Diagnostic::error("bad-initializer", loc(), format!("initializer values do not match {leaf}")));
        }
    }
}

/// Where a local is defined (block, inst; `None` for params) and its type.
type Def = (Option<(usize, usize)>, Type);

struct FnChecker<'a> {
    m: &'a IrModule,
    f: &'a Function,
    d: &'a mut Diagnostics,
    defs: HashMap<&'a str, Def>,
    labels: HashMap<&'a str, usize>,
}

impl<'a> FnChecker<'a> {
    fn new(m: &'a IrModule, f: &'a Function, d: &'a mut Diagnostics) -> Self {
        FnChecker { m, f, d, defs: HashMap::new(), labels: HashMap::new() }
    }

    fn loc(&self, b: usize, i: usize) -> Location {
        Location::Inst { function: self.f.name.clone(), block: self.f.blocks[b].label.clone(), index: i }
    }

    fn err(&mut self, code: &'static str, b: usize, i: usize, msg: impl Into<String>) {
        let loc = self.loc(b, i);
        self.d.push(Diagnostic::error(code, loc, msg));
    }

    fn run(mut self) {
        let f = self.f;
        let floc = || Location::Function(f.name.clone());
        if f.blocks.is_empty() {
            self.d.push(Diagnostic::error("bad-terminator", floc(), "function has no blocks"));
            return;
        }
        for p in &f.params {
            if self.defs.insert(p.name.as_str(), (None, p.ty.clone())).is_some() {
                self.d.push(Diagnostic::error("ssa-duplicate", floc(), format!("parameter %{} defined twice", p.name)));
            }
        }
        for (bi, b) in f.blocks.iter().enumerate() {
            if self.labels.insert(b.label.as_str(), bi).is_some() {
                self.d.push(Diagnostic::error(
                    "duplicate-name",
                    Location::Block { function: f.name.clone(), block: b.label.clone() },
                    "duplicate block label",
                ));
            }
        }
        for (bi, b) in f.blocks.iter().enumerate() {
            for (ii, inst) in b.insts.iter().enumerate() {
                if let Some(r) = &inst.result {
                    let ty = inst.result_type();
                    if ty == Type::Void {
                        self.err("type-mismatch", bi, ii, format!("%{r} names a void result"));
                    }
                    if self.defs.insert(r.as_str(), (Some((bi, ii)), ty)).is_some() {
                        self.err("ssa-duplicate", bi, ii, format!("%{r} defined more than once"));
                    }
                }
            }
        }
        let cfg = Cfg::new(f);
        for (bi, b) in f.blocks.iter().enumerate() {
            let n = b.insts.len();
            if n == 0 || !b.insts[n - 1].is_terminator() {
                self.d.push(Diagnostic::error(
                    "bad-terminator",
                    Location::Block { function: f.name.clone(), block: b.label.clone() },
                    "block does not end with a terminator",
                ));
            }
            let mut seen_non_phi = false;
            for (ii, inst) in b.insts.iter().enumerate() {
                if inst.is_terminator() && ii + 1 != n {
                    self.err("bad-terminator", bi, ii, "terminator in the middle of a block");
                }
                if inst.is_phi() {
                    if seen_non_phi {
                        self.err("bad-phi", bi, ii, "phi after a non-phi instruction");
                    }
                } else {
                    seen_non_phi = true;
                }
                self.check_operands(&cfg, bi, ii, inst);
                self.check_types(&cfg, bi, ii, inst);
            }
        }
    }

    fn check_operands(&mut self, cfg: &Cfg, bi: usize, ii: usize, inst: &Instruction) {
        let phi_preds: Vec<Option<&str>> = match &inst.kind {
            InstKind::Phi { incoming, .. } => incoming.iter().map(|(_, l)| Some(l.as_str())).collect(),
            _ => vec![None; inst.operands().len()],
        };
        for (op, pred) in inst.operands().into_iter().zip(phi_preds) {
            match &op.value {
                Value::Local(name) => {
                    let Some((site, ty)) = self.defs.get(name.as_str()).cloned() else {
                        self.err("ssa-undefined", bi, ii, format!("%{name} is never defined"));
                        continue;
                    };
                    if ty != op.ty {
                        self.err("type-mismatch", bi, ii, format!("%{name} has type {ty}, used as {}", op.ty));
                    }
                    let Some((db, di)) = site else { continue };
                    let ok = match pred {
                        Some(label) => match self.labels.get(label) {
                            Some(&pb) => cfg.dominates(db, pb),
                            None => true,
                        },
                        None => {
                            if !cfg.reachable(bi) {
                                true
                            } else if db == bi {
                                di < ii
                            } else {
                                cfg.dominates(db, bi)
                            }
                        }
                    };
                    if !ok {
                        self.err("ssa-use-before-def", bi, ii, format!("use of %{name} is not dominated by its definition"));
                    }
                }
                Value::Global(name) => match self.m.global(name) {
                    Some(g) => {
                        if op.ty != Type::ptr(g.ty.clone()) {
                            self.err("type-mismatch", bi, ii, format!("@{name} has type {}*, used as {}", g.ty, op.ty));
                        }
                    }
                    None => self.err("ssa-undefined", bi, ii, format!("unknown global @{name}")),
                },
                Value::Int(_) => {
                    if !op.ty.scalar_of().is_int() {
                        self.err("type-mismatch", bi, ii, format!("integer constant of type {}", op.ty));
                    }
                }
                Value::Float(_) => {
                    if !op.ty.scalar_of().is_float() {
                        self.err("type-mismatch", bi, ii, format!("float constant of type {}", op.ty));
                    }
                }
            }
        }
    }

    fn check_types(&mut self, cfg: &Cfg, bi: usize, ii: usize, inst: &Instruction) {
        let f = self.f;
        match &inst.kind {
            InstKind::Gep { inbounds, base, indices } => {
                if indices.is_empty() {
                    self.err("type-mismatch", bi, ii, "gep needs at least one index");
                }
                if indices.iter().any(|i| !i.ty.is_int()) {
                    self.err("type-mismatch", bi, ii, "gep indices must be integers");
                }
                if gep_result_type(&base.ty, indices.len()).is_none() {
                    self.err("type-mismatch", bi, ii, format!("{} indices do not fit base type {}", indices.len(), base.ty));
                    return;
                }
                if *inbounds {
                    let mut t = base.ty.pointee().cloned();
                    for idx in indices.iter().skip(1) {
                        let Some(Type::Array(e, n)) = t else { break };
                        if let Some(c) = idx.const_int() {
                            if c < 0 || c as u64 >= n {
                                let loc = self.loc(bi, ii);
                                self.d.push(Diagnostic::warning(
                                    "inbounds-out-of-range",
                                    loc,
                                    format!("constant index {c} outside [0, {n})"),
                                ));
                            }
                        }
                        t = Some(*e);
                    }
                }
            }
            InstKind::Load { ptr, .. } => {
                if !ptr.ty.is_ptr() {
                    self.err("type-mismatch", bi, ii, "load operand is not a pointer");
                }
            }
            InstKind::Store { value, ptr, .. } => {
                if ptr.ty.pointee() != Some(&value.ty) {
                    self.err("type-mismatch", bi, ii, format!("store of {} through {}", value.ty, ptr.ty));
                }
            }
            InstKind::Cast { op, value, to } => {
                let (from, to_s) = (value.ty.scalar_of(), to.scalar_of());
                let ok = match op {
                    CastOp::Bitcast => value.ty.is_ptr() == to.is_ptr(),
                    CastOp::ZExt | CastOp::SExt => matches!((from, to_s), (Type::Int(a), Type::Int(b)) if a < b),
                    CastOp::Trunc => matches!((from, to_s), (Type::Int(a), Type::Int(b)) if a > b),
                    CastOp::SiToFp => from.is_int() && to_s.is_float(),
                    CastOp::FpToSi => from.is_float() && to_s.is_int(),
                };
                if !ok {
                    self.err("type-mismatch", bi, ii, format!("invalid {} from {} to {to}", op.name(), value.ty));
                }
            }
            InstKind::Binary { op, lhs, rhs } => {
                let s = lhs.ty.scalar_of();
                let ok = lhs.ty == rhs.ty
                    && if op.is_float() { s.is_float() } else { matches!(s, Type::Int(w) if *w != 8) };
                if !ok {
                    self.err("type-mismatch", bi, ii, format!("{} on {} and {}", op.name(), lhs.ty, rhs.ty));
                }
            }
            InstKind::Icmp { lhs, rhs, .. } => {
                if lhs.ty != rhs.ty || !lhs.ty.scalar_of().is_int() {
                    self.err("type-mismatch", bi, ii, "icmp operands must be integers of one type");
                }
            }
            InstKind::Fcmp { lhs, rhs, .. } => {
                if lhs.ty != rhs.ty || !lhs.ty.scalar_of().is_float() {
                    self.err("type-mismatch", bi, ii, "fcmp operands must be floats");
                }
            }
            InstKind::Select { cond, on_true, on_false } => {
                if cond.ty != Type::i1() || on_true.ty != on_false.ty {
                    self.err("type-mismatch", bi, ii, "select needs an i1 condition and equal arm types");
                }
            }
            InstKind::Phi { incoming, .. } => {
                let mut labels = HashSet::new();
                for (_, l) in incoming {
                    match self.labels.get(l.as_str()) {
                        None => self.err("bad-label", bi, ii, format!("phi names unknown block %{l}")),
                        Some(&pb) => {
                            if cfg.reachable(bi) && cfg.reachable(pb) && !cfg.preds[bi].contains(&pb) {
                                self.err("bad-phi", bi, ii, format!("%{l} is not a predecessor"));
                            }
                            labels.insert(pb);
                        }
                    }
                }
                if cfg.reachable(bi) {
                    for &p in &cfg.preds[bi] {
                        if cfg.reachable(p) && !labels.contains(&p) {
                            let l = &f.blocks[p].label;
                            self.err("bad-phi", bi, ii, format!("phi has no entry for predecessor %{l}"));
                        }
                    }
                }
            }
            InstKind::Br { target } => {
                if !self.labels.contains_key(target.as_str()) {
                    self.err("bad-label", bi, ii, format!("branch to unknown block %{target}"));
                }
            }
            InstKind::CondBr { cond, if_true, if_false } => {
                if cond.ty != Type::i1() {
                    self.err("type-mismatch", bi, ii, "branch condition must be i1");
                }
                for t in [if_true, if_false] {
                    if !self.labels.contains_key(t.as_str()) {
                        self.err("bad-label", bi, ii, format!("branch to unknown block %{t}"));
                    }
                }
            }
            InstKind::Ret { value } => {
                let got = value.as_ref().map_or(Type::Void, |v| v.ty.clone());
                if got != f.ret {
                    self.err("type-mismatch", bi, ii, format!("returns {got} from a function returning {}", f.ret));
                }
            }
            InstKind::Call { ret, callee, args } => {
                let sig = if let Some(s) = intrinsic_signature(callee) {
                    Some(s)
                } else if let Some(g) = self.m.function(callee) {
                    Some((g.ret.clone(), g.params.iter().map(|p| p.ty.clone()).collect()))
                } else {
                    self.m.declaration(callee).map(|d| (d.ret.clone(), d.params.clone()))
                };
                match sig {
                    None => self.err("unknown-callee", bi, ii, format!("call to undeclared @{callee}")),
                    Some((r, ps)) => {
                        let arg_tys: Vec<Type> = args.iter().map(|a| a.ty.clone()).collect();
                        if r != *ret || ps != arg_tys {
                            self.err("type-mismatch", bi, ii, format!("call does not match signature of @{callee}"));
                        }
                    }
                }
            }
        }
    }
}
