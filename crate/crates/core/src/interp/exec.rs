//! Execution engine. Functions are first lowered to a slot-indexed form so
//! the inner loop does no name lookups.

use std::collections::HashMap;

use super::{initial_bank, Bank, MemoryImage, ScalarKind, Word};
use crate::diag::{Diagnostic, Location};
use crate::ir::{normalize_int, BinOp, CastOp, FloatPred, InstKind, IntPred, IrModule, Operand, Type, Value};

/// Default instruction budget.
pub const DEFAULT_FUEL: u64 = 100_000_000;

const MAX_CALL_DEPTH: usize = 512;

/// Control-flow record of one execution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecTrace {
    /// Function names, in module order.
    pub functions: Vec<String>,
    /// Block labels per function.
    pub blocks: Vec<Vec<String>>,
    /// Visited (function, block) indices in execution order.
    pub path: Vec<(u32, u32)>,
    /// Visit counts per function and block.
    pub visits: Vec<Vec<u64>>,
    /// Branch instructions executed.
    pub branches: u64,
    /// Instructions executed (phis included).
    pub steps: u64,
}

impl ExecTrace {
    pub fn visits_of(&self, func: &str, block: &str) -> u64 {
        let Some(fi) = self.functions.iter().position(|f| f == func) else { return 0 };
        self.blocks[fi].iter().position(|b| b == block).map_or(0, |bi| self.visits[fi][bi])
    }

    /// Visited (function, block) names in order.
    pub fn labels(&self) -> impl Iterator<Item = (&str, &str)> {
        self.path
            .iter()
            .map(|&(f, b)| (self.functions[f as usize].as_str(), self.blocks[f as usize][b as usize].as_str()))
    }
}

/// Runs the module's entry (`@main`, else the first function) with the
/// default fuel.
pub fn run_entry(m: &IrModule, img: &MemoryImage) -> Result<(MemoryImage, ExecTrace), Diagnostic> {
    let entry = m
        .entry_name()
        .ok_or_else(|| Diagnostic::error("no-entry", Location::Module, "module defines no function"))?
        .to_string();
    run(m, &entry, img, DEFAULT_FUEL)
}

/// Executes `entry`, which must take no arguments. Globals absent from
/// `img` start from their initializers. The returned image holds every
/// global of the module.
pub fn run(m: &IrModule, entry: &str, img: &MemoryImage, fuel: u64) -> Result<(MemoryImage, ExecTrace), Diagnostic> {
    let mut banks = Vec::with_capacity(m.globals.len());
    for g in &m.globals {
        let bank = match img.get(&g.name) {
            Some(b) => {
                let kind = ScalarKind::of(&g.ty);
                if Some(b.kind) != kind || b.len() as u64 != g.ty.flat_len() {
                    return Err(Diagnostic::error(
                        "bad-image",
                        Location::Global(g.name.clone()),
                        format!("image bank has {} {:?} words; global is {}", b.len(), b.kind, g.ty),
                    ));
                }
                b.clone()
            }
            None => initial_bank(&g.ty, &g.init, &g.name)?,
        };
        banks.push(bank);
    }
    let program = Program::compile(m)?;
    let fi = program
        .index
        .get(entry)
        .copied()
        .ok_or_else(|| Diagnostic::error("no-entry", Location::Module, format!("no function @{entry}")))?;
    if !program.funcs[fi].params.is_empty() {
        return Err(Diagnostic::error(
            "entry-not-standalone",
            Location::Function(entry.into()),
            "entry function takes arguments; restructure the signature first",
        ));
    }
    let mut trace = ExecTrace {
        functions: m.functions.iter().map(|f| f.name.clone()).collect(),
        blocks: m.functions.iter().map(|f| f.blocks.iter().map(|b| b.label.clone()).collect()).collect(),
        visits: m.functions.iter().map(|f| vec![0; f.blocks.len()]).collect(),
        ..Default::default()
    };
    let mut machine = Machine { program: &program, banks, trace: &mut trace, fuel };
    machine.call(fi, Vec::new(), 0)?;
    let mut out = MemoryImage::new();
    for (g, b) in m.globals.iter().zip(machine.banks) {
        out.insert(&g.name, b);
    }
    Ok((out, trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RVal {
    I(i64),
    F(f32),
    /// (bank, flat element offset)
    P(u32, i64),
    Undef,
}

#[derive(Debug, Clone, Copy)]
enum COp {
    Slot(u32),
    Const(RVal),
}

#[derive(Debug, Clone, Copy)]
enum Intrinsic {
    Exp,
    Tanh,
    Log,
    MaxNum,
}

#[derive(Debug, Clone)]
enum Callee {
    Func(usize),
    Intrinsic(Intrinsic),
}

#[derive(Debug, Clone)]
enum Op {
    Gep { base: COp, idx: Vec<(COp, i64)> },
    Load { ptr: COp },
    Store { val: COp, ptr: COp },
    Bin { op: BinOp, a: COp, b: COp, width: u32 },
    Icmp { pred: IntPred, a: COp, b: COp, width: u32 },
    Fcmp { pred: FloatPred, a: COp, b: COp },
    Select { c: COp, t: COp, f: COp },
    Cast { op: CastOp, v: COp, from: Type, to: Type },
    Call { callee: Callee, args: Vec<COp> },
}

#[derive(Debug, Clone)]
struct CInst {
    dst: Option<u32>,
    op: Op,
    at: u32,
}

#[derive(Debug, Clone)]
enum Term {
    Br(u32),
    CondBr(COp, u32, u32),
    Ret(Option<COp>),
}

#[derive(Debug, Clone)]
struct CBlock {
    phis: Vec<(u32, Vec<(u32, COp)>)>,
    insts: Vec<CInst>,
    term: Term,
    term_at: u32,
}

#[derive(Debug, Clone)]
struct CFunc {
    name: String,
    labels: Vec<String>,
    nslots: usize,
    params: Vec<u32>,
    blocks: Vec<CBlock>,
}

struct Program {
    funcs: Vec<CFunc>,
    index: HashMap<String, usize>,
}

impl Program {
    fn compile(m: &IrModule) -> Result<Program, Diagnostic> {
        let index: HashMap<String, usize> = m.functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
        let globals: HashMap<&str, u32> = m.globals.iter().enumerate().map(|(i, g)| (g.name.as_str(), i as u32)).collect();
        let mut funcs = Vec::with_capacity(m.functions.len());
        for f in &m.functions {
            let mut slots: HashMap<&str, u32> = HashMap::new();
            for p in &f.params {
                let n = slots.len() as u32;
                slots.insert(&p.name, n);
            }
            for i in f.insts() {
                if let Some(r) = &i.result {
                    let n = slots.len() as u32;
                    slots.insert(r, n);
                }
            }
            let labels: HashMap<&str, u32> =
                f.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i as u32)).collect();
            let err = |block: &str, index: usize, msg: String| {
                Diagnostic::error(
                    "bad-module",
                    Location::Inst { function: f.name.clone(), block: block.into(), index },
                    msg,
                )
            };
            let mut blocks = Vec::with_capacity(f.blocks.len());
            for b in &f.blocks {
                let opnd = |o: &Operand, at: usize| -> Result<COp, Diagnostic> {
                    Ok(match &o.value {
                        Value::Local(n) => COp::Slot(
                            *slots.get(n.as_str()).ok_or_else(|| err(&b.label, at, format!("undefined %{n}")))?,
                        ),
                        Value::Global(g) => COp::Const(RVal::P(
                            *globals.get(g.as_str()).ok_or_else(|| err(&b.label, at, format!("unknown global @{g}")))?,
                            0,
                        )),
                        Value::Int(v) => COp::Const(RVal::I(*v)),
                        Value::Float(bits) => COp::Const(RVal::F(f32::from_bits(*bits))),
                    })
                };
                let label = |l: &str, at: usize| -> Result<u32, Diagnostic> {
                    labels.get(l).copied().ok_or_else(|| err(&b.label, at, format!("unknown label %{l}")))
                };
                let mut cb = CBlock { phis: Vec::new(), insts: Vec::new(), term: Term::Ret(None), term_at: 0 };
                let mut terminated = false;
                for (at, inst) in b.insts.iter().enumerate() {
                    let dst = inst.result.as_ref().map(|r| slots[r.as_str()]);
                    let op = match &inst.kind {
                        InstKind::Phi { incoming, .. } => {
                            let mut inc = Vec::with_capacity(incoming.len());
                            for (v, l) in incoming {
                                inc.push((label(l, at)?, opnd(v, at)?));
                            }
                            cb.phis.push((dst.expect("phi has a result"), inc));
                            continue;
                        }
                        InstKind::Br { target } => {
                            cb.term = Term::Br(label(target, at)?);
                            cb.term_at = at as u32;
                            terminated = true;
                            break;
                        }
                        InstKind::CondBr { cond, if_true, if_false } => {
                            cb.term = Term::CondBr(opnd(cond, at)?, label(if_true, at)?, label(if_false, at)?);
                            cb.term_at = at as u32;
                            terminated = true;
                            break;
                        }
                        InstKind::Ret { value } => {
                            cb.term = Term::Ret(value.as_ref().map(|v| opnd(v, at)).transpose()?);
                            cb.term_at = at as u32;
                            terminated = true;
                            break;
                        }
                        InstKind::Gep { base, indices, .. } => {
                            let mut idx = Vec::with_capacity(indices.len());
                            let mut ty = base.ty.pointee().cloned().unwrap_or(Type::Void);
                            for (k, i) in indices.iter().enumerate() {
                                if k > 0 {
                                    ty = match ty {
                                        Type::Array(e, _) => *e,
                                        _ => return Err(err(&b.label, at, "gep indexes past a scalar".into())),
                                    };
                                }
                                idx.push((opnd(i, at)?, ty.flat_len() as i64));
                            }
                            Op::Gep { base: opnd(base, at)?, idx }
                        }
                        InstKind::Load { ptr, .. } => Op::Load { ptr: opnd(ptr, at)? },
                        InstKind::Store { value, ptr, .. } => Op::Store { val: opnd(value, at)?, ptr: opnd(ptr, at)? },
                        InstKind::Binary { op, lhs, rhs } => Op::Bin {
                            op: *op,
                            a: opnd(lhs, at)?,
                            b: opnd(rhs, at)?,
                            width: int_width(&lhs.ty),
                        },
                        InstKind::Icmp { pred, lhs, rhs } => Op::Icmp {
                            pred: *pred,
                            a: opnd(lhs, at)?,
                            b: opnd(rhs, at)?,
                            width: int_width(&lhs.ty),
                        },
                        InstKind::Fcmp { pred, lhs, rhs } => {
                            Op::Fcmp { pred: *pred, a: opnd(lhs, at)?, b: opnd(rhs, at)? }
                        }
                        InstKind::Select { cond, on_true, on_false } => Op::Select {
                            c: opnd(cond, at)?,
                            t: opnd(on_true, at)?,
                            f: opnd(on_false, at)?,
                        },
                        InstKind::Cast { op, value, to } => {
                            Op::Cast { op: *op, v: opnd(value, at)?, from: value.ty.clone(), to: to.clone() }
                        }
                        InstKind::Call { callee, args, .. } => {
                            let c = match callee.as_str() {
                                "expf" => Callee::Intrinsic(Intrinsic::Exp),
                                "tanhf" => Callee::Intrinsic(Intrinsic::Tanh),
                                "logf" => Callee::Intrinsic(Intrinsic::Log),
                                "llvm.maxnum.f32" => Callee::Intrinsic(Intrinsic::MaxNum),
                                name => Callee::Func(
                                    *index
                                        .get(name)
                                        .ok_or_else(|| err(&b.label, at, format!("call to unknown @{name}")))?,
                                ),
                            };
                            let args = args.iter().map(|a| opnd(a, at)).collect::<Result<Vec<_>, _>>()?;
                            Op::Call { callee: c, args }
                        }
                    };
                    cb.insts.push(CInst { dst, op, at: at as u32 });
                }
                if !terminated {
                    return Err(err(&b.label, b.insts.len(), "block has no terminator".into()));
                }
                blocks.push(cb);
            }
            funcs.push(CFunc {
                name: f.name.clone(),
                labels: f.blocks.iter().map(|b| b.label.clone()).collect(),
                nslots: slots.len(),
                params: (0..f.params.len() as u32).collect(),
                blocks,
            });
        }
        Ok(Program { funcs, index })
    }
}

fn int_width(t: &Type) -> u32 {
    match t {
        Type::Int(w) => *w,
        _ => 64,
    }
}

struct Machine<'a> {
    program: &'a Program,
    banks: Vec<Bank>,
    trace: &'a mut ExecTrace,
    fuel: u64,
}

impl Machine<'_> {
    fn call(&mut self, fi: usize, args: Vec<RVal>, depth: usize) -> Result<Option<RVal>, Diagnostic> {
        let program = self.program;
        let f = &program.funcs[fi];
        if depth > MAX_CALL_DEPTH {
            return Err(Diagnostic::error("stack-overflow", Location::Function(f.name.clone()), "call depth exceeded"));
        }
        let mut regs = vec![RVal::Undef; f.nslots];
        for (p, a) in f.params.iter().zip(args) {
            regs[*p as usize] = a;
        }
        let mut bi = 0usize;
        let mut pred: Option<usize> = None;
        let mut phi_buf: Vec<(u32, RVal)> = Vec::new();
        loop {
            let block = &f.blocks[bi];
            self.trace.path.push((fi as u32, bi as u32));
            self.trace.visits[fi][bi] += 1;
            let cost = (block.phis.len() + block.insts.len() + 1) as u64;
            if self.trace.steps + cost > self.fuel {
                return Err(Diagnostic::error(
                    "fuel-exhausted",
                    Location::Block { function: f.name.clone(), block: f.labels[bi].clone() },
                    format!("instruction budget of {} exhausted", self.fuel),
                ));
            }
            self.trace.steps += cost;
            if !block.phis.is_empty() {
                let p = pred.ok_or_else(|| self.fault(f, bi, 0, "bad-phi", "phi in entry block".into()))? as u32;
                phi_buf.clear();
                for (k, (dst, inc)) in block.phis.iter().enumerate() {
                    let Some((_, v)) = inc.iter().find(|(l, _)| *l == p) else {
                        return Err(self.fault(f, bi, k, "bad-phi", format!("no incoming value for %{}", f.labels[p as usize])));
                    };
                    phi_buf.push((*dst, get(&regs, *v)));
                }
                for &(d, v) in &phi_buf {
                    regs[d as usize] = v;
                }
            }
            for inst in &block.insts {
                let v = self.exec(f, bi, inst, &regs, depth)?;
                if let Some(d) = inst.dst {
                    regs[d as usize] = v;
                }
            }
            match &block.term {
                Term::Br(t) => {
                    self.trace.branches += 1;
                    pred = Some(bi);
                    bi = *t as usize;
                }
                Term::CondBr(c, t, e) => {
                    self.trace.branches += 1;
                    let taken = match get(&regs, *c) {
                        RVal::I(v) => v != 0,
                        other => {
                            return Err(self.fault(f, bi, block.term_at as usize, "type-mismatch", format!("branch on {other:?}")))
                        }
                    };
                    pred = Some(bi);
                    bi = if taken { *t } else { *e } as usize;
                }
                Term::Ret(v) => return Ok(v.map(|v| get(&regs, v))),
            }
        }
    }

    fn fault(&self, f: &CFunc, bi: usize, at: usize, code: &'static str, msg: String) -> Diagnostic {
        Diagnostic::error(code, Location::Inst { function: f.name.clone(), block: f.labels[bi].clone(), index: at }, msg)
    }

    fn exec(&mut self, f: &CFunc, bi: usize, inst: &CInst, regs: &[RVal], depth: usize) -> Result<RVal, Diagnostic> {
        let at = inst.at as usize;
        let mismatch = |this: &Self, what: &str| this.fault(f, bi, at, "type-mismatch", format!("operand types do not fit {what}"));
        Ok(match &inst.op {
            Op::Gep { base, idx } => {
                let RVal::P(bank, mut off) = get(regs, *base) else { return Err(mismatch(self, "getelementptr")) };
                for (i, stride) in idx {
                    let RVal::I(i) = get(regs, *i) else { return Err(mismatch(self, "getelementptr")) };
                    off += i * stride;
                }
                RVal::P(bank, off)
            }
            Op::Load { ptr } => {
                let (bank, off) = self.address(f, bi, at, get(regs, *ptr))?;
                match self.banks[bank].data[off] {
                    Word::I1(b) => RVal::I(i64::from(b)),
                    Word::I32(v) => RVal::I(i64::from(v)),
                    Word::I64(v) => RVal::I(v),
                    Word::F32(v) => RVal::F(v),
                }
            }
            Op::Store { val, ptr } => {
                let (bank, off) = self.address(f, bi, at, get(regs, *ptr))?;
                let kind = self.banks[bank].kind;
                let w = match (kind, get(regs, *val)) {
                    (ScalarKind::I1, RVal::I(v)) => Word::I1(v & 1 != 0),
                    (ScalarKind::I32, RVal::I(v)) => Word::I32(v as i32),
                    (ScalarKind::I64, RVal::I(v)) => Word::I64(v),
                    (ScalarKind::F32, RVal::F(v)) => Word::F32(v),
                    _ => return Err(mismatch(self, "store")),
                };
                self.banks[bank].data[off] = w;
                RVal::Undef
            }
            Op::Bin { op, a, b, width } => match (get(regs, *a), get(regs, *b)) {
                (RVal::I(x), RVal::I(y)) => {
                    let r = match op {
                        BinOp::Add => x.wrapping_add(y),
                        BinOp::Sub => x.wrapping_sub(y),
                        BinOp::Mul => x.wrapping_mul(y),
                        BinOp::SDiv | BinOp::SRem => {
                            if y == 0 {
                                return Err(self.fault(f, bi, at, "division-by-zero", "integer division by zero".into()));
                            }
                            if *op == BinOp::SDiv { x.wrapping_div(y) } else { x.wrapping_rem(y) }
                        }
                        _ => return Err(mismatch(self, op.name())),
                    };
                    RVal::I(normalize_int(r, *width))
                }
                (RVal::F(x), RVal::F(y)) => RVal::F(match op {
                    BinOp::FAdd => x + y,
                    BinOp::FSub => x - y,
                    BinOp::FMul => x * y,
                    BinOp::FDiv => x / y,
                    _ => return Err(mismatch(self, op.name())),
                }),
                _ => return Err(mismatch(self, op.name())),
            },
            Op::Icmp { pred, a, b, width } => match (get(regs, *a), get(regs, *b)) {
                (RVal::I(x), RVal::I(y)) => RVal::I(i64::from(pred.eval(x, y, *width))),
                (RVal::P(b1, o1), RVal::P(b2, o2)) => {
                    RVal::I(i64::from(pred.eval(((b1 as i64) << 40) + o1, ((b2 as i64) << 40) + o2, 64)))
                }
                _ => return Err(mismatch(self, "icmp")),
            },
            Op::Fcmp { pred, a, b } => match (get(regs, *a), get(regs, *b)) {
                (RVal::F(x), RVal::F(y)) => RVal::I(i64::from(pred.eval(x, y))),
                _ => return Err(mismatch(self, "fcmp")),
            },
            Op::Select { c, t, f: e } => match get(regs, *c) {
                RVal::I(v) => get(regs, if v != 0 { *t } else { *e }),
                _ => return Err(mismatch(self, "select")),
            },
            Op::Cast { op, v, from, to } => {
                let v = get(regs, *v);
                match (op, v) {
                    (CastOp::Bitcast, RVal::P(..)) => v,
                    (CastOp::Bitcast, RVal::I(x)) if *to == Type::Float => RVal::F(f32::from_bits(x as u32)),
                    (CastOp::Bitcast, RVal::F(x)) => RVal::I(normalize_int(i64::from(x.to_bits()), int_width(to))),
                    (CastOp::Bitcast, RVal::I(_)) => v,
                    (CastOp::ZExt, RVal::I(x)) => {
                        let w = int_width(from);
                        RVal::I(if w >= 64 { x } else { x & ((1i64 << w) - 1) })
                    }
                    (CastOp::SExt, RVal::I(x)) => {
                        RVal::I(if int_width(from) == 1 { -(x & 1) } else { x })
                    }
                    (CastOp::Trunc, RVal::I(x)) => RVal::I(normalize_int(x, int_width(to))),
                    (CastOp::SiToFp, RVal::I(x)) => RVal::F(x as f32),
                    (CastOp::FpToSi, RVal::F(x)) => RVal::I(normalize_int(x as i64, int_width(to))),
                    _ => return Err(mismatch(self, op.name())),
                }
            }
            Op::Call { callee, args } => match callee {
                Callee::Intrinsic(which) => {
                    let mut fs = args.iter().map(|a| match get(regs, *a) {
                        RVal::F(x) => Some(x),
                        _ => None,
                    });
                    let x = fs.next().flatten().ok_or_else(|| mismatch(self, "intrinsic call"))?;
                    match which {
                        Intrinsic::Exp => RVal::F(x.exp()),
                        Intrinsic::Tanh => RVal::F(x.tanh()),
                        Intrinsic::Log => RVal::F(x.ln()),
                        Intrinsic::MaxNum => {
                            let y = fs.next().flatten().ok_or_else(|| mismatch(self, "maxnum"))?;
                            RVal::F(x.max(y))
                        }
                    }
                }
                Callee::Func(target) => {
                    let vals: Vec<RVal> = args.iter().map(|a| get(regs, *a)).collect();
                    self.call(*target, vals, depth + 1)?.unwrap_or(RVal::Undef)
                }
            },
        })
    }

    fn address(&self, f: &CFunc, bi: usize, at: usize, p: RVal) -> Result<(usize, usize), Diagnostic> {
        let RVal::P(bank, off) = p else {
            return Err(self.fault(f, bi, at, "type-mismatch", format!("memory access through {p:?}")));
        };
        let len = self.banks[bank as usize].len();
        if off < 0 || off as usize >= len {
            return Err(self.fault(
                f,
                bi,
                at,
                "out-of-bounds",
                format!("index {off} outside bank of {len} elements"),
            ));
        }
        Ok((bank as usize, off as usize))
    }
}

#[inline]
fn get(regs: &[RVal], o: COp) -> RVal {
    match o {
        COp::Slot(s) => regs[s as usize],
        COp::Const(v) => v,
    }
}
