//! The LF-IR dialect: a typed SSA language whose text form is the subset of
//! LLVM assembly produced by an ahead-of-time tensor compiler.
//!
//! Modules are plain data. Passes take an [`IrModule`] by reference and
//! return a new one, or mutate one they own exclusively.

pub mod builder;
pub mod cfg;
mod lexer;
mod parser;
mod printer;
pub mod rewrite;
mod validate;

use std::fmt;

pub use parser::{normalize_int, parse_module, Parsed, SourceMap};
pub use printer::{print_module, print_module_with, Syntax};
pub use validate::validate;

/// Intrinsics a module may call without defining them.
pub const INTRINSICS: &[&str] = &["expf", "tanhf", "logf", "llvm.maxnum.f32"];

pub fn is_intrinsic(name: &str) -> bool {
    INTRINSICS.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    /// Integer of the given bit width (1, 8, 32 or 64). `i8` only appears
    /// behind pointers as an untyped buffer.
    Int(u32),
    Float,
    Array(Box<Type>, u64),
    Ptr(Box<Type>),
    /// Parsed so legality checking can reject it; no pass produces one.
    Vector(Box<Type>, u32),
    Void,
}

impl Type {
    pub fn i1() -> Type {
        Type::Int(1)
    }
    pub fn i32() -> Type {
        Type::Int(32)
    }
    pub fn i64() -> Type {
        Type::Int(64)
    }
    pub fn ptr(to: Type) -> Type {
        Type::Ptr(Box::new(to))
    }
    pub fn array(elem: Type, len: u64) -> Type {
        Type::Array(Box::new(elem), len)
    }

    /// Row-major nested array type with the given dimensions.
    pub fn nested_array(elem: Type, dims: &[u64]) -> Type {
        dims.iter().rev().fold(elem, |t, &d| Type::array(t, d))
    }

    pub fn is_int(&self) -> bool {
        matches!(self, Type::Int(_))
    }

    pub fn is_float(&self) -> bool {
        matches!(self, Type::Float)
    }

    pub fn is_ptr(&self) -> bool {
        matches!(self, Type::Ptr(_))
    }

    pub fn pointee(&self) -> Option<&Type> {
        match self {
            Type::Ptr(t) => Some(t),
            _ => None,
        }
    }

    pub fn contains_vector(&self) -> bool {
        match self {
            Type::Vector(..) => true,
            Type::Array(e, _) | Type::Ptr(e) => e.contains_vector(),
            _ => false,
        }
    }

    /// Element type after peeling vectors (used for element-wise typing).
    pub fn scalar_of(&self) -> &Type {
        match self {
            Type::Vector(e, _) => e.scalar_of(),
            t => t,
        }
    }

    /// Number of scalar elements in a row-major flattening.
    pub fn flat_len(&self) -> u64 {
        match self {
            Type::Array(e, n) => n * e.flat_len(),
            Type::Vector(e, n) => u64::from(*n) * e.flat_len(),
            _ => 1,
        }
    }

    /// Innermost non-array type.
    pub fn leaf(&self) -> &Type {
        match self {
            Type::Array(e, _) => e.leaf(),
            t => t,
        }
    }

    /// Array dimensions, outermost first.
    pub fn dims(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut t = self;
        while let Type::Array(e, n) = t {
            out.push(*n);
            t = e;
        }
        out
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int(w) => write!(f, "i{w}"),
            Type::Float => f.write_str("float"),
            Type::Array(e, n) => write!(f, "[{n} x {e}]"),
            Type::Ptr(e) => write!(f, "{e}*"),
            Type::Vector(e, n) => write!(f, "<{n} x {e}>"),
            Type::Void => f.write_str("void"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Local(String),
    Global(String),
    /// Integer constant, sign-extended to 64 bits.
    Int(i64),
    /// `float` constant stored as its IEEE-754 bit pattern so equality is exact.
    Float(u32),
}

impl Value {
    pub fn float(v: f32) -> Value {
        Value::Float(v.to_bits())
    }

    pub fn as_local(&self) -> Option<&str> {
        match self {
            Value::Local(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Float(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Operand {
    pub ty: Type,
    pub value: Value,
}

impl Operand {
    pub fn new(ty: Type, value: Value) -> Self {
        Operand { ty, value }
    }
    pub fn local(ty: Type, name: impl Into<String>) -> Self {
        Operand { ty, value: Value::Local(name.into()) }
    }
    pub fn global(ty: Type, name: impl Into<String>) -> Self {
        Operand { ty, value: Value::Global(name.into()) }
    }
    pub fn int(ty: Type, v: i64) -> Self {
        Operand { ty, value: Value::Int(v) }
    }
    pub fn i64(v: i64) -> Self {
        Operand::int(Type::i64(), v)
    }
    pub fn f32(v: f32) -> Self {
        Operand { ty: Type::Float, value: Value::float(v) }
    }
    pub fn bool(v: bool) -> Self {
        Operand::int(Type::i1(), i64::from(v))
    }

    pub fn const_int(&self) -> Option<i64> {
        match self.value {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn const_f32(&self) -> Option<f32> {
        match self.value {
            Value::Float(b) => Some(f32::from_bits(b)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    SDiv,
    SRem,
    FAdd,
    FSub,
    FMul,
    FDiv,
}

impl BinOp {
    pub const ALL: [BinOp; 9] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::SDiv,
        BinOp::SRem,
        BinOp::FAdd,
        BinOp::FSub,
        BinOp::FMul,
        BinOp::FDiv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::SDiv => "sdiv",
            BinOp::SRem => "srem",
            BinOp::FAdd => "fadd",
            BinOp::FSub => "fsub",
            BinOp::FMul => "fmul",
            BinOp::FDiv => "fdiv",
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, BinOp::FAdd | BinOp::FSub | BinOp::FMul | BinOp::FDiv)
    }

    pub fn from_name(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CastOp {
    Bitcast,
    ZExt,
    SExt,
    Trunc,
    SiToFp,
    FpToSi,
}

impl CastOp {
    pub const ALL: [CastOp; 6] =
        [CastOp::Bitcast, CastOp::ZExt, CastOp::SExt, CastOp::Trunc, CastOp::SiToFp, CastOp::FpToSi];

    pub fn name(self) -> &'static str {
        match self {
            CastOp::Bitcast => "bitcast",
            CastOp::ZExt => "zext",
            CastOp::SExt => "sext",
            CastOp::Trunc => "trunc",
            CastOp::SiToFp => "sitofp",
            CastOp::FpToSi => "fptosi",
        }
    }

    pub fn from_name(s: &str) -> Option<CastOp> {
        CastOp::ALL.into_iter().find(|op| op.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntPred {
    Eq,
    Ne,
    Slt,
    Sle,
    Sgt,
    Sge,
    Ult,
    Ule,
    Ugt,
    Uge,
}

impl IntPred {
    pub const ALL: [IntPred; 10] = [
        IntPred::Eq,
        IntPred::Ne,
        IntPred::Slt,
        IntPred::Sle,
        IntPred::Sgt,
        IntPred::Sge,
        IntPred::Ult,
        IntPred::Ule,
        IntPred::Ugt,
        IntPred::Uge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntPred::Eq => "eq",
            IntPred::Ne => "ne",
            IntPred::Slt => "slt",
            IntPred::Sle => "sle",
            IntPred::Sgt => "sgt",
            IntPred::Sge => "sge",
            IntPred::Ult => "ult",
            IntPred::Ule => "ule",
            IntPred::Ugt => "ugt",
            IntPred::Uge => "uge",
        }
    }

    pub fn from_name(s: &str) -> Option<IntPred> {
        IntPred::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Evaluates the predicate on values already normalized to `width` bits
    /// (sign-extended into `i64`).
    pub fn eval(self, a: i64, b: i64, width: u32) -> bool {
        let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
        let (ua, ub) = (a as u64 & mask, b as u64 & mask);
        match self {
            IntPred::Eq => a == b,
            IntPred::Ne => a != b,
            IntPred::Slt => a < b,
            IntPred::Sle => a <= b,
            IntPred::Sgt => a > b,
            IntPred::Sge => a >= b,
            IntPred::Ult => ua < ub,
            IntPred::Ule => ua <= ub,
            IntPred::Ugt => ua > ub,
            IntPred::Uge => ua >= ub,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FloatPred {
    False,
    Oeq,
    Ogt,
    Oge,
    Olt,
    Ole,
    One,
    Ord,
    Ueq,
    Ugt,
    Uge,
    Ult,
    Ule,
    Une,
    Uno,
    True,
}

impl FloatPred {
    pub const ALL: [FloatPred; 16] = [
        FloatPred::False,
        FloatPred::Oeq,
        FloatPred::Ogt,
        FloatPred::Oge,
        FloatPred::Olt,
        FloatPred::Ole,
        FloatPred::One,
        FloatPred::Ord,
        FloatPred::Ueq,
        FloatPred::Ugt,
        FloatPred::Uge,
        FloatPred::Ult,
        FloatPred::Ule,
        FloatPred::Une,
        FloatPred::Uno,
        FloatPred::True,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FloatPred::False => "false",
            FloatPred::Oeq => "oeq",
            FloatPred::Ogt => "ogt",
            FloatPred::Oge => "oge",
            FloatPred::Olt => "olt",
            FloatPred::Ole => "ole",
            FloatPred::One => "one",
            FloatPred::Ord => "ord",
            FloatPred::Ueq => "ueq",
            FloatPred::Ugt => "ugt",
            FloatPred::Uge => "uge",
            FloatPred::Ult => "ult",
            FloatPred::Ule => "ule",
            FloatPred::Une => "une",
            FloatPred::Uno => "uno",
            FloatPred::True => "true",
        }
    }

    pub fn from_name(s: &str) -> Option<FloatPred> {
        FloatPred::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn eval(self, a: f32, b: f32) -> bool {
        let unordered = a.is_nan() || b.is_nan();
        match self {
            FloatPred::False => false,
            FloatPred::True => true,
            FloatPred::Ord => !unordered,
            FloatPred::Uno => unordered,
            FloatPred::Oeq => !unordered && a == b,
            FloatPred::Ogt => !unordered && a > b,
            FloatPred::Oge => !unordered && a >= b,
            FloatPred::Olt => !unordered && a < b,
            FloatPred::Ole => !unordered && a <= b,
            FloatPred::One => !unordered && a != b,
            FloatPred::Ueq => unordered || a == b,
            FloatPred::Ugt => unordered || a > b,
            FloatPred::Uge => unordered || a >= b,
            FloatPred::Ult => unordered || a < b,
            FloatPred::Ule => unordered || a <= b,
            FloatPred::Une => unordered || a != b,
        }
    }
}

/// The closed opcode set of the dialect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    Gep,
    Load,
    Store,
    Bitcast,
    Add,
    Sub,
    Mul,
    SDiv,
    SRem,
    FAdd,
    FSub,
    FMul,
    FDiv,
    Icmp,
    Fcmp,
    Select,
    Phi,
    Br,
    Ret,
    Call,
    ZExt,
    SExt,
    Trunc,
    SiToFp,
    FpToSi,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InstKind {
    Gep { inbounds: bool, base: Operand, indices: Vec<Operand> },
    Load { volatile: bool, ptr: Operand, align: Option<u32> },
    Store { volatile: bool, value: Operand, ptr: Operand, align: Option<u32> },
    Cast { op: CastOp, value: Operand, to: Type },
    Binary { op: BinOp, lhs: Operand, rhs: Operand },
    Icmp { pred: IntPred, lhs: Operand, rhs: Operand },
    Fcmp { pred: FloatPred, lhs: Operand, rhs: Operand },
    Select { cond: Operand, on_true: Operand, on_false: Operand },
    /// Incoming operands carry the phi's type.
    Phi { ty: Type, incoming: Vec<(Operand, String)> },
    Br { target: String },
    CondBr { cond: Operand, if_true: String, if_false: String },
    Ret { value: Option<Operand> },
    Call { ret: Type, callee: String, args: Vec<Operand> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub result: Option<String>,
    pub kind: InstKind,
}

impl Instruction {
    pub fn new(result: Option<String>, kind: InstKind) -> Self {
        Instruction { result, kind }
    }

    pub fn opcode(&self) -> Opcode {
        match &self.kind {
            InstKind::Gep { .. } => Opcode::Gep,
            InstKind::Load { .. } => Opcode::Load,
            InstKind::Store { .. } => Opcode::Store,
            InstKind::Cast { op, .. } => match op {
                CastOp::Bitcast => Opcode::Bitcast,
                CastOp::ZExt => Opcode::ZExt,
                CastOp::SExt => Opcode::SExt,
                CastOp::Trunc => Opcode::Trunc,
                CastOp::SiToFp => Opcode::SiToFp,
                CastOp::FpToSi => Opcode::FpToSi,
            },
            InstKind::Binary { op, .. } => match op {
                BinOp::Add => Opcode::Add,
                BinOp::Sub => Opcode::Sub,
                BinOp::Mul => Opcode::Mul,
                BinOp::SDiv => Opcode::SDiv,
                BinOp::SRem => Opcode::SRem,
                BinOp::FAdd => Opcode::FAdd,
                BinOp::FSub => Opcode::FSub,
                BinOp::FMul => Opcode::FMul,
                BinOp::FDiv => Opcode::FDiv,
            },
            InstKind::Icmp { .. } => Opcode::Icmp,
            InstKind::Fcmp { .. } => Opcode::Fcmp,
            InstKind::Select { .. } => Opcode::Select,
            InstKind::Phi { .. } => Opcode::Phi,
            InstKind::Br { .. } | InstKind::CondBr { .. } => Opcode::Br,
            InstKind::Ret { .. } => Opcode::Ret,
            InstKind::Call { .. } => Opcode::Call,
        }
    }

    pub fn is_terminator(&self) -> bool {
        matches!(self.kind, InstKind::Br { .. } | InstKind::CondBr { .. } | InstKind::Ret { .. })
    }

    pub fn is_phi(&self) -> bool {
        matches!(self.kind, InstKind::Phi { .. })
    }

    pub fn is_volatile(&self) -> bool {
        matches!(self.kind, InstKind::Load { volatile: true, .. } | InstKind::Store { volatile: true, .. })
    }

    pub fn is_memory(&self) -> bool {
        matches!(self.kind, InstKind::Load { .. } | InstKind::Store { .. })
    }

    /// The pointer operand of a load or store.
    pub fn memory_ptr(&self) -> Option<&Operand> {
        match &self.kind {
            InstKind::Load { ptr, .. } | InstKind::Store { ptr, .. } => Some(ptr),
            _ => None,
        }
    }

    /// Static result type, given the operand annotations.
    pub fn result_type(&self) -> Type {
        match &self.kind {
            InstKind::Gep { base, indices, .. } => {
                gep_result_type(&base.ty, indices.len()).unwrap_or(Type::Void)
            }
            InstKind::Load { ptr, .. } => ptr.ty.pointee().cloned().unwrap_or(Type::Void),
            InstKind::Store { .. } | InstKind::Br { .. } | InstKind::CondBr { .. } | InstKind::Ret { .. } => {
                Type::Void
            }
            InstKind::Cast { to, .. } => to.clone(),
            InstKind::Binary { lhs, .. } => lhs.ty.clone(),
            InstKind::Icmp { lhs, .. } | InstKind::Fcmp { lhs, .. } => match &lhs.ty {
                Type::Vector(_, n) => Type::Vector(Box::new(Type::i1()), *n),
                _ => Type::i1(),
            },
            InstKind::Select { on_true, .. } => on_true.ty.clone(),
            InstKind::Phi { ty, .. } => ty.clone(),
            InstKind::Call { ret, .. } => ret.clone(),
        }
    }

    /// All value operands, in textual order. Phi incoming values are included;
    /// branch labels are not.
    pub fn operands(&self) -> Vec<&Operand> {
        match &self.kind {
            InstKind::Gep { base, indices, .. } => std::iter::once(base).chain(indices.iter()).collect(),
            InstKind::Load { ptr, .. } => vec![ptr],
            InstKind::Store { value, ptr, .. } => vec![value, ptr],
            InstKind::Cast { value, .. } => vec![value],
            InstKind::Binary { lhs, rhs, .. } | InstKind::Icmp { lhs, rhs, .. } | InstKind::Fcmp { lhs, rhs, .. } => {
                vec![lhs, rhs]
            }
            InstKind::Select { cond, on_true, on_false } => vec![cond, on_true, on_false],
            InstKind::Phi { incoming, .. } => incoming.iter().map(|(v, _)| v).collect(),
            InstKind::Br { .. } => vec![],
            InstKind::CondBr { cond, .. } => vec![cond],
            InstKind::Ret { value } => value.iter().collect(),
            InstKind::Call { args, .. } => args.iter().collect(),
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        match &mut self.kind {
            InstKind::Gep { base, indices, .. } => std::iter::once(base).chain(indices.iter_mut()).collect(),
            InstKind::Load { ptr, .. } => vec![ptr],
            InstKind::Store { value, ptr, .. } => vec![value, ptr],
            InstKind::Cast { value, .. } => vec![value],
            InstKind::Binary { lhs, rhs, .. } | InstKind::Icmp { lhs, rhs, .. } | InstKind::Fcmp { lhs, rhs, .. } => {
                vec![lhs, rhs]
            }
            InstKind::Select { cond, on_true, on_false } => vec![cond, on_true, on_false],
            InstKind::Phi { incoming, .. } => incoming.iter_mut().map(|(v, _)| v).collect(),
            InstKind::Br { .. } => vec![],
            InstKind::CondBr { cond, .. } => vec![cond],
            InstKind::Ret { value } => value.iter_mut().collect(),
            InstKind::Call { args, .. } => args.iter_mut().collect(),
        }
    }

    /// Successor labels of a terminator.
    pub fn successors(&self) -> Vec<&str> {
        match &self.kind {
            InstKind::Br { target } => vec![target.as_str()],
            InstKind::CondBr { if_true, if_false, .. } => vec![if_true.as_str(), if_false.as_str()],
            _ => vec![],
        }
    }

    pub fn successors_mut(&mut self) -> Vec<&mut String> {
        match &mut self.kind {
            InstKind::Br { target } => vec![target],
            InstKind::CondBr { if_true, if_false, .. } => vec![if_true, if_false],
            _ => vec![],
        }
    }

    /// Whether removing this instruction (when its result is unused) could
    /// change observable behaviour.
    pub fn has_side_effects(&self) -> bool {
        match &self.kind {
            InstKind::Store { .. } => true,
            InstKind::Load { volatile, .. } => *volatile,
            InstKind::Call { callee, .. } => !is_intrinsic(callee),
            _ => self.is_terminator(),
        }
    }
}

impl Instruction {
    /// Element offset from the base pointer of a gep whose indices are all
    /// constant, counted in scalar elements of the row-major flattening.
    pub fn gep_flat_offset(&self) -> Option<i64> {
        let InstKind::Gep { base, indices, .. } = &self.kind else { return None };
        let mut t = base.ty.pointee()?;
        let mut off = indices.first()?.const_int()? * t.flat_len() as i64;
        for idx in &indices[1..] {
            t = match t {
                Type::Array(e, _) | Type::Vector(e, _) => e,
                _ => return None,
            };
            off += idx.const_int()? * t.flat_len() as i64;
        }
        Some(off)
    }
}

/// Result type of a gep over `base` with `n` indices, if well formed.
pub fn gep_result_type(base: &Type, n: usize) -> Option<Type> {
    let mut t = base.pointee()?;
    for _ in 1..n {
        t = match t {
            Type::Array(e, _) | Type::Vector(e, _) => e,
            _ => return None,
        };
    }
    Some(Type::ptr(t.clone()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub label: String,
    pub insts: Vec<Instruction>,
}

impl Block {
    pub fn new(label: impl Into<String>) -> Self {
        Block { label: label.into(), insts: Vec::new() }
    }

    pub fn terminator(&self) -> Option<&Instruction> {
        self.insts.last().filter(|i| i.is_terminator())
    }

    pub fn terminator_mut(&mut self) -> Option<&mut Instruction> {
        self.insts.last_mut().filter(|i| i.is_terminator())
    }

    pub fn successors(&self) -> Vec<&str> {
        self.terminator().map(Instruction::successors).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Function {
    pub name: String,
    pub ret: Type,
    pub params: Vec<Param>,
    pub blocks: Vec<Block>,
}

impl Function {
    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn inst_count(&self) -> usize {
        self.blocks.iter().map(|b| b.insts.len()).sum()
    }

    pub fn insts(&self) -> impl Iterator<Item = &Instruction> {
        self.blocks.iter().flat_map(|b| b.insts.iter())
    }
}

/// Global initializer. Explicit values are stored flattened row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Init {
    Zero,
    Values(Vec<Value>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlobalDef {
    pub name: String,
    pub ty: Type,
    pub init: Init,
    pub align: Option<u32>,
    pub constant: bool,
}

impl GlobalDef {
    pub fn zeroed(name: impl Into<String>, ty: Type, align: Option<u32>) -> Self {
        GlobalDef { name: name.into(), ty, init: Init::Zero, align, constant: false }
    }
}

/// An external function declaration (`declare`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Declaration {
    pub name: String,
    pub ret: Type,
    pub params: Vec<Type>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IrModule {
    pub globals: Vec<GlobalDef>,
    pub declarations: Vec<Declaration>,
    pub functions: Vec<Function>,
    /// Top-level lines that were accepted and ignored (target triple,
    /// metadata, attribute groups). Never printed.
    pub metadata: Vec<String>,
}

impl IrModule {
    pub fn global(&self, name: &str) -> Option<&GlobalDef> {
        self.globals.iter().find(|g| g.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut Function> {
        self.functions.iter_mut().find(|f| f.name == name)
    }

    pub fn declaration(&self, name: &str) -> Option<&Declaration> {
        self.declarations.iter().find(|d| d.name == name)
    }

    /// The designated entry function: `@main` when present, otherwise the
    /// first defined function.
    pub fn entry_name(&self) -> Option<&str> {
        self.function("main").or_else(|| self.functions.first()).map(|f| f.name.as_str())
    }

    pub fn inst_count(&self) -> usize {
        self.functions.iter().map(Function::inst_count).sum()
    }

    /// Equality of globals, declarations and functions; ignores the
    /// metadata residue.
    pub fn structurally_eq(&self, other: &IrModule) -> bool {
        self.globals == other.globals && self.declarations == other.declarations && self.functions == other.functions
    }
}
