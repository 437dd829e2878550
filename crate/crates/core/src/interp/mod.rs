//! Reference interpreter and the memory-image interface.
//!
//! A [`MemoryImage`] maps global names to flat, row-major banks of typed
//! words. [`run`] executes a module's entry function against an image and
//! returns the updated image together with the control-flow trace that
//! drives cycle counting.

mod compare;
mod exec;
pub mod mif;

use std::collections::BTreeMap;
use std::fmt;

use crate::diag::{Diagnostic, Location};
use crate::ir::{Init, IrModule, Type, Value};

pub use compare::{compare_images, CompareReport, Mismatch};
pub use exec::{run, run_entry, ExecTrace, DEFAULT_FUEL};

/// Tolerances for "very close" outputs.
pub const REL_TOL: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-7;

/// Scalar element kind of a bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    I1,
    I32,
    I64,
    F32,
}

impl ScalarKind {
    /// Element kind of a (possibly nested) array or scalar type.
    pub fn of(ty: &Type) -> Option<ScalarKind> {
        match ty.leaf() {
            Type::Int(1) => Some(ScalarKind::I1),
            Type::Int(32) => Some(ScalarKind::I32),
            Type::Int(64) => Some(ScalarKind::I64),
            Type::Float => Some(ScalarKind::F32),
            _ => None,
        }
    }

    pub fn width(self) -> u32 {
        match self {
            ScalarKind::I1 => 1,
            ScalarKind::I32 | ScalarKind::F32 => 32,
            ScalarKind::I64 => 64,
        }
    }

    pub fn zero(self) -> Word {
        match self {
            ScalarKind::I1 => Word::I1(false),
            ScalarKind::I32 => Word::I32(0),
            ScalarKind::I64 => Word::I64(0),
            ScalarKind::F32 => Word::F32(0.0),
        }
    }

    /// Decodes a raw bit pattern (low `width` bits).
    pub fn from_bits(self, bits: u64) -> Word {
        match self {
            ScalarKind::I1 => Word::I1(bits & 1 != 0),
            ScalarKind::I32 => Word::I32(bits as u32 as i32),
            ScalarKind::I64 => Word::I64(bits as i64),
            ScalarKind::F32 => Word::F32(f32::from_bits(bits as u32)),
        }
    }
}

/// A typed memory word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Word {
    I1(bool),
    I32(i32),
    I64(i64),
    F32(f32),
}

impl Word {
    pub fn kind(self) -> ScalarKind {
        match self {
            Word::I1(_) => ScalarKind::I1,
            Word::I32(_) => ScalarKind::I32,
            Word::I64(_) => ScalarKind::I64,
            Word::F32(_) => ScalarKind::F32,
        }
    }

    pub fn to_bits(self) -> u64 {
        match self {
            Word::I1(b) => u64::from(b),
            Word::I32(v) => u64::from(v as u32),
            Word::I64(v) => v as u64,
            Word::F32(v) => u64::from(v.to_bits()),
        }
    }

    pub fn as_f32(self) -> Option<f32> {
        match self {
            Word::F32(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Word::I1(b) => write!(f, "{b}"),
            Word::I32(v) => write!(f, "{v}"),
            Word::I64(v) => write!(f, "{v}"),
            Word::F32(v) => write!(f, "{v:e}"),
        }
    }
}

/// One memory: a flat vector of words of a single kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Bank {
    pub kind: ScalarKind,
    pub data: Vec<Word>,
}

impl Bank {
    pub fn zeros(kind: ScalarKind, len: usize) -> Bank {
        Bank { kind, data: vec![kind.zero(); len] }
    }

    pub fn from_f32(values: &[f32]) -> Bank {
        Bank { kind: ScalarKind::F32, data: values.iter().map(|&v| Word::F32(v)).collect() }
    }

    pub fn from_bits(kind: ScalarKind, bits: &[u64]) -> Bank {
        Bank { kind, data: bits.iter().map(|&b| kind.from_bits(b)).collect() }
    }

    pub fn to_bits(&self) -> Vec<u64> {
        self.data.iter().map(|w| w.to_bits()).collect()
    }

    /// Float contents; non-float words read as NaN.
    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|w| w.as_f32().unwrap_or(f32::NAN)).collect()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Named banks, one per global.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryImage {
    banks: BTreeMap<String, Bank>,
}

impl MemoryImage {
    pub fn new() -> MemoryImage {
        MemoryImage::default()
    }

    /// The image a module starts from: every global at its initializer.
    pub fn from_module(m: &IrModule) -> Result<MemoryImage, Diagnostic> {
        let mut img = MemoryImage::new();
        for g in &m.globals {
            img.insert(&g.name, initial_bank(&g.ty, &g.init, &g.name)?);
        }
        Ok(img)
    }

    pub fn insert(&mut self, name: &str, bank: Bank) {
        self.banks.insert(name.to_string(), bank);
    }

    pub fn get(&self, name: &str) -> Option<&Bank> {
        self.banks.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Bank> {
        self.banks.get_mut(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Bank> {
        self.banks.remove(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.banks.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Bank)> {
        self.banks.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.banks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.banks.is_empty()
    }

    /// The sub-image holding only the named banks (missing names skipped).
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> MemoryImage {
        let mut out = MemoryImage::new();
        for n in names {
            if let Some(b) = self.get(n.as_ref()) {
                out.insert(n.as_ref(), b.clone());
            }
        }
        out
    }
}

pub(crate) fn initial_bank(ty: &Type, init: &Init, name: &str) -> Result<Bank, Diagnostic> {
    let kind = ScalarKind::of(ty).ok_or_else(|| {
        Diagnostic::error("bad-image", Location::Global(name.into()), format!("global of type {ty} has no memory form"))
    })?;
    let len = ty.flat_len() as usize;
    let mut bank = Bank::zeros(kind, len);
    if let Init::Values(vals) = init {
        for (slot, v) in bank.data.iter_mut().zip(vals) {
            *slot = match (kind, v) {
                (ScalarKind::F32, Value::Float(b)) => Word::F32(f32::from_bits(*b)),
                (ScalarKind::I1, Value::Int(i)) => Word::I1(*i != 0),
                (ScalarKind::I32, Value::Int(i)) => Word::I32(*i as i32),
                (ScalarKind::I64, Value::Int(i)) => Word::I64(*i),
                _ => {
                    return Err(Diagnostic::error(
                        "bad-image",
                        Location::Global(name.into()),
                        "initializer does not match element type",
                    ))
                }
            };
        }
    }
    Ok(bank)
}
