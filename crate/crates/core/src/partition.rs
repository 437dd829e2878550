//! Splitting global arrays into independently accessible banks.

use std::fmt;
use std::str::FromStr;

use crate::diag::{Diagnostic, Location};
use crate::interp::{Bank, MemoryImage};
use crate::ir::rewrite::{split_block, NameGen};
use crate::ir::{BinOp, Block, Function, GlobalDef, Init, InstKind, Instruction, IntPred, IrModule, Operand, Type, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Block,
    Cyclic,
    Complete,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Block => "block",
            Scheme::Cyclic => "cyclic",
            Scheme::Complete => "complete",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionSpec {
    pub array: String,
    pub scheme: Scheme,
    /// Bank count; ignored by `Complete`.
    pub factor: u64,
    /// Partitioned dimension, 0 being the outermost.
    pub dim: usize,
}

impl PartitionSpec {
    pub fn new(array: impl Into<String>, scheme: Scheme, factor: u64) -> Self {
        PartitionSpec { array: array.into(), scheme, factor, dim: 0 }
    }

    pub fn complete(array: impl Into<String>) -> Self {
        PartitionSpec::new(array, Scheme::Complete, 0)
    }

    pub fn on_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }
}

fn spec_error(msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error("bad-partition-spec", Location::Module, msg)
}

/// `array:scheme[:factor=F][:dim=d]`
impl FromStr for PartitionSpec {
    type Err = Diagnostic;

    fn from_str(s: &str) -> Result<Self, Diagnostic> {
        let mut parts = s.split(':');
        let array = parts.next().filter(|a| !a.is_empty()).ok_or_else(|| spec_error(format!("`{s}`: missing array name")))?;
        let scheme = match parts.next() {
            Some("block") => Scheme::Block,
            Some("cyclic") => Scheme::Cyclic,
            Some("complete") => Scheme::Complete,
            other => return Err(spec_error(format!("`{s}`: unknown scheme {:?}", other.unwrap_or("")))),
        };
        let mut spec = PartitionSpec { array: array.trim_start_matches('@').to_string(), scheme, factor: 0, dim: 0 };
        let mut have_factor = false;
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| spec_error(format!("`{s}`: expected key=value, got `{p}`")))?;
            let n: u64 = v.parse().map_err(|_| spec_error(format!("`{s}`: `{v}` is not a count")))?;
            match k {
                "factor" => {
                    spec.factor = n;
                    have_factor = true;
                }
                "dim" => spec.dim = n as usize,
                _ => return Err(spec_error(format!("`{s}`: unknown key `{k}`"))),
            }
        }
        if scheme != Scheme::Complete && !have_factor {
            return Err(spec_error(format!("`{s}`: {scheme} partitioning needs factor=F")));
        }
        Ok(spec)
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.array, self.scheme)?;
        if self.scheme != Scheme::Complete {
            write!(f, ":factor={}", self.factor)?;
        }
        if self.dim != 0 {
            write!(f, ":dim={}", self.dim)?;
        }
        Ok(())
    }
}

/// The mapping from the original array to its banks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankLayout {
    pub array: String,
    pub scheme: Scheme,
    pub factor: u64,
    pub dim: usize,
    /// Dimensions of the original array, outermost first.
    pub dims: Vec<u64>,
    /// Size of the partitioned dimension.
    pub n: u64,
    /// ⌈n / factor⌉ for block partitioning, 1 otherwise.
    pub block: u64,
    /// Extent of the partitioned dimension in each bank.
    pub sizes: Vec<u64>,
    pub names: Vec<String>,
}

pub fn bank_name(array: &str, k: usize) -> String {
    format!("{array}_p{k}")
}

/// Computes the layout of `spec` over an array of type `ty`.
pub fn compute_layout(ty: &Type, spec: &PartitionSpec) -> Result<BankLayout, Diagnostic> {
    let loc = || Location::Global(spec.array.clone());
    let dims = ty.dims();
    if dims.is_empty() {
        return Err(Diagnostic::error("not-an-array", loc(), format!("@{} is not an array", spec.array)));
    }
    if spec.dim >= dims.len() {
        return Err(Diagnostic::error(
            "bad-dim",
            loc(),
            format!("dim {} out of range for a rank-{} array", spec.dim, dims.len()),
        ));
    }
    let n = dims[spec.dim];
    let (factor, block, sizes) = match spec.scheme {
        Scheme::Complete => (n, 1, vec![1; n as usize]),
        s => {
            if spec.factor < 2 {
                return Err(Diagnostic::error("bad-factor", loc(), format!("factor {} is below 2", spec.factor)));
            }
            if spec.factor > n {
                return Err(Diagnostic::error(
                    "factor-too-large",
                    loc(),
                    format!("factor {} exceeds dimension size {n}", spec.factor),
                ));
            }
            let f = spec.factor;
            if s == Scheme::Block {
                let b = n.div_ceil(f);
                // Trailing banks that would be empty are not materialized.
                let banks = n.div_ceil(b);
                (f, b, (0..banks).map(|k| b.min(n - k * b)).collect())
            } else {
                (f, 1, (0..f).map(|k| (n - k).div_ceil(f)).collect())
            }
        }
    };
    let names = (0..sizes.len()).map(|k| bank_name(&spec.array, k)).collect();
    Ok(BankLayout { array: spec.array.clone(), scheme: spec.scheme, factor, dim: spec.dim, dims, n, block, sizes, names })
}

impl BankLayout {
    pub fn banks(&self) -> usize {
        self.sizes.len()
    }

    /// (bank, local) of index `i` along the partitioned dimension.
    pub fn map(&self, i: u64) -> (usize, u64) {
        match self.scheme {
            Scheme::Block => ((i / self.block) as usize, i % self.block),
            Scheme::Cyclic => ((i % self.factor) as usize, i / self.factor),
            Scheme::Complete => (i as usize, 0),
        }
    }

    /// Inverse of [`map`](Self::map).
    pub fn unmap(&self, bank: usize, local: u64) -> u64 {
        match self.scheme {
            Scheme::Block => bank as u64 * self.block + local,
            Scheme::Cyclic => local * self.factor + bank as u64,
            Scheme::Complete => bank as u64,
        }
    }

    fn outer(&self) -> u64 {
        self.dims[..self.dim].iter().product()
    }

    fn inner(&self) -> u64 {
        self.dims[self.dim + 1..].iter().product()
    }

    /// (bank, flat offset in bank) of a flat offset in the original array.
    pub fn map_flat(&self, flat: u64) -> (usize, u64) {
        let inner = self.inner();
        let (rest, lo) = (flat / inner, flat % inner);
        let (outer, i) = (rest / self.n, rest % self.n);
        let (k, local) = self.map(i);
        (k, (outer * self.sizes[k] + local) * inner + lo)
    }

    pub fn bank_type(&self, k: usize, leaf: &Type) -> Type {
        let mut dims = self.dims.clone();
        dims[self.dim] = self.sizes[k];
        Type::nested_array(leaf.clone(), &dims)
    }

    pub fn bank_len(&self, k: usize) -> usize {
        (self.outer() * self.sizes[k] * self.inner()) as usize
    }
}

/// Splits one image bank into the banks of `layout`.
pub fn reslice_image(img: &MemoryImage, layout: &BankLayout) -> Result<MemoryImage, Diagnostic> {
    let mut out = img.clone();
    let orig = out.remove(&layout.array).ok_or_else(|| {
        Diagnostic::error("bad-image", Location::Global(layout.array.clone()), "image has no bank for the array")
    })?;
    let mut banks: Vec<Bank> = (0..layout.banks()).map(|k| Bank::zeros(orig.kind, layout.bank_len(k))).collect();
    for (flat, w) in orig.data.iter().enumerate() {
        let (k, off) = layout.map_flat(flat as u64);
        banks[k].data[off as usize] = *w;
    }
    for (name, b) in layout.names.iter().zip(banks) {
        out.insert(name, b);
    }
    Ok(out)
}

/// Reassembles the original array bank from partitioned banks.
pub fn gather_image(img: &MemoryImage, layout: &BankLayout) -> Result<MemoryImage, Diagnostic> {
    let mut out = img.clone();
    let mut banks = Vec::new();
    for name in &layout.names {
        banks.push(out.remove(name).ok_or_else(|| {
            Diagnostic::error("bad-image", Location::Global(name.clone()), "image is missing a partition bank")
        })?);
    }
    let total: u64 = layout.dims.iter().product();
    let mut data = Vec::with_capacity(total as usize);
    for flat in 0..total {
        let (k, off) = layout.map_flat(flat);
        data.push(banks[k].data[off as usize]);
    }
    out.insert(&layout.array, Bank { kind: banks[0].kind, data });
    Ok(out)
}

fn unsupported(f: &Function, bi: usize, ii: usize, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(
        "partition-unsupported-access",
        Location::Inst { function: f.name.clone(), block: f.blocks[bi].label.clone(), index: ii },
        msg,
    )
}

/// Replaces the global named by `spec` with its banks and rewrites every
/// access. Constant indices along the partitioned dimension address a bank
/// directly; dynamic ones go through a compare-and-branch ladder.
pub fn apply_partition(m: &IrModule, spec: &PartitionSpec) -> Result<(IrModule, BankLayout), Diagnostic> {
    let Some(gi) = m.globals.iter().position(|g| g.name == spec.array) else {
        let code = if m.global(&bank_name(&spec.array, 0)).is_some() { "already-partitioned" } else { "unknown-array" };
        return Err(Diagnostic::error(code, Location::Global(spec.array.clone()), format!("no global @{}", spec.array)));
    };
    let g = m.globals[gi].clone();
    let layout = compute_layout(&g.ty, spec)?;
    for name in &layout.names {
        if m.global(name).is_some() {
            return Err(Diagnostic::error(
                "already-partitioned",
                Location::Global(name.clone()),
                format!("@{name} already exists"),
            ));
        }
    }
    let leaf = g.ty.leaf().clone();
    let bank_globals = make_bank_globals(&g, &layout, &leaf);

    let mut out = m.clone();
    out.globals.splice(gi..=gi, bank_globals);
    for f in &mut out.functions {
        rewrite_function(f, &layout, &leaf)?;
    }
    Ok((out, layout))
}

fn make_bank_globals(g: &GlobalDef, layout: &BankLayout, leaf: &Type) -> Vec<GlobalDef> {
    let mut inits: Vec<Vec<Value>> = (0..layout.banks()).map(|k| Vec::with_capacity(layout.bank_len(k))).collect();
    if let Init::Values(vals) = &g.init {
        inits = (0..layout.banks()).map(|k| vec![Value::Int(0); layout.bank_len(k)]).collect();
        for (flat, v) in vals.iter().enumerate() {
            let (k, off) = layout.map_flat(flat as u64);
            inits[k][off as usize] = v.clone();
        }
    }
    inits
        .into_iter()
        .enumerate()
        .map(|(k, vals)| GlobalDef {
            name: layout.names[k].clone(),
            ty: layout.bank_type(k, leaf),
            init: if vals.is_empty() { Init::Zero } else { Init::Values(vals) },
            align: g.align,
            constant: g.constant,
        })
        .collect()
}

fn targets_array(op: &Operand, array: &str) -> bool {
    matches!(&op.value, Value::Global(n) if n == array)
}

fn rewrite_function(f: &mut Function, layout: &BankLayout, leaf: &Type) -> Result<(), Diagnostic> {
    let pos = layout.dim + 1;
    // Every use of the array must be the base of a gep that reaches the
    // partitioned dimension.
    let mut dynamic: Vec<String> = Vec::new();
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, inst) in b.insts.iter().enumerate() {
            let ops = inst.operands();
            if !ops.iter().any(|o| targets_array(o, &layout.array)) {
                continue;
            }
            let InstKind::Gep { base, indices, .. } = &inst.kind else {
                return Err(unsupported(f, bi, ii, format!("@{} used other than as a gep base", layout.array)));
            };
            if !targets_array(base, &layout.array) || ops.iter().filter(|o| targets_array(o, &layout.array)).count() > 1 {
                return Err(unsupported(f, bi, ii, format!("@{} used other than as a gep base", layout.array)));
            }
            if indices.len() <= pos || indices[0].const_int() != Some(0) {
                return Err(unsupported(f, bi, ii, "gep does not index the partitioned dimension"));
            }
            if indices[pos].const_int().is_none() {
                dynamic.push(inst.result.clone().expect("gep result"));
            }
        }
    }

    for b in &mut f.blocks {
        for inst in &mut b.insts {
            if let InstKind::Gep { base, indices, .. } = &mut inst.kind {
                if targets_array(base, &layout.array) {
                    if let Some(i) = indices[pos].const_int() {
                        let (k, local) = layout.map(i as u64);
                        let k = k.min(layout.banks() - 1);
                        *base = Operand::new(Type::ptr(layout.bank_type(k, leaf)), Value::Global(layout.names[k].clone()));
                        indices[pos] = Operand::new(indices[pos].ty.clone(), Value::Int(local as i64));
                    }
                }
            }
        }
    }

    let mut names = NameGen::for_function(f);
    for g in &dynamic {
        let gep = f.insts().find(|i| i.result.as_deref() == Some(g.as_str())).expect("gep").clone();
        while let Some((bi, ii)) = find_use(f, g) {
            let inst = &f.blocks[bi].insts[ii];
            if !inst.is_memory() || inst.memory_ptr().and_then(|p| p.value.as_local()) != Some(g.as_str()) {
                return Err(unsupported(f, bi, ii, format!("dynamic gep %{g} feeds something other than a load or store")));
            }
            if matches!(&inst.kind, InstKind::Store { value, .. } if value.value.as_local() == Some(g.as_str())) {
                return Err(unsupported(f, bi, ii, format!("dynamic gep %{g} is stored as a value")));
            }
            ladder(f, bi, ii, &gep, layout, leaf, &mut names);
        }
        for b in &mut f.blocks {
            b.insts.retain(|i| i.result.as_deref() != Some(g.as_str()));
        }
    }
    Ok(())
}

fn find_use(f: &Function, name: &str) -> Option<(usize, usize)> {
    f.blocks.iter().enumerate().find_map(|(bi, b)| {
        b.insts
            .iter()
            .position(|i| i.operands().iter().any(|o| o.value.as_local() == Some(name)))
            .map(|ii| (bi, ii))
    })
}

/// Rewrites the memory access at (`bi`, `ii`) through `gep` into a branch
/// ladder that selects the bank at run time.
fn ladder(
    f: &mut Function,
    bi: usize,
    ii: usize,
    gep: &Instruction,
    layout: &BankLayout,
    leaf: &Type,
    names: &mut NameGen,
) {
    let InstKind::Gep { inbounds, indices, .. } = &gep.kind else { unreachable!("gep") };
    let pos = layout.dim + 1;
    let idx = indices[pos].clone();
    let ity = idx.ty.clone();
    let access = f.blocks[bi].insts[ii].clone();

    let mut pre: Vec<Instruction> = Vec::new();
    let mut arith = |op: BinOp, c: u64, hint: &str, pre: &mut Vec<Instruction>| {
        let r = names.fresh(hint, "");
        let lhs = idx.clone();
        pre.push(Instruction::new(Some(r.clone()), InstKind::Binary { op, lhs, rhs: Operand::int(ity.clone(), c as i64) }));
        Operand::local(ity.clone(), r)
    };
    let (bank, local) = match layout.scheme {
        Scheme::Block => {
            let b = arith(BinOp::SDiv, layout.block, "bank", &mut pre);
            (b, arith(BinOp::SRem, layout.block, "local", &mut pre))
        }
        Scheme::Cyclic => {
            let b = arith(BinOp::SRem, layout.factor, "bank", &mut pre);
            (b, arith(BinOp::SDiv, layout.factor, "local", &mut pre))
        }
        Scheme::Complete => (idx.clone(), Operand::int(ity.clone(), 0)),
    };

    let join = split_block(f, bi, ii, names);
    f.blocks[join].insts.remove(0);
    let head_label = f.blocks[bi].label.clone();
    let join_label = f.blocks[join].label.clone();
    f.blocks[bi].insts.extend(pre);

    let n = layout.banks();
    let arm_labels: Vec<String> = (0..n).map(|k| names.fresh(&format!("{head_label}.bank{k}"), "")).collect();
    let test_labels: Vec<String> = (0..n - 1).map(|k| if k == 0 { head_label.clone() } else { names.fresh(&format!("{head_label}.sel{k}"), "") }).collect();

    let mut new_blocks: Vec<Block> = Vec::new();
    let mut incoming: Vec<(Operand, String)> = Vec::new();
    for k in 0..n - 1 {
        let c = names.fresh("is.bank", "");
        let test = [
            Instruction::new(
                Some(c.clone()),
                InstKind::Icmp { pred: IntPred::Eq, lhs: bank.clone(), rhs: Operand::int(ity.clone(), k as i64) },
            ),
            Instruction::new(
                None,
                InstKind::CondBr {
                    cond: Operand::local(Type::i1(), c),
                    if_true: arm_labels[k].clone(),
                    if_false: if k + 2 < n { test_labels[k + 1].clone() } else { arm_labels[n - 1].clone() },
                },
            ),
        ];
        if k == 0 {
            f.blocks[bi].insts.extend(test);
        } else {
            new_blocks.push(Block { label: test_labels[k].clone(), insts: test.to_vec() });
        }
    }
    for (k, arm) in arm_labels.iter().enumerate().take(n) {
        let bank_ty = layout.bank_type(k, leaf);
        let mut idxs = indices.clone();
        idxs[pos] = local.clone();
        let p = names.fresh(&format!("{}.addr", layout.names[k]), "");
        let ptr_ty = crate::ir::gep_result_type(&Type::ptr(bank_ty.clone()), idxs.len()).expect("bank gep");
        let mut insts = vec![Instruction::new(
            Some(p.clone()),
            InstKind::Gep {
                inbounds: *inbounds,
                base: Operand::new(Type::ptr(bank_ty), Value::Global(layout.names[k].clone())),
                indices: idxs,
            },
        )];
        let ptr = Operand::local(ptr_ty, p);
        match &access.kind {
            InstKind::Load { volatile, align, .. } => {
                let v = names.fresh(access.result.as_deref().unwrap_or("val"), "b");
                insts.push(Instruction::new(Some(v.clone()), InstKind::Load { volatile: *volatile, ptr, align: *align }));
                incoming.push((Operand::local(access.result_type(), v), arm.clone()));
            }
            InstKind::Store { volatile, value, align, .. } => {
                insts.push(Instruction::new(
                    None,
                    InstKind::Store { volatile: *volatile, value: value.clone(), ptr, align: *align },
                ));
            }
            _ => unreachable!("memory access"),
        }
        insts.push(Instruction::new(None, InstKind::Br { target: join_label.clone() }));
        new_blocks.push(Block { label: arm.clone(), insts });
    }
    if let Some(r) = &access.result {
        f.blocks[join].insts.insert(0, Instruction::new(Some(r.clone()), InstKind::Phi { ty: access.result_type(), incoming }));
    }
    f.blocks.splice(bi + 1..bi + 1, new_blocks);
}
