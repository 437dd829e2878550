//! Recursive-descent parser for the textual dialect.
//!
//! Accepts both the legacy operand spelling (`load float* %p`,
//! `getelementptr [2 x float]* %a, ...`) and the modern one
//! (`load float, float* %p`, `getelementptr [2 x float], [2 x float]* %a, ...`)
//! and normalizes them to the same instruction. Function attributes,
//! metadata nodes and metadata attachments are accepted and dropped with a
//! warning.

use std::collections::HashMap;

use super::lexer::{lex, Tok, Token};
use super::*;
use crate::diag::{Diagnostic, Diagnostics, Location};

/// A successfully parsed module with its non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub module: IrModule,
    pub warnings: Diagnostics,
    pub source_map: SourceMap,
}

/// Source line numbers for module entities, for `file:line` reporting.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    insts: HashMap<(String, String, usize), usize>,
    blocks: HashMap<(String, String), usize>,
    functions: HashMap<String, usize>,
    globals: HashMap<String, usize>,
}

impl SourceMap {
    pub fn line_of(&self, loc: &Location) -> Option<usize> {
        match loc {
            Location::Module => None,
            Location::Source { line, .. } => Some(*line),
            Location::Global(g) => self.globals.get(g).copied(),
            Location::Function(f) => self.functions.get(f).copied(),
            Location::Block { function, block } => self.blocks.get(&(function.clone(), block.clone())).copied(),
            Location::Inst { function, block, index } => {
                self.insts.get(&(function.clone(), block.clone(), *index)).copied()
            }
        }
    }
}

/// Parses and validates a module. On failure the returned diagnostics
/// contain at least one error.
pub fn parse_module(text: &str) -> Result<Parsed, Diagnostics> {
    let tokens = lex(text).map_err(Diagnostics::from)?;
    let mut p = Parser { toks: tokens, pos: 0, warnings: Diagnostics::new(), map: SourceMap::default() };
    let module = p.module().map_err(Diagnostics::from)?;
    let mut diags = p.warnings;
    let check = validate(&module);
    if check.has_errors() {
        diags.extend(check);
        let errors: Vec<_> = diags.into_iter().filter(Diagnostic::is_error).collect();
        return Err(Diagnostics(errors));
    }
    diags.extend(check);
    Ok(Parsed { module, warnings: diags, source_map: p.map })
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    warnings: Diagnostics,
    map: SourceMap,
}

const LINKAGE: &[&str] = &[
    "private",
    "internal",
    "external",
    "common",
    "weak",
    "weak_odr",
    "linkonce",
    "linkonce_odr",
    "available_externally",
    "appending",
    "extern_weak",
    "dso_local",
    "dso_preemptable",
    "hidden",
    "protected",
    "default",
    "unnamed_addr",
    "local_unnamed_addr",
    "thread_local",
    "externally_initialized",
    "fastcc",
    "ccc",
    "coldcc",
];

const FAST_MATH: &[&str] = &["fast", "nnan", "ninf", "nsz", "arcp", "contract", "afn", "reassoc"];
const INT_FLAGS: &[&str] = &["nsw", "nuw", "exact"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.pos + n).map(|t| &t.tok)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(1, |t| t.line)
    }

    fn here(&self) -> Location {
        match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) => Location::Source { line: t.line, col: t.col },
            None => Location::Source { line: 1, col: 1 },
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::error("syntax", self.here(), msg))
    }

    fn type_err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::error("type-mismatch", self.here(), msg))
    }

    fn next(&mut self) -> PResult<Tok> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.tok.clone())
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.err(format!("expected {tok:?}, found {:?}", self.peek()))
        }
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(i)) if i == s)
    }

    fn eat_ident(&mut self, s: &str) -> bool {
        if self.is_ident(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, s: &str) -> PResult<()> {
        if self.eat_ident(s) {
            Ok(())
        } else {
            self.err(format!("expected '{s}', found {:?}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            t => {
                self.pos -= 1;
                self.err(format!("expected identifier, found {t:?}"))
            }
        }
    }

    fn int(&mut self) -> PResult<i64> {
        match self.next()? {
            Tok::Int(v) => Ok(v),
            t => {
                self.pos -= 1;
                self.err(format!("expected integer, found {t:?}"))
            }
        }
    }

    fn local(&mut self) -> PResult<String> {
        match self.next()? {
            Tok::Local(s) => Ok(s),
            t => {
                self.pos -= 1;
                self.err(format!("expected local name, found {t:?}"))
            }
        }
    }

    fn warn(&mut self, code: &'static str, loc: Location, msg: String) {
        self.warnings.push(Diagnostic::warning(code, loc, msg));
    }

    /// Skips every remaining token on the current line.
    fn skip_line(&mut self) {
        let line = self.line();
        let mut depth = 0i32;
        while let Some(t) = self.toks.get(self.pos) {
            if t.line != line && depth <= 0 {
                break;
            }
            match t.tok {
                Tok::LParen | Tok::LBrace | Tok::LBracket => depth += 1,
                Tok::RParen | Tok::RBrace | Tok::RBracket => depth -= 1,
                _ => {}
            }
            self.pos += 1;
        }
    }

    /// Skips a balanced `( ... )`, `{ ... }` or `[ ... ]` group starting at
    /// the current token.
    fn skip_group(&mut self) -> PResult<()> {
        let mut depth = 0i32;
        loop {
            match self.next()? {
                Tok::LParen | Tok::LBrace | Tok::LBracket => depth += 1,
                Tok::RParen | Tok::RBrace | Tok::RBracket => depth -= 1,
                _ => {}
            }
            if depth <= 0 {
                return Ok(());
            }
        }
    }

    fn module(&mut self) -> PResult<IrModule> {
        let mut m = IrModule::default();
        while let Some(tok) = self.peek().cloned() {
            let line = self.line();
            match tok {
                Tok::Ident(ref s) if s == "source_filename" || s == "target" => {
                    let start = self.pos;
                    self.skip_line();
                    m.metadata.push(self.text_of(start));
                }
                Tok::Ident(ref s) if s == "attributes" => {
                    let start = self.pos;
                    self.pos += 1;
                    let name = match self.next()? {
                        Tok::AttrGroup(n) => n,
                        _ => return self.err("expected attribute group after 'attributes'"),
                    };
                    self.expect(Tok::Eq)?;
                    self.skip_group()?;
                    m.metadata.push(self.text_of(start));
                    self.warn(
                        "attribute-dropped",
                        Location::Module,
                        format!("line {line}: attribute group #{name} dropped"),
                    );
                }
                Tok::Meta(_) | Tok::Bang => {
                    let start = self.pos;
                    self.skip_line();
                    m.metadata.push(self.text_of(start));
                    self.warn("metadata-dropped", Location::Module, format!("line {line}: metadata node dropped"));
                }
                Tok::Global(name) => {
                    let g = self.global(name.clone())?;
                    self.map.globals.insert(name, line);
                    m.globals.push(g);
                }
                Tok::Ident(ref s) if s == "declare" => {
                    let d = self.declaration()?;
                    m.declarations.push(d);
                }
                Tok::Ident(ref s) if s == "define" => {
                    let f = self.function(line)?;
                    m.functions.push(f);
                }
                other => return self.err(format!("unexpected {other:?} at top level")),
            }
        }
        Ok(m)
    }

    fn text_of(&self, start: usize) -> String {
        self.toks[start..self.pos].iter().map(|t| format!("{:?}", t.tok)).collect::<Vec<_>>().join(" ")
    }

    fn ty(&mut self) -> PResult<Type> {
        let mut t = match self.next()? {
            Tok::Ident(s) => match s.as_str() {
                "float" => Type::Float,
                "void" => Type::Void,
                "label" => return self.err("unexpected 'label'"),
                s if s.starts_with('i') && s[1..].parse::<u32>().is_ok() => {
                    let w: u32 = s[1..].parse().unwrap_or(0);
                    if !matches!(w, 1 | 8 | 32 | 64) {
                        return self.type_err(format!("unsupported integer width i{w}"));
                    }
                    Type::Int(w)
                }
                other => return self.type_err(format!("unsupported type '{other}'")),
            },
            Tok::LBracket => {
                let n = self.int()?;
                self.expect_ident("x")?;
                let e = self.ty()?;
                self.expect(Tok::RBracket)?;
                if n < 1 {
                    return self.type_err("array length must be at least 1");
                }
                Type::array(e, n as u64)
            }
            Tok::Lt => {
                let n = self.int()?;
                self.expect_ident("x")?;
                let e = self.ty()?;
                self.expect(Tok::Gt)?;
                Type::Vector(Box::new(e), n as u32)
            }
            t => {
                self.pos -= 1;
                return self.err(format!("expected a type, found {t:?}"));
            }
        };
        while self.eat(&Tok::Star) {
            t = Type::ptr(t);
        }
        Ok(t)
    }

    /// A value of known type.
    fn value(&mut self, ty: &Type) -> PResult<Value> {
        match self.next()? {
            Tok::Local(n) => Ok(Value::Local(n)),
            Tok::Global(n) => Ok(Value::Global(n)),
            Tok::Int(v) => match ty.scalar_of() {
                Type::Int(w) => Ok(Value::Int(normalize_int(v, *w))),
                Type::Float => Ok(Value::float(v as f32)),
                _ => self.type_err(format!("integer constant for type {ty}")),
            },
            Tok::Float(v) => match ty {
                Type::Float => Ok(Value::float(v as f32)),
                _ => self.type_err(format!("float constant for type {ty}")),
            },
            Tok::Hex(bits) => match ty {
                Type::Float => Ok(Value::float(f64::from_bits(bits) as f32)),
                Type::Int(w) => Ok(Value::Int(normalize_int(bits as i64, *w))),
                _ => self.type_err(format!("hex constant for type {ty}")),
            },
            Tok::Ident(s) => match (s.as_str(), ty) {
                ("true", Type::Int(1)) => Ok(Value::Int(1)),
                ("false", Type::Int(1)) => Ok(Value::Int(0)),
                ("zeroinitializer", Type::Int(_)) => Ok(Value::Int(0)),
                ("zeroinitializer", Type::Float) => Ok(Value::float(0.0)),
                _ => {
                    self.pos -= 1;
                    self.err(format!("unsupported value '{s}' for type {ty}"))
                }
            },
            t => {
                self.pos -= 1;
                self.err(format!("expected a value, found {t:?}"))
            }
        }
    }

    fn operand(&mut self) -> PResult<Operand> {
        let ty = self.ty()?;
        let value = self.value(&ty)?;
        Ok(Operand { ty, value })
    }

    fn global(&mut self, name: String) -> PResult<GlobalDef> {
        self.pos += 1;
        self.expect(Tok::Eq)?;
        let constant = loop {
            let id = self.ident()?;
            match id.as_str() {
                "global" => break false,
                "constant" => break true,
                s if LINKAGE.contains(&s) => continue,
                other => return self.err(format!("unexpected '{other}' in global definition")),
            }
        };
        let ty = self.ty()?;
        let init = if self.eat_ident("zeroinitializer") {
            Init::Zero
        } else {
            let mut flat = Vec::new();
            self.initializer(&ty, &mut flat)?;
            Init::Values(flat)
        };
        let mut align = None;
        while self.eat(&Tok::Comma) {
            if self.eat_ident("align") {
                align = Some(self.int()? as u32);
            } else {
                let line = self.line();
                self.skip_line();
                self.warn("attribute-dropped", Location::Global(name.clone()), format!("line {line}: global attribute dropped"));
                break;
            }
        }
        Ok(GlobalDef { name, ty, init, align, constant })
    }

    fn initializer(&mut self, ty: &Type, out: &mut Vec<Value>) -> PResult<()> {
        match ty {
            Type::Array(elem, n) => {
                if self.eat_ident("zeroinitializer") {
                    let zero = zero_value(elem.leaf());
                    out.extend(std::iter::repeat_n(zero, ty.flat_len() as usize));
                    return Ok(());
                }
                self.expect(Tok::LBracket)?;
                for i in 0..*n {
                    if i > 0 {
                        self.expect(Tok::Comma)?;
                    }
                    let et = self.ty()?;
                    if et != **elem {
                        return self.type_err(format!("initializer element type {et} does not match {elem}"));
                    }
                    self.initializer(elem, out)?;
                }
                self.expect(Tok::RBracket)
            }
            Type::Int(_) | Type::Float => {
                let v = self.value(ty)?;
                if !v.is_const() {
                    return self.type_err("initializer must be a constant");
                }
                out.push(v);
                Ok(())
            }
            other => self.type_err(format!("unsupported initializer type {other}")),
        }
    }

    fn declaration(&mut self) -> PResult<Declaration> {
        self.pos += 1;
        while matches!(self.peek(), Some(Tok::Ident(s)) if LINKAGE.contains(&s.as_str())) {
            self.pos += 1;
        }
        let ret = self.ty()?;
        let name = match self.next()? {
            Tok::Global(n) => n,
            _ => return self.err("expected function name"),
        };
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                params.push(self.ty()?);
                self.skip_param_attrs()?;
                if matches!(self.peek(), Some(Tok::Local(_))) {
                    self.pos += 1;
                }
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        self.skip_fn_attrs(&name)?;
        Ok(Declaration { name, ret, params })
    }

    fn skip_param_attrs(&mut self) -> PResult<Vec<String>> {
        let mut dropped = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Ident(s)) if s != "x" => {
                    let s = s.clone();
                    self.pos += 1;
                    if self.peek() == Some(&Tok::LParen) {
                        self.skip_group()?;
                    } else if s == "align" {
                        self.int()?;
                    }
                    dropped.push(s);
                }
                Some(Tok::Str(s)) => {
                    dropped.push(s.clone());
                    self.pos += 1;
                    if self.eat(&Tok::Eq) {
                        self.next()?;
                    }
                }
                _ => return Ok(dropped),
            }
        }
    }

    /// Function attributes between `)` and `{` (or end of a declaration).
    fn skip_fn_attrs(&mut self, fname: &str) -> PResult<()> {
        let mut dropped = Vec::new();
        let decl_line = self.toks.get(self.pos.saturating_sub(1)).map_or(0, |t| t.line);
        loop {
            match self.peek() {
                Some(Tok::Ident(s)) if !matches!(s.as_str(), "define" | "declare" | "attributes" | "source_filename" | "target") => {
                    let s = s.clone();
                    self.pos += 1;
                    if self.peek() == Some(&Tok::LParen) {
                        self.skip_group()?;
                    } else if s == "align" {
                        self.int()?;
                    }
                    if !matches!(s.as_str(), "unnamed_addr" | "local_unnamed_addr") {
                        dropped.push(s);
                    }
                }
                Some(Tok::AttrGroup(g)) => {
                    dropped.push(format!("#{g}"));
                    self.pos += 1;
                }
                Some(Tok::Str(s)) => {
                    dropped.push(format!("\"{s}\""));
                    self.pos += 1;
                    if self.eat(&Tok::Eq) {
                        self.next()?;
                    }
                }
                Some(Tok::Meta(_)) if self.toks[self.pos].line == decl_line => {
                    self.pos += 1;
                    if matches!(self.peek(), Some(Tok::Meta(_))) {
                        self.pos += 1;
                    }
                    dropped.push("metadata".into());
                }
                _ => break,
            }
        }
        if !dropped.is_empty() {
            self.warn(
                "attribute-dropped",
                Location::Function(fname.to_string()),
                format!("function attributes dropped: {}", dropped.join(", ")),
            );
        }
        Ok(())
    }

    fn function(&mut self, line: usize) -> PResult<Function> {
        self.pos += 1;
        while matches!(self.peek(), Some(Tok::Ident(s)) if LINKAGE.contains(&s.as_str())) {
            self.pos += 1;
        }
        let ret = self.ty()?;
        let name = match self.next()? {
            Tok::Global(n) => n,
            _ => return self.err("expected function name"),
        };
        self.map.functions.insert(name.clone(), line);
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        let mut dropped = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                if self.eat(&Tok::Ellipsis) {
                    return self.err("variadic functions are not supported");
                }
                let ty = self.ty()?;
                dropped.extend(self.skip_param_attrs()?);
                let pname = self.local()?;
                params.push(Param { name: pname, ty });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        if !dropped.is_empty() {
            self.warn(
                "attribute-dropped",
                Location::Function(name.clone()),
                format!("parameter attributes dropped: {}", dropped.join(", ")),
            );
        }
        self.skip_fn_attrs(&name)?;
        self.expect(Tok::LBrace)?;

        let mut blocks: Vec<Block> = Vec::new();
        loop {
            match self.peek().cloned() {
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Label(l)) => {
                    self.map.blocks.insert((name.clone(), l.clone()), self.line());
                    self.pos += 1;
                    blocks.push(Block::new(l));
                }
                Some(_) => {
                    if blocks.is_empty() {
                        self.map.blocks.insert((name.clone(), "entry".into()), self.line());
                        blocks.push(Block::new("entry"));
                    }
                    let line = self.line();
                    let inst = self.instruction(&name)?;
                    let b = blocks.last_mut().expect("block exists");
                    self.map.insts.insert((name.clone(), b.label.clone(), b.insts.len()), line);
                    b.insts.push(inst);
                }
                None => return self.err(format!("unterminated body of @{name}")),
            }
        }
        Ok(Function { name, ret, params, blocks })
    }

    /// Whether the comma at the cursor starts `, align N` or a metadata
    /// attachment rather than another operand.
    fn trailing_follows(&self) -> bool {
        match self.peek_at(1) {
            Some(Tok::Ident(s)) => s == "align",
            Some(Tok::Meta(_)) => true,
            _ => false,
        }
    }

    fn skip_flags(&mut self, flags: &[&str]) {
        while matches!(self.peek(), Some(Tok::Ident(s)) if flags.contains(&s.as_str())) {
            self.pos += 1;
        }
    }

    /// Trailing `, align N` and metadata attachments.
    fn trailing(&mut self, func: &str) -> PResult<Option<u32>> {
        let mut align = None;
        while self.peek() == Some(&Tok::Comma) {
            match self.peek_at(1) {
                Some(Tok::Ident(s)) if s == "align" => {
                    self.pos += 2;
                    align = Some(self.int()? as u32);
                }
                Some(Tok::Meta(_)) => {
                    self.pos += 2;
                    match self.peek() {
                        Some(Tok::Meta(_)) => self.pos += 1,
                        Some(Tok::Bang) => {
                            self.pos += 1;
                            self.skip_group()?;
                        }
                        _ => {}
                    }
                    let line = self.line();
                    self.warn(
                        "metadata-dropped",
                        Location::Function(func.to_string()),
                        format!("line {line}: metadata attachment dropped"),
                    );
                }
                _ => break,
            }
        }
        Ok(align)
    }

    fn instruction(&mut self, func: &str) -> PResult<Instruction> {
        let result = if matches!(self.peek(), Some(Tok::Local(_))) && self.peek_at(1) == Some(&Tok::Eq) {
            let r = self.local()?;
            self.pos += 1;
            Some(r)
        } else {
            None
        };
        let mut op = self.ident()?;
        if matches!(op.as_str(), "tail" | "musttail" | "notail") {
            op = self.ident()?;
        }
        let kind = match op.as_str() {
            "getelementptr" => {
                let inbounds = self.eat_ident("inbounds");
                let first = self.ty()?;
                let base = if self.eat(&Tok::Comma) {
                    let base = self.operand()?;
                    if base.ty.pointee() != Some(&first) {
                        return self.type_err(format!("gep source type {first} does not match base {}", base.ty));
                    }
                    base
                } else {
                    if !first.is_ptr() {
                        return self.type_err(format!("gep base must be a pointer, found {first}"));
                    }
                    let v = self.value(&first)?;
                    Operand::new(first, v)
                };
                let mut indices = Vec::new();
                while self.peek() == Some(&Tok::Comma) && !self.trailing_follows() {
                    self.pos += 1;
                    indices.push(self.operand()?);
                }
                InstKind::Gep { inbounds, base, indices }
            }
            "load" => {
                self.eat_ident("atomic");
                let volatile = self.eat_ident("volatile");
                let first = self.ty()?;
                let ptr = if self.eat(&Tok::Comma) {
                    let p = self.operand()?;
                    if p.ty.pointee() != Some(&first) {
                        return self.type_err(format!("load of {first} through pointer {}", p.ty));
                    }
                    p
                } else {
                    if !first.is_ptr() {
                        return self.type_err(format!("load operand must be a pointer, found {first}"));
                    }
                    let v = self.value(&first)?;
                    Operand::new(first, v)
                };
                let align = self.trailing(func)?;
                return Ok(Instruction::new(result, InstKind::Load { volatile, ptr, align }));
            }
            "store" => {
                self.eat_ident("atomic");
                let volatile = self.eat_ident("volatile");
                let value = self.operand()?;
                self.expect(Tok::Comma)?;
                let ptr = self.operand()?;
                if ptr.ty.pointee() != Some(&value.ty) {
                    return self.type_err(format!("store of {} through pointer {}", value.ty, ptr.ty));
                }
                let align = self.trailing(func)?;
                return Ok(Instruction::new(result, InstKind::Store { volatile, value, ptr, align }));
            }
            "bitcast" | "zext" | "sext" | "trunc" | "sitofp" | "fptosi" => {
                let value = self.operand()?;
                self.expect_ident("to")?;
                let to = self.ty()?;
                InstKind::Cast { op: CastOp::from_name(&op).expect("listed"), value, to }
            }
            "add" | "sub" | "mul" | "sdiv" | "srem" | "fadd" | "fsub" | "fmul" | "fdiv" => {
                self.skip_flags(INT_FLAGS);
                self.skip_flags(FAST_MATH);
                let lhs = self.operand()?;
                self.expect(Tok::Comma)?;
                let rv = self.value(&lhs.ty)?;
                let rhs = Operand::new(lhs.ty.clone(), rv);
                InstKind::Binary { op: BinOp::from_name(&op).expect("listed"), lhs, rhs }
            }
            "icmp" => {
                let p = self.ident()?;
                let Some(pred) = IntPred::from_name(&p) else {
                    return self.err(format!("unknown icmp predicate '{p}'"));
                };
                let lhs = self.operand()?;
                self.expect(Tok::Comma)?;
                let rv = self.value(&lhs.ty)?;
                let rhs = Operand::new(lhs.ty.clone(), rv);
                InstKind::Icmp { pred, lhs, rhs }
            }
            "fcmp" => {
                self.skip_flags(FAST_MATH);
                let p = self.ident()?;
                let Some(pred) = FloatPred::from_name(&p) else {
                    return self.err(format!("unknown fcmp predicate '{p}'"));
                };
                let lhs = self.operand()?;
                self.expect(Tok::Comma)?;
                let rv = self.value(&lhs.ty)?;
                let rhs = Operand::new(lhs.ty.clone(), rv);
                InstKind::Fcmp { pred, lhs, rhs }
            }
            "select" => {
                self.skip_flags(FAST_MATH);
                let cond = self.operand()?;
                self.expect(Tok::Comma)?;
                let on_true = self.operand()?;
                self.expect(Tok::Comma)?;
                let on_false = self.operand()?;
                InstKind::Select { cond, on_true, on_false }
            }
            "phi" => {
                self.skip_flags(FAST_MATH);
                let ty = self.ty()?;
                let mut incoming = Vec::new();
                loop {
                    self.expect(Tok::LBracket)?;
                    let v = self.value(&ty)?;
                    self.expect(Tok::Comma)?;
                    let l = self.local()?;
                    self.expect(Tok::RBracket)?;
                    incoming.push((Operand::new(ty.clone(), v), l));
                    if !(self.peek() == Some(&Tok::Comma) && self.peek_at(1) == Some(&Tok::LBracket)) {
                        break;
                    }
                    self.pos += 1;
                }
                InstKind::Phi { ty, incoming }
            }
            "br" => {
                if self.eat_ident("label") {
                    InstKind::Br { target: self.local()? }
                } else {
                    let cond = self.operand()?;
                    self.expect(Tok::Comma)?;
                    self.expect_ident("label")?;
                    let if_true = self.local()?;
                    self.expect(Tok::Comma)?;
                    self.expect_ident("label")?;
                    let if_false = self.local()?;
                    InstKind::CondBr { cond, if_true, if_false }
                }
            }
            "ret" => {
                if self.eat_ident("void") {
                    InstKind::Ret { value: None }
                } else {
                    InstKind::Ret { value: Some(self.operand()?) }
                }
            }
            "call" => {
                self.skip_flags(FAST_MATH);
                self.skip_param_attrs_before_type();
                let ret = self.ty()?;
                let callee = match self.next()? {
                    Tok::Global(n) => n,
                    _ => return self.err("expected callee name"),
                };
                self.expect(Tok::LParen)?;
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        let ty = self.ty()?;
                        self.skip_param_attrs()?;
                        let v = self.value(&ty)?;
                        args.push(Operand::new(ty, v));
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(Tok::Comma)?;
                    }
                }
                let mut dropped = Vec::new();
                while let Some(Tok::AttrGroup(g)) = self.peek() {
                    dropped.push(format!("#{g}"));
                    self.pos += 1;
                }
                while matches!(self.peek(), Some(Tok::Ident(s)) if is_call_attr(s)) {
                    dropped.push(self.ident()?);
                }
                if !dropped.is_empty() {
                    self.warn(
                        "attribute-dropped",
                        Location::Function(func.to_string()),
                        format!("call attributes dropped: {}", dropped.join(", ")),
                    );
                }
                InstKind::Call { ret, callee, args }
            }
            other => return self.err(format!("unsupported instruction '{other}'")),
        };
        self.trailing(func)?;
        Ok(Instruction::new(result, kind))
    }

    fn skip_param_attrs_before_type(&mut self) {
        while matches!(self.peek(), Some(Tok::Ident(s)) if matches!(s.as_str(), "noalias" | "nonnull" | "zeroext" | "signext" | "inreg")) {
            self.pos += 1;
        }
    }
}

fn is_call_attr(s: &str) -> bool {
    matches!(s, "nounwind" | "readnone" | "readonly" | "speculatable" | "norecurse" | "willreturn" | "nofree" | "nosync")
}

fn zero_value(t: &Type) -> Value {
    match t {
        Type::Float => Value::float(0.0),
        _ => Value::Int(0),
    }
}

/// Wraps `v` to a `width`-bit two's-complement value, sign-extended to 64 bits
/// (`i1` is kept as 0 or 1).
pub fn normalize_int(v: i64, width: u32) -> i64 {
    if width >= 64 {
        v
    } else if width == 1 {
        v & 1
    } else {
        let shift = 64 - width;
        (v << shift) >> shift
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Parsed {
        match parse_module(text) {
            Ok(p) => p,
            Err(d) => panic!("parse failed:\n{d}"),
        }
    }

    #[test]
    fn empty_input_is_empty_module() {
        let p = parse("");
        assert!(p.module.structurally_eq(&IrModule::default()));
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn legacy_and_modern_load_are_identical() {
        let legacy = "@g = global float zeroinitializer\ndefine void @main() {\n  %0 = getelementptr float* @g, i64 0\n  %2 = load volatile float* %0, align 8\n  ret void\n}\n";
        let modern = "@g = global float zeroinitializer\ndefine void @main() {\n  %0 = getelementptr float, float* @g, i64 0\n  %2 = load volatile float, float* %0, align 8\n  ret void\n}\n";
        let a = parse(legacy).module;
        let b = parse(modern).module;
        assert_eq!(a.functions[0].blocks[0].insts[1], b.functions[0].blocks[0].insts[1]);
        assert!(a.structurally_eq(&b));
    }

    #[test]
    fn attributes_and_metadata_are_dropped_with_warnings() {
        let with = "define void @main() norecurse nounwind speculatable #0 {\n  ret void, !dbg !3\n}\nattributes #0 = { nounwind \"x\"=\"y\" }\n!3 = !DILocation(line: 1, scope: !4)\n";
        let without = "define void @main() {\n  ret void\n}\n";
        let a = parse(with);
        let b = parse(without);
        assert!(a.module.structurally_eq(&b.module));
        assert!(a.warnings.len() >= 3);
        assert!(a.warnings.iter().all(|d| !d.is_error()));
        assert!(b.warnings.is_empty());
    }

    #[test]
    fn syntax_error_has_line_and_column() {
        let err = parse_module("define void @main() {\n  %1 = frobnicate i32 0\n}").unwrap_err();
        let d = err.errors().next().unwrap();
        assert_eq!(d.code, "syntax");
        assert!(matches!(d.location, Location::Source { line: 2, .. }));
    }

    #[test]
    fn modern_load_type_mismatch_is_rejected() {
        let err = parse_module("@g = global i32 0\ndefine void @main() {\n  %1 = load float, i32* @g\n  ret void\n}").unwrap_err();
        assert_eq!(err.errors().next().unwrap().code, "type-mismatch");
    }

    #[test]
    fn duplicate_ssa_name_is_rejected() {
        let err = parse_module(
            "define i32 @f(i32 %a) {\nentry:\n  %x = add i32 %a, 1\n  %x = add i32 %a, 2\n  ret i32 %x\n}",
        )
        .unwrap_err();
        assert!(err.with_code("ssa-duplicate").next().is_some());
    }

    #[test]
    fn nested_initializer_is_flattened() {
        let p = parse("@w = global [2 x [2 x float]] [[2 x float] [float 1.0, float 2.0], [2 x float] [float 3.0, float 4.0]]\n");
        let g = &p.module.globals[0];
        assert_eq!(
            g.init,
            Init::Values(vec![Value::float(1.0), Value::float(2.0), Value::float(3.0), Value::float(4.0)])
        );
    }

    #[test]
    fn source_map_tracks_instruction_lines() {
        let p = parse("define void @main() {\nentry:\n  br label %next\nnext:\n  ret void\n}\n");
        let loc = Location::Inst { function: "main".into(), block: "next".into(), index: 0 };
        assert_eq!(p.source_map.line_of(&loc), Some(5));
    }
}
