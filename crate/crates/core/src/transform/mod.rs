//! Hardware-enabling transformations and the pass pipeline.

pub mod fold;
mod inline;
mod legality;
mod restructure;
mod simplify;
mod unroll;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::diag::{Diagnostic, Diagnostics, Location};
use crate::ir::{validate, IrModule};

pub use inline::inline_calls;
pub use legality::check_legality;
pub use restructure::{mark_io_volatile, restructure_signature, written_globals, SignatureRoles};
pub use simplify::simplify;
pub use unroll::{unroll_loops, CountedLoop};

pub const RESTRUCTURE: &str = "restructure_signature";
pub const CHECK_LEGALITY: &str = "check_legality";
pub const INLINE: &str = "inline_calls";
pub const UNROLL: &str = "unroll_loops";
pub const SIMPLIFY: &str = "simplify";
/// Registered so the denylist has something to bar, never runnable.
pub const LICM: &str = "licm";

/// Passes that may never run, whatever the configuration says.
pub const BARRED: &[&str] = &[LICM];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassConfig {
    /// Largest trip-count x body-size product that is fully unrolled.
    pub unroll_threshold: u64,
    /// Largest callee instruction count that is inlined.
    pub inline_threshold: u64,
    pub denylist: BTreeSet<String>,
    pub pipeline: Vec<String>,
}

impl Default for PassConfig {
    fn default() -> Self {
        PassConfig {
            unroll_threshold: 150,
            inline_threshold: 225,
            denylist: ["slp-vectorizer", "argpromotion", LICM].into_iter().map(String::from).collect(),
            pipeline: [RESTRUCTURE, CHECK_LEGALITY, INLINE, UNROLL, SIMPLIFY].into_iter().map(String::from).collect(),
        }
    }
}

impl PassConfig {
    pub fn with_unroll_threshold(mut self, t: u64) -> Self {
        self.unroll_threshold = t;
        self
    }

    pub fn with_inline_threshold(mut self, t: u64) -> Self {
        self.inline_threshold = t;
        self
    }
}

pub type PassFn = dyn Fn(&IrModule, &PassConfig) -> Result<IrModule, Diagnostics> + Send + Sync;

/// Named passes available to a pipeline.
#[derive(Clone)]
pub struct PassRegistry {
    passes: BTreeMap<String, Arc<PassFn>>,
}

impl fmt::Debug for PassRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.passes.keys()).finish()
    }
}

impl Default for PassRegistry {
    fn default() -> Self {
        let mut r = PassRegistry { passes: BTreeMap::new() };
        r.register(RESTRUCTURE, |m, _| restructure_signature(m).map_err(Diagnostics::from));
        r.register(CHECK_LEGALITY, |m, _| {
            let d = check_legality(m);
            if d.has_errors() { Err(d) } else { Ok(m.clone()) }
        });
        r.register(INLINE, |m, c| Ok(inline_calls(m, c.inline_threshold)));
        r.register(UNROLL, |m, c| Ok(unroll_loops(m, c.unroll_threshold)));
        r.register(SIMPLIFY, |m, _| Ok(simplify(m)));
        r.register(LICM, |_, _| Err(barred(LICM).into()));
        r
    }
}

impl PassRegistry {
    pub fn register(
        &mut self,
        name: &str,
        pass: impl Fn(&IrModule, &PassConfig) -> Result<IrModule, Diagnostics> + Send + Sync + 'static,
    ) {
        self.passes.insert(name.to_string(), Arc::new(pass));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.passes.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.passes.keys().map(String::as_str)
    }
}

fn barred(name: &str) -> Diagnostic {
    Diagnostic::error("pass-barred", Location::Module, format!("pass `{name}` is permanently denylisted"))
}

/// One executed pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassLogEntry {
    pub pass: String,
    pub before: usize,
    pub after: usize,
}

impl fmt::Display for PassLogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pass={} before={} after={}", self.pass, self.before, self.after)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PassLog(pub Vec<PassLogEntry>);

impl PassLog {
    pub fn passes(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|e| e.pass.as_str())
    }
}

impl fmt::Display for PassLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.0 {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub module: IrModule,
    pub log: PassLog,
    /// Warnings raised along the way (skipped passes, legality notes).
    pub warnings: Diagnostics,
}

/// Runs `cfg.pipeline` with the default registry.
pub fn run_pipeline(m: &IrModule, cfg: &PassConfig) -> Result<PipelineOutput, Diagnostics> {
    run_pipeline_with(m, cfg, &PassRegistry::default())
}

/// Runs the configured pipeline in order, skipping denylisted names.
/// Barred passes and unknown names are rejected before anything runs.
/// Every pass output is re-validated.
pub fn run_pipeline_with(m: &IrModule, cfg: &PassConfig, registry: &PassRegistry) -> Result<PipelineOutput, Diagnostics> {
    let mut errors = Diagnostics::default();
    for name in &cfg.pipeline {
        if BARRED.contains(&name.as_str()) {
            errors.push(barred(name));
        } else if !cfg.denylist.contains(name) && !registry.contains(name) {
            errors.push(Diagnostic::error("unknown-pass", Location::Module, format!("no pass named `{name}`")));
        }
    }
    if errors.has_errors() {
        return Err(errors);
    }
    let mut out = PipelineOutput { module: m.clone(), log: PassLog::default(), warnings: Diagnostics::default() };
    for name in &cfg.pipeline {
        if cfg.denylist.contains(name) {
            out.warnings.push(Diagnostic::warning(
                "pass-skipped",
                Location::Module,
                format!("pass `{name}` is denylisted and was skipped"),
            ));
            continue;
        }
        let before = out.module.inst_count();
        let next = (registry.passes[name])(&out.module, cfg)?;
        let d = validate(&next);
        if d.has_errors() {
            let mut e = Diagnostics::from(Diagnostic::error(
                "pass-broke-module",
                Location::Module,
                format!("pass `{name}` produced an invalid module"),
            ));
            e.0.extend(d.errors().cloned());
            return Err(e);
        }
        out.log.0.push(PassLogEntry { pass: name.clone(), before, after: next.inst_count() });
        out.module = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    const STANDALONE: &str = "@o = global [1 x float] zeroinitializer
define void @main() {
entry:
  %x = fmul float 2.000000e+00, 3.000000e+00
  %p = getelementptr inbounds [1 x float]* @o, i64 0, i64 0
  store float %x, float* %p
  ret void
}
";

    #[test]
    fn default_pipeline_logs_every_pass() {
        let m = parse_module(STANDALONE).unwrap().module;
        let out = run_pipeline(&m, &PassConfig::default()).unwrap();
        let names: Vec<_> = out.log.passes().collect();
        assert_eq!(names, vec![RESTRUCTURE, CHECK_LEGALITY, INLINE, UNROLL, SIMPLIFY]);
        assert!(out.log.to_string().contains("pass=simplify before=4 after=3"));
    }

    #[test]
    fn licm_is_barred_even_off_the_denylist() {
        let m = parse_module(STANDALONE).unwrap().module;
        let mut cfg = PassConfig::default();
        cfg.pipeline.push(LICM.into());
        assert_eq!(run_pipeline(&m, &cfg).unwrap_err().0[0].code, "pass-barred");
        cfg.denylist.clear();
        assert_eq!(run_pipeline(&m, &cfg).unwrap_err().0[0].code, "pass-barred");
    }

    #[test]
    fn denylisted_names_are_skipped_and_unknown_names_rejected() {
        let m = parse_module(STANDALONE).unwrap().module;
        let mut cfg = PassConfig::default();
        cfg.pipeline.insert(0, "slp-vectorizer".into());
        let out = run_pipeline(&m, &cfg).unwrap();
        assert!(out.log.passes().all(|p| p != "slp-vectorizer"));
        assert_eq!(out.warnings.with_code("pass-skipped").count(), 1);
        cfg.pipeline.push("gvn".into());
        assert_eq!(run_pipeline(&m, &cfg).unwrap_err().0[0].code, "unknown-pass");
    }
}
