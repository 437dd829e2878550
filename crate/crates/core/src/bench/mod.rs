//! The micro-benchmark suite: kernel generators, plain reference models and
//! the functional + cycle report.

mod gen;
mod golden;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diag::{Diagnostic, Location};
use crate::interp::{compare_images, Bank, MemoryImage};
use crate::ir::{validate, IrModule};
use crate::partition::{apply_partition, gather_image, reslice_image, BankLayout, PartitionSpec};
use crate::sched::{count_cycles, ResourceModel};
use crate::transform::{run_pipeline_with, PassConfig, PassRegistry};

/// The fifteen benchmark names, in report order.
pub const REGISTRY: &[&str] = &[
    "vecmul_a",
    "vecmul_b",
    "vecmul_b_u",
    "dense_a",
    "dense_b",
    "softmax_a",
    "softmax_b",
    "softmax_b_u",
    "conv2d_a",
    "conv2d_a_u",
    "conv2d_b",
    "maxp_a",
    "maxp_b",
    "maxp_b_u",
    "thxprlsg",
];

/// Cases outside the fifteen: a 784-10 MLP classifier.
pub const EXTENSIONS: &[&str] = &["mnist_mlp"];

pub const REL_TOL: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `out[i] = a[i] * b[i]`
    VecMul { n: usize },
    /// `out = relu(x W + b)` with `W` stored `[inputs][outputs]`.
    Dense { inputs: usize, outputs: usize, relu: bool },
    Softmax { n: usize },
    /// 3x3 filter `[3][3][channels]`, stride 1, zero padding keeping `h x w`.
    Conv2d { h: usize, w: usize, channels: usize },
    /// 2x2 window, stride 2.
    MaxPool { h: usize, w: usize },
    /// `sigmoid(relu(exp(tanh x)))` elementwise.
    Mix { n: usize },
    /// Dense without activation followed by softmax.
    Mlp { inputs: usize, outputs: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkCase {
    pub name: String,
    pub shape: Shape,
    /// Generated as straight-line code with constant indices.
    pub unrolled: bool,
}

fn bad_params(name: &str, msg: String) -> Diagnostic {
    Diagnostic::error("invalid-benchmark-params", Location::Function(name.into()), msg)
}

impl BenchmarkCase {
    /// Builds a case with custom parameters.
    pub fn new(name: impl Into<String>, shape: Shape, unrolled: bool) -> Result<BenchmarkCase, Diagnostic> {
        let name = name.into();
        let err = |m: &str| Err(bad_params(&name, m.to_string()));
        match shape {
            Shape::VecMul { n } | Shape::Softmax { n } | Shape::Mix { n } if n == 0 => return err("size must be positive"),
            Shape::Dense { inputs, outputs, .. } | Shape::Mlp { inputs, outputs } if inputs == 0 || outputs == 0 => {
                return err("layer dimensions must be positive")
            }
            Shape::Conv2d { h, w, channels } => {
                if h < 3 || w < 3 {
                    return err("the 3x3 filter is larger than the input");
                }
                if channels == 0 {
                    return err("need at least one output channel");
                }
            }
            Shape::MaxPool { h, w } => {
                if h < 2 || w < 2 {
                    return err("the 2x2 window is larger than the input");
                }
                if h % 2 != 0 || w % 2 != 0 {
                    return err("input dimensions must be multiples of the window");
                }
            }
            _ => {}
        }
        Ok(BenchmarkCase { name, shape, unrolled })
    }

    /// A registry or extension case by name.
    pub fn lookup(name: &str) -> Result<BenchmarkCase, Diagnostic> {
        use Shape::*;
        let (shape, unrolled) = match name {
            "vecmul_a" => (VecMul { n: 8 }, false),
            "vecmul_b" => (VecMul { n: 64 }, false),
            "vecmul_b_u" => (VecMul { n: 64 }, true),
            "dense_a" => (Dense { inputs: 8, outputs: 8, relu: true }, false),
            "dense_b" => (Dense { inputs: 64, outputs: 64, relu: true }, false),
            "softmax_a" => (Softmax { n: 8 }, false),
            "softmax_b" => (Softmax { n: 64 }, false),
            "softmax_b_u" => (Softmax { n: 64 }, true),
            "conv2d_a" => (Conv2d { h: 8, w: 8, channels: 2 }, false),
            "conv2d_a_u" => (Conv2d { h: 8, w: 8, channels: 2 }, true),
            "conv2d_b" => (Conv2d { h: 64, w: 64, channels: 2 }, false),
            "maxp_a" => (MaxPool { h: 8, w: 8 }, false),
            "maxp_b" => (MaxPool { h: 32, w: 32 }, false),
            "maxp_b_u" => (MaxPool { h: 32, w: 32 }, true),
            "thxprlsg" => (Mix { n: 8 }, false),
            "mnist_mlp" => (Mlp { inputs: 784, outputs: 10 }, false),
            _ => {
                return Err(Diagnostic::error(
                    "unknown-benchmark",
                    Location::Module,
                    format!("no benchmark named `{name}`"),
                ))
            }
        };
        BenchmarkCase::new(name, shape, unrolled)
    }

    /// All fifteen registry cases in order.
    pub fn registry() -> Vec<BenchmarkCase> {
        REGISTRY.iter().map(|n| BenchmarkCase::lookup(n).expect("registry names resolve")).collect()
    }

    /// The kernel in the five-argument calling convention, validated.
    pub fn generate(&self) -> Result<IrModule, Diagnostic> {
        let m = gen::generate(self);
        let d = validate(&m);
        if let Some(e) = d.errors().next() {
            return Err(Diagnostic::error(
                "generator-invalid",
                Location::Function(self.name.clone()),
                format!("generated module does not validate: {e}"),
            ));
        }
        Ok(m)
    }

    /// Dimensions of each input buffer, in parameter order.
    pub fn input_shapes(&self) -> Vec<Vec<usize>> {
        match self.shape {
            Shape::VecMul { n } => vec![vec![n], vec![n]],
            Shape::Dense { inputs, outputs, .. } | Shape::Mlp { inputs, outputs } => {
                vec![vec![inputs], vec![inputs, outputs], vec![outputs]]
            }
            Shape::Softmax { n } | Shape::Mix { n } => vec![vec![n]],
            Shape::Conv2d { h, w, channels } => vec![vec![h, w], vec![3, 3, channels]],
            Shape::MaxPool { h, w } => vec![vec![h, w]],
        }
    }

    pub fn output_shape(&self) -> Vec<usize> {
        match self.shape {
            Shape::VecMul { n } | Shape::Softmax { n } | Shape::Mix { n } => vec![n],
            Shape::Dense { outputs, .. } | Shape::Mlp { outputs, .. } => vec![outputs],
            Shape::Conv2d { h, w, channels } => vec![h, w, channels],
            Shape::MaxPool { h, w } => vec![h / 2, w / 2],
        }
    }

    /// Reference result computed directly on the input arrays.
    pub fn golden(&self, inputs: &[Vec<f32>]) -> Result<Vec<f32>, Diagnostic> {
        let shapes = self.input_shapes();
        let err = |m: String| Diagnostic::error("shape-mismatch", Location::Function(self.name.clone()), m);
        if inputs.len() != shapes.len() {
            return Err(err(format!("expected {} inputs, got {}", shapes.len(), inputs.len())));
        }
        for (k, (x, s)) in inputs.iter().zip(&shapes).enumerate() {
            let len: usize = s.iter().product();
            if x.len() != len {
                return Err(err(format!("input {k} has {} elements, expected {len}", x.len())));
            }
        }
        Ok(golden::golden(&self.shape, inputs))
    }

    /// Uniform inputs in `[-scale, scale)`.
    pub fn random_inputs(&self, seed: u64, scale: f32) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.input_shapes()
            .iter()
            .map(|s| (0..s.iter().product::<usize>()).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect()
    }

    fn is_softmax(&self) -> bool {
        matches!(self.shape, Shape::Softmax { .. } | Shape::Mlp { .. })
    }
}

/// Per-case, per-image seed; stable across runs and platforms.
pub fn case_seed(base: u64, name: &str, image: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    h ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (image as u64).wrapping_mul(0xd6e8_feb8_6659_fd93)
}

/// Starting image of a restructured module with `arg<k>` set to the inputs.
pub fn build_image(m: &IrModule, inputs: &[Vec<f32>]) -> Result<MemoryImage, Diagnostic> {
    let mut img = MemoryImage::from_module(m)?;
    for (k, x) in inputs.iter().enumerate() {
        let name = format!("arg{k}");
        match img.get(&name) {
            Some(b) if b.len() == x.len() => img.insert(&name, Bank::from_f32(x)),
            Some(b) => {
                return Err(Diagnostic::error(
                    "shape-mismatch",
                    Location::Global(name),
                    format!("global holds {} elements, input has {}", b.len(), x.len()),
                ))
            }
            None => return Err(Diagnostic::error("bad-image", Location::Global(name), "module has no such input global")),
        }
    }
    Ok(img)
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub passes: PassConfig,
    pub registry: PassRegistry,
    pub resources: ResourceModel,
    pub partitions: Vec<PartitionSpec>,
    /// Random images per case; softmax cases get one more at large magnitude.
    pub images: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            passes: PassConfig::default(),
            registry: PassRegistry::default(),
            resources: ResourceModel::default(),
            partitions: Vec::new(),
            images: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub name: String,
    pub pass: bool,
    pub worst_rel_err: f64,
    /// Cycles on the first image.
    pub cycles: Option<u64>,
    pub images: usize,
    pub error: Option<Diagnostic>,
}

impl fmt::Display for CaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "case={} status={} worst_rel_err={:e} cycles={}",
            self.name,
            if self.pass { "pass" } else { "fail" },
            self.worst_rel_err,
            self.cycles.map_or("-".to_string(), |c| c.to_string())
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub cases: Vec<CaseReport>,
}

impl SuiteReport {
    pub fn case(&self, name: &str) -> Option<&CaseReport> {
        self.cases.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> usize {
        self.cases.iter().filter(|c| c.pass).count()
    }

    pub fn all_pass(&self) -> bool {
        self.cases.iter().all(|c| c.pass)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cases {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A case carried through the pipeline and partitioning, ready to run.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub case: BenchmarkCase,
    /// After the pass pipeline, before partitioning.
    pub transformed: IrModule,
    pub module: IrModule,
    pub layouts: Vec<BankLayout>,
}

/// Outcome of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRun {
    pub pass: bool,
    pub worst_rel_err: f64,
    pub cycles: u64,
    pub output: Vec<f32>,
    pub expected: Vec<f32>,
}

impl PreparedCase {
    pub fn new(case: &BenchmarkCase, cfg: &SuiteConfig) -> Result<PreparedCase, Diagnostic> {
        let raw = case.generate()?;
        let transformed = run_pipeline_with(&raw, &cfg.passes, &cfg.registry)
            .map_err(|d| d.errors().next().cloned().unwrap_or_else(|| Diagnostic::error("pipeline-failed", Location::Module, "pipeline failed")))?
            .module;
        let mut module = transformed.clone();
        let mut layouts = Vec::new();
        for spec in &cfg.partitions {
            let (next, layout) = apply_partition(&module, spec)?;
            module = next;
            layouts.push(layout);
        }
        Ok(PreparedCase { case: case.clone(), transformed, module, layouts })
    }

    /// Runs one input set through the partitioned module and compares the
    /// gathered result with the reference model.
    pub fn run_image(&self, inputs: &[Vec<f32>], r: &ResourceModel) -> Result<ImageRun, Diagnostic> {
        let expected = self.case.golden(inputs)?;
        let mut img = build_image(&self.transformed, inputs)?;
        for l in &self.layouts {
            img = reslice_image(&img, l)?;
        }
        let report = count_cycles(&self.module, r, &img)?;
        let mut out = report.output;
        for l in self.layouts.iter().rev() {
            out = gather_image(&out, l)?;
        }
        let actual = out.select(&["retval"]);
        if actual.is_empty() {
            return Err(Diagnostic::error("bad-image", Location::Global("retval".into()), "module has no output global"));
        }
        let mut want = MemoryImage::new();
        want.insert("retval", Bank::from_f32(&expected));
        let cmp = compare_images(&actual, &want, REL_TOL, ABS_TOL)?;
        Ok(ImageRun {
            pass: cmp.pass,
            worst_rel_err: cmp.worst_rel_err,
            cycles: report.total,
            output: actual.get("retval").expect("selected").to_f32(),
            expected,
        })
    }
}

/// Runs one case over `cfg.images` random images (plus a large-magnitude one
/// for softmax). Errors end the case and are recorded in the report.
pub fn run_case(case: &BenchmarkCase, cfg: &SuiteConfig) -> CaseReport {
    let mut rep =
        CaseReport { name: case.name.clone(), pass: false, worst_rel_err: 0.0, cycles: None, images: 0, error: None };
    let prepared = match PreparedCase::new(case, cfg) {
        Ok(p) => p,
        Err(e) => {
            rep.error = Some(e);
            return rep;
        }
    };
    let mut scales = vec![1.0f32; cfg.images];
    if case.is_softmax() {
        scales.push(20.0);
    }
    let mut pass = !scales.is_empty();
    for (k, scale) in scales.into_iter().enumerate() {
        let inputs = case.random_inputs(case_seed(cfg.seed, &case.name, k), scale);
        match prepared.run_image(&inputs, &cfg.resources) {
            Ok(run) => {
                pass &= run.pass;
                rep.worst_rel_err = rep.worst_rel_err.max(run.worst_rel_err);
                rep.cycles.get_or_insert(run.cycles);
                rep.images += 1;
            }
            Err(e) => {
                rep.error = Some(e);
                return rep;
            }
        }
    }
    rep.pass = pass;
    rep
}

/// Runs the given cases concurrently; the report keeps their order.
pub fn run_cases(cases: &[BenchmarkCase], cfg: &SuiteConfig) -> SuiteReport {
    SuiteReport { cases: cases.par_iter().map(|c| run_case(c, cfg)).collect() }
}

/// The fifteen-case suite.
pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    run_cases(&BenchmarkCase::registry(), cfg)
}
