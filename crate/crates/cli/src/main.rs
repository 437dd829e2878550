mod mem;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lf_core::bench::{run_cases, BenchmarkCase, SuiteConfig, EXTENSIONS, REGISTRY};
use lf_core::interp::mif::MifError;
use lf_core::interp::run_entry;
use lf_core::ir::SourceMap;
use lf_core::partition::{apply_partition, reslice_image, BankLayout, PartitionSpec};
use lf_core::sched::{count_cycles, render_gantt, render_report, OpClass, ResourceModel};
use lf_core::transform::{check_legality, run_pipeline, written_globals, PassConfig};
use lf_core::{parse_module, print_module, validate, Diagnostic, Diagnostics, IrModule, Location, MemoryImage};

#[derive(Parser)]
#[command(name = "lf", version, about = "Tensor-kernel IR to hardware-schedule toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate and check that the kernel can become hardware.
    Check { input: PathBuf },
    /// Run the pass pipeline and emit the transformed IR.
    Transform {
        input: PathBuf,
        #[command(flatten)]
        passes: PassArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split arrays into memory banks and emit the rewritten IR.
    Partition {
        input: PathBuf,
        #[command(flatten)]
        partitions: PartitionArgs,
        /// Run the pass pipeline first.
        #[arg(long)]
        transform: bool,
        #[command(flatten)]
        passes: PassArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// MIF inputs to reslice into per-bank files (needs --emit-mem).
        #[arg(long, requires = "emit_mem")]
        mem: Option<PathBuf>,
        #[arg(long)]
        emit_mem: Option<PathBuf>,
    },
    /// Schedule every block and count cycles over one execution.
    Schedule {
        input: PathBuf,
        /// Run the pass pipeline first.
        #[arg(long)]
        transform: bool,
        #[command(flatten)]
        passes: PassArgs,
        #[command(flatten)]
        partitions: PartitionArgs,
        #[command(flatten)]
        resources: ResourceArgs,
        #[arg(long)]
        mem: Option<PathBuf>,
        /// Print a per-block Gantt chart.
        #[arg(long)]
        gantt: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Interpret the kernel on MIF inputs and write the outputs as MIF.
    Run {
        input: PathBuf,
        #[arg(long)]
        mem: Option<PathBuf>,
        #[arg(long)]
        emit_mem: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write a benchmark kernel in its original five-argument form.
    Generate {
        case: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the benchmark suite: reference check and cycle count per case.
    Bench {
        /// Cases to run (default: the fifteen registry cases).
        #[arg(long = "case")]
        cases: Vec<String>,
        /// Also run the extension cases.
        #[arg(long)]
        extensions: bool,
        #[arg(long, default_value_t = 3)]
        images: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        passes: PassArgs,
        #[command(flatten)]
        partitions: PartitionArgs,
        #[command(flatten)]
        resources: ResourceArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args, Default)]
struct PassArgs {
    #[arg(long)]
    unroll_threshold: Option<u64>,
    #[arg(long)]
    inline_threshold: Option<u64>,
    /// Skip a pass (repeatable).
    #[arg(long = "deny")]
    deny: Vec<String>,
}

impl PassArgs {
    fn config(&self) -> PassConfig {
        let mut c = PassConfig::default();
        if let Some(t) = self.unroll_threshold {
            c.unroll_threshold = t;
        }
        if let Some(t) = self.inline_threshold {
            c.inline_threshold = t;
        }
        c.denylist.extend(self.deny.iter().cloned());
        c
    }
}

#[derive(Args, Default)]
struct PartitionArgs {
    /// `array:block|cyclic|complete[:factor=F][:dim=D]` (repeatable).
    #[arg(long = "partition", value_parser = parse_partition)]
    specs: Vec<PartitionSpec>,
}

fn parse_partition(s: &str) -> Result<PartitionSpec, String> {
    s.parse().map_err(|e: Diagnostic| e.message)
}

#[derive(Args, Default)]
struct ResourceArgs {
    /// Accesses per memory bank per cycle.
    #[arg(long)]
    ports: Option<u32>,
    /// Latency override `class=cycles` (repeatable).
    #[arg(long = "lat", value_parser = parse_lat)]
    lat: Vec<(OpClass, u32)>,
}

fn parse_lat(s: &str) -> Result<(OpClass, u32), String> {
    let (c, n) = s.split_once('=').ok_or_else(|| format!("expected class=cycles, got `{s}`"))?;
    Ok((c.parse()?, n.parse().map_err(|_| format!("`{n}` is not a cycle count"))?))
}

impl ResourceArgs {
    fn model(&self) -> ResourceModel {
        let mut r = ResourceModel::default();
        if let Some(p) = self.ports {
            r = r.with_ports(p);
        }
        for &(c, n) in &self.lat {
            r = r.with_latency(c, n);
        }
        r
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

pub enum Failure {
    Diags(Diagnostics, Option<Box<SourceMap>>),
    Mif(String, MifError),
    Io(String),
}

impl Failure {
    pub fn diag(d: Diagnostic) -> Failure {
        Failure::Diags(d.into(), None)
    }
}

fn print_diag(file: &str, map: Option<&SourceMap>, d: &Diagnostic) {
    let line = match (&d.location, map) {
        (Location::Source { line, .. }, _) => Some(*line),
        (loc, Some(m)) => m.line_of(loc),
        _ => None,
    };
    let sev = d.severity;
    match (line, &d.location) {
        (Some(l), _) => eprintln!("{file}:{l}: {sev}: {} [{}]", d.message, d.code),
        (None, Location::Module) => eprintln!("{file}: {sev}: {} [{}]", d.message, d.code),
        (None, loc) => eprintln!("{file}: {sev}: {loc}: {} [{}]", d.message, d.code),
    }
}

struct Loaded {
    module: IrModule,
    map: SourceMap,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{file}: {e}")))?;
    let parsed = parse_module(&text).map_err(|d| Failure::Diags(d, None))?;
    for w in parsed.warnings.iter() {
        print_diag(&file, Some(&parsed.source_map), w);
    }
    let d = validate(&parsed.module);
    if d.has_errors() {
        return Err(Failure::Diags(d, Some(Box::new(parsed.source_map))));
    }
    Ok(Loaded { module: parsed.module, map: parsed.source_map })
}

fn transform(m: &IrModule, cfg: &PassConfig, file: &str) -> Result<IrModule, Failure> {
    let out = run_pipeline(m, cfg).map_err(|d| Failure::Diags(d, None))?;
    for w in out.warnings.iter() {
        print_diag(file, None, w);
    }
    Ok(out.module)
}

fn partition(m: IrModule, specs: &[PartitionSpec]) -> Result<(IrModule, Vec<BankLayout>), Failure> {
    let mut m = m;
    let mut layouts = Vec::new();
    for s in specs {
        let (next, l) = apply_partition(&m, s).map_err(Failure::diag)?;
        m = next;
        layouts.push(l);
    }
    Ok((m, layouts))
}

fn require_standalone(m: &IrModule) -> Result<(), Failure> {
    let entry = m.entry_name().ok_or_else(|| Failure::diag(Diagnostic::error("no-entry", Location::Module, "module defines no functions")))?;
    let f = m.function(entry).expect("entry exists");
    if !f.params.is_empty() {
        return Err(Failure::diag(Diagnostic::error(
            "not-standalone",
            Location::Function(entry.to_string()),
            format!("@{entry} still takes arguments; transform it first (or pass --transform)"),
        )));
    }
    Ok(())
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Image for `m` loaded from `dir`, resliced through `layouts`.
fn input_image(m: &IrModule, dir: Option<&Path>, layouts: &[BankLayout]) -> Result<MemoryImage, Failure> {
    let mut img = mem::load_image(m, dir)?;
    for l in layouts {
        img = reslice_image(&img, l).map_err(Failure::diag)?;
    }
    Ok(img)
}

fn execute(cmd: Command) -> Result<bool, (String, Failure)> {
    let file_of = |p: &Path| p.display().to_string();
    match cmd {
        Command::Check { input } => {
            let file = file_of(&input);
            let l = load(&input).map_err(|e| (file.clone(), e))?;
            let d = check_legality(&l.module);
            if d.has_errors() {
                return Err((file, Failure::Diags(d, Some(Box::new(l.map)))));
            }
            println!("{file}: ok ({} functions, {} instructions)", l.module.functions.len(), l.module.inst_count());
            Ok(true)
        }
        Command::Transform { input, passes, output } => {
            let file = file_of(&input);
            let run = || -> Result<(), Failure> {
                let l = load(&input)?;
                let m = transform(&l.module, &passes.config(), &file)?;
                emit(&print_module(&m), output.as_deref())
            };
            run().map_err(|e| (file.clone(), e))?;
            Ok(true)
        }
        Command::Partition { input, partitions, transform: pre, passes, output, mem, emit_mem } => {
            let file = file_of(&input);
            let run = || -> Result<(), Failure> {
                let l = load(&input)?;
                let base = if pre { transform(&l.module, &passes.config(), &file)? } else { l.module };
                let (m, layouts) = partition(base.clone(), &partitions.specs)?;
                if let Some(out_dir) = &emit_mem {
                    let img = input_image(&base, mem.as_deref(), &layouts)?;
                    let names: Vec<String> = m.globals.iter().map(|g| g.name.clone()).collect();
                    mem::store_image(&img, &names, out_dir)?;
                }
                emit(&print_module(&m), output.as_deref())?;
                if output.is_some() {
                    for l in &layouts {
                        let sizes: Vec<String> = l.sizes.iter().map(u64::to_string).collect();
                        println!(
                            "partition array={} scheme={} dim={} banks={} sizes={}",
                            l.array,
                            l.scheme,
                            l.dim,
                            l.banks(),
                            sizes.join(",")
                        );
                    }
                }
                Ok(())
            };
            run().map_err(|e| (file.clone(), e))?;
            Ok(true)
        }
        Command::Schedule { input, transform: pre, passes, partitions, resources, mem, gantt, format } => {
            let file = file_of(&input);
            let run = || -> Result<(), Failure> {
                let l = load(&input)?;
                let base = if pre { transform(&l.module, &passes.config(), &file)? } else { l.module };
                require_standalone(&base)?;
                let (m, layouts) = partition(base.clone(), &partitions.specs)?;
                let img = input_image(&base, mem.as_deref(), &layouts)?;
                let r = resources.model();
                let c = count_cycles(&m, &r, &img).map_err(Failure::diag)?;
                let mut out = String::new();
                match format {
                    Format::Machine => out.push_str(&render_report(&c.schedule)),
                    Format::Text => {
                        for b in &c.schedule.blocks {
                            let visits = c.trace.visits_of(&b.function, &b.block);
                            let _ = writeln!(out, "@{} %{} latency={} visits={visits}", b.function, b.block, b.latency);
                        }
                        if gantt {
                            out.push_str(&render_gantt(&m, &c.schedule));
                        }
                        let _ = writeln!(out, "cycles total={}", c.total);
                    }
                }
                if format == Format::Machine && gantt {
                    out.push_str(&render_gantt(&m, &c.schedule));
                }
                emit(&out, None)
            };
            run().map_err(|e| (file.clone(), e))?;
            Ok(true)
        }
        Command::Run { input, mem, emit_mem, format } => {
            let file = file_of(&input);
            let run = || -> Result<(), Failure> {
                let l = load(&input)?;
                require_standalone(&l.module)?;
                let img = mem::load_image(&l.module, mem.as_deref())?;
                let (after, trace) = run_entry(&l.module, &img).map_err(Failure::diag)?;
                let outputs: Vec<String> = written_globals(&l.module).into_iter().collect();
                let mut out = String::new();
                match format {
                    Format::Text => {
                        let _ = writeln!(out, "ran {} instructions, {} branches", trace.steps, trace.branches);
                    }
                    Format::Machine => {
                        let _ = writeln!(out, "run steps={} branches={}", trace.steps, trace.branches);
                    }
                }
                if let Some(dir) = &emit_mem {
                    for p in mem::store_image(&after, &outputs, dir)? {
                        let _ = writeln!(out, "wrote {p}");
                    }
                } else {
                    for name in &outputs {
                        let Some(bank) = after.get(name) else { continue };
                        match format {
                            Format::Text => {
                                let vals: Vec<String> = bank.data.iter().map(|w| w.as_f32().map_or_else(|| w.to_string(), |x| x.to_string())).collect();
                                let _ = writeln!(out, "@{name} = [{}]", vals.join(", "));
                            }
                            Format::Machine => {
                                for (i, b) in bank.to_bits().iter().enumerate() {
                                    let _ = writeln!(out, "mem global={name} index={i} bits={b:#x}");
                                }
                            }
                        }
                    }
                }
                emit(&out, None)
            };
            run().map_err(|e| (file.clone(), e))?;
            Ok(true)
        }
        Command::Generate { case, output } => {
            let run = || -> Result<(), Failure> {
                let m = BenchmarkCase::lookup(&case).and_then(|c| c.generate()).map_err(Failure::diag)?;
                emit(&print_module(&m), output.as_deref())
            };
            run().map_err(|e| (case.clone(), e))?;
            Ok(true)
        }
        Command::Bench { cases, extensions, images, seed, passes, partitions, resources, format } => {
            let mut names: Vec<String> = if cases.is_empty() { REGISTRY.iter().map(|s| s.to_string()).collect() } else { cases };
            if extensions {
                names.extend(EXTENSIONS.iter().map(|s| s.to_string()));
            }
            let list = names
                .iter()
                .map(|n| BenchmarkCase::lookup(n))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ("bench".to_string(), Failure::diag(e)))?;
            let cfg = SuiteConfig {
                passes: passes.config(),
                resources: resources.model(),
                partitions: partitions.specs,
                images,
                seed,
                ..SuiteConfig::default()
            };
            let report = run_cases(&list, &cfg);
            print!("{report}");
            for c in &report.cases {
                if let Some(e) = &c.error {
                    eprintln!("bench: error: case {}: {e}", c.name);
                }
            }
            if format == Format::Text {
                println!("passed {}/{}", report.passed(), report.cases.len());
            }
            Ok(report.all_pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err((file, f)) => {
            match f {
                Failure::Diags(d, map) => {
                    for x in d.iter() {
                        print_diag(&file, map.as_deref(), x);
                    }
                }
                Failure::Mif(path, e) => {
                    let msg = e.to_string();
                    let msg = msg.split_once(": ").map_or(msg.as_str(), |(_, m)| m).to_string();
                    eprintln!("{path}:{}: error: {msg}", e.line());
                }
                Failure::Io(msg) => eprintln!("lf: error: {msg}"),
            }
            ExitCode::from(1)
        }
    }
}
