//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use lf_core::bench::{case_seed, run_suite, BenchmarkCase, PreparedCase, Shape, SuiteConfig, ABS_TOL, REGISTRY, REL_TOL};
use lf_core::interp::mif::{bank_from_mif, bank_to_mif, load_mif, store_mif};
use lf_core::interp::{Bank, ScalarKind};
use lf_core::ir::cfg::Cfg;
use lf_core::ir::{parse_module, print_module, GlobalDef, Init, InstKind, IrModule, Type};
use lf_core::partition::{apply_partition, compute_layout, PartitionSpec, Scheme};
use lf_core::sched::{build_dfg, check_schedule, optimal_schedule, schedule_block, schedule_module, ResourceModel};
use lf_core::transform::{restructure_signature, run_pipeline, simplify, PassConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

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

fn restructure_reproduces_listing() -> Outcome {
    let before = parse_module(ALG1).map_err(|e| format!("{e:?}"))?.module;
    let got = restructure_signature(&before).map_err(|e| e.to_string())?;
    let main = got.function("main").ok_or("no @main")?;
    ensure!(main.params.is_empty(), "@main still takes {} arguments", main.params.len());
    let zero_pair = |g: &GlobalDef| g.ty == Type::array(Type::Float, 2) && g.init == Init::Zero;
    ensure!(got.globals.iter().any(zero_pair), "no zero-initialized [2 x float] global");
    let volatile_loads = main.insts().filter(|i| matches!(i.kind, InstKind::Load { volatile: true, .. })).count();
    ensure!(volatile_loads == 2, "{volatile_loads} volatile loads");
    let want = parse_module(ALG2).map_err(|e| format!("{e:?}"))?.module;
    ensure!(got.structurally_eq(&want), "structure differs:\n{}", print_module(&got));
    Ok("zero-argument @main, @arg0 = [2 x float] zeroinitializer, 2 volatile loads".into())
}

fn suite_matches_reference_models() -> Outcome {
    ensure!(REL_TOL == 1e-5 && ABS_TOL == 1e-7, "tolerances changed");
    let report = run_suite(&SuiteConfig::default());
    ensure!(report.cases.len() == 15, "{} cases", report.cases.len());
    for c in &report.cases {
        ensure!(c.pass, "{c} {:?}", c.error);
        ensure!(c.images >= 3, "{} ran {} images", c.name, c.images);
    }
    let worst = report.cases.iter().map(|c| c.worst_rel_err).fold(0.0, f64::max);
    Ok(format!("15/15 cases, worst relative error {worst:e}"))
}

fn outputs_follow_inputs() -> Outcome {
    let cfg = SuiteConfig::default();
    let checked: Result<Vec<()>, String> = REGISTRY
        .par_iter()
        .map(|name| {
            let case = BenchmarkCase::lookup(name).map_err(|e| e.to_string())?;
            let p = PreparedCase::new(&case, &cfg).map_err(|e| e.to_string())?;
            let a = case.random_inputs(case_seed(cfg.seed, name, 0), 1.0);
            let b = case.random_inputs(case_seed(cfg.seed, name, 1), 1.0);
            ensure!(a != b, "{name}: images coincide");
            let ra = p.run_image(&a, &cfg.resources).map_err(|e| e.to_string())?;
            let rb = p.run_image(&b, &cfg.resources).map_err(|e| e.to_string())?;
            ensure!(ra.pass && rb.pass, "{name}: a golden mismatch");
            ensure!(ra.output != rb.output, "{name}: output does not depend on the inputs");
            Ok(())
        })
        .collect();
    checked?;
    Ok("two distinct images per case, each matching its own reference".into())
}

fn unrolled_vecmul() -> Result<IrModule, String> {
    let case = BenchmarkCase::lookup("vecmul_a").map_err(|e| e.to_string())?;
    let out = run_pipeline(&case.generate().map_err(|e| e.to_string())?, &PassConfig::default()).map_err(|e| format!("{e:?}"))?;
    Ok(out.module)
}

fn partitioning_shortens_vecmul() -> Outcome {
    let m = unrolled_vecmul()?;
    let main = m.function("main").ok_or("no @main")?;
    ensure!(main.blocks.len() == 1, "vecmul_a is not straight-line ({} blocks)", main.blocks.len());
    let r = ResourceModel::default();
    let mut spans = Vec::new();
    for f in [1, 2, 4] {
        let mut p = m.clone();
        if f > 1 {
            for a in ["arg0", "arg1", "retval"] {
                p = apply_partition(&p, &PartitionSpec::new(a, Scheme::Cyclic, f)).map_err(|e| e.to_string())?.0;
            }
        }
        let s = schedule_module(&p, &r);
        spans.push(s.blocks.iter().map(|b| b.latency).sum::<u32>());
    }
    ensure!(spans[0] > spans[1] && spans[1] > spans[2], "makespans {spans:?} not strictly decreasing");
    Ok(format!("makespan F=1 {} > F=2 {} > F=4 {}", spans[0], spans[1], spans[2]))
}

fn unrolled_variants_are_faster() -> Outcome {
    let cases: Vec<BenchmarkCase> = ["vecmul_b", "vecmul_b_u", "softmax_b", "softmax_b_u", "conv2d_a", "conv2d_a_u", "maxp_b", "maxp_b_u"]
        .iter()
        .map(|n| BenchmarkCase::lookup(n).unwrap())
        .collect();
    let report = lf_core::bench::run_cases(&cases, &SuiteConfig::default());
    let mut parts = Vec::new();
    for pair in report.cases.chunks(2) {
        let (rolled, unrolled) = (&pair[0], &pair[1]);
        let (a, b) = (rolled.cycles.ok_or("no cycles")?, unrolled.cycles.ok_or("no cycles")?);
        ensure!(b < a, "{} {b} >= {} {a}", unrolled.name, rolled.name);
        parts.push(format!("{} {b} < {a}", unrolled.name));
    }
    Ok(parts.join(", "))
}

fn raised_threshold_speeds_up_conv() -> Outcome {
    let case = BenchmarkCase::new("conv2d_32x32x5", Shape::Conv2d { h: 32, w: 32, channels: 5 }, false).map_err(|e| e.to_string())?;
    let inputs = case.random_inputs(7, 1.0);
    let mut cycles = Vec::new();
    for t in [PassConfig::default().unroll_threshold, 300] {
        let cfg = SuiteConfig { passes: PassConfig::default().with_unroll_threshold(t), ..SuiteConfig::default() };
        let p = PreparedCase::new(&case, &cfg).map_err(|e| e.to_string())?;
        let run = p.run_image(&inputs, &cfg.resources).map_err(|e| e.to_string())?;
        ensure!(run.pass, "threshold {t}: wrong output");
        cycles.push(run.cycles);
    }
    ensure!(cycles[1] < cycles[0], "raised threshold {} >= default {}", cycles[1], cycles[0]);
    Ok(format!("threshold 300: {} < default: {}", cycles[1], cycles[0]))
}

fn bijective(n: u64, spec: &PartitionSpec, seen: &mut Vec<u32>, stamp: u32) -> Result<(), String> {
    let ty = Type::array(Type::Float, n);
    let l = compute_layout(&ty, spec).map_err(|e| format!("{spec} on {n}: {e}"))?;
    let sizes: Vec<usize> = (0..l.banks()).map(|k| l.bank_len(k)).collect();
    ensure!(sizes.iter().sum::<usize>() as u64 == n, "{spec} on {n}: sizes sum to {}", sizes.iter().sum::<usize>());
    let offsets: Vec<usize> = sizes.iter().scan(0, |acc, s| Some(std::mem::replace(acc, *acc + s))).collect();
    seen.resize(n as usize, 0);
    for i in 0..n {
        let (k, off) = l.map(i);
        ensure!(k < sizes.len() && (off as usize) < sizes[k], "{spec} on {n}: {i} maps outside ({k}, {off})");
        let slot = offsets[k] + off as usize;
        ensure!(seen[slot] != stamp, "{spec} on {n}: ({k}, {off}) hit twice");
        seen[slot] = stamp;
        ensure!(l.unmap(k, off) == i, "{spec} on {n}: unmap disagrees at {i}");
    }
    Ok(())
}

fn partition_maps_are_bijections() -> Outcome {
    let checked: Result<Vec<u64>, String> = (1..=4096u64)
        .into_par_iter()
        .map_init(
            || (Vec::new(), 0u32),
            |(seen, stamp), n| {
                let mut count = 0;
                let mut specs = vec![PartitionSpec::complete("a")];
                for f in 2..=n.min(64) {
                    specs.push(PartitionSpec::new("a", Scheme::Block, f));
                    specs.push(PartitionSpec::new("a", Scheme::Cyclic, f));
                }
                for spec in &specs {
                    *stamp += 1;
                    bijective(n, spec, seen, *stamp)?;
                    count += 1;
                }
                Ok(count)
            },
        )
        .collect();
    let layouts: u64 = checked?.iter().sum();
    Ok(format!("{layouts} layouts over N <= 4096"))
}

fn schedules_are_legal_and_optimal() -> Outcome {
    let r = ResourceModel::default();
    let cfg = SuiteConfig::default();
    let mut modules = Vec::new();
    for name in REGISTRY {
        let case = BenchmarkCase::lookup(name).map_err(|e| e.to_string())?;
        modules.push((name.to_string(), PreparedCase::new(&case, &cfg).map_err(|e| e.to_string())?.module));
    }
    let m = unrolled_vecmul()?;
    for f in [2, 4] {
        let mut p = m.clone();
        for a in ["arg0", "arg1", "retval"] {
            p = apply_partition(&p, &PartitionSpec::new(a, Scheme::Cyclic, f)).map_err(|e| e.to_string())?.0;
        }
        modules.push((format!("vecmul_a/cyclic{f}"), p));
    }
    let mut sites = Vec::new();
    for (mi, (_, m)) in modules.iter().enumerate() {
        for (fi, f) in m.functions.iter().enumerate() {
            for bi in 0..f.blocks.len() {
                sites.push((mi, fi, bi));
            }
        }
    }
    let results: Vec<Result<bool, String>> = sites
        .par_iter()
        .map(|&(mi, fi, bi)| {
            let (name, m) = &modules[mi];
            let f = &m.functions[fi];
            let g = build_dfg(m, f, bi, &r);
            let s = schedule_block(&g, &r);
            check_schedule(&g, &s, &r).map_err(|e| format!("{name} %{}: {}", s.block, e.join("; ")))?;
            if g.len() > 64 {
                return Ok(false);
            }
            let best = optimal_schedule(&g, &r, &s, 2_000_000)
                .ok_or_else(|| format!("{name} %{}: exhaustive search exceeded its budget", s.block))?;
            check_schedule(&g, &best, &r).map_err(|e| format!("{name} %{} optimum: {}", s.block, e.join("; ")))?;
            ensure!(best.latency == s.latency, "{name} %{}: list {} vs optimum {}", s.block, s.latency, best.latency);
            Ok(true)
        })
        .collect();
    let mut compared = 0;
    for r in &results {
        if *r.as_ref().map_err(Clone::clone)? {
            compared += 1;
        }
    }
    Ok(format!("{} blocks legal, {compared} small blocks at the optimum", results.len()))
}

fn round_trip(m: &IrModule, what: &str) -> Result<(), String> {
    let text = print_module(m);
    let back = parse_module(&text).map_err(|e| format!("{what}: reparse failed: {e:?}"))?.module;
    ensure!(back.structurally_eq(m), "{what}: reparsed module differs");
    ensure!(print_module(&back) == text, "{what}: printing is not stable");
    Ok(())
}

fn round_trips_are_exact() -> Outcome {
    let mut modules = 0;
    let cfgs = [PassConfig::default(), PassConfig::default().with_unroll_threshold(10_000)];
    for name in REGISTRY.iter().chain(lf_core::bench::EXTENSIONS) {
        let case = BenchmarkCase::lookup(name).map_err(|e| e.to_string())?;
        let raw = case.generate().map_err(|e| e.to_string())?;
        round_trip(&raw, name)?;
        modules += 1;
        for cfg in &cfgs {
            if *name == "conv2d_b" && cfg.unroll_threshold > 150 {
                continue;
            }
            let t = run_pipeline(&raw, cfg).map_err(|e| format!("{e:?}"))?.module;
            round_trip(&t, name)?;
            let (p, _) = apply_partition(&t, &PartitionSpec::new("arg0", Scheme::Cyclic, 2)).map_err(|e| e.to_string())?;
            round_trip(&p, name)?;
            modules += 2;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for width in [1u32, 32, 64] {
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        for len in [0usize, 1, 7, 256] {
            let words: Vec<u64> = (0..len).map(|_| rng.gen::<u64>() & mask).collect();
            let mif = load_mif(&store_mif(&words, width)).map_err(|e| e.to_string())?;
            ensure!(mif.width == width && mif.contents == words, "width {width}, {len} words changed");
        }
    }
    let floats: Vec<f32> = [0.0, -0.0, 1.5, f32::MIN_POSITIVE, f32::INFINITY, f32::NAN, -3.25e-12].to_vec();
    let bank = Bank::from_f32(&floats);
    let back = bank_from_mif(&bank_to_mif(&bank), ScalarKind::F32, Some(floats.len())).map_err(|e| e.to_string())?;
    ensure!(back.to_bits() == bank.to_bits(), "float bank bits changed");
    Ok(format!("{modules} modules; MIF widths 1/32/64 bit-exact"))
}

fn volatile_loads_survive() -> Outcome {
    let fixture = |volatile: &str| {
        format!(
            "@arg0 = global [1 x float] zeroinitializer
define void @main() {{
entry:
  %p = getelementptr inbounds [1 x float]* @arg0, i64 0, i64 0
  %v = load {volatile}float* %p, align 4
  ret void
}}
"
        )
    };
    let loads = |m: &IrModule| m.functions[0].insts().filter(|i| matches!(i.kind, InstKind::Load { .. })).count();
    let kept = simplify(&parse_module(&fixture("volatile ")).map_err(|e| format!("{e:?}"))?.module);
    let dropped = simplify(&parse_module(&fixture("")).map_err(|e| format!("{e:?}"))?.module);
    ensure!(loads(&kept) == 1, "dead volatile load was removed");
    ensure!(loads(&dropped) == 0, "dead plain load survived");
    Ok("volatile load kept, plain load removed".into())
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("1 restructured signature", Duration::from_secs(1), restructure_reproduces_listing),
        ("2 suite oracle", Duration::from_secs(60), suite_matches_reference_models),
        ("3 distinct input images", Duration::from_secs(60), outputs_follow_inputs),
        ("4 partition makespans", Duration::from_secs(1), partitioning_shortens_vecmul),
        ("5 rolled vs unrolled", Duration::from_secs(30), unrolled_variants_are_faster),
        ("6 unroll threshold on conv2d", Duration::from_secs(120), raised_threshold_speeds_up_conv),
        ("7 partition bijection", Duration::from_secs(30), partition_maps_are_bijections),
        ("8 schedule legality and optimality", Duration::from_secs(60), schedules_are_legal_and_optimal),
        ("9 round-trips", Duration::from_secs(10), round_trips_are_exact),
        ("10 volatile safety", Duration::from_secs(1), volatile_loads_survive),
    ];
    let mut failed = Vec::new();
    for (name, budget, check) in criteria {
        let t0 = Instant::now();
        let outcome = check();
        let took = t0.elapsed();
        let outcome = match outcome {
            Ok(d) if took > budget => Err(format!("{d}; took {took:.2?}, budget {budget:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} ({took:.2?}): {detail}"),
            Err(why) => {
                println!("FAIL {name} ({took:.2?}): {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}

#[test]
fn restructured_global_is_the_only_one() {
    let m = restructure_signature(&parse_module(ALG1).unwrap().module).unwrap();
    assert_eq!(m.globals.len(), 1);
    assert_eq!(m.globals[0].name, "arg0");
    assert!(Cfg::new(m.function("main").unwrap()).rpo.len() == 1);
}
