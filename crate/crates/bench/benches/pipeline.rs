use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};

use lf_bench::{raw, transformed};
use lf_core::bench::{run_cases, BenchmarkCase, PreparedCase, SuiteConfig};
use lf_core::partition::{apply_partition, PartitionSpec, Scheme};
use lf_core::sched::{build_dfg, optimal_schedule, schedule_block, schedule_module, ResourceModel};
use lf_core::transform::{run_pipeline, PassConfig};
use lf_core::{parse_module, print_module};

fn ir_text(c: &mut Criterion) {
    let m = transformed("conv2d_a_u");
    let text = print_module(&m);
    let mut g = c.benchmark_group("ir");
    g.bench_function("print/conv2d_a_u", |b| b.iter(|| print_module(&m)));
    g.bench_function("parse/conv2d_a_u", |b| b.iter(|| parse_module(&text).unwrap()));
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    for name in ["vecmul_b", "softmax_b", "conv2d_a", "maxp_b"] {
        let m = raw(name);
        g.bench_with_input(BenchmarkId::new("default", name), &m, |b, m| {
            b.iter(|| run_pipeline(m, &PassConfig::default()).unwrap())
        });
    }
    let conv = raw("conv2d_a");
    let full = PassConfig::default().with_unroll_threshold(100_000);
    g.bench_function("full-unroll/conv2d_a", |b| b.iter(|| run_pipeline(&conv, &full).unwrap()));
    g.finish();
}

fn partition(c: &mut Criterion) {
    let m = transformed("vecmul_b");
    let mut g = c.benchmark_group("partition");
    for f in [2, 4, 16] {
        let spec = PartitionSpec::new("arg0", Scheme::Cyclic, f);
        g.bench_with_input(BenchmarkId::new("cyclic/vecmul_b", f), &spec, |b, s| {
            b.iter(|| apply_partition(&m, s).unwrap())
        });
    }
    g.finish();
}

fn scheduling(c: &mut Criterion) {
    let r = ResourceModel::default();
    let mut g = c.benchmark_group("schedule");
    for name in ["vecmul_b_u", "softmax_b_u", "conv2d_a_u"] {
        let m = transformed(name);
        g.bench_with_input(BenchmarkId::new("list", name), &m, |b, m| b.iter(|| schedule_module(m, &r)));
    }
    let m = transformed("vecmul_a");
    let dfg = build_dfg(&m, &m.functions[0], 0, &r);
    g.bench_function("dfg/vecmul_a", |b| b.iter(|| build_dfg(&m, &m.functions[0], 0, &r)));
    g.bench_function("exhaustive/vecmul_a", |b| {
        b.iter_batched(|| schedule_block(&dfg, &r), |s| optimal_schedule(&dfg, &r, &s, 1_000_000), BatchSize::SmallInput)
    });
    g.finish();
}

fn execution(c: &mut Criterion) {
    let cfg = SuiteConfig::default();
    let mut g = c.benchmark_group("run");
    g.sample_size(20);
    for name in ["dense_b", "conv2d_a", "maxp_b"] {
        let case = BenchmarkCase::lookup(name).unwrap();
        let p = PreparedCase::new(&case, &cfg).unwrap();
        let inputs = case.random_inputs(1, 1.0);
        g.bench_function(name, |b| b.iter(|| p.run_image(&inputs, &cfg.resources).unwrap()));
    }
    let small: Vec<_> = ["vecmul_a", "softmax_a", "maxp_a", "thxprlsg"].iter().map(|n| BenchmarkCase::lookup(n).unwrap()).collect();
    g.bench_function("suite/small", |b| b.iter(|| run_cases(&small, &cfg)));
    g.finish();
}

criterion_group!(benches, ir_text, pipeline, partition, scheduling, execution);
criterion_main!(benches);
