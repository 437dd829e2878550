use lf_core::bench::{run_cases, run_suite, BenchmarkCase, PreparedCase, SuiteConfig, EXTENSIONS, REGISTRY};
use lf_core::ir::{BinOp, InstKind};
use lf_core::partition::PartitionSpec;

#[test]
fn default_suite_passes_every_case() {
    let report = run_suite(&SuiteConfig::default());
    print!("{report}");
    assert_eq!(report.cases.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(), REGISTRY);
    for c in &report.cases {
        assert!(c.pass, "{c} {:?}", c.error);
        assert!(c.images >= 3);
        assert!(c.cycles.is_some());
    }
}

#[test]
fn report_lines_are_stable() {
    let cases = [BenchmarkCase::lookup("vecmul_a").unwrap()];
    let a = run_cases(&cases, &SuiteConfig::default()).to_string();
    let b = run_cases(&cases, &SuiteConfig::default()).to_string();
    assert_eq!(a, b);
    assert!(a.starts_with("case=vecmul_a status=pass worst_rel_err="), "{a}");
    assert!(a.trim_end().split(' ').next_back().unwrap().starts_with("cycles="));
}

#[test]
fn hundred_images_per_small_case() {
    let cfg = SuiteConfig::default();
    for name in REGISTRY.iter().filter(|n| **n != "conv2d_b") {
        let case = BenchmarkCase::lookup(name).unwrap();
        let p = PreparedCase::new(&case, &cfg).unwrap();
        for k in 0..100 {
            let inputs = case.random_inputs(1000 + k, 1.0);
            let run = p.run_image(&inputs, &cfg.resources).unwrap();
            assert!(run.pass, "{name} image {k}: worst {}", run.worst_rel_err);
        }
    }
}

#[test]
fn rolled_and_unrolled_pairs_agree() {
    let cfg = SuiteConfig::default();
    for (rolled, unrolled) in [("vecmul_b", "vecmul_b_u"), ("softmax_b", "softmax_b_u"), ("conv2d_a", "conv2d_a_u"), ("maxp_b", "maxp_b_u")] {
        let r = BenchmarkCase::lookup(rolled).unwrap();
        let u = BenchmarkCase::lookup(unrolled).unwrap();
        assert_eq!(r.input_shapes(), u.input_shapes());
        let (pr, pu) = (PreparedCase::new(&r, &cfg).unwrap(), PreparedCase::new(&u, &cfg).unwrap());
        for seed in 0..5 {
            let inputs = r.random_inputs(seed, 1.0);
            let a = pr.run_image(&inputs, &cfg.resources).unwrap();
            let b = pu.run_image(&inputs, &cfg.resources).unwrap();
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.output), bits(&b.output), "{rolled} vs {unrolled}");
        }
    }
}

#[test]
fn large_softmax_inputs_are_stable() {
    let case = BenchmarkCase::lookup("softmax_b").unwrap();
    let cfg = SuiteConfig::default();
    let p = PreparedCase::new(&case, &cfg).unwrap();
    let run = p.run_image(&case.random_inputs(5, 20.0), &cfg.resources).unwrap();
    assert!(run.pass);
    assert!(run.output.iter().all(|x| x.is_finite()));
}

#[test]
fn broken_pass_fails_only_affected_cases() {
    let mut cfg = SuiteConfig::default();
    // Turns every fmul into fadd: wrong answers for the multiply-based kernels.
    cfg.registry.register("swap_fmul", |m, _| {
        let mut m = m.clone();
        for f in &mut m.functions {
            for b in &mut f.blocks {
                for i in &mut b.insts {
                    if let InstKind::Binary { op, .. } = &mut i.kind {
                        if *op == BinOp::FMul {
                            *op = BinOp::FAdd;
                        }
                    }
                }
            }
        }
        Ok(m)
    });
    cfg.registry.register("reject_scratch", |m, _| {
        if m.global("temp0").is_some() {
            Err(lf_core::Diagnostic::error("fixture", lf_core::Location::Module, "scratch buffers rejected").into())
        } else {
            Ok(m.clone())
        }
    });
    cfg.passes.pipeline.push("swap_fmul".into());
    cfg.passes.pipeline.push("reject_scratch".into());
    let names = ["vecmul_a", "softmax_a", "maxp_a", "thxprlsg"];
    let cases: Vec<_> = names.iter().map(|n| BenchmarkCase::lookup(n).unwrap()).collect();
    let report = run_cases(&cases, &cfg);
    let vm = report.case("vecmul_a").unwrap();
    assert!(!vm.pass && vm.error.is_none(), "{vm}");
    let sm = report.case("softmax_a").unwrap();
    assert!(!sm.pass);
    assert_eq!(sm.error.as_ref().unwrap().code, "fixture");
    assert!(report.case("maxp_a").unwrap().pass);
    assert!(report.case("thxprlsg").unwrap().pass);
}

#[test]
fn suite_passes_with_partitioned_inputs() {
    for spec in ["arg0:cyclic:factor=2", "arg0:block:factor=4", "retval:cyclic:factor=2"] {
        let cfg = SuiteConfig { partitions: vec![spec.parse::<PartitionSpec>().unwrap()], ..SuiteConfig::default() };
        let cases: Vec<_> = REGISTRY
            .iter()
            .filter(|n| !n.starts_with("conv2d_b"))
            .map(|n| BenchmarkCase::lookup(n).unwrap())
            .collect();
        let report = run_cases(&cases, &cfg);
        for c in &report.cases {
            assert!(c.pass, "{spec}: {c} {:?}", c.error);
        }
    }
}

#[test]
fn mlp_extension_passes() {
    let cases: Vec<_> = EXTENSIONS.iter().map(|n| BenchmarkCase::lookup(n).unwrap()).collect();
    let report = run_cases(&cases, &SuiteConfig::default());
    assert!(report.all_pass(), "{report}");
}

#[test]
fn unknown_case_is_an_error() {
    assert_eq!(BenchmarkCase::lookup("lenet").unwrap_err().code, "unknown-benchmark");
}
