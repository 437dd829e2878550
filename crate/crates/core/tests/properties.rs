use proptest::prelude::*;

use lf_core::bench::{BenchmarkCase, PreparedCase, Shape, SuiteConfig};
use lf_core::interp::{Bank, MemoryImage};
use lf_core::ir::{parse_module, print_module, Type};
use lf_core::partition::{compute_layout, gather_image, reslice_image, PartitionSpec, Scheme};
use lf_core::sched::{build_dfg, check_schedule, lower_bound, schedule_block, OpClass, ResourceModel};
use lf_core::transform::{run_pipeline, simplify, PassConfig};

fn shape() -> impl Strategy<Value = (Shape, bool)> {
    let s = prop_oneof![
        (1usize..12).prop_map(|n| Shape::VecMul { n }),
        (1usize..6, 1usize..6, any::<bool>()).prop_map(|(inputs, outputs, relu)| Shape::Dense { inputs, outputs, relu }),
        (1usize..10).prop_map(|n| Shape::Softmax { n }),
        (3usize..6, 3usize..6, 1usize..3).prop_map(|(h, w, channels)| Shape::Conv2d { h, w, channels }),
        (1usize..4, 1usize..4).prop_map(|(h, w)| Shape::MaxPool { h: 2 * h, w: 2 * w }),
        (1usize..10).prop_map(|n| Shape::Mix { n }),
    ];
    (s, any::<bool>())
}

fn scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::Block), Just(Scheme::Cyclic), Just(Scheme::Complete)]
}

fn resources() -> impl Strategy<Value = ResourceModel> {
    (1u32..4, 0u32..4, 1u32..8, 1u32..6, 1u32..4).prop_map(|(ports, load, fadd, fmul, chain)| {
        let mut r = ResourceModel::default()
            .with_ports(ports)
            .with_latency(OpClass::Load, load)
            .with_latency(OpClass::FAdd, fadd)
            .with_latency(OpClass::FMul, fmul);
        r.max_chain = chain;
        r
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_and_transformed_modules_round_trip((s, u) in shape(), threshold in 0u64..400) {
        let case = BenchmarkCase::new("p", s, u).unwrap();
        let raw = case.generate().unwrap();
        let t = run_pipeline(&raw, &PassConfig::default().with_unroll_threshold(threshold)).unwrap().module;
        for m in [raw, t] {
            let text = print_module(&m);
            let back = parse_module(&text).unwrap().module;
            prop_assert!(back.structurally_eq(&m));
            prop_assert_eq!(print_module(&back), text);
        }
    }

    #[test]
    fn transformed_kernels_match_reference((s, u) in shape(), threshold in 0u64..400, seed in any::<u64>()) {
        let case = BenchmarkCase::new("p", s, u).unwrap();
        let cfg = SuiteConfig { passes: PassConfig::default().with_unroll_threshold(threshold), ..SuiteConfig::default() };
        let p = PreparedCase::new(&case, &cfg).unwrap();
        let run = p.run_image(&case.random_inputs(seed, 1.0), &cfg.resources).unwrap();
        prop_assert!(run.pass, "worst {}", run.worst_rel_err);
    }

    #[test]
    fn partitioning_preserves_results((s, u) in shape(), sc in scheme(), factor in 2u64..6, seed in any::<u64>(), target in 0usize..2) {
        let case = BenchmarkCase::new("p", s, u).unwrap();
        let array = if target == 0 { "arg0" } else { "retval" };
        let dims = if target == 0 { case.input_shapes()[0].clone() } else { case.output_shape() };
        let factor = factor.min(dims[0] as u64);
        prop_assume!(sc == Scheme::Complete || factor >= 2);
        let spec = PartitionSpec::new(array, sc, factor);
        let cfg = SuiteConfig { partitions: vec![spec], ..SuiteConfig::default() };
        let p = PreparedCase::new(&case, &cfg).unwrap();
        let run = p.run_image(&case.random_inputs(seed, 1.0), &cfg.resources).unwrap();
        prop_assert!(run.pass, "worst {}", run.worst_rel_err);
    }

    #[test]
    fn reslice_then_gather_is_identity(dims in prop::collection::vec(1u64..6, 1..4), sc in scheme(), factor in 2u64..6, dim in 0usize..3) {
        let dim = dim % dims.len();
        let factor = factor.min(dims[dim]);
        prop_assume!(sc == Scheme::Complete || factor >= 2);
        let ty = Type::nested_array(Type::Float, &dims);
        let layout = compute_layout(&ty, &PartitionSpec::new("a", sc, factor).on_dim(dim)).unwrap();
        let n: u64 = dims.iter().product();
        let mut img = MemoryImage::new();
        img.insert("a", Bank::from_f32(&(0..n).map(|i| i as f32).collect::<Vec<_>>()));
        let split = reslice_image(&img, &layout).unwrap();
        prop_assert_eq!(split.len(), layout.banks());
        prop_assert_eq!(gather_image(&split, &layout).unwrap(), img);
    }

    #[test]
    fn schedules_are_legal_under_any_resources((s, u) in shape(), r in resources()) {
        let case = BenchmarkCase::new("p", s, u).unwrap();
        let m = run_pipeline(&case.generate().unwrap(), &PassConfig::default()).unwrap().module;
        for f in &m.functions {
            for bi in 0..f.blocks.len() {
                let g = build_dfg(&m, f, bi, &r);
                let sched = schedule_block(&g, &r);
                prop_assert!(check_schedule(&g, &sched, &r).is_ok());
                prop_assert!(sched.latency >= lower_bound(&g));
            }
        }
    }

    #[test]
    fn simplify_is_idempotent((s, u) in shape(), threshold in 0u64..400) {
        let case = BenchmarkCase::new("p", s, u).unwrap();
        let m = run_pipeline(&case.generate().unwrap(), &PassConfig::default().with_unroll_threshold(threshold)).unwrap().module;
        let once = simplify(&m);
        prop_assert_eq!(simplify(&once), once);
    }
}
