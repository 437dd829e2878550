//! Kernel generators. Every kernel is written once over `repeat`, which
//! emits a counted loop or, for the pre-unrolled variants, straight-line
//! copies with constant indices.

use super::{BenchmarkCase, Shape};
use crate::ir::builder::FunctionBuilder;
use crate::ir::{BinOp, FloatPred, Function, InstKind, IntPred, IrModule, Operand, Param, Type};

struct Gen {
    b: FunctionBuilder,
    unrolled: bool,
}

impl Gen {
    fn repeat(
        &mut self,
        hint: &str,
        n: usize,
        carried: Vec<Operand>,
        mut body: impl FnMut(&mut Gen, &Operand, &[Operand]) -> Vec<Operand>,
    ) -> Vec<Operand> {
        if self.unrolled {
            let mut c = carried;
            for i in 0..n {
                c = body(self, &Operand::i64(i as i64), &c);
            }
            c
        } else {
            let unrolled = self.unrolled;
            let mut b = std::mem::replace(&mut self.b, FunctionBuilder::new("", Type::Void, vec![]));
            let out = b.counted_loop(hint, n as i64, &carried, |b, iv, c| {
                let mut inner = Gen { b: std::mem::replace(b, FunctionBuilder::new("", Type::Void, vec![])), unrolled };
                let next = body(&mut inner, iv, c);
                *b = inner.b;
                next
            });
            self.b = b;
            out
        }
    }

    fn at(&mut self, base: &Operand, idx: &[Operand]) -> Operand {
        self.b.elem_ptr(base, idx)
    }

    fn read(&mut self, base: &Operand, idx: &[Operand]) -> Operand {
        let p = self.at(base, idx);
        self.b.load(&p)
    }

    fn write(&mut self, base: &Operand, idx: &[Operand], v: &Operand) {
        let p = self.at(base, idx);
        self.b.store(v, &p);
    }

    fn f(&mut self, op: BinOp, x: &Operand, y: &Operand) -> Operand {
        self.b.bin(op, x, y)
    }

    fn relu(&mut self, x: &Operand) -> Operand {
        let zero = Operand::f32(0.0);
        let pos = self.b.fcmp(FloatPred::Ogt, x, &zero);
        self.b.select(&pos, x, &zero)
    }

    fn call(&mut self, name: &str, args: &[Operand]) -> Operand {
        self.b.call(name, Type::Float, args)
    }
}

fn i8p() -> Type {
    Type::ptr(Type::Int(8))
}

/// Builds `@main` in the five-argument calling convention. Input buffers are
/// reached through `%params`, scratch buffers through `%temps`, the result
/// through `%retval`.
fn xla_main(inputs: &[Type], temps: &[Type], out: &Type, unrolled: bool, body: impl FnOnce(&mut Gen, &[Operand], &[Operand], &Operand)) -> Function {
    let params = vec![
        Param { name: "retval".into(), ty: i8p() },
        Param { name: "run_options".into(), ty: i8p() },
        Param { name: "params".into(), ty: Type::ptr(i8p()) },
        Param { name: "temps".into(), ty: Type::ptr(i8p()) },
        Param { name: "prof_counters".into(), ty: Type::ptr(Type::i64()) },
    ];
    let mut g = Gen { b: FunctionBuilder::new("main", Type::Void, params), unrolled };
    let table = |g: &mut Gen, name: &str, k: usize| {
        let base = Operand::local(Type::ptr(i8p()), name);
        if k == 0 {
            base
        } else {
            g.b.push(InstKind::Gep { inbounds: true, base, indices: vec![Operand::i64(k as i64)] })
        }
    };
    let mut args = Vec::new();
    for (k, ty) in inputs.iter().enumerate() {
        let slot = table(&mut g, "params", k);
        let typed = g.b.cast(crate::ir::CastOp::Bitcast, &slot, Type::ptr(Type::ptr(ty.clone())));
        args.push(g.b.push(InstKind::Load { volatile: false, ptr: typed, align: Some(8) }));
    }
    let mut scratch = Vec::new();
    for (k, ty) in temps.iter().enumerate() {
        let slot = table(&mut g, "temps", k);
        let raw = g.b.push(InstKind::Load { volatile: false, ptr: slot, align: Some(8) });
        scratch.push(g.b.cast(crate::ir::CastOp::Bitcast, &raw, Type::ptr(ty.clone())));
    }
    let rv = Operand::local(i8p(), "retval");
    let out = g.b.cast(crate::ir::CastOp::Bitcast, &rv, Type::ptr(out.clone()));
    body(&mut g, &args, &scratch, &out);
    g.b.ret_void();
    g.b.finish()
}

fn arr(dims: &[usize]) -> Type {
    Type::nested_array(Type::Float, &dims.iter().map(|&d| d as u64).collect::<Vec<_>>())
}

pub(super) fn generate(case: &BenchmarkCase) -> IrModule {
    let u = case.unrolled;
    let main = match case.shape {
        Shape::VecMul { n } => xla_main(&[arr(&[n]), arr(&[n])], &[], &arr(&[n]), u, |g, a, _, out| {
            g.repeat("i", n, vec![], |g, i, _| {
                let x = g.read(&a[0], std::slice::from_ref(i));
                let y = g.read(&a[1], std::slice::from_ref(i));
                let p = g.f(BinOp::FMul, &x, &y);
                g.write(out, std::slice::from_ref(i), &p);
                vec![]
            });
        }),
        Shape::Dense { inputs, outputs, relu } => {
            xla_main(&[arr(&[inputs]), arr(&[inputs, outputs]), arr(&[outputs])], &[], &arr(&[outputs]), u, |g, a, _, out| {
                dense(g, &a[0], &a[1], &a[2], out, inputs, outputs, relu);
            })
        }
        Shape::Softmax { n } => xla_main(&[arr(&[n])], &[arr(&[n])], &arr(&[n]), u, |g, a, t, out| {
            softmax(g, &a[0], &t[0], out, n);
        }),
        Shape::Conv2d { h, w, channels } => {
            xla_main(&[arr(&[h, w]), arr(&[3, 3, channels])], &[], &arr(&[h, w, channels]), u, |g, a, _, out| {
                conv2d(g, &a[0], &a[1], out, h, w, channels);
            })
        }
        Shape::MaxPool { h, w } => xla_main(&[arr(&[h, w])], &[], &arr(&[h / 2, w / 2]), u, |g, a, _, out| {
            maxpool(g, &a[0], out, h, w);
        }),
        Shape::Mix { n } => xla_main(&[arr(&[n])], &[], &arr(&[n]), u, |g, a, _, out| {
            g.repeat("i", n, vec![], |g, i, _| {
                let x = g.read(&a[0], std::slice::from_ref(i));
                let t = g.call("tanhf", &[x]);
                let e = g.call("expf", &[t]);
                let r = g.relu(&e);
                let neg = g.f(BinOp::FSub, &Operand::f32(0.0), &r);
                let d = g.call("expf", &[neg]);
                let den = g.f(BinOp::FAdd, &Operand::f32(1.0), &d);
                let s = g.f(BinOp::FDiv, &Operand::f32(1.0), &den);
                g.write(out, std::slice::from_ref(i), &s);
                vec![]
            });
        }),
        Shape::Mlp { inputs, outputs } => xla_main(
            &[arr(&[inputs]), arr(&[inputs, outputs]), arr(&[outputs])],
            &[arr(&[outputs]), arr(&[outputs])],
            &arr(&[outputs]),
            u,
            |g, a, t, out| {
                dense(g, &a[0], &a[1], &a[2], &t[0], inputs, outputs, false);
                softmax(g, &t[0], &t[1], out, outputs);
            },
        ),
    };
    IrModule { functions: vec![main], ..Default::default() }
}

#[allow(clippy::too_many_arguments)]
fn dense(g: &mut Gen, x: &Operand, wt: &Operand, bias: &Operand, out: &Operand, inputs: usize, outputs: usize, relu: bool) {
    g.repeat("j", outputs, vec![], |g, j, _| {
        let acc = g.repeat("i", inputs, vec![Operand::f32(0.0)], |g, i, acc| {
            let xv = g.read(x, std::slice::from_ref(i));
            let wv = g.read(wt, &[i.clone(), j.clone()]);
            let p = g.f(BinOp::FMul, &xv, &wv);
            vec![g.f(BinOp::FAdd, &acc[0], &p)]
        });
        let bv = g.read(bias, std::slice::from_ref(j));
        let mut z = g.f(BinOp::FAdd, &acc[0], &bv);
        if relu {
            z = g.relu(&z);
        }
        g.write(out, std::slice::from_ref(j), &z);
        vec![]
    });
}

fn softmax(g: &mut Gen, x: &Operand, e: &Operand, out: &Operand, n: usize) {
    let m = g.repeat("max", n, vec![Operand::f32(f32::NEG_INFINITY)], |g, i, m| {
        let v = g.read(x, std::slice::from_ref(i));
        vec![g.call("llvm.maxnum.f32", &[m[0].clone(), v])]
    });
    let sum = g.repeat("exp", n, vec![Operand::f32(0.0)], |g, i, s| {
        let v = g.read(x, std::slice::from_ref(i));
        let d = g.f(BinOp::FSub, &v, &m[0]);
        let ev = g.call("expf", &[d]);
        g.write(e, std::slice::from_ref(i), &ev);
        vec![g.f(BinOp::FAdd, &s[0], &ev)]
    });
    g.repeat("norm", n, vec![], |g, i, _| {
        let v = g.read(e, std::slice::from_ref(i));
        let q = g.f(BinOp::FDiv, &v, &sum[0]);
        g.write(out, std::slice::from_ref(i), &q);
        vec![]
    });
}

/// 3x3 SAME convolution, output `[h][w][channels]`.
fn conv2d(g: &mut Gen, img: &Operand, filt: &Operand, out: &Operand, h: usize, w: usize, channels: usize) {
    g.repeat("y", h, vec![], |g, y, _| {
        g.repeat("x", w, vec![], |g, x, _| {
            g.repeat("k", channels, vec![], |g, k, _| {
                let acc = g.repeat("ky", 3, vec![Operand::f32(0.0)], |g, ky, acc| {
                    g.repeat("kx", 3, acc.to_vec(), |g, kx, acc| vec![conv_tap(g, img, filt, y, x, k, ky, kx, &acc[0], h, w)])
                });
                g.write(out, &[y.clone(), x.clone(), k.clone()], &acc[0]);
                vec![]
            });
            vec![]
        });
        vec![]
    });
}

/// One filter tap. Taps that fall into the zero padding contribute nothing;
/// statically known ones are dropped, dynamic ones branch around the load.
#[allow(clippy::too_many_arguments)]
fn conv_tap(
    g: &mut Gen,
    img: &Operand,
    filt: &Operand,
    y: &Operand,
    x: &Operand,
    k: &Operand,
    ky: &Operand,
    kx: &Operand,
    acc: &Operand,
    h: usize,
    w: usize,
) -> Operand {
    let mac = |g: &mut Gen, iy: &Operand, ix: &Operand| {
        let v = g.read(img, &[iy.clone(), ix.clone()]);
        let f = g.read(filt, &[ky.clone(), kx.clone(), k.clone()]);
        let p = g.f(BinOp::FMul, &v, &f);
        g.f(BinOp::FAdd, acc, &p)
    };
    if let (Some(yv), Some(xv), Some(kyv), Some(kxv)) = (y.const_int(), x.const_int(), ky.const_int(), kx.const_int()) {
        let (iy, ix) = (yv + kyv - 1, xv + kxv - 1);
        if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
            return acc.clone();
        }
        return mac(g, &Operand::i64(iy), &Operand::i64(ix));
    }
    let off = |g: &mut Gen, a: &Operand, b: &Operand| {
        let s = g.f(BinOp::Add, a, b);
        g.f(BinOp::Add, &s, &Operand::i64(-1))
    };
    let iy = off(g, y, ky);
    let ix = off(g, x, kx);
    let mut inb: Option<Operand> = None;
    for (v, lim) in [(&iy, h), (&ix, w)] {
        let lo = g.b.icmp(IntPred::Sge, v, &Operand::i64(0));
        let hi = g.b.icmp(IntPred::Slt, v, &Operand::i64(lim as i64));
        for c in [lo, hi] {
            inb = Some(match inb {
                None => c,
                Some(prev) => g.b.select(&prev, &c, &Operand::bool(false)),
            });
        }
    }
    let tap = g.b.fresh_label("tap");
    let join = g.b.fresh_label("join");
    g.b.new_block(&tap);
    g.b.new_block(&join);
    let from = g.b.current_label();
    g.b.cond_br(&inb.expect("bounds test"), &tap, &join);
    g.b.switch_to(&tap);
    let sum = mac(g, &iy, &ix);
    g.b.br(&join);
    let tap_end = g.b.current_label();
    g.b.switch_to(&join);
    g.b.push(InstKind::Phi {
        ty: Type::Float,
        incoming: vec![(sum, tap_end), (Operand::new(Type::Float, acc.value.clone()), from)],
    })
}

/// 2x2 max pooling with stride 2.
fn maxpool(g: &mut Gen, img: &Operand, out: &Operand, h: usize, w: usize) {
    g.repeat("oy", h / 2, vec![], |g, oy, _| {
        g.repeat("ox", w / 2, vec![], |g, ox, _| {
            let m = g.repeat("dy", 2, vec![Operand::f32(f32::NEG_INFINITY)], |g, dy, m| {
                g.repeat("dx", 2, m.to_vec(), |g, dx, m| {
                    let iy = twice_plus(g, oy, dy);
                    let ix = twice_plus(g, ox, dx);
                    let v = g.read(img, &[iy, ix]);
                    let gt = g.b.fcmp(FloatPred::Ogt, &v, &m[0]);
                    vec![g.b.select(&gt, &v, &m[0])]
                })
            });
            g.write(out, &[oy.clone(), ox.clone()], &m[0]);
            vec![]
        });
        vec![]
    });
}

fn twice_plus(g: &mut Gen, o: &Operand, d: &Operand) -> Operand {
    match (o.const_int(), d.const_int()) {
        (Some(a), Some(b)) => Operand::i64(2 * a + b),
        _ => {
            let t = g.f(BinOp::Mul, o, &Operand::i64(2));
            g.f(BinOp::Add, &t, d)
        }
    }
}
