//! Programmatic construction of functions, used by the benchmark
//! generators and by tests.

use super::*;

pub struct FunctionBuilder {
    func: Function,
    cur: usize,
    next_value: usize,
    next_label: usize,
}

impl FunctionBuilder {
    pub fn new(name: &str, ret: Type, params: Vec<Param>) -> Self {
        let func = Function { name: name.to_string(), ret, params, blocks: vec![Block::new("entry")] };
        FunctionBuilder { func, cur: 0, next_value: 0, next_label: 0 }
    }

    /// Sequentially numbered value name, in the style of unnamed values.
    pub fn fresh(&mut self) -> String {
        let n = self.next_value;
        self.next_value += 1;
        n.to_string()
    }

    pub fn fresh_label(&mut self, hint: &str) -> String {
        let n = self.next_label;
        self.next_label += 1;
        format!("{hint}{n}")
    }

    pub fn current_label(&self) -> String {
        self.func.blocks[self.cur].label.clone()
    }

    pub fn new_block(&mut self, label: &str) -> String {
        self.func.blocks.push(Block::new(label));
        label.to_string()
    }

    pub fn switch_to(&mut self, label: &str) {
        self.cur = self.func.block_index(label).expect("block exists");
    }

    pub fn push(&mut self, kind: InstKind) -> Operand {
        let inst = Instruction::new(Some(self.fresh()), kind);
        let ty = inst.result_type();
        let name = inst.result.clone().unwrap_or_default();
        self.func.blocks[self.cur].insts.push(inst);
        Operand::local(ty, name)
    }

    pub fn push_void(&mut self, kind: InstKind) {
        self.func.blocks[self.cur].insts.push(Instruction::new(None, kind));
    }

    /// `getelementptr inbounds base, i64 0, idx...`
    pub fn elem_ptr(&mut self, base: &Operand, idx: &[Operand]) -> Operand {
        let mut indices = vec![Operand::i64(0)];
        indices.extend(idx.iter().cloned());
        self.push(InstKind::Gep { inbounds: true, base: base.clone(), indices })
    }

    pub fn load(&mut self, ptr: &Operand) -> Operand {
        self.push(InstKind::Load { volatile: false, ptr: ptr.clone(), align: Some(4) })
    }

    pub fn store(&mut self, value: &Operand, ptr: &Operand) {
        self.push_void(InstKind::Store { volatile: false, value: value.clone(), ptr: ptr.clone(), align: Some(4) })
    }

    pub fn bin(&mut self, op: BinOp, lhs: &Operand, rhs: &Operand) -> Operand {
        self.push(InstKind::Binary { op, lhs: lhs.clone(), rhs: rhs.clone() })
    }

    pub fn icmp(&mut self, pred: IntPred, lhs: &Operand, rhs: &Operand) -> Operand {
        self.push(InstKind::Icmp { pred, lhs: lhs.clone(), rhs: rhs.clone() })
    }

    pub fn fcmp(&mut self, pred: FloatPred, lhs: &Operand, rhs: &Operand) -> Operand {
        self.push(InstKind::Fcmp { pred, lhs: lhs.clone(), rhs: rhs.clone() })
    }

    pub fn select(&mut self, cond: &Operand, t: &Operand, f: &Operand) -> Operand {
        self.push(InstKind::Select { cond: cond.clone(), on_true: t.clone(), on_false: f.clone() })
    }

    pub fn cast(&mut self, op: CastOp, value: &Operand, to: Type) -> Operand {
        self.push(InstKind::Cast { op, value: value.clone(), to })
    }

    pub fn call(&mut self, callee: &str, ret: Type, args: &[Operand]) -> Operand {
        self.push(InstKind::Call { ret, callee: callee.to_string(), args: args.to_vec() })
    }

    pub fn br(&mut self, target: &str) {
        self.push_void(InstKind::Br { target: target.to_string() });
    }

    pub fn cond_br(&mut self, cond: &Operand, if_true: &str, if_false: &str) {
        self.push_void(InstKind::CondBr {
            cond: cond.clone(),
            if_true: if_true.to_string(),
            if_false: if_false.to_string(),
        });
    }

    pub fn ret_void(&mut self) {
        self.push_void(InstKind::Ret { value: None });
    }

    /// Emits `for (i = 0; i < trip; i++)` in header-test form with the
    /// induction variable as an i64 phi. `carried` values flow around the
    /// loop; `body` receives the induction variable and their current
    /// values and returns the next ones. Returns the values at loop exit.
    /// Code emitted after the call goes into the exit block.
    pub fn counted_loop(
        &mut self,
        hint: &str,
        trip: i64,
        carried: &[Operand],
        body: impl FnOnce(&mut Self, &Operand, &[Operand]) -> Vec<Operand>,
    ) -> Vec<Operand> {
        let pre = self.current_label();
        let id = self.next_label;
        self.next_label += 1;
        let header = self.new_block(&format!("{hint}{id}.header"));
        let body_l = self.new_block(&format!("{hint}{id}.body"));
        let exit = self.new_block(&format!("{hint}{id}.exit"));
        self.br(&header);

        self.switch_to(&header);
        let iv = Operand::local(Type::i64(), self.fresh());
        let phis: Vec<Operand> = carried.iter().map(|c| Operand::local(c.ty.clone(), self.fresh())).collect();
        let cond = self.icmp(IntPred::Slt, &iv, &Operand::i64(trip));
        self.cond_br(&cond, &body_l, &exit);

        self.switch_to(&body_l);
        let next_vals = body(self, &iv, &phis);
        assert_eq!(next_vals.len(), carried.len(), "loop body must return one value per carried value");
        let next_iv = self.bin(BinOp::Add, &iv, &Operand::i64(1));
        self.br(&header);
        let latch = self.current_label();

        let hi = self.func.block_index(&header).expect("header");
        let mut phi_insts = vec![Instruction::new(
            iv.value.as_local().map(String::from),
            InstKind::Phi {
                ty: Type::i64(),
                incoming: vec![(Operand::i64(0), pre.clone()), (next_iv, latch.clone())],
            },
        )];
        for ((p, init), next) in phis.iter().zip(carried).zip(next_vals) {
            phi_insts.push(Instruction::new(
                p.value.as_local().map(String::from),
                InstKind::Phi {
                    ty: p.ty.clone(),
                    incoming: vec![(init.clone(), pre.clone()), (next, latch.clone())],
                },
            ));
        }
        self.func.blocks[hi].insts.splice(0..0, phi_insts);

        self.switch_to(&exit);
        phis
    }

    pub fn finish(mut self) -> Function {
        // Definitions may have been emitted out of numeric order (loop phis);
        // restore dense sequential numbering by definition position.
        super::rewrite::renumber(&mut self.func);
        self.func
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counted_loop_validates() {
        let arr = Type::array(Type::Float, 4);
        let mut m = IrModule { globals: vec![GlobalDef::zeroed("a", arr.clone(), Some(8))], ..Default::default() };
        let mut b = FunctionBuilder::new("main", Type::Void, vec![]);
        let base = Operand::global(Type::ptr(arr), "a");
        let sums = b.counted_loop("l", 4, &[Operand::f32(0.0)], |b, i, acc| {
            let p = b.elem_ptr(&base, std::slice::from_ref(i));
            let v = b.load(&p);
            vec![b.bin(BinOp::FAdd, &acc[0], &v)]
        });
        let p = b.elem_ptr(&base, &[Operand::i64(0)]);
        b.store(&sums[0], &p);
        b.ret_void();
        m.functions.push(b.finish());
        let d = crate::ir::validate(&m);
        assert!(d.is_empty(), "{d}");
        let text = crate::ir::print_module(&m);
        let back = crate::ir::parse_module(&text).unwrap().module;
        assert!(back.structurally_eq(&m));
    }
}
