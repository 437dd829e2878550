//! Constant evaluation of single instructions. The arithmetic mirrors the
//! interpreter exactly, so folding never changes results.

use crate::ir::{normalize_int, BinOp, CastOp, InstKind, Operand, Type, Value};

fn int_width(t: &Type) -> u32 {
    match t {
        Type::Int(w) => *w,
        _ => 64,
    }
}

fn int_of(o: &Operand) -> Option<i64> {
    match o.value {
        Value::Int(v) => Some(v),
        _ => None,
    }
}

fn f32_of(o: &Operand) -> Option<f32> {
    match o.value {
        Value::Float(b) => Some(f32::from_bits(b)),
        _ => None,
    }
}

/// The constant result of `kind`, when every operand it needs is constant.
pub fn fold(kind: &InstKind) -> Option<Value> {
    match kind {
        InstKind::Binary { op, lhs, rhs } => {
            if op.is_float() {
                let (x, y) = (f32_of(lhs)?, f32_of(rhs)?);
                let r = match op {
                    BinOp::FAdd => x + y,
                    BinOp::FSub => x - y,
                    BinOp::FMul => x * y,
                    BinOp::FDiv => x / y,
                    _ => return None,
                };
                Some(Value::float(r))
            } else {
                let (x, y) = (int_of(lhs)?, int_of(rhs)?);
                let r = match op {
                    BinOp::Add => x.wrapping_add(y),
                    BinOp::Sub => x.wrapping_sub(y),
                    BinOp::Mul => x.wrapping_mul(y),
                    // Division by zero is a run-time fault; leave it in place.
                    BinOp::SDiv if y != 0 => x.wrapping_div(y),
                    BinOp::SRem if y != 0 => x.wrapping_rem(y),
                    _ => return None,
                };
                Some(Value::Int(normalize_int(r, int_width(&lhs.ty))))
            }
        }
        InstKind::Icmp { pred, lhs, rhs } => {
            Some(Value::Int(i64::from(pred.eval(int_of(lhs)?, int_of(rhs)?, int_width(&lhs.ty)))))
        }
        InstKind::Fcmp { pred, lhs, rhs } => Some(Value::Int(i64::from(pred.eval(f32_of(lhs)?, f32_of(rhs)?)))),
        InstKind::Select { cond, on_true, on_false } => {
            let c = int_of(cond)?;
            let pick = if c != 0 { on_true } else { on_false };
            Some(pick.value.clone())
        }
        InstKind::Cast { op, value, to } => {
            let from = &value.ty;
            match op {
                CastOp::Bitcast => match (&value.value, to) {
                    (Value::Int(x), Type::Float) => Some(Value::Float(*x as u32)),
                    (Value::Float(b), Type::Int(w)) => Some(Value::Int(normalize_int(i64::from(*b), *w))),
                    (Value::Int(_) | Value::Float(_), _) if from == to => Some(value.value.clone()),
                    _ => None,
                },
                CastOp::ZExt => {
                    let x = int_of(value)?;
                    let w = int_width(from);
                    Some(Value::Int(if w >= 64 { x } else { x & ((1i64 << w) - 1) }))
                }
                CastOp::SExt => {
                    let x = int_of(value)?;
                    Some(Value::Int(if int_width(from) == 1 { -(x & 1) } else { x }))
                }
                CastOp::Trunc => Some(Value::Int(normalize_int(int_of(value)?, int_width(to)))),
                CastOp::SiToFp => Some(Value::float(int_of(value)? as f32)),
                CastOp::FpToSi => Some(Value::Int(normalize_int(f32_of(value)? as i64, int_width(to)))),
            }
        }
        InstKind::Call { callee, args, .. } => {
            let x = f32_of(args.first()?)?;
            let r = match callee.as_str() {
                "expf" => x.exp(),
                "tanhf" => x.tanh(),
                "logf" => x.ln(),
                "llvm.maxnum.f32" => x.max(f32_of(args.get(1)?)?),
                _ => return None,
            };
            Some(Value::float(r))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::IntPred;

    #[test]
    fn folds_float_and_int() {
        let k = InstKind::Binary { op: BinOp::FMul, lhs: Operand::f32(2.0), rhs: Operand::f32(3.0) };
        assert_eq!(fold(&k), Some(Value::float(6.0)));
        let k = InstKind::Binary { op: BinOp::Add, lhs: Operand::int(Type::i32(), i32::MAX as i64), rhs: Operand::int(Type::i32(), 1) };
        assert_eq!(fold(&k), Some(Value::Int(i32::MIN as i64)));
        let k = InstKind::Binary { op: BinOp::SDiv, lhs: Operand::i64(1), rhs: Operand::i64(0) };
        assert_eq!(fold(&k), None);
        let k = InstKind::Icmp { pred: IntPred::Ult, lhs: Operand::i64(-1), rhs: Operand::i64(3) };
        assert_eq!(fold(&k), Some(Value::Int(0)));
    }
}
