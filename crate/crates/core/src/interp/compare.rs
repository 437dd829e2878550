use std::fmt;

use super::{MemoryImage, Word};
use crate::diag::{Diagnostic, Location};

/// The worst element found by [`compare_images`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub bank: String,
    pub index: usize,
    pub actual: Word,
    pub expected: Word,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub pass: bool,
    /// Largest `|x - y| / |y|` over float elements (`|x - y|` where `y == 0`).
    pub worst_rel_err: f64,
    /// Elements outside tolerance (or unequal integers).
    pub failures: usize,
    pub worst: Option<Mismatch>,
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} worst_rel_err={:e} failures={}", if self.pass { "pass" } else { "fail" }, self.worst_rel_err, self.failures)?;
        if let Some(w) = &self.worst {
            write!(f, " at {}[{}]: got {} expected {}", w.bank, w.index, w.actual, w.expected)?;
        }
        Ok(())
    }
}

/// Compares `actual` against `expected` bank by bank. A float pair passes
/// when `|x - y| <= abs_tol + rel_tol * |y|`; integers must be equal.
pub fn compare_images(
    actual: &MemoryImage,
    expected: &MemoryImage,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<CompareReport, Diagnostic> {
    let shape_err = |name: &str, msg: String| Diagnostic::error("shape-mismatch", Location::Global(name.into()), msg);
    let a_names: Vec<&str> = actual.names().collect();
    let e_names: Vec<&str> = expected.names().collect();
    if a_names != e_names {
        return Err(Diagnostic::error(
            "shape-mismatch",
            Location::Module,
            format!("bank sets differ: {a_names:?} vs {e_names:?}"),
        ));
    }
    let mut report = CompareReport { pass: true, worst_rel_err: 0.0, failures: 0, worst: None };
    // Failing elements outrank passing ones when choosing the one to show.
    let mut worst_key = (false, f64::NEG_INFINITY);
    for (name, eb) in expected.iter() {
        let ab = actual.get(name).expect("same names");
        if ab.kind != eb.kind || ab.len() != eb.len() {
            return Err(shape_err(name, format!("{:?}[{}] vs {:?}[{}]", ab.kind, ab.len(), eb.kind, eb.len())));
        }
        for (i, (&x, &y)) in ab.data.iter().zip(&eb.data).enumerate() {
            let (ok, err) = match (x, y) {
                (Word::F32(x), Word::F32(y)) => {
                    let (x, y) = (f64::from(x), f64::from(y));
                    if (x.is_nan() && y.is_nan()) || x == y {
                        (true, 0.0)
                    } else {
                        let diff = (x - y).abs();
                        let rel = if y == 0.0 { diff } else { diff / y.abs() };
                        let rel = if rel.is_nan() { f64::INFINITY } else { rel };
                        (diff <= abs_tol + rel_tol * y.abs(), rel)
                    }
                }
                (x, y) => {
                    let eq = x == y;
                    (eq, if eq { 0.0 } else { f64::INFINITY })
                }
            };
            if !ok {
                report.pass = false;
                report.failures += 1;
            }
            report.worst_rel_err = report.worst_rel_err.max(err);
            let key = (!ok, err);
            if err > 0.0 && ((key.0 && !worst_key.0) || (key.0 == worst_key.0 && key.1 > worst_key.1)) {
                worst_key = key;
                report.worst = Some(Mismatch { bank: name.to_string(), index: i, actual: x, expected: y });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{Bank, ScalarKind};

    fn img(name: &str, b: Bank) -> MemoryImage {
        let mut m = MemoryImage::new();
        m.insert(name, b);
        m
    }

    #[test]
    fn identical_images_pass_with_zero_error() {
        let a = img("o", Bank::from_f32(&[1.0, -2.0, 0.0]));
        let r = compare_images(&a, &a, 1e-5, 1e-7).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_rel_err, 0.0);
        assert!(r.worst.is_none());
    }

    #[test]
    fn within_relative_tolerance() {
        let r = compare_images(&img("o", Bank::from_f32(&[1.0 + 5e-6])), &img("o", Bank::from_f32(&[1.0])), 1e-5, 1e-7)
            .unwrap();
        assert!(r.pass);
        assert!(r.worst_rel_err > 0.0 && r.worst_rel_err < 1e-5);
        let r = compare_images(&img("o", Bank::from_f32(&[1.001])), &img("o", Bank::from_f32(&[1.0])), 1e-5, 1e-7)
            .unwrap();
        assert!(!r.pass);
        assert_eq!(r.worst.unwrap().index, 0);
    }

    #[test]
    fn integers_must_match_exactly() {
        let a = img("k", Bank::from_bits(ScalarKind::I32, &[3]));
        let b = img("k", Bank::from_bits(ScalarKind::I32, &[4]));
        assert!(!compare_images(&a, &b, 1.0, 1.0).unwrap().pass);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = img("o", Bank::from_f32(&[1.0]));
        let b = img("o", Bank::from_f32(&[1.0, 2.0]));
        assert_eq!(compare_images(&a, &b, 0.0, 0.0).unwrap_err().code, "shape-mismatch");
        assert!(compare_images(&a, &img("p", Bank::from_f32(&[1.0])), 0.0, 0.0).is_err());
    }
}
