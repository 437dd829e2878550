//! Memory Initialization File reader and writer.
//!
//! ```text
//! DEPTH=2;
//! WIDTH=32;
//! ADDRESS_RADIX=HEX;
//! DATA_RADIX=HEX;
//! CONTENT BEGIN
//!   0 : 3F800000;
//!   [1..1] : 40000000;
//! END;
//! ```

use thiserror::Error;

use super::{Bank, ScalarKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MifError {
    #[error("line {line}: malformed header: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: address {addr} is not below DEPTH={depth}")]
    Address { line: usize, addr: u64, depth: u64 },
    #[error("line {line}: value {text:?} does not fit in WIDTH={width} with the declared radix")]
    Radix { line: usize, text: String, width: u32 },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

impl MifError {
    pub fn line(&self) -> usize {
        match self {
            MifError::Header { line, .. }
            | MifError::Address { line, .. }
            | MifError::Radix { line, .. }
            | MifError::Syntax { line, .. } => *line,
        }
    }
}

/// Contents of one MIF file. Values are raw bit patterns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mif {
    pub width: u32,
    pub depth: u64,
    pub contents: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Radix {
    Hex,
    Dec,
    Bin,
    Oct,
    Uns,
}

impl Radix {
    fn parse(s: &str) -> Option<Radix> {
        match s.to_ascii_uppercase().as_str() {
            "HEX" => Some(Radix::Hex),
            "DEC" => Some(Radix::Dec),
            "BIN" => Some(Radix::Bin),
            "OCT" => Some(Radix::Oct),
            "UNS" => Some(Radix::Uns),
            _ => None,
        }
    }

    fn base(self) -> u32 {
        match self {
            Radix::Hex => 16,
            Radix::Dec | Radix::Uns => 10,
            Radix::Bin => 2,
            Radix::Oct => 8,
        }
    }
}

fn mask(width: u32) -> u64 {
    if width >= 64 { u64::MAX } else { (1u64 << width) - 1 }
}

fn parse_number(text: &str, radix: Radix, width: u32, line: usize) -> Result<u64, MifError> {
    let bad = || MifError::Radix { line, text: text.to_string(), width };
    if radix == Radix::Dec {
        if let Some(neg) = text.strip_prefix('-') {
            let v = neg.parse::<u64>().map_err(|_| bad())?;
            if width < 64 && v > 1u64 << (width - 1) {
                return Err(bad());
            }
            return Ok(v.wrapping_neg() & mask(width));
        }
    }
    let v = u64::from_str_radix(text, radix.base()).map_err(|_| bad())?;
    if v & !mask(width) != 0 {
        return Err(bad());
    }
    Ok(v)
}

/// Parses MIF text. Unlisted addresses are zero.
pub fn load_mif(text: &str) -> Result<Mif, MifError> {
    let mut depth: Option<u64> = None;
    let mut width: Option<u32> = None;
    let mut addr_radix = Radix::Hex;
    let mut data_radix = Radix::Hex;
    let mut contents: Option<Vec<u64>> = None;
    let mut ended = false;

    // Statements are `;`-terminated and may share or span lines.
    let mut pending = String::new();
    let mut pending_line = 0usize;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split("--").next().unwrap_or("");
        let mut rest = line;
        loop {
            let trimmed = rest.trim();
            if trimmed.is_empty() {
                break;
            }
            if contents.is_none() && pending.trim().is_empty() {
                let upper = trimmed.to_ascii_uppercase();
                if let Some(after) = upper.strip_prefix("CONTENT") {
                    let after = after.trim_start();
                    if !after.starts_with("BEGIN") {
                        return Err(MifError::Header { line: line_no, msg: "expected CONTENT BEGIN".into() });
                    }
                    let (Some(d), Some(w)) = (depth, width) else {
                        return Err(MifError::Header { line: line_no, msg: "DEPTH and WIDTH must precede CONTENT".into() });
                    };
                    if w == 0 || w > 64 {
                        return Err(MifError::Header { line: line_no, msg: format!("unsupported WIDTH={w}") });
                    }
                    contents = Some(vec![0; d as usize]);
                    let skip = trimmed.len() - after.len() + "BEGIN".len();
                    rest = &trimmed[skip..];
                    continue;
                }
            }
            match rest.find(';') {
                Some(pos) => {
                    if pending.trim().is_empty() {
                        pending_line = line_no;
                    }
                    pending.push_str(&rest[..pos]);
                    let stmt = std::mem::take(&mut pending);
                    rest = &rest[pos + 1..];
                    let stmt = stmt.trim();
                    if stmt.is_empty() {
                        continue;
                    }
                    if ended {
                        return Err(MifError::Syntax { line: pending_line, msg: "text after END".into() });
                    }
                    match &mut contents {
                        None => {
                            let (key, val) = stmt.split_once('=').ok_or_else(|| MifError::Header {
                                line: pending_line,
                                msg: format!("expected KEY=VALUE, found {stmt:?}"),
                            })?;
                            let val = val.trim();
                            let num = || {
                                val.parse::<u64>().map_err(|_| MifError::Header {
                                    line: pending_line,
                                    msg: format!("bad number {val:?}"),
                                })
                            };
                            let radix = || {
                                Radix::parse(val).ok_or_else(|| MifError::Header {
                                    line: pending_line,
                                    msg: format!("unknown radix {val:?}"),
                                })
                            };
                            match key.trim().to_ascii_uppercase().as_str() {
                                "DEPTH" => depth = Some(num()?),
                                "WIDTH" => width = Some(num()? as u32),
                                "ADDRESS_RADIX" => addr_radix = radix()?,
                                "DATA_RADIX" => data_radix = radix()?,
                                other => {
                                    return Err(MifError::Header {
                                        line: pending_line,
                                        msg: format!("unknown header key {other}"),
                                    })
                                }
                            }
                        }
                        Some(data) => {
                            if stmt.eq_ignore_ascii_case("END") {
                                ended = true;
                                continue;
                            }
                            let (a, v) = stmt.split_once(':').ok_or_else(|| MifError::Syntax {
                                line: pending_line,
                                msg: format!("expected `address : data`, found {stmt:?}"),
                            })?;
                            let (a, v) = (a.trim(), v.trim());
                            let d = depth.unwrap_or(0);
                            let w = width.unwrap_or(32);
                            let (lo, hi) = match a.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                                Some(range) => {
                                    let (lo, hi) = range.split_once("..").ok_or_else(|| MifError::Syntax {
                                        line: pending_line,
                                        msg: format!("bad range {a:?}"),
                                    })?;
                                    (
                                        parse_number(lo.trim(), addr_radix, 64, pending_line)?,
                                        parse_number(hi.trim(), addr_radix, 64, pending_line)?,
                                    )
                                }
                                None => {
                                    let x = parse_number(a, addr_radix, 64, pending_line)?;
                                    (x, x)
                                }
                            };
                            let values = v
                                .split_whitespace()
                                .map(|t| parse_number(t, data_radix, w, pending_line))
                                .collect::<Result<Vec<_>, _>>()?;
                            if values.is_empty() {
                                return Err(MifError::Syntax { line: pending_line, msg: "missing data".into() });
                            }
                            if hi < lo {
                                return Err(MifError::Syntax { line: pending_line, msg: "empty range".into() });
                            }
                            if values.len() > 1 {
                                // `addr : v0 v1 v2;` fills consecutive addresses.
                                for (k, val) in values.iter().enumerate() {
                                    let addr = lo + k as u64;
                                    if addr >= d {
                                        return Err(MifError::Address { line: pending_line, addr, depth: d });
                                    }
                                    data[addr as usize] = *val;
                                }
                            } else {
                                if hi >= d {
                                    return Err(MifError::Address { line: pending_line, addr: hi, depth: d });
                                }
                                for slot in &mut data[lo as usize..=hi as usize] {
                                    *slot = values[0];
                                }
                            }
                        }
                    }
                }
                None => {
                    if pending.trim().is_empty() {
                        pending_line = line_no;
                    }
                    pending.push_str(rest);
                    pending.push(' ');
                    break;
                }
            }
        }
    }
    if !pending.trim().is_empty() {
        return Err(MifError::Syntax { line: pending_line, msg: "unterminated statement".into() });
    }
    let contents = contents.ok_or(MifError::Header { line: text.lines().count(), msg: "missing CONTENT BEGIN".into() })?;
    if !ended {
        return Err(MifError::Syntax { line: text.lines().count(), msg: "missing END".into() });
    }
    Ok(Mif { width: width.unwrap_or(32), depth: depth.unwrap_or(0), contents })
}

/// Serializes raw words with hex addresses and zero-padded hex data.
pub fn store_mif(contents: &[u64], width: u32) -> String {
    let digits = width.div_ceil(4).max(1) as usize;
    let mut out = format!(
        "DEPTH={};\nWIDTH={width};\nADDRESS_RADIX=HEX;\nDATA_RADIX=HEX;\nCONTENT BEGIN\n",
        contents.len()
    );
    for (i, v) in contents.iter().enumerate() {
        out.push_str(&format!("{i:X} : {:0digits$X};\n", v & mask(width)));
    }
    out.push_str("END;\n");
    out
}

/// MIF text for a bank.
pub fn bank_to_mif(bank: &Bank) -> String {
    store_mif(&bank.to_bits(), bank.kind.width())
}

/// Decodes MIF text as a bank of `kind`, checking width and (when given)
/// the expected depth.
pub fn bank_from_mif(text: &str, kind: ScalarKind, depth: Option<usize>) -> Result<Bank, MifError> {
    let mif = load_mif(text)?;
    if mif.width != kind.width() {
        return Err(MifError::Header { line: 2, msg: format!("WIDTH={} but the memory holds {}-bit words", mif.width, kind.width()) });
    }
    if let Some(d) = depth {
        if mif.depth as usize != d {
            return Err(MifError::Header { line: 1, msg: format!("DEPTH={} but the memory has {d} words", mif.depth) });
        }
    }
    Ok(Bank::from_bits(kind, &mif.contents))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HDR: &str = "DEPTH=4;\nWIDTH=32;\nADDRESS_RADIX=HEX;\nDATA_RADIX=HEX;\nCONTENT BEGIN\n";

    #[test]
    fn reads_float_bit_patterns() {
        let m = load_mif("DEPTH=2;\nWIDTH=32;\nADDRESS_RADIX=HEX;\nDATA_RADIX=HEX;\nCONTENT BEGIN\n0: 3F800000;\n1: 40000000;\nEND;\n")
            .unwrap();
        let b = Bank::from_bits(ScalarKind::F32, &m.contents);
        assert_eq!(b.to_f32(), vec![1.0, 2.0]);
    }

    #[test]
    fn empty_content_is_zero_filled() {
        assert_eq!(load_mif(&format!("{HDR}END;\n")).unwrap().contents, vec![0; 4]);
    }

    #[test]
    fn range_lines_fill() {
        let m = load_mif(&format!("{HDR}[0..3]: 3F800000;\nEND;\n")).unwrap();
        assert_eq!(m.contents, vec![0x3F80_0000; 4]);
    }

    #[test]
    fn comments_and_multi_value_lines() {
        let m = load_mif(&format!("-- header comment\n{HDR}0 : 1 2 3; -- three values\nEND;\n")).unwrap();
        assert_eq!(m.contents, vec![1, 2, 3, 0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(load_mif(&format!("{HDR}4 : 0;\nEND;\n")), Err(MifError::Address { .. })));
        assert!(matches!(load_mif(&format!("{HDR}0 : 1FFFFFFFF;\nEND;\n")), Err(MifError::Radix { .. })));
        assert!(matches!(load_mif("DEPTH=x;\n"), Err(MifError::Header { .. })));
        assert!(matches!(load_mif("WIDTH=8;\nCONTENT BEGIN\nEND;\n"), Err(MifError::Header { .. })));
    }

    #[test]
    fn writer_format() {
        let text = store_mif(&[1.0f32.to_bits() as u64], 32);
        assert!(text.contains("WIDTH=32;"));
        assert!(text.contains("0 : 3F800000;"));
        assert!(store_mif(&[7], 32).contains("0 : 00000007;"));
        assert!(store_mif(&[1], 1).contains("0 : 1;"));
    }

    #[test]
    fn decimal_radix_accepts_negative() {
        let m = load_mif("DEPTH=1;\nWIDTH=32;\nADDRESS_RADIX=DEC;\nDATA_RADIX=DEC;\nCONTENT BEGIN\n0 : -1;\nEND;\n").unwrap();
        assert_eq!(m.contents, vec![0xFFFF_FFFF]);
    }
}
