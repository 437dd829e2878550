use crate::diag::{Diagnostic, Location};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Local(String),
    Global(String),
    /// `name:` at the start of a block.
    Label(String),
    Ident(String),
    Int(i64),
    /// Decimal float literal, kept as text so it can be range-checked.
    Float(f64),
    /// `0x` hexadecimal literal (double bit pattern).
    Hex(u64),
    Str(String),
    AttrGroup(String),
    /// `!name` or `!123`; `!{` is lexed as `Bang` followed by `LBrace`.
    Meta(String),
    Bang,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Lt,
    Gt,
    Comma,
    Eq,
    Star,
    Ellipsis,
    Colon,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '-')
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! err {
        ($l:expr, $c:expr, $($arg:tt)*) => {
            return Err(Diagnostic::error("syntax", Location::Source { line: $l, col: $c }, format!($($arg)*)))
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == ';' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '<' => Some(Tok::Lt),
            '>' => Some(Tok::Gt),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Eq),
            '*' => Some(Tok::Star),
            ':' => Some(Tok::Colon),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, line: tl, col: tc });
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '.' && chars.get(i + 1) == Some(&'.') && chars.get(i + 2) == Some(&'.') {
            out.push(Token { tok: Tok::Ellipsis, line: tl, col: tc });
            advance(3, &mut i, &mut col);
            continue;
        }
        if c == '"' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && chars[j] != '"' {
                if chars[j] == '\n' {
                    err!(tl, tc, "unterminated string");
                }
                j += 1;
            }
            if j >= chars.len() {
                err!(tl, tc, "unterminated string");
            }
            let s: String = chars[start..j].iter().collect();
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
            advance(j + 1 - i, &mut i, &mut col);
            continue;
        }
        if matches!(c, '%' | '@' | '#' | '!') {
            let mut j = i + 1;
            let name: String;
            if chars.get(j) == Some(&'"') {
                let start = j + 1;
                j = start;
                while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                    j += 1;
                }
                if chars.get(j) != Some(&'"') {
                    err!(tl, tc, "unterminated quoted name");
                }
                name = chars[start..j].iter().collect();
                j += 1;
            } else {
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                name = chars[i + 1..j].iter().collect();
            }
            if name.is_empty() {
                if c == '!' {
                    out.push(Token { tok: Tok::Bang, line: tl, col: tc });
                    advance(1, &mut i, &mut col);
                    continue;
                }
                err!(tl, tc, "expected a name after '{c}'");
            }
            let tok = match c {
                '%' => Tok::Local(name),
                '@' => Tok::Global(name),
                '#' => Tok::AttrGroup(name),
                _ => Tok::Meta(name),
            };
            out.push(Token { tok, line: tl, col: tc });
            advance(j - i, &mut i, &mut col);
            continue;
        }
        if c.is_ascii_digit() || ((c == '-' || c == '+') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            // Hex float bit pattern.
            if c == '0' && matches!(chars.get(i + 1), Some('x') | Some('X')) {
                let mut j = i + 2;
                while j < chars.len() && chars[j].is_ascii_hexdigit() {
                    j += 1;
                }
                let digits: String = chars[i + 2..j].iter().collect();
                let Ok(bits) = u64::from_str_radix(&digits, 16) else {
                    err!(tl, tc, "malformed hex literal");
                };
                out.push(Token { tok: Tok::Hex(bits), line: tl, col: tc });
                advance(j - i, &mut i, &mut col);
                continue;
            }
            let mut j = i + 1;
            let mut is_float = false;
            while j < chars.len() {
                let d = chars[j];
                if d.is_ascii_digit() {
                    j += 1;
                } else if d == '.' || d == 'e' || d == 'E' {
                    is_float = true;
                    j += 1;
                    if (d == 'e' || d == 'E') && matches!(chars.get(j), Some('+') | Some('-')) {
                        j += 1;
                    }
                } else {
                    break;
                }
            }
            // A numeric label such as `12:`.
            if !is_float && chars.get(j) == Some(&':') && c.is_ascii_digit() {
                let s: String = chars[i..j].iter().collect();
                out.push(Token { tok: Tok::Label(s), line: tl, col: tc });
                advance(j + 1 - i, &mut i, &mut col);
                continue;
            }
            let s: String = chars[i..j].iter().collect();
            let tok = if is_float {
                match s.parse::<f64>() {
                    Ok(v) => Tok::Float(v),
                    Err(_) => err!(tl, tc, "malformed float literal '{s}'"),
                }
            } else {
                match s.parse::<i64>() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => match s.parse::<u64>() {
                        Ok(v) => Tok::Int(v as i64),
                        Err(_) => err!(tl, tc, "malformed integer literal '{s}'"),
                    },
                }
            };
            out.push(Token { tok, line: tl, col: tc });
            advance(j - i, &mut i, &mut col);
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '.' || c == '$' {
            let mut j = i + 1;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            if chars.get(j) == Some(&':') {
                out.push(Token { tok: Tok::Label(s), line: tl, col: tc });
                advance(j + 1 - i, &mut i, &mut col);
            } else {
                out.push(Token { tok: Tok::Ident(s), line: tl, col: tc });
                advance(j - i, &mut i, &mut col);
            }
            continue;
        }
        err!(tl, tc, "unexpected character '{c}'");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_legacy_load() {
        let toks = lex("%2 = load volatile float* %0, align 8 ; trailing").unwrap();
        let kinds: Vec<_> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Local("2".into()),
                Tok::Eq,
                Tok::Ident("load".into()),
                Tok::Ident("volatile".into()),
                Tok::Ident("float".into()),
                Tok::Star,
                Tok::Local("0".into()),
                Tok::Comma,
                Tok::Ident("align".into()),
                Tok::Int(8),
            ]
        );
    }

    #[test]
    fn lexes_labels_and_literals() {
        let toks = lex("loop.header:\n7:\n-3 1.5e+00 0x3FF0000000000000 !dbg !{").unwrap();
        let kinds: Vec<_> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(kinds[0], Tok::Label("loop.header".into()));
        assert_eq!(kinds[1], Tok::Label("7".into()));
        assert_eq!(kinds[2], Tok::Int(-3));
        assert_eq!(kinds[3], Tok::Float(1.5));
        assert_eq!(kinds[4], Tok::Hex(0x3FF0000000000000));
        assert_eq!(kinds[5], Tok::Meta("dbg".into()));
        assert_eq!(kinds[6], Tok::Bang);
        assert_eq!(kinds[7], Tok::LBrace);
    }

    #[test]
    fn reports_position_of_bad_char() {
        let err = lex("define void @f() {\n  ^\n}").unwrap_err();
        assert_eq!(err.location, Location::Source { line: 2, col: 3 });
    }
}
