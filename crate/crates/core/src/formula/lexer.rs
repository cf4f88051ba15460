use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Tilde,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Colon,
    Pipe,
    LParen,
    RParen,
    Comma,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            b'~' => Some(Tok::Tilde),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b':' => Some(Tok::Colon),
            b'|' => Some(Tok::Pipe),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, offset: start });
            i += 1;
            continue;
        }
        let next = bytes.get(i + 1).copied();
        match c {
            b'=' | b'!' | b'<' | b'>' => {
                let (tok, len) = match (c, next) {
                    (b'=', Some(b'=')) => (Tok::EqEq, 2),
                    (b'=', _) => (Tok::Assign, 1),
                    (b'!', Some(b'=')) => (Tok::NotEq, 2),
                    (b'<', Some(b'=')) => (Tok::Le, 2),
                    (b'<', _) => (Tok::Lt, 1),
                    (b'>', Some(b'=')) => (Tok::Ge, 2),
                    (b'>', _) => (Tok::Gt, 1),
                    _ => return Err(Error::syntax(start, "unexpected '!'")),
                };
                out.push(Token { tok, offset: start });
                i += len;
            }
            b'"' | b'\'' => {
                let quote = c;
                i += 1;
                let mut s = String::new();
                loop {
                    match bytes.get(i) {
                        None => return Err(Error::syntax(start, "unterminated string literal")),
                        Some(&b) if b == quote => {
                            i += 1;
                            break;
                        }
                        Some(b'\\') => {
                            let esc = *bytes
                                .get(i + 1)
                                .ok_or_else(|| Error::syntax(i, "dangling escape"))?;
                            s.push(esc as char);
                            i += 2;
                        }
                        Some(_) => {
                            // copy one UTF-8 scalar
                            let ch = text[i..].chars().next().unwrap();
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    offset: start,
                });
            }
            b'`' => {
                let end = text[i + 1..]
                    .find('`')
                    .ok_or_else(|| Error::syntax(start, "unterminated backquoted name"))?;
                let name = text[i + 1..i + 1 + end].to_string();
                if name.is_empty() {
                    return Err(Error::syntax(start, "empty backquoted name"));
                }
                out.push(Token {
                    tok: Tok::Ident(name),
                    offset: start,
                });
                i += end + 2;
            }
            b'0'..=b'9' => {
                i = scan_number(bytes, i);
                let lit = &text[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| Error::syntax(start, format!("malformed number '{lit}'")))?;
                out.push(Token {
                    tok: Tok::Number(v),
                    offset: start,
                });
            }
            b'.' if next.is_some_and(|d| d.is_ascii_digit()) => {
                i = scan_number(bytes, i);
                let lit = &text[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| Error::syntax(start, format!("malformed number '{lit}'")))?;
                out.push(Token {
                    tok: Tok::Number(v),
                    offset: start,
                });
            }
            _ if c.is_ascii_alphabetic() || c == b'.' || c >= 0x80 => {
                while i < bytes.len() {
                    let b = bytes[i];
                    if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || b >= 0x80 {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                let ch = text[i..].chars().next().unwrap();
                return Err(Error::syntax(start, format!("unexpected character '{ch}'")));
            }
        }
    }
    Ok(out)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        i += 1;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_and_kinds() {
        let toks = tokenize("y ~ I(a^2) + 1e-5").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(kinds[0], Tok::Ident("y".into()));
        assert_eq!(kinds[1], Tok::Tilde);
        assert_eq!(toks[1].offset, 2);
        assert_eq!(*kinds.last().unwrap(), Tok::Number(1e-5));
    }

    #[test]
    fn strings_and_comparisons() {
        let toks = tokenize("status != \"alive\"").unwrap();
        assert_eq!(toks[1].tok, Tok::NotEq);
        assert_eq!(toks[2].tok, Tok::Str("alive".into()));
    }

    #[test]
    fn bad_character_reports_offset() {
        match tokenize("y ~ a $ b") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("unexpected {other:?}"),
        }
    }
}
