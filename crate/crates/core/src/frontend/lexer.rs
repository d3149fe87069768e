//! Tokenizer for MiniSol source text.
//!
//! Ordinary comments are dropped. Doc comments (`///` runs and `/** */`
//! blocks) are kept as tokens so the parser can attach them to the next
//! declaration.

use super::error::{FrontendError, Pos};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(String),
    HexNumber(String),
    Str(String),
    Doc(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const PUNCTS: &[&str] = &[
    "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "**", "(", ")", "{",
    "}", "[", "]", ";", ",", ".", "=", "<", ">", "+", "-", "*", "/", "%", "!", "?", ":",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let bytes = src.as_bytes();
    let mut out: Vec<Token> = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        ($n:expr) => {{
            for _ in 0..$n {
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else if (bytes[i] & 0xC0) != 0x80 {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    while i < bytes.len() {
        let c = bytes[i];
        let pos = Pos { line, col };
        if c.is_ascii_whitespace() {
            bump!(1);
            continue;
        }
        if src[i..].starts_with("///") {
            // A run of consecutive `///` lines forms one doc block.
            let start = i;
            let mut end;
            loop {
                let eol = src[i..].find('\n').map(|k| i + k).unwrap_or(bytes.len());
                end = eol;
                bump!(eol - i);
                let mut j = i;
                while j < bytes.len() && (bytes[j] == b' ' || bytes[j] == b'\t' || bytes[j] == b'\n' || bytes[j] == b'\r') {
                    j += 1;
                }
                let newlines = src[i..j].matches('\n').count();
                if newlines <= 1 && src[j..].starts_with("///") {
                    bump!(j - i);
                    continue;
                }
                break;
            }
            out.push(Token { tok: Tok::Doc(src[start..end].trim_end().to_string()), pos });
            continue;
        }
        if src[i..].starts_with("//") {
            let eol = src[i..].find('\n').map(|k| i + k).unwrap_or(bytes.len());
            bump!(eol - i);
            continue;
        }
        if src[i..].starts_with("/*") {
            let close = match src[i + 2..].find("*/") {
                Some(k) => i + 2 + k + 2,
                None => return Err(FrontendError::lex(pos, "unterminated block comment")),
            };
            let text = &src[i..close];
            let is_doc = text.starts_with("/**") && text != "/**/" && !text.starts_with("/***");
            if is_doc {
                out.push(Token { tok: Tok::Doc(text.to_string()), pos });
            }
            bump!(close - i);
            continue;
        }
        if c == b'"' || c == b'\'' {
            let quote = c;
            let mut j = i + 1;
            let mut s = String::new();
            loop {
                if j >= bytes.len() || bytes[j] == b'\n' {
                    return Err(FrontendError::lex(pos, "unterminated string literal"));
                }
                if bytes[j] == quote {
                    break;
                }
                if bytes[j] == b'\\' && j + 1 < bytes.len() {
                    let e = bytes[j + 1];
                    s.push(match e {
                        b'n' => '\n',
                        b't' => '\t',
                        b'\\' => '\\',
                        b'"' => '"',
                        b'\'' => '\'',
                        _ => return Err(FrontendError::lex(pos, "unsupported escape sequence")),
                    });
                    j += 2;
                    continue;
                }
                let ch = src[j..].chars().next().unwrap();
                s.push(ch);
                j += ch.len_utf8();
            }
            bump!(j + 1 - i);
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            let tok = if src[i..].starts_with("0x") || src[i..].starts_with("0X") {
                j += 2;
                while j < bytes.len() && bytes[j].is_ascii_hexdigit() {
                    j += 1;
                }
                if j == i + 2 {
                    return Err(FrontendError::lex(pos, "empty hex literal"));
                }
                Tok::HexNumber(src[i + 2..j].to_ascii_lowercase())
            } else {
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'_') {
                    j += 1;
                }
                Tok::Number(src[i..j].replace('_', ""))
            };
            if j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                return Err(FrontendError::lex(pos, "malformed number literal"));
            }
            bump!(j - i);
            out.push(Token { tok, pos });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'$') {
                j += 1;
            }
            out.push(Token { tok: Tok::Ident(src[i..j].to_string()), pos });
            bump!(j - i);
            continue;
        }
        match PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            Some(p) => {
                out.push(Token { tok: Tok::Punct(p), pos });
                bump!(p.len());
            }
            None => {
                let ch = src[i..].chars().next().unwrap();
                return Err(FrontendError::lex(pos, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn doc_runs_merge() {
        let toks = kinds("/// a\n/// b\ncontract X {}");
        assert_eq!(toks[0], Tok::Doc("/// a\n/// b".into()));
        assert_eq!(toks[1], Tok::Ident("contract".into()));
    }

    #[test]
    fn blank_line_splits_doc_runs() {
        let toks = kinds("/// a\n\n/// b\n");
        assert_eq!(toks.len(), 3);
    }

    #[test]
    fn plain_comments_vanish() {
        assert_eq!(kinds("// x\n/* y */ /**/ a"), vec![Tok::Ident("a".into()), Tok::Eof]);
    }

    #[test]
    fn numbers_and_hex() {
        assert_eq!(
            kinds("10 0xFF"),
            vec![Tok::Number("10".into()), Tok::HexNumber("ff".into()), Tok::Eof]
        );
    }

    #[test]
    fn positions_track_lines() {
        let toks = tokenize("a\n  b").unwrap();
        assert_eq!(toks[1].pos, Pos { line: 2, col: 3 });
    }

    #[test]
    fn bad_char_is_lex_error() {
        let err = tokenize("a # b").unwrap_err();
        assert!(err.to_string().contains("1:3"));
    }
}
