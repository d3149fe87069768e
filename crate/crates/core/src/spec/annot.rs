//! Extraction of `@notice` annotations from doc-comment blocks.

use crate::frontend::{DocBlock, Pos};

use super::SpecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotKind {
    Invariant,
    Postcondition,
    Emits,
}

impl AnnotKind {
    pub fn keyword(self) -> &'static str {
        match self {
            AnnotKind::Invariant => "invariant",
            AnnotKind::Postcondition => "postcondition",
            AnnotKind::Emits => "emits",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawAnnotation {
    pub kind: AnnotKind,
    pub text: String,
    /// Position of the first character of `text`.
    pub pos: Pos,
}

/// Content of one doc line with comment markers removed, and the column
/// (0-based, in chars) where that content starts.
fn strip_line(line: &str, first: bool, last: bool) -> (String, usize) {
    let mut s = line;
    let mut col = 0usize;
    let lead = s.len() - s.trim_start().len();
    col += s[..lead].chars().count();
    s = &s[lead..];
    if last {
        if let Some(k) = s.rfind("*/") {
            s = &s[..k];
        }
    }
    for marker in ["///", "/**"] {
        if first && s.starts_with(marker) {
            s = &s[3..];
            col += 3;
            break;
        }
    }
    if s.starts_with("///") {
        s = &s[3..];
        col += 3;
    } else if !first && s.starts_with('*') {
        s = &s[1..];
        col += 1;
    }
    let lead = s.len() - s.trim_start().len();
    col += s[..lead].chars().count();
    (s[lead..].trim_end().to_string(), col)
}

/// Parses every `@notice <keyword> ...` entry of a doc block. Other tags and
/// free prose are ignored; lines without a tag continue the previous entry.
pub fn parse_doc(doc: &DocBlock) -> Result<Vec<RawAnnotation>, SpecError> {
    let lines: Vec<&str> = doc.text.split('\n').collect();
    let n = lines.len();
    let mut out: Vec<RawAnnotation> = Vec::new();
    let mut open = false;
    for (i, line) in lines.iter().enumerate() {
        let (content, col) = strip_line(line, i == 0, i + 1 == n);
        let line_no = doc.pos.0.line + i as u32;
        let base_col = if i == 0 { doc.pos.0.col as usize } else { 1 };
        if let Some(rest) = content.strip_prefix("@notice") {
            if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
                open = false;
                continue;
            }
            let body = rest.trim_start();
            let kw_end = body.find(char::is_whitespace).unwrap_or(body.len());
            let kw = &body[..kw_end];
            let kind = match kw {
                "invariant" => AnnotKind::Invariant,
                "postcondition" => AnnotKind::Postcondition,
                "emits" => AnnotKind::Emits,
                _ => {
                    let pos = Pos { line: line_no, col: (base_col + col) as u32 };
                    return Err(SpecError::Syntax { pos, message: format!("unknown annotation keyword `{kw}`") });
                }
            };
            let text = body[kw_end..].trim_start();
            let offset = content.chars().count() - text.chars().count();
            let pos = Pos { line: line_no, col: (base_col + col + offset) as u32 };
            out.push(RawAnnotation { kind, text: text.to_string(), pos });
            open = true;
        } else if content.starts_with('@') {
            open = false;
        } else if open && !content.is_empty() {
            let last = out.last_mut().expect("open annotation");
            last.text.push(' ');
            last.text.push_str(&content);
        }
    }
    for a in &out {
        if a.text.is_empty() {
            return Err(SpecError::Syntax { pos: a.pos, message: format!("empty `{}` annotation", a.kind.keyword()) });
        }
    }
    Ok(out)
}

/// Does the block contain any `@notice` tag at all?
pub fn has_annotations(doc: &DocBlock) -> bool {
    doc.text.contains("@notice")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::Span;

    fn doc(text: &str) -> DocBlock {
        DocBlock { text: text.into(), pos: Span(Pos { line: 10, col: 5 }) }
    }

    #[test]
    fn block_comment_entries() {
        let d = doc("/**\n* @notice postcondition a == 1\n* @notice emits  E */");
        let a = parse_doc(&d).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].kind, AnnotKind::Postcondition);
        assert_eq!(a[0].text, "a == 1");
        assert_eq!(a[0].pos, Pos { line: 11, col: 25 });
        assert_eq!(a[1].text, "E");
    }

    #[test]
    fn slash_lines_and_continuations() {
        let d = doc("/// @notice invariant x ==\n///   y");
        let a = parse_doc(&d).unwrap();
        assert_eq!(a[0].text, "x == y");
        assert_eq!(a[0].pos, Pos { line: 10, col: 27 });
    }

    #[test]
    fn unknown_keyword_is_rejected() {
        assert!(matches!(parse_doc(&doc("/// @notice precondition x")), Err(SpecError::Syntax { .. })));
    }

    #[test]
    fn other_tags_and_prose_are_ignored() {
        let d = doc("/**\n * Moves tokens.\n * @dev careful\n *   still dev\n * @notice emits T\n */");
        let a = parse_doc(&d).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].text, "T");
    }
}
