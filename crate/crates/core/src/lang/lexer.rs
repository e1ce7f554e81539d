use std::collections::BTreeMap;

use super::{ParseError, ParseErrorKind, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "routine", "require", "local", "do", "ensure", "end", "if", "then", "elseif", "else", "from",
    "until", "loop", "check", "not", "and", "or", "implies", "div", "mod", "true", "false",
    "across", "as", "INTEGER", "BOOLEAN", "ARRAY",
];

// Longest symbols first so `:=` wins over `:`.
const SYMBOLS: &[&str] = &[
    ":=", "/=", "<=", ">=", "..", "(", ")", ",", ":", "[", "]", ".", "+", "-", "*", "=", "<", ">",
    ";",
];

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Tokens plus the `-- [target k]` markers found in comments, keyed by line.
pub(crate) struct Lexed {
    pub tokens: Vec<Token>,
    pub markers: BTreeMap<u32, (u32, u32)>,
}

fn parse_marker(comment: &str) -> Option<u32> {
    let rest = comment.trim_start_matches('-').trim();
    let inner = rest.strip_prefix("[target")?.trim_start();
    let digits = inner.strip_suffix(']').or_else(|| inner.split(']').next())?;
    digits.trim().parse().ok()
}

pub(crate) fn lex(src: &str) -> Result<Lexed, ParseError> {
    let mut tokens = Vec::new();
    let mut markers = BTreeMap::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            if let Some(k) = parse_marker(&text) {
                markers.insert(line, (col, k));
            }
            col += (i - start) as u32;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<i64>().map_err(|_| {
                ParseError::new(ParseErrorKind::Syntax(format!("integer literal `{text}` too large")), span)
            })?;
            tokens.push(Token { tok: Tok::Int(value), span });
            col += (i - start) as u32;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == text) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(text),
            };
            tokens.push(Token { tok, span });
            col += (i - start) as u32;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                tokens.push(Token { tok: Tok::Sym(s), span });
                i += s.len();
                col += s.len() as u32;
            }
            None => {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax(format!("unexpected character `{c}`")),
                    span,
                ))
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span::new(line, col),
    });
    Ok(Lexed { tokens, markers })
}
