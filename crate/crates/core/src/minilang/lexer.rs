use super::error::{Pos, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Unsigned literal; may be 2^63 when it is the operand of a unary minus.
    Int(u64),
    Str(String),
    Annot(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Annot(s) => format!("annotation `@{s}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const PUNCTS: [&str; 23] = [
    "->", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", ",", ";", ":", "=", "<", ">",
    "+", "-", "*", "/", "%", "!",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance!(1);
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance!(1);
            }
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<u64>()
                .ok()
                .filter(|v| *v <= 1u64 << 63)
                .ok_or_else(|| SyntaxError::new(pos, format!("integer literal {text} out of range")))?;
            out.push(Token {
                tok: Tok::Int(value),
                pos,
            });
            continue;
        }
        if c == '"' {
            advance!(1);
            let start = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                advance!(1);
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(SyntaxError::new(pos, "unterminated string literal"));
            }
            let text: String = chars[start..i].iter().collect();
            advance!(1);
            out.push(Token {
                tok: Tok::Str(text),
                pos,
            });
            continue;
        }
        if c == '@' {
            advance!(1);
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance!(1);
            }
            out.push(Token {
                tok: Tok::Annot(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                advance!(p.len());
                out.push(Token {
                    tok: Tok::Punct(p),
                    pos,
                });
            }
            None => return Err(SyntaxError::new(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}
