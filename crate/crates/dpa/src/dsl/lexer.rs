//! Tokens with source positions. `--` starts a comment that runs to the end
//! of the line.

use std::fmt;

use super::{Diagnostic, Pos};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    // keywords
    Const,
    Channel,
    Fun,
    Atom,
    Instance,
    Component,
    Version,
    Stop,
    Skip,
    Div,
    If,
    Then,
    Else,
    Not,
    And,
    Or,
    True,
    False,
    // punctuation
    Arrow,     // ->
    LArrow,    // <-
    ExtChoice, // []
    IntChoice, // |~|
    Interrupt, // /\
    Backslash,
    LRename, // [[
    RRename, // ]]
    LExt,    // {|
    RExt,    // |}
    DotDot,
    Dot,
    Bang,
    Query,
    Amp,
    Semi,
    Comma,
    Colon,
    At,
    Eq,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Caret,
    Hash,
    Bar,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "identifier `{s}`"),
            Tok::Int(i) => return write!(f, "integer {i}"),
            Tok::Const => "const",
            Tok::Channel => "channel",
            Tok::Fun => "fun",
            Tok::Atom => "atom",
            Tok::Instance => "instance",
            Tok::Component => "component",
            Tok::Version => "version",
            Tok::Stop => "STOP",
            Tok::Skip => "SKIP",
            Tok::Div => "DIV",
            Tok::If => "if",
            Tok::Then => "then",
            Tok::Else => "else",
            Tok::Not => "not",
            Tok::And => "and",
            Tok::Or => "or",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Arrow => "->",
            Tok::LArrow => "<-",
            Tok::ExtChoice => "[]",
            Tok::IntChoice => "|~|",
            Tok::Interrupt => "/\\",
            Tok::Backslash => "\\",
            Tok::LRename => "[[",
            Tok::RRename => "]]",
            Tok::LExt => "{|",
            Tok::RExt => "|}",
            Tok::DotDot => "..",
            Tok::Dot => ".",
            Tok::Bang => "!",
            Tok::Query => "?",
            Tok::Amp => "&",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::At => "@",
            Tok::Eq => "=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Caret => "^",
            Tok::Hash => "#",
            Tok::Bar => "|",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Eof => "end of input",
        };
        write!(f, "`{s}`")
    }
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "const" => Tok::Const,
        "channel" => Tok::Channel,
        "fun" => Tok::Fun,
        "atom" => Tok::Atom,
        "instance" => Tok::Instance,
        "component" => Tok::Component,
        "version" => Tok::Version,
        "STOP" => Tok::Stop,
        "SKIP" => Tok::Skip,
        "DIV" => Tok::Div,
        "if" => Tok::If,
        "then" => Tok::Then,
        "else" => Tok::Else,
        "not" => Tok::Not,
        "and" => Tok::And,
        "or" => Tok::Or,
        "true" => Tok::True,
        "false" => Tok::False,
        _ => return None,
    })
}

// longest first
const SYMBOLS: &[(&str, Tok)] = &[
    ("|~|", Tok::IntChoice),
    ("->", Tok::Arrow),
    ("<-", Tok::LArrow),
    ("[]", Tok::ExtChoice),
    ("/\\", Tok::Interrupt),
    ("[[", Tok::LRename),
    ("]]", Tok::RRename),
    ("{|", Tok::LExt),
    ("|}", Tok::RExt),
    ("..", Tok::DotDot),
    ("==", Tok::EqEq),
    ("!=", Tok::Ne),
    ("<=", Tok::Le),
    (">=", Tok::Ge),
    (".", Tok::Dot),
    ("!", Tok::Bang),
    ("?", Tok::Query),
    ("&", Tok::Amp),
    (";", Tok::Semi),
    (",", Tok::Comma),
    (":", Tok::Colon),
    ("@", Tok::At),
    ("=", Tok::Eq),
    ("<", Tok::Lt),
    (">", Tok::Gt),
    ("+", Tok::Plus),
    ("-", Tok::Minus),
    ("*", Tok::Star),
    ("/", Tok::Slash),
    ("%", Tok::Percent),
    ("^", Tok::Caret),
    ("#", Tok::Hash),
    ("|", Tok::Bar),
    ("(", Tok::LParen),
    (")", Tok::RParen),
    ("{", Tok::LBrace),
    ("}", Tok::RBrace),
    ("\\", Tok::Backslash),
];

pub fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, Vec<Diagnostic>> {
    let mut out = Vec::new();
    let mut errs = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut rest = src;
    let advance = |rest: &mut &str, n: usize, line: &mut usize, col: &mut usize| {
        for c in rest[..n].chars() {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *rest = &rest[n..];
    };
    while let Some(c) = rest.chars().next() {
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut rest, c.len_utf8(), &mut line, &mut col);
            continue;
        }
        if rest.starts_with("--") {
            let n = rest.find('\n').unwrap_or(rest.len());
            advance(&mut rest, n, &mut line, &mut col);
            continue;
        }
        if c.is_ascii_digit() {
            let n = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
            match rest[..n].parse::<i64>() {
                Ok(v) => out.push((Tok::Int(v), pos)),
                Err(_) => errs.push(Diagnostic::error(pos, format!("integer literal `{}` is too large", &rest[..n]))),
            }
            advance(&mut rest, n, &mut line, &mut col);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let n = rest.find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '\'')).unwrap_or(rest.len());
            let word = &rest[..n];
            out.push((keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string())), pos));
            advance(&mut rest, n, &mut line, &mut col);
            continue;
        }
        if let Some((s, t)) = SYMBOLS.iter().find(|(s, _)| rest.starts_with(s)) {
            out.push((t.clone(), pos));
            advance(&mut rest, s.len(), &mut line, &mut col);
            continue;
        }
        errs.push(Diagnostic::error(pos, format!("unexpected character `{c}`")));
        advance(&mut rest, c.len_utf8(), &mut line, &mut col);
    }
    out.push((Tok::Eof, Pos { line, col }));
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(errs)
    }
}
