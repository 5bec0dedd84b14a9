use std::fmt;

use super::ast::Span;
use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Select,
    From,
    Where,
    Group,
    By,
    Having,
    Order,
    Asc,
    Desc,
    Limit,
    Offset,
    Distinct,
    And,
    Or,
    Not,
    In,
    Between,
    As,
    Union,
    All,
    Null,
    True,
    False,
}

const KEYWORDS: &[(&str, Keyword)] = &[
    ("SELECT", Keyword::Select),
    ("FROM", Keyword::From),
    ("WHERE", Keyword::Where),
    ("GROUP", Keyword::Group),
    ("BY", Keyword::By),
    ("HAVING", Keyword::Having),
    ("ORDER", Keyword::Order),
    ("ASC", Keyword::Asc),
    ("DESC", Keyword::Desc),
    ("LIMIT", Keyword::Limit),
    ("OFFSET", Keyword::Offset),
    ("DISTINCT", Keyword::Distinct),
    ("AND", Keyword::And),
    ("OR", Keyword::Or),
    ("NOT", Keyword::Not),
    ("IN", Keyword::In),
    ("BETWEEN", Keyword::Between),
    ("AS", Keyword::As),
    ("UNION", Keyword::Union),
    ("ALL", Keyword::All),
    ("NULL", Keyword::Null),
    ("TRUE", Keyword::True),
    ("FALSE", Keyword::False),
];

impl Keyword {
    pub fn lookup(word: &str) -> Option<Keyword> {
        KEYWORDS
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(word))
            .map(|(_, kw)| *kw)
    }

    pub fn as_str(self) -> &'static str {
        KEYWORDS.iter().find(|(_, k)| *k == self).unwrap().0
    }
}

/// Whether `word` must be quoted to be used as an identifier.
pub fn is_reserved(word: &str) -> bool {
    Keyword::lookup(word).is_some()
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    QuotedIdent(String),
    Keyword(Keyword),
    Int(u64),
    Float(f32),
    Str(String),
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Slash,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Semicolon,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier {s}"),
            TokenKind::QuotedIdent(s) => write!(f, "identifier \"{s}\""),
            TokenKind::Keyword(k) => f.write_str(k.as_str()),
            TokenKind::Int(v) => write!(f, "{v}"),
            TokenKind::Float(v) => write!(f, "{v}"),
            TokenKind::Str(s) => write!(f, "'{s}'"),
            TokenKind::Comma => f.write_str(","),
            TokenKind::Dot => f.write_str("."),
            TokenKind::LParen => f.write_str("("),
            TokenKind::RParen => f.write_str(")"),
            TokenKind::Star => f.write_str("*"),
            TokenKind::Plus => f.write_str("+"),
            TokenKind::Minus => f.write_str("-"),
            TokenKind::Slash => f.write_str("/"),
            TokenKind::Eq => f.write_str("="),
            TokenKind::Ne => f.write_str("!="),
            TokenKind::Lt => f.write_str("<"),
            TokenKind::Le => f.write_str("<="),
            TokenKind::Gt => f.write_str(">"),
            TokenKind::Ge => f.write_str(">="),
            TokenKind::Semicolon => f.write_str(";"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

struct Lexer<'s> {
    src: &'s str,
    pos: usize,
    line: u32,
    line_start: usize,
}

impl<'s> Lexer<'s> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span {
            start: self.pos,
            end: self.pos,
            line: self.line,
            column: (self.src[self.line_start..self.pos].chars().count() + 1) as u32,
        }
    }

    fn error(&self, span: Span, found: String, expected: &[&str]) -> FrontendError {
        FrontendError::Syntax {
            line: span.line,
            column: span.column,
            found,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('-') if self.peek2() == Some('-') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn number(&mut self, start: Span) -> Result<TokenKind, FrontendError> {
        let begin = self.pos;
        let mut is_float = false;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some('.') {
            is_float = true;
            self.bump();
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = (self.pos, self.line, self.line_start);
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                is_float = true;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
            } else {
                (self.pos, self.line, self.line_start) = save;
            }
        }
        let text = &self.src[begin..self.pos];
        if is_float {
            text.parse::<f32>()
                .map(TokenKind::Float)
                .map_err(|_| self.error(start, text.to_owned(), &["number"]))
        } else {
            text.parse::<u64>()
                .map(TokenKind::Int)
                .map_err(|_| self.error(start, text.to_owned(), &["integer within 64 bits"]))
        }
    }

    fn quoted(&mut self, quote: char, start: Span) -> Result<String, FrontendError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(self.error(
                        start,
                        "unterminated literal".into(),
                        &[&quote.to_string()],
                    ))
                }
                Some(c) if c == quote => {
                    if self.peek() == Some(quote) {
                        self.bump();
                        out.push(quote);
                    } else {
                        return Ok(out);
                    }
                }
                Some(c) => out.push(c),
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, FrontendError> {
        self.skip_trivia();
        let start = self.here();
        let Some(c) = self.peek() else {
            return Ok(Token {
                kind: TokenKind::Eof,
                span: start,
            });
        };
        let kind = match c {
            c if c.is_ascii_alphabetic() || c == '_' => {
                let begin = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.bump();
                }
                let word = &self.src[begin..self.pos];
                match Keyword::lookup(word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(word.to_owned()),
                }
            }
            c if c.is_ascii_digit() => self.number(start)?,
            '.' if matches!(self.peek2(), Some(d) if d.is_ascii_digit()) => self.number(start)?,
            '\'' => TokenKind::Str(self.quoted('\'', start)?),
            '"' => TokenKind::QuotedIdent(self.quoted('"', start)?),
            _ => {
                self.bump();
                let next = self.peek();
                let two = |k: TokenKind, lexer: &mut Self| {
                    lexer.bump();
                    k
                };
                match (c, next) {
                    ('<', Some('=')) => two(TokenKind::Le, self),
                    ('<', Some('>')) => two(TokenKind::Ne, self),
                    ('>', Some('=')) => two(TokenKind::Ge, self),
                    ('!', Some('=')) => two(TokenKind::Ne, self),
                    ('<', _) => TokenKind::Lt,
                    ('>', _) => TokenKind::Gt,
                    ('=', _) => TokenKind::Eq,
                    (',', _) => TokenKind::Comma,
                    ('.', _) => TokenKind::Dot,
                    ('(', _) => TokenKind::LParen,
                    (')', _) => TokenKind::RParen,
                    ('*', _) => TokenKind::Star,
                    ('+', _) => TokenKind::Plus,
                    ('-', _) => TokenKind::Minus,
                    ('/', _) => TokenKind::Slash,
                    (';', _) => TokenKind::Semicolon,
                    _ => return Err(self.error(start, c.to_string(), &[])),
                }
            }
        };
        let mut span = start;
        span.end = self.pos;
        Ok(Token { kind, span })
    }
}

/// Splits `src` into tokens; the last token is always `Eof`.
pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let mut lexer = Lexer {
        src,
        pos: 0,
        line: 1,
        line_start: 0,
    };
    let mut out = Vec::new();
    loop {
        let t = lexer.next_token()?;
        let eof = t.kind == TokenKind::Eof;
        out.push(t);
        if eof {
            return Ok(out);
        }
    }
}
