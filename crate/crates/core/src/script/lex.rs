use super::parse::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Kw(Kw),
    Punct(Punct),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Kw {
    Let,
    Emit,
    Return,
    If,
    Then,
    Else,
    And,
    Or,
    Not,
    True,
    False,
    Null,
    Get,
    AGet,
    Field,
    Default,
    Min,
    Max,
    Abs,
    Floor,
    Clamp,
    Sum,
    Count,
    Filter,
    In,
    Of,
    Where,
    Add,
    Remove,
    Replace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Punct {
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Lexeme {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn keyword(word: &str) -> Option<Kw> {
    Some(match word {
        "let" => Kw::Let,
        "emit" => Kw::Emit,
        "return" => Kw::Return,
        "if" => Kw::If,
        "then" => Kw::Then,
        "else" => Kw::Else,
        "and" => Kw::And,
        "or" => Kw::Or,
        "not" => Kw::Not,
        "true" => Kw::True,
        "false" => Kw::False,
        "null" => Kw::Null,
        "get" => Kw::Get,
        "aget" => Kw::AGet,
        "field" => Kw::Field,
        "default" => Kw::Default,
        "min" => Kw::Min,
        "max" => Kw::Max,
        "abs" => Kw::Abs,
        "floor" => Kw::Floor,
        "clamp" => Kw::Clamp,
        "sum" => Kw::Sum,
        "count" => Kw::Count,
        "filter" => Kw::Filter,
        "in" => Kw::In,
        "of" => Kw::Of,
        "where" => Kw::Where,
        "add" => Kw::Add,
        "remove" => Kw::Remove,
        "replace" => Kw::Replace,
        _ => return None,
    })
}

struct Scanner<'s> {
    rest: std::str::Chars<'s>,
    line: usize,
    col: usize,
}

impl<'s> Scanner<'s> {
    fn peek(&self) -> Option<char> {
        self.rest.clone().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest.next();
        match c {
            Some('\n') => {
                self.line += 1;
                self.col = 1;
            }
            Some(_) => self.col += 1,
            None => {}
        }
        c
    }

    fn eat(&mut self, want: char) -> bool {
        if self.peek() == Some(want) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, message: String) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            message,
        }
    }
}

pub(super) fn lex(source: &str) -> Result<Vec<Lexeme>, ParseError> {
    let mut s = Scanner {
        rest: source.chars(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = s.peek() {
        let (line, col) = (s.line, s.col);
        let push = |out: &mut Vec<Lexeme>, tok| out.push(Lexeme { tok, line, col });
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                s.bump();
            }
            '#' => {
                while let Some(c) = s.peek() {
                    if c == '\n' {
                        break;
                    }
                    s.bump();
                }
            }
            '"' => {
                s.bump();
                let mut text = String::new();
                loop {
                    match s.bump() {
                        Some('"') => break,
                        Some('\\') => match s.bump() {
                            Some('"') => text.push('"'),
                            Some('\\') => text.push('\\'),
                            Some('n') => text.push('\n'),
                            Some('t') => text.push('\t'),
                            other => return Err(s.error(format!("bad string escape {other:?}"))),
                        },
                        Some('\n') | None => {
                            return Err(s.error("unterminated string literal".into()))
                        }
                        Some(c) => text.push(c),
                    }
                }
                push(&mut out, Tok::Str(text));
            }
            '0'..='9' => {
                let mut text = String::new();
                while let Some(c) = s.peek() {
                    if c.is_ascii_digit() || c == '.' {
                        text.push(c);
                        s.bump();
                    } else {
                        break;
                    }
                }
                let n: f64 = text
                    .parse()
                    .map_err(|_| s.error(format!("bad number literal {text:?}")))?;
                push(&mut out, Tok::Num(n));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(c) = s.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        s.bump();
                    } else {
                        break;
                    }
                }
                match keyword(&word) {
                    Some(kw) => push(&mut out, Tok::Kw(kw)),
                    None => push(&mut out, Tok::Ident(word)),
                }
            }
            _ => {
                s.bump();
                let punct = match c {
                    '(' => Punct::LParen,
                    ')' => Punct::RParen,
                    '{' => Punct::LBrace,
                    '}' => Punct::RBrace,
                    ',' => Punct::Comma,
                    ';' => Punct::Semi,
                    '+' => Punct::Plus,
                    '-' => Punct::Minus,
                    '*' => Punct::Star,
                    '/' => Punct::Slash,
                    '=' => {
                        if s.eat('=') {
                            Punct::Eq
                        } else {
                            Punct::Assign
                        }
                    }
                    '!' => {
                        if s.eat('=') {
                            Punct::Ne
                        } else {
                            return Err(s.error("unexpected '!'".into()));
                        }
                    }
                    '<' => {
                        if s.eat('=') {
                            Punct::Le
                        } else {
                            Punct::Lt
                        }
                    }
                    '>' => {
                        if s.eat('=') {
                            Punct::Ge
                        } else {
                            Punct::Gt
                        }
                    }
                    other => return Err(s.error(format!("unexpected character {other:?}"))),
                };
                push(&mut out, Tok::Punct(punct));
            }
        }
    }
    Ok(out)
}
