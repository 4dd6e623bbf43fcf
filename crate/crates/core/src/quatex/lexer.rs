use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Line and column, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Position {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    Ident(String),
    Number(f64),
    Str(String),
    /// `s.rval`
    Rval,
    If,
    Then,
    Else,
    Fi,
    Eval,
    Parametric,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Assign,
    EqEq,
    Lt,
    Gt,
    Plus,
    Minus,
    Star,
    Slash,
    Hash,
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Token::Ident(name) => return write!(f, "identifier `{name}`"),
            Token::Number(n) => return write!(f, "number {n}"),
            Token::Str(s) => return write!(f, "string \"{s}\""),
            Token::Rval => "`s.rval`",
            Token::If => "`if`",
            Token::Then => "`then`",
            Token::Else => "`else`",
            Token::Fi => "`fi`",
            Token::Eval => "`eval`",
            Token::Parametric => "`parametric`",
            Token::LParen => "`(`",
            Token::RParen => "`)`",
            Token::LBracket => "`[`",
            Token::RBracket => "`]`",
            Token::Comma => "`,`",
            Token::Semi => "`;`",
            Token::Assign => "`=`",
            Token::EqEq => "`==`",
            Token::Lt => "`<`",
            Token::Gt => "`>`",
            Token::Plus => "`+`",
            Token::Minus => "`-`",
            Token::Star => "`*`",
            Token::Slash => "`/`",
            Token::Hash => "`#`",
            Token::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub token: Token,
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub pos: Position,
    pub found: char,
    pub message: &'static str,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lexical error at {}: {} ({:?})", self.pos, self.message, self.found)
    }
}

struct Cursor<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    rest: &'a str,
    pos: Position,
}

impl<'a> Cursor<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        self.rest = &self.rest[c.len_utf8()..];
        if c == '\n' {
            self.pos.line += 1;
            self.pos.column = 1;
        } else {
            self.pos.column += 1;
        }
        Some(c)
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Spanned>, LexError> {
    let mut cur = Cursor { chars: src.chars().peekable(), rest: src, pos: Position { line: 1, column: 1 } };
    let mut out = Vec::new();
    loop {
        // Whitespace and `//` comments.
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if cur.rest.starts_with("//") {
                while let Some(c) = cur.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        let pos = cur.pos;
        let Some(c) = cur.peek() else {
            out.push(Spanned { token: Token::Eof, pos });
            return Ok(out);
        };
        let token = match c {
            '(' => single(&mut cur, Token::LParen),
            ')' => single(&mut cur, Token::RParen),
            '[' => single(&mut cur, Token::LBracket),
            ']' => single(&mut cur, Token::RBracket),
            ',' => single(&mut cur, Token::Comma),
            ';' => single(&mut cur, Token::Semi),
            '<' => single(&mut cur, Token::Lt),
            '>' => single(&mut cur, Token::Gt),
            '+' => single(&mut cur, Token::Plus),
            '-' => single(&mut cur, Token::Minus),
            '*' => single(&mut cur, Token::Star),
            '/' => single(&mut cur, Token::Slash),
            '#' => single(&mut cur, Token::Hash),
            '=' => {
                cur.bump();
                if cur.peek() == Some('=') {
                    cur.bump();
                    Token::EqEq
                } else {
                    Token::Assign
                }
            }
            '"' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        Some('"') => break,
                        Some('\n') | None => {
                            return Err(LexError { pos, found: '"', message: "unterminated string literal" })
                        }
                        Some(ch) => s.push(ch),
                    }
                }
                Token::Str(s)
            }
            c if c.is_ascii_digit() || c == '.' => lex_number(&mut cur, pos)?,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(ch) = cur.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        ident.push(ch);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                if ident == "s" && cur.rest.starts_with(".rval") {
                    for _ in 0..5 {
                        cur.bump();
                    }
                    Token::Rval
                } else {
                    keyword(ident)
                }
            }
            other => return Err(LexError { pos, found: other, message: "unexpected character" }),
        };
        out.push(Spanned { token, pos });
    }
}

fn single(cur: &mut Cursor<'_>, t: Token) -> Token {
    cur.bump();
    t
}

fn keyword(ident: String) -> Token {
    match ident.as_str() {
        "if" => Token::If,
        "then" => Token::Then,
        "else" => Token::Else,
        "fi" => Token::Fi,
        "eval" => Token::Eval,
        "parametric" => Token::Parametric,
        _ => Token::Ident(ident),
    }
}

fn lex_number(cur: &mut Cursor<'_>, pos: Position) -> Result<Token, LexError> {
    let mut text = String::new();
    let mut digits = 0;
    while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
        text.push(c);
        cur.bump();
        digits += 1;
    }
    if cur.peek() == Some('.') {
        text.push('.');
        cur.bump();
        while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
            text.push(c);
            cur.bump();
            digits += 1;
        }
    }
    if digits == 0 {
        return Err(LexError { pos, found: '.', message: "malformed number" });
    }
    if let Some(e @ ('e' | 'E')) = cur.peek() {
        text.push(e);
        cur.bump();
        if let Some(sign @ ('+' | '-')) = cur.peek() {
            text.push(sign);
            cur.bump();
        }
        let mut exp_digits = 0;
        while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
            text.push(c);
            cur.bump();
            exp_digits += 1;
        }
        if exp_digits == 0 {
            let found = cur.peek().unwrap_or(e);
            return Err(LexError { pos: cur.pos, found, message: "exponent without digits" });
        }
    }
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Token::Number)
        .ok_or(LexError { pos, found: text.chars().next().unwrap_or('0'), message: "number out of range" })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Token> {
        tokenize(src).unwrap().into_iter().map(|s| s.token).collect()
    }

    #[test]
    fn lexes_rval_and_comparisons() {
        assert_eq!(
            kinds("s.rval(\"steps\") == x // trailing"),
            vec![
                Token::Rval,
                Token::LParen,
                Token::Str("steps".into()),
                Token::RParen,
                Token::EqEq,
                Token::Ident("x".into()),
                Token::Eof
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("1 10.5 .25 2e3 1E-2"), vec![
            Token::Number(1.0),
            Token::Number(10.5),
            Token::Number(0.25),
            Token::Number(2000.0),
            Token::Number(0.01),
            Token::Eof
        ]);
    }

    #[test]
    fn reports_offending_char_and_position() {
        let err = tokenize("f(x) =\n  x @ 1;").unwrap_err();
        assert_eq!(err.found, '@');
        assert_eq!(err.pos, Position { line: 2, column: 5 });
        assert!(tokenize("\"open").is_err());
    }
}
