use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::ast::{BinOp, Directive, Expr, FunctionDef, QuerySpec};
use super::lexer::{tokenize, LexError, Position, Spanned, Token};

#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    Lex(LexError),
    Syntax { pos: Position, found: String, expected: Vec<&'static str> },
    Semantic { message: String },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Lex(e) => e.fmt(f),
            ParseError::Syntax { pos, found, expected } => {
                write!(f, "syntax error at {pos}: found {found}, expected ")?;
                for (i, e) in expected.iter().enumerate() {
                    if i > 0 {
                        f.write_str(if i + 1 == expected.len() { " or " } else { ", " })?;
                    }
                    f.write_str(e)?;
                }
                Ok(())
            }
            ParseError::Semantic { message } => write!(f, "semantic error: {message}"),
        }
    }
}

impl core::error::Error for ParseError {}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError::Lex(e)
    }
}

/// Parses and checks a query.
///
/// Grammar:
/// ```text
/// query     := fundef* directive+
/// fundef    := ID "(" params ")" "=" expr ";"
/// directive := "eval" ( "parametric" "(" "E" "[" expr "]" "," ID "," NUM "," NUM "," NUM ")"
///                     | "E" "[" expr "]" ) ";"
/// expr      := cmp
/// cmp       := sum (("==" | "<" | ">") sum)*
/// sum       := prod (("+" | "-") prod)*
/// prod      := unary (("*" | "/") unary)*
/// unary     := "-" unary | atom
/// atom      := NUM | STRING | ID | ID "(" args ")" | "#" ID "(" args ")"
///            | "s.rval" "(" expr ")" | "(" expr ")"
///            | "if" "(" expr ")" "then" expr "else" expr "fi"
/// ```
pub fn parse(src: &str) -> Result<QuerySpec, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, at: 0 };
    let spec = p.query()?;
    check(&spec)?;
    Ok(spec)
}

struct Parser {
    tokens: Vec<Spanned>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at].token
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.at].token.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&'static str]) -> Result<T, ParseError> {
        let s = &self.tokens[self.at];
        Err(ParseError::Syntax { pos: s.pos, found: format!("{}", s.token), expected: expected.to_vec() })
    }

    fn expect(&mut self, want: Token, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            self.error(&[name])
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Token::Ident(_) => match self.advance() {
                Token::Ident(s) => Ok(s),
                _ => unreachable!(),
            },
            _ => self.error(&["identifier"]),
        }
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let negative = if *self.peek() == Token::Minus {
            self.advance();
            true
        } else {
            false
        };
        match self.peek() {
            Token::Number(n) => {
                let n = *n;
                self.advance();
                Ok(if negative { -n } else { n })
            }
            _ => self.error(&["number"]),
        }
    }

    fn query(&mut self) -> Result<QuerySpec, ParseError> {
        let mut spec = QuerySpec::default();
        while let Token::Ident(_) = self.peek() {
            spec.functions.push(self.fundef()?);
        }
        while *self.peek() == Token::Eval {
            spec.directives.push(self.directive()?);
        }
        if spec.directives.is_empty() {
            return self.error(&["identifier", "`eval`"]);
        }
        if *self.peek() != Token::Eof {
            return self.error(&["`eval`", "end of input"]);
        }
        Ok(spec)
    }

    fn fundef(&mut self) -> Result<FunctionDef, ParseError> {
        let name = self.ident()?;
        self.expect(Token::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Token::RParen {
            loop {
                params.push(self.ident()?);
                match self.peek() {
                    Token::Comma => {
                        self.advance();
                    }
                    Token::RParen => break,
                    _ => return self.error(&["`,`", "`)`"]),
                }
            }
        }
        self.advance();
        self.expect(Token::Assign, "`=`")?;
        let body = self.expr()?;
        self.expect_after_expr(Token::Semi, "`;`")?;
        Ok(FunctionDef { name, params, body })
    }

    /// Like `expect`, but lists the binary operators that could also have
    /// continued the expression.
    fn expect_after_expr(&mut self, want: Token, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            self.error(&[name, "binary operator"])
        }
    }

    fn directive(&mut self) -> Result<Directive, ParseError> {
        self.expect(Token::Eval, "`eval`")?;
        let d = if *self.peek() == Token::Parametric {
            self.advance();
            self.expect(Token::LParen, "`(`")?;
            let expr = self.expectation()?;
            self.expect(Token::Comma, "`,`")?;
            let param = self.ident()?;
            self.expect(Token::Comma, "`,`")?;
            let start = self.signed_number()?;
            self.expect(Token::Comma, "`,`")?;
            let step = self.signed_number()?;
            self.expect(Token::Comma, "`,`")?;
            let end = self.signed_number()?;
            self.expect(Token::RParen, "`)`")?;
            Directive::Parametric { expr, param, start, step, end }
        } else {
            Directive::Single { expr: self.expectation()? }
        };
        self.expect(Token::Semi, "`;`")?;
        Ok(d)
    }

    fn expectation(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Token::Ident(e) if e == "E" => {
                self.advance();
            }
            _ => return self.error(&["`E`"]),
        }
        self.expect(Token::LBracket, "`[`")?;
        let e = self.expr()?;
        self.expect_after_expr(Token::RBracket, "`]`")?;
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.sum()?;
        loop {
            let op = match self.peek() {
                Token::EqEq => BinOp::Eq,
                Token::Lt => BinOp::Lt,
                Token::Gt => BinOp::Gt,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.sum()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.product()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Token::Minus {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Token::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() == Token::RParen {
            self.advance();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek() {
                Token::Comma => {
                    self.advance();
                }
                Token::RParen => {
                    self.advance();
                    return Ok(args);
                }
                _ => return self.error(&["`,`", "`)`", "binary operator"]),
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Token::Number(n) => {
                self.advance();
                Ok(Expr::Num(n))
            }
            Token::Str(s) => {
                self.advance();
                Ok(Expr::Str(s))
            }
            Token::Ident(name) => {
                self.advance();
                if *self.peek() == Token::LParen {
                    let args = self.args()?;
                    Ok(Expr::Call { name, args })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Token::Hash => {
                self.advance();
                let name = self.ident()?;
                let args = self.args()?;
                Ok(Expr::Next { name, args })
            }
            Token::Rval => {
                self.advance();
                self.expect(Token::LParen, "`(`")?;
                let arg = self.expr()?;
                self.expect_after_expr(Token::RParen, "`)`")?;
                Ok(Expr::Rval(Box::new(arg)))
            }
            Token::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect_after_expr(Token::RParen, "`)`")?;
                Ok(e)
            }
            Token::If => {
                self.advance();
                self.expect(Token::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect_after_expr(Token::RParen, "`)`")?;
                self.expect(Token::Then, "`then`")?;
                let then = self.expr()?;
                self.expect_after_expr(Token::Else, "`else`")?;
                let otherwise = self.expr()?;
                self.expect_after_expr(Token::Fi, "`fi`")?;
                Ok(Expr::If { cond: Box::new(cond), then: Box::new(then), otherwise: Box::new(otherwise) })
            }
            _ => {
                self.error(&["number", "string", "identifier", "`#`", "`s.rval`", "`(`", "`if`", "`-`"])
            }
        }
    }
}

fn semantic<T>(message: String) -> Result<T, ParseError> {
    Err(ParseError::Semantic { message })
}

/// Scoping, arity, tail-position and recursion checks.
fn check(spec: &QuerySpec) -> Result<(), ParseError> {
    let mut arity = BTreeMap::new();
    for f in &spec.functions {
        if arity.insert(f.name.as_str(), f.params.len()).is_some() {
            return semantic(format!("function `{}` is defined twice", f.name));
        }
        let mut seen = BTreeSet::new();
        for p in &f.params {
            if !seen.insert(p.as_str()) {
                return semantic(format!("parameter `{p}` repeated in `{}`", f.name));
            }
        }
    }
    for f in &spec.functions {
        let scope: Vec<&str> = f.params.iter().map(String::as_str).collect();
        check_expr(&f.body, &scope, &arity, true, &format!("function `{}`", f.name))?;
    }
    for (i, d) in spec.directives.iter().enumerate() {
        let ctx = format!("directive {}", i + 1);
        match d {
            Directive::Single { expr } => check_expr(expr, &[], &arity, true, &ctx)?,
            Directive::Parametric { expr, param, start, step, end } => {
                if !(*step > 0.0) {
                    return semantic(format!("{ctx}: parametric step must be > 0 (got {step})"));
                }
                if start > end {
                    return semantic(format!("{ctx}: parametric start {start} exceeds end {end}"));
                }
                check_expr(expr, &[param.as_str()], &arity, true, &ctx)?;
            }
        }
    }
    check_plain_call_cycles(spec)
}

fn check_expr(
    e: &Expr,
    scope: &[&str],
    arity: &BTreeMap<&str, usize>,
    tail: bool,
    ctx: &str,
) -> Result<(), ParseError> {
    let sub = |e: &Expr, tail: bool| check_expr(e, scope, arity, tail, ctx);
    match e {
        Expr::Num(_) | Expr::Str(_) => Ok(()),
        Expr::Var(v) => {
            if scope.contains(&v.as_str()) {
                Ok(())
            } else {
                semantic(format!("{ctx}: undefined variable `{v}`"))
            }
        }
        Expr::Rval(arg) => match arg.as_ref() {
            Expr::Str(_) | Expr::Var(_) => sub(arg, false),
            _ => semantic(format!("{ctx}: s.rval expects a string literal or a parameter")),
        },
        Expr::Neg(inner) => sub(inner, false),
        Expr::Binary { lhs, rhs, .. } => {
            sub(lhs, false)?;
            sub(rhs, false)
        }
        Expr::If { cond, then, otherwise } => {
            sub(cond, false)?;
            sub(then, tail)?;
            sub(otherwise, tail)
        }
        Expr::Call { name, args } | Expr::Next { name, args } => {
            let kind = if matches!(e, Expr::Next { .. }) { "next-state call" } else { "call" };
            match arity.get(name.as_str()) {
                None => return semantic(format!("{ctx}: undefined function `{name}`")),
                Some(&n) if n != args.len() => {
                    return semantic(format!(
                        "{ctx}: `{name}` takes {n} argument(s), {} given",
                        args.len()
                    ))
                }
                _ => {}
            }
            if !tail {
                return semantic(format!("{ctx}: {kind} to `{name}` must be in tail position"));
            }
            args.iter().try_for_each(|a| sub(a, false))
        }
    }
}

fn plain_calls<'a>(e: &'a Expr, out: &mut Vec<&'a str>) {
    match e {
        Expr::Call { name, args } => {
            out.push(name);
            args.iter().for_each(|a| plain_calls(a, out));
        }
        Expr::Next { args, .. } => args.iter().for_each(|a| plain_calls(a, out)),
        Expr::If { cond, then, otherwise } => {
            plain_calls(cond, out);
            plain_calls(then, out);
            plain_calls(otherwise, out);
        }
        Expr::Binary { lhs, rhs, .. } => {
            plain_calls(lhs, out);
            plain_calls(rhs, out);
        }
        Expr::Neg(x) | Expr::Rval(x) => plain_calls(x, out),
        Expr::Num(_) | Expr::Str(_) | Expr::Var(_) => {}
    }
}

/// Recursion must go through `#`; a cycle of same-state calls never ends.
fn check_plain_call_cycles(spec: &QuerySpec) -> Result<(), ParseError> {
    let mut graph: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for f in &spec.functions {
        let mut callees = Vec::new();
        plain_calls(&f.body, &mut callees);
        graph.insert(f.name.as_str(), callees);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    fn visit<'a>(
        n: &'a str,
        graph: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
    ) -> Result<(), ParseError> {
        match state.get(n) {
            Some(1) => return semantic(format!("`{n}` calls itself without `#`")),
            Some(2) => return Ok(()),
            _ => {}
        }
        state.insert(n, 1);
        for m in graph.get(n).into_iter().flatten() {
            visit(m, graph, state)?;
        }
        state.insert(n, 2);
        Ok(())
    }
    for f in &spec.functions {
        visit(&f.name, &graph, &mut state)?;
    }
    Ok(())
}
