use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Lt,
    Gt,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Str(String),
    /// Formal parameter (or the parametric binding in a directive).
    Var(String),
    /// `s.rval(arg)`; the argument is a string literal or a parameter.
    Rval(Box<Expr>),
    Neg(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    If { cond: Box<Expr>, then: Box<Expr>, otherwise: Box<Expr> },
    /// Call evaluated on the current state.
    Call { name: String, args: Vec<Expr> },
    /// `# f(args)`: call evaluated on the next state.
    Next { name: String, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    /// `eval E[ expr ];`
    Single { expr: Expr },
    /// `eval parametric(E[ expr ], param, start, step, end);`
    Parametric { expr: Expr, param: String, start: f64, step: f64, end: f64 },
}

impl Directive {
    pub fn expr(&self) -> &Expr {
        match self {
            Directive::Single { expr } | Directive::Parametric { expr, .. } => expr,
        }
    }
}

/// A parsed query file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuerySpec {
    pub functions: Vec<FunctionDef>,
    pub directives: Vec<Directive>,
}

impl QuerySpec {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Expr]) -> fmt::Result {
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

// Binary nodes are printed fully parenthesized, so printing and re-parsing
// reproduces the tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Str(s) => write!(f, "\"{s}\""),
            Expr::Var(v) => f.write_str(v),
            Expr::Rval(arg) => write!(f, "s.rval({arg})"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::If { cond, then, otherwise } => {
                write!(f, "if ({cond}) then {then} else {otherwise} fi")
            }
            Expr::Call { name, args } => {
                f.write_str(name)?;
                write_args(f, args)
            }
            Expr::Next { name, args } => {
                write!(f, "# {name}")?;
                write_args(f, args)
            }
        }
    }
}

impl fmt::Display for FunctionDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(p)?;
        }
        write!(f, ") =\n  {};", self.body)
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::Single { expr } => write!(f, "eval E[ {expr} ];"),
            Directive::Parametric { expr, param, start, step, end } => {
                write!(f, "eval parametric(E[ {expr} ], {param}, {start}, {step}, {end});")
            }
        }
    }
}

impl fmt::Display for QuerySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for func in &self.functions {
            writeln!(f, "{func}")?;
        }
        for d in &self.directives {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}
