use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::ast::{BinOp, Directive, Expr, FunctionDef, QuerySpec};
use super::{instances, Instance};
use crate::sim::{SimError, Simulator};

/// Tolerance for comparisons between non-integral reals.
pub const COMPARE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Str(String),
    Bool(bool),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Str(_) => "string",
            Value::Bool(_) => "boolean",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalErrorKind {
    /// The run hit its horizon while the instance still wanted a next state.
    Incomplete { step: u64 },
    Sim(SimError),
    Type { expected: &'static str, found: &'static str },
    Unbound(String),
    UnknownFunction(String),
    /// `#` or a call outside tail position (only reachable for unchecked ASTs).
    NonTail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    /// Label of the instance being evaluated.
    pub instance: String,
    pub kind: EvalErrorKind,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "instance {}: ", self.instance)?;
        match &self.kind {
            EvalErrorKind::Incomplete { step } => {
                write!(f, "run ended at step {step} before the query completed")
            }
            EvalErrorKind::Sim(e) => e.fmt(f),
            EvalErrorKind::Type { expected, found } => write!(f, "expected {expected}, found {found}"),
            EvalErrorKind::Unbound(v) => write!(f, "unbound variable `{v}`"),
            EvalErrorKind::UnknownFunction(name) => write!(f, "unknown function `{name}`"),
            EvalErrorKind::NonTail => f.write_str("call outside tail position"),
        }
    }
}

impl core::error::Error for EvalError {}

type Env = Vec<(String, Value)>;

enum Flow<'q> {
    Done(Value),
    /// Resume with `func(args)` on the next state.
    Advance(&'q FunctionDef, Vec<Value>),
}

struct Ctx<'q, 's, S: Simulator + ?Sized> {
    query: &'q QuerySpec,
    sim: &'s S,
}

fn num(v: Value) -> Result<f64, EvalErrorKind> {
    match v {
        Value::Num(n) => Ok(n),
        other => Err(EvalErrorKind::Type { expected: "number", found: other.kind() }),
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    if libm::trunc(a) == a && libm::trunc(b) == b {
        a == b
    } else {
        (a - b).abs() <= COMPARE_TOLERANCE
    }
}

impl<'q, S: Simulator + ?Sized> Ctx<'q, '_, S> {
    fn function(&self, name: &str) -> Result<&'q FunctionDef, EvalErrorKind> {
        self.query.function(name).ok_or_else(|| EvalErrorKind::UnknownFunction(name.into()))
    }

    fn value(&self, e: &Expr, env: &Env) -> Result<Value, EvalErrorKind> {
        Ok(match e {
            Expr::Num(n) => Value::Num(*n),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Var(v) => env
                .iter()
                .rev()
                .find(|(name, _)| name == v)
                .map(|(_, val)| val.clone())
                .ok_or_else(|| EvalErrorKind::Unbound(v.clone()))?,
            Expr::Rval(arg) => match self.value(arg, env)? {
                Value::Str(name) => Value::Num(self.sim.eval(&name).map_err(EvalErrorKind::Sim)?),
                other => return Err(EvalErrorKind::Type { expected: "string", found: other.kind() }),
            },
            Expr::Neg(inner) => Value::Num(-num(self.value(inner, env)?)?),
            Expr::Binary { op, lhs, rhs } => {
                let (l, r) = (self.value(lhs, env)?, self.value(rhs, env)?);
                match (op, l, r) {
                    (BinOp::Eq, Value::Str(a), Value::Str(b)) => Value::Bool(a == b),
                    (BinOp::Eq, Value::Bool(a), Value::Bool(b)) => Value::Bool(a == b),
                    (op, l, r) => {
                        let (a, b) = (num(l)?, num(r)?);
                        match op {
                            BinOp::Add => Value::Num(a + b),
                            BinOp::Sub => Value::Num(a - b),
                            BinOp::Mul => Value::Num(a * b),
                            BinOp::Div => Value::Num(a / b),
                            BinOp::Eq => Value::Bool(approx_eq(a, b)),
                            BinOp::Lt => Value::Bool(a < b && !approx_eq(a, b)),
                            BinOp::Gt => Value::Bool(a > b && !approx_eq(a, b)),
                        }
                    }
                }
            }
            Expr::If { cond, then, otherwise } => {
                if self.condition(cond, env)? {
                    self.value(then, env)?
                } else {
                    self.value(otherwise, env)?
                }
            }
            Expr::Call { .. } | Expr::Next { .. } => return Err(EvalErrorKind::NonTail),
        })
    }

    fn condition(&self, cond: &Expr, env: &Env) -> Result<bool, EvalErrorKind> {
        match self.value(cond, env)? {
            Value::Bool(b) => Ok(b),
            other => Err(EvalErrorKind::Type { expected: "boolean", found: other.kind() }),
        }
    }

    fn args(&self, args: &[Expr], env: &Env) -> Result<Vec<Value>, EvalErrorKind> {
        args.iter().map(|a| self.value(a, env)).collect()
    }

    /// Evaluates an expression in tail position on the current state.
    fn tail(&self, mut expr: &'q Expr, mut env: Env) -> Result<Flow<'q>, EvalErrorKind> {
        loop {
            match expr {
                Expr::If { cond, then, otherwise } => {
                    expr = if self.condition(cond, &env)? { then } else { otherwise };
                }
                Expr::Call { name, args } => {
                    let f = self.function(name)?;
                    let vals = self.args(args, &env)?;
                    env = bind(f, vals);
                    expr = &f.body;
                }
                Expr::Next { name, args } => {
                    let f = self.function(name)?;
                    return Ok(Flow::Advance(f, self.args(args, &env)?));
                }
                other => return Ok(Flow::Done(self.value(other, &env)?)),
            }
        }
    }
}

fn bind(f: &FunctionDef, vals: Vec<Value>) -> Env {
    f.params.iter().cloned().zip(vals).collect()
}

/// Evaluates every directive instance of `query` over one run.
///
/// The run must be freshly reset. Pending instances are re-evaluated on each
/// new state; the run advances once whenever at least one instance asked for
/// the next state, so the number of advances equals the deepest recursion.
/// Values come back in [`instances`] order.
pub fn evaluate<S: Simulator + ?Sized>(query: &QuerySpec, sim: &mut S) -> Result<Vec<f64>, EvalError> {
    let list = instances(query);
    let mut results: Vec<Option<f64>> = alloc::vec![None; list.len()];
    let mut pending: Vec<(usize, &FunctionDef, Vec<Value>)> = Vec::new();

    let wrap = |inst: &Instance, kind| EvalError { instance: inst.label.clone(), kind };
    let finish = |inst: &Instance, v: Value| num(v).map_err(|k| wrap(inst, k));

    {
        let ctx = Ctx { query, sim: &*sim };
        for (i, inst) in list.iter().enumerate() {
            let directive = &query.directives[inst.directive];
            let env: Env = match (directive, inst.binding) {
                (Directive::Parametric { param, .. }, Some(b)) => alloc::vec![(param.clone(), Value::Num(b))],
                _ => Vec::new(),
            };
            match ctx.tail(directive.expr(), env).map_err(|k| wrap(inst, k))? {
                Flow::Done(v) => results[i] = Some(finish(inst, v)?),
                Flow::Advance(f, args) => pending.push((i, f, args)),
            }
        }
    }

    while let Some(&(first, _, _)) = pending.first() {
        if let Err(e) = sim.next() {
            let kind = match e {
                SimError::OutOfHorizon { step, .. } => EvalErrorKind::Incomplete { step },
                other => EvalErrorKind::Sim(other),
            };
            return Err(wrap(&list[first], kind));
        }
        let ctx = Ctx { query, sim: &*sim };
        let mut still = Vec::with_capacity(pending.len());
        for (i, f, args) in pending {
            let env = bind(f, args);
            match ctx.tail(&f.body, env).map_err(|k| wrap(&list[i], k))? {
                Flow::Done(v) => results[i] = Some(finish(&list[i], v)?),
                Flow::Advance(f, args) => still.push((i, f, args)),
            }
        }
        pending = still;
    }

    Ok(results.into_iter().map(|r| r.expect("every instance completed")).collect())
}

/// Evaluates a single instance on its own run (reference path for tests and
/// diagnostics; production estimation uses [`evaluate`]).
pub fn evaluate_instance<S: Simulator + ?Sized>(
    query: &QuerySpec,
    instance: &Instance,
    sim: &mut S,
) -> Result<f64, EvalError> {
    let single = QuerySpec {
        functions: query.functions.clone(),
        directives: alloc::vec![match (&query.directives[instance.directive], instance.binding) {
            (Directive::Parametric { expr, param, .. }, Some(b)) => Directive::Parametric {
                expr: expr.clone(),
                param: param.clone(),
                start: b,
                step: 1.0,
                end: b,
            },
            (d, _) => d.clone(),
        }],
    };
    let mut out = evaluate(&single, sim).map_err(|mut e| {
        e.instance = instance.label.clone();
        e
    })?;
    out.pop().ok_or_else(|| EvalError {
        instance: instance.label.clone(),
        kind: EvalErrorKind::Type { expected: "number", found: "nothing" },
    })
}
