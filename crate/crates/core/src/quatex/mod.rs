//! A MultiQuaTEx subset: recursive observable functions over simulation
//! states with a next-state operator (`#`), and `eval E[...]` /
//! `eval parametric(E[...], x, start, step, end)` directives.
//!
//! ```text
//! obsAtStep(t, obs) =
//!   if (s.rval("steps") == t) then s.rval(obs)
//!   else # obsAtStep(t, obs) fi;
//! eval parametric(E[ obsAtStep(t, "logGDP") ], t, 1, 10, 201);
//! ```

mod ast;
mod eval;
mod lexer;
mod parser;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use ast::{BinOp, Directive, Expr, FunctionDef, QuerySpec};
pub use eval::{evaluate, evaluate_instance, EvalError, EvalErrorKind, Value, COMPARE_TOLERANCE};
pub use lexer::{LexError, Position, Token};
pub use parser::{parse, ParseError};

/// One estimated quantity: a directive, plus its binding when parametric.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub directive: usize,
    pub binding: Option<f64>,
    /// Row label in output files.
    pub label: String,
}

/// Bindings of a parametric directive: `start, start + step, ...` up to and
/// including `end` when the progression hits it.
pub fn parametric_values(start: f64, step: f64, end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(step > 0.0) || start > end {
        return out;
    }
    // Slack absorbs rounding in start + k * step for fractional steps.
    let slack = step * 1e-9;
    let mut k = 0u64;
    loop {
        let v = start + k as f64 * step;
        if v > end + slack {
            return out;
        }
        out.push(v);
        k += 1;
    }
}

/// Bindings of one directive (empty for a non-parametric one).
pub fn directive_instances(d: &Directive) -> Vec<f64> {
    match d {
        Directive::Single { .. } => Vec::new(),
        Directive::Parametric { start, step, end, .. } => parametric_values(*start, *step, *end),
    }
}

/// Every instance of the query, directives in file order.
///
/// Labels are the binding value for parametric directives and `E<k>` for
/// the k-th (0-based) directive when it is not parametric. With more than
/// one directive every label gets a `d<k>/` prefix.
pub fn instances(query: &QuerySpec) -> Vec<Instance> {
    let multi = query.directives.len() > 1;
    let mut out = Vec::new();
    for (k, d) in query.directives.iter().enumerate() {
        let prefix = if multi { format!("d{k}/") } else { String::new() };
        match d {
            Directive::Single { .. } => {
                out.push(Instance { directive: k, binding: None, label: format!("{prefix}E{k}") })
            }
            Directive::Parametric { .. } => {
                for b in directive_instances(d) {
                    out.push(Instance { directive: k, binding: Some(b), label: format!("{prefix}{b}") });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
