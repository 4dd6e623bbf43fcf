use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::sim::{ScriptedSimulator, Simulator};

const TRANSIENT: &str = r#"
obsAtStep(x, obs) =
  if (s.rval("steps") == x) then s.rval(obs)
  else # obsAtStep(x, obs) fi;
eval parametric(E[ obsAtStep(x, "logGDP") ], x, 1, 10, 201);
"#;

const AGR: &str = r#"
obsAtStep(x,obs) =
 if ( s.rval("steps") == x )
  then s.rval(obs)
  else # obsAtStep(x,obs) fi ;
eval E[ obsAtStep(201,"AGR_total") ];
"#;

fn scripted() -> ScriptedSimulator {
    ScriptedSimulator::new(500).with("logGDP", |_, step| 10.0 * step as f64)
}

#[test]
fn parses_transient_query() {
    let q = parse(TRANSIENT).unwrap();
    assert_eq!(q.functions.len(), 1);
    let f = &q.functions[0];
    assert_eq!(f.name, "obsAtStep");
    assert_eq!(f.params, vec!["x".to_string(), "obs".to_string()]);
    let Expr::If { cond, then, otherwise } = &f.body else { panic!("body is not an if: {:?}", f.body) };
    assert!(matches!(cond.as_ref(), Expr::Binary { op: BinOp::Eq, .. }));
    assert!(matches!(then.as_ref(), Expr::Rval(_)));
    assert!(matches!(otherwise.as_ref(), Expr::Next { name, args } if name == "obsAtStep" && args.len() == 2));
    assert_eq!(q.directives.len(), 1);
    let Directive::Parametric { param, start, step, end, .. } = &q.directives[0] else { panic!() };
    assert_eq!((param.as_str(), *start, *step, *end), ("x", 1.0, 10.0, 201.0));
}

#[test]
fn parses_agr_query() {
    let q = parse(AGR).unwrap();
    assert_eq!(q.functions.len(), 1);
    let Directive::Single { expr } = &q.directives[0] else { panic!() };
    assert_eq!(
        *expr,
        Expr::Call { name: "obsAtStep".into(), args: vec![Expr::Num(201.0), Expr::Str("AGR_total".into())] }
    );
}

#[test]
fn missing_fi_is_a_syntax_error_at_the_if_end() {
    let src = "f(x) = if (x == 1) then 1 else 2;\neval E[ f(1) ];";
    match parse(src) {
        Err(ParseError::Syntax { pos, expected, .. }) => {
            assert_eq!(pos, Position { line: 1, column: 33 });
            assert!(expected.contains(&"`fi`"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn lexical_error_propagates() {
    assert!(matches!(parse("eval E[ 1 $ 2 ];"), Err(ParseError::Lex(_))));
}

#[test]
fn semantic_errors() {
    let cases = [
        ("eval E[ g(1) ];", "undefined function"),
        ("f(x) = x;\neval E[ f(1, 2) ];", "argument"),
        ("f(x) = y;\neval E[ f(1) ];", "undefined variable"),
        ("f(x) = 1 + # f(x);\neval E[ f(1) ];", "tail position"),
        ("f(x) = f(x);\neval E[ f(1) ];", "without `#`"),
        ("f(x) = g(x);\ng(x) = f(x);\neval E[ f(1) ];", "without `#`"),
        ("f(x) = x;\nf(y) = y;\neval E[ f(1) ];", "defined twice"),
        ("eval parametric(E[ t ], t, 5, 0, 10);", "step must be > 0"),
        ("eval parametric(E[ t ], t, 5, 1, 1);", "exceeds end"),
        ("eval E[ s.rval(1 + 2) ];", "s.rval"),
    ];
    for (src, needle) in cases {
        match parse(src) {
            Err(ParseError::Semantic { message }) => assert!(message.contains(needle), "{src}: {message}"),
            other => panic!("{src}: expected semantic error, got {other:?}"),
        }
    }
}

#[test]
fn a_query_needs_a_directive() {
    assert!(matches!(parse("f(x) = x;"), Err(ParseError::Syntax { .. })));
    assert!(matches!(parse(""), Err(ParseError::Syntax { .. })));
}

#[test]
fn instance_grids() {
    let v = parametric_values(1.0, 10.0, 201.0);
    assert_eq!(v.len(), 21);
    assert_eq!((v[0], v[1], v[2], v[20]), (1.0, 11.0, 21.0, 201.0));
    assert_eq!(parametric_values(5.0, 10.0, 5.0), vec![5.0]);
    let v = parametric_values(1.0, 10.0, 200.0);
    assert_eq!(v.len(), 20);
    assert_eq!(*v.last().unwrap(), 191.0);
    // Fractional steps keep their end point despite rounding.
    assert_eq!(parametric_values(0.0, 0.1, 1.0).len(), 11);
}

#[test]
fn labels() {
    let q = parse(TRANSIENT).unwrap();
    let inst = instances(&q);
    assert_eq!(inst.len(), 21);
    assert_eq!(inst[0].label, "1");
    assert_eq!(inst[20].label, "201");
    let q = parse(AGR).unwrap();
    assert_eq!(instances(&q)[0].label, "E0");
    let both = parse("eval E[ 1 ];\neval parametric(E[ t ], t, 1, 1, 2);").unwrap();
    let labels: Vec<String> = instances(&both).into_iter().map(|i| i.label).collect();
    assert_eq!(labels, vec!["d0/E0", "d1/1", "d1/2"]);
}

#[test]
fn hand_traced_recursion() {
    let q = parse(&TRANSIENT.replace("1, 10, 201", "2, 1, 2")).unwrap();
    let mut sim = scripted();
    sim.reset(0).unwrap();
    assert_eq!(evaluate(&q, &mut sim).unwrap(), vec![20.0]);
    assert_eq!(sim.advances(), 2);
}

#[test]
fn single_without_recursion_does_not_advance() {
    let q = parse("eval E[ s.rval(\"steps\") ];").unwrap();
    let mut sim = scripted();
    sim.reset(0).unwrap();
    assert_eq!(evaluate(&q, &mut sim).unwrap(), vec![0.0]);
    assert_eq!(sim.advances(), 0);
}

#[test]
fn transient_on_scripted_run() {
    let q = parse(TRANSIENT).unwrap();
    let mut sim = scripted();
    sim.reset(1).unwrap();
    let v = evaluate(&q, &mut sim).unwrap();
    let expected: Vec<f64> = (0..21).map(|k| 10.0 * (1 + 10 * k) as f64).collect();
    assert_eq!(v, expected);
    assert_eq!(sim.advances(), 201);
}

#[test]
fn horizon_exhaustion_is_incomplete() {
    let q = parse(TRANSIENT).unwrap();
    let mut sim = ScriptedSimulator::new(100).with("logGDP", |_, s| s as f64);
    sim.reset(0).unwrap();
    let err = evaluate(&q, &mut sim).unwrap_err();
    assert_eq!(err.instance, "101");
    assert_eq!(err.kind, EvalErrorKind::Incomplete { step: 100 });
}

#[test]
fn observable_errors_carry_instance() {
    let q = parse("eval parametric(E[ s.rval(\"nope\") ], t, 3, 1, 3);").unwrap();
    let mut sim = scripted();
    sim.reset(0).unwrap();
    let err = evaluate(&q, &mut sim).unwrap_err();
    assert_eq!(err.instance, "3");
    assert!(matches!(err.kind, EvalErrorKind::Sim(_)));
}

#[test]
fn comparisons_and_arithmetic() {
    let cases = [
        ("eval E[ if (0.1 + 0.2 == 0.3) then 1 else 0 fi ];", 1.0),
        ("eval E[ if (3 == 3.0000000001) then 1 else 0 fi ];", 1.0),
        ("eval E[ if (3 == 3.00001) then 1 else 0 fi ];", 0.0),
        ("eval E[ if (3.0000000001 < 3) then 1 else 0 fi ];", 0.0),
        ("eval E[ if (2 < 3) then 1 else 0 fi ];", 1.0),
        ("eval E[ if (3 > 3) then 1 else 0 fi ];", 0.0),
        ("eval E[ -2 * 3 + 10 / 4 ];", -3.5),
        ("eval E[ 2 - 3 - 4 ];", -5.0),
        ("eval E[ if (\"a\" == \"a\") then 7 else 8 fi ];", 7.0),
    ];
    for (src, want) in cases {
        let q = parse(src).unwrap();
        let mut sim = scripted();
        sim.reset(0).unwrap();
        assert_eq!(evaluate(&q, &mut sim).unwrap(), vec![want], "{src}");
    }
}

#[test]
fn type_errors_surface() {
    let q = parse("eval E[ if (1) then 1 else 0 fi ];").unwrap();
    let mut sim = scripted();
    sim.reset(0).unwrap();
    assert!(matches!(evaluate(&q, &mut sim).unwrap_err().kind, EvalErrorKind::Type { .. }));
}

#[test]
fn print_parse_round_trip_on_paper_queries() {
    for src in [TRANSIENT, AGR] {
        let q = parse(src).unwrap();
        assert_eq!(parse(&q.to_string()).unwrap(), q);
    }
}

// Random query generation shared by the property tests.

fn arb_leaf(vars: Vec<String>) -> BoxedStrategy<Expr> {
    let num = (0u32..50).prop_map(|n| Expr::Num(f64::from(n) / 2.0));
    let obs = prop_oneof![Just("steps"), Just("a"), Just("b")].prop_map(|s| Expr::Rval(Box::new(Expr::Str(s.into()))));
    if vars.is_empty() {
        prop_oneof![num, obs].boxed()
    } else {
        let var = proptest::sample::select(vars).prop_map(Expr::Var);
        prop_oneof![num, obs, var].boxed()
    }
}

fn arb_value_expr(vars: Vec<String>) -> BoxedStrategy<Expr> {
    arb_leaf(vars)
        .prop_recursive(3, 16, 2, |inner| {
            let ops = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)];
            prop_oneof![
                (ops, inner.clone(), inner.clone())
                    .prop_map(|(op, l, r)| Expr::Binary { op, lhs: Box::new(l), rhs: Box::new(r) }),
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone(), inner.clone(), inner).prop_map(|(a, b, t, e)| Expr::If {
                    cond: Box::new(Expr::Binary { op: BinOp::Lt, lhs: Box::new(a), rhs: Box::new(b) }),
                    then: Box::new(t),
                    otherwise: Box::new(e),
                }),
            ]
        })
        .boxed()
}

/// A query with one "wait until step x" function and a parametric or single
/// directive over a random value expression.
fn arb_query() -> impl Strategy<Value = QuerySpec> {
    let body_value = arb_value_expr(vec!["x".into(), "k".into()]);
    (body_value, 0u32..6, 1u32..4, 0u32..12, any::<bool>(), arb_value_expr(vec!["t".into()])).prop_map(
        |(value, start, step, span, parametric, extra)| {
            // f(x, k) = if (steps == x) then <value> else # f(x, k) fi
            let f = FunctionDef {
                name: "f".into(),
                params: vec!["x".into(), "k".into()],
                body: Expr::If {
                    cond: Box::new(Expr::Binary {
                        op: BinOp::Eq,
                        lhs: Box::new(Expr::Rval(Box::new(Expr::Str("steps".into())))),
                        rhs: Box::new(Expr::Var("x".into())),
                    }),
                    then: Box::new(value),
                    otherwise: Box::new(Expr::Next {
                        name: "f".into(),
                        args: vec![Expr::Var("x".into()), Expr::Var("k".into())],
                    }),
                },
            };
            let call = Expr::Call { name: "f".into(), args: vec![Expr::Var("t".into()), extra] };
            let directive = if parametric {
                Directive::Parametric {
                    expr: call,
                    param: "t".into(),
                    start: f64::from(start),
                    step: f64::from(step),
                    end: f64::from(start + span),
                }
            } else {
                let fixed = Expr::Call { name: "f".into(), args: vec![Expr::Num(f64::from(start)), Expr::Num(1.0)] };
                Directive::Single { expr: fixed }
            };
            QuerySpec { functions: vec![f], directives: vec![directive] }
        },
    )
}

fn mixing_sim() -> ScriptedSimulator {
    ScriptedSimulator::new(64)
        .with("a", |seed, step| ((seed.wrapping_mul(31) ^ step) % 97) as f64 / 4.0)
        .with("b", |seed, step| (step as f64) * 0.5 - (seed % 7) as f64)
}

proptest! {
    #[test]
    fn printed_queries_reparse_identically(q in arb_query()) {
        let text = q.to_string();
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, q);
    }

    #[test]
    fn one_pass_matches_fresh_runs(q in arb_query(), seed in any::<u64>()) {
        let mut sim = mixing_sim();
        sim.reset(seed).unwrap();
        let one_pass = evaluate(&q, &mut sim).unwrap();
        let advances = sim.advances();
        let list = instances(&q);
        let mut deepest = 0;
        for (inst, got) in list.iter().zip(&one_pass) {
            let mut fresh = mixing_sim();
            fresh.reset(seed).unwrap();
            let want = evaluate_instance(&q, inst, &mut fresh).unwrap();
            prop_assert_eq!(want.to_bits(), got.to_bits());
            deepest = deepest.max(fresh.advances());
        }
        prop_assert_eq!(advances, deepest);
    }
}
