mod common;

use locfo_core::error::Error;
use locfo_core::formula::{self as fm, in_fragment, Formula, FragmentKind, FragmentSpec};
use locfo_core::structure::Signature;
use locfo_core::syntax::{is_pred_name, is_var_name, parse_formula, print_formula};
use proptest::prelude::*;

use common::{random_formula, rng};

fn p(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

fn span_of(text: &str) -> (usize, usize, usize, usize) {
    match parse_formula(text) {
        Err(Error::Syntax { span, .. }) => (span.start, span.end, span.line, span.column),
        other => panic!("expected a syntax error for {text:?}, got {other:?}"),
    }
}

#[test]
fn parse_examples() {
    assert_eq!(p("exists x. loc[1] x { Leader(x) }"), fm::exists("x", fm::local("x", 1, fm::pred("Leader", "x"))));
    assert_eq!(
        p("forall y. loc[1] y { exists x. Leader(x) & y ~2:1 x }"),
        fm::forall(
            "y",
            fm::local("y", 1, fm::exists("x", fm::and2(fm::pred("Leader", "x"), fm::rel(2, 1, "y", "x"))))
        )
    );
    assert_eq!(p("x != y"), fm::not(fm::eq("x", "y")));
    assert_eq!(p("atleast[2] y. P(y)"), fm::atleast(2, "y", fm::pred("P", "y")));
    assert_eq!(p("true | false"), fm::or2(fm::tt(), fm::ff()));
    assert_eq!(p("a = b & c = d"), fm::and2(fm::eq("a", "b"), fm::eq("c", "d")));
}

#[test]
fn precedence_and_binding() {
    assert_eq!(p("P(x) | Q(x) & R(x)"), fm::or2(fm::pred("P", "x"), fm::and2(fm::pred("Q", "x"), fm::pred("R", "x"))));
    assert_eq!(p("!P(x) & Q(x)"), fm::and2(fm::not(fm::pred("P", "x")), fm::pred("Q", "x")));
    // quantifiers extend as far right as possible
    assert_eq!(
        p("exists x. P(x) | Q(x)"),
        fm::exists("x", fm::or2(fm::pred("P", "x"), fm::pred("Q", "x")))
    );
    assert_eq!(p("P(x) & Q(x) & R(x)"), fm::and(vec![fm::pred("P", "x"), fm::pred("Q", "x"), fm::pred("R", "x")]));
    assert_eq!(p("(P(x) & Q(x)) & R(x)"), fm::and2(fm::and2(fm::pred("P", "x"), fm::pred("Q", "x")), fm::pred("R", "x")));
}

#[test]
fn comments_and_whitespace() {
    let f = p("# leader\nexists x.\n  Leader(x) # trailing\n");
    assert_eq!(f, fm::exists("x", fm::pred("Leader", "x")));
    assert_eq!(p("x#1 = x#2"), fm::eq("x#1", "x#2"));
}

#[test]
fn type_errors_come_after_parsing() {
    let f = p("x ~3:1 y");
    let sig = Signature::full(Vec::<String>::new(), 2).unwrap();
    assert!(matches!(in_fragment(&f, &FragmentSpec::new(FragmentKind::Dfo, sig)), Err(Error::Typing(_))));
}

#[test]
fn print_examples() {
    assert_eq!(print_formula(&fm::pred("P", "x")), "P(x)");
    let s = print_formula(&fm::local("x", 2, fm::pred("P", "x")));
    assert!(s.starts_with("loc[2] x {"), "{s}");
    assert_eq!(p(&s), fm::local("x", 2, fm::pred("P", "x")));
    assert_eq!(print_formula(&fm::rel(1, 2, "x", "y")), "x ~1:2 y");
    assert_eq!(print_formula(&p("P(x) | Q(x) & R(x)")), "P(x) | Q(x) & R(x)");
}

#[test]
fn error_spans() {
    // unexpected token
    assert_eq!(span_of("P(x) & & Q(x)"), (7, 8, 1, 8));
    // reserved word as variable
    let (start, end, line, col) = span_of("exists loc. P(loc)");
    assert_eq!((start, end, line, col), (7, 10, 1, 8));
    // multi-line input
    let (_, _, line, col) = span_of("exists x.\n  P(x) &\n  x ~1 y");
    assert_eq!((line, col), (3, 8));
    // trailing garbage
    let (start, _, _, _) = span_of("P(x) Q(x)");
    assert_eq!(start, 5);
    // unclosed modality
    assert!(matches!(parse_formula("loc[1] x { P(x)"), Err(Error::Syntax { .. })));
    assert!(matches!(parse_formula("atleast[x] y. P(y)"), Err(Error::Syntax { .. })));
    assert!(matches!(parse_formula(""), Err(Error::Syntax { .. })));
}

#[test]
fn lexical_rules() {
    assert!(is_pred_name("Leader"));
    assert!(is_pred_name("CC<P|11,12|ge2>"));
    assert!(!is_pred_name("leader"));
    assert!(!is_pred_name("P<"));
    assert!(is_var_name("x"));
    assert!(is_var_name("y_2#3"));
    assert!(!is_var_name("exists"));
    assert!(!is_var_name("X"));
}

#[test]
fn round_trip_on_random_formulas() {
    let mut r = rng(2024);
    for _ in 0..1000 {
        let f = random_formula(&mut r, 5);
        let text = print_formula(&f);
        let g = parse_formula(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(g, f, "{text}");
        assert_eq!(print_formula(&g), text);
    }
}

proptest! {
    #[test]
    fn printing_is_stable(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_formula(&mut r, 4);
        let once = print_formula(&f);
        let twice = print_formula(&parse_formula(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn garbage_never_panics(s in "[a-zA-Z0-9 ().&|!~:=\\[\\]{}#<>,]{0,40}") {
        let _ = parse_formula(&s);
    }
}
