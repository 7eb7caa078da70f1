mod common;

use std::collections::BTreeSet;

use common::{random_body, rng};
use locfo_core::eval::models;
use locfo_core::formula::{self as fm, Formula};
use locfo_core::sat::*;
use locfo_core::structure::{gamma_diag, DataStructure, Signature, Value};
use locfo_core::syntax::parse_formula;
use locfo_core::Error;
use rand::Rng;

fn parse(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

fn size_of(v: &SatVerdict) -> Option<usize> {
    v.witness().map(DataStructure::len)
}

// Isomorphism key by brute force over element orders.
fn naive_key(labels: &[bool], values: &[Value], s: usize, width: usize, d: usize) -> (Vec<bool>, Vec<usize>) {
    let mut perms = vec![vec![]];
    for k in 0..s {
        perms = perms
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..=k).map(move |pos| {
                    let mut q = p.clone();
                    q.insert(pos, k);
                    q
                })
            })
            .collect();
    }
    perms
        .iter()
        .map(|p| {
            let l: Vec<bool> = p.iter().flat_map(|&e| labels[e * width..(e + 1) * width].to_vec()).collect();
            let mut seen: Vec<Value> = Vec::new();
            let v: Vec<usize> = p
                .iter()
                .flat_map(|&e| values[e * d..(e + 1) * d].to_vec())
                .map(|x| match seen.iter().position(|&y| y == x) {
                    Some(i) => i,
                    None => {
                        seen.push(x);
                        seen.len() - 1
                    }
                })
                .collect();
            (l, v)
        })
        .min()
        .unwrap()
}

fn naive_count(width: usize, d: usize, s: usize) -> usize {
    let v = (s * d).max(1) as Value;
    let slots = s * d;
    let mut keys = BTreeSet::new();
    let total = (v as usize).pow(slots as u32);
    for code in 0..total {
        let mut c = code;
        let values: Vec<Value> = (0..slots)
            .map(|_| {
                let x = (c % v as usize) as Value + 1;
                c /= v as usize;
                x
            })
            .collect();
        for mask in 0..1u32 << (width * s) {
            let labels: Vec<bool> = (0..width * s).map(|b| mask >> b & 1 == 1).collect();
            keys.insert(naive_key(&labels, &values, s, width, d));
        }
    }
    keys.len()
}

#[test]
fn enumeration_examples() {
    let sig = Signature::full(Vec::<String>::new(), 1).unwrap();
    assert_eq!(enumerate_structures(&sig, 1, 1).unwrap().len(), 1);
    let sig = Signature::full(["P"], 0).unwrap();
    let all = enumerate_structures(&sig, 2, 0).unwrap();
    assert_eq!(all.len(), 3);
    let counts: BTreeSet<usize> =
        all.iter().map(|a| (0..a.len()).filter(|&e| a.has_label_named(e, "P")).count()).collect();
    assert_eq!(counts, BTreeSet::from([0, 1, 2]));
}

#[test]
fn enumeration_matches_naive_quotient() {
    for width in 0..=1 {
        let sigma: Vec<&str> = ["P"][..width].to_vec();
        for d in 0..=2 {
            let sig = Signature::full(sigma.clone(), d).unwrap();
            for s in 1..=3 {
                let got = enumerate_structures(&sig, s, s * d).unwrap();
                for a in &got {
                    assert_eq!(&a.canonical_form(), a);
                }
                assert_eq!(got.len(), naive_count(width, d, s), "|Σ|={width} d={d} s={s}");
            }
        }
    }
}

#[test]
fn bounded_sat_examples() {
    let sig = Signature::full(["Leader"], 2).unwrap();
    let v = bounded_sat(&parse("exists x. x = x"), &sig, 3, None).unwrap();
    assert_eq!(size_of(&v), Some(1));
    let v = bounded_sat(&parse("exists x. !(x = x)"), &sig, 3, None).unwrap();
    assert_eq!(v, SatVerdict::UnsatWithin(3));

    let leader = parse(
        "(exists x. (Leader(x) & (forall y. (!Leader(y) | y = x)))) & (forall y. exists x. (Leader(x) & x ~1:2 y))",
    );
    let v = bounded_sat(&leader, &sig, 3, None).unwrap();
    let a = v.witness().unwrap();
    assert_eq!(a.len(), 1);
    assert!(a.has_label_named(0, "Leader"));
    assert_eq!(a.value(0, 1), a.value(0, 2));
}

fn random_sentence(r: &mut rand_chacha::ChaCha8Rng, sigma: &[String], rels: &[(usize, usize)], depth: usize) -> Formula {
    let mut scope = vec!["x".to_string()];
    let body = random_body(r, sigma, rels, &["x", "y"], &mut scope, depth);
    if r.gen_bool(0.5) {
        fm::exists("x", body)
    } else {
        fm::forall("x", body)
    }
}

#[test]
fn grounded_search_agrees_with_enumeration() {
    let mut r = rng(11);
    let sig = Signature::full(["P"], 2).unwrap();
    let sigma = sig.sigma().to_vec();
    let rels: Vec<(usize, usize)> = sig.gamma().iter().copied().collect();
    let mut sat = 0;
    for _ in 0..300 {
        let mut phi = random_sentence(&mut r, &sigma, &rels, 4);
        if r.gen_bool(0.3) {
            phi = fm::and2(phi, fm::atleast(2, "y", fm::pred("P", "y")));
        }
        let a = bounded_sat(&phi, &sig, 3, None).unwrap();
        let b = bounded_sat_grounded(&phi, &sig, 3, None).unwrap();
        assert_eq!(size_of(&a), size_of(&b), "{phi:?}");
        if let Some(w) = b.witness() {
            assert!(models(w, &phi).unwrap());
            sat += 1;
        }
    }
    assert!(sat > 50 && sat < 280, "{sat}");
}

#[test]
fn grounded_search_rejects_local_formulas() {
    let sig = Signature::full(["P"], 2).unwrap();
    let err = bounded_sat_grounded(&parse("exists x. loc[1] x { P(x) }"), &sig, 2, None).unwrap_err();
    assert!(matches!(err, Error::Fragment(_)));
}

#[test]
fn monadic_examples() {
    let sig = Signature::full(["P"], 0).unwrap();
    let v = monadic_sat(&parse("atleast[3] y. P(y)"), &sig, DEFAULT_MONADIC_CAP).unwrap();
    assert_eq!(size_of(&v), Some(3));

    let phi = parse("(exists x. P(x)) & (forall y. !P(y))");
    assert_eq!(monadic_bound(&phi), Some(2));
    assert_eq!(monadic_sat(&phi, &sig, DEFAULT_MONADIC_CAP).unwrap(), SatVerdict::Unsat);

    let sig2 = Signature::full(["P"], 2).unwrap();
    let err = monadic_sat(&parse("exists x. x ~1:1 x"), &sig2, 64).unwrap_err();
    assert!(matches!(err, Error::Fragment(_)));

    let v = monadic_sat(&parse("exists x. exists y. exists z. (P(x) & !P(y) & P(z))"), &sig, 4).unwrap();
    assert!(matches!(v, SatVerdict::Unknown { bound: 4, .. }));
}

#[test]
fn monadic_agrees_with_enumeration() {
    let mut r = rng(12);
    let sig = Signature::full(["P", "Q"], 0).unwrap();
    let sigma = sig.sigma().to_vec();
    let (mut sat, mut unsat) = (0, 0);
    for _ in 0..150 {
        let phi = random_sentence(&mut r, &sigma, &[], 3);
        if phi.quantifier_rank() > 2 {
            continue;
        }
        let bound = monadic_bound(&phi).unwrap();
        let m = monadic_sat(&phi, &sig, 64).unwrap();
        let e = bounded_sat(&phi, &sig, bound.min(5), None).unwrap();
        match &m {
            SatVerdict::Sat(w) => {
                assert!(models(w, &phi).unwrap());
                assert_eq!(size_of(&e), Some(w.len()), "{phi:?}");
                sat += 1;
            }
            SatVerdict::Unsat => {
                assert_eq!(e, SatVerdict::UnsatWithin(bound.min(5)), "{phi:?}");
                unsat += 1;
            }
            other => panic!("{other}"),
        }
    }
    assert!(sat > 10 && unsat > 5, "{sat} {unsat}");
}

fn exist1_corpus() -> Vec<(&'static str, usize)> {
    vec![
        ("exists x. loc[1] x { exists y. (!(y = x) & x ~1:1 y) }", 1),
        ("exists x. loc[1] x { P(x) }", 1),
        ("exists x. loc[1] x { P(x) & !P(x) }", 1),
        ("exists x. loc[1] x { forall y. (y = x | P(y)) } & loc[1] x { !P(x) }", 1),
        ("exists x. loc[1] x { atleast[2] y. (x ~1:1 y & P(y)) }", 1),
        ("exists x. exists y. (!(x = y) & loc[1] x { P(x) } & loc[1] y { !P(y) })", 1),
        ("exists x. exists y. (loc[1] x { exists z. (!(z = x) & !P(z)) } & loc[1] y { forall z. P(z) })", 1),
        ("exists x. loc[1] x { forall y. (!(x ~1:1 y) | P(y)) } & loc[1] x { exists y. (x ~1:1 y & !P(y)) }", 1),
        ("exists x. loc[1] x { exists y. (x ~1:2 y & !(y = x)) }", 2),
        ("exists x. loc[1] x { x ~1:2 x & (forall y. (y = x | !(y ~2:2 x))) }", 2),
        ("exists x. loc[1] x { exists y. (x ~2:1 y & !(x ~1:1 y)) }", 2),
    ]
}

#[test]
fn exist1_examples() {
    let sig = Signature::full(Vec::<String>::new(), 1).unwrap();
    let v = sat_exist_local1(&parse("exists x. loc[1] x { exists y. (!(y = x) & x ~1:1 y) }"), &sig, 64).unwrap();
    let a = v.witness().unwrap();
    assert_eq!(a.len(), 2);
    assert_eq!(a.value(0, 1), a.value(1, 1));

    let sig = Signature::full(["P"], 1).unwrap();
    let v = sat_exist_local1(&parse("exists x. loc[1] x { P(x) & !P(x) }"), &sig, 64).unwrap();
    assert_eq!(v, SatVerdict::Unsat);
}

#[test]
fn exist1_agrees_with_enumeration() {
    for (text, d) in exist1_corpus() {
        let phi = parse(text);
        let sigma: Vec<&str> = if d == 1 { vec!["P"] } else { vec![] };
        let sig = Signature::full(sigma, d).unwrap();
        let v = sat_exist_local1(&phi, &sig, 64).unwrap();
        let e = bounded_sat(&phi, &sig, 4, None).unwrap();
        match &v {
            SatVerdict::Sat(w) => assert_eq!(size_of(&e), Some(w.len()), "{text}"),
            SatVerdict::Unsat => assert_eq!(e, SatVerdict::UnsatWithin(4), "{text}"),
            other => panic!("{text}: {other}"),
        }
    }
}

#[test]
fn exist2_sat_cases_match_enumeration() {
    let sig = Signature::full(["P"], 2).unwrap();
    for text in [
        "exists x1. loc[2] x1 { exists y. (!(y = x1) & x1 ~1:1 y & x1 ~2:2 y) }",
        "exists x1. loc[2] x1 { exists y. exists z. (y ~1:2 z & !(y ~1:1 x1) & !(z = y)) }",
        "exists x1. exists x2. (!(x1 = x2) & loc[2] x2 { exists y. (y ~1:1 x2 & P(y)) })",
        "exists x1. loc[2] x1 { atleast[2] y. (y ~1:2 y) }",
    ] {
        let phi = parse(text);
        let v = sat_exist_local2(&phi, &sig, 3, None).unwrap();
        let e = bounded_sat(&phi, &sig, 3, None).unwrap();
        assert_eq!(size_of(&v), size_of(&e), "{text}");
        assert!(v.is_sat(), "{text}");
    }
    let v = sat_exist_local2(&parse("exists x1. loc[2] x1 { P(x1) & !P(x1) }"), &sig, 3, None).unwrap();
    assert!(matches!(v, SatVerdict::Unknown { bound: 3, .. }), "{v}");
}

// Existential fragments allow negation only on equalities between centres.
fn positive_matrix(r: &mut rand_chacha::ChaCha8Rng, sigma: &[String], rels: &[(usize, usize)], vars: &[&str]) -> Formula {
    let leaf = |r: &mut rand_chacha::ChaCha8Rng| {
        let x = vars[r.gen_range(0..vars.len())];
        let mut scope = vec![x.to_string()];
        fm::local(x, 2, random_body(r, sigma, rels, &["y", "z"], &mut scope, 2))
    };
    let a = leaf(r);
    match r.gen_range(0..4) {
        0 => a,
        1 => fm::and2(a, leaf(r)),
        2 => fm::or2(a, leaf(r)),
        _ if vars.len() == 2 => fm::and2(fm::neq(vars[0], vars[1]), a),
        _ => a,
    }
}

#[test]
fn exist2_witnesses_pull_back() {
    let mut r = rng(13);
    let sig = Signature::full(["P"], 2).unwrap();
    let sigma = sig.sigma().to_vec();
    let rels: Vec<(usize, usize)> = sig.gamma().iter().copied().collect();
    let mut sat = 0;
    for _ in 0..1000 {
        let vars: &[&str] = if r.gen_bool(0.5) { &["x1"] } else { &["x1", "x2"] };
        let mut phi = positive_matrix(&mut r, &sigma, &rels, vars);
        for v in vars.iter().rev() {
            phi = fm::exists(v, phi);
        }
        let v = sat_exist_local2(&phi, &sig, 3, None).unwrap();
        if let Some(w) = v.witness() {
            assert!(models(w, &phi).unwrap());
            sat += 1;
        }
    }
    assert!(sat > 300, "{sat}");
}

#[test]
fn pipeline_examples() {
    let sig = Signature::new(["P"], 2, gamma_diag()).unwrap();
    let v = sat_local1_pipeline(&parse("exists x. loc[1] x { P(x) }"), &sig, 4, None).unwrap();
    assert!(models(v.witness().unwrap(), &parse("exists x. P(x)")).unwrap());

    let diag = parse("exists x. loc[1] x { exists y. (x ~1:2 y & !P(y)) }");
    let v = sat_local1_pipeline(&diag, &sig, 6, None).unwrap();
    assert!(models(v.witness().unwrap(), &diag).unwrap());

    let v = sat_local1_pipeline(&parse("exists x. loc[1] x { P(x) & !P(x) }"), &sig, 6, None).unwrap();
    assert!(matches!(v, SatVerdict::Unknown { bound: 6, .. }));
}

#[test]
fn pipeline_rejects_other_signatures() {
    let sig = Signature::full(["P"], 2).unwrap();
    assert!(sat_local1_pipeline(&parse("exists x. loc[1] x { P(x) }"), &sig, 4, None).is_err());
}
