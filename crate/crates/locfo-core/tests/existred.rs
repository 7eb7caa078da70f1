mod common;

use std::collections::BTreeMap;

use common::*;
use locfo_core::error::Error;
use locfo_core::eval;
use locfo_core::existred::*;
use locfo_core::formula::{self as fm, in_fragment, Formula, FragmentKind, FragmentSpec};
use locfo_core::locality::{ball, view};
use locfo_core::structure::{DataStructure, Element, Signature};
use locfo_core::syntax::parse_formula;
use rand::Rng;

fn sig2() -> Signature {
    Signature::full(["P"], 2).unwrap()
}

fn two_anchor_example() -> DataStructure {
    let e = |id: &str, v: [u64; 2]| Element::new(id, Vec::<&str>::new(), &v);
    DataStructure::new(
        Signature::full(Vec::<&str>::new(), 2).unwrap(),
        vec![e("a", [1, 2]), e("b", [1, 3]), e("c", [3, 2]), e("d", [5, 6]), e("e", [4, 3]), e("f", [2, 7])],
    )
    .unwrap()
}

fn vars(n: usize) -> Vec<String> {
    (1..=n).map(|p| format!("x{p}")).collect()
}

fn interp(n: usize, anchors: &[&str]) -> BTreeMap<String, String> {
    vars(n).into_iter().zip(anchors.iter().map(|a| a.to_string())).collect()
}

fn ids(a: &DataStructure) -> Vec<String> {
    a.ids().to_vec()
}

fn anchor_tuples(a: &DataStructure, n: usize) -> Vec<Vec<String>> {
    let ids = ids(a);
    if n == 1 {
        return ids.iter().map(|x| vec![x.clone()]).collect();
    }
    ids.iter().flat_map(|x| ids.iter().map(move |y| vec![x.clone(), y.clone()])).collect()
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn curated2() -> Vec<Formula> {
    [
        "loc[2] x1 { exists y. (!(y = x1) & x1 ~1:1 y & x1 ~2:2 y) }",
        "loc[2] x1 { forall y. (y ~2:1 y | P(y)) }",
        "loc[2] x1 { exists y. exists z. (y ~1:2 z & !(y ~1:1 x1) & !(z = y)) }",
        "loc[2] x1 { exists y. (x1 ~2:1 y & (exists z. (z ~2:2 y & !(z = x1)))) }",
        "!(x1 = x2) & loc[2] x2 { exists y. (y ~1:1 x2 & P(y)) }",
        "loc[2] x1 { exists y. exists z. (y ~2:2 z & !(y = z) & !P(y)) } | loc[2] x2 { forall y. (y ~1:2 x2) }",
        "loc[2] x1 { atleast[2] y. (y ~1:2 y) }",
    ]
    .iter()
    .map(|s| parse_formula(s).unwrap())
    .collect()
}

fn arity(f: &Formula) -> usize {
    if f.free_vars().contains("x2") {
        2
    } else {
        1
    }
}

#[test]
fn example_abstraction() {
    let b = abstract2(&two_anchor_example(), &["a"]).unwrap();
    let vals: Vec<u64> = (0..b.len()).map(|e| b.value(e, 1)).collect();
    assert_eq!(vals, vec![8, 3, 3, 9, 10, 7]);
    let members = |name: &str| -> Vec<&str> { (0..b.len()).filter(|&e| b.has_label_named(e, name)).map(|e| b.id(e)).collect() };
    assert_eq!(members("U<1|1|1>"), vec!["a", "b"]);
    assert_eq!(members("U<1|2|2>"), vec!["a", "c"]);
    assert_eq!(members("U<1|2|1>"), vec!["f"]);
    assert!(members("U<1|1|2>").is_empty());
    assert_eq!(b.d(), 1);
}

#[test]
fn abstraction_with_no_anchor_value_is_fresh() {
    let a = DataStructure::new(sig2(), vec![Element::new("a", ["P"], &[1, 1]), Element::new("b", Vec::<&str>::new(), &[2, 3])]).unwrap();
    let b = abstract2(&a, &["a"]).unwrap();
    assert_eq!(b.value(1, 1), 5);
    assert!(b.has_label_named(0, "P"));
}

#[test]
fn abstraction_rejects_wrong_arity_and_clashes() {
    let a = DataStructure::new(Signature::full(["P"], 1).unwrap(), vec![Element::new("a", ["P"], &[1])]).unwrap();
    assert!(matches!(abstract2(&a, &["a"]), Err(Error::Argument(_))));
    let clash = DataStructure::new(Signature::full(["U<1|1|1>"], 2).unwrap(), vec![Element::new("a", Vec::<&str>::new(), &[1, 2])]).unwrap();
    assert!(matches!(abstract2(&clash, &["a"]), Err(Error::Argument(_))));
    assert!(matches!(abstract2(&two_anchor_example(), &["zz"]), Err(Error::Structural(_))));
}

#[test]
fn abstraction_satisfies_wf() {
    let mut r = rng(11);
    let sig = sig2();
    for _ in 0..300 {
        let a = random_sized(&mut r, &sig, 1, 5, 4);
        for n in 1..=2 {
            let anchors: Vec<String> = (0..n).map(|_| a.id(r.gen_range(0..a.len())).to_string()).collect();
            let b = abstract2(&a, &refs(&anchors)).unwrap();
            assert!(eval::eval(&b, &interp(n, &refs(&anchors)), &wf_formula2(&vars(n))).unwrap());
        }
    }
}

/// Checks the four ball/view facts around one anchor.
fn check_ball_facts(a: &DataStructure, anchors: &[&str], p: usize) {
    let ap = anchors[p - 1];
    let abs = abstract2(a, anchors).unwrap();
    let v = view(a, ap, 2).unwrap().structure;
    let b1 = ball(a, ap, 1).unwrap();
    let b2 = ball(a, ap, 2).unwrap();
    let ui = |e: usize, q: usize, i: usize, j: usize| abs.has_label_named(e, &u_name(q, i, j));
    for b in v.ids() {
        assert!(b2.contains(&(b.clone(), 1)) && b2.contains(&(b.clone(), 2)));
    }
    for b in v.ids() {
        for c in v.ids() {
            let (eb, ec) = (a.index_of(b).unwrap(), a.index_of(c).unwrap());
            for j in 1..=2 {
                for k in 1..=2 {
                    let holds = v.relation_holds(j, k, b, c).unwrap();
                    let in1 = (b1.contains(&(b.clone(), j)), b1.contains(&(c.clone(), k)));
                    match in1 {
                        (true, true) => {
                            let want = (1..=2).any(|i| ui(eb, p, i, j) && ui(ec, p, i, k));
                            assert_eq!(holds, want);
                        }
                        (false, true) | (true, false) => assert!(!holds),
                        (false, false) => {
                            let via = (1..=anchors.len()).any(|q| (1..=2).any(|l| ui(eb, q, l, j) && ui(ec, q, l, k)));
                            let want = abs.value(eb, 1) == abs.value(ec, 1) || via;
                            assert_eq!(holds, want, "{b}.{j} {c}.{k} around {ap}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn radius2_ball_facts_exhaustive() {
    let sig = Signature::full(Vec::<&str>::new(), 2).unwrap();
    for n in 1..=4 {
        for vals in value_patterns(2 * n) {
            let a = with_values(&sig, n, &vals, |_, _| false);
            for t in anchor_tuples(&a, if n <= 3 { 2 } else { 1 }) {
                for p in 1..=t.len() {
                    check_ball_facts(&a, &refs(&t), p);
                }
            }
        }
    }
}

#[test]
fn translate2_matches_source_on_curated_matrices() {
    let sig = sig2();
    let matrices = curated2();
    for n in 1..=3 {
        for vals in value_patterns(2 * n) {
            let a = with_values(&sig, n, &vals, |e, _| e % 2 == 0);
            for f in &matrices {
                let k = arity(f);
                let t = translate2(f, &vars(k)).unwrap();
                for anchors in anchor_tuples(&a, k) {
                    let anchors = refs(&anchors);
                    let lhs = eval::eval(&a, &interp(k, &anchors), f).unwrap();
                    let rhs = eval::eval(&abstract2(&a, &anchors).unwrap(), &interp(k, &anchors), &t).unwrap();
                    assert_eq!(lhs, rhs, "{f:?} on {vals:?} at {anchors:?}");
                }
            }
        }
    }
}

#[test]
fn translate2_matches_source_on_random_matrices() {
    let mut r = rng(12);
    let sig = sig2();
    let sigma = sig.sigma().to_vec();
    let rels = pairs(sig.gamma());
    for _ in 0..400 {
        let k = r.gen_range(1..=2);
        let vs: Vec<&str> = ["x1", "x2"][..k].to_vec();
        let f = random_qf_matrix(&mut r, &sigma, &rels, &vs, 2, 3);
        let t = translate2(&f, &vars(k)).unwrap();
        for _ in 0..6 {
            let a = random_sized(&mut r, &sig, 1, 4, 5);
            let anchors: Vec<String> = (0..k).map(|_| a.id(r.gen_range(0..a.len())).to_string()).collect();
            let anchors = refs(&anchors);
            let lhs = eval::eval(&a, &interp(k, &anchors), &f).unwrap();
            let rhs = eval::eval(&abstract2(&a, &anchors).unwrap(), &interp(k, &anchors), &t).unwrap();
            assert_eq!(lhs, rhs, "{f:?} on {a:?} at {anchors:?}");
        }
    }
}

#[test]
fn translate2_table_rows() {
    let f = parse_formula("x1 = x1").unwrap();
    assert_eq!(translate2(&f, &vars(1)).unwrap(), f);
    let g = parse_formula("loc[2] x1 { exists y. P(y) }").unwrap();
    match translate2(&g, &vars(1)).unwrap() {
        Formula::Exists(y, body) => {
            assert_eq!(y, "y");
            match *body {
                Formula::And(parts) => assert_eq!(parts[1], fm::pred("P", "y")),
                other => panic!("unexpected body {other:?}"),
            }
        }
        other => panic!("unexpected translation {other:?}"),
    }
    let bad = parse_formula("exists y. loc[2] y { P(y) }").unwrap();
    assert!(matches!(translate2(&bad, &vars(1)), Err(Error::Fragment(_))));
    let wrong_r = parse_formula("loc[1] x1 { P(x1) }").unwrap();
    assert!(matches!(translate2(&wrong_r, &vars(1)), Err(Error::Fragment(_))));
}

fn one_data(labels: &[(&str, &[&str])], values: &[u64], n: usize) -> DataStructure {
    let sig = Signature::full(omega(n, 2), 1).unwrap();
    let elems = labels.iter().zip(values).map(|((id, ls), v)| Element::new(id, ls.to_vec(), &[*v])).collect();
    DataStructure::new(sig, elems).unwrap()
}

#[test]
fn wf_rejects_broken_structures() {
    let wf = wf_formula2(&vars(1));
    let i = interp(1, &["a"]);
    let ok = one_data(&[("a", &["U<1|1|1>", "U<1|2|2>"]), ("b", &["U<1|1|1>"])], &[1, 2], 1);
    assert!(eval::eval(&ok, &i, &wf).unwrap());
    let no_refl = one_data(&[("a", &["U<1|1|1>"]), ("b", &[])], &[1, 2], 1);
    assert!(!eval::eval(&no_refl, &i, &wf).unwrap());
    let shared = one_data(&[("a", &["U<1|1|1>", "U<1|2|2>"]), ("b", &[]), ("c", &[])], &[1, 2, 2], 1);
    assert!(!eval::eval(&shared, &i, &wf).unwrap());
    assert!(matches!(concretize2(&no_refl, &["a"]), Err(Error::Contract(_))));
    assert!(matches!(concretize2(&shared, &["a"]), Err(Error::Contract(_))));
}

#[test]
fn concretize2_round_trip() {
    let mut r = rng(13);
    let sig = sig2();
    let matrices = curated2();
    for _ in 0..300 {
        let a = random_sized(&mut r, &sig, 1, 5, 4);
        let k = r.gen_range(1..=2);
        let anchors: Vec<String> = (0..k).map(|_| a.id(r.gen_range(0..a.len())).to_string()).collect();
        let anchors = refs(&anchors);
        let b = abstract2(&a, &anchors).unwrap();
        let c = concretize2(&b, &anchors).unwrap();
        let b2 = abstract2(&c, &anchors).unwrap();
        for e in 0..a.len() {
            assert_eq!(b.label_names(e), b2.label_names(e));
        }
        for f in matrices.iter().filter(|f| arity(f) <= k) {
            let kk = arity(f);
            let t = translate2(f, &vars(kk)).unwrap();
            let i = interp(kk, &anchors[..kk]);
            let direct = eval::eval(&a, &i, f).unwrap();
            assert_eq!(direct, eval::eval(&c, &i, f).unwrap());
            let bb = abstract2(&a, &anchors[..kk]).unwrap();
            assert_eq!(direct, eval::eval(&bb, &i, &t).unwrap());
        }
    }
}

#[test]
fn concretize2_of_example_matches_example() {
    let a = two_anchor_example();
    let b = abstract2(&a, &["a"]).unwrap();
    let c = concretize2(&b, &["a"]).unwrap();
    let b2 = ball(&a, "a", 2).unwrap();
    for (x, j) in &b2 {
        for (y, k) in &b2 {
            assert_eq!(
                a.relation_holds(*j, *k, x, y).unwrap(),
                c.relation_holds(*j, *k, x, y).unwrap(),
                "{x}.{j} {y}.{k}"
            );
        }
    }
    assert_eq!(ball(&c, "a", 2).unwrap(), b2);
}

#[test]
fn wf_characterizes_concretizable_structures() {
    let mut r = rng(14);
    let sig = sig2();
    let (mut yes, mut no) = (0, 0);
    for _ in 0..600 {
        let a = random_sized(&mut r, &sig, 1, 4, 3);
        let anchor = a.id(r.gen_range(0..a.len())).to_string();
        let mut b = abstract2(&a, &[&anchor]).unwrap();
        if r.gen_bool(0.7) {
            let mut elems = b.elements();
            let e = r.gen_range(0..elems.len());
            let name = omega(1, 2)[r.gen_range(0..4)].clone();
            if let Some(k) = elems[e].labels.iter().position(|l| *l == name) {
                elems[e].labels.remove(k);
            } else {
                elems[e].labels.push(name);
            }
            if r.gen_bool(0.3) {
                elems[e].values[0] = r.gen_range(1..=4);
            }
            b = DataStructure::new(b.signature().clone(), elems).unwrap();
        }
        let wf = eval::eval(&b, &interp(1, &[&anchor]), &wf_formula2(&vars(1))).unwrap();
        match concretize2(&b, &[&anchor]) {
            Ok(c) => {
                assert!(wf);
                yes += 1;
                let back = abstract2(&c, &[&anchor]).unwrap();
                for e in 0..b.len() {
                    assert_eq!(b.label_names(e), back.label_names(e));
                }
            }
            Err(Error::Contract(_)) => {
                assert!(!wf);
                no += 1;
            }
            Err(e) => panic!("{e}"),
        }
    }
    assert!(yes > 50 && no > 50, "{yes} {no}");
}

fn check_ball_facts1(a: &DataStructure, anchors: &[&str], p: usize) {
    let ap = anchors[p - 1];
    let abs = abstract1(a, anchors).unwrap();
    let v = view(a, ap, 1).unwrap().structure;
    let b1 = ball(a, ap, 1).unwrap();
    let d = a.d();
    let ui = |e: usize, i: usize, j: usize| abs.has_label_named(e, &u_name(p, i, j));
    for b in v.ids() {
        for c in v.ids() {
            let (eb, ec) = (a.index_of(b).unwrap(), a.index_of(c).unwrap());
            for j in 1..=d {
                for k in 1..=d {
                    let holds = v.relation_holds(j, k, b, c).unwrap();
                    match (b1.contains(&(b.clone(), j)), b1.contains(&(c.clone(), k))) {
                        (true, true) => assert_eq!(holds, (1..=d).any(|i| ui(eb, i, j) && ui(ec, i, k))),
                        (false, true) | (true, false) => assert!(!holds),
                        (false, false) => assert_eq!(holds, b == c && j == k),
                    }
                }
            }
        }
    }
}

#[test]
fn radius1_ball_facts_exhaustive() {
    for d in 1..=3 {
        let sig = Signature::full(Vec::<&str>::new(), d).unwrap();
        let max_n = if d == 3 { 2 } else { 4 - d + 1 };
        for n in 1..=max_n {
            for vals in value_patterns(d * n) {
                let a = with_values(&sig, n, &vals, |_, _| false);
                for t in anchor_tuples(&a, if n <= 3 { 2 } else { 1 }) {
                    for p in 1..=t.len() {
                        check_ball_facts1(&a, &refs(&t), p);
                    }
                }
            }
        }
    }
}

#[test]
fn translate1_matches_source_on_random_matrices() {
    let mut r = rng(15);
    for d in 1..=3 {
        let sig = Signature::full(["P"], d).unwrap();
        let sigma = sig.sigma().to_vec();
        let rels = pairs(sig.gamma());
        for _ in 0..150 {
            let k = r.gen_range(1..=2);
            let vs: Vec<&str> = ["x1", "x2"][..k].to_vec();
            let f = random_qf_matrix(&mut r, &sigma, &rels, &vs, 1, 3);
            let t = translate1(&f, &vars(k), d).unwrap();
            for _ in 0..6 {
                let a = random_sized(&mut r, &sig, 1, 4, 4);
                let anchors: Vec<String> = (0..k).map(|_| a.id(r.gen_range(0..a.len())).to_string()).collect();
                let anchors = refs(&anchors);
                let lhs = eval::eval(&a, &interp(k, &anchors), &f).unwrap();
                let b = abstract1(&a, &anchors).unwrap();
                let rhs = eval::eval(&b, &interp(k, &anchors), &t).unwrap();
                assert_eq!(lhs, rhs, "d={d} {f:?} on {a:?} at {anchors:?}");
            }
        }
    }
}

#[test]
fn radius1_abstraction_and_concretization() {
    let mut r = rng(16);
    for d in 1..=3 {
        let sig = Signature::full(["P"], d).unwrap();
        for _ in 0..150 {
            let a = random_sized(&mut r, &sig, 1, 5, 4);
            let k = r.gen_range(1..=2);
            let anchors: Vec<String> = (0..k).map(|_| a.id(r.gen_range(0..a.len())).to_string()).collect();
            let anchors = refs(&anchors);
            let b = abstract1(&a, &anchors).unwrap();
            assert_eq!(b.d(), 0);
            assert!(eval::eval(&b, &interp(k, &anchors), &wf_formula1(&vars(k), d)).unwrap());
            let c = concretize1(&b, &anchors, d).unwrap();
            let back = abstract1(&c, &anchors).unwrap();
            for e in 0..b.len() {
                assert_eq!(b.label_names(e), back.label_names(e));
            }
        }
    }
    let a = DataStructure::new(Signature::full(["P"], 1).unwrap(), vec![Element::new("a", ["P"], &[1])]).unwrap();
    let b = abstract1(&a, &["a"]).unwrap();
    assert_eq!(b.signature().sigma(), ["P", "U<1|1|1>"]);
}

#[test]
fn reduce_exist1_is_monadic() {
    let sig = Signature::full(["P"], 3).unwrap();
    let phi = parse_formula("exists x. loc[1] x { exists y. (x ~1:1 y & !(y = x)) }").unwrap();
    let red = reduce_exist1(&phi, &sig).unwrap();
    assert!(red.psi.is_sentence());
    assert_eq!(red.signature.d(), 0);
    let spec = FragmentSpec::new(FragmentKind::Monadic, red.signature.clone());
    assert!(in_fragment(&red.psi, &spec).unwrap().ok);
    let a = DataStructure::new(sig, vec![Element::new("a", Vec::<&str>::new(), &[1, 2, 3]), Element::new("b", Vec::<&str>::new(), &[1, 5, 6])]).unwrap();
    assert!(eval::models(&a, &phi).unwrap());
    let b = red.abstract_model(&a, &["a"]).unwrap();
    assert!(eval::models(&b, &red.psi).unwrap());
    let back = red.pull_back(&b).unwrap().unwrap();
    assert!(eval::models(&back, &phi).unwrap());
}

#[test]
fn reduce_exist2_moves_models_both_ways() {
    let sig = sig2();
    let mut r = rng(17);
    let sentences = [
        "exists x. loc[2] x { exists y. (!(y = x) & x ~1:1 y & x ~2:2 y) }",
        "exists x. exists w. (!(x = w) & loc[2] x { P(x) } & loc[2] w { forall y. (y ~1:1 w | !P(y)) })",
        "exists x. loc[2] x { exists y. exists z. (x ~1:2 y & y ~1:2 z & !P(z)) }",
    ];
    for s in sentences {
        let phi = parse_formula(s).unwrap();
        let red = reduce_exist2(&phi, &sig).unwrap();
        assert_eq!(red.signature.d(), 1);
        for _ in 0..200 {
            let a = random_sized(&mut r, &sig, 1, 4, 4);
            if !eval::models(&a, &phi).unwrap() {
                continue;
            }
            let mut found = false;
            for t in anchor_tuples(&a, red.vars.len()) {
                let b = red.abstract_model(&a, &refs(&t)).unwrap();
                if eval::models(&b, &red.psi).unwrap() {
                    found = true;
                    let back = red.pull_back(&b).unwrap().unwrap();
                    assert_eq!(back.len(), a.len());
                    assert!(eval::models(&back, &phi).unwrap());
                    break;
                }
            }
            assert!(found, "{s} on {a:?}");
        }
    }
}

#[test]
fn reduce_exist2_rejects_outside_fragment() {
    let sig = sig2();
    let phi = parse_formula("forall x. loc[2] x { P(x) }").unwrap();
    assert!(matches!(reduce_exist2(&phi, &sig), Err(Error::Fragment(_))));
    let open = parse_formula("loc[2] x { P(x) }").unwrap();
    assert!(matches!(reduce_exist2(&open, &sig), Err(Error::Argument(_))));
    let one = Signature::full(["P"], 1).unwrap();
    assert!(matches!(reduce_exist2(&parse_formula("exists x. loc[2] x { P(x) }").unwrap(), &one), Err(Error::Argument(_))));
}
