#![allow(dead_code)]

use locfo_core::formula::{self as fm, Formula};
use locfo_core::structure::{DataStructure, Element, GammaSet, Signature, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_structure(r: &mut ChaCha8Rng, sig: &Signature, n: usize, max_val: Value) -> DataStructure {
    let elems = (0..n)
        .map(|k| {
            let labels: Vec<&str> = sig.sigma().iter().filter(|_| r.gen_bool(0.5)).map(String::as_str).collect();
            let vals: Vec<Value> = (0..sig.d()).map(|_| r.gen_range(1..=max_val)).collect();
            Element::new(&format!("a{k}"), labels, &vals)
        })
        .collect();
    DataStructure::new(sig.clone(), elems).unwrap()
}

pub fn pairs(g: &GammaSet) -> Vec<(usize, usize)> {
    g.iter().copied().collect()
}

/// Random formula whose free variables lie in `scope`, over variables `vars`.
pub fn random_body(r: &mut ChaCha8Rng, sigma: &[String], rels: &[(usize, usize)], vars: &[&str], scope: &mut Vec<String>, depth: usize) -> Formula {
    let leaf = depth == 0 || r.gen_bool(0.3);
    if leaf {
        let v = scope.choose(r).unwrap().clone();
        let w = scope.choose(r).unwrap().clone();
        return match r.gen_range(0..4) {
            0 if !sigma.is_empty() => fm::pred(sigma.choose(r).unwrap(), &v),
            1 | 2 if !rels.is_empty() => {
                let (i, j) = *rels.choose(r).unwrap();
                fm::rel(i, j, &v, &w)
            }
            _ => fm::eq(&v, &w),
        };
    }
    match r.gen_range(0..5) {
        0 => fm::not(random_body(r, sigma, rels, vars, scope, depth - 1)),
        1 => fm::and2(
            random_body(r, sigma, rels, vars, scope, depth - 1),
            random_body(r, sigma, rels, vars, scope, depth - 1),
        ),
        2 => fm::or2(
            random_body(r, sigma, rels, vars, scope, depth - 1),
            random_body(r, sigma, rels, vars, scope, depth - 1),
        ),
        k => {
            let v = vars.choose(r).unwrap().to_string();
            scope.push(v.clone());
            let body = random_body(r, sigma, rels, vars, scope, depth - 1);
            scope.pop();
            if k == 3 {
                fm::exists(&v, body)
            } else {
                fm::forall(&v, body)
            }
        }
    }
}

/// Random LOCAL(r) sentence: a quantifier over x and a Boolean combination of local subformulas.
pub fn random_local_sentence(r: &mut ChaCha8Rng, sigma: &[String], rels: &[(usize, usize)], radius: usize, depth: usize) -> Formula {
    let mut parts = Vec::new();
    for _ in 0..r.gen_range(1..=2) {
        let mut scope = vec!["x".to_string()];
        let psi = random_body(r, sigma, rels, &["y", "z"], &mut scope, depth);
        let l = fm::local("x", radius, psi);
        parts.push(if r.gen_bool(0.3) { fm::not(l) } else { l });
    }
    let body = if parts.len() == 1 { parts.pop().unwrap() } else if r.gen_bool(0.5) { fm::and(parts) } else { fm::or(parts) };
    if r.gen_bool(0.6) {
        fm::exists("x", body)
    } else {
        fm::forall("x", body)
    }
}

pub fn random_sized(r: &mut ChaCha8Rng, sig: &Signature, lo: usize, hi: usize, max_val: Value) -> DataStructure {
    let n = r.gen_range(lo..=hi);
    random_structure(r, sig, n, max_val)
}

/// All restricted growth strings of the given length, as 1-based values.
pub fn value_patterns(len: usize) -> Vec<Vec<Value>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn go(len: usize, cur: &mut Vec<Value>, max: Value, out: &mut Vec<Vec<Value>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for v in 1..=max + 1 {
            cur.push(v);
            go(len, cur, max.max(v), out);
            cur.pop();
        }
    }
    go(len, &mut cur, 0, &mut out);
    out
}

/// Structure with the given flat value vector and labels chosen by `label(e, p)`.
pub fn with_values(sig: &Signature, n: usize, values: &[Value], label: impl Fn(usize, usize) -> bool) -> DataStructure {
    let d = sig.d();
    let elems = (0..n)
        .map(|e| {
            let labels: Vec<&str> =
                sig.sigma().iter().enumerate().filter(|(p, _)| label(e, *p)).map(|(_, s)| s.as_str()).collect();
            Element::new(&format!("a{e}"), labels, &values[e * d..(e + 1) * d])
        })
        .collect();
    DataStructure::new(sig.clone(), elems).unwrap()
}

/// Random quantifier-free local matrix over centres `vars`.
pub fn random_qf_matrix(r: &mut ChaCha8Rng, sigma: &[String], rels: &[(usize, usize)], vars: &[&str], radius: usize, depth: usize) -> Formula {
    let leaf = |r: &mut ChaCha8Rng| {
        let x = vars.choose(r).unwrap().to_string();
        if r.gen_bool(0.2) {
            let y = vars.choose(r).unwrap();
            return fm::eq(&x, y);
        }
        let mut scope = vec![x.clone()];
        let body = random_body(r, sigma, rels, &["y", "z"], &mut scope, depth);
        fm::local(&x, radius, body)
    };
    let a = leaf(r);
    match r.gen_range(0..4) {
        0 => a,
        1 => fm::not(a),
        2 => fm::and2(a, leaf(r)),
        _ => fm::or2(a, fm::not(leaf(r))),
    }
}

/// Random formula over a fixed pool of names, exercising every connective.
pub fn random_formula(r: &mut ChaCha8Rng, depth: usize) -> Formula {
    let vars = ["x", "y", "z", "x#1", "long_name"];
    let preds = ["P", "Q", "Leader", "U<1|2>"];
    let v = |r: &mut ChaCha8Rng| vars.choose(r).unwrap().to_string();
    if depth == 0 || r.gen_bool(0.25) {
        return match r.gen_range(0..5) {
            0 => fm::pred(preds.choose(r).unwrap(), &v(r)),
            1 => fm::rel(r.gen_range(1..=3), r.gen_range(1..=3), &v(r), &v(r)),
            2 => fm::eq(&v(r), &v(r)),
            3 => fm::not(fm::eq(&v(r), &v(r))),
            _ => Formula::Const(r.gen_bool(0.5)),
        };
    }
    let sub = |r: &mut ChaCha8Rng| random_formula(r, depth - 1);
    match r.gen_range(0..8) {
        0 => fm::not(sub(r)),
        1 | 2 => {
            let n = r.gen_range(2..=3);
            let parts = (0..n).map(|_| sub(r)).collect();
            if r.gen_bool(0.5) {
                fm::and(parts)
            } else {
                fm::or(parts)
            }
        }
        3 => fm::exists(&v(r), sub(r)),
        4 => fm::forall(&v(r), sub(r)),
        5 => fm::atleast(r.gen_range(1..=4), &v(r), sub(r)),
        _ => fm::local(&v(r), r.gen_range(0..=3), sub(r)),
    }
}
