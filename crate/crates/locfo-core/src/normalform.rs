//! Threshold normal form for unary formulas and the counter encoding into two variables.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::formula::{self as fm, Formula};
use crate::structure::{DataStructure, Signature};

/// ∃^{≥k} y. φ_U(y), where φ_U fixes the full Σ-type of y.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThresholdAtom {
    pub k: usize,
    pub u: BTreeSet<String>,
}

/// Quantifier-free formulas over unary literals, equalities and threshold atoms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Qf {
    Const(bool),
    Pred(String, String),
    Eq(String, String),
    Thr(ThresholdAtom),
    Not(Box<Qf>),
    And(Vec<Qf>),
    Or(Vec<Qf>),
}

impl Qf {
    pub fn not(self) -> Qf {
        match self {
            Qf::Const(b) => Qf::Const(!b),
            Qf::Not(g) => *g,
            g => Qf::Not(Box::new(g)),
        }
    }

    pub fn and(items: Vec<Qf>) -> Qf {
        combine(items, true)
    }

    pub fn or(items: Vec<Qf>) -> Qf {
        combine(items, false)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Qf::Pred(_, x) => {
                out.insert(x.clone());
            }
            Qf::Eq(x, y) => {
                out.insert(x.clone());
                out.insert(y.clone());
            }
            Qf::Not(g) => g.collect_vars(out),
            Qf::And(gs) | Qf::Or(gs) => gs.iter().for_each(|g| g.collect_vars(out)),
            Qf::Const(_) | Qf::Thr(_) => {}
        }
    }

    /// Largest threshold k occurring, 0 if none.
    pub fn max_threshold(&self) -> usize {
        match self {
            Qf::Thr(t) => t.k,
            Qf::Not(g) => g.max_threshold(),
            Qf::And(gs) | Qf::Or(gs) => gs.iter().map(Qf::max_threshold).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn atoms(&self) -> BTreeSet<ThresholdAtom> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut out);
        out
    }

    fn visit_atoms(&self, out: &mut BTreeSet<ThresholdAtom>) {
        match self {
            Qf::Thr(t) => {
                out.insert(t.clone());
            }
            Qf::Not(g) => g.visit_atoms(out),
            Qf::And(gs) | Qf::Or(gs) => gs.iter().for_each(|g| g.visit_atoms(out)),
            _ => {}
        }
    }

    /// Rebuilds bottom-up through `f`, which sees each leaf and returns its replacement.
    pub fn map_leaves<F: FnMut(&Qf) -> Qf>(&self, f: &mut F) -> Qf {
        match self {
            Qf::Not(g) => g.map_leaves(f).not(),
            Qf::And(gs) => Qf::and(gs.iter().map(|g| g.map_leaves(f)).collect()),
            Qf::Or(gs) => Qf::or(gs.iter().map(|g| g.map_leaves(f)).collect()),
            leaf => f(leaf),
        }
    }

    fn subst(&self, from: &str, to: &str) -> Qf {
        let sv = |x: &String| if x == from { to.to_string() } else { x.clone() };
        self.map_leaves(&mut |leaf| match leaf {
            Qf::Pred(p, x) => Qf::Pred(p.clone(), sv(x)),
            Qf::Eq(x, y) => eq_qf(&sv(x), &sv(y)),
            other => other.clone(),
        })
    }

    /// Converts to a formula; atoms become `atleast[k] y. φ_U(y)` over `sigma`.
    pub fn to_formula(&self, sigma: &[String], y: &str) -> Formula {
        match self {
            Qf::Const(b) => Formula::Const(*b),
            Qf::Pred(p, x) => fm::pred(p, x),
            Qf::Eq(x, y2) => fm::eq(x, y2),
            Qf::Thr(t) => fm::atleast(t.k, y, phi_type(&t.u, sigma, y)),
            Qf::Not(g) => fm::not(g.to_formula(sigma, y)),
            Qf::And(gs) => fm::and(gs.iter().map(|g| g.to_formula(sigma, y)).collect()),
            Qf::Or(gs) => fm::or(gs.iter().map(|g| g.to_formula(sigma, y)).collect()),
        }
    }
}

fn eq_qf(x: &str, y: &str) -> Qf {
    if x == y {
        Qf::Const(true)
    } else if x < y {
        Qf::Eq(x.to_string(), y.to_string())
    } else {
        Qf::Eq(y.to_string(), x.to_string())
    }
}

fn combine(items: Vec<Qf>, conj: bool) -> Qf {
    let mut flat = Vec::new();
    for it in items {
        match it {
            Qf::And(gs) if conj => flat.extend(gs),
            Qf::Or(gs) if !conj => flat.extend(gs),
            Qf::Const(b) if b == conj => {}
            Qf::Const(b) => return Qf::Const(b),
            g => flat.push(g),
        }
    }
    // Same type U: a conjunction keeps the largest k, a disjunction the smallest.
    let mut out: Vec<Qf> = Vec::with_capacity(flat.len());
    for g in flat {
        if let Qf::Thr(t) = &g {
            if let Some(Qf::Thr(prev)) = out
                .iter_mut()
                .find(|h| matches!(h, Qf::Thr(p) if p.u == t.u))
            {
                prev.k = if conj { prev.k.max(t.k) } else { prev.k.min(t.k) };
                continue;
            }
        }
        out.push(g);
    }
    out.sort();
    out.dedup();
    for g in &out {
        if let Qf::Not(inner) = g {
            if out.binary_search(inner).is_ok() {
                return Qf::Const(!conj);
            }
        }
    }
    match out.len() {
        0 => Qf::Const(conj),
        1 => out.pop().unwrap(),
        _ if conj => Qf::And(out),
        _ => Qf::Or(out),
    }
}

/// φ_U(y) = ⋀_{σ∈U} σ(y) ∧ ⋀_{σ∉U} ¬σ(y).
pub fn phi_type(u: &BTreeSet<String>, sigma: &[String], y: &str) -> Formula {
    fm::and(
        sigma
            .iter()
            .map(|s| if u.contains(s) { fm::pred(s, y) } else { fm::not(fm::pred(s, y)) })
            .collect(),
    )
}

fn qf_type(u: &BTreeSet<String>, sigma: &[String], z: &str) -> Qf {
    Qf::and(
        sigma
            .iter()
            .map(|s| {
                let l = Qf::Pred(s.clone(), z.to_string());
                if u.contains(s) {
                    l
                } else {
                    l.not()
                }
            })
            .collect(),
    )
}

/// All subsets of `sigma`, in binary counting order.
pub fn all_types(sigma: &[String]) -> Vec<BTreeSet<String>> {
    (0..1usize << sigma.len())
        .map(|mask| {
            sigma
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, s)| s.clone())
                .collect()
        })
        .collect()
}

/// Boolean combination over literals σ(x) and threshold atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdNF {
    pub body: Qf,
    pub sigma: Vec<String>,
    pub x: Option<String>,
    /// Largest threshold in `body`, 0 if none.
    pub m: usize,
}

impl ThresholdNF {
    pub fn to_formula(&self) -> Formula {
        let y = if self.x.as_deref() == Some("y") { "z" } else { "y" };
        self.body.to_formula(&self.sigma, y)
    }
}

struct Qe<'a> {
    sigma: &'a [String],
    types: Vec<BTreeSet<String>>,
}

impl Qe<'_> {
    fn run(&self, f: &Formula) -> Result<Qf> {
        Ok(match f {
            Formula::Const(b) => Qf::Const(*b),
            Formula::Pred(p, x) => {
                if !self.sigma.contains(p) {
                    return Err(Error::Typing(format!("unknown predicate `{p}`")));
                }
                Qf::Pred(p.clone(), x.clone())
            }
            Formula::Eq(x, y) => eq_qf(x, y),
            Formula::Rel(i, j, x, y) => {
                return Err(Error::Fragment(format!("relation atom `{x} ~{i}:{j} {y}` in a unary formula")))
            }
            Formula::Local(x, _, _) => {
                return Err(Error::Fragment(format!("local modality at `{x}` in a unary formula")))
            }
            Formula::Not(g) => self.run(g)?.not(),
            Formula::And(gs) => Qf::and(gs.iter().map(|g| self.run(g)).collect::<Result<_>>()?),
            Formula::Or(gs) => Qf::or(gs.iter().map(|g| self.run(g)).collect::<Result<_>>()?),
            Formula::Exists(y, g) => self.elim(y, self.run(g)?),
            Formula::Forall(y, g) => self.elim(y, self.run(g)?.not()).not(),
            Formula::AtLeast(..) => self.run(&f.expand_sugar())?,
        })
    }

    /// ∃y.χ for quantifier-free χ.
    fn elim(&self, y: &str, chi: Qf) -> Qf {
        let fv = chi.free_vars();
        if !fv.contains(y) {
            return chi;
        }
        let zs: Vec<String> = fv.into_iter().filter(|v| v != y).collect();
        let mut disj: Vec<Qf> = zs.iter().map(|z| chi.subst(y, z)).collect();
        for u in &self.types {
            let chi_u = chi.map_leaves(&mut |leaf| match leaf {
                Qf::Pred(p, v) if v == y => Qf::Const(u.contains(p)),
                Qf::Eq(a, b) if a == y || b == y => Qf::Const(a == b),
                other => other.clone(),
            });
            if chi_u == Qf::Const(false) {
                continue;
            }
            // Some element of type U differs from every z.
            let ex = Qf::and(
                (0..=zs.len())
                    .map(|c| Qf::or(vec![self.count_at_least(c, u, &zs).not(), thr(c + 1, u)]))
                    .collect(),
            );
            disj.push(Qf::and(vec![chi_u, ex]));
        }
        Qf::or(disj)
    }

    /// At least c pairwise distinct variables among `zs` have type U.
    fn count_at_least(&self, c: usize, u: &BTreeSet<String>, zs: &[String]) -> Qf {
        if c == 0 {
            return Qf::Const(true);
        }
        let mut disj = Vec::new();
        for subset in subsets_of_size(zs.len(), c) {
            let mut conj: Vec<Qf> = subset.iter().map(|&i| qf_type(u, self.sigma, &zs[i])).collect();
            for a in 0..subset.len() {
                for b in a + 1..subset.len() {
                    conj.push(eq_qf(&zs[subset[a]], &zs[subset[b]]).not());
                }
            }
            disj.push(Qf::and(conj));
        }
        Qf::or(disj)
    }
}

fn thr(k: usize, u: &BTreeSet<String>) -> Qf {
    Qf::Thr(ThresholdAtom { k, u: u.clone() })
}

pub(crate) fn subsets_of_size(n: usize, c: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, c: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == c {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, c, cur, out);
            cur.pop();
        }
    }
    go(0, n, c, &mut cur, &mut out);
    out
}

/// Quantifier elimination to a Boolean combination of σ(x) literals and threshold atoms.
pub fn threshold_nf(psi: &Formula, sigma: &[String], x: Option<&str>) -> Result<ThresholdNF> {
    let fv = psi.free_vars();
    if let Some(v) = fv.iter().find(|v| Some(v.as_str()) != x) {
        return Err(Error::Argument(format!("unexpected free variable `{v}`")));
    }
    let qe = Qe { sigma, types: all_types(sigma) };
    let body = qe.run(psi)?;
    let m = body.max_threshold();
    Ok(ThresholdNF { body, sigma: sigma.to_vec(), x: x.map(String::from), m })
}

/// Name of the i-th counter predicate.
pub fn eta_name(i: usize) -> String {
    format!("Eta<{i}>")
}

fn phi_same(sigma: &[String], x: &str, y: &str) -> Formula {
    fm::and(sigma.iter().map(|s| fm::iff(fm::pred(s, x), fm::pred(s, y))).collect())
}

/// ψ_η = ψ_η1 ∧ ψ_η2 ∧ ψ_η3 over Σ and counters η_1..η_M.
pub fn psi_eta(sigma: &[String], m: usize) -> Formula {
    let eta = |i: usize, v: &str| fm::pred(&eta_name(i), v);
    let one = fm::forall(
        "x",
        fm::or(
            (1..=m)
                .map(|i| {
                    let mut c = vec![eta(i, "x")];
                    c.extend((1..=m).filter(|j| *j != i).map(|j| fm::not(eta(j, "x"))));
                    fm::and(c)
                })
                .collect(),
        ),
    );
    let mut parts = vec![one];
    if m >= 2 {
        parts.push(fm::forall(
            "x",
            fm::and(
                (1..m)
                    .map(|i| {
                        let mut c = vec![fm::neq("x", "y")];
                        if !sigma.is_empty() {
                            c.push(phi_same(sigma, "x", "y"));
                        }
                        c.push(eta(i, "y"));
                        fm::implies(eta(i, "x"), fm::not(fm::exists("y", fm::and(c))))
                    })
                    .collect(),
            ),
        ));
        parts.push(fm::forall(
            "x",
            fm::and(
                (2..=m)
                    .map(|i| {
                        let mut c = Vec::new();
                        if !sigma.is_empty() {
                            c.push(phi_same(sigma, "x", "y"));
                        }
                        c.push(eta(i - 1, "y"));
                        fm::implies(eta(i, "x"), fm::exists("y", fm::and(c)))
                    })
                    .collect(),
            ),
        ));
    }
    fm::and(parts)
}

/// Counter encoding of a unary sentence into a two-variable sentence over Σ ∪ {η_1..η_M}.
pub fn counter_encoding(phi: &Formula, sigma: &[String]) -> Result<(Vec<String>, Formula)> {
    if !phi.is_sentence() {
        return Err(Error::Argument("counter_encoding needs a sentence".into()));
    }
    let nf = threshold_nf(phi, sigma, None)?;
    let m = nf.m;
    let mut sigma2 = sigma.to_vec();
    for i in 1..=m {
        let n = eta_name(i);
        if sigma.contains(&n) {
            return Err(Error::Argument(format!("predicate `{n}` already in the signature")));
        }
        sigma2.push(n);
    }
    let encoded = qf_to_counted(&nf.body, sigma);
    let out = if m == 0 { encoded } else { fm::and(vec![encoded, psi_eta(sigma, m)]) };
    Ok((sigma2, out))
}

fn qf_to_counted(q: &Qf, sigma: &[String]) -> Formula {
    match q {
        Qf::Thr(t) => fm::exists(
            "y",
            fm::and(vec![phi_type(&t.u, sigma, "y"), fm::pred(&eta_name(t.k), "y")]),
        ),
        Qf::Const(b) => Formula::Const(*b),
        Qf::Pred(p, x) => fm::pred(p, x),
        Qf::Eq(x, y) => fm::eq(x, y),
        Qf::Not(g) => fm::not(qf_to_counted(g, sigma)),
        Qf::And(gs) => fm::and(gs.iter().map(|g| qf_to_counted(g, sigma)).collect()),
        Qf::Or(gs) => fm::or(gs.iter().map(|g| qf_to_counted(g, sigma)).collect()),
    }
}

/// Labels each element with η_{min(rank, M)}, rank counted among elements with the same Σ-labels.
pub fn eta_expand(a: &DataStructure, m: usize) -> Result<DataStructure> {
    if m == 0 {
        return Err(Error::Argument("eta_expand needs M >= 1".into()));
    }
    let sig: Signature = a.signature().extended((1..=m).map(eta_name))?;
    let s_new = sig.sigma().len();
    let mut labels = Vec::with_capacity(a.len() * s_new);
    for e in 0..a.len() {
        let rank = (0..=e).filter(|&b| a.label_row(b) == a.label_row(e)).count();
        labels.extend_from_slice(a.label_row(e));
        for i in 1..=m {
            labels.push(i == rank.min(m));
        }
        debug_assert_eq!(labels.len(), (e + 1) * s_new);
    }
    DataStructure::from_parts(sig, a.ids().to_vec(), labels, a.raw_values().to_vec())
}
