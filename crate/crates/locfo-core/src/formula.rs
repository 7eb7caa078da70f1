//! Formula AST for dFO with the local modality and counting sugar.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::structure::{gamma_df, Signature};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Const(bool),
    /// σ(x)
    Pred(String, String),
    /// x ~i:j y
    Rel(usize, usize, String, String),
    Eq(String, String),
    Not(Box<Formula>),
    /// Conjunction of at least two operands.
    And(Vec<Formula>),
    /// Disjunction of at least two operands.
    Or(Vec<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
    /// ⟨⟨ψ⟩⟩^r_x
    Local(String, usize, Box<Formula>),
    /// ∃^{≥k} y. ψ
    AtLeast(usize, String, Box<Formula>),
}

use Formula::*;

pub fn tt() -> Formula {
    Const(true)
}

pub fn ff() -> Formula {
    Const(false)
}

pub fn pred(p: &str, x: &str) -> Formula {
    Pred(p.to_string(), x.to_string())
}

pub fn rel(i: usize, j: usize, x: &str, y: &str) -> Formula {
    Rel(i, j, x.to_string(), y.to_string())
}

pub fn eq(x: &str, y: &str) -> Formula {
    Eq(x.to_string(), y.to_string())
}

pub fn neq(x: &str, y: &str) -> Formula {
    not(eq(x, y))
}

pub fn not(f: Formula) -> Formula {
    Not(Box::new(f))
}

/// n-ary conjunction; the empty conjunction is `true`, a singleton is returned as is.
pub fn and(mut fs: Vec<Formula>) -> Formula {
    match fs.len() {
        0 => Const(true),
        1 => fs.pop().unwrap(),
        _ => And(fs),
    }
}

pub fn or(mut fs: Vec<Formula>) -> Formula {
    match fs.len() {
        0 => Const(false),
        1 => fs.pop().unwrap(),
        _ => Or(fs),
    }
}

pub fn and2(a: Formula, b: Formula) -> Formula {
    And(vec![a, b])
}

pub fn or2(a: Formula, b: Formula) -> Formula {
    Or(vec![a, b])
}

/// a → b, written ¬a ∨ b.
pub fn implies(a: Formula, b: Formula) -> Formula {
    Or(vec![not(a), b])
}

pub fn iff(a: Formula, b: Formula) -> Formula {
    And(vec![implies(a.clone(), b.clone()), implies(b, a)])
}

pub fn exists(x: &str, f: Formula) -> Formula {
    Exists(x.to_string(), Box::new(f))
}

pub fn forall(x: &str, f: Formula) -> Formula {
    Forall(x.to_string(), Box::new(f))
}

pub fn local(x: &str, r: usize, f: Formula) -> Formula {
    Local(x.to_string(), r, Box::new(f))
}

pub fn atleast(k: usize, y: &str, f: Formula) -> Formula {
    AtLeast(k, y.to_string(), Box::new(f))
}

impl Formula {
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut bound = Vec::new();
        collect_free(self, &mut bound, &mut out);
        out
    }

    /// Every variable name occurring anywhere, bound or free.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Pred(_, x) => {
                out.insert(x.clone());
            }
            Rel(_, _, x, y) | Eq(x, y) => {
                out.insert(x.clone());
                out.insert(y.clone());
            }
            Exists(x, _) | Forall(x, _) | Local(x, _, _) | AtLeast(_, x, _) => {
                out.insert(x.clone());
            }
            _ => {}
        });
        out
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Pre-order traversal.
    pub fn visit<F: FnMut(&Formula)>(&self, f: &mut F) {
        f(self);
        match self {
            Not(g) | Exists(_, g) | Forall(_, g) | Local(_, _, g) | AtLeast(_, _, g) => g.visit(f),
            And(gs) | Or(gs) => gs.iter().for_each(|g| g.visit(f)),
            _ => {}
        }
    }

    /// Nesting depth of quantifiers; ∃^{≥k} counts k (its expansion), Local is transparent.
    pub fn quantifier_rank(&self) -> usize {
        match self {
            Const(_) | Pred(..) | Rel(..) | Eq(..) => 0,
            Not(g) | Local(_, _, g) => g.quantifier_rank(),
            And(gs) | Or(gs) => gs.iter().map(|g| g.quantifier_rank()).max().unwrap_or(0),
            Exists(_, g) | Forall(_, g) => 1 + g.quantifier_rank(),
            AtLeast(k, _, g) => k + g.quantifier_rank(),
        }
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Predicate names used.
    pub fn predicates(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Pred(p, _) = f {
                out.insert(p.clone());
            }
        });
        out
    }

    /// Relation index pairs used.
    pub fn relations(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Rel(i, j, _, _) = f {
                out.insert((*i, *j));
            }
        });
        out
    }

    pub fn has_local(&self) -> bool {
        let mut found = false;
        self.visit(&mut |f| found |= matches!(f, Local(..)));
        found
    }

    /// Replaces every ∃^{≥k} by k fresh existentials with pairwise disequality.
    pub fn expand_sugar(&self) -> Formula {
        let mut avoid = self.all_vars();
        expand(self, &mut avoid)
    }

    /// Capture-avoiding substitution of free `from` by `to`.
    pub fn substitute(&self, from: &str, to: &str) -> Formula {
        let mut avoid = self.all_vars();
        avoid.insert(to.to_string());
        avoid.insert(from.to_string());
        subst(self, from, to, &mut avoid)
    }
}

fn collect_free(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    let note = |x: &String, bound: &Vec<String>, out: &mut BTreeSet<String>| {
        if !bound.contains(x) {
            out.insert(x.clone());
        }
    };
    match f {
        Const(_) => {}
        Pred(_, x) => note(x, bound, out),
        Rel(_, _, x, y) | Eq(x, y) => {
            note(x, bound, out);
            note(y, bound, out);
        }
        Not(g) => collect_free(g, bound, out),
        And(gs) | Or(gs) => gs.iter().for_each(|g| collect_free(g, bound, out)),
        Exists(x, g) | Forall(x, g) | AtLeast(_, x, g) => {
            bound.push(x.clone());
            collect_free(g, bound, out);
            bound.pop();
        }
        Local(x, _, g) => {
            note(x, bound, out);
            collect_free(g, bound, out);
        }
    }
}

/// Fresh name `base#k` not in `avoid`; the name is added to `avoid`.
pub fn fresh_var(base: &str, avoid: &mut BTreeSet<String>) -> String {
    let stem = base.split('#').next().unwrap_or(base);
    let mut k = 1;
    loop {
        let cand = format!("{stem}#{k}");
        if !avoid.contains(&cand) {
            avoid.insert(cand.clone());
            return cand;
        }
        k += 1;
    }
}

fn expand(f: &Formula, avoid: &mut BTreeSet<String>) -> Formula {
    match f {
        Const(_) | Pred(..) | Rel(..) | Eq(..) => f.clone(),
        Not(g) => not(expand(g, avoid)),
        And(gs) => And(gs.iter().map(|g| expand(g, avoid)).collect()),
        Or(gs) => Or(gs.iter().map(|g| expand(g, avoid)).collect()),
        Exists(x, g) => exists(x, expand(g, avoid)),
        Forall(x, g) => forall(x, expand(g, avoid)),
        Local(x, r, g) => local(x, *r, expand(g, avoid)),
        AtLeast(k, y, g) => {
            let body = expand(g, avoid);
            let ys: Vec<String> = (0..*k).map(|_| fresh_var(y, avoid)).collect();
            let mut conj: Vec<Formula> = ys.iter().map(|yi| subst(&body, y, yi, avoid)).collect();
            for a in 0..ys.len() {
                for b in a + 1..ys.len() {
                    conj.push(neq(&ys[a], &ys[b]));
                }
            }
            let mut out = and(conj);
            for yi in ys.iter().rev() {
                out = exists(yi, out);
            }
            out
        }
    }
}

fn subst(f: &Formula, from: &str, to: &str, avoid: &mut BTreeSet<String>) -> Formula {
    let sv = |x: &String| if x == from { to.to_string() } else { x.clone() };
    match f {
        Const(_) => f.clone(),
        Pred(p, x) => Pred(p.clone(), sv(x)),
        Rel(i, j, x, y) => Rel(*i, *j, sv(x), sv(y)),
        Eq(x, y) => Eq(sv(x), sv(y)),
        Not(g) => not(subst(g, from, to, avoid)),
        And(gs) => And(gs.iter().map(|g| subst(g, from, to, avoid)).collect()),
        Or(gs) => Or(gs.iter().map(|g| subst(g, from, to, avoid)).collect()),
        Local(x, r, g) => local(&sv(x), *r, subst(g, from, to, avoid)),
        Exists(x, g) | Forall(x, g) | AtLeast(_, x, g) => {
            if x == from || !g.free_vars().contains(from) {
                return f.clone();
            }
            let (x2, body) = if x == to {
                let x2 = fresh_var(x, avoid);
                let renamed = subst(g, x, &x2, avoid);
                (x2, renamed)
            } else {
                (x.clone(), (**g).clone())
            };
            let body = subst(&body, from, to, avoid);
            match f {
                Exists(..) => Exists(x2, Box::new(body)),
                Forall(..) => Forall(x2, Box::new(body)),
                AtLeast(k, _, _) => AtLeast(*k, x2, Box::new(body)),
                _ => unreachable!(),
            }
        }
    }
}

/// Fragment kinds that in_fragment can check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FragmentKind {
    Dfo,
    Local(usize),
    ExistLocal(usize),
    QfLocal(usize),
    TwoVar,
    ExtTwoVar,
    Monadic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FragmentSpec {
    pub kind: FragmentKind,
    pub signature: Signature,
}

impl FragmentSpec {
    pub fn new(kind: FragmentKind, signature: Signature) -> Self {
        FragmentSpec { kind, signature }
    }
}

/// Outcome of a fragment check; `diagnostic` explains a negative answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FragmentCheck {
    pub ok: bool,
    pub diagnostic: Option<String>,
}

impl FragmentCheck {
    fn yes() -> Self {
        FragmentCheck { ok: true, diagnostic: None }
    }

    fn no(msg: String) -> Self {
        FragmentCheck { ok: false, diagnostic: Some(msg) }
    }
}

/// Checks predicate names and relation indices against the signature.
pub fn type_check(f: &Formula, sig: &Signature) -> Result<()> {
    let mut err = None;
    f.visit(&mut |g| {
        if err.is_some() {
            return;
        }
        match g {
            Pred(p, x) if sig.pred_index(p).is_none() => {
                err = Some(format!("unknown predicate in `{p}({x})`"));
            }
            Rel(i, j, x, y) if *i == 0 || *j == 0 || *i > sig.d() || *j > sig.d() => {
                err = Some(format!("relation index in `{x} ~{i}:{j} {y}` exceeds d={}", sig.d()));
            }
            Local(x, _, _) if sig.d() == 0 => {
                err = Some(format!("local modality at `{x}` over a 0-data signature"));
            }
            AtLeast(0, y, _) => err = Some(format!("atleast[0] at `{y}`")),
            And(gs) | Or(gs) if gs.len() < 2 => {
                err = Some("connective with fewer than two operands".into());
            }
            _ => {}
        }
    });
    match err {
        Some(m) => Err(Error::Typing(m)),
        None => Ok(()),
    }
}

/// Fragment membership. Typing problems are errors, fragment violations are negative answers.
pub fn in_fragment(f: &Formula, spec: &FragmentSpec) -> Result<FragmentCheck> {
    type_check(f, &spec.signature)?;
    if let Some((i, j)) = f.relations().into_iter().find(|&(i, j)| !spec.signature.admits(i, j)) {
        return Ok(FragmentCheck::no(format!("relation ~{i}:{j} not in gamma")));
    }
    Ok(match spec.kind {
        FragmentKind::Dfo => FragmentCheck::yes(),
        FragmentKind::Local(r) => check_local(f, r, LocalMode::Full),
        FragmentKind::ExistLocal(r) => check_local(f, r, LocalMode::Exist),
        FragmentKind::QfLocal(r) => check_local(f, r, LocalMode::Qf),
        FragmentKind::TwoVar => check_two_var(f, None),
        FragmentKind::ExtTwoVar => check_two_var(f, Some(gamma_df())),
        FragmentKind::Monadic => {
            if !f.relations().is_empty() {
                FragmentCheck::no("relation atom in monadic formula".into())
            } else if f.has_local() {
                FragmentCheck::no("local modality in monadic formula".into())
            } else {
                FragmentCheck::yes()
            }
        }
    })
}

/// Fragment check that turns a negative answer into a fragment error.
pub fn require_fragment(f: &Formula, spec: &FragmentSpec) -> Result<()> {
    let c = in_fragment(f, spec)?;
    if c.ok {
        Ok(())
    } else {
        Err(Error::Fragment(c.diagnostic.unwrap_or_default()))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LocalMode {
    Full,
    Exist,
    Qf,
}

fn check_local(f: &Formula, r: usize, mode: LocalMode) -> FragmentCheck {
    if r == 0 {
        return FragmentCheck::no("local fragments need radius >= 1".into());
    }
    match walk_local(f, r, mode) {
        Ok(()) => FragmentCheck::yes(),
        Err(m) => FragmentCheck::no(m),
    }
}

fn walk_local(f: &Formula, r: usize, mode: LocalMode) -> core::result::Result<(), String> {
    match f {
        Const(_) | Eq(..) => Ok(()),
        Pred(p, x) => Err(format!("atom `{p}({x})` outside a local modality")),
        Rel(i, j, x, y) => Err(format!("atom `{x} ~{i}:{j} {y}` outside a local modality")),
        Not(g) => match (mode, &**g) {
            (LocalMode::Full, _) => walk_local(g, r, mode),
            (_, Eq(..)) => Ok(()),
            _ => Err("negation above a non-equality in an existential fragment".into()),
        },
        And(gs) | Or(gs) => gs.iter().try_for_each(|g| walk_local(g, r, mode)),
        Exists(x, g) | AtLeast(_, x, g) => {
            if mode == LocalMode::Qf {
                Err(format!("quantifier on `{x}` in a quantifier-free fragment"))
            } else {
                walk_local(g, r, mode)
            }
        }
        Forall(x, g) => {
            if mode == LocalMode::Full {
                walk_local(g, r, mode)
            } else {
                Err(format!("universal quantifier on `{x}` in an existential fragment"))
            }
        }
        Local(x, r2, body) => {
            if *r2 != r {
                return Err(format!("local modality at `{x}` has radius {r2}, expected {r}"));
            }
            if body.has_local() {
                return Err(format!("nested local modality under `{x}`"));
            }
            let fv = body.free_vars();
            if fv.iter().any(|v| v != x) {
                return Err(format!("local body at `{x}` has other free variables"));
            }
            Ok(())
        }
    }
}

fn check_two_var(f: &Formula, rels: Option<BTreeSet<(usize, usize)>>) -> FragmentCheck {
    if f.has_local() {
        return FragmentCheck::no("local modality in a two-variable formula".into());
    }
    let mut counting = false;
    f.visit(&mut |g| counting |= matches!(g, AtLeast(..)));
    if counting {
        return FragmentCheck::no("counting quantifier in a two-variable formula".into());
    }
    let vars = f.all_vars();
    if vars.len() > 2 {
        return FragmentCheck::no(format!("{} distinct variables", vars.len()));
    }
    if let Some(allowed) = rels {
        if let Some((i, j)) = f.relations().into_iter().find(|p| !allowed.contains(p)) {
            return FragmentCheck::no(format!("relation ~{i}:{j} outside {{~1:1, ~2:2}}"));
        }
    }
    FragmentCheck::yes()
}

/// Prenex form of an existential local sentence: (x1..xn, matrix).
pub fn prenex_existential(f: &Formula, sig: &Signature, r: usize) -> Result<(Vec<String>, Formula)> {
    require_fragment(f, &FragmentSpec::new(FragmentKind::ExistLocal(r), sig.clone()))?;
    let top = expand_top_atleast(f, &mut f.all_vars());
    let mut avoid = top.all_vars();
    let mut chosen = Vec::new();
    let fv = top.free_vars();
    let m = pull(&top, &mut chosen, &fv, &mut avoid);
    Ok((chosen, m))
}

fn expand_top_atleast(f: &Formula, avoid: &mut BTreeSet<String>) -> Formula {
    match f {
        AtLeast(..) => expand(f, avoid),
        Not(g) => not(expand_top_atleast(g, avoid)),
        And(gs) => And(gs.iter().map(|g| expand_top_atleast(g, avoid)).collect()),
        Or(gs) => Or(gs.iter().map(|g| expand_top_atleast(g, avoid)).collect()),
        Exists(x, g) => exists(x, expand_top_atleast(g, avoid)),
        _ => f.clone(),
    }
}

fn pull(f: &Formula, chosen: &mut Vec<String>, free: &BTreeSet<String>, avoid: &mut BTreeSet<String>) -> Formula {
    match f {
        Exists(x, g) => {
            if chosen.contains(x) || free.contains(x) {
                let x2 = fresh_var(x, avoid);
                let body = g.substitute(x, &x2);
                chosen.push(x2);
                pull(&body, chosen, free, avoid)
            } else {
                chosen.push(x.clone());
                pull(g, chosen, free, avoid)
            }
        }
        And(gs) => And(gs.iter().map(|g| pull(g, chosen, free, avoid)).collect()),
        Or(gs) => Or(gs.iter().map(|g| pull(g, chosen, free, avoid)).collect()),
        _ => f.clone(),
    }
}
