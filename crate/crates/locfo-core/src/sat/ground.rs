//! Propositional encoding of "φ has a model with at most n elements".
//!
//! Each of the n slots has a presence bit, label bits, and one-hot value bits per field.
//! Present slots form a prefix and values follow first-occurrence order over the slots,
//! which removes most renaming symmetry. Quantifiers expand over the slots guarded by
//! presence; gates are hash-consed before Tseitin encoding.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::cdcl::{Lit, Outcome, Solver};
use crate::error::{Error, Result};
use crate::formula::{type_check, Formula};
use crate::structure::{DataStructure, Signature, Value};

/// Result of one grounded search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Grounded {
    Model(DataStructure),
    NoModel,
    /// Conflict budget exhausted.
    GaveUp,
}

struct Encoder<'a> {
    sig: &'a Signature,
    n: usize,
    solver: Solver,
    tru: Lit,
    present: Vec<Lit>,
    labels: Vec<Vec<Lit>>,
    /// value[slot][v - 1], slot = e·d + (i - 1)
    value: Vec<Vec<Lit>>,
    same: BTreeMap<(usize, usize), Lit>,
    gates: BTreeMap<Vec<Lit>, Lit>,
    memo: BTreeMap<(usize, Vec<usize>), Lit>,
    free: BTreeMap<usize, Vec<String>>,
}

impl<'a> Encoder<'a> {
    fn new(sig: &'a Signature, n: usize) -> Self {
        let mut solver = Solver::new();
        let t = solver.new_var();
        let tru = Lit::new(t, true);
        solver.add_clause(&[tru]);
        let mut enc = Encoder {
            sig,
            n,
            solver,
            tru,
            present: Vec::new(),
            labels: Vec::new(),
            value: Vec::new(),
            same: BTreeMap::new(),
            gates: BTreeMap::new(),
            memo: BTreeMap::new(),
            free: BTreeMap::new(),
        };
        enc.universe();
        enc
    }

    fn fresh(&mut self) -> Lit {
        Lit::new(self.solver.new_var(), true)
    }

    fn universe(&mut self) {
        let n = self.n;
        let d = self.sig.d();
        for _ in 0..n {
            let p = self.fresh();
            self.present.push(p);
            let row = (0..self.sig.sigma().len()).map(|_| self.fresh()).collect();
            self.labels.push(row);
        }
        self.solver.add_clause(&[self.present[0]]);
        for e in 1..n {
            self.solver.add_clause(&[!self.present[e], self.present[e - 1]]);
        }
        let slots = n * d;
        for k in 0..slots {
            let dom: Vec<Lit> = (0..=k).map(|_| self.fresh()).collect();
            self.solver.add_clause(&dom);
            for a in 0..dom.len() {
                for b in a + 1..dom.len() {
                    self.solver.add_clause(&[!dom[a], !dom[b]]);
                }
            }
            self.value.push(dom);
        }
        // A value above 1 is used only after its predecessor.
        for k in 1..slots {
            for v in 1..self.value[k].len() {
                let mut c = vec![!self.value[k][v]];
                c.extend((0..k).filter(|&k2| self.value[k2].len() > v - 1).map(|k2| self.value[k2][v - 1]));
                self.solver.add_clause(&c);
            }
        }
    }

    fn is_true(&self, l: Lit) -> bool {
        l == self.tru
    }

    fn is_false(&self, l: Lit) -> bool {
        l == !self.tru
    }

    fn and(&mut self, lits: Vec<Lit>) -> Lit {
        let mut c: Vec<Lit> = Vec::with_capacity(lits.len());
        for l in lits {
            if self.is_false(l) {
                return !self.tru;
            }
            if !self.is_true(l) {
                c.push(l);
            }
        }
        c.sort();
        c.dedup();
        if c.windows(2).any(|w| w[0] == !w[1]) {
            return !self.tru;
        }
        match c.len() {
            0 => return self.tru,
            1 => return c[0],
            _ => {}
        }
        if let Some(&g) = self.gates.get(&c) {
            return g;
        }
        let g = self.fresh();
        let mut back = vec![g];
        for &l in &c {
            self.solver.add_clause(&[!g, l]);
            back.push(!l);
        }
        self.solver.add_clause(&back);
        self.gates.insert(c, g);
        g
    }

    fn or(&mut self, lits: Vec<Lit>) -> Lit {
        let neg = lits.into_iter().map(|l| !l).collect();
        !self.and(neg)
    }

    /// At least k of `lits`, by the usual counter recurrence.
    fn at_least(&mut self, k: usize, lits: &[Lit]) -> Lit {
        if k == 0 {
            return self.tru;
        }
        // row[j] = "at least j of the prefix"
        let mut row: Vec<Lit> = vec![!self.tru; k + 1];
        row[0] = self.tru;
        for &l in lits {
            let mut next = row.clone();
            for j in 1..=k {
                let take = self.and(vec![l, row[j - 1]]);
                next[j] = self.or(vec![row[j], take]);
            }
            row = next;
        }
        row[k]
    }

    fn same_value(&mut self, a: usize, b: usize) -> Lit {
        if a == b {
            return self.tru;
        }
        let key = (a.min(b), a.max(b));
        if let Some(&l) = self.same.get(&key) {
            return l;
        }
        let t = self.fresh();
        let (da, db) = (self.value[a].clone(), self.value[b].clone());
        for (v, &xa) in da.iter().enumerate() {
            match db.get(v) {
                Some(&xb) => {
                    self.solver.add_clause(&[!xa, !xb, t]);
                    self.solver.add_clause(&[!t, !xa, xb]);
                }
                None => self.solver.add_clause(&[!t, !xa]),
            }
        }
        for &xb in db.iter().skip(da.len()) {
            self.solver.add_clause(&[!t, !xb]);
        }
        self.same.insert(key, t);
        t
    }

    fn slot(env: &[(String, usize)], x: &str) -> Result<usize> {
        env.iter()
            .rev()
            .find(|(v, _)| v == x)
            .map(|&(_, e)| e)
            .ok_or_else(|| Error::UnboundVariable(x.to_string()))
    }

    fn ground(&mut self, f: &Formula, env: &mut Vec<(String, usize)>) -> Result<Lit> {
        use Formula::*;
        let addr = f as *const Formula as usize;
        let free = match self.free.get(&addr) {
            Some(v) => v.clone(),
            None => {
                let v: Vec<String> = f.free_vars().into_iter().collect();
                self.free.insert(addr, v.clone());
                v
            }
        };
        let key = (addr, free.iter().map(|x| Self::slot(env, x)).collect::<Result<Vec<_>>>()?);
        if let Some(&l) = self.memo.get(&key) {
            return Ok(l);
        }
        let d = self.sig.d();
        let out = match f {
            Const(true) => self.tru,
            Const(false) => !self.tru,
            Pred(p, x) => {
                let k = self.sig.pred_index(p).ok_or_else(|| Error::Typing(format!("unknown predicate `{p}`")))?;
                self.labels[Self::slot(env, x)?][k]
            }
            Eq(x, y) => {
                if Self::slot(env, x)? == Self::slot(env, y)? {
                    self.tru
                } else {
                    !self.tru
                }
            }
            Rel(i, j, x, y) => {
                if *i == 0 || *j == 0 || *i > d || *j > d {
                    return Err(Error::Typing(format!("relation ~{i}:{j} outside arity {d}")));
                }
                let a = Self::slot(env, x)? * d + i - 1;
                let b = Self::slot(env, y)? * d + j - 1;
                self.same_value(a, b)
            }
            Not(g) => !self.ground(g, env)?,
            And(gs) => {
                let mut ls = Vec::with_capacity(gs.len());
                for g in gs {
                    let l = self.ground(g, env)?;
                    if self.is_false(l) {
                        break;
                    }
                    ls.push(l);
                }
                if ls.len() < gs.len() {
                    !self.tru
                } else {
                    self.and(ls)
                }
            }
            Or(gs) => {
                let mut ls = Vec::with_capacity(gs.len());
                for g in gs {
                    ls.push(self.ground(g, env)?);
                }
                self.or(ls)
            }
            Exists(x, g) | Forall(x, g) | AtLeast(_, x, g) => {
                let mut ls = Vec::with_capacity(self.n);
                for e in 0..self.n {
                    env.push((x.clone(), e));
                    let body = self.ground(g, env);
                    env.pop();
                    let body = body?;
                    let p = self.present[e];
                    ls.push(if matches!(f, Forall(..)) { self.or(vec![!p, body]) } else { self.and(vec![p, body]) });
                }
                match f {
                    Exists(..) => self.or(ls),
                    Forall(..) => self.and(ls),
                    AtLeast(k, ..) => self.at_least(*k, &ls),
                    _ => unreachable!(),
                }
            }
            Local(..) => {
                return Err(Error::Fragment("grounded search does not handle the local modality".into()));
            }
        };
        self.memo.insert(key, out);
        Ok(out)
    }

    fn decode(&self, model: &[bool]) -> Result<DataStructure> {
        let d = self.sig.d();
        let holds = |l: Lit| model[l.var()] == l.is_positive();
        let size = self.present.iter().take_while(|&&p| holds(p)).count();
        let ids: Vec<String> = (1..=size).map(|e| format!("e{e}")).collect();
        let mut labels = Vec::new();
        let mut values: Vec<Value> = Vec::new();
        for e in 0..size {
            labels.extend(self.labels[e].iter().map(|&l| holds(l)));
            for i in 0..d {
                let v = self.value[e * d + i].iter().position(|&l| holds(l)).unwrap_or(0);
                values.push(v as Value + 1);
            }
        }
        DataStructure::from_parts(self.sig.clone(), ids, labels, values)
    }
}

/// Looks for a model of the sentence `phi` with between 1 and `n` elements.
///
/// Formulas with the local modality are rejected. `budget` caps the solver's conflicts.
/// The model found is not necessarily the smallest; see `ground_search_min`.
pub fn ground_search(phi: &Formula, sig: &Signature, n: usize, budget: Option<u64>) -> Result<Grounded> {
    if n == 0 {
        return Err(Error::Argument("search size must be at least 1".into()));
    }
    if !phi.is_sentence() {
        return Err(Error::Argument("satisfiability search expects a sentence".into()));
    }
    type_check(phi, sig)?;
    let mut enc = Encoder::new(sig, n);
    let root = enc.ground(phi, &mut Vec::new())?;
    enc.solver.add_clause(&[root]);
    match enc.solver.solve(budget) {
        Outcome::Sat(model) => enc.decode(&model).map(Grounded::Model),
        Outcome::Unsat => Ok(Grounded::NoModel),
        Outcome::Unknown => Ok(Grounded::GaveUp),
    }
}

/// Like `ground_search`, but a model found is shrunk to the smallest size that has one.
pub fn ground_search_min(phi: &Formula, sig: &Signature, n: usize, budget: Option<u64>) -> Result<Grounded> {
    let first = ground_search(phi, sig, n, budget)?;
    let Grounded::Model(a) = &first else { return Ok(first) };
    for k in 1..a.len() {
        match ground_search(phi, sig, k, budget)? {
            Grounded::Model(b) => return Ok(Grounded::Model(b)),
            Grounded::NoModel => {}
            Grounded::GaveUp => break,
        }
    }
    Ok(first)
}
