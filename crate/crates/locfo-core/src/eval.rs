//! Model checking 𝔄 ⊨_I φ, including the local modality.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::locality::{view_at, ValueIndex};
use crate::structure::{DataStructure, Interpretation, Signature};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    /// Reject relation atoms outside the signature's Γ.
    pub strict_gamma: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { strict_gamma: true }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Const(bool),
    Pred(usize, usize),
    Rel(usize, usize, usize, usize),
    Eq(usize, usize),
    Not(Box<Node>),
    And(Vec<Node>),
    Or(Vec<Node>),
    Exists(usize, Box<Node>),
    Forall(usize, Box<Node>),
    AtLeast(usize, usize, Box<Node>),
    Local {
        slot: usize,
        r: usize,
        body: Box<Node>,
        /// Slots visible in the body, with variable names for diagnostics.
        carried: Vec<(usize, String)>,
    },
}

/// A formula compiled against a signature; reusable over every structure with that signature.
#[derive(Clone, Debug)]
pub struct Compiled {
    root: Node,
    nslots: usize,
    free: Vec<(String, usize)>,
    sigma_len: usize,
    d: usize,
}

struct Compiler<'a> {
    sig: &'a Signature,
    opts: EvalOptions,
    scope: Vec<(String, usize)>,
    nslots: usize,
}

impl Compiler<'_> {
    fn lookup(&self, x: &str) -> Result<usize> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == x)
            .map(|(_, s)| *s)
            .ok_or_else(|| Error::UnboundVariable(x.to_string()))
    }

    fn bind(&mut self, x: &str) -> usize {
        let s = self.nslots;
        self.nslots += 1;
        self.scope.push((x.to_string(), s));
        s
    }

    fn field(&self, i: usize, x: &str) -> Result<()> {
        if i == 0 || i > self.sig.d() {
            return Err(Error::Typing(format!(
                "relation index {i} at `{x}` exceeds d={}",
                self.sig.d()
            )));
        }
        Ok(())
    }

    /// Returns the node and the set of outer slots it reads.
    fn compile(&mut self, f: &Formula) -> Result<(Node, BTreeSet<usize>)> {
        Ok(match f {
            Formula::Const(b) => (Node::Const(*b), BTreeSet::new()),
            Formula::Pred(p, x) => {
                let pi = self
                    .sig
                    .pred_index(p)
                    .ok_or_else(|| Error::Typing(format!("unknown predicate `{p}`")))?;
                let s = self.lookup(x)?;
                (Node::Pred(pi, s), [s].into())
            }
            Formula::Rel(i, j, x, y) => {
                self.field(*i, x)?;
                self.field(*j, y)?;
                if self.opts.strict_gamma && !self.sig.admits(*i, *j) {
                    return Err(Error::GammaViolation { i: *i, j: *j });
                }
                let (sx, sy) = (self.lookup(x)?, self.lookup(y)?);
                (Node::Rel(*i, *j, sx, sy), [sx, sy].into())
            }
            Formula::Eq(x, y) => {
                let (sx, sy) = (self.lookup(x)?, self.lookup(y)?);
                (Node::Eq(sx, sy), [sx, sy].into())
            }
            Formula::Not(g) => {
                let (n, fs) = self.compile(g)?;
                (Node::Not(Box::new(n)), fs)
            }
            Formula::And(gs) | Formula::Or(gs) => {
                let mut nodes = Vec::with_capacity(gs.len());
                let mut fs = BTreeSet::new();
                for g in gs {
                    let (n, f2) = self.compile(g)?;
                    nodes.push(n);
                    fs.extend(f2);
                }
                if matches!(f, Formula::And(_)) {
                    (Node::And(nodes), fs)
                } else {
                    (Node::Or(nodes), fs)
                }
            }
            Formula::Exists(x, g) | Formula::Forall(x, g) | Formula::AtLeast(_, x, g) => {
                let s = self.bind(x);
                let (n, mut fs) = self.compile(g)?;
                self.scope.pop();
                fs.remove(&s);
                let b = Box::new(n);
                let node = match f {
                    Formula::Exists(..) => Node::Exists(s, b),
                    Formula::Forall(..) => Node::Forall(s, b),
                    Formula::AtLeast(k, ..) => {
                        if *k == 0 {
                            return Err(Error::Typing("atleast[0]".into()));
                        }
                        Node::AtLeast(*k, s, b)
                    }
                    _ => unreachable!(),
                };
                (node, fs)
            }
            Formula::Local(x, r, g) => {
                if self.sig.d() == 0 {
                    return Err(Error::Typing("local modality over a 0-data signature".into()));
                }
                let s = self.lookup(x)?;
                let (n, mut fs) = self.compile(g)?;
                fs.insert(s);
                let carried = fs
                    .iter()
                    .map(|slot| {
                        let name = self
                            .scope
                            .iter()
                            .rev()
                            .find(|(_, t)| t == slot)
                            .map(|(n, _)| n.clone())
                            .unwrap_or_default();
                        (*slot, name)
                    })
                    .collect();
                (Node::Local { slot: s, r: *r, body: Box::new(n), carried }, fs)
            }
        })
    }
}

impl Compiled {
    pub fn new(f: &Formula, sig: &Signature, opts: EvalOptions) -> Result<Self> {
        let mut c = Compiler { sig, opts, scope: Vec::new(), nslots: 0 };
        let mut free = Vec::new();
        for x in f.free_vars() {
            let s = c.bind(&x);
            free.push((x, s));
        }
        let (root, _) = c.compile(f)?;
        Ok(Compiled { root, nslots: c.nslots, free, sigma_len: sig.sigma().len(), d: sig.d() })
    }

    /// Free variables in slot order.
    pub fn free_vars(&self) -> impl Iterator<Item = &str> {
        self.free.iter().map(|(n, _)| n.as_str())
    }

    fn check_shape(&self, a: &DataStructure) -> Result<()> {
        if a.signature().sigma().len() != self.sigma_len || a.d() != self.d {
            return Err(Error::Argument("structure signature differs from the compiled one".into()));
        }
        Ok(())
    }

    /// Evaluates with free variables bound to positions, in `free_vars` order.
    pub fn eval_positions(&self, a: &DataStructure, assignment: &[usize]) -> Result<bool> {
        self.check_shape(a)?;
        if assignment.len() != self.free.len() {
            return Err(Error::Argument("assignment length differs from free variable count".into()));
        }
        let mut env = vec![0; self.nslots.max(1)];
        for ((_, s), e) in self.free.iter().zip(assignment) {
            if *e >= a.len() {
                return Err(Error::Structural(format!("position {e} outside universe")));
            }
            env[*s] = *e;
        }
        let mut st = State { ctxs: vec![Ctx::new(Src::Borrowed(a))] };
        ev(&self.root, &mut st, 0, &mut env)
    }

    pub fn eval(&self, a: &DataStructure, interp: &Interpretation) -> Result<bool> {
        let mut pos = Vec::with_capacity(self.free.len());
        for (x, _) in &self.free {
            let id = interp.get(x).ok_or_else(|| Error::UnboundVariable(x.clone()))?;
            pos.push(a.require(id)?);
        }
        self.eval_positions(a, &pos)
    }

    pub fn models(&self, a: &DataStructure) -> Result<bool> {
        if !self.free.is_empty() {
            return Err(Error::Argument("models() needs a sentence".into()));
        }
        self.eval_positions(a, &[])
    }
}

enum Src<'a> {
    Borrowed(&'a DataStructure),
    Owned(DataStructure),
}

struct Ctx<'a> {
    src: Src<'a>,
    idx: Option<ValueIndex>,
    views: BTreeMap<(usize, usize), usize>,
    /// Parent position → position in this view (root context: unused).
    map: Vec<Option<usize>>,
}

impl<'a> Ctx<'a> {
    fn new(src: Src<'a>) -> Self {
        Ctx { src, idx: None, views: BTreeMap::new(), map: Vec::new() }
    }

    #[inline]
    fn s(&self) -> &DataStructure {
        match &self.src {
            Src::Borrowed(s) => s,
            Src::Owned(s) => s,
        }
    }
}

struct State<'a> {
    ctxs: Vec<Ctx<'a>>,
}

impl State<'_> {
    fn view(&mut self, c: usize, e: usize, r: usize) -> usize {
        if let Some(v) = self.ctxs[c].views.get(&(e, r)) {
            return *v;
        }
        if self.ctxs[c].idx.is_none() {
            let idx = ValueIndex::new(self.ctxs[c].s());
            self.ctxs[c].idx = Some(idx);
        }
        let parent = &self.ctxs[c];
        let (s, map, _) = view_at(parent.s(), parent.idx.as_ref().unwrap(), e, r);
        let id = self.ctxs.len();
        let mut child = Ctx::new(Src::Owned(s));
        child.map = map;
        self.ctxs.push(child);
        self.ctxs[c].views.insert((e, r), id);
        id
    }
}

fn ev(n: &Node, st: &mut State, c: usize, env: &mut Vec<usize>) -> Result<bool> {
    Ok(match n {
        Node::Const(b) => *b,
        Node::Pred(p, s) => st.ctxs[c].s().has_label(env[*s], *p),
        Node::Rel(i, j, x, y) => st.ctxs[c].s().rel(*i, *j, env[*x], env[*y]),
        Node::Eq(x, y) => env[*x] == env[*y],
        Node::Not(g) => !ev(g, st, c, env)?,
        Node::And(gs) => {
            for g in gs {
                if !ev(g, st, c, env)? {
                    return Ok(false);
                }
            }
            true
        }
        Node::Or(gs) => {
            for g in gs {
                if ev(g, st, c, env)? {
                    return Ok(true);
                }
            }
            false
        }
        Node::Exists(s, g) => {
            let n = st.ctxs[c].s().len();
            for e in 0..n {
                env[*s] = e;
                if ev(g, st, c, env)? {
                    return Ok(true);
                }
            }
            false
        }
        Node::Forall(s, g) => {
            let n = st.ctxs[c].s().len();
            for e in 0..n {
                env[*s] = e;
                if !ev(g, st, c, env)? {
                    return Ok(false);
                }
            }
            true
        }
        Node::AtLeast(k, s, g) => {
            let n = st.ctxs[c].s().len();
            let mut count = 0;
            for e in 0..n {
                if n - e + count < *k {
                    return Ok(false);
                }
                env[*s] = e;
                if ev(g, st, c, env)? {
                    count += 1;
                    if count >= *k {
                        return Ok(true);
                    }
                }
            }
            false
        }
        Node::Local { slot, r, body, carried } => {
            let v = st.view(c, env[*slot], *r);
            let mut inner = env.clone();
            for (s, name) in carried {
                match st.ctxs[v].map[env[*s]] {
                    Some(p) => inner[*s] = p,
                    None => return Err(Error::UnboundInView(name.clone())),
                }
            }
            ev(body, st, v, &mut inner)?
        }
    })
}

/// 𝔄 ⊨_I φ with strict Γ checking.
pub fn eval(a: &DataStructure, interp: &Interpretation, f: &Formula) -> Result<bool> {
    eval_with(a, interp, f, EvalOptions::default())
}

pub fn eval_with(a: &DataStructure, interp: &Interpretation, f: &Formula, opts: EvalOptions) -> Result<bool> {
    Compiled::new(f, a.signature(), opts)?.eval(a, interp)
}

/// 𝔄 ⊨ φ for a sentence φ.
pub fn models(a: &DataStructure, f: &Formula) -> Result<bool> {
    models_with(a, f, EvalOptions::default())
}

pub fn models_with(a: &DataStructure, f: &Formula, opts: EvalOptions) -> Result<bool> {
    if !f.is_sentence() {
        return Err(Error::Argument("models() needs a sentence".into()));
    }
    Compiled::new(f, a.signature(), opts)?.models(a)
}

/// {(a,b) : 𝔄 ⊨ φ[x↦a, y↦b]}.
pub fn query_pairs(a: &DataStructure, f: &Formula, x: &str, y: &str) -> Result<BTreeSet<(String, String)>> {
    let fv = f.free_vars();
    if let Some(extra) = fv.iter().find(|v| *v != x && *v != y) {
        return Err(Error::Argument(format!("extra free variable `{extra}`")));
    }
    let c = Compiled::new(f, a.signature(), EvalOptions::default())?;
    let mut out = BTreeSet::new();
    for ea in 0..a.len() {
        for eb in 0..a.len() {
            let mut interp = Interpretation::new();
            interp.insert(x.to_string(), a.id(ea).to_string());
            interp.insert(y.to_string(), a.id(eb).to_string());
            if c.eval(a, &interp)? {
                out.insert((a.id(ea).to_string(), a.id(eb).to_string()));
            }
        }
    }
    Ok(out)
}
