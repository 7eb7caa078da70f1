//! Reductions for the existential local fragments.
//!
//! Radius 2 with two data values goes to 1-data logic over Σ ∪ Ω_n: every element keeps
//! the labels `U<p|i|j>` recording `a_p ~i:j b` and at most one value not shared with an
//! anchor. Radius 1 with any number of values goes to monadic logic: only the labels remain.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::{self, Compiled, EvalOptions};
use crate::formula::{self as fm, fresh_var, prenex_existential, Formula};
use crate::structure::{DataStructure, Interpretation, Signature, Value};

/// `U<p|i|j>`: the element's j-th value equals the i-th value of anchor p.
pub fn u_name(p: usize, i: usize, j: usize) -> String {
    format!("U<{p}|{i}|{j}>")
}

/// Ω_n for d fields, ordered by (p, i, j).
pub fn omega(n: usize, d: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n * d * d);
    for p in 1..=n {
        for i in 1..=d {
            for j in 1..=d {
                out.push(u_name(p, i, j));
            }
        }
    }
    out
}

fn is_omega_name(s: &str) -> bool {
    s.starts_with("U<")
}

/// Anchors ā and the number of data fields the Ω labels range over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractionContext {
    pub anchors: Vec<String>,
    pub d: usize,
}

impl AbstractionContext {
    pub fn new<S: AsRef<str>>(anchors: &[S], d: usize) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::Argument("abstraction needs at least one anchor".into()));
        }
        if d == 0 {
            return Err(Error::Argument("abstraction needs d >= 1".into()));
        }
        Ok(AbstractionContext { anchors: anchors.iter().map(|a| a.as_ref().to_string()).collect(), d })
    }

    pub fn n(&self) -> usize {
        self.anchors.len()
    }

    pub fn omega(&self) -> Vec<String> {
        omega(self.n(), self.d)
    }

    /// Σ ∪ Ω_n with `out_d` fields and Γ = Γ_{out_d}.
    pub fn target_signature(&self, sigma: &[String], out_d: usize) -> Result<Signature> {
        let om = self.omega();
        if let Some(p) = sigma.iter().find(|p| om.contains(p)) {
            return Err(Error::Argument(format!("predicate `{p}` clashes with an abstraction label")));
        }
        let all: Vec<String> = sigma.iter().cloned().chain(om).collect();
        Signature::full(all, out_d)
    }

    fn positions(&self, a: &DataStructure) -> Result<Vec<usize>> {
        self.anchors.iter().map(|id| a.require(id)).collect()
    }
}

/// Copies Σ labels and adds the Ω labels; returns the signature and label matrix.
fn abstract_labels(a: &DataStructure, ctx: &AbstractionContext, out_d: usize) -> Result<(Signature, Vec<bool>)> {
    let pos = ctx.positions(a)?;
    let sig = ctx.target_signature(a.signature().sigma(), out_d)?;
    let s = a.signature().sigma().len();
    let d = ctx.d;
    let mut labels = Vec::with_capacity(a.len() * sig.sigma().len());
    for b in 0..a.len() {
        labels.extend_from_slice(&a.label_row(b)[..s]);
        for &ap in &pos {
            for i in 1..=d {
                for j in 1..=d {
                    labels.push(a.rel(i, j, ap, b));
                }
            }
        }
    }
    Ok((sig, labels))
}

/// ⟦A⟧_ā: same universe, Ω labels, and one value per element.
///
/// The value is the element's unique value outside Vals(ā) when exactly one of its two values
/// lies in Vals(ā); otherwise it is fresh, numbered from max(A)+1 in element order.
pub fn abstract2(a: &DataStructure, anchors: &[&str]) -> Result<DataStructure> {
    if a.d() != 2 {
        return Err(Error::Argument(format!("abstract2 needs d = 2, got {}", a.d())));
    }
    let ctx = AbstractionContext::new(anchors, 2)?;
    let pos = ctx.positions(a)?;
    let (sig, labels) = abstract_labels(a, &ctx, 1)?;
    let anchor_vals: BTreeSet<Value> = pos.iter().flat_map(|&p| a.values_of(p).iter().copied()).collect();
    let mut next = a.max_value().map_or(1, |m| m + 1);
    let values = (0..a.len())
        .map(|b| {
            let (v1, v2) = (a.value(b, 1), a.value(b, 2));
            match (anchor_vals.contains(&v1), anchor_vals.contains(&v2)) {
                (true, false) => v2,
                (false, true) => v1,
                _ => {
                    next += 1;
                    next - 1
                }
            }
        })
        .collect();
    DataStructure::from_parts(sig, a.ids().to_vec(), labels, values)
}

/// ⟦A⟧'_ā: a 0-data structure keeping Σ and the Ω labels over d fields.
pub fn abstract1(a: &DataStructure, anchors: &[&str]) -> Result<DataStructure> {
    let ctx = AbstractionContext::new(anchors, a.d())?;
    let (sig, labels) = abstract_labels(a, &ctx, 0)?;
    DataStructure::from_parts(sig, a.ids().to_vec(), labels, Vec::new())
}

/// The helper formulas of both translations, for anchors 1..=n over d fields.
struct Balls {
    n: usize,
    d: usize,
}

impl Balls {
    fn u(&self, p: usize, i: usize, j: usize, y: &str) -> Formula {
        fm::pred(&u_name(p, i, j), y)
    }

    /// φ^j_{B1,p}(y).
    fn b1(&self, p: usize, j: usize, y: &str) -> Formula {
        fm::or((1..=self.d).map(|i| self.u(p, i, j, y)).collect())
    }

    /// φ_{B2,p}(y) for d = 2, φ_{B1,p}(y) in general: some field is in the radius-1 ball.
    fn any(&self, p: usize, y: &str) -> Formula {
        fm::or((1..=self.d).map(|j| self.b1(p, j, y)).collect())
    }

    /// φ^j_{B2∖B1,p}(y).
    fn b2_only(&self, p: usize, j: usize, y: &str) -> Formula {
        fm::and2(self.any(p, y), fm::not(self.b1(p, j, y)))
    }

    fn share(&self, p: usize, j: usize, k: usize, y: &str, z: &str) -> Formula {
        fm::or((1..=self.d).map(|i| fm::and2(self.u(p, i, j, y), self.u(p, i, k, z))).collect())
    }

    fn r1(&self, p: usize, j: usize, k: usize, y: &str, z: &str) -> Formula {
        fm::and(vec![self.b1(p, j, y), self.b1(p, k, z), self.share(p, j, k, y, z)])
    }

    fn r2(&self, p: usize, j: usize, k: usize, y: &str, z: &str) -> Formula {
        let via_anchor = (1..=self.n).map(|q| self.share(q, j, k, y, z));
        let same = core::iter::once(fm::rel(1, 1, y, z)).chain(via_anchor).collect();
        fm::and(vec![self.b2_only(p, j, y), self.b2_only(p, k, z), fm::or(same)])
    }

    fn r_far(&self, p: usize, j: usize, k: usize, y: &str, z: &str) -> Formula {
        if j != k {
            return fm::ff();
        }
        fm::and(vec![fm::not(self.b1(p, j, y)), fm::not(self.b1(p, k, z)), fm::eq(y, z)])
    }
}

struct Translator<'a> {
    vars: &'a [String],
    radius: usize,
    balls: Balls,
}

impl Translator<'_> {
    fn top(&self, f: &Formula) -> Result<Formula> {
        Ok(match f {
            Formula::Const(_) | Formula::Eq(..) => f.clone(),
            Formula::Not(g) => fm::not(self.top(g)?),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| self.top(g)).collect::<Result<_>>()?),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| self.top(g)).collect::<Result<_>>()?),
            Formula::Local(x, r, body) => {
                if *r != self.radius {
                    return Err(Error::Fragment(format!("local modality at `{x}` has radius {r}, expected {}", self.radius)));
                }
                let p = self
                    .vars
                    .iter()
                    .position(|v| v == x)
                    .ok_or_else(|| Error::Fragment(format!("local modality centred at unknown variable `{x}`")))?;
                self.inner(p + 1, body)?
            }
            Formula::Pred(..) | Formula::Rel(..) => {
                return Err(Error::Fragment("atom outside a local modality".into()));
            }
            Formula::Exists(x, _) | Formula::Forall(x, _) | Formula::AtLeast(_, x, _) => {
                return Err(Error::Fragment(format!("quantifier on `{x}` in a quantifier-free matrix")));
            }
        })
    }

    fn inner(&self, p: usize, f: &Formula) -> Result<Formula> {
        let b = &self.balls;
        Ok(match f {
            Formula::Const(_) | Formula::Pred(..) | Formula::Eq(..) => f.clone(),
            Formula::Rel(j, k, y, z) => {
                let second = if self.radius == 2 { b.r2(p, *j, *k, y, z) } else { b.r_far(p, *j, *k, y, z) };
                fm::or2(b.r1(p, *j, *k, y, z), second)
            }
            Formula::Not(g) => fm::not(self.inner(p, g)?),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| self.inner(p, g)).collect::<Result<_>>()?),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| self.inner(p, g)).collect::<Result<_>>()?),
            Formula::Exists(x, g) => fm::exists(x, fm::and2(b.any(p, x), self.inner(p, g)?)),
            Formula::Forall(x, g) => fm::forall(x, fm::implies(b.any(p, x), self.inner(p, g)?)),
            Formula::AtLeast(k, x, g) => fm::atleast(*k, x, fm::and2(b.any(p, x), self.inner(p, g)?)),
            Formula::Local(x, _, _) => return Err(Error::Fragment(format!("nested local modality at `{x}`"))),
        })
    }
}

/// ⟦φ_qf⟧ for a QF_LOCAL(2) matrix over d = 2; `vars[p-1]` is x_p.
pub fn translate2(phi_qf: &Formula, vars: &[String]) -> Result<Formula> {
    Translator { vars, radius: 2, balls: Balls { n: vars.len(), d: 2 } }.top(phi_qf)
}

/// ⟦φ_qf⟧' for a QF_LOCAL(1) matrix over d fields.
pub fn translate1(phi_qf: &Formula, vars: &[String], d: usize) -> Result<Formula> {
    if d == 0 {
        return Err(Error::Argument("translate1 needs d >= 1".into()));
    }
    Translator { vars, radius: 1, balls: Balls { n: vars.len(), d } }.top(phi_qf)
}

fn two_bound(vars: &[String]) -> (String, String) {
    let mut avoid: BTreeSet<String> = vars.iter().cloned().collect();
    let y = fresh_var("y", &mut avoid);
    let z = fresh_var("z", &mut avoid);
    (y, z)
}

fn tran(n: usize, d: usize, y: &str, z: &str) -> Formula {
    let u = |p, i, j, v: &str| fm::pred(&u_name(p, i, j), v);
    let mut parts = Vec::new();
    for p in 1..=n {
        for q in 1..=n {
            for i in 1..=d {
                for j in 1..=d {
                    for k in 1..=d {
                        for l in 1..=d {
                            let lhs = fm::and(vec![u(p, i, j, y), u(p, i, l, z), u(q, k, j, y)]);
                            parts.push(fm::implies(lhs, u(q, k, l, z)));
                        }
                    }
                }
            }
        }
    }
    fm::forall(y, fm::forall(z, fm::and(parts)))
}

fn refl(vars: &[String], d: usize) -> Formula {
    let mut parts = Vec::new();
    for (p, x) in vars.iter().enumerate() {
        for i in 1..=d {
            parts.push(fm::pred(&u_name(p + 1, i, i), x));
        }
    }
    fm::and(parts)
}

fn uniq(n: usize, y: &str, z: &str) -> Formula {
    let labelled = |j| fm::or((1..=n).flat_map(|p| (1..=2).map(move |i| (p, i))).map(|(p, i)| fm::pred(&u_name(p, i, j), y)).collect());
    let unlabelled: Vec<Formula> = omega(n, 2).iter().map(|u| fm::not(fm::pred(u, y))).collect();
    let guard = fm::or2(fm::and2(labelled(1), labelled(2)), fm::and(unlabelled));
    fm::forall(y, fm::implies(guard, fm::forall(z, fm::implies(fm::rel(1, 1, y, z), fm::eq(y, z)))))
}

/// φ_wf(x̄) = φ_tran ∧ φ_refl(x̄) ∧ φ_uniq over Σ ∪ Ω_n, d = 1.
pub fn wf_formula2(vars: &[String]) -> Formula {
    let (y, z) = two_bound(vars);
    fm::and(vec![tran(vars.len(), 2, &y, &z), refl(vars, 2), uniq(vars.len(), &y, &z)])
}

/// ψ_wf(x̄) = ψ_tran ∧ ψ_refl(x̄) over Σ ∪ Ω_n, d fields.
pub fn wf_formula1(vars: &[String], d: usize) -> Formula {
    let (y, z) = two_bound(vars);
    fm::and2(tran(vars.len(), d, &y, &z), refl(vars, d))
}

fn anchor_vars(n: usize) -> Vec<String> {
    (1..=n).map(|p| format!("x{p}")).collect()
}

fn anchor_interp(vars: &[String], anchors: &[&str]) -> Interpretation {
    vars.iter().cloned().zip(anchors.iter().map(|a| a.to_string())).collect()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        self.0[x] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// g: (p, i) ↦ value, with g(p,i) = g(q,j) iff a_q ∈ U<p|i|j>. Values start at `base`.
fn anchor_values(b: &DataStructure, pos: &[usize], d: usize, base: Value) -> Result<Vec<Value>> {
    let n = pos.len();
    let slot = |p: usize, i: usize| (p - 1) * d + (i - 1);
    let mut uf = UnionFind((0..n * d).collect());
    let has = |e: usize, p, i, j| b.has_label_named(e, &u_name(p, i, j));
    for p in 1..=n {
        for q in 1..=n {
            for i in 1..=d {
                for j in 1..=d {
                    if has(pos[q - 1], p, i, j) {
                        uf.union(slot(p, i), slot(q, j));
                    }
                }
            }
        }
    }
    let mut class_val = BTreeMap::new();
    let mut g = Vec::with_capacity(n * d);
    for s in 0..n * d {
        let root = uf.find(s);
        let next = base + class_val.len() as Value;
        g.push(*class_val.entry(root).or_insert(next));
    }
    for p in 1..=n {
        for q in 1..=n {
            for i in 1..=d {
                for j in 1..=d {
                    if has(pos[q - 1], p, i, j) != (g[slot(p, i)] == g[slot(q, j)]) {
                        return Err(Error::Contract(format!("anchor labels are not transitive at {}", u_name(p, i, j))));
                    }
                }
            }
        }
    }
    Ok(g)
}

/// The g value shared by all Ω labels of field j of element e, if any.
fn labelled_value(b: &DataStructure, e: usize, n: usize, d: usize, j: usize, g: &[Value]) -> Result<Option<Value>> {
    let mut found = None;
    for p in 1..=n {
        for i in 1..=d {
            if b.has_label_named(e, &u_name(p, i, j)) {
                let v = g[(p - 1) * d + (i - 1)];
                if found.is_some_and(|w| w != v) {
                    return Err(Error::Contract(format!("element `{}` has conflicting labels on field {j}", b.id(e))));
                }
                found = Some(v);
            }
        }
    }
    Ok(found)
}

fn strip_omega(b: &DataStructure, d: usize) -> Result<Signature> {
    let sigma: Vec<String> = b.signature().sigma().iter().filter(|p| !is_omega_name(p)).cloned().collect();
    Signature::full(sigma, d)
}

fn check_labels(b: &DataStructure, back: &DataStructure) -> Result<()> {
    for e in 0..b.len() {
        for name in b.signature().sigma() {
            if b.has_label_named(e, name) != back.has_label_named(e, name) {
                return Err(Error::Contract(format!("label `{name}` of `{}` not reproduced", b.id(e))));
            }
        }
    }
    Ok(())
}

/// A 2-data structure A with ⟦A⟧_ā equal to 𝔅 up to renaming of values.
pub fn concretize2(b: &DataStructure, anchors: &[&str]) -> Result<DataStructure> {
    if b.d() != 1 {
        return Err(Error::Argument("concretize2 needs a 1-data structure".into()));
    }
    let ctx = AbstractionContext::new(anchors, 2)?;
    let n = ctx.n();
    let pos = ctx.positions(b)?;
    let vars = anchor_vars(n);
    let wf = wf_formula2(&vars);
    let opts = EvalOptions { strict_gamma: false };
    if !eval::eval_with(b, &anchor_interp(&vars, anchors), &wf, opts)? {
        return Err(Error::Contract("structure does not satisfy the well-formedness formula".into()));
    }
    let f_max = b.max_value().unwrap_or(0);
    let g = anchor_values(b, &pos, 2, f_max + 1)?;
    let d_out = g.iter().copied().max().unwrap_or(0).max(f_max) + 1;
    let mut values = Vec::with_capacity(2 * b.len());
    for e in 0..b.len() {
        let got = [labelled_value(b, e, n, 2, 1, &g)?, labelled_value(b, e, n, 2, 2, &g)?];
        for j in 0..2 {
            values.push(match (got[j], got[1 - j]) {
                (Some(v), _) => v,
                (None, Some(_)) => b.value(e, 1),
                (None, None) => d_out,
            });
        }
    }
    let sig = strip_omega(b, 2)?;
    let labels = (0..b.len()).flat_map(|e| sig.sigma().iter().map(move |p| b.has_label_named(e, p))).collect();
    let a = DataStructure::from_parts(sig, b.ids().to_vec(), labels, values)?;
    let back = abstract2(&a, anchors)?;
    check_labels(b, &back)?;
    for e in 0..b.len() {
        for c in 0..b.len() {
            if (b.value(e, 1) == b.value(c, 1)) != (back.value(e, 1) == back.value(c, 1)) {
                return Err(Error::Contract(format!("value pattern of `{}` and `{}` not reproduced", b.id(e), b.id(c))));
            }
        }
    }
    Ok(a)
}

/// A d-data structure A with ⟦A⟧'_ā = 𝔅; unlabelled fields get pairwise distinct values.
pub fn concretize1(b: &DataStructure, anchors: &[&str], d: usize) -> Result<DataStructure> {
    let ctx = AbstractionContext::new(anchors, d)?;
    let n = ctx.n();
    let pos = ctx.positions(b)?;
    let vars = anchor_vars(n);
    let wf = wf_formula1(&vars, d);
    let opts = EvalOptions { strict_gamma: false };
    if !eval::eval_with(b, &anchor_interp(&vars, anchors), &wf, opts)? {
        return Err(Error::Contract("structure does not satisfy the well-formedness formula".into()));
    }
    let g = anchor_values(b, &pos, d, 1)?;
    let mut next = g.iter().copied().max().unwrap_or(0) + 1;
    let mut values = Vec::with_capacity(d * b.len());
    for e in 0..b.len() {
        for j in 1..=d {
            values.push(match labelled_value(b, e, n, d, j, &g)? {
                Some(v) => v,
                None => {
                    next += 1;
                    next - 1
                }
            });
        }
    }
    let sig = strip_omega(b, d)?;
    let labels = (0..b.len()).flat_map(|e| sig.sigma().iter().map(move |p| b.has_label_named(e, p))).collect();
    let a = DataStructure::from_parts(sig, b.ids().to_vec(), labels, values)?;
    check_labels(b, &abstract1(&a, anchors)?)?;
    Ok(a)
}

/// ∃x̄.(⟦φ_qf⟧ ∧ φ_wf) together with what is needed to move models across.
#[derive(Clone, Debug)]
pub struct ExistReduction {
    pub psi: Formula,
    /// ⟦φ_qf⟧ ∧ φ_wf with free variables `vars`.
    pub matrix: Formula,
    pub vars: Vec<String>,
    pub source: Signature,
    pub signature: Signature,
    pub radius: usize,
}

impl ExistReduction {
    pub fn abstract_model(&self, a: &DataStructure, anchors: &[&str]) -> Result<DataStructure> {
        let out = if self.radius == 2 { abstract2(a, anchors)? } else { abstract1(a, anchors)? };
        out.with_signature(self.signature.clone())
    }

    pub fn concretize_model(&self, b: &DataStructure, anchors: &[&str]) -> Result<DataStructure> {
        let out = if self.radius == 2 { concretize2(b, anchors)? } else { concretize1(b, anchors, self.source.d())? };
        out.with_gamma(self.source.gamma().iter().copied())
    }

    /// Anchors ā with 𝔅 ⊨ matrix(ā), by enumeration of tuples.
    pub fn find_anchors(&self, b: &DataStructure) -> Result<Option<Vec<String>>> {
        let c = Compiled::new(&self.matrix, b.signature(), EvalOptions { strict_gamma: false })?;
        let order: Vec<String> = c.free_vars().map(String::from).collect();
        let n = self.vars.len();
        let mut tuple = vec![0usize; n];
        loop {
            let assignment: Vec<usize> = order.iter().map(|v| tuple[self.vars.iter().position(|w| w == v).unwrap()]).collect();
            if c.eval_positions(b, &assignment)? {
                return Ok(Some(tuple.iter().map(|&e| b.id(e).to_string()).collect()));
            }
            let mut k = 0;
            loop {
                if k == n {
                    return Ok(None);
                }
                tuple[k] += 1;
                if tuple[k] < b.len() {
                    break;
                }
                tuple[k] = 0;
                k += 1;
            }
        }
    }

    /// Pulls a model of ψ back to a model of φ of the same size.
    pub fn pull_back(&self, b: &DataStructure) -> Result<Option<DataStructure>> {
        let Some(anchors) = self.find_anchors(b)? else { return Ok(None) };
        let refs: Vec<&str> = anchors.iter().map(String::as_str).collect();
        self.concretize_model(b, &refs).map(Some)
    }
}

fn reduce(phi: &Formula, sig: &Signature, radius: usize) -> Result<ExistReduction> {
    if !phi.is_sentence() {
        return Err(Error::Argument("existential reduction needs a sentence".into()));
    }
    let (vars, qf) = prenex_existential(phi, sig, radius)?;
    let d = sig.d();
    let (t, wf, out_d) = if radius == 2 {
        (translate2(&qf, &vars)?, wf_formula2(&vars), 1)
    } else {
        (translate1(&qf, &vars, d)?, wf_formula1(&vars, d), 0)
    };
    let om = omega(vars.len(), d);
    if let Some(p) = sig.sigma().iter().find(|p| om.contains(p)) {
        return Err(Error::Argument(format!("predicate `{p}` clashes with an abstraction label")));
    }
    let signature = Signature::full(sig.sigma().iter().cloned().chain(om), out_d)?;
    let matrix = fm::and2(t, wf);
    let psi = vars.iter().rev().fold(matrix.clone(), |acc, x| fm::exists(x, acc));
    Ok(ExistReduction { psi, matrix, vars, source: sig.clone(), signature, radius })
}

/// EXIST_LOCAL(2) over d = 2 to 1-data logic over Σ ∪ Ω_n with Γ = {(1,1)}.
pub fn reduce_exist2(phi: &Formula, sig: &Signature) -> Result<ExistReduction> {
    if sig.d() != 2 {
        return Err(Error::Argument(format!("reduce_exist2 needs d = 2, got {}", sig.d())));
    }
    reduce(phi, sig, 2)
}

/// EXIST_LOCAL(1) over any d ≥ 1 to monadic logic over Σ ∪ Ω_n.
pub fn reduce_exist1(phi: &Formula, sig: &Signature) -> Result<ExistReduction> {
    if sig.d() == 0 {
        return Err(Error::Argument("reduce_exist1 needs d >= 1".into()));
    }
    reduce(phi, sig, 1)
}
