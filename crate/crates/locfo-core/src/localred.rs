//! Reduction of radius-1 local formulas over d = 2 and Γ = {(1,1),(2,2),(1,2)}
//! to two-variable logic over Γ_df.
//!
//! The stages are: counting constraints replacing the local modality, diagonal
//! elements replacing the diagonal relation, and the Λ labels that let two
//! variables count intersections.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval;
use crate::formula::{self as fm, require_fragment, Formula, FragmentKind, FragmentSpec};
use crate::normalform::{threshold_nf, Qf};
use crate::structure::{gamma_df, gamma_diag, DataStructure, Field, GammaSet, Signature, Value};

pub const EQ: &str = "Eq";
pub const ED: &str = "Ed";

/// Γ = {(1,1),(2,2),(2,1)}, handled by swapping the two fields.
pub fn gamma_diag_mirror() -> GammaSet {
    [(1, 1), (2, 2), (2, 1)].into_iter().collect()
}

/// Names produced by the reductions: `Eq`, `Ed`, `Ge` and anything with a `<...>` tag.
pub fn is_generated_name(p: &str) -> bool {
    p == EQ || p == ED || p == "Ge" || p.contains('<')
}

/// The user predicates of a signature, i.e. everything that is not a generated name.
pub fn base_sigma(sig: &Signature) -> Vec<String> {
    sig.sigma().iter().filter(|p| !is_generated_name(p)).cloned().collect()
}

fn pair_tag(r: &GammaSet) -> String {
    let parts: Vec<String> = r.iter().map(|(i, j)| format!("{i}{j}")).collect();
    parts.join(",")
}

/// ⟦U, R, ≥m⟧.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountingConstraint {
    pub u: BTreeSet<String>,
    pub r: GammaSet,
    pub m: usize,
}

impl CountingConstraint {
    pub fn new(u: BTreeSet<String>, r: GammaSet, m: usize) -> Result<Self> {
        if r.is_empty() || !r.is_subset(&gamma_diag()) {
            return Err(Error::Argument("R must be a nonempty subset of {11,22,12}".into()));
        }
        if m == 0 {
            return Err(Error::Argument("counting constraint needs m >= 1".into()));
        }
        Ok(CountingConstraint { u, r, m })
    }

    /// `CC<U|R|geM>` with U and R sorted, e.g. `CC<P|11,12|ge2>`.
    pub fn name(&self) -> String {
        let u: Vec<&str> = self.u.iter().map(String::as_str).collect();
        format!("CC<{}|{}|ge{}>", u.join(","), pair_tag(&self.r), self.m)
    }

    pub fn parse(name: &str) -> Option<Self> {
        let inner = name.strip_prefix("CC<")?.strip_suffix('>')?;
        let mut parts = inner.split('|');
        let (u, r, m) = (parts.next()?, parts.next()?, parts.next()?);
        if parts.next().is_some() {
            return None;
        }
        let u: BTreeSet<String> =
            if u.is_empty() { BTreeSet::new() } else { u.split(',').map(String::from).collect() };
        let mut rs = GammaSet::new();
        for t in r.split(',') {
            let b = t.as_bytes();
            if b.len() != 2 {
                return None;
            }
            rs.insert(((b[0] as char).to_digit(10)? as usize, (b[1] as char).to_digit(10)? as usize));
        }
        let m = m.strip_prefix("ge")?.parse().ok()?;
        CountingConstraint::new(u, rs, m).ok()
    }
}

/// The seven nonempty subsets of {11,22,12}, smallest first.
pub fn nonempty_r_sets() -> Vec<GammaSet> {
    let g: Vec<(usize, usize)> = gamma_diag().into_iter().collect();
    let mut out: Vec<GammaSet> = (1u32..8)
        .map(|mask| (0..3).filter(|b| mask & (1 << b) != 0).map(|b| g[b]).collect())
        .collect();
    out.sort_by_key(|r: &GammaSet| (r.len(), r.iter().copied().collect::<Vec<_>>()));
    out
}

fn subsets(sigma: &[String]) -> Vec<BTreeSet<String>> {
    (0u64..1 << sigma.len())
        .map(|mask| sigma.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, s)| s.clone()).collect())
        .collect()
}

/// C_M over Σ, in (U, R, m) order.
pub fn cc_family(sigma: &[String], m: usize) -> Vec<CountingConstraint> {
    let mut out = Vec::new();
    for u in subsets(sigma) {
        for r in nonempty_r_sets() {
            for k in 1..=m {
                out.push(CountingConstraint { u: u.clone(), r: r.clone(), m: k });
            }
        }
    }
    out
}

/// Names of Λ_M.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LambdaLabels {
    pub m: usize,
}

impl LambdaLabels {
    pub fn gamma(i: usize) -> String {
        format!("Gam<{i}>")
    }

    /// α^j_i: i counts inside an intersection, j numbers intersections.
    pub fn alpha(i: usize, j: usize) -> String {
        format!("Alp<{i}|{j}>")
    }

    pub fn beta(i: usize, j: usize) -> String {
        format!("Bet<{i}|{j}>")
    }

    pub fn gammas(&self) -> Vec<String> {
        (1..=self.m).map(Self::gamma).collect()
    }

    pub fn alphas(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 1..=self.m {
            for j in 1..=self.m + 2 {
                out.push(Self::alpha(i, j));
            }
        }
        out
    }

    pub fn betas(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 1..=self.m {
            for j in 1..=self.m + 1 {
                out.push(Self::beta(i, j));
            }
        }
        out
    }

    pub fn all(&self) -> Vec<String> {
        let mut out = self.gammas();
        out.extend(self.alphas());
        out.extend(self.betas());
        out
    }
}

fn sigma_mask(a: &DataStructure, sigma: &[String]) -> Result<Vec<usize>> {
    sigma
        .iter()
        .map(|s| {
            a.signature()
                .pred_index(s)
                .ok_or_else(|| Error::Argument(format!("predicate `{s}` missing from the structure")))
        })
        .collect()
}

fn label_set(a: &DataStructure, e: usize, sigma: &[String], idx: &[usize]) -> BTreeSet<String> {
    idx.iter().zip(sigma).filter(|(p, _)| a.has_label(e, **p)).map(|(_, s)| s.clone()).collect()
}

fn rel_set(a: &DataStructure, e: usize, b: usize, gamma: &GammaSet) -> GammaSet {
    gamma.iter().copied().filter(|&(i, j)| a.rel(i, j, e, b)).collect()
}

fn env_positions(a: &DataStructure, e: usize, sigma: &[String], u: &BTreeSet<String>, r: &GammaSet, gamma: &GammaSet) -> Result<Vec<usize>> {
    let idx = sigma_mask(a, sigma)?;
    Ok((0..a.len())
        .filter(|&b| label_set(a, b, sigma, &idx) == *u && rel_set(a, e, b, gamma) == *r)
        .collect())
}

fn check_env_args(a: &DataStructure, u: &BTreeSet<String>, r: &GammaSet, gamma: &GammaSet, sigma: &[String]) -> Result<()> {
    if a.d() != 2 {
        return Err(Error::Argument("environments need d = 2".into()));
    }
    if !r.is_subset(gamma) {
        return Err(Error::Argument("R is not a subset of the given gamma".into()));
    }
    if let Some(p) = u.iter().find(|p| !sigma.contains(p)) {
        return Err(Error::Argument(format!("`{p}` is not a base predicate")));
    }
    Ok(())
}

/// Env(a, U, R) relative to `gamma`: elements whose Σ-labels are exactly U and whose
/// relation set to `a` within `gamma` is exactly R. Σ is the base part of the signature.
pub fn env(a: &DataStructure, id: &str, u: &BTreeSet<String>, r: &GammaSet, gamma: &GammaSet) -> Result<BTreeSet<String>> {
    let e = a.require(id)?;
    let sigma = base_sigma(a.signature());
    check_env_args(a, u, r, gamma, &sigma)?;
    Ok(env_positions(a, e, &sigma, u, r, gamma)?.into_iter().map(|b| a.id(b).to_string()).collect())
}

fn marker(i: usize, j: usize) -> String {
    format!("Mk<{i}{j}>")
}

fn marker_pair(p: &str) -> Option<(usize, usize)> {
    let t = p.strip_prefix("Mk<")?.strip_suffix('>')?.as_bytes();
    if t.len() != 2 {
        return None;
    }
    Some(((t[0] - b'0') as usize, (t[1] - b'0') as usize))
}

/// Renames every bound occurrence of `x` inside `f`.
fn rename_bound(f: &Formula, x: &str, avoid: &mut BTreeSet<String>) -> Formula {
    use Formula::*;
    match f {
        Const(_) | Pred(..) | Rel(..) | Eq(..) => f.clone(),
        Not(g) => fm::not(rename_bound(g, x, avoid)),
        And(gs) => And(gs.iter().map(|g| rename_bound(g, x, avoid)).collect()),
        Or(gs) => Or(gs.iter().map(|g| rename_bound(g, x, avoid)).collect()),
        Local(v, r, g) => fm::local(v, *r, rename_bound(g, x, avoid)),
        Exists(v, g) | Forall(v, g) | AtLeast(_, v, g) => {
            let body = rename_bound(g, x, avoid);
            let (v2, body) = if v == x {
                let v2 = fm::fresh_var(v, avoid);
                let b = body.substitute(v, &v2);
                (v2, b)
            } else {
                (v.clone(), body)
            };
            match f {
                Exists(..) => fm::exists(&v2, body),
                Forall(..) => fm::forall(&v2, body),
                AtLeast(k, _, _) => fm::atleast(*k, &v2, body),
                _ => unreachable!(),
            }
        }
    }
}

/// Rewrites every relation atom into markers anchored at `x`.
fn anchor_relations(f: &Formula, x: &str, gamma: &GammaSet) -> Formula {
    use Formula::*;
    match f {
        Const(_) | Pred(..) | Eq(..) => f.clone(),
        Rel(i, j, y, z) => {
            if y == x {
                return fm::pred(&marker(*i, *j), z);
            }
            let mut disj = Vec::new();
            if i == j {
                disj.push(fm::eq(y, z));
            }
            for k in 1..=2 {
                if gamma.contains(&(k, *i)) && gamma.contains(&(k, *j)) {
                    disj.push(fm::and2(fm::pred(&marker(k, *i), y), fm::pred(&marker(k, *j), z)));
                }
            }
            fm::or(disj)
        }
        Not(g) => fm::not(anchor_relations(g, x, gamma)),
        And(gs) => And(gs.iter().map(|g| anchor_relations(g, x, gamma)).collect()),
        Or(gs) => Or(gs.iter().map(|g| anchor_relations(g, x, gamma)).collect()),
        Exists(v, g) => fm::exists(v, anchor_relations(g, x, gamma)),
        Forall(v, g) => fm::forall(v, anchor_relations(g, x, gamma)),
        AtLeast(k, v, g) => fm::atleast(*k, v, anchor_relations(g, x, gamma)),
        Local(..) => f.clone(),
    }
}

/// Output of the first translation step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step1 {
    /// Largest threshold produced by the normal form, 0 if none.
    pub m: usize,
    pub chi: Formula,
    /// Σ ∪ {Eq} ∪ C_M with d = 2 and Γ = ∅.
    pub signature: Signature,
}

fn check_pipeline_input(phi: &Formula, sig: &Signature) -> Result<Vec<String>> {
    if sig.d() != 2 || *sig.gamma() != gamma_diag() {
        return Err(Error::Argument("the radius-1 pipeline needs d = 2 and gamma = {11,22,12}".into()));
    }
    let sigma = base_sigma(sig);
    if sigma.len() != sig.sigma().len() {
        return Err(Error::Argument("input signature uses reserved predicate names".into()));
    }
    require_fragment(phi, &FragmentSpec::new(FragmentKind::Local(1), sig.clone()))?;
    if !phi.is_sentence() {
        return Err(Error::Argument("the pipeline expects a sentence".into()));
    }
    Ok(sigma)
}

fn translate_local(x: &str, psi: &Formula, sigma: &[String], m: &mut usize) -> Result<Formula> {
    let gamma = gamma_diag();
    let mut avoid = psi.all_vars();
    avoid.insert(x.to_string());
    let psi = rename_bound(psi, x, &mut avoid);
    let psi2 = anchor_relations(&psi, x, &gamma);
    let markers: Vec<String> = gamma.iter().map(|&(i, j)| marker(i, j)).collect();
    let mut vocab = sigma.to_vec();
    vocab.extend(markers.iter().cloned());
    let nf = threshold_nf(&psi2, &vocab, Some(x))?;
    *m = (*m).max(nf.m);
    let body = nf.body.map_leaves(&mut |leaf| match leaf {
        Qf::Pred(p, v) => match marker_pair(p) {
            Some((1, 2)) => Qf::Pred(EQ.to_string(), v.clone()),
            Some(_) => Qf::Const(true),
            None => leaf.clone(),
        },
        Qf::Thr(t) => {
            let r: GammaSet = t.u.iter().filter_map(|p| marker_pair(p)).collect();
            if r.is_empty() {
                Qf::Const(false)
            } else {
                let u: BTreeSet<String> = t.u.iter().filter(|p| marker_pair(p).is_none()).cloned().collect();
                Qf::Pred(CountingConstraint { u, r, m: t.k }.name(), x.to_string())
            }
        }
        other => other.clone(),
    });
    Ok(body.to_formula(sigma, "y"))
}

fn replace_locals(f: &Formula, sigma: &[String], m: &mut usize) -> Result<Formula> {
    use Formula::*;
    Ok(match f {
        Local(x, _, psi) => translate_local(x, psi, sigma, m)?,
        Const(_) | Pred(..) | Rel(..) | Eq(..) => f.clone(),
        Not(g) => fm::not(replace_locals(g, sigma, m)?),
        And(gs) => And(gs.iter().map(|g| replace_locals(g, sigma, m)).collect::<Result<_>>()?),
        Or(gs) => Or(gs.iter().map(|g| replace_locals(g, sigma, m)).collect::<Result<_>>()?),
        Exists(v, g) => fm::exists(v, replace_locals(g, sigma, m)?),
        Forall(v, g) => fm::forall(v, replace_locals(g, sigma, m)?),
        AtLeast(k, v, g) => fm::atleast(*k, v, replace_locals(g, sigma, m)?),
    })
}

fn step1_signature(sigma: &[String], m: usize) -> Result<Signature> {
    let mut names = sigma.to_vec();
    names.push(EQ.to_string());
    names.extend(cc_family(sigma, m).iter().map(CountingConstraint::name));
    Signature::new(names, 2, GammaSet::new())
}

/// Replaces each radius-1 local subformula by a Boolean combination of Σ-literals,
/// `Eq(x)` and counting constraints at x.
pub fn step1_translate(phi: &Formula, sig: &Signature) -> Result<Step1> {
    let sigma = check_pipeline_input(phi, sig)?;
    let mut m = 0;
    let chi = replace_locals(phi, &sigma, &mut m)?;
    let signature = step1_signature(&sigma, m)?;
    Ok(Step1 { m, chi, signature })
}

/// Adds `Eq` and the counting constraints C_M that the structure satisfies.
pub fn well_typed_expand(a: &DataStructure, m: usize) -> Result<DataStructure> {
    if a.d() != 2 {
        return Err(Error::Argument("well_typed_expand needs d = 2".into()));
    }
    let sigma = base_sigma(a.signature());
    if sigma.len() != a.signature().sigma().len() {
        return Err(Error::Argument("input signature uses reserved predicate names".into()));
    }
    let idx = sigma_mask(a, &sigma)?;
    let gamma = gamma_diag();
    let family = cc_family(&sigma, m);
    let mut names = sigma.clone();
    names.push(EQ.to_string());
    names.extend(family.iter().map(CountingConstraint::name));
    let sig = Signature::new(names, 2, a.signature().gamma().iter().copied())?;
    let width = sig.sigma().len();
    let types: Vec<BTreeSet<String>> = (0..a.len()).map(|b| label_set(a, b, &sigma, &idx)).collect();
    let mut labels = vec![false; a.len() * width];
    for e in 0..a.len() {
        let row = &mut labels[e * width..(e + 1) * width];
        for (p, _) in sigma.iter().enumerate() {
            row[p] = a.has_label(e, idx[p]);
        }
        row[sigma.len()] = a.value(e, 1) == a.value(e, 2);
        let mut counts: BTreeMap<(&BTreeSet<String>, GammaSet), usize> = BTreeMap::new();
        for b in 0..a.len() {
            let r = rel_set(a, e, b, &gamma);
            if !r.is_empty() {
                *counts.entry((&types[b], r)).or_insert(0) += 1;
            }
        }
        for (q, cc) in family.iter().enumerate() {
            let n = counts.get(&(&cc.u, cc.r.clone())).copied().unwrap_or(0);
            row[sigma.len() + 1 + q] = n >= cc.m;
        }
    }
    DataStructure::from_parts(sig, a.ids().to_vec(), labels, a.raw_values().to_vec())
}

pub fn is_eq_respecting(a: &DataStructure) -> Result<bool> {
    let p = a
        .signature()
        .pred_index(EQ)
        .ok_or_else(|| Error::Argument("signature lacks `Eq`".into()))?;
    if a.d() != 2 {
        return Err(Error::Argument("eq-respecting needs d = 2".into()));
    }
    Ok((0..a.len()).all(|e| a.has_label(e, p) == (a.value(e, 1) == a.value(e, 2))))
}

/// The counting constraints in the signature, checked to form a full family C_M; returns M.
fn cc_order(a: &DataStructure, sigma: &[String]) -> Result<usize> {
    let present: BTreeSet<CountingConstraint> =
        a.signature().sigma().iter().filter_map(|p| CountingConstraint::parse(p)).collect();
    let m = present.iter().map(|c| c.m).max().unwrap_or(0);
    let family: BTreeSet<CountingConstraint> = cc_family(sigma, m).into_iter().collect();
    if present != family {
        return Err(Error::Argument(format!("counting constraints do not form the full family for M = {m}")));
    }
    Ok(m)
}

pub fn is_cc_respecting(a: &DataStructure) -> Result<bool> {
    if a.d() != 2 {
        return Err(Error::Argument("cc-respecting needs d = 2".into()));
    }
    let sigma = base_sigma(a.signature());
    let m = cc_order(a, &sigma)?;
    let expected = well_typed_expand(&a.project(a.signature().with_sigma(sigma.clone())?)?, m)?;
    for cc in cc_family(&sigma, m) {
        let name = cc.name();
        let p = a.signature().pred_index(&name).unwrap();
        let q = expected.signature().pred_index(&name).unwrap();
        if (0..a.len()).any(|e| a.has_label(e, p) != expected.has_label(e, q)) {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn is_well_typed(a: &DataStructure) -> Result<bool> {
    let eq = is_eq_respecting(a)?;
    let cc = is_cc_respecting(a)?;
    Ok(eq && cc)
}

fn fresh_id(base: String, taken: &BTreeSet<String>) -> String {
    let mut id = base;
    while taken.contains(&id) {
        id.push('\'');
    }
    id
}

/// A + ed: one diagonal element (v, v) labeled {Eq, Ed} per value v; Γ becomes Γ_df.
pub fn add_diagonal(a: &DataStructure) -> Result<DataStructure> {
    if a.d() != 2 {
        return Err(Error::Argument("add_diagonal needs d = 2".into()));
    }
    let sig = a.signature();
    let eq = sig.pred_index(EQ).ok_or_else(|| Error::Argument("signature lacks `Eq`".into()))?;
    if sig.pred_index(ED).is_some() {
        return Err(Error::Argument("`Ed` is already part of the signature".into()));
    }
    let out_sig = sig.extended([ED])?.with_gamma(gamma_df())?;
    let width = out_sig.sigma().len();
    let mut ids = a.ids().to_vec();
    let mut taken: BTreeSet<String> = ids.iter().cloned().collect();
    let mut labels = Vec::with_capacity((a.len() + 4) * width);
    for e in 0..a.len() {
        labels.extend_from_slice(a.label_row(e));
        labels.push(false);
    }
    let mut values = a.raw_values().to_vec();
    for v in a.all_vals() {
        let id = fresh_id(format!("ed{v}"), &taken);
        taken.insert(id.clone());
        ids.push(id);
        let mut row = vec![false; width];
        row[eq] = true;
        row[width - 1] = true;
        labels.extend(row);
        values.extend([v, v]);
    }
    DataStructure::from_parts(out_sig, ids, labels, values)
}

/// ξ_ed over Θ (Θ excludes Eq and Ed).
pub fn xi_ed(theta: &[String]) -> Formula {
    let mut parts = Vec::new();
    for i in 1..=2 {
        parts.push(fm::forall("x", fm::exists("y", fm::and2(fm::pred(ED, "y"), fm::rel(i, i, "x", "y")))));
        parts.push(fm::forall(
            "x",
            fm::forall(
                "y",
                fm::implies(
                    fm::and(vec![fm::pred(ED, "x"), fm::pred(ED, "y"), fm::rel(i, i, "x", "y")]),
                    fm::eq("x", "y"),
                ),
            ),
        ));
    }
    parts.push(fm::forall(
        "x",
        fm::iff(
            fm::pred(EQ, "x"),
            fm::exists(
                "y",
                fm::and(vec![fm::pred(ED, "y"), fm::rel(1, 1, "x", "y"), fm::rel(2, 2, "x", "y")]),
            ),
        ),
    ));
    let none: Vec<Formula> = theta.iter().map(|s| fm::not(fm::pred(s, "x"))).collect();
    parts.push(fm::forall("x", fm::implies(fm::pred(ED, "x"), fm::and(none))));
    fm::and(parts)
}

fn theta_of(sig: &Signature) -> Vec<String> {
    sig.sigma().iter().filter(|p| *p != EQ && *p != ED).cloned().collect()
}

/// From 𝔅 ⊨ φ ∧ ξ_ed with φ over Γ_df, an eq-respecting A with A + ed ⊨ φ.
pub fn diagonalize_model(b: &DataStructure, phi: &Formula) -> Result<DataStructure> {
    let sig = b.signature();
    if b.d() != 2 {
        return Err(Error::Contract("diagonalize_model needs d = 2".into()));
    }
    let ed = sig.pred_index(ED).ok_or_else(|| Error::Contract("signature lacks `Ed`".into()))?;
    if sig.pred_index(EQ).is_none() {
        return Err(Error::Contract("signature lacks `Eq`".into()));
    }
    if !phi.relations().is_subset(&gamma_df()) {
        return Err(Error::Contract("formula uses relations outside gamma_df".into()));
    }
    let b = b.with_gamma(gamma_df())?;
    if !eval::models(&b, &xi_ed(&theta_of(sig)))? {
        return Err(Error::Contract("structure does not satisfy xi_ed".into()));
    }
    if !eval::models(&b, phi)? {
        return Err(Error::Contract("structure does not satisfy the formula".into()));
    }
    let mut pi: BTreeMap<Value, Value> = BTreeMap::new();
    for e in (0..b.len()).filter(|&e| b.has_label(e, ed)) {
        pi.insert(b.value(e, 1), b.value(e, 2));
    }
    // Values never seen in field 1 are parked on unused targets to keep π injective.
    let used: BTreeSet<Value> = pi.values().copied().collect();
    let mut spare = (0..).filter(|v| !used.contains(v));
    for v in b.all_vals() {
        pi.entry(v).or_insert_with(|| spare.next().unwrap());
    }
    let permuted = b.permute_values(&pi, Field::Index(1))?;
    let keep: Vec<usize> = (0..b.len()).filter(|&e| !b.has_label(e, ed)).collect();
    if keep.is_empty() {
        return Err(Error::Contract("structure has no non-diagonal element".into()));
    }
    let rest: Vec<String> = sig.sigma().iter().filter(|p| *p != ED).cloned().collect();
    let a = permuted.restrict(&keep)?.with_signature(sig.with_sigma(rest)?)?;
    if !eval::models(&add_diagonal(&a)?, phi)? {
        return Err(Error::Contract("diagonal elements without a matching value changed the formula".into()));
    }
    Ok(a)
}

fn strip(f: &Formula) -> Result<Formula> {
    use Formula::*;
    let guarded = |v: &str, body: &Formula| matches!(body, And(gs) if gs.first() == Some(&fm::not(fm::pred(ED, v))));
    Ok(match f {
        Const(_) | Pred(..) | Eq(..) => f.clone(),
        Rel(..) => return Err(Error::Fragment("relation atom in a formula with gamma = {}".into())),
        Local(..) => return Err(Error::Fragment("local modality in a formula with gamma = {}".into())),
        Not(g) => fm::not(strip(g)?),
        And(gs) => And(gs.iter().map(strip).collect::<Result<_>>()?),
        Or(gs) => Or(gs.iter().map(strip).collect::<Result<_>>()?),
        Exists(v, g) => {
            let body = strip(g)?;
            if guarded(v, &body) {
                fm::exists(v, body)
            } else {
                fm::exists(v, fm::and2(fm::not(fm::pred(ED, v)), body))
            }
        }
        AtLeast(k, v, g) => {
            let body = strip(g)?;
            if guarded(v, &body) {
                fm::atleast(*k, v, body)
            } else {
                fm::atleast(*k, v, fm::and2(fm::not(fm::pred(ED, v)), body))
            }
        }
        Forall(v, g) => {
            let body = strip(g)?;
            if matches!(&body, Or(gs) if gs.first() == Some(&fm::pred(ED, v))) {
                fm::forall(v, body)
            } else {
                fm::forall(v, fm::or2(fm::pred(ED, v), body))
            }
        }
    })
}

/// ⟦φ⟧₊ed: every quantifier skips the diagonal elements.
pub fn strip_ed_translate(phi: &Formula) -> Result<Formula> {
    strip(phi)
}

/// Env_{A,Σ,Γ}(a, U, R) computed on 𝔅 = A + ed with Γ_df relations only.
pub fn env_no_diag(b: &DataStructure, id: &str, u: &BTreeSet<String>, r: &GammaSet) -> Result<BTreeSet<String>> {
    let e = b.require(id)?;
    let sig = b.signature();
    let ed = sig.pred_index(ED).ok_or_else(|| Error::Argument("signature lacks `Ed`".into()))?;
    let eq = sig.pred_index(EQ).ok_or_else(|| Error::Argument("signature lacks `Eq`".into()))?;
    if b.has_label(e, ed) {
        return Err(Error::Argument(format!("`{id}` is a diagonal element")));
    }
    let sigma = base_sigma(sig);
    check_env_args(b, u, r, &gamma_diag(), &sigma)?;
    let df = gamma_df();
    let env_df = |from: usize, rr: &[(usize, usize)]| -> Result<Vec<usize>> {
        env_positions(b, from, &sigma, u, &rr.iter().copied().collect(), &df)
    };
    let a_eq = b.has_label(e, eq);
    let rs: Vec<(usize, usize)> = r.iter().copied().collect();
    let out: Vec<usize> = match (rs.as_slice(), a_eq) {
        ([(1, 1), (1, 2), (2, 2)], true) => env_df(e, &[(1, 1), (2, 2)])?.into_iter().filter(|&c| !b.has_label(c, ed)).collect(),
        ([(1, 1), (2, 2)], false) => env_df(e, &[(1, 1), (2, 2)])?,
        ([(1, 1), (1, 2)], false) => env_df(e, &[(1, 1)])?
            .into_iter()
            .filter(|&c| b.has_label(c, eq) && !b.has_label(c, ed))
            .collect(),
        ([(1, 2), (2, 2)], true) => env_df(e, &[(2, 2)])?,
        ([(2, 2)], false) => env_df(e, &[(2, 2)])?.into_iter().filter(|&c| !b.has_label(c, ed)).collect(),
        ([(1, 1)], _) => env_df(e, &[(1, 1)])?.into_iter().filter(|&c| !b.has_label(c, eq)).collect(),
        ([(1, 2)], false) => {
            let d = (0..b.len())
                .find(|&c| b.has_label(c, ed) && b.rel(1, 1, c, e))
                .ok_or_else(|| Error::Contract("no diagonal element shares the first value".into()))?;
            env_df(d, &[(2, 2)])?
        }
        _ => Vec::new(),
    };
    Ok(out.into_iter().map(|c| b.id(c).to_string()).collect())
}

/// Adds Λ_M to a well-typed structure: γ ranks inside intersections, α and β number the
/// intersections sharing a first (second) value and Σ-type.
pub fn lambda_label(a: &DataStructure) -> Result<DataStructure> {
    let sig = a.signature();
    if sig.pred_index(ED).is_some() {
        return Err(Error::Argument("lambda_label expects a structure without `Ed`".into()));
    }
    if !is_well_typed(a)? {
        return Err(Error::Contract("structure is not well-typed".into()));
    }
    let sigma = base_sigma(sig);
    let m = cc_order(a, &sigma)?;
    if m == 0 {
        return Err(Error::Argument("lambda_label needs M >= 1".into()));
    }
    let lam = LambdaLabels { m };
    let out_sig = sig.extended(lam.all())?;
    let idx = sigma_mask(a, &sigma)?;
    let types: Vec<BTreeSet<String>> = (0..a.len()).map(|e| label_set(a, e, &sigma, &idx)).collect();

    let mut inter: BTreeMap<(&BTreeSet<String>, Value, Value), Vec<usize>> = BTreeMap::new();
    for e in 0..a.len() {
        inter.entry((&types[e], a.value(e, 1), a.value(e, 2))).or_default().push(e);
    }
    let mut extra: Vec<Vec<String>> = vec![Vec::new(); a.len()];
    for members in inter.values() {
        for (rank, &e) in members.iter().enumerate() {
            extra[e].push(LambdaLabels::gamma((rank + 1).min(m)));
        }
    }
    for field in [1usize, 2] {
        let mut groups: BTreeMap<(&BTreeSet<String>, Value), Vec<(Value, Value, usize, &Vec<usize>)>> = BTreeMap::new();
        for ((u, v1, v2), members) in &inter {
            let key = if field == 1 { *v1 } else { *v2 };
            groups.entry((*u, key)).or_default().push((*v1, *v2, members[0], members));
        }
        for list in groups.values_mut() {
            list.sort_by(|p, q| (p.0, p.1, a.id(p.2)).cmp(&(q.0, q.1, a.id(q.2))));
            for (pos, (_, _, _, members)) in list.iter().enumerate() {
                let i = members.len().min(m);
                let name = if field == 1 {
                    LambdaLabels::alpha(i, (pos + 1).min(m + 2))
                } else {
                    LambdaLabels::beta(i, (pos + 1).min(m + 1))
                };
                for &e in members.iter() {
                    extra[e].push(name.clone());
                }
            }
        }
    }
    let width = out_sig.sigma().len();
    let mut labels = vec![false; a.len() * width];
    for e in 0..a.len() {
        let row = &mut labels[e * width..(e + 1) * width];
        row[..sig.sigma().len()].copy_from_slice(a.label_row(e));
        for name in &extra[e] {
            row[out_sig.pred_index(name).unwrap()] = true;
        }
    }
    let out = DataStructure::from_parts(out_sig, a.ids().to_vec(), labels, a.raw_values().to_vec())?;
    let check = fm::and(vec![phi_gamma(m, &sigma), phi_alpha(m, &sigma), phi_beta(m, &sigma)]);
    if !eval::models(&add_diagonal(&out)?, &check)? {
        return Err(Error::Contract("Λ labeling violates its defining formulas".into()));
    }
    Ok(out)
}

fn same(sigma: &[String]) -> Formula {
    fm::and(sigma.iter().map(|s| fm::iff(fm::pred(s, "x"), fm::pred(s, "y"))).collect())
}

fn same_int(sigma: &[String]) -> Formula {
    let mut parts = vec![fm::rel(1, 1, "x", "y"), fm::rel(2, 2, "x", "y")];
    parts.extend(sigma.iter().map(|s| fm::iff(fm::pred(s, "x"), fm::pred(s, "y"))));
    fm::and(parts)
}

fn exactly_one(names: &[String]) -> Formula {
    fm::or(
        names
            .iter()
            .map(|n| {
                let mut conj = vec![fm::pred(n, "x")];
                conj.extend(names.iter().filter(|o| *o != n).map(|o| fm::not(fm::pred(o, "x"))));
                fm::and(conj)
            })
            .collect(),
    )
}

fn wrap(nondiag: Vec<Formula>, names: &[String]) -> Formula {
    let none: Vec<Formula> = names.iter().map(|n| fm::not(fm::pred(n, "x"))).collect();
    fm::forall(
        "x",
        fm::and2(
            fm::implies(fm::not(fm::pred(ED, "x")), fm::and(nondiag)),
            fm::implies(fm::pred(ED, "x"), fm::and(none)),
        ),
    )
}

pub fn phi_gamma(m: usize, sigma: &[String]) -> Formula {
    let lam = LambdaLabels { m };
    let g = LambdaLabels::gamma;
    let p1 = exactly_one(&lam.gammas());
    let p2 = fm::and(
        (1..m)
            .map(|i| {
                fm::implies(
                    fm::pred(&g(i), "x"),
                    fm::not(fm::exists("y", fm::and(vec![fm::neq("x", "y"), same_int(sigma), fm::pred(&g(i), "y")]))),
                )
            })
            .collect(),
    );
    let p3 = fm::and(
        (2..=m)
            .map(|i| {
                fm::implies(fm::pred(&g(i), "x"), fm::exists("y", fm::and2(same_int(sigma), fm::pred(&g(i - 1), "y"))))
            })
            .collect(),
    );
    wrap(vec![p1, p2, p3], &lam.gammas())
}

/// Shared shape of φ_α and φ_β; `first` selects α (field 1, M+2 indices) or β.
fn phi_count(m: usize, sigma: &[String], first: bool) -> Formula {
    let lam = LambdaLabels { m };
    let (names, jmax, jmax4, own, other) = if first {
        (lam.alphas(), m + 2, m + 1, (1, 1), (2, 2))
    } else {
        (lam.betas(), m + 1, m, (2, 2), (1, 1))
    };
    let lab = |i: usize, j: usize| if first { LambdaLabels::alpha(i, j) } else { LambdaLabels::beta(i, j) };
    let g = LambdaLabels::gamma;
    let p1 = exactly_one(&names);
    let mut p2 = Vec::new();
    let mut p3 = Vec::new();
    let mut p4 = Vec::new();
    let mut p5 = Vec::new();
    for i in 1..=m {
        for j in 1..=jmax {
            let here = fm::pred(&lab(i, j), "x");
            p2.push(fm::implies(
                here.clone(),
                fm::forall(
                    "y",
                    fm::implies(fm::and2(fm::not(fm::pred(ED, "y")), same_int(sigma)), fm::pred(&lab(i, j), "y")),
                ),
            ));
            let has = |k: usize| fm::exists("y", fm::and2(same_int(sigma), fm::pred(&g(k), "y")));
            if i < m {
                p3.push(fm::implies(here.clone(), fm::and2(has(i), fm::not(has(i + 1)))));
            } else {
                p3.push(fm::implies(here.clone(), has(m)));
            }
            if j <= jmax4 {
                let guard = fm::and(vec![
                    fm::not(fm::pred(ED, "y")),
                    same(sigma),
                    fm::rel(own.0, own.1, "x", "y"),
                    fm::not(fm::rel(other.0, other.1, "x", "y")),
                ]);
                let none: Vec<Formula> = (1..=m).map(|k| fm::not(fm::pred(&lab(k, j), "y"))).collect();
                p4.push(fm::implies(here.clone(), fm::forall("y", fm::implies(guard, fm::and(none)))));
            }
            if j >= 2 {
                let prev: Vec<Formula> = (1..=m).map(|k| fm::pred(&lab(k, j - 1), "y")).collect();
                p5.push(fm::implies(
                    here,
                    fm::exists("y", fm::and(vec![same(sigma), fm::rel(own.0, own.1, "x", "y"), fm::or(prev)])),
                ));
            }
        }
    }
    wrap(vec![p1, fm::and(p2), fm::and(p3), fm::and(p4), fm::and(p5)], &names)
}

pub fn phi_alpha(m: usize, sigma: &[String]) -> Formula {
    phi_count(m, sigma, true)
}

pub fn phi_beta(m: usize, sigma: &[String]) -> Formula {
    phi_count(m, sigma, false)
}

/// Minimal label sets {λ^{j_1}_{i_1}, ...} with j_1 < ... < j_k and Σ i ≥ m, as (i, j) pairs.
/// `jmax` is M+2 for α and M+1 for β.
pub fn s_family(big_m: usize, jmax: usize, m: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut cur: Vec<(usize, usize)> = Vec::new();
    fn go(j: usize, big_m: usize, jmax: usize, m: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let sum: usize = cur.iter().map(|p| p.0).sum();
        if sum >= m {
            let least = cur.iter().map(|p| p.0).min().unwrap_or(0);
            if sum - least < m {
                out.push(cur.clone());
            }
            return;
        }
        for jj in j..=jmax {
            for i in 1..=big_m {
                cur.push((i, jj));
                go(jj + 1, big_m, jmax, m, cur, out);
                cur.pop();
            }
        }
    }
    go(1, big_m, jmax, m, &mut cur, &mut out);
    out
}

fn phi_u(u: &BTreeSet<String>, sigma: &[String], v: &str) -> Formula {
    fm::and(
        sigma
            .iter()
            .map(|s| if u.contains(s) { fm::pred(s, v) } else { fm::not(fm::pred(s, v)) })
            .collect(),
    )
}

/// φ_{U,R,m}(x): the counting constraint ⟦U,R,≥m⟧ at a non-diagonal x, over Γ_df.
pub fn phi_urm(cc: &CountingConstraint, big_m: usize, sigma: &[String]) -> Formula {
    let (u, m) = (&cc.u, cc.m);
    let r: Vec<(usize, usize)> = cc.r.iter().copied().collect();
    let eqx = fm::pred(EQ, "x");
    let g = LambdaLabels::gamma(m);
    let sum_over = |jmax: usize, lab: fn(usize, usize) -> String, body: &dyn Fn(Formula) -> Formula| {
        fm::or(
            s_family(big_m, jmax, m)
                .into_iter()
                .map(|set| fm::and(set.into_iter().map(|(i, j)| body(fm::pred(&lab(i, j), "y"))).collect()))
                .collect(),
        )
    };
    match r.as_slice() {
        [(1, 1), (1, 2), (2, 2)] | [(1, 1), (2, 2)] => {
            let guard = if r.len() == 3 { eqx } else { fm::not(eqx) };
            fm::and2(
                guard,
                fm::exists(
                    "y",
                    fm::and(vec![phi_u(u, sigma, "y"), fm::rel(1, 1, "x", "y"), fm::rel(2, 2, "x", "y"), fm::pred(&g, "y")]),
                ),
            )
        }
        [(1, 1), (1, 2)] => fm::and2(
            fm::not(eqx),
            fm::exists(
                "y",
                fm::and(vec![phi_u(u, sigma, "y"), fm::pred(EQ, "y"), fm::rel(1, 1, "x", "y"), fm::pred(&g, "y")]),
            ),
        ),
        [(1, 2), (2, 2)] => fm::and2(
            eqx,
            sum_over(big_m + 1, LambdaLabels::beta, &|lab| {
                fm::exists(
                    "y",
                    fm::and(vec![phi_u(u, sigma, "y"), fm::not(fm::pred(EQ, "y")), lab, fm::rel(2, 2, "x", "y")]),
                )
            }),
        ),
        [(2, 2)] => fm::and2(
            fm::not(eqx),
            sum_over(big_m + 1, LambdaLabels::beta, &|lab| {
                fm::exists(
                    "y",
                    fm::and(vec![phi_u(u, sigma, "y"), lab, fm::not(fm::rel(1, 1, "x", "y")), fm::rel(2, 2, "x", "y")]),
                )
            }),
        ),
        [(1, 1)] => sum_over(big_m + 2, LambdaLabels::alpha, &|lab| {
            fm::exists(
                "y",
                fm::and(vec![
                    phi_u(u, sigma, "y"),
                    lab,
                    fm::not(fm::pred(EQ, "y")),
                    fm::rel(1, 1, "x", "y"),
                    fm::not(fm::rel(2, 2, "x", "y")),
                ]),
            )
        }),
        [(1, 2)] => {
            let inner = fm::or(
                s_family(big_m, big_m + 1, m)
                    .into_iter()
                    .map(|set| {
                        fm::and(
                            set.into_iter()
                                .map(|(i, j)| {
                                    fm::exists(
                                        "x",
                                        fm::and(vec![
                                            phi_u(u, sigma, "x"),
                                            fm::pred(&LambdaLabels::beta(i, j), "x"),
                                            fm::not(fm::rel(1, 1, "y", "x")),
                                            fm::rel(2, 2, "y", "x"),
                                        ]),
                                    )
                                })
                                .collect(),
                        )
                    })
                    .collect(),
            );
            fm::and2(
                fm::not(eqx),
                fm::exists("y", fm::and(vec![fm::pred(ED, "y"), fm::rel(1, 1, "x", "y"), inner])),
            )
        }
        _ => unreachable!("R is a nonempty subset of gamma"),
    }
}

pub fn phi_cc(m: usize, sigma: &[String]) -> Formula {
    let conj: Vec<Formula> = cc_family(sigma, m)
        .iter()
        .map(|cc| fm::iff(fm::pred(&cc.name(), "x"), phi_urm(cc, m, sigma)))
        .collect();
    fm::forall("x", fm::implies(fm::not(fm::pred(ED, "x")), fm::and(conj)))
}

/// Swaps the two fields of every relation atom.
pub fn mirror_formula(f: &Formula) -> Formula {
    use Formula::*;
    let sw = |i: usize| 3 - i;
    match f {
        Rel(i, j, x, y) => Rel(sw(*i), sw(*j), x.clone(), y.clone()),
        Const(_) | Pred(..) | Eq(..) => f.clone(),
        Not(g) => fm::not(mirror_formula(g)),
        And(gs) => And(gs.iter().map(mirror_formula).collect()),
        Or(gs) => Or(gs.iter().map(mirror_formula).collect()),
        Exists(v, g) => fm::exists(v, mirror_formula(g)),
        Forall(v, g) => fm::forall(v, mirror_formula(g)),
        AtLeast(k, v, g) => fm::atleast(*k, v, mirror_formula(g)),
        Local(v, r, g) => fm::local(v, *r, mirror_formula(g)),
    }
}

/// Swaps the two values of every element and mirrors Γ (d = 2).
pub fn mirror_structure(a: &DataStructure) -> Result<DataStructure> {
    if a.d() != 2 {
        return Err(Error::Argument("mirroring needs d = 2".into()));
    }
    let mut values = a.raw_values().to_vec();
    for pair in values.chunks_mut(2) {
        pair.swap(0, 1);
    }
    let gamma: GammaSet = a.signature().gamma().iter().map(|&(i, j)| (3 - i, 3 - j)).collect();
    let sig = a.signature().with_gamma(gamma)?;
    DataStructure::from_parts(sig, a.ids().to_vec(), a.raw_labels().to_vec(), values)
}

/// Result of the full radius-1 reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pipeline {
    /// φ̂ over All = Σ ∪ {Eq, Ed} ∪ C_M ∪ Λ_M with Γ_df.
    pub phi_hat: Formula,
    /// M used for C_M and Λ_M (at least 1).
    pub m: usize,
    pub signature: Signature,
    pub step1: Step1,
    /// The input signature.
    pub source: Signature,
    /// The input used Γ = {11,22,21} and was field-swapped first.
    pub mirrored: bool,
}

/// φ̂ = ⟦χ⟧₊ed ∧ ξ_ed ∧ φ_α ∧ φ_β ∧ φ_γ ∧ φ_cc.
pub fn full_pipeline(phi: &Formula, sig: &Signature) -> Result<Pipeline> {
    let mirrored = sig.d() == 2 && *sig.gamma() == gamma_diag_mirror();
    let (phi_in, sig_in) = if mirrored {
        (mirror_formula(phi), sig.with_gamma(gamma_diag())?)
    } else {
        (phi.clone(), sig.clone())
    };
    let step1 = step1_translate(&phi_in, &sig_in)?;
    let sigma = base_sigma(&sig_in);
    let m = step1.m.max(1);
    let lam = LambdaLabels { m };
    let mut all = sigma.clone();
    all.push(EQ.to_string());
    all.push(ED.to_string());
    all.extend(cc_family(&sigma, m).iter().map(CountingConstraint::name));
    all.extend(lam.all());
    let signature = Signature::new(all, 2, gamma_df())?;
    let phi_hat = fm::and(vec![
        strip_ed_translate(&step1.chi)?,
        xi_ed(&theta_of(&signature)),
        phi_alpha(m, &sigma),
        phi_beta(m, &sigma),
        phi_gamma(m, &sigma),
        phi_cc(m, &sigma),
    ]);
    Ok(Pipeline { phi_hat, m, signature, step1, source: sig.clone(), mirrored })
}

impl Pipeline {
    /// A model of φ̂ built from a structure over the input signature.
    pub fn lift_model(&self, a: &DataStructure) -> Result<DataStructure> {
        let a = if self.mirrored { mirror_structure(a)? } else { a.clone() };
        let a = a.with_gamma(gamma_diag())?;
        add_diagonal(&lambda_label(&well_typed_expand(&a, self.m)?)?)?.with_signature(self.signature.clone())
    }

    /// A structure over the input signature from a model of φ̂.
    pub fn project_model(&self, b: &DataStructure) -> Result<DataStructure> {
        let a = diagonalize_model(b, &self.phi_hat)?;
        let base = Signature::new(base_sigma(&self.signature), 2, gamma_diag())?;
        let a = a.project(base)?;
        let a = if self.mirrored { mirror_structure(&a)? } else { a };
        a.with_gamma(self.source.gamma().iter().copied())
    }
}
