//! Tiling gadgets: torus grids, the structure A_2m, the grid and domino formulas,
//! and the model transformations used by the undecidability reductions.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval;
use crate::formula::{self as fm, Formula};
use crate::structure::{gamma_df, gamma_diag, DataStructure, GammaSet, Signature, Value};
use crate::syntax::is_pred_name;

pub const UH0: &str = "UH0";
pub const UH1: &str = "UH1";
pub const UV0: &str = "UV0";
pub const UV1: &str = "UV1";
pub const GE: &str = "Ge";

pub fn sigma_grid() -> Vec<String> {
    [UH0, UH1, UV0, UV1].iter().map(|s| s.to_string()).collect()
}

pub type Pairs = BTreeSet<(usize, usize)>;

/// (A, H, V) over carrier indices, with a display name per index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiBinaryStructure {
    pub names: Vec<String>,
    pub h: Pairs,
    pub v: Pairs,
}

/// (A, H, V, W).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriBinaryStructure {
    pub base: BiBinaryStructure,
    pub w: Pairs,
}

impl BiBinaryStructure {
    pub fn new(names: Vec<String>, h: Pairs, v: Pairs) -> Result<Self> {
        let n = names.len();
        if h.iter().chain(&v).any(|&(a, b)| a >= n || b >= n) {
            return Err(Error::Structural("relation pair outside the carrier".into()));
        }
        Ok(BiBinaryStructure { names, h, v })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// (A, φ_H^A, φ_V^A) for formulas with free variables x and y.
    pub fn induced(a: &DataStructure, phi_h: &Formula, phi_v: &Formula) -> Result<Self> {
        let names = a.ids().to_vec();
        let to_idx = |pairs: BTreeSet<(String, String)>| -> Pairs {
            pairs.into_iter().map(|(x, y)| (a.index_of(&x).unwrap(), a.index_of(&y).unwrap())).collect()
        };
        let h = to_idx(eval::query_pairs(a, phi_h, "x", "y")?);
        let v = to_idx(eval::query_pairs(a, phi_v, "x", "y")?);
        Ok(BiBinaryStructure { names, h, v })
    }

    /// Pairs as name pairs, for comparisons across carriers.
    pub fn named(&self, rel: &Pairs) -> BTreeSet<(String, String)> {
        rel.iter().map(|&(a, b)| (self.names[a].clone(), self.names[b].clone())).collect()
    }

    pub fn satisfies_complete(&self) -> bool {
        self.h.iter().all(|&(x, y)| {
            self.v.iter().filter(|&&(s, _)| s == x).all(|&(_, x2)| {
                self.v.iter().filter(|&&(s, _)| s == y).all(|&(_, y2)| self.h.contains(&(x2, y2)))
            })
        })
    }

    pub fn satisfies_progress(&self) -> bool {
        (0..self.len()).all(|x| self.h.iter().any(|&(a, _)| a == x) && self.v.iter().any(|&(a, _)| a == x))
    }
}

impl TriBinaryStructure {
    /// φ'_complete, reading the second conjunct as ∀x.∀x'.∀y'.
    pub fn satisfies_complete_prime(&self) -> bool {
        let (h, v, w) = (&self.base.h, &self.base.v, &self.w);
        let first = h.iter().all(|&(x, y)| v.iter().filter(|&&(s, _)| s == y).all(|&(_, y2)| w.contains(&(x, y2))));
        let second = w.iter().all(|&(x, y2)| v.iter().filter(|&&(s, _)| s == x).all(|&(_, x2)| h.contains(&(x2, y2))));
        first && second
    }
}

/// Index of cell (i, j) of an m×m torus.
pub fn cell(m: usize, i: usize, j: usize) -> usize {
    (i % m) * m + (j % m)
}

fn cell_name(i: usize, j: usize) -> String {
    format!("g{i}_{j}")
}

fn torus_names(m: usize) -> Vec<String> {
    (0..m).flat_map(|i| (0..m).map(move |j| cell_name(i, j))).collect()
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::Argument("grid size must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Grid_m: H steps the first coordinate, V the second, both mod m.
pub fn grid(m: usize) -> Result<BiBinaryStructure> {
    check_m(m)?;
    let mut h = Pairs::new();
    let mut v = Pairs::new();
    for i in 0..m {
        for j in 0..m {
            h.insert((cell(m, i, j), cell(m, i + 1, j)));
            v.insert((cell(m, i, j), cell(m, i, j + 1)));
        }
    }
    BiBinaryStructure::new(torus_names(m), h, v)
}

/// Grid_m with W_m = {((i,j),(i+1,j+1))}.
pub fn tri_grid(m: usize) -> Result<TriBinaryStructure> {
    let base = grid(m)?;
    let w = (0..m).flat_map(|i| (0..m).map(move |j| (cell(m, i, j), cell(m, i + 1, j + 1)))).collect();
    Ok(TriBinaryStructure { base, w })
}

/// (D, H_D, V_D).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DominoSystem {
    pub dominoes: Vec<String>,
    pub h: Pairs,
    pub v: Pairs,
}

impl DominoSystem {
    /// Dominoes become unary predicates, so names must be predicate names outside Σ_grid.
    pub fn new<S: AsRef<str>>(dominoes: &[S], h: &[(S, S)], v: &[(S, S)]) -> Result<Self> {
        let dominoes: Vec<String> = dominoes.iter().map(|d| d.as_ref().to_string()).collect();
        if dominoes.is_empty() {
            return Err(Error::Argument("a domino system needs at least one domino".into()));
        }
        let mut seen = BTreeSet::new();
        for d in &dominoes {
            if !is_pred_name(d) || sigma_grid().contains(d) || d == GE {
                return Err(Error::Argument(format!("`{d}` cannot be used as a domino name")));
            }
            if !seen.insert(d.clone()) {
                return Err(Error::Argument(format!("duplicate domino `{d}`")));
            }
        }
        let index = |s: &S| {
            dominoes
                .iter()
                .position(|d| d == s.as_ref())
                .ok_or_else(|| Error::Argument(format!("unknown domino `{}`", s.as_ref())))
        };
        let pairs = |ps: &[(S, S)]| -> Result<Pairs> { ps.iter().map(|(a, b)| Ok((index(a)?, index(b)?))).collect() };
        let (h, v) = (pairs(h)?, pairs(v)?);
        Ok(DominoSystem { dominoes, h, v })
    }

    pub fn as_bibinary(&self) -> BiBinaryStructure {
        BiBinaryStructure { names: self.dominoes.clone(), h: self.h.clone(), v: self.v.clone() }
    }
}

/// A morphism src → dst by backtracking over src in index order.
pub fn find_morphism(src: &BiBinaryStructure, dst: &BiBinaryStructure) -> Option<Vec<usize>> {
    let n = src.len();
    if n == 0 {
        return Some(Vec::new());
    }
    if dst.is_empty() {
        return None;
    }
    // For each source index, the constraints against indices not after it.
    let mut back: Vec<Vec<(bool, usize, bool)>> = vec![Vec::new(); n];
    for (is_h, rel) in [(true, &src.h), (false, &src.v)] {
        for &(a, b) in rel {
            let (late, early, forward) = if a >= b { (a, b, false) } else { (b, a, true) };
            back[late].push((is_h, early, forward));
        }
    }
    let holds = |is_h: bool, x: usize, y: usize| if is_h { dst.h.contains(&(x, y)) } else { dst.v.contains(&(x, y)) };
    let mut pi = vec![0usize; n];
    let mut k = 0usize;
    let mut next = vec![0usize; n];
    loop {
        let mut placed = false;
        while next[k] < dst.len() {
            let c = next[k];
            next[k] += 1;
            pi[k] = c;
            let ok = back[k].iter().all(|&(is_h, e, forward)| {
                let pe = if e == k { c } else { pi[e] };
                if forward {
                    holds(is_h, pe, c)
                } else {
                    holds(is_h, c, pe)
                }
            });
            if ok {
                placed = true;
                break;
            }
        }
        if placed {
            if k + 1 == n {
                return Some(pi);
            }
            k += 1;
            next[k] = 0;
        } else {
            if k == 0 {
                return None;
            }
            k -= 1;
        }
    }
}

/// Smallest m ≤ m_max with a morphism Grid_m → G. `None` only means none within the bound.
pub fn is_gridlike(g: &BiBinaryStructure, m_max: usize) -> Option<(usize, Vec<usize>)> {
    (1..=m_max).find_map(|m| find_morphism(&grid(m).ok()?, g).map(|pi| (m, pi)))
}

/// A periodic tiling τ: Grid_m → 𝒟 with m ≤ m_max, as domino indices per cell.
pub fn periodic_tiling_search(system: &DominoSystem, m_max: usize) -> Option<(usize, Vec<usize>)> {
    is_gridlike(&system.as_bibinary(), m_max)
}

/// f₁(i,j) = (i/2 mod m) + m·(j/2 mod m) on ℤ_2m².
fn a2m_f1(m: usize, i: usize, j: usize) -> Value {
    let (i, j) = (i % (2 * m), j % (2 * m));
    ((i / 2) % m + m * ((j / 2) % m)) as Value
}

/// f₂(i,j) = f₁(i−1, j−1), indices mod 2m.
fn a2m_f2(m: usize, i: usize, j: usize) -> Value {
    let k = 2 * m;
    a2m_f1(m, (i + k - 1) % k, (j + k - 1) % k)
}

fn a2m_parts(m: usize, extra: &[String], mut extra_label: impl FnMut(usize, usize, usize) -> bool) -> Result<DataStructure> {
    check_m(m)?;
    let k = 2 * m;
    let sigma: Vec<String> = sigma_grid().into_iter().chain(extra.iter().cloned()).collect();
    let sig = Signature::new(sigma, 2, gamma_diag())?;
    let mut ids = Vec::with_capacity(k * k);
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for i in 0..k {
        for j in 0..k {
            ids.push(cell_name(i, j));
            labels.extend_from_slice(&[i % 2 == 0, i % 2 == 1, j % 2 == 0, j % 2 == 1]);
            for p in 0..extra.len() {
                labels.push(extra_label(i, j, p));
            }
            values.push(a2m_f1(m, i, j));
            values.push(a2m_f2(m, i, j));
        }
    }
    DataStructure::from_parts(sig, ids, labels, values)
}

/// A_2m over Σ_grid, d = 2, Γ = {(1,1),(2,2),(1,2)}. Element (i,j) has id `g{i}_{j}`.
pub fn build_a2m(m: usize) -> Result<DataStructure> {
    a2m_parts(m, &[], |_, _, _| false)
}

/// A_2m labelled by a tiling τ of period `tm`: P_d(i,j) iff τ(i mod tm, j mod tm) = d.
pub fn tiled_a2m(m: usize, system: &DominoSystem, tm: usize, tau: &[usize]) -> Result<DataStructure> {
    if tm == 0 || !(2 * m).is_multiple_of(tm) || tau.len() != tm * tm {
        return Err(Error::Argument("tiling period must divide 2m and cover the torus".into()));
    }
    a2m_parts(m, &system.dominoes, |i, j, p| tau[cell(tm, i, j)] == p)
}

fn p(name: &str, v: &str) -> Formula {
    fm::pred(name, v)
}

fn case(hx: &str, hy: &str, vx: &str, vy: &str, rel: (usize, usize), x: &str, y: &str) -> Formula {
    fm::and(vec![p(hx, x), p(hy, y), p(vx, x), p(vy, y), fm::rel(rel.0, rel.1, x, y)])
}

/// φ_H(x, y).
pub fn phi_h(x: &str, y: &str) -> Formula {
    fm::or(vec![
        case(UH0, UH1, UV0, UV0, (1, 1), x, y),
        case(UH1, UH0, UV0, UV0, (2, 2), x, y),
        case(UH0, UH1, UV1, UV1, (1, 1), x, y),
        case(UH1, UH0, UV1, UV1, (2, 2), x, y),
    ])
}

/// φ_V(x, y).
pub fn phi_v(x: &str, y: &str) -> Formula {
    fm::or(vec![
        case(UH0, UH0, UV0, UV1, (1, 1), x, y),
        case(UH1, UH1, UV0, UV1, (1, 1), x, y),
        case(UH0, UH0, UV1, UV0, (2, 2), x, y),
        case(UH1, UH1, UV1, UV0, (2, 2), x, y),
    ])
}

/// φ_W(x, y).
pub fn phi_w(x: &str, y: &str) -> Formula {
    fm::or(vec![
        case(UH0, UH1, UV0, UV1, (1, 2), x, y),
        case(UH1, UH0, UV0, UV1, (1, 2), x, y),
        case(UH0, UH1, UV1, UV0, (1, 2), x, y),
        case(UH1, UH0, UV1, UV0, (1, 2), x, y),
    ])
}

pub fn build_phi_h() -> Formula {
    phi_h("x", "y")
}

pub fn build_phi_v() -> Formula {
    phi_v("x", "y")
}

pub fn build_phi_w() -> Formula {
    phi_w("x", "y")
}

fn xor(a: Formula, b: Formula) -> Formula {
    fm::or2(fm::and2(a.clone(), fm::not(b.clone())), fm::and2(fm::not(a), b))
}

fn everywhere(r: usize, body: Formula) -> Formula {
    fm::forall("x", fm::local("x", r, body))
}

fn progress(r: usize) -> Formula {
    everywhere(r, fm::and2(fm::exists("y", phi_h("x", "y")), fm::exists("y", phi_v("x", "y"))))
}

fn parity(r: usize) -> Formula {
    everywhere(r, fm::and2(xor(p(UH0, "x"), p(UH1, "x")), xor(p(UV0, "x"), p(UV1, "x"))))
}

/// φ_grid^{3-loc} = φ_complete ∧ φ_progress ∧ parity, all under loc[3].
pub fn build_phi_grid_3loc() -> Formula {
    let lhs = fm::and(vec![phi_h("x", "y"), phi_v("x", "x1"), phi_v("y", "y1")]);
    let complete = everywhere(3, fm::forall("y", fm::forall("x1", fm::forall("y1", fm::implies(lhs, phi_h("x1", "y1"))))));
    fm::and(vec![complete, progress(3), parity(3)])
}

/// φ_grid^{2-loc}, with completeness routed through φ_W.
pub fn build_phi_grid_2loc() -> Formula {
    let c1 = fm::forall(
        "y",
        fm::forall("y1", fm::implies(fm::and2(phi_h("x", "y"), phi_v("y", "y1")), phi_w("x", "y1"))),
    );
    let c2 = fm::forall(
        "y",
        fm::forall(
            "x1",
            fm::forall("y1", fm::implies(fm::and2(phi_v("x", "x1"), phi_w("x", "y1")), phi_h("x1", "y1"))),
        ),
    );
    let complete = fm::and2(everywhere(2, c1), everywhere(2, c2));
    fm::and(vec![complete, progress(2), parity(2)])
}

fn phi_domino(system: &DominoSystem, r: usize) -> Formula {
    let ds = &system.dominoes;
    let unique = fm::or(
        ds.iter()
            .map(|d| {
                let others = ds
                    .iter()
                    .flat_map(|a| ds.iter().map(move |b| (a, b)))
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| fm::not(fm::and2(p(a, "x"), p(b, "x"))));
                fm::and(core::iter::once(p(d, "x")).chain(others).collect())
            })
            .collect(),
    );
    let compat = |rel: &Pairs, step: Formula| {
        let allowed = fm::or(rel.iter().map(|&(a, b)| fm::and2(p(&ds[a], "x"), p(&ds[b], "y"))).collect());
        everywhere(r, fm::forall("y", fm::implies(step, allowed)))
    };
    fm::and(vec![everywhere(r, unique), compat(&system.h, phi_h("x", "y")), compat(&system.v, phi_v("x", "y"))])
}

/// φ_𝒟 under loc[3].
pub fn build_phi_d(system: &DominoSystem) -> Formula {
    phi_domino(system, 3)
}

/// φ'_𝒟 under loc[2].
pub fn build_phi_d_prime(system: &DominoSystem) -> Formula {
    phi_domino(system, 2)
}

/// Signature Σ_grid ⊎ D, d = 2, with the given Γ.
pub fn domino_signature(system: &DominoSystem, gamma: GammaSet) -> Result<Signature> {
    Signature::new(sigma_grid().into_iter().chain(system.dominoes.iter().cloned()), 2, gamma)
}

/// The Γ of the radius-3 reduction, {(1,1),(2,2)}.
pub fn gamma_radius3() -> GammaSet {
    gamma_df()
}

/// A+ge: one `Ge` element per pair of values, carrying that pair.
pub fn add_ge(a: &DataStructure) -> Result<DataStructure> {
    if a.d() != 2 {
        return Err(Error::Argument("add_ge needs d = 2".into()));
    }
    if a.signature().pred_index(GE).is_some() {
        return Err(Error::Argument(format!("predicate `{GE}` already in the signature")));
    }
    let sig = a.signature().extended([GE])?;
    let vals: Vec<Value> = a.all_vals().into_iter().collect();
    let s = sig.sigma().len();
    let mut ids = a.ids().to_vec();
    let mut labels = Vec::with_capacity((a.len() + vals.len() * vals.len()) * s);
    let mut values = a.raw_values().to_vec();
    for e in 0..a.len() {
        labels.extend_from_slice(a.label_row(e));
        labels.push(false);
    }
    let mut taken: BTreeSet<String> = ids.iter().cloned().collect();
    for &v1 in &vals {
        for &v2 in &vals {
            let mut id = format!("ge{v1}_{v2}");
            while taken.contains(&id) {
                id.push('\'');
            }
            taken.insert(id.clone());
            ids.push(id);
            labels.extend(core::iter::repeat_n(false, s - 1));
            labels.push(true);
            values.extend_from_slice(&[v1, v2]);
        }
    }
    DataStructure::from_parts(sig, ids, labels, values)
}

/// A∖ge: drops `Ge` elements and the `Ge` predicate.
pub fn strip_ge(a: &DataStructure) -> Result<DataStructure> {
    let Some(g) = a.signature().pred_index(GE) else {
        return Ok(a.clone());
    };
    let keep: Vec<usize> = (0..a.len()).filter(|&e| !a.has_label(e, g)).collect();
    if keep.is_empty() {
        return Err(Error::Structural("every element is labelled Ge".into()));
    }
    let rest: Vec<String> = a.signature().sigma().iter().filter(|p| *p != GE).cloned().collect();
    a.restrict(&keep)?.project(a.signature().with_sigma(rest)?)
}

/// T(φ): quantifiers range over elements not labelled `Ge`.
pub fn relativize_ge(phi: &Formula) -> Result<Formula> {
    Ok(match phi {
        Formula::Const(_) | Formula::Pred(..) | Formula::Rel(..) | Formula::Eq(..) => {
            if let Formula::Pred(q, _) = phi {
                if q == GE {
                    return Err(Error::Argument(format!("formula already mentions `{GE}`")));
                }
            }
            phi.clone()
        }
        Formula::Not(g) => fm::not(relativize_ge(g)?),
        Formula::And(gs) => Formula::And(gs.iter().map(relativize_ge).collect::<Result<_>>()?),
        Formula::Or(gs) => Formula::Or(gs.iter().map(relativize_ge).collect::<Result<_>>()?),
        Formula::Exists(x, g) => fm::exists(x, fm::and2(fm::not(p(GE, x)), relativize_ge(g)?)),
        Formula::Forall(x, g) => fm::forall(x, fm::or2(p(GE, x), relativize_ge(g)?)),
        Formula::AtLeast(k, x, g) => fm::atleast(*k, x, fm::and2(fm::not(p(GE, x)), relativize_ge(g)?)),
        Formula::Local(x, _, _) => return Err(Error::Fragment(format!("local modality at `{x}` under T"))),
    })
}

/// Appends the constant value c as a new last field; Γ gains (d+1, d+1).
pub fn pad_value(a: &DataStructure, c: Value) -> Result<DataStructure> {
    let d = a.d();
    let mut gamma = a.signature().gamma().clone();
    gamma.insert((d + 1, d + 1));
    let sig = Signature::new(a.signature().sigma().to_vec(), d + 1, gamma)?;
    let mut values = Vec::with_capacity(a.len() * (d + 1));
    for e in 0..a.len() {
        values.extend_from_slice(a.values_of(e));
        values.push(c);
    }
    DataStructure::from_parts(sig, a.ids().to_vec(), a.raw_labels().to_vec(), values)
}
