//! D-data structures: a finite universe with unary labels and D data values per element.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::syntax::is_pred_name;

pub type Value = u64;
pub type GammaSet = BTreeSet<(usize, usize)>;

/// Γ_D: every pair (i,j) with 1 ≤ i,j ≤ d.
pub fn gamma_full(d: usize) -> GammaSet {
    let mut g = GammaSet::new();
    for i in 1..=d {
        for j in 1..=d {
            g.insert((i, j));
        }
    }
    g
}

/// Γ_df = {(1,1),(2,2)}.
pub fn gamma_df() -> GammaSet {
    [(1, 1), (2, 2)].into_iter().collect()
}

/// {(1,1),(2,2),(1,2)}, the relation set of the radius-1 pipeline.
pub fn gamma_diag() -> GammaSet {
    [(1, 1), (2, 2), (1, 2)].into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    sigma: Vec<String>,
    d: usize,
    gamma: GammaSet,
}

impl Signature {
    pub fn new<S, I, G>(sigma: I, d: usize, gamma: G) -> Result<Self>
    where
        S: Into<String>,
        I: IntoIterator<Item = S>,
        G: IntoIterator<Item = (usize, usize)>,
    {
        let sigma: Vec<String> = sigma.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for p in &sigma {
            if !is_pred_name(p) {
                return Err(Error::Structural(format!("invalid predicate name `{p}`")));
            }
            if !seen.insert(p.as_str()) {
                return Err(Error::Structural(format!("duplicate predicate `{p}`")));
            }
        }
        let gamma: GammaSet = gamma.into_iter().collect();
        for &(i, j) in &gamma {
            if i == 0 || j == 0 || i > d || j > d {
                return Err(Error::Structural(format!(
                    "gamma pair ({i},{j}) outside 1..{d}"
                )));
            }
        }
        Ok(Signature { sigma, d, gamma })
    }

    /// Signature with Γ = Γ_d.
    pub fn full<S, I>(sigma: I, d: usize) -> Result<Self>
    where
        S: Into<String>,
        I: IntoIterator<Item = S>,
    {
        Self::new(sigma, d, gamma_full(d))
    }

    pub fn sigma(&self) -> &[String] {
        &self.sigma
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma(&self) -> &GammaSet {
        &self.gamma
    }

    pub fn admits(&self, i: usize, j: usize) -> bool {
        self.gamma.contains(&(i, j))
    }

    pub fn pred_index(&self, name: &str) -> Option<usize> {
        self.sigma.iter().position(|p| p == name)
    }

    pub fn with_gamma<G: IntoIterator<Item = (usize, usize)>>(&self, gamma: G) -> Result<Self> {
        Self::new(self.sigma.clone(), self.d, gamma)
    }

    /// Appends predicates to Σ; a name already present is an error.
    pub fn extended<S: Into<String>, I: IntoIterator<Item = S>>(&self, extra: I) -> Result<Self> {
        let mut sigma = self.sigma.clone();
        sigma.extend(extra.into_iter().map(Into::into));
        Self::new(sigma, self.d, self.gamma.iter().copied())
    }

    pub fn with_sigma<S: Into<String>, I: IntoIterator<Item = S>>(&self, sigma: I) -> Result<Self> {
        Self::new(sigma, self.d, self.gamma.iter().copied())
    }
}

/// Which value field a transformation touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    All,
    Index(usize),
}

/// One element in owned form, as used by constructors and serializers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub id: String,
    pub labels: Vec<String>,
    pub values: Vec<Value>,
}

impl Element {
    pub fn new<S: Into<String>>(id: &str, labels: impl IntoIterator<Item = S>, values: &[Value]) -> Self {
        Element {
            id: id.to_string(),
            labels: labels.into_iter().map(Into::into).collect(),
            values: values.to_vec(),
        }
    }
}

/// Partial map from variable names to element ids.
pub type Interpretation = BTreeMap<String, String>;

/// A finite D-data structure. Elements are addressed by position; ids are kept for IO.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataStructure {
    sig: Signature,
    ids: Vec<String>,
    labels: Vec<bool>,
    values: Vec<Value>,
}

impl DataStructure {
    pub fn new(sig: Signature, elements: Vec<Element>) -> Result<Self> {
        let s = sig.sigma.len();
        let d = sig.d;
        let mut ids = Vec::with_capacity(elements.len());
        let mut labels = vec![false; elements.len() * s];
        let mut values = Vec::with_capacity(elements.len() * d);
        for (e, el) in elements.into_iter().enumerate() {
            if el.values.len() != d {
                return Err(Error::Structural(format!(
                    "element `{}` has {} values, expected {d}",
                    el.id,
                    el.values.len()
                )));
            }
            for l in &el.labels {
                let p = sig.pred_index(l).ok_or_else(|| {
                    Error::Structural(format!("element `{}` has unknown label `{l}`", el.id))
                })?;
                labels[e * s + p] = true;
            }
            values.extend_from_slice(&el.values);
            ids.push(el.id);
        }
        Self::from_parts(sig, ids, labels, values)
    }

    /// Builds from flat row-major label and value matrices.
    pub fn from_parts(sig: Signature, ids: Vec<String>, labels: Vec<bool>, values: Vec<Value>) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Structural("universe must be nonempty".into()));
        }
        if labels.len() != n * sig.sigma.len() || values.len() != n * sig.d {
            return Err(Error::Structural("label or value matrix has wrong shape".into()));
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Structural(format!("duplicate element id `{id}`")));
            }
        }
        Ok(DataStructure { sig, ids, labels, values })
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn d(&self) -> usize {
        self.sig.d
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, e: usize) -> &str {
        &self.ids[e]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::Structural(format!("unknown element `{id}`")))
    }

    /// Value `i` (1-based) of element `e`.
    pub fn value(&self, e: usize, i: usize) -> Value {
        self.values[e * self.sig.d + i - 1]
    }

    pub fn values_of(&self, e: usize) -> &[Value] {
        let d = self.sig.d;
        &self.values[e * d..(e + 1) * d]
    }

    pub fn label_row(&self, e: usize) -> &[bool] {
        let s = self.sig.sigma.len();
        &self.labels[e * s..(e + 1) * s]
    }

    pub fn has_label(&self, e: usize, p: usize) -> bool {
        self.labels[e * self.sig.sigma.len() + p]
    }

    pub fn has_label_named(&self, e: usize, name: &str) -> bool {
        self.sig.pred_index(name).is_some_and(|p| self.has_label(e, p))
    }

    pub fn label_names(&self, e: usize) -> Vec<&str> {
        self.sig
            .sigma
            .iter()
            .enumerate()
            .filter(|(p, _)| self.has_label(e, *p))
            .map(|(_, n)| n.as_str())
            .collect()
    }

    pub fn element(&self, e: usize) -> Element {
        Element {
            id: self.ids[e].clone(),
            labels: self.label_names(e).into_iter().map(String::from).collect(),
            values: self.values_of(e).to_vec(),
        }
    }

    pub fn elements(&self) -> Vec<Element> {
        (0..self.len()).map(|e| self.element(e)).collect()
    }

    pub fn raw_labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn raw_values(&self) -> &[Value] {
        &self.values
    }

    /// f_i(a) = f_j(b) on element positions, no range checks beyond slice bounds.
    #[inline]
    pub fn rel(&self, i: usize, j: usize, a: usize, b: usize) -> bool {
        self.value(a, i) == self.value(b, j)
    }

    /// The raw semantic relation ~i:j; Γ membership is not consulted.
    pub fn relation_holds(&self, i: usize, j: usize, a: &str, b: &str) -> Result<bool> {
        let d = self.d();
        if i == 0 || j == 0 || i > d || j > d {
            return Err(Error::Structural(format!("index pair ({i},{j}) outside 1..{d}")));
        }
        let ea = self.require(a)?;
        let eb = self.require(b)?;
        Ok(self.rel(i, j, ea, eb))
    }

    pub fn vals(&self, ids: &[&str]) -> Result<BTreeSet<Value>> {
        let mut out = BTreeSet::new();
        for id in ids {
            let e = self.require(id)?;
            out.extend(self.values_of(e).iter().copied());
        }
        Ok(out)
    }

    pub fn all_vals(&self) -> BTreeSet<Value> {
        self.values.iter().copied().collect()
    }

    pub fn max_value(&self) -> Option<Value> {
        self.values.iter().copied().max()
    }

    /// Applies `pi` to the chosen field(s). `pi` must be defined and injective on Vals(A).
    pub fn permute_values(&self, pi: &BTreeMap<Value, Value>, field: Field) -> Result<Self> {
        let vals = self.all_vals();
        let mut image = BTreeSet::new();
        for v in &vals {
            let w = pi
                .get(v)
                .ok_or_else(|| Error::Argument(format!("permutation undefined on value {v}")))?;
            if !image.insert(*w) {
                return Err(Error::Argument(format!("permutation not injective at value {w}")));
            }
        }
        let d = self.d();
        if let Field::Index(i) = field {
            if i == 0 || i > d {
                return Err(Error::Argument(format!("field {i} outside 1..{d}")));
            }
        }
        let mut out = self.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            let touch = match field {
                Field::All => true,
                Field::Index(i) => k % d == i - 1,
            };
            if touch {
                *v = pi[v];
            }
        }
        Ok(out)
    }

    /// Substructure on the given positions, in the given order.
    pub fn restrict(&self, elems: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(elems.len());
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for &e in elems {
            ids.push(self.ids[e].clone());
            labels.extend_from_slice(self.label_row(e));
            values.extend_from_slice(self.values_of(e));
        }
        Self::from_parts(self.sig.clone(), ids, labels, values)
    }

    /// Re-targets to another signature with the same d; labels carried over by name.
    pub fn with_signature(&self, sig: Signature) -> Result<Self> {
        if sig.d != self.sig.d {
            return Err(Error::Argument("signature arity differs".into()));
        }
        let s = sig.sigma.len();
        let mut labels = vec![false; self.len() * s];
        for (p, name) in self.sig.sigma.iter().enumerate() {
            match sig.pred_index(name) {
                Some(q) => {
                    for e in 0..self.len() {
                        labels[e * s + q] = self.has_label(e, p);
                    }
                }
                None => {
                    if (0..self.len()).any(|e| self.has_label(e, p)) {
                        return Err(Error::Argument(format!(
                            "label `{name}` is in use but absent from the target signature"
                        )));
                    }
                }
            }
        }
        Self::from_parts(sig, self.ids.clone(), labels, self.values.clone())
    }

    /// Like `with_signature`, but labels absent from the target are forgotten.
    pub fn project(&self, sig: Signature) -> Result<Self> {
        if sig.d != self.sig.d {
            return Err(Error::Argument("signature arity differs".into()));
        }
        let s = sig.sigma.len();
        let mut labels = vec![false; self.len() * s];
        for (p, name) in self.sig.sigma.iter().enumerate() {
            if let Some(q) = sig.pred_index(name) {
                for e in 0..self.len() {
                    labels[e * s + q] = self.has_label(e, p);
                }
            }
        }
        Self::from_parts(sig, self.ids.clone(), labels, self.values.clone())
    }

    /// Same structure with Γ replaced.
    pub fn with_gamma<G: IntoIterator<Item = (usize, usize)>>(&self, gamma: G) -> Result<Self> {
        let sig = self.sig.with_gamma(gamma)?;
        Ok(DataStructure { sig, ..self.clone() })
    }

    /// Isomorphism-invariant normal form: ids e1..en, values 1..k in first-occurrence order.
    pub fn canonical_form(&self) -> Self {
        canonical(self)
    }
}

type Key = (Vec<bool>, Vec<usize>, Vec<Vec<(usize, Vec<bool>)>>);

fn own_pattern(vals: &[Value]) -> Vec<usize> {
    let mut seen: Vec<Value> = Vec::new();
    vals.iter()
        .map(|v| match seen.iter().position(|w| w == v) {
            Some(k) => k,
            None => {
                seen.push(*v);
                seen.len() - 1
            }
        })
        .collect()
}

fn canonical(a: &DataStructure) -> DataStructure {
    let n = a.len();
    let d = a.d();
    let mut occ: BTreeMap<Value, Vec<(usize, usize)>> = BTreeMap::new();
    for e in 0..n {
        for i in 1..=d {
            occ.entry(a.value(e, i)).or_default().push((e, i));
        }
    }
    let keys: Vec<Key> = (0..n)
        .map(|e| {
            let neigh = (1..=d)
                .map(|i| {
                    let mut v: Vec<(usize, Vec<bool>)> = occ[&a.value(e, i)]
                        .iter()
                        .filter(|(b, _)| *b != e)
                        .map(|&(b, j)| (j, a.label_row(b).to_vec()))
                        .collect();
                    v.sort();
                    v
                })
                .collect();
            (a.label_row(e).to_vec(), own_pattern(a.values_of(e)), neigh)
        })
        .collect();
    let mut slot_keys: Vec<&Key> = keys.iter().collect();
    slot_keys.sort();

    let mut search = Canon {
        a,
        keys: &keys,
        slot_keys,
        used: vec![false; n],
        chosen: Vec::with_capacity(n),
        code: Vec::with_capacity(n * d),
        rename: BTreeMap::new(),
        best: None,
    };
    search.dfs(0);
    let (_, best_order) = search.best.expect("nonempty universe");

    let mut rename: BTreeMap<Value, Value> = BTreeMap::new();
    let mut ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n * a.sig.sigma.len());
    let mut values = Vec::with_capacity(n * d);
    for (k, &e) in best_order.iter().enumerate() {
        ids.push(format!("e{}", k + 1));
        labels.extend_from_slice(a.label_row(e));
        for &v in a.values_of(e) {
            let next = rename.len() as Value + 1;
            values.push(*rename.entry(v).or_insert(next));
        }
    }
    DataStructure { sig: a.sig.clone(), ids, labels, values }
}

struct Canon<'a> {
    a: &'a DataStructure,
    keys: &'a [Key],
    slot_keys: Vec<&'a Key>,
    used: Vec<bool>,
    chosen: Vec<usize>,
    code: Vec<Value>,
    rename: BTreeMap<Value, Value>,
    best: Option<(Vec<Value>, Vec<usize>)>,
}

impl Canon<'_> {
    fn dfs(&mut self, p: usize) {
        let n = self.a.len();
        if p == n {
            let better = match &self.best {
                None => true,
                Some((code, _)) => self.code < *code,
            };
            if better {
                self.best = Some((self.code.clone(), self.chosen.clone()));
            }
            return;
        }
        let d = self.a.d();
        // The element at slot p must carry the p-th smallest key.
        let target = self.slot_keys[p];
        let mut tried: Vec<&[Value]> = Vec::new();
        for c in 0..n {
            if self.used[c] || self.keys[c] != *target {
                continue;
            }
            let vals = self.a.values_of(c);
            if tried.contains(&vals) {
                continue;
            }
            tried.push(vals);
            let mut added = Vec::new();
            for &v in vals {
                let code = match self.rename.get(&v) {
                    Some(w) => *w,
                    None => {
                        let w = self.rename.len() as Value + 1;
                        self.rename.insert(v, w);
                        added.push(v);
                        w
                    }
                };
                self.code.push(code);
            }
            let prune = match &self.best {
                Some((best, _)) => self.code[..] > best[..self.code.len()],
                None => false,
            };
            if !prune {
                self.used[c] = true;
                self.chosen.push(c);
                self.dfs(p + 1);
                self.chosen.pop();
                self.used[c] = false;
            }
            self.code.truncate(p * d);
            for v in added {
                self.rename.remove(&v);
            }
        }
    }
}
