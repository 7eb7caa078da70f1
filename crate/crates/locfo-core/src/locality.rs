//! Data graph, directed distance, radius-r balls and r-views.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::structure::{gamma_full, DataStructure, Value};

/// Directed graph on (element, field) pairs; vertex `e*d + (i-1)` stands for (e, i).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataGraph {
    n: usize,
    d: usize,
    adj: Vec<Vec<usize>>,
}

impl DataGraph {
    pub fn vertex(&self, e: usize, i: usize) -> usize {
        e * self.d + i - 1
    }

    pub fn decode(&self, v: usize) -> (usize, usize) {
        (v / self.d, v % self.d + 1)
    }

    pub fn vertex_count(&self) -> usize {
        self.n * self.d
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn has_edge(&self, from: (usize, usize), to: (usize, usize)) -> bool {
        self.adj[self.vertex(from.0, from.1)].contains(&self.vertex(to.0, to.1))
    }

    /// All edges as ((elem, field), (elem, field)).
    pub fn edges(&self) -> Vec<((usize, usize), (usize, usize))> {
        let mut out = Vec::new();
        for v in 0..self.vertex_count() {
            for &w in &self.adj[v] {
                out.push((self.decode(v), self.decode(w)));
            }
        }
        out
    }
}

/// For each field j, value → elements carrying it at j.
#[derive(Clone, Debug)]
pub struct ValueIndex {
    by_field: Vec<BTreeMap<Value, Vec<usize>>>,
}

impl ValueIndex {
    pub fn new(a: &DataStructure) -> Self {
        let d = a.d();
        let mut by_field = vec![BTreeMap::new(); d];
        for e in 0..a.len() {
            for j in 1..=d {
                by_field[j - 1].entry(a.value(e, j)).or_insert_with(Vec::new).push(e);
            }
        }
        ValueIndex { by_field }
    }

    pub fn carriers(&self, j: usize, v: Value) -> &[usize] {
        self.by_field[j - 1].get(&v).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn for_each_successor<F: FnMut(usize, usize)>(a: &DataStructure, idx: &ValueIndex, e: usize, i: usize, mut f: F) {
    let d = a.d();
    for j in 1..=d {
        if j != i {
            f(e, j);
        }
    }
    let v = a.value(e, i);
    for &(gi, gj) in a.signature().gamma() {
        if gi == i {
            for &b in idx.carriers(gj, v) {
                f(b, gj);
            }
        }
    }
}

pub fn data_graph(a: &DataStructure) -> DataGraph {
    let n = a.len();
    let d = a.d();
    let idx = ValueIndex::new(a);
    let mut adj = vec![Vec::new(); n * d];
    for e in 0..n {
        for i in 1..=d {
            let v = e * d + i - 1;
            let mut succ = Vec::new();
            for_each_successor(a, &idx, e, i, |b, j| succ.push(b * d + j - 1));
            succ.sort_unstable();
            succ.dedup();
            adj[v] = succ;
        }
    }
    DataGraph { n, d, adj }
}

/// Distance (≤ r) from the fields of `e` to every vertex; `None` beyond r or unreachable.
pub fn ball_distances(a: &DataStructure, idx: &ValueIndex, sources: &[(usize, usize)], r: usize) -> Vec<Option<usize>> {
    let d = a.d();
    let mut dist = vec![None; a.len() * d];
    let mut queue = VecDeque::new();
    for &(e, i) in sources {
        let v = e * d + i - 1;
        if dist[v].is_none() {
            dist[v] = Some(0);
            queue.push_back((e, i));
        }
    }
    while let Some((e, i)) = queue.pop_front() {
        let dv = dist[e * d + i - 1].unwrap();
        if dv == r {
            continue;
        }
        for_each_successor(a, idx, e, i, |b, j| {
            let w = b * d + j - 1;
            if dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back((b, j));
            }
        });
    }
    dist
}

/// Membership mask of B_r(e): union over the start fields of e.
pub fn ball_mask(a: &DataStructure, idx: &ValueIndex, e: usize, r: usize) -> Vec<bool> {
    let sources: Vec<(usize, usize)> = (1..=a.d()).map(|i| (e, i)).collect();
    ball_distances(a, idx, &sources, r).into_iter().map(|x| x.is_some()).collect()
}

fn check_field(a: &DataStructure, i: usize) -> Result<()> {
    if i == 0 || i > a.d() {
        return Err(Error::Structural(format!("field {i} outside 1..{}", a.d())));
    }
    Ok(())
}

/// Length of the shortest directed path; `None` is infinity.
pub fn distance(a: &DataStructure, from: (&str, usize), to: (&str, usize)) -> Result<Option<usize>> {
    let s = a.require(from.0)?;
    let t = a.require(to.0)?;
    check_field(a, from.1)?;
    check_field(a, to.1)?;
    let idx = ValueIndex::new(a);
    let dist = ball_distances(a, &idx, &[(s, from.1)], usize::MAX);
    Ok(dist[t * a.d() + to.1 - 1])
}

pub fn ball(a: &DataStructure, id: &str, r: usize) -> Result<BTreeSet<(String, usize)>> {
    let e = a.require(id)?;
    let idx = ValueIndex::new(a);
    let mask = ball_mask(a, &idx, e, r);
    let d = a.d();
    Ok(mask
        .iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(v, _)| (String::from(a.id(v / d)), v % d + 1))
        .collect())
}

/// An r-view together with the (element, field) pairs whose value was replaced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct View {
    pub structure: DataStructure,
    pub freshened: Vec<(String, usize)>,
}

/// View on positions: the structure, the map from `a`'s positions to view positions,
/// and the freshened (position-in-a, field) pairs.
pub fn view_at(a: &DataStructure, idx: &ValueIndex, e: usize, r: usize) -> (DataStructure, Vec<Option<usize>>, Vec<(usize, usize)>) {
    let d = a.d();
    let mask = ball_mask(a, idx, e, r);
    let mut next = a.max_value().map_or(0, |m| m + 1);
    let mut map = vec![None; a.len()];
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut fresh = Vec::new();
    for b in 0..a.len() {
        if !(1..=d).any(|j| mask[b * d + j - 1]) {
            continue;
        }
        map[b] = Some(ids.len());
        ids.push(String::from(a.id(b)));
        labels.extend_from_slice(a.label_row(b));
        for j in 1..=d {
            if mask[b * d + j - 1] {
                values.push(a.value(b, j));
            } else {
                values.push(next);
                next += 1;
                fresh.push((b, j));
            }
        }
    }
    let s = DataStructure::from_parts(a.signature().clone(), ids, labels, values)
        .expect("view of a valid structure is valid");
    (s, map, fresh)
}

pub fn view(a: &DataStructure, id: &str, r: usize) -> Result<View> {
    let e = a.require(id)?;
    if a.d() == 0 {
        return Err(Error::Argument("views need d >= 1".into()));
    }
    let idx = ValueIndex::new(a);
    let (structure, _, fresh) = view_at(a, &idx, e, r);
    let freshened = fresh.into_iter().map(|(b, j)| (String::from(a.id(b)), j)).collect();
    Ok(View { structure, freshened })
}

fn require_gamma2(a: &DataStructure) -> Result<()> {
    if a.d() != 2 || *a.signature().gamma() != gamma_full(2) {
        return Err(Error::Argument("characterization needs d = 2 and gamma = gamma_2".into()));
    }
    Ok(())
}

/// (b,j) ∈ B_1(a) iff f_i(a) = f_j(b) for some i (d = 2, Γ = Γ₂).
pub fn ball1_by_values(a: &DataStructure, center: &str, b: &str, j: usize) -> Result<bool> {
    require_gamma2(a)?;
    ball1_by_values_any(a, center, b, j)
}

/// (b,j) ∈ B_2(a) iff f_i(a) = f_k(b) for some i, k (d = 2, Γ = Γ₂).
pub fn ball2_by_values(a: &DataStructure, center: &str, b: &str, j: usize) -> Result<bool> {
    require_gamma2(a)?;
    check_field(a, j)?;
    let c = a.require(center)?;
    let eb = a.require(b)?;
    Ok((1..=2).any(|i| (1..=2).any(|k| a.rel(i, k, c, eb))))
}

/// Radius-1 characterization for any d under Γ = Γ_d.
pub fn ball1_by_values_any(a: &DataStructure, center: &str, b: &str, j: usize) -> Result<bool> {
    if *a.signature().gamma() != gamma_full(a.d()) {
        return Err(Error::Argument("characterization needs gamma = gamma_d".into()));
    }
    check_field(a, j)?;
    let c = a.require(center)?;
    let eb = a.require(b)?;
    Ok((1..=a.d()).any(|i| a.rel(i, j, c, eb)))
}
