//! A small conflict-driven clause-learning solver.
//!
//! Two watched literals, first-UIP learning with local minimization, activity-based
//! branching with phase saving, Luby restarts, and learnt-clause reduction at restarts.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Not;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: usize, positive: bool) -> Lit {
        Lit(((var as u32) << 1) | u32::from(!positive))
    }

    pub fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Value of every variable.
    Sat(Vec<bool>),
    Unsat,
    /// The conflict budget ran out.
    Unknown,
}

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;
const NO_REASON: usize = usize::MAX;

#[derive(Clone, Copy)]
struct Watch {
    clause: usize,
    blocker: Lit,
}

struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    lbd: u32,
    activity: f64,
}

/// Max-heap of variables by activity.
struct VarHeap {
    heap: Vec<usize>,
    pos: Vec<usize>,
}

impl VarHeap {
    fn contains(&self, v: usize) -> bool {
        self.pos[v] != usize::MAX
    }

    fn push(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v] = self.heap.len();
        self.heap.push(v);
        self.up(self.heap.len() - 1, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top] = usize::MAX;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last] = 0;
            self.down(0, act);
        }
        Some(top)
    }

    fn bumped(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            self.up(self.pos[v], act);
        }
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if act[p] >= act[v] {
                break;
            }
            self.heap[i] = p;
            self.pos[p] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v] = i;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && act[self.heap[r]] > act[self.heap[l]] { r } else { l };
            if act[self.heap[c]] <= act[v] {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i]] = i;
            i = c;
        }
        self.heap[i] = v;
        self.pos[v] = i;
    }
}

pub struct Solver {
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watch>>,
    assign: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<usize>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    heap: VarHeap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    var_inc: f64,
    cla_inc: f64,
    ok: bool,
    max_learnts: f64,
    conflicts: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new()
    }
}

impl Solver {
    pub fn new() -> Self {
        Solver {
            clauses: Vec::new(),
            watches: Vec::new(),
            assign: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            phase: Vec::new(),
            activity: Vec::new(),
            seen: Vec::new(),
            heap: VarHeap { heap: Vec::new(), pos: Vec::new() },
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            var_inc: 1.0,
            cla_inc: 1.0,
            ok: true,
            max_learnts: 0.0,
            conflicts: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.assign.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Conflicts seen so far, over all calls to `solve`.
    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    pub fn new_var(&mut self) -> usize {
        let v = self.assign.len();
        self.assign.push(UNDEF);
        self.level.push(0);
        self.reason.push(NO_REASON);
        self.phase.push(false);
        self.activity.push(0.0);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.pos.push(usize::MAX);
        self.heap.push(v, &self.activity);
        v
    }

    fn value(&self, l: Lit) -> i8 {
        let a = self.assign[l.var()];
        if l.is_positive() {
            a
        } else {
            -a
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a clause. Must be called before `solve` or between calls.
    pub fn add_clause(&mut self, lits: &[Lit]) {
        if !self.ok {
            return;
        }
        if self.decision_level() > 0 {
            self.backtrack(0);
        }
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort();
        c.dedup();
        for w in c.windows(2) {
            if w[0].var() == w[1].var() {
                return;
            }
        }
        if c.iter().any(|&l| self.value(l) == TRUE) {
            return;
        }
        c.retain(|&l| self.value(l) != FALSE);
        match c.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(c[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(Clause { lits: c, learnt: false, lbd: 0, activity: 0.0 });
            }
        }
    }

    fn attach(&mut self, c: Clause) -> usize {
        let idx = self.clauses.len();
        self.watches[(!c.lits[0]).index()].push(Watch { clause: idx, blocker: c.lits[1] });
        self.watches[(!c.lits[1]).index()].push(Watch { clause: idx, blocker: c.lits[0] });
        self.clauses.push(c);
        idx
    }

    fn enqueue(&mut self, l: Lit, reason: usize) {
        let v = l.var();
        self.assign[v] = if l.is_positive() { TRUE } else { FALSE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = core::mem::take(&mut self.watches[p.index()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.clause;
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                if first != w.blocker && self.value(first) == TRUE {
                    ws[j] = Watch { clause: cref, blocker: first };
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[cref].lits[k];
                    if self.value(l) != FALSE {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[(!l).index()].push(Watch { clause: cref, blocker: first });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = Watch { clause: cref, blocker: first };
                j += 1;
                if self.value(first) == FALSE {
                    conflict = Some(cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, cref);
                }
            }
            ws.truncate(j);
            self.watches[p.index()] = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, c: usize) {
        self.clauses[c].activity += self.cla_inc;
        if self.clauses[c].activity > 1e20 {
            for cl in self.clauses.iter_mut().filter(|c| c.learnt) {
                cl.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    fn analyze(&mut self, mut confl: usize) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit(0)];
        let mut pathc = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let dl = self.decision_level();
        loop {
            if self.clauses[confl].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            for k in start..self.clauses[confl].lits.len() {
                let q = self.clauses[confl].lits[k];
                let v = q.var();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= dl {
                        pathc += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var()] {
                    break;
                }
            }
            let lit = self.trail[idx];
            p = Some(lit);
            confl = self.reason[lit.var()];
            self.seen[lit.var()] = false;
            pathc -= 1;
            if pathc == 0 {
                break;
            }
        }
        learnt[0] = !p.unwrap();

        // Drop literals implied by the rest of the clause.
        let before = learnt.clone();
        let mut kept = vec![learnt[0]];
        for &q in &learnt[1..] {
            let r = self.reason[q.var()];
            let redundant = r != NO_REASON
                && self.clauses[r].lits[1..].iter().all(|l| self.seen[l.var()] || self.level[l.var()] == 0);
            if !redundant {
                kept.push(q);
            }
        }
        for q in &before[1..] {
            self.seen[q.var()] = false;
        }
        let mut learnt = kept;

        let mut bt = 0;
        if learnt.len() > 1 {
            let mut best = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var()] > self.level[learnt[best].var()] {
                    best = k;
                }
            }
            learnt.swap(1, best);
            bt = self.level[learnt[1].var()];
        }
        (learnt, bt)
    }

    fn lbd(&self, lits: &[Lit]) -> u32 {
        let mut levels: Vec<u32> = lits.iter().map(|l| self.level[l.var()]).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.len() as u32
    }

    fn backtrack(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for k in (lim..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = l.var();
            self.phase[v] = l.is_positive();
            self.assign[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.heap.push(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = lim;
    }

    /// At level 0 after full propagation: drops satisfied clauses, strips false literals,
    /// halves the learnt database if it grew too large, and rebuilds the watches.
    fn simplify(&mut self) {
        let mut learnts: Vec<(u32, f64, usize)> = Vec::new();
        let old = core::mem::take(&mut self.clauses);
        let mut keep: Vec<Clause> = Vec::with_capacity(old.len());
        for mut c in old {
            if c.lits.iter().any(|&l| self.value(l) == TRUE) {
                continue;
            }
            c.lits.retain(|&l| self.value(l) != FALSE);
            if c.learnt {
                learnts.push((c.lbd, c.activity, keep.len()));
            }
            keep.push(c);
        }
        if learnts.len() as f64 > self.max_learnts {
            learnts.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal)));
            let mut drop = vec![false; keep.len()];
            for &(lbd, _, k) in learnts.iter().skip(learnts.len() / 2) {
                if lbd > 2 {
                    drop[k] = true;
                }
            }
            let mut k = 0;
            keep.retain(|_| {
                k += 1;
                !drop[k - 1]
            });
            self.max_learnts *= 1.1;
        }
        for r in self.reason.iter_mut() {
            *r = NO_REASON;
        }
        for w in self.watches.iter_mut() {
            w.clear();
        }
        for c in keep {
            self.attach(c);
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assign[v] == UNDEF {
                return Some(Lit::new(v, self.phase[v]));
            }
        }
        None
    }

    /// Solves the clause set. `budget` bounds the number of conflicts in this call.
    pub fn solve(&mut self, budget: Option<u64>) -> Outcome {
        if !self.ok {
            return Outcome::Unsat;
        }
        self.backtrack(0);
        if self.propagate().is_some() {
            self.ok = false;
            return Outcome::Unsat;
        }
        self.max_learnts = (self.clauses.len() as f64 / 3.0).max(2000.0);
        let start = self.conflicts;
        let mut restart = 0u32;
        loop {
            let limit = 100 * luby(restart);
            restart += 1;
            let mut here = 0u64;
            loop {
                if let Some(confl) = self.propagate() {
                    self.conflicts += 1;
                    here += 1;
                    if self.decision_level() == 0 {
                        self.ok = false;
                        return Outcome::Unsat;
                    }
                    let (learnt, bt) = self.analyze(confl);
                    self.backtrack(bt);
                    if learnt.len() == 1 {
                        self.enqueue(learnt[0], NO_REASON);
                    } else {
                        let lbd = self.lbd(&learnt);
                        let first = learnt[0];
                        let c = self.attach(Clause { lits: learnt, learnt: true, lbd, activity: 0.0 });
                        self.bump_clause(c);
                        self.enqueue(first, c);
                    }
                    self.var_inc /= 0.95;
                    self.cla_inc /= 0.999;
                    continue;
                }
                if let Some(b) = budget {
                    if self.conflicts - start >= b {
                        self.backtrack(0);
                        return Outcome::Unknown;
                    }
                }
                if here >= limit {
                    break;
                }
                match self.pick_branch() {
                    None => {
                        let model = self.assign.iter().map(|&a| a == TRUE).collect();
                        self.backtrack(0);
                        return Outcome::Sat(model);
                    }
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, NO_REASON);
                    }
                }
            }
            self.backtrack(0);
            if self.propagate().is_some() {
                self.ok = false;
                return Outcome::Unsat;
            }
            self.simplify();
        }
    }
}

fn luby(i: u32) -> u64 {
    // Position i (0-based) of 1 1 2 1 1 2 4 1 1 2 ...
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < u64::from(i) + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut i = u64::from(i);
    while size - 1 != i {
        size = (size - 1) / 2;
        seq -= 1;
        i %= size;
    }
    1u64 << seq
}
