//! Bounded model search and satisfiability front-ends.
//!
//! `bounded_sat` enumerates canonical structures and evaluates the formula on each; it is
//! slow but shares no code with the translations, so it serves as the reference. The
//! front-ends for the reduced fragments encode the target formula propositionally
//! (`ground`) and run the clause-learning solver in `cdcl`.

pub mod cdcl;
pub mod ground;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::eval::{self, Compiled, EvalOptions};
use crate::existred::{reduce_exist1, reduce_exist2, ExistReduction};
use crate::formula::{self as fm, type_check, Formula};
use crate::localred::{full_pipeline, ED};
use crate::structure::{DataStructure, Signature, Value};

pub use ground::{ground_search, ground_search_min, Grounded};

/// Largest search size `monadic_sat` accepts before answering `Unknown`.
pub const DEFAULT_MONADIC_CAP: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatVerdict {
    /// A model, already re-checked against the input formula.
    Sat(DataStructure),
    /// No model with at most this many elements.
    UnsatWithin(usize),
    /// No model at all.
    Unsat,
    /// The procedure could not decide.
    Unknown { bound: usize, reason: String },
}

impl SatVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatVerdict::Sat(_))
    }

    pub fn witness(&self) -> Option<&DataStructure> {
        match self {
            SatVerdict::Sat(a) => Some(a),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            SatVerdict::Sat(_) => "SAT",
            SatVerdict::UnsatWithin(_) => "UNSAT_WITHIN",
            SatVerdict::Unsat => "UNSAT",
            SatVerdict::Unknown { .. } => "UNKNOWN",
        }
    }
}

impl fmt::Display for SatVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SatVerdict::Sat(a) => write!(f, "SAT (witness of size {})", a.len()),
            SatVerdict::UnsatWithin(n) => write!(f, "UNSAT_WITHIN {n}"),
            SatVerdict::Unsat => write!(f, "UNSAT"),
            SatVerdict::Unknown { bound, reason } => write!(f, "UNKNOWN {bound}: {reason}"),
        }
    }
}

/// Restricted growth strings of length `len` with entries in 1..=`max`.
fn value_patterns(len: usize, max: usize, out: &mut Vec<Vec<Value>>) {
    fn go(cur: &mut Vec<Value>, top: Value, len: usize, max: Value, out: &mut Vec<Vec<Value>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for v in 1..=(top + 1).min(max) {
            cur.push(v);
            go(cur, top.max(v), len, max, out);
            cur.pop();
        }
    }
    go(&mut Vec::with_capacity(len), 0, len, max as Value, out);
}

/// Calls `visit` on every structure of size `s` with values in 1..=`v`, one per
/// isomorphism class, until it returns `true`. Returns whether it was stopped.
fn for_each_structure<F>(sig: &Signature, s: usize, v: usize, mut visit: F) -> Result<bool>
where
    F: FnMut(DataStructure) -> Result<bool>,
{
    if s == 0 {
        return Ok(false);
    }
    let width = sig.sigma().len();
    let bits = width * s;
    if bits >= 64 {
        return Err(Error::Argument(format!("{bits} label bits are too many to enumerate")));
    }
    let ids: Vec<String> = (1..=s).map(|e| format!("e{e}")).collect();
    let mut patterns = Vec::new();
    value_patterns(s * sig.d(), v, &mut patterns);
    let mut seen: BTreeSet<(Vec<bool>, Vec<Value>)> = BTreeSet::new();
    for values in patterns {
        for mask in 0u64..(1u64 << bits) {
            let labels: Vec<bool> = (0..bits).map(|b| mask >> b & 1 == 1).collect();
            let a = DataStructure::from_parts(sig.clone(), ids.clone(), labels, values.clone())?.canonical_form();
            if seen.insert((a.raw_labels().to_vec(), a.raw_values().to_vec())) && visit(a)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// All structures over `sig` with exactly `s` elements and values in 1..=`v`, up to
/// isomorphism, each in canonical form.
pub fn enumerate_structures(sig: &Signature, s: usize, v: usize) -> Result<Vec<DataStructure>> {
    let mut out = Vec::new();
    for_each_structure(sig, s, v, |a| {
        out.push(a);
        Ok(false)
    })?;
    Ok(out)
}

fn check_sentence(phi: &Formula, sig: &Signature) -> Result<()> {
    type_check(phi, sig)?;
    if !phi.is_sentence() {
        return Err(Error::Argument("satisfiability search expects a sentence".into()));
    }
    Ok(())
}

fn recheck(a: &DataStructure, phi: &Formula, what: &str) -> Result<()> {
    if eval::models(a, phi)? {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} witness does not satisfy the formula")))
    }
}

/// Smallest model with at most `max_size` elements by exhaustive enumeration.
///
/// `value_bound` defaults to `max_size · d`, which loses no models up to renaming.
pub fn bounded_sat(phi: &Formula, sig: &Signature, max_size: usize, value_bound: Option<usize>) -> Result<SatVerdict> {
    check_sentence(phi, sig)?;
    let c = Compiled::new(phi, sig, EvalOptions::default())?;
    for s in 1..=max_size {
        let v = value_bound.unwrap_or(s * sig.d());
        let mut found = None;
        for_each_structure(sig, s, v, |a| {
            if c.models(&a)? {
                found = Some(a);
                return Ok(true);
            }
            Ok(false)
        })?;
        if let Some(a) = found {
            recheck(&a, phi, "enumerated")?;
            return Ok(SatVerdict::Sat(a));
        }
    }
    Ok(SatVerdict::UnsatWithin(max_size))
}

/// Smallest model with at most `max_size` elements, found by the propositional encoding.
///
/// Handles every formula without the local modality. `budget` caps solver conflicts.
pub fn bounded_sat_grounded(phi: &Formula, sig: &Signature, max_size: usize, budget: Option<u64>) -> Result<SatVerdict> {
    check_sentence(phi, sig)?;
    Ok(match ground_search_min(phi, sig, max_size, budget)? {
        Grounded::Model(a) => {
            recheck(&a, phi, "grounded")?;
            SatVerdict::Sat(a)
        }
        Grounded::NoModel => SatVerdict::UnsatWithin(max_size),
        Grounded::GaveUp => SatVerdict::Unknown { bound: max_size, reason: "solver budget exhausted".into() },
    })
}

/// Search size for a monadic sentence: max(1, qr)·2^k over the k predicates it uses.
pub fn monadic_bound(phi: &Formula) -> Option<usize> {
    let k = phi.predicates().len();
    let types = 1usize.checked_shl(u32::try_from(k).ok()?)?;
    phi.quantifier_rank().max(1).checked_mul(types)
}

/// Decides a monadic sentence by searching all sizes up to `monadic_bound`.
///
/// Answers `Unknown` when the bound exceeds `cap`.
pub fn monadic_sat(phi: &Formula, sig: &Signature, cap: usize) -> Result<SatVerdict> {
    if let Some((i, j)) = phi.relations().into_iter().next() {
        return Err(Error::Fragment(format!("monadic formula uses ~{i}:{j}")));
    }
    check_sentence(phi, sig)?;
    let bound = match monadic_bound(phi) {
        Some(b) if b <= cap => b,
        _ => {
            return Ok(SatVerdict::Unknown {
                bound: cap,
                reason: format!("small-model bound exceeds the cap of {cap} elements"),
            })
        }
    };
    let plain = Signature::new(sig.sigma().iter().cloned(), 0, [])?;
    match ground_search_min(phi, &plain, bound, None)? {
        Grounded::Model(b) => {
            let values = alloc::vec![1; b.len() * sig.d()];
            let a = DataStructure::from_parts(sig.clone(), b.ids().to_vec(), b.raw_labels().to_vec(), values)?;
            recheck(&a, phi, "monadic")?;
            Ok(SatVerdict::Sat(a))
        }
        Grounded::NoModel => Ok(SatVerdict::Unsat),
        Grounded::GaveUp => unreachable!("no budget was set"),
    }
}

fn pull_back(red: &ExistReduction, b: &DataStructure, phi: &Formula) -> Result<DataStructure> {
    let a = red
        .pull_back(b)?
        .ok_or_else(|| Error::Contract("model of the reduct has no anchor tuple".into()))?;
    recheck(&a, phi, "pulled-back")?;
    Ok(a)
}

/// EXIST_LOCAL(1): reduce to a monadic sentence and decide it.
pub fn sat_exist_local1(phi: &Formula, sig: &Signature, cap: usize) -> Result<SatVerdict> {
    let red = reduce_exist1(phi, sig)?;
    match monadic_sat(&red.psi, &red.signature, cap)? {
        SatVerdict::Sat(b) => Ok(SatVerdict::Sat(pull_back(&red, &b, phi)?)),
        other => Ok(other),
    }
}

/// EXIST_LOCAL(2) over d = 2: reduce to 1-data logic and search models up to `bound`.
///
/// Never answers `Unsat`: no decision procedure for the 1-data target is implemented.
pub fn sat_exist_local2(phi: &Formula, sig: &Signature, bound: usize, budget: Option<u64>) -> Result<SatVerdict> {
    let red = reduce_exist2(phi, sig)?;
    Ok(match bounded_sat_grounded(&red.psi, &red.signature, bound, budget)? {
        SatVerdict::Sat(b) => SatVerdict::Sat(pull_back(&red, &b, phi)?),
        SatVerdict::UnsatWithin(n) => SatVerdict::Unknown {
            bound: n,
            reason: "the 1-data reduct has no model within the bound; larger models are not ruled out".into(),
        },
        other => other,
    })
}

/// LOCAL(1) over d = 2 with Γ = {11,22,12}: run the full reduction and search models of
/// the two-variable target with at most `bound` elements, diagonal elements included.
///
/// A source model with s elements and k distinct values lifts to a target model with
/// s + k elements. Never answers `Unsat`.
pub fn sat_local1_pipeline(phi: &Formula, sig: &Signature, bound: usize, budget: Option<u64>) -> Result<SatVerdict> {
    let pipe = full_pipeline(phi, sig)?;
    let target = fm::and2(pipe.phi_hat.clone(), fm::exists("x", fm::not(fm::pred(ED, "x"))));
    Ok(match bounded_sat_grounded(&target, &pipe.signature, bound, budget)? {
        SatVerdict::Sat(b) => {
            let a = pipe.project_model(&b)?;
            recheck(&a, phi, "projected")?;
            SatVerdict::Sat(a)
        }
        SatVerdict::UnsatWithin(n) => SatVerdict::Unknown {
            bound: n,
            reason: "the two-variable target has no model within the bound; larger models are not ruled out".into(),
        },
        other => other,
    })
}

/// Renders a verdict status word and the witness size, for reports.
pub fn summary(v: &SatVerdict) -> String {
    match v {
        SatVerdict::Sat(a) => format!("SAT {}", a.len()),
        other => other.status().to_string(),
    }
}
