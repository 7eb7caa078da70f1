//! JSON formats: structures, signatures and domino systems.

use std::collections::BTreeSet;

use locfo_core::gadgets::DominoSystem;
use locfo_core::structure::{gamma_full, DataStructure, Element, GammaSet, Signature, Value};
use locfo_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest data value accepted in files.
pub const MAX_FILE_VALUE: Value = u32::MAX as Value;

// Field order is alphabetical so that serialized output has sorted keys.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
struct StructureJson {
    d: usize,
    elements: Vec<ElementJson>,
    sigma: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
struct ElementJson {
    id: String,
    labels: Vec<String>,
    values: Vec<Value>,
}

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

/// Parses a structure file. Γ is not part of the format; `gamma` defaults to Γ_d.
pub fn read_structure(text: &str, gamma: Option<&GammaSet>) -> Result<DataStructure> {
    let raw: StructureJson = serde_json::from_str(text).map_err(format_err)?;
    if raw.elements.is_empty() {
        return Err(Error::Format("the universe must be nonempty (\"elements\" is empty)".into()));
    }
    for el in &raw.elements {
        if let Some(v) = el.values.iter().find(|&&v| v > MAX_FILE_VALUE) {
            return Err(Error::Format(format!("element `{}` has value {v} above {MAX_FILE_VALUE}", el.id)));
        }
    }
    let gamma = gamma.cloned().unwrap_or_else(|| gamma_full(raw.d));
    let sig = Signature::new(raw.sigma, raw.d, gamma).map_err(to_format)?;
    let elements = raw.elements.into_iter().map(|e| Element { id: e.id, labels: e.labels, values: e.values }).collect();
    DataStructure::new(sig, elements).map_err(to_format)
}

fn to_format(e: Error) -> Error {
    match e {
        Error::Structural(m) => Error::Format(m),
        other => other,
    }
}

/// Serializes with sorted keys and sorted labels; `read_structure` inverts it.
pub fn write_structure(a: &DataStructure) -> Result<String> {
    let mut elements = Vec::with_capacity(a.len());
    for e in 0..a.len() {
        let values = a.values_of(e).to_vec();
        if let Some(v) = values.iter().find(|&&v| v > MAX_FILE_VALUE) {
            return Err(Error::Format(format!("element `{}` has value {v} above {MAX_FILE_VALUE}", a.id(e))));
        }
        let mut labels: Vec<String> = a.label_names(e).into_iter().map(String::from).collect();
        labels.sort();
        elements.push(ElementJson { id: a.id(e).to_string(), labels, values });
    }
    let raw = StructureJson { d: a.d(), elements, sigma: a.signature().sigma().to_vec() };
    let mut s = serde_json::to_string_pretty(&raw).map_err(format_err)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize, Debug)]
struct SignatureJson {
    d: usize,
    gamma: Vec<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    sigma: Vec<String>,
}

/// A signature as JSON, with an optional threshold bound M.
pub fn signature_json(sig: &Signature, m: Option<usize>) -> serde_json::Value {
    let raw = SignatureJson {
        d: sig.d(),
        gamma: sig.gamma().iter().map(|&(i, j)| [i, j]).collect(),
        m,
        sigma: sig.sigma().to_vec(),
    };
    serde_json::to_value(raw).expect("signature serializes")
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct DominoJson {
    dominoes: Vec<String>,
    h: Vec<[String; 2]>,
    v: Vec<[String; 2]>,
}

/// Parses {"dominoes": [...], "h": [[a,b],...], "v": [[a,b],...]}.
pub fn read_dominoes(text: &str) -> Result<DominoSystem> {
    let raw: DominoJson = serde_json::from_str(text).map_err(format_err)?;
    let pairs = |ps: &[[String; 2]]| -> Vec<(String, String)> { ps.iter().map(|[a, b]| (a.clone(), b.clone())).collect() };
    DominoSystem::new(&raw.dominoes, &pairs(&raw.h), &pairs(&raw.v)).map_err(|e| match e {
        Error::Argument(m) => Error::Format(m),
        other => other,
    })
}

/// Parses "1:1,2:2,1:2" into a Γ set; arity is checked by the signature later.
pub fn parse_gamma(text: &str) -> Result<GammaSet> {
    let mut out = BTreeSet::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (i, j) = part
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("gamma pair `{part}` is not of the form i:j")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::Argument(format!("bad index in gamma pair `{part}`")))
        };
        out.insert((parse(i)?, parse(j)?));
    }
    Ok(out)
}
