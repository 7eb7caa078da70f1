use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use locfo::io::{parse_gamma, read_dominoes, read_structure, signature_json, write_structure};
use locfo_core::error::Error;
use locfo_core::eval::models;
use locfo_core::gadgets::{build_phi_grid_2loc, build_phi_h};
use locfo_core::structure::{gamma_full, DataStructure, Element, Signature, Value};
use locfo_core::syntax::parse_formula;
use proptest::prelude::*;
use serde_json::Value as Json;
use tempfile::TempDir;

fn locfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locfo")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

const LEADERS: &str = r#"{"d": 2, "sigma": ["Leader"], "elements": [
  {"id": "l", "labels": ["Leader"], "values": [5, 5]},
  {"id": "b", "labels": [], "values": [1, 5]},
  {"id": "c", "labels": [], "values": [2, 5]}
]}"#;

fn read(path: &Path) -> DataStructure {
    read_structure(&fs::read_to_string(path).unwrap(), None).unwrap()
}

#[test]
fn check_exit_codes_and_witnesses() {
    let dir = Dir::new();
    let s = dir.file("s.json", LEADERS);
    let yes = dir.file("yes.fo", "forall y. exists x. (Leader(x) & x ~1:2 y)\n");
    let no = dir.file("no.fo", "# every element leads\nforall x. Leader(x)");
    assert_eq!(code(&locfo(&["check", "-s", &s, "-f", &yes])), 0);
    let o = locfo(&["check", "-s", &s, "-f", &no]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("counterexample: x=b"), "{}", stdout(&o));

    let ex = dir.file("ex.fo", "exists x. exists y. (x != y & x ~2:2 y & !Leader(x))");
    let o = locfo(&["--json", "check", "-s", &s, "-f", &ex]);
    assert_eq!(code(&o), 0);
    let report: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["command"], "check");
    assert_eq!(report["verdict"], "TRUE");
    assert_eq!(report["witness"], serde_json::json!({"x": "b", "y": "l"}));
    assert!(report["timings"]["total_ms"].is_number());
}

#[test]
fn check_with_restricted_gamma() {
    let dir = Dir::new();
    let s = dir.file("s.json", LEADERS);
    let f = dir.file("f.fo", "exists x. x ~1:2 x");
    assert_eq!(code(&locfo(&["check", "-s", &s, "-f", &f])), 0);
    // ~1:2 is outside the restricted relation set
    assert_eq!(code(&locfo(&["check", "-s", &s, "-f", &f, "--gamma", "1:1,2:2"])), 65);
    assert_eq!(code(&locfo(&["check", "-s", &s, "-f", &f, "--gamma", "1:1,2:2", "--lax"])), 0);
    assert_eq!(code(&locfo(&["check", "-s", &s, "-f", &f, "--gamma", "1:3"])), 64);
    assert_eq!(code(&locfo(&["check", "-s", &s, "-f", &f, "--gamma", "one"])), 64);
}

#[test]
fn error_exit_codes() {
    let dir = Dir::new();
    let s = dir.file("s.json", LEADERS);
    let f = dir.file("f.fo", "exists x. Leader(x)");
    let bad = dir.file("bad.fo", "exists x. (Leader(x)");
    let open = dir.file("open.fo", "Leader(x)");
    let unknown = dir.file("unknown.fo", "exists x. Boss(x)");
    let empty = dir.file("empty.json", r#"{"d": 1, "sigma": [], "elements": []}"#);
    let extra = dir.file("extra.json", r#"{"d": 1, "sigma": [], "elements": [], "gamma": []}"#);
    let missing = dir.path("missing.json");
    let missing = missing.to_str().unwrap();

    assert_eq!(code(&locfo(&["check", "-s", &s, "-f", &bad])), 65);
    assert_eq!(code(&locfo(&["check", "-s", &s, "-f", &open])), 65);
    assert_eq!(code(&locfo(&["check", "-s", &s, "-f", &unknown])), 65);
    assert_eq!(code(&locfo(&["check", "-s", &empty, "-f", &f])), 65);
    assert_eq!(code(&locfo(&["check", "-s", &extra, "-f", &f])), 65);
    assert_eq!(code(&locfo(&["check", "-s", missing, "-f", &f])), 66);
    assert_eq!(code(&locfo(&["check", "-s", &s])), 64);
    assert_eq!(code(&locfo(&["frobnicate"])), 64);
    assert_eq!(code(&locfo(&["--help"])), 0);
    assert_eq!(code(&locfo(&["--version"])), 0);

    let o = locfo(&["--json", "check", "-s", &s, "-f", &bad]);
    let report: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["verdict"], "ERROR");
    assert!(report["error"].as_str().unwrap().contains("syntax"));
}

#[test]
fn view_output() {
    let dir = Dir::new();
    let s = dir.file(
        "s.json",
        r#"{"d": 2, "sigma": [], "elements": [
            {"id": "a", "labels": [], "values": [1, 2]},
            {"id": "b", "labels": [], "values": [3, 1]},
            {"id": "c", "labels": [], "values": [3, 2]},
            {"id": "d", "labels": [], "values": [1, 4]},
            {"id": "e", "labels": [], "values": [3, 5]}]}"#,
    );
    let o = locfo(&["view", "-s", &s, "-e", "a", "-r", "1", "--gamma", "1:1,2:2,1:2"]);
    assert_eq!(code(&o), 0);
    let out: Json = serde_json::from_str(&stdout(&o)).unwrap();
    let ids: Vec<&str> = out["structure"]["elements"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["a", "b", "c", "d"]);
    assert_eq!(out["freshened"].as_array().unwrap().len(), 3);
    assert_eq!(out["freshened"][0], serde_json::json!({"id": "b", "field": 1}));

    let target = dir.path("view.json");
    let o = locfo(&["view", "-s", &s, "-e", "e", "-r", "0", "-o", target.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(&target).ids(), ["e"]);
    let side: Json = serde_json::from_str(&fs::read_to_string(dir.path("view.json.freshened.json")).unwrap()).unwrap();
    assert_eq!(side, serde_json::json!([]));

    assert_eq!(code(&locfo(&["view", "-s", &s, "-e", "zz", "-r", "1"])), 65);
}

#[test]
fn translate_pipelines() {
    let dir = Dir::new();
    let nf = dir.file("nf.fo", "exists y. P(y)");
    let o = locfo(&["translate", "-f", &nf, "--pipeline", "nf"]);
    assert_eq!(code(&o), 0);
    assert_eq!(parse_formula(&stdout(&o)).unwrap(), parse_formula("atleast[1] y. P(y)").unwrap());

    let two = dir.file("two.fo", "atleast[2] y. P(y)");
    let sig_path = dir.path("sig.json");
    let out_path = dir.path("out.fo");
    let o = locfo(&[
        "translate",
        "-f",
        &two,
        "--pipeline",
        "twovar",
        "-o",
        out_path.to_str().unwrap(),
        "--signature-out",
        sig_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
    let sig: Json = serde_json::from_str(&fs::read_to_string(&sig_path).unwrap()).unwrap();
    assert_eq!(sig["d"], 0);
    assert!(sig["m"].as_u64().unwrap() >= 1);
    assert!(sig["sigma"].as_array().unwrap().len() > 1);
    assert!(parse_formula(&fs::read_to_string(&out_path).unwrap()).is_ok());

    let loc = dir.file("loc.fo", "exists x. loc[1] x { exists y. (x ~1:2 y & P(y)) }");
    let o = locfo(&["--json", "translate", "-f", &loc, "--pipeline", "loc1"]);
    assert_eq!(code(&o), 0);
    let report: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["signature"]["gamma"], serde_json::json!([[1, 1], [2, 2]]));
    assert!(parse_formula(report["formula"].as_str().unwrap()).is_ok());

    let e2 = dir.file("e2.fo", "exists x1. loc[2] x1 { exists y. (x1 ~1:2 y) }");
    let o = locfo(&["translate", "-f", &e2, "--pipeline", "exist2", "--signature-out", sig_path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let sig: Json = serde_json::from_str(&fs::read_to_string(&sig_path).unwrap()).unwrap();
    assert_eq!(sig["d"], 1);
    assert!(sig.get("m").is_none());

    let o = locfo(&["translate", "-f", &e2, "--pipeline", "exist1"]);
    assert_eq!(code(&o), 65);
}

#[test]
fn sat_verdicts() {
    let dir = Dir::new();
    let sat = dir.file("sat.fo", "exists x. loc[1] x { exists y. (y != x & x ~1:1 y & P(y)) }");
    let witness = dir.path("w.json");
    let o = locfo(&["sat", "-f", &sat, "--fragment", "exist1", "--witness", witness.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let w = read(&witness);
    assert!(models(&w, &parse_formula(&fs::read_to_string(&sat).unwrap()).unwrap()).unwrap());

    let unsat = dir.file("unsat.fo", "exists x. loc[1] x { P(x) & !P(x) }");
    assert_eq!(code(&locfo(&["sat", "-f", &unsat, "--fragment", "exist1"])), 1);
    let o = locfo(&["--json", "sat", "-f", &unsat, "--max-size", "2"]);
    assert_eq!(code(&o), 2);
    let report: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["verdict"], "UNSAT_WITHIN");
    assert_eq!(report["bound"], 2);

    let raw = dir.file("raw.fo", "exists x. exists y. (x != y & x ~1:2 y)");
    let o = locfo(&["--json", "sat", "-f", &raw, "--max-size", "3", "--seq"]);
    assert_eq!(code(&o), 0);
    let report: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["witness"]["elements"].as_array().unwrap().len(), 2);

    let e2 = dir.file("e2.fo", "exists x1. loc[2] x1 { exists y. (y != x1 & x1 ~1:2 y) }");
    assert_eq!(code(&locfo(&["sat", "-f", &e2, "--fragment", "exist2", "--max-size", "3"])), 0);
    let l1 = dir.file("l1.fo", "exists x. loc[1] x { x ~1:2 x & P(x) }");
    assert_eq!(code(&locfo(&["sat", "-f", &l1, "--fragment", "loc1", "--max-size", "1"])), 0);
    assert_eq!(code(&locfo(&["sat", "-f", &sat, "--max-size", "0"])), 64);
}

#[test]
fn gadgets() {
    let dir = Dir::new();
    let out = dir.path("a2m.json");
    assert_eq!(code(&locfo(&["gadget", "a2m", "--m", "1", "-o", out.to_str().unwrap()])), 0);
    let a = read(&out);
    assert_eq!(a.len(), 4);
    let a = a.with_gamma([(1, 1), (2, 2), (1, 2)]).unwrap();
    assert!(models(&a, &build_phi_grid_2loc()).unwrap());

    let o = locfo(&["gadget", "formula", "grid2loc"]);
    assert_eq!(parse_formula(&stdout(&o)).unwrap(), build_phi_grid_2loc());
    let o = locfo(&["gadget", "formula", "phiH"]);
    assert_eq!(parse_formula(&stdout(&o)).unwrap(), build_phi_h());

    let board = dir.file("board.json", r#"{"dominoes": ["Da", "Db"], "h": [["Da", "Db"], ["Db", "Da"]], "v": [["Da", "Db"], ["Db", "Da"]]}"#);
    let o = locfo(&["--json", "gadget", "domino", "--file", &board, "--search-tiling"]);
    assert_eq!(code(&o), 0);
    let report: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["period"], 2);
    let dead = dir.file("dead.json", r#"{"dominoes": ["Dx", "Dy"], "h": [], "v": [["Dx", "Dx"]]}"#);
    assert_eq!(code(&locfo(&["gadget", "domino", "--file", &dead, "--search-tiling", "--max-m", "3"])), 1);
    let o = locfo(&["gadget", "domino", "--file", &dead]);
    assert_eq!(code(&o), 0);
    assert!(parse_formula(&stdout(&o)).is_ok());
    let clash = dir.file("clash.json", r#"{"dominoes": ["UH0"], "h": [], "v": []}"#);
    assert_eq!(code(&locfo(&["gadget", "domino", "--file", &clash])), 65);
}

#[test]
fn reader_errors() {
    let big = format!(r#"{{"d": 1, "sigma": [], "elements": [{{"id": "a", "labels": [], "values": [{}]}}]}}"#, u64::from(u32::MAX) + 1);
    assert!(matches!(read_structure(&big, None), Err(Error::Format(m)) if m.contains("`a`")));
    let dup = r#"{"d": 0, "sigma": [], "elements": [{"id": "a", "labels": [], "values": []}, {"id": "a", "labels": [], "values": []}]}"#;
    assert!(matches!(read_structure(dup, None), Err(Error::Format(_))));
    let arity = r#"{"d": 2, "sigma": [], "elements": [{"id": "a", "labels": [], "values": [1]}]}"#;
    assert!(matches!(read_structure(arity, None), Err(Error::Format(_))));
    let label = r#"{"d": 0, "sigma": ["P"], "elements": [{"id": "a", "labels": ["Q"], "values": []}]}"#;
    assert!(read_structure(label, None).is_err());
    assert!(matches!(read_structure("[]", None), Err(Error::Format(_))));
    assert!(matches!(read_dominoes(r#"{"dominoes": []}"#), Err(Error::Format(_))));
    assert_eq!(parse_gamma("").unwrap().len(), 0);
    assert_eq!(parse_gamma(" 1:2 , 2:2").unwrap().into_iter().collect::<Vec<_>>(), vec![(1, 2), (2, 2)]);
    assert!(parse_gamma("0:1").is_err());
    assert!(parse_gamma("1-2").is_err());
}

#[test]
fn signature_shape() {
    let sig = Signature::full(["P"], 1).unwrap();
    assert_eq!(signature_json(&sig, None), serde_json::json!({"d": 1, "gamma": [[1, 1]], "sigma": ["P"]}));
    assert_eq!(signature_json(&sig, Some(2))["m"], 2);
}

fn structure_strategy() -> impl Strategy<Value = DataStructure> {
    (0usize..=3, 0usize..=3).prop_flat_map(|(d, width)| {
        let names: Vec<String> = ["P", "Q", "Leader"][..width].iter().map(|s| s.to_string()).collect();
        let element = (proptest::collection::vec(any::<bool>(), width), proptest::collection::vec(1..=u32::MAX as Value, d));
        proptest::collection::vec(element, 1..6).prop_map(move |rows| {
            let sig = Signature::new(names.clone(), d, gamma_full(d)).unwrap();
            let elems = rows
                .iter()
                .enumerate()
                .map(|(k, (bits, vals))| {
                    let labels: Vec<&str> = names.iter().zip(bits).filter(|(_, b)| **b).map(|(n, _)| n.as_str()).collect();
                    Element::new(&format!("e{k}"), labels, vals)
                })
                .collect();
            DataStructure::new(sig, elems).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn structure_files_round_trip(a in structure_strategy()) {
        let text = write_structure(&a).unwrap();
        let back = read_structure(&text, None).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(write_structure(&back).unwrap(), text);
    }

    #[test]
    fn domino_files_round_trip(n in 1usize..5, hbits in any::<u32>(), vbits in any::<u32>()) {
        let names: Vec<String> = (0..n).map(|k| format!("D{k}")).collect();
        let pairs = |bits: u32| -> Vec<(String, String)> {
            (0..n * n).filter(|k| bits >> k & 1 == 1).map(|k| (names[k / n].clone(), names[k % n].clone())).collect()
        };
        let (h, v) = (pairs(hbits), pairs(vbits));
        let text = serde_json::json!({"dominoes": names, "h": h, "v": v}).to_string();
        let sys = read_dominoes(&text).unwrap();
        prop_assert_eq!(&sys.dominoes, &names);
        prop_assert_eq!(sys.h.len(), h.len());
        prop_assert_eq!(sys.v.len(), v.len());
    }
}

#[test]
fn grid_gadget_checks_through_files() {
    let dir = Dir::new();
    let a = dir.path("a2m3.json");
    let f = dir.path("grid3loc.lfo");
    assert_eq!(code(&locfo(&["gadget", "a2m", "--m", "3", "-o", a.to_str().unwrap()])), 0);
    assert_eq!(code(&locfo(&["gadget", "formula", "grid3loc", "-o", f.to_str().unwrap()])), 0);
    let o = locfo(&["check", "-s", a.to_str().unwrap(), "-f", f.to_str().unwrap(), "--gamma", "1:1,2:2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn six_element_view() {
    let dir = Dir::new();
    let s = dir.file(
        "six.json",
        r#"{"d": 2, "sigma": [], "elements": [
            {"id": "a", "labels": [], "values": [1, 2]},
            {"id": "b", "labels": [], "values": [1, 3]},
            {"id": "c", "labels": [], "values": [3, 2]},
            {"id": "d", "labels": [], "values": [5, 6]},
            {"id": "e", "labels": [], "values": [4, 3]},
            {"id": "f", "labels": [], "values": [2, 7]}]}"#,
    );
    let o = locfo(&["--json", "view", "-s", &s, "-e", "a", "-r", "2", "--gamma", "1:1,2:2,1:2,2:1"]);
    assert_eq!(code(&o), 0);
    let report: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["universe"], serde_json::json!(["a", "b", "c", "f"]));
    assert_eq!(report["freshened"], serde_json::json!([]));
}
