//! Command-line front end.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value as Json};

use locfo_core::eval::{self, Compiled, EvalOptions};
use locfo_core::existred::{reduce_exist1, reduce_exist2};
use locfo_core::formula::{type_check, Formula};
use locfo_core::gadgets::{
    build_a2m, build_phi_d, build_phi_grid_2loc, build_phi_grid_3loc, build_phi_h, build_phi_v, build_phi_w,
    periodic_tiling_search,
};
use locfo_core::localred::full_pipeline;
use locfo_core::locality::view;
use locfo_core::normalform::{counter_encoding, threshold_nf};
use locfo_core::sat::{self, SatVerdict, DEFAULT_MONADIC_CAP};
use locfo_core::structure::{gamma_diag, gamma_full, DataStructure, GammaSet, Interpretation, Signature};
use locfo_core::syntax::{parse_formula, print_formula};
use locfo_core::Error;

use crate::io::{parse_gamma, read_dominoes, read_structure, signature_json, write_structure};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_FILE: i32 = 66;
pub const EXIT_CONTRACT: i32 = 70;

#[derive(Parser, Debug)]
#[command(name = "locfo", version, about = "Local first-order logic over data structures")]
pub struct Cli {
    /// Print a machine-readable JSON report instead of plain output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Model-check a formula on a structure (exit 0 true, 1 false).
    Check(CheckArgs),
    /// Extract the r-view of an element.
    View(ViewArgs),
    /// Run one of the reductions and print the resulting formula.
    Translate(TranslateArgs),
    /// Satisfiability (exit 0 SAT, 1 UNSAT, 2 UNSAT_WITHIN or UNKNOWN).
    Sat(SatArgs),
    /// Grid gadgets, grid formulas and domino systems.
    Gadget {
        #[command(subcommand)]
        command: GadgetCommand,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct SigArgs {
    /// Relation set as i:j pairs, e.g. 1:1,2:2,1:2. Defaults to all pairs.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Unary predicates, comma separated. Defaults to those in the formula.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Number of data values per element. Defaults to the largest index in the formula.
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(short = 's', long)]
    pub structure: PathBuf,
    #[arg(short = 'f', long)]
    pub formula: PathBuf,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Evaluate relation atoms outside Γ instead of rejecting them.
    #[arg(long)]
    pub lax: bool,
}

#[derive(Args, Debug)]
pub struct ViewArgs {
    #[arg(short = 's', long)]
    pub structure: PathBuf,
    #[arg(short = 'e', long)]
    pub element: String,
    #[arg(short = 'r', long)]
    pub radius: usize,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Write the view here; the freshened list goes to <out>.freshened.json.
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    Nf,
    Twovar,
    Loc1,
    Exist2,
    Exist1,
}

#[derive(Args, Debug)]
pub struct TranslateArgs {
    #[arg(short = 'f', long)]
    pub formula: PathBuf,
    #[arg(long, value_enum)]
    pub pipeline: PipelineKind,
    #[command(flatten)]
    pub sig: SigArgs,
    /// Write the translated formula here instead of stdout.
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
    /// Write the target signature (and M) as JSON.
    #[arg(long)]
    pub signature_out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragmentArg {
    Exist1,
    Exist2,
    Loc1,
    Raw,
}

#[derive(Args, Debug)]
pub struct SatArgs {
    #[arg(short = 'f', long)]
    pub formula: PathBuf,
    #[arg(long, value_enum, default_value = "raw")]
    pub fragment: FragmentArg,
    /// Largest model size searched. For loc1 this bounds the input model; the target search
    /// allows for the added diagonal elements.
    #[arg(long, default_value_t = 4)]
    pub max_size: usize,
    /// Largest data value for raw enumeration (default max-size times d).
    #[arg(long)]
    pub max_val: Option<usize>,
    /// Sequential search. The search is always sequential; accepted for compatibility.
    #[arg(long)]
    pub seq: bool,
    /// Dump the witness structure here.
    #[arg(long)]
    pub witness: Option<PathBuf>,
    /// Largest monadic search size for exist1.
    #[arg(long, default_value_t = DEFAULT_MONADIC_CAP)]
    pub cap: usize,
    /// Conflict budget for the propositional searches (exist2, loc1).
    #[arg(long)]
    pub budget: Option<u64>,
    #[command(flatten)]
    pub sig: SigArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GadgetFormula {
    Grid3loc,
    Grid2loc,
    #[value(name = "phiH")]
    PhiH,
    #[value(name = "phiV")]
    PhiV,
    #[value(name = "phiW")]
    PhiW,
}

#[derive(Subcommand, Debug)]
pub enum GadgetCommand {
    /// The structure A_2m.
    A2m {
        #[arg(long)]
        m: usize,
        #[arg(short = 'o', long)]
        out: Option<PathBuf>,
    },
    /// Print one of the grid formulas.
    Formula {
        #[arg(value_enum)]
        name: GadgetFormula,
        #[arg(short = 'o', long)]
        out: Option<PathBuf>,
    },
    /// Read a domino system; print its formula or search for a periodic tiling.
    Domino {
        #[arg(long)]
        file: PathBuf,
        /// Search for a periodic tiling (exit 0 found, 1 none within the bound).
        #[arg(long)]
        search_tiling: bool,
        #[arg(long, default_value_t = 4)]
        max_m: usize,
    },
}

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    File(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::File(_) => EXIT_FILE,
            CliError::Core(Error::Contract(_)) => EXIT_CONTRACT,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::File(m) => write!(f, "file error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// What a command produced: exit code, verdict word, plain text for stdout, and fields
/// for the JSON report.
struct Report {
    code: i32,
    verdict: String,
    text: String,
    witness: Option<Json>,
    details: Map<String, Json>,
}

impl Report {
    fn new(code: i32, verdict: impl Into<String>, text: impl Into<String>) -> Self {
        Report { code, verdict: verdict.into(), text: text.into(), witness: None, details: Map::new() }
    }

    fn detail(mut self, key: &str, value: Json) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::File(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::File(format!("{}: {e}", path.display())))
}

fn load_formula(path: &Path) -> CliResult<Formula> {
    Ok(parse_formula(&read_file(path)?)?)
}

fn gamma_flag(text: Option<&str>, d: usize) -> CliResult<Option<GammaSet>> {
    let Some(t) = text else { return Ok(None) };
    let g = parse_gamma(t).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some((i, j)) = g.iter().find(|&&(i, j)| i > d || j > d) {
        return Err(CliError::Usage(format!("gamma pair {i}:{j} exceeds d = {d}")));
    }
    Ok(Some(g))
}

fn load_structure(path: &Path, gamma: Option<&str>) -> CliResult<DataStructure> {
    let a = read_structure(&read_file(path)?, None)?;
    match gamma_flag(gamma, a.d())? {
        Some(g) => Ok(a.with_gamma(g)?),
        None => Ok(a),
    }
}

fn structure_json(a: &DataStructure) -> CliResult<Json> {
    let text = write_structure(a)?;
    Ok(serde_json::from_str(&text).expect("writer emits valid JSON"))
}

/// Signature for formula-only commands: flags first, then what the formula uses.
fn formula_signature(phi: &Formula, args: &SigArgs, default_d: usize, default_gamma: fn(usize) -> GammaSet) -> CliResult<Signature> {
    let sigma: Vec<String> = match &args.sigma {
        Some(s) => s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect(),
        None => phi.predicates().into_iter().collect(),
    };
    let used = phi.relations().into_iter().map(|(i, j)| i.max(j)).max().unwrap_or(0);
    let d = args.d.unwrap_or(default_d.max(used));
    let gamma = gamma_flag(args.gamma.as_deref(), d)?.unwrap_or_else(|| default_gamma(d));
    Signature::new(sigma, d, gamma).map_err(|e| CliError::Usage(e.to_string()))
}

/// Parses argv, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    let name = command_name(&cli.command);
    let outcome = dispatch(&cli.command);
    let millis = start.elapsed().as_secs_f64() * 1000.0;
    match outcome {
        Ok(report) => {
            if cli.json {
                let mut out = Map::new();
                out.insert("command".into(), json!(name));
                out.insert("verdict".into(), json!(report.verdict));
                if let Some(w) = report.witness {
                    out.insert("witness".into(), w);
                }
                out.insert("timings".into(), json!({ "total_ms": millis }));
                out.extend(report.details);
                println!("{}", Json::Object(out));
            } else if !report.text.is_empty() {
                print!("{}", report.text);
                if !report.text.ends_with('\n') {
                    println!();
                }
            }
            report.code
        }
        Err(e) => {
            eprintln!("locfo {name}: {e}");
            if cli.json {
                println!("{}", json!({ "command": name, "verdict": "ERROR", "error": e.to_string(), "timings": { "total_ms": millis } }));
            }
            e.exit_code()
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Check(_) => "check",
        Command::View(_) => "view",
        Command::Translate(_) => "translate",
        Command::Sat(_) => "sat",
        Command::Gadget { .. } => "gadget",
    }
}

fn dispatch(c: &Command) -> CliResult<Report> {
    match c {
        Command::Check(a) => check(a),
        Command::View(a) => view_cmd(a),
        Command::Translate(a) => translate(a),
        Command::Sat(a) => sat_cmd(a),
        Command::Gadget { command } => gadget(command),
    }
}

/// The leading block of like quantifiers of a sentence, with its body.
fn leading_block(phi: &Formula) -> Option<(bool, Vec<String>, &Formula)> {
    let exists = match phi {
        Formula::Exists(..) => true,
        Formula::Forall(..) => false,
        _ => return None,
    };
    let mut vars = Vec::new();
    let mut cur = phi;
    while let (Formula::Exists(x, g), true) | (Formula::Forall(x, g), false) = (cur, exists) {
        vars.push(x.clone());
        cur = g;
    }
    Some((exists, vars, cur))
}

/// An assignment to the leading block making its body `want`, if one is found cheaply.
fn block_assignment(a: &DataStructure, phi: &Formula, opts: EvalOptions, want: bool) -> CliResult<Option<Vec<(String, String)>>> {
    let Some((_, vars, body)) = leading_block(phi) else { return Ok(None) };
    let total = (a.len() as u128).checked_pow(vars.len() as u32).unwrap_or(u128::MAX);
    if total > 1_000_000 {
        return Ok(None);
    }
    let c = Compiled::new(body, a.signature(), opts)?;
    let mut pos = vec![0usize; vars.len()];
    loop {
        let interp: Interpretation = vars.iter().zip(&pos).map(|(v, &e)| (v.clone(), a.id(e).to_string())).collect();
        if c.eval(a, &interp)? == want {
            return Ok(Some(vars.iter().zip(&pos).map(|(v, &e)| (v.clone(), a.id(e).to_string())).collect()));
        }
        let mut k = 0;
        while k < pos.len() && pos[k] + 1 == a.len() {
            pos[k] = 0;
            k += 1;
        }
        if k == pos.len() {
            return Ok(None);
        }
        pos[k] += 1;
    }
}

fn check(args: &CheckArgs) -> CliResult<Report> {
    let a = load_structure(&args.structure, args.gamma.as_deref())?;
    let phi = load_formula(&args.formula)?;
    type_check(&phi, a.signature())?;
    if !phi.is_sentence() {
        let free: Vec<String> = phi.free_vars().into_iter().collect();
        return Err(Error::Argument(format!("formula has free variables: {}", free.join(", "))).into());
    }
    let opts = EvalOptions { strict_gamma: !args.lax };
    let truth = eval::models_with(&a, &phi, opts)?;
    let mut text = format!("{truth}\n");
    let mut report_assignment = None;
    if let Some((exists, _, _)) = leading_block(&phi) {
        if exists == truth {
            if let Some(asg) = block_assignment(&a, &phi, opts, exists)? {
                let label = if exists { "witness" } else { "counterexample" };
                let shown: Vec<String> = asg.iter().map(|(x, e)| format!("{x}={e}")).collect();
                text.push_str(&format!("{label}: {}\n", shown.join(", ")));
                report_assignment = Some(Json::Object(asg.into_iter().map(|(x, e)| (x, json!(e))).collect()));
            }
        }
    }
    let mut r = Report::new(if truth { 0 } else { 1 }, if truth { "TRUE" } else { "FALSE" }, text);
    r.witness = report_assignment;
    Ok(r)
}

fn view_cmd(args: &ViewArgs) -> CliResult<Report> {
    let a = load_structure(&args.structure, args.gamma.as_deref())?;
    let v = view(&a, &args.element, args.radius)?;
    let fresh: Vec<Json> = v.freshened.iter().map(|(id, j)| json!({ "id": id, "field": j })).collect();
    let structure = structure_json(&v.structure)?;
    let text = match &args.out {
        Some(path) => {
            write_file(path, &write_structure(&v.structure)?)?;
            let mut side = path.as_os_str().to_owned();
            side.push(".freshened.json");
            write_file(Path::new(&side), &format!("{}\n", serde_json::to_string_pretty(&fresh).expect("json")))?;
            String::new()
        }
        None => format!("{}\n", serde_json::to_string_pretty(&json!({ "structure": structure, "freshened": fresh })).expect("json")),
    };
    let ids: Vec<&str> = v.structure.ids().iter().map(String::as_str).collect();
    Ok(Report::new(0, "OK", text)
        .detail("universe", json!(ids))
        .detail("freshened", Json::Array(fresh))
        .detail("view", structure))
}

fn translate(args: &TranslateArgs) -> CliResult<Report> {
    let phi = load_formula(&args.formula)?;
    let (out, sig, m) = match args.pipeline {
        PipelineKind::Nf | PipelineKind::Twovar => {
            let sig = formula_signature(&phi, &args.sig, 0, |_| GammaSet::new())?;
            let sigma = sig.sigma().to_vec();
            if args.pipeline == PipelineKind::Nf {
                let free: Vec<String> = phi.free_vars().into_iter().collect();
                if free.len() > 1 {
                    return Err(Error::Argument("threshold normal form takes at most one free variable".into()).into());
                }
                let nf = threshold_nf(&phi, &sigma, free.first().map(String::as_str))?;
                (nf.to_formula(), sig, Some(nf.m))
            } else {
                let (sigma2, f) = counter_encoding(&phi, &sigma)?;
                let m = sigma2.len() - sigma.len();
                (f, Signature::new(sigma2, 0, [])?, Some(m))
            }
        }
        PipelineKind::Loc1 => {
            let sig = formula_signature(&phi, &args.sig, 2, |_| gamma_diag())?;
            let p = full_pipeline(&phi, &sig)?;
            (p.phi_hat, p.signature, Some(p.m))
        }
        PipelineKind::Exist2 => {
            let sig = formula_signature(&phi, &args.sig, 2, gamma_full)?;
            let red = reduce_exist2(&phi, &sig)?;
            (red.psi, red.signature, None)
        }
        PipelineKind::Exist1 => {
            let sig = formula_signature(&phi, &args.sig, 1, gamma_full)?;
            let red = reduce_exist1(&phi, &sig)?;
            (red.psi, red.signature, None)
        }
    };
    let text = format!("{}\n", print_formula(&out));
    let sig_json = signature_json(&sig, m);
    if let Some(path) = &args.signature_out {
        write_file(path, &format!("{}\n", serde_json::to_string_pretty(&sig_json).expect("json")))?;
    }
    let shown = match &args.out {
        Some(path) => {
            write_file(path, &text)?;
            String::new()
        }
        None => text.clone(),
    };
    let mut r = Report::new(0, "OK", shown).detail("signature", sig_json).detail("formula", json!(text.trim_end()));
    if let Some(m) = m {
        r = r.detail("m", json!(m));
    }
    Ok(r)
}

fn sat_cmd(args: &SatArgs) -> CliResult<Report> {
    if args.max_size == 0 {
        return Err(CliError::Usage("--max-size must be at least 1".into()));
    }
    let phi = load_formula(&args.formula)?;
    let verdict = match args.fragment {
        FragmentArg::Raw => {
            let sig = formula_signature(&phi, &args.sig, 1, gamma_full)?;
            sat::bounded_sat(&phi, &sig, args.max_size, args.max_val)?
        }
        FragmentArg::Exist1 => {
            let sig = formula_signature(&phi, &args.sig, 1, gamma_full)?;
            sat::sat_exist_local1(&phi, &sig, args.cap)?
        }
        FragmentArg::Exist2 => {
            let sig = formula_signature(&phi, &args.sig, 2, gamma_full)?;
            sat::sat_exist_local2(&phi, &sig, args.max_size, args.budget)?
        }
        FragmentArg::Loc1 => {
            let sig = formula_signature(&phi, &args.sig, 2, |_| gamma_diag())?;
            // s elements carry at most 2s values, each needing one diagonal element
            sat::sat_local1_pipeline(&phi, &sig, 3 * args.max_size, args.budget)?
        }
    };
    let code = match &verdict {
        SatVerdict::Sat(_) => 0,
        SatVerdict::Unsat => 1,
        SatVerdict::UnsatWithin(_) | SatVerdict::Unknown { .. } => 2,
    };
    let mut text = format!("{verdict}\n");
    let mut witness = None;
    if let SatVerdict::Sat(a) = &verdict {
        witness = Some(structure_json(a)?);
        match &args.witness {
            Some(path) => write_file(path, &write_structure(a)?)?,
            None => text.push_str(&write_structure(a)?),
        }
    }
    let mut r = Report::new(code, verdict.status(), text);
    r.witness = witness;
    match &verdict {
        SatVerdict::UnsatWithin(n) => r = r.detail("bound", json!(n)),
        SatVerdict::Unknown { bound, reason } => r = r.detail("bound", json!(bound)).detail("reason", json!(reason)),
        _ => {}
    }
    Ok(r)
}

fn gadget(c: &GadgetCommand) -> CliResult<Report> {
    match c {
        GadgetCommand::A2m { m, out } => {
            let a = build_a2m(*m)?;
            let text = write_structure(&a)?;
            let shown = match out {
                Some(path) => {
                    write_file(path, &text)?;
                    String::new()
                }
                None => text,
            };
            Ok(Report::new(0, "OK", shown).detail("elements", json!(a.len())))
        }
        GadgetCommand::Formula { name, out } => {
            let f = match name {
                GadgetFormula::Grid3loc => build_phi_grid_3loc(),
                GadgetFormula::Grid2loc => build_phi_grid_2loc(),
                GadgetFormula::PhiH => build_phi_h(),
                GadgetFormula::PhiV => build_phi_v(),
                GadgetFormula::PhiW => build_phi_w(),
            };
            let text = format!("{}\n", print_formula(&f));
            let shown = match out {
                Some(path) => {
                    write_file(path, &text)?;
                    String::new()
                }
                None => text.clone(),
            };
            Ok(Report::new(0, "OK", shown).detail("formula", json!(text.trim_end())))
        }
        GadgetCommand::Domino { file, search_tiling, max_m } => {
            let system = read_dominoes(&read_file(file)?)?;
            if !search_tiling {
                let text = format!("{}\n", print_formula(&build_phi_d(&system)));
                return Ok(Report::new(0, "OK", text.clone()).detail("formula", json!(text.trim_end())));
            }
            match periodic_tiling_search(&system, *max_m) {
                Some((m, tau)) => {
                    let rows: Vec<Vec<&str>> = (0..m)
                        .map(|j| (0..m).map(|i| system.dominoes[tau[i + m * j]].as_str()).collect())
                        .collect();
                    let mut text = format!("tiling with period {m}\n");
                    for row in &rows {
                        text.push_str(&row.join(" "));
                        text.push('\n');
                    }
                    Ok(Report::new(0, "TILING", text).detail("period", json!(m)).detail("tiling", json!(rows)))
                }
                None => Ok(Report::new(1, "NO_TILING", format!("no periodic tiling with period at most {max_m}\n"))
                    .detail("max_m", json!(max_m))),
            }
        }
    }
}
