//! Syntactic conformance, merged contracts and verification reports.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use crate::frontend::{printer, ContractUnit, DocBlock, FunctionDecl, Mutability, Span, TypeExpr};
use crate::sim::{Address, Status, WrapEvent};
use crate::spec::{self, ContractSpec, FunctionSpec, SpecError, SpecId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    /// Nonstandard token interface.
    NTI,
    /// Specification violation.
    SPV,
    /// Integer overflow or underflow on a violating trace.
    IOU,
    /// Verification could not complete.
    VRE,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One transaction of a counterexample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceCall {
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Address>,
    pub sig: String,
    pub args: Vec<String>,
    pub sender: Address,
    pub value: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wraps: Vec<WrapEvent>,
}

impl fmt::Display for TraceCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}({})", self.op, self.sig.split('(').next().unwrap_or(""), self.args.join(", "))?;
        if let Some(to) = self.to {
            write!(f, " on {to}")?;
        }
        write!(f, " from {}", self.sender)?;
        if self.value != "0" {
            write!(f, " value {}", self.value)?;
        }
        if self.status == Status::Reverted {
            f.write_str(" [reverted]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub calls: Vec<TraceCall>,
    /// Storage the scenario started from, when not created by a constructor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Json>,
    /// Monitored contract before and after the violating call.
    pub pre: Json,
    pub post: Json,
    pub wrap_events: Vec<WrapEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub category: Category,
    pub site: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Trace>,
}

impl Finding {
    pub fn nti(site: impl Into<String>, message: impl Into<String>) -> Self {
        Finding { category: Category::NTI, site: site.into(), message: message.into(), trace: None }
    }

    pub fn vre(site: impl Into<String>, message: impl Into<String>) -> Self {
        Finding { category: Category::VRE, site: site.into(), message: message.into(), trace: None }
    }

    /// SPV, or IOU when the trace saw an arithmetic wrap.
    pub fn violation(site: impl Into<String>, message: impl Into<String>, trace: Trace) -> Self {
        let category = if trace.wrap_events.is_empty() { Category::SPV } else { Category::IOU };
        Finding { category, site: site.into(), message: message.into(), trace: Some(trace) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Create,
    Upgrade,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Create => "create",
            Mode::Upgrade => "upgrade",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    PASS,
    FAIL,
}

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub verdict: Verdict,
    pub mode: Mode,
    pub spec_id: SpecId,
    pub findings: Vec<Finding>,
    pub backend: String,
    pub duration_ms: u64,
    /// Free-text diagnosis; never filled automatically.
    #[serde(default)]
    pub suspected_cause: String,
    pub schema: u32,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::PASS
    }

    /// Failed only because verification could not complete.
    pub fn vre_only(&self) -> bool {
        !self.findings.is_empty() && self.findings.iter().all(|f| f.category == Category::VRE)
    }

    pub fn count(&self, c: Category) -> usize {
        self.findings.iter().filter(|f| f.category == c).count()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// SHA-256 of the report JSON with `duration_ms` zeroed.
    pub fn content_hash(&self) -> String {
        let mut r = self.clone();
        r.duration_ms = 0;
        hex::encode(Sha256::digest(serde_json::to_vec(&r).expect("report serializes")))
    }
}

fn var_str(name: &str, ty: &TypeExpr) -> String {
    format!("{ty} {name}")
}

fn public_fns(fs: impl Iterator<Item = FunctionDecl>) -> Vec<FunctionDecl> {
    fs.filter(|f| (f.is_dispatchable() || f.is_fallback()) && f.is_public()).collect()
}

fn shape(f: &FunctionDecl) -> String {
    let rets: Vec<String> = f.returns.iter().map(|p| p.ty.abi_name()).collect();
    let pay = if f.mutability == Mutability::Payable { " payable" } else { "" };
    format!("{}{pay} returns ({})", f.canonical_signature(), rets.join(","))
}

/// Definition-1 syntactic obligations. Constructors are compared in create
/// mode only.
pub fn check_syntactic(s: &ContractSpec, c: &ContractUnit, mode: Mode) -> Vec<Finding> {
    let mut out = Vec::new();
    let sv: Vec<(String, TypeExpr)> = s.vars.iter().map(|v| (v.name.clone(), v.ty.clone())).collect();
    let cv: Vec<(String, TypeExpr)> = c.vars.iter().map(|v| (v.name.clone(), v.ty.clone())).collect();
    for (n, t) in &sv {
        match cv.iter().find(|(m, _)| m == n) {
            None => out.push(Finding::nti(format!("variable {n}"), format!("missing member variable `{}`", var_str(n, t)))),
            Some((_, u)) if u != t => {
                out.push(Finding::nti(format!("variable {n}"), format!("member variable `{n}` has type {u}, expected {t}")))
            }
            _ => {}
        }
    }
    for (n, t) in &cv {
        if !sv.iter().any(|(m, _)| m == n) {
            out.push(Finding::nti(format!("variable {n}"), format!("unexpected member variable `{}`", var_str(n, t))));
        }
    }
    let common_s: Vec<&String> = sv.iter().map(|(n, _)| n).filter(|n| cv.iter().any(|(m, _)| m == *n)).collect();
    let common_c: Vec<&String> = cv.iter().map(|(n, _)| n).filter(|n| sv.iter().any(|(m, _)| m == *n)).collect();
    if let Some(k) = common_s.iter().zip(&common_c).position(|(a, b)| a != b) {
        let ord = sv.iter().position(|(n, _)| n == common_s[k]).unwrap_or(k);
        out.push(Finding::nti(
            format!("variable ordinal {ord}"),
            format!("variable order mismatch at ordinal {ord}: expected `{}`, found `{}`", common_s[k], common_c[k]),
        ));
    }

    let sf = public_fns(s.functions.iter().map(|f| f.decl.clone()));
    let cf = public_fns(c.functions.iter().cloned());
    for f in &sf {
        let sig = f.canonical_signature();
        match cf.iter().find(|g| g.canonical_signature() == sig && g.kind == f.kind) {
            None => out.push(Finding::nti(sig.clone(), format!("missing function `{sig}`"))),
            Some(g) => {
                if shape(g) != shape(f) {
                    out.push(Finding::nti(sig.clone(), format!("`{}` declared as `{}`, expected `{}`", sig, shape(g), shape(f))));
                }
                if g.body.is_none() {
                    out.push(Finding::nti(sig.clone(), format!("function `{sig}` is not implemented")));
                }
            }
        }
    }
    for g in &cf {
        let sig = g.canonical_signature();
        if !sf.iter().any(|f| f.canonical_signature() == sig && f.kind == g.kind) {
            out.push(Finding::nti(sig.clone(), format!("unexpected public function `{sig}`")));
        }
    }
    if mode == Mode::Create {
        if let Some(sc) = s.constructor_spec() {
            let sig = sc.decl.canonical_signature();
            match c.constructor() {
                None if !sc.decl.params.is_empty() => out.push(Finding::nti(sig.clone(), format!("missing constructor `{sig}`"))),
                Some(cc) if cc.canonical_signature() != sig => {
                    out.push(Finding::nti(sig.clone(), format!("constructor declared as `{}`, expected `{sig}`", cc.canonical_signature())))
                }
                Some(cc) if (cc.mutability == Mutability::Payable) != (sc.decl.mutability == Mutability::Payable) => {
                    out.push(Finding::nti(sig.clone(), "constructor payability differs".to_string()))
                }
                _ => {}
            }
        }
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum MergeError {
    #[error("implementation does not conform syntactically ({} finding(s))", .0.len())]
    Precondition(Vec<Finding>),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// An implementation annotated with its specification's obligations.
#[derive(Debug, Clone)]
pub struct MergedContract {
    pub unit: ContractUnit,
    pub spec: ContractSpec,
    pub spec_id: SpecId,
    /// SHA-256 (hex) of the printed implementation.
    pub impl_hash: String,
}

impl MergedContract {
    /// Spec entry for an implementation function, matched by signature.
    pub fn spec_of(&self, f: &FunctionDecl) -> Option<&FunctionSpec> {
        if f.is_constructor() {
            return self.spec.constructor_spec();
        }
        self.spec.functions.iter().find(|s| s.decl.kind == f.kind && s.signature == f.canonical_signature() && s.decl.is_public())
    }

    /// Annotated source text.
    pub fn to_source(&self) -> String {
        printer::print_contract(&self.unit)
    }

    pub fn obligation_count(&self, mode: Mode) -> usize {
        let ctor = self.spec.constructor_spec().map_or(0, |c| c.postconditions.len());
        match mode {
            Mode::Create => self.spec.obligation_count(),
            Mode::Upgrade => self.spec.obligation_count() - ctor,
        }
    }
}

pub fn impl_hash(c: &ContractUnit) -> String {
    hex::encode(Sha256::digest(printer::print_contract(c).as_bytes()))
}

fn doc(lines: Vec<String>) -> Option<DocBlock> {
    if lines.is_empty() {
        None
    } else {
        Some(DocBlock { text: lines.join("\n    "), pos: Span::default() })
    }
}

/// Re-annotates `c` with the obligations of `s`; annotations in `c` are dropped.
pub fn merge(s: &ContractSpec, c: &ContractUnit, mode: Mode) -> Result<MergedContract, MergeError> {
    let findings = check_syntactic(s, c, mode);
    if !findings.is_empty() {
        return Err(MergeError::Precondition(findings));
    }
    let spec_id = spec::spec_id(s)?;
    let mut unit = c.clone();
    let inv = spec::invariant_doc_lines(s);
    unit.doc = if inv.is_empty() { None } else { Some(DocBlock { text: inv.join("\n"), pos: Span::default() }) };
    unit.orphan_docs.clear();
    let mut merged = MergedContract { unit: unit.clone(), spec: s.clone(), spec_id, impl_hash: impl_hash(c) };
    for f in &mut unit.functions {
        if mode == Mode::Upgrade && f.is_constructor() {
            f.doc = None;
            continue;
        }
        f.doc = merged.spec_of(f).and_then(|fs| {
            let ps: Vec<String> = f.params.iter().map(|p| p.name.clone()).collect();
            let rs: Vec<String> = f.returns.iter().map(|p| p.name.clone()).collect();
            doc(spec::function_doc_lines(fs, Some((&ps, &rs))))
        });
    }
    merged.unit = unit;
    Ok(merged)
}

/// A semantic checker for merged contracts.
pub trait Backend {
    fn name(&self) -> String;
    fn check(&mut self, m: &MergedContract, mode: Mode) -> Vec<Finding>;
}

/// Syntactic gate, then the backend over all obligations of `mode`.
pub fn verify(s: &ContractSpec, c: &ContractUnit, b: &mut dyn Backend, mode: Mode) -> Result<Report, SpecError> {
    let start = Instant::now();
    let spec_id = spec::spec_id(s)?;
    let mut findings = check_syntactic(s, c, mode);
    if findings.is_empty() {
        match merge(s, c, mode) {
            Ok(m) => findings = b.check(&m, mode),
            Err(MergeError::Spec(e)) => return Err(e),
            Err(MergeError::Precondition(f)) => findings = f,
        }
    }
    let verdict = if findings.is_empty() { Verdict::PASS } else { Verdict::FAIL };
    Ok(Report {
        verdict,
        mode,
        spec_id,
        findings,
        backend: b.name(),
        duration_ms: start.elapsed().as_millis() as u64,
        suspected_cause: String::new(),
        schema: REPORT_SCHEMA,
    })
}

pub fn verify_creation(s: &ContractSpec, c: &ContractUnit, b: &mut dyn Backend) -> Result<Report, SpecError> {
    verify(s, c, b, Mode::Create)
}

pub fn verify_upgrade(s: &ContractSpec, c: &ContractUnit, b: &mut dyn Backend) -> Result<Report, SpecError> {
    verify(s, c, b, Mode::Upgrade)
}
