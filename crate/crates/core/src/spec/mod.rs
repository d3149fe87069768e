//! Specification files: annotations, typed expressions, canonical text and SpecId.

pub mod annot;
pub mod expr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frontend::{self, printer, ContractUnit, Diagnostics, DocBlock, EventDecl, FunctionDecl, Pos, Span, VarDecl};

pub use annot::{AnnotKind, RawAnnotation};
pub use expr::{Scope, SpecExpr, SpecKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("{pos}: SpecSyntaxError: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: SpecScopeError: {message}")]
    Scope { pos: Pos, message: String },
    #[error("{pos}: SpecPlacementError: {message}")]
    Placement { pos: Pos, message: String },
    #[error("{pos}: SpecTypeError: {message}")]
    Type { pos: Pos, message: String },
    #[error("specification digest is all-zero")]
    ZeroDigest,
    #[error("{0}")]
    Frontend(Diagnostics),
}

impl SpecError {
    pub fn pos(&self) -> Option<Pos> {
        match self {
            SpecError::Syntax { pos, .. } | SpecError::Scope { pos, .. } | SpecError::Placement { pos, .. } | SpecError::Type { pos, .. } => Some(*pos),
            SpecError::Frontend(d) => Some(d.first().pos),
            SpecError::ZeroDigest => None,
        }
    }
}

/// One checked annotation. The position is informational and ignored by `==`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub expr: SpecExpr,
    pub pos: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpec {
    /// Header only; the body is always `None` and the doc is dropped.
    pub decl: FunctionDecl,
    pub signature: String,
    pub postconditions: Vec<Annotation>,
    /// Event names, in first-mention order, without duplicates.
    pub emits: Vec<String>,
}

impl FunctionSpec {
    pub fn is_constructor(&self) -> bool {
        self.decl.is_constructor()
    }

    pub fn allows_event(&self, name: &str) -> bool {
        self.emits.iter().any(|e| e == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractSpec {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub events: Vec<EventDecl>,
    pub invariants: Vec<Annotation>,
    /// Every declared function in source order, constructor included.
    pub functions: Vec<FunctionSpec>,
}

impl ContractSpec {
    pub fn constructor_spec(&self) -> Option<&FunctionSpec> {
        self.functions.iter().find(|f| f.is_constructor())
    }

    pub fn function_specs(&self) -> impl Iterator<Item = &FunctionSpec> {
        self.functions.iter().filter(|f| !f.is_constructor())
    }

    /// Public or external non-constructor function by canonical signature.
    pub fn by_signature(&self, sig: &str) -> Option<&FunctionSpec> {
        self.functions.iter().find(|f| f.decl.is_dispatchable() && f.signature == sig)
    }

    pub fn obligation_count(&self) -> usize {
        self.invariants.len() + self.functions.iter().map(|f| f.postconditions.len()).sum::<usize>()
    }

    pub fn canonical_text(&self) -> String {
        canonicalize(self)
    }

    pub fn id(&self) -> Result<SpecId, SpecError> {
        spec_id(self)
    }
}

fn misplaced(a: &RawAnnotation, target: &str) -> SpecError {
    SpecError::Placement { pos: a.pos, message: format!("`@notice {}` is not allowed on {target}", a.kind.keyword()) }
}

fn parse_annotation(a: &RawAnnotation, scope: &Scope<'_>) -> Result<Annotation, SpecError> {
    let e = frontend::parser::parse_expression(&a.text, a.pos)
        .map_err(|e| SpecError::Syntax { pos: e.pos, message: e.message })?;
    let expr = expr::lower(&e, scope, a.pos)?;
    Ok(Annotation { expr, pos: Span(a.pos) })
}

fn parse_event_name(a: &RawAnnotation, unit: &ContractUnit) -> Result<String, SpecError> {
    let name = a.text.trim();
    let ident = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !ident {
        return Err(SpecError::Syntax { pos: a.pos, message: format!("`emits` expects an event name, found `{name}`") });
    }
    if unit.event(name).is_none() {
        return Err(SpecError::Scope { pos: a.pos, message: format!("unknown event `{name}`") });
    }
    Ok(name.to_string())
}

fn function_spec(f: &FunctionDecl, unit: &ContractUnit) -> Result<FunctionSpec, SpecError> {
    let mut postconditions = Vec::new();
    let mut emits: Vec<String> = Vec::new();
    if let Some(doc) = &f.doc {
        let scope = Scope { vars: &unit.vars, params: &f.params, returns: &f.returns, in_function: true };
        for a in annot::parse_doc(doc)? {
            match a.kind {
                AnnotKind::Invariant => return Err(misplaced(&a, "a function")),
                AnnotKind::Postcondition => postconditions.push(parse_annotation(&a, &scope)?),
                AnnotKind::Emits => {
                    let n = parse_event_name(&a, unit)?;
                    if !emits.contains(&n) {
                        emits.push(n);
                    }
                }
            }
        }
    }
    let mut decl = f.clone();
    decl.body = None;
    decl.doc = None;
    decl.frame_size = decl.params.len() + decl.returns.len();
    Ok(FunctionSpec { signature: f.canonical_signature(), decl, postconditions, emits })
}

/// Assembles a specification from a parsed spec-file contract.
pub fn build_spec(unit: &ContractUnit) -> Result<ContractSpec, SpecError> {
    let mut invariants = Vec::new();
    if let Some(doc) = &unit.doc {
        let scope = Scope { vars: &unit.vars, params: &[], returns: &[], in_function: false };
        for a in annot::parse_doc(doc)? {
            match a.kind {
                AnnotKind::Invariant => invariants.push(parse_annotation(&a, &scope)?),
                _ => return Err(misplaced(&a, "a contract")),
            }
        }
    }
    for d in &unit.orphan_docs {
        if let Some(a) = annot::parse_doc(d)?.first() {
            return Err(SpecError::Placement {
                pos: a.pos,
                message: format!("`@notice {}` must annotate a contract or function", a.kind.keyword()),
            });
        }
    }
    let functions = unit.functions.iter().map(|f| function_spec(f, unit)).collect::<Result<Vec<_>, _>>()?;
    Ok(ContractSpec { name: unit.name.clone(), vars: unit.vars.clone(), events: unit.events.clone(), invariants, functions })
}

/// Parses a spec file; the last contract in the file is the one used.
pub fn parse_spec(source: &str, origin: &str) -> Result<ContractSpec, SpecError> {
    let unit = frontend::parse_unit(source, origin).map_err(SpecError::Frontend)?;
    build_spec(&unit)
}

fn doc_block(lines: &[String], indent: &str) -> Option<DocBlock> {
    if lines.is_empty() {
        return None;
    }
    Some(DocBlock { text: lines.join(&format!("\n{indent}")), pos: Span::default() })
}

/// Annotation lines for a function, postconditions first.
pub fn function_doc_lines(f: &FunctionSpec, rename: Option<(&[String], &[String])>) -> Vec<String> {
    let mut out: Vec<String> = f
        .postconditions
        .iter()
        .map(|p| {
            let e = match rename {
                Some((ps, rs)) => p.expr.rename(ps, rs),
                None => p.expr.clone(),
            };
            format!("/// @notice postcondition {e}")
        })
        .collect();
    out.extend(f.emits.iter().map(|e| format!("/// @notice emits {e}")));
    out
}

pub fn invariant_doc_lines(s: &ContractSpec) -> Vec<String> {
    s.invariants.iter().map(|i| format!("/// @notice invariant {}", i.expr)).collect()
}

/// Deterministic text form: `///` annotations, normalized types, no bodies.
pub fn canonicalize(s: &ContractSpec) -> String {
    let functions = s
        .functions
        .iter()
        .map(|f| {
            let mut d = f.decl.clone();
            d.doc = doc_block(&function_doc_lines(f, None), "    ");
            d
        })
        .collect();
    let unit = ContractUnit {
        name: s.name.clone(),
        vars: s.vars.clone(),
        functions,
        events: s.events.clone(),
        doc: doc_block(&invariant_doc_lines(s), ""),
        orphan_docs: Vec::new(),
        pos: Span::default(),
    };
    printer::print_contract(&unit)
}

/// 32-byte content address of a specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpecId(pub [u8; 32]);

impl SpecId {
    pub const ZERO: SpecId = SpecId([0; 32]);

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 32]
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for SpecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid spec id `{0}`: expected 64 hex digits")]
pub struct SpecIdParseError(pub String);

impl FromStr for SpecId {
    type Err = SpecIdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        let mut out = [0u8; 32];
        hex::decode_to_slice(digits, &mut out).map_err(|_| SpecIdParseError(s.to_string()))?;
        Ok(SpecId(out))
    }
}

impl Serialize for SpecId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for SpecId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn digest_text(text: &str) -> Result<SpecId, SpecError> {
    let id = SpecId(Sha256::digest(text.as_bytes()).into());
    if id.is_zero() {
        return Err(SpecError::ZeroDigest);
    }
    Ok(id)
}

pub fn spec_id(s: &ContractSpec) -> Result<SpecId, SpecError> {
    digest_text(&canonicalize(s))
}

/// Source form of a specification; parses back to an equal spec.
pub fn to_source(s: &ContractSpec) -> String {
    canonicalize(s)
}
