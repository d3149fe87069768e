//! Generation of the trusted proxy for an implementation and of the fixed
//! on-chain registry contract.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::frontend::printer::{print_event, print_header, print_stmt, print_var};
use crate::frontend::{self, ContractUnit, Diagnostics, ExprKind, FunctionDecl, Mutability, Param, StmtKind, TypeExpr};
use crate::spec::SpecId;

pub const REGISTRY_SOURCE: &str = crate::corpus::REGISTRY;

pub const PROXY_NAME: &str = "Proxy";

/// Bookkeeping variables appended after the mirrored ones.
pub const INJECTED_VARS: [&str; 4] = ["registry", "spec", "implementation", "author"];

fn injected_types() -> [TypeExpr; 4] {
    [TypeExpr::Contract("Registry".into()), TypeExpr::Bytes32, TypeExpr::Address, TypeExpr::Address]
}

const RESERVED_FUNCTIONS: [&str; 2] = ["upgrade", "_upgrade"];
const CTOR_PARAMS: [&str; 3] = ["_registry", "_spec", "_implementation"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProxyError {
    #[error("implementation declares {what} `{name}`, which the proxy reserves")]
    NameClash { what: &'static str, name: String },
    #[error("spec id must be nonzero")]
    ZeroSpecId,
    #[error("generated proxy does not type-check:\n{0}")]
    Generated(Diagnostics),
}

/// Parsed registry contract.
pub fn generate_registry() -> ContractUnit {
    frontend::parse_unit(REGISTRY_SOURCE, "registry.sol").expect("registry source is valid")
}

/// What a proxy for `base` consists of.
#[derive(Debug, Clone)]
pub struct ProxyPlan {
    pub base: ContractUnit,
    pub spec_id: SpecId,
    /// Canonical signatures of the forwarding functions, in declaration order.
    pub forwarded: Vec<String>,
    pub injected_vars: Vec<(String, TypeExpr)>,
    /// Contracts declared alongside `base`, used for its contract-typed members.
    pub interfaces: Vec<ContractUnit>,
}

/// Generated proxy: the checked unit and the text it was parsed from.
#[derive(Debug, Clone)]
pub struct GeneratedProxy {
    pub unit: ContractUnit,
    pub source: String,
}

impl ProxyPlan {
    pub fn new(base: &ContractUnit, spec_id: SpecId) -> Result<Self, ProxyError> {
        if spec_id.is_zero() {
            return Err(ProxyError::ZeroSpecId);
        }
        for v in &base.vars {
            if INJECTED_VARS.contains(&v.name.as_str()) {
                return Err(ProxyError::NameClash { what: "member variable", name: v.name.clone() });
            }
        }
        for f in &base.functions {
            if RESERVED_FUNCTIONS.contains(&f.name.as_str()) {
                return Err(ProxyError::NameClash { what: "function", name: f.name.clone() });
            }
        }
        if let Some(p) = base.constructor().and_then(|c| c.params.iter().find(|p| CTOR_PARAMS.contains(&p.name.as_str()))) {
            return Err(ProxyError::NameClash { what: "constructor parameter", name: p.name.clone() });
        }
        let injected_vars = INJECTED_VARS.iter().map(|n| n.to_string()).zip(injected_types()).collect();
        Ok(ProxyPlan {
            base: base.clone(),
            spec_id,
            forwarded: base.dispatchable().map(FunctionDecl::canonical_signature).collect(),
            injected_vars,
            interfaces: Vec::new(),
        })
    }

    /// Source text in the layout of the reference proxy.
    pub fn source(&self) -> String {
        let c = &self.base;
        let helpers = ctor_helpers(c);
        let mut out = String::new();
        for name in self.referenced_contracts(&helpers) {
            match self.interfaces.iter().find(|i| i.name == name) {
                Some(i) => out.push_str(&interface_stub(i)),
                None => {
                    let _ = writeln!(out, "contract {name} {{\n}}");
                }
            }
            out.push('\n');
        }
        let _ = writeln!(out, "contract {PROXY_NAME} {{");
        let events = emitted_events(c, &helpers);
        if !events.is_empty() {
            for e in c.events.iter().filter(|e| events.contains(&e.name)) {
                let _ = writeln!(out, "    {}", print_event(e));
            }
            out.push('\n');
        }
        for v in &c.vars {
            let _ = writeln!(out, "    {}", print_var(v));
        }
        for f in c.dispatchable() {
            out.push('\n');
            out.push_str(&forwarder(f));
        }
        if let Some(f) = c.fallback() {
            let head = FunctionDecl { body: None, doc: None, ..f.clone() };
            let _ = write!(out, "\n    {} {{\n        (bool success, ) = implementation.delegatecall(\"\");\n        require(success);\n    }}\n", print_header(&head));
        }
        out.push('\n');
        for (n, t) in &self.injected_vars {
            let _ = writeln!(out, "    {t} {n};");
        }
        out.push('\n');
        out.push_str(&self.constructor());
        out.push_str(
            "
    function upgrade(address new_implementation) public {
        _upgrade(new_implementation);
    }

    function _upgrade(address new_implementation) internal {
        require(msg.sender == author);
        bytes32 spec_id = registry.get_spec(new_implementation);
        require(spec_id == spec);
        implementation = new_implementation;
    }
",
        );
        for f in c.functions.iter().filter(|f| helpers.contains(&f.name)) {
            out.push('\n');
            out.push_str(&frontend::printer::print_function(&FunctionDecl { doc: None, ..f.clone() }, 1));
        }
        out.push_str("}\n");
        out
    }

    /// Contract types the proxy text mentions, other than the registry.
    fn referenced_contracts(&self, helpers: &BTreeSet<String>) -> BTreeSet<String> {
        fn add(t: &TypeExpr, out: &mut BTreeSet<String>) {
            match t {
                TypeExpr::Contract(n) if n != "Registry" => {
                    out.insert(n.clone());
                }
                TypeExpr::Mapping(k, v) => {
                    add(k, out);
                    add(v, out);
                }
                TypeExpr::Array(e) => add(e, out),
                _ => {}
            }
        }
        let mut out = BTreeSet::new();
        let c = &self.base;
        c.vars.iter().for_each(|v| add(&v.ty, &mut out));
        let copied = c.functions.iter().filter(|f| f.is_dispatchable() || f.is_constructor() || helpers.contains(&f.name));
        for f in copied {
            f.params.iter().chain(&f.returns).for_each(|p| add(&p.ty, &mut out));
        }
        out
    }

    fn constructor(&self) -> String {
        let ctor = self.base.constructor();
        let mut params = vec!["Registry _registry".to_string(), "bytes32 _spec".into(), "address _implementation".into()];
        if let Some(f) = ctor.filter(|f| !f.params.is_empty()) {
            params.push(frontend::printer::print_params(&f.params));
        }
        let payable = if ctor.is_some_and(|f| f.mutability == Mutability::Payable) { " payable" } else { "" };
        let mut out = format!(
            "    constructor({}) public{payable} {{
        require(_spec != bytes32(0));
        registry = _registry;
        spec = _spec;
        author = msg.sender;
        _upgrade(_implementation);
",
            params.join(", ")
        );
        for s in ctor.and_then(|f| f.body.as_ref()).into_iter().flatten() {
            out.push_str(&print_stmt(s, 2));
        }
        out.push_str("    }\n");
        out
    }

    pub fn generate(&self) -> Result<GeneratedProxy, ProxyError> {
        let source = self.source();
        let unit = frontend::parse_unit(&source, "proxy.sol").map_err(ProxyError::Generated)?;
        Ok(GeneratedProxy { unit, source })
    }
}

pub fn generate_proxy(c: &ContractUnit, spec_id: SpecId) -> Result<GeneratedProxy, ProxyError> {
    ProxyPlan::new(c, spec_id)?.generate()
}

/// Proxy for the last contract of `source`; earlier contracts serve as interfaces.
pub fn generate_proxy_for_source(source: &str, origin: &str, spec_id: SpecId) -> Result<GeneratedProxy, ProxyGenError> {
    let mut su = frontend::parse_source(source, origin)?;
    let c = su.contracts.pop().ok_or(ProxyGenError::NoContract)?;
    let mut plan = ProxyPlan::new(&c, spec_id)?;
    plan.interfaces = su.contracts;
    Ok(plan.generate()?)
}

#[derive(Debug, Error)]
pub enum ProxyGenError {
    #[error(transparent)]
    Parse(#[from] Diagnostics),
    #[error("no contract in source")]
    NoContract,
    #[error(transparent)]
    Proxy(#[from] ProxyError),
}

/// Public functions of `c` as bodiless declarations.
fn interface_stub(c: &ContractUnit) -> String {
    let mut out = format!("contract {} {{\n", c.name);
    for f in c.dispatchable() {
        let _ = writeln!(out, "    {};", print_header(f));
    }
    out.push_str("}\n");
    out
}

/// A name not among `taken`, starting from `base`.
fn fresh(base: &str, taken: &BTreeSet<&str>) -> String {
    let mut n = base.to_string();
    while taken.contains(n.as_str()) {
        n.push('_');
    }
    n
}

fn forwarder(f: &FunctionDecl) -> String {
    let mut params: Vec<Param> = f.params.clone();
    for (k, p) in params.iter_mut().enumerate() {
        if p.name.is_empty() {
            p.name = format!("arg{k}");
        }
    }
    let taken: BTreeSet<&str> = params.iter().map(|p| p.name.as_str()).collect();
    let ok = fresh("success", &taken);
    let data = fresh("bytesAnswer", &taken);
    let head = FunctionDecl { params: params.clone(), body: None, doc: None, ..f.clone() };
    let args: String = params.iter().map(|p| format!(", {}", p.name)).collect();
    let mut out = format!(
        "    {} {{
        (bool {ok}, bytes memory {data}) = implementation.delegatecall(abi.encodeWithSignature(\"{}\"{args}));
        require({ok});
",
        print_header(&head),
        f.canonical_signature()
    );
    if !f.returns.is_empty() {
        let tys: Vec<String> = f.returns.iter().map(|p| p.ty.to_string()).collect();
        let _ = writeln!(out, "        return abi.decode({data}, ({}));", tys.join(", "));
    }
    out.push_str("    }\n");
    out
}

/// Non-public functions reachable from the constructor body.
fn ctor_helpers(c: &ContractUnit) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let mut work: Vec<&FunctionDecl> = c.constructor().into_iter().collect();
    while let Some(f) = work.pop() {
        let mut called = Vec::new();
        for s in f.body.iter().flatten() {
            s.visit_exprs(&mut |e| {
                if let ExprKind::InternalCall { name, .. } = &e.kind {
                    called.push(name.clone());
                }
            });
        }
        for name in called {
            if let Some(g) = c.functions.iter().find(|g| g.name == name && !g.is_public()) {
                if found.insert(name) {
                    work.push(g);
                }
            }
        }
    }
    found
}

/// Events emitted by the constructor or by `helpers`.
fn emitted_events(c: &ContractUnit, helpers: &BTreeSet<String>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let bodies = c.functions.iter().filter(|f| f.is_constructor() || helpers.contains(&f.name)).filter_map(|f| f.body.as_ref());
    fn walk(s: &crate::frontend::Stmt, out: &mut BTreeSet<String>) {
        match &s.kind {
            StmtKind::Emit { event, .. } => {
                out.insert(event.clone());
            }
            StmtKind::If { then, els, .. } => {
                walk(then, out);
                els.iter().for_each(|e| walk(e, out));
            }
            StmtKind::For { body, .. } => walk(body, out),
            StmtKind::Block(b) => b.iter().for_each(|x| walk(x, out)),
            _ => {}
        }
    }
    for b in bodies {
        b.iter().for_each(|s| walk(s, &mut out));
    }
    out
}
