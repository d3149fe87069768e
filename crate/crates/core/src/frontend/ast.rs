//! Syntax tree for MiniSol contracts and specification files.
//!
//! Source positions are carried in [`Span`], which compares equal to every
//! other span so that `==` on trees is structural.

use std::fmt;

use ethnum::U256;
use serde::{Serialize, Serializer};

use super::error::Pos;

#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span(pub Pos);

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

fn ser_u256<S: Serializer>(v: &U256, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeExpr {
    Uint256,
    Bool,
    Address,
    Bytes32,
    Bytes,
    Mapping(Box<TypeExpr>, Box<TypeExpr>),
    Array(Box<TypeExpr>),
    Contract(String),
}

impl TypeExpr {
    pub fn is_elementary(&self) -> bool {
        matches!(self, TypeExpr::Uint256 | TypeExpr::Bool | TypeExpr::Address | TypeExpr::Bytes32)
    }

    pub fn is_value_type(&self) -> bool {
        self.is_elementary() || matches!(self, TypeExpr::Contract(_))
    }

    pub fn is_address_like(&self) -> bool {
        matches!(self, TypeExpr::Address | TypeExpr::Contract(_))
    }

    /// Type name as it appears in canonical signatures; contract types
    /// are ABI-encoded as addresses.
    pub fn abi_name(&self) -> String {
        match self {
            TypeExpr::Contract(_) => "address".into(),
            TypeExpr::Array(e) => format!("{}[]", e.abi_name()),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Uint256 => f.write_str("uint256"),
            TypeExpr::Bool => f.write_str("bool"),
            TypeExpr::Address => f.write_str("address"),
            TypeExpr::Bytes32 => f.write_str("bytes32"),
            TypeExpr::Bytes => f.write_str("bytes"),
            TypeExpr::Mapping(k, v) => write!(f, "mapping({k} => {v})"),
            TypeExpr::Array(e) => write!(f, "{e}[]"),
            TypeExpr::Contract(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
}

impl Visibility {
    pub fn is_public(self) -> bool {
        matches!(self, Visibility::Public | Visibility::External)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::External => "external",
            Visibility::Internal => "internal",
            Visibility::Private => "private",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutability {
    Payable,
    View,
    Nonpayable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Value,
    Memory,
    Calldata,
    Storage,
}

impl Location {
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            Location::Value => None,
            Location::Memory => Some("memory"),
            Location::Calldata => Some("calldata"),
            Location::Storage => Some("storage"),
        }
    }
}

/// A verbatim doc-comment block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocBlock {
    pub text: String,
    pub pos: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub visibility: Visibility,
    /// `true` when the visibility keyword was written out.
    pub explicit_visibility: bool,
    pub ordinal: usize,
    pub pos: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Param {
    pub name: String,
    pub ty: TypeExpr,
    pub location: Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionDecl {
    pub name: String,
    pub kind: FunctionKind,
    pub params: Vec<Param>,
    pub returns: Vec<Param>,
    pub visibility: Visibility,
    pub mutability: Mutability,
    pub body: Option<Block>,
    pub doc: Option<DocBlock>,
    /// Number of local slots (params, returns, declared locals); set by the type checker.
    pub frame_size: usize,
    pub pos: Span,
}

impl FunctionDecl {
    pub fn is_constructor(&self) -> bool {
        self.kind == FunctionKind::Constructor
    }

    pub fn is_fallback(&self) -> bool {
        self.kind == FunctionKind::Fallback
    }

    pub fn is_public(&self) -> bool {
        self.visibility.is_public()
    }

    /// Public, non-constructor, non-fallback: callable by signature.
    pub fn is_dispatchable(&self) -> bool {
        self.kind == FunctionKind::Function && self.is_public()
    }

    /// `name(type1,type2,...)` with no spaces.
    pub fn canonical_signature(&self) -> String {
        let name = match self.kind {
            FunctionKind::Constructor => "constructor",
            FunctionKind::Fallback => "",
            FunctionKind::Function => self.name.as_str(),
        };
        signature(name, self.params.iter().map(|p| &p.ty))
    }
}

pub fn signature<'a>(name: &str, tys: impl IntoIterator<Item = &'a TypeExpr>) -> String {
    let parts: Vec<String> = tys.into_iter().map(|t| t.abi_name()).collect();
    format!("{name}({})", parts.join(","))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventParam {
    pub ty: TypeExpr,
    pub indexed: bool,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventDecl {
    pub name: String,
    pub params: Vec<EventParam>,
    pub pos: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContractUnit {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub functions: Vec<FunctionDecl>,
    pub events: Vec<EventDecl>,
    pub doc: Option<DocBlock>,
    /// Doc blocks that precede something other than a contract or function.
    pub orphan_docs: Vec<DocBlock>,
    pub pos: Span,
}

impl ContractUnit {
    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.kind == FunctionKind::Function && f.name == name)
    }

    pub fn constructor(&self) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.is_constructor())
    }

    pub fn fallback(&self) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.is_fallback())
    }

    pub fn dispatchable(&self) -> impl Iterator<Item = &FunctionDecl> {
        self.functions.iter().filter(|f| f.is_dispatchable())
    }

    pub fn by_signature(&self, sig: &str) -> Option<&FunctionDecl> {
        self.dispatchable().find(|f| f.canonical_signature() == sig)
    }

    pub fn event(&self, name: &str) -> Option<&EventDecl> {
        self.events.iter().find(|e| e.name == name)
    }
}

/// Everything parsed from one file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceUnit {
    pub pragmas: Vec<String>,
    pub contracts: Vec<ContractUnit>,
    pub orphan_docs: Vec<DocBlock>,
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalDecl {
    pub ty: TypeExpr,
    pub location: Location,
    pub name: String,
    /// Frame slot; set by the type checker.
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
}

impl AssignOp {
    pub fn token(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StmtKind {
    VarDecl { decl: LocalDecl, init: Option<Expr> },
    TupleDecl { decls: Vec<Option<LocalDecl>>, init: Expr },
    Assign { target: Expr, op: AssignOp, value: Expr },
    IncDec { target: Expr, inc: bool, prefix: bool },
    If { cond: Expr, then: Box<Stmt>, els: Option<Box<Stmt>> },
    For { init: Option<Box<Stmt>>, cond: Option<Expr>, step: Option<Box<Stmt>>, body: Box<Stmt> },
    Require { cond: Expr, msg: Option<Expr> },
    Emit { event: String, args: Vec<Expr> },
    Return(Option<Expr>),
    Expr(Expr),
    Block(Block),
}

/// Type of an expression after checking.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ty {
    #[default]
    Unresolved,
    Void,
    Value(TypeExpr),
    Tuple(Vec<TypeExpr>),
    /// Integer literal not yet fixed to a type; behaves as uint256.
    Literal,
}

impl Ty {
    pub fn value(&self) -> Option<&TypeExpr> {
        match self {
            Ty::Value(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Unresolved,
    Local(usize),
    State(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn token(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }

    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod)
    }

    pub fn is_ordering(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SafeOp {
    Add,
    Sub,
}

impl SafeOp {
    pub fn method(self) -> &'static str {
        match self {
            SafeOp::Add => "add",
            SafeOp::Sub => "sub",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    Forall,
    Exists,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub ty: Ty,
    pub pos: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Self { kind, ty: Ty::Unresolved, pos: Span(pos) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExprKind {
    Number {
        #[serde(serialize_with = "ser_u256")]
        value: U256,
        hex: bool,
    },
    Bool(bool),
    Str(String),
    Ident { name: String, binding: Binding },
    MsgSender,
    MsgValue,
    This,
    /// Unresolved member access; rewritten by the type checker.
    Member(Box<Expr>, String),
    /// Unresolved call; rewritten by the type checker.
    Call(Box<Expr>, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Convert(TypeExpr, Box<Expr>),
    Balance(Box<Expr>),
    Length(Box<Expr>),
    Send { target: Box<Expr>, amount: Box<Expr> },
    LowCall { target: Box<Expr>, value: Option<Box<Expr>>, data: Box<Expr> },
    Delegatecall { target: Box<Expr>, payload: Box<Expr> },
    EncodeWithSignature { sig: String, args: Vec<Expr> },
    Decode { data: Box<Expr>, types: Vec<TypeExpr> },
    SafeMath { op: SafeOp, lhs: Box<Expr>, rhs: Box<Expr> },
    InternalCall { name: String, args: Vec<Expr> },
    ExternalCall {
        target: Box<Expr>,
        contract: String,
        func: String,
        sig: String,
        value: Option<Box<Expr>>,
        args: Vec<Expr>,
    },
    NewArray { elem: TypeExpr, len: Box<Expr> },
    Tuple(Vec<Option<Expr>>),
    Quant { q: Quantifier, vars: Vec<(TypeExpr, String)>, body: Box<Expr> },
}

impl Expr {
    /// Direct subexpressions, in source order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Convert(_, a)
            | ExprKind::Member(a, _)
            | ExprKind::Unary(_, a)
            | ExprKind::Balance(a)
            | ExprKind::Length(a)
            | ExprKind::Decode { data: a, .. }
            | ExprKind::NewArray { len: a, .. }
            | ExprKind::Quant { body: a, .. } => vec![a],
            ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => vec![a, b],
            ExprKind::SafeMath { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Send { target, amount } => vec![target, amount],
            ExprKind::Delegatecall { target, payload } => vec![target, payload],
            ExprKind::LowCall { target, value, data } => std::iter::once(&**target).chain(value.as_deref()).chain(std::iter::once(&**data)).collect(),
            ExprKind::Call(f, args) => std::iter::once(&**f).chain(args).collect(),
            ExprKind::EncodeWithSignature { args, .. } | ExprKind::InternalCall { args, .. } => args.iter().collect(),
            ExprKind::ExternalCall { target, value, args, .. } => std::iter::once(&**target).chain(value.as_deref()).chain(args).collect(),
            ExprKind::Tuple(items) => items.iter().flatten().collect(),
            _ => Vec::new(),
        }
    }

    /// Calls `f` on this expression and every descendant, preorder.
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }
}

impl Stmt {
    /// Calls `f` on every expression in this statement, nested statements included.
    pub fn visit_exprs(&self, f: &mut dyn FnMut(&Expr)) {
        match &self.kind {
            StmtKind::VarDecl { init, .. } => init.iter().for_each(|e| e.visit(f)),
            StmtKind::TupleDecl { init, .. } => init.visit(f),
            StmtKind::Assign { target, value, .. } => {
                target.visit(f);
                value.visit(f);
            }
            StmtKind::IncDec { target, .. } => target.visit(f),
            StmtKind::If { cond, then, els } => {
                cond.visit(f);
                then.visit_exprs(f);
                els.iter().for_each(|s| s.visit_exprs(f));
            }
            StmtKind::For { init, cond, step, body } => {
                init.iter().for_each(|s| s.visit_exprs(f));
                cond.iter().for_each(|e| e.visit(f));
                step.iter().for_each(|s| s.visit_exprs(f));
                body.visit_exprs(f);
            }
            StmtKind::Require { cond, msg } => {
                cond.visit(f);
                msg.iter().for_each(|e| e.visit(f));
            }
            StmtKind::Emit { args, .. } => args.iter().for_each(|e| e.visit(f)),
            StmtKind::Return(e) => e.iter().for_each(|e| e.visit(f)),
            StmtKind::Expr(e) => e.visit(f),
            StmtKind::Block(b) => b.iter().for_each(|s| s.visit_exprs(f)),
        }
    }
}

/// Calls `f` on every expression of every function body in `unit`.
pub fn visit_unit_exprs(unit: &ContractUnit, f: &mut dyn FnMut(&Expr)) {
    for b in unit.functions.iter().filter_map(|x| x.body.as_ref()) {
        b.iter().for_each(|s| s.visit_exprs(f));
    }
}
