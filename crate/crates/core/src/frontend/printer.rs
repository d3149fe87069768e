//! Pretty printer producing source that parses back to an equal tree.

use std::fmt::Write as _;

use super::ast::*;

const INDENT: &str = "    ";

pub fn print_source(unit: &SourceUnit) -> String {
    let mut out = String::new();
    for p in &unit.pragmas {
        let _ = writeln!(out, "pragma {p};");
    }
    for (k, c) in unit.contracts.iter().enumerate() {
        if k > 0 || !unit.pragmas.is_empty() {
            out.push('\n');
        }
        out.push_str(&print_contract(c));
    }
    for d in &unit.orphan_docs {
        out.push('\n');
        out.push_str(&d.text);
        out.push('\n');
    }
    out
}

pub fn print_contract(c: &ContractUnit) -> String {
    let mut out = String::new();
    if let Some(d) = &c.doc {
        out.push_str(&d.text);
        out.push('\n');
    }
    let _ = writeln!(out, "contract {} {{", c.name);
    let mut first = true;
    let mut gap = |out: &mut String| {
        if !first {
            out.push('\n');
        }
        first = false;
    };
    if !c.events.is_empty() {
        gap(&mut out);
        for e in &c.events {
            let _ = writeln!(out, "{INDENT}{}", print_event(e));
        }
    }
    if !c.vars.is_empty() {
        gap(&mut out);
        for v in &c.vars {
            let _ = writeln!(out, "{INDENT}{}", print_var(v));
        }
    }
    for f in &c.functions {
        gap(&mut out);
        out.push_str(&print_function(f, 1));
    }
    for d in &c.orphan_docs {
        gap(&mut out);
        let _ = writeln!(out, "{INDENT}{}", d.text);
    }
    out.push_str("}\n");
    out
}

pub fn print_event(e: &EventDecl) -> String {
    let params: Vec<String> = e
        .params
        .iter()
        .map(|p| {
            let mut s = p.ty.to_string();
            if p.indexed {
                s.push_str(" indexed");
            }
            if !p.name.is_empty() {
                s.push(' ');
                s.push_str(&p.name);
            }
            s
        })
        .collect();
    format!("event {}({});", e.name, params.join(", "))
}

pub fn print_var(v: &VarDecl) -> String {
    if v.explicit_visibility {
        format!("{} {} {};", v.ty, v.visibility.keyword(), v.name)
    } else {
        format!("{} {};", v.ty, v.name)
    }
}

pub fn print_params(ps: &[Param]) -> String {
    let v: Vec<String> = ps
        .iter()
        .map(|p| {
            let mut s = p.ty.to_string();
            if let Some(l) = p.location.keyword() {
                s.push(' ');
                s.push_str(l);
            }
            if !p.name.is_empty() {
                s.push(' ');
                s.push_str(&p.name);
            }
            s
        })
        .collect();
    v.join(", ")
}

/// Function header without the body, e.g. `function f(uint256 a) public returns (bool)`.
pub fn print_header(f: &FunctionDecl) -> String {
    let mut s = match f.kind {
        FunctionKind::Constructor => format!("constructor({})", print_params(&f.params)),
        FunctionKind::Fallback => format!("function ({})", print_params(&f.params)),
        FunctionKind::Function => format!("function {}({})", f.name, print_params(&f.params)),
    };
    s.push(' ');
    s.push_str(f.visibility.keyword());
    match f.mutability {
        Mutability::Payable => s.push_str(" payable"),
        Mutability::View => s.push_str(" view"),
        Mutability::Nonpayable => {}
    }
    if !f.returns.is_empty() {
        let _ = write!(s, " returns ({})", print_params(&f.returns));
    }
    s
}

pub fn print_function(f: &FunctionDecl, depth: usize) -> String {
    let ind = INDENT.repeat(depth);
    let mut out = String::new();
    if let Some(d) = &f.doc {
        let _ = writeln!(out, "{ind}{}", d.text);
    }
    let _ = write!(out, "{ind}{}", print_header(f));
    match &f.body {
        None => out.push_str(";\n"),
        Some(b) => {
            out.push_str(" {\n");
            for s in b {
                stmt(&mut out, s, depth + 1);
            }
            let _ = writeln!(out, "{ind}}}");
        }
    }
    out
}

pub fn print_stmt(s: &Stmt, depth: usize) -> String {
    let mut out = String::new();
    stmt(&mut out, s, depth);
    out
}

fn local(d: &LocalDecl) -> String {
    match d.location.keyword() {
        Some(l) => format!("{} {l} {}", d.ty, d.name),
        None => format!("{} {}", d.ty, d.name),
    }
}

/// Statements that may appear in a `for` header; no trailing `;`.
fn simple(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::VarDecl { decl, init } => match init {
            Some(e) => format!("{} = {}", local(decl), print_expr(e)),
            None => local(decl),
        },
        StmtKind::TupleDecl { decls, init } => {
            let parts: Vec<String> = decls.iter().map(|d| d.as_ref().map(local).unwrap_or_default()).collect();
            format!("({}) = {}", parts.join(", "), print_expr(init))
        }
        StmtKind::Assign { target, op, value } => format!("{} {} {}", print_expr(target), op.token(), print_expr(value)),
        StmtKind::IncDec { target, inc, prefix } => {
            let t = if *inc { "++" } else { "--" };
            if *prefix {
                format!("{t}{}", expr_prec(target, 7))
            } else {
                format!("{}{t}", expr_prec(target, 8))
            }
        }
        StmtKind::Expr(e) => print_expr(e),
        _ => unreachable!("not a simple statement"),
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    let ind = INDENT.repeat(depth);
    out.push_str(&ind);
    stmt_body(out, s, depth);
}

/// Writes `s` assuming the indentation for its first line is already emitted.
fn stmt_body(out: &mut String, s: &Stmt, depth: usize) {
    let ind = INDENT.repeat(depth);
    match &s.kind {
        StmtKind::Block(b) => {
            out.push_str("{\n");
            for s in b {
                stmt(out, s, depth + 1);
            }
            let _ = writeln!(out, "{ind}}}");
        }
        StmtKind::If { cond, then, els } => {
            let _ = write!(out, "if ({})", print_expr(cond));
            branch(out, then, depth);
            if let Some(e) = els {
                if matches!(then.kind, StmtKind::Block(_)) {
                    out.pop();
                    out.push_str(" else");
                } else {
                    let _ = write!(out, "{ind}else");
                }
                if matches!(e.kind, StmtKind::If { .. }) {
                    out.push(' ');
                    stmt_body(out, e, depth);
                } else {
                    branch(out, e, depth);
                }
            }
        }
        StmtKind::For { init, cond, step, body } => {
            let i = init.as_deref().map(simple).unwrap_or_default();
            let c = cond.as_ref().map(print_expr).unwrap_or_default();
            let st = step.as_deref().map(simple).unwrap_or_default();
            let _ = write!(out, "for ({i}; {c}; {st})");
            branch(out, body, depth);
        }
        StmtKind::Require { cond, msg } => match msg {
            Some(m) => {
                let _ = writeln!(out, "require({}, {});", print_expr(cond), print_expr(m));
            }
            None => {
                let _ = writeln!(out, "require({});", print_expr(cond));
            }
        },
        StmtKind::Emit { event, args } => {
            let _ = writeln!(out, "emit {event}({});", list(args));
        }
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", print_expr(e));
        }
        _ => {
            let _ = writeln!(out, "{};", simple(s));
        }
    }
}

/// Body of an `if`/`for`/`else`: a block stays on the header line, any
/// other statement goes on its own line one level deeper.
fn branch(out: &mut String, s: &Stmt, depth: usize) {
    if matches!(s.kind, StmtKind::Block(_)) {
        out.push(' ');
        stmt_body(out, s, depth);
    } else {
        out.push('\n');
        stmt(out, s, depth + 1);
    }
}

fn list(args: &[Expr]) -> String {
    args.iter().map(print_expr).collect::<Vec<_>>().join(", ")
}

pub fn print_expr(e: &Expr) -> String {
    expr_prec(e, 0)
}

/// Precedence of the outermost operator; atoms and postfix forms are 8,
/// prefix operators 7 and quantifiers 0.
fn own_prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(..) => 7,
        ExprKind::Quant { .. } => 0,
        _ => 8,
    }
}

fn expr_prec(e: &Expr, min: u8) -> String {
    let s = expr_raw(e);
    if own_prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn expr_raw(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Number { value, hex: true } => format!("0x{value:x}"),
        ExprKind::Number { value, hex: false } => value.to_string(),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Str(s) => quote(s),
        ExprKind::Ident { name, .. } => name.clone(),
        ExprKind::MsgSender => "msg.sender".into(),
        ExprKind::MsgValue => "msg.value".into(),
        ExprKind::This => "this".into(),
        ExprKind::Member(b, m) => format!("{}.{m}", expr_prec(b, 8)),
        ExprKind::Call(c, args) => format!("{}({})", expr_prec(c, 8), list(args)),
        ExprKind::Index(b, i) => format!("{}[{}]", expr_prec(b, 8), print_expr(i)),
        ExprKind::Unary(UnOp::Not, x) => format!("!{}", expr_prec(x, 7)),
        ExprKind::Unary(UnOp::Neg, x) => format!("-{}", expr_prec(x, 7)),
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            format!("{} {} {}", expr_prec(l, p), op.token(), expr_prec(r, p + 1))
        }
        ExprKind::Convert(t, x) => format!("{t}({})", print_expr(x)),
        ExprKind::Balance(x) => format!("{}.balance", expr_prec(x, 8)),
        ExprKind::Length(x) => format!("{}.length", expr_prec(x, 8)),
        ExprKind::Send { target, amount } => format!("{}.send({})", expr_prec(target, 8), print_expr(amount)),
        ExprKind::LowCall { target, value, data } => match value {
            Some(v) => format!("{}.call.value({})({})", expr_prec(target, 8), print_expr(v), print_expr(data)),
            None => format!("{}.call({})", expr_prec(target, 8), print_expr(data)),
        },
        ExprKind::Delegatecall { target, payload } => format!("{}.delegatecall({})", expr_prec(target, 8), print_expr(payload)),
        ExprKind::EncodeWithSignature { sig, args } => {
            let mut s = format!("abi.encodeWithSignature({}", quote(sig));
            for a in args {
                s.push_str(", ");
                s.push_str(&print_expr(a));
            }
            s.push(')');
            s
        }
        ExprKind::Decode { data, types } => {
            let ts: Vec<String> = types.iter().map(|t| t.to_string()).collect();
            format!("abi.decode({}, ({}))", print_expr(data), ts.join(", "))
        }
        ExprKind::SafeMath { op, lhs, rhs } => format!("{}.{}({})", expr_prec(lhs, 8), op.method(), print_expr(rhs)),
        ExprKind::InternalCall { name, args } => format!("{name}({})", list(args)),
        ExprKind::ExternalCall { target, func, value, args, .. } => match value {
            Some(v) => format!("{}.{func}.value({})({})", expr_prec(target, 8), print_expr(v), list(args)),
            None => format!("{}.{func}({})", expr_prec(target, 8), list(args)),
        },
        ExprKind::NewArray { elem, len } => format!("new {elem}[]({})", print_expr(len)),
        ExprKind::Tuple(items) => {
            let parts: Vec<String> = items.iter().map(|i| i.as_ref().map(print_expr).unwrap_or_default()).collect();
            if parts.len() == 1 {
                format!("({},)", parts[0])
            } else {
                format!("({})", parts.join(", "))
            }
        }
        ExprKind::Quant { q, vars, body } => {
            let kw = match q {
                Quantifier::Forall => "forall",
                Quantifier::Exists => "exists",
            };
            let vs: Vec<String> = vars.iter().map(|(t, n)| format!("{t} {n}")).collect();
            format!("{kw} ({}) {}", vs.join(", "), print_expr(body))
        }
    }
}
