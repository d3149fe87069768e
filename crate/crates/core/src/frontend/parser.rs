//! Recursive-descent parser producing an unresolved [`SourceUnit`].

use ethnum::U256;

use super::ast::*;
use super::error::{FrontendError, Pos};
use super::lexer::{tokenize, Tok, Token};

type PResult<T> = Result<T, FrontendError>;

pub fn parse_source_syntax(src: &str) -> PResult<SourceUnit> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, i: 0, orphans: Vec::new() };
    p.source_unit()
}

/// Parses a standalone expression (annotation text).
pub fn parse_expression(src: &str, base: Pos) -> PResult<Expr> {
    let toks = tokenize(src).map_err(|e| shift(e, base))?;
    let mut p = Parser { toks, i: 0, orphans: Vec::new() };
    let e = p.expr().map_err(|e| shift(e, base))?;
    if !p.at_eof() {
        return Err(shift(FrontendError::parse(p.pos(), format!("unexpected {}", p.describe())), base));
    }
    Ok(e)
}

fn shift(mut e: FrontendError, base: Pos) -> FrontendError {
    if e.pos.line == 1 {
        e.pos.col += base.col.saturating_sub(1);
    }
    e.pos.line += base.line.saturating_sub(1);
    e
}

const ELEMENTARY: &[&str] = &["uint", "uint256", "bool", "address", "bytes32", "bytes"];

struct Parser {
    toks: Vec<Token>,
    i: usize,
    orphans: Vec<DocBlock>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let j = (self.i + k).min(self.toks.len() - 1);
        &self.toks[j].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::HexNumber(s) => format!("number `0x{s}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Doc(_) => "doc comment".into(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(FrontendError::parse(self.pos(), msg))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.advance();
                Ok(s)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn take_doc(&mut self) -> Option<DocBlock> {
        let mut last = None;
        let mut orphans = Vec::new();
        while let Tok::Doc(text) = self.peek().clone() {
            let pos = self.pos();
            self.advance();
            if let Some(prev) = last.replace(DocBlock { text, pos: Span(pos) }) {
                orphans.push(prev);
            }
        }
        self.orphans.extend(orphans);
        last
    }

    fn source_unit(&mut self) -> PResult<SourceUnit> {
        let mut pragmas = Vec::new();
        let mut contracts = Vec::new();
        let mut orphan_docs = Vec::new();
        loop {
            let doc = self.take_doc();
            if self.at_eof() {
                self.orphans.extend(doc);
                break;
            }
            if self.is_kw("pragma") {
                self.orphans.extend(doc);
                let start = self.pos();
                self.advance();
                let mut words = Vec::new();
                while !self.is_punct(";") {
                    if self.at_eof() {
                        return Err(FrontendError::parse(start, "unterminated pragma"));
                    }
                    let t = self.advance();
                    words.push(match t.tok {
                        Tok::Ident(s) | Tok::Number(s) => s,
                        Tok::Punct(p) => p.to_string(),
                        _ => return Err(FrontendError::parse(t.pos, "unexpected token in pragma")),
                    });
                }
                self.advance();
                pragmas.push(join_pragma(&words));
                continue;
            }
            if self.is_kw("contract") || self.is_kw("interface") {
                contracts.push(self.contract(doc)?);
                continue;
            }
            return self.err(format!("expected `contract`, found {}", self.describe()));
        }
        orphan_docs.append(&mut self.orphans);
        Ok(SourceUnit { pragmas, contracts, orphan_docs })
    }

    fn contract(&mut self, doc: Option<DocBlock>) -> PResult<ContractUnit> {
        let pos = self.pos();
        if self.is_kw("interface") {
            return self.err("interfaces are not supported; declare a contract with bodiless functions");
        }
        self.expect_kw("contract")?;
        let name = self.ident()?;
        if self.is_kw("is") {
            return self.err("inheritance is not supported");
        }
        self.expect_punct("{")?;
        let mut unit = ContractUnit {
            name,
            vars: Vec::new(),
            functions: Vec::new(),
            events: Vec::new(),
            doc,
            orphan_docs: Vec::new(),
            pos: Span(pos),
        };
        loop {
            let doc = self.take_doc();
            if self.eat_punct("}") {
                self.orphans.extend(doc);
                break;
            }
            if self.at_eof() {
                return self.err("unterminated contract body");
            }
            if self.is_kw("function") || self.is_kw("constructor") {
                let f = self.function(doc)?;
                unit.functions.push(f);
            } else if self.is_kw("event") {
                self.orphans.extend(doc);
                let e = self.event()?;
                unit.events.push(e);
            } else if self.is_kw("modifier") || self.is_kw("struct") || self.is_kw("enum") || self.is_kw("using") {
                return self.err(format!("{} is not supported", self.describe()));
            } else {
                self.orphans.extend(doc);
                let v = self.state_var(unit.vars.len())?;
                unit.vars.push(v);
            }
        }
        unit.orphan_docs.append(&mut self.orphans);
        Ok(unit)
    }

    fn state_var(&mut self, ordinal: usize) -> PResult<VarDecl> {
        let pos = self.pos();
        let ty = self.type_expr()?;
        let mut visibility = Visibility::Internal;
        let mut explicit = false;
        loop {
            if self.eat_kw("public") {
                visibility = Visibility::Public;
                explicit = true;
            } else if self.eat_kw("internal") {
                visibility = Visibility::Internal;
                explicit = true;
            } else if self.eat_kw("private") {
                visibility = Visibility::Private;
                explicit = true;
            } else if self.is_kw("constant") || self.is_kw("immutable") {
                return self.err("constant and immutable variables are not supported");
            } else {
                break;
            }
        }
        let name = self.ident()?;
        if self.is_punct("=") {
            return self.err("state variable initializers are not supported; assign in the constructor");
        }
        self.expect_punct(";")?;
        Ok(VarDecl { name, ty, visibility, explicit_visibility: explicit, ordinal, pos: Span(pos) })
    }

    fn event(&mut self) -> PResult<EventDecl> {
        let pos = self.pos();
        self.expect_kw("event")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let ty = self.type_expr()?;
                let indexed = self.eat_kw("indexed");
                let pname = if matches!(self.peek(), Tok::Ident(_)) { self.ident()? } else { String::new() };
                params.push(EventParam { ty, indexed, name: pname });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct(";")?;
        Ok(EventDecl { name, params, pos: Span(pos) })
    }

    fn function(&mut self, doc: Option<DocBlock>) -> PResult<FunctionDecl> {
        let pos = self.pos();
        let (kind, name) = if self.eat_kw("constructor") {
            (FunctionKind::Constructor, String::new())
        } else {
            self.expect_kw("function")?;
            if self.is_punct("(") {
                (FunctionKind::Fallback, String::new())
            } else {
                (FunctionKind::Function, self.ident()?)
            }
        };
        let params = self.param_list()?;
        let mut visibility = None;
        let mut mutability = Mutability::Nonpayable;
        loop {
            let vis = ["public", "external", "internal", "private"].iter().position(|k| self.is_kw(k));
            if let Some(ix) = vis {
                if visibility.is_some() {
                    return self.err("duplicate visibility");
                }
                self.advance();
                visibility = Some([Visibility::Public, Visibility::External, Visibility::Internal, Visibility::Private][ix]);
            } else if self.eat_kw("payable") {
                mutability = Mutability::Payable;
            } else if self.eat_kw("view") {
                mutability = Mutability::View;
            } else if self.is_kw("pure") || self.is_kw("constant") {
                return self.err(format!("{} functions are not supported; use view", self.describe()));
            } else {
                break;
            }
        }
        let returns = if self.eat_kw("returns") { self.param_list()? } else { Vec::new() };
        if matches!(self.peek(), Tok::Ident(_)) {
            return self.err(format!("modifier {} is not supported", self.describe()));
        }
        let body = if self.eat_punct(";") { None } else { Some(self.block()?) };
        Ok(FunctionDecl {
            name,
            kind,
            params,
            returns,
            visibility: visibility.unwrap_or(Visibility::Public),
            mutability,
            body,
            doc,
            frame_size: 0,
            pos: Span(pos),
        })
    }

    fn param_list(&mut self) -> PResult<Vec<Param>> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        if self.eat_punct(")") {
            return Ok(out);
        }
        loop {
            let ty = self.type_expr()?;
            let location = self.location();
            let name = if matches!(self.peek(), Tok::Ident(s) if !is_reserved(s)) { self.ident()? } else { String::new() };
            out.push(Param { name, ty, location });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(out)
    }

    fn location(&mut self) -> Location {
        if self.eat_kw("memory") {
            Location::Memory
        } else if self.eat_kw("calldata") {
            Location::Calldata
        } else if self.eat_kw("storage") {
            Location::Storage
        } else {
            Location::Value
        }
    }

    fn elementary(&mut self) -> PResult<TypeExpr> {
        let t = self.advance();
        let ty = match &t.tok {
            Tok::Ident(s) => match s.as_str() {
                "uint" | "uint256" => TypeExpr::Uint256,
                "bool" => TypeExpr::Bool,
                "address" => {
                    self.eat_kw("payable");
                    TypeExpr::Address
                }
                "bytes32" => TypeExpr::Bytes32,
                "bytes" => TypeExpr::Bytes,
                other if !is_reserved(other) && starts_upper(other) => TypeExpr::Contract(other.to_string()),
                other => return Err(FrontendError::parse(t.pos, format!("unsupported type `{other}`"))),
            },
            _ => return Err(FrontendError::parse(t.pos, "expected a type")),
        };
        Ok(ty)
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        let mut ty = if self.eat_kw("mapping") {
            self.expect_punct("(")?;
            let kpos = self.pos();
            let k = self.elementary()?;
            if !k.is_elementary() {
                return Err(FrontendError::parse(kpos, format!("mapping key must be elementary, found `{k}`")));
            }
            self.expect_punct("=>")?;
            let v = self.type_expr()?;
            self.expect_punct(")")?;
            TypeExpr::Mapping(Box::new(k), Box::new(v))
        } else {
            self.elementary()?
        };
        while self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.advance();
            self.advance();
            ty = TypeExpr::Array(Box::new(ty));
        }
        if self.is_punct("[") {
            return self.err("fixed-size arrays are not supported");
        }
        Ok(ty)
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        loop {
            self.skip_docs_in_body();
            if self.eat_punct("}") {
                break;
            }
            if self.at_eof() {
                return self.err("unterminated block");
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn skip_docs_in_body(&mut self) {
        while let Tok::Doc(text) = self.peek().clone() {
            let pos = self.pos();
            self.advance();
            self.orphans.push(DocBlock { text, pos: Span(pos) });
        }
    }

    /// Does a local declaration start here?
    fn at_decl(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) if s == "mapping" => true,
            Tok::Ident(s) if ELEMENTARY.contains(&s.as_str()) => !matches!(self.peek_at(1), Tok::Punct("(")),
            Tok::Ident(s) if starts_upper(s) && !is_reserved(s) => match self.peek_at(1) {
                Tok::Ident(n) => !is_reserved(n) || n == "memory" || n == "storage" || n == "calldata",
                Tok::Punct("[") => matches!(self.peek_at(2), Tok::Punct("]")),
                _ => false,
            },
            _ => false,
        }
    }

    fn local_decl(&mut self) -> PResult<LocalDecl> {
        let ty = self.type_expr()?;
        let location = self.location();
        let name = self.ident()?;
        Ok(LocalDecl { ty, location, name, slot: 0 })
    }

    /// `( type name, , type name ) = ...` ?
    fn at_tuple_decl(&self) -> bool {
        if !self.is_punct("(") {
            return false;
        }
        let mut k = 1;
        while matches!(self.peek_at(k), Tok::Punct(",")) {
            k += 1;
        }
        match self.peek_at(k) {
            Tok::Ident(s) if ELEMENTARY.contains(&s.as_str()) || s == "mapping" => true,
            Tok::Ident(s) if starts_upper(s) => matches!(self.peek_at(k + 1), Tok::Ident(_)),
            _ => false,
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let kind = if self.is_punct("{") {
            StmtKind::Block(self.block()?)
        } else if self.eat_kw("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then = Box::new(self.stmt()?);
            let els = if self.eat_kw("else") { Some(Box::new(self.stmt()?)) } else { None };
            StmtKind::If { cond, then, els }
        } else if self.eat_kw("for") {
            self.expect_punct("(")?;
            let init = if self.eat_punct(";") {
                None
            } else {
                let s = self.simple_stmt()?;
                self.expect_punct(";")?;
                Some(Box::new(s))
            };
            let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            let step = if self.is_punct(")") { None } else { Some(Box::new(self.simple_stmt()?)) };
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            StmtKind::For { init, cond, step, body }
        } else if self.is_kw("while") || self.is_kw("do") || self.is_kw("break") || self.is_kw("continue") {
            return self.err(format!("{} is not supported", self.describe()));
        } else if self.eat_kw("return") {
            let e = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            StmtKind::Return(e)
        } else if self.eat_kw("emit") {
            let event = self.ident()?;
            let args = self.args()?;
            self.expect_punct(";")?;
            StmtKind::Emit { event, args }
        } else if self.is_kw("require") && matches!(self.peek_at(1), Tok::Punct("(")) {
            self.advance();
            self.advance();
            let cond = self.expr()?;
            let msg = if self.eat_punct(",") { Some(self.expr()?) } else { None };
            self.expect_punct(")")?;
            self.expect_punct(";")?;
            StmtKind::Require { cond, msg }
        } else {
            let s = self.simple_stmt()?;
            self.expect_punct(";")?;
            return Ok(s);
        };
        Ok(Stmt { kind, pos: Span(pos) })
    }

    /// Declarations, assignments, increments and expression statements
    /// (no trailing `;`).
    fn simple_stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        if self.at_tuple_decl() {
            self.expect_punct("(")?;
            let mut decls = Vec::new();
            loop {
                if self.is_punct(",") || self.is_punct(")") {
                    decls.push(None);
                } else {
                    decls.push(Some(self.local_decl()?));
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
            self.expect_punct("=")?;
            let init = self.expr()?;
            return Ok(Stmt { kind: StmtKind::TupleDecl { decls, init }, pos: Span(pos) });
        }
        if self.at_decl() {
            let decl = self.local_decl()?;
            let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
            return Ok(Stmt { kind: StmtKind::VarDecl { decl, init }, pos: Span(pos) });
        }
        if self.is_punct("++") || self.is_punct("--") {
            let inc = self.is_punct("++");
            self.advance();
            let target = self.unary()?;
            return Ok(Stmt { kind: StmtKind::IncDec { target, inc, prefix: true }, pos: Span(pos) });
        }
        let target = self.expr()?;
        let op = if self.is_punct("=") {
            Some(AssignOp::Set)
        } else if self.is_punct("+=") {
            Some(AssignOp::Add)
        } else if self.is_punct("-=") {
            Some(AssignOp::Sub)
        } else if self.is_punct("*=") {
            Some(AssignOp::Mul)
        } else {
            None
        };
        if let Some(op) = op {
            self.advance();
            let value = self.expr()?;
            return Ok(Stmt { kind: StmtKind::Assign { target, op, value }, pos: Span(pos) });
        }
        if self.is_punct("++") || self.is_punct("--") {
            let inc = self.is_punct("++");
            self.advance();
            return Ok(Stmt { kind: StmtKind::IncDec { target, inc, prefix: false }, pos: Span(pos) });
        }
        Ok(Stmt { kind: StmtKind::Expr(target), pos: Span(pos) })
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        if self.eat_punct(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(out)
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "||" => BinOp::Or,
            "&&" => BinOp::And,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Mod,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.is_punct("**") {
                return self.err("exponentiation is not supported");
            }
            if self.is_punct("?") {
                return self.err("conditional expressions are not supported");
            }
            let Some(op) = self.peek_binop() else { break };
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let pos = self.pos();
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        if self.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), pos));
        }
        if self.eat_punct("-") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), pos));
        }
        if (self.is_kw("forall") || self.is_kw("exists")) && matches!(self.peek_at(1), Tok::Punct("(")) {
            let q = if self.is_kw("forall") { Quantifier::Forall } else { Quantifier::Exists };
            self.advance();
            self.advance();
            let mut vars = Vec::new();
            loop {
                let ty = self.type_expr()?;
                let name = self.ident()?;
                vars.push((ty, name));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
            let body = self.expr()?;
            return Ok(Expr::new(ExprKind::Quant { q, vars, body: Box::new(body) }, pos));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            let pos = self.pos();
            if self.eat_punct(".") {
                let name = match self.peek().clone() {
                    Tok::Ident(s) => {
                        self.advance();
                        s
                    }
                    _ => return self.err(format!("expected member name, found {}", self.describe())),
                };
                e = Expr::new(ExprKind::Member(Box::new(e), name), pos);
            } else if self.is_punct("[") {
                self.advance();
                if self.is_punct("]") {
                    return self.err("unexpected `[]` in expression");
                }
                let ix = self.expr()?;
                self.expect_punct("]")?;
                e = Expr::new(ExprKind::Index(Box::new(e), Box::new(ix)), pos);
            } else if self.is_punct("(") {
                let args = self.args()?;
                e = Expr::new(ExprKind::Call(Box::new(e), args), pos);
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let t = self.peek().clone();
        match t {
            Tok::Number(s) => {
                self.advance();
                let value = U256::from_str_radix(&s, 10)
                    .map_err(|_| FrontendError::parse(pos, format!("number `{s}` does not fit in 256 bits")))?;
                if matches!(self.peek(), Tok::Ident(u) if ["ether", "wei", "finney", "szabo", "seconds", "days"].contains(&u.as_str())) {
                    return self.err("denomination suffixes are not supported");
                }
                Ok(Expr::new(ExprKind::Number { value, hex: false }, pos))
            }
            Tok::HexNumber(s) => {
                self.advance();
                let value = U256::from_str_radix(&s, 16)
                    .map_err(|_| FrontendError::parse(pos, format!("number `0x{s}` does not fit in 256 bits")))?;
                Ok(Expr::new(ExprKind::Number { value, hex: true }, pos))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::new(ExprKind::Str(s), pos))
            }
            Tok::Punct("(") => {
                self.advance();
                let mut items: Vec<Option<Expr>> = Vec::new();
                let mut trailing = false;
                loop {
                    if self.is_punct(",") || self.is_punct(")") {
                        items.push(None);
                    } else {
                        items.push(Some(self.expr()?));
                    }
                    if self.eat_punct(",") {
                        trailing = true;
                        continue;
                    }
                    break;
                }
                self.expect_punct(")")?;
                if items.len() == 1 && !trailing {
                    let inner = items.pop().unwrap().expect("non-empty parenthesized expression");
                    // Parentheses are not represented; precedence is recovered by the printer.
                    return Ok(inner);
                }
                Ok(Expr::new(ExprKind::Tuple(items), pos))
            }
            Tok::Punct("[") => self.err("inline array literals are not supported"),
            Tok::Ident(s) => {
                match s.as_str() {
                    "true" | "false" => {
                        self.advance();
                        Ok(Expr::new(ExprKind::Bool(s == "true"), pos))
                    }
                    "this" => {
                        self.advance();
                        Ok(Expr::new(ExprKind::This, pos))
                    }
                    "new" => {
                        self.advance();
                        let ty = self.type_expr()?;
                        let TypeExpr::Array(elem) = ty else {
                            return Err(FrontendError::parse(pos, "only `new T[](n)` is supported"));
                        };
                        self.expect_punct("(")?;
                        let len = self.expr()?;
                        self.expect_punct(")")?;
                        Ok(Expr::new(ExprKind::NewArray { elem: *elem, len: Box::new(len) }, pos))
                    }
                    "uint" | "uint256" | "address" | "bytes32" | "bool" if matches!(self.peek_at(1), Tok::Punct("(")) => {
                        let ty = self.elementary()?;
                        self.expect_punct("(")?;
                        let inner = self.expr()?;
                        self.expect_punct(")")?;
                        Ok(Expr::new(ExprKind::Convert(ty, Box::new(inner)), pos))
                    }
                    "abi" if matches!(self.peek_at(1), Tok::Punct(".")) => self.abi_call(),
                    _ if ELEMENTARY.contains(&s.as_str()) || is_reserved(&s) => {
                        self.err(format!("unexpected {}", self.describe()))
                    }
                    _ => {
                        self.advance();
                        Ok(Expr::new(ExprKind::Ident { name: s, binding: Binding::Unresolved }, pos))
                    }
                }
            }
            _ => self.err(format!("expected expression, found {}", self.describe())),
        }
    }

    fn abi_call(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        self.expect_kw("abi")?;
        self.expect_punct(".")?;
        if self.eat_kw("encodeWithSignature") {
            self.expect_punct("(")?;
            let sig = match self.peek().clone() {
                Tok::Str(s) => {
                    self.advance();
                    s
                }
                _ => return self.err("abi.encodeWithSignature expects a string literal signature"),
            };
            let mut args = Vec::new();
            while self.eat_punct(",") {
                args.push(self.expr()?);
            }
            self.expect_punct(")")?;
            return Ok(Expr::new(ExprKind::EncodeWithSignature { sig, args }, pos));
        }
        if self.eat_kw("decode") {
            self.expect_punct("(")?;
            let data = self.expr()?;
            self.expect_punct(",")?;
            self.expect_punct("(")?;
            let mut types = Vec::new();
            loop {
                types.push(self.type_expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
            self.expect_punct(")")?;
            return Ok(Expr::new(ExprKind::Decode { data: Box::new(data), types }, pos));
        }
        self.err(format!("unsupported abi member {}", self.describe()))
    }
}

fn join_pragma(words: &[String]) -> String {
    let mut s = String::new();
    for (k, w) in words.iter().enumerate() {
        if k == 1 {
            s.push(' ');
        }
        s.push_str(w);
    }
    s
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

pub(crate) fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "contract"
            | "function"
            | "constructor"
            | "event"
            | "emit"
            | "return"
            | "returns"
            | "if"
            | "else"
            | "for"
            | "while"
            | "mapping"
            | "public"
            | "external"
            | "internal"
            | "private"
            | "payable"
            | "view"
            | "pure"
            | "memory"
            | "calldata"
            | "storage"
            | "indexed"
            | "new"
            | "true"
            | "false"
            | "this"
            | "require"
            | "pragma"
    )
}
