//! MiniSol lexer, parser, type checker and printer.

pub mod ast;
pub mod error;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod typeck;

use std::fmt;

pub use ast::*;
pub use error::{ErrorKind, FrontendError, Pos};

/// One or more frontend errors, in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<FrontendError>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

impl Diagnostics {
    pub fn first(&self) -> &FrontendError {
        &self.0[0]
    }
}

/// Parses and type-checks every contract in `source`.
pub fn parse_source(source: &str, origin: &str) -> Result<SourceUnit, Diagnostics> {
    let mut unit = parser::parse_source_syntax(source).map_err(|e| Diagnostics(vec![e.with_origin(origin)]))?;
    typeck::check_source(&mut unit).map_err(|errs| {
        let mut errs: Vec<_> = errs.into_iter().map(|e| e.with_origin(origin)).collect();
        errs.sort_by_key(|e| e.pos);
        Diagnostics(errs)
    })?;
    Ok(unit)
}

/// Parses a file and returns its main contract: the last one declared.
/// Earlier contracts act as interfaces for external calls.
pub fn parse_unit(source: &str, origin: &str) -> Result<ContractUnit, Diagnostics> {
    let mut su = parse_source(source, origin)?;
    let Some(mut c) = su.contracts.pop() else {
        return Err(Diagnostics(vec![FrontendError::parse(Pos { line: 1, col: 1 }, "no contract in file").with_origin(origin)]));
    };
    c.orphan_docs.extend(su.orphan_docs);
    Ok(c)
}

/// Parses without type checking; for tooling that only needs syntax.
pub fn parse_syntax(source: &str, origin: &str) -> Result<SourceUnit, Diagnostics> {
    parser::parse_source_syntax(source).map_err(|e| Diagnostics(vec![e.with_origin(origin)]))
}
