//! Parses a MiniSol file and lists its storage layout and public interface.
//!
//! `cargo run --example parse_contract [file.sol]`

use tdep::corpus;
use tdep::frontend::parse_unit;

fn main() {
    let (origin, source) = match std::env::args().nth(1) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
            (path, text)
        }
        None => ("toy_wallet.sol".to_string(), corpus::TOY_WALLET.to_string()),
    };
    let unit = match parse_unit(&source, &origin) {
        Ok(u) => u,
        Err(d) => {
            eprintln!("{d}");
            std::process::exit(2);
        }
    };
    println!("contract {}", unit.name);
    for v in &unit.vars {
        println!("  slot {}: {} {}", v.ordinal, v.ty, v.name);
    }
    for f in unit.dispatchable() {
        println!("  public {}", f.canonical_signature());
    }
    if let Some(c) = unit.constructor() {
        println!("  constructor({})", c.params.iter().map(|p| p.ty.to_string()).collect::<Vec<_>>().join(","));
    }
}
