//! Prints the proxy generated for an implementation and the registry it consults.
//!
//! `cargo run --example generate_proxy [impl.sol]`

use tdep::corpus;
use tdep::proxy::{generate_proxy_for_source, REGISTRY_SOURCE};
use tdep::spec::parse_spec;

fn main() {
    let (origin, source) = match std::env::args().nth(1) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
            (path, text)
        }
        None => ("erc20.sol".to_string(), corpus::ERC20.to_string()),
    };
    let id = parse_spec(corpus::get("erc20.spec.sol").unwrap(), "erc20.spec.sol").unwrap().id().unwrap();
    match generate_proxy_for_source(&source, &origin, id) {
        Ok(p) => {
            println!("// registry\n{REGISTRY_SOURCE}");
            println!("// proxy for {origin}, spec {id}\n{}", p.source);
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    }
}
