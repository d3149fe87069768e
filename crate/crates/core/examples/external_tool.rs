//! Runs an external verifier on the merged ToyWallet.
//!
//! `cargo run --example external_tool [path/to/solc-verify.py]`

use tdep::conformance::{verify, Mode};
use tdep::corpus;
use tdep::frontend::parse_unit;
use tdep::spec::parse_spec;
use tdep::verify::{ExternalBackend, ToolConfig};

fn main() {
    let mut tool = ToolConfig::default();
    if let Some(path) = std::env::args().nth(1) {
        tool.path = path.into();
    }
    let spec = parse_spec(corpus::get("toy_wallet.spec.sol").unwrap(), "toy_wallet.spec.sol").unwrap();
    let unit = parse_unit(corpus::TOY_WALLET, "toy_wallet.sol").unwrap();
    let report = verify(&spec, &unit, &mut ExternalBackend { tool }, Mode::Create).unwrap();
    println!("{}", report.to_json_string());
}
