//! The syntactic half of conformance: layout and public signatures.

use tdep::conformance::{check_syntactic, Mode};
use tdep::corpus;
use tdep::frontend::parse_unit;
use tdep::spec::parse_spec;

fn main() {
    let spec = parse_spec(corpus::get("erc20.spec.sol").unwrap(), "erc20.spec.sol").unwrap();
    for file in ["erc20.sol", "erc20_missing_allowance.sol", "toy_wallet.sol"] {
        let unit = parse_unit(corpus::get(file).unwrap(), file).unwrap();
        let findings = check_syntactic(&spec, &unit, Mode::Create);
        println!("{file}: {} finding(s)", findings.len());
        for f in findings {
            println!("  {} {}: {}", f.category, f.site, f.message);
        }
    }
}
