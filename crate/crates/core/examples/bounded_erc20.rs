//! Bounded exhaustive checking of ERC20 variants, with counterexample traces.

use std::time::Instant;

use tdep::conformance::{verify, Mode};
use tdep::corpus;
use tdep::frontend::parse_unit;
use tdep::spec::parse_spec;
use tdep::verify::{BoundedBackend, BoundedConfig};

fn main() {
    let spec = parse_spec(corpus::get("erc20.spec.sol").unwrap(), "erc20.spec.sol").unwrap();
    let mut backend = BoundedBackend::new(BoundedConfig::default());
    for file in ["erc20.sol", "erc20_uniswap.sol", "erc20_digix.sol", "erc20_unchecked.sol"] {
        let unit = parse_unit(corpus::get(file).unwrap(), file).unwrap();
        let start = Instant::now();
        let report = verify(&spec, &unit, &mut backend, Mode::Create).unwrap();
        println!("{file}: {:?} in {:.1?}", report.verdict, start.elapsed());
        for f in &report.findings {
            println!("  {} {}", f.category, f.site);
            for call in f.trace.iter().flat_map(|t| &t.calls) {
                println!("    {call}");
            }
        }
    }
}
