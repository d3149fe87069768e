//! Shows that a spec's id depends only on its canonical text.

use tdep::corpus;
use tdep::spec::parse_spec;

fn main() {
    let original = parse_spec(corpus::get("toy_wallet.spec.sol").unwrap(), "toy_wallet.spec.sol").unwrap();
    println!("canonical text:\n{}", original.canonical_text());
    println!("spec id: {}", original.id().unwrap());

    // whitespace and comments do not matter
    let reformatted = corpus::get("toy_wallet.spec.sol").unwrap().replace('\t', "        ").replace("contract ToyWallet {", "// reformatted\ncontract ToyWallet\n{");
    let again = parse_spec(&reformatted, "reformatted.spec.sol").unwrap();
    println!("reformatted id: {}", again.id().unwrap());

    // an edited obligation does
    let edited = corpus::get("toy_wallet.spec.sol").unwrap().replace("+ msg.value\n", "+ msg.value + 0\n");
    let changed = parse_spec(&edited, "edited.spec.sol").unwrap();
    println!("edited id:      {}", changed.id().unwrap());
}
