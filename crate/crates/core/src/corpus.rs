//! Bundled contracts and specifications.

pub const TOY_WALLET: &str = include_str!("../corpus/toy_wallet.sol");
pub const TOY_WALLET_SPEC: &str = include_str!("../corpus/toy_wallet.spec.sol");
pub const TOY_WALLET_REENTRANT: &str = include_str!("../corpus/toy_wallet_reentrant.sol");
pub const TOY_WALLET_V2: &str = include_str!("../corpus/toy_wallet_v2.sol");
pub const ATTACKER: &str = include_str!("../corpus/attacker.sol");
pub const ERC20_SPEC: &str = include_str!("../corpus/erc20.spec.sol");
pub const ERC20: &str = include_str!("../corpus/erc20.sol");
pub const ERC20_UNISWAP: &str = include_str!("../corpus/erc20_uniswap.sol");
pub const ERC20_DIGIX: &str = include_str!("../corpus/erc20_digix.sol");
pub const ERC20_MISSING_ALLOWANCE: &str = include_str!("../corpus/erc20_missing_allowance.sol");
pub const ERC20_UNCHECKED: &str = include_str!("../corpus/erc20_unchecked.sol");
pub const ERC1155_SPEC: &str = include_str!("../corpus/erc1155.spec.sol");
pub const ERC1155: &str = include_str!("../corpus/erc1155.sol");
pub const ERC1155_DESC_STOCK: &str = include_str!("../corpus/erc1155_desc_stock.sol");
pub const REGISTRY: &str = include_str!("../corpus/registry.sol");

/// `(file name, source)` for every bundled file.
pub const ALL: &[(&str, &str)] = &[
    ("toy_wallet.sol", TOY_WALLET),
    ("toy_wallet.spec.sol", TOY_WALLET_SPEC),
    ("toy_wallet_reentrant.sol", TOY_WALLET_REENTRANT),
    ("toy_wallet_v2.sol", TOY_WALLET_V2),
    ("attacker.sol", ATTACKER),
    ("erc20.spec.sol", ERC20_SPEC),
    ("erc20.sol", ERC20),
    ("erc20_uniswap.sol", ERC20_UNISWAP),
    ("erc20_digix.sol", ERC20_DIGIX),
    ("erc20_missing_allowance.sol", ERC20_MISSING_ALLOWANCE),
    ("erc20_unchecked.sol", ERC20_UNCHECKED),
    ("erc1155.spec.sol", ERC1155_SPEC),
    ("erc1155.sol", ERC1155),
    ("erc1155_desc_stock.sol", ERC1155_DESC_STOCK),
    ("registry.sol", REGISTRY),
];

/// `(spec, implementation)` pairs that share a layout.
pub const PAIRS: &[(&str, &str)] = &[
    ("toy_wallet.spec.sol", "toy_wallet.sol"),
    ("toy_wallet.spec.sol", "toy_wallet_reentrant.sol"),
    ("toy_wallet.spec.sol", "toy_wallet_v2.sol"),
    ("erc20.spec.sol", "erc20.sol"),
    ("erc20.spec.sol", "erc20_uniswap.sol"),
    ("erc20.spec.sol", "erc20_digix.sol"),
    ("erc20.spec.sol", "erc20_unchecked.sol"),
    ("erc1155.spec.sol", "erc1155.sol"),
    ("erc1155.spec.sol", "erc1155_desc_stock.sol"),
];

/// Implementation files: everything except specifications and the registry.
pub fn implementations() -> impl Iterator<Item = (&'static str, &'static str)> {
    ALL.iter().copied().filter(|(n, _)| !n.ends_with(".spec.sol") && *n != "registry.sol")
}

pub fn get(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
