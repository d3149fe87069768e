#![allow(dead_code)]

use std::sync::Arc;

use tdep::conformance::{merge, MergedContract, Mode};
use tdep::corpus;
use tdep::frontend::{parse_unit, ContractUnit};
use tdep::sim::{Address, Code};
use tdep::spec::{parse_spec, ContractSpec};

pub fn spec(name: &str) -> ContractSpec {
    parse_spec(corpus::get(name).unwrap(), name).unwrap()
}

pub fn unit(name: &str) -> ContractUnit {
    parse_unit(corpus::get(name).unwrap(), name).unwrap()
}

pub fn merged(s: &str, c: &str, mode: Mode) -> MergedContract {
    merge(&spec(s), &unit(c), mode).unwrap()
}

/// Resolves corpus file names for scenario `create` ops.
pub fn corpus_loader(path: &str) -> Result<Arc<Code>, String> {
    let src = corpus::get(path).ok_or_else(|| format!("no corpus file `{path}`"))?;
    Code::from_source(src, path).map_err(|d| d.to_string())
}

pub fn user(k: u64) -> Address {
    Address::from_u64(0xA0 + k)
}

use ethnum::U256;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdep::proxy::{generate_proxy_for_source, generate_registry};
use tdep::sim::{ChainState, Receipt, SimError, Value};
use tdep::spec::SpecId;
use tdep::verify::{candidate_txs, BoundedConfig, Tx};

pub const SPEC: SpecId = SpecId([0x5a; 32]);
pub const MAINTAINER: Address = Address::from_u64(0xDD);
pub const REGISTRY_AT: Address = Address::from_u64(0x1000);
pub const IMPL_AT: Address = Address::from_u64(0x1001);
pub const TARGET_AT: Address = Address::from_u64(0x1002);

/// The same contract reached through its proxy and deployed directly, on
/// two chains whose address counters and balances line up.
pub struct Twin {
    pub proxied: ChainState,
    pub direct: ChainState,
    /// Ordinals of the implementation's own variables.
    pub mirrored: usize,
}

fn funded(cfg: &BoundedConfig) -> ChainState {
    let mut st = ChainState::new();
    for u in &cfg.users {
        st.fund(*u, cfg.funding);
    }
    st.fund(MAINTAINER, U256::ONE);
    st
}

/// Deploys `file` both ways; `None` if either constructor reverts.
pub fn twin(file: &str, ctor: &Tx, cfg: &BoundedConfig) -> Option<Twin> {
    let src = corpus::get(file).unwrap();
    let code = Code::from_source(src, file).unwrap();
    let proxy = Code::from_unit(generate_proxy_for_source(src, file, SPEC).unwrap().unit);
    let registry = Code::from_unit(generate_registry());
    let mut p = funded(cfg);
    let mut d = funded(cfg);
    for st in [&mut p, &mut d] {
        assert_eq!(st.create_contract(registry.clone(), vec![], MAINTAINER, U256::ZERO).unwrap().created, Some(REGISTRY_AT));
        let r = st.create_contract(code.clone(), ctor.args.clone(), ctor.sender, U256::ZERO).ok()?;
        if !r.success() {
            return None;
        }
        let map = vec![Value::Addr(IMPL_AT), Value::B32(SPEC.0)];
        assert!(st.call_contract(REGISTRY_AT, "new_mapping(address,bytes32)", map, MAINTAINER, U256::ZERO).unwrap().success());
    }
    let mut pargs = vec![Value::Addr(REGISTRY_AT), Value::B32(SPEC.0), Value::Addr(IMPL_AT)];
    pargs.extend(ctor.args.iter().cloned());
    let rp = p.create_contract(proxy, pargs, ctor.sender, ctor.value);
    let rd = d.create_contract(code.clone(), ctor.args.clone(), ctor.sender, ctor.value);
    match (rp, rd) {
        (Ok(a), Ok(b)) if a.success() && b.success() => {
            assert_eq!(a.created, Some(TARGET_AT));
            assert_eq!(b.created, Some(TARGET_AT));
        }
        (Ok(a), Ok(b)) if a.status == b.status => return None,
        (Err(_), Err(_)) => return None,
        (a, b) => panic!("{file}: constructor diverged: {a:?} vs {b:?}"),
    }
    Some(Twin { proxied: p, direct: d, mirrored: code.unit.vars.len() })
}

fn same_outcome(a: &Result<Receipt, SimError>, b: &Result<Receipt, SimError>) -> Result<(), String> {
    match (a, b) {
        (Ok(x), Ok(y)) => {
            if x.status != y.status {
                return Err(format!("status {:?} vs {:?} ({:?} / {:?})", x.status, y.status, x.revert_reason, y.revert_reason));
            }
            if x.success() && (x.return_values != y.return_values || x.events != y.events) {
                return Err(format!("returns/events {:?} {:?} vs {:?} {:?}", x.return_values, x.events, y.return_values, y.events));
            }
            Ok(())
        }
        (Err(_), Err(_)) => Ok(()),
        _ => Err(format!("{a:?} vs {b:?}")),
    }
}

impl Twin {
    /// Runs `tx` against both; reverted transactions must leave each chain's hash intact.
    pub fn step(&mut self, tx: &Tx) -> Result<bool, String> {
        let run = |st: &mut ChainState| {
            let before = st.state_hash();
            let r = st.call_contract(TARGET_AT, &tx.sig, tx.args.clone(), tx.sender, tx.value);
            if !matches!(&r, Ok(x) if x.success()) && st.state_hash() != before {
                return Err(format!("state changed by failed `{}`", tx.sig));
            }
            Ok(r)
        };
        let a = run(&mut self.proxied)?;
        let b = run(&mut self.direct)?;
        same_outcome(&a, &b).map_err(|e| format!("{} from {}: {e}", tx.sig, tx.sender))?;
        Ok(matches!(a, Ok(x) if x.success()))
    }

    /// Logical state agrees: balances everywhere, storage everywhere except
    /// the proxy's bookkeeping ordinals.
    pub fn agree(&self) -> Result<(), String> {
        let (p, d) = (&self.proxied.world.accounts, &self.direct.world.accounts);
        if p.keys().ne(d.keys()) {
            return Err("account sets differ".into());
        }
        for (addr, a) in p {
            let b = &d[addr];
            if a.balance != b.balance {
                return Err(format!("balance of {addr}: {} vs {}", a.balance, b.balance));
            }
            let limit = if *addr == TARGET_AT { self.mirrored } else { usize::MAX };
            let ords: std::collections::BTreeSet<usize> = a.storage.ordinals().chain(b.storage.ordinals()).filter(|o| *o < limit).collect();
            for o in ords {
                if a.storage.slot(o) != b.storage.slot(o) {
                    return Err(format!("storage of {addr} ordinal {o}: {:?} vs {:?}", a.storage.slot(o), b.storage.slot(o)));
                }
            }
        }
        Ok(())
    }
}

/// Transactions run and how many of them succeeded.
#[derive(Debug, Default, Clone, Copy)]
pub struct Coverage {
    pub scenarios: usize,
    pub steps: usize,
    pub successes: usize,
}

/// Runs `count` random scenarios drawn from the enumerator's candidates.
pub fn transparency(file: &str, count: u64, seed: u64) -> Result<Coverage, String> {
    let cfg = BoundedConfig::default();
    let unit = parse_unit(corpus::get(file).unwrap(), file).unwrap();
    let (ctors, calls) = candidate_txs(&unit, &cfg, TARGET_AT);
    let mut cov = Coverage::default();
    for k in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k);
        let ctor = &ctors[rng.gen_range(0..ctors.len())];
        let Some(mut t) = twin(file, ctor, &cfg) else { continue };
        cov.scenarios += 1;
        for _ in 0..rng.gen_range(1..=6) {
            if calls.is_empty() {
                break;
            }
            let ok = t.step(&calls[rng.gen_range(0..calls.len())]).map_err(|e| format!("{file} scenario {k}: {e}"))?;
            cov.steps += 1;
            cov.successes += usize::from(ok);
        }
        t.agree().map_err(|e| format!("{file} scenario {k}: {e}"))?;
    }
    Ok(cov)
}
