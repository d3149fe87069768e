//! The trusted deployer: verification-gated creation and upgrade of proxied
//! contracts, with off-chain records mirrored into the on-chain registry.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ethnum::U256;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformance::{verify, Backend, Mode, Report, Verdict};
use crate::frontend::{self, Diagnostics};
use crate::proxy::{generate_proxy_for_source, generate_registry, ProxyGenError};
use crate::sim::persist::{self, apply, ApplyError, PersistError, ScriptOp, StepResult};
use crate::sim::{Address, Code, Journaled, ReplayError, Value};
use crate::spec::{parse_spec, ContractSpec, SpecError, SpecId};

pub const REGISTRY_SCHEMA: u32 = 1;
pub const DEFAULT_TRUSTED: Address = Address::from_u64(0xD0);

pub fn trusted_funding() -> U256 {
    U256::ONE << 128u32
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub implementation: Address,
    pub report_hash: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentRecord {
    pub proxy_addr: Address,
    pub spec_id: SpecId,
    pub current_impl: Address,
    pub developer: String,
    pub history: Vec<HistoryEntry>,
}

/// Contents of `registry.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryFile {
    pub schema: u32,
    pub trusted_address: Address,
    pub registry_addr: Address,
    pub records: Vec<DeploymentRecord>,
    /// Canonical text of every recorded spec, by id.
    pub specs: BTreeMap<SpecId, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Create,
    Upgrade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Deployed,
    Rejected,
    NotOwner,
    ChainError,
}

/// One line of `audit.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub op: Operation,
    pub outcome: Outcome,
    pub developer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy: Option<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implementation: Option<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<Report>,
    /// Journal indices `[start, end)` of the transactions this operation issued.
    pub txs: [usize; 2],
    pub timestamp: u64,
}

#[derive(Debug, Error)]
pub enum DeployError {
    #[error("unknown proxy {0}")]
    UnknownProxy(Address),
    #[error("developer `{developer}` is not the creator of proxy {proxy}")]
    NotOwner { proxy: Address, developer: String },
    #[error("verification failed")]
    VerificationFailed(Box<Report>),
    #[error("chain error: {0}")]
    Chain(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Parse(#[from] Diagnostics),
    #[error(transparent)]
    Proxy(#[from] ProxyGenError),
    #[error("{path}: {message}")]
    Store { path: PathBuf, message: String },
}

impl DeployError {
    pub fn report(&self) -> Option<&Report> {
        match self {
            DeployError::VerificationFailed(r) => Some(r),
            _ => None,
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub struct Deployer {
    pub chain: Journaled,
    pub registry: RegistryFile,
    /// Audit entries produced since the deployer was opened.
    pub audit: Vec<AuditEntry>,
}

impl Deployer {
    /// Fresh chain: funds the trusted address and deploys the registry from it.
    pub fn new(trusted: Address) -> Result<Self, DeployError> {
        Self::attach(Journaled::new(), trusted)
    }

    /// Deploys a registry on an existing chain.
    pub fn attach(mut chain: Journaled, trusted: Address) -> Result<Self, DeployError> {
        chain.fund(trusted, trusted_funding());
        let r = chain.create(Code::from_unit(generate_registry()), vec![], trusted, U256::ZERO).map_err(|e| DeployError::Chain(e.to_string()))?;
        let registry_addr = r.created.ok_or_else(|| DeployError::Chain("registry constructor reverted".into()))?;
        Ok(Deployer {
            chain,
            registry: RegistryFile { schema: REGISTRY_SCHEMA, trusted_address: trusted, registry_addr, records: Vec::new(), specs: BTreeMap::new() },
            audit: Vec::new(),
        })
    }

    pub fn trusted(&self) -> Address {
        self.registry.trusted_address
    }

    pub fn record(&self, proxy: Address) -> Option<&DeploymentRecord> {
        self.registry.records.iter().find(|r| r.proxy_addr == proxy)
    }

    /// Spec bound to a proxy by the deployer's own records.
    pub fn get_spec(&self, addr: Address) -> Option<SpecId> {
        self.record(addr).map(|r| r.spec_id)
    }

    /// What the on-chain registry answers for `addr`, without changing the chain.
    pub fn onchain_spec(&self, addr: Address) -> Result<SpecId, DeployError> {
        let mut st = self.chain.state.clone();
        let r = st
            .call_contract(self.registry.registry_addr, "get_spec(address)", vec![Value::Addr(addr)], self.trusted(), U256::ZERO)
            .map_err(|e| DeployError::Chain(e.to_string()))?;
        match r.return_values.as_slice() {
            [Value::B32(b)] if r.success() => Ok(SpecId(*b)),
            other => Err(DeployError::Chain(format!("get_spec returned {other:?}"))),
        }
    }

    /// Every record agrees with the on-chain registry.
    pub fn check_mirror(&self) -> Result<(), String> {
        for rec in &self.registry.records {
            for addr in [rec.proxy_addr, rec.current_impl] {
                let on = self.onchain_spec(addr).map_err(|e| e.to_string())?;
                if on != rec.spec_id {
                    return Err(format!("{addr}: registry holds {on}, record holds {}", rec.spec_id));
                }
            }
        }
        Ok(())
    }

    fn tx(&mut self, to: Address, sig: &str, args: Vec<Value>) -> Result<(), String> {
        let trusted = self.trusted();
        let r = self.chain.call(to, sig, args, trusted, U256::ZERO).map_err(|e| e.to_string())?;
        if r.success() {
            Ok(())
        } else {
            Err(format!("`{sig}` on {to} reverted: {}", r.revert_reason.unwrap_or_default()))
        }
    }

    fn create(&mut self, code: std::sync::Arc<Code>, args: Vec<Value>) -> Result<Address, String> {
        let trusted = self.trusted();
        let name = code.name().to_string();
        let r = self.chain.create(code, args, trusted, U256::ZERO).map_err(|e| e.to_string())?;
        r.created.ok_or_else(|| format!("constructor of `{name}` reverted: {}", r.revert_reason.unwrap_or_default()))
    }

    fn register(&mut self, addr: Address, id: SpecId) -> Result<(), String> {
        let reg = self.registry.registry_addr;
        self.tx(reg, "new_mapping(address,bytes32)", vec![Value::Addr(addr), Value::B32(id.0)])
    }

    fn log(&mut self, op: Operation, outcome: Outcome, developer: &str, proxy: Option<Address>, implementation: Option<Address>, report: Option<&Report>, start: usize) {
        self.audit.push(AuditEntry {
            op,
            outcome,
            developer: developer.to_string(),
            proxy,
            implementation,
            report_hash: report.map(Report::content_hash),
            report: report.cloned(),
            txs: [start, self.chain.ops.len()],
            timestamp: now(),
        });
    }

    /// Runs `f` on the chain; on error the chain is restored to where it was.
    fn atomically<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, String>) -> Result<T, String> {
        let snapshot = self.chain.clone();
        let out = f(self);
        if out.is_err() {
            self.chain = snapshot;
        }
        out
    }

    /// Verifies `source` against `spec` and, on PASS, deploys the
    /// implementation and its proxy. Returns the proxy address.
    pub fn create_contract(
        &mut self,
        spec: &ContractSpec,
        source: &str,
        origin: &str,
        args: Vec<Value>,
        developer: &str,
        backend: &mut dyn Backend,
    ) -> Result<(Address, Report), DeployError> {
        let unit = frontend::parse_unit(source, origin)?;
        let report = verify(spec, &unit, backend, Mode::Create)?;
        let start = self.chain.ops.len();
        if report.verdict != Verdict::PASS {
            self.log(Operation::Create, Outcome::Rejected, developer, None, None, Some(&report), start);
            return Err(DeployError::VerificationFailed(Box::new(report)));
        }
        let id = report.spec_id;
        let proxy = generate_proxy_for_source(source, origin, id)?;
        let code = Code::from_source(source, origin)?;
        let registry = self.registry.registry_addr;
        let res = self.atomically(|d| {
            let imp = d.create(code, args.clone())?;
            d.register(imp, id)?;
            let mut pargs = vec![Value::Addr(registry), Value::B32(id.0), Value::Addr(imp)];
            pargs.extend(args);
            let px = d.create(Code::from_unit(proxy.unit), pargs)?;
            d.register(px, id)?;
            Ok((imp, px))
        });
        let (imp, px) = match res {
            Ok(x) => x,
            Err(e) => {
                self.log(Operation::Create, Outcome::ChainError, developer, None, None, Some(&report), start);
                return Err(DeployError::Chain(e));
            }
        };
        self.log(Operation::Create, Outcome::Deployed, developer, Some(px), Some(imp), Some(&report), start);
        self.registry.specs.insert(id, spec.canonical_text());
        self.registry.records.push(DeploymentRecord {
            proxy_addr: px,
            spec_id: id,
            current_impl: imp,
            developer: developer.to_string(),
            history: vec![HistoryEntry { implementation: imp, report_hash: report.content_hash(), timestamp: now() }],
        });
        Ok((px, report))
    }

    /// Verifies `source` against the proxy's original spec and, on PASS,
    /// points the proxy at a fresh instance of it.
    pub fn upgrade_contract(&mut self, proxy: Address, source: &str, origin: &str, developer: &str, backend: &mut dyn Backend) -> Result<Report, DeployError> {
        let start = self.chain.ops.len();
        let rec = self.record(proxy).cloned().ok_or(DeployError::UnknownProxy(proxy))?;
        if rec.developer != developer {
            self.log(Operation::Upgrade, Outcome::NotOwner, developer, Some(proxy), None, None, start);
            return Err(DeployError::NotOwner { proxy, developer: developer.to_string() });
        }
        let text = self.registry.specs.get(&rec.spec_id).ok_or_else(|| DeployError::Chain(format!("no stored spec for {}", rec.spec_id)))?;
        let spec = parse_spec(text, "stored.spec.sol")?;
        if spec.id()? != rec.spec_id {
            return Err(DeployError::Chain(format!("stored spec no longer hashes to {}", rec.spec_id)));
        }
        let unit = frontend::parse_unit(source, origin)?;
        let report = verify(&spec, &unit, backend, Mode::Upgrade)?;
        if report.verdict != Verdict::PASS {
            self.log(Operation::Upgrade, Outcome::Rejected, developer, Some(proxy), None, Some(&report), start);
            return Err(DeployError::VerificationFailed(Box::new(report)));
        }
        let code = Code::from_source(source, origin)?;
        let args: Vec<Value> = unit.constructor().map(|c| c.params.iter().filter_map(|p| Value::zero(&p.ty)).collect()).unwrap_or_default();
        let res = self.atomically(|d| {
            let imp = d.create(code, args)?;
            d.register(imp, rec.spec_id)?;
            d.tx(proxy, "upgrade(address)", vec![Value::Addr(imp)])?;
            Ok(imp)
        });
        let imp = match res {
            Ok(x) => x,
            Err(e) => {
                self.log(Operation::Upgrade, Outcome::ChainError, developer, Some(proxy), None, Some(&report), start);
                return Err(DeployError::Chain(e));
            }
        };
        self.log(Operation::Upgrade, Outcome::Deployed, developer, Some(proxy), Some(imp), Some(&report), start);
        let rec = self.registry.records.iter_mut().find(|r| r.proxy_addr == proxy).expect("looked up above");
        rec.current_impl = imp;
        rec.history.push(HistoryEntry { implementation: imp, report_hash: report.content_hash(), timestamp: now() });
        Ok(report)
    }
}

/// Checks that every proxy creation and every `upgrade` call in `journal`
/// lies inside the transaction range of a deployed operation for that proxy
/// whose report passed, and that the replayed state matches `expected_hash`.
pub fn check_gate(journal: &str, audit: &[AuditEntry], expected_hash: Option<[u8; 32]>) -> Result<(), String> {
    let replayed = Journaled::replay(journal).map_err(|e| e.to_string())?;
    if let Some(h) = expected_hash {
        if replayed.state.state_hash() != h {
            return Err("replayed journal does not reproduce the state hash".into());
        }
    }
    let covering = |i: usize, proxy: Address| {
        audit.iter().any(|e| {
            e.outcome == Outcome::Deployed
                && e.report.as_ref().is_some_and(|r| r.passed() && e.report_hash.as_deref() == Some(r.content_hash().as_str()))
                && e.proxy == Some(proxy)
                && e.txs[0] <= i
                && i < e.txs[1]
        })
    };
    let mut st = crate::sim::ChainState::new();
    let mut no_load = |p: &str| -> Result<std::sync::Arc<Code>, String> { Err(format!("missing source for `{p}`")) };
    for (i, op) in replayed.ops.iter().enumerate() {
        let res = apply(&mut st, op, &mut no_load).map_err(|e| match e {
            ApplyError::Bad(m) => m,
            ApplyError::Sim(e) => e.to_string(),
        })?;
        let is_proxy = op.op == "create" && op.code.as_deref().is_some_and(|c| c.starts_with(&format!("{}-", crate::proxy::PROXY_NAME)));
        if is_proxy {
            if let StepResult::Receipt(r) = &res {
                if let Some(px) = r.created {
                    if !covering(i, px) {
                        return Err(format!("journal op {i} creates proxy {px} without a passing report"));
                    }
                }
            }
        }
        if op.op == "call" && op.sig.as_deref() == Some("upgrade(address)") {
            let to: Address = op.addr.as_deref().unwrap_or_default().parse().map_err(|e| format!("{e}"))?;
            if !covering(i, to) {
                return Err(format!("journal op {i} upgrades {to} without a passing report"));
            }
        }
    }
    Ok(())
}

/// File layout of a persisted deployment: the chain file plus
/// `txlog.jsonl`, `registry.json`, `audit.jsonl` and a lock file beside it.
#[derive(Debug, Clone)]
pub struct Store {
    pub chain: PathBuf,
    pub journal: PathBuf,
    pub registry: PathBuf,
    pub audit: PathBuf,
    pub lock: PathBuf,
}

/// Held while a command owns the store.
pub struct StoreLock(#[allow(dead_code)] File);

fn store_err(path: &Path, e: impl std::fmt::Display) -> DeployError {
    DeployError::Store { path: path.to_path_buf(), message: e.to_string() }
}

/// Writes `text` to `path` via a temporary file and rename; no-op if the
/// file already holds exactly `text`.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), DeployError> {
    if fs::read(path).is_ok_and(|old| old == text.as_bytes()) {
        return Ok(());
    }
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| store_err(path, e))?;
    tmp.write_all(text.as_bytes()).and_then(|_| tmp.as_file().sync_all()).map_err(|e| store_err(path, e))?;
    match fs::metadata(path) {
        Ok(m) => fs::set_permissions(tmp.path(), m.permissions()).map_err(|e| store_err(path, e))?,
        Err(_) => default_permissions(tmp.path()).map_err(|e| store_err(path, e))?,
    }
    tmp.persist(path).map_err(|e| store_err(path, e.error))?;
    Ok(())
}

#[cfg(unix)]
fn default_permissions(p: &Path) -> std::io::Result<()> {
    use std::os::unix::fs::PermissionsExt;
    fs::set_permissions(p, fs::Permissions::from_mode(0o644))
}

#[cfg(not(unix))]
fn default_permissions(_: &Path) -> std::io::Result<()> {
    Ok(())
}

impl Store {
    pub fn beside(chain: &Path) -> Self {
        let dir = chain.parent().map(Path::to_path_buf).unwrap_or_default();
        Store {
            chain: chain.to_path_buf(),
            journal: dir.join("txlog.jsonl"),
            registry: dir.join("registry.json"),
            audit: dir.join("audit.jsonl"),
            lock: dir.join(".tdep.lock"),
        }
    }

    /// Takes the advisory lock; blocks until other holders release it.
    pub fn lock(&self) -> Result<StoreLock, DeployError> {
        let f = OpenOptions::new().create(true).truncate(false).write(true).open(&self.lock).map_err(|e| store_err(&self.lock, e))?;
        f.lock().map_err(|e| store_err(&self.lock, e))?;
        Ok(StoreLock(f))
    }

    /// Chain and journal; a missing chain file yields an empty chain.
    pub fn load_chain(&self) -> Result<Journaled, DeployError> {
        let state = match fs::read_to_string(&self.chain) {
            Ok(text) => persist::from_str(&text).map_err(|e: PersistError| store_err(&self.chain, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Journaled::new()),
            Err(e) => return Err(store_err(&self.chain, e)),
        };
        let ops = match fs::read_to_string(&self.journal) {
            Ok(text) => text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str::<ScriptOp>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| store_err(&self.journal, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(store_err(&self.journal, e)),
        };
        Ok(Journaled { state, ops })
    }

    pub fn save_chain(&self, chain: &Journaled) -> Result<(), DeployError> {
        write_atomic(&self.journal, &chain.journal_text())?;
        write_atomic(&self.chain, &persist::to_string(&chain.state))
    }

    /// Opens the deployment, creating chain and registry on first use.
    pub fn open(&self, trusted: Address) -> Result<Deployer, DeployError> {
        let chain = self.load_chain()?;
        match fs::read_to_string(&self.registry) {
            Ok(text) => {
                let registry: RegistryFile = serde_json::from_str(&text).map_err(|e| store_err(&self.registry, e))?;
                if registry.schema != REGISTRY_SCHEMA {
                    return Err(store_err(&self.registry, format!("unsupported schema {}", registry.schema)));
                }
                Ok(Deployer { chain, registry, audit: Vec::new() })
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Deployer::attach(chain, trusted),
            Err(e) => Err(store_err(&self.registry, e)),
        }
    }

    /// Persists chain, journal and registry, and appends new audit entries.
    pub fn save(&self, d: &mut Deployer) -> Result<(), DeployError> {
        self.save_audit(d)?;
        self.save_chain(&d.chain)?;
        let mut text = serde_json::to_string_pretty(&d.registry).expect("registry serializes");
        text.push('\n');
        write_atomic(&self.registry, &text)
    }

    /// Appends the deployer's new audit entries and nothing else.
    pub fn save_audit(&self, d: &mut Deployer) -> Result<(), DeployError> {
        if !d.audit.is_empty() {
            let mut f = OpenOptions::new().create(true).append(true).open(&self.audit).map_err(|e| store_err(&self.audit, e))?;
            for e in d.audit.drain(..) {
                let line = serde_json::to_string(&e).expect("audit entry serializes");
                writeln!(f, "{line}").map_err(|e| store_err(&self.audit, e))?;
            }
            f.sync_all().map_err(|e| store_err(&self.audit, e))?;
        }
        Ok(())
    }

    pub fn read_audit(&self) -> Result<Vec<AuditEntry>, DeployError> {
        match fs::read_to_string(&self.audit) {
            Ok(text) => text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(|e| store_err(&self.audit, e))).collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(store_err(&self.audit, e)),
        }
    }
}

impl From<ReplayError> for DeployError {
    fn from(e: ReplayError) -> Self {
        DeployError::Chain(e.to_string())
    }
}
