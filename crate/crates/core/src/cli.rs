//! The `tdep` command line.
//!
//! Exit codes: 0 success or PASS, 1 verification FAIL, 2 usage or
//! configuration error, 3 internal error or inconclusive verification.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ethnum::U256;
use serde::Deserialize;
use serde_json::{json, Value as Json};

use crate::conformance::{verify, Backend, Category, Mode, Report};
use crate::deployer::{DeployError, Store, DEFAULT_TRUSTED};
use crate::frontend::{self, TypeExpr};
use crate::proxy::generate_proxy_for_source;
use crate::sim::persist::{parse_args, receipt_to_json, account_storage_json, ApplyError, ScriptOp, StepResult};
use crate::sim::{Address, Code, Value};
use crate::spec::{parse_spec, ContractSpec, SpecId};
use crate::verify::{parse_scenario, BoundedBackend, BoundedConfig, ExternalBackend, RuntimeBackend, ToolConfig};

pub const CONFIG_ENV: &str = "TDEP_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "tdep", version, about = "Verify, deploy and upgrade contracts against immutable specifications")]
pub struct Cli {
    /// Configuration file; defaults to $TDEP_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an implementation against a specification.
    Verify(VerifyArgs),
    /// Verify and deploy an implementation behind a proxy.
    Deploy(DeployArgs),
    /// Verify and install a new implementation behind an existing proxy.
    Upgrade(UpgradeArgs),
    /// Print the spec id registered for an address, or `none`.
    SpecOf(SpecOfArgs),
    /// Print the proxy generated for an implementation.
    ProxyGen(ProxyGenArgs),
    /// Operate on a chain file directly.
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Runtime,
    Bounded,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Create,
    Upgrade,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// JSON-lines scenario for the runtime backend.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Bounded backend: calls per sequence.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Bounded backend: comma-separated uint domain.
    #[arg(long, value_delimiter = ',')]
    pub uint_domain: Option<Vec<String>>,
    /// Bounded backend: transition budget.
    #[arg(long)]
    pub max_explored: Option<usize>,
    /// Write the verification report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long = "impl")]
    pub implementation: PathBuf,
    #[arg(long, value_enum, default_value = "create")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct DeployArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long = "impl")]
    pub implementation: PathBuf,
    /// Constructor arguments as a JSON array.
    #[arg(long, default_value = "[]")]
    pub args: String,
    #[arg(long)]
    pub developer: String,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct UpgradeArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub proxy: Address,
    #[arg(long = "impl")]
    pub implementation: PathBuf,
    #[arg(long)]
    pub developer: String,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct SpecOfArgs {
    #[arg(long)]
    pub chain: PathBuf,
    pub address: Address,
    /// Also query the on-chain registry and compare.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Args)]
pub struct ProxyGenArgs {
    #[arg(long = "impl")]
    pub implementation: PathBuf,
    /// Spec whose id the proxy stores.
    #[arg(long, conflicts_with = "spec_id", required_unless_present = "spec_id")]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub spec_id: Option<SpecId>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Credit Wei to an account.
    Fund {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        to: Address,
        #[arg(long)]
        value: String,
    },
    /// Create a contract from a source file.
    Create {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        code: PathBuf,
        #[arg(long, default_value = "[]")]
        args: String,
        #[arg(long)]
        from: Address,
        #[arg(long, default_value = "0")]
        value: String,
    },
    /// Call a public function; an empty signature reaches the fallback.
    Call {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        to: Address,
        #[arg(long, default_value = "")]
        sig: String,
        #[arg(long, default_value = "[]")]
        args: String,
        #[arg(long)]
        from: Address,
        #[arg(long, default_value = "0")]
        value: String,
    },
    /// Apply one transaction given as a JSON object.
    Tx {
        #[arg(long)]
        chain: PathBuf,
        tx: String,
    },
    /// Print an account, or one variable of it.
    State {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        address: Address,
        #[arg(long)]
        var: Option<String>,
        /// Mapping keys or array indices, outermost first.
        #[arg(long = "key")]
        keys: Vec<String>,
    },
}

/// Settings read from the configuration file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub trusted_address: Option<Address>,
    pub backend: Option<BackendKind>,
    pub bounded: BoundedSection,
    pub external: Option<ToolConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundedSection {
    pub sequence_depth: Option<usize>,
    pub uint_domain: Option<Vec<String>>,
    pub array_len_bound: Option<usize>,
    pub max_explored: Option<usize>,
    pub workers: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }

    fn trusted(&self) -> Address {
        self.trusted_address.unwrap_or(DEFAULT_TRUSTED)
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Verification ran and failed.
    Fail(String),
    /// Verification ran and could not conclude.
    Inconclusive(String),
    Usage(String),
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Fail(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Internal(_) | Failure::Inconclusive(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Fail(m) | Failure::Inconclusive(m) | Failure::Usage(m) | Failure::Internal(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn origin(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn load_spec(path: &Path) -> Result<ContractSpec, Failure> {
    parse_spec(&read(path)?, &origin(path)).map_err(usage)
}

fn parse_u256(s: &str) -> Result<U256, Failure> {
    crate::sim::value::parse_uint(s).ok_or_else(|| usage(format!("not an unsigned integer: `{s}`")))
}

fn json_args(text: &str) -> Result<Vec<Json>, Failure> {
    match serde_json::from_str(text) {
        Ok(Json::Array(a)) => Ok(a),
        Ok(_) => Err(usage("arguments must be a JSON array")),
        Err(e) => Err(usage(format!("arguments: {e}"))),
    }
}

fn bounded_config(cfg: &Config, b: &BackendArgs) -> Result<BoundedConfig, Failure> {
    let mut out = BoundedConfig::default();
    let s = &cfg.bounded;
    if let Some(d) = b.depth.or(s.sequence_depth) {
        out.sequence_depth = d;
    }
    if let Some(dom) = b.uint_domain.as_ref().or(s.uint_domain.as_ref()) {
        out.uint_domain = dom.iter().map(|v| parse_u256(v.trim())).collect::<Result<_, _>>()?;
    }
    if let Some(n) = s.array_len_bound {
        out.array_len_bound = n;
    }
    if let Some(n) = b.max_explored.or(s.max_explored) {
        out.max_explored = n;
    }
    if let Some(n) = s.workers {
        out.workers = n.max(1);
    }
    out.validate().map_err(usage)?;
    Ok(out)
}

/// Resolves `create` paths in a scenario relative to the scenario file.
fn scenario_loader(base: PathBuf) -> impl FnMut(&str) -> Result<Arc<Code>, String> {
    move |p: &str| {
        let path = base.join(p);
        let src = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        Code::from_source(&src, p).map_err(|d| d.to_string())
    }
}

fn make_backend(cfg: &Config, b: &BackendArgs) -> Result<Box<dyn Backend>, Failure> {
    let kind = b.backend.or(cfg.backend).unwrap_or(BackendKind::Bounded);
    Ok(match kind {
        BackendKind::Bounded => Box::new(BoundedBackend::new(bounded_config(cfg, b)?)),
        BackendKind::External => Box::new(ExternalBackend { tool: cfg.external.clone().unwrap_or_default() }),
        BackendKind::Runtime => {
            let path = b.scenario.as_ref().ok_or_else(|| usage("the runtime backend needs --scenario"))?;
            let ops = parse_scenario(&read(path)?).map_err(usage)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Box::new(RuntimeBackend::new(ops, scenario_loader(base)))
        }
    })
}

fn write_report(b: &BackendArgs, r: &Report) -> Result<(), Failure> {
    if let Some(path) = &b.report {
        crate::deployer::write_atomic(path, &(r.to_json_string() + "\n")).map_err(internal)?;
    }
    Ok(())
}

fn finding_lines(r: &Report) -> String {
    r.findings.iter().map(|f| format!("\n  {} {}: {}", f.category, f.site, f.message)).collect()
}

/// FAIL with a real violation is exit 1; FAIL on inconclusive findings alone is exit 3.
fn verdict_failure(r: &Report) -> Failure {
    let msg = format!("FAIL ({} finding(s)){}", r.findings.len(), finding_lines(r));
    if r.findings.iter().all(|f| f.category == Category::VRE) {
        Failure::Inconclusive(msg)
    } else {
        Failure::Fail(msg)
    }
}

fn deploy_failure(e: DeployError) -> Failure {
    match e {
        DeployError::VerificationFailed(r) => verdict_failure(&r),
        DeployError::NotOwner { .. } | DeployError::UnknownProxy(_) | DeployError::Parse(_) | DeployError::Spec(_) | DeployError::Proxy(_) => usage(e),
        DeployError::Chain(_) | DeployError::Store { .. } => internal(e),
    }
}

fn cmd_verify(cfg: &Config, a: &VerifyArgs, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    let spec = load_spec(&a.spec)?;
    let unit = frontend::parse_unit(&read(&a.implementation)?, &origin(&a.implementation)).map_err(usage)?;
    let mut backend = make_backend(cfg, &a.backend)?;
    let mode = match a.mode {
        ModeArg::Create => Mode::Create,
        ModeArg::Upgrade => Mode::Upgrade,
    };
    let r = verify(&spec, &unit, backend.as_mut(), mode).map_err(usage)?;
    write_report(&a.backend, &r)?;
    if r.passed() {
        writeln!(out, "PASS").map_err(internal)
    } else {
        Err(verdict_failure(&r))
    }
}

fn cmd_deploy(cfg: &Config, a: &DeployArgs, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    let spec = load_spec(&a.spec)?;
    let source = read(&a.implementation)?;
    let unit = frontend::parse_unit(&source, &origin(&a.implementation)).map_err(usage)?;
    let types: Vec<TypeExpr> = unit.constructor().map(|c| c.params.iter().map(|p| p.ty.clone()).collect()).unwrap_or_default();
    let args = parse_args(&types, &json_args(&a.args)?).map_err(usage)?;
    let mut backend = make_backend(cfg, &a.backend)?;
    let store = Store::beside(&a.chain);
    let _lock = store.lock().map_err(internal)?;
    let mut d = store.open(cfg.trusted()).map_err(internal)?;
    let res = d.create_contract(&spec, &source, &origin(&a.implementation), args, &a.developer, backend.as_mut());
    match res {
        Ok((px, r)) => {
            store.save(&mut d).map_err(internal)?;
            write_report(&a.backend, &r)?;
            writeln!(out, "{px}").map_err(internal)
        }
        Err(e) => {
            store.save_audit(&mut d).map_err(internal)?;
            if let Some(r) = e.report() {
                write_report(&a.backend, r)?;
            }
            Err(deploy_failure(e))
        }
    }
}

fn cmd_upgrade(cfg: &Config, a: &UpgradeArgs, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    let source = read(&a.implementation)?;
    let mut backend = make_backend(cfg, &a.backend)?;
    let store = Store::beside(&a.chain);
    let _lock = store.lock().map_err(internal)?;
    let mut d = store.open(cfg.trusted()).map_err(internal)?;
    match d.upgrade_contract(a.proxy, &source, &origin(&a.implementation), &a.developer, backend.as_mut()) {
        Ok(r) => {
            store.save(&mut d).map_err(internal)?;
            write_report(&a.backend, &r)?;
            let imp = d.record(a.proxy).map(|r| r.current_impl).expect("record exists after upgrade");
            writeln!(out, "{imp}").map_err(internal)
        }
        Err(e) => {
            store.save_audit(&mut d).map_err(internal)?;
            if let Some(r) = e.report() {
                write_report(&a.backend, r)?;
            }
            Err(deploy_failure(e))
        }
    }
}

fn cmd_spec_of(cfg: &Config, a: &SpecOfArgs, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    let store = Store::beside(&a.chain);
    let d = store.open(cfg.trusted()).map_err(internal)?;
    let mine = d.get_spec(a.address);
    if a.audit {
        let on = d.onchain_spec(a.address).map_err(internal)?;
        if on != mine.unwrap_or(SpecId([0; 32])) {
            return Err(Failure::Internal(format!("registry mismatch for {}: records hold {:?}, chain holds {on}", a.address, mine.map(|s| s.to_string()))));
        }
        d.check_mirror().map_err(Failure::Internal)?;
    }
    match mine {
        Some(id) => writeln!(out, "{id}"),
        None => writeln!(out, "none"),
    }
    .map_err(internal)
}

fn cmd_proxy_gen(a: &ProxyGenArgs, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    let id = match (&a.spec, a.spec_id) {
        (_, Some(id)) => id,
        (Some(p), None) => load_spec(p)?.id().map_err(usage)?,
        (None, None) => return Err(usage("either --spec or --spec-id is required")),
    };
    let p = generate_proxy_for_source(&read(&a.implementation)?, &origin(&a.implementation), id).map_err(usage)?;
    match &a.out {
        Some(path) => crate::deployer::write_atomic(path, &p.source).map_err(internal),
        None => out.write_all(p.source.as_bytes()).map_err(internal),
    }
}

fn sim_apply(chain: &Path, op: ScriptOp, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    let store = Store::beside(chain);
    let _lock = store.lock().map_err(internal)?;
    let mut j = store.load_chain().map_err(internal)?;
    let mut load = |p: &str| -> Result<Arc<Code>, String> {
        let src = fs::read_to_string(p).map_err(|e| format!("{p}: {e}"))?;
        Code::from_source(&src, &origin(Path::new(p))).map_err(|d| d.to_string())
    };
    let res = j.apply(&op, &mut load).map_err(|e| match e {
        ApplyError::Bad(m) => usage(m),
        ApplyError::Sim(e) => internal(e),
    })?;
    store.save_chain(&j).map_err(internal)?;
    let doc = match res {
        StepResult::Receipt(r) => receipt_to_json(&r),
        StepResult::Funded { addr, amount } => json!({ "schema": 1, "status": "success", "funded": addr.to_string(), "amount": amount.to_string() }),
    };
    writeln!(out, "{}", serde_json::to_string(&doc).expect("json")).map_err(internal)
}

fn cmd_sim(c: &SimCommand, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    match c {
        SimCommand::Fund { chain, to, value } => sim_apply(chain, ScriptOp::fund(*to, parse_u256(value)?), out),
        SimCommand::Create { chain, code, args, from, value } => {
            let mut op = ScriptOp::create(&code.display().to_string(), &[], *from, parse_u256(value)?);
            op.args = json_args(args)?;
            sim_apply(chain, op, out)
        }
        SimCommand::Call { chain, to, sig, args, from, value } => {
            let mut op = ScriptOp::call(*to, sig, &[], *from, parse_u256(value)?);
            op.args = json_args(args)?;
            sim_apply(chain, op, out)
        }
        SimCommand::Tx { chain, tx } => {
            let op: ScriptOp = serde_json::from_str(tx).map_err(|e| usage(format!("transaction: {e}")))?;
            sim_apply(chain, op, out)
        }
        SimCommand::State { chain, address, var, keys } => {
            let j = Store::beside(chain).load_chain().map_err(internal)?;
            let st = &j.state;
            let doc = match var {
                Some(v) => {
                    let path = state_path(st, *address, v, keys)?;
                    let value = st.read_var(*address, v, &path).map_err(usage)?;
                    return match value.to_json() {
                        Json::String(s) => writeln!(out, "{s}"),
                        other => writeln!(out, "{other}"),
                    }
                    .map_err(internal);
                }
                None => {
                    let acc = st.account(*address);
                    json!({
                        "schema": 1,
                        "address": address.to_string(),
                        "balance": st.balance(*address).to_string(),
                        "code": acc.and_then(|a| a.code.as_ref()).map(|c| c.name().to_string()),
                        "storage": acc.map(account_storage_json).unwrap_or_else(|| json!({})),
                    })
                }
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json")).map_err(internal)
        }
    }
}

/// Converts `--key` strings using the key types along `var`'s type.
fn state_path(st: &crate::sim::ChainState, addr: Address, var: &str, keys: &[String]) -> Result<Vec<Value>, Failure> {
    let code = st.code(addr).ok_or_else(|| usage(format!("{addr} holds no code")))?;
    let mut ty = &code.unit.vars.iter().find(|v| v.name == var).ok_or_else(|| usage(format!("`{}` has no member `{var}`", code.name())))?.ty;
    let mut path = Vec::new();
    for k in keys {
        let (kt, next) = match ty {
            TypeExpr::Mapping(k, v) => (k.as_ref().clone(), v.as_ref()),
            TypeExpr::Array(e) => (TypeExpr::Uint256, e.as_ref()),
            t => return Err(usage(format!("cannot index into {t}"))),
        };
        path.push(Value::from_json(&kt, &Json::String(k.clone())).map_err(usage)?);
        ty = next;
    }
    Ok(path)
}

/// Runs a parsed command line, writing normal output to `out`.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    let cfg = match cli.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from)) {
        Some(p) => Config::load(&p)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Verify(a) => cmd_verify(&cfg, a, out),
        Command::Deploy(a) => cmd_deploy(&cfg, a, out),
        Command::Upgrade(a) => cmd_upgrade(&cfg, a, out),
        Command::SpecOf(a) => cmd_spec_of(&cfg, a, out),
        Command::ProxyGen(a) => cmd_proxy_gen(a, out),
        Command::Sim(c) => cmd_sim(c, out),
    }
}

/// Entry point of the binary; returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Fail(m) | Failure::Inconclusive(m) => println!("{m}"),
                _ => eprintln!("tdep: {}", f.message()),
            }
            f.exit_code()
        }
    }
}
