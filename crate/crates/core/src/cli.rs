//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::assess::{
    assess, classify, load_registry, render_credential_report, render_report, scan_credentials, FuzzReport, Registry,
    VulnerabilityDescriptor,
};
use crate::capture::{load_capture, reassemble};
use crate::codec::tplink::{self, TplinkFrame};
use crate::injector::{run_campaign, TargetSpec};
use crate::mock::{parse_mock_config, serve_on, Device, MockBehavior};
use crate::mutation::generate_campaign;
use crate::protocol::Protocol;
use crate::seeds::{build_corpus, reference_corpus, SeedCorpus};

/// Registry file picked up when `--registry` is not given.
pub const DEFAULT_REGISTRY: &str = "vulnerabilities.reg";

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_VULNERABLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const EXIT_HELP: &str = "\
Exit status:
  0  ran to completion, nothing found
  1  vulnerable: at least one valid verdict or credential finding
  2  usage or configuration error
  3  runtime error (capture, network, file output)";

#[derive(Debug, Parser)]
#[command(name = "iotlexfuzz", version, about = "Lexical fuzzer for IoT device protocols", after_help = EXIT_HELP)]
pub struct Cli {
    /// Vulnerability registry merged over the built-in one. Defaults to
    /// ./vulnerabilities.reg when that file exists.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report HTTP Authorization values found in a capture.
    ScanCredentials(ScanArgs),
    /// Generate a mutation campaign, send it, and classify the replies.
    Fuzz(FuzzArgs),
    /// Mine a seed corpus out of a capture.
    ExtractSeeds(ExtractArgs),
    /// Run a mock device until interrupted.
    MockServe(MockArgs),
    /// Decode (or with --encode, build) SmartHome frames.
    DecodeTplink(DecodeArgs),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub pcap: PathBuf,
    #[arg(long, default_value = "D3D_000")]
    pub vuln: String,
    /// Address of the device in the capture.
    #[arg(long, default_value = "0.0.0.0")]
    pub device_ip: Ipv4Addr,
    #[arg(long)]
    pub verbose: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuzzArgs {
    pub host: String,
    /// Defaults to the vulnerability's registered port.
    pub port: Option<u16>,
    #[arg(long)]
    pub vuln: String,
    /// Must agree with the vulnerability's protocol when given.
    #[arg(long)]
    pub protocol: Option<Protocol>,
    /// Capture to mine seeds from; for passive vulnerabilities, the capture
    /// to scan.
    #[arg(long)]
    pub pcap: Option<PathBuf>,
    #[arg(long, default_value = "0.0.0.0")]
    pub device_ip: Ipv4Addr,
    /// Seed corpus file; the device's reference requests are used when
    /// neither this nor --pcap is given.
    #[arg(long, conflicts_with = "pcap")]
    pub seeds: Option<PathBuf>,
    /// Mutants to generate; defaults to the registered campaign size.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Read timeout per exchange.
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    #[arg(long)]
    pub connect_timeout_ms: Option<u64>,
    #[arg(long)]
    pub pacing_ms: Option<u64>,
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long)]
    pub verbose: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub pcap: PathBuf,
    #[arg(long, default_value = "0.0.0.0")]
    pub device_ip: Ipv4Addr,
    #[arg(long, default_value = "device")]
    pub device: String,
    /// Write the corpus here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockArgs {
    /// Behaviour file; overrides --device and --protocol.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "d3d")]
    pub device: String,
    #[arg(long, default_value = "HTTP")]
    pub protocol: Protocol,
    #[arg(long)]
    pub listen: Option<String>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Base64 frames, length prefix included (plaintexts with --encode).
    #[arg(required = true)]
    pub input: Vec<String>,
    #[arg(long)]
    pub encode: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {message}")]
    Usage { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Runtime { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => EXIT_USAGE,
            CliError::Runtime { .. } => EXIT_RUNTIME,
        }
    }
}

fn usage(stage: &'static str, message: impl ToString) -> CliError {
    CliError::Usage {
        stage,
        message: message.to_string(),
    }
}

fn runtime(stage: &'static str, message: impl ToString) -> CliError {
    CliError::Runtime {
        stage,
        message: message.to_string(),
    }
}

/// Parses `argv` (program name first), runs it, and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_CLEAN };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::ScanCredentials(a) => {
            let registry = registry(cli.registry.as_deref())?;
            let vuln = lookup(&registry, &a.vuln)?;
            scan(vuln, &a.pcap, a.device_ip, a.verbose, a.report.as_deref(), out)
        }
        Command::Fuzz(a) => {
            let registry = registry(cli.registry.as_deref())?;
            fuzz(&registry, a, out, err)
        }
        Command::ExtractSeeds(a) => extract(a, out, err),
        Command::MockServe(a) => mock_serve(a, out),
        Command::DecodeTplink(a) => decode(a, out),
    }
}

fn registry(path: Option<&Path>) -> Result<Registry, CliError> {
    let default = Path::new(DEFAULT_REGISTRY);
    match path {
        Some(p) => load_registry(p).map_err(|e| usage("registry", e)),
        None if default.is_file() => load_registry(default).map_err(|e| usage("registry", e)),
        None => Ok(Registry::builtin()),
    }
}

fn lookup<'r>(registry: &'r Registry, id: &str) -> Result<&'r VulnerabilityDescriptor, CliError> {
    registry.get(id).ok_or_else(|| {
        usage(
            "registry",
            format!("unknown vulnerability `{id}` (known: {})", registry.ids().join(", ")),
        )
    })
}

fn emit(text: &str, report: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| runtime("output", e))?;
    if let Some(path) = report {
        fs::write(path, text).map_err(|e| runtime("report", format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn scan(
    vuln: &VulnerabilityDescriptor,
    pcap: &Path,
    device_ip: Ipv4Addr,
    verbose: bool,
    report: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    if vuln.protocol != Protocol::Http || !vuln.is_passive() {
        return Err(usage("scan-credentials", format!("{} is not a passive HTTP credential check", vuln.id)));
    }
    let capture = load_capture(pcap, device_ip).map_err(|e| runtime("capture", e))?;
    let result = scan_credentials(&capture.records, capture.total_frames);
    let text = render_credential_report(&vuln.id, &vuln.name, &pcap.display().to_string(), &result, verbose);
    emit(&text, report, out)?;
    Ok(if result.vulnerable() { EXIT_VULNERABLE } else { EXIT_CLEAN })
}

fn fuzz(registry: &Registry, a: &FuzzArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let vuln = lookup(registry, &a.vuln)?;
    if let Some(p) = a.protocol {
        if p != vuln.protocol {
            return Err(usage("arguments", format!("{} uses {}, not {p}", vuln.id, vuln.protocol)));
        }
    }
    if vuln.is_passive() {
        let pcap = a
            .pcap
            .as_deref()
            .ok_or_else(|| usage("arguments", format!("{} is passive and needs --pcap", vuln.id)))?;
        return scan(vuln, pcap, a.device_ip, a.verbose, a.report.as_deref(), out);
    }

    let corpus = load_seeds(vuln, a, err)?;
    let count = a.count.unwrap_or(vuln.campaign_size);
    let mut target = TargetSpec::new(a.host.clone(), a.port.unwrap_or(vuln.port), vuln.protocol);
    if let Some(ms) = a.timeout_ms {
        target.read_timeout = Duration::from_millis(ms);
    }
    if let Some(ms) = a.connect_timeout_ms {
        target.connect_timeout = Duration::from_millis(ms);
    }
    if let Some(ms) = a.pacing_ms {
        target.pacing = Duration::from_millis(ms);
    }
    if let Some(n) = a.parallel {
        target.max_parallel = n;
    }
    target.validate().map_err(|e| usage("arguments", e))?;

    let report = fuzz_target(vuln, &corpus, registry, &target, count, a.rng_seed)?;
    emit(&render_report(&report, a.verbose), a.report.as_deref(), out)?;
    Ok(if report.vulnerable { EXIT_VULNERABLE } else { EXIT_CLEAN })
}

fn load_seeds(vuln: &VulnerabilityDescriptor, a: &FuzzArgs, err: &mut dyn Write) -> Result<SeedCorpus, CliError> {
    if let Some(path) = &a.seeds {
        return SeedCorpus::load(path).map_err(|e| usage("seeds", e));
    }
    if let Some(path) = &a.pcap {
        let capture = load_capture(path, a.device_ip).map_err(|e| runtime("capture", e))?;
        let messages = reassemble(&capture.records).messages;
        let (corpus, warnings) = build_corpus(&messages, &vuln.device, &path.display().to_string());
        for w in warnings {
            let _ = writeln!(err, "warning: seeds: packet {}: {}", w.packet_index, w.reason);
        }
        return Ok(corpus);
    }
    reference_corpus(&vuln.device)
        .ok_or_else(|| usage("seeds", format!("no reference requests for device `{}`; pass --seeds or --pcap", vuln.device)))
}

/// Generates, sends and classifies one campaign.
pub fn fuzz_target(
    vuln: &VulnerabilityDescriptor,
    corpus: &SeedCorpus,
    registry: &Registry,
    target: &TargetSpec,
    count: usize,
    rng_seed: u64,
) -> Result<FuzzReport, CliError> {
    let mutants =
        generate_campaign(corpus, vuln, &registry.dictionaries, count, rng_seed).map_err(|e| usage("campaign", e))?;
    let start = Instant::now();
    let exchanges = run_campaign(target, &mutants).map_err(|e| runtime("injection", e))?;
    let duration = start.elapsed();
    let verdicts = exchanges.iter().map(|x| classify(vuln, x)).collect();
    Ok(assess(vuln, &format!("{}:{}", target.host, target.port), verdicts, duration))
}

fn extract(a: &ExtractArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let capture = load_capture(&a.pcap, a.device_ip).map_err(|e| runtime("capture", e))?;
    let messages = reassemble(&capture.records).messages;
    let (corpus, warnings) = build_corpus(&messages, &a.device, &a.pcap.display().to_string());
    for w in &warnings {
        let _ = writeln!(err, "warning: seeds: packet {}: {}", w.packet_index, w.reason);
    }
    match &a.out {
        Some(path) => corpus.save(path).map_err(|e| runtime("seeds", e))?,
        None => out.write_all(corpus.to_text().as_bytes()).map_err(|e| runtime("output", e))?,
    }
    let _ = writeln!(err, "{} seeds from {} messages", corpus.len(), messages.len());
    Ok(EXIT_CLEAN)
}

fn mock_serve(a: &MockArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut behavior = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage("mock config", format!("{}: {e}", path.display())))?;
            parse_mock_config(&text).map_err(|e| usage("mock config", e))?
        }
        None => {
            let device: Device = a.device.parse().map_err(|e| usage("arguments", e))?;
            MockBehavior::new(device, a.protocol)
        }
    };
    if let Some(listen) = &a.listen {
        behavior.listen = listen.clone();
    }
    let bind = behavior.listen.clone();
    let (device, protocol) = (behavior.device, behavior.protocol);
    let handle = serve_on(behavior, &bind).map_err(|e| runtime("mock bind", format!("{bind}: {e}")))?;
    let _ = writeln!(out, "{device} {protocol} mock listening on {}", handle.addr());
    let _ = out.flush();
    handle.wait();
    Ok(EXIT_CLEAN)
}

fn decode(a: &DecodeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    for input in &a.input {
        let line = if a.encode {
            STANDARD.encode(TplinkFrame::from_plain(input.as_bytes()).to_bytes())
        } else {
            let bytes = STANDARD
                .decode(input.trim())
                .map_err(|e| usage("decode", format!("`{input}`: {e}")))?;
            let frame = TplinkFrame::parse(&bytes).map_err(|e| usage("decode", format!("`{input}`: {e}")))?;
            format!(
                "Len: {} Cmd: {}",
                frame.length,
                String::from_utf8_lossy(&tplink::decode(&frame.cipher))
            )
        };
        writeln!(out, "{line}").map_err(|e| runtime("output", e))?;
    }
    Ok(EXIT_CLEAN)
}
