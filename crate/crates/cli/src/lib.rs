//! Command-line front end: golden vectors, BER sweeps, code search,
//! capacity curves and the spectral-efficiency table.

use std::fmt::Write as _;
use std::io::Read as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex;
use ptcm::channel::{stream_rng, NOISE_ALGORITHM};
use ptcm::code::{CodeError, CodeSpec, GeneratorSet, Labeling, PuncturingScheme, Rate};
use ptcm::experiments::report::{ber_csv, capacity_csv, search_csv, Metadata};
use ptcm::experiments::{
    capacity_vs_ebn0, code_search, ebn0_grid, required_ebn0, simulate_ber_with, CapacityCurve, ExperimentError,
    SimOptions,
};
use ptcm::pipeline::{encode_frame_with, FrameLayout, PipelineError};
use ptcm::trellis::{build_trellis, TrellisError};
use ptcm::viterbi::{decode_block_traced, decode_qam_block, ViterbiError};
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PTCM_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("code-model: {0}")]
    Code(#[from] CodeError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] PipelineError),
    #[error("trellis-builder: {0}")]
    Trellis(#[from] TrellisError),
    #[error("viterbi: {0}")]
    Viterbi(#[from] ViterbiError),
    #[error("experiments: {0}")]
    Experiments(#[from] ExperimentError),
    #[error("input: {0}")]
    Input(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "ptcm", version, about = "Punctured trellis-coded modulation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output file (stdout when absent).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; defaults to $PTCM_WORKERS, then the core count.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Encode bits to a `k,label,level` frame dump.
    Encode(EncodeArgs),
    /// Decode received samples (last CSV field per line, or `re,im` with --qam).
    Decode(DecodeArgs),
    /// BER sweep over an Eb/N0 grid.
    Ber(BerArgs),
    /// Exhaustive generator and puncturing search.
    Search(SearchArgs),
    /// Capacity limits against Eb/N0.
    Capacity(CapacityArgs),
    /// Required Eb/N0 at a target BER for a list of configurations.
    Efficiency(EfficiencyArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpecArgs {
    /// Octal generators `g1,g2`.
    #[arg(long = "gen", default_value = "26,37")]
    pub generators: String,
    /// Puncturing matrix rows, `;`-separated.
    #[arg(long = "punct", default_value = "1 0;1 1")]
    pub scheme: String,
    #[arg(long = "M", default_value_t = 4)]
    pub m: u32,
    /// Uncoded bits per symbol; defaults to log2(M) - 2.
    #[arg(long = "n-u")]
    pub n_u: Option<u32>,
    /// natural, gray or lookup:l0,l1,...
    #[arg(long, default_value = "natural")]
    pub labeling: String,
    /// Pair ASK symbols into square QAM.
    #[arg(long)]
    pub qam: bool,
}

impl SpecArgs {
    pub fn spec(&self) -> Result<CodeSpec, CliError> {
        let generators: GeneratorSet = self.generators.parse()?;
        let scheme: PuncturingScheme = self.scheme.parse()?;
        let labeling: Labeling = self.labeling.parse()?;
        let n_u = self.n_u.unwrap_or(self.m.trailing_zeros().saturating_sub(2));
        Ok(CodeSpec::new(generators, scheme, self.m, n_u, labeling)?)
    }

    fn canonical(&self) -> Result<Self, CliError> {
        let spec = self.spec()?;
        Ok(Self {
            generators: spec.generators().to_string(),
            scheme: spec.scheme().to_string(),
            m: spec.m(),
            n_u: Some(spec.n_u()),
            labeling: spec.labeling().to_string(),
            qam: self.qam,
        })
    }

    fn multiple(&self) -> usize {
        if self.qam {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Information bits as a 0/1 string.
    #[arg(long, conflicts_with = "random")]
    pub info: Option<String>,
    /// Uncoded bits as a 0/1 string (n_u per payload symbol).
    #[arg(long, conflicts_with = "random")]
    pub uncoded: Option<String>,
    /// Draw this many random information bits (and matching uncoded bits).
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DecodeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Received samples; `-` reads stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// Also write the per-step metric trace (`step,state,metric`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BerArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Eb/N0 grid `start:step:stop` in dB.
    #[arg(long, default_value = "6:0.5:12", allow_hyphen_values = true)]
    pub ebn0: String,
    /// Minimum information bits per grid point.
    #[arg(long, default_value_t = 100_000)]
    pub bits: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Information bits per frame.
    #[arg(long, default_value_t = 1200)]
    pub frame_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SearchArgs {
    /// Encoder memory.
    #[arg(long, default_value_t = 2)]
    pub nu: u32,
    /// Puncturing period.
    #[arg(long, default_value_t = 2)]
    pub period: usize,
    #[arg(long = "M", default_value_t = 4)]
    pub m: u32,
    #[arg(long, default_value = "6:0.5:12", allow_hyphen_values = true)]
    pub ebn0: String,
    #[arg(long, default_value_t = 10_000)]
    pub bits: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CapacityArgs {
    /// Curves: 4ask, 16qam, shannon-real, shannon-complex (comma-separated).
    #[arg(long, default_value = "4ask", value_delimiter = ',')]
    pub constellation: Vec<String>,
    #[arg(long, default_value = "-2:1:25", allow_hyphen_values = true)]
    pub ebn0: String,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EfficiencyArgs {
    /// Configurations `g1,g2/scheme/M`; defaults to the rate table codes on
    /// 4-ASK plus the 8-ASK code with one uncoded bit.
    #[arg(long = "spec")]
    pub specs: Vec<String>,
    /// Also report each configuration paired onto QAM.
    #[arg(long)]
    pub qam: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub target: f64,
    /// Sweep grid searched upwards until the target is crossed.
    #[arg(long, default_value = "3:0.25:16", allow_hyphen_values = true)]
    pub ebn0: String,
    #[arg(long, default_value_t = 200_000)]
    pub bits: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub const DEFAULT_EFFICIENCY_SPECS: [&str; 6] = [
    "26,37/1 0;1 1/4",
    "36,23/1 1 1;1 0 0/4",
    "34,31/1 0 1 0;1 1 0 1/4",
    "04,37/1 1 1 1 0;1 0 0 0 1/4",
    "34,31/1 0 1 0 1 0;1 1 0 1 0 1/4",
    "26,37/1 0;1 1/8",
];

fn parse_spec_triple(text: &str) -> Result<SpecArgs, CliError> {
    let parts: Vec<&str> = text.split('/').collect();
    let [generators, scheme, m] = parts.as_slice() else {
        return Err(CliError::Input(format!("expected `g1,g2/scheme/M`, got `{text}`")));
    };
    let m = m
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("bad M in `{text}`")))?;
    Ok(SpecArgs {
        generators: generators.trim().to_string(),
        scheme: scheme.trim().to_string(),
        m,
        n_u: None,
        labeling: "natural".into(),
        qam: false,
    })
}

/// A fully parsed invocation. Its canonical JSON form is written into every
/// output header, so a run can be repeated from its output alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse_from<I, T>(argv: I) -> Result<(Self, Option<usize>), clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(argv)?;
        Ok((
            RunConfig {
                command: cli.command,
                output: cli.output,
            },
            cli.workers,
        ))
    }

    /// Normalizes spec text to the parse formats' display forms.
    pub fn canonical(&self) -> Result<Self, CliError> {
        let mut out = self.clone();
        match &mut out.command {
            Command::Encode(a) => a.spec = a.spec.canonical()?,
            Command::Decode(a) => a.spec = a.spec.canonical()?,
            Command::Ber(a) => a.spec = a.spec.canonical()?,
            Command::Efficiency(a) => {
                if a.specs.is_empty() {
                    a.specs = DEFAULT_EFFICIENCY_SPECS.iter().map(|s| s.to_string()).collect();
                }
                for s in a.specs.iter_mut() {
                    let c = parse_spec_triple(s)?.canonical()?;
                    *s = format!("{}/{}/{}", c.generators, c.scheme, c.m);
                }
            }
            Command::Search(_) | Command::Capacity(_) => {}
        }
        Ok(out)
    }

    /// Canonical text of everything that affects results (output path excluded).
    pub fn canonical_text(&self) -> Result<String, CliError> {
        let mut c = self.canonical()?;
        c.output = None;
        Ok(serde_json::to_string(&c)?)
    }

    pub fn from_canonical_text(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn config_hash(&self) -> Result<String, CliError> {
        let digest = Sha256::digest(self.canonical_text()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    fn seed(&self) -> Option<u64> {
        match &self.command {
            Command::Encode(a) => Some(a.seed),
            Command::Ber(a) => Some(a.seed),
            Command::Search(a) => Some(a.seed),
            Command::Efficiency(a) => Some(a.seed),
            Command::Decode(_) | Command::Capacity(_) => None,
        }
    }

    fn metadata(&self) -> Result<Metadata, CliError> {
        let name = match &self.command {
            Command::Encode(_) => "encode",
            Command::Decode(_) => "decode",
            Command::Ber(_) => "ber",
            Command::Search(_) => "search",
            Command::Capacity(_) => "capacity",
            Command::Efficiency(_) => "efficiency",
        };
        let mut meta = Metadata::new()
            .with("tool", "ptcm")
            .with("version", env!("CARGO_PKG_VERSION"))
            .with("subcommand", name);
        if let Some(seed) = self.seed() {
            meta = meta.with("seed", seed).with("noise", NOISE_ALGORITHM);
        }
        Ok(meta
            .with("config_hash", self.config_hash()?)
            .with("config", self.canonical_text()?))
    }
}

/// Extracts the run configuration from an output's metadata header.
pub fn config_from_output(text: &str) -> Result<RunConfig, CliError> {
    let meta = ptcm::experiments::report::read_metadata(text);
    let json = meta
        .get("config")
        .ok_or_else(|| CliError::Input("no config line in header".into()))?;
    RunConfig::from_canonical_text(json)
}

fn parse_bits(text: &str) -> Result<Vec<u8>, CliError> {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(CliError::Input(format!("bit strings take 0/1, found `{other}`"))),
        })
        .collect()
}

fn bit_string(bits: &[u8]) -> String {
    bits.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect()
}

fn random_bits(rng: &mut impl RngCore, n: usize) -> Vec<u8> {
    (0..n).map(|_| (rng.next_u32() & 1) as u8).collect()
}

fn grid(text: &str) -> Result<Vec<f64>, CliError> {
    Ok(ebn0_grid(text)?)
}

fn encode(args: &EncodeArgs, mut meta: Metadata) -> Result<String, CliError> {
    let spec = args.spec.spec()?;
    let multiple = args.spec.multiple();
    let (info, uncoded) = match args.random {
        Some(n) => {
            let mut rng = stream_rng(args.seed, 0);
            let info = random_bits(&mut rng, n);
            let layout = FrameLayout::new(&spec, n, multiple)?;
            let uncoded = random_bits(&mut rng, spec.n_u() as usize * layout.payload_symbols);
            (info, uncoded)
        }
        None => (
            parse_bits(args.info.as_deref().unwrap_or(""))?,
            parse_bits(args.uncoded.as_deref().unwrap_or(""))?,
        ),
    };
    let frame = encode_frame_with(&spec, &info, &uncoded, multiple)?;
    meta = meta
        .with("info", bit_string(&info))
        .with("uncoded", bit_string(&uncoded))
        .with("tail_symbols", frame.tail_len);
    let mut out = ptcm::experiments::report::header(&meta);
    out.push_str(&frame.dump_csv());
    Ok(out)
}

fn read_input(path: &PathBuf) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

/// Trailing numeric fields of each data line; comment and header lines are
/// skipped.
fn parse_samples(text: &str, per_line: usize) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < per_line {
            return Err(CliError::Input(format!("too few fields in `{line}`")));
        }
        let tail = &fields[fields.len() - per_line..];
        match tail.iter().map(|f| f.parse::<f64>()).collect::<Result<Vec<_>, _>>() {
            Ok(values) => out.extend(values),
            Err(_) if out.is_empty() => continue,
            Err(_) => return Err(CliError::Input(format!("non-numeric sample in `{line}`"))),
        }
    }
    Ok(out)
}

fn decode(args: &DecodeArgs, meta: Metadata) -> Result<String, CliError> {
    let spec = args.spec.spec()?;
    let trellis = build_trellis(&spec)?;
    let text = read_input(&args.input)?;
    let multiple = args.spec.multiple();
    let samples = parse_samples(&text, if args.spec.qam { 2 } else { 1 })?;
    let layout = FrameLayout::from_symbol_count(&spec, samples.len(), multiple)?;
    let (result, trace) = if args.spec.qam {
        let rx: Vec<Complex<f64>> = samples.chunks(2).map(|p| Complex::new(p[0], p[1])).collect();
        (decode_qam_block(&trellis, &rx, &layout)?, Vec::new())
    } else {
        decode_block_traced(&trellis, &samples, &layout)?
    };
    if let Some(path) = &args.trace {
        let mut t = String::from("step,state,metric\n");
        for row in &trace {
            let _ = writeln!(t, "{},{},{}", row.step, row.state, row.metric);
        }
        std::fs::write(path, t)?;
    }
    let meta = meta
        .with("info_bits", layout.info_bits)
        .with("best_metric", result.best_metric);
    let mut out = ptcm::experiments::report::header(&meta);
    out.push_str("stream,bits\n");
    let _ = writeln!(out, "info,{}", bit_string(&result.coded_info_bits));
    let _ = writeln!(out, "uncoded,{}", bit_string(&result.uncoded_bits));
    Ok(out)
}

fn ber(args: &BerArgs, meta: Metadata) -> Result<String, CliError> {
    let spec = args.spec.spec()?;
    let opts = SimOptions {
        frame_info_bits: args.frame_bits,
        qam: args.spec.qam,
    };
    let records = simulate_ber_with(&spec, &grid(&args.ebn0)?, args.bits, args.seed, opts)?;
    Ok(ber_csv(&meta.with("bits_counted", "coded+uncoded, tail excluded"), &records))
}

fn search(args: &SearchArgs, meta: Metadata) -> Result<String, CliError> {
    let ranked = code_search(args.nu, args.period, args.m, &grid(&args.ebn0)?, args.bits, args.seed)?;
    Ok(search_csv(&meta.with("score", "sum of BER over the grid"), &ranked))
}

fn capacity(args: &CapacityArgs, meta: Metadata) -> Result<String, CliError> {
    let curves: Vec<CapacityCurve> = args
        .constellation
        .iter()
        .map(|c| c.parse())
        .collect::<Result<_, ExperimentError>>()?;
    let mut rows = Vec::new();
    for curve in &curves {
        for db in grid(&args.ebn0)? {
            rows.push((db, capacity_vs_ebn0(*curve, db)?, curve.id()));
        }
    }
    Ok(capacity_csv(&meta, &rows))
}

fn efficiency(args: &EfficiencyArgs, meta: Metadata) -> Result<String, CliError> {
    let sweep = grid(&args.ebn0)?;
    let mut out = ptcm::experiments::report::header(&meta.with("target_ber", args.target));
    out.push_str("required_ebn0_db,bits_per_symbol,rate,g1_octal,g2_octal,scheme,m,n_u,modulation\n");
    let specs: Vec<String> = if args.specs.is_empty() {
        DEFAULT_EFFICIENCY_SPECS.iter().map(|s| s.to_string()).collect()
    } else {
        args.specs.clone()
    };
    for text in &specs {
        let spec = parse_spec_triple(text)?.spec()?;
        let variants: &[bool] = if args.qam { &[false, true] } else { &[false] };
        for &qam in variants {
            let opts = SimOptions {
                qam,
                ..SimOptions::default()
            };
            let (db, _) = required_ebn0(&spec, args.target, &sweep, args.bits, args.seed, opts)?;
            let rate = if qam {
                spec.overall_rate() * Rate::from(2)
            } else {
                spec.overall_rate()
            };
            let per_symbol = *rate.numer() as f64 / *rate.denom() as f64;
            let modulation = if qam {
                format!("{}qam", spec.m() * spec.m())
            } else {
                format!("{}ask", spec.m())
            };
            let _ = writeln!(
                out,
                "{db:.4},{per_symbol:.6},{rate},{:o},{:o},{},{},{},{modulation}",
                spec.generators().g1(),
                spec.generators().g2(),
                spec.scheme(),
                spec.m(),
                spec.n_u()
            );
        }
    }
    Ok(out)
}

/// Runs a configuration and returns the CSV text.
pub fn execute(config: &RunConfig) -> Result<String, CliError> {
    let meta = config.metadata()?;
    match &config.command {
        Command::Encode(a) => encode(a, meta),
        Command::Decode(a) => decode(a, meta),
        Command::Ber(a) => ber(a, meta),
        Command::Search(a) => search(a, meta),
        Command::Capacity(a) => capacity(a, meta),
        Command::Efficiency(a) => efficiency(a, meta),
    }
}

fn worker_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn run_inner(config: &RunConfig, workers: Option<usize>) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count(workers)? {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Input(format!("worker pool: {e}")))?;
    let text = pool.install(|| execute(config))?;
    match &config.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let (config, workers) = match RunConfig::parse_from(argv) {
        Ok(parsed) => parsed,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_inner(&config, workers) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        RunConfig::parse_from(std::iter::once("ptcm").chain(args.iter().copied()))
            .unwrap()
            .0
    }

    #[test]
    fn canonical_round_trip() {
        let c = parse(&["ber", "--gen", "026,037", "--punct", "1  0 ; 1 1", "--ebn0", "6:1:8"]);
        let text = c.canonical_text().unwrap();
        let back = RunConfig::from_canonical_text(&text).unwrap();
        assert_eq!(back.canonical_text().unwrap(), text);
        assert_eq!(back, c.canonical().unwrap());
        let Command::Ber(b) = &back.command else { panic!() };
        assert_eq!(b.spec.generators, "26,37");
        assert_eq!(b.spec.scheme, "1 0;1 1");
        assert_eq!(b.spec.n_u, Some(0));
    }

    #[test]
    fn output_path_does_not_change_hash() {
        let a = parse(&["capacity"]);
        let b = parse(&["capacity", "-o", "/tmp/x.csv"]);
        assert_eq!(a.config_hash().unwrap(), b.config_hash().unwrap());
        assert_ne!(a.config_hash().unwrap(), parse(&["capacity", "--ebn0", "0:1:3"]).config_hash().unwrap());
    }

    #[test]
    fn spec_triples() {
        let s = parse_spec_triple("26,37/1 0;1 1/8").unwrap().spec().unwrap();
        assert_eq!(s.n_u(), 1);
        assert_eq!(s.overall_rate(), Rate::new(7, 3));
        assert!(parse_spec_triple("26,37/1 0;1 1").is_err());
    }

    #[test]
    fn samples() {
        let v = parse_samples("# x=1\nk,label,level\n0,1,-1\n1,3,3\n", 1).unwrap();
        assert_eq!(v, vec![-1.0, 3.0]);
        let v = parse_samples("0.5,-1.5\n2,3\n", 2).unwrap();
        assert_eq!(v, vec![0.5, -1.5, 2.0, 3.0]);
        assert!(parse_samples("1\nx\n", 1).is_err());
        assert!(parse_bits("0120").is_err());
    }
}
