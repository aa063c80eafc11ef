//! Run configuration: one flat key space shared by flags, `XYZCA_*` environment
//! variables and JSON config files. Precedence is flag > environment > file > default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches};
use xyzca::codegrid::{LatticeDims, NoiseParams};
use xyzca::expt::FailureDecoder;

pub const ENV_PREFIX: &str = "XYZCA_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    CertifySize,
    Decode,
    Memtime,
    Threshold,
    Simulate,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] =
        [Subcommand::CertifySize, Subcommand::Decode, Subcommand::Memtime, Subcommand::Threshold, Subcommand::Simulate];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::CertifySize => "certify-size",
            Subcommand::Decode => "decode",
            Subcommand::Memtime => "memtime",
            Subcommand::Threshold => "threshold",
            Subcommand::Simulate => "simulate",
        }
    }

    fn about(self) -> &'static str {
        match self {
            Subcommand::CertifySize => "Count the biased logicals of an L x H lattice and certify it",
            Subcommand::Decode => "Decode a syndrome or error frame given as JSON",
            Subcommand::Memtime => "Measure memory-time half-lives over a list of sizes",
            Subcommand::Threshold => "Scan RG-decoder failure rates under i.i.d. Y/Z noise",
            Subcommand::Simulate => "Run the noise plus automaton dynamics and trace the energy",
        }
    }

    fn from_name(name: &str) -> Option<Subcommand> {
        Subcommand::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Keys this subcommand accepts, with their defaults.
    fn keys(self) -> Vec<KeySpec> {
        let mut keys = vec![
            KeySpec::new("seed", Some("0"), "Base seed; every sample seed derives from it"),
            KeySpec::new("workers", Some("0"), "Worker threads (0 = one per core)"),
            KeySpec::new("out", None, "Output path (stdout if absent)"),
            KeySpec::new(
                "format",
                Some(if self == Subcommand::Decode { "json" } else { "csv" }),
                "Output format: csv or json",
            ),
        ];
        let own: &[KeySpec] = match self {
            Subcommand::CertifySize => &[KeySpec::new("L", None, "Lattice width"), KeySpec::new("H", None, "Lattice height")],
            Subcommand::Decode => &[
                KeySpec::new("input", None, "Syndrome or frame JSON file ('-' for stdin)"),
                KeySpec::new("decoder", Some("exact"), "exact or rg"),
            ],
            Subcommand::Memtime => &[
                KeySpec::new("sizes", Some("6x9"), "Comma-separated sizes, e.g. 6x9,12x15"),
                KeySpec::new("gamma_z", None, "Z error rate per qubit"),
                KeySpec::new("zeta", Some("inf"), "Bias gamma_z / gamma_y"),
                KeySpec::new("ca", Some("true"), "Enable the cellular-automaton decoder"),
                KeySpec::new("samples", Some("100"), "Samples per size"),
                KeySpec::new("decoder", None, "Check decoder: exact (infinite bias) or rg; chosen from zeta if absent"),
                KeySpec::new("check_fraction", Some("0.001"), "Check interval as a fraction of elapsed time"),
                KeySpec::new("time_limit", Some("inf"), "Censoring time"),
                KeySpec::new("run_id", Some("run"), "Label copied into every row"),
            ],
            Subcommand::Threshold => &[
                KeySpec::new("sizes", Some("12x15,24x27,48x51"), "Comma-separated sizes"),
                KeySpec::new("p", Some("0.04,0.06,0.08,0.1,0.12,0.14,0.16"), "Total error probabilities"),
                KeySpec::new("zeta_p", Some("10"), "Bias p_z / p_y"),
                KeySpec::new("trials", Some("400"), "Trials per point"),
            ],
            Subcommand::Simulate => &[
                KeySpec::new("L", None, "Lattice width"),
                KeySpec::new("H", None, "Lattice height"),
                KeySpec::new("gamma_z", None, "Z error rate per qubit"),
                KeySpec::new("zeta", Some("inf"), "Bias gamma_z / gamma_y"),
                KeySpec::new("ca", Some("true"), "Enable the cellular-automaton decoder"),
                KeySpec::new("t_stop", None, "Simulated time to run for"),
                KeySpec::new("interval", None, "Time between trace rows (default t_stop / 100)"),
            ],
        };
        keys.extend_from_slice(own);
        keys
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
struct KeySpec {
    name: &'static str,
    default: Option<&'static str>,
    help: &'static str,
}

impl KeySpec {
    const fn new(name: &'static str, default: Option<&'static str>, help: &'static str) -> Self {
        KeySpec { name, default, help }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    CertifySize {
        dims: LatticeDims,
    },
    Decode {
        input: PathBuf,
        decoder: FailureDecoder,
    },
    Memtime {
        sizes: Vec<LatticeDims>,
        gamma_z: f64,
        zeta: f64,
        ca: bool,
        samples: usize,
        decoder: FailureDecoder,
        check_fraction: f64,
        time_limit: f64,
        run_id: String,
    },
    Threshold {
        sizes: Vec<LatticeDims>,
        p: Vec<f64>,
        zeta_p: f64,
        trials: usize,
    },
    Simulate {
        dims: LatticeDims,
        gamma_z: f64,
        zeta: f64,
        ca: bool,
        t_stop: f64,
        interval: f64,
    },
}

impl Command {
    pub fn subcommand(&self) -> Subcommand {
        match self {
            Command::CertifySize { .. } => Subcommand::CertifySize,
            Command::Decode { .. } => Subcommand::Decode,
            Command::Memtime { .. } => Subcommand::Memtime,
            Command::Threshold { .. } => Subcommand::Threshold,
            Command::Simulate { .. } => Subcommand::Simulate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

/// A rejected command line or configuration. `help` marks `--help`/`--version`
/// output, which is not an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError {
    pub message: String,
    pub help: bool,
}

impl UsageError {
    fn new(message: impl Into<String>) -> Self {
        UsageError { message: message.into(), help: false }
    }

    fn key(key: &str, message: impl fmt::Display) -> Self {
        UsageError::new(format!("{key}: {message}"))
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for UsageError {}

pub fn cli() -> clap::Command {
    let mut app = clap::Command::new("xyzca")
        .version(env!("CARGO_PKG_VERSION"))
        .about("XYZ color code under biased noise: decoders, dynamics and memory experiments")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in Subcommand::ALL {
        let mut cmd = clap::Command::new(sub.name()).about(sub.about()).arg(
            Arg::new("config").long("config").value_name("FILE").help("JSON config file with flat keys"),
        );
        for key in sub.keys() {
            let mut arg = Arg::new(key.name)
                .long(key.name)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .allow_hyphen_values(true)
                .help(key.help);
            if key.name.contains('_') {
                arg = arg.visible_alias(key.name.replace('_', "-"));
            }
            if let Some(d) = key.default {
                arg = arg.help(format!("{} [default: {d}]", key.help));
            }
            cmd = cmd.arg(arg);
        }
        app = app.subcommand(cmd);
    }
    app
}

/// Resolves a command line (program name first) against the environment and an
/// optional config file named by `--config`.
pub fn parse_config<I, S>(argv: I, env: &[(String, String)]) -> Result<RunConfig, UsageError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let matches = cli().try_get_matches_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        let help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
        UsageError { message: e.render().to_string(), help }
    })?;
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = Subcommand::from_name(name).expect("registered subcommand");
    let file = match sub_matches.get_one::<String>("config") {
        Some(path) => Some(read_config_file(path)?),
        None => None,
    };
    let values = merge(sub, file.as_ref(), env, sub_matches)?;
    resolve(sub, &values)
}

fn read_config_file(path: &str) -> Result<serde_json::Map<String, serde_json::Value>, UsageError> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError::key("config", format!("{path}: {e}")))?;
    match serde_json::from_str(&text) {
        Ok(serde_json::Value::Object(map)) => Ok(map),
        Ok(_) => Err(UsageError::key("config", format!("{path}: expected a JSON object"))),
        Err(e) => Err(UsageError::key("config", format!("{path}: {e}"))),
    }
}

fn json_scalar(key: &str, v: &serde_json::Value) -> Result<String, UsageError> {
    use serde_json::Value;
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|x| match x {
                    Value::Array(_) | Value::Object(_) => Err(UsageError::key(key, "nested values are not allowed")),
                    other => json_scalar(key, other),
                })
                .collect::<Result<_, _>>()?;
            Ok(parts.join(","))
        }
        Value::Null | Value::Object(_) => Err(UsageError::key(key, "expected a string, number, boolean or list")),
    }
}

fn merge(
    sub: Subcommand,
    file: Option<&serde_json::Map<String, serde_json::Value>>,
    env: &[(String, String)],
    flags: &ArgMatches,
) -> Result<BTreeMap<String, String>, UsageError> {
    let keys = sub.keys();
    let mut values: BTreeMap<String, String> =
        keys.iter().filter_map(|k| k.default.map(|d| (k.name.to_string(), d.to_string()))).collect();
    if let Some(file) = file {
        for (k, v) in file {
            if !keys.iter().any(|known| known.name == k) {
                return Err(UsageError::key(k, format!("unknown key for {sub} in config file")));
            }
            values.insert(k.clone(), json_scalar(k, v)?);
        }
    }
    for (name, value) in env {
        let Some(suffix) = name.strip_prefix(ENV_PREFIX) else { continue };
        let known_anywhere = Subcommand::ALL
            .iter()
            .flat_map(|s| s.keys())
            .find(|k| k.name.eq_ignore_ascii_case(suffix));
        let Some(known) = known_anywhere else {
            return Err(UsageError::key(name, "unknown environment override"));
        };
        // Overrides meant for other subcommands are ignored.
        if keys.iter().any(|k| k.name == known.name) {
            values.insert(known.name.to_string(), value.clone());
        }
    }
    for key in &keys {
        if let Some(v) = flags.get_one::<String>(key.name) {
            values.insert(key.name.to_string(), v.clone());
        }
    }
    Ok(values)
}

fn required<'a>(values: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str, UsageError> {
    values.get(key).map(String::as_str).ok_or_else(|| UsageError::key(key, "required"))
}

fn parse_num<T: std::str::FromStr>(values: &BTreeMap<String, String>, key: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    let raw = required(values, key)?;
    raw.trim().parse().map_err(|e| UsageError::key(key, format!("cannot parse {raw:?}: {e}")))
}

fn parse_bool(values: &BTreeMap<String, String>, key: &str) -> Result<bool, UsageError> {
    match required(values, key)?.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(UsageError::key(key, format!("expected true or false, got {other:?}"))),
    }
}

fn parse_dims(key: &str, l: usize, h: usize) -> Result<LatticeDims, UsageError> {
    LatticeDims::new(l, h).map_err(|e| UsageError::key(key, e))
}

fn parse_sizes(values: &BTreeMap<String, String>, key: &str) -> Result<Vec<LatticeDims>, UsageError> {
    let raw = required(values, key)?;
    let sizes = raw
        .split(',')
        .map(|item| {
            let (l, h) = item
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| UsageError::key(key, format!("expected LxH, got {item:?}")))?;
            let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| UsageError::key(key, format!("{item:?}: {e}")));
            parse_dims(key, parse(l)?, parse(h)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.is_empty() {
        return Err(UsageError::key(key, "at least one size is needed"));
    }
    Ok(sizes)
}

fn parse_list(values: &BTreeMap<String, String>, key: &str) -> Result<Vec<f64>, UsageError> {
    let raw = required(values, key)?;
    raw.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| UsageError::key(key, format!("cannot parse {s:?}: {e}"))))
        .collect()
}

fn parse_decoder(key: &str, raw: &str) -> Result<FailureDecoder, UsageError> {
    match raw.trim() {
        "exact" => Ok(FailureDecoder::Exact),
        "rg" => Ok(FailureDecoder::Rg),
        other => Err(UsageError::key(key, format!("expected exact or rg, got {other:?}"))),
    }
}

fn positive(key: &str, v: f64) -> Result<f64, UsageError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(UsageError::key(key, format!("must be positive and finite, got {v}")))
    }
}

fn bias(key: &str, v: f64) -> Result<f64, UsageError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(UsageError::key(key, format!("must be positive (inf for pure dephasing), got {v}")))
    }
}

fn resolve(sub: Subcommand, values: &BTreeMap<String, String>) -> Result<RunConfig, UsageError> {
    let format = match required(values, "format")?.trim() {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => return Err(UsageError::key("format", format!("expected csv or json, got {other:?}"))),
    };
    let command = match sub {
        Subcommand::CertifySize => Command::CertifySize {
            dims: parse_dims("L", parse_num(values, "L")?, parse_num(values, "H")?)?,
        },
        Subcommand::Decode => {
            if format == OutputFormat::Csv {
                return Err(UsageError::key("format", "decode writes JSON only"));
            }
            Command::Decode {
                input: PathBuf::from(required(values, "input")?),
                decoder: parse_decoder("decoder", required(values, "decoder")?)?,
            }
        }
        Subcommand::Memtime => {
            let zeta = bias("zeta", parse_num(values, "zeta")?)?;
            let decoder = match values.get("decoder") {
                Some(raw) => parse_decoder("decoder", raw)?,
                None if zeta.is_infinite() => FailureDecoder::Exact,
                None => FailureDecoder::Rg,
            };
            if decoder == FailureDecoder::Exact && zeta.is_finite() {
                return Err(UsageError::key(
                    "decoder",
                    format!("the exact decoder requires infinite bias (zeta = inf), got zeta = {zeta}"),
                ));
            }
            let check_fraction: f64 = parse_num(values, "check_fraction")?;
            if !(check_fraction > 0.0 && check_fraction <= 1e-3) {
                return Err(UsageError::key("check_fraction", format!("must lie in (0, 1e-3], got {check_fraction}")));
            }
            let time_limit: f64 = parse_num(values, "time_limit")?;
            if !(time_limit > 0.0) {
                return Err(UsageError::key("time_limit", format!("must be positive, got {time_limit}")));
            }
            let samples: usize = parse_num(values, "samples")?;
            if samples == 0 {
                return Err(UsageError::key("samples", "must be at least 1"));
            }
            Command::Memtime {
                sizes: parse_sizes(values, "sizes")?,
                gamma_z: positive("gamma_z", parse_num(values, "gamma_z")?)?,
                zeta,
                ca: parse_bool(values, "ca")?,
                samples,
                decoder,
                check_fraction,
                time_limit,
                run_id: required(values, "run_id")?.to_string(),
            }
        }
        Subcommand::Threshold => {
            let sizes = parse_sizes(values, "sizes")?;
            if sizes.len() < 2 {
                return Err(UsageError::key("sizes", "a threshold scan needs at least two sizes"));
            }
            let zeta_p = bias("zeta_p", parse_num(values, "zeta_p")?)?;
            let p = parse_list(values, "p")?;
            for &pt in &p {
                if !(pt > 0.0) {
                    return Err(UsageError::key("p", format!("probabilities must be positive, got {pt}")));
                }
                NoiseParams::from_probabilities(pt, zeta_p)
                    .and_then(|n| n.validate())
                    .map_err(|e| UsageError::key("p", e))?;
            }
            let trials: usize = parse_num(values, "trials")?;
            if trials == 0 {
                return Err(UsageError::key("trials", "must be at least 1"));
            }
            Command::Threshold { sizes, p, zeta_p, trials }
        }
        Subcommand::Simulate => {
            let t_stop = positive("t_stop", parse_num(values, "t_stop")?)?;
            let interval = match values.get("interval") {
                Some(_) => positive("interval", parse_num(values, "interval")?)?,
                None => t_stop / 100.0,
            };
            Command::Simulate {
                dims: parse_dims("L", parse_num(values, "L")?, parse_num(values, "H")?)?,
                gamma_z: positive("gamma_z", parse_num(values, "gamma_z")?)?,
                zeta: bias("zeta", parse_num(values, "zeta")?)?,
                ca: parse_bool(values, "ca")?,
                t_stop,
                interval,
            }
        }
    };
    Ok(RunConfig {
        command,
        seed: parse_num(values, "seed")?,
        workers: parse_num(values, "workers")?,
        out: values.get("out").map(PathBuf::from),
        format,
    })
}

fn sizes_string(sizes: &[LatticeDims]) -> String {
    sizes.iter().map(|d| format!("{}x{}", d.l(), d.h())).collect::<Vec<_>>().join(",")
}

fn decoder_string(d: FailureDecoder) -> &'static str {
    match d {
        FailureDecoder::Exact => "exact",
        FailureDecoder::Rg => "rg",
    }
}

impl RunConfig {
    /// Every resolved key with its value, defaults included.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        put("workers", self.workers.to_string());
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        put("format", if self.format == OutputFormat::Csv { "csv" } else { "json" }.to_string());
        match &self.command {
            Command::CertifySize { dims } => {
                put("L", dims.l().to_string());
                put("H", dims.h().to_string());
            }
            Command::Decode { input, decoder } => {
                put("input", input.display().to_string());
                put("decoder", decoder_string(*decoder).to_string());
            }
            Command::Memtime { sizes, gamma_z, zeta, ca, samples, decoder, check_fraction, time_limit, run_id } => {
                put("sizes", sizes_string(sizes));
                put("gamma_z", gamma_z.to_string());
                put("zeta", zeta.to_string());
                put("ca", ca.to_string());
                put("samples", samples.to_string());
                put("decoder", decoder_string(*decoder).to_string());
                put("check_fraction", check_fraction.to_string());
                put("time_limit", time_limit.to_string());
                put("run_id", run_id.clone());
            }
            Command::Threshold { sizes, p, zeta_p, trials } => {
                put("sizes", sizes_string(sizes));
                put("p", p.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
                put("zeta_p", zeta_p.to_string());
                put("trials", trials.to_string());
            }
            Command::Simulate { dims, gamma_z, zeta, ca, t_stop, interval } => {
                put("L", dims.l().to_string());
                put("H", dims.h().to_string());
                put("gamma_z", gamma_z.to_string());
                put("zeta", zeta.to_string());
                put("ca", ca.to_string());
                put("t_stop", t_stop.to_string());
                put("interval", interval.to_string());
            }
        }
        m
    }

    /// Command line that resolves back to this configuration.
    pub fn to_args(&self) -> Vec<String> {
        let mut args = vec!["xyzca".to_string(), self.command.subcommand().name().to_string()];
        for (k, v) in self.to_map() {
            args.push(format!("--{k}"));
            args.push(v);
        }
        args
    }

    /// The resolved configuration as a flat JSON object, usable as a config file.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(self.to_map().into_iter().map(|(k, v)| (k, serde_json::Value::String(v))).collect())
    }
}

/// `XYZCA_*` variables from the process environment.
pub fn env_overrides() -> Vec<(String, String)> {
    std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect()
}
