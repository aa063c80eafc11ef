//! Subcommand execution and output.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use xyzca::codegrid::{syndrome, LatticeDims, NoiseParams, PauliFrame, Syndrome, SyndromeJson};
use xyzca::dynamics::{init_engine, run_until, y_rate};
use xyzca::exactdec::{is_failure, ExactDecoder};
use xyzca::expt::{memory_curve, threshold_scan, FailureDecoder, MemTimeConfig};
use xyzca::gf2kit::cycle_length_from_single_one;
use xyzca::logicals::{certify_size, count_biased_logicals, LogicalSet};
use xyzca::rgdec::rg_decode;
use xyzca::Error;

use crate::config::{Command, OutputFormat, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DECODER_FAILURE: i32 = 4;

#[derive(Debug)]
pub struct RunError {
    pub code: i32,
    pub message: String,
}

impl RunError {
    fn data(message: impl Into<String>) -> Self {
        RunError { code: EXIT_DATA, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        RunError { code: EXIT_IO, message: message.into() }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DecoderFailure(_) | Error::NotNeutral => EXIT_DECODER_FAILURE,
            Error::Config(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        RunError { code, message: e.to_string() }
    }
}

/// Runs a resolved configuration and writes its output.
pub fn dispatch(cfg: &RunConfig) -> Result<(), RunError> {
    let bytes = match &cfg.command {
        Command::CertifySize { dims } => certify(cfg, *dims)?,
        Command::Decode { input, decoder } => decode(cfg, input, *decoder)?,
        Command::Memtime { .. } => memtime(cfg)?,
        Command::Threshold { sizes, p, zeta_p, trials } => threshold(cfg, sizes, p, *zeta_p, *trials)?,
        Command::Simulate { .. } => simulate(cfg)?,
    };
    write_output(cfg.out.as_deref(), &bytes)
}

/// Writes to `out` through a temporary file in the same directory and a rename, or
/// to stdout.
pub fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), RunError> {
    let Some(path) = out else {
        let mut stdout = std::io::stdout().lock();
        return stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|e| RunError::io(e.to_string()));
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| RunError::io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes).and_then(|_| tmp.as_file().sync_all()).map_err(|e| RunError::io(e.to_string()))?;
    tmp.persist(path).map_err(|e| RunError::io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn config_line(cfg: &RunConfig) -> String {
    format!("# config: {}\n", cfg.to_json())
}

fn csv_bytes<T: Serialize>(cfg: &RunConfig, rows: &[T]) -> Result<Vec<u8>, RunError> {
    let mut buf = config_line(cfg).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| RunError::io(e.to_string()))?;
        }
        w.flush().map_err(|e| RunError::io(e.to_string()))?;
    }
    Ok(buf)
}

fn json_bytes(value: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s.into_bytes()
}

fn emit<T: Serialize>(cfg: &RunConfig, rows: &[T], extra: Value) -> Result<Vec<u8>, RunError> {
    match cfg.format {
        OutputFormat::Csv => csv_bytes(cfg, rows),
        OutputFormat::Json => {
            let mut v = json!({ "config": cfg.to_json(), "rows": rows });
            if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
                m.extend(e);
            }
            Ok(json_bytes(&v))
        }
    }
}

#[derive(Debug, Serialize)]
struct CertifyRecord {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "H")]
    h: usize,
    cycle_length: usize,
    kernel_dim: usize,
    certified: bool,
}

fn certify(cfg: &RunConfig, dims: LatticeDims) -> Result<Vec<u8>, RunError> {
    let (l, h) = (dims.l(), dims.h());
    let rec = CertifyRecord {
        l,
        h,
        cycle_length: cycle_length_from_single_one(l),
        kernel_dim: count_biased_logicals(l, h),
        certified: certify_size(l, h),
    };
    emit(cfg, &[rec], json!({}))
}

enum DecodeInput {
    Frame(PauliFrame),
    Syndrome(Syndrome),
}

fn read_input(path: &Path) -> Result<DecodeInput, RunError> {
    let mut text = String::new();
    if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut text).map_err(|e| RunError::io(e.to_string()))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| RunError::io(format!("{}: {e}", path.display())))?;
    }
    let value: Value = serde_json::from_str(&text).map_err(|e| RunError::data(format!("{}: {e}", path.display())))?;
    let has = |k: &str| value.get(k).is_some();
    if has("x_plane") && has("z_plane") {
        let frame: PauliFrame =
            serde_json::from_value(value).map_err(|e| RunError::data(format!("{}: {e}", path.display())))?;
        Ok(DecodeInput::Frame(frame))
    } else if has("a_defects") && has("b_defects") {
        let json: SyndromeJson =
            serde_json::from_value(value).map_err(|e| RunError::data(format!("{}: {e}", path.display())))?;
        Ok(DecodeInput::Syndrome(Syndrome::from_json(&json)?))
    } else {
        Err(RunError::data(format!(
            "{}: expected an error frame (x_plane, z_plane) or a syndrome (a_defects, b_defects)",
            path.display()
        )))
    }
}

fn decode(cfg: &RunConfig, input: &Path, decoder: FailureDecoder) -> Result<Vec<u8>, RunError> {
    let (error, s) = match read_input(input)? {
        DecodeInput::Frame(f) => {
            let s = syndrome(&f);
            (Some(f), s)
        }
        DecodeInput::Syndrome(s) => (None, s),
    };
    let dims = *s.dims();
    let mut out = json!({ "config": cfg.to_json() });
    let correction = match decoder {
        FailureDecoder::Exact => {
            if let Some(e) = &error {
                if !e.is_pure_z() {
                    return Err(RunError::data(
                        "inconsistent input: the exact decoder assumes pure Z noise, but the frame has X or Y components",
                    ));
                }
            }
            let r = ExactDecoder::new(dims).decode(&s).map_err(|e| match e {
                Error::Invalid(sub) => {
                    RunError::data(format!("inconsistent syndrome: no pure Z error on the {sub} sublattice produces it"))
                }
                other => other.into(),
            })?;
            out["class_weights"] = json!(r.class_weights);
            out["chosen_class"] = json!(r.chosen_class);
            r.correction
        }
        FailureDecoder::Rg => rg_decode(&s, &dims)?,
    };
    out["consistent"] = json!(syndrome(&correction) == s);
    if let Some(e) = &error {
        let set = LogicalSet::new(dims);
        out["logical_failure"] = json!(is_failure(e, &correction, &set)?);
    }
    out["correction"] = serde_json::to_value(&correction).expect("frames serialize");
    Ok(json_bytes(&out))
}

fn memtime(cfg: &RunConfig) -> Result<Vec<u8>, RunError> {
    let Command::Memtime { sizes, gamma_z, zeta, ca, samples, decoder, check_fraction, time_limit, run_id } =
        &cfg.command
    else {
        unreachable!("memtime config")
    };
    let mut base = MemTimeConfig::new(sizes[0], *gamma_z, *zeta, *ca);
    base.n_samples = *samples;
    base.decoder = *decoder;
    base.check_fraction = *check_fraction;
    base.time_limit = *time_limit;
    base.seed_base = cfg.seed;
    let rows = memory_curve(sizes, &base, cfg.workers, run_id)?;
    emit(cfg, &rows, json!({}))
}

fn threshold(
    cfg: &RunConfig,
    sizes: &[LatticeDims],
    p: &[f64],
    zeta_p: f64,
    trials: usize,
) -> Result<Vec<u8>, RunError> {
    let scan = threshold_scan(sizes, p, zeta_p, trials, cfg.seed, cfg.workers)?;
    emit(
        cfg,
        &scan.rows,
        json!({ "crossings": scan.crossings, "p_c": scan.p_c, "p_c_interval": scan.p_c_interval }),
    )
}

#[derive(Debug, Serialize)]
struct TraceRow {
    time: f64,
    events: u64,
    energy: i64,
    weight: usize,
    seed: u64,
}

fn simulate(cfg: &RunConfig) -> Result<Vec<u8>, RunError> {
    let Command::Simulate { dims, gamma_z, zeta, ca, t_stop, interval } = &cfg.command else {
        unreachable!("simulate config")
    };
    let noise = NoiseParams {
        gamma_x: 0.0,
        gamma_y: y_rate(*gamma_z, *zeta),
        gamma_z: *gamma_z,
        p_x: 0.0,
        p_y: 0.0,
        p_z: 0.0,
    };
    let mut engine = init_engine(*dims, &noise, *ca, cfg.seed)?;
    let mut rows = Vec::new();
    let record = |e: &xyzca::dynamics::EngineState| TraceRow {
        time: e.clock(),
        events: e.event_count(),
        energy: e.energy(),
        weight: e.frame().weight(),
        seed: cfg.seed,
    };
    rows.push(record(&engine));
    // Guard against `t_stop / interval` landing a hair above an integer.
    let steps = ((t_stop / interval) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    for k in 1..=steps {
        run_until(&mut engine, (k as f64 * interval).min(*t_stop));
        rows.push(record(&engine));
    }
    emit(cfg, &rows, json!({ "final": engine.snapshot() }))
}
