use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use xyzca::codegrid::{syndrome, BitGrid, LatticeDims, PauliFrame, PauliLetter, QubitCoord, Syndrome};
use xyzca::expt::FailureDecoder;
use xyzca_cli::config::{parse_config, Command as Cmd, OutputFormat, RunConfig};

fn xyzca(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_xyzca"));
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("XYZCA_")) {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path.display().to_string()
}

fn dims(l: usize, h: usize) -> LatticeDims {
    LatticeDims::new(l, h).unwrap()
}

#[test]
fn certify_size_six_by_nine() {
    let o = xyzca(&["certify-size", "--L", "6", "--H", "9"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("# config: "));
    assert_eq!(data_lines(&out), ["L,H,cycle_length,kernel_dim,certified", "6,9,6,2,true"]);
}

#[test]
fn even_by_even_is_not_certified() {
    let o = xyzca(&["certify-size", "--L", "6", "--H", "6", "--format", "json"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"][0]["certified"], false);
    assert_eq!(v["config"]["L"], "6");
}

#[test]
fn usage_errors_exit_two() {
    let o = xyzca(&["memtime", "--decoder", "exact", "--zeta", "100", "--gamma_z", "0.1"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("infinite bias"), "{}", stderr(&o));

    let o = xyzca(&["certify-size", "--L", "5", "--H", "9"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("L:"));

    assert_eq!(xyzca(&["certify-size", "--L", "6"], &[]).status.code(), Some(2));
    assert_eq!(xyzca(&["frobnicate"], &[]).status.code(), Some(2));
    assert_eq!(xyzca(&[], &[]).status.code(), Some(2));
    assert_eq!(xyzca(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn precedence_flag_env_file_default() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_json(dir.path(), "cfg.json", &serde_json::json!({"L": 9, "H": 12, "seed": 5}));
    let parse = |args: &[&str], env: &[(&str, &str)]| {
        let env: Vec<(String, String)> = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        parse_config(args.iter().copied(), &env)
    };
    let c = parse(&["xyzca", "certify-size", "--config", &file], &[]).unwrap();
    assert_eq!(c.command, Cmd::CertifySize { dims: dims(9, 12) });
    assert_eq!((c.seed, c.workers, c.format), (5, 0, OutputFormat::Csv));

    let c = parse(&["xyzca", "certify-size", "--config", &file, "--L", "6"], &[]).unwrap();
    assert_eq!(c.command, Cmd::CertifySize { dims: dims(6, 12) });

    let c = parse(&["xyzca", "certify-size", "--config", &file], &[("XYZCA_SEED", "8"), ("XYZCA_L", "12")]).unwrap();
    assert_eq!((c.seed, c.command), (8, Cmd::CertifySize { dims: dims(12, 12) }));

    let c = parse(&["xyzca", "certify-size", "--config", &file, "--seed", "11"], &[("XYZCA_SEED", "8")]).unwrap();
    assert_eq!(c.seed, 11);

    // Overrides for keys of other subcommands are ignored; unknown ones are not.
    assert!(parse(&["xyzca", "certify-size", "--L", "6", "--H", "9"], &[("XYZCA_GAMMA_Z", "0.1")]).is_ok());
    let e = parse(&["xyzca", "certify-size", "--L", "6", "--H", "9"], &[("XYZCA_COLOUR", "red")]).unwrap_err();
    assert!(e.message.contains("XYZCA_COLOUR"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_json(dir.path(), "cfg.json", &serde_json::json!({"L": 6, "H": 9, "gamma_z": 0.1}));
    let o = xyzca(&["certify-size", "--config", &file], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma_z"), "{}", stderr(&o));

    let file = write_json(dir.path(), "bad.json", &serde_json::json!([1, 2]));
    assert_eq!(xyzca(&["certify-size", "--config", &file], &[]).status.code(), Some(2));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = xyzca(&["simulate", "--L", "6", "--H", "9", "--gamma_z", "0.2", "--t_stop", "3", "--seed", "4"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let echoed = out.lines().next().unwrap().strip_prefix("# config: ").unwrap();
    let file = dir.path().join("echo.json");
    std::fs::write(&file, echoed).unwrap();
    let again = xyzca(&["simulate", "--config", file.to_str().unwrap()], &[]);
    assert_eq!(stdout(&again), out);
    let rows = data_lines(&out);
    assert_eq!(rows[0], "time,events,energy,weight,seed");
    assert_eq!(rows.len(), 1 + 101);
    assert!(rows.last().unwrap().starts_with("3.0,"));
}

fn decode_file(dir: &Path, value: serde_json::Value, decoder: &str) -> Output {
    let path = write_json(dir, "input.json", &value);
    xyzca(&["decode", "--input", &path, "--decoder", decoder], &[])
}

#[test]
fn decode_pure_z_frame() {
    let dir = tempfile::tempdir().unwrap();
    let d = dims(6, 9);
    let mut e = PauliFrame::identity(d);
    e.apply(QubitCoord::black(2, 3), PauliLetter::Z);
    e.apply(QubitCoord::white(4, 7), PauliLetter::Z);
    let o = decode_file(dir.path(), serde_json::to_value(&e).unwrap(), "exact");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["consistent"], true);
    assert_eq!(v["logical_failure"], false);
    assert_eq!(v["chosen_class"], serde_json::json!(["I", "I"]));
    let c: PauliFrame = serde_json::from_value(v["correction"].clone()).unwrap();
    assert_eq!(c, e);
}

#[test]
fn decode_y_error_with_exact_decoder_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let mut e = PauliFrame::identity(dims(6, 9));
    e.apply(QubitCoord::black(1, 1), PauliLetter::Y);
    let o = decode_file(dir.path(), serde_json::to_value(&e).unwrap(), "exact");
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("inconsistent"), "{}", stderr(&o));

    // The RG decoder handles it.
    let o = decode_file(dir.path(), serde_json::to_value(&e).unwrap(), "rg");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((v["consistent"].clone(), v["logical_failure"].clone()), (true.into(), false.into()));
}

#[test]
fn decode_unreachable_syndrome_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dims(6, 9);
    let mut a = BitGrid::zeros(6, 9);
    a.set(0, 0, true);
    let s = Syndrome::from_grids(d, a, BitGrid::zeros(6, 9));
    let o = decode_file(dir.path(), serde_json::to_value(&s).unwrap(), "exact");
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("inconsistent syndrome"), "{}", stderr(&o));
}

#[test]
fn decode_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = decode_file(dir.path(), serde_json::json!({"L": 6, "H": 9}), "exact");
    assert_eq!(o.status.code(), Some(3));
    let o = decode_file(dir.path(), serde_json::json!({"L": 6, "H": 9, "a_defects": "zz", "b_defects": ""}), "rg");
    assert_eq!(o.status.code(), Some(3));
    let o = xyzca(&["decode", "--input", "-", "--format", "csv"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn decode_syndrome_with_rg() {
    let dir = tempfile::tempdir().unwrap();
    let d = dims(12, 15);
    let mut e = PauliFrame::identity(d);
    e.apply(QubitCoord::black(3, 3), PauliLetter::Z);
    e.apply(QubitCoord::white(9, 10), PauliLetter::Y);
    let s = syndrome(&e);
    let o = decode_file(dir.path(), serde_json::to_value(&s).unwrap(), "rg");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["consistent"], true);
    assert!(v.get("logical_failure").is_none());
}

#[test]
fn memtime_dry_run_writes_one_row_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("memtime.csv");
    let o = xyzca(
        &["memtime", "--gamma_z", "0.05", "--samples", "1", "--seed", "9", "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = data_lines(&text);
    assert_eq!(
        rows[0],
        "run_id,L,H,gamma_z,zeta,ca_enabled,beta,n_samples,median_T,ci_low,ci_high,seed_base"
    );
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("run,6,9,0.05,inf,true,"));
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers, [std::ffi::OsString::from("memtime.csv")]);
}

#[test]
fn memtime_finite_bias_defaults_to_rg() {
    let o = xyzca(&["memtime", "--gamma_z", "0.05", "--zeta", "50", "--samples", "2", "--format", "json"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["config"]["decoder"], "rg");
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn threshold_json_reports_crossings() {
    let o = xyzca(
        &["threshold", "--sizes", "6x9,12x15", "--p", "0.02,0.3", "--trials", "20", "--format", "json", "--seed", "1"],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["crossings"].as_array().unwrap().len(), 1);
    let o = xyzca(&["threshold", "--sizes", "6x9", "--trials", "5"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = xyzca(&["threshold", "--p", "0.9"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

fn arb_dims() -> impl Strategy<Value = LatticeDims> {
    (1usize..20, 1usize..20).prop_map(|(a, b)| dims(3 * a, 3 * b))
}

fn arb_rate() -> impl Strategy<Value = f64> {
    prop_oneof![(1e-8f64..10.0), Just(0.5), Just(1e-5)]
}

fn arb_bias() -> impl Strategy<Value = f64> {
    prop_oneof![Just(f64::INFINITY), (1e-3f64..1e6)]
}

fn arb_command() -> impl Strategy<Value = Cmd> {
    prop_oneof![
        arb_dims().prop_map(|dims| Cmd::CertifySize { dims }),
        ("[a-z0-9_./]{1,12}", any::<bool>()).prop_map(|(p, rg)| Cmd::Decode {
            input: p.into(),
            decoder: if rg { FailureDecoder::Rg } else { FailureDecoder::Exact },
        }),
        (
            prop::collection::vec(arb_dims(), 1..4),
            arb_rate(),
            arb_bias(),
            any::<bool>(),
            1usize..1000,
            any::<bool>(),
            1e-9f64..1e-3,
            prop_oneof![Just(f64::INFINITY), 1.0f64..1e9],
            "[a-zA-Z0-9_-]{1,10}",
        )
            .prop_map(|(sizes, gamma_z, zeta, ca, samples, rg, check_fraction, time_limit, run_id)| Cmd::Memtime {
                sizes,
                gamma_z,
                zeta,
                ca,
                samples,
                decoder: if rg || zeta.is_finite() { FailureDecoder::Rg } else { FailureDecoder::Exact },
                check_fraction,
                time_limit,
                run_id,
            }),
        (prop::collection::vec(arb_dims(), 2..4), prop::collection::vec(1e-4f64..0.25, 1..6), arb_bias(), 1usize..10_000)
            .prop_map(|(sizes, p, zeta_p, trials)| Cmd::Threshold { sizes, p, zeta_p, trials }),
        (arb_dims(), arb_rate(), arb_bias(), any::<bool>(), 1e-3f64..1e6, 1e-4f64..1e3).prop_map(
            |(dims, gamma_z, zeta, ca, t_stop, interval)| Cmd::Simulate { dims, gamma_z, zeta, ca, t_stop, interval }
        ),
    ]
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (arb_command(), any::<u64>(), 0usize..64, prop::option::of("[a-z0-9_]{1,8}\\.(csv|json)"), any::<bool>()).prop_map(
        |(command, seed, workers, out, json)| {
            let format = if json || matches!(command, Cmd::Decode { .. }) { OutputFormat::Json } else { OutputFormat::Csv };
            RunConfig { command, seed, workers, out: out.map(Into::into), format }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn args_round_trip(cfg in arb_config()) {
        prop_assert_eq!(parse_config(cfg.to_args(), &[]).unwrap(), cfg);
    }

    #[test]
    fn config_file_round_trip(cfg in arb_config()) {
        let dir = tempfile::tempdir().unwrap();
        let path = write_json(dir.path(), "cfg.json", &cfg.to_json());
        let argv = ["xyzca", cfg.command.subcommand().name(), "--config", &path];
        prop_assert_eq!(parse_config(argv, &[]).unwrap(), cfg);
    }
}

#[test]
fn rg_heralded_failure_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = BitGrid::zeros(6, 9);
    a.set(0, 0, true);
    let s = Syndrome::from_grids(dims(6, 9), a, BitGrid::zeros(6, 9));
    let o = decode_file(dir.path(), serde_json::to_value(&s).unwrap(), "rg");
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
