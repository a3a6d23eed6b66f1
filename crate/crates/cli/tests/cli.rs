use std::collections::BTreeSet;
use std::fs;

use ddmag_cli::{config_schema, run_cli, RunConfig};

fn run(args: &[&str]) -> ddmag_cli::Outcome {
    run_cli(std::iter::once("ddmag").chain(args.iter().copied()))
}

fn stdout(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(o.code, 0, "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn error_kind(o: &ddmag_cli::Outcome) -> String {
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn shipped_schema_is_current() {
    let shipped = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/schema/run_config.schema.json"
    ))
    .unwrap();
    assert_eq!(shipped, config_schema());
}

#[test]
fn schema_lists_exactly_the_config_keys() {
    let schema: serde_json::Value = serde_json::from_str(&config_schema()).unwrap();
    let props: BTreeSet<String> = schema["properties"]
        .as_object()
        .unwrap()
        .keys()
        .cloned()
        .collect();
    assert_eq!(schema["additionalProperties"], serde_json::Value::Bool(false));
    let full = r#"{"command":"weight","schemes":["re"],"k":1,"n":1,"n_max":2,"rabi":1.0,
        "period":1.0,"grid":"1:2:2","p_max":1,"sigma":1.0,"tau_c":1.0,"trajectories":100,
        "steps_per_period":128,"readout":"x","axis":"time","range":"1:2:2","band":"opt",
        "phase":"optimal","decay_model":"cubic","t2":1.0,"c":0.03,"gamma":1.0,"seed":1,
        "units":"hz","format":"csv","out":"x.csv"}"#;
    let cfg = RunConfig::from_json(full).unwrap();
    let keys: BTreeSet<String> = cfg.present_keys().into_iter().collect();
    assert_eq!(keys, props);
}

#[test]
fn weight_has_unit_row_at_optimum() {
    let out = stdout(&["weight", "--scheme", "re", "--k", "1", "--n", "2", "--grid", "0.05:4.0:80"]);
    assert!(out.starts_with("# ddmag "));
    assert!(out.contains("# config: {"));
    let table = rows(&out);
    assert_eq!(table.len(), 80);
    let at_half = table
        .iter()
        .find(|r| (r[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-12)
        .expect("grid contains Omega/2");
    assert!((at_half[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn weight_with_several_schemes_labels_columns() {
    let out = stdout(&[
        "weight", "--scheme", "re:4", "--scheme", "pdd", "--scheme", "constant", "--grid", "0.1:1:4",
    ]);
    let header = out.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "omega_rad_s,omega_over_Omega,W_re_k4,W_pdd,W_constant");
}

#[test]
fn passbands_default_to_json() {
    let out = stdout(&["passbands", "--k", "4", "--p-max", "1"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["command"], "passbands");
    let bands = v["data"]["bands"].as_array().unwrap();
    assert_eq!(bands.len(), 5);
    assert!((bands[0]["height"].as_f64().unwrap() - 5.0 / 21.0).abs() < 1e-12);
}

#[test]
fn noiseless_decay_is_flat() {
    let out = stdout(&["decay", "--sigma", "0", "--tau-c", "1e-5", "--n", "5"]);
    let table = rows(&out);
    assert_eq!(table.len(), 6);
    for r in table {
        assert_eq!(r[4].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn decay_with_monte_carlo_columns() {
    let out = stdout(&[
        "decay", "--sigma", "3e4", "--tau-c", "1e-5", "--n", "2", "--trajectories", "200",
        "--steps-per-period", "256",
    ]);
    let header = out.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "scheme,k,cycles,t_s,envelope,envelope_mc,envelope_mc_std_error");
    for r in rows(&out) {
        let d: f64 = r[4].parse().unwrap();
        let mc: f64 = r[5].parse().unwrap();
        let se: f64 = r[6].parse().unwrap();
        assert!((d - mc).abs() <= 0.02f64.max(4.0 * se), "{d} vs {mc}");
    }
}

#[test]
fn montecarlo_is_reproducible_and_seed_dependent() {
    let args = [
        "montecarlo", "--sigma", "5e4", "--tau-c", "2e-6", "--n", "2", "--trajectories", "150",
        "--steps-per-period", "128",
    ];
    let a = stdout(&[&args[..], &["--seed", "3"]].concat());
    let b = stdout(&[&args[..], &["--seed", "3"]].concat());
    let c = stdout(&[&args[..], &["--seed", "4"]].concat());
    assert_eq!(a, b);
    assert_ne!(rows(&a), rows(&c));
    let header = a.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "scheme,k,cycles,t_s,signal,std_error,count");
}

#[test]
fn noiseless_sensitivity_equals_ideal() {
    let out = stdout(&["sensitivity", "--axis", "time", "--range", "1e-5:1e-3:7"]);
    for r in rows(&out) {
        let ideal: f64 = r[1].parse().unwrap();
        let eff: f64 = r[5].parse().unwrap();
        assert!((eff / ideal - 1.0).abs() < 1e-12, "{eff} vs {ideal}");
    }
}

#[test]
fn embedded_config_reproduces_the_output() {
    let dir = std::env::temp_dir().join(format!("ddmag-cli-test-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let first = stdout(&[
        "sensitivity", "--axis", "frequency", "--scheme", "pdd", "--scheme", "re:4",
        "--range", "1e4:1e6:5:log", "--decay-model", "long_tc", "--sigma", "1e4",
        "--tau-c", "1e-3", "--n-max", "20",
    ]);
    let config = first
        .lines()
        .find_map(|l| l.strip_prefix("# config: "))
        .unwrap();
    let path = dir.join("run.json");
    fs::write(&path, config).unwrap();
    let second = stdout(&["sensitivity", "--config", path.to_str().unwrap()]);
    assert_eq!(first, second);

    let out_path = dir.join("out.csv");
    let o = run(&["sensitivity", "--config", path.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.is_empty());
    assert_eq!(fs::read_to_string(&out_path).unwrap(), first);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_errors_exit_2_with_json() {
    for args in [
        &["weight", "--sigma", "1"][..],
        &["bogus"][..],
        &["montecarlo", "--sigma", "1e4", "--tau-c", "1e-6", "--readout", "w"][..],
        &["decay", "--sigma", "1e4"][..],
        &["montecarlo", "--sigma", "1", "--tau-c", "1", "--trajectories", "1000001"][..],
        &["weight", "--scheme", "warp"][..],
        &["weight", "--threads", "0"][..],
        &["sensitivity", "--decay-model", "cubic"][..],
    ] {
        let o = run(args);
        assert_eq!(o.code, 2, "{args:?}");
        assert_eq!(error_kind(&o), "config", "{args:?}");
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn config_file_must_match_command() {
    let dir = std::env::temp_dir().join(format!("ddmag-cli-cmd-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("c.json");
    fs::write(&path, r#"{"command": "decay", "sigma": 1.0, "tau_c": 1.0}"#).unwrap();
    let o = run(&["weight", "--config", path.to_str().unwrap()]);
    assert_eq!(o.code, 2);
    fs::write(&path, r#"{"unknown_key": 1}"#).unwrap();
    let o = run(&["weight", "--config", path.to_str().unwrap()]);
    assert_eq!(o.code, 2);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn undetectable_scan_exits_3() {
    let o = run(&[
        "sensitivity", "--axis", "time", "--range", "1e-5:1e-4:3", "--phase", "1.5707963267948966",
    ]);
    assert_eq!(o.code, 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_kind(&o), "numerical");
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(run(&["--help"]).code, 0);
    assert_eq!(run(&["--version"]).code, 0);
    assert!(stdout(&["schema"]).contains("\"RunConfig\""));
}
