use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use skewchain_cli::config::{self, ConfigFile};
use skewchain_core::scenarios;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewchain")).args(args).env("SKEWCHAIN_OUT", out).output().expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn autonomous() -> String {
    configs().join("cubic-autonomous.toml").display().to_string()
}

#[test]
fn verify_on_the_autonomous_baseline_is_green() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["verify", &autonomous()], tmp.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    let suites = m["summary"]["result"]["suites"].as_array().unwrap();
    assert!(suites.len() >= 10);
    for s in suites {
        assert_eq!(s["status"], "pass", "{s}");
    }
}

#[test]
fn malformed_expression_exits_2_with_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        "[system]\ngamma = [1.0]\ncontrol = [[-0.5, 0.5]]\nlo = [-2.0]\nhi = [2.0]\nfields = [[\"x1 +* 2\"], [\"1\"]]\n",
    );
    let out = run(&["chain-sets", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("byte 4"), "{stderr}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn small_blowup_bound_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.toml", "scenario = \"cubic-autonomous\"\n[integrator]\nblowup = 3.0\n");
    let out = run(&["simulate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blow-up bound"));
}

#[test]
fn unknown_keys_and_formats_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("key.toml", "scenario = \"cubic-autonomous\"\n[chain]\nperiod = 2.0\n"),
        ("format.toml", "scenario = \"cubic-autonomous\"\n[output]\nformats = [\"svg\"]\n"),
        ("dims.toml", "scenario = \"cubic-hull\"\n[discretization]\ncells = [4]\n"),
        ("name.toml", "scenario = \"lorenz\"\n"),
    ] {
        let cfg = write_config(tmp.path(), name, text);
        assert_eq!(run(&["simulate", cfg.to_str().unwrap()], tmp.path()).status.code(), Some(2), "{name}");
    }
}

#[test]
fn blow_up_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "escape.toml",
        "scenario = \"cubic-autonomous\"\n[analysis.simulate]\nx = [1.9]\nt = -5.0\n",
    );
    let out = run(&["simulate", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["chain-sets", &autonomous(), "--threads", "1"], &a).status.code(), Some(0));
    assert_eq!(run(&["chain-sets", &autonomous(), "--threads", "4"], &b).status.code(), Some(0));
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["runtime"]["threads"], 1);
    assert_eq!(mb["runtime"]["threads"], 4);
    let strip = |mut m: Value| {
        m.as_object_mut().unwrap().remove("runtime");
        m
    };
    assert_eq!(strip(ma.clone()), strip(mb));
    for name in ma["files"].as_object().unwrap().keys() {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    for name in ["chain_sets.json", "chain_sets.csv", "chain_sets.dat", "graph.chgr"] {
        assert!(a.join(name).exists(), "{name}");
    }
}

#[test]
fn manifest_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let (first, second) = (tmp.path().join("first"), tmp.path().join("second"));
    assert_eq!(run(&["equilibrium", &autonomous()], &first).status.code(), Some(0));
    let again = first.join("manifest.json");
    assert_eq!(run(&["equilibrium", again.to_str().unwrap()], &second).status.code(), Some(0));
    let (a, b) = (manifest(&first), manifest(&second));
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["config"], b["config"]);
    assert_eq!(a["files"], b["files"]);
}

#[test]
fn equilibrium_plot_has_three_columns() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["equilibrium", &autonomous()], tmp.path()).status.code(), Some(0));
    let text = std::fs::read_to_string(tmp.path().join("equilibrium.dat")).unwrap();
    assert!(text.starts_with('#'));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split_whitespace().count(), 3);
}

#[test]
fn lift_verify_passes_on_the_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["lift-verify", &autonomous()], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(tmp.path());
    assert_eq!(m["summary"]["result"]["samples"], 50);
    assert_eq!(m["summary"]["result"]["chains_ok"], 20);
}

#[test]
fn shipped_configs_match_the_builtins() {
    for name in scenarios::NAMES {
        let file = config::load(&configs().join(format!("{name}.toml"))).unwrap();
        let ours = config::resolve(&file).unwrap().scenario;
        let core = scenarios::by_name(name).unwrap();
        assert_eq!(ours.system.fields(), core.system.fields(), "{name}");
        assert_eq!(ours.system.driving(), core.system.driving(), "{name}");
        assert_eq!(ours.system.control_range(), core.system.control_range(), "{name}");
        assert_eq!(ours.system.domain(), core.system.domain(), "{name}");
        assert_eq!(ours.cover.per_dim(), core.cover.per_dim(), "{name}");
        assert_eq!(ours.grid.cells_per_dim(), core.grid.cells_per_dim(), "{name}");
        assert_eq!(ours.control_levels, core.control_levels, "{name}");
        assert_eq!(ours.chain, core.chain, "{name}");
        assert_eq!(ours.integrator, core.integrator, "{name}");
    }
}

fn schema_paths(node: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    if let Some(props) = node.get("properties").and_then(Value::as_object) {
        for (k, v) in props {
            let path = format!("{prefix}{k}");
            out.insert(path.clone());
            schema_paths(v, &format!("{path}."), out);
        }
    }
}

fn value_paths(node: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    if let Some(map) = node.as_object() {
        for (k, v) in map {
            let path = format!("{prefix}{k}");
            out.insert(path.clone());
            value_paths(v, &format!("{path}."), out);
        }
    }
}

/// Every key of the config, set once.
const FULL: &str = r#"
scenario = "cubic-hull"
[system]
d = 1
p = 1
gamma = [1.0]
control = [[-0.5, 0.5]]
lo = [-2.0]
hi = [2.0]
fields = [["-x1^3"], ["1"]]
hull = { a = "0", b = "0", c = "0", eps = 0.0 }
[discretization]
boxes = [8]
cells = [1]
control_levels = 3
[chain]
t = 1.0
eps = 0.5
jump_factors = [1.0]
corner_sampling = false
[integrator]
h = 0.01
blowup = 40.0
[analysis.simulate]
omega = [0.0]
x = [0.0]
t = 1.0
control = [0.0]
[analysis.chain_sets]
enabled = true
[analysis.single_fiber]
enabled = true
omega0 = [0.0]
[analysis.equilibrium]
enabled = true
horizon = 10.0
max_horizon = 20.0
seed = [0.0]
tol = 1e-5
residual_tol = 1e-4
[analysis.control_sets]
enabled = true
t = 1.0
condition_t = 2.0
condition_eps = 0.2
no_return_samples = 10
seed = 1
fan_times = [1.0]
[analysis.lift]
enabled = true
window = 5.0
samples = 2
pairs = 1
eps = 0.1
basis_window = 3.0
seed = 1
[analysis.mixing]
enabled = true
omega1 = [0.1]
omega2 = [0.2]
y1 = 0.0
y2 = 0.0
y1_offset = 0.0
y2_offset = 0.0
t = 2.0
eps = 0.2
eps0 = 0.1
delta = 0.01
s_max = 100.0
[analysis.verify]
draws = 1
seed = 1
refinement = false
[output]
dir = "out"
formats = ["json"]
"#;

#[test]
fn schema_matches_the_config_keys() {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/config.schema.json")).expect("schema is valid JSON");
    let mut documented = BTreeSet::new();
    schema_paths(&schema, "", &mut documented);
    let full: ConfigFile = config::parse(FULL).unwrap();
    let mut used = BTreeSet::new();
    value_paths(&serde_json::to_value(&full).unwrap(), "", &mut used);
    assert_eq!(documented, used);
}
