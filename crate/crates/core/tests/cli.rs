use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use zeno_core::cli::config::RunConfig;

const LORENTZ: &str = "[model]\nfamily = lorentzian\nlambda = 0.1\nbandwidth = 1\n";

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, cmd: &str, config: &Path, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_zeno"))
            .arg(cmd)
            .arg("--config")
            .arg(config)
            .args(extra)
            .output()
            .unwrap()
    }
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn diagnostic(out: &Output) -> Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "expected one diagnostic line, got {stderr:?}");
    serde_json::from_str(lines[0]).unwrap()
}

#[test]
fn rate_curve_crosses_natural_rate_once() {
    let ws = Workspace::new();
    let cfg = ws.file(
        "rate.cfg",
        &format!("{LORENTZ}omega_a = 10\n[task]\ntau_min = 1e-4\ntau_max = 50\ntau_points = 400\n"),
    );
    let out = ws.out("o");
    let res = ws.run("rate", &cfg, &["--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{res:?}");
    let (header, rows) = csv(&out.join("rate.csv"));
    assert_eq!(header, ["tau", "gamma", "gamma0", "regime"]);
    assert_eq!(rows.len(), 400);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse::<f64>().unwrap() - r[2].parse::<f64>().unwrap()))
        .collect();
    let crossings: Vec<f64> = pts
        .windows(2)
        .filter(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0))
        .map(|w| w[0].0 - w[0].1 * (w[1].0 - w[0].0) / (w[1].1 - w[0].1))
        .collect();
    assert_eq!(crossings.len(), 1);
    assert!((crossings[0] / 1.98e-2 - 1.0).abs() < 0.02, "{crossings:?}");
    assert_eq!(rows[0][3], "zeno");
    assert_eq!(rows[399][3], "inverse_zeno");
}

#[test]
fn transition_without_root_below_boundary() {
    let ws = Workspace::new();
    let cfg = ws.file("t.cfg", &format!("{LORENTZ}omega_a = 0\n[output]\ndir = \"res\"\n"));
    let res = ws.run("transition", &cfg, &[]);
    assert!(res.status.success(), "{res:?}");
    // [output] dir resolves against the config directory
    let doc = json(&ws.out("res").join("transition.json"));
    assert!(doc["tau_star"].is_null());
    assert!(doc["all_roots"].as_array().unwrap().is_empty());
    assert!(doc["z_renorm"].as_f64().unwrap() > 1.0);
    assert_eq!(doc["criterion_z_less_1"], Value::Bool(false));
    let echoed = RunConfig::from_value(doc["config"].clone()).unwrap();
    assert_eq!(echoed, RunConfig::load(&cfg).unwrap());
}

#[test]
fn zero_coupling_is_reported_as_no_decay() {
    let ws = Workspace::new();
    let cfg = ws.file("s.cfg", &LORENTZ.replace("0.1", "0").replace("bandwidth = 1", "bandwidth = 1\nomega_a = 1"));
    let res = ws.run("survival", &cfg, &["--out", ws.out("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4));
    let d = diagnostic(&res);
    assert_eq!(d["exit_code"], 4);
    assert_eq!(d["error"], "no_decay");
}

#[test]
fn config_errors_exit_with_two() {
    let ws = Workspace::new();
    let cases = [
        ("typo.cfg", format!("{LORENTZ}omega_a = 1\nomgea = 2\n")),
        ("inf.cfg", format!("{LORENTZ}omega_a = inf\n")),
        ("section.cfg", format!("{LORENTZ}omega_a = 1\n[plot]\n")),
        ("missing.cfg", "[model]\nfamily = lorentzian\nbandwidth = 1\nomega_a = 1\n".to_string()),
        ("method.cfg", format!("{LORENTZ}omega_a = 1\n[task]\nmethods = exact\n")),
        ("invalid.cfg", format!("{LORENTZ}omega_a = 1\n[task]\nt_min = -1\n")),
    ];
    for (name, text) in cases {
        let cfg = ws.file(name, &text);
        let res = ws.run("survival", &cfg, &["--out", ws.out("o").to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(2), "{name}");
        assert_eq!(diagnostic(&res)["exit_code"], 2, "{name}");
    }
    let res = ws.run("rate", &ws.out("absent.cfg"), &[]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(diagnostic(&res)["error"], "io");
}

#[test]
fn survival_methods_share_one_grid() {
    let ws = Workspace::new();
    let cfg = ws.file(
        "s.cfg",
        &format!("{LORENTZ}omega_a = 2\n[task]\nt_max = 20\nt_points = 41\nmethods = closed_form, spectral, pole\n"),
    );
    let out = ws.out("o");
    assert!(ws.run("survival", &cfg, &["--out", out.to_str().unwrap()]).status.success());
    let (header, rows) = csv(&out.join("survival.csv"));
    assert_eq!(header.len(), 10);
    assert_eq!(&header[..4], ["t", "re_x_closed_form", "im_x_closed_form", "p_closed_form"]);
    assert_eq!(rows.len(), 41);
    for r in &rows {
        let v: Vec<f64> = r.iter().map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - v[4]).abs() < 1e-9 && (v[2] - v[5]).abs() < 1e-9);
        assert!((v[3] - (v[1] * v[1] + v[2] * v[2])).abs() < 1e-15);
    }
    assert_eq!(rows[0][3], "1e0");
}

#[test]
fn power_law_survival_with_tolerance_override() {
    let ws = Workspace::new();
    let cfg = ws.file(
        "p.cfg",
        "[model]\nfamily = threshold_power_law\nlambda = 0.1\nbandwidth = 1\nomega_a = 1\nshape_params = 1, 4\n\
         [task]\nt_max = 40\nt_points = 9\n",
    );
    let (a, b) = (ws.out("a"), ws.out("b"));
    assert!(ws.run("survival", &cfg, &["--out", a.to_str().unwrap()]).status.success());
    let res = ws.run("survival", &cfg, &["--out", b.to_str().unwrap(), "--tolerance", "1e-6"]);
    assert!(res.status.success());
    let (_, fine) = csv(&a.join("survival.csv"));
    let (_, coarse) = csv(&b.join("survival.csv"));
    for (f, c) in fine.iter().zip(&coarse) {
        let pf: f64 = f[3].parse().unwrap();
        let pc: f64 = c[3].parse().unwrap();
        assert!((pf - pc).abs() < 1e-5);
        assert!(pf <= 1.0 + 1e-9);
    }
}

#[test]
fn tabulated_model_from_csv() {
    let ws = Workspace::new();
    let mut table = String::from("omega,g2\n");
    for k in 0..=4000 {
        let w = -50.0 + 0.025 * f64::from(k);
        table.push_str(&format!("{w},{}\n", 0.01 / (std::f64::consts::PI * (w * w + 1.0))));
    }
    ws.file("g2.csv", &table);
    let cfg = ws.file(
        "tab.cfg",
        "[model]\nfamily = tabulated\nbandwidth = 1\nomega_a = 2\ntable = g2.csv\n[task]\nt_max = 30\nt_points = 7\n",
    );
    let out = ws.out("o");
    let res = ws.run("survival", &cfg, &["--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = csv(&out.join("survival.csv"));
    assert_eq!(header[1], "re_x_spectral");
    // a truncated Lorentzian tracks the analytic amplitude closely
    let exact = zeno_core::amplitude::survival_closed_form_lorentzian(0.1, 1.0, 2.0, &[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
        .unwrap();
    for (r, p) in rows.iter().zip(&exact.probabilities) {
        assert!((r[3].parse::<f64>().unwrap() - p).abs() < 1e-3, "{r:?} {p}");
    }

    // no second sheet for sampled data, so no natural rate either
    let res = ws.run("transition", &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(diagnostic(&res)["error"], "continuation_unsupported");
}

#[test]
fn sweep_summary_and_cache() {
    let ws = Workspace::new();
    let cfg = ws.file("sw.cfg", &format!("{LORENTZ}[task]\nomega_ratios = 0, 2, 10\ntau_points = 64\n"));
    let out = ws.out("o");
    let first = ws.run("sweep", &cfg, &["--out", out.to_str().unwrap()]);
    assert!(first.status.success());
    let summary = json(&out.join("sweep_summary.json"));
    let entries = summary["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    assert!(entries[0]["tau_star"].is_null());
    assert!(entries[1]["tau_star"].as_f64().is_some() && entries[2]["tau_star"].as_f64().is_some());
    RunConfig::from_value(summary["config"].clone()).unwrap();
    for e in entries {
        let doc = json(&out.join(e["transition_json"].as_str().unwrap()));
        let cfg = RunConfig::from_value(doc["config"].clone()).unwrap();
        assert_eq!(cfg.model.omega_a, e["omega_a"].as_f64());
        assert!(out.join(e["rate_csv"].as_str().unwrap()).is_file());
    }

    // a changed task invalidates every cached entry
    let cfg2 = ws.file("sw2.cfg", &format!("{LORENTZ}[task]\nomega_ratios = 0, 2, 10\ntau_points = 65\n"));
    assert!(ws.run("sweep", &cfg2, &["--out", out.to_str().unwrap()]).status.success());
    let files = std::fs::read_dir(out.join("sweep")).unwrap().count();
    assert_eq!(files, 12);
}

#[test]
fn sweep_requires_ratios() {
    let ws = Workspace::new();
    let cfg = ws.file("sw.cfg", LORENTZ);
    let res = ws.run("sweep", &cfg, &["--out", ws.out("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
