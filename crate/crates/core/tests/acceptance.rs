//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every check prints exactly one PASS/FAIL line, even when it passes.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use zeno_core::amplitude::{survival_closed_form_lorentzian, survival_spectral_integral};
use zeno_core::formfactor::FormFactor;
use zeno_core::model::{DecayModel, SurvivalModel};
use zeno_core::resolvent::find_pole;
use zeno_core::selfenergy::{self_energy, Sheet};
use zeno_core::zeno::{
    default_tau_max, effective_rate, find_transition_time, interpolated_survival, repeated_survival, DEFAULT_GRID_POINTS,
};

const UNIT_NORM_TOL: f64 = 1e-12;
const INVERSION_TOL: f64 = 1e-6;
const POLE_REL_TOL: f64 = 1e-10;
const POLE_RESIDUAL_TOL: f64 = 1e-10;
const Z_DUAL_TOL: f64 = 1e-10;
const LINEAR_REGIME_TOL: f64 = 0.05;
const ASYMPTOTIC_TOL: f64 = 1e-4;
const JUMP_TIME_TOL: f64 = 0.25;
const Z_MARGIN: f64 = 1e-3;
const REPEAT_REL_TOL: f64 = 1e-12;

const LAMBDA: f64 = 0.1;
const BANDWIDTH: f64 = 1.0;
const GRID_OMEGAS: [f64; 3] = [0.0, 2.0, 10.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn lorentz(omega_a: f64) -> DecayModel {
    DecayModel::new(&FormFactor::lorentzian(LAMBDA, BANDWIDTH).unwrap(), omega_a).unwrap()
}

/// Decay pole of `(E - ω_a)(E + iΛ) = λ²` from the quadratic formula, with
/// its residue `(E₁ + iΛ)/(E₁ - E₂)`.
struct QuadraticPole {
    shift: f64,
    gamma0: f64,
    z: f64,
}

fn quadratic_pole(lambda: f64, bw: f64, wa: f64) -> QuadraticPole {
    let i = Complex64::i();
    let b = i * bw - wa;
    let c = -i * bw * wa - lambda * lambda;
    let disc = (b * b - 4.0 * c).sqrt();
    // pick the sign that avoids cancellation, then use Vieta for the other root
    let q = if (b + disc).norm() >= (b - disc).norm() { -(b + disc) / 2.0 } else { -(b - disc) / 2.0 };
    let (r1, r2) = (q, c / q);
    let (e1, e2) = if r1.im.abs() <= r2.im.abs() { (r1, r2) } else { (r2, r1) };
    let residue = (e1 + i * bw) / (e1 - e2);
    QuadraticPole {
        shift: e1.re - wa,
        gamma0: -2.0 * e1.im,
        z: residue.norm_sqr(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

fn unit_norm() -> Outcome {
    let lor = |l: f64| FormFactor::lorentzian(l, BANDWIDTH).unwrap();
    let mut models: Vec<(String, DecayModel)> = Vec::new();
    for l in [0.01, 0.1, 0.3] {
        for wa in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            models.push((format!("lorentzian l={l} wa={wa}"), DecayModel::new(&lor(l), wa).unwrap()));
        }
    }
    for (p, q, wa) in [(0.5, 3.0, 1.0), (1.0, 4.0, 0.5), (1.5, 4.0, 2.0), (2.0, 6.0, 1.0)] {
        let ff = FormFactor::threshold_power_law(LAMBDA, BANDWIDTH, 0.0, p, q).unwrap();
        models.push((format!("power law p={p} q={q} wa={wa}"), DecayModel::new(&ff, wa).unwrap()));
    }
    let src = lor(LAMBDA);
    let samples: Vec<(f64, f64)> = (0..=4000)
        .map(|k| {
            let w = -50.0 + 0.025 * k as f64;
            (w, src.coupling_strength_squared(w).unwrap())
        })
        .collect();
    let tab = FormFactor::tabulated(BANDWIDTH, &samples).unwrap();
    models.push(("tabulated lorentzian wa=2".into(), DecayModel::new(&tab, 2.0).unwrap()));

    let mut worst = (0.0_f64, String::new());
    for (name, m) in &models {
        let err = (m.survival(0.0).unwrap() - 1.0).abs();
        if err >= worst.0 {
            worst = (err, name.clone());
        }
    }
    outcome(
        worst.0 <= UNIT_NORM_TOL,
        format!("{} models, max |P(0)-1| = {:.1e} ({})", models.len(), worst.0, worst.1),
    )
}

fn closed_vs_spectral() -> Outcome {
    let times: Vec<f64> = (0..=500).map(|k| 0.1 * k as f64).collect();
    let ff = FormFactor::lorentzian(LAMBDA, BANDWIDTH).unwrap();
    let mut worst = 0.0_f64;
    for wa in GRID_OMEGAS {
        let closed = survival_closed_form_lorentzian(LAMBDA, BANDWIDTH, wa, &times).unwrap();
        let spectral = survival_spectral_integral(&ff, wa, &times).unwrap();
        for (a, b) in closed.amplitudes.iter().zip(&spectral.amplitudes) {
            worst = worst.max((a - b).norm());
        }
    }
    outcome(
        worst < INVERSION_TOL,
        format!("max |x_spectral - x_closed| = {worst:.2e} over t in [0, 50]"),
    )
}

fn pole_cross_check() -> Outcome {
    let ff = FormFactor::lorentzian(LAMBDA, BANDWIDTH).unwrap();
    let (mut worst, mut worst_res) = (0.0_f64, 0.0_f64);
    for wa in GRID_OMEGAS {
        let p = find_pole(&ff, wa).unwrap();
        let o = quadratic_pole(LAMBDA, BANDWIDTH, wa);
        let shift_err = if o.shift.abs() < 1e-15 { p.shift_delta.abs() } else { rel(p.shift_delta, o.shift) };
        worst = worst.max(shift_err).max(rel(p.gamma0, o.gamma0)).max(rel(p.z_renorm, o.z));
        worst_res = worst_res.max(p.residual);
    }
    // independent high-precision values, frozen
    let frozen = [
        (0.0, 0.0202041028867287607, 1.0207270297464954),
        (2.0, 0.00398245251541222, 0.99759740007160535),
        (10.0, 1.97961779332257e-4, 0.99980596536849133),
    ];
    for (wa, g0, z) in frozen {
        let p = find_pole(&ff, wa).unwrap();
        worst = worst.max(rel(p.gamma0, g0)).max(rel(p.z_renorm, z));
    }
    outcome(
        worst < POLE_REL_TOL && worst_res < POLE_RESIDUAL_TOL,
        format!("max relative deviation {worst:.2e}, max residual {worst_res:.2e}"),
    )
}

fn z_dual_formula() -> Outcome {
    let mut worst = 0.0_f64;
    for l in [0.01, 0.1, 0.3] {
        let ff = FormFactor::lorentzian(l, BANDWIDTH).unwrap();
        for wa in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let p = find_pole(&ff, wa).unwrap();
            let sigma = self_energy(&ff, p.e_pole, Sheet::Second).unwrap();
            let from_derivative = (Complex64::new(1.0, 0.0) - sigma.derivative).norm_sqr().recip();
            let (d, g0) = (p.shift_delta, p.gamma0);
            let closed = ((wa + d).powi(2) + (BANDWIDTH - g0 / 2.0).powi(2))
                / ((wa + 2.0 * d).powi(2) + (BANDWIDTH - g0).powi(2));
            worst = worst.max(rel(from_derivative, closed));
        }
    }
    outcome(worst < Z_DUAL_TOL, format!("max relative difference {worst:.2e} over 18 models"))
}

fn linear_regime() -> Outcome {
    let mut worst = 0.0_f64;
    for wa in GRID_OMEGAS {
        let m = lorentz(wa);
        for k in 0..=60 {
            let tau = 0.05 * 10f64.powf(-(k as f64) / 10.0);
            let g = effective_rate(&m, tau).unwrap();
            worst = worst.max((g / (LAMBDA * LAMBDA * tau) - 1.0).abs());
        }
    }
    outcome(
        worst < LINEAR_REGIME_TOL,
        format!("max |gamma/(lambda^2 tau) - 1| = {worst:.4} for tau in [5e-8, 0.05]"),
    )
}

fn asymptotic_rate() -> Outcome {
    let m = lorentz(0.0);
    let o = quadratic_pole(LAMBDA, BANDWIDTH, 0.0);
    let mut worst = 0.0_f64;
    for k in 0..=140 {
        let tau = 30.0 + 0.5 * k as f64;
        let g = effective_rate(&m, tau).unwrap();
        worst = worst.max((g - (o.gamma0 - o.z.ln() / tau)).abs());
    }
    outcome(
        worst < ASYMPTOTIC_TOL,
        format!("max |gamma - (gamma0 - ln Z/tau)| = {worst:.2e} for tau in [30, 100]"),
    )
}

fn existence_map() -> Outcome {
    let mut failures = Vec::new();
    let mut found = Vec::new();
    for ratio in [1.5, 2.0, 5.0, 10.0, 0.0, 0.5, 0.8] {
        let m = lorentz(ratio * BANDWIDTH);
        let tau_max = default_tau_max(&m).unwrap();
        let r = find_transition_time(&m, tau_max, DEFAULT_GRID_POINTS).unwrap();
        let expect = ratio > 1.0;
        if r.tau_star.is_some() != expect {
            failures.push(format!("wa/bw={ratio}"));
        }
        if let Some(t) = r.tau_star {
            found.push(format!("{ratio}:{t:.4}"));
        }
    }
    let detail = if failures.is_empty() {
        format!("tau* found at {}; none below the boundary", found.join(" "))
    } else {
        format!("wrong outcome at {}", failures.join(", "))
    };
    outcome(failures.is_empty(), detail)
}

fn jump_time() -> Outcome {
    let m = lorentz(10.0);
    let r = find_transition_time(&m, default_tau_max(&m).unwrap(), DEFAULT_GRID_POINTS).unwrap();
    let Some(tau_star) = r.tau_star else {
        return outcome(false, "no transition found");
    };
    let jump = r.jump_time;
    let dev = (tau_star - jump).abs() / tau_star;
    outcome(
        dev <= JUMP_TIME_TOL && jump <= tau_star,
        format!("tau* = {tau_star:.6e}, gamma0 tau_Z^2 = {jump:.6e}, relative gap {dev:.3}"),
    )
}

fn sufficiency() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_2e70);
    let (mut checked, mut misses) = (0, Vec::new());
    for _ in 0..200 {
        let lambda = rng.gen_range(0.01..=0.3);
        let bw = rng.gen_range(0.5..=2.0);
        let ratio = rng.gen_range(0.0..=20.0);
        let m = DecayModel::new(&FormFactor::lorentzian(lambda, bw).unwrap(), ratio * bw).unwrap();
        if m.pole().unwrap().z_renorm >= 1.0 - Z_MARGIN {
            continue;
        }
        checked += 1;
        let r = find_transition_time(&m, default_tau_max(&m).unwrap(), DEFAULT_GRID_POINTS).unwrap();
        if r.tau_star.is_none() {
            misses.push(format!("(l={lambda:.4}, bw={bw:.3}, wa/bw={ratio:.3})"));
        }
    }
    outcome(
        misses.is_empty() && checked > 0,
        format!("200 models, {checked} with Z < 1 - 1e-3, {} without a root {}", misses.len(), misses.join(" ")),
    )
}

fn repeated_measurements() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x0e9a_11ed);
    let (mut worst_exp, mut worst_interp) = (0.0_f64, 0.0_f64);
    for k in 0..20_000 {
        let n: u64 = rng.gen_range(0..=1_000_000);
        // half uniform, half chosen so that p^n stays representable
        let p: f64 = if k % 2 == 0 {
            rng.gen_range(0.0..=1.0)
        } else {
            (-rng.gen_range(0.0..700.0) / n.max(1) as f64).exp()
        };
        let tau: f64 = rng.gen_range(1e-3..10.0);
        let direct = repeated_survival(p, n).unwrap();
        let via_log = if n == 0 { 1.0 } else { (n as f64 * p.ln()).exp() };
        let gamma = -p.ln() / tau;
        let via_rate = if n == 0 { 1.0 } else { interpolated_survival(gamma, n as f64 * tau) };
        let scale = direct.max(f64::MIN_POSITIVE);
        if direct > 1e-300 || via_log > 1e-300 {
            worst_exp = worst_exp.max((direct - via_log).abs() / scale);
            worst_interp = worst_interp.max((direct - via_rate).abs() / scale);
        }
    }
    outcome(
        worst_exp < REPEAT_REL_TOL && worst_interp < REPEAT_REL_TOL,
        format!("20000 draws, max relative gap vs exp(n ln p) {worst_exp:.1e}, vs exp(-gamma n tau) {worst_interp:.1e}"),
    )
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let key = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sweep.cfg");
    std::fs::write(
        &config,
        "[model]\nfamily = lorentzian\nlambda = 0.1\nbandwidth = 1\n\n[task]\nomega_ratios = 0, 0.5, 1.5, 2, 5, 10\ntau_points = 200\n",
    )
    .unwrap();
    let run = |out: &Path, extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_zeno"))
            .arg("sweep")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(out)
            .args(extra)
            .output()
            .unwrap()
            .status
            .success()
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    if !(run(&a, &[]) && run(&b, &["--no-cache"])) {
        return outcome(false, "sweep exited with an error");
    }
    let first = tree(&a);
    let identical = first == tree(&b);
    // a third run over the first directory reuses the cache
    let cached_ok = run(&a, &[]) && first == tree(&a);
    outcome(
        identical && cached_ok && !first.is_empty(),
        format!("{} files byte-identical across fresh and cached runs", first.len()),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 11] = [
        ("unit norm at t = 0", unit_norm),
        ("closed form vs spectral inversion", closed_vs_spectral),
        ("pole vs quadratic roots", pole_cross_check),
        ("renormalisation dual formula", z_dual_formula),
        ("linear Zeno regime", linear_regime),
        ("asymptotic rate recovery", asymptotic_rate),
        ("transition existence map", existence_map),
        ("jump-time estimate", jump_time),
        ("sufficiency of Z < 1", sufficiency),
        ("repeated measurement identity", repeated_measurements),
        ("sweep determinism", determinism),
    ];
    let mut failed = 0;
    for (idx, (name, check)) in checks.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "[{}] {:>2}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            idx + 1,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
