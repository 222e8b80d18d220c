//! Late-time amplitudes of a threshold power law, where the pole term has
//! fallen below the threshold tail and the two interfere.

use num_complex::Complex64;
use zeno_core::formfactor::FormFactor;
use zeno_core::model::{DecayModel, SurvivalModel};
use zeno_core::zeno::{default_tau_max, find_transition_time, DEFAULT_GRID_POINTS};

fn model() -> DecayModel {
    let ff = FormFactor::threshold_power_law(0.1, 1.0, 0.0, 1.0, 4.0).unwrap();
    DecayModel::new(&ff, 1.0).unwrap()
}

#[test]
fn amplitudes_match_direct_quadrature() {
    // 25-digit quadrature of ρ(ω)e^{-iωt} with Σ from partial fractions
    let frozen = [
        (600.0, Complex64::new(4.85801823057e-6, -6.60641519492e-7)),
        (700.0, Complex64::new(6.06761793109e-7, -1.02292986278e-7)),
        (800.0, Complex64::new(6.14668241239e-8, -1.5347532052e-8)),
        (900.0, Complex64::new(-5.58310662171e-9, -2.20745822137e-9)),
        (1000.0, Complex64::new(-1.17336798231e-8, -2.76014140094e-10)),
    ];
    let m = model();
    for (t, x) in frozen {
        let got = m.amplitude(t).unwrap();
        assert!((got - x).norm() < 5e-12, "t={t}: {got} vs {x}");
    }
}

#[test]
fn interference_produces_late_crossings() {
    let m = model();
    let pole = m.pole().unwrap();
    assert!(pole.z_renorm > 1.0);
    let r = find_transition_time(&m, default_tau_max(&m).unwrap(), DEFAULT_GRID_POINTS).unwrap();
    // Z > 1 keeps the early curve below gamma0; the tail takes over later
    let first = r.tau_star.unwrap();
    assert!(first * pole.gamma0 > 20.0, "{first}");
    assert!(r.all_roots.len() >= 2);
}
