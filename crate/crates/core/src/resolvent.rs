//! Second-sheet pole of the propagator `x(E) = i/(E - ω_a - Σ(E))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formfactor::{bisect, Family, FormFactor};
use crate::quadrature::Tolerance;
use crate::selfenergy::{first_sheet_real, real_shift_with, self_energy_with, Sheet};

/// Decay pole `E_pole = ω_a + Δ - iγ₀/2` and its residue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleData {
    pub e_pole: Complex64,
    pub shift_delta: f64,
    pub gamma0: f64,
    /// `𝒵 = |1 - Σ'_II(E_pole)|⁻²`.
    pub z_renorm: f64,
    /// `|E_pole - ω_a - Σ_II(E_pole)|`.
    pub residual: f64,
    /// `1/(1 - Σ'_II(E_pole))`; `|residue|² = 𝒵`.
    pub residue: Complex64,
    /// Real poles below (or above) the continuum, if any.
    pub bound_states: Vec<BoundState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundState {
    pub energy: f64,
    /// Weight `1/(1 - Σ'(E_b))` of the state in the survival amplitude.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoldenRule {
    pub rate: f64,
    pub below_threshold: bool,
}

const MAX_NEWTON_STEPS: usize = 200;
/// Relative distance from a support edge below which bound states are not resolved.
const EDGE_GAP: f64 = 1e-9;

fn residual_bound(e: Complex64) -> f64 {
    1e-10 * e.norm().max(1.0)
}

/// `γ₀ ≈ 2π g²(ω_a)`.
pub fn golden_rule_rate(ff: &FormFactor, omega_a: f64) -> GoldenRule {
    let (lo, hi) = ff.support();
    if omega_a < lo {
        return GoldenRule {
            rate: 0.0,
            below_threshold: true,
        };
    }
    if omega_a > hi {
        return GoldenRule {
            rate: 0.0,
            below_threshold: false,
        };
    }
    GoldenRule {
        rate: 2.0 * PI * ff.g2(omega_a),
        below_threshold: false,
    }
}

pub fn find_pole(ff: &FormFactor, omega_a: f64) -> Result<PoleData> {
    find_pole_with(ff, omega_a, Tolerance::default())
}

/// Newton iteration on `E - ω_a - Σ_II(E) = 0`, seeded at the
/// second-order point `ω_a + Δ_R(ω_a) - iπ g²(ω_a)`.
pub fn find_pole_with(ff: &FormFactor, omega_a: f64, tol: Tolerance) -> Result<PoleData> {
    if !omega_a.is_finite() {
        return Err(Error::invalid("omega_a must be finite"));
    }
    if ff.lambda() == 0.0 {
        return Err(Error::NoDecay("zero coupling: the level is stationary".into()));
    }
    if !ff.supports_continuation() {
        return Err(match ff.g2_complex(Complex64::new(omega_a, -1.0)) {
            Err(e) => e,
            Ok(_) => Error::ContinuationUnsupported(ff.family().name().into()),
        });
    }
    let (lo, hi) = ff.support();
    if omega_a <= lo || omega_a >= hi {
        return Err(Error::invalid(format!("omega_a = {omega_a} must lie inside the continuum ({lo}, {hi})")));
    }

    let bound_states = detect_bound_states(ff, omega_a, tol)?;

    let sigma2 = |e: Complex64| self_energy_with(ff, e, Sheet::Second, tol);
    let seed = Complex64::new(omega_a + real_shift_with(ff, omega_a, tol)?, -PI * ff.g2(omega_a).max(f64::MIN_POSITIVE));

    let mut e = seed;
    let mut trajectory = vec![e];
    let mut best = (f64::INFINITY, e);
    let mut converged = false;
    for _ in 0..MAX_NEWTON_STEPS {
        let s = sigma2(e)?;
        let f = e - omega_a - s.value;
        let r = f.norm();
        if r < best.0 {
            best = (r, e);
        }
        let scale = e.norm().max(1.0);
        if r <= 1e-15 * scale {
            converged = true;
            break;
        }
        let step = f / (1.0 - s.derivative);
        let mut next = e - step;
        // keep iterates off the real axis, where the continuation is undefined
        let mut damp = 0;
        while next.im >= 0.0 && ff.family() != Family::Lorentzian && damp < 60 {
            next = e - step * 0.5f64.powi(damp + 1);
            damp += 1;
        }
        trajectory.push(next);
        if (next - e).norm() <= 4.0 * f64::EPSILON * scale {
            e = next;
            converged = true;
            break;
        }
        e = next;
    }
    if !converged {
        if best.0 <= residual_bound(best.1) {
            e = best.1;
        } else {
            return Err(Error::NewtonNonConvergence {
                steps: MAX_NEWTON_STEPS,
                last: e,
                trajectory,
            });
        }
    }

    if ff.family() == Family::Lorentzian {
        // the quadratic has a second root: keep the longer-lived one
        let other = Complex64::new(omega_a, -ff.bandwidth()) - e;
        let l2 = ff.lambda() * ff.lambda();
        let weight = |z: Complex64| {
            let s = z + Complex64::new(0.0, ff.bandwidth());
            (1.0 / (1.0 + l2 / (s * s))).norm()
        };
        let tie = (other.im.abs() - e.im.abs()).abs() <= 1e-14 * e.norm().max(1.0);
        if other.im.abs() < e.im.abs() && !tie || tie && weight(other) > weight(e) {
            e = other;
            for _ in 0..3 {
                let s = sigma2(e)?;
                e -= (e - omega_a - s.value) / (1.0 - s.derivative);
            }
        }
    }

    pole_data(ff, omega_a, e, bound_states, tol)
}

fn pole_data(ff: &FormFactor, omega_a: f64, e: Complex64, bound_states: Vec<BoundState>, tol: Tolerance) -> Result<PoleData> {
    let s = self_energy_with(ff, e, Sheet::Second, tol)?;
    let residual = (e - omega_a - s.value).norm();
    if residual > residual_bound(e) {
        return Err(Error::Tolerance {
            estimate: e.norm(),
            achieved: residual,
            requested: residual_bound(e),
        });
    }
    if e.im >= 0.0 {
        return Err(Error::NoDecay(format!("pole {e} is not in the lower half plane")));
    }
    let residue = 1.0 / (1.0 - s.derivative);
    Ok(PoleData {
        e_pole: e,
        shift_delta: e.re - omega_a,
        gamma0: -2.0 * e.im,
        z_renorm: residue.norm_sqr(),
        residual,
        residue,
        bound_states,
    })
}

/// Exact pole of the Lorentzian model from the closed-form shift, width
/// and renormalisation, with `Ω² = ω_a² + 4λ² - Λ²`.
///
/// `γ₀ = Λ - √((s - Ω²)/2)` and `Δ = (√((s + Ω²)/2) - ω_a)/2`, `s = √(Ω⁴ +
/// 4ω_a²Λ²)`, are evaluated in a rationalised form free of cancellation at
/// weak coupling.
pub fn lorentzian_pole_closed_form(lambda: f64, bandwidth: f64, omega_a: f64) -> Result<PoleData> {
    if !(lambda.is_finite() && bandwidth.is_finite() && omega_a.is_finite()) {
        return Err(Error::invalid("parameters must be finite"));
    }
    if bandwidth <= 0.0 || lambda < 0.0 {
        return Err(Error::invalid("need lambda >= 0 and bandwidth > 0"));
    }
    if lambda == 0.0 {
        return Err(Error::NoDecay("zero coupling: the level is stationary".into()));
    }
    let (l2, b2, wa) = (lambda * lambda, bandwidth * bandwidth, omega_a);
    let omega2 = wa * wa + 4.0 * l2 - b2;
    let s = omega2.hypot(2.0 * wa * bandwidth);
    let a = ((s + omega2) / 2.0).max(0.0).sqrt();
    let b = ((s - omega2) / 2.0).max(0.0).sqrt();

    let gamma0 = 8.0 * b2 * l2 / ((2.0 * b2 + omega2 + s) * (bandwidth + b));
    let delta = if wa == 0.0 {
        a / 2.0
    } else {
        wa.signum() * 4.0 * wa * wa * l2 / ((s + 2.0 * wa * wa - omega2) * (a + wa.abs()))
    };
    let num = (wa + delta).powi(2) + (bandwidth - gamma0 / 2.0).powi(2);
    let den = (wa + 2.0 * delta).powi(2) + (bandwidth - gamma0).powi(2);
    if den == 0.0 {
        return Err(Error::Degenerate("coalescing poles (exceptional point)".into()));
    }
    let e = Complex64::new(wa + delta, -gamma0 / 2.0);
    let shifted = e + Complex64::new(0.0, bandwidth);
    let residual = (e - wa - l2 / shifted).norm();
    let residue = 1.0 / (1.0 + l2 / (shifted * shifted));
    Ok(PoleData {
        e_pole: e,
        shift_delta: delta,
        gamma0,
        z_renorm: num / den,
        residual,
        residue,
        bound_states: Vec::new(),
    })
}

/// Real roots of `E - ω_a - Σ_I(E)` outside the continuum.
///
/// The function is increasing on each side of a finite support edge, so a
/// root exists exactly when the sign at the edge allows one.
pub fn detect_bound_states(ff: &FormFactor, omega_a: f64, tol: Tolerance) -> Result<Vec<BoundState>> {
    let mut out = Vec::new();
    if ff.family() == Family::Lorentzian || ff.lambda() == 0.0 {
        return Ok(out);
    }
    let (lo, hi) = ff.support();
    let bw = ff.bandwidth();
    let f = |e: f64| -> Result<f64> { Ok(e - omega_a - first_sheet_real(ff, e, false, tol)?.0) };

    if lo.is_finite() {
        // Σ_I(lo⁻) diverges to -∞ when g² does not vanish at the edge
        let (near, edge) = edge_probe(ff, lo, -1.0, &f)?;
        if edge > 0.0 {
            let mut far = lo - bw;
            let mut k = 0;
            while f(far)? >= 0.0 {
                k += 1;
                if k > 60 {
                    return Err(Error::Consistency("bound-state bracket below threshold not found".into()));
                }
                far = lo - bw * 2f64.powi(k);
            }
            out.push(refine_bound_state(ff, omega_a, far, near, tol)?);
        }
    }
    if hi.is_finite() {
        let (near, edge) = edge_probe(ff, hi, 1.0, &f)?;
        if edge < 0.0 {
            let mut far = hi + bw;
            let mut k = 0;
            while f(far)? <= 0.0 {
                k += 1;
                if k > 60 {
                    return Err(Error::Consistency("bound-state bracket above the continuum not found".into()));
                }
                far = hi + bw * 2f64.powi(k);
            }
            out.push(refine_bound_state(ff, omega_a, far, near, tol)?);
        }
    }
    Ok(out)
}

/// Sign information just outside a support edge. Where `g²` does not vanish
/// at the edge `Σ_I` diverges only logarithmically, so a root can sit
/// astronomically close to the edge with a vanishing weight `~d/g²`; the
/// probe stops a resolvable distance short and such roots are dropped.
fn edge_probe<F: Fn(f64) -> Result<f64>>(ff: &FormFactor, edge: f64, side: f64, f: &F) -> Result<(f64, f64)> {
    if ff.g2(edge) == 0.0 {
        return Ok((edge, f(edge)?));
    }
    let near = edge + side * EDGE_GAP * ff.bandwidth().max(edge.abs());
    let value = f(near)?;
    if value * side > 0.0 {
        log::debug!("bound state within {EDGE_GAP:e} of the support edge {edge} dropped");
    }
    Ok((near, value))
}

fn refine_bound_state(ff: &FormFactor, omega_a: f64, far: f64, edge: f64, tol: Tolerance) -> Result<BoundState> {
    let failure = std::cell::RefCell::new(None);
    let root = bisect(
        |e| match first_sheet_real(ff, e, false, tol) {
            Ok((s, _)) => e - omega_a - s,
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                f64::NAN
            }
        },
        far,
        edge,
    );
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    let (_, ds) = first_sheet_real(ff, root, true, tol)?;
    Ok(BoundState {
        energy: root,
        weight: 1.0 / (1.0 - ds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_rule_values() {
        let ff = FormFactor::lorentzian(0.1, 1.0).unwrap();
        assert!((golden_rule_rate(&ff, 2.0).rate - 0.004).abs() < 1e-17);
        assert_eq!(golden_rule_rate(&FormFactor::lorentzian(0.0, 1.0).unwrap(), 2.0).rate, 0.0);
        let t = FormFactor::threshold_power_law(0.1, 1.0, 0.5, 1.0, 4.0).unwrap();
        assert_eq!(golden_rule_rate(&t, 0.5).rate, 0.0);
        assert!(golden_rule_rate(&t, 0.2).below_threshold);
    }

    #[test]
    fn lorentzian_pole_at_band_centre() {
        let p = find_pole(&FormFactor::lorentzian(0.1, 1.0).unwrap(), 0.0).unwrap();
        assert!((p.gamma0 - (1.0 - 0.96f64.sqrt())).abs() < 1e-15);
        assert!(p.shift_delta.abs() < 1e-15);
        assert!(p.residual < 1e-15);
    }

    #[test]
    fn weak_coupling_limit() {
        let p = find_pole(&FormFactor::lorentzian(1e-30, 1.0).unwrap(), 0.7).unwrap();
        assert!((p.e_pole.re - 0.7).abs() < 1e-15);
        assert!(p.gamma0 < 1e-55 && p.gamma0 > 0.0);
        assert!((p.z_renorm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_renormalisation_signs() {
        let centre = lorentzian_pole_closed_form(0.1, 1.0, 0.0).unwrap();
        assert!((centre.z_renorm - 1.020_727_029_746_495_4).abs() < 1e-12);
        assert!(lorentzian_pole_closed_form(0.1, 1.0, 2.0).unwrap().z_renorm < 1.0);
        let tiny = lorentzian_pole_closed_form(1e-9, 1.0, 0.3).unwrap();
        assert!(tiny.gamma0 < 1e-17 && tiny.shift_delta.abs() < 1e-17 && (tiny.z_renorm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_and_bad_inputs() {
        assert!(matches!(find_pole(&FormFactor::lorentzian(0.0, 1.0).unwrap(), 1.0), Err(Error::NoDecay(_))));
        let t = FormFactor::threshold_power_law(0.1, 1.0, 0.0, 0.5, 4.0).unwrap();
        assert!(find_pole(&t, -0.5).is_err());
        let tab = FormFactor::tabulated(1.0, &[(0.0, 0.0), (1.0, 0.01), (2.0, 0.0)]).unwrap();
        assert!(matches!(find_pole(&tab, 1.0), Err(Error::ContinuationUnsupported(_))));
    }

    #[test]
    fn power_law_pole_satisfies_pole_equation() {
        let ff = FormFactor::threshold_power_law(0.1, 1.0, 0.0, 0.5, 4.0).unwrap();
        let p = find_pole(&ff, 0.5).unwrap();
        assert!(p.residual < 1e-10);
        let gr = golden_rule_rate(&ff, 0.5).rate;
        assert!((p.gamma0 - gr).abs() < 0.1 * gr, "{} vs {}", p.gamma0, gr);
        assert!(p.bound_states.is_empty());
    }

    #[test]
    fn strong_coupling_splits_off_a_bound_state() {
        let ff = FormFactor::threshold_power_law(0.6, 1.0, 0.0, 1.0, 4.0).unwrap();
        let states = detect_bound_states(&ff, 0.2, Tolerance::default()).unwrap();
        assert_eq!(states.len(), 1);
        let b = states[0];
        assert!(b.energy < 0.0 && b.weight > 0.0 && b.weight < 1.0);
        let (s, _) = first_sheet_real(&ff, b.energy, false, Tolerance::default()).unwrap();
        assert!((b.energy - 0.2 - s).abs() < 1e-12);
    }
}
