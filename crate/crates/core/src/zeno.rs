//! Repeated ideal measurements: effective rate, Zeno/inverse-Zeno transition
//! and the time scales that govern it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SurvivalModel;

pub const DEFAULT_GRID_POINTS: usize = 2048;
pub const MIN_GRID_POINTS: usize = 64;
/// Start of the transition scan, in units of `1/Λ`.
pub const SCAN_START: f64 = 1e-4;
pub const CLASSIFY_EPS: f64 = 1e-9;
const ROOT_RTOL: f64 = 1e-10;

/// `γ(τ) = -ln P(τ)/τ`.
pub fn effective_rate<M: SurvivalModel + ?Sized>(model: &M, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("measurement interval must be positive and finite, got {tau}")));
    }
    if let Some(rate) = model.short_time_rate(tau) {
        return Ok(rate);
    }
    let lnp = model.ln_survival(tau)?;
    if lnp == f64::NEG_INFINITY {
        return Err(Error::InfiniteRate(tau));
    }
    if lnp.is_nan() {
        return Err(Error::Consistency(format!("survival probability undefined at tau = {tau}")));
    }
    // rounding can leave ln P a hair above zero
    Ok((-lnp / tau).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveRateCurve {
    pub taus: Vec<f64>,
    pub gammas: Vec<f64>,
    pub gamma0: f64,
}

/// Effective rate over a grid of intervals, evaluated concurrently.
pub fn effective_rate_curve<M: SurvivalModel + ?Sized>(model: &M, taus: &[f64]) -> Result<EffectiveRateCurve> {
    let gamma0 = model.pole()?.gamma0;
    let gammas = taus
        .par_iter()
        .map(|&tau| effective_rate(model, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(EffectiveRateCurve {
        taus: taus.to_vec(),
        gammas,
        gamma0,
    })
}

/// Survival after `n` measurements spaced by `τ`: `P(τ)^n`.
pub fn repeated_survival(p_tau: f64, n: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_tau) {
        return Err(Error::invalid(format!("survival probability must lie in [0, 1], got {p_tau}")));
    }
    // powf is correctly rounded where powi's repeated squaring drifts by ~n ulp
    Ok(if n == 0 { 1.0 } else { p_tau.powf(n as f64) })
}

/// The same law written as an exponential in continuous time, `e^{-γt}`.
pub fn interpolated_survival(gamma: f64, t: f64) -> f64 {
    (-gamma * t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Zeno,
    InverseZeno,
    Natural,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Zeno => "zeno",
            Regime::InverseZeno => "inverse_zeno",
            Regime::Natural => "natural",
        }
    }
}

pub fn regime_of(gamma: f64, gamma0: f64) -> Regime {
    if gamma < gamma0 * (1.0 - CLASSIFY_EPS) {
        Regime::Zeno
    } else if gamma > gamma0 * (1.0 + CLASSIFY_EPS) {
        Regime::InverseZeno
    } else {
        Regime::Natural
    }
}

pub fn classify_regime<M: SurvivalModel + ?Sized>(model: &M, tau: f64) -> Result<Regime> {
    let gamma0 = model.pole()?.gamma0;
    Ok(regime_of(effective_rate(model, tau)?, gamma0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceCriteria {
    pub z_less_1: bool,
    /// `ω_a² > Λ²`; only meaningful for a Lorentzian form factor.
    pub asymmetry: Option<bool>,
    /// `|𝒵 - 1| < 10λ²`: the sign of `𝒵 - 1` is decided by higher orders.
    pub near_boundary: bool,
    pub z_renorm: f64,
}

pub fn existence_criteria<M: SurvivalModel + ?Sized>(model: &M) -> Result<ExistenceCriteria> {
    let z = model.pole()?.z_renorm;
    let near_boundary = model
        .coupling()
        .is_some_and(|lambda| (z - 1.0).abs() < 10.0 * lambda * lambda);
    Ok(ExistenceCriteria {
        z_less_1: z < 1.0,
        asymmetry: lorentzian_asymmetry(model),
        near_boundary,
        z_renorm: z,
    })
}

fn lorentzian_asymmetry<M: SurvivalModel + ?Sized>(model: &M) -> Option<bool> {
    if !model.is_lorentzian() {
        return None;
    }
    let wa = model.omega_a()?;
    let bw = model.bandwidth();
    Some(wa * wa > bw * bw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub tau_star: Option<f64>,
    pub all_roots: Vec<f64>,
    pub z_renorm: f64,
    pub criterion_z_less_1: bool,
    pub lorentzian_asymmetry_holds: Option<bool>,
    pub tau_max_searched: f64,
    pub grid_points: usize,
    pub jump_time: f64,
    pub zeno_time: f64,
    pub gamma0: f64,
}

/// Default upper end of the scan: `100/γ₀`.
pub fn default_tau_max<M: SurvivalModel + ?Sized>(model: &M) -> Result<f64> {
    let g0 = decay_rate(model)?;
    Ok(100.0 / g0)
}

fn decay_rate<M: SurvivalModel + ?Sized>(model: &M) -> Result<f64> {
    let g0 = model.pole()?.gamma0;
    if g0 > 0.0 {
        Ok(g0)
    } else {
        Err(Error::NoDecay(format!("pole decay rate {g0} is not positive")))
    }
}

/// Solves `γ(τ) = γ₀` on a log grid from `10⁻⁴/Λ` to `tau_max`.
pub fn find_transition_time<M: SurvivalModel + ?Sized>(model: &M, tau_max: f64, grid_points: usize) -> Result<TransitionReport> {
    let pole = model.pole()?;
    let (gamma0, z) = (decay_rate(model)?, pole.z_renorm);
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::invalid(format!("grid needs at least {MIN_GRID_POINTS} points, got {grid_points}")));
    }
    let tau_min = SCAN_START / model.bandwidth();
    if !(tau_max.is_finite() && tau_max > tau_min) {
        return Err(Error::invalid(format!("tau_max must exceed the scan start {tau_min}, got {tau_max}")));
    }
    let zeno_time = model.zeno_time()?;

    let step = (tau_max / tau_min).ln() / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| if i + 1 == grid_points { tau_max } else { tau_min * (step * i as f64).exp() })
        .collect();
    let excess = |tau: f64| effective_rate(model, tau).map(|g| g - gamma0);
    let values = grid.par_iter().map(|&t| excess(t)).collect::<Result<Vec<_>>>()?;

    let mut roots = Vec::new();
    if values[0] == 0.0 {
        roots.push(grid[0]);
    }
    for i in 0..grid_points - 1 {
        let (fa, fb) = (values[i], values[i + 1]);
        if fb == 0.0 {
            roots.push(grid[i + 1]);
        } else if fa != 0.0 && (fa < 0.0) != (fb < 0.0) {
            roots.push(bisect_root(&excess, grid[i], grid[i + 1], fa)?);
        }
    }
    roots.sort_by(f64::total_cmp);

    if z < 1.0 && roots.is_empty() {
        return Err(Error::Consistency(format!(
            "𝒵 = {z} < 1 guarantees a transition but none was bracketed up to tau = {tau_max} on {grid_points} points; refine the grid"
        )));
    }
    Ok(TransitionReport {
        tau_star: roots.first().copied(),
        all_roots: roots,
        z_renorm: z,
        criterion_z_less_1: z < 1.0,
        lorentzian_asymmetry_holds: lorentzian_asymmetry(model),
        tau_max_searched: tau_max,
        grid_points,
        jump_time: gamma0 * zeno_time * zeno_time,
        zeno_time,
        gamma0,
    })
}

fn bisect_root<F>(f: &F, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    while b - a > ROOT_RTOL * a {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicScales {
    pub zeno_time: f64,
    pub jump_time: f64,
    pub bandwidth_time: f64,
    /// `γ₀τ_Z²·Λ`; the linear short-time estimate of τ* is only trustworthy
    /// when this is small.
    pub jump_to_bandwidth: f64,
    /// `2πg²(ω_a)τ_Z²`, the golden-rule version of the jump time.
    pub golden_rule_jump_time: Option<f64>,
    /// `2πg²(ω_a)/(g²(ω̄)Λ)` from the effective bandwidth construction.
    pub threshold_ratio: Option<f64>,
}

pub fn characteristic_scales<M: SurvivalModel + ?Sized>(model: &M) -> Result<CharacteristicScales> {
    if model.coupling() == Some(0.0) {
        return Err(Error::NoDecay("zero coupling: the level is stationary".into()));
    }
    let zeno_time = model.zeno_time()?;
    let gamma0 = model.pole()?.gamma0;
    let bw = model.bandwidth();
    let jump_time = gamma0 * zeno_time * zeno_time;
    let (mut golden, mut ratio) = (None, None);
    if let (Some(ff), Some(wa)) = (model.form_factor(), model.omega_a()) {
        let g2a = ff.g2(wa);
        golden = Some(2.0 * std::f64::consts::PI * g2a * zeno_time * zeno_time);
        if let Ok(eff) = ff.effective_bandwidth_coupling() {
            ratio = Some(2.0 * std::f64::consts::PI * g2a / (eff.g2_bar * bw));
        }
    }
    Ok(CharacteristicScales {
        zeno_time,
        jump_time,
        bandwidth_time: 1.0 / bw,
        jump_to_bandwidth: jump_time * bw,
        golden_rule_jump_time: golden,
        threshold_ratio: ratio,
    })
}
