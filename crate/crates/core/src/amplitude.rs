//! Survival amplitude `x(t)` and probability `P(t) = |x(t)|²`.
//!
//! Three routes: the two-pole closed form of the Lorentzian model, the
//! spectral integral `x(t) = ∫ ρ(ω) e^{-iωt} dω` (plus bound states) for any
//! form factor, and the pure pole term `√𝒵 e^{-iRe(E_pole)t - γ₀t/2}`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formfactor::{Family, FormFactor};
use crate::quadrature::{integrate_interval, rescale_error, Tolerance, RULE, RULE_POINTS};
use crate::resolvent::{detect_bound_states, find_pole_with, lorentzian_pole_closed_form, BoundState, PoleData};
use crate::selfenergy::{first_sheet_rotated, real_shift_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    SpectralIntegral,
    PoleApprox,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::SpectralIntegral => "spectral",
            Method::PoleApprox => "pole",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalSeries {
    pub times: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    pub probabilities: Vec<f64>,
    pub method: Method,
}

impl SurvivalSeries {
    fn from_amplitudes(times: Vec<f64>, amplitudes: Vec<Complex64>, method: Method) -> Self {
        let probabilities = amplitudes.iter().map(|x| x.norm_sqr()).collect();
        Self {
            times,
            amplitudes,
            probabilities,
            method,
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    match times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        Some(t) => Err(Error::invalid(format!("times must be finite and non-negative, got {t}"))),
        None => Ok(()),
    }
}

/// `e^z - 1` without cancellation for small `|z|`.
pub(crate) fn exp_m1(z: Complex64) -> Complex64 {
    let ea = z.re.exp();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() - 2.0 * ea * half * half, ea * z.im.sin())
}

/// `P - 1 = 2 Re d + |d|²` for `x = 1 + d`.
pub(crate) fn survival_minus_one(d: Complex64) -> f64 {
    d.re.mul_add(d.re + 2.0, d.im * d.im)
}

/// Closed-form survival amplitude of the Lorentzian model: the sum of the
/// two pole contributions of `x(E) = i(E + iΛ)/[(E - ω_a)(E + iΛ) - λ²]`.
#[derive(Debug, Clone)]
pub struct LorentzianSurvival {
    lambda: f64,
    bandwidth: f64,
    omega_a: f64,
    pole: PoleData,
    coef_slow: Complex64,
    coef_fast: Complex64,
    // exponents per unit time
    rate_slow: Complex64,
    rate_fast: Complex64,
}

impl LorentzianSurvival {
    pub fn new(lambda: f64, bandwidth: f64, omega_a: f64) -> Result<Self> {
        let pole = lorentzian_pole_closed_form(lambda, bandwidth, omega_a)?;
        let (delta, g0) = (pole.shift_delta, pole.gamma0);
        let den = Complex64::new(omega_a + 2.0 * delta, bandwidth - g0);
        if den.norm() == 0.0 {
            return Err(Error::Degenerate("coalescing poles (exceptional point)".into()));
        }
        Ok(Self {
            lambda,
            bandwidth,
            omega_a,
            coef_slow: Complex64::new(omega_a + delta, bandwidth - g0 / 2.0) / den,
            coef_fast: Complex64::new(delta, -g0 / 2.0) / den,
            rate_slow: Complex64::new(-g0 / 2.0, -(omega_a + delta)),
            rate_fast: Complex64::new(-(bandwidth - g0 / 2.0), delta),
            pole,
        })
    }

    pub fn pole(&self) -> &PoleData {
        &self.pole
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn amplitude(&self, t: f64) -> Complex64 {
        self.coef_slow * (self.rate_slow * t).exp() + self.coef_fast * (self.rate_fast * t).exp()
    }

    /// `x(t) - 1`, using that the two coefficients sum to one.
    pub fn deviation(&self, t: f64) -> Complex64 {
        self.coef_slow * exp_m1(self.rate_slow * t) + self.coef_fast * exp_m1(self.rate_fast * t)
    }

    /// `ln P(t)` evaluated in log space, safe far into the exponential tail.
    pub fn ln_survival(&self, t: f64) -> f64 {
        let d = self.deviation(t);
        if d.norm() <= 0.5 {
            return survival_minus_one(d).ln_1p();
        }
        let ratio = self.coef_slow + self.coef_fast * ((self.rate_fast - self.rate_slow) * t).exp();
        2.0 * (self.rate_slow.re * t + ratio.norm().ln())
    }
}

/// Evaluates the closed-form amplitude on a time grid.
pub fn survival_closed_form_lorentzian(lambda: f64, bandwidth: f64, omega_a: f64, times: &[f64]) -> Result<SurvivalSeries> {
    check_times(times)?;
    let model = LorentzianSurvival::new(lambda, bandwidth, omega_a)?;
    let amps = times.iter().map(|&t| 1.0 + model.deviation(t)).collect();
    Ok(SurvivalSeries::from_amplitudes(times.to_vec(), amps, Method::ClosedForm))
}

/// Only the exponential `√𝒵 e^{-iRe(E_pole)t - γ₀t/2}` part.
pub fn pole_approximation(pole: &PoleData, times: &[f64]) -> Result<SurvivalSeries> {
    check_times(times)?;
    let amps = times.iter().map(|&t| pole_term(pole, t)).collect();
    Ok(SurvivalSeries::from_amplitudes(times.to_vec(), amps, Method::PoleApprox))
}

pub(crate) fn pole_term(pole: &PoleData, t: f64) -> Complex64 {
    pole.z_renorm.sqrt() * Complex64::new(-0.5 * pole.gamma0 * t, -pole.e_pole.re * t).exp()
}

/// Products of `t` and bandwidth beyond which the spectral integral hands
/// over to the pole term plus bound states.
pub const POLE_MODE_THRESHOLD: f64 = 1e4;

/// From `t·Λ` of this size on, threshold families take their continuum part
/// along a ray below the branch point, where it decays instead of cancelling.
pub const RAY_START: f64 = 20.0;

const MAX_DENSITY_PANELS: usize = 100_000;
const DEGREE: usize = RULE_POINTS - 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Absolute accuracy target for `x(t)`.
    pub tolerance: f64,
    /// Tolerance for the nested principal-value integrals.
    pub shift_tolerance: Tolerance,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            shift_tolerance: Tolerance::default(),
        }
    }
}

/// Maps values at the Kronrod nodes to Legendre coefficients of the
/// interpolating polynomial.
fn legendre_inverse() -> &'static [[f64; RULE_POINTS]; RULE_POINTS] {
    static INV: OnceLock<[[f64; RULE_POINTS]; RULE_POINTS]> = OnceLock::new();
    INV.get_or_init(|| {
        let n = RULE_POINTS;
        let mut a = [[0.0; RULE_POINTS]; RULE_POINTS];
        for (k, node) in RULE.iter().enumerate() {
            a[k] = legendre_values(node.x);
        }
        let mut inv = [[0.0; RULE_POINTS]; RULE_POINTS];
        for (i, row) in inv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            inv.swap(col, piv);
            let d = a[col][col];
            for j in 0..n {
                a[col][j] /= d;
                inv[col][j] /= d;
            }
            for i in 0..n {
                if i != col {
                    let f = a[i][col];
                    if f != 0.0 {
                        for j in 0..n {
                            a[i][j] -= f * a[col][j];
                            inv[i][j] -= f * inv[col][j];
                        }
                    }
                }
            }
        }
        inv
    })
}

fn legendre_values(x: f64) -> [f64; RULE_POINTS] {
    let mut p = [0.0; RULE_POINTS];
    p[0] = 1.0;
    p[1] = x;
    for n in 1..DEGREE {
        p[n + 1] = ((2 * n + 1) as f64 * x * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
    }
    p
}

/// `sin θ/θ - 1` without cancellation.
fn sinc_m1(theta: f64) -> f64 {
    let s = theta * theta;
    if s < 1e-2 {
        s * (-1.0 / 6.0 + s * (1.0 / 120.0 + s * (-1.0 / 5040.0 + s / 362_880.0)))
    } else {
        theta.sin() / theta - 1.0
    }
}

/// Spherical Bessel functions `j_0..j_DEGREE` at `theta`.
pub(crate) fn spherical_bessel(theta: f64) -> [f64; RULE_POINTS] {
    let mut j = [0.0; RULE_POINTS];
    let x = theta.abs();
    if x == 0.0 {
        j[0] = 1.0;
        return j;
    }
    if x > 2.0 * DEGREE as f64 {
        // upward recurrence is stable above the turning point
        let (s, c) = x.sin_cos();
        j[0] = s / x;
        j[1] = s / (x * x) - c / x;
        for n in 1..DEGREE {
            j[n + 1] = (2 * n + 1) as f64 / x * j[n] - j[n - 1];
        }
    } else {
        // Miller's backward recurrence, normalised by Σ(2n+1)j_n² = 1
        let start = DEGREE + 40 + x as usize;
        let (mut next, mut cur) = (0.0, 1e-30);
        let mut norm = 0.0;
        for n in (0..=start).rev() {
            if n <= DEGREE {
                j[n] = cur;
            }
            norm += (2 * n + 1) as f64 * cur * cur;
            let prev = (2 * n + 1) as f64 / x * cur - next;
            next = cur;
            cur = prev;
            if cur.abs() > 1e150 {
                cur *= 1e-150;
                next *= 1e-150;
                norm *= 1e-300;
                j.iter_mut().for_each(|v| *v *= 1e-150);
            }
        }
        let mut scale = 1.0 / norm.sqrt();
        let reference = if x < 1.0 || x.sin().abs() > 0.1 { x.sin() / x } else { x.sin() / (x * x) - x.cos() / x };
        let idx = usize::from(!(x < 1.0 || x.sin().abs() > 0.1));
        if (reference < 0.0) != (j[idx] < 0.0) {
            scale = -scale;
        }
        j.iter_mut().for_each(|v| *v *= scale);
        j[0] = x.sin() / x;
    }
    if theta < 0.0 {
        j.iter_mut().skip(1).step_by(2).for_each(|v| *v = -*v);
    }
    j
}

/// Integrated weight of one frequency panel, held as Legendre coefficients.
#[derive(Debug, Clone)]
struct Panel {
    centre: f64,
    half: f64,
    coef: [f64; RULE_POINTS],
}

impl Panel {
    /// `∫ ρ (e^{-iωt} - 1) dω` over the panel.
    fn deviation(&self, t: f64) -> Complex64 {
        let theta = self.half * t;
        let j = spherical_bessel(theta);
        let mut s = Complex64::new(self.coef[0] * sinc_m1(theta), 0.0);
        let mut phase = Complex64::new(1.0, 0.0);
        for n in 1..RULE_POINTS {
            phase *= Complex64::new(0.0, -1.0);
            s += phase * (self.coef[n] * j[n]);
        }
        let full = s + self.coef[0];
        2.0 * self.half * (exp_m1(Complex64::new(0.0, -self.centre * t)) * full + s)
    }

    fn weight(&self) -> f64 {
        2.0 * self.half * self.coef[0]
    }
}

/// Continuum contribution rotated onto `ω = ω_g + r e^{-iφ}`:
/// `∫ g² G_I G_II e^{-iωt} dω`, plus the decay pole when the rotation
/// sweeps across it.
#[derive(Debug, Clone)]
struct Ray {
    ff: FormFactor,
    omega_a: f64,
    direction: Complex64,
    include_pole: bool,
    tol: Tolerance,
}

impl Ray {
    fn new(ff: &FormFactor, omega_a: f64, pole: &PoleData, tol: Tolerance) -> Self {
        let q = ff.shape_params()[1];
        // g² has poles at angle π/q below the real axis; stay clear of them
        let widest = (0.5 * PI / q).min(0.25 * PI);
        let rel = pole.e_pole - ff.threshold();
        let pole_angle = if rel.re > 0.0 { (-rel.im).atan2(rel.re) } else { PI };
        let angle = if pole_angle > 0.7 * widest && pole_angle < 1.3 * widest {
            0.5 * pole_angle
        } else {
            widest
        };
        Self {
            ff: ff.clone(),
            omega_a,
            direction: Complex64::from_polar(1.0, -angle),
            include_pole: pole_angle < angle,
            tol,
        }
    }

    fn background(&self, t: f64, scale: f64, abs: f64) -> Result<Complex64> {
        let w0 = self.ff.threshold();
        let failure = std::cell::RefCell::new(None);
        let integrand = |r: f64| -> Complex64 {
            let w = w0 + r * self.direction;
            let eval = || -> Result<Complex64> {
                let s1 = first_sheet_rotated(&self.ff, w, self.tol)?;
                let (g2, _) = self.ff.g2_complex(w)?;
                let s2 = s1 - 2.0 * PI * Complex64::i() * g2;
                let d = w - self.omega_a;
                Ok(g2 / ((d - s1) * (d - s2)) * (Complex64::new(0.0, -t) * w).exp() * self.direction)
            };
            eval().unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                Complex64::new(0.0, 0.0)
            })
        };
        let damping = t * -self.direction.im;
        let est = integrate_interval(integrand, 0.0, f64::INFINITY, &[], scale.min(1.0 / damping), Tolerance::new(abs, 1e-9));
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(est?.value)
    }
}

/// Spectral density `ρ(ω) = g²/[(ω - ω_a - Δ_R)² + π²g⁴]` on adaptive panels.
///
/// On each panel ρ is replaced by its degree-20 interpolant, whose Fourier
/// integral is exact, so the panel count does not grow with `t`.
#[derive(Debug)]
pub struct SpectralDensity {
    panels: Vec<Panel>,
    bound_states: Vec<BoundState>,
    pole: Option<PoleData>,
    bandwidth: f64,
    raw_continuum_weight: f64,
    tail_weight: f64,
    ray: Option<Ray>,
    warned: AtomicBool,
}

struct Pending {
    a: f64,
    b: f64,
    coef: [f64; RULE_POINTS],
    error: f64,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

impl SpectralDensity {
    pub fn build(ff: &FormFactor, omega_a: f64, opts: SpectralOptions) -> Result<Self> {
        if ff.lambda() == 0.0 {
            return Err(Error::NoDecay("zero coupling: the level is stationary".into()));
        }
        if !omega_a.is_finite() {
            return Err(Error::invalid("omega_a must be finite"));
        }
        if !(opts.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        let stol = opts.shift_tolerance;
        let bw = ff.bandwidth();
        let (lo, hi) = ff.support();
        let bound_states = detect_bound_states(ff, omega_a, stol)?;
        let pole = if ff.supports_continuation() && omega_a > lo && omega_a < hi {
            find_pole_with(ff, omega_a, stol).ok()
        } else {
            None
        };

        let rho = |w: f64| -> Result<f64> {
            let g2 = ff.g2(w);
            if g2 == 0.0 {
                return Ok(0.0);
            }
            let d = w - omega_a - real_shift_with(ff, w, stol)?;
            Ok(g2 / (d * d + PI * PI * g2 * g2))
        };

        let centre = pole.as_ref().map_or(omega_a, |p| p.e_pole.re);
        let width = pole
            .as_ref()
            .map_or(PI * ff.g2(omega_a), |p| 0.5 * p.gamma0)
            .max(1e-12 * bw);

        // finite window outside which ρ carries less than a quarter of the budget
        let peak = ff.peak();
        let tail_budget = 0.25 * opts.tolerance;
        let mut reach = 8.0 * bw;
        let (mut left, mut right, mut tail_weight);
        loop {
            left = lo.max(centre.min(peak) - reach);
            right = hi.min(centre.max(peak) + reach);
            tail_weight = tail_mass(&rho, lo, left, bw)? + tail_mass(&rho, right, hi, bw)?;
            if tail_weight <= tail_budget {
                break;
            }
            reach *= 2.0;
            if reach > 1e9 * bw {
                return Err(Error::Tolerance {
                    estimate: tail_weight,
                    achieved: tail_weight,
                    requested: tail_budget,
                });
            }
        }

        let mut cuts = vec![left, right, omega_a, centre, peak];
        for k in [1.0, 4.0, 16.0, 64.0, 256.0, 1024.0] {
            cuts.push(centre - k * width);
            cuts.push(centre + k * width);
        }
        cuts.extend(ff.break_points());
        cuts.retain(|c| c.is_finite() && *c >= left && *c <= right);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let inv = legendre_inverse();
        let eval = |a: f64, b: f64| -> Result<Pending> {
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            let mut vals = [0.0; RULE_POINTS];
            for (k, node) in RULE.iter().enumerate() {
                vals[k] = rho(c + h * node.x)?;
            }
            let mut coef = [0.0; RULE_POINTS];
            for (n, row) in inv.iter().enumerate() {
                coef[n] = row.iter().zip(&vals).map(|(m, v)| m * v).sum();
            }
            let (mut kron, mut gauss, mut res_abs) = (0.0, 0.0, 0.0);
            for (k, node) in RULE.iter().enumerate() {
                kron += node.kronrod * vals[k];
                gauss += node.gauss * vals[k];
                res_abs += node.kronrod * vals[k].abs();
            }
            let mean = 0.5 * kron;
            let res_asc: f64 = RULE.iter().zip(&vals).map(|(n, v)| n.kronrod * (v - mean).abs()).sum();
            let static_err = rescale_error((kron - gauss).abs() * h, res_abs * h, res_asc * h);
            // ∫|ρ - p| bounds the error of every Fourier integral at once
            let spectral_err = 2.0 * h * coef[DEGREE - 2..].iter().map(|v| v.abs()).sum::<f64>();
            Ok(Pending {
                a,
                b,
                coef,
                error: static_err.max(spectral_err),
            })
        };

        let mut heap = BinaryHeap::new();
        let mut frozen = Vec::new();
        for w in cuts.windows(2) {
            heap.push(eval(w[0], w[1])?);
        }
        let budget = 0.5 * opts.tolerance;
        let mut total_error: f64 = heap.iter().map(|p| p.error).sum();
        let mut count = heap.len();
        while total_error > budget {
            if count >= MAX_DENSITY_PANELS {
                return Err(Error::Tolerance {
                    estimate: 1.0,
                    achieved: total_error,
                    requested: budget,
                });
            }
            let Some(worst) = heap.pop() else { break };
            let mid = 0.5 * (worst.a + worst.b);
            if !(mid > worst.a && mid < worst.b) {
                total_error -= worst.error;
                frozen.push(worst);
                continue;
            }
            let p1 = eval(worst.a, mid)?;
            let p2 = eval(mid, worst.b)?;
            total_error += p1.error + p2.error - worst.error;
            heap.push(p1);
            heap.push(p2);
            count += 1;
            if count % 256 == 0 {
                total_error = heap.iter().chain(frozen.iter()).map(|p| p.error).sum();
            }
        }
        let mut pending = heap.into_vec();
        pending.extend(frozen);
        let achieved: f64 = pending.iter().map(|p| p.error).sum();
        if achieved > budget {
            return Err(Error::Tolerance {
                estimate: 1.0,
                achieved,
                requested: budget,
            });
        }
        pending.sort_by(|p, q| p.a.total_cmp(&q.a));
        let mut panels: Vec<Panel> = pending
            .into_iter()
            .map(|p| Panel {
                centre: 0.5 * (p.a + p.b),
                half: 0.5 * (p.b - p.a),
                coef: p.coef,
            })
            .collect();

        let continuum: f64 = panels.iter().map(Panel::weight).sum();
        let bound: f64 = bound_states.iter().map(|b| b.weight).sum();
        let total = continuum + bound + tail_weight;
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Consistency(format!(
                "spectral weights sum to {total} (continuum {continuum}, bound {bound}); completeness violated"
            )));
        }
        // completeness fixes the total exactly; absorb the quadrature residue
        let scale = (1.0 - bound) / continuum;
        for p in &mut panels {
            p.coef.iter_mut().for_each(|c| *c *= scale);
        }

        let ray = match &pole {
            Some(p) if ff.family() == Family::ThresholdPowerLaw && ff.supports_continuation() => Some(Ray::new(ff, omega_a, p, stol)),
            _ => None,
        };
        let mut density = Self {
            panels,
            bound_states,
            pole,
            bandwidth: bw,
            raw_continuum_weight: continuum,
            tail_weight,
            ray,
            warned: AtomicBool::new(false),
        };
        // both routes must agree where they meet; otherwise the rotation
        // crossed a singularity it does not account for
        if density.ray.is_some() {
            let t0 = RAY_START / bw;
            let direct = 1.0 + density.real_axis_deviation(t0);
            match density.ray_amplitude(t0) {
                Ok(x) if (x - direct).norm() <= 1e-3 * opts.tolerance.sqrt() => {}
                Ok(x) => {
                    log::warn!(
                        "rotated continuum disagrees with the real-axis integral at t = {t0} by {:.2e}; staying on the real axis",
                        (x - direct).norm()
                    );
                    density.ray = None;
                }
                Err(e) => {
                    log::warn!("rotated continuum unavailable ({e}); staying on the real axis");
                    density.ray = None;
                }
            }
        }
        Ok(density)
    }

    pub fn bound_states(&self) -> &[BoundState] {
        &self.bound_states
    }

    pub fn pole(&self) -> Option<&PoleData> {
        self.pole.as_ref()
    }

    /// `∫ ρ dω` before normalisation.
    pub fn continuum_weight(&self) -> f64 {
        self.raw_continuum_weight
    }

    /// Weight dropped outside the integration window.
    pub fn tail_weight(&self) -> f64 {
        self.tail_weight
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    /// Whether the rotated-continuum route is active.
    pub fn uses_ray(&self) -> bool {
        self.ray.is_some()
    }

    fn pole_mode(&self, t: f64) -> bool {
        t.abs() * self.bandwidth > POLE_MODE_THRESHOLD
    }

    fn ray_mode(&self, t: f64) -> bool {
        self.ray.is_some() && t.abs() * self.bandwidth >= RAY_START
    }

    fn warn_long_time(&self, t: f64) {
        if self.pole_mode(t) && !self.warned.swap(true, AtomicOrdering::Relaxed) {
            log::warn!(
                "t·Λ = {:.3e} exceeds {POLE_MODE_THRESHOLD:e}: evaluating as decay pole plus correction",
                t.abs() * self.bandwidth
            );
        }
    }

    fn bound_terms(&self, t: f64) -> Complex64 {
        self.bound_states
            .iter()
            .map(|b| b.weight * Complex64::new(0.0, -b.energy * t).exp())
            .sum()
    }

    fn pole_plus_bound(&self, t: f64) -> Result<Complex64> {
        let Some(pole) = &self.pole else {
            return Err(Error::ContinuationUnsupported(
                "long-time evaluation needs the decay pole".into(),
            ));
        };
        self.warn_long_time(t);
        Ok(pole.residue * (Complex64::new(0.0, -t) * pole.e_pole).exp() + self.bound_terms(t))
    }

    fn ray_amplitude(&self, t: f64) -> Result<Complex64> {
        let (ray, pole) = match (&self.ray, &self.pole) {
            (Some(r), Some(p)) => (r, p),
            _ => return Err(Error::Consistency("rotated continuum requested without a pole".into())),
        };
        if t < 0.0 {
            return self.ray_amplitude(-t).map(|x| x.conj());
        }
        self.warn_long_time(t);
        let pole_part = if ray.include_pole {
            pole.residue * (Complex64::new(0.0, -t) * pole.e_pole).exp()
        } else {
            Complex64::new(0.0, 0.0)
        };
        let floor = 1e-12 * pole_part.norm().max(1e-290);
        Ok(pole_part + ray.background(t, 1.0 / self.bandwidth, floor)? + self.bound_terms(t))
    }

    fn real_axis_deviation(&self, t: f64) -> Complex64 {
        let mut d = Complex64::new(0.0, 0.0);
        for p in &self.panels {
            d += p.deviation(t);
        }
        for b in &self.bound_states {
            d += b.weight * exp_m1(Complex64::new(0.0, -b.energy * t));
        }
        d
    }

    pub fn amplitude(&self, t: f64) -> Result<Complex64> {
        if !t.is_finite() {
            return Err(Error::invalid("time must be finite"));
        }
        if self.ray_mode(t) {
            return self.ray_amplitude(t);
        }
        if self.pole_mode(t) {
            return self.pole_plus_bound(t);
        }
        Ok(1.0 + self.real_axis_deviation(t))
    }

    /// `x(t) - 1`, accumulated panel by panel so small times keep full
    /// relative accuracy.
    pub fn deviation(&self, t: f64) -> Result<Complex64> {
        if !t.is_finite() {
            return Err(Error::invalid("time must be finite"));
        }
        if self.ray_mode(t) || self.pole_mode(t) {
            return Ok(self.amplitude(t)? - 1.0);
        }
        Ok(self.real_axis_deviation(t))
    }
}

fn tail_mass<F>(rho: &F, from: f64, to: f64, scale: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if from >= to {
        return Ok(0.0);
    }
    let failure = std::cell::RefCell::new(None);
    let est = integrate_interval(
        |w| match rho(w) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        from,
        to,
        &[],
        scale,
        Tolerance::new(1e-14, 1e-6),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

/// Survival series from the spectral integral on a time grid.
pub fn survival_spectral_integral(ff: &FormFactor, omega_a: f64, times: &[f64]) -> Result<SurvivalSeries> {
    survival_spectral_integral_with(ff, omega_a, times, SpectralOptions::default())
}

pub fn survival_spectral_integral_with(ff: &FormFactor, omega_a: f64, times: &[f64], opts: SpectralOptions) -> Result<SurvivalSeries> {
    check_times(times)?;
    let density = SpectralDensity::build(ff, omega_a, opts)?;
    let amps = times
        .par_iter()
        .map(|&t| density.amplitude(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurvivalSeries::from_amplitudes(times.to_vec(), amps, Method::SpectralIntegral))
}
