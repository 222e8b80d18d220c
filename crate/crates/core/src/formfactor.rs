//! Coupling families `g(ω)` between the discrete level and the continuum.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_interval, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Lorentzian,
    ThresholdPowerLaw,
    Tabulated,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Lorentzian => "lorentzian",
            Family::ThresholdPowerLaw => "threshold_power_law",
            Family::Tabulated => "tabulated",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Lorentzian,
    PowerLaw { p: f64, q: f64, norm: f64 },
    Table { omega: Vec<f64>, g2: Vec<f64> },
}

/// Exponents `p` for which `(E - ω_g)^p` is continued to the second sheet.
const CONTINUABLE_EXPONENTS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

/// A form factor: squared coupling `g²(ω)` with its support.
///
/// Immutable once built; every query is a pure function.
#[derive(Debug, Clone, PartialEq)]
pub struct FormFactor {
    lambda: f64,
    bandwidth: f64,
    threshold: f64,
    shape: Shape,
}

/// Result of solving `g²(ω̄)·Λ = 1/τ_Z²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandwidthCoupling {
    pub omega_bar: f64,
    pub g2_bar: f64,
    /// `false` when the relation has no solution in the support and
    /// `omega_bar` fell back to the peak of `g²`.
    pub exact: bool,
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

impl FormFactor {
    /// `g²(ω) = (λ²/π)·Λ/(ω² + Λ²)` on the whole real line.
    pub fn lorentzian(lambda: f64, bandwidth: f64) -> Result<Self> {
        check_finite("lambda", lambda)?;
        check_finite("bandwidth", bandwidth)?;
        if lambda < 0.0 {
            return Err(Error::invalid("lambda must be non-negative"));
        }
        if bandwidth <= 0.0 {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        Ok(Self {
            lambda,
            bandwidth,
            threshold: f64::NEG_INFINITY,
            shape: Shape::Lorentzian,
        })
    }

    /// `g²(ω) = λ²·N·x^p / (1 + (x/Λ)^q)` with `x = ω - ω_g > 0`, zero below
    /// threshold. `N` normalises `∫ g² = λ²`, so `τ_Z = 1/λ` as for the
    /// Lorentzian.
    pub fn threshold_power_law(lambda: f64, bandwidth: f64, threshold: f64, p: f64, q: f64) -> Result<Self> {
        for (n, v) in [("lambda", lambda), ("bandwidth", bandwidth), ("threshold", threshold), ("p", p), ("q", q)] {
            check_finite(n, v)?;
        }
        if lambda < 0.0 {
            return Err(Error::invalid("lambda must be non-negative"));
        }
        if bandwidth <= 0.0 {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        if p <= 0.0 {
            return Err(Error::invalid("exponent p must be positive"));
        }
        if q - p <= 1.0 {
            return Err(Error::invalid("exponents must satisfy q - p > 1 for an integrable form factor"));
        }
        // ∫_0^∞ y^p/(1+y^q) dy = (π/q) / sin(π(p+1)/q)
        let norm = q * (PI * (p + 1.0) / q).sin() / (PI * bandwidth.powf(p + 1.0));
        Ok(Self {
            lambda,
            bandwidth,
            threshold,
            shape: Shape::PowerLaw { p, q, norm },
        })
    }

    /// Piecewise-linear `g²` through `(ω, g²)` samples, zero outside the
    /// sampled range. `λ` is derived as `(∫ g²)^{1/2}`.
    pub fn tabulated(bandwidth: f64, samples: &[(f64, f64)]) -> Result<Self> {
        check_finite("bandwidth", bandwidth)?;
        if bandwidth <= 0.0 {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        if samples.len() < 2 {
            return Err(Error::invalid("a tabulated form factor needs at least two samples"));
        }
        let mut omega = Vec::with_capacity(samples.len());
        let mut g2 = Vec::with_capacity(samples.len());
        for &(w, v) in samples {
            check_finite("table omega", w)?;
            check_finite("table g2", v)?;
            if v < 0.0 {
                return Err(Error::invalid(format!("negative g2 sample {v} at omega {w}")));
            }
            if let Some(&prev) = omega.last() {
                if w <= prev {
                    return Err(Error::invalid("table frequencies must be strictly increasing"));
                }
            }
            omega.push(w);
            g2.push(v);
        }
        let integral: f64 = omega.windows(2).zip(g2.windows(2)).map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] + v[1])).sum();
        Ok(Self {
            lambda: integral.sqrt(),
            bandwidth,
            threshold: omega[0],
            shape: Shape::Table { omega, g2 },
        })
    }

    pub fn family(&self) -> Family {
        match self.shape {
            Shape::Lorentzian => Family::Lorentzian,
            Shape::PowerLaw { .. } => Family::ThresholdPowerLaw,
            Shape::Table { .. } => Family::Tabulated,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Ground energy of the continuum; `-∞` for the Lorentzian.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `[p, q]` for the power-law family, empty otherwise.
    pub fn shape_params(&self) -> Vec<f64> {
        match self.shape {
            Shape::PowerLaw { p, q, .. } => vec![p, q],
            _ => Vec::new(),
        }
    }

    pub fn table(&self) -> Option<(&[f64], &[f64])> {
        match &self.shape {
            Shape::Table { omega, g2 } => Some((omega, g2)),
            _ => None,
        }
    }

    /// Closed interval carrying the continuum.
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Lorentzian => (f64::NEG_INFINITY, f64::INFINITY),
            Shape::PowerLaw { .. } => (self.threshold, f64::INFINITY),
            Shape::Table { omega, .. } => (omega[0], omega[omega.len() - 1]),
        }
    }

    pub fn in_support(&self, omega: f64) -> bool {
        let (lo, hi) = self.support();
        omega >= lo && omega <= hi
    }

    /// Same family with the coupling rescaled to `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_finite("lambda", lambda)?;
        if lambda < 0.0 {
            return Err(Error::invalid("lambda must be non-negative"));
        }
        let mut out = self.clone();
        if let Shape::Table { g2, .. } = &mut out.shape {
            if self.lambda == 0.0 {
                return Err(Error::invalid("cannot rescale an all-zero table"));
            }
            let s = (lambda / self.lambda).powi(2);
            g2.iter_mut().for_each(|v| *v *= s);
        }
        out.lambda = lambda;
        Ok(out)
    }

    /// `g²(ω)`. Tabulated form factors refuse queries outside their table.
    pub fn coupling_strength_squared(&self, omega: f64) -> Result<f64> {
        if let Shape::Table { omega: w, .. } = &self.shape {
            if omega < w[0] || omega > w[w.len() - 1] {
                return Err(Error::OutOfRange {
                    omega,
                    lo: w[0],
                    hi: w[w.len() - 1],
                });
            }
        }
        Ok(self.g2(omega))
    }

    /// `(p, q, λ²N)` of a threshold power law.
    pub(crate) fn power_law_parts(&self) -> Option<(f64, f64, f64)> {
        match self.shape {
            Shape::PowerLaw { p, q, norm } => Some((p, q, self.lambda * self.lambda * norm)),
            _ => None,
        }
    }

    /// `g²(ω)` with zero extrapolation outside the support.
    pub(crate) fn g2(&self, omega: f64) -> f64 {
        let l2 = self.lambda * self.lambda;
        match &self.shape {
            Shape::Lorentzian => l2 / PI * self.bandwidth / (omega * omega + self.bandwidth * self.bandwidth),
            Shape::PowerLaw { p, q, norm } => {
                let x = omega - self.threshold;
                if x <= 0.0 {
                    0.0
                } else {
                    l2 * norm * x.powf(*p) / (1.0 + (x / self.bandwidth).powf(*q))
                }
            }
            Shape::Table { omega: w, g2 } => table_value(w, g2, omega),
        }
    }

    /// Real derivative of `g²`; one-sided (right) at table nodes.
    pub(crate) fn g2_derivative(&self, omega: f64) -> f64 {
        let l2 = self.lambda * self.lambda;
        match &self.shape {
            Shape::Lorentzian => {
                let d = omega * omega + self.bandwidth * self.bandwidth;
                -2.0 * omega * l2 / PI * self.bandwidth / (d * d)
            }
            Shape::PowerLaw { p, q, norm } => {
                let x = omega - self.threshold;
                if x <= 0.0 {
                    return 0.0;
                }
                let r = (x / self.bandwidth).powf(*q);
                l2 * norm * x.powf(p - 1.0) * (p * (1.0 + r) - q * r) / ((1.0 + r) * (1.0 + r))
            }
            Shape::Table { omega: w, g2 } => {
                if omega < w[0] || omega >= w[w.len() - 1] {
                    return 0.0;
                }
                let k = w.partition_point(|&x| x <= omega) - 1;
                (g2[k + 1] - g2[k]) / (w[k + 1] - w[k])
            }
        }
    }

    pub fn supports_continuation(&self) -> bool {
        match self.shape {
            Shape::Lorentzian => true,
            Shape::PowerLaw { p, .. } => CONTINUABLE_EXPONENTS.contains(&p),
            Shape::Table { .. } => false,
        }
    }

    fn continuation_error(&self) -> Error {
        match self.shape {
            Shape::PowerLaw { p, .. } => Error::ContinuationUnsupported(format!("not implemented for threshold_power_law with p = {p}")),
            _ => Error::ContinuationUnsupported(format!("not available for the {} family", self.family())),
        }
    }

    /// Analytic continuation of `g²` to complex energies, with its derivative.
    pub(crate) fn g2_complex(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        if !self.supports_continuation() {
            return Err(self.continuation_error());
        }
        let l2 = self.lambda * self.lambda;
        match &self.shape {
            Shape::Lorentzian => {
                let b = self.bandwidth;
                let d = z * z + b * b;
                let c = l2 / PI * b;
                Ok((c / d, -2.0 * c * z / (d * d)))
            }
            Shape::PowerLaw { p, q, norm } => {
                let zeta = z - self.threshold;
                if zeta.norm() == 0.0 {
                    return Ok((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
                }
                // principal branch: the cut sits below threshold, off the continuum
                let root = zeta.sqrt();
                let zp = match *p {
                    x if x == 0.5 => root,
                    x if x == 1.0 => zeta,
                    x if x == 1.5 => zeta * root,
                    _ => zeta * zeta,
                };
                let s = zeta / self.bandwidth;
                let r = if q.fract() == 0.0 && q.abs() < 64.0 { s.powi(*q as i32) } else { s.powf(*q) };
                let one = 1.0 + r;
                let value = l2 * norm * zp / one;
                let deriv = l2 * norm * (zp / zeta) * (p * one - q * r) / (one * one);
                Ok((value, deriv))
            }
            Shape::Table { .. } => Err(self.continuation_error()),
        }
    }

    /// Energy at which `g²` peaks.
    pub fn peak(&self) -> f64 {
        match &self.shape {
            Shape::Lorentzian => 0.0,
            Shape::PowerLaw { p, q, .. } => self.threshold + self.bandwidth * (p / (q - p)).powf(1.0 / q),
            Shape::Table { omega, g2 } => {
                let k = g2
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k)
                    .unwrap_or(0);
                omega[k]
            }
        }
    }

    /// Natural break points for integrals of `g²`-weighted functions.
    pub(crate) fn break_points(&self) -> Vec<f64> {
        let b = self.bandwidth;
        match &self.shape {
            Shape::Lorentzian => vec![-b, 0.0, b],
            Shape::PowerLaw { .. } => {
                let g = self.threshold;
                vec![g + 0.25 * b, self.peak(), g + b, g + 2.0 * b, g + 4.0 * b]
            }
            Shape::Table { omega, .. } => {
                if omega.len() <= 512 {
                    omega.clone()
                } else {
                    let step = omega.len() / 256;
                    omega.iter().step_by(step).copied().collect()
                }
            }
        }
    }

    /// `∫ g²(ω) dω`.
    pub fn total_weight(&self) -> Result<f64> {
        let l2 = self.lambda * self.lambda;
        match &self.shape {
            Shape::Lorentzian => Ok(l2),
            Shape::Table { .. } => Ok(l2),
            Shape::PowerLaw { .. } => {
                if l2 == 0.0 {
                    return Ok(0.0);
                }
                let (lo, hi) = self.support();
                let est = integrate_interval(|w| self.g2(w), lo, hi, &self.break_points(), self.bandwidth, Tolerance::default())?;
                Ok(est.value)
            }
        }
    }

    /// `τ_Z = (∫ g²)^{-1/2}`.
    pub fn zeno_time(&self) -> Result<f64> {
        if self.lambda == 0.0 {
            return Err(Error::InfiniteZenoTime);
        }
        match self.shape {
            Shape::Lorentzian => Ok(1.0 / self.lambda),
            _ => {
                let w = self.total_weight()?;
                if w <= 0.0 {
                    return Err(Error::InfiniteZenoTime);
                }
                Ok(w.powf(-0.5))
            }
        }
    }

    /// Solves `g²(ω̄)·Λ = 1/τ_Z²`, taking the root closest to the peak.
    pub fn effective_bandwidth_coupling(&self) -> Result<BandwidthCoupling> {
        if self.lambda == 0.0 {
            return Err(Error::NoDecay("zero coupling has no effective bandwidth".into()));
        }
        let tz = self.zeno_time()?;
        let target = 1.0 / (tz * tz * self.bandwidth);
        let peak = self.peak();
        let top = self.g2(peak);
        if top < target {
            return Ok(BandwidthCoupling {
                omega_bar: peak,
                g2_bar: top,
                exact: false,
            });
        }
        let f = |w: f64| self.g2(w) - target;
        let (lo, hi) = self.support();
        let step = self.bandwidth / 64.0;
        let mut best: Option<f64> = None;
        for dir in [-1.0, 1.0] {
            let mut inner = peak;
            let mut k = 1.0;
            let mut root = None;
            while k < 64.0 * 1e6 {
                let mut outer = peak + dir * step * k;
                if outer < lo {
                    outer = lo;
                }
                if outer > hi {
                    outer = hi;
                }
                if f(outer) < 0.0 {
                    root = Some(bisect(f, inner, outer));
                    break;
                }
                if outer == lo || outer == hi {
                    break;
                }
                inner = outer;
                k += 1.0;
            }
            if let Some(r) = root {
                if best.is_none_or(|b| (r - peak).abs() < (b - peak).abs()) {
                    best = Some(r);
                }
            }
        }
        match best {
            Some(w) => Ok(BandwidthCoupling {
                omega_bar: w,
                g2_bar: self.g2(w),
                exact: true,
            }),
            None => Ok(BandwidthCoupling {
                omega_bar: peak,
                g2_bar: top,
                exact: false,
            }),
        }
    }
}

fn table_value(w: &[f64], g2: &[f64], omega: f64) -> f64 {
    let n = w.len();
    if omega < w[0] || omega > w[n - 1] {
        return 0.0;
    }
    if omega == w[n - 1] {
        return g2[n - 1];
    }
    let k = w.partition_point(|&x| x <= omega) - 1;
    let t = (omega - w[k]) / (w[k + 1] - w[k]);
    g2[k] + t * (g2[k + 1] - g2[k])
}

/// Bisection on a sign change between `a` and `b` (either orientation).
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a, b);
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
