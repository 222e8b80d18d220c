//! Self-energy `Σ(E) = ∫ g²(ω)/(E - ω) dω` on both sheets.
//!
//! Lorentzian: closed form. Tabulated: exact piecewise-linear integrals.
//! Power-law: adaptive quadrature with the near-axis singularity
//! subtracted over a window around `Re E`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formfactor::{Family, FormFactor};
use crate::quadrature::{integrate, segments, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sheet {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfEnergyValue {
    pub value: Complex64,
    pub derivative: Complex64,
    pub sheet: Sheet,
}

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Minimum distance from the support for a first-sheet query.
pub const CUT_DISTANCE: f64 = 1e-12;

pub fn self_energy(ff: &FormFactor, e: Complex64, sheet: Sheet) -> Result<SelfEnergyValue> {
    self_energy_with(ff, e, sheet, Tolerance::default())
}

pub fn self_energy_with(ff: &FormFactor, e: Complex64, sheet: Sheet, tol: Tolerance) -> Result<SelfEnergyValue> {
    if !(e.re.is_finite() && e.im.is_finite()) {
        return Err(Error::invalid(format!("energy must be finite, got {e}")));
    }
    if ff.lambda() == 0.0 {
        return Ok(SelfEnergyValue {
            value: ZERO,
            derivative: ZERO,
            sheet,
        });
    }
    let (value, derivative) = match sheet {
        Sheet::First => first_sheet(ff, e, tol)?,
        Sheet::Second => second_sheet(ff, e, tol)?,
    };
    Ok(SelfEnergyValue { value, derivative, sheet })
}

fn on_cut(ff: &FormFactor, e: Complex64) -> bool {
    let (lo, hi) = ff.support();
    e.im.abs() < CUT_DISTANCE && e.re >= lo - CUT_DISTANCE && e.re <= hi + CUT_DISTANCE
}

fn first_sheet(ff: &FormFactor, e: Complex64, tol: Tolerance) -> Result<(Complex64, Complex64)> {
    if on_cut(ff, e) {
        return Err(Error::OnCut { re: e.re, im: e.im });
    }
    let l2 = ff.lambda() * ff.lambda();
    match ff.family() {
        Family::Lorentzian => {
            // pole of the first-sheet function sits on the far side of the axis
            let shifted = if e.im > 0.0 { e + I * ff.bandwidth() } else { e - I * ff.bandwidth() };
            Ok((l2 / shifted, -l2 / (shifted * shifted)))
        }
        Family::Tabulated => {
            let (w, g) = ff.table().expect("tabulated form factor carries a table");
            table_cauchy(w, g, e, false)
        }
        Family::ThresholdPowerLaw if ff.supports_continuation() && e.im != 0.0 => {
            let v = match power_law_residues(ff, e) {
                Some(v) => v,
                None => rotated_cauchy(ff, e, 1, tol)?,
            };
            Ok((v, -rotated_cauchy(ff, e, 2, tol)?))
        }
        Family::ThresholdPowerLaw => {
            let v = cauchy(ff, e, 1, false, tol)?;
            let d = cauchy(ff, e, 2, false, tol)?;
            Ok((v, -d))
        }
    }
}

/// First-sheet `Σ(E)` of a threshold power law with integer `q` and
/// half-integer or integer `p`, summed over residues of a keyhole contour
/// around the positive axis (arguments taken in `(0, 2π)`).
///
/// With `R(z) = 1/[(1 + (z/Λ)^q)(ζ - z)]` the poles of the first factor sit
/// at `z_k = Λe^{iπ(2k+1)/q}` with residue `-z_k/q`, and `ζ` contributes
/// `-1/(1 + (ζ/Λ)^q)`.
pub(crate) fn power_law_residues(ff: &FormFactor, e: Complex64) -> Option<Complex64> {
    let (p, q, scale) = ff.power_law_parts()?;
    let zeta = e - ff.threshold();
    // real E is fine below the threshold, where the keyhole does not reach
    if q.fract() != 0.0 || q > 64.0 || (e.im == 0.0 && zeta.re >= 0.0) {
        return None;
    }
    let n = q as i32;
    let bw = ff.bandwidth();
    let two_pi = 2.0 * PI;
    let arg = |z: Complex64| {
        let a = z.im.atan2(z.re);
        if a <= 0.0 {
            a + two_pi
        } else {
            a
        }
    };
    let integer = p.fract() == 0.0;
    let weight = |z: Complex64| {
        let (r, a) = (z.norm(), arg(z));
        let zp = Complex64::from_polar(r.powf(p), p * a);
        if integer {
            zp * Complex64::new(r.ln(), a)
        } else {
            zp
        }
    };
    let mut sum = -weight(zeta) / (1.0 + (zeta / bw).powi(n));
    for k in 0..n {
        let zk = Complex64::from_polar(bw, PI * (2 * k + 1) as f64 / q);
        sum += weight(zk) * (-zk / q) / (zeta - zk);
    }
    let integral = if integer {
        -sum
    } else {
        two_pi * I / (1.0 - Complex64::from_polar(1.0, two_pi * p)) * sum
    };
    Some(scale * integral)
}

/// First-sheet `Σ(E)` without the derivative; closed form where available.
pub(crate) fn first_sheet_rotated(ff: &FormFactor, e: Complex64, tol: Tolerance) -> Result<Complex64> {
    if ff.family() != Family::ThresholdPowerLaw || !ff.supports_continuation() {
        return Ok(first_sheet(ff, e, tol)?.0);
    }
    if let Some(v) = power_law_residues(ff, e) {
        return Ok(v);
    }
    rotated_cauchy(ff, e, 1, tol)
}

/// `∫ g²(ω)/(E - ω)^order dω` for a continuable power law, with the path
/// turned away from `E` by `ψ`: `∫ g²(ω_g + s e^{∓iψ}) e^{∓iψ}/(E - ω_g - s e^{∓iψ})^order ds`.
///
/// The rotation stays inside the wedge where `g²` is analytic, so the value
/// is unchanged while the integrand stays bounded even as `E` nears the cut.
fn rotated_cauchy(ff: &FormFactor, e: Complex64, order: i32, tol: Tolerance) -> Result<Complex64> {
    if e.im == 0.0 {
        return Err(Error::invalid("rotated self-energy needs Im E != 0"));
    }
    // integrate the unit-coupling shape so the result scales exactly with λ²
    let l2 = ff.lambda() * ff.lambda();
    let unit = ff.with_lambda(1.0)?;
    let q = ff.shape_params()[1];
    let psi = (0.5 * PI / q).min(0.25 * PI);
    let dir = Complex64::from_polar(1.0, if e.im < 0.0 { psi } else { -psi });
    let w0 = ff.threshold();
    let zeta = e - w0;
    let failure = std::cell::RefCell::new(None);
    let integrand = |s: f64| -> Complex64 {
        let x = s * dir;
        match unit.g2_complex(w0 + x) {
            Ok((g2, _)) => g2 * dir / (zeta - x).powi(order),
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                ZERO
            }
        }
    };
    let bw = ff.bandwidth();
    let est = integrate(integrand, &segments(0.0, f64::INFINITY, &[zeta.norm(), bw], bw), tol);
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    Ok(l2 * est?.value)
}

fn second_sheet(ff: &FormFactor, e: Complex64, tol: Tolerance) -> Result<(Complex64, Complex64)> {
    if ff.family() == Family::Lorentzian {
        let l2 = ff.lambda() * ff.lambda();
        let shifted = e + I * ff.bandwidth();
        if shifted.norm() == 0.0 {
            return Err(Error::Degenerate("second-sheet self-energy has a pole at E = -iΛ".into()));
        }
        return Ok((l2 / shifted, -l2 / (shifted * shifted)));
    }
    if !ff.supports_continuation() {
        // reuse the family-specific message
        ff.g2_complex(e)?;
    }
    if e.im > 0.0 {
        return first_sheet(ff, e, tol);
    }
    if on_cut(ff, e) {
        return Err(Error::OnCut { re: e.re, im: e.im });
    }
    let (s, ds) = first_sheet(ff, e, tol)?;
    if e.im == 0.0 {
        // real axis outside the support: the continuation through the cut
        // is only defined for the lower half plane
        return Err(Error::invalid("second-sheet queries need Im E < 0 off the support"));
    }
    let (g2, dg2) = ff.g2_complex(e)?;
    Ok((s - 2.0 * PI * I * g2, ds - 2.0 * PI * I * dg2))
}

/// Principal-value shift `Δ_R(ω) = PV ∫ g²(ω')/(ω - ω') dω'`.
pub fn real_shift(ff: &FormFactor, omega: f64) -> Result<f64> {
    real_shift_with(ff, omega, Tolerance::default())
}

pub fn real_shift_with(ff: &FormFactor, omega: f64, tol: Tolerance) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::invalid("omega must be finite"));
    }
    if ff.lambda() == 0.0 {
        return Ok(0.0);
    }
    let l2 = ff.lambda() * ff.lambda();
    match ff.family() {
        Family::Lorentzian => {
            let b = ff.bandwidth();
            Ok(l2 * omega / (omega * omega + b * b))
        }
        Family::Tabulated => {
            let (w, g) = ff.table().expect("tabulated form factor carries a table");
            Ok(table_cauchy(w, g, Complex64::new(omega, 0.0), true)?.0.re)
        }
        Family::ThresholdPowerLaw => Ok(cauchy(ff, Complex64::new(omega, 0.0), 1, true, tol)?.re),
    }
}

/// `Σ_I(E)` and `Σ_I'(E)` for real `E` outside the open support, without
/// the cut-distance guard. Used for bound-state searches right at the edge.
pub(crate) fn first_sheet_real(ff: &FormFactor, e: f64, with_derivative: bool, tol: Tolerance) -> Result<(f64, f64)> {
    let l2 = ff.lambda() * ff.lambda();
    if l2 == 0.0 {
        return Ok((0.0, 0.0));
    }
    let z = Complex64::new(e, 0.0);
    match ff.family() {
        Family::Lorentzian => Err(Error::OnCut { re: e, im: 0.0 }),
        Family::Tabulated => {
            let (w, g) = ff.table().expect("tabulated form factor carries a table");
            let (v, d) = table_cauchy(w, g, z, true)?;
            Ok((v.re, d.re))
        }
        Family::ThresholdPowerLaw => {
            let v = match (ff.power_law_parts(), e - ff.threshold()) {
                // ∫ s^{p-1}/(1 + (s/Λ)^q) ds = Λ^p (π/q)/sin(πp/q)
                (Some((p, q, scale)), zeta) if zeta == 0.0 && p > 0.0 => {
                    -scale * ff.bandwidth().powf(p) * (PI / q) / (PI * p / q).sin()
                }
                (_, zeta) if zeta < 0.0 => match power_law_residues(ff, z) {
                    Some(v) => v.re,
                    None => cauchy(ff, z, 1, true, tol)?.re,
                },
                _ => cauchy(ff, z, 1, true, tol)?.re,
            };
            let d = if with_derivative { -cauchy(ff, z, 2, true, tol)?.re } else { 0.0 };
            Ok((v, d))
        }
    }
}

/// `∫ g²(ω)/(E - ω)^order dω` by quadrature, `order ∈ {1, 2}`.
///
/// Within `[c - h, c + h]`, `c = Re E`, the Taylor part of `g²` at `c` is
/// subtracted and integrated in closed form. With `pv` the energy is real
/// and the logarithms are taken on `|E - ω|`.
fn cauchy(ff: &FormFactor, e: Complex64, order: u8, pv: bool, tol: Tolerance) -> Result<Complex64> {
    let l2 = ff.lambda() * ff.lambda();
    let ff = &ff.with_lambda(1.0)?;
    let (lo, hi) = ff.support();
    let bw = ff.bandwidth();
    let c = e.re;
    let h = 0.5 * bw;
    let subtract = c > lo && c < hi && e.im.abs() < bw;
    let (wa, wb) = if subtract { (lo.max(c - h), hi.min(c + h)) } else { (c, c) };
    let g2c = if subtract { ff.g2(c) } else { 0.0 };
    // subtracting the slope as well keeps the remainder smooth when E hugs the cut
    let g2pc = if subtract { ff.g2_derivative(c) } else { 0.0 };

    let mut points = ff.break_points();
    if subtract {
        points.extend([wa, c, wb]);
    }
    let segs = segments(lo, hi, &points, bw);

    let integrand = |w: f64| -> Complex64 {
        let d = e - w;
        let g = ff.g2(w);
        let inside = subtract && w > wa && w < wb;
        if g == 0.0 && !inside {
            // a node can round onto E at the threshold, where g² vanishes
            return ZERO;
        }
        match (order, inside) {
            (1, false) => g / d,
            (1, true) => (g - g2c - g2pc * (w - c)) / d,
            (_, false) => g / (d * d),
            (_, true) => (g - g2c - g2pc * (w - c)) / (d * d),
        }
    };
    let est = integrate(integrand, &segs, tol)?;
    let mut total = est.value;
    if subtract {
        let log_diff = if pv {
            let a = (c - wa).abs();
            let b = (c - wb).abs();
            if g2c != 0.0 && (a == 0.0 || b == 0.0) {
                return Err(Error::OnCut { re: e.re, im: e.im });
            }
            if g2c == 0.0 {
                ZERO
            } else {
                Complex64::new(a.ln() - b.ln(), 0.0)
            }
        } else {
            (e - wa).ln() - (e - wb).ln()
        };
        if order == 1 {
            total += g2c * log_diff + g2pc * ((e - c) * log_diff - (wb - wa));
        } else {
            let inv = 1.0 / (e - wb) - 1.0 / (e - wa);
            total += g2c * inv + g2pc * (-log_diff + (e - c) * inv);
        }
    }
    Ok(l2 * total)
}

/// Exact `Σ` and `Σ'` for a piecewise-linear `g²`.
///
/// Summation by parts over the nodes: each interior node contributes
/// `(s_j - s_{j-1})(E - w_j)·ln(E - w_j)`, which vanishes when `E = w_j`.
fn table_cauchy(w: &[f64], g: &[f64], e: Complex64, pv: bool) -> Result<(Complex64, Complex64)> {
    let n = w.len() - 1;
    let slope = |k: usize| (g[k + 1] - g[k]) / (w[k + 1] - w[k]);
    let log = |x: Complex64| -> Complex64 {
        if pv {
            Complex64::new(x.re.abs().ln(), 0.0)
        } else {
            x.ln()
        }
    };
    let first_line = g[0] + slope(0) * (e - w[0]);
    let last_line = g[n] + slope(n - 1) * (e - w[n]);
    let d0 = e - w[0];
    let dn = e - w[n];

    let mut value = ZERO;
    let mut log_sum = ZERO; // Σ s-jumps · ln
    for j in 1..n {
        let jump = slope(j) - slope(j - 1);
        let d = e - w[j];
        if jump != 0.0 && d.norm() != 0.0 {
            let l = log(d);
            value += jump * d * l;
            log_sum += jump * l;
        }
    }
    let end_term = |line: Complex64, d: Complex64| -> Result<Complex64> {
        if d.norm() == 0.0 {
            if line.norm() == 0.0 {
                Ok(ZERO)
            } else {
                Err(Error::OnCut { re: e.re, im: e.im })
            }
        } else {
            Ok(line * log(d))
        }
    };
    value += end_term(first_line, d0)? - end_term(last_line, dn)?;
    value -= g[n] - g[0];

    // ∫ g²/(E-ω)² dω
    let mut second = ZERO;
    if d0.norm() != 0.0 && dn.norm() != 0.0 {
        second = -first_line / d0 - (slope(n - 1) - slope(0)) + last_line / dn;
        second -= slope(0) * log(d0) + log_sum - slope(n - 1) * log(dn);
    }
    Ok((value, -second))
}
