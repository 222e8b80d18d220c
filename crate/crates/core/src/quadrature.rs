//! Adaptive Gauss–Kronrod quadrature on finite and semi-infinite intervals.
//!
//! Everything here works on a list of [`Segment`]s. A segment owns a change
//! of variable `u -> ω` so that tails `[a, ∞)` become `u ∈ [0, 1)` with
//! `ω = a + s·u/(1-u)`. Panels are bisected globally, worst error first,
//! in the style of QUADPACK's QAG.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar types the integrator accepts.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub(crate) fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-10)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub panels: usize,
}

// 21-point Kronrod abscissae on [-1, 1] (non-negative half) and weights,
// with the embedded 10-point Gauss weights on the odd abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_165_710,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

pub const RULE_POINTS: usize = 21;

/// Node offset on `[-1, 1]` with its Kronrod and Gauss weights.
#[derive(Debug, Clone, Copy)]
pub struct RuleNode {
    pub x: f64,
    pub kronrod: f64,
    pub gauss: f64,
}

pub const fn kronrod_rule() -> [RuleNode; RULE_POINTS] {
    let mut out = [RuleNode {
        x: 0.0,
        kronrod: 0.0,
        gauss: 0.0,
    }; RULE_POINTS];
    let mut j = 0;
    while j < 10 {
        let gauss = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        out[j] = RuleNode {
            x: -XGK[j],
            kronrod: WGK[j],
            gauss,
        };
        out[RULE_POINTS - 1 - j] = RuleNode {
            x: XGK[j],
            kronrod: WGK[j],
            gauss,
        };
        j += 1;
    }
    out[10] = RuleNode {
        x: 0.0,
        kronrod: WGK[10],
        gauss: 0.0,
    };
    out
}

pub const RULE: [RuleNode; RULE_POINTS] = kronrod_rule();

/// QUADPACK-style error scaling from the raw `|K - G|` difference.
pub(crate) fn rescale_error(raw: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = raw.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

/// A piece of the real line with its integration variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Finite { a: f64, b: f64 },
    /// `[origin, ∞)` through `ω = origin + scale·u/(1-u)`.
    Upper { origin: f64, scale: f64 },
    /// `(-∞, origin]` through `ω = origin - scale·u/(1-u)`.
    Lower { origin: f64, scale: f64 },
}

impl Segment {
    pub fn u_range(&self) -> (f64, f64) {
        match *self {
            Segment::Finite { a, b } => (a, b),
            _ => (0.0, 1.0),
        }
    }

    /// Returns `(ω, dω/du)`.
    #[inline]
    pub fn map(&self, u: f64) -> (f64, f64) {
        match *self {
            Segment::Finite { .. } => (u, 1.0),
            Segment::Upper { origin, scale } => {
                let v = 1.0 - u;
                (origin + scale * u / v, scale / (v * v))
            }
            Segment::Lower { origin, scale } => {
                let v = 1.0 - u;
                (origin - scale * u / v, scale / (v * v))
            }
        }
    }
}

/// Splits `[lo, hi]` (either end possibly infinite) at the given interior
/// points. Points outside the open interval are dropped.
pub fn segments(lo: f64, hi: f64, points: &[f64], tail_scale: f64) -> Vec<Segment> {
    let mut cuts: Vec<f64> = points
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut out = Vec::with_capacity(cuts.len() + 2);
    let mut left = lo;
    if !lo.is_finite() {
        // need a finite anchor for the lower tail
        let anchor = cuts.first().copied().unwrap_or(if hi.is_finite() { hi } else { 0.0 });
        out.push(Segment::Lower {
            origin: anchor,
            scale: tail_scale,
        });
        left = anchor;
        if !cuts.is_empty() {
            cuts.remove(0);
        }
    }
    for c in cuts {
        if c > left {
            out.push(Segment::Finite { a: left, b: c });
            left = c;
        }
    }
    if hi.is_finite() {
        if hi > left {
            out.push(Segment::Finite { a: left, b: hi });
        }
    } else {
        out.push(Segment::Upper {
            origin: left,
            scale: tail_scale,
        });
    }
    out
}

struct Panel<T> {
    seg: usize,
    ua: f64,
    ub: f64,
    value: T,
    error: f64,
    /// Part of `error` that only reflects rounding in the rule itself.
    floor: f64,
}

impl<T> Panel<T> {
    fn truncation(&self) -> f64 {
        self.error - self.floor
    }
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.truncation() == other.truncation()
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.truncation().total_cmp(&other.truncation())
    }
}

fn eval_panel<T, F>(f: &F, seg: &Segment, ua: f64, ub: f64) -> (T, f64, f64)
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let center = 0.5 * (ua + ub);
    let half = 0.5 * (ub - ua);
    let mut kron = T::zero();
    let mut gauss = T::zero();
    let mut vals = [T::zero(); RULE_POINTS];
    let mut res_abs = 0.0;
    for (k, node) in RULE.iter().enumerate() {
        let (w, jac) = seg.map(center + half * node.x);
        let v = f(w) * jac;
        vals[k] = v;
        kron = kron + v * node.kronrod;
        gauss = gauss + v * node.gauss;
        res_abs += node.kronrod * v.magnitude();
    }
    let mean = kron * 0.5;
    let res_asc: f64 = RULE
        .iter()
        .zip(vals.iter())
        .map(|(n, v)| n.kronrod * (*v - mean).magnitude())
        .sum();
    let h = half.abs();
    let err = rescale_error((kron - gauss).magnitude() * h, res_abs * h, res_asc * h);
    let value = kron * half;
    let floor = (50.0 * f64::EPSILON * res_abs * h).min(err);
    if value.magnitude().is_finite() {
        (value, err, floor)
    } else {
        (value, f64::INFINITY, 0.0)
    }
}

const MAX_PANELS: usize = 4000;

/// Globally adaptive integration of `f` over the union of `segs`.
pub fn integrate<T, F>(f: F, segs: &[Segment], tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let mut heap: BinaryHeap<Panel<T>> = BinaryHeap::new();
    let mut done: Vec<Panel<T>> = Vec::new();
    for (i, seg) in segs.iter().enumerate() {
        let (ua, ub) = seg.u_range();
        if ub <= ua {
            continue;
        }
        let (value, error, floor) = eval_panel(&f, seg, ua, ub);
        heap.push(Panel {
            seg: i,
            ua,
            ub,
            value,
            error,
            floor,
        });
    }

    let totals = |heap: &BinaryHeap<Panel<T>>, done: &[Panel<T>]| {
        let mut v = T::zero();
        let mut e = 0.0;
        let mut r = 0.0;
        for p in heap.iter().chain(done.iter()) {
            v = v + p.value;
            e += p.error;
            r += p.floor;
        }
        (v, e, r)
    };

    // the rounding floor does not shrink under bisection, so only the
    // truncation part is held to the target
    let (mut value, mut error, mut floor) = totals(&heap, &done);
    let mut count = heap.len();
    while error - floor > tol.target(value.magnitude()) && count < MAX_PANELS {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.ua + worst.ub);
        if !(mid > worst.ua && mid < worst.ub) || (worst.ub - worst.ua) < 1e-14 * mid.abs().max(1e-300) {
            done.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let seg = &segs[worst.seg];
        let (v1, e1, r1) = eval_panel(&f, seg, worst.ua, mid);
        let (v2, e2, r2) = eval_panel(&f, seg, mid, worst.ub);
        value = value - worst.value + v1 + v2;
        error += e1 + e2 - worst.error;
        floor += r1 + r2 - worst.floor;
        heap.push(Panel {
            seg: worst.seg,
            ua: worst.ua,
            ub: mid,
            value: v1,
            error: e1,
            floor: r1,
        });
        heap.push(Panel {
            seg: worst.seg,
            ua: mid,
            ub: worst.ub,
            value: v2,
            error: e2,
            floor: r2,
        });
        count += 1;
        if count % 64 == 0 {
            // drift control on the running sums
            (value, error, floor) = totals(&heap, &done);
        }
    }
    let (value, error, floor) = totals(&heap, &done);
    if !value.magnitude().is_finite() || error - floor > tol.target(value.magnitude()) {
        return Err(Error::Tolerance {
            estimate: value.magnitude(),
            achieved: error,
            requested: tol.target(value.magnitude()),
        });
    }
    Ok(Estimate {
        value,
        error,
        panels: count,
    })
}

/// Convenience wrapper: integrate over `[lo, hi]` with interior break points.
pub fn integrate_interval<T, F>(f: F, lo: f64, hi: f64, points: &[f64], tail_scale: f64, tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if lo >= hi {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
            panels: 0,
        });
    }
    integrate(f, &segments(lo, hi, points, tail_scale), tol)
}
