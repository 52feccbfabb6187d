//! Adaptive Gauss–Kronrod quadrature and one-dimensional search helpers.
//!
//! The integrator is a globally adaptive G7/K15 scheme: the interval with the
//! largest error estimate is bisected until the summed estimate meets
//! `max(abs_tol, rel_tol * |I|)` or the interval budget runs out. Nodes never
//! touch the interval end points, so integrable end-point singularities are
//! tolerated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl QuadSettings {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Integrate `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, settings: QuadSettings) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    if b < a {
        return integrate(f, b, a, settings).map(|r| QuadResult {
            value: -r.value,
            error: r.error,
        });
    }
    integrate_segments(&f, &[a, b], settings)
}

/// Global adaptive integration over `[p0, p_last]` starting from the given
/// break points; the tolerance applies to the total, not to each piece.
fn integrate_segments<F: Fn(f64) -> f64>(f: &F, points: &[f64], settings: QuadSettings) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let seg = kronrod(f, w[0], w[1]);
            total += seg.value;
            total_err += seg.error;
            heap.push(seg);
        }
    }
    if heap.is_empty() {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let tol = |v: f64| settings.abs_tol.max(settings.rel_tol * v.abs());

    while total_err > tol(total) {
        if !total.is_finite() || heap.len() >= settings.max_intervals {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            heap.push(worst);
            break;
        }
        let left = kronrod(f, worst.a, mid);
        let right = kronrod(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // re-sum to shed accumulated cancellation from the running updates
    let (value, error, magnitude) = heap
        .iter()
        .fold((0.0, 0.0, 0.0), |(v, e, m), s| (v + s.value, e + s.error, m + s.value.abs()));
    // rounding in the rule itself caps the attainable accuracy
    let floor = 50.0 * f64::EPSILON * magnitude;
    if !value.is_finite() || error > (tol(value) * 10.0).max(floor) {
        return Err(Error::Quadrature { estimate: value, error });
    }
    Ok(QuadResult { value, error })
}

/// Integrate `f` over `[a, ∞)` through the map `x = a + t/(1-t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, settings: QuadSettings) -> Result<QuadResult> {
    integrate_pieces(f, &[a], true, settings)
}

/// Integrate over consecutive pieces `[p0,p1], [p1,p2], …` and, when
/// `to_infinity` is set, the tail `[p_last, ∞)`, as one adaptive problem.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], to_infinity: bool, settings: QuadSettings) -> Result<QuadResult> {
    let Some(&last) = points.last() else {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    };
    if !to_infinity {
        return integrate_segments(&f, points, settings);
    }
    // past `last` the parameter u runs over [last, last + 1) with x = last + t/(1 − t)
    let mapped = |u: f64| {
        if u <= last {
            return f(u);
        }
        let t = u - last;
        let s = 1.0 - t;
        let v = f(last + t / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut pts = points.to_vec();
    pts.push(last + 1.0);
    integrate_segments(&mapped, &pts, settings)
}

/// Golden-section minimisation of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (l, h) = (lo.ln(), hi.ln());
    (0..n).map(|i| (l + (h - l) * i as f64 / (n - 1) as f64).exp()).collect()
}
