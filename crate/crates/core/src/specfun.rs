//! Special functions used by the closed forms: Pochhammer symbols, the
//! (log-)Gamma function, the lower incomplete Gamma function, Digamma, the
//! Gaussian Q-function and its inverse, the integer-parameter confluent
//! hypergeometric function ₁F₁(m;1;z) and the Gauss hypergeometric function
//! ₂F₁ with a Pfaff continuation for negative arguments.
//!
//! Every series takes an explicit [`SeriesControl`]; nothing here keeps
//! global state.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation policy for infinite series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_terms: 500,
        }
    }
}

impl SeriesControl {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        let ctl = Self { rel_tol, max_terms };
        ctl.validate()?;
        Ok(ctl)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::config("SeriesControl", "rel_tol must be > 0"));
        }
        if self.max_terms < 1 {
            return Err(Error::config("SeriesControl", "max_terms must be >= 1"));
        }
        Ok(())
    }

    /// Same tolerance with a larger term budget.
    pub fn with_max_terms(self, max_terms: usize) -> Self {
        Self { max_terms, ..self }
    }
}

/// Value of a truncated series together with an estimate of the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// Rising factorial (q)_l = q(q+1)⋯(q+l−1), with (q)_0 = 1.
pub fn pochhammer(q: f64, l: u32) -> f64 {
    (0..l).fold(1.0, |acc, i| acc * (q + i as f64))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps the Lanczos sum in its accurate range
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let series = LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, &c)| acc + c / (x + (i + 1) as f64));
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    if x == x.floor() && x > 0.0 && x <= 21.0 {
        return (1..x as u32).fold(1.0, |acc, k| acc * k as f64);
    }
    ln_gamma(x).exp()
}

/// Regularised lower incomplete Gamma function P(a, x) = γ(a, x)/Γ(a).
pub fn regularized_lower_gamma(a: f64, x: f64, ctl: SeriesControl) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::domain("regularized_lower_gamma", format!("a = {a} must be > 0")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain("regularized_lower_gamma", format!("x = {x} must be >= 0")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        let prefactor = (a * x.ln() - x - ln_gamma(a + 1.0)).exp();
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..=ctl.max_terms {
            term *= x / (a + n as f64);
            sum += term;
            if term.abs() <= ctl.rel_tol * sum.abs() {
                return Ok((prefactor * sum).min(1.0));
            }
        }
        Err(Error::Truncation {
            func: "regularized_lower_gamma",
            terms: ctl.max_terms,
            partial: prefactor * sum,
            tail_bound: prefactor * term * x / (a + ctl.max_terms as f64 + 1.0 - x).max(1.0),
        })
    } else {
        let q = upper_gamma_fraction(a, x, ctl)?;
        Ok((1.0 - q).max(0.0))
    }
}

/// Regularised upper Gamma Q(a, x) by the modified Lentz continued fraction.
fn upper_gamma_fraction(a: f64, x: f64, ctl: SeriesControl) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let prefactor = (a * x.ln() - x - ln_gamma(a)).exp();
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=ctl.max_terms {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() <= ctl.rel_tol {
            return Ok(prefactor * h);
        }
    }
    Err(Error::Truncation {
        func: "upper_gamma_fraction",
        terms: ctl.max_terms,
        partial: prefactor * h,
        tail_bound: f64::NAN,
    })
}

/// Lower incomplete Gamma function γ(a, x) = ∫₀ˣ t^{a−1} e^{−t} dt.
pub fn lower_incomplete_gamma(a: f64, x: f64, ctl: SeriesControl) -> Result<f64> {
    match regularized_lower_gamma(a, x, ctl) {
        Ok(p) => Ok(p * gamma(a)),
        Err(Error::Truncation {
            func,
            terms,
            partial,
            tail_bound,
        }) => Err(Error::Truncation {
            func,
            terms,
            partial: partial * gamma(a),
            tail_bound: tail_bound * gamma(a),
        }),
        Err(e) => Err(e),
    }
}

/// Digamma ψ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("digamma", format!("x = {x} must be finite and > 0")));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli tail: −Σ B_{2k}/(2k x^{2k})
    let tail = inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    Ok(acc + x.ln() - 0.5 / x - tail)
}

/// Gaussian tail probability Q(x) = ½ erfc(x/√2).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Inverse of [`q_function`] on (0, 1).
pub fn q_function_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("q_function_inv", format!("p = {p} must lie in (0, 1)")));
    }
    // Q^{-1}(p) = Φ^{-1}(1 − p); start from Acklam's rational approximation
    let mut x = -acklam_inverse_normal(p);
    for _ in 0..3 {
        let err = q_function(x) - p;
        let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        // Halley step on f(x) = Q(x) − p with f' = −φ, f'' = xφ
        let newton = err / pdf;
        x += newton / (1.0 + 0.5 * x * newton);
    }
    Ok(x)
}

fn acklam_inverse_normal(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let p_low = 0.024_25;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// ₁F₁(m; 1; z) for integer m through the Kummer-transformed finite sum
/// e^z Σ_{l<m} (−1)^l (1−m)_l z^l/(l!)².
///
/// m = 0 returns 1, which makes the shadowed-Rician law collapse to Rayleigh.
pub fn hyp1f1_integer_m(m: u32, z: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    z.exp() * hyp1f1_integer_m_scaled(m, z)
}

/// e^{−z} ₁F₁(m; 1; z) for integer m ≥ 1: the polynomial part of the finite
/// sum, free of the exponential so callers can merge it with their own.
pub fn hyp1f1_integer_m_scaled(m: u32, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0; // (−1)^l (1−m)_l z^l / (l!)^2 at l = 0
    for l in 0..m {
        sum += term;
        let lf = l as f64;
        // (−1)(1−m+l) = (m−1−l) ≥ 0
        term *= (m as f64 - 1.0 - lf) * z / ((lf + 1.0) * (lf + 1.0));
    }
    sum
}

/// Gauss hypergeometric function ₂F₁(a, b; c; z) for real z < 1.
///
/// |z| < ½ or 0 ≤ z < 1 sums the Gauss series directly; z < −½ is mapped
/// through the Pfaff transformation z → z/(z−1), which lands in (⅓, 1).
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64, ctl: SeriesControl) -> Result<f64> {
    if c <= 0.0 && c == c.floor() {
        return Err(Error::domain("hyp2f1", format!("c = {c} is a non-positive integer")));
    }
    if !z.is_finite() || z >= 1.0 {
        return Err(Error::UnsupportedArgument {
            func: "hyp2f1",
            detail: format!("z = {z} outside (-inf, 1)"),
        });
    }
    if z >= -0.5 {
        return gauss_series(a, b, c, z, ctl).map(|s| s.value);
    }
    let w = z / (z - 1.0);
    if w.abs() >= 1.0 {
        return Err(Error::UnsupportedArgument {
            func: "hyp2f1",
            detail: format!("Pfaff image {w} of z = {z} is not inside the unit disc"),
        });
    }
    let terminates = |q: f64| q <= 0.0 && q == q.floor();
    // (1−z)^{−a} ₂F₁(a, c−b; c; w), or the symmetric form in b when that one terminates
    let (lead, other, power) = if terminates(c - a) && !terminates(c - b) {
        (b, c - a, b)
    } else {
        (a, c - b, a)
    };
    let s = gauss_series(lead, other, c, w, ctl)?;
    Ok((-power * (1.0 - z).ln()).exp() * s.value)
}

fn gauss_series(a: f64, b: f64, c: f64, z: f64, ctl: SeriesControl) -> Result<SeriesSum> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..ctl.max_terms {
        let kf = k as f64;
        let ratio = (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        term *= ratio;
        if term == 0.0 {
            return Ok(SeriesSum {
                value: sum,
                tail_bound: 0.0,
                terms: k + 1,
            });
        }
        sum += term;
        if term.abs() <= ctl.rel_tol * sum.abs() && ratio.abs() < 1.0 {
            let r = ratio.abs();
            return Ok(SeriesSum {
                value: sum,
                tail_bound: term.abs() * r / (1.0 - r),
                terms: k + 1,
            });
        }
    }
    Err(Error::Truncation {
        func: "hyp2f1",
        terms: ctl.max_terms,
        partial: sum,
        tail_bound: term.abs() * z.abs() / (1.0 - z.abs()),
    })
}
