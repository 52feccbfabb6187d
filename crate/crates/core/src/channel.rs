//! Satellite link model: free-space link budget, the shadowed-Rician fade law
//! of the satellite channel, and the SINR γ = φ𝒫_s|h|²/I_a against
//! Gamma-distributed aggregate interference.
//!
//! The closed forms here treat the link as interference dominated and drop the
//! unit noise term; the `*_noisy` variants keep it and integrate numerically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::GammaFit;
use crate::quad::{integrate, integrate_pieces, QuadSettings};
use crate::specfun::{hyp1f1_integer_m_scaled, hyp2f1, ln_gamma, regularized_lower_gamma, SeriesControl, SeriesSum};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Free-space link between satellite and ground terminal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkGeometry {
    pub carrier_hz: f64,
    pub distance_m: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
}

impl LinkGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0 && self.distance_m > 0.0) {
            return Err(Error::config("LinkGeometry", "carrier_hz and distance_m must be > 0"));
        }
        if !(self.tx_gain_dbi.is_finite() && self.rx_gain_dbi.is_finite()) {
            return Err(Error::config("LinkGeometry", "antenna gains must be finite"));
        }
        Ok(())
    }
}

/// Link response φ = (c/(4π f_c d))² G_tx G_rx.
pub fn link_response(g: &LinkGeometry) -> f64 {
    let fspl = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * g.carrier_hz * g.distance_m);
    fspl * fspl * db_to_linear(g.tx_gain_dbi) * db_to_linear(g.rx_gain_dbi)
}

/// Shadowing presets for the satellite channel, from land-mobile-satellite
/// measurement fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadowingPreset {
    Light,
    Average,
    Heavy,
}

/// Shadowed-Rician parameters: 2b is the scatter power, m the Nakagami
/// parameter of the line-of-sight amplitude and Ω its average power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowedRicianParams {
    pub b: f64,
    pub m: u32,
    pub omega: f64,
}

impl ShadowedRicianParams {
    pub fn new(b: f64, m: u32, omega: f64) -> Result<Self> {
        let p = Self { b, m, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn preset(preset: ShadowingPreset) -> Self {
        match preset {
            ShadowingPreset::Light => Self {
                b: 0.158,
                m: 19,
                omega: 1.29,
            },
            ShadowingPreset::Average => Self {
                b: 0.126,
                m: 10,
                omega: 0.835,
            },
            ShadowingPreset::Heavy => Self {
                b: 0.063,
                m: 1,
                omega: 8.97e-4,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::config("ShadowedRicianParams", "b must be finite and > 0"));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::config("ShadowedRicianParams", "omega must be finite and >= 0"));
        }
        Ok(())
    }

    /// True when the law has degenerated to Rayleigh (m = 0 or no LOS power).
    fn is_rayleigh(&self) -> bool {
        self.m == 0 || self.omega == 0.0
    }

    pub fn alpha(&self) -> f64 {
        if self.is_rayleigh() {
            return self.beta();
        }
        let two_bm = 2.0 * self.b * self.m as f64;
        self.beta() * (two_bm / (two_bm + self.omega)).powi(self.m as i32)
    }

    pub fn beta(&self) -> f64 {
        0.5 / self.b
    }

    /// δ; zero in the Rayleigh limit, where the hypergeometric factor is 1.
    pub fn delta(&self) -> f64 {
        if self.is_rayleigh() {
            return 0.0;
        }
        self.omega / (2.0 * self.b * (2.0 * self.b * self.m as f64 + self.omega))
    }

    /// E|h|² = 2b + Ω (2b alone in the Rayleigh limit).
    pub fn mean_power(&self) -> f64 {
        if self.is_rayleigh() {
            2.0 * self.b
        } else {
            2.0 * self.b + self.omega
        }
    }

    /// Density as a finite mixture α e^{−κx} Σ_l c_l x^l; returns (c_l, κ).
    pub(crate) fn mixture(&self) -> (Vec<f64>, f64) {
        let (alpha, beta, delta) = (self.alpha(), self.beta(), self.delta());
        if self.is_rayleigh() {
            return (vec![alpha], beta);
        }
        let m = self.m as f64;
        let mut coeffs = Vec::with_capacity(self.m as usize);
        let mut c = alpha;
        for l in 0..self.m {
            coeffs.push(c);
            let lf = l as f64;
            c *= (m - 1.0 - lf) * delta / ((lf + 1.0) * (lf + 1.0));
        }
        (coeffs, beta - delta)
    }
}

/// f(x) = α e^{−βx} ₁F₁(m; 1; δx).
pub fn shadowed_rician_pdf(p: &ShadowedRicianParams, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if p.is_rayleigh() {
        return p.beta() * (-p.beta() * x).exp();
    }
    let z = p.delta() * x;
    p.alpha() * (-(p.beta() - p.delta()) * x).exp() * hyp1f1_integer_m_scaled(p.m, z)
}

/// F(x) = (α/β) Σ_{i≥0} (m)_i/i! (δ/β)^i P(i+1, βx).
pub fn shadowed_rician_cdf(p: &ShadowedRicianParams, x: f64, ctl: SeriesControl) -> Result<f64> {
    shadowed_rician_cdf_series(p, x, ctl).map(|s| s.value.min(1.0))
}

/// [`shadowed_rician_cdf`] with its truncation diagnostics.
pub fn shadowed_rician_cdf_series(p: &ShadowedRicianParams, x: f64, ctl: SeriesControl) -> Result<SeriesSum> {
    if !(x >= 0.0) {
        return Err(Error::domain("shadowed_rician_cdf", format!("x = {x} must be >= 0")));
    }
    let beta = p.beta();
    let y = beta * x;
    let lead = p.alpha() / beta;
    let q = p.delta() / beta;
    let m = if p.is_rayleigh() { 0.0 } else { p.m as f64 };
    let gamma_ctl = ctl.with_max_terms(ctl.max_terms.max(2_000));
    let mut a = 1.0;
    let mut sum = 0.0;
    for i in 0..ctl.max_terms {
        let fi = i as f64;
        let term = a * regularized_lower_gamma(fi + 1.0, y, gamma_ctl)?;
        sum += term;
        let ratio = (m + fi) / (fi + 1.0) * q;
        let next = a * ratio;
        if next == 0.0 {
            return Ok(SeriesSum {
                value: lead * sum,
                tail_bound: 0.0,
                terms: i + 1,
            });
        }
        // P(i+1, y) decreases in i, so the remaining sum is below P(i+2,y) Σ_{j>i} a_j
        let next_ratio = (m + fi + 1.0) / (fi + 2.0) * q;
        if next_ratio < 1.0 {
            let tail = lead * regularized_lower_gamma(fi + 2.0, y, gamma_ctl)? * next / (1.0 - next_ratio);
            if tail <= ctl.rel_tol * lead * sum {
                return Ok(SeriesSum {
                    value: lead * sum,
                    tail_bound: tail,
                    terms: i + 1,
                });
            }
        }
        a = next;
    }
    Err(Error::Truncation {
        func: "shadowed_rician_cdf",
        terms: ctl.max_terms,
        partial: lead * sum,
        tail_bound: f64::NAN,
    })
}

/// SINR γ = φ𝒫_s|h|²/I_a with I_a ~ Gamma(k, η).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrModel {
    pub sat_link: LinkGeometry,
    pub fade: ShadowedRicianParams,
    pub tx_snr: f64,
    pub interference: GammaFit,
}

impl SinrModel {
    pub fn validate(&self) -> Result<()> {
        self.sat_link.validate()?;
        self.fade.validate()?;
        if !(self.tx_snr > 0.0 && self.tx_snr.is_finite()) {
            return Err(Error::config("SinrModel", "tx_snr must be finite and > 0"));
        }
        Ok(())
    }

    /// φ𝒫_s, the mean received signal-to-noise ratio per unit fade power.
    pub fn scale(&self) -> f64 {
        link_response(&self.sat_link) * self.tx_snr
    }

    pub fn with_tx_snr(&self, tx_snr: f64) -> Self {
        Self { tx_snr, ..*self }
    }
}

/// F_γ(x) in the interference-dominated regime.
pub fn sinr_cdf(model: &SinrModel, x: f64, ctl: SeriesControl) -> Result<f64> {
    sinr_cdf_series(model, x, ctl).map(|s| s.value.clamp(0.0, 1.0))
}

/// [`sinr_cdf`] with truncation diagnostics.
///
/// Conditioning on I_a turns each incomplete-Gamma term of the fade CDF into a
/// negative-binomial tail, F_γ(x) = (α/β) Σ_d NB_{k,r}(d+1) A_d with
/// A_d = Σ_{i≤d} (m)_i/i! (δ/β)^i and r = cη/(1+cη), c = βx/(φ𝒫_s). The sum is
/// taken along these diagonals d = i + j. Once the negative binomial has most
/// of its mass away from the origin (r > ½) the complementary ordering
/// 1 − F = (α/β) Σ_i a_i NB(≤ i)
/// converges faster and is used instead.
pub fn sinr_cdf_series(model: &SinrModel, x: f64, ctl: SeriesControl) -> Result<SeriesSum> {
    if !(x >= 0.0) {
        return Err(Error::domain("sinr_cdf", format!("x = {x} must be >= 0")));
    }
    if x == 0.0 {
        return Ok(SeriesSum {
            value: 0.0,
            tail_bound: 0.0,
            terms: 0,
        });
    }
    if x.is_infinite() {
        return Ok(SeriesSum {
            value: 1.0,
            tail_bound: 0.0,
            terms: 0,
        });
    }
    let p = &model.fade;
    let (k, eta) = (model.interference.k, model.interference.eta);
    let beta = p.beta();
    let ceta = beta * x / model.scale() * eta;
    let r = ceta / (1.0 + ceta);
    let lead = p.alpha() / beta;
    let q = p.delta() / beta;
    let m = if p.is_rayleigh() { 0.0 } else { p.m as f64 };
    if r <= 0.5 {
        diagonal_sum(lead, m, q, k, r, ceta, ctl)
    } else {
        complement_sum(lead, m, q, k, r, ceta, ctl)
    }
}

fn diagonal_sum(lead: f64, m: f64, q: f64, k: f64, r: f64, ceta: f64, ctl: SeriesControl) -> Result<SeriesSum> {
    // g_0 = (α/β) NB(1) = (α/β) k r (1−r)^k
    let mut g = lead * k * r * (-k * ceta.ln_1p()).exp();
    let mut a = 1.0;
    let mut acc_a = 1.0;
    // Σ a_i = (1 − δ/β)^{−m}
    let total_a = (-m * (-q).ln_1p()).exp();
    let mut sum = 0.0;
    let mut quiet = 0;
    for d in 0..ctl.max_terms {
        let df = d as f64;
        let term = g * acc_a;
        sum += term;
        let ratio = r * (df + k + 1.0) / (df + 2.0);
        if term <= ctl.rel_tol * sum && ratio < 1.0 {
            quiet += 1;
            if quiet >= 3 {
                let tail = g * ratio * total_a / (1.0 - ratio);
                return Ok(SeriesSum {
                    value: sum,
                    tail_bound: tail,
                    terms: d + 1,
                });
            }
        } else {
            quiet = 0;
        }
        g *= ratio;
        a *= (m + df) / (df + 1.0) * q;
        acc_a += a;
    }
    Err(Error::Truncation {
        func: "sinr_cdf",
        terms: ctl.max_terms,
        partial: sum,
        tail_bound: f64::NAN,
    })
}

fn complement_sum(lead: f64, m: f64, q: f64, k: f64, r: f64, ceta: f64, ctl: SeriesControl) -> Result<SeriesSum> {
    let mut nb = (-k * ceta.ln_1p()).exp();
    let mut nb_cdf = nb;
    let mut a = 1.0;
    let mut sum = 0.0;
    for i in 0..ctl.max_terms {
        let fi = i as f64;
        sum += lead * a * nb_cdf;
        let next = a * (m + fi) / (fi + 1.0) * q;
        let next_ratio = (m + fi + 1.0) / (fi + 2.0) * q;
        if next == 0.0 || (next_ratio < 1.0 && lead * next / (1.0 - next_ratio) <= ctl.rel_tol * sum) {
            let tail = if next == 0.0 { 0.0 } else { lead * next / (1.0 - next_ratio) };
            return Ok(SeriesSum {
                value: 1.0 - sum,
                tail_bound: tail,
                terms: i + 1,
            });
        }
        a = next;
        nb *= r * (k + fi) / (fi + 1.0);
        nb_cdf += nb;
    }
    Err(Error::Truncation {
        func: "sinr_cdf",
        terms: ctl.max_terms,
        partial: 1.0 - sum,
        tail_bound: f64::NAN,
    })
}

/// f_γ(x) in the interference-dominated regime: a finite sum over the fade
/// mixture, each term a beta-prime kernel in x.
pub fn sinr_pdf(model: &SinrModel, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let (coeffs, kappa) = model.fade.mixture();
    let (k, eta) = (model.interference.k, model.interference.eta);
    let s = model.scale();
    let u = x / s;
    let ln_gk = ln_gamma(k);
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .map(|(l, &c)| {
            let lf = l as f64;
            let ln_mag = c.ln() + ln_gamma(lf + k + 1.0) - ln_gk + if l > 0 { lf * (u * eta).ln() } else { 0.0 }
                - (lf + k + 1.0) * (kappa * eta * u).ln_1p();
            ln_mag.exp() * eta / s
        })
        .sum()
}

/// ∫_{lo}^{hi} x f_γ(x) dx in closed form; each mixture term contributes
/// ζ^{l+2}/(l+2) ₂F₁(l+k+1, l+2; l+3; −κηζ/φ𝒫_s) at the end points.
pub fn sinr_partial_mean(model: &SinrModel, lo: f64, hi: f64, ctl: SeriesControl) -> Result<f64> {
    let lo = lo.max(0.0);
    if hi <= lo {
        return Ok(0.0);
    }
    let (coeffs, kappa) = model.fade.mixture();
    let (k, eta) = (model.interference.k, model.interference.eta);
    let s = model.scale();
    let b = kappa * eta / s;
    let ln_gk = ln_gamma(k);
    let mut total = 0.0;
    for (l, &c) in coeffs.iter().enumerate() {
        if c <= 0.0 {
            continue;
        }
        let lf = l as f64;
        let a = lf + k + 1.0;
        let ln_pref = c.ln() + ln_gamma(a) - ln_gk + (lf + 1.0) * (eta / s).ln() - (lf + 2.0).ln();
        let at = |z: f64| -> Result<f64> {
            if z == 0.0 {
                return Ok(0.0);
            }
            let f = hyp2f1(a, lf + 2.0, lf + 3.0, -b * z, ctl)?;
            Ok((ln_pref + (lf + 2.0) * z.ln()).exp() * f)
        };
        total += at(hi)? - at(lo)?;
    }
    Ok(total)
}

/// F_γ(x) with the unit noise term kept: E_I[F_h(x(I+1)/φ𝒫_s)] by quadrature.
pub fn sinr_cdf_noisy(model: &SinrModel, x: f64, ctl: SeriesControl) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let fit = model.interference;
    let s = model.scale();
    let fade = model.fade;
    let v = integrate_pieces(
        |y| match shadowed_rician_cdf(&fade, x * (y + 1.0) / s, ctl) {
            Ok(f) => f * fit.pdf(y),
            Err(_) => f64::NAN,
        },
        &interference_breakpoints(&fit),
        true,
        QuadSettings::with_tol(1e-12, 1e-9),
    )?;
    Ok(v.value.clamp(0.0, 1.0))
}

/// f_γ(x) with the unit noise term kept, by quadrature over I_a.
pub fn sinr_pdf_noisy(model: &SinrModel, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Ok(0.0);
    }
    let fit = model.interference;
    let s = model.scale();
    let fade = model.fade;
    let v = integrate_pieces(
        |y| shadowed_rician_pdf(&fade, x * (y + 1.0) / s) * (y + 1.0) / s * fit.pdf(y),
        &interference_breakpoints(&fit),
        true,
        QuadSettings::with_tol(1e-14, 1e-9),
    )?;
    Ok(v.value)
}

/// Break points that bracket the bulk of a Gamma law for piecewise quadrature.
pub(crate) fn interference_breakpoints(fit: &GammaFit) -> Vec<f64> {
    let mean = fit.mean();
    let sd = fit.variance().sqrt();
    let mut pts = vec![0.0, 0.05 * mean, 0.25 * mean, mean, mean + 2.0 * sd, mean + 6.0 * sd];
    pts.dedup_by(|a, b| *a <= *b);
    pts
}

/// Integrate a function of γ against the SINR law. Break points sit on a
/// decade ladder around the typical SINR, plus any `extra` points where `f`
/// changes character.
pub fn integrate_against_sinr<F: Fn(f64) -> f64>(model: &SinrModel, f: F, extra: &[f64], settings: QuadSettings) -> Result<f64> {
    let center = model.scale() * model.fade.mean_power() / model.interference.mean();
    let mut pts = vec![0.0];
    let mut t = center * 1e-6;
    while t < center * 1e4 {
        pts.push(t);
        t *= 10.0;
    }
    pts.extend(extra.iter().copied().filter(|x| *x > 0.0 && x.is_finite()));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    integrate_pieces(|x| f(x) * sinr_pdf(model, x), &pts, true, settings).map(|r| r.value)
}

/// ∫_{lo}^{hi} g(x) f_γ(x) dx by adaptive quadrature.
pub fn integrate_sinr_interval<F: Fn(f64) -> f64>(model: &SinrModel, f: F, lo: f64, hi: f64, settings: QuadSettings) -> Result<f64> {
    integrate(|x| f(x) * sinr_pdf(model, x), lo, hi, settings).map(|r| r.value)
}
