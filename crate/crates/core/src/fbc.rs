//! Finite-blocklength decoding error: capacity and dispersion, the normal
//! approximation averaged over the SINR law, its closed form under a
//! piecewise-linear Q-function, and the high-SNR limit of that closed form.
//!
//! Rates are in nats per channel use unless a [`LogBase`] says otherwise.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::channel::{integrate_against_sinr, integrate_sinr_interval, sinr_cdf, sinr_cdf_series, sinr_partial_mean, SinrModel};
use crate::error::{Error, Result};
use crate::quad::QuadSettings;
use crate::specfun::{q_function, SeriesControl};

/// Raw values outside this window mean the approximation has broken down.
pub const RAW_VALIDITY: (f64, f64) = (-0.05, 1.05);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl LogBase {
    /// Convert a rate expressed in this base to nats.
    pub fn to_nats(self, rate: f64) -> f64 {
        match self {
            LogBase::Nats => rate,
            LogBase::Bits => rate * LN_2,
        }
    }

    pub fn from_nats(self, rate: f64) -> f64 {
        match self {
            LogBase::Nats => rate,
            LogBase::Bits => rate / LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbcConfig {
    pub blocklength: f64,
    pub rate: f64,
    #[serde(default)]
    pub base: LogBase,
}

impl FbcConfig {
    pub fn nats(blocklength: f64, rate_nats: f64) -> Self {
        Self {
            blocklength,
            rate: rate_nats,
            base: LogBase::Nats,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blocklength >= 1.0 && self.blocklength.is_finite()) {
            return Err(Error::config("FbcConfig", "blocklength must be >= 1"));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::config("FbcConfig", "rate must be > 0"));
        }
        Ok(())
    }

    pub fn rate_nats(&self) -> f64 {
        self.base.to_nats(self.rate)
    }
}

/// A probability with the pre-clamp value and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorProb {
    pub value: f64,
    pub raw: f64,
    pub truncation_error: f64,
    /// Raw value fell outside [`RAW_VALIDITY`].
    pub flagged: bool,
}

impl ErrorProb {
    pub(crate) fn from_raw(raw: f64, truncation_error: f64) -> Self {
        Self {
            value: raw.clamp(0.0, 1.0),
            raw,
            truncation_error,
            flagged: !(raw >= RAW_VALIDITY.0 && raw <= RAW_VALIDITY.1),
        }
    }
}

/// Capacity C = log(1+γ) in the requested base and dispersion V = 1 − (1+γ)^{−2}.
pub fn capacity_dispersion(gamma: f64, base: LogBase) -> (f64, f64) {
    let c = base.from_nats(gamma.ln_1p());
    let v = 1.0 - (1.0 + gamma).powi(-2);
    (c, v)
}

/// Q(√n (C(γ) − R)/√V(γ)) at a single SINR, rate in nats.
pub fn normal_approx_at(gamma: f64, blocklength: f64, rate_nats: f64) -> f64 {
    let (c, v) = capacity_dispersion(gamma, LogBase::Nats);
    if v <= 0.0 {
        return if c >= rate_nats { 0.5 } else { 1.0 };
    }
    q_function(blocklength.sqrt() * (c - rate_nats) / v.sqrt())
}

/// E_γ[Q(√n (C(γ) − R)/√V(γ))] by adaptive quadrature against the SINR density.
///
/// Written as F_γ(γ₀) − ∫_0^{γ₀} Q(−a) f_γ + ∫_{γ₀}^∞ Q(a) f_γ with γ₀ = e^R − 1,
/// so both integrands are small and the result keeps full absolute accuracy
/// near 0 and 1.
pub fn error_prob_normal(model: &SinrModel, cfg: &FbcConfig) -> Result<ErrorProb> {
    cfg.validate()?;
    let (n, r) = (cfg.blocklength, cfg.rate_nats());
    let th = psi_thresholds(r, n)?;
    let g0 = th.center();
    let below = sinr_cdf(model, g0, SeriesControl::default().with_max_terms(100_000))?;
    let correction = |g: f64| {
        let q = normal_approx_at(g, n, r);
        if g < g0 {
            q - 1.0
        } else {
            q
        }
    };
    let extra = [th.zeta_low, g0, th.zeta_up];
    let v = integrate_against_sinr(model, correction, &extra, QuadSettings::with_tol(1e-14, 1e-9))?;
    Ok(ErrorProb::from_raw(below + v, 0.0))
}

/// Linearisation of Q(√n (C(γ) − R)/√V(γ)) around γ₀ = e^R − 1: the tangent
/// line of slope −ϑ√n through ½, clipped to [0, 1] at ζ_low and ζ_up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiThresholds {
    pub vartheta: f64,
    pub zeta_low: f64,
    pub zeta_up: f64,
    pub blocklength: f64,
}

impl PsiThresholds {
    pub fn center(&self) -> f64 {
        0.5 * (self.zeta_low + self.zeta_up)
    }

    /// The clipped linear approximation Ψ(γ).
    pub fn psi(&self, gamma: f64) -> f64 {
        if gamma <= self.zeta_low {
            1.0
        } else if gamma >= self.zeta_up {
            0.0
        } else {
            0.5 - self.vartheta * self.blocklength.sqrt() * (gamma - self.center())
        }
    }
}

/// ϑ = 1/√(2π(e^{2R} − 1)) and ζ_{low,up} = e^R − 1 ∓ 1/(2ϑ√n).
pub fn psi_thresholds(rate_nats: f64, blocklength: f64) -> Result<PsiThresholds> {
    if !(rate_nats > 0.0) || !(blocklength > 0.0) {
        return Err(Error::domain(
            "psi_thresholds",
            format!("rate = {rate_nats}, blocklength = {blocklength} must be > 0"),
        ));
    }
    let vartheta = 1.0 / (2.0 * PI * (2.0 * rate_nats).exp_m1()).sqrt();
    let center = rate_nats.exp_m1();
    let half = 0.5 / (vartheta * blocklength.sqrt());
    Ok(PsiThresholds {
        vartheta,
        zeta_low: center - half,
        zeta_up: center + half,
        blocklength,
    })
}

/// Truncation policies for the closed form: one for the CDF double series
/// and one for the hypergeometric terms, which need far more terms when
/// their argument is large and negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedFormControl {
    pub series: SeriesControl,
    pub hyp2f1: SeriesControl,
}

impl Default for ClosedFormControl {
    fn default() -> Self {
        Self {
            series: SeriesControl::default(),
            hyp2f1: SeriesControl::default().with_max_terms(1_000_000),
        }
    }
}

/// Closed-form ε under the linearised Q-function:
/// F_γ(ζ_l) + [½ + ϑ√n(e^R − 1)](F_γ(ζ_u) − F_γ(ζ_l)) − ϑ√n Λ(ζ_l, ζ_u),
/// with Λ the truncated first moment of the SINR. ζ_l is clamped at 0.
pub fn error_prob_closed_form(model: &SinrModel, rate_nats: f64, blocklength: f64, ctl: ClosedFormControl) -> Result<ErrorProb> {
    let th = psi_thresholds(rate_nats, blocklength)?;
    let lo = th.zeta_low.max(0.0);
    let hi = th.zeta_up;
    let slope = th.vartheta * blocklength.sqrt();
    let f_lo = sinr_cdf_series(model, lo, ctl.series)?;
    let f_hi = sinr_cdf_series(model, hi, ctl.series)?;
    let lambda = sinr_partial_mean(model, lo, hi, ctl.hyp2f1)?;
    let weight = 0.5 + slope * th.center();
    let raw = f_lo.value + weight * (f_hi.value - f_lo.value) - slope * lambda;
    let truncation = f_lo.tail_bound * (1.0 + weight) + f_hi.tail_bound * weight;
    Ok(ErrorProb::from_raw(raw, truncation))
}

/// The same expression as [`error_prob_closed_form`] with every piece
/// evaluated by adaptive quadrature of the SINR density.
pub fn error_prob_psi_quadrature(model: &SinrModel, rate_nats: f64, blocklength: f64) -> Result<f64> {
    let th = psi_thresholds(rate_nats, blocklength)?;
    let lo = th.zeta_low.max(0.0);
    let settings = QuadSettings::with_tol(1e-15, 1e-11);
    let below = if lo > 0.0 {
        integrate_sinr_interval(model, |_| 1.0, 0.0, lo, settings)?
    } else {
        0.0
    };
    let inside = integrate_sinr_interval(model, |g| th.psi(g), lo, th.zeta_up, settings)?;
    Ok(below + inside)
}

/// High-SNR form: replaces F_γ by its linear leading term F^∞(x) = s x with
/// s = α k η/(φ𝒫_s), and Λ by s(ζ_u² − ζ_l²)/2. When ζ_l > 0 the expression
/// collapses to s(e^R − 1).
pub fn error_prob_asymptotic(model: &SinrModel, rate_nats: f64, blocklength: f64) -> Result<ErrorProb> {
    let th = psi_thresholds(rate_nats, blocklength)?;
    let s = asymptotic_cdf_slope(model);
    let lo = th.zeta_low.max(0.0);
    let hi = th.zeta_up;
    let slope = th.vartheta * blocklength.sqrt();
    let raw = s * lo + (0.5 + slope * th.center()) * s * (hi - lo) - slope * 0.5 * s * (hi * hi - lo * lo);
    Ok(ErrorProb::from_raw(raw, 0.0))
}

/// Slope s of the small-argument SINR CDF, F_γ(x) ≈ s x.
pub fn asymptotic_cdf_slope(model: &SinrModel) -> f64 {
    model.fade.alpha() * model.interference.k * model.interference.eta / model.scale()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{db_to_linear, LinkGeometry, ShadowedRicianParams, ShadowingPreset};
    use crate::interference::GammaFit;

    fn model(tx_snr_db: f64) -> SinrModel {
        SinrModel {
            sat_link: LinkGeometry {
                carrier_hz: 2e9,
                distance_m: 6e5,
                tx_gain_dbi: 20.0,
                rx_gain_dbi: 0.0,
            },
            fade: ShadowedRicianParams::preset(ShadowingPreset::Average),
            tx_snr: db_to_linear(tx_snr_db),
            interference: GammaFit::new(2.3, 40.0).unwrap(),
        }
    }

    #[test]
    fn capacity_dispersion_examples() {
        assert_eq!(capacity_dispersion(0.0, LogBase::Nats), (0.0, 0.0));
        assert!((capacity_dispersion(1.0, LogBase::Bits).0 - 1.0).abs() < 1e-15);
        assert!((capacity_dispersion(1e9, LogBase::Nats).1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thresholds_width_and_center() {
        for (r, n) in [(0.5, 50.0), (1.0, 200.0), (2.0, 1000.0)] {
            let th = psi_thresholds(r, n).unwrap();
            assert!(((th.zeta_up - th.zeta_low) - 1.0 / (th.vartheta * n.sqrt())).abs() < 1e-12);
            assert_eq!(th.psi(r.exp_m1()), 0.5);
        }
        let w = |n: f64| {
            let th = psi_thresholds(1.0, n).unwrap();
            th.zeta_up - th.zeta_low
        };
        assert!(w(1e8) < 1e-3 * w(100.0));
    }

    #[test]
    fn psi_is_tangent_to_the_normal_approximation() {
        // the slope of Q(√n (C − R)/√V) at γ₀ = e^R − 1, by central differences
        for (r, n) in [(0.3, 100.0), (1.0, 100.0), (2.5, 500.0)] {
            let th = psi_thresholds(r, n).unwrap();
            let g0 = th.center();
            let h = 1e-6 * (1.0 + g0);
            let num = (normal_approx_at(g0 + h, n, r) - normal_approx_at(g0 - h, n, r)) / (2.0 * h);
            let lin = -th.vartheta * n.sqrt();
            assert!((num / lin - 1.0).abs() < 1e-6, "{num} vs {lin}");
        }
    }

    #[test]
    fn deep_outage() {
        let e = error_prob_normal(&model(140.0), &FbcConfig::nats(100.0, 50.0)).unwrap();
        assert!(e.value >= 1.0 - 1e-9, "{e:?}");
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let ctl = ClosedFormControl::default();
        for snr in [140.0, 150.0, 160.0] {
            for n in [50.0, 200.0, 800.0] {
                for r in [0.2, 0.7, 1.5] {
                    let md = model(snr);
                    let cf = error_prob_closed_form(&md, r, n, ctl).unwrap();
                    let q = error_prob_psi_quadrature(&md, r, n).unwrap();
                    assert!((cf.raw - q).abs() < 1e-8, "snr={snr} n={n} r={r}: {} vs {q}", cf.raw);
                }
            }
        }
    }

    #[test]
    fn asymptotic_reduces_to_linear_term() {
        let md = model(180.0);
        let (r, n) = (1.0, 200.0);
        let th = psi_thresholds(r, n).unwrap();
        assert!(th.zeta_low > 0.0);
        let e = error_prob_asymptotic(&md, r, n).unwrap();
        let s = asymptotic_cdf_slope(&md);
        assert!((e.raw / (s * r.exp_m1()) - 1.0).abs() < 1e-12);
        let e10 = error_prob_asymptotic(&md.with_tx_snr(10.0 * md.tx_snr), r, n).unwrap();
        assert!((e.raw / e10.raw - 10.0).abs() < 1e-9);
    }

    #[test]
    fn asymptotic_flags_low_snr() {
        let e = error_prob_asymptotic(&model(100.0), 1.0, 200.0).unwrap();
        assert!(e.raw > 1.05 && e.flagged && e.value == 1.0);
    }

    #[test]
    fn closed_form_nonincreasing_in_power() {
        let ctl = ClosedFormControl::default();
        let mut prev = f64::INFINITY;
        for dbm in (10..=50).step_by(5) {
            // 𝒫_s = P_s / N_0 with N_0 = −114 dBm
            let e = error_prob_closed_form(&model(dbm as f64 + 114.0), 0.7, 200.0, ctl).unwrap();
            assert!(e.value <= prev + 1e-12);
            prev = e.value;
        }
    }
}
