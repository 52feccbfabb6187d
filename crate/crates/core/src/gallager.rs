//! Error-rate exponent: Gallager's E₀ for Gaussian inputs averaged over the
//! SINR law, a Jensen-type closed form of it, and θ_error = sup_ρ E₀(ρ) − ρR.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::{integrate_against_sinr, SinrModel};
use crate::error::{Error, Result};
use crate::interference::{aggregate_moments, InterferenceConfig};
use crate::quad::QuadSettings;
use crate::specfun::{digamma, hyp2f1, SeriesControl};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult {
    pub theta_error: f64,
    pub rho_star: f64,
    pub e0_at_rho: f64,
}

/// How the interferer contribution enters the Jensen form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterfererTerm {
    /// √(π/2)ς Σ_j φ_j P_t: the Rayleigh amplitude mean times the summed link powers.
    #[default]
    AmplitudeMean,
    /// E[g] Σ_j φ_j P_t, i.e. the mean aggregate interference power.
    PowerMean,
}

/// Interferer inputs of the Jensen form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenInterferer {
    /// E[Σ_j 𝒫_t d_j^{−α̃}], the expected summed link powers without fading.
    pub path_sum: f64,
    pub rayleigh_scale: f64,
    pub mean_power_gain: f64,
    pub term: InterfererTerm,
}

impl JensenInterferer {
    pub fn from_config(cfg: &InterferenceConfig, term: InterfererTerm) -> Result<Self> {
        let (mean, _) = aggregate_moments(cfg)?;
        let (k, eta) = cfg.power_gain();
        Ok(Self {
            path_sum: mean / (k * eta),
            rayleigh_scale: cfg.rayleigh_scale,
            mean_power_gain: k * eta,
            term,
        })
    }

    fn level(&self) -> f64 {
        match self.term {
            InterfererTerm::AmplitudeMean => (PI / 2.0).sqrt() * self.rayleigh_scale * self.path_sum,
            InterfererTerm::PowerMean => self.mean_power_gain * self.path_sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum E0Method {
    Exact,
    Jensen(JensenInterferer),
}

impl E0Method {
    pub fn label(&self) -> &'static str {
        match self {
            E0Method::Exact => "exact",
            E0Method::Jensen(j) => match j.term {
                InterfererTerm::AmplitudeMean => "jensen-amplitude",
                InterfererTerm::PowerMean => "jensen-power",
            },
        }
    }
}

fn check_rho(func: &'static str, rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain(func, format!("rho = {rho} outside [0, 1]")));
    }
    Ok(())
}

/// E₀(ρ) = −(1/n) log E_γ[(1 + γ/(1+ρ))^{−nρ}].
pub fn e0_exact(model: &SinrModel, rho: f64, blocklength: f64) -> Result<f64> {
    check_rho("e0_exact", rho)?;
    if rho == 0.0 {
        return Ok(0.0);
    }
    let p = blocklength * rho;
    let knee = (1.0 + rho) / p;
    let extra: Vec<f64> = (-3..=4).map(|e| knee * 10f64.powi(e)).collect();
    let mean = integrate_against_sinr(
        model,
        |g| (-p * (g / (1.0 + rho)).ln_1p()).exp(),
        &extra,
        QuadSettings::with_tol(1e-300, 1e-11),
    )?;
    Ok(-mean.ln() / blocklength)
}

/// E|h|² = α Γ(2) ₂F₁(m, 2; 1; δ/β)/β².
pub fn fade_mean_power(model: &SinrModel) -> Result<f64> {
    let p = &model.fade;
    let (a, b, d) = (p.alpha(), p.beta(), p.delta());
    let f = hyp2f1(p.m as f64, 2.0, 1.0, d / b, SeriesControl::default().with_max_terms(100_000))?;
    Ok(a * f / (b * b))
}

/// ρ log{φ𝒫_s E|h|² + (1+ρ) S + 1 + ρ} − ρψ(k) − ρ log η − ρ log(1+ρ), with S the
/// interferer level chosen by [`InterfererTerm`].
pub fn e0_jensen(model: &SinrModel, rho: f64, interferer: &JensenInterferer) -> Result<f64> {
    check_rho("e0_jensen", rho)?;
    if rho == 0.0 {
        return Ok(0.0);
    }
    let signal = model.scale() * fade_mean_power(model)?;
    let inner = signal + (1.0 + rho) * interferer.level() + 1.0 + rho;
    let fit = model.interference;
    Ok(rho * inner.ln() - rho * digamma(fit.k)? - rho * fit.eta.ln() - rho * rho.ln_1p())
}

pub fn e0(model: &SinrModel, rho: f64, blocklength: f64, method: &E0Method) -> Result<f64> {
    match method {
        E0Method::Exact => e0_exact(model, rho, blocklength),
        E0Method::Jensen(j) => e0_jensen(model, rho, j),
    }
}

/// θ_error = max(0, sup_{ρ∈[0,1]} E₀(ρ) − ρR).
///
/// The exact E₀ is concave in ρ: a 33-point grid brackets the maximum and a
/// ternary search refines it. The Jensen form carries no such guarantee and
/// is maximised on a 257-point grid.
pub fn theta_error(model: &SinrModel, rate_nats: f64, blocklength: f64, method: &E0Method) -> Result<ExponentResult> {
    if !(rate_nats > 0.0) {
        return Err(Error::domain("theta_error", format!("rate = {rate_nats} must be > 0")));
    }
    let objective = |rho: f64| e0(model, rho, blocklength, method).map(|e| (e - rho * rate_nats, e));
    let points = match method {
        E0Method::Exact => 33,
        E0Method::Jensen(_) => 257,
    };
    let grid: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let mut vals = Vec::with_capacity(points);
    for &r in &grid {
        vals.push(objective(r)?);
    }
    let best = (0..points).max_by(|&a, &b| vals[a].0.total_cmp(&vals[b].0)).unwrap_or(0);
    let (mut rho_star, mut best_val) = (grid[best], vals[best]);
    if matches!(method, E0Method::Exact) {
        let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(points - 1)]);
        for _ in 0..100 {
            if hi - lo < 1e-10 {
                break;
            }
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if objective(m1)?.0 < objective(m2)?.0 {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let mid = 0.5 * (lo + hi);
        let v = objective(mid)?;
        if v.0 > best_val.0 {
            rho_star = mid;
            best_val = v;
        }
    }
    if best_val.0 <= 0.0 {
        return Ok(ExponentResult {
            theta_error: 0.0,
            rho_star: 0.0,
            e0_at_rho: 0.0,
        });
    }
    Ok(ExponentResult {
        theta_error: best_val.0,
        rho_star,
        e0_at_rho: best_val.1,
    })
}
