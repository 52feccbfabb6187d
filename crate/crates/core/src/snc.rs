//! Mellin-transform network calculus for status updates: (σ, ρ) envelopes,
//! peak-AoI violation bounds for general, renewal and Poisson arrivals,
//! their HARQ-IR instantiations, and the slotted delay-violation bound.
//!
//! Times share the unit in which the symbol time T is given; a peak-AoI threshold of
//! A_th channel uses at blocklength n is the time A_th/n. Mellin transforms
//! are taken of e^{X}, so M_X(1 + θ) = E[e^{θX}].

use serde::{Deserialize, Serialize};

use crate::channel::SinrModel;
use crate::error::{Error, Result};
use crate::fbc::ClosedFormControl;
use crate::harq::{expected_rounds_bound, round_count_pmf, round_errors_asymptotic, round_errors_closed_form, HarqConfig};
use crate::quad::{golden_section_min, log_grid};

/// Affine envelope of a log-MGF: log E[e^{tX}] ≤ t(ρ(t) + σ(t)).
pub struct SigmaRhoEnvelope {
    sigma: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    rho: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl SigmaRhoEnvelope {
    pub fn new(sigma: impl Fn(f64) -> f64 + Send + Sync + 'static, rho: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            sigma: Box::new(sigma),
            rho: Box::new(rho),
        }
    }

    /// Tight envelope of a renewal process: σ ≡ 0, ρ(t) = log E[e^{tX}]/t.
    pub fn from_log_mgf(log_mgf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(|_| 0.0, move |t| log_mgf(t) / t)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        (self.sigma)(t)
    }

    pub fn rho(&self, t: f64) -> f64 {
        (self.rho)(t)
    }
}

impl std::fmt::Debug for SigmaRhoEnvelope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigmaRhoEnvelope").finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AoiQosQuery {
    pub theta_aoi: f64,
    pub a_th: f64,
    pub blocklength: f64,
}

impl AoiQosQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_aoi > 0.0 && self.a_th > 0.0 && self.blocklength > 0.0) {
            return Err(Error::config("AoiQosQuery", "theta_aoi, a_th and blocklength must be > 0"));
        }
        Ok(())
    }

    /// The threshold as a time, A_th/n.
    pub fn threshold_time(&self) -> f64 {
        self.a_th / self.blocklength
    }

    pub fn with_theta(&self, theta_aoi: f64) -> Self {
        Self { theta_aoi, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayQosQuery {
    pub theta_delay: f64,
    pub d_th: f64,
    #[serde(default = "default_delta_s")]
    pub delta_s: f64,
}

fn default_delta_s() -> f64 {
    1.0
}

impl DelayQosQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_delay > 0.0) {
            return Err(Error::config("DelayQosQuery", "theta_delay must be > 0"));
        }
        if !(self.d_th >= 0.0) {
            return Err(Error::config("DelayQosQuery", "d_th must be >= 0"));
        }
        if !(self.delta_s > 0.0 && self.delta_s <= 1.0) {
            return Err(Error::config("DelayQosQuery", "delta_s must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Which reading of the Poisson-arrival peak-AoI bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoissonVariant {
    /// The renewal bound with exponential inter-arrivals, geometric-series
    /// denominator included.
    #[default]
    Renewal,
    /// λ e^{−θA_th/n}/(λ − θ)·M_S(1+θ), without the denominator.
    NoDenominator,
}

impl PoissonVariant {
    pub fn label(self) -> &'static str {
        match self {
            PoissonVariant::Renewal => "renewal",
            PoissonVariant::NoDenominator => "no-denominator",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    pub raw: f64,
    pub theta_used: f64,
    pub stability_margin: f64,
    pub optimized: bool,
    pub notes: Vec<String>,
}

impl BoundResult {
    fn new(raw: f64, theta: f64, margin: f64) -> Self {
        let mut notes = Vec::new();
        if raw > 1.0 {
            notes.push(format!("clamped from {raw:.6e}"));
        }
        Self {
            value: raw.clamp(0.0, 1.0),
            raw,
            theta_used: theta,
            stability_margin: margin,
            optimized: false,
            notes,
        }
    }
}

fn require_stable(func: &'static str, margin: f64) -> Result<()> {
    if margin > 0.0 && margin.is_finite() {
        Ok(())
    } else {
        Err(Error::Stability { func, margin })
    }
}

/// M_I(1+θ) = λ/(λ − θ) for exponential inter-arrival times.
pub fn mellin_exp_interarrival(lambda_s: f64, theta: f64) -> Result<f64> {
    if !(lambda_s > 0.0) {
        return Err(Error::domain("mellin_exp_interarrival", "lambda_s must be > 0"));
    }
    let margin = lambda_s - theta;
    if !(margin > 0.0) || margin < 1e-9 * lambda_s {
        return Err(Error::Stability {
            func: "mellin_exp_interarrival",
            margin,
        });
    }
    Ok(lambda_s / margin)
}

/// Peak-AoI bound for (σ, ρ)-constrained inter-arrival and service processes:
/// ξ e^{−θA_th/n} with
/// ξ = e^{θ(ρ_I(θ)+σ_I(θ))} e^{θ(σ_I(−θ)+ρ_S(θ)+σ_S(θ))} / (1 − e^{−θ(ρ_I(−θ)−ρ_S(θ))}).
pub fn peak_aoi_bound_gg(arr: &SigmaRhoEnvelope, srv: &SigmaRhoEnvelope, q: &AoiQosQuery) -> Result<BoundResult> {
    q.validate()?;
    let t = q.theta_aoi;
    let margin = 1.0 - (-t * (arr.rho(-t) - srv.rho(t))).exp();
    require_stable("peak_aoi_bound_gg", margin)?;
    let log_xi = t * (arr.rho(t) + arr.sigma(t)) + t * (arr.sigma(-t) + srv.rho(t) + srv.sigma(t)) - margin.ln();
    Ok(BoundResult::new((log_xi - t * q.threshold_time()).exp(), t, margin))
}

/// Renewal (GI|GI) form: e^{−θA_th/n} M_I(1+θ) M_S(1+θ)/(1 − M_I(1−θ) M_S(1+θ)).
pub fn peak_aoi_bound_gigi(m_interarrival: f64, m_interarrival_neg: f64, m_service: f64, q: &AoiQosQuery) -> Result<BoundResult> {
    q.validate()?;
    let t = q.theta_aoi;
    let margin = 1.0 - m_interarrival_neg * m_service;
    require_stable("peak_aoi_bound_gigi", margin)?;
    let raw = (-t * q.threshold_time()).exp() * m_interarrival * m_service / margin;
    Ok(BoundResult::new(raw, t, margin))
}

/// Poisson arrivals of rate λ with service Mellin M_S(1+θ).
pub fn peak_aoi_poisson(lambda_s: f64, m_service: f64, q: &AoiQosQuery, variant: PoissonVariant) -> Result<BoundResult> {
    q.validate()?;
    let t = q.theta_aoi;
    let m_plus = mellin_exp_interarrival(lambda_s, t)?;
    match variant {
        PoissonVariant::Renewal => peak_aoi_bound_gigi(m_plus, lambda_s / (lambda_s + t), m_service, q),
        PoissonVariant::NoDenominator => {
            let margin = 1.0 - t / lambda_s;
            let raw = (-t * q.threshold_time()).exp() * m_plus * m_service;
            Ok(BoundResult::new(raw, t, margin))
        }
    }
}

/// Service Mellin exp{θ n̂T(1 + Σ ε_l)} built on the expected-round bound.
pub fn harq_service_mellin(errs: &[f64], hcfg: &HarqConfig, theta: f64) -> f64 {
    (theta * hcfg.round_time() * expected_rounds_bound(errs)).exp()
}

/// E[e^{θ n̂T L_s}] under the independent-round distribution of L_s.
pub fn harq_service_mellin_exact(errs: &[f64], hcfg: &HarqConfig, theta: f64) -> Result<f64> {
    let pmf = round_count_pmf(errs)?;
    Ok(pmf
        .iter()
        .enumerate()
        .map(|(i, p)| p * (theta * hcfg.round_time() * (i + 1) as f64).exp())
        .sum())
}

/// How the HARQ service time enters the Mellin transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServiceMellin {
    /// exp{θ n̂T(1 + Σ ε_l)}: the expected-round bound placed in the exponent.
    #[default]
    ExpectedRounds,
    /// E[e^{θ n̂T L_s}] under the independent-round distribution of L_s.
    ExactPmf,
}

impl ServiceMellin {
    pub fn label(self) -> &'static str {
        match self {
            ServiceMellin::ExpectedRounds => "expected-rounds",
            ServiceMellin::ExactPmf => "exact-pmf",
        }
    }

    pub fn eval(self, errs: &[f64], hcfg: &HarqConfig, theta: f64) -> Result<f64> {
        match self {
            ServiceMellin::ExpectedRounds => Ok(harq_service_mellin(errs, hcfg, theta)),
            ServiceMellin::ExactPmf => harq_service_mellin_exact(errs, hcfg, theta),
        }
    }
}

/// Peak-AoI bound with HARQ-IR service for given round errors ε_1..ε_{L−1}.
/// The threshold is normalised by the sub-block length n̂.
pub fn peak_aoi_harq_from_errs(
    errs: &[f64],
    hcfg: &HarqConfig,
    lambda_s: f64,
    q: &AoiQosQuery,
    variant: PoissonVariant,
    service: ServiceMellin,
) -> Result<BoundResult> {
    let q = AoiQosQuery {
        blocklength: hcfg.sub_block_len,
        ..*q
    };
    let m_s = service.eval(errs, hcfg, q.theta_aoi)?;
    let mut out = peak_aoi_poisson(lambda_s, m_s, &q, variant)?;
    out.notes.push(format!("E[L] bound {:.6}", expected_rounds_bound(errs)));
    Ok(out)
}

/// Peak-AoI bound with HARQ-IR service, ε_l from the closed form.
/// The threshold is normalised by the sub-block length n̂.
pub fn peak_aoi_harq(
    model: &SinrModel,
    hcfg: &HarqConfig,
    lambda_s: f64,
    q: &AoiQosQuery,
    ctl: ClosedFormControl,
    variant: PoissonVariant,
) -> Result<BoundResult> {
    hcfg.validate()?;
    let errs = round_errors_closed_form(model, hcfg, ctl)?;
    peak_aoi_harq_from_errs(&errs, hcfg, lambda_s, q, variant, ServiceMellin::ExpectedRounds)
}

/// [`peak_aoi_harq`] with the high-SNR ε_l.
pub fn peak_aoi_asymptotic(
    model: &SinrModel,
    hcfg: &HarqConfig,
    lambda_s: f64,
    q: &AoiQosQuery,
    variant: PoissonVariant,
) -> Result<BoundResult> {
    hcfg.validate()?;
    let errs = round_errors_asymptotic(model, hcfg)?;
    peak_aoi_harq_from_errs(&errs, hcfg, lambda_s, q, variant, ServiceMellin::ExpectedRounds)
}

/// Mellin transform of a two-point service law: `eps` nothing, otherwise a
/// codeword of `codebook_bits`, evaluated at `order`: ε + (1−ε) e^{(order−1)·bits}.
pub fn service_mellin_fbc(eps: f64, codebook_bits: f64, order: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain("service_mellin_fbc", format!("eps = {eps} outside [0, 1]")));
    }
    Ok(eps + (1.0 - eps) * ((order - 1.0) * codebook_bits).exp())
}

/// Mellin transform at `order` of Poisson(λ) arrivals of `packet_size` each
/// per slot: exp(λ(e^{(order−1)·size} − 1)). `literal` uses the alternative
/// reading exp(λ(e^{(order−1)·size − 1} − 1)).
pub fn poisson_arrival_mellin(lambda: f64, packet_size: f64, order: f64, literal: bool) -> f64 {
    let x = (order - 1.0) * packet_size;
    let inner = if literal { (x - 1.0).exp() - 1.0 } else { x.exp_m1() };
    (lambda * inner).exp()
}

/// Δ_s inf_θ [M_S(1−θ)]^{D_th} / (1 − M_A(1+θ) M_S(1−θ)) over the grid.
pub fn delay_violation_bound(
    arrival_mellin: impl Fn(f64) -> f64,
    service_mellin: impl Fn(f64) -> f64,
    q: &DelayQosQuery,
    theta_grid: &[f64],
) -> Result<BoundResult> {
    q.validate()?;
    let mut best: Option<BoundResult> = None;
    let mut worst_margin = f64::NEG_INFINITY;
    for &t in theta_grid {
        let ms = service_mellin(1.0 - t);
        let margin = 1.0 - arrival_mellin(1.0 + t) * ms;
        worst_margin = worst_margin.max(margin);
        if !(margin > 0.0) {
            continue;
        }
        let raw = q.delta_s * (q.d_th * ms.ln() - margin.ln()).exp();
        if best.as_ref().is_none_or(|b| raw < b.raw) {
            best = Some(BoundResult::new(raw, t, margin));
        }
    }
    best.ok_or(Error::Stability {
        func: "delay_violation_bound",
        margin: worst_margin,
    })
}

/// Delay bound for the slotted erasure server: Poisson(λ) packets per slot,
/// each slot delivering one packet with probability 1 − ε. `q.d_th` counts slots.
pub fn delay_bound_slotted(eps: f64, lambda_slot: f64, q: &DelayQosQuery, theta_grid: &[f64]) -> Result<BoundResult> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain("delay_bound_slotted", format!("eps = {eps} outside [0, 1]")));
    }
    if !(lambda_slot > 0.0) {
        return Err(Error::domain("delay_bound_slotted", "lambda_slot must be > 0"));
    }
    delay_violation_bound(
        |s| poisson_arrival_mellin(lambda_slot, 1.0, s, false),
        |s| eps + (1.0 - eps) * (s - 1.0).exp(),
        q,
        theta_grid,
    )
}

/// Minimise a θ-parametrised bound over (lo, hi): a 64-point log grid, then
/// golden-section refinement inside the bracket of the best grid point.
pub fn optimize_theta(bound: impl Fn(f64) -> Result<BoundResult>, lo: f64, hi: f64) -> Result<BoundResult> {
    let grid = log_grid(lo, hi, 64);
    let evals: Vec<Option<f64>> = grid.iter().map(|&t| bound(t).ok().map(|b| b.raw)).collect();
    let (best_i, _) = evals
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::Stability {
            func: "optimize_theta",
            margin: f64::NEG_INFINITY,
        })?;
    let a = grid[best_i.saturating_sub(1)];
    let b = grid[(best_i + 1).min(grid.len() - 1)];
    let penalised = |t: f64| bound(t).map(|r| r.raw.ln()).unwrap_or(f64::INFINITY);
    let (t_star, v_star) = golden_section_min(penalised, a, b, 1e-10);
    let t = if v_star <= evals[best_i].unwrap().ln() {
        t_star
    } else {
        grid[best_i]
    };
    let mut out = bound(t)?;
    out.optimized = true;
    out.notes.push("theta optimised".into());
    Ok(out)
}

/// Mean peak AoI of an M/G/1 FCFS queue: 1/λ + E[S] + λE[S²]/(2(1 − λE[S])).
pub fn mean_peak_aoi_mg1(lambda_s: f64, mean_service: f64, second_moment_service: f64) -> Result<f64> {
    let rho = lambda_s * mean_service;
    require_stable("mean_peak_aoi_mg1", 1.0 - rho)?;
    Ok(1.0 / lambda_s + mean_service + lambda_s * second_moment_service / (2.0 * (1.0 - rho)))
}

/// First two moments of the HARQ service time n̂T L_s.
pub fn harq_service_moments(errs: &[f64], hcfg: &HarqConfig) -> Result<(f64, f64)> {
    let pmf = round_count_pmf(errs)?;
    let tau = hcfg.round_time();
    let m1 = pmf.iter().enumerate().map(|(i, p)| p * tau * (i + 1) as f64).sum();
    let m2 = pmf.iter().enumerate().map(|(i, p)| p * (tau * (i + 1) as f64).powi(2)).sum();
    Ok((m1, m2))
}
