//! Terrestrial interferer field: a Matérn type-II hard-core process on an
//! annulus around the receiver, the aggregate interference it produces, its
//! first two cumulants and the moment-matched Gamma law.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadSettings};
use crate::specfun::{ln_gamma, regularized_lower_gamma, SeriesControl};

/// Geometry and power parameters of the interfering ground stations.
///
/// `lambda_m` is the intensity of the retained (hard-core) field. Powers are
/// normalised by the receiver noise power. The per-link power gain is
/// Gamma(`pg_shape`, `pg_scale`); leaving both unset gives Rayleigh fading with
/// amplitude scale `rayleigh_scale`, i.e. Gamma(1, 2ς²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceConfig {
    pub lambda_m: f64,
    pub d_min: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub path_loss_exp: f64,
    pub tx_snr_t: f64,
    #[serde(default = "default_rayleigh_scale")]
    pub rayleigh_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pg_shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pg_scale: Option<f64>,
}

fn default_rayleigh_scale() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

impl InterferenceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_m", self.lambda_m),
            ("r_in", self.r_in),
            ("r_out", self.r_out),
            ("tx_snr_t", self.tx_snr_t),
            ("rayleigh_scale", self.rayleigh_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config("InterferenceConfig", format!("{name} = {v} must be finite and > 0")));
            }
        }
        if !(self.d_min >= 0.0 && self.d_min.is_finite()) {
            return Err(Error::config("InterferenceConfig", "d_min must be finite and >= 0"));
        }
        if self.r_in >= self.r_out {
            return Err(Error::config("InterferenceConfig", "r_in must be < r_out"));
        }
        if !(self.path_loss_exp > 2.0) {
            return Err(Error::config("InterferenceConfig", "path_loss_exp must be > 2"));
        }
        let (k, eta) = self.power_gain();
        if !(k > 0.0 && eta > 0.0) {
            return Err(Error::config("InterferenceConfig", "power-gain shape and scale must be > 0"));
        }
        self.parent_intensity()?;
        Ok(())
    }

    /// Gamma (shape, scale) of the per-link power gain.
    pub fn power_gain(&self) -> (f64, f64) {
        let s2 = self.rayleigh_scale * self.rayleigh_scale;
        (self.pg_shape.unwrap_or(1.0), self.pg_scale.unwrap_or(2.0 * s2))
    }

    /// Intensity of the parent Poisson field whose type-II thinning retains
    /// `lambda_m`: solves λ_M = (1 − e^{−λ_p π d²})/(π d²).
    pub fn parent_intensity(&self) -> Result<f64> {
        let area = PI * self.d_min * self.d_min;
        if area == 0.0 {
            return Ok(self.lambda_m);
        }
        let packed = self.lambda_m * area;
        if packed >= 1.0 {
            return Err(Error::config(
                "InterferenceConfig",
                format!("lambda_m * pi * d_min^2 = {packed} exceeds the type-II packing limit 1"),
            ));
        }
        Ok(-(-packed).ln_1p() / area)
    }

    /// Expected number of interferers on the annulus.
    pub fn expected_count(&self) -> f64 {
        self.lambda_m * PI * (self.r_out * self.r_out - self.r_in * self.r_in)
    }
}

/// Retention probability of a type-II thinning with parent intensity `lambda_p`.
pub fn retention_probability(lambda_p: f64, d_min: f64) -> f64 {
    let x = lambda_p * PI * d_min * d_min;
    if x < 1e-12 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Moment-matched Gamma law of the aggregate interference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaFit {
    pub k: f64,
    pub eta: f64,
}

impl GammaFit {
    pub fn new(k: f64, eta: f64) -> Result<Self> {
        if !(k > 0.0 && eta > 0.0 && k.is_finite() && eta.is_finite()) {
            return Err(Error::domain("GammaFit", format!("k = {k}, eta = {eta} must be finite and > 0")));
        }
        Ok(Self { k, eta })
    }

    pub fn mean(&self) -> f64 {
        self.k * self.eta
    }

    pub fn variance(&self) -> f64 {
        self.k * self.eta * self.eta
    }

    pub fn pdf(&self, x: f64) -> f64 {
        interference_pdf(*self, x)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        regularized_lower_gamma(self.k, x / self.eta, SeriesControl::default().with_max_terms(100_000))
    }
}

/// Gamma parameters from mean and variance.
pub fn gamma_fit(mean: f64, variance: f64) -> Result<GammaFit> {
    if !(mean > 0.0 && variance > 0.0) {
        return Err(Error::domain(
            "gamma_fit",
            format!("mean = {mean}, variance = {variance} must be > 0"),
        ));
    }
    GammaFit::new(mean * mean / variance, variance / mean)
}

/// Gamma density x^{k−1} e^{−x/η} / (Γ(k) η^k).
pub fn interference_pdf(fit: GammaFit, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return match fit.k.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0 / fit.eta,
            _ => 0.0,
        };
    }
    let y = x / fit.eta;
    ((fit.k - 1.0) * y.ln() - y - ln_gamma(fit.k)).exp() / fit.eta
}

/// Mean and variance of the aggregate interference over the annulus
/// (Campbell's theorem with Gamma power gains).
pub fn aggregate_moments(cfg: &InterferenceConfig) -> Result<(f64, f64)> {
    let a = cfg.path_loss_exp;
    if (2.0 - a).abs() < 1e-12 || (1.0 - a).abs() < 1e-12 {
        return Err(Error::domain(
            "aggregate_moments",
            format!("path_loss_exp = {a} makes a radial integral degenerate"),
        ));
    }
    let (k, eta) = cfg.power_gain();
    let lambda = cfg.lambda_m;
    let radial = |p: f64| (cfg.r_out.powf(p) - cfg.r_in.powf(p)) / p;
    let mean = 2.0 * PI * lambda * cfg.tx_snr_t * k * eta * radial(2.0 - a);
    let second_moment_gain = k * (1.0 + k) * eta * eta;
    let variance = 2.0 * PI * lambda * cfg.tx_snr_t * cfg.tx_snr_t * second_moment_gain * radial(2.0 - 2.0 * a);
    Ok((mean, variance))
}

/// log Φ(ω) of the aggregate interference as (real, imaginary) parts.
pub fn log_char_fn(cfg: &InterferenceConfig, omega: f64) -> Result<(f64, f64)> {
    let (k, eta) = cfg.power_gain();
    let scale = 2.0 * PI * cfg.lambda_m;
    let x_at = |r: f64| omega * cfg.tx_snr_t * r.powf(-cfg.path_loss_exp) * eta;
    let settings = QuadSettings::with_tol(0.0, 1e-12);
    let re = integrate(
        |r| {
            let x = x_at(r);
            let log_mod = -0.5 * k * (x * x).ln_1p();
            let phase = k * x.atan();
            let half = (0.5 * phase).sin();
            (log_mod.exp_m1() * phase.cos() - 2.0 * half * half) * r
        },
        cfg.r_in,
        cfg.r_out,
        settings,
    )?
    .value;
    let im = integrate(
        |r| {
            let x = x_at(r);
            (-0.5 * k * (x * x).ln_1p()).exp() * (k * x.atan()).sin() * r
        },
        cfg.r_in,
        cfg.r_out,
        settings,
    )?
    .value;
    Ok((scale * re, scale * im))
}

/// First two cumulants read off the characteristic function by central
/// differences at the origin.
pub fn cumulants_from_char_fn(cfg: &InterferenceConfig) -> Result<(f64, f64)> {
    let (_, eta) = cfg.power_gain();
    let strongest = cfg.tx_snr_t * cfg.r_in.powf(-cfg.path_loss_exp) * eta;
    let h = 1e-3 / strongest;
    let (re_p, im_p) = log_char_fn(cfg, h)?;
    let (re_m, im_m) = log_char_fn(cfg, -h)?;
    Ok(((im_p - im_m) / (2.0 * h), -(re_p + re_m) / (h * h)))
}

/// One realisation of the hard-core field; points are returned only inside the annulus.
pub fn sample_mhcpp(cfg: &InterferenceConfig, seed: u64) -> Result<Vec<[f64; 2]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_mhcpp_with(cfg, &mut rng)
}

/// [`sample_mhcpp`] drawing from a caller-supplied generator.
pub fn sample_mhcpp_with<R: Rng + ?Sized>(cfg: &InterferenceConfig, rng: &mut R) -> Result<Vec<[f64; 2]>> {
    let lambda_p = cfg.parent_intensity()?;
    // dilate the window so points near the outer rim see all their competitors
    let window = cfg.r_out + cfg.d_min;
    let mean_count = lambda_p * PI * window * window;
    let count = if mean_count > 0.0 {
        Poisson::new(mean_count)
            .map_err(|e| Error::config("InterferenceConfig", e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    let parents: Vec<([f64; 2], f64)> = (0..count)
        .map(|_| {
            let r = window * rng.random::<f64>().sqrt();
            let t = 2.0 * PI * rng.random::<f64>();
            ([r * t.cos(), r * t.sin()], rng.random::<f64>())
        })
        .collect();
    let d2 = cfg.d_min * cfg.d_min;
    let (in2, out2) = (cfg.r_in * cfg.r_in, cfg.r_out * cfg.r_out);
    let kept = parents
        .iter()
        .filter(|(p, mark)| {
            let rr = p[0] * p[0] + p[1] * p[1];
            if rr < in2 || rr > out2 {
                return false;
            }
            !parents.iter().any(|(q, other)| {
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                other < mark && dx * dx + dy * dy < d2
            })
        })
        .map(|(p, _)| *p)
        .collect();
    Ok(kept)
}

/// Aggregate interference Σ 𝒫_t g_j d_j^{−α̃} of a realised field with fresh power gains.
pub fn aggregate_interference<R: Rng + ?Sized>(cfg: &InterferenceConfig, points: &[[f64; 2]], rng: &mut R) -> f64 {
    let (k, eta) = cfg.power_gain();
    let gain = Gamma::new(k, eta).expect("validated power-gain parameters");
    let half_exp = -0.5 * cfg.path_loss_exp;
    points
        .iter()
        .map(|p| {
            let rr = p[0] * p[0] + p[1] * p[1];
            cfg.tx_snr_t * gain.sample(rng) * rr.powf(half_exp)
        })
        .sum()
}

/// A fresh field and fading realisation of the aggregate interference.
pub fn sample_interference<R: Rng + ?Sized>(cfg: &InterferenceConfig, rng: &mut R) -> Result<f64> {
    let points = sample_mhcpp_with(cfg, rng)?;
    Ok(aggregate_interference(cfg, &points, rng))
}
