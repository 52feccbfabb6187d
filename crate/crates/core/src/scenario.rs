//! Scenario files: a strict TOML schema bundling every model parameter, the
//! QoS queries, simulation settings and one sweep axis.
//!
//! Powers are given in dBm and converted to SNRs against `noise_power_dbm`.
//! Times are in units of the symbol time scaled by `harq.symbol_time`; the
//! AoI threshold `aoi.a_th` is in channel uses and is compared as A_th/n̂.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, LinkGeometry, ShadowedRicianParams, ShadowingPreset, SinrModel};
use crate::error::{Error, Result};
use crate::fbc::LogBase;
use crate::gallager::InterfererTerm;
use crate::harq::HarqConfig;
use crate::interference::{aggregate_moments, gamma_fit, InterferenceConfig};
use crate::simkit::{InterferenceSource, SimConfig, SinrSampler};
use crate::snc::{AoiQosQuery, DelayQosQuery, PoissonVariant, ServiceMellin};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub satellite: SatelliteSection,
    #[serde(default)]
    pub interference: InterferenceSection,
    #[serde(default)]
    pub harq: HarqSection,
    #[serde(default)]
    pub traffic: TrafficSection,
    #[serde(default)]
    pub aoi: AoiSection,
    #[serde(default)]
    pub delay: DelaySection,
    #[serde(default)]
    pub exponent: ExponentSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub variants: VariantSection,
    pub sweep: SweepAxis,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SatelliteSection {
    pub carrier_hz: f64,
    pub distance_m: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub shadowing: ShadowingPreset,
    /// Overrides `shadowing` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom_shadowing: Option<ShadowedRicianParams>,
}

impl Default for SatelliteSection {
    fn default() -> Self {
        Self {
            carrier_hz: 2e9,
            distance_m: 6e5,
            tx_gain_dbi: 20.0,
            rx_gain_dbi: 20.0,
            tx_power_dbm: 30.0,
            noise_power_dbm: -114.0,
            shadowing: ShadowingPreset::Average,
            custom_shadowing: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceSection {
    /// Retained intensity of the hard-core field (per m²).
    pub lambda_m: f64,
    pub d_min: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub path_loss_exp: f64,
    pub tx_power_dbm: f64,
    pub rayleigh_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pg_shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pg_scale: Option<f64>,
}

impl Default for InterferenceSection {
    fn default() -> Self {
        Self {
            lambda_m: 1e-7,
            d_min: 500.0,
            r_in: 2000.0,
            r_out: 10000.0,
            path_loss_exp: 3.5,
            tx_power_dbm: 20.0,
            rayleigh_scale: std::f64::consts::FRAC_1_SQRT_2,
            pg_shape: None,
            pg_scale: None,
        }
    }
}

impl InterferenceSection {
    pub fn annulus_area(&self) -> f64 {
        PI * (self.r_out * self.r_out - self.r_in * self.r_in)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarqSection {
    pub sub_block_len: f64,
    pub max_rounds: u32,
    pub initial_rate: f64,
    pub rate_unit: LogBase,
    pub symbol_time: f64,
}

impl Default for HarqSection {
    fn default() -> Self {
        Self {
            sub_block_len: 200.0,
            max_rounds: 4,
            initial_rate: 1.0,
            rate_unit: LogBase::Nats,
            symbol_time: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    /// Status-update arrival rate per unit time.
    pub lambda_s: f64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self { lambda_s: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AoiSection {
    /// Fixed QoS exponent; the bound is minimised over θ when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Threshold in channel uses.
    pub a_th: f64,
}

impl Default for AoiSection {
    fn default() -> Self {
        Self { theta: None, a_th: 2000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelaySection {
    /// Fixed QoS exponent; the bound is minimised over θ when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Threshold in HARQ rounds (slots of n̂T).
    pub d_th: f64,
    pub delta_s: f64,
}

impl Default for DelaySection {
    fn default() -> Self {
        Self {
            theta: None,
            d_th: 5.0,
            delta_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentSection {
    /// Set the satellite power so that φ𝒫_s E|h|²/(E[I_a] + 1) equals `avg_snr_db`.
    pub use_avg_snr: bool,
    pub avg_snr_db: f64,
    /// Defaults to `harq.sub_block_len`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocklength: Option<f64>,
    /// Defaults to `harq.initial_rate`, in `harq.rate_unit`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

impl Default for ExponentSection {
    fn default() -> Self {
        Self {
            use_avg_snr: true,
            avg_snr_db: 5.0,
            blocklength: None,
            rate: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimInterference {
    /// Sampled hard-core field with Gamma power gains.
    #[default]
    Field,
    /// The moment-matched Gamma law.
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub enabled: bool,
    pub n_samples: usize,
    pub n_packets: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
    pub interference: SimInterference,
    pub noise: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            enabled: false,
            n_samples: 100_000,
            n_packets: 100_000,
            warmup: None,
            interference: SimInterference::Field,
            noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariantSection {
    pub poisson: PoissonVariant,
    pub service: ServiceMellin,
    pub interferer_term: InterfererTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    ThetaAoi,
    ATh,
    Blocklength,
    /// Expected number of interferers on the annulus; sets λ_M.
    GbsCount,
    LambdaS,
    DTh,
    ThetaDelay,
    /// HARQ initial rate and exponent rate together.
    Rate,
    TxPowerDbm,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::ThetaAoi => "theta-aoi",
            Axis::ATh => "a-th",
            Axis::Blocklength => "blocklength",
            Axis::GbsCount => "gbs-count",
            Axis::LambdaS => "lambda-s",
            Axis::DTh => "d-th",
            Axis::ThetaDelay => "theta-delay",
            Axis::Rate => "rate",
            Axis::TxPowerDbm => "tx-power-dbm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub axis: Axis,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub format: Format,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            satellite: SatelliteSection::default(),
            interference: InterferenceSection::default(),
            harq: HarqSection::default(),
            traffic: TrafficSection::default(),
            aoi: AoiSection::default(),
            delay: DelaySection::default(),
            exponent: ExponentSection::default(),
            simulation: SimulationSection::default(),
            variants: VariantSection::default(),
            sweep: SweepAxis {
                axis: Axis::ThetaAoi,
                grid: vec![0.05, 0.1, 0.2, 0.4],
            },
            output: OutputSection::default(),
        }
    }
}

fn positive(what: &'static str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(what, format!("{name} = {v} must be finite and > 0")))
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::config("scenario", e.message().to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("scenario", e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.sweep.grid;
        if g.is_empty() {
            return Err(Error::config("sweep", "grid must be nonempty"));
        }
        if g.iter().any(|x| !x.is_finite()) || g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("sweep", "grid must be finite and strictly increasing"));
        }
        let sat = &self.satellite;
        positive("satellite", "carrier_hz", sat.carrier_hz)?;
        positive("satellite", "distance_m", sat.distance_m)?;
        if let Some(p) = &sat.custom_shadowing {
            p.validate()?;
        }
        positive("traffic", "lambda_s", self.traffic.lambda_s)?;
        positive("aoi", "a_th", self.aoi.a_th)?;
        if let Some(t) = self.aoi.theta {
            positive("aoi", "theta", t)?;
        }
        if let Some(t) = self.delay.theta {
            positive("delay", "theta", t)?;
        }
        if !(self.delay.d_th >= 0.0) {
            return Err(Error::config("delay", "d_th must be >= 0"));
        }
        if !(self.delay.delta_s > 0.0 && self.delay.delta_s <= 1.0) {
            return Err(Error::config("delay", "delta_s must lie in (0, 1]"));
        }
        if let Some(n) = self.exponent.blocklength {
            positive("exponent", "blocklength", n)?;
        }
        if let Some(r) = self.exponent.rate {
            positive("exponent", "rate", r)?;
        }
        self.interference_config().validate()?;
        self.harq_config().validate()?;
        self.sim_config().validate()?;
        Ok(())
    }

    /// The scenario with the sweep variable set to `x`.
    pub fn at(&self, axis: Axis, x: f64) -> Self {
        let mut s = self.clone();
        match axis {
            Axis::ThetaAoi => s.aoi.theta = Some(x),
            Axis::ATh => s.aoi.a_th = x,
            Axis::Blocklength => s.harq.sub_block_len = x,
            Axis::GbsCount => s.interference.lambda_m = x / s.interference.annulus_area(),
            Axis::LambdaS => s.traffic.lambda_s = x,
            Axis::DTh => s.delay.d_th = x,
            Axis::ThetaDelay => s.delay.theta = Some(x),
            Axis::Rate => {
                s.harq.initial_rate = x;
                s.exponent.rate = Some(x);
            }
            Axis::TxPowerDbm => s.satellite.tx_power_dbm = x,
        }
        s
    }

    pub fn link_geometry(&self) -> LinkGeometry {
        LinkGeometry {
            carrier_hz: self.satellite.carrier_hz,
            distance_m: self.satellite.distance_m,
            tx_gain_dbi: self.satellite.tx_gain_dbi,
            rx_gain_dbi: self.satellite.rx_gain_dbi,
        }
    }

    pub fn fade(&self) -> ShadowedRicianParams {
        self.satellite
            .custom_shadowing
            .unwrap_or_else(|| ShadowedRicianParams::preset(self.satellite.shadowing))
    }

    /// 𝒫_s = P_s/σ².
    pub fn tx_snr(&self) -> f64 {
        db_to_linear(self.satellite.tx_power_dbm - self.satellite.noise_power_dbm)
    }

    pub fn interference_config(&self) -> InterferenceConfig {
        let i = &self.interference;
        InterferenceConfig {
            lambda_m: i.lambda_m,
            d_min: i.d_min,
            r_in: i.r_in,
            r_out: i.r_out,
            path_loss_exp: i.path_loss_exp,
            tx_snr_t: db_to_linear(i.tx_power_dbm - self.satellite.noise_power_dbm),
            rayleigh_scale: i.rayleigh_scale,
            pg_shape: i.pg_shape,
            pg_scale: i.pg_scale,
        }
    }

    /// SINR law with the interference replaced by its moment-matched Gamma fit.
    pub fn sinr_model(&self) -> Result<SinrModel> {
        let (mean, var) = aggregate_moments(&self.interference_config())?;
        let model = SinrModel {
            sat_link: self.link_geometry(),
            fade: self.fade(),
            tx_snr: self.tx_snr(),
            interference: gamma_fit(mean, var)?,
        };
        model.validate()?;
        Ok(model)
    }

    /// SINR law for exponent studies; with `use_avg_snr` the satellite power
    /// is reset so that the mean signal over mean interference plus noise,
    /// φ𝒫_s E|h|²/(E[I_a] + 1), equals `avg_snr_db`.
    pub fn exponent_model(&self) -> Result<SinrModel> {
        let model = self.sinr_model()?;
        if !self.exponent.use_avg_snr {
            return Ok(model);
        }
        let phi = model.scale() / model.tx_snr;
        let target = db_to_linear(self.exponent.avg_snr_db) * (model.interference.mean() + 1.0);
        Ok(model.with_tx_snr(target / (phi * model.fade.mean_power())))
    }

    pub fn harq_config(&self) -> HarqConfig {
        let h = &self.harq;
        HarqConfig {
            sub_block_len: h.sub_block_len,
            max_rounds: h.max_rounds,
            initial_rate: h.rate_unit.to_nats(h.initial_rate),
            symbol_time: h.symbol_time,
        }
    }

    pub fn exponent_blocklength(&self) -> f64 {
        self.exponent.blocklength.unwrap_or(self.harq.sub_block_len)
    }

    pub fn exponent_rate_nats(&self) -> f64 {
        self.harq.rate_unit.to_nats(self.exponent.rate.unwrap_or(self.harq.initial_rate))
    }

    /// AoI query; θ is a placeholder when the bound is to be optimised.
    pub fn aoi_query(&self) -> AoiQosQuery {
        AoiQosQuery {
            theta_aoi: self.aoi.theta.unwrap_or(1.0),
            a_th: self.aoi.a_th,
            blocklength: self.harq.sub_block_len,
        }
    }

    pub fn delay_query(&self) -> DelayQosQuery {
        DelayQosQuery {
            theta_delay: self.delay.theta.unwrap_or(1.0),
            d_th: self.delay.d_th,
            delta_s: self.delay.delta_s,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            n_samples: self.simulation.n_samples,
            n_packets: self.simulation.n_packets,
            warmup: self.simulation.warmup,
        }
    }

    pub fn sampler(&self) -> Result<SinrSampler> {
        let source = match self.simulation.interference {
            SimInterference::Field => InterferenceSource::Field(self.interference_config()),
            SimInterference::Fitted => InterferenceSource::Fitted,
        };
        Ok(SinrSampler {
            model: self.sinr_model()?,
            source,
            noise: self.simulation.noise,
        })
    }
}
