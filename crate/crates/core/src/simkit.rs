//! Monte Carlo ground truth: fade and SINR samplers, the empirical decoding
//! error, a FIFO status-update queue with HARQ-IR service, empirical
//! violation curves, and small statistics helpers (KS distance, batch means).
//!
//! Every random stream is a ChaCha8 generator keyed by the master seed and a
//! stream id, so parallel work is reproducible regardless of scheduling.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ShadowedRicianParams, SinrModel};
use crate::error::{Error, Result};
use crate::fbc::normal_approx_at;
use crate::harq::HarqConfig;
use crate::interference::{aggregate_interference, sample_interference, sample_mhcpp_with, InterferenceConfig};

/// Samples per parallel work unit; each unit owns one RNG stream.
const CHUNK: usize = 1 << 14;

/// Generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub n_packets: usize,
    /// Packets discarded before measuring; defaults to 10% of `n_packets`.
    #[serde(default)]
    pub warmup: Option<usize>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 || self.n_packets < 1 {
            return Err(Error::config("SimConfig", "n_samples and n_packets must be >= 1"));
        }
        if self.warmup_count() >= self.n_packets {
            return Err(Error::config("SimConfig", "warmup must be < n_packets"));
        }
        Ok(())
    }

    pub fn warmup_count(&self) -> usize {
        self.warmup.unwrap_or(self.n_packets / 10)
    }
}

/// One draw of |h|²: Nakagami-m line of sight of power Ω plus circular
/// Gaussian scatter of power 2b.
pub fn sample_channel_gain<R: Rng + ?Sized>(p: &ShadowedRicianParams, rng: &mut R) -> f64 {
    let sd = p.b.sqrt();
    let x: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
    let y: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
    if p.m == 0 || p.omega == 0.0 {
        return x * x + y * y;
    }
    let los_power = Gamma::new(p.m as f64, p.omega / p.m as f64)
        .expect("validated shadowing parameters")
        .sample(rng);
    let phase = 2.0 * PI * rng.random::<f64>();
    let amp = los_power.sqrt();
    let re = amp * phase.cos() + x;
    let im = amp * phase.sin() + y;
    re * re + im * im
}

/// `n` draws of |h|² from stream 0 of `seed`.
pub fn sample_channel_gains(p: &ShadowedRicianParams, seed: u64, n: usize) -> Vec<f64> {
    chunked(seed, n, |rng, len| (0..len).map(|_| sample_channel_gain(p, rng)).collect())
}

/// `n` aggregate-interference draws, each on a fresh field.
pub fn sample_interference_many(cfg: &InterferenceConfig, seed: u64, n: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let parts: Vec<Result<Vec<f64>>> = chunk_plan(n)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = stream_rng(seed, stream);
            (0..len).map(|_| sample_interference(cfg, &mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Where the simulated interference comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceSource {
    /// I_a drawn from the fitted Gamma law of the model.
    Fitted,
    /// I_a built from a sampled hard-core field with Gamma power gains.
    Field(InterferenceConfig),
}

/// SINR generator: sampled fade over sampled interference, optionally plus
/// the unit noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrSampler {
    pub model: SinrModel,
    pub source: InterferenceSource,
    pub noise: bool,
}

impl SinrSampler {
    /// Draw a field realisation (interferer positions); `None` for the fitted law.
    pub fn draw_field<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<Vec<[f64; 2]>>> {
        match &self.source {
            InterferenceSource::Fitted => Ok(None),
            InterferenceSource::Field(cfg) => sample_mhcpp_with(cfg, rng).map(Some),
        }
    }

    /// Interference with fresh fading on a given field.
    pub fn interference<R: Rng + ?Sized>(&self, field: Option<&[[f64; 2]]>, rng: &mut R) -> f64 {
        match (&self.source, field) {
            (InterferenceSource::Field(cfg), Some(points)) => aggregate_interference(cfg, points, rng),
            _ => {
                let fit = self.model.interference;
                Gamma::new(fit.k, fit.eta).expect("validated Gamma fit").sample(rng)
            }
        }
    }

    /// SINR on a given field with fresh fading on every link.
    pub fn sinr_on<R: Rng + ?Sized>(&self, field: Option<&[[f64; 2]]>, rng: &mut R) -> f64 {
        let h = sample_channel_gain(&self.model.fade, rng);
        let i = self.interference(field, rng);
        let noise = if self.noise { 1.0 } else { 0.0 };
        self.model.scale() * h / (i + noise)
    }

    /// SINR with a fresh field and fresh fading.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let field = self.draw_field(rng)?;
        Ok(self.sinr_on(field.as_deref(), rng))
    }

    pub fn sample_many(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        let parts: Vec<Result<Vec<f64>>> = chunk_plan(n)
            .into_par_iter()
            .map(|(stream, len)| {
                let mut rng = stream_rng(seed, stream);
                (0..len).map(|_| self.sample(&mut rng)).collect()
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

fn chunk_plan(n: usize) -> Vec<(u64, usize)> {
    (0..n.div_ceil(CHUNK)).map(|c| (c as u64, CHUNK.min(n - c * CHUNK))).collect()
}

fn chunked<T: Send>(seed: u64, n: usize, work: impl Fn(&mut ChaCha8Rng, usize) -> Vec<T> + Sync) -> Vec<T> {
    chunk_plan(n)
        .into_par_iter()
        .map(|(stream, len)| work(&mut stream_rng(seed, stream), len))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Mean and standard error.
pub fn mean_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("mean_stderr"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Monte Carlo average of Q(√n (C(γ) − R)/√V(γ)) over sampled SINRs.
pub fn empirical_error_prob(sampler: &SinrSampler, rate_nats: f64, blocklength: f64, seed: u64, n_samples: usize) -> Result<(f64, f64)> {
    let gammas = sampler.sample_many(seed, n_samples)?;
    let q: Vec<f64> = gammas.iter().map(|&g| normal_approx_at(g, blocklength, rate_nats)).collect();
    mean_stderr(&q)
}

/// Per-packet record; times in the unit of `symbol_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub packet_id: u64,
    pub arrival: f64,
    pub rounds: u32,
    pub service: f64,
    pub departure: f64,
    pub sojourn: f64,
    pub peak_aoi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiTrace {
    pub records: Vec<PacketRecord>,
    pub warmup: usize,
}

impl AoiTrace {
    /// Records after the warm-up prefix.
    pub fn measured(&self) -> &[PacketRecord] {
        &self.records[self.warmup.min(self.records.len())..]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::config("trace csv", e.to_string()))?;
        }
        w.flush().map_err(|e| Error::config("trace csv", e.to_string()))?;
        Ok(())
    }
}

/// FIFO departures by the Lindley recursion D_u = max(A_u, D_{u−1}) + S_u.
pub fn departures_lindley(arrivals: &[f64], services: &[f64]) -> Vec<f64> {
    let mut prev = f64::NEG_INFINITY;
    arrivals
        .iter()
        .zip(services)
        .map(|(&a, &s)| {
            prev = a.max(prev) + s;
            prev
        })
        .collect()
}

/// FIFO departures by D_u = sup_{v≤u} {A_v + Σ_{w=v}^{u} S_w}; quadratic, for cross-checks.
pub fn departures_sup_form(arrivals: &[f64], services: &[f64]) -> Vec<f64> {
    (0..arrivals.len())
        .map(|u| {
            let mut work = 0.0;
            let mut best = f64::NEG_INFINITY;
            for v in (0..=u).rev() {
                work += services[v];
                best = best.max(arrivals[v] + work);
            }
            best
        })
        .collect()
}

/// Assemble a trace from arrivals, rounds and the per-round duration.
pub fn build_trace(arrivals: &[f64], rounds: &[u32], round_time: f64, warmup: usize) -> AoiTrace {
    let services: Vec<f64> = rounds.iter().map(|&l| l as f64 * round_time).collect();
    let departures = departures_lindley(arrivals, &services);
    let records = (0..arrivals.len())
        .map(|u| {
            let inter = if u == 0 { arrivals[0] } else { arrivals[u] - arrivals[u - 1] };
            let sojourn = departures[u] - arrivals[u];
            PacketRecord {
                packet_id: u as u64,
                arrival: arrivals[u],
                rounds: rounds[u],
                service: services[u],
                departure: departures[u],
                sojourn,
                peak_aoi: inter + sojourn,
            }
        })
        .collect();
    AoiTrace { records, warmup }
}

/// Rounds used by one packet: round l fails with probability
/// Q(√(l n̂)(C(γ_l) − R_in/l)/√V(γ_l)) at a fresh SINR γ_l; a packet still
/// undecoded after L rounds leaves anyway.
pub fn sample_rounds<R: Rng + ?Sized>(sampler: &SinrSampler, hcfg: &HarqConfig, field: Option<&[[f64; 2]]>, rng: &mut R) -> u32 {
    for l in 1..=hcfg.max_rounds {
        if l == hcfg.max_rounds {
            return l;
        }
        let g = sampler.sinr_on(field, rng);
        let lf = l as f64;
        let fail = normal_approx_at(g, lf * hcfg.sub_block_len, hcfg.initial_rate / lf);
        if rng.random::<f64>() >= fail {
            return l;
        }
    }
    hcfg.max_rounds
}

/// Status updates arriving as a Poisson process of rate `lambda_s` (per unit
/// time) served FIFO with HARQ-IR. Interferer positions are drawn once per
/// packet, fading once per round.
pub fn simulate_aoi_queue(lambda_s: f64, sampler: &SinrSampler, hcfg: &HarqConfig, sim: &SimConfig) -> Result<AoiTrace> {
    sim.validate()?;
    hcfg.validate()?;
    if !(lambda_s > 0.0) {
        return Err(Error::config("simulate_aoi_queue", "lambda_s must be > 0"));
    }
    let n = sim.n_packets;
    // arrivals and services come from separate streams so either can be reproduced alone
    let mut arr_rng = stream_rng(sim.seed, u64::MAX);
    let exp = Exp::new(lambda_s).map_err(|e| Error::config("simulate_aoi_queue", e.to_string()))?;
    let mut t = 0.0;
    let arrivals: Vec<f64> = (0..n)
        .map(|_| {
            t += exp.sample(&mut arr_rng);
            t
        })
        .collect();
    let parts: Vec<Result<Vec<u32>>> = chunk_plan(n)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = stream_rng(sim.seed, stream);
            (0..len)
                .map(|_| {
                    let field = sampler.draw_field(&mut rng)?;
                    Ok(sample_rounds(sampler, hcfg, field.as_deref(), &mut rng))
                })
                .collect()
        })
        .collect();
    let mut rounds = Vec::with_capacity(n);
    for p in parts {
        rounds.extend(p?);
    }
    Ok(build_trace(&arrivals, &rounds, hcfg.round_time(), sim.warmup_count()))
}

/// Fraction of measured packets whose peak AoI exceeds A_th/n, per grid point.
pub fn empirical_peak_aoi_violation(trace: &AoiTrace, a_th_grid: &[f64], blocklength: f64) -> Result<Vec<f64>> {
    let recs = trace.measured();
    if recs.is_empty() {
        return Err(Error::Empty("empirical_peak_aoi_violation"));
    }
    let n = recs.len() as f64;
    Ok(a_th_grid
        .iter()
        .map(|a| {
            let tau = a / blocklength;
            recs.iter().filter(|r| r.peak_aoi > tau).count() as f64 / n
        })
        .collect())
}

/// Fraction of measured packets whose sojourn is at least D_th slots.
pub fn empirical_delay_violation(trace: &AoiTrace, d_th_grid: &[f64], slot: f64) -> Result<Vec<f64>> {
    let recs = trace.measured();
    if recs.is_empty() {
        return Err(Error::Empty("empirical_delay_violation"));
    }
    let n = recs.len() as f64;
    Ok(d_th_grid
        .iter()
        .map(|d| {
            let limit = d * slot;
            recs.iter().filter(|r| r.sojourn >= limit * (1.0 - 1e-12)).count() as f64 / n
        })
        .collect())
}

/// Kolmogorov–Smirnov distance between a sample and a reference CDF; the
/// CDF is evaluated in parallel.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64 + Sync) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("ks_statistic"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .reduce(|| 0.0, f64::max))
}

/// Asymptotic one-sample KS critical value at significance 0.01.
pub fn ks_critical_001(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Batch-means estimate: (grand mean, standard error across batches).
pub fn batch_means(values: &[f64], batches: usize) -> Result<(f64, f64)> {
    if batches < 2 || values.len() < batches {
        return Err(Error::Empty("batch_means"));
    }
    let size = values.len() / batches;
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    mean_stderr(&means)
}
