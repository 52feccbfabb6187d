//! Scenario evaluation: one row of analytic bounds, Monte Carlo estimates and
//! diagnostics per sweep point, and the CSV/JSON writers for those rows.
//!
//! Rows are computed in parallel and assembled in grid order. A failed cell
//! is left empty and its column is listed with the error category in
//! `errors`, so the output never contains NaN or infinities.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::linear_to_db;
use crate::error::{Error, Result};
use crate::fbc::{error_prob_asymptotic, error_prob_closed_form, ClosedFormControl};
use crate::gallager::{theta_error, E0Method, JensenInterferer};
use crate::harq::{round_errors_asymptotic, round_errors_closed_form, HarqConfig};
use crate::quad::log_grid;
use crate::scenario::{Axis, Format, Scenario};
use crate::simkit::{empirical_delay_violation, empirical_error_prob, empirical_peak_aoi_violation, mean_stderr, simulate_aoi_queue};
use crate::snc::{delay_bound_slotted, harq_service_moments, mean_peak_aoi_mg1, optimize_theta, peak_aoi_harq_from_errs, BoundResult};

/// Column order of the CSV output.
pub const HEADER: &[&str] = &[
    "axis",
    "x",
    "seed",
    "tx_snr_db",
    "expected_gbs",
    "sub_block_len",
    "rate_nats",
    "lambda_s",
    "utilization",
    "eps_closed",
    "eps_raw",
    "eps_truncation",
    "eps_flagged",
    "eps_asymptotic",
    "eps_sim",
    "eps_sim_stderr",
    "aoi_bound",
    "aoi_bound_raw",
    "aoi_theta",
    "aoi_margin",
    "aoi_bound_asymptotic",
    "aoi_sim",
    "mean_peak_aoi",
    "mean_peak_aoi_sim",
    "delay_bound",
    "delay_theta",
    "delay_margin",
    "delay_sim",
    "theta_error",
    "rho_star",
    "theta_error_jensen",
    "eps_exponent",
    "poisson_variant",
    "service_variant",
    "interferer_term",
    "errors",
];

/// One evaluated point. Probabilities are clamped to [0, 1] except the
/// `*_raw` columns; times are in scenario time units.
///
/// `aoi_sim` is the empirical Pr{peak AoI > A_th/n̂}; `delay_sim` is the
/// empirical Pr{sojourn ≥ (D_th + 1) rounds}, the extra round covering the
/// offset between continuous arrivals and the slotted delay model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub axis: String,
    pub x: Option<f64>,
    pub seed: u64,
    pub tx_snr_db: Option<f64>,
    pub expected_gbs: Option<f64>,
    pub sub_block_len: Option<f64>,
    pub rate_nats: Option<f64>,
    pub lambda_s: Option<f64>,
    pub utilization: Option<f64>,
    pub eps_closed: Option<f64>,
    pub eps_raw: Option<f64>,
    pub eps_truncation: Option<f64>,
    pub eps_flagged: Option<bool>,
    pub eps_asymptotic: Option<f64>,
    pub eps_sim: Option<f64>,
    pub eps_sim_stderr: Option<f64>,
    pub aoi_bound: Option<f64>,
    pub aoi_bound_raw: Option<f64>,
    pub aoi_theta: Option<f64>,
    pub aoi_margin: Option<f64>,
    pub aoi_bound_asymptotic: Option<f64>,
    pub aoi_sim: Option<f64>,
    pub mean_peak_aoi: Option<f64>,
    pub mean_peak_aoi_sim: Option<f64>,
    pub delay_bound: Option<f64>,
    pub delay_theta: Option<f64>,
    pub delay_margin: Option<f64>,
    pub delay_sim: Option<f64>,
    pub theta_error: Option<f64>,
    pub rho_star: Option<f64>,
    pub theta_error_jensen: Option<f64>,
    pub eps_exponent: Option<f64>,
    pub poisson_variant: String,
    pub service_variant: String,
    pub interferer_term: String,
    pub errors: String,
}

/// Which groups of columns to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outputs {
    pub error: bool,
    pub aoi: bool,
    pub delay: bool,
    pub exponent: bool,
    pub simulate: bool,
}

impl Outputs {
    pub const ANALYTIC: Outputs = Outputs {
        error: true,
        aoi: true,
        delay: true,
        exponent: true,
        simulate: false,
    };

    pub const NONE: Outputs = Outputs {
        error: false,
        aoi: false,
        delay: false,
        exponent: false,
        simulate: false,
    };

    pub fn for_sweep(s: &Scenario) -> Self {
        Outputs {
            simulate: s.simulation.enabled,
            ..Self::ANALYTIC
        }
    }
}

struct Cells {
    failures: Vec<(usize, String)>,
}

impl Cells {
    fn take(&mut self, column: &str, v: Result<f64>) -> Option<f64> {
        let idx = HEADER.iter().position(|h| *h == column).expect("known column");
        match v {
            Ok(x) if x.is_finite() => Some(x),
            Ok(_) => {
                self.failures.push((idx, format!("{column}:nonfinite")));
                None
            }
            Err(e) => {
                self.failures.push((idx, format!("{column}:{}", e.code())));
                None
            }
        }
    }

    fn finish(mut self) -> String {
        self.failures.sort();
        self.failures.dedup();
        self.failures.into_iter().map(|(_, s)| s).collect::<Vec<_>>().join(";")
    }
}

fn theta_policy(fixed: Option<f64>, lambda_s: f64, bound: impl Fn(f64) -> Result<BoundResult>) -> Result<BoundResult> {
    match fixed {
        Some(t) => bound(t),
        None => optimize_theta(bound, lambda_s * 1e-6, lambda_s),
    }
}

fn delay_grid(fixed: Option<f64>) -> Vec<f64> {
    match fixed {
        Some(t) => vec![t],
        None => log_grid(1e-3, 20.0, 400),
    }
}

/// Evaluate one scenario point.
pub fn evaluate(s: &Scenario, axis: Option<Axis>, x: Option<f64>, want: Outputs) -> Row {
    let mut cells = Cells { failures: Vec::new() };
    let hcfg: HarqConfig = s.harq_config();
    let lambda_s = s.traffic.lambda_s;
    let ctl = ClosedFormControl::default();
    let icfg = s.interference_config();
    let mut row = Row {
        axis: axis.map_or("none", Axis::label).to_string(),
        x,
        seed: s.seed,
        tx_snr_db: Some(linear_to_db(s.tx_snr())),
        expected_gbs: Some(icfg.expected_count()),
        sub_block_len: Some(hcfg.sub_block_len),
        rate_nats: Some(hcfg.initial_rate),
        lambda_s: Some(lambda_s),
        utilization: None,
        eps_closed: None,
        eps_raw: None,
        eps_truncation: None,
        eps_flagged: None,
        eps_asymptotic: None,
        eps_sim: None,
        eps_sim_stderr: None,
        aoi_bound: None,
        aoi_bound_raw: None,
        aoi_theta: None,
        aoi_margin: None,
        aoi_bound_asymptotic: None,
        aoi_sim: None,
        mean_peak_aoi: None,
        mean_peak_aoi_sim: None,
        delay_bound: None,
        delay_theta: None,
        delay_margin: None,
        delay_sim: None,
        theta_error: None,
        rho_star: None,
        theta_error_jensen: None,
        eps_exponent: None,
        poisson_variant: s.variants.poisson.label().to_string(),
        service_variant: s.variants.service.label().to_string(),
        interferer_term: match s.variants.interferer_term {
            crate::gallager::InterfererTerm::AmplitudeMean => "amplitude-mean",
            crate::gallager::InterfererTerm::PowerMean => "power-mean",
        }
        .to_string(),
        errors: String::new(),
    };

    let model = s.sinr_model();
    let analytic = want.error || want.aoi || want.delay;
    if analytic {
        match &model {
            Err(e) => {
                cells.take("eps_closed", Err(e.clone()));
            }
            Ok(model) => {
                let eps = error_prob_closed_form(model, hcfg.initial_rate, hcfg.sub_block_len, ctl);
                if let Ok(e) = &eps {
                    row.eps_raw = cells.take("eps_raw", Ok(e.raw));
                    row.eps_truncation = cells.take("eps_truncation", Ok(e.truncation_error));
                    row.eps_flagged = Some(e.flagged);
                }
                row.eps_closed = cells.take("eps_closed", eps.map(|e| e.value));
                row.eps_asymptotic = cells.take(
                    "eps_asymptotic",
                    error_prob_asymptotic(model, hcfg.initial_rate, hcfg.sub_block_len).map(|e| e.value),
                );

                let errs = round_errors_closed_form(model, &hcfg, ctl);
                if want.aoi {
                    let q = s.aoi_query();
                    let bound = errs.as_ref().map_err(Clone::clone).and_then(|errs| {
                        theta_policy(s.aoi.theta, lambda_s, |t| {
                            peak_aoi_harq_from_errs(errs, &hcfg, lambda_s, &q.with_theta(t), s.variants.poisson, s.variants.service)
                        })
                    });
                    if let Ok(b) = &bound {
                        row.aoi_bound_raw = cells.take("aoi_bound_raw", Ok(b.raw));
                        row.aoi_theta = cells.take("aoi_theta", Ok(b.theta_used));
                        row.aoi_margin = cells.take("aoi_margin", Ok(b.stability_margin));
                    }
                    row.aoi_bound = cells.take("aoi_bound", bound.map(|b| b.value));
                    let asym = round_errors_asymptotic(model, &hcfg).and_then(|errs| {
                        theta_policy(s.aoi.theta, lambda_s, |t| {
                            peak_aoi_harq_from_errs(&errs, &hcfg, lambda_s, &q.with_theta(t), s.variants.poisson, s.variants.service)
                        })
                    });
                    row.aoi_bound_asymptotic = cells.take("aoi_bound_asymptotic", asym.map(|b| b.value));
                    let moments = errs
                        .as_ref()
                        .map_err(Clone::clone)
                        .and_then(|errs| harq_service_moments(errs, &hcfg));
                    row.utilization = cells.take("utilization", moments.as_ref().map(|m| lambda_s * m.0).map_err(Clone::clone));
                    row.mean_peak_aoi = cells.take("mean_peak_aoi", moments.and_then(|(m1, m2)| mean_peak_aoi_mg1(lambda_s, m1, m2)));
                }
                if want.delay {
                    let bound = row.eps_closed.ok_or(Error::Empty("first-round error probability")).and_then(|eps| {
                        delay_bound_slotted(eps, lambda_s * hcfg.round_time(), &s.delay_query(), &delay_grid(s.delay.theta))
                    });
                    if let Ok(b) = &bound {
                        row.delay_theta = cells.take("delay_theta", Ok(b.theta_used));
                        row.delay_margin = cells.take("delay_margin", Ok(b.stability_margin));
                    }
                    row.delay_bound = cells.take("delay_bound", bound.map(|b| b.value));
                }
            }
        }
    }

    if want.exponent {
        let n = s.exponent_blocklength();
        let r = s.exponent_rate_nats();
        match s.exponent_model() {
            Err(e) => {
                cells.take("theta_error", Err(e));
            }
            Ok(em) => {
                let exact = theta_error(&em, r, n, &E0Method::Exact);
                row.rho_star = cells.take("rho_star", exact.as_ref().map(|t| t.rho_star).map_err(Clone::clone));
                row.theta_error = cells.take("theta_error", exact.map(|t| t.theta_error));
                let jensen = JensenInterferer::from_config(&icfg, s.variants.interferer_term)
                    .and_then(|j| theta_error(&em, r, n, &E0Method::Jensen(j)));
                row.theta_error_jensen = cells.take("theta_error_jensen", jensen.map(|t| t.theta_error));
                row.eps_exponent = cells.take("eps_exponent", error_prob_closed_form(&em, r, n, ctl).map(|e| e.value));
            }
        }
    }

    if want.simulate {
        let sim = s.sim_config();
        match s.sampler() {
            Err(e) => {
                cells.take("eps_sim", Err(e));
            }
            Ok(sampler) => {
                let eps = empirical_error_prob(&sampler, hcfg.initial_rate, hcfg.sub_block_len, sim.seed, sim.n_samples);
                row.eps_sim_stderr = cells.take("eps_sim_stderr", eps.as_ref().map(|e| e.1).map_err(Clone::clone));
                row.eps_sim = cells.take("eps_sim", eps.map(|e| e.0));
                match simulate_aoi_queue(lambda_s, &sampler, &hcfg, &sim) {
                    Err(e) => {
                        cells.take("aoi_sim", Err(e));
                    }
                    Ok(trace) => {
                        let aoi = empirical_peak_aoi_violation(&trace, &[s.aoi.a_th], hcfg.sub_block_len);
                        row.aoi_sim = cells.take("aoi_sim", aoi.map(|v| v[0]));
                        let delay = empirical_delay_violation(&trace, &[s.delay.d_th + 1.0], hcfg.round_time());
                        row.delay_sim = cells.take("delay_sim", delay.map(|v| v[0]));
                        let peaks: Vec<f64> = trace.measured().iter().map(|r| r.peak_aoi).collect();
                        row.mean_peak_aoi_sim = cells.take("mean_peak_aoi_sim", mean_stderr(&peaks).map(|m| m.0));
                    }
                }
            }
        }
    }

    row.errors = cells.finish();
    row
}

/// Evaluate every grid point of the scenario's sweep axis.
pub fn run_sweep(s: &Scenario) -> Result<Vec<Row>> {
    s.validate()?;
    let axis = s.sweep.axis;
    let want = Outputs::for_sweep(s);
    Ok(s.sweep
        .grid
        .par_iter()
        .map(|&x| evaluate(&s.at(axis, x), Some(axis), Some(x), want))
        .collect())
}

pub fn write_csv<W: Write>(rows: &[Row], writer: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("write_csv"));
    }
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::io("csv", e))?;
    }
    w.flush().map_err(|e| Error::io("csv", e))
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<Row>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<std::result::Result<Vec<Row>, _>>()
        .map_err(|e| Error::io("csv", e))
}

pub fn write_json<W: Write>(rows: &[Row], mut writer: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("write_json"));
    }
    serde_json::to_writer_pretty(&mut writer, rows).map_err(|e| Error::io("json", e))?;
    writer.write_all(b"\n").map_err(|e| Error::io("json", e))
}

pub fn read_json<R: Read>(reader: R) -> Result<Vec<Row>> {
    serde_json::from_reader(reader).map_err(|e| Error::io("json", e))
}

pub fn write_rows<W: Write>(rows: &[Row], format: Format, writer: W) -> Result<()> {
    match format {
        Format::Csv => write_csv(rows, writer),
        Format::Json => write_json(rows, writer),
    }
}

/// Write rows to `path`, replacing any existing file.
pub fn emit(rows: &[Row], format: Format, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_rows(rows, format, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(axis: Axis, grid: Vec<f64>) -> Scenario {
        let mut s = Scenario::default();
        s.sweep.axis = axis;
        s.sweep.grid = grid;
        s
    }

    #[test]
    fn header_matches_row_fields() {
        let row = evaluate(&Scenario::default(), None, None, Outputs::NONE);
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let rows = run_sweep(&quick(Axis::ATh, vec![1000.0, 2000.0])).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
        let mut buf = Vec::new();
        write_json(&rows, &mut buf).unwrap();
        assert_eq!(read_json(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn failures_stay_in_row() {
        // arrival rate beyond the service rate: AoI and delay bounds are unstable
        let mut s = quick(Axis::LambdaS, vec![1.0, 50.0]);
        s.aoi.theta = Some(0.5);
        let rows = run_sweep(&s).unwrap();
        assert!(rows[0].errors.is_empty(), "{}", rows[0].errors);
        assert!(rows[1].aoi_bound.is_none());
        assert!(rows[1].errors.contains("aoi_bound:stability"), "{}", rows[1].errors);
        assert!(rows[1].eps_closed.is_some());
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.to_lowercase().contains("nan") && !text.contains("inf"));
    }

    #[test]
    fn empty_table_rejected() {
        assert!(write_csv(&[], Vec::new()).is_err());
        assert!(write_json(&[], Vec::new()).is_err());
    }
}
