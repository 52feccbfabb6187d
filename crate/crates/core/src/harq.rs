//! HARQ with incremental redundancy: per-round rates, the distribution of the
//! number of rounds under independent round failures, and the expected-round
//! bound used by the service model.

use serde::{Deserialize, Serialize};

use crate::channel::SinrModel;
use crate::error::{Error, Result};
use crate::fbc::{error_prob_asymptotic, error_prob_closed_form, ClosedFormControl};

/// A codeword of `max_rounds` sub-blocks of `sub_block_len` channel uses.
/// After l rounds the receiver has l·n̂ symbols at rate `initial_rate`/l.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarqConfig {
    pub sub_block_len: f64,
    pub max_rounds: u32,
    pub initial_rate: f64,
    pub symbol_time: f64,
}

impl HarqConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sub_block_len >= 1.0 && self.sub_block_len.is_finite()) {
            return Err(Error::config("HarqConfig", "sub_block_len must be >= 1"));
        }
        if self.max_rounds < 1 {
            return Err(Error::config("HarqConfig", "max_rounds must be >= 1"));
        }
        if !(self.initial_rate > 0.0 && self.initial_rate.is_finite()) {
            return Err(Error::config("HarqConfig", "initial_rate must be > 0"));
        }
        if !(self.symbol_time > 0.0 && self.symbol_time.is_finite()) {
            return Err(Error::config("HarqConfig", "symbol_time must be > 0"));
        }
        Ok(())
    }

    /// Duration of one round, n̂T.
    pub fn round_time(&self) -> f64 {
        self.sub_block_len * self.symbol_time
    }

    /// Information per codeword, log M* = n̂ R_in (nats).
    pub fn payload_nats(&self) -> f64 {
        self.sub_block_len * self.initial_rate
    }
}

/// R_l = R_in / l.
pub fn rate_after_round(cfg: &HarqConfig, l: u32) -> Result<f64> {
    if l < 1 || l > cfg.max_rounds {
        return Err(Error::domain(
            "rate_after_round",
            format!("round {l} outside 1..={}", cfg.max_rounds),
        ));
    }
    Ok(cfg.initial_rate / l as f64)
}

fn check_probabilities(errs: &[f64]) -> Result<()> {
    match errs.iter().find(|e| !(**e >= 0.0 && **e <= 1.0)) {
        Some(e) => Err(Error::domain("round_count_pmf", format!("error probability {e} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Distribution of the number of rounds L_s over {1, …, L} given the
/// per-round failure probabilities ε_1..ε_{L−1}, rounds failing independently.
pub fn round_count_pmf(errs: &[f64]) -> Result<Vec<f64>> {
    check_probabilities(errs)?;
    let mut pmf = Vec::with_capacity(errs.len() + 1);
    let mut survive = 1.0;
    for &e in errs {
        pmf.push(survive * (1.0 - e));
        survive *= e;
    }
    pmf.push(survive);
    Ok(pmf)
}

/// E[L_s] ≤ 1 + Σ_{l<L} ε_l.
pub fn expected_rounds_bound(errs: &[f64]) -> f64 {
    1.0 + errs.iter().sum::<f64>()
}

/// Closed-form ε_l for rounds l = 1..L−1, each at blocklength l·n̂ and rate R_in/l.
pub fn round_errors_closed_form(model: &SinrModel, cfg: &HarqConfig, ctl: ClosedFormControl) -> Result<Vec<f64>> {
    (1..cfg.max_rounds)
        .map(|l| {
            let lf = l as f64;
            error_prob_closed_form(model, cfg.initial_rate / lf, cfg.sub_block_len * lf, ctl).map(|e| e.value)
        })
        .collect()
}

/// High-SNR ε_l for rounds l = 1..L−1.
pub fn round_errors_asymptotic(model: &SinrModel, cfg: &HarqConfig) -> Result<Vec<f64>> {
    (1..cfg.max_rounds)
        .map(|l| {
            let lf = l as f64;
            error_prob_asymptotic(model, cfg.initial_rate / lf, cfg.sub_block_len * lf).map(|e| e.value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rates_per_round() {
        let cfg = HarqConfig {
            sub_block_len: 100.0,
            max_rounds: 4,
            initial_rate: 3.0,
            symbol_time: 1e-3,
        };
        assert_eq!(rate_after_round(&cfg, 1).unwrap(), 3.0);
        assert_eq!(rate_after_round(&cfg, 2).unwrap(), 1.5);
        assert_eq!(rate_after_round(&cfg, 4).unwrap(), 0.75);
        assert!(rate_after_round(&cfg, 0).is_err());
        assert!(rate_after_round(&cfg, 5).is_err());
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(round_count_pmf(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(round_count_pmf(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(round_count_pmf(&[1.2]).is_err());
    }

    #[test]
    fn pmf_matches_enumeration() {
        // enumerate the four decode-event outcomes of rounds 1 and 2
        let e = [0.5, 0.5];
        let mut brute = [0.0; 3];
        for fail1 in [false, true] {
            for fail2 in [false, true] {
                let p = (if fail1 { e[0] } else { 1.0 - e[0] }) * (if fail2 { e[1] } else { 1.0 - e[1] });
                let rounds = if !fail1 {
                    1
                } else if !fail2 {
                    2
                } else {
                    3
                };
                brute[rounds - 1] += p;
            }
        }
        assert_eq!(round_count_pmf(&e).unwrap(), brute.to_vec());
        assert_eq!(brute, [0.5, 0.25, 0.25]);
    }

    #[test]
    fn expected_rounds_examples() {
        assert_eq!(expected_rounds_bound(&[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(expected_rounds_bound(&[1.0, 1.0, 1.0]), 4.0);
        let pmf = round_count_pmf(&[0.5, 0.25]).unwrap();
        let exact: f64 = pmf.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
        assert_eq!(expected_rounds_bound(&[0.5, 0.25]), 1.75);
        assert!(exact <= 1.75 + 1e-15);
    }

    proptest! {
        #[test]
        fn pmf_sums_to_one_and_bound_holds(errs in proptest::collection::vec(0.0f64..=1.0, 0..8)) {
            let pmf = round_count_pmf(&errs).unwrap();
            prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let mean: f64 = pmf.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
            prop_assert!(expected_rounds_bound(&errs) >= mean - 1e-12);
        }
    }
}
