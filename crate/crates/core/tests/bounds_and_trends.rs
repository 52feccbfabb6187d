//! Structural properties of the tail bounds: specialisation between the
//! general, renewal and Poisson forms, monotonicity in thresholds and
//! blocklength, and convergence of the high-SNR forms.

use proptest::prelude::*;
use stqos::fbc::{error_prob_asymptotic, error_prob_closed_form, ClosedFormControl};
use stqos::harq::HarqConfig;
use stqos::scenario::Scenario;
use stqos::snc::{
    delay_bound_slotted, harq_service_mellin, peak_aoi_asymptotic, peak_aoi_bound_gg, peak_aoi_bound_gigi, peak_aoi_harq, peak_aoi_poisson,
    AoiQosQuery, DelayQosQuery, PoissonVariant, SigmaRhoEnvelope,
};

fn hcfg(n: f64) -> HarqConfig {
    HarqConfig {
        sub_block_len: n,
        ..Scenario::default().harq_config()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn general_renewal_and_poisson_forms_coincide(
        lambda in 0.2f64..5.0,
        frac in 0.05f64..0.9,
        rounds in 1.0f64..1.5,
        tau in 0.01f64..0.5,
        a_th in 100.0f64..5000.0,
    ) {
        let theta = frac * lambda;
        let m_s = (theta * tau * rounds).exp();
        let q = AoiQosQuery { theta_aoi: theta, a_th, blocklength: 100.0 };
        let gigi = peak_aoi_bound_gigi(lambda / (lambda - theta), lambda / (lambda + theta), m_s, &q);
        let poisson = peak_aoi_poisson(lambda, m_s, &q, PoissonVariant::Renewal);
        let arr = SigmaRhoEnvelope::from_log_mgf(move |t| (lambda / (lambda - t)).ln());
        let srv = SigmaRhoEnvelope::from_log_mgf(move |t| t * tau * rounds);
        let gg = peak_aoi_bound_gg(&arr, &srv, &q);
        match (gigi, poisson, gg) {
            (Ok(a), Ok(b), Ok(c)) => {
                prop_assert!((a.raw - b.raw).abs() <= 1e-10 * a.raw);
                prop_assert!((a.raw - c.raw).abs() <= 1e-10 * a.raw);
            }
            (Err(_), Err(_), Err(_)) => {}
            other => prop_assert!(false, "forms disagree on stability: {:?}", other),
        }
    }

    #[test]
    fn literal_reading_drops_the_denominator(lambda in 0.2f64..5.0, frac in 0.05f64..0.9, m_s in 1.0f64..1.2) {
        let theta = frac * lambda;
        let q = AoiQosQuery { theta_aoi: theta, a_th: 800.0, blocklength: 100.0 };
        let lit = peak_aoi_poisson(lambda, m_s, &q, PoissonVariant::NoDenominator).unwrap();
        let direct = (-theta * 8.0f64).exp() * lambda / (lambda - theta) * m_s;
        prop_assert!((lit.raw - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn aoi_bound_nonincreasing_in_threshold(theta in 0.05f64..0.9, a1 in 10.0f64..5000.0, da in 0.0f64..2000.0) {
        let errs = [0.07, 0.02, 0.01];
        let h = hcfg(200.0);
        let m_s = harq_service_mellin(&errs, &h, theta);
        let q1 = AoiQosQuery { theta_aoi: theta, a_th: a1, blocklength: 200.0 };
        let q2 = AoiQosQuery { a_th: a1 + da, ..q1 };
        if let (Ok(b1), Ok(b2)) = (peak_aoi_poisson(1.0, m_s, &q1, PoissonVariant::Renewal), peak_aoi_poisson(1.0, m_s, &q2, PoissonVariant::Renewal)) {
            prop_assert!(b2.raw <= b1.raw * (1.0 + 1e-12));
        }
    }

    #[test]
    fn delay_bound_nonincreasing_in_threshold(eps in 0.0f64..0.3, load in 0.05f64..0.6, d1 in 0.0f64..20.0, dd in 0.0f64..10.0) {
        let grid = stqos::quad::log_grid(1e-3, 20.0, 200);
        let q1 = DelayQosQuery { theta_delay: 1.0, d_th: d1, delta_s: 1.0 };
        let q2 = DelayQosQuery { d_th: d1 + dd, ..q1 };
        let b1 = delay_bound_slotted(eps, load, &q1, &grid).unwrap();
        let b2 = delay_bound_slotted(eps, load, &q2, &grid).unwrap();
        prop_assert!(b2.raw <= b1.raw * (1.0 + 1e-12));
    }
}

#[test]
fn harq_bounds_nondecreasing_in_blocklength() {
    let s = Scenario::default();
    let model = s.sinr_model().unwrap();
    let mut prev = (0.0, 0.0);
    for n in [50.0, 100.0, 150.0, 200.0, 300.0, 400.0] {
        let q = AoiQosQuery {
            theta_aoi: 0.5,
            a_th: 2000.0,
            blocklength: n,
        };
        let exact = peak_aoi_harq(&model, &hcfg(n), 1.0, &q, ClosedFormControl::default(), PoissonVariant::Renewal).unwrap();
        let asym = peak_aoi_asymptotic(&model, &hcfg(n), 1.0, &q, PoissonVariant::Renewal).unwrap();
        assert!(exact.raw >= prev.0 && asym.raw >= prev.1, "n {n}");
        prev = (exact.raw, asym.raw);
    }
}

#[test]
fn high_snr_forms_converge() {
    let base = Scenario::default();
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for p in [20.0, 30.0, 40.0, 50.0, 60.0] {
        let mut s = base.clone();
        s.satellite.tx_power_dbm = p;
        let model = s.sinr_model().unwrap();
        let h = s.harq_config();
        let exact = error_prob_closed_form(&model, h.initial_rate, h.sub_block_len, ClosedFormControl::default())
            .unwrap()
            .value;
        let asym = error_prob_asymptotic(&model, h.initial_rate, h.sub_block_len).unwrap().value;
        let q = AoiQosQuery {
            theta_aoi: 0.5,
            a_th: 2000.0,
            blocklength: h.sub_block_len,
        };
        let b = peak_aoi_harq(&model, &h, 1.0, &q, ClosedFormControl::default(), PoissonVariant::Renewal)
            .unwrap()
            .raw;
        let ba = peak_aoi_asymptotic(&model, &h, 1.0, &q, PoissonVariant::Renewal).unwrap().raw;
        let gaps = ((asym - exact).abs() / exact, (ba - b).abs() / b);
        assert!(gaps.0 < prev.0 && gaps.1 < prev.1, "P {p}: {gaps:?} after {prev:?}");
        prev = gaps;
    }
    assert!(prev.0 < 0.05 && prev.1 < 0.05);
}
