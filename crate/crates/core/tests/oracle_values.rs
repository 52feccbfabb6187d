//! Frozen reference values. Each constant was produced by an independent
//! evaluation (quadrature or direct arithmetic) and is rechecked here where
//! that evaluation is cheap.

use stqos::channel::{linear_to_db, link_response, LinkGeometry};
use stqos::fbc::{error_prob_closed_form, error_prob_psi_quadrature, ClosedFormControl};
use stqos::harq::round_errors_closed_form;
use stqos::scenario::Scenario;
use stqos::snc::{peak_aoi_poisson, service_mellin_fbc, AoiQosQuery, PoissonVariant};
use stqos::sweep::{evaluate, Outputs};

/// ε at the default operating point: 30 dBm, n̂ = 200, R = 1 nat.
const DEFAULT_EPS: f64 = 0.06862155124893987;
/// ε_1..ε_3 of the default HARQ configuration.
const DEFAULT_ROUND_ERRS: [f64; 3] = [0.06862155124893987, 0.02026018053019701, 0.011363097716442207];
/// θ-optimised peak-AoI bound at the default point, A_th = 2000.
const DEFAULT_AOI_BOUND: f64 = 0.00419516520784225;

#[test]
fn free_space_link() {
    let g = LinkGeometry {
        carrier_hz: 2e9,
        distance_m: 6e5,
        tx_gain_dbi: 0.0,
        rx_gain_dbi: 0.0,
    };
    let phi = link_response(&g);
    assert!((-linear_to_db(phi) - 154.0).abs() < 0.05);
    assert!((phi / 3.96e-16 - 1.0).abs() < 0.01);
}

#[test]
fn default_error_probability() {
    let model = Scenario::default().sinr_model().unwrap();
    let eps = error_prob_closed_form(&model, 1.0, 200.0, ClosedFormControl::default())
        .unwrap()
        .value;
    assert!((eps - DEFAULT_EPS).abs() < 1e-12);
    let quad = error_prob_psi_quadrature(&model, 1.0, 200.0).unwrap();
    assert!((eps - quad).abs() < 1e-8, "{eps} vs {quad}");
}

#[test]
fn default_round_errors() {
    let s = Scenario::default();
    let errs = round_errors_closed_form(&s.sinr_model().unwrap(), &s.harq_config(), ClosedFormControl::default()).unwrap();
    for (a, b) in errs.iter().zip(DEFAULT_ROUND_ERRS) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn default_aoi_bound() {
    let row = evaluate(
        &Scenario::default(),
        None,
        None,
        Outputs {
            aoi: true,
            ..Outputs::NONE
        },
    );
    let b = row.aoi_bound.unwrap();
    assert!((b / DEFAULT_AOI_BOUND - 1.0).abs() < 1e-6, "{b}");
}

#[test]
fn literal_poisson_by_hand() {
    // λ = 0.5, θ = 0.1, A_th/n = 20, M_S = e^{0.3}
    let q = AoiQosQuery {
        theta_aoi: 0.1,
        a_th: 2000.0,
        blocklength: 100.0,
    };
    let b = peak_aoi_poisson(0.5, 0.3f64.exp(), &q, PoissonVariant::NoDenominator).unwrap();
    assert!((b.raw - 1.25 * (-1.7f64).exp()).abs() < 1e-15);
}

#[test]
fn error_free_service_mellin() {
    let bits = 120.0;
    let v = service_mellin_fbc(0.0, bits, 1.0 - 0.05).unwrap();
    assert!((v / (-0.05 * bits).exp() - 1.0).abs() < 1e-14);
}
