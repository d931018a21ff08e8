use dampwave::coeff::log_grid;
use dampwave::rates::{dispersive_decay_experiment, operator_norm_curve_in, radial_synthesis, Branch, Observable};
use dampwave::scattering::BandLimitedData;
use dampwave::zones::choose_zone_constant;
use dampwave::{CoefficientModel, Error, Family};

#[test]
fn one_dimensional_sup_tracks_lambda() {
    let m = CoefficientModel::scale_invariant(0.5).unwrap();
    let g = choose_zone_constant(&m, 2, 0.5).unwrap();
    let r = dispersive_decay_experiment(&m, &g, 1, &log_grid(1e2, 1e3, 4), (1e2, 1e3)).unwrap();
    assert!((r.exponent + 0.25).abs() < 0.05, "{}", r.exponent);
}

#[test]
fn three_dimensional_branch_is_hyperbolic() {
    let m = CoefficientModel::scale_invariant(0.5).unwrap();
    let g = choose_zone_constant(&m, 3, 0.5).unwrap();
    let r = dispersive_decay_experiment(&m, &g, 3, &log_grid(1e2, 4e2, 3), (1e2, 4e2)).unwrap();
    assert_eq!(r.branch, Some(Branch::Hyperbolic));
}

#[test]
fn solution_norm_dichotomy() {
    let m = CoefficientModel::scale_invariant(0.5).unwrap();
    let g = choose_zone_constant(&m, 2, 0.5).unwrap();
    let ts = log_grid(1e2, 1e4, 5);
    let low = operator_norm_curve_in(&m, &g, Observable::Solution, &ts, &log_grid(1e-7, 1e-2, 41), (1e2, 1e4)).unwrap();
    assert!(low.verdict(1.2), "{:?}", low.ratio());
    let high = operator_norm_curve_in(&m, &g, Observable::Solution, &ts, &log_grid(1.0, 2.0, 9), (1e2, 1e4)).unwrap();
    assert!((high.exponent + 0.25).abs() < 0.02, "{}", high.exponent);
}

#[test]
fn synthesis_checks_its_inputs() {
    let m = CoefficientModel::new(Family::ScaleInvariant { mu: 0.5 }, 3).unwrap();
    let g = choose_zone_constant(&m, 1, 0.5).unwrap();
    let d = BandLimitedData::new(0.5, 1.5, 1.0, 0.0).unwrap();
    assert!(matches!(radial_synthesis(&m, &g, 3, &d, 1.0, &[0.0]), Err(Error::SmoothnessExceeded { .. })));
    assert!(matches!(radial_synthesis(&m, &g, 2, &d, 1.0, &[0.0]), Err(Error::InvalidParameter(_))));
    assert!(radial_synthesis(&m, &g, 1, &d, 1.0, &[0.0]).is_ok());
}
