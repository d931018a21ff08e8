use dampwave::coeff::log_grid;
use dampwave::diag::DiagonalizationHierarchy;
use dampwave::propagator::{energy_symbol_path, OracleOptions};
use dampwave::scattering::{
    argsup_profile, asymptotic_equivalence, asymptotic_equivalence_with, scattering_report, BandLimitedData,
    EquivalenceOptions,
};
use dampwave::zones::choose_zone_constant;
use dampwave::{CoefficientModel, Error, Mat2};

#[test]
fn free_equivalence_vanishes() {
    let z = CoefficientModel::zero();
    let g = choose_zone_constant(&z, 1, 0.5).unwrap();
    let d = BandLimitedData::new(0.5, 2.0, 1.0, -0.4).unwrap();
    let v = asymptotic_equivalence(&z, &g, &d, &[0.0, 10.0, 1e3]).unwrap();
    assert!(v.iter().all(|&x| x < 1e-9), "{v:?}");
}

#[test]
fn equivalence_decays() {
    let m = CoefficientModel::scale_invariant(0.5).unwrap();
    let g = choose_zone_constant(&m, 1, 0.5).unwrap();
    let d = BandLimitedData::new(0.5, 2.0, 1.0, 0.0).unwrap();
    let ts = [10.0, 1e2, 1e3, 1e4];
    let v = asymptotic_equivalence(&m, &g, &d, &ts).unwrap();
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
    // the distance behaves like c/(1+t), so the ratio over [10, 1e4] is 11/10001
    let want = (1.0 + ts[0]) / (1.0 + ts[3]);
    assert!((v[3] / v[0] / want - 1.0).abs() < 0.05, "{v:?}");
}

#[test]
fn equivalence_branches_agree_at_crossover() {
    let m = CoefficientModel::oscillating(5.0).unwrap();
    let g = choose_zone_constant(&m, 1, 0.5).unwrap();
    let d = BandLimitedData::new(0.8, 1.6, 0.5, 1.0).unwrap();
    let t = [600.0];
    let direct = EquivalenceOptions { average_from: f64::INFINITY, ..Default::default() };
    let averaged = EquivalenceOptions { average_from: 0.0, ..Default::default() };
    let a = asymptotic_equivalence_with(&m, &g, &d, &t, direct).unwrap()[0];
    let b = asymptotic_equivalence_with(&m, &g, &d, &t, averaged).unwrap()[0];
    assert!((a - b).abs() < 1e-3 * a, "{a} vs {b}");
}

#[test]
fn data_touching_the_origin_is_rejected() {
    assert_eq!(BandLimitedData::new(0.0, 2.0, 1.0, 0.0), Err(Error::NotBandLimited));
}

#[test]
fn slowest_frequencies_converge_last() {
    let m = CoefficientModel::scale_invariant(0.5).unwrap();
    let h = DiagonalizationHierarchy::build(&m, 1).unwrap();
    let g = choose_zone_constant(&m, 1, 0.5).unwrap();
    let xis = log_grid(0.02, 5.0, 9);
    let times = [400.0, 2000.0, 1e4];
    let prof = argsup_profile(&h, &m, &g, &xis, &times).unwrap();
    for w in prof.windows(2) {
        assert!(w[1].t > 4.0 * w[0].t);
        assert!(w[1].xi <= w[0].xi, "{prof:?}");
    }
}

#[test]
fn rescaled_energy_has_nonzero_limit() {
    let m = CoefficientModel::scale_invariant(0.5).unwrap();
    let g = choose_zone_constant(&m, 1, 0.5).unwrap();
    let times = [1e2, 1e3, 1e4];
    let es = energy_symbol_path(&m, &g, 1.0, &times, OracleOptions::new(1e-12)).unwrap();
    let v = [dampwave::C64::new(1.0, 0.0), dampwave::C64::new(0.0, 0.0)];
    let norms: Vec<f64> = times
        .iter()
        .zip(&es)
        .map(|(&t, e)| {
            let y = e.apply(v);
            m.lambda(t) * (y[0].norm_sqr() + y[1].norm_sqr()).sqrt()
        })
        .collect();
    assert!(norms[2] > 0.1, "{norms:?}");
    assert!((norms[2] - norms[1]).abs() < (norms[1] - norms[0]).abs().max(1e-3), "{norms:?}");
}

#[test]
fn report_for_free_waves() {
    let z = CoefficientModel::zero();
    let h = DiagonalizationHierarchy::build(&z, 1).unwrap();
    let g = choose_zone_constant(&z, 1, 0.5).unwrap();
    let r = scattering_report(&h, &z, &g, &[0.1, 1.0], &[1e2, 1e3], 1e-10).unwrap();
    assert!(r.w.iter().all(|w| (*w - Mat2::identity()).norm() < 1e-10));
    assert!(r.det_defect.iter().all(|&d| d < 1e-10));
}
