//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use dampwave::coeff::log_grid;
use dampwave::diag::{symbol_class_margin, DiagonalizationHierarchy, SampleSpec};
use dampwave::peano::{assemble_path, peano_baker_terms, q_cross_check, q_infinity_derivative, AssemblyOptions};
use dampwave::propagator::{
    bracket, energy_symbol, fundamental_solution_oracle, fundamental_solution_path, liouville_defect, OracleOptions,
};
use dampwave::rates::{dispersive_decay_experiment, operator_norm_curve, operator_norm_curve_in, Observable};
use dampwave::scattering::{scattering_convergence, wave_operator};
use dampwave::volterra::{solve_diss_zone, solve_volterra, VolterraOptions, VolterraProblem};
use dampwave::zones::{choose_zone_constant, ZoneGeometry};
use dampwave::{CoefficientModel, Mat2, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn families() -> Vec<CoefficientModel> {
    vec![
        CoefficientModel::zero(),
        CoefficientModel::scale_invariant(0.5).unwrap(),
        CoefficientModel::iterated_log(1.0, 1).unwrap(),
        CoefficientModel::oscillating(5.0).unwrap(),
    ]
}

fn setup(model: &CoefficientModel, k: usize) -> Result<(DiagonalizationHierarchy, ZoneGeometry)> {
    Ok((DiagonalizationHierarchy::build(model, k)?, choose_zone_constant(model, k, 0.5)?))
}

fn oracle() -> OracleOptions {
    OracleOptions::new(1e-12)
}

fn oracle_equivalence() -> Result<Outcome> {
    let times = log_grid(1.0, 1e3, 20);
    let xis = log_grid(1e-2, 10.0, 20);
    let mut worst: Vec<String> = Vec::new();
    let mut pass = true;
    for m in families() {
        let (h, g) = setup(&m, 2)?;
        let mut err = 0.0f64;
        for &xi in &xis {
            let a = assemble_path(&h, &m, &g, xi, &times, AssemblyOptions::default())?;
            let o = fundamental_solution_path(&m, &g, 0.0, xi, &times, oracle())?;
            for (x, y) in a.iter().zip(&o) {
                err = err.max(x.rel_dist(y));
            }
        }
        pass &= err <= 1e-5;
        worst.push(format!("{} {err:.2e}", m.label()));
    }
    outcome(pass, format!("max rel err: {}", worst.join(", ")))
}

fn liouville() -> Result<Outcome> {
    let times = log_grid(1.0, 1e3, 8);
    let xis = log_grid(1e-2, 10.0, 8);
    let (mut liou, mut det) = (0.0f64, 0.0f64);
    for m in families() {
        let g = choose_zone_constant(&m, 2, 0.5)?;
        for &xi in &xis {
            for &t in &times {
                liou = liou.max(liouville_defect(&m, &g, t, 0.0, xi, oracle())?);
                let e = energy_symbol(&m, &g, t, xi, oracle())?;
                let want = bracket(xi) * m.lambda_sq_ratio(0.0, t);
                det = det.max((e.det().norm() - want).abs() / want);
            }
        }
    }
    outcome(liou <= 1e-6 && det <= 1e-6, format!("Liouville {liou:.2e}, det energy symbol {det:.2e}"))
}

fn energy_grid() -> (Vec<f64>, Vec<f64>) {
    (log_grid(1e2, 1e4, 9), log_grid(1e-3, 1e2, 81))
}

fn energy_rate() -> Result<Outcome> {
    let m = CoefficientModel::scale_invariant(0.5)?;
    let g = choose_zone_constant(&m, 2, 0.5)?;
    let (ts, xs) = energy_grid();
    let r = operator_norm_curve(&m, &g, Observable::Energy, &ts, &xs)?;
    outcome((r.exponent + 0.25).abs() <= 0.02, format!("exponent {:.4} ± {:.1e}", r.exponent, r.stderr))
}

fn oscillating_rate() -> Result<Outcome> {
    let (ts, xs) = energy_grid();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [5.0, 20.0] {
        let m = CoefficientModel::oscillating(alpha)?;
        let g = choose_zone_constant(&m, 2, 0.5)?;
        let r = operator_norm_curve(&m, &g, Observable::Energy, &ts, &xs)?;
        pass &= (r.exponent + 0.25).abs() <= 0.03;
        parts.push(format!("alpha {alpha}: {:.4}", r.exponent));
    }
    outcome(pass, parts.join(", "))
}

fn iterated_log_band() -> Result<Outcome> {
    let ts = log_grid(1.0, 1e6, 25);
    let xs = log_grid(1e-3, 1e2, 81);
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [1, 2] {
        let m = CoefficientModel::iterated_log(1.0, n)?;
        let g = choose_zone_constant(&m, 2, 0.5)?;
        let r = operator_norm_curve_in(&m, &g, Observable::Energy, &ts, &xs, (1.0, 1e6))?;
        pass &= r.ratio_spread <= 3.0;
        parts.push(format!("n = {n}: band {:.3}", r.ratio_spread));
    }
    outcome(pass, parts.join(", "))
}

fn solution_rate() -> Result<Outcome> {
    let m = CoefficientModel::scale_invariant(0.5)?;
    let g = choose_zone_constant(&m, 2, 0.5)?;
    let ts = log_grid(1e2, 1e4, 9);
    let xs = log_grid(1e-6, 1e2, 161);
    let r = operator_norm_curve(&m, &g, Observable::Solution, &ts, &xs)?;
    let ratio = r.ratio();
    let lo = ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratio.iter().copied().fold(0.0, f64::max);
    outcome(lo >= 1.0 / 3.0 && hi <= 3.0, format!("ratio in [{lo:.3}, {hi:.3}], exponent {:.4}", r.exponent))
}

fn determinant_of_wave_operator() -> Result<Outcome> {
    let xis = log_grid(1e-2, 10.0, 12);
    let mut worst = 0.0f64;
    let mut trivial = 0.0f64;
    let mut families = families();
    families.push(CoefficientModel::oscillating(20.0)?);
    for m in families {
        let (h, g) = setup(&m, 2)?;
        for &xi in &xis {
            let op = wave_operator(&h, &m, &g, xi, 1e-10)?;
            worst = worst.max(op.det_defect);
            if m.is_zero() {
                trivial = trivial.max((op.w - Mat2::identity()).norm());
            }
        }
    }
    outcome(worst <= 1e-6 && trivial <= 1e-10, format!("|det W − 1| ≤ {worst:.2e}, ‖W − I‖ (b ≡ 0) ≤ {trivial:.2e}"))
}

fn scattering_slope() -> Result<Outcome> {
    let m = CoefficientModel::scale_invariant(0.5)?;
    let (h, g) = setup(&m, 1)?;
    let c = scattering_convergence(&h, &m, &g, 1.0, &log_grid(1e2, 1e4, 13))?;
    outcome((c.slope + 1.0).abs() <= 0.15, format!("slope {:.4} ± {:.1e}", c.slope, c.stderr))
}

fn diagonalization() -> Result<Outcome> {
    let mut residual = 0.0f64;
    let mut drift = 0.0f64;
    let models = [CoefficientModel::scale_invariant(0.5)?, CoefficientModel::oscillating(5.0)?];
    for (m, k) in models.iter().flat_map(|m| (1..=3).map(move |k| (m, k))) {
        let (h, g) = setup(m, k)?;
        let spec = SampleSpec { xi_min: 1e-2, xi_max: 10.0, n_xi: 12, t_max: 1e4, n_t: 12 };
        for (t, xi) in spec.points(&g) {
            residual = residual.max(h.conjugation_residual(m, &g, t, xi)?);
        }
        for j in 1..=k {
            let stages = [(h.n_stage(j), (-(j as i32), j as i32)), (h.b_stage(j), (-(j as i32), j as i32 + 1))];
            for (mat, declared) in stages {
                for e in mat.e.iter() {
                    if e.is_zero() {
                        continue;
                    }
                    let a = symbol_class_margin(e, declared, m, &g, &spec, 1, 1)?.sup;
                    let b = symbol_class_margin(e, declared, m, &g, &spec.doubled(), 1, 1)?.sup;
                    drift = drift.max((b - a).abs() / a);
                }
            }
        }
    }
    outcome(residual <= 1e-12 && drift <= 0.05, format!("residual {residual:.2e}, margin drift {:.2}%", 100.0 * drift))
}

fn peano_baker() -> Result<Outcome> {
    let terms = peano_baker_terms(|_| Mat2::identity(), 0.0, 1.0, 8, |_| 0.25);
    let mut fact = 1.0;
    let mut err = 0.0f64;
    for (j, term) in terms.iter().enumerate() {
        if j > 0 {
            fact *= j as f64;
        }
        err = err.max((term.a11.re - 1.0 / fact).abs() * fact);
    }
    let m = CoefficientModel::scale_invariant(0.5)?;
    let (h, g) = setup(&m, 1)?;
    let s = g.t_xi(1.0)?;
    let d = q_cross_check(&h, &m, &g, 1e3, s, 1.0, 1e-9)?;
    outcome(err <= 1e-13 && d <= 1e-8, format!("factorial rel err {err:.1e}, backend distance {d:.2e}"))
}

fn zone_bound_constant(m: &CoefficientModel, g: &ZoneGeometry, n: usize) -> Result<f64> {
    let mut c = 0.0f64;
    for xi in log_grid(1e-3, g.n, n) {
        let txi = g.t_xi(xi)?;
        for s in log_grid(1.0, 1.0 + txi, n).into_iter().map(|x| (x - 1.0).min(txi)) {
            for t in log_grid(1.0 + s, 1.0 + txi, n).into_iter().map(|x| (x - 1.0).clamp(s, txi)) {
                let e = solve_diss_zone(m, g, t, s, xi)?;
                c = c.max(e.norm() / m.lambda_sq_ratio(s, t));
            }
        }
    }
    Ok(c)
}

fn volterra() -> Result<Outcome> {
    let p = VolterraProblem {
        t0: 0.0,
        f0: Mat2::identity(),
        kernel: |_t: f64, _tau: f64| Mat2::identity(),
        kernel_depends_on_t: false,
    };
    let (f, _) = solve_volterra(&p, &[1.0], VolterraOptions::default())?;
    let exp_err = (f[0].a11.re - std::f64::consts::E).abs();
    let m = CoefficientModel::scale_invariant(0.5)?;
    let g = ZoneGeometry::new(2.0, 1)?;
    let mut oracle_err = 0.0f64;
    for (t, s, xi) in [(50.0, 0.0, 0.01), (150.0, 10.0, 0.01), (30.0, 0.0, 0.06), (1500.0, 100.0, 1e-3)] {
        let a = solve_diss_zone(&m, &g, t, s, xi)?;
        let o = fundamental_solution_oracle(&m, &g, t, s, xi, oracle())?;
        oracle_err = oracle_err.max((a - o).max_abs());
    }
    let c1 = zone_bound_constant(&m, &g, 6)?;
    let c2 = zone_bound_constant(&m, &g, 12)?;
    let stable = (c2 - c1).abs() <= 0.05 * c1;
    outcome(
        exp_err <= 1e-8 && oracle_err <= 1e-6 && stable,
        format!("e^t err {exp_err:.1e}, oracle err {oracle_err:.1e}, C {c1:.4} → {c2:.4}"),
    )
}

fn rho_limit() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for mu in [0.3, 0.5, 0.9] {
        let m = CoefficientModel::scale_invariant(mu)?;
        let rho = m.rho(1e24)?;
        let rel = (rho * (1.0 - mu) - 1.0).abs();
        pass &= rel <= 0.01;
        parts.push(format!("mu {mu}: {rel:.1e}"));
    }
    let mut sup = 0.0f64;
    let mut all = families();
    all.push(CoefficientModel::iterated_log(1.0, 3)?);
    for m in &all {
        for t in log_grid(1e-2, 1e12, 29) {
            sup = sup.max(m.rho(t)?);
        }
    }
    pass &= sup.is_finite() && sup < 1e2;
    outcome(pass, format!("|ρ(1e24)(1−μ) − 1|: {}; sup ρ over built-ins {sup:.3}", parts.join(", ")))
}

fn dispersive() -> Result<Outcome> {
    let m = CoefficientModel::scale_invariant(0.5)?;
    let g = choose_zone_constant(&m, 3, 0.5)?;
    let r = dispersive_decay_experiment(&m, &g, 3, &log_grid(1e2, 1e3, 5), (1e2, 1e3))?;
    outcome(
        (r.exponent + 1.25).abs() <= 0.1,
        format!("exponent {:.4} ± {:.1e}, branch {:?}", r.exponent, r.stderr, r.branch.expect("set")),
    )
}

fn q_derivatives() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [
        CoefficientModel::scale_invariant(0.5)?,
        CoefficientModel::oscillating(5.0)?,
        CoefficientModel::iterated_log(1.0, 1)?,
    ] {
        let (h, g) = setup(&m, 2)?;
        let upper = g.n / 1.05;
        let sup_on = |lo: f64, alpha: usize| -> Result<f64> {
            let mut c = 0.0f64;
            for xi in log_grid(lo, upper, 13) {
                c = c.max(q_infinity_derivative(&h, &m, &g, xi, alpha, 1e-11)?.norm() * xi.powi(alpha as i32));
            }
            Ok(c)
        };
        for alpha in 0..=1 {
            let wide = sup_on(1e-3, alpha)?;
            let narrow = sup_on(1e-2, alpha)?;
            pass &= wide.is_finite() && wide <= 1.5 * narrow.max(1e-300);
            parts.push(format!("{} α={alpha}: {wide:.3e}/{narrow:.3e}", m.label()));
        }
    }
    outcome(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 14] = [
        ("oracle equivalence", oracle_equivalence),
        ("Liouville determinant", liouville),
        ("energy rate, scale invariant", energy_rate),
        ("energy rate, oscillating", oscillating_rate),
        ("iterated log band", iterated_log_band),
        ("solution operator band", solution_rate),
        ("det W+ = 1", determinant_of_wave_operator),
        ("scattering convergence slope", scattering_slope),
        ("diagonalization identity", diagonalization),
        ("Peano-Baker factorial and backends", peano_baker),
        ("Volterra solver", volterra),
        ("rho limit", rho_limit),
        ("dispersive n = 3", dispersive),
        ("Q derivative bounds", q_derivatives),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {id:>2} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
