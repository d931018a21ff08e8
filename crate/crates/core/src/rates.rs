//! Decay-rate measurement.
//!
//! `L²→L²` norms of Fourier multipliers are sups of pointwise matrix norms,
//! so the energy and solution observables never leave frequency space. The
//! `L¹→L^∞` spot checks synthesize radial solutions in `n = 1, 3`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::diag::DiagonalizationHierarchy;
use crate::linalg::{Mat2, C64};
use crate::peano::{assemble_path, wave_amplitudes, AssemblyOptions};
use crate::propagator::{bracket, energy_from_fundamental, japanese, weight_h};
use crate::quad::{composite_gauss, gauss_on, Barycentric};
use crate::scattering::BandLimitedData;
use crate::sweep::par_map;
use crate::zones::ZoneGeometry;
use crate::{CoefficientModel, Error, Result};

/// Ordinary least squares `y ≈ a·x + c`; returns `(a, stderr(a))`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let c = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - c).powi(2)).sum();
    let stderr = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, stderr)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `sup_ξ ‖𝔼(t,ξ)‖`
    Energy,
    /// `sup_ξ ‖(𝔼₁₁, 𝔼₁₂)(t,ξ)‖/[ξ]`, the multiplier of
    /// `(u₁, ⟨D⟩⁻¹u₂) ↦ u(t)`
    Solution,
    /// `sup_r |u(t,r)|` for radial band-limited data
    Dispersive,
}

/// Which part of the phase space the measured rate follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Hyperbolic,
    Dissipative,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub observable: Observable,
    pub t: Vec<f64>,
    pub measured: Vec<f64>,
    pub predicted: Vec<f64>,
    pub window: (f64, f64),
    pub exponent: f64,
    pub stderr: f64,
    /// slope of the prediction over the same window
    pub predicted_exponent: f64,
    /// `max/min` of `measured/predicted` over the window
    pub ratio_spread: f64,
    pub branch: Option<Branch>,
}

impl DecayReport {
    pub fn ratio(&self) -> Vec<f64> {
        self.measured.iter().zip(&self.predicted).map(|(m, p)| m / p).collect()
    }

    /// Measured and predicted rates agree up to a constant factor band.
    pub fn verdict(&self, band: f64) -> bool {
        self.ratio_spread <= band
    }

    fn build(
        observable: Observable,
        t: Vec<f64>,
        measured: Vec<f64>,
        predicted: Vec<f64>,
        window: (f64, f64),
    ) -> Result<Self> {
        let (exponent, stderr) = fit_decay_exponent(&t, &measured, window)?;
        let (predicted_exponent, _) = fit_decay_exponent(&t, &predicted, window)?;
        let ratios: Vec<f64> = t
            .iter()
            .zip(measured.iter().zip(&predicted))
            .filter(|(&t, _)| in_window(t, window))
            .map(|(_, (m, p))| m / p)
            .collect();
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            observable,
            t,
            measured,
            predicted,
            window,
            exponent,
            stderr,
            predicted_exponent,
            ratio_spread: hi / lo,
            branch: None,
        })
    }
}

fn in_window(t: f64, w: (f64, f64)) -> bool {
    t >= w.0 * (1.0 - 1e-12) && t <= w.1 * (1.0 + 1e-12)
}

/// Least-squares slope of `log v` against `log(1+t)` over the points with
/// `t` in `window`.
pub fn fit_decay_exponent(t: &[f64], values: &[f64], window: (f64, f64)) -> Result<(f64, f64)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&t, &v) in t.iter().zip(values) {
        if !in_window(t, window) {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::NonPositive(v));
        }
        x.push((1.0 + t).ln());
        y.push(v.ln());
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter(format!("fewer than two points in window {window:?}")));
    }
    Ok(least_squares(&x, &y))
}

pub const DEFAULT_WINDOW: (f64, f64) = (1e2, 1e4);

/// Model prediction for an observable; `n` only matters for the dispersive
/// rate `λ⁻¹(t)(1+t)^{−(n−1)/2}`.
pub fn predicted(model: &CoefficientModel, observable: Observable, n: usize, t: f64) -> f64 {
    match observable {
        Observable::Energy => 1.0 / model.lambda(t),
        Observable::Solution => (1.0 + t) * model.lambda_sq_ratio(0.0, t),
        Observable::Dispersive => (1.0 + t).powf(-0.5 * (n as f64 - 1.0)) / model.lambda(t),
    }
}

/// The dissipative-zone `L¹→L^∞` rate `(1+t)^{1−n}/λ²(t)` of the solution.
pub fn dissipative_dispersive(model: &CoefficientModel, n: usize, t: f64) -> f64 {
    (1.0 + t).powf(1.0 - n as f64) * model.lambda_sq_ratio(0.0, t)
}

fn pointwise(observable: Observable, xi: f64, e: &Mat2) -> f64 {
    match observable {
        Observable::Solution => (e.a11.norm_sqr() + e.a12.norm_sqr()).sqrt() / bracket(xi),
        _ => e.norm(),
    }
}

/// Sup over `xi_grid` of the energy or solution multiplier, with the
/// prediction of the model and a fit on [`DEFAULT_WINDOW`].
pub fn operator_norm_curve(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    observable: Observable,
    t_grid: &[f64],
    xi_grid: &[f64],
) -> Result<DecayReport> {
    operator_norm_curve_in(model, geom, observable, t_grid, xi_grid, DEFAULT_WINDOW)
}

pub fn operator_norm_curve_in(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    observable: Observable,
    t_grid: &[f64],
    xi_grid: &[f64],
    window: (f64, f64),
) -> Result<DecayReport> {
    if observable == Observable::Dispersive {
        return Err(Error::InvalidParameter("dispersive curves come from dispersive_decay_experiment".into()));
    }
    if t_grid.is_empty() || xi_grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let hier = DiagonalizationHierarchy::build(model, geom.k)?;
    let rows = par_map(xi_grid, |&xi| -> Result<Vec<f64>> {
        let es = assemble_path(&hier, model, geom, xi, t_grid, AssemblyOptions::fast())?;
        t_grid
            .iter()
            .zip(es)
            .map(|(&t, e)| Ok(pointwise(observable, xi.abs(), &energy_from_fundamental(geom, t, xi.abs(), e)?)))
            .collect()
    });
    let mut measured = vec![0.0f64; t_grid.len()];
    for row in rows {
        for (m, v) in measured.iter_mut().zip(row?) {
            *m = m.max(v);
        }
    }
    let pred = t_grid.iter().map(|&t| predicted(model, observable, 0, t)).collect();
    DecayReport::build(observable, t_grid.to_vec(), measured, pred, window)
}

/// Minimal smoothness `ℓ_n = 2⌈n/2⌉ + 1` for the `L^p–L^q` estimates.
pub fn minimal_regularity(n: usize) -> usize {
    2 * n.div_ceil(2) + 1
}

pub fn check_regularity(model: &CoefficientModel, n: usize) -> Result<()> {
    let need = minimal_regularity(n);
    if model.ell() < need {
        return Err(Error::SmoothnessExceeded { requested: need, available: model.ell() });
    }
    Ok(())
}

fn check_dim(n: usize) -> Result<()> {
    if n == 1 || n == 3 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("radial synthesis supports n ∈ {{1, 3}}, got {n}")))
    }
}

/// `û(t,ρ)` coefficients: `û = c₁·(⟨ρ⟩û₁) + c₂·û₂`.
fn solution_row(geom: &ZoneGeometry, t: f64, rho: f64, e: &Mat2) -> Result<(C64, C64)> {
    let ht = weight_h(geom, t, rho)?;
    let h0 = weight_h(geom, 0.0, rho)?;
    Ok((e.a11 * (h0 / japanese(rho) / ht), e.a12 / ht))
}

/// Kernel of the radial inverse Fourier transform with `dρ`-weight folded in.
fn radial_kernel(n: usize, rho: f64, r: f64) -> f64 {
    if n == 1 {
        (rho * r).cos() / PI
    } else {
        let x = rho * r;
        let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
        sinc * rho * rho / (2.0 * PI * PI)
    }
}

/// Coarse nodes per interpolation piece of the amplitudes.
const AMPLITUDE_NODES: usize = 48;

/// `û(t,ρ)` on fine quadrature nodes for `t` beyond every zone exit of the
/// annulus, through the two slowly varying amplitudes of
/// [`wave_amplitudes`] interpolated from coarse nodes.
fn late_profile(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    data: &BandLimitedData,
    t: f64,
    fine: &[f64],
) -> Result<Vec<C64>> {
    let mut pieces = vec![(data.inner, data.outer)];
    if data.inner < geom.n && geom.n < data.outer {
        pieces = vec![(data.inner, geom.n), (geom.n, data.outer)];
    }
    let mut out = vec![C64::new(0.0, 0.0); fine.len()];
    for (a, b) in pieces {
        let (nodes, _) = gauss_on(a, b, AMPLITUDE_NODES);
        let amps = par_map(&nodes, |&rho| -> Result<[C64; 4]> {
            let (p, m) = wave_amplitudes(hier, model, geom, rho, &[t], AssemblyOptions::fast())?[0];
            let (p1, p2) = solution_row(geom, t, rho, &p)?;
            let (m1, m2) = solution_row(geom, t, rho, &m)?;
            Ok([p1, p2, m1, m2])
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let bary = Barycentric::new(nodes);
        let comps: Vec<Vec<C64>> = (0..4).map(|c| amps.iter().map(|a| a[c]).collect()).collect();
        for (u, &rho) in out.iter_mut().zip(fine) {
            if rho < a || rho > b {
                continue;
            }
            let c: Vec<C64> = comps.iter().map(|v| bary.eval(v, rho)).collect();
            let v = data.vector(rho);
            let plus = C64::from_polar(1.0, rho * t);
            *u = (c[0] * v[0] + c[1] * v[1]) * plus + (c[2] * v[0] + c[3] * v[1]) * plus.conj();
        }
    }
    Ok(out)
}

fn early_profile(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    data: &BandLimitedData,
    t: f64,
    fine: &[f64],
) -> Result<Vec<C64>> {
    par_map(fine, |&rho| -> Result<C64> {
        let e = assemble_path(hier, model, geom, rho, &[t], AssemblyOptions::fast())?[0];
        let (c1, c2) = solution_row(geom, t, rho, &e)?;
        let v = data.vector(rho);
        Ok(c1 * v[0] + c2 * v[1])
    })
    .into_iter()
    .collect()
}

/// Radial solution `u(t,r)` for data `(⟨D⟩u₁, u₂)` with radial transform
/// `data.vector(|ξ|)`, in `n = 1` (inverse cosine transform) or `n = 3`
/// (`(2π²)⁻¹∫û(t,ρ) sin(ρr)/(ρr) ρ² dρ`).
pub fn radial_synthesis(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    n: usize,
    data: &BandLimitedData,
    t: f64,
    r_grid: &[f64],
) -> Result<Vec<f64>> {
    check_dim(n)?;
    check_regularity(model, n)?;
    if !(t >= 0.0) || r_grid.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidParameter("t and r must be non-negative".into()));
    }
    let hier = DiagonalizationHierarchy::build(model, geom.k)?;
    let r_max = r_grid.iter().copied().fold(0.0, f64::max);
    let width = 0.05f64.min(3.0 / (1.0 + t + r_max));
    let panels = ((data.outer - data.inner) / width).ceil() as usize;
    let (fine, weights) = composite_gauss(data.inner, data.outer, panels, 12);
    let late = t > 0.0 && t >= geom.t_xi(data.inner)?;
    let profile = if late {
        late_profile(&hier, model, geom, data, t, &fine)?
    } else {
        early_profile(&hier, model, geom, data, t, &fine)?
    };
    let wu: Vec<(f64, C64)> = fine.iter().zip(&weights).zip(&profile).map(|((&x, &w), &u)| (x, u * w)).collect();
    Ok(par_map(r_grid, |&r| wu.iter().map(|&(rho, u)| u.re * radial_kernel(n, rho, r)).sum()))
}

/// Radial points `max(0, t−half) ..= t+half` with spacing `step`.
pub fn light_cone_window(t: f64, half: f64, step: f64) -> Vec<f64> {
    let lo = (t - half).max(0.0);
    let count = ((t + half - lo) / step).round() as usize;
    (0..=count).map(|j| lo + j as f64 * step).collect()
}

/// `sup_r |u(t,r)|` along `t_grid` for the unit bump on `[1/2, 3/2]` in
/// the first datum, fitted on `window` and compared with the hyperbolic
/// prediction `λ⁻¹(1+t)^{−(n−1)/2}`; the branch is the prediction whose
/// slope lies closer to the fit.
pub fn dispersive_decay_experiment(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    n: usize,
    t_grid: &[f64],
    window: (f64, f64),
) -> Result<DecayReport> {
    let data = BandLimitedData::new(0.5, 1.5, 1.0, 0.0)?;
    dispersive_decay_with(model, geom, n, &data, t_grid, window)
}

pub fn dispersive_decay_with(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    n: usize,
    data: &BandLimitedData,
    t_grid: &[f64],
    window: (f64, f64),
) -> Result<DecayReport> {
    check_dim(n)?;
    check_regularity(model, n)?;
    let measured = t_grid
        .iter()
        .map(|&t| {
            let rs = light_cone_window(t, 40.0, 0.05);
            let u = radial_synthesis(model, geom, n, data, t, &rs)?;
            Ok(u.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        })
        .collect::<Result<Vec<_>>>()?;
    let pred = t_grid.iter().map(|&t| predicted(model, Observable::Dispersive, n, t)).collect();
    let mut report = DecayReport::build(Observable::Dispersive, t_grid.to_vec(), measured, pred, window)?;
    let diss: Vec<f64> = t_grid.iter().map(|&t| dissipative_dispersive(model, n, t)).collect();
    let (diss_exp, _) = fit_decay_exponent(t_grid, &diss, window)?;
    report.branch = Some(if (report.exponent - report.predicted_exponent).abs() <= (report.exponent - diss_exp).abs() {
        Branch::Hyperbolic
    } else {
        Branch::Dissipative
    });
    Ok(report)
}
