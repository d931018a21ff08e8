//! Modified scattering.
//!
//! For every `ξ ≠ 0` the rescaled energy symbol `λ(t)𝔼₀(t,ξ)⁻¹𝔼(t,ξ)`
//! converges as `t → ∞` to
//!
//! ```text
//! W₊(ξ) = 𝔼₀(t_ξ,ξ)⁻¹ M Q_k(∞,t_ξ,ξ) N_k⁻¹(t_ξ,ξ) M⁻¹ λ(t_ξ) 𝔼(t_ξ,ξ)
//! ```
//!
//! with `det W₊ = 1`. Writing `X = N_k⁻¹(t_ξ)M⁻¹λ(t_ξ)𝔼(t_ξ)` one has, for
//! `t ≥ t_ξ`, `𝔼₀(t)W₊ = M E₀(t,t_ξ) Q(∞) X` and
//! `λ(t)𝔼(t) = M N_k(t) E₀(t,t_ξ) Q(t,t_ξ) X`.

use serde::Serialize;

use crate::diag::DiagonalizationHierarchy;
use crate::linalg::{Mat2, C64};
use crate::peano::{q_infinity, QMatrix, Remainder};
use crate::propagator::{energy_symbol, energy_symbol_path, free_energy_symbol, japanese, OracleOptions};
use crate::quad::{composite_gauss, gauss_on, Barycentric};
use crate::rates::least_squares;
use crate::sweep::par_map;
use crate::zones::ZoneGeometry;
use crate::{CoefficientModel, Error, Result};

fn oracle() -> OracleOptions {
    OracleOptions::new(1e-12)
}

/// `W₊(ξ)` together with the pieces it is built from.
#[derive(Clone, Copy, Debug)]
pub struct WaveOperator {
    pub xi: f64,
    pub t_xi: f64,
    pub w: Mat2,
    pub q: QMatrix,
    /// `N_k⁻¹(t_ξ) M⁻¹ λ(t_ξ) 𝔼(t_ξ)`
    pub x: Mat2,
    pub det_defect: f64,
}

pub fn wave_operator(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    xi: f64,
    tol: f64,
) -> Result<WaveOperator> {
    if xi == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let xi = xi.abs();
    let t_xi = geom.t_xi(xi)?;
    let energy = energy_symbol(model, geom, t_xi, xi, oracle())?;
    let q = q_infinity(hier, model, geom, t_xi, xi, tol)?;
    let v = hier.eval_unchecked(model, t_xi, xi)?;
    let x = (v.n_k_inv * Mat2::eigenbasis_inv() * energy).scale(model.lambda(t_xi).into());
    let free = free_energy_symbol(t_xi, xi)?;
    let free_inv = free.inverse().ok_or(Error::ZeroFrequency)?;
    let w = free_inv * Mat2::eigenbasis() * q.value * x;
    let det_defect = (w.det() - C64::new(1.0, 0.0)).norm();
    Ok(WaveOperator { xi, t_xi, w, q, x, det_defect })
}

/// `W₊(ξ)`.
pub fn w_plus(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    xi: f64,
    tol: f64,
) -> Result<Mat2> {
    Ok(wave_operator(hier, model, geom, xi, tol)?.w)
}

/// `‖λ(t)𝔼₀(t,ξ)⁻¹𝔼(t,ξ) − W₊(ξ)‖` for a given `𝔼(t,ξ)`.
pub fn convergence_defect(model: &CoefficientModel, w: &Mat2, t: f64, xi: f64, energy: Mat2) -> Result<f64> {
    let free_inv = free_energy_symbol(t, xi)?.inverse().ok_or(Error::ZeroFrequency)?;
    Ok(((free_inv * energy).scale(model.lambda(t).into()) - *w).norm())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceCurve {
    pub xi: f64,
    pub horizons: Vec<f64>,
    pub values: Vec<f64>,
    /// log-log slope, `NaN` when some value vanishes
    pub slope: f64,
    pub stderr: f64,
}

/// The distance to `W₊` along increasing horizons, with oracle `𝔼`.
pub fn scattering_convergence(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    xi: f64,
    horizons: &[f64],
) -> Result<ConvergenceCurve> {
    let op = wave_operator(hier, model, geom, xi, 1e-11)?;
    if horizons.windows(2).any(|w| w[1] <= w[0]) || horizons.first().is_some_and(|&t| t <= op.t_xi) {
        return Err(Error::InvalidParameter("horizons must increase and exceed t_ξ".into()));
    }
    let energies = energy_symbol_path(model, geom, op.xi, horizons, oracle())?;
    let values = horizons
        .iter()
        .zip(energies)
        .map(|(&t, e)| convergence_defect(model, &op.w, t, op.xi, e))
        .collect::<Result<Vec<_>>>()?;
    let (slope, stderr) = if values.len() >= 2 && values.iter().all(|&v| v > 0.0) {
        let x: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
        let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        least_squares(&x, &y)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ConvergenceCurve { xi: op.xi, horizons: horizons.to_vec(), values, slope, stderr })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ArgSup {
    pub t: f64,
    pub xi: f64,
    pub value: f64,
}

/// Samples per oscillation period in [`argsup_profile`].
const ENVELOPE_SAMPLES: usize = 16;

/// For each time, the grid frequency farthest from its scattering limit.
///
/// The defect at `ξ` carries phases `e^{±2iξt}`, so each value is the
/// maximum over one period `π/|ξ|` starting at `t`.
pub fn argsup_profile(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    xi_grid: &[f64],
    times: &[f64],
) -> Result<Vec<ArgSup>> {
    let rows = par_map(xi_grid, |&xi| -> Result<Vec<f64>> {
        let op = wave_operator(hier, model, geom, xi, 1e-10)?;
        let period = std::f64::consts::PI / op.xi;
        let mut samples: Vec<(f64, usize)> = times
            .iter()
            .enumerate()
            .flat_map(|(k, &t)| (0..=ENVELOPE_SAMPLES).map(move |j| (t + period * j as f64 / ENVELOPE_SAMPLES as f64, k)))
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ts: Vec<f64> = samples.iter().map(|p| p.0).collect();
        let energies = energy_symbol_path(model, geom, op.xi, &ts, oracle())?;
        let mut env = vec![0.0f64; times.len()];
        for (&(t, k), e) in samples.iter().zip(energies) {
            env[k] = env[k].max(convergence_defect(model, &op.w, t, op.xi, e)?);
        }
        Ok(env)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let (i, value) = rows
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r[j]))
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            ArgSup { t, xi: xi_grid[i], value }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringReport {
    pub xi: Vec<f64>,
    pub w: Vec<Mat2>,
    pub det_defect: Vec<f64>,
    /// convergence slope per frequency over the horizons beyond its `t_ξ`
    pub slope: Vec<f64>,
}

pub fn scattering_report(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    xi_grid: &[f64],
    horizons: &[f64],
    tol: f64,
) -> Result<ScatteringReport> {
    let rows = par_map(xi_grid, |&xi| -> Result<(Mat2, f64, f64)> {
        let op = wave_operator(hier, model, geom, xi, tol)?;
        let hs: Vec<f64> = horizons.iter().copied().filter(|&t| t > op.t_xi).collect();
        let slope = if hs.len() >= 2 { scattering_convergence(hier, model, geom, xi, &hs)?.slope } else { f64::NAN };
        Ok((op.w, op.det_defect, slope))
    });
    let mut report = ScatteringReport { xi: xi_grid.to_vec(), w: Vec::new(), det_defect: Vec::new(), slope: Vec::new() };
    for r in rows {
        let (w, d, s) = r?;
        report.w.push(w);
        report.det_defect.push(d);
        report.slope.push(s);
    }
    Ok(report)
}

/// Radial data with `(⟨ξ⟩û₁, û₂) = (u1, u2)·φ(|ξ|)`, where `φ` is a smooth
/// bump supported in the annulus `inner ≤ |ξ| ≤ outer`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandLimitedData {
    pub inner: f64,
    pub outer: f64,
    pub u1: f64,
    pub u2: f64,
}

impl BandLimitedData {
    pub fn new(inner: f64, outer: f64, u1: f64, u2: f64) -> Result<Self> {
        if !(inner > 0.0) {
            return Err(Error::NotBandLimited);
        }
        if !(outer > inner) || !outer.is_finite() {
            return Err(Error::InvalidParameter(format!("annulus [{inner}, {outer}] is empty")));
        }
        Ok(Self { inner, outer, u1, u2 })
    }

    pub fn bump(&self, rho: f64) -> f64 {
        let x = (2.0 * rho - self.inner - self.outer) / (self.outer - self.inner);
        if x.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - x * x)).exp()
        }
    }

    /// `(⟨ξ⟩û₁, û₂)` at `|ξ| = rho`.
    pub fn vector(&self, rho: f64) -> [C64; 2] {
        let b = self.bump(rho);
        [C64::new(self.u1 * b, 0.0), C64::new(self.u2 * b, 0.0)]
    }

    /// `û₁` at `|ξ| = rho`.
    pub fn u1_hat(&self, rho: f64) -> f64 {
        self.u1 * self.bump(rho) / japanese(rho)
    }
}

/// Surface area of the unit sphere in `ℝⁿ`.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n - 2) as f64 * sphere_area(n - 2),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EquivalenceOptions {
    /// space dimension of the radial `L²` norm
    pub dim: usize,
    /// tolerance of `Q(∞)`
    pub tol: f64,
    /// Gauss nodes on which `W₊` is computed and interpolated
    pub coarse_nodes: usize,
    /// phase averaging is used once `(1+t)·inner` reaches this value
    pub average_from: f64,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self { dim: 3, tol: 1e-10, coarse_nodes: 48, average_from: 200.0 }
    }
}

fn vec_norm_sq(v: [C64; 2]) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

/// `‖𝔼₀(t,D)W₊(D)U − λ(t)𝔼(t,D)U‖₂` for band-limited radial data `U`.
pub fn asymptotic_equivalence(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    data: &BandLimitedData,
    t_list: &[f64],
) -> Result<Vec<f64>> {
    asymptotic_equivalence_with(model, geom, data, t_list, EquivalenceOptions::default())
}

/// Late times use the phase average of `|d(ρ)|²` over the free phase
/// `φ = (t − t_ρ)ρ`, which drops terms `c(ρ)e^{imφ}`, `m ≠ 0`; their
/// integrals against the smooth compactly supported data decay faster than
/// any power of `t`. Earlier times integrate the oracle on a grid fine
/// enough to resolve `e^{2iρt}`.
pub fn asymptotic_equivalence_with(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    data: &BandLimitedData,
    t_list: &[f64],
    opts: EquivalenceOptions,
) -> Result<Vec<f64>> {
    let hier = DiagonalizationHierarchy::build(model, geom.k)?;
    let (lo, hi) = (data.inner, data.outer);
    let (xc, wc) = gauss_on(lo, hi, opts.coarse_nodes);
    let ops = par_map(&xc, |&rho| wave_operator(&hier, model, geom, rho, opts.tol))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let bary = Barycentric::new(xc.clone());
    let ws: Vec<Mat2> = ops.iter().map(|o| o.w).collect();
    let t_exit = geom.t_xi(lo)?;
    let measure = sphere_area(opts.dim) / (2.0 * std::f64::consts::PI).powi(opts.dim as i32);
    let weight = |rho: f64| rho.powi(opts.dim as i32 - 1);
    let averaged = |t: f64| (1.0 + t) * lo >= opts.average_from && t >= t_exit;

    let mut out = vec![0.0; t_list.len()];
    let direct: Vec<(usize, f64)> = t_list.iter().copied().enumerate().filter(|&(_, t)| !averaged(t)).collect();
    if !direct.is_empty() {
        let mut ts: Vec<f64> = direct.iter().map(|p| p.1).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let t_max = *ts.last().expect("non-empty");
        let width = 0.05f64.min(3.0 / (1.0 + t_max));
        let panels = ((hi - lo) / width).ceil() as usize;
        let (xf, wf) = composite_gauss(lo, hi, panels, 12);
        let rows = par_map(&xf, |&rho| -> Result<Vec<f64>> {
            let w = bary.eval(&ws, rho);
            let v = data.vector(rho);
            let energies = energy_symbol_path(model, geom, rho, &ts, oracle())?;
            ts.iter()
                .zip(energies)
                .map(|(&t, e)| {
                    let free = free_energy_symbol(t, rho)?;
                    let a = (free * w).apply(v);
                    let b = e.scale(model.lambda(t).into()).apply(v);
                    Ok(vec_norm_sq([a[0] - b[0], a[1] - b[1]]))
                })
                .collect()
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        for &(i, t) in &direct {
            let j = ts.iter().position(|&x| x == t).expect("present");
            let s: f64 = rows.iter().zip(&xf).zip(&wf).map(|((r, &rho), &w)| w * weight(rho) * r[j]).sum();
            out[i] = (measure * s).sqrt();
        }
    }
    let late: Vec<(usize, f64)> = t_list.iter().copied().enumerate().filter(|&(_, t)| averaged(t)).collect();
    for &(i, t) in &late {
        let vals = par_map(&ops, |op| -> Result<f64> {
            let rem = Remainder::new(&hier, model, geom, op.t_xi, op.xi)?;
            let parts = rem.tail_parts(t)?;
            let nk = hier.eval_unchecked(model, t, op.xi)?.n_k;
            let qinf = op.q.value;
            let y = (op.x).apply(data.vector(op.xi));
            let m = Mat2::eigenbasis();
            const PHASES: usize = 16;
            let mut acc = 0.0;
            for p in 0..PHASES {
                let phi = 2.0 * std::f64::consts::PI * p as f64 / PHASES as f64;
                let e0 = Mat2::diag(C64::from_polar(1.0, phi), C64::from_polar(1.0, -phi));
                let tail = parts.matrix(phi);
                let tail_inv = tail.inverse().ok_or(Error::SingularDiagonalizer(tail.det().norm()))?;
                let d = m * (e0 * qinf - nk * e0 * tail_inv * qinf);
                acc += vec_norm_sq(d.apply(y));
            }
            Ok(acc / PHASES as f64)
        });
        let mut s = 0.0;
        for ((v, &rho), &w) in vals.into_iter().zip(&xc).zip(&wc) {
            s += w * weight(rho) * v?;
        }
        out[i] = (measure * s).sqrt();
    }
    Ok(out)
}
