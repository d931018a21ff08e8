//! Brute-force fundamental solution of the micro-energy system.
//!
//! With `D_t = −i∂_t` the system is `D_t E = A E`, integrated here as
//! `∂_t E = iA E` with
//!
//! ```text
//! Z_diss: A = [[i/(1+t), N/(1+t)], [(1+t)|ξ|²/N, i b(t)]]
//! Z_hyp:  A = [[0, |ξ|], [|ξ|, i b(t)]]
//! ```
//!
//! The matrix is switched at `t_ξ`; the micro-energy weight `h` is continuous
//! there, so the fundamental solution is as well.

use crate::linalg::{Mat2, C64, I};
use crate::ode::{Dop853, OdeOptions};
use crate::quad::{integrate, QuadOptions};
use crate::zones::{Zone, ZoneGeometry};
use crate::{CoefficientModel, Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub tol: f64,
    /// integrate the hyperbolic leg in the frame rotating with `e^{±i t|ξ|}`
    pub rotating: bool,
}

impl OracleOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, rotating: false }
    }

    pub fn rotating(tol: f64) -> Self {
        Self { tol, rotating: true }
    }

    fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.tol, atol: self.tol, ..OdeOptions::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(1e-14..=1e-4).contains(&self.tol) {
            return Err(Error::InvalidParameter(format!("oracle tolerance {} outside [1e-14, 1e-4]", self.tol)));
        }
        Ok(())
    }
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self::new(1e-10)
    }
}

/// Raw system matrix of the given zone.
pub fn zone_matrix(zone: Zone, b: f64, n: f64, t: f64, xi: f64) -> Mat2 {
    match zone {
        Zone::Dissipative => {
            let s = 1.0 + t;
            Mat2::new(I / s, C64::new(n / s, 0.0), C64::new(s * xi * xi / n, 0.0), I * b)
        }
        Zone::Hyperbolic => Mat2::new(C64::new(0.0, 0.0), xi.into(), xi.into(), I * b),
    }
}

/// `A(t, ξ)` for a point tagged with `zone`.
pub fn system_matrix(model: &CoefficientModel, geom: &ZoneGeometry, zone: Zone, t: f64, xi: f64) -> Result<Mat2> {
    let actual = geom.zone(t, xi)?;
    let boundary = t == geom.t_xi(xi)?;
    if actual != zone && !(boundary && zone == Zone::Dissipative) {
        let expected = match zone {
            Zone::Dissipative => "dissipative",
            Zone::Hyperbolic => "hyperbolic",
        };
        return Err(Error::ZoneMismatch { t, xi, expected });
    }
    Ok(zone_matrix(zone, model.b(t), geom.n, t, xi))
}

fn to_state(m: Mat2) -> [C64; 4] {
    m.to_array()
}

fn from_state(y: &[C64; 4]) -> Mat2 {
    Mat2::from_array(*y)
}

fn rhs(a: Mat2, y: &[C64; 4]) -> [C64; 4] {
    let e = from_state(y);
    to_state((a * e).scale(I))
}

/// Samples `E(t_j, s, ξ)` along one trajectory for increasing `times ≥ s`.
pub fn fundamental_solution_path(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    s: f64,
    xi: f64,
    times: &[f64],
    opts: OracleOptions,
) -> Result<Vec<Mat2>> {
    opts.validate()?;
    if xi == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let xi = xi.abs();
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < s) {
        return Err(Error::InvalidParameter("output times must be sorted and ≥ s".into()));
    }
    let txi = geom.t_xi(xi)?;
    let n = geom.n;
    let mut out = Vec::with_capacity(times.len());
    let mut idx = 0;
    // dissipative leg
    let mut base = Mat2::identity();
    let mut t_switch = s;
    if s < txi {
        let f = |t: f64, y: &[C64; 4]| rhs(zone_matrix(Zone::Dissipative, model.b(t), n, t, xi), y);
        let mut st = Dop853::new(f, s, to_state(Mat2::identity()), opts.ode());
        while idx < times.len() && times[idx] <= txi {
            st.advance_to(times[idx])?;
            out.push(from_state(st.y()));
            idx += 1;
        }
        if idx == times.len() {
            return Ok(out);
        }
        st.advance_to(txi)?;
        base = from_state(st.y());
        t_switch = txi;
    }
    if idx == times.len() {
        return Ok(out);
    }
    // hyperbolic leg from t_switch
    if opts.rotating {
        let b_sw = model.primitive(t_switch);
        let f = |t: f64, y: &[C64; 4]| {
            let th = 2.0 * (t - t_switch) * xi;
            let p = C64::from_polar(1.0, -th);
            let k = Mat2::new(C64::new(0.0, 0.0), p, p.conj(), C64::new(0.0, 0.0)).scale((-0.5 * model.b(t)).into());
            to_state(k * from_state(y))
        };
        let mut st = Dop853::new(f, t_switch, to_state(Mat2::identity()), opts.ode());
        let m = Mat2::eigenbasis();
        let mi = Mat2::eigenbasis_inv();
        for &t in &times[idx..] {
            st.advance_to(t)?;
            let ratio = (0.5 * (b_sw - model.primitive(t))).exp();
            let e0 = e0_phase(t, t_switch, xi);
            let v = (e0 * from_state(st.y())).scale(ratio.into());
            out.push(m * v * mi * base);
        }
    } else {
        let f = |t: f64, y: &[C64; 4]| rhs(zone_matrix(Zone::Hyperbolic, model.b(t), n, t, xi), y);
        let mut st = Dop853::new(f, t_switch, to_state(base), opts.ode());
        for &t in &times[idx..] {
            st.advance_to(t)?;
            out.push(from_state(st.y()));
        }
    }
    Ok(out)
}

/// `E(t, s, ξ)` by direct integration from `E(s, s, ξ) = I`.
pub fn fundamental_solution_oracle(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    t: f64,
    s: f64,
    xi: f64,
    opts: OracleOptions,
) -> Result<Mat2> {
    if t < s {
        return Err(Error::InvalidParameter(format!("need t ≥ s, got t = {t}, s = {s}")));
    }
    if t == s {
        return Ok(Mat2::identity());
    }
    Ok(fundamental_solution_path(model, geom, s, xi, &[t], opts)?[0])
}

/// `diag(e^{i(t−s)|ξ|}, e^{−i(t−s)|ξ|})`.
pub fn e0_phase(t: f64, s: f64, xi: f64) -> Mat2 {
    let p = C64::from_polar(1.0, (t - s) * xi);
    Mat2::diag(p, p.conj())
}

/// `⟨ξ⟩ = √(1 + |ξ|²)`.
pub fn japanese(xi: f64) -> f64 {
    xi.hypot(1.0)
}

/// `[ξ] = |ξ|/⟨ξ⟩`.
pub fn bracket(xi: f64) -> f64 {
    xi / japanese(xi)
}

/// Micro-energy weight `h(t, ξ)`.
pub fn weight_h(geom: &ZoneGeometry, t: f64, xi: f64) -> Result<f64> {
    Ok(match geom.zone(t, xi)? {
        Zone::Dissipative => geom.n / (1.0 + t),
        Zone::Hyperbolic => xi,
    })
}

/// Converts `E(t, 0, ξ)` into the energy symbol
/// `𝔼(t,ξ) = diag(|ξ|/h(t), 1)·E(t,0,ξ)·diag(h(0)/⟨ξ⟩, 1)`.
pub fn energy_from_fundamental(geom: &ZoneGeometry, t: f64, xi: f64, e: Mat2) -> Result<Mat2> {
    let left = Mat2::diag((xi / weight_h(geom, t, xi)?).into(), C64::new(1.0, 0.0));
    let right = Mat2::diag((weight_h(geom, 0.0, xi)? / japanese(xi)).into(), C64::new(1.0, 0.0));
    Ok(left * e * right)
}

pub fn energy_symbol(model: &CoefficientModel, geom: &ZoneGeometry, t: f64, xi: f64, opts: OracleOptions) -> Result<Mat2> {
    let xi = xi.abs();
    let e = fundamental_solution_oracle(model, geom, t, 0.0, xi, opts)?;
    energy_from_fundamental(geom, t, xi, e)
}

/// `𝔼(t_j, ξ)` along one trajectory.
pub fn energy_symbol_path(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    xi: f64,
    times: &[f64],
    opts: OracleOptions,
) -> Result<Vec<Mat2>> {
    let xi = xi.abs();
    let es = fundamental_solution_path(model, geom, 0.0, xi, times, opts)?;
    times.iter().zip(es).map(|(&t, e)| energy_from_fundamental(geom, t, xi, e)).collect()
}

/// Free-wave symbol `𝔼₀(t,ξ) = [[[ξ]cos, i sin], [i[ξ]sin, cos]]` at `t|ξ|`.
pub fn free_energy_symbol(t: f64, xi: f64) -> Result<Mat2> {
    if xi == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let xi = xi.abs();
    let br = bracket(xi);
    let (sn, cs) = (t * xi).sin_cos();
    Ok(Mat2::new((br * cs).into(), I * sn, I * (br * sn), cs.into()))
}

/// `exp(i∫ₛᵗ tr A)`, with `∫ b` and the dissipative-zone term by quadrature.
pub fn liouville_determinant(model: &CoefficientModel, geom: &ZoneGeometry, t: f64, s: f64, xi: f64) -> Result<f64> {
    let txi = geom.t_xi(xi)?;
    let opts = QuadOptions::new(1e-14, 1e-14);
    let mut breaks = Vec::new();
    if let crate::coeff::Family::Tabulated { t: knots, .. } = model.family() {
        breaks.extend(knots.iter().copied());
    }
    let int_b = crate::quad::integrate_with_breaks(|x| model.b(x), s, t, &breaks, opts)?;
    let int_diss = if s < txi {
        integrate(|x: f64| 1.0 / (1.0 + x), s, t.min(txi), opts)?
    } else {
        0.0
    };
    Ok((-int_b - int_diss).exp())
}

/// `|det E_oracle − exp(i∫tr A)| / |exp(i∫tr A)|`.
pub fn liouville_defect(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    t: f64,
    s: f64,
    xi: f64,
    opts: OracleOptions,
) -> Result<f64> {
    let e = fundamental_solution_oracle(model, geom, t, s, xi, opts)?;
    let d = liouville_determinant(model, geom, t, s, xi)?;
    Ok((e.det() - C64::new(d, 0.0)).norm() / d)
}
