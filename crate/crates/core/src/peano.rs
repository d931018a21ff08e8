//! Hyperbolic-zone propagator.
//!
//! After the change of basis `M` and `k` diagonalization steps the system is
//! `D_t V = (D + F_{k−1} + R_k)V`. Removing the scalar part `F^(0) = (ib/2)I`
//! and the free phases `E₀(t,s) = exp(i(t−s)D)` leaves
//!
//! ```text
//! ∂_t Q = i ℛ(t,s,ξ) Q,    Q(s,s,ξ) = I,
//! ℛ(t,s,ξ) = F_{k−1} − F^(0) + E₀(s,t) R_k(t,ξ) E₀(t,s),
//! ```
//!
//! and for `s ≥ t_ξ`
//! `E(t,s,ξ) = M N_k(t) (λ(s)/λ(t)) E₀(t,s) Q(t,s) N_k⁻¹(s) M⁻¹`.
//!
//! The diagonal of `ℛ` does not oscillate; the off-diagonal entries carry
//! `e^{∓2i(t−s)|ξ|}`. Beyond a horizon `T` the diagonal is integrated by
//! quadrature and the off-diagonal by one integration by parts, which gives
//! `Q(∞,T)` up to `O(|ξ|⁻²|R_k'(T)|)`.

use std::cell::Cell;

use serde::Serialize;

use crate::diag::{DiagonalizationHierarchy, StageValues};
use crate::linalg::{Mat2, C64, I};
use crate::ode::{Dop853, OdeOptions};
use crate::propagator::e0_phase;
use crate::quad::{integrate_log, QuadOptions};
use crate::volterra::{solve_diss_zone_path, Panel, VolterraOptions, NODES};
use crate::zones::ZoneGeometry;
use crate::{CoefficientModel, Error, Result};

/// Largest horizon tried before `q_infinity` gives up.
pub const MAX_HORIZON: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Ode,
    Series,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

#[derive(Clone, Copy, Debug)]
pub struct QMatrix {
    pub value: Mat2,
    pub horizon: Horizon,
    pub s: f64,
    pub xi: f64,
    pub backend: Backend,
    pub tol: f64,
    /// truncation depth of the series backend
    pub depth: Option<usize>,
    /// last finite horizon integrated to
    pub reached: f64,
    /// series tail bound, or the tail estimate of an infinite horizon
    pub error_bound: f64,
    /// `Q⁻¹` from the transpose-inverse equation
    pub inverse: Option<Mat2>,
}

/// `ℛ(·, s, ξ)` for a fixed base time and frequency.
pub struct Remainder<'a> {
    hier: &'a DiagonalizationHierarchy,
    model: &'a CoefficientModel,
    s: f64,
    xi: f64,
    failure: Cell<Option<Error>>,
}

impl<'a> Remainder<'a> {
    pub fn new(
        hier: &'a DiagonalizationHierarchy,
        model: &'a CoefficientModel,
        geom: &ZoneGeometry,
        s: f64,
        xi: f64,
    ) -> Result<Self> {
        if xi == 0.0 {
            return Err(Error::ZeroFrequency);
        }
        let xi = xi.abs();
        geom.require_hyperbolic(s, xi)?;
        hier.eval_unchecked(model, s, xi)?;
        Ok(Self { hier, model, s, xi, failure: Cell::new(None) })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    fn values(&self, t: f64) -> Result<StageValues> {
        self.hier.eval_unchecked(self.model, t, self.xi)
    }

    /// Non-oscillating diagonal `F_{k−1} − F^(0) + diag R_k` and `R_k` itself.
    fn parts(&self, t: f64) -> Result<(Mat2, Mat2)> {
        let v = self.values(t)?;
        let drift = v.f_km1 - Mat2::scalar(0.5 * I * v.b);
        Ok((drift + v.r_k.diagonal_part(), v.r_k))
    }

    fn phase(&self, t: f64) -> C64 {
        C64::from_polar(1.0, -2.0 * (t - self.s) * self.xi)
    }

    pub fn at(&self, t: f64) -> Result<Mat2> {
        let (d, r) = self.parts(t)?;
        let p = self.phase(t);
        Ok(d + Mat2::new(C64::new(0.0, 0.0), r.a12 * p, r.a21 * p.conj(), C64::new(0.0, 0.0)))
    }

    /// Evaluation inside integrators that cannot propagate errors; the first
    /// failure is kept and reported by [`Remainder::check`].
    fn at_or_record(&self, t: f64) -> Mat2 {
        match self.at(t) {
            Ok(m) => m,
            Err(e) => {
                let prev = self.failure.take();
                self.failure.set(Some(prev.unwrap_or(e)));
                Mat2::zero()
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self.failure.take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Phase-free pieces of `Q(∞, T)`: with `φ = (T − s)|ξ|`,
    /// `Q(∞,T) ≈ e^{iΔ} + i[[0, c₁₂e^{−2iφ}], [c₂₁e^{2iφ}, 0]]`.
    pub fn tail_parts(&self, t: f64) -> Result<TailParts> {
        let upper = (1.0 + t) * 1e12;
        let mut failure = None;
        let delta = integrate_log(
            |x| match self.parts(x) {
                Ok((d, _)) => d,
                Err(e) => {
                    failure.get_or_insert(e);
                    Mat2::zero()
                }
            },
            t,
            upper,
            QuadOptions::new(1e-15, 1e-11),
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        let (_, r) = self.parts(t)?;
        let two_i_xi = 2.0 * I * self.xi;
        let (c12, c21) = (r.a12 / two_i_xi, -r.a21 / two_i_xi);
        // the neglected integration-by-parts term scales like ‖off‖/(|ξ|(1+T))
        let off = c12.norm().max(c21.norm());
        let bound = off / (self.xi * (1.0 + t)) + delta.norm() * off;
        Ok(TailParts { delta: (delta.a11, delta.a22), c12, c21, bound })
    }

    /// `Q(∞, T)` in this frame and an estimate of its error.
    pub fn tail(&self, t: f64) -> Result<(Mat2, f64)> {
        let parts = self.tail_parts(t)?;
        Ok((parts.matrix((t - self.s) * self.xi), parts.bound))
    }
}

/// See [`Remainder::tail_parts`].
#[derive(Clone, Copy, Debug)]
pub struct TailParts {
    /// `∫_T^∞` of the non-oscillating diagonal
    pub delta: (C64, C64),
    pub c12: C64,
    pub c21: C64,
    pub bound: f64,
}

impl TailParts {
    /// The tail matrix at free phase `φ`.
    pub fn matrix(&self, phi: f64) -> Mat2 {
        let p = C64::from_polar(1.0, -2.0 * phi);
        let off = Mat2::new(C64::new(0.0, 0.0), self.c12 * p, self.c21 * p.conj(), C64::new(0.0, 0.0));
        Mat2::diag((I * self.delta.0).exp(), (I * self.delta.1).exp()) + off.scale(I)
    }
}

fn mat_rhs(k: Mat2, y: &[C64; 4]) -> [C64; 4] {
    (k * Mat2::from_array(*y)).scale(I).to_array()
}

fn ode_opts(tol: f64) -> OdeOptions {
    OdeOptions::with_tol(tol.clamp(1e-14, 1e-4))
}

/// `Q(t_j, s, ξ)` at sorted times `t_j ≥ s` by direct integration.
pub fn q_path_ode(rem: &Remainder, times: &[f64], tol: f64) -> Result<Vec<Mat2>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < rem.s) {
        return Err(Error::InvalidParameter("Q times must be sorted and ≥ s".into()));
    }
    let f = |t: f64, y: &[C64; 4]| mat_rhs(rem.at_or_record(t), y);
    let mut st = Dop853::new(f, rem.s, Mat2::identity().to_array(), ode_opts(tol));
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        st.advance_to(t)?;
        out.push(Mat2::from_array(*st.y()));
    }
    rem.check()?;
    Ok(out)
}

/// Iterated integrals `I_j(t) = ∫ₛᵗ K(τ₁) ∫ₛ^{τ₁} K(τ₂) ⋯ dτ` for
/// `j = 0..=depth`, with `I_0 = I`, on Gauss panels of width at most
/// `width(τ)`.
pub fn peano_baker_terms(
    mut kernel: impl FnMut(f64) -> Mat2,
    s: f64,
    t: f64,
    depth: usize,
    width: impl Fn(f64) -> f64,
) -> Vec<Mat2> {
    let panel = Panel::new();
    let mut cur = vec![Mat2::zero(); depth + 1];
    cur[0] = Mat2::identity();
    let mut a = s;
    let mut k = [Mat2::zero(); NODES];
    let mut prev = [Mat2::identity(); NODES];
    let mut next = [Mat2::zero(); NODES];
    while a < t {
        let h = width(a).min(t - a);
        let b = if t - (a + h) < 1e-12 * h { t } else { a + h };
        let h = b - a;
        for (m, km) in k.iter_mut().enumerate() {
            *km = kernel(a + h * panel.x[m]);
        }
        prev.fill(Mat2::identity());
        for j in 1..=depth {
            let kp: [Mat2; NODES] = std::array::from_fn(|m| k[m] * prev[m]);
            for i in 0..NODES {
                let mut acc = Mat2::zero();
                for m in 0..NODES {
                    acc += kp[m].scale((h * panel.s[i][m]).into());
                }
                next[i] = cur[j] + acc;
            }
            let mut end = Mat2::zero();
            for m in 0..NODES {
                end += kp[m].scale((h * panel.w[m]).into());
            }
            cur[j] += end;
            std::mem::swap(&mut prev, &mut next);
        }
        a = b;
    }
    cur
}

fn series_width(xi: f64) -> impl Fn(f64) -> f64 {
    move |tau: f64| (1.5 / xi).min(0.25 * (1.0 + tau))
}

/// `∫ₛᵗ ‖ℛ‖` on the same panels the series backend uses.
fn remainder_mass(rem: &Remainder, t: f64) -> Result<f64> {
    let panel = Panel::new();
    let width = series_width(rem.xi);
    let mut a = rem.s;
    let mut mass = 0.0;
    while a < t {
        let b = (a + width(a)).min(t);
        for m in 0..NODES {
            mass += (b - a) * panel.w[m] * rem.at(a + (b - a) * panel.x[m])?.norm();
        }
        a = b;
    }
    Ok(mass)
}

/// Smallest depth `J` with `L^{J+1}/(J+1)!·e^L ≤ tol`.
pub fn series_depth(mass: f64, tol: f64) -> usize {
    let mut term = mass;
    let mut j = 0;
    while term * mass.exp() > tol && j < 200 {
        j += 1;
        term *= mass / (j + 1) as f64;
    }
    j
}

fn q_series(rem: &Remainder, t: f64, tol: f64) -> Result<(Mat2, usize, f64)> {
    let mass = remainder_mass(rem, t)?;
    let depth = series_depth(mass, tol);
    let terms = peano_baker_terms(|x| rem.at_or_record(x), rem.s, t, depth, series_width(rem.xi));
    rem.check()?;
    let mut q = Mat2::zero();
    let mut ij = C64::new(1.0, 0.0);
    for term in &terms {
        q += term.scale(ij);
        ij *= I;
    }
    let mut bound = mass.exp();
    let mut fact = 1.0;
    for j in 1..=depth + 1 {
        fact *= mass / j as f64;
    }
    bound *= fact;
    Ok((q, depth, bound))
}

/// The individual Peano–Baker terms `i^j I_j(t, s, ξ)` of `Q`.
pub fn q_series_terms(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    t: f64,
    s: f64,
    xi: f64,
    depth: usize,
) -> Result<Vec<Mat2>> {
    let rem = Remainder::new(hier, model, geom, s, xi)?;
    let terms = peano_baker_terms(|x| rem.at_or_record(x), s, t, depth, series_width(rem.xi));
    rem.check()?;
    let mut ij = C64::new(1.0, 0.0);
    Ok(terms
        .into_iter()
        .map(|m| {
            let v = m.scale(ij);
            ij *= I;
            v
        })
        .collect())
}

/// `ℛ(t, s, ξ)`.
pub fn script_r(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    t: f64,
    s: f64,
    xi: f64,
) -> Result<Mat2> {
    geom.require_hyperbolic(t, xi)?;
    Remainder::new(hier, model, geom, s, xi)?.at(t)
}

/// `Q(t, s, ξ)` on one backend.
#[allow(clippy::too_many_arguments)]
pub fn q_matrix(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    t: f64,
    s: f64,
    xi: f64,
    backend: Backend,
    tol: f64,
) -> Result<QMatrix> {
    if t < s {
        return Err(Error::InvalidParameter(format!("need t ≥ s, got t = {t}, s = {s}")));
    }
    let rem = Remainder::new(hier, model, geom, s, xi)?;
    let (value, depth, error_bound) = match backend {
        Backend::Ode => (q_path_ode(&rem, &[t], 1e-2 * tol)?[0], None, f64::NAN),
        Backend::Series => {
            let (q, d, b) = q_series(&rem, t, 1e-2 * tol)?;
            (q, Some(d), b)
        }
    };
    Ok(QMatrix {
        value,
        horizon: Horizon::Finite(t),
        s,
        xi: rem.xi,
        backend,
        tol,
        depth,
        reached: t,
        error_bound,
        inverse: None,
    })
}

/// Runs both backends and returns their distance, failing beyond `10·tol`.
pub fn q_cross_check(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    t: f64,
    s: f64,
    xi: f64,
    tol: f64,
) -> Result<f64> {
    let a = q_matrix(hier, model, geom, t, s, xi, Backend::Ode, tol)?;
    let b = q_matrix(hier, model, geom, t, s, xi, Backend::Series, tol)?;
    let d = (a.value - b.value).norm();
    if d > 10.0 * tol {
        return Err(Error::BackendDisagreement(d));
    }
    Ok(d)
}

/// `Q(∞, s, ξ)` and its inverse.
///
/// The horizon doubles until consecutive tail-corrected estimates agree to
/// `tol` and the tail estimate is below `tol`. The inverse is integrated
/// separately from `∂_t Y = −i ℛᵀ Y`, `Y = Q⁻ᵀ`, and the product
/// `Q·Q⁻¹` is checked against the identity.
pub fn q_infinity(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    s: f64,
    xi: f64,
    tol: f64,
) -> Result<QMatrix> {
    let rem = Remainder::new(hier, model, geom, s, xi)?;
    let xi = rem.xi;
    let f = |t: f64, y: &[C64; 8]| {
        let r = rem.at_or_record(t);
        let q = Mat2::new(y[0], y[1], y[2], y[3]);
        let w = Mat2::new(y[4], y[5], y[6], y[7]);
        let dq = (r * q).scale(I).to_array();
        let dw = (r.transpose() * w).scale(-I).to_array();
        [dq[0], dq[1], dq[2], dq[3], dw[0], dw[1], dw[2], dw[3]]
    };
    let mut y0 = [C64::new(0.0, 0.0); 8];
    y0[0] = C64::new(1.0, 0.0);
    y0[3] = C64::new(1.0, 0.0);
    y0[4] = C64::new(1.0, 0.0);
    y0[7] = C64::new(1.0, 0.0);
    let mut st = Dop853::new(f, s, y0, ode_opts(1e-2 * tol));
    let mut span = (1.0 + s).max(32.0 / xi);
    let mut prev: Option<Mat2> = None;
    loop {
        let t = s + span;
        if t > MAX_HORIZON {
            return Err(Error::QNonConvergence(t));
        }
        st.advance_to(t)?;
        rem.check()?;
        let y = *st.y();
        let q = Mat2::new(y[0], y[1], y[2], y[3]);
        let w = Mat2::new(y[4], y[5], y[6], y[7]);
        let (tail, bound) = rem.tail(t)?;
        let est = tail * q;
        if let Some(p) = prev {
            if (est - p).norm() <= tol && bound <= tol {
                let tail_inv = tail.inverse().ok_or(Error::SingularDiagonalizer(tail.det().norm()))?;
                let inverse = (tail_inv.transpose() * w).transpose();
                let defect = (est * inverse - Mat2::identity()).norm();
                if defect > 100.0 * tol {
                    return Err(Error::BackendDisagreement(defect));
                }
                return Ok(QMatrix {
                    value: est,
                    horizon: Horizon::Infinite,
                    s,
                    xi,
                    backend: Backend::Ode,
                    tol,
                    depth: None,
                    reached: t,
                    error_bound: bound,
                    inverse: Some(inverse),
                });
            }
        }
        prev = Some(est);
        span *= 2.0;
    }
}

/// `D_ξ^α Q(∞, t_ξ, ξ)` for `α ≤ 2` by a five-point stencil with step
/// `ξ/50`; the stencil must stay inside `|ξ| < N` where `t_ξ` is smooth.
pub fn q_infinity_derivative(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    xi: f64,
    alpha: usize,
    tol: f64,
) -> Result<Mat2> {
    let xi = xi.abs();
    let h = xi / 50.0;
    if xi == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if xi + 2.0 * h >= geom.n {
        return Err(Error::InvalidParameter(format!("stencil around |ξ| = {xi} crosses N = {}", geom.n)));
    }
    let q = |z: f64| -> Result<Mat2> { Ok(q_infinity(hier, model, geom, geom.t_xi(z)?, z, tol)?.value) };
    let weights: [f64; 5] = match alpha {
        0 => return q(xi),
        1 => [1.0, -8.0, 0.0, 8.0, -1.0],
        2 => [-1.0, 16.0, -30.0, 16.0, -1.0],
        _ => return Err(Error::UnsupportedOrder(alpha)),
    };
    let mut acc = Mat2::zero();
    for (j, w) in weights.iter().enumerate() {
        if *w != 0.0 {
            acc = acc + q(xi + (j as f64 - 2.0) * h)?.scale((*w).into());
        }
    }
    let denom = if alpha == 1 { 12.0 * h } else { 12.0 * h * h };
    Ok(acc.scale((1.0 / denom).into()))
}

/// Tuning of the assembled representation.
#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    /// tolerance of the `Q` integration
    pub q_tol: f64,
    /// beyond `(1+t)|ξ| ≥ fast_tail`, `Q(t)` is continued through the tail
    /// formula instead of integration
    pub fast_tail: Option<f64>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { q_tol: 1e-12, fast_tail: None }
    }
}

impl AssemblyOptions {
    pub fn fast() -> Self {
        Self { q_tol: 1e-11, fast_tail: Some(2000.0) }
    }
}

/// `M N_k(t) (λ(s)/λ(t)) E₀(t,s) Q N_k⁻¹(s) M⁻¹`.
fn hyperbolic_assembly(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    t: f64,
    s: f64,
    xi: f64,
    q: Mat2,
) -> Result<Mat2> {
    let vt = hier.eval_unchecked(model, t, xi)?;
    let vs = hier.eval_unchecked(model, s, xi)?;
    let ratio = model.lambda_sq_ratio(s, t).sqrt();
    let core = vt.n_k * e0_phase(t, s, xi) * q * vs.n_k_inv;
    Ok((Mat2::eigenbasis() * core * Mat2::eigenbasis_inv()).scale(ratio.into()))
}

/// `Q(t_j, s)` with the tail continuation of `opts`.
fn q_values(rem: &Remainder, times: &[f64], opts: AssemblyOptions) -> Result<Vec<Mat2>> {
    let t_c = match opts.fast_tail {
        Some(x) => (x / rem.xi - 1.0).max(rem.s),
        None => f64::INFINITY,
    };
    let split = times.partition_point(|&t| t <= t_c);
    let mut ode_times = times[..split].to_vec();
    let continued = split < times.len();
    if continued {
        ode_times.push(t_c);
    }
    let mut qs = q_path_ode(rem, &ode_times, opts.q_tol)?;
    if continued {
        let q_c = qs.pop().expect("pushed above");
        let (tail_c, _) = rem.tail(t_c)?;
        let q_inf = tail_c * q_c;
        for &t in &times[split..] {
            let (tail, _) = rem.tail(t)?;
            let inv = tail.inverse().ok_or(Error::SingularDiagonalizer(tail.det().norm()))?;
            qs.push(inv * q_inf);
        }
    }
    Ok(qs)
}

/// Assembled fundamental solution `E(t, s, ξ)`.
pub fn assemble_full(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    t: f64,
    s: f64,
    xi: f64,
) -> Result<Mat2> {
    assemble_full_with(hier, model, geom, t, s, xi, AssemblyOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_full_with(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    t: f64,
    s: f64,
    xi: f64,
    opts: AssemblyOptions,
) -> Result<Mat2> {
    if t < s {
        return Err(Error::InvalidParameter(format!("need t ≥ s, got t = {t}, s = {s}")));
    }
    if xi == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let xi = xi.abs();
    let txi = geom.t_xi(xi)?;
    if s >= txi {
        let rem = Remainder::new(hier, model, geom, s, xi)?;
        let q = q_values(&rem, &[t], opts)?[0];
        return hyperbolic_assembly(hier, model, t, s, xi, q);
    }
    if t <= txi {
        return Ok(solve_diss_zone_path(model, geom, s, xi, &[t], VolterraOptions::default())?[0]);
    }
    let e_d = solve_diss_zone_path(model, geom, s, xi, &[txi], VolterraOptions::default())?[0];
    let rem = Remainder::new(hier, model, geom, txi, xi)?;
    let q = q_values(&rem, &[t], opts)?[0];
    Ok(hyperbolic_assembly(hier, model, t, txi, xi, q)? * e_d)
}

/// Assembled `E(t_j, 0, ξ)` along sorted output times.
pub fn assemble_path(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    xi: f64,
    times: &[f64],
    opts: AssemblyOptions,
) -> Result<Vec<Mat2>> {
    if xi == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("output times must be sorted and ≥ 0".into()));
    }
    let xi = xi.abs();
    let txi = geom.t_xi(xi)?;
    let split = times.partition_point(|&t| t <= txi);
    let mut diss_times = times[..split].to_vec();
    let hyp = &times[split..];
    if !hyp.is_empty() {
        diss_times.push(txi);
    }
    let mut out = if diss_times.is_empty() {
        Vec::new()
    } else if txi == 0.0 {
        vec![Mat2::identity(); diss_times.len()]
    } else {
        solve_diss_zone_path(model, geom, 0.0, xi, &diss_times, VolterraOptions::default())?
    };
    if hyp.is_empty() {
        return Ok(out);
    }
    let e_d = out.pop().expect("boundary value pushed above");
    let rem = Remainder::new(hier, model, geom, txi, xi)?;
    let qs = q_values(&rem, hyp, opts)?;
    for (&t, q) in hyp.iter().zip(qs) {
        out.push(hyperbolic_assembly(hier, model, t, txi, xi, q)? * e_d);
    }
    Ok(out)
}

/// Splitting `E(t, 0, ξ) = A₊e^{iξt} + A₋e^{−iξt}` for `t ≥ t_ξ`.
///
/// `Q(t)` is factored as `T(t)⁻¹·(T(t)Q(t))` with the tail matrix `T` of
/// [`Remainder::tail_parts`]; `E₀T⁻¹` separates exactly into the two
/// phases, and `T(t)Q(t)` equals `Q(∞)` up to the tail bound, so both
/// amplitudes vary slowly in `ξ`.
pub fn wave_amplitudes(
    hier: &DiagonalizationHierarchy,
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    xi: f64,
    times: &[f64],
    opts: AssemblyOptions,
) -> Result<Vec<(Mat2, Mat2)>> {
    if xi == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let xi = xi.abs();
    let txi = geom.t_xi(xi)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < txi) {
        return Err(Error::InvalidParameter(format!("output times must be sorted and ≥ t_ξ = {txi}")));
    }
    let e_d = if txi == 0.0 {
        Mat2::identity()
    } else {
        solve_diss_zone_path(model, geom, 0.0, xi, &[txi], VolterraOptions::default())?[0]
    };
    let z = hier.eval_unchecked(model, txi, xi)?.n_k_inv * Mat2::eigenbasis_inv() * e_d;
    let rem = Remainder::new(hier, model, geom, txi, xi)?;
    let qs = q_values(&rem, times, opts)?;
    let zero = C64::new(0.0, 0.0);
    let start = C64::from_polar(1.0, -xi * txi);
    times
        .iter()
        .zip(qs)
        .map(|(&t, q)| {
            let parts = rem.tail_parts(t)?;
            let tail = parts.matrix((t - txi) * xi);
            let det = tail.det();
            let (d1, d2) = ((I * parts.delta.0).exp(), (I * parts.delta.1).exp());
            let slow = tail * q * z;
            let lead = (Mat2::eigenbasis() * hier.eval_unchecked(model, t, xi)?.n_k)
                .scale(model.lambda_sq_ratio(txi, t).sqrt() / det);
            let plus = Mat2::new(d2, zero, -I * parts.c21, zero).scale(start);
            let minus = Mat2::new(zero, -I * parts.c12, zero, d1).scale(start.conj());
            Ok((lead * plus * slow, lead * minus * slow))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{fundamental_solution_oracle, OracleOptions};
    use std::f64::consts::PI;

    fn setup(model: &CoefficientModel, k: usize, n: f64) -> (DiagonalizationHierarchy, ZoneGeometry) {
        (DiagonalizationHierarchy::build(model, k).unwrap(), ZoneGeometry::new(n, k).unwrap())
    }

    #[test]
    fn free_phases() {
        assert_eq!(e0_phase(3.0, 3.0, 7.0), Mat2::identity());
        let m = e0_phase(PI, 0.0, 1.0);
        assert!((m - Mat2::scalar((-1.0).into())).norm() < 1e-15);
        let x = [C64::new(0.3, -1.2), C64::new(2.0, 0.5)];
        let y = e0_phase(12.3, 1.1, 0.77).apply(x);
        let n = |v: [C64; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        assert!((n(y) - n(x)).abs() < 1e-15);
    }

    #[test]
    fn factorial_identity_for_unit_kernel() {
        let terms = peano_baker_terms(|_| Mat2::identity(), 0.0, 1.0, 6, |_| 0.3);
        let mut fact = 1.0;
        for (j, t) in terms.iter().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            assert!((*t - Mat2::scalar((1.0 / fact).into())).norm() < 1e-15, "term {j}");
        }
        assert!((terms[3].a11.re - 1.0 / 6.0).abs() < 4.0 * f64::EPSILON);
    }

    #[test]
    fn series_depth_bound() {
        assert_eq!(series_depth(0.0, 1e-12), 0);
        let d = series_depth(0.5, 1e-12);
        let mut term = 1.0;
        for j in 1..=d + 1 {
            term *= 0.5 / j as f64;
        }
        assert!(term * 0.5f64.exp() <= 1e-12);
    }

    #[test]
    fn zero_model_is_trivial() {
        let z = CoefficientModel::zero();
        let (h, g) = setup(&z, 2, 2.0);
        assert_eq!(script_r(&h, &z, &g, 10.0, 5.0, 1.0).unwrap(), Mat2::zero());
        let q = q_matrix(&h, &z, &g, 50.0, 1.0, 1.0, Backend::Series, 1e-10).unwrap();
        assert_eq!(q.value, Mat2::identity());
        let q = q_infinity(&h, &z, &g, 1.0, 1.0, 1e-10).unwrap();
        assert!((q.value - Mat2::identity()).norm() < 1e-14);
        // M·diag-phase·M⁻¹ closed form
        for (t, s, xi) in [(3.0, 1.0, 2.0), (100.0, 0.0, 7.5), (12.0, 11.5, 3.3)] {
            let e = assemble_full(&h, &z, &g, t, s, xi).unwrap();
            let (sn, cs) = ((t - s) * xi).sin_cos();
            let want = Mat2::new(cs.into(), I * sn, I * sn, cs.into());
            assert!((e - want).norm() < 1e-10);
        }
    }

    #[test]
    fn conjugation_preserves_norm() {
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        let (h, g) = setup(&m, 1, 4.0);
        let xi = 0.8;
        let t = 40.0;
        let direct = h.eval(&m, &g, t, xi).unwrap().r_k.norm();
        for s in [4.0, 9.3, 20.0, 40.0] {
            let r = script_r(&h, &m, &g, t, s, xi).unwrap();
            assert!((r.norm() - direct).abs() < 1e-12 * direct);
        }
        assert!(matches!(script_r(&h, &m, &g, 1.0, 4.0, xi), Err(Error::ZoneMismatch { .. })));
    }

    #[test]
    fn remainder_mass_scales_like_inverse_zone_constant() {
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        let mut cs = Vec::new();
        for n in [4.0, 8.0, 16.0] {
            let (h, g) = setup(&m, 1, n);
            for xi in [0.05, 0.5, 2.0] {
                let s = g.t_xi(xi).unwrap();
                let rem = Remainder::new(&h, &m, &g, s, xi).unwrap();
                let mass = crate::quad::integrate_log(|x| rem.at(x).unwrap().norm(), s, 1e9, QuadOptions::new(1e-13, 1e-9))
                    .unwrap();
                cs.push(n * mass);
            }
        }
        let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cs.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 1.5, "C/N constants {cs:?}");
    }

    #[test]
    fn backends_agree() {
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        let (h, g) = setup(&m, 1, 4.0);
        let s = g.t_xi(1.0).unwrap();
        let d = q_cross_check(&h, &m, &g, 1e3, s, 1.0, 1e-9).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn infinite_horizon_is_invertible_and_bounded() {
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        let (h, g) = setup(&m, 2, 4.0);
        for xi in [0.01, 0.3, 5.0] {
            let s = g.t_xi(xi).unwrap();
            let q = q_infinity(&h, &m, &g, s, xi, 1e-9).unwrap();
            let inv = q.inverse.unwrap();
            assert!((q.value * inv - Mat2::identity()).norm() < 1e-7);
            let rem = Remainder::new(&h, &m, &g, s, xi).unwrap();
            let mass = crate::quad::integrate_log(|x| rem.at(x).unwrap().norm(), s, 1e10, QuadOptions::new(1e-13, 1e-9))
                .unwrap();
            let det = q.value.det().norm();
            assert!(det >= (-2.0 * mass).exp() && det <= (2.0 * mass).exp());
            assert!(q.value.norm() <= mass.exp() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn cauchy_differences_decay_like_inverse_horizon() {
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        let (h, g) = setup(&m, 1, 4.0);
        let xi = 1.0;
        let s = g.t_xi(xi).unwrap();
        let rem = Remainder::new(&h, &m, &g, s, xi).unwrap();
        let ts: Vec<f64> = [50.0, 100.0, 200.0, 400.0, 800.0, 1600.0].to_vec();
        let mut all: Vec<f64> = ts.iter().flat_map(|&t| [t, 2.0 * t]).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        let qs = q_path_ode(&rem, &all, 1e-13).unwrap();
        let at = |t: f64| qs[all.iter().position(|&x| x == t).unwrap()];
        let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| (at(2.0 * t) - at(t)).norm().ln()).collect();
        let slope = crate::rates::least_squares(&xs, &ys).0;
        assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn tail_continuation_matches_integration() {
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        let (h, g) = setup(&m, 1, 4.0);
        let xi = 2.0;
        let s = g.t_xi(xi).unwrap();
        let rem = Remainder::new(&h, &m, &g, s, xi).unwrap();
        let times = [1500.0, 3000.0];
        let direct = q_path_ode(&rem, &times, 1e-13).unwrap();
        let fast = q_values(&rem, &times, AssemblyOptions { q_tol: 1e-13, fast_tail: Some(1000.0) }).unwrap();
        for (a, b) in direct.iter().zip(&fast) {
            assert!((*a - *b).norm() < 1e-9, "{}", (*a - *b).norm());
        }
    }

    #[test]
    fn assembled_matches_oracle() {
        let opts = OracleOptions::new(1e-12);
        let si = CoefficientModel::scale_invariant(0.5).unwrap();
        let (h, g) = setup(&si, 1, 4.0);
        let a = assemble_full(&h, &si, &g, 1e3, 0.0, 0.05).unwrap();
        let o = fundamental_solution_oracle(&si, &g, 1e3, 0.0, 0.05, opts).unwrap();
        assert!(a.rel_dist(&o) < 1e-5, "{}", a.rel_dist(&o));
        let osc = CoefficientModel::oscillating(10.0).unwrap();
        let geom = crate::zones::choose_zone_constant(&osc, 1, 0.5).unwrap();
        let h = DiagonalizationHierarchy::build(&osc, 1).unwrap();
        let a = assemble_full(&h, &osc, &geom, 1e3, 0.0, 2.0).unwrap();
        let o = fundamental_solution_oracle(&osc, &geom, 1e3, 0.0, 2.0, opts).unwrap();
        assert!(a.rel_dist(&o) < 1e-5, "{}", a.rel_dist(&o));
    }

    #[test]
    fn amplitudes_recombine_to_assembly() {
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        let (h, g) = setup(&m, 1, 8.0);
        for xi in [0.05, 1.3] {
            let txi = g.t_xi(xi).unwrap();
            let times = [txi + 1.0, txi + 50.0, 3000.0];
            let amps = wave_amplitudes(&h, &m, &g, xi, &times, AssemblyOptions::fast()).unwrap();
            let full = assemble_path(&h, &m, &g, xi, &times, AssemblyOptions::fast()).unwrap();
            for ((&t, (p, q)), e) in times.iter().zip(amps).zip(full) {
                let back = p.scale(C64::from_polar(1.0, xi * t)) + q.scale(C64::from_polar(1.0, -xi * t));
                assert!(back.rel_dist(&e) < 1e-10, "xi {xi} t {t}: {}", back.rel_dist(&e));
            }
        }
    }

    #[test]
    fn stencil_differentiates_smoothly_varying_limit() {
        let m = CoefficientModel::oscillating(5.0).unwrap();
        let (h, g) = setup(&m, 2, 8.0);
        let xi = 0.4;
        let d1 = q_infinity_derivative(&h, &m, &g, xi, 1, 1e-12).unwrap();
        let step = 1e-3;
        let q = |z: f64| q_infinity(&h, &m, &g, g.t_xi(z).unwrap(), z, 1e-12).unwrap().value;
        let fd = (q(xi + step) - q(xi - step)).scale((0.5 / step).into());
        assert!((d1 - fd).norm() < 1e-5 * (1.0 + fd.norm()), "{:?} vs {:?}", d1, fd);
        assert!(q_infinity_derivative(&h, &m, &g, 7.9, 1, 1e-12).is_err());
    }

    #[test]
    fn path_agrees_with_pointwise_assembly() {
        let m = CoefficientModel::iterated_log(0.5, 1).unwrap();
        let (h, g) = setup(&m, 2, 8.0);
        let xi = 0.2;
        let times = [1.0, 20.0, 39.0, 100.0, 700.0];
        let path = assemble_path(&h, &m, &g, xi, &times, AssemblyOptions::default()).unwrap();
        for (&t, e) in times.iter().zip(&path) {
            let p = assemble_full(&h, &m, &g, t, 0.0, xi).unwrap();
            assert!(e.rel_dist(&p) < 1e-9);
        }
    }
}
