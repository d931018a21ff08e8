//! Volterra integral equations of the second kind,
//! `f(t) = f(t₀) + ∫_{t₀}^t k(t,τ) f(τ) dτ`, solved by successive
//! approximation on panels short enough for the local map to contract.
//!
//! Each panel carries a 12-node Gauss–Legendre grid; the unknown is
//! represented by its nodal values and integrated with the spectral matrix
//! `S_ij = ∫_a^{x_i} L_j`, `L_j` the Lagrange basis. Panel widths `w` satisfy
//! `w·sup‖k‖ ≤ ½`, so fixed-point iteration gains at least one bit per sweep.
//!
//! The module also applies the solver to the dissipative zone, where the
//! fundamental solution factors as `E(t,s,ξ) = Λ(t,s)·G(t)` with
//! `G = I + ∫ₛᵗ iK(τ,s,ξ) G dτ`.

use crate::linalg::{Mat2, C64, I};
use crate::ode::{Dop853, OdeOptions};
use crate::quad::{gauss_legendre, integrate, QuadOptions};
use crate::zones::ZoneGeometry;
use crate::{CoefficientModel, Error, Result};

pub(crate) const NODES: usize = 12;
const MAX_SWEEPS: usize = 200;

/// Panel quadrature data on the reference interval `[0, 1]`.
pub(crate) struct Panel {
    pub(crate) x: [f64; NODES],
    pub(crate) w: [f64; NODES],
    /// `s[i][j] = ∫_0^{x_i} L_j`
    pub(crate) s: [[f64; NODES]; NODES],
}

impl Panel {
    pub(crate) fn new() -> Self {
        let (z, wz) = gauss_legendre(NODES);
        let mut x = [0.0; NODES];
        let mut w = [0.0; NODES];
        for i in 0..NODES {
            x[i] = 0.5 * (z[i] + 1.0);
            w[i] = 0.5 * wz[i];
        }
        let mut s = [[0.0; NODES]; NODES];
        for i in 0..NODES {
            for j in 0..NODES {
                // Gauss rule on [0, x_i] is exact for the degree-11 basis
                let mut acc = 0.0;
                for q in 0..NODES {
                    let y = x[i] * x[q];
                    acc += w[q] * lagrange(&x, j, y);
                }
                s[i][j] = acc * x[i];
            }
        }
        Self { x, w, s }
    }
}

fn lagrange(x: &[f64; NODES], j: usize, y: f64) -> f64 {
    let mut p = 1.0;
    for m in 0..NODES {
        if m != j {
            p *= (y - x[m]) / (x[j] - x[m]);
        }
    }
    p
}

/// A matrix Volterra problem on `[t0, T]`.
pub struct VolterraProblem<K: Fn(f64, f64) -> Mat2> {
    pub t0: f64,
    pub f0: Mat2,
    /// `k(t, τ)`
    pub kernel: K,
    /// when false, `k(t, τ) = k(τ)` and the history integral is a running sum
    pub kernel_depends_on_t: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct VolterraOptions {
    pub tol: f64,
    /// ceiling on the local contraction factor `w·sup‖k‖`
    pub contraction: f64,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        Self { tol: 1e-13, contraction: 0.5 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VolterraStats {
    pub panels: usize,
    pub sweeps: usize,
    /// largest local contraction factor used
    pub max_contraction: f64,
}

struct Node {
    t: f64,
    w: f64,
    f: Mat2,
}

/// Solves the problem and returns `f` at the sorted output times.
pub fn solve_volterra<K: Fn(f64, f64) -> Mat2>(
    problem: &VolterraProblem<K>,
    times: &[f64],
    opts: VolterraOptions,
) -> Result<(Vec<Mat2>, VolterraStats)> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < problem.t0) {
        return Err(Error::InvalidParameter("output times must be sorted and ≥ t0".into()));
    }
    let panel = Panel::new();
    let k = &problem.kernel;
    let mut stats = VolterraStats::default();
    let mut history: Vec<Node> = Vec::new();
    let mut running = Mat2::zero();
    let mut out = Vec::with_capacity(times.len());
    let mut a = problem.t0;
    let mut f_a = problem.f0;
    let t_end = times.last().copied().unwrap_or(problem.t0);
    let mut next_out = 0;
    while next_out < times.len() && times[next_out] <= a {
        out.push(f_a);
        next_out += 1;
    }
    let mut width = t_end - a;
    while a < t_end {
        let target = times[next_out];
        width = width.max(1e-300).min(target - a);
        // shrink until the panel contracts
        let (b, factor) = loop {
            let b = if width >= target - a { target } else { a + width };
            let h = b - a;
            let mut sup = 0.0f64;
            for i in 0..NODES {
                let ti = a + h * panel.x[i];
                sup = sup.max(k(ti, ti).norm());
                for j in [0, NODES / 2, NODES - 1] {
                    sup = sup.max(k(ti, a + h * panel.x[j]).norm());
                }
            }
            sup = sup.max(k(b, b).norm()).max(k(a, a).norm());
            if !sup.is_finite() {
                return Err(Error::ContractionUnattainable(sup));
            }
            if h * sup <= opts.contraction {
                break (b, h * sup);
            }
            width = 0.5 * h;
            if width <= 1e-13 * (1.0 + a.abs()) {
                return Err(Error::ContractionUnattainable(sup));
            }
        };
        let h = b - a;
        let xs: Vec<f64> = panel.x.iter().map(|x| a + h * x).collect();
        let hist = |t: f64| -> Mat2 {
            if problem.kernel_depends_on_t {
                let mut acc = Mat2::zero();
                for n in &history {
                    acc += k(t, n.t) * n.f * n.w;
                }
                acc
            } else {
                running
            }
        };
        let base: Vec<Mat2> = xs.iter().map(|&t| problem.f0 + hist(t)).collect();
        let kk: Vec<Vec<Mat2>> = xs.iter().map(|&ti| xs.iter().map(|&tj| k(ti, tj)).collect()).collect();
        let mut f = vec![f_a; NODES];
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            stats.sweeps += 1;
            let mut delta = 0.0f64;
            let mut scale = 1.0f64;
            let mut next = Vec::with_capacity(NODES);
            for i in 0..NODES {
                let mut v = base[i];
                for j in 0..NODES {
                    v += kk[i][j] * f[j] * (h * panel.s[i][j]);
                }
                delta = delta.max((v - f[i]).max_abs());
                scale = scale.max(v.max_abs());
                next.push(v);
            }
            f = next;
            if delta <= opts.tol * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::FixedPointNonConvergence { a, b });
        }
        // value at the panel end
        let mut fb = problem.f0 + hist(b);
        for j in 0..NODES {
            fb += k(b, xs[j]) * f[j] * (h * panel.w[j]);
        }
        for j in 0..NODES {
            let w = h * panel.w[j];
            if problem.kernel_depends_on_t {
                history.push(Node { t: xs[j], w, f: f[j] });
            } else {
                running += k(xs[j], xs[j]) * f[j] * w;
            }
        }
        stats.panels += 1;
        stats.max_contraction = stats.max_contraction.max(factor);
        a = b;
        f_a = fb;
        while next_out < times.len() && times[next_out] <= a {
            out.push(f_a);
            next_out += 1;
        }
        width = 2.0 * h;
    }
    Ok((out, stats))
}

/// Solves one problem per parameter value, in parallel when enabled.
pub fn solve_family<P: Sync, K: Fn(f64, f64) -> Mat2>(
    params: &[P],
    build: impl Fn(&P) -> VolterraProblem<K> + Sync + Send,
    times: &[f64],
    opts: VolterraOptions,
) -> Vec<Result<Vec<Mat2>>> {
    crate::sweep::par_map(params, |p| solve_volterra(&build(p), times, opts).map(|r| r.0))
}

/// `Λ(t,s) = diag((1+s)/(1+t), λ²(s)/λ²(t))`.
pub fn diss_lambda(model: &CoefficientModel, t: f64, s: f64) -> Mat2 {
    Mat2::diag(((1.0 + s) / (1.0 + t)).into(), model.lambda_sq_ratio(s, t).into())
}

/// Off-diagonal kernel `K(τ,s,ξ)` of the dissipative zone.
pub fn diss_kernel(model: &CoefficientModel, n: f64, tau: f64, s: f64, xi: f64) -> Mat2 {
    let r = model.lambda_sq_ratio(s, tau);
    let z = C64::new(0.0, 0.0);
    Mat2::new(z, (n * r / (1.0 + s)).into(), ((1.0 + s) * xi * xi / (r * n)).into(), z)
}

/// `E(t_j, s, ξ)` in the dissipative zone from the integral equation.
pub fn solve_diss_zone_path(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    s: f64,
    xi: f64,
    times: &[f64],
    opts: VolterraOptions,
) -> Result<Vec<Mat2>> {
    let xi = xi.abs();
    for &t in times {
        geom.require_dissipative_closure(t, xi)?;
    }
    if times.first().is_some_and(|&t| t < s) {
        return Err(Error::InvalidParameter("need t ≥ s".into()));
    }
    let n = geom.n;
    let problem = VolterraProblem {
        t0: s,
        f0: Mat2::identity(),
        kernel: |_t: f64, tau: f64| diss_kernel(model, n, tau, s, xi).scale(I),
        kernel_depends_on_t: false,
    };
    let (g, _) = solve_volterra(&problem, times, opts)?;
    Ok(times.iter().zip(g).map(|(&t, g)| diss_lambda(model, t, s) * g).collect())
}

pub fn solve_diss_zone(model: &CoefficientModel, geom: &ZoneGeometry, t: f64, s: f64, xi: f64) -> Result<Mat2> {
    Ok(solve_diss_zone_path(model, geom, s, xi, &[t], VolterraOptions::default())?[0])
}

/// The two kernel integrals that control the dissipative-zone bound,
/// `λ²(s)/(1+s)·∫ₛ^{t_ξ} λ⁻²` and `|ξ|²(1+s)/λ²(s)·∫ₛᵗ λ²`.
pub fn diss_zone_kernel_integrals(
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    t: f64,
    s: f64,
    xi: f64,
) -> Result<(f64, f64)> {
    let xi = xi.abs();
    geom.require_dissipative_closure(t, xi)?;
    if t < s {
        return Err(Error::InvalidParameter(format!("need t ≥ s, got t = {t}, s = {s}")));
    }
    let txi = geom.t_xi(xi)?;
    let opts = QuadOptions::new(0.0, 1e-12);
    let first = integrate(|tau: f64| model.lambda_sq_ratio(s, tau), s, txi, opts)? / (1.0 + s);
    let second = xi * xi * (1.0 + s) * integrate(|tau: f64| model.lambda_sq_ratio(tau, s), s, t, opts)?;
    Ok((first, second))
}

/// Closed form of `E(t, 0, ξ)` in the dissipative zone when `b ≡ 0`.
pub fn free_diss_zone(n: f64, t: f64, xi: f64) -> Mat2 {
    let (sn, cs) = (xi * t).sin_cos();
    let s = 1.0 + t;
    Mat2::new((cs / s).into(), I * (n * sn / (s * xi)), I * (xi * sn / n), cs.into())
}

/// `F(r) = E(t_r, 0, r)` and its first two radial derivatives, including the
/// dependence through `t_r = N/r − 1`, from the variational equations.
pub fn diss_zone_boundary_jet(model: &CoefficientModel, geom: &ZoneGeometry, xi: f64, tol: f64) -> Result<[Mat2; 3]> {
    if xi == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let xi = xi.abs();
    let n = geom.n;
    let txi = geom.t_xi(xi)?;
    if txi == 0.0 {
        // for |ξ| ≥ N the zone is empty and E(0,0,ξ) = I
        return Ok([Mat2::identity(), Mat2::zero(), Mat2::zero()]);
    }
    let a_of = |t: f64| crate::propagator::zone_matrix(crate::zones::Zone::Dissipative, model.b(t), n, t, xi);
    let a_xi = |t: f64| Mat2::from_real(0.0, 0.0, 2.0 * (1.0 + t) * xi / n, 0.0);
    let a_xixi = |t: f64| Mat2::from_real(0.0, 0.0, 2.0 * (1.0 + t) / n, 0.0);
    let f = |t: f64, y: &[C64; 12]| {
        let e = Mat2::new(y[0], y[1], y[2], y[3]);
        let e1 = Mat2::new(y[4], y[5], y[6], y[7]);
        let e2 = Mat2::new(y[8], y[9], y[10], y[11]);
        let a = a_of(t);
        let a1 = a_xi(t);
        let a2 = a_xixi(t);
        let d0 = (a * e).scale(I);
        let d1 = (a1 * e + a * e1).scale(I);
        let d2 = (a2 * e + a1 * e1 * 2.0 + a * e2).scale(I);
        let mut out = [C64::new(0.0, 0.0); 12];
        out[..4].copy_from_slice(&d0.to_array());
        out[4..8].copy_from_slice(&d1.to_array());
        out[8..].copy_from_slice(&d2.to_array());
        out
    };
    let mut y0 = [C64::new(0.0, 0.0); 12];
    y0[0] = C64::new(1.0, 0.0);
    y0[3] = C64::new(1.0, 0.0);
    let mut st = Dop853::new(f, 0.0, y0, OdeOptions::with_tol(tol));
    st.advance_to(txi)?;
    let y = st.y();
    let e = Mat2::new(y[0], y[1], y[2], y[3]);
    let e1 = Mat2::new(y[4], y[5], y[6], y[7]);
    let e2 = Mat2::new(y[8], y[9], y[10], y[11]);
    let t1 = geom.t_xi_derivative(xi, 1)?;
    let t2 = geom.t_xi_derivative(xi, 2)?;
    let a = a_of(txi);
    let a1 = a_xi(txi);
    let s1 = 1.0 + txi;
    let bp = if model.ell() >= 1 { model.eval_b(txi, 1)? } else { 0.0 };
    let a_t = Mat2::new(-I / (s1 * s1), C64::new(-n / (s1 * s1), 0.0), C64::new(xi * xi / n, 0.0), I * bp);
    let et = (a * e).scale(I);
    let ext = (a1 * e + a * e1).scale(I);
    let ett = (a_t * e).scale(I) + (a * et).scale(I);
    let d1 = e1 + et * t1;
    let d2 = e2 + ext * (2.0 * t1) + ett * (t1 * t1) + et * t2;
    Ok([e, d1, d2])
}

/// `∂^α_{|ξ|} E(t_ξ, 0, ξ)` for `α ∈ {1, 2}`.
pub fn deriv_diss_zone(model: &CoefficientModel, geom: &ZoneGeometry, xi: f64, alpha: usize) -> Result<Mat2> {
    if !(1..=2).contains(&alpha) {
        return Err(Error::UnsupportedOrder(alpha));
    }
    if xi.abs() > geom.n {
        return Err(Error::ZoneMismatch { t: 0.0, xi, expected: "dissipative" });
    }
    Ok(diss_zone_boundary_jet(model, geom, xi, 1e-12)?[alpha])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_solution() {
        let p = VolterraProblem {
            t0: 0.0,
            f0: Mat2::identity(),
            kernel: |_t: f64, _tau: f64| Mat2::identity(),
            kernel_depends_on_t: false,
        };
        let (f, stats) = solve_volterra(&p, &[0.5, 1.0], VolterraOptions::default()).unwrap();
        assert!((f[1].a11.re - std::f64::consts::E).abs() < 1e-12);
        assert!((f[0].a11.re - 0.5f64.exp()).abs() < 1e-12);
        assert!(stats.max_contraction <= 0.5);
    }

    #[test]
    fn zero_kernel_keeps_initial_value() {
        let f0 = Mat2::from_real(1.0, 2.0, 3.0, 4.0);
        let p = VolterraProblem { t0: 1.0, f0, kernel: |_t: f64, _tau: f64| Mat2::zero(), kernel_depends_on_t: true };
        let (f, _) = solve_volterra(&p, &[1.0, 2.0, 7.0], VolterraOptions::default()).unwrap();
        assert!(f.iter().all(|m| *m == f0));
    }

    #[test]
    fn convolution_kernel_depending_on_t() {
        // f = 1 + ∫₀ᵗ (t − τ) f dτ has solution cosh t
        let p = VolterraProblem {
            t0: 0.0,
            f0: Mat2::identity(),
            kernel: |t: f64, tau: f64| Mat2::identity() * (t - tau),
            kernel_depends_on_t: true,
        };
        let (f, _) = solve_volterra(&p, &[2.0], VolterraOptions::default()).unwrap();
        assert!((f[0].a11.re - 2f64.cosh()).abs() < 1e-11);
    }

    #[test]
    fn unbounded_kernel_is_rejected() {
        let p = VolterraProblem {
            t0: 0.0,
            f0: Mat2::identity(),
            kernel: |_t: f64, tau: f64| Mat2::identity() * (1.0 / (1.0 - tau)),
            kernel_depends_on_t: false,
        };
        assert!(matches!(
            solve_volterra(&p, &[1.0], VolterraOptions::default()),
            Err(Error::ContractionUnattainable(_))
        ));
    }

    #[test]
    fn diss_zone_matches_closed_form_for_zero_model() {
        let z = CoefficientModel::zero();
        let g = ZoneGeometry::new(4.0, 1).unwrap();
        let xi = 0.02;
        for t in [0.0, 10.0, 199.0] {
            let e = solve_diss_zone(&z, &g, t, 0.0, xi).unwrap();
            assert!((e - free_diss_zone(4.0, t, xi)).norm() < 1e-10);
        }
    }

    #[test]
    fn boundary_jet_matches_finite_differences_for_zero_model() {
        let z = CoefficientModel::zero();
        let g = ZoneGeometry::new(4.0, 1).unwrap();
        let f = |r: f64| free_diss_zone(4.0, g.t_xi(r).unwrap(), r);
        for xi in [0.05, 0.7] {
            let jet = diss_zone_boundary_jet(&z, &g, xi, 1e-13).unwrap();
            let h = 1e-4 * xi;
            let d1 = (f(xi + h) - f(xi - h)) * (0.5 / h);
            let d2 = (f(xi + h) - f(xi) * 2.0 + f(xi - h)) * (1.0 / (h * h));
            assert!((jet[0] - f(xi)).norm() < 1e-10);
            assert!(jet[1].rel_dist(&d1) < 1e-6, "{:e}", jet[1].rel_dist(&d1));
            assert!(jet[2].rel_dist(&d2) < 1e-3, "{:e}", jet[2].rel_dist(&d2));
        }
    }

    #[test]
    fn kernel_integrals_for_scale_invariant_damping() {
        let mu = 0.5;
        let m = CoefficientModel::scale_invariant(mu).unwrap();
        let g = ZoneGeometry::new(2.0, 1).unwrap();
        let mut second = 0.0f64;
        for xi in [1e-1, 1e-2, 1e-3, 1e-4] {
            let txi = g.t_xi(xi).unwrap();
            for s in [0.0, 0.5 * txi, txi] {
                let (a, b) = diss_zone_kernel_integrals(&m, &g, txi, s, xi).unwrap();
                // λ² = (1+t)^μ integrates in closed form
                let r = (1.0 + txi) / (1.0 + s);
                let want_a = (r.powf(1.0 - mu) - 1.0) / (1.0 - mu);
                let want_b = xi * xi * (1.0 + s) * (1.0 + s) * (r.powf(1.0 + mu) - 1.0) / (1.0 + mu);
                assert!((a - want_a).abs() <= 1e-10 * want_a.max(1.0), "{a} vs {want_a}");
                assert!((b - want_b).abs() <= 1e-10 * want_b.max(1e-300), "{b} vs {want_b}");
                second = second.max(b);
            }
        }
        // the second integral stays below a multiple of N² as ξ → 0
        assert!(second < 2.0 * g.n * g.n, "{second}");
        // the first grows like |ξ|^{μ−1} at s = 0
        let (a3, _) = diss_zone_kernel_integrals(&m, &g, g.t_xi(1e-3).unwrap(), 0.0, 1e-3).unwrap();
        let (a5, _) = diss_zone_kernel_integrals(&m, &g, g.t_xi(1e-5).unwrap(), 0.0, 1e-5).unwrap();
        assert!((a5 / a3 / 10.0 - 1.0).abs() < 0.05, "{}", a5 / a3);
    }
}
