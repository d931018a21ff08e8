//! Dissipation coefficients `b(t)`, their derivatives, the primitive
//! `B(t) = ∫₀ᵗ b` and the auxiliary function `λ(t) = exp(B(t)/2)`.

use serde::{Deserialize, Serialize};

use crate::jet::{Jet, MAX_ORDER};
use crate::quad::{gk15, integrate_log, QuadOptions};
use crate::{Error, Result};

/// Built-in coefficient families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Zero,
    /// `b = μ/(1+t)`, `0 ≤ μ < 1`.
    ScaleInvariant { mu: f64 },
    /// `b = μ / Π_{j=0..n} log^[j](e^[n] + t)` with `log^[0]` the identity.
    IteratedLog { mu: f64, n: u32 },
    /// `b = (2 + cos(α log(e+t))) / (4(e+t))`.
    Oscillating { alpha: f64 },
    /// Cubic spline through samples, continued by `b_last (1+t_last)/(1+t)`.
    Tabulated { t: Vec<f64>, b: Vec<f64> },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::ScaleInvariant { .. } => "scale_invariant",
            Family::IteratedLog { .. } => "iterated_log",
            Family::Oscillating { .. } => "oscillating",
            Family::Tabulated { .. } => "tabulated",
        }
    }

    /// Builds a family from a tag and the loose parameter set used by
    /// configuration files.
    pub fn from_tag(
        tag: &str,
        mu: Option<f64>,
        n: Option<u32>,
        alpha: Option<f64>,
        table: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("family `{tag}` needs `{name}`")))
        };
        Ok(match tag {
            "zero" => Family::Zero,
            "scale_invariant" => Family::ScaleInvariant { mu: need(mu, "mu")? },
            "iterated_log" => Family::IteratedLog { mu: need(mu, "mu")?, n: n.unwrap_or(1) },
            "oscillating" => Family::Oscillating { alpha: need(alpha, "alpha")? },
            "tabulated" => {
                let (t, b) = table.ok_or_else(|| {
                    Error::InvalidParameter("family `tabulated` needs `table_t` and `table_b`".into())
                })?;
                Family::Tabulated { t, b }
            }
            other => return Err(Error::UnknownFamily(other.to_string())),
        })
    }
}

/// `e^[n]`: `e^[0] = 1`, `e^[k+1] = exp(e^[k])`.
pub fn iterated_exp(n: u32) -> f64 {
    (0..n).fold(1.0, |x, _| f64::exp(x))
}

/// Natural-start, clamped-end cubic spline.
#[derive(Clone, Debug)]
struct Spline {
    t: Vec<f64>,
    b: Vec<f64>,
    m: Vec<f64>,
    /// primitive at the knots
    cum: Vec<f64>,
    tail_c: f64,
}

impl Spline {
    fn new(t: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = t.len();
        if n < 2 || n != b.len() {
            return Err(Error::InvalidParameter("tabulated family needs ≥ 2 matching samples".into()));
        }
        if t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("table_t must start at 0 and increase strictly".into()));
        }
        if let Some(&v) = b.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("table_b has negative or invalid entry {v}")));
        }
        let last = n - 1;
        let tail_c = b[last] * (1.0 + t[last]);
        let end_slope = -b[last] / (1.0 + t[last]);
        // tridiagonal system for second derivatives m
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut lower = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 1.0;
        for i in 1..last {
            lower[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            upper[i] = h[i];
            rhs[i] = 6.0 * ((b[i + 1] - b[i]) / h[i] - (b[i] - b[i - 1]) / h[i - 1]);
        }
        lower[last] = h[last - 1];
        diag[last] = 2.0 * h[last - 1];
        rhs[last] = 6.0 * (end_slope - (b[last] - b[last - 1]) / h[last - 1]);
        for i in 1..n {
            let w = lower[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[last] = rhs[last] / diag[last];
        for i in (0..last).rev() {
            m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
        }
        let mut s = Self { t, b, m, cum: vec![0.0; n], tail_c };
        for i in 1..n {
            let seg = s.segment_integral(i - 1, s.t[i]);
            s.cum[i] = s.cum[i - 1] + seg;
        }
        Ok(s)
    }

    fn locate(&self, x: f64) -> usize {
        match self.t.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.t.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.t.len() - 2),
        }
    }

    /// Value and first derivative on segment `i`.
    fn eval_segment(&self, i: usize, x: f64) -> (f64, f64) {
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let c = (x - self.t[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.b[i] + c * self.b[i + 1] + ((a * a * a - a) * m0 + (c * c * c - c) * m1) * h * h / 6.0;
        let d = (self.b[i + 1] - self.b[i]) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * c * c - 1.0) * m1) * h / 6.0;
        (v, d)
    }

    fn segment_integral(&self, i: usize, x: f64) -> f64 {
        // the 15-point Kronrod panel integrates cubics exactly
        gk15(&mut |y| self.eval_segment(i, y).0, self.t[i], x).0
    }

    fn t_last(&self) -> f64 {
        *self.t.last().unwrap()
    }

    fn value(&self, x: f64, k: usize) -> f64 {
        if x >= self.t_last() {
            let s = 1.0 + x;
            return if k == 0 { self.tail_c / s } else { -self.tail_c / (s * s) };
        }
        let (v, d) = self.eval_segment(self.locate(x), x);
        if k == 0 {
            v
        } else {
            d
        }
    }

    fn primitive(&self, x: f64) -> f64 {
        let tl = self.t_last();
        if x >= tl {
            return self.cum[self.t.len() - 1] + self.tail_c * ((1.0 + x) / (1.0 + tl)).ln();
        }
        let i = self.locate(x);
        self.cum[i] + self.segment_integral(i, x)
    }
}

/// An immutable coefficient model with derivatives available up to order
/// `ell`.
#[derive(Clone, Debug)]
pub struct CoefficientModel {
    family: Family,
    ell: usize,
    spline: Option<Spline>,
}

impl CoefficientModel {
    pub fn new(family: Family, ell: usize) -> Result<Self> {
        if ell < 1 {
            return Err(Error::InvalidParameter("smoothness order ell must be ≥ 1".into()));
        }
        let mut spline = None;
        let max = match &family {
            Family::Zero => usize::MAX,
            Family::ScaleInvariant { mu } => {
                if !(0.0..1.0).contains(mu) {
                    return Err(Error::InvalidParameter(format!(
                        "scale_invariant needs 0 ≤ mu < 1, got {mu}"
                    )));
                }
                usize::MAX
            }
            Family::IteratedLog { mu, n } => {
                if !(*mu > 0.0) || *n < 1 || *n > 3 {
                    return Err(Error::InvalidParameter(format!(
                        "iterated_log needs mu > 0 and 1 ≤ n ≤ 3, got mu = {mu}, n = {n}"
                    )));
                }
                MAX_ORDER
            }
            Family::Oscillating { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::InvalidParameter("alpha must be finite".into()));
                }
                MAX_ORDER
            }
            Family::Tabulated { t, b } => {
                spline = Some(Spline::new(t.clone(), b.clone())?);
                1
            }
        };
        if ell > max {
            return Err(Error::SmoothnessExceeded { requested: ell, available: max });
        }
        Ok(Self { family, ell, spline })
    }

    pub fn zero() -> Self {
        Self::new(Family::Zero, MAX_ORDER).expect("zero model is valid")
    }

    pub fn scale_invariant(mu: f64) -> Result<Self> {
        Self::new(Family::ScaleInvariant { mu }, MAX_ORDER)
    }

    pub fn iterated_log(mu: f64, n: u32) -> Result<Self> {
        Self::new(Family::IteratedLog { mu, n }, MAX_ORDER)
    }

    pub fn oscillating(alpha: f64) -> Result<Self> {
        Self::new(Family::Oscillating { alpha }, MAX_ORDER)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, Family::Zero) || matches!(self.family, Family::ScaleInvariant { mu } if mu == 0.0)
    }

    /// Short human-readable label such as `scale_invariant(mu=0.5)`.
    pub fn label(&self) -> String {
        match &self.family {
            Family::Zero => "zero".into(),
            Family::ScaleInvariant { mu } => format!("scale_invariant(mu={mu})"),
            Family::IteratedLog { mu, n } => format!("iterated_log(mu={mu},n={n})"),
            Family::Oscillating { alpha } => format!("oscillating(alpha={alpha})"),
            Family::Tabulated { t, .. } => format!("tabulated({} samples)", t.len()),
        }
    }

    /// Taylor jet of `b` at `t` up to `order` (closed-form families only).
    fn jet(&self, t: f64, order: usize) -> Jet {
        match &self.family {
            Family::Zero => Jet::constant(0.0, order),
            Family::ScaleInvariant { mu } => Jet::variable(1.0 + t, order).recip().scale(*mu),
            Family::IteratedLog { mu, n } => {
                let mut l = Jet::variable(iterated_exp(*n) + t, order);
                let mut prod = l;
                for _ in 0..*n {
                    l = l.ln();
                    prod = prod * l;
                }
                prod.recip().scale(*mu)
            }
            Family::Oscillating { alpha } => {
                let x = Jet::variable(std::f64::consts::E + t, order);
                let (_, c) = x.ln().scale(*alpha).sin_cos();
                (c.offset(2.0) * x.recip()).scale(0.25)
            }
            Family::Tabulated { .. } => unreachable!("tabulated models have no jets"),
        }
    }

    /// `b(t)`.
    pub fn b(&self, t: f64) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::ScaleInvariant { mu } => mu / (1.0 + t),
            Family::IteratedLog { mu, n } => {
                let mut l = iterated_exp(*n) + t;
                let mut prod = l;
                for _ in 0..*n {
                    l = l.ln();
                    prod *= l;
                }
                mu / prod
            }
            Family::Oscillating { alpha } => {
                let x = std::f64::consts::E + t;
                (2.0 + (alpha * x.ln()).cos()) / (4.0 * x)
            }
            Family::Tabulated { .. } => self.spline.as_ref().unwrap().value(t, 0),
        }
    }

    /// The `k`-th derivative `b^(k)(t)`.
    pub fn eval_b(&self, t: f64, k: usize) -> Result<f64> {
        if k > self.ell {
            return Err(Error::SmoothnessExceeded { requested: k, available: self.ell });
        }
        Ok(match &self.family {
            Family::Zero => 0.0,
            Family::ScaleInvariant { mu } => {
                let mut fact = 1.0;
                for i in 2..=k {
                    fact *= i as f64;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * mu * fact / (1.0 + t).powi(k as i32 + 1)
            }
            Family::Tabulated { .. } => self.spline.as_ref().unwrap().value(t, k),
            _ if k == 0 => self.b(t),
            _ => self.jet(t, k).derivative(k),
        })
    }

    /// `[b(t), b'(t), …, b^(k)(t)]`.
    pub fn derivatives(&self, t: f64, k: usize) -> Result<Vec<f64>> {
        if k > self.ell {
            return Err(Error::SmoothnessExceeded { requested: k, available: self.ell });
        }
        Ok(match &self.family {
            Family::Zero => vec![0.0; k + 1],
            Family::ScaleInvariant { .. } | Family::Tabulated { .. } => {
                (0..=k).map(|j| self.eval_b(t, j)).collect::<Result<_>>()?
            }
            _ => self.jet(t, k).derivatives(),
        })
    }

    /// `B(t) = ∫₀ᵗ b`.
    pub fn primitive(&self, t: f64) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::ScaleInvariant { mu } => mu * t.ln_1p(),
            Family::IteratedLog { mu, n } => {
                let mut l = iterated_exp(*n) + t;
                for _ in 0..*n {
                    l = l.ln();
                }
                mu * l.ln()
            }
            Family::Oscillating { alpha } => {
                let e = std::f64::consts::E;
                let lx = (e + t).ln();
                let osc = if *alpha == 0.0 {
                    lx - 1.0
                } else {
                    ((alpha * lx).sin() - alpha.sin()) / alpha
                };
                0.5 * (lx - 1.0) + 0.25 * osc
            }
            Family::Tabulated { .. } => self.spline.as_ref().unwrap().primitive(t),
        }
    }

    /// `λ(t) = exp(B(t)/2)`, normalised so that `λ(0) = 1`.
    pub fn lambda(&self, t: f64) -> f64 {
        (0.5 * self.primitive(t)).exp()
    }

    /// `λ²(s)/λ²(t) = exp(B(s) − B(t))`, computed without overflow.
    pub fn lambda_sq_ratio(&self, s: f64, t: f64) -> f64 {
        (self.primitive(s) - self.primitive(t)).exp()
    }

    /// `ρ(t) = ∫₀ᵗ λ⁻² / (t λ⁻²(t))`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(1.0);
        }
        let bt = self.primitive(t);
        // integrate λ²(t)/λ²(τ) to keep the integrand O(1)
        let opts = QuadOptions::new(0.0, 1e-12);
        let v = integrate_log(|tau: f64| (bt - self.primitive(tau)).exp(), 0.0, t, opts)?;
        Ok(v / t)
    }
}

/// Log-spaced grid of `n` points in `[a, b]`, `a > 0`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Empirical check of positivity, symbol-like bounds and the limsup
/// condition on a time grid.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub model: String,
    /// `Ĉ_k = sup (1+t)^{1+k} |b^(k)(t)|`, `k = 0..=ℓ`.
    pub symbol_constants: Vec<f64>,
    /// `max t·b(t)` over the tail of the grid (`t ≥ 10²`).
    pub limsup_tb: f64,
    /// `(t, ρ(t))` for the positive grid points.
    pub rho: Vec<(f64, f64)>,
    /// `sup λ²(t)/(1+t)`.
    pub lambda_growth: f64,
    pub min_b: f64,
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
}

pub fn check_assumptions(model: &CoefficientModel, grid: &[f64], ell: usize) -> Result<AssumptionReport> {
    let ell = ell.min(model.ell());
    let mut consts = vec![0.0f64; ell + 1];
    let mut limsup = 0.0f64;
    let mut min_b = f64::INFINITY;
    let mut growth = 0.0f64;
    let mut rho = Vec::new();
    for &t in grid {
        let d = model.derivatives(t, ell)?;
        for (k, v) in d.iter().enumerate() {
            consts[k] = consts[k].max((1.0 + t).powi(1 + k as i32) * v.abs());
        }
        min_b = min_b.min(d[0]);
        if t >= 1e2 {
            limsup = limsup.max(t * d[0]);
        }
        growth = growth.max((model.primitive(t) - t.ln_1p()).exp());
        if t > 0.0 {
            rho.push((t, model.rho(t)?));
        }
    }
    let a2 = consts.iter().all(|c| c.is_finite());
    Ok(AssumptionReport {
        model: model.label(),
        symbol_constants: consts,
        limsup_tb: limsup,
        rho,
        lambda_growth: growth,
        min_b,
        a1: min_b >= 0.0,
        a2,
        a3: limsup < 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    #[test]
    fn trivial_values() {
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        assert_relative_eq!(m.b(10.0), 0.5 / 11.0, max_relative = 1e-15);
        assert_relative_eq!(m.eval_b(0.0, 1).unwrap(), -0.5, max_relative = 1e-15);
        assert_relative_eq!(m.lambda(99.0), 100f64.powf(0.25), max_relative = 1e-14);
        let o = CoefficientModel::oscillating(3.0).unwrap();
        assert_relative_eq!(o.b(0.0), (2.0 + 3f64.cos()) / (4.0 * E), max_relative = 1e-15);
        let z = CoefficientModel::zero();
        assert_eq!(z.derivatives(5.0, 10).unwrap(), vec![0.0; 11]);
        assert_eq!(z.lambda(1e6), 1.0);
    }

    #[test]
    fn iterated_log_closed_forms() {
        let m = CoefficientModel::iterated_log(2.0, 1).unwrap();
        assert_relative_eq!(m.b(0.0), 2.0 / E, max_relative = 1e-15);
        assert_relative_eq!(m.lambda(E * E - E), 2.0, max_relative = 1e-14);
        for t in [0.0, 3.0, 1e3] {
            assert_relative_eq!(m.lambda(t), (E + t).ln(), max_relative = 1e-14);
        }
        let m2 = CoefficientModel::iterated_log(1.0, 2).unwrap();
        assert_relative_eq!(m2.lambda(0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn lambda_starts_at_one_for_all_families() {
        for m in [
            CoefficientModel::zero(),
            CoefficientModel::scale_invariant(0.3).unwrap(),
            CoefficientModel::iterated_log(0.7, 3).unwrap(),
            CoefficientModel::oscillating(10.0).unwrap(),
            CoefficientModel::oscillating(0.0).unwrap(),
        ] {
            assert!((m.lambda(0.0) - 1.0).abs() < 1e-15, "{}", m.label());
        }
    }

    #[test]
    fn primitive_matches_quadrature() {
        for m in [
            CoefficientModel::iterated_log(1.5, 2).unwrap(),
            CoefficientModel::oscillating(7.0).unwrap(),
            CoefficientModel::oscillating(0.0).unwrap(),
        ] {
            for t in [0.5, 20.0, 1e4] {
                let q = crate::quad::integrate(|x| m.b(x), 0.0, t, QuadOptions::new(1e-13, 1e-13)).unwrap();
                assert_relative_eq!(m.primitive(t), q, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn jet_derivatives_match_finite_differences() {
        let models = [
            CoefficientModel::scale_invariant(0.5).unwrap(),
            CoefficientModel::iterated_log(2.0, 2).unwrap(),
            CoefficientModel::oscillating(10.0).unwrap(),
        ];
        for m in &models {
            for t in [0.3, 4.0, 250.0] {
                for k in 1..=6 {
                    let h = 1e-4 * (1.0 + t);
                    let fd = (m.eval_b(t + h, k - 1).unwrap() - m.eval_b(t - h, k - 1).unwrap()) / (2.0 * h);
                    let v = m.eval_b(t, k).unwrap();
                    assert!((v - fd).abs() <= 1e-6 * v.abs().max(1e-300) + 1e-14, "{} t={t} k={k}: {v} vs {fd}", m.label());
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(matches!(CoefficientModel::scale_invariant(1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(Family::from_tag("bogus", None, None, None, None), Err(Error::UnknownFamily(_))));
        let tab = Family::Tabulated { t: vec![0.0, 1.0, 2.0], b: vec![0.3, 0.2, 0.1] };
        assert!(matches!(CoefficientModel::new(tab, 2), Err(Error::SmoothnessExceeded { .. })));
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        let m1 = CoefficientModel::new(m.family().clone(), 2).unwrap();
        assert!(matches!(m1.eval_b(0.0, 3), Err(Error::SmoothnessExceeded { .. })));
    }

    #[test]
    fn tabulated_reproduces_sampled_family() {
        let src = CoefficientModel::scale_invariant(0.5).unwrap();
        let t: Vec<f64> = (0..=200).map(|i| 0.1 * i as f64).collect();
        let b: Vec<f64> = t.iter().map(|&x| src.b(x)).collect();
        let m = CoefficientModel::new(Family::Tabulated { t, b }, 1).unwrap();
        // the natural end condition costs accuracy in the first interval
        assert_relative_eq!(m.b(0.05), src.b(0.05), max_relative = 2e-3);
        for x in [1.234, 7.77, 19.99, 20.0, 500.0] {
            assert_relative_eq!(m.b(x), src.b(x), max_relative = 1e-4);
            // the primitive inherits the first-interval error as an offset
            assert!((m.primitive(x) - src.primitive(x)).abs() < 1e-4);
        }
        // first derivative is continuous across the tail junction
        let d0 = m.eval_b(20.0 - 1e-9, 1).unwrap();
        let d1 = m.eval_b(20.0 + 1e-9, 1).unwrap();
        assert_relative_eq!(d0, d1, max_relative = 1e-6);
    }

    #[test]
    fn rho_closed_form_for_scale_invariant() {
        let mu = 0.5;
        let m = CoefficientModel::scale_invariant(mu).unwrap();
        for t in [1.0f64, 1e2, 1e6] {
            let exact = ((1.0 + t).powf(1.0 - mu) - 1.0) / ((1.0 - mu) * t * (1.0 + t).powf(-mu));
            assert_relative_eq!(m.rho(t).unwrap(), exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn assumption_report_verdicts() {
        let m = CoefficientModel::scale_invariant(0.5).unwrap();
        let grid = log_grid(1e-2, 1e6, 200);
        let r = check_assumptions(&m, &grid, 3).unwrap();
        assert!(r.a1 && r.a2 && r.a3);
        assert!((r.limsup_tb - 0.5).abs() < 1e-3);
        assert!(r.rho.iter().all(|&(_, p)| p >= 1.0 - 1e-10));
    }
}
