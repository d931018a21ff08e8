//! Diagonalization hierarchy in the hyperbolic zone.
//!
//! After the change of basis `M` the system reads `D_t V = (D + R)V` with
//! `D = diag(|ξ|, −|ξ|)` and `R = (ib/2)·[[1, 1], [1, 1]]`. The stages are
//!
//! ```text
//! B^(j)   = (D + R)N_j − N_j(D + F_{j−1}) − D_t N_j      (B^(0) = R, F_{−1} = 0)
//! F^(j)   = diag B^(j)
//! N^(j+1) = [[0, −B^(j)_12], [B^(j)_21, 0]] / (2|ξ|)
//! ```
//!
//! with `N_j = Σ_{ν≤j} N^(ν)` and `F_j = Σ_{ν≤j} F^(ν)`. They satisfy
//! `B^(j) + [D, N^(j+1)] − F^(j) = 0`, and the remainder of depth `k` is
//! `R_k = N_k⁻¹ B^(k)`, so that
//! `D_t N_k − (D + R)N_k + N_k(D + F_{k−1} + R_k) = 0`.

pub mod symbol;

use serde::Serialize;

use crate::coeff::{log_grid, CoefficientModel};
use crate::linalg::{Mat2, C64, I};
use crate::zones::ZoneGeometry;
use crate::{Error, Result};
pub use symbol::{CompiledMat, SymMat, SymbolExpr};

/// Smallest admissible `|det N_k|`.
pub const MIN_DET: f64 = 0.1;

fn d_matrix() -> SymMat {
    SymMat::new(SymbolExpr::u_pow(-1), SymbolExpr::zero(), SymbolExpr::zero(), -&SymbolExpr::u_pow(-1))
}

fn r_matrix() -> SymMat {
    let r = SymbolExpr::g(0).scale(0.5 * I);
    SymMat::new(r.clone(), r.clone(), r.clone(), r)
}

fn next_diagonalizer(b: &SymMat) -> SymMat {
    let half_u = SymbolExpr::u_pow(1).scale(C64::new(0.5, 0.0));
    SymMat::new(SymbolExpr::zero(), -&(&b.e[1] * &half_u), &b.e[2] * &half_u, SymbolExpr::zero())
}

#[derive(Clone, Debug)]
pub struct DiagonalizationHierarchy {
    k: usize,
    /// `N^(0..=k)`
    n_stage: Vec<SymMat>,
    /// `F^(0..=k−1)`
    f_stage: Vec<SymMat>,
    /// `B^(0..=k)`
    b_stage: Vec<SymMat>,
    n_k: SymMat,
    f_km1: SymMat,
    dtn_k: SymMat,
    compiled: Compiled,
    max_derivative: usize,
}

#[derive(Clone, Debug)]
struct Compiled {
    n_k: CompiledMat,
    f_km1: CompiledMat,
    b_k: CompiledMat,
    dtn_k: CompiledMat,
}

/// Numerical values of the depth-`k` objects at one point of the zone.
#[derive(Clone, Copy, Debug)]
pub struct StageValues {
    pub n_k: Mat2,
    pub n_k_inv: Mat2,
    pub f_km1: Mat2,
    pub r_k: Mat2,
    /// `B^(k)`
    pub b_k: Mat2,
    /// `D_t N_k`
    pub dtn_k: Mat2,
    /// `b(t)`
    pub b: f64,
}

impl DiagonalizationHierarchy {
    /// Builds the symbolic stages up to depth `k` for a model with the
    /// smoothness `ℓ ≥ 2k − 1` the construction assumes.
    pub fn build(model: &CoefficientModel, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("diagonalization depth k must be ≥ 1".into()));
        }
        let needed = 2 * k - 1;
        if model.ell() < needed {
            return Err(Error::SmoothnessExceeded { requested: needed, available: model.ell() });
        }
        Ok(Self::build_unchecked(k))
    }

    /// Builds the stages without reference to a model.
    pub fn build_unchecked(k: usize) -> Self {
        let r = r_matrix();
        let mut n_stage = vec![SymMat::identity()];
        let mut f_stage: Vec<SymMat> = Vec::new();
        let mut b_stage = vec![r.clone()];
        let mut n_sum = SymMat::identity();
        let mut f_sum = SymMat::zero();
        for j in 0..k {
            let b = &b_stage[j];
            let f = b.diagonal_part();
            let n_next = next_diagonalizer(b);
            f_sum = &f_sum + &f;
            // B^(j+1) = −D_t N^(j+1) + R N^(j+1) − N^(j+1) F_j − (N_j − I) F^(j)
            let nm = &n_sum - &SymMat::identity();
            let b_next = &(&(&(&r * &n_next) - &n_next.d_t()) - &(&n_next * &f_sum)) - &(&nm * &f);
            n_sum = &n_sum + &n_next;
            n_stage.push(n_next);
            f_stage.push(f);
            b_stage.push(b_next);
        }
        let dtn_k = n_sum.d_t();
        let compiled = Compiled {
            n_k: n_sum.compile(),
            f_km1: f_sum.compile(),
            b_k: b_stage[k].compile(),
            dtn_k: dtn_k.compile(),
        };
        let max_derivative = [n_sum.max_derivative(), f_sum.max_derivative(), b_stage[k].max_derivative(), dtn_k.max_derivative()]
            .into_iter()
            .flatten()
            .max()
            .unwrap_or(0);
        Self { k, n_stage, f_stage, b_stage, n_k: n_sum, f_km1: f_sum, dtn_k, compiled, max_derivative }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_stage(&self, j: usize) -> &SymMat {
        &self.n_stage[j]
    }

    pub fn f_stage(&self, j: usize) -> &SymMat {
        &self.f_stage[j]
    }

    pub fn b_stage(&self, j: usize) -> &SymMat {
        &self.b_stage[j]
    }

    pub fn n_k(&self) -> &SymMat {
        &self.n_k
    }

    pub fn f_km1(&self) -> &SymMat {
        &self.f_km1
    }

    /// `D_t N_k`.
    pub fn dtn_k(&self) -> &SymMat {
        &self.dtn_k
    }

    /// `F_{k−1} − F^(0)`, the diagonal drift left after removing `ib/2`.
    pub fn f_drift(&self) -> SymMat {
        &self.f_km1 - &self.f_stage[0]
    }

    /// Highest derivative of `b` needed to evaluate the depth-`k` objects.
    pub fn max_derivative(&self) -> usize {
        self.max_derivative
    }

    /// `B^(j)` recomputed from its definition
    /// `(D + R)N_j − N_j(D + F_{j−1}) − D_t N_j`.
    pub fn stage_by_definition(&self, j: usize) -> SymMat {
        let d = d_matrix();
        let r = r_matrix();
        let mut n = SymMat::identity();
        let mut f = SymMat::zero();
        for nu in 1..=j {
            n = &n + &self.n_stage[nu];
            f = &f + &self.f_stage[nu - 1];
        }
        &(&(&(&d + &r) * &n) - &(&n * &(&d + &f))) - &n.d_t()
    }

    /// `B^(j) + [D, N^(j+1)] − F^(j)`, identically zero.
    pub fn cancellation_defect(&self, j: usize) -> SymMat {
        let d = d_matrix();
        let n = &self.n_stage[j + 1];
        let comm = &(&d * n) - &(n * &d);
        &(&self.b_stage[j] + &comm) - &self.f_stage[j]
    }

    /// Evaluates the depth-`k` objects at `(t, |ξ|)` in the hyperbolic zone.
    pub fn eval(&self, model: &CoefficientModel, geom: &ZoneGeometry, t: f64, xi: f64) -> Result<StageValues> {
        geom.require_hyperbolic(t, xi)?;
        self.eval_unchecked(model, t, xi)
    }

    /// Evaluation without the zone check.
    pub fn eval_unchecked(&self, model: &CoefficientModel, t: f64, xi: f64) -> Result<StageValues> {
        let g = model.derivatives(t, self.max_derivative.min(model.ell()))?;
        self.eval_with(&g, xi)
    }

    /// Evaluation from precomputed derivatives `g = [b, b', …]`.
    pub fn eval_with(&self, g: &[f64], xi: f64) -> Result<StageValues> {
        if g.len() <= self.max_derivative {
            return Err(Error::SmoothnessExceeded { requested: self.max_derivative, available: g.len() - 1 });
        }
        let u = 1.0 / xi;
        let n_k = self.compiled.n_k.eval(g, u);
        let det = n_k.det().norm();
        if det < MIN_DET {
            return Err(Error::SingularDiagonalizer(det));
        }
        let n_k_inv = n_k.inverse().ok_or(Error::SingularDiagonalizer(det))?;
        let b_k = self.compiled.b_k.eval(g, u);
        Ok(StageValues {
            n_k,
            n_k_inv,
            f_km1: self.compiled.f_km1.eval(g, u),
            r_k: n_k_inv * b_k,
            b_k,
            dtn_k: self.compiled.dtn_k.eval(g, u),
            b: g[0],
        })
    }

    /// `‖D_t N_k − (D + R)N_k + N_k(D + F_{k−1} + R_k)‖`.
    pub fn conjugation_residual(&self, model: &CoefficientModel, geom: &ZoneGeometry, t: f64, xi: f64) -> Result<f64> {
        let v = self.eval(model, geom, t, xi)?;
        let d = Mat2::diag(xi.into(), (-xi).into());
        let r = Mat2::scalar(0.5 * I * v.b) * Mat2::from_real(1.0, 1.0, 1.0, 1.0);
        let res = v.dtn_k - (d + r) * v.n_k + v.n_k * (d + v.f_km1 + v.r_k);
        let scale = xi.max(1.0) * v.n_k.norm();
        Ok(res.norm() / scale)
    }
}

/// Sampling of the hyperbolic zone used by the symbol-class checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SampleSpec {
    pub xi_min: f64,
    pub xi_max: f64,
    pub n_xi: usize,
    pub t_max: f64,
    pub n_t: usize,
}

impl SampleSpec {
    pub fn doubled(&self) -> Self {
        Self { n_xi: 2 * self.n_xi, n_t: 2 * self.n_t, ..*self }
    }

    /// Points `(t, |ξ|)` with `t_ξ ≤ t ≤ t_max`.
    pub fn points(&self, geom: &ZoneGeometry) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for xi in log_grid(self.xi_min, self.xi_max, self.n_xi) {
            let t0 = geom.t_xi(xi).unwrap_or(0.0);
            if t0 > self.t_max {
                continue;
            }
            for s in log_grid(1.0 + t0, 1.0 + self.t_max.max(t0), self.n_t) {
                out.push(((s - 1.0).max(t0), xi));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginReport {
    pub declared: (i32, i32),
    /// `((k, |α|), sup)` for every derivative order sampled
    pub per_order: Vec<((usize, usize), f64)>,
    pub sup: f64,
    pub points: usize,
}

/// Measures `sup |D_t^k ∂^α a|·|ξ|^{−m₁+|α|}(1+t)^{m₂+k}` over sampled points
/// of the hyperbolic zone. Derivatives in `ξ` are radial: for `|α| = a` the
/// Cartesian derivative of a radial symbol is bounded by
/// `max_{m ≤ a} |∂_r^m a|·|ξ|^{m−a}` up to a combinatorial factor.
pub fn symbol_class_margin(
    expr: &SymbolExpr,
    declared: (i32, i32),
    model: &CoefficientModel,
    geom: &ZoneGeometry,
    spec: &SampleSpec,
    k_max: usize,
    alpha_max: usize,
) -> Result<MarginReport> {
    let (m1, m2) = declared;
    // derivative table: dt^k dr^a expr
    let mut table = Vec::new();
    let mut dtk = expr.clone();
    for _ in 0..=k_max {
        let mut row = vec![dtk.clone()];
        for a in 1..=alpha_max {
            let next = row[a - 1].dr();
            row.push(next);
        }
        table.push(row.into_iter().map(|e| e.compile()).collect::<Vec<_>>());
        dtk = dtk.d_t();
    }
    let max_der = {
        let mut e = expr.clone();
        let mut m = e.max_derivative().unwrap_or(0);
        for _ in 0..k_max {
            e = e.dt();
            m = m.max(e.max_derivative().unwrap_or(0));
        }
        m
    };
    let pts = spec.points(geom);
    let mut per = vec![0.0f64; (k_max + 1) * (alpha_max + 1)];
    for &(t, xi) in &pts {
        let g = model.derivatives(t, max_der)?;
        let u = 1.0 / xi;
        for (k, row) in table.iter().enumerate() {
            let vals: Vec<f64> = row.iter().map(|c| c.eval(&g, u).norm()).collect();
            for a in 0..=alpha_max {
                let radial = (0..=a).map(|m| vals[m] * xi.powi(m as i32 - a as i32)).fold(0.0, f64::max);
                let w = radial * xi.powi(-m1 + a as i32) * (1.0 + t).powi(m2 + k as i32);
                let slot = &mut per[k * (alpha_max + 1) + a];
                *slot = slot.max(w);
            }
        }
    }
    let per_order: Vec<_> = (0..=k_max)
        .flat_map(|k| (0..=alpha_max).map(move |a| (k, a)))
        .zip(per.iter().copied())
        .collect();
    let sup = per.iter().copied().fold(0.0, f64::max);
    Ok(MarginReport { declared, per_order, sup, points: pts.len() })
}
