//! Zone geometry of the extended phase space.
//!
//! The dissipative zone is `{(1+t)|ξ| < N}` and the hyperbolic zone its
//! complement; the boundary curve `(1+t_ξ)|ξ| = N` belongs to the hyperbolic
//! zone.

use serde::Serialize;

use crate::coeff::{log_grid, CoefficientModel};
use crate::diag::DiagonalizationHierarchy;
use crate::linalg::Mat2;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Zone {
    Dissipative,
    Hyperbolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZoneGeometry {
    /// zone constant `N`
    pub n: f64,
    /// diagonalization depth the constant was chosen for
    pub k: usize,
    /// sampled `sup ‖N_k − I‖` over the hyperbolic zone
    pub margin: f64,
}

impl ZoneGeometry {
    pub fn new(n: f64, k: usize) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter(format!("zone constant must be positive, got {n}")));
        }
        Ok(Self { n, k, margin: f64::NAN })
    }

    /// `t_ξ = max(N/|ξ| − 1, 0)`.
    pub fn t_xi(&self, xi: f64) -> Result<f64> {
        if xi == 0.0 {
            return Err(Error::ZeroFrequency);
        }
        Ok((self.n / xi.abs() - 1.0).max(0.0))
    }

    /// `∂^j_{|ξ|} t_ξ` for `j ≤ 2` (zero for `|ξ| > N`).
    pub fn t_xi_derivative(&self, xi: f64, j: usize) -> Result<f64> {
        if xi == 0.0 {
            return Err(Error::ZeroFrequency);
        }
        if j > 2 {
            return Err(Error::UnsupportedOrder(j));
        }
        let r = xi.abs();
        if r > self.n {
            return Ok(0.0);
        }
        Ok(match j {
            0 => self.n / r - 1.0,
            1 => -self.n / (r * r),
            2 => 2.0 * self.n / (r * r * r),
            _ => return Err(Error::UnsupportedOrder(j)),
        })
    }

    /// `|ξ|` at which the boundary is crossed at time `t`, `N/(1+t)`.
    pub fn xi_boundary(&self, t: f64) -> f64 {
        self.n / (1.0 + t)
    }

    pub fn zone(&self, t: f64, xi: f64) -> Result<Zone> {
        let txi = self.t_xi(xi)?;
        Ok(if t >= txi { Zone::Hyperbolic } else { Zone::Dissipative })
    }

    pub fn require_hyperbolic(&self, t: f64, xi: f64) -> Result<()> {
        match self.zone(t, xi)? {
            Zone::Hyperbolic => Ok(()),
            Zone::Dissipative => Err(Error::ZoneMismatch { t, xi, expected: "hyperbolic" }),
        }
    }

    /// Dissipative membership that also admits the boundary point `t = t_ξ`.
    pub fn require_dissipative_closure(&self, t: f64, xi: f64) -> Result<()> {
        if t <= self.t_xi(xi)? {
            Ok(())
        } else {
            Err(Error::ZoneMismatch { t, xi, expected: "dissipative" })
        }
    }
}

/// Sampled `sup ‖N_k(t,ξ) − I‖` over the hyperbolic zone of constant `n`.
///
/// The supremum sits near the boundary, where `b(t)/|ξ|` is largest, so the
/// sample follows the boundary curve over `t ∈ [0, 10⁶]` and a few interior
/// offsets, plus the strip `t = 0, |ξ| ≥ N`.
pub fn diagonalizer_margin(model: &CoefficientModel, hier: &DiagonalizationHierarchy, n: f64) -> Result<f64> {
    let mut sup = 0.0f64;
    let mut check = |t: f64, xi: f64| -> Result<()> {
        let g = model.derivatives(t, hier.max_derivative().min(model.ell()))?;
        let nk = hier.n_k().eval(&g, 1.0 / xi);
        sup = sup.max((nk - Mat2::identity()).norm());
        Ok(())
    };
    for t in std::iter::once(0.0).chain(log_grid(1e-3, 1e6, 240)) {
        let xb = n / (1.0 + t);
        for f in [1.0, 1.25, 1.6, 2.5, 4.0] {
            check(t, xb * f)?;
        }
    }
    for f in log_grid(1.0, 100.0, 20) {
        check(0.0, n * f)?;
    }
    Ok(sup)
}

/// Smallest `N ∈ {2, 4, 8, …, 2¹⁶}` whose sampled diagonalizer margin is at
/// most `safety`.
pub fn choose_zone_constant(model: &CoefficientModel, k: usize, safety: f64) -> Result<ZoneGeometry> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::InvalidParameter(format!("safety must lie in (0, 1), got {safety}")));
    }
    let hier = DiagonalizationHierarchy::build(model, k)?;
    let mut n = 2.0;
    while n <= 65536.0 {
        let margin = diagonalizer_margin(model, &hier, n)?;
        if margin <= safety {
            return Ok(ZoneGeometry { n, k, margin });
        }
        n *= 2.0;
    }
    Err(Error::ZoneSearchExhausted(n / 2.0))
}
