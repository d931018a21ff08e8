//! Experiment configuration: a TOML file with one section per module.

use std::path::Path;

use anyhow::{bail, Context, Result};
use dampwave::coeff::log_grid;
use dampwave::jet::MAX_ORDER;
use dampwave::rates::minimal_regularity;
use dampwave::zones::{choose_zone_constant, ZoneGeometry};
use dampwave::{CoefficientModel, Family};
use serde::Deserialize;

/// Either an explicit list or `{ min, max, points }` on a log scale.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Log { min: f64, max: f64, points: usize },
}

impl Grid {
    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Grid::Log { min, max, points }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Log { min, max, points } => log_grid(*min, *max, *points),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            Grid::List(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    bail!("grid `{name}` contains a non-finite value");
                }
                if v.windows(2).any(|w| w[1] <= w[0]) {
                    bail!("grid `{name}` must be strictly increasing");
                }
            }
            Grid::Log { min, max, points } => {
                if !(*min > 0.0 && max >= min && max.is_finite()) {
                    bail!("grid `{name}` needs 0 < min ≤ max, got [{min}, {max}]");
                }
                if *points == 0 {
                    bail!("grid `{name}` is empty; set `points` ≥ 1");
                }
            }
        }
        Ok(())
    }
}

fn tolerance(name: &str, v: f64) -> Result<()> {
    if !(1e-15..=1e-2).contains(&v) {
        bail!("tolerance `{name}` = {v:e} outside the supported range [1e-15, 1e-2]");
    }
    Ok(())
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSection {
    pub family: String,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub n: Option<u32>,
    pub ell: Option<usize>,
    pub table_t: Option<Vec<f64>>,
    pub table_b: Option<Vec<f64>>,
}

impl Default for CoeffSection {
    fn default() -> Self {
        Self { family: "scale_invariant".into(), mu: Some(0.5), alpha: None, n: None, ell: None, table_t: None, table_b: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZonesSection {
    pub k: usize,
    /// zone constant; searched by doubling when absent
    pub n: Option<f64>,
    pub safety: f64,
}

impl Default for ZonesSection {
    fn default() -> Self {
        Self { k: 2, n: None, safety: 0.5 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionsSection {
    pub t: Grid,
    pub ell: usize,
}

impl Default for AssumptionsSection {
    fn default() -> Self {
        Self { t: Grid::log(1e-2, 1e6, 33), ell: 6 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorSection {
    pub t: Grid,
    pub xi: Grid,
    pub tol: f64,
}

impl Default for PropagatorSection {
    fn default() -> Self {
        Self { t: Grid::log(1.0, 1e3, 20), xi: Grid::log(1e-2, 10.0, 20), tol: 1e-12 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagSection {
    pub k_max: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub n_xi: usize,
    pub t_max: f64,
    pub n_t: usize,
}

impl Default for DiagSection {
    fn default() -> Self {
        Self { k_max: 3, xi_min: 1e-2, xi_max: 10.0, n_xi: 12, t_max: 1e4, n_t: 12 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatteringSection {
    pub xi: Grid,
    pub horizons: Grid,
    pub tol: f64,
}

impl Default for ScatteringSection {
    fn default() -> Self {
        Self { xi: Grid::log(1e-2, 10.0, 12), horizons: Grid::log(1e2, 1e4, 13), tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ObservableTag {
    Energy,
    Solution,
    Dispersive,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    pub observable: ObservableTag,
    pub dim: usize,
    pub t: Grid,
    pub xi: Grid,
    pub window: [f64; 2],
}

impl Default for RatesSection {
    fn default() -> Self {
        Self {
            observable: ObservableTag::Energy,
            dim: 3,
            t: Grid::log(1e2, 1e4, 9),
            xi: Grid::log(1e-3, 1e2, 81),
            window: [1e2, 1e4],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolterraSection {
    /// `[t, s, |ξ|]` triples inside the dissipative zone
    pub points: Vec<[f64; 3]>,
    pub tol: f64,
}

impl Default for VolterraSection {
    fn default() -> Self {
        Self { points: vec![[50.0, 0.0, 0.01], [150.0, 10.0, 0.01], [30.0, 0.0, 0.06]], tol: 1e-12 }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub coeff: CoeffSection,
    pub zones: ZonesSection,
    pub assumptions: AssumptionsSection,
    pub propagator: PropagatorSection,
    pub diag: DiagSection,
    pub scattering: ScatteringSection,
    pub rates: RatesSection,
    pub volterra: VolterraSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.assumptions.t.validate("assumptions.t")?;
        self.propagator.t.validate("propagator.t")?;
        self.propagator.xi.validate("propagator.xi")?;
        self.scattering.xi.validate("scattering.xi")?;
        self.scattering.horizons.validate("scattering.horizons")?;
        self.rates.t.validate("rates.t")?;
        self.rates.xi.validate("rates.xi")?;
        tolerance("propagator.tol", self.propagator.tol)?;
        tolerance("scattering.tol", self.scattering.tol)?;
        tolerance("volterra.tol", self.volterra.tol)?;
        if self.zones.k == 0 {
            bail!("zones.k must be ≥ 1");
        }
        if !(0.0 < self.zones.safety && self.zones.safety < 1.0) {
            bail!("zones.safety must lie in (0, 1), got {}", self.zones.safety);
        }
        if self.diag.k_max == 0 || self.diag.n_xi == 0 || self.diag.n_t == 0 {
            bail!("diag.k_max, diag.n_xi and diag.n_t must be ≥ 1");
        }
        if !(self.rates.window[0] < self.rates.window[1]) {
            bail!("rates.window must be [lo, hi] with lo < hi");
        }
        if let Some(ell) = self.coeff.ell {
            let need = 2 * self.zones.k - 1;
            if ell < need {
                bail!("coeff.ell = {ell} is too small for zones.k = {}: need ell ≥ 2k − 1 = {need}", self.zones.k);
            }
            if self.rates.observable == ObservableTag::Dispersive {
                let need = minimal_regularity(self.rates.dim);
                if ell < need {
                    bail!("coeff.ell = {ell} is too small for rates.dim = {}: need ell ≥ {need}", self.rates.dim);
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<CoefficientModel> {
        let c = &self.coeff;
        let table = match (&c.table_t, &c.table_b) {
            (Some(t), Some(b)) => Some((t.clone(), b.clone())),
            (None, None) => None,
            _ => bail!("coeff.table_t and coeff.table_b must be given together"),
        };
        let family = Family::from_tag(&c.family, c.mu, c.n, c.alpha, table)?;
        let default_ell = if matches!(family, Family::Tabulated { .. }) { 1 } else { MAX_ORDER };
        Ok(CoefficientModel::new(family, c.ell.unwrap_or(default_ell))?)
    }

    pub fn geometry(&self, model: &CoefficientModel) -> Result<ZoneGeometry> {
        self.geometry_for(model, self.zones.k)
    }

    pub fn geometry_for(&self, model: &CoefficientModel, k: usize) -> Result<ZoneGeometry> {
        Ok(match self.zones.n {
            Some(n) => ZoneGeometry::new(n, k)?,
            None => choose_zone_constant(model, k, self.zones.safety)?,
        })
    }
}
