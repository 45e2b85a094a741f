//! Scenario files: a JSON description of one run, checked and resolved into
//! library types before anything executes.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use ada_trotter::adaptive::{Budget, Precision, SearchConfig, ToleranceSet};
use ada_trotter::hilbert::{product_spinor, product_state, BasisLabel, Boundary, SpaceDescriptor, StateVector};
use ada_trotter::noise::NoiseParams;
use ada_trotter::operators::{
    build_ising, build_qlm, magnetization_x, magnetization_y, magnetization_z, Disorder, IsingParams, QlmModel, QlmParams,
    SparseOperator,
};
use ada_trotter::propagate::TrotterSplit;
use ada_trotter::spectral::{dense_diagonalize, filtered_state};
use ada_trotter::Complex64;
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSpec,
    pub initial_state: InitialState,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub search: SearchSpec,
    pub budget: BudgetSpec,
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default)]
    pub moment_orders: Vec<u32>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Ising {
        j_z: f64,
        h_x: f64,
        h_z: f64,
        sites: usize,
        #[serde(default)]
        boundary: BoundarySpec,
    },
    LongRange {
        j_z: f64,
        h_x: f64,
        h_z: f64,
        sites: usize,
        alpha: f64,
        #[serde(default)]
        boundary: BoundarySpec,
        #[serde(default)]
        disorder: Option<DisorderSpec>,
    },
    Qlm {
        j: f64,
        mu: f64,
        k: f64,
        /// Link spin `S` (0.5, 1, 1.5, …).
        spin: f64,
        lambda: f64,
        sites: usize,
    },
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    #[default]
    Periodic,
    Open,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    pub half_width: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// `exp(−iθ Σσ^y)|↓…↓⟩`.
    YRotation { theta: f64 },
    /// Every spin polarized along `axis` (`+x`, `-x`, `+y`, `-y`, `+z`, `-z`).
    Polarized { axis: String },
    /// Basis state; `matter` lists `1` for up, `links` twice the link `m` values.
    Product {
        matter: Vec<u8>,
        #[serde(default)]
        links: Vec<i32>,
    },
    /// Gauss-law vacuum of the link model.
    Vacuum,
    /// Gaussian energy filter over eigenstates, centers as energy densities.
    Filtered { centers: Vec<f64>, width: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(rename = "d_E", default = "infinite", deserialize_with = "tolerance", serialize_with = "tolerance_out")]
    pub d_e: f64,
    #[serde(default = "infinite", deserialize_with = "tolerance", serialize_with = "tolerance_out")]
    pub d_var: f64,
    #[serde(rename = "d_G", default = "infinite", deserialize_with = "tolerance", serialize_with = "tolerance_out")]
    pub d_g: f64,
    #[serde(rename = "d_Gvar", default = "infinite", deserialize_with = "tolerance", serialize_with = "tolerance_out")]
    pub d_gvar: f64,
    #[serde(default = "default_inflation")]
    pub soft_inflation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            d_e: f64::INFINITY,
            d_var: f64::INFINITY,
            d_g: f64::INFINITY,
            d_gvar: f64::INFINITY,
            soft_inflation: default_inflation(),
        }
    }
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn default_inflation() -> f64 {
    1.3
}

/// A tolerance is a number, `"inf"`, or `null` (also infinite).
fn tolerance<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(f64::INFINITY),
        Some(Raw::Number(x)) => Ok(x),
        Some(Raw::Text(s)) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
        Some(Raw::Text(s)) => Err(serde::de::Error::custom(format!("expected a number, \"inf\" or null, got \"{s}\""))),
    }
}

fn tolerance_out<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmSpec {
    #[default]
    Bisection,
    Sequential,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    #[serde(default)]
    pub algorithm: AlgorithmSpec,
    #[serde(default = "SearchSpec::default_t_min")]
    pub t_min: f64,
    #[serde(default = "SearchSpec::default_t_max")]
    pub t_max: f64,
    #[serde(default = "SearchSpec::default_resolution")]
    pub resolution: f64,
    /// `p = d / precision_divisor`.
    #[serde(default = "SearchSpec::default_divisor")]
    pub precision_divisor: f64,
    #[serde(default = "SearchSpec::default_inner")]
    pub max_inner: usize,
    #[serde(default = "SearchSpec::default_rounds")]
    pub max_rounds: usize,
}

impl SearchSpec {
    fn default_t_min() -> f64 {
        0.01
    }
    fn default_t_max() -> f64 {
        0.5
    }
    fn default_resolution() -> f64 {
        0.001
    }
    fn default_divisor() -> f64 {
        10.0
    }
    fn default_inner() -> usize {
        15
    }
    fn default_rounds() -> usize {
        8
    }
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            algorithm: AlgorithmSpec::Bisection,
            t_min: Self::default_t_min(),
            t_max: Self::default_t_max(),
            resolution: Self::default_resolution(),
            precision_divisor: Self::default_divisor(),
            max_inner: Self::default_inner(),
            max_rounds: Self::default_rounds(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub time: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub gamma: f64,
    pub trajectories: usize,
    #[serde(default)]
    pub reuse_noise_per_step: bool,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Long-time averages use `[window_start·T, T]`.
    #[serde(default = "AnalysisSpec::default_start")]
    pub window_start: f64,
    #[serde(default)]
    pub step_weighted: bool,
    /// Microcanonical window half-width per site, in energy units.
    #[serde(default = "AnalysisSpec::default_half_width")]
    pub half_width_per_site: f64,
}

impl AnalysisSpec {
    fn default_start() -> f64 {
        0.6
    }
    fn default_half_width() -> f64 {
        ada_trotter::spectral::DEFAULT_WINDOW_PER_SITE
    }
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            window_start: Self::default_start(),
            step_weighted: false,
            half_width_per_site: Self::default_half_width(),
        }
    }
}

/// A configuration problem, reported with the dotted key it concerns.
#[derive(Debug)]
pub struct InvalidKey {
    pub key: String,
    pub message: String,
}

impl fmt::Display for InvalidKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for InvalidKey {}

fn invalid(key: &str, message: impl Into<String>) -> anyhow::Error {
    InvalidKey { key: key.to_string(), message: message.into() }.into()
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in scenario {}", path.display()))
}

pub fn parse(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        invalid(&key, e.into_inner().to_string())
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub const OBSERVABLES: [&str; 4] = ["Mx", "My", "Mz", "identity"];

impl Scenario {
    pub fn sites(&self) -> usize {
        match &self.model {
            ModelSpec::Ising { sites, .. } | ModelSpec::LongRange { sites, .. } | ModelSpec::Qlm { sites, .. } => *sites,
        }
    }

    pub fn set_sites(&mut self, l: usize) {
        match &mut self.model {
            ModelSpec::Ising { sites, .. } | ModelSpec::LongRange { sites, .. } | ModelSpec::Qlm { sites, .. } => *sites = l,
        }
    }

    pub fn is_qlm(&self) -> bool {
        matches!(self.model, ModelSpec::Qlm { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |key: &str, v: f64| if v.is_finite() { Ok(()) } else { Err(invalid(key, format!("must be finite, got {v}"))) };
        match &self.model {
            ModelSpec::Ising { j_z, h_x, h_z, sites, .. } | ModelSpec::LongRange { j_z, h_x, h_z, sites, .. } => {
                finite("model.j_z", *j_z)?;
                finite("model.h_x", *h_x)?;
                finite("model.h_z", *h_z)?;
                if *sites < 2 {
                    return Err(invalid("model.sites", format!("need at least 2 sites, got {sites}")));
                }
            }
            ModelSpec::Qlm { j, mu, k, spin, lambda, sites } => {
                finite("model.j", *j)?;
                finite("model.mu", *mu)?;
                finite("model.k", *k)?;
                finite("model.lambda", *lambda)?;
                if !(*spin > 0.0) || (2.0 * spin).fract() != 0.0 {
                    return Err(invalid("model.spin", format!("must be a positive multiple of 1/2, got {spin}")));
                }
                if *sites < 2 || sites % 2 != 0 {
                    return Err(invalid("model.sites", format!("must be even and at least 2, got {sites}")));
                }
            }
        }
        if let ModelSpec::LongRange { alpha, disorder, .. } = &self.model {
            if !(*alpha > 0.0) {
                return Err(invalid("model.alpha", format!("must be positive, got {alpha}")));
            }
            if let Some(d) = disorder {
                if !(d.half_width >= 0.0) || !d.half_width.is_finite() {
                    return Err(invalid("model.disorder.half_width", format!("must be finite and ≥ 0, got {}", d.half_width)));
                }
            }
        }
        match &self.initial_state {
            InitialState::YRotation { theta } => finite("initial_state.theta", *theta)?,
            InitialState::Polarized { axis } => {
                if polarization(axis).is_none() {
                    return Err(invalid("initial_state.axis", format!("expected one of +x, -x, +y, -y, +z, -z, got \"{axis}\"")));
                }
            }
            InitialState::Product { matter, .. } => {
                if matter.len() != self.sites() || matter.iter().any(|&b| b > 1) {
                    return Err(invalid("initial_state.matter", format!("need {} entries of 0 or 1", self.sites())));
                }
            }
            InitialState::Vacuum => {
                if !self.is_qlm() {
                    return Err(invalid("initial_state.kind", "the vacuum needs a qlm model"));
                }
            }
            InitialState::Filtered { centers, width } => {
                if centers.is_empty() || centers.iter().any(|c| !c.is_finite()) {
                    return Err(invalid("initial_state.centers", "need at least one finite center"));
                }
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(invalid("initial_state.width", format!("must be positive, got {width}")));
                }
            }
        }
        for (key, v) in [
            ("tolerances.d_E", self.tolerances.d_e),
            ("tolerances.d_var", self.tolerances.d_var),
            ("tolerances.d_G", self.tolerances.d_g),
            ("tolerances.d_Gvar", self.tolerances.d_gvar),
        ] {
            if !(v > 0.0) {
                return Err(invalid(key, format!("must be positive or infinite, got {v}")));
            }
        }
        let k = self.tolerances.soft_inflation;
        if !(k >= 1.0) || !k.is_finite() {
            return Err(invalid("tolerances.soft_inflation", format!("must be finite and ≥ 1, got {k}")));
        }
        if !self.is_qlm() && (self.tolerances.d_g.is_finite() || self.tolerances.d_gvar.is_finite()) {
            return Err(invalid("tolerances.d_G", "gauge tolerances need a qlm model"));
        }
        self.search_config().validate().map_err(|e| invalid("search", e.to_string()))?;
        if !(self.search.precision_divisor > 0.0) || !self.search.precision_divisor.is_finite() {
            return Err(invalid("search.precision_divisor", "must be positive and finite"));
        }
        match (self.budget.steps, self.budget.time) {
            (None, None) => return Err(invalid("budget", "set `steps`, `time` or both")),
            (_, Some(t)) if !(t > 0.0) || !t.is_finite() => return Err(invalid("budget.time", format!("must be positive, got {t}"))),
            _ => {}
        }
        for (i, name) in self.observables.iter().enumerate() {
            if !OBSERVABLES.contains(&name.as_str()) {
                return Err(invalid(&format!("observables[{i}]"), format!("unknown observable \"{name}\", expected one of {OBSERVABLES:?}")));
            }
        }
        for (i, &n) in self.moment_orders.iter().enumerate() {
            if n == 0 {
                return Err(invalid(&format!("moment_orders[{i}]"), "orders start at 1"));
            }
        }
        if let Some(noise) = &self.noise {
            if self.is_qlm() {
                return Err(invalid("noise", "noise is only supported for spin chains"));
            }
            if !(noise.gamma >= 0.0) || !noise.gamma.is_finite() {
                return Err(invalid("noise.gamma", format!("must be finite and ≥ 0, got {}", noise.gamma)));
            }
            if noise.trajectories == 0 {
                return Err(invalid("noise.trajectories", "need at least one trajectory"));
            }
        }
        let a = &self.analysis;
        if !(0.0..1.0).contains(&a.window_start) {
            return Err(invalid("analysis.window_start", format!("must lie in [0, 1), got {}", a.window_start)));
        }
        if !(a.half_width_per_site > 0.0) || !a.half_width_per_site.is_finite() {
            return Err(invalid("analysis.half_width_per_site", "must be positive"));
        }
        Ok(())
    }

    pub fn tolerance_set(&self) -> ToleranceSet {
        let t = &self.tolerances;
        ToleranceSet { d_e: t.d_e, d_var: t.d_var, d_g: t.d_g, d_gvar: t.d_gvar, soft_inflation: t.soft_inflation }
    }

    pub fn search_config(&self) -> SearchConfig {
        let s = &self.search;
        let base = match s.algorithm {
            AlgorithmSpec::Bisection => SearchConfig::bisection(s.t_min, s.t_max),
            AlgorithmSpec::Sequential => SearchConfig::sequential(s.t_min, s.t_max, s.resolution),
        };
        SearchConfig {
            resolution: s.resolution,
            precision: Precision::Relative(s.precision_divisor),
            max_inner: s.max_inner,
            max_rounds: s.max_rounds,
            ..base
        }
    }

    pub fn budget(&self) -> Budget {
        Budget { max_steps: self.budget.steps, max_time: self.budget.time }
    }

    pub fn noise_params(&self) -> Option<NoiseParams> {
        self.noise.as_ref().map(|n| NoiseParams {
            gamma: n.gamma,
            trajectories: n.trajectories,
            seed: self.seed,
            reuse_noise_per_step: n.reuse_noise_per_step,
        })
    }

    pub fn ising_params(&self) -> Option<IsingParams> {
        let boundary = |b: BoundarySpec| match b {
            BoundarySpec::Periodic => Boundary::Periodic,
            BoundarySpec::Open => Boundary::Open,
        };
        match &self.model {
            ModelSpec::Ising { j_z, h_x, h_z, sites, boundary: b } => Some(IsingParams {
                boundary: boundary(*b),
                ..IsingParams::nearest_neighbor(*j_z, *h_x, *h_z, *sites)
            }),
            ModelSpec::LongRange { j_z, h_x, h_z, sites, alpha, boundary: b, disorder } => Some(IsingParams {
                boundary: boundary(*b),
                alpha: Some(*alpha),
                disorder: disorder.as_ref().map(|d| Disorder { half_width: d.half_width, seed: d.seed.unwrap_or(self.seed) }),
                ..IsingParams::nearest_neighbor(*j_z, *h_x, *h_z, *sites)
            }),
            ModelSpec::Qlm { .. } => None,
        }
    }

    pub fn qlm_params(&self) -> Option<QlmParams> {
        match &self.model {
            ModelSpec::Qlm { j, mu, k, spin, lambda, sites } => Some(QlmParams {
                j: *j,
                mu: *mu,
                k: *k,
                two_s: (2.0 * spin).round() as u32,
                lambda: *lambda,
                sites: *sites,
            }),
            _ => None,
        }
    }

    /// Builds the model, the initial state and the requested observables.
    pub fn resolve(&self) -> Result<Resolved> {
        let (space, split, generators, qlm) = if let Some(p) = self.ising_params() {
            (p.space()?, build_ising(&p)?, None, None)
        } else {
            let p = self.qlm_params().ok_or_else(|| anyhow!("model is neither a spin chain nor a link model"))?;
            let QlmModel { split, generators } = build_qlm(&p)?;
            (p.space()?, split, Some(generators), Some(p))
        };
        let initial = self.initial(&space, &split, qlm.as_ref())?;
        let observables = self.observables.iter().map(|n| (n.clone(), observable(n, &space))).collect();
        Ok(Resolved { space, split, generators, initial, observables })
    }

    fn initial(&self, space: &SpaceDescriptor, split: &TrotterSplit, qlm: Option<&QlmParams>) -> Result<StateVector> {
        let l = space.sites();
        let links = |two_m: i32| vec![two_m; space.link_count()];
        let default_links = qlm.map_or_else(Vec::new, |p| links(if p.two_s % 2 == 0 { 0 } else { 1 }));
        Ok(match &self.initial_state {
            InitialState::YRotation { theta } => {
                product_state(space, &BasisLabel::with_links(vec![false; l], default_links))?.global_y_rotation(*theta)
            }
            InitialState::Polarized { axis } => {
                let (up, down) = polarization(axis).expect("validated");
                product_spinor(space, up, down, &default_links)?
            }
            InitialState::Product { matter, links: given } => {
                let link_values = if given.is_empty() { default_links } else { given.clone() };
                let label = BasisLabel::with_links(matter.iter().map(|&b| b == 1).collect(), link_values);
                product_state(space, &label).map_err(|e| invalid("initial_state", e.to_string()))?
            }
            InitialState::Vacuum => product_state(space, &QlmModel::vacuum_label(qlm.expect("validated")))?,
            InitialState::Filtered { centers, width } => {
                let ed = dense_diagonalize(split.total())?;
                let centers: Vec<f64> = centers.iter().map(|c| c * l as f64).collect();
                filtered_state(&ed, &centers, *width)?
            }
        })
    }
}

pub struct Resolved {
    pub space: SpaceDescriptor,
    pub split: TrotterSplit,
    pub generators: Option<Vec<SparseOperator>>,
    pub initial: StateVector,
    pub observables: Vec<(String, SparseOperator)>,
}

pub fn observable(name: &str, space: &SpaceDescriptor) -> SparseOperator {
    match name {
        "Mx" => magnetization_x(space),
        "My" => magnetization_y(space),
        "Mz" => magnetization_z(space),
        _ => SparseOperator::identity(space.clone()),
    }
}

fn polarization(axis: &str) -> Option<(Complex64, Complex64)> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let h = (PI / 4.0).cos();
    Some(match axis {
        "+x" => (c(h, 0.0), c(h, 0.0)),
        "-x" => (c(h, 0.0), c(-h, 0.0)),
        "+y" => (c(h, 0.0), c(0.0, h)),
        "-y" => (c(h, 0.0), c(0.0, -h)),
        "+z" => (c(1.0, 0.0), c(0.0, 0.0)),
        "-z" => (c(0.0, 0.0), c(1.0, 0.0)),
        _ => return None,
    })
}

pub fn bail_if_noisy(s: &Scenario, command: &str) -> Result<()> {
    if s.noise.is_some() {
        bail!("`{command}` does not support a noise section");
    }
    Ok(())
}
