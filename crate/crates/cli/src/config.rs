//! TOML configuration: parsing, builtin scenarios, field-wise overrides and
//! validation. The schema is published in `schema/config.schema.json`.

use serde::{Deserialize, Serialize};

use skewchain_core::cocycle::{BoxDomain, IntegratorConfig, SystemDef};
use skewchain_core::cover_graph::{required_eps, BoxCover, ChainParams};
use skewchain_core::driving::{DrivingFlowSpec, DrivingGrid};
use skewchain_core::scenarios::{self, HullCoefficients, Scenario};
use skewchain_core::signals::ControlRange;

use crate::error::CliError;

pub const OUTPUT_FORMATS: [&str; 4] = ["json", "csv", "edges", "plot"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Builtin scenario the other sections override.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSection>,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// State dimension; checked against `lo`/`hi` when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Driving dimension; checked against `gamma` when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub gamma: Vec<f64>,
    /// One `[lo, hi]` pair per control channel.
    pub control: Vec<[f64; 2]>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// `f0, f1, …, fm`, each with one expression per state component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<Vec<String>>>,
    /// Coefficients of the scalar cubic family instead of `fields`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hull: Option<HullCoefficients>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub boxes: Option<Vec<usize>>,
    pub cells: Option<Vec<usize>>,
    pub control_levels: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub t: Option<f64>,
    pub eps: Option<f64>,
    pub jump_factors: Option<Vec<f64>>,
    pub corner_sampling: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub h: Option<f64>,
    /// Blow-up bound `B`; `10 · diam Q` by default.
    pub blowup: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub simulate: SimulateSection,
    pub chain_sets: Toggle,
    pub single_fiber: SingleFiberSection,
    pub equilibrium: EquilibriumSection,
    pub control_sets: ControlSetsSection,
    pub lift: LiftSection,
    pub mixing: MixingSection,
    pub verify: VerifySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toggle {
    pub enabled: bool,
}

impl Default for Toggle {
    fn default() -> Self {
        Toggle { enabled: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Start point on the torus; the origin when absent.
    pub omega: Option<Vec<f64>>,
    /// Initial state; the center of `Q` when absent.
    pub x: Option<Vec<f64>>,
    pub t: f64,
    /// Constant control value; zero when absent.
    pub control: Option<Vec<f64>>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { omega: None, x: None, t: 10.0, control: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingleFiberSection {
    pub enabled: bool,
    /// Driving point of the fiber; the origin when absent.
    pub omega0: Option<Vec<f64>>,
}

impl Default for SingleFiberSection {
    fn default() -> Self {
        SingleFiberSection { enabled: true, omega0: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumSection {
    pub enabled: bool,
    pub horizon: f64,
    pub max_horizon: f64,
    pub seed: Option<Vec<f64>>,
    pub tol: f64,
    pub residual_tol: f64,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        EquilibriumSection { enabled: true, horizon: 20.0, max_horizon: 640.0, seed: None, tol: 1e-5, residual_tol: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSetsSection {
    pub enabled: bool,
    /// Time of the exact transition graph; the chain `T` when absent.
    pub t: Option<f64>,
    /// `T` and `ε'` for the exact-control-set condition.
    pub condition_t: f64,
    pub condition_eps: f64,
    pub no_return_samples: usize,
    pub seed: u64,
    /// Horizons of the reach-interval fan.
    pub fan_times: Vec<f64>,
}

impl Default for ControlSetsSection {
    fn default() -> Self {
        ControlSetsSection {
            enabled: true,
            t: None,
            condition_t: 2.0,
            condition_eps: 0.2,
            no_return_samples: 500,
            seed: 7,
            fan_times: vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiftSection {
    pub enabled: bool,
    /// Certified window `W`; `10 · T` when absent.
    pub window: Option<f64>,
    pub samples: usize,
    pub pairs: usize,
    /// Chain tolerance; `3 · δ_box` when absent.
    pub eps: Option<f64>,
    /// Window `S` of the control metric; `2T + 1` when absent.
    pub basis_window: Option<f64>,
    pub seed: u64,
}

impl Default for LiftSection {
    fn default() -> Self {
        LiftSection { enabled: true, window: None, samples: 50, pairs: 20, eps: None, basis_window: None, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixingSection {
    pub enabled: bool,
    pub omega1: Vec<f64>,
    pub omega2: Vec<f64>,
    /// Endpoints; `α(ω) + offset` when absent.
    pub y1: Option<f64>,
    pub y2: Option<f64>,
    pub y1_offset: f64,
    pub y2_offset: f64,
    pub t: f64,
    pub eps: f64,
    pub eps0: f64,
    pub delta: f64,
    pub s_max: f64,
}

impl Default for MixingSection {
    fn default() -> Self {
        MixingSection {
            enabled: true,
            omega1: vec![0.1],
            omega2: vec![0.6],
            y1: None,
            y2: None,
            y1_offset: 0.05,
            y2_offset: -0.05,
            t: 2.0,
            eps: 0.2,
            eps0: 0.1,
            delta: 1e-2,
            s_max: 1e4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Random draws for the cocycle and metric suites.
    pub draws: usize,
    pub seed: u64,
    /// Include the doubled-resolution refinement suite.
    pub refinement: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { draws: 200, seed: 3, refinement: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "skewchain-out".into(), formats: OUTPUT_FORMATS.iter().map(|s| s.to_string()).collect() }
    }
}

/// Everything a subcommand needs.
#[derive(Clone, Debug)]
pub struct Setup {
    pub scenario: Scenario,
    pub resolved: ConfigFile,
}

impl Setup {
    pub fn analysis(&self) -> &AnalysisSection {
        &self.resolved.analysis
    }

    pub fn wants(&self, format: &str) -> bool {
        self.resolved.output.formats.iter().any(|f| f == format)
    }
}

/// Reads a TOML config, or the `config` embedded in a JSON run manifest.
pub fn load(path: &std::path::Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let config = manifest.get("config").cloned().ok_or_else(|| CliError::validation("manifest has no config"))?;
        return serde_json::from_value(config).map_err(|e| CliError::validation(format!("manifest config: {e}")));
    }
    parse(&text)
}

pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
}

fn system_section_of(s: &Scenario) -> SystemSection {
    let sys = &s.system;
    SystemSection {
        d: Some(sys.state_dim()),
        p: Some(sys.driving_dim()),
        gamma: sys.driving().frequencies().to_vec(),
        control: sys.control_range().bounds().iter().map(|&(a, b)| [a, b]).collect(),
        lo: sys.domain().lo().to_vec(),
        hi: sys.domain().hi().to_vec(),
        fields: Some(sys.fields().iter().map(|f| f.iter().map(|e| e.to_string()).collect()).collect()),
        hull: None,
    }
}

fn build_system(sec: &SystemSection) -> Result<SystemDef, CliError> {
    if let Some(d) = sec.d {
        if d != sec.lo.len() || d != sec.hi.len() {
            return Err(CliError::validation(format!(
                "system.d = {d} but lo/hi have {}/{} entries",
                sec.lo.len(),
                sec.hi.len()
            )));
        }
    }
    if sec.p.is_some_and(|p| p != sec.gamma.len()) {
        return Err(CliError::validation(format!("system.p = {:?} but gamma has {} entries", sec.p, sec.gamma.len())));
    }
    let driving =
        DrivingFlowSpec::new(sec.gamma.clone()).map_err(|e| CliError::validation(format!("system.gamma: {e}")))?;
    let range = ControlRange::new(sec.control.iter().map(|&[a, b]| (a, b)).collect())
        .map_err(|e| CliError::validation(format!("system.control: {e}")))?;
    let domain = BoxDomain::new(sec.lo.clone(), sec.hi.clone()).map_err(|e| CliError::validation(format!("system: {e}")))?;
    let result = match (&sec.fields, &sec.hull) {
        (Some(fields), None) => SystemDef::parse(driving, range, domain, fields),
        (None, Some(hull)) => hull.system(driving, range, domain),
        _ => return Err(CliError::validation("system needs exactly one of `fields` and `hull`")),
    };
    result.map_err(|e| CliError::validation(format!("system: {e}")))
}

/// Applies builtin defaults and overrides, validates, and returns the
/// scenario with the fully resolved config.
pub fn resolve(file: &ConfigFile) -> Result<Setup, CliError> {
    let base = match &file.scenario {
        Some(name) => Some(scenarios::by_name(name).ok_or_else(|| {
            CliError::validation(format!("unknown scenario `{name}`; builtins are {}", scenarios::NAMES.join(", ")))
        })?),
        None => None,
    };
    let system_sec = match (&file.system, &base) {
        (Some(sec), _) => sec.clone(),
        (None, Some(b)) => system_section_of(b),
        (None, None) => return Err(CliError::validation("config needs `scenario` or a [system] section")),
    };
    let system = build_system(&system_sec)?;
    let (d, p) = (system.state_dim(), system.driving_dim());
    let same_system = file.system.is_none();

    let disc = &file.discretization;
    let boxes = disc.boxes.clone().or_else(|| base.as_ref().map(|b| b.cover.per_dim().to_vec())).unwrap_or(vec![64; d]);
    let cells = disc
        .cells
        .clone()
        .or_else(|| base.as_ref().filter(|_| same_system).map(|b| b.grid.cells_per_dim().to_vec()))
        .unwrap_or(vec![1; p]);
    let levels = disc.control_levels.or(base.as_ref().map(|b| b.control_levels)).unwrap_or(5);
    if boxes.len() != d {
        return Err(CliError::validation(format!("discretization.boxes has {} entries, d = {d}", boxes.len())));
    }
    if cells.len() != p {
        return Err(CliError::validation(format!("discretization.cells has {} entries, p = {p}", cells.len())));
    }
    if levels == 0 {
        return Err(CliError::validation("discretization.control_levels must be positive"));
    }
    let cover =
        BoxCover::new(system.domain().clone(), boxes.clone()).map_err(|e| CliError::validation(format!("boxes: {e}")))?;
    let grid = DrivingGrid::new(cells.clone()).map_err(|e| CliError::validation(format!("cells: {e}")))?;

    let ch = &file.chain;
    let base_chain = base.as_ref().map(|b| b.chain.clone());
    let t = ch.t.or(base_chain.as_ref().map(|c| c.t)).unwrap_or(1.0);
    let eps = ch.eps.unwrap_or_else(|| required_eps(&system, &cover, &grid));
    let jump_factors =
        ch.jump_factors.clone().or(base_chain.as_ref().map(|c| c.jump_factors.clone())).unwrap_or(vec![1.0, 1.5, 2.0]);
    let corner_sampling = ch.corner_sampling.unwrap_or(false);
    if !(t > 0.0) {
        return Err(CliError::validation(format!("chain.t must be positive, got {t}")));
    }

    let h = file.integrator.h.or(base.as_ref().map(|b| b.integrator.step)).unwrap_or(0.01);
    let blowup = file.integrator.blowup.unwrap_or(10.0 * system.domain().diameter());
    let integrator = IntegratorConfig { step: h, blowup_bound: blowup, ..IntegratorConfig::for_domain(system.domain(), h) };
    integrator.validate(system.domain()).map_err(|e| CliError::validation(format!("integrator: {e}")))?;

    for f in &file.output.formats {
        if !OUTPUT_FORMATS.contains(&f.as_str()) {
            return Err(CliError::validation(format!(
                "unknown output format `{f}`; known formats are {}",
                OUTPUT_FORMATS.join(", ")
            )));
        }
    }
    let mut analysis = file.analysis.clone();
    check_point("analysis.simulate.omega", analysis.simulate.omega.as_deref(), p)?;
    check_point("analysis.simulate.x", analysis.simulate.x.as_deref(), d)?;
    check_point("analysis.simulate.control", analysis.simulate.control.as_deref(), system.control_dim())?;
    check_point("analysis.single_fiber.omega0", analysis.single_fiber.omega0.as_deref(), p)?;
    check_point("analysis.equilibrium.seed", analysis.equilibrium.seed.as_deref(), d)?;
    // the scalar default endpoints extend to the driving dimension
    for w in [&mut analysis.mixing.omega1, &mut analysis.mixing.omega2] {
        if w.len() == 1 && p > 1 {
            *w = vec![w[0]; p];
        }
    }
    check_point("analysis.mixing.omega1", Some(&analysis.mixing.omega1), p)?;
    check_point("analysis.mixing.omega2", Some(&analysis.mixing.omega2), p)?;

    let chain = ChainParams { t, eps, jump_factors: jump_factors.clone(), corner_sampling };
    let scenario = Scenario {
        name: file.scenario.clone().unwrap_or_else(|| "custom".into()),
        system,
        grid,
        cover,
        control_levels: levels,
        chain,
        integrator,
    };
    let resolved = ConfigFile {
        scenario: file.scenario.clone(),
        system: Some(system_sec),
        discretization: DiscretizationSection { boxes: Some(boxes), cells: Some(cells), control_levels: Some(levels) },
        chain: ChainSection { t: Some(t), eps: Some(eps), jump_factors: Some(jump_factors), corner_sampling: Some(corner_sampling) },
        integrator: IntegratorSection { h: Some(h), blowup: Some(blowup) },
        analysis,
        output: file.output.clone(),
    };
    Ok(Setup { scenario, resolved })
}

fn check_point(name: &str, value: Option<&[f64]>, dim: usize) -> Result<(), CliError> {
    match value {
        Some(v) if v.len() != dim => Err(CliError::validation(format!("{name} has {} entries, expected {dim}", v.len()))),
        Some(v) if v.iter().any(|c| !c.is_finite()) => Err(CliError::validation(format!("{name} is not finite"))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve_to_the_core_scenarios() {
        for name in scenarios::NAMES {
            let file = parse(&format!("scenario = \"{name}\"")).unwrap();
            let setup = resolve(&file).unwrap();
            let core = scenarios::by_name(name).unwrap();
            assert_eq!(setup.scenario.chain, core.chain);
            assert_eq!(setup.scenario.cover.per_dim(), core.cover.per_dim());
            assert_eq!(setup.scenario.grid.cells_per_dim(), core.grid.cells_per_dim());
            assert_eq!(setup.scenario.integrator, core.integrator);
            let (a, b) = (&setup.scenario.system, &core.system);
            assert_eq!(a.fields(), b.fields());
            assert_eq!(a.driving(), b.driving());
        }
    }

    #[test]
    fn resolution_is_idempotent() {
        let file = parse("scenario = \"cubic-hull\"\n[discretization]\nboxes = [64]\n").unwrap();
        let once = resolve(&file).unwrap().resolved;
        let text = toml::to_string(&once).unwrap();
        let twice = resolve(&parse(&text).unwrap()).unwrap().resolved;
        assert_eq!(once, twice);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_bounds() {
        assert!(parse("scenario = \"cubic-hull\"\n[chain]\nperiod = 1.0\n").is_err());
        let small_b = parse("scenario = \"cubic-autonomous\"\n[integrator]\nblowup = 1.0\n").unwrap();
        assert!(resolve(&small_b).is_err());
        let bad_format = parse("scenario = \"cubic-autonomous\"\n[output]\nformats = [\"xml\"]\n").unwrap();
        assert!(resolve(&bad_format).is_err());
    }

    #[test]
    fn malformed_expression_reports_the_offset() {
        let text = r#"
[system]
gamma = [1.0]
control = [[-0.5, 0.5]]
lo = [-2.0]
hi = [2.0]
fields = [["x1 +* 2"], ["1"]]
"#;
        let err = resolve(&parse(text).unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("byte 4"), "{err}");
    }
}
