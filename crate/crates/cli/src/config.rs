//! Run configuration: a JSON file with per-command sections, resolved
//! against a region preset and overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tourism_core::dataio::{self, ColumnMap, RegionPreset};
use tourism_core::flow::{self, FlowSchedule, IslandParams, SiteState};
use tourism_core::gsa::{GsaConfig, Method, OutputSelector, Parameter, ParameterSpace};
use tourism_core::moea::EAConfig;
use tourism_core::scenario::{AllocationPolicy, FeedbackCoefficients};
use tourism_core::sd::{ExogenousSeries, ModelCoefficients, PolicyBounds, PolicyVector, SimState};
use tourism_core::{Error, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub dataset: Option<PathBuf>,
    /// Preset supplying coefficients, bounds and envelopes for a dataset run.
    pub defaults_from: Option<String>,
    #[serde(default)]
    pub column_map: Option<ColumnMap>,
    pub seed: Option<u64>,
    pub initial_environment: Option<f64>,
    /// Multiplier on baseline demand.
    pub demand_scale: Option<f64>,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
    pub policy: Option<PolicyVector>,
    pub bounds: Option<PolicyBounds>,
    pub optimize: Option<EAConfig>,
    pub sensitivity: Option<SensitivitySection>,
    pub scenarios: Option<Vec<ScenarioEntry>>,
    pub feedback: Option<FeedbackCoefficients>,
    pub flow: Option<FlowSection>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivitySection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_selector")]
    pub output: String,
    /// `"policy"`, `"model"`, or an explicit list.
    #[serde(default)]
    pub parameters: ParameterChoice,
    #[serde(flatten)]
    pub settings: GsaConfig,
}

fn default_method() -> String {
    "morris".into()
}

fn default_selector() -> String {
    "all".into()
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self {
            method: default_method(),
            output: default_selector(),
            parameters: ParameterChoice::default(),
            settings: GsaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParameterChoice {
    Named(String),
    Explicit(Vec<Parameter>),
}

impl Default for ParameterChoice {
    fn default() -> Self {
        ParameterChoice::Named("model".into())
    }
}

/// A preset name or a full allocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioEntry {
    Preset(String),
    Custom(AllocationPolicy),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub params: Option<IslandParams>,
    pub sites: Option<Vec<SiteState>>,
    pub schedule: Option<FlowSchedule>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Config(format!(
                "{}:{}:{}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.preset {
            self.preset = Some(p.clone());
            self.dataset = None;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
    }

    /// Hex SHA-256 of the canonical JSON form. The output directory is
    /// excluded so relocated reruns hash the same.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let canonical = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config(format!("{command} needs a seed (--seed or \"seed\")")))
    }
}

/// Everything a model run needs once presets and overrides are applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub label: String,
    pub preset: RegionPreset,
    pub exog: ExogenousSeries,
    pub coeffs: ModelCoefficients,
    pub bounds: PolicyBounds,
    pub policy: PolicyVector,
    pub init: SimState,
    pub seed: u64,
}

pub fn resolve(cfg: &RunConfig) -> Result<Resolved> {
    let seed = cfg.seed.unwrap_or(0);
    let (label, preset, mut exog) = match (&cfg.preset, &cfg.dataset) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("give either a preset or a dataset, not both".into()))
        }
        (None, None) => return Err(Error::Config("a preset or a dataset path is required".into())),
        (Some(name), None) => {
            if cfg.defaults_from.is_some() {
                return Err(Error::Config("defaults_from applies to dataset runs only".into()));
            }
            let preset = RegionPreset::by_name(name)?;
            let exog = dataio::synth_dataset(&preset, seed)?;
            (preset.name.clone(), preset, exog)
        }
        (None, Some(path)) => {
            let preset = RegionPreset::by_name(cfg.defaults_from.as_deref().unwrap_or("juneau"))?;
            let map = cfg.column_map.clone().unwrap_or_else(ColumnMap::identity);
            let mut table = dataio::load_table(path, &map).map_err(|e| match e {
                Error::Io(m) => Error::Data(m),
                other => other,
            })?;
            for name in &preset.assumed_series {
                let idx = tourism_core::sd::SERIES_NAMES
                    .iter()
                    .position(|n| n == name)
                    .expect("assumed series are model series");
                table.fill_if_empty(name, preset.trends[idx].start);
            }
            let exog = dataio::interpolate_missing(&table)?;
            for w in dataio::validate_ranges(&exog, &preset.envelope) {
                eprintln!("warning: {w}");
            }
            (format!("dataset:{}", path.display()), preset, exog)
        }
    };
    if let Some(f) = cfg.demand_scale {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::Config(format!("demand_scale must be > 0, got {f}")));
        }
        exog.scale_demand(f);
    }
    exog.validate()?;

    let mut coeffs = preset.coefficients;
    for (k, v) in &cfg.coefficients {
        coeffs.set(k, *v)?;
    }
    coeffs.validate()?;
    let bounds = cfg.bounds.unwrap_or(preset.bounds);
    bounds.validate()?;
    let policy = cfg.policy.unwrap_or(preset.policy);
    let e0 = cfg
        .initial_environment
        .unwrap_or_else(|| preset.initial_environment.draw(seed));
    let init = SimState::initial(&exog, e0).map_err(|e| Error::Config(e.to_string()))?;

    Ok(Resolved {
        label,
        preset,
        exog,
        coeffs,
        bounds,
        policy,
        init,
        seed,
    })
}

pub fn ea_config(cfg: &RunConfig, r: &Resolved, seed: u64) -> Result<EAConfig> {
    let mut ea = cfg.optimize.clone().unwrap_or_else(|| r.preset.ea.clone());
    ea.seed = seed;
    ea.validate()?;
    Ok(ea)
}

pub struct SensitivityPlan {
    pub method: Method,
    pub selector: OutputSelector,
    pub space: ParameterSpace,
    pub settings: GsaConfig,
}

pub fn sensitivity_plan(
    cfg: &RunConfig,
    r: &Resolved,
    seed: u64,
    method: Option<&str>,
    objective: Option<&str>,
) -> Result<SensitivityPlan> {
    let sec = cfg.sensitivity.clone().unwrap_or_default();
    let method = Method::parse(method.unwrap_or(&sec.method))?;
    let selector = OutputSelector::parse(objective.unwrap_or(&sec.output))?;
    let space = match &sec.parameters {
        ParameterChoice::Named(n) if n == "policy" => ParameterSpace::policy(&r.bounds),
        ParameterChoice::Named(n) if n == "model" => ParameterSpace::default_model(&r.bounds, &r.coeffs),
        ParameterChoice::Named(n) => {
            return Err(Error::Config(format!(
                "parameters must be \"policy\", \"model\" or a list, got \"{n}\""
            )))
        }
        ParameterChoice::Explicit(list) => {
            let space = ParameterSpace::new(list.clone())?;
            let mut probe_p = r.policy;
            let mut probe_c = r.coeffs;
            for p in &space.params {
                if probe_p.field_mut(&p.name).is_none() {
                    probe_c.set(&p.name, p.low)?;
                }
            }
            space
        }
    };
    let mut settings = sec.settings;
    settings.seed = seed;
    Ok(SensitivityPlan {
        method,
        selector,
        space,
        settings,
    })
}

pub fn scenarios(cfg: &RunConfig) -> Result<Vec<AllocationPolicy>> {
    let Some(list) = &cfg.scenarios else {
        return Ok(AllocationPolicy::presets());
    };
    if list.is_empty() {
        return Err(Error::Config("scenario list is empty".into()));
    }
    list.iter()
        .map(|e| match e {
            ScenarioEntry::Preset(name) => AllocationPolicy::preset(name)
                .ok_or_else(|| Error::Config(format!("unknown scenario preset '{name}'"))),
            ScenarioEntry::Custom(p) => {
                p.validate()?;
                Ok(p.clone())
            }
        })
        .collect()
}

pub fn feedback(cfg: &RunConfig, r: &Resolved) -> Result<FeedbackCoefficients> {
    let fb = cfg.feedback.unwrap_or(r.preset.feedback);
    fb.validate()?;
    Ok(fb)
}

pub struct FlowPlan {
    pub params: IslandParams,
    pub sites: Vec<SiteState>,
    pub schedule: FlowSchedule,
}

pub fn flow_plan(cfg: &RunConfig) -> Result<FlowPlan> {
    let sec = cfg.flow.clone().unwrap_or_default();
    let params = sec.params.unwrap_or_default();
    params.validate()?;
    let sites = sec.sites.unwrap_or_else(flow::iceland_sites);
    if sites.is_empty() {
        return Err(Error::Config("flow needs at least one site".into()));
    }
    for s in &sites {
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
    }
    let schedule = sec
        .schedule
        .unwrap_or_else(|| flow::iceland_marketing_shift(&sites));
    schedule.validate(sites.len())?;
    Ok(FlowPlan {
        params,
        sites,
        schedule,
    })
}
