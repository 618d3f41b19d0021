//! Budget-allocation scenarios: each year's surplus is split across
//! environment, infrastructure, community and marketing channels, and each
//! channel feeds back into the dynamics the following year.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sd::{
    advance_year, ExogenousSeries, ModelCoefficients, Objectives, PolicyVector, SimState,
    Trajectory, YearAdjustment,
};

/// Fractions of annual surplus routed to each channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPolicy {
    pub name: String,
    pub env: f64,
    pub infra: f64,
    pub community: f64,
    pub marketing: f64,
}

impl AllocationPolicy {
    pub fn new(name: impl Into<String>, env: f64, infra: f64, community: f64, marketing: f64) -> Self {
        Self {
            name: name.into(),
            env,
            infra,
            community,
            marketing,
        }
    }

    /// All channels off: the plain model.
    pub fn none() -> Self {
        Self::new("No Allocation", 0.0, 0.0, 0.0, 0.0)
    }

    pub fn environment_first() -> Self {
        Self::new("Environment First", 0.7, 0.1, 0.1, 0.2)
    }

    pub fn balanced_growth() -> Self {
        Self::new("Balanced Growth", 0.3, 0.25, 0.25, 0.25)
    }

    pub fn infrastructure_led() -> Self {
        Self::new("Infrastructure-Led", 0.3, 0.6, 0.1, 0.0)
    }

    pub fn community_focus() -> Self {
        Self::new("Community Focus", 0.2, 0.2, 0.6, 0.3)
    }

    /// The four named presets, in their conventional order.
    pub fn presets() -> Vec<Self> {
        vec![
            Self::environment_first(),
            Self::balanced_growth(),
            Self::infrastructure_led(),
            Self::community_focus(),
        ]
    }

    pub fn preset(name: &str) -> Option<Self> {
        let key = name.to_ascii_lowercase().replace(['-', '_', ' '], "");
        match key.as_str() {
            "environmentfirst" | "envfirst" => Some(Self::environment_first()),
            "balancedgrowth" | "balanced" => Some(Self::balanced_growth()),
            "infrastructureled" | "infraled" => Some(Self::infrastructure_led()),
            "communityfocus" | "community" => Some(Self::community_focus()),
            "none" | "noallocation" => Some(Self::none()),
            _ => None,
        }
    }

    pub fn fractions(&self) -> [f64; 4] {
        [self.env, self.infra, self.community, self.marketing]
    }

    pub fn sum(&self) -> f64 {
        self.fractions().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (label, v) in ["env", "infra", "community", "marketing"].iter().zip(self.fractions()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "scenario '{}': {label} fraction {v} outside [0, 1]",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Rescales to sum 1 when the fractions over-commit the surplus.
    /// Returns the policy actually applied and the factor used (1 when untouched).
    pub fn normalized(&self) -> (Self, f64) {
        let s = self.sum();
        if s <= 1.0 {
            return (self.clone(), 1.0);
        }
        let k = 1.0 / s;
        (
            Self::new(
                self.name.clone(),
                self.env * k,
                self.infra * k,
                self.community * k,
                self.marketing * k,
            ),
            k,
        )
    }
}

/// Per-USD effect of each feedback channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackCoefficients {
    /// Capacity (visitors/year) gained per USD.
    pub infra_efficiency: f64,
    /// Extra baseline demand (visitors) per USD.
    pub marketing_efficiency: f64,
    /// Satisfaction gained per USD, scaled by `1 - S`.
    pub community_efficiency: f64,
}

impl Default for FeedbackCoefficients {
    fn default() -> Self {
        Self {
            infra_efficiency: 4000.0 / 1e5,
            marketing_efficiency: 2500.0 / 1e5,
            community_efficiency: 2e-9,
        }
    }
}

impl FeedbackCoefficients {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.infra_efficiency,
            self.marketing_efficiency,
            self.community_efficiency,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!("feedback coefficients must be >= 0, got {all:?}")));
        }
        Ok(())
    }
}

/// USD routed to each channel in one year.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelAmounts {
    pub env: f64,
    pub infra: f64,
    pub community: f64,
    pub marketing: f64,
}

impl ChannelAmounts {
    pub fn total(&self) -> f64 {
        self.env + self.infra + self.community + self.marketing
    }
}

/// Splits a year's net revenue. Deficits fund nothing.
pub fn allocate_surplus(net_revenue: f64, policy: &AllocationPolicy) -> ChannelAmounts {
    let s = net_revenue.max(0.0);
    ChannelAmounts {
        env: s * policy.env,
        infra: s * policy.infra,
        community: s * policy.community,
        marketing: s * policy.marketing,
    }
}

/// Parameters a scenario adjusts between years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub capacity_limit: f64,
    /// Added to the next year's baseline demand; consumed once.
    pub extra_base_demand: f64,
    /// Added to the next year's environmental budget; consumed once.
    pub extra_env_spending: f64,
}

impl EffectiveParams {
    pub fn from_policy(policy: &PolicyVector) -> Self {
        Self {
            capacity_limit: policy.capacity_limit,
            extra_base_demand: 0.0,
            extra_env_spending: 0.0,
        }
    }
}

/// Applies one year's channel spending. Returns the parameters for the next
/// year and the satisfaction after the community boost.
pub fn apply_feedback(
    params: &EffectiveParams,
    satisfaction: f64,
    amounts: &ChannelAmounts,
    fb: &FeedbackCoefficients,
) -> (EffectiveParams, f64) {
    let next = EffectiveParams {
        capacity_limit: params.capacity_limit + amounts.infra * fb.infra_efficiency,
        extra_base_demand: amounts.marketing * fb.marketing_efficiency,
        extra_env_spending: amounts.env,
    };
    let s = satisfaction + fb.community_efficiency * amounts.community * (1.0 - satisfaction);
    (next, s.clamp(0.0, 1.0))
}

/// Fixed inputs shared by every scenario in a comparison.
#[derive(Debug, Clone)]
pub struct ScenarioBase {
    pub policy: PolicyVector,
    pub exog: ExogenousSeries,
    pub coeffs: ModelCoefficients,
    pub init: SimState,
    pub feedback: FeedbackCoefficients,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    /// The fractions actually applied, after any normalization.
    pub allocation: AllocationPolicy,
    /// Factor applied to the requested fractions (1 when untouched).
    pub normalization: f64,
    pub trajectory: Trajectory,
    pub objectives: Objectives,
    /// Spending per simulated year, aligned with `trajectory.diagnostics`.
    pub channels: Vec<ChannelAmounts>,
    /// Capacity limit in force for each simulated year.
    pub capacity: Vec<f64>,
}

/// Runs the model with surplus feedback: each year steps the dynamics,
/// splits the surplus, then applies the channel effects.
pub fn run_scenario(allocation: &AllocationPolicy, base: &ScenarioBase) -> Result<ScenarioRun> {
    allocation.validate()?;
    base.feedback.validate()?;
    base.init.validate()?;
    if base.exog.is_empty() {
        return Err(Error::Data("exogenous series is empty".into()));
    }
    let (applied, normalization) = allocation.normalized();
    let horizon = base.exog.len() - 1;

    let mut policy = base.policy;
    let mut params = EffectiveParams::from_policy(&base.policy);
    let mut state = base.init;
    let mut years = vec![base.exog.years[0]];
    let mut states = vec![state];
    let mut diagnostics = Vec::with_capacity(horizon);
    let mut channels = Vec::with_capacity(horizon);
    let mut capacity = Vec::with_capacity(horizon);

    for t in 0..horizon {
        policy.capacity_limit = params.capacity_limit;
        let adjust = YearAdjustment {
            extra_base_demand: params.extra_base_demand,
            extra_env_spending: params.extra_env_spending,
        };
        let out = advance_year(&state, &base.exog, t, &policy, &base.coeffs, &adjust)?;
        let amounts = allocate_surplus(out.diagnostics.net_revenue, &applied);
        let (next, s) = apply_feedback(&params, out.state.satisfaction, &amounts, &base.feedback);

        state = out.state;
        state.satisfaction = s;
        capacity.push(params.capacity_limit);
        params = next;
        years.push(out.diagnostics.year);
        states.push(state);
        diagnostics.push(out.diagnostics);
        channels.push(amounts);
    }

    let trajectory = Trajectory {
        years,
        states,
        diagnostics,
    };
    let objectives = trajectory.objectives();
    Ok(ScenarioRun {
        allocation: applied,
        normalization,
        trajectory,
        objectives,
        channels,
        capacity,
    })
}

/// Variables emitted per scenario and year.
pub const SERIES_VARIABLES: [&str; 4] = ["net_revenue", "environment", "satisfaction", "visitors"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub scenario: String,
    pub year: i32,
    pub variable: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub requested: [f64; 4],
    pub applied: [f64; 4],
    pub normalization: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub total_channel_spending: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioComparison {
    pub years: Vec<i32>,
    pub runs: Vec<ScenarioRun>,
    pub summaries: Vec<ScenarioSummary>,
}

impl ScenarioComparison {
    /// Long-format series, one row per (scenario, year, variable). Year rows
    /// include the initial state; its net revenue is the opening balance.
    pub fn long_rows(&self) -> Vec<LongRow> {
        let mut out = Vec::new();
        for run in &self.runs {
            let traj = &run.trajectory;
            for (j, (year, st)) in traj.years.iter().zip(&traj.states).enumerate() {
                let net = if j == 0 {
                    st.net_revenue_cum
                } else {
                    traj.diagnostics[j - 1].net_revenue
                };
                let vals = [net, st.environment, st.satisfaction, st.visitors];
                for (var, v) in SERIES_VARIABLES.iter().zip(vals) {
                    out.push(LongRow {
                        scenario: run.allocation.name.clone(),
                        year: *year,
                        variable: var.to_string(),
                        value: v,
                    });
                }
            }
        }
        out
    }
}

/// Runs every scenario on the same base and aligns their series.
pub fn compare_scenarios(scenarios: &[AllocationPolicy], base: &ScenarioBase) -> Result<ScenarioComparison> {
    if scenarios.is_empty() {
        return Err(Error::Config("at least one scenario is required".into()));
    }
    #[cfg(feature = "parallel")]
    let runs: Vec<ScenarioRun> = {
        use rayon::prelude::*;
        scenarios
            .par_iter()
            .map(|s| run_scenario(s, base))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<ScenarioRun> = scenarios
        .iter()
        .map(|s| run_scenario(s, base))
        .collect::<Result<_>>()?;

    let summaries = scenarios
        .iter()
        .zip(&runs)
        .map(|(req, run)| ScenarioSummary {
            scenario: req.name.clone(),
            requested: req.fractions(),
            applied: run.allocation.fractions(),
            normalization: run.normalization,
            f1: run.objectives.net_revenue_cum,
            f2: run.objectives.environment,
            f3: run.objectives.satisfaction,
            total_channel_spending: run.channels.iter().map(|c| c.total()).sum(),
        })
        .collect();
    Ok(ScenarioComparison {
        years: runs[0].trajectory.years.clone(),
        runs,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_split() {
        let a = allocate_surplus(1e6, &AllocationPolicy::balanced_growth());
        assert_eq!((a.env, a.infra, a.community, a.marketing), (3e5, 2.5e5, 2.5e5, 2.5e5));
    }

    #[test]
    fn deficit_and_zero_theta_allocate_nothing() {
        let zero = ChannelAmounts::default();
        assert_eq!(allocate_surplus(-5e6, &AllocationPolicy::balanced_growth()), zero);
        assert_eq!(allocate_surplus(0.0, &AllocationPolicy::balanced_growth()), zero);
        assert_eq!(allocate_surplus(1e9, &AllocationPolicy::none()), zero);
    }

    #[test]
    fn normalization_only_when_over_committed() {
        let (p, k) = AllocationPolicy::infrastructure_led().normalized();
        assert_eq!(k, 1.0);
        assert_eq!(p, AllocationPolicy::infrastructure_led());

        // 0.3 + 3 x 0.25 over-commits by 5%.
        let (_, k) = AllocationPolicy::balanced_growth().normalized();
        assert!((k - 1.0 / 1.05).abs() < 1e-15);

        let (p, k) = AllocationPolicy::community_focus().normalized();
        assert!((k - 1.0 / 1.3).abs() < 1e-15);
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!((p.community / p.env - 3.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_fraction_rejected() {
        assert!(AllocationPolicy::new("x", 1.2, 0.0, 0.0, 0.0).validate().is_err());
        assert!(AllocationPolicy::new("x", -0.1, 0.0, 0.0, 0.0).validate().is_err());
    }

    #[test]
    fn feedback_identity_and_capacity_gain() {
        let fb = FeedbackCoefficients::default();
        let p = EffectiveParams {
            capacity_limit: 2e6,
            extra_base_demand: 0.0,
            extra_env_spending: 0.0,
        };
        let (n, s) = apply_feedback(&p, 0.4, &ChannelAmounts::default(), &fb);
        assert_eq!(n, p);
        assert_eq!(s, 0.4);

        let amounts = ChannelAmounts {
            infra: 1e5,
            ..Default::default()
        };
        let (n, _) = apply_feedback(&p, 0.4, &amounts, &fb);
        assert!((n.capacity_limit - (2e6 + 4e3)).abs() < 1e-6);
    }

    #[test]
    fn community_saturates() {
        let fb = FeedbackCoefficients::default();
        let p = EffectiveParams::from_policy(&PolicyVector::default());
        let amounts = ChannelAmounts {
            community: 1e12,
            ..Default::default()
        };
        let (_, s) = apply_feedback(&p, 1.0, &amounts, &fb);
        assert_eq!(s, 1.0);
        let (_, s) = apply_feedback(&p, 0.5, &amounts, &fb);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn preset_lookup() {
        assert_eq!(AllocationPolicy::preset("Infra-Led").unwrap(), AllocationPolicy::infrastructure_led());
        assert_eq!(AllocationPolicy::preset("community_focus").unwrap().community, 0.6);
        assert!(AllocationPolicy::preset("austerity").is_none());
    }

    #[test]
    fn empty_comparison_rejected() {
        let exog = ExogenousSeries {
            years: vec![2008, 2009],
            visitors_base: vec![1e6, 1e6],
            gov_revenue_base: vec![1e7, 1e7],
            gov_expenditure_base: vec![9e6, 9e6],
            glacier_retreat: vec![250.0, 250.0],
            co2_emission: vec![8e4, 8e4],
            population: vec![3.2e4, 3.2e4],
            unemployment: vec![0.045, 0.045],
            satisfaction_base: vec![0.48, 0.47],
        };
        let base = ScenarioBase {
            policy: PolicyVector::default(),
            init: SimState::initial(&exog, 0.7).unwrap(),
            exog,
            coeffs: ModelCoefficients::default(),
            feedback: FeedbackCoefficients::default(),
        };
        assert!(matches!(compare_scenarios(&[], &base), Err(Error::Config(_))));
    }
}
