//! Annual system-dynamics model of a destination's tourism economy.
//!
//! Four coupled subsystems are stepped once per year in a fixed order:
//! visitor demand, government finance, environmental quality and resident
//! satisfaction. The environment and satisfaction indices live in `[0, 1]`
//! and are clamped after every update.
//!
//! The model is a pure function of its inputs: [`simulate`] with identical
//! arguments always produces bit-identical trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names of the seven policy levers, in genome order.
pub const POLICY_NAMES: [&str; 7] = [
    "tax_rate",
    "env_ratio",
    "dev_incentive",
    "capacity_limit",
    "ship_limit",
    "carbon_fee",
    "glacier_ratio",
];

/// The seven decision variables a destination controls.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyVector {
    /// Tourism tax rate applied to the base ticket price.
    pub tax_rate: f64,
    /// Share of total government revenue spent on the environment.
    pub env_ratio: f64,
    /// Development incentive intensity.
    pub dev_incentive: f64,
    /// Visitors per year the destination can accommodate.
    pub capacity_limit: f64,
    /// Vessel (or flight slot) calls per year.
    pub ship_limit: f64,
    /// Per-visitor carbon fee in USD.
    pub carbon_fee: f64,
    /// Share of environmental spending devoted to glacier protection.
    pub glacier_ratio: f64,
}

impl PolicyVector {
    pub const DIM: usize = 7;

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.tax_rate,
            self.env_ratio,
            self.dev_incentive,
            self.capacity_limit,
            self.ship_limit,
            self.carbon_fee,
            self.glacier_ratio,
        ]
    }

    pub fn from_slice(genes: &[f64]) -> Result<Self> {
        if genes.len() != Self::DIM {
            return Err(Error::Domain(format!(
                "policy genome must have {} genes, got {}",
                Self::DIM,
                genes.len()
            )));
        }
        Ok(Self {
            tax_rate: genes[0],
            env_ratio: genes[1],
            dev_incentive: genes[2],
            capacity_limit: genes[3],
            ship_limit: genes[4],
            carbon_fee: genes[5],
            glacier_ratio: genes[6],
        })
    }

    /// Returns a mutable reference to the lever called `name`.
    pub fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "tax_rate" => &mut self.tax_rate,
            "env_ratio" => &mut self.env_ratio,
            "dev_incentive" => &mut self.dev_incentive,
            "capacity_limit" => &mut self.capacity_limit,
            "ship_limit" => &mut self.ship_limit,
            "carbon_fee" => &mut self.carbon_fee,
            "glacier_ratio" => &mut self.glacier_ratio,
            _ => return None,
        })
    }

    /// Vessel limit as used by the dynamics: the continuous gene rounded to
    /// the nearest whole call.
    pub fn effective_ship_limit(&self) -> f64 {
        self.ship_limit.round()
    }
}

/// Box bounds on the policy levers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyBounds {
    pub lower: [f64; 7],
    pub upper: [f64; 7],
}

impl PolicyBounds {
    /// Ranges used for the Juneau case.
    pub fn juneau() -> Self {
        Self {
            lower: [0.0, 0.0, 0.0, 1.0e6, 600.0, 0.0, 0.0],
            upper: [0.3, 0.5, 1.0, 4.0e6, 800.0, 100.0, 1.0],
        }
    }

    /// Iceland widens the capacity, fee and flight-slot ranges.
    pub fn iceland() -> Self {
        Self {
            lower: [0.0, 0.0, 0.0, 1.0e6, 500.0, 0.0, 0.0],
            upper: [0.3, 0.5, 1.0, 5.0e6, 900.0, 120.0, 1.0],
        }
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.lower.iter().copied().zip(self.upper.iter().copied()).collect()
    }

    pub fn contains(&self, policy: &PolicyVector) -> bool {
        policy
            .to_array()
            .iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, (lo, hi)) in self.lower.iter().zip(self.upper.iter()).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!(
                    "invalid bounds for {}: [{lo}, {hi}]",
                    POLICY_NAMES[i]
                )));
            }
        }
        Ok(())
    }
}

/// Behavioural and impact coefficients of the dynamics.
///
/// Only `attraction_weight`, `fee_normalizer`, `dev_funding`,
/// `gov_base_share`, `satisfaction_threshold` and `social_resistance` have
/// published values. Everything else is a calibration input whose default
/// keeps a status-quo Juneau run inside a plausible band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCoefficients {
    pub attraction_weight: f64,
    pub fee_normalizer: f64,
    pub price_elasticity: f64,
    pub glacier_sensitivity: f64,
    /// Retreat (ft/year) at which glaciers lose no appeal.
    pub glacier_retreat_baseline: f64,
    pub visitor_base_price: f64,
    /// Visitors carried per vessel call.
    pub ship_capacity: f64,
    /// Extra visitors per unit of development incentive.
    pub dev_visitors: f64,
    /// Extra government funds (USD) per unit of development incentive.
    pub dev_funding: f64,
    /// Fraction of baseline expenditure tied to tourism.
    pub gov_base_share: f64,
    pub satisfaction_threshold: f64,
    pub social_resistance: f64,
    pub glacier_effectiveness: f64,
    pub waste_effectiveness: f64,
    /// Index loss per foot of glacier retreat.
    pub retreat_impact: f64,
    /// Index loss per ton of CO2.
    pub co2_impact: f64,
    pub recovery_rate: f64,
    pub glacier_satisfaction: f64,
    pub waste_satisfaction: f64,
    pub crowding_impact: f64,
    pub environment_feedback: f64,
    pub unemployment_impact: f64,
    /// Guard added to the population in the crowding ratio.
    pub crowd_epsilon: f64,
}

/// Names accepted by [`ModelCoefficients::get`] and [`ModelCoefficients::set`].
pub const COEFFICIENT_NAMES: [&str; 23] = [
    "attraction_weight",
    "fee_normalizer",
    "price_elasticity",
    "glacier_sensitivity",
    "glacier_retreat_baseline",
    "visitor_base_price",
    "ship_capacity",
    "dev_visitors",
    "dev_funding",
    "gov_base_share",
    "satisfaction_threshold",
    "social_resistance",
    "glacier_effectiveness",
    "waste_effectiveness",
    "retreat_impact",
    "co2_impact",
    "recovery_rate",
    "glacier_satisfaction",
    "waste_satisfaction",
    "crowding_impact",
    "environment_feedback",
    "unemployment_impact",
    "crowd_epsilon",
];

impl Default for ModelCoefficients {
    fn default() -> Self {
        Self {
            attraction_weight: 0.5,
            fee_normalizer: 100.0,
            price_elasticity: -0.5,
            glacier_sensitivity: 0.2,
            glacier_retreat_baseline: 250.0,
            visitor_base_price: 350.0,
            ship_capacity: 6000.0,
            dev_visitors: 5.0e4,
            dev_funding: 1.0e5,
            gov_base_share: 0.3,
            satisfaction_threshold: 0.3,
            social_resistance: 0.8,
            glacier_effectiveness: 2.0e-9,
            waste_effectiveness: 2.0e-9,
            retreat_impact: 7.0e-5,
            co2_impact: 1.67e-7,
            recovery_rate: 0.1,
            glacier_satisfaction: 2.0e-9,
            waste_satisfaction: 2.0e-9,
            crowding_impact: 2.0e-4,
            environment_feedback: 0.1,
            unemployment_impact: 0.2,
            crowd_epsilon: 1.0,
        }
    }
}

impl ModelCoefficients {
    /// All coefficients zero except the structural guards, which keep the
    /// equations well defined.
    pub fn zeroed() -> Self {
        Self {
            attraction_weight: 0.0,
            fee_normalizer: 100.0,
            price_elasticity: 0.0,
            glacier_sensitivity: 0.0,
            glacier_retreat_baseline: 250.0,
            visitor_base_price: 0.0,
            ship_capacity: 0.0,
            dev_visitors: 0.0,
            dev_funding: 0.0,
            gov_base_share: 0.3,
            satisfaction_threshold: 0.0,
            social_resistance: 1.0,
            glacier_effectiveness: 0.0,
            waste_effectiveness: 0.0,
            retreat_impact: 0.0,
            co2_impact: 0.0,
            recovery_rate: 0.0,
            glacier_satisfaction: 0.0,
            waste_satisfaction: 0.0,
            crowding_impact: 0.0,
            environment_feedback: 0.0,
            unemployment_impact: 0.0,
            crowd_epsilon: 1.0,
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "attraction_weight" => &mut self.attraction_weight,
            "fee_normalizer" => &mut self.fee_normalizer,
            "price_elasticity" => &mut self.price_elasticity,
            "glacier_sensitivity" => &mut self.glacier_sensitivity,
            "glacier_retreat_baseline" => &mut self.glacier_retreat_baseline,
            "visitor_base_price" => &mut self.visitor_base_price,
            "ship_capacity" => &mut self.ship_capacity,
            "dev_visitors" => &mut self.dev_visitors,
            "dev_funding" => &mut self.dev_funding,
            "gov_base_share" => &mut self.gov_base_share,
            "satisfaction_threshold" => &mut self.satisfaction_threshold,
            "social_resistance" => &mut self.social_resistance,
            "glacier_effectiveness" => &mut self.glacier_effectiveness,
            "waste_effectiveness" => &mut self.waste_effectiveness,
            "retreat_impact" => &mut self.retreat_impact,
            "co2_impact" => &mut self.co2_impact,
            "recovery_rate" => &mut self.recovery_rate,
            "glacier_satisfaction" => &mut self.glacier_satisfaction,
            "waste_satisfaction" => &mut self.waste_satisfaction,
            "crowding_impact" => &mut self.crowding_impact,
            "environment_feedback" => &mut self.environment_feedback,
            "unemployment_impact" => &mut self.unemployment_impact,
            "crowd_epsilon" => &mut self.crowd_epsilon,
            _ => return None,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let mut copy = *self;
        copy.slot(name).map(|v| *v)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match self.slot(name) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(Error::Config(format!("unknown coefficient '{name}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for name in COEFFICIENT_NAMES {
            let v = self.get(name).unwrap_or(f64::NAN);
            if !v.is_finite() {
                return Err(Error::Config(format!("coefficient {name} is not finite")));
            }
            if name != "price_elasticity" && v < 0.0 {
                return Err(Error::Config(format!("coefficient {name} must be >= 0, got {v}")));
            }
        }
        if self.recovery_rate > 1.0 {
            return Err(Error::Config("recovery_rate must lie in [0, 1]".into()));
        }
        if self.crowd_epsilon <= 0.0 {
            return Err(Error::Config("crowd_epsilon must be > 0".into()));
        }
        if self.fee_normalizer <= 0.0 {
            return Err(Error::Config("fee_normalizer must be > 0".into()));
        }
        if self.glacier_retreat_baseline <= 0.0 {
            return Err(Error::Config("glacier_retreat_baseline must be > 0".into()));
        }
        Ok(())
    }
}

/// Annual exogenous inputs, one entry per calendar year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSeries {
    pub years: Vec<i32>,
    pub visitors_base: Vec<f64>,
    pub gov_revenue_base: Vec<f64>,
    pub gov_expenditure_base: Vec<f64>,
    pub glacier_retreat: Vec<f64>,
    pub co2_emission: Vec<f64>,
    pub population: Vec<f64>,
    pub unemployment: Vec<f64>,
    pub satisfaction_base: Vec<f64>,
}

/// Names of the numeric columns of [`ExogenousSeries`], in storage order.
pub const SERIES_NAMES: [&str; 8] = [
    "visitors_base",
    "gov_revenue_base",
    "gov_expenditure_base",
    "glacier_retreat",
    "co2_emission",
    "population",
    "unemployment",
    "satisfaction_base",
];

/// One year's worth of exogenous inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearSlice {
    pub year: i32,
    pub visitors_base: f64,
    pub gov_revenue_base: f64,
    pub gov_expenditure_base: f64,
    pub glacier_retreat: f64,
    pub co2_emission: f64,
    pub population: f64,
    pub unemployment: f64,
    pub satisfaction_base: f64,
}

impl ExogenousSeries {
    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn columns(&self) -> [&Vec<f64>; 8] {
        [
            &self.visitors_base,
            &self.gov_revenue_base,
            &self.gov_expenditure_base,
            &self.glacier_retreat,
            &self.co2_emission,
            &self.population,
            &self.unemployment,
            &self.satisfaction_base,
        ]
    }

    pub fn columns_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.visitors_base,
            &mut self.gov_revenue_base,
            &mut self.gov_expenditure_base,
            &mut self.glacier_retreat,
            &mut self.co2_emission,
            &mut self.population,
            &mut self.unemployment,
            &mut self.satisfaction_base,
        ]
    }

    pub fn column(&self, name: &str) -> Option<&Vec<f64>> {
        SERIES_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.columns()[i])
    }

    pub fn get(&self, t: usize) -> Result<YearSlice> {
        if t >= self.len() {
            return Err(Error::Data(format!(
                "no exogenous data for step {t} (series covers {} years)",
                self.len()
            )));
        }
        Ok(YearSlice {
            year: self.years[t],
            visitors_base: self.visitors_base[t],
            gov_revenue_base: self.gov_revenue_base[t],
            gov_expenditure_base: self.gov_expenditure_base[t],
            glacier_retreat: self.glacier_retreat[t],
            co2_emission: self.co2_emission[t],
            population: self.population[t],
            unemployment: self.unemployment[t],
            satisfaction_base: self.satisfaction_base[t],
        })
    }

    /// Multiplies the baseline demand series by `factor`.
    pub fn scale_demand(&mut self, factor: f64) {
        for v in &mut self.visitors_base {
            *v *= factor;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Data("exogenous series is empty".into()));
        }
        for (name, col) in SERIES_NAMES.iter().zip(self.columns()) {
            if col.len() != n {
                return Err(Error::Data(format!(
                    "series {name} has {} entries, expected {n}",
                    col.len()
                )));
            }
            if let Some(v) = col.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Data(format!("series {name} contains invalid value {v}")));
            }
        }
        for w in self.years.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(Error::Data(format!(
                    "years must increase by one, found {} after {}",
                    w[1], w[0]
                )));
            }
        }
        for (name, col) in [
            ("unemployment", &self.unemployment),
            ("satisfaction_base", &self.satisfaction_base),
        ] {
            if col.iter().any(|v| *v > 1.0) {
                return Err(Error::Data(format!("series {name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Stocks carried from one year to the next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub visitors: f64,
    pub environment: f64,
    pub satisfaction: f64,
    pub net_revenue_cum: f64,
}

impl SimState {
    /// Starting state: first-year visitors and satisfaction from the data,
    /// the given environment index, and an empty revenue account.
    pub fn initial(exog: &ExogenousSeries, environment: f64) -> Result<Self> {
        let first = exog.get(0)?;
        let state = Self {
            visitors: first.visitors_base,
            environment,
            satisfaction: first.satisfaction_base,
            net_revenue_cum: 0.0,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.environment) || !unit.contains(&self.satisfaction) {
            return Err(Error::Domain(format!(
                "state indices must lie in [0, 1]: E={}, S={}",
                self.environment, self.satisfaction
            )));
        }
        if !(self.visitors >= 0.0) {
            return Err(Error::Domain(format!("visitors must be >= 0, got {}", self.visitors)));
        }
        Ok(())
    }
}

/// Flows and intermediate factors recorded for one simulated year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearDiagnostics {
    pub year: i32,
    pub effective_price: f64,
    pub glacier_factor: f64,
    pub attraction_factor: f64,
    pub price_factor: f64,
    pub potential_visitors: f64,
    pub tourism_revenue: f64,
    pub gov_revenue_total: f64,
    pub env_spending: f64,
    pub gov_spending_total: f64,
    pub net_revenue: f64,
}

/// The full time path of a run: `states[0]` is the initial state and
/// `diagnostics[t]` describes the step that produced `states[t + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub years: Vec<i32>,
    pub states: Vec<SimState>,
    pub diagnostics: Vec<YearDiagnostics>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.diagnostics.len()
    }

    pub fn final_state(&self) -> &SimState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn objectives(&self) -> Objectives {
        Objectives::from_state(self.final_state())
    }
}

/// Cumulative net revenue, final environment index, final satisfaction.
/// All three are maximized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub net_revenue_cum: f64,
    pub environment: f64,
    pub satisfaction: f64,
}

impl Objectives {
    pub fn from_state(s: &SimState) -> Self {
        Self {
            net_revenue_cum: s.net_revenue_cum,
            environment: s.environment,
            satisfaction: s.satisfaction,
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.net_revenue_cum, self.environment, self.satisfaction]
    }
}

/// Ticket price after the carbon fee and the tax.
pub fn effective_price(base_price: f64, carbon_fee: f64, tax_rate: f64) -> Result<f64> {
    if base_price < 0.0 || carbon_fee < 0.0 || tax_rate < 0.0 {
        return Err(Error::Domain(format!(
            "prices and rates must be >= 0 (base={base_price}, fee={carbon_fee}, tax={tax_rate})"
        )));
    }
    Ok((base_price + carbon_fee) * (1.0 + tax_rate))
}

/// Scenic appeal lost to glacier retreat beyond its baseline, floored at 0.
pub fn glacier_factor(retreat: f64, baseline: f64, sensitivity: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::Domain(format!("retreat baseline must be > 0, got {baseline}")));
    }
    if sensitivity < 0.0 {
        return Err(Error::Domain(format!("glacier sensitivity must be >= 0, got {sensitivity}")));
    }
    Ok((1.0 - sensitivity * (retreat / baseline - 1.0)).max(0.0))
}

pub fn attraction_factor(environment: f64, satisfaction: f64, glacier: f64, weight: f64) -> f64 {
    (1.0 + weight * (environment + satisfaction - 1.0)) * glacier
}

/// Demand response to taxes and fees. The raw value is returned; callers
/// clamp it at zero before scaling demand.
pub fn price_factor(elasticity: f64, tax_rate: f64, carbon_fee: f64, normalizer: f64) -> Result<f64> {
    if !(normalizer > 0.0) {
        return Err(Error::Domain(format!("fee normalizer must be > 0, got {normalizer}")));
    }
    Ok(1.0 + elasticity * (tax_rate + carbon_fee / normalizer))
}

/// Demand-side quantities produced while stepping visitors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisitorStep {
    pub effective_price: f64,
    pub glacier_factor: f64,
    pub attraction_factor: f64,
    /// Price factor after clamping at zero.
    pub price_factor: f64,
    pub potential: f64,
    pub visitors: f64,
}

/// Adjustments injected into a year by outside feedback (budget scenarios).
/// The default applies no change.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct YearAdjustment {
    /// Added to next year's baseline demand before the demand equation.
    pub extra_base_demand: f64,
    /// Added to this year's environmental budget.
    pub extra_env_spending: f64,
}

/// Arrivals for year `t + 1` given the state at `t`.
pub fn step_visitors(
    prev: &SimState,
    exog: &ExogenousSeries,
    t: usize,
    policy: &PolicyVector,
    coeffs: &ModelCoefficients,
) -> Result<VisitorStep> {
    step_visitors_adjusted(prev, exog, t, policy, coeffs, 0.0)
}

fn step_visitors_adjusted(
    prev: &SimState,
    exog: &ExogenousSeries,
    t: usize,
    policy: &PolicyVector,
    coeffs: &ModelCoefficients,
    extra_base_demand: f64,
) -> Result<VisitorStep> {
    let now = exog.get(t)?;
    let next = exog.get(t + 1)?;

    let price = effective_price(coeffs.visitor_base_price, policy.carbon_fee, policy.tax_rate)?;
    let glacier = glacier_factor(
        now.glacier_retreat,
        coeffs.glacier_retreat_baseline,
        coeffs.glacier_sensitivity,
    )?;
    let attraction = attraction_factor(
        prev.environment,
        prev.satisfaction,
        glacier,
        coeffs.attraction_weight,
    );
    let price_f = price_factor(
        coeffs.price_elasticity,
        policy.tax_rate,
        policy.carbon_fee,
        coeffs.fee_normalizer,
    )?
    .max(0.0);

    let base = next.visitors_base + extra_base_demand;
    let potential = base * price_f * attraction + policy.dev_incentive * coeffs.dev_visitors;
    let vessel_cap = policy.effective_ship_limit() * coeffs.ship_capacity;
    let mut visitors = potential.min(policy.capacity_limit).min(vessel_cap);
    if prev.satisfaction < coeffs.satisfaction_threshold {
        visitors *= coeffs.social_resistance;
    }

    Ok(VisitorStep {
        effective_price: price,
        glacier_factor: glacier,
        attraction_factor: attraction,
        price_factor: price_f,
        potential,
        visitors: visitors.max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinanceStep {
    pub tourism_revenue: f64,
    pub gov_revenue_total: f64,
    pub env_spending: f64,
    pub gov_spending_total: f64,
    pub net_revenue: f64,
    pub net_revenue_cum: f64,
}

pub fn step_finance(
    visitors_next: f64,
    exog_t: &YearSlice,
    policy: &PolicyVector,
    coeffs: &ModelCoefficients,
    prev_cum: f64,
) -> FinanceStep {
    debug_assert!(visitors_next >= 0.0);
    let tourism = visitors_next * (coeffs.visitor_base_price * policy.tax_rate + policy.carbon_fee);
    let revenue = exog_t.gov_revenue_base + tourism + policy.dev_incentive * coeffs.dev_funding;
    let env = policy.env_ratio * revenue;
    let spending = coeffs.gov_base_share * exog_t.gov_expenditure_base + env;
    let net = revenue - spending;
    FinanceStep {
        tourism_revenue: tourism,
        gov_revenue_total: revenue,
        env_spending: env,
        gov_spending_total: spending,
        net_revenue: net,
        net_revenue_cum: prev_cum + net,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentStep {
    pub environment: f64,
    pub glacier_spending: f64,
    pub waste_spending: f64,
}

pub fn step_environment(
    environment: f64,
    env_spending: f64,
    exog_t: &YearSlice,
    policy: &PolicyVector,
    coeffs: &ModelCoefficients,
) -> EnvironmentStep {
    let glacier_spending = policy.glacier_ratio * env_spending;
    let waste_spending = (1.0 - policy.glacier_ratio) * env_spending;
    let headroom = 1.0 - environment;

    let next = environment
        + coeffs.glacier_effectiveness * glacier_spending * headroom
        + coeffs.waste_effectiveness * waste_spending * headroom
        - coeffs.retreat_impact * exog_t.glacier_retreat
        - coeffs.co2_impact * exog_t.co2_emission
        + coeffs.recovery_rate * headroom;

    EnvironmentStep {
        environment: next.clamp(0.0, 1.0),
        glacier_spending,
        waste_spending,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn step_social(
    satisfaction: f64,
    environment_next: f64,
    visitors_next: f64,
    glacier_spending: f64,
    waste_spending: f64,
    exog_t: &YearSlice,
    coeffs: &ModelCoefficients,
) -> Result<f64> {
    if !(exog_t.population > 0.0) {
        return Err(Error::Data(format!(
            "population must be > 0 in {}, got {}",
            exog_t.year, exog_t.population
        )));
    }
    let headroom = 1.0 - satisfaction;
    let next = satisfaction
        + coeffs.glacier_satisfaction * glacier_spending * headroom
        + coeffs.waste_satisfaction * waste_spending * headroom
        - coeffs.crowding_impact * visitors_next / (exog_t.population + coeffs.crowd_epsilon)
        - coeffs.unemployment_impact * exog_t.unemployment
        + coeffs.environment_feedback * (environment_next - satisfaction);
    Ok(next.clamp(0.0, 1.0))
}

/// Everything produced by one call to [`advance_year`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearOutcome {
    pub state: SimState,
    pub diagnostics: YearDiagnostics,
    pub glacier_spending: f64,
    pub waste_spending: f64,
}

/// Advances the model from year `t` to `t + 1`:
/// visitors, then finance, then environment, then satisfaction.
pub fn advance_year(
    prev: &SimState,
    exog: &ExogenousSeries,
    t: usize,
    policy: &PolicyVector,
    coeffs: &ModelCoefficients,
    adjust: &YearAdjustment,
) -> Result<YearOutcome> {
    let demand = step_visitors_adjusted(prev, exog, t, policy, coeffs, adjust.extra_base_demand)?;
    let now = exog.get(t)?;
    let finance = step_finance(demand.visitors, &now, policy, coeffs, prev.net_revenue_cum);
    let env = step_environment(
        prev.environment,
        finance.env_spending + adjust.extra_env_spending,
        &now,
        policy,
        coeffs,
    );
    let satisfaction = step_social(
        prev.satisfaction,
        env.environment,
        demand.visitors,
        env.glacier_spending,
        env.waste_spending,
        &now,
        coeffs,
    )?;

    let state = SimState {
        visitors: demand.visitors,
        environment: env.environment,
        satisfaction,
        net_revenue_cum: finance.net_revenue_cum,
    };
    let diagnostics = YearDiagnostics {
        year: exog.years[t + 1],
        effective_price: demand.effective_price,
        glacier_factor: demand.glacier_factor,
        attraction_factor: demand.attraction_factor,
        price_factor: demand.price_factor,
        potential_visitors: demand.potential,
        tourism_revenue: finance.tourism_revenue,
        gov_revenue_total: finance.gov_revenue_total,
        env_spending: finance.env_spending,
        gov_spending_total: finance.gov_spending_total,
        net_revenue: finance.net_revenue,
    };
    Ok(YearOutcome {
        state,
        diagnostics,
        glacier_spending: env.glacier_spending,
        waste_spending: env.waste_spending,
    })
}

/// Runs the model over every year the series covers.
pub fn simulate(
    policy: &PolicyVector,
    exog: &ExogenousSeries,
    coeffs: &ModelCoefficients,
    init: &SimState,
) -> Result<(Trajectory, Objectives)> {
    let horizon = exog.len().saturating_sub(1);
    simulate_for(policy, exog, coeffs, init, horizon)
}

/// Runs the model for `horizon` annual steps starting from `init`.
pub fn simulate_for(
    policy: &PolicyVector,
    exog: &ExogenousSeries,
    coeffs: &ModelCoefficients,
    init: &SimState,
    horizon: usize,
) -> Result<(Trajectory, Objectives)> {
    init.validate()?;
    if exog.is_empty() {
        return Err(Error::Data("exogenous series is empty".into()));
    }
    if horizon + 1 > exog.len() {
        return Err(Error::Data(format!(
            "horizon {horizon} needs {} years of data, series has {}",
            horizon + 1,
            exog.len()
        )));
    }

    let mut years = Vec::with_capacity(horizon + 1);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut diagnostics = Vec::with_capacity(horizon);
    years.push(exog.years[0]);
    states.push(*init);

    let mut state = *init;
    for t in 0..horizon {
        let out = advance_year(&state, exog, t, policy, coeffs, &YearAdjustment::default())?;
        state = out.state;
        years.push(out.diagnostics.year);
        states.push(state);
        diagnostics.push(out.diagnostics);
    }

    let traj = Trajectory {
        years,
        states,
        diagnostics,
    };
    let obj = traj.objectives();
    Ok((traj, obj))
}
