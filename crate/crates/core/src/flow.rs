//! Multi-site visitor redistribution: island-wide demand is shared among
//! attractions in proportion to their attractiveness, and each site's
//! environment and resident satisfaction evolve from its own load.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteState {
    pub name: String,
    pub environment: f64,
    pub satisfaction: f64,
    pub visitors: f64,
    pub capacity: f64,
    pub population: f64,
    /// Normalized price level.
    pub price: f64,
    /// Marketing effort in normalized units.
    pub marketing: f64,
    pub env_fund: f64,
    pub community_fund: f64,
    pub co2: f64,
}

impl SiteState {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.environment) || !unit(self.satisfaction) {
            return Err(Error::Domain(format!(
                "site {}: environment and satisfaction must lie in [0, 1]",
                self.name
            )));
        }
        if !(self.capacity > 0.0) || !(self.population > 0.0) {
            return Err(Error::Domain(format!(
                "site {}: capacity and population must be positive",
                self.name
            )));
        }
        if !(self.visitors >= 0.0 && self.visitors <= self.capacity) {
            return Err(Error::Domain(format!(
                "site {}: visitors {} outside [0, capacity]",
                self.name, self.visitors
            )));
        }
        let inputs = [self.price, self.marketing, self.env_fund, self.community_fund, self.co2];
        if inputs.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!(
                "site {}: price, marketing, funds and emissions must be finite and >= 0",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IslandParams {
    /// Demand sensitivity to average price and environment.
    pub phi: f64,
    pub dev_boost: f64,
    /// Attractiveness coefficients: intercept, environment, satisfaction,
    /// log-marketing, price.
    pub alpha: [f64; 5],
    /// Environment gain per unit of environmental funding.
    pub alpha_g: f64,
    pub beta_crowd: f64,
    pub beta_co2: f64,
    pub delta: f64,
    pub rho_comm: f64,
    pub rho_over: f64,
    pub rho_e: f64,
}

impl Default for IslandParams {
    fn default() -> Self {
        Self {
            phi: 0.1,
            dev_boost: 2.0e4,
            alpha: [0.0, 1.0, 0.5, 0.3, 0.5],
            alpha_g: 1e-8,
            beta_crowd: 0.05,
            beta_co2: 1e-6,
            delta: 0.1,
            rho_comm: 1e-8,
            rho_over: 1e-4,
            rho_e: 0.2,
        }
    }
}

/// Largest exponent coefficient accepted; keeps `exp` well inside f64 range
/// for the normalized inputs the model uses.
const ALPHA_LIMIT: f64 = 50.0;

impl IslandParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.phi,
            self.dev_boost,
            self.alpha_g,
            self.beta_crowd,
            self.beta_co2,
            self.delta,
            self.rho_comm,
            self.rho_over,
            self.rho_e,
        ];
        if all.iter().chain(&self.alpha).any(|v| !v.is_finite()) {
            return Err(Error::Config("island parameters must be finite".into()));
        }
        if self.alpha.iter().any(|a| a.abs() > ALPHA_LIMIT) {
            return Err(Error::Config(format!(
                "attractiveness coefficients must satisfy |alpha| <= {ALPHA_LIMIT}"
            )));
        }
        let nonneg = [
            self.alpha[4],
            self.beta_crowd,
            self.beta_co2,
            self.rho_comm,
            self.rho_over,
            self.rho_e,
            self.delta,
        ];
        if nonneg.iter().any(|v| *v < 0.0) {
            return Err(Error::Config(
                "alpha_4, beta_crowd, beta_co2, rho_comm, rho_over, rho_e and delta must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Next year's island-wide potential visitors, floored at zero.
pub fn total_potential(total: f64, price_avg: f64, env_avg: f64, p: &IslandParams) -> f64 {
    (total * (1.0 + p.phi * (price_avg + env_avg - 1.5)) + p.dev_boost).max(0.0)
}

/// Exponent of the site attractiveness.
pub fn log_attractiveness(site: &SiteState, p: &IslandParams) -> f64 {
    let a = &p.alpha;
    a[0] + a[1] * site.environment + a[2] * site.satisfaction + a[3] * site.marketing.ln_1p()
        - a[4] * site.price
}

pub fn attractiveness(site: &SiteState, p: &IslandParams) -> f64 {
    log_attractiveness(site, p).exp()
}

/// Proportional shares `A_i / sum A_j`.
pub fn allocation_weights(attractiveness: &[f64]) -> Result<Vec<f64>> {
    if attractiveness.is_empty() {
        return Err(Error::Domain("no sites to allocate among".into()));
    }
    if attractiveness.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::Domain(format!(
            "attractiveness must be positive and finite, got {attractiveness:?}"
        )));
    }
    let total: f64 = attractiveness.iter().sum();
    Ok(attractiveness.iter().map(|a| a / total).collect())
}

/// Same shares computed from log-attractiveness, shifted by the maximum so
/// large exponents cannot overflow.
pub fn weights_from_log(log_a: &[f64]) -> Result<Vec<f64>> {
    if log_a.is_empty() {
        return Err(Error::Domain("no sites to allocate among".into()));
    }
    if log_a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite log-attractiveness {log_a:?}")));
    }
    let m = log_a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = log_a.iter().map(|v| (v - m).exp()).collect();
    allocation_weights(&shifted)
}

/// `min(p_i·T, C_i)`; overflow past capacity is dropped.
pub fn assign_visitors(total: f64, weights: &[f64], capacities: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .zip(capacities)
        .map(|(w, c)| (w * total).min(*c))
        .collect()
}

pub fn site_environment_update(site: &SiteState, p: &IslandParams) -> Result<f64> {
    if !(site.capacity > 0.0) {
        return Err(Error::Domain(format!("site {} has no capacity", site.name)));
    }
    let e = site.environment + p.alpha_g * site.env_fund - p.beta_crowd * site.visitors / site.capacity
        - p.beta_co2 * site.co2
        + p.delta * (1.0 - site.environment);
    Ok(e.clamp(0.0, 1.0))
}

pub fn site_social_update(site: &SiteState, env_next: f64, p: &IslandParams) -> Result<f64> {
    if !(site.population > 0.0) {
        return Err(Error::Domain(format!("site {} has no residents", site.name)));
    }
    let s = site.satisfaction + p.rho_comm * site.community_fund
        - p.rho_over * site.visitors / site.population
        + p.rho_e * (env_next - site.satisfaction);
    Ok(s.clamp(0.0, 1.0))
}

/// Levers set for one site in one year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteLevers {
    pub marketing: f64,
    pub price: f64,
    pub env_fund: f64,
    pub community_fund: f64,
}

impl SiteLevers {
    pub fn of(site: &SiteState) -> Self {
        Self {
            marketing: site.marketing,
            price: site.price,
            env_fund: site.env_fund,
            community_fund: site.community_fund,
        }
    }
}

/// Per-year, per-site levers. `levers[y][i]` applies to site `i` in `years[y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSchedule {
    pub years: Vec<i32>,
    pub levers: Vec<Vec<SiteLevers>>,
}

impl FlowSchedule {
    /// Holds every site's current levers fixed for `years`.
    pub fn constant(sites: &[SiteState], years: Vec<i32>) -> Self {
        let row: Vec<SiteLevers> = sites.iter().map(SiteLevers::of).collect();
        Self {
            levers: vec![row; years.len()],
            years,
        }
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if self.years.is_empty() {
            return Err(Error::Config("flow schedule covers no years".into()));
        }
        if self.levers.len() != self.years.len() {
            return Err(Error::Config(format!(
                "flow schedule lists {} years but {} lever rows",
                self.years.len(),
                self.levers.len()
            )));
        }
        for (y, row) in self.years.iter().zip(&self.levers) {
            if row.len() != n_sites {
                return Err(Error::Config(format!(
                    "flow schedule year {y} has {} entries for {n_sites} sites",
                    row.len()
                )));
            }
            for l in row {
                let v = [l.marketing, l.price, l.env_fund, l.community_fund];
                if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::Config(format!(
                        "flow schedule year {y}: levers must be finite and >= 0"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub sites: Vec<String>,
    pub years: Vec<i32>,
    /// Island-wide potential used in each year.
    pub total_potential: Vec<f64>,
    /// `[year][site]` series.
    pub weights: Vec<Vec<f64>>,
    pub visitors: Vec<Vec<f64>>,
    pub environment: Vec<Vec<f64>>,
    pub satisfaction: Vec<Vec<f64>>,
    /// Visitors over island-wide potential; sums to at most 1.
    pub shares: Vec<Vec<f64>>,
    /// Final-year share of realized visitors per site.
    pub final_distribution: Vec<f64>,
}

/// Runs the site model over the schedule. Each year: levers are applied,
/// island demand is projected, shares and arrivals are assigned, then each
/// site's environment and satisfaction respond to the previous load.
pub fn redistribute(sites: &[SiteState], p: &IslandParams, schedule: &FlowSchedule) -> Result<FlowResult> {
    if sites.is_empty() {
        return Err(Error::Domain("no sites to allocate among".into()));
    }
    p.validate()?;
    for s in sites {
        s.validate()?;
    }
    schedule.validate(sites.len())?;

    let n = sites.len();
    let mut cur: Vec<SiteState> = sites.to_vec();
    let mut total: f64 = cur.iter().map(|s| s.visitors).sum();
    let capacities: Vec<f64> = cur.iter().map(|s| s.capacity).collect();

    let rows = schedule.years.len();
    let mut out = FlowResult {
        sites: cur.iter().map(|s| s.name.clone()).collect(),
        years: schedule.years.clone(),
        total_potential: Vec::with_capacity(rows),
        weights: Vec::with_capacity(rows),
        visitors: Vec::with_capacity(rows),
        environment: Vec::with_capacity(rows),
        satisfaction: Vec::with_capacity(rows),
        shares: Vec::with_capacity(rows),
        final_distribution: vec![0.0; n],
    };

    for levers in &schedule.levers {
        for (s, l) in cur.iter_mut().zip(levers) {
            s.marketing = l.marketing;
            s.price = l.price;
            s.env_fund = l.env_fund;
            s.community_fund = l.community_fund;
        }
        let price_avg = cur.iter().map(|s| s.price).sum::<f64>() / n as f64;
        let env_avg = cur.iter().map(|s| s.environment).sum::<f64>() / n as f64;
        total = total_potential(total, price_avg, env_avg, p);

        let logs: Vec<f64> = cur.iter().map(|s| log_attractiveness(s, p)).collect();
        let w = weights_from_log(&logs)?;
        let v = assign_visitors(total, &w, &capacities);

        for (i, s) in cur.iter_mut().enumerate() {
            let e = site_environment_update(s, p)?;
            let sat = site_social_update(s, e, p)?;
            s.environment = e;
            s.satisfaction = sat;
            s.visitors = v[i];
        }

        let shares = v
            .iter()
            .map(|x| if total > 0.0 { x / total } else { 0.0 })
            .collect();
        out.total_potential.push(total);
        out.weights.push(w);
        out.visitors.push(v);
        out.environment.push(cur.iter().map(|s| s.environment).collect());
        out.satisfaction.push(cur.iter().map(|s| s.satisfaction).collect());
        out.shares.push(shares);
    }

    let last = out.visitors.last().expect("schedule is non-empty");
    let sum: f64 = last.iter().sum();
    if sum > 0.0 {
        out.final_distribution = last.iter().map(|x| x / sum).collect();
    }
    Ok(out)
}

fn site(name: &str, visitors: f64, capacity: f64, env: f64, sat: f64, pop: f64, price: f64, mkt: f64, co2: f64) -> SiteState {
    SiteState {
        name: name.to_string(),
        environment: env,
        satisfaction: sat,
        visitors,
        capacity,
        population: pop,
        price,
        marketing: mkt,
        env_fund: 1.0e6,
        community_fund: 5.0e5,
        co2,
    }
}

/// Seven Iceland attractions: three crowded hotspots and four
/// under-visited sites.
pub fn iceland_sites() -> Vec<SiteState> {
    vec![
        site("Blue Lagoon", 7.0e5, 8.0e5, 0.55, 0.45, 2.0e4, 1.4, 20.0, 3.0e4),
        site("Vatnajökull", 5.5e5, 6.5e5, 0.60, 0.50, 4.0e3, 1.1, 15.0, 2.5e4),
        site("Golden Circle", 8.0e5, 9.0e5, 0.50, 0.40, 1.2e4, 1.0, 25.0, 3.5e4),
        site("Snæfellsnes", 1.2e5, 4.0e5, 0.80, 0.70, 4.0e3, 0.9, 4.0, 6.0e3),
        site("Mývatn", 1.5e5, 4.0e5, 0.75, 0.65, 2.5e3, 0.9, 5.0, 7.0e3),
        site("Látrabjarg", 3.0e4, 1.5e5, 0.85, 0.75, 1.0e3, 0.8, 1.0, 2.0e3),
        site("Hengifoss", 4.0e4, 1.5e5, 0.85, 0.75, 1.5e3, 0.8, 1.0, 2.0e3),
    ]
}

/// Ten-year plan (2024–2033) moving marketing and funds from the three
/// hotspots toward the four under-visited sites, with a modest price
/// premium phased in at the hotspots.
pub fn iceland_marketing_shift(sites: &[SiteState]) -> FlowSchedule {
    let years: Vec<i32> = (2024..=2033).collect();
    let hotspots = ["Blue Lagoon", "Vatnajökull", "Golden Circle"];
    let n_years = years.len();
    let levers = (0..n_years)
        .map(|y| {
            let frac = (y + 1) as f64 / n_years as f64;
            let moved: f64 = sites
                .iter()
                .filter(|s| hotspots.contains(&s.name.as_str()))
                .map(|s| 0.6 * frac * s.marketing)
                .sum();
            let n_quiet = sites.len() - sites.iter().filter(|s| hotspots.contains(&s.name.as_str())).count();
            sites
                .iter()
                .map(|s| {
                    if hotspots.contains(&s.name.as_str()) {
                        SiteLevers {
                            marketing: s.marketing * (1.0 - 0.6 * frac),
                            price: s.price * (1.0 + 0.2 * frac),
                            env_fund: s.env_fund * (1.0 + frac),
                            community_fund: s.community_fund,
                        }
                    } else {
                        SiteLevers {
                            marketing: s.marketing + moved / n_quiet.max(1) as f64,
                            price: s.price,
                            env_fund: s.env_fund,
                            community_fund: s.community_fund * (1.0 + frac),
                        }
                    }
                })
                .collect()
        })
        .collect();
    FlowSchedule { years, levers }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(name: &str) -> SiteState {
        SiteState {
            name: name.into(),
            environment: 0.5,
            satisfaction: 0.5,
            visitors: 0.0,
            capacity: 1e5,
            population: 1e3,
            price: 1.0,
            marketing: 0.0,
            env_fund: 0.0,
            community_fund: 0.0,
            co2: 0.0,
        }
    }

    fn zeroed() -> IslandParams {
        IslandParams {
            phi: 0.0,
            dev_boost: 0.0,
            alpha: [0.0; 5],
            alpha_g: 0.0,
            beta_crowd: 0.0,
            beta_co2: 0.0,
            delta: 0.0,
            rho_comm: 0.0,
            rho_over: 0.0,
            rho_e: 0.0,
        }
    }

    #[test]
    fn potential_examples() {
        let mut p = zeroed();
        assert_eq!(total_potential(1e6, 0.75, 0.75, &p), 1e6);
        p.phi = 0.2;
        assert!((total_potential(1e6, 1.0, 1.0, &p) - 1.1e6).abs() < 1e-6);
        p.phi = 0.0;
        p.dev_boost = 5e3;
        assert_eq!(total_potential(1e6, 3.0, 1.0, &p), 1e6 + 5e3);
        p.phi = 10.0;
        p.dev_boost = 0.0;
        assert_eq!(total_potential(1e6, 0.0, 0.0, &p), 0.0);
    }

    #[test]
    fn attractiveness_examples() {
        let mut p = zeroed();
        assert_eq!(attractiveness(&plain("a"), &p), 1.0);

        p.alpha[3] = 1.0;
        let a = plain("a");
        let mut b = plain("b");
        b.marketing = std::f64::consts::E - 1.0;
        let ratio = attractiveness(&b, &p) / attractiveness(&a, &p);
        assert!((ratio - std::f64::consts::E).abs() < 1e-12);

        p.alpha[4] = 0.5;
        let mut dear = plain("c");
        dear.price = 2.0;
        assert!(attractiveness(&dear, &p) < attractiveness(&plain("c"), &p));
    }

    #[test]
    fn weight_examples() {
        let w = allocation_weights(&[2.0, 2.0, 2.0]).unwrap();
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(allocation_weights(&[3.0, 1.0]).unwrap(), vec![0.75, 0.25]);
        assert_eq!(allocation_weights(&[7.0]).unwrap(), vec![1.0]);
        assert!(allocation_weights(&[]).is_err());
        assert!(allocation_weights(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn log_weights_survive_large_exponents() {
        let w = weights_from_log(&[800.0, 800.0 + 3f64.ln()]).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-12 && (w[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn assignment_clamps_per_site() {
        assert_eq!(assign_visitors(100.0, &[0.5, 0.5], &[1e3, 1e3]), vec![50.0, 50.0]);
        assert_eq!(assign_visitors(100.0, &[0.5, 0.5], &[20.0, 1e3]), vec![20.0, 50.0]);
    }

    #[test]
    fn environment_examples() {
        let mut p = zeroed();
        p.delta = 0.1;
        assert!((site_environment_update(&plain("a"), &p).unwrap() - 0.55).abs() < 1e-15);

        let mut full = plain("a");
        full.environment = 1.0;
        assert_eq!(site_environment_update(&full, &p).unwrap(), 1.0);

        let mut packed = plain("a");
        packed.visitors = packed.capacity;
        p.beta_crowd = 10.0;
        assert_eq!(site_environment_update(&packed, &p).unwrap(), 0.0);

        packed.capacity = 0.0;
        assert!(site_environment_update(&packed, &p).is_err());
    }

    #[test]
    fn social_examples() {
        let mut p = zeroed();
        assert_eq!(site_social_update(&plain("a"), 0.9, &p).unwrap(), 0.5);
        p.rho_e = 0.5;
        assert!((site_social_update(&plain("a"), 0.9, &p).unwrap() - 0.7).abs() < 1e-15);

        let mut crowded = plain("a");
        crowded.visitors = 1e9;
        p.rho_over = 1.0;
        assert_eq!(site_social_update(&crowded, 0.9, &p).unwrap(), 0.0);
    }

    #[test]
    fn uniform_sites_share_equally() {
        let mut s = plain("x");
        s.visitors = 1e4;
        let sites: Vec<SiteState> = (0..4).map(|i| SiteState { name: format!("s{i}"), ..s.clone() }).collect();
        let sched = FlowSchedule::constant(&sites, (2024..2030).collect());
        let r = redistribute(&sites, &IslandParams::default(), &sched).unwrap();
        for w in &r.weights {
            assert!(w.iter().all(|x| *x == 0.25));
        }
    }

    #[test]
    fn moving_marketing_moves_share() {
        let p = IslandParams::default();
        let mut a = plain("a");
        a.marketing = 10.0;
        let b = plain("b");
        let sites = vec![a, b];
        let base = FlowSchedule::constant(&sites, vec![2024]);
        let mut shifted = base.clone();
        shifted.levers[0][0].marketing = 0.0;
        shifted.levers[0][1].marketing = 10.0;
        let r0 = redistribute(&sites, &p, &base).unwrap();
        let r1 = redistribute(&sites, &p, &shifted).unwrap();
        assert!(r1.weights[0][0] < r0.weights[0][0]);
    }

    #[test]
    fn iceland_preset_runs_ten_years() {
        let sites = iceland_sites();
        let sched = iceland_marketing_shift(&sites);
        assert_eq!(sched.years, (2024..=2033).collect::<Vec<_>>());
        let r = redistribute(&sites, &IslandParams::default(), &sched).unwrap();
        assert_eq!(r.visitors.len(), 10);
        for (w, s) in r.weights.iter().zip(&r.shares) {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(s.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
        // Quiet sites gain share over the decade.
        assert!(r.weights[9][5] > r.weights[0][5]);
    }

    #[test]
    fn schedule_shape_checked() {
        let sites = iceland_sites();
        let mut sched = iceland_marketing_shift(&sites);
        sched.levers[3].pop();
        assert!(matches!(redistribute(&sites, &IslandParams::default(), &sched), Err(Error::Config(_))));
    }
}
