//! Browser bindings. Each export takes plain arguments and returns a JSON
//! string, so the page needs no generated TypeScript glue beyond the
//! function names.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use tourism_core::dataio::{self, RegionPreset};
use tourism_core::flow::{self, FlowSchedule, IslandParams, SiteLevers};
use tourism_core::scenario::{self, AllocationPolicy, ScenarioBase};
use tourism_core::sd::{self, ExogenousSeries, PolicyVector, SimState, POLICY_NAMES};

struct Setup {
    preset: RegionPreset,
    exog: ExogenousSeries,
    init: SimState,
}

fn setup(preset: &str, seed: u64) -> tourism_core::Result<Setup> {
    let preset = RegionPreset::by_name(preset)?;
    let exog = dataio::synth_dataset(&preset, seed)?;
    let init = SimState::initial(&exog, preset.initial_environment.draw(seed))?;
    Ok(Setup { preset, exog, init })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Runs one policy. An empty `policy_json` uses the preset's default; any
/// levers given override it by name.
pub fn simulate_json(preset: &str, seed: u64, policy_json: &str) -> Result<String, String> {
    let s = setup(preset, seed).map_err(|e| e.to_string())?;
    let mut policy = s.preset.policy;
    if !policy_json.trim().is_empty() {
        let given: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(policy_json).map_err(|e| format!("policy: {e}"))?;
        for (k, v) in given {
            let slot = policy.field_mut(&k).ok_or_else(|| format!("unknown lever '{k}'"))?;
            *slot = v.as_f64().ok_or_else(|| format!("lever '{k}' must be a number"))?;
        }
    }
    let (traj, obj) = sd::simulate(&policy, &s.exog, &s.preset.coefficients, &s.init).map_err(|e| e.to_string())?;
    let col = |f: fn(&SimState) -> f64| traj.states.iter().map(f).collect::<Vec<_>>();
    to_json(&json!({
        "preset": s.preset.name,
        "years": traj.years,
        "visitors": col(|x| x.visitors),
        "environment": col(|x| x.environment),
        "satisfaction": col(|x| x.satisfaction),
        "net_revenue_cum": col(|x| x.net_revenue_cum),
        "objectives": obj,
        "policy": policy_map(&policy),
        "bounds": POLICY_NAMES.iter().zip(s.preset.bounds.pairs()).map(|(n, (lo, hi))| json!({"name": n, "low": lo, "high": hi})).collect::<Vec<_>>(),
    }))
}

fn policy_map(p: &PolicyVector) -> serde_json::Map<String, serde_json::Value> {
    POLICY_NAMES.iter().zip(p.to_array()).map(|(n, v)| (n.to_string(), json!(v))).collect()
}

/// Runs the four preset allocation policies, plus a custom split when
/// `custom` holds four fractions (env, infra, community, marketing).
pub fn scenarios_json(preset: &str, seed: u64, custom: &[f64]) -> Result<String, String> {
    let s = setup(preset, seed).map_err(|e| e.to_string())?;
    let mut list = AllocationPolicy::presets();
    if !custom.is_empty() {
        let [env, infra, community, marketing] =
            <[f64; 4]>::try_from(custom).map_err(|_| "custom split needs 4 fractions".to_string())?;
        list.push(AllocationPolicy {
            name: "Custom".into(),
            env,
            infra,
            community,
            marketing,
        });
    }
    let base = ScenarioBase {
        policy: s.preset.policy,
        exog: s.exog,
        coeffs: s.preset.coefficients,
        init: s.init,
        feedback: s.preset.feedback,
    };
    let cmp = scenario::compare_scenarios(&list, &base).map_err(|e| e.to_string())?;
    let runs: Vec<_> = cmp
        .runs
        .iter()
        .map(|r| {
            json!({
                "name": r.allocation.name,
                "environment": r.trajectory.states.iter().map(|x| x.environment).collect::<Vec<_>>(),
                "satisfaction": r.trajectory.states.iter().map(|x| x.satisfaction).collect::<Vec<_>>(),
                "net_revenue_cum": r.trajectory.states.iter().map(|x| x.net_revenue_cum).collect::<Vec<_>>(),
            })
        })
        .collect();
    to_json(&json!({ "years": cmp.years, "runs": runs, "summaries": cmp.summaries }))
}

/// Seven-site redistribution. `intensity` scales the hotspot-to-quiet-site
/// marketing plan: 0 keeps current levers, 1 is the full plan.
pub fn redistribute_json(intensity: f64) -> Result<String, String> {
    if !(0.0..=1.5).contains(&intensity) {
        return Err(format!("intensity must lie in [0, 1.5], got {intensity}"));
    }
    let sites = flow::iceland_sites();
    let plan = flow::iceland_marketing_shift(&sites);
    let base = FlowSchedule::constant(&sites, plan.years.clone());
    let mix = |a: f64, b: f64| (a * (1.0 - intensity) + b * intensity).max(0.0);
    let levers = base
        .levers
        .iter()
        .zip(&plan.levers)
        .map(|(b, p)| {
            b.iter()
                .zip(p)
                .map(|(b, p)| SiteLevers {
                    marketing: mix(b.marketing, p.marketing),
                    price: mix(b.price, p.price),
                    env_fund: mix(b.env_fund, p.env_fund),
                    community_fund: mix(b.community_fund, p.community_fund),
                })
                .collect()
        })
        .collect();
    let schedule = FlowSchedule { years: plan.years, levers };
    let r = flow::redistribute(&sites, &IslandParams::default(), &schedule).map_err(|e| e.to_string())?;
    to_json(&r)
}

#[wasm_bindgen]
pub fn simulate(preset: &str, seed: u32, policy_json: &str) -> Result<String, JsValue> {
    simulate_json(preset, seed as u64, policy_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn scenarios(preset: &str, seed: u32, custom: Vec<f64>) -> Result<String, JsValue> {
    scenarios_json(preset, seed as u64, &custom).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn redistribute(intensity: f64) -> Result<String, JsValue> {
    redistribute_json(intensity).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn default_policy_matches_core() {
        let v = parse(simulate_json("juneau", 0, ""));
        assert_eq!(v["years"].as_array().unwrap().len(), 17);
        let s = setup("juneau", 0).unwrap();
        let (_, obj) = sd::simulate(&s.preset.policy, &s.exog, &s.preset.coefficients, &s.init).unwrap();
        assert_eq!(v["objectives"]["environment"].as_f64(), Some(obj.environment));
    }

    #[test]
    fn lever_overrides_and_rejections() {
        let base = parse(simulate_json("juneau", 0, ""));
        let taxed = parse(simulate_json("juneau", 0, r#"{"tax_rate": 0.3}"#));
        assert_eq!(taxed["policy"]["tax_rate"], 0.3);
        assert_ne!(base["objectives"], taxed["objectives"]);
        assert!(simulate_json("juneau", 0, r#"{"taxrate": 1}"#).unwrap_err().contains("unknown lever"));
        assert!(simulate_json("mars", 0, "").is_err());
    }

    #[test]
    fn scenario_runs_include_custom_split() {
        let v = parse(scenarios_json("iceland", 2, &[0.25, 0.25, 0.25, 0.25]));
        assert_eq!(v["runs"].as_array().unwrap().len(), 5);
        assert_eq!(v["runs"][4]["name"], "Custom");
        assert!(scenarios_json("iceland", 2, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn zero_intensity_keeps_levers_and_full_matches_plan() {
        let sites = flow::iceland_sites();
        let plan = flow::iceland_marketing_shift(&sites);
        let full: flow::FlowResult = serde_json::from_str(&redistribute_json(1.0).unwrap()).unwrap();
        let direct = flow::redistribute(&sites, &IslandParams::default(), &plan).unwrap();
        assert_eq!(full.final_distribution, direct.final_distribution);

        let still: flow::FlowResult = serde_json::from_str(&redistribute_json(0.0).unwrap()).unwrap();
        let quiet: f64 = still.final_distribution[3..].iter().sum();
        let shifted: f64 = full.final_distribution[3..].iter().sum();
        assert!(shifted > quiet);
        assert!(redistribute_json(-0.1).is_err());
    }
}
