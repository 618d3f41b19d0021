mod config;
mod out;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{Overrides, Resolved, RunConfig};
use out::{num, Meta, OutDir};
use tourism_core::dataio;
use tourism_core::flow;
use tourism_core::gsa::{self, ModelContext, SensitivityTable};
use tourism_core::moea;
use tourism_core::scenario::{self, ScenarioBase};
use tourism_core::sd::{self, PolicyVector, POLICY_NAMES};
use tourism_core::{Error, Result};

#[derive(Parser)]
#[command(name = "tourism", version, about = "Tourism policy model: simulation, optimization, sensitivity, scenarios and visitor flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Region preset: juneau or iceland. Replaces any dataset in the config.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the annual model for one policy.
    Simulate(Common),
    /// Search for Pareto-optimal policies.
    Optimize(Common),
    /// Morris or Sobol sensitivity of the objectives.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// morris or sobol.
        #[arg(long)]
        method: Option<String>,
        /// f1, f2, f3 or all.
        #[arg(long)]
        objective: Option<String>,
    },
    /// Compare budget-allocation scenarios.
    Scenario(Common),
    /// Redistribute visitors across attractions.
    Redistribute(Common),
    /// Write a preset's synthetic dataset.
    Synth(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Format(_) | Error::Io(_) => 3,
        Error::Domain(_) | Error::Evaluation(_) | Error::Analysis(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn setup(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    cfg.apply(&Overrides {
        preset: common.preset.clone(),
        seed: common.seed,
        out: common.out.clone(),
    });
    Ok(cfg)
}

fn open_out(cfg: &RunConfig, command: &str, seed: u64, preset: &str) -> Result<OutDir> {
    let meta = Meta {
        tool: "tourism-cli",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config_sha256: cfg.hash(),
        seed,
        preset: preset.to_string(),
    };
    OutDir::create(&cfg.out_dir(), meta)
}

fn run(cmd: Command) -> Result<Vec<PathBuf>> {
    let out = match cmd {
        Command::Simulate(c) => cmd_simulate(&setup(&c)?)?,
        Command::Optimize(c) => cmd_optimize(&setup(&c)?)?,
        Command::Sensitivity {
            common,
            method,
            objective,
        } => cmd_sensitivity(&setup(&common)?, method.as_deref(), objective.as_deref())?,
        Command::Scenario(c) => cmd_scenario(&setup(&c)?)?,
        Command::Redistribute(c) => cmd_redistribute(&setup(&c)?)?,
        Command::Synth(c) => cmd_synth(&setup(&c)?)?,
    };
    Ok(out.written)
}

#[derive(Serialize)]
struct ObjectivesDoc {
    f1: f64,
    f2: f64,
    f3: f64,
    policy: PolicyVector,
    initial_environment: f64,
}

fn cmd_simulate(cfg: &RunConfig) -> Result<OutDir> {
    let r = config::resolve(cfg)?;
    if !r.bounds.contains(&r.policy) {
        eprintln!("warning: policy lies outside the configured bounds");
    }
    let (traj, obj) = sd::simulate(&r.policy, &r.exog, &r.coeffs, &r.init)?;
    let mut o = open_out(cfg, "simulate", r.seed, &r.label)?;

    let header = [
        "year",
        "visitors",
        "environment",
        "satisfaction",
        "net_revenue_cum",
        "potential_visitors",
        "effective_price",
        "tourism_revenue",
        "gov_revenue_total",
        "env_spending",
        "gov_spending_total",
        "net_revenue",
    ];
    let rows: Vec<Vec<String>> = traj
        .years
        .iter()
        .zip(&traj.states)
        .enumerate()
        .map(|(j, (y, s))| {
            let mut row = vec![
                y.to_string(),
                num(s.visitors),
                num(s.environment),
                num(s.satisfaction),
                num(s.net_revenue_cum),
            ];
            match j.checked_sub(1).map(|k| &traj.diagnostics[k]) {
                Some(d) => row.extend(
                    [
                        d.potential_visitors,
                        d.effective_price,
                        d.tourism_revenue,
                        d.gov_revenue_total,
                        d.env_spending,
                        d.gov_spending_total,
                        d.net_revenue,
                    ]
                    .map(num),
                ),
                None => row.extend(std::iter::repeat(String::new()).take(7)),
            }
            row
        })
        .collect();
    o.csv("trajectory.csv", &header, &rows)?;
    o.json(
        "objectives.json",
        &ObjectivesDoc {
            f1: obj.net_revenue_cum,
            f2: obj.environment,
            f3: obj.satisfaction,
            policy: r.policy,
            initial_environment: r.init.environment,
        },
    )?;
    Ok(o)
}

fn objective_fn(r: &Resolved) -> impl Fn(&[f64]) -> Result<moea::ObjectiveVec> + Sync + '_ {
    move |genes: &[f64]| {
        let p = PolicyVector::from_slice(genes)?;
        let (_, obj) = sd::simulate(&p, &r.exog, &r.coeffs, &r.init)?;
        let v = obj.to_array();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite objectives at {genes:?}")));
        }
        Ok(v)
    }
}

#[derive(Serialize)]
struct BubblePoint {
    x: f64,
    y: f64,
    color: f64,
    policy: PolicyVector,
}

#[derive(Serialize)]
struct BubbleDoc {
    x_label: &'static str,
    y_label: &'static str,
    color_label: &'static str,
    generations_run: usize,
    converged: bool,
    reference_point: [f64; 3],
    hypervolume: f64,
    points: Vec<BubblePoint>,
}

fn cmd_optimize(cfg: &RunConfig) -> Result<OutDir> {
    let seed = cfg.require_seed("optimize")?;
    let r = config::resolve(cfg)?;
    let ea = config::ea_config(cfg, &r, seed)?;
    let eval = objective_fn(&r);
    let res = moea::evolve(&r.bounds.pairs(), &eval, &ea)?;
    if !res.front.is_mutually_nondominated() {
        return Err(Error::Evaluation("final front contains a dominated member".into()));
    }
    let mut o = open_out(cfg, "optimize", seed, &r.label)?;

    let mut members = res.front.members.clone();
    members.sort_by(|a, b| b.objectives[0].total_cmp(&a.objectives[0]));
    let mut header: Vec<&str> = POLICY_NAMES.to_vec();
    header.extend(["f1", "f2", "f3"]);
    let rows: Vec<Vec<String>> = members
        .iter()
        .map(|m| m.genome.iter().chain(&m.objectives).map(|v| num(*v)).collect())
        .collect();
    o.csv("front.csv", &header, &rows)?;

    let hv_rows: Vec<Vec<String>> = res
        .history
        .iter()
        .map(|h| {
            vec![
                h.generation.to_string(),
                num(h.hypervolume),
                h.front_size.to_string(),
                h.archive_size.to_string(),
            ]
        })
        .collect();
    o.csv(
        "hypervolume.csv",
        &["generation", "hypervolume", "front_size", "archive_size"],
        &hv_rows,
    )?;

    let points = members
        .iter()
        .map(|m| {
            Ok(BubblePoint {
                x: m.objectives[0],
                y: m.objectives[1],
                color: m.objectives[2],
                policy: PolicyVector::from_slice(&m.genome)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    o.json(
        "front_bubble.json",
        &BubbleDoc {
            x_label: "cumulative net revenue (USD)",
            y_label: "final environmental index",
            color_label: "final social satisfaction",
            generations_run: res.generations_run,
            converged: res.converged,
            reference_point: res.front.reference_point,
            hypervolume: res.history.last().map(|h| h.hypervolume).unwrap_or(0.0),
            points,
        },
    )?;
    Ok(o)
}

fn cmd_sensitivity(cfg: &RunConfig, method: Option<&str>, objective: Option<&str>) -> Result<OutDir> {
    let seed = cfg.require_seed("sensitivity")?;
    let r = config::resolve(cfg)?;
    let plan = config::sensitivity_plan(cfg, &r, seed, method, objective)?;
    let ctx = ModelContext {
        exog: r.exog.clone(),
        coeffs: r.coeffs,
        policy: r.policy,
        init: r.init,
    };
    let report = gsa::analyze_model(&ctx, &plan.space, plan.selector, plan.method, &plan.settings)?;
    let mut o = open_out(cfg, "sensitivity", seed, &r.label)?;

    for table in &report.tables {
        match table {
            SensitivityTable::Morris { output, rows } => {
                let body: Vec<Vec<String>> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        vec![
                            (i + 1).to_string(),
                            row.parameter.clone(),
                            num(row.mu_star),
                            num(row.mu),
                            num(row.sigma),
                        ]
                    })
                    .collect();
                o.csv(
                    &format!("morris_{}.csv", output.label()),
                    &["rank", "parameter", "mu_star", "mu", "sigma"],
                    &body,
                )?;
            }
            SensitivityTable::Sobol { output, rows } => {
                let body: Vec<Vec<String>> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        vec![
                            (i + 1).to_string(),
                            row.parameter.clone(),
                            num(row.first_order),
                            num(row.first_order_ci.0),
                            num(row.first_order_ci.1),
                            num(row.total),
                            num(row.total_ci.0),
                            num(row.total_ci.1),
                        ]
                    })
                    .collect();
                o.csv(
                    &format!("sobol_{}.csv", output.label()),
                    &["rank", "parameter", "S1", "S1_low", "S1_high", "ST", "ST_low", "ST_high"],
                    &body,
                )?;
            }
        }
    }
    o.json("sensitivity_matrix.json", &report)?;
    Ok(o)
}

#[derive(Serialize)]
struct ScenarioDoc {
    years: Vec<i32>,
    scenarios: Vec<scenario::ScenarioSummary>,
}

fn cmd_scenario(cfg: &RunConfig) -> Result<OutDir> {
    let list = config::scenarios(cfg)?;
    let r = config::resolve(cfg)?;
    let base = ScenarioBase {
        policy: r.policy,
        exog: r.exog.clone(),
        coeffs: r.coeffs,
        init: r.init,
        feedback: config::feedback(cfg, &r)?,
    };
    let cmp = scenario::compare_scenarios(&list, &base)?;
    let mut o = open_out(cfg, "scenario", r.seed, &r.label)?;
    let rows: Vec<Vec<String>> = cmp
        .long_rows()
        .into_iter()
        .map(|row| vec![row.scenario, row.year.to_string(), row.variable, num(row.value)])
        .collect();
    o.csv("scenarios.csv", &["scenario", "year", "variable", "value"], &rows)?;
    o.json(
        "scenario_summary.json",
        &ScenarioDoc {
            years: cmp.years.clone(),
            scenarios: cmp.summaries.clone(),
        },
    )?;
    Ok(o)
}

#[derive(Serialize)]
struct FinalShare {
    site: String,
    visitors: f64,
    share: f64,
}

#[derive(Serialize)]
struct FlowDoc {
    final_year: i32,
    total_potential: f64,
    distribution: Vec<FinalShare>,
}

fn cmd_redistribute(cfg: &RunConfig) -> Result<OutDir> {
    let plan = config::flow_plan(cfg)?;
    let res = flow::redistribute(&plan.sites, &plan.params, &plan.schedule)?;
    let label = cfg.preset.clone().unwrap_or_else(|| "iceland-sites".into());
    let mut o = open_out(cfg, "redistribute", cfg.seed.unwrap_or(0), &label)?;
    let mut rows = Vec::new();
    for (i, site) in res.sites.iter().enumerate() {
        for (t, y) in res.years.iter().enumerate() {
            rows.push(vec![
                site.clone(),
                y.to_string(),
                num(res.visitors[t][i]),
                num(res.environment[t][i]),
                num(res.satisfaction[t][i]),
                num(res.weights[t][i]),
                num(res.shares[t][i]),
            ]);
        }
    }
    o.csv(
        "flow.csv",
        &["site", "year", "visitors", "environment", "satisfaction", "weight", "share"],
        &rows,
    )?;
    let last = res.years.len() - 1;
    o.json(
        "flow_final.json",
        &FlowDoc {
            final_year: res.years[last],
            total_potential: res.total_potential[last],
            distribution: res
                .sites
                .iter()
                .enumerate()
                .map(|(i, s)| FinalShare {
                    site: s.clone(),
                    visitors: res.visitors[last][i],
                    share: res.final_distribution[i],
                })
                .collect(),
        },
    )?;
    Ok(o)
}

fn cmd_synth(cfg: &RunConfig) -> Result<OutDir> {
    let Some(name) = &cfg.preset else {
        return Err(Error::Config("synth needs a preset".into()));
    };
    let preset = dataio::RegionPreset::by_name(name)?;
    let seed = cfg.seed.unwrap_or(0);
    let series = dataio::synth_dataset(&preset, seed)?;
    let mut body = format!("# assumed_series: {}\n", preset.assumed_series.join(" ")).into_bytes();
    dataio::write_series(&series, &mut body)?;
    let mut o = open_out(cfg, "synth", seed, &preset.name)?;
    o.csv_raw("dataset.csv", &body)?;
    Ok(o)
}
