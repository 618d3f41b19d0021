use std::sync::Mutex;

use proptest::prelude::*;

use tourism_core::dataio::{self, ColumnMap, RegionPreset};
use tourism_core::flow::{self, FlowSchedule, IslandParams, SiteLevers};
use tourism_core::gsa::{morris_indices, morris_sample, saltelli_sample, Parameter, ParameterSpace};
use tourism_core::moea::{self, dominates, evolve, fast_nondominated_sort, EAConfig, ObjectiveVec};
use tourism_core::scenario::{run_scenario, AllocationPolicy, FeedbackCoefficients, ScenarioBase};
use tourism_core::sd::{
    self, simulate, step_visitors, ExogenousSeries, ModelCoefficients, PolicyBounds, PolicyVector,
    SimState,
};

fn policy_in(b: PolicyBounds) -> impl Strategy<Value = PolicyVector> {
    let ranges: Vec<_> = (0..7).map(|i| b.lower[i]..=b.upper[i]).collect();
    ranges.prop_map(|g| PolicyVector::from_slice(&g).unwrap())
}

fn juneau_series(seed: u64, scale: f64) -> ExogenousSeries {
    let mut s = dataio::synth_dataset(&RegionPreset::juneau(), seed).unwrap();
    s.scale_demand(scale);
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn states_stay_admissible(
        policy in policy_in(PolicyBounds::juneau()),
        seed in 0u64..1000,
        scale in 0.1f64..30.0,
        e0 in 0.0f64..=1.0,
        crowd in 0.0f64..1e-3,
        threshold in 0.0f64..=1.0,
    ) {
        let exog = juneau_series(seed, scale);
        let mut c = ModelCoefficients::default();
        c.crowding_impact = crowd;
        c.satisfaction_threshold = threshold;
        let init = SimState::initial(&exog, e0).unwrap();
        let (traj, _) = simulate(&policy, &exog, &c, &init).unwrap();
        let vessel = policy.ship_limit.round() * c.ship_capacity;
        for s in &traj.states[1..] {
            prop_assert!((0.0..=1.0).contains(&s.environment));
            prop_assert!((0.0..=1.0).contains(&s.satisfaction));
            prop_assert!(s.visitors >= 0.0);
            prop_assert!(s.visitors <= policy.capacity_limit);
            prop_assert!(s.visitors <= vessel);
        }
    }

    #[test]
    fn carbon_fee_never_raises_unconstrained_demand(
        policy in policy_in(PolicyBounds::juneau()),
        extra in 0.0f64..50.0,
        elasticity in -2.0f64..-0.01,
    ) {
        let exog = juneau_series(1, 1.0);
        let mut c = ModelCoefficients::default();
        c.price_elasticity = elasticity;
        let init = SimState::initial(&exog, 0.7).unwrap();
        let mut dearer = policy;
        dearer.carbon_fee += extra;
        let a = step_visitors(&init, &exog, 0, &policy, &c).unwrap();
        let b = step_visitors(&init, &exog, 0, &dearer, &c).unwrap();
        prop_assert!(b.potential <= a.potential);
    }

    #[test]
    fn f1_non_decreasing_in_capacity_when_capacity_bound(
        policy in policy_in(PolicyBounds::juneau()),
        bump in 0.0f64..1.0e6,
    ) {
        // Ample ships and demand keep the capacity cap binding every year.
        let exog = juneau_series(2, 15.0);
        let c = ModelCoefficients::default();
        let init = SimState::initial(&exog, 0.7).unwrap();
        let mut p = policy;
        p.ship_limit = 800.0;
        p.capacity_limit = p.capacity_limit.min(3.0e6);
        let (lo_traj, lo) = simulate(&p, &exog, &c, &init).unwrap();
        prop_assume!(lo_traj.diagnostics.iter().all(|d| d.potential_visitors >= p.capacity_limit + bump));
        let mut q = p;
        q.capacity_limit += bump;
        let (_, hi) = simulate(&q, &exog, &c, &init).unwrap();
        prop_assert!(hi.net_revenue_cum >= lo.net_revenue_cum);
    }

    #[test]
    fn nondominated_sort_matches_count_oracle(
        objs in prop::collection::vec(prop::array::uniform3(0u8..6), 1..50)
    ) {
        let objs: Vec<ObjectiveVec> = objs.iter().map(|a| a.map(f64::from)).collect();
        let fronts = fast_nondominated_sort(&objs);
        let mut rank = vec![usize::MAX; objs.len()];
        for (r, f) in fronts.iter().enumerate() {
            for &i in f {
                rank[i] = r;
            }
        }
        // Oracle: a point's rank is one more than the highest rank among
        // points that dominate it (0 when none do).
        for i in 0..objs.len() {
            let dominators: Vec<usize> = (0..objs.len())
                .filter(|&j| dominates(&objs[j], &objs[i]).unwrap())
                .collect();
            let expect = dominators.iter().map(|&j| rank[j] + 1).max().unwrap_or(0);
            prop_assert_eq!(rank[i], expect);
        }
    }

    #[test]
    fn morris_affine_models_are_exact(
        slopes in prop::collection::vec(-5.0f64..5.0, 1..6),
        offset in -10.0f64..10.0,
        seed in 0u64..500,
    ) {
        let k = slopes.len();
        let space = ParameterSpace::new(
            (0..k).map(|i| Parameter::new(format!("x{i}"), 0.0, 1.0)).collect()
        ).unwrap();
        let d = morris_sample(&space, 8, 4, seed).unwrap();
        let y: Vec<f64> = d.points().iter()
            .map(|x| offset + x.iter().zip(&slopes).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let r = morris_indices(&d, &y).unwrap();
        for i in 0..k {
            prop_assert!((r.mu_star[i] - slopes[i].abs()).abs() <= 1e-9);
            prop_assert!(r.sigma[i] <= 1e-9);
        }
    }

    #[test]
    fn morris_steps_move_one_coordinate(k in 1usize..8, seed in 0u64..500) {
        let space = ParameterSpace::new(
            (0..k).map(|i| Parameter::new(format!("x{i}"), -1.0, 3.0)).collect()
        ).unwrap();
        let d = morris_sample(&space, 4, 6, seed).unwrap();
        for t in &d.trajectories {
            prop_assert_eq!(t.points.len(), k + 1);
            for j in 0..k {
                let moved: Vec<usize> = (0..k)
                    .filter(|&c| t.unit_points[j][c] != t.unit_points[j + 1][c])
                    .collect();
                prop_assert_eq!(moved.len(), 1);
                let dlt = (t.unit_points[j + 1][moved[0]] - t.unit_points[j][moved[0]]).abs();
                prop_assert!((dlt - 0.6).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_seed_same_saltelli_design(seed in 0u64..1000) {
        let space = ParameterSpace::policy(&PolicyBounds::juneau());
        prop_assert_eq!(saltelli_sample(&space, 8, seed).unwrap(), saltelli_sample(&space, 8, seed).unwrap());
    }

    #[test]
    fn scenario_feedback_keeps_invariants(
        env in 0.0f64..=1.0,
        infra in 0.0f64..=1.0,
        community in 0.0f64..=1.0,
        marketing in 0.0f64..=1.0,
        policy in policy_in(PolicyBounds::juneau()),
        seed in 0u64..100,
    ) {
        let exog = juneau_series(seed, 1.0);
        let base = ScenarioBase {
            policy,
            init: SimState::initial(&exog, 0.7).unwrap(),
            exog,
            coeffs: ModelCoefficients::default(),
            feedback: FeedbackCoefficients::default(),
        };
        let alloc = AllocationPolicy::new("p", env, infra, community, marketing);
        let run = run_scenario(&alloc, &base).unwrap();
        let theta = run.allocation.sum();
        prop_assert!(theta <= 1.0 + 1e-12);
        for (j, ch) in run.channels.iter().enumerate() {
            let r = run.trajectory.diagnostics[j].net_revenue.max(0.0);
            prop_assert!(ch.total() <= r * theta * (1.0 + 1e-12) + 1e-9);
        }
        for w in run.capacity.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        let vessel = policy.ship_limit.round() * base.coeffs.ship_capacity;
        for (s, cap) in run.trajectory.states[1..].iter().zip(&run.capacity) {
            prop_assert!((0.0..=1.0).contains(&s.environment));
            prop_assert!((0.0..=1.0).contains(&s.satisfaction));
            prop_assert!(s.visitors >= 0.0 && s.visitors <= *cap && s.visitors <= vessel);
        }
    }

    #[test]
    fn flow_weights_and_indices_stay_valid(
        levers in prop::collection::vec(
            prop::collection::vec((0.0f64..1e3, 0.0f64..5.0, 0.0f64..1e8, 0.0f64..1e8), 7),
            1..12,
        ),
    ) {
        let sites = flow::iceland_sites();
        let schedule = FlowSchedule {
            years: (0..levers.len() as i32).map(|y| 2024 + y).collect(),
            levers: levers.iter().map(|row| row.iter().map(|&(m, p, e, c)| SiteLevers {
                marketing: m, price: p, env_fund: e, community_fund: c,
            }).collect()).collect(),
        };
        let r = flow::redistribute(&sites, &IslandParams::default(), &schedule).unwrap();
        for t in 0..r.years.len() {
            prop_assert!((r.weights[t].iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(r.weights[t].iter().all(|w| *w >= 0.0));
            prop_assert!(r.shares[t].iter().all(|s| *s >= 0.0));
            prop_assert!(r.environment[t].iter().all(|e| (0.0..=1.0).contains(e)));
            prop_assert!(r.satisfaction[t].iter().all(|s| (0.0..=1.0).contains(s)));
        }
    }

    #[test]
    fn more_marketing_never_lowers_own_weight(
        site in 0usize..7,
        extra in 0.0f64..100.0,
    ) {
        let p = IslandParams::default();
        let mut sites = flow::iceland_sites();
        let logs: Vec<f64> = sites.iter().map(|s| flow::log_attractiveness(s, &p)).collect();
        let before = flow::weights_from_log(&logs).unwrap()[site];
        sites[site].marketing += extra;
        let logs: Vec<f64> = sites.iter().map(|s| flow::log_attractiveness(s, &p)).collect();
        let after = flow::weights_from_log(&logs).unwrap()[site];
        prop_assert!(after >= before);
    }

    #[test]
    fn synthetic_series_pass_their_envelope(seed in any::<u64>(), iceland in any::<bool>()) {
        let preset = if iceland { RegionPreset::iceland() } else { RegionPreset::juneau() };
        let s = dataio::synth_dataset(&preset, seed).unwrap();
        prop_assert!(dataio::validate_ranges(&s, &preset.envelope).is_empty());
        prop_assert_eq!(&s, &dataio::synth_dataset(&preset, seed).unwrap());
        s.validate().unwrap();
    }

    #[test]
    fn interpolation_idempotent_and_roundtrip_exact(seed in any::<u64>()) {
        let s = dataio::synth_dataset(&RegionPreset::juneau(), seed).unwrap();
        let again = dataio::interpolate_missing(&dataio::RawAnnualTable::from_series(&s)).unwrap();
        prop_assert_eq!(&again, &s);

        let mut buf = Vec::new();
        dataio::write_series(&s, &mut buf).unwrap();
        let table = dataio::read_table(buf.as_slice(), &ColumnMap::identity()).unwrap();
        let back = dataio::interpolate_missing(&table).unwrap();
        prop_assert_eq!(&back, &s);
        let mut buf2 = Vec::new();
        dataio::write_series(&back, &mut buf2).unwrap();
        prop_assert_eq!(buf, buf2);
    }
}

#[test]
fn environment_recovers_monotonically_without_pressure() {
    let exog = juneau_series(0, 1.0);
    let mut c = ModelCoefficients::zeroed();
    c.recovery_rate = 0.2;
    let init = SimState::initial(&exog, 0.1).unwrap();
    let (traj, obj) = simulate(&PolicyVector::default(), &exog, &c, &init).unwrap();
    for w in traj.states.windows(2) {
        assert!(w[1].environment >= w[0].environment);
    }
    let gap0 = 1.0 - init.environment;
    let expect = gap0 * 0.8f64.powi(traj.horizon() as i32);
    assert!((1.0 - obj.environment - expect).abs() < 1e-12);
}

#[test]
fn telescoping_over_a_century() {
    let mut exog = juneau_series(4, 1.0);
    let n = exog.len();
    for col in exog.columns_mut() {
        let v = col.clone();
        col.clear();
        for k in 0..101 {
            col.push(v[k % n]);
        }
    }
    exog.years = (1924..=2024).collect();
    exog.validate().unwrap();
    let init = SimState::initial(&exog, 0.7).unwrap();
    let (traj, obj) = simulate(&RegionPreset::juneau().policy, &exog, &ModelCoefficients::default(), &init).unwrap();
    assert_eq!(traj.horizon(), 100);
    let sum: f64 = traj.diagnostics.iter().map(|d| d.net_revenue).sum();
    assert!((obj.net_revenue_cum - sum).abs() <= 1e-12 * obj.net_revenue_cum.abs());
}

fn toy(g: &[f64]) -> tourism_core::Result<ObjectiveVec> {
    let x = g[0];
    Ok([-x * x, -(x - 1.0).powi(2), -(x + 1.0).powi(2)])
}

#[test]
fn evolve_respects_bounds_and_hypervolume_is_monotone() {
    let p = RegionPreset::juneau();
    let exog = juneau_series(0, 1.0);
    let init = SimState::initial(&exog, 0.7).unwrap();
    let seen = Mutex::new(Vec::<Vec<f64>>::new());
    let eval = |g: &[f64]| -> tourism_core::Result<ObjectiveVec> {
        seen.lock().unwrap().push(g.to_vec());
        Ok(sd::simulate(&PolicyVector::from_slice(g)?, &exog, &p.coefficients, &init)?.1.to_array())
    };
    let cfg = EAConfig {
        population_size: 40,
        generations: 12,
        seed: 9,
        plateau_tol: 0.0,
        ..EAConfig::default()
    };
    let res = evolve(&p.bounds.pairs(), &eval, &cfg).unwrap();
    let seen = seen.into_inner().unwrap();
    assert_eq!(seen.len(), 40 * 13);
    for g in &seen {
        assert!(p.bounds.contains(&PolicyVector::from_slice(g).unwrap()));
    }
    for w in res.history.windows(2) {
        assert!(w[1].hypervolume >= w[0].hypervolume);
    }
    assert!(res.front.is_mutually_nondominated());
}

#[test]
fn evolve_is_bit_reproducible() {
    let cfg = EAConfig {
        population_size: 20,
        generations: 10,
        seed: 77,
        ..EAConfig::default()
    };
    let a = evolve(&[(-2.0, 2.0)], &toy, &cfg).unwrap();
    let b = evolve(&[(-2.0, 2.0)], &toy, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn clone_population_collapses_to_one_point() {
    let cfg = EAConfig {
        population_size: 10,
        generations: 3,
        seed: 1,
        ..EAConfig::default()
    };
    let res = evolve(&[(0.5, 0.5)], &toy, &cfg).unwrap();
    assert_eq!(res.front.members.len(), 1);
}

#[test]
fn front_is_mutually_nondominated_by_brute_force() {
    let cfg = EAConfig {
        population_size: 50,
        generations: 20,
        seed: 5,
        ..EAConfig::default()
    };
    let res = evolve(&[(-2.0, 2.0)], &toy, &cfg).unwrap();
    let objs = res.front.objectives();
    for a in &objs {
        for b in &objs {
            assert!(!moea::dominates(a, b).unwrap() || a == b);
        }
    }
}
