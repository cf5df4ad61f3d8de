//! Randomized checks of the simulator's ordering rules, stock balances and
//! common-random-number behaviour.

use std::collections::BTreeMap;

use echelon_core::engine::{audit, beta, simulate, SimOptions};
use echelon_core::model::{
    DemandChoice, FacilityHistory, FacilityId, FacilityPolicy, FacilitySpec, HistoryDataset, Network,
    NetworkSpec, PolicyVector, ScenarioConfig, Upstream,
};
use echelon_core::objective::evaluate;
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Case {
    network: Network,
    policy: PolicyVector,
    history: HistoryDataset,
    scenario: ScenarioConfig,
}

/// Facility `i` hangs below the source or below an earlier facility, so every
/// generated upstream relation is a tree. Ids are shuffled so that network
/// order does not follow the tree.
fn arb_case() -> impl Strategy<Value = Case> {
    (1usize..=6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(any::<prop::sample::Index>(), n),
                prop::collection::vec(0u32..4, n),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec((0i64..80, 0i64..120), n),
                prop::collection::vec(prop::collection::vec(0i64..25, 1..8), n),
                prop::collection::vec(prop::collection::vec(0i64..3, 1..4), n),
                Just((1..=n as u32).map(|i| i * 7 + 3).collect::<Vec<u32>>()).prop_shuffle(),
                (10u32..90, any::<bool>(), any::<u64>(), 0.0f64..=1.0),
            )
        })
        .prop_map(|(parents, leads, customers, policy, demand, lead_delta, ids, scenario)| {
            let n = parents.len();
            let mut facilities = Vec::with_capacity(n);
            let mut entries = Vec::with_capacity(n);
            let mut history = BTreeMap::new();
            for i in 0..n {
                let upstream = match parents[i].index(i + 1) {
                    0 => Upstream::Source,
                    p => Upstream::Facility(FacilityId(ids[p - 1])),
                };
                let serves = customers[i] || i == n - 1;
                let id = FacilityId(ids[i]);
                facilities.push(FacilitySpec {
                    id,
                    upstream,
                    base_lead_time: leads[i],
                    target_beta: if serves { 0.9 } else { 0.0 },
                    serves_customers: serves,
                });
                let (r, extra) = policy[i];
                entries.push(FacilityPolicy {
                    reorder_point: r,
                    base_stock: r + extra,
                });
                history.insert(
                    id,
                    FacilityHistory {
                        demand: if serves { demand[i].clone() } else { Vec::new() },
                        lead_delta: lead_delta[i].clone(),
                    },
                );
            }
            let (horizon, lost, base_seed, fraction) = scenario;
            let network = Network::new(NetworkSpec { facilities }).expect("generated tree is valid");
            let policy = PolicyVector::for_network(&network, entries).expect("generated policy is valid");
            Case {
                network,
                policy,
                history: HistoryDataset { facilities: history },
                scenario: ScenarioConfig {
                    horizon,
                    replications: 1,
                    choice: if lost { DemandChoice::LostSales } else { DemandChoice::Backorder },
                    initial_inventory_fraction: fraction,
                    base_seed,
                    ..ScenarioConfig::default()
                },
            }
        })
}

fn recorded() -> SimOptions {
    SimOptions {
        record_trace: true,
        record_events: true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn audit_finds_no_breaches(case in arb_case(), replication in 0u32..4) {
        let outcome = simulate(&case.network, &case.policy, &case.history, &case.scenario, replication, recorded()).unwrap();
        let breaches = audit(&case.network, case.scenario.choice, &outcome);
        prop_assert!(breaches.is_empty(), "{:#?}", breaches);
    }

    #[test]
    fn beta_matches_counters_and_trace(case in arb_case()) {
        let outcome = simulate(&case.network, &case.policy, &case.history, &case.scenario, 0, recorded()).unwrap();
        let trace = outcome.trace.as_ref().unwrap();
        for f in &outcome.facilities {
            let expected = beta(case.scenario.choice, f.total_demand, f.total_shipped, f.total_late);
            prop_assert_eq!(f.beta, expected);
            prop_assert!((0.0..=1.0).contains(&f.beta));
            let rows = trace.iter().filter(|r| r.facility == f.id);
            let (demand, shipped) = rows.fold((0, 0), |(d, s), r| (d + r.demand, s + r.shipped));
            prop_assert_eq!(demand, f.total_demand);
            prop_assert_eq!(shipped, f.total_shipped);
            let on_hand: i64 = trace.iter().filter(|r| r.facility == f.id).map(|r| r.on_hand).sum();
            prop_assert_eq!(f.avg_on_hand, on_hand as f64 / case.scenario.horizon as f64);
        }
    }

    #[test]
    fn replications_are_reproducible(case in arb_case(), replication in 0u32..4) {
        let a = simulate(&case.network, &case.policy, &case.history, &case.scenario, replication, recorded()).unwrap();
        let b = simulate(&case.network, &case.policy, &case.history, &case.scenario, replication, recorded()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn evaluation_is_reproducible(case in arb_case()) {
        let scenario = ScenarioConfig { replications: 3, ..case.scenario.clone() };
        let a = evaluate(&case.policy, &case.network, &case.history, &scenario).unwrap();
        let b = evaluate(&case.policy, &case.network, &case.history, &scenario).unwrap();
        prop_assert_eq!(a.z.to_bits(), b.z.to_bits());
    }

    /// Common random numbers: a facility's demand stream does not depend on
    /// the policy.
    #[test]
    fn demand_stream_ignores_policy(case in arb_case(), scale in 0i64..3) {
        let other = PolicyVector::for_network(
            &case.network,
            case.policy
                .entries()
                .iter()
                .map(|p| FacilityPolicy { reorder_point: p.reorder_point * scale, base_stock: p.base_stock * scale + 5 })
                .collect(),
        )
        .unwrap();
        let a = simulate(&case.network, &case.policy, &case.history, &case.scenario, 1, recorded()).unwrap();
        let c = simulate(&case.network, &other, &case.history, &case.scenario, 1, recorded()).unwrap();
        let demands = |o: &echelon_core::engine::SimulationOutcome| {
            o.trace.as_ref().unwrap().iter().map(|r| r.demand).collect::<Vec<_>>()
        };
        prop_assert_eq!(demands(&a), demands(&c));
    }
}

#[test]
fn base_seed_changes_the_trajectory() {
    let spec = FacilitySpec {
        id: FacilityId(1),
        upstream: Upstream::Source,
        base_lead_time: 2,
        target_beta: 0.9,
        serves_customers: true,
    };
    let network = Network::new(NetworkSpec { facilities: vec![spec] }).unwrap();
    let policy = PolicyVector::for_network(
        &network,
        vec![FacilityPolicy {
            reorder_point: 40,
            base_stock: 90,
        }],
    )
    .unwrap();
    let mut facilities = BTreeMap::new();
    facilities.insert(
        FacilityId(1),
        FacilityHistory {
            demand: (0..20).collect(),
            lead_delta: vec![0, 1, 2],
        },
    );
    let history = HistoryDataset { facilities };
    let scenario = ScenarioConfig {
        horizon: 60,
        replications: 1,
        ..ScenarioConfig::default()
    };
    let run = |seed: u64| {
        let s = ScenarioConfig {
            base_seed: seed,
            ..scenario.clone()
        };
        simulate(&network, &policy, &history, &s, 0, recorded()).unwrap().trace.unwrap()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
}
