//! Penalized objective averaged over simulation replications.
//!
//! `Z = AA/N + rho * Aβ/N` where `AA` sums every facility's average on-hand
//! inventory over all replications and `Aβ` sums the per-replication,
//! per-facility shortfalls `max(0, β_target - β)`. Replication `n` always uses
//! the random streams keyed by `n`, so `Z` is a deterministic function of the
//! policy (common random numbers).

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{sim_network, SimError, SimulationOutcome};
use crate::model::{
    FacilityId, FacilityPolicy, HistoryDataset, ModelError, Network, PolicyBounds, PolicyVector,
    ScenarioConfig, repair_policy,
};

/// What one replication contributes to the objective.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationSummary {
    pub avg_on_hand: Vec<f64>,
    pub beta: Vec<f64>,
}

impl From<&SimulationOutcome> for ReplicationSummary {
    fn from(outcome: &SimulationOutcome) -> Self {
        Self {
            avg_on_hand: outcome.facilities.iter().map(|f| f.avg_on_hand).collect(),
            beta: outcome.facilities.iter().map(|f| f.beta).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FacilitySummary {
    pub id: FacilityId,
    pub target_beta: f64,
    pub mean_beta: f64,
    pub min_beta: f64,
    pub max_beta: f64,
    pub mean_on_hand: f64,
}

impl FacilitySummary {
    pub fn meets_target(&self) -> bool {
        self.mean_beta >= self.target_beta
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectiveReport {
    pub z: f64,
    /// `AA/N`.
    pub mean_total_on_hand: f64,
    /// `Aβ/N`.
    pub mean_violation: f64,
    pub replications: usize,
    pub facilities: Vec<FacilitySummary>,
    pub policy: Vec<FacilityPolicy>,
}

impl ObjectiveReport {
    /// True when every facility's mean β reaches its target.
    pub fn all_targets_met(&self) -> bool {
        self.facilities.iter().all(FacilitySummary::meets_target)
    }
}

/// Folds replication summaries into the objective, looping replications in
/// the given order and facilities in network order.
pub fn aggregate(
    ids: &[FacilityId],
    targets: &[f64],
    replications: &[ReplicationSummary],
    penalty: f64,
) -> ObjectiveReport {
    let n = replications.len();
    let facility_count = targets.len();
    let mut total_on_hand = 0.0;
    let mut total_violation = 0.0;
    let mut beta_sum = vec![0.0; facility_count];
    let mut beta_min = vec![f64::INFINITY; facility_count];
    let mut beta_max = vec![f64::NEG_INFINITY; facility_count];
    let mut on_hand_sum = vec![0.0; facility_count];
    for rep in replications {
        for f in 0..facility_count {
            let (a, b) = (rep.avg_on_hand[f], rep.beta[f]);
            total_on_hand += a;
            total_violation += (targets[f] - b).max(0.0);
            beta_sum[f] += b;
            beta_min[f] = beta_min[f].min(b);
            beta_max[f] = beta_max[f].max(b);
            on_hand_sum[f] += a;
        }
    }
    let nf = n as f64;
    let mean_total_on_hand = total_on_hand / nf;
    let mean_violation = total_violation / nf;
    ObjectiveReport {
        z: mean_total_on_hand + penalty * mean_violation,
        mean_total_on_hand,
        mean_violation,
        replications: n,
        facilities: (0..facility_count)
            .map(|f| FacilitySummary {
                id: ids[f],
                target_beta: targets[f],
                mean_beta: beta_sum[f] / nf,
                min_beta: beta_min[f],
                max_beta: beta_max[f],
                mean_on_hand: on_hand_sum[f] / nf,
            })
            .collect(),
        policy: Vec::new(),
    }
}

/// Runs `config.replications` replications (in parallel) and aggregates them
/// in replication order.
pub fn evaluate(
    policy: &PolicyVector,
    network: &Network,
    history: &HistoryDataset,
    config: &ScenarioConfig,
) -> Result<ObjectiveReport, SimError> {
    let outcomes: Vec<ReplicationSummary> = (0..config.replications)
        .into_par_iter()
        .map(|n| sim_network(network, policy, history, config, n).map(|o| ReplicationSummary::from(&o)))
        .collect::<Result<_, _>>()?;
    let ids: Vec<FacilityId> = network.facilities().iter().map(|f| f.id).collect();
    let targets: Vec<f64> = network.facilities().iter().map(|f| f.target_beta).collect();
    let mut report = aggregate(&ids, &targets, &outcomes, config.penalty);
    report.policy = policy.entries().to_vec();
    Ok(report)
}

/// The inventory problem as a black box over continuous points
/// `[R_0, B_0, R_1, B_1, ...]`.
#[derive(Clone, Debug)]
pub struct InventoryProblem {
    pub network: Network,
    pub history: HistoryDataset,
    pub scenario: ScenarioConfig,
    pub bounds: PolicyBounds,
}

impl InventoryProblem {
    pub fn new(
        network: Network,
        history: HistoryDataset,
        scenario: ScenarioConfig,
        bounds: PolicyBounds,
    ) -> Result<Self, ModelError> {
        scenario.validate()?;
        history.validate_for(&network)?;
        if bounds.len() != network.len() {
            return Err(ModelError::PolicyLength {
                expected: network.len(),
                got: bounds.len(),
            });
        }
        Ok(Self {
            network,
            history,
            scenario,
            bounds,
        })
    }

    pub fn dimension(&self) -> usize {
        2 * self.network.len()
    }

    pub fn policy_at(&self, x: &[f64]) -> Result<PolicyVector, ModelError> {
        repair_policy(x, &self.bounds)
    }

    pub fn evaluate(&self, policy: &PolicyVector) -> Result<ObjectiveReport, SimError> {
        evaluate(policy, &self.network, &self.history, &self.scenario)
    }

    pub fn evaluate_point(&self, x: &[f64]) -> Result<ObjectiveReport, SimError> {
        let policy = self.policy_at(x)?;
        self.evaluate(&policy)
    }

    /// Scalar objective for the optimizers; failures map to `+inf`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.evaluate_point(x).map_or(f64::INFINITY, |r| r.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: u32) -> Vec<FacilityId> {
        (1..=n).map(FacilityId).collect()
    }

    fn rep(a: &[f64], b: &[f64]) -> ReplicationSummary {
        ReplicationSummary {
            avg_on_hand: a.to_vec(),
            beta: b.to_vec(),
        }
    }

    #[test]
    fn no_violation_is_total_inventory() {
        let r = aggregate(&ids(2), &[0.95, 0.9], &[rep(&[100.0, 50.0], &[0.97, 0.9])], 1e6);
        assert_eq!(r.z, 150.0);
        assert_eq!(r.mean_violation, 0.0);
        assert!(r.all_targets_met());
    }

    #[test]
    fn shortfall_is_penalized() {
        let r = aggregate(&ids(1), &[0.95], &[rep(&[100.0], &[0.90])], 1e6);
        assert!((r.z - 50_100.0).abs() <= 1e-9 * 50_100.0, "{}", r.z);
        assert!(!r.all_targets_met());
    }

    #[test]
    fn averages_over_replications() {
        let reps = [rep(&[70.0, 50.0], &[1.0, 1.0]), rep(&[30.0, 50.0], &[1.0, 1.0])];
        let r = aggregate(&ids(2), &[0.95, 0.95], &reps, 1e6);
        assert_eq!(r.z, 100.0);
        assert_eq!(r.facilities[0].mean_on_hand, 50.0);
    }

    #[test]
    fn violations_summed_before_averaging() {
        // Mean β = 0.95 meets the target, but replication 2 falls short by
        // 0.05, so the penalty is rho * 0.05 / 2.
        let reps = [rep(&[10.0], &[1.0]), rep(&[10.0], &[0.9])];
        let r = aggregate(&ids(1), &[0.95], &reps, 1000.0);
        assert!((r.z - (10.0 + 1000.0 * 0.05 / 2.0)).abs() < 1e-9);
        assert!(r.facilities[0].meets_target());
    }
}
