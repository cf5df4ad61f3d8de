//! Domain types for the supply-chain network, replenishment policies and
//! scenario configuration.
//!
//! A network is a tree of stocking facilities rooted at an untracked supply
//! node ([`Upstream::Source`]). Every facility follows a reorder-point /
//! base-stock policy; the decision vector of the optimizers is the pair
//! `(R_f, B_f)` for every facility, interleaved in network order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inventory quantities are whole units of product.
pub type Units = i64;

/// Identifier of a stocking facility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FacilityId(pub u32);

impl fmt::Display for FacilityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Replenishment source of a facility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Upstream {
    /// The supply node (plant or vendor); its inventory is not tracked.
    Source,
    Facility(FacilityId),
}

impl fmt::Display for Upstream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Upstream::Source => f.write_str("source"),
            Upstream::Facility(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum UpstreamRepr {
    Id(u32),
    Name(String),
}

impl Serialize for Upstream {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Upstream::Source => UpstreamRepr::Name("source".into()).serialize(serializer),
            Upstream::Facility(id) => UpstreamRepr::Id(id.0).serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Upstream {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match UpstreamRepr::deserialize(deserializer)? {
            UpstreamRepr::Id(id) => Ok(Upstream::Facility(FacilityId(id))),
            UpstreamRepr::Name(name) if name.eq_ignore_ascii_case("source") => Ok(Upstream::Source),
            UpstreamRepr::Name(name) => name
                .parse::<u32>()
                .map(|id| Upstream::Facility(FacilityId(id)))
                .map_err(|_| {
                    serde::de::Error::custom(format!(
                        "upstream must be \"source\" or a facility id, got {name:?}"
                    ))
                }),
        }
    }
}

/// Static description of one stocking facility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacilitySpec {
    pub id: FacilityId,
    pub upstream: Upstream,
    /// Minimum replenishment lead time in days.
    pub base_lead_time: u32,
    /// β service-level target, applied to customer demand only.
    pub target_beta: f64,
    pub serves_customers: bool,
}

/// Ordered collection of facilities. Order matters: it fixes the layout of
/// policy vectors and the within-day processing order of the simulator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub facilities: Vec<FacilitySpec>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum Violation {
    #[error("network has no facilities")]
    EmptyNetwork,
    #[error("facility {facility} is declared more than once")]
    DuplicateFacility { facility: FacilityId },
    #[error("facility {facility} names more than one upstream ({first} and {second})")]
    MultipleUpstreams {
        facility: FacilityId,
        first: Upstream,
        second: Upstream,
    },
    #[error("facility {facility} names unknown upstream {upstream}")]
    UnknownUpstream {
        facility: FacilityId,
        upstream: FacilityId,
    },
    #[error("upstream cycle through facilities {facilities:?}")]
    CycleDetected { facilities: Vec<FacilityId> },
    #[error("facility {facility} does not serve customers but has service target {target}")]
    TargetOnNoncustomerFacility { facility: FacilityId, target: f64 },
    #[error("facility {facility} has service target {target} outside [0, 1]")]
    TargetOutOfRange { facility: FacilityId, target: f64 },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::EmptyNetwork => "EMPTY_NETWORK",
            Violation::DuplicateFacility { .. } => "DUPLICATE_FACILITY",
            Violation::MultipleUpstreams { .. } => "MULTIPLE_UPSTREAMS",
            Violation::UnknownUpstream { .. } => "UNKNOWN_UPSTREAM",
            Violation::CycleDetected { .. } => "CYCLE_DETECTED",
            Violation::TargetOnNoncustomerFacility { .. } => "TARGET_ON_NONCUSTOMER_FACILITY",
            Violation::TargetOutOfRange { .. } => "TARGET_OUT_OF_RANGE",
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid network: {}", join_violations(.0))]
    InvalidNetwork(Vec<Violation>),
    #[error("non-finite policy coordinate at index {index}")]
    NonFiniteInput { index: usize },
    #[error("policy has {got} entries, network has {expected} facilities")]
    PolicyLength { expected: usize, got: usize },
    #[error("invalid policy for facility {facility}: reorder point {reorder_point}, base stock {base_stock}")]
    InvalidPolicy {
        facility: FacilityId,
        reorder_point: Units,
        base_stock: Units,
    },
    #[error("invalid bounds for facility {facility}: {reason}")]
    InvalidBounds { facility: FacilityId, reason: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid history for facility {facility}: {reason}")]
    InvalidHistory { facility: FacilityId, reason: String },
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks the single-upstream tree assumptions. Returns every violation
/// found, not just the first.
pub fn validate_network(spec: &NetworkSpec) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if spec.facilities.is_empty() {
        violations.push(Violation::EmptyNetwork);
        return Err(violations);
    }

    // First declaration wins; later declarations are reported.
    let mut upstream_of: HashMap<FacilityId, Upstream> = HashMap::new();
    let mut reported: HashSet<FacilityId> = HashSet::new();
    for facility in &spec.facilities {
        match upstream_of.get(&facility.id) {
            None => {
                upstream_of.insert(facility.id, facility.upstream);
            }
            Some(&first) if reported.insert(facility.id) => {
                if first == facility.upstream {
                    violations.push(Violation::DuplicateFacility { facility: facility.id });
                } else {
                    violations.push(Violation::MultipleUpstreams {
                        facility: facility.id,
                        first,
                        second: facility.upstream,
                    });
                }
            }
            Some(_) => {}
        }
    }

    for facility in &spec.facilities {
        if !(0.0..=1.0).contains(&facility.target_beta) {
            violations.push(Violation::TargetOutOfRange {
                facility: facility.id,
                target: facility.target_beta,
            });
        } else if !facility.serves_customers && facility.target_beta != 0.0 {
            violations.push(Violation::TargetOnNoncustomerFacility {
                facility: facility.id,
                target: facility.target_beta,
            });
        }
    }

    let mut unknown = false;
    for (&id, upstream) in sorted(&upstream_of) {
        if let Upstream::Facility(up) = upstream {
            if !upstream_of.contains_key(up) {
                unknown = true;
                violations.push(Violation::UnknownUpstream {
                    facility: id,
                    upstream: *up,
                });
            }
        }
    }

    // Walk every chain towards the source; a chain longer than the number of
    // facilities has revisited a node.
    if !unknown {
        let mut seen_cycles: HashSet<Vec<FacilityId>> = HashSet::new();
        for (&start, _) in sorted(&upstream_of) {
            let mut path: Vec<FacilityId> = vec![start];
            let mut current = start;
            while let Upstream::Facility(next) = upstream_of[&current] {
                if let Some(pos) = path.iter().position(|&p| p == next) {
                    let mut cycle = path[pos..].to_vec();
                    cycle.sort();
                    if seen_cycles.insert(cycle.clone()) {
                        violations.push(Violation::CycleDetected { facilities: cycle });
                    }
                    break;
                }
                path.push(next);
                current = next;
            }
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn sorted<V>(map: &HashMap<FacilityId, V>) -> BTreeMap<&FacilityId, &V> {
    map.iter().collect()
}

/// A validated network with resolved upstream indices.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    index: HashMap<FacilityId, usize>,
    upstream_index: Vec<Option<usize>>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self, ModelError> {
        validate_network(&spec).map_err(ModelError::InvalidNetwork)?;
        let index: HashMap<FacilityId, usize> = spec
            .facilities
            .iter()
            .enumerate()
            .map(|(i, f)| (f.id, i))
            .collect();
        let upstream_index = spec
            .facilities
            .iter()
            .map(|f| match f.upstream {
                Upstream::Source => None,
                Upstream::Facility(up) => Some(index[&up]),
            })
            .collect();
        Ok(Self {
            spec,
            index,
            upstream_index,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn facilities(&self) -> &[FacilitySpec] {
        &self.spec.facilities
    }

    pub fn len(&self) -> usize {
        self.spec.facilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.facilities.is_empty()
    }

    pub fn index_of(&self, id: FacilityId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Index of the replenishing facility, `None` for the source.
    pub fn upstream_index(&self, facility: usize) -> Option<usize> {
        self.upstream_index[facility]
    }
}

/// Reorder point and base stock of one facility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacilityPolicy {
    pub reorder_point: Units,
    pub base_stock: Units,
}

/// Decision variables, one entry per facility in network order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyVector {
    entries: Vec<FacilityPolicy>,
}

impl PolicyVector {
    pub fn new(entries: Vec<FacilityPolicy>) -> Result<Self, ModelError> {
        for (i, p) in entries.iter().enumerate() {
            if p.reorder_point < 0 || p.base_stock < p.reorder_point {
                return Err(ModelError::InvalidPolicy {
                    facility: FacilityId(i as u32),
                    reorder_point: p.reorder_point,
                    base_stock: p.base_stock,
                });
            }
        }
        Ok(Self { entries })
    }

    /// Like [`PolicyVector::new`] but reports violations with real facility ids.
    pub fn for_network(network: &Network, entries: Vec<FacilityPolicy>) -> Result<Self, ModelError> {
        if entries.len() != network.len() {
            return Err(ModelError::PolicyLength {
                expected: network.len(),
                got: entries.len(),
            });
        }
        for (spec, p) in network.facilities().iter().zip(&entries) {
            if p.reorder_point < 0 || p.base_stock < p.reorder_point {
                return Err(ModelError::InvalidPolicy {
                    facility: spec.id,
                    reorder_point: p.reorder_point,
                    base_stock: p.base_stock,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[FacilityPolicy] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Flattened `[R_0, B_0, R_1, B_1, ...]`.
    pub fn to_point(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|p| [p.reorder_point as f64, p.base_stock as f64])
            .collect()
    }
}

/// Closed integer interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitRange {
    pub lower: Units,
    pub upper: Units,
}

impl UnitRange {
    pub fn new(lower: Units, upper: Units) -> Self {
        Self { lower, upper }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacilityBounds {
    pub reorder_point: UnitRange,
    pub base_stock: UnitRange,
}

/// Box bounds of the policy search, one entry per facility.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyBounds {
    entries: Vec<FacilityBounds>,
}

impl PolicyBounds {
    /// Requires `0 <= lower < upper` on every coordinate and a reorder-point
    /// upper bound no larger than the base-stock upper bound, so that the
    /// `B >= R` repair never leaves the box.
    pub fn new(entries: Vec<FacilityBounds>) -> Result<Self, ModelError> {
        for (i, b) in entries.iter().enumerate() {
            let facility = FacilityId(i as u32);
            for (name, r) in [("reorder_point", b.reorder_point), ("base_stock", b.base_stock)] {
                if r.lower < 0 || r.lower >= r.upper {
                    return Err(ModelError::InvalidBounds {
                        facility,
                        reason: format!("{name} bounds [{}, {}] need 0 <= lower < upper", r.lower, r.upper),
                    });
                }
            }
            if b.reorder_point.upper > b.base_stock.upper {
                return Err(ModelError::InvalidBounds {
                    facility,
                    reason: format!(
                        "reorder_point upper {} exceeds base_stock upper {}",
                        b.reorder_point.upper, b.base_stock.upper
                    ),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[FacilityBounds] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|b| [b.reorder_point.lower as f64, b.base_stock.lower as f64])
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|b| [b.reorder_point.upper as f64, b.base_stock.upper as f64])
            .collect()
    }
}

/// Maps a continuous optimizer proposal `[R_0, B_0, R_1, B_1, ...]` onto an
/// integer policy: clamp to the box, round half away from zero, then raise
/// `B` to `R` where needed.
pub fn repair_policy(raw: &[f64], bounds: &PolicyBounds) -> Result<PolicyVector, ModelError> {
    if raw.len() != 2 * bounds.len() {
        return Err(ModelError::PolicyLength {
            expected: bounds.len(),
            got: raw.len() / 2,
        });
    }
    if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput { index });
    }
    let snap = |v: f64, r: UnitRange| v.clamp(r.lower as f64, r.upper as f64).round() as Units;
    let entries = raw
        .chunks_exact(2)
        .zip(bounds.entries())
        .map(|(pair, b)| {
            let reorder_point = snap(pair[0], b.reorder_point);
            let base_stock = snap(pair[1], b.base_stock).max(reorder_point);
            FacilityPolicy {
                reorder_point,
                base_stock,
            }
        })
        .collect();
    Ok(PolicyVector { entries })
}

/// How unmet customer demand is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandChoice {
    Backorder,
    LostSales,
}

impl DemandChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            DemandChoice::Backorder => "backorder",
            DemandChoice::LostSales => "lost-sales",
        }
    }
}

impl fmt::Display for DemandChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DemandChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "backorder" | "back-order" => Ok(DemandChoice::Backorder),
            "lost-sales" | "lostsales" => Ok(DemandChoice::LostSales),
            other => Err(format!("unknown demand choice {other:?} (expected backorder or lost-sales)")),
        }
    }
}

/// Simulation and objective settings shared by every evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Horizon `H` in days.
    pub horizon: u32,
    /// Replications `N` averaged by the objective.
    pub replications: u32,
    /// Service-violation penalty `rho`.
    pub penalty: f64,
    pub choice: DemandChoice,
    pub initial_inventory_fraction: f64,
    pub base_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            horizon: 360,
            replications: 20,
            penalty: 1e6,
            choice: DemandChoice::Backorder,
            initial_inventory_fraction: 0.9,
            base_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.horizon == 0 {
            return Err(ModelError::InvalidScenario("horizon must be at least 1 day".into()));
        }
        if self.replications == 0 {
            return Err(ModelError::InvalidScenario("replications must be at least 1".into()));
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(ModelError::InvalidScenario(format!(
                "penalty must be finite and nonnegative, got {}",
                self.penalty
            )));
        }
        if !(0.0..=1.0).contains(&self.initial_inventory_fraction) {
            return Err(ModelError::InvalidScenario(format!(
                "initial_inventory_fraction must lie in [0, 1], got {}",
                self.initial_inventory_fraction
            )));
        }
        Ok(())
    }
}

/// Empirical samples of one facility.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacilityHistory {
    /// Daily customer demand; empty for facilities without customers.
    pub demand: Vec<Units>,
    /// Random addition to the base lead time, in days.
    pub lead_delta: Vec<Units>,
}

/// Historical samples that the simulator bootstraps from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HistoryDataset {
    pub facilities: BTreeMap<FacilityId, FacilityHistory>,
}

impl HistoryDataset {
    pub fn get(&self, id: FacilityId) -> Option<&FacilityHistory> {
        self.facilities.get(&id)
    }

    /// Checks that every facility of `network` has the samples it needs and
    /// that all samples are nonnegative.
    pub fn validate_for(&self, network: &Network) -> Result<(), ModelError> {
        for spec in network.facilities() {
            let invalid = |reason: &str| ModelError::InvalidHistory {
                facility: spec.id,
                reason: reason.to_string(),
            };
            let hist = self.get(spec.id).ok_or_else(|| invalid("no samples"))?;
            if hist.lead_delta.is_empty() {
                return Err(invalid("empty lead-time delta samples"));
            }
            if spec.serves_customers && hist.demand.is_empty() {
                return Err(invalid("empty demand samples"));
            }
            if hist.lead_delta.iter().chain(&hist.demand).any(|&v| v < 0) {
                return Err(invalid("negative sample"));
            }
        }
        Ok(())
    }
}
