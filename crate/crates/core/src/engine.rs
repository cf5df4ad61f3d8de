//! Daily-tick discrete-event simulator of a multi-echelon network.
//!
//! Each facility runs four processes: order placement, replenishment
//! fulfillment, delivery and customer service. Within a day they execute in a
//! fixed order for all facilities:
//!
//! 1. shipments due today are delivered,
//! 2. customer demand is served,
//! 3. downstream replenishment orders are fulfilled (FIFO, head-of-line
//!    blocking, never partially shipped),
//! 4. replenishment orders are placed.
//!
//! Serving customers before fulfilling replenishments encodes the customer
//! priority rule. The on-hand level recorded for day `t` is the level after
//! all four steps.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    DemandChoice, FacilityId, FacilityPolicy, HistoryDataset, ModelError, Network, PolicyVector,
    ScenarioConfig, Units,
};
use crate::sampling::{Bootstrap, SamplingError, StreamKey, StreamPurpose};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An order waiting in the queue of the supplying facility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ReplenishmentOrder {
    /// Network-wide sequence number, in placement order.
    pub id: u64,
    pub quantity: Units,
    pub requester: FacilityId,
    pub day_placed: u32,
}

/// Replenishment in transit ("conveyor belt").
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PendingShipment {
    pub order_id: u64,
    pub quantity: Units,
    pub destination: FacilityId,
    pub arrival_day: u32,
}

#[derive(Clone, Debug)]
struct QueuedOrder {
    order: ReplenishmentOrder,
    remaining: Units,
    started: bool,
}

/// Mutable state of one facility. Inventory position moves with on-hand
/// stock on every customer shipment and reservation, and rises by the order
/// quantity when an order is placed, so `inv_position = on_hand + on_order`
/// where `on_order` counts placed but not yet delivered units.
#[derive(Clone, Debug, Default)]
pub struct FacilityState {
    pub on_hand: Units,
    pub inv_position: Units,
    pub backorders: Units,
    /// `M_f`: customer demand observed.
    pub total_demand: Units,
    /// `P_f`: units shipped to customers.
    pub total_shipped: Units,
    /// `T_f`: late (back-ordered) demand.
    pub total_late: Units,
    pub on_hand_sum: Units,
    /// Units received from deliveries.
    pub delivered: Units,
    /// Units removed from on-hand for downstream orders, including partial
    /// reservations of a blocked head order.
    pub reserved_for_downstream: Units,
    queue: VecDeque<QueuedOrder>,
}

impl FacilityState {
    pub fn new(initial_on_hand: Units) -> Self {
        Self {
            on_hand: initial_on_hand,
            inv_position: initial_on_hand,
            ..Default::default()
        }
    }

    /// Order-placement rule: when the inventory position is at or below the
    /// reorder point, order `B - O`. Nonpositive quantities are skipped.
    /// Returns the ordered quantity.
    pub fn place_order(&mut self, policy: FacilityPolicy) -> Option<Units> {
        if self.inv_position > policy.reorder_point {
            return None;
        }
        let quantity = policy.base_stock - self.on_hand;
        if quantity <= 0 {
            return None;
        }
        self.inv_position += quantity;
        Some(quantity)
    }

    /// Serves one day of customer demand and returns the shipped quantity.
    pub fn serve_customer(&mut self, demand: Units, choice: DemandChoice) -> Units {
        self.total_demand += demand;
        let shipped = match choice {
            DemandChoice::LostSales => demand.min(self.on_hand),
            DemandChoice::Backorder => {
                let shipped = (demand + self.backorders).min(self.on_hand);
                let late = demand - shipped;
                self.backorders += late;
                self.total_late += late.max(0);
                shipped
            }
        };
        self.total_shipped += shipped;
        self.on_hand -= shipped;
        self.inv_position -= shipped;
        shipped
    }

    pub fn enqueue(&mut self, order: ReplenishmentOrder) {
        self.queue.push_back(QueuedOrder {
            order,
            remaining: order.quantity,
            started: false,
        });
    }

    /// Queued orders in FIFO order with their still-unreserved quantity.
    pub fn queued(&self) -> impl Iterator<Item = (ReplenishmentOrder, Units)> + '_ {
        self.queue.iter().map(|q| (q.order, q.remaining))
    }

    /// Works the order queue front to back. The head order takes
    /// `min(o, O)` on first sight; if that leaves a remainder `r`, the order
    /// blocks the queue until `O >= r` on a later visit, when `r` is taken in
    /// one piece. Returns the orders that became fully reserved, in FIFO
    /// order, together with what was reserved today for each order touched.
    pub fn fulfill_orders(&mut self) -> (Vec<ReplenishmentOrder>, Vec<(u64, Units)>) {
        let mut completed = Vec::new();
        let mut reservations = Vec::new();
        while let Some(head) = self.queue.front_mut() {
            let take = if !head.started {
                head.started = true;
                head.remaining.min(self.on_hand)
            } else if self.on_hand >= head.remaining {
                head.remaining
            } else {
                0
            };
            if take > 0 {
                head.remaining -= take;
                self.on_hand -= take;
                self.inv_position -= take;
                self.reserved_for_downstream += take;
                reservations.push((head.order.id, take));
            }
            if head.remaining > 0 {
                break;
            }
            completed.push(head.order);
            self.queue.pop_front();
        }
        (completed, reservations)
    }

    pub fn receive(&mut self, quantity: Units) {
        self.on_hand += quantity;
        self.delivered += quantity;
    }
}

/// Per-facility result of one replication.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FacilityOutcome {
    pub id: FacilityId,
    /// `A_f`: time-averaged on-hand inventory.
    pub avg_on_hand: f64,
    /// `β_f`; 1 when the facility saw no customer demand.
    pub beta: f64,
    pub total_demand: Units,
    pub total_shipped: Units,
    pub total_late: Units,
    pub initial_on_hand: Units,
    pub final_on_hand: Units,
    pub final_inv_position: Units,
    pub final_backorders: Units,
    pub delivered: Units,
    pub reserved_for_downstream: Units,
    /// Units placed on order but not yet delivered at the end of the horizon.
    pub on_order: Units,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRow {
    pub day: u32,
    pub facility: FacilityId,
    pub on_hand: Units,
    pub inv_position: Units,
    pub backorders: Units,
    pub demand: Units,
    pub shipped: Units,
}

/// Event log entries, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SimEvent {
    Delivered {
        day: u32,
        facility: FacilityId,
        order_id: u64,
        quantity: Units,
    },
    CustomerServed {
        day: u32,
        facility: FacilityId,
        demand: Units,
        shipped: Units,
    },
    Reserved {
        day: u32,
        facility: FacilityId,
        order_id: u64,
        quantity: Units,
    },
    Shipped {
        day: u32,
        /// `None` when shipped by the source.
        from: Option<FacilityId>,
        shipment: PendingShipment,
    },
    OrderPlaced {
        day: u32,
        facility: FacilityId,
        /// `None` when ordering from the source.
        supplier: Option<FacilityId>,
        order: ReplenishmentOrder,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationOutcome {
    pub replication: u32,
    pub facilities: Vec<FacilityOutcome>,
    pub trace: Option<Vec<TraceRow>>,
    pub events: Option<Vec<SimEvent>>,
}

impl SimulationOutcome {
    pub fn facility(&self, id: FacilityId) -> Option<&FacilityOutcome> {
        self.facilities.iter().find(|f| f.id == id)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub record_trace: bool,
    pub record_events: bool,
}

/// β from the end-of-horizon counters.
pub fn beta(choice: DemandChoice, total_demand: Units, total_shipped: Units, total_late: Units) -> f64 {
    if total_demand == 0 {
        return 1.0;
    }
    let m = total_demand as f64;
    match choice {
        DemandChoice::LostSales => total_shipped as f64 / m,
        DemandChoice::Backorder => 1.0 - total_late as f64 / m,
    }
}

/// Initial on-hand stock: the configured fraction of base stock, rounded.
pub fn initial_on_hand(base_stock: Units, fraction: f64) -> Units {
    (fraction * base_stock as f64).round() as Units
}

/// Runs one replication without trace or event recording.
pub fn sim_network(
    network: &Network,
    policy: &PolicyVector,
    history: &HistoryDataset,
    config: &ScenarioConfig,
    replication: u32,
) -> Result<SimulationOutcome, SimError> {
    simulate(network, policy, history, config, replication, SimOptions::default())
}

pub fn simulate(
    network: &Network,
    policy: &PolicyVector,
    history: &HistoryDataset,
    config: &ScenarioConfig,
    replication: u32,
    options: SimOptions,
) -> Result<SimulationOutcome, SimError> {
    config.validate()?;
    if policy.len() != network.len() {
        return Err(ModelError::PolicyLength {
            expected: network.len(),
            got: policy.len(),
        }
        .into());
    }
    Simulation::new(network, policy, history, config, replication, options)?.run()
}

struct Simulation<'a> {
    network: &'a Network,
    policy: &'a [FacilityPolicy],
    choice: DemandChoice,
    horizon: u32,
    replication: u32,
    options: SimOptions,
    states: Vec<FacilityState>,
    initial: Vec<Units>,
    demand: Vec<Option<Bootstrap<'a>>>,
    lead: Vec<Bootstrap<'a>>,
    /// Shipments bucketed by arrival day; later arrivals never land.
    arrivals: Vec<Vec<(usize, PendingShipment)>>,
    next_order_id: u64,
    trace: Vec<TraceRow>,
    events: Vec<SimEvent>,
    day_demand: Vec<Units>,
    day_shipped: Vec<Units>,
}

impl<'a> Simulation<'a> {
    fn new(
        network: &'a Network,
        policy: &'a PolicyVector,
        history: &'a HistoryDataset,
        config: &ScenarioConfig,
        replication: u32,
        options: SimOptions,
    ) -> Result<Self, SimError> {
        let mut demand = Vec::with_capacity(network.len());
        let mut lead = Vec::with_capacity(network.len());
        for spec in network.facilities() {
            let key = |purpose| StreamKey::new(config.base_seed, replication, spec.id, purpose);
            let empty = &[][..];
            let hist = history.get(spec.id);
            let lead_samples = hist.map_or(empty, |h| h.lead_delta.as_slice());
            lead.push(Bootstrap::new(lead_samples, key(StreamPurpose::Lead))?);
            demand.push(if spec.serves_customers {
                let samples = hist.map_or(empty, |h| h.demand.as_slice());
                Some(Bootstrap::new(samples, key(StreamPurpose::Demand))?)
            } else {
                None
            });
        }
        let initial: Vec<Units> = policy
            .entries()
            .iter()
            .map(|p| initial_on_hand(p.base_stock, config.initial_inventory_fraction))
            .collect();
        let n = network.len();
        Ok(Self {
            network,
            policy: policy.entries(),
            choice: config.choice,
            horizon: config.horizon,
            replication,
            options,
            states: initial.iter().map(|&o| FacilityState::new(o)).collect(),
            initial,
            demand,
            lead,
            arrivals: vec![Vec::new(); config.horizon as usize],
            next_order_id: 0,
            trace: Vec::new(),
            events: Vec::new(),
            day_demand: vec![0; n],
            day_shipped: vec![0; n],
        })
    }

    fn id(&self, facility: usize) -> FacilityId {
        self.network.facilities()[facility].id
    }

    fn log(&mut self, event: SimEvent) {
        if self.options.record_events {
            self.events.push(event);
        }
    }

    /// Bootstraps the lead time of `destination` and puts the shipment on the
    /// belt; zero lead time delivers immediately.
    fn ship(&mut self, day: u32, from: Option<usize>, destination: usize, order: ReplenishmentOrder) {
        let base = self.network.facilities()[destination].base_lead_time as i64;
        let lead = (base + self.lead[destination].draw()) as u32;
        let shipment = PendingShipment {
            order_id: order.id,
            quantity: order.quantity,
            destination: self.id(destination),
            arrival_day: day + lead,
        };
        let from_id = from.map(|f| self.id(f));
        self.log(SimEvent::Shipped {
            day,
            from: from_id,
            shipment,
        });
        if lead == 0 {
            self.deliver(day, destination, shipment);
        } else if let Some(bucket) = self.arrivals.get_mut(shipment.arrival_day as usize) {
            bucket.push((destination, shipment));
        }
    }

    fn deliver(&mut self, day: u32, destination: usize, shipment: PendingShipment) {
        self.states[destination].receive(shipment.quantity);
        self.log(SimEvent::Delivered {
            day,
            facility: shipment.destination,
            order_id: shipment.order_id,
            quantity: shipment.quantity,
        });
    }

    fn run(mut self) -> Result<SimulationOutcome, SimError> {
        let n = self.network.len();
        for day in 0..self.horizon {
            for (destination, shipment) in std::mem::take(&mut self.arrivals[day as usize]) {
                self.deliver(day, destination, shipment);
            }

            self.day_demand.iter_mut().for_each(|d| *d = 0);
            self.day_shipped.iter_mut().for_each(|d| *d = 0);
            for f in 0..n {
                if let Some(stream) = self.demand[f].as_mut() {
                    let demand = stream.draw();
                    let shipped = self.states[f].serve_customer(demand, self.choice);
                    self.day_demand[f] = demand;
                    self.day_shipped[f] = shipped;
                    let facility = self.id(f);
                    self.log(SimEvent::CustomerServed {
                        day,
                        facility,
                        demand,
                        shipped,
                    });
                }
            }

            for f in 0..n {
                let (completed, reservations) = self.states[f].fulfill_orders();
                if self.options.record_events {
                    let facility = self.id(f);
                    for (order_id, quantity) in reservations {
                        self.log(SimEvent::Reserved {
                            day,
                            facility,
                            order_id,
                            quantity,
                        });
                    }
                }
                for order in completed {
                    let requester = self
                        .network
                        .index_of(order.requester)
                        .expect("requester belongs to the network");
                    self.ship(day, Some(f), requester, order);
                }
            }

            for f in 0..n {
                let Some(quantity) = self.states[f].place_order(self.policy[f]) else {
                    continue;
                };
                let order = ReplenishmentOrder {
                    id: self.next_order_id,
                    quantity,
                    requester: self.id(f),
                    day_placed: day,
                };
                self.next_order_id += 1;
                let supplier = self.network.upstream_index(f);
                let facility = self.id(f);
                self.log(SimEvent::OrderPlaced {
                    day,
                    facility,
                    supplier: supplier.map(|s| self.id(s)),
                    order,
                });
                match supplier {
                    Some(s) => self.states[s].enqueue(order),
                    None => self.ship(day, None, f, order),
                }
            }

            for f in 0..n {
                let state = &mut self.states[f];
                state.on_hand_sum += state.on_hand;
            }
            if self.options.record_trace {
                for f in 0..n {
                    let s = &self.states[f];
                    self.trace.push(TraceRow {
                        day,
                        facility: self.network.facilities()[f].id,
                        on_hand: s.on_hand,
                        inv_position: s.inv_position,
                        backorders: s.backorders,
                        demand: self.day_demand[f],
                        shipped: self.day_shipped[f],
                    });
                }
            }
        }

        let horizon = self.horizon as f64;
        let choice = self.choice;
        let facilities = self
            .states
            .iter()
            .enumerate()
            .map(|(f, s)| FacilityOutcome {
                id: self.network.facilities()[f].id,
                avg_on_hand: s.on_hand_sum as f64 / horizon,
                beta: beta(choice, s.total_demand, s.total_shipped, s.total_late),
                total_demand: s.total_demand,
                total_shipped: s.total_shipped,
                total_late: s.total_late,
                initial_on_hand: self.initial[f],
                final_on_hand: s.on_hand,
                final_inv_position: s.inv_position,
                final_backorders: s.backorders,
                delivered: s.delivered,
                reserved_for_downstream: s.reserved_for_downstream,
                on_order: s.inv_position - s.on_hand,
            })
            .collect();
        Ok(SimulationOutcome {
            replication: self.replication,
            facilities,
            trace: self.options.record_trace.then_some(self.trace),
            events: self.options.record_events.then_some(self.events),
        })
    }
}

/// Checks a recorded replication against the engine's ordering rules and
/// returns a description of every breach found:
///
/// * an order ships whole, once, after it was reserved in full;
/// * each supplier reserves and ships its orders in placement order, and
///   starts on an order only once every earlier order is fully reserved;
/// * customers of a facility are served before its downstream orders on
///   the same day;
/// * stock never goes negative and the end-of-horizon balances close.
///
/// Needs both the trace and the event log.
pub fn audit(network: &Network, choice: DemandChoice, outcome: &SimulationOutcome) -> Vec<String> {
    use std::collections::HashMap;

    let mut breaches = Vec::new();
    let (Some(events), Some(trace)) = (&outcome.events, &outcome.trace) else {
        return vec!["outcome lacks trace or event log".into()];
    };

    struct OrderLog {
        requester: FacilityId,
        quantity: Units,
        supplier: Option<FacilityId>,
        placed: u32,
        reserved: Units,
        shipped: Option<u32>,
        delivered: Option<u32>,
    }
    let mut orders: HashMap<u64, OrderLog> = HashMap::new();
    let mut last_reserved: HashMap<FacilityId, u64> = HashMap::new();
    let mut last_shipped: HashMap<FacilityId, u64> = HashMap::new();
    let mut reservations_today: HashMap<FacilityId, u32> = HashMap::new();
    let mut customer_shipped: HashMap<FacilityId, Units> = HashMap::new();

    for event in events {
        match *event {
            SimEvent::OrderPlaced {
                day,
                facility,
                supplier,
                order,
            } => {
                if order.quantity <= 0 {
                    breaches.push(format!("order {} placed with quantity {}", order.id, order.quantity));
                }
                orders.insert(
                    order.id,
                    OrderLog {
                        requester: facility,
                        quantity: order.quantity,
                        supplier,
                        placed: day,
                        reserved: 0,
                        shipped: None,
                        delivered: None,
                    },
                );
            }
            SimEvent::CustomerServed {
                day,
                facility,
                shipped,
                ..
            } => {
                if reservations_today.get(&facility) == Some(&day) {
                    breaches.push(format!("facility {facility} reserved for downstream before serving customers on day {day}"));
                }
                *customer_shipped.entry(facility).or_default() += shipped;
            }
            SimEvent::Reserved {
                day,
                facility,
                order_id,
                quantity,
            } => {
                reservations_today.insert(facility, day);
                if let Some(&prev) = last_reserved.get(&facility) {
                    if order_id < prev {
                        breaches.push(format!("facility {facility} reserved order {order_id} after order {prev}"));
                    }
                    if order_id > prev && orders.get(&prev).is_some_and(|o| o.reserved < o.quantity) {
                        breaches.push(format!(
                            "facility {facility} started order {order_id} while order {prev} was incomplete"
                        ));
                    }
                }
                last_reserved.insert(facility, order_id);
                match orders.get_mut(&order_id) {
                    Some(o) => {
                        o.reserved += quantity;
                        if o.reserved > o.quantity {
                            breaches.push(format!("order {order_id} over-reserved"));
                        }
                        if o.supplier != Some(facility) {
                            breaches.push(format!("order {order_id} reserved by facility {facility}, not its supplier"));
                        }
                    }
                    None => breaches.push(format!("reservation for unknown order {order_id}")),
                }
            }
            SimEvent::Shipped { day, from, shipment } => {
                let id = shipment.order_id;
                let Some(o) = orders.get_mut(&id) else {
                    breaches.push(format!("shipment of unknown order {id}"));
                    continue;
                };
                if o.shipped.replace(day).is_some() {
                    breaches.push(format!("order {id} shipped twice"));
                }
                if shipment.quantity != o.quantity {
                    breaches.push(format!("order {id} shipped {} of {}", shipment.quantity, o.quantity));
                }
                if from != o.supplier {
                    breaches.push(format!("order {id} shipped by the wrong supplier"));
                }
                if let Some(f) = from {
                    if o.reserved != o.quantity {
                        breaches.push(format!("order {id} shipped with {} of {} reserved", o.reserved, o.quantity));
                    }
                    if day <= o.placed {
                        breaches.push(format!("internal order {id} shipped on its placement day"));
                    }
                    if let Some(&prev) = last_shipped.get(&f) {
                        if id < prev {
                            breaches.push(format!("facility {f} shipped order {id} after order {prev}"));
                        }
                    }
                    last_shipped.insert(f, id);
                }
            }
            SimEvent::Delivered {
                day,
                order_id,
                quantity,
                ..
            } => match orders.get_mut(&order_id) {
                Some(o) => {
                    if o.delivered.replace(day).is_some() {
                        breaches.push(format!("order {order_id} delivered twice"));
                    }
                    if quantity != o.quantity {
                        breaches.push(format!("order {order_id} delivered {quantity} of {}", o.quantity));
                    }
                    if o.shipped.is_none_or(|s| day < s) {
                        breaches.push(format!("order {order_id} delivered before shipping"));
                    }
                }
                None => breaches.push(format!("delivery of unknown order {order_id}")),
            },
        }
    }

    for row in trace {
        if row.on_hand < 0 || row.backorders < 0 {
            breaches.push(format!("facility {} negative stock on day {}", row.facility, row.day));
        }
        if choice == DemandChoice::LostSales && row.backorders != 0 {
            breaches.push(format!("facility {} carries backorders under lost sales", row.facility));
        }
    }

    for (spec, f) in network.facilities().iter().zip(&outcome.facilities) {
        let served = customer_shipped.get(&spec.id).copied().unwrap_or(0);
        if f.final_on_hand != f.initial_on_hand + f.delivered - served - f.reserved_for_downstream {
            breaches.push(format!("facility {} stock balance does not close", spec.id));
        }
        let outstanding: Units = orders
            .values()
            .filter(|o| o.requester == spec.id && o.delivered.is_none())
            .map(|o| o.quantity)
            .sum();
        if f.final_inv_position != f.final_on_hand + outstanding {
            breaches.push(format!("facility {} inventory position differs from on hand plus on order", spec.id));
        }
        if !(0.0..=1.0).contains(&f.beta) {
            breaches.push(format!("facility {} beta {} outside [0, 1]", spec.id, f.beta));
        }
    }
    breaches
}
