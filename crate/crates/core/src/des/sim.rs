use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sample_poisson_interarrival, LeadSampler, Regime, SimConfig, SimError, SimStats};
use crate::kb::Time;

const DEMAND_STREAM: u64 = 0;
const LEAD_STREAM: u64 = 1;

/// Non-crossing lead-time adjustment for an order whose lead is decided at
/// `t_n`. Returns `(effective_delivery, adjusted_lead)`.
///
/// A drawn lead that would deliver before the previous order is stretched so
/// that both arrive at `prev_delivery`.
pub fn adjust_exogenous(prev_delivery: Time, t_n: Time, drawn: f64) -> Result<(Time, f64), SimError> {
    if t_n < 0.0 || drawn < 0.0 || !t_n.is_finite() || !drawn.is_finite() {
        return Err(SimError::InvalidInput(format!("t_n={t_n}, drawn={drawn}")));
    }
    let nominal = t_n + drawn;
    if nominal >= prev_delivery {
        return Ok((nominal, drawn));
    }
    if prev_delivery < t_n {
        return Err(SimError::NegativeAdjustment {
            prev: prev_delivery,
            placed: t_n,
        });
    }
    Ok((prev_delivery, prev_delivery - t_n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateOrder {
    pub seq: u64,
    pub placed_at: Time,
    /// When the lead time was fixed: the next review epoch for the exogenous
    /// regime, the placement time otherwise.
    pub decided_at: Time,
    /// Gamma draw (exogenous lead or endogenous service time).
    pub drawn_lead: f64,
    pub effective_delivery: Time,
}

impl UpdateOrder {
    pub fn realized_lead(&self) -> f64 {
        self.effective_delivery - self.placed_at
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub stats: SimStats,
    /// Every order whose lead was decided before the horizon, in `seq` order.
    pub orders: Vec<UpdateOrder>,
    /// Epochs at which on hand + on order differed from the base stock.
    pub position_violations: u64,
}

impl SimOutput {
    /// Count of consecutive orders delivered out of placement order.
    pub fn crossings(&self) -> usize {
        self.orders
            .windows(2)
            .filter(|w| w[1].effective_delivery < w[0].effective_delivery)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Delivery,
    Review,
    Demand,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: Time,
    kind: Kind,
    /// Order seq for deliveries so equal-time deliveries stay FIFO.
    tie: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.cmp(&self.kind))
            .then_with(|| other.tie.cmp(&self.tie))
    }
}

#[derive(Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }
}

struct Simulator<'a> {
    cfg: &'a SimConfig,
    demand_rng: ChaCha8Rng,
    lead_rng: ChaCha8Rng,
    leads: LeadSampler,
    events: BinaryHeap<Event>,
    now: Time,
    on_hand: u64,
    on_order: u64,
    orders: Vec<UpdateOrder>,
    /// Exogenous orders waiting for the next review epoch.
    dormant: Vec<u64>,
    review_pending: bool,
    last_delivery: Time,
    server_free_at: Time,
    on_hand_area: f64,
    position_area: f64,
    served: u64,
    lost: u64,
    delivered: u64,
    service: Welford,
    position_violations: u64,
}

impl<'a> Simulator<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self, SimError> {
        let mut demand_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        demand_rng.set_stream(DEMAND_STREAM);
        let mut lead_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        lead_rng.set_stream(LEAD_STREAM);
        Ok(Self {
            cfg,
            demand_rng,
            lead_rng,
            leads: LeadSampler::new(&cfg.lead)?,
            events: BinaryHeap::new(),
            now: 0.0,
            on_hand: u64::from(cfg.base_stock),
            on_order: 0,
            orders: Vec::new(),
            dormant: Vec::new(),
            review_pending: false,
            last_delivery: 0.0,
            server_free_at: 0.0,
            on_hand_area: 0.0,
            position_area: 0.0,
            served: 0,
            lost: 0,
            delivered: 0,
            service: Welford::default(),
            position_violations: 0,
        })
    }

    fn advance(&mut self, to: Time) {
        let from = self.now.max(self.cfg.warmup);
        let until = to.min(self.cfg.horizon);
        if until > from {
            let dt = until - from;
            self.on_hand_area += self.on_hand as f64 * dt;
            self.position_area += (self.on_hand + self.on_order) as f64 * dt;
        }
        self.now = to;
    }

    fn schedule_demand(&mut self) -> Result<(), SimError> {
        if self.cfg.demand_rate > 0.0 {
            let gap = sample_poisson_interarrival(self.cfg.demand_rate, &mut self.demand_rng)?;
            self.events.push(Event {
                time: self.now + gap,
                kind: Kind::Demand,
                tie: 0,
            });
        }
        Ok(())
    }

    fn schedule_delivery(&mut self, seq: u64, decided_at: Time, drawn: f64, delivery: Time) {
        let order = &mut self.orders[seq as usize];
        order.decided_at = decided_at;
        order.drawn_lead = drawn;
        order.effective_delivery = delivery;
        self.events.push(Event {
            time: delivery,
            kind: Kind::Delivery,
            tie: seq,
        });
    }

    fn place_order(&mut self) -> Result<(), SimError> {
        let seq = self.orders.len() as u64;
        let placed_at = self.now;
        self.orders.push(UpdateOrder {
            seq,
            placed_at,
            decided_at: f64::NAN,
            drawn_lead: f64::NAN,
            effective_delivery: f64::NAN,
        });
        self.on_order += 1;
        match self.cfg.regime {
            Regime::ExogenousIid => {
                let drawn = self.leads.sample(&mut self.lead_rng);
                self.schedule_delivery(seq, placed_at, drawn, placed_at + drawn);
            }
            Regime::Endogenous => {
                let service = self.leads.sample(&mut self.lead_rng);
                let completion = placed_at.max(self.server_free_at) + service;
                self.server_free_at = completion;
                self.schedule_delivery(seq, placed_at, service, completion);
            }
            Regime::Exogenous => {
                self.dormant.push(seq);
                if !self.review_pending {
                    let period = self.cfg.review_period;
                    let epoch = ((placed_at / period).floor() + 1.0) * period;
                    self.events.push(Event {
                        time: epoch,
                        kind: Kind::Review,
                        tie: 0,
                    });
                    self.review_pending = true;
                }
            }
        }
        Ok(())
    }

    fn review(&mut self) -> Result<(), SimError> {
        self.review_pending = false;
        let epoch = self.now;
        for seq in std::mem::take(&mut self.dormant) {
            let drawn = self.leads.sample(&mut self.lead_rng);
            let (delivery, _) = adjust_exogenous(self.last_delivery, epoch, drawn)?;
            self.last_delivery = delivery;
            self.schedule_delivery(seq, epoch, drawn, delivery);
        }
        Ok(())
    }

    fn demand(&mut self) -> Result<(), SimError> {
        let counted = self.now >= self.cfg.warmup;
        if self.on_hand > 0 {
            self.on_hand -= 1;
            if counted {
                self.served += 1;
            }
            // Position fell to S − 1: reorder one unit.
            self.place_order()?;
        } else if counted {
            self.lost += 1;
        }
        self.schedule_demand()
    }

    fn deliver(&mut self, seq: u64) {
        self.on_hand += 1;
        self.on_order -= 1;
        if self.now >= self.cfg.warmup {
            self.delivered += 1;
        }
        let order = &self.orders[seq as usize];
        if order.placed_at >= self.cfg.warmup {
            let lead = order.realized_lead();
            self.service.push(lead);
        }
    }

    fn run(mut self) -> Result<SimOutput, SimError> {
        self.schedule_demand()?;
        let base = u64::from(self.cfg.base_stock);
        while let Some(event) = self.events.pop() {
            if event.time > self.cfg.horizon {
                break;
            }
            self.advance(event.time);
            match event.kind {
                Kind::Delivery => self.deliver(event.tie),
                Kind::Review => self.review()?,
                Kind::Demand => self.demand()?,
            }
            if self.on_hand + self.on_order != base {
                self.position_violations += 1;
            }
        }
        self.advance(self.cfg.horizon);

        let span = self.cfg.horizon - self.cfg.warmup;
        let demands = self.served + self.lost;
        let c = self.cfg.costs;
        let cost = c.holding * self.on_hand_area
            + c.lost_penalty * self.lost as f64
            + c.processing * self.delivered as f64;
        let stats = SimStats {
            fill_rate: if demands == 0 {
                1.0
            } else {
                self.served as f64 / demands as f64
            },
            avg_on_hand: self.on_hand_area / span,
            avg_position: self.position_area / span,
            long_run_avg_cost: cost / span,
            service_time_mean: self.service.mean,
            service_time_var: self.service.variance(),
            served_count: self.served,
            lost_count: self.lost,
            orders_delivered: self.delivered,
        };
        // Orders still dormant at the horizon never got a lead.
        let decided = self
            .orders
            .iter()
            .take_while(|o| !o.effective_delivery.is_nan())
            .count();
        self.orders.truncate(decided);
        Ok(SimOutput {
            stats,
            orders: self.orders,
            position_violations: self.position_violations,
        })
    }
}

pub fn run_simulation(config: &SimConfig) -> Result<SimStats, SimError> {
    run_simulation_traced(config).map(|out| out.stats)
}

/// Like [`run_simulation`] but also returns every order and invariant
/// counters.
pub fn run_simulation_traced(config: &SimConfig) -> Result<SimOutput, SimError> {
    config.validate()?;
    Simulator::new(config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::des::{erlang_b, GammaParams};

    fn config(regime: Regime) -> SimConfig {
        let mut c = SimConfig::new(regime, 4, 1.0, GammaParams::new(1.0, 2.0).unwrap());
        c.horizon = 5_000.0;
        c.warmup = 50.0;
        c.seed = 7;
        c
    }

    #[test]
    fn adjust_branches() {
        assert_eq!(adjust_exogenous(8.0, 6.0, 3.0).unwrap(), (9.0, 3.0));
        assert_eq!(adjust_exogenous(8.0, 6.0, 1.0).unwrap(), (8.0, 2.0));
        assert_eq!(adjust_exogenous(9.0, 6.0, 3.0).unwrap(), (9.0, 3.0));
        assert!(adjust_exogenous(1.0, -1.0, 1.0).is_err());
        assert!(adjust_exogenous(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn no_demand() {
        let mut c = config(Regime::Exogenous);
        c.demand_rate = 0.0;
        let s = run_simulation(&c).unwrap();
        assert_eq!(s.fill_rate, 1.0);
        assert_eq!(s.avg_on_hand, 4.0);
        assert_eq!(s.long_run_avg_cost, 4.0 * c.costs.holding);
        assert_eq!(s.served_count + s.lost_count, 0);
    }

    #[test]
    fn invalid_configs() {
        let mut c = config(Regime::Endogenous);
        c.warmup = c.horizon;
        assert!(matches!(run_simulation(&c), Err(SimError::InvalidConfig(_))));
        let mut c = config(Regime::Endogenous);
        c.base_stock = 0;
        assert!(run_simulation(&c).is_err());
        let mut c = config(Regime::Endogenous);
        c.costs.holding = -1.0;
        assert!(run_simulation(&c).is_err());
    }

    #[test]
    fn deterministic_and_consistent() {
        for regime in [Regime::Exogenous, Regime::Endogenous, Regime::ExogenousIid] {
            let c = config(regime);
            let a = run_simulation_traced(&c).unwrap();
            let b = run_simulation_traced(&c).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.position_violations, 0);
            assert!(a.stats.avg_on_hand <= 4.0 && a.stats.avg_on_hand >= 0.0);
            assert!((a.stats.avg_position - 4.0).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&a.stats.fill_rate));
            for o in &a.orders {
                assert!(o.effective_delivery >= o.placed_at);
                assert!(o.realized_lead() >= o.drawn_lead - 1e-9);
            }
            if regime != Regime::ExogenousIid {
                assert_eq!(a.crossings(), 0, "{regime}");
            }
        }
    }

    #[test]
    fn exogenous_leads_wait_for_review() {
        let out = run_simulation_traced(&config(Regime::Exogenous)).unwrap();
        for o in &out.orders {
            assert_eq!(o.decided_at, o.decided_at.round());
            assert!(o.decided_at > o.placed_at && o.decided_at - o.placed_at <= 1.0);
            assert!(o.effective_delivery >= o.decided_at + o.drawn_lead);
        }
    }

    #[test]
    fn iid_crosses_sometimes() {
        let out = run_simulation_traced(&config(Regime::ExogenousIid)).unwrap();
        assert!(out.crossings() > 0);
    }

    #[test]
    fn iid_single_server_loss_near_erlang() {
        let mut c = SimConfig::new(Regime::ExogenousIid, 1, 1.0, GammaParams::new(1.0, 1.0).unwrap());
        c.horizon = 50_000.0;
        c.warmup = 500.0;
        let s = run_simulation(&c).unwrap();
        assert!((s.loss_fraction() - erlang_b(1, 1.0)).abs() < 0.015, "{}", s.loss_fraction());
    }

    #[test]
    fn endogenous_service_includes_queueing() {
        let mut c = config(Regime::Endogenous);
        c.demand_rate = 0.45;
        let s = run_simulation(&c).unwrap();
        assert!(s.service_time_mean >= c.lead.mean());
    }

    #[test]
    fn more_frequent_review_shortens_exogenous_service() {
        let mut daily = config(Regime::Exogenous);
        daily.horizon = 20_000.0;
        let mut frequent = daily.clone();
        frequent.review_period = 0.1;
        let slow = run_simulation(&daily).unwrap().service_time_mean;
        let fast = run_simulation(&frequent).unwrap().service_time_mean;
        assert!(fast < slow, "fast {fast} slow {slow}");
    }
}
