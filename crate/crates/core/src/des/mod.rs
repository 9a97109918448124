//! Single-item, lost-sales, continuous-review base-stock system fed by
//! Poisson demand, with three ways of producing order lead times:
//!
//! - **Exogenous**: lead times are decided at daily review epochs from a
//!   Gamma law and then pushed back, if needed, so that deliveries never
//!   overtake each other.
//! - **Endogenous**: orders queue at a single FIFO server whose Gamma service
//!   time is the merge processing time.
//! - **ExogenousIid**: independent Gamma leads from placement with no
//!   ordering constraint. This is the classical loss system and is used as a
//!   test oracle against Erlang-B.

mod erlang;
mod sampling;
mod sim;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use erlang::erlang_b;
pub use sampling::{sample_gamma, sample_poisson_interarrival, LeadSampler};
pub use sim::{adjust_exogenous, run_simulation, run_simulation_traced, SimOutput, UpdateOrder};

use crate::kb::Time;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("negative lead-time adjustment: previous delivery {prev} before placement {placed}")]
    NegativeAdjustment { prev: Time, placed: Time },
    #[error("invalid adjustment input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Exogenous,
    Endogenous,
    ExogenousIid,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Exogenous => "exo",
            Regime::Endogenous => "endo",
            Regime::ExogenousIid => "exo-iid",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exo" | "exogenous" => Ok(Regime::Exogenous),
            "endo" | "endogenous" => Ok(Regime::Endogenous),
            "exo-iid" | "exogenous-iid" => Ok(Regime::ExogenousIid),
            other => Err(SimError::InvalidConfig(format!("unknown regime `{other}`"))),
        }
    }
}

/// Gamma law with rate `mu` and shape `r`: mean `r/mu`, variance `r/mu²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub mu: f64,
    pub r: f64,
}

impl GammaParams {
    pub fn new(mu: f64, r: f64) -> Result<Self, SimError> {
        let p = Self { mu, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.mu > 0.0 && self.r > 0.0 && self.mu.is_finite() && self.r.is_finite() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(format!(
                "gamma parameters must be positive (mu={}, r={})",
                self.mu, self.r
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        self.r / self.mu
    }

    pub fn variance(&self) -> f64 {
        self.r / (self.mu * self.mu)
    }
}

/// Cost rates. The defaults are arbitrary round numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    /// Per merged item per unit time on hand.
    pub holding: f64,
    /// Per lost update.
    pub lost_penalty: f64,
    /// Per completed merge.
    pub processing: f64,
}

impl Default for Costs {
    fn default() -> Self {
        Self {
            holding: 1.0,
            lost_penalty: 10.0,
            processing: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub regime: Regime,
    pub base_stock: u32,
    /// Poisson demand rate; zero means no demand at all.
    pub demand_rate: f64,
    pub lead: GammaParams,
    pub review_period: f64,
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub costs: Costs,
}

impl SimConfig {
    pub fn new(regime: Regime, base_stock: u32, demand_rate: f64, lead: GammaParams) -> Self {
        Self {
            regime,
            base_stock,
            demand_rate,
            lead,
            review_period: 1.0,
            horizon: 10_000.0,
            warmup: 100.0,
            seed: 0,
            costs: Costs::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        self.lead.validate()?;
        if self.base_stock < 1 {
            return fail("base_stock must be at least 1".into());
        }
        if self.demand_rate < 0.0 || !self.demand_rate.is_finite() {
            return fail(format!("demand_rate must be finite and >= 0, got {}", self.demand_rate));
        }
        if self.review_period <= 0.0 || !self.review_period.is_finite() {
            return fail(format!("review_period must be positive, got {}", self.review_period));
        }
        if self.horizon <= 0.0 || !self.horizon.is_finite() {
            return fail(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(0.0..self.horizon).contains(&self.warmup) {
            return fail(format!(
                "warmup must lie in [0, horizon), got {} with horizon {}",
                self.warmup, self.horizon
            ));
        }
        let c = self.costs;
        if [c.holding, c.lost_penalty, c.processing]
            .iter()
            .any(|v| *v < 0.0 || !v.is_finite())
        {
            return fail("costs must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// Post-warmup statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    /// Served / (served + lost); 1.0 when no demand arrived.
    pub fill_rate: f64,
    /// Time-average on-hand merged items.
    pub avg_on_hand: f64,
    /// Time-average inventory position (on hand + on order).
    pub avg_position: f64,
    pub long_run_avg_cost: f64,
    /// Moments of realized lead times (delivery − placement) of orders
    /// placed after warmup and delivered before the horizon.
    pub service_time_mean: f64,
    pub service_time_var: f64,
    pub served_count: u64,
    pub lost_count: u64,
    pub orders_delivered: u64,
}

impl SimStats {
    pub fn loss_fraction(&self) -> f64 {
        1.0 - self.fill_rate
    }
}
