//! Simulation configs (`key = value`, one per line), sweep grids and result
//! records.
//!
//! ```text
//! regime = exo
//! base_stock = 8
//! demand_rate = 1.0
//! lead_mu = 1.0
//! lead_r = 4.0
//! review_period = 1.0
//! horizon = 10000
//! warmup = 100
//! seed = 7
//! # optional, defaulted
//! holding_cost = 1.0
//! ```
//!
//! In a sweep file any value may be a comma-separated list; the grid is the
//! Cartesian product, enumerated with the first key in [`CONFIG_KEYS`] varying
//! slowest. Commas are list separators here, so decimals need a point.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use super::{strip_comment, IoError};
use crate::des::{Costs, GammaParams, Regime, SimConfig, SimStats};

/// Recognized keys, in grid order.
pub const CONFIG_KEYS: [&str; 12] = [
    "regime",
    "base_stock",
    "demand_rate",
    "lead_mu",
    "lead_r",
    "review_period",
    "horizon",
    "warmup",
    "seed",
    "holding_cost",
    "lost_penalty",
    "processing_cost",
];

const OPTIONAL_KEYS: [&str; 3] = ["holding_cost", "lost_penalty", "processing_cost"];

/// Raw values per key, with the line each key was set on.
type RawConfig = BTreeMap<&'static str, (Vec<String>, usize)>;

fn read_pairs(text: &str, lists: bool) -> Result<RawConfig, IoError> {
    let mut raw = RawConfig::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let code = strip_comment(line).trim();
        if code.is_empty() {
            continue;
        }
        let invalid = |message: String| IoError::Invalid { line: line_no, message };
        let (key, value) = code
            .split_once('=')
            .ok_or_else(|| invalid(format!("expected `key = value`, found `{code}`")))?;
        let key = key.trim();
        let key = *CONFIG_KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| invalid(format!("unknown key `{key}`")))?;
        let values: Vec<String> = if lists {
            value.split(',').map(|v| v.trim().to_string()).collect()
        } else {
            vec![value.trim().to_string()]
        };
        if values.iter().any(String::is_empty) {
            return Err(invalid(format!("empty value for `{key}`")));
        }
        if raw.insert(key, (values, line_no)).is_some() {
            return Err(invalid(format!("duplicate key `{key}`")));
        }
    }
    for key in CONFIG_KEYS {
        if !raw.contains_key(key) && !OPTIONAL_KEYS.contains(&key) {
            return Err(IoError::Invalid {
                line: 0,
                message: format!("missing key `{key}`"),
            });
        }
    }
    Ok(raw)
}

fn build(choice: &BTreeMap<&str, (&str, usize)>) -> Result<SimConfig, IoError> {
    fn get<T: std::str::FromStr>(
        choice: &BTreeMap<&str, (&str, usize)>,
        key: &str,
    ) -> Result<Option<T>, IoError> {
        match choice.get(key) {
            None => Ok(None),
            Some((text, line)) => text.parse().map(Some).map_err(|_| IoError::Invalid {
                line: *line,
                message: format!("invalid value `{text}` for `{key}`"),
            }),
        }
    }
    let need = |key: &str| -> Result<f64, IoError> { Ok(get::<f64>(choice, key)?.expect("checked")) };
    let (regime_text, regime_line) = choice["regime"];
    let regime: Regime = regime_text.parse().map_err(|_| IoError::Invalid {
        line: regime_line,
        message: format!("unknown regime `{regime_text}` (expected exo, endo or exo-iid)"),
    })?;
    let defaults = Costs::default();
    let config = SimConfig {
        regime,
        base_stock: get(choice, "base_stock")?.expect("checked"),
        demand_rate: need("demand_rate")?,
        lead: GammaParams {
            mu: need("lead_mu")?,
            r: need("lead_r")?,
        },
        review_period: need("review_period")?,
        horizon: need("horizon")?,
        warmup: need("warmup")?,
        seed: get(choice, "seed")?.expect("checked"),
        costs: Costs {
            holding: get(choice, "holding_cost")?.unwrap_or(defaults.holding),
            lost_penalty: get(choice, "lost_penalty")?.unwrap_or(defaults.lost_penalty),
            processing: get(choice, "processing_cost")?.unwrap_or(defaults.processing),
        },
    };
    config.validate().map_err(|e| IoError::Invalid {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(config)
}

/// Parses a single simulation config. Cost keys are optional; every other
/// key is required.
pub fn parse_config(text: &str) -> Result<SimConfig, IoError> {
    let raw = read_pairs(text, false)?;
    let choice = raw
        .iter()
        .map(|(k, (vs, line))| (*k, (vs[0].as_str(), *line)))
        .collect();
    build(&choice)
}

/// Cartesian grid of configs, in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub configs: Vec<SimConfig>,
}

impl SweepGrid {
    /// Every grid point crossed with every seed, grid-major.
    pub fn with_seeds(&self, seeds: &[u64]) -> Vec<SimConfig> {
        self.configs
            .iter()
            .flat_map(|c| seeds.iter().map(move |&seed| SimConfig { seed, ..c.clone() }))
            .collect()
    }
}

pub fn parse_sweep(text: &str) -> Result<SweepGrid, IoError> {
    let raw = read_pairs(text, true)?;
    let keys: Vec<&str> = CONFIG_KEYS.iter().copied().filter(|k| raw.contains_key(k)).collect();
    let sizes: Vec<usize> = keys.iter().map(|k| raw[k].0.len()).collect();
    let total: usize = sizes.iter().product();
    let mut configs = Vec::with_capacity(total);
    for mut index in 0..total {
        let mut choice = BTreeMap::new();
        for (k, size) in keys.iter().zip(&sizes).rev() {
            let (values, line) = &raw[k];
            choice.insert(*k, (values[index % size].as_str(), *line));
            index /= size;
        }
        configs.push(build(&choice)?);
    }
    Ok(SweepGrid { configs })
}

/// Formats `x` with nine significant digits. Non-finite values print as
/// `NaN`, `inf` or `-inf`.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-5..15).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

fn sig<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(format_sig(*x).parse().expect("formatted float"))
    } else {
        s.serialize_none()
    }
}

fn regime_name<S: Serializer>(r: &Regime, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(r.as_str())
}

/// Column order of [`ResultRecord::csv_row`] and of JSON object keys.
pub const CSV_COLUMNS: [&str; 22] = [
    "regime",
    "base_stock",
    "demand_rate",
    "lead_mu",
    "lead_r",
    "review_period",
    "horizon",
    "warmup",
    "seed",
    "holding_cost",
    "lost_penalty",
    "processing_cost",
    "fill_rate",
    "avg_on_hand",
    "avg_position",
    "long_run_avg_cost",
    "service_time_mean",
    "service_time_var",
    "served_count",
    "lost_count",
    "orders_delivered",
    "wall_time_s",
];

/// Config echo, statistics and wall time of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    #[serde(serialize_with = "regime_name")]
    pub regime: Regime,
    pub base_stock: u32,
    #[serde(serialize_with = "sig")]
    pub demand_rate: f64,
    #[serde(serialize_with = "sig")]
    pub lead_mu: f64,
    #[serde(serialize_with = "sig")]
    pub lead_r: f64,
    #[serde(serialize_with = "sig")]
    pub review_period: f64,
    #[serde(serialize_with = "sig")]
    pub horizon: f64,
    #[serde(serialize_with = "sig")]
    pub warmup: f64,
    pub seed: u64,
    #[serde(serialize_with = "sig")]
    pub holding_cost: f64,
    #[serde(serialize_with = "sig")]
    pub lost_penalty: f64,
    #[serde(serialize_with = "sig")]
    pub processing_cost: f64,
    #[serde(serialize_with = "sig")]
    pub fill_rate: f64,
    #[serde(serialize_with = "sig")]
    pub avg_on_hand: f64,
    #[serde(serialize_with = "sig")]
    pub avg_position: f64,
    #[serde(serialize_with = "sig")]
    pub long_run_avg_cost: f64,
    #[serde(serialize_with = "sig")]
    pub service_time_mean: f64,
    #[serde(serialize_with = "sig")]
    pub service_time_var: f64,
    pub served_count: u64,
    pub lost_count: u64,
    pub orders_delivered: u64,
    #[serde(serialize_with = "sig")]
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn new(config: &SimConfig, stats: &SimStats, wall_time_s: f64) -> Self {
        Self {
            regime: config.regime,
            base_stock: config.base_stock,
            demand_rate: config.demand_rate,
            lead_mu: config.lead.mu,
            lead_r: config.lead.r,
            review_period: config.review_period,
            horizon: config.horizon,
            warmup: config.warmup,
            seed: config.seed,
            holding_cost: config.costs.holding,
            lost_penalty: config.costs.lost_penalty,
            processing_cost: config.costs.processing,
            fill_rate: stats.fill_rate,
            avg_on_hand: stats.avg_on_hand,
            avg_position: stats.avg_position,
            long_run_avg_cost: stats.long_run_avg_cost,
            service_time_mean: stats.service_time_mean,
            service_time_var: stats.service_time_var,
            served_count: stats.served_count,
            lost_count: stats.lost_count,
            orders_delivered: stats.orders_delivered,
            wall_time_s,
        }
    }

    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        let f = format_sig;
        let cells = [
            self.regime.to_string(),
            self.base_stock.to_string(),
            f(self.demand_rate),
            f(self.lead_mu),
            f(self.lead_r),
            f(self.review_period),
            f(self.horizon),
            f(self.warmup),
            self.seed.to_string(),
            f(self.holding_cost),
            f(self.lost_penalty),
            f(self.processing_cost),
            f(self.fill_rate),
            f(self.avg_on_hand),
            f(self.avg_position),
            f(self.long_run_avg_cost),
            f(self.service_time_mean),
            f(self.service_time_var),
            self.served_count.to_string(),
            self.lost_count.to_string(),
            self.orders_delivered.to_string(),
            f(self.wall_time_s),
        ];
        let mut row = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                row.push(',');
            }
            let _ = write!(row, "{cell}");
        }
        row
    }

    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}
