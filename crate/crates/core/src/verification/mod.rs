//! Independent oracles and empirical probes.

mod duality;
mod kkt;
mod probes;
mod second_order;

use std::collections::BTreeMap;

use serde::Serialize;

pub use duality::check_duality;
pub use kkt::{kkt_nash_oracle, KKT_MAX_CELLS, KKT_MAX_STEPS};
pub use probes::{probe_carleman, probe_observability, random_terminal_datum, ProbeOptions};
pub use second_order::{check_second_order, second_variation_operator, SecondOrder, FD_STEP};

/// Sampled statistic with an optional budget.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub name: String,
    pub samples: usize,
    pub excluded: usize,
    pub worst_ratio: f64,
    pub ratios: Vec<f64>,
    pub parameters: BTreeMap<String, f64>,
    pub budget: Option<f64>,
    pub pass: bool,
}

impl ProbeReport {
    /// Report whose statistic must stay at or below `budget`.
    pub fn gaps(name: &str, gaps: Vec<f64>, budget: f64, parameters: BTreeMap<String, f64>) -> Self {
        let worst = gaps.iter().cloned().fold(0.0, f64::max);
        let finite = gaps.iter().all(|g| g.is_finite());
        ProbeReport {
            name: name.to_string(),
            samples: gaps.len(),
            excluded: 0,
            worst_ratio: worst,
            pass: finite && worst <= budget,
            ratios: gaps,
            parameters,
            budget: Some(budget),
        }
    }

    /// Report of positive ratios; passes when all are finite and positive (and within the
    /// budget when one is declared).
    pub fn ratios(
        name: &str,
        ratios: Vec<f64>,
        excluded: usize,
        budget: Option<f64>,
        parameters: BTreeMap<String, f64>,
    ) -> Self {
        let worst = ratios.iter().cloned().fold(0.0, f64::max);
        let sane = !ratios.is_empty() && ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        ProbeReport {
            name: name.to_string(),
            samples: ratios.len(),
            excluded,
            worst_ratio: worst,
            pass: sane && budget.is_none_or(|b| worst <= b),
            ratios,
            parameters,
            budget,
        }
    }
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests;
