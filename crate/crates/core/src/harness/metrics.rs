//! Channel-efficiency and rate-allocation metrics.

use serde::{Deserialize, Serialize};

use crate::env::{ChannelFractions, ChannelUse, SlotOutcome};

/// Floor applied to per-user rates inside the sum log-rate.
pub const LOG_RATE_FLOOR: f64 = 1e-3;

/// Metrics of one window of slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    /// Fraction of (clique, channel, slot) triples carrying exactly one packet.
    pub throughput: f64,
    pub idle_frac: f64,
    pub collision_frac: f64,
    /// Throughput of each channel of each clique, indexed `clique * K + k - 1`.
    pub channel_throughput: Vec<f64>,
    /// Successes per slot for each user.
    pub user_rates: Vec<f64>,
    pub sum_rate: f64,
    /// `sum_n ln(max(rate_n, LOG_RATE_FLOOR))`.
    pub sum_log_rate: f64,
    pub jain_index: f64,
}

impl WindowMetrics {
    /// Computes metrics over `outcomes` for `num_users` users.
    pub fn from_outcomes(outcomes: &[SlotOutcome], num_users: usize) -> WindowMetrics {
        let fractions = ChannelFractions::from_outcomes(outcomes);
        let slots = outcomes.len().max(1) as f64;
        let pairs = outcomes.first().map_or(0, |o| o.channel_use.len());
        let mut channel_throughput = vec![0.0; pairs];
        let mut successes = vec![0usize; num_users];
        for o in outcomes {
            for (c, u) in channel_throughput.iter_mut().zip(&o.channel_use) {
                if matches!(u, ChannelUse::Success(_)) {
                    *c += 1.0;
                }
            }
            for (s, &ok) in successes.iter_mut().zip(&o.success) {
                *s += ok as usize;
            }
        }
        channel_throughput.iter_mut().for_each(|c| *c /= slots);
        let user_rates: Vec<f64> = successes.iter().map(|&s| s as f64 / slots).collect();
        WindowMetrics {
            throughput: fractions.throughput,
            idle_frac: fractions.idle,
            collision_frac: fractions.collision,
            channel_throughput,
            sum_rate: user_rates.iter().sum(),
            sum_log_rate: user_rates.iter().map(|r| r.max(LOG_RATE_FLOOR).ln()).sum(),
            jain_index: jain_index(&user_rates),
            user_rates,
        }
    }
}

/// `(sum x)^2 / (n sum x^2)`; all-zero allocations count as perfectly fair.
pub fn jain_index(values: &[f64]) -> f64 {
    let sum: f64 = values.iter().sum();
    let squares: f64 = values.iter().map(|x| x * x).sum();
    if values.is_empty() || squares == 0.0 {
        1.0
    } else {
        sum * sum / (values.len() as f64 * squares)
    }
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                std_err: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Summary {
            mean,
            std_err,
            count: n,
        }
    }
}

/// Across-seed summary of [`WindowMetrics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub throughput: Summary,
    pub idle_frac: Summary,
    pub collision_frac: Summary,
    pub sum_rate: Summary,
    pub sum_log_rate: Summary,
    pub jain_index: Summary,
    pub user_rates: Vec<Summary>,
}

impl MetricsSummary {
    /// Summarizes one [`WindowMetrics`] per seed. Per-user rates are only
    /// summarized when every seed has the same number of users.
    pub fn of(per_seed: &[WindowMetrics]) -> MetricsSummary {
        let pick =
            |f: fn(&WindowMetrics) -> f64| Summary::of(&per_seed.iter().map(f).collect::<Vec<_>>());
        let users = per_seed.first().map_or(0, |m| m.user_rates.len());
        let user_rates = if per_seed.iter().all(|m| m.user_rates.len() == users) {
            (0..users)
                .map(|u| Summary::of(&per_seed.iter().map(|m| m.user_rates[u]).collect::<Vec<_>>()))
                .collect()
        } else {
            Vec::new()
        };
        MetricsSummary {
            throughput: pick(|m| m.throughput),
            idle_frac: pick(|m| m.idle_frac),
            collision_frac: pick(|m| m.collision_frac),
            sum_rate: pick(|m| m.sum_rate),
            sum_log_rate: pick(|m| m.sum_log_rate),
            jain_index: pick(|m| m.jain_index),
            user_rates,
        }
    }
}

/// Element-wise mean of several windows (used to pool evaluation episodes).
pub fn mean_metrics(windows: &[WindowMetrics]) -> WindowMetrics {
    let n = windows.len().max(1) as f64;
    let first = &windows[0];
    let avg = |f: &dyn Fn(&WindowMetrics) -> f64| windows.iter().map(f).sum::<f64>() / n;
    let avg_vec = |f: &dyn Fn(&WindowMetrics) -> &Vec<f64>| -> Vec<f64> {
        (0..f(first).len())
            .map(|i| windows.iter().map(|w| f(w)[i]).sum::<f64>() / n)
            .collect()
    };
    WindowMetrics {
        throughput: avg(&|w| w.throughput),
        idle_frac: avg(&|w| w.idle_frac),
        collision_frac: avg(&|w| w.collision_frac),
        channel_throughput: avg_vec(&|w| &w.channel_throughput),
        user_rates: avg_vec(&|w| &w.user_rates),
        sum_rate: avg(&|w| w.sum_rate),
        sum_log_rate: avg(&|w| w.sum_log_rate),
        jain_index: avg(&|w| w.jain_index),
    }
}
