//! Per-slot channel occupancy traces and allocation classification.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{ChannelUse, SlotOutcome};
use crate::error::{Error, Result};

/// Smallest window `classify_allocation` accepts.
pub const MIN_WINDOW: usize = 50;
/// Occupancy a channel owner must reach.
pub const OWNER_OCCUPANCY: f64 = 0.95;
/// Allowed deviation of each user's share from one half on a time-shared channel.
pub const TDMA_TOLERANCE: f64 = 0.10;
/// Allowed relative deviation of each user's rate from `K/N`.
pub const EQUAL_SHARE_TOLERANCE: f64 = 0.15;
/// Fraction of colliding slots per channel still treated as collision-free.
///
/// The evaluation policy keeps a small uniform exploration term, so a
/// converged allocation still produces a stray collision now and then.
pub const COLLISION_TOLERANCE: f64 = 0.05;

/// One row of an occupancy trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyRow {
    pub slot: usize,
    pub user: usize,
    /// 0 for silence, otherwise the channel index.
    pub action: usize,
    pub success: bool,
}

/// Flattens `outcomes` into one row per (slot, user), slot-major.
pub fn occupancy_trace(outcomes: &[SlotOutcome]) -> Vec<OccupancyRow> {
    outcomes
        .iter()
        .flat_map(|o| {
            o.actions
                .iter()
                .zip(&o.success)
                .enumerate()
                .map(move |(user, (a, &s))| OccupancyRow {
                    slot: o.slot_index,
                    user,
                    action: a.index(),
                    success: s,
                })
        })
        .collect()
}

pub const OCCUPANCY_HEADER: &str = "slot,user,action,success";

/// Writes a trace as CSV, preceded by a `# config_hash=...` comment line.
pub fn write_occupancy_csv<W: Write>(
    out: &mut W,
    rows: &[OccupancyRow],
    config_hash: &str,
) -> std::io::Result<()> {
    writeln!(out, "# config_hash={config_hash}")?;
    writeln!(out, "{OCCUPANCY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.slot, r.user, r.action, r.success as u8
        )?;
    }
    Ok(())
}

/// Coarse shape of a rate allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Allocation {
    /// Every channel is held by one user and collisions are negligible.
    OrthogonalFixed,
    /// Every user's rate is within tolerance of `K/N`.
    EqualShare,
    /// Some channel is split roughly in half between two users, collision-free.
    TdmaShare,
    Unconverged,
}

impl Allocation {
    pub const ALL: [Allocation; 4] = [
        Allocation::OrthogonalFixed,
        Allocation::EqualShare,
        Allocation::TdmaShare,
        Allocation::Unconverged,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Allocation::OrthogonalFixed => "orthogonal-fixed",
            Allocation::EqualShare => "equal-share",
            Allocation::TdmaShare => "tdma-share",
            Allocation::Unconverged => "unconverged",
        }
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Allocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Allocation> {
        Allocation::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown allocation label {s:?}")))
    }
}

/// Per-window occupancy statistics of a single clique.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyStats {
    /// `occupancy[n][k-1]`: fraction of slots user `n` transmitted on channel `k`.
    pub occupancy: Vec<Vec<f64>>,
    /// Fraction of slots each channel saw a collision.
    pub collisions: Vec<f64>,
    pub user_rates: Vec<f64>,
}

impl OccupancyStats {
    /// Statistics of a single-clique window.
    pub fn from_outcomes(outcomes: &[SlotOutcome], num_channels: usize) -> Result<OccupancyStats> {
        let first = outcomes
            .first()
            .ok_or_else(|| Error::Domain("empty occupancy window".into()))?;
        if first.channel_use.len() != num_channels {
            return Err(Error::Domain(
                "allocation statistics need a single-clique network".into(),
            ));
        }
        let n = first.actions.len();
        let slots = outcomes.len() as f64;
        let mut occupancy = vec![vec![0.0; num_channels]; n];
        let mut collisions = vec![0.0; num_channels];
        let mut user_rates = vec![0.0; n];
        for o in outcomes {
            for (u, a) in o.actions.iter().enumerate() {
                if a.is_transmit() {
                    occupancy[u][a.index() - 1] += 1.0 / slots;
                }
                if o.success[u] {
                    user_rates[u] += 1.0 / slots;
                }
            }
            for (k, c) in o.channel_use.iter().enumerate() {
                if *c == ChannelUse::Collision {
                    collisions[k] += 1.0 / slots;
                }
            }
        }
        Ok(OccupancyStats {
            occupancy,
            collisions,
            user_rates,
        })
    }

    fn collision_free(&self, k: usize) -> bool {
        self.collisions[k] <= COLLISION_TOLERANCE
    }

    fn owned(&self, k: usize) -> bool {
        self.occupancy.iter().any(|row| row[k] >= OWNER_OCCUPANCY)
    }

    fn time_shared(&self, k: usize) -> bool {
        let sharers: Vec<f64> = self
            .occupancy
            .iter()
            .map(|row| row[k])
            .filter(|&o| o > TDMA_TOLERANCE)
            .collect();
        sharers.len() == 2 && sharers.iter().all(|o| (o - 0.5).abs() <= TDMA_TOLERANCE)
    }
}

/// Labels the allocation played during `window` (one clique, at least 50 slots).
///
/// Checked in order: orthogonal-fixed (each channel owned by one user at
/// least 95% of the time, no channel colliding more than the tolerance),
/// equal-share (every user's rate within 15% of `K/N`), tdma-share (some
/// channel split 50 +- 10% between exactly two users with negligible
/// collisions anywhere), otherwise unconverged.
pub fn classify_allocation(window: &[SlotOutcome], num_channels: usize) -> Result<Allocation> {
    if window.len() < MIN_WINDOW {
        return Err(Error::Domain(format!(
            "classification needs at least {MIN_WINDOW} slots, got {}",
            window.len()
        )));
    }
    let stats = OccupancyStats::from_outcomes(window, num_channels)?;
    let channels = 0..num_channels;
    let all_clean = channels.clone().all(|k| stats.collision_free(k));
    if all_clean && channels.clone().all(|k| stats.owned(k)) {
        return Ok(Allocation::OrthogonalFixed);
    }
    let fair = num_channels as f64 / stats.user_rates.len() as f64;
    if stats
        .user_rates
        .iter()
        .all(|r| (r - fair).abs() <= EQUAL_SHARE_TOLERANCE * fair)
    {
        return Ok(Allocation::EqualShare);
    }
    if all_clean && channels.clone().any(|k| stats.time_shared(k)) {
        return Ok(Allocation::TdmaShare);
    }
    Ok(Allocation::Unconverged)
}

/// True when some channel carried every user at once in at least 90% of the slots.
pub fn persistent_all_transmit(window: &[SlotOutcome]) -> bool {
    if window.is_empty() {
        return false;
    }
    let hits = window
        .iter()
        .filter(|o| {
            let first = o.actions[0];
            first.is_transmit() && o.actions.iter().all(|a| *a == first)
        })
        .count();
    hits as f64 >= 0.9 * window.len() as f64
}
