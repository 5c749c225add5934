//! Brute-force oracles for the multichannel random access game.
//!
//! Everything here works on a single clique and on *open-loop* strategy
//! profiles: a user's action depends on the slot index only, never on the
//! history. Nash and subgame-perfect checks consider open-loop pure
//! deviations. That is enough to verify the collision-free equilibrium
//! profiles of the competitive and cooperative games, which are all
//! open-loop, but it is not a general behavioral-strategy SPE test.
//!
//! Enumerations are exact or refuse: anything larger than the budget
//! returns [`Error::Budget`] instead of sampling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::rewards::{alpha_fair_utility, RewardKind, RewardSpec};

pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Relative slack used when comparing rewards.
const TOLERANCE: f64 = 1e-12;

/// A finite-horizon game on one clique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub num_users: usize,
    pub num_channels: usize,
    pub horizon: usize,
    pub reward: RewardSpec,
    #[serde(default = "default_budget")]
    pub budget: u128,
}

fn default_budget() -> u128 {
    DEFAULT_BUDGET
}

impl GameSpec {
    pub fn new(
        num_users: usize,
        num_channels: usize,
        horizon: usize,
        reward: RewardSpec,
    ) -> GameSpec {
        GameSpec {
            num_users,
            num_channels,
            horizon,
            reward,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: u128) -> GameSpec {
        self.budget = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_channels == 0 || self.horizon == 0 {
            return Err(Error::Config(format!(
                "game needs N, K, T >= 1 (got {}, {}, {})",
                self.num_users, self.num_channels, self.horizon
            )));
        }
        self.reward.validate()
    }

    fn num_actions(&self) -> usize {
        self.num_channels + 1
    }

    /// `(K+1)^exponent`, saturating.
    fn count(&self, exponent: usize) -> u128 {
        let base = self.num_actions() as u128;
        (0..exponent).fold(1u128, |acc, _| acc.saturating_mul(base))
    }

    fn check_budget(&self, required: u128) -> Result<()> {
        if required > self.budget {
            Err(Error::Budget {
                required,
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }

    /// The same game restricted to slots `start..T` (zero-based).
    fn continuation(&self, start: usize) -> GameSpec {
        GameSpec {
            horizon: self.horizon - start,
            ..self.clone()
        }
    }
}

/// An `N x T` open-loop pure strategy profile.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PureProfile {
    actions: Vec<Vec<Action>>,
}

impl PureProfile {
    pub fn new(actions: Vec<Vec<Action>>) -> Result<PureProfile> {
        let horizon = actions.first().map_or(0, Vec::len);
        if actions.is_empty() || horizon == 0 || actions.iter().any(|row| row.len() != horizon) {
            return Err(Error::Shape(
                "profile must be a non-empty rectangular N x T matrix".into(),
            ));
        }
        Ok(PureProfile { actions })
    }

    /// Builds a profile from raw action indices.
    pub fn from_indices(rows: &[Vec<usize>], num_channels: usize) -> Result<PureProfile> {
        let actions = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&a| Action::new(a, num_channels))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        PureProfile::new(actions)
    }

    /// Every user silent in every slot.
    pub fn silent(num_users: usize, horizon: usize) -> PureProfile {
        PureProfile {
            actions: vec![vec![Action::IDLE; horizon]; num_users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.actions.len()
    }

    pub fn horizon(&self) -> usize {
        self.actions[0].len()
    }

    pub fn row(&self, user: usize) -> &[Action] {
        &self.actions[user]
    }

    pub fn action(&self, user: usize, slot: usize) -> Action {
        self.actions[user][slot]
    }

    pub fn with_row(&self, user: usize, row: Vec<Action>) -> PureProfile {
        let mut actions = self.actions.clone();
        actions[user] = row;
        PureProfile { actions }
    }

    /// The profile restricted to slots `start..T`.
    pub fn suffix(&self, start: usize) -> PureProfile {
        PureProfile {
            actions: self
                .actions
                .iter()
                .map(|row| row[start..].to_vec())
                .collect(),
        }
    }

    fn check(&self, spec: &GameSpec) -> Result<()> {
        if self.num_users() != spec.num_users || self.horizon() != spec.horizon {
            return Err(Error::Shape(format!(
                "profile is {} x {} but the game is {} x {}",
                self.num_users(),
                self.horizon(),
                spec.num_users,
                spec.horizon
            )));
        }
        if let Some(a) = self
            .actions
            .iter()
            .flatten()
            .find(|a| a.index() > spec.num_channels)
        {
            return Err(Error::Domain(format!(
                "action {a} exceeds K = {}",
                spec.num_channels
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PureProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.actions {
            let cells: Vec<String> = row.iter().map(|a| a.to_string()).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for PureProfile {
    type Err = Error;

    /// One row per user, whitespace-separated action indices. Blank lines
    /// and lines starting with `#` are ignored.
    fn from_str(s: &str) -> Result<PureProfile> {
        let mut actions = Vec::new();
        for (line_no, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>()
                        .map(Action::from_index)
                        .map_err(|e| Error::Parse(format!("line {}: {tok:?}: {e}", line_no + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            actions.push(row);
        }
        PureProfile::new(actions)
    }
}

/// Per-slot mixed strategies, `probs[user][slot][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    pub probs: Vec<Vec<Vec<f64>>>,
}

impl MixedProfile {
    /// The degenerate mixed profile that plays `profile` with certainty.
    pub fn from_pure(profile: &PureProfile, num_channels: usize) -> MixedProfile {
        let probs = profile
            .actions
            .iter()
            .map(|row| {
                row.iter()
                    .map(|a| {
                        let mut p = vec![0.0; num_channels + 1];
                        p[a.index()] = 1.0;
                        p
                    })
                    .collect()
            })
            .collect();
        MixedProfile { probs }
    }

    fn check(&self, spec: &GameSpec) -> Result<()> {
        if self.probs.len() != spec.num_users {
            return Err(Error::Shape(format!(
                "{} users in profile, {} in game",
                self.probs.len(),
                spec.num_users
            )));
        }
        for (n, row) in self.probs.iter().enumerate() {
            if row.len() != spec.horizon {
                return Err(Error::Shape(format!(
                    "user {n} has {} slots, game has {}",
                    row.len(),
                    spec.horizon
                )));
            }
            for (t, p) in row.iter().enumerate() {
                if p.len() != spec.num_actions() {
                    return Err(Error::Shape(format!(
                        "user {n} slot {t}: {} probabilities",
                        p.len()
                    )));
                }
                let sum: f64 = p.iter().sum();
                if p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!(
                        "user {n} slot {t}: {p:?} is not a distribution"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Successes of each user in each slot of a single-clique open-loop profile.
fn success_matrix(profile: &PureProfile, num_channels: usize) -> Vec<Vec<bool>> {
    let n = profile.num_users();
    let mut success = vec![vec![false; profile.horizon()]; n];
    let mut load = vec![0usize; num_channels + 1];
    for t in 0..profile.horizon() {
        load.iter_mut().for_each(|l| *l = 0);
        for u in 0..n {
            load[profile.actions[u][t].index()] += 1;
        }
        for u in 0..n {
            let a = profile.actions[u][t];
            success[u][t] = a.is_transmit() && load[a.index()] == 1;
        }
    }
    success
}

/// Rewards from a success matrix `[user][t]`.
fn rewards_from_successes(success: &[Vec<bool>], reward: &RewardSpec) -> Vec<f64> {
    let horizon = success.first().map_or(0, Vec::len);
    match reward.kind {
        RewardKind::Competitive => success
            .iter()
            .map(|row| {
                let mut discount = 1.0;
                let mut total = 0.0;
                for &s in row {
                    if s {
                        total += discount;
                    }
                    discount *= reward.gamma;
                }
                total
            })
            .collect(),
        RewardKind::AlphaFair { alpha } => {
            let counts: Vec<usize> = success
                .iter()
                .map(|row| row.iter().filter(|s| **s).count())
                .collect();
            let value = terminal_value(&counts, alpha, reward.log_floor, reward.gamma, horizon);
            vec![value; success.len()]
        }
    }
}

fn terminal_value(counts: &[usize], alpha: f64, floor: f64, gamma: f64, horizon: usize) -> f64 {
    let sum: f64 = counts
        .iter()
        .map(|&x| alpha_fair_utility(x as f64, alpha, floor).expect("counts are nonnegative"))
        .sum();
    gamma.powi(horizon as i32 - 1) * sum
}

/// Discounted reward of every user under a pure open-loop profile.
pub fn profile_rewards(profile: &PureProfile, spec: &GameSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    profile.check(spec)?;
    Ok(rewards_from_successes(
        &success_matrix(profile, spec.num_channels),
        &spec.reward,
    ))
}

/// Expected discounted reward of every user under independent per-slot mixed strategies.
///
/// Competitive rewards are linear in the per-slot success probabilities.
/// Cooperative rewards depend on the joint distribution of success counts,
/// which is propagated slot by slot; each slot enumerates the `(K+1)^N`
/// joint actions, so that count is checked against the budget.
pub fn mixed_profile_rewards(profile: &MixedProfile, spec: &GameSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    profile.check(spec)?;
    let n = spec.num_users;
    match spec.reward.kind {
        RewardKind::Competitive => {
            let mut rewards = vec![0.0; n];
            let mut discount = 1.0;
            for t in 0..spec.horizon {
                for (u, r) in rewards.iter_mut().enumerate() {
                    let p_success: f64 = (1..=spec.num_channels)
                        .map(|k| {
                            let others: f64 = (0..n)
                                .filter(|&m| m != u)
                                .map(|m| 1.0 - profile.probs[m][t][k])
                                .product();
                            profile.probs[u][t][k] * others
                        })
                        .sum();
                    *r += discount * p_success;
                }
                discount *= spec.reward.gamma;
            }
            Ok(rewards)
        }
        RewardKind::AlphaFair { alpha } => {
            spec.check_budget(spec.count(n))?;
            let slot_outcomes: Vec<Vec<(u64, f64)>> = (0..spec.horizon)
                .map(|t| success_distribution(profile, spec, t))
                .collect();
            // distribution over success-count vectors, stored sparsely
            let mut dist: std::collections::BTreeMap<Vec<usize>, f64> =
                std::collections::BTreeMap::new();
            dist.insert(vec![0; n], 1.0);
            for outcomes in &slot_outcomes {
                let mut next = std::collections::BTreeMap::new();
                for (counts, p) in &dist {
                    for &(mask, q) in outcomes {
                        let mut c = counts.clone();
                        for (u, cu) in c.iter_mut().enumerate() {
                            *cu += ((mask >> u) & 1) as usize;
                        }
                        *next.entry(c).or_insert(0.0) += p * q;
                    }
                }
                dist = next;
            }
            let expected: f64 = dist
                .iter()
                .map(|(counts, p)| {
                    p * terminal_value(
                        counts,
                        alpha,
                        spec.reward.log_floor,
                        spec.reward.gamma,
                        spec.horizon,
                    )
                })
                .sum();
            Ok(vec![expected; n])
        }
    }
}

/// Probability of each success bitmask in slot `t`.
fn success_distribution(profile: &MixedProfile, spec: &GameSpec, t: usize) -> Vec<(u64, f64)> {
    let n = spec.num_users;
    let a = spec.num_actions();
    let mut masks: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
    let mut joint = vec![0usize; n];
    let mut load = vec![0usize; a];
    loop {
        let p: f64 = (0..n).map(|u| profile.probs[u][t][joint[u]]).product();
        if p > 0.0 {
            load.iter_mut().for_each(|l| *l = 0);
            for &ja in &joint {
                load[ja] += 1;
            }
            let mask = (0..n)
                .filter(|&u| joint[u] != 0 && load[joint[u]] == 1)
                .fold(0u64, |m, u| m | (1 << u));
            *masks.entry(mask).or_insert(0.0) += p;
        }
        if !advance(&mut joint, a) {
            break;
        }
    }
    masks.into_iter().collect()
}

/// Odometer increment in base `radix`; false once it wraps to all zeros.
fn advance(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

fn greater(a: f64, b: f64) -> bool {
    a - b > TOLERANCE * (1.0 + a.abs().max(b.abs()))
}

/// A strictly profitable unilateral deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub user: usize,
    /// The deviating user's new action sequence.
    pub actions: Vec<Action>,
    pub original_reward: f64,
    pub deviation_reward: f64,
    /// First slot (zero-based) of the continuation game in which the deviation pays.
    pub start_slot: usize,
}

impl fmt::Display for Deviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row: Vec<String> = self.actions.iter().map(|a| a.to_string()).collect();
        write!(
            f,
            "user {} deviating from slot {} to [{}] earns {:.6} instead of {:.6}",
            self.user,
            self.start_slot,
            row.join(" "),
            self.deviation_reward,
            self.original_reward
        )
    }
}

/// Outcome of an equilibrium check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumVerdict {
    pub holds: bool,
    /// First profitable deviation in (start slot, user, deviation) lexicographic order.
    pub witness: Option<Deviation>,
}

/// Checks every open-loop pure deviation of every user.
pub fn is_nash(profile: &PureProfile, spec: &GameSpec) -> Result<EquilibriumVerdict> {
    spec.validate()?;
    profile.check(spec)?;
    spec.check_budget(
        spec.count(spec.horizon)
            .saturating_mul(spec.num_users as u128),
    )?;
    Ok(nash_witness(profile, spec).map_or(
        EquilibriumVerdict {
            holds: true,
            witness: None,
        },
        |w| EquilibriumVerdict {
            holds: false,
            witness: Some(w),
        },
    ))
}

fn nash_witness(profile: &PureProfile, spec: &GameSpec) -> Option<Deviation> {
    let base = rewards_from_successes(&success_matrix(profile, spec.num_channels), &spec.reward);
    let a = spec.num_actions();
    let mut digits = vec![0usize; spec.horizon];
    for user in 0..spec.num_users {
        digits.iter_mut().for_each(|d| *d = 0);
        loop {
            let row: Vec<Action> = digits.iter().map(|&d| Action::from_index(d)).collect();
            if row != profile.row(user) {
                let deviated = profile.with_row(user, row.clone());
                let r = rewards_from_successes(
                    &success_matrix(&deviated, spec.num_channels),
                    &spec.reward,
                )[user];
                if greater(r, base[user]) {
                    return Some(Deviation {
                        user,
                        actions: row,
                        original_reward: base[user],
                        deviation_reward: r,
                        start_slot: 0,
                    });
                }
            }
            if !advance_rev(&mut digits, a) {
                break;
            }
        }
    }
    None
}

/// Odometer that varies the last digit fastest, giving lexicographic order.
fn advance_rev(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// Nash check of every continuation game starting at slots `0..T`.
///
/// Open-loop profiles induce history-independent continuations. Cooperative
/// continuations score only the successes inside the truncated horizon.
pub fn is_spe_openloop(profile: &PureProfile, spec: &GameSpec) -> Result<EquilibriumVerdict> {
    spec.validate()?;
    profile.check(spec)?;
    spec.check_budget(
        spec.count(spec.horizon)
            .saturating_mul(spec.num_users as u128),
    )?;
    for start in 0..spec.horizon {
        let sub = spec.continuation(start);
        if let Some(mut w) = nash_witness(&profile.suffix(start), &sub) {
            w.start_slot = start;
            return Ok(EquilibriumVerdict {
                holds: false,
                witness: Some(w),
            });
        }
    }
    Ok(EquilibriumVerdict {
        holds: true,
        witness: None,
    })
}

/// True when `a` weakly improves on `b` for everyone and strictly for someone.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| !greater(*y, *x)) && a.iter().zip(b).any(|(x, y)| greater(*x, *y))
}

/// Calls `visit` on the reward vector of every pure profile.
fn for_each_profile(
    spec: &GameSpec,
    mut visit: impl FnMut(&PureProfile, Vec<f64>) -> bool,
) -> Result<()> {
    spec.validate()?;
    spec.check_budget(spec.count(spec.num_users * spec.horizon))?;
    let mut digits = vec![0usize; spec.num_users * spec.horizon];
    loop {
        let actions = digits
            .chunks(spec.horizon)
            .map(|row| row.iter().map(|&d| Action::from_index(d)).collect())
            .collect();
        let profile = PureProfile { actions };
        let r = rewards_from_successes(&success_matrix(&profile, spec.num_channels), &spec.reward);
        if !visit(&profile, r) || !advance_rev(&mut digits, spec.num_actions()) {
            return Ok(());
        }
    }
}

/// True when no pure profile dominates `profile`.
pub fn is_pareto(profile: &PureProfile, spec: &GameSpec) -> Result<bool> {
    let own = profile_rewards(profile, spec)?;
    let mut dominated = false;
    for_each_profile(spec, |_, r| {
        dominated = dominates(&r, &own);
        !dominated
    })?;
    Ok(!dominated)
}

/// Nondominated reward vectors over all pure profiles, deduplicated and sorted.
pub fn pareto_front(spec: &GameSpec) -> Result<Vec<Vec<f64>>> {
    let mut front: Vec<Vec<f64>> = Vec::new();
    for_each_profile(spec, |_, r| {
        if !front.iter().any(|f| dominates(f, &r) || same(f, &r)) {
            front.retain(|f| !dominates(&r, f));
            front.push(r);
        }
        true
    })?;
    front.sort_by(|a, b| a.partial_cmp(b).expect("rewards are finite"));
    Ok(front)
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| !greater(*x, *y) && !greater(*y, *x))
}

/// Solution of `max sum_n gamma^(T-1) f(x_n)` subject to `sum_n x_n <= K T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaFairOptimum {
    /// Optimal per-user success counts (continuous relaxation).
    pub allocation: Vec<f64>,
    pub value: f64,
    /// Whether `K T / N` is a whole number of slots.
    pub integral: bool,
    /// At alpha = 0 every split of `K T` is optimal; `allocation` is the equal one.
    pub degenerate: bool,
    /// Lagrange multiplier `(K T / N)^(-alpha)`.
    pub lambda: f64,
}

pub fn alpha_fair_optimum(
    num_users: usize,
    num_channels: usize,
    horizon: usize,
    alpha: f64,
    gamma: f64,
) -> Result<AlphaFairOptimum> {
    if num_users == 0 || num_channels == 0 || horizon == 0 {
        return Err(Error::Domain("N, K and T must be at least 1".into()));
    }
    if !(alpha >= 0.0) || !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha}, gamma = {gamma}")));
    }
    let total = (num_channels * horizon) as f64;
    let share = total / num_users as f64;
    let f = alpha_fair_utility(share, alpha, crate::rewards::DEFAULT_LOG_FLOOR)?;
    Ok(AlphaFairOptimum {
        allocation: vec![share; num_users],
        value: gamma.powi(horizon as i32 - 1) * num_users as f64 * f,
        integral: (num_channels * horizon).is_multiple_of(num_users),
        degenerate: alpha == 0.0,
        lambda: share.powf(-alpha),
    })
}

/// Per-slot per-user rewards `(SPE, random access)` in the many-user limit.
///
/// At the competitive equilibrium about `N/K` users share each channel and
/// each transmits with probability `1 - eps`, giving `(1-eps) eps^(N/K - 1)`.
/// Random access with attempt probability `K/N` on a random channel gives
/// about `K e^-1 / N`.
pub fn competitive_spe_reward_comparison(
    num_users: usize,
    num_channels: usize,
    eps: f64,
) -> Result<(f64, f64)> {
    if num_channels == 0 || num_users < num_channels {
        return Err(Error::Domain(format!(
            "need N >= K >= 1 (got N = {num_users}, K = {num_channels})"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps = {eps} must lie in (0, 1)")));
    }
    let ratio = num_users as f64 / num_channels as f64;
    let spe = (1.0 - eps) * eps.powf(ratio - 1.0);
    let random = num_channels as f64 * (-1.0f64).exp() / num_users as f64;
    Ok((spe, random))
}

/// Named equilibrium profiles from the competitive and cooperative analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Template {
    /// `N <= K`: every user keeps its own channel and always transmits.
    OrthogonalFew,
    /// `N > K`: user `n` always transmits on channel `(n mod K) + 1`.
    PersistentCrowd,
    /// `N > K`: channels rotate among users so each slot has `K` distinct transmitters.
    RotatingCompetitive,
    /// Sum-rate cooperative game with the same collision-free rotation.
    RotatingSumRate,
    /// `alpha > 0` cooperative game with `K T / N` whole slots per user.
    RotatingFair,
}

impl Template {
    pub const ALL: [Template; 5] = [
        Template::OrthogonalFew,
        Template::PersistentCrowd,
        Template::RotatingCompetitive,
        Template::RotatingSumRate,
        Template::RotatingFair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::OrthogonalFew => "thm1.1",
            Template::PersistentCrowd => "thm1.2",
            Template::RotatingCompetitive => "thm2",
            Template::RotatingSumRate => "thm3.1",
            Template::RotatingFair => "thm3.2",
        }
    }

    /// Reward the template is an equilibrium for.
    pub fn reward(self, alpha: f64) -> RewardSpec {
        match self {
            Template::OrthogonalFew | Template::PersistentCrowd | Template::RotatingCompetitive => {
                RewardSpec::competitive()
            }
            Template::RotatingSumRate => RewardSpec::alpha_fair(0.0),
            Template::RotatingFair => RewardSpec::alpha_fair(alpha),
        }
    }

    /// Whether the template promises Pareto optimality in addition to equilibrium.
    pub fn claims_pareto(self) -> bool {
        matches!(
            self,
            Template::RotatingCompetitive | Template::RotatingSumRate | Template::RotatingFair
        )
    }

    /// Whether the template promises a subgame-perfect equilibrium.
    pub fn claims_spe(self) -> bool {
        !matches!(self, Template::RotatingCompetitive)
    }

    /// The template profile for `N` users, `K` channels and horizon `T`.
    pub fn profile(
        self,
        num_users: usize,
        num_channels: usize,
        horizon: usize,
    ) -> Result<PureProfile> {
        let (n, k, t) = (num_users, num_channels, horizon);
        if n == 0 || k == 0 || t == 0 {
            return Err(Error::Domain("N, K and T must be at least 1".into()));
        }
        let requirement = match self {
            Template::OrthogonalFew => (n <= k).then_some(()).ok_or("N <= K"),
            Template::PersistentCrowd | Template::RotatingCompetitive => {
                (n > k).then_some(()).ok_or("N > K")
            }
            Template::RotatingSumRate => (n >= k).then_some(()).ok_or("N >= K"),
            Template::RotatingFair => (n >= k && (k * t) % n == 0)
                .then_some(())
                .ok_or("N >= K and K T / N whole"),
        };
        requirement.map_err(|need| {
            Error::Domain(format!(
                "{} needs {need} (got N = {n}, K = {k}, T = {t})",
                self.name()
            ))
        })?;
        let actions = match self {
            Template::OrthogonalFew => (0..n).map(|u| vec![Action::channel(u + 1); t]).collect(),
            Template::PersistentCrowd => (0..n)
                .map(|u| vec![Action::channel(u % k + 1); t])
                .collect(),
            _ => {
                // slot s gives channel c to user (s K + c) mod N
                let mut rows = vec![vec![Action::IDLE; t]; n];
                for s in 0..t {
                    for c in 0..k {
                        rows[(s * k + c) % n][s] = Action::channel(c + 1);
                    }
                }
                rows
            }
        };
        PureProfile::new(actions)
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Template> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown template {s:?} (expected thm1.1, thm1.2, thm2, thm3.1 or thm3.2)"
                ))
            })
    }
}

/// All verdicts for one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub rewards: Vec<f64>,
    pub nash: EquilibriumVerdict,
    pub spe: EquilibriumVerdict,
    /// `None` when full enumeration exceeds the budget.
    pub pareto: Option<bool>,
}

/// Rewards, Nash and SPE verdicts, plus Pareto optimality when affordable.
pub fn verify_profile(profile: &PureProfile, spec: &GameSpec) -> Result<ProfileReport> {
    let pareto = match is_pareto(profile, spec) {
        Ok(p) => Some(p),
        Err(Error::Budget { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ProfileReport {
        rewards: profile_rewards(profile, spec)?,
        nash: is_nash(profile, spec)?,
        spe: is_spe_openloop(profile, spec)?,
        pareto,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn competitive(n: usize, k: usize, t: usize) -> GameSpec {
        GameSpec::new(n, k, t, RewardSpec::competitive())
    }

    fn profile(rows: &[&[usize]], k: usize) -> PureProfile {
        let rows: Vec<Vec<usize>> = rows.iter().map(|r| r.to_vec()).collect();
        PureProfile::from_indices(&rows, k).unwrap()
    }

    #[test]
    fn orthogonal_users_collect_every_slot() {
        let p = profile(&[&[1, 1, 1], &[2, 2, 2]], 2);
        assert_eq!(
            profile_rewards(&p, &competitive(2, 2, 3)).unwrap(),
            vec![3.0, 3.0]
        );
    }

    #[test]
    fn persistent_collision_earns_nothing() {
        let p = profile(&[&[1, 1], &[1, 1]], 1);
        assert_eq!(
            profile_rewards(&p, &competitive(2, 1, 2)).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn full_utilization_total() {
        let gamma = 0.9;
        let spec = GameSpec::new(3, 2, 4, RewardSpec::competitive().with_gamma(gamma));
        let p = Template::RotatingCompetitive.profile(3, 2, 4).unwrap();
        let total: f64 = profile_rewards(&p, &spec).unwrap().iter().sum();
        let expected = 2.0 * (0..4).map(|t| gamma.powi(t)).sum::<f64>();
        assert!((total - expected).abs() < 1e-12);
    }

    #[test]
    fn nash_examples() {
        let spec = competitive(2, 2, 2);
        assert!(
            is_nash(&Template::OrthogonalFew.profile(2, 2, 2).unwrap(), &spec)
                .unwrap()
                .holds
        );

        let crowd = profile(&[&[1, 1], &[1, 1], &[2, 2]], 2);
        assert!(is_nash(&crowd, &competitive(3, 2, 2)).unwrap().holds);

        let v = is_nash(&profile(&[&[1], &[0]], 2), &competitive(2, 2, 1)).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        assert_eq!(w.user, 1);
        assert_eq!(w.actions, vec![Action::channel(2)]);
        assert_eq!((w.original_reward, w.deviation_reward), (0.0, 1.0));
    }

    #[test]
    fn spe_examples() {
        let spec = competitive(2, 2, 3);
        assert!(
            is_spe_openloop(&Template::OrthogonalFew.profile(2, 2, 3).unwrap(), &spec)
                .unwrap()
                .holds
        );
        let sumrate = GameSpec::new(3, 2, 3, RewardSpec::alpha_fair(0.0));
        let p = Template::RotatingSumRate.profile(3, 2, 3).unwrap();
        assert!(is_spe_openloop(&p, &sumrate).unwrap().holds);
    }

    #[test]
    fn pareto_examples() {
        let p = Template::RotatingCompetitive.profile(3, 2, 2).unwrap();
        assert!(is_pareto(&p, &competitive(3, 2, 2)).unwrap());
        assert!(!is_pareto(&PureProfile::silent(2, 2), &competitive(2, 2, 2)).unwrap());
        let tdma = profile(&[&[1, 0], &[0, 1]], 1);
        let fair = GameSpec::new(2, 1, 2, RewardSpec::alpha_fair(1.0));
        assert!(is_pareto(&tdma, &fair).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        let spec = competitive(3, 2, 3).with_budget(100);
        let p = Template::RotatingCompetitive.profile(3, 2, 3).unwrap();
        assert!(matches!(
            is_pareto(&p, &spec),
            Err(Error::Budget {
                required: 19683,
                budget: 100
            })
        ));
        assert!(matches!(pareto_front(&spec), Err(Error::Budget { .. })));
        assert!(matches!(
            is_nash(&p, &spec.clone().with_budget(80)),
            Err(Error::Budget { required: 81, .. })
        ));
        assert!(is_nash(&p, &spec.with_budget(81)).is_ok());
    }

    #[test]
    fn front_of_two_user_single_slot_game() {
        let front = pareto_front(&competitive(2, 1, 1)).unwrap();
        assert_eq!(front, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn alpha_fair_optimum_examples() {
        let o = alpha_fair_optimum(4, 2, 10, 1.0, 1.0).unwrap();
        assert_eq!(o.allocation, vec![5.0; 4]);
        assert!(o.integral && !o.degenerate);
        assert!((o.value - 4.0 * 5f64.ln()).abs() < 1e-12);
        assert!((o.lambda - 0.2).abs() < 1e-15);

        let o = alpha_fair_optimum(2, 2, 3, 0.0, 1.0).unwrap();
        assert_eq!(o.allocation, vec![3.0, 3.0]);
        assert!(o.degenerate);
        assert_eq!(o.value, 6.0);
    }

    #[test]
    fn reward_comparison_examples() {
        let (spe, _) = competitive_spe_reward_comparison(3, 3, 0.1).unwrap();
        assert!((spe - 0.9).abs() < 1e-15);
        let (spe, random) = competitive_spe_reward_comparison(20, 2, 0.1).unwrap();
        assert!((spe - 0.9e-9).abs() < 1e-20);
        assert!((random - 2.0 * (-1.0f64).exp() / 20.0).abs() < 1e-15);
        assert!(spe / random < 1e-7);
        assert!(competitive_spe_reward_comparison(1, 2, 0.1).is_err());
        assert!(competitive_spe_reward_comparison(2, 2, 1.0).is_err());
    }

    #[test]
    fn template_preconditions() {
        assert!(Template::OrthogonalFew.profile(3, 2, 2).is_err());
        assert!(Template::PersistentCrowd.profile(2, 2, 2).is_err());
        assert!(Template::RotatingFair.profile(4, 2, 3).is_err());
        assert_eq!(
            "thm3.2".parse::<Template>().unwrap(),
            Template::RotatingFair
        );
        assert!("thm4".parse::<Template>().is_err());
    }

    #[test]
    fn fair_rotation_shares_equally() {
        let p = Template::RotatingFair.profile(4, 2, 10).unwrap();
        for u in 0..4 {
            assert_eq!(p.row(u).iter().filter(|a| a.is_transmit()).count(), 5);
        }
        let success = success_matrix(&p, 2);
        assert_eq!(success.iter().flatten().filter(|s| **s).count(), 20);
    }

    #[test]
    fn profile_text_round_trip() {
        let p = profile(&[&[1, 0, 2], &[0, 2, 1]], 2);
        assert_eq!(p.to_string().parse::<PureProfile>().unwrap(), p);
        assert!("1 2\n1".parse::<PureProfile>().is_err());
        assert!("1 x".parse::<PureProfile>().is_err());
        let spec = competitive(2, 1, 3);
        assert!(matches!(profile_rewards(&p, &spec), Err(Error::Domain(_))));
    }

    #[test]
    fn pure_profile_as_mixed() {
        let p = profile(&[&[1, 1], &[2, 0], &[2, 1]], 2);
        for reward in [
            RewardSpec::competitive().with_gamma(0.8),
            RewardSpec::alpha_fair(1.0),
        ] {
            let spec = GameSpec::new(3, 2, 2, reward);
            let pure = profile_rewards(&p, &spec).unwrap();
            let mixed = mixed_profile_rewards(&MixedProfile::from_pure(&p, 2), &spec).unwrap();
            for (a, b) in pure.iter().zip(&mixed) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
