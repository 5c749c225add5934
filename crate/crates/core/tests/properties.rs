//! Property tests for the invariants of each module.

use dqsa::agent::{policy_distribution, Agent, PolicyParams};
use dqsa::baseline::aloha_throughput_analytic;
use dqsa::env::{Action, ChannelFractions, ChannelUse, Env, EnvConfig};
use dqsa::gametheory::{
    alpha_fair_optimum, is_nash, is_pareto, is_spe_openloop, mixed_profile_rewards,
    profile_rewards, GameSpec, MixedProfile, PureProfile,
};
use dqsa::harness::metrics::WindowMetrics;
use dqsa::nn::{
    argmax, checkpoint, dueling_combine, forward, Architecture, LstmState, NetworkParams,
};
use dqsa::rewards::{
    accumulated_reward, alpha_fair_utility, cooperative_terminal_reward, RewardSpec,
};
use dqsa::seeding;
use dqsa::trainer::{build_targets, collect_episode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random clique partition of `n` users and a random action table.
fn random_episode(
    n: usize,
    k: usize,
    t: usize,
    cliques: usize,
    seed: u64,
) -> (EnvConfig, Vec<Vec<Action>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = vec![Vec::new(); cliques.min(n)];
    for u in 0..n {
        let c = if u < parts.len() {
            u
        } else {
            rng.gen_range(0..parts.len())
        };
        parts[c].push(u);
    }
    let config = EnvConfig::new(n, k, t).with_cliques(parts);
    let actions = (0..t)
        .map(|_| {
            (0..n)
                .map(|_| Action::from_index(rng.gen_range(0..=k)))
                .collect()
        })
        .collect();
    (config, actions)
}

fn play(config: &EnvConfig, actions: &[Vec<Action>]) -> Env {
    let mut env = Env::reset(config.clone()).unwrap();
    for a in actions {
        env.step(a).unwrap();
    }
    env
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn successes_per_clique_slot_are_bounded(n in 1usize..8, k in 1usize..4, t in 1usize..20, c in 1usize..4, seed: u64) {
        let (config, actions) = random_episode(n, k, t, c, seed);
        let env = play(&config, &actions);
        for o in env.outcome_log() {
            for clique in env.cliques() {
                let wins = clique.iter().filter(|&&u| o.success[u]).count();
                prop_assert!(wins <= k.min(clique.len()));
            }
        }
    }

    #[test]
    fn single_channel_fractions_sum_to_one(n in 1usize..8, t in 1usize..40, seed: u64) {
        let (config, actions) = random_episode(n, 1, t, 1, seed);
        let env = play(&config, &actions);
        let f = ChannelFractions::from_outcomes(env.outcome_log());
        prop_assert!((f.throughput + f.idle + f.collision - 1.0).abs() < 1e-12);
        let m = WindowMetrics::from_outcomes(env.outcome_log(), n);
        prop_assert!((m.throughput + m.idle_frac + m.collision_frac - 1.0).abs() < 1e-12);
        prop_assert!(m.user_rates.iter().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn replay_is_deterministic_and_silent_users_score_nothing(n in 2usize..6, k in 1usize..3, t in 1usize..20, seed: u64) {
        let (config, mut actions) = random_episode(n, k, t, 1, seed);
        for slot in actions.iter_mut() {
            slot[0] = Action::IDLE;
        }
        let a = play(&config, &actions);
        let b = play(&config, &actions);
        prop_assert_eq!(a.outcome_log(), b.outcome_log());
        prop_assert_eq!(a.success_counts()[0], 0);
    }

    #[test]
    fn competitive_returns_are_bounded(n in 1usize..6, k in 1usize..3, t in 1usize..20, gamma in 0.0f64..=1.0, seed: u64) {
        let (config, actions) = random_episode(n, k, t, 1, seed);
        let env = play(&config, &actions);
        let spec = RewardSpec::competitive().with_gamma(gamma);
        let rewards = spec.credited_rewards(env.outcome_log(), n);
        let cap: f64 = (0..t).map(|i| gamma.powi(i as i32)).sum();
        let returns: Vec<f64> = rewards.iter().map(|r| accumulated_reward(r, gamma)).collect();
        prop_assert!(returns.iter().all(|&r| r <= cap + 1e-9));
        let total: f64 = returns.iter().sum();
        prop_assert!(total <= k as f64 * cap + 1e-9);
        let perfect = env.outcome_log().iter().all(|o| o.channel_use.iter().all(|c| matches!(c, ChannelUse::Success(_))));
        if perfect {
            prop_assert!((total - k as f64 * cap).abs() < 1e-9);
        }
    }

    #[test]
    fn utility_is_increasing(x in 1e-6f64..100.0, dx in 1e-6f64..10.0, alpha in 0.0f64..4.0) {
        let lo = alpha_fair_utility(x, alpha, 1e-9).unwrap();
        let hi = alpha_fair_utility(x + dx, alpha, 1e-9).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn terminal_reward_is_symmetric(counts in prop::collection::vec(0u64..50, 1..6), alpha in 0.0f64..3.0, seed: u64) {
        let mut shuffled = counts.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let a = cooperative_terminal_reward(&counts, alpha, 1e-2);
        let b = cooperative_terminal_reward(&shuffled, alpha, 1e-2);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn dueling_preserves_argmax(v in -100.0f64..100.0, a in prop::collection::vec(-10.0f64..10.0, 2..5)) {
        prop_assert_eq!(argmax(&dueling_combine(v, &a)), argmax(&a));
    }

    #[test]
    fn forward_is_pure(k in 1usize..4, seed: u64) {
        let arch = Architecture::new(k).with_widths(3, 4, 3);
        let params = NetworkParams::init(arch, &mut seeding::stream(seed, &[]));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..arch.observation_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let state = LstmState::zeros(4);
        prop_assert_eq!(forward(&params, &x, &state).unwrap(), forward(&params, &x, &state).unwrap());
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(k in 1usize..4, hash: u64, seed: u64) {
        let params = NetworkParams::init(Architecture::new(k).with_widths(3, 5, 2), &mut seeding::stream(seed, &[]));
        let back = checkpoint::decode(&checkpoint::encode(&params, hash)).unwrap();
        prop_assert_eq!(back.config_hash, hash);
        for (a, b) in params.arrays().iter().zip(back.params.arrays()) {
            let bits_a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn policy_is_a_distribution_with_floor(q in prop::collection::vec(-50.0f64..50.0, 2..5), alpha in 0.0f64..=1.0, beta in 0.0f64..100.0) {
        let p = policy_distribution(&q, PolicyParams::new(alpha, beta).unwrap()).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let floor = alpha / q.len() as f64;
        prop_assert!(p.iter().all(|&x| x >= floor - 1e-12));
    }

    #[test]
    fn policy_ignores_constant_shifts(q in prop::collection::vec(-5.0f64..5.0, 2..5), c in -100.0f64..100.0, alpha in 0.0f64..=1.0, beta in 0.0f64..20.0) {
        let policy = PolicyParams::new(alpha, beta).unwrap();
        let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
        let a = policy_distribution(&q, policy).unwrap();
        let b = policy_distribution(&shifted, policy).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn raising_q_never_lowers_its_probability(q in prop::collection::vec(-5.0f64..5.0, 2..5), bump in 0.0f64..5.0, alpha in 0.0f64..=1.0, beta in 0.0f64..20.0) {
        let policy = PolicyParams::new(alpha, beta).unwrap();
        let mut raised = q.clone();
        raised[0] += bump;
        let before = policy_distribution(&q, policy).unwrap()[0];
        let after = policy_distribution(&raised, policy).unwrap()[0];
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn agents_replay_identically(k in 1usize..3, seed: u64, acks in prop::collection::vec(any::<bool>(), 1..20)) {
        let params = NetworkParams::init(Architecture::new(k).with_widths(3, 4, 3), &mut seeding::stream(seed, &[]));
        let policy = PolicyParams::new(0.1, 3.0).unwrap();
        let run = || {
            let mut agent = Agent::new(0, 4, vec![1.0; k]);
            let mut rng = seeding::stream(seed, &[7]);
            acks.iter()
                .map(|&ack| {
                    let d = agent.act(&params, policy, &mut rng).unwrap();
                    agent.observe(d.action, ack);
                    d.action
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn one_target_entry_per_user_slot(n in 1usize..4, k in 1usize..3, t in 1usize..8, seed: u64) {
        let params = NetworkParams::init(Architecture::new(k).with_widths(3, 4, 3), &mut seeding::stream(seed, &[]));
        let policy = PolicyParams::new(0.2, 1.0).unwrap();
        let trace = collect_episode(&EnvConfig::new(n, k, t), &params, policy, &RewardSpec::competitive(), &mut seeding::stream(seed, &[1])).unwrap();
        let batch = build_targets(&trace, &params, &params, 1.0).unwrap();
        for (u, mask) in batch.mask.iter().enumerate() {
            for (s, row) in mask.iter().enumerate() {
                prop_assert_eq!(row.iter().filter(|&&m| m).count(), 1);
                prop_assert!(row[trace.actions[u][s].index()]);
            }
        }
    }

    #[test]
    fn aloha_band(n in 3usize..=11) {
        let v = aloha_throughput_analytic(n, 1.0 / n as f64);
        prop_assert!(v > 0.385 && v <= 0.45);
    }
}

/// Every pure profile of a tiny game, by brute force.
fn all_profiles(n: usize, k: usize, t: usize) -> Vec<PureProfile> {
    let cells = n * t;
    let total = (k + 1).pow(cells as u32);
    (0..total)
        .map(|mut code| {
            let mut rows = vec![vec![0usize; t]; n];
            for cell in 0..cells {
                rows[cell / t][cell % t] = code % (k + 1);
                code /= k + 1;
            }
            PureProfile::from_indices(&rows, k).unwrap()
        })
        .collect()
}

#[test]
fn pareto_profiles_use_every_channel_slot() {
    for (n, k, t) in [(2, 1, 2), (3, 2, 1), (2, 2, 2), (3, 1, 2)] {
        let spec = GameSpec::new(n, k, t, RewardSpec::competitive());
        for p in all_profiles(n, k, t) {
            if is_pareto(&p, &spec).unwrap() {
                let total: f64 = profile_rewards(&p, &spec).unwrap().iter().sum();
                assert_eq!(total, (k * t) as f64, "{p}");
            }
        }
    }
}

#[test]
fn spe_implies_nash() {
    for (n, k, t) in [(2, 1, 2), (2, 2, 2), (3, 1, 2)] {
        for reward in [
            RewardSpec::competitive(),
            RewardSpec::alpha_fair(0.0),
            RewardSpec::alpha_fair(1.0),
        ] {
            let spec = GameSpec::new(n, k, t, reward);
            for p in all_profiles(n, k, t) {
                if is_spe_openloop(&p, &spec).unwrap().holds {
                    assert!(is_nash(&p, &spec).unwrap().holds, "{p}");
                }
            }
        }
    }
}

#[test]
fn alpha_fair_optimum_bounds_every_profile() {
    for (n, k, t) in [(2, 1, 2), (3, 1, 3), (2, 2, 2)] {
        for alpha in [0.5, 1.0, 2.0] {
            let opt = alpha_fair_optimum(n, k, t, alpha, 1.0).unwrap();
            let share = opt.allocation[0];
            assert!(opt.allocation.iter().all(|&x| (x - share).abs() < 1e-12));
            let spec = GameSpec::new(n, k, t, RewardSpec::alpha_fair(alpha));
            for p in all_profiles(n, k, t) {
                let r = profile_rewards(&p, &spec).unwrap()[0];
                assert!(r <= opt.value + 1e-9, "{p}: {r} > {}", opt.value);
            }
        }
    }
}

/// Expected rewards of a mixed profile by enumerating every joint outcome.
fn enumerate_mixed(profile: &MixedProfile, spec: &GameSpec) -> Vec<f64> {
    let (n, k, t) = (spec.num_users, spec.num_channels, spec.horizon);
    let mut expected = vec![0.0; n];
    for pure in all_profiles(n, k, t) {
        let mut prob = 1.0;
        for u in 0..n {
            for s in 0..t {
                prob *= profile.probs[u][s][pure.action(u, s).index()];
            }
        }
        if prob > 0.0 {
            for (e, r) in expected
                .iter_mut()
                .zip(profile_rewards(&pure, spec).unwrap())
            {
                *e += prob * r;
            }
        }
    }
    expected
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mixed_rewards_match_outcome_enumeration(n in 1usize..=3, k in 1usize..=2, t in 1usize..=2, alpha in prop::sample::select(vec![-1.0, 0.0, 1.0, 2.0]), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs = (0..n)
            .map(|_| {
                (0..t)
                    .map(|_| {
                        let w: Vec<f64> = (0..=k).map(|_| rng.gen_range(0.0..1.0)).collect();
                        let s: f64 = w.iter().sum();
                        w.iter().map(|x| x / s).collect()
                    })
                    .collect()
            })
            .collect();
        let profile = MixedProfile { probs };
        let reward = if alpha < 0.0 { RewardSpec::competitive() } else { RewardSpec::alpha_fair(alpha) };
        let spec = GameSpec::new(n, k, t, reward.with_gamma(0.9));
        let fast = mixed_profile_rewards(&profile, &spec).unwrap();
        let slow = enumerate_mixed(&profile, &spec);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
