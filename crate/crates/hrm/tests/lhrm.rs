//! End-to-end runs of the interleaved learner.

use hrm::envs::{task_spec, CraftWorldConfig, EnvConfig, Layout, TaskEnv};
use hrm::induction::check_validity;
use hrm::lhrm::{collect_goal_traces, compress_labels, lhrm_run, Exploration, LhrmConfig};
use hrm::machines::Verdict;
use hrm::options::{Agent, LearnParams, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn op(seed: u64) -> EnvConfig {
    EnvConfig::Craftworld(CraftWorldConfig { layout: Layout::Op, seed, max_steps: 1000 })
}

#[test]
fn bucket_sugar_milkbucket_are_learned() {
    let mut cfg = LhrmConfig::new(&["Bucket", "Sugar", "MilkBucket"], op(0));
    cfg.max_episodes = 150_000;
    cfg.stop_on_convergence = true;
    let r = lhrm_run(cfg.clone()).unwrap();
    assert!(r.halted.is_none(), "{:?}", r.halted);
    assert!(r.all_learned());
    for e in &r.bank.entries {
        let h = r.hrm(&e.name).unwrap();
        assert!(h.validate().is_valid());
        assert!(e.examples.iter().all(|t| check_validity(&h, t)), "{}", e.name);
    }
    assert_eq!(r.hrm("MilkBucket").unwrap().height().unwrap(), 2);

    assert_eq!(r.levels.len(), 1);
    let unlock = &r.levels[0];
    assert!(unlock.min_return > cfg.threshold);
    assert!(r.episodes.iter().filter(|e| e.task == "MilkBucket").all(|e| e.episode > unlock.episode));
    let before: Vec<_> = r.evals.iter().filter(|e| e.episode == unlock.episode).collect();
    assert_eq!(before.len(), 2);
    assert!(before.iter().all(|e| e.running > cfg.threshold));

    let again = lhrm_run(cfg).unwrap();
    assert_eq!(again.episodes, r.episodes);
    assert_eq!(again.curriculum, r.curriculum);
}

#[test]
fn stored_traces_keep_their_verdict_under_compression() {
    let mut cfg = LhrmConfig::new(&["Bucket", "Sugar"], op(3));
    cfg.max_episodes = 3_000;
    let r = lhrm_run(cfg).unwrap();
    for e in &r.bank.entries {
        let h = r.hrm(&e.name).unwrap();
        for t in &e.examples {
            let c = compress_labels(&t.labels);
            assert_eq!(h.classify(&c).unwrap(), h.classify(&t.labels).unwrap());
        }
    }
}

/// Episodes needed to observe one MilkBucket goal in FRL after training
/// Bucket and Sugar policies on their reference hierarchies.
fn episodes_to_goal(mode: Exploration, seed: u64) -> usize {
    let env = EnvConfig::Craftworld(CraftWorldConfig { layout: Layout::Frl, seed, max_steps: 1000 });
    let mut agent = Agent::new(LearnParams::default(), seed);
    let mut lower = Vec::new();
    for name in ["Bucket", "Sugar"] {
        let spec = task_spec(name, true).unwrap();
        let mut e = TaskEnv::new(env.build().unwrap(), spec.reference.clone()).unwrap();
        for _ in 0..2000 {
            agent.run_episode(&mut e, &spec.reference, Mode::Train).unwrap();
        }
        lower.push(spec.reference);
    }
    let target = task_spec("MilkBucket", true).unwrap();
    let mut e = TaskEnv::new(env.build().unwrap(), target.reference.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let got = collect_goal_traces(&mut agent, &mut e, &lower, 1, mode, 200, 5_000, &mut rng).unwrap();
    for t in &got.traces {
        assert_eq!(target.reference.classify(&t.labels).unwrap(), Verdict::Accept);
    }
    got.episodes
}

#[test]
fn options_find_goals_faster_than_actions() {
    let seeds = [1u64, 2, 3, 4, 5];
    let opts: usize = seeds.iter().map(|&s| episodes_to_goal(Exploration::Options, s)).sum();
    let acts: usize = seeds.iter().map(|&s| episodes_to_goal(Exploration::Actions, s)).sum();
    eprintln!("options {opts} actions {acts}");
    assert!(opts < acts);
}
