//! Runs scripted guides against a split.

use std::thread;

use crate::engine::{Episode, EpisodeTrace, Seeds};
use crate::error::Result;
use crate::follower::FollowerConfig;
use crate::guides::{Guide, GuideKind};
use crate::seed;
use crate::taskgen::Task;

/// Plays one episode to the end.
pub fn run_episode(task: &Task, config: FollowerConfig, seeds: Seeds, guide: &mut dyn Guide) -> Result<EpisodeTrace> {
    let (mut ep, _) = Episode::reset(task, config, seeds)?;
    guide.begin_episode();
    while !ep.is_terminal() {
        let intent = guide.act(&ep);
        ep.step(intent)?;
    }
    ep.trace()
}

/// Follower seed of the `index`-th task of a rollout.
pub fn episode_seeds(seed: u64, index: usize) -> Seeds {
    Seeds { follower: seed::derive(seed, index as u64) }
}

/// Plays every task once, in order. Episode `i` uses `episode_seeds(seed, i)`, so the result does
/// not depend on `threads`.
pub fn rollout(
    tasks: &[Task],
    config: FollowerConfig,
    guide: GuideKind,
    seed: u64,
    threads: usize,
) -> Result<Vec<EpisodeTrace>> {
    let threads = threads.clamp(1, tasks.len().max(1));
    if threads == 1 {
        let mut g = guide.build();
        return tasks
            .iter()
            .enumerate()
            .map(|(i, t)| run_episode(t, config, episode_seeds(seed, i), g.as_mut()))
            .collect();
    }
    let chunk = tasks.len().div_ceil(threads);
    let parts: Vec<Result<Vec<EpisodeTrace>>> = thread::scope(|s| {
        let handles: Vec<_> = tasks
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                s.spawn(move || {
                    let mut g = guide.build();
                    part.iter()
                        .enumerate()
                        .map(|(j, t)| run_episode(t, config, episode_seeds(seed, c * chunk + j), g.as_mut()))
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(tasks.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Worker count used when the caller has no preference.
pub fn default_threads() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}
