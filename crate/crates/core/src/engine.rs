//! Episode loop: guide intent, verbalization, follower reaction, gripper update, termination
//! and reward.

use serde::{Deserialize, Serialize};

use crate::domain::{Coord, Gripper, PieceId};
use crate::error::{Error, Result};
use crate::follower::{FollowerConfig, FollowerDecision, FollowerState};
use crate::language::{parse, verbalize, IntentAction, IntentKind, VerbalContext};
use crate::planner::{bfs_path, MoveAction};
use crate::reward::{effort, RewardBreakdown, T_MAX};
use crate::taskgen::{sha256_hex, Split, Task};
use crate::view::{render_follower_view, render_guide_view, FollowerView, GuideView};

/// Seeds of the stochastic parts of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Seeds {
    pub follower: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step number.
    pub t: usize,
    pub intent: IntentAction,
    pub utterance: String,
    pub parsed: IntentKind,
    pub follower: FollowerDecision,
    /// Gripper position after the step.
    pub gripper: Coord,
    pub effort: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub task_id: String,
    pub split: Split,
    pub follower_config: FollowerConfig,
    pub seeds: Seeds,
    pub steps: Vec<StepRecord>,
    pub taken: Option<PieceId>,
    pub success: bool,
    pub rewards: RewardBreakdown<f64>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn intents(&self) -> impl Iterator<Item = IntentAction> + '_ {
        self.steps.iter().map(|s| s.intent)
    }

    /// Effort recomputed from the recorded intents.
    pub fn effort_from_intents(&self) -> f64 {
        self.intents().map(|i| effort::<f64>(i.kind())).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// SHA-256 of the JSON serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_json()?.as_bytes()))
    }
}

/// Per-step info returned to the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub success: bool,
    pub effort: f64,
    pub episode_length: usize,
    pub utterance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewards: Option<RewardBreakdown<f64>>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: GuideView<f32>,
    /// Zero before the terminal step, the episode reward on it.
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// State of one running episode.
#[derive(Debug, Clone)]
pub struct Episode {
    task: Task,
    gripper: Gripper,
    follower: FollowerState,
    seeds: Seeds,
    t: usize,
    t_max: usize,
    effort: f64,
    taken: Option<PieceId>,
    terminal: bool,
    steps: Vec<StepRecord>,
    rewards: Option<RewardBreakdown<f64>>,
}

impl Episode {
    /// Starts an episode with the gripper at the board centre.
    pub fn reset(task: &Task, config: FollowerConfig, seeds: Seeds) -> Result<(Episode, GuideView<f32>)> {
        task.validate()?;
        config.validate()?;
        let ep = Episode {
            task: task.clone(),
            gripper: Gripper::centered(task.board.dims()),
            follower: FollowerState::new(config, seeds.follower),
            seeds,
            t: 0,
            t_max: T_MAX,
            effort: 0.0,
            taken: None,
            terminal: false,
            steps: Vec::new(),
            rewards: None,
        };
        let obs = ep.guide_view()?;
        Ok((ep, obs))
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn gripper(&self) -> Coord {
        self.gripper.pos
    }

    pub fn follower(&self) -> &FollowerState {
        &self.follower
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn effort(&self) -> f64 {
        self.effort
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn last_step(&self) -> Option<&StepRecord> {
        self.steps.last()
    }

    pub fn rewards(&self) -> Option<&RewardBreakdown<f64>> {
        self.rewards.as_ref()
    }

    pub fn guide_view<F: crate::Scalar>(&self) -> Result<GuideView<F>> {
        render_guide_view(&self.task.board, &self.gripper, self.task.target_id)
    }

    pub fn follower_view(&self) -> FollowerView {
        render_follower_view(&self.task.board, &self.gripper)
    }

    pub fn on_target(&self) -> bool {
        self.task.board.occupant(self.gripper.pos) == Some(self.task.target_id)
    }

    /// Advances the episode by one guide intent.
    pub fn step(&mut self, intent: IntentAction) -> Result<StepOutcome> {
        if self.terminal {
            return Err(Error::EpisodeTerminal);
        }
        let ctx = VerbalContext { board: &self.task.board, gripper: self.gripper.pos, target_id: self.task.target_id };
        let utterance = verbalize(intent, &ctx)?;
        let cost = effort::<f64>(intent.kind());
        self.effort += cost;

        let parsed = parse(&utterance);
        let view = self.follower_view();
        let decision = self.follower.step(&parsed, &view);
        match decision.action {
            MoveAction::Take => {
                if let Some(id) = self.task.board.occupant(self.gripper.pos) {
                    self.taken = Some(id);
                }
            }
            mv if mv.is_move() => {
                let next = mv.apply(self.gripper.pos);
                if self.task.board.contains(next) {
                    self.gripper.pos = next;
                }
            }
            _ => {}
        }
        self.t += 1;
        self.steps.push(StepRecord {
            t: self.t,
            intent,
            utterance: utterance.surface.clone(),
            parsed: parsed.kind(),
            follower: decision,
            gripper: self.gripper.pos,
            effort: cost,
        });

        self.terminal = self.taken.is_some() || self.t >= self.t_max;
        let success = self.taken == Some(self.task.target_id);
        let mut reward = 0.0;
        if self.terminal {
            let r = RewardBreakdown::compute(self.t, self.effort, self.t_max, success);
            reward = r.total;
            self.rewards = Some(r);
        }
        Ok(StepOutcome {
            observation: self.guide_view()?,
            reward,
            done: self.terminal,
            info: StepInfo {
                success,
                effort: self.effort,
                episode_length: self.t,
                utterance: utterance.surface,
                rewards: self.rewards,
            },
        })
    }

    /// Trace of a finished episode.
    pub fn trace(&self) -> Result<EpisodeTrace> {
        let rewards = self.rewards.ok_or_else(|| Error::Usage("episode has not finished".into()))?;
        Ok(EpisodeTrace {
            task_id: self.task.task_id.clone(),
            split: self.task.split,
            follower_config: *self.follower.config(),
            seeds: self.seeds,
            steps: self.steps.clone(),
            taken: self.taken,
            success: self.taken == Some(self.task.target_id),
            rewards,
        })
    }
}

/// Steps of the shortest solution: moves from the board centre to the nearest target tile plus
/// the final take.
pub fn shortest_path_solver(task: &Task) -> Result<usize> {
    let target = task.board.piece(task.target_id)?;
    let dims = task.board.dims();
    let (_, path) = bfs_path(dims.center(), |c| dims.contains(c), |c| target.covers(c))
        .ok_or_else(|| Error::InvalidTask(format!("{}: target unreachable", task.task_id)))?;
    Ok(path.len() + 1)
}

/// Replays a recorded trace against its task and checks that it reproduces exactly.
pub fn replay(task: &Task, trace: &EpisodeTrace) -> Result<EpisodeTrace> {
    let (mut ep, _) = Episode::reset(task, trace.follower_config, trace.seeds)?;
    for s in &trace.steps {
        ep.step(s.intent)?;
    }
    ep.trace()
}
