//! Scripted guide policies.
//!
//! These run inside the simulator and may look at the full episode state. The oracle guide in
//! particular reads the follower's plan, which a learned guide never sees.

use std::fmt;
use std::str::FromStr;

use crate::domain::Coord;
use crate::engine::Episode;
use crate::error::Error;
use crate::follower::Autonomy;
use crate::language::{Directive, IntentAction};
use crate::planner::MoveAction;
use crate::refexp::PreferenceOrder;

pub trait Guide: Send {
    /// Called before the first step of every episode.
    fn begin_episode(&mut self) {}

    fn act(&mut self, episode: &Episode) -> IntentAction;
}

/// Never says anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct SilentGuide;

impl Guide for SilentGuide {
    fn act(&mut self, _: &Episode) -> IntentAction {
        IntentAction::Silence
    }
}

/// Refers to the target at every step with a fixed preference order.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceGuide {
    pub order: PreferenceOrder,
}

impl Default for ReferenceGuide {
    fn default() -> Self {
        ReferenceGuide { order: PreferenceOrder::CSP }
    }
}

impl Guide for ReferenceGuide {
    fn act(&mut self, _: &Episode) -> IntentAction {
        IntentAction::Reference(self.order)
    }
}

/// Rule-based guide with access to the true target and the follower's plan.
///
/// Refers to the target first, stays silent while the follower makes progress, confirms after
/// a hesitation, declines when an eager follower is about to take a wrong piece, steers with a
/// directive while the target is out of the follower's sight, and asks for the take once the
/// gripper is on the target (unless an eager follower is about to take it anyway).
#[derive(Debug, Clone, Default)]
pub struct OracleGuide {
    last_reference_at: Option<(Coord, u64)>,
}

impl OracleGuide {
    const ORDER: PreferenceOrder = PreferenceOrder::CSP;

    fn distance_to_target(ep: &Episode, c: Coord) -> u32 {
        ep.task().target().tiles.iter().map(|t| t.manhattan(c)).min().unwrap_or(0)
    }

    fn toward_target(ep: &Episode) -> Directive {
        let here = ep.gripper();
        let goal = ep.task().target().tiles.iter().copied().min_by_key(|t| (t.manhattan(here), *t)).unwrap_or(here);
        let (dx, dy) = (goal.x - here.x, goal.y - here.y);
        if dx.abs() >= dy.abs() {
            if dx < 0 {
                Directive::Left
            } else {
                Directive::Right
            }
        } else if dy < 0 {
            Directive::Up
        } else {
            Directive::Down
        }
    }
}

impl Guide for OracleGuide {
    fn begin_episode(&mut self) {
        self.last_reference_at = None;
    }

    fn act(&mut self, ep: &Episode) -> IntentAction {
        let follower = ep.follower();
        let plan = follower.plan();
        let head = plan.actions().next();
        let hesitated = ep.last_step().is_some_and(|s| s.follower.hesitated());
        let eager = follower.config().autonomy == Autonomy::Eager;
        let here = ep.gripper();

        if ep.t() == 0 {
            self.last_reference_at = Some((here, plan.revision));
            return IntentAction::Reference(Self::ORDER);
        }
        if ep.on_target() {
            return match head {
                Some(MoveAction::Take) if hesitated => IntentAction::Confirm,
                Some(MoveAction::Take) => IntentAction::Silence,
                _ => IntentAction::Directive(Directive::Take),
            };
        }
        if eager && head == Some(MoveAction::Take) && ep.task().board.occupant(here).is_some() {
            return IntentAction::Decline;
        }
        let progressing = head.is_some_and(|m| {
            m.is_move() && Self::distance_to_target(ep, m.apply(here)) < Self::distance_to_target(ep, here)
        });
        if progressing {
            return if hesitated { IntentAction::Confirm } else { IntentAction::Silence };
        }
        let visible = ep.task().target().tiles.iter().any(|&t| ep.follower_view().to_view(t).is_some());
        // a repeated reference from the same spot that left the plan unchanged did not help
        let stale = self.last_reference_at == Some((here, plan.revision));
        if visible && !stale {
            self.last_reference_at = Some((here, plan.revision));
            IntentAction::Reference(Self::ORDER)
        } else {
            IntentAction::Directive(Self::toward_target(ep))
        }
    }
}

/// Named guide selection for command lines and experiment files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuideKind {
    Silent,
    Reference(PreferenceOrder),
    Oracle,
}

impl GuideKind {
    pub fn build(self) -> Box<dyn Guide> {
        match self {
            GuideKind::Silent => Box::new(SilentGuide),
            GuideKind::Reference(order) => Box::new(ReferenceGuide { order }),
            GuideKind::Oracle => Box::new(OracleGuide::default()),
        }
    }
}

impl fmt::Display for GuideKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuideKind::Silent => f.write_str("silent"),
            GuideKind::Reference(PreferenceOrder::CSP) => f.write_str("reference"),
            GuideKind::Reference(o) => write!(f, "reference:{o}"),
            GuideKind::Oracle => f.write_str("oracle"),
        }
    }
}

impl FromStr for GuideKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let lower = s.to_ascii_lowercase();
        match lower.split_once(':') {
            None if lower == "silent" => Ok(GuideKind::Silent),
            None if lower == "reference" => Ok(GuideKind::Reference(PreferenceOrder::CSP)),
            None if lower == "oracle" => Ok(GuideKind::Oracle),
            Some(("reference", order)) => order.parse().map(GuideKind::Reference),
            _ => Err(Error::Parse(format!("unknown guide '{s}'"))),
        }
    }
}
