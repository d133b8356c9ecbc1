//! Sparse episode reward with communicative effort.
//!
//! ```text
//! R_game    = 1 - 0.9 * T / T_max
//! R_guide   = 1 - 0.9 * E_guide / T_max
//! R         = (R_game + R_guide) / 2 + R_outcome,   R_outcome = +1 (correct piece) or -1
//! ```

use serde::{Deserialize, Serialize};

use crate::language::IntentKind;
use crate::scalar::Scalar;

/// Episode step limit.
pub const T_MAX: usize = 30;

/// Assumed effort of producing an intent of the given kind.
pub fn effort<F: Scalar>(kind: IntentKind) -> F {
    F::lit(match kind {
        IntentKind::Silence => 0.0,
        IntentKind::Confirm | IntentKind::Decline => 1.0,
        IntentKind::Directive => 1.1,
        IntentKind::Reference => 1.2,
    })
}

fn scaled_penalty<F: Scalar>(amount: F, t_max: usize) -> F {
    F::one() - F::lit(0.9) * (amount / F::lit(t_max as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown<F> {
    pub game: F,
    pub guide: F,
    pub effort: F,
    pub outcome: F,
    pub total: F,
}

impl<F: Scalar> RewardBreakdown<F> {
    pub fn compute(episode_length: usize, effort: F, t_max: usize, success: bool) -> Self {
        let game = scaled_penalty(F::lit(episode_length as f64), t_max);
        let guide = scaled_penalty(effort, t_max);
        let outcome = if success { F::one() } else { -F::one() };
        let total = (game + guide) / F::lit(2.0) + outcome;
        RewardBreakdown { game, guide, effort, outcome, total }
    }
}

/// Best achievable mean reward when episodes take `mean_len` steps and the guide spends no
/// effort: `((1 - 0.9 * mean_len / 30) + 1) / 2 + 1`.
pub fn reward_upper_bound<F: Scalar>(mean_len: F) -> F {
    let game = scaled_penalty(mean_len, T_MAX);
    (game + F::one()) / F::lit(2.0) + F::one()
}
