//! Hand-crafted follower: a plan queue executed with decaying confidence, revised by five
//! intent handlers, in a cautious or an eager autonomy mode.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{region_of, Area, Color, Coord, PieceSymbol, Region, Shape, CODE_EMPTY};
use crate::language::{Directive, ParsedIntent};
use crate::planner::{bfs_path, staircase, MoveAction};
use crate::refexp::PropertySet;
use crate::scalar::Scalar;
use crate::view::{FollowerView, FOLLOWER_VIEW_RADIUS};

pub const PLAN_HORIZON: usize = 10;

/// Confidence discounts used in the experiment grid.
pub const PHI_GRID: [f64; 6] = [0.75, 0.85, 0.90, 0.95, 0.97, 0.99];

/// Execution probability of the action `index` steps after the latest plan revision:
/// `max(phi^index, floor)`.
pub fn confidence<F: Scalar>(phi: F, floor: F, index: usize) -> F {
    phi.powi(index as i32).max(floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Autonomy {
    /// Follows instructions only and never takes a piece without a take directive.
    Cautious,
    /// Looks for candidates at every step and takes a matching piece on its own.
    Eager,
}

impl std::str::FromStr for Autonomy {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cautious" => Ok(Autonomy::Cautious),
            "eager" => Ok(Autonomy::Eager),
            _ => Err(crate::Error::Parse(format!("unknown autonomy '{s}'"))),
        }
    }
}

impl std::fmt::Display for Autonomy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Autonomy::Cautious => "cautious",
            Autonomy::Eager => "eager",
        })
    }
}

fn default_floor() -> f64 {
    0.1
}

fn default_horizon() -> usize {
    PLAN_HORIZON
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerConfig {
    pub autonomy: Autonomy,
    pub phi: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_horizon")]
    pub plan_horizon: usize,
}

impl FollowerConfig {
    pub fn new(autonomy: Autonomy, phi: f64) -> Self {
        Self { autonomy, phi, floor: default_floor(), plan_horizon: PLAN_HORIZON }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.phi) || !unit.contains(&self.floor) {
            return Err(crate::Error::Usage(format!(
                "phi and floor must lie in [0, 1] (phi={}, floor={})",
                self.phi, self.floor
            )));
        }
        if self.plan_horizon == 0 {
            return Err(crate::Error::Usage("plan horizon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedStep {
    pub action: MoveAction,
    pub confidence: f64,
}

/// Queue of upcoming actions, each carrying the confidence assigned at the latest revision.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: VecDeque<PlannedStep>,
    /// Incremented whenever the plan is replaced.
    pub revision: u64,
    /// Where the plan leads when it was made to approach something.
    pub goal: Option<Coord>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = MoveAction> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    pub fn confidences(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.confidence)
    }

    /// Gripper position after executing every move in the plan from `from`.
    pub fn endpoint(&self, from: Coord) -> Coord {
        self.actions().fold(from, |c, a| a.apply(c))
    }
}

/// What the follower did in one step, for the episode trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerDecision {
    /// The action handed to the environment (a move, take or wait).
    pub action: MoveAction,
    /// Head of the plan that was drawn, if any.
    pub planned: Option<MoveAction>,
    pub confidence: Option<f64>,
    pub draw: Option<f64>,
    /// Coordinate picked by the random-piece fallback this step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_choice: Option<Coord>,
}

impl FollowerDecision {
    /// True when a planned action was due but the confidence draw failed.
    pub fn hesitated(&self) -> bool {
        self.planned.is_some() && self.action == MoveAction::Wait && self.planned != Some(MoveAction::Wait)
    }
}

/// Per-episode follower state.
#[derive(Debug, Clone)]
pub struct FollowerState {
    config: FollowerConfig,
    plan: Plan,
    descriptor: PropertySet,
    heard_reference: bool,
    approached: BTreeSet<Coord>,
    rejected: BTreeSet<Coord>,
    explored: BTreeSet<Area>,
    rng: ChaCha8Rng,
    random_choice: Option<Coord>,
}

fn symbol_at(view: &FollowerView, c: Coord) -> Option<PieceSymbol> {
    let (s, k) = view.at_world(c)?;
    if s <= CODE_EMPTY {
        return None;
    }
    let area = match region_of(c, view.dims).ok()? {
        Region::Area(a) => a,
        Region::Center => return None,
    };
    Some(PieceSymbol::new(Shape::from_code(s)?, Color::from_code(k)?, area))
}

/// Tile closest to the gripper from which the whole area is in view.
fn lookout(area: Area, view: &FollowerView) -> Coord {
    let (x0, y0, x1, y1) = area.rect(view.dims);
    let axis = |lo: i32, hi: i32, at: i32| {
        let (a, b) = (hi - 1 - FOLLOWER_VIEW_RADIUS, lo + FOLLOWER_VIEW_RADIUS);
        if a <= b {
            at.clamp(a, b)
        } else {
            (lo + hi - 1) / 2
        }
    };
    Coord::new(axis(x0, x1, view.gripper.x), axis(y0, y1, view.gripper.y))
}

/// Cells of the same color and shape connected to `start`, as seen in the view.
fn component(view: &FollowerView, start: Coord) -> Vec<Coord> {
    let Some(codes) = view.at_world(start) else { return vec![] };
    if codes.0 <= CODE_EMPTY {
        return vec![start];
    }
    let mut out = vec![start];
    let mut i = 0;
    while i < out.len() {
        let c = out[i];
        for m in MoveAction::MOVES {
            let n = m.apply(c);
            if !out.contains(&n) && view.at_world(n) == Some(codes) {
                out.push(n);
            }
        }
        i += 1;
    }
    out
}

impl FollowerState {
    pub fn new(config: FollowerConfig, seed: u64) -> Self {
        Self {
            config,
            plan: Plan::default(),
            descriptor: PropertySet::default(),
            heard_reference: false,
            approached: BTreeSet::new(),
            rejected: BTreeSet::new(),
            explored: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            random_choice: None,
        }
    }

    pub fn config(&self) -> &FollowerConfig {
        &self.config
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn descriptor(&self) -> &PropertySet {
        &self.descriptor
    }

    pub fn heard_reference(&self) -> bool {
        self.heard_reference
    }

    pub fn approached(&self) -> &BTreeSet<Coord> {
        &self.approached
    }

    /// Replaces the plan with `actions`, assigning fresh confidences.
    pub fn set_plan(&mut self, actions: impl IntoIterator<Item = MoveAction>, goal: Option<Coord>) {
        let (phi, floor) = (self.config.phi, self.config.floor);
        self.plan.steps = actions
            .into_iter()
            .enumerate()
            .map(|(i, action)| PlannedStep { action, confidence: confidence(phi, floor, i) })
            .collect();
        self.plan.goal = goal;
        self.plan.revision += 1;
    }

    fn clear_plan(&mut self) {
        self.set_plan([], None);
    }

    /// Reacts to the parsed utterance and returns the action to execute this step.
    pub fn step(&mut self, parsed: &ParsedIntent, view: &FollowerView) -> FollowerDecision {
        self.random_choice = None;
        self.note_arrival(view);
        match *parsed {
            ParsedIntent::Silence { .. } => self.on_silence(view),
            ParsedIntent::Confirm => self.on_confirm(view),
            ParsedIntent::Decline => self.on_decline(view),
            ParsedIntent::Directive { directive } => self.on_directive(directive, view),
            ParsedIntent::Reference { descriptor } => self.on_reference(&descriptor, view),
        }
        self.draw(view)
    }

    fn note_arrival(&mut self, view: &FollowerView) {
        for a in Area::ALL {
            let (x0, y0, x1, y1) = a.rect(view.dims);
            let seen = [Coord::new(x0, y0), Coord::new(x1 - 1, y1 - 1)].iter().all(|&c| view.to_view(c).is_some());
            if seen {
                self.explored.insert(*a);
            }
        }
        if self.plan.goal == Some(view.gripper) {
            self.plan.goal = None;
            if view.at_world(view.gripper).is_some_and(|(s, _)| s > CODE_EMPTY) {
                self.approached.extend(component(view, view.gripper));
            }
        }
    }

    pub fn on_silence(&mut self, view: &FollowerView) {
        if self.config.autonomy == Autonomy::Eager {
            self.autonomous(view);
        }
    }

    pub fn on_confirm(&mut self, view: &FollowerView) {
        for s in self.plan.steps.iter_mut() {
            s.confidence = 1.0;
        }
        if self.config.autonomy == Autonomy::Eager {
            self.take_if_on_candidate(view);
        }
    }

    pub fn on_decline(&mut self, view: &FollowerView) {
        self.clear_plan();
        if let Some((s, _)) = view.at_world(view.gripper) {
            if s > CODE_EMPTY {
                let cells = component(view, view.gripper);
                self.rejected.extend(cells.iter().copied());
                self.approached.extend(cells);
            }
        }
    }

    pub fn on_directive(&mut self, directive: Directive, view: &FollowerView) {
        let action = match directive {
            Directive::Take => {
                self.set_plan([MoveAction::Take], None);
                return;
            }
            Directive::Left => MoveAction::Left,
            Directive::Right => MoveAction::Right,
            Directive::Up => MoveAction::Up,
            Directive::Down => MoveAction::Down,
        };
        let mut n = 0;
        let mut c = view.gripper;
        while n < self.config.plan_horizon && view.dims.contains(action.apply(c)) {
            c = action.apply(c);
            n += 1;
        }
        self.set_plan(std::iter::repeat_n(action, n), None);
    }

    pub fn on_reference(&mut self, descriptor: &PropertySet, view: &FollowerView) {
        self.descriptor.merge(descriptor);
        self.heard_reference = true;
        if self.on_candidate(view) {
            self.clear_plan();
        } else if let Some((goal, path)) = self.find_candidate(view) {
            self.plan_to(goal, path);
        } else if self.in_descriptor_area(view) {
            self.approach_random_piece(view);
        } else if self.descriptor.only_position() {
            self.head_to_area(view);
        }
        if self.config.autonomy == Autonomy::Eager {
            self.take_if_on_candidate(view);
            if self.plan.is_empty() && !self.on_candidate(view) {
                self.explore(view);
            }
        }
    }

    /// Eager behavior when no instruction asks for anything specific.
    fn autonomous(&mut self, view: &FollowerView) {
        if self.take_if_on_candidate(view) {
            return;
        }
        let goal_still_valid = self.plan.goal.is_some_and(|g| self.is_candidate(view, g));
        if goal_still_valid {
            return;
        }
        if let Some((goal, path)) = self.find_candidate(view) {
            self.plan_to(goal, path);
            return;
        }
        if !self.plan.is_empty() {
            return;
        }
        if self.in_descriptor_area(view) {
            self.approach_random_piece(view);
        } else if self.descriptor.only_position() {
            self.head_to_area(view);
        }
        if self.plan.is_empty() {
            self.explore(view);
        }
    }

    fn is_candidate(&self, view: &FollowerView, c: Coord) -> bool {
        !self.approached.contains(&c) && symbol_at(view, c).is_some_and(|sym| self.descriptor.matches(&sym))
    }

    /// Gripper stands on a piece matching the descriptor that was not declined.
    pub fn on_candidate(&self, view: &FollowerView) -> bool {
        let here = view.gripper;
        !self.rejected.contains(&here) && symbol_at(view, here).is_some_and(|s| self.descriptor.matches(&s))
    }

    /// Eager take gate: take when over an assumed target. Returns whether take was planned.
    fn take_if_on_candidate(&mut self, view: &FollowerView) -> bool {
        if self.config.autonomy != Autonomy::Eager || !self.on_candidate(view) {
            return false;
        }
        if self.plan.actions().next() != Some(MoveAction::Take) {
            self.set_plan([MoveAction::Take], None);
        }
        true
    }

    fn find_candidate(&self, view: &FollowerView) -> Option<(Coord, Vec<MoveAction>)> {
        bfs_path(view.gripper, |c| view.dims.contains(c) && view.to_view(c).is_some(), |c| self.is_candidate(view, c))
    }

    fn plan_to(&mut self, goal: Coord, mut path: Vec<MoveAction>) {
        let reaches = path.len() <= self.config.plan_horizon;
        path.truncate(self.config.plan_horizon);
        if self.config.autonomy == Autonomy::Eager && reaches {
            path.push(MoveAction::Take);
        }
        self.set_plan(path, reaches.then_some(goal));
    }

    fn in_descriptor_area(&self, view: &FollowerView) -> bool {
        self.descriptor.area.is_some_and(|a| a.contains(view.gripper, view.dims))
    }

    fn approach_random_piece(&mut self, view: &FollowerView) {
        let pieces: Vec<Coord> = view
            .world_cells()
            .filter(|(c, (s, _))| *s > CODE_EMPTY && *c != view.gripper && !self.approached.contains(c))
            .map(|(c, _)| c)
            .collect();
        if pieces.is_empty() {
            return;
        }
        let pick = pieces[self.rng.gen_range(0..pieces.len())];
        self.random_choice = Some(pick);
        let path = staircase(view.gripper, pick, self.config.plan_horizon);
        self.set_plan(path, Some(pick));
    }

    fn head_to_area(&mut self, view: &FollowerView) {
        if let Some(area) = self.descriptor.area {
            let path = staircase(view.gripper, area.centroid(view.dims), self.config.plan_horizon);
            self.set_plan(path, None);
        }
    }

    /// Heads for the nearest unexplored area, preferring the one the descriptor names. The goal
    /// is the closest tile from which the whole area fits into the view.
    fn explore(&mut self, view: &FollowerView) {
        let mut options: Vec<Area> = Area::ALL.iter().copied().filter(|a| !self.explored.contains(a)).collect();
        if let Some(a) = self.descriptor.area.filter(|a| options.contains(a)) {
            options = vec![a];
        }
        if options.is_empty() {
            self.explored.clear();
            return;
        }
        let here = view.gripper;
        let best = options.iter().map(|a| lookout(*a, view).manhattan(here)).min().unwrap_or(0);
        options.retain(|a| lookout(*a, view).manhattan(here) == best);
        let area = options[self.rng.gen_range(0..options.len())];
        let goal = lookout(area, view);
        let path = staircase(here, goal, self.config.plan_horizon);
        self.set_plan(path, None);
    }

    /// Draws the head of the plan with its confidence; a failed draw is a wait and the action
    /// stays queued.
    fn draw(&mut self, view: &FollowerView) -> FollowerDecision {
        let random_choice = self.random_choice;
        let Some(head) = self.plan.steps.front().copied() else {
            return FollowerDecision {
                action: MoveAction::Wait,
                planned: None,
                confidence: None,
                draw: None,
                random_choice,
            };
        };
        let r: f64 = self.rng.gen();
        let mut decision = FollowerDecision {
            action: MoveAction::Wait,
            planned: Some(head.action),
            confidence: Some(head.confidence),
            draw: Some(r),
            random_choice,
        };
        if r < head.confidence {
            self.plan.steps.pop_front();
            let legal = !head.action.is_move() || view.dims.contains(head.action.apply(view.gripper));
            if legal {
                decision.action = head.action;
            } else {
                // a stale move that would leave the board is dropped
                self.plan.steps.clear();
            }
        }
        decision
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Board, Dims, Gripper, Piece, Rotation, MAP_SIZE};
    use crate::view::render_follower_view;

    fn view_at(board: &Board, pos: Coord) -> FollowerView {
        render_follower_view(board, &Gripper { pos })
    }

    fn empty() -> Board {
        Board::new(Dims::square(MAP_SIZE))
    }

    fn cfg(a: Autonomy, phi: f64) -> FollowerConfig {
        FollowerConfig::new(a, phi)
    }

    #[test]
    fn confidence_schedule() {
        assert_eq!(confidence(0.75f64, 0.0, 0), 1.0);
        assert_eq!(confidence(0.75f64, 0.0, 2), 0.5625);
        assert_eq!(confidence(0.5f32, 0.1, 10), 0.1);
        for phi in PHI_GRID {
            let c: Vec<f64> = (0..12).map(|i| confidence(phi, 0.1, i)).collect();
            assert!(c.windows(2).all(|w| w[0] >= w[1]));
            assert!(c.iter().all(|&x| x >= 0.1));
        }
    }

    #[test]
    fn empty_plan_silence_waits() {
        let b = empty();
        let mut f = FollowerState::new(cfg(Autonomy::Cautious, 0.9), 1);
        let d = f.step(&ParsedIntent::Silence { malformed: false }, &view_at(&b, b.center()));
        assert_eq!(d.action, MoveAction::Wait);
        assert!(d.planned.is_none());
        assert!(f.plan().is_empty());
    }

    #[test]
    fn confirm_sets_full_confidence() {
        let b = empty();
        let v = view_at(&b, b.center());
        let mut f = FollowerState::new(cfg(Autonomy::Cautious, 0.75), 1);
        f.set_plan([MoveAction::Right; 5], None);
        f.on_confirm(&v);
        assert!(f.plan().confidences().all(|c| c == 1.0));
        let mut g = FollowerState::new(cfg(Autonomy::Cautious, 0.75), 1);
        g.on_confirm(&v);
        assert!(g.plan().is_empty());
    }

    #[test]
    fn decline_erases_plan() {
        let b = empty();
        let v = view_at(&b, b.center());
        let mut f = FollowerState::new(cfg(Autonomy::Cautious, 0.9), 1);
        f.set_plan([MoveAction::Up; 4], None);
        let d = f.step(&ParsedIntent::Decline, &v);
        assert_eq!(d.action, MoveAction::Wait);
        assert!(f.plan().is_empty());
        let d = f.step(&ParsedIntent::Silence { malformed: false }, &v);
        assert_eq!(d.action, MoveAction::Wait);
    }

    #[test]
    fn directives_fill_and_clip() {
        let b = empty();
        let mut f = FollowerState::new(cfg(Autonomy::Cautious, 0.9), 1);
        f.on_directive(Directive::Left, &view_at(&b, Coord::new(2, 7)));
        assert_eq!(f.plan().actions().collect::<Vec<_>>(), [MoveAction::Left; 2]);
        f.on_directive(Directive::Up, &view_at(&b, b.center()));
        assert_eq!(f.plan().actions().collect::<Vec<_>>(), [MoveAction::Up; 10]);
        f.on_directive(Directive::Take, &view_at(&b, b.center()));
        assert_eq!(f.plan().actions().collect::<Vec<_>>(), [MoveAction::Take]);
    }

    #[test]
    fn reference_plans_shortest_path() {
        let blue = PieceSymbol::new(Shape::X, Color::Blue, Area::Right);
        // X at anchor (14,9) covers (15,9),(14,10),(15,10),(16,10),(15,11)
        let b =
            Board::from_pieces(Dims::square(MAP_SIZE), [Piece::at(1, blue, Rotation::R0, Coord::new(14, 9))]).unwrap();
        let mut f = FollowerState::new(cfg(Autonomy::Cautious, 0.9), 1);
        let desc = PropertySet { color: Some(Color::Blue), ..Default::default() };
        f.on_reference(&desc, &view_at(&b, b.center()));
        assert_eq!(f.plan().actions().collect::<Vec<_>>(), [MoveAction::Right; 4]);
        assert_eq!(f.plan().goal, Some(Coord::new(14, 10)));
    }

    #[test]
    fn position_only_heads_toward_area() {
        let b = empty();
        let mut f = FollowerState::new(cfg(Autonomy::Cautious, 0.9), 1);
        let desc = PropertySet { area: Some(Area::TopLeft), ..Default::default() };
        f.on_reference(&desc, &view_at(&b, b.center()));
        assert_eq!(f.plan().len(), 10);
        assert!(f.plan().actions().all(|a| matches!(a, MoveAction::Left | MoveAction::Up)));
    }

    #[test]
    fn unmatched_reference_keeps_plan() {
        let b = empty();
        let mut f = FollowerState::new(cfg(Autonomy::Cautious, 0.9), 1);
        f.set_plan([MoveAction::Down; 3], None);
        let rev = f.plan().revision;
        let desc = PropertySet { color: Some(Color::Green), ..Default::default() };
        f.on_reference(&desc, &view_at(&b, b.center()));
        assert_eq!(f.plan().revision, rev);
        assert_eq!(f.plan().len(), 3);
    }

    #[test]
    fn cautious_never_takes_without_directive() {
        let sym = PieceSymbol::new(Shape::X, Color::Red, Area::Right);
        let b =
            Board::from_pieces(Dims::square(MAP_SIZE), [Piece::at(1, sym, Rotation::R0, Coord::new(14, 9))]).unwrap();
        let over = view_at(&b, Coord::new(15, 10));
        let mut f = FollowerState::new(cfg(Autonomy::Cautious, 0.99), 3);
        f.on_reference(&PropertySet { color: Some(Color::Red), ..Default::default() }, &over);
        for _ in 0..50 {
            let d = f.step(&ParsedIntent::Silence { malformed: false }, &over);
            assert_eq!(d.action, MoveAction::Wait);
        }
        let d = f.step(&ParsedIntent::Directive { directive: Directive::Take }, &over);
        assert_eq!(d.action, MoveAction::Take);

        let mut e = FollowerState::new(cfg(Autonomy::Eager, 0.99), 3);
        e.on_reference(&PropertySet { color: Some(Color::Red), ..Default::default() }, &over);
        let d = e.step(&ParsedIntent::Silence { malformed: false }, &over);
        assert_eq!(d.action, MoveAction::Take);
    }

    #[test]
    fn failed_draw_keeps_action() {
        let b = empty();
        let v = view_at(&b, b.center());
        let mut f = FollowerState::new(cfg(Autonomy::Cautious, 0.0).with_floor(0.0), 9);
        f.set_plan([MoveAction::Left, MoveAction::Left], None);
        assert_eq!(f.step(&ParsedIntent::Silence { malformed: false }, &v).action, MoveAction::Left);
        let d = f.step(&ParsedIntent::Silence { malformed: false }, &v);
        assert!(d.hesitated());
        assert_eq!(f.plan().len(), 1);
    }
}
