//! Breadth-first search on the tile grid.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::domain::Coord;

/// Follower motor actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveAction {
    Left,
    Right,
    Up,
    Down,
    Take,
    Wait,
}

impl MoveAction {
    pub const MOVES: [MoveAction; 4] = [MoveAction::Left, MoveAction::Right, MoveAction::Up, MoveAction::Down];

    pub fn delta(self) -> (i32, i32) {
        match self {
            MoveAction::Left => (-1, 0),
            MoveAction::Right => (1, 0),
            MoveAction::Up => (0, -1),
            MoveAction::Down => (0, 1),
            MoveAction::Take | MoveAction::Wait => (0, 0),
        }
    }

    pub fn apply(self, c: Coord) -> Coord {
        let (dx, dy) = self.delta();
        c.offset(dx, dy)
    }

    pub fn is_move(self) -> bool {
        self.delta() != (0, 0)
    }
}

/// Shortest move sequence from `start` to the nearest coordinate satisfying `is_goal`, moving
/// only through coordinates where `passable` holds. Neighbours are expanded in the order left,
/// right, up, down, so ties resolve deterministically. Returns `None` if no goal is reachable.
pub fn bfs_path(
    start: Coord,
    mut passable: impl FnMut(Coord) -> bool,
    mut is_goal: impl FnMut(Coord) -> bool,
) -> Option<(Coord, Vec<MoveAction>)> {
    let mut parent: HashMap<Coord, (Coord, MoveAction)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    parent.insert(start, (start, MoveAction::Wait));
    while let Some(cur) = queue.pop_front() {
        if is_goal(cur) {
            let mut path = Vec::new();
            let mut c = cur;
            while c != start {
                let (prev, mv) = parent[&c];
                path.push(mv);
                c = prev;
            }
            path.reverse();
            return Some((cur, path));
        }
        for mv in MoveAction::MOVES {
            let next = mv.apply(cur);
            if !parent.contains_key(&next) && passable(next) {
                parent.insert(next, (cur, mv));
                queue.push_back(next);
            }
        }
    }
    None
}

/// Moves that walk from `from` toward `to`, reducing the larger remaining axis distance first,
/// capped at `limit` steps.
pub fn staircase(from: Coord, to: Coord, limit: usize) -> Vec<MoveAction> {
    let mut out = Vec::new();
    let mut cur = from;
    while out.len() < limit && cur != to {
        let (dx, dy) = (to.x - cur.x, to.y - cur.y);
        let mv = if dx.abs() >= dy.abs() {
            if dx < 0 {
                MoveAction::Left
            } else {
                MoveAction::Right
            }
        } else if dy < 0 {
            MoveAction::Up
        } else {
            MoveAction::Down
        };
        cur = mv.apply(cur);
        out.push(mv);
    }
    out
}
