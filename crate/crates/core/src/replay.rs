//! Renders boards and recorded episodes as ASCII frames or PNG images.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::Rgb;

use crate::domain::{Board, Coord, Gripper, PieceId};
use crate::engine::{replay, EpisodeTrace};
use crate::error::Result;
use crate::taskgen::Task;
use crate::view::render_guide_view;

/// One character per tile: `.` empty, the shape letter for pieces (upper case for the target,
/// lower case otherwise), `@` for the gripper on an empty tile and `*` for the gripper on a piece.
pub fn ascii_board(board: &Board, gripper: Coord, target_id: PieceId) -> String {
    let mut s = String::with_capacity(board.width() * (board.height() + 1));
    for y in 0..board.height() as i32 {
        for x in 0..board.width() as i32 {
            let c = Coord::new(x, y);
            let ch = match (board.piece_at(c), c == gripper) {
                (Some(_), true) => '*',
                (None, true) => '@',
                (Some(p), false) => {
                    let letter = p.symbol.shape.label().chars().next().unwrap_or('?');
                    if p.id == target_id {
                        letter.to_ascii_uppercase()
                    } else {
                        letter.to_ascii_lowercase()
                    }
                }
                (None, false) => '.',
            };
            s.push(ch);
        }
        s.push('\n');
    }
    s
}

/// All frames of a trace: the initial board followed by one frame per step with its utterance
/// and the follower's action.
pub fn ascii_frames(task: &Task, trace: &EpisodeTrace) -> Vec<String> {
    let start = task.board.center();
    let mut frames = vec![format!("t=0 task={}\n{}", task.task_id, ascii_board(&task.board, start, task.target_id))];
    for step in &trace.steps {
        let mut header = String::new();
        let _ = write!(header, "t={} guide={:?} follower={:?}", step.t, step.utterance, step.follower.action);
        frames.push(format!("{header}\n{}", ascii_board(&task.board, step.gripper, task.target_id)));
    }
    let outcome = if trace.success { "success" } else { "failure" };
    if let Some(last) = frames.last_mut() {
        let _ = writeln!(last, "{outcome}: reward {:.4}", trace.rewards.total);
    }
    frames
}

/// Writes `frame_000.png`, `frame_001.png`, ... into `dir` after checking that the trace replays
/// exactly. The gripper is drawn as a black square in the middle of its tile.
pub fn write_png_frames(task: &Task, trace: &EpisodeTrace, dir: impl AsRef<Path>, scale: u32) -> Result<Vec<PathBuf>> {
    replay(task, trace)?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let scale = scale.max(3);
    let positions = std::iter::once(task.board.center()).chain(trace.steps.iter().map(|s| s.gripper));
    let mut out = Vec::new();
    for (i, pos) in positions.enumerate() {
        let view = render_guide_view::<f32>(&task.board, &Gripper { pos }, task.target_id)?;
        let mut img = view.to_rgb_image(scale);
        let inset = scale / 3;
        for dy in inset..scale - inset {
            for dx in inset..scale - inset {
                img.put_pixel(pos.x as u32 * scale + dx, pos.y as u32 * scale + dy, Rgb([0, 0, 0]));
            }
        }
        let path = dir.join(format!("frame_{i:03}.png"));
        img.save(&path)?;
        out.push(path);
    }
    Ok(out)
}
