use thiserror::Error;

use crate::domain::Coord;

#[derive(Error, Debug)]
pub enum Error {
    #[error("coordinate ({}, {}) lies outside a {width}x{height} board", coord.x, coord.y)]
    OutOfBounds { coord: Coord, width: usize, height: usize },

    #[error("piece {0} is not on the board")]
    UnknownPiece(u32),

    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("no free position for the piece after {0} tries")]
    Placement(usize),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("episode is terminal")]
    EpisodeTerminal,

    #[error("unknown action id {0} (expected 0..14)")]
    UnknownAction(usize),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
