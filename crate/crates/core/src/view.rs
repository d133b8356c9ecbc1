//! Observation tensors for the guide (full RGB scene plus indicator channels) and the follower
//! (symbolic 11x11 cut-out around the gripper).

use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};

use crate::domain::{Board, Coord, Dims, Gripper, PieceId, CODE_EMPTY, CODE_OUT_OF_WORLD};
use crate::error::Result;
use crate::scalar::Scalar;

/// Number of channels in the guide view: RGB, gripper indicator, target indicator.
pub const GUIDE_CHANNELS: usize = 5;
/// Side of the follower's partial view.
pub const FOLLOWER_VIEW_SIZE: usize = 11;
/// Distance from the view centre to its border.
pub const FOLLOWER_VIEW_RADIUS: i32 = (FOLLOWER_VIEW_SIZE as i32 - 1) / 2;

const BACKGROUND_RGB: [u8; 3] = [255, 255, 255];

/// Guide observation, stored row-major as `[y][x][channel]` with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideView<F> {
    dims: Dims,
    data: Vec<F>,
}

impl<F: Scalar> GuideView<F> {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Declared tensor shape `[height, width, channels]`.
    pub fn shape(&self) -> [usize; 3] {
        [self.dims.height, self.dims.width, GUIDE_CHANNELS]
    }

    pub fn get(&self, x: usize, y: usize, channel: usize) -> F {
        self.data[(y * self.dims.width + x) * GUIDE_CHANNELS + channel]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    /// Coordinates where `channel` is zero.
    pub fn zeros(&self, channel: usize) -> Vec<Coord> {
        let mut out = Vec::new();
        for y in 0..self.dims.height {
            for x in 0..self.dims.width {
                if self.get(x, y, channel) == F::zero() {
                    out.push(Coord::new(x as i32, y as i32));
                }
            }
        }
        out
    }

    /// RGB channels as an 8-bit image, one pixel per tile upscaled by `scale` (nearest neighbour).
    pub fn to_rgb_image(&self, scale: u32) -> RgbImage {
        let scale = scale.max(1);
        let (w, h) = (self.dims.width as u32, self.dims.height as u32);
        let max = F::lit(255.0);
        ImageBuffer::from_fn(w * scale, h * scale, |px, py| {
            let (x, y) = ((px / scale) as usize, (py / scale) as usize);
            let ch = |c| (self.get(x, y, c) * max).round().to_u8().unwrap_or(0);
            Rgb([ch(0), ch(1), ch(2)])
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>, scale: u32) -> Result<()> {
        self.to_rgb_image(scale).save(path)?;
        Ok(())
    }
}

/// Renders the guide's full view of the scene.
///
/// RGB channels hold the piece colors scaled to `[0, 1]` with white for empty tiles. Channel 4 is
/// zero at the gripper, channel 5 is zero on the target's tiles; both are one elsewhere.
pub fn render_guide_view<F: Scalar>(board: &Board, gripper: &Gripper, target_id: PieceId) -> Result<GuideView<F>> {
    let target = board.piece(target_id)?;
    let dims = board.dims();
    let mut data = vec![F::one(); dims.area() * GUIDE_CHANNELS];
    let scale = F::lit(255.0);
    for y in 0..dims.height {
        for x in 0..dims.width {
            let c = Coord::new(x as i32, y as i32);
            let rgb = board.piece_at(c).map_or(BACKGROUND_RGB, |p| p.symbol.color.rgb());
            let base = (y * dims.width + x) * GUIDE_CHANNELS;
            for (k, v) in rgb.iter().enumerate() {
                data[base + k] = F::lit(f64::from(*v)) / scale;
            }
        }
    }
    let mut zero = |c: Coord, ch: usize| {
        data[(c.y as usize * dims.width + c.x as usize) * GUIDE_CHANNELS + ch] = F::zero();
    };
    zero(gripper.pos, 3);
    for &t in &target.tiles {
        zero(t, 4);
    }
    Ok(GuideView { dims, data })
}

/// Follower observation: shape and color codes around the gripper, plus its absolute position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FollowerView {
    pub gripper: Coord,
    pub dims: Dims,
    shapes: [[u8; FOLLOWER_VIEW_SIZE]; FOLLOWER_VIEW_SIZE],
    colors: [[u8; FOLLOWER_VIEW_SIZE]; FOLLOWER_VIEW_SIZE],
}

impl FollowerView {
    /// Codes `(shape, color)` at view cell `(col, row)`, with the gripper at `(5, 5)`.
    pub fn cell(&self, col: usize, row: usize) -> (u8, u8) {
        (self.shapes[row][col], self.colors[row][col])
    }

    /// Codes at a world coordinate, or `None` when outside the view window.
    pub fn at_world(&self, c: Coord) -> Option<(u8, u8)> {
        let (col, row) = self.to_view(c)?;
        Some(self.cell(col, row))
    }

    /// View cell indices of a world coordinate, if it lies inside the window.
    pub fn to_view(&self, c: Coord) -> Option<(usize, usize)> {
        let col = c.x - self.gripper.x + FOLLOWER_VIEW_RADIUS;
        let row = c.y - self.gripper.y + FOLLOWER_VIEW_RADIUS;
        let range = 0..FOLLOWER_VIEW_SIZE as i32;
        (range.contains(&col) && range.contains(&row)).then_some((col as usize, row as usize))
    }

    pub fn to_world(&self, col: usize, row: usize) -> Coord {
        self.gripper.offset(col as i32 - FOLLOWER_VIEW_RADIUS, row as i32 - FOLLOWER_VIEW_RADIUS)
    }

    /// World coordinates of every in-world cell in the window, row by row.
    pub fn world_cells(&self) -> impl Iterator<Item = (Coord, (u8, u8))> + '_ {
        (0..FOLLOWER_VIEW_SIZE).flat_map(move |row| {
            (0..FOLLOWER_VIEW_SIZE).filter_map(move |col| {
                let codes = self.cell(col, row);
                (codes.0 != CODE_OUT_OF_WORLD).then(|| (self.to_world(col, row), codes))
            })
        })
    }

    pub fn shape_channel(&self) -> &[[u8; FOLLOWER_VIEW_SIZE]; FOLLOWER_VIEW_SIZE] {
        &self.shapes
    }

    pub fn color_channel(&self) -> &[[u8; FOLLOWER_VIEW_SIZE]; FOLLOWER_VIEW_SIZE] {
        &self.colors
    }
}

pub fn render_follower_view(board: &Board, gripper: &Gripper) -> FollowerView {
    let mut shapes = [[CODE_OUT_OF_WORLD; FOLLOWER_VIEW_SIZE]; FOLLOWER_VIEW_SIZE];
    let mut colors = shapes;
    for row in 0..FOLLOWER_VIEW_SIZE {
        for col in 0..FOLLOWER_VIEW_SIZE {
            let c = gripper.pos.offset(col as i32 - FOLLOWER_VIEW_RADIUS, row as i32 - FOLLOWER_VIEW_RADIUS);
            if !board.contains(c) {
                continue;
            }
            let (s, k) =
                board.piece_at(c).map_or((CODE_EMPTY, CODE_EMPTY), |p| (p.symbol.shape.code(), p.symbol.color.code()));
            shapes[row][col] = s;
            colors[row][col] = k;
        }
    }
    FollowerView { gripper: gripper.pos, dims: board.dims(), shapes, colors }
}
