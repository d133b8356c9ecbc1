//! Board, pieces, gripper and their symbolic encodings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the boards shipped in the generated task files.
pub const MAP_SIZE: usize = 21;

/// Symbol code for tiles outside the world in the follower's partial view.
pub const CODE_OUT_OF_WORLD: u8 = 0;
/// Symbol code for an empty in-world tile.
pub const CODE_EMPTY: u8 = 1;

/// Tile coordinate. `x` grows to the right, `y` grows downwards (row 0 is the top edge).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Coord {
    pub x: i32,
    pub y: i32,
}

impl Coord {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Coord) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn offset(self, dx: i32, dy: i32) -> Coord {
        Coord::new(self.x + dx, self.y + dy)
    }
}

impl From<[i32; 2]> for Coord {
    fn from([x, y]: [i32; 2]) -> Self {
        Coord { x, y }
    }
}

impl From<Coord> for [i32; 2] {
    fn from(c: Coord) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub const fn square(side: usize) -> Self {
        Self::new(side, side)
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn center(&self) -> Coord {
        Coord::new((self.width / 2) as i32, (self.height / 2) as i32)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    fn check(&self, c: Coord) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::OutOfBounds { coord: c, width: self.width, height: self.height })
        }
    }
}

macro_rules! labelled_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.label().eq_ignore_ascii_case(s))
                    .ok_or_else(|| Error::Parse(format!(concat!("unknown ", stringify!($name), " '{}'"), s)))
            }
        }
    };
}

labelled_enum!(
    /// The nine pentomino shapes used by the game.
    Shape { P => "P", X => "X", T => "T", Z => "Z", W => "W", U => "U", N => "N", F => "F", Y => "Y" }
);

labelled_enum!(
    Color { Red => "red", Green => "green", Blue => "blue", Yellow => "yellow", Brown => "brown", Purple => "purple" }
);

labelled_enum!(
    /// The eight outer board regions a piece can be placed in. The middle region is kept free
    /// for the gripper's start position and has no label here.
    Area {
        Left => "left",
        Right => "right",
        Top => "top",
        Bottom => "bottom",
        TopLeft => "top-left",
        TopRight => "top-right",
        BottomLeft => "bottom-left",
        BottomRight => "bottom-right",
    }
);

impl Shape {
    /// Symbolic code used in the follower's view (P=2 .. Y=10).
    pub fn code(self) -> u8 {
        self as u8 + 2
    }

    pub fn from_code(code: u8) -> Option<Shape> {
        Shape::ALL.get(code.checked_sub(2)? as usize).copied()
    }

    /// Unrotated footprint inside a 5x5 box, normalized so the minimum x and y are zero.
    fn template(self) -> [(i32, i32); 5] {
        match self {
            Shape::P => [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2)],
            Shape::X => [(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)],
            Shape::T => [(0, 0), (1, 0), (2, 0), (1, 1), (1, 2)],
            Shape::Z => [(0, 0), (1, 0), (1, 1), (1, 2), (2, 2)],
            Shape::W => [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)],
            Shape::U => [(0, 0), (2, 0), (0, 1), (1, 1), (2, 1)],
            Shape::N => [(1, 0), (1, 1), (0, 2), (1, 2), (0, 3)],
            Shape::F => [(1, 0), (2, 0), (0, 1), (1, 1), (1, 2)],
            Shape::Y => [(1, 0), (0, 1), (1, 1), (1, 2), (1, 3)],
        }
    }

    /// Footprint after rotation, relative to the top-left corner of its bounding box.
    pub fn footprint(self, rotation: Rotation) -> [Coord; 5] {
        let mut cells = self.template();
        for _ in 0..rotation.quarter_turns() {
            // clockwise quarter turn in screen coordinates: (x, y) -> (-y, x)
            for c in cells.iter_mut() {
                *c = (-c.1, c.0);
            }
        }
        let min_x = cells.iter().map(|c| c.0).min().unwrap_or(0);
        let min_y = cells.iter().map(|c| c.1).min().unwrap_or(0);
        let mut out = [Coord::new(0, 0); 5];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = Coord::new(c.0 - min_x, c.1 - min_y);
        }
        out.sort();
        out
    }
}

impl Color {
    pub fn code(self) -> u8 {
        self as u8 + 2
    }

    pub fn from_code(code: u8) -> Option<Color> {
        Color::ALL.get(code.checked_sub(2)? as usize).copied()
    }

    pub fn rgb(self) -> [u8; 3] {
        match self {
            Color::Red => [255, 0, 0],
            Color::Green => [0, 128, 0],
            Color::Blue => [0, 0, 255],
            Color::Yellow => [255, 255, 0],
            Color::Brown => [139, 69, 19],
            Color::Purple => [128, 0, 128],
        }
    }
}

/// Row band / column band of the 3x3 board partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Band {
    Low,
    Mid,
    High,
}

fn band(v: usize, extent: usize) -> Band {
    match v * 3 / extent {
        0 => Band::Low,
        1 => Band::Mid,
        _ => Band::High,
    }
}

/// Half-open index range `[start, end)` of a band.
fn band_range(b: Band, extent: usize) -> (usize, usize) {
    let lo = |k: usize| (k * extent).div_ceil(3);
    match b {
        Band::Low => (0, lo(1)),
        Band::Mid => (lo(1), lo(2)),
        Band::High => (lo(2), extent),
    }
}

impl Area {
    fn bands(self) -> (Band, Band) {
        // (column band, row band)
        match self {
            Area::Left => (Band::Low, Band::Mid),
            Area::Right => (Band::High, Band::Mid),
            Area::Top => (Band::Mid, Band::Low),
            Area::Bottom => (Band::Mid, Band::High),
            Area::TopLeft => (Band::Low, Band::Low),
            Area::TopRight => (Band::High, Band::Low),
            Area::BottomLeft => (Band::Low, Band::High),
            Area::BottomRight => (Band::High, Band::High),
        }
    }

    /// Inclusive-exclusive tile rectangle `(x0, y0, x1, y1)` covered by this area.
    pub fn rect(self, dims: Dims) -> (i32, i32, i32, i32) {
        let (cb, rb) = self.bands();
        let (x0, x1) = band_range(cb, dims.width);
        let (y0, y1) = band_range(rb, dims.height);
        (x0 as i32, y0 as i32, x1 as i32, y1 as i32)
    }

    /// Tile closest to the geometric middle of the area.
    pub fn centroid(self, dims: Dims) -> Coord {
        let (x0, y0, x1, y1) = self.rect(dims);
        Coord::new((x0 + x1 - 1) / 2, (y0 + y1 - 1) / 2)
    }

    pub fn contains(self, c: Coord, dims: Dims) -> bool {
        matches!(region_of(c, dims), Ok(Region::Area(a)) if a == self)
    }

    /// Words used to verbalize the area, e.g. `["top", "left"]`.
    pub fn words(self) -> Vec<&'static str> {
        self.label().split('-').collect()
    }
}

/// Cell of the 3x3 board partition: one of the eight labelled areas or the middle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Area(Area),
    Center,
}

/// Maps a tile to its region of the 3x3 partition (equal-thirds bands, 7/7/7 on a 21 board).
pub fn region_of(coord: Coord, dims: Dims) -> Result<Region> {
    dims.check(coord)?;
    let cb = band(coord.x as usize, dims.width);
    let rb = band(coord.y as usize, dims.height);
    Ok(match (cb, rb) {
        (Band::Mid, Band::Mid) => Region::Center,
        (Band::Low, Band::Mid) => Region::Area(Area::Left),
        (Band::High, Band::Mid) => Region::Area(Area::Right),
        (Band::Mid, Band::Low) => Region::Area(Area::Top),
        (Band::Mid, Band::High) => Region::Area(Area::Bottom),
        (Band::Low, Band::Low) => Region::Area(Area::TopLeft),
        (Band::High, Band::Low) => Region::Area(Area::TopRight),
        (Band::Low, Band::High) => Region::Area(Area::BottomLeft),
        (Band::High, Band::High) => Region::Area(Area::BottomRight),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PieceSymbol {
    pub shape: Shape,
    pub color: Color,
    pub area: Area,
}

impl PieceSymbol {
    pub const fn new(shape: Shape, color: Color, area: Area) -> Self {
        Self { shape, color, area }
    }

    /// All 9 x 6 x 8 = 432 symbols in a fixed order.
    pub fn all() -> Vec<PieceSymbol> {
        let mut out = Vec::with_capacity(432);
        for &shape in Shape::ALL {
            for &color in Color::ALL {
                for &area in Area::ALL {
                    out.push(PieceSymbol::new(shape, color, area));
                }
            }
        }
        out
    }
}

impl fmt::Display for PieceSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} at {}", self.color, self.shape, self.area)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u16 {
        self.quarter_turns() as u16 * 90
    }

    fn quarter_turns(self) -> usize {
        self as usize
    }
}

impl TryFrom<u16> for Rotation {
    type Error = String;

    fn try_from(deg: u16) -> std::result::Result<Self, String> {
        match deg {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            other => Err(format!("rotation must be 0/90/180/270, got {other}")),
        }
    }
}

impl From<Rotation> for u16 {
    fn from(r: Rotation) -> u16 {
        r.degrees()
    }
}

pub type PieceId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub id: PieceId,
    #[serde(flatten)]
    pub symbol: PieceSymbol,
    pub rotation: Rotation,
    pub tiles: Vec<Coord>,
}

impl Piece {
    /// Builds a piece whose bounding box starts at `anchor`.
    pub fn at(id: PieceId, symbol: PieceSymbol, rotation: Rotation, anchor: Coord) -> Piece {
        let tiles = symbol.shape.footprint(rotation).iter().map(|c| c.offset(anchor.x, anchor.y)).collect();
        Piece { id, symbol, rotation, tiles }
    }

    pub fn covers(&self, c: Coord) -> bool {
        self.tiles.contains(&c)
    }

    /// Checks the tile count, the 5x5 extent and that the tiles form the symbol's shape.
    pub fn validate(&self) -> Result<()> {
        if self.id == 0 {
            return Err(Error::InvalidTask("piece ids must be positive".into()));
        }
        if self.tiles.len() != 5 {
            return Err(Error::InvalidTask(format!("piece {} has {} tiles", self.id, self.tiles.len())));
        }
        let min_x = self.tiles.iter().map(|c| c.x).min().unwrap_or(0);
        let min_y = self.tiles.iter().map(|c| c.y).min().unwrap_or(0);
        let mut rel: Vec<Coord> = self.tiles.iter().map(|c| c.offset(-min_x, -min_y)).collect();
        rel.sort();
        if rel != self.symbol.shape.footprint(self.rotation) {
            return Err(Error::InvalidTask(format!(
                "piece {} tiles do not form a {} rotated by {}",
                self.id,
                self.symbol.shape,
                self.rotation.degrees()
            )));
        }
        Ok(())
    }
}

/// The game board: a tile grid holding piece ids plus the pieces themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Board {
    dims: Dims,
    grid: Vec<Option<PieceId>>,
    pieces: Vec<Piece>,
}

impl Board {
    pub fn new(dims: Dims) -> Board {
        Board { dims, grid: vec![None; dims.area()], pieces: Vec::new() }
    }

    pub fn from_pieces(dims: Dims, pieces: impl IntoIterator<Item = Piece>) -> Result<Board> {
        let mut board = Board::new(dims);
        for p in pieces {
            board.add_piece(p)?;
        }
        Ok(board)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn piece(&self, id: PieceId) -> Result<&Piece> {
        self.pieces.iter().find(|p| p.id == id).ok_or(Error::UnknownPiece(id))
    }

    pub fn center(&self) -> Coord {
        self.dims.center()
    }

    pub fn contains(&self, c: Coord) -> bool {
        self.dims.contains(c)
    }

    fn index(&self, c: Coord) -> usize {
        c.y as usize * self.dims.width + c.x as usize
    }

    /// Piece id at `c`, or `None` for an empty tile or a coordinate off the board.
    pub fn occupant(&self, c: Coord) -> Option<PieceId> {
        if self.contains(c) {
            self.grid[self.index(c)]
        } else {
            None
        }
    }

    pub fn piece_at(&self, c: Coord) -> Option<&Piece> {
        self.occupant(c).and_then(|id| self.piece(id).ok())
    }

    /// True when every tile is on the board, free, and the piece is well-formed.
    pub fn can_place(&self, piece: &Piece) -> bool {
        piece.validate().is_ok() && piece.tiles.iter().all(|&t| self.contains(t) && self.occupant(t).is_none())
    }

    pub fn add_piece(&mut self, piece: Piece) -> Result<()> {
        piece.validate()?;
        if self.pieces.iter().any(|p| p.id == piece.id) {
            return Err(Error::InvalidTask(format!("duplicate piece id {}", piece.id)));
        }
        for &t in &piece.tiles {
            self.dims.check(t)?;
            if let Some(other) = self.occupant(t) {
                return Err(Error::InvalidTask(format!("piece {} overlaps piece {other} at {t}", piece.id)));
            }
        }
        for &t in &piece.tiles {
            let i = self.index(t);
            self.grid[i] = Some(piece.id);
        }
        self.pieces.push(piece);
        Ok(())
    }

    pub fn next_piece_id(&self) -> PieceId {
        self.pieces.iter().map(|p| p.id).max().unwrap_or(0) + 1
    }
}

/// The follower-controlled gripper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gripper {
    pub pos: Coord,
}

impl Gripper {
    pub fn centered(dims: Dims) -> Gripper {
        Gripper { pos: dims.center() }
    }

    pub fn at(dims: Dims, pos: Coord) -> Result<Gripper> {
        dims.check(pos)?;
        Ok(Gripper { pos })
    }
}
