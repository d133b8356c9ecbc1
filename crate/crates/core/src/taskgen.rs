//! Symbol universe, data splits, board construction and the JSON-lines task files.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{region_of, Board, Coord, Dims, Piece, PieceId, PieceSymbol, Region, Rotation, MAP_SIZE};
use crate::error::{Error, Result};
use crate::seed;

pub const SCHEMA_VERSION: u32 = 1;
/// Placement attempts before the caller has to pick another symbol.
pub const PLACEMENT_TRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.jsonl", self.name())
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" | "training" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" | "testing" => Ok(Split::Test),
            _ => Err(Error::Parse(format!("unknown split '{s}'"))),
        }
    }
}

/// Per-split sizes: target piece symbols, tasks and boards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub tps: usize,
    pub tasks: usize,
    pub boards: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub universe_size: usize,
    pub train: SplitCounts,
    pub validation: SplitCounts,
    pub test: SplitCounts,
    pub min_pieces: usize,
    pub max_pieces: usize,
    pub train_boards_per_count: usize,
    /// Tasks per training board (the primary target plus extra targets).
    pub tasks_per_train_board: usize,
    pub map_size: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            universe_size: 360,
            train: SplitCounts { tps: 275, tasks: 2500, boards: 700 },
            validation: SplitCounts { tps: 25, tasks: 175, boards: 175 },
            test: SplitCounts { tps: 60, tasks: 420, boards: 420 },
            min_pieces: 2,
            max_pieces: 8,
            train_boards_per_count: 100,
            tasks_per_train_board: 4,
            map_size: MAP_SIZE,
        }
    }
}

impl SplitSpec {
    pub fn counts(&self, split: Split) -> SplitCounts {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
        }
    }

    fn piece_counts(&self) -> std::ops::RangeInclusive<usize> {
        self.min_pieces..=self.max_pieces
    }
}

/// The symbols used in the experiments and their assignment to splits as target symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolUniverse {
    pub symbols: Vec<PieceSymbol>,
    pub train: Vec<PieceSymbol>,
    pub validation: Vec<PieceSymbol>,
    pub test: Vec<PieceSymbol>,
}

impl SymbolUniverse {
    pub fn tps(&self, split: Split) -> &[PieceSymbol] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

fn covers_all_values(symbols: &[PieceSymbol]) -> bool {
    use crate::domain::{Area, Color, Shape};
    let shapes: BTreeSet<Shape> = symbols.iter().map(|s| s.shape).collect();
    let colors: BTreeSet<Color> = symbols.iter().map(|s| s.color).collect();
    let areas: BTreeSet<Area> = symbols.iter().map(|s| s.area).collect();
    shapes.len() == Shape::ALL.len() && colors.len() == Color::ALL.len() && areas.len() == Area::ALL.len()
}

/// Samples the symbol universe (covering every shape, color and area) and partitions it into
/// disjoint target symbol sets.
pub fn build_symbol_universe(spec: &SplitSpec, master_seed: u64) -> Result<SymbolUniverse> {
    let mut rng = seed::rng(master_seed, 0);
    let all = PieceSymbol::all();
    let wanted = spec.train.tps + spec.validation.tps + spec.test.tps;
    if spec.universe_size > all.len() || wanted != spec.universe_size {
        return Err(Error::Generation(format!(
            "cannot split {} symbols into {wanted} target symbols",
            spec.universe_size
        )));
    }
    let mut symbols = loop {
        let mut pool = all.clone();
        pool.shuffle(&mut rng);
        pool.truncate(spec.universe_size);
        if covers_all_values(&pool) {
            break pool;
        }
    };
    symbols.sort();
    let mut order = symbols.clone();
    order.shuffle(&mut rng);
    let test = order.split_off(spec.train.tps + spec.validation.tps);
    let validation = order.split_off(spec.train.tps);
    Ok(SymbolUniverse { symbols, train: order, validation, test })
}

/// Places a piece with `symbol` at a uniformly random free position inside its area.
///
/// Each try draws a rotation and a bounding-box anchor inside the area; the piece must not
/// overlap others or cover the board centre. Fails after [`PLACEMENT_TRIES`] tries.
pub fn place_piece<R: Rng + ?Sized>(
    board: &mut Board,
    symbol: PieceSymbol,
    id: PieceId,
    rng: &mut R,
) -> Result<PieceId> {
    let dims = board.dims();
    let (x0, y0, x1, y1) = symbol.area.rect(dims);
    let center = board.center();
    for _ in 0..PLACEMENT_TRIES {
        let rotation = Rotation::ALL[rng.gen_range(0..4)];
        let fp = symbol.shape.footprint(rotation);
        let w = fp.iter().map(|c| c.x).max().unwrap_or(0) + 1;
        let h = fp.iter().map(|c| c.y).max().unwrap_or(0) + 1;
        if x1 - x0 < w || y1 - y0 < h {
            continue;
        }
        let anchor = Coord::new(rng.gen_range(x0..=x1 - w), rng.gen_range(y0..=y1 - h));
        let piece = Piece::at(id, symbol, rotation, anchor);
        if piece.covers(center) || !board.can_place(&piece) {
            continue;
        }
        board.add_piece(piece)?;
        return Ok(id);
    }
    Err(Error::Placement(PLACEMENT_TRIES))
}

/// One game instance: a board and the piece the guide has to get taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub task_id: String,
    pub board_id: String,
    pub board: Board,
    pub target_id: PieceId,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TaskRecord {
    schema_version: u32,
    task_id: String,
    board_id: String,
    width: usize,
    height: usize,
    pieces: Vec<Piece>,
    target_id: PieceId,
    split: Split,
}

impl Task {
    pub fn target(&self) -> &Piece {
        self.board.piece(self.target_id).expect("validated task has its target")
    }

    pub fn distractors(&self) -> impl Iterator<Item = &Piece> {
        self.board.pieces().iter().filter(move |p| p.id != self.target_id)
    }

    /// Checks the task invariants: 2 to 8 pieces, a present target, and every piece inside its
    /// labelled area.
    pub fn validate(&self) -> Result<()> {
        let n = self.board.pieces().len();
        if !(2..=8).contains(&n) {
            return Err(Error::InvalidTask(format!("{}: {n} pieces (expected 2..=8)", self.task_id)));
        }
        self.board.piece(self.target_id)?;
        let dims = self.board.dims();
        for p in self.board.pieces() {
            for &t in &p.tiles {
                if region_of(t, dims)? != Region::Area(p.symbol.area) {
                    return Err(Error::InvalidTask(format!(
                        "{}: piece {} tile {t} lies outside area {}",
                        self.task_id, p.id, p.symbol.area
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = TaskRecord {
            schema_version: SCHEMA_VERSION,
            task_id: self.task_id.clone(),
            board_id: self.board_id.clone(),
            width: self.board.width(),
            height: self.board.height(),
            pieces: self.board.pieces().to_vec(),
            target_id: self.target_id,
            split: self.split,
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(line: &str) -> Result<Task> {
        let rec: TaskRecord = serde_json::from_str(line)?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidTask(format!("unsupported schema version {}", rec.schema_version)));
        }
        let board = Board::from_pieces(Dims::new(rec.width, rec.height), rec.pieces)?;
        let task =
            Task { task_id: rec.task_id, board_id: rec.board_id, board, target_id: rec.target_id, split: rec.split };
        task.validate()?;
        Ok(task)
    }
}

/// Fills a board with a target and `n - 1` distractors drawn from `pool`. Symbols on one board
/// are pairwise distinct. Returns the board and the target's id.
fn build_board<R: Rng + ?Sized>(
    dims: Dims,
    target: PieceSymbol,
    pool: &[PieceSymbol],
    n: usize,
    rng: &mut R,
) -> Result<(Board, PieceId)> {
    let mut board = Board::new(dims);
    let target_id = place_piece(&mut board, target, 1, rng)?;
    let mut used: BTreeSet<PieceSymbol> = BTreeSet::from([target]);
    let mut budget = 10_000;
    while board.pieces().len() < n {
        budget -= 1;
        if budget == 0 {
            return Err(Error::Generation(format!("could not fill a board with {n} pieces")));
        }
        let sym = pool[rng.gen_range(0..pool.len())];
        if used.contains(&sym) {
            continue;
        }
        let id = board.next_piece_id();
        match place_piece(&mut board, sym, id, rng) {
            Ok(_) => {
                used.insert(sym);
            }
            Err(Error::Placement(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok((board, target_id))
}

/// Generates the tasks of one split.
///
/// Training: for every piece count, boards whose primary targets cycle through the training
/// symbols; each board yields the primary task plus up to three extra targets (every piece when
/// the board has fewer than four). Distractors come from the training symbols.
///
/// Evaluation: for every piece count, one board and one task per target symbol of the split;
/// distractors mix the split's own and the training symbols.
pub fn generate_split(
    spec: &SplitSpec,
    universe: &SymbolUniverse,
    split: Split,
    master_seed: u64,
) -> Result<Vec<Task>> {
    let mut rng = seed::rng(master_seed, split.stream());
    let dims = Dims::square(spec.map_size);
    let tps = universe.tps(split);
    if tps.is_empty() {
        return Err(Error::Generation(format!("split {split} has no target symbols")));
    }
    let mut tasks = Vec::new();
    let mut boards = 0usize;
    let push = |tasks: &mut Vec<Task>, board: &Board, board_id: &str, target_id: PieceId| {
        tasks.push(Task {
            task_id: format!("{}-{:05}", split.name(), tasks.len()),
            board_id: board_id.to_string(),
            board: board.clone(),
            target_id,
            split,
        });
    };
    match split {
        Split::Train => {
            let mut order = tps.to_vec();
            order.shuffle(&mut rng);
            let mut next = 0usize;
            for n in spec.piece_counts() {
                for _ in 0..spec.train_boards_per_count {
                    let target = order[next % order.len()];
                    next += 1;
                    let (board, primary) = build_board(dims, target, tps, n, &mut rng)?;
                    let board_id = format!("{}-b{boards:04}", split.name());
                    boards += 1;
                    let mut targets = vec![primary];
                    let mut others: Vec<PieceId> =
                        board.pieces().iter().map(|p| p.id).filter(|&id| id != primary).collect();
                    others.shuffle(&mut rng);
                    targets.extend(others.into_iter().take(spec.tasks_per_train_board - 1));
                    for t in targets {
                        push(&mut tasks, &board, &board_id, t);
                    }
                }
            }
        }
        Split::Validation | Split::Test => {
            let pool: Vec<PieceSymbol> = tps.iter().chain(universe.train.iter()).copied().collect();
            for n in spec.piece_counts() {
                for &target in tps {
                    let (board, t) = build_board(dims, target, &pool, n, &mut rng)?;
                    let board_id = format!("{}-b{boards:04}", split.name());
                    boards += 1;
                    push(&mut tasks, &board, &board_id, t);
                }
            }
        }
    }
    let want = spec.counts(split);
    if tasks.len() != want.tasks || boards != want.boards {
        return Err(Error::Generation(format!(
            "split {split}: generated {} tasks over {boards} boards, expected {} over {}",
            tasks.len(),
            want.tasks,
            want.boards
        )));
    }
    Ok(tasks)
}

/// All three splits together with the universe they were drawn from.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub seed: u64,
    pub universe: SymbolUniverse,
    pub train: Vec<Task>,
    pub validation: Vec<Task>,
    pub test: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub tasks: usize,
    pub boards: usize,
    pub tps: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub splits: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Dataset {
    pub fn generate(spec: &SplitSpec, master_seed: u64) -> Result<Dataset> {
        let universe = build_symbol_universe(spec, master_seed)?;
        // splits use independent seed streams, so they can be built concurrently
        let (train, validation, test) = std::thread::scope(|s| {
            let handles = Split::ALL.map(|split| {
                let universe = &universe;
                s.spawn(move || generate_split(spec, universe, split, master_seed))
            });
            let [a, b, c] = handles.map(|h| h.join().expect("split generation panicked"));
            (a, b, c)
        });
        Ok(Dataset { seed: master_seed, universe, train: train?, validation: validation?, test: test? })
    }

    pub fn split(&self, split: Split) -> &[Task] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    /// Task file contents for one split: one JSON object per line.
    pub fn jsonl(&self, split: Split) -> Result<String> {
        let mut out = String::new();
        for t in self.split(split) {
            out.push_str(&t.to_json()?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Writes `train.jsonl`, `validation.jsonl`, `test.jsonl`, `universe.json` and
    /// `manifest.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Manifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut splits = Vec::new();
        for split in Split::ALL {
            let body = self.jsonl(split)?;
            let file = split.file_name();
            fs::File::create(dir.join(&file))?.write_all(body.as_bytes())?;
            let tasks = self.split(split);
            splits.push(ManifestEntry {
                file,
                tasks: tasks.len(),
                boards: tasks.iter().map(|t| &t.board_id).collect::<BTreeSet<_>>().len(),
                tps: self.universe.tps(split).len(),
                sha256: sha256_hex(body.as_bytes()),
            });
        }
        fs::write(dir.join("universe.json"), serde_json::to_string_pretty(&self.universe)?)?;
        let manifest = Manifest { schema_version: SCHEMA_VERSION, seed: self.seed, splits };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

pub fn read_tasks(path: impl AsRef<Path>) -> Result<Vec<Task>> {
    let file = fs::File::open(path.as_ref())?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(Task::from_json(&line)?);
    }
    Ok(out)
}

pub fn load_split(dir: impl AsRef<Path>, split: Split) -> Result<Vec<Task>> {
    read_tasks(dir.as_ref().join(split.file_name()))
}
