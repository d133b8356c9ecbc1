use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use cogrip::engine::EpisodeTrace;
use cogrip::follower::PHI_GRID;
use cogrip::language::{parse, verbalize, vocabulary_index, VerbalContext};
use cogrip::metrics::{export, summarize, ExportFormat};
use cogrip::protocol::{serve_stdio, serve_tcp, DataStore};
use cogrip::refexp::{incremental_algorithm, PropertySet};
use cogrip::replay::{ascii_frames, write_png_frames};
use cogrip::rollout::{default_threads, rollout};
use cogrip::taskgen::load_split;
use cogrip::{Autonomy, Dataset, FollowerConfig, GuideKind, IntentAction, PreferenceOrder, Split, SplitSpec, Task};

/// Collaborative Pentomino reference game: data generation, scripted rollouts, evaluation and
/// the trainer protocol server.
#[derive(Parser)]
#[command(name = "cogrip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Directory with the generated task files. Without it the tasks are regenerated in memory
    /// from --gen-seed.
    #[arg(long, env = "COGRIP_DATA")]
    data: Option<PathBuf>,
    /// Generation seed used when no data directory is given.
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
}

impl DataArgs {
    fn load(&self, split: Split) -> anyhow::Result<Vec<Task>> {
        match &self.data {
            Some(dir) => {
                load_split(dir, split).with_context(|| format!("loading {split} tasks from {}", dir.display()))
            }
            None => {
                log::info!("no data directory given; generating tasks with seed {}", self.gen_seed);
                Ok(Dataset::generate(&SplitSpec::default(), self.gen_seed)?.split(split).to_vec())
            }
        }
    }

    fn find_task(&self, task_id: &str) -> anyhow::Result<Task> {
        for split in Split::ALL {
            if let Some(t) = self.load(split)?.into_iter().find(|t| t.task_id == task_id) {
                return Ok(t);
            }
        }
        bail!("no task with id '{task_id}'")
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the train, validation and test task files.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Show referring expressions for every preference order on a small board.
    Refexp {
        #[arg(long, required = true)]
        demo: bool,
    },
    /// Verbalize an intent for a task, or export the vocabulary.
    Language {
        /// Task id and intent (an id 0..13, `silence`, `directive:left`, `reference` (CSP), `reference:PCS`, ...).
        #[arg(long, num_args = 2, value_names = ["TASK", "INTENT"])]
        verbalize: Option<Vec<String>>,
        /// Write the word-to-index vocabulary as JSON (`-` for stdout).
        #[arg(long, value_name = "FILE")]
        vocabulary: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run a scripted guide over a split and report metrics.
    Rollout {
        #[arg(long, default_value = "reference")]
        guide: GuideKind,
        #[arg(long, default_value = "cautious")]
        follower: Autonomy,
        /// Comma-separated confidence discounts, or `all` for the experiment grid.
        #[arg(long, default_value = "0.9")]
        phi: String,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Rollout seeds; each gives an independent follower stream.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        /// Directory receiving one JSONL trace file per configuration.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Report file; the extension picks the format (md, csv, json).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Serve the trainer protocol over TCP or stdio.
    Serve {
        #[arg(long, value_name = "PORT", conflicts_with = "stdio")]
        tcp: Option<u16>,
        #[arg(long)]
        stdio: bool,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Summarize trace files into a report.
    Evaluate {
        /// Directory of JSONL trace files (or a single file).
        #[arg(long)]
        traces: PathBuf,
        /// Report file; the extension picks the format (md, csv, json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a recorded episode as ASCII frames or PNG images.
    Replay {
        /// JSONL trace file.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        task_id: String,
        /// Write PNG frames into this directory instead of printing ASCII.
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        scale: u32,
        #[command(flatten)]
        data: DataArgs,
    },
}

/// Like `println!` but returns the write error instead of panicking on a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*)?
    };
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COGRIP_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { seed, out } => generate(seed, &out),
        Command::Refexp { .. } => refexp_demo(),
        Command::Language { verbalize, vocabulary, data } => language(verbalize, vocabulary, &data),
        Command::Rollout { guide, follower, phi, split, seeds, traces, out, threads, data } => {
            let phis = parse_phis(&phi)?;
            let tasks = data.load(split)?;
            let threads = threads.unwrap_or_else(default_threads);
            let mut all = Vec::new();
            for &phi in &phis {
                for &seed in &seeds {
                    let cfg = FollowerConfig::new(follower, phi);
                    let tr = rollout(&tasks, cfg, guide, seed, threads)?;
                    if let Some(dir) = &traces {
                        let name = format!("{guide}_{follower}_phi{phi}_seed{seed}.jsonl").replace(':', "-");
                        write_traces(&dir.join(name), &tr)?;
                    }
                    all.extend(tr);
                }
            }
            let report = summarize(&all)?;
            out!("{}", export(&report, ExportFormat::Table)?);
            if let Some(out) = out {
                write_report(&report, &out)?;
            }
            Ok(())
        }
        Command::Serve { tcp, stdio, host, data } => {
            let store = Arc::new(match &data.data {
                Some(dir) => DataStore::new(dir),
                None => {
                    let ds = Dataset::generate(&SplitSpec::default(), data.gen_seed)?;
                    DataStore::from_tasks(Split::ALL.map(|s| (s, ds.split(s).to_vec())))
                }
            });
            match (tcp, stdio) {
                (Some(port), false) => {
                    let listener =
                        TcpListener::bind((host.as_str(), port)).with_context(|| format!("binding port {port}"))?;
                    serve_tcp(store, listener)?;
                }
                (None, true) => serve_stdio(store)?,
                _ => bail!("pass either --tcp PORT or --stdio"),
            }
            Ok(())
        }
        Command::Evaluate { traces, out } => {
            let all = read_trace_dir(&traces)?;
            let report = summarize(&all)?;
            write_report(&report, &out)?;
            out!("{}", export(&report, ExportFormat::Table)?);
            Ok(())
        }
        Command::Replay { traces, task_id, png, scale, data } => {
            let trace = read_traces(&traces)?
                .into_iter()
                .find(|t| t.task_id == task_id)
                .ok_or_else(|| anyhow!("no trace for task '{task_id}' in {}", traces.display()))?;
            let task = data.find_task(&task_id)?;
            match png {
                Some(dir) => {
                    let files = write_png_frames(&task, &trace, &dir, scale)?;
                    out!("wrote {} frames to {}", files.len(), dir.display());
                }
                None => {
                    cogrip::engine::replay(&task, &trace)?;
                    for frame in ascii_frames(&task, &trace) {
                        out!("{frame}");
                    }
                }
            }
            Ok(())
        }
    }
}

fn generate(seed: u64, out: &Path) -> anyhow::Result<()> {
    let ds = Dataset::generate(&SplitSpec::default(), seed)?;
    let manifest = ds.write(out)?;
    fs::write(out.join("vocabulary.json"), serde_json::to_string_pretty(&vocabulary_index())?)?;
    for e in &manifest.splits {
        out!("{:<18} {:>5} tasks {:>4} boards {:>4} TPS  sha256 {}", e.file, e.tasks, e.boards, e.tps, e.sha256);
    }
    Ok(())
}

fn refexp_demo() -> anyhow::Result<()> {
    use cogrip::{Area, Color, PieceSymbol, Shape};
    let target = PieceSymbol::new(Shape::X, Color::Blue, Area::TopLeft);
    let distractors = [
        PieceSymbol::new(Shape::X, Color::Red, Area::TopLeft),
        PieceSymbol::new(Shape::T, Color::Blue, Area::Right),
        PieceSymbol::new(Shape::X, Color::Blue, Area::BottomRight),
    ];
    out!("target:      {} {} at {}", target.color, target.shape, target.area);
    for d in &distractors {
        out!("distractor:  {} {} at {}", d.color, d.shape, d.area);
    }
    for order in PreferenceOrder::ALL {
        let props: PropertySet = incremental_algorithm(&target, &distractors, order);
        out!("{order}: {}", cogrip::language::realize_reference(&props));
    }
    Ok(())
}

fn language(verbalize_args: Option<Vec<String>>, vocabulary: Option<PathBuf>, data: &DataArgs) -> anyhow::Result<()> {
    if verbalize_args.is_none() && vocabulary.is_none() {
        bail!("pass --verbalize TASK INTENT and/or --vocabulary FILE");
    }
    if let Some(args) = verbalize_args {
        let task = data.find_task(&args[0])?;
        let intent: IntentAction = args[1].parse()?;
        let ctx = VerbalContext { board: &task.board, gripper: task.board.center(), target_id: task.target_id };
        let u = verbalize(intent, &ctx)?;
        out!("intent:    {intent} (id {})", intent.id());
        out!("utterance: {:?}", u.surface);
        out!("tokens:    {}", u.tokens.join(" "));
        out!("parsed:    {:?}", parse(&u));
    }
    if let Some(path) = vocabulary {
        let json = serde_json::to_string_pretty(&vocabulary_index())?;
        if path.as_os_str() == "-" {
            out!("{json}");
        } else {
            fs::write(&path, json + "\n")?;
        }
    }
    Ok(())
}

fn parse_phis(s: &str) -> anyhow::Result<Vec<f64>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(PHI_GRID.to_vec());
    }
    s.split(',').map(|p| p.trim().parse::<f64>().with_context(|| format!("invalid phi '{p}'"))).collect()
}

fn write_traces(path: &Path, traces: &[EpisodeTrace]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for t in traces {
        writeln!(f, "{}", t.to_json()?)?;
    }
    f.flush()?;
    Ok(())
}

fn read_traces(path: &Path) -> anyhow::Result<Vec<EpisodeTrace>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn read_trace_dir(path: &Path) -> anyhow::Result<Vec<EpisodeTrace>> {
    if path.is_file() {
        return read_traces(path);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(read_traces(&f)?);
    }
    Ok(out)
}

fn write_report(report: &cogrip::MetricsReport, out: &Path) -> anyhow::Result<()> {
    let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("");
    let doc = export(report, ExportFormat::from_extension(ext)?)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, doc)?;
    Ok(())
}
