//! Newline-delimited JSON protocol through which an external learner plays the guide.
//!
//! Every request line gets exactly one response line. Malformed requests are answered with an
//! error that echoes the request; the session and its environments are left untouched.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::{Episode, StepRecord};
use crate::error::{Error, Result};
use crate::follower::FollowerConfig;
use crate::language::IntentAction;
use crate::metrics::{summarize, MetricsReport};
use crate::replay::ascii_board;
use crate::rollout::episode_seeds;
use crate::seed;
use crate::taskgen::{load_split, Split, Task};
use crate::view::{GuideView, GUIDE_CHANNELS};

pub const PROTOCOL_VERSION: u32 = 1;
pub const ACTION_SPACE: usize = 14;
/// Upper bound on environments per session.
pub const MAX_ENVS: usize = 64;

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Hello,
    Make {
        split: Split,
        follower: FollowerConfig,
        seed: u64,
        num_envs: usize,
        /// Reset a finished environment on the next step instead of answering with an error.
        #[serde(default)]
        auto_reset: bool,
        /// Walk the split in order (env `i` plays tasks `i`, `i + num_envs`, ...) instead of
        /// sampling tasks.
        #[serde(default)]
        sequential: bool,
        /// Ship the guide view with every reset and step.
        #[serde(default = "default_true")]
        observations: bool,
    },
    Reset {
        /// All environments when absent.
        #[serde(default)]
        env_id: Option<usize>,
    },
    Step {
        env_id: usize,
        action_id: usize,
    },
    StepBatch {
        action_ids: Vec<usize>,
    },
    Render {
        env_id: usize,
    },
    Trace {
        env_id: usize,
    },
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub shape: [usize; 3],
    pub data: Vec<f32>,
}

impl From<GuideView<f32>> for Observation {
    fn from(v: GuideView<f32>) -> Self {
        Observation { shape: v.shape(), data: v.into_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetResult {
    pub env_id: usize,
    pub task_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfoMsg {
    pub success: bool,
    pub effort: f64,
    pub episode_length: usize,
    pub utterance: String,
    /// Set when the environment was reset after this step ended an episode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_task_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub env_id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfoMsg,
}

/// Task files of a data directory, loaded on first use and shared between sessions.
#[derive(Debug, Default)]
pub struct DataStore {
    dir: Option<PathBuf>,
    loaded: Mutex<HashMap<Split, Arc<Vec<Task>>>>,
}

impl DataStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DataStore { dir: Some(dir.into()), loaded: Mutex::default() }
    }

    /// A store holding the given tasks in memory.
    pub fn from_tasks(tasks: impl IntoIterator<Item = (Split, Vec<Task>)>) -> Self {
        let loaded = tasks.into_iter().map(|(s, t)| (s, Arc::new(t))).collect();
        DataStore { dir: None, loaded: Mutex::new(loaded) }
    }

    pub fn split(&self, split: Split) -> Result<Arc<Vec<Task>>> {
        let mut loaded = self.loaded.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = loaded.get(&split) {
            return Ok(t.clone());
        }
        let dir = self.dir.as_ref().ok_or_else(|| Error::Usage(format!("no {split} tasks loaded")))?;
        let tasks = Arc::new(load_split(dir, split)?);
        if tasks.is_empty() {
            return Err(Error::Usage(format!("{split} split is empty")));
        }
        log::info!("loaded {} {split} tasks from {}", tasks.len(), dir.display());
        loaded.insert(split, tasks.clone());
        Ok(tasks)
    }
}

#[derive(Debug)]
struct Env {
    id: usize,
    rng: ChaCha8Rng,
    episodes: u64,
    episode: Option<Episode>,
}

#[derive(Debug)]
struct EnvSet {
    tasks: Arc<Vec<Task>>,
    follower: FollowerConfig,
    seed: u64,
    auto_reset: bool,
    sequential: bool,
    observations: bool,
    envs: Vec<Env>,
}

impl EnvSet {
    fn reset(&mut self, env_id: usize) -> Result<ResetResult> {
        let n = self.envs.len();
        let env = self.envs.get_mut(env_id).ok_or_else(|| env_error(env_id, n))?;
        let index = if self.sequential {
            (env.episodes as usize * n + env.id) % self.tasks.len()
        } else {
            env.rng.gen_range(0..self.tasks.len())
        };
        let env_seed = seed::derive(self.seed, env.id as u64);
        let seeds = episode_seeds(env_seed, env.episodes as usize);
        env.episodes += 1;
        let task = &self.tasks[index];
        let (ep, obs) = Episode::reset(task, self.follower, seeds)?;
        env.episode = Some(ep);
        Ok(ResetResult { env_id, task_id: task.task_id.clone(), observation: self.observations.then(|| obs.into()) })
    }

    fn step(&mut self, env_id: usize, action_id: usize) -> Result<StepResult> {
        let n = self.envs.len();
        let intent = IntentAction::from_id(action_id)?;
        let env = self.envs.get(env_id).ok_or_else(|| env_error(env_id, n))?;
        let needs_reset = env.episode.as_ref().is_none_or(|e| e.is_terminal());
        if needs_reset {
            if !self.auto_reset || env.episode.is_none() {
                return Err(if env.episode.is_none() {
                    Error::Usage(format!("env {env_id} has not been reset"))
                } else {
                    Error::EpisodeTerminal
                });
            }
            self.reset(env_id)?;
        }
        let ep = self.envs[env_id].episode.as_mut().expect("env was reset above");
        let out = ep.step(intent)?;
        let mut result = StepResult {
            env_id,
            observation: self.observations.then(|| out.observation.into()),
            reward: out.reward,
            done: out.done,
            info: StepInfoMsg {
                success: out.info.success,
                effort: out.info.effort,
                episode_length: out.info.episode_length,
                utterance: out.info.utterance,
                next_task_id: None,
            },
        };
        if out.done && self.auto_reset {
            let r = self.reset(env_id)?;
            result.info.next_task_id = Some(r.task_id);
            result.observation = r.observation;
        }
        Ok(result)
    }

    fn episode(&self, env_id: usize) -> Result<&Episode> {
        let env = self.envs.get(env_id).ok_or_else(|| env_error(env_id, self.envs.len()))?;
        env.episode.as_ref().ok_or_else(|| Error::Usage(format!("env {env_id} has not been reset")))
    }
}

fn env_error(env_id: usize, n: usize) -> Error {
    Error::Usage(format!("env_id {env_id} out of range (0..{n})"))
}

/// Protocol state of one connection.
#[derive(Debug)]
pub struct Session {
    data: Arc<DataStore>,
    envs: Option<EnvSet>,
    closed: bool,
}

impl Session {
    pub fn new(data: Arc<DataStore>) -> Self {
        Session { data, envs: None, closed: false }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Answers one request line. Never panics on malformed input.
    pub fn handle_line(&mut self, line: &str) -> String {
        let response = match serde_json::from_str::<Request>(line) {
            Ok(req) => match self.handle(&req) {
                Ok(v) => v,
                Err(e) => error_response(&e.to_string(), echo(line)),
            },
            Err(e) => error_response(&format!("malformed request: {e}"), echo(line)),
        };
        response.to_string()
    }

    pub fn handle(&mut self, req: &Request) -> Result<Value> {
        match req {
            Request::Hello => Ok(json!({
                "ok": true,
                "op": "hello",
                "protocol_version": PROTOCOL_VERSION,
                "action_space": ACTION_SPACE,
                "obs_shape": [crate::domain::MAP_SIZE, crate::domain::MAP_SIZE, GUIDE_CHANNELS],
            })),
            Request::Make { split, follower, seed, num_envs, auto_reset, sequential, observations } => {
                if *num_envs == 0 || *num_envs > MAX_ENVS {
                    return Err(Error::Usage(format!("num_envs must lie in 1..={MAX_ENVS}")));
                }
                follower.validate()?;
                let tasks = self.data.split(*split)?;
                let envs = (0..*num_envs)
                    .map(|id| Env { id, rng: seed::rng(*seed, id as u64), episodes: 0, episode: None })
                    .collect();
                self.envs = Some(EnvSet {
                    tasks,
                    follower: *follower,
                    seed: *seed,
                    auto_reset: *auto_reset,
                    sequential: *sequential,
                    observations: *observations,
                    envs,
                });
                Ok(json!({ "ok": true, "op": "make", "num_envs": num_envs, "split": split }))
            }
            Request::Reset { env_id } => {
                let set = self.env_set()?;
                let results = match env_id {
                    Some(id) => vec![set.reset(*id)?],
                    None => (0..set.envs.len()).map(|i| set.reset(i)).collect::<Result<Vec<_>>>()?,
                };
                Ok(json!({ "ok": true, "op": "reset", "results": results }))
            }
            Request::Step { env_id, action_id } => {
                let r = self.env_set()?.step(*env_id, *action_id)?;
                let mut v = serde_json::to_value(r)?;
                v["ok"] = json!(true);
                v["op"] = json!("step");
                Ok(v)
            }
            Request::StepBatch { action_ids } => {
                let set = self.env_set()?;
                if action_ids.len() != set.envs.len() {
                    return Err(Error::Usage(format!(
                        "step_batch needs {} actions, got {}",
                        set.envs.len(),
                        action_ids.len()
                    )));
                }
                // validate everything first so a bad batch changes nothing
                for (i, &a) in action_ids.iter().enumerate() {
                    IntentAction::from_id(a)?;
                    let ep = set.episode(i)?;
                    if ep.is_terminal() && !set.auto_reset {
                        return Err(Error::EpisodeTerminal);
                    }
                }
                let results =
                    action_ids.iter().enumerate().map(|(i, &a)| set.step(i, a)).collect::<Result<Vec<_>>>()?;
                Ok(json!({ "ok": true, "op": "step_batch", "results": results }))
            }
            Request::Render { env_id } => {
                let ep = self.env_set()?.episode(*env_id)?;
                Ok(json!({
                    "ok": true,
                    "op": "render",
                    "env_id": env_id,
                    "t": ep.t(),
                    "ascii": ascii_board(&ep.task().board, ep.gripper(), ep.task().target_id),
                }))
            }
            Request::Trace { env_id } => {
                let ep = self.env_set()?.episode(*env_id)?;
                let steps: &[StepRecord] = ep.steps();
                Ok(json!({
                    "ok": true,
                    "op": "trace",
                    "env_id": env_id,
                    "task_id": ep.task().task_id,
                    "done": ep.is_terminal(),
                    "steps": steps,
                }))
            }
            Request::Close => {
                self.closed = true;
                Ok(json!({ "ok": true, "op": "close" }))
            }
        }
    }

    fn env_set(&mut self) -> Result<&mut EnvSet> {
        self.envs.as_mut().ok_or_else(|| Error::Usage("no environments; send make first".into()))
    }
}

fn echo(line: &str) -> Value {
    serde_json::from_str::<Value>(line).unwrap_or_else(|_| Value::String(line.to_string()))
}

fn error_response(message: &str, request: Value) -> Value {
    json!({ "ok": false, "error": message, "request": request })
}

/// Serves one session over a reader/writer pair until `close` or end of input.
pub fn serve_stream<R: BufRead, W: Write>(data: Arc<DataStore>, mut input: R, mut output: W) -> Result<()> {
    let mut session = Session::new(data);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        let line = String::from_utf8_lossy(&buf);
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let response = session.handle_line(line);
        output.write_all(response.as_bytes())?;
        output.write_all(b"\n")?;
        output.flush()?;
        if session.is_closed() {
            return Ok(());
        }
    }
}

pub fn serve_stdio(data: Arc<DataStore>) -> Result<()> {
    let stdin = std::io::stdin();
    serve_stream(data, stdin.lock(), std::io::stdout().lock())
}

/// Accepts connections forever, one thread and one session per connection.
pub fn serve_tcp(data: Arc<DataStore>, listener: TcpListener) -> Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let data = data.clone();
        thread::spawn(move || {
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            log::info!("session opened: {peer}");
            if let Err(e) = serve_connection(data, stream) {
                log::warn!("session {peer} ended with error: {e}");
            } else {
                log::info!("session closed: {peer}");
            }
        });
    }
    Ok(())
}

fn serve_connection(data: Arc<DataStore>, stream: TcpStream) -> Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    serve_stream(data, reader, stream)
}

/// A guide policy that sees only what the protocol ships: the guide view.
pub trait Policy {
    fn begin_episode(&mut self) {}

    fn act(&mut self, observation: &GuideView<f32>) -> Result<usize>;
}

impl<P: FnMut(&GuideView<f32>) -> usize> Policy for P {
    fn act(&mut self, observation: &GuideView<f32>) -> Result<usize> {
        Ok(self(observation))
    }
}

/// Plays every task of a split once with `policy` and summarizes the episodes. Task `i` uses the
/// follower seed `episode_seeds(seed, i)`.
pub fn checkpoint_eval(
    policy: &mut dyn Policy,
    tasks: &[Task],
    follower: FollowerConfig,
    seed: u64,
) -> Result<MetricsReport> {
    let mut traces = Vec::with_capacity(tasks.len());
    for (i, task) in tasks.iter().enumerate() {
        let (mut ep, mut obs) = Episode::reset(task, follower, episode_seeds(seed, i))?;
        policy.begin_episode();
        while !ep.is_terminal() {
            let action = IntentAction::from_id(policy.act(&obs)?)?;
            obs = ep.step(action)?.observation;
        }
        traces.push(ep.trace()?);
    }
    summarize(&traces)
}
