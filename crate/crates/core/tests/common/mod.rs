//! Checks shared by the integration tests and the acceptance runner. Each returns a short
//! summary on success and a description of the first violation otherwise.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use cogrip::domain::{Area, Color, Coord, Gripper, PieceSymbol, Shape};
use cogrip::engine::{replay, EpisodeTrace};
use cogrip::follower::FollowerState;
use cogrip::language::{
    parse, reference_properties, verbalize, IntentAction, ParsedIntent, VerbalContext, MAX_UTTERANCE_LEN, UNK,
};
use cogrip::planner::MoveAction;
use cogrip::protocol::{DataStore, Request, Session};
use cogrip::refexp::{incremental_algorithm, PreferenceOrder, Property, PropertySet};
use cogrip::rollout::rollout;
use cogrip::view::render_follower_view;
use cogrip::{Autonomy, Dataset, FollowerConfig, GuideKind, Split, SplitSpec, Task};

pub type Check = Result<String, String>;

/// The default dataset (seed 0), generated once per test binary.
pub fn dataset() -> &'static Dataset {
    static DATA: OnceLock<Dataset> = OnceLock::new();
    DATA.get_or_init(|| Dataset::generate(&SplitSpec::default(), 0).expect("generation succeeds"))
}

pub fn random_symbol(rng: &mut impl Rng) -> PieceSymbol {
    PieceSymbol::new(
        *Shape::ALL.choose(rng).unwrap(),
        *Color::ALL.choose(rng).unwrap(),
        *Area::ALL.choose(rng).unwrap(),
    )
}

fn value(p: Property, s: &PieceSymbol) -> u8 {
    match p {
        Property::Color => s.color.code(),
        Property::Shape => s.shape.code(),
        Property::Position => Area::ALL.iter().position(|a| *a == s.area).unwrap() as u8,
    }
}

/// Straightforward restatement of the greedy exclusion loop over property codes.
pub fn ia_oracle(referent: &PieceSymbol, distractors: &[PieceSymbol], order: PreferenceOrder) -> Vec<Property> {
    if distractors.is_empty() {
        return vec![order.properties()[0]];
    }
    let mut left: Vec<&PieceSymbol> = distractors.iter().collect();
    let mut out = Vec::new();
    for p in order.properties() {
        if left.is_empty() {
            break;
        }
        let keep: Vec<&PieceSymbol> = left.iter().copied().filter(|d| value(p, d) == value(p, referent)).collect();
        if keep.len() < left.len() {
            out.push(p);
            left = keep;
        }
    }
    out
}

fn props_of(set: &PropertySet) -> Vec<Property> {
    let mut v = Vec::new();
    if set.area.is_some() {
        v.push(Property::Position);
    }
    if set.color.is_some() {
        v.push(Property::Color);
    }
    if set.shape.is_some() {
        v.push(Property::Shape);
    }
    v
}

/// Exclusion soundness and agreement with the oracle on `n` random instances, plus evidence
/// that the preference order matters.
pub fn check_incremental_algorithm(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order_sensitive = 0;
    for case in 0..n {
        let referent = random_symbol(&mut rng);
        let k = rng.gen_range(0..=7);
        let distractors: Vec<PieceSymbol> =
            (0..k).map(|_| if rng.gen_bool(0.05) { referent } else { random_symbol(&mut rng) }).collect();
        let mut results = Vec::new();
        for order in PreferenceOrder::ALL {
            let got = incremental_algorithm(&referent, &distractors, order);
            if !got.matches(&referent) {
                return Err(format!("case {case}: {order} result {got:?} does not describe the referent"));
            }
            for d in &distractors {
                if d != &referent && got.matches(d) {
                    return Err(format!("case {case}: {order} result {got:?} fails to exclude {d:?}"));
                }
            }
            let mut want = ia_oracle(&referent, &distractors, order);
            want.sort_by_key(|p| *p as u8);
            let mut have = props_of(&got);
            have.sort_by_key(|p| *p as u8);
            if want != have {
                return Err(format!("case {case}: {order} gave {have:?}, oracle {want:?}"));
            }
            results.push(got);
        }
        if results.iter().any(|r| r != &results[0]) {
            order_sensitive += 1;
        }
    }
    if order_sensitive == 0 {
        return Err("no instance where the preference order changed the expression".into());
    }
    Ok(format!("{n} instances sound, {order_sensitive} order-sensitive"))
}

/// `parse(verbalize(intent))` recovers the intent for every intent in `contexts` random
/// (task, gripper) contexts.
pub fn check_round_trip(contexts: usize, seed: u64) -> Check {
    let tasks = dataset().split(Split::Test);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..contexts {
        let task = tasks.choose(&mut rng).unwrap();
        let gripper = Coord::new(rng.gen_range(0..21), rng.gen_range(0..21));
        let ctx = VerbalContext { board: &task.board, gripper, target_id: task.target_id };
        for intent in IntentAction::all() {
            let u = verbalize(intent, &ctx).map_err(|e| e.to_string())?;
            let parsed = parse(&u);
            let ok = match (intent, parsed) {
                (IntentAction::Silence, ParsedIntent::Silence { malformed: false }) => true,
                (IntentAction::Confirm, ParsedIntent::Confirm) => true,
                (IntentAction::Decline, ParsedIntent::Decline) => true,
                (IntentAction::Directive(d), ParsedIntent::Directive { directive }) => d == directive,
                (IntentAction::Reference(o), ParsedIntent::Reference { descriptor }) => {
                    descriptor == reference_properties(&task.board, task.target_id, o).map_err(|e| e.to_string())?
                }
                _ => false,
            };
            if !ok {
                return Err(format!("{}: {intent} -> {:?} -> {parsed:?}", task.task_id, u.surface));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} intent/context pairs round-trip"))
}

/// Every utterance over every task of every split uses only vocabulary words and fits the
/// length bound including start and end markers.
pub fn check_vocabulary_closure() -> Check {
    let mut utterances = 0;
    let mut longest = 0;
    for split in Split::ALL {
        for task in dataset().split(split) {
            let mut grippers = vec![task.board.center()];
            grippers.extend(task.board.pieces().iter().map(|p| p.tiles[0]));
            for gripper in grippers {
                let ctx = VerbalContext { board: &task.board, gripper, target_id: task.target_id };
                for intent in IntentAction::all() {
                    let u = verbalize(intent, &ctx).map_err(|e| e.to_string())?;
                    let words = u.surface.split_whitespace().count();
                    if u.tokens.len() != words || u.tokens.iter().any(|t| t == UNK) {
                        return Err(format!("{}: {:?} maps to {:?}", task.task_id, u.surface, u.tokens));
                    }
                    if u.tokens.iter().any(|t| !cogrip::language::in_vocabulary(t)) {
                        return Err(format!("{:?} yields tokens outside the vocabulary", u.surface));
                    }
                    if u.tokens.len() + 2 > MAX_UTTERANCE_LEN {
                        return Err(format!("{:?} exceeds {MAX_UTTERANCE_LEN} tokens", u.surface));
                    }
                    longest = longest.max(u.tokens.len() + 2);
                    utterances += 1;
                }
            }
        }
    }
    Ok(format!("{utterances} utterances closed over the vocabulary, longest {longest} tokens with markers"))
}

/// With `phi` and floor 0, the action at plan index `i` executes on its first draw with
/// frequency `phi^i` within `tol`.
pub fn check_confidence_frequency(trials: usize, phi: f64, tol: f64) -> Check {
    let board = cogrip::Board::new(cogrip::Dims::square(21));
    let view = render_follower_view(&board, &Gripper::centered(board.dims()));
    let silence = ParsedIntent::Silence { malformed: false };
    let mut first_try = [0usize; 10];
    for trial in 0..trials {
        let cfg = FollowerConfig::new(Autonomy::Cautious, phi).with_floor(0.0);
        let mut f = FollowerState::new(cfg, cogrip::seed::derive(0xc0ffee, trial as u64));
        // waits never move the gripper, so the same view serves every step
        f.set_plan([MoveAction::Wait; 10], None);
        let mut index = 0;
        let mut fresh = true;
        while index < 10 {
            let before = f.plan().len();
            let d = f.step(&silence, &view);
            let executed = f.plan().len() < before;
            if fresh && executed {
                first_try[index] += 1;
            }
            if d.confidence.is_some_and(|c| (c - phi.powi(index as i32)).abs() > 1e-12) {
                return Err(format!("index {index} carried confidence {:?}", d.confidence));
            }
            fresh = executed;
            if executed {
                index += 1;
            }
        }
    }
    let mut worst = 0.0f64;
    for (i, &n) in first_try.iter().enumerate() {
        let freq = n as f64 / trials as f64;
        let dev = (freq - phi.powi(i as i32)).abs();
        if dev > tol {
            return Err(format!("index {i}: frequency {freq:.4}, expected {:.4}", phi.powi(i as i32)));
        }
        worst = worst.max(dev);
    }
    Ok(format!("{trials} trials, largest deviation {worst:.4}"))
}

pub fn trace_hashes(traces: &[EpisodeTrace]) -> Vec<String> {
    traces.iter().map(|t| t.hash().unwrap()).collect()
}

/// Two identical rollouts hash identically and every trace replays to itself.
pub fn check_replay_determinism(tasks: &[Task]) -> Check {
    let cfg = FollowerConfig::new(Autonomy::Eager, 0.85);
    let guide = GuideKind::Oracle;
    let a = rollout(tasks, cfg, guide, 11, 4).map_err(|e| e.to_string())?;
    let b = rollout(tasks, cfg, guide, 11, 1).map_err(|e| e.to_string())?;
    if trace_hashes(&a) != trace_hashes(&b) {
        return Err("two runs with the same seed produced different traces".into());
    }
    for (task, trace) in tasks.iter().zip(&a) {
        let again = replay(task, trace).map_err(|e| e.to_string())?;
        if again.hash().unwrap() != trace.hash().unwrap() {
            return Err(format!("{} does not replay to the same trace", task.task_id));
        }
    }
    Ok(format!("{} traces hash-stable across runs and replays", a.len()))
}

pub fn test_store() -> Arc<DataStore> {
    Arc::new(DataStore::from_tasks([(Split::Test, dataset().split(Split::Test).to_vec())]))
}

const MAKE: &str = r#"{"op":"make","split":"test","follower":{"autonomy":"eager","phi":0.9},"seed":5,"num_envs":3,"observations":false}"#;

fn random_value(rng: &mut impl Rng, depth: u32) -> Value {
    match rng.gen_range(0..if depth > 2 { 5 } else { 7 }) {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::from(rng.gen_range(-5i64..20)),
        3 => Value::from(rng.gen::<f64>() * 1e20 - 5e19),
        4 => Value::String(["hello", "step", "", "test", "eager", "13", "\u{0}"][rng.gen_range(0..7)].into()),
        5 => Value::Array((0..rng.gen_range(0..4)).map(|_| random_value(rng, depth + 1)).collect()),
        _ => {
            let keys = ["op", "env_id", "action_id", "action_ids", "split", "seed", "num_envs", "follower"];
            let mut m = serde_json::Map::new();
            for _ in 0..rng.gen_range(0..4) {
                m.insert(keys[rng.gen_range(0..keys.len())].into(), random_value(rng, depth + 1));
            }
            Value::Object(m)
        }
    }
}

/// A frame that is not a valid request: random bytes, truncated or mutated valid frames, or
/// random JSON.
pub fn malformed_frame(rng: &mut impl Rng) -> String {
    let valid = [
        r#"{"op":"step","env_id":0,"action_id":3}"#,
        r#"{"op":"step_batch","action_ids":[0,1,2]}"#,
        r#"{"op":"reset","env_id":1}"#,
        MAKE,
        r#"{"op":"hello"}"#,
    ];
    loop {
        let frame = match rng.gen_range(0..5) {
            0 => {
                let n = rng.gen_range(0..64);
                let bytes: Vec<u8> = (0..n).map(|_| rng.gen_range(0x20..0x7f)).collect();
                String::from_utf8(bytes).unwrap()
            }
            1 => {
                let v = valid[rng.gen_range(0..valid.len())];
                v[..rng.gen_range(0..v.len())].to_string()
            }
            2 => {
                let mut v: Vec<char> = valid[rng.gen_range(0..valid.len())].chars().collect();
                for _ in 0..rng.gen_range(1..4) {
                    let i = rng.gen_range(0..v.len());
                    v[i] = ['"', '{', '}', ':', ',', '9', '-', 'x', ' '][rng.gen_range(0..9)];
                }
                v.into_iter().collect()
            }
            3 => {
                let mut m = serde_json::Map::new();
                m.insert(
                    "op".into(),
                    Value::String(
                        ["step", "step_batch", "reset", "make", "render", "trace"][rng.gen_range(0..6)].into(),
                    ),
                );
                for k in ["env_id", "action_id", "action_ids", "seed", "num_envs"] {
                    if rng.gen_bool(0.5) {
                        m.insert(k.into(), random_value(rng, 1));
                    }
                }
                Value::Object(m).to_string()
            }
            _ => random_value(rng, 0).to_string(),
        };
        // read-only requests are fine to let through; anything else that parses would change state
        match serde_json::from_str::<Request>(&frame) {
            Err(_) | Ok(Request::Hello | Request::Render { .. } | Request::Trace { .. }) => return frame,
            Ok(_) => continue,
        }
    }
}

fn steps_of(session: &mut Session, env_id: usize) -> Value {
    let v: Value =
        serde_json::from_str(&session.handle_line(&format!(r#"{{"op":"trace","env_id":{env_id}}}"#))).unwrap();
    v["steps"].clone()
}

/// Sends `frames` malformed frames to one session interleaved with a fixed valid script, and
/// the same script without noise to a second session. Every response must be JSON with an
/// `ok` flag, and both sessions must end with identical traces.
pub fn check_protocol_fuzz(frames: usize, seed: u64) -> Check {
    let store = test_store();
    let mut noisy = Session::new(store.clone());
    let mut clean = Session::new(store);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut script = vec![MAKE.to_string(), r#"{"op":"reset"}"#.to_string()];
    let mut script_rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    for _ in 0..20 {
        script.push(format!(
            r#"{{"op":"step_batch","action_ids":[{},{},{}]}}"#,
            script_rng.gen_range(0..14),
            script_rng.gen_range(0..7),
            script_rng.gen_range(8..14)
        ));
    }
    let mut errors = 0;
    let per_gap = frames.div_ceil(script.len());
    let mut sent = 0;
    for line in &script {
        for _ in 0..per_gap {
            if sent == frames {
                break;
            }
            let frame = malformed_frame(&mut rng);
            let resp = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| noisy.handle_line(&frame)))
                .map_err(|_| format!("server panicked on {frame:?}"))?;
            let v: Value =
                serde_json::from_str(&resp).map_err(|e| format!("response to {frame:?} is not JSON: {e}"))?;
            match v["ok"].as_bool() {
                Some(false) => errors += 1,
                Some(true) => {}
                None => return Err(format!("response to {frame:?} lacks ok: {resp}")),
            }
            sent += 1;
        }
        let a = noisy.handle_line(line);
        let b = clean.handle_line(line);
        if a != b {
            return Err(format!("noise changed the answer to {line}:\n{a}\n{b}"));
        }
    }
    for env in 0..3 {
        if steps_of(&mut noisy, env) != steps_of(&mut clean, env) {
            return Err(format!("env {env} diverged under noise"));
        }
    }
    Ok(format!("{sent} malformed frames, {errors} error responses, no crash, sessions identical"))
}

/// Batched stepping of N environments and one-by-one stepping give identical traces.
pub fn check_vectorized_equals_sequential(envs: usize, steps: usize, seed: u64) -> Check {
    let store = test_store();
    let make = format!(
        r#"{{"op":"make","split":"test","follower":{{"autonomy":"eager","phi":0.95}},"seed":{seed},"num_envs":{envs},"auto_reset":true,"observations":true}}"#
    );
    let mut batched = Session::new(store.clone());
    let mut single = Session::new(store);
    batched.handle_line(&make);
    single.handle_line(&make);
    let a: Value = serde_json::from_str(&batched.handle_line(r#"{"op":"reset"}"#)).unwrap();
    let b: Value = serde_json::from_str(&single.handle_line(r#"{"op":"reset"}"#)).unwrap();
    if a != b {
        return Err("reset answers differ".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..steps {
        let actions: Vec<usize> = (0..envs).map(|_| rng.gen_range(0..14)).collect();
        let batch: Value = serde_json::from_str(&batched.handle_line(&format!(
            r#"{{"op":"step_batch","action_ids":{}}}"#,
            serde_json::to_string(&actions).unwrap()
        )))
        .unwrap();
        for (i, a) in actions.iter().enumerate() {
            let mut one: Value =
                serde_json::from_str(&single.handle_line(&format!(r#"{{"op":"step","env_id":{i},"action_id":{a}}}"#)))
                    .unwrap();
            let obj = one.as_object_mut().unwrap();
            obj.remove("ok");
            obj.remove("op");
            if batch["results"][i] != one {
                return Err(format!("step {s} env {i}: batched and single results differ"));
            }
        }
    }
    for env in 0..envs {
        if steps_of(&mut batched, env) != steps_of(&mut single, env) {
            return Err(format!("env {env}: traces differ"));
        }
    }
    Ok(format!("{envs} envs x {steps} steps identical batched and one by one"))
}

/// Summary statistics of the shortest-path solver over `tasks`: mean and population std.
pub fn solver_stats(tasks: &[Task]) -> (f64, f64) {
    let lens: Vec<f64> = tasks.iter().map(|t| cogrip::engine::shortest_path_solver(t).unwrap() as f64).collect();
    let n = lens.len() as f64;
    let mean = lens.iter().sum::<f64>() / n;
    let var = lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn intent_counts(traces: &[EpisodeTrace]) -> BTreeMap<char, usize> {
    let mut m = BTreeMap::new();
    for t in traces {
        for i in t.intents() {
            *m.entry(i.kind().letter()).or_insert(0) += 1;
        }
    }
    m
}
