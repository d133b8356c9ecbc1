//! Acceptance criteria, one line each. Runs without the libtest harness so the report reads
//! top to bottom; exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cogrip::follower::PHI_GRID;
use cogrip::language::IntentKind;
use cogrip::metrics::{ols_trend, summarize};
use cogrip::reward::{effort, reward_upper_bound, RewardBreakdown, T_MAX};
use cogrip::rollout::rollout;
use cogrip::{Autonomy, Dataset, FollowerConfig, GuideKind, PreferenceOrder, Split, SplitSpec};

use common::Check;

type Criterion = (&'static str, &'static str, fn() -> Check);

const THREADS: usize = 4;

fn within(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{name} = {got:.4}, expected {want} +/- {tol}"))
    }
}

fn in_time(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn p1_split_fidelity() -> Check {
    let started = Instant::now();
    let ds = Dataset::generate(&SplitSpec::default(), 0).map_err(|e| e.to_string())?;
    in_time(started, Duration::from_secs(60))?;
    let want = [(Split::Train, 2500, 275), (Split::Validation, 175, 25), (Split::Test, 420, 60)];
    let mut seen = BTreeSet::new();
    for (split, tasks, tps) in want {
        let got = ds.split(split);
        if got.len() != tasks {
            return Err(format!("{} has {} tasks", split.name(), got.len()));
        }
        let targets: BTreeSet<_> = got.iter().map(|t| t.target().symbol).collect();
        if targets.len() != tps || ds.universe.tps(split).len() != tps {
            return Err(format!("{} uses {} target symbols", split.name(), targets.len()));
        }
        for s in ds.universe.tps(split) {
            if !seen.insert(*s) {
                return Err(format!("{s:?} appears in two splits"));
            }
        }
        if !targets.iter().all(|s| ds.universe.tps(split).contains(s)) {
            return Err(format!("{} has a target outside its symbol set", split.name()));
        }
    }
    Ok(format!("2500/175/420 tasks, 275/25/60 disjoint symbols, {:.1?}", started.elapsed()))
}

fn exact(name: &str, got: f64, want: f64) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{name} = {got}, expected exactly {want}"))
    }
}

fn p2_silent_baseline() -> Check {
    let started = Instant::now();
    let traces = rollout(
        common::dataset().split(Split::Test),
        FollowerConfig::new(Autonomy::Cautious, 0.9),
        GuideKind::Silent,
        0,
        THREADS,
    )
    .map_err(|e| e.to_string())?;
    let s = summarize(&traces).map_err(|e| e.to_string())?.pooled;
    in_time(started, Duration::from_secs(30))?;
    exact("mSR", s.success_rate, 0.0)?;
    exact("mEPL", s.mean_episode_length, 30.0)?;
    exact("mEff", s.mean_effort, 0.0)?;
    Ok(format!("{} episodes: mSR 0.00, mEPL 30.00, mEff 0.00", s.episodes))
}

fn p3_reference_baseline() -> Check {
    let traces = rollout(
        common::dataset().split(Split::Test),
        FollowerConfig::new(Autonomy::Cautious, 0.9),
        GuideKind::Reference(PreferenceOrder::CSP),
        0,
        THREADS,
    )
    .map_err(|e| e.to_string())?;
    let s = summarize(&traces).map_err(|e| e.to_string())?.pooled;
    exact("mSR", s.success_rate, 0.0)?;
    exact("mEPL", s.mean_episode_length, 30.0)?;
    if !(33.6..=36.0).contains(&s.mean_effort) {
        return Err(format!("mEff = {} outside [33.6, 36.0]", s.mean_effort));
    }
    Ok(format!("mSR 0.00, mEPL 30.00, mEff {:.2}", s.mean_effort))
}

fn p4_shortest_paths() -> Check {
    let (mean, std) = common::solver_stats(common::dataset().split(Split::Test));
    let bound = reward_upper_bound(mean);
    within("mean path", mean, 11.65, 1.0)?;
    within("path std", std, 3.13, 1.0)?;
    within("reward bound", bound, 1.83, 0.05)?;
    Ok(format!("mean path {mean:.3}, std {std:.3}, reward bound {bound:.4}"))
}

fn p5_eager_reference() -> Check {
    let started = Instant::now();
    let tasks = common::dataset().split(Split::Test);
    let mut successes = 0.0;
    let mut episodes = 0;
    for &phi in &PHI_GRID {
        for seed in 0..3 {
            let config = FollowerConfig::new(Autonomy::Eager, phi);
            let traces = rollout(tasks, config, GuideKind::Reference(PreferenceOrder::CSP), seed, THREADS)
                .map_err(|e| e.to_string())?;
            successes += traces.iter().filter(|t| t.success).count() as f64;
            episodes += traces.len();
        }
    }
    let sr = successes / episodes as f64;
    in_time(started, Duration::from_secs(300))?;
    within("pooled mSR", sr, 0.75, 0.15)?;
    Ok(format!("pooled mSR {sr:.3} over {episodes} episodes, {:.1?}", started.elapsed()))
}

fn p6_reward_suite() -> Check {
    let e: f64 = [IntentKind::Silence, IntentKind::Confirm, IntentKind::Directive, IntentKind::Reference]
        .into_iter()
        .map(effort::<f64>)
        .sum();
    within("effort of s,c,d,r", e, 3.3, 1e-9)?;
    let win = RewardBreakdown::compute(12, 9.6, T_MAX, true).total;
    within("success at 12 steps", win, 1.676, 1e-9)?;
    let lose = RewardBreakdown::compute(30, 0.0, T_MAX, false).total;
    within("silent timeout", lose, -0.45, 1e-9)?;
    let table = [
        (IntentKind::Silence, 0.0),
        (IntentKind::Confirm, 1.0),
        (IntentKind::Decline, 1.0),
        (IntentKind::Directive, 1.1),
        (IntentKind::Reference, 1.2),
    ];
    for (kind, want) in table {
        exact(&format!("effort({kind:?})"), effort::<f64>(kind), want)?;
    }
    Ok(format!("R = {win:.3} and {lose:.2}, E = {e:.1}, effort table exact"))
}

fn p7_properties() -> Check {
    let parts = [
        common::check_incremental_algorithm(10_000, 1)?,
        common::check_round_trip(500, 2)?,
        common::check_vocabulary_closure()?,
        common::check_confidence_frequency(10_000, 0.75, 0.02)?,
        common::check_replay_determinism(common::dataset().split(Split::Test))?,
    ];
    Ok(parts.join("; "))
}

fn p8_protocol() -> Check {
    let fuzz = common::check_protocol_fuzz(10_000, 21)?;
    let vec = common::check_vectorized_equals_sequential(8, 80, 3)?;
    Ok(format!("{fuzz}; {vec}"))
}

fn p9_adaptation() -> Check {
    let tasks = common::dataset().split(Split::Test);
    let mut notes = Vec::new();
    let mut silence = [Vec::new(), Vec::new()];
    for &phi in &PHI_GRID {
        let mut eff = [0.0; 2];
        for (i, autonomy) in [Autonomy::Cautious, Autonomy::Eager].into_iter().enumerate() {
            let traces = rollout(tasks, FollowerConfig::new(autonomy, phi), GuideKind::Oracle, 0, THREADS)
                .map_err(|e| e.to_string())?;
            let s = summarize(&traces).map_err(|e| e.to_string())?.pooled;
            eff[i] = s.mean_effort;
            if phi >= 0.9 {
                silence[i].push((phi, s.silence_rate));
            }
        }
        if eff[1] >= eff[0] {
            return Err(format!("phi {phi}: eager effort {:.3} not below cautious {:.3}", eff[1], eff[0]));
        }
        notes.push(format!("{phi}: {:.2}<{:.2}", eff[1], eff[0]));
    }
    for (name, pts) in ["cautious", "eager"].iter().zip(&silence) {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        let trend = ols_trend(&x, &y).map_err(|e| e.to_string())?;
        if trend.slope < 0.0 {
            return Err(format!("{name} silence rate slope {:.4} < 0", trend.slope));
        }
        notes.push(format!("{name} silence slope {:.3}", trend.slope));
    }
    Ok(format!("effort eager<cautious at {}", notes.join(", ")))
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let criteria: [Criterion; 9] = [
        ("P1", "split fidelity", p1_split_fidelity),
        ("P2", "cautious + silent baseline", p2_silent_baseline),
        ("P3", "cautious + reference baseline", p3_reference_baseline),
        ("P4", "shortest-path oracle", p4_shortest_paths),
        ("P5", "eager + reference baseline", p5_eager_reference),
        ("P6", "reward and effort", p6_reward_suite),
        ("P7", "property suites", p7_properties),
        ("P8", "protocol robustness", p8_protocol),
        ("P9", "directional adaptation", p9_adaptation),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
