//! Evaluation metrics over episode traces, their export, and the silence-rate regression.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::EpisodeTrace;
use crate::error::{Error, Result};
use crate::follower::Autonomy;
use crate::language::IntentKind;
use crate::scalar::Scalar;
use crate::taskgen::Split;

/// One episode reduced to what the metrics need. This is also the row format of the per-episode
/// CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub task_id: String,
    pub split: Split,
    pub autonomy: Autonomy,
    pub phi: f64,
    pub follower_seed: u64,
    pub length: usize,
    pub success: bool,
    pub effort: f64,
    pub reward: f64,
    pub n_s: usize,
    pub n_c: usize,
    pub n_d: usize,
    pub n_o: usize,
    pub n_r: usize,
}

impl EpisodeRow {
    pub fn from_trace(trace: &EpisodeTrace) -> Self {
        let mut counts = [0usize; 5];
        for i in trace.intents() {
            counts[i.kind() as usize] += 1;
        }
        EpisodeRow {
            task_id: trace.task_id.clone(),
            split: trace.split,
            autonomy: trace.follower_config.autonomy,
            phi: trace.follower_config.phi,
            follower_seed: trace.seeds.follower,
            length: trace.len(),
            success: trace.success,
            effort: trace.rewards.effort,
            reward: trace.rewards.total,
            n_s: counts[0],
            n_c: counts[1],
            n_d: counts[2],
            n_o: counts[3],
            n_r: counts[4],
        }
    }

    fn counts(&self) -> [usize; 5] {
        [self.n_s, self.n_c, self.n_d, self.n_o, self.n_r]
    }
}

/// Share of steps spent on each intent kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntentDistribution {
    #[serde(rename = "S")]
    pub silence: f64,
    #[serde(rename = "C")]
    pub confirm: f64,
    #[serde(rename = "D")]
    pub decline: f64,
    #[serde(rename = "O")]
    pub directive: f64,
    #[serde(rename = "R")]
    pub reference: f64,
}

impl IntentDistribution {
    pub fn get(&self, kind: IntentKind) -> f64 {
        match kind {
            IntentKind::Silence => self.silence,
            IntentKind::Confirm => self.confirm,
            IntentKind::Decline => self.decline,
            IntentKind::Directive => self.directive,
            IntentKind::Reference => self.reference,
        }
    }

    pub fn total(&self) -> f64 {
        IntentKind::ALL.iter().map(|k| self.get(*k)).sum()
    }
}

/// Headline metrics of one group of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    #[serde(rename = "mR")]
    pub mean_reward: f64,
    #[serde(rename = "mSR")]
    pub success_rate: f64,
    #[serde(rename = "mEPL")]
    pub mean_episode_length: f64,
    #[serde(rename = "mEff")]
    pub mean_effort: f64,
    /// Population standard deviation of the episode length.
    pub std_episode_length: f64,
    pub intents: IntentDistribution,
    pub silence_rate: f64,
}

impl Summary {
    fn of(rows: &[&EpisodeRow]) -> Summary {
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        let mean_len = mean(&|r| r.length as f64);
        let var = mean(&|r| (r.length as f64 - mean_len).powi(2));
        let mut counts = [0usize; 5];
        for r in rows {
            for (c, k) in counts.iter_mut().zip(r.counts()) {
                *c += k;
            }
        }
        let steps: usize = counts.iter().sum();
        let share = |i: usize| if steps == 0 { 0.0 } else { counts[i] as f64 / steps as f64 };
        let intents = IntentDistribution {
            silence: share(0),
            confirm: share(1),
            decline: share(2),
            directive: share(3),
            reference: share(4),
        };
        Summary {
            episodes: rows.len(),
            mean_reward: mean(&|r| r.reward),
            success_rate: mean(&|r| if r.success { 1.0 } else { 0.0 }),
            mean_episode_length: mean_len,
            mean_effort: mean(&|r| r.effort),
            std_episode_length: var.sqrt(),
            intents,
            silence_rate: intents.silence,
        }
    }
}

/// Metrics of one follower configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub autonomy: Autonomy,
    pub phi: f64,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// All episodes pooled.
    #[serde(flatten)]
    pub pooled: Summary,
    /// One entry per (autonomy, phi), sorted.
    pub per_phi: Vec<GroupSummary>,
}

impl MetricsReport {
    pub fn group(&self, autonomy: Autonomy, phi: f64) -> Option<&Summary> {
        self.per_phi.iter().find(|g| g.autonomy == autonomy && g.phi == phi).map(|g| &g.summary)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn summarize(traces: &[EpisodeTrace]) -> Result<MetricsReport> {
    let rows: Vec<EpisodeRow> = traces.iter().map(EpisodeRow::from_trace).collect();
    summarize_rows(&rows)
}

pub fn summarize_rows(rows: &[EpisodeRow]) -> Result<MetricsReport> {
    if rows.is_empty() {
        return Err(Error::Usage("cannot summarize an empty set of episodes".into()));
    }
    let all: Vec<&EpisodeRow> = rows.iter().collect();
    let mut keys: Vec<(Autonomy, f64)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.autonomy, r.phi)) {
            keys.push((r.autonomy, r.phi));
        }
    }
    keys.sort_by(|a, b| (a.0 as u8).cmp(&(b.0 as u8)).then(a.1.total_cmp(&b.1)));
    let per_phi = keys
        .into_iter()
        .map(|(autonomy, phi)| {
            let group: Vec<&EpisodeRow> = rows.iter().filter(|r| r.autonomy == autonomy && r.phi == phi).collect();
            GroupSummary { autonomy, phi, summary: Summary::of(&group) }
        })
        .collect();
    Ok(MetricsReport { pooled: Summary::of(&all), per_phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Table,
    Csv,
    Json,
}

impl ExportFormat {
    /// Format implied by a file extension (`md`, `csv`, `json`).
    pub fn from_extension(ext: &str) -> Result<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "md" | "txt" => Ok(ExportFormat::Table),
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Usage(format!("no report format for extension '{other}'"))),
        }
    }
}

const SUMMARY_COLUMNS: [&str; 14] =
    ["group", "autonomy", "phi", "episodes", "mR", "mSR", "mEPL", "mEff", "std_EPL", "S", "C", "D", "O", "R"];

fn summary_cells(group: &str, autonomy: &str, phi: &str, s: &Summary) -> Vec<String> {
    let i = &s.intents;
    let mut cells = vec![group.to_string(), autonomy.to_string(), phi.to_string(), s.episodes.to_string()];
    cells.extend(
        [
            s.mean_reward,
            s.success_rate,
            s.mean_episode_length,
            s.mean_effort,
            s.std_episode_length,
            i.silence,
            i.confirm,
            i.decline,
            i.directive,
            i.reference,
        ]
        .iter()
        .map(|v| format!("{v:.4}")),
    );
    cells
}

fn summary_rows(report: &MetricsReport) -> Vec<Vec<String>> {
    let mut out = vec![summary_cells("pooled", "", "", &report.pooled)];
    for g in &report.per_phi {
        out.push(summary_cells("config", &g.autonomy.to_string(), &format!("{}", g.phi), &g.summary));
    }
    out
}

pub fn export(report: &MetricsReport, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => report.to_json(),
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(SUMMARY_COLUMNS)?;
            for row in summary_rows(report) {
                w.write_record(&row)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
        }
        ExportFormat::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "| {} |", SUMMARY_COLUMNS.join(" | "));
            let _ = writeln!(s, "|{}", "---|".repeat(SUMMARY_COLUMNS.len()));
            for row in summary_rows(report) {
                let _ = writeln!(s, "| {} |", row.join(" | "));
            }
            Ok(s)
        }
    }
}

pub fn episodes_to_csv(rows: &[EpisodeRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn episodes_from_csv(text: &str) -> Result<Vec<EpisodeRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<EpisodeRow>, _>>()?)
}

/// Ordinary least-squares line with a t-based confidence interval on both coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsTrend<F> {
    pub slope: F,
    pub intercept: F,
    pub n: usize,
    /// Confidence level of the intervals, e.g. 0.99.
    pub level: F,
    /// `None` when fewer than three points leave no residual degrees of freedom.
    pub slope_ci: Option<(F, F)>,
    pub intercept_ci: Option<(F, F)>,
    /// Residual standard error.
    pub residual_se: Option<F>,
    mean_x: F,
    sxx: F,
}

impl<F: Scalar> OlsTrend<F> {
    pub fn has_ci(&self) -> bool {
        self.slope_ci.is_some()
    }

    pub fn predict(&self, x: F) -> F {
        self.intercept + self.slope * x
    }

    /// Confidence interval of the fitted mean at `x`.
    pub fn band_at(&self, x: F) -> Option<(F, F)> {
        let se = self.residual_se?;
        let t = t_quantile::<F>(self.level, self.n - 2)?;
        let n = F::lit(self.n as f64);
        let half = t * se * (F::one() / n + (x - self.mean_x).powi(2) / self.sxx).sqrt();
        let y = self.predict(x);
        Some((y - half, y + half))
    }
}

fn t_quantile<F: Scalar>(level: F, dof: usize) -> Option<F> {
    let t = StudentsT::new(0.0, 1.0, dof as f64).ok()?;
    let p = 0.5 + level.to_f64_lossy() / 2.0;
    Some(F::lit(t.inverse_cdf(p)))
}

/// Fits `y = intercept + slope * x` with a 99% interval.
pub fn ols_trend<F: Scalar>(x: &[F], y: &[F]) -> Result<OlsTrend<F>> {
    ols_trend_at(x, y, F::lit(0.99))
}

pub fn ols_trend_at<F: Scalar>(x: &[F], y: &[F], level: F) -> Result<OlsTrend<F>> {
    if x.len() != y.len() {
        return Err(Error::Usage(format!("{} x values but {} y values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Usage("a trend needs at least two points".into()));
    }
    let n = F::lit(x.len() as f64);
    let mean_x = x.iter().copied().fold(F::zero(), |a, b| a + b) / n;
    let mean_y = y.iter().copied().fold(F::zero(), |a, b| a + b) / n;
    let sxx = x.iter().map(|&v| (v - mean_x).powi(2)).fold(F::zero(), |a, b| a + b);
    if sxx <= F::zero() {
        return Err(Error::Usage("all x values are equal".into()));
    }
    let sxy = x.iter().zip(y).map(|(&a, &b)| (a - mean_x) * (b - mean_y)).fold(F::zero(), |a, b| a + b);
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut trend = OlsTrend {
        slope,
        intercept,
        n: x.len(),
        level,
        slope_ci: None,
        intercept_ci: None,
        residual_se: None,
        mean_x,
        sxx,
    };
    if x.len() >= 3 {
        let sse = x.iter().zip(y).map(|(&a, &b)| (b - (intercept + slope * a)).powi(2)).fold(F::zero(), |a, b| a + b);
        let se = (sse / F::lit((x.len() - 2) as f64)).sqrt();
        let t = t_quantile::<F>(level, x.len() - 2).ok_or_else(|| Error::Usage("invalid t distribution".into()))?;
        let se_slope = se / sxx.sqrt();
        let se_intercept = se * (F::one() / n + mean_x * mean_x / sxx).sqrt();
        trend.slope_ci = Some((slope - t * se_slope, slope + t * se_slope));
        trend.intercept_ci = Some((intercept - t * se_intercept, intercept + t * se_intercept));
        trend.residual_se = Some(se);
    }
    Ok(trend)
}
