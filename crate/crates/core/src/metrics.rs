//! Per-step metrics, smoothing, and norm-emergence detection.

use std::fmt::Write as _;
use std::io::Read;

use thiserror::Error;

use crate::disease::HealthState;
use crate::world::World;

/// CSV header for per-run metrics files.
pub const CSV_HEADER: &str = "steps,healthy,infected,deceased,vaccinated,isolation,forced_quarantine,total_number_infections,desire_satisfaction";

/// Default smoothing window for plot-ready series.
pub const DEFAULT_WINDOW: usize = 50;

/// Emergence threshold on the fraction of agents showing a behavior.
pub const EMERGENCE_THRESHOLD: f64 = 0.9;

/// One step's metrics. Percentages are of the initial population.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub healthy: f64,
    /// Asymptomatic, mild, or critical.
    pub infected: f64,
    pub deceased: f64,
    pub vaccinated: f64,
    /// Fraction of living infected agents at home; 1 when nobody is infected.
    pub home: f64,
    /// Agents currently under forced quarantine.
    pub quarantine: f64,
    /// Cumulative infections caught this episode per initial agent.
    pub infections: f64,
    /// Fraction of acting agents whose goal was met this step.
    pub goal: f64,
}

/// A column of [`MetricsRow`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Infected,
    Healthy,
    Deceased,
    Infections,
    Vaccinated,
    Home,
    Quarantine,
    Goal,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Infected,
        Metric::Healthy,
        Metric::Deceased,
        Metric::Infections,
        Metric::Vaccinated,
        Metric::Home,
        Metric::Quarantine,
        Metric::Goal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Infected => "M_Infected",
            Metric::Healthy => "M_Healthy",
            Metric::Deceased => "M_Deceased",
            Metric::Infections => "M_Infections",
            Metric::Vaccinated => "M_Vaccinated",
            Metric::Home => "M_Home",
            Metric::Quarantine => "M_Quarantine",
            Metric::Goal => "M_Goal",
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            Metric::Infected => "infected",
            Metric::Healthy => "healthy",
            Metric::Deceased => "deceased",
            Metric::Infections => "total_number_infections",
            Metric::Vaccinated => "vaccinated",
            Metric::Home => "isolation",
            Metric::Quarantine => "forced_quarantine",
            Metric::Goal => "desire_satisfaction",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        let n = name.trim();
        Metric::ALL.into_iter().find(|m| {
            m.label().eq_ignore_ascii_case(n)
                || m.column() == n
                || m.label()[2..].eq_ignore_ascii_case(n)
        })
    }

    pub fn get(self, row: &MetricsRow) -> f64 {
        match self {
            Metric::Infected => row.infected,
            Metric::Healthy => row.healthy,
            Metric::Deceased => row.deceased,
            Metric::Infections => row.infections,
            Metric::Vaccinated => row.vaccinated,
            Metric::Home => row.home,
            Metric::Quarantine => row.quarantine,
            Metric::Goal => row.goal,
        }
    }
}

/// Snapshot metrics from a world right after a step.
pub fn compute_metrics(world: &World, step: u64) -> MetricsRow {
    let pop = world.population() as f64;
    let mut healthy = 0u32;
    let mut infected = 0u32;
    let mut deceased = 0u32;
    let mut vaccinated = 0u32;
    let mut infected_home = 0u32;
    let mut quarantined = 0u32;
    for a in world.agents() {
        match a.health {
            HealthState::Healthy => healthy += 1,
            HealthState::Deceased => deceased += 1,
            _ => {
                infected += 1;
                if a.at_home() {
                    infected_home += 1;
                }
            }
        }
        if a.vaccinated {
            vaccinated += 1;
        }
        if a.is_alive() && a.quarantined() {
            quarantined += 1;
        }
    }
    let (met, acting) = world.last_goal_counts();
    MetricsRow {
        step,
        healthy: 100.0 * healthy as f64 / pop,
        infected: 100.0 * infected as f64 / pop,
        deceased: 100.0 * deceased as f64 / pop,
        vaccinated: 100.0 * vaccinated as f64 / pop,
        home: if infected == 0 {
            1.0
        } else {
            infected_home as f64 / infected as f64
        },
        quarantine: quarantined as f64,
        infections: world.cumulative_infections() as f64 / pop,
        goal: if acting == 0 {
            0.0
        } else {
            met as f64 / acting as f64
        },
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("rolling window must be at least 1")]
    WindowZero,
    #[error("metrics CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("metrics CSV header mismatch: expected `{CSV_HEADER}`, found `{0}`")]
    Header(String),
}

/// Trailing mean over the last `min(window, i + 1)` points.
pub fn rolling_average(series: &[f64], window: usize) -> Result<Vec<f64>, MetricsError> {
    if window == 0 {
        return Err(MetricsError::WindowZero);
    }
    Ok((0..series.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(window);
            let slice = &series[start..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// First index at which a (typically already smoothed) behavior-fraction
/// series reaches `threshold`.
pub fn norm_emerged(series: &[f64], threshold: f64) -> Option<usize> {
    series.iter().position(|&x| x >= threshold)
}

/// Mean over the last `window` points (all of them if shorter).
pub fn tail_mean(series: &[f64], window: usize) -> f64 {
    let start = series.len().saturating_sub(window.max(1));
    let tail = &series[start..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            r.healthy,
            r.infected,
            r.deceased,
            r.vaccinated,
            r.home,
            r.quarantine,
            r.infections,
            r.goal
        )
        .unwrap();
    }
    out
}

pub fn from_csv<R: Read>(reader: R) -> Result<Vec<MetricsRow>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(MetricsError::Header(header));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<(u64, f64, f64, f64, f64, f64, f64, f64, f64)>() {
        let (step, healthy, infected, deceased, vaccinated, home, quarantine, infections, goal) =
            rec?;
        rows.push(MetricsRow {
            step,
            healthy,
            infected,
            deceased,
            vaccinated,
            home,
            quarantine,
            infections,
            goal,
        });
    }
    Ok(rows)
}
