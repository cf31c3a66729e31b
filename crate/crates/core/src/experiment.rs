//! Batch execution across societies and seeds, and cross-society comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::learning::QTable;
use crate::metrics::{self, Metric, MetricsError, MetricsRow};
use crate::norm::{self, ListingError, Norm};
use crate::rng::Streams;
use crate::social::{Society, SocietyProfile};
use crate::stats::{glass_delta, mean, welch_t_test, Descriptor};
use crate::world::{Environment, Learner, World, WorldConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Norms {
        path: PathBuf,
        #[source]
        source: ListingError,
    },
    #[error("{path}: {source}")]
    Metrics {
        path: PathBuf,
        #[source]
        source: MetricsError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Result of training and evaluating one (society, seed).
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub society: Society,
    pub seed: u64,
    /// One row per evaluation step.
    pub rows: Vec<MetricsRow>,
    pub q: QTable,
}

/// Train for `learning.training_steps` over back-to-back episodes, then
/// record one evaluation episode with learning still on.
pub fn run_single(
    world: &WorldConfig,
    env: &Environment,
    profile: &SocietyProfile,
    learning: crate::learning::LearnParams,
    seed: u64,
) -> Result<RunOutput, ExperimentError> {
    let invalid = |e: crate::world::WorldError| ConfigError::Invalid(e.to_string());
    let mut streams = Streams::new(seed);
    let mut learner = Learner::new(learning);
    let mut trained = 0u64;
    while trained < learning.training_steps {
        let mut w = World::from_streams(world, env.clone(), &mut streams).map_err(invalid)?;
        while trained < learning.training_steps
            && w.step(&mut learner, profile, &mut streams).is_ok()
        {
            trained += 1;
        }
    }
    let mut w = World::from_streams(world, env.clone(), &mut streams).map_err(invalid)?;
    let mut rows = Vec::with_capacity(world.episode_steps as usize);
    while let Ok(report) = w.step(&mut learner, profile, &mut streams) {
        rows.push(report.metrics);
    }
    Ok(RunOutput {
        society: profile.society,
        seed,
        rows,
        q: learner.q,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub society: Society,
    pub code_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub metrics_csv: PathBuf,
    pub q_table: PathBuf,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub fn load_norms(path: &Path) -> Result<Vec<Norm>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    norm::parse_norm_file(&text).map_err(|source| ExperimentError::Norms {
        path: path.to_owned(),
        source,
    })
}

pub fn environment(config: &ExperimentConfig) -> Result<Environment, ExperimentError> {
    let mut env = Environment {
        disease: config.disease,
        observation: config.observation,
        ..Environment::default()
    };
    if let Some(path) = &config.experiment.norms_file {
        env.norms = load_norms(path)?;
    }
    Ok(env)
}

/// Directory holding one society's runs.
pub fn society_dir(out: &Path, society: Society) -> PathBuf {
    out.join(society.name())
}

/// Run every (society, seed) pair and write `<out>/<society>/seed_<n>.csv`,
/// a Q-table snapshot beside it, and `<out>/manifest.json`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunManifest>, ExperimentError> {
    config.validate()?;
    let env = environment(config)?;
    let out = &config.experiment.output_dir;
    let hash = config.hash();
    let jobs: Vec<(Society, u64)> = config
        .experiment
        .societies
        .iter()
        .flat_map(|&s| config.seeds().into_iter().map(move |seed| (s, seed)))
        .collect();
    for &s in &config.experiment.societies {
        let dir = society_dir(out, s);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.experiment.jobs)
        .build()
        .expect("thread pool");
    let manifests: Result<Vec<RunManifest>, ExperimentError> = pool.install(|| {
        jobs.par_iter()
            .map(|&(society, seed)| {
                let started = now_ms();
                let run = run_single(
                    &config.world,
                    &env,
                    &config.profile(society),
                    config.learning,
                    seed,
                )?;
                let dir = society_dir(out, society);
                let csv = dir.join(format!("seed_{seed}.csv"));
                fs::write(&csv, metrics::to_csv(&run.rows)).map_err(io_err(&csv))?;
                let q = dir.join(format!("seed_{seed}.qtable"));
                fs::write(&q, run.q.to_text()).map_err(io_err(&q))?;
                Ok(RunManifest {
                    config_hash: hash.clone(),
                    seed,
                    society,
                    code_version: env!("CARGO_PKG_VERSION").to_string(),
                    started_unix_ms: started,
                    finished_unix_ms: now_ms(),
                    metrics_csv: csv,
                    q_table: q,
                })
            })
            .collect()
    });
    let manifests = manifests?;
    let path = out.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifests).expect("manifest serializes");
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(manifests)
}

/// All completed runs of one society.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSet {
    pub name: String,
    pub runs: Vec<Vec<MetricsRow>>,
}

impl RunSet {
    /// Load every `*.csv` in `dir`, ordered by file name.
    pub fn load(dir: &Path) -> Result<RunSet, ExperimentError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io_err(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        let mut runs = Vec::with_capacity(paths.len());
        for p in paths {
            let file = fs::File::open(&p).map_err(io_err(&p))?;
            runs.push(
                metrics::from_csv(file).map_err(|source| ExperimentError::Metrics {
                    path: p.clone(),
                    source,
                })?,
            );
        }
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        Ok(RunSet { name, runs })
    }

    /// Per-run converged value: mean of the trailing `window` rows.
    pub fn converged(&self, metric: Metric, window: usize) -> Vec<f64> {
        self.runs
            .iter()
            .map(|rows| {
                let series: Vec<f64> = rows.iter().map(|r| metric.get(r)).collect();
                metrics::tail_mean(&series, window)
            })
            .collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("mismatched runs: {0}")]
    MismatchedRuns(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub metric: Metric,
    pub control: String,
    pub experimental_mean: f64,
    pub control_mean: f64,
    /// `None` when neither sample varies.
    pub p_value: Option<f64>,
    /// `None` when the control sample does not vary.
    pub glass_delta: Option<f64>,
}

impl ComparisonRow {
    pub fn descriptor(&self) -> Option<Descriptor> {
        self.glass_delta.map(Descriptor::of)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub experimental: String,
    pub rows: Vec<ComparisonRow>,
}

pub fn compare(
    experimental: &RunSet,
    controls: &[RunSet],
    metrics: &[Metric],
    window: usize,
) -> Result<ComparisonReport, CompareError> {
    if controls.is_empty() {
        return Err(CompareError::MismatchedRuns(
            "need at least one control society".into(),
        ));
    }
    if experimental.runs.is_empty() {
        return Err(CompareError::MismatchedRuns(format!(
            "{} has no runs",
            experimental.name
        )));
    }
    for c in controls {
        if c.runs.len() != experimental.runs.len() {
            return Err(CompareError::MismatchedRuns(format!(
                "{} has {} runs, {} has {}",
                experimental.name,
                experimental.runs.len(),
                c.name,
                c.runs.len()
            )));
        }
    }
    let mut rows = Vec::new();
    for &m in metrics {
        let e = experimental.converged(m, window);
        for c in controls {
            let cv = c.converged(m, window);
            rows.push(ComparisonRow {
                metric: m,
                control: c.name.clone(),
                experimental_mean: mean(&e),
                control_mean: mean(&cv),
                p_value: welch_t_test(&e, &cv).ok(),
                glass_delta: glass_delta(&e, &cv).ok(),
            });
        }
    }
    Ok(ComparisonReport {
        experimental: experimental.name.clone(),
        rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl ComparisonReport {
    pub const CSV_HEADER: &'static str =
        "metric,experimental,control,experimental_mean,control_mean,p_value,glass_delta,descriptor";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.metric.label(),
                self.experimental,
                r.control,
                r.experimental_mean,
                r.control_mean,
                opt(r.p_value),
                opt(r.glass_delta),
                r.descriptor().map(|d| d.name()).unwrap_or("")
            )
            .unwrap();
        }
        out
    }

    /// One line per metric: the experimental mean, then each control's mean,
    /// p-value, and Δ.
    pub fn to_table(&self) -> String {
        let mut metrics: Vec<Metric> = Vec::new();
        let mut controls: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !metrics.contains(&r.metric) {
                metrics.push(r.metric);
            }
            if !controls.contains(&r.control.as_str()) {
                controls.push(&r.control);
            }
        }
        let mut header = vec!["Metric".to_string(), self.experimental.clone()];
        for c in &controls {
            header.extend([c.to_string(), format!("p ({c})"), format!("Δ ({c})")]);
        }
        let mut table = vec![header];
        for m in metrics {
            let rows: Vec<&ComparisonRow> = self.rows.iter().filter(|r| r.metric == m).collect();
            let mut line = vec![
                m.label().to_string(),
                format!("{:.4}", rows[0].experimental_mean),
            ];
            for c in &controls {
                let r = rows
                    .iter()
                    .find(|r| r.control == *c)
                    .expect("row per control");
                line.push(format!("{:.4}", r.control_mean));
                line.push(r.p_value.map(|p| format!("{p:.4}")).unwrap_or("-".into()));
                line.push(
                    r.glass_delta
                        .map(|d| format!("{d:.4} ({})", Descriptor::of(d)))
                        .unwrap_or("-".into()),
                );
            }
            table.push(line);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|i| {
                table
                    .iter()
                    .map(|row| row[i].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for row in &table {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}", w = *w))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(name: &str, goals: &[f64]) -> RunSet {
        RunSet {
            name: name.into(),
            runs: goals
                .iter()
                .map(|&g| {
                    vec![MetricsRow {
                        goal: g,
                        ..MetricsRow::default()
                    }]
                })
                .collect(),
        }
    }

    #[test]
    fn self_comparison_is_null() {
        let a = set("nest", &[0.1, 0.2, 0.3]);
        let r = compare(&a, std::slice::from_ref(&a), &[Metric::Goal], 500).unwrap();
        assert_eq!(r.rows[0].glass_delta, Some(0.0));
        assert_eq!(r.rows[0].p_value, Some(1.0));
        assert_eq!(r.rows[0].descriptor(), Some(Descriptor::Negligible));
    }

    #[test]
    fn mismatched_runs() {
        let a = set("nest", &[0.1, 0.2, 0.3]);
        let b = set("tell", &[0.1, 0.2]);
        assert!(matches!(
            compare(&a, &[b], &[Metric::Goal], 10),
            Err(CompareError::MismatchedRuns(_))
        ));
        assert!(compare(&a, &[], &[Metric::Goal], 10).is_err());
    }

    #[test]
    fn constant_metrics_have_no_statistics() {
        let a = set("nest", &[0.0, 0.0]);
        let r = compare(&a, std::slice::from_ref(&a), &[Metric::Goal], 10).unwrap();
        assert_eq!(r.rows[0].p_value, None);
        assert_eq!(r.rows[0].glass_delta, None);
        assert!(r.to_table().contains('-'));
    }

    #[test]
    fn tiny_run_shape() {
        let world = WorldConfig {
            population: 10,
            episode_steps: 10,
            ..WorldConfig::default()
        };
        let learning = crate::learning::LearnParams {
            training_steps: 25,
            ..Default::default()
        };
        let run = run_single(
            &world,
            &Environment::default(),
            &SocietyProfile::preset(Society::Nest),
            learning,
            1,
        )
        .unwrap();
        assert_eq!(run.rows.len(), 10);
        assert_eq!(run.rows[9].step, 9);
    }
}
