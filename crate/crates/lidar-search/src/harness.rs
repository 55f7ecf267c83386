//! Experiment orchestration: benchmark sweeps over generated worlds,
//! classifier evaluation, and the two ablation studies.
//!
//! Trials are embarrassingly parallel; every (planner, world, difficulty)
//! cell runs the identical seed list, failed trials contribute the full
//! budget to the mean, and the whole sweep is deterministic given its
//! seeds.

use crate::classify_gt::ClassifierParams;
use crate::error::Result;
use crate::par;
use crate::planner::{search_episode, EpisodeConfig, LabelMode, UtilityWeights};
use crate::seeding;
use crate::tcn::{
    evaluate_on_dataset, generate_dataset, train, Dataset, EpochStats, TcnModel, TrainConfig,
};
use crate::world::{LineWorld, SensorSpec};
use crate::worldgen::{generate_world, wander_path, Archetype, Difficulty, WorldGenConfig};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

// ---------------------------------------------------------------------------
// Benchmark sweep (detection time / success rate tables)
// ---------------------------------------------------------------------------

/// One planner column of the result table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlannerArm {
    pub name: String,
    pub label_mode: LabelMode,
    pub weights: UtilityWeights,
}

impl PlannerArm {
    pub fn informed(name: &str, label_mode: LabelMode) -> Self {
        Self {
            name: name.into(),
            label_mode,
            weights: UtilityWeights::default(),
        }
    }

    /// The label-free multisensor frontier exploration baseline: the same
    /// planner without segmented scan information.
    pub fn mfe_baseline() -> Self {
        Self {
            name: "mfe".into(),
            label_mode: LabelMode::None,
            weights: UtilityWeights {
                w_nonmap: 0.0,
                ..UtilityWeights::default()
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub archetype: Archetype,
    pub difficulties: Vec<Difficulty>,
    pub n_worlds: usize,
    pub world_seed: u64,
    pub object_density_easy: f64,
    pub object_density_hard: f64,
    pub planners: Vec<PlannerArm>,
    /// Trials per (planner, world, difficulty) cell; identical seed list
    /// everywhere.
    pub trials: usize,
    pub trial_seed: u64,
    pub budget_easy_s: f64,
    pub budget_hard_s: f64,
    pub spec: SensorSpec,
    pub resolution: f64,
    pub min_frontier_size: usize,
    pub registry_bin: f64,
    pub gt_params: ClassifierParams,
}

impl ExperimentSpec {
    pub fn apartment_benchmark(n_worlds: usize, trials: usize, seed: u64) -> Self {
        Self {
            archetype: Archetype::Apartment,
            difficulties: vec![Difficulty::Easy, Difficulty::Hard],
            n_worlds,
            world_seed: seed,
            object_density_easy: 0.25,
            object_density_hard: 0.55,
            planners: vec![
                PlannerArm::mfe_baseline(),
                PlannerArm::informed("ground_truth", LabelMode::GroundTruth),
            ],
            trials,
            trial_seed: seeding::mix(seed, 0xBE),
            budget_easy_s: 120.0,
            budget_hard_s: 180.0,
            spec: SensorSpec::default(),
            resolution: 0.1,
            min_frontier_size: 5,
            registry_bin: 0.2,
            gt_params: ClassifierParams::default(),
        }
    }

    fn budget(&self, difficulty: Difficulty) -> f64 {
        match difficulty {
            Difficulty::Easy => self.budget_easy_s,
            Difficulty::Hard => self.budget_hard_s,
        }
    }

    fn density(&self, difficulty: Difficulty) -> f64 {
        match difficulty {
            Difficulty::Easy => self.object_density_easy,
            Difficulty::Hard => self.object_density_hard,
        }
    }

    /// Deterministic per-trial seed, shared across planners and worlds.
    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials)
            .map(|t| seeding::mix(self.trial_seed, t as u64))
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub planner: String,
    pub difficulty: Difficulty,
    pub world_index: usize,
    pub seed: u64,
    pub found: bool,
    /// Detection time, or the full budget on failure.
    pub time_s: f64,
    pub outcome: String,
    pub planning_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellResult {
    pub planner: String,
    pub difficulty: Difficulty,
    pub mean_time_s: f64,
    pub median_time_s: f64,
    pub success_rate: f64,
    pub trials: Vec<TrialRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultTable {
    pub cells: Vec<CellResult>,
}

fn median(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

impl ResultTable {
    pub fn cell(&self, planner: &str, difficulty: Difficulty) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.planner == planner && c.difficulty == difficulty)
    }

    /// Machine-readable per-trial CSV; byte-stable for fixed inputs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("planner,difficulty,world,seed,found,time_s,outcome,steps\n");
        for cell in &self.cells {
            for t in &cell.trials {
                let _ = writeln!(
                    out,
                    "{},{:?},{},{},{},{:.3},{},{}",
                    t.planner,
                    t.difficulty,
                    t.world_index,
                    t.seed,
                    t.found,
                    t.time_s,
                    t.outcome,
                    t.planning_steps
                );
            }
        }
        out
    }

    /// Human-readable summary, one line per cell.
    pub fn summary(&self) -> String {
        let mut out = String::from(
            "planner          difficulty  mean_s  median_s  success\n",
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:<16} {:<10?} {:>7.1} {:>9.1} {:>7.0}%",
                c.planner,
                c.difficulty,
                c.mean_time_s,
                c.median_time_s,
                c.success_rate * 100.0
            );
        }
        out
    }
}

/// Generates the world set for one (difficulty) row of a sweep.
pub fn sweep_worlds(spec: &ExperimentSpec, difficulty: Difficulty) -> Result<Vec<LineWorld>> {
    let diff_tag = match difficulty {
        Difficulty::Easy => 1u64,
        Difficulty::Hard => 2u64,
    };
    (0..spec.n_worlds)
        .map(|i| {
            let mut config = WorldGenConfig::new(spec.archetype, difficulty, 0);
            config.seed = seeding::mix3(spec.world_seed, diff_tag, i as u64);
            config.object_density = spec.density(difficulty);
            generate_world(&config)
        })
        .collect()
}

/// Runs the full sweep. Trials fan out in parallel; a trial that errors is
/// recorded as a failure and never aborts the sweep.
pub fn run_experiment(spec: &ExperimentSpec, model: Option<&TcnModel>) -> Result<ResultTable> {
    let seeds = spec.trial_seeds();
    let mut cells = Vec::new();
    for difficulty in spec.difficulties.clone() {
        let worlds = sweep_worlds(spec, difficulty)?;
        let budget = spec.budget(difficulty);
        for planner in &spec.planners {
            // task list for this cell
            let tasks: Vec<(usize, u64)> = (0..worlds.len())
                .flat_map(|w| seeds.iter().map(move |s| (w, *s)))
                .collect();
            let trials: Vec<TrialRecord> = par::map_collect(&tasks, |&(w, seed)| {
                let config = EpisodeConfig {
                    weights: planner.weights,
                    label_mode: planner.label_mode,
                    budget_s: budget,
                    seed,
                    resolution: spec.resolution,
                    min_frontier_size: spec.min_frontier_size,
                    registry_bin: spec.registry_bin,
                    gt_params: spec.gt_params,
                };
                match search_episode(&worlds[w], &spec.spec, &config, model) {
                    Ok(r) => TrialRecord {
                        planner: planner.name.clone(),
                        difficulty,
                        world_index: w,
                        seed,
                        found: r.found(),
                        time_s: r.detection_time_or(budget),
                        outcome: format!("{:?}", r.outcome),
                        planning_steps: r.steps.len(),
                    },
                    Err(e) => TrialRecord {
                        planner: planner.name.clone(),
                        difficulty,
                        world_index: w,
                        seed,
                        found: false,
                        time_s: budget,
                        outcome: format!("Error: {e}"),
                        planning_steps: 0,
                    },
                }
            });
            let mut times: Vec<f64> = trials.iter().map(|t| t.time_s).collect();
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let successes = trials.iter().filter(|t| t.found).count();
            cells.push(CellResult {
                planner: planner.name.clone(),
                difficulty,
                mean_time_s: times.iter().sum::<f64>() / times.len().max(1) as f64,
                median_time_s: median(&times),
                success_rate: successes as f64 / trials.len().max(1) as f64,
                trials,
            });
        }
    }
    Ok(ResultTable { cells })
}

// ---------------------------------------------------------------------------
// Dataset building
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_worlds: usize,
    pub minutes_per_world: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_worlds: 8,
            minutes_per_world: 10.0,
            seed: 0,
        }
    }
}

/// A varied set of training worlds cycling through the three archetypes.
pub fn training_worlds(spec: &DatasetSpec) -> Result<Vec<LineWorld>> {
    (0..spec.n_worlds)
        .map(|i| {
            let archetype = match i % 3 {
                0 => Archetype::Apartment,
                1 => Archetype::Office,
                _ => Archetype::Hallway,
            };
            let difficulty = if i % 2 == 0 {
                Difficulty::Hard
            } else {
                Difficulty::Easy
            };
            let mut config = WorldGenConfig::new(archetype, difficulty, seeding::mix(spec.seed, i as u64));
            config.object_density = 0.35 + 0.1 * (i % 4) as f64;
            generate_world(&config)
        })
        .collect()
}

/// Builds a labeled dataset by wandering each world for the requested
/// simulated duration.
pub fn build_dataset(
    ds_spec: &DatasetSpec,
    sensor: &SensorSpec,
    gt_params: &ClassifierParams,
) -> Result<Dataset> {
    let worlds = training_worlds(ds_spec)?;
    let duration = ds_spec.minutes_per_world * 60.0;
    let trajectories: Vec<Vec<crate::geom::Pose>> = par::map_range(worlds.len(), |i| {
        wander_path(
            &worlds[i],
            sensor,
            duration,
            seeding::mix3(ds_spec.seed, 0x7A, i as u64),
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let per_world: Vec<Vec<Vec<crate::geom::Pose>>> =
        trajectories.into_iter().map(|t| vec![t]).collect();
    generate_dataset(&worlds, &per_world, sensor, gt_params, ds_spec.seed)
}

// ---------------------------------------------------------------------------
// Classifier evaluation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean per-scan accuracy of auto-regressive inference.
    pub mean: f64,
    /// Standard error over per-scan accuracies.
    pub stderr: f64,
    /// Mean per-scan accuracy of the constant majority-label predictor;
    /// per-scan accuracy is inflated by class imbalance, so the model is
    /// always reported next to this floor.
    pub majority_baseline: f64,
    pub scans: usize,
}

/// Auto-regressive evaluation on held-out runs, Eq.-style per-scan
/// accuracy against the stored ground-truth labels.
pub fn evaluate_classifier(model: &TcnModel, eval: &Dataset) -> Result<EvalReport> {
    let per_scan = evaluate_on_dataset(model, eval)?;
    let n = per_scan.len();
    let mean = per_scan.iter().sum::<f64>() / n.max(1) as f64;
    let var = per_scan.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n.max(1) as f64;
    let stderr = (var / n.max(1) as f64).sqrt();
    // constant predictor of the dataset-wide majority label
    let majority_label: i8 = if eval.map_label_fraction() >= 0.5 { 1 } else { -1 };
    let mut baseline_sum = 0.0;
    for t in &eval.tuples {
        let agree = t.labels.iter().filter(|&&l| l == majority_label).count();
        baseline_sum += agree as f64 / t.labels.len() as f64;
    }
    Ok(EvalReport {
        mean,
        stderr,
        majority_baseline: baseline_sum / n.max(1) as f64,
        scans: n,
    })
}

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    LabelEncoder,
    NoiseSweep,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationArm {
    pub name: String,
    pub corruption_rate: f64,
    pub ablate_label_encoder: bool,
    pub final_test_accuracy: f64,
    pub curves: Vec<EpochStats>,
}

/// Trains the requested arms (identical seed and initial weights) and
/// evaluates each on the held-out set.
pub fn run_ablation(
    kind: AblationKind,
    train_ds: &Dataset,
    eval_ds: &Dataset,
    base: &TrainConfig,
) -> Result<Vec<AblationArm>> {
    let arms: Vec<(String, f64, bool)> = match kind {
        AblationKind::LabelEncoder => vec![
            ("with_label_encoder".into(), base.corruption_rate, false),
            ("without_label_encoder".into(), base.corruption_rate, true),
        ],
        AblationKind::NoiseSweep => [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
            .iter()
            .map(|r| (format!("corruption_{:02.0}pct", r * 100.0), *r, false))
            .collect(),
    };
    let mut out = Vec::new();
    for (name, rate, ablate) in arms {
        let config = TrainConfig {
            corruption_rate: rate,
            ablate_label_encoder: ablate,
            ..*base
        };
        let trained = train(train_ds, Some(eval_ds), &config)?;
        let report = evaluate_classifier(&trained.model, eval_ds)?;
        out.push(AblationArm {
            name,
            corruption_rate: rate,
            ablate_label_encoder: ablate,
            final_test_accuracy: report.mean,
            curves: trained.curves,
        });
    }
    Ok(out)
}

/// 5-step moving average, matching the reported accuracy curves.
pub fn moving_average_5(series: &[f64]) -> Vec<f64> {
    series
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let lo = i.saturating_sub(4);
            let window = &series[lo..=i];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect()
}

/// Plot-ready CSV: `arm,epoch,split,accuracy,accuracy_ma5` rows.
pub fn ablation_csv(arms: &[AblationArm]) -> String {
    let mut out = String::from("arm,epoch,split,accuracy,accuracy_ma5\n");
    for arm in arms {
        let train_series: Vec<f64> = arm.curves.iter().map(|c| c.train_accuracy).collect();
        let test_series: Vec<f64> = arm
            .curves
            .iter()
            .map(|c| c.test_accuracy.unwrap_or(f64::NAN))
            .collect();
        let train_ma = moving_average_5(&train_series);
        let test_ma = moving_average_5(&test_series);
        for (i, c) in arm.curves.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},train,{:.6},{:.6}",
                arm.name, c.epoch, train_series[i], train_ma[i]
            );
            if c.test_accuracy.is_some() {
                let _ = writeln!(
                    out,
                    "{},{},test,{:.6},{:.6}",
                    arm.name, c.epoch, test_series[i], test_ma[i]
                );
            }
        }
    }
    out
}
