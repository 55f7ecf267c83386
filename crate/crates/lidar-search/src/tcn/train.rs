//! Supervised training with label corruption, and auto-regressive
//! evaluation against ground-truth labels.
//!
//! Each sample is a k-step window from one run: pose and range histories
//! include the current step, the label history holds the k-1 previous
//! ground-truth labels with a fixed fraction of entries bit-flipped, plus
//! their EWA as the newest column. SGD with momentum on MSE loss.
//! Determinism: window shuffling and per-sample corruption RNGs are derived
//! from (seed, epoch, window id), and batch gradients are reduced over
//! fixed chunk boundaries, so results are bit-identical regardless of
//! thread count or the `parallel` feature.

use super::dataset::Dataset;
use super::infer::{accuracy, classify_threshold, ewa_labels, HistoryBuffer};
use super::model::{TcnInput, TcnMeta, TcnModel};
use crate::error::{Error, Result};
use crate::par;
use crate::seeding;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Fraction of label-history entries bit-flipped per sample.
    pub corruption_rate: f64,
    pub ewa_decay: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// History length in steps.
    pub k: usize,
    pub channels: usize,
    /// Sampling stride between window end steps; consecutive windows
    /// overlap in k-1 columns, so a stride > 1 trims redundancy.
    pub window_stride: usize,
    /// Range normalization divisor, normally the LiDAR max range.
    pub range_scale: f64,
    pub ablate_label_encoder: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            corruption_rate: 0.10,
            ewa_decay: 0.5,
            batch_size: 32,
            learning_rate: 1e-3,
            momentum: 0.9,
            seed: 0,
            k: 9,
            channels: 8,
            window_stride: 3,
            range_scale: 10.0,
            ablate_label_encoder: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.corruption_rate) {
            return Err(Error::InvalidConfig(
                "corruption_rate must be in [0, 0.5]".into(),
            ));
        }
        if self.epochs < 1 || self.batch_size < 1 || self.window_stride < 1 {
            return Err(Error::InvalidConfig(
                "epochs, batch_size, window_stride must be >= 1".into(),
            ));
        }
        if self.k < 3 {
            return Err(Error::InvalidConfig(
                "history length k must be >= 3 for the pose encoder".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.ewa_decay) || self.ewa_decay == 0.0 {
            return Err(Error::InvalidConfig("ewa_decay must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn meta(&self, n_beams: usize) -> TcnMeta {
        TcnMeta {
            n_beams,
            k: self.k,
            channels: self.channels,
            range_scale: self.range_scale,
            ewa_decay: self.ewa_decay,
            ablate_label_encoder: self.ablate_label_encoder,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// Auto-regressive accuracy on the eval dataset, when one was given.
    pub test_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: TcnModel,
    pub curves: Vec<EpochStats>,
}

/// Flips the sign of exactly `round(rate * labels.len())` distinct entries,
/// chosen uniformly without replacement. Returns the flip count.
pub fn corrupt_labels(labels: &mut [f64], rate: f64, rng: &mut ChaCha8Rng) -> usize {
    let count = (rate * labels.len() as f64).round() as usize;
    if count == 0 {
        return 0;
    }
    let picks = rand::seq::index::sample(rng, labels.len(), count);
    for i in picks {
        labels[i] = -labels[i];
    }
    count
}

/// A training window identified by the global index of its last tuple.
#[derive(Clone, Copy, Debug)]
struct Window {
    /// Canonical index in enumeration order, used for RNG derivation.
    id: u64,
    last: usize,
}

fn enumerate_windows(dataset: &Dataset, k: usize, stride: usize) -> Vec<Window> {
    let mut out = Vec::new();
    let mut id = 0u64;
    for run in dataset.runs() {
        let len = run.len();
        if len < k {
            continue;
        }
        let mut t = k - 1;
        while t < len {
            out.push(Window {
                id,
                last: run.start + t,
            });
            id += 1;
            t += stride;
        }
    }
    out
}

/// Builds the model input and target slice for one window. The label
/// history is ground truth with `rate` of its entries bit-flipped, EWA
/// appended as the newest column.
fn build_sample<'d>(
    dataset: &'d Dataset,
    window: Window,
    k: usize,
    rate: f64,
    ewa_decay: f64,
    rng: &mut ChaCha8Rng,
) -> (TcnInput, &'d [i8]) {
    let n = dataset.n_beams;
    let first = window.last + 1 - k;
    let tuples = &dataset.tuples[first..=window.last];
    let mut ranges = Vec::with_capacity(k * n);
    let mut poses = Vec::with_capacity(k);
    for t in tuples {
        ranges.extend_from_slice(&t.ranges);
        poses.push(t.pose);
    }
    let mut label_hist: Vec<f64> = Vec::with_capacity((k - 1) * n);
    for t in &tuples[..k - 1] {
        label_hist.extend(t.labels.iter().map(|&l| l as f64));
    }
    corrupt_labels(&mut label_hist, rate, rng);
    let ewa = ewa_labels(&label_hist, n, ewa_decay);
    let mut labels = label_hist;
    labels.extend_from_slice(&ewa);
    (
        TcnInput {
            ranges,
            labels,
            poses,
        },
        &tuples[k - 1].labels,
    )
}

struct ChunkResult {
    grad: Vec<f64>,
    loss: f64,
    correct: usize,
    beams: usize,
}

/// Trains a model on `dataset`; when `eval` is given, per-epoch test
/// accuracy is measured by auto-regressive inference over it.
pub fn train(dataset: &Dataset, eval: Option<&Dataset>, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let windows = enumerate_windows(dataset, config.k, config.window_stride);
    if windows.len() < config.batch_size {
        return Err(Error::DatasetTooSmall {
            need: config.batch_size,
            got: windows.len(),
        });
    }
    let meta = config.meta(dataset.n_beams);
    let mut model = TcnModel::init(meta, config.seed);
    let pcount = model.param_count();
    let mut velocity = vec![0.0; pcount];
    let mut curves = Vec::with_capacity(config.epochs);

    let mut order: Vec<Window> = windows;
    for epoch in 0..config.epochs {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seeding::mix3(config.seed, 0xE0, epoch as u64));
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0usize;
        let mut epoch_beams = 0usize;
        for batch in order.chunks(config.batch_size) {
            let chunk_ranges = par::fixed_chunks(batch.len());
            let partials: Vec<ChunkResult> = par::map_collect(&chunk_ranges, |r| {
                let mut grad = vec![0.0; pcount];
                let mut loss = 0.0;
                let mut correct = 0usize;
                let mut beams = 0usize;
                for &w in &batch[r.clone()] {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(seeding::mix3(config.seed, epoch as u64 + 1, w.id));
                    let (input, targets) = build_sample(
                        dataset,
                        w,
                        config.k,
                        config.corruption_rate,
                        config.ewa_decay,
                        &mut rng,
                    );
                    let trace = model.forward(&input).expect("train forward");
                    let pred = classify_threshold(&trace.logits);
                    correct += pred
                        .iter()
                        .zip(targets)
                        .filter(|(a, b)| a == b)
                        .count();
                    beams += targets.len();
                    loss += model
                        .backward(&trace, targets, &mut grad)
                        .expect("train backward");
                }
                ChunkResult {
                    grad,
                    loss,
                    correct,
                    beams,
                }
            });
            // fixed-order reduction keeps float sums deterministic
            let mut grad = vec![0.0; pcount];
            for part in &partials {
                for (g, p) in grad.iter_mut().zip(&part.grad) {
                    *g += p;
                }
                epoch_loss += part.loss;
                epoch_correct += part.correct;
                epoch_beams += part.beams;
            }
            let scale = 1.0 / batch.len() as f64;
            let params = model.params_mut();
            for i in 0..pcount {
                velocity[i] = config.momentum * velocity[i] - config.learning_rate * grad[i] * scale;
                params[i] += velocity[i];
            }
        }

        let test_accuracy = match eval {
            Some(ds) => {
                let per_scan = evaluate_on_dataset(&model, ds)?;
                Some(per_scan.iter().sum::<f64>() / per_scan.len().max(1) as f64)
            }
            None => None,
        };
        curves.push(EpochStats {
            epoch,
            train_loss: epoch_loss / order.len() as f64,
            train_accuracy: epoch_correct as f64 / epoch_beams.max(1) as f64,
            test_accuracy,
        });
    }

    Ok(TrainOutput { model, curves })
}

/// Auto-regressive inference over every run of `dataset`, returning the
/// per-scan accuracy series (run order, then step order). Runs are
/// independent, so they fan out in parallel.
pub fn evaluate_on_dataset(model: &TcnModel, dataset: &Dataset) -> Result<Vec<f64>> {
    let runs = dataset.runs();
    let per_run: Vec<Result<Vec<f64>>> = par::map_collect(&runs, |run| {
        let mut buffer = HistoryBuffer::new(model.meta.n_beams, model.meta.k);
        let mut accs = Vec::with_capacity(run.len());
        for t in &dataset.tuples[run.clone()] {
            let scan = crate::world::Scan {
                ranges: t.ranges.clone(),
                hits: vec![true; t.ranges.len()],
                max_range: model.meta.range_scale,
                timestamp: t.step as u64,
            };
            let pred = model.infer_step(&mut buffer, &t.pose, &scan)?;
            accs.push(accuracy(&pred, &t.labels)?);
        }
        Ok(accs)
    });
    let mut out = Vec::with_capacity(dataset.len());
    for r in per_run {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use rand::Rng;
    use crate::tcn::dataset::DatasetTuple;

    /// Synthetic dataset with a learnable geometric rule: beams whose range
    /// dips well below its neighbors' are non-map.
    fn synthetic_dataset(n_beams: usize, runs: usize, steps: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tuples = Vec::new();
        for run in 0..runs {
            // a few "objects" at fixed beam spans per run
            let spans: Vec<(usize, usize)> = (0..3)
                .map(|_| {
                    let s = rng.gen_range(0..n_beams);
                    (s, rng.gen_range(2..5))
                })
                .collect();
            for step in 0..steps {
                let base: Vec<f64> = (0..n_beams)
                    .map(|j| 4.0 + (j as f64 * 0.37).sin() + rng.gen_range(-0.02..0.02))
                    .collect();
                let mut ranges = base;
                let mut labels = vec![1i8; n_beams];
                for &(s, w) in &spans {
                    for d in 0..w {
                        let j = (s + d) % n_beams;
                        ranges[j] *= 0.4;
                        labels[j] = -1;
                    }
                }
                tuples.push(DatasetTuple {
                    pose: Pose::new(step as f64 * 0.1, run as f64, 0.0),
                    ranges,
                    labels,
                    run_id: run as u32,
                    step: step as u32,
                });
            }
        }
        Dataset {
            n_beams,
            scan_rate: 5.0,
            tuples,
        }
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            epochs: 4,
            k: 3,
            channels: 4,
            batch_size: 8,
            window_stride: 1,
            learning_rate: 5e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn corruption_flips_exact_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for rate in [0.0, 0.1, 0.3, 0.5] {
            let mut labels = vec![1.0; 8 * 897];
            let flips = corrupt_labels(&mut labels, rate, &mut rng);
            assert_eq!(flips, (rate * (8.0 * 897.0)).round() as usize);
            let flipped = labels.iter().filter(|&&l| l == -1.0).count();
            assert_eq!(flipped, flips);
        }
    }

    #[test]
    fn zero_corruption_is_clean_label_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut labels = vec![-1.0; 100];
        assert_eq!(corrupt_labels(&mut labels, 0.0, &mut rng), 0);
        assert!(labels.iter().all(|&l| l == -1.0));
    }

    #[test]
    fn training_loss_decreases() {
        let ds = synthetic_dataset(24, 2, 60, 5);
        let out = train(&ds, None, &tiny_config()).unwrap();
        let first = out.curves.first().unwrap().train_loss;
        let last = out.curves.last().unwrap().train_loss;
        assert!(
            last < first,
            "loss did not decrease: {first} -> {last}"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let ds = synthetic_dataset(16, 2, 40, 6);
        let cfg = tiny_config();
        let a = train(&ds, None, &cfg).unwrap();
        let b = train(&ds, None, &cfg).unwrap();
        assert_eq!(a.model.params(), b.model.params());
        assert_eq!(a.curves.len(), b.curves.len());
        for (x, y) in a.curves.iter().zip(&b.curves) {
            assert_eq!(x.train_loss, y.train_loss);
        }
    }

    #[test]
    fn too_small_dataset_errors() {
        let ds = synthetic_dataset(16, 1, 4, 7);
        let cfg = TrainConfig {
            batch_size: 64,
            ..tiny_config()
        };
        assert!(matches!(
            train(&ds, None, &cfg),
            Err(Error::DatasetTooSmall { .. })
        ));
    }

    #[test]
    fn evaluation_runs_autoregressively() {
        let ds = synthetic_dataset(16, 2, 30, 8);
        let out = train(&ds, None, &tiny_config()).unwrap();
        let accs = evaluate_on_dataset(&out.model, &ds).unwrap();
        assert_eq!(accs.len(), ds.len());
        assert!(accs.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }
}
