//! Auto-regressive inference over a rolling history buffer.

use super::model::{TcnInput, TcnModel};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::world::Scan;

/// Per-beam exponential weighted average over the `k-1` label columns
/// (time-major `[k-1][n]`, oldest first). The newest column carries
/// weight 1, each older column decays by `decay`; weights are normalized.
/// Output entries stay within the min/max of their column values.
pub fn ewa_labels(est_labels: &[f64], n_beams: usize, decay: f64) -> Vec<f64> {
    let cols = est_labels.len() / n_beams;
    assert!(cols >= 1, "ewa needs at least one label column");
    let mut weight_sum = 0.0;
    let mut out = vec![0.0; n_beams];
    for t in 0..cols {
        let age = (cols - 1 - t) as i32;
        let w = decay.powi(age);
        weight_sum += w;
        let row = &est_labels[t * n_beams..(t + 1) * n_beams];
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    out.iter_mut().for_each(|o| *o /= weight_sum);
    out
}

/// Sign threshold on raw logits: non-negative is map (+1), negative is
/// non-map (-1).
pub fn classify_threshold(logits: &[f64]) -> Vec<i8> {
    logits.iter().map(|&y| if y >= 0.0 { 1 } else { -1 }).collect()
}

/// Per-scan accuracy: fraction of beams whose labels agree.
pub fn accuracy(pred: &[i8], truth: &[i8]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            a: pred.len(),
            b: truth.len(),
        });
    }
    let same = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(same as f64 / pred.len() as f64)
}

/// Rolling k-step history of poses and scans plus the k-1 most recent
/// predicted labels. Bootstrapped with zero-value poses, scans, and labels.
#[derive(Clone, Debug)]
pub struct HistoryBuffer {
    n_beams: usize,
    k: usize,
    /// Oldest first, length k after every push.
    poses: Vec<Pose>,
    /// Time-major [k][n], oldest row first.
    ranges: Vec<f64>,
    /// Time-major [k-1][n], oldest row first.
    est_labels: Vec<f64>,
}

impl HistoryBuffer {
    pub fn new(n_beams: usize, k: usize) -> Self {
        assert!(k >= 2, "history needs at least two steps");
        Self {
            n_beams,
            k,
            poses: vec![Pose::new(0.0, 0.0, 0.0); k],
            ranges: vec![0.0; k * n_beams],
            est_labels: vec![0.0; (k - 1) * n_beams],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn push_observation(&mut self, pose: Pose, ranges: &[f64]) {
        self.poses.rotate_left(1);
        *self.poses.last_mut().unwrap() = pose;
        let n = self.n_beams;
        self.ranges.copy_within(n.., 0);
        self.ranges[(self.k - 1) * n..].copy_from_slice(ranges);
    }

    fn push_labels(&mut self, labels: &[i8]) {
        let n = self.n_beams;
        if self.k > 2 {
            self.est_labels.copy_within(n.., 0);
        }
        let tail = &mut self.est_labels[(self.k - 2) * n..];
        for (o, &l) in tail.iter_mut().zip(labels) {
            *o = l as f64;
        }
    }

    /// Builds the model input for the current step: the stored label
    /// history plus its EWA as the newest column.
    fn to_input(&self, ewa_decay: f64) -> TcnInput {
        let n = self.n_beams;
        let ewa = ewa_labels(&self.est_labels, n, ewa_decay);
        let mut labels = Vec::with_capacity(self.k * n);
        labels.extend_from_slice(&self.est_labels);
        labels.extend_from_slice(&ewa);
        TcnInput {
            ranges: self.ranges.clone(),
            labels,
            poses: self.poses.clone(),
        }
    }
}

impl TcnModel {
    /// One auto-regressive step: pushes the new observation, classifies it,
    /// and feeds the prediction back into the buffer. Valid from the very
    /// first post-bootstrap step.
    pub fn infer_step(
        &self,
        buffer: &mut HistoryBuffer,
        new_pose: &Pose,
        new_scan: &Scan,
    ) -> Result<Vec<i8>> {
        if new_scan.n_beams() != self.meta.n_beams {
            return Err(Error::BeamCountMismatch {
                expected: self.meta.n_beams,
                got: new_scan.n_beams(),
            });
        }
        buffer.push_observation(*new_pose, &new_scan.ranges);
        let input = buffer.to_input(self.meta.ewa_decay);
        let trace = self.forward(&input)?;
        let labels = classify_threshold(&trace.logits);
        buffer.push_labels(&labels);
        Ok(labels)
    }
}
