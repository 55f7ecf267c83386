//! Training data: simulated drive-throughs labeled by the map-based
//! classifier, plus the binary dataset file format.

use crate::classify_gt::{classify_scan_gt, ClassifierParams, ObservationHistory};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::seeding;
use crate::world::{LineWorld, PathWalker, SensorSpec};
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

/// One labeled scan: pose, raw ranges, and per-beam map/non-map labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetTuple {
    pub pose: Pose,
    pub ranges: Vec<f64>,
    pub labels: Vec<i8>,
    pub run_id: u32,
    pub step: u32,
}

/// Tuples in temporal order, grouped into runs (one run per trajectory).
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub n_beams: usize,
    pub scan_rate: f64,
    pub tuples: Vec<DatasetTuple>,
}

impl Dataset {
    /// Contiguous tuple ranges per run, in order of first appearance.
    pub fn runs(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.tuples.len() {
            if i == self.tuples.len() || self.tuples[i].run_id != self.tuples[start].run_id {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Fraction of beams labeled map (+1) over the whole dataset; the
    /// constant-majority baseline accuracy is max(f, 1-f).
    pub fn map_label_fraction(&self) -> f64 {
        let mut map = 0usize;
        let mut total = 0usize;
        for t in &self.tuples {
            map += t.labels.iter().filter(|&&l| l == 1).count();
            total += t.labels.len();
        }
        if total == 0 {
            return 0.0;
        }
        map as f64 / total as f64
    }

    pub fn merge(mut self, other: Dataset) -> Dataset {
        self.tuples.extend(other.tuples);
        self
    }
}

/// Drives the simulated robot along each trajectory at the scan rate,
/// labeling every scan with the map-based classifier. `trajectories[w]`
/// holds the waypoint polylines to run in world `w`; each becomes one run.
pub fn generate_dataset(
    worlds: &[LineWorld],
    trajectories: &[Vec<Vec<Pose>>],
    spec: &SensorSpec,
    gt_params: &ClassifierParams,
    seed: u64,
) -> Result<Dataset> {
    assert_eq!(worlds.len(), trajectories.len());
    let mut tuples = Vec::new();
    let mut run_id = 0u32;
    for (world, paths) in worlds.iter().zip(trajectories) {
        for path in paths {
            if path.is_empty() {
                return Err(Error::EmptyTrajectory);
            }
            let walker = PathWalker::new(path, spec);
            let mut history = ObservationHistory::new(gt_params.history_window);
            let scan_poses = walker.scan_poses();
            if scan_poses.is_empty() {
                return Err(Error::EmptyTrajectory);
            }
            for (step, pose) in scan_poses.into_iter().enumerate() {
                let mut scan =
                    world.simulate_scan(&pose, spec, seeding::mix3(seed, run_id as u64, step as u64))?;
                scan.timestamp = step as u64;
                let classified = classify_scan_gt(world, &pose, &scan, gt_params, &mut history)?;
                tuples.push(DatasetTuple {
                    pose,
                    ranges: scan.ranges,
                    labels: classified.labels,
                    run_id,
                    step: step as u32,
                });
            }
            run_id += 1;
        }
    }
    Ok(Dataset {
        n_beams: spec.n_beams,
        scan_rate: spec.scan_rate_hz,
        tuples,
    })
}

// ---------------------------------------------------------------------------
// Dataset file: magic + header (version, n_beams, scan_rate, count) + records
// ---------------------------------------------------------------------------

const DATASET_MAGIC: &[u8; 8] = b"LSDS0001";
pub const DATASET_FILE_VERSION: u32 = 1;

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(DATASET_MAGIC)?;
    out.write_all(&DATASET_FILE_VERSION.to_le_bytes())?;
    out.write_all(&(dataset.n_beams as u32).to_le_bytes())?;
    out.write_all(&dataset.scan_rate.to_le_bytes())?;
    out.write_all(&(dataset.tuples.len() as u64).to_le_bytes())?;
    for t in &dataset.tuples {
        debug_assert_eq!(t.ranges.len(), dataset.n_beams);
        out.write_all(&t.run_id.to_le_bytes())?;
        out.write_all(&t.step.to_le_bytes())?;
        out.write_all(&t.pose.x.to_le_bytes())?;
        out.write_all(&t.pose.y.to_le_bytes())?;
        out.write_all(&t.pose.theta.to_le_bytes())?;
        for r in &t.ranges {
            out.write_all(&r.to_le_bytes())?;
        }
        let bytes: Vec<u8> = t.labels.iter().map(|&l| l as u8).collect();
        out.write_all(&bytes)?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut file = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(Error::CorruptFile {
            kind: "dataset",
            detail: "bad magic".into(),
        });
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    file.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != DATASET_FILE_VERSION {
        return Err(Error::VersionMismatch {
            expected: DATASET_FILE_VERSION,
            got: version,
        });
    }
    file.read_exact(&mut u32buf)?;
    let n_beams = u32::from_le_bytes(u32buf) as usize;
    file.read_exact(&mut u64buf)?;
    let scan_rate = f64::from_le_bytes(u64buf);
    file.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf) as usize;
    let mut tuples = Vec::with_capacity(count);
    let mut label_bytes = vec![0u8; n_beams];
    for _ in 0..count {
        file.read_exact(&mut u32buf)?;
        let run_id = u32::from_le_bytes(u32buf);
        file.read_exact(&mut u32buf)?;
        let step = u32::from_le_bytes(u32buf);
        let mut pose = [0.0f64; 3];
        for v in &mut pose {
            file.read_exact(&mut u64buf)?;
            *v = f64::from_le_bytes(u64buf);
        }
        let mut ranges = Vec::with_capacity(n_beams);
        for _ in 0..n_beams {
            file.read_exact(&mut u64buf)?;
            ranges.push(f64::from_le_bytes(u64buf));
        }
        file.read_exact(&mut label_bytes)?;
        let labels: Vec<i8> = label_bytes.iter().map(|&b| b as i8).collect();
        if labels.iter().any(|&l| l != 1 && l != -1) {
            return Err(Error::CorruptFile {
                kind: "dataset",
                detail: "label outside {-1, +1}".into(),
            });
        }
        tuples.push(DatasetTuple {
            pose: Pose::new(pose[0], pose[1], pose[2]),
            ranges,
            labels,
            run_id,
            step,
        });
    }
    Ok(Dataset {
        n_beams,
        scan_rate,
        tuples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify_gt::classify_scan_gt;
    use crate::geom::{Bounds, ConvexPolygon, Point2, Segment};

    fn test_world() -> LineWorld {
        let m = 5.0;
        let corners = [
            Point2::new(-m, -m),
            Point2::new(m, -m),
            Point2::new(m, m),
            Point2::new(-m, m),
        ];
        let segments = (0..4)
            .map(|i| Segment::new(corners[i], corners[(i + 1) % 4]))
            .collect();
        LineWorld::new(
            segments,
            vec![ConvexPolygon::regular(Point2::new(2.0, 2.0), 0.4, 6)],
            vec![],
            Bounds::new(Point2::new(-m, -m), Point2::new(m, m)),
            Pose::new(0.0, 0.0, 0.0),
        )
        .unwrap()
    }

    fn small_spec() -> SensorSpec {
        SensorSpec {
            n_beams: 90,
            lidar_noise_sigma: 0.0,
            ..SensorSpec::default()
        }
    }

    #[test]
    fn single_run_has_expected_count() {
        let world = test_world();
        let spec = small_spec();
        // 10 m path at 0.5 m/s and 5 Hz -> 100 scans
        let path = vec![
            Pose::new(-4.0, 0.0, 0.0),
            Pose::new(4.0, 0.0, 0.0),
            Pose::new(4.0, -2.0, 0.0),
        ];
        let ds = generate_dataset(
            &[world],
            &[vec![path]],
            &spec,
            &ClassifierParams::default(),
            7,
        )
        .unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.runs().len(), 1);
        assert!(ds.tuples.iter().enumerate().all(|(i, t)| t.step as usize == i));
    }

    #[test]
    fn empty_trajectory_is_domain_error() {
        let world = test_world();
        let spec = small_spec();
        assert!(matches!(
            generate_dataset(
                &[world],
                &[vec![vec![]]],
                &spec,
                &ClassifierParams::default(),
                0
            ),
            Err(Error::EmptyTrajectory)
        ));
    }

    #[test]
    fn labels_replay_classify_scan_gt_exactly() {
        let world = test_world();
        let spec = small_spec();
        let params = ClassifierParams::default();
        let path = vec![Pose::new(-4.0, 0.0, 0.0), Pose::new(0.0, 0.0, 0.0)];
        let ds = generate_dataset(&[world.clone()], &[vec![path]], &spec, &params, 3).unwrap();
        let mut history = ObservationHistory::new(params.history_window);
        for t in &ds.tuples {
            let scan = crate::world::Scan {
                ranges: t.ranges.clone(),
                hits: t
                    .ranges
                    .iter()
                    .map(|&r| r < spec.lidar_max_range)
                    .collect(),
                max_range: spec.lidar_max_range,
                timestamp: t.step as u64,
            };
            let replay = classify_scan_gt(&world, &t.pose, &scan, &params, &mut history).unwrap();
            assert_eq!(replay.labels, t.labels, "step {}", t.step);
        }
    }

    #[test]
    fn file_round_trip() {
        let world = test_world();
        let spec = small_spec();
        let path = vec![Pose::new(-4.0, 0.0, 0.0), Pose::new(-2.0, 0.0, 0.0)];
        let ds = generate_dataset(
            &[world],
            &[vec![path.clone(), path]],
            &spec,
            &ClassifierParams::default(),
            5,
        )
        .unwrap();
        assert_eq!(ds.runs().len(), 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data.bin");
        save_dataset(&ds, &p).unwrap();
        let back = load_dataset(&p).unwrap();
        assert_eq!(back.n_beams, ds.n_beams);
        assert_eq!(back.scan_rate, ds.scan_rate);
        assert_eq!(back.tuples, ds.tuples);
    }
}
