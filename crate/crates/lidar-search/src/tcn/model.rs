//! Model parameters, forward pass, and analytic gradients.
//!
//! Parameters live in one flat `Vec<f64>` laid out tensor by tensor; the
//! same layout is what the model file stores. The scan and label encoders
//! are a circular conv (kernel [k, k] over time x beams) followed by a
//! per-beam channel-mixing linear layer; the pose encoder is a [1, 3] conv
//! over the pose history followed by a dense linear layer up to beam
//! length. Hyperbolic tangent everywhere.

use crate::error::{Error, Result};
use crate::geom::Pose;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Position normalization divisor applied to pose x/y before encoding.
const POS_NORM: f64 = 20.0;

/// Architecture and preprocessing constants captured in the model file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcnMeta {
    pub n_beams: usize,
    /// History length in time steps.
    pub k: usize,
    /// Hidden channels per encoder.
    pub channels: usize,
    /// Range normalization divisor (the LiDAR max range).
    pub range_scale: f64,
    /// EWA decay used for the appended label column.
    pub ewa_decay: f64,
    /// When set, the label encoder branch is replaced by a constant one.
    pub ablate_label_encoder: bool,
}

impl TcnMeta {
    pub fn pose_feat_len(&self) -> usize {
        3 * self.channels * (self.k - 2)
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Clone, Copy, Debug)]
struct Layout {
    scan_conv_w: usize,
    scan_conv_b: usize,
    scan_mix_w: usize,
    scan_mix_b: usize,
    label_conv_w: usize,
    label_conv_b: usize,
    label_mix_w: usize,
    label_mix_b: usize,
    pose_conv_w: usize,
    pose_conv_b: usize,
    pose_lin_w: usize,
    pose_lin_b: usize,
    total: usize,
}

impl Layout {
    fn new(meta: &TcnMeta) -> Self {
        let c = meta.channels;
        let k = meta.k;
        let n = meta.n_beams;
        let f = meta.pose_feat_len();
        let mut at = 0;
        let mut take = |len: usize| {
            let off = at;
            at += len;
            off
        };
        Self {
            scan_conv_w: take(c * k * k),
            scan_conv_b: take(c),
            scan_mix_w: take(c),
            scan_mix_b: take(1),
            label_conv_w: take(c * k * k),
            label_conv_b: take(c),
            label_mix_w: take(c),
            label_mix_b: take(1),
            pose_conv_w: take(c * 3),
            pose_conv_b: take(c),
            pose_lin_w: take(n * f),
            pose_lin_b: take(n),
            total: at,
        }
    }
}

/// Tensor name/shape manifest entries for the model file.
fn tensor_manifest(meta: &TcnMeta) -> Vec<(&'static str, Vec<usize>)> {
    let c = meta.channels;
    let k = meta.k;
    let n = meta.n_beams;
    let f = meta.pose_feat_len();
    vec![
        ("scan_conv_w", vec![c, k, k]),
        ("scan_conv_b", vec![c]),
        ("scan_mix_w", vec![c]),
        ("scan_mix_b", vec![1]),
        ("label_conv_w", vec![c, k, k]),
        ("label_conv_b", vec![c]),
        ("label_mix_w", vec![c]),
        ("label_mix_b", vec![1]),
        ("pose_conv_w", vec![c, 3]),
        ("pose_conv_b", vec![c]),
        ("pose_lin_w", vec![n, f]),
        ("pose_lin_b", vec![n]),
    ]
}

/// One training/inference input: k-step histories, oldest column first.
/// `ranges` and `labels` are time-major `[k][n_beams]`; `labels` already
/// carries the EWA as its newest column. `poses` are raw world-frame poses.
#[derive(Clone, Debug)]
pub struct TcnInput {
    pub ranges: Vec<f64>,
    pub labels: Vec<f64>,
    pub poses: Vec<Pose>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    scan_padded: Vec<f64>,
    label_padded: Vec<f64>,
    pose_rows: Vec<f64>,
    scan_h: Vec<f64>,
    label_h: Vec<f64>,
    pose_z: Vec<f64>,
    scan_a: Vec<f64>,
    label_a: Vec<f64>,
    pose_a: Vec<f64>,
    /// Final logits in (-1, 1).
    pub logits: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TcnModel {
    pub meta: TcnMeta,
    params: Vec<f64>,
    layout: Layout,
}

impl TcnModel {
    /// Deterministic initialization: uniform in ±1/sqrt(fan_in) per tensor,
    /// drawn from a ChaCha stream seeded by `seed`.
    pub fn init(meta: TcnMeta, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let layout = Layout::new(&meta);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.total];
        let c = meta.channels;
        let k = meta.k;
        let f = meta.pose_feat_len();
        let spans: Vec<(usize, usize, usize)> = vec![
            // (offset, len, fan_in)
            (layout.scan_conv_w, c * k * k, k * k),
            (layout.scan_conv_b, c, k * k),
            (layout.scan_mix_w, c, c),
            (layout.scan_mix_b, 1, c),
            (layout.label_conv_w, c * k * k, k * k),
            (layout.label_conv_b, c, k * k),
            (layout.label_mix_w, c, c),
            (layout.label_mix_b, 1, c),
            (layout.pose_conv_w, c * 3, 3),
            (layout.pose_conv_b, c, 3),
            (layout.pose_lin_w, meta.n_beams * f, f),
            (layout.pose_lin_b, meta.n_beams, f),
        ];
        for (off, len, fan_in) in spans {
            let s = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[off..off + len] {
                *p = rng.gen_range(-s..s);
            }
        }
        Self {
            meta,
            params,
            layout,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    fn check_input(&self, input: &TcnInput) -> Result<()> {
        let n = self.meta.n_beams;
        let k = self.meta.k;
        if input.ranges.len() != k * n || input.labels.len() != k * n || input.poses.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "expected ranges/labels [{k}][{n}] and {k} poses, got {}/{}/{}",
                input.ranges.len(),
                input.labels.len(),
                input.poses.len()
            )));
        }
        Ok(())
    }

    /// Full forward pass:
    /// `logits = tanh((pose_enc + scan_enc) * label_enc)` per beam.
    pub fn forward(&self, input: &TcnInput) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let meta = &self.meta;
        let (n, k, c) = (meta.n_beams, meta.k, meta.channels);
        let l = &self.layout;
        let p = &self.params;

        let scan_scaled: Vec<f64> = input
            .ranges
            .iter()
            .map(|r| r / meta.range_scale)
            .collect();
        let scan_padded = circular_pad(&scan_scaled, k, n);
        let label_padded = circular_pad(&input.labels, k, n);

        let scan_h = circular_conv_rows(
            &scan_padded,
            &p[l.scan_conv_w..l.scan_conv_w + c * k * k],
            &p[l.scan_conv_b..l.scan_conv_b + c],
            n,
            k,
            c,
        );
        let scan_a = mix_channels(
            &scan_h,
            &p[l.scan_mix_w..l.scan_mix_w + c],
            p[l.scan_mix_b],
            n,
            c,
        );

        let (label_h, label_a) = if meta.ablate_label_encoder {
            (vec![0.0; c * n], vec![1.0; n])
        } else {
            let h = circular_conv_rows(
                &label_padded,
                &p[l.label_conv_w..l.label_conv_w + c * k * k],
                &p[l.label_conv_b..l.label_conv_b + c],
                n,
                k,
                c,
            );
            let a = mix_channels(
                &h,
                &p[l.label_mix_w..l.label_mix_w + c],
                p[l.label_mix_b],
                n,
                c,
            );
            (h, a)
        };

        // pose rows [3][k], normalized
        let mut pose_rows = vec![0.0; 3 * k];
        for (t, pose) in input.poses.iter().enumerate() {
            pose_rows[t] = pose.x / POS_NORM;
            pose_rows[k + t] = pose.y / POS_NORM;
            pose_rows[2 * k + t] = pose.theta / std::f64::consts::PI;
        }
        // valid conv over time with kernel 3, tanh; z is [c][3][k-2] flat
        let kt = k - 2;
        let mut pose_z = vec![0.0; c * 3 * kt];
        for ch in 0..c {
            let w = &p[l.pose_conv_w + ch * 3..l.pose_conv_w + ch * 3 + 3];
            let b = p[l.pose_conv_b + ch];
            for row in 0..3 {
                for t in 0..kt {
                    let base = row * k + t;
                    let u = b
                        + w[0] * pose_rows[base]
                        + w[1] * pose_rows[base + 1]
                        + w[2] * pose_rows[base + 2];
                    pose_z[ch * 3 * kt + row * kt + t] = u.tanh();
                }
            }
        }
        // dense linear to beam length, tanh
        let f = meta.pose_feat_len();
        let mut pose_a = vec![0.0; n];
        for j in 0..n {
            let row = &p[l.pose_lin_w + j * f..l.pose_lin_w + (j + 1) * f];
            let mut u = p[l.pose_lin_b + j];
            for (w, z) in row.iter().zip(pose_z.iter()) {
                u += w * z;
            }
            pose_a[j] = u.tanh();
        }

        let mut logits = vec![0.0; n];
        for j in 0..n {
            logits[j] = ((pose_a[j] + scan_a[j]) * label_a[j]).tanh();
        }

        Ok(ForwardTrace {
            scan_padded,
            label_padded,
            pose_rows,
            scan_h,
            label_h,
            pose_z,
            scan_a,
            label_a,
            pose_a,
            logits,
        })
    }

    /// MSE loss over beams against targets in {-1, +1}.
    pub fn loss(&self, input: &TcnInput, targets: &[i8]) -> Result<f64> {
        let trace = self.forward(input)?;
        let n = self.meta.n_beams as f64;
        Ok(trace
            .logits
            .iter()
            .zip(targets)
            .map(|(y, t)| (y - *t as f64).powi(2))
            .sum::<f64>()
            / n)
    }

    /// Forward + backward; accumulates parameter gradients of the per-beam
    /// mean squared error into `grad` (same layout as `params`). Returns
    /// the loss.
    pub fn loss_and_grad(
        &self,
        input: &TcnInput,
        targets: &[i8],
        grad: &mut [f64],
    ) -> Result<f64> {
        let trace = self.forward(input)?;
        self.backward(&trace, targets, grad)
    }

    /// Backward pass over a stored forward trace; accumulates gradients
    /// into `grad` and returns the loss.
    pub fn backward(&self, trace: &ForwardTrace, targets: &[i8], grad: &mut [f64]) -> Result<f64> {
        if targets.len() != self.meta.n_beams {
            return Err(Error::LengthMismatch {
                a: targets.len(),
                b: self.meta.n_beams,
            });
        }
        if grad.len() != self.layout.total {
            return Err(Error::ShapeMismatch("gradient buffer length".into()));
        }
        let meta = &self.meta;
        let (n, k, c) = (meta.n_beams, meta.k, meta.channels);
        let l = &self.layout;
        let p = &self.params;

        let inv_n = 1.0 / n as f64;
        let mut loss = 0.0;
        let mut d_gate = vec![0.0; n];
        for j in 0..n {
            let y = trace.logits[j];
            let e = y - targets[j] as f64;
            loss += e * e * inv_n;
            d_gate[j] = 2.0 * e * inv_n * (1.0 - y * y);
        }

        let mut d_scan_a = vec![0.0; n];
        let mut d_label_a = vec![0.0; n];
        let mut d_pose_a = vec![0.0; n];
        for j in 0..n {
            d_scan_a[j] = d_gate[j] * trace.label_a[j];
            d_pose_a[j] = d_gate[j] * trace.label_a[j];
            d_label_a[j] = d_gate[j] * (trace.pose_a[j] + trace.scan_a[j]);
        }

        backward_encoder(
            &trace.scan_padded,
            &trace.scan_h,
            &trace.scan_a,
            &d_scan_a,
            &p[l.scan_mix_w..l.scan_mix_w + c],
            grad,
            l.scan_conv_w,
            l.scan_conv_b,
            l.scan_mix_w,
            l.scan_mix_b,
            n,
            k,
            c,
        );
        if !meta.ablate_label_encoder {
            backward_encoder(
                &trace.label_padded,
                &trace.label_h,
                &trace.label_a,
                &d_label_a,
                &p[l.label_mix_w..l.label_mix_w + c],
                grad,
                l.label_conv_w,
                l.label_conv_b,
                l.label_mix_w,
                l.label_mix_b,
                n,
                k,
                c,
            );
        }

        // pose branch
        let f = meta.pose_feat_len();
        let kt = k - 2;
        let mut d_z = vec![0.0; f];
        for j in 0..n {
            let dp = d_pose_a[j] * (1.0 - trace.pose_a[j] * trace.pose_a[j]);
            grad[l.pose_lin_b + j] += dp;
            let w_row = &p[l.pose_lin_w + j * f..l.pose_lin_w + (j + 1) * f];
            let g_row = &mut grad[l.pose_lin_w + j * f..l.pose_lin_w + (j + 1) * f];
            for i in 0..f {
                g_row[i] += dp * trace.pose_z[i];
                d_z[i] += dp * w_row[i];
            }
        }
        for ch in 0..c {
            for row in 0..3 {
                for t in 0..kt {
                    let zi = ch * 3 * kt + row * kt + t;
                    let du = d_z[zi] * (1.0 - trace.pose_z[zi] * trace.pose_z[zi]);
                    grad[l.pose_conv_b + ch] += du;
                    let base = row * k + t;
                    for dt in 0..3 {
                        grad[l.pose_conv_w + ch * 3 + dt] += du * trace.pose_rows[base + dt];
                    }
                }
            }
        }

        Ok(loss)
    }
}

/// Circular padding of a time-major `[k][n]` matrix along the beam axis,
/// centered for a kernel of width k: output rows have length `n + k - 1`
/// and `padded[t][i] == x[t][(i - (k-1)/2).rem_euclid(n)]`.
fn circular_pad(x: &[f64], k: usize, n: usize) -> Vec<f64> {
    let off = (k - 1) / 2;
    let pn = n + k - 1;
    let mut out = vec![0.0; k * pn];
    for t in 0..k {
        let row = &x[t * n..(t + 1) * n];
        let orow = &mut out[t * pn..(t + 1) * pn];
        for (i, o) in orow.iter_mut().enumerate() {
            *o = row[(i + n - (off % n)) % n];
        }
    }
    out
}

/// Conv stage of the scan/label encoders: for each channel, slide the
/// `[k][k]` kernel over the padded rows and apply tanh. Returns `[c][n]`.
/// Public so the circular-equivariance of the conv stage is testable on
/// its own.
pub fn circular_conv_rows(
    padded: &[f64],
    w: &[f64],
    b: &[f64],
    n: usize,
    k: usize,
    c: usize,
) -> Vec<f64> {
    let pn = n + k - 1;
    let mut out = vec![0.0; c * n];
    let mut acc = vec![0.0; n];
    for ch in 0..c {
        acc.iter_mut().for_each(|a| *a = b[ch]);
        for dt in 0..k {
            let row = &padded[dt * pn..(dt + 1) * pn];
            for db in 0..k {
                let weight = w[ch * k * k + dt * k + db];
                let shifted = &row[db..db + n];
                for (a, v) in acc.iter_mut().zip(shifted) {
                    *a += weight * v;
                }
            }
        }
        let orow = &mut out[ch * n..(ch + 1) * n];
        for (o, a) in orow.iter_mut().zip(acc.iter()) {
            *o = a.tanh();
        }
    }
    out
}

/// Per-beam channel mixing + tanh: `a[j] = tanh(sum_c w[c] h[c][j] + b)`.
fn mix_channels(h: &[f64], w: &[f64], b: f64, n: usize, c: usize) -> Vec<f64> {
    let mut out = vec![b; n];
    for ch in 0..c {
        let row = &h[ch * n..(ch + 1) * n];
        let weight = w[ch];
        for (o, v) in out.iter_mut().zip(row) {
            *o += weight * v;
        }
    }
    out.iter_mut().for_each(|o| *o = o.tanh());
    out
}

#[allow(clippy::too_many_arguments)]
fn backward_encoder(
    padded: &[f64],
    h: &[f64],
    a: &[f64],
    d_a: &[f64],
    mix_w: &[f64],
    grad: &mut [f64],
    g_conv_w: usize,
    g_conv_b: usize,
    g_mix_w: usize,
    g_mix_b: usize,
    n: usize,
    k: usize,
    c: usize,
) {
    let pn = n + k - 1;
    let mut d_pre_mix = vec![0.0; n];
    for j in 0..n {
        d_pre_mix[j] = d_a[j] * (1.0 - a[j] * a[j]);
    }
    grad[g_mix_b] += d_pre_mix.iter().sum::<f64>();
    let mut d_u = vec![0.0; n];
    for ch in 0..c {
        let h_row = &h[ch * n..(ch + 1) * n];
        let mut gw = 0.0;
        for j in 0..n {
            gw += d_pre_mix[j] * h_row[j];
            d_u[j] = d_pre_mix[j] * mix_w[ch] * (1.0 - h_row[j] * h_row[j]);
        }
        grad[g_mix_w + ch] += gw;
        grad[g_conv_b + ch] += d_u.iter().sum::<f64>();
        for dt in 0..k {
            let row = &padded[dt * pn..(dt + 1) * pn];
            for db in 0..k {
                let shifted = &row[db..db + n];
                let mut g = 0.0;
                for (du, v) in d_u.iter().zip(shifted) {
                    g += du * v;
                }
                grad[g_conv_w + ch * k * k + dt * k + db] += g;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Model file: magic + JSON manifest + raw little-endian f64 parameters
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 8] = b"TCNM0001";
pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    version: u32,
    meta: TcnMeta,
    tensors: Vec<ManifestTensor>,
    param_count: usize,
}

#[derive(Serialize, Deserialize)]
struct ManifestTensor {
    name: String,
    shape: Vec<usize>,
}

impl TcnModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let manifest = ModelManifest {
            version: MODEL_FILE_VERSION,
            meta: self.meta,
            tensors: tensor_manifest(&self.meta)
                .into_iter()
                .map(|(name, shape)| ManifestTensor {
                    name: name.into(),
                    shape,
                })
                .collect(),
            param_count: self.param_count(),
        };
        let manifest_bytes = serde_json::to_vec(&manifest)?;
        let mut out = std::fs::File::create(path)?;
        out.write_all(MODEL_MAGIC)?;
        out.write_all(&(manifest_bytes.len() as u32).to_le_bytes())?;
        out.write_all(&manifest_bytes)?;
        for v in &self.params {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::open(path)?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::CorruptFile {
                kind: "model",
                detail: "bad magic".into(),
            });
        }
        let mut len = [0u8; 4];
        file.read_exact(&mut len)?;
        let mut manifest_bytes = vec![0u8; u32::from_le_bytes(len) as usize];
        file.read_exact(&mut manifest_bytes)?;
        let manifest: ModelManifest = serde_json::from_slice(&manifest_bytes)?;
        if manifest.version != MODEL_FILE_VERSION {
            return Err(Error::VersionMismatch {
                expected: MODEL_FILE_VERSION,
                got: manifest.version,
            });
        }
        let layout = Layout::new(&manifest.meta);
        if manifest.param_count != layout.total {
            return Err(Error::CorruptFile {
                kind: "model",
                detail: format!(
                    "param count {} does not match shape manifest ({})",
                    manifest.param_count, layout.total
                ),
            });
        }
        let mut params = vec![0.0; layout.total];
        let mut buf = [0u8; 8];
        for v in &mut params {
            file.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(Self {
            meta: manifest.meta,
            params,
            layout,
        })
    }
}
