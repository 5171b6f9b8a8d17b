//! Synthetic dataset generation.
//!
//! The generator manufactures datasets whose structure makes the
//! pipeline's claims testable at desk scale:
//!
//! * Labels follow a sticky Markov chain, so neighboring segments carry
//!   information about each other.
//! * Classes come in confusable pairs — both members of a pair sit near a
//!   shared direction, separated by a small orthogonal offset. A single
//!   noisy segment is often ambiguous between pair members; averaging
//!   over a temporal neighborhood (what message passing does) restores
//!   the separation. Temporal context therefore helps by construction.
//! * Each exo view sees class prototypes through its own fixed random
//!   orthogonal transform plus independent noise: recoverable signal,
//!   differently embedded — extra views help, trivial copying does not.
//! * Text features are class one-hots at configurable fidelity: a
//!   fidelity-1 text channel nearly names the label, fidelity 0.5 is
//!   half lies.
//!
//! Generation is deterministic per seed, with per-take derived streams so
//! takes can be produced concurrently without changing a single byte.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    write_features, write_manifest, DataError, FeatureTable, Manifest, SegmentAnnotation,
    TakeRecord, ViewRecord,
};
use crate::exec::maybe_par_try_map;
use crate::rng::stream_rng;

/// Distance of every prototype from the origin. Large relative to the
/// pair offset so different pairs are easy to tell apart and confusion
/// concentrates within pairs.
const PROTOTYPE_SCALE: f64 = 3.0;

/// Within-pair half-offset along the pair's orthogonal split direction.
const PAIR_OFFSET_DELTA: f64 = 0.2;

// Stream ids off the base seed.
const STREAM_PROTOTYPES: u64 = 0;
const STREAM_VIEW_TRANSFORMS: u64 = 1;
const STREAM_TAKE_BASE: u64 = 100;

/// Knobs of the generator. Serde-friendly so a JSON config file can
/// override any subset of the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub dataset_name: String,
    pub num_takes: usize,
    /// Inclusive range of segments per take.
    pub segments_per_take: (usize, usize),
    pub num_classes: usize,
    pub feature_dim_vision: usize,
    /// 0 disables text features entirely.
    pub feature_dim_text: usize,
    pub num_exo_views: usize,
    /// Markov self-transition probability.
    pub stickiness: f64,
    /// Per-coordinate noise on ego frame features.
    pub noise_sigma: f64,
    /// Per-coordinate noise on exo frame features.
    pub view_noise_sigma: f64,
    /// Probability a segment's text names the true class.
    pub text_fidelity: f64,
    /// Inclusive range of frames per segment.
    pub frames_per_segment: (usize, usize),
    pub frame_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    // The noise defaults are per-frame and sized against mean-pooling:
    // after averaging a typical segment (≈7 frames) roughly 1.1σ of
    // noise remains — enough to confuse pair members on an isolated
    // segment while leaving cross-pair confusion rare. Exo views are
    // noisier than ego (as third-person cameras are for fine hand-object
    // detail) but still carry class signal well above chance.
    fn default() -> Self {
        Self {
            dataset_name: "synthetic-keysteps".to_string(),
            num_takes: 60,
            segments_per_take: (10, 30),
            num_classes: 8,
            feature_dim_vision: 32,
            feature_dim_text: 16,
            num_exo_views: 2,
            stickiness: 0.85,
            noise_sigma: 3.0,
            view_noise_sigma: 4.0,
            text_fidelity: 1.0,
            frames_per_segment: (4, 10),
            frame_rate: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |reason: String| Err(SynthError::InvalidConfig { reason });
        if self.num_takes == 0 {
            return bad("num_takes must be ≥ 1".to_string());
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes {} must be ≥ 2", self.num_classes));
        }
        if self.feature_dim_vision == 0 {
            return bad("feature_dim_vision must be ≥ 1".to_string());
        }
        let (lo, hi) = self.segments_per_take;
        if lo == 0 || lo > hi {
            return bad(format!("segments_per_take ({lo}, {hi}) must be a nonempty range"));
        }
        let (flo, fhi) = self.frames_per_segment;
        if flo == 0 || flo > fhi {
            return bad(format!("frames_per_segment ({flo}, {fhi}) must be a nonempty range"));
        }
        if !(0.0..=1.0).contains(&self.stickiness) {
            return bad(format!("stickiness {} must be in [0, 1]", self.stickiness));
        }
        if !(0.0..=1.0).contains(&self.text_fidelity) {
            return bad(format!("text_fidelity {} must be in [0, 1]", self.text_fidelity));
        }
        if !(self.noise_sigma >= 0.0) || !(self.view_noise_sigma >= 0.0) {
            return bad("noise sigmas must be ≥ 0".to_string());
        }
        if !(self.frame_rate > 0.0) || !self.frame_rate.is_finite() {
            return bad(format!("frame_rate {} must be positive", self.frame_rate));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

impl SynthError {
    pub fn category(&self) -> &'static str {
        match self {
            SynthError::InvalidConfig { .. } => "synthgen.InvalidConfig",
            SynthError::Io { .. } => "synthgen.Io",
            SynthError::Data(e) => e.category(),
        }
    }
}

fn sample_unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Class prototypes in confusable pairs: classes (2i, 2i+1) share a unit
/// direction u and split by ±δ along an orthogonal direction; an odd
/// final class stands alone. All prototypes live on a sphere of radius
/// [`PROTOTYPE_SCALE`].
fn make_prototypes(k: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut prototypes = Vec::with_capacity(k);
    let mut c = 0;
    while c < k {
        let u = sample_unit_vector(dim, rng);
        if c + 1 < k {
            // orthogonalize a second direction against u
            let mut e = sample_unit_vector(dim, rng);
            let dot: f64 = u.iter().zip(&e).map(|(a, b)| a * b).sum();
            for (ei, ui) in e.iter_mut().zip(&u) {
                *ei -= dot * ui;
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            let e: Vec<f64> = e.into_iter().map(|x| x / norm).collect();
            for sign in [1.0, -1.0] {
                let raw: Vec<f64> = u
                    .iter()
                    .zip(&e)
                    .map(|(ui, ei)| ui + sign * PAIR_OFFSET_DELTA * ei)
                    .collect();
                let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
                prototypes.push(raw.into_iter().map(|x| PROTOTYPE_SCALE * x / norm).collect());
            }
            c += 2;
        } else {
            prototypes.push(u.into_iter().map(|x| PROTOTYPE_SCALE * x).collect());
            c += 1;
        }
    }
    prototypes
}

/// Random orthogonal matrix by modified Gram-Schmidt over a Gaussian
/// matrix, with a second orthogonalization pass for tight numerics.
fn make_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut q = Array2::from_shape_fn((dim, dim), |_| rng.sample::<f64, _>(StandardNormal));
    for _ in 0..2 {
        for j in 0..dim {
            for i in 0..j {
                let dot = q.column(i).dot(&q.column(j));
                let prev = q.column(i).to_owned();
                let mut col = q.column_mut(j);
                col.scaled_add(-dot, &prev);
            }
            let norm = q.column(j).dot(&q.column(j)).sqrt();
            let mut col = q.column_mut(j);
            col /= norm;
        }
    }
    q
}

/// Sticky Markov label chain: stay with probability `s`, otherwise jump
/// uniformly to one of the other classes.
fn sample_labels(len: usize, k: usize, stickiness: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut labels = Vec::with_capacity(len);
    let mut current = rng.random_range(0..k);
    labels.push(current);
    for _ in 1..len {
        if rng.random::<f64>() >= stickiness {
            let jump = rng.random_range(0..k - 1);
            current = if jump >= current { jump + 1 } else { jump };
        }
        labels.push(current);
    }
    labels
}

struct TakeFiles {
    record: TakeRecord,
    files: Vec<(PathBuf, FeatureTable)>,
}

fn generate_take(
    config: &SynthConfig,
    take_index: usize,
    prototypes: &[Vec<f64>],
    transforms: &[Array2<f64>],
) -> TakeFiles {
    let mut rng = stream_rng(config.seed, STREAM_TAKE_BASE + take_index as u64);
    let take_id = format!("take_{take_index:03}");
    let (slo, shi) = config.segments_per_take;
    let num_segments = rng.random_range(slo..=shi);
    let labels = sample_labels(num_segments, config.num_classes, config.stickiness, &mut rng);
    let (flo, fhi) = config.frames_per_segment;
    let frames: Vec<usize> = (0..num_segments)
        .map(|_| rng.random_range(flo..=fhi))
        .collect();
    let total_frames: usize = frames.iter().sum();

    let mut segments = Vec::with_capacity(num_segments);
    let mut cursor = 0usize;
    for (s, &f) in frames.iter().enumerate() {
        let start_time = cursor as f64 / config.frame_rate;
        let end_time = (cursor + f) as f64 / config.frame_rate;
        segments.push(SegmentAnnotation {
            segment_index: s,
            start_time,
            end_time,
            label: labels[s],
        });
        cursor += f;
    }
    let duration = total_frames as f64 / config.frame_rate;

    let dv = config.feature_dim_vision;
    let noise = |rng: &mut ChaCha8Rng, sigma: f64| -> f64 {
        sigma * rng.sample::<f64, _>(StandardNormal)
    };

    let mut files = Vec::new();

    // ego frames: prototype of the segment's label plus isotropic noise
    let mut ego = Vec::with_capacity(total_frames * dv);
    for (s, &f) in frames.iter().enumerate() {
        let proto = &prototypes[labels[s]];
        for _ in 0..f {
            for &p in proto {
                ego.push((p + noise(&mut rng, config.noise_sigma)) as f32);
            }
        }
    }
    let ego_rel = PathBuf::from(format!("features/{take_id}_ego.glvf"));
    files.push((
        ego_rel.clone(),
        FeatureTable::new(total_frames, dv, ego).expect("consistent synth dims"),
    ));

    // exo views: the same prototypes through each view's orthogonal
    // transform, with the view's own noise
    let mut exo_views = Vec::with_capacity(config.num_exo_views);
    for (j, q) in transforms.iter().enumerate() {
        let mut data = Vec::with_capacity(total_frames * dv);
        for (s, &f) in frames.iter().enumerate() {
            let proto = &prototypes[labels[s]];
            let mut transformed = vec![0.0f64; dv];
            for (r, t) in transformed.iter_mut().enumerate() {
                *t = (0..dv).map(|c| q[[r, c]] * proto[c]).sum();
            }
            for _ in 0..f {
                for &t in &transformed {
                    data.push((t + noise(&mut rng, config.view_noise_sigma)) as f32);
                }
            }
        }
        let rel = PathBuf::from(format!("features/{take_id}_exo{j}.glvf"));
        exo_views.push(ViewRecord {
            view_id: format!("exo{j}"),
            features_path: rel.clone(),
            num_frames: total_frames,
        });
        files.push((
            rel,
            FeatureTable::new(total_frames, dv, data).expect("consistent synth dims"),
        ));
    }

    // text: one-hot class prototype, truthful with probability
    // text_fidelity, otherwise a uniformly random wrong class
    let text_features_path = if config.feature_dim_text > 0 {
        let dt = config.feature_dim_text;
        let mut data = vec![0.0f32; num_segments * dt];
        for (s, &label) in labels.iter().enumerate() {
            let said = if rng.random::<f64>() < config.text_fidelity {
                label
            } else {
                let jump = rng.random_range(0..config.num_classes - 1);
                if jump >= label {
                    jump + 1
                } else {
                    jump
                }
            };
            data[s * dt + (said % dt)] = 1.0;
        }
        let rel = PathBuf::from(format!("features/{take_id}_text.glvf"));
        files.push((
            rel.clone(),
            FeatureTable::new(num_segments, dt, data).expect("consistent synth dims"),
        ));
        Some(rel)
    } else {
        None
    };

    TakeFiles {
        record: TakeRecord {
            take_id,
            duration,
            ego_view: ViewRecord {
                view_id: "ego".to_string(),
                features_path: ego_rel,
                num_frames: total_frames,
            },
            exo_views,
            text_features_path,
            segments,
        },
        files,
    }
}

/// Generate a dataset under `out_dir`: feature files in `features/`, plus
/// `manifest.json`. Returns the manifest. Byte-identical per seed whether
/// run sequentially or in parallel.
pub fn generate(
    config: &SynthConfig,
    out_dir: impl AsRef<Path>,
    parallel: bool,
) -> Result<Manifest, SynthError> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    let features_dir = out_dir.join("features");
    fs::create_dir_all(&features_dir).map_err(|e| SynthError::Io {
        path: features_dir.clone(),
        source: e,
    })?;

    if config.feature_dim_text > 0 && config.num_classes > config.feature_dim_text {
        log::warn!(
            "{} classes share {} text dimensions; distinct classes will alias",
            config.num_classes,
            config.feature_dim_text
        );
    }

    let mut proto_rng = stream_rng(config.seed, STREAM_PROTOTYPES);
    let prototypes = make_prototypes(
        config.num_classes,
        config.feature_dim_vision,
        &mut proto_rng,
    );
    let mut view_rng = stream_rng(config.seed, STREAM_VIEW_TRANSFORMS);
    let transforms: Vec<Array2<f64>> = (0..config.num_exo_views)
        .map(|_| make_orthogonal(config.feature_dim_vision, &mut view_rng))
        .collect();

    let take_indices: Vec<usize> = (0..config.num_takes).collect();
    let takes = maybe_par_try_map(parallel, &take_indices, |_, &t| {
        let take = generate_take(config, t, &prototypes, &transforms);
        for (rel, table) in &take.files {
            write_features(out_dir.join(rel), table)?;
        }
        Ok::<TakeRecord, SynthError>(take.record)
    })?;

    let manifest = Manifest {
        dataset_name: config.dataset_name.clone(),
        num_classes: config.num_classes,
        feature_dim_vision: config.feature_dim_vision,
        feature_dim_text: config.feature_dim_text,
        frame_rate: config.frame_rate,
        takes,
    };
    manifest.validate(Some(out_dir))?;
    write_manifest(out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Empirical label statistics of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    /// `transitions[a][b]`: count of consecutive segment pairs (a → b).
    pub transitions: Vec<Vec<u64>>,
    pub class_counts: Vec<u64>,
}

/// Count label occurrences and within-take transitions.
pub fn summarize(manifest: &Manifest) -> SynthSummary {
    let k = manifest.num_classes;
    let mut transitions = vec![vec![0u64; k]; k];
    let mut class_counts = vec![0u64; k];
    for take in &manifest.takes {
        for w in take.segments.windows(2) {
            transitions[w[0].label][w[1].label] += 1;
        }
        for seg in &take.segments {
            class_counts[seg.label] += 1;
        }
    }
    SynthSummary {
        transitions,
        class_counts,
    }
}
