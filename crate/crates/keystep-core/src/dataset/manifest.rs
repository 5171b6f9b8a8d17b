//! Manifest schema, loading and validation.
//!
//! The manifest is one JSON document. Feature paths inside it are
//! interpreted relative to the directory containing the manifest file
//! (absolute paths pass through unchanged).

use std::collections::HashSet;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DataError;

/// Declarative index of a dataset: scale constants plus one record per take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_name: String,
    pub num_classes: usize,
    pub feature_dim_vision: usize,
    /// Text feature dimension; 0 when the dataset carries no text features.
    pub feature_dim_text: usize,
    /// Frames per second of every referenced feature file.
    pub frame_rate: f64,
    pub takes: Vec<TakeRecord>,
}

/// One recorded activity instance: an ego view, any number of exo views,
/// and the shared segment annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TakeRecord {
    pub take_id: String,
    /// Take length in seconds.
    pub duration: f64,
    pub ego_view: ViewRecord,
    #[serde(default)]
    pub exo_views: Vec<ViewRecord>,
    #[serde(default)]
    pub text_features_path: Option<PathBuf>,
    pub segments: Vec<SegmentAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub view_id: String,
    pub features_path: PathBuf,
    pub num_frames: usize,
}

/// A keystep segment: a half-open time interval carrying one class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAnnotation {
    pub segment_index: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub label: usize,
}

impl Manifest {
    /// Resolve a manifest-relative path against the manifest's directory.
    pub fn resolve_path(base_dir: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    }

    /// Validate every type invariant. `base_dir`, when given, additionally
    /// stat-checks referenced feature files for existence.
    pub fn validate(&self, base_dir: Option<&Path>) -> Result<(), DataError> {
        let violation = |field: &str, reason: String| DataError::SchemaViolation {
            field: field.to_string(),
            reason,
        };
        if self.num_classes < 2 {
            return Err(violation(
                "num_classes",
                format!("must be at least 2, got {}", self.num_classes),
            ));
        }
        if self.feature_dim_vision == 0 {
            return Err(violation("feature_dim_vision", "must be positive".into()));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(violation(
                "frame_rate",
                format!("must be a positive real, got {}", self.frame_rate),
            ));
        }

        let mut seen_ids = HashSet::new();
        for (t, take) in self.takes.iter().enumerate() {
            let tfield = |suffix: &str| format!("takes[{t}].{suffix}");
            if !seen_ids.insert(take.take_id.as_str()) {
                return Err(violation(
                    &tfield("take_id"),
                    format!("duplicate take_id `{}`", take.take_id),
                ));
            }
            if !(take.duration.is_finite() && take.duration > 0.0) {
                return Err(violation(
                    &tfield("duration"),
                    format!("must be a positive real, got {}", take.duration),
                ));
            }
            if take.segments.is_empty() {
                return Err(violation(&tfield("segments"), "must be nonempty".into()));
            }
            let mut views: Vec<(&ViewRecord, String)> =
                vec![(&take.ego_view, tfield("ego_view"))];
            for (v, view) in take.exo_views.iter().enumerate() {
                views.push((view, tfield(&format!("exo_views[{v}]"))));
            }
            for (view, field) in &views {
                if view.num_frames == 0 {
                    return Err(violation(
                        &format!("{field}.num_frames"),
                        "must be positive".into(),
                    ));
                }
            }
            if take.text_features_path.is_some() && self.feature_dim_text == 0 {
                return Err(violation(
                    &tfield("text_features_path"),
                    "present but feature_dim_text is 0".into(),
                ));
            }

            let mut prev_start = f64::NEG_INFINITY;
            for (s, seg) in take.segments.iter().enumerate() {
                let sfield = |suffix: &str| tfield(&format!("segments[{s}].{suffix}"));
                if seg.segment_index != s {
                    return Err(violation(
                        &sfield("segment_index"),
                        format!("expected {s}, got {}", seg.segment_index),
                    ));
                }
                if !(seg.start_time.is_finite() && seg.end_time.is_finite()) {
                    return Err(violation(&sfield("start_time"), "must be finite".into()));
                }
                if seg.start_time < 0.0
                    || seg.end_time <= seg.start_time
                    || seg.end_time > take.duration
                {
                    return Err(violation(
                        &sfield("start_time"),
                        format!(
                            "requires 0 <= start < end <= duration, got [{}, {}) with duration {}",
                            seg.start_time, seg.end_time, take.duration
                        ),
                    ));
                }
                if seg.start_time <= prev_start {
                    return Err(DataError::UnsortedSegments {
                        take_id: take.take_id.clone(),
                        segment_index: s,
                    });
                }
                prev_start = seg.start_time;
                if seg.label >= self.num_classes {
                    return Err(DataError::LabelOutOfRange {
                        take_id: take.take_id.clone(),
                        segment_index: s,
                        label: seg.label,
                        num_classes: self.num_classes,
                    });
                }
            }

            if let Some(base) = base_dir {
                let mut paths: Vec<PathBuf> = views
                    .iter()
                    .map(|(view, _)| Self::resolve_path(base, &view.features_path))
                    .collect();
                if let Some(text) = &take.text_features_path {
                    paths.push(Self::resolve_path(base, text));
                }
                for path in paths {
                    if !path.exists() {
                        return Err(DataError::MissingFile { path });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Load and validate a manifest. Referenced feature files are stat-checked
/// for existence but not opened.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            DataError::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            DataError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| DataError::SchemaViolation {
            field: "manifest".to_string(),
            reason: e.to_string(),
        })?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    manifest.validate(Some(base_dir))?;
    Ok(manifest)
}

/// Serialize a manifest as pretty JSON (human-diffable, deterministic
/// field order).
pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut body = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    body.push(b'\n');
    fs::write(path, body).map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
