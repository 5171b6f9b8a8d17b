//! Segment feature pooling and whole-dataset loading.
//!
//! A node's feature vector is the arithmetic mean of its segment's frame
//! window `[floor(start*fps), ceil(end*fps))`, clipped to the table; when
//! clipping empties the window the nearest single frame stands in. Means
//! are accumulated in f64, which is also the precision the model runs in.

use std::path::{Path, PathBuf};

use super::{load_features, load_manifest, DataError, FeatureTable, Manifest, SegmentAnnotation, TakeRecord};
use crate::exec::maybe_par_try_map;

/// Mean-pool one segment's frame window out of a feature table.
pub fn pool_segment_features(
    table: &FeatureTable,
    seg: &SegmentAnnotation,
    frame_rate: f64,
) -> Vec<f64> {
    let rows = table.rows() as i64;
    let a = (seg.start_time * frame_rate).floor() as i64;
    let b = (seg.end_time * frame_rate).ceil() as i64;
    let lo = a.max(0);
    let hi = b.min(rows);
    let (lo, hi) = if lo < hi {
        (lo as usize, hi as usize)
    } else {
        // Degenerate after clipping: fall back to the nearest single frame.
        let nearest = if b <= 0 { 0 } else { rows as usize - 1 };
        (nearest, nearest + 1)
    };

    let cols = table.cols();
    let mut acc = vec![0.0f64; cols];
    for r in lo..hi {
        for (dst, &v) in acc.iter_mut().zip(table.row(r)) {
            *dst += v as f64;
        }
    }
    let n = (hi - lo) as f64;
    for v in &mut acc {
        *v /= n;
    }
    acc
}

/// Per-take pooled features: one vector per segment for the ego view, per
/// exo view, and optionally per text row.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledTake {
    pub take_id: String,
    /// One pooled vector per segment, ego view.
    pub ego: Vec<Vec<f64>>,
    /// Per exo view (manifest order), one pooled vector per segment.
    pub exo: Vec<Vec<Vec<f64>>>,
    /// One text vector per segment, when the take carries text features.
    pub text: Option<Vec<Vec<f64>>>,
}

/// A manifest bound to the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    root: PathBuf,
}

/// A dataset with all takes pooled into memory, index-aligned with
/// `manifest.takes`.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub manifest: Manifest,
    pub pooled: Vec<PooledTake>,
}

impl Dataset {
    /// Open a manifest file; paths resolve against its parent directory.
    pub fn open(manifest_path: impl AsRef<Path>) -> Result<Self, DataError> {
        let manifest_path = manifest_path.as_ref();
        let manifest = load_manifest(manifest_path)?;
        let root = manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        Ok(Self { manifest, root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn load_view_table(
        &self,
        view_path: &Path,
        expected_rows: usize,
        expected_cols: usize,
    ) -> Result<FeatureTable, DataError> {
        let path = Manifest::resolve_path(&self.root, view_path);
        let table = load_features(&path)?;
        if table.rows() != expected_rows || table.cols() != expected_cols {
            return Err(DataError::ShapeMismatch {
                path,
                expected_rows,
                expected_cols,
                rows: table.rows(),
                cols: table.cols(),
            });
        }
        Ok(table)
    }

    /// Load and pool one take's views and text features.
    pub fn load_take(&self, take: &TakeRecord) -> Result<PooledTake, DataError> {
        let fps = self.manifest.frame_rate;
        let dim = self.manifest.feature_dim_vision;

        let ego_table =
            self.load_view_table(&take.ego_view.features_path, take.ego_view.num_frames, dim)?;
        let ego = take
            .segments
            .iter()
            .map(|seg| pool_segment_features(&ego_table, seg, fps))
            .collect();

        let mut exo = Vec::with_capacity(take.exo_views.len());
        for view in &take.exo_views {
            let table = self.load_view_table(&view.features_path, view.num_frames, dim)?;
            exo.push(
                take.segments
                    .iter()
                    .map(|seg| pool_segment_features(&table, seg, fps))
                    .collect(),
            );
        }

        // Text features are already per-segment: row s belongs to segment s.
        let text = match &take.text_features_path {
            Some(p) => {
                let table = self.load_view_table(
                    p,
                    take.segments.len(),
                    self.manifest.feature_dim_text,
                )?;
                Some(
                    (0..table.rows())
                        .map(|r| table.row(r).iter().map(|&v| v as f64).collect())
                        .collect(),
                )
            }
            None => None,
        };

        Ok(PooledTake {
            take_id: take.take_id.clone(),
            ego,
            exo,
            text,
        })
    }

    /// Pool every take. Files load concurrently when `parallel` is set and
    /// the `parallel` feature is compiled in.
    pub fn load_all(&self, parallel: bool) -> Result<LoadedDataset, DataError> {
        let pooled = maybe_par_try_map(parallel, &self.manifest.takes, |_, take| {
            self.load_take(take)
        })?;
        Ok(LoadedDataset {
            manifest: self.manifest.clone(),
            pooled,
        })
    }
}
