//! Builders that turn one take's pooled features into graphs.

use crate::dataset::{PooledTake, TakeRecord};
use crate::exec::maybe_par_try_map;
use crate::dataset::LoadedDataset;

use super::{ContextMode, Edge, EdgeType, Graph, GraphError, Node, NodeType, Variant};

/// Construction knobs beyond the variant/context axes.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Also chain exocentric nodes of one view with temporal edges.
    /// Off by default: exo nodes normally attach through ego-exo edges only.
    pub exo_temporal_edges: bool,
}

/// Group segment positions into context windows, in time order.
///
/// Windows are nonempty and disjoint, and together cover every segment.
/// Short context splits `[0, duration)` into four equal half-open windows
/// and assigns each segment by its midpoint; a midpoint exactly on a
/// boundary belongs to the later window.
pub fn windows(take: &TakeRecord, mode: ContextMode) -> Vec<Vec<usize>> {
    let n = take.segments.len();
    match mode {
        ContextMode::NoContext => (0..n).map(|i| vec![i]).collect(),
        ContextMode::FullContext => {
            if n == 0 {
                Vec::new()
            } else {
                vec![(0..n).collect()]
            }
        }
        ContextMode::ShortContext => {
            let mut bins: [Vec<usize>; 4] = Default::default();
            for (i, seg) in take.segments.iter().enumerate() {
                let mid = 0.5 * (seg.start_time + seg.end_time);
                let idx = ((mid * 4.0 / take.duration).floor() as i64).clamp(0, 3) as usize;
                bins[idx].push(i);
            }
            bins.into_iter().filter(|b| !b.is_empty()).collect()
        }
    }
}

fn check_view(
    take: &TakeRecord,
    view_id: &str,
    vectors: usize,
) -> Result<(), GraphError> {
    if vectors != take.segments.len() {
        return Err(GraphError::ViewSegmentMismatch {
            take_id: take.take_id.clone(),
            view_id: view_id.to_string(),
            vectors,
            segments: take.segments.len(),
        });
    }
    Ok(())
}

fn build_impl(
    take: &TakeRecord,
    pooled: &PooledTake,
    mode: ContextMode,
    include_exo: bool,
    include_text: bool,
    options: BuildOptions,
) -> Result<Vec<Graph>, GraphError> {
    if take.segments.is_empty() {
        return Err(GraphError::EmptyTake {
            take_id: take.take_id.clone(),
        });
    }
    check_view(take, &take.ego_view.view_id, pooled.ego.len())?;
    let num_views = if include_exo { take.exo_views.len() } else { 0 };
    if include_exo {
        for (view, vecs) in take.exo_views.iter().zip(&pooled.exo) {
            check_view(take, &view.view_id, vecs.len())?;
        }
        if pooled.exo.len() != take.exo_views.len() {
            return Err(GraphError::ViewSegmentMismatch {
                take_id: take.take_id.clone(),
                view_id: "<exo set>".to_string(),
                vectors: pooled.exo.len(),
                segments: take.exo_views.len(),
            });
        }
    }
    let text = if include_text {
        let t = pooled
            .text
            .as_ref()
            .ok_or_else(|| GraphError::MissingTextFeatures {
                take_id: take.take_id.clone(),
            })?;
        check_view(take, "text", t.len())?;
        Some(t)
    } else {
        None
    };

    let mut graphs = Vec::new();
    for window in windows(take, mode) {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        // Per window-position ids, filled segment-major: for each segment
        // the ego node, then exo nodes in manifest view order, then text.
        let mut ego_ids = Vec::with_capacity(window.len());
        let mut exo_ids: Vec<Vec<usize>> = vec![Vec::with_capacity(window.len()); num_views];

        for (k, &s) in window.iter().enumerate() {
            let seg = &take.segments[s];
            let ego_id = nodes.len();
            ego_ids.push(ego_id);
            nodes.push(Node {
                node_type: NodeType::EgoVision,
                view_id: take.ego_view.view_id.clone(),
                segment_index: s,
                features: pooled.ego[s].clone(),
                label: seg.label,
                train_mask: true,
                eval_mask: true,
            });
            if k > 0 {
                edges.push(Edge::new(ego_ids[k - 1], ego_id, EdgeType::Temporal));
            }
            for v in 0..num_views {
                let exo_id = nodes.len();
                exo_ids[v].push(exo_id);
                nodes.push(Node {
                    node_type: NodeType::ExoVision,
                    view_id: take.exo_views[v].view_id.clone(),
                    segment_index: s,
                    features: pooled.exo[v][s].clone(),
                    label: seg.label,
                    train_mask: true,
                    eval_mask: false,
                });
                edges.push(Edge::new(ego_id, exo_id, EdgeType::EgoExo));
                if options.exo_temporal_edges && k > 0 {
                    edges.push(Edge::new(exo_ids[v][k - 1], exo_id, EdgeType::Temporal));
                }
            }
            if let Some(text) = text {
                let text_id = nodes.len();
                nodes.push(Node {
                    node_type: NodeType::Text,
                    view_id: "text".to_string(),
                    segment_index: s,
                    features: text[s].clone(),
                    label: seg.label,
                    train_mask: false,
                    eval_mask: false,
                });
                edges.push(Edge::new(ego_id, text_id, EdgeType::VisionText));
            }
        }
        graphs.push(Graph {
            take_id: take.take_id.clone(),
            nodes,
            edges,
        });
    }
    Ok(graphs)
}

/// Ego graphs: one vision node per segment, temporal chain per window.
pub fn build_ego_graphs(
    take: &TakeRecord,
    pooled: &PooledTake,
    mode: ContextMode,
) -> Result<Vec<Graph>, GraphError> {
    build_impl(take, pooled, mode, false, false, BuildOptions::default())
}

/// Multiview graphs: the ego graph plus one exo node and ego-exo edge per
/// (segment, exo view).
pub fn build_multiview_graphs(
    take: &TakeRecord,
    pooled: &PooledTake,
    mode: ContextMode,
    options: BuildOptions,
) -> Result<Vec<Graph>, GraphError> {
    build_impl(take, pooled, mode, true, false, options)
}

/// Heterogeneous graphs: ego (or multiview when `include_exo`) plus one
/// text node and vision-text edge per segment.
pub fn build_hetero_graphs(
    take: &TakeRecord,
    pooled: &PooledTake,
    mode: ContextMode,
    include_exo: bool,
    options: BuildOptions,
) -> Result<Vec<Graph>, GraphError> {
    build_impl(take, pooled, mode, include_exo, true, options)
}

/// Dispatch on the variant axis.
pub fn build_graphs(
    take: &TakeRecord,
    pooled: &PooledTake,
    variant: Variant,
    mode: ContextMode,
    options: BuildOptions,
) -> Result<Vec<Graph>, GraphError> {
    build_impl(
        take,
        pooled,
        mode,
        variant.includes_exo(),
        variant.includes_text(),
        options,
    )
}

/// Build every take's graphs, index-aligned with `dataset.manifest.takes`.
pub fn build_dataset_graphs(
    dataset: &LoadedDataset,
    variant: Variant,
    mode: ContextMode,
    options: BuildOptions,
    parallel: bool,
) -> Result<Vec<Vec<Graph>>, GraphError> {
    maybe_par_try_map(parallel, &dataset.manifest.takes, |i, take| {
        build_graphs(take, &dataset.pooled[i], variant, mode, options)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{SegmentAnnotation, ViewRecord};
    use std::path::PathBuf;

    fn view(id: &str) -> ViewRecord {
        ViewRecord {
            view_id: id.to_string(),
            features_path: PathBuf::from(format!("{id}.glvf")),
            num_frames: 1,
        }
    }

    /// A take with `s` unit-length segments back to back and `v` exo views.
    fn take(s: usize, v: usize) -> (TakeRecord, PooledTake) {
        let segments = (0..s)
            .map(|i| SegmentAnnotation {
                segment_index: i,
                start_time: i as f64,
                end_time: (i + 1) as f64,
                label: i % 3,
            })
            .collect();
        let take = TakeRecord {
            take_id: "t0".to_string(),
            duration: s as f64,
            ego_view: view("ego"),
            exo_views: (0..v).map(|j| view(&format!("exo{j}"))).collect(),
            text_features_path: None,
            segments,
        };
        let pooled = PooledTake {
            take_id: "t0".to_string(),
            ego: (0..s).map(|i| vec![i as f64, 1.0]).collect(),
            exo: (0..v)
                .map(|j| (0..s).map(|i| vec![i as f64, -(j as f64)]).collect())
                .collect(),
            text: None,
        };
        (take, pooled)
    }

    fn with_text(mut pooled: PooledTake, s: usize) -> PooledTake {
        pooled.text = Some((0..s).map(|i| vec![i as f64]).collect());
        pooled
    }

    #[test]
    fn single_segment_full_context() {
        let (t, p) = take(1, 0);
        let gs = build_ego_graphs(&t, &p, ContextMode::FullContext).unwrap();
        assert_eq!(gs.len(), 1);
        assert_eq!(gs[0].nodes.len(), 1);
        assert!(gs[0].edges.is_empty());
    }

    #[test]
    fn four_segment_chain() {
        let (t, p) = take(4, 0);
        let gs = build_ego_graphs(&t, &p, ContextMode::FullContext).unwrap();
        assert_eq!(gs.len(), 1);
        assert_eq!(gs[0].nodes.len(), 4);
        let want: Vec<Edge> = (0..3)
            .map(|i| Edge::new(i, i + 1, EdgeType::Temporal))
            .collect();
        assert_eq!(gs[0].edges, want);
    }

    #[test]
    fn no_context_isolates_each_segment() {
        let (t, p) = take(3, 2);
        let gs = build_ego_graphs(&t, &p, ContextMode::NoContext).unwrap();
        assert_eq!(gs.len(), 3);
        for (i, g) in gs.iter().enumerate() {
            assert_eq!(g.nodes.len(), 1);
            assert!(g.edges.is_empty());
            assert_eq!(g.nodes[0].segment_index, i);
        }
    }

    #[test]
    fn short_context_bins_by_midpoint() {
        // 8 unit segments over [0,8): midpoints 0.5,1.5,...,7.5 → 2 per window.
        let (t, p) = take(8, 0);
        let gs = build_ego_graphs(&t, &p, ContextMode::ShortContext).unwrap();
        assert_eq!(gs.len(), 4);
        for (w, g) in gs.iter().enumerate() {
            assert_eq!(g.nodes.len(), 2);
            assert_eq!(g.edges.len(), 1);
            let segs: Vec<usize> = g.nodes.iter().map(|n| n.segment_index).collect();
            assert_eq!(segs, vec![2 * w, 2 * w + 1]);
        }
    }

    #[test]
    fn boundary_midpoint_goes_to_later_window() {
        // duration 4; a segment [0.5,1.5) has midpoint exactly 1.0 = T/4.
        let (mut t, mut p) = take(2, 0);
        t.duration = 4.0;
        t.segments[0].start_time = 0.5;
        t.segments[0].end_time = 1.5;
        t.segments[1].start_time = 3.0;
        t.segments[1].end_time = 4.0;
        p.ego.truncate(2);
        let w = windows(&t, ContextMode::ShortContext);
        assert_eq!(w, vec![vec![0], vec![1]]);
        // Half-open: midpoint 1.0 lands in window [1,2), i.e. index 1, not 0.
        let gs = build_ego_graphs(&t, &p, ContextMode::ShortContext).unwrap();
        assert_eq!(gs.len(), 2);
    }

    #[test]
    fn multiview_counts_and_order() {
        let (t, p) = take(3, 2);
        let gs =
            build_multiview_graphs(&t, &p, ContextMode::FullContext, BuildOptions::default())
                .unwrap();
        assert_eq!(gs.len(), 1);
        let g = &gs[0];
        assert_eq!(g.nodes.len(), 9);
        let temporal = g.edges.iter().filter(|e| e.kind == EdgeType::Temporal).count();
        let egoexo = g.edges.iter().filter(|e| e.kind == EdgeType::EgoExo).count();
        assert_eq!((temporal, egoexo), (2, 6));
        assert_eq!(g.edges.len(), 8);
        // segment-major node order: ego, exo0, exo1 per segment
        let kinds: Vec<NodeType> = g.nodes.iter().map(|n| n.node_type).collect();
        assert_eq!(
            kinds,
            vec![
                NodeType::EgoVision,
                NodeType::ExoVision,
                NodeType::ExoVision,
                NodeType::EgoVision,
                NodeType::ExoVision,
                NodeType::ExoVision,
                NodeType::EgoVision,
                NodeType::ExoVision,
                NodeType::ExoVision,
            ]
        );
        assert_eq!(g.nodes[4].view_id, "exo0");
        assert_eq!(g.nodes[5].view_id, "exo1");
    }

    #[test]
    fn zero_views_multiview_equals_ego() {
        let (t, p) = take(5, 0);
        let ego = build_ego_graphs(&t, &p, ContextMode::ShortContext).unwrap();
        let mv =
            build_multiview_graphs(&t, &p, ContextMode::ShortContext, BuildOptions::default())
                .unwrap();
        assert_eq!(ego, mv);
    }

    #[test]
    fn hetero_counts() {
        let (t, p) = take(3, 0);
        let p = with_text(p, 3);
        let gs =
            build_hetero_graphs(&t, &p, ContextMode::FullContext, false, BuildOptions::default())
                .unwrap();
        let g = &gs[0];
        assert_eq!(g.nodes.len(), 6);
        let temporal = g.edges.iter().filter(|e| e.kind == EdgeType::Temporal).count();
        let vt = g.edges.iter().filter(|e| e.kind == EdgeType::VisionText).count();
        assert_eq!((temporal, vt), (2, 3));
        assert_eq!(g.edges.len(), 5);
    }

    #[test]
    fn smallest_hetero_graph() {
        let (t, p) = take(1, 0);
        let p = with_text(p, 1);
        let gs =
            build_hetero_graphs(&t, &p, ContextMode::FullContext, false, BuildOptions::default())
                .unwrap();
        assert_eq!(gs[0].nodes.len(), 2);
        assert_eq!(gs[0].edges, vec![Edge::new(0, 1, EdgeType::VisionText)]);
    }

    #[test]
    fn missing_text_is_an_error() {
        let (t, p) = take(2, 0);
        let err =
            build_hetero_graphs(&t, &p, ContextMode::FullContext, false, BuildOptions::default())
                .unwrap_err();
        assert!(matches!(err, GraphError::MissingTextFeatures { .. }));
        assert_eq!(err.category(), "graph.MissingTextFeatures");
    }

    #[test]
    fn masks_follow_node_type() {
        let (t, p) = take(2, 1);
        let p = with_text(p, 2);
        let gs =
            build_hetero_graphs(&t, &p, ContextMode::FullContext, true, BuildOptions::default())
                .unwrap();
        for n in &gs[0].nodes {
            match n.node_type {
                NodeType::EgoVision => assert!(n.train_mask && n.eval_mask),
                NodeType::ExoVision => assert!(n.train_mask && !n.eval_mask),
                NodeType::Text => assert!(!n.train_mask && !n.eval_mask),
            }
        }
    }

    #[test]
    fn exo_temporal_flag_adds_per_view_chains() {
        let (t, p) = take(4, 2);
        let base =
            build_multiview_graphs(&t, &p, ContextMode::FullContext, BuildOptions::default())
                .unwrap();
        let opts = BuildOptions {
            exo_temporal_edges: true,
        };
        let chained = build_multiview_graphs(&t, &p, ContextMode::FullContext, opts).unwrap();
        let count = |gs: &[Graph]| {
            gs[0]
                .edges
                .iter()
                .filter(|e| e.kind == EdgeType::Temporal)
                .count()
        };
        // 3 ego chain edges, plus 3 per exo view.
        assert_eq!(count(&base), 3);
        assert_eq!(count(&chained), 3 + 2 * 3);
    }

    #[test]
    fn mismatched_pooled_vectors_rejected() {
        let (t, mut p) = take(3, 0);
        p.ego.pop();
        let err = build_ego_graphs(&t, &p, ContextMode::FullContext).unwrap_err();
        assert!(matches!(err, GraphError::ViewSegmentMismatch { .. }));
    }
}
