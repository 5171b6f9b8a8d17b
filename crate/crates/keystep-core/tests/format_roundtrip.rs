//! Bit-exactness of the on-disk formats: feature tables, manifests, and
//! checkpoints all reload to exactly what was written.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use proptest::prelude::*;
use rand::Rng;

use keystep_core::dataset::{
    load_features, load_manifest, write_features, write_manifest, FeatureTable, Manifest,
    SegmentAnnotation, TakeRecord, ViewRecord, FEATURE_MAGIC,
};
use keystep_core::graph::{ContextMode, EdgeType, NodeType, Variant};
use keystep_core::model::{
    init_params, load_checkpoint, save_checkpoint, CheckpointMeta, ModelConfig,
};
use keystep_core::rng::seeded_rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Any finite f32 payload — subnormals, negative zero, extreme
    /// magnitudes — survives a write/load cycle with identical bits.
    /// The format rejects non-finite values by contract (the loader
    /// validates finiteness), so random bit patterns are folded into
    /// the finite range before writing.
    #[test]
    fn feature_tables_round_trip_bit_exactly(
        rows in 1usize..=12,
        cols in 1usize..=16,
        seed in any::<u64>(),
        raw in prop::collection::vec(any::<u32>(), 0..=4),
    ) {
        // Keep sign and mantissa; an all-ones exponent (Inf/NaN) gets its
        // top bit cleared, landing on a normal finite value instead.
        fn finite(bits: u32) -> f32 {
            let v = f32::from_bits(bits);
            if v.is_finite() {
                v
            } else {
                f32::from_bits(bits & !0x4000_0000)
            }
        }

        let mut rng = seeded_rng(seed);
        let mut data: Vec<f32> = (0..rows * cols)
            .map(|_| finite(rng.random::<u32>()))
            .collect();
        // Plant the explicitly generated bit patterns up front so edge
        // cases from shrinking land in the table.
        for (slot, &bits) in data.iter_mut().zip(&raw) {
            *slot = finite(bits);
        }

        let table = FeatureTable::new(rows, cols, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.glvf");
        write_features(&path, &table).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        prop_assert_eq!(&bytes[..4], &FEATURE_MAGIC[..]);

        let back = load_features(&path).unwrap();
        prop_assert_eq!(back.rows(), rows);
        prop_assert_eq!(back.cols(), cols);
        let want: Vec<u32> = table.data().iter().map(|v| v.to_bits()).collect();
        let got: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(want, got);
    }
}

fn random_manifest(rng: &mut impl Rng, case: usize, features_file: &str) -> Manifest {
    let num_classes = rng.random_range(2..=10usize);
    let feature_dim_text = if rng.random::<bool>() {
        rng.random_range(1..=8usize)
    } else {
        0
    };
    let takes = (0..rng.random_range(1..=5usize))
        .map(|t| {
            let duration = rng.random_range(10.0..500.0f64);
            let n = rng.random_range(1..=6usize);
            let mut bounds: Vec<f64> = (0..=n)
                .map(|i| duration * (i as f64 + rng.random_range(0.0..0.4)) / (n as f64 + 0.4))
                .collect();
            bounds[0] = 0.0;
            bounds[n] = bounds[n].min(duration);
            bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            fn view(rng: &mut impl Rng, id: String, features_file: &str) -> ViewRecord {
                ViewRecord {
                    view_id: id,
                    features_path: PathBuf::from(features_file),
                    num_frames: rng.random_range(1..=50),
                }
            }
            let ego_view = view(rng, "ego".to_string(), features_file);
            let num_exo = rng.random_range(0..=3usize);
            TakeRecord {
                take_id: format!("case{case}_take{t}"),
                duration,
                ego_view,
                exo_views: (0..num_exo)
                    .map(|v| view(rng, format!("exo{v}"), features_file))
                    .collect(),
                text_features_path: (feature_dim_text > 0 && rng.random::<bool>())
                    .then(|| PathBuf::from(features_file)),
                segments: (0..n)
                    .map(|s| SegmentAnnotation {
                        segment_index: s,
                        start_time: bounds[s],
                        end_time: bounds[s + 1].max(bounds[s] + 1e-6),
                        label: rng.random_range(0..num_classes),
                    })
                    .collect(),
            }
        })
        .collect();
    Manifest {
        dataset_name: format!("roundtrip-{case}"),
        num_classes,
        feature_dim_vision: rng.random_range(1..=16),
        feature_dim_text,
        frame_rate: rng.random_range(0.5..60.0),
        takes,
    }
}

#[test]
fn manifests_round_trip_through_json_exactly() {
    let dir = tempfile::tempdir().unwrap();
    // Loading stat-checks referenced feature files, so give every record
    // one real file to point at.
    let table = FeatureTable::new(1, 1, vec![0.0]).unwrap();
    write_features(dir.path().join("f.glvf"), &table).unwrap();

    let mut rng = seeded_rng(202);
    for case in 0..100 {
        let manifest = random_manifest(&mut rng, case, "f.glvf");
        let path = dir.path().join("manifest.json");
        write_manifest(&path, &manifest).unwrap();
        let back = load_manifest(&path).unwrap();
        // JSON holds floats in shortest round-trip notation, so equality
        // here is exact, not approximate.
        assert_eq!(manifest, back, "case {case}");
    }
}

#[test]
fn checkpoints_reload_identical_params_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded_rng(303);

    for case in 0..20u64 {
        let mut input_dims = BTreeMap::from([(NodeType::EgoVision, rng.random_range(1..=8usize))]);
        let mut edges = BTreeSet::from([EdgeType::Temporal]);
        let mut variant = Variant::EgoOnly;
        if rng.random::<bool>() {
            input_dims.insert(NodeType::ExoVision, rng.random_range(1..=8usize));
            edges.insert(EdgeType::EgoExo);
            variant = Variant::MultiView;
        }
        if rng.random::<bool>() {
            input_dims.insert(NodeType::Text, rng.random_range(1..=6usize));
            edges.insert(EdgeType::VisionText);
            variant = if variant == Variant::MultiView {
                Variant::MultiViewHetero
            } else {
                Variant::Hetero
            };
        }
        let mut config = ModelConfig::new(rng.random_range(2..=6usize), input_dims, edges);
        config.hidden_dim = rng.random_range(2..=10);
        config.num_layers = rng.random_range(1..=3);
        config.dropout_p = rng.random_range(0.0..0.5);

        let params = init_params(&config, 5000 + case);
        let meta = CheckpointMeta {
            model: config,
            variant,
            context: ContextMode::ALL[case as usize % 3],
        };
        let path = dir.path().join(format!("m{case}.glvp"));
        save_checkpoint(&path, &params, &meta).unwrap();
        let (loaded_params, loaded_meta) = load_checkpoint(&path).unwrap();
        assert!(
            params.bits_eq(&loaded_params),
            "case {case}: parameter bits drifted through the checkpoint"
        );
        assert_eq!(meta, loaded_meta, "case {case}");
    }
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = ModelConfig::new(
        3,
        BTreeMap::from([(NodeType::EgoVision, 4)]),
        BTreeSet::from([EdgeType::Temporal]),
    );
    let params = init_params(&config, 1);
    let meta = CheckpointMeta {
        model: config,
        variant: Variant::EgoOnly,
        context: ContextMode::FullContext,
    };
    let path = dir.path().join("m.glvp");
    save_checkpoint(&path, &params, &meta).unwrap();

    let bytes = std::fs::read(&path).unwrap();
    let truncated = dir.path().join("truncated.glvp");
    std::fs::write(&truncated, &bytes[..bytes.len() - 5]).unwrap();
    assert!(load_checkpoint(&truncated).is_err());

    let mut wrong = bytes.clone();
    wrong[0] ^= 0xFF;
    let bad_magic = dir.path().join("magic.glvp");
    std::fs::write(&bad_magic, &wrong).unwrap();
    assert!(load_checkpoint(&bad_magic).is_err());
}
