//! Property tests for the structural invariants.

mod common;

use proptest::prelude::*;

use splatcast::codec::{decode_gaussian, encode_gaussian, train_codebook, QuantParams};
use splatcast::gaussian::Gaussian;
use splatcast::math::{Quat, Vec3};
use splatcast::render::{merge_tile_lists, ListEntry};
use splatcast::scene::{level_order_layout, LodNode};
use splatcast::search::{full_cut_search, validate_cut};
use splatcast::stream::WireMessage;
use splatcast::RenderConfig;

use common::{camera, make_tree};

fn arbitrary_tree_nodes(n: usize) -> impl Strategy<Value = Vec<LodNode>> {
    // parent[i] < i gives a valid acyclic tree with root 0 in any order
    proptest::collection::vec(0usize..1000, n - 1).prop_map(move |raw| {
        let mut nodes: Vec<LodNode> = Vec::with_capacity(n);
        for i in 0..n {
            let parent = if i == 0 {
                None
            } else {
                Some((raw[i - 1] % i) as u32)
            };
            nodes.push(LodNode {
                gaussian: Gaussian {
                    id: i as u32,
                    position: Vec3::new(i as f64, (i % 5) as f64, 0.0),
                    scale: Vec3::splat(0.1 + (i % 3) as f64 * 0.05),
                    rotation: Quat::IDENTITY,
                    opacity: 0.5,
                    sh: vec![[0.0; 3]],
                },
                parent,
                first_child: None,
                child_count: 0,
                subtree_id: None,
                level: 0,
            });
        }
        nodes
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_always_yields_valid_level_order(nodes in (2usize..60).prop_flat_map(arbitrary_tree_nodes)) {
        let n = nodes.len();
        let positions: std::collections::BTreeSet<i64> =
            nodes.iter().map(|nd| nd.gaussian.position.x as i64).collect();
        let tree = level_order_layout(nodes).unwrap();
        tree.validate().unwrap();
        prop_assert_eq!(tree.len(), n);
        // node multiset preserved (keyed by the distinct x positions)
        let after: std::collections::BTreeSet<i64> =
            tree.nodes.iter().map(|nd| nd.gaussian.position.x as i64).collect();
        prop_assert_eq!(positions, after);
        for (ix, node) in tree.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                prop_assert!((p as usize) < ix);
            }
        }
    }

    #[test]
    fn produced_cuts_are_frontiers_and_mutations_are_not(
        seed in 0u64..20,
        tau in 2.0f64..64.0,
    ) {
        let tree = make_tree(4, 6, seed, 8);
        let cam = camera(
            Vec3::new(20.0 + seed as f64, -25.0, 18.0),
            Vec3::ZERO,
            256.0,
            64,
            0.5,
        );
        let config = RenderConfig::default().with_tau(tau);
        let (cut, _) = full_cut_search(&tree, &cam, &config, 2);
        prop_assert!(validate_cut(&tree, &cut));
        // removing any member breaks the frontier
        if cut.members.len() > 1 {
            let mut removed = cut.clone();
            removed.members.remove(0);
            prop_assert!(!validate_cut(&tree, &removed));
        }
        // adding any non-member breaks it too
        if let Some(extra) = (0..tree.len() as u32).find(|ix| !cut.members.contains(ix)) {
            let mut added = cut.clone();
            added.members.push(extra);
            added.members.sort_unstable();
            prop_assert!(!validate_cut(&tree, &added));
        }
    }

    #[test]
    fn codec_roundtrip_is_idempotent(
        px in -10.0f64..10.0, py in -10.0f64..10.0, pz in -10.0f64..10.0,
        scale in 0.02f64..2.0,
        opacity in 0.0f64..1.0,
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let params = QuantParams {
            bbox_min: Vec3::new(-10.0, -10.0, -10.0),
            bbox_max: Vec3::new(10.0, 10.0, 10.0),
            log_scale_min: (0.02f64).ln(),
            log_scale_max: (2.0f64).ln(),
        };
        let cb = train_codebook(&[vec![0.5, -0.25, 0.125]], 4, 0).unwrap();
        let g = Gaussian {
            id: 7,
            position: Vec3::new(px, py, pz),
            scale: Vec3::splat(scale),
            rotation: Quat::from_axis_angle(Vec3::new(1.0, 0.3, -0.2), angle),
            opacity,
            sh: vec![[0.5, -0.25, 0.125]],
        };
        let e1 = encode_gaussian(&g, Some(3), &params, &cb).unwrap();
        let (d, parent) = decode_gaussian(&e1, &params, &cb).unwrap();
        prop_assert_eq!(parent, Some(3));
        // decoded values re-encode to the identical records; the decode-side
        // quaternion renormalization may move a rotation component by at
        // most one quantization step
        let e2 = encode_gaussian(&d, parent, &params, &cb).unwrap();
        prop_assert_eq!(e1.position, e2.position);
        prop_assert_eq!(e1.scale, e2.scale);
        prop_assert_eq!(e1.opacity, e2.opacity);
        prop_assert_eq!(e1.sh_index, e2.sh_index);
        for (a, b) in e1.rotation.iter().zip(&e2.rotation) {
            prop_assert!((*a as i32 - *b as i32).abs() <= 1);
        }
        prop_assert!((d.rotation.norm() - 1.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&d.opacity));
    }

    #[test]
    fn merge_is_input_partition_invariant(ids in proptest::collection::btree_set(0u32..64, 0..40)) {
        // distributing the same sorted set across the four lists in any
        // contiguous split yields the same merged output
        let entries: Vec<ListEntry> = ids
            .iter()
            .map(|&id| ListEntry { depth: (id % 9) as f64, id, index: id })
            .collect();
        let mut sorted = entries.clone();
        sorted.sort_by(|a, b| (a.depth, a.id).partial_cmp(&(b.depth, b.id)).unwrap());
        let k = sorted.len();
        let splits = [k / 4, k / 2, 3 * k / 4];
        let a = &sorted[..splits[0]];
        let b = &sorted[splits[0]..splits[1]];
        let c = &sorted[splits[1]..splits[2]];
        let d = &sorted[splits[2]..];
        let m1 = merge_tile_lists([a, b, c, d]).unwrap();
        let m2 = merge_tile_lists([d, c, b, a]).unwrap();
        prop_assert_eq!(m1.len(), sorted.len());
        for (x, y) in m1.iter().zip(&m2) {
            prop_assert_eq!(x.id, y.id);
        }
    }

    #[test]
    fn delta_cut_message_roundtrips(ids in proptest::collection::btree_set(0u32..500_000, 0..200), round in 0u32..1000) {
        let msg = WireMessage::DeltaCut {
            round,
            full_cut: ids.iter().copied().collect(),
            payload: vec![0xAB; (round % 37) as usize],
        };
        let frame = msg.to_frame();
        let len = u32::from_le_bytes(frame[0..4].try_into().unwrap()) as usize;
        prop_assert_eq!(len + 5, frame.len());
        let decoded = WireMessage::decode(frame[4], &frame[5..]).unwrap();
        prop_assert_eq!(decoded, msg);
    }
}
