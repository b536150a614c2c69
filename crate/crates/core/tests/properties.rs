//! Randomized invariants across the tensor, data, attention and model layers.

mod common;

use csta::attention::{apply_attention, AttentionMode, AttentionParams};
use csta::model::ModelParams;
use csta::skeleton::{
    augment, crop_window, motion_stream, parse_canonical_json, stream_rng, write_canonical_json, AugmentConfig,
    Dataset, Frame, Protocol, SeedRng, SkeletonSequence, Split, JOINTS,
};
use csta::tensor::{Tape, Tensor};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random(shape: &[usize], scale: f64, rng: &mut SeedRng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

fn sequence(len: usize, rng: &mut SeedRng) -> SkeletonSequence {
    let frames = (0..len)
        .map(|_| {
            let mut f: Frame = [[0.0; 3]; JOINTS];
            f.iter_mut().flatten().for_each(|v| *v = rng.random_range(-2.0..2.0));
            f
        })
        .collect();
    SkeletonSequence::new(frames, 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outer_product_has_rank_one(t in 1usize..12, n in 1usize..12, seed: u64) {
        let mut rng = stream_rng(seed, 0);
        let mut tape = Tape::new();
        let u = tape.leaf(random(&[t], 5.0, &mut rng), false);
        let v = tape.leaf(random(&[n], 5.0, &mut rng), false);
        let m = tape.outer(u, v).unwrap();
        let m = tape.value(m);
        let scale = m.data().iter().fold(0.0f64, |a, x| a.max(x.abs())).powi(2).max(f64::MIN_POSITIVE);
        for i in 0..t {
            for k in i + 1..t {
                for j in 0..n {
                    for l in j + 1..n {
                        let minor = m.get(&[i, j]) * m.get(&[k, l]) - m.get(&[i, l]) * m.get(&[k, j]);
                        prop_assert!(minor.abs() <= 1e-12 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn reshape_and_permute_round_trip(a in 1usize..5, b in 1usize..5, c in 1usize..5, seed: u64) {
        let mut rng = stream_rng(seed, 0);
        let x = random(&[a, b, c], 1e3, &mut rng);
        let mut axes = [0usize, 1, 2];
        axes.shuffle(&mut rng);
        let mut inverse = [0usize; 3];
        for (i, &ax) in axes.iter().enumerate() {
            inverse[ax] = i;
        }
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone(), false);
        let p = tape.permute(v, &axes).unwrap();
        let mut sorted_in = x.data().to_vec();
        let mut sorted_out = tape.value(p).data().to_vec();
        sorted_in.sort_by(f64::total_cmp);
        sorted_out.sort_by(f64::total_cmp);
        prop_assert_eq!(sorted_in, sorted_out);
        let back = tape.permute(p, &inverse).unwrap();
        prop_assert_eq!(tape.value(back), &x);
        let flat = tape.reshape(v, &[a * b * c]).unwrap();
        let restored = tape.reshape(flat, &[a, b, c]).unwrap();
        prop_assert_eq!(tape.value(restored), &x);
    }

    #[test]
    fn attention_weights_stay_in_the_open_unit_interval(t in 2usize..10, n in 1usize..10, seed: u64) {
        let mut rng = stream_rng(seed, 0);
        let mut params = AttentionParams::init(t, n, &mut rng);
        params.spatial_bias = random(&[n], 3.0, &mut rng);
        params.temporal_bias = random(&[t], 3.0, &mut rng);
        let x = random(&[t, n, 3], 3.0, &mut rng);
        let out = params.forward(&x, AttentionMode::Full).unwrap();
        for w in out.s_att.data().iter().chain(out.t_att.data()).chain(out.map.data()) {
            prop_assert!(*w > 0.0 && *w < 1.0);
        }
    }

    #[test]
    fn all_ones_map_and_bypass_are_identities(t in 2usize..10, n in 1usize..10, seed: u64) {
        let mut rng = stream_rng(seed, 0);
        let x = random(&[t, n, 3], 1e3, &mut rng);
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone(), false);
        let ones = tape.constant(Tensor::ones(&[t, n]));
        let y = apply_attention(&mut tape, xv, ones).unwrap();
        prop_assert_eq!(tape.value(y), &x);
        let params = AttentionParams::init(t, n, &mut rng);
        let out = params.forward(&x, AttentionMode::WithoutST).unwrap();
        prop_assert_eq!(&out.applied, &x);
        prop_assert!(out.map.data().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn spatial_weights_follow_a_joint_permutation(t in 2usize..8, n in 2usize..10, seed: u64) {
        let mut rng = stream_rng(seed, 0);
        let mut params = AttentionParams::init(t, n, &mut rng);
        params.spatial_bias = random(&[n], 1.0, &mut rng);
        let x = random(&[t, n, 3], 2.0, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut permuted = params.clone();
        permuted.spatial_bias = Tensor::vector(perm.iter().map(|&j| params.spatial_bias.data()[j]).collect());
        let px = Tensor::from_fn(&[t, n, 3], |i| {
            let (f, j, c) = (i / (3 * n), (i / 3) % n, i % 3);
            x.get(&[f, perm[j], c])
        });
        let base = params.forward(&x, AttentionMode::WithoutT).unwrap();
        let moved = permuted.forward(&px, AttentionMode::WithoutT).unwrap();
        for (j, &src) in perm.iter().enumerate() {
            prop_assert_eq!(moved.s_att.data()[j], base.s_att.data()[src]);
        }
    }

    #[test]
    fn motion_ignores_translation(t in 2usize..12, seed: u64) {
        let mut rng = stream_rng(seed, 0);
        let x = random(&[t, JOINTS, 3], 2.0, &mut rng);
        let offset: [f64; 3] = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let shifted = Tensor::from_fn(&[t, JOINTS, 3], |i| x.data()[i] + offset[i % 3]);
        let a = motion_stream(&x).unwrap();
        let b = motion_stream(&shifted).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()) + 1e-12);
        }
        let last = (t - 1) * JOINTS * 3;
        prop_assert!(a.data()[last..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn crop_windows_stay_inside_the_sequence(len in 1usize..300, lo in 0.05f64..1.0, width in 0.0f64..1.0, seed: u64) {
        let hi = lo + (1.0 - lo) * width;
        let mut rng = stream_rng(seed, 0);
        for _ in 0..50 {
            let (start, crop) = crop_window(len, (lo, hi), &mut rng).unwrap();
            prop_assert!(crop >= 1 && start + crop <= len);
            let min = ((lo * len as f64).round() as usize).max(1);
            let max = ((hi * len as f64).round() as usize).clamp(1, len);
            prop_assert!(crop >= min && crop <= max, "len {} crop {} in [{}, {}]", len, crop, min, max);
        }
    }

    #[test]
    fn augmentation_gives_eight_ordered_clips(len in 1usize..90, seed: u64) {
        // Frame k holds the value k everywhere, so clip values reveal frame indices.
        let frames = (0..len).map(|k| [[k as f64; 3]; JOINTS]).collect();
        let seq = SkeletonSequence::new(frames, 0);
        let clips = augment(std::slice::from_ref(&seq), &AugmentConfig::default(), seed).unwrap();
        prop_assert_eq!(clips.len(), 8);
        for clip in &clips {
            prop_assert_eq!(clip.position.shape(), &[30, JOINTS, 3]);
            let order: Vec<f64> = clip.position.data().chunks(JOINTS * 3).map(|f| f[0]).collect();
            prop_assert!(order.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(order.iter().all(|&k| k >= 0.0 && k < len as f64));
        }
        for clip in &clips[..4] {
            let order: Vec<f64> = clip.position.data().chunks(JOINTS * 3).map(|f| f[0]).collect();
            if len >= 30 {
                prop_assert!(order.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn canonical_json_round_trips_exactly(count in 1usize..5, seed: u64) {
        let mut rng = stream_rng(seed, 0);
        let samples: Vec<SkeletonSequence> = (0..count)
            .map(|i| {
                let mut s = sequence(rng.random_range(1..6), &mut rng);
                s.label = i % 3;
                s.subject_id = rng.random_range(0..40);
                s.view_id = rng.random_range(1..4);
                s
            })
            .collect();
        let dataset = Dataset {
            class_names: vec!["a".into(), "b".into(), "c".into()],
            samples,
            split: Some(Split { protocol: Protocol::CrossView, train_ids: vec![2, 3] }),
        };
        let text = write_canonical_json(&dataset).unwrap();
        let parsed = parse_canonical_json(&text).unwrap();
        prop_assert_eq!(&parsed, &dataset);
        prop_assert_eq!(write_canonical_json(&parsed).unwrap(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn logits_are_finite_and_backward_is_deterministic(mode_index in 0usize..4, scale in 0.1f64..20.0, seed: u64) {
        let mut config = common::small_config(3);
        config.mode = AttentionMode::ALL[mode_index];
        let params = ModelParams::init(&config, &mut stream_rng(seed, 1)).unwrap();
        let mut rng = stream_rng(seed, 2);
        let pos = random(&[config.frames, JOINTS, 3], scale, &mut rng);
        let sample = csta::skeleton::FixedSample::from_position(pos, 1).unwrap();
        let first = params.loss_and_grads(&sample).unwrap();
        let second = params.loss_and_grads(&sample).unwrap();
        prop_assert!(first.logits.is_finite());
        prop_assert_eq!(first.loss.to_bits(), second.loss.to_bits());
        prop_assert_eq!(first.grads, second.grads);
    }

    #[test]
    fn bypassed_attention_parameters_do_not_touch_logits(seed: u64) {
        let mut config = common::small_config(3);
        config.mode = AttentionMode::WithoutST;
        let params = ModelParams::init(&config, &mut stream_rng(seed, 1)).unwrap();
        let mut other = params.clone();
        let mut rng = stream_rng(seed, 3);
        for stream in [&mut other.position, &mut other.motion] {
            stream.attention = AttentionParams::init(config.frames, JOINTS, &mut rng);
            stream.attention.spatial_bias = random(&[JOINTS], 4.0, &mut rng);
        }
        let sample = common::random_samples(1, config.frames, 3, seed).remove(0);
        prop_assert_eq!(params.logits(&sample).unwrap(), other.logits(&sample).unwrap());
        let grads = params.loss_and_grads(&sample).unwrap().grads;
        let names = params.named();
        for (g, (name, _)) in grads.iter().zip(&names) {
            if name.contains("attention") {
                prop_assert!(g.iter().all(|&v| v == 0.0), "{}", name);
            }
        }
    }
}
