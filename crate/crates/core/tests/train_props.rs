use proptest::prelude::*;
use svdres_core::train::{
    bottleneck_block, cosine_lr, sveo_blocks, Checkpoint, ModelConfig, Toggles, ToyBackbone, TrainConfig, WorkingFlow,
};

fn toggles() -> impl Strategy<Value = Toggles> {
    (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(sveo, svao, l_orth, l_dec)| Toggles {
        sveo,
        svao,
        l_orth,
        l_dec,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn checkpoint_round_trip_is_idempotent(
        depth in 1usize..5,
        width in 1usize..6,
        r in 1usize..4,
        t in toggles(),
        flow in prop::sample::select(vec![WorkingFlow::Cascaded, WorkingFlow::Parallel, WorkingFlow::CascadedParallel]),
        seed in any::<u64>(),
        step in any::<u32>(),
    ) {
        let cfg = ModelConfig { depth, width, r, flow, ..ModelConfig::default() };
        let model = ToyBackbone::<f32>::new(&cfg, t, seed).unwrap();
        let ck = Checkpoint::from_model(&model, step as usize);
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        prop_assert_eq!(back.to_model().unwrap(), model);
    }

    #[test]
    fn corrupting_any_payload_byte_is_detected(seed in any::<u64>(), pick in any::<prop::sample::Index>(), bit in 0u8..8) {
        let cfg = ModelConfig { depth: 1, width: 2, ..ModelConfig::default() };
        let model = ToyBackbone::<f32>::new(&cfg, Toggles::all(), seed).unwrap();
        let mut bytes = Checkpoint::from_model(&model, 0).to_bytes().unwrap();
        let mlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let start = 12 + mlen;
        let i = start + pick.index(bytes.len() - start);
        bytes[i] ^= 1 << bit;
        prop_assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    #[test]
    fn cosine_schedule(base in 1e-6f64..1.0, steps in 1usize..5000) {
        prop_assert_eq!(cosine_lr(base, 0, steps), base);
        prop_assert!(cosine_lr(base, steps, steps).abs() <= 1e-12);
        let mut prev = f64::INFINITY;
        for s in 0..=steps.min(600) {
            let lr = cosine_lr(base, s * steps / steps.min(600), steps);
            prop_assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn block_layout(depth in 1usize..40) {
        let s = sveo_blocks(depth);
        prop_assert_eq!(s.len(), depth.div_ceil(2));
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(*s.last().unwrap() < depth);
        prop_assert!(s.contains(&bottleneck_block(depth).unwrap()));
        let model = ToyBackbone::<f32>::new(&ModelConfig { depth, width: 2, ..ModelConfig::default() }, Toggles::all(), 0).unwrap();
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        prop_assert_eq!(names.iter().filter(|n| n.ends_with("sveo.weight")).count(), s.len());
        prop_assert_eq!(names.iter().filter(|n| n.starts_with("svao.")).count(), 1);
    }

    #[test]
    fn patch_must_be_divisible_by_r(patch in 8usize..64, r in 1usize..5) {
        let cfg = TrainConfig { patch, model: ModelConfig { r, ..ModelConfig::default() }, ..TrainConfig::default() };
        prop_assert_eq!(cfg.validate().is_ok(), patch % r == 0);
    }
}
