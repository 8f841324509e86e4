use proptest::prelude::*;
use svdres_core::degradelab::{analyze_pair, classify};
use svdres_core::imagestack::{apply_degradation, synthesize_clean, Degradation, DegradationSpec, Image};

fn scaled(img: &Image, s: f32) -> Image {
    let (h, w, c) = img.shape();
    Image::new(h, w, c, img.data().iter().map(|v| v * s).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_moves_only_singular_values(s in 0.05f32..=1.0, scene in any::<u64>()) {
        let clean = synthesize_clean(24, 20, 3, scene).unwrap();
        let st = analyze_pair(&clean, &scaled(&clean, s)).unwrap();
        // U Σ_s Vᵀ = s·X, so the error is 1 − s.
        prop_assert!((st.err_vec_swap - (1.0 - s as f64)).abs() <= 1e-6, "{} vs {}", st.err_vec_swap, 1.0 - s);
        prop_assert!(st.err_val_swap <= 1e-6);
    }

    #[test]
    fn stats_are_well_formed(seed in any::<u64>(), sigma in 5.0f64..60.0) {
        let clean = synthesize_clean(20, 20, 3, seed).unwrap();
        let deg = apply_degradation(&clean, &DegradationSpec::new(Degradation::noise(sigma), seed)).unwrap();
        let st = analyze_pair(&clean, &deg).unwrap();
        prop_assert!(st.err_vec_swap >= 0.0 && st.err_val_swap >= 0.0);
        for q in [st.sv_quartiles_clean, st.sv_quartiles_degraded] {
            let a = q.as_array();
            prop_assert!(a.windows(2).all(|w| w[0] <= w[1]));
        }
        for d in st.order_diff.iter().flatten() {
            prop_assert!((0.0..=2.0).contains(d));
        }
    }

    #[test]
    fn classify_invariant_to_common_scaling(seed in any::<u64>(), k in 0.2f32..=1.0) {
        let clean = synthesize_clean(20, 20, 3, seed).unwrap();
        let deg = apply_degradation(&clean, &DegradationSpec::new(Degradation::haze(0.5, 0.8), seed)).unwrap();
        let a = classify(&clean, &deg).unwrap();
        let b = classify(&scaled(&clean, k), &scaled(&deg, k)).unwrap();
        prop_assert_eq!(a.label, b.label);
        prop_assert!((a.margin - b.margin).abs() <= 1e-5);
    }
}
