use proptest::prelude::*;
use svdres_core::imagestack::{apply_degradation, synthesize_clean, BlurParams, Degradation, DegradationSpec, Image};

fn degradation() -> impl Strategy<Value = Degradation> {
    prop_oneof![
        Just(Degradation::rain()),
        (1.0f64..100.0).prop_map(Degradation::noise),
        (0.3f64..4.0).prop_map(Degradation::gaussian_blur),
        (3.0f64..9.0, 0.0f64..180.0)
            .prop_map(|(length, angle_deg)| Degradation::Blur(BlurParams::Motion { length, angle_deg })),
        (0.05f64..=1.0, 0.0f64..=1.0).prop_map(|(t, a)| Degradation::haze(t, a)),
        (0.05f64..=1.0, 0.5f64..2.0).prop_map(|(s, g)| Degradation::low_light(s, g)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generators_are_deterministic_and_clamped(
        d in degradation(),
        seed in any::<u64>(),
        scene in any::<u64>(),
        h in 8usize..40,
        w in 8usize..40,
    ) {
        let clean = synthesize_clean(h, w, 3, scene).unwrap();
        let spec = DegradationSpec::new(d, seed);
        let a = apply_degradation(&clean, &spec).unwrap();
        let b = apply_degradation(&clean, &spec).unwrap();
        prop_assert_eq!(a.data(), b.data());
        prop_assert!(a.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        prop_assert_eq!(a.shape(), clean.shape());
    }

    #[test]
    fn unit_gamma_low_light_is_exact_multiplication(s in 0.01f64..=1.0, scene in any::<u64>()) {
        let clean = synthesize_clean(16, 12, 3, scene).unwrap();
        let out = apply_degradation(&clean, &DegradationSpec::new(Degradation::low_light(s, 1.0), 0)).unwrap();
        for (o, c) in out.data().iter().zip(clean.data()) {
            prop_assert_eq!(*o, (*c as f64 * s) as f32);
        }
    }

    #[test]
    fn png_round_trip_is_lossless_on_8bit_values(h in 1usize..20, w in 1usize..20, c in prop::sample::select(vec![1usize, 3]), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..h * w * c).map(|_| rng.random_range(0u8..=255) as f32 / 255.0).collect();
        let img = Image::new(h, w, c, data).unwrap();
        let bytes = svdres_core::imagestack::encode_png(&img).unwrap();
        let back = svdres_core::imagestack::decode_png(&bytes).unwrap();
        prop_assert_eq!(back, img);
    }
}

#[test]
fn undersized_images_rejected_by_generators() {
    let tiny = Image::filled(7, 16, 3, 0.5).unwrap();
    assert!(apply_degradation(&tiny, &DegradationSpec::new(Degradation::noise(10.0), 0)).is_err());
}
