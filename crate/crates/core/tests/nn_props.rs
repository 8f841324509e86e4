use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svdres_core::lindecomp::{random_orthogonal, singular_values};
use svdres_core::nn::{gradcheck, AmplitudeActivation, Component, DiffTensor, Graph, Layer, SvaoLayer, SveoLayer};

fn orthogonal(n: usize, seed: u64) -> DiffTensor<f64> {
    let q = random_orthogonal(n, &mut ChaCha8Rng::seed_from_u64(seed));
    DiffTensor::from_fn(&[n, n], |i| q[(i / n, i % n)])
}

/// `(c·r², hw/r²)` matrix of item 0 of an unpixelshuffled tensor.
fn flattened(t: &DiffTensor<f64>) -> nalgebra::DMatrix<f64> {
    let (_, m, h, w) = t.dims4().unwrap();
    nalgebra::DMatrix::from_row_slice(m, h * w, &t.data()[..m * h * w])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn every_component_within_bound(seed in any::<u64>()) {
        for c in Component::ALL {
            let r = gradcheck(c, seed).unwrap();
            prop_assert!(r.passed, "{} seed {}: {:e} > {:e}", c.name(), seed, r.max_rel_error, r.bound);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sveo_preserves_feature_spectrum(seed in any::<u64>(), c in 1usize..5, hr in 1usize..6, wr in 1usize..6) {
        let r = 2;
        let layer = SveoLayer::new(r, orthogonal(c * r * r, seed), None).unwrap();
        let x = DiffTensor::<f64>::randn(&[1, c, hr * r, wr * r], 1.0, &mut ChaCha8Rng::seed_from_u64(!seed));
        let mut g = Graph::new();
        let vars = layer.bind_frozen(&mut g);
        let xi = g.input(x);
        let y = layer.forward(&mut g, &vars, xi).unwrap();
        let ux = g.unpixelshuffle(xi, r).unwrap();
        let uy = g.unpixelshuffle(y, r).unwrap();
        let before = singular_values(&flattened(g.value(ux))).unwrap();
        let after = singular_values(&flattened(g.value(uy))).unwrap();
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() <= 1e-5 * before[0].max(1.0));
        }
    }

    #[test]
    fn identity_svao_is_identity(seed in any::<u64>(), c in 1usize..4, h in 2usize..10, w in 2usize..10) {
        let layer = SvaoLayer::<f64>::identity(c, AmplitudeActivation::Identity);
        let x = DiffTensor::<f64>::randn(&[2, c, h, w], 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut g = Graph::new();
        let vars = layer.bind_frozen(&mut g);
        let xi = g.input(x.clone());
        let y = layer.forward(&mut g, &vars, xi).unwrap();
        let num: f64 = g.value(y).data().iter().zip(x.data()).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = x.data().iter().map(|v| v * v).sum();
        prop_assert!((num / den).sqrt() <= 1e-6);
    }

    #[test]
    fn orth_loss_zero_iff_orthogonal(seed in any::<u64>(), n in 2usize..20, eps in 1e-3f64..0.5) {
        let q = orthogonal(n, seed);
        let mut g = Graph::new();
        let w = g.input(q.clone());
        let l = g.loss_orth(w).unwrap();
        prop_assert!(g.scalar(l).unwrap() <= 1e-20);
        // Tilting one row towards another breaks orthogonality.
        let mut p = q.clone();
        for k in 0..n {
            let v = p.data()[n + k];
            p.data_mut()[k] += eps * v;
        }
        let w = g.input(p);
        let l = g.loss_orth(w).unwrap();
        prop_assert!(g.scalar(l).unwrap() > 1e-8);
    }

    #[test]
    fn passes_are_deterministic_and_grads_accumulate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DiffTensor::<f64>::randn(&[1, 2, 6, 6], 1.0, &mut rng);
        let layer = SveoLayer::<f64>::orthogonal(2, 2, true, &mut rng);
        let run = || {
            let mut g = Graph::new();
            let vars = layer.bind(&mut g);
            let xi = g.param(x.clone());
            let y = layer.forward(&mut g, &vars, xi).unwrap();
            let s = g.charbonnier(y, xi, 1e-3).unwrap();
            g.backward(s).unwrap();
            let once = g.grad(vars[0]).unwrap().to_vec();
            g.backward(s).unwrap();
            let twice = g.grad(vars[0]).unwrap().to_vec();
            (g.scalar(s).unwrap(), once, twice)
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.0.to_bits(), b.0.to_bits());
        prop_assert_eq!(&a.1, &b.1);
        for (o, t) in a.1.iter().zip(&a.2) {
            prop_assert!((2.0 * o - t).abs() <= 1e-12 * o.abs().max(1.0));
        }
    }
}
