//! Randomized checks of invariants that must hold for every input.

mod common;

use cae_anomaly::cae::{decode_model as decode_cae, encode_model as encode_cae, init_model, CaePreset, Tensor4};
use cae_anomaly::dimred::{calibrate_sigma, pca_fit};
use cae_anomaly::image::{decode_pnm, encode_pnm, quantize, Image};
use cae_anomaly::metrics::{l2_error, ssim, SsimParams};
use cae_anomaly::ocsvm::{decode_model as decode_svm, encode_model as encode_svm, ocsvm_fit, Gamma, OcSvmConfig};
use cae_anomaly::synth::{largest_remainder, plan_manifest, DefectKind, Split, SplitCounts};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn unit_image(max_side: usize, min_side: usize) -> impl Strategy<Value = Image> {
    (min_side..=max_side, min_side..=max_side, prop::sample::select(vec![1usize, 3])).prop_flat_map(|(h, w, c)| {
        prop::collection::vec(0.0f64..=1.0, h * w * c).prop_map(move |px| Image::new(h, w, c, px).unwrap())
    })
}

fn rows(max_n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, k), 5..=max_n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quantized_images_round_trip(img in unit_image(9, 1)) {
        let q = Image::from_fn(img.height(), img.width(), img.channels(), |r, c, k| quantize(img.get(r, c, k)) as f64 / 255.0);
        let back = decode_pnm(&encode_pnm(&q)).unwrap();
        prop_assert!(back.pixels().iter().zip(q.pixels()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back, q);
    }

    #[test]
    fn error_metrics_axioms(a in unit_image(14, 11), seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let b = Image::from_fn(a.height(), a.width(), a.channels(), |_, _, _| rand::Rng::random::<f64>(&mut r));
        let p = SsimParams::default();
        prop_assert_eq!(ssim(&a, &a, &p).unwrap().mean, 1.0);
        prop_assert_eq!(l2_error(&a, &a).unwrap(), 0.0);
        let ab = ssim(&a, &b, &p).unwrap();
        let ba = ssim(&b, &a, &p).unwrap();
        prop_assert!((ab.mean - ba.mean).abs() <= 1e-12);
        prop_assert!(ab.map.iter().all(|v| (-1.0..=1.0).contains(v)));
        prop_assert!(l2_error(&a, &b).unwrap() >= 0.0);
    }

    #[test]
    fn pca_components_orthonormal_and_sorted(x in rows(30, 4)) {
        let n = x.len();
        let m = DMatrix::from_fn(n, 4, |i, j| x[i][j]);
        let k = 4.min(n - 1);
        let Ok(model) = pca_fit(&m, k) else { return Ok(()) };
        let gram = &model.components * model.components.transpose();
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)] - want).abs() <= 1e-8);
            }
        }
        prop_assert!(model.explained_variances.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(model.explained_variances.iter().sum::<f64>() <= model.total_variance * (1.0 + 1e-12));
    }

    #[test]
    fn calibration_reaches_target(d in prop::collection::vec(0.01f64..50.0, 4..40), frac in 0.05f64..0.95) {
        let m = d.len() as f64;
        let target = 1.0 + frac * (m - 1.0);
        let c = calibrate_sigma(&d, target).unwrap();
        prop_assert!((c.perplexity - target).abs() <= 1e-5, "{} vs {}", c.perplexity, target);
        prop_assert!((c.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn ocsvm_feasible_nu_property_and_deterministic(x in rows(40, 2), frac in 0.0f64..=1.0) {
        let n = x.len();
        // smallest feasible nu is 1/n
        let nu = (1.0 + frac * (n as f64 - 1.0)) / n as f64;
        let cfg = OcSvmConfig { nu, gamma: Gamma::Value(0.5), ..OcSvmConfig::default() };
        let model = ocsvm_fit(&x, &cfg).unwrap();
        let c = 1.0 / (nu * n as f64);
        prop_assert!((model.alphas.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(model.alphas.iter().all(|&a| a > 0.0 && a <= c + 1e-9));
        if model.converged {
            // points on the margin sit within the KKT tolerance of zero
            let outside = x.iter().filter(|p| model.decision(p).unwrap() < -cfg.kkt_tolerance).count() as f64 / n as f64;
            let svs = model.alphas.len() as f64 / n as f64;
            prop_assert!(outside <= nu + 1e-9, "margin errors {} > nu {}", outside, nu);
            prop_assert!(nu <= svs + 1e-9, "nu {} > support vectors {}", nu, svs);
        }
        prop_assert_eq!(ocsvm_fit(&x, &cfg).unwrap(), model.clone());
        let back = decode_svm(&encode_svm(&model)).unwrap();
        for p in &x {
            prop_assert_eq!(back.decision(p).unwrap().to_bits(), model.decision(p).unwrap().to_bits());
        }
    }

    #[test]
    fn label_counts_follow_ratio(total in 0usize..500, a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.01f64..5.0) {
        let counts = largest_remainder(total, [a, b, c]).unwrap();
        prop_assert_eq!(counts.iter().sum::<usize>(), total);
        let sum = a + b + c;
        for (n, r) in counts.iter().zip([a, b, c]) {
            prop_assert!((*n as f64 - total as f64 * r / sum).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn nok_only_in_test(train in 1usize..20, val in 0usize..20, ok in 0usize..10, nok in 1usize..30, seed in any::<u64>()) {
        let m = plan_manifest(SplitCounts { train, val, test_ok: ok, test_nok: nok }, [0.4, 0.3, 0.3], seed).unwrap();
        prop_assert!(m.records.iter().all(|r| r.label == DefectKind::Ok || r.split == Split::Test));
        prop_assert_eq!(m.records.len(), train + val + ok + nok);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn cae_file_round_trip_keeps_outputs(seed in any::<u64>(), preset in prop::sample::select(CaePreset::ALL.to_vec())) {
        let model = init_model(preset, 16, seed).unwrap();
        let back = decode_cae(&encode_cae(&model)).unwrap();
        let mut r = common::rng(seed);
        let batch = Tensor4::<f32>::from_vec([2, 3, 16, 16], (0..2 * 3 * 256).map(|_| rand::Rng::random::<f32>(&mut r)).collect()).unwrap();
        let (a, b) = (model.reconstruct(&batch).unwrap(), back.reconstruct(&batch).unwrap());
        prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert!(a.data().iter().all(|v| v.is_finite()));
    }
}
