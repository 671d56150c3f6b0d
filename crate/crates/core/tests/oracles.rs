//! Library results checked against independent brute-force oracles.

mod common;

use std::collections::VecDeque;

use cae_anomaly::cae::{corrupt_batch, gradient_check_probed, init_model, numeric_gradient, CaePreset, Tensor4};
use cae_anomaly::dimred::{calibrate_sigma, pca_fit};
use cae_anomaly::image::{crop_bounds, Image, DEFAULT_CROP_THRESHOLD};
use cae_anomaly::metrics::{l2_error, ssim, SsimParams};
use cae_anomaly::ocsvm::{gamma_scale, ocsvm_fit, Gamma, OcSvmConfig};
use cae_anomaly::synth::{synth_sample, DefectKind, SynthParams};
use nalgebra::DMatrix;
use rand::Rng;

fn luma(img: &Image, r: usize, c: usize) -> f64 {
    let (p, ch) = (img.pixels(), img.channels());
    let i = (r * img.width() + c) * ch;
    if ch == 1 {
        p[i]
    } else {
        ((299.0 * p[i] + 587.0 * p[i + 1] + 114.0 * p[i + 2]) / 1000.0).clamp(0.0, 1.0)
    }
}

fn random_image(h: usize, w: usize, seed: u64) -> Image {
    let mut r = common::rng(seed);
    Image::from_fn(h, w, 3, |_, _, _| r.random::<f64>())
}

fn params(size: usize) -> SynthParams {
    SynthParams { image_size: size, ..SynthParams::default() }
}

#[test]
fn crop_bounds_of_seeded_biscuit_match_pixel_scan() {
    let img = synth_sample(DefectKind::Ok, 7, &params(64)).unwrap();
    let fg: Vec<(usize, usize)> =
        (0..64).flat_map(|r| (0..64).map(move |c| (r, c))).filter(|&(r, c)| luma(&img, r, c) > DEFAULT_CROP_THRESHOLD).collect();
    assert!(!fg.is_empty());
    let top = fg.iter().map(|p| p.0).min().unwrap();
    let bottom = fg.iter().map(|p| p.0).max().unwrap();
    let left = fg.iter().map(|p| p.1).min().unwrap();
    let right = fg.iter().map(|p| p.1).max().unwrap();
    assert_eq!(crop_bounds(&img, DEFAULT_CROP_THRESHOLD), Some((top, left, bottom, right)));
    // the biscuit sits inside the frame with some background around it
    assert!(top > 0 && left > 0 && bottom < 63 && right < 63);
}

#[test]
fn color_defect_changes_one_connected_region() {
    for seed in [3u64, 7, 11, 19] {
        let p = params(64);
        let ok = synth_sample(DefectKind::Ok, seed, &p).unwrap();
        let bad = synth_sample(DefectKind::ColorDefect, seed, &p).unwrap();
        let n = 64;
        let changed: Vec<bool> = (0..n * n).map(|i| (0..3).any(|k| ok.pixels()[i * 3 + k] != bad.pixels()[i * 3 + k])).collect();
        let total = changed.iter().filter(|&&c| c).count();
        assert!(total > 0, "seed {seed}: no pixel changed");
        let start = changed.iter().position(|&c| c).unwrap();
        let mut seen = vec![false; n * n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut reached = 0;
        while let Some(i) = queue.pop_front() {
            reached += 1;
            let (r, c) = ((i / n) as isize, (i % n) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= n as isize || cc >= n as isize {
                        continue;
                    }
                    let j = rr as usize * n + cc as usize;
                    if changed[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        assert_eq!(reached, total, "seed {seed}: changed pixels form more than one region");
    }
}

#[test]
fn not_complete_has_less_foreground_than_ok() {
    for seed in [1u64, 7, 42] {
        let p = params(64);
        let count = |img: &Image| (0..64).flat_map(|r| (0..64).map(move |c| (r, c))).filter(|&(r, c)| luma(img, r, c) > DEFAULT_CROP_THRESHOLD).count();
        let ok = count(&synth_sample(DefectKind::Ok, seed, &p).unwrap());
        let nc = count(&synth_sample(DefectKind::NotComplete, seed, &p).unwrap());
        assert!(nc < ok, "seed {seed}: {nc} >= {ok}");
    }
}

#[test]
fn corruption_positions_are_uniform() {
    let shape = [1, 1, 4, 5];
    let ones = Tensor4::<f32>::from_vec(shape, vec![1.0; 20]).unwrap();
    let trials = 10_000u64;
    let mut hist = [0u64; 20];
    for t in 0..trials {
        let out = corrupt_batch(&ones, 0.25, t);
        let zeros: Vec<usize> = out.data().iter().enumerate().filter(|(_, &v)| v == 0.0).map(|(i, _)| i).collect();
        assert_eq!(zeros.len(), 5);
        zeros.iter().for_each(|&i| hist[i] += 1);
    }
    let expected = (trials * 5) as f64 / 20.0;
    let chi2: f64 = hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let df = 19.0f64;
    assert!(chi2 < df + 3.0 * (2.0 * df).sqrt(), "chi-square {chi2} for {hist:?}");
}

#[test]
fn mvtec_code_has_128_features() {
    let model = init_model(CaePreset::Mvtec, 64, 1).unwrap();
    let batch = Tensor4::<f32>::from_vec([2, 3, 64, 64], vec![0.5; 2 * 3 * 64 * 64]).unwrap();
    let code = model.encode(&batch).unwrap();
    assert_eq!(code.batch(), 2);
    assert_eq!(code.sample_len(), 128);
}

#[test]
fn small_bae2_gradients_match_finite_differences() {
    let model = init_model(CaePreset::Bae2, 8, 5).unwrap().cast::<f64>();
    let mut r = common::rng(2);
    let batch = Tensor4::<f64>::from_vec([2, 3, 8, 8], (0..2 * 3 * 64).map(|_| r.random::<f64>()).collect()).unwrap();
    let report = gradient_check_probed(&model, &batch, 1e-5, 32).unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn finite_difference_error_shrinks_quadratically() {
    let model = init_model(CaePreset::Bae2, 8, 5).unwrap().cast::<f64>();
    let mut r = common::rng(4);
    let batch = Tensor4::<f64>::from_vec([1, 3, 8, 8], (0..3 * 64).map(|_| r.random::<f64>()).collect()).unwrap();
    // output bias: the loss is smooth in it (sigmoid then squared error)
    let idx = model.conv_ranges().last().unwrap().1.start;
    let eps = 2e-2;
    let g = |e: f64| numeric_gradient(&model, &batch, idx, e).unwrap();
    let (g1, g2, g4) = (g(eps), g(2.0 * eps), g(4.0 * eps));
    let ratio = (g4 - g2) / (g2 - g1);
    assert!((ratio - 4.0).abs() < 0.5, "difference ratio {ratio}");
}

#[test]
fn l2_matches_summation_oracle() {
    let (a, b) = (random_image(13, 9, 1), random_image(13, 9, 2));
    let mut sum = 0.0;
    for r in 0..13 {
        for c in 0..9 {
            for k in 0..3 {
                sum += (a.get(r, c, k) - b.get(r, c, k)).powi(2);
            }
        }
    }
    let want = sum / (13.0 * 9.0 * 3.0);
    let got = l2_error(&a, &b).unwrap();
    assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
}

/// Direct 2-D windowed SSIM with symmetric padding.
fn ssim_oracle(x: &Image, y: &Image, p: &SsimParams) -> f64 {
    let (h, w) = (x.height() as isize, x.width() as isize);
    let r = (p.window_size / 2) as isize;
    let g: Vec<f64> = (-r..=r).map(|d| (-((d * d) as f64) / (2.0 * p.gaussian_sigma * p.gaussian_sigma)).exp()).collect();
    let norm: f64 = g.iter().sum::<f64>().powi(2);
    let refl = |i: isize, n: isize| {
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -1 - i } else { 2 * n - 1 - i };
        }
        i as usize
    };
    let mut total = 0.0;
    for row in 0..h {
        for col in 0..w {
            let mut pixel = 0.0;
            for k in 0..x.channels() {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dr in -r..=r {
                    for dc in -r..=r {
                        let wgt = g[(dr + r) as usize] * g[(dc + r) as usize] / norm;
                        let (rr, cc) = (refl(row + dr, h), refl(col + dc, w));
                        let (a, b) = (x.get(rr, cc, k), y.get(rr, cc, k));
                        mx += wgt * a;
                        my += wgt * b;
                        sxx += wgt * a * a;
                        syy += wgt * b * b;
                        sxy += wgt * a * b;
                    }
                }
                let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                let s = (2.0 * mx * my + p.c1()) * (2.0 * cov + p.c2()) / ((mx * mx + my * my + p.c1()) * (vx + vy + p.c2()));
                pixel += s.clamp(-1.0, 1.0);
            }
            total += pixel / x.channels() as f64;
        }
    }
    total / (h * w) as f64
}

#[test]
fn ssim_matches_direct_window_oracle() {
    let p = SsimParams::default();
    let a = random_image(16, 14, 3);
    let b = Image::from_fn(16, 14, 3, |r, c, k| (0.7 * a.get(r, c, k) + 0.3 * ((r * 14 + c + k) % 7) as f64 / 6.0).clamp(0.0, 1.0));
    let want = ssim_oracle(&a, &b, &p);
    let got = ssim(&a, &b, &p).unwrap().mean;
    assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
}

#[test]
fn pca_matches_jacobi_oracle() {
    let rows = common::gaussian_rows(20, 6, 11);
    // mix the columns so the spectrum is spread out
    let x = DMatrix::from_fn(20, 6, |i, j| (0..=j).map(|t| rows[i][t] * (1.0 + t as f64)).sum::<f64>());
    let model = pca_fit(&x, 6).unwrap();
    let means: Vec<f64> = (0..6).map(|j| (0..20).map(|i| x[(i, j)]).sum::<f64>() / 20.0).collect();
    let mut cov = vec![0.0; 36];
    for a in 0..6 {
        for b in 0..6 {
            cov[a * 6 + b] = (0..20).map(|i| (x[(i, a)] - means[a]) * (x[(i, b)] - means[b])).sum::<f64>() / 19.0;
        }
    }
    let (values, vectors) = common::jacobi_eigen(&cov, 6);
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    for (rank, &i) in order.iter().enumerate() {
        let got = model.explained_variances[rank];
        assert!((got - values[i]).abs() <= 1e-9 * values[i].max(1.0), "variance {rank}: {got} vs {}", values[i]);
        let dot: f64 = (0..6).map(|j| model.components[(rank, j)] * vectors[j * 6 + i]).sum();
        assert!((dot.abs() - 1.0).abs() <= 1e-9, "component {rank}: |dot| = {}", dot.abs());
    }
}

#[test]
fn sigma_calibration_matches_grid_scan() {
    let d = [1.0f64, 4.0];
    let perplexity = |sigma: f64| {
        let w: Vec<f64> = d.iter().map(|v| (-v / (2.0 * sigma * sigma)).exp()).collect();
        let z: f64 = w.iter().sum();
        let h: f64 = w.iter().map(|v| v / z).filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum();
        2f64.powf(h)
    };
    let scan = |lo: f64, hi: f64, steps: usize| {
        (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).min_by(|a, b| (perplexity(*a) - 1.5).abs().total_cmp(&(perplexity(*b) - 1.5).abs())).unwrap()
    };
    let coarse = scan(0.05, 10.0, 100_000);
    let fine = scan(coarse - 1e-3, coarse + 1e-3, 100_000);
    let got = calibrate_sigma(&d, 1.5).unwrap();
    assert!((got.sigma - fine).abs() < 1e-4, "{} vs {fine}", got.sigma);
    assert!((got.perplexity - 1.5).abs() < 1e-5);
}

#[test]
fn gamma_scale_matches_two_pass_variance() {
    let x = common::gaussian_rows(50, 2, 21).into_iter().map(|r| vec![3.0 + r[0], -1.0 + 2.0 * r[1]]).collect::<Vec<_>>();
    let mut mean = 0.0;
    for row in &x {
        for v in row {
            mean += v;
        }
    }
    mean /= 100.0;
    let mut var = 0.0;
    for row in &x {
        for v in row {
            var += (v - mean) * (v - mean);
        }
    }
    var /= 100.0;
    let want = 1.0 / (2.0 * var);
    let got = gamma_scale(&x).unwrap();
    assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
}

fn svm_config(nu: f64, gamma: f64) -> OcSvmConfig {
    OcSvmConfig { nu, gamma: Gamma::Value(gamma), kkt_tolerance: 1e-10, ..OcSvmConfig::default() }
}

#[test]
fn ocsvm_objective_matches_projected_gradient() {
    for (n, nu, seed) in [(8usize, 0.3, 1u64), (15, 0.2, 2), (20, 0.5, 3), (20, 0.1, 4)] {
        let x = common::gaussian_rows(n, 2, seed);
        let gamma = 0.5;
        let model = ocsvm_fit(&x, &svm_config(nu, gamma)).unwrap();
        assert!(model.converged);
        let k = common::rbf_matrix(&x, gamma);
        let alpha = common::projected_gradient_dual(&k, n, 1.0 / (nu * n as f64), 20_000);
        let oracle = common::quad_objective(&k, &alpha);
        let got = model.dual_objective();
        assert!((got - oracle).abs() <= 1e-6, "n={n} nu={nu}: {got} vs {oracle}");
    }
}

#[test]
fn decision_matches_kernel_sum() {
    let x = common::gaussian_rows(60, 3, 8);
    let model = ocsvm_fit(&x, &OcSvmConfig { nu: 0.2, ..OcSvmConfig::default() }).unwrap();
    for q in common::gaussian_rows(10, 3, 9) {
        let mut sum = 0.0;
        for (sv, a) in model.support_vectors.iter().zip(&model.alphas) {
            let d: f64 = sv.iter().zip(&q).map(|(s, v)| (s - v) * (s - v)).sum();
            sum += a * (-model.gamma * d).exp();
        }
        let want = sum - model.rho;
        let got = model.decision(&q).unwrap();
        assert!((got - want).abs() <= 1e-12 * (sum + model.rho.abs()), "{got} vs {want}");
    }
}

#[test]
fn dual_objective_never_increases() {
    let x = common::gaussian_rows(40, 2, 12);
    let mut last = f64::INFINITY;
    for passes in 0..60 {
        let cfg = OcSvmConfig { max_passes: passes, ..svm_config(0.15, 0.8) };
        let obj = ocsvm_fit(&x, &cfg).unwrap().dual_objective();
        assert!(obj <= last + 1e-15, "update {passes} raised the objective: {last} -> {obj}");
        last = obj;
    }
}
