mod common;

use common::{random_dataset, random_detections, random_map, rel_err};
use featedit_core::oracle::{
    oracle_ap, oracle_kurtosis, oracle_mask, oracle_nms, oracle_profile, oracle_rank,
    oracle_stats, oracle_svm,
};
use featedit_core::{
    apply_mask, average_precision, build_mask, channel_kurtosis, edit_dataset, kurtosis, nms,
    pca_project, rank_channel_activations, seeded_rng, stats_matrix, svm_objective,
    train_regressor, train_svm_vectors, variance_profile, ApMode, EditConfig, EditMask,
    EvalConfig, GroundTruth, LinearModel, Matrix, SvmConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn kurtosis_matches_oracle_on_seeded_channels() {
    let mut rng = seeded_rng(1);
    for _ in 0..500 {
        let m = random_map(&mut rng, 1, 6);
        let units = m.channel(0);
        assert!(rel_err(kurtosis(units), oracle_kurtosis(units)) <= 1e-12);
    }
}

#[test]
fn stats_and_profile_match_oracle() {
    for seed in 0..5 {
        let d = random_dataset(seed, 5, 12, 4, 100);
        let stats = stats_matrix(&d).unwrap();
        let oracle = oracle_stats(&d).unwrap();
        for (j, row) in oracle.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                assert!(rel_err(stats.get(j, i), v) <= 1e-12);
            }
        }
        let labels = d.labels();
        let p = variance_profile(&stats, &labels, 5).unwrap();
        let o = oracle_profile(&oracle, &labels, 5).unwrap();
        for c in 0..5 {
            for i in 0..12 {
                assert!(rel_err(p.intra(c)[i], o.intra[c][i]) <= 1e-12);
                assert!(rel_err(p.class_means(c)[i], o.class_means[c][i]) <= 1e-12);
            }
        }
        for i in 0..12 {
            assert!(rel_err(p.grand_mean()[i], o.grand_mean[i]) <= 1e-12);
            assert!(rel_err(p.inter()[i], o.inter[i]) <= 1e-12);
        }
    }
}

#[test]
fn masks_match_full_sort_oracle() {
    for seed in 0..10 {
        let d = random_dataset(100 + seed, 3, 16, 4, 60);
        let stats = stats_matrix(&d).unwrap();
        let labels = d.labels();
        let p = variance_profile(&stats, &labels, 3).unwrap();
        let o = oracle_profile(&oracle_stats(&d).unwrap(), &labels, 3).unwrap();
        for c in 0..3 {
            let m = build_mask(&p, c as u32, &EditConfig::default()).unwrap();
            let (intra, inter) = oracle_mask(&o, c, 0.2, 0.3);
            assert_eq!(m.dropped_intra, intra);
            assert_eq!(m.dropped_inter, inter);
        }
    }
}

#[test]
fn mask_application_matches_unit_loop() {
    let d = random_dataset(7, 2, 6, 3, 10);
    let masks = vec![
        EditMask::dropping(0, 6, &[1, 4]).unwrap(),
        EditMask::dropping(1, 6, &[0]).unwrap(),
    ];
    let edited = edit_dataset(&d, &masks).unwrap();
    for (s, e) in d.samples().iter().zip(edited.samples()) {
        let m = &masks[s.class_id as usize];
        assert_eq!(apply_mask(&s.feature, m).unwrap(), e.feature);
        for ch in 0..6 {
            for r in 0..3 {
                for col in 0..3 {
                    let expect = if m.keep[ch] { s.feature.get(ch, r, col) } else { 0.0 };
                    assert_eq!(e.feature.get(ch, r, col).to_bits(), expect.to_bits());
                }
            }
        }
        assert_eq!((e.class_id, e.bbox, e.image_id, e.difficult), (s.class_id, s.bbox, s.image_id, s.difficult));
    }
}

#[test]
fn ranking_matches_sort_oracle() {
    let d = random_dataset(3, 2, 4, 6, 50);
    for ch in 0..4 {
        assert_eq!(
            rank_channel_activations(&d, ch, 9).unwrap(),
            oracle_rank(&d, ch, 9).unwrap()
        );
    }
}

#[test]
fn nms_matches_greedy_oracle() {
    let mut rng = seeded_rng(9);
    for _ in 0..200 {
        let n = rng.gen_range(0..=20);
        let dets = random_detections(&mut rng, n, 0, 0);
        let kept = nms(&dets, 0.3).unwrap();
        let expect: Vec<_> = oracle_nms(&dets, 0.3).unwrap().into_iter().map(|i| dets[i]).collect();
        assert_eq!(kept, expect);
    }
}

#[test]
fn ap_matches_oracle_in_both_modes() {
    let mut rng = seeded_rng(21);
    for _ in 0..100 {
        let mut gts = Vec::new();
        let mut dets = Vec::new();
        for image in 0..4u32 {
            for _ in 0..rng.gen_range(0..4) {
                gts.push(GroundTruth {
                    image_id: image,
                    class_id: 0,
                    bbox: common::random_box(&mut rng),
                    difficult: rng.gen_bool(0.15),
                });
            }
            // Detections near the ground truth so matches actually happen.
            for g in gts.iter().filter(|g| g.image_id == image).cloned().collect::<Vec<_>>() {
                for _ in 0..rng.gen_range(0..3) {
                    let dx = rng.gen_range(-3.0..3.0);
                    let b = featedit_core::BBox::new(g.bbox.x1 + dx, g.bbox.y1, g.bbox.x2 + dx, g.bbox.y2).unwrap();
                    let score = rng.gen_range(0..10) as f64;
                    dets.push(featedit_core::DetectionRecord::new(image, 0, score, b).unwrap());
                }
            }
            let extra = rng.gen_range(0..3);
            dets.extend(random_detections(&mut rng, extra, image, 0));
        }
        for mode in [ApMode::ElevenPoint, ApMode::Continuous] {
            let cfg = EvalConfig { ap_mode: mode, ..EvalConfig::default() };
            let ap = average_precision(0, &dets, &gts, &cfg).unwrap().ap;
            let o = oracle_ap(&dets, &gts, 0.5, mode == ApMode::ElevenPoint).unwrap();
            assert!((ap - o).abs() <= 1e-12, "{ap} vs {o}");
        }
    }
}

fn forty_sample_problem() -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = seeded_rng(40);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 0..40 {
        let y = if j % 2 == 0 { 1.0 } else { -1.0 };
        xs.push(vec![y * 0.8 + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        ys.push(y);
    }
    (xs, ys)
}

#[test]
fn svm_objective_is_term_by_term() {
    let (xs, ys) = forty_sample_problem();
    let m = LinearModel { weights: vec![0.7, -0.3], bias: 0.1, class_id: 0 };
    let mut loss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        loss += (1.0 - y * (0.7 * x[0] - 0.3 * x[1] + 0.1)).max(0.0);
    }
    let expect = 0.01 / 2.0 * (0.49 + 0.09) + loss / 40.0;
    assert!(rel_err(svm_objective(&m, &xs, &ys, 0.01).unwrap(), expect) <= 1e-12);
}

#[test]
fn svm_reaches_slow_oracle_objective() {
    let (xs, ys) = forty_sample_problem();
    let cfg = SvmConfig { reg_lambda: 0.01, ..SvmConfig::default() };
    let m = train_svm_vectors(&xs, &ys, 0, &cfg).unwrap();
    let ours = svm_objective(&m, &xs, &ys, 0.01).unwrap();
    let (_, _, best) = oracle_svm(&xs, &ys, 0.01, 20_000).unwrap();
    assert!(rel_err(ours, best) <= 1e-3, "{ours} vs {best}");
}

#[test]
fn pca_matches_dense_eigendecomposition() {
    let mut rng = seeded_rng(5);
    for _ in 0..10 {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let r = pca_project(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
        let x = DMatrix::from_fn(20, 10, |i, j| rows[i][j]);
        let mean = x.row_mean();
        let centered = DMatrix::from_fn(20, 10, |i, j| x[(i, j)] - mean[j]);
        let cov = centered.transpose() * &centered / 19.0;
        let mut eig: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(rel_err(r.variances[0], eig[0]) <= 1e-8);
        assert!(rel_err(r.variances[1], eig[1]) <= 1e-8);
    }
}

#[test]
fn ridge_matches_dense_normal_equations() {
    let mut rng = seeded_rng(30);
    let (n, d, lambda) = (30, 5, 0.1);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let targets: Vec<[f64; 4]> = (0..n)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5), 0.2])
        .collect();
    let r = train_regressor(&xs, &targets, lambda, 0).unwrap();
    // Augmented system with an unpenalized bias column:
    // minimize (1/N)‖Xw + b − y‖² + λ‖w‖².
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j < d { xs[i][j] } else { 1.0 });
    let mut reg = DMatrix::identity(d + 1, d + 1) * (lambda * n as f64);
    reg[(d, d)] = 0.0;
    let lhs = a.transpose() * &a + reg;
    for k in 0..4 {
        let y = DVector::from_fn(n, |i, _| targets[i][k]);
        let sol = lhs.clone().lu().solve(&(a.transpose() * y)).unwrap();
        let dense = featedit_core::BoxRegressor {
            weights: [
                sol.rows(0, d).iter().copied().collect(),
                vec![0.0; d],
                vec![0.0; d],
                vec![0.0; d],
            ],
            biases: [sol[d], 0.0, 0.0, 0.0],
            ridge_lambda: lambda,
            class_id: 0,
        };
        let shifted: Vec<[f64; 4]> = targets.iter().map(|t| [t[k], 0.0, 0.0, 0.0]).collect();
        let oracle_obj = dense.objective(0, &xs, &shifted);
        let ours = r.objective(k, &xs, &targets);
        assert!((ours - oracle_obj).abs() <= 1e-8, "{ours} vs {oracle_obj}");
        for j in 0..d {
            assert!((r.weights[k][j] - sol[j]).abs() <= 1e-9);
        }
    }
}

#[test]
fn channel_kurtosis_is_per_channel_oracle() {
    let mut rng = seeded_rng(12);
    let m = random_map(&mut rng, 8, 6);
    let k = channel_kurtosis(&m);
    for (i, v) in k.iter().enumerate() {
        assert!(rel_err(*v, oracle_kurtosis(m.channel(i))) <= 1e-12);
    }
}
