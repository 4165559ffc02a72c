use featedit::error::Error;
use featedit::{feat, model, tables};
use featedit_core::{
    BBox, BoxRegressor, Dataset, DetectionRecord, EditMask, FeatureMap, GroundTruth,
    LabeledSample, LinearModel,
};
use proptest::prelude::*;

fn bbox() -> impl Strategy<Value = BBox> {
    (0.0f32..500.0, 0.0f32..500.0, 1.0f32..200.0, 1.0f32..200.0).prop_map(|(x, y, w, h)| {
        let (x, y) = (x as f64, y as f64);
        BBox::new(x, y, x + w as f64, y + h as f64).unwrap()
    })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..4, 1usize..4, 1usize..3, 0usize..6).prop_flat_map(|(t, c, s, n)| {
        let sample = (
            prop::collection::vec(-1e6f32..1e6, c * s * s),
            0..t as u32,
            bbox(),
            any::<u32>(),
            any::<bool>(),
        );
        prop::collection::vec(sample, n).prop_map(move |rows| {
            let mut d = Dataset::new(t, c, s).unwrap();
            for (values, class_id, b, image_id, difficult) in rows {
                let f = FeatureMap::new(c, s, values).unwrap();
                d.push(LabeledSample::new(f, class_id, b, image_id, difficult).unwrap())
                    .unwrap();
            }
            d
        })
    })
}

proptest! {
    #[test]
    fn feat_round_trip(d in dataset()) {
        let bytes = feat::encode_dataset(&d);
        prop_assert_eq!(bytes.len(), feat::HEADER_LEN + d.len() * feat::sample_len(d.channels(), d.spatial()));
        let back = feat::decode_dataset(&bytes, "mem").unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(feat::encode_dataset(&back), bytes);
    }

    #[test]
    fn feat_truncation_is_detected(d in dataset(), cut in 1usize..64) {
        let bytes = feat::encode_dataset(&d);
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(feat::decode_dataset(&bytes[..keep], "mem").is_err());
    }

    #[test]
    fn detections_round_trip(
        rows in prop::collection::vec((any::<u32>(), 0u32..20, -1e9f64..1e9, bbox()), 0..30)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let dets: Vec<DetectionRecord> = rows
            .into_iter()
            .map(|(i, c, s, b)| DetectionRecord::new(i, c, s, b).unwrap())
            .collect();
        tables::write_detections(&dets, &path).unwrap();
        prop_assert_eq!(tables::read_detections(&path).unwrap(), dets);
    }

    #[test]
    fn models_round_trip(w in prop::collection::vec(-1e3f64..1e3, 0..20), b in -10.0f64..10.0, c in any::<u32>()) {
        let m = LinearModel { weights: w.clone(), bias: b, class_id: c };
        prop_assert_eq!(model::decode_svm(&model::encode_svm(&m), "m").unwrap(), m);
        let r = BoxRegressor {
            weights: [w.clone(), w.iter().map(|x| -x).collect(), w.clone(), w.clone()],
            biases: [b, -b, 0.5, 0.25],
            ridge_lambda: 1e-3,
            class_id: c,
        };
        prop_assert_eq!(model::decode_regressor(&model::encode_regressor(&r), "r").unwrap(), r);
    }
}

#[test]
fn ground_truth_and_masks_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gts = vec![
        GroundTruth {
            image_id: 3,
            class_id: 1,
            bbox: BBox::new(1.5, 2.0, 30.25, 40.0).unwrap(),
            difficult: true,
        },
        GroundTruth {
            image_id: 4,
            class_id: 0,
            bbox: BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(),
            difficult: false,
        },
    ];
    let p = dir.path().join("gt.csv");
    tables::write_ground_truth(&gts, &p).unwrap();
    assert_eq!(tables::read_ground_truth(&p).unwrap(), gts);

    let mut a = EditMask::keep_all(0, 5);
    a.keep = vec![true, false, false, true, false];
    a.dropped_intra = vec![1, 4];
    a.dropped_inter = vec![2, 4];
    let b = EditMask::keep_all(1, 5);
    let p = dir.path().join("masks.csv");
    tables::write_masks(&[a.clone(), b.clone()], &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("class_id,channel,keep,reason\n0,0,1,kept\n0,1,0,intra\n0,2,0,inter\n"));
    assert!(text.contains("0,4,0,both\n"));
    assert_eq!(tables::read_masks(&p).unwrap(), vec![a, b]);
}

#[test]
fn ground_truth_rejects_bad_difficult_flag() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("gt.csv");
    std::fs::write(&p, "image_id,class_id,x1,y1,x2,y2,difficult\n1,0,0,0,5,5,2\n").unwrap();
    match tables::read_ground_truth(&p) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn empty_detection_file_is_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    std::fs::write(&p, "").unwrap();
    assert!(tables::read_detections(&p).unwrap().is_empty());
    tables::write_detections(&[], &p).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), "image_id,class_id,score,x1,y1,x2,y2\n");
    assert!(tables::read_detections(&p).unwrap().is_empty());
}

#[test]
fn non_finite_feature_reports_sample() {
    let mut d = Dataset::new(1, 1, 1).unwrap();
    for j in 0..3 {
        let f = FeatureMap::new(1, 1, vec![j as f32]).unwrap();
        d.push(LabeledSample::new(f, 0, BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(), j, false).unwrap())
            .unwrap();
    }
    let mut bytes = feat::encode_dataset(&d);
    let at = feat::HEADER_LEN + 2 * feat::sample_len(1, 1) + 25;
    bytes[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(
        feat::decode_dataset(&bytes, "mem"),
        Err(Error::Value { sample: 2 })
    ));
}
