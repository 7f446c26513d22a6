use std::collections::BTreeMap;

use refscan_core::dataset::{synth_dataset, Layout};
use refscan_core::detector::Detection;
use refscan_core::evalkit::{evaluate, EvalError};
use refscan_oracles::coco::brute_force_evaluate;
use refscan_oracles::gen;

#[test]
fn evaluate_matches_brute_force_oracle() {
    for seed in 0..300 {
        let (dets, gts) = gen::eval_instance(&mut gen::rng(seed), 5, 8);
        let report = evaluate(&dets, &gts).unwrap();
        let oracle = brute_force_evaluate(&dets, &gts);
        for (i, m) in report.per_threshold.iter().enumerate() {
            assert!((m.ap - oracle.ap[i]).abs() <= 1e-9, "seed {seed} ap[{i}] {} vs {}", m.ap, oracle.ap[i]);
            assert!((m.recall - oracle.recall[i]).abs() <= 1e-9, "seed {seed} recall[{i}]");
        }
        assert!((report.ap50 - oracle.ap50).abs() <= 1e-9);
        assert!((report.ap75 - oracle.ap75).abs() <= 1e-9);
        assert!((report.map_coco - oracle.map).abs() <= 1e-9);
        assert!((report.ar - oracle.ar).abs() <= 1e-9);
    }
}

#[test]
fn ground_truth_as_detections_scores_one() {
    let data = synth_dataset("gt", 12, &Layout::ALL, 3).unwrap();
    let gts = data.manifest.ground_truth();
    let dets: BTreeMap<String, Vec<Detection>> = gts
        .iter()
        .map(|(k, v)| (k.clone(), v.iter().map(|b| Detection::new(*b, 1.0)).collect()))
        .collect();
    let r = evaluate(&dets, &gts).unwrap();
    assert_eq!((r.ap50, r.ap75, r.map_coco, r.ar), (1.0, 1.0, 1.0, 1.0));
}

#[test]
fn unknown_pages_are_itemized() {
    let (mut dets, gts) = gen::eval_instance(&mut gen::rng(1), 2, 3);
    dets.insert("nope-a".into(), vec![]);
    dets.insert("nope-b".into(), vec![]);
    match evaluate(&dets, &gts) {
        Err(EvalError::UnknownPages(p)) => assert_eq!(p, ["nope-a", "nope-b"]),
        other => panic!("{other:?}"),
    }
}
