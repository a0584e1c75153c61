use gazelab_core::analysis::{clean_errors, describe, CleanMethod};
use gazelab_core::dataset::{load_session, save_session, Condition, Platform};
use gazelab_core::evaluate::{classification_report, kfold_cv, ModelSpec};
use gazelab_core::features::{
    apply_standardizer, assemble_dataset, read_matrix_csv, shuffle_split, standardize,
    write_matrix_csv, AssembleOptions, Task,
};
use gazelab_core::geometry::compute_errors;
use gazelab_core::learn::{load_bundle, save_bundle, Model, ModelBundle};
use gazelab_core::synth::{synth_cohort, CohortSpec};
use gazelab_core::Error;

fn cohort(platform: Platform, conditions: Vec<Condition>, n: usize) -> CohortSpec {
    CohortSpec::new(platform, conditions, n)
}

#[test]
fn session_files_round_trip_to_identical_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sessions =
        synth_cohort(&cohort(Platform::Tablet, vec![Condition::PlatYaw20], 2), 3).unwrap();
    for s in &sessions {
        let path = dir.path().join(format!("{}.csv", s.meta.participant_id));
        save_session(s, &path).unwrap();
        let back = load_session(&path, None, None).unwrap();
        assert_eq!(back.meta, s.meta);
        let (a, b) = (compute_errors(s).unwrap(), compute_errors(&back).unwrap());
        for (x, y) in a.frontal_err.iter().zip(&b.frontal_err) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn cleaning_keeps_typical_statistics() {
    let s = &synth_cohort(&cohort(Platform::Desktop, vec![Condition::UD70], 1), 1).unwrap()[0];
    let raw = compute_errors(s).unwrap();
    let cleaned = clean_errors(&raw, CleanMethod::default()).unwrap();
    assert_eq!(cleaned.len(), raw.len());
    let (r, c) = (
        describe(&raw.frontal_err).unwrap(),
        describe(&cleaned.frontal_err).unwrap(),
    );
    assert!((r.mean - c.mean).abs() < 0.2, "{} vs {}", r.mean, c.mean);
    assert!(c.sd <= r.sd);
}

#[test]
fn feature_csv_round_trip_and_classifier_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let conds = vec![
        Condition::Neutral,
        Condition::HeadRoll20,
        Condition::HeadPitch20,
        Condition::HeadYaw20,
    ];
    let sessions = synth_cohort(&cohort(Platform::Desktop, conds, 6), 9).unwrap();
    let opts = AssembleOptions {
        augment: false,
        ..AssembleOptions::default()
    };
    let m = assemble_dataset(&sessions, Task::HeadPose, &opts, 2).unwrap();
    assert_eq!(m.n_rows(), 6 * 4 * 3);

    let csv = dir.path().join("features.csv");
    write_matrix_csv(&m, &csv).unwrap();
    let back = read_matrix_csv(&csv, Some(&m.class_names)).unwrap();
    assert_eq!(back.labels, m.labels);
    assert_eq!(back.columns, m.columns);
    for (a, b) in back.rows.iter().flatten().zip(m.rows.iter().flatten()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    let (train, test) = shuffle_split(&m, 0.25, 4).unwrap();
    let (ztrain, s) = standardize(&train).unwrap();
    let ztest = apply_standardizer(&test, &s).unwrap();
    let model = ModelSpec::Knn { k: 3 }.fit(&ztrain, 0).unwrap();
    let pred = model.predict_labels(&ztest.rows).unwrap();

    let path = dir.path().join("knn.model");
    let bundle = ModelBundle {
        model,
        columns: m.columns.clone(),
        class_names: m.class_names.clone(),
        standardizer: Some(s),
        target_scale: None,
    };
    save_bundle(&bundle, &path).unwrap();
    let loaded = load_bundle(&path).unwrap();
    assert_eq!(loaded, bundle);
    assert!(matches!(loaded.model, Model::Knn(_)));
    assert_eq!(loaded.model.predict_labels(&ztest.rows).unwrap(), pred);

    let rep = classification_report(&test.labels, &pred, &m.class_names).unwrap();
    assert_eq!(rep.confusion.total(), test.n_rows());
}

#[test]
fn cross_validation_separates_head_poses() {
    let conds = vec![
        Condition::Neutral,
        Condition::HeadRoll20,
        Condition::HeadPitch20,
        Condition::HeadYaw20,
    ];
    let sessions = synth_cohort(&cohort(Platform::Desktop, conds, 10), 5).unwrap();
    let m = assemble_dataset(&sessions, Task::HeadPose, &AssembleOptions::default(), 6).unwrap();
    let cv = kfold_cv(&m, &ModelSpec::Knn { k: 3 }, 10, 7).unwrap();
    assert!(cv.mean_accuracy > 0.8, "{}", cv.mean_accuracy);
}

#[test]
fn mixed_platforms_are_rejected() {
    let mut sessions =
        synth_cohort(&cohort(Platform::Desktop, vec![Condition::UD50], 1), 1).unwrap();
    sessions.extend(synth_cohort(&cohort(Platform::Tablet, vec![Condition::UD50], 1), 1).unwrap());
    let err = assemble_dataset(
        &sessions,
        Task::UserDistance,
        &AssembleOptions::default(),
        0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Data(_)));
}
