use fpplab::experiment::{compare, replay, replay_file, run, run_to_dir, write_artifacts, ExperimentConfig, ExperimentKind, Metric, RunRecord, Verdict};
use serde_json::json;

fn config(kind: ExperimentKind, patch: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::defaults(kind).merged(patch).unwrap()
}

fn small(kind: ExperimentKind) -> ExperimentConfig {
    match kind {
        ExperimentKind::Truncation => config(kind, json!({ "replicas": 12, "n_list": [6], "k_list": [2, 5, 20] })),
        ExperimentKind::MuContinuity => config(kind, json!({ "replicas": 10, "n_list": [5] })),
        ExperimentKind::CheegerSweep | ExperimentKind::WulffSweep => {
            config(kind, json!({ "replicas": 8, "n_list": [3], "p_grid": [0.8, 0.9], "batches": 4 }))
        }
        ExperimentKind::SurgeryValidate => config(kind, json!({ "replicas": 3, "scales": [4], "radius": 40, "beta": 4.4 })),
        ExperimentKind::BoxClassify => config(kind, json!({ "replicas": 10, "scales": [2, 3] })),
    }
}

#[test]
fn every_experiment_writes_auditable_tables() {
    for kind in ExperimentKind::ALL {
        let dir = tempfile::tempdir().unwrap();
        let c = small(kind);
        let (record, artifacts) = run(&c, 2).unwrap();
        let files = write_artifacts(dir.path(), &record, &artifacts).unwrap();
        assert!(files.iter().any(|f| f.ends_with("record.json")), "{kind:?}");
        assert!(!artifacts.tables.is_empty(), "{kind:?}");
        for t in &artifacts.tables {
            let text = std::fs::read_to_string(dir.path().join(format!("{}.csv", t.name))).unwrap();
            let mut lines = text.lines();
            assert!(lines.next().unwrap().starts_with("seed,replica,config_hash"));
            for line in lines {
                let cells: Vec<&str> = line.split(',').collect();
                assert_eq!(cells[0], c.seed.to_string());
                assert!(cells[1] == "agg" || cells[1].parse::<u64>().is_ok(), "{line}");
                assert_eq!(cells[2], record.config_hash);
                assert_eq!(cells.len(), t.columns.len() + 3);
            }
        }
        assert_eq!(RunRecord::load(&dir.path().join("record.json")).unwrap(), record);
    }
}

#[test]
fn worker_count_does_not_change_results() {
    for kind in [ExperimentKind::Truncation, ExperimentKind::BoxClassify, ExperimentKind::CheegerSweep] {
        let c = small(kind);
        let (a, _) = run(&c, 1).unwrap();
        let (b, _) = run(&c, 4).unwrap();
        assert_eq!(compare(&a, &b), Verdict::Match, "{kind:?}");
        assert_eq!(a.per_replica, b.per_replica);
    }
}

#[test]
fn replay_detects_tampering_and_replica_changes() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(ExperimentKind::Truncation);
    let record = run_to_dir(&c, 1, dir.path()).unwrap();
    assert_eq!(replay_file(&dir.path().join("record.json"), 2).unwrap(), Verdict::Match);

    let mut tampered = record.clone();
    let value = tampered.aggregates.get_mut("mu[K=5]").unwrap();
    *value = Metric(value.0 + 1e-9);
    match replay(&tampered, 1).unwrap() {
        Verdict::Mismatch { field, .. } => assert_eq!(field, "aggregates.mu[K=5]"),
        Verdict::Match => panic!("tampering not detected"),
    }

    let (other, _) = run(&config(ExperimentKind::Truncation, json!({ "replicas": 13, "n_list": [6], "k_list": [2, 5, 20] })), 1).unwrap();
    let mut mixed = other.clone();
    mixed.config = record.config.clone();
    assert!(matches!(replay(&mixed, 1).unwrap(), Verdict::Mismatch { .. }));
}

#[test]
fn invalid_orderings_name_the_field() {
    let c = config(ExperimentKind::BoxClassify, json!({ "p0": 0.95, "q": 0.9 }));
    let err = run(&c, 1).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("p0"), "{err}");
    let err = run(&small(ExperimentKind::Truncation), 0).unwrap_err();
    assert_eq!(err.field, "workers");
}

#[test]
fn continuity_run_reports_every_law() {
    let (record, artifacts) = run(&small(ExperimentKind::MuContinuity), 1).unwrap();
    for m in [5, 10, 20] {
        assert!(record.aggregates.keys().any(|k| k.starts_with("sup_gap[") && k.contains(&format!("m={m}"))), "m={m}");
    }
    assert!(artifacts.tables.iter().any(|t| t.rows.len() >= 3));
}
