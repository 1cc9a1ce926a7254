mod common;

use common::data;
use star_core::fm::{ExampleCorpus, ScriptedProvider};
use star_core::harness::{cmd_eval_episodes, cmd_eval_menu, MenuOptions, MetricsReport, Ratio};
use star_core::monitor::DetectionMode;
use star_core::retrieval::DishTaxonomy;

fn cell(table: &str, name: &str) -> String {
    table
        .lines()
        .find_map(|l| l.strip_prefix(name))
        .map(|v| v.trim().to_string())
        .unwrap_or_else(|| panic!("no row {name}"))
}

fn assert_table_matches_json(r: &MetricsReport) {
    let table = r.to_table();
    let json = r.to_json();
    for (row, key) in [
        ("Planning accuracy", "planning_accuracy"),
        ("Detection", "detection"),
        ("Explanation", "explanation"),
        ("Recovery accuracy", "recovery_accuracy"),
    ] {
        let v = &json[key];
        if v.is_null() {
            continue;
        }
        let frac = format!("({}/{})", v["numerator"], v["denominator"]);
        let shown = cell(&table, row);
        match v["percent"].as_f64() {
            Some(p) => assert_eq!(shown, format!("{p:.1}% {frac}")),
            None => assert_eq!(shown, format!("n/a {frac}")),
        }
    }
    for stage in ["planning", "detection", "recovery", "total"] {
        assert_eq!(cell(&table, &format!("FM calls ({stage})")), json["fm_calls"][stage].to_string());
    }
}

#[test]
fn golden_eval_is_deterministic_and_job_count_independent() {
    let path = data("episodes/golden.json");
    let seq = cmd_eval_episodes(&path, None, DetectionMode::Grid, 1).unwrap();
    let par = cmd_eval_episodes(&path, None, DetectionMode::Grid, 4).unwrap();
    let again = cmd_eval_episodes(&path, None, DetectionMode::Grid, 4).unwrap();
    assert_eq!(seq.report.to_json_string(), par.report.to_json_string());
    assert_eq!(par.report.to_json_string(), again.report.to_json_string());
    assert_eq!(seq.logs, par.logs);
    assert_table_matches_json(&seq.report);
}

#[test]
fn golden_numbers() {
    let r = cmd_eval_episodes(&data("episodes/golden.json"), None, DetectionMode::Frames, 0)
        .unwrap()
        .report;
    assert_eq!(r.detection, Some(Ratio::new(20, 20)));
    assert_eq!(r.explanation, Some(Ratio::new(16, 16)));
    assert_eq!(r.recovery, Some(Ratio::new(15, 16)));
    let uncovered = r.episodes.iter().find(|e| e.name == "tea-collateral-uncovered").unwrap();
    assert!(!uncovered.success);
    assert!(uncovered.error.as_deref().unwrap().contains("no FailNet strategy"));
}

#[test]
fn committing_golden_episodes_cuts_generation_calls() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("kg.foon");
    std::fs::write(&store, "").unwrap();
    let first = cmd_eval_episodes(&data("episodes/golden.json"), Some(&store), DetectionMode::Grid, 0).unwrap();
    let second = cmd_eval_episodes(&data("episodes/golden.json"), Some(&store), DetectionMode::Grid, 0).unwrap();
    assert!(first.report.fm_calls.recovery > 0);
    assert!(second.report.fm_calls.recovery < first.report.fm_calls.recovery);
}

#[test]
fn nominal_only_dataset_reports_na_recovery() {
    let r = cmd_eval_episodes(&data("episodes/distribution.json"), None, DetectionMode::Grid, 0)
        .unwrap()
        .report;
    assert_eq!(r.episodes.len(), 101);
    assert_eq!(r.recovery, Some(Ratio::new(0, 0)));
    assert_eq!(cell(&r.to_table(), "Recovery accuracy"), "n/a (0/0)");
    assert_eq!(r.to_json()["recovery_accuracy"]["percent"], serde_json::Value::Null);
    assert_table_matches_json(&r);
}

#[test]
fn menu_report() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.foon");
    std::fs::copy(data("menu/store.foon"), &store).unwrap();
    let provider = ScriptedProvider::load(&data("menu/planner.json")).unwrap();
    let opts = MenuOptions {
        menu: data("menu/menu.csv"),
        gold: data("menu/gold"),
        world: data("menu/kitchen.world"),
        store,
        provider: Some(&provider),
        taxonomy: DishTaxonomy::default(),
        corpus: ExampleCorpus::default(),
        persist: false,
    };
    let r = cmd_eval_menu(&opts).unwrap().report;
    assert_eq!(r.planning, Some(Ratio::new(20, 20)));
    assert_eq!(r.cases, [4, 5, 11]);
    assert_eq!(r.fm_calls.planning, 9);
    assert_table_matches_json(&r);
}
