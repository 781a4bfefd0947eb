mod common;

use tefs_core::capture::{run_session, CaptureMethod, StereoSample};
use tefs_core::dataset_io::{tree_hash, DatasetWriter};
use tefs_core::render::ConditionName;

use common::scenario;

fn capture(method: CaptureMethod, condition: ConditionName, seed: u64) -> Vec<StereoSample> {
    let mut cfg = scenario("validation_c.toml");
    cfg.cycles = Some(15);
    cfg.seed = seed;
    let mut out = Vec::new();
    run_session(&cfg, method, condition, &mut out).unwrap();
    out
}

#[test]
fn repeated_sessions_are_identical() {
    for method in [
        CaptureMethod::Tefs,
        CaptureMethod::NaiveSwap,
        CaptureMethod::DualViewport,
    ] {
        assert_eq!(
            capture(method, ConditionName::NightThunderstorm, 3),
            capture(method, ConditionName::NightThunderstorm, 3)
        );
    }
}

#[test]
fn seed_changes_the_scene() {
    let a = capture(CaptureMethod::Tefs, ConditionName::ExtraSunny, 1);
    let b = capture(CaptureMethod::Tefs, ConditionName::ExtraSunny, 2);
    assert_ne!(a[0].left.rgb, b[0].left.rgb);
}

#[test]
fn dataset_trees_hash_identically() {
    let mut cfg = scenario("validation_a.toml");
    cfg.cycles = Some(10);
    let hash = || {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("x");
        let mut w = DatasetWriter::create(&root).unwrap();
        run_session(
            &cfg,
            CaptureMethod::NaiveSwap,
            ConditionName::CloudyRain,
            &mut w,
        )
        .unwrap();
        tree_hash(&root).unwrap()
    };
    assert_eq!(hash(), hash());
}
