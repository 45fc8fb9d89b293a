use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
task = "pick_and_move"
seeds = [1, 2]
epochs = 2

[skills]
epochs = 1

[train]
batch_size = 8
cycles_per_epoch = 2
updates_per_cycle = 2
episodes_per_epoch = 2
eval_episodes = 2
hidden = [8]

[models]
episodes = 200
min_rows = 50
dynamics_hidden = [8]
dynamics_epochs = 2
success_hidden = [8]
success_epochs = 2
"#;

fn herlase(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herlase"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(output: Output) -> String {
    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
    assert!(output.status.success(), "stdout: {stdout}\nstderr: {}", String::from_utf8_lossy(&output.stderr));
    stdout
}

#[test]
fn full_pipeline_on_a_tiny_budget() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, TINY).unwrap();
    let out = dir.path().join("out");

    let trained = ok(herlase(&config, &out, &["train-skills"]));
    assert_eq!(trained.lines().count(), 3, "{trained}");
    for skill in ["reach", "grasp", "transfer"] {
        assert!(out.join(format!("skills/{skill}.policy.ckpt")).exists());
        assert!(out.join(format!("skills/{skill}.meta.toml")).exists());
    }

    let fitted = ok(herlase(&config, &out, &["fit-models"]));
    assert!(fitted.contains("held-out error"), "{fitted}");
    assert!(out.join("skills/grasp.pick_and_move.models.ckpt").exists());
    let rows = fs::read_to_string(out.join("skills/reach.pick_and_move.dynamics.csv")).unwrap().lines().count();
    assert_eq!(rows, 201);

    for method in ["herlase", "her", "pas"] {
        ok(herlase(&config, &out, &["train-task", "--method", method]));
    }
    let log = fs::read_to_string(out.join("runs/pick_and_move.herlase.k1.b5h3.seed2.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(out.join("runs/pick_and_move.pas.k1.b0h0.seed1.ckpt").exists());

    let report = ok(herlase(&config, &out, &["report"]));
    assert!(report.contains("herlase") && report.contains("pas"), "{report}");
    let summary = fs::read_to_string(out.join("report/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);

    // Runs from a different protocol cannot be mixed into the report.
    let other = dir.path().join("other.toml");
    fs::write(&other, TINY.replace("epochs = 2", "epochs = 1")).unwrap();
    ok(herlase(&other, &out, &["train-task", "--method", "her", "--seed", "9"]));
    let mixed = herlase(&config, &out, &["report"]);
    assert!(!mixed.status.success());
    assert!(String::from_utf8_lossy(&mixed.stderr).contains("config hash"));
}

#[test]
fn bad_input_exits_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, TINY).unwrap();
    let out = dir.path().join("out");

    let missing = herlase(&config, &out, &["train-task"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing artifact"));

    let bad_method = herlase(&config, &out, &["train-task", "--method", "sac"]);
    assert!(!bad_method.status.success());

    fs::write(&config, "seeds = []").unwrap();
    let bad_config = herlase(&config, &out, &["train-task", "--method", "her"]);
    assert!(!bad_config.status.success());
    assert!(String::from_utf8_lossy(&bad_config.stderr).contains("seeds"));
}
