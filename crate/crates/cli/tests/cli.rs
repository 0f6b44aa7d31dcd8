use assert_cmd::Command;

const TINY: &str = r#"
[corpus]
train_users = 1
per_class = 3
shifted_users = 0
calibration_per_class = 2
anomalies_per_kind = 1

[train]
epochs = 1
"#;

fn cmd() -> Command {
    Command::cargo_bin("radar-hgr").unwrap()
}

#[test]
fn bad_ratios_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[split]\ntrain = 0.5\nval = 0.1\nforget = 0.1\n").unwrap();
    cmd().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("run")).assert().code(2);
    assert!(!dir.path().join("run").exists());
}

#[test]
fn missing_upstream_is_a_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd().arg("train").arg("--out").arg(dir.path()).assert().code(2);
    let stderr = String::from_utf8_lossy(&out.get_output().stderr).into_owned();
    assert!(stderr.contains("preprocess"), "{stderr}");
}

#[test]
fn stages_run_then_skip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let run = || cmd().args(["run", "--stages", "simulate,preprocess,train", "--jobs", "1", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("out")).assert().success();
    run();
    let model = std::fs::read(dir.path().join("out/train/model.hgr")).unwrap();
    let out = run();
    let stderr = String::from_utf8_lossy(&out.get_output().stderr).into_owned();
    assert!(stderr.contains("train: up to date"), "{stderr}");
    assert_eq!(std::fs::read(dir.path().join("out/train/model.hgr")).unwrap(), model);
}

#[test]
fn prints_effective_config() {
    let out = cmd().args(["config", "--seed", "9"]).assert().success();
    let text = String::from_utf8_lossy(&out.get_output().stdout).into_owned();
    assert!(text.contains("seed = 9"), "{text}");
}

const EXPLAIN: &str = r#"
[corpus]
train_users = 1
per_class = 4
shifted_users = 0
calibration_per_class = 3
anomalies_per_kind = 2

[train]
epochs = 1

[vae]
epochs = 2

[anomaly]
lof_k = 3

[explain]
n_samples = 8
background = 8
srv_n = 2
"#;

const MENU: [&str; 5] = ["SwipeLeft", "SwipeRight", "SwipeUp", "SwipeDown", "Push"];

fn copy_tree(from: &std::path::Path, to: &std::path::Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

#[test]
fn prompt_modes_agree_for_identical_answers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("explain.toml");
    std::fs::write(&cfg, EXPLAIN).unwrap();
    let batch = dir.path().join("batch");
    cmd().args(["run", "--stages", "simulate,preprocess,train,detect,explain", "--config"]).arg(&cfg).arg("--out").arg(&batch).assert().success();
    let csv = std::fs::read_to_string(batch.join("explain/characterization.csv")).unwrap();
    let rows: Vec<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[3].to_string())
        })
        .collect();
    assert!(!rows.is_empty(), "no recording was flagged");

    let interactive = dir.path().join("interactive");
    copy_tree(&batch, &interactive);
    let answers: String = rows.iter().map(|(_, c)| format!("{}\n", MENU.iter().position(|m| m == c).unwrap() + 1)).collect();
    cmd().args(["explain", "--force", "--interactive", "--config"]).arg(&cfg).arg("--out").arg(&interactive).write_stdin(answers).assert().success();

    let answered = dir.path().join("answered");
    copy_tree(&batch, &answered);
    let file = dir.path().join("answers.toml");
    std::fs::write(&file, rows.iter().map(|(id, c)| format!("\"{id}\" = \"{}\"\n", c.to_lowercase())).collect::<String>()).unwrap();
    cmd().args(["explain", "--force", "--answer-file"]).arg(&file).arg("--config").arg(&cfg).arg("--out").arg(&answered).assert().success();

    for other in [&interactive, &answered] {
        assert_eq!(std::fs::read_to_string(other.join("explain/characterization.csv")).unwrap(), csv);
    }
}
