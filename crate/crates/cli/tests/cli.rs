use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nprl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nprl"))
        .args(args)
        .env("NPRL_OUT", out)
        .output()
        .expect("binary runs")
}

const TINY: &[&str] = &[
    "--set", "generator.n_patients=40",
    "--set", "model.gru_hidden=3",
    "--set", "model.static_widths=2,1",
    "--set", "model.trunk_widths=",
    "--set", "pretrain.epochs=2",
    "--set", "finetune.epochs=2",
    "--set", "baseline.epochs=2",
    "--set", "eval.folds=3",
    "--set", "eval.target_per_class=100",
    "--set", "eval.undersample_target=60",
    "--set", "theory.instances=40",
    "--set", "theory.gru_hidden=3",
    "--set", "theory.pretrain_epochs=2",
    "--set", "theory.finetune_epochs=2",
    "--set", "theory.n_probes=2",
];

fn tiny(command: &str, extra: &[&str]) -> Vec<String> {
    let mut v = vec![command.to_owned()];
    v.extend(TINY.iter().map(|s| s.to_string()));
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run_dir(out: &Path) -> PathBuf {
    let mut dirs: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stdout:\n{}\nstderr:\n{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_flag_fails() {
    let out = tempfile::tempdir().unwrap();
    let o = nprl(&["gen", "--frobnicate"], out.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("frobnicate"));
}

#[test]
fn unknown_setting_fails_with_diagnostic() {
    let out = tempfile::tempdir().unwrap();
    let o = nprl(&["gen", "--set", "model.depth=3"], out.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.depth"));
}

#[test]
fn stage_without_inputs_names_the_producer() {
    let out = tempfile::tempdir().unwrap();
    let o = nprl(&["extract"], out.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nprl gen"));
}

#[test]
fn shipped_config_parses() {
    let out = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/config/default.ini");
    let mut args = vec!["gen", "--config", cfg];
    args.extend(["--set", "generator.n_patients=5"]);
    ok(&nprl(&args, out.path()));
}

#[test]
fn all_is_deterministic_and_headers_carry_the_run_id() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = tiny("all", &["--seed", "3"]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&nprl(&args, a.path()));
    ok(&nprl(&args, b.path()));
    let (da, db) = (run_dir(a.path()), run_dir(b.path()));
    let id = da.file_name().unwrap().to_str().unwrap().to_owned();
    assert!(id.ends_with("-s3"), "{id}");
    assert_eq!(db.file_name(), da.file_name());
    for f in [
        "report.csv",
        "roc.txt",
        "theory_report.txt",
        "instances.csv",
        "cohort/patients.csv",
        "cohort/hourly.csv",
        "config.ini",
    ] {
        let x = std::fs::read(da.join(f)).unwrap();
        assert_eq!(x, std::fs::read(db.join(f)).unwrap(), "{f} differs between reruns");
        let first = String::from_utf8_lossy(&x).lines().next().unwrap().to_owned();
        assert!(first.starts_with('#') && first.contains(&id), "{f}: {first}");
    }
    let report = std::fs::read_to_string(da.join("report.csv")).unwrap();
    // header comment, column header, 4 arms x (3 folds + ALL)
    assert_eq!(report.lines().count(), 2 + 4 * 4);
}

#[test]
fn pretrain_then_train_reuses_checkpoint() {
    let out = tempfile::tempdir().unwrap();
    for cmd in ["gen", "extract", "pretrain", "train"] {
        let args = tiny(cmd, &[]);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&nprl(&args, out.path()));
    }
    let dir = run_dir(out.path());
    for f in ["pretrain.nprl", "pretrain_log.csv", "nprl.nprl", "nprl_log.csv"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let ckpt = std::fs::read(dir.join("nprl.nprl")).unwrap();
    assert_eq!(&ckpt[..5], b"NPRL1");
}

#[test]
fn output_root_flag_beats_environment() {
    let (env_out, flag_out) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = nprl(&["gen", "--set", "generator.n_patients=3", "--out", flag_out.path().to_str().unwrap()], env_out.path());
    ok(&o);
    assert_eq!(std::fs::read_dir(env_out.path()).unwrap().count(), 0);
    assert!(run_dir(flag_out.path()).join("cohort/patients.csv").is_file());
}
