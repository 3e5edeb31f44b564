use std::process::Command;

fn shiftlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shiftlab"))
}

#[test]
fn help_lists_exit_codes() {
    let out = shiftlab().arg("--help").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for code in 2..=9 {
        assert!(text.contains(&format!("\n  {code}  ")), "exit code {code} missing from --help");
    }
}

#[test]
fn bad_key_exits_with_config_code_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    std::fs::write(&conf, "train.batch_size = 3\n").unwrap();
    let out = shiftlab().args(["train", "--config"]).arg(&conf).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.batch_size"));
}

#[test]
fn missing_config_is_io_error() {
    let out = shiftlab().args(["al", "--config", "/nonexistent/x.conf"]).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn usage_error_is_two() {
    let out = shiftlab().args(["train"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_dir_falls_back_to_env_and_seeds_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    std::fs::write(&conf, "train.epochs = 1\ndata.per_class = 20\n").unwrap();
    let env_out = dir.path().join("from_env");
    let out = shiftlab()
        .args(["train", "--config"])
        .arg(&conf)
        .args(["--seeds", "4,7"])
        .env("SHIFTLAB_OUT", &env_out)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = shiftlab_cli::read_results_csv(&env_out.join("train.csv")).unwrap();
    let seeds: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.into_iter().collect::<Vec<_>>(), vec![4, 7]);
    assert_eq!(rows.len(), 4);
}

#[test]
fn pool_exhaustion_has_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    std::fs::write(
        &conf,
        "train.epochs = 1\ndata.per_class = 20\nal.strategies = random\nal.k = 50\nal.rounds = 3\nseeds = 0\n",
    )
    .unwrap();
    let out = shiftlab().args(["al", "--config"]).arg(&conf).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(7), "{}", String::from_utf8_lossy(&out.stderr));
}
