use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn priorsens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_priorsens"))
        .args(args)
        .env_remove("PRIORSENS_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

const SMALL: [&str; 6] = ["--chains", "2", "--warmup", "150", "--draws", "200"];

#[test]
fn run_study_twice_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = dir.path().to_str().unwrap();
        let mut args = vec![
            "run-study", "--model", "1", "--tau", "0.4", "--n-datasets", "2", "--seed", "7",
            "--priors", "7,8", "--out", out,
        ];
        args.extend(SMALL);
        let o = priorsens(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let fa = read_dir_sorted(a.path());
    assert_eq!(fa, read_dir_sorted(b.path()));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"provenance_model1_0.4.json"));
    let est = String::from_utf8(fa.iter().find(|(n, _)| n == "estimates_model1_0.4.csv").unwrap().1.clone()).unwrap();
    let labels: Vec<&str> = est.lines().skip(1).map(|l| l.split("\",").next().unwrap()).collect();
    assert_eq!(labels, ["\"7.IG(2, 2tau^2)", "\"8.HT(4, tau)"]);
}

#[test]
fn omitted_sampler_flags_take_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = priorsens(&[
        "run-study", "--model", "1", "--tau", "2", "--n-datasets", "1", "--priors", "9",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("provenance_model1_2.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let s = &v["config"]["sampler"];
    assert_eq!(s["chains"], 4);
    assert_eq!(s["warmup"], 250);
    assert_eq!(s["draws"], 2500);
    assert_eq!(s["target_accept"], 0.99);
}

#[test]
fn provenance_reruns_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut args = vec![
        "run-study", "--model", "2", "--tau", "1", "--n-datasets", "1", "--seed", "3",
        "--priors", "4", "--out", a.path().to_str().unwrap(),
    ];
    args.extend(SMALL);
    assert!(priorsens(&args).status.success());
    let prov = a.path().join("provenance_model2_1.json");
    let o = priorsens(&[
        "run-study", "--config", prov.to_str().unwrap(), "--out", b.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));
}

#[test]
fn config_file_drives_a_study() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.json");
    fs::write(
        &cfg,
        r#"{"model": 1, "true_params": {"tau": 10}, "n_datasets": 1,
            "sampler": {"chains": 2, "warmup": 150, "draws": 200}, "prior_subset": [4]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = priorsens(&["run-study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let diag = fs::read_to_string(out.join("diagnostics_model1_10.csv")).unwrap();
    assert_eq!(
        diag.lines().next().unwrap(),
        "label,true_value,min_ess,med_ess,mean_rhat,max_rhat,mean_div,pct_zero_dt,max_dt"
    );
    assert!(diag.lines().nth(1).unwrap().starts_with("\"4.HT(4, 1)\",10,"));
}

#[test]
fn bad_inputs_fail_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let o = priorsens(&["run-study", "--config", bad.to_str().unwrap(), "--out", out_s]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("parsing"));

    let o = priorsens(&["run-study", "--model", "1", "--tau", "1", "--bogus", "--out", out_s]);
    assert!(!o.status.success());

    let o = priorsens(&["run-study", "--model", "1", "--tau", "1", "--priors", "15", "--out", out_s]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("15"));

    let o = priorsens(&["run-study", "--model", "1", "--tau", "-1", "--out", out_s]);
    assert!(!o.status.success());
    assert!(!out.exists());

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let mut args = vec![
        "run-study", "--model", "1", "--tau", "2", "--n-datasets", "1", "--priors", "7",
        "--out", blocker.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let o = priorsens(&args);
    assert!(!o.status.success());
    assert!(!stderr(&o).is_empty());
}

#[test]
fn gibbs_check_rejects_half_t_priors() {
    let dir = tempfile::tempdir().unwrap();
    let o = priorsens(&["gibbs-check", "--tau", "2", "--prior", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("inverse-gamma"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn gibbs_check_writes_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "gibbs-check", "--tau", "2", "--prior", "7", "--n-datasets", "2", "--seed", "1",
        "--out", dir.path().to_str().unwrap(),
    ];
    args.extend(SMALL);
    let o = priorsens(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("gibbs_check_model1_2_p7.csv")).unwrap();
    assert!(csv.starts_with("dataset,prior,nuts_mean,nuts_mcse,gibbs_mean,gibbs_mcse,z,n_divergent\n"));
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("provenance_gibbs_check_model1_2_p7.json").exists());
}

#[test]
fn reml_check_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = priorsens(&[
        "reml-check", "--tau", "0.1", "--n", "10", "--n-datasets", "100", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("reml_check_0.1_n10.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "pct_zero").unwrap();
    let pct: f64 = values[col].parse().unwrap();
    assert!((0.0..=100.0).contains(&pct));
    assert!(dir.path().join("provenance_reml_check_0.1_n10.json").exists());
}

#[test]
fn grad_check_exit_status() {
    let o = priorsens(&["grad-check", "--model", "3", "--prior", "8", "--points", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("max_rel_error"));
    let o = priorsens(&["grad-check", "--model", "4", "--prior", "8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let mut args = vec![
            "run-study", "--model", "1", "--tau", "2", "--n-datasets", "2", "--seed", "5",
            "--priors", "1,6", "--out", dir.path().to_str().unwrap(),
        ];
        args.extend(SMALL);
        let o = Command::new(env!("CARGO_BIN_EXE_priorsens"))
            .args(&args)
            .env("PRIORSENS_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));

    let o = Command::new(env!("CARGO_BIN_EXE_priorsens"))
        .args(["reml-check", "--tau", "1", "--out", a.path().to_str().unwrap()])
        .env("PRIORSENS_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("PRIORSENS_THREADS"));
}
